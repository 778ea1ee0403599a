//! Adaptive Gauss-Kronrod (15/31) quadrature for vector-valued integrands.

#[allow(clippy::excessive_precision)]
const XGK: [f64; 16] = [
    0.998_002_298_693_397_060_285_172_840_152_271,
    0.987_992_518_020_485_428_489_565_718_586_613,
    0.967_739_075_679_139_134_257_347_978_784_337,
    0.937_273_392_400_705_904_307_758_947_710_209,
    0.897_264_532_344_081_900_882_509_656_454_496,
    0.848_206_583_410_427_216_200_648_320_774_217,
    0.790_418_501_442_465_932_967_649_294_817_947,
    0.724_417_731_360_170_047_416_186_054_613_938,
    0.650_996_741_297_416_970_533_735_895_313_275,
    0.570_972_172_608_538_847_537_226_737_253_911,
    0.485_081_863_640_239_680_693_655_740_232_351,
    0.394_151_347_077_563_369_897_207_370_981_045,
    0.299_180_007_153_168_812_166_780_024_266_389,
    0.201_194_093_997_434_522_300_628_303_394_596,
    0.101_142_066_918_717_499_027_074_231_447_392,
    0.0,
];

#[allow(clippy::excessive_precision)]
const WG: [f64; 8] = [
    0.030_753_241_996_117_268_354_628_393_577_204,
    0.070_366_047_488_108_124_709_267_416_450_667,
    0.107_159_220_467_171_935_011_869_546_685_869,
    0.139_570_677_926_154_314_447_804_794_511_028,
    0.166_269_205_816_993_933_553_200_860_481_209,
    0.186_161_000_015_562_211_026_800_561_866_423,
    0.198_431_485_327_111_576_456_118_326_443_839,
    0.202_578_241_925_561_272_880_620_199_967_519,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 16] = [
    0.005_377_479_872_923_348_987_792_051_430_128,
    0.015_007_947_329_316_122_538_374_763_075_807,
    0.025_460_847_326_715_320_186_874_001_019_653,
    0.035_346_360_791_375_846_222_037_948_478_360,
    0.044_589_751_324_764_876_608_227_299_373_280,
    0.053_481_524_690_928_087_265_343_147_239_430,
    0.062_009_567_800_670_640_285_139_230_960_803,
    0.069_854_121_318_728_258_709_520_077_099_147,
    0.076_849_680_757_720_378_894_432_777_482_659,
    0.083_080_502_823_133_021_038_289_247_286_104,
    0.088_564_443_056_211_770_647_275_443_693_774,
    0.093_126_598_170_825_321_225_486_872_747_346,
    0.096_642_726_983_623_678_505_179_907_627_589,
    0.099_173_598_721_791_959_332_393_173_484_603,
    0.100_769_845_523_875_595_044_946_662_617_570,
    0.101_330_007_014_791_549_017_374_792_767_493,
];

/// One 31-point Kronrod panel; returns (kronrod estimate, |kronrod - gauss|).
pub fn gk31<const N: usize, F>(f: &F, a: f64, b: f64) -> ([f64; N], [f64; N])
where
    F: Fn(f64) -> [f64; N],
{
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = [0.0; N];
    let mut g = [0.0; N];
    for i in 0..N {
        k[i] = fc[i] * WGK[15];
        g[i] = fc[i] * WG[7];
    }
    for j in 0..15 {
        let dx = h * XGK[j];
        let f1 = f(c - dx);
        let f2 = f(c + dx);
        for i in 0..N {
            let s = f1[i] + f2[i];
            k[i] += WGK[j] * s;
            if j % 2 == 1 {
                g[i] += WG[j / 2] * s;
            }
        }
    }
    let mut err = [0.0; N];
    for i in 0..N {
        k[i] *= h;
        err[i] = (k[i] - g[i] * h).abs();
    }
    (k, err)
}

/// Result of an adaptive integration.
#[derive(Clone, Copy, Debug)]
pub struct Integral<const N: usize> {
    pub value: [f64; N],
    pub error: [f64; N],
    pub converged: bool,
}

/// Adaptively integrates `f` over `[a, b]` until every component's error
/// estimate falls below `abs_tol` (per component) or the panel budget runs out.
pub fn integrate<const N: usize, F>(
    f: &F,
    a: f64,
    b: f64,
    abs_tol: [f64; N],
    max_depth: u32,
) -> Integral<N>
where
    F: Fn(f64) -> [f64; N],
{
    let mut value = [0.0; N];
    let mut error = [0.0; N];
    let mut converged = true;
    let width = b - a;
    let mut stack = vec![(a, b, 0u32)];
    while let Some((lo, hi, depth)) = stack.pop() {
        let (v, e) = gk31(f, lo, hi);
        let frac = (hi - lo) / width;
        let ok = (0..N).all(|i| e[i] <= abs_tol[i] * frac.max(1e-3) || e[i] <= 1e-15 * v[i].abs());
        if ok || depth >= max_depth {
            if !ok {
                converged = false;
            }
            for i in 0..N {
                value[i] += v[i];
                error[i] += e[i];
            }
        } else {
            let mid = 0.5 * (lo + hi);
            stack.push((mid, hi, depth + 1));
            stack.push((lo, mid, depth + 1));
        }
    }
    Integral {
        value,
        error,
        converged,
    }
}

/// Scalar convenience wrapper around [`integrate`].
pub fn integrate_scalar<F>(f: F, a: f64, b: f64, abs_tol: f64) -> (f64, f64)
where
    F: Fn(f64) -> f64,
{
    let g = |x: f64| [f(x)];
    let r = integrate(&g, a, b, [abs_tol], 40);
    (r.value[0], r.error[0])
}

/// Integrates over `[a, +inf)` with geometrically growing panels, stopping once
/// a wide panel contributes less than `abs_tol * 1e-3`.
pub fn integrate_to_infinity<F>(f: F, a: f64, first_width: f64, abs_tol: f64, max_panels: usize) -> f64
where
    F: Fn(f64) -> f64,
{
    let mut lo = a;
    let mut w = first_width;
    let mut total = 0.0;
    for _ in 0..max_panels {
        let hi = lo + w;
        let (v, _) = integrate_scalar(&f, lo, hi, abs_tol);
        total += v;
        if v.abs() < abs_tol * 1e-3 && w > 1e3 * first_width {
            break;
        }
        lo = hi;
        w *= 1.5;
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_exact() {
        let (v, _) = integrate_scalar(|x| x.powi(7) - 3.0 * x * x, 0.0, 2.0, 1e-14);
        assert!((v - (256.0 / 8.0 - 8.0)).abs() < 1e-12);
    }

    #[test]
    fn gaussian_integral() {
        let (v, _) = integrate_scalar(|x| (-x * x).exp(), -10.0, 10.0, 1e-14);
        assert!((v - std::f64::consts::PI.sqrt()).abs() < 1e-13);
    }

    #[test]
    fn endpoint_singularity_adapts() {
        let (v, _) = integrate_scalar(|x: f64| x.sqrt(), 0.0, 1.0, 1e-12);
        assert!((v - 2.0 / 3.0).abs() < 1e-10);
    }

    #[test]
    fn tail_integral() {
        let v = integrate_to_infinity(|x| 1.0 / (x * x), 1.0, 1.0, 1e-12, 200);
        assert!((v - 1.0).abs() < 1e-6, "{v}");
    }
}
