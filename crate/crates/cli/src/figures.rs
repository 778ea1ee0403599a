use std::path::PathBuf;
use std::time::Instant;

use levybridge::bifurcation::{
    alpha_critical_solution, bifurcation_diagram, bifurcation_length, geometric_grid, lb_asymptote,
    nagaev_bifurcation_length, Criterion, Extremum,
};
use levybridge::bridge::{effective_jump_census, midpoint_pdf_grid, sample_ensemble, write_ensemble, BridgeSpec, JumpRule};
use levybridge::passage::{
    crossing_probability_unconditioned, first_passage_histogram, gaussian_bridge_crossing_prob,
    gaussian_bridge_fp_density, threshold_sweep, CrossingExperiment, FirstPassageHistogram, Monitoring, SamplerKind,
    SweepConfig, Target, ThresholdUnit,
};
use levybridge::stable::StableParams;
use levybridge::{Error, Result};
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::commands::{bins_within_3se, gaussian_bin_fractions, lb_of, Ctx};
use crate::output::{num, CliResult, Failure, OutputSet};
use crate::{FigureArgs, FigureChoice, Scale};

/// Tolerance of the Cauchy closed-form comparison.
const CAUCHY_TOL: f64 = 1e-8;

/// Near-Gaussian index of the first-passage figure.
const FPT_ALPHA: f64 = 1.99999;

struct Preset {
    /// Lengths in extrema diagrams.
    diagram_points: usize,
    /// Points per density curve.
    curve_points: usize,
    /// Indices on the curvature `L_b` curve.
    lb_points: usize,
    sweep_paths: usize,
    sweep_depth: u32,
    fpt_paths: usize,
    fpt_depth: u32,
    bridge_paths: usize,
}

impl Preset {
    fn of(scale: Scale) -> Self {
        match scale {
            Scale::Desk => Preset {
                diagram_points: 200,
                curve_points: 401,
                lb_points: 35,
                sweep_paths: 10_000,
                sweep_depth: 10,
                fpt_paths: 100_000,
                fpt_depth: 10,
                bridge_paths: 10,
            },
            // 10^7 paths; dt = 2^-17 T stands in for 1e-5 T on the dyadic grid
            Scale::Paper => Preset {
                diagram_points: 2000,
                curve_points: 2001,
                lb_points: 171,
                sweep_paths: 10_000_000,
                sweep_depth: 17,
                fpt_paths: 10_000_000,
                fpt_depth: 14,
                bridge_paths: 10,
            },
        }
    }
}

#[derive(Serialize)]
struct PanelStatus {
    panel: String,
    status: &'static str,
    error: Option<String>,
    exit_code: Option<i32>,
}

/// Output directory plus the status of every panel run so far.
struct Bundle {
    out: OutputSet,
    panels: Vec<PanelStatus>,
    seconds: Map<String, Value>,
}

impl Bundle {
    fn panel<F>(&mut self, name: &str, f: F)
    where
        F: FnOnce(&mut OutputSet) -> CliResult<()>,
    {
        let start = Instant::now();
        let r = f(&mut self.out);
        self.seconds.insert(name.into(), json!(start.elapsed().as_secs_f64()));
        let status = match r {
            Ok(()) => PanelStatus {
                panel: name.into(),
                status: "ok",
                error: None,
                exit_code: None,
            },
            Err(e) => {
                eprintln!("panel {name} failed: {e}");
                PanelStatus {
                    panel: name.into(),
                    status: "failed",
                    error: Some(e.message),
                    exit_code: Some(e.code),
                }
            }
        };
        self.panels.push(status);
    }
}

pub fn figure(ctx: &Ctx, a: &FigureArgs) -> CliResult<PathBuf> {
    let name = serde_json::to_value(a.figure)?.as_str().unwrap_or("figure").to_string();
    let preset = Preset::of(a.scale);
    let mut b = Bundle {
        out: OutputSet::new(&ctx.out_dir.join(&name))?,
        panels: Vec::new(),
        seconds: Map::new(),
    };
    match a.figure {
        FigureChoice::Fig2 => fig2(&mut b, &preset),
        FigureChoice::Fig3 => fig3(&mut b, &preset),
        FigureChoice::Fig4 => fig4(&mut b, &preset),
        FigureChoice::Fig5 => fig5(&mut b, &preset, a),
        FigureChoice::Fig6 => fig6(&mut b, &preset, a),
        FigureChoice::Paths => paths(&mut b, &preset, a),
    }
    let failed: Vec<&PanelStatus> = b.panels.iter().filter(|p| p.exit_code.is_some()).collect();
    let first_code = failed.first().and_then(|p| p.exit_code);
    let n_failed = failed.len();
    let complete = n_failed == 0;
    let status = json!({ "figure": name, "complete": complete, "panels": b.panels });
    b.out.write_json("status.json", &status)?;
    let resolved = json!({ "panel_seconds": b.seconds });
    let m = ctx.manifest("figure", a, resolved, Some(a.seed))?;
    let path = b.out.finish("manifest.json", m, if complete { "ok" } else { "partial" })?;
    match first_code {
        None => Ok(path),
        Some(code) => Err(Failure::new(
            code,
            format!("{n_failed} of {} panels failed; see {}", b.panels.len(), path.with_file_name("status.json").display()),
        )),
    }
}

fn kind_name(k: Extremum) -> &'static str {
    match k {
        Extremum::Max => "max",
        Extremum::Min => "min",
    }
}

/// Equally spaced points on `[lo, hi]`.
fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect()
}

/// Cauchy midpoint extrema for `sigma = T = 1`: one maximum at `L/2` up to
/// `L = 1`, then maxima at `(L +- sqrt(L^2 - 1)) / 2` around a central minimum.
fn cauchy_extrema(l: f64) -> Vec<f64> {
    if l <= 1.0 {
        vec![0.5 * l]
    } else {
        let r = (l * l - 1.0).sqrt();
        vec![0.5 * (l - r), 0.5 * l, 0.5 * (l + r)]
    }
}

fn fig2(b: &mut Bundle, p: &Preset) {
    let lengths = geometric_grid(0.2, 5.0, p.diagram_points);
    b.panel("diagram", |out| {
        let d = bifurcation_diagram(1.0, 1.0, 1.0, &lengths)?;
        let mut buf = Vec::new();
        d.write_csv(&mut buf)?;
        out.write_bytes("branches.csv", &buf)?;
        out.write_json("events.json", &d.events)?;
        let mut worst = 0.0f64;
        let mut mismatched = Vec::new();
        out.write_csv("closed_form.csv", &["L", "x_minus", "x_centre", "x_plus", "max_abs_diff"], |w| {
            for (l, ex) in d.lengths.iter().zip(&d.extrema) {
                let closed = cauchy_extrema(*l);
                let diff = if closed.len() == ex.len() {
                    closed.iter().zip(ex).map(|(c, e)| (c - e.x).abs()).fold(0.0, f64::max)
                } else {
                    mismatched.push(*l);
                    f64::INFINITY
                };
                worst = worst.max(diff);
                let (lo, hi) = if closed.len() == 3 { (closed[0], closed[2]) } else { (f64::NAN, f64::NAN) };
                w.write_record([num(*l), num(lo), num(0.5 * l), num(hi), num(diff)])?;
            }
            Ok(())
        })?;
        let lb = bifurcation_length(1.0, 1.0, 1.0, Criterion::Curvature)?;
        let pass = worst <= CAUCHY_TOL;
        out.write_json(
            "check.json",
            &json!({
                "max_abs_diff": worst,
                "tolerance": CAUCHY_TOL,
                "pass": pass,
                "count_mismatch_at": mismatched,
                "curvature_Lb": lb.length,
            }),
        )?;
        if pass {
            Ok(())
        } else {
            Err(Error::Accuracy {
                what: "Cauchy branches against the closed form".into(),
                bound: worst,
            }
            .into())
        }
    });
    b.panel("densities", |out| {
        let params = StableParams::new(1.0, 1.0)?;
        out.write_csv("densities.csv", &["L", "x", "f"], |w| {
            for l in [0.5, 1.0, 1.5, 3.0] {
                let xs = linspace(0.5 * l - 4.0, 0.5 * l + 4.0, p.curve_points);
                let f = midpoint_pdf_grid(BridgeSpec::new(params, 1.0, l)?, &xs)?;
                for (x, f) in xs.iter().zip(&f) {
                    w.write_record([num(l), num(*x), num(*f)])?;
                }
            }
            Ok(())
        })?;
        Ok(())
    });
}

fn fig3(b: &mut Bundle, p: &Preset) {
    let multiples: Vec<f64> = match p.diagram_points {
        n if n > 500 => linspace(0.0, 3.0, 61),
        _ => vec![0.0, 0.25, 0.5, 0.75, 0.9, 1.0, 1.1, 1.25, 1.5, 2.0, 2.5],
    };
    for alpha in [1.5, 1.99, 1.99999] {
        b.panel(&format!("alpha_{alpha}"), |out| {
            let lb = bifurcation_length(alpha, 1.0, 1.0, Criterion::Curvature)?.length;
            let params = StableParams::new(alpha, 1.0)?;
            let s = params.scale(0.5);
            out.write_csv(&format!("densities_alpha_{alpha}.csv"), &["L_over_Lb", "L", "x", "f"], |w| {
                for &m in &multiples {
                    let l = m * lb;
                    let half = 0.5 * l + 5.0 * s;
                    let xs = linspace(0.5 * l - half, 0.5 * l + half, p.curve_points);
                    let f = midpoint_pdf_grid(BridgeSpec::new(params, 1.0, l)?, &xs)?;
                    for (x, f) in xs.iter().zip(&f) {
                        w.write_record([num(m), num(l), num(*x), num(*f)])?;
                    }
                }
                Ok(())
            })?;
            let lengths = geometric_grid(0.05 * lb, 3.0 * lb, p.diagram_points);
            let d = bifurcation_diagram(alpha, 1.0, 1.0, &lengths)?;
            out.write_csv(&format!("extrema_alpha_{alpha}.csv"), &["L_over_Lb", "L", "branch", "x", "type"], |w| {
                for q in &d.points {
                    w.write_record([num(q.length / lb), num(q.length), q.branch.to_string(), num(q.x), kind_name(q.kind).into()])?;
                }
                Ok(())
            })?;
            out.write_json(&format!("events_alpha_{alpha}.json"), &json!({ "Lb": lb, "events": d.events }))?;
            Ok(())
        });
    }
}

fn fig4(b: &mut Bundle, p: &Preset) {
    let mut ac = None;
    b.panel("alpha_critical", |out| {
        let c = alpha_critical_solution()?;
        ac = Some(c.alpha);
        out.write_json("alpha_critical.json", &c)?;
        Ok(())
    });
    b.panel("curvature", |out| {
        let mut alphas = linspace(0.3, 1.95, p.lb_points);
        alphas.extend([1.97, 1.99, 1.995, 1.999, 1.9999]);
        let mut lbs = Vec::new();
        out.write_csv("lb_curvature.csv", &["alpha", "L_b", "residual"], |w| {
            for &alpha in &alphas {
                let r = bifurcation_length(alpha, 1.0, 1.0, Criterion::Curvature)?;
                lbs.push(r.length);
                w.write_record([num(alpha), num(r.length), num(r.residual)])?;
            }
            Ok(())
        })?;
        let monotone = lbs.windows(2).all(|w| w[1] > w[0]);
        out.write_json("lb_curvature_check.json", &json!({ "increasing": monotone }))?;
        Ok(())
    });
    b.panel("side_criteria", |out| {
        let Some(ac) = ac else {
            return Err(Failure::new(6, "no critical index"));
        };
        let n = (p.lb_points / 3).max(8);
        // denser near alpha_c, where the three curves meet
        let mut alphas: Vec<f64> = (0..n)
            .map(|k| ac + 5e-4 + (1.99 - ac - 5e-4) * (k as f64 / (n - 1) as f64).powi(2))
            .collect();
        alphas.extend([1.995, 1.999]);
        let mut rows = Vec::new();
        for &alpha in &alphas {
            let mut v = [0.0; 3];
            for (i, c) in [Criterion::Tangent, Criterion::EqualHeight, Criterion::Curvature].iter().enumerate() {
                v[i] = bifurcation_length(alpha, 1.0, 1.0, *c)?.length;
            }
            rows.push((alpha, v));
        }
        out.write_csv("lb_side.csv", &["alpha", "L_tangent", "L_equal_height", "L_curvature"], |w| {
            for (alpha, v) in &rows {
                w.write_record([num(*alpha), num(v[0]), num(v[1]), num(v[2])])?;
            }
            Ok(())
        })?;
        let ordered = rows.iter().all(|(_, v)| v[0] < v[1] && v[1] < v[2]);
        let increasing = (0..3).all(|i| rows.windows(2).all(|w| w[1].1[i] > w[0].1[i]));
        let first = rows[0].1;
        out.write_json(
            "lb_side_check.json",
            &json!({
                "tangent_lt_equal_lt_curvature": ordered,
                "all_increasing": increasing,
                "spread_at_first_alpha": first[2] - first[0],
                "first_alpha": rows[0].0,
            }),
        )?;
        Ok(())
    });
    b.panel("asymptote", |out| {
        out.write_csv("asymptote.csv", &["delta", "alpha", "L_b", "L_b_nagaev", "L_b_formula"], |w| {
            for delta in [0.04, 0.02, 0.01, 0.005, 0.002, 0.001] {
                let exact = bifurcation_length(2.0 - delta, 1.0, 1.0, Criterion::Curvature)?.length;
                let nag = nagaev_bifurcation_length(delta, 1.0, 1.0)?;
                let formula = lb_asymptote(delta, 1.0, 1.0)?;
                w.write_record([num(delta), num(2.0 - delta), num(exact), num(nag), num(formula)])?;
            }
            Ok(())
        })?;
        Ok(())
    });
}

fn fig5(b: &mut Bundle, p: &Preset, a: &FigureArgs) {
    let n_paths = a.n_paths.unwrap_or(p.sweep_paths);
    let cfg = SweepConfig {
        alphas: vec![0.5, 1.0, 1.5, 1.9, 2.0],
        thresholds: vec![f64::INFINITY, 4.0, 2.0, 1.0, 0.5, 0.25, 0.1],
        unit: ThresholdUnit::BifurcationLength,
        sigma: 1.0,
        total_time: 1.0,
        arrival: 0.0,
        boundary_scale: 1.0,
        depth: p.sweep_depth,
        n_paths,
        seed: a.seed,
        max_attempts: levybridge::bridge::DEFAULT_MAX_ATTEMPTS,
    };
    b.panel("sweep", |out| {
        let table = threshold_sweep(&cfg)?;
        let mut buf = Vec::new();
        table.write_csv(&mut buf)?;
        out.write_bytes("sweep.csv", &buf)?;
        out.write_json("sweep.json", &table)?;
        match table.first_failure() {
            None => Ok(()),
            Some(c) => Err(Failure::new(
                c.error_code.unwrap_or(1),
                format!("cell alpha = {}, threshold = {:?}: {}", c.alpha, c.threshold_units, c.error.clone().unwrap_or_default()),
            )),
        }
    });
    b.panel("unconditioned", |out| {
        let dt = 1.0 / 2f64.powi(cfg.depth as i32);
        let mut rows = Vec::new();
        for &alpha in &cfg.alphas {
            let params = StableParams::new(alpha, 1.0)?;
            let e = crossing_probability_unconditioned(params, 1.0, params.scale(1.0), dt, n_paths, a.seed)?;
            rows.push((alpha, e));
        }
        out.write_csv("unconditioned.csv", &["alpha", "d", "estimate", "stderr", "n"], |w| {
            for (alpha, e) in &rows {
                w.write_record([num(*alpha), num(1.0), num(e.estimate), num(e.std_error), e.n_paths.to_string()])?;
            }
            Ok(())
        })?;
        Ok(())
    });
}

fn hist_rows(h: &FirstPassageHistogram, w: &mut csv::Writer<&mut Vec<u8>>) -> Result<()> {
    let f = h.fractions();
    let s = h.fraction_errors();
    let d = h.density();
    for j in 0..h.n_bins() {
        w.write_record([
            num(h.edges[j]),
            num(h.edges[j + 1]),
            h.counts[j].to_string(),
            num(f[j]),
            num(s[j]),
            num(d[j]),
        ])?;
    }
    Ok(())
}

fn fig6(b: &mut Bundle, p: &Preset, a: &FigureArgs) {
    let n_paths = a.n_paths.unwrap_or(p.fpt_paths);
    let n_bins = 20;
    let mut lb = None;
    b.panel("lb", |out| {
        let v = lb_of(FPT_ALPHA, 1.0, 1.0)?.ok_or_else(|| Failure::new(5, "L_b diverges"))?;
        lb = Some(v);
        out.write_json("lb.json", &json!({ "alpha": FPT_ALPHA, "Lb": v }))?;
        Ok(())
    });
    let Some(lb) = lb else { return };
    let cases = [
        (FPT_ALPHA, 0.1, false),
        (FPT_ALPHA, 2.0, false),
        (2.0, 0.1, true),
        (2.0, 2.0, true),
    ];
    for (alpha, m, continuous) in cases {
        let label = format!("alpha_{alpha}_L_{m}Lb");
        b.panel(&label.clone(), |out| {
            let l = m * lb;
            let spec = BridgeSpec::new(StableParams::new(alpha, 1.0)?, 1.0, l)?;
            let exp = CrossingExperiment {
                target: Target::Bridge { spec },
                boundary: 0.5 * l,
                sampler: SamplerKind::Recursive { depth: p.fpt_depth },
                monitoring: if continuous {
                    Monitoring::ContinuousGaussian
                } else {
                    Monitoring::Sampled
                },
                n_paths,
                seed: a.seed,
            };
            let h = first_passage_histogram(&exp, n_bins)?;
            out.write_csv(
                &format!("hist_{label}.csv"),
                &["t_lo", "t_hi", "count", "fraction", "fraction_stderr", "density"],
                |w| hist_rows(&h, w),
            )?;
            let uniform = h.uniform_step_expectation();
            let chi_uniform = if h.empty { None } else { Some(h.chi_square(&uniform)?) };
            let exact = gaussian_bin_fractions(&exp, &h.edges)?;
            let (chi_gauss, within) = match &exact {
                Some(ex) if !h.empty => {
                    (Some(h.chi_square(ex)?), Some(bins_within_3se(&h, ex)))
                }
                _ => (None, None),
            };
            out.write_json(
                &format!("summary_{label}.json"),
                &json!({
                    "alpha": alpha,
                    "L": l,
                    "L_over_Lb": m,
                    "d": exp.boundary,
                    "experiment": exp,
                    "crossing": h.crossing,
                    "chi_square_uniform_steps": chi_uniform,
                    "chi_square_gaussian": chi_gauss,
                    "bins_within_3se_of_gaussian": within,
                }),
            )?;
            Ok(())
        });
    }
    b.panel("gaussian_exact", |out| {
        let ts = linspace(0.0, 1.0, 401);
        out.write_csv("exact.csv", &["L_over_Lb", "L", "t", "density", "density_over_crossers"], |w| {
            for m in [0.1, 2.0] {
                let l = m * lb;
                let d = 0.5 * l;
                let total = gaussian_bridge_crossing_prob(d, l, 1.0, 1.0)?;
                for &t in &ts[1..ts.len() - 1] {
                    let f = gaussian_bridge_fp_density(d, l, 1.0, 1.0, t)?;
                    w.write_record([num(m), num(l), num(t), num(f), num(f / total)])?;
                }
            }
            Ok(())
        })?;
        let edges = linspace(0.0, 1.0, n_bins + 1);
        out.write_csv("exact_bins.csv", &["L_over_Lb", "t_lo", "t_hi", "fraction"], |w| {
            for m in [0.1, 2.0] {
                let l = m * lb;
                let spec = BridgeSpec::new(StableParams::new(2.0, 1.0)?, 1.0, l)?;
                let exp = CrossingExperiment {
                    target: Target::Bridge { spec },
                    boundary: 0.5 * l,
                    sampler: SamplerKind::Recursive { depth: 0 },
                    monitoring: Monitoring::ContinuousGaussian,
                    n_paths: 1,
                    seed: 0,
                };
                let fr = gaussian_bin_fractions(&exp, &edges)?.unwrap_or_default();
                for (j, f) in fr.iter().enumerate() {
                    w.write_record([num(m), num(edges[j]), num(edges[j + 1]), num(*f)])?;
                }
            }
            Ok(())
        })?;
        Ok(())
    });
}

fn paths(b: &mut Bundle, p: &Preset, a: &FigureArgs) {
    let alpha = 1.9;
    let n_paths = a.n_paths.unwrap_or(p.bridge_paths);
    for m in [0.5, 1.0, 1.5] {
        b.panel(&format!("L_{m}Lb"), |out| {
            let params = StableParams::new(alpha, 1.0)?;
            let lb = bifurcation_length(alpha, 1.0, 1.0, Criterion::Curvature)?.length;
            let spec = BridgeSpec::new(params, 1.0, m * lb)?;
            let ens = sample_ensemble(spec, 10, n_paths, a.seed)?;
            let file = out.register(&format!("bridges_L_{m}Lb.lvb"));
            write_ensemble(&ens, &file)?;
            let times = ens.times();
            out.write_csv(&format!("bridges_L_{m}Lb.csv"), &["path", "t", "x"], |w| {
                for i in 0..n_paths {
                    for (t, x) in times.iter().zip(ens.positions_of(i)) {
                        w.write_record([i.to_string(), num(*t), num(*x)])?;
                    }
                }
                Ok(())
            })?;
            let rule = JumpRule::from_bifurcation(params, 1.0)?;
            out.write_csv(&format!("jumps_L_{m}Lb.csv"), &["path", "step", "t", "size"], |w| {
                for i in 0..n_paths {
                    let c = effective_jump_census(&ens.path(i), rule);
                    for (j, s) in c.steps.iter().zip(&c.sizes) {
                        w.write_record([i.to_string(), j.to_string(), num(times[*j]), num(*s)])?;
                    }
                }
                Ok(())
            })?;
            Ok(())
        });
    }
}
