use std::fs;
use std::path::{Path, PathBuf};

use clap::Parser;
use levybridge::bifurcation::{alpha_critical, alpha_critical_solution, bifurcation_length, midpoint_extrema, Criterion, Extremum};
use levybridge::bridge::{midpoint_pdf_grid, sample_ensemble, write_ensemble, BridgeSpec};
use levybridge::passage::{
    crossing_curve, crossing_probability, first_passage_histogram, gaussian_bridge_fp_cdf, threshold_sweep,
    CrossingExperiment, FirstPassageHistogram, Monitoring, SamplerKind, SweepConfig, Target, ThresholdUnit,
};
use levybridge::stable::{stable_cdf, stable_pdf_derivative, StableDensity, StableParams};
use levybridge::{Error, Result};
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::output::{num, CliResult, Failure, Manifest, OutputSet, MANIFEST_SUFFIX};
use crate::{
    ArrivalArgs, Cli, Command, CriterionChoice, CrossingArgs, ExperimentArgs, FirstPassageArgs, Grid, LbArgs,
    MidpointArgs, PdfArgs, ReplayArgs, SampleArgs, SamplerChoice, SweepArgs, UnitChoice,
};

/// Where outputs go and how the command was invoked.
pub struct Ctx {
    pub out_dir: PathBuf,
    pub args: Vec<String>,
}

impl Ctx {
    pub fn manifest<T: Serialize>(&self, command: &str, config: &T, resolved: Value, seed: Option<u64>) -> Result<Manifest> {
        Ok(Manifest::new(command, self.args.clone(), serde_json::to_value(config)?, resolved, seed))
    }
}

/// Runs one command; returns the manifest written, if any.
pub fn run(cli: &Cli, args: Vec<String>) -> CliResult<Option<PathBuf>> {
    let ctx = Ctx {
        out_dir: cli.out_dir.clone(),
        args,
    };
    match &cli.command {
        Command::Pdf(a) => pdf(&ctx, a),
        Command::Midpoint(a) => midpoint(&ctx, a),
        Command::Lb(a) => lb(a).map(|_| None),
        Command::AlphaCritical => {
            println!("{}", serde_json::to_string_pretty(&alpha_critical_solution()?)?);
            Ok(None)
        }
        Command::BridgeSample(a) => bridge_sample(&ctx, a).map(Some),
        Command::Crossing(a) => crossing(&ctx, a).map(Some),
        Command::FirstPassage(a) => first_passage(&ctx, a).map(Some),
        Command::Sweep(a) => sweep(&ctx, a).map(Some),
        Command::Figure(a) => crate::figures::figure(&ctx, a).map(Some),
        Command::Replay(a) => replay(&cli.out_dir, a),
    }
}

/// Curvature `L_b`, or `None` at `alpha = 2` where it diverges.
pub fn lb_of(alpha: f64, sigma: f64, total_time: f64) -> Result<Option<f64>> {
    match bifurcation_length(alpha, sigma, total_time, Criterion::Curvature) {
        Ok(b) => Ok(Some(b.length)),
        Err(Error::Divergence(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Resolves a length given absolutely or in units of `L_b`, recording both.
fn resolve(
    abs: Option<f64>,
    units: Option<f64>,
    default: f64,
    lb: Option<f64>,
    what: &str,
    resolved: &mut Map<String, Value>,
) -> Result<f64> {
    let v = match (abs, units) {
        (Some(v), _) => v,
        (None, Some(u)) => match lb {
            Some(lb) => u * lb,
            None => return Err(Error::Divergence(format!("{what} in units of L_b: L_b diverges at alpha = 2"))),
        },
        (None, None) => default,
    };
    resolved.insert(what.to_string(), json!(v));
    resolved.insert(format!("{what}_over_Lb"), json!(lb.map(|lb| v / lb)));
    Ok(v)
}

fn resolve_arrival(a: &ArrivalArgs, lb: Option<f64>, resolved: &mut Map<String, Value>) -> Result<f64> {
    resolve(a.l, a.l_units, 0.0, lb, "L", resolved)
}

fn pdf(ctx: &Ctx, a: &PdfArgs) -> CliResult<Option<PathBuf>> {
    let params = StableParams::new(a.process.alpha, a.process.sigma)?;
    if a.order > 4 {
        return Err(Failure::usage(format!("derivative order must be at most 4, got {}", a.order)));
    }
    if a.x.is_empty() && a.grid.is_none() {
        return Err(Failure::usage("give --x or --grid"));
    }
    let density = StableDensity::new(params, a.t)?;
    let eval = |x: f64| -> Result<f64> {
        if a.cdf {
            stable_cdf(params, a.t, x)
        } else if a.order == 0 {
            Ok(density.pdf(x))
        } else {
            stable_pdf_derivative(params, a.t, x, a.order)
        }
    };
    for &x in &a.x {
        println!("{:.*}", a.digits, eval(x)?);
    }
    let Some(grid) = a.grid else { return Ok(None) };
    let column = if a.cdf {
        "F".to_string()
    } else if a.order == 0 {
        "f".to_string()
    } else {
        format!("f{}", a.order)
    };
    let mut out = OutputSet::new(&ctx.out_dir)?;
    out.write_csv(&format!("{}.csv", a.name), &["x", &column], |w| {
        for x in grid.points() {
            w.write_record([num(x), num(eval(x)?)])?;
        }
        Ok(())
    })?;
    let m = ctx.manifest("pdf", a, json!({ "scale": params.scale(a.t) }), None)?;
    Ok(Some(out.finish(&format!("{}{MANIFEST_SUFFIX}", a.name), m, "ok")?))
}

fn kind_name(k: Extremum) -> &'static str {
    match k {
        Extremum::Max => "max",
        Extremum::Min => "min",
    }
}

fn midpoint(ctx: &Ctx, a: &MidpointArgs) -> CliResult<Option<PathBuf>> {
    let params = StableParams::new(a.process.alpha, a.process.sigma)?;
    let lb = lb_of(a.process.alpha, a.process.sigma, a.total_time)?;
    let mut resolved = Map::new();
    resolved.insert("Lb".into(), json!(lb));
    let l = resolve_arrival(&a.arrival, lb, &mut resolved)?;
    let spec = BridgeSpec::new(params, a.total_time, l)?;
    if !a.x.is_empty() {
        for f in midpoint_pdf_grid(spec, &a.x)? {
            println!("{:.*}", a.digits, f);
        }
    }
    let write_files = a.grid.is_some() || (a.x.is_empty() && !a.locate_extrema);
    if !write_files {
        if a.locate_extrema {
            println!("x,type");
            for p in midpoint_extrema(spec)? {
                println!("{:.*},{}", a.digits, p.x, kind_name(p.kind));
            }
        }
        return Ok(None);
    }
    let grid = a.grid.unwrap_or_else(|| {
        let s = params.scale(0.5 * a.total_time);
        let w = 0.5 * l.abs() + 6.0 * s;
        Grid {
            lo: 0.5 * l - w,
            hi: 0.5 * l + w,
            n: 401,
        }
    });
    let xs = grid.points();
    let fs_ = midpoint_pdf_grid(spec, &xs)?;
    let mut out = OutputSet::new(&ctx.out_dir)?;
    out.write_csv(&format!("{}.csv", a.name), &["x", "f"], |w| {
        for (x, f) in xs.iter().zip(&fs_) {
            w.write_record([num(*x), num(*f)])?;
        }
        Ok(())
    })?;
    if a.locate_extrema {
        let ex = midpoint_extrema(spec)?;
        let fx = midpoint_pdf_grid(spec, &ex.iter().map(|p| p.x).collect::<Vec<_>>())?;
        out.write_csv(&format!("{}.extrema.csv", a.name), &["x", "type", "f"], |w| {
            for (p, f) in ex.iter().zip(&fx) {
                w.write_record([num(p.x), kind_name(p.kind).to_string(), num(*f)])?;
            }
            Ok(())
        })?;
    }
    let m = ctx.manifest("midpoint", a, Value::Object(resolved), None)?;
    Ok(Some(out.finish(&format!("{}{MANIFEST_SUFFIX}", a.name), m, "ok")?))
}

fn lb(a: &LbArgs) -> CliResult<()> {
    let criteria: Vec<Criterion> = match a.criterion {
        CriterionChoice::Curvature => vec![Criterion::Curvature],
        CriterionChoice::Tangent => vec![Criterion::Tangent],
        CriterionChoice::EqualHeight => vec![Criterion::EqualHeight],
        CriterionChoice::All => Criterion::ALL.to_vec(),
    };
    let ac = if a.criterion == CriterionChoice::All {
        Some(alpha_critical()?)
    } else {
        None
    };
    println!("alpha,criterion,L_b,residual");
    for &alpha in &a.alpha {
        for &c in &criteria {
            // with --criterion all, the side-peak criteria only exist above alpha_c
            if c != Criterion::Curvature && ac.is_some_and(|ac| alpha <= ac) {
                continue;
            }
            let b = bifurcation_length(alpha, a.sigma, a.total_time, c)?;
            println!("{},{},{},{:e}", alpha, c.name(), b.length, b.residual);
        }
    }
    Ok(())
}

fn bridge_sample(ctx: &Ctx, a: &SampleArgs) -> CliResult<PathBuf> {
    let params = StableParams::new(a.process.alpha, a.process.sigma)?;
    let lb = lb_of(a.process.alpha, a.process.sigma, a.total_time)?;
    let mut resolved = Map::new();
    resolved.insert("Lb".into(), json!(lb));
    let l = resolve_arrival(&a.arrival, lb, &mut resolved)?;
    let spec = BridgeSpec::new(params, a.total_time, l)?;
    let ens = sample_ensemble(spec, a.depth, a.n_paths, a.seed)?;
    resolved.insert("n_points".into(), json!(ens.header.n_points));
    resolved.insert("streams".into(), json!("path i uses stream i of the seed"));
    let mut out = OutputSet::new(&ctx.out_dir)?;
    let file = out.register(&format!("{}.lvb", a.name));
    write_ensemble(&ens, &file)?;
    if a.csv {
        let times = ens.times();
        out.write_csv(&format!("{}.csv", a.name), &["path", "t", "x"], |w| {
            for i in 0..ens.header.n_paths {
                for (t, x) in times.iter().zip(ens.positions_of(i)) {
                    w.write_record([i.to_string(), num(*t), num(*x)])?;
                }
            }
            Ok(())
        })?;
    }
    let m = ctx.manifest("bridge-sample", a, Value::Object(resolved), Some(a.seed))?;
    eprintln!("{} paths of {} points", ens.header.n_paths, ens.header.n_points);
    Ok(out.finish(&format!("{}{MANIFEST_SUFFIX}", a.name), m, "ok")?)
}

/// Builds the experiment and records the lengths it resolved.
pub fn build_experiment(e: &ExperimentArgs) -> Result<(CrossingExperiment, Map<String, Value>)> {
    let params = StableParams::new(e.process.alpha, e.process.sigma)?;
    let t = e.total_time;
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::Domain(format!("T must be positive and finite, got {t}")));
    }
    let lb = lb_of(e.process.alpha, e.process.sigma, t)?;
    let mut resolved = Map::new();
    resolved.insert("Lb".into(), json!(lb));
    let target = if e.unconditioned {
        Target::Unconditioned { params, total_time: t }
    } else {
        let l = resolve_arrival(&e.arrival, lb, &mut resolved)?;
        Target::Bridge {
            spec: BridgeSpec::new(params, t, l)?,
        }
    };
    let d = resolve(e.d, e.d_units, params.scale(t), lb, "d", &mut resolved)?;
    let choice = e.sampler.unwrap_or(if e.unconditioned {
        SamplerChoice::Increments
    } else {
        SamplerChoice::Recursive
    });
    let dt = e.dt.unwrap_or(t / 2f64.powi(e.depth as i32));
    let sampler = match choice {
        SamplerChoice::Recursive => {
            if e.dt.is_some() {
                return Err(Error::Domain("--dt does not apply to the recursive sampler; use --depth".into()));
            }
            SamplerKind::Recursive { depth: e.depth }
        }
        SamplerChoice::Stretched => {
            let threshold = resolve(e.threshold, e.threshold_units, f64::INFINITY, lb, "L_thresh", &mut resolved)?;
            SamplerKind::Stretched {
                dt,
                threshold,
                max_attempts: e.max_attempts,
            }
        }
        SamplerChoice::Increments => SamplerKind::Increments { dt },
    };
    let exp = CrossingExperiment {
        target,
        boundary: d,
        sampler,
        monitoring: if e.continuous {
            Monitoring::ContinuousGaussian
        } else {
            Monitoring::Sampled
        },
        n_paths: e.n_paths,
        seed: e.seed,
    };
    resolved.insert("experiment".into(), serde_json::to_value(exp)?);
    Ok((exp, resolved))
}

fn crossing(ctx: &Ctx, a: &CrossingArgs) -> CliResult<PathBuf> {
    let (exp, resolved) = build_experiment(&a.experiment)?;
    let mut out = OutputSet::new(&ctx.out_dir)?;
    if a.d_list.is_empty() {
        let est = crossing_probability(&exp)?;
        println!("{:.6} +- {:.6} ({} of {} paths)", est.estimate, est.std_error, est.crossings, est.n_paths);
        out.write_json(&format!("{}.json", a.name), &json!({ "experiment": exp, "estimate": est }))?;
    } else {
        let curve = crossing_curve(&exp, &a.d_list)?;
        out.write_csv(&format!("{}.csv", a.name), &["d", "estimate", "stderr", "n", "crossings"], |w| {
            for (d, e) in a.d_list.iter().zip(&curve) {
                w.write_record([num(*d), num(e.estimate), num(e.std_error), e.n_paths.to_string(), e.crossings.to_string()])?;
            }
            Ok(())
        })?;
    }
    let m = ctx.manifest("crossing", a, Value::Object(resolved), Some(exp.seed))?;
    Ok(out.finish(&format!("{}{MANIFEST_SUFFIX}", a.name), m, "ok")?)
}

/// Continuous-time Gaussian bin fractions over crossers, for `alpha = 2` bridges.
pub fn gaussian_bin_fractions(exp: &CrossingExperiment, edges: &[f64]) -> Result<Option<Vec<f64>>> {
    let Target::Bridge { spec } = exp.target else { return Ok(None) };
    if spec.alpha() != 2.0 {
        return Ok(None);
    }
    let cdf = |t: f64| gaussian_bridge_fp_cdf(exp.boundary, spec.arrival, spec.sigma(), spec.total_time, t);
    let total = cdf(spec.total_time)?;
    if !(total > 0.0) {
        return Ok(None);
    }
    let mut prev = 0.0;
    let mut out = Vec::with_capacity(edges.len() - 1);
    for &e in &edges[1..] {
        let c = cdf(e)?;
        out.push((c - prev) / total);
        prev = c;
    }
    Ok(Some(out))
}

/// Bins whose observed fraction lies within three standard errors of `exact`,
/// the errors taken from the exact binomial model.
pub fn bins_within_3se(h: &FirstPassageHistogram, exact: &[f64]) -> usize {
    let n = h.crossers() as f64;
    h.fractions()
        .iter()
        .zip(exact)
        .filter(|(&f, &p)| (f - p).abs() <= 3.0 * (p * (1.0 - p) / n).sqrt())
        .count()
}

fn first_passage(ctx: &Ctx, a: &FirstPassageArgs) -> CliResult<PathBuf> {
    let (exp, resolved) = build_experiment(&a.experiment)?;
    let h = first_passage_histogram(&exp, a.n_bins)?;
    let exact = gaussian_bin_fractions(&exp, &h.edges)?;
    let fractions = h.fractions();
    let errors = h.fraction_errors();
    let density = h.density();
    let mut header = vec!["t_lo", "t_hi", "count", "fraction", "fraction_stderr", "density"];
    if exact.is_some() {
        header.push("gaussian_fraction");
    }
    let mut out = OutputSet::new(&ctx.out_dir)?;
    out.write_csv(&format!("{}.csv", a.name), &header, |w| {
        for j in 0..h.n_bins() {
            let mut row = vec![
                num(h.edges[j]),
                num(h.edges[j + 1]),
                h.counts[j].to_string(),
                num(fractions[j]),
                num(errors[j]),
                num(density[j]),
            ];
            if let Some(ex) = &exact {
                row.push(num(ex[j]));
            }
            w.write_record(&row)?;
        }
        Ok(())
    })?;
    let uniform = h.uniform_step_expectation();
    let chi_uniform = if h.empty || uniform.iter().any(|&p| p <= 0.0) {
        None
    } else {
        Some(h.chi_square(&uniform)?)
    };
    let (chi_exact, within_3se) = match &exact {
        Some(ex) if !h.empty => (Some(h.chi_square(ex)?), Some(bins_within_3se(&h, ex))),
        _ => (None, None),
    };
    out.write_json(
        &format!("{}.json", a.name),
        &json!({
            "experiment": exp,
            "crossing": h.crossing,
            "empty": h.empty,
            "n_steps": h.n_steps,
            "chi_square_uniform_steps": chi_uniform,
            "chi_square_gaussian": chi_exact,
            "bins_within_3se_of_gaussian": within_3se,
        }),
    )?;
    println!(
        "{} crossers of {} paths; crossing probability {:.6} +- {:.6}",
        h.crossers(),
        h.n_paths,
        h.crossing.estimate,
        h.crossing.std_error
    );
    let m = ctx.manifest("first-passage", a, Value::Object(resolved), Some(exp.seed))?;
    Ok(out.finish(&format!("{}{MANIFEST_SUFFIX}", a.name), m, "ok")?)
}

pub fn sweep_config(a: &SweepArgs) -> SweepConfig {
    SweepConfig {
        alphas: a.alphas.clone(),
        thresholds: a.thresholds.clone(),
        unit: match a.unit {
            UnitChoice::Lb => ThresholdUnit::BifurcationLength,
            UnitChoice::Absolute => ThresholdUnit::Absolute,
        },
        sigma: a.sigma,
        total_time: a.total_time,
        arrival: a.arrival,
        boundary_scale: a.boundary_scale,
        depth: a.depth,
        n_paths: a.n_paths,
        seed: a.seed,
        max_attempts: a.max_attempts,
    }
}

fn sweep(ctx: &Ctx, a: &SweepArgs) -> CliResult<PathBuf> {
    let cfg = sweep_config(a);
    let table = threshold_sweep(&cfg)?;
    let mut out = OutputSet::new(&ctx.out_dir)?;
    let mut buf = Vec::new();
    table.write_csv(&mut buf)?;
    out.write_bytes(&format!("{}.csv", a.name), &buf)?;
    out.write_json(&format!("{}.json", a.name), &table)?;
    let failure = table.first_failure().cloned();
    let m = ctx.manifest("sweep", a, json!({ "config": cfg }), Some(a.seed))?;
    let status = if failure.is_some() { "partial" } else { "ok" };
    let path = out.finish(&format!("{}{MANIFEST_SUFFIX}", a.name), m, status)?;
    match failure {
        None => Ok(path),
        Some(c) => Err(Failure::new(
            c.error_code.unwrap_or(1),
            format!(
                "sweep cell alpha = {}, threshold = {:?} failed: {}",
                c.alpha,
                c.threshold_units,
                c.error.unwrap_or_default()
            ),
        )),
    }
}

fn replay(out_dir: &Path, a: &ReplayArgs) -> CliResult<Option<PathBuf>> {
    let m = Manifest::read(&a.manifest)?;
    if m.version != env!("CARGO_PKG_VERSION") {
        eprintln!("warning: manifest written by version {}, replaying with {}", m.version, env!("CARGO_PKG_VERSION"));
    }
    let base = a.manifest.parent().unwrap_or(Path::new("."));
    let originals: Vec<(String, Option<Vec<u8>>)> = m
        .outputs
        .iter()
        .map(|f| (f.clone(), fs::read(base.join(f)).ok()))
        .collect();
    let argv = std::iter::once("levybridge".to_string()).chain(m.args.iter().cloned());
    let mut cli = Cli::try_parse_from(argv).map_err(|e| Failure::usage(format!("manifest arguments do not parse: {e}")))?;
    if matches!(cli.command, Command::Replay(_)) {
        return Err(Failure::usage("a replay manifest cannot be replayed"));
    }
    cli.out_dir = out_dir.to_path_buf();
    let Some(new_manifest) = run(&cli, m.args.clone())? else {
        return Err(Failure::usage("the recorded command writes no files"));
    };
    let new_base = new_manifest.parent().unwrap_or(Path::new("."));
    let mut differing = 0;
    for (name, orig) in &originals {
        let now = fs::read(new_base.join(name)).ok();
        let verdict = match (orig, now) {
            (None, _) => "original missing",
            (_, None) => {
                differing += 1;
                "not reproduced"
            }
            (Some(a), Some(b)) if *a == b => "identical",
            _ => {
                differing += 1;
                "differs"
            }
        };
        println!("{name}: {verdict}");
    }
    if differing > 0 {
        return Err(Failure::new(
            Error::Accuracy {
                what: String::new(),
                bound: 0.0,
            }
            .exit_code(),
            format!("{differing} replayed output(s) differ from the originals"),
        ));
    }
    Ok(Some(new_manifest))
}
