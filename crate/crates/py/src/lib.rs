//! Python bindings for the `levybridge` crate.

use levybridge::bifurcation::{self, Criterion, Extremum};
use levybridge::bridge::{self, BridgeSpec};
use levybridge::passage::{self, CrossingExperiment, Monitoring, SamplerKind, Target};
use levybridge::stable::{self, StableParams};
use levybridge::Error;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn err(e: Error) -> PyErr {
    match e {
        Error::Domain(_) => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn params(alpha: f64, sigma: f64) -> PyResult<StableParams> {
    StableParams::new(alpha, sigma).map_err(err)
}

fn spec(alpha: f64, sigma: f64, total_time: f64, arrival: f64) -> PyResult<BridgeSpec> {
    BridgeSpec::new(params(alpha, sigma)?, total_time, arrival).map_err(err)
}

/// Density of the symmetric stable process at time `t`.
#[pyfunction]
#[pyo3(signature = (alpha, x, t=1.0, sigma=1.0))]
fn stable_pdf(alpha: f64, x: f64, t: f64, sigma: f64) -> PyResult<f64> {
    stable::stable_pdf(params(alpha, sigma)?, t, x).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (alpha, x, t=1.0, sigma=1.0))]
fn stable_cdf(alpha: f64, x: f64, t: f64, sigma: f64) -> PyResult<f64> {
    stable::stable_cdf(params(alpha, sigma)?, t, x).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (alpha, p, t=1.0, sigma=1.0))]
fn stable_quantile(alpha: f64, p: f64, t: f64, sigma: f64) -> PyResult<f64> {
    stable::stable_quantile(params(alpha, sigma)?, t, p).map_err(err)
}

/// Density of the bridge midpoint `x(T/2)` given `x(T) = L`.
#[pyfunction]
#[pyo3(signature = (alpha, L, x, T=1.0, sigma=1.0))]
#[allow(non_snake_case)]
fn midpoint_pdf(alpha: f64, L: f64, x: f64, T: f64, sigma: f64) -> PyResult<f64> {
    bridge::midpoint_pdf(spec(alpha, sigma, T, L)?, x).map_err(err)
}

/// Critical points of the midpoint density as `(x, "max" | "min")`, sorted by `x`.
#[pyfunction]
#[pyo3(signature = (alpha, L, T=1.0, sigma=1.0))]
#[allow(non_snake_case)]
fn midpoint_extrema(alpha: f64, L: f64, T: f64, sigma: f64) -> PyResult<Vec<(f64, &'static str)>> {
    let e = bifurcation::midpoint_extrema(spec(alpha, sigma, T, L)?).map_err(err)?;
    Ok(e.iter()
        .map(|c| {
            let kind = match c.kind {
                Extremum::Max => "max",
                Extremum::Min => "min",
            };
            (c.x, kind)
        })
        .collect())
}

/// Bifurcation length `L_b`; `criterion` is "curvature", "tangent" or "equal_height".
#[pyfunction]
#[pyo3(signature = (alpha, sigma=1.0, T=1.0, criterion="curvature"))]
#[allow(non_snake_case)]
fn bifurcation_length(alpha: f64, sigma: f64, T: f64, criterion: &str) -> PyResult<f64> {
    let c: Criterion = criterion.parse().map_err(err)?;
    Ok(bifurcation::bifurcation_length(alpha, sigma, T, c).map_err(err)?.length)
}

#[pyfunction]
fn alpha_critical() -> PyResult<f64> {
    bifurcation::alpha_critical().map_err(err)
}

/// Exact bridges on `2^depth` dyadic steps: `(times, [positions per path])`.
#[pyfunction]
#[pyo3(signature = (alpha, L, T=1.0, sigma=1.0, depth=10, n_paths=1, seed=0))]
#[allow(non_snake_case, clippy::too_many_arguments)]
fn sample_bridges(
    alpha: f64,
    L: f64,
    T: f64,
    sigma: f64,
    depth: u32,
    n_paths: usize,
    seed: u64,
) -> PyResult<(Vec<f64>, Vec<Vec<f64>>)> {
    let ens = bridge::sample_ensemble(spec(alpha, sigma, T, L)?, depth, n_paths, seed).map_err(err)?;
    let paths = (0..n_paths).map(|i| ens.positions_of(i).to_vec()).collect();
    Ok((ens.times(), paths))
}

/// Probability that a bridge ending at `L` strictly exceeds `d`, from exact
/// bridges on `2^depth` steps: `(estimate, standard error)`.
#[pyfunction]
#[pyo3(signature = (alpha, L, d, T=1.0, sigma=1.0, depth=10, n_paths=10000, seed=0))]
#[allow(non_snake_case, clippy::too_many_arguments)]
fn crossing_probability(
    alpha: f64,
    L: f64,
    d: f64,
    T: f64,
    sigma: f64,
    depth: u32,
    n_paths: usize,
    seed: u64,
) -> PyResult<(f64, f64)> {
    let exp = CrossingExperiment {
        target: Target::Bridge {
            spec: spec(alpha, sigma, T, L)?,
        },
        boundary: d,
        sampler: SamplerKind::Recursive { depth },
        monitoring: Monitoring::Sampled,
        n_paths,
        seed,
    };
    let est = passage::crossing_probability(&exp).map_err(err)?;
    Ok((est.estimate, est.std_error))
}

#[pymodule]
fn pylevybridge(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(stable_pdf, m)?)?;
    m.add_function(wrap_pyfunction!(stable_cdf, m)?)?;
    m.add_function(wrap_pyfunction!(stable_quantile, m)?)?;
    m.add_function(wrap_pyfunction!(midpoint_pdf, m)?)?;
    m.add_function(wrap_pyfunction!(midpoint_extrema, m)?)?;
    m.add_function(wrap_pyfunction!(bifurcation_length, m)?)?;
    m.add_function(wrap_pyfunction!(alpha_critical, m)?)?;
    m.add_function(wrap_pyfunction!(sample_bridges, m)?)?;
    m.add_function(wrap_pyfunction!(crossing_probability, m)?)?;
    Ok(())
}
