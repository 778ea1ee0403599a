use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::extrema::{midpoint_extrema, CriticalPoint, Extremum};
use crate::bridge::BridgeSpec;
use crate::error::{Error, Result};
use crate::stable::StableParams;

/// Bisections used to localize each event between grid values.
const EVENT_BISECTIONS: usize = 30;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    /// The centre splits into two maxima around a new minimum.
    Pitchfork,
    /// Two side minima merge into the centre, which becomes a minimum.
    ReversePitchfork,
    /// A max/min pair appears on each side.
    TangentBirth,
    /// A max/min pair disappears on each side.
    TangentDeath,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub kind: EventKind,
    /// Arrival distance at which the extremum count changes, bracketed to
    /// within `width`.
    pub length: f64,
    pub width: f64,
    pub count_before: usize,
    pub count_after: usize,
}

/// One traced critical point at one grid value.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BranchPoint {
    pub length: f64,
    pub branch: usize,
    pub x: f64,
    pub kind: Extremum,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtremaDiagram {
    pub alpha: f64,
    pub sigma: f64,
    pub total_time: f64,
    pub lengths: Vec<f64>,
    pub extrema: Vec<Vec<CriticalPoint>>,
    pub points: Vec<BranchPoint>,
    pub events: Vec<Event>,
}

fn centre_kind(e: &[CriticalPoint]) -> Extremum {
    e[e.len() / 2].kind
}

fn classify(before: &[CriticalPoint], after: &[CriticalPoint]) -> EventKind {
    let centre_flips = centre_kind(before) != centre_kind(after);
    match (after.len() > before.len(), centre_flips) {
        (true, true) => EventKind::Pitchfork,
        (true, false) => EventKind::TangentBirth,
        (false, true) => EventKind::ReversePitchfork,
        (false, false) => EventKind::TangentDeath,
    }
}

/// Critical points along a sorted grid of arrival distances, traced into
/// branches, with the events where their number changes.
pub fn bifurcation_diagram(alpha: f64, sigma: f64, total_time: f64, lengths: &[f64]) -> Result<ExtremaDiagram> {
    let params = StableParams::new(alpha, sigma)?;
    if lengths.is_empty() || lengths.windows(2).any(|w| !(w[1] > w[0])) || !(lengths[0] > 0.0) {
        return Err(Error::domain("length grid must be positive and strictly increasing"));
    }
    let at = |l: f64| midpoint_extrema(BridgeSpec::new(params, total_time, l)?);
    let extrema: Vec<Vec<CriticalPoint>> = lengths.par_iter().map(|&l| at(l)).collect::<Result<_>>()?;

    let mut events = Vec::new();
    for k in 1..lengths.len() {
        if extrema[k].len() == extrema[k - 1].len() && centre_kind(&extrema[k]) == centre_kind(&extrema[k - 1]) {
            continue;
        }
        // bisect towards the change nearest the left end
        let (mut a, mut b) = (lengths[k - 1], lengths[k]);
        let (ea, mut eb) = (extrema[k - 1].clone(), extrema[k].clone());
        for _ in 0..EVENT_BISECTIONS {
            let m = 0.5 * (a + b);
            let em = match at(m) {
                Ok(e) => e,
                // the critical points are too close to tell apart; keep the current bracket
                Err(Error::Resolution(_)) => break,
                Err(e) => return Err(e),
            };
            if em.len() == ea.len() && centre_kind(&em) == centre_kind(&ea) {
                a = m;
            } else {
                b = m;
                eb = em;
            }
        }
        events.push(Event {
            kind: classify(&ea, &eb),
            length: 0.5 * (a + b),
            width: b - a,
            count_before: ea.len(),
            count_after: eb.len(),
        });
        // a second change inside the same cell shows up when the right end differs from eb
        if eb.len() != extrema[k].len() {
            events.push(Event {
                kind: classify(&eb, &extrema[k]),
                length: 0.5 * (b + lengths[k]),
                width: lengths[k] - b,
                count_before: eb.len(),
                count_after: extrema[k].len(),
            });
        }
    }

    let points = trace(lengths, &extrema);
    Ok(ExtremaDiagram {
        alpha,
        sigma,
        total_time,
        lengths: lengths.to_vec(),
        extrema,
        points,
        events,
    })
}

/// Greedy nearest-neighbour continuation of critical points of equal type.
fn trace(lengths: &[f64], extrema: &[Vec<CriticalPoint>]) -> Vec<BranchPoint> {
    let mut points = Vec::new();
    let mut next_id = 0;
    let mut prev: Vec<(usize, CriticalPoint)> = Vec::new();
    for (k, set) in extrema.iter().enumerate() {
        let step = if k > 0 { lengths[k] - lengths[k - 1] } else { 0.0 };
        let tol = 2.0 * step + 1e-3 * lengths[k];
        let mut used = vec![false; prev.len()];
        let mut current = Vec::with_capacity(set.len());
        for p in set {
            let mut best: Option<(usize, f64)> = None;
            for (j, (_, q)) in prev.iter().enumerate() {
                if used[j] || q.kind != p.kind {
                    continue;
                }
                let d = (q.x - p.x).abs();
                if d <= tol && best.is_none_or(|(_, bd)| d < bd) {
                    best = Some((j, d));
                }
            }
            let id = match best {
                Some((j, _)) => {
                    used[j] = true;
                    prev[j].0
                }
                None => {
                    next_id += 1;
                    next_id - 1
                }
            };
            points.push(BranchPoint {
                length: lengths[k],
                branch: id,
                x: p.x,
                kind: p.kind,
            });
            current.push((id, *p));
        }
        prev = current;
    }
    points
}

impl ExtremaDiagram {
    /// CSV with columns `L, branch, x, type`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["L", "branch", "x", "type"])?;
        for p in &self.points {
            let kind = match p.kind {
                Extremum::Max => "max",
                Extremum::Min => "min",
            };
            w.write_record([p.length.to_string(), p.branch.to_string(), p.x.to_string(), kind.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `n` geometrically spaced lengths on `[lo, hi]`.
pub fn geometric_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n < 2 {
        return vec![lo];
    }
    let r = (hi / lo).ln() / (n - 1) as f64;
    let mut g: Vec<f64> = (0..n).map(|k| lo * (r * k as f64).exp()).collect();
    g[n - 1] = hi;
    g
}
