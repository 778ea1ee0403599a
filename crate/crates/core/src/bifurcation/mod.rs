//! Structure of the midpoint density as the arrival distance grows.

mod diagram;
mod extrema;
mod length;
mod nagaev;

pub use extrema::{midpoint_extrema, CriticalPoint, Extremum};
pub use length::{alpha_critical, alpha_critical_solution, bifurcation_length, BifurcationLength, CriticalIndex, Criterion};
pub use nagaev::{lb_asymptote, nagaev_bifurcation_length, nagaev_cutoff, nagaev_pdf, MAX_DELTA};
pub use diagram::{bifurcation_diagram, geometric_grid, BranchPoint, Event, EventKind, ExtremaDiagram};
