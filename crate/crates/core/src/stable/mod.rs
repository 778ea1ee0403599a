mod density;
mod law;
mod params;
mod table;

pub use density::{
    cms_transform, sample_stable_increment, stable_cdf, stable_pdf, stable_pdf_derivative,
    stable_pdf_derivatives, stable_quantile, standard_variate, StableDensity,
};
pub use law::{Derivs, StandardLaw};
pub use params::StableParams;
pub(crate) use params::check_time;
pub use table::{standard_law, standard_table, StandardTable};
