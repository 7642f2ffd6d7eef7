//! Information flow models: typed networks of sites and channels, bias
//! propagation, impact tracing and reporting.

pub mod analysis;
pub mod casestudy;
pub mod dsl;
pub mod model;
pub mod reporting;
