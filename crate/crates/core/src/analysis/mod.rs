//! Monte Carlo layer.
//!
//! Finiteness of an expected log-determinant is judged from how the mean
//! moves when the lower tail is clipped at −40 versus −80 bits. That is
//! empirical evidence only; it cannot prove integrability.

pub mod entropy;
pub mod estimators;
pub mod mc;
pub mod report;

pub use entropy::{conditional_output_entropy, fit_entropy_slope, log2_grid, SlopeFit};
pub use estimators::{
    compare_scaled_logdet_j4, estimate_logdet_j4, laplace_additivity, pilot_data_log_terms, DataLaw,
};
pub use mc::{mc_log_abs, mc_log_values, McEstimate, MonteCarlo};
pub use report::{assemble_prelog_report, PrelogReport, ReportInputs};
