//! Numerical companion for pre-log lower bounds of noncoherent correlated
//! block-fading SIMO channels.
//!
//! The crate builds every computable object behind the bound (channel model,
//! pilot plan, Jacobian factorization, Laplace split, homogeneity, the
//! Property (A) rank condition and the explicit nonvanishing witness) and
//! checks each identity numerically. Monte Carlo estimators in [`analysis`]
//! probe the finiteness of the expected log-determinants; those diagnostics
//! are empirical evidence, not proofs.

pub mod analysis;
pub mod channel;
pub mod error;
pub mod jacobian;
pub mod linalg;
pub mod pilot;
pub mod property_a;
pub mod rng;
pub mod verify;
pub mod witness;

pub use channel::{ChannelConfig, CorrelationMatrix, FadingDraw, InputDraw, SnrPoint};
pub use error::{Error, Result};
pub use pilot::{plan_pilots, PilotPlan, PlanCase};

/// Schema tag carried by every JSON report.
pub const SCHEMA: &str = "prelog-lab/1";
