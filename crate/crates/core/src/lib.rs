//! Transfer pricing in a firm with sales and production divisions.
//!
//! A coordinator posts internal prices, divisions answer with profit-maximizing
//! quantities, and the coordinator adjusts prices from the resulting excess
//! supply. The crate provides division models, three price-update rules
//! (gradient descent, Nesterov's method and SOLO FTRL), random instance
//! generators for fixed and resampled firms, reference solvers, and an
//! experiment harness that writes CSV traces and JSON summaries.

// `!(x > 0.0)` deliberately rejects NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod coordinators;
pub mod divisions;
pub mod error;
pub mod firm;
pub mod harness;
pub mod linalg;
pub mod oracle;
pub mod scenario;
pub mod trace;

pub use coordinators::{run_static, Algorithm, RunResult, StaticConfig};
pub use divisions::{regularity_constants, Bundle, DivisionModel, PriceVector, RegularityConstants};
pub use error::{Error, Result};
pub use firm::{FirmInstance, Plan, Response};
pub use oracle::OracleSolution;
pub use scenario::{run_dynamic, DynamicRun, SamplerSpec, ScenarioStream};
pub use trace::TraceRecord;
