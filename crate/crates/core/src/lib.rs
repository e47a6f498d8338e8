// `!(x > 0.0)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// reference values and coefficient tables are quoted to full published precision
#![allow(clippy::excessive_precision)]

pub mod error;
pub mod extremal;
pub mod mass;
pub mod quad;
pub mod radialops;
pub mod specfun;

pub use error::{Error, Result};
pub use radialops::{AssembledForms, RadialField, RadialGrid};
pub use specfun::ProblemParams;
