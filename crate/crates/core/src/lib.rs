// NaN-rejecting guards are written as negated comparisons on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod bootstrap;
pub mod covkernel;
pub mod cv;
pub mod dgp;
pub mod error;
pub mod mean_diff;
pub mod pipeline;
pub mod quadrature;
pub mod weights;

pub use error::{Error, Result};
pub use quadrature::EvalGrid;
