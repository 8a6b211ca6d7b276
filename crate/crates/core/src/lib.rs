#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision, clippy::manual_is_multiple_of)]

pub mod error;
pub mod estimators;
pub mod mcstudy;
pub mod models;
pub mod numerics;
pub mod risk;
pub mod tolerance;

pub use error::{Error, InfoBlock, Result};
