// negated float comparisons are deliberate: they also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod classify;
pub mod domain;
pub mod dynamics;
pub mod error;
pub mod exec;
pub mod functionals;
mod optimize;
pub mod sampling;
pub mod wellgeometry;
