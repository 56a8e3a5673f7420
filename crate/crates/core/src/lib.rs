//! Event/collapse dynamics for finite-dimensional open quantum systems.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod algebra;
pub mod classical;
pub mod eth;
pub mod linalg;
pub mod models;
pub mod rng;
pub mod tolerance;
