//! Numerical lab for the two-dimensional Zakharov–Kuznetsov equation on bounded domains.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod banded;
pub mod calculus;
pub mod dst;
pub mod dynamics;
pub mod geometry;
pub mod snapshot;
pub mod spectral;
pub mod stabilization;
