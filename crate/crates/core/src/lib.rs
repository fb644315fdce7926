//! Mean-field simulator for chiral p-wave and d-wave pairing encoded as
//! Anderson pseudospins on a cavity-QED lattice.
//!
//! Units: the kinetic scale `J` sets frequencies, times are in `1/J`, and
//! couplings are quoted in the scaled form `χN/J`.

// `!(x > 0.0)` is used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dynamics;
pub mod error;
pub mod groundstate;
pub mod lattice;
pub mod lax;
pub mod prep;
pub mod stability;
pub mod validity;

pub mod numeric;
mod par;

pub use error::{Error, Result};
pub use num_complex::Complex64;

/// Plain 3-vector used for Bloch vectors and fields.
pub type Vec3 = [f64; 3];

#[inline]
pub(crate) fn dot(a: &Vec3, b: &Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub(crate) fn cross(a: &Vec3, b: &Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[inline]
pub(crate) fn norm(a: &Vec3) -> f64 {
    dot(a, a).sqrt()
}
