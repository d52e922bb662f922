//! Coherent X-ray speckle patterns from molecular-dynamics trajectories.
//!
//! Two interchangeable routes produce scattering amplitudes on the reciprocal
//! lattice of a cubic periodic box:
//!
//! * the direct route sums `f(q) exp(-i q·r)` over atoms for each wavevector
//!   ([`scatter::amplitude_direct`]);
//! * the FFT route deposits a Gaussian-smeared density on a grid, transforms
//!   it once, and divides out the kernel spectrum ([`scatter::amplitude_fft`]).
//!
//! The [`stats`] and [`fit`] modules turn per-frame intensities into XPCS and
//! XSVS observables: `g2`, the intermediate scattering function, optical
//! contrast, exposure-time contrast decay, Erlang statistics, decay rates and
//! diffusivities.
//!
//! Internal units are Å, ps and Å⁻¹ throughout.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod error;
pub mod fft3;
pub mod fit;
pub mod grid;
pub mod scatter;
pub mod stats;
pub mod trajio;

pub use error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Cartesian 3-vector in Å or Å⁻¹.
pub type Vec3 = [f64; 3];

pub(crate) fn dot(a: &Vec3, b: &Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn norm(a: &Vec3) -> f64 {
    dot(a, a).sqrt()
}
