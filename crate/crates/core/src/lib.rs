//! Damped, driven Euler–Bardina flow on the unit sphere.
//!
//! The crate integrates the regularized Euler system in vorticity form with a
//! pseudospectral real spherical-harmonic discretization, checks the
//! dissipative energy and enstrophy estimates along trajectories, estimates
//! sums of Lyapunov exponents of the linearized flow, evaluates the explicit
//! attractor-dimension bound and certifies the collective Sobolev inequalities
//! on the sphere that the bound rests on.

pub mod bounds;
pub mod dynamics;
pub mod error;
pub mod fields;
pub mod inequalities;
pub mod io;
pub mod lyapunov;
pub mod sht;

pub use error::{Error, Result};
