//! Anisotropic Littlewood–Paley analysis on the periodic torus.
//!
//! The crate provides a pseudo-spectral substrate ([`grid`], [`field`],
//! [`ops`]), time-varying orthonormal frames ([`frame`]), direction-dependent
//! dyadic decompositions and norms ([`lp`]), randomized certification of
//! functional inequalities ([`ineq`]), a segment-wise Gronwall iteration
//! certifier ([`gronwall`]), an integrating-factor Navier–Stokes solver
//! ([`ns`]) and frame-adapted energy-identity diagnostics ([`monitor`]).

pub mod error;
pub mod field;
pub mod frame;
pub mod grid;
pub mod gronwall;
pub mod ineq;
pub mod lp;
pub mod monitor;
pub mod ns;
pub mod ops;
pub mod snapshot;
pub mod vec3;

pub use error::{Error, Result};
pub use field::{PhysicalField, Rank, SpectralField};
pub use grid::{make_grid, Grid};
