//! Spectra, edge states, spectral flow and edge conductivity of the massive
//! two-dimensional Dirac operator on the half-plane `x₁ ≥ 0`, for every
//! boundary condition `w(0) = iζ v(0)` that keeps the problem homogeneous
//! along the edge.
//!
//! The crate has one closed-form layer ([`analytic`]) and three independent
//! numerical solvers for the fiber operator at fixed edge momentum `k₂`:
//! transfer-matrix shooting ([`shooting`]), a Wilson lattice ([`discrete`]),
//! and a Fourier/lattice Bloch solver for perturbations periodic along the
//! edge ([`bloch`]). [`flow`] and [`edge_current`] turn fiber data into the
//! integer spectral flow and the edge conductivity.

pub mod acceptance;
pub mod analytic;
pub mod bloch;
pub mod discrete;
pub mod edge_current;
pub mod error;
pub mod flow;
pub mod linalg;
pub mod model;
pub mod perturbation;
pub mod quad;
pub mod shooting;

pub use error::{Error, Result};
pub use model::{
    boundary_residual, z_from_zeta, zeta_from_z, BoundaryParam, EnergyWindow, PhysParams,
    Spinor2, SwitchFunction, SwitchProfile, Zeta,
};
pub use perturbation::{PerturbationSpec, Profile};
