//! Two-level stochastic collocation for semilinear elliptic problems with
//! random diffusion coefficients.
//!
//! The crate is `no_std` (it only needs `alloc`). It provides:
//!
//! * structured P1 triangulations of rectangles ([`mesh`]),
//! * compressed sparse storage with a preconditioned CG solver ([`sparse`]),
//! * P1 assembly of stiffness, weighted mass and load terms ([`fem`]),
//! * affine and Karhunen–Loève random coefficients ([`random_field`]),
//! * tensor Gauss–Legendre collocation with barycentric interpolation ([`collocation`]),
//! * Newton / linearized solvers and the direct and two-level drivers ([`solvers`]),
//! * tensor L²/H¹₀ error norms and convergence-slope fitting ([`norms`]),
//! * the two benchmark problems ([`benchmarks`]).
//!
//! IO, configuration and the command line live in the companion `tlsc` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod benchmarks;
pub mod collocation;
pub mod dense;
pub mod exec;
pub mod fem;
pub mod mesh;
pub mod norms;
pub mod random_field;
pub mod solvers;
pub mod sparse;

pub use collocation::TensorGrid;
pub use exec::{PointExecutor, Sequential};
pub use mesh::{Mesh, Rect};
pub use random_field::{CoefficientField, KlExpansion};
pub use solvers::{Problem, StochasticSolution};
pub use sparse::CsrMatrix;

/// A point in the physical domain.
pub type Point = [f64; 2];
