//! Mixed finite element solver for quasi-static thermo-poroelasticity with a
//! stress-dependent (negative exponential) permeability.
//!
//! The model is solved in the multiphysics variables `(u, τ, ϖ, ς)`: a
//! generalized Stokes problem for displacement and pseudo-pressure coupled to
//! two reaction-diffusion equations. Pressure, temperature and volumetric
//! strain are recovered algebraically after each step. A classical
//! three-field `(u, p, T)` solver is included for comparison.
//!
//! Module map:
//! - [`mesh`]: structured triangulations, refinement, quadrature.
//! - [`spaces`]: continuous Lagrange spaces, interpolation, projection, norms.
//! - [`model`]: parameters, variable change, permeability law, test problems.
//! - [`assembly`]: sparse matrices, load vectors, essential conditions.
//! - [`solver`]: linear solves, time steppers, diagnostics.
//! - [`experiments`]: convergence studies, benchmark and parameter sweep.
//! - [`config`] and [`cli`]: run configuration and command dispatch.
//! - [`checks`]: fast self-checks behind the `check` command.

pub mod assembly;
pub mod checks;
pub mod cli;
pub mod config;
pub mod error;
pub mod experiments;
pub mod mesh;
pub mod model;
pub mod solver;
pub mod spaces;

pub use error::{Error, Result};
