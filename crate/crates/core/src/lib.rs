//! Stabilizer-free H(div) weak-Galerkin discretization of the Stokes
//! equations on simplicial meshes, with a Taylor–Hood reference solver.
//!
//! Typical use:
//!
//! ```no_run
//! use std::sync::Arc;
//! use hdiv_stokes::{assembly, examples, mesh, postproc, solver};
//!
//! let spec = examples::ExampleSpec::new(examples::ExampleId::Ex1, 1.0)?;
//! let mesh = Arc::new(mesh::unit_square_mesh(4)?);
//! let disc = assembly::StokesDiscretization::new(mesh, 2, None)?;
//! let sys = assembly::build_reduced(&disc, spec.mu, &*spec.forcing, None)?;
//! let sol = solver::solve_saddle(&sys, solver::SolverKind::Direct)?;
//! let errors = postproc::error_norms(&disc, &spec, &sol.velocity, &sol.pressure);
//! println!("{:.4e}", errors.velocity_l2);
//! # Ok::<(), hdiv_stokes::Error>(())
//! ```

pub mod assembly;
pub mod cli;
pub mod error;
pub mod examples;
pub mod geometry;
pub mod mesh;
pub mod polybasis;
pub mod postproc;
pub mod quadrature;
pub mod solver;
pub mod spaces;
pub mod sparse;
pub mod taylor_hood;
pub mod weak_gradient;

pub use error::{Error, Result};
pub use geometry::Point;

pub type VectorFn<'a> = dyn Fn(&Point) -> Point + Sync + 'a;
pub type ScalarFn<'a> = dyn Fn(&Point) -> f64 + Sync + 'a;
pub type MatrixFn<'a> = dyn Fn(&Point) -> [[f64; 3]; 3] + Sync + 'a;
