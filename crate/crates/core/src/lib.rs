//! Doubly periodic Chern–Simons–Higgs vortex solver for general simple Lie
//! algebras: exact Cartan data, spectral fields on a torus, resolution of the
//! integral constraints, constrained minimization and solution diagnostics.

pub mod constraint;
pub mod diagnostics;
pub mod lie_cartan;
pub mod minimizer;
pub mod torus;

pub use constraint::{ConstraintInput, ConstraintMethod, ConstraintSolution};
pub use diagnostics::{SolveReport, Tolerances};
pub use lie_cartan::{AlgebraSpec, CartanData, CartanNumeric, Certificate, Family, IntMatrix};
pub use minimizer::{minimize, Problem, Seed, Solution, SolveError, SolverConfig, Termination};
pub use torus::{Field, Spectral, TorusGrid, VortexConfiguration};
