//! Neural-ODE laboratory.
//!
//! Trains first-, second- and k-th-order neural ODEs on dynamical-system
//! data with three interchangeable gradient engines (coupled first-order
//! adjoint, second-order adjoint, backprop through a fixed-step solver),
//! plus dataset generators, analysis tooling for augmented-ODE functional
//! forms, and a config-driven experiment runner.

pub mod adjoint;
pub mod analysis;
pub mod datasets;
pub mod experiments;
pub mod linalg;
pub mod loss;
pub mod models;
pub mod solver;
pub mod training;

pub use linalg::Tensor;
pub use solver::{SolverConfig, Trajectory};
