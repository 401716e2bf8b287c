//! Independent checks of the integral-equation solutions: a finite-difference
//! obstacle-problem solver and a Monte Carlo policy evaluator.

pub mod fd;
pub mod mc;

pub use fd::{fd_entry, fd_exit, fd_value, solve_obstacle, FdConfig, FdGrid, FdScheme, FdSolution, ObstacleProblem};
pub use mc::{mc_policy_value, perturbation_optimality_test, McEstimate, Monitoring, PerturbationReport, PerturbedRun, Policy};
