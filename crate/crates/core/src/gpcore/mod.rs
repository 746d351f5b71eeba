//! Posynomial algebra, AM-GM condensation and a geometric-program solver.

pub mod poly;
pub mod solver;

pub use poly::{amgm_condense, classify, Classification, Monomial, Posynomial, Signomial};
pub use solver::{solve_gp, solve_gp_from, GpProblem, GpSolution, GpStatus, GpTolerances, Objective};
