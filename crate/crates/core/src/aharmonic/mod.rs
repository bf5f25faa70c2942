//! A-harmonic operators, Dirichlet problems on balls and p-harmonic coordinates.

pub mod ball;
pub mod coords;
mod discrete;
pub mod operator;
pub mod solver;

pub use ball::{BallProblem, BoundaryFn};
pub use coords::{build_coordinates, build_coordinates_with, CoordinateAttempt, CoordinateMap};
pub use operator::{apply_a, check_structural, AOperator, StructuralReport};
pub use solver::{residual_a, solve_dirichlet, solve_dirichlet_with, SolveReport, SolverOptions};
