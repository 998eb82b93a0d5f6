//! Polynomial systems, moment relaxations and feasibility checking.

pub mod brute;
pub mod conic;
pub mod poly;
pub mod relax;
pub mod sdpa;
pub mod solver;
pub mod system;

pub use brute::{brute_force_score, brute_force_score_detailed, BruteOutcome};
pub use conic::{Method, SolverTolerances, Status};
pub use poly::{Monomial, Poly, Var};
pub use relax::{relax, PseudoExpectationProblem, VarSpace};
pub use sdpa::export_sdpa;
pub use solver::{check_feasibility, check_feasibility_with, FeasibilityResult, SolveOptions};
pub use system::{build_system, check_system, check_system_graph, PolynomialSystem, SystemKind, SystemParams, WindowForm};
