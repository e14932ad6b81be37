//! Tensor-network solver for the traveling salesman problem and several
//! generalizations.
//!
//! Routes are resolved one position at a time. Each iteration builds a chain
//! of per-position layer stacks (candidate vectors, an imaginary-time
//! evolution that damps expensive routes by `exp(-tau * cost)`, and filter
//! chains that project out infeasible routes), contracts it from the right
//! and picks the node with the largest marginal amplitude.
//!
//! ```
//! use tn_tsp::{solve, SolverConfig, TourProblem};
//!
//! let m = vec![
//!     vec![0.0, 1.0, 2.0],
//!     vec![1.0, 0.0, 1.0],
//!     vec![2.0, 1.0, 0.0],
//! ];
//! let problem = TourProblem::tsp(&m).unwrap();
//! let sol = solve(&problem, &SolverConfig::default()).unwrap();
//! assert_eq!(sol.cost, Some(4.0));
//! ```

pub mod approx;
pub mod cli;
mod condition;
pub mod engine;
pub mod error;
pub mod instances;
pub mod io;
pub mod jrp;
pub mod layers;
pub mod mps;
pub mod oracle;
pub mod problem;
pub mod tensor;

pub use approx::{solve_approx, ApproxConfig, Strategy};
pub use condition::heuristic_tour;
pub use engine::{
    auto_tau, first_marginal, network_amplitude, solve, solve_detailed, solve_with_reuse, sweep, Diagnostics,
    NetworkPlan, SolverConfig, Tau,
};
pub use error::{ModelError, SolveError, TensorError};
pub use jrp::{jrp_oracle, jrp_to_problem, solve_jrp, swap_orientation, Assignment, JrpInstance};
pub use oracle::{oracle, OracleResult};
pub use problem::{check_feasible, route_cost, CostModel, RouteCost, Solution, TourProblem, Variant, Violation};
