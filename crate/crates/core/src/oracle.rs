//! Exhaustive reference solver. Enumerates routes in lexicographic order
//! and scores them with the plain route evaluators; no tensor code.

use serde::Serialize;

use crate::error::SolveError;
use crate::problem::{check_feasible, route_cost, TourProblem, Variant};

/// Largest route length the oracle accepts.
pub const MAX_STEPS: usize = 10;
/// Largest number of candidate routes the oracle will walk.
pub const MAX_ROUTES: u64 = 50_000_000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleResult {
    /// `None` when no feasible route exists.
    pub best_cost: Option<f64>,
    /// Every optimal route, lexicographically sorted.
    pub optimal_routes: Vec<Vec<usize>>,
    /// Number of complete routes scored.
    pub evaluated: u64,
}

fn is_better(a: f64, b: f64, maximize: bool) -> bool {
    if maximize {
        a > b
    } else {
        a < b
    }
}

fn same(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
}

/// Brute-force optimum of `problem`. Permutation variants only walk
/// repetition-free prefixes; everything else is checked on full routes.
pub fn oracle(problem: &TourProblem) -> Result<OracleResult, SolveError> {
    problem.validate()?;
    let steps = problem.n_steps;
    let n = problem.n_nodes;
    if steps > MAX_STEPS {
        return Err(SolveError::OracleGuard(format!("{steps} steps exceeds {MAX_STEPS}")));
    }
    let perm = problem.variant.is_permutation();
    let size = if perm {
        (1..=n as u64).rev().take(steps).product::<u64>()
    } else {
        (n as u64).saturating_pow(steps as u32)
    };
    if size > MAX_ROUTES {
        return Err(SolveError::OracleGuard(format!("{size} routes exceeds {MAX_ROUTES}")));
    }
    let maximize = problem.variant == Variant::BtspMaxmin;
    let mut out = OracleResult {
        best_cost: None,
        optimal_routes: Vec::new(),
        evaluated: 0,
    };
    let mut route = Vec::with_capacity(steps);
    let mut used = vec![false; n];
    walk(problem, perm, maximize, &mut route, &mut used, &mut out);
    Ok(out)
}

fn fixed_at(problem: &TourProblem, t: usize) -> Option<usize> {
    if let Some(&(_, a)) = problem.pins.iter().find(|(s, _)| *s == t) {
        return Some(a);
    }
    if t == 0 {
        if let Some(s) = problem.fixed_start {
            return Some(s);
        }
    }
    if t + 1 == problem.n_steps {
        return problem.fixed_end;
    }
    None
}

fn walk(
    problem: &TourProblem,
    perm: bool,
    maximize: bool,
    route: &mut Vec<usize>,
    used: &mut [bool],
    out: &mut OracleResult,
) {
    let t = route.len();
    if t == problem.n_steps {
        out.evaluated += 1;
        if !check_feasible(problem, route).feasible {
            return;
        }
        let Ok(Some(c)) = route_cost(problem, route).map(|r| r.value()) else {
            return;
        };
        match out.best_cost {
            Some(b) if same(c, b) => out.optimal_routes.push(route.clone()),
            Some(b) if !is_better(c, b, maximize) => {}
            _ => {
                out.best_cost = Some(c);
                out.optimal_routes = vec![route.clone()];
            }
        }
        return;
    }
    let fixed = fixed_at(problem, t);
    for a in 0..problem.n_nodes {
        if (perm && used[a]) || fixed.is_some_and(|f| f != a) {
            continue;
        }
        route.push(a);
        used[a] = true;
        walk(problem, perm, maximize, route, used, out);
        used[a] = false;
        route.pop();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::CostModel;

    #[test]
    fn abs_diff_tour() {
        let m: Vec<Vec<f64>> = (0..3)
            .map(|i| (0..3).map(|j| (i as f64 - j as f64).abs()).collect())
            .collect();
        let r = oracle(&TourProblem::tsp(&m).unwrap()).unwrap();
        assert_eq!(r.best_cost, Some(4.0));
        assert_eq!(r.optimal_routes.len(), 6);
        assert_eq!(r.optimal_routes[0], vec![0, 1, 2]);
    }

    #[test]
    fn guard_refuses_long_routes() {
        let p = TourProblem::tsp(&vec![vec![1.0; 11]; 11]).unwrap();
        assert!(matches!(oracle(&p), Err(SolveError::OracleGuard(_))));
    }

    #[test]
    fn maxmin_maximises() {
        let m = vec![
            vec![0.0, 1.0, 3.0],
            vec![3.0, 0.0, 1.0],
            vec![1.0, 3.0, 0.0],
        ];
        let cm = CostModel::new(3, 3).with_step_matrix(&m).unwrap();
        let p = TourProblem::new(Variant::BtspMaxmin, cm);
        let r = oracle(&p).unwrap();
        assert_eq!(r.best_cost, Some(3.0));
        assert!(r.optimal_routes.contains(&vec![0, 2, 1]));
    }

    #[test]
    fn infeasible_has_no_cost() {
        let m = vec![vec![0.0, 1.0], vec![1.0, 0.0]];
        let cm = CostModel::new(2, 2).with_step_matrix(&m).unwrap().forbid_edge(None, 0, 1).unwrap();
        let r = oracle(&TourProblem::new(Variant::Tsp, cm)).unwrap();
        assert_eq!(r.best_cost, None);
        assert!(r.optimal_routes.is_empty());
    }
}
