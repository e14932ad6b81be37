//! Exact cost conditioning for closed permutation tours.
//!
//! Subtracting a row potential `u_i` and a column potential `v_j` from every
//! edge shifts each closed tour by the same constant `sum(u) + sum(v)`, so
//! the optimal set is unchanged while the spread of the factors shrinks.
//! For plain tours an edge whose reduced cost exceeds the reduced cost `U`
//! of a known tour can never be on an optimal tour (reduced costs are
//! nonnegative) and is forbidden.

use crate::layers::anchor_eligible;
use crate::problem::{CostModel, TourProblem, Variant};

type Matrix = Vec<Vec<Option<f64>>>;

fn matrix(problem: &TourProblem) -> Matrix {
    let n = problem.n_nodes;
    let c = &problem.cost_model;
    (0..n)
        .map(|i| (0..n).map(|j| if i == j { None } else { c.step_cost(0, i, j) }).collect())
        .collect()
}

fn reduce(m: &Matrix) -> Option<Matrix> {
    let n = m.len();
    let u: Vec<f64> = m
        .iter()
        .map(|row| row.iter().flatten().copied().reduce(f64::min))
        .collect::<Option<_>>()?;
    let v: Vec<f64> = (0..n)
        .map(|j| (0..n).filter_map(|i| m[i][j].map(|c| c - u[i])).reduce(f64::min))
        .collect::<Option<_>>()?;
    Some(
        (0..n)
            .map(|i| (0..n).map(|j| m[i][j].map(|c| c - u[i] - v[j])).collect())
            .collect(),
    )
}

fn tour_cost(m: &Matrix, tour: &[usize]) -> Option<f64> {
    let n = tour.len();
    (0..n).map(|k| m[tour[k]][tour[(k + 1) % n]]).sum()
}

fn nearest_neighbour(m: &Matrix, start: usize) -> Option<Vec<usize>> {
    let n = m.len();
    let mut seen = vec![false; n];
    let mut tour = vec![start];
    seen[start] = true;
    while tour.len() < n {
        let a = *tour.last()?;
        let next = (0..n)
            .filter(|&b| !seen[b])
            .filter_map(|b| m[a][b].map(|c| (c, b)))
            .min_by(|x, y| x.0.total_cmp(&y.0))?
            .1;
        seen[next] = true;
        tour.push(next);
    }
    tour_cost(m, &tour).map(|_| tour)
}

/// Segment reversal and single-node relocation until no move improves.
fn improve(m: &Matrix, mut tour: Vec<usize>) -> (Vec<usize>, f64) {
    let n = tour.len();
    let mut best = tour_cost(m, &tour).expect("feasible start tour");
    let mut improved = true;
    while improved {
        improved = false;
        for i in 1..n {
            for j in i + 1..n {
                let mut cand = tour.clone();
                cand[i..=j].reverse();
                if let Some(c) = tour_cost(m, &cand).filter(|&c| c < best - 1e-12) {
                    tour = cand;
                    best = c;
                    improved = true;
                }
            }
        }
        for i in 1..n {
            for j in 1..n {
                if i == j {
                    continue;
                }
                let mut cand = tour.clone();
                let node = cand.remove(i);
                cand.insert(j, node);
                if let Some(c) = tour_cost(m, &cand).filter(|&c| c < best - 1e-12) {
                    tour = cand;
                    best = c;
                    improved = true;
                }
            }
        }
    }
    (tour, best)
}

/// Cheapest closed tour found by nearest neighbour from every start and
/// local search, as `(tour, cost)`.
pub fn heuristic_tour(problem: &TourProblem) -> Option<(Vec<usize>, f64)> {
    let m = matrix(problem);
    (0..m.len())
        .filter_map(|s| nearest_neighbour(&m, s))
        .map(|t| improve(&m, t))
        .min_by(|a, b| a.1.total_cmp(&b.1))
}

/// Conditioned cost model, or `None` when the shift is not exact for this
/// instance.
pub(crate) fn precondition(problem: &TourProblem) -> Option<CostModel> {
    let c = &problem.cost_model;
    let closed_permutation = matches!(problem.variant, Variant::Tsp | Variant::Tspp) && problem.returning;
    if !closed_permutation || !c.has_step_costs() || !c.is_time_constant() || problem.n_nodes < 3 {
        return None;
    }
    if problem.n_steps != problem.n_nodes {
        return None;
    }
    let m = matrix(problem);
    let r = reduce(&m)?;
    let scale = r.iter().flatten().flatten().fold(1.0f64, |a, &b| a.max(b.abs()));
    let bound = if anchor_eligible(problem) {
        let rp = problem.clone();
        let reduced = TourProblem {
            cost_model: to_model(problem, &r, None)?,
            ..rp
        };
        heuristic_tour(&reduced).map(|(_, u)| u + 1e-9 * scale)
    } else {
        None
    };
    to_model(problem, &r, bound)
}

fn to_model(problem: &TourProblem, r: &Matrix, bound: Option<f64>) -> Option<CostModel> {
    let n = problem.n_nodes;
    let dense: Vec<Vec<f64>> = r.iter().map(|row| row.iter().map(|v| v.unwrap_or(0.0)).collect()).collect();
    let mut cm = CostModel::new(n, problem.n_steps).with_step_matrix(&dense).ok()?;
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let drop = match r[i][j] {
                None => true,
                Some(v) => bound.is_some_and(|u| v > u),
            };
            if drop {
                cm = cm.forbid_edge(None, i, j).ok()?;
            }
        }
    }
    Some(cm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::route_cost;

    #[test]
    fn shift_is_constant_over_tours() {
        let m = vec![
            vec![0.0, 4.0, 9.0, 3.0],
            vec![2.0, 0.0, 7.0, 8.0],
            vec![5.0, 6.0, 0.0, 1.0],
            vec![7.0, 3.0, 2.0, 0.0],
        ];
        let p = TourProblem::tsp(&m).unwrap();
        let reduced = reduce(&matrix(&p)).unwrap();
        let q = TourProblem {
            cost_model: to_model(&p, &reduced, None).unwrap(),
            ..p.clone()
        };
        let tours = [[0, 1, 2, 3], [0, 2, 1, 3], [0, 3, 1, 2], [0, 1, 3, 2]];
        let diffs: Vec<f64> = tours
            .iter()
            .map(|t| route_cost(&p, t).unwrap().value().unwrap() - route_cost(&q, t).unwrap().value().unwrap())
            .collect();
        assert!(diffs.windows(2).all(|w| (w[0] - w[1]).abs() < 1e-12));
    }

    #[test]
    fn pruning_keeps_an_optimal_tour() {
        let m = vec![
            vec![0.0, 1.0, 50.0, 50.0],
            vec![50.0, 0.0, 1.0, 50.0],
            vec![50.0, 50.0, 0.0, 1.0],
            vec![1.0, 50.0, 50.0, 0.0],
        ];
        let p = TourProblem::tsp(&m).unwrap();
        let q = TourProblem {
            cost_model: precondition(&p).unwrap(),
            ..p
        };
        assert!(route_cost(&q, &[0, 1, 2, 3]).unwrap().value().is_some());
        assert!(route_cost(&q, &[0, 2, 1, 3]).unwrap().value().is_none());
    }

    #[test]
    fn open_routes_are_left_alone() {
        let m = vec![vec![0.0, 1.0, 2.0], vec![1.0, 0.0, 3.0], vec![2.0, 3.0, 0.0]];
        let p = TourProblem::tsp(&m).unwrap().with_returning(false);
        assert!(precondition(&p).is_none());
    }
}
