//! Job reassignment: workers move to vacancies or stay put (node 0).
//!
//! Moving worker `i` to vacancy `x >= 1` costs
//! `c_p (P^C_i - P^V_x) + c_a (A^C_i - A^V_{x,i})`; staying costs 0. Each
//! vacancy takes at most one worker. The mapping yields a linear-only route
//! problem with one step per worker.

use serde::{Deserialize, Serialize};

use crate::engine::{solve_detailed, SolverConfig};
use crate::error::{ModelError, SolveError};
use crate::problem::{CostModel, TourProblem, Variant};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JrpInstance {
    /// Quality of each vacancy, length `I`.
    pub vacancy_quality: Vec<f64>,
    /// Quality of each worker's current job, length `J`.
    pub current_quality: Vec<f64>,
    /// Affinity of worker `i` with vacancy `x`: `I` rows of `J` entries.
    pub vacancy_affinity: Vec<Vec<f64>>,
    /// Affinity of each worker with the current job, length `J`.
    pub current_affinity: Vec<f64>,
    pub c_p: f64,
    pub c_a: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Assignment {
    /// Vacancy per worker, 0 for staying put.
    pub x: Vec<usize>,
    pub cost: f64,
    /// Sum of `P^C_i - P^V_{x_i}` over moved workers.
    pub delta_p: f64,
    /// Sum of `A^C_i - A^V_{x_i,i}` over moved workers.
    pub delta_a: f64,
    /// Argmax decisions resolved by a random tie-break.
    pub degenerate_choices: usize,
    /// Largest set of tied candidates met at one decision (1 when none).
    pub tie_count: usize,
    pub swapped: bool,
}

impl JrpInstance {
    pub fn workers(&self) -> usize {
        self.current_quality.len()
    }

    pub fn vacancies(&self) -> usize {
        self.vacancy_quality.len()
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let (j, i) = (self.workers(), self.vacancies());
        let shape = |what, expected, got| {
            if expected == got {
                Ok(())
            } else {
                Err(ModelError::Shape { what, expected, got })
            }
        };
        shape("current affinity", j, self.current_affinity.len())?;
        shape("vacancy affinity rows", i, self.vacancy_affinity.len())?;
        for row in &self.vacancy_affinity {
            shape("vacancy affinity columns", j, row.len())?;
        }
        let all = self
            .vacancy_quality
            .iter()
            .chain(&self.current_quality)
            .chain(&self.current_affinity)
            .chain(self.vacancy_affinity.iter().flatten())
            .chain([&self.c_p, &self.c_a]);
        for &v in all {
            if !v.is_finite() {
                return Err(ModelError::NonFinite {
                    location: "jrp instance".into(),
                    value: v,
                });
            }
        }
        if j == 0 {
            return Err(ModelError::Config("at least one worker is required".into()));
        }
        Ok(())
    }

    /// Cost of sending worker `w` to `x` (0 = stay).
    pub fn move_cost(&self, w: usize, x: usize) -> f64 {
        if x == 0 {
            return 0.0;
        }
        self.c_p * (self.current_quality[w] - self.vacancy_quality[x - 1])
            + self.c_a * (self.current_affinity[w] - self.vacancy_affinity[x - 1][w])
    }

    /// Total cost of an assignment vector.
    pub fn objective(&self, x: &[usize]) -> f64 {
        x.iter().enumerate().map(|(w, &v)| self.move_cost(w, v)).sum()
    }

    fn deltas(&self, x: &[usize]) -> (f64, f64) {
        let mut dp = 0.0;
        let mut da = 0.0;
        for (w, &v) in x.iter().enumerate().filter(|(_, &v)| v > 0) {
            dp += self.current_quality[w] - self.vacancy_quality[v - 1];
            da += self.current_affinity[w] - self.vacancy_affinity[v - 1][w];
        }
        (dp, da)
    }

    fn transposed(&self) -> JrpInstance {
        // steps over vacancies, values over workers; same per-pair costs
        let (j, i) = (self.workers(), self.vacancies());
        JrpInstance {
            vacancy_quality: self.current_quality.iter().map(|q| -q).collect(),
            current_quality: self.vacancy_quality.iter().map(|q| -q).collect(),
            vacancy_affinity: (0..j)
                .map(|w| (0..i).map(|k| self.vacancy_affinity[k][w] - self.current_affinity[w]).collect())
                .collect(),
            current_affinity: vec![0.0; i],
            c_p: self.c_p,
            c_a: self.c_a,
        }
    }
}

/// Linear-only route problem: one step per worker over nodes
/// `{0} ∪ vacancies`, each vacancy used at most once.
pub fn jrp_to_problem(inst: &JrpInstance) -> Result<TourProblem, ModelError> {
    inst.validate()?;
    let (j, i) = (inst.workers(), inst.vacancies());
    let table: Vec<Vec<f64>> = (0..j).map(|w| (0..=i).map(|x| inst.move_cost(w, x)).collect()).collect();
    let cm = CostModel::new(i + 1, j).with_linear(&table)?;
    let mut bounds = vec![(0, 1); i + 1];
    bounds[0] = (0, j);
    Ok(TourProblem::new(Variant::LinearOnly, cm)
        .with_returning(false)
        .with_visit_bounds(bounds))
}

/// Transposed instance when there are more vacancies than workers. Returns
/// the instance unchanged and `false` otherwise.
pub fn swap_orientation(inst: &JrpInstance) -> (JrpInstance, bool) {
    if inst.vacancies() > inst.workers() {
        (inst.transposed(), true)
    } else {
        (inst.clone(), false)
    }
}

/// Maps an assignment of the transposed instance back to workers.
fn map_back(y: &[usize], workers: usize) -> Vec<usize> {
    let mut x = vec![0; workers];
    for (k, &w) in y.iter().enumerate() {
        if w > 0 {
            x[w - 1] = k + 1;
        }
    }
    x
}

/// Route, random tie-breaks and the largest tie set.
fn solve_direct(inst: &JrpInstance, config: &SolverConfig) -> Result<(Vec<usize>, usize, usize), SolveError> {
    if inst.vacancies() == 0 {
        return Ok((vec![0; inst.workers()], 0, 1));
    }
    let problem = jrp_to_problem(inst)?;
    let (sol, diag) = solve_detailed(&problem, config)?;
    let ties = diag.iterations.iter().map(|r| r.tie_count).max().unwrap_or(1);
    Ok((sol.route, sol.degenerate_choices, ties))
}

/// Solves in the orientation with fewer steps.
pub fn solve_jrp(inst: &JrpInstance, config: &SolverConfig) -> Result<Assignment, SolveError> {
    let swap = inst.vacancies() > inst.workers();
    solve_jrp_oriented(inst, config, swap)
}

/// Solves with an explicit orientation choice.
pub fn solve_jrp_oriented(inst: &JrpInstance, config: &SolverConfig, swap: bool) -> Result<Assignment, SolveError> {
    inst.validate()?;
    let (x, degenerate, ties) = if swap && inst.vacancies() > 0 {
        let (y, degenerate, ties) = solve_direct(&inst.transposed(), config)?;
        (map_back(&y, inst.workers()), degenerate, ties)
    } else {
        solve_direct(inst, config)?
    };
    let (delta_p, delta_a) = inst.deltas(&x);
    Ok(Assignment {
        cost: inst.objective(&x),
        x,
        delta_p,
        delta_a,
        degenerate_choices: degenerate,
        tie_count: ties,
        swapped: swap,
    })
}

/// Exhaustive optimum over all `(I+1)^J` vectors without reused vacancies,
/// as `(cost, first optimal vector)`.
pub fn jrp_oracle(inst: &JrpInstance) -> (f64, Vec<usize>) {
    fn go(inst: &JrpInstance, w: usize, used: &mut [bool], x: &mut Vec<usize>, acc: f64, best: &mut (f64, Vec<usize>)) {
        if w == inst.workers() {
            if acc < best.0 - 1e-12 {
                *best = (acc, x.clone());
            }
            return;
        }
        for v in 0..=inst.vacancies() {
            if v > 0 && used[v] {
                continue;
            }
            used[v] = v > 0;
            x.push(v);
            go(inst, w + 1, used, x, acc + inst.move_cost(w, v), best);
            x.pop();
            used[v] = false;
        }
    }
    let mut best = (f64::INFINITY, Vec::new());
    let mut used = vec![false; inst.vacancies() + 1];
    go(inst, 0, &mut used, &mut Vec::new(), 0.0, &mut best);
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inst(pv: Vec<f64>, pc: Vec<f64>) -> JrpInstance {
        let (i, j) = (pv.len(), pc.len());
        JrpInstance {
            vacancy_quality: pv,
            current_quality: pc,
            vacancy_affinity: vec![vec![0.0; j]; i],
            current_affinity: vec![0.0; j],
            c_p: 1.0,
            c_a: 1.0,
        }
    }

    #[test]
    fn single_worker_takes_better_vacancy() {
        let a = solve_jrp(&inst(vec![5.0], vec![2.0]), &SolverConfig::default()).unwrap();
        assert_eq!(a.x, vec![1]);
    }

    #[test]
    fn worse_vacancies_keep_everyone() {
        let a = solve_jrp(&inst(vec![1.0, 0.5], vec![3.0, 4.0]), &SolverConfig::default()).unwrap();
        assert_eq!(a.x, vec![0, 0]);
        assert_eq!((a.delta_p, a.delta_a), (0.0, 0.0));
    }

    #[test]
    fn one_vacancy_goes_to_biggest_gain() {
        let a = solve_jrp(&inst(vec![10.0], vec![1.0, 4.0]), &SolverConfig::default()).unwrap();
        assert_eq!(a.x, vec![1, 0]);
    }

    #[test]
    fn identical_vacancies_tie() {
        let a = solve_jrp_oriented(&inst(vec![8.0, 8.0], vec![1.0]), &SolverConfig::default(), false).unwrap();
        assert_eq!(a.tie_count, 2);
        assert_eq!(a.degenerate_choices, 1);
        assert_ne!(a.x, vec![0]);
    }

    #[test]
    fn no_vacancies() {
        let a = solve_jrp(&inst(vec![], vec![1.0, 2.0]), &SolverConfig::default()).unwrap();
        assert_eq!(a.x, vec![0, 0]);
    }

    #[test]
    fn swap_shape() {
        let s = inst(vec![1.0, 2.0, 3.0], vec![0.0]);
        let (t, swapped) = swap_orientation(&s);
        assert!(swapped);
        let p = jrp_to_problem(&t).unwrap();
        assert_eq!((p.n_steps, p.n_nodes), (3, 2));
    }

    #[test]
    fn transposed_costs_match() {
        let mut s = inst(vec![1.0, 7.0, 3.0], vec![2.0, 5.0]);
        s.vacancy_affinity = vec![vec![1.0, 2.0], vec![0.5, 4.0], vec![3.0, 1.0]];
        s.current_affinity = vec![0.25, 2.0];
        let t = s.transposed();
        for w in 0..2 {
            for k in 0..3 {
                assert!((t.move_cost(k, w + 1) - s.move_cost(w, k + 1)).abs() < 1e-12);
            }
        }
    }
}
