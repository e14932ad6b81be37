//! Approximate solving with a subset of the constraint layers and optional
//! compression of the `W` tensors.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::engine::{solve_with_failures, Diagnostics, SolverConfig};
use crate::error::SolveError;
use crate::layers::ChainTag;
use crate::problem::{Solution, TourProblem};

/// Which constraint layers stay active in each iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Strategy {
    /// Every layer: identical to the exact solver.
    #[default]
    All,
    RandomK,
    HeuristicNearest,
    /// Layers of nodes that were violated in a previous run, then nearest.
    FromFailures,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ApproxConfig {
    pub strategy: Strategy,
    /// Layers kept per iteration; defaults to `ceil(N / 4)`.
    pub k: Option<usize>,
    /// Bond cap for compressing each `W`.
    pub mps_bond_cap: Option<usize>,
}

impl ApproxConfig {
    pub fn new(strategy: Strategy) -> Self {
        Self {
            strategy,
            ..Self::default()
        }
    }

    pub fn with_k(mut self, k: usize) -> Self {
        self.k = Some(k);
        self
    }

    pub fn with_bond_cap(mut self, chi: usize) -> Self {
        self.mps_bond_cap = Some(chi);
        self
    }

    pub fn k_for(&self, n_nodes: usize) -> usize {
        self.k.unwrap_or(n_nodes.div_ceil(4))
    }
}

fn tag_nodes(tag: ChainTag) -> Option<usize> {
    match tag {
        ChainTag::Node(a) | ChainTag::Precedence(a) => Some(a),
        ChainTag::Group(_) => None,
    }
}

/// Picks the layers to keep among `candidates`. `scores` ranks closeness
/// (lower is nearer); `failures` lists nodes violated in a previous run.
/// Returns indexes into `candidates` in ascending order.
pub fn select_layers<R: Rng + ?Sized>(
    candidates: &[ChainTag],
    scores: &[f64],
    failures: &[usize],
    config: &ApproxConfig,
    n_nodes: usize,
    rng: &mut R,
) -> Vec<usize> {
    let all: Vec<usize> = (0..candidates.len()).collect();
    let k = config.k_for(n_nodes).min(candidates.len());
    let nearest = |exclude: &[usize], take: usize| -> Vec<usize> {
        let mut rest: Vec<usize> = all.iter().copied().filter(|i| !exclude.contains(i)).collect();
        rest.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(a.cmp(&b)));
        rest.truncate(take);
        rest
    };
    let mut pick = match config.strategy {
        Strategy::All => all.clone(),
        Strategy::RandomK => all.choose_multiple(rng, k).copied().collect(),
        Strategy::HeuristicNearest => nearest(&[], k),
        Strategy::FromFailures => {
            let mut chosen: Vec<usize> = all
                .iter()
                .copied()
                .filter(|&i| tag_nodes(candidates[i]).is_some_and(|a| failures.contains(&a)))
                .collect();
            let fill = k.saturating_sub(chosen.len());
            chosen.extend(nearest(&chosen, fill));
            chosen
        }
    };
    pick.sort_unstable();
    pick
}

/// Approximate solve. `FROM_FAILURES` runs up to three rounds, feeding the
/// nodes of each round's violations into the next; the best route wins.
pub fn solve_approx(problem: &TourProblem, config: &SolverConfig) -> Result<(Solution, Diagnostics), SolveError> {
    if config.approx.strategy != Strategy::FromFailures {
        return solve_with_failures(problem, config, &[]);
    }
    let mut failures: Vec<usize> = Vec::new();
    let mut best: Option<(Solution, Diagnostics)> = None;
    for _ in 0..3 {
        let (sol, diag) = solve_with_failures(problem, config, &failures)?;
        let better = best.as_ref().is_none_or(|(b, _)| rank(&sol) < rank(b));
        let done = sol.feasible;
        let mut more: Vec<usize> = sol.violations.iter().flat_map(|v| v.nodes()).collect();
        if better {
            best = Some((sol, diag));
        }
        if done {
            break;
        }
        more.retain(|a| !failures.contains(a));
        if more.is_empty() {
            break;
        }
        failures.extend(more);
        failures.sort_unstable();
        failures.dedup();
    }
    Ok(best.expect("at least one round"))
}

fn rank(s: &Solution) -> (bool, f64) {
    (!s.feasible, s.cost.unwrap_or(f64::INFINITY))
}
