//! Seeded random instances for tests, examples and benchmarks.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::jrp::JrpInstance;
use crate::problem::{CostModel, TourProblem, Variant};

/// `n x n` integer matrix with entries in `lo..=hi` and a zero diagonal.
pub fn random_matrix<R: Rng + ?Sized>(n: usize, lo: u32, hi: u32, rng: &mut R) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| if i == j { 0.0 } else { rng.gen_range(lo..=hi) as f64 })
                .collect()
        })
        .collect()
}

pub fn random_tsp<R: Rng + ?Sized>(n: usize, lo: u32, hi: u32, rng: &mut R) -> TourProblem {
    TourProblem::tsp(&random_matrix(n, lo, hi, rng)).expect("square finite matrix")
}

/// Open route of `steps` positions with per-node visit bounds.
///
/// # Panics
/// When `n * max_visits < steps`, since no bounds could admit a route.
pub fn random_dnsnn<R: Rng + ?Sized>(n: usize, steps: usize, max_visits: usize, rng: &mut R) -> TourProblem {
    assert!(n * max_visits >= steps, "{n} nodes with at most {max_visits} visits cannot fill {steps} steps");
    let m = random_matrix(n, 1, 9, rng);
    let cm = CostModel::new(n, steps).with_step_matrix(&m).expect("valid matrix");
    loop {
        let bounds: Vec<(usize, usize)> = (0..n)
            .map(|_| {
                let hi = rng.gen_range(1..=max_visits);
                (rng.gen_range(0..=hi.min(1)), hi)
            })
            .collect();
        let lo: usize = bounds.iter().map(|b| b.0).sum();
        let hi: usize = bounds.iter().map(|b| b.1).sum();
        if lo <= steps && steps <= hi {
            return TourProblem::new(Variant::Dnsnn, cm.clone()).with_visit_bounds(bounds);
        }
    }
}

/// Memory variant with depth `k` and integer costs in `1..=9`.
pub fn random_nmtsp<R: Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> TourProblem {
    let len = n * n.pow(k as u32 + 1);
    let data = (0..len).map(|_| rng.gen_range(1..=9) as f64).collect();
    let cm = CostModel::new(n, n).with_memory(k, data).expect("valid table");
    let mut p = TourProblem::new(Variant::Nmtsp, cm);
    p.memory_depth = Some(k);
    p
}

/// Bottleneck instance with integer costs in `1..=max_cost`.
pub fn random_btsp<R: Rng + ?Sized>(n: usize, max_cost: u32, maximize_min: bool, rng: &mut R) -> TourProblem {
    let m = random_matrix(n, 1, max_cost, rng);
    let variant = if maximize_min { Variant::BtspMaxmin } else { Variant::BtspMinmax };
    let cm = CostModel::new(n, n).with_step_matrix(&m).expect("valid matrix");
    TourProblem::new(variant, cm)
}

/// Nodes split into `groups` nonempty groups; one step per group.
pub fn random_ptsp<R: Rng + ?Sized>(n: usize, groups: usize, rng: &mut R) -> TourProblem {
    let mut nodes: Vec<usize> = (0..n).collect();
    nodes.shuffle(rng);
    let mut gs = vec![Vec::new(); groups];
    for (k, a) in nodes.into_iter().enumerate() {
        let g = if k < groups { k } else { rng.gen_range(0..groups) };
        gs[g].push(a);
    }
    for g in &mut gs {
        g.sort_unstable();
    }
    let m = random_matrix(n, 1, 9, rng);
    let cm = CostModel::new(n, groups).with_step_matrix(&m).expect("valid matrix");
    TourProblem::new(Variant::Ptsp, cm).with_groups(gs)
}

/// Closed tour with up to `rules` acyclic precedence pairs.
pub fn random_tspp<R: Rng + ?Sized>(n: usize, rules: usize, rng: &mut R) -> TourProblem {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut pairs = Vec::new();
    for _ in 0..rules {
        let a = rng.gen_range(0..n - 1);
        let b = rng.gen_range(a + 1..n);
        let pair = (order[a], order[b]);
        if !pairs.contains(&pair) {
            pairs.push(pair);
        }
    }
    let m = random_matrix(n, 1, 9, rng);
    TourProblem::new(Variant::Tspp, CostModel::new(n, n).with_step_matrix(&m).expect("valid matrix"))
        .with_precedence(pairs)
}

/// JRP instance with integer qualities and affinities in `0..=9`.
pub fn random_jrp<R: Rng + ?Sized>(workers: usize, vacancies: usize, rng: &mut R) -> JrpInstance {
    let mut draw = |k: usize| -> Vec<f64> { (0..k).map(|_| rng.gen_range(0..=9) as f64).collect() };
    let vacancy_quality = draw(vacancies);
    let current_quality = draw(workers);
    let current_affinity = draw(workers);
    let vacancy_affinity = (0..vacancies).map(|_| draw(workers)).collect();
    JrpInstance {
        vacancy_quality,
        current_quality,
        vacancy_affinity,
        current_affinity,
        c_p: 1.0,
        c_a: 0.5,
    }
}
