use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tn_tsp::instances::{random_dnsnn, random_nmtsp, random_ptsp, random_tspp};
use tn_tsp::{
    check_feasible, first_marginal, heuristic_tour, instances, jrp, jrp_oracle, network_amplitude, oracle, route_cost, solve,
    solve_approx, solve_jrp, solve_with_reuse, ApproxConfig, RouteCost, SolverConfig, Strategy as Layers, TourProblem,
};

fn matrix(n: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(1..=30u32, n), n).prop_map(|rows| {
        rows.into_iter()
            .enumerate()
            .map(|(i, r)| r.into_iter().enumerate().map(|(j, v)| if i == j { 0.0 } else { v as f64 }).collect())
            .collect()
    })
}

fn sized_matrix() -> impl Strategy<Value = Vec<Vec<f64>>> {
    (3..=6usize).prop_flat_map(matrix)
}

/// Every route of `steps` positions over `n` nodes.
fn all_routes(n: usize, steps: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for _ in 0..steps {
        out = out
            .into_iter()
            .flat_map(|r| {
                (0..n).map(move |a| {
                    let mut r = r.clone();
                    r.push(a);
                    r
                })
            })
            .collect();
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn tsp_matches_oracle(m in sized_matrix(), seed in 0..100u64) {
        let p = TourProblem::tsp(&m).unwrap();
        let s = solve(&p, &SolverConfig::default().with_seed(seed)).unwrap();
        let o = oracle(&p).unwrap();
        prop_assert!(s.feasible);
        prop_assert_eq!(s.cost, o.best_cost);
    }

    #[test]
    fn relabelling_nodes_keeps_the_optimum(m in sized_matrix(), shift in 1..6usize) {
        let n = m.len();
        let perm: Vec<usize> = (0..n).map(|i| (i + shift) % n).collect();
        let relabelled: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| m[perm[i]][perm[j]]).collect()).collect();
        let a = solve(&TourProblem::tsp(&m).unwrap(), &SolverConfig::default()).unwrap();
        let b = solve(&TourProblem::tsp(&relabelled).unwrap(), &SolverConfig::default()).unwrap();
        prop_assert_eq!(a.cost, b.cost);
    }

    #[test]
    fn reversed_symmetric_tours_cost_the_same(m in sized_matrix()) {
        let n = m.len();
        let sym: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| m[i.min(j)][i.max(j)]).collect()).collect();
        let p = TourProblem::tsp(&sym).unwrap();
        let s = solve(&p, &SolverConfig::default()).unwrap();
        let mut rev = s.route.clone();
        rev.reverse();
        prop_assert_eq!(route_cost(&p, &rev).unwrap().value(), s.cost);
    }

    #[test]
    fn reuse_gives_the_same_route(m in sized_matrix(), seed in 0..100u64) {
        let p = TourProblem::tsp(&m).unwrap();
        let cfg = SolverConfig::default().with_seed(seed);
        prop_assert_eq!(solve(&p, &cfg).unwrap().route, solve_with_reuse(&p, &cfg).unwrap().route);
    }

    #[test]
    fn heuristic_tour_is_a_valid_upper_bound(m in sized_matrix()) {
        let p = TourProblem::tsp(&m).unwrap();
        let (tour, cost) = heuristic_tour(&p).unwrap();
        let mut sorted = tour.clone();
        sorted.sort_unstable();
        prop_assert_eq!(sorted, (0..m.len()).collect::<Vec<_>>());
        prop_assert_eq!(route_cost(&p, &tour).unwrap().value(), Some(cost));
        prop_assert!(cost >= oracle(&p).unwrap().best_cost.unwrap());
    }

    #[test]
    fn approximate_routes_never_beat_the_oracle(m in sized_matrix(), k in 1..4usize, seed in 0..50u64) {
        let p = TourProblem::tsp(&m).unwrap();
        let cfg = SolverConfig::default()
            .with_seed(seed)
            .with_approx(ApproxConfig::new(Layers::RandomK).with_k(k));
        let (s, _) = solve_approx(&p, &cfg).unwrap();
        let best = oracle(&p).unwrap().best_cost.unwrap();
        if let Some(c) = s.cost {
            prop_assert!(!s.feasible || c >= best);
        }
        let mut seen = s.route.clone();
        seen.sort_unstable();
        seen.dedup();
        prop_assert_eq!(seen.len(), s.route.len());
    }
}

fn amplitudes_agree(p: &TourProblem, tau: f64) {
    for route in all_routes(p.n_nodes, p.n_steps) {
        let amp = network_amplitude(p, tau, &route).unwrap();
        let f = check_feasible(p, &route);
        let cost = route_cost(p, &route).ok().and_then(RouteCost::value);
        match (f.feasible, cost) {
            (true, Some(c)) => {
                let want = (-tau * c).exp();
                assert!((amp - want).abs() <= 1e-10 * want, "{route:?}: {amp} vs {want}");
            }
            _ => assert_eq!(amp, 0.0, "{route:?} is infeasible"),
        }
    }
}

#[test]
fn variant_amplitudes_follow_the_cost() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..4 {
        amplitudes_agree(&random_dnsnn(3, 4, 2, &mut rng), 0.3);
        amplitudes_agree(&random_nmtsp(3, 2, &mut rng), 0.2);
        amplitudes_agree(&random_ptsp(5, 3, &mut rng), 0.5);
        amplitudes_agree(&random_tspp(4, 2, &mut rng), 0.4);
    }
}

#[test]
fn zero_tau_marginal_counts_tours() {
    for n in 3..=6usize {
        let m: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| (i * 3 + j) as f64 % 7.0).collect()).collect();
        let p = TourProblem::tsp(&m).unwrap();
        let marg = first_marginal(&p, 0.0).unwrap();
        let fact: f64 = (1..n - 1).map(|k| k as f64).product();
        for (_, v) in marg {
            assert!((v - fact).abs() < 1e-9 * fact);
        }
    }
}

#[test]
fn jrp_orientations_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..20 {
        let inst = instances::random_jrp(2, 4, &mut rng);
        let (best, _) = jrp_oracle(&inst);
        let a = solve_jrp(&inst, &SolverConfig::default()).unwrap();
        assert!(a.swapped);
        assert!((a.cost - best).abs() < 1e-9);
        let b = jrp::solve_jrp_oriented(&inst, &SolverConfig::default(), false).unwrap();
        assert!((b.cost - best).abs() < 1e-9);
    }
}
