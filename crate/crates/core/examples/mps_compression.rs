//! Truncated SVD chains: error against bond cap for one sweep tensor,
//! then whole solves under a cap.
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tn_tsp::engine::NetworkPlan;
use tn_tsp::instances::random_tsp;
use tn_tsp::mps::mps_truncate;
use tn_tsp::{oracle, solve_approx, sweep, ApproxConfig, SolverConfig, Strategy};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let problem = random_tsp(7, 1, 100, &mut rng);
    // unshifted factors: keep tau small so nothing underflows
    let out = sweep(&NetworkPlan::build(&problem, 0.02)?)?;
    // the largest cached W
    let w = (0..problem.n_steps)
        .filter_map(|p| out.cache.get(p))
        .max_by_key(|w| w.rank())
        .expect("a cached tensor");
    println!("W with labels {:?} and dims {:?}", w.labels(), w.dims());
    for chi in [None, Some(8), Some(4), Some(2), Some(1)] {
        let chain = mps_truncate(w, chi)?;
        println!("cap {chi:?}: max bond {} discarded weight {:.3e}", chain.max_bond(), chain.total_error());
    }

    println!("optimum {:?}", oracle(&problem)?.best_cost);
    for chi in [16, 4, 1] {
        let approx = ApproxConfig::new(Strategy::All).with_bond_cap(chi);
        let (sol, _) = solve_approx(&problem, &SolverConfig::default().with_approx(approx))?;
        println!("cap {chi}: cost {:?}", sol.cost);
    }
    Ok(())
}
