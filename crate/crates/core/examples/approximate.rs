//! Layer-subset approximations next to the exact answer.
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tn_tsp::instances::random_tsp;
use tn_tsp::{oracle, solve_approx, ApproxConfig, SolverConfig, Strategy};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let problem = random_tsp(8, 1, 100, &mut rng);
    println!("optimum {:?}", oracle(&problem)?.best_cost);
    let configs = [
        ApproxConfig::default(),
        ApproxConfig::new(Strategy::RandomK).with_k(2),
        ApproxConfig::new(Strategy::HeuristicNearest).with_k(2),
        ApproxConfig::new(Strategy::FromFailures).with_k(2),
    ];
    for approx in configs {
        let cfg = SolverConfig::default().with_seed(1).with_approx(approx.clone());
        let (sol, diag) = solve_approx(&problem, &cfg)?;
        println!(
            "{:?} k={:?}: route {:?} cost {:?} feasible {} ops {}",
            approx.strategy, approx.k, sol.route, sol.cost, sol.feasible, diag.total_ops
        );
    }
    Ok(())
}
