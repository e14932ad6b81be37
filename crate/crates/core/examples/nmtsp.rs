//! Step costs that depend on the previous node as well as the current edge.
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tn_tsp::instances::random_nmtsp;
use tn_tsp::{oracle, solve, SolverConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for depth in [1, 2] {
        let problem = random_nmtsp(4, depth, &mut rng);
        let sol = solve(&problem, &SolverConfig::default())?;
        let best = oracle(&problem)?.best_cost;
        println!("memory depth {depth}: route {:?} cost {:?}, oracle {best:?}", sol.route, sol.cost);
    }
    Ok(())
}
