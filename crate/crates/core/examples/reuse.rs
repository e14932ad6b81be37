//! Work per iteration with and without cached sweep tensors.
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tn_tsp::instances::random_tsp;
use tn_tsp::{solve_detailed, SolverConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let problem = random_tsp(9, 1, 100, &mut rng);
    let cfg = SolverConfig::default().with_seed(0);
    let (a, plain) = solve_detailed(&problem, &cfg)?;
    let (b, cached) = solve_detailed(&problem, &cfg.clone().with_reuse(true))?;
    assert_eq!(a.route, b.route);
    println!("route {:?} cost {:?}", a.route, a.cost);
    println!("position  plain  reuse");
    for (x, y) in plain.iterations.iter().zip(&cached.iterations) {
        println!("{:>8} {:>6} {:>6}{}", x.position, x.ops, y.ops, if y.reused { "  (cached)" } else { "" });
    }
    println!("after the first: {} vs {}", plain.ops_after_first(), cached.ops_after_first());
    Ok(())
}
