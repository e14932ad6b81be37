//! Solves a small closed tour and compares with exhaustive search.
use tn_tsp::{oracle, solve_detailed, SolverConfig, TourProblem};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let costs = vec![
        vec![0.0, 12.0, 29.0, 22.0, 13.0, 24.0],
        vec![12.0, 0.0, 19.0, 3.0, 25.0, 6.0],
        vec![29.0, 19.0, 0.0, 21.0, 23.0, 28.0],
        vec![22.0, 3.0, 21.0, 0.0, 4.0, 5.0],
        vec![13.0, 25.0, 23.0, 4.0, 0.0, 16.0],
        vec![24.0, 6.0, 28.0, 5.0, 16.0, 0.0],
    ];
    let problem = TourProblem::tsp(&costs)?;
    let (sol, diag) = solve_detailed(&problem, &SolverConfig::default())?;
    println!("route {:?} cost {:?} (tau {:.3})", sol.route, sol.cost, sol.tau_used);
    for it in &diag.iterations {
        println!("  position {} -> node {} ({} ops)", it.position, it.node, it.ops);
    }
    let best = oracle(&problem)?;
    println!("oracle {:?} over {} routes", best.best_cost, best.evaluated);
    Ok(())
}
