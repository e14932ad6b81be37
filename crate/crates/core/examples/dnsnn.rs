//! Open route with more steps than nodes and per-node visit bounds.
use tn_tsp::{oracle, solve, CostModel, SolverConfig, TourProblem, Variant};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let m = vec![vec![0.0, 4.0, 7.0], vec![4.0, 0.0, 2.0], vec![7.0, 2.0, 0.0]];
    let cm = CostModel::new(3, 5).with_step_matrix(&m)?;
    // node 0 once or twice, node 1 at most twice, node 2 one to three times
    let problem = TourProblem::new(Variant::Dnsnn, cm)
        .with_returning(false)
        .with_visit_bounds(vec![(1, 2), (0, 2), (1, 3)]);
    let sol = solve(&problem, &SolverConfig::default())?;
    println!("route {:?} cost {:?}", sol.route, sol.cost);
    println!("oracle {:?}", oracle(&problem)?.best_cost);
    Ok(())
}
