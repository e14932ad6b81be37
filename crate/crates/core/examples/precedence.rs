//! Closed tour where some nodes must be visited before others.
use tn_tsp::{oracle, solve, CostModel, SolverConfig, TourProblem, Variant};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let m = vec![
        vec![0.0, 2.0, 9.0, 10.0, 7.0],
        vec![1.0, 0.0, 6.0, 4.0, 3.0],
        vec![15.0, 7.0, 0.0, 8.0, 3.0],
        vec![6.0, 3.0, 12.0, 0.0, 11.0],
        vec![9.0, 7.0, 5.0, 6.0, 0.0],
    ];
    let cm = CostModel::new(5, 5).with_step_matrix(&m)?;
    let free = TourProblem::new(Variant::Tsp, cm.clone());
    let ruled = TourProblem::new(Variant::Tspp, cm).with_precedence(vec![(3, 1), (2, 4)]);
    for (name, p) in [("unconstrained", free), ("3 before 1, 2 before 4", ruled)] {
        let sol = solve(&p, &SolverConfig::default())?;
        println!("{name}: route {:?} cost {:?} (oracle {:?})", sol.route, sol.cost, oracle(&p)?.best_cost);
    }
    Ok(())
}
