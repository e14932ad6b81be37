//! Min-max and max-min bottleneck tours on the same matrix.
use tn_tsp::{oracle, solve, CostModel, SolverConfig, TourProblem, Variant};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let m = vec![
        vec![0.0, 7.0, 3.0, 9.0, 4.0],
        vec![7.0, 0.0, 6.0, 2.0, 8.0],
        vec![3.0, 6.0, 0.0, 5.0, 1.0],
        vec![9.0, 2.0, 5.0, 0.0, 6.0],
        vec![4.0, 8.0, 1.0, 6.0, 0.0],
    ];
    for variant in [Variant::BtspMinmax, Variant::BtspMaxmin] {
        let problem = TourProblem::new(variant, CostModel::new(5, 5).with_step_matrix(&m)?);
        let sol = solve(&problem, &SolverConfig::default())?;
        println!("{variant:?}: route {:?} bottleneck {:?} (oracle {:?})", sol.route, sol.cost, oracle(&problem)?.best_cost);
    }
    Ok(())
}
