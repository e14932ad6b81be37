//! One node from each group, one step per group.
use tn_tsp::{oracle, solve, CostModel, SolverConfig, TourProblem, Variant};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let m = vec![
        vec![0.0, 5.0, 2.0, 8.0, 3.0, 6.0],
        vec![5.0, 0.0, 7.0, 1.0, 4.0, 9.0],
        vec![2.0, 7.0, 0.0, 6.0, 5.0, 3.0],
        vec![8.0, 1.0, 6.0, 0.0, 2.0, 7.0],
        vec![3.0, 4.0, 5.0, 2.0, 0.0, 8.0],
        vec![6.0, 9.0, 3.0, 7.0, 8.0, 0.0],
    ];
    let groups = vec![vec![0, 1], vec![2, 3, 4], vec![5]];
    let cm = CostModel::new(6, groups.len()).with_step_matrix(&m)?;
    let problem = TourProblem::new(Variant::Ptsp, cm).with_groups(groups);
    let sol = solve(&problem, &SolverConfig::default())?;
    println!("route {:?} cost {:?} (oracle {:?})", sol.route, sol.cost, oracle(&problem)?.best_cost);
    Ok(())
}
