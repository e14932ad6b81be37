//! Job reassignment: workers move to better vacancies or stay.
use tn_tsp::jrp::solve_jrp_oriented;
use tn_tsp::{jrp_oracle, solve_jrp, JrpInstance, SolverConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let inst = JrpInstance {
        vacancy_quality: vec![6.0, 3.0, 8.0],
        current_quality: vec![4.0, 5.0, 2.0, 7.0],
        vacancy_affinity: vec![vec![2.0, 1.0, 0.0, 3.0], vec![1.0, 4.0, 2.0, 0.0], vec![0.0, 2.0, 5.0, 1.0]],
        current_affinity: vec![1.0, 2.0, 2.0, 1.0],
        c_p: 1.0,
        c_a: 0.5,
    };
    let a = solve_jrp(&inst, &SolverConfig::default())?;
    println!("assignment {:?} cost {} dP {} dA {}", a.x, a.cost, a.delta_p, a.delta_a);
    println!("oracle {:?}", jrp_oracle(&inst));

    // two identical vacancies for one worker: both choices are optimal
    let tie = JrpInstance {
        vacancy_quality: vec![8.0, 8.0],
        current_quality: vec![1.0],
        vacancy_affinity: vec![vec![0.0], vec![0.0]],
        current_affinity: vec![0.0],
        c_p: 1.0,
        c_a: 1.0,
    };
    for seed in 0..4 {
        let a = solve_jrp_oriented(&tie, &SolverConfig::default().with_seed(seed), false)?;
        println!("seed {seed}: x {:?} ties {} dP {} dA {}", a.x, a.tie_count, a.delta_p, a.delta_a);
    }
    Ok(())
}
