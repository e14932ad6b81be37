//! Route amplitudes of the network against exp(-tau * cost), and the
//! tour counts that appear at tau = 0.
use tn_tsp::{check_feasible, first_marginal, network_amplitude, route_cost, TourProblem};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let m: Vec<Vec<f64>> = (0..4).map(|i| (0..4).map(|j| (i as f64 - j as f64).abs()).collect()).collect();
    let problem = TourProblem::tsp(&m)?;
    let tau = 0.7;
    for route in [[0, 1, 2, 3], [0, 2, 1, 3], [0, 1, 1, 3]] {
        let amp = network_amplitude(&problem, tau, &route)?;
        let cost = route_cost(&problem, &route)?.value();
        let feasible = check_feasible(&problem, &route).feasible;
        let want = if feasible { cost.map_or(0.0, |c| (-tau * c).exp()) } else { 0.0 };
        println!("{route:?}: amplitude {amp:.6} expected {want:.6} (feasible {feasible})");
    }
    // node 0 is anchored; each of the other N - 1 nodes heads (N - 2)! tours
    for n in 3..=6 {
        let p = TourProblem::tsp(&vec![vec![1.0; n]; n])?;
        let counts: Vec<f64> = first_marginal(&p, 0.0)?.into_iter().map(|(_, v)| v.round()).collect();
        println!("N = {n}: {counts:?}");
    }
    Ok(())
}
