//! Quick feasibility probe for the shipped case presets.

use ncts_core::cases;
use ncts_core::lmi::{known_fault_system, uncertain_fault_system, SynthesisScalars};
use ncts_core::sdp::{solve, SolveOptions};

fn main() {
    for case in [cases::case1(), cases::case2(), cases::case3()] {
        let t0 = std::time::Instant::now();
        let sys = uncertain_fault_system(&case.model, &SynthesisScalars::default()).unwrap();
        let sol = solve(&sys, &SolveOptions::default()).unwrap();
        println!(
            "{} uncertain: status={:?} t*={:.4e} newton={} outer={} time={:.2}s",
            case.name,
            sol.status,
            sol.t_star,
            sol.iterations,
            sol.outer_iterations,
            t0.elapsed().as_secs_f64()
        );
        let worst = sol
            .residuals
            .iter()
            .map(|r| r.margin)
            .fold(f64::INFINITY, f64::min);
        println!("  worst margin: {worst:.4e}");
    }
    let case = cases::case1();
    let g = case.model.fault.g0();
    let t0 = std::time::Instant::now();
    let sys = known_fault_system(&case.model, &g, &SynthesisScalars::default()).unwrap();
    let sol = solve(&sys, &SolveOptions::default()).unwrap();
    println!(
        "case1 known: status={:?} t*={:.4e} newton={} time={:.2}s",
        sol.status,
        sol.t_star,
        sol.iterations,
        t0.elapsed().as_secs_f64()
    );
}
