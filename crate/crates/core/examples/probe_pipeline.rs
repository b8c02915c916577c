//! End-to-end probe: synthesize, certify, simulate, analyze.

use ncts_core::analysis::dissipativity_index;
use ncts_core::cases;
use ncts_core::sdp::SolveOptions;
use ncts_core::sim::{run, transmission_stats, SignalSpec};
use ncts_core::synthesis::{synthesize, FaultMode, SynthesisOutcome};
use ncts_core::lmi::SynthesisScalars;

fn main() {
    for case in [cases::case1(), cases::case2(), cases::case3()] {
        let out = synthesize(
            &case.model,
            &SynthesisScalars::default(),
            FaultMode::Unknown,
            &SolveOptions::default(),
        )
        .unwrap();
        let cert = match out {
            SynthesisOutcome::Feasible(c) => c,
            SynthesisOutcome::Infeasible(r) => {
                println!("{}: INFEASIBLE {:?}", case.name, r.reason);
                continue;
            }
        };
        println!(
            "{}: k1={:?} k2={:?}",
            case.name,
            cert.k1.data(),
            cert.k2.data()
        );
        println!(
            "  w={:?} slow={:?} cond(X1)={:.2e} cond(X2)={:.2e}",
            cert.w.data(),
            cert.admissibility.slow_eigenvalues,
            cert.x1_condition,
            cert.x2_condition
        );
        let trace = run(&case.model, &cert, &case.scenario).unwrap();
        let stats = transmission_stats(&trace);
        let n0 = trace.state_norm(0);
        let n15 = trace.state_norm(trace.len() - 1);
        println!(
            "  sim: |x(0)|={n0:.3} |x(15)|={n15:.4} ratio={:.4} release={:.3} paths t/e/a={}/{}/{} alg_resid={:.2e}",
            n15 / n0,
            stats.release_ratio,
            stats.time_path,
            stats.event_path,
            stats.attack_path,
            trace.algebraic_residual.iter().cloned().fold(0.0, f64::max),
        );
        // zero-initial-state dissipativity probe
        let mut sc = case.scenario.clone();
        sc.x1_0 = vec![0.0, 0.0];
        sc.phi = SignalSpec::Constant { value: vec![0.0, 0.0] };
        sc.horizon = 20.0;
        let tr0 = run(&case.model, &cert, &sc).unwrap();
        let rep = dissipativity_index(&tr0, &case.model.dissipativity).unwrap();
        let jmin = rep.j.iter().cloned().fold(f64::INFINITY, f64::min);
        println!("  dissipativity: J(20)={:.4} min J={:.3e} violations={}", rep.terminal, jmin, rep.violation_times.len());
    }
}
