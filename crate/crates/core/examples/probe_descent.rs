//! Diagnose the barrier landscape of the case-1 system.

use ncts_core::cases;
use ncts_core::lmi::{uncertain_fault_system, Sense, SynthesisScalars};
use ncts_core::numerics::{sym_eigenvalues, Cholesky};
use ncts_core::sdp::{solve, SolveOptions};
use ncts_core::Mat;

fn main() {
    let case = cases::case1();
    let sys = uncertain_fault_system(&case.model, &SynthesisScalars::default()).unwrap();
    let sol = solve(&sys, &SolveOptions { max_outer: 4, ..Default::default() }).unwrap();
    println!("after 4 outers: t={:.6}", sol.t_star);
    let mats = sys.materialize().unwrap();
    for (mc, x) in mats.iter().zip(std::iter::repeat(&sol.params)) {
        let mut f = mc.constant.clone();
        for sc in &mc.coeffs {
            for &(i, j, v) in &sc.entries {
                f[(i, j)] += x[sc.param] * v;
            }
        }
        let sign = match mc.sense {
            Sense::NegDef => -1.0,
            Sense::Psd => 1.0,
        };
        let mut s: Mat = f.scale(sign);
        for i in 0..mc.dim {
            s[(i, i)] += sol.t_star;
        }
        let s = s.symmetrized();
        let eigs = sym_eigenvalues(&s).unwrap();
        let chol_ok = Cholesky::factor(&s).is_some();
        println!(
            "{:22} dim={:3} min={:.3e} max={:.3e} chol={}",
            mc.name,
            mc.dim,
            eigs.first().unwrap(),
            eigs.last().unwrap(),
            chol_ok
        );
    }
    // values of a few variables
    for name in ["X1", "Q1", "R1", "M1", "W", "Y1", "Z2", "eps_t1"] {
        let v = sol.assignment.get(name).unwrap();
        println!("{name}: max_abs = {:.3e}", v.max_abs());
    }
}
