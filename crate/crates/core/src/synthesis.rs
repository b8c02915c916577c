//! End-to-end gain synthesis: assemble the feasibility system, solve it,
//! recover the controller gains and event weight, and certify the closed
//! loop (regularity, impulse-freeness, slow-subsystem eigenvalues).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lmi::{known_fault_system, uncertain_fault_system, SynthesisScalars};
use crate::model::{is_regular_impulse_free, CascadeModel};
use crate::numerics::{cond_2, dae_coordinates, eigenvalues_general, inverse, Lu};
use crate::sdp::{solve, SdpSolution, SolveOptions, SolveStatus};
use crate::{Mat, Scalar};

/// Whether the actuator fault gains are known exactly or only by interval.
#[derive(Debug, Clone)]
pub enum FaultMode {
    Known(Mat),
    Unknown,
}

/// Closed-loop admissibility evidence for the secondary (descriptor) loop.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdmissibilityReport {
    pub regular: bool,
    pub impulse_free: bool,
    /// Eigenvalues of the reduced differential dynamics, as (re, im).
    pub slow_eigenvalues: Vec<(Scalar, Scalar)>,
    /// True when every slow eigenvalue has strictly negative real part.
    pub slow_stable: bool,
}

/// Summary of the solve that produced a certificate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolverSummary {
    pub status: String,
    pub t_star: Scalar,
    pub iterations: usize,
    pub outer_iterations: usize,
    pub strict_margin: Scalar,
}

/// Synthesized gains plus everything needed to audit them.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GainCertificate {
    /// Primary state-feedback gain (m x n1).
    pub k1: Mat,
    /// Secondary state-feedback gain (m x n2).
    pub k2: Mat,
    /// Event-trigger weight in physical coordinates (n1 x n1, PD).
    pub w: Mat,
    /// Raw decision values by registry name.
    pub decision: BTreeMap<String, Mat>,
    pub admissibility: AdmissibilityReport,
    /// Per-constraint margins at the solution.
    pub margins: BTreeMap<String, Scalar>,
    pub solver: SolverSummary,
    pub x1_condition: Scalar,
    pub x2_condition: Scalar,
}

impl GainCertificate {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Typed infeasibility: a first-class result, not an error.
#[derive(Debug, Clone, Serialize)]
pub struct InfeasibilityReport {
    pub reason: String,
    pub status: String,
    pub t_star: Scalar,
    pub iterations: usize,
}

#[derive(Debug, Clone)]
pub enum SynthesisOutcome {
    Feasible(Box<GainCertificate>),
    Infeasible(InfeasibilityReport),
}

/// Assemble, solve and certify. Known-fault mode uses the realized gain
/// matrix; unknown mode uses the interval data carried by the model.
pub fn synthesize(
    model: &CascadeModel,
    scalars: &SynthesisScalars,
    mode: FaultMode,
    opts: &SolveOptions,
) -> Result<SynthesisOutcome> {
    let sys = match &mode {
        FaultMode::Known(g) => known_fault_system(model, g, scalars)?,
        FaultMode::Unknown => uncertain_fault_system(model, scalars)?,
    };
    let sol = solve(&sys, opts)?;
    if sol.status != SolveStatus::Feasible {
        return Ok(SynthesisOutcome::Infeasible(InfeasibilityReport {
            reason: format!("phase-1 optimum t = {:.6e} not below -delta/2", sol.t_star),
            status: status_str(sol.status).into(),
            t_star: sol.t_star,
            iterations: sol.iterations,
        }));
    }

    let cert = extract_certificate(model, &sys.strict_margin(), &sol)?;
    if !(cert.admissibility.regular && cert.admissibility.impulse_free) {
        return Ok(SynthesisOutcome::Infeasible(InfeasibilityReport {
            reason: format!(
                "solver returned a feasible point but the closed loop failed certification \
                 (regular = {}, impulse_free = {})",
                cert.admissibility.regular, cert.admissibility.impulse_free
            ),
            status: "decertified".into(),
            t_star: sol.t_star,
            iterations: sol.iterations,
        }));
    }
    Ok(SynthesisOutcome::Feasible(Box::new(cert)))
}

fn status_str(s: SolveStatus) -> &'static str {
    match s {
        SolveStatus::Feasible => "feasible",
        SolveStatus::InfeasibleCertificate => "infeasible_certificate",
        SolveStatus::MaxIter => "max_iter",
        SolveStatus::NumericalFailure => "numerical_failure",
    }
}

fn extract_certificate(
    model: &CascadeModel,
    strict_margin: &Scalar,
    sol: &SdpSolution,
) -> Result<GainCertificate> {
    let need = |name: &str| -> Result<&Mat> {
        sol.assignment
            .get(name)
            .ok_or_else(|| Error::MissingVariable(name.to_string()))
    };
    let x1 = need("X1")?;
    let x2 = need("X2")?;
    let y1 = need("Y1")?;
    let y2 = need("Y2")?;
    let w_hat = need("W")?;

    let x1_condition = cond_2(x1)?;
    let x2_condition = cond_2(x2)?;
    if !x1_condition.is_finite() || x1_condition > 1e10 {
        return Err(Error::Extraction(format!(
            "X1 nearly singular (condition {x1_condition:.3e})"
        )));
    }
    if !x2_condition.is_finite() || x2_condition > 1e10 {
        return Err(Error::Extraction(format!(
            "X2 nearly singular (condition {x2_condition:.3e})"
        )));
    }

    let x1_inv = inverse(x1)?;
    let x2_inv = inverse(x2)?;
    let k1 = y1.matmul(&x1_inv)?;
    let k2 = y2.matmul(&x2_inv)?;
    // The congruence scales the trigger row by X1 on both sides, so the
    // physical-coordinate weight undoes it: W = X1^-T What X1^-1.
    let w = x1_inv
        .transpose()
        .matmul(w_hat)?
        .matmul(&x1_inv)?
        .symmetrized();

    let admissibility = certify_closed_loop(model, &k2)?;
    let margins = sol
        .residuals
        .iter()
        .map(|r| (r.name.clone(), r.margin))
        .collect();

    Ok(GainCertificate {
        k1,
        k2,
        w,
        decision: sol.assignment.clone(),
        admissibility,
        margins,
        solver: SolverSummary {
            status: status_str(sol.status).into(),
            t_star: sol.t_star,
            iterations: sol.iterations,
            outer_iterations: sol.outer_iterations,
            strict_margin: *strict_margin,
        },
        x1_condition,
        x2_condition,
    })
}

/// Regularity/impulse-freeness of `(E, A2 + B2 K2)` plus the eigenvalues of
/// the reduced differential dynamics.
pub fn certify_closed_loop(model: &CascadeModel, k2: &Mat) -> Result<AdmissibilityReport> {
    let e = &model.secondary.e;
    let a_cl = model
        .secondary
        .a2
        .add(&model.secondary.b2.matmul(k2)?)?;
    let (regular, impulse_free) = is_regular_impulse_free(e, &a_cl)?;

    let mut slow = Vec::new();
    let mut slow_stable = false;
    if regular && impulse_free {
        if let Some(a_slow) = slow_dynamics(e, &a_cl)? {
            slow = eigenvalues_general(&a_slow)?;
            slow_stable = slow.iter().all(|&(re, _)| re < 0.0);
        } else {
            slow_stable = true; // rank 0: no differential dynamics
        }
    }
    Ok(AdmissibilityReport {
        regular,
        impulse_free,
        slow_eigenvalues: slow,
        slow_stable,
    })
}

/// Reduced matrix of the differential coordinates:
/// `S_r^-1 (T11 - T12 T22^-1 T21)` with `T = U^T A V` in the coordinates of
/// the descriptor split. `None` when the split has rank zero.
pub fn slow_dynamics(e: &Mat, a: &Mat) -> Result<Option<Mat>> {
    let split = dae_coordinates(e)?;
    let r = split.rank;
    if r == 0 {
        return Ok(None);
    }
    let t = split.u.transpose().matmul(a)?.matmul(&split.v)?;
    let n = e.rows();
    let t11 = t.block(0, 0, r, r)?;
    let core = if n > r {
        let t12 = t.block(0, r, r, n - r)?;
        let t21 = t.block(r, 0, n - r, r)?;
        let t22 = t.block(r, r, n - r, n - r)?;
        let lu = Lu::factor(&t22)?;
        if lu.is_singular(1e-12) {
            return Err(Error::Extraction(
                "algebraic block singular; pair is not impulse-free".into(),
            ));
        }
        let t22inv_t21 = lu.solve_mat(&t21)?;
        t11.sub(&t12.matmul(&t22inv_t21)?)?
    } else {
        t11
    };
    let mut scaled = core;
    for i in 0..r {
        for j in 0..r {
            scaled[(i, j)] /= split.sigma[i];
        }
    }
    Ok(Some(scaled))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cases;

    #[test]
    fn reference_gain_certifies() {
        let model = cases::case1().model;
        let k2 = Mat::row_vec(&[-3.8497, -2.4732]);
        let rep = certify_closed_loop(&model, &k2).unwrap();
        assert!(rep.regular && rep.impulse_free);
        assert_eq!(rep.slow_eigenvalues.len(), 1);
        let (re, im) = rep.slow_eigenvalues[0];
        assert_eq!(im, 0.0);
        // Independent closed-form root of det(sE - A_cl) = c1 s + c0.
        let a_cl = model
            .secondary
            .a2
            .add(&model.secondary.b2.matmul(&k2).unwrap())
            .unwrap();
        let c1 = -a_cl[(1, 1)];
        let c0 = a_cl[(0, 0)] * a_cl[(1, 1)] - a_cl[(0, 1)] * a_cl[(1, 0)];
        let root = -c0 / c1;
        assert!((re - root).abs() < 1e-9, "slow eig {re} vs oracle {root}");
        assert!((re + 0.218).abs() < 5e-3, "slow eig {re} should be near -0.218");
        assert!(rep.slow_stable);
    }

    #[test]
    fn zero_gain_not_impulse_free() {
        let model = cases::case1().model;
        let k2 = Mat::zeros(1, 2);
        let rep = certify_closed_loop(&model, &k2).unwrap();
        assert!(rep.regular);
        assert!(!rep.impulse_free);
    }

    #[test]
    fn nonsingular_descriptor_reduces_to_eigencheck() {
        let mut model = cases::case1().model;
        model.secondary.e = Mat::identity(2);
        let k2 = Mat::row_vec(&[-3.8497, -2.4732]);
        let rep = certify_closed_loop(&model, &k2).unwrap();
        assert!(rep.regular && rep.impulse_free);
        assert_eq!(rep.slow_eigenvalues.len(), 2);
    }
}
