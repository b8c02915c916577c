//! Dense semidefinite feasibility solver: a phase-1 log-det barrier Newton
//! method over the epigraph variable `t`, minimizing the worst constraint
//! margin. Deterministic for fixed options; no randomness is consumed.

use std::collections::BTreeMap;
use std::time::Instant;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::lmi::{LmiSystem, MaterializedConstraint, Sense};
use crate::numerics::{sym_eigenvalues, Cholesky, DenseMat};
use crate::{Mat, Scalar};

#[derive(Debug, Clone)]
pub struct SolveOptions {
    pub max_outer: usize,
    pub max_inner: usize,
    /// Duality-gap surrogate tolerance, relative to `1 + |t|`.
    pub gap_tol: Scalar,
    /// Accepted for interface stability; the method draws no randomness.
    pub seed: u64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            max_outer: 60,
            max_inner: 50,
            gap_tol: 1e-8,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Feasible,
    InfeasibleCertificate,
    MaxIter,
    NumericalFailure,
}

/// Extreme eigenvalues and sense margin of one constraint at an assignment.
#[derive(Debug, Clone, Serialize)]
pub struct ConstraintResidual {
    pub name: String,
    pub sense: Sense,
    pub dim: usize,
    pub min_eig: Scalar,
    pub max_eig: Scalar,
    /// Positive when satisfied: `-max_eig` for strict-negative constraints,
    /// `min_eig` for PSD constraints.
    pub margin: Scalar,
}

/// Solver output: assignment, verdict, residuals, and iteration record.
#[derive(Debug, Clone, Serialize)]
pub struct SdpSolution {
    pub status: SolveStatus,
    /// Decision variables by registry name.
    pub assignment: BTreeMap<String, Mat>,
    #[serde(skip)]
    pub params: Vec<Scalar>,
    /// Final phase-1 objective (worst margin over all constraints).
    pub t_star: Scalar,
    pub residuals: Vec<ConstraintResidual>,
    pub iterations: usize,
    pub outer_iterations: usize,
    /// Objective after each accepted Newton step (non-increasing).
    pub t_trace: Vec<Scalar>,
    /// Wall time is environment-dependent and excluded from serialized
    /// output so identical inputs produce identical files.
    #[serde(skip)]
    pub wall_time_s: f64,
}

struct Block {
    sense: Sense,
    dim: usize,
    constant: Mat,
    /// (param index, triplets) for parameters active in this block.
    coeffs: Vec<(usize, Vec<(usize, usize, Scalar)>)>,
}

impl Block {
    fn from(c: &MaterializedConstraint) -> Self {
        Self {
            sense: c.sense,
            dim: c.dim,
            constant: c.constant.clone(),
            coeffs: c
                .coeffs
                .iter()
                .map(|sc| (sc.param, sc.entries.clone()))
                .collect(),
        }
    }

    /// Slack matrix `S(x, t)`: `tI - F(x)` for strict blocks,
    /// `F(x) + tI` for PSD blocks.
    fn slack(&self, x: &[Scalar], t: Scalar) -> Mat {
        let mut f = self.constant.clone();
        for (k, entries) in &self.coeffs {
            let xk = x[*k];
            if xk == 0.0 {
                continue;
            }
            for &(i, j, v) in entries {
                f[(i, j)] += xk * v;
            }
        }
        let sign = match self.sense {
            Sense::NegDef => -1.0,
            Sense::Psd => 1.0,
        };
        let mut s = f.scale(sign);
        for i in 0..self.dim {
            s[(i, i)] += t;
        }
        s.symmetrized()
    }

    /// Sign of `dS/dx_k` relative to `A_k`.
    fn coeff_sign(&self) -> Scalar {
        match self.sense {
            Sense::NegDef => -1.0,
            Sense::Psd => 1.0,
        }
    }
}

/// Phase-1 feasibility solve: minimize `t` such that every strict block is
/// `<= t I` and every PSD block is `>= -t I`; feasible when the optimum is
/// below `-delta/2` with `delta` the system strictness margin.
///
/// Block-coordinate barrier descent: damped Newton re-centers the
/// parameters at the current level `t`, then `t` takes its exact
/// one-dimensional barrier minimizer, accepted only downward. The phase-1
/// objective is therefore non-increasing across every accepted step.
pub fn solve(sys: &LmiSystem, opts: &SolveOptions) -> Result<SdpSolution> {
    let _ = opts.seed; // deterministic; kept for interface stability
    let start = Instant::now();
    let mut blocks: Vec<Block> = sys.materialize()?.iter().map(Block::from).collect();
    let p = sys.registry.param_count();

    // Iterate box |x_k| <= BOX: some systems have recession directions
    // (variables entering only with a feasibility-improving sign), along
    // which the analytic center does not exist and the barrier diverges.
    // The box keeps level sets compact; it only binds at magnitudes far
    // beyond where the synthesized certificates live.
    const BOX: Scalar = 1e6;
    for k in 0..p {
        for sign in [1.0, -1.0] {
            let mut c = Mat::zeros(1, 1);
            c[(0, 0)] = BOX;
            blocks.push(Block {
                sense: Sense::Psd,
                dim: 1,
                constant: c,
                coeffs: vec![(k, vec![(0, 0, sign)])],
            });
        }
    }

    let nu: Scalar = blocks.iter().map(|b| b.dim as Scalar).sum();
    let delta = sys.strict_margin();

    // Interior start: x = 0, t above the worst constant-part eigenvalue.
    let mut x = vec![0.0; p];
    let mut t = {
        let mut worst = Scalar::NEG_INFINITY;
        for b in &blocks {
            let s0 = b.slack(&x, 0.0);
            let lam = sym_eigenvalues(&s0)?;
            let need = -lam.first().copied().unwrap_or(0.0);
            worst = worst.max(need);
        }
        worst + 1.0
    };

    // Incumbent: the best point seen so far, valued by its certified
    // phase-1 objective (worst sense-adjusted eigenvalue over all
    // constraints). The incumbent value is the reported objective and is
    // non-increasing across accepted Newton iterations by construction.
    let mut x_best = x.clone();
    let mut t_best = certified_objective(&blocks, &x)?;

    let mut mu: Scalar = 1.0;
    let mut t_trace = vec![t_best];
    let mut total_newton = 0usize;
    let mut outer_done = 0usize;
    let mut converged = false;
    let mut failure = false;

    'outer: for _outer in 0..opts.max_outer {
        outer_done += 1;
        for _inner in 0..opts.max_inner {
            let Some(step) = newton_step(&blocks, &x, t, mu, p) else {
                failure = true;
                break 'outer;
            };
            let NewtonStep {
                dir,
                decrement_sq,
                f_val,
                grad,
            } = step;
            if !decrement_sq.is_finite() || !f_val.is_finite() {
                failure = true;
                break 'outer;
            }
            if decrement_sq * 0.5 < 1e-9 * mu * (1.0 + (f_val / mu).abs()) {
                break;
            }
            // Backtracking line search: stay interior, decrease f.
            let g_dot_d: Scalar = grad.iter().zip(&dir).map(|(g, d)| g * d).sum();
            let mut alpha: Scalar = 1.0;
            let mut accepted = false;
            for _bt in 0..60 {
                let xt: Vec<Scalar> = x
                    .iter()
                    .zip(&dir)
                    .map(|(xi, di)| xi + alpha * di)
                    .collect();
                let tt = t + alpha * dir[p];
                if let Some(f_new) = barrier_value(&blocks, &xt, tt, mu) {
                    if f_new <= f_val + 0.01 * alpha * g_dot_d {
                        x = xt[..p].to_vec();
                        t = tt;
                        accepted = true;
                        break;
                    }
                }
                alpha *= 0.5;
            }
            if !accepted {
                break; // stalled at this barrier weight
            }
            total_newton += 1;
            let cert = certified_objective(&blocks, &x)?;
            if cert < t_best {
                t_best = cert;
                x_best = x.clone();
            }
            t_trace.push(t_best);
        }
        if std::env::var_os("NCTS_SOLVER_TRACE").is_some() {
            eprintln!(
                "outer {outer_done}: mu={mu:.2e} t={t:.6} t_best={t_best:.6} newton={total_newton}"
            );
        }

        let gap = mu * nu;
        if gap < opts.gap_tol * (1.0 + t_best.abs()) {
            converged = true;
            break;
        }
        mu *= 0.25;
    }

    let status = if failure {
        SolveStatus::NumericalFailure
    } else if t_best < -delta / 2.0 {
        SolveStatus::Feasible
    } else if converged {
        SolveStatus::InfeasibleCertificate
    } else {
        SolveStatus::MaxIter
    };

    let residuals = residuals_from_params(sys, &x_best)?;
    let assignment = assignment_map(sys, &x_best);
    Ok(SdpSolution {
        status,
        assignment,
        params: x_best,
        t_star: t_best,
        residuals,
        iterations: total_newton,
        outer_iterations: outer_done,
        t_trace,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

/// Worst sense-adjusted eigenvalue over the blocks at `x`: the smallest `t`
/// for which `x` satisfies every level-`t` constraint.
fn certified_objective(blocks: &[Block], x: &[Scalar]) -> Result<Scalar> {
    let mut worst = Scalar::NEG_INFINITY;
    for b in blocks {
        let s = b.slack(x, 0.0);
        let eigs = sym_eigenvalues(&s)?;
        let need = -eigs.first().copied().unwrap_or(0.0);
        worst = worst.max(need);
    }
    Ok(worst)
}

struct NewtonStep {
    /// Direction over the parameters plus the epigraph variable (last).
    dir: Vec<Scalar>,
    decrement_sq: Scalar,
    f_val: Scalar,
    grad: Vec<Scalar>,
}

fn barrier_value(blocks: &[Block], x: &[Scalar], t: Scalar, mu: Scalar) -> Option<Scalar> {
    let mut phi = 0.0;
    for b in blocks {
        let s = b.slack(x, t);
        let ch = Cholesky::factor(&s)?;
        phi -= ch.logdet();
    }
    Some(t + mu * phi)
}

/// Damped-Newton direction of `t + mu * phi(x, t)` over `(x, t)` jointly.
fn newton_step(
    blocks: &[Block],
    x_in: &[Scalar],
    t: Scalar,
    mu: Scalar,
    p: usize,
) -> Option<NewtonStep> {
    let n = p + 1;
    let mut grad = vec![0.0; n];
    let mut hess = DenseMat::<Scalar>::zeros(n, n);
    let mut f_val = t;

    for b in blocks {
        let s = b.slack(x_in, t);
        let ch = Cholesky::factor(&s)?;
        f_val -= mu * ch.logdet();
        let sinv = ch.inverse();
        let s2inv = sinv.matmul(&sinv).ok()?;
        let sign = b.coeff_sign();

        // Gradient: d(-logdet S)/dθ = -tr(S^-1 dS/dθ).
        for (k, entries) in &b.coeffs {
            let mut tr = 0.0;
            for &(i, j, v) in entries {
                tr += v * sinv[(j, i)];
            }
            grad[*k] += mu * (-sign * tr);
        }
        let tr_sinv: Scalar = (0..b.dim).map(|i| sinv[(i, i)]).sum();
        grad[p] += mu * (-tr_sinv);

        // Hessian: tr(S^-1 D_a S^-1 D_b); the block senses cancel in the
        // parameter-parameter entries and survive in the t-cross terms.
        for (ai, (ka, ea)) in b.coeffs.iter().enumerate() {
            for (kb, eb) in b.coeffs.iter().skip(ai) {
                let mut acc = 0.0;
                for &(i1, j1, v1) in ea {
                    for &(i2, j2, v2) in eb {
                        acc += v1 * v2 * sinv[(j1, i2)] * sinv[(j2, i1)];
                    }
                }
                hess[(*ka, *kb)] += mu * acc;
                if ka != kb {
                    hess[(*kb, *ka)] += mu * acc;
                }
            }
            let mut acc = 0.0;
            for &(i, j, v) in ea {
                acc += v * s2inv[(j, i)];
            }
            hess[(*ka, p)] += mu * sign * acc;
            hess[(p, *ka)] += mu * sign * acc;
        }
        let tr_s2: Scalar = (0..b.dim).map(|i| s2inv[(i, i)]).sum();
        hess[(p, p)] += mu * tr_s2;
    }
    grad[p] += 1.0; // the objective contributes d t / d t

    // Solve H d = -g with an escalating ridge on factorization failure.
    let rhs: Vec<Scalar> = grad.iter().map(|g| -g).collect();
    let mut ridge = 0.0;
    let dir = loop {
        let mut h = hess.clone();
        if ridge > 0.0 {
            for i in 0..n {
                h[(i, i)] += ridge;
            }
        }
        match Cholesky::factor(&h) {
            Some(ch) => break ch.solve(&rhs),
            None => {
                ridge = if ridge == 0.0 {
                    1e-12 * (1.0 + hess.max_abs())
                } else {
                    ridge * 10.0
                };
                if ridge > 1e-3 * (1.0 + hess.max_abs()) {
                    return None;
                }
            }
        }
    };

    let decrement_sq: Scalar = dir.iter().zip(&grad).map(|(d, g)| -d * g).sum();
    Some(NewtonStep {
        dir,
        decrement_sq: decrement_sq.max(0.0),
        f_val,
        grad,
    })
}

/// Pure residual evaluation at a parameter vector.
pub fn residuals_from_params(sys: &LmiSystem, params: &[Scalar]) -> Result<Vec<ConstraintResidual>> {
    if params.len() != sys.registry.param_count() {
        return Err(Error::Dimension(format!(
            "expected {} parameters, got {}",
            sys.registry.param_count(),
            params.len()
        )));
    }
    let mut out = Vec::new();
    for c in &sys.constraints {
        let m = c.eval(&sys.registry, params)?;
        let eigs = sym_eigenvalues(&m)?;
        let (min_eig, max_eig) = (
            eigs.first().copied().unwrap_or(0.0),
            eigs.last().copied().unwrap_or(0.0),
        );
        let margin = match c.sense {
            Sense::NegDef => -max_eig,
            Sense::Psd => min_eig,
        };
        out.push(ConstraintResidual {
            name: c.name.clone(),
            sense: c.sense,
            dim: c.dim(),
            min_eig,
            max_eig,
            margin,
        });
    }
    Ok(out)
}

/// Residuals for a named assignment; errors on any missing variable.
pub fn residuals(
    sys: &LmiSystem,
    assignment: &BTreeMap<String, Mat>,
) -> Result<Vec<ConstraintResidual>> {
    let mut params = vec![0.0; sys.registry.param_count()];
    for (id, decl) in sys.registry.iter() {
        let value = assignment
            .get(&decl.name)
            .ok_or_else(|| Error::MissingVariable(decl.name.clone()))?;
        sys.registry.store(id, value, &mut params)?;
    }
    residuals_from_params(sys, &params)
}

fn assignment_map(sys: &LmiSystem, params: &[Scalar]) -> BTreeMap<String, Mat> {
    sys.registry
        .iter()
        .map(|(id, decl)| (decl.name.clone(), sys.registry.value(id, params)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lmi::{Constraint, Expr, FixedScalars, Term, VarRegistry, VarShape};
    use crate::numerics::BlockLayout;

    fn scalars_stub() -> FixedScalars {
        FixedScalars {
            alpha_bar: 0.0,
            beta_bar: 0.0,
            sigma: 0.0,
            delta: 0.0,
            epsilon: 0.5,
            eps: [1.0; 4],
            eps_f: 1.0,
            mu: 0.0,
            gamma: 1.0,
            zeta2: 1.0,
            d2: 1.0,
            tau2: 1.0,
            theta_bar: 1.0,
            lambda: 0.0,
        }
    }

    fn scalar_term(reg: &VarRegistry, name: &str, c: f64) -> Term {
        let id = reg.id(name).unwrap();
        let _ = id;
        Term {
            coeff: c,
            left: Mat::identity(1),
            var: Some(id),
            transposed: false,
            psd_part: false,
            right: Mat::identity(1),
        }
    }

    fn constant_term(v: f64) -> Term {
        Term {
            coeff: v,
            left: Mat::identity(1),
            var: None,
            transposed: false,
            psd_part: false,
            right: Mat::identity(1),
        }
    }

    /// x with 2 <= x <= 3 expressed as two PSD constraints.
    fn interval_system() -> LmiSystem {
        let mut reg = VarRegistry::new();
        reg.add("x", VarShape::Free { rows: 1, cols: 1 }, false).unwrap();
        let layout = || BlockLayout::new(&[("b", 1)]).unwrap();
        let mut c1 = Constraint::new("lower", layout(), Sense::Psd);
        c1.set_block(0, 0, Expr { terms: vec![scalar_term(&reg, "x", 1.0), constant_term(-2.0)] }, &reg)
            .unwrap();
        let mut c2 = Constraint::new("upper", layout(), Sense::Psd);
        c2.set_block(0, 0, Expr { terms: vec![scalar_term(&reg, "x", -1.0), constant_term(3.0)] }, &reg)
            .unwrap();
        let mut sys = LmiSystem {
            registry: reg,
            constraints: vec![c1, c2],
            scalars: scalars_stub(),
        };
        sys.finalize().unwrap();
        sys
    }

    #[test]
    fn toy_interval_feasible() {
        let sys = interval_system();
        let sol = solve(&sys, &SolveOptions::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Feasible);
        let x = sol.assignment.get("x").unwrap()[(0, 0)];
        assert!((2.0..=3.0).contains(&x), "x = {x}");
        // monotone objective across accepted Newton steps
        for w in sol.t_trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-9 * (1.0 + w[0].abs()));
        }
    }

    #[test]
    fn constant_violation_infeasible() {
        let mut reg = VarRegistry::new();
        reg.add("x", VarShape::Free { rows: 1, cols: 1 }, false).unwrap();
        let layout = BlockLayout::new(&[("b", 1)]).unwrap();
        // [[1]] < 0 with no variable influence.
        let mut c = Constraint::new("bad", layout, Sense::NegDef);
        c.set_block(0, 0, Expr { terms: vec![constant_term(1.0)] }, &reg).unwrap();
        let mut sys = LmiSystem {
            registry: reg,
            constraints: vec![c],
            scalars: scalars_stub(),
        };
        sys.finalize().unwrap();
        let sol = solve(&sys, &SolveOptions::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::InfeasibleCertificate);
        assert!(sol.t_star >= 1.0 - 1e-6, "t* = {}", sol.t_star);
    }

    #[test]
    fn residuals_report_margins() {
        let sys = interval_system();
        let zero = vec![0.0; 1];
        let res = residuals_from_params(&sys, &zero).unwrap();
        assert_eq!(res.len(), 2);
        assert!((res[0].margin + 2.0).abs() < 1e-12); // violated by -2
        assert!((res[1].margin - 3.0).abs() < 1e-12); // satisfied with +3
    }

    #[test]
    fn residuals_missing_variable_named() {
        let sys = interval_system();
        let empty = std::collections::BTreeMap::new();
        match residuals(&sys, &empty) {
            Err(Error::MissingVariable(name)) => assert_eq!(name, "x"),
            other => panic!("expected missing-variable error, got {other:?}"),
        }
    }

    #[test]
    fn verdict_invariant_under_constraint_scaling() {
        // Scaling both constraints by c > 0 must not change the verdict.
        for scale in [1e-3, 1.0, 1e3] {
            let mut reg = VarRegistry::new();
            reg.add("x", VarShape::Free { rows: 1, cols: 1 }, false).unwrap();
            let layout = || BlockLayout::new(&[("b", 1)]).unwrap();
            let mut c1 = Constraint::new("lower", layout(), Sense::Psd);
            c1.set_block(
                0,
                0,
                Expr { terms: vec![scalar_term(&reg, "x", scale), constant_term(-2.0 * scale)] },
                &reg,
            )
            .unwrap();
            let mut c2 = Constraint::new("upper", layout(), Sense::Psd);
            c2.set_block(
                0,
                0,
                Expr { terms: vec![scalar_term(&reg, "x", -scale), constant_term(3.0 * scale)] },
                &reg,
            )
            .unwrap();
            let mut sys = LmiSystem {
                registry: reg,
                constraints: vec![c1, c2],
                scalars: scalars_stub(),
            };
            sys.finalize().unwrap();
            let sol = solve(&sys, &SolveOptions::default()).unwrap();
            assert_eq!(sol.status, SolveStatus::Feasible, "scale {scale}");
        }
    }
}
