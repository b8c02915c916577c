//! Post-hoc verification: the supply-rate (dissipativity) index along a
//! trace, numerical Lyapunov-Krasovskii functional evaluation, and numeric
//! gap oracles for the matrix/integral inequalities the synthesis rests on.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{CascadeModel, DissipativityTriple};
use crate::numerics::{dot, inverse, min_eig_sym, BlockLayout, SymBlockBuilder};
use crate::sim::SimTrace;
use crate::synthesis::GainCertificate;
use crate::{Mat, Scalar};

/// Running supply-rate integral along a trace.
#[derive(Debug, Clone, Serialize)]
pub struct DissipativityReport {
    /// `J(t_i)` on the trace grid; `J(0) = 0`.
    pub j: Vec<Scalar>,
    pub terminal: Scalar,
    pub gamma: Scalar,
    /// Times where `J` dips below zero.
    pub violation_times: Vec<Scalar>,
    /// Set when the trace starts away from the origin (the supply-rate
    /// requirement is stated for zero initial state).
    pub nonzero_initial_state: bool,
}

/// `J(t) = int_0^t (y' Q y + 2 y' S w + w' R w - gamma w' w) ds` by the
/// trapezoid rule on the trace grid.
pub fn dissipativity_index(
    trace: &SimTrace,
    triple: &DissipativityTriple,
) -> Result<DissipativityReport> {
    if trace.is_empty() {
        return Err(Error::Range("empty trace".into()));
    }
    let integrand = |y: &[Scalar], w: &[Scalar]| -> Result<Scalar> {
        let qy = triple.q.matvec(y)?;
        let sw = triple.s.matvec(w)?;
        let rw = triple.r.matvec(w)?;
        Ok(dot(y, &qy) + 2.0 * dot(y, &sw) + dot(w, &rw) - triple.gamma * dot(w, w))
    };
    let mut j = Vec::with_capacity(trace.len());
    let mut acc = 0.0;
    let mut prev = integrand(&trace.y1[0], &trace.w[0])?;
    j.push(0.0);
    for i in 1..trace.len() {
        let cur = integrand(&trace.y1[i], &trace.w[i])?;
        let dt = trace.t[i] - trace.t[i - 1];
        acc += 0.5 * dt * (prev + cur);
        j.push(acc);
        prev = cur;
    }
    let violation_times: Vec<Scalar> = trace
        .t
        .iter()
        .zip(&j)
        .filter(|(_, &ji)| ji < 0.0)
        .map(|(&ti, _)| ti)
        .collect();
    let x0: Scalar = trace.x1[0]
        .iter()
        .chain(trace.x2[0].iter())
        .map(|v| v * v)
        .sum();
    Ok(DissipativityReport {
        terminal: acc,
        gamma: triple.gamma,
        violation_times,
        nonzero_initial_state: x0.sqrt() > 1e-9,
        j,
    })
}

/// PD weight matrices of the stability functional, recovered from the raw
/// decision values of a certificate (`P1 = X1^-1` and companions).
#[derive(Debug, Clone)]
pub struct LkfWeights {
    pub p1: Mat,
    pub p2: Mat,
    pub q1: Mat,
    pub q2: Mat,
    pub q3: Mat,
    pub q4: Mat,
    pub q4d: Mat,
    pub z1: Mat,
    pub z2: Mat,
    pub r1: Mat,
    pub r2: Mat,
    pub r3: Mat,
}

impl LkfWeights {
    pub fn from_certificate(cert: &GainCertificate) -> Result<Self> {
        let get = |name: &str| -> Result<&Mat> {
            cert.decision
                .get(name)
                .ok_or_else(|| Error::MissingVariable(name.to_string()))
        };
        let x1_inv = inverse(get("X1")?)?;
        let x2_inv = inverse(get("X2")?)?;
        let x2_inv_t = x2_inv.transpose();
        let un_x1 = |m: &Mat| -> Result<Mat> {
            Ok(x1_inv.matmul(m)?.matmul(&x1_inv)?.symmetrized())
        };
        let un_x2 = |m: &Mat| -> Result<Mat> {
            Ok(x2_inv_t.matmul(m)?.matmul(&x2_inv)?.symmetrized())
        };
        Ok(Self {
            p1: x1_inv.symmetrized(),
            q1: un_x1(get("Q1")?)?,
            q2: un_x1(get("Q2")?)?,
            q3: un_x1(get("Q3")?)?,
            q4: un_x2(get("Q4")?)?,
            q4d: un_x2(get("Q4d")?)?,
            z1: un_x2(get("Z1")?)?,
            z2: un_x2(get("Z2")?)?,
            r1: un_x1(get("R1")?)?,
            r2: un_x1(get("R2")?)?,
            r3: un_x1(get("R3")?)?,
            p2: x2_inv.clone(),
        })
    }

    /// Identity weights at given dimensions, for synthetic checks.
    pub fn identity(n1: usize, n2: usize) -> Self {
        Self {
            p1: Mat::identity(n1),
            p2: Mat::identity(n2),
            q1: Mat::identity(n1),
            q2: Mat::identity(n1),
            q3: Mat::identity(n1),
            q4: Mat::identity(n2),
            q4d: Mat::identity(n2),
            z1: Mat::identity(n2),
            z2: Mat::identity(n2),
            r1: Mat::identity(n1),
            r2: Mat::identity(n1),
            r3: Mat::identity(n1),
        }
    }
}

/// Evaluate the stability functional at time `t` by quadrature over the
/// trace history: a point quadratic term, delayed single-integral
/// quadratics, and weighted double-integral terms reduced to single
/// integrals with linear weights. Derivatives come from finite differences
/// on the trace grid; the state-delay term uses the delay bound.
pub fn lkf_value(
    trace: &SimTrace,
    weights: &LkfWeights,
    model: &CascadeModel,
    t: Scalar,
) -> Result<Scalar> {
    let d = &model.delays;
    let max_delay = d.zeta2.max(d.d2).max(d.tau2).max(d.theta_bar);
    if trace.len() < 3 {
        return Err(Error::Range("trace too short".into()));
    }
    let t0 = trace.t[0];
    let t_end = *trace.t.last().expect("nonempty");
    if t < t0 + max_delay || t > t_end + 1e-12 {
        return Err(Error::Range(format!(
            "lkf evaluation time {t} outside [{}, {}]",
            t0 + max_delay,
            t_end
        )));
    }
    let row = trace
        .row_at(t)
        .ok_or_else(|| Error::Range(format!("no trace row at {t}")))?;

    let quad = |m: &Mat, v: &[Scalar]| -> Scalar {
        let mv = m.matvec(v).expect("dims");
        dot(v, &mv)
    };

    // V1: point quadratics (the descriptor part weighs E^T P2).
    let e_p2 = model.secondary.e.transpose().matmul(&weights.p2)?;
    let v1 = quad(&weights.p1, &trace.x1[row]) + quad(&e_p2.symmetrized(), &trace.x2[row]);

    // Trapezoid over trace rows in [t - span, t] of a row-indexed integrand.
    let integrate = |span: Scalar, f: &dyn Fn(usize) -> Scalar| -> Scalar {
        let lo_t = t - span;
        let mut acc = 0.0;
        for i in 1..=row {
            if trace.t[i] <= lo_t {
                continue;
            }
            let (ta, tb) = (trace.t[i - 1].max(lo_t), trace.t[i]);
            if tb <= ta {
                continue;
            }
            acc += 0.5 * (tb - ta) * (f(i - 1) + f(i));
        }
        acc
    };

    // V2: delayed quadratics of the states.
    let v2 = integrate(d.zeta2, &|i| quad(&weights.q1, &trace.x1[i]))
        + integrate(d.d2, &|i| quad(&weights.q2, &trace.x1[i]))
        + integrate(d.tau2, &|i| quad(&weights.q3, &trace.x1[i]))
        + integrate(d.theta_bar, &|i| quad(&weights.q4d, &trace.x2[i]))
        + integrate(d.theta_bar, &|i| quad(&weights.q4, &trace.x2[i]));

    // Finite-difference derivatives on the grid.
    let diff = |series: &Vec<Vec<Scalar>>, i: usize| -> Vec<Scalar> {
        let n = series.len();
        let (a, b, h) = if i == 0 {
            (0, 1, trace.t[1] - trace.t[0])
        } else if i + 1 >= n {
            (n - 2, n - 1, trace.t[n - 1] - trace.t[n - 2])
        } else {
            (i - 1, i + 1, trace.t[i + 1] - trace.t[i - 1])
        };
        series[a]
            .iter()
            .zip(&series[b])
            .map(|(&x, &y)| (y - x) / h)
            .collect()
    };

    // V3: double integrals reduced to linear-weighted single integrals:
    // r * int_{t-r}^t (s - t + r) xdot' R xdot ds.
    let mut v3 = 0.0;
    for (r_bound, rw) in [(d.zeta2, &weights.r1), (d.d2, &weights.r2), (d.tau2, &weights.r3)] {
        v3 += r_bound
            * integrate(r_bound, &|i| {
                let wgt = trace.t[i] - (t - r_bound);
                wgt.max(0.0) * quad(rw, &diff(&trace.x1, i))
            });
    }

    // V4: state term plus descriptor-derivative term.
    let e_x2: Vec<Vec<Scalar>> = trace
        .x2
        .iter()
        .map(|x| model.secondary.e.matvec(x).expect("dims"))
        .collect();
    let v4 = integrate(d.theta_bar, &|i| {
        let wgt = (trace.t[i] - (t - d.theta_bar)).max(0.0);
        wgt * quad(&weights.z1, &trace.x2[i])
    }) + d.theta_bar
        * integrate(d.theta_bar, &|i| {
            let wgt = (trace.t[i] - (t - d.theta_bar)).max(0.0);
            wgt * quad(&weights.z2, &diff(&e_x2, i))
        });

    Ok(v1 + v2 + v3 + v4)
}

/// Vector-valued polynomial with per-component coefficient lists
/// (`coeffs[k][j]` multiplies `t^j` in component `k`).
#[derive(Debug, Clone)]
pub struct VecPoly {
    pub coeffs: Vec<Vec<Scalar>>,
}

impl VecPoly {
    pub fn dim(&self) -> usize {
        self.coeffs.len()
    }

    pub fn eval(&self, t: Scalar) -> Vec<Scalar> {
        self.coeffs
            .iter()
            .map(|c| c.iter().rev().fold(0.0, |acc, &ck| acc * t + ck))
            .collect()
    }

    pub fn derivative(&self) -> VecPoly {
        VecPoly {
            coeffs: self
                .coeffs
                .iter()
                .map(|c| {
                    c.iter()
                        .enumerate()
                        .skip(1)
                        .map(|(j, &ck)| ck * j as Scalar)
                        .collect()
                })
                .collect(),
        }
    }
}

/// Inputs for one inequality-gap oracle.
#[derive(Debug, Clone)]
pub enum LemmaCase {
    /// Block-negativity verdict agreement: returns 1 if the bordered block
    /// matrix verdict matches the complement verdict, -1 otherwise.
    Schur { o1: Mat, o2: Mat, o3: Mat },
    /// `eps^-1 M M' + eps N' N - M F N - (M F N)'  >= 0` for `||F|| <= 1`.
    NormBound { m: Mat, n: Mat, f: Mat, eps: Scalar },
    /// Two-projection integral bound for derivatives on `[a, b]`.
    WirtingerSplit { r: Mat, a: Scalar, b: Scalar, x: VecPoly },
    /// Reciprocal-convexity coupling at ratio `theta`.
    RecipConvex { r: Mat, m: Mat, theta: Scalar },
    /// Integral Cauchy-Schwarz bound.
    Jensen { w1: Mat, a: Scalar, b: Scalar, x: VecPoly },
    /// pi^2-weighted projection bound for derivatives on `[a, b]`.
    WirtingerPi { r: Mat, a: Scalar, b: Scalar, omega: VecPoly },
}

/// Number of Simpson points used by the integral oracles.
pub const LEMMA_QUAD_POINTS: usize = 201;

/// Evaluates `LHS - RHS` in the orientation that must be nonnegative
/// (or the verdict-agreement flag for the block-complement case).
pub fn lemma_gap(case: &LemmaCase) -> Result<Scalar> {
    match case {
        LemmaCase::Schur { o1, o2, o3 } => {
            if !o1.is_square() || !o2.is_square() || o3.rows() != o2.rows() || o3.cols() != o1.rows()
            {
                return Err(Error::Dimension("block verdict shapes".into()));
            }
            // Complement route: O1 + O3' O2^-1 O3 < 0.
            let o2_inv = inverse(o2)?;
            let comp = o1.add(&o3.transpose().matmul(&o2_inv)?.matmul(o3)?)?;
            let comp_neg = max_of(&comp)? < 0.0;
            // Bordered route: [[O1, O3'], [O3, -O2]] < 0.
            let layout = BlockLayout::new(&[("a", o1.rows()), ("b", o2.rows())])?;
            let mut b = SymBlockBuilder::new(&layout);
            b.add(0, 0, o1)?;
            b.add(0, 1, &o3.transpose())?;
            b.add(1, 1, &o2.scale(-1.0))?;
            let block_neg = max_of(&b.finish())? < 0.0;
            Ok(if comp_neg == block_neg { 1.0 } else { -1.0 })
        }
        LemmaCase::NormBound { m, n, f, eps } => {
            if *eps <= 0.0 {
                return Err(Error::Range("norm-bound scalar must be positive".into()));
            }
            let mmt = m.matmul(&m.transpose())?.scale(1.0 / eps);
            let ntn = n.transpose().matmul(n)?.scale(*eps);
            let mfn = m.matmul(f)?.matmul(n)?;
            let total = mmt.add(&ntn)?.sub(&mfn)?.sub(&mfn.transpose())?;
            min_eig_sym(&total.symmetrized())
        }
        LemmaCase::WirtingerSplit { r, a, b, x } => {
            check_interval(*a, *b)?;
            let xd = x.derivative();
            let lhs = simpson(*a, *b, &|t| {
                let v = xd.eval(t);
                quad_of(r, &v)
            });
            let xa = x.eval(*a);
            let xb = x.eval(*b);
            let avg = simpson_vec(*a, *b, &|t| x.eval(t)).scale_vec(1.0 / (b - a));
            let pi1: Vec<Scalar> = xb.iter().zip(&xa).map(|(&p, &q)| p - q).collect();
            let pi2: Vec<Scalar> = xb
                .iter()
                .zip(&xa)
                .zip(&avg.0)
                .map(|((&p, &q), &m)| p + q - 2.0 * m)
                .collect();
            let rhs = (quad_of(r, &pi1) + 3.0 * quad_of(r, &pi2)) / (b - a);
            Ok(lhs - rhs)
        }
        LemmaCase::RecipConvex { r, m, theta } => {
            if !(0.0 < *theta && *theta < 1.0) {
                return Err(Error::Range("ratio must lie in (0,1)".into()));
            }
            let n = r.rows();
            let layout = BlockLayout::new(&[("a", n), ("b", n)])?;
            let mut pre = SymBlockBuilder::new(&layout);
            pre.add(0, 0, r)?;
            pre.add(0, 1, &m.transpose())?;
            pre.add(1, 1, r)?;
            let coupled = pre.finish();
            if min_eig_sym(&coupled)? < -1e-9 {
                return Err(Error::Range(
                    "coupling precondition violated: bordered matrix not PSD".into(),
                ));
            }
            let mut lhs = SymBlockBuilder::new(&layout);
            lhs.add(0, 0, &r.scale(1.0 / theta))?;
            lhs.add(1, 1, &r.scale(1.0 / (1.0 - theta)))?;
            min_eig_sym(&lhs.finish().sub(&coupled)?)
        }
        LemmaCase::Jensen { w1, a, b, x } => {
            check_interval(*a, *b)?;
            let lhs = (b - a) * simpson(*a, *b, &|t| quad_of(w1, &x.eval(t)));
            let ix = simpson_vec(*a, *b, &|t| x.eval(t));
            let rhs = quad_of(w1, &ix.0);
            Ok(lhs - rhs)
        }
        LemmaCase::WirtingerPi { r, a, b, omega } => {
            check_interval(*a, *b)?;
            let od = omega.derivative();
            let lhs = simpson(*a, *b, &|t| quad_of(r, &od.eval(t)));
            let wa = omega.eval(*a);
            let wb = omega.eval(*b);
            let avg = simpson_vec(*a, *b, &|t| omega.eval(t)).scale_vec(1.0 / (b - a));
            // W1 s = w(b) - w(a); W2 s = w(b)/2 + w(a)/2 - avg.
            let w1s: Vec<Scalar> = wb.iter().zip(&wa).map(|(&p, &q)| p - q).collect();
            let w2s: Vec<Scalar> = wb
                .iter()
                .zip(&wa)
                .zip(&avg.0)
                .map(|((&p, &q), &m)| 0.5 * p + 0.5 * q - m)
                .collect();
            let pi2 = std::f64::consts::PI * std::f64::consts::PI;
            let rhs = (quad_of(r, &w1s) + pi2 * quad_of(r, &w2s)) / (b - a);
            Ok(lhs - rhs)
        }
    }
}

fn check_interval(a: Scalar, b: Scalar) -> Result<()> {
    if !(b > a) {
        return Err(Error::Range(format!("interval [{a}, {b}] is empty")));
    }
    Ok(())
}

fn max_of(m: &Mat) -> Result<Scalar> {
    crate::numerics::max_eig_sym(&m.symmetrized())
}

fn quad_of(m: &Mat, v: &[Scalar]) -> Scalar {
    let mv = m.matvec(v).expect("dims");
    dot(v, &mv)
}

/// Composite Simpson on `LEMMA_QUAD_POINTS` points.
fn simpson(a: Scalar, b: Scalar, f: &dyn Fn(Scalar) -> Scalar) -> Scalar {
    let n = LEMMA_QUAD_POINTS - 1; // even interval count
    let h = (b - a) / n as Scalar;
    let mut acc = f(a) + f(b);
    for k in 1..n {
        let t = a + h * k as Scalar;
        acc += f(t) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    acc * h / 3.0
}

struct VecInt(Vec<Scalar>);

impl VecInt {
    fn scale_vec(mut self, s: Scalar) -> VecInt {
        for v in &mut self.0 {
            *v *= s;
        }
        self
    }
}

fn simpson_vec(a: Scalar, b: Scalar, f: &dyn Fn(Scalar) -> Vec<Scalar>) -> VecInt {
    let n = LEMMA_QUAD_POINTS - 1;
    let h = (b - a) / n as Scalar;
    let mut acc = f(a);
    for (vi, v) in acc.iter_mut().zip(f(b)) {
        *vi += v;
    }
    for k in 1..n {
        let t = a + h * k as Scalar;
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        for (vi, v) in acc.iter_mut().zip(f(t)) {
            *vi += w * v;
        }
    }
    for v in &mut acc {
        *v *= h / 3.0;
    }
    VecInt(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cases;
    use crate::model::DissipativityTriple;

    /// Trace with constant output/disturbance on a uniform grid.
    fn constant_trace(y: f64, w: f64, x1: [f64; 2], x2: [f64; 2], horizon: f64, dt: f64) -> SimTrace {
        let n = (horizon / dt).round() as usize;
        let mut tr = SimTrace::default();
        for i in 0..=n {
            tr.t.push(i as f64 * dt);
            tr.x1.push(x1.to_vec());
            tr.x2.push(x2.to_vec());
            tr.xhat.push(x1.to_vec());
            tr.u1g.push(vec![0.0]);
            tr.u2.push(vec![0.0]);
            tr.sat_u2.push(vec![0.0]);
            tr.psi_u2.push(vec![0.0]);
            tr.y1.push(vec![y]);
            tr.w.push(vec![w]);
            tr.alpha.push(false);
            tr.beta.push(false);
            tr.released_row.push(false);
            tr.eq5_violation.push(false);
            tr.algebraic_residual.push(0.0);
        }
        tr
    }

    fn case_triple() -> DissipativityTriple {
        cases::case1().model.dissipativity
    }

    #[test]
    fn scalar_supply_rate_value() {
        // y = 0, w = 1 over one second: J(1) = R - gamma = 1.5 - 0.1.
        let tr = constant_trace(0.0, 1.0, [0.0; 2], [0.0; 2], 1.0, 1e-3);
        let rep = dissipativity_index(&tr, &case_triple()).unwrap();
        assert!((rep.terminal - 1.4).abs() < 1e-12);
        assert_eq!(rep.j[0], 0.0);
        assert!(!rep.nonzero_initial_state);
    }

    #[test]
    fn zero_supply_gives_zero_index() {
        let tr = constant_trace(0.0, 0.0, [0.0; 2], [0.0; 2], 1.0, 1e-2);
        let rep = dissipativity_index(&tr, &case_triple()).unwrap();
        assert!(rep.j.iter().all(|&v| v == 0.0));
        assert!(rep.violation_times.is_empty());
    }

    #[test]
    fn negative_supply_flags_violations() {
        // y nonzero with Q < 0 and no disturbance: J decreases below zero.
        let tr = constant_trace(1.0, 0.0, [0.0; 2], [0.0; 2], 1.0, 1e-2);
        let rep = dissipativity_index(&tr, &case_triple()).unwrap();
        assert!(rep.terminal < 0.0);
        assert!(!rep.violation_times.is_empty());
    }

    #[test]
    fn index_is_additive_over_time_concatenation() {
        let case = cases::case1();
        let tr = constant_trace(0.3, 0.7, [0.0; 2], [0.0; 2], 2.0, 1e-2);
        let rep = dissipativity_index(&tr, &case.model.dissipativity).unwrap();
        // Truncate at half and compare the running value.
        let mut half = constant_trace(0.3, 0.7, [0.0; 2], [0.0; 2], 1.0, 1e-2);
        let rep_half = dissipativity_index(&half, &case.model.dissipativity).unwrap();
        let k = half.t.len() - 1;
        assert!((rep.j[k] - rep_half.terminal).abs() < 1e-12);
        half.t.clear();
        assert!(dissipativity_index(&half, &case.model.dissipativity).is_err());
    }

    #[test]
    fn nonzero_initial_state_is_flagged() {
        let tr = constant_trace(0.0, 0.0, [1.0, 0.0], [0.0; 2], 1.0, 1e-2);
        let rep = dissipativity_index(&tr, &case_triple()).unwrap();
        assert!(rep.nonzero_initial_state);
    }

    #[test]
    fn lkf_zero_trace_is_zero() {
        let model = cases::case1().model;
        let tr = constant_trace(0.0, 0.0, [0.0; 2], [0.0; 2], 3.0, 1e-3);
        let w = LkfWeights::identity(2, 2);
        let v = lkf_value(&tr, &w, &model, 2.0).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn lkf_constant_trace_closed_form() {
        let model = cases::case1().model; // delays all 0.5, E = diag(1,0)
        let x1 = [1.0, -2.0];
        let x2 = [3.0, 0.5];
        let tr = constant_trace(0.0, 0.0, x1, x2, 3.0, 1e-3);
        let w = LkfWeights::identity(2, 2);
        let v = lkf_value(&tr, &w, &model, 2.0).unwrap();
        let n1sq: f64 = x1.iter().map(|v| v * v).sum();
        let n2sq: f64 = x2.iter().map(|v| v * v).sum();
        // V1 = |x1|^2 + x2' E x2; V2 = (3 * 0.5) |x1|^2 + 2 * 0.5 |x2|^2;
        // V3 = 0; V4 = theta^2/2 |x2|^2 (Z2 derivative term vanishes).
        let expect = n1sq + x2[0] * x2[0] + 1.5 * n1sq + 1.0 * n2sq + 0.125 * n2sq;
        assert!((v - expect).abs() < 1e-6 * expect, "v={v}, expect={expect}");
    }

    #[test]
    fn lkf_time_shift_invariant_on_stationary_trace() {
        let model = cases::case1().model;
        let tr = constant_trace(0.0, 0.0, [0.4, 0.2], [1.0, -1.0], 4.0, 1e-3);
        let w = LkfWeights::identity(2, 2);
        let a = lkf_value(&tr, &w, &model, 1.0).unwrap();
        let b = lkf_value(&tr, &w, &model, 3.0).unwrap();
        assert!((a - b).abs() < 1e-10 * (1.0 + a.abs()));
    }

    #[test]
    fn lkf_out_of_range_errors() {
        let model = cases::case1().model;
        let tr = constant_trace(0.0, 0.0, [0.0; 2], [0.0; 2], 2.0, 1e-2);
        let w = LkfWeights::identity(2, 2);
        assert!(lkf_value(&tr, &w, &model, 0.1).is_err()); // before max delay
        assert!(lkf_value(&tr, &w, &model, 5.0).is_err()); // past the trace
    }

    #[test]
    fn jensen_equality_for_constant_function() {
        let x = VecPoly { coeffs: vec![vec![2.5], vec![-1.0]] };
        let gap = lemma_gap(&LemmaCase::Jensen {
            w1: Mat::identity(2),
            a: 0.0,
            b: 1.0,
            x,
        })
        .unwrap();
        assert!(gap.abs() < 1e-10, "gap {gap}");
    }

    #[test]
    fn wirtinger_equality_for_affine_functions() {
        let x = VecPoly { coeffs: vec![vec![1.0, 2.0], vec![0.5, -3.0]] };
        let r = Mat::from_rows(&[&[2.0, 0.3], &[0.3, 1.0]]).unwrap();
        let g1 = lemma_gap(&LemmaCase::WirtingerSplit { r: r.clone(), a: -1.0, b: 2.0, x: x.clone() }).unwrap();
        assert!(g1.abs() < 1e-10, "split gap {g1}");
        let g2 = lemma_gap(&LemmaCase::WirtingerPi { r, a: -1.0, b: 2.0, omega: x }).unwrap();
        assert!(g2.abs() < 1e-10, "pi gap {g2}");
    }

    #[test]
    fn schur_verdicts_agree() {
        let o1 = Mat::from_rows(&[&[-2.0, 0.3], &[0.3, -1.5]]).unwrap();
        let o2 = Mat::from_rows(&[&[1.0, 0.2], &[0.2, 2.0]]).unwrap();
        let o3 = Mat::from_rows(&[&[0.5, -0.1], &[0.0, 0.4]]).unwrap();
        assert_eq!(lemma_gap(&LemmaCase::Schur { o1, o2, o3 }).unwrap(), 1.0);
    }

    #[test]
    fn norm_bound_gap_nonnegative() {
        let m = Mat::from_rows(&[&[1.0, -0.5], &[0.2, 0.7]]).unwrap();
        let n = Mat::from_rows(&[&[0.3, 0.9], &[-0.4, 0.1]]).unwrap();
        let f = Mat::from_rows(&[&[0.6, 0.0], &[0.0, -0.8]]).unwrap(); // ||F|| <= 1
        let gap = lemma_gap(&LemmaCase::NormBound { m, n, f, eps: 1.0 }).unwrap();
        assert!(gap >= -1e-12, "gap {gap}");
    }

    #[test]
    fn recip_convex_checks_precondition() {
        let r = Mat::identity(2);
        let ok = lemma_gap(&LemmaCase::RecipConvex {
            r: r.clone(),
            m: Mat::identity(2).scale(0.5),
            theta: 0.3,
        })
        .unwrap();
        assert!(ok >= -1e-12);
        // |M| too large: bordered matrix not PSD.
        assert!(lemma_gap(&LemmaCase::RecipConvex {
            r,
            m: Mat::identity(2).scale(2.0),
            theta: 0.3,
        })
        .is_err());
    }
}
