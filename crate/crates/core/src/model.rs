//! Domain model of the full cascade system: two plants coupled through a
//! network with mixed triggering, bounded deception attacks, actuator
//! saturation, and interval-bounded actuator faults.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{dae_coordinates, max_eig_sym, sym_sqrt, Lu};
use crate::{Mat, Scalar};

/// Outer-loop plant: `x1' = A1 x1 + B1 y2`, `y1 = C1 x1 + D1 w`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrimaryPlant {
    pub a1: Mat,
    pub b1: Mat,
    pub c1: Mat,
    pub d1: Mat,
}

/// Inner-loop descriptor plant:
/// `E x2' = A2 x2 + A3 x2(t - theta(t)) + B2 sat(u2) + B3 w`,
/// `y2 = C2 x2 + D2 w`, with `E` possibly singular.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SecondaryPlant {
    pub e: Mat,
    pub a2: Mat,
    pub a3: Mat,
    pub b2: Mat,
    pub b3: Mat,
    pub c2: Mat,
    pub d2: Mat,
    /// Per-channel actuator saturation limits.
    pub xi: Vec<Scalar>,
    /// Dead-zone slope bound on the declared operating region, in (0,1).
    pub epsilon: Scalar,
}

/// Upper bounds for the four time-varying delays plus the rate bound on the
/// state delay of the secondary plant.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DelayBounds {
    /// Network-induced delay bound (time-triggered path).
    pub zeta2: Scalar,
    /// Held-sample delay bound (event-triggered path).
    pub d2: Scalar,
    /// Attack-signal delay bound.
    pub tau2: Scalar,
    /// State delay bound of the secondary plant.
    pub theta_bar: Scalar,
    /// Rate bound on the state delay, `theta'(t) <= lambda < 1`.
    pub lambda: Scalar,
}

/// Sampling and mixed-trigger parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TriggerConfig {
    /// Sampling period (seconds).
    pub h: Scalar,
    /// Event-trigger threshold, in `[0, 1)`.
    pub mu: Scalar,
    /// Probability that a sample takes the time-triggered path.
    pub alpha_bar: Scalar,
}

/// Randomly occurring deception attack: with probability `beta_bar` the
/// delivered measurement is replaced by a bounded nonlinear function of a
/// delayed state, `|f(x)| <= |F x|` componentwise in the quadratic sense.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackConfig {
    pub beta_bar: Scalar,
    /// Attack energy bound matrix.
    pub f: Mat,
}

/// Interval-bounded diagonal actuator fault: each channel gain lies in
/// `[g_lower_k, g_upper_k] ⊆ [0, 1]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FaultModel {
    pub g_lower: Vec<Scalar>,
    pub g_upper: Vec<Scalar>,
    /// Realized fault gains, when operating in known-fault mode.
    #[serde(default)]
    pub g_known: Option<Vec<Scalar>>,
}

impl FaultModel {
    /// Interval midpoint gains as a diagonal matrix.
    pub fn g0(&self) -> Mat {
        let mid: Vec<Scalar> = self
            .g_lower
            .iter()
            .zip(&self.g_upper)
            .map(|(&lo, &hi)| 0.5 * (hi + lo))
            .collect();
        Mat::diag(&mid)
    }

    /// Interval radius gains as a diagonal matrix.
    pub fn g1(&self) -> Mat {
        let rad: Vec<Scalar> = self
            .g_lower
            .iter()
            .zip(&self.g_upper)
            .map(|(&lo, &hi)| 0.5 * (hi - lo))
            .collect();
        Mat::diag(&rad)
    }

    /// Realized fault matrix: the declared known gains, or the midpoint.
    pub fn realized(&self) -> Mat {
        match &self.g_known {
            Some(g) => Mat::diag(g),
            None => self.g0(),
        }
    }
}

/// Supply-rate triple `(Q, S, R)` with margin `gamma`: `Q` symmetric
/// negative semidefinite, `R` symmetric, `gamma > 0`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DissipativityTriple {
    pub q: Mat,
    pub s: Mat,
    pub r: Mat,
    pub gamma: Scalar,
}

impl DissipativityTriple {
    /// `sqrt(-Q)`, the PSD square root used by the supply-rate border rows.
    pub fn q_bar(&self) -> Result<Mat> {
        sym_sqrt(&self.q.scale(-1.0), 1e-9)
    }
}

/// The full cascade model.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CascadeModel {
    pub primary: PrimaryPlant,
    pub secondary: SecondaryPlant,
    pub delays: DelayBounds,
    pub trigger: TriggerConfig,
    pub attack: AttackConfig,
    pub fault: FaultModel,
    pub dissipativity: DissipativityTriple,
}

impl CascadeModel {
    pub fn n1(&self) -> usize {
        self.primary.a1.rows()
    }

    pub fn n2(&self) -> usize {
        self.secondary.a2.rows()
    }

    /// Control input dimension.
    pub fn m(&self) -> usize {
        self.secondary.b2.cols()
    }

    /// Disturbance dimension.
    pub fn q_w(&self) -> usize {
        self.secondary.b3.cols()
    }

    /// Primary output dimension.
    pub fn q_y(&self) -> usize {
        self.primary.c1.rows()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// One violated invariant: the offending field and what went wrong.
#[derive(Debug, Clone, Serialize)]
pub struct Violation {
    pub field: String,
    pub message: String,
}

/// Outcome of [`validate`]; empty violation list means pass.
#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_pass(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn into_result(self) -> Result<()> {
        if self.is_pass() {
            Ok(())
        } else {
            let msg = self
                .violations
                .iter()
                .map(|v| format!("{}: {}", v.field, v.message))
                .collect::<Vec<_>>()
                .join("; ");
            Err(Error::Validation(msg))
        }
    }
}

/// Check every structural invariant of the model. Never mutates; reports all
/// violations rather than stopping at the first.
pub fn validate(model: &CascadeModel) -> ValidationReport {
    let mut v: Vec<Violation> = Vec::new();
    let mut push = |field: &str, message: String| {
        v.push(Violation {
            field: field.into(),
            message,
        })
    };

    let n1 = model.n1();
    let n2 = model.n2();
    let m = model.m();
    let qw = model.q_w();
    let qy = model.q_y();
    let p2 = model.secondary.c2.rows();

    let dims: [(&str, &Mat, usize, usize); 12] = [
        ("primary.a1", &model.primary.a1, n1, n1),
        ("primary.b1", &model.primary.b1, n1, p2),
        ("primary.c1", &model.primary.c1, qy, n1),
        ("primary.d1", &model.primary.d1, qy, qw),
        ("secondary.e", &model.secondary.e, n2, n2),
        ("secondary.a2", &model.secondary.a2, n2, n2),
        ("secondary.a3", &model.secondary.a3, n2, n2),
        ("secondary.b2", &model.secondary.b2, n2, m),
        ("secondary.b3", &model.secondary.b3, n2, qw),
        ("secondary.c2", &model.secondary.c2, p2, n2),
        ("secondary.d2", &model.secondary.d2, p2, qw),
        ("attack.f", &model.attack.f, n1, n1),
    ];
    for (name, mat, r, c) in dims {
        if mat.rows() != r || mat.cols() != c {
            push(
                name,
                format!("expected {}x{}, got {}x{}", r, c, mat.rows(), mat.cols()),
            );
        }
        if !mat.all_finite() {
            push(name, "non-finite entries".into());
        }
    }

    let d = &model.delays;
    for (name, val) in [
        ("delays.zeta2", d.zeta2),
        ("delays.d2", d.d2),
        ("delays.tau2", d.tau2),
        ("delays.theta_bar", d.theta_bar),
    ] {
        if !(val >= 0.0 && val.is_finite()) {
            push(name, format!("delay bound must be >= 0, got {val}"));
        }
    }
    if !(d.lambda >= 0.0 && d.lambda < 1.0) {
        push("delays.lambda", format!("rate bound must lie in [0,1), got {}", d.lambda));
    }
    if !(model.trigger.h > 0.0 && model.trigger.h.is_finite()) {
        push("trigger.h", format!("sampling period must be > 0, got {}", model.trigger.h));
    }
    if !(0.0..1.0).contains(&model.trigger.mu) {
        push("trigger.mu", format!("threshold must lie in [0,1), got {}", model.trigger.mu));
    }
    if !(0.0..=1.0).contains(&model.trigger.alpha_bar) {
        push("trigger.alpha_bar", format!("probability must lie in [0,1], got {}", model.trigger.alpha_bar));
    }
    if !(0.0..=1.0).contains(&model.attack.beta_bar) {
        push("attack.beta_bar", format!("probability must lie in [0,1], got {}", model.attack.beta_bar));
    }
    if !(model.secondary.epsilon > 0.0 && model.secondary.epsilon < 1.0) {
        push("secondary.epsilon", format!("slope bound must lie in (0,1), got {}", model.secondary.epsilon));
    }
    if model.secondary.xi.len() != m {
        push("secondary.xi", format!("expected {} limits, got {}", m, model.secondary.xi.len()));
    }
    for (k, &xi) in model.secondary.xi.iter().enumerate() {
        if !(xi > 0.0 && xi.is_finite()) {
            push("secondary.xi", format!("limit {k} must be > 0, got {xi}"));
        }
    }

    let f = &model.fault;
    if f.g_lower.len() != m || f.g_upper.len() != m {
        push("fault", format!("fault interval must have {m} channels"));
    } else {
        for k in 0..m {
            let (lo, hi) = (f.g_lower[k], f.g_upper[k]);
            if !(0.0 <= lo && lo <= hi && hi <= 1.0) {
                push("fault", format!("channel {k}: need 0 <= lower <= upper <= 1, got [{lo}, {hi}]"));
            }
        }
        if let Some(g) = &f.g_known {
            if g.len() != m {
                push("fault.g_known", format!("expected {m} channels"));
            } else {
                for k in 0..m {
                    if !(f.g_lower[k] <= g[k] && g[k] <= f.g_upper[k]) {
                        push("fault.g_known", format!("channel {k}: {} outside [{}, {}]", g[k], f.g_lower[k], f.g_upper[k]));
                    }
                }
            }
        }
    }

    let t = &model.dissipativity;
    if t.q.rows() != qy || t.q.cols() != qy {
        push("dissipativity.q", format!("expected {qy}x{qy}"));
    } else if t.q.asymmetry() > 1e-12 * t.q.max_abs().max(1.0) {
        push("dissipativity.q", "must be symmetric".into());
    } else if max_eig_sym(&t.q).map(|l| l > 1e-9).unwrap_or(true) {
        push("dissipativity.q", "must be negative semidefinite".into());
    }
    if t.s.rows() != qy || t.s.cols() != qw {
        push("dissipativity.s", format!("expected {qy}x{qw}"));
    }
    if t.r.rows() != qw || t.r.cols() != qw {
        push("dissipativity.r", format!("expected {qw}x{qw}"));
    } else if t.r.asymmetry() > 1e-12 * t.r.max_abs().max(1.0) {
        push("dissipativity.r", "must be symmetric".into());
    }
    if !(t.gamma > 0.0) {
        push("dissipativity.gamma", format!("margin must be > 0, got {}", t.gamma));
    }

    ValidationReport { violations: v }
}

/// Mean and variance of a Bernoulli draw with success probability `p`.
/// The switch and attack variances used by the synthesis conditions are
/// produced by this from `alpha_bar` and `beta_bar`.
pub fn bernoulli_moments(p: Scalar) -> Result<(Scalar, Scalar)> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Range(format!("probability outside [0,1]: {p}")));
    }
    Ok((p, p * (1.0 - p)))
}

/// Regularity and impulse-freeness of the pencil `(E, A)`.
///
/// `det(sE - A)` is sampled at `n + 2` Chebyshev nodes and fitted with a
/// degree-`n` polynomial; the pencil is regular when the fit is not
/// identically zero and impulse-free when the fitted degree equals
/// `rank(E)`. Naive two-point degree tests misclassify, hence the fit.
pub fn is_regular_impulse_free(e: &Mat, a: &Mat) -> Result<(bool, bool)> {
    if !e.is_square() || !a.is_square() || e.rows() != a.rows() {
        return Err(Error::Dimension(format!(
            "pencil needs equal square matrices, got {}x{} and {}x{}",
            e.rows(),
            e.cols(),
            a.rows(),
            a.cols()
        )));
    }
    let n = e.rows();
    let pts = n + 2;
    let nodes: Vec<Scalar> = (0..pts)
        .map(|k| (std::f64::consts::PI * (2.0 * k as Scalar + 1.0) / (2.0 * pts as Scalar)).cos())
        .collect();
    let dets: Vec<Scalar> = nodes
        .iter()
        .map(|&s| {
            let m = e.scale(s).sub(a).expect("same shape");
            Lu::factor(&m).map(|lu| lu.det())
        })
        .collect::<Result<_>>()?;

    // Least-squares fit of degree <= n through the n+2 samples.
    let coeffs = polyfit(&nodes, &dets, n)?;

    // Degree-n homogeneity of det(sE - A) in (E, A) keeps this reference
    // scale-invariant under (E, A) -> (cE, cA).
    let scale_ref = (a.fro_norm() + e.fro_norm()).powi(n as i32);
    let max_c = coeffs.iter().fold(0.0, |acc: Scalar, &c| acc.max(c.abs()));
    let regular = max_c > 1e-12 * scale_ref && max_c > 0.0;
    if !regular {
        return Ok((false, false));
    }
    let degree = coeffs
        .iter()
        .enumerate()
        .filter(|(_, &c)| c.abs() > 1e-9 * max_c)
        .map(|(k, _)| k)
        .max()
        .unwrap_or(0);
    let rank = dae_coordinates(e)?.rank;
    Ok((true, degree == rank))
}

/// Least-squares polynomial fit: returns coefficients `c[0] + c[1] s + ...`.
fn polyfit(xs: &[Scalar], ys: &[Scalar], degree: usize) -> Result<Vec<Scalar>> {
    let cols = degree + 1;
    let rows = xs.len();
    let vander = Mat::from_fn(rows, cols, |i, j| xs[i].powi(j as i32));
    let vt = vander.transpose();
    let normal = vt.matmul(&vander)?;
    let rhs = vt.matvec(ys)?;
    crate::numerics::solve(&normal, &rhs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cases;

    #[test]
    fn bernoulli_degenerate_and_quarter() {
        assert_eq!(bernoulli_moments(0.0).unwrap(), (0.0, 0.0));
        assert_eq!(bernoulli_moments(1.0).unwrap(), (1.0, 0.0));
        let (m, var) = bernoulli_moments(0.25).unwrap();
        assert_eq!(m, 0.25);
        assert_eq!(var, 0.1875);
        assert!(matches!(bernoulli_moments(1.5), Err(Error::Range(_))));
    }

    #[test]
    fn bernoulli_variance_peaks_at_half() {
        let mut best = (0.0, 0.0);
        for k in 0..=100 {
            let p = k as f64 / 100.0;
            let (_, var) = bernoulli_moments(p).unwrap();
            if var > best.1 {
                best = (p, var);
            }
        }
        assert_eq!(best.0, 0.5);
    }

    #[test]
    fn case_model_validates() {
        let model = cases::case1().model;
        assert!(validate(&model).is_pass());
    }

    #[test]
    fn wrong_b2_rows_named() {
        let mut model = cases::case1().model;
        model.secondary.b2 = Mat::from_rows(&[&[0.2], &[1.0], &[0.0]]).unwrap();
        let report = validate(&model);
        assert!(!report.is_pass());
        assert!(report.violations.iter().any(|v| v.field == "secondary.b2"));
    }

    #[test]
    fn out_of_range_mu_named() {
        let mut model = cases::case1().model;
        model.trigger.mu = 1.2;
        let report = validate(&model);
        assert!(report.violations.iter().any(|v| v.field == "trigger.mu"));
    }

    #[test]
    fn open_loop_pencil_regular_not_impulse_free() {
        let e = Mat::diag(&[1.0, 0.0]);
        let a2 = Mat::from_rows(&[&[1.3, 1.0], &[0.2, 0.0]]).unwrap();
        let (reg, imp) = is_regular_impulse_free(&e, &a2).unwrap();
        assert!(reg);
        assert!(!imp);
    }

    #[test]
    fn nonsingular_e_always_impulse_free() {
        let e = Mat::identity(3);
        let a = Mat::from_rows(&[&[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0], &[-1.0, -2.0, -3.0]]).unwrap();
        let (reg, imp) = is_regular_impulse_free(&e, &a).unwrap();
        assert!(reg && imp);
    }

    #[test]
    fn closed_loop_with_reference_gain_is_impulse_free() {
        // K2 stabilizing the case-study plant restores impulse-freeness:
        // det becomes degree 1 = rank(E).
        let e = Mat::diag(&[1.0, 0.0]);
        let a2 = Mat::from_rows(&[&[1.3, 1.0], &[0.2, 0.0]]).unwrap();
        let b2 = Mat::from_rows(&[&[0.2], &[1.0]]).unwrap();
        let k2 = Mat::row_vec(&[-3.8497, -2.4732]);
        let a_cl = a2.add(&b2.matmul(&k2).unwrap()).unwrap();
        let (reg, imp) = is_regular_impulse_free(&e, &a_cl).unwrap();
        assert!(reg && imp);

        // Independent symbolic 2x2 determinant oracle:
        // det(sE - A) = det(E) s^2 - (E11 A22 + A11 E22 - E12 A21 - A12 E21) s + det(A).
        let c2 = e[(0, 0)] * e[(1, 1)] - e[(0, 1)] * e[(1, 0)];
        let c1 = -(e[(0, 0)] * a_cl[(1, 1)] + a_cl[(0, 0)] * e[(1, 1)])
            + (e[(0, 1)] * a_cl[(1, 0)] + a_cl[(0, 1)] * e[(1, 0)]);
        let c0 = a_cl[(0, 0)] * a_cl[(1, 1)] - a_cl[(0, 1)] * a_cl[(1, 0)];
        assert!(c2.abs() < 1e-15);
        assert!((c1 - 2.4732).abs() < 1e-12);
        assert!((c0 - 0.533468).abs() < 1e-9);
    }

    #[test]
    fn scale_invariance_of_pencil_test() {
        let e = Mat::diag(&[1.0, 0.0]);
        let a2 = Mat::from_rows(&[&[1.3, 1.0], &[0.2, 0.0]]).unwrap();
        for c in [1e-6, 0.5, 3.0, 1e6] {
            let (reg, imp) = is_regular_impulse_free(&e.scale(c), &a2.scale(c)).unwrap();
            assert_eq!((reg, imp), (true, false), "scale {c}");
        }
    }

    #[test]
    fn identically_zero_pencil_is_irregular() {
        let e = Mat::from_rows(&[&[1.0, 0.0], &[0.0, 0.0]]).unwrap();
        let a = Mat::from_rows(&[&[1.0, 0.0], &[0.0, 0.0]]).unwrap();
        let (reg, _) = is_regular_impulse_free(&e, &a).unwrap();
        assert!(!reg);
    }

    #[test]
    fn model_json_round_trip_rejects_unknown_keys() {
        let model = cases::case1().model;
        let text = model.to_json().unwrap();
        let back = CascadeModel::from_json(&text).unwrap();
        assert_eq!(back.primary.a1, model.primary.a1);
        assert_eq!(back.trigger.mu, model.trigger.mu);

        let mut val: serde_json::Value = serde_json::from_str(&text).unwrap();
        val["unexpected"] = serde_json::json!(1);
        assert!(CascadeModel::from_json(&val.to_string()).is_err());
    }
}
