//! Pure sample-path logic: saturation, dead-zone, the event-trigger release
//! test, and the attacked/mixed-trigger controller input. Stateless and
//! thread-safe; the simulator owns all buffering.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::{dot, Cholesky};
use crate::{Mat, Scalar};

/// Outcome of one event-trigger test.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TriggerDecision {
    pub released: bool,
    pub error_norm_sq: Scalar,
    pub threshold: Scalar,
}

/// Which path produced the controller input at a sampling instant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum InputSource {
    TimePath,
    EventPath,
    AttackPath,
}

/// Controller input at one sampling instant, with the Bernoulli draws that
/// routed it.
#[derive(Debug, Clone, Serialize)]
pub struct ControllerInputSample {
    pub value: Vec<Scalar>,
    pub source: InputSource,
    pub alpha: bool,
    pub beta: bool,
}

/// Exact floating-point split of one channel into `(sat, psi)` with
/// `sat + psi == u` bit-exactly, `|sat| <= lim`, and `psi == 0` inside the
/// linear region. The clamp value may be nudged by a few ulps toward zero:
/// the exact identity is not always representable against the exact clamp.
fn exact_split(u: Scalar, lim: Scalar) -> (Scalar, Scalar) {
    if u.abs() <= lim {
        return (u, 0.0);
    }
    let clamp = u.clamp(-lim, lim);
    let mut s = clamp;
    for _ in 0..8 {
        let mut p = u - s;
        for _ in 0..8 {
            let r = s + p;
            if r == u {
                return (s, p);
            }
            // r is within an ulp of u, so u - r is exact.
            let d = u - r;
            let p_next = p + d;
            if p_next == p {
                break;
            }
            p = p_next;
        }
        s = nudge_toward_zero(s);
    }
    (clamp, u - clamp)
}

fn nudge_toward_zero(v: Scalar) -> Scalar {
    if v > 0.0 {
        Scalar::from_bits(v.to_bits() - 1)
    } else if v < 0.0 {
        -Scalar::from_bits((-v).to_bits() - 1)
    } else {
        v
    }
}

/// Componentwise clamp of `u` to `[-xi_i, xi_i]`.
pub fn saturate(u: &[Scalar], xi: &[Scalar]) -> Result<Vec<Scalar>> {
    check_dims(u, xi)?;
    Ok(u.iter()
        .zip(xi)
        .map(|(&ui, &lim)| exact_split(ui, lim).0)
        .collect())
}

/// Dead-zone nonlinearity `u - sat(u)`; identically zero inside the linear
/// region and exactly complementary to [`saturate`].
pub fn deadzone(u: &[Scalar], xi: &[Scalar]) -> Result<Vec<Scalar>> {
    check_dims(u, xi)?;
    Ok(u.iter()
        .zip(xi)
        .map(|(&ui, &lim)| exact_split(ui, lim).1)
        .collect())
}

/// Event-trigger release test: transmit when the weighted error energy of
/// the held packet exceeds `mu` times the weighted energy of the current
/// sample. Exact equality does not release.
pub fn event_release(
    e_k: &[Scalar],
    x_sampled: &[Scalar],
    w: &Mat,
    mu: Scalar,
) -> Result<TriggerDecision> {
    if !(0.0..1.0).contains(&mu) {
        return Err(Error::Range(format!("trigger threshold outside [0,1): {mu}")));
    }
    if w.rows() != e_k.len() || w.cols() != e_k.len() || x_sampled.len() != e_k.len() {
        return Err(Error::Dimension(format!(
            "trigger arity mismatch: |e|={}, |x|={}, W is {}x{}",
            e_k.len(),
            x_sampled.len(),
            w.rows(),
            w.cols()
        )));
    }
    if w.asymmetry() > 1e-9 * w.max_abs().max(1.0) || Cholesky::factor(w).is_none() {
        return Err(Error::Range("trigger weight must be symmetric positive definite".into()));
    }
    let error_norm_sq = quad_form(w, e_k);
    let threshold = mu * quad_form(w, x_sampled);
    Ok(TriggerDecision {
        released: error_norm_sq > threshold,
        error_norm_sq,
        threshold,
    })
}

/// The delivered primary-controller input for one sampling instant:
/// the attack signal when `beta` fires, otherwise the time-triggered sample
/// or the held event packet (`x_event_path + e_k`).
pub fn primary_input(
    alpha: bool,
    beta: bool,
    x_time_path: &[Scalar],
    x_event_path: &[Scalar],
    e_k: &[Scalar],
    f_delayed: &[Scalar],
) -> Result<ControllerInputSample> {
    let n = x_time_path.len();
    if [x_event_path.len(), e_k.len(), f_delayed.len()]
        .iter()
        .any(|&l| l != n)
    {
        return Err(Error::Dimension("controller input arity mismatch".into()));
    }
    let (value, source) = if beta {
        (f_delayed.to_vec(), InputSource::AttackPath)
    } else if alpha {
        (x_time_path.to_vec(), InputSource::TimePath)
    } else {
        (
            x_event_path.iter().zip(e_k).map(|(&x, &e)| x + e).collect(),
            InputSource::EventPath,
        )
    };
    Ok(ControllerInputSample {
        value,
        source,
        alpha,
        beta,
    })
}

fn quad_form(w: &Mat, v: &[Scalar]) -> Scalar {
    let wv = w.matvec(v).expect("checked dims");
    dot(v, &wv)
}

fn check_dims(u: &[Scalar], xi: &[Scalar]) -> Result<()> {
    if u.len() != xi.len() {
        return Err(Error::Dimension(format!(
            "input dim {} vs limit dim {}",
            u.len(),
            xi.len()
        )));
    }
    if xi.iter().any(|&l| !(l > 0.0)) {
        return Err(Error::Range("saturation limits must be positive".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn saturate_branches() {
        assert_eq!(saturate(&[7.0], &[5.0]).unwrap(), vec![5.0]);
        assert_eq!(saturate(&[-7.0], &[5.0]).unwrap(), vec![-5.0]);
        assert_eq!(saturate(&[3.0], &[5.0]).unwrap(), vec![3.0]);
    }

    #[test]
    fn deadzone_values() {
        assert_eq!(deadzone(&[7.0], &[5.0]).unwrap(), vec![2.0]);
        assert_eq!(deadzone(&[3.0], &[5.0]).unwrap(), vec![0.0]);
    }

    #[test]
    fn deadzone_slope_bound_on_operating_region() {
        // On the region |u_i| <= xi_i / (1 - sqrt(eps)) the dead-zone energy
        // satisfies psi' psi <= eps u' u. Sample the region boundary and
        // interior; report any counterexample.
        let eps: f64 = 0.2;
        let xi = [5.0, 2.0];
        let reach = 1.0 / (1.0 - eps.sqrt());
        let mut violations = 0;
        for k in 0..1000 {
            let a = (k as f64 / 1000.0) * 2.0 * std::f64::consts::PI;
            let scale = 0.999 * reach;
            let u = [xi[0] * scale * a.cos(), xi[1] * scale * a.sin()];
            let psi = deadzone(&u, &xi).unwrap();
            let lhs: f64 = psi.iter().map(|p| p * p).sum();
            let rhs: f64 = eps * u.iter().map(|x| x * x).sum::<f64>();
            if lhs > rhs {
                violations += 1;
            }
        }
        assert_eq!(violations, 0);
    }

    #[test]
    fn event_release_examples() {
        let w = Mat::identity(2);
        let d = event_release(&[0.3, 0.0], &[1.0, 0.0], &w, 0.16).unwrap();
        assert!(!d.released);
        assert!((d.error_norm_sq - 0.09).abs() < 1e-15);
        let d = event_release(&[0.5, 0.0], &[1.0, 0.0], &w, 0.16).unwrap();
        assert!(d.released);
        assert!((d.error_norm_sq - 0.25).abs() < 1e-15);
    }

    #[test]
    fn zero_error_never_releases() {
        let w = Mat::from_rows(&[&[2.0, 0.3], &[0.3, 1.0]]).unwrap();
        for x in [[0.0, 0.0], [1.0, -4.0], [100.0, 3.0]] {
            let d = event_release(&[0.0, 0.0], &x, &w, 0.0).unwrap();
            assert!(!d.released);
        }
    }

    #[test]
    fn non_pd_weight_rejected() {
        let w = Mat::diag(&[1.0, -1.0]);
        assert!(event_release(&[0.1, 0.0], &[1.0, 0.0], &w, 0.1).is_err());
    }

    #[test]
    fn input_routing() {
        let t = [1.0, 2.0];
        let e = [3.0, 4.0];
        let ek = [0.1, 0.0];
        let f = [9.0, 9.0];
        let s = primary_input(false, true, &t, &e, &ek, &f).unwrap();
        assert_eq!(s.source, InputSource::AttackPath);
        assert_eq!(s.value, f.to_vec());
        let s = primary_input(true, false, &t, &e, &ek, &f).unwrap();
        assert_eq!(s.source, InputSource::TimePath);
        assert_eq!(s.value, t.to_vec());
        let s = primary_input(false, false, &[0.0, 0.0], &[1.0, 2.0], &ek, &f).unwrap();
        assert_eq!(s.source, InputSource::EventPath);
        assert_eq!(s.value, vec![1.1, 2.0]);
    }

    proptest! {
        #[test]
        fn saturation_identity(u in proptest::collection::vec(-100.0f64..100.0, 3),
                               xi in proptest::collection::vec(0.1f64..10.0, 3)) {
            let s = saturate(&u, &xi).unwrap();
            let p = deadzone(&u, &xi).unwrap();
            for i in 0..3 {
                prop_assert_eq!(s[i] + p[i], u[i]);
                prop_assert!(s[i].abs() <= xi[i]);
            }
        }

        #[test]
        fn release_invariant_under_weight_scaling(c in 1e-3f64..1e3,
                                                  e in proptest::collection::vec(-5.0f64..5.0, 2),
                                                  x in proptest::collection::vec(-5.0f64..5.0, 2)) {
            let w = Mat::from_rows(&[&[2.0, 0.5], &[0.5, 1.0]]).unwrap();
            let a = event_release(&e, &x, &w, 0.16).unwrap();
            let b = event_release(&e, &x, &w.scale(c), 0.16).unwrap();
            prop_assert_eq!(a.released, b.released);
        }

        #[test]
        fn zero_threshold_releases_nonzero_error(e0 in 0.001f64..5.0) {
            let w = Mat::from_rows(&[&[2.0, 0.5], &[0.5, 1.0]]).unwrap();
            let d = event_release(&[e0, 0.0], &[1.0, 1.0], &w, 0.0).unwrap();
            prop_assert!(d.released);
        }
    }
}
