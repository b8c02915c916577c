//! Scenario signal specifications: disturbance/history signals over time,
//! state-dependent attack functions, and realized delay trajectories.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::Scalar;

/// Time signal. Piecewise boundaries are closed on the left.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SignalSpec {
    Zero { dim: usize },
    /// `sin(t)` on `(0, t_end]`, zero elsewhere (scalar).
    SinUntil { t_end: Scalar },
    Constant { value: Vec<Scalar> },
    /// Piecewise-linear table; exact at grid points, clamped outside.
    Table { t: Vec<Scalar>, v: Vec<Vec<Scalar>> },
}

impl SignalSpec {
    pub fn dim(&self) -> usize {
        match self {
            SignalSpec::Zero { dim } => *dim,
            SignalSpec::SinUntil { .. } => 1,
            SignalSpec::Constant { value } => value.len(),
            SignalSpec::Table { v, .. } => v.first().map_or(0, Vec::len),
        }
    }

    pub fn eval(&self, t: Scalar) -> Result<Vec<Scalar>> {
        match self {
            SignalSpec::Zero { dim } => Ok(vec![0.0; *dim]),
            SignalSpec::SinUntil { t_end } => {
                let v = if t > 0.0 && t <= *t_end { t.sin() } else { 0.0 };
                Ok(vec![v])
            }
            SignalSpec::Constant { value } => Ok(value.clone()),
            SignalSpec::Table { t: ts, v } => {
                if ts.len() != v.len() || ts.is_empty() {
                    return Err(Error::Signal("table arity mismatch or empty".into()));
                }
                if t <= ts[0] {
                    return Ok(v[0].clone());
                }
                if t >= *ts.last().expect("nonempty") {
                    return Ok(v.last().expect("nonempty").clone());
                }
                let idx = match ts.binary_search_by(|probe| {
                    probe.partial_cmp(&t).unwrap_or(std::cmp::Ordering::Less)
                }) {
                    Ok(i) => return Ok(v[i].clone()),
                    Err(i) => i,
                };
                let (t0, t1) = (ts[idx - 1], ts[idx]);
                let w = (t - t0) / (t1 - t0);
                Ok(v[idx - 1]
                    .iter()
                    .zip(&v[idx])
                    .map(|(&a, &b)| a + w * (b - a))
                    .collect())
            }
        }
    }

    pub fn validate(&self, want_dim: usize, what: &str) -> Result<()> {
        if self.dim() != want_dim {
            return Err(Error::Signal(format!(
                "{what}: expected dimension {want_dim}, got {}",
                self.dim()
            )));
        }
        if let SignalSpec::Table { t, v } = self {
            if t.len() != v.len() || t.is_empty() {
                return Err(Error::Signal(format!("{what}: table arity mismatch")));
            }
            if t.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::Signal(format!("{what}: table times must increase")));
            }
            if v.iter().any(|row| row.len() != v[0].len()) {
                return Err(Error::Signal(format!("{what}: ragged table rows")));
            }
        }
        Ok(())
    }
}

/// Attack payload as a function of the (delayed) primary state.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AttackSpec {
    Zero,
    /// `f_i(x) = -tanh(gains_i * x_i)` componentwise.
    NegTanh { gains: Vec<Scalar> },
    /// Time-indexed table, ignores the state argument.
    TimeTable { t: Vec<Scalar>, v: Vec<Vec<Scalar>> },
}

impl AttackSpec {
    pub fn eval(&self, x: &[Scalar], t: Scalar) -> Result<Vec<Scalar>> {
        match self {
            AttackSpec::Zero => Ok(vec![0.0; x.len()]),
            AttackSpec::NegTanh { gains } => {
                if gains.len() != x.len() {
                    return Err(Error::Signal("attack gain arity mismatch".into()));
                }
                Ok(x.iter().zip(gains).map(|(&xi, &g)| -(g * xi).tanh()).collect())
            }
            AttackSpec::TimeTable { t: ts, v } => SignalSpec::Table {
                t: ts.clone(),
                v: v.clone(),
            }
            .eval(t),
        }
    }
}

/// Realized delay trajectory, always within `[0, bound]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DelaySpec {
    /// Constant at `fraction * bound`.
    ConstFraction { fraction: Scalar },
    /// Piecewise-linear scalar table.
    Table { t: Vec<Scalar>, v: Vec<Scalar> },
}

impl Default for DelaySpec {
    fn default() -> Self {
        DelaySpec::ConstFraction { fraction: 1.0 }
    }
}

impl DelaySpec {
    pub fn eval(&self, t: Scalar, bound: Scalar) -> Result<Scalar> {
        match self {
            DelaySpec::ConstFraction { fraction } => Ok(fraction * bound),
            DelaySpec::Table { t: ts, v } => {
                let rows: Vec<Vec<Scalar>> = v.iter().map(|&x| vec![x]).collect();
                Ok(SignalSpec::Table {
                    t: ts.clone(),
                    v: rows,
                }
                .eval(t)?[0])
            }
        }
    }

    /// Check the trajectory stays in `[0, bound]` and (for the rate-limited
    /// state delay) that its slope never exceeds `rate_bound`.
    pub fn validate(
        &self,
        bound: Scalar,
        rate_bound: Option<Scalar>,
        horizon: Scalar,
        what: &str,
    ) -> Result<()> {
        match self {
            DelaySpec::ConstFraction { fraction } => {
                if !(0.0..=1.0).contains(fraction) {
                    return Err(Error::Signal(format!(
                        "{what}: fraction {fraction} outside [0,1]"
                    )));
                }
                // Constant trajectories have zero rate.
                Ok(())
            }
            DelaySpec::Table { .. } => {
                let steps = 2000;
                let mut prev = self.eval(0.0, bound)?;
                for k in 0..=steps {
                    let t = horizon * k as Scalar / steps as Scalar;
                    let val = self.eval(t, bound)?;
                    if !(0.0..=bound + 1e-12).contains(&val) {
                        return Err(Error::Signal(format!(
                            "{what}: value {val} at t={t} outside [0, {bound}]"
                        )));
                    }
                    if let Some(rate) = rate_bound {
                        if k > 0 {
                            let slope = (val - prev) / (horizon / steps as Scalar);
                            if slope > rate + 1e-9 {
                                return Err(Error::Signal(format!(
                                    "{what}: slope {slope} exceeds rate bound {rate}"
                                )));
                            }
                        }
                    }
                    prev = val;
                }
                Ok(())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sin_until_matches_case_study() {
        let w = SignalSpec::SinUntil { t_end: 5.0 };
        assert!((w.eval(std::f64::consts::FRAC_PI_2).unwrap()[0] - 1.0).abs() < 1e-15);
        assert_eq!(w.eval(6.0).unwrap()[0], 0.0);
        assert_eq!(w.eval(0.0).unwrap()[0], 0.0);
        assert!((w.eval(5.0).unwrap()[0] - 5.0f64.sin()).abs() < 1e-15);
    }

    #[test]
    fn tanh_attack_zero_at_origin() {
        let f = AttackSpec::NegTanh {
            gains: vec![0.02, 0.1],
        };
        assert_eq!(f.eval(&[0.0, 0.0], 1.0).unwrap(), vec![0.0, 0.0]);
        let v = f.eval(&[10.0, -3.0], 0.0).unwrap();
        assert!((v[0] + (0.2f64).tanh()).abs() < 1e-15);
        assert!((v[1] - (0.3f64).tanh()).abs() < 1e-15);
    }

    #[test]
    fn table_exact_at_grid_interpolated_between() {
        let s = SignalSpec::Table {
            t: vec![0.0, 1.0, 2.0],
            v: vec![vec![0.0], vec![2.0], vec![6.0]],
        };
        assert_eq!(s.eval(1.0).unwrap()[0], 2.0);
        assert_eq!(s.eval(1.5).unwrap()[0], 4.0);
        assert_eq!(s.eval(-1.0).unwrap()[0], 0.0);
        assert_eq!(s.eval(9.0).unwrap()[0], 6.0);
    }

    #[test]
    fn unknown_kind_rejected() {
        let text = r#"{"kind": "mystery"}"#;
        assert!(serde_json::from_str::<SignalSpec>(text).is_err());
    }
}
