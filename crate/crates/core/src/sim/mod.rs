//! Fixed-step simulation of the closed loop: primary ODE coupled to a
//! delayed descriptor plant, sampled-data mixed triggering with ZOH,
//! Bernoulli attack/switch draws, saturation and fault application.
//!
//! Integration uses the classical 4-stage one-step method on the
//! differential coordinates of the descriptor split; the algebraic
//! coordinates are solved exactly at every stage (saturation branches are
//! enumerated, so each branch is a linear solve).

mod history;
mod signal;

pub use history::History;
pub use signal::{AttackSpec, DelaySpec, SignalSpec};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, SimFailure};
use crate::model::{validate, CascadeModel};
use crate::numerics::{dae_coordinates, vec_norm, Lu};
use crate::synthesis::{certify_closed_loop, GainCertificate};
use crate::trigger::{deadzone, event_release, primary_input, saturate, InputSource};
use crate::{Mat, Scalar};

/// Realized delay trajectories for the four delay channels.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DelaySpecs {
    pub zeta: DelaySpec,
    pub d: DelaySpec,
    pub tau: DelaySpec,
    pub theta: DelaySpec,
}

/// One closed-loop run description.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    /// Primary state at t = 0.
    pub x1_0: Vec<Scalar>,
    /// Secondary-state history on `[-theta_bar, 0]`.
    pub phi: SignalSpec,
    /// Disturbance signal.
    pub w: SignalSpec,
    /// Attack payload.
    pub attack: AttackSpec,
    #[serde(default)]
    pub delays: DelaySpecs,
    /// Realized per-channel fault gains; interval midpoint when absent.
    #[serde(default)]
    pub fault_realized: Option<Vec<Scalar>>,
    pub seed: u64,
    /// Horizon in seconds.
    pub horizon: Scalar,
    /// Integration step in seconds; must divide the sampling period.
    pub step: Scalar,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Per-sampling-instant record.
#[derive(Debug, Clone, Serialize)]
pub struct SampleRecord {
    pub t: Scalar,
    pub alpha: bool,
    pub beta: bool,
    pub released: bool,
    pub source: InputSource,
}

/// Time-indexed record of one closed-loop run.
#[derive(Debug, Clone, Default)]
pub struct SimTrace {
    pub t: Vec<Scalar>,
    pub x1: Vec<Vec<Scalar>>,
    pub x2: Vec<Vec<Scalar>>,
    pub xhat: Vec<Vec<Scalar>>,
    pub u1g: Vec<Vec<Scalar>>,
    pub u2: Vec<Vec<Scalar>>,
    pub sat_u2: Vec<Vec<Scalar>>,
    pub psi_u2: Vec<Vec<Scalar>>,
    pub y1: Vec<Vec<Scalar>>,
    pub w: Vec<Vec<Scalar>>,
    pub alpha: Vec<bool>,
    pub beta: Vec<bool>,
    pub released_row: Vec<bool>,
    pub eq5_violation: Vec<bool>,
    /// Algebraic-constraint residual per recorded step (not in the CSV).
    pub algebraic_residual: Vec<Scalar>,
    pub samples: Vec<SampleRecord>,
}

impl SimTrace {
    /// Euclidean norm of the stacked `(x1, x2)` state at a recorded row.
    pub fn state_norm(&self, row: usize) -> Scalar {
        let acc: Scalar = self.x1[row]
            .iter()
            .chain(self.x2[row].iter())
            .map(|v| v * v)
            .sum();
        acc.sqrt()
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// Row index of the last time `<= t`.
    pub fn row_at(&self, t: Scalar) -> Option<usize> {
        if self.t.is_empty() || t < self.t[0] {
            return None;
        }
        let mut lo = 0usize;
        for (i, &ti) in self.t.iter().enumerate() {
            if ti <= t {
                lo = i;
            } else {
                break;
            }
        }
        Some(lo)
    }
}

/// Transmission accounting over the sampling instants.
#[derive(Debug, Clone, Serialize)]
pub struct TransmissionStats {
    pub total_samples: usize,
    pub released: usize,
    pub release_ratio: Scalar,
    pub time_path: usize,
    pub event_path: usize,
    pub attack_path: usize,
}

pub fn transmission_stats(trace: &SimTrace) -> TransmissionStats {
    let total = trace.samples.len();
    let released = trace.samples.iter().filter(|s| s.released).count();
    let count = |src: InputSource| trace.samples.iter().filter(|s| s.source == src).count();
    TransmissionStats {
        total_samples: total,
        released,
        release_ratio: if total == 0 {
            0.0
        } else {
            released as Scalar / total as Scalar
        },
        time_path: count(InputSource::TimePath),
        event_path: count(InputSource::EventPath),
        attack_path: count(InputSource::AttackPath),
    }
}

fn validate_scenario(model: &CascadeModel, sc: &Scenario) -> Result<()> {
    if sc.x1_0.len() != model.n1() {
        return Err(Error::Validation(format!(
            "x1_0 has dimension {}, model wants {}",
            sc.x1_0.len(),
            model.n1()
        )));
    }
    sc.phi.validate(model.n2(), "phi")?;
    sc.w.validate(model.q_w(), "w")?;
    if !(sc.step > 0.0 && sc.horizon > 0.0) {
        return Err(Error::Validation("step and horizon must be positive".into()));
    }
    let ratio = model.trigger.h / sc.step;
    if (ratio - ratio.round()).abs() > 1e-6 * ratio.max(1.0) || ratio < 1.0 {
        return Err(Error::Validation(format!(
            "integration step {} must divide the sampling period {}",
            sc.step, model.trigger.h
        )));
    }
    let d = &model.delays;
    sc.delays.zeta.validate(d.zeta2, None, sc.horizon, "zeta")?;
    sc.delays.d.validate(d.d2, None, sc.horizon, "d")?;
    sc.delays.tau.validate(d.tau2, None, sc.horizon, "tau")?;
    sc.delays
        .theta
        .validate(d.theta_bar, Some(d.lambda), sc.horizon, "theta")?;
    if let Some(g) = &sc.fault_realized {
        if g.len() != model.m() {
            return Err(Error::Validation("fault_realized arity mismatch".into()));
        }
        for (k, &gk) in g.iter().enumerate() {
            if !(model.fault.g_lower[k]..=model.fault.g_upper[k]).contains(&gk) {
                return Err(Error::Validation(format!(
                    "fault_realized[{k}] = {gk} outside declared interval"
                )));
            }
        }
    }
    Ok(())
}

struct AlgebraicSolver<'a> {
    model: &'a CascadeModel,
    k2: &'a Mat,
    rank: usize,
    v1: Mat,
    v2: Mat,
    u1t: Mat,
    u2t: Mat,
    sigma: Vec<Scalar>,
    // U2^T-projected pieces of the secondary dynamics.
    g_z: Mat,
    g_a: Mat,
    g_d: Mat,
    g_b: Mat,
    g_w: Mat,
    k2v1: Mat,
    k2v2: Mat,
}

struct AlgOut {
    x2: Vec<Scalar>,
    u2: Vec<Scalar>,
    sat: Vec<Scalar>,
    psi: Vec<Scalar>,
    residual: Scalar,
}

impl<'a> AlgebraicSolver<'a> {
    fn new(model: &'a CascadeModel, k2: &'a Mat) -> Result<Self> {
        let split = dae_coordinates(&model.secondary.e)?;
        let r = split.rank;
        let v1 = split.v1();
        let v2 = split.v2();
        let u1t = split.u1().transpose();
        let u2t = split.u2().transpose();
        let a2 = &model.secondary.a2;
        Ok(Self {
            model,
            k2,
            rank: r,
            g_z: u2t.matmul(a2)?.matmul(&v1)?,
            g_a: u2t.matmul(a2)?.matmul(&v2)?,
            g_d: u2t.matmul(&model.secondary.a3)?,
            g_b: u2t.matmul(&model.secondary.b2)?,
            g_w: u2t.matmul(&model.secondary.b3)?,
            k2v1: k2.matmul(&v1)?,
            k2v2: k2.matmul(&v2)?,
            v1,
            v2,
            u1t,
            u2t,
            sigma: split.sigma,
        })
    }

    /// Solve the algebraic coordinates for a given differential state and
    /// delayed/exogenous inputs; `pattern` is warm-started across calls.
    fn solve(
        &self,
        t: Scalar,
        z: &[Scalar],
        x2_del: &[Scalar],
        w: &[Scalar],
        u1g: &[Scalar],
        pattern: &mut Vec<i8>,
    ) -> Result<AlgOut> {
        let m = self.model.m();
        let xi = &self.model.secondary.xi;
        let n2 = self.model.n2();
        let n_alg = n2 - self.rank;

        if n_alg == 0 {
            let x2 = self.v1.matvec(z)?;
            return self.finish(t, x2, x2_del, w, u1g);
        }

        // Fixed-point on the saturation pattern, warm-started.
        let mut pat = pattern.clone();
        if pat.len() != m {
            pat = vec![0; m];
        }
        for _ in 0..12 {
            match self.try_pattern(&pat, z, x2_del, w, u1g)? {
                Some((x2, u2)) => {
                    let next = classify(&u2, xi);
                    if consistent(&pat, &u2, xi) {
                        *pattern = pat;
                        return self.finish(t, x2, x2_del, w, u1g);
                    }
                    pat = next;
                }
                None => break, // singular branch; fall through to enumeration
            }
        }

        if m > 10 {
            return Err(Error::Simulation {
                kind: SimFailure::AlgebraicSingular,
                time: t,
            });
        }
        let total = 3usize.pow(m as u32);
        for code in 0..total {
            let mut c = code;
            let mut p = vec![0i8; m];
            for pk in p.iter_mut() {
                *pk = (c % 3) as i8 - 1;
                c /= 3;
            }
            if let Some((x2, u2)) = self.try_pattern(&p, z, x2_del, w, u1g)? {
                if consistent(&p, &u2, xi) {
                    *pattern = p;
                    return self.finish(t, x2, x2_del, w, u1g);
                }
            }
        }
        Err(Error::Simulation {
            kind: SimFailure::AlgebraicSingular,
            time: t,
        })
    }

    /// Attempt one saturation branch: returns the full secondary state and
    /// unsaturated input, or `None` when the branch matrix is singular.
    fn try_pattern(
        &self,
        pat: &[i8],
        z: &[Scalar],
        x2_del: &[Scalar],
        w: &[Scalar],
        u1g: &[Scalar],
    ) -> Result<Option<(Vec<Scalar>, Vec<Scalar>)>> {
        let m = self.model.m();
        let xi = &self.model.secondary.xi;
        let n_alg = self.g_a.rows();
        // sat(u) = D u + c on this branch.
        let d_diag: Vec<Scalar> = pat.iter().map(|&p| if p == 0 { 1.0 } else { 0.0 }).collect();
        let c_off: Vec<Scalar> = pat
            .iter()
            .zip(xi)
            .map(|(&p, &lim)| match p {
                1 => lim,
                -1 => -lim,
                _ => 0.0,
            })
            .collect();

        // M a = rhs with M = G_a + G_b D K2V2.
        let mut mmat = self.g_a.clone();
        for i in 0..n_alg {
            for j in 0..self.k2v2.cols() {
                let mut acc = 0.0;
                for k in 0..m {
                    acc += self.g_b[(i, k)] * d_diag[k] * self.k2v2[(k, j)];
                }
                mmat[(i, j)] += acc;
            }
        }
        let lu = Lu::factor(&mmat)?;
        if lu.is_singular(1e-12) {
            return Ok(None);
        }
        let base_u: Vec<Scalar> = {
            let k2v1_z = self.k2v1.matvec(z)?;
            u1g.iter().zip(&k2v1_z).map(|(&a, &b)| a + b).collect()
        };
        let mut rhs = vec![0.0; n_alg];
        let gz = self.g_z.matvec(z)?;
        let gd = self.g_d.matvec(x2_del)?;
        let gw = self.g_w.matvec(w)?;
        for i in 0..n_alg {
            let mut s = gz[i] + gd[i] + gw[i];
            for k in 0..m {
                s += self.g_b[(i, k)] * (d_diag[k] * base_u[k] + c_off[k]);
            }
            rhs[i] = -s;
        }
        let a = lu.solve(&rhs)?;
        let x2: Vec<Scalar> = {
            let part1 = self.v1.matvec(z)?;
            let part2 = self.v2.matvec(&a)?;
            part1.iter().zip(&part2).map(|(&p, &q)| p + q).collect()
        };
        let u2: Vec<Scalar> = {
            let k2x2 = self.k2.matvec(&x2)?;
            u1g.iter().zip(&k2x2).map(|(&a_, &b)| a_ + b).collect()
        };
        Ok(Some((x2, u2)))
    }

    fn finish(
        &self,
        _t: Scalar,
        x2: Vec<Scalar>,
        x2_del: &[Scalar],
        w: &[Scalar],
        u1g: &[Scalar],
    ) -> Result<AlgOut> {
        let xi = &self.model.secondary.xi;
        let k2x2 = self.k2.matvec(&x2)?;
        let u2: Vec<Scalar> = u1g.iter().zip(&k2x2).map(|(&a, &b)| a + b).collect();
        let sat = saturate(&u2, xi)?;
        let psi = deadzone(&u2, xi)?;
        let g = self.rhs_vector(&x2, x2_del, w, &sat)?;
        let proj = self.u2t.matvec(&g)?;
        let residual = proj.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
        Ok(AlgOut {
            x2,
            u2,
            sat,
            psi,
            residual,
        })
    }

    /// Full right-hand side `A2 x2 + A3 x2_del + B2 sat + B3 w`.
    fn rhs_vector(
        &self,
        x2: &[Scalar],
        x2_del: &[Scalar],
        w: &[Scalar],
        sat: &[Scalar],
    ) -> Result<Vec<Scalar>> {
        let s = &self.model.secondary;
        let mut g = s.a2.matvec(x2)?;
        for (gi, v) in g.iter_mut().zip(s.a3.matvec(x2_del)?) {
            *gi += v;
        }
        for (gi, v) in g.iter_mut().zip(s.b2.matvec(sat)?) {
            *gi += v;
        }
        for (gi, v) in g.iter_mut().zip(s.b3.matvec(w)?) {
            *gi += v;
        }
        Ok(g)
    }

    /// Differential derivative `z' = S_r^-1 U1^T g`.
    fn z_dot(&self, g: &[Scalar]) -> Result<Vec<Scalar>> {
        let mut zd = self.u1t.matvec(g)?;
        for (i, v) in zd.iter_mut().enumerate() {
            *v /= self.sigma[i];
        }
        Ok(zd)
    }
}

fn classify(u2: &[Scalar], xi: &[Scalar]) -> Vec<i8> {
    u2.iter()
        .zip(xi)
        .map(|(&u, &lim)| {
            if u > lim {
                1
            } else if u < -lim {
                -1
            } else {
                0
            }
        })
        .collect()
}

fn consistent(pat: &[i8], u2: &[Scalar], xi: &[Scalar]) -> bool {
    pat.iter().zip(u2.iter().zip(xi)).all(|(&p, (&u, &lim))| {
        let tol = 1e-9 * (1.0 + u.abs());
        match p {
            1 => u >= lim - tol,
            -1 => u <= -lim + tol,
            _ => u.abs() <= lim + tol,
        }
    })
}

/// Run one closed-loop simulation. Refuses models whose closed loop is not
/// certified regular and impulse-free (the algebraic solve would be
/// structurally singular).
pub fn run(model: &CascadeModel, gains: &GainCertificate, scenario: &Scenario) -> Result<SimTrace> {
    validate(model).into_result()?;
    validate_scenario(model, scenario)?;
    let adm = certify_closed_loop(model, &gains.k2)?;
    if !(adm.regular && adm.impulse_free) {
        return Err(Error::Validation(
            "closed loop is not regular and impulse-free; refusing to integrate".into(),
        ));
    }

    let (n1, m) = (model.n1(), model.m());
    let dt = scenario.step;
    let n_steps = (scenario.horizon / dt).round() as usize;
    let sps = (model.trigger.h / dt).round() as usize;
    let d = &model.delays;
    let max_delay = d.zeta2.max(d.d2).max(d.tau2).max(d.theta_bar).max(dt);

    let g_realized = match &scenario.fault_realized {
        Some(g) => Mat::diag(g),
        None => model.fault.realized(),
    };
    let gk1 = g_realized.matmul(&gains.k1)?;
    let solver = AlgebraicSolver::new(model, &gains.k2)?;

    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    let mut x1 = scenario.x1_0.clone();
    let phi0 = scenario.phi.eval(0.0)?;
    let vt_phi = {
        // differential coordinates of the initial history value
        let split = dae_coordinates(&model.secondary.e)?;
        let full = split.v.transpose().matvec(&phi0)?;
        full[..split.rank].to_vec()
    };
    let mut z = vt_phi;
    let mut pattern: Vec<i8> = vec![0; m];
    let mut u1g = vec![0.0; m];
    let mut last_released = x1.clone();
    let (mut alpha_now, mut beta_now) = (false, false);

    let mut trace = SimTrace::default();
    let phi = scenario.phi.clone();
    let x1_0 = scenario.x1_0.clone();
    let pre_x1 = move |_t: Scalar| x1_0.clone();
    let pre_x2 = move |t: Scalar| phi.eval(t).expect("validated history signal");

    let mut hist_x1: Option<History> = None;
    let mut hist_x2: Option<History> = None;

    let record =
        |trace: &mut SimTrace, t: Scalar, x1: &[Scalar], alg: &AlgOut, xhat: &[Scalar],
         u1g: &[Scalar], w_t: &[Scalar], alpha: bool, beta: bool, released: bool|
         -> Result<()> {
            let y1 = {
                let mut y = model.primary.c1.matvec(x1)?;
                for (yi, v) in y.iter_mut().zip(model.primary.d1.matvec(w_t)?) {
                    *yi += v;
                }
                y
            };
            let psi_sq: Scalar = alg.psi.iter().map(|p| p * p).sum();
            let u_sq: Scalar = alg.u2.iter().map(|u| u * u).sum();
            let eq5 = psi_sq > model.secondary.epsilon * u_sq + 1e-12;
            let finite = x1.iter().chain(&alg.x2).chain(&alg.u2).all(|v| v.is_finite());
            if !finite {
                return Err(Error::Simulation {
                    kind: SimFailure::Divergence,
                    time: t,
                });
            }
            trace.t.push(t);
            trace.x1.push(x1.to_vec());
            trace.x2.push(alg.x2.clone());
            trace.xhat.push(xhat.to_vec());
            trace.u1g.push(u1g.to_vec());
            trace.u2.push(alg.u2.clone());
            trace.sat_u2.push(alg.sat.clone());
            trace.psi_u2.push(alg.psi.clone());
            trace.y1.push(y1);
            trace.w.push(w_t.to_vec());
            trace.alpha.push(alpha);
            trace.beta.push(beta);
            trace.released_row.push(released);
            trace.eq5_violation.push(eq5);
            trace.algebraic_residual.push(alg.residual);
            Ok(())
        };

    let mut xhat = x1.clone();
    for i in 0..=n_steps {
        let t = i as Scalar * dt;
        let mut released_now = false;
        let is_sample = i % sps == 0;
        if is_sample {
            let ua: Scalar = rng.random();
            let ub: Scalar = rng.random();
            alpha_now = ua < model.trigger.alpha_bar;
            beta_now = ub < model.attack.beta_bar;
            let x_sampled = x1.clone();

            released_now = if i == 0 {
                last_released = x_sampled.clone();
                true
            } else if alpha_now {
                last_released = x_sampled.clone();
                true
            } else {
                let e_cand: Vec<Scalar> = last_released
                    .iter()
                    .zip(&x_sampled)
                    .map(|(&l, &s)| l - s)
                    .collect();
                let dec = event_release(&e_cand, &x_sampled, &gains.w, model.trigger.mu)?;
                if dec.released {
                    last_released = x_sampled.clone();
                }
                dec.released
            };
            let e_after: Vec<Scalar> = last_released
                .iter()
                .zip(&x_sampled)
                .map(|(&l, &s)| l - s)
                .collect();

            let tau_t = scenario.delays.tau.eval(t, d.tau2)?;
            let x1_tau = match &hist_x1 {
                Some(h) => h.sample(t - tau_t, &pre_x1)?,
                None => pre_x1(t - tau_t),
            };
            let f_del = scenario.attack.eval(&x1_tau, t)?;
            let input = primary_input(alpha_now, beta_now, &x_sampled, &x_sampled, &e_after, &f_del)?;
            xhat = input.value.clone();
            u1g = gk1.matvec(&xhat)?;
            trace.samples.push(SampleRecord {
                t,
                alpha: alpha_now,
                beta: beta_now,
                released: released_now,
                source: input.source,
            });
        }

        // Record the state at t (with the post-sampling hold applied).
        let theta_t = scenario.delays.theta.eval(t, d.theta_bar)?;
        let x2_del = match &hist_x2 {
            Some(h) => h.sample(t - theta_t, &pre_x2)?,
            None => pre_x2(t - theta_t),
        };
        let w_t = scenario.w.eval(t)?;
        let alg = solver.solve(t, &z, &x2_del, &w_t, &u1g, &mut pattern)?;
        if hist_x1.is_none() {
            hist_x1 = Some(History::new(dt, max_delay, x1.clone()));
            hist_x2 = Some(History::new(dt, max_delay, alg.x2.clone()));
        }
        record(
            &mut trace, t, &x1, &alg, &xhat, &u1g, &w_t, alpha_now, beta_now, released_now,
        )?;
        if i == n_steps {
            break;
        }

        // One RK4 step of (x1, z) with frozen hold values.
        let deriv = |t_s: Scalar, x1_s: &[Scalar], z_s: &[Scalar], pat: &mut Vec<i8>|
         -> Result<(Vec<Scalar>, Vec<Scalar>)> {
            let th = scenario.delays.theta.eval(t_s, d.theta_bar)?;
            let x2d = hist_x2
                .as_ref()
                .expect("seeded above")
                .sample(t_s - th, &pre_x2)?;
            let w_s = scenario.w.eval(t_s)?;
            let alg_s = solver.solve(t_s, z_s, &x2d, &w_s, &u1g, pat)?;
            let mut x1_dot = model.primary.a1.matvec(x1_s)?;
            let y2_part = model.secondary.c2.matvec(&alg_s.x2)?;
            let mut y2 = y2_part;
            for (yi, v) in y2.iter_mut().zip(model.secondary.d2.matvec(&w_s)?) {
                *yi += v;
            }
            for (xd, v) in x1_dot.iter_mut().zip(model.primary.b1.matvec(&y2)?) {
                *xd += v;
            }
            let g = solver.rhs_vector(&alg_s.x2, &x2d, &w_s, &alg_s.sat)?;
            let z_dot = solver.z_dot(&g)?;
            Ok((x1_dot, z_dot))
        };

        let add = |a: &[Scalar], b: &[Scalar], s: Scalar| -> Vec<Scalar> {
            a.iter().zip(b).map(|(&x, &y)| x + s * y).collect()
        };
        let (k1x, k1z) = deriv(t, &x1, &z, &mut pattern)?;
        let (k2x, k2z) = deriv(t + dt / 2.0, &add(&x1, &k1x, dt / 2.0), &add(&z, &k1z, dt / 2.0), &mut pattern)?;
        let (k3x, k3z) = deriv(t + dt / 2.0, &add(&x1, &k2x, dt / 2.0), &add(&z, &k2z, dt / 2.0), &mut pattern)?;
        let (k4x, k4z) = deriv(t + dt, &add(&x1, &k3x, dt), &add(&z, &k3z, dt), &mut pattern)?;
        for j in 0..n1 {
            x1[j] += dt / 6.0 * (k1x[j] + 2.0 * k2x[j] + 2.0 * k3x[j] + k4x[j]);
        }
        for j in 0..z.len() {
            z[j] += dt / 6.0 * (k1z[j] + 2.0 * k2z[j] + 2.0 * k3z[j] + k4z[j]);
        }
        if x1.iter().chain(z.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Simulation {
                kind: SimFailure::Divergence,
                time: t + dt,
            });
        }

        // Push the new grid point into the histories (the x2 value is the
        // algebraic solve at the new time with the still-current hold).
        let t_next = t + dt;
        let th = scenario.delays.theta.eval(t_next, d.theta_bar)?;
        let x2d = hist_x2
            .as_ref()
            .expect("seeded")
            .sample(t_next - th, &pre_x2)?;
        let w_next = scenario.w.eval(t_next)?;
        let alg_next = solver.solve(t_next, &z, &x2d, &w_next, &u1g, &mut pattern)?;
        hist_x1.as_mut().expect("seeded").push(x1.clone());
        hist_x2.as_mut().expect("seeded").push(alg_next.x2);
    }

    Ok(trace)
}

/// Norm of the stacked initial state as recorded (row 0).
pub fn initial_state_norm(trace: &SimTrace) -> Scalar {
    let mut v = trace.x1[0].clone();
    v.extend_from_slice(&trace.x2[0]);
    vec_norm(&v)
}

/// Norm of the stacked state at the last row at or before `t`.
pub fn state_norm_at(trace: &SimTrace, t: Scalar) -> Option<Scalar> {
    let row = trace.row_at(t)?;
    let mut v = trace.x1[row].clone();
    v.extend_from_slice(&trace.x2[row]);
    Some(vec_norm(&v))
}

fn col_names(base: &str, dim: usize) -> Vec<String> {
    if dim == 1 {
        vec![base.to_string()]
    } else {
        (1..=dim).map(|i| format!("{base}_{i}")).collect()
    }
}

/// Serialize a trace as CSV: one row per recorded step, 10 significant
/// digits, flags as 0/1.
pub fn write_csv(trace: &SimTrace) -> String {
    let n1 = trace.x1.first().map_or(0, Vec::len);
    let n2 = trace.x2.first().map_or(0, Vec::len);
    let m = trace.u2.first().map_or(0, Vec::len);
    let qy = trace.y1.first().map_or(0, Vec::len);
    let qw = trace.w.first().map_or(0, Vec::len);

    let mut header: Vec<String> = vec!["t".into()];
    header.extend((1..=n1).map(|i| format!("x1_{i}")));
    header.extend((1..=n2).map(|i| format!("x2_{i}")));
    header.extend((1..=n1).map(|i| format!("xhat_{i}")));
    header.extend(col_names("u1g", m));
    header.extend(col_names("u2", m));
    header.extend(col_names("sat_u2", m));
    header.extend(col_names("psi_u2", m));
    header.extend(col_names("y1", qy));
    header.extend(col_names("w", qw));
    header.extend(["alpha", "beta", "released", "eq5_violation"].map(String::from));

    let mut out = header.join(",");
    out.push('\n');
    for i in 0..trace.len() {
        let mut row: Vec<String> = vec![fmt(trace.t[i])];
        row.extend(trace.x1[i].iter().map(|&v| fmt(v)));
        row.extend(trace.x2[i].iter().map(|&v| fmt(v)));
        row.extend(trace.xhat[i].iter().map(|&v| fmt(v)));
        row.extend(trace.u1g[i].iter().map(|&v| fmt(v)));
        row.extend(trace.u2[i].iter().map(|&v| fmt(v)));
        row.extend(trace.sat_u2[i].iter().map(|&v| fmt(v)));
        row.extend(trace.psi_u2[i].iter().map(|&v| fmt(v)));
        row.extend(trace.y1[i].iter().map(|&v| fmt(v)));
        row.extend(trace.w[i].iter().map(|&v| fmt(v)));
        row.push((trace.alpha[i] as u8).to_string());
        row.push((trace.beta[i] as u8).to_string());
        row.push((trace.released_row[i] as u8).to_string());
        row.push((trace.eq5_violation[i] as u8).to_string());
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

fn fmt(v: Scalar) -> String {
    format!("{v:.9e}")
}

/// Parse a trace CSV produced by [`write_csv`]. Sampling-instant records
/// are not reconstructed (release flags per row are).
pub fn read_csv(text: &str) -> Result<SimTrace> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Signal("empty trace file".into()))?;
    let cols: Vec<&str> = header.split(',').collect();
    let count_prefix = |p: &str| {
        cols.iter()
            .filter(|c| **c == p || c.strip_prefix(&format!("{p}_")).is_some_and(|s| s.chars().all(|ch| ch.is_ascii_digit())))
            .count()
    };
    let n1 = count_prefix("x1");
    let n2 = count_prefix("x2");
    let m = count_prefix("u2");
    let qy = count_prefix("y1");
    let qw = count_prefix("w");
    let mut trace = SimTrace::default();
    for line in lines {
        if line.trim().is_empty() {
            continue;
        }
        let vals: Vec<Scalar> = line
            .split(',')
            .map(|s| {
                s.parse::<Scalar>()
                    .map_err(|e| Error::Signal(format!("bad csv value `{s}`: {e}")))
            })
            .collect::<Result<_>>()?;
        if vals.len() != cols.len() {
            return Err(Error::Signal("csv row arity mismatch".into()));
        }
        let mut k = 0usize;
        let mut take = |n: usize| {
            let v = vals[k..k + n].to_vec();
            k += n;
            v
        };
        trace.t.push(take(1)[0]);
        trace.x1.push(take(n1));
        trace.x2.push(take(n2));
        trace.xhat.push(take(n1));
        trace.u1g.push(take(m));
        trace.u2.push(take(m));
        trace.sat_u2.push(take(m));
        trace.psi_u2.push(take(m));
        trace.y1.push(take(qy));
        trace.w.push(take(qw));
        trace.alpha.push(take(1)[0] != 0.0);
        trace.beta.push(take(1)[0] != 0.0);
        trace.released_row.push(take(1)[0] != 0.0);
        trace.eq5_violation.push(take(1)[0] != 0.0);
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cases;
    use crate::synthesis::{AdmissibilityReport, GainCertificate, SolverSummary};
    use std::collections::BTreeMap;

    fn reference_certificate(model: &CascadeModel) -> GainCertificate {
        let (k1, k2, w) = cases::reference_gains_case1();
        let admissibility = certify_closed_loop(model, &k2).unwrap();
        GainCertificate {
            k1,
            k2,
            w,
            decision: BTreeMap::new(),
            admissibility,
            margins: BTreeMap::new(),
            solver: SolverSummary {
                status: "reference".into(),
                t_star: 0.0,
                iterations: 0,
                outer_iterations: 0,
                strict_margin: 0.0,
            },
            x1_condition: 1.0,
            x2_condition: 1.0,
        }
    }

    fn quiet_scenario() -> Scenario {
        Scenario {
            x1_0: vec![0.0, 0.0],
            phi: SignalSpec::Constant { value: vec![0.0, 0.0] },
            w: SignalSpec::Zero { dim: 1 },
            attack: AttackSpec::Zero,
            delays: DelaySpecs::default(),
            fault_realized: None,
            seed: 3,
            horizon: 2.0,
            step: 1e-3,
        }
    }

    #[test]
    fn equilibrium_stays_at_zero() {
        let mut model = cases::case1().model;
        model.attack.beta_bar = 0.0;
        let cert = reference_certificate(&model);
        let trace = run(&model, &cert, &quiet_scenario()).unwrap();
        for i in 0..trace.len() {
            assert!(trace.state_norm(i) < 1e-12, "row {i}");
            assert!(trace.u2[i][0].abs() < 1e-12);
        }
    }

    #[test]
    fn time_triggered_releases_every_sample() {
        let model = cases::case2().model;
        let cert = reference_certificate(&model);
        let mut sc = cases::case2().scenario;
        sc.horizon = 2.0;
        let trace = run(&model, &cert, &sc).unwrap();
        let stats = transmission_stats(&trace);
        assert_eq!(stats.release_ratio, 1.0);
        assert_eq!(stats.total_samples, 201);
    }

    #[test]
    fn zero_threshold_event_trigger_releases_every_sample() {
        let mut model = cases::case3().model;
        model.trigger.mu = 0.0;
        let cert = reference_certificate(&model);
        let mut sc = cases::case3().scenario;
        sc.horizon = 3.0;
        let trace = run(&model, &cert, &sc).unwrap();
        let stats = transmission_stats(&trace);
        assert_eq!(stats.release_ratio, 1.0);
    }

    #[test]
    fn event_trigger_saves_transmissions() {
        let model = cases::case3().model;
        let cert = reference_certificate(&model);
        let trace = run(&model, &cert, &cases::case3().scenario).unwrap();
        let stats = transmission_stats(&trace);
        assert!(stats.release_ratio < 1.0);
        assert!(stats.released >= 1); // bootstrap packet
    }

    #[test]
    fn trace_is_bit_deterministic() {
        let case = cases::case1();
        let cert = reference_certificate(&case.model);
        let mut sc = case.scenario.clone();
        sc.horizon = 3.0;
        let a = run(&case.model, &cert, &sc).unwrap();
        let b = run(&case.model, &cert, &sc).unwrap();
        assert_eq!(a.t, b.t);
        assert_eq!(a.x1, b.x1);
        assert_eq!(a.x2, b.x2);
        assert_eq!(a.u2, b.u2);
        assert_eq!(write_csv(&a), write_csv(&b));
    }

    #[test]
    fn step_halving_agrees() {
        let case = cases::case1();
        let cert = reference_certificate(&case.model);
        let mut sc = case.scenario.clone();
        sc.horizon = 6.0;
        let coarse = run(&case.model, &cert, &sc).unwrap();
        sc.step = 5e-4;
        let fine = run(&case.model, &cert, &sc).unwrap();
        let end_c = coarse.len() - 1;
        let end_f = fine.len() - 1;
        let mut diff: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for k in 0..2 {
            diff = diff.max((coarse.x1[end_c][k] - fine.x1[end_f][k]).abs());
            diff = diff.max((coarse.x2[end_c][k] - fine.x2[end_f][k]).abs());
            scale = scale.max(coarse.x1[end_c][k].abs()).max(coarse.x2[end_c][k].abs());
        }
        assert!(diff < 1e-4 * scale.max(1.0), "diff {diff}, scale {scale}");
    }

    #[test]
    fn algebraic_residual_and_saturation_identity_along_trace() {
        let case = cases::case1();
        let cert = reference_certificate(&case.model);
        let mut sc = case.scenario.clone();
        sc.horizon = 4.0;
        let trace = run(&case.model, &cert, &sc).unwrap();
        for i in 0..trace.len() {
            assert!(trace.algebraic_residual[i] < 1e-9, "row {i}");
            for k in 0..trace.u2[i].len() {
                assert_eq!(
                    trace.sat_u2[i][k] + trace.psi_u2[i][k],
                    trace.u2[i][k],
                    "identity at row {i}"
                );
                assert!(trace.sat_u2[i][k].abs() <= case.model.secondary.xi[k]);
            }
        }
    }

    #[test]
    fn bernoulli_draws_match_their_means() {
        let mut model = cases::case1().model;
        model.trigger.h = 0.01;
        let cert = reference_certificate(&model);
        let mut sc = quiet_scenario();
        sc.horizon = 25.0;
        sc.step = 1e-3;
        let mut n = 0usize;
        let mut alpha_sum = 0usize;
        let mut beta_sum = 0usize;
        for seed in 0..4u64 {
            sc.seed = seed;
            let trace = run(&model, &cert, &sc).unwrap();
            n += trace.samples.len();
            alpha_sum += trace.samples.iter().filter(|s| s.alpha).count();
            beta_sum += trace.samples.iter().filter(|s| s.beta).count();
        }
        assert!(n >= 10_000, "need at least 1e4 samples, got {n}");
        let se = |p: f64| (p * (1.0 - p) / n as f64).sqrt();
        let a_hat = alpha_sum as f64 / n as f64;
        let b_hat = beta_sum as f64 / n as f64;
        assert!((a_hat - 0.25).abs() <= 3.0 * se(0.25), "alpha {a_hat}");
        assert!((b_hat - 0.02).abs() <= 3.0 * se(0.02), "beta {b_hat}");
    }

    #[test]
    fn saturation_branch_with_nonsingular_descriptor() {
        // Nonsingular E exercises the no-algebraic-coordinates path and
        // lets the actuator saturate without a singular algebraic solve.
        let mut model = cases::case1().model;
        model.secondary.e = Mat::identity(2);
        model.secondary.xi = vec![0.05];
        let cert = reference_certificate(&model);
        let mut sc = cases::case1().scenario;
        sc.horizon = 1.0;
        let trace = run(&model, &cert, &sc).unwrap();
        let saturated = (0..trace.len()).any(|i| trace.psi_u2[i][0] != 0.0);
        assert!(saturated);
        let violated = (0..trace.len()).any(|i| trace.eq5_violation[i]);
        assert!(violated, "deep saturation must trip the slope-bound flag");
        for i in 0..trace.len() {
            assert_eq!(trace.sat_u2[i][0] + trace.psi_u2[i][0], trace.u2[i][0]);
        }
    }

    #[test]
    fn saturated_singular_descriptor_fails_structurally() {
        // With singular E and the linear branch cut off, the algebraic row
        // loses its unknown: the run must fail with a timestamped error.
        let mut model = cases::case1().model;
        model.secondary.xi = vec![0.02];
        let cert = reference_certificate(&model);
        let mut sc = cases::case1().scenario;
        sc.horizon = 2.0;
        match run(&model, &cert, &sc) {
            Err(Error::Simulation { kind, time }) => {
                assert_eq!(kind, SimFailure::AlgebraicSingular);
                assert!(time >= 0.0);
            }
            other => panic!("expected structured failure, got {:?}", other.map(|t| t.len())),
        }
    }

    #[test]
    fn refuses_non_impulse_free_loop() {
        let model = cases::case1().model;
        let mut cert = reference_certificate(&model);
        cert.k2 = Mat::zeros(1, 2); // open-loop pair is not impulse-free
        assert!(run(&model, &cert, &cases::case1().scenario).is_err());
    }

    #[test]
    fn step_must_divide_sampling_period() {
        let case = cases::case1();
        let cert = reference_certificate(&case.model);
        let mut sc = case.scenario.clone();
        sc.step = 0.03;
        assert!(run(&case.model, &cert, &sc).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let case = cases::case1();
        let cert = reference_certificate(&case.model);
        let mut sc = case.scenario.clone();
        sc.horizon = 0.5;
        let trace = run(&case.model, &cert, &sc).unwrap();
        let text = write_csv(&trace);
        let header = text.lines().next().unwrap();
        assert!(header.starts_with("t,x1_1,x1_2,x2_1,x2_2,xhat_1,xhat_2,u1g,u2,sat_u2,psi_u2,y1,w,alpha,beta,released,eq5_violation"));
        let back = read_csv(&text).unwrap();
        assert_eq!(back.len(), trace.len());
        for i in 0..trace.len() {
            assert!((back.t[i] - trace.t[i]).abs() <= 1e-9 * (1.0 + trace.t[i].abs()));
            for k in 0..2 {
                assert!((back.x1[i][k] - trace.x1[i][k]).abs() <= 1e-8 * (1.0 + trace.x1[i][k].abs()));
            }
            assert_eq!(back.released_row[i], trace.released_row[i]);
        }
    }
}
