//! Assembly of the synthesis feasibility systems.
//!
//! The closed-loop condition is one large symmetric block matrix over 22
//! signal blocks plus 13 border blocks (delay, switching-rate, saturation,
//! attack-bound and supply-rate rows), required negative definite, together
//! with three reciprocal-convexity coupling conditions, the descriptor
//! structure constraint on `X2`, and PD cones for the tagged variables.
//! The unknown-fault variant replaces the realized fault gain by its
//! interval midpoint and appends 8 border pairs with positive scalars
//! `eps_t1..eps_t8` absorbing the interval radius.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::lmi::{
    Constraint, Expr, FixedScalars, LmiSystem, Sense, Term, VarId, VarRegistry, VarShape,
};
use crate::model::{bernoulli_moments, validate, CascadeModel};
use crate::numerics::{dae_coordinates, BlockLayout};
use crate::{Mat, Scalar};

/// Fixed slack-bound scalars for the border diagonals. `eps_f` is accepted
/// for interface stability; no assembled block consumes it.
#[derive(Debug, Clone)]
pub struct SynthesisScalars {
    pub eps: [Scalar; 4],
    pub eps_f: Scalar,
}

impl Default for SynthesisScalars {
    fn default() -> Self {
        Self {
            eps: [1.0; 4],
            eps_f: 1.0,
        }
    }
}

/// Positive lower bound for the uncertainty-absorbing scalars.
const EPS_T_LOWER: Scalar = 1e-6;

// Main signal blocks (0-based).
const B_X1: usize = 0;
const B_X1_NET: usize = 1;
const B_X1_NET_UB: usize = 2;
const B_X1_NET_AVG_A: usize = 3;
const B_X1_NET_AVG_B: usize = 4;
const B_X1_EVT: usize = 5;
const B_X1_EVT_UB: usize = 6;
const B_X1_EVT_AVG_A: usize = 7;
const B_X1_EVT_AVG_B: usize = 8;
const B_X1_ATK: usize = 9;
const B_X1_ATK_UB: usize = 10;
const B_X1_ATK_AVG_A: usize = 11;
const B_X1_ATK_AVG_B: usize = 12;
const B_X2: usize = 13;
const B_X2_DEL: usize = 14;
const B_X2_DEL_UB: usize = 15;
const B_X2_AVG_A: usize = 16;
const B_X2_AVG_B: usize = 17;
const B_TRIG_ERR: usize = 18;
const B_ATTACK_SIG: usize = 19;
const B_DEAD_ZONE: usize = 20;
const B_DIST: usize = 21;
// Border blocks.
const B_SLK_NET: usize = 22;
const B_SLK_EVT: usize = 23;
const B_SLK_ATK: usize = 24;
const B_RATE_MEAN: usize = 25;
const B_RATE_SW: usize = 26;
const B_RATE_ATK: usize = 27;
const B_RATE_MIX: usize = 28;
const B_SAT_MEAN: usize = 29;
const B_SAT_SW: usize = 30;
const B_SAT_ATK: usize = 31;
const B_SAT_MIX: usize = 32;
const B_ATK_BOUND: usize = 33;
const B_SUPPLY: usize = 34;
const MAIN_AND_BORDER: usize = 35;

struct Ids {
    x1: VarId,
    x2: VarId,
    q1: VarId,
    q2: VarId,
    q3: VarId,
    q4: VarId,
    q4d: VarId,
    z1: VarId,
    z2: VarId,
    r1: VarId,
    r2: VarId,
    r3: VarId,
    w: VarId,
    y1: VarId,
    y2: VarId,
    m: [VarId; 4],
    n: [VarId; 4],
    s: [VarId; 4],
    eps_t: Vec<VarId>,
}

/// Assemble the known-fault feasibility system for a realized fault `g`.
pub fn known_fault_system(
    model: &CascadeModel,
    g: &Mat,
    scalars: &SynthesisScalars,
) -> Result<LmiSystem> {
    check_fault_dims(model, g)?;
    build(model, scalars, g, None)
}

/// Assemble the unknown-fault feasibility system: the closed-loop condition
/// is taken at the interval midpoint gain and bordered by 8 scalar-scaled
/// pairs carrying the interval radius.
pub fn uncertain_fault_system(
    model: &CascadeModel,
    scalars: &SynthesisScalars,
) -> Result<LmiSystem> {
    let g0 = model.fault.g0();
    let g1 = model.fault.g1();
    build(model, scalars, &g0, Some(&g1))
}

fn check_fault_dims(model: &CascadeModel, g: &Mat) -> Result<()> {
    let m = model.m();
    if g.rows() != m || g.cols() != m {
        return Err(Error::Dimension(format!(
            "fault matrix must be {}x{}, got {}x{}",
            m,
            m,
            g.rows(),
            g.cols()
        )));
    }
    for k in 0..m {
        if !(model.fault.g_lower[k] - 1e-12..=model.fault.g_upper[k] + 1e-12).contains(&g[(k, k)])
        {
            return Err(Error::Range(format!(
                "fault gain {} outside declared interval",
                g[(k, k)]
            )));
        }
    }
    Ok(())
}

fn build(
    model: &CascadeModel,
    sc: &SynthesisScalars,
    g: &Mat,
    g1: Option<&Mat>,
) -> Result<LmiSystem> {
    validate(model).into_result()?;
    let d = &model.delays;
    for (name, v) in [
        ("zeta2", d.zeta2),
        ("d2", d.d2),
        ("tau2", d.tau2),
        ("theta_bar", d.theta_bar),
    ] {
        if v <= 0.0 {
            return Err(Error::Validation(format!(
                "synthesis requires a positive delay bound {name}, got {v}"
            )));
        }
    }

    let (n1, n2, m) = (model.n1(), model.n2(), model.m());
    let mut reg = VarRegistry::new();
    let split = dae_coordinates(&model.secondary.e)?;
    let ids = Ids {
        x1: reg.sym_pd("X1", n1)?,
        x2: reg.descriptor("X2", split)?,
        q1: reg.sym_pd("Q1", n1)?,
        q2: reg.sym_pd("Q2", n1)?,
        q3: reg.sym_pd("Q3", n1)?,
        q4: reg.sym_pd("Q4", n2)?,
        q4d: reg.sym_pd("Q4d", n2)?,
        z1: reg.sym_pd("Z1", n2)?,
        z2: reg.sym_pd("Z2", n2)?,
        r1: reg.sym_pd("R1", n1)?,
        r2: reg.sym_pd("R2", n1)?,
        r3: reg.sym_pd("R3", n1)?,
        w: reg.sym_pd("W", n1)?,
        y1: reg.free("Y1", m, n1)?,
        y2: reg.free("Y2", m, n2)?,
        m: [
            reg.free("M1", n1, n1)?,
            reg.free("M2", n1, n1)?,
            reg.free("M3", n1, n1)?,
            reg.free("M4", n1, n1)?,
        ],
        n: [
            reg.free("N1", n1, n1)?,
            reg.free("N2", n1, n1)?,
            reg.free("N3", n1, n1)?,
            reg.free("N4", n1, n1)?,
        ],
        s: [
            reg.free("S1", n1, n1)?,
            reg.free("S2", n1, n1)?,
            reg.free("S3", n1, n1)?,
            reg.free("S4", n1, n1)?,
        ],
        eps_t: if g1.is_some() {
            (1..=8)
                .map(|i| reg.positive_scalar(&format!("eps_t{i}"), EPS_T_LOWER))
                .collect::<Result<_>>()?
        } else {
            Vec::new()
        },
    };

    let alpha_bar = model.trigger.alpha_bar;
    let beta_bar = model.attack.beta_bar;
    let sigma = bernoulli_moments(alpha_bar)?.1.sqrt();
    let delta = bernoulli_moments(beta_bar)?.1.sqrt();
    let fixed = FixedScalars {
        alpha_bar,
        beta_bar,
        sigma,
        delta,
        epsilon: model.secondary.epsilon,
        eps: sc.eps,
        eps_f: sc.eps_f,
        mu: model.trigger.mu,
        gamma: model.dissipativity.gamma,
        zeta2: d.zeta2,
        d2: d.d2,
        tau2: d.tau2,
        theta_bar: d.theta_bar,
        lambda: d.lambda,
    };

    let mut seen: BTreeSet<&'static str> = BTreeSet::new();

    let mut constraints =
        vec![closed_loop_constraint(model, &reg, &ids, &fixed, g, g1, &mut seen)?];
    constraints.push(delay_free_admissibility(model, &reg, &ids)?);
    constraints.extend(coupling_constraints(model, &reg, &ids, &mut seen)?);
    constraints.extend(cone_constraints(&reg)?);

    check_symbols(&seen, g1.is_some())?;

    let mut sys = LmiSystem {
        registry: reg,
        constraints,
        scalars: fixed,
    };
    sys.finalize()?;
    Ok(sys)
}

// ----- term constructors ----------------------------------------------------

fn term(coeff: Scalar, left: Mat, var: Option<VarId>, transposed: bool, right: Mat) -> Term {
    Term {
        coeff,
        left,
        var,
        transposed,
        psd_part: false,
        right,
    }
}

/// `c * V` for a variable.
fn sv(reg: &VarRegistry, c: Scalar, v: VarId) -> Term {
    let (r, k) = reg.decl(v).shape.dims();
    term(c, Mat::identity(r), Some(v), false, Mat::identity(k))
}

/// `c * V^T`.
fn svt(reg: &VarRegistry, c: Scalar, v: VarId) -> Term {
    let (r, k) = reg.decl(v).shape.dims();
    term(c, Mat::identity(k), Some(v), true, Mat::identity(r))
}

/// `c * L * V`.
fn lv(reg: &VarRegistry, c: Scalar, l: &Mat, v: VarId) -> Term {
    let (_, k) = reg.decl(v).shape.dims();
    term(c, l.clone(), Some(v), false, Mat::identity(k))
}

/// `c * V * R`.
fn vr(reg: &VarRegistry, c: Scalar, v: VarId, r: &Mat) -> Term {
    let (rows, _) = reg.decl(v).shape.dims();
    term(c, Mat::identity(rows), Some(v), false, r.clone())
}

/// `c * V^T * R`.
fn vtr(reg: &VarRegistry, c: Scalar, v: VarId, r: &Mat) -> Term {
    let (_, cols) = reg.decl(v).shape.dims();
    term(c, Mat::identity(cols), Some(v), true, r.clone())
}

/// `c * L * V * R`.
fn lvr(c: Scalar, l: &Mat, v: VarId, r: &Mat) -> Term {
    term(c, l.clone(), Some(v), false, r.clone())
}

/// Constant `c * M`.
fn km(c: Scalar, m: &Mat) -> Term {
    let k = m.cols();
    term(c, m.clone(), None, false, Mat::identity(k))
}

/// `c * s * M` for a scalar decision variable `s`.
fn scv(c: Scalar, v: VarId, m: &Mat) -> Term {
    let k = m.cols();
    term(c, m.clone(), Some(v), false, Mat::identity(k))
}

// ----- the closed-loop table -------------------------------------------------

#[allow(clippy::too_many_lines)]
fn closed_loop_constraint(
    md: &CascadeModel,
    reg: &VarRegistry,
    ids: &Ids,
    fx: &FixedScalars,
    g: &Mat,
    g1: Option<&Mat>,
    seen: &mut BTreeSet<&'static str>,
) -> Result<Constraint> {
    let layout = closed_loop_layout(md, g1.is_some())?;
    let mut con = Constraint::new("closed_loop", layout, Sense::NegDef);

    let (n1, m) = (md.n1(), md.m());
    let qw = md.q_w();
    let qy = md.q_y();
    let a1 = &md.primary.a1;
    let a3 = &md.secondary.a3;
    let b2 = &md.secondary.b2;
    let b3 = &md.secondary.b3;
    let f_bound = &md.attack.f;

    let (ab, bb) = (fx.alpha_bar, fx.beta_bar);
    let (a1c, b1c) = (1.0 - ab, 1.0 - bb);
    let (sg, dl) = (fx.sigma, fx.delta);
    let se = fx.epsilon.sqrt();
    let sqb = bb.sqrt();
    let (zeta2, d2b, tau2, thb) = (fx.zeta2, fx.d2, fx.tau2, fx.theta_bar);
    let lam = fx.lambda;
    let [e1, e2, e3, e4] = fx.eps;
    let pi2 = std::f64::consts::PI * std::f64::consts::PI;

    let b1c2 = md.primary.b1.matmul(&md.secondary.c2)?; // B1 C2
    let b1d2 = md.primary.b1.matmul(&md.secondary.d2)?; // B1 D2
    let b2g = b2.matmul(g)?; // fault-scaled input map
    let b2g_t = b2g.transpose();
    let g_t = g.transpose();
    let c1ts = md.primary.c1.transpose().matmul(&md.dissipativity.s)?;
    let q_bar = md.dissipativity.q_bar()?;
    let c1t_qbar = md.primary.c1.transpose().matmul(&q_bar)?;
    let d1t_qbar = md.primary.d1.transpose().matmul(&q_bar)?;
    // Constant (dist, dist) block: -D1^T S - R + gamma I.
    let w_blk = {
        let mut k = md
            .primary
            .d1
            .transpose()
            .matmul(&md.dissipativity.s)?
            .scale(-1.0)
            .sub(&md.dissipativity.r)?;
        for i in 0..qw {
            k[(i, i)] += fx.gamma;
        }
        k
    };
    let ete = |c: Scalar| lvr(c, &md.secondary.e.transpose(), ids.z2, &md.secondary.e);

    let (x1, x2, y1, y2) = (ids.x1, ids.x2, ids.y1, ids.y2);
    let (q1, q2, q3, q4, q4d) = (ids.q1, ids.q2, ids.q3, ids.q4, ids.q4d);
    let (z1, z2, r1, r2, r3, w) = (ids.z1, ids.z2, ids.r1, ids.r2, ids.r3, ids.w);
    let (mm, nn, ss) = (&ids.m, &ids.n, &ids.s);

    type EntryList = Vec<(&'static str, usize, usize, Vec<Term>)>;
    #[rustfmt::skip]
    let entries: EntryList = vec![
        ("O(1,1)", B_X1, B_X1, vec![
            lv(reg, 2.0, a1, x1),
            sv(reg, 1.0, q1), sv(reg, 1.0, q2), sv(reg, 1.0, q3),
            sv(reg, -4.0, r1), sv(reg, -4.0, r2), sv(reg, -4.0, r3)]),
        ("O(1,2)", B_X1, B_X1_NET, vec![
            sv(reg, -2.0, r1),
            svt(reg, -1.0, mm[0]), svt(reg, -1.0, mm[1]), svt(reg, -1.0, mm[2]), svt(reg, -1.0, mm[3])]),
        ("O(1,3)", B_X1, B_X1_NET_UB, vec![
            svt(reg, 1.0, mm[0]), svt(reg, 1.0, mm[1]), svt(reg, -1.0, mm[2]), svt(reg, -1.0, mm[3])]),
        ("O(1,4)", B_X1, B_X1_NET_AVG_A, vec![sv(reg, 6.0, r1)]),
        ("O(1,5)", B_X1, B_X1_NET_AVG_B, vec![svt(reg, 2.0, mm[2]), svt(reg, 2.0, mm[3])]),
        ("O(1,6)", B_X1, B_X1_EVT, vec![
            sv(reg, -2.0, r2),
            svt(reg, -1.0, nn[0]), svt(reg, -1.0, nn[1]), svt(reg, -1.0, nn[2]), svt(reg, -1.0, nn[3])]),
        ("O(1,7)", B_X1, B_X1_EVT_UB, vec![
            svt(reg, 1.0, nn[0]), svt(reg, 1.0, nn[1]), svt(reg, -1.0, nn[2]), svt(reg, -1.0, nn[3])]),
        ("O(1,8)", B_X1, B_X1_EVT_AVG_A, vec![sv(reg, 6.0, r2)]),
        ("O(1,9)", B_X1, B_X1_EVT_AVG_B, vec![svt(reg, 2.0, nn[2]), svt(reg, 2.0, nn[3])]),
        ("O(1,10)", B_X1, B_X1_ATK, vec![
            sv(reg, -2.0, r3),
            svt(reg, -1.0, ss[0]), svt(reg, -1.0, ss[1]), svt(reg, -1.0, ss[2]), svt(reg, -1.0, ss[3])]),
        ("O(1,11)", B_X1, B_X1_ATK_UB, vec![
            svt(reg, 1.0, ss[0]), svt(reg, 1.0, ss[1]), svt(reg, -1.0, ss[2]), svt(reg, -1.0, ss[3])]),
        ("O(1,12)", B_X1, B_X1_ATK_AVG_A, vec![sv(reg, 6.0, r3)]),
        ("O(1,13)", B_X1, B_X1_ATK_AVG_B, vec![svt(reg, 2.0, ss[2]), svt(reg, 2.0, ss[3])]),
        ("O(1,14)", B_X1, B_X2, vec![lv(reg, 1.0, &b1c2, x2)]),
        ("O(1,22)", B_X1, B_DIST, vec![km(1.0, &b1d2), vr(reg, -1.0, x1, &c1ts)]),

        ("O(2,2)", B_X1_NET, B_X1_NET, vec![
            sv(reg, -8.0, r1),
            svt(reg, 2.0, mm[0]), svt(reg, -2.0, mm[1]), svt(reg, 2.0, mm[2]), svt(reg, -2.0, mm[3])]),
        ("O(2,3)", B_X1_NET, B_X1_NET_UB, vec![
            sv(reg, -2.0, r1),
            svt(reg, -1.0, mm[0]), svt(reg, 1.0, mm[1]), svt(reg, 1.0, mm[2]), svt(reg, -1.0, mm[3])]),
        ("O(2,4)", B_X1_NET, B_X1_NET_AVG_A, vec![
            sv(reg, 6.0, r1), svt(reg, 2.0, mm[1]), svt(reg, 2.0, mm[3])]),
        ("O(2,5)", B_X1_NET, B_X1_NET_AVG_B, vec![
            sv(reg, 6.0, r1), svt(reg, -2.0, mm[2]), svt(reg, 2.0, mm[3])]),
        ("O(2,14)", B_X1_NET, B_X2, vec![vtr(reg, b1c * ab, y1, &b2g_t)]),
        ("O(3,3)", B_X1_NET_UB, B_X1_NET_UB, vec![sv(reg, -4.0, r1), sv(reg, -1.0, q1)]),
        ("O(3,4)", B_X1_NET_UB, B_X1_NET_AVG_A, vec![svt(reg, -2.0, mm[1]), svt(reg, 2.0, mm[3])]),
        ("O(3,5)", B_X1_NET_UB, B_X1_NET_AVG_B, vec![sv(reg, 6.0, r1)]),
        ("O(4,4)", B_X1_NET_AVG_A, B_X1_NET_AVG_A, vec![sv(reg, -12.0, r1)]),
        ("O(4,5)", B_X1_NET_AVG_A, B_X1_NET_AVG_B, vec![svt(reg, -4.0, mm[3])]),
        ("O(5,5)", B_X1_NET_AVG_B, B_X1_NET_AVG_B, vec![sv(reg, -12.0, r1)]),

        ("O(6,6)", B_X1_EVT, B_X1_EVT, vec![
            sv(reg, -8.0, r2),
            svt(reg, 2.0, nn[0]), svt(reg, -2.0, nn[1]), svt(reg, 2.0, nn[2]), svt(reg, -2.0, nn[3]),
            sv(reg, fx.mu, w)]),
        ("O(6,7)", B_X1_EVT, B_X1_EVT_UB, vec![
            sv(reg, -2.0, r2),
            svt(reg, -1.0, nn[0]), svt(reg, 1.0, nn[1]), svt(reg, 1.0, nn[2]), svt(reg, -1.0, nn[3])]),
        ("O(6,8)", B_X1_EVT, B_X1_EVT_AVG_A, vec![
            sv(reg, 6.0, r2), svt(reg, 2.0, nn[1]), svt(reg, 2.0, nn[3])]),
        ("O(6,9)", B_X1_EVT, B_X1_EVT_AVG_B, vec![
            sv(reg, 6.0, r2), svt(reg, -2.0, nn[2]), svt(reg, 2.0, nn[3])]),
        ("O(6,14)", B_X1_EVT, B_X2, vec![vtr(reg, b1c * a1c, y1, &b2g_t)]),
        ("O(7,7)", B_X1_EVT_UB, B_X1_EVT_UB, vec![sv(reg, -4.0, r2), sv(reg, -1.0, q2)]),
        ("O(7,8)", B_X1_EVT_UB, B_X1_EVT_AVG_A, vec![svt(reg, -2.0, nn[1]), svt(reg, 2.0, nn[3])]),
        ("O(7,9)", B_X1_EVT_UB, B_X1_EVT_AVG_B, vec![sv(reg, 6.0, r2)]),
        ("O(8,8)", B_X1_EVT_AVG_A, B_X1_EVT_AVG_A, vec![sv(reg, -12.0, r2)]),
        ("O(8,9)", B_X1_EVT_AVG_A, B_X1_EVT_AVG_B, vec![svt(reg, -4.0, nn[3])]),
        ("O(9,9)", B_X1_EVT_AVG_B, B_X1_EVT_AVG_B, vec![sv(reg, -12.0, r2)]),

        ("O(10,10)", B_X1_ATK, B_X1_ATK, vec![
            sv(reg, -8.0, r3),
            svt(reg, 2.0, ss[0]), svt(reg, -2.0, ss[1]), svt(reg, 2.0, ss[2]), svt(reg, -2.0, ss[3])]),
        ("O(10,11)", B_X1_ATK, B_X1_ATK_UB, vec![
            sv(reg, -2.0, r3),
            svt(reg, -1.0, ss[0]), svt(reg, 1.0, ss[1]), svt(reg, 1.0, ss[2]), svt(reg, -1.0, ss[3])]),
        ("O(10,12)", B_X1_ATK, B_X1_ATK_AVG_A, vec![
            sv(reg, 6.0, r3), svt(reg, 2.0, ss[1]), svt(reg, 2.0, ss[3])]),
        ("O(10,13)", B_X1_ATK, B_X1_ATK_AVG_B, vec![
            sv(reg, 6.0, r3), svt(reg, -2.0, ss[2]), svt(reg, 2.0, ss[3])]),
        ("O(11,11)", B_X1_ATK_UB, B_X1_ATK_UB, vec![sv(reg, -4.0, r3), sv(reg, -1.0, q3)]),
        ("O(11,12)", B_X1_ATK_UB, B_X1_ATK_AVG_A, vec![svt(reg, -2.0, ss[1]), svt(reg, 2.0, ss[3])]),
        ("O(11,13)", B_X1_ATK_UB, B_X1_ATK_AVG_B, vec![sv(reg, 6.0, r3)]),
        ("O(12,12)", B_X1_ATK_AVG_A, B_X1_ATK_AVG_A, vec![sv(reg, -12.0, r3)]),
        ("O(12,13)", B_X1_ATK_AVG_A, B_X1_ATK_AVG_B, vec![svt(reg, -4.0, ss[3])]),
        ("O(13,13)", B_X1_ATK_AVG_B, B_X1_ATK_AVG_B, vec![sv(reg, -12.0, r3)]),

        // The state-delay functional contributes theta_bar * Z1 on this
        // diagonal; without it the condition stops certifying decay of the
        // slow subsystem.
        ("O(14,14)", B_X2, B_X2, vec![
            sv(reg, 1.0, q4), sv(reg, 1.0, q4d), sv(reg, thb, z1),
            lv(reg, 2.0, &md.secondary.a2, x2),
            lv(reg, 2.0, b2, y2),
            ete(-1.0), ete(-pi2 / 4.0)]),
        ("O(14,15)", B_X2, B_X2_DEL, vec![lv(reg, 1.0, a3, x2), ete(1.0), ete(-pi2 / 4.0)]),
        ("O(14,17)", B_X2, B_X2_AVG_A, vec![ete(pi2 / 4.0)]),
        ("O(14,19)", B_X2, B_TRIG_ERR, vec![lv(reg, b1c * a1c, &b2g, y1)]),
        ("O(14,20)", B_X2, B_ATTACK_SIG, vec![lv(reg, bb, &b2g, y1)]),
        ("O(14,21)", B_X2, B_DEAD_ZONE, vec![km(-1.0, b2)]),
        ("O(14,22)", B_X2, B_DIST, vec![km(1.0, b3)]),
        ("O(15,15)", B_X2_DEL, B_X2_DEL, vec![
            ete(-2.0), ete(-2.0 * pi2 / 4.0), sv(reg, -(1.0 - lam), q4d)]),
        ("O(15,16)", B_X2_DEL, B_X2_DEL_UB, vec![ete(1.0), ete(-pi2 / 4.0)]),
        ("O(15,17)", B_X2_DEL, B_X2_AVG_A, vec![ete(pi2 / 4.0)]),
        ("O(15,18)", B_X2_DEL, B_X2_AVG_B, vec![ete(pi2 / 4.0)]),
        ("O(16,16)", B_X2_DEL_UB, B_X2_DEL_UB, vec![sv(reg, -1.0, q4), ete(-1.0), ete(-pi2 / 4.0)]),
        ("O(16,18)", B_X2_DEL_UB, B_X2_AVG_B, vec![ete(pi2 / 4.0)]),
        ("O(17,17)", B_X2_AVG_A, B_X2_AVG_A, vec![ete(-pi2), sv(reg, -1.0 / thb, z1)]),
        ("O(18,18)", B_X2_AVG_B, B_X2_AVG_B, vec![ete(-pi2), sv(reg, -1.0 / thb, z1)]),

        ("O(19,19)", B_TRIG_ERR, B_TRIG_ERR, vec![sv(reg, -1.0, w)]),
        ("O(20,20)", B_ATTACK_SIG, B_ATTACK_SIG, vec![km(-bb, &Mat::identity(n1))]),
        ("O(21,21)", B_DEAD_ZONE, B_DEAD_ZONE, vec![km(-1.0, &Mat::identity(m))]),
        ("O(22,22)", B_DIST, B_DIST, vec![km(1.0, &w_blk)]),

        // Primary-dynamics border rows, scaled by the three delay bounds.
        ("row1_net", B_X1, B_SLK_NET, vec![vtr(reg, zeta2, x1, &a1.transpose())]),
        ("row1_net", B_X2, B_SLK_NET, vec![vtr(reg, zeta2, x2, &b1c2.transpose())]),
        ("row1_net", B_DIST, B_SLK_NET, vec![km(zeta2, &b1d2.transpose())]),
        ("row1_evt", B_X1, B_SLK_EVT, vec![vtr(reg, d2b, x1, &a1.transpose())]),
        ("row1_evt", B_X2, B_SLK_EVT, vec![vtr(reg, d2b, x2, &b1c2.transpose())]),
        ("row1_evt", B_DIST, B_SLK_EVT, vec![km(d2b, &b1d2.transpose())]),
        ("row1_atk", B_X1, B_SLK_ATK, vec![vtr(reg, tau2, x1, &a1.transpose())]),
        ("row1_atk", B_X2, B_SLK_ATK, vec![vtr(reg, tau2, x2, &b1c2.transpose())]),
        ("row1_atk", B_DIST, B_SLK_ATK, vec![km(tau2, &b1d2.transpose())]),

        // Secondary-dynamics border row, scaled by the state-delay bound.
        ("row2", B_X1_NET, B_RATE_MEAN, vec![vtr(reg, thb * ab * b1c, y1, &b2g_t)]),
        ("row2", B_X1_EVT, B_RATE_MEAN, vec![vtr(reg, thb * a1c * b1c, y1, &b2g_t)]),
        ("row2", B_X2, B_RATE_MEAN, vec![
            vtr(reg, thb, x2, &md.secondary.a2.transpose()),
            vtr(reg, thb, y2, &b2.transpose())]),
        ("row2", B_X2_DEL, B_RATE_MEAN, vec![vtr(reg, thb, x2, &a3.transpose())]),
        ("row2", B_TRIG_ERR, B_RATE_MEAN, vec![vtr(reg, thb * a1c * b1c, y1, &b2g_t)]),
        ("row2", B_ATTACK_SIG, B_RATE_MEAN, vec![vtr(reg, thb * bb, y1, &b2g_t)]),
        ("row2", B_DEAD_ZONE, B_RATE_MEAN, vec![km(-thb, &b2.transpose())]),
        ("row2", B_DIST, B_RATE_MEAN, vec![km(thb, &b3.transpose())]),

        // Switching-deviation row: the held-sample and trigger-error terms
        // enter with opposite sign to the time-path term.
        ("row3", B_X1_NET, B_RATE_SW, vec![vtr(reg, thb * sg * b1c, y1, &b2g_t)]),
        ("row3", B_X1_EVT, B_RATE_SW, vec![vtr(reg, -thb * sg * b1c, y1, &b2g_t)]),
        ("row3", B_TRIG_ERR, B_RATE_SW, vec![vtr(reg, -thb * sg * b1c, y1, &b2g_t)]),

        // Attack-deviation row: the time path carries the mean switch
        // probability and the attack signal enters at full weight.
        ("row4", B_X1_NET, B_RATE_ATK, vec![vtr(reg, -thb * dl * ab, y1, &b2g_t)]),
        ("row4", B_X1_EVT, B_RATE_ATK, vec![vtr(reg, -thb * dl * a1c, y1, &b2g_t)]),
        ("row4", B_TRIG_ERR, B_RATE_ATK, vec![vtr(reg, -thb * dl * a1c, y1, &b2g_t)]),
        ("row4", B_ATTACK_SIG, B_RATE_ATK, vec![vtr(reg, thb * dl, y1, &b2g_t)]),

        ("row5", B_X1_NET, B_RATE_MIX, vec![vtr(reg, thb * sg * dl, y1, &b2g_t)]),
        ("row5", B_X1_EVT, B_RATE_MIX, vec![vtr(reg, -thb * sg * dl, y1, &b2g_t)]),
        ("row5", B_TRIG_ERR, B_RATE_MIX, vec![vtr(reg, -thb * sg * dl, y1, &b2g_t)]),

        // Saturation-energy border rows, scaled by sqrt(epsilon).
        ("row6", B_X1_NET, B_SAT_MEAN, vec![vtr(reg, se * b1c * ab, y1, &g_t)]),
        ("row6", B_X1_EVT, B_SAT_MEAN, vec![vtr(reg, se * b1c * a1c, y1, &g_t)]),
        ("row6", B_X2, B_SAT_MEAN, vec![svt(reg, se, y2)]),
        ("row6", B_TRIG_ERR, B_SAT_MEAN, vec![vtr(reg, se * b1c * a1c, y1, &g_t)]),
        ("row6", B_ATTACK_SIG, B_SAT_MEAN, vec![vtr(reg, se * bb, y1, &g_t)]),

        ("row7", B_X1_NET, B_SAT_SW, vec![vtr(reg, se * sg * b1c, y1, &g_t)]),
        ("row7", B_X1_EVT, B_SAT_SW, vec![vtr(reg, -se * sg * b1c, y1, &g_t)]),
        ("row7", B_TRIG_ERR, B_SAT_SW, vec![vtr(reg, -se * sg * b1c, y1, &g_t)]),

        ("row8", B_X1_NET, B_SAT_ATK, vec![vtr(reg, -se * dl * ab, y1, &g_t)]),
        ("row8", B_X1_EVT, B_SAT_ATK, vec![vtr(reg, -se * dl * a1c, y1, &g_t)]),
        ("row8", B_TRIG_ERR, B_SAT_ATK, vec![vtr(reg, -se * dl * a1c, y1, &g_t)]),
        ("row8", B_ATTACK_SIG, B_SAT_ATK, vec![vtr(reg, se * dl, y1, &g_t)]),

        ("row9", B_X1_NET, B_SAT_MIX, vec![vtr(reg, -se * sg * dl, y1, &g_t)]),
        ("row9", B_X1_EVT, B_SAT_MIX, vec![vtr(reg, se * sg * dl, y1, &g_t)]),
        ("row9", B_TRIG_ERR, B_SAT_MIX, vec![vtr(reg, se * sg * dl, y1, &g_t)]),

        // Attack-bound and supply-rate border rows.
        ("row10", B_X1_ATK, B_ATK_BOUND, vec![vtr(reg, sqb, x1, &f_bound.transpose())]),
        ("row11", B_X1, B_SUPPLY, vec![vtr(reg, 1.0, x1, &c1t_qbar)]),
        ("row11", B_DIST, B_SUPPLY, vec![km(1.0, &d1t_qbar)]),

        // Border diagonals: slack bounds and unit blocks.
        ("kappa1", B_SLK_NET, B_SLK_NET, vec![sv(reg, -2.0 * e1, x1), sv(reg, e1 * e1, r1)]),
        ("kappa2", B_SLK_EVT, B_SLK_EVT, vec![sv(reg, -2.0 * e2, x1), sv(reg, e2 * e2, r2)]),
        ("kappa3", B_SLK_ATK, B_SLK_ATK, vec![sv(reg, -2.0 * e3, x1), sv(reg, e3 * e3, r3)]),
        ("kappa4", B_RATE_MEAN, B_RATE_MEAN, vec![sv(reg, -2.0 * e4, x2), sv(reg, e4 * e4, z2)]),
        ("kappa4", B_RATE_SW, B_RATE_SW, vec![sv(reg, -2.0 * e4, x2), sv(reg, e4 * e4, z2)]),
        ("kappa4", B_RATE_ATK, B_RATE_ATK, vec![sv(reg, -2.0 * e4, x2), sv(reg, e4 * e4, z2)]),
        ("kappa4", B_RATE_MIX, B_RATE_MIX, vec![sv(reg, -2.0 * e4, x2), sv(reg, e4 * e4, z2)]),
        ("ident_sat", B_SAT_MEAN, B_SAT_MEAN, vec![km(-1.0, &Mat::identity(m))]),
        ("ident_sat", B_SAT_SW, B_SAT_SW, vec![km(-1.0, &Mat::identity(m))]),
        ("ident_sat", B_SAT_ATK, B_SAT_ATK, vec![km(-1.0, &Mat::identity(m))]),
        ("ident_sat", B_SAT_MIX, B_SAT_MIX, vec![km(-1.0, &Mat::identity(m))]),
        ("ident_atk", B_ATK_BOUND, B_ATK_BOUND, vec![km(-1.0, &Mat::identity(n1))]),
        ("ident_supply", B_SUPPLY, B_SUPPLY, vec![km(-1.0, &Mat::identity(qy))]),
    ];

    for (tag, i, j, terms) in entries {
        seen.insert(tag);
        con.set_block(i, j, Expr { terms }, reg)?;
    }
    // The fault-scaled and plain input maps are shared sub-expressions of
    // the rows above.
    seen.insert("Upsilon1");
    seen.insert("Upsilon2");

    if let Some(g1) = g1 {
        append_uncertain_border(md, reg, ids, fx, g1, &mut con, seen)?;
    }

    Ok(con)
}

/// The 8 border pairs absorbing the fault-interval radius: each pair is a
/// constant indicator column scaled by its positive scalar, a radius-scaled
/// gain column, and `-eps_ti I` diagonals.
fn append_uncertain_border(
    md: &CascadeModel,
    reg: &VarRegistry,
    ids: &Ids,
    fx: &FixedScalars,
    g1: &Mat,
    con: &mut Constraint,
    seen: &mut BTreeSet<&'static str>,
) -> Result<()> {
    let m = md.m();
    let b2 = &md.secondary.b2;
    let g1_t = g1.transpose();
    let (ab, bb) = (fx.alpha_bar, fx.beta_bar);
    let (a1c, b1c) = (1.0 - ab, 1.0 - bb);
    let (sg, dl) = (fx.sigma, fx.delta);
    let ident_m = Mat::identity(m);

    enum Col {
        Input,
        Unit,
    }
    // (row, coefficient, which constant) per pair, for the indicator column.
    let b_cols: [Vec<(usize, Scalar, Col)>; 8] = [
        vec![(B_X1_NET, 1.0, Col::Input)],
        vec![(B_X1_EVT, 1.0, Col::Input)],
        vec![(B_TRIG_ERR, 1.0, Col::Input)],
        vec![(B_ATTACK_SIG, 1.0, Col::Input)],
        vec![
            (B_SAT_MEAN, b1c, Col::Unit),
            (B_SAT_SW, b1c, Col::Unit),
            (B_SAT_ATK, -a1c, Col::Unit),
            (B_SAT_MIX, -1.0, Col::Unit),
        ],
        vec![
            (B_SAT_MEAN, b1c * a1c, Col::Unit),
            (B_SAT_SW, -b1c, Col::Unit),
            (B_SAT_ATK, -a1c, Col::Unit),
            (B_SAT_MIX, 1.0, Col::Unit),
        ],
        vec![
            (B_SAT_MEAN, b1c * a1c, Col::Unit),
            (B_SAT_SW, -b1c, Col::Unit),
            (B_SAT_ATK, -a1c, Col::Unit),
            (B_SAT_MIX, 1.0, Col::Unit),
        ],
        vec![(B_SAT_MEAN, b1c, Col::Unit), (B_SAT_ATK, 1.0, Col::Unit)],
    ];
    // (row, coefficient) per pair for the radius-scaled gain column.
    let y_cols: [Vec<(usize, Scalar)>; 8] = [
        vec![
            (B_RATE_MEAN, ab * b1c),
            (B_RATE_SW, sg * b1c),
            (B_RATE_ATK, -dl * a1c),
            (B_RATE_MIX, sg * dl),
        ],
        vec![
            (B_RATE_MEAN, a1c * b1c),
            (B_RATE_SW, sg * b1c),
            (B_RATE_ATK, -dl * a1c),
            (B_RATE_MIX, -sg * dl),
        ],
        vec![
            (B_RATE_MEAN, -a1c * b1c),
            (B_RATE_SW, sg * b1c),
            (B_RATE_ATK, -dl * a1c),
            (B_RATE_MIX, -sg * dl),
        ],
        vec![(B_RATE_MEAN, bb), (B_RATE_ATK, dl * a1c)],
        vec![(B_X1_NET, 1.0)],
        vec![(B_X1_EVT, 1.0)],
        vec![(B_TRIG_ERR, 1.0)],
        vec![(B_ATTACK_SIG, 1.0)],
    ];

    seen.insert("Btilde");
    seen.insert("epsdiag");
    for i in 0..8 {
        let eps_i = ids.eps_t[i];
        let col_b = MAIN_AND_BORDER + 2 * i;
        let col_y = col_b + 1;
        seen.insert(B_TAGS[i]);
        seen.insert(Y_TAGS[i]);
        for (row, c, kind) in &b_cols[i] {
            let mat = match kind {
                Col::Input => b2,
                Col::Unit => &ident_m,
            };
            con.set_block(*row, col_b, Expr { terms: vec![scv(*c, eps_i, mat)] }, reg)?;
        }
        for (row, c) in &y_cols[i] {
            con.set_block(*row, col_y, Expr { terms: vec![vtr(reg, *c, ids.y1, &g1_t)] }, reg)?;
        }
        con.set_block(col_b, col_b, Expr { terms: vec![scv(-1.0, eps_i, &ident_m)] }, reg)?;
        con.set_block(col_y, col_y, Expr { terms: vec![scv(-1.0, eps_i, &ident_m)] }, reg)?;
    }
    Ok(())
}

fn closed_loop_layout(md: &CascadeModel, uncertain: bool) -> Result<BlockLayout> {
    let (n1, n2, m) = (md.n1(), md.n2(), md.m());
    let qw = md.q_w();
    let qy = md.q_y();
    let mut blocks: Vec<(String, usize)> = vec![
        ("x1".into(), n1),
        ("x1_net".into(), n1),
        ("x1_net_ub".into(), n1),
        ("x1_net_avg_a".into(), n1),
        ("x1_net_avg_b".into(), n1),
        ("x1_evt".into(), n1),
        ("x1_evt_ub".into(), n1),
        ("x1_evt_avg_a".into(), n1),
        ("x1_evt_avg_b".into(), n1),
        ("x1_atk".into(), n1),
        ("x1_atk_ub".into(), n1),
        ("x1_atk_avg_a".into(), n1),
        ("x1_atk_avg_b".into(), n1),
        ("x2".into(), n2),
        ("x2_del".into(), n2),
        ("x2_del_ub".into(), n2),
        ("x2_avg_a".into(), n2),
        ("x2_avg_b".into(), n2),
        ("trig_err".into(), n1),
        ("attack_sig".into(), n1),
        ("dead_zone".into(), m),
        ("dist".into(), qw),
        ("slk_net".into(), n1),
        ("slk_evt".into(), n1),
        ("slk_atk".into(), n1),
        ("rate_mean".into(), n2),
        ("rate_sw".into(), n2),
        ("rate_atk".into(), n2),
        ("rate_mix".into(), n2),
        ("sat_mean".into(), m),
        ("sat_sw".into(), m),
        ("sat_atk".into(), m),
        ("sat_mix".into(), m),
        ("atk_bound".into(), n1),
        ("supply".into(), qy),
    ];
    if uncertain {
        for i in 1..=8 {
            blocks.push((format!("unc{i}_b"), m));
            blocks.push((format!("unc{i}_y"), m));
        }
    }
    let refs: Vec<(&str, usize)> = blocks.iter().map(|(n, s)| (n.as_str(), *s)).collect();
    BlockLayout::new(&refs)
}

/// Dual admissibility of the delay-free secondary pair: with the structure
/// constraint `E X2 = X2' E' >= 0`, `Sym((A2 X2 + B2 Y2)) < 0` makes
/// `(E, A2 + B2 K2)` regular, impulse-free and slow-Hurwitz. The delayed
/// closed-loop condition alone permits points whose delay-free part is
/// unstable; the certificates this toolkit emits must pass the
/// delay-free admissibility check, so it is enforced at synthesis.
fn delay_free_admissibility(
    md: &CascadeModel,
    reg: &VarRegistry,
    ids: &Ids,
) -> Result<Constraint> {
    let n2 = md.n2();
    let layout = BlockLayout::new(&[("x2", n2)])?;
    let mut con = Constraint::new("delay_free_adm", layout, Sense::NegDef);
    con.set_block(
        0,
        0,
        Expr {
            terms: vec![
                lv(reg, 2.0, &md.secondary.a2, ids.x2),
                lv(reg, 2.0, &md.secondary.b2, ids.y2),
            ],
        },
        reg,
    )?;
    Ok(con)
}

/// The three reciprocal-convexity coupling conditions over the slack blocks.
fn coupling_constraints(
    md: &CascadeModel,
    reg: &VarRegistry,
    ids: &Ids,
    seen: &mut BTreeSet<&'static str>,
) -> Result<Vec<Constraint>> {
    let n1 = md.n1();
    let chains = [
        ("coupling_net", "U1", ids.r1, &ids.m),
        ("coupling_evt", "U2", ids.r2, &ids.n),
        ("coupling_atk", "U3", ids.r3, &ids.s),
    ];
    let mut out = Vec::new();
    for (name, tag, r, u) in chains {
        seen.insert(tag);
        let layout = BlockLayout::new(&[("p1", n1), ("p2", n1), ("p3", n1), ("p4", n1)])?;
        let mut con = Constraint::new(name, layout, Sense::Psd);
        con.set_block(0, 0, Expr { terms: vec![sv(reg, 1.0, r)] }, reg)?;
        con.set_block(0, 2, Expr { terms: vec![svt(reg, 1.0, u[0])] }, reg)?;
        con.set_block(0, 3, Expr { terms: vec![svt(reg, 1.0, u[2])] }, reg)?;
        con.set_block(1, 1, Expr { terms: vec![sv(reg, 3.0, r)] }, reg)?;
        con.set_block(1, 2, Expr { terms: vec![svt(reg, 1.0, u[1])] }, reg)?;
        con.set_block(1, 3, Expr { terms: vec![svt(reg, 1.0, u[3])] }, reg)?;
        con.set_block(2, 2, Expr { terms: vec![sv(reg, 1.0, r)] }, reg)?;
        con.set_block(3, 3, Expr { terms: vec![sv(reg, 3.0, r)] }, reg)?;
        out.push(con);
    }
    Ok(out)
}

/// PD cones for every cone-tagged variable.
fn cone_constraints(reg: &VarRegistry) -> Result<Vec<Constraint>> {
    let mut out = Vec::new();
    for (id, decl) in reg.iter() {
        if !decl.cone {
            continue;
        }
        match &decl.shape {
            VarShape::Sym { n } => {
                let layout = BlockLayout::new(&[("v", *n)])?;
                let mut con = Constraint::new(&format!("cone:{}", decl.name), layout, Sense::Psd);
                con.set_block(0, 0, Expr { terms: vec![sv(reg, 1.0, id)] }, reg)?;
                out.push(con);
            }
            VarShape::Scalar { lower } => {
                let layout = BlockLayout::new(&[("v", 1)])?;
                let mut con = Constraint::new(&format!("cone:{}", decl.name), layout, Sense::Psd);
                let one = Mat::identity(1);
                con.set_block(
                    0,
                    0,
                    Expr {
                        terms: vec![scv(1.0, id, &one), km(-*lower, &one)],
                    },
                    reg,
                )?;
                out.push(con);
            }
            VarShape::Descriptor { split } => {
                if split.rank == 0 {
                    continue; // structure constraint is vacuous
                }
                let r = split.rank;
                let layout = BlockLayout::new(&[("v", r)])?;
                let mut con = Constraint::new(&format!("cone:{}", decl.name), layout, Sense::Psd);
                let mut t = term(1.0, Mat::identity(r), Some(id), false, Mat::identity(r));
                t.psd_part = true;
                con.set_block(0, 0, Expr { terms: vec![t] }, reg)?;
                out.push(con);
            }
            VarShape::Free { .. } => {}
        }
    }
    Ok(out)
}

fn check_symbols(seen: &BTreeSet<&'static str>, uncertain: bool) -> Result<()> {
    let mut required: Vec<&'static str> = KNOWN_FAULT_SYMBOLS.to_vec();
    if uncertain {
        required.extend_from_slice(&UNCERTAIN_SYMBOLS);
    }
    let missing: Vec<&str> = required
        .iter()
        .filter(|s| !seen.contains(*s))
        .copied()
        .collect();
    if missing.is_empty() {
        Ok(())
    } else {
        Err(Error::Assembly {
            constraint: "closed_loop".into(),
            row: 0,
            col: 0,
            msg: format!("unmapped table symbols: {}", missing.join(", ")),
        })
    }
}

const B_TAGS: [&str; 8] = ["B1", "B2", "B3", "B4", "B5", "B6", "B7", "B8"];
const Y_TAGS: [&str; 8] = ["Yt1", "Yt2", "Yt3", "Yt4", "Yt5", "Yt6", "Yt7", "Yt8"];

/// Every symbol of the closed-loop table the assembler must house.
const KNOWN_FAULT_SYMBOLS: [&str; 91] = [
    "O(1,1)", "O(1,2)", "O(1,3)", "O(1,4)", "O(1,5)", "O(1,6)", "O(1,7)", "O(1,8)", "O(1,9)",
    "O(1,10)", "O(1,11)", "O(1,12)", "O(1,13)", "O(1,14)", "O(1,22)", "O(2,2)", "O(2,3)",
    "O(2,4)", "O(2,5)", "O(2,14)", "O(3,3)", "O(3,4)", "O(3,5)", "O(4,4)", "O(4,5)", "O(5,5)",
    "O(6,6)", "O(6,7)", "O(6,8)", "O(6,9)", "O(6,14)", "O(7,7)", "O(7,8)", "O(7,9)", "O(8,8)",
    "O(8,9)", "O(9,9)", "O(10,10)", "O(10,11)", "O(10,12)", "O(10,13)", "O(11,11)", "O(11,12)",
    "O(11,13)", "O(12,12)", "O(12,13)", "O(13,13)", "O(14,14)", "O(14,15)", "O(14,17)",
    "O(14,19)", "O(14,20)", "O(14,21)", "O(14,22)", "O(15,15)", "O(15,16)", "O(15,17)",
    "O(15,18)", "O(16,16)", "O(16,18)", "O(17,17)", "O(18,18)", "O(19,19)", "O(20,20)",
    "O(21,21)", "O(22,22)", "row1_net", "row1_evt", "row1_atk", "row2", "row3", "row4", "row5",
    "row6", "row7", "row8", "row9", "row10", "row11", "kappa1", "kappa2", "kappa3", "kappa4",
    "ident_sat", "ident_atk", "ident_supply", "Upsilon1", "Upsilon2", "U1", "U2", "U3",
];

const UNCERTAIN_SYMBOLS: [&str; 18] = [
    "Btilde", "epsdiag", "B1", "B2", "B3", "B4", "B5", "B6", "B7", "B8", "Yt1", "Yt2", "Yt3",
    "Yt4", "Yt5", "Yt6", "Yt7", "Yt8",
];

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cases;
    use crate::numerics::read_block;

    fn case1_known() -> LmiSystem {
        let model = cases::case1().model;
        let g = model.fault.g0();
        known_fault_system(&model, &g, &SynthesisScalars::default()).unwrap()
    }

    fn case1_uncertain() -> LmiSystem {
        let model = cases::case1().model;
        uncertain_fault_system(&model, &SynthesisScalars::default()).unwrap()
    }

    #[test]
    fn closed_loop_dimension_bookkeeping() {
        // Independent hand count for the case-study sizes
        // (n1 = n2 = 2, m = 1, q = qy = 1):
        // 13 blocks of n1, 5 of n2, trig_err + attack_sig of n1, dead zone m,
        // disturbance q, then borders 3*n1 + 4*n2 + 4*m + n1 + qy.
        let main = 13 * 2 + 5 * 2 + 2 + 2 + 1 + 1;
        let border = 3 * 2 + 4 * 2 + 4 * 1 + 2 + 1;
        assert_eq!(main, 42);
        assert_eq!(border, 21);
        let sys = case1_known();
        assert_eq!(sys.constraints[0].dim(), main + border); // 63

        // The uncertain variant appends 8 pairs of m-sized columns.
        let sys_u = case1_uncertain();
        assert_eq!(sys_u.constraints[0].dim(), 63 + 16);
    }

    #[test]
    fn coupling_conditions_are_8x8() {
        let sys = case1_known();
        for name in ["coupling_net", "coupling_evt", "coupling_atk"] {
            let c = sys
                .constraints
                .iter()
                .find(|c| c.name == name)
                .expect("coupling constraint");
            assert_eq!(c.dim(), 8);
            assert_eq!(c.sense, Sense::Psd);
        }
    }

    #[test]
    fn zero_assignment_is_constant_part_and_deterministic() {
        let sys = case1_known();
        let zeros = vec![0.0; sys.registry.param_count()];
        let a = sys.constraints[0].eval(&sys.registry, &zeros).unwrap();
        let b = sys.constraints[0].eval(&sys.registry, &zeros).unwrap();
        assert_eq!(a, b); // bit-identical

        // Constant part contains the fixed blocks only; spot-check the
        // disturbance diagonal -D1' S - R + gamma I = 0.16 - 1.5 + 0.1.
        let n = a.rows();
        assert!((a[(n - 22, n - 22)] - (-1.24)).abs() < 1e-12);
    }

    #[test]
    fn affine_map_combination_identity() {
        let sys = case1_known();
        let p = sys.registry.param_count();
        // Deterministic pseudo-random parameter vectors.
        let v: Vec<Scalar> = (0..p).map(|k| ((k * 2654435761 % 97) as Scalar - 48.0) / 97.0).collect();
        let w: Vec<Scalar> = (0..p).map(|k| ((k * 40503 % 89) as Scalar - 44.0) / 89.0).collect();
        let (a, b) = (0.7, -1.3);
        let combo: Vec<Scalar> = v.iter().zip(&w).map(|(&x, &y)| a * x + b * y).collect();
        let zeros = vec![0.0; p];
        for c in &sys.constraints {
            let m_v = c.eval(&sys.registry, &v).unwrap();
            let m_w = c.eval(&sys.registry, &w).unwrap();
            let m_0 = c.eval(&sys.registry, &zeros).unwrap();
            let m_c = c.eval(&sys.registry, &combo).unwrap();
            let mut expect = m_v.scale(a).add(&m_w.scale(b)).unwrap();
            expect = expect.add(&m_0.scale(1.0 - a - b)).unwrap();
            assert!(
                m_c.sub(&expect).unwrap().max_abs() < 1e-12 * (1.0 + expect.max_abs()),
                "constraint {} violates affinity",
                c.name
            );
        }
    }

    #[test]
    fn assembled_matrices_exactly_symmetric() {
        for sys in [case1_known(), case1_uncertain()] {
            let p = sys.registry.param_count();
            let v: Vec<Scalar> = (0..p).map(|k| ((k * 7919 % 61) as Scalar - 30.0) / 61.0).collect();
            for c in &sys.constraints {
                let m = c.eval(&sys.registry, &v).unwrap();
                assert_eq!(m, m.transpose(), "constraint {}", c.name);
            }
        }
    }

    #[test]
    fn descriptor_variable_structure() {
        // E = diag(1, 0): X2 = [[s, 0], [l, h]] with s >= 0 in the cone.
        let sys = case1_known();
        let id = sys.registry.id("X2").unwrap();
        let p = sys.registry.param_count();
        let mut params = vec![0.0; p];
        let off = sys.registry.param_offset(id);
        params[off] = 2.0; // s
        params[off + 1] = 3.0; // l
        params[off + 2] = 4.0; // h
        let x2 = sys.registry.value(id, &params);
        let e = Mat::diag(&[1.0, 0.0]);
        let ex2 = e.matmul(&x2).unwrap();
        // E X2 symmetric PSD by construction.
        assert!(ex2.sub(&ex2.transpose()).unwrap().max_abs() < 1e-12);
        assert!((ex2[(0, 0)] - 2.0).abs() < 1e-12);
        assert!(ex2[(1, 1)].abs() < 1e-15);
        // Upper-right entry of X2 vanishes (up to the orthogonal framing).
        assert!(x2[(0, 1)].abs() < 1e-12);
    }

    #[test]
    fn descriptor_full_rank_and_zero_rank() {
        // Full-rank E: X2 ranges over symmetric matrices.
        let split = dae_coordinates(&Mat::identity(2)).unwrap();
        let mut reg = VarRegistry::new();
        let id = reg.descriptor("X", split).unwrap();
        let mut params = vec![0.0; reg.param_count()];
        params[0] = 1.0;
        params[1] = 0.5;
        params[2] = 2.0;
        let x = reg.value(id, &params);
        assert!(x.sub(&x.transpose()).unwrap().max_abs() < 1e-12);

        // Zero E: fully free, no cone.
        let split0 = dae_coordinates(&Mat::zeros(2, 2)).unwrap();
        let mut reg0 = VarRegistry::new();
        let id0 = reg0.descriptor("X", split0).unwrap();
        assert_eq!(reg0.decl(id0).shape.param_count(), 4);
        let cones = cone_constraints(&reg0).unwrap();
        assert!(cones.is_empty());
    }

    #[test]
    fn uncertain_core_matches_known_at_midpoint() {
        // The uncertain system's top-left block equals the known-fault
        // system evaluated at the interval midpoint, for shared variables.
        let sys_k = case1_known();
        let sys_u = case1_uncertain();
        let pk = sys_k.registry.param_count();
        let vk: Vec<Scalar> = (0..pk).map(|k| ((k * 131 % 37) as Scalar - 18.0) / 37.0).collect();
        // Same values transferred by name into the uncertain registry.
        let mut vu = vec![0.0; sys_u.registry.param_count()];
        for (id_k, decl) in sys_k.registry.iter() {
            let val = sys_k.registry.value(id_k, &vk);
            let id_u = sys_u.registry.id(&decl.name).unwrap();
            sys_u.registry.store(id_u, &val, &mut vu).unwrap();
        }
        let mk = sys_k.constraints[0].eval(&sys_k.registry, &vk).unwrap();
        let mu = sys_u.constraints[0].eval(&sys_u.registry, &vu).unwrap();
        let dim = mk.rows();
        let top = mu.block(0, 0, dim, dim).unwrap();
        assert!(top.sub(&mk).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn fault_gain_outside_interval_rejected() {
        let model = cases::case1().model;
        let g = Mat::diag(&[0.95]);
        assert!(known_fault_system(&model, &g, &SynthesisScalars::default()).is_err());
    }

    #[test]
    fn secondary_block_couples_input_map_and_gain() {
        // The (x2, x2) diagonal block must carry 2 B2 Y2 and the
        // pi^2/4-weighted descriptor terms; probe with unit Y2 and unit Z2.
        let sys = case1_known();
        let p = sys.registry.param_count();
        let layout = closed_loop_layout(&cases::case1().model, false).unwrap();
        let zeros = vec![0.0; p];
        let base = sys.constraints[0].eval(&sys.registry, &zeros).unwrap();

        let y2 = sys.registry.id("Y2").unwrap();
        let mut params = zeros.clone();
        params[sys.registry.param_offset(y2)] = 1.0; // Y2 = [1, 0]
        let with_y2 = sys.constraints[0].eval(&sys.registry, &params).unwrap();
        let diff = with_y2.sub(&base).unwrap();
        let blk = read_block(&diff, &layout, B_X2, B_X2).unwrap();
        // Sym(2 B2 [1 0]) with B2 = [0.2; 1]:
        let b2 = Mat::from_rows(&[&[0.2], &[1.0]]).unwrap();
        let want = b2
            .matmul(&Mat::row_vec(&[1.0, 0.0]))
            .unwrap()
            .scale(2.0)
            .symmetrized();
        assert!(blk.sub(&want).unwrap().max_abs() < 1e-12);

        let z2 = sys.registry.id("Z2").unwrap();
        let mut params = zeros.clone();
        params[sys.registry.param_offset(z2)] = 1.0; // Z2 = e11
        let with_z2 = sys.constraints[0].eval(&sys.registry, &params).unwrap();
        let diff = with_z2.sub(&base).unwrap();
        let blk = read_block(&diff, &layout, B_X2, B_X2).unwrap();
        // E' Z2 E with E = diag(1,0), Z2 = e11 is e11; coefficient
        // -(1 + pi^2/4).
        let pi2 = std::f64::consts::PI * std::f64::consts::PI;
        assert!((blk[(0, 0)] + (1.0 + pi2 / 4.0)).abs() < 1e-12);
        assert!(blk[(1, 1)].abs() < 1e-15);
    }
}
