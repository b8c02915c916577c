//! The three shipped case-study presets for the power-plant
//! boiler-turbine benchmark: mixed, time-only, and event-only triggering.

use crate::model::{
    AttackConfig, CascadeModel, DelayBounds, DissipativityTriple, FaultModel, PrimaryPlant,
    SecondaryPlant, TriggerConfig,
};
use crate::sim::{AttackSpec, DelaySpecs, Scenario, SignalSpec};
use crate::Mat;

#[derive(Debug, Clone)]
pub struct CasePreset {
    pub name: &'static str,
    pub model: CascadeModel,
    pub scenario: Scenario,
}

fn boiler_turbine_model(alpha_bar: f64, h: f64) -> CascadeModel {
    CascadeModel {
        primary: PrimaryPlant {
            a1: Mat::from_rows(&[&[-1.0, 0.0], &[-1.0, -2.0]]).expect("literal"),
            b1: Mat::from_rows(&[&[0.2], &[0.1]]).expect("literal"),
            c1: Mat::from_rows(&[&[0.0, 0.1]]).expect("literal"),
            d1: Mat::from_rows(&[&[0.2]]).expect("literal"),
        },
        secondary: SecondaryPlant {
            e: Mat::from_rows(&[&[1.0, 0.0], &[0.0, 0.0]]).expect("literal"),
            a2: Mat::from_rows(&[&[1.3, 1.0], &[0.2, 0.0]]).expect("literal"),
            a3: Mat::from_rows(&[&[0.2, 0.1], &[0.2, 1.0]]).expect("literal"),
            b2: Mat::from_rows(&[&[0.2], &[1.0]]).expect("literal"),
            b3: Mat::from_rows(&[&[-0.4], &[0.1]]).expect("literal"),
            c2: Mat::from_rows(&[&[-0.3, 0.1]]).expect("literal"),
            d2: Mat::from_rows(&[&[0.1]]).expect("literal"),
            xi: vec![50.0],
            epsilon: 0.2,
        },
        delays: DelayBounds {
            zeta2: 0.5,
            d2: 0.5,
            tau2: 0.5,
            theta_bar: 0.5,
            lambda: 0.05,
        },
        trigger: TriggerConfig {
            h,
            mu: 0.16,
            alpha_bar,
        },
        attack: AttackConfig {
            beta_bar: 0.02,
            f: Mat::diag(&[0.02, 0.1]),
        },
        fault: FaultModel {
            g_lower: vec![0.6],
            g_upper: vec![0.8],
            g_known: None,
        },
        dissipativity: DissipativityTriple {
            q: Mat::from_rows(&[&[-0.8]]).expect("literal"),
            s: Mat::from_rows(&[&[-0.8]]).expect("literal"),
            r: Mat::from_rows(&[&[1.5]]).expect("literal"),
            gamma: 0.1,
        },
    }
}

fn base_scenario() -> Scenario {
    Scenario {
        x1_0: vec![-5.5, -2.5],
        phi: SignalSpec::Constant {
            value: vec![6.0, -12.96],
        },
        w: SignalSpec::SinUntil { t_end: 5.0 },
        attack: AttackSpec::NegTanh {
            gains: vec![0.02, 0.1],
        },
        delays: DelaySpecs::default(),
        fault_realized: None,
        seed: 7,
        horizon: 15.0,
        step: 1e-3,
    }
}

/// Mixed triggering (switch probability 0.25), sampling period 0.1 s.
pub fn case1() -> CasePreset {
    CasePreset {
        name: "case1",
        model: boiler_turbine_model(0.25, 0.1),
        scenario: base_scenario(),
    }
}

/// Pure time triggering, sampling period 0.01 s.
pub fn case2() -> CasePreset {
    CasePreset {
        name: "case2",
        model: boiler_turbine_model(1.0, 0.01),
        scenario: base_scenario(),
    }
}

/// Pure event triggering, sampling period 0.1 s.
pub fn case3() -> CasePreset {
    CasePreset {
        name: "case3",
        model: boiler_turbine_model(0.0, 0.1),
        scenario: base_scenario(),
    }
}

pub fn by_name(name: &str) -> Option<CasePreset> {
    match name {
        "case1" => Some(case1()),
        "case2" => Some(case2()),
        "case3" => Some(case3()),
        _ => None,
    }
}

/// A gain set known to stabilize the case-study plant (used by tests and
/// the verification suite as a fixed reference point).
pub fn reference_gains_case1() -> (Mat, Mat, Mat) {
    let k1 = Mat::row_vec(&[-0.2030e-3, 0.4837e-3]);
    let k2 = Mat::row_vec(&[-3.8497, -2.4732]);
    let w = Mat::from_rows(&[&[3.9551, 0.2531], &[0.2531, 5.0434]]).expect("literal");
    (k1, k2, w)
}
