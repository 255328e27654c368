//! Controller stack: step-and-search MPPT, the boost voltage loop, the
//! DC-link loop, grid current references and the hysteresis comparators.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MpptConfig {
    /// When false the reference is frozen at its initial value.
    pub enabled: bool,
    /// Fixed perturbation step ΔV, V.
    pub delta_v: f64,
    pub v_ref_min: f64,
    pub v_ref_max: f64,
    /// Starting reference. `None` starts from the rectifier no-load voltage.
    pub v_ref_init: Option<f64>,
    /// Length of the averaging window that ends at each decision, s.
    pub measure_window: f64,
    pub adaptive: bool,
    /// Adaptive step gain on |ΔP/ΔV|, V²/W.
    pub step_gain: f64,
    pub step_min: f64,
    pub step_max: f64,
}

impl Default for MpptConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            delta_v: 4.0,
            v_ref_min: 40.0,
            v_ref_max: 360.0,
            v_ref_init: None,
            measure_window: 0.02,
            adaptive: false,
            step_gain: 0.05,
            step_min: 1.0,
            step_max: 12.0,
        }
    }
}

/// Which of the four step-and-search cases fired.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MpptRule {
    /// ΔP ≥ 0, ΔV ≥ 0: climbing from the low-speed side, raise the reference.
    LowSpeedRise,
    /// ΔP ≥ 0, ΔV < 0: climbing from the high-speed side, lower it.
    HighSpeedFall,
    /// ΔP < 0, ΔV ≥ 0: the peak was passed, step back.
    StepBack,
    /// ΔP < 0, ΔV < 0: falling on the low-speed side, raise it.
    LowSpeedRecover,
}

impl MpptRule {
    /// Classifies a pair of increments. Zero counts as non-negative.
    pub fn classify(dp: f64, dv: f64) -> Self {
        match (dp >= 0.0, dv >= 0.0) {
            (true, true) => MpptRule::LowSpeedRise,
            (true, false) => MpptRule::HighSpeedFall,
            (false, true) => MpptRule::StepBack,
            (false, false) => MpptRule::LowSpeedRecover,
        }
    }

    /// +1 raises the voltage reference, −1 lowers it.
    pub fn direction(self) -> f64 {
        match self {
            MpptRule::LowSpeedRise | MpptRule::LowSpeedRecover => 1.0,
            MpptRule::HighSpeedFall | MpptRule::StepBack => -1.0,
        }
    }

    pub fn number(self) -> u8 {
        match self {
            MpptRule::LowSpeedRise => 1,
            MpptRule::HighSpeedFall => 2,
            MpptRule::StepBack => 3,
            MpptRule::LowSpeedRecover => 4,
        }
    }
}

impl fmt::Display for MpptRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            MpptRule::LowSpeedRise => "low_speed_rise",
            MpptRule::HighSpeedFall => "high_speed_fall",
            MpptRule::StepBack => "step_back",
            MpptRule::LowSpeedRecover => "low_speed_recover",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MpptState {
    /// Power measured at the previous decision, W.
    pub p_prev: f64,
    /// Rectifier-side voltage measured at the previous decision, V.
    pub v_prev: f64,
    pub v_ref: f64,
}

impl MpptState {
    pub fn new(v_ref: f64, cfg: &MpptConfig) -> Self {
        let v_ref = v_ref.clamp(cfg.v_ref_min, cfg.v_ref_max);
        Self {
            p_prev: 0.0,
            v_prev: v_ref,
            v_ref,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MpptDecision {
    pub rule: MpptRule,
    /// Step magnitude applied before clamping, V.
    pub step: f64,
    pub state: MpptState,
}

fn apply_rule(p_k: f64, v_meas: f64, state: &MpptState, step: f64, rule: MpptRule, cfg: &MpptConfig) -> MpptDecision {
    let v_ref = (state.v_ref + rule.direction() * step).clamp(cfg.v_ref_min, cfg.v_ref_max);
    MpptDecision {
        rule,
        step,
        state: MpptState {
            p_prev: p_k,
            v_prev: v_meas,
            v_ref,
        },
    }
}

/// One fixed-step perturb-and-observe decision.
pub fn mppt_step(p_k: f64, v_meas: f64, state: &MpptState, cfg: &MpptConfig) -> MpptDecision {
    let rule = MpptRule::classify(p_k - state.p_prev, v_meas - state.v_prev);
    apply_rule(p_k, v_meas, state, cfg.delta_v, rule, cfg)
}

/// Variable-step decision: the step follows the local slope |ΔP/ΔV|.
pub fn mppt_adaptive_step(p_k: f64, v_meas: f64, state: &MpptState, cfg: &MpptConfig) -> MpptDecision {
    let dp = p_k - state.p_prev;
    let dv = v_meas - state.v_prev;
    let rule = MpptRule::classify(dp, dv);
    let step = if dv.abs() < 1e-6 {
        cfg.step_min
    } else {
        (cfg.step_gain * (dp / dv).abs()).clamp(cfg.step_min, cfg.step_max)
    };
    apply_rule(p_k, v_meas, state, step, rule, cfg)
}

/// Dispatches on `cfg.adaptive`.
pub fn mppt_decide(p_k: f64, v_meas: f64, state: &MpptState, cfg: &MpptConfig) -> MpptDecision {
    if cfg.adaptive {
        mppt_adaptive_step(p_k, v_meas, state, cfg)
    } else {
        mppt_step(p_k, v_meas, state, cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PiConfig {
    pub kp: f64,
    pub ki: f64,
    pub out_min: f64,
    pub out_max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PiState {
    pub integrator: f64,
}

/// PI step with conditional integration: the integrator only moves while the
/// output is inside its bounds.
pub fn pi_update(error: f64, state: &mut PiState, cfg: &PiConfig, dt: f64) -> f64 {
    let raw = cfg.kp * error + state.integrator;
    let out = raw.clamp(cfg.out_min, cfg.out_max);
    if out == raw {
        state.integrator += cfg.ki * error * dt;
    }
    out
}

/// Boost duty from the rectifier-side voltage loop.
///
/// The error is `v_wg − v_ref`: a higher duty pulls v_WG down by loading the
/// generator harder. The PI bounds must lie inside `[0, duty_max]`.
pub fn boost_duty_controller(v_wg: f64, v_ref: f64, state: &mut PiState, cfg: &PiConfig, dt: f64) -> f64 {
    pi_update(v_wg - v_ref, state, cfg, dt)
}

/// Grid current amplitude from the squared DC-link voltage error. A DC link
/// above its reference exports more current.
pub fn dclink_current_magnitude(v_o: f64, v_o_ref: f64, state: &mut PiState, cfg: &PiConfig, dt: f64) -> f64 {
    pi_update(v_o * v_o - v_o_ref * v_o_ref, state, cfg, dt).max(0.0)
}

/// Unity-power-factor current references, in phase with the grid EMF.
pub fn reference_currents(magnitude: f64, t: f64, frequency: f64) -> [f64; 3] {
    let theta = 2.0 * PI * frequency * t;
    [0.0, 1.0, 2.0].map(|k| magnitude * (theta - 2.0 * PI * k / 3.0).cos())
}

/// Derivative of [`reference_currents`] at constant magnitude.
pub fn reference_current_slopes(magnitude: f64, t: f64, frequency: f64) -> [f64; 3] {
    let w = 2.0 * PI * frequency;
    let theta = w * t;
    [0.0, 1.0, 2.0].map(|k| -magnitude * w * (theta - 2.0 * PI * k / 3.0).sin())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HysteresisConfig {
    /// Half-width of the tolerance band, A.
    pub band: f64,
}

impl Default for HysteresisConfig {
    fn default() -> Self {
        Self { band: 0.5 }
    }
}

/// Two-level comparator for one leg. `true` is the upper switch on.
pub fn hysteresis_leg(i_meas: f64, i_ref: f64, band: f64, prev: bool) -> bool {
    let err = i_meas - i_ref;
    if err >= band {
        false
    } else if err <= -band {
        true
    } else {
        prev
    }
}

pub fn hysteresis_comparator(i_meas: &[f64; 3], i_ref: &[f64; 3], band: f64, prev: [bool; 3]) -> [bool; 3] {
    [0, 1, 2].map(|k| hysteresis_leg(i_meas[k], i_ref[k], band, prev[k]))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlConfig {
    pub mppt: MpptConfig,
    pub boost_pi: PiConfig,
    pub dclink_pi: PiConfig,
    pub hysteresis: HysteresisConfig,
    /// DC-link voltage reference, V.
    pub v_o_ref: f64,
}

impl Default for ControlConfig {
    fn default() -> Self {
        Self {
            mppt: MpptConfig::default(),
            boost_pi: PiConfig {
                kp: 0.02,
                ki: 2.0,
                out_min: 0.0,
                out_max: 0.95,
            },
            dclink_pi: PiConfig {
                kp: 5e-4,
                ki: 0.05,
                out_min: 0.0,
                out_max: 100.0,
            },
            hysteresis: HysteresisConfig::default(),
            v_o_ref: 400.0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn state() -> MpptState {
        MpptState {
            p_prev: 1000.0,
            v_prev: 200.0,
            v_ref: 200.0,
        }
    }

    fn cfg() -> MpptConfig {
        MpptConfig {
            delta_v: 2.0,
            ..MpptConfig::default()
        }
    }

    #[test]
    fn four_quadrants() {
        let s = state();
        let c = cfg();
        let cases = [
            (5.0, 1.0, MpptRule::LowSpeedRise, 202.0),
            (5.0, -1.0, MpptRule::HighSpeedFall, 198.0),
            (-5.0, 1.0, MpptRule::StepBack, 198.0),
            (-5.0, -1.0, MpptRule::LowSpeedRecover, 202.0),
            (0.0, 0.0, MpptRule::LowSpeedRise, 202.0),
            (0.0, -1.0, MpptRule::HighSpeedFall, 198.0),
            (-5.0, 0.0, MpptRule::StepBack, 198.0),
        ];
        for (dp, dv, rule, v_ref) in cases {
            let d = mppt_step(s.p_prev + dp, s.v_prev + dv, &s, &c);
            assert_eq!(d.rule, rule, "dp={dp} dv={dv}");
            assert_eq!(d.state.v_ref, v_ref);
            assert_eq!(d.state.p_prev, s.p_prev + dp);
            assert_eq!(d.state.v_prev, s.v_prev + dv);
        }
    }

    #[test]
    fn reference_is_clamped() {
        let c = cfg();
        let s = MpptState {
            v_ref: c.v_ref_max - 0.5,
            ..state()
        };
        assert_eq!(mppt_step(2000.0, 201.0, &s, &c).state.v_ref, c.v_ref_max);
        let s = MpptState {
            v_ref: c.v_ref_min,
            ..state()
        };
        assert_eq!(mppt_step(2000.0, 199.0, &s, &c).state.v_ref, c.v_ref_min);
    }

    #[test]
    fn adaptive_step_bounds() {
        let c = MpptConfig {
            adaptive: true,
            ..MpptConfig::default()
        };
        let s = state();
        let huge = mppt_adaptive_step(1e6, 201.0, &s, &c);
        assert_eq!(huge.step, c.step_max);
        let flat = mppt_adaptive_step(1500.0, 200.0 + 1e-8, &s, &c);
        assert_eq!(flat.step, c.step_min);
        let mid = mppt_adaptive_step(1100.0, 201.0, &s, &c);
        assert!((mid.step - 0.05 * 100.0).abs() < 1e-9);
        assert_eq!(mid.rule, mppt_step(1100.0, 201.0, &s, &c).rule);
    }

    #[test]
    fn pi_contract() {
        let c = PiConfig {
            kp: 2.0,
            ki: 10.0,
            out_min: -1.0,
            out_max: 1.0,
        };
        let mut s = PiState::default();
        assert_eq!(pi_update(0.0, &mut s, &c, 1e-3), 0.0);
        let p_only = PiConfig { ki: 0.0, ..c.clone() };
        let mut s = PiState::default();
        assert_eq!(pi_update(0.3, &mut s, &p_only, 1e-3), 0.6);
        assert_eq!(pi_update(3.0, &mut s, &p_only, 1e-3), 1.0);
        let mut s = PiState { integrator: 0.2 };
        for _ in 0..100 {
            assert_eq!(pi_update(5.0, &mut s, &c, 1e-3), 1.0);
        }
        assert_eq!(s.integrator, 0.2);
        let mut s = PiState::default();
        pi_update(0.1, &mut s, &c, 1e-3);
        assert!((s.integrator - 1e-3).abs() < 1e-15);
    }

    #[test]
    fn boost_duty_sign() {
        let c = ControlConfig::default().boost_pi;
        let mut s = PiState { integrator: 0.4 };
        let d = boost_duty_controller(250.0, 250.0, &mut s, &c, 1e-4);
        assert_eq!(d, 0.4);
        assert_eq!(s.integrator, 0.4);
        let mut d = 0.0;
        for _ in 0..1000 {
            d = boost_duty_controller(350.0, 200.0, &mut s, &c, 1e-4);
        }
        assert_eq!(d, c.out_max);
    }

    #[test]
    fn dclink_sign() {
        let c = ControlConfig::default().dclink_pi;
        let mut s = PiState { integrator: 20.0 };
        assert_eq!(dclink_current_magnitude(400.0, 400.0, &mut s, &c, 1e-4), 20.0);
        let high = dclink_current_magnitude(410.0, 400.0, &mut s, &c, 1e-4);
        assert!(high > 20.0);
        let mut s = PiState::default();
        assert_eq!(dclink_current_magnitude(300.0, 400.0, &mut s, &c, 1e-4), 0.0);
    }

    #[test]
    fn reference_current_examples() {
        assert_eq!(reference_currents(0.0, 0.37, 50.0), [0.0; 3]);
        let r = reference_currents(12.0, 0.0123, 50.0);
        assert!((r[0] + r[1] + r[2]).abs() < 1e-12);
        // zero-lag alignment with the grid EMF
        let e = crate::power::grid_emf(0.0123, 163.0, 50.0);
        for k in 0..3 {
            assert!((r[k] / 12.0 - e[k] / 163.0).abs() < 1e-12);
        }
    }

    #[test]
    fn hysteresis_examples() {
        let h = 0.5;
        assert!(!hysteresis_leg(1.5 * h, 0.0, h, true));
        assert!(hysteresis_leg(-1.5 * h, 0.0, h, false));
        assert!(hysteresis_leg(0.0, 0.0, h, true));
        assert!(!hysteresis_leg(0.0, 0.0, h, false));
        assert!(!hysteresis_leg(10.0 + h, 10.0, h, true));
        assert_eq!(
            hysteresis_comparator(&[1.0, -1.0, 0.0], &[0.0; 3], h, [true, false, true]),
            [false, true, true]
        );
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn rule_depends_only_on_signs(dp in -1e4f64..1e4, dv in -50f64..50.0, scale in 0.01f64..100.0) {
                prop_assert_eq!(MpptRule::classify(dp, dv), MpptRule::classify(dp * scale, dv * scale));
            }

            #[test]
            fn reference_stays_in_bracket(p in 0f64..2e4, v in 0f64..500.0, v_ref in 40f64..360.0, adaptive: bool) {
                let c = MpptConfig { adaptive, ..MpptConfig::default() };
                let s = MpptState { p_prev: 5000.0, v_prev: 220.0, v_ref };
                let d = mppt_decide(p, v, &s, &c);
                prop_assert!(d.state.v_ref >= c.v_ref_min && d.state.v_ref <= c.v_ref_max);
            }

            #[test]
            fn comparator_latches_inside_band(err in -0.4999f64..0.4999, prev: bool) {
                prop_assert_eq!(hysteresis_leg(err, 0.0, 0.5, prev), prev);
            }
        }
    }
}
