//! Quasi-static (frozen) plant: steady operating points with every electrical
//! transient settled and the rotor at torque balance.
//!
//! Two independent routes reach the same operating points. Holding the
//! rectifier-side voltage fixed, [`QuasiStatic::at_voltage`] finds the rotor
//! speed the drivetrain settles to. Holding the rotor speed fixed,
//! [`QuasiStatic::at_speed`] solves the bridge power balance for the DC
//! current directly.

use crate::aero::Turbine;
use crate::control::{mppt_decide, MpptConfig, MpptState};
use crate::machine::{bridge_point, commutation_resistance, rectifier_no_load, GeneratorParams};
use crate::scenario::Scenario;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteadyPoint {
    pub wind: f64,
    /// Turbine shaft speed, rad/s.
    pub omega: f64,
    pub lambda: f64,
    pub cp: f64,
    pub v_dc: f64,
    pub i_dc: f64,
    /// Power into the boost stage, W.
    pub p_dc: f64,
}

#[derive(Debug, Clone)]
pub struct QuasiStatic {
    pub turbine: Turbine,
    pub generator: GeneratorParams,
    pub gear_ratio: f64,
    pub friction: f64,
    pub v_o_ref: f64,
    pub initial_tip_speed_ratio: f64,
}

impl QuasiStatic {
    pub fn new(sc: &Scenario) -> Self {
        Self {
            turbine: Turbine::new(sc.turbine.clone()),
            generator: sc.generator.clone(),
            gear_ratio: sc.drivetrain.gear_ratio,
            friction: sc.drivetrain.friction,
            v_o_ref: sc.control.v_o_ref,
            initial_tip_speed_ratio: sc.solver.initial_tip_speed_ratio,
        }
    }

    fn radius(&self) -> f64 {
        self.turbine.params.radius
    }

    fn aero_power(&self, wind: f64, omega: f64) -> f64 {
        let lambda = self.radius() * omega / wind;
        self.turbine.power(wind, lambda).unwrap_or(0.0) - self.friction * omega * omega
    }

    /// Net accelerating power on the shaft at speed ω with v_dc held.
    fn surplus(&self, wind: f64, omega: f64, v_dc: f64) -> f64 {
        self.aero_power(wind, omega) - bridge_point(self.gear_ratio * omega, v_dc, &self.generator).p_em()
    }

    fn point(&self, wind: f64, omega: f64, v_dc: f64) -> SteadyPoint {
        let bp = bridge_point(self.gear_ratio * omega, v_dc, &self.generator);
        let lambda = self.radius() * omega / wind;
        SteadyPoint {
            wind,
            omega,
            lambda,
            cp: self.turbine.cp(lambda),
            v_dc,
            i_dc: bp.i_dc,
            p_dc: bp.p_dc,
        }
    }

    /// Speed the one-mass drivetrain settles to from the declared starting λ
    /// with the rectifier-side voltage held at `v_dc`.
    ///
    /// The shaft dynamics are one-dimensional, so the rotor follows the sign
    /// of the surplus power to the first zero crossing in that direction.
    pub fn equilibrium_speed(&self, wind: f64, v_dc: f64) -> f64 {
        let r = self.radius();
        let omega0 = self.initial_tip_speed_ratio * wind / r;
        let omega_hi = self.turbine.params.lambda_max * wind / r;
        let h = 1e-3 * wind / r;
        let f = |w: f64| self.surplus(wind, w, v_dc);
        let up = f(omega0) > 0.0;
        let (mut a, mut b) = (omega0, omega0);
        loop {
            let next = if up { b + h } else { a - h };
            if up {
                if next >= omega_hi {
                    return omega_hi;
                }
                if f(next) <= 0.0 {
                    a = b;
                    b = next;
                    break;
                }
                b = next;
            } else {
                if next <= h {
                    return next.max(h);
                }
                if f(next) > 0.0 {
                    b = a;
                    a = next;
                    break;
                }
                a = next;
            }
        }
        // f(a) > 0 >= f(b)
        for _ in 0..100 {
            let mid = 0.5 * (a + b);
            if f(mid) > 0.0 {
                a = mid;
            } else {
                b = mid;
            }
            if b - a < 1e-13 * b {
                break;
            }
        }
        0.5 * (a + b)
    }

    /// Steady state with the rectifier-side voltage regulated to `v_dc`.
    pub fn at_voltage(&self, wind: f64, v_dc: f64) -> SteadyPoint {
        let omega = self.equilibrium_speed(wind, v_dc);
        self.point(wind, omega, v_dc)
    }

    /// Steady state with a frozen boost duty; the DC link sits at its reference.
    pub fn at_duty(&self, wind: f64, duty: f64) -> SteadyPoint {
        self.at_voltage(wind, (1.0 - duty) * self.v_o_ref)
    }

    /// Steady state with the rotor held at `omega`, by solving the bridge
    /// balance `P_aero = V₀·i − R_c·i² + k_cu·i²` for the smaller DC current.
    /// `None` when the generator cannot absorb the available power.
    pub fn at_speed(&self, wind: f64, omega: f64) -> Option<SteadyPoint> {
        let g = &self.generator;
        let we = g.poles() * self.gear_ratio * omega;
        let p_avail = self.aero_power(wind, omega);
        let v0 = rectifier_no_load(we, g);
        let rc = commutation_resistance(we, g);
        let k_cu = 18.0 * g.stator_resistance() / (std::f64::consts::PI * std::f64::consts::PI);
        let i = if p_avail <= 0.0 {
            0.0
        } else {
            let a = rc - k_cu;
            if a.abs() < 1e-12 {
                p_avail / v0
            } else {
                let disc = v0 * v0 - 4.0 * a * p_avail;
                if disc < 0.0 {
                    return None;
                }
                (v0 - disc.sqrt()) / (2.0 * a)
            }
        };
        let v_dc = v0 - rc * i;
        let lambda = self.radius() * omega / wind;
        Some(SteadyPoint {
            wind,
            omega,
            lambda,
            cp: self.turbine.cp(lambda),
            v_dc,
            i_dc: i,
            p_dc: v_dc * i,
        })
    }

    pub fn sweep_voltage(&self, wind: f64, voltages: &[f64]) -> Vec<SteadyPoint> {
        voltages.iter().map(|&v| self.at_voltage(wind, v)).collect()
    }

    /// Runs the step-and-search tracker against the frozen plant for
    /// `decisions` steps starting from `v_start`; returns the reference after
    /// each decision.
    pub fn track(&self, wind: f64, cfg: &MpptConfig, v_start: f64, decisions: usize) -> Vec<f64> {
        let mut state = MpptState::new(v_start, cfg);
        let mut out = Vec::with_capacity(decisions);
        for _ in 0..decisions {
            let v = state.v_ref;
            let p = self.at_voltage(wind, v).p_dc;
            state = mppt_decide(p, v, &state, cfg).state;
            out.push(state.v_ref);
        }
        out
    }
}

/// Uniform grid of `n` points on `[a, b]`.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![a],
        _ => (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect(),
    }
}

/// Index of the largest element.
pub fn argmax(values: impl IntoIterator<Item = f64>) -> Option<usize> {
    values
        .into_iter()
        .enumerate()
        .fold(None, |best: Option<(usize, f64)>, (i, v)| match best {
            Some((_, b)) if b >= v => best,
            _ => Some((i, v)),
        })
        .map(|(i, _)| i)
}
