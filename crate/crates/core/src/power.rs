//! Averaged boost stage, DC link, two-level grid-side converter and L filter.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConverterParams {
    /// Boost inductance, H.
    pub boost_inductance: f64,
    /// Rectifier-side capacitance C1, F.
    pub c_rect: f64,
    /// DC-link capacitance, F.
    pub c_dc: f64,
    /// Grid filter inductance per phase, H.
    pub filter_inductance: f64,
    /// Grid filter resistance per phase, Ω.
    pub filter_resistance: f64,
    /// Grid phase voltage amplitude, V.
    pub grid_voltage: f64,
    pub grid_frequency: f64,
    /// Boost duty saturation.
    pub duty_max: f64,
}

impl Default for ConverterParams {
    fn default() -> Self {
        Self {
            boost_inductance: 2e-3,
            c_rect: 1e-3,
            c_dc: 2.2e-3,
            filter_inductance: 5e-3,
            filter_resistance: 0.1,
            grid_voltage: 163.0,
            grid_frequency: 50.0,
            duty_max: 0.95,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoostDerivs {
    pub di_lb: f64,
    pub dv_wg: f64,
    /// Current injected into the DC-link node, (1 − D)·i_Lb.
    pub i_out: f64,
}

/// Clamps a duty command into `[0, duty_max]`, reporting whether it saturated.
pub fn saturate_duty(duty: f64, duty_max: f64) -> (f64, bool) {
    let d = duty.clamp(0.0, duty_max);
    (d, d != duty)
}

/// Averaged continuous-conduction boost dynamics with a zero-current floor on
/// the inductor (the series diode blocks reverse current).
pub fn boost_derivs(
    i_lb: f64,
    v_wg: f64,
    v_o: f64,
    duty: f64,
    i_rect: f64,
    p: &ConverterParams,
) -> BoostDerivs {
    let mut di_lb = (v_wg - (1.0 - duty) * v_o) / p.boost_inductance;
    if i_lb <= 0.0 && di_lb < 0.0 {
        di_lb = 0.0;
    }
    let i_lb = i_lb.max(0.0);
    BoostDerivs {
        di_lb,
        dv_wg: (i_rect - i_lb) / p.c_rect,
        i_out: (1.0 - duty) * i_lb,
    }
}

pub fn dc_link_deriv(i_in: f64, i_inv: f64, c_dc: f64) -> f64 {
    (i_in - i_inv) / c_dc
}

/// DC-side current drawn by a lossless converter: v_o·i_dc = Σ u_k·i_k.
pub fn inverter_dc_current(u: &[f64; 3], i: &[f64; 3], v_o: f64) -> f64 {
    (u[0] * i[0] + u[1] * i[1] + u[2] * i[2]) / v_o
}

/// Phase voltages of a two-level converter feeding a three-wire load.
///
/// Each leg sits at ±v_o/2 about the DC midpoint; the common-mode component
/// is removed because the neutral is isolated.
pub fn vsc_phase_voltage(switches: [bool; 3], v_o: f64) -> [f64; 3] {
    let pole = switches.map(|s| if s { 0.5 * v_o } else { -0.5 * v_o });
    let cm = (pole[0] + pole[1] + pole[2]) / 3.0;
    pole.map(|x| x - cm)
}

pub fn grid_current_derivs(u: &[f64; 3], e: &[f64; 3], i: &[f64; 3], p: &ConverterParams) -> [f64; 3] {
    let l = p.filter_inductance;
    let r = p.filter_resistance;
    [
        (u[0] - e[0] - r * i[0]) / l,
        (u[1] - e[1] - r * i[1]) / l,
        (u[2] - e[2] - r * i[2]) / l,
    ]
}

/// Balanced three-phase set `E·cos(2πft − 2πk/3)`.
pub fn grid_emf(t: f64, amplitude: f64, frequency: f64) -> [f64; 3] {
    let theta = 2.0 * PI * frequency * t;
    [0.0, 1.0, 2.0].map(|k| amplitude * (theta - 2.0 * PI * k / 3.0).cos())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn boost_pass_through_at_zero_duty() {
        let p = ConverterParams::default();
        let d = boost_derivs(10.0, 400.0, 400.0, 0.0, 10.0, &p);
        assert_eq!(d.di_lb, 0.0);
        assert_eq!(d.dv_wg, 0.0);
        assert_eq!(d.i_out, 10.0);
    }

    #[test]
    fn boost_power_is_conserved() {
        let p = ConverterParams::default();
        let (v_o, duty, i) = (400.0, 0.35, 22.0);
        let v_wg = (1.0 - duty) * v_o;
        let d = boost_derivs(i, v_wg, v_o, duty, i, &p);
        assert!(d.di_lb.abs() < 1e-9);
        assert!((v_wg * i - v_o * d.i_out).abs() < 1e-9);
    }

    #[test]
    fn boost_inductor_floor() {
        let p = ConverterParams::default();
        let d = boost_derivs(0.0, 100.0, 400.0, 0.2, 3.0, &p);
        assert_eq!(d.di_lb, 0.0);
        assert_eq!(d.i_out, 0.0);
        assert_eq!(d.dv_wg, 3.0 / p.c_rect);
        assert_eq!(saturate_duty(1.2, 0.95), (0.95, true));
        assert_eq!(saturate_duty(-0.1, 0.95), (0.0, true));
        assert_eq!(saturate_duty(0.5, 0.95), (0.5, false));
    }

    #[test]
    fn dc_link_examples() {
        assert_eq!(dc_link_deriv(3.0, 3.0, 2.2e-3), 0.0);
        assert!((dc_link_deriv(1.0, 0.0, 1e-3) - 1000.0).abs() < 1e-9);
    }

    #[test]
    fn phase_voltage_examples() {
        assert_eq!(vsc_phase_voltage([true; 3], 600.0), [0.0; 3]);
        assert_eq!(vsc_phase_voltage([false; 3], 600.0), [0.0; 3]);
        let u = vsc_phase_voltage([true, false, false], 600.0);
        assert!((u[0] - 400.0).abs() < 1e-12);
        assert!((u[1] + 200.0).abs() < 1e-12);
        assert!((u[2] + 200.0).abs() < 1e-12);
        for bits in 0..8u8 {
            let s = [bits & 1 != 0, bits & 2 != 0, bits & 4 != 0];
            let u = vsc_phase_voltage(s, 400.0);
            assert!((u[0] + u[1] + u[2]).abs() < 1e-12);
        }
    }

    #[test]
    fn grid_current_examples() {
        let mut p = ConverterParams::default();
        p.filter_resistance = 0.0;
        let e = [100.0, -50.0, -50.0];
        assert_eq!(grid_current_derivs(&e, &e, &[1.0, 2.0, -3.0], &p), [0.0; 3]);
        let l = p.filter_inductance;
        let d = grid_current_derivs(&[l, 0.0, 0.0], &[0.0; 3], &[0.0; 3], &p);
        assert!((d[0] - 1.0).abs() < 1e-12);
        let p = ConverterParams::default();
        let d = grid_current_derivs(&[40.0, -10.0, -30.0], &grid_emf(0.013, 163.0, 50.0), &[5.0, -2.0, -3.0], &p);
        assert!((d[0] + d[1] + d[2]).abs() < 1e-9);
    }

    #[test]
    fn grid_emf_examples() {
        let e = grid_emf(0.0, 163.0, 50.0);
        assert!((e[0] - 163.0).abs() < 1e-12);
        assert!((e[1] + 81.5).abs() < 1e-9);
        assert!((e[2] + 81.5).abs() < 1e-9);
        let n = 20_000;
        let mut sq = [0.0; 3];
        for k in 0..n {
            let t = 0.02 * k as f64 / n as f64;
            let e = grid_emf(t, 163.0, 50.0);
            assert!((e[0] + e[1] + e[2]).abs() < 1e-9);
            for j in 0..3 {
                sq[j] += e[j] * e[j];
            }
        }
        for s in sq {
            let rms = (s / n as f64).sqrt();
            assert!((rms - 163.0 / 2f64.sqrt()).abs() < 1e-9);
        }
    }
}
