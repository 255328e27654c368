//! PMSG dq-frame electrical model and the averaged three-phase diode bridge.
//!
//! The full simulation does not integrate the stator currents. The bridge is
//! represented by its averaged droop characteristic and the dq currents are
//! reconstructed algebraically from the DC side, with the d-axis current held
//! at zero (the machine is never field-weakened). [`pmsg_derivs`] is the
//! stand-alone dq model used for machine-level checks.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorParams {
    /// d-axis inductance, H.
    pub ld: f64,
    /// q-axis inductance, H.
    pub lq: f64,
    pub rd: f64,
    pub rq: f64,
    /// Stator-rotor mutual inductance, H.
    pub mutual_inductance: f64,
    /// Equivalent rotor (magnet) current, A.
    pub field_current: f64,
    pub pole_pairs: u32,
}

impl Default for GeneratorParams {
    fn default() -> Self {
        Self {
            ld: 2e-3,
            lq: 2e-3,
            rd: 0.4,
            rq: 0.4,
            mutual_inductance: 0.03,
            field_current: 10.0,
            pole_pairs: 4,
        }
    }
}

impl GeneratorParams {
    /// Magnet flux linkage M·i_f, V·s.
    pub fn flux(&self) -> f64 {
        self.mutual_inductance * self.field_current
    }

    pub fn poles(&self) -> f64 {
        f64::from(self.pole_pairs)
    }

    /// Commutation inductance seen by the bridge, (Ld + Lq)/2.
    pub fn commutation_inductance(&self) -> f64 {
        0.5 * (self.ld + self.lq)
    }

    pub fn stator_resistance(&self) -> f64 {
        0.5 * (self.rd + self.rq)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MachineState {
    pub id: f64,
    pub iq: f64,
    /// Generator shaft speed, rad/s.
    pub omega_g: f64,
}

impl MachineState {
    pub fn omega_e(&self, p: &GeneratorParams) -> f64 {
        p.poles() * self.omega_g
    }
}

/// Stator current derivatives (did/dt, diq/dt) for terminal voltages (ud, uq).
pub fn pmsg_derivs(s: &MachineState, ud: f64, uq: f64, p: &GeneratorParams) -> (f64, f64) {
    let we = p.poles() * s.omega_g;
    let did = (ud + we * p.lq * s.iq - p.rd * s.id) / p.ld;
    let diq = (uq - we * (p.ld * s.id + p.flux()) - p.rq * s.iq) / p.lq;
    (did, diq)
}

/// Electromagnetic torque (3/2)·P·(M·i_f·iq + (Ld − Lq)·id·iq), N·m.
///
/// Positive torque opposes rotation when the machine generates.
pub fn electromagnetic_torque(id: f64, iq: f64, p: &GeneratorParams) -> f64 {
    1.5 * p.poles() * (p.flux() * iq + (p.ld - p.lq) * id * iq)
}

/// Ideal no-load bridge output (3√3/π)·ωe·M·i_f, V.
pub fn rectifier_no_load(omega_e: f64, p: &GeneratorParams) -> f64 {
    3.0 * 3f64.sqrt() / PI * omega_e * p.flux()
}

/// Equivalent commutation resistance (3/π)·ωe·Lc, Ω.
pub fn commutation_resistance(omega_e: f64, p: &GeneratorParams) -> f64 {
    3.0 / PI * omega_e * p.commutation_inductance()
}

/// Averaged bridge output voltage for DC current `i_dc`, floored at zero.
pub fn rectifier_average(omega_e: f64, i_dc: f64, p: &GeneratorParams) -> f64 {
    let e_rms = omega_e * p.flux() / 2f64.sqrt();
    (3.0 * 6f64.sqrt() / PI * e_rms - commutation_resistance(omega_e, p) * i_dc).max(0.0)
}

/// Inverse of [`rectifier_average`]: the DC current the bridge delivers into a
/// capacitor held at `v_dc`. Zero when the diodes block.
pub fn rectifier_current(omega_e: f64, v_dc: f64, p: &GeneratorParams) -> f64 {
    let r = commutation_resistance(omega_e, p);
    if r <= 0.0 {
        return 0.0;
    }
    ((rectifier_no_load(omega_e, p) - v_dc) / r).max(0.0)
}

/// RMS fundamental phase current of a six-pulse bridge carrying `i_dc`.
pub fn phase_current_rms(i_dc: f64) -> f64 {
    6f64.sqrt() / PI * i_dc
}

/// Machine-side quantities implied by a bridge operating point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BridgePoint {
    pub i_dc: f64,
    pub id: f64,
    pub iq: f64,
    /// Generator-side electromagnetic torque, N·m.
    pub torque: f64,
    /// Power delivered to the DC side, W.
    pub p_dc: f64,
    pub p_copper: f64,
}

impl BridgePoint {
    /// Electromagnetic (air-gap) power Te·ωg, W.
    pub fn p_em(&self) -> f64 {
        self.p_dc + self.p_copper
    }
}

/// Operating point of the generator given its shaft speed and the voltage on
/// the rectifier-side capacitor.
///
/// The q-axis current is the active current for which the air-gap power
/// (3/2)·ωe·M·i_f·iq covers both the DC output and the stator copper loss, so
/// `torque · ωg == p_dc + p_copper`.
pub fn bridge_point(omega_g: f64, v_dc: f64, p: &GeneratorParams) -> BridgePoint {
    let we = p.poles() * omega_g;
    let i_dc = rectifier_current(we, v_dc, p);
    let p_dc = v_dc * i_dc;
    let i_rms = phase_current_rms(i_dc);
    let p_copper = 3.0 * p.stator_resistance() * i_rms * i_rms;
    let iq = if we > 0.0 {
        (p_dc + p_copper) / (1.5 * we * p.flux())
    } else {
        0.0
    };
    BridgePoint {
        i_dc,
        id: 0.0,
        iq,
        torque: electromagnetic_torque(0.0, iq, p),
        p_dc,
        p_copper,
    }
}
