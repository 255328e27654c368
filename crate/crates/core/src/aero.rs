//! Fixed-pitch rotor aerodynamics and the one-mass drivetrain.
//!
//! The power coefficient is a fifth-order polynomial in the tip-speed ratio.
//! Coefficients are stored with their signs folded in, in ascending powers of
//! λ, so `Cp(λ) = Σ cᵢ·λⁱ`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ascending-power coefficients of the rotor's Cp(λ) curve.
pub const DEFAULT_CP_COEFFS: [f64; 6] = [0.043, -0.108, 0.146, -0.0602, 0.0104, -0.0006];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TurbineParams {
    /// Rotor radius, m.
    pub radius: f64,
    /// Air density, kg/m³.
    pub air_density: f64,
    pub cp_coeffs: [f64; 6],
    /// Upper end of the bracket `[0, lambda_max]` searched for the Cp optimum.
    pub lambda_max: f64,
}

impl Default for TurbineParams {
    fn default() -> Self {
        Self {
            radius: 2.5,
            air_density: 1.225,
            cp_coeffs: DEFAULT_CP_COEFFS,
            lambda_max: 12.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DrivetrainParams {
    /// Lumped inertia referred to the turbine shaft, kg·m².
    pub inertia: f64,
    /// Gearbox ratio, generator speed over turbine speed.
    pub gear_ratio: f64,
    /// Viscous friction on the turbine shaft, N·m·s/rad.
    pub friction: f64,
}

impl Default for DrivetrainParams {
    fn default() -> Self {
        Self {
            inertia: 3.5,
            gear_ratio: 5.0,
            friction: 0.003,
        }
    }
}

/// λ = r·ω / v.
pub fn tip_speed_ratio(radius: f64, omega: f64, wind: f64) -> Result<f64> {
    if !(wind > 0.0) {
        return Err(Error::Domain {
            quantity: "wind speed",
            value: wind,
            constraint: "v > 0",
        });
    }
    Ok(radius * omega / wind)
}

/// Raw polynomial value, which goes negative past λ ≈ 8.87 for the default rotor.
pub fn power_coefficient_raw(lambda: f64, coeffs: &[f64; 6]) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * lambda + c)
}

/// Cp clamped below at zero, as used for power and torque.
pub fn power_coefficient(lambda: f64, coeffs: &[f64; 6]) -> f64 {
    power_coefficient_raw(lambda, coeffs).max(0.0)
}

fn cp_slope(lambda: f64, c: &[f64; 6]) -> f64 {
    c[1] + lambda * (2.0 * c[2] + lambda * (3.0 * c[3] + lambda * (4.0 * c[4] + lambda * 5.0 * c[5])))
}

/// Locates the interior maximum of the raw Cp polynomial on `[0, lambda_max]`.
///
/// A coarse scan brackets the best grid point, then bisection on dCp/dλ
/// refines it to machine precision.
pub fn cp_optimum(coeffs: &[f64; 6], lambda_max: f64) -> (f64, f64) {
    const CELLS: usize = 1200;
    let h = lambda_max / CELLS as f64;
    let best = (0..=CELLS)
        .map(|k| k as f64 * h)
        .max_by(|a, b| {
            power_coefficient_raw(*a, coeffs).total_cmp(&power_coefficient_raw(*b, coeffs))
        })
        .unwrap_or(0.0);
    let (mut lo, mut hi) = ((best - h).max(0.0), (best + h).min(lambda_max));
    if cp_slope(lo, coeffs) > 0.0 && cp_slope(hi, coeffs) < 0.0 {
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if cp_slope(mid, coeffs) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= f64::EPSILON * hi {
                break;
            }
        }
        let lambda = 0.5 * (lo + hi);
        (lambda, power_coefficient_raw(lambda, coeffs))
    } else {
        // optimum sits on the bracket edge
        (best, power_coefficient_raw(best, coeffs))
    }
}

/// Turbine parameters together with quantities derived from them.
#[derive(Debug, Clone, PartialEq)]
pub struct Turbine {
    pub params: TurbineParams,
    pub area: f64,
    pub lambda_opt: f64,
    pub cp_opt: f64,
    /// Cube-law constant k in `P_opt = k·ω³`, W·s³/rad³.
    pub k_cube: f64,
}

impl Turbine {
    pub fn new(params: TurbineParams) -> Self {
        let r = params.radius;
        let area = PI * r * r;
        let (lambda_opt, cp_opt) = cp_optimum(&params.cp_coeffs, params.lambda_max);
        let k_cube = 0.5 * params.air_density * cp_opt * PI * r.powi(5) / lambda_opt.powi(3);
        Self {
            params,
            area,
            lambda_opt,
            cp_opt,
            k_cube,
        }
    }

    pub fn cp(&self, lambda: f64) -> f64 {
        power_coefficient(lambda, &self.params.cp_coeffs)
    }

    pub fn tip_speed_ratio(&self, omega: f64, wind: f64) -> Result<f64> {
        tip_speed_ratio(self.params.radius, omega, wind)
    }

    /// Aerodynamic shaft power ½·Cp(λ)·ρ·A·v³, W.
    pub fn power(&self, wind: f64, lambda: f64) -> Result<f64> {
        if !(wind > 0.0) {
            return Err(Error::Domain {
                quantity: "wind speed",
                value: wind,
                constraint: "v > 0",
            });
        }
        Ok(0.5 * self.cp(lambda) * self.params.air_density * self.area * wind.powi(3))
    }

    /// Aerodynamic torque ½·ρ·A·r·(Cp/λ)·v², N·m.
    pub fn torque(&self, wind: f64, lambda: f64) -> Result<f64> {
        if !(lambda > 0.0) {
            return Err(Error::Domain {
                quantity: "tip-speed ratio",
                value: lambda,
                constraint: "λ > 0",
            });
        }
        let p = &self.params;
        Ok(0.5 * p.air_density * self.area * p.radius * (self.cp(lambda) / lambda) * wind * wind)
    }

    /// Power on the optimal-λ envelope at turbine speed ω, W.
    pub fn optimal_power(&self, omega: f64) -> f64 {
        self.k_cube * omega.powi(3)
    }

    /// Turbine shaft speed at which λ = λ* for a given wind speed.
    pub fn optimal_speed(&self, wind: f64) -> f64 {
        self.lambda_opt * wind / self.params.radius
    }
}

/// dω/dt of the turbine shaft with the generator torque referred through the gearbox.
pub fn drivetrain_deriv(omega: f64, turbine_torque: f64, gen_torque: f64, p: &DrivetrainParams) -> f64 {
    (turbine_torque - p.gear_ratio * gen_torque - p.friction * omega) / p.inertia
}
