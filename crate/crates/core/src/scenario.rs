//! Scenario files: parameter sets, wind profiles, solver and output settings.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::aero::{DrivetrainParams, Turbine, TurbineParams};
use crate::control::ControlConfig;
use crate::error::{Error, Result};
use crate::machine::{rectifier_no_load, GeneratorParams};
use crate::power::ConverterParams;
use crate::simcore::{SolverConfig, CHANNELS};

/// Wind speeds outside this band are outside the cut-in to rated range.
pub const WIND_RANGE: (f64, f64) = (4.0, 12.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindMode {
    /// Hold each breakpoint value until the next breakpoint.
    Step,
    /// Interpolate linearly between breakpoints.
    Linear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindProfile {
    pub mode: WindMode,
    /// `(t, v)` breakpoints in s and m/s. Before the first breakpoint the first
    /// value holds, after the last the last value holds.
    pub points: Vec<(f64, f64)>,
}

impl WindProfile {
    pub fn constant(v: f64) -> Self {
        Self {
            mode: WindMode::Step,
            points: vec![(0.0, v)],
        }
    }

    pub fn at(&self, t: f64) -> f64 {
        let pts = &self.points;
        // index of the last breakpoint with t_k <= t
        let k = pts.partition_point(|&(tk, _)| tk <= t);
        if k == 0 {
            return pts[0].1;
        }
        if k == pts.len() {
            return pts[k - 1].1;
        }
        let (t0, v0) = pts[k - 1];
        match self.mode {
            WindMode::Step => v0,
            WindMode::Linear => {
                let (t1, v1) = pts[k];
                v0 + (v1 - v0) * (t - t0) / (t1 - t0)
            }
        }
    }

    pub fn min_speed(&self) -> f64 {
        self.points.iter().map(|p| p.1).fold(f64::INFINITY, f64::min)
    }

    pub fn max_speed(&self) -> f64 {
        self.points.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// Trace columns after `t`, in order. Empty selects every channel.
    pub channels: Vec<String>,
    /// Record every N-th plant step.
    pub decimate: usize,
    /// `[t_start, t_end]` windows for the summary averages.
    pub windows: Vec<(f64, f64)>,
    /// Samples before this time are excluded from the band-violation count, s.
    pub transient: f64,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            channels: Vec::new(),
            decimate: 20,
            windows: Vec::new(),
            transient: 0.04,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub turbine: TurbineParams,
    pub drivetrain: DrivetrainParams,
    pub generator: GeneratorParams,
    pub converter: ConverterParams,
    pub control: ControlConfig,
    pub solver: SolverConfig,
    pub wind: WindProfile,
    pub outputs: OutputConfig,
}

impl Default for Scenario {
    fn default() -> Self {
        Self::wind_step()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub field: String,
    pub constraint: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.constraint)
    }
}

struct Checker(Vec<Violation>);

impl Checker {
    fn check(&mut self, ok: bool, field: &str, constraint: impl Into<String>) {
        if !ok {
            self.0.push(Violation {
                field: field.to_string(),
                constraint: constraint.into(),
            });
        }
    }

    fn positive(&mut self, value: f64, field: &str) {
        self.check(value > 0.0 && value.is_finite(), field, format!("must be > 0 (got {value})"));
    }

    fn non_negative(&mut self, value: f64, field: &str) {
        self.check(value >= 0.0 && value.is_finite(), field, format!("must be >= 0 (got {value})"));
    }
}

fn is_multiple(step: f64, base: f64) -> bool {
    let ratio = step / base;
    ratio >= 1.0 - 1e-9 && (ratio - ratio.round()).abs() <= 1e-6 * ratio.max(1.0)
}

impl Scenario {
    /// 8 m/s until t = 10 s, then 10 m/s, for 20 s, on the default parameter set.
    pub fn wind_step() -> Self {
        Self {
            turbine: TurbineParams::default(),
            drivetrain: DrivetrainParams::default(),
            generator: GeneratorParams::default(),
            converter: ConverterParams::default(),
            control: ControlConfig::default(),
            solver: SolverConfig::default(),
            wind: WindProfile {
                mode: WindMode::Step,
                points: vec![(0.0, 8.0), (10.0, 10.0)],
            },
            outputs: OutputConfig {
                windows: vec![(8.0, 10.0), (18.0, 20.0)],
                ..OutputConfig::default()
            },
        }
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })
    }

    /// Every violated invariant, or `Ok` when the scenario can be run.
    pub fn validate(&self) -> std::result::Result<(), Vec<Violation>> {
        let mut c = Checker(Vec::new());

        let t = &self.turbine;
        c.positive(t.radius, "turbine.radius");
        c.positive(t.air_density, "turbine.air_density");
        c.positive(t.lambda_max, "turbine.lambda_max");
        c.check(t.cp_coeffs.iter().all(|x| x.is_finite()), "turbine.cp_coeffs", "must be finite");

        let d = &self.drivetrain;
        c.positive(d.inertia, "drivetrain.inertia");
        c.check(d.gear_ratio >= 1.0, "drivetrain.gear_ratio", format!("must be >= 1 (got {})", d.gear_ratio));
        c.non_negative(d.friction, "drivetrain.friction");

        let g = &self.generator;
        c.positive(g.ld, "generator.ld");
        c.positive(g.lq, "generator.lq");
        c.positive(g.rd, "generator.rd");
        c.positive(g.rq, "generator.rq");
        c.positive(g.mutual_inductance, "generator.mutual_inductance");
        c.positive(g.field_current, "generator.field_current");
        c.check(g.pole_pairs >= 1, "generator.pole_pairs", "must be >= 1");

        let p = &self.converter;
        c.positive(p.boost_inductance, "converter.boost_inductance");
        c.positive(p.c_rect, "converter.c_rect");
        c.positive(p.c_dc, "converter.c_dc");
        c.positive(p.filter_inductance, "converter.filter_inductance");
        c.non_negative(p.filter_resistance, "converter.filter_resistance");
        c.positive(p.grid_voltage, "converter.grid_voltage");
        c.positive(p.grid_frequency, "converter.grid_frequency");
        c.check(
            p.duty_max > 0.0 && p.duty_max < 1.0,
            "converter.duty_max",
            format!("must lie in (0, 1) (got {})", p.duty_max),
        );

        let k = &self.control;
        let m = &k.mppt;
        c.positive(m.delta_v, "control.mppt.delta_v");
        c.check(
            m.v_ref_min < m.v_ref_max,
            "control.mppt.v_ref_min",
            format!("must be < v_ref_max ({} >= {})", m.v_ref_min, m.v_ref_max),
        );
        c.non_negative(m.v_ref_min, "control.mppt.v_ref_min");
        if let Some(v) = m.v_ref_init {
            c.check(
                v >= m.v_ref_min && v <= m.v_ref_max,
                "control.mppt.v_ref_init",
                format!("must lie in [v_ref_min, v_ref_max] (got {v})"),
            );
        }
        c.non_negative(m.measure_window, "control.mppt.measure_window");
        c.check(
            m.measure_window <= self.solver.dt_mppt,
            "control.mppt.measure_window",
            "must not exceed solver.dt_mppt",
        );
        c.non_negative(m.step_gain, "control.mppt.step_gain");
        c.positive(m.step_min, "control.mppt.step_min");
        c.check(m.step_min <= m.step_max, "control.mppt.step_min", "must be <= step_max");
        for (name, pi) in [("control.boost_pi", &k.boost_pi), ("control.dclink_pi", &k.dclink_pi)] {
            c.check(pi.ki >= 0.0, &format!("{name}.ki"), "must be >= 0");
            c.check(pi.out_min < pi.out_max, &format!("{name}.out_min"), "must be < out_max");
        }
        c.check(
            k.boost_pi.out_min >= 0.0 && k.boost_pi.out_max <= p.duty_max,
            "control.boost_pi.out_max",
            "duty bounds must lie inside [0, converter.duty_max]",
        );
        c.check(k.dclink_pi.out_min >= 0.0, "control.dclink_pi.out_min", "current magnitude must be >= 0");
        c.positive(k.hysteresis.band, "control.hysteresis.band");
        c.positive(k.v_o_ref, "control.v_o_ref");
        c.check(
            k.v_o_ref / 2.0 > p.grid_voltage,
            "control.v_o_ref",
            format!(
                "v_o_ref/2 = {} V must exceed the grid amplitude {} V to synthesize current",
                k.v_o_ref / 2.0,
                p.grid_voltage
            ),
        );
        c.check(
            m.v_ref_max < k.v_o_ref,
            "control.mppt.v_ref_max",
            "must be below v_o_ref (the boost stage only steps up)",
        );

        let s = &self.solver;
        c.positive(s.dt_plant, "solver.dt_plant");
        c.positive(s.dt_pi, "solver.dt_pi");
        c.positive(s.dt_mppt, "solver.dt_mppt");
        c.positive(s.t_end, "solver.t_end");
        c.positive(s.initial_tip_speed_ratio, "solver.initial_tip_speed_ratio");
        c.check(
            (s.dt_switch - s.dt_plant).abs() <= 1e-12 * s.dt_plant,
            "solver.dt_switch",
            "must equal dt_plant",
        );
        if s.dt_plant > 0.0 {
            c.check(
                is_multiple(s.dt_pi, s.dt_plant),
                "solver.dt_pi",
                "must be an integer multiple of dt_plant",
            );
            c.check(
                is_multiple(s.dt_mppt, s.dt_pi),
                "solver.dt_mppt",
                "must be an integer multiple of dt_pi",
            );
        }

        let w = &self.wind;
        c.check(!w.points.is_empty(), "wind.points", "at least one breakpoint is required");
        c.check(
            w.points.windows(2).all(|p| p[1].0 > p[0].0),
            "wind.points",
            "breakpoint times must be strictly increasing",
        );
        for (i, &(tk, v)) in w.points.iter().enumerate() {
            c.check(tk.is_finite(), &format!("wind.points[{i}]"), "time must be finite");
            c.check(
                v >= WIND_RANGE.0 && v <= WIND_RANGE.1,
                &format!("wind.points[{i}]"),
                format!("speed {v} m/s outside the cut-in to rated band [{}, {}]", WIND_RANGE.0, WIND_RANGE.1),
            );
        }

        let o = &self.outputs;
        c.check(o.decimate >= 1, "outputs.decimate", "must be >= 1");
        for name in &o.channels {
            c.check(
                CHANNELS.contains(&name.as_str()),
                "outputs.channels",
                format!("unknown channel `{name}`"),
            );
        }
        for (i, &(a, b)) in o.windows.iter().enumerate() {
            c.check(a < b && a >= 0.0, &format!("outputs.windows[{i}]"), "needs 0 <= t_start < t_end");
        }
        c.non_negative(o.transient, "outputs.transient");

        // the reference bracket must be reachable by the bridge across the wind validity band
        if c.0.is_empty() {
            let turbine = Turbine::new(t.clone());
            let no_load = |v: f64, lambda: f64| {
                let omega_e = g.poles() * d.gear_ratio * lambda * v / t.radius;
                rectifier_no_load(omega_e, g)
            };
            let low = no_load(WIND_RANGE.0, turbine.lambda_opt);
            let high = no_load(WIND_RANGE.1, t.lambda_max);
            c.check(
                m.v_ref_min < low,
                "control.mppt.v_ref_min",
                format!("must be below the no-load rectifier voltage {low:.1} V at the lowest wind and optimal λ"),
            );
            c.check(
                m.v_ref_max <= high,
                "control.mppt.v_ref_max",
                format!("must not exceed the no-load rectifier voltage {high:.1} V at the highest wind and λ_max"),
            );
        }

        if c.0.is_empty() {
            Ok(())
        } else {
            Err(c.0)
        }
    }

    pub(crate) fn validated(&self) -> Result<()> {
        self.validate().map_err(Error::Invalid)
    }
}
