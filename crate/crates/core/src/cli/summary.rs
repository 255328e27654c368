//! Run summaries. Every number here is derived from the recorded trace and
//! the scenario alone, so a summary can be rebuilt from `trace.csv`.

use serde::{Deserialize, Serialize};

use crate::aero::Turbine;
use crate::scenario::Scenario;
use crate::simcore::{MpptLogEntry, TimeSeries};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowStats {
    pub t_start: f64,
    pub t_end: f64,
    pub samples: usize,
    pub cp: Option<f64>,
    pub lambda: Option<f64>,
    /// Mean power delivered to the grid, W.
    pub p_grid: Option<f64>,
    /// Mean power into the boost stage, W.
    pub p_dc: Option<f64>,
    pub v_wg: Option<f64>,
    pub v_ref: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub cp_opt: f64,
    pub lambda_opt: f64,
    pub rows: usize,
    pub windows: Vec<WindowStats>,
    /// Fraction of post-transient phase samples with |i − i_ref| outside
    /// `h + (v_o/2 + E)·dt_plant/L`.
    pub band_violation_fraction: Option<f64>,
    pub band_samples: usize,
    /// (ΔE_gen − ΔE_grid − ΔE_loss − ΔE_stored) / ΔE_gen over the trace.
    pub energy_residual: Option<f64>,
    #[serde(skip)]
    pub mppt_log: Vec<MpptLogEntry>,
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (mut s, mut n) = (0.0, 0usize);
    for v in values {
        s += v;
        n += 1;
    }
    (n > 0).then(|| s / n as f64)
}

impl SummaryStats {
    pub fn from_trace(trace: &TimeSeries, sc: &Scenario) -> Self {
        let turbine = Turbine::new(sc.turbine.clone());
        let windows = sc
            .outputs
            .windows
            .iter()
            .map(|&(a, b)| window_stats(trace, a, b))
            .collect();
        let (band_violation_fraction, band_samples) = band_violations(trace, sc);
        Self {
            cp_opt: turbine.cp_opt,
            lambda_opt: turbine.lambda_opt,
            rows: trace.len(),
            windows,
            band_violation_fraction,
            band_samples,
            energy_residual: energy_residual(trace),
            mppt_log: Vec::new(),
        }
    }

    pub fn with_log(mut self, log: Vec<MpptLogEntry>) -> Self {
        self.mppt_log = log;
        self
    }
}

pub fn window_stats(trace: &TimeSeries, t_start: f64, t_end: f64) -> WindowStats {
    let rows: Vec<&[f64]> = trace.rows().filter(|r| r[0] >= t_start && r[0] <= t_end).collect();
    let avg = |name: &str| {
        let k = trace.index_of(name)?;
        mean(rows.iter().map(|r| r[k]))
    };
    WindowStats {
        t_start,
        t_end,
        samples: rows.len(),
        cp: avg("cp"),
        lambda: avg("lambda"),
        p_grid: avg("p_grid"),
        p_dc: avg("p_dc"),
        v_wg: avg("v_wg"),
        v_ref: avg("v_ref"),
    }
}

/// Band check on every recorded sample after `outputs.transient`.
pub fn band_violations(trace: &TimeSeries, sc: &Scenario) -> (Option<f64>, usize) {
    let names = ["i_a", "i_b", "i_c", "i_ref_a", "i_ref_b", "i_ref_c", "v_o"];
    let Some(idx) = names.iter().map(|n| trace.index_of(n)).collect::<Option<Vec<_>>>() else {
        return (None, 0);
    };
    let c = &sc.converter;
    let h = sc.control.hysteresis.band;
    let slew = sc.solver.dt_plant / c.filter_inductance;
    let (mut bad, mut total) = (0usize, 0usize);
    for r in trace.rows().filter(|r| r[0] >= sc.outputs.transient) {
        let bound = h + (0.5 * r[idx[6]] + c.grid_voltage) * slew;
        for k in 0..3 {
            total += 1;
            if (r[idx[k]] - r[idx[k + 3]]).abs() > bound {
                bad += 1;
            }
        }
    }
    let frac = (total > 0).then(|| bad as f64 / total as f64);
    (frac, total)
}

pub fn energy_residual(trace: &TimeSeries) -> Option<f64> {
    if trace.len() < 2 {
        return None;
    }
    let first = trace.row(0);
    let last = trace.row(trace.len() - 1);
    let delta = |name: &str| trace.index_of(name).map(|k| last[k] - first[k]);
    let gen = delta("e_gen")?;
    let r = (gen - delta("e_grid")? - delta("e_loss")? - delta("e_stored")?) / gen;
    r.is_finite().then_some(r)
}
