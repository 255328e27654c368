//! Fixed-step RK4 integration and the multi-rate simulation loop.
//!
//! Every plant step the hysteresis comparators are evaluated on the current
//! state and their switch pattern is held across the RK4 step. The boost and
//! DC-link PI loops tick every `dt_pi`, the MPPT every `dt_mppt`; between
//! ticks their outputs are held.

use serde::{Deserialize, Serialize};

use crate::aero::{drivetrain_deriv, Turbine};
use crate::control::{
    boost_duty_controller, dclink_current_magnitude, hysteresis_comparator, mppt_decide, reference_currents,
    MpptRule, MpptState, PiState,
};
use crate::error::{Error, Result};
use crate::machine::{bridge_point, rectifier_no_load};
use crate::power::{
    boost_derivs, dc_link_deriv, grid_current_derivs, grid_emf, inverter_dc_current, vsc_phase_voltage,
};
use crate::scenario::Scenario;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    /// Plant integration step, s.
    pub dt_plant: f64,
    /// Comparator evaluation step, s. Always equal to `dt_plant`.
    pub dt_switch: f64,
    pub dt_pi: f64,
    pub dt_mppt: f64,
    pub t_end: f64,
    /// Tip-speed ratio the rotor starts from at the initial wind speed.
    pub initial_tip_speed_ratio: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            dt_plant: 5e-6,
            dt_switch: 5e-6,
            dt_pi: 1e-4,
            dt_mppt: 0.15,
            t_end: 20.0,
            initial_tip_speed_ratio: 3.0,
        }
    }
}

impl SolverConfig {
    pub fn steps(&self) -> u64 {
        (self.t_end / self.dt_plant).round() as u64
    }

    pub fn pi_ratio(&self) -> u64 {
        ((self.dt_pi / self.dt_plant).round() as u64).max(1)
    }

    pub fn mppt_ratio(&self) -> u64 {
        ((self.dt_mppt / self.dt_plant).round() as u64).max(1)
    }
}

/// A derivative evaluation produced a non-finite component.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NonFiniteStage {
    pub component: usize,
    pub t: f64,
}

fn axpy<const N: usize>(x: &[f64; N], h: f64, k: &[f64; N]) -> [f64; N] {
    let mut out = *x;
    for i in 0..N {
        out[i] += h * k[i];
    }
    out
}

fn check<const N: usize>(k: &[f64; N], t: f64) -> std::result::Result<(), NonFiniteStage> {
    match k.iter().position(|v| !v.is_finite()) {
        Some(component) => Err(NonFiniteStage { component, t }),
        None => Ok(()),
    }
}

/// One classical RK4 step of `dx/dt = f(t, x)`.
pub fn integrate_step<const N: usize, F>(
    x: &[f64; N],
    t: f64,
    dt: f64,
    mut f: F,
) -> std::result::Result<[f64; N], NonFiniteStage>
where
    F: FnMut(f64, &[f64; N]) -> [f64; N],
{
    if dt == 0.0 {
        return Ok(*x);
    }
    let half = 0.5 * dt;
    let k1 = f(t, x);
    check(&k1, t)?;
    let k2 = f(t + half, &axpy(x, half, &k1));
    check(&k2, t + half)?;
    let k3 = f(t + half, &axpy(x, half, &k2));
    check(&k3, t + half)?;
    let k4 = f(t + dt, &axpy(x, dt, &k3));
    check(&k4, t + dt)?;
    let mut out = *x;
    for i in 0..N {
        out[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    Ok(out)
}

/// Column-major-by-row table of equally shaped records keyed by channel name.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    channels: Vec<String>,
    data: Vec<f64>,
}

impl TimeSeries {
    /// The first channel must be `t`.
    pub fn new(channels: Vec<String>) -> Self {
        assert_eq!(channels.first().map(String::as_str), Some("t"), "first channel must be t");
        Self {
            channels,
            data: Vec::new(),
        }
    }

    pub fn channels(&self) -> &[String] {
        &self.channels
    }

    pub fn width(&self) -> usize {
        self.channels.len()
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.width()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn push(&mut self, row: &[f64]) -> Result<()> {
        if row.len() != self.width() {
            return Err(Error::Trace(format!("row has {} values, schema has {}", row.len(), self.width())));
        }
        if let Some(last) = self.rows().last() {
            if !(row[0] > last[0]) {
                return Err(Error::Trace(format!("time {} does not follow {}", row[0], last[0])));
            }
        }
        self.data.extend_from_slice(row);
        Ok(())
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, f64> {
        self.data.chunks_exact(self.width())
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let w = self.width();
        &self.data[i * w..(i + 1) * w]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.channels.iter().position(|c| c == name)
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.index_of(name)?;
        Some(self.rows().map(|r| r[k]).collect())
    }

    pub fn require(&self, name: &str) -> Result<usize> {
        self.index_of(name).ok_or_else(|| Error::UnknownChannel {
            name: name.to_string(),
            available: self.channels.clone(),
        })
    }

    fn columns_for(&self, select: &[String]) -> Result<Vec<usize>> {
        if select.is_empty() {
            return Ok((0..self.width()).collect());
        }
        let mut c = vec![0];
        for name in select {
            let k = self.require(name)?;
            if k != 0 {
                c.push(k);
            }
        }
        Ok(c)
    }

    /// `t` plus the selected channels, in the given order (all when empty).
    pub fn select(&self, select: &[String]) -> Result<Self> {
        let cols = self.columns_for(select)?;
        let mut out = Self::new(cols.iter().map(|&k| self.channels[k].clone()).collect());
        out.data.reserve(self.len() * cols.len());
        for row in self.rows() {
            out.data.extend(cols.iter().map(|&k| row[k]));
        }
        Ok(out)
    }

    /// Writes `t` plus the selected channels (all when `select` is empty).
    pub fn write_csv<W: std::io::Write>(&self, w: W, select: &[String]) -> Result<()> {
        let cols = self.columns_for(select)?;
        let mut out = csv::Writer::from_writer(w);
        out.write_record(cols.iter().map(|&k| self.channels[k].as_str()))?;
        let mut buf = Vec::with_capacity(cols.len());
        for row in self.rows() {
            buf.clear();
            buf.extend(cols.iter().map(|&k| row[k].to_string()));
            out.write_record(&buf)?;
        }
        out.flush().map_err(|e| Error::io("trace", e))?;
        Ok(())
    }

    pub fn read_csv<R: std::io::Read>(r: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let channels: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        if channels.first().map(String::as_str) != Some("t") {
            return Err(Error::Trace("first column must be `t`".into()));
        }
        let mut ts = TimeSeries::new(channels);
        let mut row = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            row.clear();
            for field in rec.iter() {
                row.push(field.parse::<f64>().map_err(|e| Error::Trace(format!("`{field}`: {e}")))?);
            }
            ts.push(&row)?;
        }
        Ok(ts)
    }
}

/// Integrated state components, in storage order.
pub const STATE_NAMES: [&str; 10] = [
    "omega", "i_lb", "v_wg", "v_o", "i_a", "i_b", "i_c", "e_gen", "e_grid", "e_loss",
];
const N: usize = STATE_NAMES.len();

/// Dynamic plant state. The last three components accumulate energy flows
/// (air-gap power, grid power, resistive losses) alongside the physics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantState {
    /// Turbine shaft speed, rad/s.
    pub omega: f64,
    pub i_lb: f64,
    pub v_wg: f64,
    pub v_o: f64,
    pub i_abc: [f64; 3],
    pub e_gen: f64,
    pub e_grid: f64,
    pub e_loss: f64,
}

impl PlantState {
    fn to_array(self) -> [f64; N] {
        [
            self.omega,
            self.i_lb,
            self.v_wg,
            self.v_o,
            self.i_abc[0],
            self.i_abc[1],
            self.i_abc[2],
            self.e_gen,
            self.e_grid,
            self.e_loss,
        ]
    }

    fn from_array(x: &[f64; N]) -> Self {
        Self {
            omega: x[0],
            i_lb: x[1],
            v_wg: x[2],
            v_o: x[3],
            i_abc: [x[4], x[5], x[6]],
            e_gen: x[7],
            e_grid: x[8],
            e_loss: x[9],
        }
    }
}

/// Inputs held constant over one plant step.
#[derive(Debug, Clone, Copy)]
struct HeldInputs {
    duty: f64,
    switches: [bool; 3],
}

/// The plant: turbine, drivetrain, generator and bridge, boost, DC link, grid filter.
pub struct Plant<'a> {
    pub scenario: &'a Scenario,
    pub turbine: Turbine,
}

impl<'a> Plant<'a> {
    pub fn new(scenario: &'a Scenario) -> Self {
        Self {
            scenario,
            turbine: Turbine::new(scenario.turbine.clone()),
        }
    }

    fn turbine_torque(&self, wind: f64, omega: f64) -> f64 {
        let lambda = self.turbine.params.radius * omega / wind;
        // rotor at or below standstill is outside the model; poison the step
        self.turbine.torque(wind, lambda).unwrap_or(f64::NAN)
    }

    fn derivs(&self, t: f64, x: &[f64; N], u: HeldInputs) -> [f64; N] {
        let sc = self.scenario;
        let conv = &sc.converter;
        let s = PlantState::from_array(x);
        let wind = sc.wind.at(t);
        let gear = sc.drivetrain.gear_ratio;

        let bp = bridge_point(gear * s.omega, s.v_wg, &sc.generator);
        let d_omega = drivetrain_deriv(s.omega, self.turbine_torque(wind, s.omega), bp.torque, &sc.drivetrain);

        let boost = boost_derivs(s.i_lb, s.v_wg, s.v_o, u.duty, bp.i_dc, conv);
        let uv = vsc_phase_voltage(u.switches, s.v_o);
        let e = grid_emf(t, conv.grid_voltage, conv.grid_frequency);
        let i_inv = inverter_dc_current(&uv, &s.i_abc, s.v_o);
        let dv_o = dc_link_deriv(boost.i_out, i_inv, conv.c_dc);
        let di = grid_current_derivs(&uv, &e, &s.i_abc, conv);

        let i = s.i_abc;
        let p_grid = e[0] * i[0] + e[1] * i[1] + e[2] * i[2];
        let p_filter = conv.filter_resistance * (i[0] * i[0] + i[1] * i[1] + i[2] * i[2]);
        [
            d_omega,
            boost.di_lb,
            boost.dv_wg,
            dv_o,
            di[0],
            di[1],
            di[2],
            bp.p_em(),
            p_grid,
            bp.p_copper + p_filter,
        ]
    }

    /// Energy held in the plant's reactive elements, J.
    pub fn stored_energy(&self, s: &PlantState) -> f64 {
        let c = &self.scenario.converter;
        let i = s.i_abc;
        0.5 * c.boost_inductance * s.i_lb * s.i_lb
            + 0.5 * c.c_rect * s.v_wg * s.v_wg
            + 0.5 * c.c_dc * s.v_o * s.v_o
            + 0.5 * c.filter_inductance * (i[0] * i[0] + i[1] * i[1] + i[2] * i[2])
    }

    /// Rotor at the declared starting λ, rectifier capacitor at its no-load
    /// voltage, DC link at its reference, no current anywhere.
    pub fn initial_state(&self) -> PlantState {
        let sc = self.scenario;
        let wind = sc.wind.at(0.0);
        let omega = sc.solver.initial_tip_speed_ratio * wind / sc.turbine.radius;
        let omega_e = sc.generator.poles() * sc.drivetrain.gear_ratio * omega;
        PlantState {
            omega,
            i_lb: 0.0,
            v_wg: rectifier_no_load(omega_e, &sc.generator),
            v_o: sc.control.v_o_ref,
            i_abc: [0.0; 3],
            e_gen: 0.0,
            e_grid: 0.0,
            e_loss: 0.0,
        }
    }
}

/// Channels recorded by [`run_scenario`], in trace order.
pub const CHANNELS: &[&str] = &[
    "t", "wind", "omega", "omega_g", "lambda", "cp", "p_turbine", "t_turbine", "t_gen", "id", "iq",
    "i_rect", "i_lb", "v_wg", "v_o", "duty", "duty_sat", "v_ref", "i_ref_mag", "i_a", "i_b", "i_c",
    "i_ref_a", "i_ref_b", "i_ref_c", "e_a", "e_b", "e_c", "u_a", "u_b", "u_c", "s_a", "s_b", "s_c",
    "p_dc", "p_grid", "e_gen", "e_grid", "e_loss", "e_stored",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MpptLogEntry {
    pub t: f64,
    pub rule: MpptRule,
    /// Power averaged over the measurement window, W.
    pub p: f64,
    /// Rectifier-side voltage averaged over the same window, V.
    pub v_meas: f64,
    pub step: f64,
    pub v_ref: f64,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub trace: TimeSeries,
    pub mppt_log: Vec<MpptLogEntry>,
}

struct Controllers {
    duty_pi: PiState,
    dclink_pi: PiState,
    mppt: MpptState,
    duty: f64,
    i_mag: f64,
    switches: [bool; 3],
}

/// Runs the scenario's multi-rate loop and returns the (decimated) trace.
pub fn run_scenario(sc: &Scenario) -> Result<RunOutput> {
    sc.validated()?;
    let plant = Plant::new(sc);
    let solver = &sc.solver;
    let conv = &sc.converter;
    let ctl = &sc.control;
    let dt = solver.dt_plant;
    let n_steps = solver.steps();
    let pi_every = solver.pi_ratio();
    let pi_dt = pi_every as f64 * dt;
    let mppt_every = solver.mppt_ratio();
    let window = ((ctl.mppt.measure_window / dt).round() as u64).clamp(1, mppt_every);
    let decimate = sc.outputs.decimate as u64;
    let v_min = 2.0 * conv.grid_voltage;

    let mut state = plant.initial_state();
    let v_ref0 = ctl.mppt.v_ref_init.unwrap_or(state.v_wg);
    let mppt = MpptState::new(v_ref0, &ctl.mppt);
    let mut c = Controllers {
        duty_pi: PiState {
            integrator: (1.0 - mppt.v_ref / state.v_o).clamp(ctl.boost_pi.out_min, ctl.boost_pi.out_max),
        },
        dclink_pi: PiState::default(),
        mppt,
        duty: 0.0,
        i_mag: 0.0,
        switches: [false; 3],
    };

    let mut trace = TimeSeries::new(CHANNELS.iter().map(|s| s.to_string()).collect());
    let mut log = Vec::new();
    let mut acc_p = 0.0;
    let mut acc_v = 0.0;
    let mut acc_n = 0u64;
    let mut row = vec![0.0; CHANNELS.len()];

    let mut n = 0u64;
    loop {
        let t = n as f64 * dt;
        let phase = n % mppt_every;

        if n > 0 && (phase == 0 || phase > mppt_every - window) {
            acc_p += state.v_wg * state.i_lb;
            acc_v += state.v_wg;
            acc_n += 1;
        }
        if n > 0 && phase == 0 && ctl.mppt.enabled {
            let p = acc_p / acc_n as f64;
            let v = acc_v / acc_n as f64;
            let d = mppt_decide(p, v, &c.mppt, &ctl.mppt);
            c.mppt = d.state;
            log.push(MpptLogEntry {
                t,
                rule: d.rule,
                p,
                v_meas: v,
                step: d.step,
                v_ref: d.state.v_ref,
            });
        }
        if phase == 0 {
            acc_p = 0.0;
            acc_v = 0.0;
            acc_n = 0;
        }
        if n.is_multiple_of(pi_every) {
            c.duty = boost_duty_controller(state.v_wg, c.mppt.v_ref, &mut c.duty_pi, &ctl.boost_pi, pi_dt)
                .clamp(0.0, conv.duty_max);
            c.i_mag = dclink_current_magnitude(state.v_o, ctl.v_o_ref, &mut c.dclink_pi, &ctl.dclink_pi, pi_dt);
        }
        let i_ref = reference_currents(c.i_mag, t, conv.grid_frequency);
        c.switches = hysteresis_comparator(&state.i_abc, &i_ref, ctl.hysteresis.band, c.switches);

        if n.is_multiple_of(decimate) || n == n_steps {
            fill_row(&mut row, &plant, t, &state, &c, &i_ref);
            trace.push(&row)?;
        }
        if n == n_steps {
            break;
        }

        let held = HeldInputs {
            duty: c.duty,
            switches: c.switches,
        };
        let x = integrate_step(&state.to_array(), t, dt, |ts, xs| plant.derivs(ts, xs, held)).map_err(|e| {
            Error::NonFinite {
                channel: STATE_NAMES[e.component],
                t: e.t,
            }
        })?;
        if let Some(k) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                channel: STATE_NAMES[k],
                t: t + dt,
            });
        }
        state = PlantState::from_array(&x);
        state.i_lb = state.i_lb.max(0.0);
        state.v_wg = state.v_wg.max(0.0);
        // three-wire connection: no zero-sequence current
        let cm = (state.i_abc[0] + state.i_abc[1] + state.i_abc[2]) / 3.0;
        state.i_abc = state.i_abc.map(|i| i - cm);
        if state.v_o < v_min {
            return Err(Error::DcLinkCollapse {
                t: t + dt,
                v_o: state.v_o,
                v_min,
            });
        }
        n += 1;
    }

    Ok(RunOutput { trace, mppt_log: log })
}

fn fill_row(row: &mut [f64], plant: &Plant<'_>, t: f64, s: &PlantState, c: &Controllers, i_ref: &[f64; 3]) {
    let sc = plant.scenario;
    let conv = &sc.converter;
    let wind = sc.wind.at(t);
    let gear = sc.drivetrain.gear_ratio;
    let lambda = plant.turbine.params.radius * s.omega / wind;
    let cp = plant.turbine.cp(lambda);
    let p_turbine = plant.turbine.power(wind, lambda).unwrap_or(f64::NAN);
    let bp = bridge_point(gear * s.omega, s.v_wg, &sc.generator);
    let e = grid_emf(t, conv.grid_voltage, conv.grid_frequency);
    let u = vsc_phase_voltage(c.switches, s.v_o);
    let i = s.i_abc;
    let sat = c.duty <= 0.0 || c.duty >= conv.duty_max;
    let values = [
        t,
        wind,
        s.omega,
        gear * s.omega,
        lambda,
        cp,
        p_turbine,
        plant.turbine_torque(wind, s.omega),
        bp.torque,
        bp.id,
        bp.iq,
        bp.i_dc,
        s.i_lb,
        s.v_wg,
        s.v_o,
        c.duty,
        f64::from(u8::from(sat)),
        c.mppt.v_ref,
        c.i_mag,
        i[0],
        i[1],
        i[2],
        i_ref[0],
        i_ref[1],
        i_ref[2],
        e[0],
        e[1],
        e[2],
        u[0],
        u[1],
        u[2],
        f64::from(u8::from(c.switches[0])),
        f64::from(u8::from(c.switches[1])),
        f64::from(u8::from(c.switches[2])),
        s.v_wg * s.i_lb,
        e[0] * i[0] + e[1] * i[1] + e[2] * i[2],
        s.e_gen,
        s.e_grid,
        s.e_loss,
        plant.stored_energy(s),
    ];
    row.copy_from_slice(&values);
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_step_is_identity() {
        let x = [1.5, -2.0, 3.25];
        let y = integrate_step(&x, 0.3, 0.0, |_, s| s.map(|v| v * 7.0)).unwrap();
        assert_eq!(x, y);
    }

    #[test]
    fn exponential_decay_step() {
        let y = integrate_step(&[1.0], 0.0, 0.1, |_, x| [-x[0]]).unwrap();
        // hand-expanded RK4 for dx/dt = -x: 1 - h + h²/2 - h³/6 + h⁴/24
        let h: f64 = 0.1;
        let hand = 1.0 - h + h * h / 2.0 - h.powi(3) / 6.0 + h.powi(4) / 24.0;
        assert!((y[0] - hand).abs() < 1e-15);
        assert!((y[0] - 0.9048375).abs() < 1e-6);
        assert!((y[0] - (-0.1f64).exp()).abs() < 1e-6);
    }

    #[test]
    fn oscillator_energy_over_one_period() {
        let dt = 1e-3;
        let steps = (2.0 * std::f64::consts::PI / dt).round() as usize;
        let mut x = [1.0, 0.0];
        for k in 0..steps {
            x = integrate_step(&x, k as f64 * dt, dt, |_, s| [s[1], -s[0]]).unwrap();
        }
        let energy = 0.5 * (x[0] * x[0] + x[1] * x[1]);
        assert!(((energy - 0.5) / 0.5).abs() < 1e-10);
    }

    #[test]
    fn non_finite_derivative_is_reported() {
        let err = integrate_step(&[1.0, 2.0], 0.5, 0.1, |t, s| if t > 0.52 { [0.0, f64::NAN] } else { *s })
            .unwrap_err();
        assert_eq!(err.component, 1);
        assert!((err.t - 0.55).abs() < 1e-12);
    }

    #[test]
    fn time_series_schema() {
        let mut ts = TimeSeries::new(vec!["t".into(), "x".into()]);
        ts.push(&[0.0, 1.0]).unwrap();
        assert!(ts.push(&[0.0, 2.0]).is_err());
        assert!(ts.push(&[1.0]).is_err());
        ts.push(&[0.5, 2.0]).unwrap();
        assert_eq!(ts.len(), 2);
        assert_eq!(ts.column("x").unwrap(), vec![1.0, 2.0]);
        let mut buf = Vec::new();
        ts.write_csv(&mut buf, &[]).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap(), "t,x\n0,1\n0.5,2\n");
        assert_eq!(TimeSeries::read_csv(&buf[..]).unwrap(), ts);
    }

    #[test]
    fn one_step_run_has_two_records() {
        let mut sc = Scenario::default();
        sc.solver.t_end = sc.solver.dt_plant;
        sc.outputs.decimate = 1;
        sc.outputs.windows.clear();
        let out = run_scenario(&sc).unwrap();
        assert_eq!(out.trace.len(), 2);
        assert_eq!(out.trace.row(0)[0], 0.0);
        assert_eq!(out.trace.row(1)[0], sc.solver.dt_plant);
    }

    #[test]
    fn invalid_scenario_is_rejected() {
        let mut sc = Scenario::default();
        sc.drivetrain.inertia = 0.0;
        assert!(matches!(run_scenario(&sc), Err(Error::Invalid(_))));
    }
}
