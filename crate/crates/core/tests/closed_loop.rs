use wecs::control::reference_current_slopes;
use wecs::machine::bridge_point;
use wecs::power::grid_emf;
use wecs::scenario::WindProfile;
use wecs::simcore::run_scenario;
use wecs::{Error, Scenario, TimeSeries};

fn constant(wind: f64, t_end: f64) -> Scenario {
    let mut sc = Scenario::default();
    sc.wind = WindProfile::constant(wind);
    sc.solver.t_end = t_end;
    sc.outputs.windows.clear();
    sc
}

fn col(tr: &TimeSeries, name: &str) -> usize {
    tr.index_of(name).unwrap()
}

fn mean_over(tr: &TimeSeries, name: &str, a: f64, b: f64) -> f64 {
    let k = col(tr, name);
    let v: Vec<f64> = tr.rows().filter(|r| r[0] >= a && r[0] <= b).map(|r| r[k]).collect();
    v.iter().sum::<f64>() / v.len() as f64
}

#[test]
fn current_error_follows_filter_dynamics() {
    let mut sc = constant(8.0, 0.05);
    sc.outputs.decimate = 1;
    let tr = run_scenario(&sc).unwrap().trace;
    let c = &sc.converter;
    let dt = sc.solver.dt_plant;
    let phases = [("i_a", "i_ref_a", "u_a"), ("i_b", "i_ref_b", "u_b"), ("i_c", "i_ref_c", "u_c")];
    let (imag, vo) = (col(&tr, "i_ref_mag"), col(&tr, "v_o"));
    let scale = tr.row(0)[vo] / c.filter_inductance;
    let mut checked = 0;
    for n in 0..tr.len() - 1 {
        let (r0, r1) = (tr.row(n), tr.row(n + 1));
        if r0[imag] != r1[imag] {
            continue;
        }
        let tm = r0[0] + 0.5 * dt;
        let e = grid_emf(tm, c.grid_voltage, c.grid_frequency);
        let slope = reference_current_slopes(r0[imag], tm, c.grid_frequency);
        for (k, (i, ir, u)) in phases.iter().enumerate() {
            let (i, ir, u) = (col(&tr, i), col(&tr, ir), col(&tr, u));
            let de = ((r1[i] - r1[ir]) - (r0[i] - r0[ir])) / dt;
            let i_mid = 0.5 * (r0[i] + r1[i]);
            let want = (r0[u] - e[k] - c.filter_resistance * i_mid) / c.filter_inductance - slope[k];
            assert!((de - want).abs() < 1e-3 * scale, "t = {} phase {k}: {de} vs {want}", r0[0]);
            checked += 1;
        }
    }
    assert!(checked > 20_000);
}

#[test]
fn steady_operation_at_constant_wind() {
    let sc = constant(8.0, 10.0);
    let tr = run_scenario(&sc).unwrap().trace;
    let (a, b) = (8.0, 10.0);
    let d = mean_over(&tr, "duty", a, b);
    let v_wg = mean_over(&tr, "v_wg", a, b);
    let v_o = mean_over(&tr, "v_o", a, b);
    assert!((v_o / v_wg * (1.0 - d) - 1.0).abs() < 0.01, "boost ratio {} vs {}", v_o / v_wg, 1.0 / (1.0 - d));
    let v_ref = mean_over(&tr, "v_ref", a, b);
    assert!((v_wg / v_ref - 1.0).abs() < 0.01, "v_wg {v_wg} v_ref {v_ref}");

    let t_turb = mean_over(&tr, "t_turbine", a, b);
    let t_gen = mean_over(&tr, "t_gen", a, b);
    let omega = mean_over(&tr, "omega", a, b);
    let dt = &sc.drivetrain;
    let surplus = t_turb - dt.gear_ratio * t_gen - dt.friction * omega;
    assert!(surplus.abs() < 0.01 * t_turb, "torque surplus {surplus} of {t_turb}");

    let cp = mean_over(&tr, "cp", a, b);
    let cp_opt = wecs::aero::Turbine::new(sc.turbine.clone()).cp_opt;
    assert!((cp / cp_opt - 1.0).abs() < 0.02, "Cp {cp}");
    let p_grid = mean_over(&tr, "p_grid", a, b);
    assert!(p_grid > 0.9 * mean_over(&tr, "p_dc", a, b));
}

#[test]
fn air_gap_power_balances_bridge_output() {
    let sc = constant(8.0, 0.3);
    let tr = run_scenario(&sc).unwrap().trace;
    let (tg, wg, ir, vwg) = (col(&tr, "t_gen"), col(&tr, "omega_g"), col(&tr, "i_rect"), col(&tr, "v_wg"));
    for r in tr.rows() {
        let bp = bridge_point(r[wg], r[vwg], &sc.generator);
        let lhs = r[tg] * r[wg];
        let rhs = r[vwg] * r[ir] + bp.p_copper;
        assert!((lhs - rhs).abs() <= 1e-9 * lhs.abs().max(1.0), "t = {}: {lhs} vs {rhs}", r[0]);
    }
}

#[test]
fn dc_link_is_held_through_the_wind_step() {
    let mut sc = Scenario::default();
    sc.wind.points = vec![(0.0, 8.0), (6.0, 10.0)];
    sc.solver.t_end = 8.0;
    sc.outputs.windows.clear();
    let tr = run_scenario(&sc).unwrap().trace;
    let vo = col(&tr, "v_o");
    let v_ref = sc.control.v_o_ref;
    for r in tr.rows().filter(|r| r[0] >= 5.0) {
        assert!((r[vo] / v_ref - 1.0).abs() <= 0.05, "v_o {} at t = {}", r[vo], r[0]);
    }
}

#[test]
fn record_counts() {
    let mut sc = constant(8.0, 5e-6);
    let tr = run_scenario(&sc).unwrap().trace;
    assert_eq!(tr.len(), 2);
    assert_eq!(tr.row(1)[0], 5e-6);

    sc.solver.t_end = 0.05;
    sc.outputs.decimate = 100;
    let steps = sc.solver.steps() as usize;
    let tr = run_scenario(&sc).unwrap().trace;
    assert_eq!(tr.len(), steps / 100 + 1);
    assert!(tr.column("t").unwrap().windows(2).all(|w| w[1] > w[0]));
}

#[test]
fn oversized_grid_demand_collapses_the_dc_link() {
    let mut sc = constant(8.0, 0.5);
    sc.control.dclink_pi.out_min = 30.0;
    let err = run_scenario(&sc).unwrap_err();
    assert!(matches!(err, Error::DcLinkCollapse { .. }), "{err}");
    assert_eq!(err.exit_code(), 3);
}

#[test]
fn invalid_scenario_is_rejected_before_running() {
    let mut sc = constant(8.0, 0.01);
    sc.control.v_o_ref = 100.0;
    match run_scenario(&sc) {
        Err(Error::Invalid(v)) => assert!(v.iter().any(|v| v.field == "control.v_o_ref")),
        other => panic!("{other:?}"),
    }
}
