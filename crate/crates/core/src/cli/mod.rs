//! Command-line front end: `run`, `sweep` and `plotdata`.
//!
//! Log verbosity comes from `WECS_LOG` (`error`, `warn`, `info`, `debug`, …),
//! default `info`.

pub mod summary;
pub mod svg;

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use log::{info, warn};
use rayon::prelude::*;
use serde_json::Value;

use crate::error::{Error, Result};
use crate::scenario::{Scenario, WindProfile};
use crate::simcore::{run_scenario, MpptLogEntry, TimeSeries};

pub use summary::{SummaryStats, WindowStats};

pub const LOG_ENV: &str = "WECS_LOG";

#[derive(Debug, Parser)]
#[command(name = "wecs", version, about = "Grid-connected wind energy conversion system simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a scenario and write trace.csv, summary.json and mppt_log.csv.
    Run {
        scenario: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Record every N-th plant step (overrides outputs.decimate).
        #[arg(long)]
        decimate: Option<usize>,
    },
    /// Run one simulation per value of a scenario parameter.
    Sweep {
        scenario: PathBuf,
        /// Dotted path into the scenario (e.g. `control.mppt.delta_v`), or
        /// `wind` for a constant wind speed, or `v_ref` for a frozen reference.
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long, allow_hyphen_values = true)]
        values: String,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Extract channels from a trace as (t, value) CSV files and SVG charts.
    Plotdata {
        trace: PathBuf,
        /// Comma-separated channel names.
        #[arg(long)]
        channels: String,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn main() -> i32 {
    let _ = env_logger::Builder::from_env(env_logger::Env::new().filter_or(LOG_ENV, "info"))
        .format_timestamp(None)
        .try_init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cmd: &Command) -> Result<()> {
    match cmd {
        Command::Run { scenario, out, decimate } => run(scenario, out, *decimate).map(|_| ()),
        Command::Sweep {
            scenario,
            param,
            values,
            out,
        } => sweep(scenario, param, &parse_list(values, "--values")?, out).map(|_| ()),
        Command::Plotdata { trace, channels, out } => {
            let channels: Vec<String> = parse_list(channels, "--channels")?;
            plotdata(trace, &channels, out)
        }
    }
}

fn parse_list<T: std::str::FromStr>(text: &str, flag: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    let items: Vec<&str> = text.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
    if items.is_empty() {
        return Err(Error::Usage(format!("{flag} needs at least one entry")));
    }
    items
        .into_iter()
        .map(|s| s.parse::<T>().map_err(|e| Error::Usage(format!("{flag}: `{s}`: {e}"))))
        .collect()
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

pub fn write_mppt_log(path: &Path, log: &[MpptLogEntry]) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(["t", "rule", "p", "v_meas", "step", "v_ref"])?;
    for e in log {
        w.write_record([
            e.t.to_string(),
            e.rule.to_string(),
            e.p.to_string(),
            e.v_meas.to_string(),
            e.step.to_string(),
            e.v_ref.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_summary(path: &Path, s: &SummaryStats) -> Result<()> {
    let text = serde_json::to_string_pretty(s).expect("summary serializes");
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

pub fn read_trace(path: &Path) -> Result<TimeSeries> {
    TimeSeries::read_csv(File::open(path).map_err(|e| Error::io(path, e))?)
}

/// `run`: simulate one scenario file into `out`.
pub fn run(path: &Path, out: &Path, decimate: Option<usize>) -> Result<SummaryStats> {
    let mut sc = Scenario::load(path)?;
    if let Some(n) = decimate {
        sc.outputs.decimate = n;
    }
    sc.validated()?;
    info!("running {} ({} plant steps)", path.display(), sc.solver.steps());
    let res = run_scenario(&sc)?;
    create_dir(out)?;
    res.trace
        .write_csv(create(&out.join("trace.csv"))?, &sc.outputs.channels)?;
    // the summary is built from exactly the columns written to the file
    let written = res.trace.select(&sc.outputs.channels)?;
    let summary = SummaryStats::from_trace(&written, &sc).with_log(res.mppt_log);
    write_summary(&out.join("summary.json"), &summary)?;
    write_mppt_log(&out.join("mppt_log.csv"), &summary.mppt_log)?;
    for w in &summary.windows {
        if let (Some(cp), Some(l)) = (w.cp, w.lambda) {
            info!("window [{}, {}] s: mean Cp {cp:.4}, mean lambda {l:.3}", w.t_start, w.t_end);
        }
    }
    if let Some(r) = summary.energy_residual {
        info!("energy residual {r:.3e}");
    }
    Ok(summary)
}

/// Sets a numeric scenario field addressed by a dotted path; numeric
/// segments index arrays.
pub fn set_parameter(sc: &Scenario, path: &str, value: f64) -> Result<Scenario> {
    match path {
        "wind" => {
            let mut s = sc.clone();
            s.wind = WindProfile::constant(value);
            return Ok(s);
        }
        "v_ref" => {
            let mut s = sc.clone();
            s.control.mppt.enabled = false;
            s.control.mppt.v_ref_init = Some(value);
            return Ok(s);
        }
        _ => {}
    }
    let unknown = || Error::UnknownParameter(path.to_string());
    let mut root = serde_json::to_value(sc).expect("scenario serializes");
    let mut node = &mut root;
    for seg in path.split('.') {
        node = match node {
            Value::Object(m) => m.get_mut(seg).ok_or_else(unknown)?,
            Value::Array(a) => seg.parse::<usize>().ok().and_then(|i| a.get_mut(i)).ok_or_else(unknown)?,
            _ => return Err(unknown()),
        };
    }
    if !(node.is_number() || node.is_null()) {
        return Err(unknown());
    }
    let integral = node.is_u64() || node.is_i64();
    *node = if integral {
        if value.fract() != 0.0 || value < 0.0 {
            return Err(Error::Usage(format!("{path} takes a non-negative integer, got {value}")));
        }
        Value::from(value as u64)
    } else {
        Value::from(value)
    };
    serde_json::from_value(root).map_err(|e| Error::Usage(format!("{path} = {value}: {e}")))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    pub window: (f64, f64),
    pub stats: Option<WindowStats>,
    pub status: String,
}

/// Steady-state averaging window for a sweep run: the scenario's last
/// declared window, or the final fifth of the run.
fn sweep_window(sc: &Scenario) -> (f64, f64) {
    let t_end = sc.solver.t_end;
    match sc.outputs.windows.last() {
        Some(&(a, b)) if b <= t_end + 1e-12 => (a, b),
        _ => (0.8 * t_end, t_end),
    }
}

/// `sweep`: one run per value (in parallel), summarized to `sweep_summary.csv`.
pub fn sweep(path: &Path, param: &str, values: &[f64], out: &Path) -> Result<Vec<SweepRow>> {
    if values.is_empty() {
        return Err(Error::Usage("--values needs at least one entry".into()));
    }
    let base = Scenario::load(path)?;
    let scenarios = values
        .iter()
        .map(|&v| {
            let s = set_parameter(&base, param, v)?;
            s.validated()?;
            Ok(s)
        })
        .collect::<Result<Vec<_>>>()?;
    info!("sweeping {param} over {} values", values.len());
    let results: Vec<Result<WindowStats>> = scenarios
        .par_iter()
        .map(|s| {
            let res = run_scenario(s)?;
            let (a, b) = sweep_window(s);
            Ok(summary::window_stats(&res.trace, a, b))
        })
        .collect();

    let rows: Vec<SweepRow> = values
        .iter()
        .zip(&scenarios)
        .zip(&results)
        .map(|((&value, s), r)| SweepRow {
            value,
            window: sweep_window(s),
            stats: r.as_ref().ok().cloned(),
            status: match r {
                Ok(_) => "ok".into(),
                Err(e) => e.to_string(),
            },
        })
        .collect();

    create_dir(out)?;
    let file = out.join("sweep_summary.csv");
    let mut w = csv::Writer::from_writer(create(&file)?);
    w.write_record(["value", "t_start", "t_end", "v_ref", "v_wg", "p_dc", "p_grid", "cp", "lambda", "status"])?;
    let cell = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
    for r in &rows {
        let s = r.stats.as_ref();
        w.write_record([
            r.value.to_string(),
            r.window.0.to_string(),
            r.window.1.to_string(),
            cell(s.and_then(|s| s.v_ref)),
            cell(s.and_then(|s| s.v_wg)),
            cell(s.and_then(|s| s.p_dc)),
            cell(s.and_then(|s| s.p_grid)),
            cell(s.and_then(|s| s.cp)),
            cell(s.and_then(|s| s.lambda)),
            r.status.clone(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(&file, e))?;

    if let Some(e) = results.into_iter().find_map(|r| r.err()) {
        warn!("some sweep runs failed; see the status column of {}", file.display());
        return Err(e);
    }
    Ok(rows)
}

/// `plotdata`: writes `<channel>.csv` and `<channel>.svg` into `out`.
pub fn plotdata(trace_path: &Path, channels: &[String], out: &Path) -> Result<()> {
    if channels.is_empty() {
        return Err(Error::Usage("--channels needs at least one entry".into()));
    }
    let trace = read_trace(trace_path)?;
    let cols = channels
        .iter()
        .map(|c| trace.require(c))
        .collect::<Result<Vec<_>>>()?;
    create_dir(out)?;
    let t = trace.column("t").expect("trace has t");
    for (name, &k) in channels.iter().zip(&cols) {
        let y: Vec<f64> = trace.rows().map(|r| r[k]).collect();
        let csv_path = out.join(format!("{name}.csv"));
        let mut w = csv::Writer::from_writer(create(&csv_path)?);
        w.write_record(["t", name.as_str()])?;
        for (a, b) in t.iter().zip(&y) {
            w.write_record([a.to_string(), b.to_string()])?;
        }
        w.flush().map_err(|e| Error::io(&csv_path, e))?;
        let svg_path = out.join(format!("{name}.svg"));
        fs::write(&svg_path, svg::line_chart(name, &t, &y)).map_err(|e| Error::io(&svg_path, e))?;
        info!("wrote {} and {}", csv_path.display(), svg_path.display());
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dotted_paths() {
        let sc = Scenario::default();
        let s = set_parameter(&sc, "control.mppt.delta_v", 2.5).unwrap();
        assert_eq!(s.control.mppt.delta_v, 2.5);
        let s = set_parameter(&sc, "wind.points.1.1", 11.0).unwrap();
        assert_eq!(s.wind.points[1], (10.0, 11.0));
        let s = set_parameter(&sc, "generator.pole_pairs", 6.0).unwrap();
        assert_eq!(s.generator.pole_pairs, 6);
        assert!(matches!(set_parameter(&sc, "generator.pole_pairs", 2.5), Err(Error::Usage(_))));
        let s = set_parameter(&sc, "control.mppt.v_ref_init", 200.0).unwrap();
        assert_eq!(s.control.mppt.v_ref_init, Some(200.0));
    }

    #[test]
    fn pseudo_parameters() {
        let sc = Scenario::default();
        let s = set_parameter(&sc, "wind", 7.0).unwrap();
        assert_eq!(s.wind.at(0.0), 7.0);
        assert_eq!(s.wind.at(15.0), 7.0);
        let s = set_parameter(&sc, "v_ref", 210.0).unwrap();
        assert!(!s.control.mppt.enabled);
        assert_eq!(s.control.mppt.v_ref_init, Some(210.0));
    }

    #[test]
    fn unknown_paths() {
        let sc = Scenario::default();
        for p in ["nope", "control.mppt", "control.mppt.delta_v.x", "wind.points.9.0", "control.mppt.enabled", ""] {
            assert!(matches!(set_parameter(&sc, p, 1.0), Err(Error::UnknownParameter(_))), "{p}");
        }
    }

    #[test]
    fn list_parsing() {
        assert_eq!(parse_list::<f64>("1, 2,3", "x").unwrap(), vec![1.0, 2.0, 3.0]);
        assert!(matches!(parse_list::<f64>("", "x"), Err(Error::Usage(_))));
        assert!(matches!(parse_list::<f64>(" , ", "x"), Err(Error::Usage(_))));
        assert!(matches!(parse_list::<f64>("1,a", "x"), Err(Error::Usage(_))));
    }
}
