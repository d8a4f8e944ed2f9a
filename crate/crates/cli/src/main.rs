use std::f64::consts::TAU;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Parser, Subcommand};
use mcsim_core::filterdesign::design_input_filter;
use mcsim_core::sim::{report, Summary};
use mcsim_core::{run, RunOptions, Scenario, SimError};
use rayon::prelude::*;
use serde_json::json;

#[derive(Parser)]
#[command(name = "mcsim", version, about = "Matrix converter simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one scenario and write waveforms and summary.json.
    Run {
        scenario: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Clip invalid duty matrices instead of aborting.
        #[arg(long)]
        allow_overmodulation: bool,
    },
    /// Run a scenario over a range of one parameter, in parallel.
    Sweep {
        scenario: PathBuf,
        /// `key=start:stop:step`, e.g. `q=0.1:1.1:0.05`.
        #[arg(long)]
        param: String,
        /// Write `sweep.json` here.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        allow_overmodulation: bool,
    },
    /// Distortion table across previously written summary.json files.
    Report {
        summaries: Vec<PathBuf>,
        #[arg(long)]
        json: bool,
    },
    /// Size the input LC filter.
    DesignFilter {
        /// Rated power, W.
        #[arg(long)]
        p: f64,
        /// Input phase peak voltage, V.
        #[arg(long)]
        vm: f64,
        /// Input frequency, Hz.
        #[arg(long)]
        fi: f64,
        /// Cutoff frequency, Hz.
        #[arg(long)]
        fc: f64,
        /// Switching frequency to check the cutoff against, Hz.
        #[arg(long)]
        fsw: Option<f64>,
        #[arg(long)]
        json: bool,
    },
}

/// An error together with the process exit code it maps to.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl Failure {
    fn config(error: impl Into<anyhow::Error>) -> Self {
        Self {
            code: 2,
            error: error.into(),
        }
    }

    fn other(error: impl Into<anyhow::Error>) -> Self {
        Self {
            code: 1,
            error: error.into(),
        }
    }
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        Self {
            code: e.exit_code() as u8,
            error: e.into(),
        }
    }
}

fn load(path: &Path) -> Result<Scenario, Failure> {
    let s = Scenario::load(path).map_err(|e| Failure::config(anyhow!(e).context(format!("{}", path.display()))))?;
    s.validate()
        .map_err(|e| Failure::config(anyhow!(e).context(format!("{}", path.display()))))?;
    Ok(s)
}

fn cmd_run(path: &Path, out: &Path, allow_overmodulation: bool) -> Result<(), Failure> {
    let s = load(path)?;
    let result = run(&s, RunOptions { allow_overmodulation })?;
    result
        .write_outputs(out)
        .with_context(|| format!("writing results to {}", out.display()))
        .map_err(Failure::other)?;
    println!("{}", result.brief());
    for note in &result.summary.notes {
        println!("note: {note}");
    }
    println!("wrote {}", out.display());
    Ok(())
}

/// Parses `key=start:stop:step` into the key and the inclusive value list.
fn parse_range(spec: &str) -> anyhow::Result<(String, Vec<f64>)> {
    let (key, range) = spec
        .split_once('=')
        .ok_or_else(|| anyhow!("expected key=start:stop:step"))?;
    let parts: Vec<f64> = range
        .split(':')
        .map(|p| p.trim().parse::<f64>().with_context(|| format!("bad number `{p}`")))
        .collect::<anyhow::Result<_>>()?;
    let [start, stop, step] = parts[..] else {
        bail!("expected key=start:stop:step");
    };
    if !(start.is_finite() && stop.is_finite() && step.is_finite()) || step <= 0.0 || stop < start {
        bail!("range needs finite start <= stop and step > 0");
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    if n > 100_000 {
        bail!("range has too many points");
    }
    let values = (0..=n).map(|k| start + k as f64 * step).collect();
    Ok((key.trim().to_string(), values))
}

fn cmd_sweep(path: &Path, param: &str, out: Option<&Path>, allow_overmodulation: bool) -> Result<(), Failure> {
    let base = load(path)?;
    let (key, values) = parse_range(param).map_err(Failure::config)?;
    let mut scenarios = Vec::with_capacity(values.len());
    for &v in &values {
        let mut s = base.clone();
        s.set_param(&key, v).map_err(Failure::config)?;
        scenarios.push(s);
    }
    let opts = RunOptions { allow_overmodulation };
    let outcomes: Vec<Result<Summary, SimError>> =
        scenarios.par_iter().map(|s| run(s, opts).map(|r| r.summary)).collect();

    let mut rows = Vec::with_capacity(values.len());
    let mut last_ok = None;
    for (v, outcome) in values.iter().zip(&outcomes) {
        match outcome {
            Ok(s) => {
                last_ok = Some(*v);
                let pct = |x: Option<f64>| x.map_or("n/a".to_string(), |t| format!("{:.2}%", 100.0 * t));
                println!(
                    "{key}={v:<10.6} ok    q_meas={:.4} thd_out_i={} thd_in_i={}",
                    s.transfer_ratio_measured,
                    pct(s.thd_out.current_wideband),
                    pct(s.thd_in.current_wideband)
                );
                rows.push(json!({ "value": v, "ok": true, "summary": s }));
            }
            Err(e) => {
                println!("{key}={v:<10.6} error (exit {}) {e}", e.exit_code());
                rows.push(json!({ "value": v, "ok": false, "exit_code": e.exit_code(), "error": e.to_string() }));
            }
        }
    }
    match last_ok {
        Some(v) => println!("largest successful {key}: {v}"),
        None => println!("no successful run"),
    }
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)
            .and_then(|_| {
                let text = serde_json::to_string_pretty(&json!({ "param": key, "runs": rows })).expect("json");
                std::fs::write(dir.join("sweep.json"), text + "\n")
            })
            .with_context(|| format!("writing {}", dir.display()))
            .map_err(Failure::other)?;
    }
    Ok(())
}

fn label_for(path: &Path) -> String {
    let is_summary = path.file_name().is_some_and(|n| n == "summary.json");
    let named = if is_summary {
        path.parent().and_then(|p| p.file_name())
    } else {
        path.file_stem()
    };
    named.map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into_owned())
}

fn cmd_report(paths: &[PathBuf], as_json: bool) -> Result<(), Failure> {
    let mut results = Vec::with_capacity(paths.len());
    for p in paths {
        let text = std::fs::read_to_string(p)
            .with_context(|| format!("reading {}", p.display()))
            .map_err(Failure::config)?;
        let summary: Summary = serde_json::from_str(&text)
            .with_context(|| format!("parsing {}", p.display()))
            .map_err(Failure::config)?;
        results.push((label_for(p), summary));
    }
    let table = report(&results);
    if as_json {
        println!("{}", table.to_json());
    } else {
        print!("{}", table.to_text());
    }
    Ok(())
}

fn cmd_design_filter(p: f64, vm: f64, fi: f64, fc: f64, fsw: Option<f64>, as_json: bool) -> Result<(), Failure> {
    let d = design_input_filter(p, vm, TAU * fi, fc).map_err(Failure::config)?;
    if let Some(f_sw) = fsw {
        d.check_switching(f_sw).map_err(Failure::config)?;
    }
    let gain = d.gain(10.0 * fc, None);
    if as_json {
        let v = json!({
            "c_f": d.c_f,
            "l_f": d.l_f,
            "f_c": d.f_c,
            "resonance_hz": d.resonance_hz(),
            "characteristic_impedance_ohm": d.characteristic_impedance(),
            "gain_at_10fc": gain,
        });
        println!("{}", serde_json::to_string_pretty(&v).expect("json"));
    } else {
        println!("C_f = {:.6e} F", d.c_f);
        println!("L_f = {:.6e} H", d.l_f);
        println!("resonance = {:.3} Hz", d.resonance_hz());
        println!("Z0 = {:.4} ohm", d.characteristic_impedance());
        println!("gain at 10 f_c = {gain:.5}");
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run {
            scenario,
            out,
            allow_overmodulation,
        } => cmd_run(scenario, out, *allow_overmodulation),
        Command::Sweep {
            scenario,
            param,
            out,
            allow_overmodulation,
        } => cmd_sweep(scenario, param, out.as_deref(), *allow_overmodulation),
        Command::Report { summaries, json } => cmd_report(summaries, *json),
        Command::DesignFilter {
            p,
            vm,
            fi,
            fc,
            fsw,
            json,
        } => cmd_design_filter(*p, *vm, *fi, *fc, *fsw, *json),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn range_parsing() {
        let (k, v) = parse_range("q=0.1:1.1:0.05").unwrap();
        assert_eq!(k, "q");
        assert_eq!(v.len(), 21);
        assert!((v[20] - 1.1).abs() < 1e-12);
        let (_, v) = parse_range("f_o=30:30:1").unwrap();
        assert_eq!(v, vec![30.0]);
        assert!(parse_range("q=1:0:0.1").is_err());
        assert!(parse_range("q=0:1:0").is_err());
        assert!(parse_range("q=0:1").is_err());
        assert!(parse_range("q0:1:0.1").is_err());
    }

    #[test]
    fn report_labels() {
        assert_eq!(label_for(Path::new("runs/rl/summary.json")), "rl");
        assert_eq!(label_for(Path::new("motor.json")), "motor");
    }
}
