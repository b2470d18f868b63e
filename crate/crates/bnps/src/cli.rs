//! The `bnps` command line.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use bnps_core::analysis::{
    calibrate_profile, campus_study, crossover_point, crossover_report, load_sweep, CampusPolicy, CrossoverReport,
};
use bnps_core::sim::{run as simulate, SimConfig};
use bnps_core::trace::{synth_campus, DiurnalParams};
use bnps_core::{ModeLabel, ModePair, PowerProfile};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use crate::error::Error;
use crate::export;
use crate::profile::{format_profile, read_profile, write_profile};
use crate::scenario::read_scenario;
use crate::trace::{load_trace, save_trace};

#[derive(Debug, Parser)]
#[command(name = "bnps", version, about = "AP power save simulator and analysis toolkit")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Global {
    /// Power profile file; the built-in reference profile if omitted.
    #[arg(long, global = true)]
    pub profile: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Print headline numbers as `key = value` lines.
    #[arg(long, global = true)]
    pub summary: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sweep offered load in both modes and fit the power-vs-load lines.
    Crossover {
        /// `start:end:count` or a comma-separated list, in bps.
        #[arg(long, default_value = "1e6:100e6:25")]
        loads: String,
        #[arg(long, default_value_t = 10.0)]
        duration_s: f64,
        /// Calibrate the profile to this crossover (bps) first.
        #[arg(long)]
        target: Option<f64>,
    },
    /// Replay a traffic trace through the static and power-saving AP models.
    Campus {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long, default_value_t = 30e6)]
        threshold: f64,
        #[arg(long, default_value_t = 0.5)]
        doze_fraction: f64,
    },
    /// Run one scenario file.
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
    },
    /// Fit the HCM idle power to a target crossover and write the profile.
    Calibrate {
        #[arg(long)]
        target: f64,
    },
    /// Generate a synthetic campus trace.
    SynthTrace {
        #[arg(long, default_value_t = 470)]
        aps: usize,
        #[arg(long, default_value_t = 1)]
        days: u32,
    },
}

const DEFAULT_SEED: u64 = 1;

/// Parses `start:end:count` or `a,b,c`.
pub fn parse_loads(s: &str) -> Result<Vec<f64>, Error> {
    let bad = || Error::Usage(format!("bad load list {s:?}"));
    let loads = if let [start, end, count] = s.split(':').collect::<Vec<_>>()[..] {
        let start: f64 = start.trim().parse().map_err(|_| bad())?;
        let end: f64 = end.trim().parse().map_err(|_| bad())?;
        let count: usize = count.trim().parse().map_err(|_| bad())?;
        load_sweep(start, end, count)
    } else {
        s.split(',').map(|x| x.trim().parse::<f64>().map_err(|_| bad())).collect::<Result<_, _>>()?
    };
    if loads.is_empty() || loads.iter().any(|l| !(*l >= 0.0 && l.is_finite())) {
        return Err(bad());
    }
    Ok(loads)
}

fn write_file(dir: &Path, name: &str, bytes: &[u8]) -> Result<(), Error> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join(name);
    std::fs::write(&path, bytes).map_err(|e| Error::io(&path, e))
}

fn csv_bytes(f: impl FnOnce(&mut Vec<u8>) -> csv::Result<()>) -> Vec<u8> {
    let mut buf = Vec::new();
    f(&mut buf).expect("writing CSV to memory");
    buf
}

fn print_summary(out: &mut dyn Write, rows: &[(String, String)]) -> Result<(), Error> {
    for (k, v) in rows {
        writeln!(out, "{k} = {v}").map_err(|e| Error::io("<stdout>", e))?;
    }
    Ok(())
}

/// Simulates every (load, mode) point in parallel; the result does not depend on the thread count.
pub fn parallel_crossover(
    loads: &[f64],
    profile: &PowerProfile,
    modes: ModePair,
    cfg: &SimConfig,
) -> Result<CrossoverReport, Error> {
    let jobs: Vec<(f64, ModeLabel)> =
        loads.iter().flat_map(|&l| [(l, ModeLabel::Lcm), (l, ModeLabel::Hcm)]).collect();
    let points = jobs
        .par_iter()
        .map(|&(load, mode)| crossover_point(load, mode, profile, modes.lcm, modes.hcm, cfg))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(crossover_report(points)?)
}

pub fn execute(cli: &Cli, out: &mut dyn Write) -> Result<(), Error> {
    let g = &cli.global;
    let base = match &g.profile {
        Some(p) => read_profile(p)?,
        None => PowerProfile::reference(),
    };
    let modes = ModePair::default();
    match &cli.command {
        Command::Crossover { loads, duration_s, target } => {
            let loads = parse_loads(loads)?;
            if !(*duration_s > 0.0 && duration_s.is_finite()) {
                return Err(Error::Usage(format!("duration must be positive, got {duration_s}")));
            }
            let profile = match target {
                Some(t) => calibrate_profile(*t, modes.lcm, modes.hcm, &base)?,
                None => base,
            };
            let cfg = SimConfig {
                seed: g.seed.unwrap_or(DEFAULT_SEED),
                sim_duration_us: (duration_s * 1e6).round() as u64,
                ..SimConfig::default()
            };
            let r = parallel_crossover(&loads, &profile, modes, &cfg)?;
            write_file(&g.out, "crossover.csv", &csv_bytes(|b| export::write_crossover(b, &r)))?;
            if g.summary {
                let opt = |v: Option<f64>| v.map_or_else(|| "none".to_string(), |v| v.to_string());
                print_summary(out, &[
                    ("crossover_bps".into(), opt(r.crossover_bps)),
                    ("peak_saving_pct".into(), opt(r.peak_saving())),
                    ("saturated_points".into(), r.points.iter().filter(|p| p.saturated).count().to_string()),
                ])?;
            }
        }
        Command::Campus { trace, threshold, doze_fraction } => {
            let t = load_trace(trace)?;
            let policy = CampusPolicy { mode_threshold_bps: *threshold, doze_fraction: *doze_fraction, ..CampusPolicy::default() };
            let r = campus_study(&t.samples, &policy, &base, modes.lcm, modes.hcm)?;
            write_file(&g.out, "per_window.csv", &csv_bytes(|b| export::write_per_window(b, &r)))?;
            write_file(&g.out, "daily.csv", &csv_bytes(|b| export::write_daily(b, &r)))?;
            if g.summary {
                let between = |a, b| r.savings_between(a, b).map_or_else(|| "none".to_string(), |v| v.to_string());
                print_summary(out, &[
                    ("windows".into(), r.windows.len().to_string()),
                    ("gaps".into(), t.gaps.len().to_string()),
                    ("daily_savings_pct".into(), r.daily_savings_pct.to_string()),
                    ("night_savings_pct".into(), between(0, 6)),
                    ("office_savings_pct".into(), between(8, 20)),
                    ("overloaded_windows".into(), r.overloaded_windows.to_string()),
                ])?;
            }
        }
        Command::Simulate { scenario } => {
            let mut f = read_scenario(scenario)?;
            if let Some(seed) = g.seed {
                f.sim.seed = seed;
            }
            let r = simulate(&f.sim, &f.scenario)?;
            write_file(&g.out, "timelines.csv", &csv_bytes(|b| export::write_timelines(b, &r)))?;
            write_file(&g.out, "flows.csv", &csv_bytes(|b| export::write_flows(b, &r)))?;
            write_file(&g.out, "summary.csv", &csv_bytes(|b| export::write_summary(b, &r, &base)))?;
            if g.summary {
                print_summary(out, &export::summary_rows(&r, &base))?;
            }
        }
        Command::Calibrate { target } => {
            let p = calibrate_profile(*target, modes.lcm, modes.hcm, &base)?;
            std::fs::create_dir_all(&g.out).map_err(|e| Error::io(&g.out, e))?;
            write_profile(&g.out.join("calibrated.cfg"), &p)?;
            if g.summary {
                out.write_all(format_profile(&p).as_bytes()).map_err(|e| Error::io("<stdout>", e))?;
            }
        }
        Command::SynthTrace { aps, days } => {
            if *aps == 0 || *days == 0 {
                return Err(Error::Usage("--aps and --days must be positive".into()));
            }
            let samples = synth_campus(*aps, *days, &DiurnalParams::default(), g.seed.unwrap_or(DEFAULT_SEED));
            std::fs::create_dir_all(&g.out).map_err(|e| Error::io(&g.out, e))?;
            save_trace(&g.out.join("trace.csv"), &samples)?;
            if g.summary {
                print_summary(out, &[("samples".into(), samples.len().to_string())])?;
            }
        }
    }
    Ok(())
}

/// Parses `args` (program name first), runs the command and returns the process exit code.
pub fn main_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 { out.write_all(text.as_bytes()) } else { err.write_all(text.as_bytes()) };
            return code;
        }
    };
    match execute(&cli, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn load_lists() {
        assert_eq!(parse_loads("1:3:3").unwrap(), vec![1.0, 2.0, 3.0]);
        assert_eq!(parse_loads("5e6, 1e7").unwrap(), vec![5e6, 1e7]);
        assert!(parse_loads("1:2").is_err());
        assert!(parse_loads("-1").is_err());
        assert!(parse_loads("1:3:0").is_err());
    }
}
