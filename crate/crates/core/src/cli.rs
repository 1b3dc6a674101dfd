//! Command-line entry point. Exit codes: 0 success, 1 configuration or I/O
//! error, 2 an experiment's assertion suite failed.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::{parse_policies, Config};
use crate::error::{Error, Result};
use crate::experiments::{self, Assertion};
use crate::policies::{Policy, PolicySpec};
use crate::simulator::{run as simulate, summarize, write_records_csv};
use crate::workload::synthetic_trace;

/// Environment variable that overrides the default results directory.
pub const RESULTS_DIR_ENV: &str = "GREENFARM_RESULTS_DIR";

#[derive(Debug, Parser)]
#[command(name = "greenfarm", version, about = "Energy-aware server allocation experiments")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// TOML configuration; the shipped defaults are used when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed for every random stream.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Results directory (default: $GREENFARM_RESULTS_DIR or `results`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Farm size S.
    #[arg(long, global = true)]
    pub scale: Option<u64>,
    /// Number of observation windows to simulate.
    #[arg(long, global = true)]
    pub windows: Option<usize>,
}

#[derive(Debug, Args)]
pub struct Selection {
    /// Comma-separated policies, e.g. `static:all,adaptive:0.2,optimal`.
    #[arg(long, value_delimiter = ',')]
    pub policies: Option<Vec<String>>,
    /// Comma-separated load fractions, e.g. `0.3,0.6,0.9`.
    #[arg(long, value_delimiter = ',')]
    pub loads: Option<Vec<f64>>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Predicted revenue against the number of running servers.
    Sweep {
        #[arg(long, value_delimiter = ',')]
        loads: Option<Vec<f64>>,
    },
    /// Simulated policy comparison under Poisson arrivals and exponential services.
    Compare(Selection),
    /// Policy comparison under log-normal interarrival and service times.
    Variability(Selection),
    /// Trace-driven comparison over a demand trace.
    Trace {
        /// `hour,rate` CSV; the configured or synthetic trace otherwise.
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long, value_delimiter = ',')]
        policies: Option<Vec<String>>,
    },
    /// One simulation run of one policy at one load.
    Simulate {
        #[arg(long)]
        policy: Option<String>,
        #[arg(long)]
        load: Option<f64>,
    },
    /// Parses and checks a configuration file.
    ValidateConfig,
    /// Writes the synthetic demand trace as `hour,rate` CSV.
    GenTrace {
        /// Output file; stdout when omitted.
        #[arg(long)]
        file: Option<PathBuf>,
    },
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(true) => 0,
        Ok(false) => 2,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn results_dir(global: &GlobalArgs) -> PathBuf {
    global
        .out
        .clone()
        .or_else(|| std::env::var_os(RESULTS_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("results"))
}

fn load_config(global: &GlobalArgs) -> Result<Config> {
    let base = match &global.config {
        Some(path) => Config::load(path)?,
        None => Config::shipped(),
    };
    base.with_overrides(global.seed, global.scale, global.windows)
}

fn check_loads(loads: &[f64]) -> Result<()> {
    if let Some(l) = loads.iter().find(|l| !(**l > 0.0 && **l < 1.0)) {
        return Err(Error::config("loads", format!("{l} is not in (0, 1)")));
    }
    if loads.is_empty() {
        return Err(Error::config("loads", "empty list"));
    }
    Ok(())
}

fn policies_or(given: &Option<Vec<String>>, default: &[String]) -> Result<Vec<PolicySpec>> {
    parse_policies("policies", given.as_deref().unwrap_or(default))
}

fn loads_or(given: &Option<Vec<f64>>, default: &[f64]) -> Result<Vec<f64>> {
    let loads = given.clone().unwrap_or_else(|| default.to_vec());
    check_loads(&loads)?;
    Ok(loads)
}

fn report(assertions: &[Assertion]) -> bool {
    for a in assertions {
        let mark = if a.passed { "ok  " } else { "FAIL" };
        println!("  [{mark}] {}: {}", a.name, a.detail);
    }
    let passed = experiments::all_passed(assertions);
    println!(
        "{} of {} checks passed",
        assertions.iter().filter(|a| a.passed).count(),
        assertions.len()
    );
    passed
}

fn print_runs(runs: &[experiments::PointResult]) {
    println!(
        "{:<16} {:>6} {:>12} {:>10} {:>12} {:>8}",
        "policy", "load", "revenue $/h", "loss", "energy kWh", "busy/on"
    );
    for r in runs {
        let s = &r.summary;
        println!(
            "{:<16} {:>6} {:>12.3} {:>10.5} {:>12.1} {:>8.4}",
            r.policy, r.load, s.mean_revenue_per_hour, s.loss_fraction, s.total_energy_kwh, s.busy_running_ratio
        );
    }
}

fn execute(cli: &Cli) -> Result<bool> {
    let g = &cli.global;
    if let Command::ValidateConfig = cli.command {
        let cfg = load_config(g)?;
        let origin = g.config.as_deref().unwrap_or(Path::new("<shipped defaults>"));
        println!(
            "{}: valid (S = {}, {} h windows, {} h runs)",
            origin.display(),
            cfg.farm.capacity,
            cfg.farm.window_hours,
            cfg.farm.duration_hours
        );
        return Ok(true);
    }
    let cfg = load_config(g)?;
    let out = results_dir(g);
    let e = &cfg.experiment;
    match &cli.command {
        Command::ValidateConfig => unreachable!(),
        Command::Sweep { loads } => {
            let loads = loads_or(loads, &e.sweep_loads)?;
            let curves = experiments::sweep_revenue_vs_n(&loads, &cfg)?;
            let dir = experiments::experiment_dir(&out, "sweep")?;
            experiments::write_sweep_curves(&dir, &curves)?;
            let checks = experiments::sweep_assertions(&curves);
            experiments::write_outputs(&dir, &curves, &checks)?;
            for c in &curves {
                println!(
                    "load {:<6} lambda {:>10.2}/h  best n {:>7}  revenue {:>10.3} $/h",
                    c.load, c.lambda, c.best_n, c.best_revenue
                );
            }
            println!("wrote {}", dir.display());
            Ok(report(&checks))
        }
        Command::Compare(sel) => {
            let policies = policies_or(&sel.policies, &e.compare_policies)?;
            let loads = loads_or(&sel.loads, &e.compare_loads)?;
            let runs = experiments::compare_policies(
                &policies,
                &loads,
                cfg.workload.arrival,
                cfg.workload.service,
                &cfg,
            )?;
            let dir = experiments::experiment_dir(&out, "compare")?;
            experiments::write_runs(&dir, &runs, "")?;
            let checks = experiments::compare_assertions(&runs, cfg.farm.capacity);
            experiments::write_outputs(&dir, &runs, &checks)?;
            print_runs(&runs);
            println!("wrote {}", dir.display());
            Ok(report(&checks))
        }
        Command::Variability(sel) => {
            let policies = policies_or(&sel.policies, &e.variability_policies)?;
            let loads = loads_or(&sel.loads, &e.variability_loads)?;
            let (ca2, cs2) = (e.variability_ca2, e.variability_cs2);
            let v = experiments::run_variability(&policies, &loads, ca2, cs2, &cfg)?;
            let dir = experiments::experiment_dir(&out, "variability")?;
            experiments::write_runs(&dir, &v.lognormal, "")?;
            experiments::write_runs(&dir, &v.markovian, "_markovian")?;
            let checks = experiments::variability_assertions(&v, ca2, cs2);
            experiments::write_outputs(&dir, &v, &checks)?;
            println!("log-normal (ca2 = {ca2}, cs2 = {cs2}):");
            print_runs(&v.lognormal);
            println!("markovian reference:");
            print_runs(&v.markovian);
            println!("sample SCVs: ca2 {:.4}, cs2 {:.4}", v.sample_ca2, v.sample_cs2);
            println!("wrote {}", dir.display());
            Ok(report(&checks))
        }
        Command::Trace { trace, policies } => {
            let policies = policies_or(policies, &e.trace_policies)?;
            let mut cfg = cfg.clone();
            if let Some(path) = trace {
                cfg.experiment.trace_file = Some(path.clone());
            }
            let rates = experiments::resolve_trace(&cfg)?;
            let t = experiments::run_nonstationary(
                &rates,
                &policies,
                cfg.experiment.trace_window_hours,
                g.windows,
                &cfg,
            )?;
            let dir = experiments::experiment_dir(&out, "trace")?;
            experiments::write_runs(&dir, &t.runs, "")?;
            let checks = experiments::trace_assertions(&t, cfg.farm.capacity);
            experiments::write_outputs(&dir, &t, &checks)?;
            println!("horizon {} h", t.horizon_hours);
            print_runs(&t.runs);
            println!("wrote {}", dir.display());
            Ok(report(&checks))
        }
        Command::Simulate { policy, load } => {
            let name = policy.clone().unwrap_or_else(|| cfg.policy.kind.clone());
            let spec = parse_policies("policy", &[name])?[0];
            let load = load.unwrap_or(cfg.workload.load);
            check_loads(&[load])?;
            let mut p = Policy::new(spec, cfg.revenue_model(), cfg.policy.forecast)?;
            let result = simulate(&mut p, cfg.workload_spec(load), &cfg.sim_config(cfg.farm.window_hours))?;
            let summary = summarize(&result);
            let dir = experiments::experiment_dir(&out, "simulate")?;
            let path = dir.join(format!("{spec}_{}.csv", experiments::load_label(load)));
            write_records_csv(&result.records, std::io::BufWriter::new(std::fs::File::create(&path)?))?;
            experiments::write_outputs(&dir, &summary, &[])?;
            println!(
                "{spec} at load {load}: {} arrivals, loss {:.5}, revenue {:.3} $/h, energy {:.1} kWh, busy/on {:.4}",
                summary.arrivals,
                summary.loss_fraction,
                summary.mean_revenue_per_hour,
                summary.total_energy_kwh,
                summary.busy_running_ratio
            );
            println!("wrote {}", path.display());
            Ok(true)
        }
        Command::GenTrace { file } => {
            let trace = synthetic_trace(&e.synthetic_trace)?;
            match file {
                Some(path) => {
                    trace.write_csv(std::io::BufWriter::new(std::fs::File::create(path)?))?;
                    println!("wrote {}", path.display());
                }
                None => trace.write_csv(std::io::stdout().lock())?,
            }
            Ok(true)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn help_and_version_exit_zero() {
        assert_eq!(run(["greenfarm", "--help"]), 0);
        assert_eq!(run(["greenfarm", "--version"]), 0);
    }

    #[test]
    fn unknown_flag_exits_one() {
        assert_eq!(run(["greenfarm", "validate-config", "--bogus"]), 1);
        assert_eq!(run(["greenfarm", "frobnicate"]), 1);
    }

    #[test]
    fn validate_shipped_config() {
        assert_eq!(run(["greenfarm", "validate-config"]), 0);
    }

    #[test]
    fn bad_load_is_a_config_error() {
        assert!(check_loads(&[0.3, 1.2]).is_err());
        assert!(check_loads(&[]).is_err());
        assert!(check_loads(&[0.3]).is_ok());
    }
}
