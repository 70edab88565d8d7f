//! Command-line front end: simulate a scenario, compare the two barrier
//! controllers, sweep the safe-set grid against the rollout oracle, or run
//! the verification suite.
//!
//! Exit codes: 0 success, 2 safety violation detected, 3 infeasible QP
//! encountered, 4 configuration error. Diagnostics go to standard error;
//! verbosity is controlled by `CBF_OPT_LOG={quiet|info|debug}`.

mod config;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use cbf_opt::model::ControlBounds;
use cbf_opt::oracle::{grid_safe_set, GridSpec, RolloutConfig};
use cbf_opt::sim::{
    acc_barrier_spec, acc_state_for, compare_scenarios, run_scenario, ControllerKind,
    ScenarioConfig, SimulationOutput,
};
use cbf_opt::verification;

use config::{load_config, write_config};
use svg::{PlotSpec, Series};

const EXIT_SAFETY: u8 = 2;
const EXIT_INFEASIBLE: u8 = 3;
const EXIT_CONFIG: u8 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd)]
enum LogLevel {
    Quiet,
    Info,
    Debug,
}

fn log_level() -> LogLevel {
    match std::env::var("CBF_OPT_LOG").as_deref() {
        Ok("quiet") => LogLevel::Quiet,
        Ok("debug") => LogLevel::Debug,
        _ => LogLevel::Info,
    }
}

fn info(msg: &str) {
    if log_level() >= LogLevel::Info {
        eprintln!("{msg}");
    }
}

fn debug(msg: &str) {
    if log_level() >= LogLevel::Debug {
        eprintln!("{msg}");
    }
}

#[derive(Parser)]
#[command(
    name = "cbf-opt",
    about = "Barrier-function safety filtering for bounded-input vehicle following",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Scenario config file (key=value lines).
    #[arg(long)]
    config: PathBuf,
    /// Override the config's controller.
    #[arg(long)]
    controller: Option<String>,
    /// Override the config's integration step.
    #[arg(long)]
    dt: Option<f64>,
    /// Seed for randomized sampling (verification only).
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

#[derive(Subcommand)]
enum Command {
    /// Run one closed-loop scenario and write the trajectory CSV.
    Simulate {
        #[command(flatten)]
        common: CommonArgs,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the optimal and linear controllers on the same scenario; write
    /// a paired CSV and a bound-versus-b SVG.
    Compare {
        #[command(flatten)]
        common: CommonArgs,
        /// Output SVG path.
        #[arg(long)]
        out: PathBuf,
        /// Output path for the paired CSV (default: SVG path with .csv).
        #[arg(long)]
        csv_out: Option<PathBuf>,
    },
    /// Label the phase-plane grid with both the classifier and the
    /// braking-rollout oracle; write the agreement CSV.
    Safeset {
        #[command(flatten)]
        common: CommonArgs,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the verification suite and print one line per check.
    Verify {
        /// Seed for randomized sampling.
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_CONFIG)
        }
    }
}

fn load_scenario(common: &CommonArgs) -> Result<ScenarioConfig, Box<dyn std::error::Error>> {
    let mut cfg = load_config(&common.config)?;
    if let Some(kind) = &common.controller {
        cfg.controller = ControllerKind::parse(kind)?;
    }
    if let Some(dt) = common.dt {
        cfg.dt = dt;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn outcome_exit(outputs: &[&SimulationOutput]) -> ExitCode {
    let violated = outputs.iter().any(|o| {
        o.metrics.violation_steps > 0 || o.aborted_at.is_some()
    });
    let infeasible = outputs.iter().any(|o| o.metrics.infeasible_steps > 0);
    if violated {
        ExitCode::from(EXIT_SAFETY)
    } else if infeasible {
        ExitCode::from(EXIT_INFEASIBLE)
    } else {
        ExitCode::SUCCESS
    }
}

fn run(cli: Cli) -> Result<ExitCode, Box<dyn std::error::Error>> {
    match cli.command {
        Command::Simulate { common, out } => {
            let cfg = load_scenario(&common)?;
            info(&format!(
                "simulating {} controller for {} s at dt = {}",
                cfg.controller.as_str(),
                cfg.t_end,
                cfg.dt
            ));
            debug(&format!("resolved scenario:\n{}", write_config(&cfg)));
            let started = Instant::now();
            let output = run_scenario(&cfg)?;
            debug(&format!("run took {:.2} s", started.elapsed().as_secs_f64()));
            std::fs::write(&out, output.log.to_csv())?;
            print!("{}", output.metrics.to_text());
            if let Some(t) = output.aborted_at {
                eprintln!("aborted on non-finite state at t = {t}");
            }
            if output.metrics.violation_steps > 0 {
                info(&format!(
                    "safety violation: {} steps above tolerance",
                    output.metrics.violation_steps
                ));
            }
            Ok(outcome_exit(&[&output]))
        }
        Command::Compare { common, out, csv_out } => {
            let base = load_scenario(&common)?;
            let mut cfg_a = base.clone();
            cfg_a.controller = ControllerKind::Optimal;
            let mut cfg_b = base;
            cfg_b.controller = ControllerKind::Linear;
            info("comparing optimal and linear controllers");
            let cmp = compare_scenarios(&cfg_a, &cfg_b)?;

            let csv_path = csv_out.unwrap_or_else(|| out.with_extension("csv"));
            std::fs::write(&csv_path, paired_csv(&cmp))?;

            let series = vec![
                Series {
                    label: "optimal".into(),
                    color: "steelblue".into(),
                    points: cmp.output_a.log.bound_vs_b(),
                },
                Series {
                    label: "linear".into(),
                    color: "darkorange".into(),
                    points: cmp.output_b.log.bound_vs_b(),
                },
            ];
            let spec = PlotSpec::bound_vs_b(&series, cfg_a.u_max);
            std::fs::write(&out, svg::render(&spec, &series))?;

            match cmp.onset_delta {
                Some(d) => println!("braking_onset_delta={d:.6}"),
                None => println!("braking_onset_delta=none"),
            }
            print!("{}", prefixed_metrics("optimal_", &cmp.output_a));
            print!("{}", prefixed_metrics("linear_", &cmp.output_b));
            Ok(outcome_exit(&[&cmp.output_a, &cmp.output_b]))
        }
        Command::Safeset { common, out } => {
            let cfg = load_scenario(&common)?;
            let signal = cfg.signal()?;
            let spec = acc_barrier_spec(
                signal.clone(),
                cfg.gamma,
                cfg.u_max,
                cbf_opt::sim::scenario_margin(&cfg)?,
            )?;
            let bounds = ControlBounds::new(cfg.u_max)?;
            let envelope = spec.envelope().expect("headway spec has an envelope").clone();
            let grid = GridSpec {
                b_range: (-50.0, 0.0),
                bdot_range: (0.0, 25.0),
                b_count: 101,
                bdot_count: 101,
            };
            let rollout = RolloutConfig {
                dt: 1e-4,
                horizon: 10.0,
                violation_threshold: 1.0,
            };
            info("sweeping 101x101 phase-plane grid against the rollout oracle");
            let started = Instant::now();
            let report = grid_safe_set(
                &spec,
                &bounds,
                &envelope,
                &grid,
                &|b, bdot| acc_state_for(&signal, cfg.gamma, 0.0, b, bdot),
                0.0,
                &rollout,
            )?;
            debug(&format!(
                "sweep took {:.2} s",
                started.elapsed().as_secs_f64()
            ));
            std::fs::write(&out, report.to_csv())?;
            println!(
                "agreement={:.6}\ndisagreements={}\nerrors={}\nmax_abs_margin_disagreement={}",
                report.agreement.agreement_fraction(),
                report.agreement.disagreements,
                report.agreement.errors,
                report.agreement.max_abs_margin_disagreement
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify { seed } => {
            let mut all_passed = true;
            for result in verification::run_all(seed) {
                println!("{}", result.summary_line());
                all_passed &= result.passed;
            }
            if all_passed {
                println!("verification: all checks passed");
                Ok(ExitCode::SUCCESS)
            } else {
                println!("verification: at least one check failed");
                Ok(ExitCode::from(EXIT_SAFETY))
            }
        }
    }
}

fn paired_csv(cmp: &cbf_opt::sim::Comparison) -> String {
    use std::fmt::Write as _;
    let mut out = String::from(
        "t,b_optimal,cbf_upper_bound_optimal,b_linear,cbf_upper_bound_linear\n",
    );
    let fmt = |x: f64| {
        if x == f64::INFINITY {
            "inf".to_string()
        } else if x == f64::NEG_INFINITY {
            "-inf".to_string()
        } else {
            format!("{x:.11e}")
        }
    };
    for (a, b) in cmp.output_a.log.rows.iter().zip(cmp.output_b.log.rows.iter()) {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            fmt(a.t),
            fmt(a.b),
            fmt(a.cbf_upper_bound),
            fmt(b.b),
            fmt(b.cbf_upper_bound),
        );
    }
    out
}

fn prefixed_metrics(prefix: &str, output: &SimulationOutput) -> String {
    output
        .metrics
        .to_text()
        .lines()
        .map(|line| format!("{prefix}{line}\n"))
        .collect()
}
