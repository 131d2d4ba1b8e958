//! Batch front end: `fracwave <task> --config <path> [--set key=value ...] [--out dir]`.

pub mod config;
pub mod expr;
pub mod output;
pub mod tasks;

use crate::error::Error;
use clap::{Parser, ValueEnum};
use config::{load_scenario, Scenario, Task};
use output::{OutputDir, RunReport};
use std::path::{Path, PathBuf};
use std::time::Instant;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_CHECK_FAILED: i32 = 3;

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum TaskArg {
    Direct,
    Ip1,
    Ip2,
    MlfTable,
    Convergence,
    PropsCheck,
}

impl From<TaskArg> for Task {
    fn from(t: TaskArg) -> Self {
        match t {
            TaskArg::Direct => Task::Direct,
            TaskArg::Ip1 => Task::Ip1,
            TaskArg::Ip2 => Task::Ip2,
            TaskArg::MlfTable => Task::MlfTable,
            TaskArg::Convergence => Task::Convergence,
            TaskArg::PropsCheck => Task::PropsCheck,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "fracwave",
    version,
    about = "Time-fractional wave equation: direct and inverse source solvers"
)]
pub struct Args {
    /// Task to run; replaces the task named in the config.
    pub task: TaskArg,
    /// Scenario file (JSON).
    #[arg(long)]
    pub config: PathBuf,
    /// Override a config entry, e.g. --set grid.steps=1024
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Output directory; defaults to out/<scenario name>.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn task_name(t: Task) -> &'static str {
    match t {
        Task::Direct => "direct",
        Task::Ip1 => "ip1",
        Task::Ip2 => "ip2",
        Task::MlfTable => "mlf-table",
        Task::Convergence => "convergence",
        Task::PropsCheck => "props-check",
    }
}

/// Errors in the input rather than in the numerics.
pub fn is_validation_error(e: &Error) -> bool {
    matches!(
        e,
        Error::Config { .. }
            | Error::Scenario(_)
            | Error::Boundary(_)
            | Error::Ellipticity(_)
            | Error::Io(_)
    )
}

fn write_report(dir: &Path, rep: &RunReport) -> std::io::Result<()> {
    let text = serde_json::to_string_pretty(rep).expect("report serializes");
    std::fs::write(dir.join("report.json"), text + "\n")
}

/// Runs a parsed scenario, writing outputs and report.json into `out`.
pub fn run_scenario(sc: &Scenario, out: &Path) -> (RunReport, i32) {
    let start = Instant::now();
    let mut rep = RunReport::new(&sc.name, task_name(sc.task));
    let mut dir = match OutputDir::new(out) {
        Ok(d) => d,
        Err(e) => {
            rep.passed = false;
            rep.error = Some(e.to_string());
            return (rep, EXIT_INVALID);
        }
    };
    let result = tasks::run_task(sc, &mut dir, &mut rep);
    rep.outputs = dir.files().to_vec();
    rep.outputs.push("report.json".into());
    rep.timing("total", start.elapsed().as_secs_f64());
    let code = match &result {
        Ok(()) if rep.passed => EXIT_OK,
        Ok(()) => EXIT_CHECK_FAILED,
        Err(e) => {
            rep.passed = false;
            rep.error = Some(format!("scenario `{}`: {e}", sc.name));
            if is_validation_error(e) {
                EXIT_INVALID
            } else {
                EXIT_CHECK_FAILED
            }
        }
    };
    if let Err(e) = write_report(dir.path(), &rep) {
        log::error!("cannot write report.json: {e}");
        return (rep, EXIT_INVALID);
    }
    (rep, code)
}

fn configure_threads() {
    if let Ok(v) = std::env::var("FRACWAVE_THREADS") {
        match v.parse::<usize>() {
            Ok(n) if n > 0 => {
                if let Err(e) = rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build_global()
                {
                    log::warn!("FRACWAVE_THREADS ignored: {e}");
                }
            }
            _ => log::warn!("FRACWAVE_THREADS={v} is not a positive integer; ignored"),
        }
    }
}

/// Entry point of the binary; returns the process exit code.
pub fn main_with(args: Args) -> i32 {
    configure_threads();
    let mut sc = match load_scenario(&args.config, &args.set) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_INVALID;
        }
    };
    sc.task = args.task.into();
    let out = args
        .out
        .unwrap_or_else(|| PathBuf::from("out").join(&sc.name));
    let (rep, code) = run_scenario(&sc, &out);
    for c in &rep.checks {
        let rel = match c.relation {
            output::Relation::AtMost => "<=",
            output::Relation::AtLeast => ">=",
        };
        println!(
            "{} {}: {:e} {rel} {:e}",
            if c.pass { "PASS" } else { "FAIL" },
            c.name,
            c.value,
            c.threshold
        );
    }
    if let Some(e) = &rep.error {
        eprintln!("error: {e}");
    }
    println!("report: {}", out.join("report.json").display());
    code
}
