use std::collections::BTreeMap;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use lamsym::numeric::{monitor, StepConfig};
use lamsym::{corpus, run_checks, Problem, Report, RunConfig};

/// Checks symmetries, Λ-symmetries and Λ-constants of motion.
#[derive(Parser)]
#[command(name = "lamsym", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run checks on a problem file.
    Check {
        #[arg(long)]
        problem: PathBuf,
        /// Comma separated check names; defaults to the problem's selection.
        #[arg(long, value_delimiter = ',')]
        select: Option<Vec<String>>,
        #[command(flatten)]
        opts: ReportOpts,
    },
    /// Integrate the equations of motion and print a CSV trajectory.
    Integrate {
        #[arg(long)]
        problem: PathBuf,
        /// Initial values, e.g. "q1=0.5,p1=1".
        #[arg(long)]
        ic: String,
        #[arg(long, default_value_t = 1.0)]
        t1: f64,
        #[arg(long, default_value_t = 1e-3)]
        step: f64,
        /// Semicolon separated expressions appended as columns.
        #[arg(long)]
        monitor: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every bundled problem.
    Corpus {
        #[command(flatten)]
        opts: ReportOpts,
    },
}

#[derive(Args)]
struct ReportOpts {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 100)]
    samples: usize,
    /// Absolute tolerance of the sampling tier.
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    report: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Json,
}

impl ReportOpts {
    fn config(&self, select: Option<Vec<String>>) -> RunConfig {
        RunConfig { seed: self.seed, samples: self.samples, tol: self.tol, select }
    }
}

fn emit(out: Option<&PathBuf>, text: &str) -> anyhow::Result<()> {
    match out {
        Some(path) => std::fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            Ok(stdout.flush()?)
        }
    }
}

fn render(reports: &[Report], format: Format, single: bool) -> String {
    match format {
        Format::Text => reports.iter().map(Report::to_text).collect(),
        Format::Json if single => reports[0].to_json() + "\n",
        Format::Json => corpus::to_json(reports),
    }
}

fn parse_ic(s: &str) -> anyhow::Result<BTreeMap<String, f64>> {
    let mut out = BTreeMap::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (k, v) = part.split_once('=').with_context(|| format!("expected name=value, got `{part}`"))?;
        let v: f64 = v.trim().parse().with_context(|| format!("bad number in `{part}`"))?;
        if out.insert(k.trim().to_string(), v).is_some() {
            bail!("`{}` given twice", k.trim());
        }
    }
    Ok(out)
}

/// `Ok(true)` when every report passed.
fn run(cli: Cli) -> anyhow::Result<bool> {
    match cli.cmd {
        Cmd::Check { problem, select, opts } => {
            let p = Problem::load(&problem).with_context(|| format!("loading {}", problem.display()))?;
            let report = run_checks(&p, &opts.config(select));
            emit(opts.out.as_ref(), &render(std::slice::from_ref(&report), opts.report, true))?;
            Ok(report.passed())
        }
        Cmd::Integrate { problem, ic, t1, step, monitor: exprs, out } => {
            let p = Problem::load(&problem).with_context(|| format!("loading {}", problem.display()))?;
            let cfg = StepConfig::new(0.0, t1, step);
            let traj = p.integrate(&parse_ic(&ic)?, &cfg)?;
            let labels: Vec<String> =
                exprs.iter().flat_map(|m| m.split(';')).map(str::trim).filter(|s| !s.is_empty()).map(String::from).collect();
            let parsed = labels.iter().map(|s| p.expr(s)).collect::<lamsym::Result<Vec<_>>>()?;
            let series = monitor(&traj, &parsed)?;
            emit(out.as_ref(), &traj.to_csv_with(&labels, &series))?;
            if let Some(d) = &traj.diagnostic {
                eprintln!("warning: trajectory truncated: {d}");
                return Ok(false);
            }
            Ok(true)
        }
        Cmd::Corpus { opts } => {
            let reports = corpus::run_all(&opts.config(None))?;
            emit(opts.out.as_ref(), &render(&reports, opts.report, false))?;
            Ok(reports.iter().all(Report::passed))
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
