//! `gsx`: noisy graph-state extraction experiments from the command line.

mod config;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use gsx_core::experiment::{
    exact_mean_fidelity, mean_fidelity, results_json, susceptibility, susceptibility_extrapolated,
    susceptibility_first_order, write_csv, SusceptibilityMethod,
};
use gsx_core::verify::{run_checks, VerifyOptions};
use gsx_core::{build_family, ResultRow};

use config::{family_from_args, ConfigError, Format, RunConfig, RunMethod};

#[derive(Parser, Debug)]
#[command(name = "gsx", version, about = "Bell and GHZ extraction from noisy graph states")]
struct Cli {
    /// Worker threads (default: all cores). Results do not depend on this.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct OutputArgs {
    /// Write results here instead of stdout (overrides the config).
    #[arg(long)]
    out: Option<PathBuf>,

    /// Output format (overrides the config; csv by default).
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Args, Debug, Clone)]
struct ConfigArgs {
    /// JSON run configuration; see schema/run-config.schema.json.
    #[arg(long)]
    config: PathBuf,

    /// Master seed (overrides the config).
    #[arg(long)]
    seed: Option<u64>,

    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Print a template graph as JSON.
    Families {
        /// path, twisted_pair, crazy, ghz_path_star or ghz_crazy_star.
        #[arg(long)]
        kind: String,
        #[arg(long)]
        n: usize,
        /// Arms of a star template.
        #[arg(long)]
        arms: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Mean extraction fidelity over a noise grid.
    Run(ConfigArgs),
    /// Noise susceptibility per template length.
    Suscept(ConfigArgs),
    /// Built-in oracle checks.
    Verify {
        #[arg(long, value_enum)]
        format: Option<Format>,
        /// Negative control: flip observed measurement signs.
        #[arg(long, hide = true)]
        inject_sign_bug: bool,
    },
}

/// Exit codes of the tool.
mod exit {
    pub const VERIFY_FAILED: u8 = 1;
    pub const CONFIG: u8 = 2;
    pub const EMPTY: u8 = 3;
}

fn sink(path: Option<&PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("cannot create {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_rows(rows: &[ResultRow], cfg: &RunConfig, args: &OutputArgs) -> Result<()> {
    let path = args.out.as_ref().or(cfg.output.path.as_ref());
    let format = args.format.or(cfg.output.format).unwrap_or(Format::Csv);
    let mut w = sink(path)?;
    match format {
        Format::Csv => write_csv(rows, &mut w)?,
        Format::Json => {
            serde_json::to_writer_pretty(&mut w, &results_json(rows))?;
            writeln!(w)?;
        }
    }
    w.flush()?;
    Ok(())
}

fn all_empty(rows: &[ResultRow]) -> bool {
    rows.iter().all(|r| r.mean_fidelity.is_none() && r.alpha.is_none())
}

fn cmd_families(kind: &str, n: usize, arms: Option<usize>, out: Option<&PathBuf>) -> Result<ExitCode> {
    let spec = family_from_args(kind, n, arms)?;
    let g = build_family(&spec).map_err(ConfigError::from)?;
    let mut w = sink(out)?;
    serde_json::to_writer_pretty(&mut w, &g.to_json())?;
    writeln!(w)?;
    w.flush()?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_run(args: &ConfigArgs) -> Result<ExitCode> {
    let cfg = RunConfig::load(&args.config)?;
    let plan = cfg.run_plan(args.seed)?;
    let mut rows = Vec::new();
    for proto in &plan.protocols {
        for model in &plan.models {
            let row = match plan.method {
                RunMethod::MonteCarlo => {
                    let r = mean_fidelity(proto, model, plan.n_samples, plan.seed)?;
                    ResultRow::from_experiment(proto, model, &r, plan.seed)
                }
                RunMethod::Exact => ResultRow::from_exact(proto, model, exact_mean_fidelity(proto, model)?),
            };
            rows.push(row);
        }
    }
    write_rows(&rows, &cfg, &args.output)?;
    if all_empty(&rows) {
        eprintln!("gsx: no accepted samples at any grid point");
        return Ok(ExitCode::from(exit::EMPTY));
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_suscept(args: &ConfigArgs) -> Result<ExitCode> {
    let cfg = RunConfig::load(&args.config)?;
    let plan = cfg.suscept_plan(args.seed)?;
    let mut rows = Vec::new();
    for proto in &plan.protocols {
        let result = match plan.method {
            SusceptibilityMethod::DiscreteDerivative => {
                susceptibility(proto, plan.kind, plan.p_star, plan.n_samples, plan.seed)
            }
            SusceptibilityMethod::FirstOrderExact => susceptibility_first_order(proto, plan.kind),
            SusceptibilityMethod::Extrapolated => susceptibility_extrapolated(proto, plan.kind, plan.p_star),
        };
        let seed = (plan.method == SusceptibilityMethod::DiscreteDerivative).then_some(plan.seed);
        let row = match result {
            Ok(s) => ResultRow::from_susceptibility(proto, plan.kind, &s, plan.n_samples, seed)?,
            Err(gsx_core::Error::EmptyEstimate) => {
                let mut row = ResultRow::from_exact(proto, &plan.kind.with_probability(plan.p_star)?, None);
                row.method = plan.method.name().into();
                row.seed = seed;
                row
            }
            Err(e) => return Err(e.into()),
        };
        rows.push(row);
    }
    write_rows(&rows, &cfg, &args.output)?;
    if all_empty(&rows) {
        eprintln!("gsx: no template accepted any outcome");
        return Ok(ExitCode::from(exit::EMPTY));
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_verify(format: Option<Format>, inject_sign_bug: bool) -> Result<ExitCode> {
    let opts = VerifyOptions {
        inject_sign_bug,
        ..VerifyOptions::new()
    };
    let reports = run_checks(&opts);
    let mut out = io::stdout().lock();
    match format.unwrap_or(Format::Csv) {
        Format::Json => {
            serde_json::to_writer_pretty(&mut out, &reports)?;
            writeln!(out)?;
        }
        Format::Csv => {
            for r in &reports {
                writeln!(out, "{} {}: {}", if r.passed { "PASS" } else { "FAIL" }, r.name, r.detail)?;
            }
        }
    }
    let failed = reports.iter().filter(|r| !r.passed).count();
    if failed > 0 {
        eprintln!("gsx: {failed} of {} checks failed", reports.len());
        return Ok(ExitCode::from(exit::VERIFY_FAILED));
    }
    Ok(ExitCode::SUCCESS)
}

fn dispatch(cli: &Cli) -> Result<ExitCode> {
    if let Some(k) = cli.threads {
        if k == 0 {
            return Err(ConfigError("--threads must be at least 1".into()).into());
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
            .context("cannot start the worker pool")?;
    }
    match &cli.command {
        Command::Families { kind, n, arms, out } => cmd_families(kind, *n, *arms, out.as_ref()),
        Command::Run(args) => cmd_run(args),
        Command::Suscept(args) => cmd_suscept(args),
        Command::Verify { format, inject_sign_bug } => cmd_verify(*format, *inject_sign_bug),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("gsx: {e:#}");
            if e.downcast_ref::<ConfigError>().is_some() {
                ExitCode::from(exit::CONFIG)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
