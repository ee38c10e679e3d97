use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use dpotts::experiments::{run, run_phase_scan, Artifacts, ExperimentConfig, Mode, ScanParam};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "dpotts", version, about = "Delaunay continuum Potts experiments")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Common {
    /// TOML experiment config.
    #[arg(long)]
    config: PathBuf,
    /// Replaces the seed list with this single seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory, overrides `out` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the mode named in the config.
    Run(Common),
    /// Scan beta or z; values default to the `scan` section.
    PhaseScan {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', conflicts_with = "z")]
        beta: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',')]
        z: Option<Vec<f64>>,
    },
    Thresholds(Common),
    Pseudo(Common),
    Enumerate(Common),
    Sitebond(Common),
}

fn load(c: &Common, mode: Option<Mode>) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(&c.config).with_context(|| format!("reading {}", c.config.display()))?;
    let mut cfg = ExperimentConfig::from_toml(&text)?;
    if let Some(s) = c.seed {
        cfg.seeds = vec![s];
    }
    if let Some(o) = &c.out {
        cfg.out = o.clone();
    }
    if let Some(m) = mode {
        cfg.mode = m;
    }
    Ok(cfg)
}

fn finish(a: Artifacts) -> ExitCode {
    print!("{}", a.report);
    for v in &a.violations {
        eprintln!("violation: {v}");
    }
    if a.violations.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    }
}

fn main_inner() -> Result<ExitCode> {
    let cli = Cli::parse();
    let art = match cli.cmd {
        Cmd::Run(c) => run(&load(&c, None)?)?,
        Cmd::PhaseScan { common, beta, z } => {
            let cfg = load(&common, None)?;
            let (param, values) = match (beta, z) {
                (Some(b), _) => (ScanParam::Beta, b),
                (None, Some(z)) => (ScanParam::Z, z),
                (None, None) if !cfg.scan.beta.is_empty() => (ScanParam::Beta, cfg.scan.beta.clone()),
                (None, None) if !cfg.scan.z.is_empty() => (ScanParam::Z, cfg.scan.z.clone()),
                _ => bail!("no scan values: pass --beta or --z, or fill the scan section"),
            };
            run_phase_scan(&cfg, param, &values)?
        }
        Cmd::Thresholds(c) => run(&load(&c, Some(Mode::Thresholds))?)?,
        Cmd::Pseudo(c) => run(&load(&c, Some(Mode::Pseudo))?)?,
        Cmd::Enumerate(c) => run(&load(&c, Some(Mode::Enumerate))?)?,
        Cmd::Sitebond(c) => run(&load(&c, Some(Mode::Sitebond))?)?,
    };
    Ok(finish(art))
}

fn main() -> ExitCode {
    match main_inner() {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
