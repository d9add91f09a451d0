use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::commands;
use crate::config::{ExperimentConfig, Overrides};
use crate::error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "stochpoisson", version, about = "Structure-preserving integrators for stochastic Poisson systems")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample path of the scheme next to a fine midpoint reference.
    Paths(Flags),
    /// Casimir values along the scheme and Euler-Maruyama comparators.
    Casimir(Flags),
    /// Root mean-square errors against a coupled reference, with fitted slopes.
    Order(Flags),
    /// Structure, chart, symplecticity and Poisson-map validators.
    Check(Flags),
}

#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// TOML file with experiment settings; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// `srb`, `slv`, or a custom system file.
    #[arg(long)]
    pub system: Option<String>,
    /// Model parameter override, repeatable.
    #[arg(long = "param", value_name = "KEY=VALUE", value_parser = parse_param)]
    pub params: Vec<(String, f64)>,
    #[arg(long, value_delimiter = ',')]
    pub alpha: Option<Vec<f64>>,
    /// Step size(s); `order` uses the whole list, the others the first entry.
    #[arg(long, value_delimiter = ',')]
    pub h: Option<Vec<f64>>,
    #[arg(long = "t-end", short = 'T')]
    pub t_end: Option<f64>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Increment truncation strength; 0 disables truncation.
    #[arg(long = "truncation-k")]
    pub truncation_k: Option<f64>,
    /// Fixed-point tolerance of the implicit schemes.
    #[arg(long)]
    pub tol: Option<f64>,
    /// CSV destination; standard output if absent.
    #[arg(long, short = 'o')]
    pub output: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub y0: Option<Vec<f64>>,
    /// Reference step as a fraction of the finest step in `order`.
    #[arg(long = "reference-divisor")]
    pub reference_divisor: Option<f64>,
    /// Use the spherical-coordinate midpoint scheme (rigid body only).
    #[arg(long)]
    pub spherical: bool,
    /// Exclude failed Monte Carlo samples instead of aborting.
    #[arg(long = "drop-failed")]
    pub drop_failed: bool,
}

fn parse_param(s: &str) -> Result<(String, f64), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected KEY=VALUE, got '{s}'"))?;
    let v: f64 = v.trim().parse().map_err(|e| format!("bad value for {k}: {e}"))?;
    Ok((k.trim().to_string(), v))
}

impl Flags {
    fn overrides(&self) -> Overrides {
        Overrides {
            system: self.system.clone(),
            params: self.params.iter().cloned().collect::<BTreeMap<_, _>>(),
            alpha: self.alpha.clone(),
            h: self.h.clone(),
            t_end: self.t_end,
            samples: self.samples,
            seed: self.seed,
            truncation_k: self.truncation_k,
            tol: self.tol,
            output: self.output.clone(),
            y0: self.y0.clone(),
            reference_divisor: self.reference_divisor,
            spherical: self.spherical.then_some(true),
            drop_failed: self.drop_failed.then_some(true),
        }
    }

    /// Defaults, then the config file, then the flags.
    pub fn resolve(&self) -> CliResult<ExperimentConfig> {
        let mut cfg = ExperimentConfig::default();
        if let Some(path) = &self.config {
            let base = path.parent().map(|p| p.to_path_buf());
            cfg.apply(Overrides::from_file(path)?, base.as_deref());
        }
        cfg.apply(self.overrides(), None);
        cfg.validate()?;
        Ok(cfg)
    }
}

pub fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Paths(f) => commands::paths(&f.resolve()?),
        Command::Casimir(f) => commands::casimir(&f.resolve()?),
        Command::Order(f) => commands::order(&f.resolve()?),
        Command::Check(f) => commands::check(&f.resolve()?),
    }
}

impl From<clap::Error> for CliError {
    fn from(e: clap::Error) -> Self {
        CliError::Config(e.to_string())
    }
}
