use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use condcorrupt::score::CorruptionForm;
use condcorrupt_lab::{cmd_sample, cmd_sweep, cmd_verify, ExperimentConfig, LabError, LabResult, Target};

/// Linear diffusion models under condition-embedding corruption.
///
/// Worker threads default to the number of cores; the THREADS environment
/// variable overrides that default, and --threads overrides both.
#[derive(Parser)]
#[command(name = "condcorrupt", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the oracle and property checks; exit 0 iff all pass.
    Verify {
        #[command(flatten)]
        common: Common,
    },
    /// Evaluate a target over gamma_grid × dims × n_per_class and write CSV.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        target: Target,
    },
    /// Write raw reverse-ODE samples as CSV.
    Sample {
        #[command(flatten)]
        common: Common,
        /// Corruption magnitude; defaults to the largest entry of gamma_grid.
        #[arg(long)]
        gamma: Option<f64>,
    },
}

#[derive(Args)]
struct Common {
    /// JSON configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output CSV path.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long, value_enum)]
    form: Option<FormArg>,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormArg {
    Isotropic,
    RankOne,
}

impl From<FormArg> for CorruptionForm {
    fn from(f: FormArg) -> Self {
        match f {
            FormArg::Isotropic => CorruptionForm::Isotropic,
            FormArg::RankOne => CorruptionForm::RankOne,
        }
    }
}

impl Common {
    fn resolve(&self) -> LabResult<ExperimentConfig> {
        let mut cfg = match (&self.config, self.seed) {
            (Some(path), _) => ExperimentConfig::load(path)?,
            (None, Some(seed)) => ExperimentConfig::with_seed(seed),
            (None, None) => return Err(LabError::Config("a seed is required (--seed or config file)".into())),
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(out) = &self.out {
            cfg.output = Some(out.clone());
        }
        if let Some(t) = self.threads {
            cfg.threads = Some(t);
        }
        if let Some(f) = self.form {
            cfg.form = f.into();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn init_threads(cfg: &ExperimentConfig) -> LabResult<()> {
    let threads = match cfg.threads {
        Some(t) => Some(t),
        None => match std::env::var("THREADS") {
            Ok(v) => Some(v.parse().map_err(|_| LabError::Config(format!("THREADS={v} is not a positive integer")))?),
            Err(_) => None,
        },
    };
    if let Some(n) = threads {
        if n == 0 {
            return Err(LabError::Config("thread count must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| LabError::Config(e.to_string()))?;
    }
    Ok(())
}

fn require_output(cfg: &ExperimentConfig) -> LabResult<PathBuf> {
    cfg.output.clone().ok_or_else(|| LabError::Config("an output path is required (--out or config)".into()))
}

fn run(cli: Cli) -> LabResult<bool> {
    match cli.command {
        Command::Verify { common } => {
            let cfg = common.resolve()?;
            init_threads(&cfg)?;
            cmd_verify(&cfg, cfg.output.as_deref())
        }
        Command::Sweep { common, target } => {
            let cfg = common.resolve()?;
            init_threads(&cfg)?;
            let out = require_output(&cfg)?;
            let rows = cmd_sweep(&cfg, target, &out)?;
            println!("wrote {} rows to {}", rows.len(), out.display());
            Ok(true)
        }
        Command::Sample { common, gamma } => {
            let cfg = common.resolve()?;
            init_threads(&cfg)?;
            let out = require_output(&cfg)?;
            let gamma = gamma.unwrap_or_else(|| cfg.gamma_grid.iter().copied().fold(0.0, f64::max));
            if !(gamma.is_finite() && gamma >= 0.0) {
                return Err(LabError::Config(format!("gamma {gamma} must be finite and >= 0")));
            }
            cmd_sample(&cfg, gamma, &out)?;
            println!("wrote {} samples to {}", cfg.moment_samples, out.display());
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
