//! Argument parsing and config resolution.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use mzweak_core::fit::FitMethod;

use crate::config::{ExperimentConfig, Figure, Mode, OperatorSpec, OutputFormat, StateSpec};
use crate::error::CliError;
use crate::{execute, CONFIG_SCHEMA};

#[derive(Debug, Parser)]
#[command(name = "mzweak", version, about = "Polar decomposition, interferometric visibility and weak-measurement experiments")]
pub struct Cli {
    /// Experiment config (JSON). Flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Hold the fringe phase fixed between frames.
    #[arg(long, global = true)]
    pub stabilized: bool,
    #[arg(long, global = true, value_enum)]
    pub format: Option<OutputFormat>,
    #[arg(long, global = true)]
    pub no_svg: bool,
    /// Leave timestamps out of the manifest and plots.
    #[arg(long, global = true)]
    pub no_timestamps: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Polar-decompose an operator and rebuild ⟨ψ|A|ψ⟩ from the weak value.
    Decompose {
        /// Operator preset (lowering, raising, identity, pauli_x, pauli_y, pauli_z, proj_h, proj_v).
        #[arg(long)]
        operator: Option<String>,
        /// Pre-selected state preset (h, v, plus, minus, right, left).
        #[arg(long)]
        psi: Option<String>,
    },
    /// Closed-form interferometer sweep over the HWP angle.
    MziTheory,
    /// Generate synthetic camera frames.
    Synth {
        #[arg(long)]
        n_frames: Option<usize>,
    },
    /// Fit the visibility of profile files.
    Fit {
        inputs: Vec<PathBuf>,
        /// envelope, full_model or two_beam.
        #[arg(long)]
        method: Option<FitMethod>,
    },
    /// Synthesize and fit frames over the HWP angle, with and without R.
    Sweep {
        #[arg(long)]
        n_frames: Option<usize>,
    },
    /// Pointer-shift simulation of the weak measurement.
    Weakmeas,
    /// Regenerate one of the figure datasets.
    Reproduce {
        #[arg(value_enum)]
        figure: Figure,
        #[arg(long)]
        n_frames: Option<usize>,
    },
    /// Run whatever mode the config names.
    Run,
    /// Print the config JSON schema.
    Schema,
}

impl Command {
    fn mode(&self) -> Option<Mode> {
        Some(match self {
            Command::Decompose { .. } => Mode::Decompose,
            Command::MziTheory => Mode::MziTheory,
            Command::Synth { .. } => Mode::Synth,
            Command::Fit { .. } => Mode::Fit,
            Command::Sweep { .. } => Mode::Sweep,
            Command::Weakmeas => Mode::Weakmeas,
            Command::Reproduce { .. } => Mode::Reproduce,
            Command::Run | Command::Schema => return None,
        })
    }
}

/// Merge the config file (if any) with the command line.
pub fn resolve_config(cli: &Cli) -> Result<ExperimentConfig, CliError> {
    let loaded = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            Some(ExperimentConfig::from_json(&text).map_err(|e| e.context(&path.display().to_string()))?)
        }
        None => None,
    };
    let mut cfg = match (cli.command.mode(), loaded) {
        (Some(mode), Some(cfg)) if cfg.mode != mode => {
            return Err(CliError::Config(format!(
                "config mode '{}' does not match command '{}'",
                cfg.mode.as_str(),
                mode.as_str()
            )))
        }
        (_, Some(cfg)) => cfg,
        (Some(mode), None) => ExperimentConfig::new(mode),
        (None, None) => return Err(CliError::Config("run needs --config".into())),
    };

    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if cli.stabilized {
        cfg.stabilized = true;
    }
    if let Some(f) = cli.format {
        cfg.output.format = f;
    }
    if cli.no_svg {
        cfg.output.svg = false;
    }
    if cli.no_timestamps {
        cfg.output.timestamps = false;
    }
    match &cli.command {
        Command::Decompose { operator, psi } => {
            if let Some(op) = operator {
                cfg.decompose.operator = OperatorSpec::Preset(op.clone());
            }
            if let Some(p) = psi {
                cfg.decompose.psi = StateSpec::Preset(p.clone());
            }
        }
        Command::Synth { n_frames: Some(n) } => cfg.synth.n_frames = *n,
        Command::Sweep { n_frames: Some(n) } => cfg.sweep.n_frames = *n,
        Command::Fit { inputs, method } => {
            if !inputs.is_empty() {
                cfg.paths.inputs = inputs.clone();
            }
            if let Some(m) = method {
                cfg.fit.method = *m;
            }
        }
        Command::Reproduce { figure, n_frames } => {
            cfg.reproduce.figure = Some(*figure);
            if let Some(n) = n_frames {
                cfg.reproduce.n_frames = *n;
            }
        }
        _ => {}
    }
    if let Some(out) = &cli.out {
        cfg.paths.output_dir = Some(out.clone());
    }
    if cfg.paths.output_dir.is_none() {
        let leaf = match (cfg.mode, cfg.reproduce.figure) {
            (Mode::Reproduce, Some(f)) => f.as_str(),
            (m, _) => m.as_str(),
        };
        cfg.paths.output_dir = Some(PathBuf::from("out").join(leaf));
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Parse, run and report; returns the process exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    if matches!(cli.command, Command::Schema) {
        print!("{CONFIG_SCHEMA}");
        return 0;
    }
    let result = resolve_config(&cli).and_then(|cfg| execute(&cfg));
    match result {
        Ok(report) => {
            if !report.summary.is_empty() {
                println!("{}", report.summary);
            }
            let dir = report.manifest.config.paths.output_dir.as_ref().map(|p| p.display().to_string()).unwrap_or_default();
            println!("wrote {} files to {dir}", report.manifest.outputs.len() + 1);
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
