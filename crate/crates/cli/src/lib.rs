//! The `xpcs` command-line tool: configuration, output handling and the
//! subcommands that drive `xpcs-core`.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::config::{MethodChoice, Needs, PipelineConfig};
use crate::error::{CliError, CliResult};
use crate::output::{OutputDir, Provenance};

#[derive(Debug, Parser)]
#[command(
    name = "xpcs",
    version,
    about = "Speckle and XPCS analysis of atomistic trajectories"
)]
pub struct Cli {
    /// TOML configuration file.
    #[arg(long, short, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, global = true, env = "XPCS_THREADS")]
    pub threads: Option<usize>,
    #[arg(long, global = true, value_enum)]
    pub method: Option<MethodChoice>,
    /// Output directory.
    #[arg(long, global = true, env = "XPCS_OUT")]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Report flagged fits as warnings and exit 0.
    #[arg(long, global = true)]
    pub lenient: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Speckle intensity fields per frame, optional detector images.
    Speckle,
    /// g2(τ) per ring.
    Correlate,
    /// Speckle contrast against exposure and superposition.
    Contrast,
    /// Decay fits, dispersion and diffusivity.
    Fit,
    /// Direct vs FFT timings.
    Bench,
    /// Write the input trajectory as XYZ and cache.
    Generate,
    /// g(r) and S(q) of the input trajectory.
    Validate,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Speckle => "speckle",
            Command::Correlate => "correlate",
            Command::Contrast => "contrast",
            Command::Fit => "fit",
            Command::Bench => "bench",
            Command::Generate => "generate",
            Command::Validate => "validate",
        }
    }

    fn needs(self, cfg: &PipelineConfig) -> Needs {
        let fields_input = matches!(cfg.input, Some(config::InputSpec::Fields { .. }));
        match self {
            Command::Speckle => Needs {
                input: true,
                rings: 0,
                grid: true,
            },
            Command::Correlate | Command::Contrast => Needs {
                input: true,
                rings: 1,
                grid: !fields_input,
            },
            Command::Fit => Needs {
                input: true,
                rings: commands::MIN_RINGS,
                grid: !fields_input,
            },
            Command::Bench => Needs {
                input: false,
                rings: 0,
                grid: false,
            },
            Command::Generate | Command::Validate => Needs {
                input: true,
                rings: 0,
                grid: false,
            },
        }
    }
}

/// Flags beat environment variables, which beat the config file.
fn effective_config(cli: &Cli) -> CliResult<PipelineConfig> {
    let mut cfg = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(t) = cli.threads {
        cfg.threads = Some(t);
    }
    if let Some(m) = cli.method {
        cfg.method = m;
    }
    if let Some(o) = &cli.out {
        cfg.out = o.clone();
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

/// Runs one subcommand end to end and returns the files written.
pub fn run(cli: &Cli) -> CliResult<Vec<PathBuf>> {
    let cfg = effective_config(cli)?;
    cfg.validate(cli.command.needs(&cfg))?;
    if let Some(t) = cfg.threads {
        // the pool can only be set once per process; later calls keep the first
        if rayon::ThreadPoolBuilder::new().num_threads(t).build_global().is_err() {
            log::debug!("global thread pool already initialized");
        }
    }
    let threads = rayon::current_num_threads();
    let mut out = OutputDir::create(&cfg.out)?;
    let flags = match cli.command {
        Command::Speckle => commands::speckle(&cfg, &mut out),
        Command::Correlate => commands::correlate(&cfg, &mut out),
        Command::Contrast => commands::contrast(&cfg, &mut out),
        Command::Fit => commands::fit(&cfg, &mut out),
        Command::Bench => commands::bench(&cfg, &mut out),
        Command::Generate => commands::generate(&cfg, &mut out),
        Command::Validate => commands::validate(&cfg, &mut out),
    }?;
    let mut provenance = Provenance::new(cli.command.name(), &cfg, threads);
    provenance.notes = flags.clone();
    let files = out.finish(&cfg, &provenance)?;
    log::info!("{} files in {}", files.len(), cfg.out.display());
    if flags.is_empty() {
        return Ok(files);
    }
    for f in &flags {
        log::warn!("flagged: {f}");
    }
    if cli.lenient {
        Ok(files)
    } else {
        Err(CliError::Flagged(format!(
            "{} flagged fit result(s); see provenance.json",
            flags.len()
        )))
    }
}
