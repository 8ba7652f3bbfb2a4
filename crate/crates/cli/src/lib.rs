//! Command-line front end for fitting random survival forests, predicting,
//! computing importance and running the granularity / noise sweeps.

pub mod commands;
pub mod config;
pub mod output;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

pub use config::{ExperimentConfig, NoiseSpec};

#[derive(Debug, Parser)]
#[command(name = "rsf", version, about = "Random survival forests for factor covariates")]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(subcommand)]
    pub command: Command,
}

/// Flags shared by every command; they override the config file.
#[derive(Debug, Args, Default)]
pub struct CommonArgs {
    /// JSON experiment configuration
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub data: Option<PathBuf>,
    #[arg(long, global = true)]
    pub time_col: Option<String>,
    #[arg(long, global = true)]
    pub status_col: Option<String>,
    #[arg(long, global = true)]
    pub ntree: Option<usize>,
    #[arg(long, global = true)]
    pub mtry: Option<usize>,
    /// Candidate pairs per variable (0 = all); comma-separated list
    #[arg(long, global = true, value_delimiter = ',')]
    pub nsplit: Option<Vec<usize>>,
    /// Minimum events per terminal node
    #[arg(long, global = true)]
    pub nodesize: Option<usize>,
    /// Labels per discretized continuous column; comma-separated list
    #[arg(long, global = true, value_delimiter = ',')]
    pub granularity: Option<Vec<usize>>,
    #[arg(long, global = true)]
    pub boot_reps: Option<usize>,
    #[arg(long, global = true)]
    pub level: Option<f64>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a forest and report its out-of-bag error
    Fit,
    /// Ensemble survival and cumulative hazard curves for each row of --data
    Predict {
        #[arg(long)]
        model: PathBuf,
    },
    /// Bootstrap variable-importance intervals
    Vimp {
        /// Reuse a fitted model instead of fitting one
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// OOB error over granularity x nsplit, and importance at the largest nsplit
    GranularitySweep,
    /// Importance with injected noise variables at the largest nsplit
    NoiseVimp,
    /// Write a synthetic PBC-like dataset
    SynthPbc {
        #[arg(long, default_value_t = 312)]
        n: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Tree and forest sup-error against a known eight-atom truth
    Convergence {
        #[arg(long, value_delimiter = ',', default_value = "200,2000,20000")]
        sizes: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5,6,7,8,9,10")]
        seeds: Vec<u64>,
        #[arg(long, default_value_t = 2.0)]
        t_max: f64,
    },
    /// Staircase tree-ensemble approximation of an exponential curve
    Staircase {
        #[arg(long, default_value_t = 1.0)]
        rate: f64,
        #[arg(long, default_value_t = 2.0)]
        s_max: f64,
        #[arg(long, default_value_t = 0.01)]
        eps: f64,
    },
}

impl CommonArgs {
    /// Config file (or defaults) with every given flag applied on top.
    pub fn resolve(&self) -> anyhow::Result<ExperimentConfig> {
        let mut c = match &self.config {
            Some(path) => ExperimentConfig::from_file(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(v) = &self.data {
            c.data = Some(v.clone());
        }
        if let Some(v) = &self.time_col {
            c.time_col = v.clone();
        }
        if let Some(v) = &self.status_col {
            c.status_col = v.clone();
        }
        if let Some(v) = self.ntree {
            c.n_trees = v;
        }
        if let Some(v) = self.mtry {
            c.mtry = Some(v);
        }
        if let Some(v) = &self.nsplit {
            c.nsplit = v.clone();
        }
        if let Some(v) = self.nodesize {
            c.nodesize = v;
        }
        if let Some(v) = &self.granularity {
            c.granularity = v.clone();
        }
        if let Some(v) = self.boot_reps {
            c.boot_reps = v;
        }
        if let Some(v) = self.level {
            c.level = v;
        }
        if let Some(v) = self.seed {
            c.seed = v;
        }
        if let Some(v) = &self.out_dir {
            c.out_dir = v.clone();
        }
        c.validate()?;
        Ok(c)
    }
}

/// Parse `args` (program name first), run the command and write its
/// manifest. Returns every file written.
pub fn run<I, T>(args: I) -> anyhow::Result<Vec<PathBuf>>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(args)?;
    let config = cli.common.resolve()?;
    let (name, arguments, mut outputs) = match &cli.command {
        Command::Fit => ("fit", json!({}), commands::cmd_fit(&config)?),
        Command::Predict { model } => ("predict", json!({ "model": model }), commands::cmd_predict(&config, model)?),
        Command::Vimp { model } => ("vimp", json!({ "model": model }), commands::cmd_vimp(&config, model.as_deref())?),
        Command::GranularitySweep => ("granularity-sweep", json!({}), commands::cmd_granularity_sweep(&config)?),
        Command::NoiseVimp => ("noise-vimp", json!({}), commands::cmd_noise_vimp(&config)?),
        Command::SynthPbc { n, out } => (
            "synth-pbc",
            json!({ "n": n, "out": out }),
            commands::cmd_synth_pbc(*n, config.seed, out)?,
        ),
        Command::Convergence { sizes, seeds, t_max } => (
            "convergence",
            json!({ "sizes": sizes, "seeds": seeds, "t_max": t_max }),
            commands::cmd_convergence(&config, sizes, seeds, *t_max)?,
        ),
        Command::Staircase { rate, s_max, eps } => (
            "staircase",
            json!({ "rate": rate, "s_max": s_max, "eps": eps }),
            commands::cmd_staircase(&config, *rate, *s_max, *eps)?,
        ),
    };
    let manifest = output::write_manifest(&config, name, arguments, &outputs)?;
    outputs.push(manifest);
    Ok(outputs)
}
