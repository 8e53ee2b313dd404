//! Config-driven experiment runs: data generation, training, evaluation,
//! passivity and stability checks, and report tables.
//!
//! A run directory looks like
//!
//! ```text
//! <out>/data/          transitions.csv, held_out.csv, train_p<i>.csv, manifest.txt
//! <out>/models/<v>/    model.txt, *.params, loss_history.csv, loss.svg, manifest.txt
//! <out>/eval/          rollout.csv, phase_<model>.csv, phase.svg, energy.svg, manifest.txt
//! <out>/passivity/<t>/ passivity.csv, residuals.csv, summary.txt, manifest.txt
//! <out>/stability/<v>/ stability.csv, summary.txt, manifest.txt
//! ```
//!
//! Every file is a function of the config and its seeds; manifests carry the
//! tool version, the config hash, all seeds and a SHA-256 per output file.

mod commands;
mod config;
pub mod svg;

use std::path::{Path, PathBuf};

use thiserror::Error;

pub use commands::{
    cmd_evaluate, cmd_generate, cmd_passivity, cmd_report, cmd_stability, cmd_train, CommandOutput, EvalTarget,
    PassivityTarget,
};
pub use config::{
    BoxConfig, DataConfig, EvalConfig, PassivityConfig, RunConfig, RunSeeds, StabilityConfig, SystemParams,
    TrainOverride, TrainSection, Variant, VariantSettings,
};

pub const TOOL_VERSION: &str = concat!("sphnn ", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config error in `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("usage: {0}")]
    Usage(String),

    #[error("missing artifact {path}: {source}")]
    Missing {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Core(#[from] crate::Error),
}

impl PipelineError {
    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        PipelineError::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    pub fn usage(message: impl Into<String>) -> Self {
        PipelineError::Usage(message.into())
    }

    pub(crate) fn missing(path: &Path, source: std::io::Error) -> Self {
        PipelineError::Missing {
            path: path.to_path_buf(),
            source,
        }
    }

    /// 1 for usage/config errors, 2 for I/O and missing artifacts, 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        use crate::Error as E;
        match self {
            PipelineError::Config { .. } | PipelineError::Usage(_) => 1,
            PipelineError::Missing { .. } => 2,
            PipelineError::Core(e) => match e {
                E::Io { .. } => 2,
                E::NonFinite { .. } | E::Numerical(_) => 3,
                E::Dimension { .. } | E::InvalidParameter(_) | E::Parse { .. } => 1,
            },
        }
    }
}
