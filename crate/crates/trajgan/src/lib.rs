//! Adversarial video generation toolkit.
//!
//! The pipeline decomposes video synthesis into two stages. Stage 1 trains a
//! 2D image GAN (generator + critic) on individual frames with a WGAN-GP
//! objective, then freezes it. Stage 2 trains a small time-conditioned
//! "plugin" network that maps (timeline, noise) to a trajectory of latent
//! codes on the unit hypersphere; pushing the trajectory through the frozen
//! generator yields a video. Temporal realism is judged by a lightweight
//! video discriminator that never sees pixels: it operates on the frozen
//! critic's per-frame 512-d feature vectors stacked into a (1, n, 512) map.
//! Only the plugin and the video discriminator are trained in stage 2, so
//! video-level training costs a fraction of a full 3D GAN.
//!
//! Everything runs on a from-scratch reverse-mode autodiff tape ([`tape`])
//! whose backward pass emits tape operations, so gradients are themselves
//! differentiable (needed for the WGAN-GP gradient penalty). Supporting
//! modules provide Adam ([`opt`]), finite-difference gradient checking
//! ([`gradcheck`]), a binary checkpoint format ([`checkpoint`]), a synthetic
//! bouncing-shapes dataset ([`data`]), image I/O ([`imgio`]), Frechet/IS
//! evaluation metrics ([`metrics`]) with a small trained probe network as
//! the feature extractor ([`probe`]), and an analytic memory report
//! ([`memreport`]).

pub mod adam;
pub mod backbone;
pub mod checkpoint;
pub mod data;
pub mod gradcheck;
pub mod imgio;
pub mod kernels;
pub mod memreport;
pub mod metrics;
pub mod params;
pub mod plugin;
pub mod probe;
pub mod rng;
pub mod tape;
pub mod tensor;
pub mod trainer;
pub mod video_disc;

pub use tensor::{Elem, Tensor};

use std::fmt;
use std::path::PathBuf;

/// Library-wide error type. Variants map onto the CLI exit-code contract:
/// `Io`/`Format` are I/O failures, `Contract` is a violated precondition on
/// a well-formed request (e.g. training against an unfrozen backbone), and
/// `Numeric` is a numerical failure (non-finite loss, non-convergence).
#[derive(Debug)]
pub enum Error {
    /// Tensor shape mismatch or invalid shape.
    Shape(String),
    /// Tape misuse: backward twice, non-scalar loss, foreign tensor ref.
    Tape(String),
    /// Filesystem failure with the offending path.
    Io { path: PathBuf, source: std::io::Error },
    /// Malformed file contents (checkpoint, image, manifest, config).
    Format(String),
    /// Violated module contract on otherwise well-formed input.
    Contract(String),
    /// Numerical failure: non-finite values, divergence, non-convergence.
    Numeric(String),
    /// Invalid configuration value.
    Config(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Shape(m) => write!(f, "shape error: {m}"),
            Error::Tape(m) => write!(f, "tape error: {m}"),
            Error::Io { path, source } => write!(f, "io error at {}: {source}", path.display()),
            Error::Format(m) => write!(f, "format error: {m}"),
            Error::Contract(m) => write!(f, "contract violation: {m}"),
            Error::Numeric(m) => write!(f, "numeric error: {m}"),
            Error::Config(m) => write!(f, "config error: {m}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io { source, .. } => Some(source),
            _ => None,
        }
    }
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

/// Version string recorded in run directories.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
