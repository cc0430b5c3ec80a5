//! Flat run configuration: one JSON object whose keys mirror the library
//! config structs, every key optional, unknown keys rejected. Precedence
//! is defaults < file < command-line flags; commands echo the fully
//! resolved result into their run directory.

use std::path::Path;

use serde::{Deserialize, Serialize};
use trajgan::adam::AdamParams;
use trajgan::backbone::BackboneTrainConfig;
use trajgan::data::DatasetSpec;
use trajgan::probe::ProbeTrainConfig;
use trajgan::trainer::Stage2Config;
use trajgan::{Error, Result};

#[derive(Clone, Debug, PartialEq, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,

    // Dataset.
    pub n_videos: usize,
    pub n_frames: usize,
    pub resolution: usize,
    pub fps: f64,
    pub min_speed: f64,
    pub max_speed: f64,

    // Adam, shared by both training stages.
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,

    // Stage 1 (backbone).
    pub steps: usize,
    pub batch: usize,
    pub gp_weight: f64,
    pub log_every: usize,

    // Stage 2 (plugin + video discriminator).
    pub epochs: usize,
    pub clip_frames: usize,
    pub saturating: bool,

    // Probe feature extractor for evaluation.
    pub probe_epochs: usize,
    pub probe_batch: usize,
    pub probe_lr: f64,
    pub probe_holdout: f64,
    pub probe_min_accuracy: f64,

    // Evaluation.
    pub clips: usize,
    pub is_splits: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let ds = DatasetSpec::default();
        let adam = AdamParams::default();
        let bb = BackboneTrainConfig::default();
        let s2 = Stage2Config::default();
        let pr = ProbeTrainConfig::default();
        RunConfig {
            seed: 0,
            n_videos: ds.n_videos,
            n_frames: ds.n_frames,
            resolution: ds.resolution,
            fps: ds.fps,
            min_speed: ds.min_speed,
            max_speed: ds.max_speed,
            lr: adam.lr,
            beta1: adam.beta1,
            beta2: adam.beta2,
            epsilon: adam.epsilon,
            steps: bb.steps,
            batch: bb.batch,
            gp_weight: bb.gp_weight,
            log_every: bb.log_every,
            epochs: s2.epochs,
            clip_frames: s2.n_frames,
            saturating: s2.saturating,
            probe_epochs: pr.epochs,
            probe_batch: pr.batch,
            probe_lr: pr.adam.lr,
            probe_holdout: pr.holdout,
            probe_min_accuracy: pr.min_accuracy,
            clips: 256,
            is_splits: 5,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| classify(path, e))
    }

    /// The resolved copy a run directory keeps.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("plain struct serializes");
        s.push('\n');
        s
    }

    pub fn dataset_spec(&self) -> DatasetSpec {
        DatasetSpec {
            n_videos: self.n_videos,
            n_frames: self.n_frames,
            resolution: self.resolution,
            fps: self.fps,
            min_speed: self.min_speed,
            max_speed: self.max_speed,
        }
    }

    pub fn adam(&self) -> AdamParams {
        AdamParams { lr: self.lr, beta1: self.beta1, beta2: self.beta2, epsilon: self.epsilon }
    }

    pub fn backbone_train(&self) -> BackboneTrainConfig {
        BackboneTrainConfig {
            steps: self.steps,
            batch: self.batch,
            gp_weight: self.gp_weight,
            adam: self.adam(),
            log_every: self.log_every,
        }
    }

    pub fn stage2(&self) -> Stage2Config {
        Stage2Config {
            epochs: self.epochs,
            batch: self.batch,
            n_frames: self.clip_frames,
            adam: self.adam(),
            saturating: self.saturating,
        }
    }

    pub fn probe_train(&self) -> ProbeTrainConfig {
        ProbeTrainConfig {
            epochs: self.probe_epochs,
            batch: self.probe_batch,
            adam: AdamParams { lr: self.probe_lr, ..self.adam() },
            holdout: self.probe_holdout,
            min_accuracy: self.probe_min_accuracy,
        }
    }
}

/// Defaults when no file is given, the parsed file otherwise.
pub fn resolve(path: Option<&Path>) -> Result<RunConfig> {
    match path {
        Some(p) => RunConfig::load(p),
        None => Ok(RunConfig::default()),
    }
}

/// Broken JSON is a file-format problem; a well-formed file that maps to
/// no valid configuration (unknown key, wrong type, out-of-range number)
/// is a configuration problem.
fn classify(path: &Path, e: serde_json::Error) -> Error {
    if e.is_data() {
        Error::Config(format!("{}: {e}", path.display()))
    } else {
        Error::Format(format!("{}: {e}", path.display()))
    }
}
