//! Probe classifier: an independent judge for evaluation.
//!
//! Both the inception score and the labeled feature embeddings need a
//! classifier that was never part of the adversarial game. The probe is a
//! small convnet (two conv/pool stages, a 32-d penultimate layer, a
//! linear class head) trained by softmax cross-entropy on single frames
//! with the dataset's shape labels.
//!
//! The penultimate layer is a linear map over the flattened conv grid,
//! not a spatial pool: video-level embeddings difference consecutive
//! frames' features, so the features must respond to where a shape sits,
//! not only to what it is.
//!
//! Metrics built on an untrained judge are noise, so training ends with a
//! held-out accuracy gate: [`ProbeReport::require`] fails unless the
//! probe classifies at least [`ProbeTrainConfig::min_accuracy`] of unseen
//! frames correctly, and the evaluation pipeline refuses to report
//! probe-based scores without it.

use crate::adam::{adam_step, AdamParams, AdamState};
use crate::data::Dataset;
use crate::params::{he_normal, xavier_normal, ParamSet};
use crate::rng::{stream, Rng};
use crate::tape::{Tape, TensorRef};
use crate::tensor::{Elem, Tensor};
use crate::{Error, Result};

/// Penultimate feature width.
pub const PROBE_FEATURES: usize = 32;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ProbeConfig {
    pub resolution: usize,
    pub classes: usize,
}

impl ProbeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.resolution < 8 || !self.resolution.is_multiple_of(4) {
            return Err(Error::Config(format!(
                "probe resolution {} must be >= 8 and divisible by 4",
                self.resolution
            )));
        }
        if self.classes < 2 {
            return Err(Error::Config(format!("probe needs >= 2 classes, got {}", self.classes)));
        }
        Ok(())
    }

    fn pooled_hw(&self) -> usize {
        self.resolution / 4
    }
}

#[derive(Clone, Debug)]
pub struct Probe<F: Elem = f32> {
    pub config: ProbeConfig,
    pub params: ParamSet<F>,
    conv1: (usize, usize),
    conv2: (usize, usize),
    fc: (usize, usize),
    head: (usize, usize),
}

impl<F: Elem> Probe<F> {
    pub fn new(seed: u64, config: &ProbeConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = Rng::stream(seed, stream::PROBE);
        let mut params = ParamSet::new();
        let conv1 = (
            params.push("conv1.w", he_normal(&[8, 1, 3, 3], 9, &mut rng)?),
            params.push("conv1.b", Tensor::zeros(&[8])?),
        );
        let conv2 = (
            params.push("conv2.w", he_normal(&[16, 8, 3, 3], 72, &mut rng)?),
            params.push("conv2.b", Tensor::zeros(&[16])?),
        );
        let q = config.pooled_hw();
        let fc = (
            params.push("fc.w", he_normal(&[16 * q * q, PROBE_FEATURES], 16 * q * q, &mut rng)?),
            params.push("fc.b", Tensor::zeros(&[PROBE_FEATURES])?),
        );
        let head = (
            params.push("head.w", xavier_normal(&[PROBE_FEATURES, config.classes], PROBE_FEATURES, config.classes, &mut rng)?),
            params.push("head.b", Tensor::zeros(&[config.classes])?),
        );
        Ok(Probe { config: *config, params, conv1, conv2, fc, head })
    }

    pub fn param_count(&self) -> usize {
        self.params.total_elems()
    }

    /// Penultimate features `(b, PROBE_FEATURES)` of frames
    /// `(b, 1, res, res)`.
    pub fn features_on_tape(&self, tape: &mut Tape<F>, binds: &[TensorRef], x: TensorRef) -> Result<TensorRef> {
        let shape = tape.shape(x)?.to_vec();
        let r = self.config.resolution;
        if shape.len() != 4 || shape[1..] != [1, r, r] {
            return Err(Error::Shape(format!("probe input must be (b, 1, {r}, {r}), got {shape:?}")));
        }
        let batch = shape[0];
        // Frames put the background at -1; recentering it to 0 keeps the
        // first conv's response local to the shape.
        let mut h = tape.add_scalar(x, 1.0)?;
        for &(wi, bi) in [&self.conv1, &self.conv2] {
            let p = tape.pad2d(h, (1, 1, 1, 1))?;
            let c = tape.conv2d(p, binds[wi], (1, 1))?;
            let c = tape.add_bias_chan(c, binds[bi])?;
            let c = tape.relu(c)?;
            h = tape.avgpool2x(c)?;
        }
        // Flatten keeps spatial position in the features (the video
        // embedding downstream differences them across frames).
        let q = self.config.pooled_hw();
        let h = tape.reshape(h, &[batch, 16 * q * q])?;
        let h = tape.matmul(h, binds[self.fc.0])?;
        let h = tape.add_bias_row(h, binds[self.fc.1])?;
        tape.relu(h)
    }

    /// Class logits `(b, classes)`.
    pub fn logits(&self, tape: &mut Tape<F>, binds: &[TensorRef], x: TensorRef) -> Result<TensorRef> {
        let f = self.features_on_tape(tape, binds, x)?;
        let l = tape.matmul(f, binds[self.head.0])?;
        tape.add_bias_row(l, binds[self.head.1])
    }

    /// Detached class probabilities (stable softmax over logits).
    pub fn probs(&self, frames: &Tensor<F>) -> Result<Tensor<F>> {
        let mut tape = Tape::new();
        let binds = self.params.bind_frozen(&mut tape);
        let x = tape.constant(frames);
        let l = self.logits(&mut tape, &binds, x)?;
        let logits = tape.tensor(l)?;
        let &[n, k] = logits.shape() else { unreachable!("logits are rank 2") };
        let mut out = vec![F::zero(); n * k];
        for i in 0..n {
            let row = &logits.data()[i * k..(i + 1) * k];
            let max = row.iter().fold(F::neg_infinity(), |m, &v| m.max(v));
            let exps: Vec<F> = row.iter().map(|&v| (v - max).exp()).collect();
            let sum = exps.iter().fold(F::zero(), |a, &x| a + x);
            for j in 0..k {
                out[i * k + j] = exps[j] / sum;
            }
        }
        Tensor::new(&[n, k], out)
    }

    /// Detached penultimate features.
    pub fn features(&self, frames: &Tensor<F>) -> Result<Tensor<F>> {
        let mut tape = Tape::new();
        let binds = self.params.bind_frozen(&mut tape);
        let x = tape.constant(frames);
        let f = self.features_on_tape(&mut tape, &binds, x)?;
        tape.tensor(f)
    }

    /// Detached class predictions (argmax of logits).
    pub fn predict(&self, frames: &Tensor<F>) -> Result<Vec<usize>> {
        let p = self.probs(frames)?;
        let k = self.config.classes;
        Ok((0..p.shape()[0])
            .map(|i| {
                let row = &p.data()[i * k..(i + 1) * k];
                (0..k).max_by(|&a, &b| row[a].partial_cmp(&row[b]).expect("probs are finite")).expect("k >= 2")
            })
            .collect())
    }
}

#[derive(Clone, Copy, Debug)]
pub struct ProbeTrainConfig {
    pub epochs: usize,
    pub batch: usize,
    pub adam: AdamParams,
    /// Fraction of frames held out for the accuracy gate.
    pub holdout: f64,
    /// Gate threshold on held-out accuracy.
    pub min_accuracy: f64,
}

impl Default for ProbeTrainConfig {
    fn default() -> Self {
        ProbeTrainConfig {
            epochs: 6,
            batch: 16,
            adam: AdamParams { lr: 1e-2, ..AdamParams::default() },
            holdout: 0.25,
            min_accuracy: 0.9,
        }
    }
}

impl ProbeTrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch == 0 {
            return Err(Error::Config("probe training needs positive epochs and batch".into()));
        }
        if !(0.0 < self.holdout && self.holdout < 1.0) {
            return Err(Error::Config(format!("probe holdout {} must be in (0, 1)", self.holdout)));
        }
        if !(0.0..=1.0).contains(&self.min_accuracy) {
            return Err(Error::Config(format!("probe accuracy gate {} must be in [0, 1]", self.min_accuracy)));
        }
        self.adam.validate()
    }
}

#[derive(Clone, Copy, Debug)]
pub struct ProbeReport {
    pub train_frames: usize,
    pub held_out_frames: usize,
    pub accuracy: f64,
    pub min_accuracy: f64,
    pub final_loss: f64,
}

impl ProbeReport {
    pub fn passed(&self) -> bool {
        self.accuracy >= self.min_accuracy
    }

    /// Enforce the gate: probe-based metrics must not be produced from a
    /// judge that cannot tell the classes apart.
    pub fn require(&self) -> Result<()> {
        if self.passed() {
            return Ok(());
        }
        Err(Error::Contract(format!(
            "probe accuracy {:.3} on {} held-out frames is below the {:.2} gate",
            self.accuracy, self.held_out_frames, self.min_accuracy
        )))
    }
}

/// Train the probe on labeled single frames and measure held-out
/// accuracy. The split, ordering and batches all derive from `seed`.
pub fn train_probe(
    probe: &mut Probe<f32>,
    dataset: &Dataset,
    cfg: &ProbeTrainConfig,
    seed: u64,
) -> Result<ProbeReport> {
    cfg.validate()?;
    if dataset.spec.resolution != probe.config.resolution {
        return Err(Error::Contract(format!(
            "probe resolution {} does not match dataset resolution {}",
            probe.config.resolution, dataset.spec.resolution
        )));
    }
    let classes = probe.config.classes;
    let mut rng = Rng::stream(seed, stream::PROBE + 1);
    let mut index: Vec<(usize, usize)> = (0..dataset.videos.len())
        .flat_map(|v| (0..dataset.spec.n_frames).map(move |f| (v, f)))
        .collect();
    rng.shuffle(&mut index);
    let held = ((index.len() as f64) * cfg.holdout).round() as usize;
    if held == 0 || held == index.len() {
        return Err(Error::Contract(format!(
            "holdout {} leaves an empty split over {} frames",
            cfg.holdout,
            index.len()
        )));
    }
    let (test_idx, train_idx) = index.split_at(held);

    let res = dataset.spec.resolution;
    let px = res * res;
    let gather = |ids: &[(usize, usize)]| -> Result<(Tensor<f32>, Vec<usize>)> {
        let mut data = Vec::with_capacity(ids.len() * px);
        let mut labels = Vec::with_capacity(ids.len());
        for &(v, f) in ids {
            data.extend_from_slice(&dataset.videos[v].frames.data()[f * px..(f + 1) * px]);
            let class = dataset.videos[v].kind.class();
            if class >= classes {
                return Err(Error::Contract(format!(
                    "dataset class {class} exceeds the probe's {classes} classes"
                )));
            }
            labels.push(class);
        }
        Ok((Tensor::new(&[ids.len(), 1, res, res], data)?, labels))
    };

    let mut state = AdamState::new(&probe.params, cfg.adam)?;
    let mut order: Vec<usize> = (0..train_idx.len()).collect();
    let mut final_loss = f64::NAN;
    for _ in 0..cfg.epochs {
        rng.shuffle(&mut order);
        for chunk in order.chunks(cfg.batch) {
            let ids: Vec<(usize, usize)> = chunk.iter().map(|&i| train_idx[i]).collect();
            let (frames, labels) = gather(&ids)?;
            let mut onehot = vec![0f32; labels.len() * classes];
            for (i, &c) in labels.iter().enumerate() {
                onehot[i * classes + c] = 1.0;
            }
            let mut tape = Tape::new();
            let binds = probe.params.bind(&mut tape);
            let x = tape.constant(&frames);
            let logits = probe.logits(&mut tape, &binds, x)?;
            let target = tape.constant_from(&[labels.len(), classes], onehot)?;
            let loss = tape.softmax_cross_entropy(logits, target)?;
            final_loss = tape.tensor(loss)?.data()[0] as f64;
            tape.backward(loss)?;
            let grads = probe.params.grads(&tape, &binds)?;
            adam_step(&mut probe.params, &grads, &mut state)?;
        }
    }

    let (test_frames, test_labels) = gather(test_idx)?;
    let preds = probe.predict(&test_frames)?;
    let correct = preds.iter().zip(&test_labels).filter(|(p, t)| p == t).count();
    Ok(ProbeReport {
        train_frames: train_idx.len(),
        held_out_frames: test_idx.len(),
        accuracy: correct as f64 / test_idx.len() as f64,
        min_accuracy: cfg.min_accuracy,
        final_loss,
    })
}
