//! Stage-2 driver: the plugin-vs-video-discriminator game.
//!
//! Stage 1 (backbone training, [`crate::backbone::train_backbone`]) ends
//! with [`crate::backbone::Backbone::freeze`]. Stage 2 then alternates
//!
//! * a discriminator step, BCE of D on real feature videos toward 1 and
//!   on generated ones toward 0, and
//! * a plugin step, non-saturating BCE of D on generated feature videos
//!   toward 1 (a flag restores the saturating `log(1-D)` form),
//!
//! with the backbone held fixed throughout: its parameters are bound as
//! detached constants, so no gradient buffer for them ever exists, and
//! the frozen checksum is re-verified after the last step.
//!
//! An epoch is one shuffled pass over the videos, each contributing one
//! clip at a uniformly random start offset. Every step appends one log
//! record; `logs.len() == epochs * steps_per_epoch` exactly.

use crate::adam::{adam_step, AdamParams, AdamState};
use crate::backbone::{Backbone, Critic, FreezeState, Generator, FEATURE_DIM};
use crate::data::{Dataset, FPS};
use crate::imgio::Clip;
use crate::plugin::{sample_noise, PluginNet, Timeline, NOISE_DIM};
use crate::rng::{stream, Rng};
use crate::tape::Tape;
use crate::tensor::Tensor;
use crate::video_disc::{VideoDiscriminator, CLIP_FRAMES};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug)]
pub struct Stage2Config {
    pub epochs: usize,
    pub batch: usize,
    /// Frames per training clip; pinned to the video discriminator's
    /// fixed input geometry.
    pub n_frames: usize,
    pub adam: AdamParams,
    /// Use the literal minimax plugin loss `mean log(1-D)` instead of
    /// the non-saturating `-mean log D`.
    pub saturating: bool,
}

impl Default for Stage2Config {
    fn default() -> Self {
        Stage2Config {
            epochs: 50,
            batch: 8,
            n_frames: CLIP_FRAMES,
            adam: AdamParams::default(),
            saturating: false,
        }
    }
}

impl Stage2Config {
    pub fn validate(&self) -> Result<()> {
        if self.batch == 0 {
            return Err(Error::Config("stage-2 batch must be positive".into()));
        }
        if self.n_frames != CLIP_FRAMES {
            return Err(Error::Config(format!(
                "stage-2 clips must have {CLIP_FRAMES} frames (the video discriminator's input geometry), got {}",
                self.n_frames
            )));
        }
        self.adam.validate()
    }
}

#[derive(Clone, Copy, Debug)]
pub struct Stage2StepLog {
    pub epoch: usize,
    pub step: usize,
    pub d_loss: f64,
    pub g_loss: f64,
    /// Mean discriminator output on the real batch.
    pub d_real: f64,
    /// Mean discriminator output on the generated batch.
    pub d_fake: f64,
}

pub const STAGE2_LOG_HEADER: &str = "epoch,step,d_loss,g_loss,d_real,d_fake";

impl Stage2StepLog {
    /// One comma-separated record under [`STAGE2_LOG_HEADER`].
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{:.6},{:.6},{:.6},{:.6}",
            self.epoch, self.step, self.d_loss, self.g_loss, self.d_real, self.d_fake
        )
    }
}

#[derive(Clone, Debug)]
pub struct Stage2Stats {
    pub epochs: usize,
    pub steps_per_epoch: usize,
    pub logs: Vec<Stage2StepLog>,
}

impl Stage2Stats {
    pub fn last(&self) -> Option<&Stage2StepLog> {
        self.logs.last()
    }
}

/// The trained sampler: plugin (the only trainable part), frozen
/// generator, frozen critic-as-feature-extractor.
pub struct CompositeGenerator<'a> {
    pub plugin: &'a PluginNet<f32>,
    pub generator: &'a Generator<f32>,
    pub critic: &'a Critic<f32>,
}

impl CompositeGenerator<'_> {
    /// Render `frames_i = G(phi(t_i, z))` for a fresh `z` drawn from
    /// `seed`; deterministic given seed and weights.
    pub fn sample_video(&self, seed: u64, n_frames: usize) -> Result<Clip> {
        let timeline = Timeline::grid(n_frames)?;
        let mut rng = Rng::stream(seed, stream::GENERATE);
        let noise = sample_noise::<f32>(&mut rng);
        self.render(&timeline, &noise)
    }

    /// Render frames for an explicit timeline and noise row.
    pub fn render(&self, timeline: &Timeline, noise: &Tensor<f32>) -> Result<Clip> {
        let latents = self.plugin.trajectory(timeline, noise)?;
        let frames = self.generator.generate(&latents)?;
        Ok(Clip { frames, fps: FPS, kind: None })
    }

    /// Feature video `(1, 1, n, d)` of a rendered clip: per-frame
    /// critic features of `G(phi(t_i, z))`, stacked in timeline order.
    pub fn fake_feature_video(&self, timeline: &Timeline, noise: &Tensor<f32>) -> Result<Tensor<f32>> {
        let clip = self.render(timeline, noise)?;
        self.critic.feature_video(&clip.frames)
    }
}

/// Feature videos `(b, 1, n, d)` of real clips. Frames must match the
/// critic's resolution.
pub fn real_feature_videos(critic: &Critic<f32>, clips: &[Tensor<f32>]) -> Result<Tensor<f32>> {
    if clips.is_empty() {
        return Err(Error::Contract("real_feature_videos needs at least one clip".into()));
    }
    let n = clips[0].shape()[0];
    let mut out = Vec::with_capacity(clips.len() * n * FEATURE_DIM);
    for clip in clips {
        if clip.shape()[0] != n {
            return Err(Error::Shape(format!(
                "all clips must have {n} frames, got {}",
                clip.shape()[0]
            )));
        }
        let f = critic.extract_features(clip)?;
        out.extend_from_slice(f.data());
    }
    Tensor::new(&[clips.len(), 1, n, FEATURE_DIM], out)
}

/// Pack per-video noise rows `(1, NOISE_DIM)` into the row layout of
/// [`PluginNet::forward_rows`]: each video's noise repeated once per
/// frame, with the timeline tiled alongside.
fn pack_rows(noises: &[Tensor<f32>], timeline: &Timeline) -> Result<(Tensor<f32>, Tensor<f32>)> {
    let n = timeline.len();
    let b = noises.len();
    let mut nd = Vec::with_capacity(b * n * NOISE_DIM);
    for z in noises {
        for _ in 0..n {
            nd.extend_from_slice(z.data());
        }
    }
    let td: Vec<f32> = (0..b)
        .flat_map(|_| timeline.as_slice().iter().map(|&t| t as f32))
        .collect();
    Ok((Tensor::new(&[b * n, NOISE_DIM], nd)?, Tensor::new(&[b * n, 1], td)?))
}

/// Detached feature videos `(b, 1, n, d)` of generated clips, one per
/// noise row; the whole batch runs as single dispatches.
fn fake_feature_videos(
    plugin: &PluginNet<f32>,
    gen: &Generator<f32>,
    critic: &Critic<f32>,
    noises: &[Tensor<f32>],
    timeline: &Timeline,
) -> Result<Tensor<f32>> {
    let (noise_rows, tcol) = pack_rows(noises, timeline)?;
    let mut tape = Tape::new();
    let pbinds = plugin.params.bind_frozen(&mut tape);
    let gbinds = gen.params.bind_frozen(&mut tape);
    let cbinds = critic.params.bind_frozen(&mut tape);
    let nref = tape.constant(&noise_rows);
    let tref = tape.constant(&tcol);
    let latents = plugin.forward_rows(&mut tape, &pbinds, nref, tref)?;
    let frames = gen.forward(&mut tape, &gbinds, latents)?;
    let feats = critic.features(&mut tape, &cbinds, frames)?;
    let fv = tape.reshape(feats, &[noises.len(), 1, timeline.len(), FEATURE_DIM])?;
    tape.tensor(fv)
}

fn mean_of(xs: &[f32]) -> f64 {
    xs.iter().map(|&x| x as f64).sum::<f64>() / xs.len() as f64
}

/// Discriminator step: BCE toward 1 on real feature videos and toward 0
/// on (detached) generated ones. Returns (d_loss, mean D(real), mean
/// D(fake)). Losses run on the pre-sigmoid scores: critic features are
/// unbounded, so the raw scores start far out in sigmoid's flat tails
/// and the probability-space loss would sit on its clamp with zero
/// gradient from step one.
fn d_step(
    disc: &mut VideoDiscriminator<f32>,
    opt: &mut AdamState<f32>,
    real_fv: &Tensor<f32>,
    fake_fv: &Tensor<f32>,
) -> Result<(f64, f64, f64)> {
    let b = real_fv.shape()[0];
    let mut tape = Tape::new();
    let dbinds = disc.params.bind(&mut tape);
    let r = tape.constant(real_fv);
    let f = tape.constant(fake_fv);
    let lr_logits = disc.forward_logits(&mut tape, &dbinds, r)?;
    let lf_logits = disc.forward_logits(&mut tape, &dbinds, f)?;
    let dr = tape.sigmoid(lr_logits)?;
    let df = tape.sigmoid(lf_logits)?;
    let d_real = mean_of(tape.value(dr)?);
    let d_fake = mean_of(tape.value(df)?);
    let ones = tape.constant_from(&[b, 1], vec![1.0f32; b])?;
    let zeros = tape.constant_from(&[b, 1], vec![0.0f32; b])?;
    let lr = tape.bce_logits(lr_logits, ones)?;
    let lf = tape.bce_logits(lf_logits, zeros)?;
    let loss = tape.add(lr, lf)?;
    let d_loss = f64::from(tape.value_scalar(loss)?);
    tape.backward(loss)?;
    let grads = disc.params.grads(&tape, &dbinds)?;
    adam_step(&mut disc.params, &grads, opt)?;
    Ok((d_loss, d_real, d_fake))
}

/// Plugin step: gradient flows through the frozen generator, critic and
/// discriminator into the plugin alone. Returns g_loss.
fn phi_step(
    plugin: &mut PluginNet<f32>,
    opt: &mut AdamState<f32>,
    backbone: &Backbone<f32>,
    disc: &VideoDiscriminator<f32>,
    noises: &[Tensor<f32>],
    timeline: &Timeline,
    saturating: bool,
) -> Result<f64> {
    let b = noises.len();
    let (noise_rows, tcol) = pack_rows(noises, timeline)?;
    let mut tape = Tape::new();
    let pbinds = plugin.params.bind(&mut tape);
    let gbinds = backbone.gen.params.bind_frozen(&mut tape);
    let cbinds = backbone.critic.params.bind_frozen(&mut tape);
    let dbinds = disc.params.bind_frozen(&mut tape);
    let nref = tape.constant(&noise_rows);
    let tref = tape.constant(&tcol);
    let latents = plugin.forward_rows(&mut tape, &pbinds, nref, tref)?;
    let frames = backbone.gen.forward(&mut tape, &gbinds, latents)?;
    let feats = backbone.critic.features(&mut tape, &cbinds, frames)?;
    let fv = tape.reshape(feats, &[b, 1, timeline.len(), FEATURE_DIM])?;
    let scores = disc.forward_logits(&mut tape, &dbinds, fv)?;
    let loss = if saturating {
        let zeros = tape.constant_from(&[b, 1], vec![0.0f32; b])?;
        let l = tape.bce_logits(scores, zeros)?;
        tape.neg(l)?
    } else {
        let ones = tape.constant_from(&[b, 1], vec![1.0f32; b])?;
        tape.bce_logits(scores, ones)?
    };
    let g_loss = f64::from(tape.value_scalar(loss)?);
    tape.backward(loss)?;
    let grads = plugin.params.grads(&tape, &pbinds)?;
    adam_step(&mut plugin.params, &grads, opt)?;
    Ok(g_loss)
}

/// Run stage 2. The backbone must be frozen and match `freeze`; the
/// checksum is verified again after the last step, so a backbone that
/// moved during training aborts the run.
#[allow(clippy::too_many_arguments)]
pub fn train_stage2(
    plugin: &mut PluginNet<f32>,
    disc: &mut VideoDiscriminator<f32>,
    backbone: &Backbone<f32>,
    freeze: &FreezeState,
    dataset: &Dataset,
    cfg: &Stage2Config,
    seed: u64,
    mut on_log: impl FnMut(&Stage2StepLog),
) -> Result<Stage2Stats> {
    cfg.validate()?;
    backbone.verify_frozen(freeze)?;
    if dataset.spec.resolution != backbone.gen.config.resolution {
        return Err(Error::Contract(format!(
            "dataset resolution {} does not match the backbone's {}",
            dataset.spec.resolution, backbone.gen.config.resolution
        )));
    }
    if dataset.spec.n_frames < cfg.n_frames {
        return Err(Error::Contract(format!(
            "videos have {} frames, fewer than the {}-frame clips",
            dataset.spec.n_frames, cfg.n_frames
        )));
    }

    let timeline = Timeline::grid(cfg.n_frames)?;
    let mut rng = Rng::stream(seed, stream::STAGE2_TRAIN);
    let mut plugin_opt = AdamState::new(&plugin.params, cfg.adam)?;
    let mut disc_opt = AdamState::new(&disc.params, cfg.adam)?;
    let n_videos = dataset.videos.len();
    let steps_per_epoch = n_videos.div_ceil(cfg.batch);
    let mut logs = Vec::with_capacity(cfg.epochs * steps_per_epoch);
    let mut order: Vec<usize> = (0..n_videos).collect();

    for epoch in 0..cfg.epochs {
        rng.shuffle(&mut order);
        for (step, chunk) in order.chunks(cfg.batch).enumerate() {
            let clips: Vec<Tensor<f32>> = chunk
                .iter()
                .map(|&v| {
                    let start = rng.below(dataset.spec.n_frames - cfg.n_frames + 1);
                    dataset.clip(v, start, cfg.n_frames)
                })
                .collect::<Result<_>>()?;
            let real_fv = real_feature_videos(&backbone.critic, &clips)?;
            let noises: Vec<Tensor<f32>> = (0..chunk.len()).map(|_| sample_noise(&mut rng)).collect();
            let fake_fv = fake_feature_videos(plugin, &backbone.gen, &backbone.critic, &noises, &timeline)?;
            let (d_loss, d_real, d_fake) = d_step(disc, &mut disc_opt, &real_fv, &fake_fv)?;

            let noises: Vec<Tensor<f32>> = (0..chunk.len()).map(|_| sample_noise(&mut rng)).collect();
            let g_loss = phi_step(plugin, &mut plugin_opt, backbone, disc, &noises, &timeline, cfg.saturating)?;

            if !d_loss.is_finite() || !g_loss.is_finite() {
                return Err(Error::Numeric(format!(
                    "non-finite stage-2 loss at epoch {epoch} step {step}: d_loss {d_loss}, g_loss {g_loss}"
                )));
            }
            let log = Stage2StepLog { epoch, step, d_loss, g_loss, d_real, d_fake };
            on_log(&log);
            logs.push(log);
        }
    }

    backbone.verify_frozen(freeze)?;
    Ok(Stage2Stats { epochs: cfg.epochs, steps_per_epoch, logs })
}
