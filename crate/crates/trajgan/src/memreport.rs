//! Memory accounting: plugin training versus a full 3D video GAN.
//!
//! The point of training only a plugin over a frozen image GAN is that
//! the trainable surface stays small and resolution-independent. This
//! module quantifies that with exact parameter counts and an analytic
//! activation estimate for two pipelines:
//!
//! * `mevgan-stage2`: one plugin step's forward graph, plugin ->
//!   frozen generator -> frozen critic features -> video discriminator.
//!   Trainable parameters are the plugin and video discriminator only.
//! * `baseline-3d`: a fixed-depth 3D-conv video GAN sized for the same
//!   `(n, 1, res, res)` clips. It is sized, never trained; the layer
//!   table below is the documented stand-in for a full video GAN of the
//!   TGANv2 family, with the desk backbone's channel widths carried over
//!   and every conv inflated to 3x3x3.
//!
//! Baseline layer table (`q = res/4`, `n` frames):
//!
//! ```text
//! generator                          discriminator
//!   linear  512 -> 32*n*q*q            conv3d  1 ->  8, 1x1x1
//!   reshape (32, n, q, q)              conv3d  8 -> 16, 3x3x3, pool (1,2,2)
//!   up (1,2,2); conv3d 32 -> 16        conv3d 16 -> 32, 3x3x3, pool (1,2,2)
//!   up (1,2,2); conv3d 16 ->  8        flatten 32*n*q*q
//!   conv3d 8 -> 1, 1x1x1; tanh         linear  -> 512; linear 512 -> 1
//! ```
//!
//! Both dense layers touch a `32*n*(res/4)^2` buffer, so the baseline's
//! parameter count grows roughly fourfold per resolution doubling, while
//! the plugin pipeline's trainable side never sees a pixel and stays
//! constant.
//!
//! Activation numbers are an analytic bound computed from the shapes a
//! forward pass allocates (each op output counted once, doubled for the
//! buffers backward holds), never a process-memory measurement.

use crate::backbone::{BackboneConfig, FEATURE_DIM, LATENT_DIM};
use crate::plugin::LAYER_WIDTHS;
use crate::video_disc::{shape_chain, HEAD_IN, LAYERS};
use crate::{Error, Result};

pub const PIPELINE_MEVGAN: &str = "mevgan-stage2";
pub const PIPELINE_BASELINE: &str = "baseline-3d";

const F32_BYTES: usize = 4;

/// Named activation shapes recorded by a symbolic forward walk.
#[derive(Clone, Debug, Default)]
pub struct ShapeLedger {
    entries: Vec<(String, Vec<usize>)>,
}

impl ShapeLedger {
    fn push(&mut self, name: impl Into<String>, shape: &[usize]) {
        self.entries.push((name.into(), shape.to_vec()));
    }

    pub fn entries(&self) -> &[(String, Vec<usize>)] {
        &self.entries
    }

    pub fn elems(&self) -> usize {
        self.entries.iter().map(|(_, s)| s.iter().product::<usize>()).sum()
    }

    pub fn bytes(&self) -> usize {
        F32_BYTES * self.elems()
    }

    pub fn last_shape(&self) -> Option<&[usize]> {
        self.entries.last().map(|(_, s)| s.as_slice())
    }
}

impl std::fmt::Display for ShapeLedger {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for (name, shape) in &self.entries {
            writeln!(f, "{name:<28} {shape:?}")?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MemoryProfile {
    pub pipeline: String,
    pub batch: usize,
    pub n_frames: usize,
    pub resolution: usize,
    pub trainable_params: usize,
    pub frozen_params: usize,
    /// Analytic forward+backward activation bound.
    pub peak_activation_bytes: usize,
    /// Adam moments: two f32 per trainable parameter, exactly.
    pub optimizer_state_bytes: usize,
}

impl MemoryProfile {
    pub fn param_bytes(&self) -> usize {
        F32_BYTES * (self.trainable_params + self.frozen_params)
    }

    pub fn gradient_bytes(&self) -> usize {
        F32_BYTES * self.trainable_params
    }

    pub fn total_bytes(&self) -> usize {
        self.peak_activation_bytes + self.param_bytes() + self.gradient_bytes() + self.optimizer_state_bytes
    }
}

impl std::fmt::Display for MemoryProfile {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(
            f,
            "pipeline {} (batch {}, {} frames, {}px)",
            self.pipeline, self.batch, self.n_frames, self.resolution
        )?;
        writeln!(f, "  trainable params      {:>14}", self.trainable_params)?;
        writeln!(f, "  frozen params         {:>14}", self.frozen_params)?;
        writeln!(f, "  activation bytes      {:>14}", self.peak_activation_bytes)?;
        writeln!(f, "  gradient bytes        {:>14}", self.gradient_bytes())?;
        writeln!(f, "  optimizer state bytes {:>14}", self.optimizer_state_bytes)?;
        write!(f, "  total bytes           {:>14}", self.total_bytes())
    }
}

/// Side-by-side profiles at identical clip geometry.
#[derive(Clone, Debug)]
pub struct MemoryComparison {
    pub mevgan: MemoryProfile,
    pub baseline: MemoryProfile,
}

impl MemoryComparison {
    /// baseline trainable / mevgan trainable.
    pub fn trainable_ratio(&self) -> f64 {
        self.baseline.trainable_params as f64 / self.mevgan.trainable_params as f64
    }

    /// baseline total / mevgan total.
    pub fn total_ratio(&self) -> f64 {
        self.baseline.total_bytes() as f64 / self.mevgan.total_bytes() as f64
    }
}

impl std::fmt::Display for MemoryComparison {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "{}", self.mevgan)?;
        writeln!(f, "{}", self.baseline)?;
        writeln!(f, "  trainable ratio (baseline/mevgan) {:>8.2}", self.trainable_ratio())?;
        write!(f, "  total ratio     (baseline/mevgan) {:>8.2}", self.total_ratio())
    }
}

fn linear_params(inw: usize, outw: usize) -> usize {
    inw * outw + outw
}

fn conv_params(cin: usize, cout: usize, kernel: usize) -> usize {
    cout * cin * kernel + cout
}

/// Plugin parameter count from its layer table.
pub fn plugin_param_count() -> usize {
    LAYER_WIDTHS.iter().map(|&(i, o)| linear_params(i, o)).sum()
}

/// Video discriminator parameter count from its layer table.
pub fn video_disc_param_count() -> usize {
    let convs: usize = LAYERS.iter().map(|&(cin, cout, (kh, kw), _)| conv_params(cin, cout, kh * kw)).sum();
    convs + linear_params(HEAD_IN, 1)
}

/// Backbone (generator, critic) parameter counts from a config, mirroring
/// the constructors layer by layer.
pub fn backbone_param_counts(cfg: &BackboneConfig) -> (usize, usize) {
    let c = &cfg.channels;
    let c0 = c[0];
    let ctop = *c.last().expect("validated non-empty");
    let img = cfg.image_channels;
    let base_px = cfg.base * cfg.base;

    let mut gen = linear_params(LATENT_DIM, c0 * base_px);
    gen += conv_params(c0, c0, 9);
    for s in 1..c.len() {
        gen += conv_params(c[s - 1], c[s], 9);
    }
    for &cs in c {
        gen += conv_params(cs, img, 1);
    }

    let mut critic = conv_params(img, ctop, 1);
    for s in (1..c.len()).rev() {
        critic += conv_params(c[s], c[s - 1], 9);
    }
    critic += conv_params(c0, c0, 9);
    critic += linear_params(c0 * base_px, FEATURE_DIM);
    critic += linear_params(FEATURE_DIM, 1);

    (gen, critic)
}

fn baseline_widths() -> [usize; 3] {
    // The desk backbone's channel table, reused for the 3D stand-in.
    [32, 16, 8]
}

/// Baseline (generator, discriminator) parameter counts from the layer
/// table in the module docs.
pub fn baseline_param_counts(n_frames: usize, resolution: usize) -> Result<(usize, usize)> {
    let q = baseline_q(resolution)?;
    let [c0, c1, c2] = baseline_widths();
    let seed_elems = c0 * n_frames * q * q;

    let gen = linear_params(LATENT_DIM, seed_elems)
        + conv_params(c0, c1, 27)
        + conv_params(c1, c2, 27)
        + conv_params(c2, 1, 1);
    let disc = conv_params(1, c2, 1)
        + conv_params(c2, c1, 27)
        + conv_params(c1, c0, 27)
        + linear_params(seed_elems, FEATURE_DIM)
        + linear_params(FEATURE_DIM, 1);
    Ok((gen, disc))
}

fn baseline_q(resolution: usize) -> Result<usize> {
    if resolution < 8 || !resolution.is_multiple_of(4) {
        return Err(Error::Config(format!(
            "baseline resolution {resolution} must be >= 8 and divisible by 4"
        )));
    }
    Ok(resolution / 4)
}

fn validate_geometry(batch: usize, n_frames: usize) -> Result<()> {
    if batch == 0 || n_frames == 0 {
        return Err(Error::Config("profile needs positive batch and n_frames".into()));
    }
    Ok(())
}

/// Activation walk of one plugin step: plugin -> generator -> critic
/// features -> video discriminator, at `batch` clips of `n_frames`.
pub fn mevgan_ledger(batch: usize, n_frames: usize, resolution: usize) -> Result<ShapeLedger> {
    validate_geometry(batch, n_frames)?;
    let cfg = BackboneConfig::for_resolution(resolution)?;
    let chain = shape_chain(n_frames, FEATURE_DIM);
    if !chain.compatible {
        return Err(Error::Config(format!(
            "{n_frames}-frame clips do not fit the video discriminator: {chain}"
        )));
    }
    let m = batch * n_frames;
    let mut led = ShapeLedger::default();

    for (i, &(inw, outw)) in LAYER_WIDTHS.iter().enumerate() {
        led.push(format!("plugin.concat{i}"), &[m, inw]);
        led.push(format!("plugin.affine{i}"), &[m, outw]);
        if i + 1 < LAYER_WIDTHS.len() {
            led.push(format!("plugin.relu{i}"), &[m, outw]);
        }
    }
    led.push("plugin.normalize", &[m, LATENT_DIM]);

    let c = &cfg.channels;
    let base = cfg.base;
    led.push("gen.stem", &[m, c[0] * base * base]);
    led.push("gen.base.act", &[m, c[0], base, base]);
    led.push("gen.base.conv", &[m, c[0], base, base]);
    led.push("gen.base.norm", &[m, c[0], base, base]);
    let mut r = base;
    for s in 1..c.len() {
        r *= 2;
        led.push(format!("gen.up{s}"), &[m, c[s - 1], r, r]);
        led.push(format!("gen.conv{s}"), &[m, c[s], r, r]);
        led.push(format!("gen.norm{s}"), &[m, c[s], r, r]);
    }
    led.push("gen.torgb", &[m, cfg.image_channels, r, r]);
    led.push("gen.tanh", &[m, cfg.image_channels, r, r]);

    led.push("critic.fromgray", &[m, *c.last().expect("non-empty"), r, r]);
    for (i, s) in (1..c.len()).rev().enumerate() {
        led.push(format!("critic.conv{}", i + 1), &[m, c[s - 1], r, r]);
        r /= 2;
        led.push(format!("critic.pool{}", i + 1), &[m, c[s - 1], r, r]);
    }
    led.push("critic.base.conv", &[m, c[0], base, base]);
    led.push("critic.feat", &[m, FEATURE_DIM]);

    led.push("vdisc.input", &[batch, 1, n_frames, FEATURE_DIM]);
    for (i, &(cc, h, w)) in chain.steps.iter().enumerate() {
        led.push(format!("vdisc.conv{}", i + 1), &[batch, cc, h, w]);
        led.push(format!("vdisc.relu{}", i + 1), &[batch, cc, h, w]);
    }
    led.push("vdisc.head", &[batch, 1]);
    led.push("vdisc.sigmoid", &[batch, 1]);
    Ok(led)
}

/// Activation walk of the 3D baseline: full video generator then 3D
/// discriminator, per the layer table in the module docs.
pub fn baseline_ledger(batch: usize, n_frames: usize, resolution: usize) -> Result<ShapeLedger> {
    validate_geometry(batch, n_frames)?;
    let q = baseline_q(resolution)?;
    let [c0, c1, c2] = baseline_widths();
    let n = n_frames;
    let b = batch;
    let mut led = ShapeLedger::default();

    led.push("gen3d.stem", &[b, c0 * n * q * q]);
    led.push("gen3d.seed.act", &[b, c0, n, q, q]);
    led.push("gen3d.up1", &[b, c0, n, 2 * q, 2 * q]);
    led.push("gen3d.conv1", &[b, c1, n, 2 * q, 2 * q]);
    led.push("gen3d.up2", &[b, c1, n, 4 * q, 4 * q]);
    led.push("gen3d.conv2", &[b, c2, n, 4 * q, 4 * q]);
    led.push("gen3d.togray", &[b, 1, n, 4 * q, 4 * q]);
    led.push("gen3d.tanh", &[b, 1, n, 4 * q, 4 * q]);

    led.push("disc3d.fromgray", &[b, c2, n, 4 * q, 4 * q]);
    led.push("disc3d.conv1", &[b, c1, n, 4 * q, 4 * q]);
    led.push("disc3d.pool1", &[b, c1, n, 2 * q, 2 * q]);
    led.push("disc3d.conv2", &[b, c0, n, 2 * q, 2 * q]);
    led.push("disc3d.pool2", &[b, c0, n, q, q]);
    led.push("disc3d.feat", &[b, FEATURE_DIM]);
    led.push("disc3d.head", &[b, 1]);
    led.push("disc3d.sigmoid", &[b, 1]);
    Ok(led)
}

/// Profile a pipeline at a clip geometry. Deterministic in its inputs.
pub fn profile(pipeline: &str, batch: usize, n_frames: usize, resolution: usize) -> Result<MemoryProfile> {
    let (trainable, frozen, ledger) = match pipeline {
        PIPELINE_MEVGAN => {
            let cfg = BackboneConfig::for_resolution(resolution)?;
            let (gen, critic) = backbone_param_counts(&cfg);
            (
                plugin_param_count() + video_disc_param_count(),
                gen + critic,
                mevgan_ledger(batch, n_frames, resolution)?,
            )
        }
        PIPELINE_BASELINE => {
            let (gen, disc) = baseline_param_counts(n_frames, resolution)?;
            (gen + disc, 0, baseline_ledger(batch, n_frames, resolution)?)
        }
        other => {
            return Err(Error::Config(format!(
                "unknown pipeline {other:?} (expected {PIPELINE_MEVGAN:?} or {PIPELINE_BASELINE:?})"
            )))
        }
    };
    Ok(MemoryProfile {
        pipeline: pipeline.to_string(),
        batch,
        n_frames,
        resolution,
        trainable_params: trainable,
        frozen_params: frozen,
        peak_activation_bytes: 2 * ledger.bytes(),
        optimizer_state_bytes: 2 * F32_BYTES * trainable,
    })
}

/// Profile both pipelines and check the sizing claim: the baseline must
/// out-weigh the plugin pipeline's trainable side at this geometry.
pub fn compare(batch: usize, n_frames: usize, resolution: usize) -> Result<MemoryComparison> {
    let mevgan = profile(PIPELINE_MEVGAN, batch, n_frames, resolution)?;
    let baseline = profile(PIPELINE_BASELINE, batch, n_frames, resolution)?;
    if baseline.trainable_params <= mevgan.trainable_params {
        return Err(Error::Contract(format!(
            "baseline sizing ({}) does not exceed the plugin pipeline's trainable side ({})",
            baseline.trainable_params, mevgan.trainable_params
        )));
    }
    Ok(MemoryComparison { mevgan, baseline })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backbone::Backbone;
    use crate::plugin::PluginNet;
    use crate::video_disc::VideoDiscriminator;

    #[test]
    fn optimizer_state_is_two_floats_per_trainable_param() {
        for p in [PIPELINE_MEVGAN, PIPELINE_BASELINE] {
            let prof = profile(p, 8, 8, 32).unwrap();
            assert_eq!(prof.optimizer_state_bytes, 2 * 4 * prof.trainable_params);
        }
    }

    #[test]
    fn doubling_batch_doubles_the_activation_bound_exactly() {
        for p in [PIPELINE_MEVGAN, PIPELINE_BASELINE] {
            let one = profile(p, 4, 8, 32).unwrap();
            let two = profile(p, 8, 8, 32).unwrap();
            assert_eq!(two.peak_activation_bytes, 2 * one.peak_activation_bytes);
        }
    }

    #[test]
    fn table_counts_match_instantiated_models() {
        assert_eq!(plugin_param_count(), PluginNet::<f32>::new(0).param_count());
        assert_eq!(video_disc_param_count(), VideoDiscriminator::<f32>::new(0).param_count());
        for res in [16, 32, 64] {
            let cfg = BackboneConfig::for_resolution(res).unwrap();
            let bb = Backbone::<f32>::new(0, &cfg).unwrap();
            let (gen, critic) = backbone_param_counts(&cfg);
            assert_eq!(gen, bb.gen.param_count(), "generator at {res}px");
            assert_eq!(critic, bb.critic.param_count(), "critic at {res}px");
        }
    }

    #[test]
    fn exact_pinned_counts() {
        assert_eq!(plugin_param_count(), 5_503_997);
        assert_eq!(video_disc_param_count(), 4_233);
    }

    #[test]
    fn baseline_outweighs_the_plugin_pipeline_at_desk_scale() {
        let cmp = compare(8, 8, 32).unwrap();
        assert!(cmp.trainable_ratio() >= 3.0, "ratio {}", cmp.trainable_ratio());
    }

    #[test]
    fn plugin_side_is_resolution_independent_and_baseline_grows() {
        let mevgan: Vec<usize> = [16, 32, 64]
            .iter()
            .map(|&r| profile(PIPELINE_MEVGAN, 8, 8, r).unwrap().trainable_params)
            .collect();
        assert!(mevgan.windows(2).all(|w| w[0] == w[1]), "{mevgan:?}");

        let baseline: Vec<usize> = [16, 32, 64]
            .iter()
            .map(|&r| profile(PIPELINE_BASELINE, 8, 8, r).unwrap().trainable_params)
            .collect();
        assert!(baseline.windows(2).all(|w| w[0] < w[1]), "{baseline:?}");
    }

    #[test]
    fn baseline_produces_the_pipeline_clip_shape() {
        let led = baseline_ledger(3, 8, 32).unwrap();
        let tanh = led.entries().iter().find(|(n, _)| n == "gen3d.tanh").unwrap();
        assert_eq!(tanh.1, vec![3, 1, 8, 32, 32]);
        let gray = led.entries().iter().find(|(n, _)| n == "disc3d.fromgray").unwrap();
        assert_eq!(gray.1[2..], [8, 32, 32]);
    }

    #[test]
    fn profiles_are_deterministic() {
        let a = profile(PIPELINE_MEVGAN, 8, 8, 32).unwrap();
        let b = profile(PIPELINE_MEVGAN, 8, 8, 32).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn unknown_pipeline_is_rejected() {
        assert!(matches!(profile("tgan-v2", 8, 8, 32), Err(Error::Config(_))));
    }

    #[test]
    fn incompatible_frame_count_is_rejected_for_the_plugin_pipeline() {
        assert!(matches!(profile(PIPELINE_MEVGAN, 8, 5, 32), Err(Error::Config(_))));
        assert!(profile(PIPELINE_BASELINE, 8, 5, 32).is_ok());
    }
}
