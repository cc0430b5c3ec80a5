//! Image GAN backbone: generator and critic.
//!
//! The backbone is an ordinary 2D image GAN, trained once on individual
//! frames and then frozen. The rest of the toolkit treats it as a fixed
//! renderer (generator: 512-d latent -> frame) and a fixed perceptual
//! embedder (critic minus its scoring head: frame -> 512-d feature).
//!
//! The generator starts from a latent on the unit hypersphere, projects it
//! to a `base x base` feature map and doubles the resolution per stage
//! with nearest-neighbour upsampling followed by a 3x3 convolution,
//! LeakyReLU and per-pixel channel normalization; a 1x1 convolution and
//! tanh render grayscale. Every stage keeps its own 1x1 render head so a
//! half-grown network can fade a freshly added stage in smoothly:
//! `forward_staged(stage, alpha)` blends the new stage's render with the
//! upsampled render of the stage below (blend weight `alpha`, applied
//! before tanh), and at `alpha = 0` reproduces the lower stage's output
//! exactly.
//!
//! The critic mirrors the generator downward (3x3 convolution, LeakyReLU,
//! 2x average pooling per stage, no normalization anywhere) into a 512-d
//! feature layer topped by a linear scoring head. [`Critic::features`]
//! exposes the penultimate layer; [`Critic::score`] is exactly that layer
//! pushed through the head.

mod train;

pub use train::{train_backbone, BackboneTrainConfig, BackboneTrainStats};

use crate::params::{he_normal, xavier_normal, ParamSet};
use crate::rng::{stream, Rng};
use crate::tape::{Tape, TensorRef};
use crate::tensor::{Elem, Tensor};
use crate::{checkpoint, Error, Result};

/// Generator latent width.
pub const LATENT_DIM: usize = 512;
/// Critic feature width (the penultimate layer).
pub const FEATURE_DIM: usize = 512;
/// LeakyReLU slope used throughout the backbone.
pub const LEAK: f64 = 0.2;

pub const GEN_ROLE: &str = "backbone-generator";
pub const CRITIC_ROLE: &str = "backbone-critic";

/// Geometry of one backbone: `channels[s]` is the feature width at
/// resolution `base << s`, so `resolution = base << (channels.len() - 1)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BackboneConfig {
    pub resolution: usize,
    pub base: usize,
    pub channels: Vec<usize>,
    pub image_channels: usize,
}

impl BackboneConfig {
    /// Desk-scale default: 32px grayscale grown from 8px.
    pub fn desk() -> Self {
        BackboneConfig { resolution: 32, base: 8, channels: vec![32, 16, 8], image_channels: 1 }
    }

    /// The desk sizing rule at another resolution: 8px base, 32 channels
    /// there, halving per stage (floor 4). `resolution` must be `8 << k`.
    pub fn for_resolution(resolution: usize) -> Result<Self> {
        if resolution < 8 || !resolution.is_power_of_two() {
            return Err(Error::Config(format!(
                "backbone resolution {resolution} must be a power of two >= 8"
            )));
        }
        let stages = (resolution / 8).trailing_zeros() as usize;
        let channels = (0..=stages).map(|s| std::cmp::max(32 >> s, 4)).collect();
        let cfg = BackboneConfig { resolution, base: 8, channels, image_channels: 1 };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Number of upsampling stages above the base resolution.
    pub fn stages(&self) -> usize {
        self.channels.len().saturating_sub(1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.base < 4 {
            return Err(Error::Config(format!("backbone base resolution {} is below 4", self.base)));
        }
        if self.channels.is_empty() || self.channels.contains(&0) {
            return Err(Error::Config(format!("backbone channels {:?} must be non-empty and positive", self.channels)));
        }
        if self.image_channels == 0 {
            return Err(Error::Config("backbone image_channels must be positive".into()));
        }
        let expect = self.base << self.stages();
        if self.resolution != expect {
            return Err(Error::Config(format!(
                "backbone resolution {} does not equal base {} doubled {} times ({expect})",
                self.resolution,
                self.base,
                self.stages()
            )));
        }
        Ok(())
    }
}

/// Draw `batch` latents uniformly on the unit hypersphere (normalized
/// standard normals).
pub fn sample_latent<F: Elem>(rng: &mut Rng, batch: usize) -> Tensor<F> {
    let mut t = Tensor::<F>::randn_with(&[batch, LATENT_DIM], rng).expect("static shape is valid");
    let data = t.data_mut();
    for i in 0..batch {
        let row = &mut data[i * LATENT_DIM..(i + 1) * LATENT_DIM];
        let norm = row.iter().fold(F::zero(), |a, &x| a + x * x).sqrt();
        for x in row.iter_mut() {
            *x = *x / norm;
        }
    }
    t
}

/// 3x3 stride-1 convolution with 1px zero padding (same size), bias and
/// LeakyReLU.
fn same_conv_lrelu<F: Elem>(
    tape: &mut Tape<F>,
    x: TensorRef,
    w: TensorRef,
    b: TensorRef,
) -> Result<TensorRef> {
    let p = tape.pad2d(x, (1, 1, 1, 1))?;
    let y = tape.conv2d(p, w, (1, 1))?;
    let y = tape.add_bias_chan(y, b)?;
    tape.leaky_relu(y, LEAK)
}

#[derive(Clone, Debug)]
pub struct Generator<F: Elem = f32> {
    pub config: BackboneConfig,
    pub params: ParamSet<F>,
    stem: (usize, usize),
    base_conv: (usize, usize),
    blocks: Vec<(usize, usize)>,
    torgbs: Vec<(usize, usize)>,
}

impl<F: Elem> Generator<F> {
    pub fn new(seed: u64, config: &BackboneConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = Rng::stream(seed, stream::BACKBONE_INIT);
        let mut params = ParamSet::new();
        let c0 = config.channels[0];
        let stem_out = c0 * config.base * config.base;
        let stem = (
            params.push("stem.w", he_normal(&[LATENT_DIM, stem_out], LATENT_DIM, &mut rng)?),
            params.push("stem.b", Tensor::zeros(&[stem_out])?),
        );
        let base_conv = (
            params.push("base.w", he_normal(&[c0, c0, 3, 3], c0 * 9, &mut rng)?),
            params.push("base.b", Tensor::zeros(&[c0])?),
        );
        let mut blocks = Vec::new();
        for s in 1..config.channels.len() {
            let (cin, cout) = (config.channels[s - 1], config.channels[s]);
            blocks.push((
                params.push(format!("block{s}.w"), he_normal(&[cout, cin, 3, 3], cin * 9, &mut rng)?),
                params.push(format!("block{s}.b"), Tensor::zeros(&[cout])?),
            ));
        }
        let mut torgbs = Vec::new();
        for (s, &c) in config.channels.iter().enumerate() {
            let img = config.image_channels;
            torgbs.push((
                params.push(format!("torgb{s}.w"), xavier_normal(&[img, c, 1, 1], c, img, &mut rng)?),
                params.push(format!("torgb{s}.b"), Tensor::zeros(&[img])?),
            ));
        }
        Ok(Generator { config: config.clone(), params, stem, base_conv, blocks, torgbs })
    }

    pub fn param_count(&self) -> usize {
        self.params.total_elems()
    }

    /// Render latents `(b, LATENT_DIM)` at full resolution.
    pub fn forward(&self, tape: &mut Tape<F>, binds: &[TensorRef], z: TensorRef) -> Result<TensorRef> {
        self.forward_staged(tape, binds, z, self.config.stages(), 1.0)
    }

    /// Render at resolution `base << stage`, blending the top stage's
    /// render against the upsampled render of the stage below with weight
    /// `alpha` (1 = new stage only; 0 = exactly the lower stage's output,
    /// upsampled).
    pub fn forward_staged(
        &self,
        tape: &mut Tape<F>,
        binds: &[TensorRef],
        z: TensorRef,
        stage: usize,
        alpha: f64,
    ) -> Result<TensorRef> {
        if stage > self.config.stages() {
            return Err(Error::Contract(format!(
                "generator stage {stage} exceeds the configured {}",
                self.config.stages()
            )));
        }
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::Contract(format!("fade alpha {alpha} is outside [0, 1]")));
        }
        let zshape = tape.shape(z)?.to_vec();
        if zshape.len() != 2 || zshape[1] != LATENT_DIM {
            return Err(Error::Shape(format!("generator latents must be (b, {LATENT_DIM}), got {zshape:?}")));
        }
        let batch = zshape[0];
        let c0 = self.config.channels[0];
        let base = self.config.base;

        let zs = tape.scale(z, (LATENT_DIM as f64).sqrt())?;
        let h = tape.matmul(zs, binds[self.stem.0])?;
        let h = tape.add_bias_row(h, binds[self.stem.1])?;
        let h = tape.reshape(h, &[batch, c0, base, base])?;
        let h = tape.leaky_relu(h, LEAK)?;
        let h = tape.pixelnorm(h)?;
        let h = same_conv_lrelu(tape, h, binds[self.base_conv.0], binds[self.base_conv.1])?;
        let mut top = tape.pixelnorm(h)?;

        let mut below = None;
        for s in 1..=stage {
            below = Some(top);
            let up = tape.upsample2x(top)?;
            let (wi, bi) = self.blocks[s - 1];
            let h = same_conv_lrelu(tape, up, binds[wi], binds[bi])?;
            top = tape.pixelnorm(h)?;
        }

        let mut pre = self.render(tape, binds, top, stage)?;
        if alpha < 1.0 {
            if let Some(below) = below {
                let old = self.render(tape, binds, below, stage - 1)?;
                let old_up = tape.upsample2x(old)?;
                let a = tape.scale(pre, alpha)?;
                let b = tape.scale(old_up, 1.0 - alpha)?;
                pre = tape.add(a, b)?;
            }
        }
        tape.tanh(pre)
    }

    /// Stage-local 1x1 render to image channels, before tanh.
    fn render(&self, tape: &mut Tape<F>, binds: &[TensorRef], h: TensorRef, stage: usize) -> Result<TensorRef> {
        let (wi, bi) = self.torgbs[stage];
        let y = tape.conv2d(h, binds[wi], (1, 1))?;
        tape.add_bias_chan(y, binds[bi])
    }

    /// Detached rendering convenience.
    pub fn generate(&self, z: &Tensor<F>) -> Result<Tensor<F>> {
        let mut tape = Tape::new();
        let binds = self.params.bind_frozen(&mut tape);
        let zr = tape.constant(z);
        let out = self.forward(&mut tape, &binds, zr)?;
        tape.tensor(out)
    }

    pub fn cast<G: Elem>(&self) -> Generator<G> {
        Generator {
            config: self.config.clone(),
            params: self.params.cast::<G>(),
            stem: self.stem,
            base_conv: self.base_conv,
            blocks: self.blocks.clone(),
            torgbs: self.torgbs.clone(),
        }
    }

    pub fn to_role(&self, frozen: bool) -> checkpoint::Role {
        checkpoint::Role::from_params(GEN_ROLE, frozen, &self.params.cast::<f32>())
    }
}

impl Generator<f32> {
    /// Rebuild from a checkpoint role. The geometry is inferred from the
    /// stored tensor shapes: `base.w` pins the base width, the `block*`
    /// chain pins the channel schedule, `stem.w` pins the base resolution
    /// and `torgb*` the image channels.
    pub fn from_role(role: &checkpoint::Role) -> Result<Self> {
        let shape_of = |name: &str| -> Result<Vec<usize>> {
            role.tensor(name)
                .map(|t| t.shape().to_vec())
                .ok_or_else(|| Error::Format(format!("generator role missing tensor '{name}'")))
        };
        let base_w = shape_of("base.w")?;
        if base_w.len() != 4 || base_w[0] != base_w[1] {
            return Err(Error::Format(format!("generator base.w has unexpected shape {base_w:?}")));
        }
        let c0 = base_w[0];
        let mut channels = vec![c0];
        while role.tensor(&format!("block{}.w", channels.len())).is_some() {
            let s = shape_of(&format!("block{}.w", channels.len()))?;
            if s.len() != 4 {
                return Err(Error::Format(format!("generator block weight has unexpected shape {s:?}")));
            }
            channels.push(s[0]);
        }
        let stem_w = shape_of("stem.w")?;
        if stem_w.len() != 2 || stem_w[0] != LATENT_DIM || stem_w[1] % c0 != 0 {
            return Err(Error::Format(format!("generator stem.w has unexpected shape {stem_w:?}")));
        }
        let basesq = stem_w[1] / c0;
        let base = (basesq as f64).sqrt().round() as usize;
        if base * base != basesq {
            return Err(Error::Format(format!("generator stem width {} is not c0 x base^2", stem_w[1])));
        }
        let torgb0 = shape_of("torgb0.w")?;
        if torgb0.len() != 4 {
            return Err(Error::Format(format!("generator torgb0.w has unexpected shape {torgb0:?}")));
        }
        let config = BackboneConfig {
            resolution: base << (channels.len() - 1),
            base,
            channels,
            image_channels: torgb0[0],
        };
        let fresh = Generator::<f32>::new(0, &config)?;
        let mut params = ParamSet::new();
        let mut map = |name: &str| -> Result<usize> {
            let t = role
                .tensor(name)
                .ok_or_else(|| Error::Format(format!("generator role missing tensor '{name}'")))?;
            let want = fresh.params.iter().find(|p| p.name == name).expect("fresh net has every name");
            if t.shape() != want.tensor.shape() {
                return Err(Error::Format(format!(
                    "generator tensor '{name}' has shape {:?}, expected {:?}",
                    t.shape(),
                    want.tensor.shape()
                )));
            }
            Ok(params.push(name.to_string(), t.clone()))
        };
        let stem = (map("stem.w")?, map("stem.b")?);
        let base_conv = (map("base.w")?, map("base.b")?);
        let mut blocks = Vec::new();
        for s in 1..config.channels.len() {
            blocks.push((map(&format!("block{s}.w"))?, map(&format!("block{s}.b"))?));
        }
        let mut torgbs = Vec::new();
        for s in 0..config.channels.len() {
            torgbs.push((map(&format!("torgb{s}.w"))?, map(&format!("torgb{s}.b"))?));
        }
        params.set_trainable(!role.frozen);
        Ok(Generator { config, params, stem, base_conv, blocks, torgbs })
    }
}

#[derive(Clone, Debug)]
pub struct Critic<F: Elem = f32> {
    pub config: BackboneConfig,
    pub params: ParamSet<F>,
    fromgray: (usize, usize),
    blocks: Vec<(usize, usize)>,
    base_conv: (usize, usize),
    feat: (usize, usize),
    head: (usize, usize),
}

impl<F: Elem> Critic<F> {
    pub fn new(seed: u64, config: &BackboneConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = Rng::stream(seed.wrapping_add(1), stream::BACKBONE_INIT);
        let mut params = ParamSet::new();
        let img = config.image_channels;
        let ctop = *config.channels.last().expect("validated non-empty");
        let fromgray = (
            params.push("fromgray.w", he_normal(&[ctop, img, 1, 1], img, &mut rng)?),
            params.push("fromgray.b", Tensor::zeros(&[ctop])?),
        );
        let mut blocks = Vec::new();
        for (i, s) in (1..config.channels.len()).rev().enumerate() {
            let (cin, cout) = (config.channels[s], config.channels[s - 1]);
            blocks.push((
                params.push(format!("block{}.w", i + 1), he_normal(&[cout, cin, 3, 3], cin * 9, &mut rng)?),
                params.push(format!("block{}.b", i + 1), Tensor::zeros(&[cout])?),
            ));
        }
        let c0 = config.channels[0];
        let base_conv = (
            params.push("base.w", he_normal(&[c0, c0, 3, 3], c0 * 9, &mut rng)?),
            params.push("base.b", Tensor::zeros(&[c0])?),
        );
        let flat = c0 * config.base * config.base;
        let feat = (
            params.push("feat.w", he_normal(&[flat, FEATURE_DIM], flat, &mut rng)?),
            params.push("feat.b", Tensor::zeros(&[FEATURE_DIM])?),
        );
        let head = (
            params.push("head.w", xavier_normal(&[FEATURE_DIM, 1], FEATURE_DIM, 1, &mut rng)?),
            params.push("head.b", Tensor::zeros(&[1])?),
        );
        Ok(Critic { config: config.clone(), params, fromgray, blocks, base_conv, feat, head })
    }

    pub fn param_count(&self) -> usize {
        self.params.total_elems()
    }

    /// Penultimate 512-d embedding of images `(b, img, res, res)`.
    pub fn features(&self, tape: &mut Tape<F>, binds: &[TensorRef], x: TensorRef) -> Result<TensorRef> {
        let shape = tape.shape(x)?.to_vec();
        let expect = [self.config.image_channels, self.config.resolution, self.config.resolution];
        if shape.len() != 4 || shape[1..] != expect {
            return Err(Error::Shape(format!(
                "critic input must be (b, {}, {}, {}), got {shape:?}",
                expect[0], expect[1], expect[2]
            )));
        }
        let batch = shape[0];
        let y = tape.conv2d(x, binds[self.fromgray.0], (1, 1))?;
        let y = tape.add_bias_chan(y, binds[self.fromgray.1])?;
        let mut h = tape.leaky_relu(y, LEAK)?;
        for &(wi, bi) in &self.blocks {
            let c = same_conv_lrelu(tape, h, binds[wi], binds[bi])?;
            h = tape.avgpool2x(c)?;
        }
        let h = same_conv_lrelu(tape, h, binds[self.base_conv.0], binds[self.base_conv.1])?;
        let flat = self.config.channels[0] * self.config.base * self.config.base;
        let h = tape.reshape(h, &[batch, flat])?;
        let h = tape.matmul(h, binds[self.feat.0])?;
        let h = tape.add_bias_row(h, binds[self.feat.1])?;
        tape.leaky_relu(h, LEAK)
    }

    /// Critic score: the feature layer pushed through the linear head.
    pub fn score(&self, tape: &mut Tape<F>, binds: &[TensorRef], x: TensorRef) -> Result<TensorRef> {
        let f = self.features(tape, binds, x)?;
        self.score_from_features(tape, binds, f)
    }

    pub fn score_from_features(
        &self,
        tape: &mut Tape<F>,
        binds: &[TensorRef],
        f: TensorRef,
    ) -> Result<TensorRef> {
        let s = tape.matmul(f, binds[self.head.0])?;
        tape.add_bias_row(s, binds[self.head.1])
    }

    /// Detached embedding convenience.
    pub fn extract_features(&self, x: &Tensor<F>) -> Result<Tensor<F>> {
        let mut tape = Tape::new();
        let binds = self.params.bind_frozen(&mut tape);
        let xr = tape.constant(x);
        let f = self.features(&mut tape, &binds, xr)?;
        tape.tensor(f)
    }

    /// Stack per-frame embeddings of a clip `(n, img, res, res)` into a
    /// feature video `(1, 1, n, FEATURE_DIM)`, detached.
    pub fn feature_video(&self, frames: &Tensor<F>) -> Result<Tensor<F>> {
        let n = frames.shape().first().copied().unwrap_or(0);
        let f = self.extract_features(frames)?;
        f.reshaped(&[1, 1, n, FEATURE_DIM])
    }

    pub fn cast<G: Elem>(&self) -> Critic<G> {
        Critic {
            config: self.config.clone(),
            params: self.params.cast::<G>(),
            fromgray: self.fromgray,
            blocks: self.blocks.clone(),
            base_conv: self.base_conv,
            feat: self.feat,
            head: self.head,
        }
    }

    pub fn to_role(&self, frozen: bool) -> checkpoint::Role {
        checkpoint::Role::from_params(CRITIC_ROLE, frozen, &self.params.cast::<f32>())
    }
}

impl Critic<f32> {
    /// Rebuild from a checkpoint role, inferring the geometry from tensor
    /// shapes (mirror of [`Generator::from_role`]).
    pub fn from_role(role: &checkpoint::Role) -> Result<Self> {
        let shape_of = |name: &str| -> Result<Vec<usize>> {
            role.tensor(name)
                .map(|t| t.shape().to_vec())
                .ok_or_else(|| Error::Format(format!("critic role missing tensor '{name}'")))
        };
        let base_w = shape_of("base.w")?;
        if base_w.len() != 4 || base_w[0] != base_w[1] {
            return Err(Error::Format(format!("critic base.w has unexpected shape {base_w:?}")));
        }
        let c0 = base_w[0];
        let mut rev = Vec::new();
        while role.tensor(&format!("block{}.w", rev.len() + 1)).is_some() {
            let s = shape_of(&format!("block{}.w", rev.len() + 1))?;
            if s.len() != 4 {
                return Err(Error::Format(format!("critic block weight has unexpected shape {s:?}")));
            }
            rev.push(s[1]);
        }
        let mut channels = vec![c0];
        channels.extend(rev.iter().rev());
        let feat_w = shape_of("feat.w")?;
        if feat_w.len() != 2 || feat_w[1] != FEATURE_DIM || feat_w[0] % c0 != 0 {
            return Err(Error::Format(format!("critic feat.w has unexpected shape {feat_w:?}")));
        }
        let basesq = feat_w[0] / c0;
        let base = (basesq as f64).sqrt().round() as usize;
        if base * base != basesq {
            return Err(Error::Format(format!("critic feat width {} is not c0 x base^2", feat_w[0])));
        }
        let fromgray_w = shape_of("fromgray.w")?;
        if fromgray_w.len() != 4 {
            return Err(Error::Format(format!("critic fromgray.w has unexpected shape {fromgray_w:?}")));
        }
        let config = BackboneConfig {
            resolution: base << (channels.len() - 1),
            base,
            channels,
            image_channels: fromgray_w[1],
        };
        let fresh = Critic::<f32>::new(0, &config)?;
        let mut params = ParamSet::new();
        let mut map = |name: &str| -> Result<usize> {
            let t = role
                .tensor(name)
                .ok_or_else(|| Error::Format(format!("critic role missing tensor '{name}'")))?;
            let want = fresh.params.iter().find(|p| p.name == name).expect("fresh net has every name");
            if t.shape() != want.tensor.shape() {
                return Err(Error::Format(format!(
                    "critic tensor '{name}' has shape {:?}, expected {:?}",
                    t.shape(),
                    want.tensor.shape()
                )));
            }
            Ok(params.push(name.to_string(), t.clone()))
        };
        let fromgray = (map("fromgray.w")?, map("fromgray.b")?);
        let mut blocks = Vec::new();
        for i in 1..config.channels.len() {
            blocks.push((map(&format!("block{i}.w"))?, map(&format!("block{i}.b"))?));
        }
        let base_conv = (map("base.w")?, map("base.b")?);
        let feat = (map("feat.w")?, map("feat.b")?);
        let head = (map("head.w")?, map("head.b")?);
        params.set_trainable(!role.frozen);
        Ok(Critic { config, params, fromgray, blocks, base_conv, feat, head })
    }
}

/// Proof that a backbone was frozen: compare with [`Backbone::verify_frozen`]
/// before and after any stage that must not touch backbone weights.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FreezeState {
    pub frozen: bool,
    pub weight_checksum: u64,
}

#[derive(Clone, Debug)]
pub struct Backbone<F: Elem = f32> {
    pub gen: Generator<F>,
    pub critic: Critic<F>,
    pub frozen: bool,
}

impl<F: Elem> Backbone<F> {
    pub fn new(seed: u64, config: &BackboneConfig) -> Result<Self> {
        Ok(Backbone { gen: Generator::new(seed, config)?, critic: Critic::new(seed, config)?, frozen: false })
    }

    /// Order-sensitive digest over every generator and critic weight.
    pub fn checksum(&self) -> u64 {
        let mut h = 0xcbf29ce484222325u64;
        for part in [self.gen.params.checksum(), self.critic.params.checksum()] {
            for byte in part.to_le_bytes() {
                h ^= byte as u64;
                h = h.wrapping_mul(0x100000001b3);
            }
        }
        h
    }

    /// Mark every weight untrainable and record the checksum they must
    /// still have later.
    pub fn freeze(&mut self) -> FreezeState {
        self.gen.params.set_trainable(false);
        self.critic.params.set_trainable(false);
        self.frozen = true;
        FreezeState { frozen: true, weight_checksum: self.checksum() }
    }

    /// Confirm the backbone is frozen and bit-identical to the recorded
    /// state.
    pub fn verify_frozen(&self, state: &FreezeState) -> Result<()> {
        if !state.frozen || !self.frozen {
            return Err(Error::Contract("backbone is not frozen".into()));
        }
        let now = self.checksum();
        if now != state.weight_checksum {
            return Err(Error::Contract(format!(
                "backbone weights changed while frozen: checksum {now:#018x} != recorded {:#018x}",
                state.weight_checksum
            )));
        }
        Ok(())
    }

    pub fn cast<G: Elem>(&self) -> Backbone<G> {
        Backbone { gen: self.gen.cast::<G>(), critic: self.critic.cast::<G>(), frozen: self.frozen }
    }

    pub fn to_roles(&self) -> Vec<checkpoint::Role> {
        vec![self.gen.to_role(self.frozen), self.critic.to_role(self.frozen)]
    }
}

impl Backbone<f32> {
    /// Rebuild generator and critic from a checkpoint, requiring matching
    /// geometry and a consistent frozen flag across the two roles.
    pub fn from_checkpoint(ck: &checkpoint::Checkpoint) -> Result<Self> {
        let gr = ck.require_role(GEN_ROLE)?;
        let cr = ck.require_role(CRITIC_ROLE)?;
        let gen = Generator::from_role(gr)?;
        let critic = Critic::from_role(cr)?;
        if gen.config != critic.config {
            return Err(Error::Format(format!(
                "generator geometry {:?} does not match critic geometry {:?}",
                gen.config, critic.config
            )));
        }
        if gr.frozen != cr.frozen {
            return Err(Error::Format("generator and critic roles disagree on the frozen flag".into()));
        }
        Ok(Backbone { gen, critic, frozen: gr.frozen })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> BackboneConfig {
        BackboneConfig { resolution: 8, base: 4, channels: vec![8, 4], image_channels: 1 }
    }

    #[test]
    fn desk_config_is_valid() {
        let c = BackboneConfig::desk();
        c.validate().unwrap();
        assert_eq!(c.stages(), 2);
        assert_eq!(c.resolution, 32);
    }

    #[test]
    fn config_validation_rejects_inconsistent_geometry() {
        let mut c = BackboneConfig::desk();
        c.resolution = 64;
        assert!(c.validate().is_err());
        let mut c = BackboneConfig::desk();
        c.channels.clear();
        assert!(c.validate().is_err());
        let mut c = BackboneConfig::desk();
        c.base = 2;
        assert!(c.validate().is_err());
    }

    #[test]
    fn latents_live_on_the_unit_sphere() {
        let mut rng = Rng::seeded(1);
        let z = sample_latent::<f32>(&mut rng, 5);
        assert_eq!(z.shape(), &[5, LATENT_DIM]);
        for i in 0..5 {
            let row = &z.data()[i * LATENT_DIM..(i + 1) * LATENT_DIM];
            let norm: f32 = row.iter().map(|x| x * x).sum::<f32>().sqrt();
            assert!((norm - 1.0).abs() < 1e-5);
        }
    }

    #[test]
    fn generator_renders_bounded_frames() {
        let cfg = BackboneConfig::desk();
        let gen = Generator::<f32>::new(2, &cfg).unwrap();
        let mut rng = Rng::seeded(3);
        let z = sample_latent::<f32>(&mut rng, 2);
        let frames = gen.generate(&z).unwrap();
        assert_eq!(frames.shape(), &[2, 1, 32, 32]);
        for &v in frames.data() {
            assert!(v.is_finite() && (-1.0..=1.0).contains(&v));
        }
    }

    #[test]
    fn staged_rendering_halves_resolution_per_stage() {
        let cfg = BackboneConfig::desk();
        let gen = Generator::<f32>::new(4, &cfg).unwrap();
        let mut rng = Rng::seeded(5);
        let z = sample_latent::<f32>(&mut rng, 1);
        for (stage, res) in [(0usize, 8usize), (1, 16), (2, 32)] {
            let mut tape = Tape::new();
            let binds = gen.params.bind_frozen(&mut tape);
            let zr = tape.constant(&z);
            let out = gen.forward_staged(&mut tape, &binds, zr, stage, 1.0).unwrap();
            assert_eq!(tape.shape(out).unwrap(), &[1, 1, res, res]);
        }
    }

    #[test]
    fn fade_at_zero_reproduces_the_lower_stage_exactly() {
        let cfg = BackboneConfig::desk();
        let gen = Generator::<f32>::new(6, &cfg).unwrap();
        let mut rng = Rng::seeded(7);
        let z = sample_latent::<f32>(&mut rng, 2);
        for stage in 1..=cfg.stages() {
            let mut tape = Tape::new();
            let binds = gen.params.bind_frozen(&mut tape);
            let zr = tape.constant(&z);
            let faded = gen.forward_staged(&mut tape, &binds, zr, stage, 0.0).unwrap();
            let lower = gen.forward_staged(&mut tape, &binds, zr, stage - 1, 1.0).unwrap();
            let lower_up = tape.upsample2x(lower).unwrap();
            let a = tape.tensor(faded).unwrap();
            let b = tape.tensor(lower_up).unwrap();
            assert_eq!(a.shape(), b.shape());
            assert_eq!(a.data(), b.data(), "stage {stage} fade at alpha=0 is not exact");
        }
    }

    #[test]
    fn fade_rejects_out_of_range_alpha() {
        let cfg = tiny();
        let gen = Generator::<f32>::new(8, &cfg).unwrap();
        let mut tape = Tape::new();
        let binds = gen.params.bind_frozen(&mut tape);
        let z = tape.constant(&sample_latent::<f32>(&mut Rng::seeded(9), 1));
        assert!(gen.forward_staged(&mut tape, &binds, z, 1, 1.5).is_err());
        assert!(gen.forward_staged(&mut tape, &binds, z, 7, 1.0).is_err());
    }

    #[test]
    fn critic_features_are_the_penultimate_layer() {
        let cfg = BackboneConfig::desk();
        let critic = Critic::<f32>::new(10, &cfg).unwrap();
        let x = Tensor::<f32>::randn(&[2, 1, 32, 32], 11).unwrap();
        let mut tape = Tape::new();
        let binds = critic.params.bind_frozen(&mut tape);
        let xr = tape.constant(&x);
        let f = critic.features(&mut tape, &binds, xr).unwrap();
        let s = critic.score(&mut tape, &binds, xr).unwrap();
        assert_eq!(tape.shape(f).unwrap(), &[2, FEATURE_DIM]);
        assert_eq!(tape.shape(s).unwrap(), &[2, 1]);

        // Recompute head(features) by hand and compare.
        let feats = tape.tensor(f).unwrap();
        let scores = tape.tensor(s).unwrap();
        let hw = critic.params.iter().find(|p| p.name == "head.w").unwrap().tensor.clone();
        let hb = critic.params.iter().find(|p| p.name == "head.b").unwrap().tensor.clone();
        for b in 0..2 {
            let mut acc = hb.data()[0];
            for j in 0..FEATURE_DIM {
                acc += feats.data()[b * FEATURE_DIM + j] * hw.data()[j];
            }
            assert!((acc - scores.data()[b]).abs() < 1e-4);
        }
    }

    #[test]
    fn feature_video_stacks_frames_in_order() {
        let cfg = tiny();
        let critic = Critic::<f32>::new(12, &cfg).unwrap();
        let frames = Tensor::<f32>::randn(&[3, 1, 8, 8], 13).unwrap();
        let fv = critic.feature_video(&frames).unwrap();
        assert_eq!(fv.shape(), &[1, 1, 3, FEATURE_DIM]);
        let single = frames.data()[8 * 8..2 * 8 * 8].to_vec();
        let one = Tensor::new(&[1, 1, 8, 8], single).unwrap();
        let f1 = critic.extract_features(&one).unwrap();
        assert_eq!(&fv.data()[FEATURE_DIM..2 * FEATURE_DIM], f1.data());
    }

    #[test]
    fn critic_rejects_wrong_image_geometry() {
        let cfg = BackboneConfig::desk();
        let critic = Critic::<f32>::new(14, &cfg).unwrap();
        for shape in [vec![1, 1, 16, 16], vec![1, 3, 32, 32], vec![2, 32, 32]] {
            let x = Tensor::<f32>::randn(&shape, 15).unwrap();
            assert!(critic.extract_features(&x).is_err(), "accepted {shape:?}");
        }
    }

    #[test]
    fn freeze_then_verify_then_detect_tampering() {
        let cfg = tiny();
        let mut bb = Backbone::<f32>::new(16, &cfg).unwrap();
        assert!(!bb.frozen);
        let state = bb.freeze();
        assert!(bb.frozen);
        bb.verify_frozen(&state).unwrap();

        let mut tampered = bb.clone();
        tampered.gen.params.get_mut(0).tensor.data_mut()[0] += 1.0;
        let err = tampered.verify_frozen(&state).unwrap_err();
        assert!(matches!(err, Error::Contract(_)));

        let unfrozen = Backbone::<f32>::new(16, &cfg).unwrap();
        assert!(unfrozen.verify_frozen(&state).is_err());
    }

    #[test]
    fn checkpoint_roundtrip_preserves_weights_and_frozen_flag() {
        let cfg = BackboneConfig::desk();
        let mut bb = Backbone::<f32>::new(18, &cfg).unwrap();
        bb.freeze();
        let mut ck = checkpoint::Checkpoint::default();
        for role in bb.to_roles() {
            ck.push_role(role);
        }
        let back = Backbone::from_checkpoint(&ck).unwrap();
        assert!(back.frozen);
        assert_eq!(back.gen.config, cfg);
        assert_eq!(back.checksum(), bb.checksum());
        let mut rng = Rng::seeded(19);
        let z = sample_latent::<f32>(&mut rng, 1);
        assert_eq!(bb.gen.generate(&z).unwrap().data(), back.gen.generate(&z).unwrap().data());
    }

    #[test]
    fn checkpoint_geometry_is_inferred_not_assumed() {
        let cfg = tiny();
        let bb = Backbone::<f32>::new(20, &cfg).unwrap();
        let mut ck = checkpoint::Checkpoint::default();
        for role in bb.to_roles() {
            ck.push_role(role);
        }
        let back = Backbone::from_checkpoint(&ck).unwrap();
        assert_eq!(back.gen.config, cfg);
        assert_eq!(back.critic.config, cfg);
        assert!(!back.frozen);
    }

    #[test]
    fn from_checkpoint_requires_both_roles() {
        let cfg = tiny();
        let bb = Backbone::<f32>::new(22, &cfg).unwrap();
        let mut ck = checkpoint::Checkpoint::default();
        ck.push_role(bb.gen.to_role(false));
        assert!(Backbone::from_checkpoint(&ck).is_err());
    }
}
