//! Stage-1 training: Wasserstein GAN with gradient penalty on single
//! frames.
//!
//! Critic loss: `mean D(fake) - mean D(real) + w * mean (||grad_xhat
//! D(xhat)|| - 1)^2` with `xhat` a per-sample random mix of a real and a
//! generated frame. The penalty's gradient reaches the critic weights
//! through the gradient itself, which the tape supports by emitting
//! backward passes as ordinary taped ops. Generator loss: `-mean D(fake)`.
//! Both networks take one Adam step per iteration.

use super::{sample_latent, Backbone};
use crate::adam::{adam_step, AdamParams, AdamState};
use crate::rng::{stream, Rng};
use crate::tape::Tape;
use crate::tensor::{Elem, Tensor};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BackboneTrainConfig {
    pub steps: usize,
    pub batch: usize,
    pub gp_weight: f64,
    pub adam: AdamParams,
    /// Emit a log row every this many steps (and always on the last). 0
    /// logs only the last step.
    pub log_every: usize,
}

impl Default for BackboneTrainConfig {
    fn default() -> Self {
        BackboneTrainConfig { steps: 2000, batch: 8, gp_weight: 10.0, adam: AdamParams::default(), log_every: 25 }
    }
}

impl BackboneTrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 || self.batch == 0 {
            return Err(Error::Config("backbone training needs positive steps and batch".into()));
        }
        if !(self.gp_weight >= 0.0 && self.gp_weight.is_finite()) {
            return Err(Error::Config(format!("gradient penalty weight {} is invalid", self.gp_weight)));
        }
        self.adam.validate()
    }
}

#[derive(Clone, Copy, Debug)]
pub struct BackboneStepLog {
    pub step: usize,
    pub d_loss: f64,
    pub g_loss: f64,
    pub gp: f64,
    pub d_real: f64,
    pub d_fake: f64,
}

#[derive(Clone, Debug)]
pub struct BackboneTrainStats {
    pub steps: usize,
    pub logs: Vec<BackboneStepLog>,
}

impl BackboneTrainStats {
    pub fn last(&self) -> &BackboneStepLog {
        self.logs.last().expect("training always logs the final step")
    }
}

/// Train the backbone in place. `sample_real` must return a
/// `(batch, image_channels, resolution, resolution)` tensor of frames in
/// `[-1, 1]`; all randomness (including the sampler's) is drawn from one
/// seeded stream so a rerun is bit-identical.
pub fn train_backbone<F, S>(
    bb: &mut Backbone<F>,
    mut sample_real: S,
    cfg: &BackboneTrainConfig,
    seed: u64,
    mut on_log: impl FnMut(&BackboneStepLog),
) -> Result<BackboneTrainStats>
where
    F: Elem,
    S: FnMut(&mut Rng, usize) -> Result<Tensor<F>>,
{
    cfg.validate()?;
    if bb.frozen {
        return Err(Error::Contract("cannot train a frozen backbone".into()));
    }
    let mut rng = Rng::stream(seed, stream::BACKBONE_TRAIN);
    let mut d_state = AdamState::new(&bb.critic.params, cfg.adam)?;
    let mut g_state = AdamState::new(&bb.gen.params, cfg.adam)?;
    let (img, res) = (bb.gen.config.image_channels, bb.gen.config.resolution);
    let chw = img * res * res;
    let frame_shape = [cfg.batch, img, res, res];
    let mut logs = Vec::new();

    for step in 1..=cfg.steps {
        let real = sample_real(&mut rng, cfg.batch)?;
        if real.shape() != frame_shape {
            return Err(Error::Contract(format!(
                "real-frame sampler returned {:?}, expected {frame_shape:?}",
                real.shape()
            )));
        }

        // Critic update. The generator only provides detached frames here.
        let z = sample_latent::<F>(&mut rng, cfg.batch);
        let fake = bb.gen.generate(&z)?;
        let mut mix = vec![F::zero(); real.numel()];
        for b in 0..cfg.batch {
            let e = F::c(rng.uniform(0.0, 1.0));
            let oe = F::one() - e;
            for j in 0..chw {
                let i = b * chw + j;
                mix[i] = e * real.data()[i] + oe * fake.data()[i];
            }
        }
        let xhat = Tensor::new(&frame_shape, mix)?;

        let mut tape = Tape::new();
        let cb = bb.critic.params.bind(&mut tape);
        let real_ref = tape.constant(&real);
        let fake_ref = tape.constant(&fake);
        let xhat_ref = tape.leaf(&xhat);
        let d_real = bb.critic.score(&mut tape, &cb, real_ref)?;
        let d_fake = bb.critic.score(&mut tape, &cb, fake_ref)?;
        let d_hat = bb.critic.score(&mut tape, &cb, xhat_ref)?;

        let d_hat_sum = tape.sum_all(d_hat)?;
        let grad_xhat = tape.grad_graph(d_hat_sum, &[xhat_ref])?[0];
        let gflat = tape.reshape(grad_xhat, &[cfg.batch, chw])?;
        let g2 = tape.mul(gflat, gflat)?;
        let ss = tape.sum_axis(g2, 1)?;
        let ss = tape.add_scalar(ss, 1e-12)?;
        let norm = tape.sqrt(ss)?;
        let dev = tape.add_scalar(norm, -1.0)?;
        let dev2 = tape.mul(dev, dev)?;
        let gp = tape.mean_all(dev2)?;

        let mr = tape.mean_all(d_real)?;
        let mf = tape.mean_all(d_fake)?;
        let neg_mr = tape.neg(mr)?;
        let wdist = tape.add(mf, neg_mr)?;
        let gp_term = tape.scale(gp, cfg.gp_weight)?;
        let d_loss = tape.add(wdist, gp_term)?;

        let d_loss_v = tape.tensor(d_loss)?.data()[0].to_f64();
        let gp_v = tape.tensor(gp)?.data()[0].to_f64();
        let mr_v = tape.tensor(mr)?.data()[0].to_f64();
        let mf_v = tape.tensor(mf)?.data()[0].to_f64();
        tape.backward(d_loss)?;
        let grads = bb.critic.params.grads(&tape, &cb)?;
        adam_step(&mut bb.critic.params, &grads, &mut d_state)?;

        // Generator update, critic held constant.
        let z = sample_latent::<F>(&mut rng, cfg.batch);
        let mut tape = Tape::new();
        let gbind = bb.gen.params.bind(&mut tape);
        let cfrozen = bb.critic.params.bind_frozen(&mut tape);
        let zr = tape.constant(&z);
        let fake = bb.gen.forward(&mut tape, &gbind, zr)?;
        let s = bb.critic.score(&mut tape, &cfrozen, fake)?;
        let ms = tape.mean_all(s)?;
        let g_loss = tape.neg(ms)?;
        let g_loss_v = tape.tensor(g_loss)?.data()[0].to_f64();
        tape.backward(g_loss)?;
        let ggrads = bb.gen.params.grads(&tape, &gbind)?;
        adam_step(&mut bb.gen.params, &ggrads, &mut g_state)?;

        let due = step == cfg.steps || (cfg.log_every > 0 && step % cfg.log_every == 0);
        if due {
            let row = BackboneStepLog { step, d_loss: d_loss_v, g_loss: g_loss_v, gp: gp_v, d_real: mr_v, d_fake: mf_v };
            on_log(&row);
            logs.push(row);
        }
    }
    Ok(BackboneTrainStats { steps: cfg.steps, logs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backbone::BackboneConfig;

    fn tiny() -> BackboneConfig {
        BackboneConfig { resolution: 8, base: 4, channels: vec![8, 4], image_channels: 1 }
    }

    /// Bright centered blob on a dark field, jittered per sample.
    fn blob_sampler(rng: &mut Rng, batch: usize) -> Result<Tensor<f32>> {
        let res = 8;
        let mut data = vec![-0.9f32; batch * res * res];
        for b in 0..batch {
            let cx = 3 + rng.below(2) as i64;
            let cy = 3 + rng.below(2) as i64;
            for y in 0..res as i64 {
                for x in 0..res as i64 {
                    if (x - cx).abs() <= 1 && (y - cy).abs() <= 1 {
                        data[b * res * res + (y * res as i64 + x) as usize] = 0.9;
                    }
                }
            }
        }
        Tensor::new(&[batch, 1, res, res], data)
    }

    #[test]
    fn a_few_steps_move_both_networks_and_stay_finite() {
        let mut bb = Backbone::<f32>::new(1, &tiny()).unwrap();
        let g0 = bb.gen.params.checksum();
        let c0 = bb.critic.params.checksum();
        let cfg = BackboneTrainConfig { steps: 6, batch: 4, ..Default::default() };
        let stats = train_backbone(&mut bb, blob_sampler, &cfg, 2, |_| {}).unwrap();
        assert_eq!(stats.steps, 6);
        assert!(!stats.logs.is_empty());
        for row in &stats.logs {
            assert!(row.d_loss.is_finite() && row.g_loss.is_finite() && row.gp.is_finite());
        }
        assert_ne!(bb.gen.params.checksum(), g0);
        assert_ne!(bb.critic.params.checksum(), c0);
    }

    #[test]
    fn reruns_are_bit_identical() {
        let cfg = BackboneTrainConfig { steps: 3, batch: 2, log_every: 1, ..Default::default() };
        let run = |seed| {
            let mut bb = Backbone::<f32>::new(5, &tiny()).unwrap();
            train_backbone(&mut bb, blob_sampler, &cfg, seed, |_| {}).unwrap();
            bb.checksum()
        };
        assert_eq!(run(7), run(7));
        assert_ne!(run(7), run(8));
    }

    #[test]
    fn frozen_backbone_is_rejected() {
        let mut bb = Backbone::<f32>::new(9, &tiny()).unwrap();
        bb.freeze();
        let cfg = BackboneTrainConfig { steps: 1, batch: 2, ..Default::default() };
        let err = train_backbone(&mut bb, blob_sampler, &cfg, 10, |_| {}).unwrap_err();
        assert!(matches!(err, Error::Contract(_)));
    }

    #[test]
    fn sampler_shape_is_enforced() {
        let mut bb = Backbone::<f32>::new(11, &tiny()).unwrap();
        let cfg = BackboneTrainConfig { steps: 1, batch: 2, ..Default::default() };
        let bad = |_: &mut Rng, batch: usize| Tensor::<f32>::randn(&[batch, 1, 4, 4], 1);
        assert!(train_backbone(&mut bb, bad, &cfg, 12, |_| {}).is_err());
    }

    #[test]
    fn config_validation() {
        let cfg = BackboneTrainConfig { steps: 0, ..Default::default() };
        assert!(cfg.validate().is_err());
        let cfg = BackboneTrainConfig { gp_weight: f64::NAN, ..Default::default() };
        assert!(cfg.validate().is_err());
    }
}
