//! Time-conditioned latent trajectory network ("plugin").
//!
//! Maps a noise vector plus a timeline of scalar time codes to one 512-d
//! latent per frame, every latent lying on the unit hypersphere (the image
//! generator's prior support). The time scalar is re-injected by
//! concatenation at every layer, so each hidden width is one short of a
//! round power of two:
//!
//! ```text
//! [z 2047 | t]  -> 2048 -> linear 1535 + relu -> [.|t] 1536
//!               -> linear 1023 + relu -> [.|t] 1024
//!               -> linear  511 + relu -> [.|t]  512
//!               -> linear  512 (no activation) -> row L2-normalize
//! ```
//!
//! All frames share one noise draw by default (the trajectory is a
//! deterministic curve of `t` for a fixed `z`); per-frame noise is
//! supported by passing an `(n, 2047)` noise matrix.

use crate::params::{he_normal, xavier_normal, ParamSet};
use crate::rng::{stream, Rng};
use crate::tape::{Tape, TensorRef};
use crate::tensor::{Elem, Tensor};
use crate::{checkpoint, Error, Result};

pub use crate::backbone::LATENT_DIM;

/// Noise input width. One less than 2048 so that appending the time scalar
/// fills the first layer exactly.
pub const NOISE_DIM: usize = 2047;
/// Spacing of the canonical training time grid.
pub const TIME_STEP: f64 = 1.0 / 8.0;

/// (input width, output width) of the four linear layers.
pub const LAYER_WIDTHS: [(usize, usize); 4] = [(2048, 1535), (1536, 1023), (1024, 511), (512, 512)];

/// Checkpoint role name for plugin weights.
pub const ROLE: &str = "plugin";

/// Strictly increasing sequence of time codes.
#[derive(Clone, Debug, PartialEq)]
pub struct Timeline(Vec<f64>);

impl Timeline {
    pub fn new(ts: Vec<f64>) -> Result<Self> {
        if ts.is_empty() {
            return Err(Error::Contract("timeline must contain at least one time code".into()));
        }
        if ts.iter().any(|t| !t.is_finite()) {
            return Err(Error::Contract("timeline contains a non-finite time code".into()));
        }
        if ts.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Contract(format!("timeline must be strictly increasing, got {ts:?}")));
        }
        Ok(Timeline(ts))
    }

    /// Canonical grid `0, 1/8, 2/8, ...` of length `n` (frame `i` sits at
    /// `i/8` regardless of `n`).
    pub fn grid(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Contract("timeline grid length must be positive".into()));
        }
        Ok(Timeline((0..n).map(|i| i as f64 * TIME_STEP).collect()))
    }

    /// Append `extra` codes continuing the trailing spacing (1/8 for a
    /// single-point timeline), for sampling beyond the training window.
    pub fn extended(&self, extra: usize) -> Timeline {
        let mut ts = self.0.clone();
        let step = if ts.len() >= 2 { ts[ts.len() - 1] - ts[ts.len() - 2] } else { TIME_STEP };
        let mut last = *ts.last().expect("timeline is never empty");
        for _ in 0..extra {
            last += step;
            ts.push(last);
        }
        Timeline(ts)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Draw a shared noise vector `(1, NOISE_DIM)` of standard normals.
pub fn sample_noise<F: Elem>(rng: &mut Rng) -> Tensor<F> {
    Tensor::randn_with(&[1, NOISE_DIM], rng).expect("static shape is valid")
}

#[derive(Clone, Debug)]
pub struct PluginNet<F: Elem = f32> {
    pub params: ParamSet<F>,
    layers: [(usize, usize); 4], // (weight, bias) indices into params
}

/// Init std of each layer's time row (the weight row multiplying the
/// appended time code). Fan-in scaled init would give the one
/// conditioning column ~1/fan_in of the input variance and the net
/// would be born effectively time-blind: near-motionless videos. That
/// start is a trap rather than a warm-up, because a discriminator
/// facing motionless fakes learns that frame-to-frame change itself
/// marks a clip as real, and its gradient then rewards any change,
/// shuffled or not, instead of plausible dynamics. Unit std overshoots
/// the other way: the latent steps so far per frame that clips flicker
/// like shuffled video and appearance drifts across the clip. The
/// value is calibrated on the synthetic data so a fresh network's
/// frame-to-frame feature change lands on the scale of the data's own,
/// between the two failure modes.
pub const TIME_ROW_STD: f64 = 0.7;

impl<F: Elem> PluginNet<F> {
    /// Fresh network: He-normal init on the relu layers, Xavier on the
    /// final linear feeding the normalization, and the time row of every
    /// layer re-drawn at [`TIME_ROW_STD`].
    pub fn new(seed: u64) -> Self {
        let mut rng = Rng::stream(seed, stream::PLUGIN_INIT);
        let mut params = ParamSet::new();
        let mut layers = [(0, 0); 4];
        for (i, &(fan_in, fan_out)) in LAYER_WIDTHS.iter().enumerate() {
            let mut w = if i + 1 < LAYER_WIDTHS.len() {
                he_normal(&[fan_in, fan_out], fan_in, &mut rng)
            } else {
                xavier_normal(&[fan_in, fan_out], fan_in, fan_out, &mut rng)
            }
            .expect("static shapes are valid");
            for v in &mut w.data_mut()[(fan_in - 1) * fan_out..] {
                *v = F::c(rng.normal() * TIME_ROW_STD);
            }
            let wi = params.push(format!("l{}.w", i + 1), w);
            let bi = params.push(format!("l{}.b", i + 1), Tensor::zeros(&[fan_out]).expect("static"));
            layers[i] = (wi, bi);
        }
        PluginNet { params, layers }
    }

    /// Total trainable scalars (5,503,997 for the pinned widths).
    pub fn param_count(&self) -> usize {
        self.params.total_elems()
    }

    /// Per-frame latents for a timeline: output is `(timeline.len(),
    /// LATENT_DIM)` with unit-norm rows. `noise` must be `(1, NOISE_DIM)`
    /// (shared across frames) or `(n, NOISE_DIM)` (per-frame).
    pub fn forward(
        &self,
        tape: &mut Tape<F>,
        binds: &[TensorRef],
        timeline: &Timeline,
        noise: TensorRef,
    ) -> Result<TensorRef> {
        let n = timeline.len();
        let nshape = tape.shape(noise)?.to_vec();
        if nshape.len() != 2 || nshape[1] != NOISE_DIM || (nshape[0] != 1 && nshape[0] != n) {
            return Err(Error::Shape(format!(
                "plugin noise must be (1, {NOISE_DIM}) or ({n}, {NOISE_DIM}), got {nshape:?}"
            )));
        }
        let z = if nshape[0] == n { noise } else { tape.broadcast_axis(noise, 0, n)? };
        let tdata: Vec<F> = timeline.as_slice().iter().map(|&t| F::c(t)).collect();
        let tcol = tape.constant_from(&[n, 1], tdata)?;
        self.forward_rows(tape, binds, z, tcol)
    }

    /// Layer stack over explicit rows: `noise` is `(m, NOISE_DIM)` and
    /// `tcol` is `(m, 1)` time codes. Rows are independent, so a caller
    /// may pack several videos' frames into one call.
    pub fn forward_rows(
        &self,
        tape: &mut Tape<F>,
        binds: &[TensorRef],
        noise: TensorRef,
        tcol: TensorRef,
    ) -> Result<TensorRef> {
        let nshape = tape.shape(noise)?.to_vec();
        if nshape.len() != 2 || nshape[1] != NOISE_DIM {
            return Err(Error::Shape(format!("plugin noise rows must be (m, {NOISE_DIM}), got {nshape:?}")));
        }
        let tshape = tape.shape(tcol)?;
        if tshape != [nshape[0], 1] {
            return Err(Error::Shape(format!(
                "plugin time column must be ({}, 1), got {tshape:?}",
                nshape[0]
            )));
        }
        let mut h = tape.concat_cols(noise, tcol)?;
        for (i, &(wi, bi)) in self.layers.iter().enumerate() {
            let a = tape.matmul(h, binds[wi])?;
            let pre = tape.add_bias_row(a, binds[bi])?;
            if i + 1 < self.layers.len() {
                let act = tape.relu(pre)?;
                h = tape.concat_cols(act, tcol)?;
            } else {
                h = pre;
            }
        }
        tape.l2_normalize_rows(h)
    }

    /// Inference convenience: run the net detached on a scratch tape.
    pub fn trajectory(&self, timeline: &Timeline, noise: &Tensor<F>) -> Result<Tensor<F>> {
        let mut tape = Tape::new();
        let binds = self.params.bind_frozen(&mut tape);
        let nref = tape.constant(noise);
        let out = self.forward(&mut tape, &binds, timeline, nref)?;
        tape.tensor(out)
    }

    pub fn cast<G: Elem>(&self) -> PluginNet<G> {
        PluginNet { params: self.params.cast::<G>(), layers: self.layers }
    }

    pub fn to_role(&self) -> checkpoint::Role
    where
        F: Elem,
    {
        checkpoint::Role::from_params(ROLE, false, &self.params.cast::<f32>())
    }
}

impl PluginNet<f32> {
    /// Rebuild from a checkpoint role, validating the layer stack.
    pub fn from_role(role: &checkpoint::Role) -> Result<Self> {
        let params = role.to_params();
        let mut layers = [(0, 0); 4];
        for (i, &(fan_in, fan_out)) in LAYER_WIDTHS.iter().enumerate() {
            let wname = format!("l{}.w", i + 1);
            let bname = format!("l{}.b", i + 1);
            let wi = params
                .iter()
                .position(|p| p.name == wname)
                .ok_or_else(|| Error::Format(format!("plugin role missing tensor '{wname}'")))?;
            let bi = params
                .iter()
                .position(|p| p.name == bname)
                .ok_or_else(|| Error::Format(format!("plugin role missing tensor '{bname}'")))?;
            if params.get(wi).tensor.shape() != [fan_in, fan_out] {
                return Err(Error::Format(format!(
                    "plugin tensor '{wname}' has shape {:?}, expected [{fan_in}, {fan_out}]",
                    params.get(wi).tensor.shape()
                )));
            }
            if params.get(bi).tensor.shape() != [fan_out] {
                return Err(Error::Format(format!(
                    "plugin tensor '{bname}' has shape {:?}, expected [{fan_out}]",
                    params.get(bi).tensor.shape()
                )));
            }
            layers[i] = (wi, bi);
        }
        let mut net = PluginNet { params, layers };
        net.params.set_trainable(true);
        Ok(net)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parameter_count_is_exact() {
        let net = PluginNet::<f32>::new(1);
        assert_eq!(net.param_count(), 5_503_997);
    }

    #[test]
    fn trajectory_rows_live_on_the_unit_sphere() {
        let net = PluginNet::<f32>::new(2);
        let mut rng = Rng::seeded(3);
        let z = sample_noise::<f32>(&mut rng);
        let tl = Timeline::grid(8).unwrap();
        let traj = net.trajectory(&tl, &z).unwrap();
        assert_eq!(traj.shape(), &[8, LATENT_DIM]);
        for i in 0..8 {
            let row = &traj.data()[i * LATENT_DIM..(i + 1) * LATENT_DIM];
            let norm: f32 = row.iter().map(|x| x * x).sum::<f32>().sqrt();
            assert!((norm - 1.0).abs() < 1e-5, "frame {i} norm {norm}");
        }
    }

    #[test]
    fn time_codes_actually_steer_the_trajectory() {
        let net = PluginNet::<f32>::new(4);
        let mut rng = Rng::seeded(5);
        let z = sample_noise::<f32>(&mut rng);
        let traj = net.trajectory(&Timeline::grid(4).unwrap(), &z).unwrap();
        for i in 1..4 {
            let a = &traj.data()[0..LATENT_DIM];
            let b = &traj.data()[i * LATENT_DIM..(i + 1) * LATENT_DIM];
            assert!(a != b, "frames 0 and {i} are identical");
        }
    }

    #[test]
    fn same_seed_same_trajectory() {
        let mut r1 = Rng::seeded(7);
        let mut r2 = Rng::seeded(7);
        let net = PluginNet::<f32>::new(6);
        let tl = Timeline::grid(8).unwrap();
        let a = net.trajectory(&tl, &sample_noise::<f32>(&mut r1)).unwrap();
        let b = net.trajectory(&tl, &sample_noise::<f32>(&mut r2)).unwrap();
        assert_eq!(a.data(), b.data());
    }

    #[test]
    fn timeline_validation() {
        assert!(Timeline::new(vec![]).is_err());
        assert!(Timeline::new(vec![0.0, 0.0]).is_err());
        assert!(Timeline::new(vec![0.5, 0.25]).is_err());
        assert!(Timeline::new(vec![0.0, f64::NAN]).is_err());
        assert!(Timeline::new(vec![-1.0, 4.0]).is_ok());
        assert!(Timeline::grid(0).is_err());
    }

    #[test]
    fn grid_spacing_is_an_eighth() {
        let tl = Timeline::grid(8).unwrap();
        for (i, &t) in tl.as_slice().iter().enumerate() {
            assert_eq!(t, i as f64 / 8.0);
        }
    }

    #[test]
    fn extended_timeline_continues_spacing() {
        let tl = Timeline::grid(8).unwrap().extended(4);
        assert_eq!(tl.len(), 12);
        assert_eq!(tl.as_slice()[11], 11.0 / 8.0);
        assert!(Timeline::new(tl.as_slice().to_vec()).is_ok());
    }

    #[test]
    fn per_frame_noise_accepted_and_mismatch_rejected() {
        let net = PluginNet::<f32>::new(8);
        let tl = Timeline::grid(4).unwrap();
        let per_frame = Tensor::<f32>::randn(&[4, NOISE_DIM], 9).unwrap();
        assert!(net.trajectory(&tl, &per_frame).is_ok());
        let wrong = Tensor::<f32>::randn(&[3, NOISE_DIM], 9).unwrap();
        assert!(net.trajectory(&tl, &wrong).is_err());
        let wrong_dim = Tensor::<f32>::randn(&[1, NOISE_DIM - 1], 9).unwrap();
        assert!(net.trajectory(&tl, &wrong_dim).is_err());
    }

    #[test]
    fn checkpoint_role_roundtrip() {
        let net = PluginNet::<f32>::new(10);
        let role = net.to_role();
        let back = PluginNet::from_role(&role).unwrap();
        assert_eq!(net.params.checksum(), back.params.checksum());
        let mut rng = Rng::seeded(11);
        let z = sample_noise::<f32>(&mut rng);
        let tl = Timeline::grid(3).unwrap();
        assert_eq!(net.trajectory(&tl, &z).unwrap().data(), back.trajectory(&tl, &z).unwrap().data());
    }

    #[test]
    fn from_role_rejects_wrong_shapes() {
        let net = PluginNet::<f32>::new(12);
        let mut role = net.to_role();
        role.tensors[0].1 = Tensor::zeros(&[8, 8]).unwrap();
        assert!(PluginNet::from_role(&role).is_err());
    }
}
