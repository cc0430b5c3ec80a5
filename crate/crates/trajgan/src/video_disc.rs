//! Feature-space video discriminator.
//!
//! Operates on "feature videos": a clip's per-frame 512-d embeddings from
//! the frozen image critic, stacked into a single-channel image of shape
//! `(batch, 1, n_frames, 512)` whose rows are time. Four small strided
//! convolutions mix adjacent frames along the time axis while compressing
//! the feature axis, then a linear head and sigmoid produce the
//! probability that the clip is a real video:
//!
//! ```text
//! (1, 8, 512) -conv 16x(3,10)/(1,2)-> (16, 6, 252)
//!             -conv  8x(3,8)/(1,2)-> ( 8, 4, 123)
//!             -conv  4x(3,6)/(1,2)-> ( 4, 2,  59)
//!             -conv  1x(2,6)/(1,2)-> ( 1, 1,  27)
//!             -flatten-> 27 -linear-> 1 -sigmoid-> p
//! ```
//!
//! Each conv is followed by ReLU. The linear head pins the temporal extent
//! to [`CLIP_FRAMES`] frames; [`shape_chain`] reports, for any candidate
//! geometry, either the full chain of intermediate shapes or the first
//! layer at which it breaks.

use crate::params::{he_normal, xavier_normal, ParamSet};
use crate::rng::{stream, Rng};
use crate::tape::{Tape, TensorRef};
use crate::tensor::{Elem, Tensor};
use crate::{checkpoint, Error, Result};

pub use crate::backbone::FEATURE_DIM;

/// Temporal extent the architecture is built for.
pub const CLIP_FRAMES: usize = 8;
/// Flattened width entering the linear head.
pub const HEAD_IN: usize = 27;

/// Checkpoint role name for video discriminator weights.
pub const ROLE: &str = "video-disc";

/// One conv layer: (cin, cout, (kh, kw), (sh, sw)).
pub type ConvSpec = (usize, usize, (usize, usize), (usize, usize));

pub const LAYERS: [ConvSpec; 4] = [
    (1, 16, (3, 10), (1, 2)),
    (16, 8, (3, 8), (1, 2)),
    (8, 4, (3, 6), (1, 2)),
    (4, 1, (2, 6), (1, 2)),
];

/// Initial value of every conv bias. A conv layer whose pre-activations
/// go non-positive over the whole input distribution emits a constant
/// zero, which stops its own learning and cuts gradient to everything
/// below it; with layers in series one such event freezes the entire
/// game (observed: d_loss pinned at 2 ln 2 for the rest of training).
/// A positive floor keeps channels away from that edge. The He kernel
/// scale itself is left alone: critic features are unbounded, the
/// initial score starts deep in sigmoid's tails, and the first dozens
/// of steps burn the stack's scale down to recover — which doubles as
/// a warm-up window for the plugin before the discriminator's gradient
/// starts to bite. Damping the kernels to skip that window makes the
/// discriminator engage at step one and reliably drives the plugin
/// into a no-motion trap.
pub const CONV_BIAS_FLOOR: f64 = 0.1;

/// Outcome of pushing a `(1, n_frames, feat_dim)` geometry through the
/// conv stack on paper.
#[derive(Clone, Debug, PartialEq)]
pub struct ShapeChain {
    pub input: (usize, usize, usize),
    /// `(c, h, w)` after each layer that fit.
    pub steps: Vec<(usize, usize, usize)>,
    /// Flattened width after the last conv, if all four fit.
    pub flat: Option<usize>,
    /// True iff all layers fit and `flat == HEAD_IN`.
    pub compatible: bool,
    /// Why the geometry is incompatible, when it is.
    pub problem: Option<String>,
}

impl std::fmt::Display for ShapeChain {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}, {}, {})", self.input.0, self.input.1, self.input.2)?;
        for &(c, h, w) in &self.steps {
            write!(f, " -> ({c}, {h}, {w})")?;
        }
        if let Some(flat) = self.flat {
            write!(f, " -> flat {flat}")?;
        }
        match &self.problem {
            None => write!(f, " [ok]"),
            Some(p) => write!(f, " [incompatible: {p}]"),
        }
    }
}

/// Walk the conv stack symbolically for a clip of `n_frames` frames of
/// `feat_dim`-wide features.
pub fn shape_chain(n_frames: usize, feat_dim: usize) -> ShapeChain {
    let input = (1usize, n_frames, feat_dim);
    let (mut c, mut h, mut w) = input;
    let mut steps = Vec::new();
    for (i, &(cin, cout, (kh, kw), (sh, sw))) in LAYERS.iter().enumerate() {
        debug_assert_eq!(c, cin);
        if kh > h || kw > w {
            return ShapeChain {
                input,
                steps,
                flat: None,
                compatible: false,
                problem: Some(format!(
                    "layer {}: kernel ({kh}, {kw}) exceeds its input ({h}, {w})",
                    i + 1
                )),
            };
        }
        c = cout;
        h = (h - kh) / sh + 1;
        w = (w - kw) / sw + 1;
        steps.push((c, h, w));
    }
    let flat = c * h * w;
    let compatible = flat == HEAD_IN;
    let problem = if compatible {
        None
    } else {
        Some(format!("flattened width {flat} does not match the {HEAD_IN}-wide linear head"))
    };
    ShapeChain { input, steps, flat: Some(flat), compatible, problem }
}

#[derive(Clone, Debug)]
pub struct VideoDiscriminator<F: Elem = f32> {
    pub params: ParamSet<F>,
    convs: [(usize, usize); 4], // (weight, bias) indices into params
    head: (usize, usize),
}

impl<F: Elem> VideoDiscriminator<F> {
    /// Fresh network: He-normal conv kernels (they feed ReLU), Xavier on
    /// the sigmoid head, conv biases at [`CONV_BIAS_FLOOR`].
    pub fn new(seed: u64) -> Self {
        let mut rng = Rng::stream(seed, stream::VIDEO_DISC_INIT);
        let mut params = ParamSet::new();
        let mut convs = [(0, 0); 4];
        for (i, &(cin, cout, (kh, kw), _)) in LAYERS.iter().enumerate() {
            let fan_in = cin * kh * kw;
            let w = he_normal(&[cout, cin, kh, kw], fan_in, &mut rng).expect("static shapes are valid");
            let wi = params.push(format!("conv{}.w", i + 1), w);
            let b = Tensor::full(&[cout], F::c(CONV_BIAS_FLOOR)).expect("static");
            let bi = params.push(format!("conv{}.b", i + 1), b);
            convs[i] = (wi, bi);
        }
        let hw = xavier_normal(&[HEAD_IN, 1], HEAD_IN, 1, &mut rng).expect("static shapes are valid");
        let hwi = params.push("head.w", hw);
        let hbi = params.push("head.b", Tensor::zeros(&[1]).expect("static"));
        VideoDiscriminator { params, convs, head: (hwi, hbi) }
    }

    /// Total trainable scalars (4,233 for the pinned geometry).
    pub fn param_count(&self) -> usize {
        self.params.total_elems()
    }

    /// Probability that each feature video in the batch is real:
    /// `(b, 1, CLIP_FRAMES, FEATURE_DIM)` -> `(b, 1)`, entries in (0, 1).
    pub fn forward(&self, tape: &mut Tape<F>, binds: &[TensorRef], fv: TensorRef) -> Result<TensorRef> {
        Ok(self.forward_probed(tape, binds, fv)?.0)
    }

    /// Pre-sigmoid scores `(b, 1)`. Training consumes these through the
    /// numerically exact `bce_logits` so saturated scores still carry
    /// gradient; [`forward`](Self::forward) is their sigmoid.
    pub fn forward_logits(&self, tape: &mut Tape<F>, binds: &[TensorRef], fv: TensorRef) -> Result<TensorRef> {
        Ok(self.logits_probed(tape, binds, fv)?.0)
    }

    /// As [`forward`](Self::forward), additionally returning each conv
    /// layer's post-ReLU activation so tests can compare the runtime
    /// shapes against [`shape_chain`].
    pub fn forward_probed(
        &self,
        tape: &mut Tape<F>,
        binds: &[TensorRef],
        fv: TensorRef,
    ) -> Result<(TensorRef, Vec<TensorRef>)> {
        let (logits, taps) = self.logits_probed(tape, binds, fv)?;
        Ok((tape.sigmoid(logits)?, taps))
    }

    fn logits_probed(
        &self,
        tape: &mut Tape<F>,
        binds: &[TensorRef],
        fv: TensorRef,
    ) -> Result<(TensorRef, Vec<TensorRef>)> {
        let shape = tape.shape(fv)?.to_vec();
        let expected = [1, CLIP_FRAMES, FEATURE_DIM];
        if shape.len() != 4 || shape[1..] != expected {
            return Err(Error::Shape(format!(
                "feature video must be (b, 1, {CLIP_FRAMES}, {FEATURE_DIM}), got {shape:?}"
            )));
        }
        let batch = shape[0];
        let mut h = fv;
        let mut taps = Vec::with_capacity(LAYERS.len());
        for (i, &(_, _, _, stride)) in LAYERS.iter().enumerate() {
            let (wi, bi) = self.convs[i];
            let y = tape.conv2d(h, binds[wi], stride)?;
            let y = tape.add_bias_chan(y, binds[bi])?;
            h = tape.relu(y)?;
            taps.push(h);
        }
        let flat = tape.reshape(h, &[batch, HEAD_IN])?;
        let logits = tape.matmul(flat, binds[self.head.0])?;
        let logits = tape.add_bias_row(logits, binds[self.head.1])?;
        Ok((logits, taps))
    }

    /// Inference convenience: probabilities for a detached feature video.
    pub fn score(&self, fv: &Tensor<F>) -> Result<Tensor<F>> {
        let mut tape = Tape::new();
        let binds = self.params.bind_frozen(&mut tape);
        let x = tape.constant(fv);
        let p = self.forward(&mut tape, &binds, x)?;
        tape.tensor(p)
    }

    pub fn cast<G: Elem>(&self) -> VideoDiscriminator<G> {
        VideoDiscriminator { params: self.params.cast::<G>(), convs: self.convs, head: self.head }
    }

    pub fn to_role(&self) -> checkpoint::Role {
        checkpoint::Role::from_params(ROLE, false, &self.params.cast::<f32>())
    }
}

impl VideoDiscriminator<f32> {
    /// Rebuild from a checkpoint role, validating every tensor shape.
    pub fn from_role(role: &checkpoint::Role) -> Result<Self> {
        let params = role.to_params();
        let find = |name: &str| -> Result<usize> {
            params
                .iter()
                .position(|p| p.name == name)
                .ok_or_else(|| Error::Format(format!("video-disc role missing tensor '{name}'")))
        };
        let check = |i: usize, name: &str, shape: &[usize]| -> Result<()> {
            if params.get(i).tensor.shape() != shape {
                return Err(Error::Format(format!(
                    "video-disc tensor '{name}' has shape {:?}, expected {shape:?}",
                    params.get(i).tensor.shape()
                )));
            }
            Ok(())
        };
        let mut convs = [(0, 0); 4];
        for (i, &(cin, cout, (kh, kw), _)) in LAYERS.iter().enumerate() {
            let wname = format!("conv{}.w", i + 1);
            let bname = format!("conv{}.b", i + 1);
            let wi = find(&wname)?;
            let bi = find(&bname)?;
            check(wi, &wname, &[cout, cin, kh, kw])?;
            check(bi, &bname, &[cout])?;
            convs[i] = (wi, bi);
        }
        let hwi = find("head.w")?;
        let hbi = find("head.b")?;
        check(hwi, "head.w", &[HEAD_IN, 1])?;
        check(hbi, "head.b", &[1])?;
        let mut net = VideoDiscriminator { params, convs, head: (hwi, hbi) };
        net.params.set_trainable(true);
        Ok(net)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parameter_count_is_exact() {
        let net = VideoDiscriminator::<f32>::new(1);
        assert_eq!(net.param_count(), 4_233);
    }

    #[test]
    fn shape_chain_matches_hand_computation() {
        let chain = shape_chain(CLIP_FRAMES, FEATURE_DIM);
        assert!(chain.compatible, "{chain}");
        assert_eq!(chain.steps, vec![(16, 6, 252), (8, 4, 123), (4, 2, 59), (1, 1, 27)]);
        assert_eq!(chain.flat, Some(27));
        assert!(chain.problem.is_none());
    }

    #[test]
    fn shape_chain_explains_incompatible_geometries() {
        // Too few frames: the second conv's height-3 kernel no longer fits.
        let short = shape_chain(4, FEATURE_DIM);
        assert!(!short.compatible);
        assert!(short.problem.as_deref().unwrap().contains("layer 2"), "{short}");

        // More frames: every conv fits but the flat width is wrong.
        let long = shape_chain(16, FEATURE_DIM);
        assert!(!long.compatible);
        assert_eq!(long.flat, Some(243));
        assert!(long.problem.as_deref().unwrap().contains("243"), "{long}");

        // Narrower features: same story along the width axis.
        let narrow = shape_chain(CLIP_FRAMES, 256);
        assert!(!narrow.compatible);
        assert_eq!(narrow.flat, Some(11));
    }

    #[test]
    fn runtime_shapes_match_the_symbolic_chain() {
        let net = VideoDiscriminator::<f32>::new(2);
        let mut tape = Tape::new();
        let binds = net.params.bind_frozen(&mut tape);
        let fv = Tensor::<f32>::randn(&[2, 1, CLIP_FRAMES, FEATURE_DIM], 3).unwrap();
        let x = tape.constant(&fv);
        let (p, taps) = net.forward_probed(&mut tape, &binds, x).unwrap();
        let chain = shape_chain(CLIP_FRAMES, FEATURE_DIM);
        for (tap, &(c, h, w)) in taps.iter().zip(&chain.steps) {
            assert_eq!(tape.shape(*tap).unwrap(), &[2, c, h, w]);
        }
        assert_eq!(tape.shape(p).unwrap(), &[2, 1]);
    }

    #[test]
    fn output_is_a_probability() {
        let net = VideoDiscriminator::<f32>::new(4);
        let fv = Tensor::<f32>::randn(&[3, 1, CLIP_FRAMES, FEATURE_DIM], 5).unwrap();
        let p = net.score(&fv).unwrap();
        assert_eq!(p.shape(), &[3, 1]);
        for &v in p.data() {
            assert!(v > 0.0 && v < 1.0, "score {v} is not in (0, 1)");
        }
    }

    #[test]
    fn rejects_wrong_geometry() {
        let net = VideoDiscriminator::<f32>::new(6);
        for shape in [
            vec![1, 1, 4, FEATURE_DIM],
            vec![1, 1, CLIP_FRAMES, 256],
            vec![1, 2, CLIP_FRAMES, FEATURE_DIM],
            vec![CLIP_FRAMES, FEATURE_DIM],
        ] {
            let fv = Tensor::<f32>::randn(&shape, 7).unwrap();
            assert!(net.score(&fv).is_err(), "accepted {shape:?}");
        }
    }

    #[test]
    fn same_seed_same_scores() {
        let a = VideoDiscriminator::<f32>::new(8);
        let b = VideoDiscriminator::<f32>::new(8);
        let fv = Tensor::<f32>::randn(&[1, 1, CLIP_FRAMES, FEATURE_DIM], 9).unwrap();
        assert_eq!(a.score(&fv).unwrap().data(), b.score(&fv).unwrap().data());
        assert_eq!(a.params.checksum(), b.params.checksum());
    }

    #[test]
    fn checkpoint_role_roundtrip() {
        let net = VideoDiscriminator::<f32>::new(10);
        let back = VideoDiscriminator::from_role(&net.to_role()).unwrap();
        assert_eq!(net.params.checksum(), back.params.checksum());
        let fv = Tensor::<f32>::randn(&[1, 1, CLIP_FRAMES, FEATURE_DIM], 11).unwrap();
        assert_eq!(net.score(&fv).unwrap().data(), back.score(&fv).unwrap().data());
    }

    #[test]
    fn from_role_rejects_missing_or_misshapen_tensors() {
        let net = VideoDiscriminator::<f32>::new(12);
        let mut role = net.to_role();
        role.tensors[0].1 = Tensor::zeros(&[2, 2]).unwrap();
        assert!(VideoDiscriminator::from_role(&role).is_err());
        let mut role2 = net.to_role();
        role2.tensors.retain(|(n, _)| n != "head.w");
        assert!(VideoDiscriminator::from_role(&role2).is_err());
    }
}
