//! Finite-difference verification of tape gradients.
//!
//! [`grad_check`] compares the tape's reverse-mode gradient of a scalar
//! function against a central-difference oracle. The oracle always
//! evaluates in f64, because pure-f32 differences with a usable step size
//! carry more noise than the tolerance being certified; the precision mode
//! selects the tape's element type and the tolerance. The difference step
//! pairs with the precision of the evaluation being differenced, so the
//! f64 oracle always steps by [`Precision::Double`]'s h: the coarse
//! 32-bit step exists to beat f32 evaluation noise, and on a function
//! with thousands of relu kinks it also straddles kinks that the tape
//! (correctly) one-sides.
//! In [`Precision::Single`] mode every input is first rounded to the
//! nearest f32-representable point, so the oracle differences exactly the
//! function the f32 tape differentiates; without that, the comparison
//! measures how sensitive the gradient is to rounding the inputs, which
//! for a deep composite dwarfs any honest tolerance.
//!
//! Reported error is the infinity-norm relative error: each |ad − fd| gap
//! is measured against the largest gradient magnitude in the probe, since
//! near-zero coordinates carry the same absolute evaluation noise as their
//! neighbours and dividing by their own magnitude certifies only the noise
//! floor.
//!
//! The function under test returns an arbitrary-shaped output; the harness
//! contracts it to a scalar with a fixed random cotangent (`sum(out * w)`),
//! so every output coordinate influences the loss with a distinct weight.
//!
//! [`op_suite`] runs the check over every tape operation at randomized
//! small shapes, ≥10 instances each; inputs are resampled away from
//! non-differentiable points (relu/clamp kinks) so the oracle is valid.

use crate::rng::Rng;
use crate::tape::{Tape, TensorRef};
use crate::tensor::{Elem, Tensor};
use crate::Result;

/// Tape precision for the gradient side of the check.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Precision {
    /// f32 tape, finite-difference step 1e-3.
    Single,
    /// f64 tape, finite-difference step 1e-6.
    Double,
}

impl Precision {
    /// Central-difference step appropriate for a function *evaluated* at
    /// this precision (roughly cube-root of the machine epsilon). The
    /// oracle here always evaluates in f64, so checks at either mode
    /// difference with the [`Precision::Double`] step; see module docs.
    pub fn step(self) -> f64 {
        match self {
            Precision::Single => 1e-3,
            Precision::Double => 1e-6,
        }
    }

    /// The acceptance tolerance conventionally paired with the mode.
    pub fn tolerance(self) -> f64 {
        match self {
            Precision::Single => 1e-4,
            Precision::Double => 1e-6,
        }
    }
}

/// A scalar-reducible differentiable function runnable at both element
/// types, so one definition serves the checked tape and the f64 oracle.
/// Two concrete entry points keep the trait object-safe; implementors write
/// a single generic body and forward both methods to it (see the
/// `scalar_fn!` macro below).
pub trait ScalarFn {
    fn eval_f32(&self, tape: &mut Tape<f32>, inputs: &[TensorRef]) -> Result<TensorRef>;
    fn eval_f64(&self, tape: &mut Tape<f64>, inputs: &[TensorRef]) -> Result<TensorRef>;
}

/// Element types a `dyn ScalarFn` can be evaluated at.
pub trait EvalElem: Elem {
    fn eval(f: &dyn ScalarFn, tape: &mut Tape<Self>, inputs: &[TensorRef]) -> Result<TensorRef>;
}

impl EvalElem for f32 {
    fn eval(f: &dyn ScalarFn, tape: &mut Tape<Self>, inputs: &[TensorRef]) -> Result<TensorRef> {
        f.eval_f32(tape, inputs)
    }
}

impl EvalElem for f64 {
    fn eval(f: &dyn ScalarFn, tape: &mut Tape<Self>, inputs: &[TensorRef]) -> Result<TensorRef> {
        f.eval_f64(tape, inputs)
    }
}

/// Outcome of one gradient check.
#[derive(Clone, Debug)]
pub struct GradReport {
    pub name: String,
    pub max_rel_err: f64,
    pub n_coords: usize,
    pub tolerance: f64,
    pub passed: bool,
}

impl std::fmt::Display for GradReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} {}: max rel err {:.3e} over {} coords (tol {:.1e})",
            if self.passed { "ok  " } else { "FAIL" },
            self.name,
            self.max_rel_err,
            self.n_coords,
            self.tolerance
        )
    }
}

/// The nearest f32-representable point, kept in f64 storage.
fn round_through_f32(t: &Tensor<f64>) -> Tensor<f64> {
    let mut r = t.clone();
    for v in r.data_mut() {
        *v = *v as f32 as f64;
    }
    r
}

fn weighted_loss<F: EvalElem>(
    f: &dyn ScalarFn,
    tape: &mut Tape<F>,
    inputs: &[TensorRef],
    cot_seed: u64,
) -> Result<TensorRef> {
    let out = F::eval(f, tape, inputs)?;
    let shape = tape.shape(out)?.to_vec();
    let w = Tensor::<F>::randn(&shape, cot_seed)?;
    let wr = tape.constant(&w);
    let prod = tape.mul(out, wr)?;
    tape.sum_all(prod)
}

fn eval_f64(f: &dyn ScalarFn, inputs: &[Tensor<f64>], cot_seed: u64) -> Result<f64> {
    let mut tape = Tape::<f64>::new();
    let refs: Vec<TensorRef> = inputs.iter().map(|t| tape.constant(t)).collect();
    let loss = weighted_loss(f, &mut tape, &refs, cot_seed)?;
    tape.value_scalar(loss)
}

fn ad_grads<F: EvalElem>(f: &dyn ScalarFn, inputs: &[Tensor<f64>], cot_seed: u64) -> Result<Vec<Vec<f64>>> {
    let mut tape = Tape::<F>::new();
    let cast: Vec<Tensor<F>> = inputs.iter().map(|t| t.cast::<F>()).collect();
    let refs: Vec<TensorRef> = cast.iter().map(|t| tape.leaf(t)).collect();
    let loss = weighted_loss(f, &mut tape, &refs, cot_seed)?;
    tape.backward(loss)?;
    let mut out = Vec::with_capacity(refs.len());
    for (&r, t) in refs.iter().zip(inputs) {
        match tape.grad_of(r)? {
            Some(g) => out.push(g.iter().map(|&x| x.to_f64()).collect()),
            None => out.push(vec![0.0; t.numel()]),
        }
    }
    Ok(out)
}

/// Check the tape gradient of `f` at `inputs` against central differences,
/// probing every coordinate. `name` labels the report.
pub fn grad_check(name: &str, f: &dyn ScalarFn, inputs: &[Tensor<f64>], prec: Precision, tol: f64) -> Result<GradReport> {
    grad_check_sampled(name, f, inputs, prec, tol, usize::MAX, 0)
}

/// Like [`grad_check`] but probing at most `max_coords` coordinates per
/// input (chosen deterministically from `probe_seed`), for functions too
/// large to difference exhaustively. The tape gradient is still full.
pub fn grad_check_sampled(
    name: &str,
    f: &dyn ScalarFn,
    inputs: &[Tensor<f64>],
    prec: Precision,
    tol: f64,
    max_coords: usize,
    probe_seed: u64,
) -> Result<GradReport> {
    let cot_seed = probe_seed ^ 0x9e37_79b9_7f4a_7c15;
    // The f32 tape casts its inputs, so Single mode checks at the rounded
    // point; the oracle must difference that same point.
    let rounded: Vec<Tensor<f64>>;
    let inputs: &[Tensor<f64>] = match prec {
        Precision::Single => {
            rounded = inputs.iter().map(round_through_f32).collect();
            &rounded
        }
        Precision::Double => inputs,
    };
    let ad = match prec {
        Precision::Single => ad_grads::<f32>(f, inputs, cot_seed)?,
        Precision::Double => ad_grads::<f64>(f, inputs, cot_seed)?,
    };

    // Differences are evaluated by the f64 oracle, so the step is the
    // 64-bit one at both modes (module docs).
    let h = Precision::Double.step();
    let mut fd_pairs: Vec<(f64, f64)> = Vec::new(); // (ad, fd) at probed coords
    let mut work = inputs.to_vec();
    for i in 0..inputs.len() {
        let n = inputs[i].numel();
        let coords: Vec<usize> = if n <= max_coords {
            (0..n).collect()
        } else {
            // distinct deterministic sample
            let mut rng = Rng::stream(probe_seed, i as u64);
            let mut idx: Vec<usize> = (0..n).collect();
            rng.shuffle(&mut idx);
            idx.truncate(max_coords);
            idx
        };
        for &j in &coords {
            let orig = work[i].data()[j];
            work[i].data_mut()[j] = orig + h;
            let lp = eval_f64(f, &work, cot_seed)?;
            work[i].data_mut()[j] = orig - h;
            let lm = eval_f64(f, &work, cot_seed)?;
            work[i].data_mut()[j] = orig;
            fd_pairs.push((ad[i][j], (lp - lm) / (2.0 * h)));
        }
    }

    let gmax = fd_pairs.iter().fold(0.0_f64, |m, &(a, b)| m.max(a.abs()).max(b.abs()));
    let denom = gmax.max(1e-8);
    let mut max_rel = 0.0_f64;
    for &(a, b) in &fd_pairs {
        max_rel = max_rel.max((a - b).abs() / denom);
    }
    Ok(GradReport {
        name: name.to_string(),
        max_rel_err: max_rel,
        n_coords: fd_pairs.len(),
        tolerance: tol,
        passed: max_rel < tol,
    })
}

// ---- operation suite --------------------------------------------------------

/// Standard-normal tensor whose entries are pushed away from the given
/// non-differentiable points (and from zero when `min_abs > 0`), so central
/// differences stay on one side of every kink.
fn randn_clear(shape: &[usize], rng: &mut Rng, kinks: &[f64], min_abs: f64) -> Tensor<f64> {
    let mut t = Tensor::<f64>::randn_with(shape, rng).expect("valid shape");
    let margin = 0.05;
    for v in t.data_mut() {
        loop {
            let near_kink = kinks.iter().any(|k| (*v - k).abs() < margin);
            let too_small = min_abs > 0.0 && v.abs() < min_abs;
            if !near_kink && !too_small {
                break;
            }
            *v = rng.normal();
        }
    }
    t
}

/// Strictly positive tensor bounded away from zero (for ln/sqrt/recip).
fn randn_positive(shape: &[usize], rng: &mut Rng) -> Tensor<f64> {
    let mut t = Tensor::<f64>::randn_with(shape, rng).expect("valid shape");
    for v in t.data_mut() {
        *v = v.abs() + 0.5;
    }
    t
}

/// Define a `ScalarFn` from one generic body; both trait methods forward
/// to it.
macro_rules! scalar_fn {
    ($name:ident, |$tape:ident, $ins:ident| $body:expr) => {
        struct $name;
        impl $name {
            fn run<F: Elem>(&self, $tape: &mut Tape<F>, $ins: &[TensorRef]) -> Result<TensorRef> {
                $body
            }
        }
        impl ScalarFn for $name {
            fn eval_f32(&self, t: &mut Tape<f32>, i: &[TensorRef]) -> Result<TensorRef> {
                self.run(t, i)
            }
            fn eval_f64(&self, t: &mut Tape<f64>, i: &[TensorRef]) -> Result<TensorRef> {
                self.run(t, i)
            }
        }
    };
}

scalar_fn!(FnAdd, |t, i| t.add(i[0], i[1]));
scalar_fn!(FnSub, |t, i| t.sub(i[0], i[1]));
scalar_fn!(FnMul, |t, i| t.mul(i[0], i[1]));
scalar_fn!(FnNeg, |t, i| t.neg(i[0]));
scalar_fn!(FnScale, |t, i| t.scale(i[0], 1.7));
scalar_fn!(FnAddScalar, |t, i| t.add_scalar(i[0], 0.3));
scalar_fn!(FnRelu, |t, i| t.relu(i[0]));
scalar_fn!(FnLeakyRelu, |t, i| t.leaky_relu(i[0], 0.2));
scalar_fn!(FnSigmoid, |t, i| t.sigmoid(i[0]));
scalar_fn!(FnTanh, |t, i| t.tanh(i[0]));
scalar_fn!(FnExp, |t, i| t.exp(i[0]));
scalar_fn!(FnLn, |t, i| t.ln(i[0]));
scalar_fn!(FnSqrt, |t, i| t.sqrt(i[0]));
scalar_fn!(FnRecip, |t, i| t.recip(i[0]));
scalar_fn!(FnClamp, |t, i| t.clamp(i[0], -0.5, 0.8));
scalar_fn!(FnMatMul, |t, i| t.matmul(i[0], i[1]));
scalar_fn!(FnTranspose, |t, i| t.transpose(i[0]));
scalar_fn!(FnAddBiasRow, |t, i| t.add_bias_row(i[0], i[1]));
scalar_fn!(FnAddBiasChan, |t, i| t.add_bias_chan(i[0], i[1]));
scalar_fn!(FnSumChan, |t, i| t.sum_chan(i[0]));
scalar_fn!(FnBroadcastChan, |t, i| t.broadcast_chan(i[0], 2, 3, 4));
scalar_fn!(FnSumAxis, |t, i| t.sum_axis(i[0], 1));
scalar_fn!(FnBroadcastAxis, |t, i| t.broadcast_axis(i[0], 1, 4));
scalar_fn!(FnSumAll, |t, i| t.sum_all(i[0]));
scalar_fn!(FnBroadcastAll, |t, i| t.broadcast_all(i[0], &[2, 3]));
scalar_fn!(FnMeanAll, |t, i| t.mean_all(i[0]));
scalar_fn!(FnConvS1, |t, i| t.conv2d(i[0], i[1], (1, 1)));
scalar_fn!(FnConvS21, |t, i| t.conv2d(i[0], i[1], (2, 1)));
scalar_fn!(FnConvS22, |t, i| t.conv2d(i[0], i[1], (2, 2)));
scalar_fn!(FnConvDx, |t, i| t.conv2d_dx(i[0], i[1], (1, 2), (3, 5, 9)));
scalar_fn!(FnConvDw, |t, i| t.conv2d_dw(i[0], i[1], (1, 2), (2, 3)));
scalar_fn!(FnPad2d, |t, i| t.pad2d(i[0], (1, 2, 0, 1)));
scalar_fn!(FnCrop2d, |t, i| t.crop2d(i[0], (1, 0, 2, 1)));
scalar_fn!(FnUpsample, |t, i| t.upsample2x(i[0]));
scalar_fn!(FnSumPool, |t, i| t.sumpool2x(i[0]));
scalar_fn!(FnReshape, |t, i| t.reshape(i[0], &[2, 6]));
scalar_fn!(FnConcatCols, |t, i| t.concat_cols(i[0], i[1]));
scalar_fn!(FnSliceCols, |t, i| t.slice_cols(i[0], 1, 4));
scalar_fn!(FnPadCols, |t, i| t.pad_cols(i[0], 2, 1));
scalar_fn!(FnL2NormRows, |t, i| t.l2_normalize_rows(i[0]));
scalar_fn!(FnPixelNorm, |t, i| t.pixelnorm(i[0]));

// Map the free input through sigmoid so predictions stay inside the clamp
// range, then score against a fixed target pattern.
scalar_fn!(FnBce, |tape, ins| {
    let p = tape.sigmoid(ins[0])?;
    let n = tape.shape(p)?[0];
    let tdata: Vec<F> = (0..n).map(|i| if i % 2 == 0 { F::one() } else { F::zero() }).collect();
    let target = tape.constant_from(&[n, 1], tdata)?;
    tape.bce(p, target)
});

scalar_fn!(FnBceLogits, |tape, ins| {
    let n = tape.shape(ins[0])?[0];
    let tdata: Vec<F> = (0..n).map(|i| if i % 2 == 0 { F::one() } else { F::zero() }).collect();
    let target = tape.constant_from(&[n, 1], tdata)?;
    tape.bce_logits(ins[0], target)
});

scalar_fn!(FnSoftmaxCe, |tape, ins| {
    let (n, c) = (tape.shape(ins[0])?[0], tape.shape(ins[0])?[1]);
    let mut oh = vec![F::zero(); n * c];
    for i in 0..n {
        oh[i * c + (i % c)] = F::one();
    }
    let target = tape.constant_from(&[n, c], oh)?;
    tape.softmax_cross_entropy(ins[0], target)
});

// Differentiates through grad_graph itself: for s = sum((x.w)^2), g = ds/dx
// is emitted on-tape and the outer check then differentiates sum((g w')^2)
// with respect to both x and w. This exercises the same double-backward
// path the gradient penalty uses.
scalar_fn!(FnGradOfSquareNorm, |tape, ins| {
    let y = tape.matmul(ins[0], ins[1])?;
    let y2 = tape.mul(y, y)?;
    let s = tape.sum_all(y2)?;
    let g = tape.grad_graph(s, &[ins[0]])?[0];
    tape.mul(g, g)
});

type ShapeGen = fn(&mut Rng) -> Vec<Tensor<f64>>;

fn suite_entries() -> Vec<(&'static str, Box<dyn ScalarFn>, ShapeGen)> {
    fn two_34(r: &mut Rng) -> Vec<Tensor<f64>> {
        vec![randn_clear(&[3, 4], r, &[], 0.0), randn_clear(&[3, 4], r, &[], 0.0)]
    }
    fn one_34(r: &mut Rng) -> Vec<Tensor<f64>> {
        vec![randn_clear(&[3, 4], r, &[], 0.0)]
    }
    vec![
        ("add", Box::new(FnAdd), two_34 as ShapeGen),
        ("sub", Box::new(FnSub), two_34),
        ("mul", Box::new(FnMul), two_34),
        ("neg", Box::new(FnNeg), one_34),
        ("scale", Box::new(FnScale), one_34),
        ("add_scalar", Box::new(FnAddScalar), one_34),
        ("relu", Box::new(FnRelu), |r| vec![randn_clear(&[3, 4], r, &[0.0], 0.0)]),
        ("leaky_relu", Box::new(FnLeakyRelu), |r| vec![randn_clear(&[3, 4], r, &[0.0], 0.0)]),
        ("sigmoid", Box::new(FnSigmoid), one_34),
        ("tanh", Box::new(FnTanh), one_34),
        ("exp", Box::new(FnExp), one_34),
        ("ln", Box::new(FnLn), |r| vec![randn_positive(&[3, 4], r)]),
        ("sqrt", Box::new(FnSqrt), |r| vec![randn_positive(&[3, 4], r)]),
        ("recip", Box::new(FnRecip), |r| vec![randn_positive(&[3, 4], r)]),
        ("clamp", Box::new(FnClamp), |r| vec![randn_clear(&[3, 4], r, &[-0.5, 0.8], 0.0)]),
        ("matmul", Box::new(FnMatMul), |r| {
            vec![randn_clear(&[3, 4], r, &[], 0.0), randn_clear(&[4, 5], r, &[], 0.0)]
        }),
        ("transpose", Box::new(FnTranspose), |r| vec![randn_clear(&[3, 5], r, &[], 0.0)]),
        ("add_bias_row", Box::new(FnAddBiasRow), |r| {
            vec![randn_clear(&[4, 6], r, &[], 0.0), randn_clear(&[6], r, &[], 0.0)]
        }),
        ("add_bias_chan", Box::new(FnAddBiasChan), |r| {
            vec![randn_clear(&[2, 3, 4, 5], r, &[], 0.0), randn_clear(&[3], r, &[], 0.0)]
        }),
        ("sum_chan", Box::new(FnSumChan), |r| vec![randn_clear(&[2, 3, 4, 5], r, &[], 0.0)]),
        ("broadcast_chan", Box::new(FnBroadcastChan), |r| vec![randn_clear(&[3], r, &[], 0.0)]),
        ("sum_axis", Box::new(FnSumAxis), |r| vec![randn_clear(&[3, 4, 5], r, &[], 0.0)]),
        ("broadcast_axis", Box::new(FnBroadcastAxis), |r| vec![randn_clear(&[3, 1, 5], r, &[], 0.0)]),
        ("sum_all", Box::new(FnSumAll), one_34),
        ("broadcast_all", Box::new(FnBroadcastAll), |r| vec![randn_clear(&[1], r, &[], 0.0)]),
        ("mean_all", Box::new(FnMeanAll), one_34),
        ("conv2d_s1", Box::new(FnConvS1), |r| {
            vec![randn_clear(&[2, 3, 6, 7], r, &[], 0.0), randn_clear(&[4, 3, 3, 3], r, &[], 0.0)]
        }),
        ("conv2d_s21", Box::new(FnConvS21), |r| {
            vec![randn_clear(&[2, 3, 7, 6], r, &[], 0.0), randn_clear(&[2, 3, 3, 4], r, &[], 0.0)]
        }),
        ("conv2d_s22", Box::new(FnConvS22), |r| {
            vec![randn_clear(&[1, 2, 8, 8], r, &[], 0.0), randn_clear(&[3, 2, 2, 2], r, &[], 0.0)]
        }),
        ("conv2d_dx", Box::new(FnConvDx), |r| {
            // dy (b, cout, oh, ow) for x (b, 3, 5, 9), w (4, 3, 2, 3), stride (1, 2)
            vec![randn_clear(&[2, 4, 4, 4], r, &[], 0.0), randn_clear(&[4, 3, 2, 3], r, &[], 0.0)]
        }),
        ("conv2d_dw", Box::new(FnConvDw), |r| {
            // x (b, 3, 5, 9), dy (b, 4, 4, 4) for kernel (2, 3), stride (1, 2)
            vec![randn_clear(&[2, 3, 5, 9], r, &[], 0.0), randn_clear(&[2, 4, 4, 4], r, &[], 0.0)]
        }),
        ("pad2d", Box::new(FnPad2d), |r| vec![randn_clear(&[2, 2, 5, 6], r, &[], 0.0)]),
        ("crop2d", Box::new(FnCrop2d), |r| vec![randn_clear(&[2, 2, 5, 6], r, &[], 0.0)]),
        ("upsample2x", Box::new(FnUpsample), |r| vec![randn_clear(&[2, 2, 4, 4], r, &[], 0.0)]),
        ("sumpool2x", Box::new(FnSumPool), |r| vec![randn_clear(&[2, 2, 4, 6], r, &[], 0.0)]),
        ("reshape", Box::new(FnReshape), |r| vec![randn_clear(&[3, 4], r, &[], 0.0)]),
        ("concat_cols", Box::new(FnConcatCols), |r| {
            vec![randn_clear(&[3, 4], r, &[], 0.0), randn_clear(&[3, 2], r, &[], 0.0)]
        }),
        ("slice_cols", Box::new(FnSliceCols), |r| vec![randn_clear(&[3, 6], r, &[], 0.0)]),
        ("pad_cols", Box::new(FnPadCols), |r| vec![randn_clear(&[3, 4], r, &[], 0.0)]),
        ("l2_normalize_rows", Box::new(FnL2NormRows), |r| {
            // rows comfortably away from the origin
            let mut t = randn_clear(&[4, 8], r, &[], 0.2);
            for v in t.data_mut() {
                *v += v.signum() * 0.3;
            }
            vec![t]
        }),
        ("pixelnorm", Box::new(FnPixelNorm), |r| vec![randn_clear(&[2, 3, 4, 4], r, &[], 0.0)]),
        ("bce", Box::new(FnBce), |r| vec![randn_clear(&[6, 1], r, &[], 0.0)]),
        ("bce_logits", Box::new(FnBceLogits), |r| vec![randn_clear(&[6, 1], r, &[], 0.0)]),
        ("softmax_cross_entropy", Box::new(FnSoftmaxCe), |r| vec![randn_clear(&[4, 5], r, &[], 0.0)]),
        ("grad_graph_double_backward", Box::new(FnGradOfSquareNorm), |r| {
            vec![randn_clear(&[3, 4], r, &[], 0.0), randn_clear(&[4, 2], r, &[], 0.0)]
        }),
    ]
}

// ---- composite model check ----------------------------------------------

/// Which tensor a composite-check input substitutes.
enum Slot {
    Noise,
    Plugin(usize),
    Gen(usize),
    Critic(usize),
    VDisc(usize),
}

/// The full plugin-step forward: plugin -> generator -> critic features
/// -> video discriminator score, with selected weight tensors rebound to
/// differentiable inputs. Everything else stays a detached constant, as
/// in training. The score is the pre-sigmoid one training differentiates
/// (through `bce_logits`); a sigmoid head saturates to exactly 0/1 in
/// f32 for the unbounded feature scales random weights produce, which
/// kills the tape gradient while the f64 oracle still sees a slope.
struct CompositeFn {
    plugin: crate::plugin::PluginNet<f64>,
    gen: crate::backbone::Generator<f64>,
    critic: crate::backbone::Critic<f64>,
    vdisc: crate::video_disc::VideoDiscriminator<f64>,
    noise: Tensor<f64>,
    slots: Vec<Slot>,
}

impl CompositeFn {
    fn run<F: Elem>(&self, tape: &mut Tape<F>, ins: &[TensorRef]) -> Result<TensorRef> {
        use crate::backbone::FEATURE_DIM;
        use crate::video_disc::CLIP_FRAMES;
        let plugin = self.plugin.cast::<F>();
        let gen = self.gen.cast::<F>();
        let critic = self.critic.cast::<F>();
        let vdisc = self.vdisc.cast::<F>();
        let mut pbinds = plugin.params.bind_frozen(tape);
        let mut gbinds = gen.params.bind_frozen(tape);
        let mut cbinds = critic.params.bind_frozen(tape);
        let mut dbinds = vdisc.params.bind_frozen(tape);
        let mut noise_ref = None;
        for (i, slot) in self.slots.iter().enumerate() {
            match *slot {
                Slot::Noise => noise_ref = Some(ins[i]),
                Slot::Plugin(j) => pbinds[j] = ins[i],
                Slot::Gen(j) => gbinds[j] = ins[i],
                Slot::Critic(j) => cbinds[j] = ins[i],
                Slot::VDisc(j) => dbinds[j] = ins[i],
            }
        }
        let noise_ref = match noise_ref {
            Some(r) => r,
            None => {
                let cast = self.noise.cast::<F>();
                tape.constant(&cast)
            }
        };
        let timeline = crate::plugin::Timeline::grid(CLIP_FRAMES)?;
        let latents = plugin.forward(tape, &pbinds, &timeline, noise_ref)?;
        let frames = gen.forward(tape, &gbinds, latents)?;
        let feats = critic.features(tape, &cbinds, frames)?;
        let fv = tape.reshape(feats, &[1, 1, CLIP_FRAMES, FEATURE_DIM])?;
        vdisc.forward_logits(tape, &dbinds, fv)
    }
}

impl ScalarFn for CompositeFn {
    fn eval_f32(&self, t: &mut Tape<f32>, i: &[TensorRef]) -> Result<TensorRef> {
        self.run(t, i)
    }
    fn eval_f64(&self, t: &mut Tape<f64>, i: &[TensorRef]) -> Result<TensorRef> {
        self.run(t, i)
    }
}

fn param_index(params: &crate::params::ParamSet<f64>, name: &str) -> usize {
    params.iter().position(|p| p.name == name).expect("known parameter name")
}

/// Check gradient flow through the whole composite at a tiny 8px backbone
/// geometry, probing `coords_per_tensor` coordinates each of the noise
/// row, the plugin's first weight and last bias, the generator stem, the
/// critic feature projection, and the video discriminator's first conv
/// and head.
pub fn composite_check(prec: Precision, coords_per_tensor: usize, seed: u64) -> Result<GradReport> {
    use crate::backbone::{Backbone, BackboneConfig};
    let cfg = BackboneConfig { resolution: 8, base: 4, channels: vec![8, 4], image_channels: 1 };
    let mut bb = Backbone::<f64>::new(seed ^ 0x5eed, &cfg)?;
    let mut plugin = crate::plugin::PluginNet::<f64>::new(seed ^ 0x91);
    let mut vdisc = crate::video_disc::VideoDiscriminator::<f64>::new(seed ^ 0x17);
    // The checked inputs get rounded through f32 inside grad_check_sampled,
    // but the weights the nets close over as constants must match across
    // the two element types too, or Single mode compares gradients of two
    // slightly different networks.
    for params in [&mut plugin.params, &mut bb.gen.params, &mut bb.critic.params, &mut vdisc.params] {
        for i in 0..params.len() {
            for v in params.get_mut(i).tensor.data_mut() {
                *v = *v as f32 as f64;
            }
        }
    }
    let mut rng = Rng::stream(seed, 7 << 8);
    let mut noise = Tensor::<f64>::randn_with(&[1, crate::plugin::NOISE_DIM], &mut rng)?;
    for v in noise.data_mut() {
        *v = *v as f32 as f64;
    }

    let slots = vec![
        Slot::Noise,
        Slot::Plugin(param_index(&plugin.params, "l1.w")),
        Slot::Plugin(param_index(&plugin.params, "l4.b")),
        Slot::Gen(param_index(&bb.gen.params, "stem.w")),
        Slot::Critic(param_index(&bb.critic.params, "feat.w")),
        Slot::VDisc(param_index(&vdisc.params, "conv1.w")),
        Slot::VDisc(param_index(&vdisc.params, "head.w")),
    ];
    let inputs: Vec<Tensor<f64>> = slots
        .iter()
        .map(|slot| match *slot {
            Slot::Noise => noise.clone(),
            Slot::Plugin(j) => plugin.params.get(j).tensor.clone(),
            Slot::Gen(j) => bb.gen.params.get(j).tensor.clone(),
            Slot::Critic(j) => bb.critic.params.get(j).tensor.clone(),
            Slot::VDisc(j) => vdisc.params.get(j).tensor.clone(),
        })
        .collect();
    let f = CompositeFn { plugin, gen: bb.gen, critic: bb.critic, vdisc, noise, slots };
    grad_check_sampled("composite_plugin_step", &f, &inputs, prec, prec.tolerance(), coords_per_tensor, seed)
}

/// Run every tape operation through [`grad_check`] at `instances` random
/// small-shape instances each, in the given precision. Returns one report
/// per operation carrying the worst error seen.
pub fn op_suite(prec: Precision, instances: usize, seed: u64) -> Result<Vec<GradReport>> {
    let tol = prec.tolerance();
    let mut reports = Vec::new();
    for (name, f, gen) in suite_entries() {
        let mut worst = GradReport {
            name: name.to_string(),
            max_rel_err: 0.0,
            n_coords: 0,
            tolerance: tol,
            passed: true,
        };
        for k in 0..instances {
            let mut rng = Rng::stream(seed, (k as u64) << 8);
            let inputs = gen(&mut rng);
            let rep = grad_check_sampled(name, f.as_ref(), &inputs, prec, tol, 64, seed ^ k as u64)?;
            worst.max_rel_err = worst.max_rel_err.max(rep.max_rel_err);
            worst.n_coords += rep.n_coords;
            worst.passed &= rep.passed;
        }
        reports.push(worst);
    }
    Ok(reports)
}
