//! Dense row-major tensors over f32 or f64.
//!
//! The whole engine is generic over [`Elem`] so every model and training
//! step can run in f64 "shadow mode" for gradient checking while production
//! training uses f32. [`Tensor`] owns its buffer; views are not needed at
//! this scale, the tape stores value buffers per node instead.

use crate::rng::Rng;
use crate::{Error, Result};

/// Scalar element type of the engine: f32 or f64.
///
/// `c` converts an f64 constant into `F`; `gemm` dispatches to the matching
/// `matrixmultiply` kernel. Stride arguments follow `matrixmultiply`: the
/// element at (row i, col j) of an m x k operand sits at `i*rs + j*cs`.
pub trait Elem: num_traits::Float + Send + Sync + std::fmt::Debug + std::fmt::Display + 'static {
    const IS_F64: bool;

    fn c(x: f64) -> Self {
        <Self as num_traits::NumCast>::from(x).expect("finite f64 constant converts")
    }

    fn to_f64(self) -> f64 {
        <f64 as num_traits::NumCast>::from(self).expect("element casts to f64")
    }

    /// `c = alpha * a.b + beta * c` for arbitrary strides.
    ///
    /// # Safety
    /// Pointers must reference buffers valid for the given dims and strides;
    /// `c` must not alias `a` or `b`.
    #[allow(clippy::too_many_arguments)]
    unsafe fn gemm(
        m: usize, k: usize, n: usize,
        alpha: Self,
        a: *const Self, rsa: isize, csa: isize,
        b: *const Self, rsb: isize, csb: isize,
        beta: Self,
        c: *mut Self, rsc: isize, csc: isize,
    );
}

impl Elem for f32 {
    const IS_F64: bool = false;

    unsafe fn gemm(
        m: usize, k: usize, n: usize,
        alpha: Self,
        a: *const Self, rsa: isize, csa: isize,
        b: *const Self, rsb: isize, csb: isize,
        beta: Self,
        c: *mut Self, rsc: isize, csc: isize,
    ) {
        matrixmultiply::sgemm(m, k, n, alpha, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc);
    }
}

impl Elem for f64 {
    const IS_F64: bool = true;

    unsafe fn gemm(
        m: usize, k: usize, n: usize,
        alpha: Self,
        a: *const Self, rsa: isize, csa: isize,
        b: *const Self, rsb: isize, csb: isize,
        beta: Self,
        c: *mut Self, rsc: isize, csc: isize,
    ) {
        matrixmultiply::dgemm(m, k, n, alpha, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc);
    }
}

/// Validate a shape: non-empty rank with strictly positive extents.
pub fn check_shape(shape: &[usize]) -> Result<()> {
    if shape.is_empty() {
        return Err(Error::Shape("empty shape (rank 0) is not allowed".into()));
    }
    if shape.contains(&0) {
        return Err(Error::Shape(format!("zero extent in shape {shape:?}")));
    }
    Ok(())
}

/// Number of elements of a shape.
pub fn numel(shape: &[usize]) -> usize {
    shape.iter().product()
}

/// Dense row-major tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<F: Elem = f32> {
    shape: Vec<usize>,
    data: Vec<F>,
    /// Whether gradients should flow into this tensor when bound to a tape.
    pub requires_grad: bool,
    /// Gradient buffer, populated by training steps that copy grads back.
    pub grad: Option<Vec<F>>,
}

impl<F: Elem> Tensor<F> {
    /// Build from shape and data. Errors if the shape is invalid or the
    /// data length does not match.
    pub fn new(shape: &[usize], data: Vec<F>) -> Result<Self> {
        check_shape(shape)?;
        if numel(shape) != data.len() {
            return Err(Error::Shape(format!(
                "shape {shape:?} wants {} elements, got {}",
                numel(shape),
                data.len()
            )));
        }
        Ok(Tensor { shape: shape.to_vec(), data, requires_grad: false, grad: None })
    }

    pub fn zeros(shape: &[usize]) -> Result<Self> {
        check_shape(shape)?;
        Ok(Tensor {
            shape: shape.to_vec(),
            data: vec![F::zero(); numel(shape)],
            requires_grad: false,
            grad: None,
        })
    }

    pub fn full(shape: &[usize], value: F) -> Result<Self> {
        let mut t = Self::zeros(shape)?;
        t.data.fill(value);
        Ok(t)
    }

    /// Rank-1 scalar wrapper (shape `[1]`).
    pub fn scalar(value: F) -> Self {
        Tensor { shape: vec![1], data: vec![value], requires_grad: false, grad: None }
    }

    /// I.i.d. standard normal entries from the given seed (stream 0).
    /// Samples are drawn as f64 then cast, so f32 and f64 tensors from the
    /// same seed agree up to rounding.
    pub fn randn(shape: &[usize], seed: u64) -> Result<Self> {
        check_shape(shape)?;
        let mut rng = Rng::seeded(seed);
        Ok(Self::randn_with(shape, &mut rng).expect("shape already validated"))
    }

    /// I.i.d. standard normal entries from an existing RNG.
    pub fn randn_with(shape: &[usize], rng: &mut Rng) -> Result<Self> {
        let mut t = Self::zeros(shape)?;
        rng.fill_normal(&mut t.data);
        Ok(t)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[F] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [F] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<F> {
        self.data
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    /// Reinterpret the buffer under a new shape with the same element count.
    pub fn reshaped(mut self, shape: &[usize]) -> Result<Self> {
        check_shape(shape)?;
        if numel(shape) != self.data.len() {
            return Err(Error::Shape(format!(
                "cannot reshape {:?} ({} elems) to {shape:?} ({} elems)",
                self.shape,
                self.data.len(),
                numel(shape)
            )));
        }
        self.shape = shape.to_vec();
        Ok(self)
    }

    /// Elementwise cast to another element type (f64 -> f32 rounds; f32 ->
    /// f64 is exact, which gradient checking relies on).
    pub fn cast<G: Elem>(&self) -> Tensor<G> {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&x| G::c(x.to_f64())).collect(),
            requires_grad: self.requires_grad,
            grad: None,
        }
    }

    /// True if every element is finite.
    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// Max absolute element, 0 for the degenerate all-zero tensor.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, &x| m.max(x.to_f64().abs()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn new_rejects_length_mismatch() {
        let err = Tensor::<f32>::new(&[2, 3], vec![0.0; 5]).unwrap_err();
        assert!(matches!(err, Error::Shape(_)));
    }

    #[test]
    fn empty_shape_rejected() {
        assert!(Tensor::<f32>::zeros(&[]).is_err());
        assert!(Tensor::<f32>::randn(&[], 1).is_err());
    }

    #[test]
    fn zero_extent_rejected() {
        assert!(Tensor::<f32>::zeros(&[3, 0]).is_err());
    }

    #[test]
    fn randn_is_seed_deterministic() {
        let a = Tensor::<f32>::randn(&[4, 5], 42).unwrap();
        let b = Tensor::<f32>::randn(&[4, 5], 42).unwrap();
        assert_eq!(a.data(), b.data());
        let c = Tensor::<f32>::randn(&[4, 5], 43).unwrap();
        assert_ne!(a.data(), c.data());
    }

    #[test]
    fn f32_to_f64_cast_is_exact() {
        let a = Tensor::<f32>::randn(&[16], 9).unwrap();
        let b: Tensor<f64> = a.cast();
        for (x, y) in a.data().iter().zip(b.data()) {
            assert_eq!(*x as f64, *y);
        }
    }

    #[test]
    fn reshape_checks_element_count() {
        let t = Tensor::<f32>::zeros(&[2, 6]).unwrap();
        assert!(t.clone().reshaped(&[3, 4]).is_ok());
        assert!(t.reshaped(&[5, 2]).is_err());
    }
}
