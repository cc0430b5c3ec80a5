//! Raw numeric kernels behind the tape ops.
//!
//! Dense matmul is delegated to `matrixmultiply` (runtime-dispatched SIMD
//! GEMM); everything else here is hand-written: im2col/col2im, the valid
//! cross-correlation `conv2d_fwd` and its two adjoints `conv2d_dx` /
//! `conv2d_dw`, zero padding/cropping, nearest upsampling and its adjoint
//! sum-pooling. The three conv kernels satisfy the trilinear identity
//! `<y, fwd(x, w)> = <x, dx(y, w)> = <w, dw(x, y)>`, which the tests check
//! against random tensors and a naive direct convolution.
//!
//! Batch-parallel paths assign each rayon task a disjoint output region and
//! do no reductions across tasks, so results are bitwise identical for any
//! thread count.

use rayon::prelude::*;

use crate::tensor::Elem;
use crate::{Error, Result};

/// Dimensions of a valid (no padding) strided 2D cross-correlation:
/// input `(batch, cin, h, w)`, kernel `(cout, cin, kh, kw)`, output
/// `(batch, cout, oh, ow)` with `oh = (h - kh)/sh + 1` (floor).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvDims {
    pub batch: usize,
    pub cin: usize,
    pub h: usize,
    pub w: usize,
    pub cout: usize,
    pub kh: usize,
    pub kw: usize,
    pub sh: usize,
    pub sw: usize,
}

impl ConvDims {
    pub fn out_hw(&self) -> Result<(usize, usize)> {
        if self.sh == 0 || self.sw == 0 {
            return Err(Error::Shape("conv stride must be positive".into()));
        }
        if self.kh == 0 || self.kw == 0 {
            return Err(Error::Shape("conv kernel extent must be positive".into()));
        }
        if self.kh > self.h || self.kw > self.w {
            return Err(Error::Shape(format!(
                "conv kernel ({}, {}) exceeds input ({}, {})",
                self.kh, self.kw, self.h, self.w
            )));
        }
        Ok(((self.h - self.kh) / self.sh + 1, (self.w - self.kw) / self.sw + 1))
    }

    fn ckk(&self) -> usize {
        self.cin * self.kh * self.kw
    }
}

/// `a (m,k) . b (k,n)`, both row-major contiguous.
pub fn matmul<F: Elem>(m: usize, k: usize, n: usize, a: &[F], b: &[F]) -> Vec<F> {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    let mut c = vec![F::zero(); m * n];
    unsafe {
        F::gemm(
            m, k, n,
            F::one(),
            a.as_ptr(), k as isize, 1,
            b.as_ptr(), n as isize, 1,
            F::zero(),
            c.as_mut_ptr(), n as isize, 1,
        );
    }
    c
}

/// Materialized transpose of a row-major `(rows, cols)` matrix.
pub fn transpose2d<F: Elem>(x: &[F], rows: usize, cols: usize) -> Vec<F> {
    debug_assert_eq!(x.len(), rows * cols);
    let mut out = vec![F::zero(); rows * cols];
    for i in 0..rows {
        for j in 0..cols {
            out[j * rows + i] = x[i * cols + j];
        }
    }
    out
}

/// Unfold one image `(cin, h, w)` into patch columns `(cin*kh*kw, oh*ow)`.
fn im2col<F: Elem>(x: &[F], d: &ConvDims, oh: usize, ow: usize, cols: &mut [F]) {
    let ohow = oh * ow;
    for ci in 0..d.cin {
        for ki in 0..d.kh {
            for kj in 0..d.kw {
                let row = (ci * d.kh + ki) * d.kw + kj;
                let dst = &mut cols[row * ohow..(row + 1) * ohow];
                for oi in 0..oh {
                    let src_base = (ci * d.h + oi * d.sh + ki) * d.w + kj;
                    let dst_base = oi * ow;
                    for oj in 0..ow {
                        dst[dst_base + oj] = x[src_base + oj * d.sw];
                    }
                }
            }
        }
    }
}

/// Scatter-add patch columns back onto an image buffer (adjoint of im2col).
fn col2im_acc<F: Elem>(cols: &[F], d: &ConvDims, oh: usize, ow: usize, x: &mut [F]) {
    let ohow = oh * ow;
    for ci in 0..d.cin {
        for ki in 0..d.kh {
            for kj in 0..d.kw {
                let row = (ci * d.kh + ki) * d.kw + kj;
                let src = &cols[row * ohow..(row + 1) * ohow];
                for oi in 0..oh {
                    let dst_base = (ci * d.h + oi * d.sh + ki) * d.w + kj;
                    let src_base = oi * ow;
                    for oj in 0..ow {
                        x[dst_base + oj * d.sw] = x[dst_base + oj * d.sw] + src[src_base + oj];
                    }
                }
            }
        }
    }
}

fn check_len<F: Elem>(name: &str, buf: &[F], want: usize) -> Result<()> {
    if buf.len() != want {
        return Err(Error::Shape(format!("{name}: buffer has {} elements, expected {want}", buf.len())));
    }
    Ok(())
}

/// Parallelize over batch only when there is enough work to amortize it.
fn batch_par(batch: usize, flops_per_item: usize) -> bool {
    batch > 1 && flops_per_item >= (1 << 16)
}

/// Valid strided cross-correlation. `x (b,cin,h,w)`, `w (cout,cin,kh,kw)`
/// -> `(b,cout,oh,ow)`.
pub fn conv2d_fwd<F: Elem>(x: &[F], wgt: &[F], d: &ConvDims) -> Result<Vec<F>> {
    let (oh, ow) = d.out_hw()?;
    let ckk = d.ckk();
    let ohow = oh * ow;
    check_len("conv2d_fwd x", x, d.batch * d.cin * d.h * d.w)?;
    check_len("conv2d_fwd w", wgt, d.cout * ckk)?;
    let in_per_b = d.cin * d.h * d.w;
    let out_per_b = d.cout * ohow;
    let mut y = vec![F::zero(); d.batch * out_per_b];

    let run = |b: usize, y_b: &mut [F]| {
        let mut cols = vec![F::zero(); ckk * ohow];
        im2col(&x[b * in_per_b..(b + 1) * in_per_b], d, oh, ow, &mut cols);
        unsafe {
            F::gemm(
                d.cout, ckk, ohow,
                F::one(),
                wgt.as_ptr(), ckk as isize, 1,
                cols.as_ptr(), ohow as isize, 1,
                F::zero(),
                y_b.as_mut_ptr(), ohow as isize, 1,
            );
        }
    };

    if batch_par(d.batch, d.cout * ohow * ckk) {
        y.par_chunks_mut(out_per_b).enumerate().for_each(|(b, y_b)| run(b, y_b));
    } else {
        for (b, y_b) in y.chunks_mut(out_per_b).enumerate() {
            run(b, y_b);
        }
    }
    Ok(y)
}

/// Input-gradient adjoint: `dy (b,cout,oh,ow)` against the same kernel
/// produces `dx (b,cin,h,w)` with `<y, fwd(x,w)> = <x, dx(y,w)>`.
pub fn conv2d_dx<F: Elem>(dy: &[F], wgt: &[F], d: &ConvDims) -> Result<Vec<F>> {
    let (oh, ow) = d.out_hw()?;
    let ckk = d.ckk();
    let ohow = oh * ow;
    check_len("conv2d_dx dy", dy, d.batch * d.cout * ohow)?;
    check_len("conv2d_dx w", wgt, d.cout * ckk)?;
    let in_per_b = d.cin * d.h * d.w;
    let out_per_b = d.cout * ohow;
    let mut dx = vec![F::zero(); d.batch * in_per_b];

    let run = |b: usize, dx_b: &mut [F]| {
        let mut cols = vec![F::zero(); ckk * ohow];
        // cols = W^T . dy_b, with the transpose expressed via strides.
        unsafe {
            F::gemm(
                ckk, d.cout, ohow,
                F::one(),
                wgt.as_ptr(), 1, ckk as isize,
                dy[b * out_per_b..].as_ptr(), ohow as isize, 1,
                F::zero(),
                cols.as_mut_ptr(), ohow as isize, 1,
            );
        }
        col2im_acc(&cols, d, oh, ow, dx_b);
    };

    if batch_par(d.batch, d.cout * ohow * ckk) {
        dx.par_chunks_mut(in_per_b).enumerate().for_each(|(b, dx_b)| run(b, dx_b));
    } else {
        for (b, dx_b) in dx.chunks_mut(in_per_b).enumerate() {
            run(b, dx_b);
        }
    }
    Ok(dx)
}

/// Kernel-gradient adjoint: accumulates `dw (cout,cin,kh,kw)` over the batch
/// with `<y, fwd(x,w)> = <w, dw(x,y)>`. Batch accumulation is sequential so
/// the result does not depend on thread count.
pub fn conv2d_dw<F: Elem>(x: &[F], dy: &[F], d: &ConvDims) -> Result<Vec<F>> {
    let (oh, ow) = d.out_hw()?;
    let ckk = d.ckk();
    let ohow = oh * ow;
    check_len("conv2d_dw x", x, d.batch * d.cin * d.h * d.w)?;
    check_len("conv2d_dw dy", dy, d.batch * d.cout * ohow)?;
    let in_per_b = d.cin * d.h * d.w;
    let out_per_b = d.cout * ohow;
    let mut dw = vec![F::zero(); d.cout * ckk];
    let mut cols = vec![F::zero(); ckk * ohow];
    for b in 0..d.batch {
        im2col(&x[b * in_per_b..(b + 1) * in_per_b], d, oh, ow, &mut cols);
        // dw += dy_b (cout, ohow) . cols^T (ohow, ckk)
        unsafe {
            F::gemm(
                d.cout, ohow, ckk,
                F::one(),
                dy[b * out_per_b..].as_ptr(), ohow as isize, 1,
                cols.as_ptr(), 1, ohow as isize,
                F::one(),
                dw.as_mut_ptr(), ckk as isize, 1,
            );
        }
    }
    Ok(dw)
}

/// Zero-pad the spatial dims of `(b,c,h,w)`: `pad = (top, bottom, left,
/// right)`.
pub fn pad2d<F: Elem>(x: &[F], b: usize, c: usize, h: usize, w: usize, pad: (usize, usize, usize, usize)) -> Vec<F> {
    let (pt, pb, pl, pr) = pad;
    let (nh, nw) = (h + pt + pb, w + pl + pr);
    let mut out = vec![F::zero(); b * c * nh * nw];
    for bc in 0..b * c {
        for i in 0..h {
            let src = &x[(bc * h + i) * w..(bc * h + i) * w + w];
            let dst_row = (bc * nh + i + pt) * nw + pl;
            out[dst_row..dst_row + w].copy_from_slice(src);
        }
    }
    out
}

/// Remove a border from the spatial dims (adjoint of `pad2d`): `crop =
/// (top, bottom, left, right)` amounts removed.
pub fn crop2d<F: Elem>(x: &[F], b: usize, c: usize, h: usize, w: usize, crop: (usize, usize, usize, usize)) -> Vec<F> {
    let (ct, cb, cl, cr) = crop;
    let (nh, nw) = (h - ct - cb, w - cl - cr);
    let mut out = vec![F::zero(); b * c * nh * nw];
    for bc in 0..b * c {
        for i in 0..nh {
            let src_row = (bc * h + i + ct) * w + cl;
            let dst_row = (bc * nh + i) * nw;
            out[dst_row..dst_row + nw].copy_from_slice(&x[src_row..src_row + nw]);
        }
    }
    out
}

/// Nearest-neighbor 2x spatial upsample of `(b,c,h,w)`.
pub fn upsample2x<F: Elem>(x: &[F], b: usize, c: usize, h: usize, w: usize) -> Vec<F> {
    let (nh, nw) = (2 * h, 2 * w);
    let mut out = vec![F::zero(); b * c * nh * nw];
    for bc in 0..b * c {
        for i in 0..h {
            let src = &x[(bc * h + i) * w..(bc * h + i) * w + w];
            for di in 0..2 {
                let dst_row = (bc * nh + 2 * i + di) * nw;
                for j in 0..w {
                    out[dst_row + 2 * j] = src[j];
                    out[dst_row + 2 * j + 1] = src[j];
                }
            }
        }
    }
    out
}

/// 2x2 sum pooling (adjoint of `upsample2x`). Requires even h, w.
pub fn sumpool2x<F: Elem>(x: &[F], b: usize, c: usize, h: usize, w: usize) -> Result<Vec<F>> {
    if !h.is_multiple_of(2) || !w.is_multiple_of(2) {
        return Err(Error::Shape(format!("sumpool2x needs even spatial dims, got ({h}, {w})")));
    }
    let (nh, nw) = (h / 2, w / 2);
    let mut out = vec![F::zero(); b * c * nh * nw];
    for bc in 0..b * c {
        for i in 0..nh {
            let r0 = (bc * h + 2 * i) * w;
            let r1 = r0 + w;
            let dst_row = (bc * nh + i) * nw;
            for j in 0..nw {
                out[dst_row + j] = x[r0 + 2 * j] + x[r0 + 2 * j + 1] + x[r1 + 2 * j] + x[r1 + 2 * j + 1];
            }
        }
    }
    Ok(out)
}

/// 2x2 average pooling (sum pooling scaled by 1/4). Used for building image
/// pyramids outside the tape.
pub fn avgpool2x<F: Elem>(x: &[F], b: usize, c: usize, h: usize, w: usize) -> Result<Vec<F>> {
    let mut out = sumpool2x(x, b, c, h, w)?;
    let q = F::c(0.25);
    for v in &mut out {
        *v = *v * q;
    }
    Ok(out)
}
