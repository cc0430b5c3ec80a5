//! Distribution metrics over feature embeddings.
//!
//! Everything here is dimension-generic f64 numerics: callers embed their
//! samples (critic features for frames, mean/motion stacks for videos,
//! classifier probabilities for the inception score) and this module
//! compares the resulting point clouds.
//!
//! The Fréchet distance between fitted Gaussians is computed two
//! independent ways. The production path ([`frechet_distance`])
//! eigendecomposes symmetric matrices with nalgebra. The reference path
//! ([`newton_schulz_sqrt`]) iterates the Newton-Schulz recurrence with
//! naive triple-loop matmuls and no linear-algebra dependency, and is
//! kept public so tests can check the two routes against each other:
//! `tr sqrt(cov_a cov_b) = tr sqrt(sqrt(cov_a) cov_b sqrt(cov_a))`.

use nalgebra::{DMatrix, DVector};

use crate::tensor::{Elem, Tensor};
use crate::{Error, Result};

/// Diagonal loading applied when there are at most as many samples as
/// dimensions (the sample covariance is then guaranteed singular).
pub const COV_RIDGE: f64 = 1e-6;

/// Sample mean and covariance of a feature cloud.
#[derive(Clone, Debug)]
pub struct GaussianStats {
    pub dim: usize,
    pub count: usize,
    pub mean: Vec<f64>,
    /// Row-major `dim x dim`, exactly symmetric, `count - 1` denominator.
    pub cov: Vec<f64>,
}

impl GaussianStats {
    /// Fit from a `(n, d)` feature matrix, accumulating in f64.
    pub fn fit<F: Elem>(feats: &Tensor<F>) -> Result<Self> {
        let &[n, d] = feats.shape() else {
            return Err(Error::Shape(format!("expected (n, d) features, got {:?}", feats.shape())));
        };
        let rows: Vec<f64> = feats.data().iter().map(|&x| x.to_f64()).collect();
        Self::fit_rows(&rows, n, d)
    }

    pub fn fit_rows(rows: &[f64], n: usize, d: usize) -> Result<Self> {
        if rows.len() != n * d {
            return Err(Error::Shape(format!("feature buffer holds {} values, want {n}x{d}", rows.len())));
        }
        if n < 2 {
            return Err(Error::Contract(format!("covariance needs at least 2 samples, got {n}")));
        }
        if rows.iter().any(|x| !x.is_finite()) {
            return Err(Error::Numeric("features contain a non-finite value".into()));
        }
        let mut mean = vec![0f64; d];
        for i in 0..n {
            for j in 0..d {
                mean[j] += rows[i * d + j];
            }
        }
        for m in &mut mean {
            *m /= n as f64;
        }
        // Upper triangle of sum (x - mean)(x - mean)', mirrored, so the
        // matrix is symmetric to the bit.
        let mut cov = vec![0f64; d * d];
        let mut centered = vec![0f64; d];
        for i in 0..n {
            for j in 0..d {
                centered[j] = rows[i * d + j] - mean[j];
            }
            for a in 0..d {
                for b in a..d {
                    cov[a * d + b] += centered[a] * centered[b];
                }
            }
        }
        let denom = (n - 1) as f64;
        for a in 0..d {
            for b in a..d {
                cov[a * d + b] /= denom;
                cov[b * d + a] = cov[a * d + b];
            }
        }
        if n <= d {
            for a in 0..d {
                cov[a * d + a] += COV_RIDGE;
            }
        }
        Ok(GaussianStats { dim: d, count: n, mean, cov })
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.cov[i * self.dim + i]).sum()
    }
}

fn dmatrix(m: &[f64], d: usize) -> DMatrix<f64> {
    DMatrix::from_row_slice(d, d, m)
}

/// Symmetric PSD square root via eigendecomposition, clamping small
/// negative eigenvalues (rounding artifacts) to zero.
fn psd_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = m.clone().symmetric_eigen();
    let roots = DVector::from_iterator(
        eig.eigenvalues.len(),
        eig.eigenvalues.iter().map(|&l| l.max(0.0).sqrt()),
    );
    &eig.eigenvectors * DMatrix::from_diagonal(&roots) * eig.eigenvectors.transpose()
}

/// Fréchet distance between two Gaussians:
/// `|mu_a - mu_b|^2 + tr(cov_a) + tr(cov_b) - 2 tr sqrt(sqrt(cov_a) cov_b
/// sqrt(cov_a))`, clamped at zero against rounding.
pub fn frechet_distance(a: &GaussianStats, b: &GaussianStats) -> Result<f64> {
    if a.dim != b.dim {
        return Err(Error::Shape(format!("gaussian dims differ: {} vs {}", a.dim, b.dim)));
    }
    let d = a.dim;
    let mean_term: f64 = (0..d).map(|i| (a.mean[i] - b.mean[i]).powi(2)).sum();
    let ca = dmatrix(&a.cov, d);
    let cb = dmatrix(&b.cov, d);
    let sa = psd_sqrt(&ca);
    let inner = &sa * &cb * &sa;
    let inner = (&inner + inner.transpose()) * 0.5;
    let tr_sqrt: f64 = inner.symmetric_eigen().eigenvalues.iter().map(|&l| l.max(0.0).sqrt()).sum();
    let fd = mean_term + a.trace() + b.trace() - 2.0 * tr_sqrt;
    if !fd.is_finite() {
        return Err(Error::Numeric(format!("Fréchet distance is not finite ({fd})")));
    }
    Ok(fd.max(0.0))
}

/// Fréchet distance between the Gaussians fitted to two `(n, d)` feature
/// matrices (the frame-level quality score when `d` is the critic
/// feature width).
pub fn fid<F: Elem>(real: &Tensor<F>, generated: &Tensor<F>) -> Result<f64> {
    frechet_distance(&GaussianStats::fit(real)?, &GaussianStats::fit(generated)?)
}

/// Naive row-major `d x d` matmul, deliberately dependency-free: the
/// reference square root must not share code with the production path.
fn matmul_naive(a: &[f64], b: &[f64], d: usize) -> Vec<f64> {
    let mut c = vec![0f64; d * d];
    for i in 0..d {
        for k in 0..d {
            let aik = a[i * d + k];
            if aik == 0.0 {
                continue;
            }
            let (crow, brow) = (&mut c[i * d..(i + 1) * d], &b[k * d..(k + 1) * d]);
            for j in 0..d {
                crow[j] += aik * brow[j];
            }
        }
    }
    c
}

pub fn trace_of(m: &[f64], d: usize) -> f64 {
    (0..d).map(|i| m[i * d + i]).sum()
}

/// Result of the Newton-Schulz iteration: the square root estimate and
/// its relative reconstruction error `|YY - A|_F / |A|_F`.
#[derive(Clone, Debug)]
pub struct NsSqrt {
    pub sqrt: Vec<f64>,
    pub residual: f64,
}

/// Newton-Schulz matrix square root, the reference route.
///
/// Scales `A` by its Frobenius norm, then iterates `T = (3I - Z Y)/2;
/// Y <- Y T; Z <- T Z` from `Y = A/s, Z = I`. Converges for any matrix
/// with real nonnegative spectrum and no defective zero eigenvalues,
/// which covers both SPD matrices and products of two SPD matrices.
pub fn newton_schulz_sqrt(a: &[f64], d: usize, iters: usize) -> Result<NsSqrt> {
    if a.len() != d * d {
        return Err(Error::Shape(format!("matrix buffer holds {} values, want {d}x{d}", a.len())));
    }
    if iters == 0 {
        return Err(Error::Contract("Newton-Schulz needs at least one iteration".into()));
    }
    if a.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numeric("Newton-Schulz input is not finite".into()));
    }
    let norm = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Ok(NsSqrt { sqrt: vec![0.0; d * d], residual: 0.0 });
    }
    let mut y: Vec<f64> = a.iter().map(|x| x / norm).collect();
    let mut z = vec![0f64; d * d];
    for i in 0..d {
        z[i * d + i] = 1.0;
    }
    for _ in 0..iters {
        let zy = matmul_naive(&z, &y, d);
        let mut t = vec![0f64; d * d];
        for i in 0..d {
            for j in 0..d {
                let three_i = if i == j { 3.0 } else { 0.0 };
                t[i * d + j] = 0.5 * (three_i - zy[i * d + j]);
            }
        }
        y = matmul_naive(&y, &t, d);
        z = matmul_naive(&t, &z, d);
    }
    let scale = norm.sqrt();
    let sqrt: Vec<f64> = y.iter().map(|x| x * scale).collect();
    let yy = matmul_naive(&sqrt, &sqrt, d);
    let mut err = 0f64;
    for i in 0..d * d {
        err += (yy[i] - a[i]).powi(2);
    }
    let residual = err.sqrt() / norm;
    if !residual.is_finite() {
        return Err(Error::Numeric("Newton-Schulz iteration diverged".into()));
    }
    Ok(NsSqrt { sqrt, residual })
}

/// Reference value of `tr sqrt(cov_a cov_b)`, the cross term of the
/// Fréchet distance, computed on the plain (non-symmetrized) product.
pub fn newton_schulz_cross_trace(a: &GaussianStats, b: &GaussianStats, iters: usize) -> Result<f64> {
    if a.dim != b.dim {
        return Err(Error::Shape(format!("gaussian dims differ: {} vs {}", a.dim, b.dim)));
    }
    let prod = matmul_naive(&a.cov, &b.cov, a.dim);
    let ns = newton_schulz_sqrt(&prod, a.dim, iters)?;
    Ok(trace_of(&ns.sqrt, a.dim))
}

/// Weight of the motion half of [`video_embedding`]. Per-step feature
/// changes of smooth video run an order of magnitude smaller than the
/// feature means they ride on; unscaled, the Fréchet geometry would be
/// all appearance and nearly blind to frame order. The constant brings
/// the two halves to comparable magnitude, leaning slightly toward
/// motion as video-native feature extractors do.
pub const MOTION_SCALE: f64 = 8.0;

/// Per-video embedding for the video-level Fréchet score: the mean
/// per-frame feature stacked with the mean absolute consecutive-frame
/// feature difference scaled by [`MOTION_SCALE`], so both appearance and
/// motion enter the distribution. The motion half averages
/// `|f[i+1] - f[i]|` elementwise over the n-1 steps; a signed mean would
/// telescope to `(f[n-1] - f[0]) / (n-1)` and barely react to frame
/// order, while the per-step magnitude grows sharply when frames are
/// shuffled. `feats` is one video's `(n, d)` feature matrix, `n >= 2`.
pub fn video_embedding<F: Elem>(feats: &Tensor<F>) -> Result<Vec<f64>> {
    let &[n, d] = feats.shape() else {
        return Err(Error::Shape(format!("expected (n, d) per-frame features, got {:?}", feats.shape())));
    };
    if n < 2 {
        return Err(Error::Contract(format!("video embedding needs at least 2 frames, got {n}")));
    }
    let rows: Vec<f64> = feats.data().iter().map(|&x| x.to_f64()).collect();
    let mut emb = vec![0f64; 2 * d];
    for i in 0..n {
        for j in 0..d {
            emb[j] += rows[i * d + j] / n as f64;
        }
    }
    for i in 1..n {
        for j in 0..d {
            emb[d + j] += MOTION_SCALE * (rows[i * d + j] - rows[(i - 1) * d + j]).abs() / (n - 1) as f64;
        }
    }
    Ok(emb)
}

/// Video-level Fréchet distance between two collections of per-frame
/// feature matrices (each `(n, d)`), embedded with [`video_embedding`].
pub fn fvd_proxy<F: Elem>(real: &[Tensor<F>], generated: &[Tensor<F>]) -> Result<f64> {
    let embed = |vids: &[Tensor<F>], which: &str| -> Result<(Vec<f64>, usize, usize)> {
        if vids.len() < 2 {
            return Err(Error::Contract(format!("{which}: need at least 2 videos, got {}", vids.len())));
        }
        let mut rows = Vec::new();
        let mut dim = None;
        for v in vids {
            let e = video_embedding(v)?;
            match dim {
                None => dim = Some(e.len()),
                Some(d) if d == e.len() => {}
                Some(d) => {
                    return Err(Error::Shape(format!(
                        "{which}: inconsistent embedding widths {d} vs {}",
                        e.len()
                    )))
                }
            }
            rows.extend(e);
        }
        let d = dim.expect("at least two videos");
        Ok((rows, vids.len(), d))
    };
    let (ra, na, da) = embed(real, "real videos")?;
    let (rb, nb, db) = embed(generated, "generated videos")?;
    if da != db {
        return Err(Error::Shape(format!("embedding widths differ: {da} vs {db}")));
    }
    frechet_distance(&GaussianStats::fit_rows(&ra, na, da)?, &GaussianStats::fit_rows(&rb, nb, db)?)
}

/// Inception score of classifier probabilities `(n, k)`: the exponential
/// of the mean KL divergence between per-sample and marginal class
/// distributions, averaged over `splits` equal parts. Returns
/// `(mean, std)` across splits; lies in `[1, k]`.
pub fn inception_score<F: Elem>(probs: &Tensor<F>, splits: usize) -> Result<(f64, f64)> {
    let &[n, k] = probs.shape() else {
        return Err(Error::Shape(format!("expected (n, k) probabilities, got {:?}", probs.shape())));
    };
    if splits == 0 || n < splits {
        return Err(Error::Contract(format!("{splits} splits do not fit {n} samples")));
    }
    let rows: Vec<f64> = probs.data().iter().map(|&x| x.to_f64()).collect();
    for i in 0..n {
        let row = &rows[i * k..(i + 1) * k];
        if row.iter().any(|&p| !(0.0..=1.0 + 1e-6).contains(&p)) {
            return Err(Error::Contract(format!("row {i} is not a probability vector: {row:?}")));
        }
        let s: f64 = row.iter().sum();
        if (s - 1.0).abs() > 1e-4 {
            return Err(Error::Contract(format!("row {i} sums to {s}, not 1")));
        }
    }
    let mut scores = Vec::with_capacity(splits);
    for s in 0..splits {
        let lo = s * n / splits;
        let hi = (s + 1) * n / splits;
        let m = hi - lo;
        let mut marginal = vec![0f64; k];
        for i in lo..hi {
            for j in 0..k {
                marginal[j] += rows[i * k + j] / m as f64;
            }
        }
        let mut mean_kl = 0f64;
        for i in lo..hi {
            let mut kl = 0f64;
            for j in 0..k {
                let p = rows[i * k + j];
                if p > 0.0 && marginal[j] > 0.0 {
                    kl += p * (p.ln() - marginal[j].ln());
                }
            }
            mean_kl += kl / m as f64;
        }
        scores.push(mean_kl.exp());
    }
    let mean = scores.iter().sum::<f64>() / splits as f64;
    let var = scores.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / splits as f64;
    Ok((mean, var.sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    fn random_spd(d: usize, rng: &mut Rng) -> Vec<f64> {
        let mut r = vec![0f64; d * d];
        for x in &mut r {
            *x = rng.normal();
        }
        let mut a = matmul_naive(&r, &transpose(&r, d), d);
        for i in 0..d {
            a[i * d + i] += 0.5;
        }
        a
    }

    fn transpose(m: &[f64], d: usize) -> Vec<f64> {
        let mut t = vec![0f64; d * d];
        for i in 0..d {
            for j in 0..d {
                t[j * d + i] = m[i * d + j];
            }
        }
        t
    }

    #[test]
    fn gaussian_fit_matches_hand_computation() {
        let feats = Tensor::new(&[3, 2], vec![0f32, 0.0, 1.0, 1.0, 2.0, 2.0]).unwrap();
        let g = GaussianStats::fit(&feats).unwrap();
        assert_eq!(g.mean, vec![1.0, 1.0]);
        assert_eq!(g.cov, vec![1.0, 1.0, 1.0, 1.0]);
    }

    #[test]
    fn ridge_fires_only_when_underdetermined() {
        let under = Tensor::new(&[2, 2], vec![0f32, 0.0, 1.0, 1.0]).unwrap();
        let g = GaussianStats::fit(&under).unwrap();
        assert_eq!(g.cov[0], 0.5 + COV_RIDGE);
        let over = Tensor::new(&[3, 2], vec![0f32, 0.0, 1.0, 1.0, 2.0, 2.0]).unwrap();
        assert_eq!(GaussianStats::fit(&over).unwrap().cov[0], 1.0);
    }

    #[test]
    fn fit_rejects_degenerate_input() {
        assert!(GaussianStats::fit(&Tensor::new(&[1, 2], vec![0f32, 0.0]).unwrap()).is_err());
        assert!(GaussianStats::fit(&Tensor::new(&[2], vec![0f32, 0.0]).unwrap()).is_err());
        assert!(GaussianStats::fit_rows(&[0.0, f64::NAN, 0.0, 0.0], 2, 2).is_err());
    }

    #[test]
    fn identical_distributions_have_zero_distance() {
        let mut rng = Rng::seeded(1);
        let rows: Vec<f64> = (0..40).map(|_| rng.normal()).collect();
        let g = GaussianStats::fit_rows(&rows, 10, 4).unwrap();
        let fd = frechet_distance(&g, &g).unwrap();
        assert!(fd < 1e-9, "self distance {fd}");
    }

    #[test]
    fn diagonal_case_matches_the_closed_form() {
        // For diagonal covariances the distance is
        // |mu_a - mu_b|^2 + sum (sqrt(va) - sqrt(vb))^2.
        let a = GaussianStats { dim: 2, count: 100, mean: vec![0.0, 1.0], cov: vec![4.0, 0.0, 0.0, 9.0] };
        let b = GaussianStats { dim: 2, count: 100, mean: vec![1.0, -1.0], cov: vec![1.0, 0.0, 0.0, 25.0] };
        let expect = (1.0 + 4.0) + (2.0 - 1.0f64).powi(2) + (3.0 - 5.0f64).powi(2);
        let fd = frechet_distance(&a, &b).unwrap();
        assert!((fd - expect).abs() < 1e-9, "{fd} vs {expect}");
    }

    #[test]
    fn frechet_distance_is_symmetric() {
        let mut rng = Rng::seeded(2);
        let ra: Vec<f64> = (0..60).map(|_| rng.normal()).collect();
        let rb: Vec<f64> = (0..60).map(|_| rng.normal() * 2.0 + 0.5).collect();
        let a = GaussianStats::fit_rows(&ra, 20, 3).unwrap();
        let b = GaussianStats::fit_rows(&rb, 20, 3).unwrap();
        let ab = frechet_distance(&a, &b).unwrap();
        let ba = frechet_distance(&b, &a).unwrap();
        assert!((ab - ba).abs() < 1e-8);
        assert!(ab > 0.0);
    }

    #[test]
    fn newton_schulz_matches_a_known_square_root()
    {
        // diag(4, 9) has the obvious root diag(2, 3).
        let a = vec![4.0, 0.0, 0.0, 9.0];
        let ns = newton_schulz_sqrt(&a, 2, 60).unwrap();
        assert!(ns.residual < 1e-10);
        assert!((ns.sqrt[0] - 2.0).abs() < 1e-8);
        assert!((ns.sqrt[3] - 3.0).abs() < 1e-8);
        assert!(ns.sqrt[1].abs() < 1e-10 && ns.sqrt[2].abs() < 1e-10);
    }

    #[test]
    fn newton_schulz_squares_back_to_the_input() {
        let mut rng = Rng::seeded(3);
        for d in [2usize, 5, 9] {
            let a = random_spd(d, &mut rng);
            let ns = newton_schulz_sqrt(&a, d, 80).unwrap();
            assert!(ns.residual < 1e-8, "d={d} residual {}", ns.residual);
        }
    }

    #[test]
    fn eigen_and_newton_schulz_cross_traces_agree() {
        let mut rng = Rng::seeded(4);
        for d in [3usize, 6] {
            let ca = random_spd(d, &mut rng);
            let cb = random_spd(d, &mut rng);
            let a = GaussianStats { dim: d, count: 100, mean: vec![0.0; d], cov: ca };
            let b = GaussianStats { dim: d, count: 100, mean: vec![0.0; d], cov: cb };
            let ns = newton_schulz_cross_trace(&a, &b, 100).unwrap();
            // Recover the eigen route's cross trace from the distance.
            let fd = frechet_distance(&a, &b).unwrap();
            let eig = (a.trace() + b.trace() - fd) / 2.0;
            let rel = (ns - eig).abs() / eig.abs().max(1.0);
            assert!(rel < 1e-6, "d={d}: ns {ns} vs eigen {eig} (rel {rel:e})");
        }
    }

    #[test]
    fn inception_score_bounds_are_exact_at_one_split() {
        // Uniform rows: KL = 0, score exactly 1.
        let uniform = Tensor::new(&[4, 2], vec![0.5f32; 8]).unwrap();
        let (is, std) = inception_score(&uniform, 1).unwrap();
        assert!((is - 1.0).abs() < 1e-9);
        assert_eq!(std, 0.0);

        // Confident and balanced rows: score exactly k.
        let onehot = Tensor::new(&[4, 2], vec![1f32, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 1.0]).unwrap();
        let (is, _) = inception_score(&onehot, 1).unwrap();
        assert!((is - 2.0).abs() < 1e-9);

        // Random probability rows stay inside [1, k].
        let mut rng = Rng::seeded(5);
        let mut rows = Vec::new();
        for _ in 0..10 {
            let p = rng.uniform(0.01, 0.99);
            rows.push(p as f32);
            rows.push(1.0 - p as f32);
        }
        let t = Tensor::new(&[10, 2], rows).unwrap();
        let (is, _) = inception_score(&t, 1).unwrap();
        assert!((1.0..=2.0 + 1e-9).contains(&is), "score {is}");
    }

    #[test]
    fn inception_score_rejects_malformed_input() {
        let bad_sum = Tensor::new(&[1, 2], vec![0.9f32, 0.3]).unwrap();
        assert!(inception_score(&bad_sum, 1).is_err());
        let ok = Tensor::new(&[2, 2], vec![0.5f32; 4]).unwrap();
        assert!(inception_score(&ok, 3).is_err());
        assert!(inception_score(&ok, 0).is_err());
    }

    #[test]
    fn video_embedding_stacks_mean_and_motion() {
        let feats = Tensor::new(&[3, 2], vec![0f32, 0.0, 1.0, 2.0, 2.0, 4.0]).unwrap();
        let emb = video_embedding(&feats).unwrap();
        assert_eq!(emb, vec![1.0, 2.0, MOTION_SCALE, 2.0 * MOTION_SCALE]);
        let single = Tensor::new(&[1, 2], vec![0f32, 0.0]).unwrap();
        assert!(video_embedding(&single).is_err());
    }

    #[test]
    fn video_embedding_motion_term_does_not_telescope() {
        // Out-and-back: the signed step mean would collapse to zero and
        // call this video still; the per-step magnitude must not.
        let feats = Tensor::new(&[3, 2], vec![0f32, 0.0, 1.0, 2.0, 0.0, 0.0]).unwrap();
        let emb = video_embedding(&feats).unwrap();
        assert_eq!(&emb[2..], &[MOTION_SCALE, 2.0 * MOTION_SCALE]);
    }

    #[test]
    fn fvd_proxy_separates_still_from_moving() {
        let mut rng = Rng::seeded(6);
        let mut moving = Vec::new();
        let mut still = Vec::new();
        let mut moving_b = Vec::new();
        for _ in 0..8 {
            let base: Vec<f32> = (0..3).map(|_| rng.normal() as f32).collect();
            let mut make = |drift: f32| -> Tensor<f32> {
                let mut rows = Vec::new();
                for t in 0..4 {
                    for &bj in &base {
                        rows.push(bj + drift * t as f32 + rng.normal() as f32 * 0.01);
                    }
                }
                Tensor::new(&[4, 3], rows).unwrap()
            };
            moving.push(make(1.0));
            still.push(make(0.0));
            moving_b.push(make(1.0));
        }
        let near = fvd_proxy(&moving, &moving_b).unwrap();
        let far = fvd_proxy(&moving, &still).unwrap();
        assert!(far > near * 5.0, "far {far} vs near {near}");
    }
}
