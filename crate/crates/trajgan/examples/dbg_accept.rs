use std::time::Instant;

use trajgan::metrics::{frechet_distance, inception_score, newton_schulz_cross_trace, GaussianStats};
use trajgan::rng::Rng;
use trajgan::tensor::Tensor;

fn random_spd(d: usize, rng: &mut Rng) -> Vec<f64> {
    let scale = 1.0 / (d as f64).sqrt();
    let m: Vec<f64> = (0..d * d).map(|_| rng.normal() * scale).collect();
    let mut a = vec![0f64; d * d];
    for i in 0..d {
        for j in 0..d {
            let mut s = 0.0;
            for k in 0..d {
                s += m[i * d + k] * m[j * d + k];
            }
            a[i * d + j] = s + if i == j { 0.05 } else { 0.0 };
        }
    }
    a
}

fn main() {
    let t0 = Instant::now();
    let mut rng = Rng::seeded(9);

    let mut self_worst = 0f64;
    for _ in 0..5 {
        let d = 2 + rng.below(15);
        let n = d + 2 + rng.below(20);
        let rows: Vec<f64> = (0..n * d).map(|_| rng.normal()).collect();
        let s = GaussianStats::fit_rows(&rows, n, d).unwrap();
        self_worst = self_worst.max(frechet_distance(&s, &s).unwrap());
    }
    println!("self {self_worst:.3e} (<1e-8: {})", self_worst < 1e-8);

    let mut oned_worst = 0f64;
    for _ in 0..20 {
        let (m1, m2) = (rng.normal() * 3.0, rng.normal() * 3.0);
        let (s1, s2) = (rng.uniform(0.2, 2.0), rng.uniform(0.2, 2.0));
        let a = GaussianStats { dim: 1, count: 10, mean: vec![m1], cov: vec![s1 * s1] };
        let b = GaussianStats { dim: 1, count: 10, mean: vec![m2], cov: vec![s2 * s2] };
        let want = (m1 - m2).powi(2) + (s1 - s2).powi(2);
        oned_worst = oned_worst.max((frechet_distance(&a, &b).unwrap() - want).abs());
    }
    println!("1-d {oned_worst:.3e} (<1e-8: {})", oned_worst < 1e-8);

    let mut eqcov_worst = 0f64;
    for _ in 0..20 {
        let d = 2 + rng.below(10);
        let cov = random_spd(d, &mut rng);
        let mu1: Vec<f64> = (0..d).map(|_| rng.normal()).collect();
        let mu2: Vec<f64> = (0..d).map(|_| rng.normal()).collect();
        let want: f64 = (0..d).map(|i| (mu1[i] - mu2[i]).powi(2)).sum();
        let a = GaussianStats { dim: d, count: 10, mean: mu1, cov: cov.clone() };
        let b = GaussianStats { dim: d, count: 10, mean: mu2, cov };
        eqcov_worst = eqcov_worst.max((frechet_distance(&a, &b).unwrap() - want).abs());
    }
    println!("equal-cov {eqcov_worst:.3e} (<1e-8: {})", eqcov_worst < 1e-8);

    let mut route_worst = 0f64;
    let mut worst_d = 0;
    for _ in 0..100 {
        let d = 2 + rng.below(63);
        let a = GaussianStats {
            dim: d,
            count: 100,
            mean: (0..d).map(|_| rng.normal()).collect(),
            cov: random_spd(d, &mut rng),
        };
        let b = GaussianStats {
            dim: d,
            count: 100,
            mean: (0..d).map(|_| rng.normal()).collect(),
            cov: random_spd(d, &mut rng),
        };
        let eig = frechet_distance(&a, &b).unwrap();
        let mean_term: f64 = (0..d).map(|i| (a.mean[i] - b.mean[i]).powi(2)).sum();
        let ns = mean_term + a.trace() + b.trace() - 2.0 * newton_schulz_cross_trace(&a, &b, 120).unwrap();
        let rel = (eig - ns).abs() / eig.abs().max(1.0);
        if rel > route_worst {
            route_worst = rel;
            worst_d = d;
        }
    }
    println!("eig-vs-ns {route_worst:.3e} at d={worst_d} (<1e-6: {})", route_worst < 1e-6);
    println!("elapsed {:.1} s (<60: {})", t0.elapsed().as_secs_f64(), t0.elapsed().as_secs_f64() < 60.0);

    let splits = 5;
    let uniform = Tensor::new(&[50, 10], vec![0.1f32; 500]).unwrap();
    let (is_u, std_u) = inception_score(&uniform, splits).unwrap();
    println!("uniform IS {is_u:.9} +/- {std_u:.1e} (|1-IS|<1e-6: {})", (is_u - 1.0).abs() < 1e-6);
    for c in [2usize, 4, 10] {
        let n = c * splits * 2;
        let mut rows = vec![0f32; n * c];
        for i in 0..n {
            rows[i * c + i % c] = 1.0;
        }
        let (is_c, std_c) = inception_score(&Tensor::new(&[n, c], rows).unwrap(), splits).unwrap();
        println!("one-hot C={c}: IS {is_c:.6} +/- {std_c:.1e} (|C-IS|<1e-4: {})", (is_c - c as f64).abs() < 1e-4);
    }
}
