use trajgan::backbone::Backbone;
use trajgan::data::{Dataset, DatasetSpec};
use trajgan::rng::{stream, Rng};
use trajgan::tensor::Tensor;
use trajgan::trainer::real_feature_videos;
use trajgan::video_disc::{VideoDiscriminator, CLIP_FRAMES};

fn main() {
    let seeds: Vec<u64> = std::env::args().skip(1).filter_map(|s| s.parse().ok()).collect();
    let seeds = if seeds.is_empty() { vec![1, 2, 3, 4, 5] } else { seeds };
    let n = CLIP_FRAMES;
    let fdim = 512;

    for &seed in &seeds {
        let spec = DatasetSpec::default();
        let dataset = Dataset::synthesize(&spec, seed).unwrap();
        let path = std::path::PathBuf::from(format!("/tmp/bench_seed{seed}.ckpt"));
        let ck = trajgan::checkpoint::Checkpoint::read(&path).unwrap();
        let bb = Backbone::<f32>::from_checkpoint(&ck).unwrap();
        let disc =
            VideoDiscriminator::<f32>::from_role(ck.require_role(trajgan::video_disc::ROLE).unwrap()).unwrap();

        let k = dataset.videos.len();
        let stride = 4usize;
        let starts: Vec<usize> = (0..=(spec.n_frames - n)).step_by(stride).collect();
        let mut clips = Vec::with_capacity(k * starts.len());
        for v in 0..k {
            for &s in &starts {
                clips.push(dataset.clip(v, s, n).unwrap());
            }
        }
        let fv = real_feature_videos(&bb.critic, &clips).unwrap();
        let m = clips.len();
        let score = |t: &Tensor<f32>| -> Vec<f64> {
            disc.score(t).unwrap().data().iter().map(|&x| x as f64).collect()
        };
        let s_ord = score(&fv);
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;

        let mut rng = Rng::stream(seed, stream::EVAL);
        let perms = 3usize;
        let mut diffs = Vec::with_capacity(m * perms);
        let mut s_perm_all = Vec::with_capacity(m * perms);
        for rep in 0..perms {
            let mut pd = fv.data().to_vec();
            for c in 0..m {
                let mut order: Vec<usize> = (0..n).collect();
                rng.shuffle(&mut order);
                let base = c * n * fdim;
                let orig: Vec<f32> = pd[base..base + n * fdim].to_vec();
                for (row, &f) in order.iter().enumerate() {
                    pd[base + row * fdim..base + (row + 1) * fdim].copy_from_slice(&orig[f * fdim..(f + 1) * fdim]);
                }
            }
            let s_perm = score(&Tensor::new(&[m, 1, n, fdim], pd).unwrap());
            for i in 0..m {
                diffs.push(s_ord[i] - s_perm[i]);
            }
            s_perm_all.extend_from_slice(&s_perm);
            let _ = rep;
        }
        let md = mean(&diffs);
        let var = diffs.iter().map(|d| (d - md) * (d - md)).sum::<f64>() / (diffs.len() - 1) as f64;
        let se = (var / diffs.len() as f64).sqrt();
        println!(
            "seed {seed}: pairs {:>5}  D(ord) {:.4}  D(perm) {:.4}  mean diff {:+.5}  se {:.5}  z {:+.1}",
            diffs.len(),
            mean(&s_ord),
            mean(&s_perm_all),
            md,
            se,
            md / se
        );
    }
}
