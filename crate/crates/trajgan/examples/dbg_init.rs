use trajgan::backbone::Backbone;
use trajgan::data::{Dataset, DatasetSpec};
use trajgan::metrics::{frechet_distance, video_embedding, GaussianStats};
use trajgan::plugin::PluginNet;
use trajgan::probe::{train_probe, Probe, ProbeConfig, ProbeTrainConfig};
use trajgan::rng::{stream, Rng};
use trajgan::tensor::Tensor;
use trajgan::trainer::CompositeGenerator;
use trajgan::video_disc::CLIP_FRAMES;

fn fit(rows: &[Vec<f64>]) -> GaussianStats {
    let d = rows[0].len();
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    GaussianStats::fit_rows(&flat, rows.len(), d).unwrap()
}

fn main() {
    let seed: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1);
    let spec = DatasetSpec::default();
    let dataset = Dataset::synthesize(&spec, seed).unwrap();

    let cache = std::path::PathBuf::from(format!("/tmp/bench_seed{seed}.ckpt"));
    let ck = trajgan::checkpoint::Checkpoint::read(&cache).unwrap();
    let bb = Backbone::<f32>::from_checkpoint(&ck).unwrap();

    let mut probe = Probe::<f32>::new(seed, &ProbeConfig { resolution: spec.resolution, classes: 2 }).unwrap();
    let report = train_probe(&mut probe, &dataset, &ProbeTrainConfig::default(), seed).unwrap();
    println!("probe acc {:.3}", report.accuracy);

    let mut rng = Rng::stream(seed, stream::EVAL);
    let n = CLIP_FRAMES;
    let k = dataset.videos.len();

    let mut real_clips = Vec::with_capacity(k);
    for v in 0..k {
        let start = rng.below(spec.n_frames - n + 1);
        real_clips.push(dataset.clip(v, start, n).unwrap());
    }
    let mut shuf_clips = Vec::with_capacity(k);
    for c in &real_clips {
        let res = spec.resolution;
        let px = res * res;
        let mut order: Vec<usize> = (0..n).collect();
        rng.shuffle(&mut order);
        let mut d = Vec::with_capacity(n * px);
        for &f in &order {
            d.extend_from_slice(&c.data()[f * px..(f + 1) * px]);
        }
        shuf_clips.push(Tensor::new(&[n, 1, res, res], d).unwrap());
    }

    let emb = |clips: &[Tensor<f32>]| -> Vec<Vec<f64>> {
        clips
            .iter()
            .map(|c| video_embedding(&probe.features(c).unwrap()).unwrap())
            .collect()
    };
    let e_real = emb(&real_clips);
    let e_shuf = emb(&shuf_clips);
    let d = e_real[0].len() / 2;

    let mag = |rows: &[Vec<f64>], lo: usize, hi: usize| -> f64 {
        let mut s = 0.0;
        let mut c = 0usize;
        for r in rows {
            for &v in &r[lo..hi] {
                s += v.abs();
                c += 1;
            }
        }
        s / c as f64
    };
    let fd_half = |a: &[Vec<f64>], b: &[Vec<f64>], lo: usize, hi: usize| -> f64 {
        let ha: Vec<Vec<f64>> = a.iter().map(|r| r[lo..hi].to_vec()).collect();
        let hb: Vec<Vec<f64>> = b.iter().map(|r| r[lo..hi].to_vec()).collect();
        frechet_distance(&fit(&ha), &fit(&hb)).unwrap()
    };
    let fvd_shuf = fd_half(&e_real, &e_shuf, 0, 2 * d);
    println!(
        "real: app {:.4} motion {:.4}   shuf motion {:.4}  fvd shuf {:.4}",
        mag(&e_real, 0, d),
        mag(&e_real, d, 2 * d),
        mag(&e_shuf, d, 2 * d),
        fvd_shuf
    );

    for s in [0.15f32, 0.25, 0.35, 0.5, 0.75, 1.0] {
        let mut plugin = PluginNet::<f32>::new(seed);
        for i in 0..plugin.params.len() {
            let p = plugin.params.get_mut(i);
            if !p.name.ends_with(".w") {
                continue;
            }
            let shape = p.tensor.shape().to_vec();
            let (rows, cols) = (shape[0], shape[1]);
            for v in &mut p.tensor.data_mut()[(rows - 1) * cols..] {
                *v *= s;
            }
        }
        let composite = CompositeGenerator { plugin: &plugin, generator: &bb.gen, critic: &bb.critic };
        let mut gen_clips = Vec::with_capacity(k);
        for i in 0..k {
            gen_clips.push(composite.sample_video(seed ^ (i as u64) << 16, n).unwrap().frames);
        }
        let e_gen = emb(&gen_clips);
        let app = fd_half(&e_real, &e_gen, 0, d);
        let mot = fd_half(&e_real, &e_gen, d, 2 * d);
        let full = fd_half(&e_real, &e_gen, 0, 2 * d);
        println!(
            "s {s:>4}: motion gen {:.4}  app fvd {:>8.4}  motion fvd {:>8.4}  full {:>8.4}  pass={}",
            mag(&e_gen, d, 2 * d),
            app,
            mot,
            full,
            full < fvd_shuf
        );
    }
}
