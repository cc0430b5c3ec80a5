use trajgan::backbone::Backbone;
use trajgan::data::{Dataset, DatasetSpec};
use trajgan::metrics::{frechet_distance, video_embedding, GaussianStats};
use trajgan::plugin::PluginNet;
use trajgan::probe::{train_probe, Probe, ProbeConfig, ProbeTrainConfig};
use trajgan::rng::{stream, Rng};
use trajgan::tensor::Tensor;
use trajgan::trainer::CompositeGenerator;
use trajgan::video_disc::{VideoDiscriminator, CLIP_FRAMES};

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
    let plugin = PluginNet::from_role(ck.require_role(trajgan::plugin::ROLE).unwrap()).unwrap();
    let _disc = VideoDiscriminator::<f32>::from_role(ck.require_role(trajgan::video_disc::ROLE).unwrap()).unwrap();

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
    let composite = CompositeGenerator { plugin: &plugin, generator: &bb.gen, critic: &bb.critic };
    let mut gen_clips = Vec::with_capacity(k);
    for i in 0..k {
        gen_clips.push(composite.sample_video(seed ^ (i as u64) << 16, n).unwrap().frames);
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
    let e_gen = emb(&gen_clips);
    let e_shuf = emb(&shuf_clips);
    let d = e_real[0].len() / 2;

    let half = |rows: &[Vec<f64>], lo: usize, hi: usize| -> Vec<Vec<f64>> {
        rows.iter().map(|r| r[lo..hi].to_vec()).collect()
    };
    let app_r = half(&e_real, 0, d);
    let app_g = half(&e_gen, 0, d);
    let app_s = half(&e_shuf, 0, d);
    let mot_r = half(&e_real, d, 2 * d);
    let mot_g = half(&e_gen, d, 2 * d);
    let mot_s = half(&e_shuf, d, 2 * d);

    let mag = |rows: &[Vec<f64>]| -> f64 {
        let mut s = 0.0;
        let mut c = 0usize;
        for r in rows {
            for &v in r {
                s += v.abs();
                c += 1;
            }
        }
        s / c as f64
    };
    println!("mean |value|: app real {:.4}  motion real {:.4}", mag(&app_r), mag(&mot_r));
    println!("mean |value|: app gen  {:.4}  motion gen  {:.4}", mag(&app_g), mag(&mot_g));
    println!("mean |value|: app shuf {:.4}  motion shuf {:.4}", mag(&app_s), mag(&mot_s));

    let fd = |a: &[Vec<f64>], b: &[Vec<f64>]| frechet_distance(&fit(a), &fit(b)).unwrap();
    println!("app    fvd: gen {:.4}  shuf {:.4}", fd(&app_r, &app_g), fd(&app_r, &app_s));
    println!("motion fvd: gen {:.4}  shuf {:.4}", fd(&mot_r, &mot_g), fd(&mot_r, &mot_s));

    for lam in [1.0f64, 2.0, 4.0, 8.0, 16.0, 32.0] {
        let scale = |rows: &[Vec<f64>]| -> Vec<Vec<f64>> {
            rows.iter()
                .map(|r| {
                    let mut v = r.clone();
                    for x in &mut v[d..] {
                        *x *= lam;
                    }
                    v
                })
                .collect()
        };
        let sr = scale(&e_real);
        let sg = scale(&e_gen);
        let ss = scale(&e_shuf);
        let g = fd(&sr, &sg);
        let s = fd(&sr, &ss);
        println!("lambda {lam:>5}: fvd gen {g:>9.4}  fvd shuf {s:>9.4}  pass={} ratio {:.3}", g < s, g / s);
    }
}
