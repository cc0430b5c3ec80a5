use std::time::Instant;

use trajgan::backbone::Backbone;
use trajgan::data::{Dataset, DatasetSpec};
use trajgan::metrics::{frechet_distance, video_embedding, GaussianStats};
use trajgan::plugin::{PluginNet, TIME_ROW_STD};
use trajgan::probe::{train_probe, Probe, ProbeConfig, ProbeTrainConfig};
use trajgan::rng::{stream, Rng};
use trajgan::tensor::Tensor;
use trajgan::trainer::{real_feature_videos, train_stage2, CompositeGenerator, Stage2Config};
use trajgan::video_disc::{VideoDiscriminator, CLIP_FRAMES};

fn fit(rows: &[Vec<f64>]) -> GaussianStats {
    let d = rows[0].len();
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    GaussianStats::fit_rows(&flat, rows.len(), d).unwrap()
}

fn main() {
    let mut args = std::env::args().skip(1);
    let stds: Vec<f32> = args
        .next()
        .unwrap_or_else(|| "0.5,0.65,0.8".into())
        .split(',')
        .filter_map(|s| s.parse().ok())
        .collect();
    let seeds: Vec<u64> = args.filter_map(|s| s.parse().ok()).collect();
    let seeds = if seeds.is_empty() { vec![1] } else { seeds };

    for &seed in &seeds {
        let spec = DatasetSpec::default();
        let dataset = Dataset::synthesize(&spec, seed).unwrap();
        let cache = std::path::PathBuf::from(format!("/tmp/bench_seed{seed}.ckpt"));
        let ck = trajgan::checkpoint::Checkpoint::read(&cache).unwrap();
        let mut bb = Backbone::<f32>::from_checkpoint(&ck).unwrap();
        let freeze = bb.freeze();
        let bb = bb;

        let mut probe = Probe::<f32>::new(seed, &ProbeConfig { resolution: spec.resolution, classes: 2 }).unwrap();
        let report = train_probe(&mut probe, &dataset, &ProbeTrainConfig::default(), seed).unwrap();
        println!("== seed {seed} ==  probe acc {:.3}", report.accuracy);

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
            "real motion {:.4}  shuf motion {:.4}  fvd shuf {:.4}",
            mag(&e_real, d, 2 * d),
            mag(&e_shuf, d, 2 * d),
            fvd_shuf
        );

        for &s in &stds {
            let t0 = Instant::now();
            let mut plugin = PluginNet::<f32>::new(seed);
            let ratio = s / TIME_ROW_STD as f32;
            for i in 0..plugin.params.len() {
                let p = plugin.params.get_mut(i);
                if !p.name.ends_with(".w") {
                    continue;
                }
                let shape = p.tensor.shape().to_vec();
                let (rows, cols) = (shape[0], shape[1]);
                for v in &mut p.tensor.data_mut()[(rows - 1) * cols..] {
                    *v *= ratio;
                }
            }
            let mut disc = VideoDiscriminator::<f32>::new(seed);
            let s2 = Stage2Config { epochs: 50, ..Default::default() };
            let mut last = (0f64, 0f64);
            train_stage2(&mut plugin, &mut disc, &bb, &freeze, &dataset, &s2, seed, |l| {
                last = (l.d_real, l.d_fake);
            })
            .unwrap();

            let composite = CompositeGenerator { plugin: &plugin, generator: &bb.gen, critic: &bb.critic };
            let mut gen_clips = Vec::with_capacity(k);
            for i in 0..k {
                gen_clips.push(composite.sample_video(seed ^ (i as u64) << 16, n).unwrap().frames);
            }
            let e_gen = emb(&gen_clips);
            let app = fd_half(&e_real, &e_gen, 0, d);
            let mot = fd_half(&e_real, &e_gen, d, 2 * d);
            let full = fd_half(&e_real, &e_gen, 0, 2 * d);

            let mut rng2 = Rng::stream(seed, stream::EVAL);
            for _ in 0..k {
                rng2.below(spec.n_frames - n + 1);
            }
            for _ in 0..k {
                let mut o: Vec<usize> = (0..n).collect();
                rng2.shuffle(&mut o);
            }
            let fdim = 512;
            let stride = 4usize;
            let starts: Vec<usize> = (0..=(spec.n_frames - n)).step_by(stride).collect();
            let mut wins = Vec::with_capacity(k * starts.len());
            for v in 0..k {
                for &st in &starts {
                    wins.push(dataset.clip(v, st, n).unwrap());
                }
            }
            let fv = real_feature_videos(&bb.critic, &wins).unwrap();
            let mwin = wins.len();
            let score = |t: &Tensor<f32>| -> Vec<f64> {
                disc.score(t).unwrap().data().iter().map(|&x| x as f64).collect()
            };
            let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
            let s_ord = score(&fv);
            let mut s_perm_all = Vec::with_capacity(mwin * 3);
            for _ in 0..3 {
                let mut pd = fv.data().to_vec();
                for c in 0..mwin {
                    let mut order: Vec<usize> = (0..n).collect();
                    rng2.shuffle(&mut order);
                    let base = c * n * fdim;
                    let orig: Vec<f32> = pd[base..base + n * fdim].to_vec();
                    for (row, &f) in order.iter().enumerate() {
                        pd[base + row * fdim..base + (row + 1) * fdim]
                            .copy_from_slice(&orig[f * fdim..(f + 1) * fdim]);
                    }
                }
                s_perm_all.extend(score(&Tensor::new(&[mwin, 1, n, fdim], pd).unwrap()));
            }
            let m_ord = mean(&s_ord);
            let m_perm = mean(&s_perm_all);

            let mut ck = trajgan::checkpoint::Checkpoint::new();
            ck.push_role(plugin.to_role());
            ck.push_role(disc.to_role());
            ck.write(&std::path::PathBuf::from(format!("/tmp/s2_{seed}_{s}.ckpt"))).unwrap();

            println!(
                "std {s:>4}: m_gen {:.3}  app {:>8.3}  mot {:>8.3}  full {:>8.3}  (a)={}  Dord {:.4} Dperm {:.4} (b)={}  dr {:.2} df {:.2}  [{:.0}s]",
                mag(&e_gen, d, 2 * d),
                app,
                mot,
                full,
                full < fvd_shuf,
                m_ord,
                m_perm,
                m_ord > m_perm,
                last.0,
                last.1,
                t0.elapsed().as_secs_f64()
            );
        }
    }
}
