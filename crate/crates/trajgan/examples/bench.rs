use std::time::Instant;

use trajgan::backbone::{sample_latent, train_backbone, Backbone, BackboneConfig, BackboneTrainConfig};
use trajgan::data::{Dataset, DatasetSpec};
use trajgan::metrics::{fid, fvd_proxy};
use trajgan::plugin::PluginNet;
use trajgan::probe::{train_probe, Probe, ProbeConfig, ProbeTrainConfig};
use trajgan::rng::{stream, Rng};
use trajgan::tensor::Tensor;
use trajgan::trainer::{real_feature_videos, train_stage2, CompositeGenerator, Stage2Config};
use trajgan::video_disc::{VideoDiscriminator, CLIP_FRAMES};

fn main() {
    let seed: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1);
    println!("== seed {seed} ==");
    let spec = DatasetSpec::default();
    let dataset = Dataset::synthesize(&spec, seed).unwrap();

    let cache = std::path::PathBuf::from(format!("/tmp/bench_seed{seed}.ckpt"));
    let (bb, plugin, disc) = if cache.exists() {
        println!("loading cached weights from {}", cache.display());
        let ck = trajgan::checkpoint::Checkpoint::read(&cache).unwrap();
        let bb = Backbone::<f32>::from_checkpoint(&ck).unwrap();
        let plugin = PluginNet::from_role(ck.require_role(trajgan::plugin::ROLE).unwrap()).unwrap();
        let disc = VideoDiscriminator::from_role(ck.require_role(trajgan::video_disc::ROLE).unwrap()).unwrap();
        (bb, plugin, disc)
    } else {
        let cfg = BackboneConfig::desk();
        let mut bb = Backbone::<f32>::new(seed, &cfg).unwrap();
        let tcfg = BackboneTrainConfig { steps: 2000, log_every: 400, ..Default::default() };
        let t0 = Instant::now();
        train_backbone(
            &mut bb,
            |rng, b| dataset.sample_frames(rng, b),
            &tcfg,
            seed,
            |l| println!("bb step {} d={:.3} g={:.3} gp={:.3}", l.step, l.d_loss, l.g_loss, l.gp),
        )
        .unwrap();
        println!("backbone: {:?}", t0.elapsed());

        let freeze = bb.freeze();
        let mut plugin = PluginNet::<f32>::new(seed);
        let mut disc = VideoDiscriminator::<f32>::new(seed);
        let s2 = Stage2Config { epochs: 50, ..Default::default() };
        let t0 = Instant::now();
        train_stage2(&mut plugin, &mut disc, &bb, &freeze, &dataset, &s2, seed, |l| {
            if l.step == 0 && l.epoch % 10 == 0 {
                println!("s2 epoch {} d={:.3} g={:.3} dr={:.3} df={:.3}", l.epoch, l.d_loss, l.g_loss, l.d_real, l.d_fake);
            }
        })
        .unwrap();
        println!("stage2: {:?}", t0.elapsed());
        let mut ck = trajgan::checkpoint::Checkpoint::new();
        ck.push_role(plugin.to_role());
        ck.push_role(disc.to_role());
        for r in bb.to_roles() {
            ck.push_role(r);
        }
        ck.write(&cache).unwrap();
        (bb, plugin, disc)
    };

    // probe
    let mut probe = Probe::<f32>::new(seed, &ProbeConfig { resolution: spec.resolution, classes: 2 }).unwrap();
    let report = train_probe(&mut probe, &dataset, &ProbeTrainConfig::default(), seed).unwrap();
    println!("probe acc {:.3} (gate {:.2})", report.accuracy, report.min_accuracy);

    let mut rng = Rng::stream(seed, stream::EVAL);
    let n = CLIP_FRAMES;
    let k = dataset.videos.len();

    // real 8-frame clips, one per video
    let mut real_clips = Vec::with_capacity(k);
    for v in 0..k {
        let start = rng.below(spec.n_frames - n + 1);
        real_clips.push(dataset.clip(v, start, n).unwrap());
    }
    // generated clips
    let composite = CompositeGenerator { plugin: &plugin, generator: &bb.gen, critic: &bb.critic };
    let mut gen_clips = Vec::with_capacity(k);
    for i in 0..k {
        gen_clips.push(composite.sample_video(seed ^ (i as u64) << 16, n).unwrap().frames);
    }
    // frame-shuffled real clips
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

    let pf = |clips: &[Tensor<f32>]| -> Vec<Tensor<f32>> {
        clips.iter().map(|c| probe.features(c).unwrap()).collect()
    };
    let real_f = pf(&real_clips);
    let gen_f = pf(&gen_clips);
    let shuf_f = pf(&shuf_clips);
    let fvd_gen = fvd_proxy(&real_f, &gen_f).unwrap();
    let fvd_shuf = fvd_proxy(&real_f, &shuf_f).unwrap();
    println!("fvd gen {fvd_gen:.4}  fvd shuffled-real {fvd_shuf:.4}  (a) pass={}", fvd_gen < fvd_shuf);

    // (b): vdisc ordered vs permuted real feature videos
    let fv = real_feature_videos(&bb.critic, &real_clips).unwrap();
    let d = 512;
    let score_mean = |fv: &Tensor<f32>| -> f64 {
        let b = fv.shape()[0];
        let s = disc.score(fv).unwrap();
        s.data().iter().map(|&x| x as f64).sum::<f64>() / b as f64
    };
    let m_ord = score_mean(&fv);
    let mut pd = fv.data().to_vec();
    for v in 0..k {
        let mut order: Vec<usize> = (0..n).collect();
        rng.shuffle(&mut order);
        let base = v * n * d;
        let orig: Vec<f32> = pd[base..base + n * d].to_vec();
        for (row, &f) in order.iter().enumerate() {
            pd[base + row * d..base + (row + 1) * d].copy_from_slice(&orig[f * d..(f + 1) * d]);
        }
    }
    let fv_perm = Tensor::new(&[k, 1, n, d], pd).unwrap();
    let m_perm = score_mean(&fv_perm);
    println!("D ordered {m_ord:.4}  D permuted {m_perm:.4}  (b) pass={}", m_ord > m_perm);

    // criterion 7: stage-1 FID sanity
    let n_frames = 256;
    let real_frames = dataset.sample_frames(&mut rng, n_frames).unwrap();
    let z = sample_latent::<f32>(&mut rng, n_frames);
    let gen_frames = bb.gen.generate(&z).unwrap();
    let res = spec.resolution;
    let mut noise_frames = vec![0f32; n_frames * res * res];
    for x in &mut noise_frames {
        *x = rng.uniform(-1.0, 1.0) as f32;
    }
    let noise_frames = Tensor::new(&[n_frames, 1, res, res], noise_frames).unwrap();
    let fr = probe.features(&real_frames).unwrap();
    let fg = probe.features(&gen_frames).unwrap();
    let fn_ = probe.features(&noise_frames).unwrap();
    let fid_gen = fid(&fr, &fg).unwrap();
    let fid_noise = fid(&fr, &fn_).unwrap();
    println!("fid gen {fid_gen:.4}  fid noise {fid_noise:.4}  (7) pass={}", fid_gen < fid_noise / 5.0);
}
