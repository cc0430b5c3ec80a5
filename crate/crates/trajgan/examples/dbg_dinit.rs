use trajgan::backbone::Backbone;
use trajgan::checkpoint::Checkpoint;
use trajgan::data::{Dataset, DatasetSpec};
use trajgan::tape::Tape;
use trajgan::trainer::real_feature_videos;
use trajgan::video_disc::VideoDiscriminator;

fn main() {
    let gains = [1.0f32, 0.5, 0.4, 0.35];
    for seed in 1u64..=5 {
        let spec = DatasetSpec::default();
        let dataset = Dataset::synthesize(&spec, seed).unwrap();
        let path = std::path::PathBuf::from(format!("/tmp/bench_seed{seed}.ckpt"));
        let ck = Checkpoint::read(&path).unwrap();
        let bb = Backbone::<f32>::from_checkpoint(&ck).unwrap();

        let n = 8usize;
        let k = dataset.videos.len();
        let mut wins = Vec::new();
        for v in 0..k {
            wins.push(dataset.clip(v, (v * 7) % (spec.n_frames - n), n).unwrap());
        }
        let fv = real_feature_videos(&bb.critic, &wins).unwrap();
        let rms = |xs: &[f32]| {
            (xs.iter().map(|&x| (x as f64) * (x as f64)).sum::<f64>() / xs.len() as f64).sqrt()
        };
        println!("== seed {seed} ==  feature rms {:.3}", rms(fv.data()));

        for &g in &gains {
            let mut disc = VideoDiscriminator::<f32>::new(seed);
            for i in 0..disc.params.len() {
                let p = disc.params.get_mut(i);
                if p.name.ends_with(".w") {
                    for v in p.tensor.data_mut() {
                        *v *= g;
                    }
                }
            }
            let mut tape = Tape::new();
            let binds = disc.params.bind_frozen(&mut tape);
            let x = tape.constant(&fv);
            let (_, taps) = disc.forward_probed(&mut tape, &binds, x).unwrap();
            let logits = disc
                .forward_logits(&mut tape, &binds, x)
                .and_then(|l| tape.tensor(l))
                .unwrap();
            let alive: Vec<String> = taps
                .iter()
                .map(|&t| {
                    let v = tape.tensor(t).unwrap();
                    let pos = v.data().iter().filter(|&&x| x > 0.0).count();
                    format!("{:.2}", pos as f64 / v.data().len() as f64)
                })
                .collect();
            println!(
                "  gain {g:<4}  logit rms {:8.3}  mean {:8.3}  alive {}",
                rms(logits.data()),
                logits.data().iter().map(|&x| x as f64).sum::<f64>() / logits.data().len() as f64,
                alive.join(" ")
            );
        }
    }
}
