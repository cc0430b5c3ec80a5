use trajgan::adam::AdamParams;
use trajgan::data::{Dataset, DatasetSpec};
use trajgan::probe::{train_probe, Probe, ProbeConfig, ProbeTrainConfig};

fn main() {
    for (nv, nf, res) in [(10usize, 8usize, 16usize), (24, 16, 16), (48, 64, 32)] {
        let spec = DatasetSpec { n_videos: nv, n_frames: nf, resolution: res, ..Default::default() };
        let ds = Dataset::synthesize(&spec, 42).unwrap();
        for lr in [1e-2, 3e-3, 1e-3] {
            for epochs in [6usize, 16] {
                let mut accs = Vec::new();
                for seed in 1..=5u64 {
                    let mut probe = Probe::<f32>::new(seed, &ProbeConfig { resolution: res, classes: 2 }).unwrap();
                    let cfg = ProbeTrainConfig {
                        epochs,
                        adam: AdamParams { lr, ..AdamParams::default() },
                        ..Default::default()
                    };
                    let rep = train_probe(&mut probe, &ds, &cfg, seed).unwrap();
                    accs.push(rep.accuracy);
                }
                println!(
                    "{nv}x{nf}@{res} lr={lr:.0e} ep={epochs}: {:?}",
                    accs.iter().map(|a| (a * 100.0).round() / 100.0).collect::<Vec<_>>()
                );
            }
        }
    }
}
