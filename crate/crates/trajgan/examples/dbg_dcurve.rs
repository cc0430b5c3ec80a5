use trajgan::backbone::Backbone;
use trajgan::checkpoint::Checkpoint;
use trajgan::data::{Dataset, DatasetSpec};
use trajgan::plugin::{PluginNet, TIME_ROW_STD};
use trajgan::trainer::{train_stage2, Stage2Config};
use trajgan::video_disc::VideoDiscriminator;

fn main() {
    let cases: Vec<(u64, f64)> = vec![(3, 0.62), (1, 0.68), (4, 0.62)];
    for (seed, std) in cases {
        println!("== seed {seed} std {std} ==");
        let spec = DatasetSpec::default();
        let dataset = Dataset::synthesize(&spec, seed).unwrap();
        let path = std::path::PathBuf::from(format!("/tmp/bench_seed{seed}.ckpt"));
        let ck = Checkpoint::read(&path).unwrap();
        let mut bb = Backbone::<f32>::from_checkpoint(&ck).unwrap();
        let freeze = bb.freeze();
        let bb = bb;

        let mut plugin = PluginNet::<f32>::new(seed);
        let ratio = (std / TIME_ROW_STD) as f32;
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
        train_stage2(&mut plugin, &mut disc, &bb, &freeze, &dataset, &s2, seed, |l| {
            let g = l.epoch * 6 + l.step;
            if g % 10 == 0 {
                println!(
                    "  step {:3}  d_loss {:.4}  g_loss {:.4}  d_real {:.4}  d_fake {:.4}",
                    g, l.d_loss, l.g_loss, l.d_real, l.d_fake
                );
            }
        })
        .unwrap();
        for p in disc.params.iter() {
            let l2 = p.tensor.data().iter().map(|&x| (x as f64) * (x as f64)).sum::<f64>().sqrt();
            println!("  |{}| = {l2:.5}", p.name);
        }
    }
}
