use trajgan::plugin::{sample_noise, PluginNet, Timeline};
use trajgan::rng::{stream, Rng};

fn step_norms(p: &PluginNet<f32>, seed: u64) -> Vec<f64> {
    let mut rng = Rng::stream(seed, stream::GENERATE);
    let noise = sample_noise::<f32>(&mut rng);
    let lat = p.trajectory(&Timeline::grid(8).unwrap(), &noise).unwrap();
    let d = lat.shape()[1];
    let rows = lat.data();
    (1..8)
        .map(|i| {
            (0..d)
                .map(|j| {
                    let diff = (rows[i * d + j] - rows[(i - 1) * d + j]) as f64;
                    diff * diff
                })
                .sum::<f64>()
                .sqrt()
        })
        .collect()
}

fn main() {
    let ck = trajgan::checkpoint::Checkpoint::read(std::path::Path::new("/tmp/bench_seed1.ckpt")).unwrap();
    let trained = PluginNet::from_role(ck.require_role(trajgan::plugin::ROLE).unwrap()).unwrap();
    let fresh = PluginNet::<f32>::new(1);
    println!("trained step norms: {:?}", step_norms(&trained, 1).iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>());
    println!("fresh   step norms: {:?}", step_norms(&fresh, 1).iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>());
}
