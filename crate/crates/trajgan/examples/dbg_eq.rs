use trajgan::backbone::{Backbone, FEATURE_DIM};
use trajgan::checkpoint::Checkpoint;
use trajgan::data::{Dataset, DatasetSpec};
use trajgan::tensor::Tensor;
use trajgan::trainer::real_feature_videos;

fn main() {
    let spec = DatasetSpec::default();
    let dataset = Dataset::synthesize(&spec, 1).unwrap();
    let path = std::path::PathBuf::from("/tmp/bench_seed1.ckpt");
    let ck = Checkpoint::read(&path).unwrap();
    let bb = Backbone::<f32>::from_checkpoint(&ck).unwrap();

    let n = 8usize;
    let k = dataset.videos.len();
    let starts: Vec<usize> = (0..=(spec.n_frames - n)).step_by(4).collect();

    let mut wins = Vec::new();
    for v in 0..k {
        for &st in &starts {
            wins.push(dataset.clip(v, st, n).unwrap());
        }
    }
    let slow = real_feature_videos(&bb.critic, &wins).unwrap();

    let mwin = k * starts.len();
    let mut wd = Vec::with_capacity(mwin * n * FEATURE_DIM);
    for v in 0..k {
        let f = bb.critic.extract_features(&dataset.clip(v, 0, spec.n_frames).unwrap()).unwrap();
        for &st in &starts {
            wd.extend_from_slice(&f.data()[st * FEATURE_DIM..(st + n) * FEATURE_DIM]);
        }
    }
    let fast = Tensor::<f32>::new(&[mwin, 1, n, FEATURE_DIM], wd).unwrap();

    assert_eq!(slow.shape(), fast.shape());
    let mut maxd = 0.0f32;
    let mut ndiff = 0usize;
    for (a, b) in slow.data().iter().zip(fast.data()) {
        let d = (a - b).abs();
        if d > 0.0 {
            ndiff += 1;
        }
        maxd = maxd.max(d);
    }
    println!("elems {}  exact-diffs {}  max-abs-diff {:e}", slow.data().len(), ndiff, maxd);
}
