use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use trajgan::backbone::Backbone;
use trajgan::checkpoint::Checkpoint;
use trajgan::data::{Dataset, DatasetSpec, ShapeKind, Video};
use trajgan::imgio::{load_frame_dir, read_clip, read_manifest};
use trajgan::metrics::{fid, fvd_proxy, inception_score};
use trajgan::plugin::{PluginNet, ROLE as PLUGIN_ROLE};
use trajgan::probe::{train_probe, Probe, ProbeConfig};
use trajgan::rng::{stream, Rng};
use trajgan::tensor::Tensor;
use trajgan::trainer::CompositeGenerator;
use trajgan::video_disc::CLIP_FRAMES;
use trajgan::{Error, Result, VERSION};

use crate::config::{self, RunConfig};

#[derive(Args)]
pub struct EvaluateArgs {
    /// Stage-2 checkpoint (plugin + frozen backbone)
    #[arg(long)]
    ckpt: PathBuf,
    /// Dataset directory written by synth-data (manifest.csv + videos/)
    #[arg(long)]
    data: PathBuf,
    /// Comma-separated subset of fid,fvd,is
    #[arg(long, value_enum, value_delimiter = ',', default_value = "fid,fvd,is")]
    metrics: Vec<Metric>,
    /// Generated clips to score (default from config)
    #[arg(long)]
    clips: Option<usize>,
    /// Report file; stdout always gets a copy
    #[arg(long)]
    out: Option<PathBuf>,
    /// Emit the report as JSON instead of aligned text
    #[arg(long)]
    json: bool,
    /// JSON run configuration (probe + evaluation keys apply)
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Metric {
    Fid,
    Fvd,
    Is,
}

pub fn evaluate(args: EvaluateArgs) -> Result<()> {
    let mut cfg = config::resolve(args.config.as_deref())?;
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(c) = args.clips {
        cfg.clips = c;
    }
    if cfg.clips == 0 {
        return Err(Error::Config("evaluation needs at least one clip".into()));
    }

    let ck = Checkpoint::read(&args.ckpt)?;
    let bb = Backbone::<f32>::from_checkpoint(&ck)?;
    let plugin = PluginNet::from_role(ck.require_role(PLUGIN_ROLE)?)?;
    let composite = CompositeGenerator { plugin: &plugin, generator: &bb.gen, critic: &bb.critic };

    let dataset = load_dataset(&args.data, cfg.resolution)?;
    let spec = &dataset.spec;

    // The probe is trained fresh on the evaluation data and gated on
    // held-out accuracy: metrics from a judge that cannot tell the
    // classes apart would be meaningless.
    let mut probe = Probe::<f32>::new(cfg.seed, &ProbeConfig {
        resolution: spec.resolution,
        classes: ShapeKind::ALL.len(),
    })?;
    let probe_report = train_probe(&mut probe, &dataset, &cfg.probe_train(), cfg.seed)?;
    probe_report.require()?;

    let mut rng = Rng::stream(cfg.seed, stream::EVAL);
    let n_clips = cfg.clips;

    let mut gen_clips = Vec::with_capacity(n_clips);
    for i in 0..n_clips {
        let clip_seed = cfg.seed ^ ((i as u64 + 1) << 16);
        gen_clips.push(composite.sample_video(clip_seed, CLIP_FRAMES)?.frames);
    }
    let mut real_clips = Vec::with_capacity(n_clips);
    for _ in 0..n_clips {
        real_clips.push(dataset.sample_clip(&mut rng, CLIP_FRAMES)?.2);
    }
    let gen_frames = concat_clips(&gen_clips)?;

    let mut fid_value = None;
    let mut fvd_value = None;
    let mut is_value = None;
    for metric in &args.metrics {
        match metric {
            Metric::Fid => {
                let real_frames = dataset.sample_frames(&mut rng, gen_frames.shape()[0])?;
                let fr = probe.features(&real_frames)?;
                let fg = probe.features(&gen_frames)?;
                fid_value = Some(fid(&fr, &fg)?);
            }
            Metric::Fvd => {
                let fr: Result<Vec<_>> = real_clips.iter().map(|c| probe.features(c)).collect();
                let fg: Result<Vec<_>> = gen_clips.iter().map(|c| probe.features(c)).collect();
                fvd_value = Some(fvd_proxy(&fr?, &fg?)?);
            }
            Metric::Is => {
                let probs = probe.probs(&gen_frames)?;
                is_value = Some(inception_score(&probs, cfg.is_splits)?);
            }
        }
    }

    let report = render_report(&cfg, spec, probe_report.accuracy, n_clips, fid_value, fvd_value, is_value, args.json);
    print!("{report}");
    if let Some(out) = &args.out {
        fs::write(out, &report).map_err(|e| Error::io(out, e))?;
    }
    Ok(())
}

/// Rebuild a dataset from a synth-data directory: the manifest names one
/// raw container or one still-frame directory per video.
fn load_dataset(dir: &Path, still_resolution: usize) -> Result<Dataset> {
    let manifest = read_manifest(&dir.join("manifest.csv"))?;
    if manifest.is_empty() {
        return Err(Error::Contract(format!("{}: manifest lists no videos", dir.display())));
    }
    let mut videos = Vec::with_capacity(manifest.len());
    let mut fps = DatasetSpec::default().fps;
    for e in &manifest {
        let path = dir.join(&e.path);
        let (frames, kind) = if path.is_dir() {
            (load_frame_dir(&path, still_resolution)?, ShapeKind::from_label(&e.label)?)
        } else {
            let clip = read_clip(&path)?;
            fps = clip.fps;
            let kind = match clip.kind {
                Some(k) => k,
                None => ShapeKind::from_label(&e.label)?,
            };
            (clip.frames, kind)
        };
        if frames.shape()[0] != e.n_frames {
            return Err(Error::Format(format!(
                "{}: manifest promises {} frames, file holds {}",
                path.display(),
                e.n_frames,
                frames.shape()[0]
            )));
        }
        videos.push(Video { id: e.id, kind, frames, centers: Vec::new() });
    }
    let shape = videos[0].frames.shape().to_vec();
    for v in &videos {
        if v.frames.shape() != shape.as_slice() {
            return Err(Error::Format(format!(
                "video {} has shape {:?}, expected {:?} like the rest",
                v.id,
                v.frames.shape(),
                shape
            )));
        }
    }
    let defaults = DatasetSpec::default();
    Ok(Dataset {
        spec: DatasetSpec {
            n_videos: videos.len(),
            n_frames: shape[0],
            resolution: shape[2],
            fps,
            min_speed: defaults.min_speed,
            max_speed: defaults.max_speed,
        },
        videos,
    })
}

fn concat_clips(clips: &[Tensor<f32>]) -> Result<Tensor<f32>> {
    let shape = clips[0].shape();
    let (n, res) = (shape[0], shape[2]);
    let mut data = Vec::with_capacity(clips.len() * n * res * res);
    for c in clips {
        data.extend_from_slice(c.data());
    }
    Tensor::new(&[clips.len() * n, 1, res, res], data)
}

#[allow(clippy::too_many_arguments)]
fn render_report(
    cfg: &RunConfig,
    spec: &DatasetSpec,
    probe_accuracy: f64,
    n_clips: usize,
    fid_value: Option<f64>,
    fvd_value: Option<f64>,
    is_value: Option<(f64, f64)>,
    json: bool,
) -> String {
    if json {
        let report = serde_json::json!({
            "version": VERSION,
            "seed": cfg.seed,
            "dataset": {
                "n_videos": spec.n_videos,
                "n_frames": spec.n_frames,
                "resolution": spec.resolution,
            },
            "probe_accuracy": probe_accuracy,
            "clips": n_clips,
            "metrics": {
                "fid": fid_value,
                "fvd": fvd_value,
                "is_mean": is_value.map(|v| v.0),
                "is_std": is_value.map(|v| v.1),
                "is_splits": is_value.map(|_| cfg.is_splits),
            },
            "config": cfg,
        });
        return format!("{report:#}\n");
    }
    let mut out = String::new();
    out.push_str(&format!("evaluation report (version {VERSION}, seed {})\n", cfg.seed));
    out.push_str(&format!(
        "  dataset   {} videos x {} frames at {}px\n",
        spec.n_videos, spec.n_frames, spec.resolution
    ));
    out.push_str(&format!(
        "  probe     held-out accuracy {probe_accuracy:.3} (gate {:.2})\n",
        cfg.probe_min_accuracy
    ));
    out.push_str(&format!("  clips     {n_clips} generated vs {n_clips} real, {CLIP_FRAMES} frames each\n"));
    if let Some(v) = fid_value {
        out.push_str(&format!("  fid       {v:.4}\n"));
    }
    if let Some(v) = fvd_value {
        out.push_str(&format!("  fvd       {v:.4}\n"));
    }
    if let Some((m, s)) = is_value {
        out.push_str(&format!("  is        {m:.4} +/- {s:.4} over {} splits\n", cfg.is_splits));
    }
    out.push_str("config:\n");
    for line in cfg.to_json().lines() {
        out.push_str(&format!("  {line}\n"));
    }
    out
}
