use std::fs;
use std::path::PathBuf;

use clap::{Args, ValueEnum};
use trajgan::data::Dataset;
use trajgan::imgio::{save_frames, write_clip, write_manifest, Clip, ManifestEntry, StillFormat};
use trajgan::{Error, Result};

use crate::config;
use crate::rundir::RunDir;

#[derive(Args)]
pub struct SynthDataArgs {
    /// Dataset spec: a JSON run configuration (dataset keys apply)
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Output directory; doubles as the run directory
    #[arg(long)]
    out: PathBuf,
    /// Overrides the configured seed
    #[arg(long)]
    seed: Option<u64>,
    /// Per-video storage under `videos/`
    #[arg(long, value_enum, default_value_t = VideoFormat::Raw)]
    format: VideoFormat,
}

/// Raw keeps exact f32 frames in one container per video; pgm/ppm write
/// one quantized still per frame in one directory per video.
#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum VideoFormat {
    Raw,
    Pgm,
    Ppm,
}

pub fn synth_data(args: SynthDataArgs) -> Result<()> {
    let mut cfg = config::resolve(args.spec.as_deref())?;
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    let spec = cfg.dataset_spec();
    spec.validate()?;
    let dataset = Dataset::synthesize(&spec, cfg.seed)?;

    let mut run = RunDir::create(&args.out, "synth-data", cfg.seed, &cfg.to_json())?;
    let videos_dir = run.path("videos");
    fs::create_dir_all(&videos_dir).map_err(|e| Error::io(&videos_dir, e))?;

    let mut entries = Vec::with_capacity(dataset.videos.len());
    for v in &dataset.videos {
        let rel = match args.format {
            VideoFormat::Raw => {
                let rel = format!("videos/{:04}.clip", v.id);
                let clip = Clip { frames: v.frames.clone(), fps: spec.fps, kind: Some(v.kind) };
                write_clip(&run.path(&rel), &clip)?;
                rel
            }
            VideoFormat::Pgm | VideoFormat::Ppm => {
                let rel = format!("videos/{:04}", v.id);
                let still = if args.format == VideoFormat::Pgm { StillFormat::Pgm } else { StillFormat::Ppm };
                save_frames(&run.path(&rel), &v.frames, "frame", still)?;
                rel
            }
        };
        entries.push(ManifestEntry {
            id: v.id,
            label: v.kind.label().into(),
            n_frames: spec.n_frames,
            path: rel,
        });
    }
    write_manifest(&run.path("manifest.csv"), &entries)?;

    run.log(format!(
        "synthesized {} videos x {} frames at {}px (seed {})",
        spec.n_videos, spec.n_frames, spec.resolution, cfg.seed
    ));
    run.log(format!("wrote manifest.csv and videos/ ({} entries)", entries.len()));
    run.finish()
}
