use std::path::PathBuf;

use clap::{Args, ValueEnum};
use trajgan::backbone::Backbone;
use trajgan::checkpoint::Checkpoint;
use trajgan::imgio::{save_frames, write_clip, StillFormat};
use trajgan::plugin::{PluginNet, ROLE as PLUGIN_ROLE};
use trajgan::trainer::CompositeGenerator;
use trajgan::Result;

use crate::rundir::RunDir;

#[derive(Args)]
pub struct GenerateArgs {
    /// Stage-2 checkpoint (plugin + frozen backbone)
    #[arg(long)]
    ckpt: PathBuf,
    #[arg(long)]
    seed: u64,
    /// Frames to render; the timeline keeps the training step beyond 8
    #[arg(long, default_value_t = 8)]
    frames: usize,
    /// Output directory; doubles as the run directory
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = OutFormat::Ppm)]
    format: OutFormat,
}

/// Ppm writes one quantized still per frame; raw writes the exact f32
/// clip container.
#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OutFormat {
    Ppm,
    Raw,
}

pub fn generate(args: GenerateArgs) -> Result<()> {
    let ck = Checkpoint::read(&args.ckpt)?;
    let bb = Backbone::<f32>::from_checkpoint(&ck)?;
    let plugin = PluginNet::from_role(ck.require_role(PLUGIN_ROLE)?)?;
    let composite = CompositeGenerator { plugin: &plugin, generator: &bb.gen, critic: &bb.critic };
    let clip = composite.sample_video(args.seed, args.frames)?;

    let format = match args.format {
        OutFormat::Ppm => "ppm",
        OutFormat::Raw => "raw",
    };
    let config = serde_json::json!({
        "seed": args.seed,
        "frames": args.frames,
        "format": format,
        "fps": clip.fps,
    });
    let mut run = RunDir::create(&args.out, "generate", args.seed, &format!("{config:#}\n"))?;

    let res = clip.frames.shape()[2];
    match args.format {
        OutFormat::Ppm => {
            save_frames(run.root(), &clip.frames, "frame", StillFormat::Ppm)?;
            run.log(format!("wrote frame_000.ppm .. frame_{:03}.ppm", args.frames - 1));
        }
        OutFormat::Raw => {
            write_clip(&run.path("clip.clip"), &clip)?;
            run.log("wrote clip.clip".to_string());
        }
    }
    run.log(format!("rendered {} frames at {res}px (seed {})", args.frames, args.seed));
    run.finish()
}
