use std::path::{Path, PathBuf};

use clap::Args;
use trajgan::backbone::{train_backbone as run_stage1, Backbone, BackboneConfig, FreezeState};
use trajgan::checkpoint::Checkpoint;
use trajgan::data::Dataset;
use trajgan::plugin::PluginNet;
use trajgan::trainer::{train_stage2 as run_stage2, STAGE2_LOG_HEADER};
use trajgan::video_disc::VideoDiscriminator;
use trajgan::{Error, Result};

use crate::config::{self, RunConfig};
use crate::rundir::{default_run_dir, RunDir};

#[derive(Args)]
pub struct TrainBackboneArgs {
    /// JSON run configuration
    #[arg(long)]
    config: Option<PathBuf>,
    /// Checkpoint to write (frozen generator + critic)
    #[arg(long)]
    out: PathBuf,
    /// Run directory; defaults to `<out stem>.run` beside the checkpoint
    #[arg(long)]
    run_dir: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
}

pub fn train_backbone(args: TrainBackboneArgs) -> Result<()> {
    let mut cfg = config::resolve(args.config.as_deref())?;
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    if let Some(v) = args.steps {
        cfg.steps = v;
    }
    if let Some(v) = args.batch {
        cfg.batch = v;
    }
    if let Some(v) = args.lr {
        cfg.lr = v;
    }

    let root = args.run_dir.clone().unwrap_or_else(|| default_run_dir(&args.out));
    let mut run = RunDir::create(&root, "train-backbone", cfg.seed, &cfg.to_json())?;
    let dataset = synthesize(&cfg, &mut run)?;

    let bcfg = BackboneConfig::for_resolution(cfg.resolution)?;
    let mut bb = Backbone::<f32>::new(cfg.seed, &bcfg)?;
    let tcfg = cfg.backbone_train();
    tcfg.validate()?;

    let mut csv = String::from("step,d_loss,g_loss,gp,d_real,d_fake\n");
    run_stage1(
        &mut bb,
        |rng, b| dataset.sample_frames(rng, b),
        &tcfg,
        cfg.seed,
        |l| {
            csv.push_str(&format!(
                "{},{:.6},{:.6},{:.6},{:.6},{:.6}\n",
                l.step, l.d_loss, l.g_loss, l.gp, l.d_real, l.d_fake
            ));
            run.log(format!(
                "step {:>5}  d {:+.4}  g {:+.4}  gp {:.4}",
                l.step, l.d_loss, l.g_loss, l.gp
            ));
        },
    )?;
    run.write("train.csv", csv)?;

    let freeze = bb.freeze();
    write_roles(&args.out, bb.to_roles())?;
    run.log(format!(
        "froze backbone (checksum {:#018x}), wrote checkpoint {}",
        freeze.weight_checksum,
        file_name(&args.out)
    ));
    run.finish()
}

#[derive(Args)]
pub struct TrainPluginArgs {
    /// Frozen stage-1 checkpoint
    #[arg(long)]
    backbone: PathBuf,
    /// JSON run configuration
    #[arg(long)]
    config: Option<PathBuf>,
    /// Checkpoint to write (plugin + video discriminator + the frozen backbone)
    #[arg(long)]
    out: PathBuf,
    /// Run directory; defaults to `<out stem>.run` beside the checkpoint
    #[arg(long)]
    run_dir: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    /// Train the plugin on the saturating minimax loss instead of the
    /// non-saturating default
    #[arg(long)]
    saturating: bool,
}

pub fn train_plugin(args: TrainPluginArgs) -> Result<()> {
    let mut cfg = config::resolve(args.config.as_deref())?;
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    if let Some(v) = args.epochs {
        cfg.epochs = v;
    }
    if let Some(v) = args.batch {
        cfg.batch = v;
    }
    if let Some(v) = args.lr {
        cfg.lr = v;
    }
    if args.saturating {
        cfg.saturating = true;
    }

    let ck = Checkpoint::read(&args.backbone)?;
    let bb = Backbone::<f32>::from_checkpoint(&ck)?;
    if !bb.frozen {
        return Err(Error::Contract(format!(
            "freeze contract: {} holds an unfrozen backbone; stage 2 requires stage 1's \
             frozen output so generator and critic weights cannot move",
            file_name(&args.backbone)
        )));
    }
    let freeze = FreezeState { frozen: true, weight_checksum: bb.checksum() };

    let root = args.run_dir.clone().unwrap_or_else(|| default_run_dir(&args.out));
    let mut run = RunDir::create(&root, "train-plugin", cfg.seed, &cfg.to_json())?;
    let dataset = synthesize(&cfg, &mut run)?;

    let mut plugin = PluginNet::<f32>::new(cfg.seed);
    let mut disc = VideoDiscriminator::<f32>::new(cfg.seed);
    let s2 = cfg.stage2();
    s2.validate()?;

    let mut csv = String::from(STAGE2_LOG_HEADER);
    csv.push('\n');
    run_stage2(&mut plugin, &mut disc, &bb, &freeze, &dataset, &s2, cfg.seed, |l| {
        csv.push_str(&l.csv_row());
        csv.push('\n');
        if l.step == 0 {
            run.log(format!(
                "epoch {:>3}  d {:.4}  g {:.4}  D(real) {:.3}  D(fake) {:.3}",
                l.epoch, l.d_loss, l.g_loss, l.d_real, l.d_fake
            ));
        }
    })?;
    run.write("train.csv", csv)?;
    bb.verify_frozen(&freeze)?;

    let mut roles = vec![plugin.to_role(), disc.to_role()];
    roles.extend(bb.to_roles());
    write_roles(&args.out, roles)?;
    run.log(format!(
        "backbone checksum unchanged ({:#018x}), wrote checkpoint {}",
        freeze.weight_checksum,
        file_name(&args.out)
    ));
    run.finish()
}

fn synthesize(cfg: &RunConfig, run: &mut RunDir) -> Result<Dataset> {
    let spec = cfg.dataset_spec();
    spec.validate()?;
    let dataset = Dataset::synthesize(&spec, cfg.seed)?;
    run.log(format!(
        "dataset: {} videos x {} frames at {}px (seed {})",
        spec.n_videos, spec.n_frames, spec.resolution, cfg.seed
    ));
    Ok(dataset)
}

fn write_roles(out: &Path, roles: Vec<trajgan::checkpoint::Role>) -> Result<()> {
    let mut ck = Checkpoint::new();
    for r in roles {
        ck.push_role(r);
    }
    ck.write(out)
}

/// Final path component, for logs that must stay free of absolute paths.
fn file_name(p: &std::path::Path) -> String {
    p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_else(|| p.display().to_string())
}
