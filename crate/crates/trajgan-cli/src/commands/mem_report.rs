use clap::{Args, ValueEnum};
use trajgan::memreport::{compare, profile, MemoryProfile, PIPELINE_BASELINE, PIPELINE_MEVGAN};
use trajgan::{Error, Result};

/// Resolutions the scaling claim is checked over.
const SWEEP: [usize; 3] = [16, 32, 64];

#[derive(Args)]
pub struct MemReportArgs {
    /// Profile one pipeline; with no pipeline, profile both, assert the
    /// sizing claims and print the ratios
    #[arg(long, value_enum)]
    pipeline: Option<Pipeline>,
    #[arg(long, default_value_t = 8)]
    batch: usize,
    #[arg(long, default_value_t = 8)]
    frames: usize,
    #[arg(long, default_value_t = 32)]
    resolution: usize,
    /// Emit JSON instead of aligned text
    #[arg(long)]
    json: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Pipeline {
    Mevgan,
    Baseline,
}

impl Pipeline {
    fn id(self) -> &'static str {
        match self {
            Pipeline::Mevgan => PIPELINE_MEVGAN,
            Pipeline::Baseline => PIPELINE_BASELINE,
        }
    }
}

pub fn mem_report(args: MemReportArgs) -> Result<()> {
    if let Some(p) = args.pipeline {
        let prof = profile(p.id(), args.batch, args.frames, args.resolution)?;
        if args.json {
            println!("{:#}", profile_json(&prof));
        } else {
            println!("{prof}");
        }
        return Ok(());
    }

    let cmp = compare(args.batch, args.frames, args.resolution)?;
    let mut sweep = Vec::with_capacity(SWEEP.len());
    for &res in &SWEEP {
        let m = profile(PIPELINE_MEVGAN, args.batch, args.frames, res)?.trainable_params;
        let b = profile(PIPELINE_BASELINE, args.batch, args.frames, res)?.trainable_params;
        sweep.push((res, m, b));
    }
    // The scaling claim: the plugin pipeline's trainable side never sees
    // a pixel, so its count must not move with resolution, while the
    // baseline's dense layers grow with the frame area.
    if !sweep.windows(2).all(|w| w[0].1 == w[1].1) {
        return Err(Error::Contract(format!(
            "{PIPELINE_MEVGAN} trainable parameters vary with resolution: {sweep:?}"
        )));
    }
    if !sweep.windows(2).all(|w| w[0].2 < w[1].2) {
        return Err(Error::Contract(format!(
            "{PIPELINE_BASELINE} trainable parameters fail to grow with resolution: {sweep:?}"
        )));
    }

    if args.json {
        let report = serde_json::json!({
            "mevgan": profile_json(&cmp.mevgan),
            "baseline": profile_json(&cmp.baseline),
            "trainable_ratio": cmp.trainable_ratio(),
            "total_ratio": cmp.total_ratio(),
            "trainable_by_resolution": sweep
                .iter()
                .map(|&(res, m, b)| {
                    serde_json::json!({ "resolution": res, "mevgan": m, "baseline": b })
                })
                .collect::<Vec<_>>(),
        });
        println!("{report:#}");
    } else {
        println!("{cmp}");
        println!("trainable params by resolution (batch {}, {} frames)", args.batch, args.frames);
        for &(res, m, b) in &sweep {
            println!("  {res:>3}px  {PIPELINE_MEVGAN} {m:>12}  {PIPELINE_BASELINE} {b:>12}");
        }
        println!("  {PIPELINE_MEVGAN} constant across resolutions; {PIPELINE_BASELINE} grows");
    }
    Ok(())
}

fn profile_json(p: &MemoryProfile) -> serde_json::Value {
    serde_json::json!({
        "pipeline": p.pipeline,
        "batch": p.batch,
        "n_frames": p.n_frames,
        "resolution": p.resolution,
        "trainable_params": p.trainable_params,
        "frozen_params": p.frozen_params,
        "peak_activation_bytes": p.peak_activation_bytes,
        "param_bytes": p.param_bytes(),
        "gradient_bytes": p.gradient_bytes(),
        "optimizer_state_bytes": p.optimizer_state_bytes,
        "total_bytes": p.total_bytes(),
    })
}
