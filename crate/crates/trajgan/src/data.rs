//! Synthetic bouncing-shape videos.
//!
//! Each video tracks one shape (a disc or an axis-aligned square) moving
//! at constant speed inside the frame, reflecting elastically off the
//! walls: a wall hit folds the position back into bounds and flips that
//! velocity component, so speed is preserved bit for bit. Frames are
//! grayscale in `[-1, 1]` (background -1, shape +1) rasterized with a
//! 4x4 subpixel grid per pixel, giving 17 distinct edge coverage levels.
//!
//! All geometry is computed in pixel units with f64, which makes two
//! useful properties exact rather than approximate: reflection preserves
//! `|v|` exactly, and translating a shape by exactly one pixel shifts its
//! rasterization by exactly one pixel (the subsample offsets and the
//! +1 are all exactly representable, so the coverage tests see bitwise
//! identical inputs).

use crate::rng::{stream, Rng};
use crate::tensor::Tensor;
use crate::{Error, Result};

/// Nominal playback rate of synthesized videos, frames per second.
pub const FPS: f64 = 8.0;
/// Shape radius (half-extent) as a fraction of the frame side.
pub const SHAPE_RADIUS_FRAC: f64 = 0.15;
/// Subpixel grid side used for rasterization.
const SUPERSAMPLE: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ShapeKind {
    Disc,
    Square,
}

impl ShapeKind {
    pub const ALL: [ShapeKind; 2] = [ShapeKind::Disc, ShapeKind::Square];

    pub fn label(&self) -> &'static str {
        match self {
            ShapeKind::Disc => "disc",
            ShapeKind::Square => "square",
        }
    }

    pub fn from_label(s: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|k| k.label() == s)
            .ok_or_else(|| Error::Format(format!("unknown shape label '{s}'")))
    }

    /// Class index for classification targets.
    pub fn class(&self) -> usize {
        match self {
            ShapeKind::Disc => 0,
            ShapeKind::Square => 1,
        }
    }

    fn covers(&self, dx: f64, dy: f64, r: f64) -> bool {
        match self {
            ShapeKind::Disc => dx * dx + dy * dy <= r * r,
            ShapeKind::Square => dx.abs().max(dy.abs()) <= r,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DatasetSpec {
    pub n_videos: usize,
    /// Frames per video.
    pub n_frames: usize,
    pub resolution: usize,
    pub fps: f64,
    /// Speed range in frame-fractions per frame.
    pub min_speed: f64,
    pub max_speed: f64,
}

impl Default for DatasetSpec {
    /// Desk-scale default: 48 videos of 64 frames at 32px.
    fn default() -> Self {
        DatasetSpec { n_videos: 48, n_frames: 64, resolution: 32, fps: FPS, min_speed: 0.03, max_speed: 0.07 }
    }
}

impl DatasetSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_videos == 0 || self.n_frames == 0 {
            return Err(Error::Config("dataset needs at least one video and one frame".into()));
        }
        if self.resolution < 8 {
            return Err(Error::Config(format!("dataset resolution {} is below 8", self.resolution)));
        }
        if !(self.fps > 0.0 && self.fps.is_finite()) {
            return Err(Error::Config(format!("dataset fps {} is invalid", self.fps)));
        }
        if !(self.min_speed > 0.0 && self.max_speed >= self.min_speed && self.max_speed < 0.5) {
            return Err(Error::Config(format!(
                "dataset speed range [{}, {}] is invalid",
                self.min_speed, self.max_speed
            )));
        }
        Ok(())
    }

    /// Shape radius in pixels.
    pub fn radius_px(&self) -> f64 {
        SHAPE_RADIUS_FRAC * self.resolution as f64
    }
}

/// One synthesized video and the trajectory that produced it.
#[derive(Clone, Debug)]
pub struct Video {
    pub id: usize,
    pub kind: ShapeKind,
    /// `(n_frames, 1, res, res)`, values in `[-1, 1]`.
    pub frames: Tensor<f32>,
    /// Center per frame, pixel units.
    pub centers: Vec<(f64, f64)>,
}

#[derive(Clone, Debug)]
pub struct Dataset {
    pub spec: DatasetSpec,
    pub videos: Vec<Video>,
}

/// Advance one coordinate by `v`, folding elastically at `lo`/`hi`.
/// Returns the new position and (possibly flipped) velocity.
fn advance(mut p: f64, mut v: f64, lo: f64, hi: f64) -> (f64, f64) {
    p += v;
    loop {
        if p < lo {
            p = 2.0 * lo - p;
            v = -v;
        } else if p > hi {
            p = 2.0 * hi - p;
            v = -v;
        } else {
            return (p, v);
        }
    }
}

/// Rasterize a shape centered at `(cx, cy)` (pixel units) into one
/// `res*res` grayscale frame.
fn raster(kind: ShapeKind, cx: f64, cy: f64, r: f64, res: usize) -> Vec<f32> {
    let mut out = vec![0f32; res * res];
    let subs = SUPERSAMPLE * SUPERSAMPLE;
    for py in 0..res {
        for px in 0..res {
            let mut hit = 0usize;
            for sy in 0..SUPERSAMPLE {
                for sx in 0..SUPERSAMPLE {
                    let x = px as f64 + (sx as f64 + 0.5) / SUPERSAMPLE as f64;
                    let y = py as f64 + (sy as f64 + 0.5) / SUPERSAMPLE as f64;
                    if kind.covers(x - cx, y - cy, r) {
                        hit += 1;
                    }
                }
            }
            out[py * res + px] = (2.0 * hit as f64 / subs as f64 - 1.0) as f32;
        }
    }
    out
}

impl Dataset {
    /// Generate the full corpus deterministically from a seed.
    pub fn synthesize(spec: &DatasetSpec, seed: u64) -> Result<Dataset> {
        spec.validate()?;
        let mut rng = Rng::stream(seed, stream::DATA);
        let res = spec.resolution;
        let r = spec.radius_px();
        let (lo, hi) = (r, res as f64 - r);
        if lo >= hi {
            return Err(Error::Config(format!("shape radius {r}px leaves no room at {res}px")));
        }
        let mut videos = Vec::with_capacity(spec.n_videos);
        for id in 0..spec.n_videos {
            let kind = ShapeKind::ALL[id % ShapeKind::ALL.len()];
            let mut cx = rng.uniform(lo, hi);
            let mut cy = rng.uniform(lo, hi);
            let speed = rng.uniform(spec.min_speed, spec.max_speed) * res as f64;
            let angle = rng.uniform(0.0, std::f64::consts::TAU);
            let mut vx = speed * angle.cos();
            let mut vy = speed * angle.sin();
            let mut frames = Vec::with_capacity(spec.n_frames * res * res);
            let mut centers = Vec::with_capacity(spec.n_frames);
            for _ in 0..spec.n_frames {
                centers.push((cx, cy));
                frames.extend_from_slice(&raster(kind, cx, cy, r, res));
                (cx, vx) = advance(cx, vx, lo, hi);
                (cy, vy) = advance(cy, vy, lo, hi);
            }
            let frames = Tensor::new(&[spec.n_frames, 1, res, res], frames)?;
            videos.push(Video { id, kind, frames, centers });
        }
        Ok(Dataset { spec: *spec, videos })
    }

    /// Copy `len` consecutive frames of one video, starting at `start`.
    pub fn clip(&self, video: usize, start: usize, len: usize) -> Result<Tensor<f32>> {
        let v = self
            .videos
            .get(video)
            .ok_or_else(|| Error::Contract(format!("video {video} out of range ({})", self.videos.len())))?;
        if len == 0 || start + len > self.spec.n_frames {
            return Err(Error::Contract(format!(
                "clip [{start}, {start}+{len}) exceeds the {}-frame video",
                self.spec.n_frames
            )));
        }
        let res = self.spec.resolution;
        let px = res * res;
        let data = v.frames.data()[start * px..(start + len) * px].to_vec();
        Tensor::new(&[len, 1, res, res], data)
    }

    /// Uniformly sample a clip of `len` consecutive frames. Returns
    /// (video index, start frame, frames).
    pub fn sample_clip(&self, rng: &mut Rng, len: usize) -> Result<(usize, usize, Tensor<f32>)> {
        if len > self.spec.n_frames {
            return Err(Error::Contract(format!(
                "clip length {len} exceeds the {}-frame videos",
                self.spec.n_frames
            )));
        }
        let video = rng.below(self.videos.len());
        let start = rng.below(self.spec.n_frames - len + 1);
        Ok((video, start, self.clip(video, start, len)?))
    }

    /// Uniformly sample `batch` individual frames across all videos (the
    /// image-GAN training distribution).
    pub fn sample_frames(&self, rng: &mut Rng, batch: usize) -> Result<Tensor<f32>> {
        let res = self.spec.resolution;
        let px = res * res;
        let mut data = Vec::with_capacity(batch * px);
        for _ in 0..batch {
            let v = rng.below(self.videos.len());
            let f = rng.below(self.spec.n_frames);
            data.extend_from_slice(&self.videos[v].frames.data()[f * px..(f + 1) * px]);
        }
        Tensor::new(&[batch, 1, res, res], data)
    }
}
