//! Frame and clip file formats.
//!
//! Frames travel as binary Netpbm images: PGM (P5) out, PGM or PPM (P6,
//! reduced to luma) in, always with maxval 255. The value map between the
//! model's `[-1, 1]` range and bytes is fixed: `-1 -> 0`, `0 -> 128`
//! (half rounds away from zero), `1 -> 255`.
//!
//! Whole clips travel either as a directory of frames (lexicographic file
//! order = time order) or as a single binary container that reuses the
//! checkpoint format: one `clip` role holding the frame tensor plus a
//! small metadata tensor, CRC-validated like any checkpoint.

use std::fs;
use std::path::{Path, PathBuf};

use crate::checkpoint::{Checkpoint, Role};
use crate::data::ShapeKind;
use crate::tensor::Tensor;
use crate::{Error, Result};

/// `[-1, 1]` to byte, clamping, half away from zero. Exact anchors:
/// -1 -> 0, 0 -> 128, 1 -> 255.
pub fn to_byte(v: f32) -> u8 {
    let x = 127.5 * (v.clamp(-1.0, 1.0) as f64 + 1.0);
    (x + 0.5).floor().clamp(0.0, 255.0) as u8
}

/// Byte to `[-1, 1]` (the affine inverse; the byte map is lossy so this
/// is not a bitwise roundtrip).
pub fn from_byte(b: u8) -> f32 {
    (b as f64 / 127.5 - 1.0) as f32
}

fn squeeze_frame(frame: &Tensor<f32>) -> Result<(usize, usize)> {
    match *frame.shape() {
        [h, w] => Ok((h, w)),
        [1, h, w] => Ok((h, w)),
        ref s => Err(Error::Shape(format!("expected a (h, w) or (1, h, w) frame, got {s:?}"))),
    }
}

/// Write one grayscale frame as binary PGM.
pub fn write_pgm(path: &Path, frame: &Tensor<f32>) -> Result<()> {
    let (h, w) = squeeze_frame(frame)?;
    let mut bytes = format!("P5\n{w} {h}\n255\n").into_bytes();
    bytes.extend(frame.data().iter().map(|&v| to_byte(v)));
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Write one grayscale frame as binary PPM (P6), gray replicated across
/// the three channels. Reading it back reduces to the identical gray
/// value, so the PPM round trip matches the PGM one.
pub fn write_ppm(path: &Path, frame: &Tensor<f32>) -> Result<()> {
    let (h, w) = squeeze_frame(frame)?;
    let mut bytes = format!("P6\n{w} {h}\n255\n").into_bytes();
    for &v in frame.data() {
        let b = to_byte(v);
        bytes.extend([b, b, b]);
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Still-image flavor for frame exports.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StillFormat {
    Pgm,
    Ppm,
}

impl StillFormat {
    pub fn extension(self) -> &'static str {
        match self {
            StillFormat::Pgm => "pgm",
            StillFormat::Ppm => "ppm",
        }
    }
}

/// Whitespace- and comment-aware Netpbm header token reader.
struct HeaderScan<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> HeaderScan<'a> {
    fn skip_filler(&mut self) {
        while self.pos < self.buf.len() {
            match self.buf[self.pos] {
                b'#' => {
                    while self.pos < self.buf.len() && self.buf[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                c if c.is_ascii_whitespace() => self.pos += 1,
                _ => return,
            }
        }
    }

    fn number(&mut self, what: &str, path: &Path) -> Result<usize> {
        self.skip_filler();
        let start = self.pos;
        while self.pos < self.buf.len() && self.buf[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if self.pos == start {
            return Err(Error::Format(format!("{}: malformed Netpbm header ({what})", path.display())));
        }
        std::str::from_utf8(&self.buf[start..self.pos])
            .expect("digits are UTF-8")
            .parse()
            .map_err(|_| Error::Format(format!("{}: {what} out of range", path.display())))
    }
}

/// Read a binary PGM or PPM frame as grayscale `(h, w)` in `[-1, 1]`.
/// Color input is reduced with Rec. 601 luma.
pub fn read_frame(path: &Path) -> Result<Tensor<f32>> {
    let buf = fs::read(path).map_err(|e| Error::io(path, e))?;
    if buf.len() < 2 {
        return Err(Error::Format(format!("{}: not a Netpbm file", path.display())));
    }
    let channels = match &buf[..2] {
        b"P5" => 1usize,
        b"P6" => 3usize,
        m => {
            return Err(Error::Format(format!(
                "{}: unsupported Netpbm magic {:?} (want P5 or P6)",
                path.display(),
                String::from_utf8_lossy(m)
            )))
        }
    };
    let mut scan = HeaderScan { buf: &buf, pos: 2 };
    let w = scan.number("width", path)?;
    let h = scan.number("height", path)?;
    let maxval = scan.number("maxval", path)?;
    if w == 0 || h == 0 {
        return Err(Error::Format(format!("{}: degenerate {w}x{h} image", path.display())));
    }
    if maxval != 255 {
        return Err(Error::Format(format!("{}: maxval {maxval} unsupported (want 255)", path.display())));
    }
    // Exactly one whitespace byte separates the header from the raster.
    if scan.pos >= buf.len() || !buf[scan.pos].is_ascii_whitespace() {
        return Err(Error::Format(format!("{}: missing raster separator", path.display())));
    }
    let raster = &buf[scan.pos + 1..];
    let need = w * h * channels;
    if raster.len() < need {
        return Err(Error::Format(format!(
            "{}: raster holds {} bytes, header promises {need}",
            path.display(),
            raster.len()
        )));
    }
    let data: Vec<f32> = if channels == 1 {
        raster[..need].iter().map(|&b| from_byte(b)).collect()
    } else {
        raster[..need]
            .chunks_exact(3)
            .map(|p| {
                let luma = 0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64;
                from_byte((luma + 0.5).floor().clamp(0.0, 255.0) as u8)
            })
            .collect()
    };
    Tensor::new(&[h, w], data)
}

/// Bilinear resample `(h, w)` data to `(oh, ow)` (pixel centers aligned,
/// edges clamped). Same-size input is copied exactly.
fn bilinear(src: &[f32], h: usize, w: usize, oh: usize, ow: usize) -> Vec<f32> {
    let mut out = vec![0f32; oh * ow];
    let sy = h as f64 / oh as f64;
    let sx = w as f64 / ow as f64;
    for oy in 0..oh {
        let fy = ((oy as f64 + 0.5) * sy - 0.5).clamp(0.0, (h - 1) as f64);
        let y0 = fy.floor() as usize;
        let y1 = (y0 + 1).min(h - 1);
        let wy = (fy - y0 as f64) as f32;
        for ox in 0..ow {
            let fx = ((ox as f64 + 0.5) * sx - 0.5).clamp(0.0, (w - 1) as f64);
            let x0 = fx.floor() as usize;
            let x1 = (x0 + 1).min(w - 1);
            let wx = (fx - x0 as f64) as f32;
            let top = src[y0 * w + x0] * (1.0 - wx) + src[y0 * w + x1] * wx;
            let bot = src[y1 * w + x0] * (1.0 - wx) + src[y1 * w + x1] * wx;
            out[oy * ow + ox] = top * (1.0 - wy) + bot * wy;
        }
    }
    out
}

/// Write a clip `(n, 1, res, res)` as numbered still frames
/// `<prefix>_000.<ext>`, ... in `dir`. Returns the paths written.
pub fn save_frames(dir: &Path, clip: &Tensor<f32>, prefix: &str, format: StillFormat) -> Result<Vec<PathBuf>> {
    let &[n, 1, h, w] = clip.shape() else {
        return Err(Error::Shape(format!("expected a (n, 1, h, w) clip, got {:?}", clip.shape())));
    };
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut paths = Vec::with_capacity(n);
    for f in 0..n {
        let path = dir.join(format!("{prefix}_{f:03}.{}", format.extension()));
        let frame = Tensor::new(&[h, w], clip.data()[f * h * w..(f + 1) * h * w].to_vec())?;
        match format {
            StillFormat::Pgm => write_pgm(&path, &frame)?,
            StillFormat::Ppm => write_ppm(&path, &frame)?,
        }
        paths.push(path);
    }
    Ok(paths)
}

/// Load every `.pgm`/`.ppm` in a directory as one clip `(n, 1, res,
/// res)`, frames in lexicographic filename order, resized bilinearly.
/// A directory with no frame files is an error (an empty clip has no
/// meaning downstream).
pub fn load_frame_dir(dir: &Path, resolution: usize) -> Result<Tensor<f32>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            matches!(
                p.extension().and_then(|e| e.to_str()),
                Some("pgm") | Some("ppm")
            )
        })
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::Contract(format!(
            "{}: no .pgm/.ppm frames found; nothing to load",
            dir.display()
        )));
    }
    let mut data = Vec::with_capacity(files.len() * resolution * resolution);
    for path in &files {
        let frame = read_frame(path)?;
        let (h, w) = (frame.shape()[0], frame.shape()[1]);
        data.extend(bilinear(frame.data(), h, w, resolution, resolution));
    }
    Tensor::new(&[files.len(), 1, resolution, resolution], data)
}

/// Load a corpus laid out as one subdirectory of frames per video.
/// Subdirectories are visited in lexicographic name order; each becomes
/// one `(name, frames)` pair via [`load_frame_dir`]. A root with no
/// subdirectories yields an empty list (the caller decides whether that
/// is worth a warning).
pub fn load_video_dirs(root: &Path, resolution: usize) -> Result<Vec<(String, Tensor<f32>)>> {
    let mut dirs: Vec<PathBuf> = fs::read_dir(root)
        .map_err(|e| Error::io(root, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    dirs.sort();
    let mut out = Vec::with_capacity(dirs.len());
    for dir in dirs {
        let name = dir
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        out.push((name, load_frame_dir(&dir, resolution)?));
    }
    Ok(out)
}

/// A clip plus its metadata, as stored in the binary container.
#[derive(Clone, Debug)]
pub struct Clip {
    /// `(n, 1, res, res)` in `[-1, 1]`.
    pub frames: Tensor<f32>,
    pub fps: f64,
    pub kind: Option<ShapeKind>,
}

const CLIP_ROLE: &str = "video";

/// Write a clip container (checkpoint layout, one `clip` role).
pub fn write_clip(path: &Path, clip: &Clip) -> Result<()> {
    let &[_, 1, _, _] = clip.frames.shape() else {
        return Err(Error::Shape(format!("expected a (n, 1, h, w) clip, got {:?}", clip.frames.shape())));
    };
    if !(clip.fps > 0.0 && clip.fps.is_finite()) {
        return Err(Error::Contract(format!("clip fps {} is invalid", clip.fps)));
    }
    let class = clip.kind.map(|k| k.class() as f32).unwrap_or(-1.0);
    let meta = Tensor::new(&[2], vec![clip.fps as f32, class])?;
    let mut ck = Checkpoint::new();
    ck.push_role(Role {
        name: CLIP_ROLE.into(),
        frozen: true,
        tensors: vec![("frames".into(), clip.frames.clone()), ("meta".into(), meta)],
    });
    ck.write(path)
}

/// Read a clip container back.
pub fn read_clip(path: &Path) -> Result<Clip> {
    let ck = Checkpoint::read(path)?;
    let role = ck.require_role(CLIP_ROLE)?;
    let frames = role
        .tensor("frames")
        .ok_or_else(|| Error::Format(format!("{}: clip container lacks frames", path.display())))?;
    let &[_, 1, _, _] = frames.shape() else {
        return Err(Error::Format(format!(
            "{}: clip frames have shape {:?}, want (n, 1, h, w)",
            path.display(),
            frames.shape()
        )));
    };
    let meta = role
        .tensor("meta")
        .ok_or_else(|| Error::Format(format!("{}: clip container lacks metadata", path.display())))?;
    if meta.shape() != [2] {
        return Err(Error::Format(format!("{}: clip metadata malformed", path.display())));
    }
    let fps = meta.data()[0] as f64;
    if !(fps > 0.0 && fps.is_finite()) {
        return Err(Error::Format(format!("{}: clip fps {fps} is invalid", path.display())));
    }
    let class = meta.data()[1];
    let kind = if class < 0.0 {
        None
    } else {
        Some(match class as usize {
            0 => ShapeKind::Disc,
            1 => ShapeKind::Square,
            c => return Err(Error::Format(format!("{}: unknown clip class {c}", path.display()))),
        })
    };
    Ok(Clip { frames: frames.clone(), fps, kind })
}

/// One dataset manifest row.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ManifestEntry {
    pub id: usize,
    pub label: String,
    pub n_frames: usize,
    pub path: String,
}

/// Write the dataset manifest: a CSV with header
/// `id,label,n_frames,path`.
pub fn write_manifest(path: &Path, entries: &[ManifestEntry]) -> Result<()> {
    let mut out = String::from("id,label,n_frames,path\n");
    for e in entries {
        if e.label.contains(',') || e.path.contains(',') {
            return Err(Error::Contract(format!("manifest fields may not contain commas: {e:?}")));
        }
        out.push_str(&format!("{},{},{},{}\n", e.id, e.label, e.n_frames, e.path));
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    match lines.next() {
        Some("id,label,n_frames,path") => {}
        other => {
            return Err(Error::Format(format!(
                "{}: manifest header {:?} is not 'id,label,n_frames,path'",
                path.display(),
                other.unwrap_or("")
            )))
        }
    }
    let mut entries = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 4 {
            return Err(Error::Format(format!(
                "{}: line {} has {} columns, want 4",
                path.display(),
                lineno + 2,
                cols.len()
            )));
        }
        let bad = |what: &str| Error::Format(format!("{}: line {}: bad {what}", path.display(), lineno + 2));
        entries.push(ManifestEntry {
            id: cols[0].parse().map_err(|_| bad("id"))?,
            label: cols[1].to_string(),
            n_frames: cols[2].parse().map_err(|_| bad("n_frames"))?,
            path: cols[3].to_string(),
        });
    }
    Ok(entries)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn byte_map_anchors_are_exact() {
        assert_eq!(to_byte(-1.0), 0);
        assert_eq!(to_byte(0.0), 128);
        assert_eq!(to_byte(1.0), 255);
        assert_eq!(to_byte(-2.0), 0);
        assert_eq!(to_byte(2.0), 255);
        // Monotone, and quantization error stays within one byte step.
        let mut prev = 0u8;
        for i in 0..=1000 {
            let v = -1.0 + 2.0 * i as f32 / 1000.0;
            let b = to_byte(v);
            assert!(b >= prev);
            assert!((from_byte(b) - v).abs() <= 1.0 / 255.0 + 1e-6);
            prev = b;
        }
    }

    #[test]
    fn pgm_header_is_canonical() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.pgm");
        let frame = Tensor::new(&[2, 3], vec![-1.0, 0.0, 1.0, 0.5, -0.5, 0.25]).unwrap();
        write_pgm(&path, &frame).unwrap();
        let bytes = fs::read(&path).unwrap();
        assert!(bytes.starts_with(b"P5\n3 2\n255\n"));
        assert_eq!(bytes.len(), b"P5\n3 2\n255\n".len() + 6);
    }

    #[test]
    fn pgm_roundtrips_through_the_byte_map() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.pgm");
        let frame = Tensor::<f32>::randn(&[5, 4], 1).unwrap();
        write_pgm(&path, &frame).unwrap();
        let back = read_frame(&path).unwrap();
        assert_eq!(back.shape(), &[5, 4]);
        for (&a, &b) in frame.data().iter().zip(back.data()) {
            assert_eq!(from_byte(to_byte(a)), b);
        }
    }

    #[test]
    fn header_comments_and_whitespace_are_tolerated() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.pgm");
        let mut bytes = b"P5 # magic\n# a comment line\n  2\t1 # dims\n255\n".to_vec();
        bytes.extend([0u8, 255]);
        fs::write(&path, bytes).unwrap();
        let t = read_frame(&path).unwrap();
        assert_eq!(t.shape(), &[1, 2]);
        assert_eq!(t.data(), &[-1.0, 1.0]);
    }

    #[test]
    fn truncated_and_alien_files_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let trunc = dir.path().join("t.pgm");
        fs::write(&trunc, b"P5\n4 4\n255\nxy").unwrap();
        assert!(read_frame(&trunc).is_err());
        let alien = dir.path().join("a.pgm");
        fs::write(&alien, b"GIF89a").unwrap();
        assert!(read_frame(&alien).is_err());
        let deep = dir.path().join("d.pgm");
        fs::write(&deep, b"P5\n2 2\n65535\n\0\0\0\0\0\0\0\0").unwrap();
        assert!(read_frame(&deep).is_err());
    }

    #[test]
    fn ppm_reduces_to_luma() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.ppm");
        let mut bytes = b"P6\n1 1\n255\n".to_vec();
        bytes.extend([255u8, 0, 0]);
        fs::write(&path, bytes).unwrap();
        let t = read_frame(&path).unwrap();
        // 0.299 * 255 = 76.245 -> byte 76.
        assert_eq!(to_byte(t.data()[0]), 76);
    }

    #[test]
    fn frame_dir_loads_in_lexicographic_order() {
        let dir = tempfile::tempdir().unwrap();
        // Written out of order on purpose.
        for (name, v) in [("b.pgm", 1.0f32), ("a.pgm", -1.0), ("c.pgm", 0.0)] {
            write_pgm(&dir.path().join(name), &Tensor::new(&[2, 2], vec![v; 4]).unwrap()).unwrap();
        }
        fs::write(dir.path().join("notes.txt"), "ignored").unwrap();
        let clip = load_frame_dir(dir.path(), 2).unwrap();
        assert_eq!(clip.shape(), &[3, 1, 2, 2]);
        assert_eq!(clip.data()[0], -1.0);
        assert_eq!(clip.data()[4], 1.0);
        assert_eq!(to_byte(clip.data()[8]), 128);
    }

    #[test]
    fn empty_frame_dir_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let err = load_frame_dir(dir.path(), 8).unwrap_err();
        assert!(matches!(err, Error::Contract(_)));
    }

    #[test]
    fn same_size_bilinear_is_an_exact_copy() {
        let src: Vec<f32> = (0..12).map(|i| i as f32 * 0.1 - 0.5).collect();
        assert_eq!(bilinear(&src, 3, 4, 3, 4), src);
    }

    #[test]
    fn downsampling_averages_neighbourhoods() {
        // 2x2 checkerboard blocks collapse to their mean.
        let src = vec![1.0f32, -1.0, -1.0, 1.0];
        let out = bilinear(&src, 2, 2, 1, 1);
        assert_eq!(out, vec![0.0]);
    }

    #[test]
    fn clip_container_roundtrips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("clip.bin");
        let frames = Tensor::<f32>::randn(&[3, 1, 4, 4], 2).unwrap();
        let clip = Clip { frames: frames.clone(), fps: 8.0, kind: Some(ShapeKind::Square) };
        write_clip(&path, &clip).unwrap();
        let back = read_clip(&path).unwrap();
        assert_eq!(back.frames.data(), frames.data());
        assert_eq!(back.fps, 8.0);
        assert_eq!(back.kind, Some(ShapeKind::Square));
    }

    #[test]
    fn corrupted_clip_container_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("clip.bin");
        let frames = Tensor::<f32>::randn(&[2, 1, 4, 4], 3).unwrap();
        write_clip(&path, &Clip { frames, fps: 8.0, kind: None }).unwrap();
        let mut bytes = fs::read(&path).unwrap();
        let mid = bytes.len() / 2;
        bytes[mid] ^= 0x40;
        fs::write(&path, bytes).unwrap();
        assert!(read_clip(&path).is_err());
    }

    #[test]
    fn manifest_roundtrips_and_validates() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("manifest.csv");
        let entries = vec![
            ManifestEntry { id: 0, label: "disc".into(), n_frames: 64, path: "videos/clip_000.bin".into() },
            ManifestEntry { id: 1, label: "square".into(), n_frames: 64, path: "videos/clip_001.bin".into() },
        ];
        write_manifest(&path, &entries).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("id,label,n_frames,path\n"));
        assert_eq!(read_manifest(&path).unwrap(), entries);

        fs::write(&path, "id,label\n1,disc\n").unwrap();
        assert!(read_manifest(&path).is_err());
        fs::write(&path, "id,label,n_frames,path\nx,disc,8,p\n").unwrap();
        assert!(read_manifest(&path).is_err());
    }

    #[test]
    fn save_frames_writes_numbered_files() {
        let dir = tempfile::tempdir().unwrap();
        let clip = Tensor::<f32>::randn(&[3, 1, 4, 4], 4).unwrap();
        let paths = save_frames(dir.path(), &clip, "frame", StillFormat::Pgm).unwrap();
        assert_eq!(paths.len(), 3);
        assert!(paths[0].ends_with("frame_000.pgm"));
        assert!(paths[2].ends_with("frame_002.pgm"));
        let back = load_frame_dir(dir.path(), 4).unwrap();
        for (&a, &b) in clip.data().iter().zip(back.data()) {
            assert_eq!(from_byte(to_byte(a)), b);
        }
    }

    #[test]
    fn ppm_export_roundtrips_like_pgm() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.ppm");
        let frame = Tensor::<f32>::randn(&[4, 3], 9).unwrap();
        write_ppm(&path, &frame).unwrap();
        let bytes = fs::read(&path).unwrap();
        assert!(bytes.starts_with(b"P6\n3 4\n255\n"));
        assert_eq!(bytes.len(), b"P6\n3 4\n255\n".len() + 3 * 12);
        let back = read_frame(&path).unwrap();
        for (&a, &b) in frame.data().iter().zip(back.data()) {
            assert_eq!(from_byte(to_byte(a)), b);
        }
    }

    #[test]
    fn video_dirs_load_per_subdirectory_in_name_order() {
        let root = tempfile::tempdir().unwrap();
        for (sub, v, n) in [("vid_b", 1.0f32, 3usize), ("vid_a", -1.0, 2)] {
            let clip = Tensor::new(&[n, 1, 2, 2], vec![v; n * 4]).unwrap();
            save_frames(&root.path().join(sub), &clip, "f", StillFormat::Pgm).unwrap();
        }
        fs::write(root.path().join("manifest.csv"), "ignored").unwrap();
        let vids = load_video_dirs(root.path(), 2).unwrap();
        assert_eq!(vids.len(), 2);
        assert_eq!(vids[0].0, "vid_a");
        assert_eq!(vids[0].1.shape(), &[2, 1, 2, 2]);
        assert_eq!(vids[1].0, "vid_b");
        assert_eq!(vids[1].1.shape(), &[3, 1, 2, 2]);
        assert_eq!(vids[0].1.data()[0], -1.0);

        let empty = tempfile::tempdir().unwrap();
        assert!(load_video_dirs(empty.path(), 2).unwrap().is_empty());
    }
}
