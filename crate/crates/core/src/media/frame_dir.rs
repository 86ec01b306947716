//! Directory of numbered PNG frames plus a frame-rate sidecar.

use std::path::{Path, PathBuf};

use super::{Frame, FrameRate, FrameSequence, MediaError};

/// Name of the sidecar file holding the frame rate, e.g. `30`,
/// `30000/1001`, `29.97` or `frame_rate = 30`.
pub const FRAME_RATE_SIDECAR: &str = "frame_rate.txt";

pub fn parse_frame_rate(text: &str) -> Result<FrameRate, MediaError> {
    let bad = || MediaError::Unsupported(format!("cannot parse frame rate from '{}'", text.trim()));
    let value = text
        .lines()
        .map(str::trim)
        .find(|l| !l.is_empty() && !l.starts_with('#'))
        .ok_or_else(bad)?;
    let value = match value.split_once(['=', ':']) {
        Some((key, v)) if key.trim().eq_ignore_ascii_case("frame_rate") => v.trim(),
        _ => value,
    };
    if let Some((n, d)) = value.split_once(['/', ':']) {
        let n = n.trim().parse().map_err(|_| bad())?;
        let d = d.trim().parse().map_err(|_| bad())?;
        return FrameRate::new(n, d);
    }
    if let Ok(n) = value.parse::<u32>() {
        return FrameRate::new(n, 1);
    }
    let fps: f64 = value.parse().map_err(|_| bad())?;
    if !(fps.is_finite() && fps > 0.0 && fps < 1e6) {
        return Err(bad());
    }
    FrameRate::new((fps * 1000.0).round() as u32, 1000)
}

/// Read every `*.png` in `dir`, ordered by file name.
pub fn read_frame_dir(dir: impl AsRef<Path>) -> Result<FrameSequence, MediaError> {
    let dir = dir.as_ref();
    let rate = parse_frame_rate(&std::fs::read_to_string(dir.join(FRAME_RATE_SIDECAR))?)?;
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension()
                .and_then(|e| e.to_str())
                .is_some_and(|e| e.eq_ignore_ascii_case("png"))
        })
        .collect();
    paths.sort();
    let frames = paths
        .iter()
        .enumerate()
        .map(|(index, path)| {
            let img = image::open(path)
                .map_err(|e| MediaError::Image(format!("{}: {e}", path.display())))?
                .into_rgb8();
            let (w, h) = img.dimensions();
            Frame::new(w as usize, h as usize, img.into_raw(), index)
        })
        .collect::<Result<Vec<_>, _>>()?;
    FrameSequence::new(frames, rate)
}
