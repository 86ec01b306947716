//! Decoded video frames, one-second clip partitioning and uniform frame
//! sampling.

mod frame_dir;
mod y4m;

pub use frame_dir::{parse_frame_rate, read_frame_dir, FRAME_RATE_SIDECAR};
pub use y4m::{parse_y4m, read_y4m, write_y4m};

use thiserror::Error;

/// Smallest accepted frame edge, in pixels.
pub const MIN_FRAME_EDGE: usize = 16;

#[derive(Debug, Error)]
pub enum MediaError {
    #[error("y4m parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },
    #[error("truncated payload in frame {frame_index}: expected {expected} bytes, found {available}")]
    Truncated {
        frame_index: usize,
        expected: usize,
        available: usize,
    },
    #[error("unsupported input: {0}")]
    Unsupported(String),
    #[error("invalid frame: {0}")]
    InvalidFrame(String),
    #[error("invalid frame rate {num}/{den}")]
    InvalidFrameRate { num: u32, den: u32 },
    #[error("video shorter than one clip ({frames} frames, clip length {clip_length})")]
    ShorterThanClip { frames: usize, clip_length: usize },
    #[error("cannot sample {requested} frames from a clip of {frames}")]
    Sampling { frames: usize, requested: usize },
    #[error("image decode error: {0}")]
    Image(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Chroma layout of a YUV source.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChromaSampling {
    Cs420,
    Cs444,
}

impl ChromaSampling {
    pub fn chroma_dims(self, width: usize, height: usize) -> (usize, usize) {
        match self {
            ChromaSampling::Cs420 => (width.div_ceil(2), height.div_ceil(2)),
            ChromaSampling::Cs444 => (width, height),
        }
    }

    pub fn frame_bytes(self, width: usize, height: usize) -> usize {
        let (cw, ch) = self.chroma_dims(width, height);
        width * height + 2 * cw * ch
    }
}

/// Raw Y, U, V planes (concatenated) a frame was decoded from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourcePlanes {
    pub chroma: ChromaSampling,
    pub data: Vec<u8>,
}

/// One decoded RGB frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    width: usize,
    height: usize,
    rgb: Vec<u8>,
    index: usize,
    source: Option<SourcePlanes>,
}

impl Frame {
    pub fn new(width: usize, height: usize, rgb: Vec<u8>, index: usize) -> Result<Self, MediaError> {
        if width < MIN_FRAME_EDGE || height < MIN_FRAME_EDGE {
            return Err(MediaError::InvalidFrame(format!(
                "{width}x{height} is below the {MIN_FRAME_EDGE}x{MIN_FRAME_EDGE} minimum"
            )));
        }
        if rgb.len() != width * height * 3 {
            return Err(MediaError::InvalidFrame(format!(
                "rgb buffer has {} bytes, expected {}",
                rgb.len(),
                width * height * 3
            )));
        }
        Ok(Self {
            width,
            height,
            rgb,
            index,
            source: None,
        })
    }

    /// A frame filled with a single colour.
    pub fn filled(width: usize, height: usize, color: [u8; 3], index: usize) -> Result<Self, MediaError> {
        let rgb = color.iter().copied().cycle().take(width * height * 3).collect();
        Self::new(width, height, rgb, index)
    }

    /// Build a frame by evaluating `f(x, y)` for every pixel.
    pub fn from_fn(
        width: usize,
        height: usize,
        index: usize,
        mut f: impl FnMut(usize, usize) -> [u8; 3],
    ) -> Result<Self, MediaError> {
        let mut rgb = Vec::with_capacity(width * height * 3);
        for y in 0..height {
            for x in 0..width {
                rgb.extend_from_slice(&f(x, y));
            }
        }
        Self::new(width, height, rgb, index)
    }

    pub(crate) fn with_source(mut self, source: SourcePlanes) -> Self {
        self.source = Some(source);
        self
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn rgb(&self) -> &[u8] {
        &self.rgb
    }

    pub fn index(&self) -> usize {
        self.index
    }

    /// YUV planes the frame was decoded from, when it came from a Y4M file.
    pub fn source(&self) -> Option<&SourcePlanes> {
        self.source.as_ref()
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let o = (y * self.width + x) * 3;
        [self.rgb[o], self.rgb[o + 1], self.rgb[o + 2]]
    }
}

/// 8-bit luma samples, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LumaPlane {
    width: usize,
    height: usize,
    y: Vec<u8>,
}

impl LumaPlane {
    pub fn new(width: usize, height: usize, y: Vec<u8>) -> Result<Self, MediaError> {
        if width == 0 || height == 0 || y.len() != width * height {
            return Err(MediaError::InvalidFrame(format!(
                "luma plane {width}x{height} with {} samples",
                y.len()
            )));
        }
        Ok(Self { width, height, y })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> u8) -> Result<Self, MediaError> {
        let mut y = Vec::with_capacity(width * height);
        for row in 0..height {
            for col in 0..width {
                y.push(f(col, row));
            }
        }
        Self::new(width, height, y)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn samples(&self) -> &[u8] {
        &self.y
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> u8 {
        self.y[y * self.width + x]
    }
}

/// BT.601 full-range luma, `round(0.299 R + 0.587 G + 0.114 B)`.
pub fn to_luma(frame: &Frame) -> LumaPlane {
    let y = frame.rgb.chunks_exact(3).map(|p| luma_of(p[0], p[1], p[2])).collect();
    LumaPlane {
        width: frame.width,
        height: frame.height,
        y,
    }
}

#[inline]
pub(crate) fn luma_of(r: u8, g: u8, b: u8) -> u8 {
    let v = 0.299 * r as f64 + 0.587 * g as f64 + 0.114 * b as f64;
    v.round().clamp(0.0, 255.0) as u8
}

/// Rational frame rate as declared by the container.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameRate {
    pub num: u32,
    pub den: u32,
}

impl FrameRate {
    pub fn new(num: u32, den: u32) -> Result<Self, MediaError> {
        let rate = Self { num, den };
        if den == 0 || num == 0 || rate.clip_length() == 0 {
            return Err(MediaError::InvalidFrameRate { num, den });
        }
        Ok(rate)
    }

    pub fn integer(fps: u32) -> Result<Self, MediaError> {
        Self::new(fps, 1)
    }

    pub fn fps(&self) -> f64 {
        self.num as f64 / self.den as f64
    }

    /// Frames per one-second clip: the rate rounded to the nearest integer
    /// (halves round up).
    pub fn clip_length(&self) -> usize {
        let (n, d) = (self.num as u64, self.den as u64);
        ((2 * n + d) / (2 * d)) as usize
    }
}

/// An ordered run of decoded frames at a fixed rate.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSequence {
    frames: Vec<Frame>,
    rate: FrameRate,
}

impl FrameSequence {
    pub fn new(frames: Vec<Frame>, rate: FrameRate) -> Result<Self, MediaError> {
        if let Some(first) = frames.first() {
            if let Some(bad) = frames
                .iter()
                .find(|f| f.width != first.width || f.height != first.height)
            {
                return Err(MediaError::InvalidFrame(format!(
                    "frame {} is {}x{} but the sequence is {}x{}",
                    bad.index, bad.width, bad.height, first.width, first.height
                )));
            }
        }
        Ok(Self { frames, rate })
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn frame_count(&self) -> usize {
        self.frames.len()
    }

    pub fn rate(&self) -> FrameRate {
        self.rate
    }

    pub fn clip_length(&self) -> usize {
        self.rate.clip_length()
    }
}

/// One second of consecutive frames.
#[derive(Debug, Clone, Copy)]
pub struct Clip<'a> {
    pub index: usize,
    pub frames: &'a [Frame],
}

impl Clip<'_> {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

/// Partition a sequence into `floor(n / r)` clips of `r` frames; the
/// trailing partial second is dropped.
pub fn split_clips(seq: &FrameSequence) -> Result<Vec<Clip<'_>>, MediaError> {
    let r = seq.clip_length();
    let n = seq.frame_count();
    if n < r {
        return Err(MediaError::ShorterThanClip {
            frames: n,
            clip_length: r,
        });
    }
    Ok(seq
        .frames
        .chunks_exact(r)
        .enumerate()
        .map(|(index, frames)| Clip { index, frames })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SamplerConfig {
    /// `L`; each clip yields `2L` frames.
    pub half_samples: usize,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self { half_samples: 8 }
    }
}

impl SamplerConfig {
    pub fn samples(&self) -> usize {
        2 * self.half_samples
    }
}

/// Indices `round(j (len - 1) / (2L - 1))`, `j = 0..2L`.
pub fn sample_indices(len: usize, cfg: SamplerConfig) -> Result<Vec<usize>, MediaError> {
    let want = cfg.samples();
    if cfg.half_samples == 0 || len < want {
        return Err(MediaError::Sampling {
            frames: len,
            requested: want,
        });
    }
    let span = (len - 1) as u64;
    let steps = (want - 1) as u64;
    Ok((0..want as u64)
        .map(|j| ((2 * j * span + steps) / (2 * steps)) as usize)
        .collect())
}

pub fn sample_frames<'a>(clip: &Clip<'a>, cfg: SamplerConfig) -> Result<Vec<&'a Frame>, MediaError> {
    Ok(sample_indices(clip.len(), cfg)?
        .into_iter()
        .map(|i| &clip.frames[i])
        .collect())
}
