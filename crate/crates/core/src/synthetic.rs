//! Seeded synthetic videos whose label is a fixed noiseless function of
//! their extracted features. Used by tests, benchmarks and demos.

use ndarray::Array1;

use crate::descriptors::N_D;
use crate::features::{
    extract_video, ClipFeatures, FeatureError, Manifest, ManifestEntry, ToyMotionBackbone, ToySemanticBackbone,
};
use crate::media::{Frame, FrameRate, FrameSequence, SamplerConfig};
use crate::model::LabeledVideo;
use crate::rng::XorShift64;

/// Weights of the distortion columns in the raw label, in descriptor order
/// (blur, noise, blockiness, exposure mean, over, under, colorfulness).
pub const LABEL_WEIGHTS: [f64; N_D] = [1.0, -6.0, 0.0, 1.5, 0.0, 0.0, 1.0];

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub videos: usize,
    /// Videos per source group.
    pub variants: usize,
    pub width: usize,
    pub height: usize,
    pub fps: u32,
    pub seconds: usize,
    pub half_samples: usize,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            videos: 200,
            variants: 1,
            width: 32,
            height: 32,
            fps: 16,
            seconds: 2,
            half_samples: 8,
            seed: 0,
        }
    }
}

/// Degradation knobs drawn per video.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticParams {
    pub brightness: f64,
    pub saturation: f64,
    pub noise: f64,
    pub blur_passes: usize,
    pub velocity: (f64, f64),
}

fn box_blur(img: &mut [f64], w: usize, h: usize) {
    let src = img.to_vec();
    for y in 0..h {
        for x in 0..w {
            for c in 0..3 {
                let mut s = 0.0;
                for dy in -1isize..=1 {
                    for dx in -1isize..=1 {
                        let yy = (y as isize + dy).clamp(0, h as isize - 1) as usize;
                        let xx = (x as isize + dx).clamp(0, w as isize - 1) as usize;
                        s += src[(yy * w + xx) * 3 + c];
                    }
                }
                img[(y * w + x) * 3 + c] = s / 9.0;
            }
        }
    }
}

pub fn synthetic_params(index: usize, seed: u64) -> SyntheticParams {
    let mut rng = XorShift64::derived(seed, index as u64);
    SyntheticParams {
        brightness: rng.uniform(0.35, 1.0),
        saturation: rng.uniform(0.0, 1.0),
        noise: rng.uniform(0.0, 30.0),
        blur_passes: rng.below(3),
        velocity: (rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0)),
    }
}

/// Moving colored gratings, scaled, desaturated, blurred and noised per
/// the video's [`SyntheticParams`].
pub fn synthetic_sequence(index: usize, cfg: &SyntheticConfig) -> Result<FrameSequence, FeatureError> {
    let p = synthetic_params(index, cfg.seed);
    let group = (index / cfg.variants.max(1)) as u64;
    let mut content = XorShift64::derived(cfg.seed ^ 0xC0_47E4_7000, group);
    let waves: Vec<(f64, f64, f64, [f64; 3])> = (0..3)
        .map(|_| {
            (
                content.uniform(0.15, 0.9),
                content.uniform(0.15, 0.9),
                content.uniform(0.0, std::f64::consts::TAU),
                [
                    content.uniform(0.0, 1.0),
                    content.uniform(0.0, 1.0),
                    content.uniform(0.0, 1.0),
                ],
            )
        })
        .collect();
    let mut noise = XorShift64::derived(cfg.seed ^ 0x4E_015E, index as u64);
    let (w, h) = (cfg.width, cfg.height);
    let n = cfg.fps as usize * cfg.seconds;
    let mut frames = Vec::with_capacity(n);
    for t in 0..n {
        let (ox, oy) = (p.velocity.0 * t as f64, p.velocity.1 * t as f64);
        let mut img = vec![0.0; w * h * 3];
        for y in 0..h {
            for x in 0..w {
                let mut rgb = [0.0; 3];
                for &(fx, fy, ph, col) in &waves {
                    let v = 0.5 + 0.5 * ((x as f64 + ox) * fx + (y as f64 + oy) * fy + ph).sin();
                    for c in 0..3 {
                        rgb[c] += v * col[c] / 1.5;
                    }
                }
                let gray = (rgb[0] + rgb[1] + rgb[2]) / 3.0;
                for c in 0..3 {
                    let v = gray + p.saturation * (rgb[c] - gray);
                    img[(y * w + x) * 3 + c] = 255.0 * p.brightness * v;
                }
            }
        }
        for _ in 0..p.blur_passes {
            box_blur(&mut img, w, h);
        }
        let rgb: Vec<u8> = img
            .iter()
            .map(|v| (v + p.noise * noise.normal()).round().clamp(0.0, 255.0) as u8)
            .collect();
        frames.push(Frame::new(w, h, rgb, t)?);
    }
    Ok(FrameSequence::new(frames, FrameRate::integer(cfg.fps)?)?)
}

/// Raw label: mean over clips and sampled frames of `LABEL_WEIGHTS . df`.
pub fn raw_label(clips: &[ClipFeatures]) -> f64 {
    let w = Array1::from(LABEL_WEIGHTS.to_vec());
    let per_clip: Vec<f64> = clips.iter().map(|c| c.df.dot(&w).mean().unwrap_or(0.0)).collect();
    per_clip.iter().sum::<f64>() / per_clip.len().max(1) as f64
}

pub fn video_id(index: usize) -> String {
    format!("syn{index:04}")
}

pub fn group_id(index: usize, cfg: &SyntheticConfig) -> String {
    format!("src{:04}", index / cfg.variants.max(1))
}

/// Extract toy features for every video and label it with [`raw_label`]
/// mapped affinely onto `[1, 5]` over the dataset.
pub fn synthetic_dataset(cfg: &SyntheticConfig) -> Result<Vec<LabeledVideo>, FeatureError> {
    use rayon::prelude::*;
    let sem = ToySemanticBackbone::new(cfg.seed);
    let mot = ToyMotionBackbone::new(cfg.seed);
    let sampler = SamplerConfig {
        half_samples: cfg.half_samples,
    };
    let mut videos = (0..cfg.videos)
        .into_par_iter()
        .map(|i| {
            let seq = synthetic_sequence(i, cfg)?;
            let id = video_id(i);
            let clips = extract_video(&id, &seq, sampler, &sem, &mot)?;
            let mos = raw_label(&clips);
            Ok(LabeledVideo { id, clips, mos })
        })
        .collect::<Result<Vec<_>, FeatureError>>()?;
    let lo = videos.iter().map(|v| v.mos).fold(f64::INFINITY, f64::min);
    let hi = videos.iter().map(|v| v.mos).fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    for v in &mut videos {
        v.mos = 1.0 + 4.0 * (v.mos - lo) / span;
    }
    Ok(videos)
}

/// Manifest carrying groups and labels (no feature paths).
pub fn synthetic_manifest(videos: &[LabeledVideo], cfg: &SyntheticConfig) -> Manifest {
    let mut m = Manifest::new(".");
    for (i, v) in videos.iter().enumerate() {
        let mut e = ManifestEntry::new(v.clips.len(), cfg.half_samples);
        e.source_group = Some(group_id(i, cfg));
        e.mos = Some(v.mos);
        e.fps = Some(cfg.fps as f64);
        m.entries.insert(v.id.clone(), e);
    }
    m
}
