//! Per-clip semantic, distortion and motion features.
//!
//! Semantic and motion features come from pluggable providers: the toy
//! backbones in [`toy`] for self-contained runs, or feature files written
//! by an external extractor (see [`file`] for the byte layout).

pub mod file;
pub mod manifest;
pub mod toy;

use std::collections::HashMap;

use ndarray::{Array1, Array2};
use rayon::prelude::*;
use thiserror::Error;

use crate::descriptors::{distortion_vector, N_D};
use crate::media::{sample_frames, split_clips, Clip, Frame, FrameSequence, MediaError, SamplerConfig};

pub use file::{read_feature_file, write_feature_file, FeatureFile, FeatureKind};
pub use manifest::{Manifest, ManifestEntry};
pub use toy::{ToyMotionBackbone, ToySemanticBackbone};

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("provider not initialized: {0}")]
    NotInitialized(String),
    #[error("no feature row for video '{video_id}' clip {clip_index}")]
    Lookup { video_id: String, clip_index: usize },
    #[error("shape error: {0}")]
    Shape(String),
    #[error("bad magic: not a feature file")]
    BadMagic,
    #[error("unsupported feature file version {0}")]
    VersionMismatch(u32),
    #[error("unknown feature kind {0}")]
    BadKind(u8),
    #[error("payload length mismatch: header declares {expected} bytes, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("manifest: {0}")]
    Manifest(String),
    #[error("{path}: {source}")]
    File {
        path: String,
        #[source]
        source: Box<FeatureError>,
    },
    #[error(transparent)]
    Media(#[from] MediaError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Channel widths of the three feature streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeatureDims {
    pub n_s: usize,
    pub n_d: usize,
    pub n_m: usize,
}

/// Features of one clip: `2L` rows of semantic and distortion features and
/// one motion vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ClipFeatures {
    pub sf: Array2<f64>,
    pub df: Array2<f64>,
    pub mf: Array1<f64>,
}

impl ClipFeatures {
    pub fn new(sf: Array2<f64>, df: Array2<f64>, mf: Array1<f64>) -> Result<Self, FeatureError> {
        if sf.nrows() != df.nrows() {
            return Err(FeatureError::Shape(format!(
                "semantic has {} rows but distortion has {}",
                sf.nrows(),
                df.nrows()
            )));
        }
        if !sf.nrows().is_multiple_of(2) {
            return Err(FeatureError::Shape(format!("odd sample count {}", sf.nrows())));
        }
        for (m, _) in [(&sf, "sf"), (&df, "df")] {
            if let Some(((row, col), _)) = m.indexed_iter().find(|(_, v)| !v.is_finite()) {
                return Err(FeatureError::NonFinite { row, col });
            }
        }
        if let Some(col) = mf.iter().position(|v| !v.is_finite()) {
            return Err(FeatureError::NonFinite { row: 0, col });
        }
        Ok(Self { sf, df, mf })
    }

    /// `L`.
    pub fn half_samples(&self) -> usize {
        self.sf.nrows() / 2
    }

    pub fn dims(&self) -> FeatureDims {
        FeatureDims {
            n_s: self.sf.ncols(),
            n_d: self.df.ncols(),
            n_m: self.mf.len(),
        }
    }
}

/// Identifies a sampled frame for providers that look features up.
#[derive(Debug, Clone, Copy)]
pub struct FrameKey<'a> {
    pub video_id: &'a str,
    pub clip_index: usize,
    pub sample_index: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct ClipKey<'a> {
    pub video_id: &'a str,
    pub clip_index: usize,
}

/// Frame-level semantic features: concatenated globally pooled maps of a
/// multi-stage backbone.
pub trait SemanticProvider: Send + Sync {
    fn dim(&self) -> usize;
    fn semantic_features(&self, key: FrameKey<'_>, frame: &Frame) -> Result<Vec<f64>, FeatureError>;
}

/// Clip-level motion features.
pub trait MotionProvider: Send + Sync {
    fn dim(&self) -> usize;
    fn motion_features(&self, key: ClipKey<'_>, clip: &Clip<'_>) -> Result<Vec<f64>, FeatureError>;
}

/// Serves rows from semantic or motion feature files registered per video.
///
/// Semantic files hold `clip_count * 2L` rows (clip-major); motion files
/// hold one row per clip.
#[derive(Debug, Clone, Default)]
pub struct FileProvider {
    rows_per_clip: usize,
    files: HashMap<String, FeatureFile>,
}

impl FileProvider {
    /// Provider for semantic files with `2L` rows per clip.
    pub fn semantic(half_samples: usize) -> Self {
        Self {
            rows_per_clip: 2 * half_samples,
            files: HashMap::new(),
        }
    }

    pub fn motion() -> Self {
        Self {
            rows_per_clip: 1,
            files: HashMap::new(),
        }
    }

    pub fn register(&mut self, video_id: impl Into<String>, file: FeatureFile) -> Result<(), FeatureError> {
        if let Some(existing) = self.files.values().next() {
            if existing.dim != file.dim {
                return Err(FeatureError::Shape(format!(
                    "feature width {} differs from previously registered {}",
                    file.dim, existing.dim
                )));
            }
        }
        self.files.insert(video_id.into(), file);
        Ok(())
    }

    /// Width declared by the registered files, 0 when none are registered.
    pub fn declared_dim(&self) -> usize {
        self.files.values().next().map_or(0, |f| f.dim)
    }

    fn row(&self, video_id: &str, clip_index: usize, offset: usize) -> Result<Vec<f64>, FeatureError> {
        let file = self
            .files
            .get(video_id)
            .ok_or_else(|| FeatureError::NotInitialized(format!("no feature file registered for '{video_id}'")))?;
        let row = clip_index * self.rows_per_clip + offset;
        if row >= file.count || offset >= self.rows_per_clip {
            return Err(FeatureError::Lookup {
                video_id: video_id.to_string(),
                clip_index,
            });
        }
        Ok(file.row(row).iter().map(|&v| v as f64).collect())
    }
}

impl SemanticProvider for FileProvider {
    fn dim(&self) -> usize {
        self.declared_dim()
    }

    fn semantic_features(&self, key: FrameKey<'_>, _frame: &Frame) -> Result<Vec<f64>, FeatureError> {
        self.row(key.video_id, key.clip_index, key.sample_index)
    }
}

impl MotionProvider for FileProvider {
    fn dim(&self) -> usize {
        self.declared_dim()
    }

    fn motion_features(&self, key: ClipKey<'_>, _clip: &Clip<'_>) -> Result<Vec<f64>, FeatureError> {
        self.row(key.video_id, key.clip_index, 0)
    }
}

/// Distortion rows (`2L x N_D`) for the sampled frames of one clip.
pub fn distortion_matrix(frames: &[&Frame]) -> Array2<f64> {
    let rows: Vec<[f64; N_D]> = frames.par_iter().map(|f| distortion_vector(f).to_array()).collect();
    Array2::from_shape_fn((rows.len(), N_D), |(r, c)| rows[r][c])
}

/// Run the full extraction for one decoded video: split into clips,
/// sample `2L` frames per clip, and query all three feature streams.
pub fn extract_video(
    video_id: &str,
    seq: &FrameSequence,
    sampler: SamplerConfig,
    semantic: &dyn SemanticProvider,
    motion: &dyn MotionProvider,
) -> Result<Vec<ClipFeatures>, FeatureError> {
    let clips = split_clips(seq)?;
    clips
        .par_iter()
        .map(|clip| {
            let sampled = sample_frames(clip, sampler)?;
            let sem_rows = sampled
                .par_iter()
                .enumerate()
                .map(|(sample_index, frame)| {
                    semantic.semantic_features(
                        FrameKey {
                            video_id,
                            clip_index: clip.index,
                            sample_index,
                        },
                        frame,
                    )
                })
                .collect::<Result<Vec<_>, _>>()?;
            let n_s = semantic.dim();
            if let Some(bad) = sem_rows.iter().find(|r| r.len() != n_s) {
                return Err(FeatureError::Shape(format!(
                    "semantic provider returned {} values, declared {n_s}",
                    bad.len()
                )));
            }
            let sf = Array2::from_shape_vec((sem_rows.len(), n_s), sem_rows.concat())
                .map_err(|e| FeatureError::Shape(e.to_string()))?;
            let df = distortion_matrix(&sampled);
            let mf = motion.motion_features(
                ClipKey {
                    video_id,
                    clip_index: clip.index,
                },
                clip,
            )?;
            if mf.len() != motion.dim() {
                return Err(FeatureError::Shape(format!(
                    "motion provider returned {} values, declared {}",
                    mf.len(),
                    motion.dim()
                )));
            }
            ClipFeatures::new(sf, df, Array1::from(mf))
        })
        .collect()
}

/// Stack per-clip matrices into the three feature files of one video.
pub fn to_feature_files(clips: &[ClipFeatures]) -> Result<[FeatureFile; 3], FeatureError> {
    let first = clips
        .first()
        .ok_or_else(|| FeatureError::Shape("no clips to write".into()))?;
    let dims = first.dims();
    let mut sem = Vec::new();
    let mut dis = Vec::new();
    let mut mot = Vec::new();
    for c in clips {
        if c.dims() != dims || c.half_samples() != first.half_samples() {
            return Err(FeatureError::Shape("clips disagree on feature shapes".into()));
        }
        sem.extend(c.sf.iter().map(|&v| v as f32));
        dis.extend(c.df.iter().map(|&v| v as f32));
        mot.extend(c.mf.iter().map(|&v| v as f32));
    }
    let rows = clips.len() * 2 * first.half_samples();
    Ok([
        FeatureFile::new(FeatureKind::Semantic, rows, dims.n_s, sem)?,
        FeatureFile::new(FeatureKind::Distortion, rows, dims.n_d, dis)?,
        FeatureFile::new(FeatureKind::Motion, clips.len(), dims.n_m, mot)?,
    ])
}

/// Inverse of [`to_feature_files`].
pub fn from_feature_files(
    semantic: &FeatureFile,
    distortion: &FeatureFile,
    motion: &FeatureFile,
    clip_count: usize,
    half_samples: usize,
) -> Result<Vec<ClipFeatures>, FeatureError> {
    let per_clip = 2 * half_samples;
    for (file, kind, rows) in [
        (semantic, FeatureKind::Semantic, clip_count * per_clip),
        (distortion, FeatureKind::Distortion, clip_count * per_clip),
        (motion, FeatureKind::Motion, clip_count),
    ] {
        if file.kind != kind {
            return Err(FeatureError::Shape(format!(
                "expected a {kind:?} file, found {:?}",
                file.kind
            )));
        }
        if file.count != rows {
            return Err(FeatureError::Shape(format!(
                "{kind:?} file has {} rows, expected {rows} ({clip_count} clips, L={half_samples})",
                file.count
            )));
        }
    }
    let block = |f: &FeatureFile, i: usize, n: usize| {
        let start = i * n * f.dim;
        Array2::from_shape_fn((n, f.dim), |(r, c)| f.data[start + r * f.dim + c] as f64)
    };
    (0..clip_count)
        .map(|i| {
            ClipFeatures::new(
                block(semantic, i, per_clip),
                block(distortion, i, per_clip),
                Array1::from_iter(motion.row(i).iter().map(|&v| v as f64)),
            )
        })
        .collect()
}
