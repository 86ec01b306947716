//! JSON dataset manifest: `video_id -> entry`, where each entry points at
//! the video's three feature files and carries optional study metadata.
//!
//! ```json
//! {
//!   "live_0001_crf28": {
//!     "semantic_path": "feats/live_0001_crf28.semantic.feat",
//!     "distortion_path": "feats/live_0001_crf28.distortion.feat",
//!     "motion_path": "feats/live_0001_crf28.motion.feat",
//!     "clip_count": 8,
//!     "L": 8,
//!     "source_group": "live_0001",
//!     "crf": 28,
//!     "mos": 3.41
//!   }
//! }
//! ```
//!
//! Relative paths resolve against the manifest's directory.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{from_feature_files, read_feature_file, ClipFeatures, FeatureError};

/// CRF values of a compressed study; `0` marks the uncompressed source.
pub const STUDY_CRFS: [u32; 9] = [0, 16, 20, 24, 28, 32, 36, 40, 44];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub semantic_path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distortion_path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub motion_path: Option<PathBuf>,
    #[serde(default)]
    pub clip_count: usize,
    #[serde(rename = "L", default = "default_half_samples")]
    pub half_samples: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_group: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub crf: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolution: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mos: Option<f64>,
}

fn default_half_samples() -> usize {
    8
}

impl ManifestEntry {
    pub fn new(clip_count: usize, half_samples: usize) -> Self {
        Self {
            semantic_path: None,
            distortion_path: None,
            motion_path: None,
            clip_count,
            half_samples,
            source_group: None,
            crf: None,
            resolution: None,
            fps: None,
            mos: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Manifest {
    pub entries: BTreeMap<String, ManifestEntry>,
    base_dir: PathBuf,
}

impl Manifest {
    pub fn new(base_dir: impl Into<PathBuf>) -> Self {
        Self {
            entries: BTreeMap::new(),
            base_dir: base_dir.into(),
        }
    }

    pub fn from_json(text: &str, base_dir: impl Into<PathBuf>) -> Result<Self, FeatureError> {
        let manifest = Self {
            entries: serde_json::from_str(text)?,
            base_dir: base_dir.into(),
        };
        manifest.validate()?;
        Ok(manifest)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, FeatureError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| FeatureError::File {
            path: path.display().to_string(),
            source: Box::new(e.into()),
        })?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_json(&text, base)
    }

    pub fn to_json(&self) -> Result<String, FeatureError> {
        Ok(serde_json::to_string_pretty(&self.entries)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), FeatureError> {
        std::fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }

    pub fn base_dir(&self) -> &Path {
        &self.base_dir
    }

    pub fn validate(&self) -> Result<(), FeatureError> {
        for (id, e) in &self.entries {
            if let Some(crf) = e.crf {
                if !STUDY_CRFS.contains(&crf) {
                    return Err(FeatureError::Manifest(format!(
                        "video '{id}' has crf {crf}, expected one of {STUDY_CRFS:?}"
                    )));
                }
            }
            if let Some(mos) = e.mos {
                if !mos.is_finite() {
                    return Err(FeatureError::Manifest(format!("video '{id}' has non-finite mos")));
                }
            }
            if e.half_samples == 0 {
                return Err(FeatureError::Manifest(format!("video '{id}' has L = 0")));
            }
        }
        Ok(())
    }

    /// Content group of a video; ungrouped videos form their own group.
    pub fn group_of<'a>(&'a self, video_id: &'a str) -> &'a str {
        self.entries
            .get(video_id)
            .and_then(|e| e.source_group.as_deref())
            .unwrap_or(video_id)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    /// Ids of entries without a MOS label.
    pub fn unlabeled(&self) -> Vec<&str> {
        self.entries
            .iter()
            .filter(|(_, e)| e.mos.is_none())
            .map(|(id, _)| id.as_str())
            .collect()
    }

    /// Read and split the three feature files of one video into clips.
    pub fn load_features(&self, video_id: &str) -> Result<Vec<ClipFeatures>, FeatureError> {
        let entry = self
            .entries
            .get(video_id)
            .ok_or_else(|| FeatureError::Manifest(format!("unknown video '{video_id}'")))?;
        let path = |p: &Option<PathBuf>, what: &str| {
            p.as_ref()
                .map(|p| self.resolve(p))
                .ok_or_else(|| FeatureError::Manifest(format!("video '{video_id}' has no {what} feature path")))
        };
        let load =
            |p: PathBuf| read_feature_file(&p).map_err(|e| FeatureError::Manifest(format!("video '{video_id}': {e}")));
        let sem = load(path(&entry.semantic_path, "semantic")?)?;
        let dis = load(path(&entry.distortion_path, "distortion")?)?;
        let mot = load(path(&entry.motion_path, "motion")?)?;
        from_feature_files(&sem, &dis, &mot, entry.clip_count, entry.half_samples)
            .map_err(|e| FeatureError::Manifest(format!("video '{video_id}': {e}")))
    }
}
