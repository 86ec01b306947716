use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use mdvqa_core::Manifest;

use crate::ServerError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CatalogItem {
    pub path: PathBuf,
    pub source_group: String,
}

/// Videos that can be put in front of raters: manifest entries with a
/// media file in the media directory.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Catalog {
    items: BTreeMap<String, CatalogItem>,
}

impl Catalog {
    /// A video's media file is the file in `media_dir` whose stem is its
    /// id (`live_0001_crf28.mp4` for `live_0001_crf28`). Entries without
    /// one are skipped; the first name in sort order wins on ties.
    pub fn from_manifest(manifest: &Manifest, media_dir: impl AsRef<Path>) -> Result<Self, ServerError> {
        let dir = media_dir.as_ref();
        let mut by_stem: BTreeMap<String, PathBuf> = BTreeMap::new();
        let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
            .map_err(|e| ServerError::Config(format!("media dir {}: {e}", dir.display())))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_file())
            .collect();
        files.sort();
        for p in files {
            if let Some(stem) = p.file_stem().and_then(|s| s.to_str()) {
                by_stem.entry(stem.to_string()).or_insert(p);
            }
        }
        let items = manifest
            .entries
            .keys()
            .filter_map(|id| {
                by_stem.get(id).map(|path| {
                    let item = CatalogItem {
                        path: path.clone(),
                        source_group: manifest.group_of(id).to_string(),
                    };
                    (id.clone(), item)
                })
            })
            .collect();
        Ok(Self { items })
    }

    pub fn from_items(items: impl IntoIterator<Item = (String, CatalogItem)>) -> Self {
        Self {
            items: items.into_iter().collect(),
        }
    }

    pub fn get(&self, video_id: &str) -> Option<&CatalogItem> {
        self.items.get(video_id)
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Video ids per source group, both sorted.
    pub fn groups(&self) -> BTreeMap<&str, Vec<&str>> {
        let mut out: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
        for (id, item) in &self.items {
            out.entry(item.source_group.as_str()).or_default().push(id.as_str());
        }
        out
    }
}
