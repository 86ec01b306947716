use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::features::Manifest;
use crate::rng::XorShift64;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<String>,
    pub test: Vec<String>,
}

/// Number of test groups: `round(groups * (1 - ratio))`, kept within
/// `[1, groups - 1]`.
pub fn test_group_count(groups: usize, ratio: f64) -> usize {
    let raw = (groups as f64 * (1.0 - ratio)).round() as usize;
    raw.clamp(1, groups.saturating_sub(1).max(1))
}

/// Split `(video_id, group)` pairs so that every group lands on one side.
/// Groups are shuffled with the seeded generator; the first
/// [`test_group_count`] groups form the test side. Ids come back sorted.
pub fn split_grouped<'a>(
    items: impl IntoIterator<Item = (&'a str, &'a str)>,
    ratio: f64,
    seed: u64,
) -> Result<Split, EvalError> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(EvalError::Config(format!(
            "train ratio must lie in (0, 1), got {ratio}"
        )));
    }
    let mut groups: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for (id, g) in items {
        groups.entry(g).or_default().push(id);
    }
    if groups.len() < 2 {
        return Err(EvalError::Groups(groups.len()));
    }
    let mut order: Vec<&str> = groups.keys().copied().collect();
    XorShift64::new(seed).shuffle(&mut order);
    let n_test = test_group_count(order.len(), ratio);
    let collect = |gs: &[&str]| {
        let mut ids: Vec<String> = gs
            .iter()
            .flat_map(|g| groups[g].iter().map(|s| s.to_string()))
            .collect();
        ids.sort();
        ids
    };
    Ok(Split {
        test: collect(&order[..n_test]),
        train: collect(&order[n_test..]),
    })
}

/// Train/test split of a manifest. With `grouped`, videos sharing a
/// `source_group` stay together; otherwise each video is its own group.
pub fn split_dataset(manifest: &Manifest, ratio: f64, seed: u64, grouped: bool) -> Result<Split, EvalError> {
    split_grouped(
        manifest.entries.keys().map(|id| {
            let g = if grouped { manifest.group_of(id) } else { id.as_str() };
            (id.as_str(), g)
        }),
        ratio,
        seed,
    )
}
