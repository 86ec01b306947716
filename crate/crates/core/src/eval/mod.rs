//! Correlation metrics, logistic fitting, dataset splits and the repeated
//! train/test protocol.

mod logistic;
mod metrics;
mod split;

pub use logistic::{fit_logistic, logistic4, plcc_after_fit, LogisticFit, MAX_ITERATIONS, REL_TOL};
pub use metrics::{average_ranks, pearson, srcc};
pub use split::{split_dataset, split_grouped, test_group_count, Split};

use std::collections::{BTreeMap, HashMap};
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{FeatureError, Manifest};
use crate::model::{predict_clips, train, LabeledVideo, ModelDims, ModelError, ModelParams, TrainConfig};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("correlation undefined: {0}")]
    Undefined(&'static str),
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("need at least {need} values, got {got}")]
    TooFew { need: usize, got: usize },
    #[error("need at least 2 groups to split, got {0}")]
    Groups(usize),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("split {split}")]
    Split {
        split: usize,
        #[source]
        source: Box<EvalError>,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProtocolConfig {
    pub n_splits: usize,
    /// Train fraction.
    pub ratio: f64,
    /// Split `s` uses seed `seed + s` for the split, the initialization and
    /// the shuffle order.
    pub seed: u64,
    pub grouped: bool,
    pub train: TrainConfig,
    /// Model widths; defaults follow the feature widths of the data.
    #[serde(skip)]
    pub dims: Option<ModelDims>,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        Self {
            n_splits: 30,
            ratio: 0.8,
            seed: 0,
            grouped: true,
            train: TrainConfig::default(),
            dims: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitResult {
    pub split: usize,
    pub seed: u64,
    pub n_train: usize,
    pub n_test: usize,
    pub srcc: f64,
    pub plcc: f64,
    pub fit: LogisticFit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrfRow {
    pub crf: u32,
    pub count: usize,
    pub mean: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n_splits: usize,
    pub ratio: f64,
    pub grouped: bool,
    pub srcc_mean: f64,
    pub srcc_std: f64,
    pub plcc_mean: f64,
    pub plcc_std: f64,
    pub splits: Vec<SplitResult>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub crf_summary: Vec<CrfRow>,
}

/// Mean and sample standard deviation (0 for a single value).
pub fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let std = if v.len() < 2 {
        0.0
    } else {
        (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    };
    (mean, std)
}

impl EvalReport {
    pub fn from_splits(splits: Vec<SplitResult>, ratio: f64, grouped: bool) -> Self {
        let s: Vec<f64> = splits.iter().map(|r| r.srcc).collect();
        let p: Vec<f64> = splits.iter().map(|r| r.plcc).collect();
        let (srcc_mean, srcc_std) = mean_std(&s);
        let (plcc_mean, plcc_std) = mean_std(&p);
        Self {
            n_splits: splits.len(),
            ratio,
            grouped,
            srcc_mean,
            srcc_std,
            plcc_mean,
            plcc_std,
            splits,
            crf_summary: Vec::new(),
        }
    }

    /// One row per split.
    pub fn write_splits_csv<W: Write>(&self, w: W) -> Result<(), EvalError> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record([
            "split",
            "seed",
            "n_train",
            "n_test",
            "srcc",
            "plcc",
            "beta1",
            "beta2",
            "beta3",
            "beta4",
            "converged",
        ])?;
        for r in &self.splits {
            let b = r.fit.beta;
            wtr.write_record([
                r.split.to_string(),
                r.seed.to_string(),
                r.n_train.to_string(),
                r.n_test.to_string(),
                r.srcc.to_string(),
                r.plcc.to_string(),
                b[0].to_string(),
                b[1].to_string(),
                b[2].to_string(),
                b[3].to_string(),
                r.fit.converged.to_string(),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn write_json<W: Write>(&self, mut w: W) -> Result<(), EvalError> {
        serde_json::to_writer_pretty(&mut w, self)?;
        writeln!(w)?;
        Ok(())
    }
}

/// SRCC and fitted PLCC of predictions against labels.
pub fn score_predictions(pred: &[f64], mos: &[f64]) -> Result<(f64, f64, LogisticFit), EvalError> {
    let s = srcc(pred, mos)?;
    let (p, fit) = plcc_after_fit(pred, mos)?;
    Ok((s, p, fit))
}

fn run_split(
    index: usize,
    manifest: &Manifest,
    videos: &[LabeledVideo],
    dims: ModelDims,
    cfg: &ProtocolConfig,
) -> Result<SplitResult, EvalError> {
    let seed = cfg.seed + index as u64;
    let split = split_grouped(
        videos.iter().map(|v| {
            let g = if cfg.grouped {
                manifest.group_of(&v.id)
            } else {
                v.id.as_str()
            };
            (v.id.as_str(), g)
        }),
        cfg.ratio,
        seed,
    )?;
    let by_id: HashMap<&str, &LabeledVideo> = videos.iter().map(|v| (v.id.as_str(), v)).collect();
    let pick = |ids: &[String]| ids.iter().map(|id| by_id[id.as_str()].clone()).collect::<Vec<_>>();
    let (train_set, test_set) = (pick(&split.train), pick(&split.test));
    let tcfg = TrainConfig {
        seed,
        ..cfg.train.clone()
    };
    let outcome = train(&train_set, &tcfg, ModelParams::init(dims, seed)?)?;
    let pred = test_set
        .iter()
        .map(|v| predict_clips(&v.clips, &outcome.params))
        .collect::<Result<Vec<_>, _>>()?;
    let mos: Vec<f64> = test_set.iter().map(|v| v.mos).collect();
    let (srcc, plcc, fit) = score_predictions(&pred, &mos)?;
    Ok(SplitResult {
        split: index,
        seed,
        n_train: train_set.len(),
        n_test: test_set.len(),
        srcc,
        plcc,
        fit,
    })
}

/// Repeat split / train / test `n_splits` times. Groups come from the
/// manifest; videos missing from it form their own groups.
pub fn run_protocol(
    manifest: &Manifest,
    videos: &[LabeledVideo],
    cfg: &ProtocolConfig,
) -> Result<EvalReport, EvalError> {
    if cfg.n_splits == 0 {
        return Err(EvalError::Config("n_splits must be positive".into()));
    }
    let first = videos.first().ok_or(EvalError::TooFew { need: 2, got: 0 })?;
    let clip = first
        .clips
        .first()
        .ok_or_else(|| EvalError::Config(format!("video '{}' has no clips", first.id)))?;
    let dims = cfg
        .dims
        .unwrap_or_else(|| ModelDims::for_features(clip.half_samples(), clip.dims()));
    let splits = (0..cfg.n_splits)
        .into_par_iter()
        .map(|s| {
            run_split(s, manifest, videos, dims, cfg).map_err(|e| EvalError::Split {
                split: s,
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(EvalReport::from_splits(splits, cfg.ratio, cfg.grouped))
}

/// Type-7 (linear interpolation) quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Per-CRF count, mean and quartiles of `(crf, score)` pairs, ordered by CRF.
pub fn crf_summary(pairs: &[(u32, f64)]) -> Vec<CrfRow> {
    let mut by: BTreeMap<u32, Vec<f64>> = BTreeMap::new();
    for &(crf, s) in pairs {
        by.entry(crf).or_default().push(s);
    }
    by.into_iter()
        .map(|(crf, mut v)| {
            v.sort_by(f64::total_cmp);
            CrfRow {
                crf,
                count: v.len(),
                mean: v.iter().sum::<f64>() / v.len() as f64,
                q1: quantile_sorted(&v, 0.25),
                median: quantile_sorted(&v, 0.5),
                q3: quantile_sorted(&v, 0.75),
            }
        })
        .collect()
}

/// CRF summary over manifest entries. Scores default to the manifest MOS;
/// entries without a CRF count as sources (`crf = 0`); entries without a
/// score are skipped.
pub fn crf_summary_for(manifest: &Manifest, scores: Option<&BTreeMap<String, f64>>) -> Vec<CrfRow> {
    let pairs: Vec<(u32, f64)> = manifest
        .entries
        .iter()
        .filter_map(|(id, e)| {
            let s = match scores {
                Some(m) => m.get(id).copied(),
                None => e.mos,
            }?;
            Some((e.crf.unwrap_or(0), s))
        })
        .collect();
    crf_summary(&pairs)
}

pub fn write_crf_csv<W: Write>(rows: &[CrfRow], w: W) -> Result<(), EvalError> {
    let mut wtr = csv::Writer::from_writer(w);
    for r in rows {
        wtr.serialize(r)?;
    }
    wtr.flush()?;
    Ok(())
}
