//! Mini-batch Adam with plateau learning-rate decay.

use serde::{Deserialize, Serialize};

use super::backward::backward;
use super::forward::{mse_loss, predict_clips};
use super::{ModelError, ModelParams};
use crate::features::ClipFeatures;
use crate::rng::XorShift64;

/// Which loss drives the plateau rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlateauMetric {
    #[default]
    Train,
    Validation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub plateau_epochs: usize,
    pub lr_decay: f64,
    pub max_epochs: usize,
    /// Videos per optimizer step.
    pub batch_size: usize,
    pub seed: u64,
    pub plateau_metric: PlateauMetric,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            plateau_epochs: 5,
            lr_decay: 0.5,
            max_epochs: 50,
            batch_size: 8,
            seed: 0,
            plateau_metric: PlateauMetric::Train,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: &str| Err(ModelError::Config(m.to_string()));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if !(self.lr_decay > 0.0 && self.lr_decay < 1.0) {
            return bad("lr_decay must lie in (0, 1)");
        }
        if self.plateau_epochs == 0 || self.max_epochs == 0 || self.batch_size == 0 {
            return bad("plateau_epochs, max_epochs and batch_size must be positive");
        }
        Ok(())
    }
}

/// One training example: all clips of a video and its MOS.
#[derive(Debug, Clone)]
pub struct LabeledVideo {
    pub id: String,
    pub clips: Vec<ClipFeatures>,
    pub mos: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean batch loss over the epoch.
    pub loss: f64,
    /// Learning rate used during the epoch.
    pub lr: f64,
    pub val_loss: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: ModelParams,
    pub history: Vec<EpochRecord>,
}

/// Adam with bias correction.
#[derive(Debug, Clone)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: ModelParams,
    v: ModelParams,
    t: i32,
}

impl Adam {
    pub fn new(like: &ModelParams) -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: ModelParams::zeros(like.dims),
            v: ModelParams::zeros(like.dims),
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut ModelParams, grads: &ModelParams, lr: f64) {
        self.t += 1;
        let (b1, b2, eps) = (self.beta1, self.beta2, self.eps);
        let c1 = 1.0 - b1.powi(self.t);
        let c2 = 1.0 - b2.powi(self.t);
        let tensors = params
            .tensors_mut()
            .into_iter()
            .zip(grads.tensors())
            .zip(self.m.tensors_mut().into_iter().zip(self.v.tensors_mut()));
        for ((p, g), (m, v)) in tensors {
            for i in 0..p.len() {
                m[i] = b1 * m[i] + (1.0 - b1) * g[i];
                v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
                p[i] -= lr * (m[i] / c1) / ((v[i] / c2).sqrt() + eps);
            }
        }
    }
}

/// Multiplies the learning rate by `decay` once the best loss has not
/// improved for `patience` consecutive epochs, then restarts the count.
#[derive(Debug, Clone)]
pub struct PlateauScheduler {
    lr: f64,
    patience: usize,
    decay: f64,
    best: f64,
    stale: usize,
}

impl PlateauScheduler {
    pub fn new(lr: f64, patience: usize, decay: f64) -> Self {
        Self {
            lr,
            patience,
            decay,
            best: f64::INFINITY,
            stale: 0,
        }
    }

    pub fn lr(&self) -> f64 {
        self.lr
    }

    /// Record an epoch loss; returns the learning rate for the next epoch.
    pub fn observe(&mut self, loss: f64) -> f64 {
        if loss < self.best {
            self.best = loss;
            self.stale = 0;
        } else {
            self.stale += 1;
            if self.stale >= self.patience {
                self.lr *= self.decay;
                self.stale = 0;
            }
        }
        self.lr
    }
}

fn dataset_loss(videos: &[LabeledVideo], p: &ModelParams) -> Result<f64, ModelError> {
    use rayon::prelude::*;
    let preds = videos
        .par_iter()
        .map(|v| predict_clips(&v.clips, p))
        .collect::<Result<Vec<_>, _>>()?;
    let labels: Vec<f64> = videos.iter().map(|v| v.mos).collect();
    mse_loss(&preds, &labels)
}

pub fn train(dataset: &[LabeledVideo], cfg: &TrainConfig, params: ModelParams) -> Result<TrainOutcome, ModelError> {
    train_with_validation(dataset, &[], cfg, params)
}

/// Train on `dataset`; when `validation` is non-empty its loss is recorded
/// each epoch and may drive the plateau rule.
pub fn train_with_validation(
    dataset: &[LabeledVideo],
    validation: &[LabeledVideo],
    cfg: &TrainConfig,
    mut params: ModelParams,
) -> Result<TrainOutcome, ModelError> {
    cfg.validate()?;
    params.dims.validate()?;
    if dataset.is_empty() {
        return Err(ModelError::Empty("training set"));
    }
    if cfg.plateau_metric == PlateauMetric::Validation && validation.is_empty() {
        return Err(ModelError::Config(
            "validation plateau metric needs a validation set".into(),
        ));
    }
    let mut adam = Adam::new(&params);
    let mut sched = PlateauScheduler::new(cfg.learning_rate, cfg.plateau_epochs, cfg.lr_decay);
    let mut rng = XorShift64::new(cfg.seed);
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut history = Vec::with_capacity(cfg.max_epochs);

    for epoch in 0..cfg.max_epochs {
        let lr = sched.lr();
        rng.shuffle(&mut order);
        let mut total = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<(&[ClipFeatures], f64)> = chunk
                .iter()
                .map(|&i| (dataset[i].clips.as_slice(), dataset[i].mos))
                .collect();
            let g = backward(&batch, &params)?;
            adam.step(&mut params, &g.grads, lr);
            total += g.loss;
            batches += 1;
        }
        let loss = total / batches as f64;
        let val_loss = if validation.is_empty() {
            None
        } else {
            Some(dataset_loss(validation, &params)?)
        };
        if !loss.is_finite() || !params.is_finite() {
            return Err(ModelError::Config(format!("training diverged at epoch {epoch}")));
        }
        history.push(EpochRecord {
            epoch,
            loss,
            lr,
            val_loss,
        });
        sched.observe(match cfg.plateau_metric {
            PlateauMetric::Train => loss,
            PlateauMetric::Validation => val_loss.expect("checked above"),
        });
    }
    Ok(TrainOutcome { params, history })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::FeatureDims;
    use crate::model::ModelDims;
    use ndarray::{Array1, Array2};

    #[test]
    fn five_flat_epochs_halve_once() {
        let mut s = PlateauScheduler::new(0.001, 5, 0.5);
        assert_eq!(s.observe(1.0), 0.001);
        for _ in 0..4 {
            assert_eq!(s.observe(1.0), 0.001);
        }
        assert_eq!(s.observe(1.0), 0.0005);
        // counter restarts
        for _ in 0..4 {
            assert_eq!(s.observe(1.0), 0.0005);
        }
        assert_eq!(s.observe(0.5), 0.0005);
    }

    #[test]
    fn improvement_resets_patience() {
        let mut s = PlateauScheduler::new(1.0, 2, 0.5);
        s.observe(3.0);
        s.observe(3.0);
        s.observe(2.0);
        s.observe(2.5);
        assert_eq!(s.lr(), 1.0);
        assert_eq!(s.observe(2.5), 0.5);
    }

    #[test]
    fn adam_first_step_is_lr_sized() {
        let dims = ModelDims {
            l: 1,
            n_s: 1,
            n_d: 1,
            n_m: 1,
            h_s: 1,
            h_d: 1,
            n_m_out: 1,
            head1: 1,
            head2: 1,
        };
        let mut p = ModelParams::zeros(dims);
        let mut g = ModelParams::zeros(dims);
        g.head3.b[0] = -3.0;
        let mut adam = Adam::new(&p);
        adam.step(&mut p, &g, 0.01);
        assert!((p.head3.b[0] - 0.01).abs() < 1e-9);
        assert_eq!(p.head2.b[0], 0.0);
    }

    fn tiny_video(i: usize, mos: f64) -> LabeledVideo {
        let v = i as f64 * 0.1;
        LabeledVideo {
            id: format!("v{i}"),
            clips: vec![ClipFeatures::new(
                Array2::from_elem((4, 3), v),
                Array2::from_elem((4, 7), 0.5 - v),
                Array1::from_elem(2, v),
            )
            .unwrap()],
            mos,
        }
    }

    fn tiny_dims() -> ModelDims {
        let mut d = ModelDims::for_features(2, FeatureDims { n_s: 3, n_d: 7, n_m: 2 });
        d.h_s = 4;
        d.h_d = 3;
        d.n_m_out = 3;
        d.head1 = 8;
        d.head2 = 4;
        d
    }

    #[test]
    fn constant_labels_are_fitted() {
        let data: Vec<_> = (0..6).map(|i| tiny_video(i, 3.0)).collect();
        let cfg = TrainConfig {
            learning_rate: 0.05,
            max_epochs: 300,
            batch_size: 6,
            ..TrainConfig::default()
        };
        let out = train(&data, &cfg, ModelParams::init(tiny_dims(), 1).unwrap()).unwrap();
        assert!(out.history.last().unwrap().loss < 1e-3, "{:?}", out.history.last());
    }

    #[test]
    fn history_is_deterministic() {
        let data: Vec<_> = (0..5).map(|i| tiny_video(i, 1.0 + i as f64)).collect();
        let cfg = TrainConfig {
            max_epochs: 4,
            batch_size: 2,
            seed: 9,
            ..TrainConfig::default()
        };
        let p = ModelParams::init(tiny_dims(), 2).unwrap();
        let a = train(&data, &cfg, p.clone()).unwrap();
        let b = train(&data, &cfg, p).unwrap();
        assert_eq!(a.history, b.history);
        assert_eq!(a.params, b.params);
    }

    #[test]
    fn empty_dataset_is_an_error() {
        let p = ModelParams::init(tiny_dims(), 2).unwrap();
        assert!(matches!(
            train(&[], &TrainConfig::default(), p),
            Err(ModelError::Empty(_))
        ));
    }
}
