//! Spatio-temporal fusion regressor.
//!
//! Per clip: the `2L` semantic and distortion rows are paired into `L`
//! (current, |current - previous|) samples, each stream goes through its
//! own linear+ReLU layer, the `L` fused rows are collapsed by a shared
//! temporal linear map, motion features are appended, and a three-layer
//! head regresses a clip score. A video score is the mean over clips.

mod backward;
mod forward;
mod io;
mod train;

pub use backward::{backward, BatchGradients};
pub use forward::{
    fuse_clip, mse_loss, predict_clips, predict_video, regress, spatial_fusion, temporal_abs_diff, ClipTrace,
};
pub use io::{load_model, read_model, save_model, write_model, MODEL_MAGIC, MODEL_VERSION};
pub use train::{
    train, train_with_validation, Adam, EpochRecord, LabeledVideo, PlateauMetric, PlateauScheduler, TrainConfig,
    TrainOutcome,
};

use ndarray::{Array1, Array2};
use thiserror::Error;

use crate::features::FeatureDims;
use crate::rng::XorShift64;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("shape error in {stream}: {detail}")]
    Shape { stream: &'static str, detail: String },
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("length mismatch: {left} predictions vs {right} labels")]
    LengthMismatch { left: usize, right: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("model file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub(crate) fn shape_err(stream: &'static str, detail: impl Into<String>) -> ModelError {
    ModelError::Shape {
        stream,
        detail: detail.into(),
    }
}

/// Every width that fixes the parameter shapes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelDims {
    /// `L`: half the number of sampled frames per clip.
    pub l: usize,
    pub n_s: usize,
    pub n_d: usize,
    pub n_m: usize,
    /// Hidden width of each semantic stream.
    pub h_s: usize,
    /// Hidden width of each distortion stream.
    pub h_d: usize,
    /// Motion width after its MLP.
    pub n_m_out: usize,
    pub head1: usize,
    pub head2: usize,
}

impl ModelDims {
    /// Default hidden widths for the given feature widths.
    pub fn for_features(l: usize, feats: FeatureDims) -> Self {
        Self {
            l,
            n_s: feats.n_s,
            n_d: feats.n_d,
            n_m: feats.n_m,
            h_s: 128,
            h_d: 32,
            n_m_out: 64,
            head1: 128,
            head2: 32,
        }
    }

    /// Width of one fused spatial row, `2 H_S + 2 H_D`.
    pub fn n_sd(&self) -> usize {
        2 * self.h_s + 2 * self.h_d
    }

    /// Width of the clip representation fed to the head.
    pub fn fused_len(&self) -> usize {
        self.n_sd() + self.n_m_out
    }

    pub fn feature_dims(&self) -> FeatureDims {
        FeatureDims {
            n_s: self.n_s,
            n_d: self.n_d,
            n_m: self.n_m,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let all = [
            self.l,
            self.n_s,
            self.n_d,
            self.n_m,
            self.h_s,
            self.h_d,
            self.n_m_out,
            self.head1,
            self.head2,
        ];
        if all.contains(&0) {
            return Err(ModelError::Config(format!("all widths must be positive: {self:?}")));
        }
        Ok(())
    }

    pub(crate) fn as_array(&self) -> [usize; 9] {
        [
            self.l,
            self.n_s,
            self.n_d,
            self.n_m,
            self.h_s,
            self.h_d,
            self.n_m_out,
            self.head1,
            self.head2,
        ]
    }
}

/// Fully connected layer `y = W x + b`, `W` stored `out x in`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

impl Linear {
    pub fn zeros(inp: usize, out: usize) -> Self {
        Self {
            w: Array2::zeros((out, inp)),
            b: Array1::zeros(out),
        }
    }

    fn seeded(inp: usize, out: usize, rng: &mut XorShift64) -> Self {
        let bound = (1.0 / inp as f64).sqrt();
        let w = Array2::from_shape_simple_fn((out, inp), || rng.uniform(-bound, bound));
        let b = Array1::from_shape_simple_fn(out, || rng.uniform(-bound, bound));
        Self { w, b }
    }

    pub fn in_dim(&self) -> usize {
        self.w.ncols()
    }

    pub fn out_dim(&self) -> usize {
        self.w.nrows()
    }
}

/// All learnable tensors. Also used as the gradient container.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub dims: ModelDims,
    pub omega_s: Linear,
    pub omega_s_err: Linear,
    pub omega_d: Linear,
    pub omega_d_err: Linear,
    /// Shared temporal weights over the `L` fused rows.
    pub temporal_w: Array1<f64>,
    /// Temporal bias (length 1).
    pub temporal_b: Array1<f64>,
    pub omega_m: Linear,
    pub head1: Linear,
    pub head2: Linear,
    pub head3: Linear,
}

/// Tensor names in serialization order.
pub const TENSOR_NAMES: [&str; 18] = [
    "omega_s.w",
    "omega_s.b",
    "omega_s_err.w",
    "omega_s_err.b",
    "omega_d.w",
    "omega_d.b",
    "omega_d_err.w",
    "omega_d_err.b",
    "temporal.w",
    "temporal.b",
    "omega_m.w",
    "omega_m.b",
    "head1.w",
    "head1.b",
    "head2.w",
    "head2.b",
    "head3.w",
    "head3.b",
];

impl ModelParams {
    pub fn zeros(dims: ModelDims) -> Self {
        Self {
            dims,
            omega_s: Linear::zeros(dims.n_s, dims.h_s),
            omega_s_err: Linear::zeros(dims.n_s, dims.h_s),
            omega_d: Linear::zeros(dims.n_d, dims.h_d),
            omega_d_err: Linear::zeros(dims.n_d, dims.h_d),
            temporal_w: Array1::zeros(dims.l),
            temporal_b: Array1::zeros(1),
            omega_m: Linear::zeros(dims.n_m, dims.n_m_out),
            head1: Linear::zeros(dims.fused_len(), dims.head1),
            head2: Linear::zeros(dims.head1, dims.head2),
            head3: Linear::zeros(dims.head2, 1),
        }
    }

    /// Uniform `±sqrt(1 / fan_in)` for weights and biases, drawn in
    /// serialization order from one seeded stream.
    pub fn init(dims: ModelDims, seed: u64) -> Result<Self, ModelError> {
        dims.validate()?;
        let mut rng = XorShift64::new(seed);
        let omega_s = Linear::seeded(dims.n_s, dims.h_s, &mut rng);
        let omega_s_err = Linear::seeded(dims.n_s, dims.h_s, &mut rng);
        let omega_d = Linear::seeded(dims.n_d, dims.h_d, &mut rng);
        let omega_d_err = Linear::seeded(dims.n_d, dims.h_d, &mut rng);
        let bound = (1.0 / dims.l as f64).sqrt();
        let temporal_w = Array1::from_shape_simple_fn(dims.l, || rng.uniform(-bound, bound));
        let temporal_b = Array1::from_shape_simple_fn(1, || rng.uniform(-bound, bound));
        let omega_m = Linear::seeded(dims.n_m, dims.n_m_out, &mut rng);
        let head1 = Linear::seeded(dims.fused_len(), dims.head1, &mut rng);
        let head2 = Linear::seeded(dims.head1, dims.head2, &mut rng);
        let head3 = Linear::seeded(dims.head2, 1, &mut rng);
        Ok(Self {
            dims,
            omega_s,
            omega_s_err,
            omega_d,
            omega_d_err,
            temporal_w,
            temporal_b,
            omega_m,
            head1,
            head2,
            head3,
        })
    }

    /// Flat views of every tensor, in serialization order.
    pub fn tensors(&self) -> [&[f64]; 18] {
        fn s(a: &Array2<f64>) -> &[f64] {
            a.as_slice().expect("standard layout")
        }
        fn v(a: &Array1<f64>) -> &[f64] {
            a.as_slice().expect("standard layout")
        }
        [
            s(&self.omega_s.w),
            v(&self.omega_s.b),
            s(&self.omega_s_err.w),
            v(&self.omega_s_err.b),
            s(&self.omega_d.w),
            v(&self.omega_d.b),
            s(&self.omega_d_err.w),
            v(&self.omega_d_err.b),
            v(&self.temporal_w),
            v(&self.temporal_b),
            s(&self.omega_m.w),
            v(&self.omega_m.b),
            s(&self.head1.w),
            v(&self.head1.b),
            s(&self.head2.w),
            v(&self.head2.b),
            s(&self.head3.w),
            v(&self.head3.b),
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut [f64]; 18] {
        fn s(a: &mut Array2<f64>) -> &mut [f64] {
            a.as_slice_mut().expect("standard layout")
        }
        fn v(a: &mut Array1<f64>) -> &mut [f64] {
            a.as_slice_mut().expect("standard layout")
        }
        [
            s(&mut self.omega_s.w),
            v(&mut self.omega_s.b),
            s(&mut self.omega_s_err.w),
            v(&mut self.omega_s_err.b),
            s(&mut self.omega_d.w),
            v(&mut self.omega_d.b),
            s(&mut self.omega_d_err.w),
            v(&mut self.omega_d_err.b),
            v(&mut self.temporal_w),
            v(&mut self.temporal_b),
            s(&mut self.omega_m.w),
            v(&mut self.omega_m.b),
            s(&mut self.head1.w),
            v(&mut self.head1.b),
            s(&mut self.head2.w),
            v(&mut self.head2.b),
            s(&mut self.head3.w),
            v(&mut self.head3.b),
        ]
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }

    /// `self += scale * other`, tensor by tensor.
    pub fn add_scaled(&mut self, other: &ModelParams, scale: f64) {
        for (a, b) in self.tensors_mut().into_iter().zip(other.tensors()) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += scale * y;
            }
        }
    }

    /// Round every value through `f32`, matching what a model file stores.
    pub fn quantize_f32(&mut self) {
        for t in self.tensors_mut() {
            for v in t.iter_mut() {
                *v = *v as f32 as f64;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dims() -> ModelDims {
        ModelDims::for_features(
            8,
            FeatureDims {
                n_s: 80,
                n_d: 7,
                n_m: 32,
            },
        )
    }

    #[test]
    fn default_widths() {
        let d = dims();
        assert_eq!(d.n_sd(), 320);
        assert_eq!(d.fused_len(), 384);
        let p = ModelParams::init(d, 0).unwrap();
        assert_eq!(p.head1.in_dim(), 384);
        assert_eq!(p.head3.out_dim(), 1);
        assert_eq!(p.tensors().len(), TENSOR_NAMES.len());
    }

    #[test]
    fn init_is_seeded_and_bounded() {
        let a = ModelParams::init(dims(), 3).unwrap();
        let b = ModelParams::init(dims(), 3).unwrap();
        let c = ModelParams::init(dims(), 4).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        let bound = (1.0f64 / 80.0).sqrt();
        assert!(a.omega_s.w.iter().all(|v| v.abs() <= bound));
    }

    #[test]
    fn zero_width_rejected() {
        let mut d = dims();
        d.h_d = 0;
        assert!(ModelParams::init(d, 0).is_err());
    }
}
