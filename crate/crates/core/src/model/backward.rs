//! Analytic gradients of the video-level MSE loss. ReLU has subgradient 0
//! at 0.

use ndarray::{s, Array1, Array2, ArrayView1, Axis};

use super::forward::{trace_clip, ClipTrace};
use super::{Linear, ModelError, ModelParams};
use crate::features::ClipFeatures;

/// Loss, per-video predictions and parameter gradients of one batch.
#[derive(Debug, Clone)]
pub struct BatchGradients {
    pub loss: f64,
    pub predictions: Vec<f64>,
    pub grads: ModelParams,
}

fn outer_acc(g: &mut Array2<f64>, dy: ArrayView1<'_, f64>, x: ArrayView1<'_, f64>) {
    for (mut row, &d) in g.rows_mut().into_iter().zip(dy) {
        if d != 0.0 {
            row.scaled_add(d, &x);
        }
    }
}

fn mask_relu(dy: &mut Array1<f64>, y: &Array1<f64>) {
    dy.zip_mut_with(y, |d, &v| {
        if v <= 0.0 {
            *d = 0.0
        }
    });
}

/// Backprop a row-batched `relu(X W^T + b)` given the post-activation
/// outputs and upstream gradient.
fn dense_relu_backward(g: &mut Linear, x: &Array2<f64>, y: ndarray::ArrayView2<'_, f64>, mut dy: Array2<f64>) {
    dy.zip_mut_with(&y, |d, &v| {
        if v <= 0.0 {
            *d = 0.0
        }
    });
    g.w += &dy.t().dot(x);
    g.b += &dy.sum_axis(Axis(0));
}

/// Accumulate `d score / d params * dq` for one traced clip into `g`.
fn backprop_clip(t: &ClipTrace, dq: f64, p: &ModelParams, g: &mut ModelParams) {
    let d = p.dims;

    // head3 (linear output)
    g.head3.w.row_mut(0).scaled_add(dq, &t.h2);
    g.head3.b[0] += dq;
    let mut dh2 = p.head3.w.row(0).to_owned() * dq;
    mask_relu(&mut dh2, &t.h2);

    outer_acc(&mut g.head2.w, dh2.view(), t.h1.view());
    g.head2.b += &dh2;
    let mut dh1 = p.head2.w.t().dot(&dh2);
    mask_relu(&mut dh1, &t.h1);

    outer_acc(&mut g.head1.w, dh1.view(), t.fused.view());
    g.head1.b += &dh1;
    let dfused = p.head1.w.t().dot(&dh1);

    let n_sd = d.n_sd();
    let dstf = dfused.slice(s![..n_sd]);
    let mut dm = dfused.slice(s![n_sd..]).to_owned();
    mask_relu(&mut dm, &t.m_out);
    outer_acc(&mut g.omega_m.w, dm.view(), t.mf.view());
    g.omega_m.b += &dm;

    // STF = w^T SD + b
    g.temporal_w += &t.sd.dot(&dstf);
    g.temporal_b[0] += dstf.sum();
    let mut dsd = Array2::<f64>::zeros(t.sd.dim());
    for (k, mut row) in dsd.rows_mut().into_iter().enumerate() {
        row.scaled_add(p.temporal_w[k], &dstf);
    }

    let (hs, hd) = (d.h_s, d.h_d);
    let segments = [
        (0, hs),
        (hs, hs + hd),
        (hs + hd, 2 * hs + hd),
        (2 * hs + hd, 2 * hs + 2 * hd),
    ];
    let cols = |a: &Array2<f64>, (lo, hi): (usize, usize)| a.slice(s![.., lo..hi]).to_owned();
    dense_relu_backward(
        &mut g.omega_s,
        &t.x_s,
        t.sd.slice(s![.., segments[0].0..segments[0].1]),
        cols(&dsd, segments[0]),
    );
    dense_relu_backward(
        &mut g.omega_d,
        &t.x_d,
        t.sd.slice(s![.., segments[1].0..segments[1].1]),
        cols(&dsd, segments[1]),
    );
    dense_relu_backward(
        &mut g.omega_s_err,
        &t.x_s_err,
        t.sd.slice(s![.., segments[2].0..segments[2].1]),
        cols(&dsd, segments[2]),
    );
    dense_relu_backward(
        &mut g.omega_d_err,
        &t.x_d_err,
        t.sd.slice(s![.., segments[3].0..segments[3].1]),
        cols(&dsd, segments[3]),
    );
}

/// Forward one video and return its prediction plus the gradient of
/// `(Q - label)^2 * weight` with respect to every parameter.
pub(crate) fn video_gradients(
    clips: &[ClipFeatures],
    label: f64,
    weight: f64,
    p: &ModelParams,
) -> Result<(f64, ModelParams), ModelError> {
    if clips.is_empty() {
        return Err(ModelError::Empty("video has no clips"));
    }
    let traces = clips.iter().map(|c| trace_clip(c, p)).collect::<Result<Vec<_>, _>>()?;
    let q = traces.iter().map(|t| t.score).sum::<f64>() / traces.len() as f64;
    let dq = 2.0 * (q - label) * weight / traces.len() as f64;
    let mut g = ModelParams::zeros(p.dims);
    if dq != 0.0 {
        for t in &traces {
            backprop_clip(t, dq, p, &mut g);
        }
    }
    Ok((q, g))
}

/// Loss and gradients of `mean_m (Q_m - y_m)^2` over a batch of videos.
pub fn backward(batch: &[(&[ClipFeatures], f64)], p: &ModelParams) -> Result<BatchGradients, ModelError> {
    use rayon::prelude::*;
    if batch.is_empty() {
        return Err(ModelError::Empty("empty batch"));
    }
    let weight = 1.0 / batch.len() as f64;
    let per_video = batch
        .par_iter()
        .map(|(clips, label)| video_gradients(clips, *label, weight, p))
        .collect::<Result<Vec<_>, _>>()?;
    // Fixed-order reduction keeps results bitwise reproducible.
    let mut grads = ModelParams::zeros(p.dims);
    let mut predictions = Vec::with_capacity(batch.len());
    for (q, g) in &per_video {
        grads.add_scaled(g, 1.0);
        predictions.push(*q);
    }
    let labels: Vec<f64> = batch.iter().map(|(_, y)| *y).collect();
    let loss = super::mse_loss(&predictions, &labels)?;
    Ok(BatchGradients {
        loss,
        predictions,
        grads,
    })
}
