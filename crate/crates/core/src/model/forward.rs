use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};

use super::{shape_err, Linear, ModelError, ModelParams};
use crate::features::ClipFeatures;

/// `|row_{2k+1} - row_{2k}|` for `k = 0..L` (0-based), i.e. the absolute
/// change between the two frames of each sampled pair.
pub fn temporal_abs_diff(features: ArrayView2<'_, f64>) -> Result<Array2<f64>, ModelError> {
    let rows = features.nrows();
    if !rows.is_multiple_of(2) {
        return Err(shape_err("temporal difference", format!("odd row count {rows}")));
    }
    let later = features.slice(s![1..;2, ..]);
    let earlier = features.slice(s![0..;2, ..]);
    Ok((&later - &earlier).mapv(f64::abs))
}

/// Later frame of each pair (rows 1, 3, 5, ...).
fn pair_heads(features: ArrayView2<'_, f64>) -> Array2<f64> {
    features.slice(s![1..;2, ..]).to_owned()
}

/// Row-wise `relu(X W^T + b)`.
fn dense_relu(x: &Array2<f64>, layer: &Linear) -> Array2<f64> {
    let mut y = x.dot(&layer.w.t());
    y += &layer.b;
    y.mapv_inplace(|v| v.max(0.0));
    y
}

fn relu_vec(x: ArrayView1<'_, f64>, layer: &Linear) -> Array1<f64> {
    (layer.w.dot(&x) + &layer.b).mapv(|v| v.max(0.0))
}

/// Every intermediate of one clip's forward pass, kept for the backward pass.
#[derive(Debug, Clone)]
pub struct ClipTrace {
    pub(crate) x_s: Array2<f64>,
    pub(crate) x_s_err: Array2<f64>,
    pub(crate) x_d: Array2<f64>,
    pub(crate) x_d_err: Array2<f64>,
    pub(crate) mf: Array1<f64>,
    /// Fused spatial rows, `L x N_SD`.
    pub sd: Array2<f64>,
    /// Motion stream output.
    pub(crate) m_out: Array1<f64>,
    /// Clip representation `STF ++ motion`.
    pub fused: Array1<f64>,
    pub(crate) h1: Array1<f64>,
    pub(crate) h2: Array1<f64>,
    pub score: f64,
}

fn check_shapes(
    sf: ArrayView2<'_, f64>,
    df: ArrayView2<'_, f64>,
    mf: ArrayView1<'_, f64>,
    p: &ModelParams,
) -> Result<(), ModelError> {
    let d = &p.dims;
    if sf.dim() != (2 * d.l, d.n_s) {
        return Err(shape_err(
            "semantic",
            format!("expected {}x{}, got {}x{}", 2 * d.l, d.n_s, sf.nrows(), sf.ncols()),
        ));
    }
    if df.dim() != (2 * d.l, d.n_d) {
        return Err(shape_err(
            "distortion",
            format!("expected {}x{}, got {}x{}", 2 * d.l, d.n_d, df.nrows(), df.ncols()),
        ));
    }
    if mf.len() != d.n_m {
        return Err(shape_err("motion", format!("expected {}, got {}", d.n_m, mf.len())));
    }
    Ok(())
}

/// Fused spatial rows `SD` (`L x N_SD`): for each pair, the four stream
/// outputs `ω_s(SF) ++ ω_d(DF) ++ ω_s'(SF') ++ ω_d'(DF')`.
pub fn spatial_fusion(
    sf: ArrayView2<'_, f64>,
    df: ArrayView2<'_, f64>,
    p: &ModelParams,
) -> Result<Array2<f64>, ModelError> {
    check_shapes(sf, df, Array1::zeros(p.dims.n_m).view(), p)?;
    let (a, b, c, d) = stream_outputs(
        &pair_heads(sf),
        &temporal_abs_diff(sf)?,
        &pair_heads(df),
        &temporal_abs_diff(df)?,
        p,
    );
    Ok(concat_streams(&a, &b, &c, &d))
}

fn stream_outputs(
    x_s: &Array2<f64>,
    x_s_err: &Array2<f64>,
    x_d: &Array2<f64>,
    x_d_err: &Array2<f64>,
    p: &ModelParams,
) -> (Array2<f64>, Array2<f64>, Array2<f64>, Array2<f64>) {
    (
        dense_relu(x_s, &p.omega_s),
        dense_relu(x_d, &p.omega_d),
        dense_relu(x_s_err, &p.omega_s_err),
        dense_relu(x_d_err, &p.omega_d_err),
    )
}

fn concat_streams(a: &Array2<f64>, b: &Array2<f64>, c: &Array2<f64>, d: &Array2<f64>) -> Array2<f64> {
    ndarray::concatenate(Axis(1), &[a.view(), b.view(), c.view(), d.view()]).expect("row counts agree")
}

pub(crate) fn trace_clip(clip: &ClipFeatures, p: &ModelParams) -> Result<ClipTrace, ModelError> {
    let (sf, df, mf) = (clip.sf.view(), clip.df.view(), clip.mf.view());
    check_shapes(sf, df, mf, p)?;
    let x_s = pair_heads(sf);
    let x_s_err = temporal_abs_diff(sf)?;
    let x_d = pair_heads(df);
    let x_d_err = temporal_abs_diff(df)?;
    let (a, b, c, d) = stream_outputs(&x_s, &x_s_err, &x_d, &x_d_err, p);
    let sd = concat_streams(&a, &b, &c, &d);
    // STF_c = sum_k w_k SD_{k,c} + b
    let stf = p.temporal_w.dot(&sd) + p.temporal_b[0];
    let m_out = relu_vec(mf, &p.omega_m);
    let fused = ndarray::concatenate(Axis(0), &[stf.view(), m_out.view()]).expect("1-d concat");
    let h1 = relu_vec(fused.view(), &p.head1);
    let h2 = relu_vec(h1.view(), &p.head2);
    let score = p.head3.w.row(0).dot(&h2) + p.head3.b[0];
    Ok(ClipTrace {
        x_s,
        x_s_err,
        x_d,
        x_d_err,
        mf: clip.mf.clone(),
        sd,
        m_out,
        fused,
        h1,
        h2,
        score,
    })
}

/// Clip representation `F = STF ++ ω_m(MF)`, length `N_SD + N_M'`.
pub fn fuse_clip(
    sf: ArrayView2<'_, f64>,
    df: ArrayView2<'_, f64>,
    mf: ArrayView1<'_, f64>,
    p: &ModelParams,
) -> Result<Array1<f64>, ModelError> {
    check_shapes(sf, df, mf, p)?;
    let sd = spatial_fusion(sf, df, p)?;
    let stf = p.temporal_w.dot(&sd) + p.temporal_b[0];
    let m_out = relu_vec(mf, &p.omega_m);
    Ok(ndarray::concatenate(Axis(0), &[stf.view(), m_out.view()]).expect("1-d concat"))
}

/// Three-layer head, ReLU after the first two layers, linear output.
pub fn regress(fused: ArrayView1<'_, f64>, p: &ModelParams) -> Result<f64, ModelError> {
    if fused.len() != p.dims.fused_len() {
        return Err(shape_err(
            "head",
            format!("expected {} inputs, got {}", p.dims.fused_len(), fused.len()),
        ));
    }
    let h1 = relu_vec(fused, &p.head1);
    let h2 = relu_vec(h1.view(), &p.head2);
    Ok(p.head3.w.row(0).dot(&h2) + p.head3.b[0])
}

/// Video score: mean of the clip scores.
pub fn predict_video(clip_scores: &[f64]) -> Result<f64, ModelError> {
    if clip_scores.is_empty() {
        return Err(ModelError::Empty("no clip scores to pool"));
    }
    Ok(clip_scores.iter().sum::<f64>() / clip_scores.len() as f64)
}

/// Score every clip of a video and pool.
pub fn predict_clips(clips: &[ClipFeatures], p: &ModelParams) -> Result<f64, ModelError> {
    let scores = clips
        .iter()
        .map(|c| trace_clip(c, p).map(|t| t.score))
        .collect::<Result<Vec<_>, _>>()?;
    predict_video(&scores)
}

/// Mean squared error between video predictions and labels.
pub fn mse_loss(predicted: &[f64], labels: &[f64]) -> Result<f64, ModelError> {
    if predicted.len() != labels.len() {
        return Err(ModelError::LengthMismatch {
            left: predicted.len(),
            right: labels.len(),
        });
    }
    if predicted.is_empty() {
        return Err(ModelError::Empty("no predictions"));
    }
    Ok(predicted.iter().zip(labels).map(|(p, y)| (p - y).powi(2)).sum::<f64>() / predicted.len() as f64)
}
