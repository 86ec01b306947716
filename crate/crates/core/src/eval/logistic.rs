//! Four-parameter logistic mapping fitted by Levenberg-Marquardt.
//!
//! `q' = b2 + (b1 - b2) / (1 + exp(-(q - b3) / |b4|))`
//!
//! The damping term is scaled by the diagonal of `J^T J`, which makes the
//! iterates equivariant under affine changes of the predictions.

use serde::{Deserialize, Serialize};

use super::metrics::pearson;
use super::EvalError;

pub const MAX_ITERATIONS: usize = 200;
pub const REL_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogisticFit {
    pub beta: [f64; 4],
    pub converged: bool,
    pub iterations: usize,
    /// Sum of squared residuals at `beta`.
    pub residual: f64,
}

pub fn logistic4(q: f64, beta: &[f64; 4]) -> f64 {
    let [b1, b2, b3, b4] = *beta;
    b2 + (b1 - b2) / (1.0 + (-(q - b3) / b4.abs()).exp())
}

fn sse(pred: &[f64], mos: &[f64], beta: &[f64; 4]) -> f64 {
    pred.iter()
        .zip(mos)
        .map(|(&q, &y)| (logistic4(q, beta) - y).powi(2))
        .sum()
}

/// `J^T J` and `J^T r` for residuals `r = f(q) - y`.
fn normal_equations(pred: &[f64], mos: &[f64], beta: &[f64; 4]) -> ([[f64; 4]; 4], [f64; 4]) {
    let [b1, b2, b3, b4] = *beta;
    let a = b4.abs();
    let sign = if b4 < 0.0 { -1.0 } else { 1.0 };
    let mut jtj = [[0.0; 4]; 4];
    let mut jtr = [0.0; 4];
    for (&q, &y) in pred.iter().zip(mos) {
        let u = (q - b3) / a;
        let g = 1.0 / (1.0 + (-u).exp());
        let dg = g * (1.0 - g);
        let r = b2 + (b1 - b2) * g - y;
        let j = [g, 1.0 - g, -(b1 - b2) * dg / a, -(b1 - b2) * dg * u / a * sign];
        for p in 0..4 {
            jtr[p] += j[p] * r;
            for k in 0..4 {
                jtj[p][k] += j[p] * j[k];
            }
        }
    }
    (jtj, jtr)
}

/// Gaussian elimination with partial pivoting; `None` if singular.
fn solve4(mut a: [[f64; 4]; 4], mut b: [f64; 4]) -> Option<[f64; 4]> {
    for col in 0..4 {
        let piv = (col..4).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-300 || !a[piv][col].is_finite() {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..4 {
            let f = a[row][col] / a[col][col];
            let pivot = a[col];
            for (v, p) in a[row].iter_mut().zip(pivot).skip(col) {
                *v -= f * p;
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 4];
    for row in (0..4).rev() {
        let s: f64 = (row + 1..4).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

fn levenberg_marquardt(pred: &[f64], mos: &[f64], init: [f64; 4]) -> LogisticFit {
    let mut beta = init;
    let mut cost = sse(pred, mos, &beta);
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        if cost == 0.0 {
            converged = true;
            break;
        }
        let (jtj, jtr) = normal_equations(pred, mos, &beta);
        let mut accepted = false;
        while lambda < 1e16 {
            let mut a = jtj;
            for (p, row) in a.iter_mut().enumerate() {
                row[p] += lambda * jtj[p][p].max(1e-300);
            }
            let step = solve4(a, jtr.map(|v| -v));
            if let Some(step) = step {
                let cand = [
                    beta[0] + step[0],
                    beta[1] + step[1],
                    beta[2] + step[2],
                    beta[3] + step[3],
                ];
                let c = sse(pred, mos, &cand);
                if c.is_finite() && c <= cost && cand[3] != 0.0 {
                    let rel = (cost - c) / cost;
                    beta = cand;
                    cost = c;
                    lambda = (lambda / 10.0).max(1e-12);
                    accepted = true;
                    if rel < REL_TOL {
                        converged = true;
                    }
                    break;
                }
            }
            lambda *= 10.0;
        }
        if !accepted {
            // No damped step reduces the cost: numerically stationary.
            converged = true;
        }
        if converged {
            break;
        }
    }
    beta[3] = beta[3].abs();
    LogisticFit {
        beta,
        converged,
        iterations,
        residual: cost,
    }
}

/// Fit the logistic from both orientations (increasing and decreasing)
/// and keep the lower residual.
pub fn fit_logistic(pred: &[f64], mos: &[f64]) -> Result<LogisticFit, EvalError> {
    if pred.len() != mos.len() {
        return Err(EvalError::LengthMismatch {
            left: pred.len(),
            right: mos.len(),
        });
    }
    if pred.len() < 5 {
        return Err(EvalError::TooFew {
            need: 5,
            got: pred.len(),
        });
    }
    if pred.iter().chain(mos).any(|v| !v.is_finite()) {
        return Err(EvalError::Undefined("non-finite input"));
    }
    let n = pred.len() as f64;
    let hi = mos.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = mos.iter().copied().fold(f64::INFINITY, f64::min);
    if hi == lo {
        return Err(EvalError::Undefined("constant mos"));
    }
    let mean = pred.iter().sum::<f64>() / n;
    let std = (pred.iter().map(|q| (q - mean).powi(2)).sum::<f64>() / n).sqrt();
    if std == 0.0 {
        return Err(EvalError::Undefined("constant predictions"));
    }
    let up = levenberg_marquardt(pred, mos, [hi, lo, mean, std / 4.0]);
    let down = levenberg_marquardt(pred, mos, [lo, hi, mean, std / 4.0]);
    Ok(if down.residual < up.residual { down } else { up })
}

/// Pearson correlation between logistic-mapped predictions and MOS.
pub fn plcc_after_fit(pred: &[f64], mos: &[f64]) -> Result<(f64, LogisticFit), EvalError> {
    let fit = fit_logistic(pred, mos)?;
    let mapped: Vec<f64> = pred.iter().map(|&q| logistic4(q, &fit.beta)).collect();
    Ok((pearson(&mapped, mos)?, fit))
}
