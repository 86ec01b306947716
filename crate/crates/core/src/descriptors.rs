//! Handcrafted frame-level distortion descriptors: blur, noise, block
//! effect, exposure and colorfulness.
//!
//! All outputs are normalized to the 8-bit range (divided by 255) so the
//! seven components live on comparable scales. Every descriptor except
//! colorfulness works on BT.601 luma.

use crate::media::{to_luma, Frame, LumaPlane};

/// Number of distortion channels.
pub const N_D: usize = 7;

/// Pixels at or above this luma count as over-exposed.
pub const OVER_EXPOSED: u8 = 250;
/// Pixels at or below this luma count as under-exposed.
pub const UNDER_EXPOSED: u8 = 5;

/// The seven distortion components, in feature-file order.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DistortionVector {
    pub blur: f64,
    pub noise_sigma: f64,
    pub blockiness: f64,
    pub exposure_mean: f64,
    pub over_exposed_frac: f64,
    pub under_exposed_frac: f64,
    pub colorfulness: f64,
}

impl DistortionVector {
    pub fn to_array(&self) -> [f64; N_D] {
        [
            self.blur,
            self.noise_sigma,
            self.blockiness,
            self.exposure_mean,
            self.over_exposed_frac,
            self.under_exposed_frac,
            self.colorfulness,
        ]
    }
}

/// Sharpness from the maximum local variation (MLV): the largest absolute
/// difference between an interior pixel and its 8 neighbours. Returns the
/// mean of the top 1% of MLV values over 255; lower means blurrier.
///
/// Planes narrower or shorter than 3 pixels have no interior and score 0.
pub fn blur_score(y: &LumaPlane) -> f64 {
    let (w, h) = (y.width(), y.height());
    if w < 3 || h < 3 {
        return 0.0;
    }
    let s = y.samples();
    let mut mlv = Vec::with_capacity((w - 2) * (h - 2));
    for r in 1..h - 1 {
        for c in 1..w - 1 {
            let p = s[r * w + c] as i16;
            let mut best = 0i16;
            for nr in r - 1..=r + 1 {
                for nc in c - 1..=c + 1 {
                    best = best.max((p - s[nr * w + nc] as i16).abs());
                }
            }
            mlv.push(best as u8);
        }
    }
    let k = mlv.len().div_ceil(100);
    // Counting sort: values are 8-bit.
    let mut hist = [0usize; 256];
    for &v in &mlv {
        hist[v as usize] += 1;
    }
    let mut remaining = k;
    let mut total = 0u64;
    for v in (0..256).rev() {
        let take = hist[v].min(remaining);
        total += (take * v) as u64;
        remaining -= take;
        if remaining == 0 {
            break;
        }
    }
    total as f64 / k as f64 / 255.0
}

/// Noise standard deviation from the median absolute response of the
/// 3x3 Laplacian-difference kernel `[[1,-2,1],[-2,4,-2],[1,-2,1]]`, whose
/// response to white Gaussian noise has standard deviation `6 sigma`.
///
/// Strong texture inflates the estimate.
pub fn noise_sigma(y: &LumaPlane) -> f64 {
    let (w, h) = (y.width(), y.height());
    if w < 3 || h < 3 {
        return 0.0;
    }
    let s = y.samples();
    let at = |r: usize, c: usize| s[r * w + c] as i32;
    let mut resp: Vec<u32> = Vec::with_capacity((w - 2) * (h - 2));
    for r in 1..h - 1 {
        for c in 1..w - 1 {
            let v = at(r - 1, c - 1) - 2 * at(r - 1, c) + at(r - 1, c + 1) - 2 * at(r, c - 1) + 4 * at(r, c)
                - 2 * at(r, c + 1)
                + at(r + 1, c - 1)
                - 2 * at(r + 1, c)
                + at(r + 1, c + 1);
            resp.push(v.unsigned_abs());
        }
    }
    let median = median_u32(&mut resp);
    median / (0.6745 * 6.0) / 255.0
}

fn median_u32(v: &mut [u32]) -> f64 {
    let n = v.len();
    let mid = n / 2;
    let (_, &mut hi, _) = v.select_nth_unstable(mid);
    if n % 2 == 1 {
        hi as f64
    } else {
        let lo = *v[..mid].iter().max().unwrap();
        (lo as f64 + hi as f64) / 2.0
    }
}

/// Block-boundary contrast on an 8-pixel grid: mean absolute horizontal
/// (vertical) neighbour difference across grid lines minus the mean
/// elsewhere, averaged over both directions, floored at 0, over 255.
pub fn blockiness(y: &LumaPlane) -> f64 {
    let (w, h) = (y.width(), y.height());
    let s = y.samples();
    let mut acc = [0.0f64; 4]; // boundary h, interior h, boundary v, interior v
    let mut cnt = [0usize; 4];
    for r in 0..h {
        for c in 0..w.saturating_sub(1) {
            let d = (s[r * w + c + 1] as i16 - s[r * w + c] as i16).abs() as f64;
            let slot = if (c + 1) % 8 == 0 { 0 } else { 1 };
            acc[slot] += d;
            cnt[slot] += 1;
        }
    }
    for r in 0..h.saturating_sub(1) {
        for c in 0..w {
            let d = (s[(r + 1) * w + c] as i16 - s[r * w + c] as i16).abs() as f64;
            let slot = if (r + 1) % 8 == 0 { 2 } else { 3 };
            acc[slot] += d;
            cnt[slot] += 1;
        }
    }
    let mean = |i: usize| if cnt[i] == 0 { 0.0 } else { acc[i] / cnt[i] as f64 };
    let contrast = (mean(0) - mean(1) + mean(2) - mean(3)) / 2.0;
    contrast.max(0.0) / 255.0
}

/// `(mean luma / 255, fraction >= 250, fraction <= 5)`.
pub fn exposure_stats(y: &LumaPlane) -> (f64, f64, f64) {
    let s = y.samples();
    let n = s.len() as f64;
    let sum: u64 = s.iter().map(|&v| v as u64).sum();
    let over = s.iter().filter(|&&v| v >= OVER_EXPOSED).count();
    let under = s.iter().filter(|&&v| v <= UNDER_EXPOSED).count();
    (sum as f64 / n / 255.0, over as f64 / n, under as f64 / n)
}

/// Hasler-Süsstrunk colorfulness over 255, with population statistics of
/// the opponent channels `rg = R - G` and `yb = (R + G) / 2 - B`.
pub fn colorfulness(frame: &Frame) -> f64 {
    let n = (frame.width() * frame.height()) as f64;
    let (mut s_rg, mut s_yb) = (0.0, 0.0);
    for p in frame.rgb().chunks_exact(3) {
        let (r, g, b) = (p[0] as f64, p[1] as f64, p[2] as f64);
        s_rg += r - g;
        s_yb += 0.5 * (r + g) - b;
    }
    let (mu_rg, mu_yb) = (s_rg / n, s_yb / n);
    let (mut v_rg, mut v_yb) = (0.0, 0.0);
    for p in frame.rgb().chunks_exact(3) {
        let (r, g, b) = (p[0] as f64, p[1] as f64, p[2] as f64);
        v_rg += (r - g - mu_rg).powi(2);
        v_yb += (0.5 * (r + g) - b - mu_yb).powi(2);
    }
    let sigma = (v_rg / n + v_yb / n).sqrt();
    let mu = (mu_rg * mu_rg + mu_yb * mu_yb).sqrt();
    (sigma + 0.3 * mu) / 255.0
}

pub fn distortion_vector(frame: &Frame) -> DistortionVector {
    let y = to_luma(frame);
    let (exposure_mean, over_exposed_frac, under_exposed_frac) = exposure_stats(&y);
    DistortionVector {
        blur: blur_score(&y),
        noise_sigma: noise_sigma(&y),
        blockiness: blockiness(&y),
        exposure_mean,
        over_exposed_frac,
        under_exposed_frac,
        colorfulness: colorfulness(frame),
    }
}
