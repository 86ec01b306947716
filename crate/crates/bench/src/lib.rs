//! Deterministic inputs shared by the benchmarks.

use mdvqa_core::features::ClipFeatures;
use mdvqa_core::media::Frame;
use mdvqa_core::model::ModelDims;
use mdvqa_core::rng::XorShift64;
use ndarray::{Array1, Array2};

/// Noisy diagonal stripes with a color gradient.
pub fn textured_frame(width: usize, height: usize, seed: u64) -> Frame {
    let mut rng = XorShift64::new(seed);
    Frame::from_fn(width, height, 0, |x, y| {
        let stripe = if (x + 2 * y) / 6 % 2 == 0 { 60.0 } else { 190.0 };
        let v = (stripe + rng.normal() * 12.0).clamp(0.0, 255.0) as u8;
        [v, (x * 255 / width) as u8, (y * 255 / height) as u8]
    })
    .expect("valid frame size")
}

pub fn random_clip(dims: &ModelDims, rng: &mut XorShift64) -> ClipFeatures {
    let rows = 2 * dims.l;
    let sf = Array2::from_shape_fn((rows, dims.n_s), |_| rng.uniform(0.0, 1.0));
    let df = Array2::from_shape_fn((rows, dims.n_d), |_| rng.uniform(0.0, 1.0));
    let mf = Array1::from_shape_fn(dims.n_m, |_| rng.uniform(0.0, 1.0));
    ClipFeatures::new(sf, df, mf).expect("consistent shapes")
}

/// `videos` videos of `clips` clips each with uniform labels in [1, 5].
pub fn random_dataset(dims: &ModelDims, videos: usize, clips: usize, seed: u64) -> Vec<(Vec<ClipFeatures>, f64)> {
    let mut rng = XorShift64::new(seed);
    (0..videos)
        .map(|_| {
            let c = (0..clips).map(|_| random_clip(dims, &mut rng)).collect();
            (c, rng.uniform(1.0, 5.0))
        })
        .collect()
}

pub fn random_pairs(n: usize, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let mut rng = XorShift64::new(seed);
    let x: Vec<f64> = (0..n).map(|_| rng.uniform(0.0, 1.0)).collect();
    let y = x
        .iter()
        .map(|v| 1.0 + 4.0 / (1.0 + (-(v - 0.5) * 8.0).exp()) + 0.1 * rng.normal())
        .collect();
    (x, y)
}
