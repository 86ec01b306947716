//! Independent reference implementations and the acceptance checks built
//! on them. Shared by the integration tests and the acceptance binary.
#![allow(dead_code)]

use std::time::Instant;

use mdvqa_core::descriptors::{blockiness, blur_score, colorfulness, noise_sigma};
use mdvqa_core::eval::{fit_logistic, logistic4, pearson, run_protocol, split_dataset, srcc, ProtocolConfig};
use mdvqa_core::features::manifest::STUDY_CRFS;
use mdvqa_core::features::{read_feature_file, write_feature_file, ClipFeatures, FeatureDims, FeatureKind};
use mdvqa_core::media::{Frame, LumaPlane};
use mdvqa_core::model::{
    backward, fuse_clip, load_model, mse_loss, predict_clips, save_model, Linear, ModelDims, ModelParams,
};
use mdvqa_core::study::{
    compute_zscores, read_ratings_csv, rescale_zscores, run_study, write_ratings_csv, RatingRecord, StudyConfig,
    SubjectTable,
};
use mdvqa_core::synthetic::{synthetic_dataset, synthetic_manifest, SyntheticConfig};
use mdvqa_core::{Manifest, ManifestEntry};
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub struct Check {
    pub ok: bool,
    pub detail: String,
}

impl Check {
    fn new(ok: bool, detail: impl Into<String>) -> Self {
        Self {
            ok,
            detail: detail.into(),
        }
    }

    pub fn assert(self) {
        assert!(self.ok, "{}", self.detail);
    }
}

// ---------------------------------------------------------------- model

pub fn tiny_dims() -> ModelDims {
    ModelDims::for_features(2, FeatureDims { n_s: 5, n_d: 7, n_m: 4 }).with_hidden(4, 3, 3)
}

trait WithHidden {
    fn with_hidden(self, h_s: usize, h_d: usize, n_m_out: usize) -> Self;
}

impl WithHidden for ModelDims {
    fn with_hidden(mut self, h_s: usize, h_d: usize, n_m_out: usize) -> Self {
        self.h_s = h_s;
        self.h_d = h_d;
        self.n_m_out = n_m_out;
        self
    }
}

pub fn random_clip(dims: &ModelDims, rng: &mut ChaCha8Rng) -> ClipFeatures {
    let rows = 2 * dims.l;
    ClipFeatures::new(
        Array2::from_shape_fn((rows, dims.n_s), |_| rng.random::<f64>()),
        Array2::from_shape_fn((rows, dims.n_d), |_| rng.random::<f64>()),
        Array1::from_shape_fn(dims.n_m, |_| rng.random::<f64>()),
    )
    .unwrap()
}

fn dense_relu(layer: &Linear, x: &[f64], relu: bool) -> Vec<f64> {
    (0..layer.w.nrows())
        .map(|o| {
            let mut acc = layer.b[o];
            for (i, xi) in x.iter().enumerate() {
                acc += layer.w[[o, i]] * xi;
            }
            if relu {
                acc.max(0.0)
            } else {
                acc
            }
        })
        .collect()
}

/// Scalar re-implementation of the clip forward pass: returns the fused
/// vector and the clip score.
pub fn oracle_clip(clip: &ClipFeatures, p: &ModelParams) -> (Vec<f64>, f64) {
    let l = clip.sf.nrows() / 2;
    let row = |m: &Array2<f64>, r: usize| m.row(r).to_vec();
    let absdiff = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).abs()).collect::<Vec<_>>();
    let mut sd: Vec<Vec<f64>> = Vec::new();
    for k in 0..l {
        // 1-based frames 2k-1 and 2k are 0-based rows 2k and 2k+1
        let (s_prev, s_cur) = (row(&clip.sf, 2 * k), row(&clip.sf, 2 * k + 1));
        let (d_prev, d_cur) = (row(&clip.df, 2 * k), row(&clip.df, 2 * k + 1));
        let mut r = dense_relu(&p.omega_s, &s_cur, true);
        r.extend(dense_relu(&p.omega_d, &d_cur, true));
        r.extend(dense_relu(&p.omega_s_err, &absdiff(&s_cur, &s_prev), true));
        r.extend(dense_relu(&p.omega_d_err, &absdiff(&d_cur, &d_prev), true));
        sd.push(r);
    }
    let width = sd[0].len();
    let mut fused: Vec<f64> = (0..width)
        .map(|c| {
            let mut acc = p.temporal_b[0];
            for (k, r) in sd.iter().enumerate() {
                acc += p.temporal_w[k] * r[c];
            }
            acc
        })
        .collect();
    fused.extend(dense_relu(&p.omega_m, &clip.mf.to_vec(), true));
    let h1 = dense_relu(&p.head1, &fused, true);
    let h2 = dense_relu(&p.head2, &h1, true);
    let score = dense_relu(&p.head3, &h2, false)[0];
    (fused, score)
}

/// Forward pass against the scalar oracle on 20 seeds.
pub fn check_fusion() -> Check {
    let dims = ModelDims {
        l: 3,
        n_s: 3,
        n_d: 7,
        n_m: 3,
        h_s: 3,
        h_d: 3,
        n_m_out: 3,
        head1: 6,
        head2: 4,
    };
    let mut worst = 0.0f64;
    for seed in 0..20u64 {
        let p = ModelParams::init(dims, seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let clip = random_clip(&dims, &mut rng);
        let (want_f, want_q) = oracle_clip(&clip, &p);
        let got_f = fuse_clip(clip.sf.view(), clip.df.view(), clip.mf.view(), &p).unwrap();
        let got_q = predict_clips(std::slice::from_ref(&clip), &p).unwrap();
        if got_f.len() != want_f.len() {
            return Check::new(
                false,
                format!("seed {seed}: fused length {} vs {}", got_f.len(), want_f.len()),
            );
        }
        for (a, b) in got_f.iter().zip(&want_f) {
            worst = worst.max((a - b).abs());
        }
        worst = worst.max((got_q - want_q).abs());
    }
    Check::new(worst <= 1e-6, format!("20 seeds, max |diff| = {worst:.3e} (tol 1e-6)"))
}

fn batch_loss(videos: &[(Vec<ClipFeatures>, f64)], p: &ModelParams) -> f64 {
    let preds: Vec<f64> = videos.iter().map(|(c, _)| predict_clips(c, p).unwrap()).collect();
    let labels: Vec<f64> = videos.iter().map(|(_, y)| *y).collect();
    mse_loss(&preds, &labels).unwrap()
}

pub fn gradient_fixture(seed: u64) -> (ModelParams, Vec<(Vec<ClipFeatures>, f64)>) {
    let dims = tiny_dims();
    let p = ModelParams::init(dims, seed).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xFD);
    let videos = (0..3)
        .map(|i| {
            let clips = (0..2).map(|_| random_clip(&dims, &mut rng)).collect();
            (clips, 1.0 + i as f64 * 1.5)
        })
        .collect();
    (p, videos)
}

/// Fixture seed for the central-difference check. A stencil of +-1e-3
/// that straddles a ReLU kink measures a one-sided slope, so the fixture
/// must keep ReLU inputs clear of zero. Under this seed one stencil of
/// 6579 crosses a kink, at a unit whose slope change does not reach the
/// loss measurably; the crossing count is reported with the result.
pub const GRADIENT_SEED: u64 = 0;

/// Inputs of every ReLU in the clip forward pass.
pub fn relu_inputs(clip: &ClipFeatures, p: &ModelParams) -> Vec<f64> {
    let linear = |layer: &Linear, x: &[f64]| dense_relu(layer, x, false);
    let relu = |v: &[f64]| v.iter().map(|x| x.max(0.0)).collect::<Vec<_>>();
    let mut out = Vec::new();
    for k in 0..clip.sf.nrows() / 2 {
        let (sp, sc) = (clip.sf.row(2 * k).to_vec(), clip.sf.row(2 * k + 1).to_vec());
        let (dp, dc) = (clip.df.row(2 * k).to_vec(), clip.df.row(2 * k + 1).to_vec());
        let ad = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).abs()).collect::<Vec<_>>();
        out.extend(linear(&p.omega_s, &sc));
        out.extend(linear(&p.omega_d, &dc));
        out.extend(linear(&p.omega_s_err, &ad(&sc, &sp)));
        out.extend(linear(&p.omega_d_err, &ad(&dc, &dp)));
    }
    out.extend(linear(&p.omega_m, &clip.mf.to_vec()));
    let (fused, _) = oracle_clip(clip, p);
    let z1 = linear(&p.head1, &fused);
    let z2 = linear(&p.head2, &relu(&z1));
    out.extend(z1);
    out.extend(z2);
    out
}

/// Every analytic gradient entry against a central difference.
pub fn check_gradient() -> Check {
    let start = Instant::now();
    let (p, videos) = gradient_fixture(GRADIENT_SEED);
    let pattern = |q: &ModelParams| -> Vec<bool> {
        videos
            .iter()
            .flat_map(|(clips, _)| clips.iter().flat_map(|c| relu_inputs(c, q)))
            .map(|z| z > 0.0)
            .collect()
    };
    let mut crossings = 0usize;
    let batch: Vec<(&[ClipFeatures], f64)> = videos.iter().map(|(c, y)| (c.as_slice(), *y)).collect();
    let analytic = backward(&batch, &p).unwrap().grads;
    let eps = 1e-3;
    let mut worst = 0.0f64;
    let mut worst_at = String::new();
    let mut count = 0usize;
    let names = mdvqa_core::model::TENSOR_NAMES;
    for (t, name) in names.iter().enumerate() {
        let len = p.tensors()[t].len();
        for i in 0..len {
            let mut plus = p.clone();
            plus.tensors_mut()[t][i] += eps;
            let mut minus = p.clone();
            minus.tensors_mut()[t][i] -= eps;
            let numeric = (batch_loss(&videos, &plus) - batch_loss(&videos, &minus)) / (2.0 * eps);
            let a = analytic.tensors()[t][i];
            let scale = a.abs().max(numeric.abs());
            let rel = if scale < 1e-8 { 0.0 } else { (a - numeric).abs() / scale };
            if rel > worst {
                worst = rel;
                worst_at = format!("{name}[{i}] analytic {a:.6e} numeric {numeric:.6e}");
            }
            count += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    // diagnostic only, outside the timed pass
    for t in 0..names.len() {
        for i in 0..p.tensors()[t].len() {
            let mut plus = p.clone();
            plus.tensors_mut()[t][i] += eps;
            let mut minus = p.clone();
            minus.tensors_mut()[t][i] -= eps;
            crossings += usize::from(pattern(&plus) != pattern(&minus));
        }
    }
    Check::new(
        worst < 1e-4 && secs < 10.0,
        format!(
            "{count} parameters, eps {eps}, max rel err {worst:.2e} (tol 1e-4) at {worst_at}, \
             stencils crossing a ReLU kink {crossings}, {secs:.2}s (limit 10s)"
        ),
    )
}

// ---------------------------------------------------------- descriptors

pub fn gaussian_blur(img: &[f64], w: usize, h: usize, sigma: f64) -> Vec<f64> {
    if sigma == 0.0 {
        return img.to_vec();
    }
    let r = (3.0 * sigma).ceil() as isize;
    let k: Vec<f64> = (-r..=r)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let norm: f64 = k.iter().sum();
    let pass = |src: &[f64], horizontal: bool| {
        let mut out = vec![0.0; src.len()];
        for y in 0..h {
            for x in 0..w {
                let mut acc = 0.0;
                for (ki, i) in (-r..=r).enumerate() {
                    let (xx, yy) = if horizontal {
                        ((x as isize + i).clamp(0, w as isize - 1) as usize, y)
                    } else {
                        (x, (y as isize + i).clamp(0, h as isize - 1) as usize)
                    };
                    acc += k[ki] * src[yy * w + xx];
                }
                out[y * w + x] = acc / norm;
            }
        }
        out
    };
    pass(&pass(img, true), false)
}

pub fn to_plane(img: &[f64], w: usize, h: usize) -> LumaPlane {
    LumaPlane::new(w, h, img.iter().map(|v| v.round().clamp(0.0, 255.0) as u8).collect()).unwrap()
}

pub fn noisy_flat(sigma: f64, seed: u64) -> LumaPlane {
    let (w, h) = (256, 256);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = Normal::new(0.0, sigma).unwrap();
    let img: Vec<f64> = (0..w * h).map(|_| 128.0 + n.sample(&mut rng)).collect();
    to_plane(&img, w, h)
}

pub fn random_texture(w: usize, h: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..w * h).map(|_| rng.random_range(0.0..255.0)).collect()
}

/// 8x8 flat blocks with random levels, and the same image after a 3x3
/// box filter that smooths every block boundary.
pub fn blocked_pair(seed: u64) -> (LumaPlane, LumaPlane) {
    let (w, h) = (64, 64);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let levels: Vec<f64> = (0..64).map(|_| rng.random_range(30.0..220.0)).collect();
    let img: Vec<f64> = (0..w * h).map(|i| levels[(i / w / 8) * 8 + (i % w) / 8]).collect();
    let mut smooth = img.clone();
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for dy in -1isize..=1 {
                for dx in -1isize..=1 {
                    let yy = (y as isize + dy).clamp(0, h as isize - 1) as usize;
                    let xx = (x as isize + dx).clamp(0, w as isize - 1) as usize;
                    acc += img[yy * w + xx];
                }
            }
            smooth[y * w + x] = acc / 9.0;
        }
    }
    (to_plane(&img, w, h), to_plane(&smooth, w, h))
}

pub fn check_descriptors() -> Check {
    let mut notes = Vec::new();
    let mut ok = true;
    for sigma in [5.0, 10.0, 20.0] {
        let est = noise_sigma(&noisy_flat(sigma, sigma as u64)) * 255.0;
        let err = (est - sigma).abs() / sigma;
        ok &= err <= 0.15;
        notes.push(format!(
            "noise {sigma}: {est:.2} ({:+.1}%)",
            100.0 * (est - sigma) / sigma
        ));
    }
    let tex = random_texture(96, 96, 1);
    let blur: Vec<f64> = [0.0, 1.0, 2.0, 4.0]
        .iter()
        .map(|&r| blur_score(&to_plane(&gaussian_blur(&tex, 96, 96, r), 96, 96)))
        .collect();
    let decreasing = blur.windows(2).all(|w| w[1] < w[0]);
    ok &= decreasing;
    notes.push(format!(
        "blur r=0,1,2,4: {:?}",
        blur.iter().map(|b| format!("{b:.4}")).collect::<Vec<_>>()
    ));
    let (blocked, smooth) = blocked_pair(3);
    let (b1, b2) = (blockiness(&blocked), blockiness(&smooth));
    ok &= b1 > b2;
    notes.push(format!("blockiness {b1:.4} > {b2:.4}"));
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut gray_ok = true;
    for _ in 0..20 {
        let (w, h) = (rng.random_range(16..64), rng.random_range(16..64));
        let f = Frame::from_fn(w, h, 0, |_, _| {
            let g: u8 = rng.random();
            [g, g, g]
        })
        .unwrap();
        gray_ok &= colorfulness(&f) == 0.0;
    }
    ok &= gray_ok;
    notes.push(format!("gray colorfulness == 0 on 20 images: {gray_ok}"));
    Check::new(ok, notes.join("; "))
}

// ---------------------------------------------------------- correlation

/// O(n^2) average ranks.
pub fn brute_ranks(v: &[f64]) -> Vec<f64> {
    v.iter()
        .map(|&x| {
            let less = v.iter().filter(|&&y| y < x).count() as f64;
            let equal = v.iter().filter(|&&y| y == x).count() as f64;
            less + (equal + 1.0) / 2.0
        })
        .collect()
}

/// Pearson from raw sums.
pub fn brute_pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (sx, sy): (f64, f64) = (x.iter().sum(), y.iter().sum());
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let sxx: f64 = x.iter().map(|a| a * a).sum();
    let syy: f64 = y.iter().map(|b| b * b).sum();
    (n * sxy - sx * sy) / ((n * sxx - sx * sx).sqrt() * (n * syy - sy * sy).sqrt())
}

fn random_vector(rng: &mut ChaCha8Rng, n: usize, ties: bool) -> Vec<f64> {
    (0..n)
        .map(|_| {
            if ties {
                rng.random_range(0..6) as f64
            } else {
                rng.random::<f64>()
            }
        })
        .collect()
}

pub fn check_correlation() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let (mut worst_s, mut worst_p) = (0.0f64, 0.0f64);
    let mut cases = 0;
    while cases < 1000 {
        let n = rng.random_range(3..80);
        let ties = cases % 2 == 1;
        let x = random_vector(&mut rng, n, ties);
        let y = random_vector(&mut rng, n, ties);
        let (Ok(s), Ok(p)) = (srcc(&x, &y), pearson(&x, &y)) else {
            continue; // constant draw
        };
        worst_s = worst_s.max((s - brute_pearson(&brute_ranks(&x), &brute_ranks(&y))).abs());
        worst_p = worst_p.max((p - brute_pearson(&x, &y)).abs());
        cases += 1;
    }
    let beta = [5.0, 1.0, 0.0, 1.0];
    let q: Vec<f64> = (0..41).map(|i| -4.0 + 0.2 * i as f64).collect();
    let mos: Vec<f64> = q.iter().map(|&v| logistic4(v, &beta)).collect();
    let fit = fit_logistic(&q, &mos).unwrap();
    let beta_err = fit
        .beta
        .iter()
        .zip(beta)
        .map(|(g, w)| (g - w).abs() / w.abs().max(1.0))
        .fold(0.0, f64::max);
    let ok = worst_s < 1e-10 && worst_p < 1e-10 && beta_err < 1e-3;
    Check::new(
        ok,
        format!(
            "1000 vectors: max |dSRCC| {worst_s:.1e}, max |dPLCC| {worst_p:.1e} (tol 1e-10); 4PL beta {:?} rel err {beta_err:.1e} (tol 1e-3), residual {:.1e}",
            fit.beta, fit.residual
        ),
    )
}

// ---------------------------------------------------------------- study

pub fn rec(s: &str, v: &str, r: f64) -> RatingRecord {
    RatingRecord {
        subject_id: s.into(),
        video_id: v.into(),
        rating: r,
        timestamp: "2024-03-01T10:00:00Z".into(),
    }
}

/// Three subjects, three videos; every subject has mean and std that make
/// the z-scores integers.
pub fn three_subject_fixture() -> Vec<RatingRecord> {
    let table = [
        ("s1", [1.0, 2.0, 3.0]),
        ("s2", [2.0, 3.0, 4.0]),
        ("s3", [2.0, 4.0, 3.0]),
    ];
    table
        .iter()
        .flat_map(|(s, rs)| ["a", "b", "c"].iter().zip(rs).map(move |(v, &r)| rec(s, v, r)))
        .collect()
}

/// 20 honest raters split between 1.0 and 2.8 on even videos (mirrored as
/// `6 - x` on odd videos) and one rater who gives 5 on even and 1 on odd.
pub fn adversarial_fixture() -> Vec<RatingRecord> {
    let mut out = Vec::new();
    for v in 0..40 {
        let even = v % 2 == 0;
        let vid = format!("v{v:02}");
        for s in 0..20 {
            let r = if s < 10 { 1.0 } else { 2.8 };
            let r = if even { r } else { ((6.0 - r) * 10.0f64).round() / 10.0 };
            out.push(rec(&format!("h{s:02}"), &vid, r));
        }
        out.push(rec("adv", &vid, if even { 5.0 } else { 1.0 }));
    }
    out
}

pub fn check_subjective() -> Check {
    let mut notes = Vec::new();
    let mut ok = true;

    let recs = three_subject_fixture();
    let z = compute_zscores(&SubjectTable::from_records(&recs).unwrap()).unwrap();
    let z_want = [[-1.0, 0.0, 1.0], [-1.0, 0.0, 1.0], [-1.0, 1.0, 0.0]];
    let z_ok = z
        .cells
        .iter()
        .zip(z_want)
        .all(|(row, want)| row.iter().zip(want).all(|(g, w)| g.unwrap() == w));
    let zp = rescale_zscores(&z);
    let rescale = |v: f64| (v + 3.0) * 4.0 / 6.0 + 1.0;
    let zp_ok = zp.cells.iter().zip(z_want).all(|(row, want)| {
        row.iter()
            .zip(want)
            .all(|(g, w)| (g.unwrap() - rescale(w)).abs() < 1e-12)
    });
    let report = run_study(&recs, StudyConfig::default()).unwrap();
    let m = report.mos.to_map();
    let mos_ok = (m["a"] - 7.0 / 3.0).abs() < 1e-12
        && (m["b"] - 29.0 / 9.0).abs() < 1e-12
        && (m["c"] - 31.0 / 9.0).abs() < 1e-12;
    ok &= z_ok && zp_ok && mos_ok;
    notes.push(format!("fixture z {z_ok}, z' {zp_ok}, MOS {mos_ok}"));

    let adv = run_study(&adversarial_fixture(), StudyConfig::default()).unwrap();
    let adv_ok = adv.rejected_subjects == ["adv"];
    ok &= adv_ok;
    notes.push(format!("adversarial rejected: {:?}", adv.rejected_subjects));

    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut in_range = true;
    for _ in 0..20 {
        let subjects = rng.random_range(3..12);
        let videos = rng.random_range(3..20);
        let mut recs = Vec::new();
        for s in 0..subjects {
            for v in 0..videos {
                let r = rng.random_range(10..=50) as f64 / 10.0;
                recs.push(rec(&format!("s{s}"), &format!("v{v}"), r));
            }
        }
        match run_study(&recs, StudyConfig::default()) {
            Ok(rep) => in_range &= rep.mos.rows.iter().all(|r| (1.0..=5.0).contains(&r.mos)),
            Err(e) => {
                in_range = false;
                notes.push(format!("random study failed: {e}"));
            }
        }
    }
    ok &= in_range;
    notes.push(format!("MOS in [1,5] on 20 random studies: {in_range}"));

    let full = full_study_records(3762, 44, 5);
    let mut csv = Vec::new();
    write_ratings_csv(&full, &mut csv).unwrap();
    let back = read_ratings_csv(csv.as_slice()).unwrap();
    let rep = run_study(&back, StudyConfig::default()).unwrap();
    let full_ok = back.len() == 165_528 && rep.ratings == 165_528 && rep.mos.rows.len() == 3762;
    ok &= full_ok;
    notes.push(format!(
        "full study: {} rows read, {} ratings used, {} MOS rows",
        back.len(),
        rep.ratings,
        rep.mos.rows.len()
    ));
    Check::new(ok, notes.join("; "))
}

/// Every subject rates every video: a latent quality per video plus a
/// per-subject bias and noise, quantized to 0.1.
pub fn full_study_records(videos: usize, subjects: usize, seed: u64) -> Vec<RatingRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let quality: Vec<f64> = (0..videos).map(|_| rng.random_range(1.5..4.5)).collect();
    let mut out = Vec::with_capacity(videos * subjects);
    for s in 0..subjects {
        let bias = rng.random_range(-0.4..0.4);
        for (v, q) in quality.iter().enumerate() {
            let r = (q + bias + rng.random_range(-0.5..0.5)).clamp(1.0, 5.0);
            out.push(rec(
                &format!("subj{s:02}"),
                &format!("vid{v:04}"),
                (r * 10.0).round() / 10.0,
            ));
        }
    }
    out
}

// ------------------------------------------------------------- protocol

pub fn study_manifest(groups: usize) -> Manifest {
    let mut m = Manifest::new(".");
    for g in 0..groups {
        for &crf in &STUDY_CRFS {
            let mut e = ManifestEntry::new(8, 8);
            e.source_group = Some(format!("src{g:03}"));
            e.crf = Some(crf);
            m.entries.insert(format!("src{g:03}_crf{crf:02}"), e);
        }
    }
    m
}

pub fn check_protocol_arithmetic() -> Check {
    let m = study_manifest(418);
    let total = m.entries.len();
    for seed in 0..100u64 {
        let s = split_dataset(&m, 0.8, seed, true).unwrap();
        if (s.train.len(), s.test.len()) != (3006, 756) {
            return Check::new(false, format!("seed {seed}: {}/{}", s.train.len(), s.test.len()));
        }
        let test_groups: std::collections::HashSet<&str> = s.test.iter().map(|id| m.group_of(id)).collect();
        if s.train.iter().any(|id| test_groups.contains(m.group_of(id))) {
            return Check::new(false, format!("seed {seed}: a group straddles the split"));
        }
        if test_groups.len() != 84 {
            return Check::new(false, format!("seed {seed}: {} test groups", test_groups.len()));
        }
    }
    Check::new(
        true,
        format!("{total} videos, 418 groups: 3006/756 on 100 seeds, no straddling"),
    )
}

// ---------------------------------------------------------- round trips

pub fn special_f32() -> Vec<f32> {
    vec![
        0.0,
        -0.0,
        f32::from_bits(1),
        -f32::from_bits(1),
        f32::MIN_POSITIVE / 3.0,
        f32::MIN_POSITIVE,
        f32::MAX,
        f32::MIN,
        1.0,
        -1.5e-30,
        std::f32::consts::PI,
    ]
}

pub fn check_round_trips() -> Check {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut data = special_f32();
    while !data.len().is_multiple_of(7) || data.len() < 16 * 7 {
        data.push(f32::from_bits(rng.random::<u32>() & 0x7F7F_FFFF) * if rng.random() { 1.0 } else { -1.0 });
    }
    let path = dir.path().join("x.feat");
    write_feature_file(&path, FeatureKind::Distortion, data.len() / 7, 7, &data).unwrap();
    let back = read_feature_file(&path).unwrap();
    let bits = |v: &[f32]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    let feat_ok = bits(&back.data) == bits(&data) && back.count == data.len() / 7 && back.dim == 7;

    let mut p = ModelParams::init(tiny_dims(), 3).unwrap();
    p.quantize_f32();
    let specials = special_f32();
    for (t, slot) in p.tensors_mut().into_iter().enumerate() {
        for (i, v) in slot.iter_mut().enumerate().take(specials.len()) {
            *v = specials[(t + i) % specials.len()] as f64;
        }
    }
    let mpath = dir.path().join("m.bin");
    save_model(&p, &mpath).unwrap();
    let q = load_model(&mpath).unwrap();
    let model_ok = q.dims == p.dims
        && q.tensors()
            .iter()
            .zip(p.tensors())
            .all(|(a, b)| a.iter().map(|v| v.to_bits()).eq(b.iter().map(|v| v.to_bits())));
    Check::new(
        feat_ok && model_ok,
        format!(
            "feature file ({} values) bit-exact: {feat_ok}; model file ({} params) bit-exact: {model_ok}",
            data.len(),
            p.parameter_count()
        ),
    )
}

// ------------------------------------------------------------ end to end

pub fn check_synthetic_end_to_end() -> Check {
    let start = Instant::now();
    let cfg = SyntheticConfig::default();
    let videos = synthetic_dataset(&cfg).unwrap();
    let manifest = synthetic_manifest(&videos, &cfg);
    let pcfg = ProtocolConfig {
        n_splits: 1,
        ..ProtocolConfig::default()
    };
    let report = run_protocol(&manifest, &videos, &pcfg).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let r = &report.splits[0];
    Check::new(
        r.srcc > 0.95 && r.plcc > 0.95 && secs < 120.0,
        format!(
            "{} videos ({} train / {} test), {} epochs at lr {}: SRCC {:.4}, PLCC {:.4} (need > 0.95), {secs:.1}s (limit 120s)",
            videos.len(),
            r.n_train,
            r.n_test,
            pcfg.train.max_epochs,
            pcfg.train.learning_rate,
            r.srcc,
            r.plcc
        ),
    )
}
