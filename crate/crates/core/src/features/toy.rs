//! Small deterministic convolutional backbones standing in for pretrained
//! networks. Layers carry no bias, so the maps are positively homogeneous
//! in the input and an all-zero input yields all-zero features.

use super::{ClipKey, FeatureError, FrameKey, MotionProvider, SemanticProvider};
use crate::media::{Clip, Frame};
use crate::rng::XorShift64;

/// Output channels of the four semantic stages.
pub const SEMANTIC_STAGE_CHANNELS: [usize; 4] = [8, 16, 24, 32];
/// Width of the toy motion vector.
pub const MOTION_CHANNELS: usize = 32;
/// Spatial average-pooling applied before temporal differencing (2^2 = 4x).
const MOTION_PREPOOL: usize = 2;

/// Channel-major feature map.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub data: Vec<f64>,
}

impl Tensor3 {
    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Self {
            channels,
            height,
            width,
            data: vec![0.0; channels * height * width],
        }
    }

    /// RGB scaled to `[0, 1]`.
    pub fn from_frame(frame: &Frame) -> Self {
        let (w, h) = (frame.width(), frame.height());
        let mut t = Self::zeros(3, h, w);
        for (i, p) in frame.rgb().chunks_exact(3).enumerate() {
            for (c, &v) in p.iter().enumerate() {
                t.data[c * w * h + i] = v as f64 / 255.0;
            }
        }
        t
    }

    #[inline]
    fn at(&self, c: usize, y: usize, x: usize) -> f64 {
        self.data[(c * self.height + y) * self.width + x]
    }

    /// Per-channel spatial mean.
    pub fn global_average(&self) -> Vec<f64> {
        let n = (self.height * self.width) as f64;
        self.data
            .chunks_exact(self.height * self.width)
            .map(|ch| ch.iter().sum::<f64>() / n)
            .collect()
    }

    /// 2x2 average pooling; edge windows of odd-sized maps average only the
    /// pixels they cover, giving `ceil(h/2) x ceil(w/2)`.
    pub fn avg_pool2(&self) -> Self {
        let (oh, ow) = (self.height.div_ceil(2), self.width.div_ceil(2));
        let mut out = Self::zeros(self.channels, oh, ow);
        for c in 0..self.channels {
            for y in 0..oh {
                for x in 0..ow {
                    let mut sum = 0.0;
                    let mut n = 0;
                    for yy in 2 * y..(2 * y + 2).min(self.height) {
                        for xx in 2 * x..(2 * x + 2).min(self.width) {
                            sum += self.at(c, yy, xx);
                            n += 1;
                        }
                    }
                    out.data[(c * oh + y) * ow + x] = sum / n as f64;
                }
            }
        }
        out
    }
}

/// Bias-free 3x3 convolution with replicated borders, followed by ReLU.
#[derive(Debug, Clone)]
struct ConvRelu {
    in_c: usize,
    out_c: usize,
    /// `[out][in][ky][kx]`
    weights: Vec<f64>,
}

impl ConvRelu {
    /// Weights uniform in `[-1, 1)` divided by the fan-in, drawn in
    /// `[out][in][ky][kx]` order.
    fn seeded(in_c: usize, out_c: usize, rng: &mut XorShift64) -> Self {
        let fan_in = (in_c * 9) as f64;
        let weights = (0..out_c * in_c * 9).map(|_| rng.uniform(-1.0, 1.0) / fan_in).collect();
        Self { in_c, out_c, weights }
    }

    fn apply(&self, input: &Tensor3) -> Tensor3 {
        assert_eq!(input.channels, self.in_c);
        let (h, w) = (input.height, input.width);
        let mut out = Tensor3::zeros(self.out_c, h, w);
        let clampi = |v: isize, hi: usize| v.clamp(0, hi as isize - 1) as usize;
        for y in 0..h {
            let rows = [clampi(y as isize - 1, h), y, clampi(y as isize + 1, h)];
            for x in 0..w {
                let cols = [clampi(x as isize - 1, w), x, clampi(x as isize + 1, w)];
                let mut patch = [0.0f64; 9];
                for ic in 0..self.in_c {
                    for (ky, &yy) in rows.iter().enumerate() {
                        for (kx, &xx) in cols.iter().enumerate() {
                            patch[ky * 3 + kx] = input.at(ic, yy, xx);
                        }
                    }
                    for oc in 0..self.out_c {
                        let k = &self.weights[(oc * self.in_c + ic) * 9..][..9];
                        let acc: f64 = k.iter().zip(&patch).map(|(a, b)| a * b).sum();
                        out.data[(oc * h + y) * w + x] += acc;
                    }
                }
            }
        }
        for v in &mut out.data {
            *v = v.max(0.0);
        }
        out
    }
}

/// Four conv-ReLU-pool stages with 8/16/24/32 channels; the semantic
/// vector concatenates the global average of each stage output (80 values).
#[derive(Debug, Clone)]
pub struct ToySemanticBackbone {
    stages: Vec<ConvRelu>,
}

impl ToySemanticBackbone {
    pub fn new(seed: u64) -> Self {
        let mut in_c = 3;
        let stages = SEMANTIC_STAGE_CHANNELS
            .iter()
            .enumerate()
            .map(|(i, &out_c)| {
                let mut rng = XorShift64::derived(seed, i as u64);
                let stage = ConvRelu::seeded(in_c, out_c, &mut rng);
                in_c = out_c;
                stage
            })
            .collect();
        Self { stages }
    }

    /// Stage outputs after pooling, before global averaging.
    pub fn stage_maps(&self, input: &Tensor3) -> Vec<Tensor3> {
        let mut maps = Vec::with_capacity(self.stages.len());
        let mut x = input.clone();
        for stage in &self.stages {
            x = stage.apply(&x).avg_pool2();
            maps.push(x.clone());
        }
        maps
    }

    pub fn forward(&self, input: &Tensor3) -> Vec<f64> {
        self.stage_maps(input)
            .iter()
            .flat_map(Tensor3::global_average)
            .collect()
    }
}

impl SemanticProvider for ToySemanticBackbone {
    fn dim(&self) -> usize {
        SEMANTIC_STAGE_CHANNELS.iter().sum()
    }

    fn semantic_features(&self, _key: FrameKey<'_>, frame: &Frame) -> Result<Vec<f64>, FeatureError> {
        Ok(self.forward(&Tensor3::from_frame(frame)))
    }
}

/// Temporal difference of consecutive (4x pooled) frames, one conv-ReLU
/// layer to 32 channels, global average, then mean over frame pairs.
#[derive(Debug, Clone)]
pub struct ToyMotionBackbone {
    conv: ConvRelu,
}

impl ToyMotionBackbone {
    pub fn new(seed: u64) -> Self {
        let mut rng = XorShift64::derived(seed, 0x4D4F_5449_4F4E);
        Self {
            conv: ConvRelu::seeded(3, MOTION_CHANNELS, &mut rng),
        }
    }

    pub fn forward(&self, frames: &[Frame]) -> Vec<f64> {
        let pooled: Vec<Tensor3> = frames
            .iter()
            .map(|f| (0..MOTION_PREPOOL).fold(Tensor3::from_frame(f), |t, _| t.avg_pool2()))
            .collect();
        let mut acc = vec![0.0; MOTION_CHANNELS];
        if pooled.len() < 2 {
            return acc;
        }
        for pair in pooled.windows(2) {
            let mut diff = pair[1].clone();
            for (d, p) in diff.data.iter_mut().zip(&pair[0].data) {
                *d -= p;
            }
            for (a, v) in acc.iter_mut().zip(self.conv.apply(&diff).global_average()) {
                *a += v;
            }
        }
        let pairs = (pooled.len() - 1) as f64;
        acc.iter_mut().for_each(|a| *a /= pairs);
        acc
    }
}

impl MotionProvider for ToyMotionBackbone {
    fn dim(&self) -> usize {
        MOTION_CHANNELS
    }

    fn motion_features(&self, _key: ClipKey<'_>, clip: &Clip<'_>) -> Result<Vec<f64>, FeatureError> {
        Ok(self.forward(clip.frames))
    }
}
