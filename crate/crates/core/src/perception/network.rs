use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::ops::{
    batchnorm_infer, conv2d, depthwise_separable_conv, global_avg_pool, max_pool2, relu,
    residual_apply, softmax, BatchNorm, ConvKernel, DepthwiseKernel, Padding, PointwiseKernel,
    BN_EPSILON,
};
use super::weights::{Blob, WeightFile};
use super::{PerceptionError, Tensor};
use crate::emotion::{Emotion, EMOTION_COUNT};

/// Side length of the square grayscale input.
pub const IMAGE_SIZE: usize = 48;
/// Output channels of the entry layer and the four residual blocks.
pub const DEFAULT_WIDTHS: [usize; 5] = [8, 8, 16, 32, 64];

const KERNEL: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct EntryLayer {
    pub kernel: ConvKernel,
    pub bn: BatchNorm,
}

/// Depthwise + pointwise + batch-norm + ReLU, added to the (projected) input,
/// then 2x2 max pooling.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualBlock {
    pub depthwise: DepthwiseKernel,
    pub pointwise: PointwiseKernel,
    pub bn: BatchNorm,
    pub projection: Option<PointwiseKernel>,
}

impl ResidualBlock {
    fn c_in(&self) -> usize {
        self.depthwise.channels
    }

    fn c_out(&self) -> usize {
        self.pointwise.c_out
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor, PerceptionError> {
        let h = residual_apply(
            x,
            |t| {
                let y = depthwise_separable_conv(t, &self.depthwise, &self.pointwise, Padding::Same)?;
                Ok(relu(&batchnorm_infer(&y, &self.bn, BN_EPSILON)?))
            },
            self.projection.as_ref(),
        )?;
        Ok(max_pool2(&h))
    }
}

/// Recognizer layer graph with its weights.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSpec {
    pub entry: EntryLayer,
    pub blocks: Vec<ResidualBlock>,
    /// `head[c * 7 + k]` maps pooled channel `c` to class logit `k`.
    pub head: Vec<f64>,
    pub head_bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Classification {
    pub emotion: Emotion,
    pub intensity: f64,
    pub probabilities: [f64; EMOTION_COUNT],
}

fn check_bn(bn: &BatchNorm, channels: usize, name: &str) -> Result<(), PerceptionError> {
    let lens = [bn.gamma.len(), bn.beta.len(), bn.mean.len(), bn.variance.len()];
    if lens.iter().any(|&l| l != channels) {
        return Err(PerceptionError::Shape(format!(
            "{name}: batch-norm parameters must have {channels} entries"
        )));
    }
    if bn.variance.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(PerceptionError::Shape(format!(
            "{name}: batch-norm variance must be positive"
        )));
    }
    Ok(())
}

impl NetworkSpec {
    pub fn widths(&self) -> Vec<usize> {
        let mut w = vec![self.entry.kernel.c_out];
        w.extend(self.blocks.iter().map(ResidualBlock::c_out));
        w
    }

    pub fn validate(&self) -> Result<(), PerceptionError> {
        let k = &self.entry.kernel;
        if k.c_in != 1 || k.size.is_multiple_of(2) {
            return Err(PerceptionError::Shape(
                "entry kernel must be odd-sized over one input channel".into(),
            ));
        }
        if k.weights.len() != k.size * k.size * k.c_out {
            return Err(PerceptionError::Shape("entry kernel weight count".into()));
        }
        check_bn(&self.entry.bn, k.c_out, "entry")?;
        if self.blocks.is_empty() || IMAGE_SIZE >> self.blocks.len() == 0 {
            return Err(PerceptionError::Shape(format!(
                "{} residual blocks do not fit a {IMAGE_SIZE}px input",
                self.blocks.len()
            )));
        }
        let mut channels = k.c_out;
        for (i, b) in self.blocks.iter().enumerate() {
            let name = format!("block{i}");
            if b.c_in() != channels || b.pointwise.c_in != channels {
                return Err(PerceptionError::Shape(format!(
                    "{name} expects {} channels, previous layer yields {channels}",
                    b.c_in()
                )));
            }
            if b.depthwise.size % 2 == 0
                || b.depthwise.weights.len() != b.depthwise.size * b.depthwise.size * channels
                || b.pointwise.weights.len() != b.pointwise.c_in * b.pointwise.c_out
            {
                return Err(PerceptionError::Shape(format!("{name}: kernel weight count")));
            }
            check_bn(&b.bn, b.c_out(), &name)?;
            match &b.projection {
                Some(p) if p.c_in != channels || p.c_out != b.c_out() => {
                    return Err(PerceptionError::Shape(format!(
                        "{name}: projection must map {channels} to {} channels",
                        b.c_out()
                    )));
                }
                None if b.c_out() != channels => {
                    return Err(PerceptionError::Shape(format!(
                        "{name}: changes width {channels} -> {} without a projection",
                        b.c_out()
                    )));
                }
                _ => {}
            }
            channels = b.c_out();
        }
        if self.head.len() != channels * EMOTION_COUNT || self.head_bias.len() != EMOTION_COUNT {
            return Err(PerceptionError::Shape(format!(
                "head must map {channels} channels to {EMOTION_COUNT} classes"
            )));
        }
        Ok(())
    }

    /// Random weights for the given widths (entry width first). Used for
    /// fixtures and benchmarks; the recognizer is never trained here.
    pub fn random(widths: &[usize], seed: u64) -> Result<Self, PerceptionError> {
        if widths.len() < 2 || widths.contains(&0) {
            return Err(PerceptionError::Shape(
                "need an entry width and at least one block width".into(),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut uniform = |n: usize, scale: f64| -> Vec<f64> {
            (0..n).map(|_| (rng.random::<f64>() * 2.0 - 1.0) * scale).collect()
        };
        let bn = |c: usize, u: &mut dyn FnMut(usize, f64) -> Vec<f64>| BatchNorm {
            gamma: u(c, 0.5).into_iter().map(|v| 1.0 + v).collect(),
            beta: u(c, 0.1),
            mean: u(c, 0.1),
            variance: u(c, 0.5).into_iter().map(|v| 1.0 + v).collect(),
        };
        let w0 = widths[0];
        let entry = EntryLayer {
            kernel: ConvKernel {
                size: KERNEL,
                c_in: 1,
                c_out: w0,
                weights: uniform(KERNEL * KERNEL * w0, (6.0 / 9.0f64).sqrt()),
            },
            bn: bn(w0, &mut uniform),
        };
        let mut blocks = Vec::new();
        for pair in widths.windows(2) {
            let (cin, cout) = (pair[0], pair[1]);
            blocks.push(ResidualBlock {
                depthwise: DepthwiseKernel {
                    size: KERNEL,
                    channels: cin,
                    weights: uniform(KERNEL * KERNEL * cin, (6.0 / 9.0f64).sqrt()),
                },
                pointwise: PointwiseKernel {
                    c_in: cin,
                    c_out: cout,
                    weights: uniform(cin * cout, (6.0 / cin as f64).sqrt()),
                },
                bn: bn(cout, &mut uniform),
                projection: (cin != cout).then(|| PointwiseKernel {
                    c_in: cin,
                    c_out: cout,
                    weights: uniform(cin * cout, (3.0 / cin as f64).sqrt()),
                }),
            });
        }
        let last = *widths.last().unwrap();
        let spec = Self {
            entry,
            blocks,
            head: uniform(last * EMOTION_COUNT, (6.0 / last as f64).sqrt()),
            head_bias: uniform(EMOTION_COUNT, 0.1),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_weights(file: &WeightFile) -> Result<Self, PerceptionError> {
        let blob = |name: &str| -> Result<&Blob, PerceptionError> {
            file.get(name)
                .ok_or_else(|| PerceptionError::MissingWeights(name.to_string()))
        };
        let shaped = |name: &str, shape: &[usize]| -> Result<Vec<f64>, PerceptionError> {
            let b = blob(name)?;
            if b.shape != shape {
                return Err(PerceptionError::Shape(format!(
                    "blob `{name}` has shape {:?}, expected {shape:?}",
                    b.shape
                )));
            }
            Ok(b.values.clone())
        };
        let read_bn = |prefix: &str, c: usize| -> Result<BatchNorm, PerceptionError> {
            Ok(BatchNorm {
                gamma: shaped(&format!("{prefix}.bn.gamma"), &[c])?,
                beta: shaped(&format!("{prefix}.bn.beta"), &[c])?,
                mean: shaped(&format!("{prefix}.bn.mean"), &[c])?,
                variance: shaped(&format!("{prefix}.bn.variance"), &[c])?,
            })
        };

        let ek = blob("entry.kernel")?;
        let [size, size2, 1, w0] = ek.shape[..] else {
            return Err(PerceptionError::Shape(format!(
                "blob `entry.kernel` has shape {:?}, expected [k, k, 1, width]",
                ek.shape
            )));
        };
        if size != size2 {
            return Err(PerceptionError::Shape("entry kernel must be square".into()));
        }
        let entry = EntryLayer {
            kernel: ConvKernel {
                size,
                c_in: 1,
                c_out: w0,
                weights: ek.values.clone(),
            },
            bn: read_bn("entry", w0)?,
        };

        let mut blocks = Vec::new();
        let mut channels = w0;
        while file.get(&format!("block{}.depthwise", blocks.len())).is_some() {
            let p = format!("block{}", blocks.len());
            let dw = blob(&format!("{p}.depthwise"))?;
            let [k, k2, c] = dw.shape[..] else {
                return Err(PerceptionError::Shape(format!(
                    "blob `{p}.depthwise` must have shape [k, k, channels]"
                )));
            };
            if k != k2 || c != channels {
                return Err(PerceptionError::Shape(format!(
                    "blob `{p}.depthwise` has shape {:?}, expected [k, k, {channels}]",
                    dw.shape
                )));
            }
            let pw = blob(&format!("{p}.pointwise"))?;
            let [_, cout] = pw.shape[..] else {
                return Err(PerceptionError::Shape(format!(
                    "blob `{p}.pointwise` must have shape [in, out]"
                )));
            };
            let pointwise = PointwiseKernel {
                c_in: channels,
                c_out: cout,
                weights: shaped(&format!("{p}.pointwise"), &[channels, cout])?,
            };
            let proj_name = format!("{p}.projection");
            let projection = if cout != channels || file.get(&proj_name).is_some() {
                Some(PointwiseKernel {
                    c_in: channels,
                    c_out: cout,
                    weights: shaped(&proj_name, &[channels, cout])?,
                })
            } else {
                None
            };
            blocks.push(ResidualBlock {
                depthwise: DepthwiseKernel {
                    size: k,
                    channels,
                    weights: dw.values.clone(),
                },
                pointwise,
                bn: read_bn(&p, cout)?,
                projection,
            });
            channels = cout;
        }
        if blocks.is_empty() {
            return Err(PerceptionError::MissingWeights("block0.depthwise".into()));
        }
        let spec = Self {
            entry,
            blocks,
            head: shaped("head.kernel", &[channels, EMOTION_COUNT])?,
            head_bias: shaped("head.bias", &[EMOTION_COUNT])?,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_weights(&self) -> WeightFile {
        let mut f = WeightFile::default();
        let put_bn = |f: &mut WeightFile, prefix: &str, bn: &BatchNorm| {
            let c = bn.gamma.len();
            f.insert(format!("{prefix}.bn.gamma"), Blob::new(vec![c], bn.gamma.clone()));
            f.insert(format!("{prefix}.bn.beta"), Blob::new(vec![c], bn.beta.clone()));
            f.insert(format!("{prefix}.bn.mean"), Blob::new(vec![c], bn.mean.clone()));
            f.insert(
                format!("{prefix}.bn.variance"),
                Blob::new(vec![c], bn.variance.clone()),
            );
        };
        let k = &self.entry.kernel;
        f.insert(
            "entry.kernel",
            Blob::new(vec![k.size, k.size, 1, k.c_out], k.weights.clone()),
        );
        put_bn(&mut f, "entry", &self.entry.bn);
        for (i, b) in self.blocks.iter().enumerate() {
            let p = format!("block{i}");
            let d = &b.depthwise;
            f.insert(
                format!("{p}.depthwise"),
                Blob::new(vec![d.size, d.size, d.channels], d.weights.clone()),
            );
            f.insert(
                format!("{p}.pointwise"),
                Blob::new(vec![b.pointwise.c_in, b.pointwise.c_out], b.pointwise.weights.clone()),
            );
            if let Some(pr) = &b.projection {
                f.insert(
                    format!("{p}.projection"),
                    Blob::new(vec![pr.c_in, pr.c_out], pr.weights.clone()),
                );
            }
            put_bn(&mut f, &p, &b.bn);
        }
        let last = self.head.len() / EMOTION_COUNT;
        f.insert("head.kernel", Blob::new(vec![last, EMOTION_COUNT], self.head.clone()));
        f.insert("head.bias", Blob::new(vec![EMOTION_COUNT], self.head_bias.clone()));
        f
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self, PerceptionError> {
        Self::from_weights(&WeightFile::load(path)?)
    }

    /// Class logits for a normalized 48x48 grayscale image.
    pub fn logits(&self, image: &Tensor) -> Result<[f64; EMOTION_COUNT], PerceptionError> {
        if image.shape() != (IMAGE_SIZE, IMAGE_SIZE, 1) {
            return Err(PerceptionError::ImageSize {
                expected: IMAGE_SIZE,
                got: image.shape(),
            });
        }
        if image.data().iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(PerceptionError::ImageRange);
        }
        let x = conv2d(image, &self.entry.kernel, Padding::Same)?;
        let mut x = relu(&batchnorm_infer(&x, &self.entry.bn, BN_EPSILON)?);
        for b in &self.blocks {
            x = b.forward(&x)?;
        }
        let pooled = global_avg_pool(&x);
        if pooled.len() * EMOTION_COUNT != self.head.len() {
            return Err(PerceptionError::Shape("head width".into()));
        }
        let mut logits = [0.0; EMOTION_COUNT];
        for (k, l) in logits.iter_mut().enumerate() {
            *l = self.head_bias[k]
                + pooled
                    .iter()
                    .enumerate()
                    .map(|(c, g)| g * self.head[c * EMOTION_COUNT + k])
                    .sum::<f64>();
        }
        Ok(logits)
    }
}

/// Runs the forward pass. The winning softmax score is the intensity; ties
/// go to the earlier label in canonical order.
pub fn classify(image: &Tensor, spec: &NetworkSpec) -> Result<Classification, PerceptionError> {
    let logits = spec.logits(image)?;
    let p = softmax(&logits);
    let mut probabilities = [0.0; EMOTION_COUNT];
    probabilities.copy_from_slice(&p);
    let mut best = 0;
    for (i, v) in probabilities.iter().enumerate() {
        if *v > probabilities[best] {
            best = i;
        }
    }
    Ok(Classification {
        emotion: Emotion::ALL[best],
        intensity: probabilities[best],
        probabilities,
    })
}

/// Reads a plain (P2) PGM image into a single-channel tensor scaled to [0, 1].
pub fn read_pgm(text: &str) -> Result<Tensor, PerceptionError> {
    let bad = |m: &str| PerceptionError::Image(m.to_string());
    let mut tokens = text
        .lines()
        .map(|l| l.split('#').next().unwrap_or(""))
        .flat_map(str::split_whitespace);
    if tokens.next() != Some("P2") {
        return Err(bad("expected plain PGM header `P2`"));
    }
    let mut num = |what: &str| -> Result<usize, PerceptionError> {
        tokens
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| bad(&format!("missing or invalid {what}")))
    };
    let (w, h, max) = (num("width")?, num("height")?, num("maxval")?);
    if max == 0 {
        return Err(bad("maxval must be positive"));
    }
    let mut data = Vec::with_capacity(w * h);
    for _ in 0..w * h {
        let v = num("pixel")?;
        if v > max {
            return Err(bad("pixel exceeds maxval"));
        }
        data.push(v as f64 / max as f64);
    }
    Tensor::new(h, w, 1, data)
}
