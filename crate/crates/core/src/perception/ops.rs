//! Inference kernels. Convolutions are cross-correlations with stride 1.

use serde::{Deserialize, Serialize};

use super::{PerceptionError, Tensor};

pub const BN_EPSILON: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Padding {
    /// Zero padding that keeps the spatial size (odd kernels).
    Same,
    Valid,
}

fn shape_err(msg: String) -> PerceptionError {
    PerceptionError::Shape(msg)
}

/// Per-channel batch-norm parameters and running statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNorm {
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
}

impl BatchNorm {
    pub fn identity(channels: usize) -> Self {
        Self {
            gamma: vec![1.0; channels],
            beta: vec![0.0; channels],
            mean: vec![0.0; channels],
            variance: vec![1.0; channels],
        }
    }

    pub fn channels(&self) -> usize {
        self.gamma.len()
    }

    fn validate(&self) -> Result<(), PerceptionError> {
        let c = self.gamma.len();
        if self.beta.len() != c || self.mean.len() != c || self.variance.len() != c {
            return Err(shape_err("batch-norm parameter lengths differ".into()));
        }
        if self.variance.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(shape_err("batch-norm variance must be non-negative".into()));
        }
        Ok(())
    }
}

/// `gamma * (x - mean) / sqrt(variance + eps) + beta`, per channel.
pub fn batchnorm_infer(x: &Tensor, bn: &BatchNorm, eps: f64) -> Result<Tensor, PerceptionError> {
    bn.validate()?;
    if bn.channels() != x.channels() {
        return Err(shape_err(format!(
            "batch-norm over {} channels applied to {}",
            bn.channels(),
            x.channels()
        )));
    }
    let scale: Vec<f64> = (0..bn.channels())
        .map(|c| bn.gamma[c] / (bn.variance[c] + eps).sqrt())
        .collect();
    Ok(Tensor::from_fn(x.height(), x.width(), x.channels(), |y, xx, c| {
        scale[c] * (x.get(y, xx, c) - bn.mean[c]) + bn.beta[c]
    }))
}

/// Full convolution kernel, `weights[((ky * k + kx) * c_in + ci) * c_out + co]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvKernel {
    pub size: usize,
    pub c_in: usize,
    pub c_out: usize,
    pub weights: Vec<f64>,
}

/// One spatial filter per channel, `weights[(ky * k + kx) * channels + c]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthwiseKernel {
    pub size: usize,
    pub channels: usize,
    pub weights: Vec<f64>,
}

/// 1x1 cross-channel mixing, `weights[ci * c_out + co]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PointwiseKernel {
    pub c_in: usize,
    pub c_out: usize,
    pub weights: Vec<f64>,
}

impl ConvKernel {
    pub fn param_count(&self) -> usize {
        self.weights.len()
    }

    fn validate(&self) -> Result<(), PerceptionError> {
        if self.weights.len() != self.size * self.size * self.c_in * self.c_out {
            return Err(shape_err(format!(
                "conv kernel holds {} weights, shape needs {}",
                self.weights.len(),
                self.size * self.size * self.c_in * self.c_out
            )));
        }
        Ok(())
    }
}

impl DepthwiseKernel {
    pub fn param_count(&self) -> usize {
        self.weights.len()
    }

    fn validate(&self) -> Result<(), PerceptionError> {
        if self.weights.len() != self.size * self.size * self.channels {
            return Err(shape_err(format!(
                "depthwise kernel holds {} weights, shape needs {}",
                self.weights.len(),
                self.size * self.size * self.channels
            )));
        }
        Ok(())
    }
}

impl PointwiseKernel {
    pub fn identity(channels: usize) -> Self {
        let mut weights = vec![0.0; channels * channels];
        for c in 0..channels {
            weights[c * channels + c] = 1.0;
        }
        Self {
            c_in: channels,
            c_out: channels,
            weights,
        }
    }

    pub fn param_count(&self) -> usize {
        self.weights.len()
    }

    fn validate(&self) -> Result<(), PerceptionError> {
        if self.weights.len() != self.c_in * self.c_out {
            return Err(shape_err(format!(
                "pointwise kernel holds {} weights, shape needs {}",
                self.weights.len(),
                self.c_in * self.c_out
            )));
        }
        Ok(())
    }
}

fn out_geometry(
    input: &Tensor,
    size: usize,
    padding: Padding,
) -> Result<(usize, usize, isize), PerceptionError> {
    if size == 0 {
        return Err(shape_err("kernel size 0".into()));
    }
    match padding {
        Padding::Same => {
            if size.is_multiple_of(2) {
                return Err(shape_err("same padding needs an odd kernel".into()));
            }
            Ok((input.height(), input.width(), (size / 2) as isize))
        }
        Padding::Valid => {
            if input.height() < size || input.width() < size {
                return Err(shape_err(format!(
                    "{}x{} input smaller than {size}x{size} kernel",
                    input.height(),
                    input.width()
                )));
            }
            Ok((input.height() - size + 1, input.width() - size + 1, 0))
        }
    }
}

/// Standard convolution over all input channels.
pub fn conv2d(
    input: &Tensor,
    kernel: &ConvKernel,
    padding: Padding,
) -> Result<Tensor, PerceptionError> {
    kernel.validate()?;
    if kernel.c_in != input.channels() {
        return Err(shape_err(format!(
            "conv expects {} input channels, got {}",
            kernel.c_in,
            input.channels()
        )));
    }
    let (oh, ow, pad) = out_geometry(input, kernel.size, padding)?;
    let (k, cin, cout) = (kernel.size, kernel.c_in, kernel.c_out);
    let mut out = Tensor::zeros(oh, ow, cout);
    let mut acc = vec![0.0; cout];
    for y in 0..oh {
        for x in 0..ow {
            acc.iter_mut().for_each(|a| *a = 0.0);
            for ky in 0..k {
                let iy = y as isize + ky as isize - pad;
                if iy < 0 || iy >= input.height() as isize {
                    continue;
                }
                for kx in 0..k {
                    let ix = x as isize + kx as isize - pad;
                    if ix < 0 || ix >= input.width() as isize {
                        continue;
                    }
                    let px = input.pixel(iy as usize, ix as usize);
                    let base = (ky * k + kx) * cin;
                    for (ci, &v) in px.iter().enumerate() {
                        let row = &kernel.weights[(base + ci) * cout..(base + ci + 1) * cout];
                        for (a, w) in acc.iter_mut().zip(row) {
                            *a += v * w;
                        }
                    }
                }
            }
            for (co, a) in acc.iter().enumerate() {
                out.set(y, x, co, *a);
            }
        }
    }
    Ok(out)
}

/// Spatial filtering of each channel on its own.
pub fn depthwise_conv(
    input: &Tensor,
    kernel: &DepthwiseKernel,
    padding: Padding,
) -> Result<Tensor, PerceptionError> {
    kernel.validate()?;
    if kernel.channels != input.channels() {
        return Err(shape_err(format!(
            "depthwise kernel has {} channels, input {}",
            kernel.channels,
            input.channels()
        )));
    }
    let (oh, ow, pad) = out_geometry(input, kernel.size, padding)?;
    let (k, ch) = (kernel.size, kernel.channels);
    let mut out = Tensor::zeros(oh, ow, ch);
    for y in 0..oh {
        for x in 0..ow {
            for c in 0..ch {
                let mut acc = 0.0;
                for ky in 0..k {
                    let iy = y as isize + ky as isize - pad;
                    if iy < 0 || iy >= input.height() as isize {
                        continue;
                    }
                    for kx in 0..k {
                        let ix = x as isize + kx as isize - pad;
                        if ix < 0 || ix >= input.width() as isize {
                            continue;
                        }
                        acc += input.get(iy as usize, ix as usize, c)
                            * kernel.weights[(ky * k + kx) * ch + c];
                    }
                }
                out.set(y, x, c, acc);
            }
        }
    }
    Ok(out)
}

pub fn pointwise_conv(input: &Tensor, kernel: &PointwiseKernel) -> Result<Tensor, PerceptionError> {
    kernel.validate()?;
    if kernel.c_in != input.channels() {
        return Err(shape_err(format!(
            "pointwise kernel expects {} channels, input {}",
            kernel.c_in,
            input.channels()
        )));
    }
    let cout = kernel.c_out;
    let mut out = Tensor::zeros(input.height(), input.width(), cout);
    for y in 0..input.height() {
        for x in 0..input.width() {
            let px = input.pixel(y, x);
            for co in 0..cout {
                let mut acc = 0.0;
                for (ci, v) in px.iter().enumerate() {
                    acc += v * kernel.weights[ci * cout + co];
                }
                out.set(y, x, co, acc);
            }
        }
    }
    Ok(out)
}

/// Depthwise spatial filtering followed by pointwise channel mixing.
pub fn depthwise_separable_conv(
    input: &Tensor,
    depthwise: &DepthwiseKernel,
    pointwise: &PointwiseKernel,
    padding: Padding,
) -> Result<Tensor, PerceptionError> {
    if depthwise.channels != pointwise.c_in {
        return Err(shape_err(format!(
            "depthwise yields {} channels, pointwise expects {}",
            depthwise.channels, pointwise.c_in
        )));
    }
    pointwise_conv(&depthwise_conv(input, depthwise, padding)?, pointwise)
}

pub fn separable_param_count(k: usize, c_in: usize, c_out: usize) -> usize {
    k * k * c_in + c_in * c_out
}

pub fn full_conv_param_count(k: usize, c_in: usize, c_out: usize) -> usize {
    k * k * c_in * c_out
}

/// `H(x) = F(x) + x`, with an optional 1x1 projection on the shortcut.
pub fn residual_apply<F>(
    x: &Tensor,
    inner: F,
    projection: Option<&PointwiseKernel>,
) -> Result<Tensor, PerceptionError>
where
    F: FnOnce(&Tensor) -> Result<Tensor, PerceptionError>,
{
    let fx = inner(x)?;
    match projection {
        Some(p) => fx.add(&pointwise_conv(x, p)?),
        None => fx.add(x).map_err(|_| {
            shape_err(format!(
                "residual branch yields {:?} for input {:?} and no projection is configured",
                fx.shape(),
                x.shape()
            ))
        }),
    }
}

pub fn relu(x: &Tensor) -> Tensor {
    x.map(|v| v.max(0.0))
}

/// 2x2 max pooling with stride 2; odd trailing rows/columns are dropped.
pub fn max_pool2(x: &Tensor) -> Tensor {
    let (h, w, c) = (x.height() / 2, x.width() / 2, x.channels());
    Tensor::from_fn(h, w, c, |y, xx, ch| {
        let (y0, x0) = (2 * y, 2 * xx);
        x.get(y0, x0, ch)
            .max(x.get(y0, x0 + 1, ch))
            .max(x.get(y0 + 1, x0, ch))
            .max(x.get(y0 + 1, x0 + 1, ch))
    })
}

pub fn global_avg_pool(x: &Tensor) -> Vec<f64> {
    let n = (x.height() * x.width()) as f64;
    let mut out = vec![0.0; x.channels()];
    for y in 0..x.height() {
        for xx in 0..x.width() {
            for (o, v) in out.iter_mut().zip(x.pixel(y, xx)) {
                *o += v;
            }
        }
    }
    out.iter_mut().for_each(|o| *o /= n);
    out
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.iter().map(|e| e / total).collect()
}
