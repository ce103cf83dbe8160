//! Inference kernels for the expression recognizer and the confusion-matrix
//! noise channel used when no real images are available.

mod confusion;
mod network;
mod ops;
mod tensor;
mod weights;

use thiserror::Error;

use crate::emotion::MatrixFileError;

pub use confusion::{noisy_recognize, ConfusionMatrix, COLUMN_SUM_TOLERANCE};
pub use network::{
    classify, read_pgm, Classification, EntryLayer, NetworkSpec, ResidualBlock, DEFAULT_WIDTHS,
    IMAGE_SIZE,
};
pub use ops::{
    batchnorm_infer, conv2d, depthwise_conv, depthwise_separable_conv, full_conv_param_count,
    global_avg_pool, max_pool2, pointwise_conv, relu, residual_apply, separable_param_count,
    softmax, BatchNorm, ConvKernel, DepthwiseKernel, Padding, PointwiseKernel, BN_EPSILON,
};
pub use tensor::Tensor;
pub use weights::{read_weights, write_weights, Blob, WeightFile};

#[derive(Debug, Error)]
pub enum PerceptionError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("image must be {expected}x{expected}x1, got {got:?}")]
    ImageSize {
        expected: usize,
        got: (usize, usize, usize),
    },
    #[error("image values must lie in [0, 1]")]
    ImageRange,
    #[error("missing weight blob `{0}`")]
    MissingWeights(String),
    #[error("weight file line {line}: {message}")]
    WeightFile { line: usize, message: String },
    #[error("image file: {0}")]
    Image(String),
    #[error("invalid confusion matrix: {0}")]
    InvalidMatrix(String),
    #[error(transparent)]
    Matrix(#[from] MatrixFileError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}
