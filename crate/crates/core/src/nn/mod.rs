//! From-scratch convolutional classifier over 10x10x4 field tensors:
//! forward pass, analytic backpropagation, Adam training loop, evaluation,
//! and canonical binary checkpoints.

mod adam;
mod checkpoint;
mod layers;
mod model;
mod train;

pub use adam::{Adam, AdamConfig};
pub use checkpoint::{read_checkpoint, read_checkpoint_from, write_checkpoint, write_checkpoint_to, Checkpoint, TrainMeta};
pub use model::{Arch, LayerStack, Prediction};
pub use train::{
    encode_dataset, evaluate, train, write_metrics_log, ClassMetrics, EncodedDataset, EpochMetrics,
    EvalReport, TrainConfig, TrainOutcome,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("shape mismatch: expected {expected:?}, got {actual:?}")]
    ShapeMismatch { expected: (usize, usize, usize), actual: (usize, usize, usize) },
    #[error("tensor data length {len} does not match shape {shape:?}")]
    BadDataLength { shape: (usize, usize, usize), len: usize },
    #[error("tensor contains a non-finite value at flat index {index}")]
    NonFinite { index: usize },
    #[error("batch is empty")]
    EmptyBatch,
    #[error("batch size mismatch: {inputs} inputs vs {labels} labels")]
    BatchMismatch { inputs: usize, labels: usize },
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: u8, classes: usize },
    #[error("non-finite loss on a batch of {batch_size} (first label {first_label})")]
    NonFiniteLoss { batch_size: usize, first_label: u8 },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("parameter vector length {got}, model has {expected}")]
    BadParamLength { got: usize, expected: usize },
    #[error("encode: {0}")]
    Gasf(#[from] crate::gasf::GasfError),
    #[error("checkpoint io: {0}")]
    Io(#[from] std::io::Error),
    #[error("checkpoint file: {0}")]
    BadCheckpoint(String),
}

/// A dense (height, width, channels) row-major value tensor, the model's
/// input type.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    shape: (usize, usize, usize),
    data: Vec<f64>,
}

impl Tensor3 {
    pub fn new(shape: (usize, usize, usize), data: Vec<f64>) -> Result<Self, NnError> {
        if data.len() != shape.0 * shape.1 * shape.2 {
            return Err(NnError::BadDataLength { shape, len: data.len() });
        }
        if let Some(index) = data.iter().position(|v| !v.is_finite()) {
            return Err(NnError::NonFinite { index });
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: (usize, usize, usize)) -> Self {
        Self { shape, data: vec![0.0; shape.0 * shape.1 * shape.2] }
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, i: usize, j: usize, c: usize) -> f64 {
        self.data[(i * self.shape.1 + j) * self.shape.2 + c]
    }
}

impl crate::gasf::GasfTensor {
    /// View the tensor as model input: (row, column, channel) with channels
    /// in open/high/low/close order.
    pub fn to_tensor3(&self) -> Tensor3 {
        use crate::market::{Channel, CHANNEL_COUNT, WINDOW_LEN};
        let mut data = vec![0.0; WINDOW_LEN * WINDOW_LEN * CHANNEL_COUNT];
        for channel in Channel::ALL {
            let m = self.channel(channel);
            for i in 0..WINDOW_LEN {
                for j in 0..WINDOW_LEN {
                    data[(i * WINDOW_LEN + j) * CHANNEL_COUNT + channel.index()] = m[i][j];
                }
            }
        }
        Tensor3 { shape: (WINDOW_LEN, WINDOW_LEN, CHANNEL_COUNT), data }
    }
}
