//! Mini-batch training with Adam, validation tracking, and evaluation.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::adam::{Adam, AdamConfig};
use super::model::LayerStack;
use super::{NnError, Tensor3};
use crate::gasf::encode_window;
use crate::market::Dataset;

/// Epochs/batching on top of the optimizer settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: AdamConfig,
    /// Seeds batch shuffling (weight init has its own seed at model build).
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { epochs: 30, batch_size: 32, optimizer: AdamConfig::default(), seed: 42 }
    }
}

/// A dataset already encoded to field tensors, ready for the model.
#[derive(Debug, Clone)]
pub struct EncodedDataset {
    pub inputs: Vec<Tensor3>,
    pub labels: Vec<u8>,
}

impl EncodedDataset {
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }
}

/// Encode every window of a dataset (open/high/low/close channel order).
pub fn encode_dataset(dataset: &Dataset) -> Result<EncodedDataset, NnError> {
    let mut inputs = Vec::with_capacity(dataset.len());
    let mut labels = Vec::with_capacity(dataset.len());
    for sample in &dataset.samples {
        inputs.push(encode_window(&sample.window)?.to_tensor3());
        labels.push(sample.label.code());
    }
    Ok(EncodedDataset { inputs, labels })
}

/// One line of the metrics history.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub train_loss: f64,
    pub valid_accuracy: f64,
}

/// Result of a training run. `diverged_at` is set when a batch produced a
/// non-finite loss; the model is then the best checkpoint seen before the
/// abort.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: LayerStack,
    pub history: Vec<EpochMetrics>,
    pub best_epoch: usize,
    pub best_valid_accuracy: f64,
    pub diverged_at: Option<usize>,
}

/// Mini-batch gradient descent with Adam. Deterministic for a fixed seed:
/// batches are shuffled by a dedicated stream and gradients accumulate in
/// index order. The best-validation parameters are retained.
pub fn train(
    mut model: LayerStack,
    train_data: &EncodedDataset,
    valid_data: &EncodedDataset,
    config: &TrainConfig,
) -> Result<TrainOutcome, NnError> {
    if train_data.is_empty() || valid_data.is_empty() {
        return Err(NnError::EmptyDataset);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut adam = Adam::new(model.param_count(), config.optimizer);
    let mut params = model.params_vec();
    let mut history = Vec::with_capacity(config.epochs);
    let mut best = model.clone();
    let mut best_epoch = 0;
    let mut best_acc = -1.0f64;
    let mut indices: Vec<usize> = (0..train_data.len()).collect();

    for epoch in 1..=config.epochs {
        indices.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut batches = 0usize;
        for chunk in indices.chunks(config.batch_size.max(1)) {
            let inputs: Vec<&Tensor3> = chunk.iter().map(|&i| &train_data.inputs[i]).collect();
            let labels: Vec<u8> = chunk.iter().map(|&i| train_data.labels[i]).collect();
            let (loss, grads) = match model.loss_and_gradients(&inputs, &labels) {
                Ok(out) => out,
                Err(NnError::NonFiniteLoss { .. }) => {
                    return Ok(TrainOutcome {
                        model: best,
                        history,
                        best_epoch,
                        best_valid_accuracy: best_acc.max(0.0),
                        diverged_at: Some(epoch),
                    });
                }
                Err(e) => return Err(e),
            };
            loss_sum += loss;
            batches += 1;
            adam.step(&mut params, &grads);
            model.set_params_vec(&params)?;
        }

        let valid_accuracy = evaluate(&model, valid_data)?.accuracy;
        history.push(EpochMetrics { epoch, train_loss: loss_sum / batches as f64, valid_accuracy });
        if valid_accuracy > best_acc {
            best_acc = valid_accuracy;
            best_epoch = epoch;
            best = model.clone();
        }
    }

    Ok(TrainOutcome {
        model: best,
        history,
        best_epoch,
        best_valid_accuracy: best_acc,
        diverged_at: None,
    })
}

/// Per-class precision/recall plus support.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassMetrics {
    pub class: usize,
    pub support: usize,
    pub precision: f64,
    pub recall: f64,
}

/// Confusion matrix is `confusion[actual][predicted]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub confusion: Vec<Vec<usize>>,
    pub per_class: Vec<ClassMetrics>,
    pub accuracy: f64,
    pub total: usize,
}

const EVAL_CHUNK: usize = 64;

pub fn evaluate(model: &LayerStack, data: &EncodedDataset) -> Result<EvalReport, NnError> {
    if data.is_empty() {
        return Err(NnError::EmptyDataset);
    }
    let classes = model.arch().classes;
    let mut confusion = vec![vec![0usize; classes]; classes];
    for start in (0..data.len()).step_by(EVAL_CHUNK) {
        let end = (start + EVAL_CHUNK).min(data.len());
        let inputs: Vec<&Tensor3> = data.inputs[start..end].iter().collect();
        let probs = model.forward_batch(&inputs)?;
        for (row, &label) in probs.rows().into_iter().zip(&data.labels[start..end]) {
            let mut argmax = 0;
            for (i, &p) in row.iter().enumerate() {
                if p > row[argmax] {
                    argmax = i;
                }
            }
            confusion[label as usize][argmax] += 1;
        }
    }

    let total = data.len();
    let mut correct = 0usize;
    let mut per_class = Vec::with_capacity(classes);
    for class in 0..classes {
        correct += confusion[class][class];
        let support: usize = confusion[class].iter().sum();
        let predicted: usize = confusion.iter().map(|row| row[class]).sum();
        per_class.push(ClassMetrics {
            class,
            support,
            precision: if predicted > 0 { confusion[class][class] as f64 / predicted as f64 } else { 0.0 },
            recall: if support > 0 { confusion[class][class] as f64 / support as f64 } else { 0.0 },
        });
    }
    Ok(EvalReport { confusion, per_class, accuracy: correct as f64 / total as f64, total })
}

/// Plain-text metrics log, one line per epoch.
pub fn write_metrics_log(path: &std::path::Path, history: &[EpochMetrics]) -> std::io::Result<()> {
    use std::io::Write;
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "# epoch train_loss valid_accuracy")?;
    for m in history {
        writeln!(out, "{} {:.6} {:.6}", m.epoch, m.train_loss, m.valid_accuracy)?;
    }
    out.flush()
}
