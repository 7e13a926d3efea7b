//! The classifier stack: Conv -> ReLU -> Conv -> ReLU -> Flatten ->
//! Dense -> ReLU -> Dense -> Softmax, with analytic gradients.

use ndarray::{Array2, Array4};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::layers::{relu_backward, relu_in_place, softmax_rows, Conv2d, Dense};
use super::{NnError, Tensor3};

/// Shape parameters of the stack. The default is the production
/// configuration for 10x10x4 field tensors; tests shrink it to keep
/// finite-difference sweeps cheap.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Arch {
    pub input: (usize, usize, usize),
    pub conv_filters: usize,
    pub kernel: usize,
    pub dense_units: usize,
    pub classes: usize,
}

impl Default for Arch {
    fn default() -> Self {
        Self { input: (10, 10, 4), conv_filters: 16, kernel: 3, dense_units: 128, classes: 9 }
    }
}

impl Arch {
    fn flat_len(&self) -> usize {
        self.input.0 * self.input.1 * self.conv_filters
    }

    fn pad(&self) -> usize {
        self.kernel / 2
    }
}

/// Class probabilities for one input.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub probabilities: Vec<f64>,
    pub argmax: usize,
    pub confidence: f64,
}

impl Prediction {
    fn from_probs(probabilities: Vec<f64>) -> Self {
        let mut argmax = 0;
        for (i, &p) in probabilities.iter().enumerate() {
            if p > probabilities[argmax] {
                argmax = i;
            }
        }
        let confidence = probabilities[argmax];
        Self { probabilities, argmax, confidence }
    }
}

/// The trainable model. Inference borrows the model immutably and can run
/// from any number of threads; training owns the only mutable handle.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerStack {
    arch: Arch,
    conv1: Conv2d,
    conv2: Conv2d,
    dense1: Dense,
    dense2: Dense,
}

struct Workspace {
    x: Array4<f64>,
    cols1: Array2<f64>,
    z1: Array4<f64>,
    a1: Array4<f64>,
    cols2: Array2<f64>,
    z2: Array4<f64>,
    flat: Array2<f64>,
    z3: Array2<f64>,
    a3: Array2<f64>,
    probs: Array2<f64>,
}

impl LayerStack {
    /// He-uniform initialization, reproducible from the seed.
    pub fn new(arch: Arch, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pad = arch.pad();
        let conv1 = Conv2d::new(arch.input.2, arch.conv_filters, arch.kernel, pad, &mut rng);
        let conv2 = Conv2d::new(arch.conv_filters, arch.conv_filters, arch.kernel, pad, &mut rng);
        let dense1 = Dense::new(arch.flat_len(), arch.dense_units, &mut rng);
        let dense2 = Dense::new(arch.dense_units, arch.classes, &mut rng);
        Self { arch, conv1, conv2, dense1, dense2 }
    }

    /// All-zero parameters; the output is uniform for any input.
    pub fn zeroed(arch: Arch) -> Self {
        let mut model = Self::new(arch, 0);
        let zeros = vec![0.0; model.param_count()];
        model.set_params_vec(&zeros).expect("zero fill");
        model
    }

    pub fn arch(&self) -> &Arch {
        &self.arch
    }

    fn batch_to_array(&self, inputs: &[&Tensor3]) -> Result<Array4<f64>, NnError> {
        let (h, w, c) = self.arch.input;
        let mut x = Array4::zeros((inputs.len(), h, w, c));
        for (bi, t) in inputs.iter().enumerate() {
            if t.shape() != self.arch.input {
                return Err(NnError::ShapeMismatch { expected: self.arch.input, actual: t.shape() });
            }
            let view = x.as_slice_mut().expect("standard layout");
            view[bi * h * w * c..(bi + 1) * h * w * c].copy_from_slice(t.data());
        }
        Ok(x)
    }

    fn forward_internal(&self, x: Array4<f64>) -> Workspace {
        let n = x.dim().0;
        let (z1, cols1) = self.conv1.forward(&x);
        let mut a1 = z1.clone();
        relu_in_place(a1.as_slice_mut().expect("layout"));

        let (z2, cols2) = self.conv2.forward(&a1);
        let mut a2 = z2.clone();
        relu_in_place(a2.as_slice_mut().expect("layout"));

        let flat = Array2::from_shape_vec(
            (n, self.arch.flat_len()),
            a2.as_slice().expect("layout").to_vec(),
        )
        .expect("flatten");

        let z3 = self.dense1.forward(&flat);
        let mut a3 = z3.clone();
        relu_in_place(a3.as_slice_mut().expect("layout"));

        let logits = self.dense2.forward(&a3);
        let probs = softmax_rows(&logits);
        Workspace { x, cols1, z1, a1, cols2, z2, flat, z3, a3, probs }
    }

    /// Class probabilities for a batch of inputs; row i belongs to input i.
    pub fn forward_batch(&self, inputs: &[&Tensor3]) -> Result<Array2<f64>, NnError> {
        if inputs.is_empty() {
            return Err(NnError::EmptyBatch);
        }
        let x = self.batch_to_array(inputs)?;
        Ok(self.forward_internal(x).probs)
    }

    /// Single-input forward pass.
    pub fn forward(&self, input: &Tensor3) -> Result<Prediction, NnError> {
        let probs = self.forward_batch(&[input])?;
        Ok(Prediction::from_probs(probs.row(0).to_vec()))
    }

    /// Mean cross-entropy over the batch plus the analytic gradient of every
    /// parameter, flattened in canonical order.
    pub fn loss_and_gradients(
        &self,
        inputs: &[&Tensor3],
        labels: &[u8],
    ) -> Result<(f64, Vec<f64>), NnError> {
        if inputs.is_empty() {
            return Err(NnError::EmptyBatch);
        }
        if inputs.len() != labels.len() {
            return Err(NnError::BatchMismatch { inputs: inputs.len(), labels: labels.len() });
        }
        for &label in labels {
            if label as usize >= self.arch.classes {
                return Err(NnError::LabelOutOfRange { label, classes: self.arch.classes });
            }
        }

        let n = inputs.len();
        let x = self.batch_to_array(inputs)?;
        let ws = self.forward_internal(x);

        let mut loss = 0.0;
        for (bi, &label) in labels.iter().enumerate() {
            loss -= ws.probs[[bi, label as usize]].ln();
        }
        loss /= n as f64;
        if !loss.is_finite() {
            return Err(NnError::NonFiniteLoss { batch_size: n, first_label: labels[0] });
        }

        // softmax + cross-entropy gradient: (p - onehot) / n
        let mut dlogits = ws.probs.clone();
        for (bi, &label) in labels.iter().enumerate() {
            dlogits[[bi, label as usize]] -= 1.0;
        }
        dlogits /= n as f64;

        let (dw4, db4, mut da3) = self.dense2.backward(&ws.a3, &dlogits);
        relu_backward(ws.z3.as_slice().expect("layout"), da3.as_slice_mut().expect("layout"));

        let (dw3, db3, dflat) = self.dense1.backward(&ws.flat, &da3);

        let (bn, h, w, f) = ws.z2.dim();
        let mut da2 = Array4::from_shape_vec(
            (bn, h, w, f),
            dflat.as_slice().expect("layout").to_vec(),
        )
        .expect("unflatten");
        relu_backward(ws.z2.as_slice().expect("layout"), da2.as_slice_mut().expect("layout"));

        let (dw2, db2, mut da1) = self.conv2.backward(&ws.cols2, ws.a1.dim(), &da2);
        relu_backward(ws.z1.as_slice().expect("layout"), da1.as_slice_mut().expect("layout"));

        let (dw1, db1, _dx) = self.conv1.backward(&ws.cols1, ws.x.dim(), &da1);

        let mut grads = Vec::with_capacity(self.param_count());
        grads.extend(dw1.iter());
        grads.extend(db1.iter());
        grads.extend(dw2.iter());
        grads.extend(db2.iter());
        grads.extend(dw3.iter());
        grads.extend(db3.iter());
        grads.extend(dw4.iter());
        grads.extend(db4.iter());
        Ok((loss, grads))
    }

    pub fn param_count(&self) -> usize {
        self.conv1.weights.len()
            + self.conv1.bias.len()
            + self.conv2.weights.len()
            + self.conv2.bias.len()
            + self.dense1.weights.len()
            + self.dense1.bias.len()
            + self.dense2.weights.len()
            + self.dense2.bias.len()
    }

    /// Every parameter flattened in canonical order: conv1 w/b, conv2 w/b,
    /// dense1 w/b, dense2 w/b, each tensor row-major.
    pub fn params_vec(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        out.extend(self.conv1.weights.iter());
        out.extend(self.conv1.bias.iter());
        out.extend(self.conv2.weights.iter());
        out.extend(self.conv2.bias.iter());
        out.extend(self.dense1.weights.iter());
        out.extend(self.dense1.bias.iter());
        out.extend(self.dense2.weights.iter());
        out.extend(self.dense2.bias.iter());
        out
    }

    pub fn set_params_vec(&mut self, params: &[f64]) -> Result<(), NnError> {
        if params.len() != self.param_count() {
            return Err(NnError::BadParamLength { got: params.len(), expected: self.param_count() });
        }
        let mut offset = 0;
        let mut take = |target: &mut [f64]| {
            target.copy_from_slice(&params[offset..offset + target.len()]);
            offset += target.len();
        };
        take(self.conv1.weights.as_slice_mut().expect("layout"));
        take(self.conv1.bias.as_slice_mut().expect("layout"));
        take(self.conv2.weights.as_slice_mut().expect("layout"));
        take(self.conv2.bias.as_slice_mut().expect("layout"));
        take(self.dense1.weights.as_slice_mut().expect("layout"));
        take(self.dense1.bias.as_slice_mut().expect("layout"));
        take(self.dense2.weights.as_slice_mut().expect("layout"));
        take(self.dense2.bias.as_slice_mut().expect("layout"));
        Ok(())
    }

    /// (name, element count) of each parameter tensor in canonical order.
    pub fn param_layout(&self) -> Vec<(&'static str, usize)> {
        vec![
            ("conv1.weights", self.conv1.weights.len()),
            ("conv1.bias", self.conv1.bias.len()),
            ("conv2.weights", self.conv2.weights.len()),
            ("conv2.bias", self.conv2.bias.len()),
            ("dense1.weights", self.dense1.weights.len()),
            ("dense1.bias", self.dense1.bias.len()),
            ("dense2.weights", self.dense2.weights.len()),
            ("dense2.bias", self.dense2.bias.len()),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn random_input(arch: &Arch, rng: &mut ChaCha8Rng) -> Tensor3 {
        let (h, w, c) = arch.input;
        let data = (0..h * w * c).map(|_| rng.gen_range(-1.0..1.0)).collect();
        Tensor3::new(arch.input, data).unwrap()
    }

    fn small_arch() -> Arch {
        Arch { input: (5, 5, 2), conv_filters: 3, kernel: 3, dense_units: 8, classes: 4 }
    }

    #[test]
    fn zero_model_is_uniform() {
        let arch = Arch::default();
        let model = LayerStack::zeroed(arch);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pred = model.forward(&random_input(&arch, &mut rng)).unwrap();
        for p in &pred.probabilities {
            assert!((p - 1.0 / 9.0).abs() < 1e-12);
        }
        assert_eq!(pred.argmax, 0);
    }

    #[test]
    fn forward_is_deterministic() {
        let arch = Arch::default();
        let model = LayerStack::new(arch, 33);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let input = random_input(&arch, &mut rng);
        let a = model.forward(&input).unwrap();
        let b = model.forward(&input).unwrap();
        assert_eq!(a, b);

        let model2 = LayerStack::new(arch, 33);
        assert_eq!(model2.forward(&input).unwrap(), a);
    }

    #[test]
    fn forward_rejects_wrong_shape() {
        let model = LayerStack::new(Arch::default(), 1);
        let bad = Tensor3::zeros((5, 5, 4));
        match model.forward(&bad) {
            Err(NnError::ShapeMismatch { expected, actual }) => {
                assert_eq!(expected, (10, 10, 4));
                assert_eq!(actual, (5, 5, 4));
            }
            other => panic!("expected shape error, got {other:?}"),
        }
    }

    #[test]
    fn zero_model_loss_is_ln_classes() {
        let arch = Arch::default();
        let model = LayerStack::zeroed(arch);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let inputs: Vec<Tensor3> = (0..4).map(|_| random_input(&arch, &mut rng)).collect();
        let refs: Vec<&Tensor3> = inputs.iter().collect();
        let (loss, _) = model.loss_and_gradients(&refs, &[0, 3, 5, 8]).unwrap();
        assert!((loss - (9.0f64).ln()).abs() < 1e-12, "loss {loss}");
    }

    #[test]
    fn duplicating_the_batch_leaves_loss_unchanged() {
        let arch = small_arch();
        let model = LayerStack::new(arch, 5);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let inputs: Vec<Tensor3> = (0..3).map(|_| random_input(&arch, &mut rng)).collect();
        let refs: Vec<&Tensor3> = inputs.iter().collect();
        let (loss, _) = model.loss_and_gradients(&refs, &[0, 1, 2]).unwrap();

        let doubled: Vec<&Tensor3> = refs.iter().chain(refs.iter()).copied().collect();
        let (loss2, _) = model.loss_and_gradients(&doubled, &[0, 1, 2, 0, 1, 2]).unwrap();
        assert!((loss - loss2).abs() < 1e-12);
    }

    #[test]
    fn params_vec_round_trips() {
        let arch = small_arch();
        let model = LayerStack::new(arch, 6);
        let params = model.params_vec();
        assert_eq!(params.len(), model.param_count());

        let mut other = LayerStack::new(arch, 7);
        other.set_params_vec(&params).unwrap();
        assert_eq!(other, model);

        assert!(other.set_params_vec(&params[1..]).is_err());
    }

    /// Central finite differences over every parameter of a small seeded
    /// model. This is the independent oracle for the analytic backward pass.
    #[test]
    fn gradients_match_finite_differences() {
        let arch = small_arch();
        let model = LayerStack::new(arch, 8);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let inputs: Vec<Tensor3> = (0..3).map(|_| random_input(&arch, &mut rng)).collect();
        let refs: Vec<&Tensor3> = inputs.iter().collect();
        let labels = [1u8, 0, 3];

        let (_, analytic) = model.loss_and_gradients(&refs, &labels).unwrap();
        let base = model.params_vec();
        let eps = 1e-5;
        let mut worst = 0.0f64;
        for i in 0..base.len() {
            let mut probe = model.clone();
            let mut params = base.clone();
            params[i] = base[i] + eps;
            probe.set_params_vec(&params).unwrap();
            let (plus, _) = probe.loss_and_gradients(&refs, &labels).unwrap();
            params[i] = base[i] - eps;
            probe.set_params_vec(&params).unwrap();
            let (minus, _) = probe.loss_and_gradients(&refs, &labels).unwrap();
            let numeric = (plus - minus) / (2.0 * eps);
            let denom = analytic[i].abs().max(numeric.abs()).max(1e-6);
            worst = worst.max((analytic[i] - numeric).abs() / denom);
        }
        assert!(worst < 1e-4, "worst relative gradient error {worst}");
    }
}
