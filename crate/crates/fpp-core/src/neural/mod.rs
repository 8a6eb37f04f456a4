//! From-scratch sequence regressor: a single LSTM layer, a two-layer fully
//! connected head with (softplus, sigmoid) outputs, reverse-mode gradients
//! through time, and a bias-corrected Adam optimizer.
//!
//! Everything is plain `f64` on the CPU. Forward and backward are pure
//! functions of `(weights, input)`; batch members are processed in fixed
//! chunks whose partial sums are folded in index order, so gradients are
//! bit-identical for any thread count.

mod adam;
mod io;
mod lstm;

pub use adam::{adam_step, AdamState};
pub use io::{load_model, save_model};
pub use lstm::{
    backward, batch_gradients, batch_loss, clip_gradients, forward, loss_mse, Cache, Gradients,
    Prediction,
};

use crate::linalg::Mat;
use crate::rng::SplitRng;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// Optional activation applied per time step to the scalar input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum InputActivation {
    None,
    /// No-op on valid (positive) waiting times, but kept as the default to
    /// match the reference architecture.
    #[default]
    Relu,
}

/// Architecture hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Scalar sequences only.
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub fc_dim: usize,
    /// Two heads: mu (softplus) and beta (sigmoid).
    pub output_dim: usize,
    pub input_activation: InputActivation,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            input_dim: 1,
            hidden_dim: 16,
            fc_dim: 32,
            output_dim: 2,
            input_activation: InputActivation::Relu,
            seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden_dim < 1 || self.fc_dim < 1 {
            return Err(Error::Config("hidden_dim and fc_dim must be >= 1".into()));
        }
        if self.input_dim != 1 {
            return Err(Error::Config(
                "only scalar input sequences are supported (input_dim = 1)".into(),
            ));
        }
        if self.output_dim != 2 {
            return Err(Error::Config(
                "output heads are fixed to (softplus mu, sigmoid beta)".into(),
            ));
        }
        Ok(())
    }
}

/// All trainable parameters.
///
/// Gate weights follow the per-gate layout of the cell equations: `w_i*` act
/// on the input, `w_h*` on the previous hidden state, and each gate carries
/// both an input-side and a hidden-side bias. Biases are `n x 1` matrices so
/// every parameter tensor can be handled uniformly.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmWeights {
    pub w_ii: Mat,
    pub w_if: Mat,
    pub w_ig: Mat,
    pub w_io: Mat,
    pub w_hi: Mat,
    pub w_hf: Mat,
    pub w_hg: Mat,
    pub w_ho: Mat,
    pub b_ii: Mat,
    pub b_if: Mat,
    pub b_ig: Mat,
    pub b_io: Mat,
    pub b_hi: Mat,
    pub b_hf: Mat,
    pub b_hg: Mat,
    pub b_ho: Mat,
    pub fc1_w: Mat,
    pub fc1_b: Mat,
    pub fc2_w: Mat,
    pub fc2_b: Mat,
}

/// Canonical tensor order used by initialization, the optimizer, gradient
/// audits and the model file format.
pub const TENSOR_NAMES: [&str; 20] = [
    "w_ii", "w_if", "w_ig", "w_io", "w_hi", "w_hf", "w_hg", "w_ho", "b_ii", "b_if", "b_ig",
    "b_io", "b_hi", "b_hf", "b_hg", "b_ho", "fc1_w", "fc1_b", "fc2_w", "fc2_b",
];

impl LstmWeights {
    /// Zero-valued parameter set with the shapes implied by `config`.
    pub fn zeros(config: &ModelConfig) -> Self {
        let h = config.hidden_dim;
        let fc = config.fc_dim;
        let inp = config.input_dim;
        let out = config.output_dim;
        Self {
            w_ii: Mat::zeros(h, inp),
            w_if: Mat::zeros(h, inp),
            w_ig: Mat::zeros(h, inp),
            w_io: Mat::zeros(h, inp),
            w_hi: Mat::zeros(h, h),
            w_hf: Mat::zeros(h, h),
            w_hg: Mat::zeros(h, h),
            w_ho: Mat::zeros(h, h),
            b_ii: Mat::zeros(h, 1),
            b_if: Mat::zeros(h, 1),
            b_ig: Mat::zeros(h, 1),
            b_io: Mat::zeros(h, 1),
            b_hi: Mat::zeros(h, 1),
            b_hf: Mat::zeros(h, 1),
            b_hg: Mat::zeros(h, 1),
            b_ho: Mat::zeros(h, 1),
            fc1_w: Mat::zeros(fc, h),
            fc1_b: Mat::zeros(fc, 1),
            fc2_w: Mat::zeros(out, fc),
            fc2_b: Mat::zeros(out, 1),
        }
    }

    pub fn tensors(&self) -> [&Mat; 20] {
        [
            &self.w_ii, &self.w_if, &self.w_ig, &self.w_io, &self.w_hi, &self.w_hf, &self.w_hg,
            &self.w_ho, &self.b_ii, &self.b_if, &self.b_ig, &self.b_io, &self.b_hi, &self.b_hf,
            &self.b_hg, &self.b_ho, &self.fc1_w, &self.fc1_b, &self.fc2_w, &self.fc2_b,
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut Mat; 20] {
        [
            &mut self.w_ii, &mut self.w_if, &mut self.w_ig, &mut self.w_io, &mut self.w_hi,
            &mut self.w_hf, &mut self.w_hg, &mut self.w_ho, &mut self.b_ii, &mut self.b_if,
            &mut self.b_ig, &mut self.b_io, &mut self.b_hi, &mut self.b_hf, &mut self.b_hg,
            &mut self.b_ho, &mut self.fc1_w, &mut self.fc1_b, &mut self.fc2_w, &mut self.fc2_b,
        ]
    }

    pub fn add_assign(&mut self, other: &LstmWeights) {
        for (a, b) in self.tensors_mut().into_iter().zip(other.tensors()) {
            a.add_assign(b);
        }
    }

    pub fn scale(&mut self, s: f64) {
        for t in self.tensors_mut() {
            t.scale(s);
        }
    }

    pub fn all_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.all_finite())
    }

    pub fn n_params(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    /// Shape compatibility with another parameter set.
    pub fn same_shape(&self, other: &LstmWeights) -> bool {
        self.tensors()
            .iter()
            .zip(other.tensors())
            .all(|(a, b)| a.rows() == b.rows() && a.cols() == b.cols())
    }
}

/// Uniform initialization in `[-k, k]` with `k = 1/sqrt(hidden_dim)` for all
/// matrices and biases, fully determined by `config.seed`. Tensors are
/// filled in canonical order from a single derived stream.
pub fn init_weights(config: &ModelConfig) -> Result<LstmWeights> {
    config.validate()?;
    let k = 1.0 / (config.hidden_dim as f64).sqrt();
    let mut rng = SplitRng::new(config.seed).derive(0x1157);
    let mut w = LstmWeights::zeros(config);
    for t in w.tensors_mut() {
        for v in t.as_mut_slice() {
            *v = rng.uniform(-k, k);
        }
    }
    Ok(w)
}

/// A configuration paired with trained weights.
#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub config: ModelConfig,
    pub weights: LstmWeights,
}

impl TrainedModel {
    pub fn predict(&self, window: &[f64]) -> Result<Prediction> {
        forward(&self.weights, &self.config, window).map(|(p, _)| p)
    }

    /// Batched inference; output order matches input order for any thread
    /// count.
    pub fn predict_batch(&self, windows: &Mat) -> Result<Vec<Prediction>> {
        use rayon::prelude::*;
        let rows: Vec<&[f64]> = windows.iter_rows().collect();
        rows.par_chunks(lstm::BATCH_CHUNK)
            .map(|chunk| {
                chunk
                    .iter()
                    .map(|row| self.predict(row))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()
            .map(|chunks| chunks.into_iter().flatten().collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn init_is_seed_deterministic_and_bounded() {
        let cfg = ModelConfig {
            seed: 42,
            ..Default::default()
        };
        let a = init_weights(&cfg).unwrap();
        let b = init_weights(&cfg).unwrap();
        assert_eq!(a, b);

        let k = 1.0 / (cfg.hidden_dim as f64).sqrt();
        for t in a.tensors() {
            assert!(t.as_slice().iter().all(|v| v.abs() <= k));
        }

        let c = init_weights(&ModelConfig {
            seed: 43,
            ..Default::default()
        })
        .unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn config_validation_rejects_bad_dims() {
        let mut cfg = ModelConfig::default();
        cfg.hidden_dim = 0;
        assert!(cfg.validate().is_err());
        let mut cfg = ModelConfig::default();
        cfg.input_dim = 3;
        assert!(cfg.validate().is_err());
        let mut cfg = ModelConfig::default();
        cfg.output_dim = 1;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn tensor_count_matches_names() {
        let w = LstmWeights::zeros(&ModelConfig::default());
        assert_eq!(w.tensors().len(), TENSOR_NAMES.len());
        // 4*(16*1) + 4*(16*16) + 8*16 + 32*16 + 32 + 2*32 + 2
        assert_eq!(w.n_params(), 64 + 1024 + 128 + 512 + 32 + 64 + 2);
    }
}
