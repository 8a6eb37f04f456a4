//! Bias-corrected Adam.

use super::{LstmWeights, ModelConfig};
use crate::{Error, Result};

/// First/second moment accumulators plus hyperparameters.
#[derive(Debug, Clone)]
pub struct AdamState {
    m: LstmWeights,
    v: LstmWeights,
    pub step_count: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(config: &ModelConfig, lr: f64) -> Self {
        Self {
            m: LstmWeights::zeros(config),
            v: LstmWeights::zeros(config),
            step_count: 0,
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    pub(crate) fn moments(&self) -> (&LstmWeights, &LstmWeights) {
        (&self.m, &self.v)
    }

    pub(crate) fn from_parts(
        m: LstmWeights,
        v: LstmWeights,
        step_count: u64,
        lr: f64,
        beta1: f64,
        beta2: f64,
        eps: f64,
    ) -> Self {
        Self {
            m,
            v,
            step_count,
            lr,
            beta1,
            beta2,
            eps,
        }
    }
}

/// One Adam update:
///
/// ```text
/// m <- b1 m + (1-b1) g        mhat = m / (1 - b1^t)
/// v <- b2 v + (1-b2) g^2      vhat = v / (1 - b2^t)
/// w <- w - lr * mhat / (sqrt(vhat) + eps)
/// ```
///
/// Non-finite gradients refuse the update and leave weights and state
/// untouched.
pub fn adam_step(
    weights: &mut LstmWeights,
    grads: &LstmWeights,
    state: &mut AdamState,
) -> Result<()> {
    if !weights.same_shape(grads) || !weights.same_shape(&state.m) {
        return Err(Error::Config("adam_step: shape mismatch".into()));
    }
    if !grads.all_finite() {
        return Err(Error::Numerical(
            "adam_step: non-finite gradient, update refused".into(),
        ));
    }
    state.step_count += 1;
    let t = state.step_count as i32;
    let bc1 = 1.0 - state.beta1.powi(t);
    let bc2 = 1.0 - state.beta2.powi(t);
    let (b1, b2, lr, eps) = (state.beta1, state.beta2, state.lr, state.eps);

    for ((w, g), (m, v)) in weights
        .tensors_mut()
        .into_iter()
        .zip(grads.tensors())
        .zip(state.m.tensors_mut().into_iter().zip(state.v.tensors_mut()))
    {
        let (wd, gd) = (w.as_mut_slice(), g.as_slice());
        let (md, vd) = (m.as_mut_slice(), v.as_mut_slice());
        for k in 0..wd.len() {
            md[k] = b1 * md[k] + (1.0 - b1) * gd[k];
            vd[k] = b2 * vd[k] + (1.0 - b2) * gd[k] * gd[k];
            let mhat = md[k] / bc1;
            let vhat = vd[k] / bc2;
            wd[k] -= lr * mhat / (vhat.sqrt() + eps);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::init_weights;

    fn tiny_config(seed: u64) -> ModelConfig {
        ModelConfig {
            hidden_dim: 2,
            fc_dim: 2,
            seed,
            ..Default::default()
        }
    }

    fn constant_grads(config: &ModelConfig, value: f64) -> LstmWeights {
        let mut g = LstmWeights::zeros(config);
        for t in g.tensors_mut() {
            for v in t.as_mut_slice() {
                *v = value;
            }
        }
        g
    }

    #[test]
    fn first_step_moves_by_lr_sign() {
        // with zero state and constant gradient g, mhat/sqrt(vhat) = sign(g)
        let config = tiny_config(0);
        let mut w = LstmWeights::zeros(&config);
        let mut state = AdamState::new(&config, 0.01);
        let g = constant_grads(&config, -0.37);
        adam_step(&mut w, &g, &mut state).unwrap();
        for t in w.tensors() {
            for &v in t.as_slice() {
                assert!((v - 0.01).abs() < 1e-7, "step {v} != lr*sign");
            }
        }
        assert_eq!(state.step_count, 1);
    }

    #[test]
    fn two_opposed_steps_nearly_cancel() {
        // closed-form two-step evaluation with gradients +g then -g:
        //   step 1: delta1 = -lr * g / (|g| + eps')            (~ -lr sign g)
        //   step 2: m2hat = -g (1-b1)/(1+b1), v2hat = g^2
        //           delta2 = +lr/(1+...) => net displacement
        //   net = -lr*s + lr*s*(1-b1)/(1+b1) = -lr*s*2b1/(1+b1)
        // with b1 = 0.9: net = -0.947...*lr*s, i.e. back within lr of start.
        let config = tiny_config(0);
        let mut w = LstmWeights::zeros(&config);
        let mut state = AdamState::new(&config, 0.01);
        let g = constant_grads(&config, 0.5);
        let neg = constant_grads(&config, -0.5);
        adam_step(&mut w, &g, &mut state).unwrap();
        adam_step(&mut w, &neg, &mut state).unwrap();
        let expected = -0.01 * (2.0 * 0.9) / (1.0 + 0.9);
        for t in w.tensors() {
            for &v in t.as_slice() {
                assert!((v - expected).abs() < 1e-6, "net {v} vs {expected}");
                assert!(v.abs() < 0.01);
            }
        }
        assert_eq!(state.step_count, 2);
    }

    #[test]
    fn zero_learning_rate_freezes_weights() {
        let config = tiny_config(5);
        let mut w = init_weights(&config).unwrap();
        let before = w.clone();
        let mut state = AdamState::new(&config, 0.0);
        let g = constant_grads(&config, 1.0);
        adam_step(&mut w, &g, &mut state).unwrap();
        assert_eq!(w, before);
    }

    #[test]
    fn non_finite_gradients_refuse_update() {
        let config = tiny_config(0);
        let mut w = init_weights(&config).unwrap();
        let before = w.clone();
        let mut state = AdamState::new(&config, 0.01);
        let mut g = constant_grads(&config, 1.0);
        g.fc2_b.as_mut_slice()[0] = f64::NAN;
        assert!(adam_step(&mut w, &g, &mut state).is_err());
        assert_eq!(w, before);
        assert_eq!(state.step_count, 0);
    }
}
