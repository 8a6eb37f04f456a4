//! LSTM forward pass, reverse-mode gradients through time, and the MSE loss.
//!
//! Cell equations per time step (element-wise nonlinearities):
//!
//! ```text
//! i_t = sigmoid(w_ii x_t + b_ii + w_hi h_{t-1} + b_hi)
//! f_t = sigmoid(w_if x_t + b_if + w_hf h_{t-1} + b_hf)
//! g_t = tanh   (w_ig x_t + b_ig + w_hg h_{t-1} + b_hg)
//! o_t = sigmoid(w_io x_t + b_io + w_ho h_{t-1} + b_ho)
//! c_t = f_t * c_{t-1} + i_t * g_t
//! h_t = o_t * tanh(c_t)
//! ```
//!
//! with `h_0 = c_0 = 0`. The final hidden state feeds
//! `fc1 -> ReLU -> fc2 -> (softplus, sigmoid)` producing `(mu, beta)`.

use super::{InputActivation, LstmWeights, ModelConfig};
use crate::linalg::Mat;
use crate::{Error, Result};
use rayon::prelude::*;

/// Fixed per-thread work unit for batch processing. Partial sums are folded
/// in chunk order, so results do not depend on the number of threads.
pub(crate) const BATCH_CHUNK: usize = 16;

/// Network output; ranges are enforced by the head activations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    /// softplus output, > 0
    pub mu: f64,
    /// sigmoid output, in (0, 1)
    pub beta: f64,
}

impl Prediction {
    pub fn as_array(&self) -> [f64; 2] {
        [self.mu, self.beta]
    }
}

/// Gradients share the parameter layout.
pub type Gradients = LstmWeights;

#[inline]
fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[inline]
fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

struct StepCache {
    x: f64,
    i: Vec<f64>,
    f: Vec<f64>,
    g: Vec<f64>,
    o: Vec<f64>,
    c: Vec<f64>,
    tc: Vec<f64>,
    h: Vec<f64>,
}

/// Per-step activations retained for the backward pass.
pub struct Cache {
    steps: Vec<StepCache>,
    fc1_pre: Vec<f64>,
    fc1_act: Vec<f64>,
    z: [f64; 2],
    pred: Prediction,
    hidden_dim: usize,
}

impl Cache {
    pub fn prediction(&self) -> Prediction {
        self.pred
    }

    pub fn seq_len(&self) -> usize {
        self.steps.len()
    }
}

/// Run the network over a scalar sequence of any length >= 1.
pub fn forward(
    weights: &LstmWeights,
    config: &ModelConfig,
    sequence: &[f64],
) -> Result<(Prediction, Cache)> {
    if sequence.is_empty() {
        return Err(Error::Config("forward: empty input sequence".into()));
    }
    if sequence.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numerical("forward: non-finite input value".into()));
    }
    let h_dim = config.hidden_dim;

    let mut h = vec![0.0; h_dim];
    let mut c = vec![0.0; h_dim];
    let mut steps = Vec::with_capacity(sequence.len());

    for &raw in sequence {
        let x = match config.input_activation {
            InputActivation::Relu => raw.max(0.0),
            InputActivation::None => raw,
        };
        let mut pre_i = weights.b_ii.as_slice().to_vec();
        let mut pre_f = weights.b_if.as_slice().to_vec();
        let mut pre_g = weights.b_ig.as_slice().to_vec();
        let mut pre_o = weights.b_io.as_slice().to_vec();
        for k in 0..h_dim {
            pre_i[k] += weights.b_hi.as_slice()[k] + weights.w_ii.at(k, 0) * x;
            pre_f[k] += weights.b_hf.as_slice()[k] + weights.w_if.at(k, 0) * x;
            pre_g[k] += weights.b_hg.as_slice()[k] + weights.w_ig.at(k, 0) * x;
            pre_o[k] += weights.b_ho.as_slice()[k] + weights.w_io.at(k, 0) * x;
        }
        weights.w_hi.matvec_acc(&h, &mut pre_i);
        weights.w_hf.matvec_acc(&h, &mut pre_f);
        weights.w_hg.matvec_acc(&h, &mut pre_g);
        weights.w_ho.matvec_acc(&h, &mut pre_o);

        let i: Vec<f64> = pre_i.iter().map(|&v| sigmoid(v)).collect();
        let f: Vec<f64> = pre_f.iter().map(|&v| sigmoid(v)).collect();
        let g: Vec<f64> = pre_g.iter().map(|&v| v.tanh()).collect();
        let o: Vec<f64> = pre_o.iter().map(|&v| sigmoid(v)).collect();

        let mut c_new = vec![0.0; h_dim];
        for k in 0..h_dim {
            c_new[k] = f[k] * c[k] + i[k] * g[k];
        }
        let tc: Vec<f64> = c_new.iter().map(|&v| v.tanh()).collect();
        let mut h_new = vec![0.0; h_dim];
        for k in 0..h_dim {
            h_new[k] = o[k] * tc[k];
        }

        steps.push(StepCache {
            x,
            i,
            f,
            g,
            o,
            c: c_new.clone(),
            tc,
            h: h_new.clone(),
        });
        h = h_new;
        c = c_new;
    }

    // head: fc1 -> relu -> fc2 -> (softplus, sigmoid)
    let mut fc1_pre = weights.fc1_b.as_slice().to_vec();
    weights.fc1_w.matvec_acc(&h, &mut fc1_pre);
    let fc1_act: Vec<f64> = fc1_pre.iter().map(|&v| v.max(0.0)).collect();
    let mut z = weights.fc2_b.as_slice().to_vec();
    weights.fc2_w.matvec_acc(&fc1_act, &mut z);
    let pred = Prediction {
        mu: softplus(z[0]),
        beta: sigmoid(z[1]),
    };

    Ok((
        pred,
        Cache {
            steps,
            fc1_pre,
            fc1_act,
            z: [z[0], z[1]],
            pred,
            hidden_dim: h_dim,
        },
    ))
}

/// Mean squared error over a batch, averaged over both output coordinates.
pub fn loss_mse(preds: &[[f64; 2]], labels: &[[f64; 2]]) -> Result<f64> {
    if preds.len() != labels.len() {
        return Err(Error::Config(format!(
            "loss_mse shape mismatch: {} predictions vs {} labels",
            preds.len(),
            labels.len()
        )));
    }
    if preds.is_empty() {
        return Err(Error::Config("loss_mse: empty batch".into()));
    }
    let mut acc = 0.0;
    for (p, l) in preds.iter().zip(labels) {
        let d0 = p[0] - l[0];
        let d1 = p[1] - l[1];
        acc += d0 * d0 + d1 * d1;
    }
    Ok(acc / (2.0 * preds.len() as f64))
}

/// Gradients of the single-sample loss
/// `L = ((mu - label_mu)^2 + (beta - label_beta)^2) / 2`
/// with respect to every parameter tensor, by backpropagation through time.
pub fn backward(
    weights: &LstmWeights,
    config: &ModelConfig,
    cache: &Cache,
    label: (f64, f64),
) -> Result<Gradients> {
    if cache.hidden_dim != config.hidden_dim
        || cache.fc1_pre.len() != config.fc_dim
        || cache.steps.is_empty()
    {
        return Err(Error::Config(
            "backward: cache does not match the supplied configuration".into(),
        ));
    }
    let h_dim = config.hidden_dim;
    let mut grads = LstmWeights::zeros(config);

    // head gradients; softplus' = sigmoid, sigmoid' = s(1-s)
    let d_mu = cache.pred.mu - label.0;
    let d_beta = cache.pred.beta - label.1;
    let dz = [
        d_mu * sigmoid(cache.z[0]),
        d_beta * cache.pred.beta * (1.0 - cache.pred.beta),
    ];

    let h_last = &cache.steps[cache.steps.len() - 1].h;
    grads.fc2_w.outer_acc(&dz, &cache.fc1_act);
    for (b, d) in grads.fc2_b.as_mut_slice().iter_mut().zip(&dz) {
        *b += d;
    }
    let mut d_fc1_act = vec![0.0; config.fc_dim];
    weights.fc2_w.matvec_t_acc(&dz, &mut d_fc1_act);
    let d_fc1_pre: Vec<f64> = d_fc1_act
        .iter()
        .zip(&cache.fc1_pre)
        .map(|(&d, &pre)| if pre > 0.0 { d } else { 0.0 })
        .collect();
    grads.fc1_w.outer_acc(&d_fc1_pre, h_last);
    for (b, d) in grads.fc1_b.as_mut_slice().iter_mut().zip(&d_fc1_pre) {
        *b += d;
    }

    let mut dh = vec![0.0; h_dim];
    weights.fc1_w.matvec_t_acc(&d_fc1_pre, &mut dh);
    let mut dc = vec![0.0; h_dim];

    for t in (0..cache.steps.len()).rev() {
        let s = &cache.steps[t];
        let (h_prev, c_prev): (&[f64], &[f64]) = if t == 0 {
            (&[], &[])
        } else {
            (&cache.steps[t - 1].h, &cache.steps[t - 1].c)
        };

        let mut dpre_i = vec![0.0; h_dim];
        let mut dpre_f = vec![0.0; h_dim];
        let mut dpre_g = vec![0.0; h_dim];
        let mut dpre_o = vec![0.0; h_dim];
        for k in 0..h_dim {
            let do_k = dh[k] * s.tc[k];
            dpre_o[k] = do_k * s.o[k] * (1.0 - s.o[k]);
            dc[k] += dh[k] * s.o[k] * (1.0 - s.tc[k] * s.tc[k]);

            let di = dc[k] * s.g[k];
            dpre_i[k] = di * s.i[k] * (1.0 - s.i[k]);
            let dg = dc[k] * s.i[k];
            dpre_g[k] = dg * (1.0 - s.g[k] * s.g[k]);
            let cp = if t == 0 { 0.0 } else { c_prev[k] };
            let df = dc[k] * cp;
            dpre_f[k] = df * s.f[k] * (1.0 - s.f[k]);
        }

        for k in 0..h_dim {
            *grads.w_ii.at_mut(k, 0) += dpre_i[k] * s.x;
            *grads.w_if.at_mut(k, 0) += dpre_f[k] * s.x;
            *grads.w_ig.at_mut(k, 0) += dpre_g[k] * s.x;
            *grads.w_io.at_mut(k, 0) += dpre_o[k] * s.x;
            grads.b_ii.as_mut_slice()[k] += dpre_i[k];
            grads.b_if.as_mut_slice()[k] += dpre_f[k];
            grads.b_ig.as_mut_slice()[k] += dpre_g[k];
            grads.b_io.as_mut_slice()[k] += dpre_o[k];
            grads.b_hi.as_mut_slice()[k] += dpre_i[k];
            grads.b_hf.as_mut_slice()[k] += dpre_f[k];
            grads.b_hg.as_mut_slice()[k] += dpre_g[k];
            grads.b_ho.as_mut_slice()[k] += dpre_o[k];
        }
        if t > 0 {
            grads.w_hi.outer_acc(&dpre_i, h_prev);
            grads.w_hf.outer_acc(&dpre_f, h_prev);
            grads.w_hg.outer_acc(&dpre_g, h_prev);
            grads.w_ho.outer_acc(&dpre_o, h_prev);
        }

        // propagate to the previous step
        let mut dh_prev = vec![0.0; h_dim];
        weights.w_hi.matvec_t_acc(&dpre_i, &mut dh_prev);
        weights.w_hf.matvec_t_acc(&dpre_f, &mut dh_prev);
        weights.w_hg.matvec_t_acc(&dpre_g, &mut dh_prev);
        weights.w_ho.matvec_t_acc(&dpre_o, &mut dh_prev);
        for k in 0..h_dim {
            dc[k] *= s.f[k];
        }
        dh = dh_prev;
    }

    Ok(grads)
}

/// Mean gradients and mean loss over the rows of `windows` selected by
/// `idx`. Work is split into fixed-size chunks processed in parallel and
/// folded in order, so the result is independent of thread count.
pub fn batch_gradients(
    weights: &LstmWeights,
    config: &ModelConfig,
    windows: &Mat,
    labels: &Mat,
    idx: &[usize],
) -> Result<(Gradients, f64)> {
    if idx.is_empty() {
        return Err(Error::Config("batch_gradients: empty batch".into()));
    }
    let chunks: Vec<(Gradients, f64)> = idx
        .par_chunks(BATCH_CHUNK)
        .map(|chunk| {
            let mut acc = LstmWeights::zeros(config);
            let mut loss = 0.0;
            for &i in chunk {
                let row = windows.row(i);
                let label = labels.row(i);
                let (pred, cache) = forward(weights, config, row)?;
                let d0 = pred.mu - label[0];
                let d1 = pred.beta - label[1];
                loss += 0.5 * (d0 * d0 + d1 * d1);
                let g = backward(weights, config, &cache, (label[0], label[1]))?;
                acc.add_assign(&g);
            }
            Ok((acc, loss))
        })
        .collect::<Result<_>>()?;

    let mut total = LstmWeights::zeros(config);
    let mut loss = 0.0;
    for (g, l) in &chunks {
        total.add_assign(g);
        loss += l;
    }
    let inv = 1.0 / idx.len() as f64;
    total.scale(inv);
    Ok((total, loss * inv))
}

/// Mean loss over selected rows without gradients (validation).
pub fn batch_loss(
    weights: &LstmWeights,
    config: &ModelConfig,
    windows: &Mat,
    labels: &Mat,
    idx: &[usize],
) -> Result<f64> {
    if idx.is_empty() {
        return Err(Error::Config("batch_loss: empty batch".into()));
    }
    let losses: Vec<f64> = idx
        .par_chunks(BATCH_CHUNK)
        .map(|chunk| {
            let mut loss = 0.0;
            for &i in chunk {
                let (pred, _) = forward(weights, config, windows.row(i))?;
                let label = labels.row(i);
                let d0 = pred.mu - label[0];
                let d1 = pred.beta - label[1];
                loss += 0.5 * (d0 * d0 + d1 * d1);
            }
            Ok(loss)
        })
        .collect::<Result<_>>()?;
    Ok(losses.iter().sum::<f64>() / idx.len() as f64)
}

/// Scale all gradients so their global L2 norm does not exceed `max_norm`.
pub fn clip_gradients(grads: &mut Gradients, max_norm: f64) {
    let mut sq = 0.0;
    for t in grads.tensors() {
        for v in t.as_slice() {
            sq += v * v;
        }
    }
    let norm = sq.sqrt();
    if norm > max_norm && norm > 0.0 {
        grads.scale(max_norm / norm);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::{init_weights, ModelConfig};
    use crate::rng::SplitRng;

    fn cfg(hidden: usize, fc: usize, seed: u64) -> ModelConfig {
        ModelConfig {
            hidden_dim: hidden,
            fc_dim: fc,
            seed,
            ..Default::default()
        }
    }

    #[test]
    fn zero_weights_pin_the_output() {
        let config = cfg(16, 32, 0);
        let w = LstmWeights::zeros(&config);
        let (pred, _) = forward(&w, &config, &[0.3, 1.7, 0.2]).unwrap();
        assert!((pred.mu - 2f64.ln()).abs() < 1e-15);
        assert!((pred.beta - 0.5).abs() < 1e-15);
    }

    #[test]
    fn single_cell_matches_hand_arithmetic() {
        // hidden_dim = 2, seq_len = 1: the whole computation is redone below
        // with scalar arithmetic, independent of the matrix code paths.
        let config = cfg(2, 2, 0);
        let mut w = LstmWeights::zeros(&config);
        let x = 0.7;
        // input weights per gate, recurrent irrelevant at t=1 (h0 = 0)
        w.w_ii.as_mut_slice().copy_from_slice(&[0.1, -0.2]);
        w.w_if.as_mut_slice().copy_from_slice(&[0.3, 0.05]);
        w.w_ig.as_mut_slice().copy_from_slice(&[-0.4, 0.25]);
        w.w_io.as_mut_slice().copy_from_slice(&[0.15, -0.1]);
        w.b_ii.as_mut_slice().copy_from_slice(&[0.01, 0.02]);
        w.b_hi.as_mut_slice().copy_from_slice(&[0.03, -0.01]);
        w.b_if.as_mut_slice().copy_from_slice(&[-0.02, 0.04]);
        w.b_hf.as_mut_slice().copy_from_slice(&[0.05, 0.0]);
        w.b_ig.as_mut_slice().copy_from_slice(&[0.0, -0.03]);
        w.b_hg.as_mut_slice().copy_from_slice(&[0.02, 0.01]);
        w.b_io.as_mut_slice().copy_from_slice(&[-0.01, 0.03]);
        w.b_ho.as_mut_slice().copy_from_slice(&[0.0, 0.02]);
        w.fc1_w
            .as_mut_slice()
            .copy_from_slice(&[0.5, -0.3, 0.2, 0.4]);
        w.fc1_b.as_mut_slice().copy_from_slice(&[0.1, -0.05]);
        w.fc2_w
            .as_mut_slice()
            .copy_from_slice(&[0.6, -0.2, 0.3, 0.7]);
        w.fc2_b.as_mut_slice().copy_from_slice(&[0.05, -0.15]);

        let (pred, _) = forward(&w, &config, &[x]).unwrap();

        let sig = |v: f64| 1.0 / (1.0 + (-v).exp());
        let mut h = [0.0f64; 2];
        for k in 0..2 {
            let i = sig([0.1, -0.2][k] * x + [0.01, 0.02][k] + [0.03, -0.01][k]);
            let f = sig([0.3, 0.05][k] * x + [-0.02, 0.04][k] + [0.05, 0.0][k]);
            let g = ([-0.4, 0.25][k] * x + [0.0, -0.03][k] + [0.02, 0.01][k]).tanh();
            let o = sig([0.15, -0.1][k] * x + [-0.01, 0.03][k] + [0.0, 0.02][k]);
            let c = f * 0.0 + i * g;
            h[k] = o * c.tanh();
        }
        let a1 = (0.5 * h[0] - 0.3 * h[1] + 0.1).max(0.0);
        let a2 = (0.2 * h[0] + 0.4 * h[1] - 0.05).max(0.0);
        let z0 = 0.6 * a1 - 0.2 * a2 + 0.05;
        let z1 = 0.3 * a1 + 0.7 * a2 - 0.15;
        let want_mu = (1.0 + z0.exp()).ln();
        let want_beta = sig(z1);

        assert!((pred.mu - want_mu).abs() < 1e-12);
        assert!((pred.beta - want_beta).abs() < 1e-12);
    }

    #[test]
    fn reversed_sequences_change_the_representation() {
        let config = cfg(8, 8, 7);
        let w = init_weights(&config).unwrap();
        let xs = [0.5, 1.5, 0.2, 3.0, 0.9];
        let rev: Vec<f64> = xs.iter().rev().copied().collect();
        let (a, _) = forward(&w, &config, &xs).unwrap();
        let (b, _) = forward(&w, &config, &rev).unwrap();
        assert!((a.mu - b.mu).abs() > 1e-9 || (a.beta - b.beta).abs() > 1e-9);
    }

    #[test]
    fn forward_rejects_bad_input() {
        let config = cfg(4, 4, 0);
        let w = LstmWeights::zeros(&config);
        assert!(forward(&w, &config, &[]).is_err());
        assert!(forward(&w, &config, &[1.0, f64::NAN]).is_err());
    }

    #[test]
    fn forward_accepts_any_sequence_length() {
        let config = cfg(6, 6, 1);
        let w = init_weights(&config).unwrap();
        for len in [1usize, 2, 173] {
            let xs: Vec<f64> = (0..len).map(|i| (i as f64 * 0.37).sin().abs() + 0.1).collect();
            let (pred, cache) = forward(&w, &config, &xs).unwrap();
            assert_eq!(cache.seq_len(), len);
            assert!(pred.mu > 0.0 && pred.beta > 0.0 && pred.beta < 1.0);
        }
    }

    #[test]
    fn output_ranges_hold_for_random_weights_and_inputs() {
        let mut rng = SplitRng::new(99);
        for seed in 0..20 {
            let config = cfg(5, 7, seed);
            let w = init_weights(&config).unwrap();
            let xs: Vec<f64> = (0..12).map(|_| rng.uniform(-50.0, 50.0)).collect();
            let (pred, _) = forward(&w, &config, &xs).unwrap();
            assert!(pred.mu > 0.0);
            assert!(pred.beta > 0.0 && pred.beta < 1.0);
        }
    }

    #[test]
    fn loss_mse_examples_and_oracle() {
        assert_eq!(
            loss_mse(&[[1.0, 0.5]], &[[1.0, 0.5]]).unwrap(),
            0.0
        );
        // single row, pred (1,0) vs label (0,1): (1 + 1)/2 = 1
        assert_eq!(loss_mse(&[[1.0, 0.0]], &[[0.0, 1.0]]).unwrap(), 1.0);
        assert!(loss_mse(&[[1.0, 0.0]], &[]).is_err());

        let mut rng = SplitRng::new(5);
        let preds: Vec<[f64; 2]> = (0..40).map(|_| [rng.open01(), rng.open01()]).collect();
        let labels: Vec<[f64; 2]> = (0..40).map(|_| [rng.open01(), rng.open01()]).collect();
        // independent re-summation
        let mut brute = 0.0;
        for (p, l) in preds.iter().zip(&labels) {
            brute += (p[0] - l[0]).powi(2);
            brute += (p[1] - l[1]).powi(2);
        }
        brute /= 2.0 * 40.0;
        assert!((loss_mse(&preds, &labels).unwrap() - brute).abs() < 1e-15);
    }

    /// Central-difference audit of every tensor, sampling a handful of
    /// coordinates per tensor.
    fn finite_difference_audit(config: &ModelConfig, xs: &[f64], label: (f64, f64)) -> f64 {
        let w0 = init_weights(config).unwrap();
        let (_, cache) = forward(&w0, config, xs).unwrap();
        let analytic = backward(&w0, config, &cache, label).unwrap();

        let loss_at = |w: &LstmWeights| {
            let (p, _) = forward(w, config, xs).unwrap();
            0.5 * ((p.mu - label.0).powi(2) + (p.beta - label.1).powi(2))
        };

        let h = 1e-5;
        let mut worst: f64 = 0.0;
        let mut rng = SplitRng::new(config.seed ^ 0xabcd);
        for ti in 0..20 {
            let n = analytic.tensors()[ti].len();
            for _ in 0..5.min(n) {
                let ci = rng.below(n as u64) as usize;
                let mut wp = w0.clone();
                wp.tensors_mut()[ti].as_mut_slice()[ci] += h;
                let lp = loss_at(&wp);
                let mut wm = w0.clone();
                wm.tensors_mut()[ti].as_mut_slice()[ci] -= h;
                let lm = loss_at(&wm);
                let numeric = (lp - lm) / (2.0 * h);
                let exact = analytic.tensors()[ti].as_slice()[ci];
                let denom = exact.abs().max(numeric.abs()).max(1e-6);
                worst = worst.max((exact - numeric).abs() / denom);
            }
        }
        worst
    }

    #[test]
    fn gradients_match_finite_differences() {
        let config = cfg(3, 4, 11);
        let xs = [0.8, 0.1, 2.5, 0.4, 1.2];
        let worst = finite_difference_audit(&config, &xs, (1.7, 0.4));
        assert!(worst < 1e-4, "worst relative error {worst}");
    }

    #[test]
    fn gradients_vanish_at_a_stationary_point() {
        let config = cfg(4, 4, 3);
        let w = init_weights(&config).unwrap();
        let xs = [0.5, 1.0, 0.25];
        let (pred, cache) = forward(&w, &config, &xs).unwrap();
        // label equal to the prediction makes the loss exactly stationary
        let grads = backward(&w, &config, &cache, (pred.mu, pred.beta)).unwrap();
        for t in grads.tensors() {
            assert!(t.as_slice().iter().all(|v| v.abs() <= 1e-12));
        }
    }

    #[test]
    fn backward_is_bitwise_deterministic() {
        let config = cfg(5, 6, 13);
        let w = init_weights(&config).unwrap();
        let xs = [1.0, 0.2, 0.7, 3.1];
        let (_, cache) = forward(&w, &config, &xs).unwrap();
        let a = backward(&w, &config, &cache, (2.0, 0.3)).unwrap();
        let b = backward(&w, &config, &cache, (2.0, 0.3)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn backward_rejects_stale_cache() {
        let config = cfg(4, 4, 0);
        let w = init_weights(&config).unwrap();
        let (_, cache) = forward(&w, &config, &[1.0, 2.0]).unwrap();
        let other = cfg(8, 4, 0);
        assert!(backward(&init_weights(&other).unwrap(), &other, &cache, (1.0, 0.5)).is_err());
    }

    #[test]
    fn batch_gradients_are_thread_count_invariant() {
        let config = cfg(4, 4, 21);
        let w = init_weights(&config).unwrap();
        let mut rng = SplitRng::new(2);
        let n = 37;
        let mut data = Vec::new();
        let mut labels = Vec::new();
        for _ in 0..n {
            for _ in 0..10 {
                data.push(rng.uniform(0.05, 3.0));
            }
            labels.extend_from_slice(&[rng.uniform(0.5, 5.0), rng.uniform(0.1, 0.9)]);
        }
        let windows = Mat::from_vec(n, 10, data).unwrap();
        let labels = Mat::from_vec(n, 2, labels).unwrap();
        let idx: Vec<usize> = (0..n).collect();

        let (g1, l1) = batch_gradients(&w, &config, &windows, &labels, &idx).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let (g2, l2) =
            pool.install(|| batch_gradients(&w, &config, &windows, &labels, &idx).unwrap());
        assert_eq!(g1, g2);
        assert_eq!(l1, l2);
        assert!((batch_loss(&w, &config, &windows, &labels, &idx).unwrap() - l1).abs() < 1e-15);
    }

    #[test]
    fn clipping_caps_the_global_norm() {
        let config = cfg(3, 3, 1);
        let mut g = init_weights(&config).unwrap();
        clip_gradients(&mut g, 0.5);
        let mut sq = 0.0;
        for t in g.tensors() {
            sq += t.as_slice().iter().map(|v| v * v).sum::<f64>();
        }
        assert!(sq.sqrt() <= 0.5 + 1e-12);
    }

    #[test]
    fn training_signal_reduces_loss_for_every_seed() {
        // 512-sample toy problem, 200 optimizer steps, >= 50% reduction
        use crate::neural::{adam_step, AdamState};
        use crate::sim::{generate_dataset, DatasetSpec};

        let ds = generate_dataset(&DatasetSpec::new(512, 20, (0.5, 5.0), (0.1, 0.9), 404)).unwrap();
        for seed in 0..5u64 {
            let config = ModelConfig {
                seed,
                ..Default::default()
            };
            let mut w = init_weights(&config).unwrap();
            let mut state = AdamState::new(&config, 1e-3);
            let idx: Vec<usize> = (0..512).collect();
            let initial = batch_loss(&w, &config, &ds.windows, &ds.labels, &idx).unwrap();
            let mut rng = SplitRng::new(seed ^ 0xbeef);
            let mut order = idx.clone();
            for step in 0..200 {
                if step % 8 == 0 {
                    rng.shuffle(&mut order);
                }
                let lo = (step % 8) * 64;
                let batch = &order[lo..lo + 64];
                let (g, _) = batch_gradients(&w, &config, &ds.windows, &ds.labels, batch).unwrap();
                adam_step(&mut w, &g, &mut state).unwrap();
            }
            let fin = batch_loss(&w, &config, &ds.windows, &ds.labels, &idx).unwrap();
            assert!(
                fin <= 0.5 * initial,
                "seed {seed}: {initial} -> {fin} (less than 50% reduction)"
            );
        }
    }
}
