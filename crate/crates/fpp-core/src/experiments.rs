//! Experiment orchestration: train/validation loop, evaluation metrics,
//! the MOM baseline comparison, the sampling-distribution study, and
//! hyperparameter ablations, plus the report files they emit.

use crate::dataset::LabeledDataset;
use crate::estimator::{LstmEstimator, MomEstimator, ParamEstimate, WindowEstimator};
use crate::linalg::Mat;
use crate::mom::ClipPolicy;
use crate::neural::{
    adam_step, batch_gradients, batch_loss, clip_gradients, init_weights, AdamState, LstmWeights,
    ModelConfig, TrainedModel,
};
use crate::rng::SplitRng;
use crate::sim::{generate_dataset, DatasetSpec, FppParams, KanterSampler};
use crate::{Error, Result};
use serde::Serialize;
use std::fs;
use std::path::Path;
use std::time::Instant;

/// Training protocol parameters.
#[derive(Debug, Clone, Serialize)]
pub struct TrainSpec {
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub split_fraction: f64,
    pub shuffle_seed: u64,
    /// Optional global L2 gradient clip for ill-scaled real data.
    pub grad_clip: Option<f64>,
    /// Feed `ln` of the waiting times instead of raw values. Off by default
    /// and excluded from headline runs.
    pub log_transform_inputs: bool,
}

impl Default for TrainSpec {
    fn default() -> Self {
        Self {
            epochs: 100,
            lr: 1e-3,
            batch_size: 64,
            split_fraction: 0.8,
            shuffle_seed: 0,
            grad_clip: None,
            log_transform_inputs: false,
        }
    }
}

impl TrainSpec {
    pub fn validate(&self) -> Result<()> {
        if self.epochs < 1 {
            return Err(Error::Config("epochs must be >= 1".into()));
        }
        if !(self.split_fraction > 0.0 && self.split_fraction < 1.0) {
            return Err(Error::Config("split_fraction must lie in (0, 1)".into()));
        }
        if self.batch_size < 1 {
            return Err(Error::Config("batch_size must be >= 1".into()));
        }
        if !self.lr.is_finite() || self.lr <= 0.0 {
            return Err(Error::Config("lr must be finite and > 0".into()));
        }
        Ok(())
    }
}

/// Per-epoch train and validation loss.
#[derive(Debug, Clone, Serialize)]
pub struct LossCurves {
    pub train: Vec<f64>,
    pub val: Vec<f64>,
}

pub struct TrainOutcome {
    /// Weights from the epoch with the lowest validation loss.
    pub model: TrainedModel,
    /// Weights after the final epoch.
    pub final_model: TrainedModel,
    /// 1-based epoch of the retained checkpoint.
    pub best_epoch: usize,
    pub curves: LossCurves,
    pub wall_clock_train_s: f64,
    pub train_idx: Vec<usize>,
    pub test_idx: Vec<usize>,
}

/// Deterministic shuffled split of `0..n`.
pub fn split_indices(n: usize, fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    SplitRng::new(seed).derive(0x5b117).shuffle(&mut idx);
    let cut = ((n as f64) * fraction).floor() as usize;
    let test = idx.split_off(cut);
    (idx, test)
}

fn transformed_windows(dataset: &LabeledDataset, spec: &TrainSpec) -> Result<Option<Mat>> {
    if !spec.log_transform_inputs {
        return Ok(None);
    }
    let mut m = dataset.windows.clone();
    for v in m.as_mut_slice() {
        if *v <= 0.0 {
            return Err(Error::Numerical(
                "log transform requires strictly positive inputs".into(),
            ));
        }
        *v = v.ln();
    }
    Ok(Some(m))
}

/// Train on the 80% split, track validation loss on the held-out 20%, and
/// retain the best-validation checkpoint alongside the final model.
pub fn train(
    dataset: &LabeledDataset,
    config: &ModelConfig,
    spec: &TrainSpec,
) -> Result<TrainOutcome> {
    dataset.validate()?;
    spec.validate()?;
    config.validate()?;

    let transformed = transformed_windows(dataset, spec)?;
    let windows = transformed.as_ref().unwrap_or(&dataset.windows);
    let labels = &dataset.labels;

    let (train_idx, test_idx) = split_indices(dataset.n_samples(), spec.split_fraction, spec.shuffle_seed);
    if train_idx.is_empty() || test_idx.is_empty() {
        return Err(Error::Config(format!(
            "split produced {} train / {} validation rows; need both non-empty",
            train_idx.len(),
            test_idx.len()
        )));
    }

    let started = Instant::now();
    let mut weights = init_weights(config)?;
    let mut state = AdamState::new(config, spec.lr);
    let shuffle_root = SplitRng::new(spec.shuffle_seed);

    let mut curves = LossCurves {
        train: Vec::with_capacity(spec.epochs),
        val: Vec::with_capacity(spec.epochs),
    };
    let mut best: Option<(f64, usize, LstmWeights)> = None;

    for epoch in 0..spec.epochs {
        let mut order = train_idx.clone();
        shuffle_root.derive(epoch as u64 + 1).shuffle(&mut order);

        let mut epoch_loss = 0.0;
        for batch in order.chunks(spec.batch_size) {
            let (mut grads, loss) = batch_gradients(&weights, config, windows, labels, batch)?;
            if !loss.is_finite() {
                return Err(Error::Diverged {
                    epoch: epoch + 1,
                    detail: format!("batch loss became {loss}"),
                });
            }
            if let Some(max_norm) = spec.grad_clip {
                clip_gradients(&mut grads, max_norm);
            }
            adam_step(&mut weights, &grads, &mut state)?;
            epoch_loss += loss * batch.len() as f64;
        }
        epoch_loss /= train_idx.len() as f64;

        let val_loss = batch_loss(&weights, config, windows, labels, &test_idx)?;
        if !val_loss.is_finite() {
            return Err(Error::Diverged {
                epoch: epoch + 1,
                detail: format!("validation loss became {val_loss}"),
            });
        }
        curves.train.push(epoch_loss);
        curves.val.push(val_loss);

        if best.as_ref().map_or(true, |(b, _, _)| val_loss < *b) {
            best = Some((val_loss, epoch + 1, weights.clone()));
        }
    }

    let (_, best_epoch, best_weights) = best.expect("at least one epoch ran");
    Ok(TrainOutcome {
        model: TrainedModel {
            config: *config,
            weights: best_weights,
        },
        final_model: TrainedModel {
            config: *config,
            weights,
        },
        best_epoch,
        curves,
        wall_clock_train_s: started.elapsed().as_secs_f64(),
        train_idx,
        test_idx,
    })
}

/// MSE family for one target (or pooled over both).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ParamMetrics {
    pub mse: f64,
    pub rmse: f64,
    pub mae: f64,
    pub r2: f64,
}

fn metrics_from(errors: &[f64], labels: &[f64]) -> ParamMetrics {
    let n = errors.len() as f64;
    let mse = errors.iter().map(|e| e * e).sum::<f64>() / n;
    let mae = errors.iter().map(|e| e.abs()).sum::<f64>() / n;
    let mean_label = labels.iter().sum::<f64>() / n;
    let ss_tot: f64 = labels.iter().map(|l| (l - mean_label) * (l - mean_label)).sum();
    let ss_res: f64 = errors.iter().map(|e| e * e).sum();
    let r2 = if ss_tot > 0.0 {
        1.0 - ss_res / ss_tot
    } else if ss_res == 0.0 {
        1.0
    } else {
        f64::NEG_INFINITY
    };
    ParamMetrics {
        mse,
        rmse: mse.sqrt(),
        mae,
        r2,
    }
}

/// Evaluation of one estimator on a set of labeled windows.
///
/// Pooled metrics average the squared/absolute errors over both output
/// coordinates on their raw scales; pooled R^2 sums residual and total
/// squared deviations over both coordinates (each around its own label
/// mean) before taking the ratio.
#[derive(Debug, Clone, Serialize)]
pub struct EvalReport {
    pub estimator: String,
    pub overall: ParamMetrics,
    pub mu: ParamMetrics,
    pub beta: ParamMetrics,
    pub wall_clock_train_s: Option<f64>,
    /// Median wall-clock seconds to run one batch of inference.
    pub wall_clock_infer_per_batch_s: f64,
    pub n_test: usize,
    /// Rows the estimator flagged invalid (excluded from the metrics).
    pub n_invalid: usize,
}

impl EvalReport {
    pub fn with_train_time(mut self, seconds: f64) -> Self {
        self.wall_clock_train_s = Some(seconds);
        self
    }
}

fn subset(windows: &Mat, labels: &Mat, idx: &[usize]) -> (Mat, Mat) {
    let mut w = Mat::zeros(idx.len(), windows.cols());
    let mut l = Mat::zeros(idx.len(), labels.cols());
    for (r, &i) in idx.iter().enumerate() {
        w.row_mut(r).copy_from_slice(windows.row(i));
        l.row_mut(r).copy_from_slice(labels.row(i));
    }
    (w, l)
}

/// Evaluate an estimator on the selected rows.
pub fn evaluate(
    estimator: &dyn WindowEstimator,
    windows: &Mat,
    labels: &Mat,
    idx: &[usize],
    batch_size: usize,
) -> Result<EvalReport> {
    if idx.is_empty() {
        return Err(Error::Config("evaluate: empty test set".into()));
    }
    let (w, l) = subset(windows, labels, idx);

    // per-batch inference timing (median across batches of one pass)
    let mut batch_times = Vec::new();
    let mut estimates: Vec<ParamEstimate> = Vec::with_capacity(idx.len());
    let bs = batch_size.max(1);
    let mut r = 0;
    while r < w.rows() {
        let hi = (r + bs).min(w.rows());
        let (bw, _) = subset(&w, &l, &(r..hi).collect::<Vec<_>>());
        let t0 = Instant::now();
        let ests = estimator.estimate_batch(&bw)?;
        batch_times.push(t0.elapsed().as_secs_f64());
        estimates.extend(ests);
        r = hi;
    }

    let mut e_mu = Vec::new();
    let mut e_beta = Vec::new();
    let mut l_mu = Vec::new();
    let mut l_beta = Vec::new();
    let mut n_invalid = 0usize;
    for (est, row) in estimates.iter().zip(l.iter_rows()) {
        if !est.valid || !est.mu.is_finite() || !est.beta.is_finite() {
            n_invalid += 1;
            continue;
        }
        e_mu.push(est.mu - row[0]);
        e_beta.push(est.beta - row[1]);
        l_mu.push(row[0]);
        l_beta.push(row[1]);
    }
    if e_mu.is_empty() {
        return Err(Error::Numerical(
            "evaluate: estimator produced no valid estimates".into(),
        ));
    }

    let mu_m = metrics_from(&e_mu, &l_mu);
    let beta_m = metrics_from(&e_beta, &l_beta);
    let pooled_errors: Vec<f64> = e_mu.iter().chain(e_beta.iter()).copied().collect();
    let n = e_mu.len() as f64;
    let mean_mu = l_mu.iter().sum::<f64>() / n;
    let mean_beta = l_beta.iter().sum::<f64>() / n;
    let ss_tot: f64 = l_mu.iter().map(|v| (v - mean_mu) * (v - mean_mu)).sum::<f64>()
        + l_beta
            .iter()
            .map(|v| (v - mean_beta) * (v - mean_beta))
            .sum::<f64>();
    let ss_res: f64 = pooled_errors.iter().map(|e| e * e).sum();
    let pooled_mse = ss_res / pooled_errors.len() as f64;
    let overall = ParamMetrics {
        mse: pooled_mse,
        rmse: pooled_mse.sqrt(),
        mae: pooled_errors.iter().map(|e| e.abs()).sum::<f64>() / pooled_errors.len() as f64,
        r2: if ss_tot > 0.0 {
            1.0 - ss_res / ss_tot
        } else {
            f64::NEG_INFINITY
        },
    };

    Ok(EvalReport {
        estimator: estimator.name().to_string(),
        overall,
        mu: mu_m,
        beta: beta_m,
        wall_clock_train_s: None,
        wall_clock_infer_per_batch_s: crate::stats::median(&batch_times),
        n_test: idx.len(),
        n_invalid,
    })
}

/// One side of the estimator comparison.
#[derive(Debug, Clone, Serialize)]
pub struct ComparisonSide {
    pub name: String,
    pub mse: f64,
    pub mse_mu: f64,
    pub mse_beta: f64,
    /// Median seconds for one full pass over the comparison windows.
    pub median_batch_seconds: f64,
    pub n_used: usize,
    pub n_invalid: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct ComparisonReport {
    pub lstm: ComparisonSide,
    pub mom: ComparisonSide,
    /// `1 - mse_lstm / mse_mom`; NaN when the baseline failed entirely.
    pub improvement: f64,
    /// `mom_time / lstm_time`; > 1 means the network infers faster.
    pub time_ratio: f64,
    pub n_windows: usize,
    pub mom_all_invalid: bool,
    pub timing_reps: usize,
}

fn side_metrics(
    name: &str,
    estimates: &[ParamEstimate],
    labels: &Mat,
    median_batch_seconds: f64,
) -> ComparisonSide {
    let mut se_mu = 0.0;
    let mut se_beta = 0.0;
    let mut used = 0usize;
    for (est, row) in estimates.iter().zip(labels.iter_rows()) {
        if !est.valid || !est.mu.is_finite() || !est.beta.is_finite() {
            continue;
        }
        se_mu += (est.mu - row[0]) * (est.mu - row[0]);
        se_beta += (est.beta - row[1]) * (est.beta - row[1]);
        used += 1;
    }
    let (mse_mu, mse_beta) = if used > 0 {
        (se_mu / used as f64, se_beta / used as f64)
    } else {
        (f64::NAN, f64::NAN)
    };
    ComparisonSide {
        name: name.to_string(),
        mse: 0.5 * (mse_mu + mse_beta),
        mse_mu,
        mse_beta,
        median_batch_seconds,
        n_used: used,
        n_invalid: estimates.len() - used,
    }
}

/// Run both strategies over identical windows, with timing medians over
/// `timing_reps` full passes (at least 20).
pub fn compare_with_mom(
    estimator: &dyn WindowEstimator,
    windows: &Mat,
    labels: &Mat,
    idx: &[usize],
    clip: &ClipPolicy,
    timing_reps: usize,
) -> Result<ComparisonReport> {
    if idx.is_empty() {
        return Err(Error::Config("compare_with_mom: empty window set".into()));
    }
    let reps = timing_reps.max(20);
    let (w, l) = subset(windows, labels, idx);
    let mom = MomEstimator::new(*clip);

    let time_passes = |est: &dyn WindowEstimator| -> Result<(Vec<ParamEstimate>, f64)> {
        let mut times = Vec::with_capacity(reps);
        let mut out = None;
        for _ in 0..reps {
            let t0 = Instant::now();
            let e = est.estimate_batch(&w)?;
            times.push(t0.elapsed().as_secs_f64());
            out = Some(e);
        }
        Ok((out.unwrap(), crate::stats::median(&times)))
    };

    let (lstm_est, lstm_time) = time_passes(estimator)?;
    let (mom_est, mom_time) = time_passes(&mom)?;

    let lstm_side = side_metrics(estimator.name(), &lstm_est, &l, lstm_time);
    let mom_side = side_metrics("mom", &mom_est, &l, mom_time);
    let mom_all_invalid = mom_side.n_used == 0;
    let improvement = if mom_all_invalid {
        f64::NAN
    } else {
        1.0 - lstm_side.mse / mom_side.mse
    };

    Ok(ComparisonReport {
        improvement,
        time_ratio: mom_time / lstm_time,
        n_windows: idx.len(),
        mom_all_invalid,
        timing_reps: reps,
        lstm: lstm_side,
        mom: mom_side,
    })
}

/// Mean/sd of the estimates one strategy produces across repeated paths.
#[derive(Debug, Clone, Serialize)]
pub struct EstimatorStudy {
    pub name: String,
    pub mean_mu: f64,
    /// Absent when fewer than two valid estimates exist.
    pub sd_mu: Option<f64>,
    pub mean_beta: f64,
    pub sd_beta: Option<f64>,
    pub n_paths: usize,
    pub n_invalid: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct StudyReport {
    pub true_mu: f64,
    pub true_beta: f64,
    pub n_paths: usize,
    pub seq_len: usize,
    pub estimators: Vec<EstimatorStudy>,
}

/// Sampling distribution of the estimators at a fixed parameter point:
/// generate `n_paths` windows of `seq_len` waiting times and summarize each
/// strategy's estimates.
pub fn sampling_distribution_study(
    params: &FppParams,
    n_paths: usize,
    seq_len: usize,
    estimators: &[&dyn WindowEstimator],
    seed: u64,
) -> Result<StudyReport> {
    if n_paths == 0 || seq_len < 2 {
        return Err(Error::Config(
            "sampling study needs n_paths >= 1 and seq_len >= 2".into(),
        ));
    }
    let root = SplitRng::new(seed);
    let mut windows = Mat::zeros(n_paths, seq_len);
    for i in 0..n_paths {
        let mut rng = root.derive(i as u64);
        for j in 0..seq_len {
            *windows.at_mut(i, j) =
                crate::sim::draw_interarrival(&KanterSampler, params, &mut rng)?;
        }
    }

    let mut out = Vec::new();
    for est in estimators {
        let estimates = est.estimate_batch(&windows)?;
        let mus: Vec<f64> = estimates
            .iter()
            .filter(|e| e.valid && e.mu.is_finite() && e.beta.is_finite())
            .map(|e| e.mu)
            .collect();
        let betas: Vec<f64> = estimates
            .iter()
            .filter(|e| e.valid && e.mu.is_finite() && e.beta.is_finite())
            .map(|e| e.beta)
            .collect();
        let sd = |xs: &[f64]| {
            if xs.len() >= 2 {
                Some(crate::stats::std_dev(xs))
            } else {
                None
            }
        };
        out.push(EstimatorStudy {
            name: est.name().to_string(),
            mean_mu: crate::stats::mean(&mus),
            sd_mu: sd(&mus),
            mean_beta: crate::stats::mean(&betas),
            sd_beta: sd(&betas),
            n_paths,
            n_invalid: n_paths - mus.len(),
        });
    }

    Ok(StudyReport {
        true_mu: params.mu(),
        true_beta: params.beta(),
        n_paths,
        seq_len,
        estimators: out,
    })
}

/// Sweepable hyperparameter axes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AblationAxis {
    Epochs,
    Samples,
    SeqLen,
    Lr,
    Hidden,
    Batch,
}

impl std::str::FromStr for AblationAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "epochs" => Ok(Self::Epochs),
            "samples" => Ok(Self::Samples),
            "seq_len" | "seq-len" => Ok(Self::SeqLen),
            "lr" => Ok(Self::Lr),
            "hidden" => Ok(Self::Hidden),
            "batch" => Ok(Self::Batch),
            other => Err(Error::Config(format!(
                "unknown ablation axis '{other}' (epochs, samples, seq_len, lr, hidden, batch)"
            ))),
        }
    }
}

impl std::fmt::Display for AblationAxis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Self::Epochs => "epochs",
            Self::Samples => "samples",
            Self::SeqLen => "seq_len",
            Self::Lr => "lr",
            Self::Hidden => "hidden",
            Self::Batch => "batch",
        };
        f.write_str(s)
    }
}

/// Everything held fixed across ablation cells.
#[derive(Debug, Clone)]
pub struct AblationBase {
    pub dataset: DatasetSpec,
    pub model: ModelConfig,
    pub train: TrainSpec,
}

#[derive(Debug, Serialize)]
pub struct AblationRow {
    pub value: f64,
    pub report: EvalReport,
}

#[derive(Debug, Serialize)]
pub struct AblationGrid {
    pub axis: AblationAxis,
    pub rows: Vec<AblationRow>,
}

fn integral_value(axis: AblationAxis, v: f64, min: usize) -> Result<usize> {
    if !v.is_finite() || v.fract() != 0.0 || v < min as f64 {
        return Err(Error::Config(format!(
            "ablation axis {axis} requires integer values >= {min}, got {v}"
        )));
    }
    Ok(v as usize)
}

/// Train/evaluate one cell per value, holding everything else at `base`.
/// Cell seeds are the base seeds, so the axis value is the only difference
/// between cells.
pub fn run_ablation(
    axis: AblationAxis,
    values: &[f64],
    base: &AblationBase,
) -> Result<AblationGrid> {
    if values.is_empty() {
        return Err(Error::Config("ablation needs at least one value".into()));
    }
    if values.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config(
            "ablation values must be strictly increasing".into(),
        ));
    }

    let mut rows = Vec::with_capacity(values.len());
    for &v in values {
        let mut dataset_spec = base.dataset.clone();
        let mut model = base.model;
        let mut train_spec = base.train.clone();
        match axis {
            AblationAxis::Epochs => train_spec.epochs = integral_value(axis, v, 1)?,
            AblationAxis::Samples => dataset_spec.n_samples = integral_value(axis, v, 2)?,
            AblationAxis::SeqLen => dataset_spec.seq_len = integral_value(axis, v, 2)?,
            AblationAxis::Lr => {
                if !(v.is_finite() && v > 0.0) {
                    return Err(Error::Config(format!("invalid learning rate {v}")));
                }
                train_spec.lr = v;
            }
            AblationAxis::Hidden => model.hidden_dim = integral_value(axis, v, 1)?,
            AblationAxis::Batch => train_spec.batch_size = integral_value(axis, v, 1)?,
        }

        let dataset = generate_dataset(&dataset_spec)?;
        let outcome = train(&dataset, &model, &train_spec)?;
        let est = LstmEstimator::new(outcome.model);
        let report = evaluate(
            &est,
            &dataset.windows,
            &dataset.labels,
            &outcome.test_idx,
            train_spec.batch_size,
        )?
        .with_train_time(outcome.wall_clock_train_s);
        rows.push(AblationRow { value: v, report });
    }

    Ok(AblationGrid { axis, rows })
}

/// `report.json`
pub fn write_report_json(path: &Path, report: &EvalReport) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(report)? + "\n")?;
    Ok(())
}

/// `comparison.json`
pub fn write_comparison_json(path: &Path, report: &ComparisonReport) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(report)? + "\n")?;
    Ok(())
}

/// `study.json`
pub fn write_study_json(path: &Path, report: &StudyReport) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(report)? + "\n")?;
    Ok(())
}

/// `loss_curve.csv` with columns `epoch,train_loss,val_loss`.
pub fn write_loss_curve_csv(path: &Path, curves: &LossCurves) -> Result<()> {
    let mut out = String::from("epoch,train_loss,val_loss\n");
    for (e, (t, v)) in curves.train.iter().zip(&curves.val).enumerate() {
        out.push_str(&format!("{},{},{}\n", e + 1, t, v));
    }
    fs::write(path, out)?;
    Ok(())
}

/// `ablation_<axis>.csv` with columns `value,rmse,mae,r2` (pooled metrics).
pub fn write_ablation_csv(path: &Path, grid: &AblationGrid) -> Result<()> {
    let mut out = String::from("value,rmse,mae,r2\n");
    for row in &grid.rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            row.value, row.report.overall.rmse, row.report.overall.mae, row.report.overall.r2
        ));
    }
    fs::write(path, out)?;
    Ok(())
}
