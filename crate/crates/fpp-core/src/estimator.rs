//! Interchangeable `(mu, beta)` window estimators behind a common trait.
//!
//! Two strategies ship by default: `mom` (log-moment matching, no training)
//! and `lstm` (a trained sequence regressor). They are registered by name
//! and selected at runtime, so comparisons, studies and the CLI treat them
//! uniformly.

use crate::linalg::Mat;
use crate::mom::{mom_estimate, ClipPolicy};
use crate::neural::TrainedModel;
use crate::{Error, Result};
use rayon::prelude::*;
use std::path::PathBuf;

/// A point estimate of the parameter pair for one window.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct ParamEstimate {
    pub mu: f64,
    pub beta: f64,
    /// False when the strategy could not produce a trustworthy estimate
    /// (degenerate window, saturated clamp, ...).
    pub valid: bool,
}

/// Strategy interface: estimate `(mu, beta)` from a window of waiting times.
pub trait WindowEstimator: Send + Sync {
    fn name(&self) -> &str;

    fn estimate(&self, window: &[f64]) -> Result<ParamEstimate>;

    /// Batched estimation; the default fans rows out in fixed chunks and
    /// preserves input order.
    fn estimate_batch(&self, windows: &Mat) -> Result<Vec<ParamEstimate>> {
        let rows: Vec<&[f64]> = windows.iter_rows().collect();
        let chunks: Vec<Vec<ParamEstimate>> = rows
            .par_chunks(16)
            .map(|chunk| chunk.iter().map(|row| self.estimate(row)).collect())
            .collect::<Result<_>>()?;
        Ok(chunks.into_iter().flatten().collect())
    }
}

/// Log-moment estimator strategy.
pub struct MomEstimator {
    pub clip: ClipPolicy,
}

impl MomEstimator {
    pub fn new(clip: ClipPolicy) -> Self {
        Self { clip }
    }
}

impl WindowEstimator for MomEstimator {
    fn name(&self) -> &str {
        "mom"
    }

    fn estimate(&self, window: &[f64]) -> Result<ParamEstimate> {
        let est = mom_estimate(window, &self.clip);
        Ok(ParamEstimate {
            mu: est.mu_hat,
            beta: est.beta_hat,
            valid: est.valid,
        })
    }
}

/// Trained-network strategy.
pub struct LstmEstimator {
    pub model: TrainedModel,
}

impl LstmEstimator {
    pub fn new(model: TrainedModel) -> Self {
        Self { model }
    }
}

impl WindowEstimator for LstmEstimator {
    fn name(&self) -> &str {
        "lstm"
    }

    fn estimate(&self, window: &[f64]) -> Result<ParamEstimate> {
        let pred = self.model.predict(window)?;
        Ok(ParamEstimate {
            mu: pred.mu,
            beta: pred.beta,
            valid: true,
        })
    }

    fn estimate_batch(&self, windows: &Mat) -> Result<Vec<ParamEstimate>> {
        Ok(self
            .model
            .predict_batch(windows)?
            .into_iter()
            .map(|p| ParamEstimate {
                mu: p.mu,
                beta: p.beta,
                valid: true,
            })
            .collect())
    }
}

/// Everything a factory may need to build a strategy.
#[derive(Debug, Clone, Default)]
pub struct EstimatorContext {
    pub clip: ClipPolicy,
    /// Model file for strategies that need trained weights.
    pub model_path: Option<PathBuf>,
}

type Factory = fn(&EstimatorContext) -> Result<Box<dyn WindowEstimator>>;

fn build_mom(ctx: &EstimatorContext) -> Result<Box<dyn WindowEstimator>> {
    Ok(Box::new(MomEstimator::new(ctx.clip)))
}

fn build_lstm(ctx: &EstimatorContext) -> Result<Box<dyn WindowEstimator>> {
    let path = ctx.model_path.as_ref().ok_or_else(|| {
        Error::Config("estimator 'lstm' requires a model file (--model)".into())
    })?;
    let (config, weights, _) = crate::neural::load_model(path)?;
    Ok(Box::new(LstmEstimator::new(TrainedModel { config, weights })))
}

/// Name -> factory table, default strategy first.
pub const REGISTRY: [(&str, Factory); 2] = [("lstm", build_lstm), ("mom", build_mom)];

pub fn estimator_names() -> Vec<&'static str> {
    REGISTRY.iter().map(|(n, _)| *n).collect()
}

/// Build a registered strategy by name.
pub fn build_estimator(name: &str, ctx: &EstimatorContext) -> Result<Box<dyn WindowEstimator>> {
    for (n, f) in REGISTRY {
        if n == name {
            return f(ctx);
        }
    }
    Err(Error::Config(format!(
        "unknown estimator '{name}' (available: {})",
        estimator_names().join(", ")
    )))
}
