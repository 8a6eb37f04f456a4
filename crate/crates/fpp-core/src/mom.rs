//! Log-moment estimator for `(mu, beta)` from a window of waiting times.
//!
//! For Mittag-Leffler waiting times the log moments satisfy
//!
//! ```text
//! E[ln T]   = -C - ln(mu)/beta          (C = Euler-Mascheroni)
//! Var[ln T] = (pi^2/6) (2/beta^2 - 1)
//! ```
//!
//! Inverting the variance identity gives the estimator
//! `beta_hat = pi / sqrt(3 s^2 + pi^2/2)` with `s^2` the unbiased sample
//! variance of `ln T`, and then `mu_hat = exp(-beta_hat (mean(ln T) + C))`.
//! At `beta = 1`, `Var[ln T] = pi^2/6` and the estimator recovers 1 exactly
//! in the limit.

use crate::linalg::Mat;
use crate::special::EULER_GAMMA;
use std::f64::consts::PI;

/// Numerical guards applied before and after estimation.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct ClipPolicy {
    /// Waiting times outside [t_min, t_max] are dropped before taking logs.
    pub t_min: f64,
    pub t_max: f64,
    /// `beta_hat` is clamped into [beta_min, beta_max].
    pub beta_min: f64,
    pub beta_max: f64,
}

impl Default for ClipPolicy {
    fn default() -> Self {
        Self {
            t_min: 1e-12,
            t_max: 1e12,
            beta_min: 0.01,
            beta_max: 1.0,
        }
    }
}

/// Why an estimate was marked invalid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MomStatus {
    Ok,
    /// The window contains a value <= 0.
    NonPositive,
    /// Fewer than three usable values after filtering.
    TooFew,
    /// All retained log values are identical.
    ZeroLogVariance,
    /// The beta clamp saturated; numbers are still returned for labeling.
    ClampSaturated,
}

/// Method-of-moments estimate for one window.
///
/// `valid == false` never raises; degenerate windows still return whatever
/// numbers are computable (NaN when nothing is) so labeling pipelines can
/// decide for themselves, while accuracy studies filter on the flag.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct MomEstimate {
    pub mu_hat: f64,
    /// Clamped into the policy range.
    pub beta_hat: f64,
    /// Pre-clamp value of the beta estimator.
    pub beta_hat_raw: f64,
    pub n_used: usize,
    pub valid: bool,
    pub status: MomStatus,
}

impl MomEstimate {
    fn invalid(status: MomStatus, n_used: usize) -> Self {
        Self {
            mu_hat: f64::NAN,
            beta_hat: f64::NAN,
            beta_hat_raw: f64::NAN,
            n_used,
            valid: false,
            status,
        }
    }
}

/// Estimate `(mu, beta)` from one window of waiting times.
pub fn mom_estimate(inter_arrivals: &[f64], clip: &ClipPolicy) -> MomEstimate {
    if inter_arrivals
        .iter()
        .any(|&t| !t.is_finite() || t <= 0.0)
    {
        return MomEstimate::invalid(MomStatus::NonPositive, 0);
    }
    let logs: Vec<f64> = inter_arrivals
        .iter()
        .copied()
        .filter(|&t| t >= clip.t_min && t <= clip.t_max)
        .map(f64::ln)
        .collect();
    let n = logs.len();
    if n < 3 {
        return MomEstimate::invalid(MomStatus::TooFew, n);
    }

    let mean = logs.iter().sum::<f64>() / n as f64;
    // unbiased (n-1) variance; the denominator choice is material at n = 10
    let s2 = logs.iter().map(|l| (l - mean) * (l - mean)).sum::<f64>() / (n - 1) as f64;

    if s2 == 0.0 {
        let mut est = MomEstimate::invalid(MomStatus::ZeroLogVariance, n);
        // still computable: beta saturates the upper clamp
        est.beta_hat_raw = PI / (PI * PI / 2.0).sqrt();
        est.beta_hat = clip.beta_max;
        est.mu_hat = (-est.beta_hat * (mean + EULER_GAMMA)).exp();
        return est;
    }

    let beta_raw = PI / (3.0 * s2 + PI * PI / 2.0).sqrt();
    let beta = beta_raw.clamp(clip.beta_min, clip.beta_max);
    let saturated = beta != beta_raw;
    let mu = (-beta * (mean + EULER_GAMMA)).exp();

    MomEstimate {
        mu_hat: mu,
        beta_hat: beta,
        beta_hat_raw: beta_raw,
        n_used: n,
        valid: !saturated && mu.is_finite() && mu > 0.0,
        status: if saturated {
            MomStatus::ClampSaturated
        } else {
            MomStatus::Ok
        },
    }
}

/// Row-wise estimation over a window matrix. Invalid rows are flagged in
/// place, never dropped.
pub fn mom_estimate_windows(windows: &Mat, clip: &ClipPolicy) -> Vec<MomEstimate> {
    windows.iter_rows().map(|w| mom_estimate(w, clip)).collect()
}

/// Valid/invalid counts for a batch of estimates.
#[derive(Debug, Clone, Copy, Default, serde::Serialize)]
pub struct MomSummary {
    pub n_valid: usize,
    pub n_invalid: usize,
}

pub fn summarize(estimates: &[MomEstimate]) -> MomSummary {
    let n_valid = estimates.iter().filter(|e| e.valid).count();
    MomSummary {
        n_valid,
        n_invalid: estimates.len() - n_valid,
    }
}
