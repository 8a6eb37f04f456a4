//! Mittag-Leffler inter-arrival sampling and FPP path / dataset generation.
//!
//! The default sampler composes an exponential draw with Kanter's one-sided
//! stable generator: with `U1, U2, U3` uniform on (0, 1),
//!
//! ```text
//! S = sin(beta pi U2) * sin((1-beta) pi U2)^(1/beta - 1)
//!     / ( sin(pi U2)^(1/beta) * |ln U3|^(1/beta - 1) )
//! T = |ln U1|^(1/beta) / mu^(1/beta) * S
//! ```
//!
//! so that `P(T <= x) = 1 - M_beta(-mu x^beta)`. At `beta = 1` the stable
//! factor collapses to `S = 1` and `T = -ln(U1)/mu` is exponential.
//!
//! A second variant with denominator exponent `1/(beta - 1)` on `|ln U3|`
//! is registered under the name `printed`. That exponent is not consistent
//! with Kanter's generator and the variant fails a Kolmogorov-Smirnov test
//! against the Mittag-Leffler CDF (see `printed_variant_fails_ks` below);
//! it is kept only so the discrepancy stays demonstrable.

use crate::dataset::{DatasetMeta, LabeledDataset};
use crate::linalg::Mat;
use crate::rng::SplitRng;
use crate::{Error, Result};
use rayon::prelude::*;
use std::f64::consts::PI;

/// Smallest admissible fractional index; exponents of order `1/beta` make
/// smaller values numerically explosive and nothing in the supported
/// workflows goes below it.
pub const BETA_FLOOR: f64 = 0.05;

/// Target parameter pair of the fractional Poisson process.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct FppParams {
    mu: f64,
    beta: f64,
}

impl FppParams {
    pub fn new(mu: f64, beta: f64) -> Result<Self> {
        if !mu.is_finite() || mu <= 0.0 {
            return Err(Error::Config(format!("mu must be > 0, got {mu}")));
        }
        if !beta.is_finite() || !(BETA_FLOOR..=1.0).contains(&beta) {
            return Err(Error::Config(format!(
                "beta must be in [{BETA_FLOOR}, 1], got {beta}"
            )));
        }
        Ok(Self { mu, beta })
    }

    #[inline]
    pub fn mu(&self) -> f64 {
        self.mu
    }

    #[inline]
    pub fn beta(&self) -> f64 {
        self.beta
    }
}

/// One simulated FPP path: positive waiting times and their cumulative sums.
#[derive(Debug, Clone)]
pub struct EventPath {
    pub inter_arrivals: Vec<f64>,
    pub event_times: Vec<f64>,
    /// Generating parameters; absent for paths built from real data.
    pub params: Option<FppParams>,
}

impl EventPath {
    /// Number of events with `event_time <= t`.
    pub fn count_up_to(&self, t: f64) -> usize {
        self.event_times.partition_point(|&s| s <= t)
    }
}

/// A strategy producing one Mittag-Leffler waiting time from three uniforms.
pub trait InterarrivalSampler: Send + Sync {
    fn name(&self) -> &'static str;
    fn interarrival(&self, params: &FppParams, u1: f64, u2: f64, u3: f64) -> Result<f64>;
}

fn check_open01(u: f64, which: &str) -> Result<()> {
    if !(u > 0.0 && u < 1.0) {
        return Err(Error::Domain(format!(
            "{which} must lie strictly inside (0, 1), got {u}"
        )));
    }
    Ok(())
}

fn compose(params: &FppParams, u1: f64, stable_factor: f64) -> Result<f64> {
    let inv_beta = 1.0 / params.beta;
    let t = (-u1.ln()).powf(inv_beta) / params.mu.powf(inv_beta) * stable_factor;
    if !t.is_finite() || t <= 0.0 {
        return Err(Error::Numerical(format!(
            "inter-arrival draw degenerated to {t} at mu={}, beta={}",
            params.mu, params.beta
        )));
    }
    Ok(t)
}

/// Kanter-consistent sampler (exponent `1/beta - 1` on `|ln U3|`).
#[derive(Debug, Clone, Copy, Default)]
pub struct KanterSampler;

impl InterarrivalSampler for KanterSampler {
    fn name(&self) -> &'static str {
        "kanter"
    }

    fn interarrival(&self, params: &FppParams, u1: f64, u2: f64, u3: f64) -> Result<f64> {
        check_open01(u1, "u1")?;
        check_open01(u2, "u2")?;
        check_open01(u3, "u3")?;
        let beta = params.beta;
        let e = 1.0 / beta - 1.0; // (1 - beta)/beta, zero at beta = 1
        let s = (beta * PI * u2).sin() * ((1.0 - beta) * PI * u2).sin().powf(e)
            / ((PI * u2).sin().powf(1.0 / beta) * (-u3.ln()).abs().powf(e));
        compose(params, u1, s)
    }
}

/// Variant with denominator exponent `1/(beta - 1)`; distributionally wrong
/// for `beta < 1` and excluded from every labeled-data workflow.
#[derive(Debug, Clone, Copy, Default)]
pub struct PrintedExponentSampler;

impl InterarrivalSampler for PrintedExponentSampler {
    fn name(&self) -> &'static str {
        "printed"
    }

    fn interarrival(&self, params: &FppParams, u1: f64, u2: f64, u3: f64) -> Result<f64> {
        check_open01(u1, "u1")?;
        check_open01(u2, "u2")?;
        check_open01(u3, "u3")?;
        let beta = params.beta;
        if beta == 1.0 {
            // the exponent 1/(beta-1) is singular at beta = 1; degrade to the
            // exponential limit the same way the Kanter form does
            return compose(params, u1, 1.0);
        }
        let s = (beta * PI * u2).sin()
            * ((1.0 - beta) * PI * u2).sin().powf(1.0 / beta - 1.0)
            / ((PI * u2).sin().powf(1.0 / beta) * (-u3.ln()).abs().powf(1.0 / (beta - 1.0)));
        compose(params, u1, s)
    }
}

/// Registered sampler names, default first.
pub const SAMPLER_NAMES: [&str; 2] = ["kanter", "printed"];

/// Look up a sampler strategy by name.
pub fn sampler_by_name(name: &str) -> Result<&'static dyn InterarrivalSampler> {
    static KANTER: KanterSampler = KanterSampler;
    static PRINTED: PrintedExponentSampler = PrintedExponentSampler;
    match name {
        "kanter" => Ok(&KANTER),
        "printed" => Ok(&PRINTED),
        other => Err(Error::Config(format!(
            "unknown sampler '{other}' (available: {})",
            SAMPLER_NAMES.join(", ")
        ))),
    }
}

/// One waiting time under the default (Kanter) sampler.
pub fn sample_interarrival(params: &FppParams, u1: f64, u2: f64, u3: f64) -> Result<f64> {
    KanterSampler.interarrival(params, u1, u2, u3)
}

/// Draw one waiting time from an RNG stream.
pub fn draw_interarrival(
    sampler: &dyn InterarrivalSampler,
    params: &FppParams,
    rng: &mut SplitRng,
) -> Result<f64> {
    let (u1, u2, u3) = (rng.open01(), rng.open01(), rng.open01());
    sampler.interarrival(params, u1, u2, u3)
}

/// Simulate `n_events` waiting times and their cumulative event times.
/// Deterministic given the seed.
pub fn simulate_path(params: &FppParams, n_events: usize, seed: u64) -> Result<EventPath> {
    simulate_path_with(&KanterSampler, params, n_events, &mut SplitRng::new(seed))
}

pub fn simulate_path_with(
    sampler: &dyn InterarrivalSampler,
    params: &FppParams,
    n_events: usize,
    rng: &mut SplitRng,
) -> Result<EventPath> {
    if n_events == 0 {
        return Err(Error::Config("n_events must be >= 1".into()));
    }
    let mut inter_arrivals = Vec::with_capacity(n_events);
    let mut event_times = Vec::with_capacity(n_events);
    let mut acc = 0.0;
    for _ in 0..n_events {
        let t = draw_interarrival(sampler, params, rng)?;
        acc += t;
        inter_arrivals.push(t);
        event_times.push(acc);
    }
    Ok(EventPath {
        inter_arrivals,
        event_times,
        params: Some(*params),
    })
}

/// Configuration for labeled synthetic dataset generation.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct DatasetSpec {
    pub n_samples: usize,
    pub seq_len: usize,
    pub mu_range: (f64, f64),
    pub beta_range: (f64, f64),
    pub seed: u64,
    /// Sampler strategy name; defaults to `kanter`.
    pub sampler: String,
}

impl DatasetSpec {
    pub fn new(
        n_samples: usize,
        seq_len: usize,
        mu_range: (f64, f64),
        beta_range: (f64, f64),
        seed: u64,
    ) -> Self {
        Self {
            n_samples,
            seq_len,
            mu_range,
            beta_range,
            seed,
            sampler: "kanter".into(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_samples == 0 {
            return Err(Error::Config("n_samples must be >= 1".into()));
        }
        if self.seq_len < 2 {
            return Err(Error::Config("seq_len must be >= 2".into()));
        }
        let (mu_lo, mu_hi) = self.mu_range;
        let (b_lo, b_hi) = self.beta_range;
        if !(mu_lo.is_finite() && mu_hi.is_finite()) || mu_lo > mu_hi || mu_lo <= 0.0 {
            return Err(Error::Config(format!(
                "mu range [{mu_lo}, {mu_hi}] is not an ordered positive interval"
            )));
        }
        if !(b_lo.is_finite() && b_hi.is_finite())
            || b_lo > b_hi
            || b_lo < BETA_FLOOR
            || b_hi > 1.0
        {
            return Err(Error::Config(format!(
                "beta range [{b_lo}, {b_hi}] must be ordered inside [{BETA_FLOOR}, 1]"
            )));
        }
        sampler_by_name(&self.sampler)?;
        Ok(())
    }
}

/// Generate a labeled dataset: each row draws its own `(mu, beta)` uniformly
/// from the configured ranges, then `seq_len` waiting times at those
/// parameters. Row `i` owns the derived stream `i`, so output is identical
/// for any degree of parallelism.
pub fn generate_dataset(spec: &DatasetSpec) -> Result<LabeledDataset> {
    spec.validate()?;
    let sampler = sampler_by_name(&spec.sampler)?;
    let root = SplitRng::new(spec.seed);
    let n = spec.n_samples;
    let len = spec.seq_len;

    let rows: Vec<(Vec<f64>, [f64; 2])> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = root.derive(i as u64);
            let mu = rng.uniform(spec.mu_range.0, spec.mu_range.1);
            let beta = rng.uniform(spec.beta_range.0, spec.beta_range.1);
            let params = FppParams::new(mu, beta)?;
            let mut window = Vec::with_capacity(len);
            for _ in 0..len {
                window.push(draw_interarrival(sampler, &params, &mut rng)?);
            }
            Ok((window, [mu, beta]))
        })
        .collect::<Result<_>>()?;

    let mut windows = Mat::zeros(n, len);
    let mut labels = Mat::zeros(n, 2);
    for (i, (w, l)) in rows.into_iter().enumerate() {
        windows.row_mut(i).copy_from_slice(&w);
        labels.row_mut(i).copy_from_slice(&l);
    }

    Ok(LabeledDataset {
        windows,
        labels,
        seq_len: len,
        rng_seed: spec.seed,
        meta: DatasetMeta {
            source: "simulated".into(),
            sampler: Some(spec.sampler.clone()),
            mu_range: Some(spec.mu_range),
            beta_range: Some(spec.beta_range),
            units: None,
        },
    })
}
