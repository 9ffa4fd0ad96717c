//! Scoring, bootstrap intervals, and robustness sweeps.

mod bootstrap;
mod sweep;

use thiserror::Error;

use crate::estimators::{EstimateError, Method, PropensityCurve};
use crate::interventions::StatsError;
use crate::simulator::SimError;

pub use bootstrap::{bootstrap_ci, bootstrap_plan, BootstrapOptions, BootstrapResult};
pub use sweep::{run_sweep, summarize, write_summary_tsv, write_sweep_tsv, Axis, SummaryRow, SweepPoint, SweepSpec};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("rank {rank} is absent from the {curve} curve")]
    Absent { curve: &'static str, rank: usize },

    #[error("M = {m} exceeds the curve lengths (estimate {est}, truth {truth})")]
    RankRange { m: usize, est: usize, truth: usize },

    #[error("estimator failed on {failed} of {total} resamples (first failure: {first})")]
    Bootstrap { failed: usize, total: usize, first: String },

    #[error("unknown sweep axis {0:?} (expected data_size, ranker_similarity, click_noise, bias_severity or traffic_imbalance)")]
    UnknownAxis(String),

    #[error("sweep grid is empty")]
    EmptyGrid,

    #[error("{0}")]
    Invalid(String),

    #[error(transparent)]
    Estimate(#[from] EstimateError),

    #[error(transparent)]
    Stats(#[from] StatsError),

    #[error(transparent)]
    Sim(#[from] SimError),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// `Σ_k (p̂_1/p̂_k − p_1/p_k)² / M` over ranks `1..=m`.
pub fn inverse_propensity_mse(est: &PropensityCurve, truth: &PropensityCurve, m: usize) -> Result<f64, EvalError> {
    if m == 0 || m > est.m() || m > truth.m() {
        return Err(EvalError::RankRange {
            m,
            est: est.m(),
            truth: truth.m(),
        });
    }
    let inv = |c: &PropensityCurve, curve: &'static str, k: usize| {
        let p1 = c.get(1).ok_or(EvalError::Absent { curve, rank: 1 })?;
        let pk = c.get(k).ok_or(EvalError::Absent { curve, rank: k })?;
        Ok::<_, EvalError>(p1 / pk)
    };
    let mut total = 0.0;
    for k in 1..=m {
        total += (inv(est, "estimated", k)? - inv(truth, "true", k)?).powi(2);
    }
    Ok(total / m as f64)
}

/// A percentile interval with the bootstrap median as its centre.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lower: f64,
    pub median: f64,
    pub upper: f64,
}

impl Interval {
    pub fn contains(&self, x: f64) -> bool {
        self.lower <= x && x <= self.upper
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }
}

/// One scored estimate.
#[derive(Debug, Clone)]
pub struct EvalReport {
    pub method: Method,
    pub curve: PropensityCurve,
    pub truth: Option<PropensityCurve>,
    /// Present only with a truth curve and no absent rank in either curve.
    pub mse: Option<f64>,
    /// Why `mse` is missing although a truth curve was supplied.
    pub mse_note: Option<String>,
    pub intervals: Option<Vec<Option<Interval>>>,
    pub sweep: Option<SweepPoint>,
    pub runtime_secs: f64,
}

impl EvalReport {
    pub fn new(method: Method, curve: PropensityCurve, truth: Option<PropensityCurve>) -> Self {
        let (mse, mse_note) = match &truth {
            None => (None, None),
            Some(t) => match inverse_propensity_mse(&curve, t, curve.m().min(t.m())) {
                Ok(v) => (Some(v), None),
                Err(e) => (None, Some(e.to_string())),
            },
        };
        Self {
            method,
            curve,
            truth,
            mse,
            mse_note,
            intervals: None,
            sweep: None,
            runtime_secs: 0.0,
        }
    }
}

/// Linear-interpolation quantile of sorted data.
pub(crate) fn quantile(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}
