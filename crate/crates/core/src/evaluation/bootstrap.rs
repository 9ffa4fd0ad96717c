use rayon::prelude::*;

use super::{quantile, EvalError, Interval};
use crate::estimators::{estimate_from_stats, AllPairsOptions, Method, PropensityCurve};
use crate::interventions::HarvestPlan;
use crate::logdata::{ImpressionLog, RankingTable};
use crate::rng::stream;

/// Largest tolerated fraction of failed resamples.
const MAX_FAILURE_RATE: f64 = 0.2;

#[derive(Debug, Clone)]
pub struct BootstrapOptions {
    /// Number of resamples.
    pub b: usize,
    pub level: f64,
    pub seed: u64,
    /// Worker threads; results do not depend on it.
    pub jobs: usize,
    pub m: usize,
    pub all_pairs: AllPairsOptions,
}

impl Default for BootstrapOptions {
    fn default() -> Self {
        Self {
            b: 1000,
            level: 0.95,
            seed: 0,
            jobs: 1,
            m: 10,
            all_pairs: AllPairsOptions::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct BootstrapResult {
    pub method: Method,
    /// Estimate on the full log, if the estimator succeeds on it.
    pub point: Option<PropensityCurve>,
    /// Per rank (index `k - 1`); `None` where the rank was estimated in
    /// fewer than 80% of the resamples.
    pub intervals: Vec<Option<Interval>>,
    pub resamples: usize,
    pub failures: usize,
}

/// Percentile bootstrap over impressions.
///
/// Resample `b` draws the log's impressions with replacement from the stream
/// `("bootstrap", b)` of `opts.seed`, recomputes traffic, weights and
/// statistics from the resample, and re-runs `method`.
pub fn bootstrap_ci(
    log: &ImpressionLog,
    table: &RankingTable,
    method: Method,
    opts: &BootstrapOptions,
) -> Result<BootstrapResult, EvalError> {
    if log.is_empty() {
        return Err(EvalError::Invalid("cannot bootstrap an empty log".into()));
    }
    let plan = HarvestPlan::compile(log, table, opts.m)?;
    bootstrap_plan(&plan, method, opts)
}

/// [`bootstrap_ci`] on an already compiled log.
pub fn bootstrap_plan(
    plan: &HarvestPlan,
    method: Method,
    opts: &BootstrapOptions,
) -> Result<BootstrapResult, EvalError> {
    if opts.b == 0 {
        return Err(EvalError::Invalid("B must be ≥ 1".into()));
    }
    if !(opts.level > 0.0 && opts.level < 1.0) {
        return Err(EvalError::Invalid(format!(
            "level must be in (0, 1), got {}",
            opts.level
        )));
    }
    if opts.jobs == 0 {
        return Err(EvalError::Invalid("jobs must be ≥ 1".into()));
    }
    if method == Method::SwapGold {
        return Err(EvalError::Invalid(
            "swap-gold is not bootstrapped from an impression log".into(),
        ));
    }
    let m = plan.m();
    let point = estimate_from_stats(method, &plan.stats(), Some(&plan.position_counts()), &opts.all_pairs).ok();

    let run = |b: usize| {
        let mut rng = stream(opts.seed, "bootstrap", b as u64);
        let (stats, counts) = plan.resample(&mut rng);
        estimate_from_stats(method, &stats, Some(&counts), &opts.all_pairs)
    };
    // A private pool, even of one thread, would let a caller's rayon worker
    // steal unrelated work while blocked on it.
    let results: Vec<_> = if opts.jobs == 1 {
        (0..opts.b).map(run).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(opts.jobs)
            .build()
            .map_err(|e| EvalError::Invalid(format!("cannot start worker pool: {e}")))?;
        pool.install(|| (0..opts.b).into_par_iter().map(run).collect())
    };

    let failures = results.iter().filter(|r| r.is_err()).count();
    if failures as f64 > MAX_FAILURE_RATE * opts.b as f64 {
        let first = results
            .iter()
            .find_map(|r| r.as_ref().err())
            .map(|e| e.to_string())
            .unwrap_or_default();
        return Err(EvalError::Bootstrap {
            failed: failures,
            total: opts.b,
            first,
        });
    }

    let alpha = 1.0 - opts.level;
    let intervals = (1..=m)
        .map(|k| {
            let mut v: Vec<f64> = results
                .iter()
                .filter_map(|r| r.as_ref().ok().and_then(|c| c.get(k)))
                .collect();
            if (v.len() as f64) < (1.0 - MAX_FAILURE_RATE) * opts.b as f64 {
                return None;
            }
            v.sort_by(f64::total_cmp);
            Some(Interval {
                lower: quantile(&v, alpha / 2.0),
                median: quantile(&v, 0.5),
                upper: quantile(&v, 1.0 - alpha / 2.0),
            })
        })
        .collect();
    Ok(BootstrapResult {
        method,
        point,
        intervals,
        resamples: opts.b,
        failures,
    })
}
