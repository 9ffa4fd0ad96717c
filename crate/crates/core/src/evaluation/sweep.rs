use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;

use super::{EvalError, EvalReport};
use crate::estimators::{
    estimate_from_stats, naive_ctr_curve, Absence, AllPairsOptions, Method, PropensityCurve, RankValue,
};
use crate::interventions::build_stats_with_jobs;
use crate::interventions::compute_weights;
use crate::rng::derive_seed;
use crate::simulator::{generate_world, simulate_clicks, SimConfig};

/// The simulation knob a sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Axis {
    /// Impressions per ranker.
    DataSize,
    /// `ranker_noise`; larger values give less similar rankers.
    RankerSimilarity,
    /// `eps_minus`.
    ClickNoise,
    /// `eta`.
    BiasSeverity,
    /// `n_1 / n_2` for two rankers at the base config's total traffic.
    TrafficImbalance,
}

impl Axis {
    pub const ALL: [Axis; 5] = [
        Axis::DataSize,
        Axis::RankerSimilarity,
        Axis::ClickNoise,
        Axis::BiasSeverity,
        Axis::TrafficImbalance,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Axis::DataSize => "data_size",
            Axis::RankerSimilarity => "ranker_similarity",
            Axis::ClickNoise => "click_noise",
            Axis::BiasSeverity => "bias_severity",
            Axis::TrafficImbalance => "traffic_imbalance",
        }
    }

    /// `base` with this axis set to `value`.
    pub fn apply(self, base: &SimConfig, value: f64) -> Result<SimConfig, EvalError> {
        let mut cfg = base.clone();
        let bad = |what: &str| EvalError::Invalid(format!("{} value {value} is not a valid {what}", self.as_str()));
        match self {
            Axis::DataSize => {
                if !(value >= 1.0) || value.fract() != 0.0 {
                    return Err(bad("impression count"));
                }
                cfg.traffic = vec![value as u64; base.traffic.len()];
            }
            Axis::RankerSimilarity => cfg.ranker_noise = value,
            Axis::ClickNoise => cfg.eps_minus = value,
            Axis::BiasSeverity => cfg.eta = value,
            Axis::TrafficImbalance => {
                if base.traffic.len() != 2 {
                    return Err(EvalError::Invalid(format!(
                        "traffic_imbalance needs exactly two rankers, base config has {}",
                        base.traffic.len()
                    )));
                }
                if !(value > 0.0) || !value.is_finite() {
                    return Err(bad("traffic ratio"));
                }
                let total: u64 = base.traffic.iter().sum();
                let n1 = (total as f64 * value / (1.0 + value)).round() as u64;
                cfg.traffic = vec![n1, total - n1];
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Axis {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.replace('-', "_");
        Axis::ALL
            .into_iter()
            .find(|a| a.as_str() == norm)
            .ok_or_else(|| EvalError::UnknownAxis(s.to_string()))
    }
}

/// Where in a sweep a report comes from.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub axis: Axis,
    pub value: f64,
    pub grid: Vec<f64>,
    pub seed_index: usize,
    /// Simulation seed of this run, derived from the base seed and
    /// `seed_index` only, so every grid point sees the same worlds.
    pub seed: u64,
    /// Same-rank fraction of the run's rankers.
    pub similarity: f64,
}

#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub axis: Axis,
    pub grid: Vec<f64>,
    pub base: SimConfig,
    pub methods: Vec<Method>,
    pub seeds: usize,
    pub all_pairs: AllPairsOptions,
    pub jobs: usize,
}

fn all_absent(m: usize) -> PropensityCurve {
    let mut v = vec![RankValue::Absent(Absence::NoData); m];
    v[0] = RankValue::Estimated(1.0);
    PropensityCurve::from_values(v)
}

fn run_one(spec: &SweepSpec, value: f64, seed_index: usize) -> Result<Vec<EvalReport>, EvalError> {
    let start = Instant::now();
    let seed = derive_seed(spec.base.seed, "sweep-run", seed_index as u64);
    let cfg = SimConfig {
        seed,
        ..spec.axis.apply(&spec.base, value)?
    };
    let world = generate_world(&cfg)?;
    let log = simulate_clicks(&world, &cfg)?;
    let weights = compute_weights(&world.table, log.traffic(), cfg.m)?;
    let stats = build_stats_with_jobs(&log, &world.table, &weights, cfg.m, 1)?;
    let shared = start.elapsed().as_secs_f64();
    let point = SweepPoint {
        axis: spec.axis,
        value,
        grid: spec.grid.clone(),
        seed_index,
        seed,
        similarity: world.similarity(),
    };
    let truth = cfg.true_curve();
    let mut out = Vec::with_capacity(spec.methods.len());
    for &method in &spec.methods {
        let t = Instant::now();
        let est = match method {
            Method::NaiveCtr => naive_ctr_curve(&log, &world.table, cfg.m),
            _ => estimate_from_stats(method, &stats, None, &spec.all_pairs),
        };
        let elapsed = t.elapsed().as_secs_f64();
        let mut report = match est {
            Ok(curve) => EvalReport::new(method, curve, Some(truth.clone())),
            Err(e) => {
                let mut r = EvalReport::new(method, all_absent(cfg.m), Some(truth.clone()));
                r.mse_note = Some(e.to_string());
                r
            }
        };
        report.sweep = Some(point.clone());
        report.runtime_secs = shared + elapsed;
        out.push(report);
    }
    Ok(out)
}

/// Runs every (grid value, seed) combination and scores each method.
///
/// Reports come back ordered by grid value, then seed, then method, whatever
/// `jobs` is.
pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<EvalReport>, EvalError> {
    if spec.grid.is_empty() {
        return Err(EvalError::EmptyGrid);
    }
    if spec.seeds == 0 {
        return Err(EvalError::Invalid("seeds must be ≥ 1".into()));
    }
    if spec.methods.is_empty() {
        return Err(EvalError::Invalid("no methods given".into()));
    }
    if spec.methods.contains(&Method::SwapGold) {
        return Err(EvalError::Invalid(
            "swap-gold cannot be swept: it needs explicit swap experiments".into(),
        ));
    }
    if spec.jobs == 0 {
        return Err(EvalError::Invalid("jobs must be ≥ 1".into()));
    }
    for &v in &spec.grid {
        spec.axis.apply(&spec.base, v)?;
    }
    let runs: Vec<(f64, usize)> = spec
        .grid
        .iter()
        .flat_map(|&v| (0..spec.seeds).map(move |s| (v, s)))
        .collect();
    let results: Vec<Result<Vec<EvalReport>, EvalError>> = if spec.jobs == 1 {
        runs.iter().map(|&(v, s)| run_one(spec, v, s)).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(spec.jobs)
            .build()
            .map_err(|e| EvalError::Invalid(format!("cannot start worker pool: {e}")))?;
        pool.install(|| runs.par_iter().map(|&(v, s)| run_one(spec, v, s)).collect())
    };
    let mut out = Vec::with_capacity(runs.len() * spec.methods.len());
    for r in results {
        out.extend(r?);
    }
    Ok(out)
}

/// Mean and standard deviation of the MSE per grid value and method.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub axis: Axis,
    pub value: f64,
    pub method: Method,
    pub runs: usize,
    /// Runs with a defined MSE.
    pub defined: usize,
    pub mean_mse: Option<f64>,
    /// Sample standard deviation; needs two defined runs.
    pub sd_mse: Option<f64>,
    pub mean_similarity: f64,
}

/// Groups sweep reports by (value, method) in order of first appearance.
/// Reports without sweep metadata are skipped.
pub fn summarize(reports: &[EvalReport]) -> Vec<SummaryRow> {
    let mut keys: Vec<(Axis, f64, Method)> = Vec::new();
    for r in reports {
        if let Some(p) = &r.sweep {
            let key = (p.axis, p.value, r.method);
            if !keys.contains(&key) {
                keys.push(key);
            }
        }
    }
    keys.into_iter()
        .map(|(axis, value, method)| {
            let group: Vec<&EvalReport> = reports
                .iter()
                .filter(|r| r.method == method && r.sweep.as_ref().is_some_and(|p| p.axis == axis && p.value == value))
                .collect();
            let mses: Vec<f64> = group.iter().filter_map(|r| r.mse).collect();
            let n = mses.len();
            let mean = (n > 0).then(|| mses.iter().sum::<f64>() / n as f64);
            let sd = mean
                .filter(|_| n > 1)
                .map(|mu| (mses.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt());
            let mean_similarity = group
                .iter()
                .filter_map(|r| r.sweep.as_ref().map(|p| p.similarity))
                .sum::<f64>()
                / group.len() as f64;
            SummaryRow {
                axis,
                value,
                method,
                runs: group.len(),
                defined: n,
                mean_mse: mean,
                sd_mse: sd,
                mean_similarity,
            }
        })
        .collect()
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| x.to_string())
}

/// One row per grid value × seed × method. The runtime column is the only
/// one that varies between reruns.
pub fn write_sweep_tsv<W: Write>(reports: &[EvalReport], mut w: W) -> std::io::Result<()> {
    writeln!(
        w,
        "axis\tvalue\tseed_index\tseed\tmethod\tmse\tsimilarity\truntime_secs"
    )?;
    for r in reports {
        let Some(p) = &r.sweep else { continue };
        writeln!(
            w,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{:.6}",
            p.axis,
            p.value,
            p.seed_index,
            p.seed,
            r.method,
            opt(r.mse),
            p.similarity,
            r.runtime_secs
        )?;
    }
    Ok(())
}

pub fn write_summary_tsv<W: Write>(rows: &[SummaryRow], mut w: W) -> std::io::Result<()> {
    writeln!(
        w,
        "axis\tvalue\tmethod\truns\tdefined\tmean_mse\tsd_mse\tmean_similarity"
    )?;
    for r in rows {
        writeln!(
            w,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            r.axis,
            r.value,
            r.method,
            r.runs,
            r.defined,
            opt(r.mean_mse),
            opt(r.sd_mse),
            r.mean_similarity
        )?;
    }
    Ok(())
}
