//! Relative propensity estimators.
//!
//! All estimators report curves normalized to `p_1 = 1`. Ranks an estimator
//! cannot support from the data are marked absent with a reason instead of
//! being imputed.

mod all_pairs;
mod baselines;
mod local;

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use thiserror::Error;

use crate::interventions::{InterventionalStats, PositionCounts};

pub use all_pairs::{
    all_pairs_estimate, all_pairs_objective, all_pairs_objective_weighted, AllPairsOptions, AllPairsSolution,
    PairWeighting, BOX_LOWER, BOX_UPPER,
};
pub use baselines::{naive_ctr_curve, naive_ctr_from_counts, swap_gold_estimate, SwapArm, SwapEstimate};
pub use local::{adjacent_chain, pivot_one};

#[derive(Debug, Error)]
pub enum EstimateError {
    #[error("no interventional data")]
    NoData,

    #[error("{what} = {value} is outside its domain {domain}")]
    Domain {
        what: String,
        value: f64,
        domain: &'static str,
    },

    #[error("argument shape mismatch: {0}")]
    Shape(String),

    #[error("empty log")]
    EmptyLog,

    #[error("position 1 has no clicks; cannot normalize")]
    NoTopClicks,

    #[error("swap log was recorded against a different ranking table")]
    Provenance,

    #[error("line {line}: malformed curve record: {message}")]
    Malformed { line: usize, message: String },

    #[error("{0}")]
    Unsupported(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Why a rank has no estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Absence {
    /// No interventional (or display) data touches the rank.
    NoData,
    /// The pivot side of the ratio has no clicks.
    ZeroPivotClicks,
    /// The rank itself has no clicks, which would make its propensity 0.
    ZeroClicks,
    /// An adjacent-chain link `(link - 1, link)` at or above this rank failed.
    BrokenChain { link: usize },
    /// The rank has data but none of it connects it to rank 1.
    Unconnected,
}

impl fmt::Display for Absence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Absence::NoData => f.write_str("no data"),
            Absence::ZeroPivotClicks => f.write_str("undefined (zero pivot clicks)"),
            Absence::ZeroClicks => f.write_str("zero clicks at this rank"),
            Absence::BrokenChain { link } => write!(f, "chain broken at link ({}, {link})", link - 1),
            Absence::Unconnected => f.write_str("not connected to rank 1"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RankValue {
    Estimated(f64),
    Absent(Absence),
}

impl RankValue {
    pub fn value(self) -> Option<f64> {
        match self {
            RankValue::Estimated(v) => Some(v),
            RankValue::Absent(_) => None,
        }
    }
}

/// Relative examination propensities `p_k / p_1` for ranks `1..=M`.
#[derive(Debug, Clone, PartialEq)]
pub struct PropensityCurve {
    values: Vec<RankValue>,
}

impl PropensityCurve {
    /// Normalizes raw propensities by the first one.
    ///
    /// # Panics
    ///
    /// If `raw` is empty or its first entry is not positive.
    pub fn from_raw(raw: &[f64]) -> Self {
        let first = raw[0];
        assert!(first > 0.0, "p_1 must be positive");
        Self {
            values: raw.iter().map(|&p| RankValue::Estimated(p / first)).collect(),
        }
    }

    /// `p_r = (1/r)^eta` for `r = 1..=m`.
    pub fn power_law(eta: f64, m: usize) -> Self {
        let raw: Vec<f64> = (1..=m).map(|r| (1.0 / r as f64).powf(eta)).collect();
        Self::from_raw(&raw)
    }

    /// A curve from per-rank values; rank 1 is forced to 1.
    pub fn from_values(mut values: Vec<RankValue>) -> Self {
        if let Some(first) = values.first_mut() {
            *first = RankValue::Estimated(1.0);
        }
        Self { values }
    }

    pub fn m(&self) -> usize {
        self.values.len()
    }

    /// Value at 1-based rank `k`.
    pub fn rank(&self, k: usize) -> RankValue {
        self.values[k - 1]
    }

    pub fn get(&self, k: usize) -> Option<f64> {
        self.values.get(k.checked_sub(1)?).and_then(|v| v.value())
    }

    /// Inverse relative propensity `p_1 / p_k`.
    pub fn inverse(&self, k: usize) -> Option<f64> {
        self.get(k).map(|p| 1.0 / p)
    }

    pub fn values(&self) -> &[RankValue] {
        &self.values
    }

    pub fn is_complete(&self) -> bool {
        self.values.iter().all(|v| v.value().is_some())
    }

    /// Absent ranks with their reasons.
    pub fn absent(&self) -> Vec<(usize, Absence)> {
        self.values
            .iter()
            .enumerate()
            .filter_map(|(i, v)| match v {
                RankValue::Absent(a) => Some((i + 1, *a)),
                RankValue::Estimated(_) => None,
            })
            .collect()
    }

    /// Writes `rank  propensity  inverse_propensity  present`, one record per
    /// rank. Absent ranks carry `NA` values and `false`.
    pub fn write_tsv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "rank\tpropensity\tinverse_propensity\tpresent")?;
        for (i, v) in self.values.iter().enumerate() {
            match v.value() {
                Some(p) => writeln!(w, "{}\t{p}\t{}\ttrue", i + 1, 1.0 / p)?,
                None => writeln!(w, "{}\tNA\tNA\tfalse", i + 1)?,
            }
        }
        Ok(())
    }

    pub fn read_tsv<R: BufRead>(reader: R) -> Result<Self, EstimateError> {
        let mut values = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() || (i == 0 && line.starts_with("rank")) {
                continue;
            }
            let bad = |message: String| EstimateError::Malformed { line: i + 1, message };
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != 4 {
                return Err(bad(format!("expected 4 fields, found {}", f.len())));
            }
            let rank: usize = f[0].parse().map_err(|e| bad(format!("rank: {e}")))?;
            if rank != values.len() + 1 {
                return Err(bad(format!("expected rank {}, found {rank}", values.len() + 1)));
            }
            let present: bool = f[3].parse().map_err(|e| bad(format!("present: {e}")))?;
            values.push(if present {
                let p: f64 = f[1].parse().map_err(|e| bad(format!("propensity: {e}")))?;
                if !(p > 0.0) {
                    return Err(bad(format!("propensity must be positive, got {p}")));
                }
                RankValue::Estimated(p)
            } else {
                RankValue::Absent(Absence::NoData)
            });
        }
        if values.is_empty() {
            return Err(EstimateError::Malformed {
                line: 0,
                message: "empty curve".into(),
            });
        }
        Ok(Self { values })
    }
}

/// Estimator identifiers as used on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    PivotOne,
    AdjacentChain,
    AllPairs,
    NaiveCtr,
    SwapGold,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::PivotOne,
        Method::AdjacentChain,
        Method::AllPairs,
        Method::NaiveCtr,
        Method::SwapGold,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::PivotOne => "pivot-one",
            Method::AdjacentChain => "adjacent-chain",
            Method::AllPairs => "all-pairs",
            Method::NaiveCtr => "naive-ctr",
            Method::SwapGold => "swap-gold",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::ALL.into_iter().find(|m| m.as_str() == s).ok_or_else(|| {
            let names: Vec<_> = Method::ALL.iter().map(|m| m.as_str()).collect();
            format!("unknown method {s:?} (expected one of {})", names.join(", "))
        })
    }
}

/// Runs `method` on harvested statistics (and per-position counts for the
/// naive baseline). The swap estimator needs a swap log and is rejected.
pub fn estimate_from_stats(
    method: Method,
    stats: &InterventionalStats,
    counts: Option<&PositionCounts>,
    opts: &AllPairsOptions,
) -> Result<PropensityCurve, EstimateError> {
    let interventional = |f: fn(&InterventionalStats) -> PropensityCurve| {
        if stats.is_empty() {
            Err(EstimateError::NoData)
        } else {
            Ok(f(stats))
        }
    };
    match method {
        Method::PivotOne => interventional(pivot_one),
        Method::AdjacentChain => interventional(adjacent_chain),
        Method::AllPairs => Ok(all_pairs_estimate(stats, opts)?.curve),
        Method::NaiveCtr => match counts {
            Some(c) => naive_ctr_from_counts(c),
            None => Err(EstimateError::Unsupported("naive-ctr needs per-position counts".into())),
        },
        Method::SwapGold => Err(EstimateError::Unsupported(
            "swap-gold needs an explicit swap-experiment log".into(),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn power_law_is_normalized() {
        let c = PropensityCurve::power_law(1.0, 4);
        assert_eq!(c.get(1), Some(1.0));
        assert_eq!(c.get(4), Some(0.25));
        assert_eq!(c.inverse(4), Some(4.0));
        assert_eq!(c.get(5), None);
        assert_eq!(c.get(0), None);
    }

    #[test]
    fn curve_tsv_round_trip() {
        let c = PropensityCurve::from_values(vec![
            RankValue::Estimated(1.0),
            RankValue::Estimated(0.3),
            RankValue::Absent(Absence::NoData),
        ]);
        let mut buf = Vec::new();
        c.write_tsv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.ends_with("3\tNA\tNA\tfalse\n"), "{text}");
        assert_eq!(PropensityCurve::read_tsv(buf.as_slice()).unwrap(), c);
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.as_str().parse::<Method>().unwrap(), m);
        }
        assert!("em".parse::<Method>().is_err());
    }
}
