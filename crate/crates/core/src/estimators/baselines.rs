use super::{Absence, EstimateError, PropensityCurve, RankValue};
use crate::interventions::PositionCounts;
use crate::logdata::{ImpressionLog, RankingTable, SwapLog};

/// Per-position click-through rate normalized by position 1. No control for
/// relevance, so it is confounded whenever the ranker puts better results
/// higher.
pub fn naive_ctr_curve(log: &ImpressionLog, table: &RankingTable, m: usize) -> Result<PropensityCurve, EstimateError> {
    if log.is_empty() {
        return Err(EstimateError::EmptyLog);
    }
    if log.table_fingerprint() != table.fingerprint() {
        return Err(EstimateError::Provenance);
    }
    let mut counts = PositionCounts {
        displayed: vec![0; m],
        clicked: vec![0; m],
    };
    for imp in log.impressions() {
        let len = table.ranking_ix(imp.query, imp.ranker).map_or(0, |r| r.len()).min(m);
        for d in &mut counts.displayed[..len] {
            *d += 1;
        }
        for &p in &imp.clicks {
            if (p as usize) <= m {
                counts.clicked[p as usize - 1] += 1;
            }
        }
    }
    naive_ctr_from_counts(&counts)
}

pub fn naive_ctr_from_counts(counts: &PositionCounts) -> Result<PropensityCurve, EstimateError> {
    let rate = |k: usize| counts.clicked[k] as f64 / counts.displayed[k] as f64;
    if counts.displayed.first().copied().unwrap_or(0) == 0 {
        return Err(EstimateError::EmptyLog);
    }
    if counts.clicked[0] == 0 {
        return Err(EstimateError::NoTopClicks);
    }
    let top = rate(0);
    let mut values = vec![RankValue::Estimated(1.0)];
    for k in 1..counts.displayed.len() {
        values.push(if counts.displayed[k] == 0 {
            RankValue::Absent(Absence::NoData)
        } else if counts.clicked[k] == 0 {
            RankValue::Absent(Absence::ZeroClicks)
        } else {
            RankValue::Estimated(rate(k) / top)
        });
    }
    Ok(PropensityCurve::from_values(values))
}

/// Sessions and clicks on the ranker's original top result in one arm.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SwapArm {
    pub sessions: u64,
    pub clicks: u64,
}

impl SwapArm {
    pub fn rate(&self) -> Option<f64> {
        (self.sessions > 0).then(|| self.clicks as f64 / self.sessions as f64)
    }
}

#[derive(Debug, Clone)]
pub struct SwapEstimate {
    pub curve: PropensityCurve,
    /// `(kept, swapped)` arms per rank; index `k - 1`.
    pub arms: Vec<(SwapArm, SwapArm)>,
    /// Delta-method standard error of each estimated ratio.
    pub std_err: Vec<Option<f64>>,
}

/// Ratio of the original top result's click rate when swapped to `k` over its
/// click rate when kept at position 1.
///
/// Rank 1 is the reference. Ranks without sessions in both arms are absent, as
/// are ranks whose kept arm has no clicks.
pub fn swap_gold_estimate(log: &SwapLog, table: &RankingTable, m: usize) -> Result<SwapEstimate, EstimateError> {
    if log.is_empty() {
        return Err(EstimateError::EmptyLog);
    }
    if log.table_fingerprint() != table.fingerprint() {
        return Err(EstimateError::Provenance);
    }
    let mut arms = vec![(SwapArm::default(), SwapArm::default()); m];
    for rec in log.records() {
        let k = rec.k as usize;
        if k == 0 || k > m {
            continue;
        }
        let arm = if rec.swapped {
            &mut arms[k - 1].1
        } else {
            &mut arms[k - 1].0
        };
        arm.sessions += 1;
        if rec.clicks.contains(&(rec.top_position() as u16)) {
            arm.clicks += 1;
        }
    }

    let mut values = vec![RankValue::Estimated(1.0)];
    let mut std_err = vec![Some(0.0)];
    for &(kept, swapped) in &arms[1..] {
        let (v, se) = match (kept.rate(), swapped.rate()) {
            (Some(_), Some(_)) if kept.clicks == 0 => (RankValue::Absent(Absence::ZeroPivotClicks), None),
            (Some(_), Some(_)) if swapped.clicks == 0 => (RankValue::Absent(Absence::ZeroClicks), None),
            (Some(c1), Some(c2)) => {
                let p = c2 / c1;
                let rel_var = (1.0 - c1) / kept.clicks as f64 + (1.0 - c2) / swapped.clicks as f64;
                (RankValue::Estimated(p), Some(p * rel_var.sqrt()))
            }
            _ => (RankValue::Absent(Absence::NoData), None),
        };
        values.push(v);
        std_err.push(se);
    }
    Ok(SwapEstimate {
        curve: PropensityCurve::from_values(values),
        arms,
        std_err,
    })
}
