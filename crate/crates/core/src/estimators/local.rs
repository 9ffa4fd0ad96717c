use super::{Absence, PropensityCurve, RankValue};
use crate::interventions::InterventionalStats;

/// Ratio of the click rates at the two ends of the pair `{pivot, k}`.
fn link(stats: &InterventionalStats, pivot: usize, k: usize) -> Result<f64, Absence> {
    if stats.set_size(pivot, k) == 0 {
        return Err(Absence::NoData);
    }
    let denom = stats.c_hat(pivot, k);
    if denom == 0.0 {
        return Err(Absence::ZeroPivotClicks);
    }
    let num = stats.c_hat(k, pivot);
    if num == 0.0 {
        return Err(Absence::ZeroClicks);
    }
    Ok(num / denom)
}

/// `p_k / p_1 = c_hat(k, 1) / c_hat(1, k)`, using only the sets `S(1, k)`.
pub fn pivot_one(stats: &InterventionalStats) -> PropensityCurve {
    let mut values = vec![RankValue::Estimated(1.0)];
    for k in 2..=stats.m() {
        values.push(match link(stats, 1, k) {
            Ok(r) => RankValue::Estimated(r),
            Err(a) => RankValue::Absent(a),
        });
    }
    PropensityCurve::from_values(values)
}

/// Telescoping product of adjacent ratios `c_hat(j, j-1) / c_hat(j-1, j)`.
///
/// The first failing link truncates the chain: that rank and every deeper one
/// is reported as [`Absence::BrokenChain`].
pub fn adjacent_chain(stats: &InterventionalStats) -> PropensityCurve {
    let mut values = vec![RankValue::Estimated(1.0)];
    let mut acc = 1.0;
    let mut broken = None;
    for j in 2..=stats.m() {
        if broken.is_none() {
            match link(stats, j - 1, j) {
                Ok(r) => acc *= r,
                Err(_) => broken = Some(j),
            }
        }
        values.push(match broken {
            None => RankValue::Estimated(acc),
            Some(link) => RankValue::Absent(Absence::BrokenChain { link }),
        });
    }
    PropensityCurve::from_values(values)
}
