//! Global AllPairs extremum estimator.
//!
//! Maximizes, over propensities `p` and symmetric pair relevances `r`,
//!
//! ```text
//! Σ_{k≠k'} c_hat(k,k') · log(p_k r_kk') + notc_hat(k,k') · log(1 − p_k r_kk')
//! ```
//!
//! subject to every variable lying in `[BOX_LOWER, BOX_UPPER]` and `p_1 = 1`.
//!
//! The objective depends on each pair only through the products `p_k r_kk'`,
//! and in log coordinates (`a = ln p`, `b = ln r`) each term is a concave
//! function of `a_k + b_kk'`. The solver therefore works on `a`, with every
//! `b` maximized out exactly (one-dimensional, monotone derivative). The
//! profiled objective stays concave and its Hessian is a cheap Schur
//! complement because the `b` block is diagonal. Steps are projected Newton
//! directions on the free coordinates and scaled gradients on the
//! bound-active ones, followed by an Armijo backtracking search along the
//! projection arc, so the objective never decreases.

use super::{Absence, EstimateError, PropensityCurve, RankValue};
use crate::interventions::InterventionalStats;

pub const BOX_LOWER: f64 = 1e-6;
pub const BOX_UPPER: f64 = 1.0 - 1e-6;

const ARMIJO: f64 = 1e-4;
const MIN_STEP: f64 = 1e-20;

/// How each pair's click and skip counts enter the objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PairWeighting {
    /// The counts as harvested.
    #[default]
    Printed,
    /// Rates at each end rescaled to a common pair mass
    /// `N(k,k') = (exposure_k + exposure_k') / 2`, so both ends of a pair
    /// carry the same total weight.
    PairMass,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AllPairsOptions {
    pub max_iter: usize,
    /// Relative objective change below which the solver stops.
    pub tol: f64,
    pub weighting: PairWeighting,
}

impl Default for AllPairsOptions {
    fn default() -> Self {
        Self {
            max_iter: 10_000,
            tol: 1e-9,
            weighting: PairWeighting::Printed,
        }
    }
}

#[derive(Debug, Clone)]
pub struct AllPairsSolution {
    pub curve: PropensityCurve,
    m: usize,
    r_hat: Vec<f64>,
    pub objective_value: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Objective after each accepted step, starting with the initial point.
    pub trace: Vec<f64>,
}

impl AllPairsSolution {
    /// Estimated mean relevance of the pair `{k, k'}`. Pairs without data
    /// keep their initial value 0.5; the diagonal is 0.
    pub fn r_hat(&self, k: usize, k2: usize) -> f64 {
        self.r_hat[(k - 1) * self.m + (k2 - 1)]
    }
}

fn ln_lower() -> f64 {
    BOX_LOWER.ln()
}

fn ln_upper() -> f64 {
    BOX_UPPER.ln()
}

#[derive(Debug, Clone, Copy)]
struct End {
    rank: usize,
    c: f64,
    nc: f64,
}

#[derive(Debug, Clone, Copy)]
struct Pair {
    ends: [End; 2],
}

// Per-end term f(x) = c·x + nc·ln(1 − e^x), x = a + b < 0.
fn term(e: &End, x: f64) -> f64 {
    let mut v = 0.0;
    if e.c > 0.0 {
        v += e.c * x;
    }
    if e.nc > 0.0 {
        v += e.nc * (-x.exp_m1()).ln();
    }
    v
}

fn d1(e: &End, x: f64) -> f64 {
    if e.nc > 0.0 {
        e.c - e.nc * x.exp() / (-x.exp_m1())
    } else {
        e.c
    }
}

fn d2(e: &End, x: f64) -> f64 {
    if e.nc > 0.0 {
        let q = x.exp();
        let one_minus = -x.exp_m1();
        -e.nc * q / (one_minus * one_minus)
    } else {
        0.0
    }
}

/// Maximizes one pair's two terms over its shared `b`.
fn solve_pair(pair: &Pair, a: &[f64], start: f64) -> f64 {
    let (lo_b, hi_b) = (ln_lower(), ln_upper());
    let slope = |b: f64| pair.ends.iter().map(|e| d1(e, a[e.rank] + b)).sum::<f64>();
    if slope(hi_b) >= 0.0 {
        return hi_b;
    }
    if slope(lo_b) <= 0.0 {
        return lo_b;
    }
    let (mut lo, mut hi) = (lo_b, hi_b);
    let mut b = start.clamp(lo, hi);
    for _ in 0..200 {
        let g = slope(b);
        if g > 0.0 {
            lo = b;
        } else {
            hi = b;
        }
        let h: f64 = pair.ends.iter().map(|e| d2(e, a[e.rank] + b)).sum();
        let mut next = if h < 0.0 { b - g / h } else { f64::NAN };
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - b).abs() <= 1e-15 * (1.0 + b.abs()) || hi - lo <= 1e-15 * (1.0 + b.abs()) {
            return next;
        }
        b = next;
    }
    b
}

struct Profile {
    value: f64,
    grad: Vec<f64>,
    hess: Vec<f64>,
    b: Vec<f64>,
}

fn profile(pairs: &[Pair], m: usize, a: &[f64], b_start: &[f64]) -> Profile {
    let (lo_b, hi_b) = (ln_lower(), ln_upper());
    let mut out = Profile {
        value: 0.0,
        grad: vec![0.0; m],
        hess: vec![0.0; m * m],
        b: Vec::with_capacity(pairs.len()),
    };
    for (pair, &start) in pairs.iter().zip(b_start) {
        let b = solve_pair(pair, a, start);
        out.b.push(b);
        let interior = b > lo_b && b < hi_b;
        let [e0, e1] = pair.ends;
        let (x0, x1) = (a[e0.rank] + b, a[e1.rank] + b);
        out.value += term(&e0, x0) + term(&e1, x1);
        out.grad[e0.rank] += d1(&e0, x0);
        out.grad[e1.rank] += d1(&e1, x1);
        let (h0, h1) = (d2(&e0, x0), d2(&e1, x1));
        out.hess[e0.rank * m + e0.rank] += h0;
        out.hess[e1.rank * m + e1.rank] += h1;
        let hb = h0 + h1;
        if interior && hb < 0.0 {
            out.hess[e0.rank * m + e0.rank] -= h0 * h0 / hb;
            out.hess[e1.rank * m + e1.rank] -= h1 * h1 / hb;
            out.hess[e0.rank * m + e1.rank] -= h0 * h1 / hb;
            out.hess[e1.rank * m + e0.rank] -= h0 * h1 / hb;
        }
    }
    out
}

/// Solves `A x = y` for symmetric positive definite `A` (n×n, row-major) in
/// place. Returns false if `A` is not numerically positive definite.
fn cholesky_solve(a: &mut [f64], n: usize, y: &mut [f64]) -> bool {
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= a[j * n + k] * a[j * n + k];
        }
        if !(d > 0.0) {
            return false;
        }
        let d = d.sqrt();
        a[j * n + j] = d;
        for i in j + 1..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = s / d;
        }
    }
    for i in 0..n {
        let mut s = y[i];
        for k in 0..i {
            s -= a[i * n + k] * y[k];
        }
        y[i] = s / a[i * n + i];
    }
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in i + 1..n {
            s -= a[k * n + i] * y[k];
        }
        y[i] = s / a[i * n + i];
    }
    true
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

fn collect_pairs(stats: &InterventionalStats, weighting: PairWeighting) -> Vec<Pair> {
    let m = stats.m();
    let mut pairs = Vec::new();
    for k in 1..=m {
        for k2 in k + 1..=m {
            if stats.set_size(k, k2) == 0 {
                continue;
            }
            let mut ends = [
                End {
                    rank: k - 1,
                    c: stats.c_hat(k, k2),
                    nc: stats.notc_hat(k, k2),
                },
                End {
                    rank: k2 - 1,
                    c: stats.c_hat(k2, k),
                    nc: stats.notc_hat(k2, k),
                },
            ];
            if weighting == PairWeighting::PairMass {
                let mass = 0.5 * (ends[0].c + ends[0].nc + ends[1].c + ends[1].nc);
                for e in &mut ends {
                    let exposure = e.c + e.nc;
                    if exposure > 0.0 {
                        e.c *= mass / exposure;
                        e.nc *= mass / exposure;
                    }
                }
            }
            if ends.iter().any(|e| e.c + e.nc > 0.0) {
                pairs.push(Pair { ends });
            }
        }
    }
    pairs
}

/// The AllPairs objective at `(p, r)`.
///
/// `p` has length M with entries in (0, 1] (rank 1 is conventionally pinned
/// to 1); `r` is a row-major symmetric M×M matrix whose entries for pairs with
/// data lie in (0, 1). Pairs with empty interventional sets contribute 0.
pub fn all_pairs_objective(p: &[f64], r: &[f64], stats: &InterventionalStats) -> Result<f64, EstimateError> {
    all_pairs_objective_weighted(p, r, stats, PairWeighting::Printed)
}

pub fn all_pairs_objective_weighted(
    p: &[f64],
    r: &[f64],
    stats: &InterventionalStats,
    weighting: PairWeighting,
) -> Result<f64, EstimateError> {
    let m = stats.m();
    if p.len() != m || r.len() != m * m {
        return Err(EstimateError::Shape(format!(
            "expected p of length {m} and r of length {}, got {} and {}",
            m * m,
            p.len(),
            r.len()
        )));
    }
    for (k, &v) in p.iter().enumerate() {
        if !(v > 0.0 && v <= 1.0) {
            return Err(EstimateError::Domain {
                what: format!("p[{}]", k + 1),
                value: v,
                domain: "(0, 1]",
            });
        }
    }
    let mut total = 0.0;
    for pair in collect_pairs(stats, weighting) {
        let (k, k2) = (pair.ends[0].rank, pair.ends[1].rank);
        let v = r[k * m + k2];
        if !(v > 0.0 && v < 1.0) {
            return Err(EstimateError::Domain {
                what: format!("r[{},{}]", k + 1, k2 + 1),
                value: v,
                domain: "(0, 1)",
            });
        }
        if (v - r[k2 * m + k]).abs() > 1e-12 {
            return Err(EstimateError::Shape(format!(
                "r is not symmetric at ({}, {})",
                k + 1,
                k2 + 1
            )));
        }
        for e in &pair.ends {
            let prod = p[e.rank] * v;
            if e.c > 0.0 {
                total += e.c * prod.ln();
            }
            if e.nc > 0.0 {
                total += e.nc * (-prod).ln_1p();
            }
        }
    }
    Ok(total)
}

/// Fits the AllPairs estimator.
///
/// Ranks not linked to rank 1 through pairs with exposure at both ends are
/// reported absent: their scale is not identified.
pub fn all_pairs_estimate(
    stats: &InterventionalStats,
    opts: &AllPairsOptions,
) -> Result<AllPairsSolution, EstimateError> {
    let m = stats.m();
    let pairs = collect_pairs(stats, opts.weighting);
    if pairs.is_empty() {
        return Err(EstimateError::NoData);
    }

    let mut parent: Vec<usize> = (0..m).collect();
    let mut touched = vec![false; m];
    for pair in &pairs {
        let [e0, e1] = pair.ends;
        touched[e0.rank] = true;
        touched[e1.rank] = true;
        if e0.c + e0.nc > 0.0 && e1.c + e1.nc > 0.0 {
            let (x, y) = (find(&mut parent, e0.rank), find(&mut parent, e1.rank));
            parent[x] = y;
        }
    }
    let root = find(&mut parent, 0);
    let free: Vec<usize> = (1..m).filter(|&k| find(&mut parent, k) == root).collect();
    if free.is_empty() {
        return Err(EstimateError::NoData);
    }

    let (lo, hi) = (ln_lower(), ln_upper());
    let mut a: Vec<f64> = (0..m)
        .map(|k| {
            if k == 0 {
                0.0
            } else {
                (1.0 / (k + 1) as f64).ln().clamp(lo, hi)
            }
        })
        .collect();
    let mut cur = profile(&pairs, m, &a, &vec![0.5f64.ln(); pairs.len()]);
    let mut trace = vec![cur.value];
    let mut converged = false;
    let mut iterations = 0;

    let n = free.len();
    while iterations < opts.max_iter {
        iterations += 1;
        let g: Vec<f64> = free.iter().map(|&k| cur.grad[k]).collect();
        let eps = 1e-10;
        let active: Vec<bool> = free
            .iter()
            .zip(&g)
            .map(|(&k, &gk)| (a[k] <= lo + eps && gk < 0.0) || (a[k] >= hi - eps && gk > 0.0))
            .collect();

        // Ascent direction: Newton on the inactive block, scaled gradient on
        // the active one.
        let mut dir = vec![0.0; n];
        let idx: Vec<usize> = (0..n).filter(|&i| !active[i]).collect();
        let mut newton_ok = false;
        if !idx.is_empty() {
            let ni = idx.len();
            let mut neg_h = vec![0.0; ni * ni];
            let mut max_diag = 0.0f64;
            for (r, &i) in idx.iter().enumerate() {
                for (c, &j) in idx.iter().enumerate() {
                    neg_h[r * ni + c] = -cur.hess[free[i] * m + free[j]];
                }
                max_diag = max_diag.max(neg_h[r * ni + r]);
            }
            let ridge = 1e-12 * max_diag.max(1e-300);
            for r in 0..ni {
                neg_h[r * ni + r] += ridge;
            }
            let mut rhs: Vec<f64> = idx.iter().map(|&i| g[i]).collect();
            if cholesky_solve(&mut neg_h, ni, &mut rhs) {
                for (r, &i) in idx.iter().enumerate() {
                    dir[i] = rhs[r];
                }
                newton_ok = true;
            }
        }
        for i in 0..n {
            if active[i] || !newton_ok {
                let curv = (-cur.hess[free[i] * m + free[i]]).max(1e-12);
                dir[i] = g[i] / curv;
            }
        }

        let mut t = 1.0;
        let accepted = loop {
            let mut trial = a.clone();
            let mut gain = 0.0;
            for (i, &k) in free.iter().enumerate() {
                trial[k] = (a[k] + t * dir[i]).clamp(lo, hi);
                gain += g[i] * (trial[k] - a[k]);
            }
            if trial == a {
                break None;
            }
            let next = profile(&pairs, m, &trial, &cur.b);
            if next.value >= cur.value + ARMIJO * gain {
                break Some((trial, next));
            }
            t *= 0.5;
            if t < MIN_STEP {
                break None;
            }
        };

        let Some((trial, next)) = accepted else {
            // No ascent left at machine precision.
            converged = true;
            break;
        };
        let change = (next.value - cur.value).abs() / cur.value.abs().max(f64::MIN_POSITIVE);
        a = trial;
        cur = next;
        trace.push(cur.value);
        if change < opts.tol {
            converged = true;
            break;
        }
    }

    let mut values = vec![RankValue::Estimated(1.0)];
    for k in 1..m {
        values.push(if free.contains(&k) {
            RankValue::Estimated(a[k].exp())
        } else if touched[k] {
            RankValue::Absent(Absence::Unconnected)
        } else {
            RankValue::Absent(Absence::NoData)
        });
    }
    let mut r_hat = vec![0.5; m * m];
    for k in 0..m {
        r_hat[k * m + k] = 0.0;
    }
    for (pair, &b) in pairs.iter().zip(&cur.b) {
        let (k, k2) = (pair.ends[0].rank, pair.ends[1].rank);
        r_hat[k * m + k2] = b.exp();
        r_hat[k2 * m + k] = b.exp();
    }
    Ok(AllPairsSolution {
        curve: PropensityCurve::from_values(values),
        m,
        r_hat,
        objective_value: cur.value,
        iterations,
        converged,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn single_pair(c1: f64, nc1: f64, c2: f64, nc2: f64) -> InterventionalStats {
        let mut s = InterventionalStats::new(2);
        s.set_rates(1, 2, c1, nc1);
        s.set_rates(2, 1, c2, nc2);
        s.set_set_size(1, 2, 7);
        s
    }

    #[test]
    fn empty_data_objective_is_zero() {
        let s = InterventionalStats::new(3);
        let p = [1.0, 0.4, 0.2];
        let r = [0.3; 9];
        assert_eq!(all_pairs_objective(&p, &r, &s).unwrap(), 0.0);
    }

    #[test]
    fn hand_computed_objective() {
        let s = single_pair(1.0, 1.0, 0.0, 2.0);
        let p = [0.5, 0.5];
        let r = [0.5, 0.5, 0.5, 0.5];
        let v = all_pairs_objective(&p, &r, &s).unwrap();
        let expected = 0.25f64.ln() + 0.75f64.ln() + 2.0 * 0.75f64.ln();
        assert_relative_eq!(v, expected, epsilon = 1e-12);
        assert_eq!(format!("{v:.4}"), "-2.2493");
    }

    #[test]
    fn objective_depends_only_on_products() {
        let s = single_pair(3.0, 5.0, 1.0, 6.0);
        let p = [0.8, 0.4];
        let r = [0.0, 0.3, 0.3, 0.0];
        let alpha = 0.5;
        let p2: Vec<f64> = p.iter().map(|x| x * alpha).collect();
        let r2: Vec<f64> = r.iter().map(|x| x / alpha).collect();
        assert_relative_eq!(
            all_pairs_objective(&p, &r, &s).unwrap(),
            all_pairs_objective(&p2, &r2, &s).unwrap(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn objective_domain_errors() {
        let s = single_pair(1.0, 1.0, 1.0, 1.0);
        let r = [0.0, 0.5, 0.5, 0.0];
        assert!(matches!(
            all_pairs_objective(&[1.0, 0.0], &r, &s),
            Err(EstimateError::Domain { .. })
        ));
        let bad_r = [0.0, 1.0, 1.0, 0.0];
        assert!(matches!(
            all_pairs_objective(&[1.0, 0.5], &bad_r, &s),
            Err(EstimateError::Domain { .. })
        ));
        assert!(matches!(
            all_pairs_objective(&[1.0], &r, &s),
            Err(EstimateError::Shape(_))
        ));
    }

    #[test]
    fn single_pair_closed_form() {
        let s = single_pair(50.0, 50.0, 25.0, 75.0);
        let sol = all_pairs_estimate(&s, &AllPairsOptions::default()).unwrap();
        assert!(sol.converged);
        let oracle = (25.0 / 100.0) / (50.0 / 100.0);
        assert!((sol.curve.get(2).unwrap() - oracle).abs() < 1e-4);
        assert!((sol.r_hat(1, 2) - 0.5).abs() < 1e-4);
    }

    #[test]
    fn no_data_is_an_error() {
        let s = InterventionalStats::new(4);
        assert!(matches!(
            all_pairs_estimate(&s, &AllPairsOptions::default()),
            Err(EstimateError::NoData)
        ));
    }

    #[test]
    fn flat_when_rates_match() {
        let mut s = InterventionalStats::new(4);
        for k in 1..=4 {
            for k2 in k + 1..=4 {
                s.set_rates(k, k2, 2.0, 8.0);
                s.set_rates(k2, k, 2.0, 8.0);
                s.set_set_size(k, k2, 10);
            }
        }
        let sol = all_pairs_estimate(&s, &AllPairsOptions::default()).unwrap();
        for k in 1..=4 {
            assert!((sol.curve.get(k).unwrap() - 1.0).abs() < 1e-4);
        }
    }

    #[test]
    fn unconnected_ranks_are_absent() {
        let mut s = InterventionalStats::new(4);
        s.set_rates(1, 2, 5.0, 5.0);
        s.set_rates(2, 1, 3.0, 7.0);
        s.set_set_size(1, 2, 3);
        s.set_rates(3, 4, 5.0, 5.0);
        s.set_rates(4, 3, 3.0, 7.0);
        s.set_set_size(3, 4, 3);
        let sol = all_pairs_estimate(&s, &AllPairsOptions::default()).unwrap();
        assert!(sol.curve.get(2).is_some());
        assert_eq!(sol.curve.rank(3), RankValue::Absent(Absence::Unconnected));
        assert_eq!(sol.curve.rank(4), RankValue::Absent(Absence::Unconnected));
    }

    #[test]
    fn variables_stay_in_box() {
        let mut s = InterventionalStats::new(3);
        s.set_rates(1, 2, 10.0, 0.0);
        s.set_rates(2, 1, 0.0, 10.0);
        s.set_set_size(1, 2, 3);
        s.set_rates(2, 3, 1.0, 9.0);
        s.set_rates(3, 2, 1.0, 9.0);
        s.set_set_size(2, 3, 3);
        let sol = all_pairs_estimate(&s, &AllPairsOptions::default()).unwrap();
        for k in 2..=3 {
            let p = sol.curve.get(k).unwrap();
            assert!((BOX_LOWER * 0.999999..=BOX_UPPER * 1.000001).contains(&p), "{p}");
        }
        for (k, k2) in [(1, 2), (2, 3)] {
            let r = sol.r_hat(k, k2);
            assert!((BOX_LOWER * 0.999999..=BOX_UPPER * 1.000001).contains(&r), "{r}");
            assert_eq!(r, sol.r_hat(k2, k));
        }
    }

    fn analytic(truth: &[f64]) -> InterventionalStats {
        InterventionalStats::expected(
            truth,
            |k, k2| 0.15 + 0.7 * ((k * 7 + k2 * 3) % 11) as f64 / 11.0,
            |k, k2| 1000.0 / (k2 - k) as f64,
        )
    }

    #[test]
    fn analytic_counts_recover_truth() {
        let truth = [1.0, 0.5, 1.0 / 3.0];
        for weighting in [PairWeighting::Printed, PairWeighting::PairMass] {
            let opts = AllPairsOptions {
                weighting,
                ..Default::default()
            };
            let sol = all_pairs_estimate(&analytic(&truth), &opts).unwrap();
            assert!(sol.converged);
            for (k, &p) in truth.iter().enumerate() {
                assert!(
                    (sol.curve.get(k + 1).unwrap() - p).abs() < 1e-3,
                    "{weighting:?} rank {}",
                    k + 1
                );
            }
        }
    }

    #[test]
    fn scaling_counts_leaves_the_maximizer() {
        let truth: Vec<f64> = (1..=6).map(|r| 1.0 / r as f64).collect();
        let mut s = analytic(&truth);
        // Perturb so the optimum is not the exact truth.
        s.set_rates(2, 5, s.c_hat(2, 5) * 1.3, s.notc_hat(2, 5));
        let a = all_pairs_estimate(&s, &AllPairsOptions::default()).unwrap();
        let b = all_pairs_estimate(&s.scaled(37.5), &AllPairsOptions::default()).unwrap();
        for k in 1..=6 {
            assert!((a.curve.get(k).unwrap() - b.curve.get(k).unwrap()).abs() < 1e-6);
        }
    }

    #[test]
    fn trace_is_monotone_and_runs_are_identical() {
        let truth: Vec<f64> = (1..=8).map(|r| (1.0 / r as f64).powf(1.5)).collect();
        let mut s = analytic(&truth);
        s.set_rates(3, 4, s.c_hat(3, 4) * 0.7, s.notc_hat(3, 4) * 1.2);
        let a = all_pairs_estimate(&s, &AllPairsOptions::default()).unwrap();
        assert!(a.trace.windows(2).all(|w| w[1] >= w[0]));
        assert_eq!(a.objective_value, *a.trace.last().unwrap());
        let b = all_pairs_estimate(&s, &AllPairsOptions::default()).unwrap();
        assert_eq!(a.curve, b.curve);
        assert_eq!(a.r_hat, b.r_hat);
        assert_eq!(a.trace, b.trace);
    }

    #[test]
    fn iteration_cap_reports_non_convergence() {
        let truth: Vec<f64> = (1..=5).map(|r| (1.0 / r as f64).powi(2)).collect();
        let opts = AllPairsOptions {
            max_iter: 1,
            ..Default::default()
        };
        let sol = all_pairs_estimate(&analytic(&truth), &opts).unwrap();
        assert_eq!(sol.iterations, 1);
        assert!(!sol.converged);
    }

    #[test]
    fn cholesky_solves_small_system() {
        let mut a = vec![4.0, 2.0, 2.0, 3.0];
        let mut y = vec![2.0, 1.0];
        assert!(cholesky_solve(&mut a, 2, &mut y));
        assert_relative_eq!(y[0], 0.5, epsilon = 1e-12);
        assert_relative_eq!(y[1], 0.0, epsilon = 1e-12);
        let mut not_pd = vec![1.0, 2.0, 2.0, 1.0];
        assert!(!cholesky_solve(&mut not_pd, 2, &mut [1.0, 1.0]));
    }
}
