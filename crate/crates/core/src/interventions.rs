//! Harvested interventions.
//!
//! A query-document pair `(q, d)` belongs to the interventional set
//! `S(k, k')` when one logged ranker puts `d` at rank `k` and another puts it
//! at rank `k'`. Because rankers are assigned to queries independently of the
//! query, the choice of ranker acts as a randomized swap between the two
//! ranks. The weighted click and skip rates collected here are the input to
//! every estimator in [`crate::estimators`].
//!
//! Ranks are 1-based throughout the public API.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::{BufRead, Write};

use rand::Rng;
use smallvec::SmallVec;
use thiserror::Error;

use crate::logdata::{ImpressionLog, QueryIx, RankingTable};

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("rank cutoff M must be at least 2, got {0}")]
    CutoffTooSmall(usize),

    #[error("traffic has {got} entries but the table has {expected} rankers")]
    TrafficLength { got: usize, expected: usize },

    #[error("mismatched provenance: {0}")]
    Provenance(&'static str),

    #[error("line {line}: malformed stats record: {message}")]
    Malformed { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn check_cutoff(m: usize) -> Result<(), StatsError> {
    if m < 2 {
        return Err(StatsError::CutoffTooSmall(m));
    }
    Ok(())
}

/// Distinct ranks (≤ M) at which the rankers place each candidate.
fn rank_profiles(table: &RankingTable, q: QueryIx, m: usize) -> Vec<SmallVec<[u16; 2]>> {
    let mut out = vec![SmallVec::new(); table.num_docs(q)];
    for ranking in table.query_rankings(q).iter().flatten() {
        for (pos, &d) in ranking.iter().take(m).enumerate() {
            let k = (pos + 1) as u16;
            let slot: &mut SmallVec<[u16; 2]> = &mut out[d as usize];
            if let Err(at) = slot.binary_search(&k) {
                slot.insert(at, k);
            }
        }
    }
    out
}

// ── Weights ─────────────────────────────────────────────────────────────

/// Traffic-weighted placement counts `w(q, d, k) = Σ_i n_i · 1[rank(d | f_i(q)) = k]`
/// for ranks `k ≤ M`.
#[derive(Debug, Clone)]
pub struct WeightIndex {
    m: usize,
    table_fingerprint: u64,
    traffic: Vec<u64>,
    /// Per query, per local document: nonzero `(k, w)` entries.
    #[allow(clippy::type_complexity)]
    weights: Vec<Vec<SmallVec<[(u16, f64); 2]>>>,
}

impl WeightIndex {
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn traffic(&self) -> &[u64] {
        &self.traffic
    }

    pub fn table_fingerprint(&self) -> u64 {
        self.table_fingerprint
    }

    pub fn get(&self, q: QueryIx, doc: u32, k: usize) -> f64 {
        self.weights
            .get(q.index())
            .and_then(|docs| docs.get(doc as usize))
            .and_then(|ws| ws.iter().find(|&&(r, _)| r as usize == k))
            .map_or(0.0, |&(_, w)| w)
    }

    /// String-keyed lookup; unknown queries or documents have weight 0.
    pub fn weight(&self, table: &RankingTable, query: &str, doc: &str, k: usize) -> f64 {
        let Some(q) = table.query_ix(query) else {
            return 0.0;
        };
        table.doc_ix(q, doc).map_or(0.0, |d| self.get(q, d, k))
    }
}

pub fn compute_weights(table: &RankingTable, traffic: &[u64], m: usize) -> Result<WeightIndex, StatsError> {
    check_cutoff(m)?;
    if traffic.len() != table.rankers().len() {
        return Err(StatsError::TrafficLength {
            got: traffic.len(),
            expected: table.rankers().len(),
        });
    }
    let weights = (0..table.num_queries())
        .map(|q| {
            let q = QueryIx(q as u32);
            let mut docs: Vec<SmallVec<[(u16, f64); 2]>> = vec![SmallVec::new(); table.num_docs(q)];
            for (r, ranking) in table.query_rankings(q).iter().enumerate() {
                let Some(ranking) = ranking else { continue };
                let n = traffic[r] as f64;
                for (pos, &d) in ranking.iter().take(m).enumerate() {
                    let k = (pos + 1) as u16;
                    let slot = &mut docs[d as usize];
                    match slot.iter_mut().find(|(r, _)| *r == k) {
                        Some((_, w)) => *w += n,
                        None => slot.push((k, n)),
                    }
                }
            }
            docs
        })
        .collect();
    Ok(WeightIndex {
        m,
        table_fingerprint: table.fingerprint(),
        traffic: traffic.to_vec(),
        weights,
    })
}

// ── Interventional sets ─────────────────────────────────────────────────

/// Membership of the interventional sets `S(k, k')` for `k ≠ k' ≤ M`.
#[derive(Debug, Clone)]
pub struct InterventionalSets {
    m: usize,
    table_fingerprint: u64,
    /// Per query, per local document: the distinct ranks ≤ M it receives.
    ranks: Vec<Vec<SmallVec<[u16; 2]>>>,
    sizes: Vec<u64>,
}

impl InterventionalSets {
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn table_fingerprint(&self) -> u64 {
        self.table_fingerprint
    }

    /// `|S(k, k')|`; zero on the diagonal.
    pub fn size(&self, k: usize, k2: usize) -> u64 {
        self.sizes[(k - 1) * self.m + (k2 - 1)]
    }

    pub fn contains(&self, q: QueryIx, doc: u32, k: usize, k2: usize) -> bool {
        let ranks = &self.ranks[q.index()][doc as usize];
        k != k2 && ranks.contains(&(k as u16)) && ranks.contains(&(k2 as u16))
    }

    /// Distinct ranks ≤ M of a document; it belongs to `S(k, k')` for every
    /// two distinct entries.
    pub fn ranks_of(&self, q: QueryIx, doc: u32) -> &[u16] {
        &self.ranks[q.index()][doc as usize]
    }

    /// Members of `S(k, k')` as (query id, doc id) pairs.
    pub fn members<'t>(&self, table: &'t RankingTable, k: usize, k2: usize) -> Vec<(&'t str, &'t str)> {
        let mut out = Vec::new();
        for (q, docs) in self.ranks.iter().enumerate() {
            let q = QueryIx(q as u32);
            for d in 0..docs.len() as u32 {
                if self.contains(q, d, k, k2) {
                    out.push((table.query_id(q), table.doc_id(q, d)));
                }
            }
        }
        out
    }
}

pub fn build_interventional_sets(table: &RankingTable, m: usize) -> Result<InterventionalSets, StatsError> {
    check_cutoff(m)?;
    let mut sizes = vec![0u64; m * m];
    let ranks: Vec<_> = (0..table.num_queries())
        .map(|q| {
            let profiles = rank_profiles(table, QueryIx(q as u32), m);
            for ranks in profiles.iter().filter(|r| r.len() > 1) {
                for &a in ranks {
                    for &b in ranks {
                        if a != b {
                            sizes[(a as usize - 1) * m + (b as usize - 1)] += 1;
                        }
                    }
                }
            }
            profiles
        })
        .collect();
    Ok(InterventionalSets {
        m,
        table_fingerprint: table.fingerprint(),
        ranks,
        sizes,
    })
}

// ── Statistics ──────────────────────────────────────────────────────────

/// Weighted click and skip rates per ordered rank pair.
///
/// `c_hat(k, k')` is the weighted click rate at rank `k` over `S(k, k')`, and
/// `c_hat(k', k)` the rate at rank `k'` over the same set. Likewise for
/// `notc_hat`. Their sum estimates the set mass `N(k, k')`.
#[derive(Debug, Clone, PartialEq)]
pub struct InterventionalStats {
    m: usize,
    c_hat: Vec<f64>,
    notc_hat: Vec<f64>,
    set_size: Vec<u64>,
}

impl InterventionalStats {
    /// All-zero statistics for cutoff `m`.
    pub fn new(m: usize) -> Self {
        Self {
            m,
            c_hat: vec![0.0; m * m],
            notc_hat: vec![0.0; m * m],
            set_size: vec![0; m * m],
        }
    }

    fn ix(&self, k: usize, k2: usize) -> usize {
        debug_assert!(k >= 1 && k2 >= 1 && k <= self.m && k2 <= self.m);
        (k - 1) * self.m + (k2 - 1)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn c_hat(&self, k: usize, k2: usize) -> f64 {
        self.c_hat[self.ix(k, k2)]
    }

    pub fn notc_hat(&self, k: usize, k2: usize) -> f64 {
        self.notc_hat[self.ix(k, k2)]
    }

    pub fn set_size(&self, k: usize, k2: usize) -> u64 {
        self.set_size[self.ix(k, k2)]
    }

    /// Weighted exposure mass at rank `k` over `S(k, k')`.
    pub fn exposure(&self, k: usize, k2: usize) -> f64 {
        self.c_hat(k, k2) + self.notc_hat(k, k2)
    }

    /// Sets the rates observed at rank `k` for the pair `{k, k'}`.
    pub fn set_rates(&mut self, k: usize, k2: usize, c_hat: f64, notc_hat: f64) {
        let i = self.ix(k, k2);
        self.c_hat[i] = c_hat;
        self.notc_hat[i] = notc_hat;
    }

    /// Sets `|S(k, k')|` (symmetrically).
    pub fn set_set_size(&mut self, k: usize, k2: usize, size: u64) {
        let (i, j) = (self.ix(k, k2), self.ix(k2, k));
        self.set_size[i] = size;
        self.set_size[j] = size;
    }

    /// Ordered pairs `(k, k')`, `k ≠ k'`, with a nonempty set.
    pub fn nonempty_pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let m = self.m;
        (1..=m)
            .flat_map(move |k| (1..=m).map(move |k2| (k, k2)))
            .filter(move |&(k, k2)| k != k2 && self.set_size(k, k2) > 0)
    }

    pub fn is_empty(&self) -> bool {
        self.nonempty_pairs().next().is_none()
    }

    /// Multiplies every rate by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.c_hat.iter_mut().for_each(|x| *x *= factor);
        out.notc_hat.iter_mut().for_each(|x| *x *= factor);
        out
    }

    /// Adds another partial accumulation over the same sets.
    pub fn merge(&mut self, other: &Self) {
        assert_eq!(self.m, other.m, "merging stats with different cutoffs");
        for (a, b) in self.c_hat.iter_mut().zip(&other.c_hat) {
            *a += b;
        }
        for (a, b) in self.notc_hat.iter_mut().zip(&other.notc_hat) {
            *a += b;
        }
    }

    /// Largest relative difference between the rates of two stats tables.
    pub fn max_relative_diff(&self, other: &Self) -> f64 {
        let rel = |a: f64, b: f64| {
            let scale = a.abs().max(b.abs());
            if scale == 0.0 {
                0.0
            } else {
                (a - b).abs() / scale
            }
        };
        self.c_hat
            .iter()
            .zip(&other.c_hat)
            .chain(self.notc_hat.iter().zip(&other.notc_hat))
            .map(|(&a, &b)| rel(a, b))
            .fold(0.0, f64::max)
    }

    /// Statistics a log of unbounded size would converge to under the
    /// position-based model: `c_hat(k, k') = p_k · r̄(k, k') · N(k, k')` and
    /// `notc_hat(k, k') = (1 − p_k · r̄(k, k')) · N(k, k')`.
    ///
    /// `mean_relevance` and `mass` are called with `k < k'` only and should
    /// be symmetric in meaning. Pairs with zero mass are left empty.
    pub fn expected(
        propensities: &[f64],
        mean_relevance: impl Fn(usize, usize) -> f64,
        mass: impl Fn(usize, usize) -> f64,
    ) -> Self {
        let m = propensities.len();
        let mut out = Self::new(m);
        for k in 1..=m {
            for k2 in k + 1..=m {
                let n = mass(k, k2);
                if n <= 0.0 {
                    continue;
                }
                let r = mean_relevance(k, k2);
                for (a, b) in [(k, k2), (k2, k)] {
                    let rate = propensities[a - 1] * r;
                    out.set_rates(a, b, rate * n, (1.0 - rate) * n);
                }
                out.set_set_size(k, k2, n.round().max(1.0) as u64);
            }
        }
        out
    }

    /// Writes one tab-separated record per ordered pair:
    /// `k  k_prime  c_hat  notc_hat  set_size`.
    pub fn write_tsv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "k\tk_prime\tc_hat\tnotc_hat\tset_size")?;
        for k in 1..=self.m {
            for k2 in 1..=self.m {
                if k != k2 {
                    writeln!(
                        w,
                        "{k}\t{k2}\t{}\t{}\t{}",
                        self.c_hat(k, k2),
                        self.notc_hat(k, k2),
                        self.set_size(k, k2)
                    )?;
                }
            }
        }
        Ok(())
    }

    /// Reads the format produced by [`write_tsv`](Self::write_tsv). The
    /// cutoff is the largest rank mentioned; missing pairs are empty.
    pub fn read_tsv<R: BufRead>(reader: R) -> Result<Self, StatsError> {
        let mut rows = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let line_no = i + 1;
            if line.trim().is_empty() || (i == 0 && line.starts_with('k')) {
                continue;
            }
            let bad = |message: String| StatsError::Malformed { line: line_no, message };
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != 5 {
                return Err(bad(format!("expected 5 fields, found {}", f.len())));
            }
            let k: usize = f[0].parse().map_err(|e| bad(format!("k: {e}")))?;
            let k2: usize = f[1].parse().map_err(|e| bad(format!("k_prime: {e}")))?;
            let c: f64 = f[2].parse().map_err(|e| bad(format!("c_hat: {e}")))?;
            let nc: f64 = f[3].parse().map_err(|e| bad(format!("notc_hat: {e}")))?;
            let n: u64 = f[4].parse().map_err(|e| bad(format!("set_size: {e}")))?;
            if k == 0 || k2 == 0 || k == k2 {
                return Err(bad(format!("invalid rank pair ({k}, {k2})")));
            }
            if !(c >= 0.0 && nc >= 0.0) {
                return Err(bad("rates must be nonnegative".into()));
            }
            rows.push((line_no, k, k2, c, nc, n));
        }
        let m = rows.iter().map(|r| r.1.max(r.2)).max().unwrap_or(0);
        check_cutoff(m)?;
        let mut out = Self::new(m);
        for &(_, k, k2, c, nc, n) in &rows {
            out.set_rates(k, k2, c, nc);
            let i = out.ix(k, k2);
            out.set_size[i] = n;
        }
        for &(line, k, k2, ..) in &rows {
            if out.set_size(k, k2) != out.set_size(k2, k) {
                return Err(StatsError::Malformed {
                    line,
                    message: format!("set_size({k},{k2}) differs from set_size({k2},{k})"),
                });
            }
        }
        Ok(out)
    }

    /// Upper-triangular table of `|S(k, k')|`, one row per `k'`.
    pub fn set_size_table(&self) -> String {
        let mut s = String::new();
        let _ = write!(s, "k'\\k");
        for k in 1..self.m {
            let _ = write!(s, "\t{k}");
        }
        s.push('\n');
        for k2 in 2..=self.m {
            let _ = write!(s, "{k2}");
            for k in 1..self.m {
                if k < k2 {
                    let _ = write!(s, "\t{}", self.set_size(k, k2));
                } else {
                    s.push_str("\t-");
                }
            }
            s.push('\n');
        }
        s
    }
}

/// Accumulates weighted click and skip rates over the log.
pub fn build_stats(
    log: &ImpressionLog,
    table: &RankingTable,
    weights: &WeightIndex,
    m: usize,
) -> Result<InterventionalStats, StatsError> {
    build_stats_with_jobs(log, table, weights, m, 1)
}

/// [`build_stats`] over `jobs` contiguous partitions of the log. Partial
/// sums are merged pairwise in partition order, so a given `jobs` value
/// always produces the same bits; different values agree to rounding.
pub fn build_stats_with_jobs(
    log: &ImpressionLog,
    table: &RankingTable,
    weights: &WeightIndex,
    m: usize,
    jobs: usize,
) -> Result<InterventionalStats, StatsError> {
    check_cutoff(m)?;
    let fp = table.fingerprint();
    if weights.table_fingerprint != fp {
        return Err(StatsError::Provenance(
            "weights were computed from a different ranking table",
        ));
    }
    if log.table_fingerprint() != fp {
        return Err(StatsError::Provenance(
            "impressions were validated against a different ranking table",
        ));
    }
    if weights.traffic != log.traffic() {
        return Err(StatsError::Provenance(
            "weights were computed from different traffic counts",
        ));
    }
    if weights.m != m {
        return Err(StatsError::Provenance("weights were computed for a different cutoff"));
    }

    let sets = build_interventional_sets(table, m)?;
    let impressions = log.impressions();
    let jobs = jobs.max(1).min(impressions.len().max(1));
    let chunk = impressions.len().div_ceil(jobs).max(1);

    let fold = |part: &[crate::logdata::Impression]| {
        let mut acc = InterventionalStats::new(m);
        for imp in part {
            let ranking = table.ranking_ix(imp.query, imp.ranker).unwrap_or_default();
            for (pos, &d) in ranking.iter().take(m).enumerate() {
                let k = pos + 1;
                let ranks = sets.ranks_of(imp.query, d);
                if ranks.len() < 2 {
                    continue;
                }
                let w = weights.get(imp.query, d, k);
                let clicked = imp.is_clicked(k);
                for &k2 in ranks {
                    let k2 = k2 as usize;
                    if k2 == k {
                        continue;
                    }
                    let i = acc.ix(k, k2);
                    if clicked {
                        acc.c_hat[i] += 1.0 / w;
                    } else {
                        acc.notc_hat[i] += 1.0 / w;
                    }
                }
            }
        }
        acc
    };

    let mut parts: Vec<InterventionalStats> = if jobs == 1 {
        vec![fold(impressions)]
    } else {
        use rayon::prelude::*;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .expect("thread pool");
        pool.install(|| impressions.par_chunks(chunk).map(fold).collect())
    };
    while parts.len() > 1 {
        let mut next = Vec::with_capacity(parts.len().div_ceil(2));
        let mut it = parts.into_iter();
        while let Some(mut a) = it.next() {
            if let Some(b) = it.next() {
                a.merge(&b);
            }
            next.push(a);
        }
        parts = next;
    }
    let mut stats = parts.pop().unwrap_or_else(|| InterventionalStats::new(m));
    stats.set_size = sets.sizes;
    Ok(stats)
}

/// Convenience: weights, sets and stats for a log in one call.
pub fn harvest(log: &ImpressionLog, table: &RankingTable, m: usize) -> Result<InterventionalStats, StatsError> {
    let weights = compute_weights(table, log.traffic(), m)?;
    build_stats(log, table, &weights, m)
}

// ── Compiled plan ───────────────────────────────────────────────────────

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
struct Cell {
    k: u16,
    k2: u16,
    signature: u32,
}

/// Compressed columns: column `c` owns `members[start[c]..start[c + 1]]`.
#[derive(Debug, Clone, Default)]
struct Columns {
    start: Vec<u32>,
    members: Vec<u32>,
}

impl Columns {
    /// Transposes `(column, member)` pairs; members keep their input order.
    fn build(columns: usize, pairs: &[(u32, u32)]) -> Self {
        let mut start = vec![0u32; columns + 1];
        for &(c, _) in pairs {
            start[c as usize + 1] += 1;
        }
        for c in 0..columns {
            start[c + 1] += start[c];
        }
        let mut fill = start.clone();
        let mut members = vec![0u32; pairs.len()];
        for &(c, j) in pairs {
            members[fill[c as usize] as usize] = j;
            fill[c as usize] += 1;
        }
        Self { start, members }
    }

    fn weighted_sums(&self, weight: &[u32]) -> Vec<u64> {
        self.start
            .windows(2)
            .map(|w| {
                self.members[w[0] as usize..w[1] as usize]
                    .iter()
                    .map(|&j| u64::from(weight[j as usize]))
                    .sum()
            })
            .collect()
    }
}

/// The log pre-resolved against the interventional sets, for recomputing
/// statistics under many reweightings of the same impressions (bootstrap).
///
/// Each displayed (impression, rank) that lands in some set is reduced to a
/// cell `(k, k', S)` where `S` is the set of rankers placing the document at
/// `k`. Since `w(q, d, k) = Σ_{i ∈ S} n_i`, the statistics for any vector of
/// impression multiplicities are integer counts per cell divided by the
/// resampled traffic of the cell's rankers. Exposures depend only on the
/// impression's (query, ranker) group, so they are gathered per group; clicks
/// are sparse and gathered per impression.
#[derive(Debug, Clone)]
pub struct HarvestPlan {
    m: usize,
    rankers: usize,
    cells: Vec<Cell>,
    signatures: Vec<SmallVec<[u32; 2]>>,
    set_size: Vec<u64>,
    group_of: Vec<u32>,
    group_ranker: Vec<u32>,
    group_display_len: Vec<u16>,
    /// Per cell: the groups exposing it (once per exposure).
    exposures: Columns,
    /// Per cell: the impressions clicking it.
    clicks: Columns,
    /// Per position `1..=m`: the impressions clicking it.
    position_clicks: Columns,
}

/// Per-rank display and click counts, as used by the naive CTR baseline.
#[derive(Debug, Clone, PartialEq)]
pub struct PositionCounts {
    pub displayed: Vec<u64>,
    pub clicked: Vec<u64>,
}

impl HarvestPlan {
    pub fn compile(log: &ImpressionLog, table: &RankingTable, m: usize) -> Result<Self, StatsError> {
        check_cutoff(m)?;
        if log.table_fingerprint() != table.fingerprint() {
            return Err(StatsError::Provenance(
                "impressions were validated against a different ranking table",
            ));
        }
        let sets = build_interventional_sets(table, m)?;
        let mut cells: Vec<Cell> = Vec::new();
        let mut cell_ix: HashMap<Cell, u32> = HashMap::new();
        let mut signatures: Vec<SmallVec<[u32; 2]>> = Vec::new();
        let mut sig_ix: HashMap<SmallVec<[u32; 2]>, u32> = HashMap::new();
        let mut group_ix: HashMap<(QueryIx, u32), u32> = HashMap::new();
        // Per group, per displayed rank: the cells of the document shown there.
        let mut group_cells: Vec<Vec<SmallVec<[u32; 2]>>> = Vec::new();
        let mut group_ranker = Vec::new();
        let mut group_display_len = Vec::new();
        let mut group_of = Vec::with_capacity(log.len());
        let mut exposure_pairs: Vec<(u32, u32)> = Vec::new();
        let mut click_pairs: Vec<(u32, u32)> = Vec::new();
        let mut position_pairs: Vec<(u32, u32)> = Vec::new();

        for (j, imp) in log.impressions().iter().enumerate() {
            let ranking = table.ranking_ix(imp.query, imp.ranker).unwrap_or_default();
            let g = match group_ix.get(&(imp.query, imp.ranker.0)) {
                Some(&g) => g,
                None => {
                    let g = group_cells.len() as u32;
                    group_ix.insert((imp.query, imp.ranker.0), g);
                    let rankings = table.query_rankings(imp.query);
                    let mut per_rank = Vec::new();
                    for (pos, &d) in ranking.iter().take(m).enumerate() {
                        let k = pos + 1;
                        let ranks = sets.ranks_of(imp.query, d);
                        let mut here = SmallVec::new();
                        if ranks.len() >= 2 {
                            let sig: SmallVec<[u32; 2]> = rankings
                                .iter()
                                .enumerate()
                                .filter(|(_, r)| r.as_ref().is_some_and(|r| r.get(pos) == Some(&d)))
                                .map(|(i, _)| i as u32)
                                .collect();
                            let signature = *sig_ix.entry(sig.clone()).or_insert_with(|| {
                                signatures.push(sig);
                                (signatures.len() - 1) as u32
                            });
                            for &k2 in ranks.iter().filter(|&&k2| k2 as usize != k) {
                                let cell = Cell {
                                    k: k as u16,
                                    k2,
                                    signature,
                                };
                                let c = *cell_ix.entry(cell).or_insert_with(|| {
                                    cells.push(cell);
                                    (cells.len() - 1) as u32
                                });
                                here.push(c);
                                exposure_pairs.push((c, g));
                            }
                        }
                        per_rank.push(here);
                    }
                    group_cells.push(per_rank);
                    group_ranker.push(imp.ranker.0);
                    group_display_len.push(ranking.len().min(m) as u16);
                    g
                }
            };
            group_of.push(g);
            for &p in imp.clicks.iter().filter(|&&p| p as usize <= m) {
                position_pairs.push((u32::from(p) - 1, j as u32));
                for &c in &group_cells[g as usize][p as usize - 1] {
                    click_pairs.push((c, j as u32));
                }
            }
        }
        Ok(Self {
            m,
            rankers: table.rankers().len(),
            exposures: Columns::build(cells.len(), &exposure_pairs),
            clicks: Columns::build(cells.len(), &click_pairs),
            position_clicks: Columns::build(m, &position_pairs),
            cells,
            signatures,
            set_size: sets.sizes.clone(),
            group_of,
            group_ranker,
            group_display_len,
        })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn num_impressions(&self) -> usize {
        self.group_of.len()
    }

    /// Statistics and position counts for impression multiplicities `mult`.
    fn accumulate(&self, mult: &[u32]) -> (InterventionalStats, PositionCounts) {
        let mut group_mult = vec![0u32; self.group_ranker.len()];
        for (&g, &c) in self.group_of.iter().zip(mult) {
            group_mult[g as usize] += c;
        }
        let mut traffic = vec![0u64; self.rankers];
        let mut display_hist = vec![0u64; self.m + 1];
        for (g, &c) in group_mult.iter().enumerate() {
            traffic[self.group_ranker[g] as usize] += u64::from(c);
            display_hist[self.group_display_len[g] as usize] += u64::from(c);
        }
        let exposures = self.exposures.weighted_sums(&group_mult);
        let clicks = self.clicks.weighted_sums(mult);

        let weights: Vec<f64> = self
            .signatures
            .iter()
            .map(|s| s.iter().map(|&r| traffic[r as usize]).sum::<u64>() as f64)
            .collect();
        let mut stats = InterventionalStats::new(self.m);
        for (c, cell) in self.cells.iter().enumerate() {
            let w = weights[cell.signature as usize];
            if w == 0.0 {
                continue;
            }
            let i = stats.ix(cell.k as usize, cell.k2 as usize);
            stats.c_hat[i] += clicks[c] as f64 / w;
            stats.notc_hat[i] += (exposures[c] - clicks[c]) as f64 / w;
        }
        stats.set_size.clone_from(&self.set_size);

        // displayed[k] = number of impressions showing at least k results
        let mut displayed = vec![0u64; self.m];
        let mut running = 0;
        for len in (1..=self.m).rev() {
            running += display_hist[len];
            displayed[len - 1] = running;
        }
        let pc = PositionCounts {
            displayed,
            clicked: self.position_clicks.weighted_sums(mult),
        };
        (stats, pc)
    }

    /// Statistics of the log as compiled.
    pub fn stats(&self) -> InterventionalStats {
        self.accumulate(&vec![1; self.num_impressions()]).0
    }

    /// Draws `num_impressions` impressions with replacement and returns the
    /// statistics of the resample, with traffic counts and weights recomputed
    /// from it. Also returns the resample's per-position counts.
    pub fn resample<R: Rng>(&self, rng: &mut R) -> (InterventionalStats, PositionCounts) {
        let n = self.num_impressions();
        let mut mult = vec![0u32; n];
        for _ in 0..n {
            mult[rng.random_range(0..n)] += 1;
        }
        self.accumulate(&mult)
    }

    /// Per-position counts of the log as compiled.
    pub fn position_counts(&self) -> PositionCounts {
        self.accumulate(&vec![1; self.num_impressions()]).1
    }
}
