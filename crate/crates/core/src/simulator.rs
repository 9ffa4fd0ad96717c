//! Synthetic worlds and position-based-model click logs.
//!
//! A world is a set of queries, each with candidate documents carrying a
//! binary relevance and a latent quality score `rel + N(0, 1)`. Every ranker
//! sorts the candidates by that score plus its own `N(0, ranker_noise²)`
//! perturbation, so `ranker_noise` controls how similar the rankers are.
//!
//! Clicks follow the position-based model with `p_r = (1/r)^eta`: a displayed
//! document at rank `r ≤ M` is clicked with probability `p_r` if relevant and
//! `p_r · eps_minus` otherwise. Query choice is independent of the ranker an
//! impression is assigned to.

use std::io::{BufRead, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use smallvec::SmallVec;
use thiserror::Error;

use crate::estimators::PropensityCurve;
use crate::interventions::{build_interventional_sets, InterventionalStats, StatsError};
use crate::logdata::{Impression, ImpressionLog, LogError, QueryIx, RankerIx, RankingTable, SwapImpression, SwapLog};
use crate::rng::stream;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("{message}")]
    Invalid { field: &'static str, message: String },

    #[error("swap rank {k} outside 1..={m}")]
    SwapRank { k: usize, m: usize },

    #[error(transparent)]
    Log(#[from] LogError),

    #[error(transparent)]
    Stats(#[from] StatsError),

    #[error("line {line}: malformed ground-truth record: {message}")]
    Malformed { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub num_queries: usize,
    pub candidates_per_query: usize,
    pub relevant_fraction: f64,
    /// Bias severity.
    pub eta: f64,
    /// Click probability factor for irrelevant documents.
    pub eps_minus: f64,
    /// Scale of each ranker's score perturbation.
    pub ranker_noise: f64,
    /// Impressions per ranker; rankers are named `f1`, `f2`, ...
    pub traffic: Vec<u64>,
    pub m: usize,
    pub seed: u64,
    /// Swap probability in explicit swap experiments.
    pub p_swap: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            num_queries: 20_000,
            candidates_per_query: 20,
            relevant_fraction: 0.25,
            eta: 1.0,
            eps_minus: 0.1,
            ranker_noise: 1.0,
            traffic: vec![100_000, 100_000],
            m: 10,
            seed: 0,
            p_swap: 0.5,
        }
    }
}

fn invalid(field: &'static str, message: impl Into<String>) -> SimError {
    SimError::Invalid {
        field,
        message: message.into(),
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.num_queries == 0 {
            return Err(invalid("queries", "queries must be ≥ 1"));
        }
        if self.m < 2 {
            return Err(invalid("m", format!("M must be ≥ 2, got {}", self.m)));
        }
        if self.candidates_per_query < self.m {
            return Err(invalid(
                "candidates",
                format!("candidates must be ≥ M ({}), got {}", self.m, self.candidates_per_query),
            ));
        }
        if !(self.relevant_fraction > 0.0 && self.relevant_fraction < 1.0) {
            return Err(invalid(
                "relevant-fraction",
                format!("relevant-fraction must be in (0, 1), got {}", self.relevant_fraction),
            ));
        }
        if !(self.eta >= 0.0) || !self.eta.is_finite() {
            return Err(invalid("eta", format!("eta must be ≥ 0, got {}", self.eta)));
        }
        if !(0.0..=1.0).contains(&self.eps_minus) {
            return Err(invalid(
                "eps-minus",
                format!("eps-minus must be in [0, 1], got {}", self.eps_minus),
            ));
        }
        if !(self.ranker_noise >= 0.0) || !self.ranker_noise.is_finite() {
            return Err(invalid(
                "ranker-noise",
                format!("ranker-noise must be ≥ 0, got {}", self.ranker_noise),
            ));
        }
        if self.traffic.is_empty() {
            return Err(invalid("traffic", "at least one ranker is required"));
        }
        if !(0.0..=1.0).contains(&self.p_swap) {
            return Err(invalid(
                "p-swap",
                format!("p-swap must be in [0, 1], got {}", self.p_swap),
            ));
        }
        Ok(())
    }

    pub fn num_rankers(&self) -> usize {
        self.traffic.len()
    }

    /// Examination propensity of rank `r`.
    pub fn propensity(&self, r: usize) -> f64 {
        (1.0 / r as f64).powf(self.eta)
    }

    pub fn true_curve(&self) -> PropensityCurve {
        PropensityCurve::power_law(self.eta, self.m)
    }
}

/// `p_r · (rel + eps_minus · (1 − rel))` with `p_r = (1/r)^eta`.
pub fn click_probability(rank: usize, relevant: bool, eta: f64, eps_minus: f64) -> f64 {
    let p = (1.0 / rank as f64).powf(eta);
    if relevant {
        p
    } else {
        p * eps_minus
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticWorld {
    pub table: RankingTable,
    m: usize,
    /// Per query, per local document index of `table`.
    relevance: Vec<Vec<bool>>,
    base_scores: Vec<Vec<f64>>,
}

impl SyntheticWorld {
    pub fn relevant(&self, q: QueryIx, doc: u32) -> bool {
        self.relevance[q.index()][doc as usize]
    }

    pub fn base_score(&self, q: QueryIx, doc: u32) -> f64 {
        self.base_scores[q.index()][doc as usize]
    }

    /// Click probability of `doc` at rank 1 under `eta = 0`.
    pub fn effective_relevance(&self, q: QueryIx, doc: u32, eps_minus: f64) -> f64 {
        if self.relevant(q, doc) {
            1.0
        } else {
            eps_minus
        }
    }

    /// Mean fraction of the top-M positions that hold the same document in
    /// two rankers, averaged over queries and ranker pairs.
    pub fn similarity(&self) -> f64 {
        let n = self.table.rankers().len();
        if n < 2 {
            return 1.0;
        }
        let mut total = 0.0;
        let mut count = 0usize;
        for q in 0..self.table.num_queries() {
            let q = QueryIx(q as u32);
            for a in 0..n {
                for b in a + 1..n {
                    let (Some(ra), Some(rb)) = (
                        self.table.ranking_ix(q, RankerIx(a as u32)),
                        self.table.ranking_ix(q, RankerIx(b as u32)),
                    ) else {
                        continue;
                    };
                    let same = ra.iter().zip(rb).take(self.m).filter(|(x, y)| x == y).count();
                    total += same as f64 / self.m as f64;
                    count += 1;
                }
            }
        }
        total / count.max(1) as f64
    }
}

fn normal<R: Rng>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

pub fn generate_world(cfg: &SimConfig) -> Result<SyntheticWorld, SimError> {
    cfg.validate()?;
    let c = cfg.candidates_per_query;
    let doc_ids: Vec<String> = (0..c).map(|j| format!("d{j}")).collect();
    let rankers: Vec<String> = (1..=cfg.num_rankers()).map(|i| format!("f{i}")).collect();

    struct Drawn {
        rel: Vec<bool>,
        base: Vec<f64>,
        orders: Vec<Vec<usize>>,
    }
    let drawn: Vec<Drawn> = (0..cfg.num_queries)
        .into_par_iter()
        .map(|q| {
            let mut rng = stream(cfg.seed, "world", q as u64);
            let rel: Vec<bool> = (0..c).map(|_| rng.random::<f64>() < cfg.relevant_fraction).collect();
            let base: Vec<f64> = rel.iter().map(|&r| f64::from(u8::from(r)) + normal(&mut rng)).collect();
            let orders = (0..cfg.num_rankers())
                .map(|_| {
                    let score: Vec<f64> = base.iter().map(|&s| s + cfg.ranker_noise * normal(&mut rng)).collect();
                    let mut order: Vec<usize> = (0..c).collect();
                    order.sort_by(|&x, &y| score[y].total_cmp(&score[x]).then(x.cmp(&y)));
                    order
                })
                .collect();
            Drawn { rel, base, orders }
        })
        .collect();

    let mut table = RankingTable::new();
    let mut relevance = Vec::with_capacity(cfg.num_queries);
    let mut base_scores = Vec::with_capacity(cfg.num_queries);
    for (q, d) in drawn.into_iter().enumerate() {
        let qid = format!("q{q}");
        for (ranker, order) in rankers.iter().zip(&d.orders) {
            let ranking: Vec<&str> = order.iter().map(|&j| doc_ids[j].as_str()).collect();
            table.insert(&qid, ranker, &ranking)?;
        }
        let qix = table.query_ix(&qid).expect("query just inserted");
        let mut rel = vec![false; c];
        let mut base = vec![0.0; c];
        for (j, id) in doc_ids.iter().enumerate() {
            let ix = table.doc_ix(qix, id).expect("document just inserted") as usize;
            rel[ix] = d.rel[j];
            base[ix] = d.base[j];
        }
        relevance.push(rel);
        base_scores.push(base);
    }
    Ok(SyntheticWorld {
        table,
        m: cfg.m,
        relevance,
        base_scores,
    })
}

fn check_world(world: &SyntheticWorld, cfg: &SimConfig) -> Result<(), SimError> {
    cfg.validate()?;
    if world.table.rankers().len() != cfg.num_rankers() {
        return Err(invalid(
            "traffic",
            format!(
                "traffic lists {} rankers but the world has {}",
                cfg.num_rankers(),
                world.table.rankers().len()
            ),
        ));
    }
    if world.relevance.len() != cfg.num_queries {
        return Err(invalid("queries", "world and config disagree on the number of queries"));
    }
    Ok(())
}

fn draw_clicks<R: Rng>(
    rng: &mut R,
    world: &SyntheticWorld,
    cfg: &SimConfig,
    q: QueryIx,
    shown: impl Fn(usize) -> Option<u32>,
) -> SmallVec<[u16; 4]> {
    let mut clicks = SmallVec::new();
    for pos in 1..=cfg.m {
        let Some(doc) = shown(pos) else { break };
        let prob = click_probability(pos, world.relevant(q, doc), cfg.eta, cfg.eps_minus);
        if rng.random::<f64>() < prob {
            clicks.push(pos as u16);
        }
    }
    clicks
}

/// Simulates `cfg.traffic[i]` impressions for ranker `i`.
///
/// The ranker sequence is a random shuffle of the exact traffic counts; each
/// impression then draws its query uniformly from its own random stream, so
/// the query is independent of the ranker.
pub fn simulate_clicks(world: &SyntheticWorld, cfg: &SimConfig) -> Result<ImpressionLog, SimError> {
    check_world(world, cfg)?;
    let mut assignment: Vec<u32> = cfg
        .traffic
        .iter()
        .enumerate()
        .flat_map(|(i, &n)| std::iter::repeat_n(i as u32, n as usize))
        .collect();
    assignment.shuffle(&mut stream(cfg.seed, "assign", 0));

    let impressions: Vec<Impression> = assignment
        .par_iter()
        .enumerate()
        .map(|(j, &ranker)| {
            let mut rng = stream(cfg.seed, "impression", j as u64);
            let q = QueryIx(rng.random_range(0..cfg.num_queries as u32));
            let ranker = RankerIx(ranker);
            let ranking = world
                .table
                .ranking_ix(q, ranker)
                .expect("world covers every query and ranker");
            let clicks = draw_clicks(&mut rng, world, cfg, q, |pos| ranking.get(pos - 1).copied());
            Impression {
                query: q,
                ranker,
                clicks,
            }
        })
        .collect();
    Ok(ImpressionLog::from_parts(
        world.table.fingerprint(),
        impressions,
        cfg.traffic.clone(),
    ))
}

/// Runs an explicit swap experiment between positions 1 and `k` over
/// `sessions` assigned queries.
///
/// Each session picks a query and a ranker uniformly, swaps the ranker's
/// results at 1 and `k` with probability `cfg.p_swap`, and simulates clicks
/// on the displayed list. `k = 1` is accepted and makes the swap a no-op.
pub fn simulate_swap_experiment(
    world: &SyntheticWorld,
    cfg: &SimConfig,
    k: usize,
    sessions: usize,
) -> Result<SwapLog, SimError> {
    check_world(world, cfg)?;
    if k == 0 || k > cfg.m {
        return Err(SimError::SwapRank { k, m: cfg.m });
    }
    let label = format!("swap-{k}");
    let n_rankers = cfg.num_rankers() as u32;
    let records: Vec<SwapImpression> = (0..sessions)
        .into_par_iter()
        .map(|j| {
            let mut rng = stream(cfg.seed, &label, j as u64);
            let q = QueryIx(rng.random_range(0..cfg.num_queries as u32));
            let ranker = RankerIx(rng.random_range(0..n_rankers));
            let swapped = rng.random::<f64>() < cfg.p_swap;
            let mut rec = SwapImpression {
                query: q,
                ranker,
                k: k as u16,
                swapped,
                clicks: SmallVec::new(),
            };
            let ranking = world
                .table
                .ranking_ix(q, ranker)
                .expect("world covers every query and ranker");
            rec.clicks = draw_clicks(&mut rng, world, cfg, q, |pos| rec.displayed_doc(ranking, pos));
            rec
        })
        .collect();
    let mut log = SwapLog::new(&world.table);
    for rec in records {
        log.push(&world.table, rec)?;
    }
    Ok(log)
}

/// The statistics an unboundedly large log from `world` converges to, per
/// impression: `c_hat(k, k') → p_k · r(k, k')` and
/// `notc_hat(k, k') → N(k, k') − p_k · r(k, k')`, where `N(k, k')` is the
/// query-probability mass of `S(k, k')` and `r(k, k')` its click-relevance
/// mass. Propensities are absolute, `p_k = (1/k)^eta`.
pub fn expected_stats(world: &SyntheticWorld, cfg: &SimConfig) -> Result<InterventionalStats, SimError> {
    check_world(world, cfg)?;
    let m = cfg.m;
    let sets = build_interventional_sets(&world.table, m)?;
    let pq = 1.0 / cfg.num_queries as f64;
    let mut mass = vec![0.0; m * m];
    let mut rel = vec![0.0; m * m];
    for q in 0..world.table.num_queries() {
        let q = QueryIx(q as u32);
        for d in 0..world.table.num_docs(q) as u32 {
            let ranks = sets.ranks_of(q, d);
            if ranks.len() < 2 {
                continue;
            }
            let r = world.effective_relevance(q, d, cfg.eps_minus);
            for &a in ranks {
                for &b in ranks {
                    if a != b {
                        let i = (a as usize - 1) * m + (b as usize - 1);
                        mass[i] += pq;
                        rel[i] += pq * r;
                    }
                }
            }
        }
    }
    let mut out = InterventionalStats::new(m);
    for k in 1..=m {
        for k2 in 1..=m {
            let i = (k - 1) * m + (k2 - 1);
            if k == k2 || sets.size(k, k2) == 0 {
                continue;
            }
            let c = cfg.propensity(k) * rel[i];
            out.set_rates(k, k2, c, mass[i] - c);
            if k < k2 {
                out.set_set_size(k, k2, sets.size(k, k2));
            }
        }
    }
    Ok(out)
}

// ── Ground truth file ───────────────────────────────────────────────────

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum TruthRecord {
    Propensity { rank: usize, p: f64 },
    Relevance { query: String, doc: String, rel: u8 },
}

/// True propensities and relevance labels of a simulated world.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    /// Absolute `p_r` for `r = 1..=M`.
    pub propensities: Vec<f64>,
    pub relevance: Vec<(String, String, bool)>,
}

impl GroundTruth {
    pub fn of(world: &SyntheticWorld, cfg: &SimConfig) -> Self {
        let mut relevance = Vec::new();
        for q in 0..world.table.num_queries() {
            let q = QueryIx(q as u32);
            for d in 0..world.table.num_docs(q) as u32 {
                relevance.push((
                    world.table.query_id(q).to_string(),
                    world.table.doc_id(q, d).to_string(),
                    world.relevant(q, d),
                ));
            }
        }
        Self {
            propensities: (1..=cfg.m).map(|r| cfg.propensity(r)).collect(),
            relevance,
        }
    }

    pub fn curve(&self) -> PropensityCurve {
        PropensityCurve::from_raw(&self.propensities)
    }
}

/// One JSON object per line: `{"kind":"propensity","rank":r,"p":..}` for each
/// rank, then `{"kind":"relevance","query":..,"doc":..,"rel":0|1}`.
pub fn write_ground_truth<W: Write>(truth: &GroundTruth, mut w: W) -> Result<(), SimError> {
    for (i, &p) in truth.propensities.iter().enumerate() {
        serde_json::to_writer(&mut w, &TruthRecord::Propensity { rank: i + 1, p }).map_err(std::io::Error::from)?;
        w.write_all(b"\n")?;
    }
    for (query, doc, rel) in &truth.relevance {
        let rec = TruthRecord::Relevance {
            query: query.clone(),
            doc: doc.clone(),
            rel: u8::from(*rel),
        };
        serde_json::to_writer(&mut w, &rec).map_err(std::io::Error::from)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_ground_truth<R: BufRead>(reader: R) -> Result<GroundTruth, SimError> {
    let mut truth = GroundTruth {
        propensities: Vec::new(),
        relevance: Vec::new(),
    };
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let bad = |message: String| SimError::Malformed { line: i + 1, message };
        match serde_json::from_str(&line).map_err(|e| bad(e.to_string()))? {
            TruthRecord::Propensity { rank, p } => {
                if rank != truth.propensities.len() + 1 {
                    return Err(bad(format!(
                        "expected rank {}, found {rank}",
                        truth.propensities.len() + 1
                    )));
                }
                if !(p > 0.0 && p <= 1.0) {
                    return Err(bad(format!("propensity must be in (0, 1], got {p}")));
                }
                truth.propensities.push(p);
            }
            TruthRecord::Relevance { query, doc, rel } => {
                if rel > 1 {
                    return Err(bad(format!("rel must be 0 or 1, got {rel}")));
                }
                truth.relevance.push((query, doc, rel == 1));
            }
        }
    }
    if truth.propensities.is_empty() {
        return Err(SimError::Malformed {
            line: 0,
            message: "no propensity records".into(),
        });
    }
    Ok(truth)
}

pub fn parse_ground_truth(path: impl AsRef<Path>) -> Result<GroundTruth, SimError> {
    read_ground_truth(std::io::BufReader::new(std::fs::File::open(path)?))
}
