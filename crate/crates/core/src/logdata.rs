//! Log data model: ranking tables, impressions and their line-delimited JSON
//! file formats.
//!
//! A [`RankingTable`] holds the deterministic ranking each ranker produces for
//! each query. An [`ImpressionLog`] holds the logged sessions (which ranker
//! served which query, and which positions were clicked) together with the
//! per-ranker traffic counts. Query, ranker and document ids are opaque
//! strings; internally they are interned into dense indices so that the
//! estimation passes never touch strings.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use smallvec::SmallVec;
use statrs::distribution::{ChiSquared, ContinuousCDF};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LogError {
    #[error("line {line}: malformed record: {message}")]
    Malformed { line: usize, message: String },

    #[error("line {line}: duplicate document in ranking: query {query:?}, ranker {ranker:?}, doc {doc:?}")]
    DuplicateDoc {
        line: usize,
        query: String,
        ranker: String,
        doc: String,
    },

    #[error("line {line}: duplicate ranking for query {query:?}, ranker {ranker:?}")]
    DuplicateEntry { line: usize, query: String, ranker: String },

    #[error("line {line}: impression references unknown (query {query:?}, ranker {ranker:?})")]
    UnknownEntry { line: usize, query: String, ranker: String },

    #[error("line {line}: click/ranking mismatch: doc {doc:?} clicked at position {pos}, ranked at {ranked}")]
    ClickMismatch {
        line: usize,
        doc: String,
        pos: usize,
        ranked: String,
    },

    #[error(
        "query {query:?}: rankers disagree on the top-{m} candidates (doc {doc:?} missing from ranker {ranker:?})"
    )]
    CandidateMismatch {
        query: String,
        ranker: String,
        doc: String,
        m: usize,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Dense index of a query inside a [`RankingTable`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct QueryIx(pub u32);

/// Dense index of a ranker inside a [`RankingTable`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RankerIx(pub u32);

impl QueryIx {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl RankerIx {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, Default)]
struct QueryEntry {
    id: String,
    /// Union of the candidates any ranker returned for this query.
    docs: Vec<String>,
    doc_index: HashMap<String, u32>,
    /// Indexed by ranker; documents are local indices into `docs`.
    rankings: Vec<Option<Vec<u32>>>,
}

/// Per (query, ranker) ranked document lists.
#[derive(Debug, Clone, Default)]
pub struct RankingTable {
    queries: Vec<QueryEntry>,
    query_index: HashMap<String, u32>,
    rankers: Vec<String>,
    ranker_index: HashMap<String, u32>,
    order: Vec<(QueryIx, RankerIx)>,
    fingerprint: OnceLock<u64>,
}

impl RankingTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Number of (query, ranker) entries.
    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn num_queries(&self) -> usize {
        self.queries.len()
    }

    pub fn rankers(&self) -> &[String] {
        &self.rankers
    }

    pub fn query_id(&self, q: QueryIx) -> &str {
        &self.queries[q.index()].id
    }

    pub fn ranker_id(&self, r: RankerIx) -> &str {
        &self.rankers[r.index()]
    }

    pub fn query_ix(&self, query: &str) -> Option<QueryIx> {
        self.query_index.get(query).map(|&i| QueryIx(i))
    }

    pub fn ranker_ix(&self, ranker: &str) -> Option<RankerIx> {
        self.ranker_index.get(ranker).map(|&i| RankerIx(i))
    }

    /// Entries in insertion order.
    pub fn entries(&self) -> &[(QueryIx, RankerIx)] {
        &self.order
    }

    /// Adds the ranking `ranker` produces for `query`.
    pub fn insert<S: AsRef<str>>(&mut self, query: &str, ranker: &str, ranking: &[S]) -> Result<(), LogError> {
        self.insert_at(query, ranker, ranking, 0)
    }

    fn insert_at<S: AsRef<str>>(
        &mut self,
        query: &str,
        ranker: &str,
        ranking: &[S],
        line: usize,
    ) -> Result<(), LogError> {
        let mut seen = HashMap::with_capacity(ranking.len());
        for doc in ranking {
            if seen.insert(doc.as_ref(), ()).is_some() {
                return Err(LogError::DuplicateDoc {
                    line,
                    query: query.to_owned(),
                    ranker: ranker.to_owned(),
                    doc: doc.as_ref().to_owned(),
                });
            }
        }

        let q = match self.query_index.get(query) {
            Some(&q) => q,
            None => {
                let q = self.queries.len() as u32;
                self.queries.push(QueryEntry {
                    id: query.to_owned(),
                    ..Default::default()
                });
                self.query_index.insert(query.to_owned(), q);
                q
            }
        };
        let r = match self.ranker_index.get(ranker) {
            Some(&r) => r,
            None => {
                let r = self.rankers.len() as u32;
                self.rankers.push(ranker.to_owned());
                self.ranker_index.insert(ranker.to_owned(), r);
                r
            }
        };

        let entry = &mut self.queries[q as usize];
        if entry.rankings.len() <= r as usize {
            entry.rankings.resize(r as usize + 1, None);
        }
        if entry.rankings[r as usize].is_some() {
            return Err(LogError::DuplicateEntry {
                line,
                query: query.to_owned(),
                ranker: ranker.to_owned(),
            });
        }
        let local = ranking
            .iter()
            .map(|doc| {
                let doc = doc.as_ref();
                match entry.doc_index.get(doc) {
                    Some(&d) => d,
                    None => {
                        let d = entry.docs.len() as u32;
                        entry.docs.push(doc.to_owned());
                        entry.doc_index.insert(doc.to_owned(), d);
                        d
                    }
                }
            })
            .collect();
        entry.rankings[r as usize] = Some(local);
        self.order.push((QueryIx(q), RankerIx(r)));
        self.fingerprint.take();
        Ok(())
    }

    /// Ranked local document indices for one entry.
    pub fn ranking_ix(&self, q: QueryIx, r: RankerIx) -> Option<&[u32]> {
        self.queries.get(q.index())?.rankings.get(r.index())?.as_deref()
    }

    /// Ranked document ids for one entry, position 1 first.
    pub fn ranking(&self, query: &str, ranker: &str) -> Option<Vec<&str>> {
        let q = self.query_ix(query)?;
        let r = self.ranker_ix(ranker)?;
        let docs = &self.queries[q.index()].docs;
        self.ranking_ix(q, r)
            .map(|ix| ix.iter().map(|&d| docs[d as usize].as_str()).collect())
    }

    /// 1-based rank of `doc` in `ranker`'s ranking for `query`.
    pub fn rank(&self, query: &str, ranker: &str, doc: &str) -> Option<usize> {
        let q = self.query_ix(query)?;
        let r = self.ranker_ix(ranker)?;
        let d = *self.queries[q.index()].doc_index.get(doc)?;
        self.ranking_ix(q, r)?.iter().position(|&x| x == d).map(|p| p + 1)
    }

    /// Number of distinct candidates seen for a query.
    pub fn num_docs(&self, q: QueryIx) -> usize {
        self.queries[q.index()].docs.len()
    }

    pub fn doc_id(&self, q: QueryIx, doc: u32) -> &str {
        &self.queries[q.index()].docs[doc as usize]
    }

    pub fn doc_ix(&self, q: QueryIx, doc: &str) -> Option<u32> {
        self.queries[q.index()].doc_index.get(doc).copied()
    }

    /// Rankings for query `q`, indexed by ranker (None where the ranker has
    /// no entry for the query).
    pub(crate) fn query_rankings(&self, q: QueryIx) -> &[Option<Vec<u32>>] {
        &self.queries[q.index()].rankings
    }

    /// Content hash used to check that derived structures come from this
    /// table.
    pub fn fingerprint(&self) -> u64 {
        *self.fingerprint.get_or_init(|| {
            let mut h = Fnv::default();
            for &(q, r) in &self.order {
                h.write(self.query_id(q).as_bytes());
                h.write(&[0xff]);
                h.write(self.ranker_id(r).as_bytes());
                h.write(&[0xfe]);
                for &d in self.ranking_ix(q, r).unwrap_or_default() {
                    h.write(self.doc_id(q, d).as_bytes());
                    h.write(&[0xfd]);
                }
            }
            h.0
        })
    }

    /// Checks that, for every query, each document that some ranker places in
    /// its top `m` appears somewhere in every other ranker's list for that
    /// query. Disagreement further down is allowed.
    pub fn validate_candidate_sets(&self, m: usize) -> Result<(), LogError> {
        for entry in &self.queries {
            let present: Vec<(usize, &Vec<u32>)> = entry
                .rankings
                .iter()
                .enumerate()
                .filter_map(|(r, x)| x.as_ref().map(|x| (r, x)))
                .collect();
            let mut has = vec![false; entry.docs.len()];
            for &(r, ranking) in &present {
                has.iter_mut().for_each(|h| *h = false);
                for &d in ranking {
                    has[d as usize] = true;
                }
                for &(_, other) in &present {
                    if let Some(&d) = other.iter().take(m).find(|&&d| !has[d as usize]) {
                        return Err(LogError::CandidateMismatch {
                            query: entry.id.clone(),
                            ranker: self.rankers[r].clone(),
                            doc: entry.docs[d as usize].clone(),
                            m,
                        });
                    }
                }
            }
        }
        Ok(())
    }
}

#[derive(Default)]
struct Fnv(u64);

impl Fnv {
    fn write(&mut self, bytes: &[u8]) {
        if self.0 == 0 {
            self.0 = 0xcbf2_9ce4_8422_2325;
        }
        for &b in bytes {
            self.0 = (self.0 ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
}

/// One logged session.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Impression {
    pub query: QueryIx,
    pub ranker: RankerIx,
    /// Clicked 1-based positions, ascending and distinct.
    pub clicks: SmallVec<[u16; 4]>,
}

impl Impression {
    pub fn is_clicked(&self, pos: usize) -> bool {
        self.clicks.iter().any(|&c| c as usize == pos)
    }
}

/// Logged impressions plus per-ranker traffic counts.
#[derive(Debug, Clone)]
pub struct ImpressionLog {
    table_fingerprint: u64,
    impressions: Vec<Impression>,
    traffic: Vec<u64>,
}

impl ImpressionLog {
    /// An empty log bound to `table`.
    pub fn new(table: &RankingTable) -> Self {
        Self {
            table_fingerprint: table.fingerprint(),
            impressions: Vec::new(),
            traffic: vec![0; table.rankers().len()],
        }
    }

    /// Validates impressions against the table and counts traffic.
    pub fn from_impressions(table: &RankingTable, impressions: Vec<Impression>) -> Result<Self, LogError> {
        let mut log = Self::new(table);
        log.impressions.reserve(impressions.len());
        for (i, imp) in impressions.into_iter().enumerate() {
            log.push(table, imp, i + 1)?;
        }
        Ok(log)
    }

    fn push(&mut self, table: &RankingTable, mut imp: Impression, line: usize) -> Result<(), LogError> {
        let ranking = table
            .ranking_ix(imp.query, imp.ranker)
            .ok_or_else(|| LogError::UnknownEntry {
                line,
                query: table
                    .queries
                    .get(imp.query.index())
                    .map(|q| q.id.clone())
                    .unwrap_or_default(),
                ranker: table.rankers.get(imp.ranker.index()).cloned().unwrap_or_default(),
            })?;
        imp.clicks.sort_unstable();
        imp.clicks.dedup();
        if let Some(&pos) = imp.clicks.iter().find(|&&p| p == 0 || p as usize > ranking.len()) {
            return Err(LogError::ClickMismatch {
                line,
                doc: String::new(),
                pos: pos as usize,
                ranked: "outside the ranking".into(),
            });
        }
        self.traffic[imp.ranker.index()] += 1;
        self.impressions.push(imp);
        Ok(())
    }

    /// Builds a log from already-validated parts.
    pub(crate) fn from_parts(table_fingerprint: u64, impressions: Vec<Impression>, traffic: Vec<u64>) -> Self {
        Self {
            table_fingerprint,
            impressions,
            traffic,
        }
    }

    pub fn impressions(&self) -> &[Impression] {
        &self.impressions
    }

    pub fn len(&self) -> usize {
        self.impressions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.impressions.is_empty()
    }

    /// n_i per ranker, indexed like `RankingTable::rankers`.
    pub fn traffic(&self) -> &[u64] {
        &self.traffic
    }

    pub fn traffic_by_name<'t>(&self, table: &'t RankingTable) -> BTreeMap<&'t str, u64> {
        table
            .rankers()
            .iter()
            .zip(&self.traffic)
            .map(|(r, &n)| (r.as_str(), n))
            .collect()
    }

    pub fn table_fingerprint(&self) -> u64 {
        self.table_fingerprint
    }

    pub fn total_clicks(&self) -> usize {
        self.impressions.iter().map(|i| i.clicks.len()).sum()
    }
}

// ── File formats ────────────────────────────────────────────────────────

#[derive(Deserialize)]
struct RankingRecord {
    query: String,
    ranker: String,
    ranking: Vec<String>,
}

#[derive(Serialize)]
struct RankingRecordRef<'a> {
    query: &'a str,
    ranker: &'a str,
    ranking: Vec<&'a str>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClickRecord {
    pub doc: String,
    pub pos: usize,
}

#[derive(Deserialize)]
struct ImpressionRecord {
    query: String,
    ranker: String,
    #[serde(default)]
    clicks: Vec<ClickRecord>,
}

#[derive(Serialize)]
struct ImpressionRecordRef<'a> {
    query: &'a str,
    ranker: &'a str,
    clicks: Vec<ClickRef<'a>>,
}

#[derive(Serialize)]
struct ClickRef<'a> {
    doc: &'a str,
    pos: usize,
}

fn malformed(line: usize, e: impl std::fmt::Display) -> LogError {
    LogError::Malformed {
        line,
        message: e.to_string(),
    }
}

pub fn parse_rankings(path: impl AsRef<Path>) -> Result<RankingTable, LogError> {
    read_rankings(BufReader::new(File::open(path)?))
}

pub fn read_rankings<R: BufRead>(reader: R) -> Result<RankingTable, LogError> {
    let mut table = RankingTable::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: RankingRecord = serde_json::from_str(&line).map_err(|e| malformed(i + 1, e))?;
        table.insert_at(&rec.query, &rec.ranker, &rec.ranking, i + 1)?;
    }
    Ok(table)
}

pub fn write_rankings<W: Write>(table: &RankingTable, mut w: W) -> Result<(), LogError> {
    for &(q, r) in table.entries() {
        let rec = RankingRecordRef {
            query: table.query_id(q),
            ranker: table.ranker_id(r),
            ranking: table
                .ranking_ix(q, r)
                .unwrap_or_default()
                .iter()
                .map(|&d| table.doc_id(q, d))
                .collect(),
        };
        serde_json::to_writer(&mut w, &rec).map_err(std::io::Error::from)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn parse_impressions(path: impl AsRef<Path>, table: &RankingTable) -> Result<ImpressionLog, LogError> {
    read_impressions(BufReader::new(File::open(path)?), table)
}

pub fn read_impressions<R: BufRead>(reader: R, table: &RankingTable) -> Result<ImpressionLog, LogError> {
    let mut log = ImpressionLog::new(table);
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: ImpressionRecord = serde_json::from_str(&line).map_err(|e| malformed(i + 1, e))?;
        let imp = resolve_impression(table, &rec.query, &rec.ranker, &rec.clicks, i + 1)?;
        log.push(table, imp, i + 1)?;
    }
    Ok(log)
}

/// Resolves a string-keyed impression against the table, checking that every
/// click agrees with the ranking.
pub(crate) fn resolve_impression(
    table: &RankingTable,
    query: &str,
    ranker: &str,
    clicks: &[ClickRecord],
    line: usize,
) -> Result<Impression, LogError> {
    let unknown = || LogError::UnknownEntry {
        line,
        query: query.to_owned(),
        ranker: ranker.to_owned(),
    };
    let q = table.query_ix(query).ok_or_else(unknown)?;
    let r = table.ranker_ix(ranker).ok_or_else(unknown)?;
    let ranking = table.ranking_ix(q, r).ok_or_else(unknown)?;
    let mut positions = SmallVec::new();
    for c in clicks {
        if c.pos == 0 {
            return Err(malformed(line, "positions are 1-based"));
        }
        let ok = table
            .doc_ix(q, &c.doc)
            .is_some_and(|d| ranking.get(c.pos - 1) == Some(&d));
        if !ok {
            let ranked = match table.rank(query, ranker, &c.doc) {
                Some(p) => p.to_string(),
                None => "nowhere".into(),
            };
            return Err(LogError::ClickMismatch {
                line,
                doc: c.doc.clone(),
                pos: c.pos,
                ranked,
            });
        }
        positions.push(c.pos as u16);
    }
    Ok(Impression {
        query: q,
        ranker: r,
        clicks: positions,
    })
}

pub fn write_impressions<W: Write>(log: &ImpressionLog, table: &RankingTable, mut w: W) -> Result<(), LogError> {
    for imp in log.impressions() {
        let ranking = table.ranking_ix(imp.query, imp.ranker).unwrap_or_default();
        let rec = ImpressionRecordRef {
            query: table.query_id(imp.query),
            ranker: table.ranker_id(imp.ranker),
            clicks: imp
                .clicks
                .iter()
                .map(|&p| ClickRef {
                    doc: table.doc_id(imp.query, ranking[p as usize - 1]),
                    pos: p as usize,
                })
                .collect(),
        };
        serde_json::to_writer(&mut w, &rec).map_err(std::io::Error::from)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

// ── Swap-experiment logs ────────────────────────────────────────────────

/// One session of an explicit Swap(1, k) experiment. When `swapped` is set
/// the ranker's results at positions 1 and `k` were exchanged before display;
/// `clicks` refer to displayed positions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SwapImpression {
    pub query: QueryIx,
    pub ranker: RankerIx,
    pub k: u16,
    pub swapped: bool,
    pub clicks: SmallVec<[u16; 4]>,
}

impl SwapImpression {
    /// Displayed position of the ranker's original top result.
    pub fn top_position(&self) -> usize {
        if self.swapped {
            self.k as usize
        } else {
            1
        }
    }

    /// Local document shown at `pos` (1-based).
    pub fn displayed_doc(&self, ranking: &[u32], pos: usize) -> Option<u32> {
        let k = self.k as usize;
        let src = if self.swapped && pos == 1 {
            k
        } else if self.swapped && pos == k {
            1
        } else {
            pos
        };
        ranking.get(src.checked_sub(1)?).copied()
    }
}

/// Arm-labelled sessions of swap experiments.
#[derive(Debug, Clone)]
pub struct SwapLog {
    table_fingerprint: u64,
    records: Vec<SwapImpression>,
}

impl SwapLog {
    pub fn new(table: &RankingTable) -> Self {
        Self {
            table_fingerprint: table.fingerprint(),
            records: Vec::new(),
        }
    }

    /// Appends a session after checking it against the table.
    pub fn push(&mut self, table: &RankingTable, mut rec: SwapImpression) -> Result<(), LogError> {
        let line = self.records.len() + 1;
        let ranking = table
            .ranking_ix(rec.query, rec.ranker)
            .ok_or_else(|| LogError::UnknownEntry {
                line,
                query: String::new(),
                ranker: String::new(),
            })?;
        if rec.k == 0 || rec.k as usize > ranking.len() {
            return Err(malformed(line, format!("swap rank {} outside the ranking", rec.k)));
        }
        rec.clicks.sort_unstable();
        rec.clicks.dedup();
        if let Some(&p) = rec.clicks.iter().find(|&&p| p == 0 || p as usize > ranking.len()) {
            return Err(LogError::ClickMismatch {
                line,
                doc: String::new(),
                pos: p as usize,
                ranked: "outside the ranking".into(),
            });
        }
        self.records.push(rec);
        Ok(())
    }

    pub fn records(&self) -> &[SwapImpression] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn table_fingerprint(&self) -> u64 {
        self.table_fingerprint
    }
}

#[derive(Deserialize)]
struct SwapRecord {
    query: String,
    ranker: String,
    k: u16,
    swapped: bool,
    #[serde(default)]
    clicks: Vec<ClickRecord>,
}

#[derive(Serialize)]
struct SwapRecordRef<'a> {
    query: &'a str,
    ranker: &'a str,
    k: u16,
    swapped: bool,
    clicks: Vec<ClickRef<'a>>,
}

pub fn parse_swap_log(path: impl AsRef<Path>, table: &RankingTable) -> Result<SwapLog, LogError> {
    read_swap_log(BufReader::new(File::open(path)?), table)
}

pub fn read_swap_log<R: BufRead>(reader: R, table: &RankingTable) -> Result<SwapLog, LogError> {
    let mut log = SwapLog::new(table);
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let line_no = i + 1;
        let rec: SwapRecord = serde_json::from_str(&line).map_err(|e| malformed(line_no, e))?;
        let unknown = || LogError::UnknownEntry {
            line: line_no,
            query: rec.query.clone(),
            ranker: rec.ranker.clone(),
        };
        let q = table.query_ix(&rec.query).ok_or_else(unknown)?;
        let r = table.ranker_ix(&rec.ranker).ok_or_else(unknown)?;
        let ranking = table.ranking_ix(q, r).ok_or_else(unknown)?;
        let mut imp = SwapImpression {
            query: q,
            ranker: r,
            k: rec.k,
            swapped: rec.swapped,
            clicks: SmallVec::new(),
        };
        for c in &rec.clicks {
            let shown = imp.displayed_doc(ranking, c.pos);
            if c.pos == 0 || shown.is_none() || shown != table.doc_ix(q, &c.doc) {
                return Err(LogError::ClickMismatch {
                    line: line_no,
                    doc: c.doc.clone(),
                    pos: c.pos,
                    ranked: "elsewhere in the displayed ranking".into(),
                });
            }
            imp.clicks.push(c.pos as u16);
        }
        log.push(table, imp).map_err(|e| match e {
            LogError::Malformed { message, .. } => LogError::Malformed { line: line_no, message },
            e => e,
        })?;
    }
    Ok(log)
}

pub fn write_swap_log<W: Write>(log: &SwapLog, table: &RankingTable, mut w: W) -> Result<(), LogError> {
    for rec in log.records() {
        let ranking = table.ranking_ix(rec.query, rec.ranker).unwrap_or_default();
        let out = SwapRecordRef {
            query: table.query_id(rec.query),
            ranker: table.ranker_id(rec.ranker),
            k: rec.k,
            swapped: rec.swapped,
            clicks: rec
                .clicks
                .iter()
                .map(|&p| ClickRef {
                    doc: table.doc_id(rec.query, rec.displayed_doc(ranking, p as usize).unwrap_or(0)),
                    pos: p as usize,
                })
                .collect(),
        };
        serde_json::to_writer(&mut w, &out).map_err(std::io::Error::from)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

// ── Independence diagnostics ────────────────────────────────────────────

/// Significance level below which the query distributions of the rankers are
/// reported as diverging.
pub const INDEPENDENCE_ALPHA: f64 = 0.01;

/// Advisory check that queries are assigned to rankers independently of the
/// query. Rows of the contingency table are rankers, columns are queries (or
/// query buckets).
#[derive(Debug, Clone)]
pub struct IndependenceReport {
    /// Per ranker: category label → impression count.
    pub histograms: BTreeMap<String, BTreeMap<String, u64>>,
    pub chi_square: f64,
    pub dof: u64,
    pub p_value: f64,
    /// Cramér's V², in [0, 1]: 0 for identical query distributions, 1 when
    /// the rankers see disjoint sets of queries.
    pub divergence: f64,
    /// The independence hypothesis is rejected at [`INDEPENDENCE_ALPHA`].
    pub warning: bool,
    /// Query supports do not overlap at all.
    pub disjoint: bool,
    /// Rankers present in the table with no impressions.
    pub empty_rankers: Vec<String>,
}

pub fn validate_independence_report(log: &ImpressionLog, table: &RankingTable) -> IndependenceReport {
    independence_by(
        log,
        table,
        table.num_queries(),
        |q| q.index(),
        |c| table.query_id(QueryIx(c as u32)).to_owned(),
    )
}

/// Same test with queries hashed into `buckets` groups, which keeps expected
/// cell counts large when there are many rare queries.
pub fn independence_report_bucketed(log: &ImpressionLog, table: &RankingTable, buckets: usize) -> IndependenceReport {
    let buckets = buckets.max(1);
    let bucket_of: Vec<usize> = (0..table.num_queries())
        .map(|q| {
            let mut h = Fnv::default();
            h.write(table.query_id(QueryIx(q as u32)).as_bytes());
            (h.0 % buckets as u64) as usize
        })
        .collect();
    independence_by(log, table, buckets, |q| bucket_of[q.index()], |c| format!("bucket-{c}"))
}

fn independence_by(
    log: &ImpressionLog,
    table: &RankingTable,
    categories: usize,
    category_of: impl Fn(QueryIx) -> usize,
    label: impl Fn(usize) -> String,
) -> IndependenceReport {
    let rankers = table.rankers().len();
    let mut counts = vec![vec![0u64; categories]; rankers];
    for imp in log.impressions() {
        counts[imp.ranker.index()][category_of(imp.query)] += 1;
    }

    let histograms = (0..rankers)
        .map(|r| {
            let h = counts[r]
                .iter()
                .enumerate()
                .filter(|(_, &n)| n > 0)
                .map(|(c, &n)| (label(c), n))
                .collect();
            (table.rankers()[r].clone(), h)
        })
        .collect();
    let empty_rankers = (0..rankers)
        .filter(|&r| log.traffic()[r] == 0)
        .map(|r| table.rankers()[r].clone())
        .collect();

    let rows: Vec<usize> = (0..rankers).filter(|&r| log.traffic()[r] > 0).collect();
    let col_tot: Vec<u64> = (0..categories)
        .map(|c| rows.iter().map(|&r| counts[r][c]).sum())
        .collect();
    let cols: Vec<usize> = (0..categories).filter(|&c| col_tot[c] > 0).collect();
    let total: u64 = col_tot.iter().sum();

    let mut report = IndependenceReport {
        histograms,
        chi_square: 0.0,
        dof: 0,
        p_value: 1.0,
        divergence: 0.0,
        warning: false,
        disjoint: false,
        empty_rankers,
    };
    if rows.len() < 2 || cols.len() < 2 {
        return report;
    }

    let n = total as f64;
    let mut chi = 0.0;
    let mut disjoint = true;
    for &c in &cols {
        let nonzero_rows = rows.iter().filter(|&&r| counts[r][c] > 0).count();
        if nonzero_rows > 1 {
            disjoint = false;
        }
        for &r in &rows {
            let expected = log.traffic()[r] as f64 * col_tot[c] as f64 / n;
            let diff = counts[r][c] as f64 - expected;
            chi += diff * diff / expected;
        }
    }
    let dof = ((rows.len() - 1) * (cols.len() - 1)) as u64;
    let k = rows.len().min(cols.len()) as f64 - 1.0;
    report.chi_square = chi;
    report.dof = dof;
    report.p_value = ChiSquared::new(dof as f64).map(|d| d.sf(chi)).unwrap_or(f64::NAN);
    report.divergence = (chi / (n * k)).clamp(0.0, 1.0);
    report.warning = report.p_value < INDEPENDENCE_ALPHA;
    report.disjoint = disjoint;
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table_from(lines: &str) -> RankingTable {
        read_rankings(lines.as_bytes()).unwrap()
    }

    const TWO: &str = r#"{"query":"q1","ranker":"f1","ranking":["a","b","c"]}
{"query":"q1","ranker":"f2","ranking":["b","a","c"]}
"#;

    #[test]
    fn reads_back_ranks() {
        let t = table_from(TWO);
        assert_eq!(t.len(), 2);
        assert_eq!(t.rank("q1", "f1", "a"), Some(1));
        assert_eq!(t.rank("q1", "f2", "a"), Some(2));
        assert_eq!(t.rank("q1", "f2", "z"), None);
        assert_eq!(t.ranking("q1", "f2").unwrap(), vec!["b", "a", "c"]);
    }

    #[test]
    fn empty_file_gives_empty_table() {
        let t = table_from("");
        assert!(t.is_empty());
        assert_eq!(t.num_queries(), 0);
    }

    #[test]
    fn duplicate_doc_is_rejected() {
        let err = read_rankings(r#"{"query":"q1","ranker":"f1","ranking":["a","a"]}"#.as_bytes()).unwrap_err();
        assert!(matches!(err, LogError::DuplicateDoc { line: 1, .. }));
        assert!(err.to_string().contains("duplicate document in ranking"));
    }

    #[test]
    fn duplicate_key_is_rejected() {
        let src = format!("{TWO}{}", r#"{"query":"q1","ranker":"f1","ranking":["c"]}"#);
        let err = read_rankings(src.as_bytes()).unwrap_err();
        assert!(matches!(err, LogError::DuplicateEntry { line: 3, .. }));
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let src = format!("{TWO}\nnot json\n");
        match read_rankings(src.as_bytes()).unwrap_err() {
            LogError::Malformed { line, .. } => assert_eq!(line, 4),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn traffic_counts() {
        let t = table_from(TWO);
        let mut src = String::new();
        for _ in 0..3 {
            src.push_str(r#"{"query":"q1","ranker":"f1","clicks":[]}"#);
            src.push('\n');
        }
        for _ in 0..2 {
            src.push_str(r#"{"query":"q1","ranker":"f2","clicks":[{"doc":"b","pos":1}]}"#);
            src.push('\n');
        }
        let log = read_impressions(src.as_bytes(), &t).unwrap();
        let traffic = log.traffic_by_name(&t);
        assert_eq!(traffic["f1"], 3);
        assert_eq!(traffic["f2"], 2);
        assert_eq!(log.traffic().iter().sum::<u64>(), log.len() as u64);
    }

    #[test]
    fn click_mismatch_is_rejected() {
        let t = table_from(TWO);
        let err = read_impressions(
            r#"{"query":"q1","ranker":"f1","clicks":[{"doc":"a","pos":2}]}"#.as_bytes(),
            &t,
        )
        .unwrap_err();
        assert!(err.to_string().contains("click/ranking mismatch"), "{err}");
    }

    #[test]
    fn unknown_entry_is_rejected() {
        let t = table_from(TWO);
        let err = read_impressions(r#"{"query":"q9","ranker":"f1","clicks":[]}"#.as_bytes(), &t).unwrap_err();
        assert!(matches!(err, LogError::UnknownEntry { .. }));
    }

    #[test]
    fn zero_click_stream_is_valid() {
        let t = table_from(TWO);
        let src = "{\"query\":\"q1\",\"ranker\":\"f1\",\"clicks\":[]}\n{\"query\":\"q1\",\"ranker\":\"f2\"}\n";
        let log = read_impressions(src.as_bytes(), &t).unwrap();
        assert_eq!(log.len(), 2);
        assert_eq!(log.total_clicks(), 0);
    }

    #[test]
    fn candidate_sets_checked_over_top_m_only() {
        let t = table_from(
            r#"{"query":"q","ranker":"f1","ranking":["a","b","x"]}
{"query":"q","ranker":"f2","ranking":["b","a","y"]}"#,
        );
        assert!(t.validate_candidate_sets(2).is_ok());
        assert!(matches!(
            t.validate_candidate_sets(3),
            Err(LogError::CandidateMismatch { .. })
        ));
    }

    #[test]
    fn fingerprint_tracks_content() {
        let a = table_from(TWO);
        let b = table_from(TWO);
        assert_eq!(a.fingerprint(), b.fingerprint());
        let mut c = table_from(TWO);
        c.insert("q2", "f1", &["z"]).unwrap();
        assert_ne!(a.fingerprint(), c.fingerprint());
    }

    fn log_with(t: &RankingTable, pairs: &[(&str, &str, usize)]) -> ImpressionLog {
        let imps = pairs
            .iter()
            .flat_map(|&(q, r, n)| {
                let imp = Impression {
                    query: t.query_ix(q).unwrap(),
                    ranker: t.ranker_ix(r).unwrap(),
                    clicks: SmallVec::new(),
                };
                std::iter::repeat_n(imp, n)
            })
            .collect();
        ImpressionLog::from_impressions(t, imps).unwrap()
    }

    #[test]
    fn identical_query_distributions_have_zero_divergence() {
        let t = table_from(
            r#"{"query":"q1","ranker":"f1","ranking":["a"]}
{"query":"q1","ranker":"f2","ranking":["a"]}
{"query":"q2","ranker":"f1","ranking":["a"]}
{"query":"q2","ranker":"f2","ranking":["a"]}"#,
        );
        let log = log_with(
            &t,
            &[("q1", "f1", 5), ("q1", "f2", 5), ("q2", "f1", 3), ("q2", "f2", 3)],
        );
        let rep = validate_independence_report(&log, &t);
        assert!(rep.divergence.abs() < 1e-12);
        assert!(!rep.warning);
        assert_eq!(rep.histograms["f1"]["q1"], 5);
    }

    #[test]
    fn disjoint_supports_are_flagged() {
        let t = table_from(
            r#"{"query":"q1","ranker":"f1","ranking":["a"]}
{"query":"q2","ranker":"f2","ranking":["a"]}"#,
        );
        let log = log_with(&t, &[("q1", "f1", 20), ("q2", "f2", 20)]);
        let rep = validate_independence_report(&log, &t);
        assert!(rep.disjoint);
        assert!((rep.divergence - 1.0).abs() < 1e-12);
        assert!(rep.warning);
    }

    #[test]
    fn swap_log_round_trip_and_validation() {
        let t = table_from(r#"{"query":"q1","ranker":"f1","ranking":["a","b","c"]}"#);
        let src = r#"{"query":"q1","ranker":"f1","k":3,"swapped":true,"clicks":[{"doc":"a","pos":3}]}
{"query":"q1","ranker":"f1","k":3,"swapped":false,"clicks":[{"doc":"a","pos":1}]}
"#;
        let log = read_swap_log(src.as_bytes(), &t).unwrap();
        assert_eq!(log.records()[0].top_position(), 3);
        let mut out = Vec::new();
        write_swap_log(&log, &t, &mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), src);

        let bad = r#"{"query":"q1","ranker":"f1","k":3,"swapped":true,"clicks":[{"doc":"a","pos":1}]}"#;
        assert!(matches!(
            read_swap_log(bad.as_bytes(), &t),
            Err(LogError::ClickMismatch { .. })
        ));
    }

    #[test]
    fn empty_rankers_are_reported() {
        let t = table_from(TWO);
        let log = log_with(&t, &[("q1", "f1", 4)]);
        let rep = validate_independence_report(&log, &t);
        assert_eq!(rep.empty_rankers, vec!["f2".to_string()]);
        assert_eq!(rep.divergence, 0.0);
    }
}
