//! `harvest`: simulate click logs, harvest interventions, estimate and
//! evaluate position-bias propensity curves.
//!
//! Exit codes: 0 on success, 1 on runtime failure, 2 on usage or validation
//! errors.

// `!(x > 0.0)` deliberately rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};
use serde::{Serialize, Serializer};
use thiserror::Error;

use harvest::estimators::{
    all_pairs_estimate, estimate_from_stats, naive_ctr_curve, swap_gold_estimate, Absence, AllPairsOptions,
    EstimateError, Method, PairWeighting, PropensityCurve,
};
use harvest::evaluation::{
    bootstrap_ci, inverse_propensity_mse, run_sweep, summarize, write_summary_tsv, write_sweep_tsv, Axis,
    BootstrapOptions, EvalError,
};
use harvest::interventions::{build_stats_with_jobs, compute_weights, InterventionalStats, StatsError};
use harvest::logdata::{
    parse_impressions, parse_rankings, parse_swap_log, write_impressions, write_rankings, write_swap_log, LogError,
    SwapLog,
};
use harvest::simulator::{
    generate_world, read_ground_truth, simulate_clicks, simulate_swap_experiment, write_ground_truth, GroundTruth,
    SimConfig, SimError,
};

const SUBCOMMANDS: [&str; 6] = ["simulate", "build-stats", "estimate", "evaluate", "bootstrap", "sweep"];

#[derive(Debug, Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("{0}")]
    Runtime(String),

    #[error(transparent)]
    Log(#[from] LogError),

    #[error(transparent)]
    Stats(#[from] StatsError),

    #[error(transparent)]
    Estimate(#[from] EstimateError),

    #[error(transparent)]
    Eval(#[from] EvalError),

    #[error(transparent)]
    Sim(#[from] SimError),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_)
            | CliError::Sim(SimError::Invalid { .. } | SimError::SwapRank { .. })
            | CliError::Stats(StatsError::CutoffTooSmall(_))
            | CliError::Eval(
                EvalError::Invalid(_)
                | EvalError::UnknownAxis(_)
                | EvalError::EmptyGrid
                | EvalError::RankRange { .. }
                | EvalError::Sim(SimError::Invalid { .. }),
            ) => 2,
            _ => 1,
        }
    }

    fn render(&self) -> String {
        match self {
            CliError::Sim(SimError::Invalid { field, message })
            | CliError::Eval(EvalError::Sim(SimError::Invalid { field, message })) => {
                format!("invalid --{field}: {message}")
            }
            other => other.to_string(),
        }
    }
}

type Result<T, E = CliError> = std::result::Result<T, E>;

#[derive(Debug, Parser)]
#[command(
    name = "harvest",
    version,
    about = "Position-bias estimation by intervention harvesting"
)]
#[command(args_override_self = true, propagate_version = true)]
struct Cli {
    #[command(flatten)]
    global: Global,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
struct Global {
    /// Key-value file of flag defaults (`key = value` per line, `#` comments).
    #[arg(long, global = true, value_name = "PATH")]
    #[serde(skip)]
    config: Option<PathBuf>,

    /// Master seed of every random stream.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Worker threads; outputs do not depend on it.
    #[arg(long, global = true, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    jobs: u64,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic world and its click logs.
    Simulate(SimulateArgs),
    /// Harvest interventional statistics from logs.
    BuildStats(BuildStatsArgs),
    /// Estimate a propensity curve.
    Estimate(EstimateArgs),
    /// Score a curve against ground truth.
    Evaluate(EvaluateArgs),
    /// Percentile bootstrap intervals for an estimator.
    Bootstrap(BootstrapArgs),
    /// Robustness sweep over one simulation knob.
    Sweep(SweepArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
struct SimArgs {
    /// Number of queries.
    #[arg(long, default_value_t = 20_000)]
    queries: usize,

    /// Candidate documents per query.
    #[arg(long, default_value_t = 20)]
    candidates: usize,

    /// Probability that a candidate is relevant.
    #[arg(long, default_value_t = 0.25, allow_negative_numbers = true)]
    relevant_fraction: f64,

    /// Bias severity: p_r = (1/r)^eta.
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    eta: f64,

    /// Click probability factor for irrelevant documents.
    #[arg(long, default_value_t = 0.1, allow_negative_numbers = true)]
    eps_minus: f64,

    /// Score perturbation per ranker; larger means less similar rankers.
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    ranker_noise: f64,

    /// Number of rankers (`f1`, `f2`, ...).
    #[arg(long, default_value_t = 2)]
    rankers: usize,

    /// Impressions per ranker; accepts `k`/`m` suffixes.
    #[arg(long, default_value = "100k", value_parser = parse_count)]
    per_ranker: u64,

    /// Explicit impressions per ranker, comma-separated; overrides
    /// `--rankers` and `--per-ranker`.
    #[arg(long, value_delimiter = ',', value_parser = parse_count)]
    traffic: Option<Vec<u64>>,

    /// Swap probability in explicit swap experiments.
    #[arg(long, default_value_t = 0.5, allow_negative_numbers = true)]
    p_swap: f64,

    /// Rank cutoff.
    #[arg(short = 'M', long = "m", default_value_t = 10)]
    m: usize,
}

impl SimArgs {
    fn config(&self, seed: u64) -> Result<SimConfig> {
        if self.rankers == 0 {
            return Err(CliError::Usage(
                "invalid --rankers: at least one ranker is required".into(),
            ));
        }
        let traffic = match &self.traffic {
            Some(t) => t.clone(),
            None => vec![self.per_ranker; self.rankers],
        };
        let cfg = SimConfig {
            num_queries: self.queries,
            candidates_per_query: self.candidates,
            relevant_fraction: self.relevant_fraction,
            eta: self.eta,
            eps_minus: self.eps_minus,
            ranker_noise: self.ranker_noise,
            traffic,
            m: self.m,
            seed,
            p_swap: self.p_swap,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
#[command(args_override_self = true)]
struct SimulateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    sim: SimArgs,

    /// Directory receiving rankings.jsonl, impressions.jsonl and truth.jsonl.
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,

    /// Also run Swap(1, k) experiments for these k into swap.jsonl.
    #[arg(long, value_delimiter = ',')]
    swap_k: Option<Vec<usize>>,

    /// Sessions per swap experiment; accepts `k`/`m` suffixes.
    #[arg(long, default_value = "200k", value_parser = parse_count)]
    swap_sessions: u64,
}

#[derive(Debug, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
struct LogArgs {
    /// Rankings file (JSONL).
    #[arg(long)]
    rankings: Option<PathBuf>,

    /// Impressions file (JSONL).
    #[arg(long)]
    impressions: Option<PathBuf>,
}

impl LogArgs {
    fn check(&self) -> Result<(&Path, &Path)> {
        let r = self
            .rankings
            .as_deref()
            .ok_or_else(|| CliError::Usage("--rankings is required".into()))?;
        let i = self
            .impressions
            .as_deref()
            .ok_or_else(|| CliError::Usage("--impressions is required".into()))?;
        check_input(r, "rankings")?;
        check_input(i, "impressions")?;
        Ok((r, i))
    }
}

#[derive(Debug, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
#[command(args_override_self = true)]
struct BuildStatsArgs {
    #[command(flatten)]
    #[serde(flatten)]
    logs: LogArgs,

    /// Rank cutoff.
    #[arg(short = 'M', long = "m", default_value_t = 10)]
    m: usize,

    /// Stats TSV destination; standard output if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
struct OptimizerArgs {
    /// Iteration cap of the all-pairs optimizer.
    #[arg(long, default_value_t = AllPairsOptions::default().max_iter)]
    max_iter: usize,

    /// Relative convergence tolerance of the all-pairs optimizer.
    #[arg(long, default_value_t = AllPairsOptions::default().tol)]
    tol: f64,

    /// Per-pair weighting of the all-pairs objective: `printed` or `pair-mass`.
    #[arg(long, default_value = "printed", value_parser = parse_weighting)]
    #[serde(serialize_with = "ser_weighting")]
    pair_weighting: PairWeighting,
}

impl OptimizerArgs {
    fn options(&self) -> Result<AllPairsOptions> {
        if self.max_iter == 0 {
            return Err(CliError::Usage("invalid --max-iter: must be ≥ 1".into()));
        }
        if !(self.tol > 0.0) {
            return Err(CliError::Usage(format!("invalid --tol: must be > 0, got {}", self.tol)));
        }
        Ok(AllPairsOptions {
            max_iter: self.max_iter,
            tol: self.tol,
            weighting: self.pair_weighting,
        })
    }
}

#[derive(Debug, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
#[command(args_override_self = true)]
struct EstimateArgs {
    /// pivot-one, adjacent-chain, all-pairs, naive-ctr or swap-gold.
    #[arg(long, value_parser = Method::from_str)]
    #[serde(serialize_with = "ser_display")]
    method: Method,

    #[command(flatten)]
    #[serde(flatten)]
    logs: LogArgs,

    /// Precomputed stats TSV (instead of --impressions).
    #[arg(long)]
    stats: Option<PathBuf>,

    /// Swap-experiment log, for swap-gold.
    #[arg(long)]
    swap_log: Option<PathBuf>,

    /// Rank cutoff.
    #[arg(short = 'M', long = "m", default_value_t = 10)]
    m: usize,

    #[command(flatten)]
    #[serde(flatten)]
    optimizer: OptimizerArgs,

    /// Curve TSV destination; standard output if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
#[command(args_override_self = true)]
struct EvaluateArgs {
    /// Estimated curve TSV.
    #[arg(long)]
    curve: PathBuf,

    /// Ground truth: a simulator truth.jsonl or a curve TSV.
    #[arg(long)]
    truth: PathBuf,

    /// Ranks to score; defaults to the shorter curve.
    #[arg(short = 'M', long = "m")]
    m: Option<usize>,

    /// Per-rank report TSV.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
#[command(args_override_self = true)]
struct BootstrapArgs {
    /// pivot-one, adjacent-chain, all-pairs or naive-ctr.
    #[arg(long, value_parser = Method::from_str)]
    #[serde(serialize_with = "ser_display")]
    method: Method,

    #[command(flatten)]
    #[serde(flatten)]
    logs: LogArgs,

    /// Rank cutoff.
    #[arg(short = 'M', long = "m", default_value_t = 10)]
    m: usize,

    /// Number of resamples.
    #[arg(long = "B", visible_alias = "b", default_value_t = 1000)]
    #[serde(rename = "B")]
    b: usize,

    /// Confidence level.
    #[arg(long, default_value_t = 0.95)]
    level: f64,

    #[command(flatten)]
    #[serde(flatten)]
    optimizer: OptimizerArgs,

    /// Interval TSV destination; standard output if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
#[command(args_override_self = true)]
struct SweepArgs {
    /// data-size, ranker-similarity, click-noise, bias-severity or
    /// traffic-imbalance.
    #[arg(long, value_parser = parse_axis)]
    #[serde(serialize_with = "ser_display")]
    axis: Axis,

    /// Comma-separated axis values; counts accept `k`/`m` suffixes and
    /// imbalance ratios may be written `a:b`.
    #[arg(long, value_delimiter = ',', value_parser = parse_grid_value, required = true)]
    grid: Vec<f64>,

    /// Comma-separated estimators.
    #[arg(long, value_delimiter = ',', value_parser = Method::from_str, default_value = "all-pairs,adjacent-chain")]
    #[serde(serialize_with = "ser_display_list")]
    methods: Vec<Method>,

    /// Simulation seeds per grid value.
    #[arg(long, default_value_t = 6)]
    seeds: usize,

    #[command(flatten)]
    #[serde(flatten)]
    sim: SimArgs,

    #[command(flatten)]
    #[serde(flatten)]
    optimizer: OptimizerArgs,

    /// Per-run TSV destination; standard output if omitted.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Per-(value, method) summary TSV.
    #[arg(long)]
    summary: Option<PathBuf>,
}

fn ser_display<T: std::fmt::Display, S: Serializer>(v: &T, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_str(v)
}

fn ser_display_list<T: std::fmt::Display, S: Serializer>(v: &[T], s: S) -> std::result::Result<S::Ok, S::Error> {
    let joined: Vec<String> = v.iter().map(ToString::to_string).collect();
    s.serialize_str(&joined.join(","))
}

fn ser_weighting<S: Serializer>(w: &PairWeighting, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(match w {
        PairWeighting::Printed => "printed",
        PairWeighting::PairMass => "pair-mass",
    })
}

fn parse_weighting(s: &str) -> std::result::Result<PairWeighting, String> {
    match s {
        "printed" => Ok(PairWeighting::Printed),
        "pair-mass" => Ok(PairWeighting::PairMass),
        _ => Err(format!("unknown pair weighting {s:?} (expected printed or pair-mass)")),
    }
}

fn parse_axis(s: &str) -> std::result::Result<Axis, String> {
    s.parse().map_err(|e: EvalError| e.to_string())
}

/// `250`, `20k`, `1.5m`.
fn parse_count(s: &str) -> std::result::Result<u64, String> {
    let v = parse_scaled(s)?;
    if v < 0.0 || v.fract() != 0.0 || v > u64::MAX as f64 {
        return Err(format!("{s:?} is not a non-negative whole number"));
    }
    Ok(v as u64)
}

fn parse_scaled(s: &str) -> std::result::Result<f64, String> {
    let t = s.trim();
    let (num, mult) = match t.chars().last() {
        Some('k' | 'K') => (&t[..t.len() - 1], 1e3),
        Some('m' | 'M') => (&t[..t.len() - 1], 1e6),
        _ => (t, 1.0),
    };
    let v: f64 = num.parse().map_err(|_| format!("{s:?} is not a number"))?;
    let v = v * mult;
    if !v.is_finite() {
        return Err(format!("{s:?} is not finite"));
    }
    // `1.1k` should read as a whole count despite representation error.
    if mult != 1.0 && (v - v.round()).abs() < 1e-6 {
        return Ok(v.round());
    }
    Ok(v)
}

fn parse_grid_value(s: &str) -> std::result::Result<f64, String> {
    match s.split_once(':') {
        Some((a, b)) => {
            let a = parse_scaled(a)?;
            let b = parse_scaled(b)?;
            if !(a > 0.0 && b > 0.0) {
                return Err(format!("ratio {s:?} needs positive parts"));
            }
            Ok(a / b)
        }
        None => parse_scaled(s),
    }
}

fn check_input(path: &Path, flag: &str) -> Result<()> {
    if !path.is_file() {
        return Err(CliError::Usage(format!("--{flag}: no such file: {}", path.display())));
    }
    Ok(())
}

fn check_output(path: Option<&Path>, flag: &str) -> Result<()> {
    let Some(path) = path else { return Ok(()) };
    if path.is_dir() {
        return Err(CliError::Usage(format!("--{flag}: {} is a directory", path.display())));
    }
    let parent = path.parent().filter(|p| !p.as_os_str().is_empty());
    if let Some(dir) = parent {
        if !dir.is_dir() {
            return Err(CliError::Usage(format!(
                "--{flag}: no such directory: {}",
                dir.display()
            )));
        }
    }
    Ok(())
}

/// Buffered writer to `path`, or to standard output.
fn sink(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => {
            Box::new(BufWriter::new(File::create(p).map_err(|e| {
                CliError::Runtime(format!("cannot create {}: {e}", p.display()))
            })?))
        }
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", path.display())))
}

fn echo_config(name: &str, global: &Global, args: &impl Serialize) {
    let mut map = serde_json::Map::new();
    for v in [serde_json::to_value(global), serde_json::to_value(args)] {
        if let Ok(serde_json::Value::Object(m)) = v {
            map.extend(m);
        }
    }
    eprintln!("# harvest {name}: resolved configuration");
    eprint!("{}", config::render(&serde_json::Value::Object(map)));
}

fn main() -> ExitCode {
    let raw: Vec<OsString> = std::env::args_os().collect();
    let args = match config::find_config_path(&raw) {
        Some(path) => match config::file_args(Path::new(&path)) {
            Ok(extra) => config::splice(raw, &SUBCOMMANDS, extra),
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(2);
            }
        },
        None => raw,
    };
    let matches = Cli::command().get_matches_from(args);
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.render());
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let jobs = cli.global.jobs as usize;
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build_global()
        .map_err(|e| CliError::Runtime(format!("cannot start worker pool: {e}")))?;
    let g = &cli.global;
    match &cli.command {
        Command::Simulate(a) => {
            echo_config("simulate", g, a);
            simulate(g, a)
        }
        Command::BuildStats(a) => {
            echo_config("build-stats", g, a);
            build_stats(jobs, a)
        }
        Command::Estimate(a) => {
            echo_config("estimate", g, a);
            estimate(jobs, a)
        }
        Command::Evaluate(a) => {
            echo_config("evaluate", g, a);
            evaluate(a)
        }
        Command::Bootstrap(a) => {
            echo_config("bootstrap", g, a);
            bootstrap(g, a)
        }
        Command::Sweep(a) => {
            echo_config("sweep", g, a);
            sweep(g, a)
        }
    }
}

fn simulate(g: &Global, a: &SimulateArgs) -> Result<()> {
    let cfg = a.sim.config(g.seed)?;
    if let Some(ks) = &a.swap_k {
        if let Some(&k) = ks.iter().find(|&&k| k == 0 || k > cfg.m) {
            return Err(SimError::SwapRank { k, m: cfg.m }.into());
        }
    }
    std::fs::create_dir_all(&a.out_dir)
        .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", a.out_dir.display())))?;

    let world = generate_world(&cfg)?;
    let log = simulate_clicks(&world, &cfg)?;

    let mut w = create(&a.out_dir.join("rankings.jsonl"))?;
    write_rankings(&world.table, &mut w)?;
    w.flush()?;
    let mut w = create(&a.out_dir.join("impressions.jsonl"))?;
    write_impressions(&log, &world.table, &mut w)?;
    w.flush()?;
    let mut w = create(&a.out_dir.join("truth.jsonl"))?;
    write_ground_truth(&GroundTruth::of(&world, &cfg), &mut w)?;
    w.flush()?;

    if let Some(ks) = &a.swap_k {
        let mut combined = SwapLog::new(&world.table);
        for &k in ks {
            let part = simulate_swap_experiment(&world, &cfg, k, a.swap_sessions as usize)?;
            for rec in part.records() {
                combined.push(&world.table, rec.clone())?;
            }
        }
        let mut w = create(&a.out_dir.join("swap.jsonl"))?;
        write_swap_log(&combined, &world.table, &mut w)?;
        w.flush()?;
        println!("swap experiments: {} sessions for k in {:?}", combined.len(), ks);
    }
    println!(
        "simulated {} impressions with {} clicks over {} queries and {} rankers (same-rank fraction {:.4})",
        log.len(),
        log.total_clicks(),
        cfg.num_queries,
        cfg.num_rankers(),
        world.similarity()
    );
    Ok(())
}

fn harvest_stats(jobs: usize, logs: &LogArgs, m: usize) -> Result<InterventionalStats> {
    let (r, i) = logs.check()?;
    let table = parse_rankings(r)?;
    let log = parse_impressions(i, &table)?;
    let weights = compute_weights(&table, log.traffic(), m)?;
    Ok(build_stats_with_jobs(&log, &table, &weights, m, jobs)?)
}

fn build_stats(jobs: usize, a: &BuildStatsArgs) -> Result<()> {
    a.logs.check()?;
    check_output(a.out.as_deref(), "out")?;
    let stats = harvest_stats(jobs, &a.logs, a.m)?;
    let mut w = sink(a.out.as_deref())?;
    stats.write_tsv(&mut w)?;
    w.flush()?;
    eprintln!("interventional set sizes |S(k, k')|:");
    eprint!("{}", stats.set_size_table());
    Ok(())
}

fn read_stats(path: &Path) -> Result<InterventionalStats> {
    let f = File::open(path).map_err(|e| CliError::Runtime(format!("cannot open {}: {e}", path.display())))?;
    Ok(InterventionalStats::read_tsv(BufReader::new(f))?)
}

fn estimate(jobs: usize, a: &EstimateArgs) -> Result<()> {
    let opts = a.optimizer.options()?;
    check_output(a.out.as_deref(), "out")?;
    let curve = match a.method {
        Method::SwapGold => {
            let r = a
                .logs
                .rankings
                .as_deref()
                .ok_or_else(|| CliError::Usage("swap-gold needs --rankings".into()))?;
            let s = a
                .swap_log
                .as_deref()
                .ok_or_else(|| CliError::Usage("swap-gold needs --swap-log".into()))?;
            check_input(r, "rankings")?;
            check_input(s, "swap-log")?;
            let table = parse_rankings(r)?;
            let log = parse_swap_log(s, &table)?;
            let est = swap_gold_estimate(&log, &table, a.m)?;
            eprintln!("rank\tkept_sessions\tkept_clicks\tswapped_sessions\tswapped_clicks\tstd_err");
            for (i, (kept, swapped)) in est.arms.iter().enumerate() {
                let se = est.std_err[i].map_or("NA".to_string(), |v| v.to_string());
                eprintln!(
                    "{}\t{}\t{}\t{}\t{}\t{se}",
                    i + 1,
                    kept.sessions,
                    kept.clicks,
                    swapped.sessions,
                    swapped.clicks
                );
            }
            est.curve
        }
        Method::NaiveCtr => {
            let (r, i) = a.logs.check()?;
            let table = parse_rankings(r)?;
            let log = parse_impressions(i, &table)?;
            naive_ctr_curve(&log, &table, a.m)?
        }
        method => {
            let stats = match &a.stats {
                Some(p) => {
                    check_input(p, "stats")?;
                    let s = read_stats(p)?;
                    if s.m() != a.m {
                        return Err(CliError::Usage(format!(
                            "--stats was built with M = {} but -M is {}",
                            s.m(),
                            a.m
                        )));
                    }
                    s
                }
                None => harvest_stats(jobs, &a.logs, a.m)?,
            };
            eprintln!("interventional set sizes |S(k, k')|:");
            eprint!("{}", stats.set_size_table());
            if method == Method::AllPairs {
                let sol = all_pairs_estimate(&stats, &opts)?;
                eprintln!(
                    "all-pairs: objective {:.6}, {} iterations, {}",
                    sol.objective_value,
                    sol.iterations,
                    if sol.converged {
                        "converged"
                    } else {
                        "NOT converged (iteration cap reached)"
                    }
                );
                sol.curve
            } else {
                estimate_from_stats(method, &stats, None, &opts)?
            }
        }
    };
    report_absences(&curve);
    let mut w = sink(a.out.as_deref())?;
    curve.write_tsv(&mut w)?;
    w.flush()?;
    Ok(())
}

fn report_absences(curve: &PropensityCurve) {
    let absent = curve.absent();
    if let Some(link) = absent.iter().find_map(|&(_, a)| match a {
        Absence::BrokenChain { link } => Some(link),
        _ => None,
    }) {
        eprintln!(
            "warning: chain broken at link ({}, {link}): no usable interventions; ranks ≥ {link} are absent",
            link - 1
        );
    }
    for (k, why) in absent {
        if !matches!(why, Absence::BrokenChain { .. }) {
            eprintln!("warning: rank {k} absent: {why}");
        }
    }
}

fn looks_like_jsonl(path: &Path) -> Result<bool> {
    let f = File::open(path).map_err(|e| CliError::Runtime(format!("cannot open {}: {e}", path.display())))?;
    for line in BufReader::new(f).lines() {
        let line = line?;
        let t = line.trim_start();
        if !t.is_empty() {
            return Ok(t.starts_with('{'));
        }
    }
    Ok(false)
}

fn read_curve(path: &Path) -> Result<PropensityCurve> {
    let f = File::open(path).map_err(|e| CliError::Runtime(format!("cannot open {}: {e}", path.display())))?;
    Ok(PropensityCurve::read_tsv(BufReader::new(f))?)
}

fn evaluate(a: &EvaluateArgs) -> Result<()> {
    check_input(&a.curve, "curve")?;
    check_input(&a.truth, "truth")?;
    check_output(a.report.as_deref(), "report")?;
    let est = read_curve(&a.curve)?;
    let truth = if looks_like_jsonl(&a.truth)? {
        let f = File::open(&a.truth)?;
        read_ground_truth(BufReader::new(f))?.curve()
    } else {
        read_curve(&a.truth)?
    };
    let m = a.m.unwrap_or(est.m().min(truth.m()));
    let mse = inverse_propensity_mse(&est, &truth, m)?;
    println!("mse\t{mse}");
    if let Some(path) = &a.report {
        let mut w = create(path)?;
        writeln!(
            w,
            "rank\testimated\ttrue\testimated_inverse\ttrue_inverse\tsquared_error"
        )?;
        let (e1, t1) = (est.get(1).unwrap_or(f64::NAN), truth.get(1).unwrap_or(f64::NAN));
        for k in 1..=m {
            let (e, t) = (est.get(k).unwrap_or(f64::NAN), truth.get(k).unwrap_or(f64::NAN));
            let (ei, ti) = (e1 / e, t1 / t);
            writeln!(w, "{k}\t{e}\t{t}\t{ei}\t{ti}\t{}", (ei - ti).powi(2))?;
        }
        writeln!(w, "# mse\t{mse}")?;
        w.flush()?;
    }
    Ok(())
}

fn bootstrap(g: &Global, a: &BootstrapArgs) -> Result<()> {
    let all_pairs = a.optimizer.options()?;
    if a.method == Method::SwapGold {
        return Err(CliError::Usage(
            "swap-gold cannot be bootstrapped from an impression log".into(),
        ));
    }
    let (r, i) = a.logs.check()?;
    check_output(a.out.as_deref(), "out")?;
    let opts = BootstrapOptions {
        b: a.b,
        level: a.level,
        seed: g.seed,
        jobs: g.jobs as usize,
        m: a.m,
        all_pairs,
    };
    let table = parse_rankings(r)?;
    let log = parse_impressions(i, &table)?;
    let res = bootstrap_ci(&log, &table, a.method, &opts)?;
    if res.failures > 0 {
        eprintln!(
            "warning: estimator failed on {} of {} resamples",
            res.failures, res.resamples
        );
    }
    let mut w = sink(a.out.as_deref())?;
    writeln!(w, "rank\tpoint\tlower\tmedian\tupper")?;
    for k in 1..=a.m {
        let point = res
            .point
            .as_ref()
            .and_then(|c| c.get(k))
            .map_or("NA".into(), |v| v.to_string());
        match res.intervals[k - 1] {
            Some(iv) => writeln!(w, "{k}\t{point}\t{}\t{}\t{}", iv.lower, iv.median, iv.upper)?,
            None => writeln!(w, "{k}\t{point}\tNA\tNA\tNA")?,
        }
    }
    w.flush()?;
    Ok(())
}

fn sweep(g: &Global, a: &SweepArgs) -> Result<()> {
    let all_pairs = a.optimizer.options()?;
    let base = a.sim.config(g.seed)?;
    check_output(a.out.as_deref(), "out")?;
    check_output(a.summary.as_deref(), "summary")?;
    let spec = harvest::evaluation::SweepSpec {
        axis: a.axis,
        grid: a.grid.clone(),
        base,
        methods: a.methods.clone(),
        seeds: a.seeds,
        all_pairs,
        jobs: g.jobs as usize,
    };
    let reports = run_sweep(&spec)?;
    let mut w = sink(a.out.as_deref())?;
    write_sweep_tsv(&reports, &mut w)?;
    w.flush()?;
    let rows = summarize(&reports);
    if let Some(path) = &a.summary {
        let mut w = create(path)?;
        write_summary_tsv(&rows, &mut w)?;
        w.flush()?;
    }
    let mut e = io::stderr().lock();
    write_summary_tsv(&rows, &mut e)?;
    Ok(())
}
