//! Monte Carlo evaluation of the stopping engines on synthetic pools.
//!
//! A pool of `(q_true, q_hat)` pairs stands in for the distribution of
//! trained models. Each trajectory draws from the pool with replacement,
//! feeds the observed losses to an [`Engine`], and at the stop compares the
//! certified bound with the exact conditional gain computed by the oracle.
//!
//! Every run gets its own ChaCha8 stream selected by the run id, so results
//! do not depend on thread scheduling and any single run can be replayed.

use std::io::Write;
use std::path::{Path, PathBuf};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Binomial, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::BoundTable;
use crate::cei::CeiSpec;
use crate::engine::{Decision, Engine, SearchConfig, TraceRow};
use crate::error::{Error, Result};
use crate::oracle::{AssumptionSummary, DiscretePool, PoolEntry};

pub const DEFAULT_HORIZON: u64 = 10_000;

/// Rejection-sampling attempts allowed per truncated-normal value.
const MAX_REJECTIONS: usize = 1_000_000;

/// Steps at which the estimated-CEI and closed-form bounds are compared.
const COMPARISON_STEPS: [u64; 12] = [1, 2, 5, 10, 20, 50, 100, 200, 500, 1000, 2000, 5000];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Generator {
    /// Entries read from a pool CSV file.
    Discrete { path: PathBuf },
    /// `q_true = scale * Beta(a, b)`.
    BetaTrue { a: f64, b: f64, scale: f64 },
    /// Normal restricted to `[0, 1]`.
    TruncNormTrue { mean: f64, sd: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Observation {
    /// `q_hat = q_true`.
    #[default]
    Exact,
    /// `q_hat = Binomial(n_test, q_true) / n_test`.
    BinomialEval { n_test: u64 },
    /// `q_hat = clamp(q_true + N(0, sd^2), 0, 1)`.
    AdditiveNoise { sd: f64 },
}

/// JSON description of a synthetic pool.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolSpec {
    pub generator: Generator,
    #[serde(default)]
    pub observation: Observation,
    /// Number of entries; ignored for file pools.
    #[serde(default)]
    pub size: Option<usize>,
    #[serde(default)]
    pub seed: u64,
}

impl PoolSpec {
    pub fn from_json_path(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }
}

fn positive(name: &'static str, value: f64) -> Result<f64> {
    if value > 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(Error::Domain {
            name,
            value,
            expected: "a finite value > 0".into(),
        })
    }
}

fn bad_param(name: &'static str, e: impl std::fmt::Display) -> Error {
    Error::Config(format!("{name}: {e}"))
}

/// Builds the pool described by `spec`. Generated pools are deterministic in
/// `spec.seed` and weight every entry equally.
pub fn build_pool(spec: &PoolSpec) -> Result<DiscretePool> {
    let size = match &spec.generator {
        Generator::Discrete { path } => {
            if spec.observation != Observation::Exact {
                return Err(Error::Config(
                    "file pools already carry q_hat; use the exact observation model".into(),
                ));
            }
            return DiscretePool::from_csv_path(path);
        }
        _ => spec
            .size
            .filter(|&b| b >= 1)
            .ok_or_else(|| Error::Config("generated pools need size >= 1".into()))?,
    };

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut truth: Box<dyn FnMut(&mut ChaCha8Rng) -> Result<f64>> = match spec.generator {
        Generator::BetaTrue { a, b, scale } => {
            if !(scale > 0.0 && scale <= 1.0) {
                return Err(Error::Domain {
                    name: "scale",
                    value: scale,
                    expected: "(0, 1]".into(),
                });
            }
            let beta = Beta::new(positive("a", a)?, positive("b", b)?).map_err(|e| bad_param("beta", e))?;
            Box::new(move |rng| Ok(scale * beta.sample(rng)))
        }
        Generator::TruncNormTrue { mean, sd } => {
            if !mean.is_finite() {
                return Err(Error::Domain {
                    name: "mean",
                    value: mean,
                    expected: "a finite value".into(),
                });
            }
            let normal = Normal::new(mean, positive("sd", sd)?).map_err(|e| bad_param("normal", e))?;
            Box::new(move |rng| {
                for _ in 0..MAX_REJECTIONS {
                    let x = normal.sample(rng);
                    if (0.0..=1.0).contains(&x) {
                        return Ok(x);
                    }
                }
                Err(Error::Config(format!(
                    "normal({mean}, {sd}) puts too little mass on [0, 1] to sample"
                )))
            })
        }
        Generator::Discrete { .. } => unreachable!("handled above"),
    };
    let noise = match spec.observation {
        Observation::AdditiveNoise { sd } => {
            Some(Normal::new(0.0, positive("noise sd", sd)?).map_err(|e| bad_param("noise", e))?)
        }
        Observation::BinomialEval { n_test: 0 } => {
            return Err(Error::Config("n_test must be positive".into()));
        }
        _ => None,
    };

    let mut entries = Vec::with_capacity(size);
    for _ in 0..size {
        let q = truth(&mut rng)?.clamp(0.0, 1.0);
        let q_hat = match spec.observation {
            Observation::Exact => q,
            Observation::BinomialEval { n_test } => {
                let k = Binomial::new(n_test, q)
                    .map_err(|e| bad_param("binomial", e))?
                    .sample(&mut rng);
                k as f64 / n_test as f64
            }
            Observation::AdditiveNoise { .. } => {
                let n = noise.expect("noise model built above");
                (q + n.sample(&mut rng)).clamp(0.0, 1.0)
            }
        };
        entries.push(PoolEntry::new(q, q_hat, 1.0));
    }
    DiscretePool::new(entries)
}

/// Result of one simulated search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub run_id: u64,
    /// Loop step at which the run ended.
    pub tau: u64,
    /// Pool draws consumed, calibration included.
    pub draws: u64,
    pub u_hat: f64,
    pub final_bound: f64,
    /// Exact `E[U_tau - U_{tau+1} | U_hat_tau]`.
    pub oracle_gain: f64,
    /// A certified stop whose oracle gain exceeds gamma.
    pub miscovered: bool,
    /// The horizon (or the configured cap) ended the run, not a stop.
    pub capped: bool,
    /// First loop step at which the oracle gain at the running best was at
    /// most gamma.
    pub oracle_stop: Option<u64>,
    #[serde(skip)]
    pub trace: Option<Vec<TraceRow>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    pub runs: u64,
    pub horizon: u64,
    pub seed: u64,
    pub keep_traces: bool,
}

impl RunOptions {
    pub fn new(runs: u64, seed: u64) -> Self {
        Self {
            runs,
            horizon: DEFAULT_HORIZON,
            seed,
            keep_traces: false,
        }
    }
}

/// RNG for run `run_id`: one ChaCha8 key per master seed, one stream per run.
pub fn run_rng(seed: u64, run_id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(run_id);
    rng
}

struct Sampler<'a> {
    pool: &'a DiscretePool,
    index: WeightedIndex<f64>,
}

impl<'a> Sampler<'a> {
    fn new(pool: &'a DiscretePool) -> Result<Self> {
        let index = WeightedIndex::new(pool.entries().iter().map(|e| e.weight))
            .map_err(|e| Error::Config(format!("pool weights: {e}")))?;
        Ok(Self { pool, index })
    }

    fn draw<R: Rng>(&self, rng: &mut R) -> &'a PoolEntry {
        &self.pool.entries()[self.index.sample(rng)]
    }
}

fn effective_cap(config: &SearchConfig, horizon: u64) -> u64 {
    config.max_steps.map_or(horizon, |c| c.min(horizon))
}

/// Runs `opts.runs` independent searches on `pool`.
pub fn run_trajectories(
    pool: &DiscretePool,
    config: &SearchConfig,
    opts: &RunOptions,
) -> Result<Vec<TrajectoryRecord>> {
    if opts.runs == 0 {
        return Err(Error::Config("runs must be at least 1".into()));
    }
    if opts.horizon == 0 {
        return Err(Error::Config("horizon must be at least 1".into()));
    }
    let cap = effective_cap(config, opts.horizon);
    let run_config = SearchConfig {
        max_steps: Some(cap),
        ..*config
    };
    run_config.validate()?;
    // Under the universal bound no run outlives the data-independent horizon.
    let table_len = match run_config.max_models() {
        Ok(m) => m.min(cap),
        Err(_) => cap,
    };
    let table = run_config.bound_table(table_len)?;
    let sampler = Sampler::new(pool)?;

    (0..opts.runs)
        .into_par_iter()
        .map(|run_id| {
            run_one(pool, &sampler, &run_config, &table, opts, run_id).map_err(|e| Error::Run {
                run: run_id,
                source: Box::new(e),
            })
        })
        .collect()
}

fn run_one(
    pool: &DiscretePool,
    sampler: &Sampler,
    config: &SearchConfig,
    table: &BoundTable,
    opts: &RunOptions,
    run_id: u64,
) -> Result<TrajectoryRecord> {
    let mut rng = run_rng(opts.seed, run_id);
    let mut engine = Engine::with_table(*config, table.clone())?;
    let mut draws = 0;
    let mut oracle_stop = None;
    loop {
        let entry = sampler.draw(&mut rng);
        draws += 1;
        let decision = engine.step(entry.q_hat)?;
        let row = match &decision {
            Decision::Calibrating { .. } => continue,
            Decision::Continue(row) => *row,
            Decision::Stop(c) | Decision::CapReached(c) => *c.trace.last().expect("nonempty trace"),
        };
        if oracle_stop.is_none() && pool.conditional_gain_finite(row.u_hat)? <= config.gamma {
            oracle_stop = Some(row.t);
        }
        if let Some(cert) = decision.certificate() {
            let oracle_gain = pool.conditional_gain_finite(cert.u_hat)?;
            let capped = !cert.is_stop();
            return Ok(TrajectoryRecord {
                run_id,
                tau: cert.tau,
                draws,
                u_hat: cert.u_hat,
                final_bound: cert.bound,
                oracle_gain,
                miscovered: !capped && oracle_gain > config.gamma,
                capped,
                oracle_stop,
                trace: opts.keep_traces.then(|| cert.trace.clone()),
            });
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StoppingTimeStats {
    pub mean: f64,
    pub min: u64,
    pub q25: u64,
    pub median: u64,
    pub q75: u64,
    pub q95: u64,
    pub max: u64,
}

impl StoppingTimeStats {
    fn from_sorted(sorted: &[u64]) -> Self {
        // Nearest-rank quantile.
        let q = |p: f64| {
            let rank = (p * sorted.len() as f64).ceil().max(1.0) as usize;
            sorted[rank.min(sorted.len()) - 1]
        };
        Self {
            mean: sorted.iter().map(|&t| t as f64).sum::<f64>() / sorted.len() as f64,
            min: sorted[0],
            q25: q(0.25),
            median: q(0.5),
            q75: q(0.75),
            q95: q(0.95),
            max: sorted[sorted.len() - 1],
        }
    }
}

/// Aggregate statistics over trajectories.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverageSummary {
    pub runs: u64,
    pub stopped: u64,
    pub capped: u64,
    pub miscovered: u64,
    /// `miscovered / runs`.
    pub miscoverage_rate: f64,
    /// `delta + 3 sqrt(delta (1 - delta) / runs)`.
    pub miscoverage_limit: f64,
    pub stopping_time: StoppingTimeStats,
    /// Mean certified bound over stopped runs.
    pub mean_implied_gamma: Option<f64>,
    /// Mean of `tau - oracle_stop` over runs where both are defined.
    pub mean_overshoot: Option<f64>,
    pub overshoot_runs: u64,
    pub mean_oracle_gain: f64,
}

pub fn miscoverage_limit(delta: f64, runs: u64) -> f64 {
    delta + 3.0 * (delta * (1.0 - delta) / runs as f64).sqrt()
}

pub fn coverage_report(records: &[TrajectoryRecord], delta: f64) -> Result<CoverageSummary> {
    if records.is_empty() {
        return Err(Error::Empty("trajectory records"));
    }
    let runs = records.len() as u64;
    let count = |f: fn(&TrajectoryRecord) -> bool| records.iter().filter(|r| f(r)).count() as u64;
    let stopped = count(|r| !r.capped);
    let miscovered = count(|r| r.miscovered);
    let mut taus: Vec<u64> = records.iter().map(|r| r.tau).collect();
    taus.sort_unstable();

    let mean = |xs: Vec<f64>| (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64);
    let implied = mean(records.iter().filter(|r| !r.capped).map(|r| r.final_bound).collect());
    let overshoots: Vec<f64> = records
        .iter()
        .filter(|r| !r.capped)
        .filter_map(|r| r.oracle_stop.map(|o| r.tau as f64 - o as f64))
        .collect();
    let overshoot_runs = overshoots.len() as u64;

    Ok(CoverageSummary {
        runs,
        stopped,
        capped: runs - stopped,
        miscovered,
        miscoverage_rate: miscovered as f64 / runs as f64,
        miscoverage_limit: miscoverage_limit(delta, runs),
        stopping_time: StoppingTimeStats::from_sorted(&taus),
        mean_implied_gamma: implied,
        mean_overshoot: mean(overshoots),
        overshoot_runs,
        mean_oracle_gain: records.iter().map(|r| r.oracle_gain).sum::<f64>() / runs as f64,
    })
}

/// Mean product bounds of the estimated-CEI engine and the universal
/// closed-form engine at one loop step, over runs that reached it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundComparison {
    pub t: u64,
    pub runs: u64,
    pub mean_estimated: f64,
    pub mean_universal: f64,
    /// Fraction of runs in which the estimated bound is not smaller.
    pub estimated_not_smaller: f64,
}

/// Feeds identical loop samples to an estimated-CEI engine (after its own
/// calibration draws) and a universal engine, and compares their bounds at
/// matched steps. Both engines run with a vanishing gamma so that they only
/// record traces.
pub fn compare_estimated_to_universal(
    pool: &DiscretePool,
    delta: f64,
    runs: u64,
    horizon: u64,
    seed: u64,
) -> Result<Vec<BoundComparison>> {
    let estimated = SearchConfig::new(f64::MIN_POSITIVE, delta, CeiSpec::Estimated)?.with_max_steps(horizon)?;
    let universal = SearchConfig::new(f64::MIN_POSITIVE, delta, CeiSpec::Universal)?.with_max_steps(horizon)?;
    let est_table = estimated.bound_table(horizon)?;
    let uni_table = universal.bound_table(horizon)?;
    let sampler = Sampler::new(pool)?;
    let steps: Vec<u64> = COMPARISON_STEPS.iter().copied().filter(|&t| t <= horizon).collect();

    let per_run: Vec<Vec<Option<(f64, f64)>>> = (0..runs)
        .into_par_iter()
        .map(|run_id| -> Result<Vec<Option<(f64, f64)>>> {
            let mut rng = run_rng(seed, run_id);
            let mut est = Engine::with_table(estimated, est_table.clone())?;
            let mut uni = Engine::with_table(universal, uni_table.clone())?;
            while !est.is_finished() {
                let q = sampler.draw(&mut rng).q_hat;
                if let Decision::Calibrating { .. } = est.step(q)? {
                    continue;
                }
                if !uni.is_finished() {
                    uni.step(q)?;
                }
            }
            let (a, b) = (&est.state().trace, &uni.state().trace);
            Ok(steps
                .iter()
                .map(|&t| {
                    let i = (t - 1) as usize;
                    Some((a.get(i)?.bound, b.get(i)?.bound))
                })
                .collect())
        })
        .collect::<Result<_>>()?;

    Ok(steps
        .iter()
        .enumerate()
        .filter_map(|(j, &t)| {
            let pairs: Vec<(f64, f64)> = per_run.iter().filter_map(|r| r[j]).collect();
            if pairs.is_empty() {
                return None;
            }
            let n = pairs.len() as f64;
            Some(BoundComparison {
                t,
                runs: pairs.len() as u64,
                mean_estimated: pairs.iter().map(|p| p.0).sum::<f64>() / n,
                mean_universal: pairs.iter().map(|p| p.1).sum::<f64>() / n,
                estimated_not_smaller: pairs.iter().filter(|p| p.0 >= p.1).count() as f64 / n,
            })
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoolSummary {
    pub size: usize,
    pub mean_q_true: f64,
    pub mean_q_hat: f64,
}

impl PoolSummary {
    pub fn of(pool: &DiscretePool) -> Self {
        let (mut t, mut h) = (0.0, 0.0);
        for e in pool.entries() {
            t += e.weight * e.q_true;
            h += e.weight * e.q_hat;
        }
        Self {
            size: pool.len(),
            mean_q_true: t,
            mean_q_hat: h,
        }
    }
}

/// Everything a simulation reports besides the per-run table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub seed: u64,
    pub horizon: u64,
    pub config: SearchConfig,
    pub pool: PoolSummary,
    pub assumptions: AssumptionSummary,
    pub coverage: CoverageSummary,
    pub estimated_vs_universal: Vec<BoundComparison>,
}

/// Settings for the bound comparison included in a simulation report.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComparisonOptions {
    pub runs: u64,
    pub horizon: u64,
}

impl Default for ComparisonOptions {
    fn default() -> Self {
        Self {
            runs: 200,
            horizon: 1000,
        }
    }
}

/// Runs trajectories and assembles the full report.
pub fn simulate(
    pool: &DiscretePool,
    config: &SearchConfig,
    opts: &RunOptions,
    comparison: Option<ComparisonOptions>,
) -> Result<(Vec<TrajectoryRecord>, SimulationReport)> {
    let records = run_trajectories(pool, config, opts)?;
    let coverage = coverage_report(&records, config.delta)?;
    let estimated_vs_universal = match comparison {
        Some(c) => compare_estimated_to_universal(
            pool,
            config.delta,
            c.runs.min(opts.runs),
            c.horizon.min(opts.horizon),
            opts.seed,
        )?,
        None => Vec::new(),
    };
    let report = SimulationReport {
        seed: opts.seed,
        horizon: opts.horizon,
        config: *config,
        pool: PoolSummary::of(pool),
        assumptions: pool.check_assumptions().summary(),
        coverage,
        estimated_vs_universal,
    };
    Ok((records, report))
}

#[derive(Serialize)]
struct CsvRow {
    run_id: u64,
    tau: u64,
    draws: u64,
    u_hat: f64,
    final_bound: f64,
    oracle_gain: f64,
    miscovered: bool,
    capped: bool,
    oracle_stop: Option<u64>,
}

pub fn write_records_csv<W: Write>(writer: W, records: &[TrajectoryRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in records {
        w.serialize(CsvRow {
            run_id: r.run_id,
            tau: r.tau,
            draws: r.draws,
            u_hat: r.u_hat,
            final_bound: r.final_bound,
            oracle_gain: r.oracle_gain,
            miscovered: r.miscovered,
            capped: r.capped,
            oracle_stop: r.oracle_stop,
        })?;
    }
    w.flush()?;
    Ok(())
}
