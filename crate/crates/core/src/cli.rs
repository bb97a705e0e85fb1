//! Command-line front end. The binary is a thin wrapper around [`run`], so
//! every subcommand can be driven from tests with in-memory streams.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::bounds::BoundFamily;
use crate::cei::CeiSpec;
use crate::engine::{max_models, Decision, Engine, SearchConfig};
use crate::error::{unit_interval, Error, Result};
use crate::metrics;
use crate::oracle::{CeiPoint, DiscretePool, SelectionPoint};
use crate::simharness::{self, ComparisonOptions, PoolSpec, RunOptions};

pub const EXIT_STOP: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_NO_STOP: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "lda-stop",
    version,
    about = "Anytime-valid stopping for repeated model search"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Read observed losses and stop once the marginal-gain bound drops below gamma.
    Stop {
        #[arg(long)]
        gamma: f64,
        #[arg(long)]
        delta: f64,
        /// universal | mono:A | exp:A:MU | bounded:A | estimate
        #[arg(long, default_value = "universal")]
        cei: CeiSpec,
        /// uniform | iterlog | iterlog:EPS
        #[arg(long, default_value = "uniform", value_parser = parse_family)]
        family: BoundFamily,
        /// Input file; standard input when absent or `-`.
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        certificate_out: Option<PathBuf>,
        #[arg(long)]
        max_steps: Option<u64>,
    },
    /// Print the step by which a universal-bound search must stop.
    MaxModels {
        #[arg(long)]
        gamma: f64,
        #[arg(long)]
        delta: f64,
        #[arg(long, default_value = "uniform", value_parser = parse_family)]
        family: BoundFamily,
        /// Use the estimated-CEI budget `delta / 3`.
        #[arg(long)]
        estimated: bool,
    },
    /// Full-information quantities of a pool on a grid of thresholds.
    Oracle {
        #[arg(long)]
        pool: PathBuf,
        #[arg(long)]
        gamma: f64,
        /// Comma-separated values, or START:STOP:STEP.
        #[arg(long, default_value = "0:1:0.05")]
        u: String,
    },
    /// Monte Carlo coverage run on a synthetic or file pool.
    Simulate {
        #[arg(long)]
        pool_spec: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        runs: u64,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = simharness::DEFAULT_HORIZON)]
        horizon: u64,
        /// Output directory for trajectories.csv and summary.json.
        #[arg(long)]
        out: PathBuf,
        /// Runs used for the estimated-vs-universal bound comparison; 0 skips it.
        #[arg(long, default_value_t = 200)]
        compare_runs: u64,
        #[arg(long, default_value_t = 1000)]
        compare_horizon: u64,
    },
    /// Check a pool for the selection-effect and CEI-monotonicity assumptions.
    CheckPool {
        #[arg(long)]
        pool: PathBuf,
    },
    /// Selection-rate gap of a prediction,label,group CSV.
    Metrics {
        #[arg(long)]
        records: PathBuf,
    },
}

pub fn parse_family(s: &str) -> std::result::Result<BoundFamily, String> {
    let family = match s.split_once(':') {
        None if s == "uniform" => BoundFamily::UniformMixture,
        None if s == "iterlog" => BoundFamily::iterated_log(),
        Some(("iterlog", eps)) => BoundFamily::IteratedLog {
            epsilon: eps.parse().map_err(|e| format!("bad epsilon `{eps}`: {e}"))?,
        },
        _ => {
            return Err(format!(
                "unknown bound family `{s}` (expected uniform, iterlog or iterlog:EPS)"
            ))
        }
    };
    family.validate().map_err(|e| e.to_string())?;
    Ok(family)
}

/// Thresholds from `a,b,c` or `start:stop:step` (inclusive of `stop`).
pub fn parse_grid(s: &str) -> Result<Vec<f64>> {
    let num = |x: &str| -> Result<f64> {
        x.trim()
            .parse::<f64>()
            .map_err(|e| Error::Config(format!("bad grid value `{x}`: {e}")))
    };
    let parts: Vec<&str> = s.split(':').collect();
    let grid = match parts.as_slice() {
        [start, stop, step] => {
            let (start, stop, step) = (num(start)?, num(stop)?, num(step)?);
            if !(step > 0.0) || stop < start {
                return Err(Error::Config(format!("bad grid range `{s}`")));
            }
            let n = ((stop - start) / step + 1e-9).floor() as usize;
            (0..=n).map(|i| (start + i as f64 * step).min(stop)).collect()
        }
        [_] => s.split(',').map(num).collect::<Result<Vec<_>>>()?,
        _ => return Err(Error::Config(format!("bad grid `{s}`"))),
    };
    for &u in &grid {
        unit_interval("u", u)?;
    }
    Ok(grid)
}

/// One input line of a loss stream.
#[derive(Debug, Deserialize)]
struct JsonSample {
    q_hat: f64,
    #[allow(dead_code)]
    q_true: Option<f64>,
}

/// Parses a bare number or a JSON object with a `q_hat` field. Blank lines
/// yield `None`.
pub fn parse_sample(line: &str, line_no: usize) -> Result<Option<f64>> {
    let text = line.trim();
    if text.is_empty() {
        return Ok(None);
    }
    let parsed = if text.starts_with('{') {
        serde_json::from_str::<JsonSample>(text)
            .map(|s| s.q_hat)
            .map_err(|e| e.to_string())
    } else {
        text.parse::<f64>().map_err(|e| format!("`{text}`: {e}"))
    };
    let q = parsed.map_err(|message| Error::Parse { line: line_no, message })?;
    unit_interval("q_hat", q).map_err(|e| Error::Parse {
        line: line_no,
        message: e.to_string(),
    })?;
    Ok(Some(q))
}

/// Parses `args` and runs the command. Returns the process exit code.
pub fn run<I, T>(args: I, stdin: &mut dyn BufRead, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(stderr, "{e}");
            return if e.use_stderr() { EXIT_ERROR } else { EXIT_STOP };
        }
    };
    match execute(cli.command, stdin, stdout, stderr) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            EXIT_ERROR
        }
    }
}

fn execute(command: Command, stdin: &mut dyn BufRead, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<i32> {
    match command {
        Command::Stop {
            gamma,
            delta,
            cei,
            family,
            input,
            certificate_out,
            max_steps,
        } => {
            let mut config = SearchConfig::new(gamma, delta, cei)?.with_family(family)?;
            if let Some(cap) = max_steps {
                config = config.with_max_steps(cap)?;
            }
            match input {
                Some(path) if path.as_os_str() != "-" => {
                    let mut reader = BufReader::new(File::open(path)?);
                    cmd_stop(config, &mut reader, stdout, stderr, certificate_out)
                }
                _ => cmd_stop(config, stdin, stdout, stderr, certificate_out),
            }
        }
        Command::MaxModels {
            gamma,
            delta,
            family,
            estimated,
        } => {
            let alpha = if estimated { delta / 3.0 } else { delta };
            crate::error::open_interval("delta", delta, 0.0, 1.0)?;
            writeln!(stdout, "{}", max_models(gamma, alpha, &family)?)?;
            Ok(EXIT_STOP)
        }
        Command::Oracle { pool, gamma, u } => {
            let pool = DiscretePool::from_csv_path(pool)?;
            cmd_oracle(&pool, gamma, &parse_grid(&u)?, stdout)?;
            Ok(EXIT_STOP)
        }
        Command::Simulate {
            pool_spec,
            config,
            runs,
            seed,
            horizon,
            out,
            compare_runs,
            compare_horizon,
        } => {
            let spec = PoolSpec::from_json_path(pool_spec)?;
            let config: SearchConfig = serde_json::from_str(&std::fs::read_to_string(config)?)?;
            config.validate()?;
            let opts = RunOptions {
                horizon,
                ..RunOptions::new(runs, seed)
            };
            let comparison = (compare_runs > 0).then_some(ComparisonOptions {
                runs: compare_runs,
                horizon: compare_horizon,
            });
            cmd_simulate(&spec, &config, &opts, comparison, &out, stdout)?;
            Ok(EXIT_STOP)
        }
        Command::CheckPool { pool } => {
            let pool = DiscretePool::from_csv_path(pool)?;
            cmd_check_pool(&pool, stdout)?;
            Ok(EXIT_STOP)
        }
        Command::Metrics { records } => {
            let records = metrics::read_records_path(records)?;
            let gap = metrics::empirical_selection_gap(&records)?;
            let di = metrics::empirical_di_loss(&records)?;
            writeln!(stdout, "records,selection_gap,di_loss")?;
            writeln!(stdout, "{},{gap},{di}", records.len())?;
            if gap < 0.0 {
                writeln!(stderr, "warning: negative selection-rate gap")?;
            }
            Ok(EXIT_STOP)
        }
    }
}

/// Streams samples into an engine, writing one line per sample before the
/// next is read.
pub fn cmd_stop(
    config: SearchConfig,
    input: &mut dyn BufRead,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
    certificate_out: Option<PathBuf>,
) -> Result<i32> {
    let mut engine = Engine::new(config)?;
    writeln!(stdout, "t,q_hat,u_hat,bound,decision")?;
    stdout.flush()?;
    let mut line = String::new();
    let mut line_no = 0;
    loop {
        line.clear();
        if input.read_line(&mut line)? == 0 {
            writeln!(
                stderr,
                "input exhausted after {} loop steps without a stop",
                engine.state().t
            )?;
            return Ok(EXIT_NO_STOP);
        }
        line_no += 1;
        let Some(q) = parse_sample(&line, line_no)? else {
            continue;
        };
        let decision = engine.step(q)?;
        match &decision {
            Decision::Calibrating { .. } => writeln!(stdout, ",{q},,,{}", decision.label())?,
            Decision::Continue(row) => writeln!(
                stdout,
                "{},{},{},{},{}",
                row.t,
                q,
                row.u_hat,
                row.bound,
                decision.label()
            )?,
            Decision::Stop(c) | Decision::CapReached(c) => {
                writeln!(stdout, "{},{},{},{},{}", c.tau, q, c.u_hat, c.bound, decision.label())?
            }
        }
        stdout.flush()?;

        if let Some(cert) = decision.certificate() {
            if let Some(path) = &certificate_out {
                let mut f = std::io::BufWriter::new(File::create(path)?);
                crate::json::write(&mut f, cert)?;
                writeln!(f)?;
                f.flush()?;
            }
            return Ok(if cert.is_stop() {
                writeln!(
                    stderr,
                    "stopped at t={} with bound {} < gamma {}",
                    cert.tau, cert.bound, cert.gamma
                )?;
                EXIT_STOP
            } else {
                writeln!(
                    stderr,
                    "step cap {} reached without a stop (bound {})",
                    cert.tau, cert.bound
                )?;
                EXIT_NO_STOP
            });
        }
    }
}

pub fn cmd_oracle(pool: &DiscretePool, gamma: f64, grid: &[f64], stdout: &mut dyn Write) -> Result<()> {
    let u_star = pool.stop_threshold(gamma)?;
    let stop_time = pool.expected_stopping_time(gamma)?;
    writeln!(stdout, "u,g,mu,p,u_star,expected_stopping_time")?;
    for &u in grid {
        let g = pool.marginal_gain(u)?;
        let (mu, p) = pool.cei_and_prob(u)?;
        writeln!(stdout, "{u},{g},{mu},{p},{u_star},{stop_time}")?;
    }
    Ok(())
}

#[derive(Serialize)]
struct PoolCheck<'a> {
    median_q_hat: f64,
    summary: crate::oracle::AssumptionSummary,
    selection_effect_violations: Vec<&'a SelectionPoint>,
    cei_violations: Vec<&'a CeiPoint>,
}

pub fn cmd_check_pool(pool: &DiscretePool, stdout: &mut dyn Write) -> Result<()> {
    let report = pool.check_assumptions();
    let check = PoolCheck {
        median_q_hat: report.median_q_hat,
        summary: report.summary(),
        selection_effect_violations: report.selection_effect_violations().collect(),
        cei_violations: report.cei_violations().collect(),
    };
    crate::json::write(&mut *stdout, &check)?;
    writeln!(stdout)?;
    Ok(())
}

pub fn cmd_simulate(
    spec: &PoolSpec,
    config: &SearchConfig,
    opts: &RunOptions,
    comparison: Option<ComparisonOptions>,
    out: &std::path::Path,
    stdout: &mut dyn Write,
) -> Result<()> {
    let pool = simharness::build_pool(spec)?;
    let (records, report) = simharness::simulate(&pool, config, opts, comparison)?;
    std::fs::create_dir_all(out)?;
    simharness::write_records_csv(File::create(out.join("trajectories.csv"))?, &records)?;
    let mut summary = std::io::BufWriter::new(File::create(out.join("summary.json"))?);
    crate::json::write(&mut summary, &report)?;
    writeln!(summary)?;
    summary.flush()?;

    let c = &report.coverage;
    writeln!(stdout, "runs: {} (stopped {}, capped {})", c.runs, c.stopped, c.capped)?;
    writeln!(
        stdout,
        "miscoverage: {} ({} runs, limit {:.4})",
        c.miscoverage_rate, c.miscovered, c.miscoverage_limit
    )?;
    writeln!(
        stdout,
        "stopping time: mean {:.2}, median {}, q95 {}, max {}",
        c.stopping_time.mean, c.stopping_time.median, c.stopping_time.q95, c.stopping_time.max
    )?;
    let a = &report.assumptions;
    writeln!(
        stdout,
        "assumptions: selection effect {} ({} violations), CEI monotone {} ({} violations)",
        a.selection_effect_holds, a.selection_effect_violations, a.cei_monotone_holds, a.cei_violations
    )?;
    if !report.estimated_vs_universal.is_empty() {
        writeln!(
            stdout,
            "t,mean_estimated_bound,mean_universal_bound,estimated_not_smaller"
        )?;
        for row in &report.estimated_vs_universal {
            writeln!(
                stdout,
                "{},{},{},{}",
                row.t, row.mean_estimated, row.mean_universal, row.estimated_not_smaller
            )?;
        }
    }
    writeln!(stdout, "wrote {}", out.display())?;
    Ok(())
}
