//! Full-information ground truth for a finite, weighted pool of
//! `(q_true, q_hat)` pairs.
//!
//! Everything here is exact enumeration over the pool, so these functions
//! serve as the reference the engines and the simulation harness are judged
//! against. Lookups use prefix sums over the sorted supports and cost
//! `O(log n)`.

use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{unit_interval, Error, Result};

/// Tolerance below which an assumption check still counts as satisfied.
pub const ASSUMPTION_TOLERANCE: f64 = 1e-12;

/// One candidate model: its true loss, its evaluated loss and its weight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoolEntry {
    pub q_true: f64,
    pub q_hat: f64,
    pub weight: f64,
}

impl PoolEntry {
    pub fn new(q_true: f64, q_hat: f64, weight: f64) -> Self {
        Self { q_true, q_hat, weight }
    }

    /// Entry observed without evaluation noise.
    pub fn exact(q: f64, weight: f64) -> Self {
        Self::new(q, q, weight)
    }
}

/// Sorted distinct values with inclusive prefix sums of mass and of
/// `weight * value`.
#[derive(Debug, Clone, Default)]
struct Cumulative {
    values: Vec<f64>,
    mass: Vec<f64>,
    moment: Vec<f64>,
}

impl Cumulative {
    fn build(mut pairs: Vec<(f64, f64)>) -> Self {
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut out = Cumulative::default();
        let (mut m, mut s) = (0.0, 0.0);
        for (v, w) in pairs {
            m += w;
            s += w * v;
            if out.values.last() == Some(&v) {
                *out.mass.last_mut().unwrap() = m;
                *out.moment.last_mut().unwrap() = s;
            } else {
                out.values.push(v);
                out.mass.push(m);
                out.moment.push(s);
            }
        }
        out
    }

    /// `(P(V < x), E[V 1{V < x}])`.
    fn strictly_below(&self, x: f64) -> (f64, f64) {
        let idx = self.values.partition_point(|&v| v < x);
        if idx == 0 {
            (0.0, 0.0)
        } else {
            (self.mass[idx - 1], self.moment[idx - 1])
        }
    }

    /// `P(V <= x)`.
    fn at_or_below(&self, x: f64) -> f64 {
        let idx = self.values.partition_point(|&v| v <= x);
        if idx == 0 {
            0.0
        } else {
            self.mass[idx - 1]
        }
    }
}

/// A distinct `q_hat` value and what sits below it.
#[derive(Debug, Clone, Copy)]
struct HatLevel {
    q_hat: f64,
    mass: f64,
    mean_true: f64,
    mass_below: f64,
    true_moment_below: f64,
    hat_moment_below: f64,
}

/// Finite weighted stand-in for the joint law of `(Q, Q_hat)`.
#[derive(Debug, Clone)]
pub struct DiscretePool {
    entries: Vec<PoolEntry>,
    by_true: Cumulative,
    levels: Vec<HatLevel>,
}

#[derive(Debug, Deserialize)]
struct PoolRow {
    q_true: f64,
    q_hat: f64,
    #[serde(default)]
    weight: Option<f64>,
}

impl DiscretePool {
    /// Validates and normalizes `entries` so the weights sum to one.
    pub fn new(entries: Vec<PoolEntry>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::Empty("pool"));
        }
        let mut total = 0.0;
        for e in &entries {
            unit_interval("q_true", e.q_true)?;
            unit_interval("q_hat", e.q_hat)?;
            if !(e.weight > 0.0 && e.weight.is_finite()) {
                return Err(Error::Domain {
                    name: "weight",
                    value: e.weight,
                    expected: "a finite value > 0".into(),
                });
            }
            total += e.weight;
        }
        let entries: Vec<PoolEntry> = entries
            .into_iter()
            .map(|e| PoolEntry {
                weight: e.weight / total,
                ..e
            })
            .collect();

        let by_true = Cumulative::build(entries.iter().map(|e| (e.q_true, e.weight)).collect());

        let mut sorted: Vec<&PoolEntry> = entries.iter().collect();
        sorted.sort_by(|a, b| a.q_hat.total_cmp(&b.q_hat));
        let mut levels: Vec<HatLevel> = Vec::new();
        let (mut mass_below, mut true_below, mut hat_below) = (0.0, 0.0, 0.0);
        let mut i = 0;
        while i < sorted.len() {
            let q_hat = sorted[i].q_hat;
            let (mut mass, mut true_moment) = (0.0, 0.0);
            while i < sorted.len() && sorted[i].q_hat == q_hat {
                mass += sorted[i].weight;
                true_moment += sorted[i].weight * sorted[i].q_true;
                i += 1;
            }
            levels.push(HatLevel {
                q_hat,
                mass,
                mean_true: true_moment / mass,
                mass_below,
                true_moment_below: true_below,
                hat_moment_below: hat_below,
            });
            mass_below += mass;
            true_below += true_moment;
            hat_below += mass * q_hat;
        }

        Ok(Self {
            entries,
            by_true,
            levels,
        })
    }

    /// Equal-weight pool with `q_hat = q_true`.
    pub fn uniform_exact(values: &[f64]) -> Result<Self> {
        Self::new(values.iter().map(|&q| PoolEntry::exact(q, 1.0)).collect())
    }

    /// Reads `q_true,q_hat[,weight]` CSV. Missing or empty weights are 1.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let mut entries = Vec::new();
        for row in rdr.deserialize::<PoolRow>() {
            let row = row.map_err(|e| Error::Parse {
                line: e.position().map_or(0, |p| p.line() as usize),
                message: e.to_string(),
            })?;
            entries.push(PoolEntry::new(row.q_true, row.q_hat, row.weight.unwrap_or(1.0)));
        }
        Self::new(entries)
    }

    pub fn from_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_csv_reader(std::fs::File::open(path)?)
    }

    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for e in &self.entries {
            w.serialize(e)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Normalized entries in their original order.
    pub fn entries(&self) -> &[PoolEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Distinct `q_hat` values in increasing order.
    pub fn q_hat_support(&self) -> impl Iterator<Item = f64> + '_ {
        self.levels.iter().map(|l| l.q_hat)
    }

    /// Expected marginal gain `g(u) = E[(u - Q) 1{Q < u}]` under the
    /// `q_true` marginal.
    pub fn marginal_gain(&self, u: f64) -> Result<f64> {
        unit_interval("u", u)?;
        let (mass, moment) = self.by_true.strictly_below(u);
        Ok((u * mass - moment).max(0.0))
    }

    /// `(mu(u), p(u))` with `g = mu * p`; `mu` is 0 where `p` is 0.
    pub fn cei_and_prob(&self, u: f64) -> Result<(f64, f64)> {
        unit_interval("u", u)?;
        let (p, _) = self.by_true.strictly_below(u);
        if p == 0.0 {
            return Ok((0.0, 0.0));
        }
        Ok((self.marginal_gain(u)? / p, p))
    }

    /// `u* = sup{u in [0, 1] : g(u) <= gamma}`, found by inverting the
    /// piecewise-linear `g` on the segment where it crosses `gamma`.
    pub fn stop_threshold(&self, gamma: f64) -> Result<f64> {
        check_gamma(gamma)?;
        if self.marginal_gain(1.0)? <= gamma {
            return Ok(1.0);
        }
        let v = &self.by_true.values;
        for j in 0..v.len() {
            let right = v.get(j + 1).copied().unwrap_or(1.0).min(1.0);
            if self.marginal_gain(right)? <= gamma {
                continue;
            }
            // g(u) = M_j u - S_j on (v_j, right].
            let (m, s) = (self.by_true.mass[j], self.by_true.moment[j]);
            let mut u = ((gamma + s) / m).clamp(v[j], right);
            while u > v[j] && self.marginal_gain(u)? > gamma {
                u = u.next_down();
            }
            return Ok(u);
        }
        unreachable!("g(1) > gamma implies some segment crosses gamma")
    }

    /// `1 / P(Q <= u*)`, infinite when no mass sits at or below `u*`.
    pub fn expected_stopping_time(&self, gamma: f64) -> Result<f64> {
        let u_star = self.stop_threshold(gamma)?;
        let mass = self.by_true.at_or_below(u_star);
        Ok(if mass > 0.0 { 1.0 / mass } else { f64::INFINITY })
    }

    fn level(&self, u_hat: f64) -> Result<&HatLevel> {
        let idx = self.levels.partition_point(|l| l.q_hat < u_hat);
        match self.levels.get(idx) {
            Some(l) if l.q_hat == u_hat => Ok(l),
            _ => Err(Error::NotInSupport(u_hat)),
        }
    }

    /// `E[U_t - U_{t+1} | U_hat_t = u_hat]`: the expected true-loss gain of
    /// one more draw when the incumbent was selected at `u_hat`. Only draws
    /// with `q_hat < u_hat` replace the incumbent. Negative when the
    /// replacing models are truly worse on average.
    pub fn conditional_gain_finite(&self, u_hat: f64) -> Result<f64> {
        let l = self.level(u_hat)?;
        Ok(l.mean_true * l.mass_below - l.true_moment_below)
    }

    /// `E[U_t - U_hat_t - U_{t+1} + U_hat_{t+1} | U_hat_t = u_hat]`, the
    /// change in selection effect over one draw. Non-negative values are
    /// consistent with a non-decreasing selection effect.
    pub fn selection_effect_diff(&self, u_hat: f64) -> Result<f64> {
        let l = self.level(u_hat)?;
        let true_gain = l.mean_true * l.mass_below - l.true_moment_below;
        let hat_gain = l.q_hat * l.mass_below - l.hat_moment_below;
        Ok(true_gain - hat_gain)
    }

    /// Weighted median of `q_hat`: the smallest support point with
    /// cumulative mass at least one half.
    pub fn q_hat_median(&self) -> f64 {
        self.levels
            .iter()
            .find(|l| l.mass_below + l.mass >= 0.5 - ASSUMPTION_TOLERANCE)
            .map(|l| l.q_hat)
            .unwrap_or_else(|| self.levels.last().expect("pool is nonempty").q_hat)
    }

    /// Checks the non-decreasing selection effect at every `q_hat` support
    /// point, and that `E[a - Q_hat | Q_hat < a]` is non-decreasing in `a`
    /// below the `q_hat` median.
    pub fn check_assumptions(&self) -> AssumptionReport {
        let selection_effect = self
            .levels
            .iter()
            .map(|l| {
                let diff =
                    (l.mean_true * l.mass_below - l.true_moment_below) - (l.q_hat * l.mass_below - l.hat_moment_below);
                SelectionPoint {
                    q_hat: l.q_hat,
                    percentile: l.mass_below + l.mass,
                    diff,
                    holds: diff >= -ASSUMPTION_TOLERANCE,
                }
            })
            .collect();

        let median = self.q_hat_median();
        let mut running_max = f64::NEG_INFINITY;
        let mut cei_monotonicity = Vec::new();
        for l in self.levels.iter().filter(|l| l.q_hat < median && l.mass_below > 0.0) {
            let cei = l.q_hat - l.hat_moment_below / l.mass_below;
            let violation = (running_max - cei).max(0.0);
            cei_monotonicity.push(CeiPoint {
                q_hat: l.q_hat,
                cei,
                holds: violation <= ASSUMPTION_TOLERANCE,
                violation,
            });
            running_max = running_max.max(cei);
        }

        AssumptionReport {
            median_q_hat: median,
            selection_effect,
            cei_monotonicity,
        }
    }
}

fn check_gamma(gamma: f64) -> Result<()> {
    if gamma > 0.0 && gamma.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain {
            name: "gamma",
            value: gamma,
            expected: "a finite value > 0".into(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionPoint {
    pub q_hat: f64,
    /// `P(Q_hat <= q_hat)`.
    pub percentile: f64,
    pub diff: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CeiPoint {
    pub q_hat: f64,
    pub cei: f64,
    pub holds: bool,
    /// How far the CEI here falls below the largest CEI at smaller `q_hat`.
    pub violation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub median_q_hat: f64,
    pub selection_effect: Vec<SelectionPoint>,
    pub cei_monotonicity: Vec<CeiPoint>,
}

impl AssumptionReport {
    pub fn selection_effect_holds(&self) -> bool {
        self.selection_effect.iter().all(|p| p.holds)
    }

    pub fn cei_monotone_holds(&self) -> bool {
        self.cei_monotonicity.iter().all(|p| p.holds)
    }

    pub fn selection_effect_violations(&self) -> impl Iterator<Item = &SelectionPoint> {
        self.selection_effect.iter().filter(|p| !p.holds)
    }

    pub fn cei_violations(&self) -> impl Iterator<Item = &CeiPoint> {
        self.cei_monotonicity.iter().filter(|p| !p.holds)
    }

    /// Most negative selection-effect difference, or 0 if none is negative.
    pub fn worst_selection_diff(&self) -> f64 {
        self.selection_effect.iter().map(|p| p.diff).fold(0.0, f64::min)
    }

    pub fn summary(&self) -> AssumptionSummary {
        AssumptionSummary {
            selection_effect_holds: self.selection_effect_holds(),
            selection_effect_violations: self.selection_effect_violations().count(),
            worst_selection_diff: self.worst_selection_diff(),
            cei_monotone_holds: self.cei_monotone_holds(),
            cei_violations: self.cei_violations().count(),
            max_cei_violation: self.cei_monotonicity.iter().map(|p| p.violation).fold(0.0, f64::max),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AssumptionSummary {
    pub selection_effect_holds: bool,
    pub selection_effect_violations: usize,
    pub worst_selection_diff: f64,
    pub cei_monotone_holds: bool,
    pub cei_violations: usize,
    pub max_cei_violation: f64,
}
