//! Streaming stopping engines.
//!
//! [`Engine`] consumes one observed loss at a time and stops the first time
//! the anytime-valid bound on the marginal gain of one more sample drops
//! strictly below `gamma`. With a closed-form CEI bound it runs the
//! assumption-driven rule; with [`CeiSpec::Estimated`] it first fills a
//! calibration buffer, then estimates the CEI with an empirical-Bernstein
//! confidence sequence, splitting the failure budget in three.

use serde::{Deserialize, Serialize};

use crate::bounds::{improvement_prob_bound, BoundFamily, BoundTable, QuadratureSettings};
use crate::cei::{cei_bound, CeiSpec, EbState};
use crate::error::{open_interval, unit_interval, Error, Result};

pub const CERTIFICATE_SCHEMA_VERSION: u32 = 1;

/// Largest step index the horizon search will consider.
const MAX_HORIZON: u64 = 1 << 62;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Closed-form CEI bound.
    Alg1,
    /// Estimated CEI with a calibration phase.
    Alg2,
}

/// A searcher's declared economics and the bound it certifies with.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    /// Cost of one more sample per unit of loss reduction.
    pub gamma: f64,
    pub delta: f64,
    pub cei: CeiSpec,
    #[serde(default)]
    pub family: BoundFamily,
    /// Halt after this many loop steps even without a stop.
    #[serde(default)]
    pub max_steps: Option<u64>,
    #[serde(default)]
    pub quadrature: QuadratureSettings,
}

impl SearchConfig {
    pub fn new(gamma: f64, delta: f64, cei: CeiSpec) -> Result<Self> {
        let config = Self {
            gamma,
            delta,
            cei,
            family: BoundFamily::default(),
            max_steps: None,
            quadrature: QuadratureSettings::default(),
        };
        config.validate()?;
        Ok(config)
    }

    pub fn with_family(mut self, family: BoundFamily) -> Result<Self> {
        self.family = family;
        self.validate()?;
        Ok(self)
    }

    pub fn with_max_steps(mut self, max_steps: u64) -> Result<Self> {
        self.max_steps = Some(max_steps);
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::Config(format!(
                "gamma must be finite and > 0, got {} (gamma = 0 never stops)",
                self.gamma
            )));
        }
        open_interval("delta", self.delta, 0.0, 1.0)?;
        self.cei.validate()?;
        self.family.validate()?;
        self.quadrature.validate()?;
        if self.max_steps == Some(0) {
            return Err(Error::Config("max_steps must be positive".into()));
        }
        Ok(())
    }

    pub fn mode(&self) -> Mode {
        if self.cei.is_estimated() {
            Mode::Alg2
        } else {
            Mode::Alg1
        }
    }

    /// Failure budget handed to the improvement-probability bound.
    pub fn bound_alpha(&self) -> f64 {
        match self.mode() {
            Mode::Alg1 => self.delta,
            Mode::Alg2 => self.delta / 3.0,
        }
    }

    /// Loop step by which any run of this configuration must have stopped.
    pub fn max_models(&self) -> Result<u64> {
        max_models_with(self.gamma, self.bound_alpha(), &self.family, &self.quadrature)
    }

    /// Bound table matching this configuration, precomputed up to `horizon`.
    pub fn bound_table(&self, horizon: u64) -> Result<BoundTable> {
        BoundTable::precompute(self.family, self.bound_alpha(), self.quadrature, horizon)
    }
}

/// Calibration length `ceil(18 ln(3 / delta))`.
pub fn calibration_length(delta: f64) -> Result<u64> {
    open_interval("delta", delta, 0.0, 1.0)?;
    Ok((18.0 * (3.0 / delta).ln()).ceil() as u64)
}

/// 1-based rank of the calibration constant among the sorted calibration
/// samples: `floor(T1 / 3)`.
pub fn calibration_rank(t1: u64) -> u64 {
    t1 / 3
}

/// Smallest `t` with `improvement_prob_bound(t, delta) < gamma`.
pub fn max_models(gamma: f64, delta: f64, family: &BoundFamily) -> Result<u64> {
    max_models_with(gamma, delta, family, &QuadratureSettings::default())
}

pub fn max_models_with(gamma: f64, alpha: f64, family: &BoundFamily, settings: &QuadratureSettings) -> Result<u64> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::Domain {
            name: "gamma",
            value: gamma,
            expected: "a finite value > 0".into(),
        });
    }
    let below = |t: u64| -> Result<bool> { Ok(improvement_prob_bound(t, alpha, family, settings)? < gamma) };
    if below(1)? {
        return Ok(1);
    }
    // Invariant: below(lo) is false, below(hi) is true.
    let mut lo = 1;
    let mut hi = 2;
    while !below(hi)? {
        if hi >= MAX_HORIZON {
            return Err(Error::Convergence(format!(
                "no step up to {MAX_HORIZON} has a bound below gamma = {gamma}"
            )));
        }
        lo = hi;
        hi *= 2;
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if below(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// One loop step as recorded in the trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub t: u64,
    pub q_hat: f64,
    /// Running minimum over loop samples.
    pub u_hat: f64,
    /// CEI bound at `u_hat`.
    pub mu_bar: f64,
    /// Improvement-probability bound at `t`.
    pub p_bar: f64,
    /// `mu_bar * p_bar`.
    pub bound: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    /// The bound fell below gamma.
    Stop,
    /// `max_steps` was reached first; not a stop certificate.
    CapReached,
}

/// Calibration details recorded by an estimated-CEI run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationRecord {
    pub t1: u64,
    /// The `floor(T1 / 3)`-th smallest calibration sample.
    pub c: f64,
    /// Number of loop samples strictly below `c`.
    pub accepted: u64,
    /// Best loss over calibration and loop samples together.
    pub global_best: f64,
    pub samples: Vec<f64>,
}

/// Exportable record of a finished search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub schema_version: u32,
    pub mode: Mode,
    pub outcome: Outcome,
    pub tau: u64,
    pub u_hat: f64,
    pub bound: f64,
    pub gamma: f64,
    pub delta: f64,
    pub cei: CeiSpec,
    pub family: BoundFamily,
    pub implied_gamma: f64,
    pub trace: Vec<TraceRow>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calibration: Option<CalibrationRecord>,
}

impl Certificate {
    pub fn is_stop(&self) -> bool {
        self.outcome == Outcome::Stop
    }

    pub fn to_json(&self) -> Result<String> {
        crate::json::to_string(self)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// High-probability upper bound on the marginal gain the searcher walked
/// away from.
pub fn implied_gamma(certificate: &Certificate) -> Result<f64> {
    if !certificate.is_stop() {
        return Err(Error::NotStopCertificate);
    }
    Ok(certificate.bound)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Decision {
    /// Sample went into the calibration buffer; `remaining` more are needed.
    Calibrating {
        remaining: u64,
    },
    Continue(TraceRow),
    Stop(Box<Certificate>),
    CapReached(Box<Certificate>),
}

impl Decision {
    pub fn certificate(&self) -> Option<&Certificate> {
        match self {
            Decision::Stop(c) | Decision::CapReached(c) => Some(c),
            _ => None,
        }
    }

    pub fn is_terminal(&self) -> bool {
        self.certificate().is_some()
    }

    /// Short label used in streaming output.
    pub fn label(&self) -> &'static str {
        match self {
            Decision::Calibrating { .. } => "calibrating",
            Decision::Continue(_) => "continue",
            Decision::Stop(_) => "stop",
            Decision::CapReached(_) => "cap",
        }
    }
}

/// Everything an engine carries between steps. Plain data, so a search can
/// be serialized and resumed elsewhere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchState {
    /// Loop step counter.
    pub t: u64,
    pub u_hat: Option<f64>,
    pub trace: Vec<TraceRow>,
    pub calibration_samples: Vec<f64>,
    pub t1: Option<u64>,
    pub eb: Option<EbState>,
    pub finished: bool,
}

impl SearchState {
    fn fresh(config: &SearchConfig) -> Result<Self> {
        let (t1, eb) = match config.mode() {
            Mode::Alg1 => (None, None),
            Mode::Alg2 => (
                Some(calibration_length(config.delta)?),
                Some(EbState::new(config.delta / 3.0)?),
            ),
        };
        Ok(Self {
            t: 0,
            u_hat: None,
            trace: Vec::new(),
            calibration_samples: Vec::new(),
            t1,
            eb,
            finished: false,
        })
    }

    fn calibrated(&self) -> bool {
        match (self.t1, &self.eb) {
            (Some(_), Some(eb)) => eb.calibration().is_some(),
            _ => true,
        }
    }
}

/// A single search. Strictly sequential; independent engines can run in
/// parallel.
#[derive(Debug, Clone)]
pub struct Engine {
    config: SearchConfig,
    table: BoundTable,
    state: SearchState,
}

impl Engine {
    pub fn new(config: SearchConfig) -> Result<Self> {
        config.validate()?;
        let table = config.bound_table(0)?;
        Self::with_table(config, table)
    }

    /// Uses a shared precomputed table, which must match the configuration.
    pub fn with_table(config: SearchConfig, table: BoundTable) -> Result<Self> {
        let state = SearchState::fresh(&config)?;
        Self::resume(config, table, state)
    }

    pub fn resume(config: SearchConfig, table: BoundTable, state: SearchState) -> Result<Self> {
        config.validate()?;
        if table.family() != config.family || table.alpha() != config.bound_alpha() {
            return Err(Error::Config(
                "bound table does not match the search configuration".into(),
            ));
        }
        if (config.mode() == Mode::Alg2) != state.t1.is_some() {
            return Err(Error::Config("search state belongs to the other mode".into()));
        }
        if state.trace.len() as u64 != state.t {
            return Err(Error::Config("trace length differs from the step counter".into()));
        }
        Ok(Self { config, table, state })
    }

    pub fn config(&self) -> &SearchConfig {
        &self.config
    }

    pub fn state(&self) -> &SearchState {
        &self.state
    }

    pub fn into_state(self) -> SearchState {
        self.state
    }

    pub fn is_finished(&self) -> bool {
        self.state.finished
    }

    /// Feeds one observed loss.
    pub fn step(&mut self, q_hat: f64) -> Result<Decision> {
        if self.state.finished {
            return Err(Error::AlreadyStopped(self.state.t));
        }
        unit_interval("q_hat", q_hat)?;
        if !self.state.calibrated() {
            return self.calibrate(q_hat);
        }

        let t = self.state.t + 1;
        let u_hat = self.state.u_hat.map_or(q_hat, |u| u.min(q_hat));
        let p_bar = self.table.get(t)?;
        let (mu_bar, eb) = match self.config.mode() {
            Mode::Alg1 => (cei_bound(u_hat, &self.config.cei)?, None),
            Mode::Alg2 => {
                let eb = self.state.eb.expect("estimated mode carries EB state").update(q_hat)?;
                (eb.bound().map_or(u_hat, |b| b.min(u_hat)), Some(eb))
            }
        };
        let row = TraceRow {
            t,
            q_hat,
            u_hat,
            mu_bar,
            p_bar,
            bound: mu_bar * p_bar,
        };

        self.state.t = t;
        self.state.u_hat = Some(u_hat);
        self.state.eb = eb;
        self.state.trace.push(row);

        if row.bound < self.config.gamma {
            self.state.finished = true;
            Ok(Decision::Stop(Box::new(self.certificate(Outcome::Stop))))
        } else if self.config.max_steps.is_some_and(|cap| t >= cap) {
            self.state.finished = true;
            Ok(Decision::CapReached(Box::new(self.certificate(Outcome::CapReached))))
        } else {
            Ok(Decision::Continue(row))
        }
    }

    /// Feeds samples until the search ends or the input runs out.
    pub fn run<I: IntoIterator<Item = f64>>(&mut self, samples: I) -> Result<Option<Certificate>> {
        for q in samples {
            match self.step(q)? {
                Decision::Stop(c) | Decision::CapReached(c) => return Ok(Some(*c)),
                _ => {}
            }
        }
        Ok(None)
    }

    fn calibrate(&mut self, q_hat: f64) -> Result<Decision> {
        let t1 = self.state.t1.expect("calibration only happens in estimated mode");
        self.state.calibration_samples.push(q_hat);
        let filled = self.state.calibration_samples.len() as u64;
        if filled == t1 {
            let mut sorted = self.state.calibration_samples.clone();
            sorted.sort_by(f64::total_cmp);
            let rank = calibration_rank(t1).max(1);
            let c = sorted[(rank - 1) as usize];
            let eb = self.state.eb.expect("estimated mode carries EB state");
            self.state.eb = Some(eb.with_calibration(c)?);
        }
        Ok(Decision::Calibrating { remaining: t1 - filled })
    }

    fn certificate(&self, outcome: Outcome) -> Certificate {
        let last = *self.state.trace.last().expect("a certificate follows a loop step");
        let calibration = match (self.state.t1, &self.state.eb) {
            (Some(t1), Some(eb)) => {
                let calib_best = self
                    .state
                    .calibration_samples
                    .iter()
                    .copied()
                    .fold(f64::INFINITY, f64::min);
                Some(CalibrationRecord {
                    t1,
                    c: eb.calibration().expect("loop steps follow calibration"),
                    accepted: eb.accepted(),
                    global_best: calib_best.min(last.u_hat),
                    samples: self.state.calibration_samples.clone(),
                })
            }
            _ => None,
        };
        Certificate {
            schema_version: CERTIFICATE_SCHEMA_VERSION,
            mode: self.config.mode(),
            outcome,
            tau: last.t,
            u_hat: last.u_hat,
            bound: last.bound,
            gamma: self.config.gamma,
            delta: self.config.delta,
            cei: self.config.cei,
            family: self.config.family,
            implied_gamma: last.bound,
            trace: self.state.trace.clone(),
            calibration,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::improvement_prob_bound_uniform;

    fn universal(gamma: f64, delta: f64) -> SearchConfig {
        SearchConfig::new(gamma, delta, CeiSpec::Universal).unwrap()
    }

    #[test]
    fn first_sample_stops_when_gamma_is_one() {
        let mut e = Engine::new(universal(1.0, 0.05)).unwrap();
        let d = e.step(0.4).unwrap();
        let cert = d.certificate().unwrap();
        assert!(cert.is_stop());
        assert_eq!(cert.tau, 1);
        assert!((cert.bound - 0.4 * (1.0 - (-20.0f64).exp())).abs() < 1e-15);
        assert!(matches!(e.step(0.1), Err(Error::AlreadyStopped(1))));
    }

    #[test]
    fn constant_stream_stops_at_twelve() {
        let mut e = Engine::new(universal(0.2, 0.05)).unwrap();
        let cert = e.run(std::iter::repeat(0.5).take(100)).unwrap().unwrap();
        assert_eq!(cert.tau, 12);
        assert_eq!(cert.trace.len(), 12);
        assert!(cert.trace[10].bound >= 0.2 && (cert.trace[10].bound - 0.2058).abs() < 1e-3);
        assert!((cert.bound - 0.1939).abs() < 1e-3);
        assert_eq!(implied_gamma(&cert).unwrap(), cert.bound);
        // Oracle: closed form evaluated independently.
        let p12 = 1.0 - (-(11.0f64 / 0.05).ln_1p() / 11.0).exp();
        assert!((cert.bound - 0.5 * p12).abs() < 1e-14);
    }

    #[test]
    fn bounded_below_stops_with_zero_bound() {
        let cfg = SearchConfig::new(0.2, 0.05, CeiSpec::BoundedBelow { a: 0.5 }).unwrap();
        let mut e = Engine::new(cfg).unwrap();
        let cert = e.run([0.5]).unwrap().unwrap();
        assert_eq!(cert.tau, 1);
        assert_eq!(cert.bound, 0.0);
        assert_eq!(implied_gamma(&cert).unwrap(), 0.0);
    }

    #[test]
    fn gamma_zero_and_bad_inputs_rejected() {
        assert!(matches!(
            SearchConfig::new(0.0, 0.05, CeiSpec::Universal),
            Err(Error::Config(_))
        ));
        assert!(SearchConfig::new(0.1, 1.0, CeiSpec::Universal).is_err());
        let mut e = Engine::new(universal(0.1, 0.05)).unwrap();
        assert!(e.step(1.2).is_err());
        assert!(e.step(f64::NAN).is_err());
        assert_eq!(e.state().t, 0);
    }

    #[test]
    fn calibration_constants() {
        assert_eq!(calibration_length(0.05).unwrap(), 74);
        assert_eq!(calibration_rank(74), 24);
        assert_eq!(calibration_length(0.3).unwrap(), 42);
        assert_eq!(calibration_rank(42), 14);
    }

    #[test]
    fn estimated_mode_calibrates_then_loops() {
        let cfg = SearchConfig::new(0.1, 0.05, CeiSpec::Estimated).unwrap();
        let mut e = Engine::new(cfg).unwrap();
        // Calibration values 0.26, 0.27, ..., 0.99; the 24th smallest is 0.49.
        for i in 0..74 {
            let d = e.step(0.26 + 0.01 * f64::from(i)).unwrap();
            assert_eq!(
                d,
                Decision::Calibrating {
                    remaining: 73 - i as u64
                }
            );
        }
        assert!((e.state().eb.unwrap().calibration().unwrap() - 0.49).abs() < 1e-12);
        // Loop samples above C are rejected, so mu_bar falls back to U_hat.
        let mut last = None;
        for _ in 0..11 {
            last = Some(e.step(0.6).unwrap());
        }
        assert!(matches!(last, Some(Decision::Continue(_))));
        let d = e.step(0.2).unwrap();
        let cert = d.certificate().expect("0.2 * p_12(1/60) < 0.1");
        assert_eq!(cert.tau, 12);
        let p = 1.0 - 661f64.powf(-1.0 / 11.0);
        assert!((p - 0.4458).abs() < 1e-4);
        let row = cert.trace[11];
        assert_eq!(row.u_hat, 0.2);
        // One accepted Delta = 0.29 gives an EB bound clipped at 1, then by U_hat.
        assert_eq!(row.mu_bar, 0.2);
        assert!((row.bound - 0.2 * p).abs() < 1e-14);
        assert!((cert.bound - 0.0892).abs() < 1e-4);
        let calib = cert.calibration.as_ref().unwrap();
        assert_eq!((calib.t1, calib.accepted), (74, 1));
        assert_eq!(calib.global_best, 0.2);
        assert_eq!(calib.samples.len(), 74);
    }

    #[test]
    fn estimated_running_min_ignores_calibration() {
        let cfg = SearchConfig::new(1e-9, 0.3, CeiSpec::Estimated).unwrap();
        let mut e = Engine::new(cfg.with_max_steps(3).unwrap()).unwrap();
        let mut samples = vec![0.05];
        samples.extend(std::iter::repeat(0.9).take(41));
        samples.extend([0.7, 0.8, 0.75]);
        let cert = e.run(samples).unwrap().unwrap();
        assert_eq!(cert.outcome, Outcome::CapReached);
        assert_eq!(cert.u_hat, 0.7);
        assert_eq!(cert.calibration.as_ref().unwrap().global_best, 0.05);
        assert!(matches!(implied_gamma(&cert), Err(Error::NotStopCertificate)));
    }

    #[test]
    fn cap_halts_with_non_stop_certificate() {
        let cfg = universal(1e-6, 0.05).with_max_steps(5).unwrap();
        let mut e = Engine::new(cfg).unwrap();
        let cert = e.run(std::iter::repeat(0.5)).unwrap().unwrap();
        assert_eq!(cert.tau, 5);
        assert!(!cert.is_stop());
        assert!(cert.bound >= 1e-6);
        assert!(e.step(0.1).is_err());
    }

    #[test]
    fn exhausted_stream_returns_none() {
        let mut e = Engine::new(universal(0.01, 0.05)).unwrap();
        assert_eq!(e.run([0.5, 0.4]).unwrap(), None);
        assert_eq!(e.state().t, 2);
        assert_eq!(e.state().u_hat, Some(0.4));
    }

    #[test]
    fn max_models_examples() {
        let u = BoundFamily::UniformMixture;
        assert_eq!(max_models(0.5, 0.05, &u).unwrap(), 9);
        assert_eq!(max_models(1.0, 0.05, &u).unwrap(), 1);
        assert_eq!(max_models(1.0, 0.9, &u).unwrap(), 1);
        assert_eq!(max_models(0.3, 0.1, &u).unwrap(), 15);
        assert!(max_models(0.0, 0.1, &u).is_err());
        let cfg = SearchConfig::new(0.5, 0.15, CeiSpec::Estimated).unwrap();
        assert_eq!(cfg.max_models().unwrap(), max_models(0.5, 0.05, &u).unwrap());
    }

    #[test]
    fn max_models_matches_linear_scan() {
        for &(gamma, delta) in &[(0.05, 0.05), (0.01, 0.1), (0.2, 0.01), (0.003, 0.3)] {
            let mut t = 1;
            while improvement_prob_bound_uniform(t, delta).unwrap() >= gamma {
                t += 1;
            }
            assert_eq!(max_models(gamma, delta, &BoundFamily::UniformMixture).unwrap(), t);
        }
        let it = BoundFamily::iterated_log();
        let m = max_models(0.01, 0.05, &it).unwrap();
        let s = QuadratureSettings::default();
        assert!(improvement_prob_bound(m, 0.05, &it, &s).unwrap() < 0.01);
        assert!(improvement_prob_bound(m - 1, 0.05, &it, &s).unwrap() >= 0.01);
    }

    #[test]
    fn certificate_round_trips_bit_for_bit() {
        let mut e = Engine::new(universal(0.05, 0.05)).unwrap();
        let stream = (0..200).map(|i| 0.3 + 0.5 * ((i * 37 % 101) as f64 / 101.0));
        let cert = e.run(stream).unwrap().unwrap();
        let text = cert.to_json().unwrap();
        let back = Certificate::from_json(&text).unwrap();
        assert_eq!(back, cert);
        assert_eq!(
            implied_gamma(&back).unwrap().to_bits(),
            implied_gamma(&cert).unwrap().to_bits()
        );
        assert!(text.contains("\"mode\": \"alg1\""));
    }

    #[test]
    fn state_resumes_after_serialization() {
        let cfg = SearchConfig::new(0.02, 0.05, CeiSpec::Estimated).unwrap();
        let stream: Vec<f64> = (0..400)
            .map(|i| 0.3 + 0.7 * ((i * 7919) % 1000) as f64 / 1000.0)
            .collect();
        let mut whole = Engine::new(cfg).unwrap();
        let expected = whole.run(stream.iter().copied()).unwrap();
        assert!(expected.as_ref().is_some_and(|c| c.tau > 26));

        let mut first = Engine::new(cfg).unwrap();
        assert_eq!(first.run(stream[..100].iter().copied()).unwrap(), None);
        let text = serde_json::to_string(first.state()).unwrap();
        let state: SearchState = serde_json::from_str(&text).unwrap();
        let mut second = Engine::resume(cfg, cfg.bound_table(0).unwrap(), state).unwrap();
        assert_eq!(second.run(stream[100..].iter().copied()).unwrap(), expected);
    }

    #[test]
    fn mismatched_table_rejected() {
        let cfg = universal(0.1, 0.05);
        let table = BoundTable::new(BoundFamily::UniformMixture, 0.1, QuadratureSettings::default()).unwrap();
        assert!(Engine::with_table(cfg, table).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn universal_stops_by_horizon(
                gamma in 0.02f64..1.0,
                delta in 0.01f64..0.5,
                stream in proptest::collection::vec(0.0f64..=1.0, 1..64),
            ) {
                let cfg = universal(gamma, delta);
                let horizon = cfg.max_models().unwrap();
                let mut e = Engine::new(cfg).unwrap();
                let cert = e.run(stream.iter().copied().cycle().take(horizon as usize)).unwrap();
                let cert = cert.expect("must stop by the horizon");
                prop_assert!(cert.tau <= horizon);
                prop_assert!(cert.bound < gamma);
            }

            #[test]
            fn trace_is_monotone_and_consistent(
                stream in proptest::collection::vec(0.0f64..=1.0, 1..200),
                a in 0.05f64..0.95,
            ) {
                let cfg = SearchConfig::new(1e-12, 0.05, CeiSpec::MonotoneDensity { a }).unwrap();
                let mut e = Engine::new(cfg).unwrap();
                for q in &stream {
                    if e.step(*q).unwrap().is_terminal() {
                        break;
                    }
                }
                let trace = &e.state().trace;
                prop_assert_eq!(trace.len() as u64, e.state().t);
                for w in trace.windows(2) {
                    prop_assert!(w[1].u_hat <= w[0].u_hat);
                    prop_assert!(w[1].p_bar <= w[0].p_bar);
                }
                for row in trace {
                    let mu = cei_bound(row.u_hat, &cfg.cei).unwrap();
                    prop_assert_eq!(row.mu_bar, mu);
                    prop_assert!(row.bound <= mu * row.p_bar);
                }
            }

            #[test]
            fn identical_streams_give_identical_certificates(
                stream in proptest::collection::vec(0.0f64..=1.0, 80..300),
                gamma in 0.001f64..0.2,
            ) {
                let cfg = SearchConfig::new(gamma, 0.1, CeiSpec::Estimated).unwrap();
                let a = Engine::new(cfg).unwrap().run(stream.iter().copied()).unwrap();
                let b = Engine::new(cfg).unwrap().run(stream.iter().copied()).unwrap();
                prop_assert_eq!(
                    a.map(|c| c.to_json().unwrap()),
                    b.map(|c| c.to_json().unwrap())
                );
            }
        }
    }
}
