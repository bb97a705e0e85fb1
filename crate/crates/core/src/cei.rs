//! Upper bounds on the conditional expected improvement (CEI)
//! `mu(u) = E[u - Q | Q < u]`.
//!
//! Two sources: distributional assumptions that give a closed-form bound
//! ([`cei_bound`]), and a data-driven empirical-Bernstein confidence sequence
//! on the mean improvement below a calibration point ([`EbState`]).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{unit_interval, Error, Result};

/// Which CEI bound a search runs with.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CeiSpec {
    /// No assumption: `mu(u) <= u`.
    Universal,
    /// Density non-decreasing on `[0, a]`.
    MonotoneDensity { a: f64 },
    /// `mu` non-decreasing on `[0, a]`, with `mu(a)` supplied by the user.
    ExponentialTail { a: f64, mu_at_a: f64 },
    /// No mass below `a`.
    BoundedBelow { a: f64 },
    /// Estimate the bound from data (calibration phase plus empirical
    /// Bernstein).
    Estimated,
}

impl CeiSpec {
    pub fn validate(&self) -> Result<()> {
        let strictly_inside = |name, a: f64| {
            if a > 0.0 && a < 1.0 {
                Ok(())
            } else {
                Err(Error::Domain {
                    name,
                    value: a,
                    expected: "(0, 1)".into(),
                })
            }
        };
        match *self {
            CeiSpec::Universal | CeiSpec::Estimated => Ok(()),
            CeiSpec::MonotoneDensity { a } => strictly_inside("a", a),
            CeiSpec::ExponentialTail { a, mu_at_a } => {
                strictly_inside("a", a)?;
                unit_interval("mu_at_a", mu_at_a)?;
                if mu_at_a > a {
                    return Err(Error::Domain {
                        name: "mu_at_a",
                        value: mu_at_a,
                        expected: format!("at most a = {a}"),
                    });
                }
                Ok(())
            }
            CeiSpec::BoundedBelow { a } => {
                if a > 0.0 && a <= 1.0 {
                    Ok(())
                } else {
                    Err(Error::Domain {
                        name: "a",
                        value: a,
                        expected: "(0, 1]".into(),
                    })
                }
            }
        }
    }

    pub fn is_estimated(&self) -> bool {
        matches!(self, CeiSpec::Estimated)
    }
}

impl fmt::Display for CeiSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CeiSpec::Universal => write!(f, "universal"),
            CeiSpec::MonotoneDensity { a } => write!(f, "mono:{a}"),
            CeiSpec::ExponentialTail { a, mu_at_a } => write!(f, "exp:{a}:{mu_at_a}"),
            CeiSpec::BoundedBelow { a } => write!(f, "bounded:{a}"),
            CeiSpec::Estimated => write!(f, "estimate"),
        }
    }
}

impl FromStr for CeiSpec {
    type Err = Error;

    /// Parses `universal`, `mono:a`, `exp:a:mu_a`, `bounded:a` or `estimate`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split(':').collect();
        let num = |i: usize| -> Result<f64> {
            parts
                .get(i)
                .ok_or_else(|| Error::Config(format!("missing parameter in CEI spec `{s}`")))?
                .parse::<f64>()
                .map_err(|e| Error::Config(format!("bad number in CEI spec `{s}`: {e}")))
        };
        let (spec, arity) = match parts[0] {
            "universal" => (CeiSpec::Universal, 1),
            "mono" => (CeiSpec::MonotoneDensity { a: num(1)? }, 2),
            "exp" => (
                CeiSpec::ExponentialTail {
                    a: num(1)?,
                    mu_at_a: num(2)?,
                },
                3,
            ),
            "bounded" => (CeiSpec::BoundedBelow { a: num(1)? }, 2),
            "estimate" | "estimated" => (CeiSpec::Estimated, 1),
            other => return Err(Error::Config(format!("unknown CEI spec `{other}`"))),
        };
        if parts.len() != arity {
            return Err(Error::Config(format!("wrong number of fields in CEI spec `{s}`")));
        }
        spec.validate()?;
        Ok(spec)
    }
}

/// Closed-form CEI bound. Never exceeds `u`.
pub fn cei_bound(u: f64, spec: &CeiSpec) -> Result<f64> {
    unit_interval("u", u)?;
    spec.validate()?;
    Ok(match *spec {
        CeiSpec::Universal => u,
        CeiSpec::MonotoneDensity { a } => {
            if u <= a {
                0.5 * u
            } else {
                u
            }
        }
        CeiSpec::ExponentialTail { a, mu_at_a } => {
            if u <= a {
                mu_at_a.min(u)
            } else {
                u
            }
        }
        CeiSpec::BoundedBelow { a } => (u - a).max(0.0),
        CeiSpec::Estimated => return Err(Error::EstimatedCei),
    })
}

/// Sufficient statistics of the empirical-Bernstein upper confidence
/// sequence for the mean of the accepted improvements `Delta = C - q_hat`.
///
/// Running estimates carry prior terms: `nu_hat = (1/2 + sum x) / (1 + k)`
/// and `sigma2_hat = (1/4 + sum (x_i - nu_hat_i)^2) / (1 + k)`. The betting
/// fraction for the `(k+1)`-th accepted value uses `sigma2_hat_k` and the
/// count `k + 1`, so it depends only on earlier accepted values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EbState {
    alpha: f64,
    calibration: Option<f64>,
    accepted: u64,
    sum_x: f64,
    sum_sq_dev: f64,
    mean: f64,
    variance: f64,
    sum_lambda: f64,
    numerator: f64,
}

impl EbState {
    /// Fresh state with failure budget `alpha` in `(0, 1]`.
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::Domain {
                name: "alpha",
                value: alpha,
                expected: "(0, 1]".into(),
            });
        }
        Ok(Self {
            alpha,
            calibration: None,
            accepted: 0,
            sum_x: 0.0,
            sum_sq_dev: 0.0,
            mean: 0.5,
            variance: 0.25,
            sum_lambda: 0.0,
            numerator: 0.0,
        })
    }

    pub fn with_calibration(mut self, c: f64) -> Result<Self> {
        unit_interval("calibration constant", c)?;
        self.calibration = Some(c);
        Ok(self)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn calibration(&self) -> Option<f64> {
        self.calibration
    }

    /// Number of accepted values `|S_t|`.
    pub fn accepted(&self) -> u64 {
        self.accepted
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }

    pub fn sum_lambda(&self) -> f64 {
        self.sum_lambda
    }

    /// `sum lambda_i x_i - (x_i - nu_hat_{i-1})^2 (log(1 - lambda_i) + lambda_i)`.
    pub fn numerator(&self) -> f64 {
        self.numerator
    }

    /// Betting fraction the next accepted value would receive.
    pub fn next_lambda(&self) -> f64 {
        let n = (self.accepted + 1) as f64;
        let raw = (2.0 * (2.0 / self.alpha).ln() / (self.variance * n * (1.0 + n).ln())).sqrt();
        raw.min(0.5)
    }

    /// Feeds one observed loss. Values with `C - q_hat <= 0` are rejected
    /// and leave the state untouched.
    pub fn update(&self, q_hat: f64) -> Result<Self> {
        let c = self.calibration.ok_or(Error::CalibrationUnset)?;
        unit_interval("q_hat", q_hat)?;
        let delta = c - q_hat;
        if delta <= 0.0 {
            return Ok(*self);
        }
        self.push(delta)
    }

    /// Adds `x` in `[0, 1]` as the next accepted observation.
    pub fn push(&self, x: f64) -> Result<Self> {
        unit_interval("x", x)?;
        let lambda = self.next_lambda();
        let mut next = *self;
        let dev = x - self.mean;
        next.numerator += lambda * x - dev * dev * ((-lambda).ln_1p() + lambda);
        next.sum_lambda += lambda;
        next.accepted += 1;
        next.sum_x += x;
        let denom = (next.accepted + 1) as f64;
        next.mean = (0.5 + next.sum_x) / denom;
        let resid = x - next.mean;
        next.sum_sq_dev += resid * resid;
        next.variance = (0.25 + next.sum_sq_dev) / denom;
        Ok(next)
    }

    /// Upper confidence bound on the common mean, clipped to 1, or `None`
    /// before any value has been accepted.
    pub fn bound(&self) -> Option<f64> {
        if self.accepted == 0 {
            return None;
        }
        let raw = ((2.0 / self.alpha).ln() + self.numerator) / self.sum_lambda;
        Some(raw.min(1.0))
    }
}
