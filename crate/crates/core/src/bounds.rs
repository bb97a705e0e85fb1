//! Anytime-valid upper bounds on the improvement probability of a running
//! minimum.
//!
//! For an iid sequence with running minimum `Y_t`, the probability that the
//! next draw lands strictly below `Y_t` is bounded, simultaneously for every
//! `t` with probability `1 - alpha`, by one of two sequences:
//!
//! * [`BoundFamily::UniformMixture`]: the closed form obtained by mixing the
//!   test martingale `(1 - theta)^{-t} 1{V_t >= theta}` over a uniform prior.
//!   The bound at `t` solves `int_0^p (1 - theta)^{-t} dtheta = 1 / alpha`.
//! * [`BoundFamily::IteratedLog`]: the same martingale mixed over
//!   `eps / (theta log(1/theta)^{1+eps})` on `(0, 1/e)`. The bound has no
//!   closed form and is found by quadrature plus a bracketed root search.
//!   It decays like `log log t / t` instead of `log t / t`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{open_interval, Error, Result};
use crate::quadrature;

/// Default mixing exponent for [`BoundFamily::IteratedLog`].
pub const DEFAULT_ITERLOG_EPSILON: f64 = 0.5;

/// Which mixture the improvement-probability bound is built from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BoundFamily {
    UniformMixture,
    IteratedLog { epsilon: f64 },
}

impl BoundFamily {
    pub fn iterated_log() -> Self {
        BoundFamily::IteratedLog {
            epsilon: DEFAULT_ITERLOG_EPSILON,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            BoundFamily::UniformMixture => Ok(()),
            BoundFamily::IteratedLog { epsilon } => {
                if epsilon > 0.0 && epsilon.is_finite() {
                    Ok(())
                } else {
                    Err(Error::Domain {
                        name: "epsilon",
                        value: epsilon,
                        expected: "a finite value > 0".into(),
                    })
                }
            }
        }
    }
}

impl Default for BoundFamily {
    fn default() -> Self {
        BoundFamily::UniformMixture
    }
}

/// Numerical settings for the iterated-log bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSettings {
    /// Relative tolerance on the mixture integral, used both by the
    /// quadrature and as the stopping rule of the root search.
    pub rel_tol: f64,
    /// Absolute tolerance; also the budget for the truncated upper tail.
    pub abs_tol: f64,
    /// Maximum number of Gauss–Kronrod panels per integral.
    pub max_panels: usize,
    /// Maximum iterations of the bracketed root search.
    pub max_root_iterations: usize,
}

impl Default for QuadratureSettings {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 1e-14,
            max_panels: 500,
            max_root_iterations: 200,
        }
    }
}

impl QuadratureSettings {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("rel_tol", self.rel_tol), ("abs_tol", self.abs_tol)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Domain {
                    name,
                    value: v,
                    expected: "a finite value > 0".into(),
                });
            }
        }
        if self.max_panels == 0 || self.max_root_iterations == 0 {
            return Err(Error::Config("quadrature iteration limits must be positive".into()));
        }
        Ok(())
    }
}

fn check_step(t: u64) -> Result<()> {
    if t == 0 {
        Err(Error::Domain {
            name: "t",
            value: 0.0,
            expected: "t >= 1".into(),
        })
    } else {
        Ok(())
    }
}

/// Largest double strictly below one.
const BELOW_ONE: f64 = 1.0 - f64::EPSILON / 2.0;

/// Uniform-mixture bound `p_t(alpha)`.
///
/// `1 - e^{-1/alpha}` at `t = 1`, otherwise
/// `1 - ((t - 1) / alpha + 1)^{-1/(t-1)}`, evaluated as
/// `-expm1(-log1p((t-1)/alpha) / (t-1))`. When the exact value is closer to
/// one than double precision can represent, the largest double below one is
/// returned so the result stays inside `(0, 1)`.
pub fn improvement_prob_bound_uniform(t: u64, alpha: f64) -> Result<f64> {
    check_step(t)?;
    open_interval("alpha", alpha, 0.0, 1.0)?;
    let p = if t == 1 {
        -(-1.0 / alpha).exp_m1()
    } else {
        let m = (t - 1) as f64;
        -(-(m / alpha).ln_1p() / m).exp_m1()
    };
    Ok(p.min(BELOW_ONE))
}

/// `int_0^q (1 - theta)^{-t} dtheta` via its antiderivative.
pub fn mixture_integral(q: f64, t: u64) -> Result<f64> {
    check_step(t)?;
    if !(0.0..1.0).contains(&q) {
        return Err(Error::Domain {
            name: "q",
            value: q,
            expected: "[0, 1)".into(),
        });
    }
    let log_survival = (-q).ln_1p();
    if t == 1 {
        Ok(-log_survival)
    } else {
        let m = (t - 1) as f64;
        Ok((-m * log_survival).exp_m1() / m)
    }
}

/// `ln(e^x - 1)` without overflow for large `x`.
fn ln_expm1(x: f64) -> f64 {
    if x > 30.0 {
        x + (-(-x).exp()).ln_1p()
    } else {
        x.exp_m1().ln()
    }
}

fn log_add_exp(x: f64, y: f64) -> f64 {
    let m = x.max(y);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + ((x - m).exp() + (y - m).exp()).ln()
}

/// The iterated-log mixture integral written in `u = log(1/theta)`:
///
/// `F(a) = int_a^inf eps (1 - e^{-u})^{-t} u^{-1-eps} du`
///       `= a^{-eps} + int_a^inf eps u^{-1-eps} expm1(t L(u)) du`,
///
/// with `L(u) = -log(1 - e^{-u})`. The first term is the prior mass and is
/// exact. The second decays like `t e^{-u}` and is truncated at a point
/// where an analytic bound on the remainder falls below `abs_tol`.
#[derive(Debug, Clone, Copy)]
struct IterLogIntegral {
    t: f64,
    epsilon: f64,
    settings: QuadratureSettings,
}

impl IterLogIntegral {
    fn new(t: u64, epsilon: f64, settings: QuadratureSettings) -> Self {
        Self {
            t: t as f64,
            epsilon,
            settings,
        }
    }

    fn exponent(&self, u: f64) -> f64 {
        -self.t * (-(-u).exp()).ln_1p()
    }

    /// `ln` of the full integrand `eps (1 - e^{-u})^{-t} u^{-1-eps}`.
    fn ln_integrand(&self, u: f64) -> f64 {
        self.epsilon.ln() - (1.0 + self.epsilon) * u.ln() + self.exponent(u)
    }

    /// `ln` of the excess integrand `eps u^{-1-eps} expm1(t L(u))`.
    fn ln_excess(&self, u: f64) -> f64 {
        self.epsilon.ln() - (1.0 + self.epsilon) * u.ln() + ln_expm1(self.exponent(u))
    }

    /// Upper bound on `int_U^inf` of the excess integrand, valid once
    /// `t L(U) <= 1` (there `expm1(x) <= (e - 1) x` and
    /// `L(u) <= e^{-u} / (1 - e^{-U})`).
    fn tail_bound(&self, upper: f64) -> Option<f64> {
        if self.exponent(upper) > 1.0 {
            return None;
        }
        let decay = (-upper).exp();
        Some(
            self.epsilon * upper.powf(-1.0 - self.epsilon) * (std::f64::consts::E - 1.0) * self.t * decay
                / (1.0 - decay),
        )
    }

    fn truncation_point(&self, a: f64) -> f64 {
        let mut upper = a.max(self.t.ln().max(1.0));
        loop {
            if let Some(b) = self.tail_bound(upper) {
                if b <= self.settings.abs_tol {
                    return upper;
                }
            }
            upper += 1.0;
        }
    }

    /// Reciprocal of `-d/du ln g(u)` at `a`, up to the `expm1` correction.
    fn decay_length(&self, a: f64) -> f64 {
        let decay = (-a).exp();
        1.0 / (self.t * decay / (1.0 - decay) + (1.0 + self.epsilon) / a)
    }

    /// Panel edges at geometrically growing offsets from `a`, starting at the
    /// local decay length of the integrand.
    fn breaks(&self, a: f64, upper: f64) -> Vec<f64> {
        let mut out = vec![a];
        let mut width = self.decay_length(a);
        while a + width < upper {
            out.push(a + width);
            width *= 2.0;
        }
        out.push(upper);
        out
    }

    /// `ln F(a)` for `a >= 1`.
    ///
    /// When a cheap lower bound on `ln F(a)` already exceeds `cap`, that
    /// lower bound is returned instead of the quadrature value.
    fn ln_tail(&self, a: f64, cap: f64) -> Result<f64> {
        let prior = -self.epsilon * a.ln();
        let ln_peak = self.ln_excess(a);
        if ln_peak == f64::NEG_INFINITY {
            return Ok(prior);
        }
        let upper = self.truncation_point(a);
        let width = self.decay_length(a);
        if a + width < upper {
            // g is decreasing, so F(a) >= width * g(a + width).
            let lower = width.ln() + self.ln_excess(a + width);
            if lower > cap {
                return Ok(lower);
            }
        }
        // The excess integrand is decreasing; scale it by its value at `a`.
        let abs_tol = (self.settings.abs_tol * (-ln_peak).exp()).max(f64::MIN_POSITIVE);
        let est = quadrature::integrate_with_breaks(
            |u| (self.ln_excess(u) - ln_peak).exp(),
            &self.breaks(a, upper),
            abs_tol,
            0.1 * self.settings.rel_tol,
            self.settings.max_panels,
        )?;
        Ok(log_add_exp(prior, ln_peak + est.value.ln()))
    }
}

/// `int_0^q (1 - theta)^{-t} eps / (theta log(1/theta)^{1+eps}) dtheta`.
///
/// The mixing density lives on `(0, 1/e)`, so values of `q` past `1/e`
/// return the full-range integral. May be `+inf` when the integral exceeds
/// the double range.
pub fn iterlog_mixture_integral(q: f64, t: u64, epsilon: f64, settings: &QuadratureSettings) -> Result<f64> {
    check_step(t)?;
    BoundFamily::IteratedLog { epsilon }.validate()?;
    settings.validate()?;
    if !(0.0..1.0).contains(&q) {
        return Err(Error::Domain {
            name: "q",
            value: q,
            expected: "[0, 1)".into(),
        });
    }
    if q == 0.0 {
        return Ok(0.0);
    }
    let a = (-q.ln()).max(1.0);
    Ok(IterLogIntegral::new(t, epsilon, *settings)
        .ln_tail(a, f64::INFINITY)?
        .exp())
}

/// Iterated-log bound `p~_t(delta)`: the smallest `q < 1/e` whose mixture
/// integral reaches `1/delta`, or exactly 1 when no such `q` exists.
///
/// The root is searched in `a = log(1/q)` with a Newton step on
/// `ln F(a)` safeguarded by a bisection bracket. The bracket depends only on
/// `t`, so repeated calls are bit-identical. The returned `q` satisfies
/// `0 <= ln(integral(q) * delta) <= rel_tol`, i.e. it errs on the
/// conservative side.
pub fn improvement_prob_bound_iterlog(t: u64, delta: f64, epsilon: f64, settings: &QuadratureSettings) -> Result<f64> {
    check_step(t)?;
    open_interval("delta", delta, 0.0, 1.0)?;
    BoundFamily::IteratedLog { epsilon }.validate()?;
    settings.validate()?;

    let integral = IterLogIntegral::new(t, epsilon, *settings);
    let half_tol = 0.5 * settings.rel_tol;
    // Aim for the middle of [target, target * e^{rel_tol}].
    let target = -delta.ln() + half_tol;
    let psi = |a: f64| -> Result<f64> { Ok(integral.ln_tail(a, target + 1.0)? - target) };

    let mut lo = 1.0;
    let psi_lo = psi(lo)?;
    if psi_lo < -half_tol {
        return Ok(1.0);
    }
    if psi_lo.abs() <= half_tol {
        return Ok((-lo).exp());
    }

    let mut hi = 2.0;
    let mut psi_hi = psi(hi)?;
    while psi_hi >= 0.0 {
        lo = hi;
        hi *= 2.0;
        psi_hi = psi(hi)?;
        if hi > 1e6 {
            return Err(Error::Convergence(format!(
                "no bracket for the iterated-log bound at t={t}"
            )));
        }
    }
    if psi_hi.abs() <= half_tol {
        return Ok((-hi).exp());
    }

    let mut x = lo;
    let mut psi_x = psi(lo)?;
    for _ in 0..settings.max_root_iterations {
        // d/da ln F(a) = -f(a) / F(a).
        let slope = -(integral.ln_integrand(x) - (psi_x + target)).exp();
        let mut next = x - psi_x / slope;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if next <= lo || next >= hi {
            // Bracket exhausted at double resolution; lo is on the safe side.
            return Ok((-lo).exp());
        }
        x = next;
        psi_x = psi(x)?;
        if psi_x.abs() <= half_tol {
            return Ok((-x).exp());
        }
        if psi_x > 0.0 {
            lo = x;
        } else {
            hi = x;
        }
    }
    Err(Error::Convergence(format!(
        "iterated-log root search did not converge at t={t} (bracket [{lo}, {hi}])"
    )))
}

/// Dispatches on the bound family.
pub fn improvement_prob_bound(t: u64, alpha: f64, family: &BoundFamily, settings: &QuadratureSettings) -> Result<f64> {
    match *family {
        BoundFamily::UniformMixture => improvement_prob_bound_uniform(t, alpha),
        BoundFamily::IteratedLog { epsilon } => improvement_prob_bound_iterlog(t, alpha, epsilon, settings),
    }
}

/// Bound values for one `(family, alpha)` pair, optionally precomputed for
/// `t = 1..=horizon`. Lookups past the horizon fall back to on-demand
/// evaluation, which yields the same bits as the cached values.
#[derive(Debug, Clone)]
pub struct BoundTable {
    family: BoundFamily,
    alpha: f64,
    settings: QuadratureSettings,
    cached: Arc<[f64]>,
}

impl BoundTable {
    pub fn new(family: BoundFamily, alpha: f64, settings: QuadratureSettings) -> Result<Self> {
        Self::precompute(family, alpha, settings, 0)
    }

    pub fn precompute(family: BoundFamily, alpha: f64, settings: QuadratureSettings, horizon: u64) -> Result<Self> {
        family.validate()?;
        settings.validate()?;
        open_interval("alpha", alpha, 0.0, 1.0)?;
        let cached = (1..=horizon)
            .map(|t| improvement_prob_bound(t, alpha, &family, &settings))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            family,
            alpha,
            settings,
            cached: cached.into(),
        })
    }

    pub fn family(&self) -> BoundFamily {
        self.family
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn horizon(&self) -> u64 {
        self.cached.len() as u64
    }

    pub fn get(&self, t: u64) -> Result<f64> {
        check_step(t)?;
        match self.cached.get((t - 1) as usize) {
            Some(&p) => Ok(p),
            None => improvement_prob_bound(t, self.alpha, &self.family, &self.settings),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Root of the antiderivative `((1-q)^{1-t} - 1)/(t-1) = 1/alpha` by
    /// plain bisection with naive powers.
    fn uniform_bound_by_bisection(t: u64, alpha: f64) -> f64 {
        let integral = |q: f64| {
            if t == 1 {
                -(1.0 - q).ln()
            } else {
                ((1.0 - q).powf(1.0 - t as f64) - 1.0) / (t as f64 - 1.0)
            }
        };
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if integral(mid) < 1.0 / alpha {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// Same integral through `v = log(1/theta)^{-eps}`, which maps it onto
    /// `int_0^{a^{-eps}} (1 - exp(-v^{-1/eps}))^{-t} dv`; composite Simpson.
    pub(super) fn iterlog_integral_by_simpson(q: f64, t: u64, eps: f64, n: usize) -> f64 {
        let top = (-q.ln()).max(1.0).powf(-eps);
        let f = |v: f64| {
            if v == 0.0 {
                1.0
            } else {
                (1.0 - (-v.powf(-1.0 / eps)).exp()).powf(-(t as f64))
            }
        };
        let h = top / n as f64;
        let mut s = f(0.0) + f(top);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * f(i as f64 * h);
        }
        s * h / 3.0
    }

    #[test]
    fn uniform_spot_values() {
        let p1 = improvement_prob_bound_uniform(1, 0.05).unwrap();
        assert!((p1 - (1.0 - (-20.0f64).exp())).abs() < 1e-15);
        assert!((p1 - 0.999_999_997_938_846).abs() < 1e-12);

        let p2 = improvement_prob_bound_uniform(2, 0.05).unwrap();
        assert!((p2 - 20.0 / 21.0).abs() < 1e-15);

        let p11 = improvement_prob_bound_uniform(11, 0.05).unwrap();
        assert!((p11 - (1.0 - 201f64.powf(-0.1))).abs() < 1e-15);
        assert!((p11 - 0.41155).abs() < 5e-5, "{p11}");

        let p8 = improvement_prob_bound_uniform(8, 0.05).unwrap();
        let p9 = improvement_prob_bound_uniform(9, 0.05).unwrap();
        assert!((p8 - 0.5069).abs() < 1e-4, "{p8}");
        assert!((p9 - 0.4701).abs() < 1e-4, "{p9}");
    }

    #[test]
    fn uniform_matches_bisection_oracle() {
        for &alpha in &[0.01, 0.05, 0.1, 0.3] {
            for t in [1, 2, 3, 7, 11, 50, 400] {
                let closed = improvement_prob_bound_uniform(t, alpha).unwrap();
                let oracle = uniform_bound_by_bisection(t, alpha);
                assert!(
                    (closed - oracle).abs() <= 1e-12 * oracle.max(1e-3),
                    "t={t} alpha={alpha}: {closed} vs {oracle}"
                );
            }
        }
    }

    #[test]
    fn uniform_stays_inside_unit_interval() {
        // 1 - e^{-100} rounds to 1 in double precision.
        let p = improvement_prob_bound_uniform(1, 0.01).unwrap();
        assert!(p < 1.0 && p > 0.999);
        let tiny = improvement_prob_bound_uniform(u64::MAX / 2, 0.05).unwrap();
        assert!(tiny > 0.0 && tiny < 1e-15);
    }

    #[test]
    fn uniform_domain_errors() {
        assert!(improvement_prob_bound_uniform(0, 0.05).is_err());
        assert!(improvement_prob_bound_uniform(3, 0.0).is_err());
        assert!(improvement_prob_bound_uniform(3, 1.0).is_err());
        assert!(improvement_prob_bound_uniform(3, f64::NAN).is_err());
    }

    #[test]
    fn mixture_integral_spot_values() {
        assert_eq!(mixture_integral(0.0, 1).unwrap(), 0.0);
        assert_eq!(mixture_integral(0.0, 17).unwrap(), 0.0);
        assert!((mixture_integral(20.0 / 21.0, 2).unwrap() - 20.0).abs() < 1e-12);
        let q = 1.0 - (-20.0f64).exp();
        assert!((mixture_integral(q, 1).unwrap() - 20.0).abs() < 1e-7);
        assert!(mixture_integral(1.0, 3).is_err());
        assert!(mixture_integral(-0.1, 3).is_err());
    }

    #[test]
    fn mixture_integral_inverts_uniform_bound() {
        for &alpha in &[0.01, 0.05, 0.1, 0.3] {
            for t in 2..=300 {
                let p = improvement_prob_bound_uniform(t, alpha).unwrap();
                let v = mixture_integral(p, t).unwrap();
                assert!(((v - 1.0 / alpha) * alpha).abs() < 1e-9, "t={t} alpha={alpha}");
            }
        }
    }

    #[test]
    fn iterlog_integral_matches_simpson_oracle() {
        let s = QuadratureSettings::default();
        for &(q, t) in &[(0.3, 1u64), (0.2, 5), (0.05, 40), (1e-3, 3000), (2e-4, 20000)] {
            let ours = iterlog_mixture_integral(q, t, 0.5, &s).unwrap();
            let oracle = iterlog_integral_by_simpson(q, t, 0.5, 200_000);
            assert!(
                ((ours - oracle) / oracle).abs() < 1e-7,
                "q={q} t={t}: {ours} vs {oracle}"
            );
        }
    }

    #[test]
    fn iterlog_is_one_when_prior_mass_is_insufficient() {
        let s = QuadratureSettings::default();
        assert_eq!(improvement_prob_bound_iterlog(1, 0.05, 0.5, &s).unwrap(), 1.0);
        // Full-range integral at t = 1 is at most 1/(1 - 1/e) < 20.
        let full = iterlog_mixture_integral(0.999, 1, 0.5, &s).unwrap();
        assert!(full < 1.0 / (1.0 - (-1.0f64).exp()));
    }

    #[test]
    fn iterlog_root_hits_target() {
        let s = QuadratureSettings::default();
        for t in [100u64, 2500, 10_000, 1_000_000] {
            let p = improvement_prob_bound_iterlog(t, 0.05, 0.5, &s).unwrap();
            assert!(p > 0.0 && p < 1.0);
            let v = iterlog_mixture_integral(p, t, 0.5, &s).unwrap();
            assert!(v >= 20.0 * (1.0 - 1e-12), "t={t}: {v}");
            assert!((v - 20.0).abs() <= 20.0 * 2e-10, "t={t}: {v}");
            let oracle = iterlog_integral_by_simpson(p, t, 0.5, 400_000);
            assert!(((oracle - 20.0) / 20.0).abs() < 1e-6, "t={t}: {oracle}");
        }
    }

    #[test]
    fn iterlog_beats_uniform_at_large_t() {
        let s = QuadratureSettings::default();
        let tilde = improvement_prob_bound_iterlog(10_000, 0.05, 0.5, &s).unwrap();
        let bar = improvement_prob_bound_uniform(10_000, 0.05).unwrap();
        assert!((bar - 1.22e-3).abs() < 1e-5, "{bar}");
        assert!(tilde < bar, "{tilde} vs {bar}");
    }

    #[test]
    fn iterlog_ratio_to_iterated_log_shrinks_slowly() {
        // p * t / ln ln t sits well above its limit for practical t and
        // creeps down as t grows.
        let s = QuadratureSettings::default();
        let mut prev = f64::INFINITY;
        for t in [10_000u64, 1_000_000, 100_000_000, 10_000_000_000] {
            let p = improvement_prob_bound_iterlog(t, 0.05, 0.5, &s).unwrap();
            let tf = t as f64;
            let ratio = p * tf / tf.ln().ln();
            assert!(ratio < prev && ratio > 1.5, "t={t}: ratio {ratio}");
            prev = ratio;
        }
        let p = improvement_prob_bound_iterlog(1_000_000, 0.05, 0.5, &s).unwrap();
        assert!((p - 9.4834e-6).abs() < 1e-9, "{p}");
    }

    #[test]
    fn iterlog_nonincreasing_in_t() {
        let s = QuadratureSettings::default();
        let mut prev = 1.0;
        for t in 1..200 {
            let p = improvement_prob_bound_iterlog(t, 0.1, 0.5, &s).unwrap();
            assert!(p <= prev, "t={t}");
            prev = p;
        }
    }

    #[test]
    fn iterlog_domain_errors() {
        let s = QuadratureSettings::default();
        assert!(improvement_prob_bound_iterlog(0, 0.05, 0.5, &s).is_err());
        assert!(improvement_prob_bound_iterlog(3, 1.5, 0.5, &s).is_err());
        assert!(improvement_prob_bound_iterlog(3, 0.05, 0.0, &s).is_err());
        let bad = QuadratureSettings { rel_tol: 0.0, ..s };
        assert!(improvement_prob_bound_iterlog(3, 0.05, 0.5, &bad).is_err());
    }

    #[test]
    fn table_is_bit_identical_to_on_demand() {
        let s = QuadratureSettings::default();
        for family in [BoundFamily::UniformMixture, BoundFamily::iterated_log()] {
            let table = BoundTable::precompute(family, 0.05, s, 60).unwrap();
            let lazy = BoundTable::new(family, 0.05, s).unwrap();
            for t in 1..=70 {
                let direct = improvement_prob_bound(t, 0.05, &family, &s).unwrap();
                assert_eq!(table.get(t).unwrap().to_bits(), direct.to_bits());
                assert_eq!(lazy.get(t).unwrap().to_bits(), direct.to_bits());
            }
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn uniform_decreasing_in_t(t in 1u64..1_000_000, alpha in 0.001f64..0.999) {
                let a = improvement_prob_bound_uniform(t, alpha).unwrap();
                let b = improvement_prob_bound_uniform(t + 1, alpha).unwrap();
                prop_assert!(b < a);
                prop_assert!(a > 0.0 && a < 1.0);
            }

            #[test]
            fn uniform_decreasing_in_alpha(t in 2u64..100_000, alpha in 0.001f64..0.9) {
                let a = improvement_prob_bound_uniform(t, alpha).unwrap();
                let b = improvement_prob_bound_uniform(t, alpha * 1.05).unwrap();
                prop_assert!(b < a);
            }

            #[test]
            fn mixture_integral_increasing(q in 0.0f64..0.99, t in 1u64..500) {
                let a = mixture_integral(q, t).unwrap();
                let b = mixture_integral(q + 0.005, t).unwrap();
                prop_assert!(b > a || (a.is_infinite() && b.is_infinite()));
            }
        }
    }
}
