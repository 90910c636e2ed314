//! Closed-form divergences between the planted and noise distributions,
//! plus the small combinatorial helpers shared by the threshold and bound
//! formulas.
//!
//! | Kind      | χ²(P‖Q)                                             | d_KL(P‖Q)                                  |
//! |-----------|-----------------------------------------------------|--------------------------------------------|
//! | Bernoulli | (p−q)² / (q(1−q))                                   | p log(p/q) + (1−p) log((1−p)/(1−q))        |
//! | Gaussian  | σ₀²/(σ₁√(2σ₀²−σ₁²)) · exp(Δ²/(2σ₀²−σ₁²)) − 1        | log(σ₀/σ₁) + (σ₁²+Δ²)/(2σ₀²) − ½           |
//!
//! Here P = planted, Q = noise, σ₁² and σ₀² are their variances and Δ the
//! difference of means. The Gaussian χ² is finite only when 2σ₀² > σ₁².

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Logarithm convention used by KL divergences and the `log` factors in
/// threshold and bound formulas.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogBase {
    #[default]
    Natural,
    Base2,
}

impl LogBase {
    #[inline]
    pub fn log(self, x: f64) -> f64 {
        match self {
            LogBase::Natural => x.ln(),
            LogBase::Base2 => x.log2(),
        }
    }

    /// Factor converting a natural-log quantity into this base.
    pub fn from_nats(self) -> f64 {
        match self {
            LogBase::Natural => 1.0,
            LogBase::Base2 => std::f64::consts::LOG2_E,
        }
    }
}

impl fmt::Display for LogBase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LogBase::Natural => f.write_str("natural"),
            LogBase::Base2 => f.write_str("base2"),
        }
    }
}

impl std::str::FromStr for LogBase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "natural" | "e" | "ln" => Ok(LogBase::Natural),
            "base2" | "2" | "log2" => Ok(LogBase::Base2),
            other => Err(Error::Parameter(format!("unknown log base '{other}'"))),
        }
    }
}

/// A single-entry distribution: the law of one edge observation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Dist {
    Bernoulli { theta: f64 },
    Gaussian { mean: f64, var: f64 },
}

impl Dist {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Dist::Bernoulli { theta } if !(0.0..=1.0).contains(&theta) => Err(Error::Domain(
                format!("Bernoulli parameter {theta} outside [0, 1]"),
            )),
            Dist::Gaussian { mean, var } if !mean.is_finite() || !(var > 0.0 && var.is_finite()) => {
                Err(Error::Domain(format!(
                    "Gaussian needs finite mean and positive variance, got ({mean}, {var})"
                )))
            }
            _ => Ok(()),
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Dist::Bernoulli { theta } => theta,
            Dist::Gaussian { mean, .. } => mean,
        }
    }

    pub fn is_bernoulli(&self) -> bool {
        matches!(self, Dist::Bernoulli { .. })
    }
}

impl fmt::Display for Dist {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Dist::Bernoulli { theta } => write!(f, "Bern({theta})"),
            Dist::Gaussian { mean, var } => write!(f, "N({mean},{var})"),
        }
    }
}

/// Bernoulli planted/noise densities `(p, q)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BernPair {
    pub p: f64,
    pub q: f64,
}

impl BernPair {
    pub fn new(p: f64, q: f64) -> Result<Self> {
        for (name, v) in [("p", p), ("q", q)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Domain(format!("{name} = {v} outside [0, 1]")));
            }
        }
        Ok(Self { p, q })
    }

    pub fn to_pair(self) -> DistributionPair {
        DistributionPair::bernoulli(self.p, self.q)
    }
}

/// The planted distribution 𝒫 and the noise distribution 𝒬.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistributionPair {
    pub planted: Dist,
    pub noise: Dist,
}

impl DistributionPair {
    pub fn bernoulli(p: f64, q: f64) -> Self {
        Self {
            planted: Dist::Bernoulli { theta: p },
            noise: Dist::Bernoulli { theta: q },
        }
    }

    pub fn gaussian(planted_mean: f64, planted_var: f64, noise_mean: f64, noise_var: f64) -> Self {
        Self {
            planted: Dist::Gaussian { mean: planted_mean, var: planted_var },
            noise: Dist::Gaussian { mean: noise_mean, var: noise_var },
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.planted.validate()?;
        self.noise.validate()
    }

    /// `Some(BernPair)` when both sides are Bernoulli.
    pub fn as_bern(&self) -> Option<BernPair> {
        match (self.planted, self.noise) {
            (Dist::Bernoulli { theta: p }, Dist::Bernoulli { theta: q }) => Some(BernPair { p, q }),
            _ => None,
        }
    }
}

impl Default for DistributionPair {
    fn default() -> Self {
        Self::bernoulli(1.0, 0.5)
    }
}

/// χ²(planted ‖ noise). Base-free.
pub fn chi_square(pair: &DistributionPair) -> Result<f64> {
    pair.validate()?;
    match (pair.planted, pair.noise) {
        (Dist::Bernoulli { theta: p }, Dist::Bernoulli { theta: q }) => {
            if p == q {
                return Ok(0.0);
            }
            if q <= 0.0 || q >= 1.0 {
                return Err(Error::DivergenceInfinite(format!(
                    "chi-square of Bern({p}) against degenerate Bern({q})"
                )));
            }
            Ok((p - q).powi(2) / (q * (1.0 - q)))
        }
        (Dist::Gaussian { mean: m1, var: v1 }, Dist::Gaussian { mean: m0, var: v0 }) => {
            let denom = 2.0 * v0 - v1;
            if denom <= 0.0 {
                return Err(Error::DivergenceInfinite(format!(
                    "Gaussian chi-square needs 2·σ_noise² > σ_planted² (got {v0}, {v1})"
                )));
            }
            let ratio = v0 / (v1.sqrt() * denom.sqrt());
            Ok((ratio * ((m1 - m0).powi(2) / denom).exp() - 1.0).max(0.0))
        }
        _ => Err(Error::DivergenceInfinite(
            "planted and noise distributions have mismatched supports".into(),
        )),
    }
}

/// d_KL(planted ‖ noise) in the requested log base.
pub fn kl(pair: &DistributionPair, base: LogBase) -> Result<f64> {
    pair.validate()?;
    let nats = match (pair.planted, pair.noise) {
        (Dist::Bernoulli { theta: p }, Dist::Bernoulli { theta: q }) => bernoulli_kl_nats(p, q)?,
        (Dist::Gaussian { mean: m1, var: v1 }, Dist::Gaussian { mean: m0, var: v0 }) => {
            0.5 * (v0 / v1).ln() + (v1 + (m1 - m0).powi(2)) / (2.0 * v0) - 0.5
        }
        _ => {
            return Err(Error::DivergenceInfinite(
                "planted and noise distributions have mismatched supports".into(),
            ))
        }
    };
    Ok(nats.max(0.0) * base.from_nats())
}

/// Bernoulli KL in nats, with the `0·log 0 = 0` convention.
pub fn bernoulli_kl_nats(a: f64, b: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&a) || !(0.0..=1.0).contains(&b) {
        return Err(Error::Domain(format!("Bernoulli parameters ({a}, {b}) outside [0, 1]")));
    }
    if a == b {
        return Ok(0.0);
    }
    let term = |x: f64, y: f64| -> Result<f64> {
        if x == 0.0 {
            Ok(0.0)
        } else if y == 0.0 {
            Err(Error::DivergenceInfinite(format!(
                "Bern({a}) is not absolutely continuous w.r.t. Bern({b})"
            )))
        } else {
            Ok(x * (x / y).ln())
        }
    };
    Ok(term(a, b)? + term(1.0 - a, 1.0 - b)?)
}

/// C(m, 2).
#[inline]
pub fn binom2(m: u64) -> u64 {
    m * m.saturating_sub(1) / 2
}

/// ln C(n, r) via log-gamma; `-inf` when `r > n`.
pub fn ln_choose(n: u64, r: u64) -> f64 {
    if r > n {
        f64::NEG_INFINITY
    } else {
        statrs::function::factorial::ln_binomial(n, r)
    }
}

/// C(n, r) as f64, saturating at `f64::INFINITY`.
pub fn choose_f64(n: u64, r: u64) -> f64 {
    if r > n {
        return 0.0;
    }
    let r = r.min(n - r);
    let mut acc = 1.0f64;
    for i in 0..r {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc.round()
}
