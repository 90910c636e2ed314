//! Null and planted instances with lazily realized edges.
//!
//! An [`Instance`] never stores an adjacency matrix. The observation on the
//! unordered pair `{i, j}` is a keyed pseudo-random function of the instance
//! seed and `(min(i,j), max(i,j))`, pushed through the quantile transform of
//! the planted or noise distribution depending on whether both endpoints are
//! planted. Unqueried edges therefore cost nothing.

use std::fmt;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::divergences::{Dist, DistributionPair};
use crate::error::{Error, Result};
use crate::seed::{self, tag};

/// Edge observation: `0.0`/`1.0` for Bernoulli models, a real for Gaussian ones.
pub type Observation = f64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Hypothesis {
    H0,
    H1,
}

impl Hypothesis {
    pub fn trial_tag(self) -> u64 {
        match self {
            Hypothesis::H0 => tag::NULL_TRIAL,
            Hypothesis::H1 => tag::ALT_TRIAL,
        }
    }
}

impl fmt::Display for Hypothesis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Hypothesis::H0 => f.write_str("H0"),
            Hypothesis::H1 => f.write_str("H1"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    pub n: u32,
    pub k: u32,
    #[serde(default)]
    pub dist: DistributionPair,
}

impl ModelParams {
    pub fn new(n: u32, k: u32, dist: DistributionPair) -> Result<Self> {
        let params = Self { n, k, dist };
        params.validate()?;
        Ok(params)
    }

    pub fn bernoulli(n: u32, k: u32, p: f64, q: f64) -> Result<Self> {
        Self::new(n, k, DistributionPair::bernoulli(p, q))
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::Parameter(format!("n = {} must be at least 2", self.n)));
        }
        if self.k < 2 || self.k > self.n {
            return Err(Error::Parameter(format!(
                "k = {} must satisfy 2 <= k <= n = {}",
                self.k, self.n
            )));
        }
        self.dist.validate()
    }

    /// Mean of a noise observation; the `q` of a Bernoulli model.
    pub fn noise_mean(&self) -> f64 {
        self.dist.noise.mean()
    }

    pub fn planted_mean(&self) -> f64 {
        self.dist.planted.mean()
    }
}

/// Quantile transform of one entry distribution.
#[derive(Debug, Clone, Copy)]
enum EntrySampler {
    Bernoulli(f64),
    Gaussian(Normal),
}

impl EntrySampler {
    fn new(d: Dist) -> Self {
        match d {
            Dist::Bernoulli { theta } => EntrySampler::Bernoulli(theta),
            Dist::Gaussian { mean, var } => {
                EntrySampler::Gaussian(Normal::new(mean, var.sqrt()).expect("validated Gaussian"))
            }
        }
    }

    #[inline]
    fn draw(&self, u: f64) -> Observation {
        match self {
            EntrySampler::Bernoulli(theta) => {
                if u < *theta {
                    1.0
                } else {
                    0.0
                }
            }
            EntrySampler::Gaussian(normal) => normal.inverse_cdf(u),
        }
    }
}

/// Serializable part of an instance. The planted set is deliberately absent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceDescriptor {
    pub params: ModelParams,
    pub hypothesis: Hypothesis,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct Instance {
    params: ModelParams,
    hypothesis: Hypothesis,
    seed: u64,
    planted: Option<Vec<u32>>,
    membership: Vec<bool>,
    edge_key: u64,
    planted_sampler: EntrySampler,
    noise_sampler: EntrySampler,
}

impl Instance {
    /// Draw an instance. Under `H1` the planted set is a uniform `k`-subset of
    /// `[n]` from a partial Fisher–Yates shuffle on a stream reserved for it.
    pub fn sample(params: ModelParams, hypothesis: Hypothesis, seed: u64) -> Result<Self> {
        params.validate()?;
        let (planted, membership) = match hypothesis {
            Hypothesis::H0 => (None, Vec::new()),
            Hypothesis::H1 => {
                let mut rng = seed::rng(seed, tag::PLANTED, 0);
                let mut vertices: Vec<u32> = (0..params.n).collect();
                let (chosen, _) = vertices.partial_shuffle(&mut rng, params.k as usize);
                let mut set = chosen.to_vec();
                set.sort_unstable();
                let mut membership = vec![false; params.n as usize];
                for &v in &set {
                    membership[v as usize] = true;
                }
                (Some(set), membership)
            }
        };
        Ok(Self {
            params,
            hypothesis,
            seed,
            planted,
            membership,
            edge_key: seed::derive(seed, tag::EDGE, 0),
            planted_sampler: EntrySampler::new(params.dist.planted),
            noise_sampler: EntrySampler::new(params.dist.noise),
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn n(&self) -> u32 {
        self.params.n
    }

    pub fn hypothesis(&self) -> Hypothesis {
        self.hypothesis
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Sorted planted set; `None` under `H0`. Only harness code and tests
    /// should look at this.
    pub fn planted_set(&self) -> Option<&[u32]> {
        self.planted.as_deref()
    }

    #[inline]
    pub fn is_planted(&self, v: u32) -> bool {
        self.membership.get(v as usize).copied().unwrap_or(false)
    }

    #[inline]
    pub fn is_planted_pair(&self, i: u32, j: u32) -> bool {
        self.is_planted(i) && self.is_planted(j)
    }

    pub fn descriptor(&self) -> InstanceDescriptor {
        InstanceDescriptor {
            params: self.params,
            hypothesis: self.hypothesis,
            seed: self.seed,
        }
    }

    pub fn check_pair(&self, i: u32, j: u32) -> Result<()> {
        let n = self.params.n;
        for v in [i, j] {
            if v >= n {
                return Err(Error::VertexOutOfRange { vertex: v, n });
            }
        }
        if i == j {
            return Err(Error::SelfLoop(i));
        }
        Ok(())
    }

    /// Observation on `{i, j}`.
    pub fn edge_value(&self, i: u32, j: u32) -> Result<Observation> {
        self.check_pair(i, j)?;
        Ok(self.edge_value_unchecked(i, j))
    }

    /// As [`Instance::edge_value`] without range or self-loop checks.
    #[inline]
    pub fn edge_value_unchecked(&self, i: u32, j: u32) -> Observation {
        let (lo, hi) = if i < j { (i, j) } else { (j, i) };
        let bits = seed::mix64(self.edge_key ^ seed::mix64(((lo as u64) << 32) | hi as u64));
        let u = seed::unit_open(bits);
        if self.is_planted_pair(lo, hi) {
            self.planted_sampler.draw(u)
        } else {
            self.noise_sampler.draw(u)
        }
    }
}
