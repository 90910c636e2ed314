//! Degree test: probe vertices are compared against a panel, and the test
//! counts probes whose panel degree clears `τ_deg`.

use serde::{Deserialize, Serialize};

use super::{floor_tol, DetectorVerdict};
use crate::divergences::LogBase;
use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::oracle::EdgeOracle;
use crate::strategies::{bipartite_pattern_plan, bipartite_unique_pairs};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DegreeConfig {
    /// Panel size `n′`.
    pub n_prime: u32,
    /// Number of probes `M`.
    pub m: u32,
    pub epsilon: f64,
    /// Base of the `log n′` in the count threshold.
    #[serde(default)]
    pub log_base: LogBase,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResolvedDegree {
    pub n0: u64,
    /// Per-probe degree threshold `n′q + N0(p − q)/2`.
    pub tau_deg: f64,
    /// Count threshold `2 log n′`.
    pub count_threshold: f64,
}

impl DegreeConfig {
    pub fn new(n_prime: u32, m: u32, epsilon: f64) -> Self {
        Self { n_prime, m, epsilon, log_base: LogBase::Natural }
    }

    /// Distinct pairs the pattern queries.
    pub fn pattern_budget(&self) -> u64 {
        bipartite_unique_pairs(self.n_prime as u64, self.m as u64)
    }

    pub fn resolve(&self, params: &ModelParams) -> Result<ResolvedDegree> {
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::InfeasibleConfig(format!(
                "degree slack epsilon = {} outside (0, 1)",
                self.epsilon
            )));
        }
        if !(self.m <= self.n_prime && self.n_prime <= params.n) {
            return Err(Error::InfeasibleConfig(format!(
                "degree test needs M <= n' <= n, got M = {}, n' = {}, n = {}",
                self.m, self.n_prime, params.n
            )));
        }
        let n0 = floor_tol((1.0 - self.epsilon) * params.k as f64 * self.n_prime as f64 / params.n as f64);
        if n0 < 1 {
            return Err(Error::InfeasibleConfig("degree test needs N0 >= 1".into()));
        }
        let (p, q) = (params.planted_mean(), params.noise_mean());
        Ok(ResolvedDegree {
            n0,
            tau_deg: self.n_prime as f64 * q + n0 as f64 * (p - q) / 2.0,
            count_threshold: 2.0 * self.log_base.log(self.n_prime as f64),
        })
    }
}

/// Run the degree test; `seed` fixes panel and probes.
pub fn degree_test<O: EdgeOracle + ?Sized>(
    oracle: &mut O,
    params: &ModelParams,
    cfg: &DegreeConfig,
    seed: u64,
) -> Result<DetectorVerdict> {
    let resolved = cfg.resolve(params)?;
    let pattern = bipartite_pattern_plan(oracle.n(), cfg.n_prime, cfg.m, seed)?;
    if (oracle.remaining() as u128) < pattern.plan.len() as u128 {
        return Err(Error::BudgetExhausted { budget: oracle.budget() });
    }
    let answers = pattern.plan.execute(oracle)?;

    let mut probe_slot = vec![u32::MAX; oracle.n() as usize];
    for (s, &v) in pattern.probes.iter().enumerate() {
        probe_slot[v as usize] = s as u32;
    }
    // Degree of each probe into the panel, itself excluded.
    let mut degree = vec![0.0f64; pattern.probes.len()];
    for (pair, answer) in pattern.plan.pairs.iter().zip(answers) {
        for v in [pair.lo, pair.hi] {
            let s = probe_slot[v as usize];
            if s != u32::MAX {
                degree[s as usize] += answer;
            }
        }
    }
    let count = degree.iter().filter(|&&d| d > resolved.tau_deg).count();
    Ok(DetectorVerdict::from_threshold(
        count as f64,
        resolved.count_threshold,
        "degree",
        false,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Hypothesis, Instance};
    use crate::oracle::BudgetedOracle;

    #[test]
    fn resolve_values() {
        let params = ModelParams::bernoulli(10_000, 1000, 1.0, 0.5).unwrap();
        let r = DegreeConfig::new(2000, 400, 0.1).resolve(&params).unwrap();
        assert_eq!(r.n0, 180);
        assert!((r.tau_deg - 1045.0).abs() < 1e-9);
        assert!((r.count_threshold - 2.0 * 2000f64.ln()).abs() < 1e-12);
        assert!(r.tau_deg > 1000.0 && r.tau_deg < 2000.0);
    }

    #[test]
    fn empty_graph_decides_null() {
        let params = ModelParams::bernoulli(200, 50, 0.0, 0.0).unwrap();
        let inst = Instance::sample(params, Hypothesis::H1, 1).unwrap();
        let cfg = DegreeConfig::new(100, 30, 0.1);
        let mut oracle = BudgetedOracle::new(inst, cfg.pattern_budget());
        let v = degree_test(&mut oracle, &params, &cfg, 3).unwrap();
        assert_eq!((v.statistic, v.decision), (0.0, 0));
    }

    #[test]
    fn noiseless_full_plant_counts_every_probe() {
        // k = n, p = 1, q = 0: every probe has degree n' − 1.
        let params = ModelParams::bernoulli(60, 60, 1.0, 0.0).unwrap();
        let inst = Instance::sample(params, Hypothesis::H1, 1).unwrap();
        let cfg = DegreeConfig::new(40, 20, 0.1);
        let mut oracle = BudgetedOracle::new(inst, cfg.pattern_budget());
        let v = degree_test(&mut oracle, &params, &cfg, 3).unwrap();
        assert_eq!(v.statistic, 20.0);
        assert!(20.0 > 2.0 * 40f64.ln());
        assert_eq!(v.decision, 1);
    }

    #[test]
    fn budget_and_config_errors() {
        let params = ModelParams::bernoulli(60, 10, 1.0, 0.5).unwrap();
        let inst = Instance::sample(params, Hypothesis::H0, 1).unwrap();
        let cfg = DegreeConfig::new(40, 20, 0.1);
        let mut oracle = BudgetedOracle::new(inst, 10);
        assert!(matches!(degree_test(&mut oracle, &params, &cfg, 0), Err(Error::BudgetExhausted { .. })));
        assert!(matches!(
            DegreeConfig::new(40, 41, 0.1).resolve(&params),
            Err(Error::InfeasibleConfig(_))
        ));
        // (1 − 0.9)·10·5/60 < 1
        assert!(matches!(
            DegreeConfig::new(5, 2, 0.9).resolve(&params),
            Err(Error::InfeasibleConfig(_))
        ));
    }
}
