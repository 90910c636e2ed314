//! Scan test: query every pair inside a random `M`-subset, then threshold the
//! heaviest `N0`-subset of the observed induced subgraph.

use rand::seq::index;
use serde::{Deserialize, Serialize};

use super::{floor_tol, DetectorVerdict};
use crate::divergences::{binom2, choose_f64};
use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::oracle::EdgeOracle;
use crate::seed::{self, tag};
use crate::strategies::clique_pattern_plan;

/// Exact enumeration runs when `C(M, N0)` is at most this.
pub const DEFAULT_ENUMERATION_CAP: f64 = 5e6;
/// Restarts of swap ascent in local-search mode.
pub const DEFAULT_RESTARTS: u32 = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdMode {
    /// τ = C(N0, 2)·γ.
    #[default]
    ChernoffGamma,
    /// τ = C(N0, 2)·(p + q)/2.
    BernsteinMidpoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchMode {
    /// Exact under the enumeration cap, local search above it.
    #[default]
    Auto,
    Exact,
    LocalSearch,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanConfig {
    /// Subsample size `M`.
    pub m: u32,
    pub epsilon: f64,
    /// Threshold level in `[q, p]`; `None` picks the default.
    #[serde(default)]
    pub gamma: Option<f64>,
    #[serde(default)]
    pub threshold_mode: ThresholdMode,
    #[serde(default)]
    pub search_mode: SearchMode,
    #[serde(default = "default_cap")]
    pub enumeration_cap: f64,
    #[serde(default = "default_restarts")]
    pub restarts: u32,
}

fn default_cap() -> f64 {
    DEFAULT_ENUMERATION_CAP
}

fn default_restarts() -> u32 {
    DEFAULT_RESTARTS
}

impl ScanConfig {
    pub fn new(m: u32, epsilon: f64) -> Self {
        Self {
            m,
            epsilon,
            gamma: None,
            threshold_mode: ThresholdMode::default(),
            search_mode: SearchMode::default(),
            enumeration_cap: DEFAULT_ENUMERATION_CAP,
            restarts: DEFAULT_RESTARTS,
        }
    }

    pub fn pattern_budget(&self) -> u64 {
        binom2(self.m as u64)
    }

    /// Derive `N0`, `γ` and `τ_scan` for a model.
    pub fn resolve(&self, params: &ModelParams) -> Result<ResolvedScan> {
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::InfeasibleConfig(format!(
                "scan slack epsilon = {} outside (0, 1)",
                self.epsilon
            )));
        }
        if self.m > params.n {
            return Err(Error::InfeasibleConfig(format!(
                "scan sample M = {} exceeds n = {}",
                self.m, params.n
            )));
        }
        let n0 = floor_tol((1.0 - self.epsilon) * params.k as f64 * self.m as f64 / params.n as f64);
        if n0 < 2 || n0 > self.m as u64 {
            return Err(Error::InfeasibleConfig(format!(
                "scan needs 2 <= N0 <= M, got N0 = {n0}, M = {}",
                self.m
            )));
        }
        let (p, q) = (params.planted_mean(), params.noise_mean());
        let pairs = binom2(n0) as f64;
        let gamma = match self.gamma {
            Some(g) => g,
            None if p >= 1.0 => 1.0 - 1.0 / (2.0 * pairs),
            None => p - (p - q) / 10.0,
        };
        let tau = match self.threshold_mode {
            ThresholdMode::ChernoffGamma => pairs * gamma,
            ThresholdMode::BernsteinMidpoint => pairs * (p + q) / 2.0,
        };
        let exact = match self.search_mode {
            SearchMode::Exact => true,
            SearchMode::LocalSearch => false,
            SearchMode::Auto => choose_f64(self.m as u64, n0) <= self.enumeration_cap,
        };
        Ok(ResolvedScan { n0: n0 as usize, gamma, tau, exact })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResolvedScan {
    pub n0: usize,
    pub gamma: f64,
    pub tau: f64,
    pub exact: bool,
}

/// Dense symmetric matrix of observed answers on the sampled vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    size: usize,
    w: Vec<f64>,
}

impl WeightMatrix {
    pub fn zeros(size: usize) -> Self {
        Self { size, w: vec![0.0; size * size] }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    #[inline]
    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.w[a * self.size + b]
    }

    pub fn set(&mut self, a: usize, b: usize, value: f64) {
        self.w[a * self.size + b] = value;
        self.w[b * self.size + a] = value;
    }

    fn row(&self, a: usize) -> &[f64] {
        &self.w[a * self.size..(a + 1) * self.size]
    }

    /// Sum of weights inside `members`.
    pub fn subset_sum(&self, members: &[usize]) -> f64 {
        let mut s = 0.0;
        for (x, &a) in members.iter().enumerate() {
            for &b in &members[x + 1..] {
                s += self.get(a, b);
            }
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanStatistic {
    pub value: f64,
    pub approximate: bool,
}

/// Max over `size`-subsets of the within-subset weight sum.
pub fn scan_statistic(
    weights: &WeightMatrix,
    size: usize,
    exact: bool,
    restarts: u32,
    seed: u64,
) -> ScanStatistic {
    if exact {
        ScanStatistic { value: exact_max(weights, size), approximate: false }
    } else {
        ScanStatistic { value: local_search_max(weights, size, restarts, seed), approximate: true }
    }
}

/// Depth-first enumeration of all `size`-subsets in lexicographic order.
/// `gain[v]` holds the weight from `v` into the current partial subset.
fn exact_max(weights: &WeightMatrix, size: usize) -> f64 {
    let m = weights.size();
    if size > m {
        return f64::NEG_INFINITY;
    }
    if size == 0 {
        return 0.0;
    }
    let mut gain = vec![vec![0.0; m]; size + 1];
    let mut best = f64::NEG_INFINITY;
    let mut stack: Vec<usize> = Vec::with_capacity(size);
    let mut sums = vec![0.0; size + 1];

    // Iterative DFS over combination prefixes.
    let mut next = 0usize;
    loop {
        let depth = stack.len();
        if depth == size {
            best = best.max(sums[depth]);
        }
        let remaining_slots = size - depth;
        if depth < size && next + remaining_slots <= m {
            let v = next;
            sums[depth + 1] = sums[depth] + gain[depth][v];
            let row = weights.row(v);
            let (lower, upper) = gain.split_at_mut(depth + 1);
            for (g, (&base, &w)) in upper[0].iter_mut().zip(lower[depth].iter().zip(row)) {
                *g = base + w;
            }
            stack.push(v);
            next = v + 1;
            continue;
        }
        match stack.pop() {
            Some(v) => next = v + 1,
            None => break,
        }
    }
    best
}

/// Best-improvement swap ascent from random starts.
fn local_search_max(weights: &WeightMatrix, size: usize, restarts: u32, seed: u64) -> f64 {
    let m = weights.size();
    if size > m {
        return f64::NEG_INFINITY;
    }
    if size == 0 || size == m {
        let all: Vec<usize> = (0..size).collect();
        return weights.subset_sum(&all);
    }
    let mut rng = seed::rng(seed, tag::DETECTOR, 7);
    let mut best = f64::NEG_INFINITY;
    for _ in 0..restarts.max(1) {
        let mut inside = vec![false; m];
        for v in index::sample(&mut rng, m, size) {
            inside[v] = true;
        }
        // gain[v] = Σ_{u in subset} w(u, v)
        let mut gain = vec![0.0; m];
        for u in (0..m).filter(|&u| inside[u]) {
            for (g, &w) in gain.iter_mut().zip(weights.row(u)) {
                *g += w;
            }
        }
        loop {
            let mut best_swap = None;
            let mut best_delta = 1e-12;
            for out in (0..m).filter(|&u| inside[u]) {
                for inn in (0..m).filter(|&v| !inside[v]) {
                    let delta = gain[inn] - gain[out] - weights.get(out, inn);
                    if delta > best_delta {
                        best_delta = delta;
                        best_swap = Some((out, inn));
                    }
                }
            }
            let Some((out, inn)) = best_swap else { break };
            inside[out] = false;
            inside[inn] = true;
            let (row_out, row_in) = (weights.row(out), weights.row(inn));
            for (g, (&wi, &wo)) in gain.iter_mut().zip(row_in.iter().zip(row_out)) {
                *g += wi - wo;
            }
        }
        let members: Vec<usize> = (0..m).filter(|&u| inside[u]).collect();
        best = best.max(weights.subset_sum(&members));
    }
    best
}

/// Run the scan test against an oracle. `seed` fixes the subsample.
pub fn scan_test<O: EdgeOracle + ?Sized>(
    oracle: &mut O,
    params: &ModelParams,
    cfg: &ScanConfig,
    seed: u64,
) -> Result<DetectorVerdict> {
    let resolved = cfg.resolve(params)?;
    let pattern = clique_pattern_plan(oracle.n(), cfg.m, seed)?;
    if (oracle.remaining() as u128) < pattern.plan.len() as u128 {
        return Err(Error::BudgetExhausted { budget: oracle.budget() });
    }
    let answers = pattern.plan.execute(oracle)?;

    let mut slot = vec![usize::MAX; oracle.n() as usize];
    for (s, &v) in pattern.sample.iter().enumerate() {
        slot[v as usize] = s;
    }
    let mut weights = WeightMatrix::zeros(pattern.sample.len());
    for (pair, answer) in pattern.plan.pairs.iter().zip(answers) {
        weights.set(slot[pair.lo as usize], slot[pair.hi as usize], answer);
    }
    let stat = scan_statistic(&weights, resolved.n0, resolved.exact, cfg.restarts, seed);
    Ok(DetectorVerdict::from_threshold(stat.value, resolved.tau, "scan", stat.approximate))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Hypothesis, Instance};
    use crate::oracle::BudgetedOracle;
    use rand::{Rng, SeedableRng};

    /// Independent reference: iterate all bitmasks with `size` bits set.
    fn brute_force(weights: &WeightMatrix, size: usize) -> f64 {
        let m = weights.size();
        let mut best = f64::NEG_INFINITY;
        for mask in 0u32..(1 << m) {
            if mask.count_ones() as usize != size {
                continue;
            }
            let mut s = 0.0;
            for a in 0..m {
                for b in (a + 1)..m {
                    if mask & (1 << a) != 0 && mask & (1 << b) != 0 {
                        s += weights.get(a, b);
                    }
                }
            }
            best = best.max(s);
        }
        best
    }

    fn random_weights(m: usize, rng: &mut impl Rng, binary: bool) -> WeightMatrix {
        let mut w = WeightMatrix::zeros(m);
        for a in 0..m {
            for b in (a + 1)..m {
                let v = if binary { f64::from(rng.random_bool(0.5) as u8) } else { rng.random::<f64>() - 0.3 };
                w.set(a, b, v);
            }
        }
        w
    }

    #[test]
    fn exact_matches_brute_force() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        for trial in 0..100 {
            let m = rng.random_range(2..=12usize);
            let size = rng.random_range(2..=m);
            let binary = trial % 2 == 0;
            let w = random_weights(m, &mut rng, binary);
            let (fast, slow) = (exact_max(&w, size), brute_force(&w, size));
            if binary {
                assert_eq!(fast, slow);
            } else {
                assert!((fast - slow).abs() <= 1e-12, "{fast} vs {slow}");
            }
        }
    }

    #[test]
    fn local_search_never_exceeds_exact() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        for trial in 0..100u64 {
            let m = rng.random_range(3..=12usize);
            let size = rng.random_range(2..m);
            let w = random_weights(m, &mut rng, trial % 2 == 0);
            let exact = exact_max(&w, size);
            let local = local_search_max(&w, size, 5, trial);
            assert!(local <= exact + 1e-12, "local {local} > exact {exact}");
        }
    }

    #[test]
    fn adding_an_edge_never_lowers_statistic() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let m = rng.random_range(4..=12usize);
            let size = rng.random_range(2..=m);
            let mut w = random_weights(m, &mut rng, true);
            let before = exact_max(&w, size);
            let a = rng.random_range(0..m);
            let b = (a + 1 + rng.random_range(0..m - 1)) % m;
            w.set(a, b, 1.0);
            assert!(exact_max(&w, size) >= before);
        }
    }

    fn params(n: u32, k: u32, p: f64, q: f64) -> ModelParams {
        ModelParams::bernoulli(n, k, p, q).unwrap()
    }

    #[test]
    fn resolve_defaults() {
        let r = ScanConfig::new(20, 0.2).resolve(&params(100, 50, 1.0, 0.5)).unwrap();
        assert_eq!(r.n0, 8);
        assert!((r.tau - 27.5).abs() < 1e-12);
        assert!(r.exact);
        let r = ScanConfig::new(20, 0.2).resolve(&params(100, 50, 0.8, 0.2)).unwrap();
        assert!((r.gamma - 0.74).abs() < 1e-12);
        let mut cfg = ScanConfig::new(20, 0.2);
        cfg.threshold_mode = ThresholdMode::BernsteinMidpoint;
        let r = cfg.resolve(&params(100, 50, 0.8, 0.2)).unwrap();
        assert!((r.tau - 28.0 * 0.5).abs() < 1e-12);
        assert!(matches!(
            ScanConfig::new(4, 0.2).resolve(&params(100, 50, 1.0, 0.5)),
            Err(Error::InfeasibleConfig(_))
        ));
    }

    #[test]
    fn full_clique_sample_hits_binom2() {
        // k = n: every sampled vertex is planted.
        let p = params(30, 30, 1.0, 0.5);
        let inst = Instance::sample(p, Hypothesis::H1, 4).unwrap();
        let mut oracle = BudgetedOracle::new(inst, 1000);
        let mut cfg = ScanConfig::new(12, 0.2);
        let verdict = scan_test(&mut oracle, &p, &cfg, 4).unwrap();
        // N0 = floor(0.8·12) = 9
        assert_eq!(verdict.statistic, 36.0);
        assert_eq!(verdict.decision, 1);
        cfg.gamma = Some(1.0);
        let inst = Instance::sample(p, Hypothesis::H1, 4).unwrap();
        let verdict = scan_test(&mut BudgetedOracle::new(inst, 1000), &p, &cfg, 4).unwrap();
        assert_eq!(verdict.decision, 0);
    }

    #[test]
    fn empty_graph_decides_null() {
        let p = params(100, 50, 0.0, 0.0);
        let inst = Instance::sample(p, Hypothesis::H1, 9).unwrap();
        let mut oracle = BudgetedOracle::new(inst, 1000);
        let cfg = ScanConfig { gamma: Some(0.5), ..ScanConfig::new(20, 0.2) };
        let v = scan_test(&mut oracle, &p, &cfg, 1).unwrap();
        assert_eq!(v.statistic, 0.0);
        assert_eq!(v.decision, 0);
    }

    #[test]
    fn insufficient_budget_is_an_error() {
        let p = params(100, 50, 1.0, 0.5);
        let inst = Instance::sample(p, Hypothesis::H0, 9).unwrap();
        let mut oracle = BudgetedOracle::new(inst, 100);
        assert!(matches!(
            scan_test(&mut oracle, &p, &ScanConfig::new(20, 0.2), 1),
            Err(Error::BudgetExhausted { .. })
        ));
    }

    #[test]
    fn local_search_flagged_approximate() {
        let p = params(100, 50, 1.0, 0.5);
        let inst = Instance::sample(p, Hypothesis::H1, 2).unwrap();
        let mut oracle = BudgetedOracle::new(inst, 1000);
        let cfg = ScanConfig { search_mode: SearchMode::LocalSearch, ..ScanConfig::new(20, 0.2) };
        assert!(scan_test(&mut oracle, &p, &cfg, 1).unwrap().approximate);
    }
}
