//! Query mechanisms: which pairs get asked, and in what order.
//!
//! Non-adaptive plans are plain pair lists, fully materialized from a seed
//! before any oracle exists. Adaptive rules implement [`AdaptiveRule`] and see
//! each answer before choosing the next pair.

use std::io::{self, Write};

use rand::seq::index;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::divergences::binom2;
use crate::error::{Error, Result};
use crate::model::Observation;
use crate::oracle::{EdgeOracle, Pair, PairMap};
use crate::seed::{self, tag};

/// A query set fixed upfront. Pairs are distinct as unordered pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonAdaptivePlan {
    pub pairs: Vec<Pair>,
    /// Budget as the mechanism accounts for it; may exceed `pairs.len()`
    /// when the pattern overlaps itself.
    pub nominal_budget: u64,
}

impl NonAdaptivePlan {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Issue every pair in order; answers are returned aligned with `pairs`.
    pub fn execute<O: EdgeOracle + ?Sized>(&self, oracle: &mut O) -> Result<Vec<Observation>> {
        self.pairs.iter().map(|p| oracle.query(p.lo, p.hi)).collect()
    }

    /// CSV rows in the oracle-log layout with an empty answer column.
    pub fn write_csv<W: Write>(&self, trial_id: u64, out: &mut W) -> io::Result<()> {
        for (step, p) in self.pairs.iter().enumerate() {
            writeln!(out, "{trial_id},{step},{},{},,{}", p.lo, p.hi, step + 1)?;
        }
        Ok(())
    }
}

/// Pair with rank `r` in the row-major enumeration of `{(i, j) : i < j < n}`.
fn unrank_pair(n: u64, r: u64) -> Pair {
    // Row i starts at offset i·n − i(i+1)/2.
    let row_start = |i: u64| i * n - i * (i + 1) / 2;
    let nf = n as f64;
    let disc = (2.0 * nf - 1.0).powi(2) - 8.0 * r as f64;
    let mut i = (((2.0 * nf - 1.0) - disc.max(0.0).sqrt()) / 2.0).floor().max(0.0) as u64;
    while i > 0 && row_start(i) > r {
        i -= 1;
    }
    while i + 1 < n && row_start(i + 1) <= r {
        i += 1;
    }
    let j = i + 1 + (r - row_start(i));
    Pair::new(i as u32, j as u32)
}

/// `budget` distinct unordered pairs drawn uniformly without replacement.
pub fn uniform_plan(n: u32, budget: u64, seed: u64) -> Result<NonAdaptivePlan> {
    let total = binom2(n as u64);
    if budget > total {
        return Err(Error::Parameter(format!(
            "budget {budget} exceeds the {total} available pairs on {n} vertices"
        )));
    }
    let mut rng = seed::rng(seed, tag::STRATEGY, 1);
    let pairs = index::sample(&mut rng, total as usize, budget as usize)
        .into_iter()
        .map(|r| unrank_pair(n as u64, r as u64))
        .collect();
    Ok(NonAdaptivePlan { pairs, nominal_budget: budget })
}

/// All pairs within a uniformly drawn vertex sample.
#[derive(Debug, Clone, PartialEq)]
pub struct CliquePattern {
    pub sample: Vec<u32>,
    pub plan: NonAdaptivePlan,
}

pub fn clique_pattern_plan(n: u32, m: u32, seed: u64) -> Result<CliquePattern> {
    if m > n {
        return Err(Error::Parameter(format!("sample size M = {m} exceeds n = {n}")));
    }
    let mut rng = seed::rng(seed, tag::STRATEGY, 2);
    let mut sample: Vec<u32> = index::sample(&mut rng, n as usize, m as usize)
        .into_iter()
        .map(|v| v as u32)
        .collect();
    sample.sort_unstable();
    let mut pairs = Vec::with_capacity(binom2(m as u64) as usize);
    for (a, &i) in sample.iter().enumerate() {
        for &j in &sample[a + 1..] {
            pairs.push(Pair::new(i, j));
        }
    }
    Ok(CliquePattern {
        sample,
        plan: NonAdaptivePlan { nominal_budget: pairs.len() as u64, pairs },
    })
}

/// Star pattern from a set of probe vertices into a panel containing them.
#[derive(Debug, Clone, PartialEq)]
pub struct BipartitePattern {
    pub panel: Vec<u32>,
    pub probes: Vec<u32>,
    pub plan: NonAdaptivePlan,
}

/// Unique pairs of the probe-by-panel pattern: `M·n′ − M − C(M, 2)`.
pub fn bipartite_unique_pairs(n_prime: u64, m: u64) -> u64 {
    m * n_prime - m - binom2(m)
}

pub fn bipartite_pattern_plan(n: u32, n_prime: u32, m: u32, seed: u64) -> Result<BipartitePattern> {
    if !(m <= n_prime && n_prime <= n) {
        return Err(Error::Parameter(format!(
            "need M <= n' <= n, got M = {m}, n' = {n_prime}, n = {n}"
        )));
    }
    let mut rng = seed::rng(seed, tag::STRATEGY, 3);
    let panel: Vec<u32> = index::sample(&mut rng, n as usize, n_prime as usize)
        .into_iter()
        .map(|v| v as u32)
        .collect();
    let probes: Vec<u32> = index::sample(&mut rng, n_prime as usize, m as usize)
        .into_iter()
        .map(|slot| panel[slot])
        .collect();

    // Position of each probe in `probes`, so probe–probe pairs are emitted once.
    let mut probe_rank = PairMap::<usize>::default();
    for (r, &v) in probes.iter().enumerate() {
        probe_rank.insert(v as u64, r);
    }
    let mut pairs =
        Vec::with_capacity(bipartite_unique_pairs(n_prime as u64, m as u64) as usize);
    for (r, &i) in probes.iter().enumerate() {
        for &j in &panel {
            if j == i {
                continue;
            }
            if let Some(&rj) = probe_rank.get(&(j as u64)) {
                if rj < r {
                    continue;
                }
            }
            pairs.push(Pair::new(i, j));
        }
    }
    Ok(BipartitePattern {
        panel,
        probes,
        plan: NonAdaptivePlan {
            pairs,
            nominal_budget: m as u64 * n_prime as u64,
        },
    })
}

/// A mechanism that picks each pair after seeing all previous answers.
pub trait AdaptiveRule {
    /// Next pair to query, or `None` once the rule is done.
    fn next_pair(&mut self) -> Option<Pair>;

    fn observe(&mut self, pair: Pair, answer: Observation);

    /// Drive the rule against an oracle until it stops.
    fn run<O: EdgeOracle + ?Sized>(&mut self, oracle: &mut O) -> Result<Vec<(Pair, Observation)>>
    where
        Self: Sized,
    {
        let mut history = Vec::new();
        while let Some(pair) = self.next_pair() {
            let answer = oracle.query(pair.lo, pair.hi)?;
            self.observe(pair, answer);
            history.push((pair, answer));
        }
        Ok(history)
    }
}

/// Greedy hub-chasing rule.
///
/// Vertex score is `positives − expected · degree`, where `degree` counts
/// queried incident pairs and `expected` is the noise mean. Each step first
/// tries an unqueried pair among the `fanout` best positive-score vertices
/// (ties by lower index), then a random unqueried partner of the best one,
/// and otherwise a uniform unqueried pair.
#[derive(Debug, Clone)]
pub struct GreedyAdaptive {
    n: u32,
    budget: u64,
    fanout: usize,
    expected: f64,
    rng: ChaCha8Rng,
    positives: Vec<f64>,
    degree: Vec<u32>,
    queried: PairMap<()>,
    issued: u64,
}

const PARTNER_TRIES: usize = 64;

impl GreedyAdaptive {
    pub fn new(n: u32, budget: u64, fanout: usize, expected: f64, seed: u64) -> Result<Self> {
        if budget < fanout as u64 {
            return Err(Error::Parameter(format!(
                "budget {budget} smaller than fanout {fanout}"
            )));
        }
        if n < 2 {
            return Err(Error::Parameter("need at least two vertices".into()));
        }
        Ok(Self {
            n,
            budget: budget.min(binom2(n as u64)),
            fanout,
            expected,
            rng: seed::rng(seed, tag::STRATEGY, 4),
            positives: vec![0.0; n as usize],
            degree: vec![0; n as usize],
            queried: PairMap::default(),
            issued: 0,
        })
    }

    fn score(&self, v: usize) -> f64 {
        self.positives[v] - self.expected * self.degree[v] as f64
    }

    fn leaders(&self) -> Vec<u32> {
        let mut ranked: Vec<(f64, u32)> = (0..self.n as usize)
            .filter_map(|v| {
                let s = self.score(v);
                (s > 0.0).then_some((s, v as u32))
            })
            .collect();
        ranked.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        ranked.truncate(self.fanout);
        ranked.into_iter().map(|(_, v)| v).collect()
    }

    fn is_queried(&self, i: u32, j: u32) -> bool {
        self.queried.contains_key(&Pair::new(i, j).key())
    }

    fn uniform_unqueried(&mut self) -> Option<Pair> {
        loop {
            let i = self.rng.random_range(0..self.n);
            let j = self.rng.random_range(0..self.n);
            if i != j && !self.is_queried(i, j) {
                return Some(Pair::new(i, j));
            }
        }
    }
}

impl AdaptiveRule for GreedyAdaptive {
    fn next_pair(&mut self) -> Option<Pair> {
        if self.issued >= self.budget {
            return None;
        }
        let leaders = self.leaders();
        let mut choice = None;
        'pairs: for (a, &i) in leaders.iter().enumerate() {
            for &j in &leaders[a + 1..] {
                if !self.is_queried(i, j) {
                    choice = Some(Pair::new(i, j));
                    break 'pairs;
                }
            }
        }
        if choice.is_none() {
            if let Some(&hub) = leaders.first() {
                for _ in 0..PARTNER_TRIES {
                    let w = self.rng.random_range(0..self.n);
                    if w != hub && !self.is_queried(hub, w) {
                        choice = Some(Pair::new(hub, w));
                        break;
                    }
                }
            }
        }
        let pair = match choice {
            Some(p) => p,
            None => self.uniform_unqueried()?,
        };
        self.queried.insert(pair.key(), ());
        self.issued += 1;
        Some(pair)
    }

    fn observe(&mut self, pair: Pair, answer: Observation) {
        for v in [pair.lo, pair.hi] {
            self.positives[v as usize] += answer;
            self.degree[v as usize] += 1;
        }
    }
}

/// Either kind of mechanism, for configuration plumbing.
#[derive(Debug, Clone)]
pub enum QueryPlan {
    NonAdaptive(NonAdaptivePlan),
    Adaptive(Box<GreedyAdaptive>),
}

impl QueryPlan {
    /// Issue all queries and return the trajectory.
    pub fn run<O: EdgeOracle + ?Sized>(self, oracle: &mut O) -> Result<Vec<(Pair, Observation)>> {
        match self {
            QueryPlan::NonAdaptive(plan) => {
                let answers = plan.execute(oracle)?;
                Ok(plan.pairs.into_iter().zip(answers).collect())
            }
            QueryPlan::Adaptive(mut rule) => rule.run(oracle),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Hypothesis, Instance, ModelParams};
    use crate::oracle::BudgetedOracle;
    use std::collections::HashSet;

    fn distinct(plan: &NonAdaptivePlan) -> bool {
        let set: HashSet<Pair> = plan.pairs.iter().copied().collect();
        set.len() == plan.pairs.len()
    }

    #[test]
    fn unrank_enumerates_all_pairs() {
        for n in 2..40u64 {
            let mut expect = Vec::new();
            for i in 0..n as u32 {
                for j in (i + 1)..n as u32 {
                    expect.push(Pair::new(i, j));
                }
            }
            let got: Vec<Pair> = (0..binom2(n)).map(|r| unrank_pair(n, r)).collect();
            assert_eq!(got, expect, "n = {n}");
        }
        // Large n exercises the floating-point correction.
        let n = 100_000u64;
        let last = unrank_pair(n, binom2(n) - 1);
        assert_eq!(last, Pair::new(99_998, 99_999));
    }

    #[test]
    fn uniform_plan_exhaustive_and_deterministic() {
        let plan = uniform_plan(3, 3, 1).unwrap();
        let mut pairs = plan.pairs.clone();
        pairs.sort();
        assert_eq!(pairs, vec![Pair::new(0, 1), Pair::new(0, 2), Pair::new(1, 2)]);
        assert_eq!(uniform_plan(100, 1000, 9).unwrap(), uniform_plan(100, 1000, 9).unwrap());
        assert!(distinct(&uniform_plan(100, 1000, 9).unwrap()));
        assert!(matches!(uniform_plan(3, 4, 0), Err(Error::Parameter(_))));
    }

    #[test]
    fn uniform_plan_inclusion_frequency() {
        let seeds = 10_000u64;
        let mut counts = vec![0u32; binom2(100) as usize];
        for s in 0..seeds {
            for p in uniform_plan(100, 1000, s).unwrap().pairs {
                let rank = p.lo as u64 * 100 - p.lo as u64 * (p.lo as u64 + 1) / 2 + (p.hi - p.lo - 1) as u64;
                counts[rank as usize] += 1;
            }
        }
        // Per-pair standard deviation is about 0.004.
        let target = 1000.0 / 4950.0;
        let freqs: Vec<f64> = counts.iter().map(|&c| c as f64 / seeds as f64).collect();
        assert!(freqs.iter().all(|f| (f - target).abs() <= 0.02));
        let within = freqs.iter().filter(|f| (**f - target).abs() <= 0.01).count();
        assert!(within as f64 >= 0.97 * freqs.len() as f64, "{within} pairs within 0.01");
    }

    #[test]
    fn clique_pattern_sizes() {
        assert_eq!(clique_pattern_plan(10, 2, 0).unwrap().plan.len(), 1);
        let pat = clique_pattern_plan(500, 47, 3).unwrap();
        assert_eq!(pat.plan.len(), 1081);
        assert_eq!(pat.plan.nominal_budget, 1081);
        let touched: HashSet<u32> = pat.plan.pairs.iter().flat_map(|p| [p.lo, p.hi]).collect();
        assert_eq!(touched.len(), 47);
        assert!(distinct(&pat.plan));
        assert!(matches!(clique_pattern_plan(10, 11, 0), Err(Error::Parameter(_))));
    }

    #[test]
    fn bipartite_pattern_sizes() {
        let pat = bipartite_pattern_plan(10, 3, 3, 1).unwrap();
        assert_eq!(pat.plan.len(), 3);
        let pat = bipartite_pattern_plan(50, 10, 1, 1).unwrap();
        assert_eq!(pat.plan.len(), 9);
        let pat = bipartite_pattern_plan(10_000, 2000, 400, 5).unwrap();
        assert_eq!(pat.plan.len() as u64, 719_800);
        assert_eq!(bipartite_unique_pairs(2000, 400), 719_800);
        assert_eq!(bipartite_unique_pairs(2000, 400), binom2(2000) - binom2(1600));
        assert_eq!(pat.plan.nominal_budget, 800_000);
        assert!(distinct(&pat.plan));
        let panel: HashSet<u32> = pat.panel.iter().copied().collect();
        assert!(pat.probes.iter().all(|v| panel.contains(v)));
        assert!(matches!(bipartite_pattern_plan(10, 5, 6, 0), Err(Error::Parameter(_))));
        assert!(matches!(bipartite_pattern_plan(10, 11, 6, 0), Err(Error::Parameter(_))));
    }

    fn run_greedy(params: ModelParams, h: Hypothesis, budget: u64, seed: u64) -> BudgetedOracle {
        let inst = Instance::sample(params, h, seed).unwrap();
        let mut oracle = BudgetedOracle::new(inst, budget);
        let mut rule = GreedyAdaptive::new(params.n, budget, 10, params.noise_mean(), seed).unwrap();
        rule.run(&mut oracle).unwrap();
        oracle
    }

    #[test]
    fn greedy_exhausts_budget_exactly_and_replays() {
        let params = ModelParams::bernoulli(60, 10, 1.0, 0.5).unwrap();
        let a = run_greedy(params, Hypothesis::H1, 300, 4);
        let b = run_greedy(params, Hypothesis::H1, 300, 4);
        assert_eq!(a.unique_pairs(), 300);
        assert_eq!(a.log(), b.log());
    }

    #[test]
    fn greedy_with_zero_answers_is_uniform_exploration() {
        // q = 0 and no plant: every answer is 0, no score ever turns positive.
        let params = ModelParams::bernoulli(40, 2, 0.0, 0.0).unwrap();
        let a = run_greedy(params, Hypothesis::H0, 200, 8);
        let b = run_greedy(params, Hypothesis::H0, 200, 8);
        assert_eq!(a.log(), b.log());
        let c = run_greedy(params, Hypothesis::H0, 200, 9);
        assert_ne!(a.log(), c.log());
        assert!(a.log().iter().all(|e| e.answer == 0.0));
    }

    #[test]
    fn greedy_concentrates_on_clique() {
        let params = ModelParams::bernoulli(200, 20, 1.0, 0.5).unwrap();
        let budget = 2000u64;
        let trials = 1000u64;
        let (mut greedy, mut uniform) = (0u64, 0u64);
        for t in 0..trials {
            greedy += run_greedy(params, Hypothesis::H1, budget, t).planted_query_count().unwrap();
            let inst = Instance::sample(params, Hypothesis::H1, t).unwrap();
            let mut oracle = BudgetedOracle::new(inst, budget);
            uniform_plan(200, budget, t).unwrap().execute(&mut oracle).unwrap();
            uniform += oracle.planted_query_count().unwrap();
        }
        assert!(greedy > uniform, "greedy {greedy} vs uniform {uniform}");
    }

    #[test]
    fn plan_csv_layout() {
        let plan = NonAdaptivePlan { pairs: vec![Pair::new(3, 1)], nominal_budget: 1 };
        let mut buf = Vec::new();
        plan.write_csv(2, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "2,0,1,3,,1\n");
    }
}
