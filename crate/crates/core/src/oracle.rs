//! Budgeted edge-query access to an [`Instance`].
//!
//! Detectors and strategies only ever see the [`EdgeOracle`] trait. The
//! concrete [`BudgetedOracle`] additionally counts planted queries, but that
//! counter is an inherent method and is unreachable through the trait.

use std::collections::HashMap;
use std::hash::{BuildHasherDefault, Hasher};
use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Hypothesis, Instance, Observation};
use crate::seed::mix64;

/// Unordered vertex pair, stored with `lo < hi`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Pair {
    pub lo: u32,
    pub hi: u32,
}

impl Pair {
    /// Normalizes the order. Panics in debug builds on a self-loop.
    #[inline]
    pub fn new(i: u32, j: u32) -> Self {
        debug_assert_ne!(i, j, "self-loop pair");
        if i < j {
            Pair { lo: i, hi: j }
        } else {
            Pair { lo: j, hi: i }
        }
    }

    pub fn try_new(i: u32, j: u32) -> Result<Self> {
        if i == j {
            Err(Error::SelfLoop(i))
        } else {
            Ok(Self::new(i, j))
        }
    }

    #[inline]
    pub fn key(self) -> u64 {
        ((self.lo as u64) << 32) | self.hi as u64
    }
}

/// Hasher for `u64` pair keys.
#[derive(Default, Clone, Copy)]
pub struct PairKeyHasher(u64);

impl Hasher for PairKeyHasher {
    fn finish(&self) -> u64 {
        self.0
    }

    fn write(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.0 = mix64(self.0 ^ b as u64);
        }
    }

    fn write_u64(&mut self, v: u64) {
        self.0 = mix64(self.0 ^ v);
    }
}

pub type PairMap<V> = HashMap<u64, V, BuildHasherDefault<PairKeyHasher>>;

/// What detectors and strategies are allowed to see.
pub trait EdgeOracle {
    /// Number of vertices.
    fn n(&self) -> u32;

    /// Observation on `{i, j}`; consumes budget according to the oracle's rules.
    fn query(&mut self, i: u32, j: u32) -> Result<Observation>;

    fn budget(&self) -> u64;

    fn used(&self) -> u64;

    fn remaining(&self) -> u64 {
        self.budget().saturating_sub(self.used())
    }
}

/// How repeated queries of one pair are charged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BudgetMode {
    /// Budget counts distinct unordered pairs; repeats are free.
    #[default]
    UniquePairs,
    /// Every call is charged, repeated or not.
    EveryCall,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub pair: Pair,
    pub answer: Observation,
    pub cumulative_unique: u64,
}

pub struct BudgetedOracle {
    instance: Instance,
    budget: u64,
    mode: BudgetMode,
    charged: u64,
    answers: PairMap<Observation>,
    log: Vec<LogEntry>,
    logging: bool,
    planted_hits: u64,
}

impl BudgetedOracle {
    pub fn new(instance: Instance, budget: u64) -> Self {
        Self::with_mode(instance, budget, BudgetMode::UniquePairs)
    }

    pub fn with_mode(instance: Instance, budget: u64, mode: BudgetMode) -> Self {
        Self {
            instance,
            budget,
            mode,
            charged: 0,
            answers: PairMap::default(),
            log: Vec::new(),
            logging: true,
            planted_hits: 0,
        }
    }

    /// Disable the per-call log; budget accounting is unaffected.
    pub fn without_log(mut self) -> Self {
        self.logging = false;
        self
    }

    pub fn instance(&self) -> &Instance {
        &self.instance
    }

    pub fn log(&self) -> &[LogEntry] {
        &self.log
    }

    pub fn unique_pairs(&self) -> u64 {
        self.answers.len() as u64
    }

    /// Number of distinct queried pairs with both endpoints planted.
    pub fn planted_query_count(&self) -> Result<u64> {
        match self.instance.hypothesis() {
            Hypothesis::H1 => Ok(self.planted_hits),
            Hypothesis::H0 => Err(Error::NotApplicable(
                "planted query count is undefined under H0".into(),
            )),
        }
    }

    /// Writes the log as CSV rows `trial_id,step,i,j,answer,cumulative_unique`
    /// (no header; see [`LOG_CSV_HEADER`]).
    pub fn write_log_csv<W: Write>(&self, trial_id: u64, out: &mut W) -> io::Result<()> {
        for (step, e) in self.log.iter().enumerate() {
            writeln!(
                out,
                "{trial_id},{step},{},{},{},{}",
                e.pair.lo, e.pair.hi, e.answer, e.cumulative_unique
            )?;
        }
        Ok(())
    }
}

pub const LOG_CSV_HEADER: &str = "trial_id,step,i,j,answer,cumulative_unique";

impl EdgeOracle for BudgetedOracle {
    fn n(&self) -> u32 {
        self.instance.n()
    }

    fn query(&mut self, i: u32, j: u32) -> Result<Observation> {
        self.instance.check_pair(i, j)?;
        let pair = Pair::new(i, j);
        let key = pair.key();
        let cached = self.answers.get(&key).copied();
        let charge = !matches!((cached, self.mode), (Some(_), BudgetMode::UniquePairs));
        if charge {
            if self.charged >= self.budget {
                return Err(Error::BudgetExhausted { budget: self.budget });
            }
            self.charged += 1;
        }
        let answer = match cached {
            Some(a) => a,
            None => {
                let a = self.instance.edge_value_unchecked(pair.lo, pair.hi);
                self.answers.insert(key, a);
                if self.instance.is_planted_pair(pair.lo, pair.hi) {
                    self.planted_hits += 1;
                }
                a
            }
        };
        if self.logging {
            self.log.push(LogEntry {
                pair,
                answer,
                cumulative_unique: self.answers.len() as u64,
            });
        }
        Ok(answer)
    }

    fn budget(&self) -> u64 {
        self.budget
    }

    fn used(&self) -> u64 {
        self.charged
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelParams;
    use rand::seq::SliceRandom;
    use rand::{Rng, SeedableRng};

    fn oracle(n: u32, k: u32, p: f64, q: f64, h: Hypothesis, budget: u64) -> BudgetedOracle {
        let params = ModelParams::bernoulli(n, k, p, q).unwrap();
        BudgetedOracle::new(Instance::sample(params, h, 42).unwrap(), budget)
    }

    #[test]
    fn repeated_pair_is_free() {
        let mut o = oracle(20, 5, 0.8, 0.3, Hypothesis::H1, 10);
        let a = o.query(2, 5).unwrap();
        let b = o.query(5, 2).unwrap();
        assert_eq!(a, b);
        assert_eq!(o.used(), 1);
        assert_eq!(o.unique_pairs(), 1);
        assert_eq!(o.log().len(), 2);
    }

    #[test]
    fn strict_mode_charges_repeats() {
        let params = ModelParams::bernoulli(20, 5, 0.8, 0.3).unwrap();
        let inst = Instance::sample(params, Hypothesis::H0, 1).unwrap();
        let mut o = BudgetedOracle::with_mode(inst, 2, BudgetMode::EveryCall);
        o.query(0, 1).unwrap();
        o.query(1, 0).unwrap();
        assert_eq!(o.query(0, 1), Err(Error::BudgetExhausted { budget: 2 }));
    }

    #[test]
    fn budget_exhaustion() {
        let mut o = oracle(20, 5, 0.8, 0.3, Hypothesis::H0, 1);
        o.query(0, 1).unwrap();
        assert_eq!(o.query(0, 2), Err(Error::BudgetExhausted { budget: 1 }));
        // the cached pair is still answerable
        assert!(o.query(1, 0).is_ok());
        assert_eq!(o.query(3, 3), Err(Error::SelfLoop(3)));
    }

    #[test]
    fn planted_hits_on_clique() {
        let mut o = oracle(50, 10, 1.0, 0.5, Hypothesis::H1, 1000);
        assert_eq!(o.planted_query_count().unwrap(), 0);
        let set = o.instance().planted_set().unwrap().to_vec();
        assert_eq!(o.query(set[0], set[1]).unwrap(), 1.0);
        assert_eq!(o.planted_query_count().unwrap(), 1);
        for (a, &i) in set.iter().enumerate() {
            for &j in &set[a + 1..] {
                o.query(i, j).unwrap();
            }
        }
        assert_eq!(o.planted_query_count().unwrap(), 45);
    }

    #[test]
    fn planted_count_not_applicable_under_null() {
        let o = oracle(50, 10, 1.0, 0.5, Hypothesis::H0, 10);
        assert!(matches!(o.planted_query_count(), Err(Error::NotApplicable(_))));
    }

    #[test]
    fn answers_invariant_under_query_order() {
        let n = 40u32;
        let mut pairs: Vec<(u32, u32)> = (0..n).flat_map(|i| ((i + 1)..n).map(move |j| (i, j))).collect();
        let reference: Vec<f64> = {
            let mut o = oracle(n, 8, 0.7, 0.4, Hypothesis::H1, u64::MAX);
            pairs.iter().map(|&(i, j)| o.query(i, j).unwrap()).collect()
        };
        let lookup: std::collections::HashMap<(u32, u32), f64> =
            pairs.iter().copied().zip(reference.iter().copied()).collect();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        for _ in 0..20 {
            pairs.shuffle(&mut rng);
            let mut o = oracle(n, 8, 0.7, 0.4, Hypothesis::H1, u64::MAX);
            for &(i, j) in &pairs {
                let (a, b) = if rng.random_bool(0.5) { (i, j) } else { (j, i) };
                assert_eq!(o.query(a, b).unwrap(), lookup[&(i, j)]);
            }
        }
    }

    #[test]
    fn log_csv_rows() {
        let mut o = oracle(10, 3, 1.0, 0.0, Hypothesis::H0, 5);
        o.query(1, 0).unwrap();
        o.query(2, 3).unwrap();
        let mut buf = Vec::new();
        o.write_log_csv(7, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "7,0,0,1,0,1\n7,1,2,3,0,2\n");
    }

    #[test]
    fn unlogged_oracle_still_charges() {
        let mut o = oracle(10, 3, 1.0, 0.0, Hypothesis::H0, 5).without_log();
        o.query(1, 0).unwrap();
        o.query(0, 1).unwrap();
        assert!(o.log().is_empty());
        assert_eq!(o.used(), 1);
    }

}
