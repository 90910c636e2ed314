//! Monte Carlo risk estimation over paired null/planted trials, and
//! resumable parameter sweeps.

use std::collections::BTreeSet;
use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::detectors::{degree_test, scan_test, DegreeConfig, DetectorVerdict, ScanConfig};
use crate::error::{Error, Result};
use crate::model::{Hypothesis, Instance, ModelParams};
use crate::oracle::{BudgetMode, BudgetedOracle, EdgeOracle};
use crate::seed::{self, tag};
use crate::strategies::{uniform_plan, AdaptiveRule, GreedyAdaptive};

/// Minimum trial count accepted by [`estimate_risk`].
pub const MIN_RISK_TRIALS: u64 = 30;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DetectorSpec {
    Scan(ScanConfig),
    Degree(DegreeConfig),
    /// Always decides 0.
    AlwaysZero,
    /// Decides by an independent fair coin.
    FairCoin,
}

impl DetectorSpec {
    pub fn name(&self) -> &'static str {
        match self {
            DetectorSpec::Scan(_) => "scan",
            DetectorSpec::Degree(_) => "degree",
            DetectorSpec::AlwaysZero => "always_zero",
            DetectorSpec::FairCoin => "fair_coin",
        }
    }

    /// Distinct pairs the detector's own pattern queries.
    pub fn pattern_budget(&self) -> u64 {
        match self {
            DetectorSpec::Scan(c) => c.pattern_budget(),
            DetectorSpec::Degree(c) => c.pattern_budget(),
            DetectorSpec::AlwaysZero | DetectorSpec::FairCoin => 0,
        }
    }
}

/// Queries issued before a detector that has no pattern of its own.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StrategySpec {
    /// The detector's own pattern; no extra queries.
    #[default]
    Pattern,
    /// `Q` distinct pairs uniformly at random.
    Uniform,
    /// Greedy adaptive rule with the given fanout.
    Greedy { fanout: usize },
}

impl StrategySpec {
    pub fn name(&self) -> &'static str {
        match self {
            StrategySpec::Pattern => "pattern",
            StrategySpec::Uniform => "uniform",
            StrategySpec::Greedy { .. } => "greedy",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrialConfig {
    pub params: ModelParams,
    pub detector: DetectorSpec,
    #[serde(default)]
    pub strategy: StrategySpec,
    /// Query budget `Q`.
    pub budget: u64,
    pub trials: u64,
    pub master_seed: u64,
    #[serde(default)]
    pub budget_mode: BudgetMode,
}

impl TrialConfig {
    pub fn new(params: ModelParams, detector: DetectorSpec, budget: u64, trials: u64, master_seed: u64) -> Self {
        Self {
            params,
            detector,
            strategy: StrategySpec::Pattern,
            budget,
            trials,
            master_seed,
            budget_mode: BudgetMode::UniquePairs,
        }
    }

    pub fn with_strategy(mut self, strategy: StrategySpec) -> Self {
        self.strategy = strategy;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.trials < 1 {
            return Err(Error::Parameter("trials must be at least 1".into()));
        }
        match (&self.detector, self.strategy) {
            (DetectorSpec::Scan(c), StrategySpec::Pattern) => {
                c.resolve(&self.params)?;
            }
            (DetectorSpec::Degree(c), StrategySpec::Pattern) => {
                c.resolve(&self.params)?;
            }
            (DetectorSpec::Scan(_) | DetectorSpec::Degree(_), s) => {
                return Err(Error::InfeasibleConfig(format!(
                    "{} detector queries its own pattern; strategy {} is not allowed",
                    self.detector.name(),
                    s.name()
                )));
            }
            (_, StrategySpec::Greedy { fanout }) if fanout as u64 > self.budget => {
                return Err(Error::InfeasibleConfig(format!(
                    "greedy fanout {fanout} exceeds budget {}",
                    self.budget
                )));
            }
            _ => {}
        }
        let implied = self.detector.pattern_budget();
        if implied > self.budget {
            return Err(Error::InfeasibleConfig(format!(
                "{} pattern needs {implied} queries but the budget is {}",
                self.detector.name(),
                self.budget
            )));
        }
        Ok(())
    }

    /// Hex digest of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest[..16].iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Seed of the instance for `(hypothesis, index)`.
pub fn instance_seed(master_seed: u64, hypothesis: Hypothesis, index: u64) -> u64 {
    seed::derive(master_seed, hypothesis.trial_tag(), index)
}

/// Seed shared by the strategy and detector in both trials of a pair.
pub fn strategy_seed(master_seed: u64, index: u64) -> u64 {
    seed::derive(master_seed, tag::STRATEGY, index)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub hypothesis: Hypothesis,
    pub index: u64,
    pub verdict: DetectorVerdict,
    /// Distinct planted pairs queried; `None` under H0.
    pub planted_hits: Option<u64>,
    pub queries_used: u64,
}

pub fn run_trial(cfg: &TrialConfig, hypothesis: Hypothesis, index: u64) -> Result<TrialOutcome> {
    cfg.validate()?;
    run_validated(cfg, hypothesis, index).map_err(|e| Error::Trial {
        hypothesis,
        index,
        source: Box::new(e),
    })
}

fn run_validated(cfg: &TrialConfig, hypothesis: Hypothesis, index: u64) -> Result<TrialOutcome> {
    let inst_seed = instance_seed(cfg.master_seed, hypothesis, index);
    let shared = strategy_seed(cfg.master_seed, index);
    let instance = Instance::sample(cfg.params, hypothesis, inst_seed)?;
    let mut oracle = BudgetedOracle::with_mode(instance, cfg.budget, cfg.budget_mode).without_log();

    match cfg.strategy {
        StrategySpec::Pattern => {}
        StrategySpec::Uniform => {
            uniform_plan(cfg.params.n, cfg.budget, shared)?.execute(&mut oracle)?;
        }
        StrategySpec::Greedy { fanout } => {
            let expected = cfg.params.noise_mean();
            GreedyAdaptive::new(cfg.params.n, cfg.budget, fanout, expected, shared)?.run(&mut oracle)?;
        }
    }

    let verdict = match &cfg.detector {
        DetectorSpec::Scan(c) => scan_test(&mut oracle, &cfg.params, c, shared)?,
        DetectorSpec::Degree(c) => degree_test(&mut oracle, &cfg.params, c, shared)?,
        DetectorSpec::AlwaysZero => DetectorVerdict::from_threshold(0.0, 0.0, "always_zero", false),
        DetectorSpec::FairCoin => {
            let u: f64 = seed::rng(inst_seed, tag::DETECTOR, 0).random();
            DetectorVerdict::from_threshold(u, 0.5, "fair_coin", false)
        }
    };

    Ok(TrialOutcome {
        hypothesis,
        index,
        verdict,
        planted_hits: oracle.planted_query_count().ok(),
        queries_used: oracle.used(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskEstimate {
    pub config: TrialConfig,
    pub trials: u64,
    pub type1_rate: f64,
    pub type2_rate: f64,
    pub risk: f64,
    pub type1_half_width: f64,
    pub type2_half_width: f64,
    pub planted_hits_mean: f64,
    pub planted_hits_max: u64,
    /// Whether any verdict came from an approximate search.
    pub approximate: bool,
    /// Planted query counts of the H1 trials, by trial index.
    #[serde(skip)]
    pub planted_hits: Vec<u64>,
}

/// Normal-approximation 95% half-width, floored at `1/(2T)`.
pub fn half_width_95(rate: f64, trials: u64) -> f64 {
    let t = trials as f64;
    (1.96 * (rate * (1.0 - rate) / t).sqrt()).max(0.5 / t)
}

pub fn estimate_risk(cfg: &TrialConfig) -> Result<RiskEstimate> {
    cfg.validate()?;
    if cfg.trials < MIN_RISK_TRIALS {
        return Err(Error::Parameter(format!(
            "risk estimation needs at least {MIN_RISK_TRIALS} trials, got {}",
            cfg.trials
        )));
    }
    let outcomes: Vec<Result<(TrialOutcome, TrialOutcome)>> = (0..cfg.trials)
        .into_par_iter()
        .map(|i| {
            let wrap = |h| {
                run_validated(cfg, h, i).map_err(|e| Error::Trial {
                    hypothesis: h,
                    index: i,
                    source: Box::new(e),
                })
            };
            Ok((wrap(Hypothesis::H0)?, wrap(Hypothesis::H1)?))
        })
        .collect();

    let mut false_alarms = 0u64;
    let mut misses = 0u64;
    let mut approximate = false;
    let mut planted_hits = Vec::with_capacity(cfg.trials as usize);
    for outcome in outcomes {
        let (null, alt) = outcome?;
        false_alarms += u64::from(null.verdict.decision == 1);
        misses += u64::from(alt.verdict.decision == 0);
        approximate |= null.verdict.approximate || alt.verdict.approximate;
        planted_hits.push(alt.planted_hits.unwrap_or(0));
    }

    let t = cfg.trials as f64;
    let type1_rate = false_alarms as f64 / t;
    let type2_rate = misses as f64 / t;
    Ok(RiskEstimate {
        config: *cfg,
        trials: cfg.trials,
        type1_rate,
        type2_rate,
        risk: type1_rate + type2_rate,
        type1_half_width: half_width_95(type1_rate, cfg.trials),
        type2_half_width: half_width_95(type2_rate, cfg.trials),
        planted_hits_mean: planted_hits.iter().sum::<u64>() as f64 / t,
        planted_hits_max: planted_hits.iter().copied().max().unwrap_or(0),
        approximate,
        planted_hits,
    })
}

/// One sweep row: either an estimate or the error that prevented it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub index: usize,
    pub config_hash: String,
    pub config: TrialConfig,
    pub estimate: Option<RiskEstimate>,
    pub error: Option<String>,
}

pub const SWEEP_CSV_HEADER: &str = "index,config_hash,n,k,planted,noise,detector,strategy,budget,\
trials,master_seed,m,n_prime,epsilon,type1_rate,type2_rate,risk,type1_half_width,\
type2_half_width,planted_hits_mean,planted_hits_max,approximate,error";

impl SweepRecord {
    pub fn csv_row(&self) -> String {
        let c = &self.config;
        let (m, n_prime, eps) = match &c.detector {
            DetectorSpec::Scan(s) => (s.m.to_string(), String::new(), s.epsilon.to_string()),
            DetectorSpec::Degree(d) => (d.m.to_string(), d.n_prime.to_string(), d.epsilon.to_string()),
            _ => Default::default(),
        };
        let stats = match &self.estimate {
            Some(e) => [
                e.type1_rate.to_string(),
                e.type2_rate.to_string(),
                e.risk.to_string(),
                e.type1_half_width.to_string(),
                e.type2_half_width.to_string(),
                e.planted_hits_mean.to_string(),
                e.planted_hits_max.to_string(),
                e.approximate.to_string(),
            ],
            None => Default::default(),
        };
        let mut fields = vec![
            self.index.to_string(),
            self.config_hash.clone(),
            c.params.n.to_string(),
            c.params.k.to_string(),
            c.params.dist.planted.to_string(),
            c.params.dist.noise.to_string(),
            c.detector.name().to_string(),
            c.strategy.name().to_string(),
            c.budget.to_string(),
            c.trials.to_string(),
            c.master_seed.to_string(),
            m,
            n_prime,
            eps,
        ];
        fields.extend(stats);
        fields.push(self.error.clone().unwrap_or_default());
        fields.iter().map(|f| csv_escape(f)).collect::<Vec<_>>().join(",")
    }
}

fn csv_escape(field: &str) -> String {
    if field.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

/// Where sweep records go. Any path may be omitted.
#[derive(Debug, Clone, Default)]
pub struct SweepOutput {
    pub csv: Option<PathBuf>,
    pub jsonl: Option<PathBuf>,
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
struct Manifest {
    completed: BTreeSet<String>,
}

fn read_manifest(path: &Path) -> Result<Manifest> {
    match fs::read_to_string(path) {
        Ok(text) => Ok(serde_json::from_str(&text)?),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(Manifest::default()),
        Err(e) => Err(e.into()),
    }
}

fn write_manifest(path: &Path, manifest: &Manifest) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, serde_json::to_string_pretty(manifest)?)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn open_append(path: &Path, header: Option<&str>) -> Result<BufWriter<File>> {
    let fresh = fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
    let file = OpenOptions::new().create(true).append(true).open(path)?;
    let mut w = BufWriter::new(file);
    if let (true, Some(h)) = (fresh, header) {
        writeln!(w, "{h}")?;
        w.flush()?;
    }
    Ok(w)
}

/// Evaluate every config in grid order, skipping those already listed in
/// the manifest. Configs run one after another with their trials in
/// parallel. Each record is written and flushed, and the manifest updated,
/// before the next config starts. Returns the records computed in this call.
pub fn sweep<F>(grid: &[TrialConfig], out: &SweepOutput, mut on_record: F) -> Result<Vec<SweepRecord>>
where
    F: FnMut(&SweepRecord, usize),
{
    if grid.is_empty() {
        return Err(Error::Parameter("sweep grid is empty".into()));
    }
    let mut manifest = match &out.manifest {
        Some(p) => read_manifest(p)?,
        None => Manifest::default(),
    };
    let mut csv = out.csv.as_deref().map(|p| open_append(p, Some(SWEEP_CSV_HEADER))).transpose()?;
    let mut jsonl = out.jsonl.as_deref().map(|p| open_append(p, None)).transpose()?;

    let mut records = Vec::new();
    for (index, cfg) in grid.iter().enumerate() {
        let config_hash = cfg.hash();
        if manifest.completed.contains(&config_hash) {
            continue;
        }
        let (estimate, error) = match estimate_risk(cfg) {
            Ok(e) => (Some(e), None),
            Err(e) => (None, Some(e.to_string())),
        };
        let record = SweepRecord { index, config_hash, config: *cfg, estimate, error };
        if let Some(w) = csv.as_mut() {
            writeln!(w, "{}", record.csv_row())?;
            w.flush()?;
        }
        if let Some(w) = jsonl.as_mut() {
            writeln!(w, "{}", serde_json::to_string(&record)?)?;
            w.flush()?;
        }
        if let Some(p) = &out.manifest {
            manifest.completed.insert(record.config_hash.clone());
            write_manifest(p, &manifest)?;
        }
        on_record(&record, grid.len());
        records.push(record);
    }
    Ok(records)
}
