//! Experiment files, flag overlays and grid expansion.

use std::fs;
use std::path::{Path, PathBuf};

use qpds_core::detectors::{DegreeConfig, ScanConfig, SearchMode, ThresholdMode};
use qpds_core::divergences::{Dist, DistributionPair, LogBase};
use qpds_core::harness::{DetectorSpec, StrategySpec, TrialConfig};
use qpds_core::oracle::BudgetMode;
use qpds_core::ModelParams;
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentFile {
    pub schema_version: u32,
    pub model: ModelParams,
    pub detector: DetectorSpec,
    #[serde(default)]
    pub strategy: StrategySpec,
    /// Query budget; defaults to the detector's pattern size.
    #[serde(default)]
    pub budget: Option<u64>,
    #[serde(default)]
    pub budget_mode: BudgetMode,
    pub trials: u64,
    #[serde(default)]
    pub master_seed: u64,
    /// Overrides the degree detector's log base.
    #[serde(default)]
    pub log_base: Option<LogBase>,
    #[serde(default)]
    pub grid: GridAxes,
    #[serde(default)]
    pub output: OutputPaths,
}

/// Lists of values per parameter; the sweep runs their Cartesian product
/// with the last axis varying fastest.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridAxes {
    #[serde(default)]
    pub n: Vec<u32>,
    #[serde(default)]
    pub k: Vec<u32>,
    #[serde(default)]
    pub p: Vec<f64>,
    #[serde(default)]
    pub q: Vec<f64>,
    #[serde(default)]
    pub m: Vec<u32>,
    #[serde(default)]
    pub n_prime: Vec<u32>,
    #[serde(default)]
    pub epsilon: Vec<f64>,
    #[serde(default)]
    pub budget: Vec<u64>,
    #[serde(default)]
    pub trials: Vec<u64>,
}

impl GridAxes {
    pub fn is_empty(&self) -> bool {
        *self == GridAxes::default()
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputPaths {
    #[serde(default)]
    pub csv: Option<PathBuf>,
    #[serde(default)]
    pub jsonl: Option<PathBuf>,
    #[serde(default)]
    pub manifest: Option<PathBuf>,
    /// Simulate writes its JSON here instead of stdout.
    #[serde(default)]
    pub json: Option<PathBuf>,
}

pub fn load(path: &Path) -> Result<ExperimentFile, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::usage(format!("cannot read {}: {e}", path.display())))?;
    let file: ExperimentFile = serde_json::from_str(&text)
        .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
    if file.schema_version != SCHEMA_VERSION {
        return Err(CliError::usage(format!(
            "{}: field `schema_version`: expected {SCHEMA_VERSION}, found {}",
            path.display(),
            file.schema_version
        )));
    }
    Ok(file)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum DetectorKind {
    Scan,
    Degree,
    AlwaysZero,
    FairCoin,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum StrategyKind {
    Pattern,
    Uniform,
    Greedy,
}

/// Values given on the command line; each one overrides the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub n: Option<u32>,
    pub k: Option<u32>,
    pub p: Option<f64>,
    pub q: Option<f64>,
    pub detector: Option<DetectorKind>,
    pub m: Option<u32>,
    pub n_prime: Option<u32>,
    pub epsilon: Option<f64>,
    pub gamma: Option<f64>,
    pub threshold_mode: Option<ThresholdMode>,
    pub search_mode: Option<SearchMode>,
    pub log_base: Option<LogBase>,
    pub strategy: Option<StrategyKind>,
    pub fanout: Option<usize>,
    pub budget: Option<u64>,
    pub strict_budget: bool,
    pub trials: Option<u64>,
    pub seed: Option<u64>,
}

/// A trial configuration whose budget may still follow the detector.
#[derive(Debug, Clone, Copy)]
pub struct BaseConfig {
    pub params: ModelParams,
    pub detector: DetectorSpec,
    pub strategy: StrategySpec,
    pub budget: Option<u64>,
    pub budget_mode: BudgetMode,
    pub trials: u64,
    pub master_seed: u64,
}

fn missing(flag: &str) -> CliError {
    CliError::usage(format!("missing required flag {flag}"))
}

fn set_bernoulli(dist: &mut DistributionPair, p: Option<f64>, q: Option<f64>) -> Result<(), CliError> {
    if p.is_none() && q.is_none() {
        return Ok(());
    }
    let (bp, bq) = match dist.as_bern() {
        Some(b) => (Some(b.p), Some(b.q)),
        None => (None, None),
    };
    let p = p.or(bp).ok_or_else(|| missing("--p"))?;
    let q = q.or(bq).ok_or_else(|| missing("--q"))?;
    *dist = DistributionPair::bernoulli(p, q);
    Ok(())
}

fn build_detector(base: Option<DetectorSpec>, o: &Overrides) -> Result<DetectorSpec, CliError> {
    let base_kind = base.map(|d| match d {
        DetectorSpec::Scan(_) => DetectorKind::Scan,
        DetectorSpec::Degree(_) => DetectorKind::Degree,
        DetectorSpec::AlwaysZero => DetectorKind::AlwaysZero,
        DetectorSpec::FairCoin => DetectorKind::FairCoin,
    });
    let kind = o.detector.or(base_kind).ok_or_else(|| missing("--detector"))?;
    let inherited = if Some(kind) == base_kind { base } else { None };
    Ok(match kind {
        DetectorKind::Scan => {
            let mut c = match inherited {
                Some(DetectorSpec::Scan(c)) => c,
                _ => ScanConfig::new(o.m.ok_or_else(|| missing("--M"))?, o.epsilon.ok_or_else(|| missing("--eps"))?),
            };
            c.m = o.m.unwrap_or(c.m);
            c.epsilon = o.epsilon.unwrap_or(c.epsilon);
            c.gamma = o.gamma.or(c.gamma);
            c.threshold_mode = o.threshold_mode.unwrap_or(c.threshold_mode);
            c.search_mode = o.search_mode.unwrap_or(c.search_mode);
            DetectorSpec::Scan(c)
        }
        DetectorKind::Degree => {
            let mut c = match inherited {
                Some(DetectorSpec::Degree(c)) => c,
                _ => DegreeConfig::new(
                    o.n_prime.ok_or_else(|| missing("--n-prime"))?,
                    o.m.ok_or_else(|| missing("--M"))?,
                    o.epsilon.ok_or_else(|| missing("--eps"))?,
                ),
            };
            c.n_prime = o.n_prime.unwrap_or(c.n_prime);
            c.m = o.m.unwrap_or(c.m);
            c.epsilon = o.epsilon.unwrap_or(c.epsilon);
            c.log_base = o.log_base.unwrap_or(c.log_base);
            DetectorSpec::Degree(c)
        }
        DetectorKind::AlwaysZero => DetectorSpec::AlwaysZero,
        DetectorKind::FairCoin => DetectorSpec::FairCoin,
    })
}

fn build_strategy(base: StrategySpec, o: &Overrides) -> Result<StrategySpec, CliError> {
    Ok(match o.strategy {
        None => match (base, o.fanout) {
            (StrategySpec::Greedy { .. }, Some(f)) => StrategySpec::Greedy { fanout: f },
            _ => base,
        },
        Some(StrategyKind::Pattern) => StrategySpec::Pattern,
        Some(StrategyKind::Uniform) => StrategySpec::Uniform,
        Some(StrategyKind::Greedy) => {
            let inherited = match base {
                StrategySpec::Greedy { fanout } => Some(fanout),
                _ => None,
            };
            StrategySpec::Greedy { fanout: o.fanout.or(inherited).ok_or_else(|| missing("--fanout"))? }
        }
    })
}

/// Merge flags over an optional file; missing required values name the flag.
pub fn resolve(file: Option<&ExperimentFile>, o: &Overrides) -> Result<BaseConfig, CliError> {
    let mut dist = file.map(|f| f.model.dist).unwrap_or_default();
    if file.is_none() && (o.p.is_none() || o.q.is_none()) {
        return Err(missing(if o.p.is_none() { "--p" } else { "--q" }));
    }
    set_bernoulli(&mut dist, o.p, o.q)?;
    let n = o.n.or(file.map(|f| f.model.n)).ok_or_else(|| missing("--n"))?;
    let k = o.k.or(file.map(|f| f.model.k)).ok_or_else(|| missing("--k"))?;
    let mut detector = build_detector(file.map(|f| f.detector), o)?;
    if let (Some(b), DetectorSpec::Degree(c)) = (file.and_then(|f| f.log_base), &mut detector) {
        if o.log_base.is_none() {
            c.log_base = b;
        }
    }
    let strategy = build_strategy(file.map(|f| f.strategy).unwrap_or_default(), o)?;
    let trials = o.trials.or(file.map(|f| f.trials)).ok_or_else(|| missing("--trials"))?;
    let budget_mode = if o.strict_budget {
        BudgetMode::EveryCall
    } else {
        file.map(|f| f.budget_mode).unwrap_or_default()
    };
    Ok(BaseConfig {
        params: ModelParams { n, k, dist },
        detector,
        strategy,
        budget: o.budget.or(file.and_then(|f| f.budget)),
        budget_mode,
        trials,
        master_seed: o.seed.or(file.map(|f| f.master_seed)).unwrap_or(0),
    })
}

impl BaseConfig {
    pub fn to_trial_config(self) -> Result<TrialConfig, CliError> {
        let budget = match (self.budget, self.strategy) {
            (Some(b), _) => b,
            (None, StrategySpec::Pattern) => self.detector.pattern_budget(),
            (None, _) => return Err(missing("--budget")),
        };
        let mut cfg = TrialConfig::new(self.params, self.detector, budget, self.trials, self.master_seed)
            .with_strategy(self.strategy);
        cfg.budget_mode = self.budget_mode;
        Ok(cfg)
    }

    /// Grid points in row-major order over the axes that are present.
    pub fn expand(&self, axes: &GridAxes) -> Result<Vec<TrialConfig>, CliError> {
        let mut points = vec![*self];
        fn product<T: Copy>(points: Vec<BaseConfig>, values: &[T], apply: impl Fn(&mut BaseConfig, T)) -> Vec<BaseConfig> {
            if values.is_empty() {
                return points;
            }
            points
                .into_iter()
                .flat_map(|p| {
                    values.iter().map(|&v| {
                        let mut q = p;
                        apply(&mut q, v);
                        q
                    }).collect::<Vec<_>>()
                })
                .collect()
        }
        if (!axes.p.is_empty() || !axes.q.is_empty()) && self.params.dist.as_bern().is_none() {
            return Err(CliError::usage("grid axes `p` and `q` need a Bernoulli model"));
        }
        if (!axes.m.is_empty() || !axes.epsilon.is_empty())
            && !matches!(self.detector, DetectorSpec::Scan(_) | DetectorSpec::Degree(_))
        {
            return Err(CliError::usage("grid axes `m` and `epsilon` need a scan or degree detector"));
        }
        if !axes.n_prime.is_empty() && !matches!(self.detector, DetectorSpec::Degree(_)) {
            return Err(CliError::usage("grid axis `n_prime` needs the degree detector"));
        }
        points = product(points, &axes.n, |c, v| c.params.n = v);
        points = product(points, &axes.k, |c, v| c.params.k = v);
        points = product(points, &axes.p, |c, v| {
            if let Dist::Bernoulli { theta } = &mut c.params.dist.planted {
                *theta = v;
            }
        });
        points = product(points, &axes.q, |c, v| {
            if let Dist::Bernoulli { theta } = &mut c.params.dist.noise {
                *theta = v;
            }
        });
        points = product(points, &axes.m, |c, v| match &mut c.detector {
            DetectorSpec::Scan(s) => s.m = v,
            DetectorSpec::Degree(d) => d.m = v,
            _ => {}
        });
        points = product(points, &axes.n_prime, |c, v| {
            if let DetectorSpec::Degree(d) = &mut c.detector {
                d.n_prime = v;
            }
        });
        points = product(points, &axes.epsilon, |c, v| match &mut c.detector {
            DetectorSpec::Scan(s) => s.epsilon = v,
            DetectorSpec::Degree(d) => d.epsilon = v,
            _ => {}
        });
        points = product(points, &axes.budget, |c, v| c.budget = Some(v));
        points = product(points, &axes.trials, |c, v| c.trials = v);
        points.iter().map(|p| p.to_trial_config()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FILE: &str = r#"{
        "schema_version": 1,
        "model": {"n": 100, "k": 50},
        "detector": {"kind": "scan", "m": 20, "epsilon": 0.2},
        "trials": 200,
        "master_seed": 7,
        "grid": {"m": [10, 14], "budget": [45, 190]}
    }"#;

    fn parse(text: &str) -> Result<ExperimentFile, serde_json::Error> {
        serde_json::from_str(text)
    }

    #[test]
    fn file_defaults_and_expansion() {
        let file = parse(FILE).unwrap();
        let base = resolve(Some(&file), &Overrides::default()).unwrap();
        assert_eq!(base.params.dist, DistributionPair::bernoulli(1.0, 0.5));
        let cfg = base.to_trial_config().unwrap();
        assert_eq!(cfg.budget, 190);
        let grid = base.expand(&file.grid).unwrap();
        let summary: Vec<(u32, u64)> = grid
            .iter()
            .map(|c| match c.detector {
                DetectorSpec::Scan(s) => (s.m, c.budget),
                _ => unreachable!(),
            })
            .collect();
        assert_eq!(summary, vec![(10, 45), (10, 190), (14, 45), (14, 190)]);
    }

    #[test]
    fn flags_override_file() {
        let file = parse(FILE).unwrap();
        let o = Overrides { trials: Some(30), m: Some(12), q: Some(0.25), seed: Some(1), ..Default::default() };
        let base = resolve(Some(&file), &o).unwrap();
        assert_eq!(base.trials, 30);
        assert_eq!(base.master_seed, 1);
        assert_eq!(base.params.dist, DistributionPair::bernoulli(1.0, 0.25));
        assert!(matches!(base.detector, DetectorSpec::Scan(s) if s.m == 12 && s.epsilon == 0.2));
    }

    #[test]
    fn unknown_keys_rejected() {
        let bad = FILE.replace("\"trials\"", "\"trails\"");
        let err = parse(&bad).unwrap_err().to_string();
        assert!(err.contains("trails"), "{err}");
        let bad = FILE.replace("\"epsilon\": 0.2", "\"epsilon\": 0.2, \"extra\": 1");
        assert!(parse(&bad).is_err());
        let bad = FILE.replace("\"budget\": [45, 190]", "\"budgets\": [1]");
        assert!(parse(&bad).is_err());
    }

    #[test]
    fn missing_flags_are_named() {
        let o = Overrides { n: Some(10), k: Some(5), p: Some(1.0), q: Some(0.5), ..Default::default() };
        let err = resolve(None, &o).unwrap_err();
        assert!(err.message.contains("--detector"));
        let o = Overrides { detector: Some(DetectorKind::Scan), m: Some(5), ..o };
        assert!(resolve(None, &o).unwrap_err().message.contains("--eps"));
        let o = Overrides { epsilon: Some(0.2), ..o };
        assert!(resolve(None, &o).unwrap_err().message.contains("--trials"));
        let o = Overrides { n: None, trials: Some(30), ..o };
        assert!(resolve(None, &o).unwrap_err().message.contains("--n"));
    }

    #[test]
    fn greedy_needs_budget_and_fanout() {
        let o = Overrides {
            n: Some(50),
            k: Some(10),
            p: Some(0.9),
            q: Some(0.1),
            detector: Some(DetectorKind::AlwaysZero),
            strategy: Some(StrategyKind::Greedy),
            trials: Some(30),
            ..Default::default()
        };
        assert!(resolve(None, &o).unwrap_err().message.contains("--fanout"));
        let o = Overrides { fanout: Some(4), ..o };
        let base = resolve(None, &o).unwrap();
        assert!(base.to_trial_config().unwrap_err().message.contains("--budget"));
    }
}
