//! Experiment configuration files: flat `key = value` text.
//!
//! Everything an experiment needs lives in one file that can sit in
//! version control; command-line flags override individual keys.
//!
//! ```text
//! instance = mab            # mab | ward | path/to/file.instance
//! policy = pessimistic-optimistic
//! schedule = experiment-mab # theory-main | theory-linear-cost |
//!                           # experiment-ward | custom:<v>,<eps>
//! T = 10000
//! base_seed = 42
//! replications = 20         # or: seeds = 1 2 3
//! output_dir = out
//! trace_confidence = false
//! realized_regret = false
//! write_trajectories = true
//! workers = 0               # 0 = all cores
//! delta = 0.5               # optional instance override
//! p = 0.0001                # optional confidence tail prob (default 1/T)
//! instance_seed = 0         # seeds synthetic presets (ward)
//! ```

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::algorithm::PolicyKind;
use crate::dual::ScheduleKind;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("config validation error: {0}")]
    Validation(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum InstanceSpec {
    Mab,
    Ward,
    File(PathBuf),
}

impl InstanceSpec {
    fn parse(s: &str) -> InstanceSpec {
        match s {
            "mab" => InstanceSpec::Mab,
            "ward" => InstanceSpec::Ward,
            other => InstanceSpec::File(PathBuf::from(other)),
        }
    }

    fn to_text(&self) -> String {
        match self {
            InstanceSpec::Mab => "mab".into(),
            InstanceSpec::Ward => "ward".into(),
            InstanceSpec::File(p) => p.display().to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleSpec {
    pub kind: ScheduleKind,
    /// Coefficients for `custom:<v>,<eps>`.
    pub custom: Option<(f64, f64)>,
}

impl ScheduleSpec {
    pub fn parse(s: &str) -> Result<ScheduleSpec, ConfigError> {
        let spec = match s {
            "theory-main" => ScheduleSpec {
                kind: ScheduleKind::TheoryMain,
                custom: None,
            },
            "theory-linear-cost" => ScheduleSpec {
                kind: ScheduleKind::TheoryLinearCost,
                custom: None,
            },
            "experiment-mab" => ScheduleSpec {
                kind: ScheduleKind::ExperimentMab,
                custom: None,
            },
            "experiment-ward" => ScheduleSpec {
                kind: ScheduleKind::ExperimentWard,
                custom: None,
            },
            other => {
                let Some(args) = other.strip_prefix("custom:") else {
                    return Err(ConfigError::Parse(format!("unknown schedule `{other}`")));
                };
                let parts: Vec<&str> = args.split(',').collect();
                if parts.len() != 2 {
                    return Err(ConfigError::Parse(format!(
                        "custom schedule needs `custom:<v_coef>,<eps_coef>`, got `{other}`"
                    )));
                }
                let v: f64 = parts[0]
                    .trim()
                    .parse()
                    .map_err(|_| ConfigError::Parse(format!("bad v coefficient `{}`", parts[0])))?;
                let e: f64 = parts[1].trim().parse().map_err(|_| {
                    ConfigError::Parse(format!("bad eps coefficient `{}`", parts[1]))
                })?;
                ScheduleSpec {
                    kind: ScheduleKind::Custom,
                    custom: Some((v, e)),
                }
            }
        };
        Ok(spec)
    }

    pub fn to_text(&self) -> String {
        match (self.kind, self.custom) {
            (ScheduleKind::TheoryMain, _) => "theory-main".into(),
            (ScheduleKind::TheoryLinearCost, _) => "theory-linear-cost".into(),
            (ScheduleKind::ExperimentMab, _) => "experiment-mab".into(),
            (ScheduleKind::ExperimentWard, _) => "experiment-ward".into(),
            (ScheduleKind::Custom, Some((v, e))) => format!("custom:{v},{e}"),
            (ScheduleKind::Custom, None) => "custom:1,1".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SeedSpec {
    Explicit(Vec<u64>),
    Base { base_seed: u64, replications: usize },
}

impl SeedSpec {
    pub fn seeds(&self) -> Vec<u64> {
        match self {
            SeedSpec::Explicit(v) => v.clone(),
            SeedSpec::Base {
                base_seed,
                replications,
            } => (0..*replications as u64).map(|i| base_seed + i).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub instance: InstanceSpec,
    pub policy: PolicyKind,
    pub schedule: ScheduleSpec,
    pub horizon: usize,
    pub seeds: SeedSpec,
    pub output_dir: PathBuf,
    pub trace_confidence: bool,
    pub realized_regret: bool,
    pub write_trajectories: bool,
    pub workers: usize,
    pub delta_override: Option<f64>,
    pub confidence_p: Option<f64>,
    pub instance_seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            instance: InstanceSpec::Mab,
            policy: PolicyKind::PessimisticOptimistic,
            schedule: ScheduleSpec {
                kind: ScheduleKind::ExperimentMab,
                custom: None,
            },
            horizon: 10_000,
            seeds: SeedSpec::Base {
                base_seed: 0,
                replications: 1,
            },
            output_dir: PathBuf::from("out"),
            trace_confidence: false,
            realized_regret: false,
            write_trajectories: true,
            workers: 0,
            delta_override: None,
            confidence_p: None,
            instance_seed: 0,
        }
    }
}

fn parse_policy(s: &str) -> Result<PolicyKind, ConfigError> {
    match s {
        "pessimistic-optimistic" => Ok(PolicyKind::PessimisticOptimistic),
        "linucb-unconstrained" => Ok(PolicyKind::LinUcbUnconstrained),
        "oracle-lp" => Ok(PolicyKind::OracleLp),
        "uniform" => Ok(PolicyKind::Uniform),
        other => Err(ConfigError::Parse(format!("unknown policy `{other}`"))),
    }
}

fn parse_bool(s: &str, key: &str) -> Result<bool, ConfigError> {
    match s {
        "true" => Ok(true),
        "false" => Ok(false),
        other => Err(ConfigError::Parse(format!(
            "{key}: expected true/false, got `{other}`"
        ))),
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = ExperimentConfig::default();
        let mut base_seed: Option<u64> = None;
        let mut replications: Option<usize> = None;
        let mut explicit_seeds: Option<Vec<u64>> = None;
        for (lineno, raw) in text.lines().enumerate() {
            let line = match raw.find('#') {
                Some(i) => &raw[..i],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                ConfigError::Parse(format!("line {}: expected `key = value`", lineno + 1))
            })?;
            let (key, value) = (key.trim(), value.trim());
            let bad_num = |what: &str| ConfigError::Parse(format!("bad {what} `{value}`"));
            match key {
                "instance" => cfg.instance = InstanceSpec::parse(value),
                "policy" => cfg.policy = parse_policy(value)?,
                "schedule" => cfg.schedule = ScheduleSpec::parse(value)?,
                "T" => cfg.horizon = value.parse().map_err(|_| bad_num("horizon"))?,
                "base_seed" => base_seed = Some(value.parse().map_err(|_| bad_num("base_seed"))?),
                "replications" => {
                    replications = Some(value.parse().map_err(|_| bad_num("replications"))?)
                }
                "seeds" => {
                    let seeds: Result<Vec<u64>, _> =
                        value.split_whitespace().map(|t| t.parse()).collect();
                    explicit_seeds = Some(seeds.map_err(|_| bad_num("seeds"))?);
                }
                "output_dir" => cfg.output_dir = PathBuf::from(value),
                "trace_confidence" => cfg.trace_confidence = parse_bool(value, key)?,
                "realized_regret" => cfg.realized_regret = parse_bool(value, key)?,
                "write_trajectories" => cfg.write_trajectories = parse_bool(value, key)?,
                "workers" => cfg.workers = value.parse().map_err(|_| bad_num("workers"))?,
                "delta" => cfg.delta_override = Some(value.parse().map_err(|_| bad_num("delta"))?),
                "p" => cfg.confidence_p = Some(value.parse().map_err(|_| bad_num("p"))?),
                "instance_seed" => {
                    cfg.instance_seed = value.parse().map_err(|_| bad_num("instance_seed"))?
                }
                other => {
                    return Err(ConfigError::Parse(format!(
                        "line {}: unknown key `{other}`",
                        lineno + 1
                    )))
                }
            }
        }
        cfg.seeds = match (explicit_seeds, base_seed, replications) {
            (Some(seeds), _, _) => SeedSpec::Explicit(seeds),
            (None, base, reps) => SeedSpec::Base {
                base_seed: base.unwrap_or(0),
                replications: reps.unwrap_or(1),
            },
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self, std::io::Error> {
        let text = std::fs::read_to_string(path)?;
        ExperimentConfig::parse(&text)
            .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e.to_string()))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.horizon < 1 {
            return Err(ConfigError::Validation("T must be >= 1".into()));
        }
        if self.seeds.seeds().is_empty() {
            return Err(ConfigError::Validation(
                "need at least one replication seed".into(),
            ));
        }
        if let Some(d) = self.delta_override {
            if !(d > 0.0 && d <= 1.0) {
                return Err(ConfigError::Validation(format!(
                    "delta = {d} outside (0, 1]"
                )));
            }
        }
        if let Some(p) = self.confidence_p {
            if !(p > 0.0 && p < 1.0) {
                return Err(ConfigError::Validation(format!("p = {p} outside (0, 1)")));
            }
        }
        if let Some((v, e)) = self.schedule.custom {
            if v <= 0.0 || e <= 0.0 {
                return Err(ConfigError::Validation(
                    "custom schedule coefficients must be positive".into(),
                ));
            }
        }
        Ok(())
    }

    /// Canonical serialization; `parse(to_text(c)) == c`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("instance = {}\n", self.instance.to_text()));
        out.push_str(&format!("policy = {}\n", self.policy.name()));
        out.push_str(&format!("schedule = {}\n", self.schedule.to_text()));
        out.push_str(&format!("T = {}\n", self.horizon));
        match &self.seeds {
            SeedSpec::Explicit(seeds) => {
                let toks: Vec<String> = seeds.iter().map(|s| s.to_string()).collect();
                out.push_str(&format!("seeds = {}\n", toks.join(" ")));
            }
            SeedSpec::Base {
                base_seed,
                replications,
            } => {
                out.push_str(&format!("base_seed = {base_seed}\n"));
                out.push_str(&format!("replications = {replications}\n"));
            }
        }
        out.push_str(&format!("output_dir = {}\n", self.output_dir.display()));
        out.push_str(&format!("trace_confidence = {}\n", self.trace_confidence));
        out.push_str(&format!("realized_regret = {}\n", self.realized_regret));
        out.push_str(&format!(
            "write_trajectories = {}\n",
            self.write_trajectories
        ));
        out.push_str(&format!("workers = {}\n", self.workers));
        if let Some(d) = self.delta_override {
            out.push_str(&format!("delta = {d}\n"));
        }
        if let Some(p) = self.confidence_p {
            out.push_str(&format!("p = {p}\n"));
        }
        out.push_str(&format!("instance_seed = {}\n", self.instance_seed));
        out
    }
}
