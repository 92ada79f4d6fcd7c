//! Experiment configuration: a TOML file with an explicit seed.

use std::path::{Path, PathBuf};
use std::time::Duration;

use prelude_bgpsim::{PolicyParams, TopologyParams};
use prelude_core::smpc::Backend;
use prelude_ctl::Evaluation;
use serde::Deserialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("invalid config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("no seed given (set `seed` in the config or pass --seed)")]
    MissingSeed,
    #[error("unknown delay preset {0:?} (expected one of 1ms, 10ms, 100ms)")]
    DelayPreset(String),
    #[error("unknown backend {0:?} (expected clear, gmw or yao)")]
    Backend(String),
    #[error("invalid value: {0}")]
    Invalid(String),
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct TopologySection {
    pub n_as: usize,
    pub n_sdx: usize,
    pub n_tier1: usize,
    pub max_providers: usize,
    pub extra_peer_links: usize,
    pub min_members: usize,
    pub max_members: usize,
    pub ixp_peering: f64,
}

impl Default for TopologySection {
    fn default() -> Self {
        TopologySection {
            n_as: 50,
            n_sdx: 5,
            n_tier1: 3,
            max_providers: 2,
            extra_peer_links: 5,
            min_members: 3,
            max_members: 10,
            ixp_peering: 0.3,
        }
    }
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct PolicySection {
    pub target_share: f64,
    pub max_targets: usize,
    pub max_matches_per_target: usize,
    /// Cap on replayed policies; 0 keeps all.
    pub max_policies: usize,
}

impl Default for PolicySection {
    fn default() -> Self {
        PolicySection { target_share: 0.2, max_targets: 50, max_matches_per_target: 4, max_policies: 0 }
    }
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct MicrobenchSection {
    pub rule_counts: Vec<usize>,
    pub delays: Vec<String>,
    pub backends: Vec<String>,
    pub repetitions: usize,
}

impl Default for MicrobenchSection {
    fn default() -> Self {
        MicrobenchSection {
            rule_counts: vec![1, 50, 500],
            delays: vec!["1ms".into(), "10ms".into()],
            backends: vec!["gmw".into(), "yao".into()],
            repetitions: 5,
        }
    }
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
struct RawConfig {
    seed: Option<u64>,
    n_prefixes: usize,
    path_thresholds: Vec<usize>,
    backend: String,
    delay: String,
    out_dir: Option<PathBuf>,
    topology: TopologySection,
    policy: PolicySection,
    microbench: MicrobenchSection,
}

impl Default for RawConfig {
    fn default() -> Self {
        RawConfig {
            seed: None,
            n_prefixes: 20,
            path_thresholds: vec![0, 1, 2, 3, 4, 6, 8, 13],
            backend: "clear".into(),
            delay: "1ms".into(),
            out_dir: None,
            topology: TopologySection::default(),
            policy: PolicySection::default(),
            microbench: MicrobenchSection::default(),
        }
    }
}

/// A validated configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub n_prefixes: usize,
    pub path_thresholds: Vec<usize>,
    /// Evaluation of remote queries in the effectiveness study.
    pub backend: Option<Backend>,
    pub delay: Duration,
    pub out_dir: PathBuf,
    pub topology: TopologySection,
    pub policy: PolicySection,
    pub microbench: MicrobenchSection,
}

pub fn delay_preset(name: &str) -> Result<Duration, ConfigError> {
    match name {
        "1ms" => Ok(Duration::from_millis(1)),
        "10ms" => Ok(Duration::from_millis(10)),
        "100ms" => Ok(Duration::from_millis(100)),
        other => Err(ConfigError::DelayPreset(other.to_string())),
    }
}

fn backend_name(name: &str) -> Result<Option<Backend>, ConfigError> {
    match name {
        "clear" => Ok(None),
        other => other.parse::<Backend>().map(Some).map_err(|_| ConfigError::Backend(other.to_string())),
    }
}

impl ExperimentConfig {
    /// Parses TOML text; `seed` and `out_dir` given here override the file.
    pub fn from_toml(text: &str, seed: Option<u64>, out_dir: Option<PathBuf>) -> Result<Self, ConfigError> {
        let raw: RawConfig = toml::from_str(text)?;
        let seed = seed.or(raw.seed).ok_or(ConfigError::MissingSeed)?;
        let backend = backend_name(&raw.backend)?;
        let delay = delay_preset(&raw.delay)?;
        for d in &raw.microbench.delays {
            delay_preset(d)?;
        }
        for b in &raw.microbench.backends {
            if backend_name(b)?.is_none() {
                return Err(ConfigError::Backend(b.clone()));
            }
        }
        if raw.n_prefixes == 0 {
            return Err(ConfigError::Invalid("n_prefixes must be positive".into()));
        }
        if raw.path_thresholds.is_empty() {
            return Err(ConfigError::Invalid("path_thresholds must not be empty".into()));
        }
        if !(0.0..=1.0).contains(&raw.policy.target_share) || raw.policy.max_matches_per_target == 0 {
            return Err(ConfigError::Invalid("policy parameters out of range".into()));
        }
        let mut thresholds = raw.path_thresholds;
        thresholds.sort();
        thresholds.dedup();
        let cfg = ExperimentConfig {
            seed,
            n_prefixes: raw.n_prefixes,
            path_thresholds: thresholds,
            backend,
            delay,
            out_dir: out_dir.or(raw.out_dir).unwrap_or_else(|| PathBuf::from("out")),
            topology: raw.topology,
            policy: raw.policy,
            microbench: raw.microbench,
        };
        prelude_bgpsim::generate_topology(&TopologyParams { n_as: 3.max(cfg.topology.n_as), ..cfg.topology_params() })
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(cfg)
    }

    pub fn load(path: &Path, seed: Option<u64>, out_dir: Option<PathBuf>) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.into(), source })?;
        Self::from_toml(&text, seed, out_dir)
    }

    /// Defaults with the given seed.
    pub fn with_seed(seed: u64) -> Self {
        Self::from_toml("", Some(seed), None).expect("defaults are valid")
    }

    pub fn topology_params(&self) -> TopologyParams {
        let t = &self.topology;
        TopologyParams {
            n_as: t.n_as,
            n_tier1: t.n_tier1,
            max_providers: t.max_providers,
            extra_peer_links: t.extra_peer_links,
            n_sdx: t.n_sdx,
            min_members: t.min_members,
            max_members: t.max_members,
            ixp_peering: t.ixp_peering,
            seed: self.seed,
        }
    }

    pub fn policy_params(&self) -> PolicyParams {
        PolicyParams {
            seed: self.seed ^ 0x5eed_0001,
            target_share: self.policy.target_share,
            max_targets: self.policy.max_targets,
            max_matches_per_target: self.policy.max_matches_per_target,
            gr_only: false,
            first_id: 1,
        }
    }

    pub fn evaluation(&self) -> Evaluation {
        match self.backend {
            None => Evaluation::Clear,
            Some(backend) => Evaluation::Secure { backend, delay: Duration::ZERO },
        }
    }
}
