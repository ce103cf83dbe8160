//! Service configuration, read from a TOML file and patched by flags.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use tomtalk_core::emotion::{EngineConfig, Liking, PropItem, TransitionStats};
use tomtalk_core::recommend::RecommendParams;
use tomtalk_core::rewards::RewardConfig;
use tomtalk_core::socialgraph::{read_graph, Catalog, SocialGraph};

/// Environment variable holding the config path when `--config` is absent.
pub const CONFIG_ENV: &str = "TOMTALK_CONFIG";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{}: {message}", path.display())]
    Parse { path: PathBuf, message: String },
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PropConfig {
    pub id: String,
    pub liking: Liking,
    pub magnitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlatformConfig {
    pub listen: String,
    /// Graph file loaded at start and written back at checkpoints and on
    /// shutdown. Without one the service starts from an empty graph and
    /// keeps nothing.
    pub graph: Option<PathBuf>,
    /// Reward ledger, stored as JSON next to the graph.
    pub ledger: Option<PathBuf>,
    /// Catalog used when no graph file is given.
    pub attribute_dims: usize,
    pub preference_dims: usize,
    pub transition_stats: Option<PathBuf>,
    pub seed: u64,
    /// Wall-clock milliseconds per pet tick.
    pub tick_ms: u64,
    /// Seconds between graph checkpoints; 0 disables them.
    pub checkpoint_secs: u64,
    /// Seconds per graph time unit. The default of one week matches the
    /// simulator.
    pub time_unit_secs: u64,
    /// Pins the graph clock, for reproducible runs.
    pub fixed_time: Option<u64>,
    pub pets: Vec<String>,
    pub props: Vec<PropConfig>,
    pub reward: RewardConfig,
    pub recommend: RecommendParams,
    pub engine: EngineConfig,
}

impl Default for PlatformConfig {
    fn default() -> Self {
        let prop = |id: &str, liking, magnitude| PropConfig {
            id: id.to_owned(),
            liking,
            magnitude,
        };
        Self {
            listen: "127.0.0.1:7878".into(),
            graph: None,
            ledger: None,
            attribute_dims: 3,
            preference_dims: 5,
            transition_stats: None,
            seed: 1,
            tick_ms: 1000,
            checkpoint_secs: 300,
            time_unit_secs: 7 * 24 * 3600,
            fixed_time: None,
            pets: vec!["tom".into()],
            props: vec![
                prop("ration", Liking::Liked, 1.0),
                prop("toy", Liking::Liked, 0.6),
                prop("soap", Liking::Disliked, 0.4),
                prop("medicine", Liking::Disliked, 0.8),
            ],
            reward: RewardConfig::default(),
            recommend: RecommendParams::default(),
            engine: EngineConfig::default(),
        }
    }
}

impl PlatformConfig {
    /// Reads a config file. Relative data paths inside it are taken relative
    /// to the file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_owned(),
            source,
        })?;
        let mut cfg: Self = toml::from_str(&text).map_err(|e| ConfigError::Parse {
            path: path.to_owned(),
            message: e.message().to_owned(),
        })?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.graph, &mut cfg.ledger, &mut cfg.transition_stats]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        cfg.validate().map_err(|e| ConfigError::Parse {
            path: path.to_owned(),
            message: e.to_string(),
        })?;
        Ok(cfg)
    }

    /// `path`, else the file named by [`CONFIG_ENV`], else the defaults.
    pub fn resolve(path: Option<&Path>) -> Result<Self, ConfigError> {
        match path {
            Some(p) => Self::load(p),
            None => match std::env::var_os(CONFIG_ENV) {
                Some(p) if !p.is_empty() => Self::load(PathBuf::from(p)),
                _ => Ok(Self::default()),
            },
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        self.reward
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.recommend
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.engine
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if self.tick_ms == 0 {
            return bad("tick_ms must be positive".into());
        }
        if self.time_unit_secs == 0 {
            return bad("time_unit_secs must be positive".into());
        }
        let mut pets = self.pets.clone();
        pets.sort();
        pets.dedup();
        if pets.len() != self.pets.len() {
            return bad("duplicate pet id".into());
        }
        if self.pets.iter().any(|p| p.is_empty() || p.contains('/')) {
            return bad("pet ids must be non-empty and free of `/`".into());
        }
        self.prop_items()?;
        Ok(())
    }

    pub fn prop_items(&self) -> Result<Vec<PropItem>, ConfigError> {
        self.props
            .iter()
            .map(|p| {
                PropItem::new(p.id.as_str(), p.liking, p.magnitude)
                    .map_err(|e| ConfigError::Invalid(format!("prop `{}`: {e}", p.id)))
            })
            .collect()
    }

    pub fn stats(&self) -> Result<TransitionStats, ConfigError> {
        match &self.transition_stats {
            None => Ok(TransitionStats::bundled()),
            Some(p) => TransitionStats::load(p).map_err(|e| ConfigError::Parse {
                path: p.clone(),
                message: e.to_string(),
            }),
        }
    }

    /// The configured graph, or an empty one with the configured catalog.
    pub fn load_graph(&self) -> Result<SocialGraph, ConfigError> {
        match &self.graph {
            Some(p) => load_graph_file(p, self),
            None => SocialGraph::new(
                Catalog {
                    attributes: self.attribute_dims,
                    preferences: self.preference_dims,
                },
                self.reward.params(),
            )
            .map_err(|e| ConfigError::Invalid(e.to_string())),
        }
    }

    /// Current time in graph units.
    pub fn now(&self) -> u64 {
        self.fixed_time.unwrap_or_else(|| {
            let secs = std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0);
            secs / self.time_unit_secs
        })
    }
}

pub fn load_graph_file(path: &Path, cfg: &PlatformConfig) -> Result<SocialGraph, ConfigError> {
    let file = std::fs::File::open(path).map_err(|source| ConfigError::Io {
        path: path.to_owned(),
        source,
    })?;
    read_graph(std::io::BufReader::new(file), cfg.reward.params()).map_err(|e| {
        ConfigError::Parse {
            path: path.to_owned(),
            message: e.to_string(),
        }
    })
}
