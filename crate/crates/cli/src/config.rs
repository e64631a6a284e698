//! Service configuration file (TOML).
//!
//! ```toml
//! data_dir = "./bdps-data"
//! listen_address = "127.0.0.1:8080"
//! replication_mode = "async"       # or "semi_sync"
//! session_ttl_ms = 1800000
//!
//! [policy]                          # autoscaler
//! min_on = 1
//! max_local = 20
//!
//! [detector]
//! k = 3
//! timeout_ms = 500
//!
//! [fees]                            # units per operation
//! verify = 2
//!
//! [[accounts]]
//! principal = "authority:ops"
//! secret = "change-me"
//! ```
//!
//! `--data-dir` and `--listen` on the command line take precedence over
//! the file.

use std::fs;
use std::path::{Path, PathBuf};

use bdps_core::elasticity::ScalePolicy;
use bdps_core::gateway::auth::{Principal, DEFAULT_SESSION_TTL_MS};
use bdps_core::gateway::billing::FeeSchedule;
use bdps_core::gateway::routing::DetectorConfig;
use bdps_core::replication::ReplicationMode;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Account {
    pub principal: String,
    pub secret: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub data_dir: PathBuf,
    pub listen_address: String,
    pub replication_mode: ReplicationMode,
    pub session_ttl_ms: u64,
    pub policy: ScalePolicy,
    pub detector: DetectorConfig,
    pub fees: FeeSchedule,
    pub accounts: Vec<Account>,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            data_dir: PathBuf::from("./bdps-data"),
            listen_address: "127.0.0.1:8080".into(),
            replication_mode: ReplicationMode::Async,
            session_ttl_ms: DEFAULT_SESSION_TTL_MS,
            policy: ScalePolicy::default(),
            detector: DetectorConfig::default(),
            fees: FeeSchedule::default(),
            accounts: Vec::new(),
        }
    }
}

impl Config {
    pub fn load(path: &Path) -> Result<Config, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.into(), source })?;
        Config::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Config, ConfigError> {
        let mut config: Config = toml::from_str(text)?;
        // fees listed in the file replace the defaults one by one
        let mut fees = FeeSchedule::default();
        fees.0.append(&mut config.fees.0);
        config.fees = fees;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.policy.validate().map_err(|e| ConfigError::Invalid(format!("policy: {e}")))?;
        if self.detector.k == 0 || self.detector.timeout_ms == 0 {
            return Err(ConfigError::Invalid("detector: k and timeout_ms must be positive".into()));
        }
        if self.session_ttl_ms == 0 {
            return Err(ConfigError::Invalid("session_ttl_ms must be positive".into()));
        }
        for a in &self.accounts {
            let p: Principal = a.principal.parse().map_err(|e| ConfigError::Invalid(format!("accounts: {e}")))?;
            if matches!(p, Principal::Citizen(_)) {
                return Err(ConfigError::Invalid(format!(
                    "accounts: {} is a citizen; citizens register through the API",
                    a.principal
                )));
            }
            if a.secret.is_empty() {
                return Err(ConfigError::Invalid(format!("accounts: empty secret for {}", a.principal)));
            }
        }
        Ok(())
    }

    /// Creates the data directory if needed.
    pub fn prepare_data_dir(&self) -> Result<(), ConfigError> {
        fs::create_dir_all(&self.data_dir)
            .map_err(|source| ConfigError::Read { path: self.data_dir.clone(), source })
    }
}
