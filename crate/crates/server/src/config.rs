//! Service configuration: a TOML file, then environment overrides.

use std::net::{IpAddr, Ipv4Addr, SocketAddr};
use std::path::{Path, PathBuf};
use std::time::Duration;

use photoyear_core::persistence::HashCost;
use photoyear_core::EngineConfig;
use serde::Deserialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("invalid config {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("environment variable {name}={value:?} is not valid: {message}")]
    Env {
        name: &'static str,
        value: String,
        message: String,
    },
    #[error("{what} {path} does not exist")]
    MissingPath { what: &'static str, path: PathBuf },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct HashingConfig {
    pub memory_kib: u32,
    pub iterations: u32,
    pub parallelism: u32,
}

impl Default for HashingConfig {
    fn default() -> Self {
        let c = HashCost::DEFAULT;
        HashingConfig {
            memory_kib: c.memory_kib,
            iterations: c.iterations,
            parallelism: c.parallelism,
        }
    }
}

impl HashingConfig {
    pub fn cost(&self) -> HashCost {
        HashCost {
            memory_kib: self.memory_kib,
            iterations: self.iterations,
            parallelism: self.parallelism,
        }
    }
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct ApiConfig {
    pub host: IpAddr,
    pub port: u16,
    /// `sqlite://<path>`, a bare path, or `sqlite::memory:`.
    pub storage_url: String,
    /// The catalog's `meta.csv`.
    pub catalog_path: PathBuf,
    /// Resized assets, one `<asset key>.jpg` per image.
    pub image_dir: PathBuf,
    /// Optional built web client, served at `/`.
    pub static_dir: Option<PathBuf>,
    pub session_ttl_secs: u64,
    pub demo_enabled: bool,
    pub exclusion_window: usize,
    pub max_pending_rounds: usize,
    pub allow_partial_years: bool,
    pub purge_interval_secs: u64,
    pub hashing: HashingConfig,
}

impl Default for ApiConfig {
    fn default() -> Self {
        let engine = EngineConfig::default();
        ApiConfig {
            host: IpAddr::V4(Ipv4Addr::LOCALHOST),
            port: 8080,
            storage_url: "sqlite://photoyear.db".into(),
            catalog_path: PathBuf::from("data/meta.csv"),
            image_dir: PathBuf::from("data/images"),
            static_dir: None,
            session_ttl_secs: engine.session_ttl.as_secs(),
            demo_enabled: engine.demo_enabled,
            exclusion_window: engine.exclusion_window,
            max_pending_rounds: engine.max_pending_rounds,
            allow_partial_years: false,
            purge_interval_secs: 600,
            hashing: HashingConfig::default(),
        }
    }
}

impl ApiConfig {
    pub fn from_toml(text: &str, origin: &Path) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: origin.to_owned(),
            message: e.to_string(),
        })
    }

    /// Read `path`, apply overrides from the process environment and check
    /// that every referenced path exists.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_owned(),
            source,
        })?;
        let mut config = Self::from_toml(&text, path)?;
        config.apply_env(|name| std::env::var(name).ok())?;
        config.validate()?;
        Ok(config)
    }

    /// Apply `PORT`, `STORAGE_URL`, `IMAGE_DIR` and `SESSION_TTL_SECS`.
    pub fn apply_env(&mut self, lookup: impl Fn(&str) -> Option<String>) -> Result<(), ConfigError> {
        if let Some(v) = lookup("PORT") {
            self.port = v.trim().parse().map_err(|e: std::num::ParseIntError| ConfigError::Env {
                name: "PORT",
                value: v.clone(),
                message: e.to_string(),
            })?;
        }
        if let Some(v) = lookup("STORAGE_URL") {
            self.storage_url = v;
        }
        if let Some(v) = lookup("IMAGE_DIR") {
            self.image_dir = PathBuf::from(v);
        }
        if let Some(v) = lookup("SESSION_TTL_SECS") {
            self.session_ttl_secs = v.trim().parse().map_err(|e: std::num::ParseIntError| ConfigError::Env {
                name: "SESSION_TTL_SECS",
                value: v.clone(),
                message: e.to_string(),
            })?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let must_exist = [
            ("catalog file", Some(&self.catalog_path)),
            ("image directory", Some(&self.image_dir)),
            ("static directory", self.static_dir.as_ref()),
        ];
        for (what, path) in must_exist {
            if let Some(path) = path {
                if !path.exists() {
                    return Err(ConfigError::MissingPath {
                        what,
                        path: path.clone(),
                    });
                }
            }
        }
        if self.session_ttl_secs == 0 {
            return Err(ConfigError::Invalid("session_ttl_secs must be positive".into()));
        }
        if self.max_pending_rounds == 0 {
            return Err(ConfigError::Invalid("max_pending_rounds must be positive".into()));
        }
        Ok(())
    }

    pub fn listen_addr(&self) -> SocketAddr {
        SocketAddr::new(self.host, self.port)
    }

    pub fn engine_config(&self) -> EngineConfig {
        EngineConfig {
            exclusion_window: self.exclusion_window,
            session_ttl: Duration::from_secs(self.session_ttl_secs),
            max_pending_rounds: self.max_pending_rounds,
            demo_enabled: self.demo_enabled,
            seed: None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    #[test]
    fn file_then_environment() {
        let mut c = ApiConfig::from_toml(
            "port = 9000\nstorage_url = \"sqlite::memory:\"\n[hashing]\nmemory_kib = 2048\n",
            Path::new("x.toml"),
        )
        .unwrap();
        assert_eq!(c.port, 9000);
        assert_eq!(c.hashing.memory_kib, 2048);
        assert_eq!(c.hashing.iterations, HashCost::DEFAULT.iterations);
        let env: HashMap<&str, &str> = HashMap::from([("PORT", "9100"), ("IMAGE_DIR", "/srv/img"), ("SESSION_TTL_SECS", "60")]);
        c.apply_env(|k| env.get(k).map(|v| v.to_string())).unwrap();
        assert_eq!(c.port, 9100);
        assert_eq!(c.image_dir, PathBuf::from("/srv/img"));
        assert_eq!(c.engine_config().session_ttl, Duration::from_secs(60));
        assert_eq!(c.storage_url, "sqlite::memory:");
    }

    #[test]
    fn bad_values_are_reported() {
        assert!(matches!(
            ApiConfig::from_toml("prot = 1", Path::new("x.toml")),
            Err(ConfigError::Parse { .. })
        ));
        let mut c = ApiConfig::default();
        let err = c.apply_env(|k| (k == "PORT").then(|| "eighty".to_string())).unwrap_err();
        assert!(err.to_string().contains("PORT"));
    }

    #[test]
    fn missing_paths_are_named() {
        let c = ApiConfig {
            catalog_path: PathBuf::from("/definitely/not/here/meta.csv"),
            ..ApiConfig::default()
        };
        let msg = c.validate().unwrap_err().to_string();
        assert!(msg.contains("/definitely/not/here/meta.csv"), "{msg}");
    }
}
