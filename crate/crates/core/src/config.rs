//! Run configuration: a TOML file overridden by command-line flags.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::encoder::{ContextSource, GeofenceIndex, OverpassSource, DEFAULT_CONTEXT_PRIORITY};
use crate::error::{Error, Result};
use crate::eval::KalmanParams;
use crate::oracle::{HttpConfig, HttpOracle, Oracle, StubOracle};
use crate::workflow::SchedulerConfig;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    #[default]
    Stub,
    Http,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleConfig {
    pub backend: Backend,
    /// Required for the http backend unless `VISTA_ORACLE_URL` is set.
    pub http: Option<HttpConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ContextConfig {
    /// Look up spatial context; off means every position is open water.
    pub enabled: bool,
    pub geofence_path: Option<PathBuf>,
    pub context_priority: Vec<String>,
    pub overpass_enabled: bool,
    pub overpass_url: Option<String>,
}

impl Default for ContextConfig {
    fn default() -> Self {
        ContextConfig {
            enabled: false,
            geofence_path: None,
            context_priority: DEFAULT_CONTEXT_PRIORITY.iter().map(|s| s.to_string()).collect(),
            overpass_enabled: false,
            overpass_url: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathsConfig {
    pub input: Option<PathBuf>,
    pub kg: Option<PathBuf>,
    pub mask: Option<PathBuf>,
    pub outcomes: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub scheduler: SchedulerConfig,
    pub oracle: OracleConfig,
    pub context: ContextConfig,
    pub kalman: KalmanParams,
    pub paths: PathsConfig,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    /// Checks values and the existence of every configured input file.
    pub fn validate(&self) -> Result<()> {
        self.scheduler.validate()?;
        if !(self.kalman.sigma_process > 0.0 && self.kalman.sigma_obs > 0.0) {
            return Err(Error::Config("kalman noise must be positive".into()));
        }
        let c = &self.context;
        if c.enabled && c.geofence_path.is_none() && !c.overpass_enabled {
            return Err(Error::Config("spatial context is enabled but no geofence_path is configured".into()));
        }
        if c.overpass_enabled && c.overpass_url.is_none() {
            return Err(Error::Config("overpass_enabled needs overpass_url".into()));
        }
        if let (true, Some(p)) = (c.enabled, &c.geofence_path) {
            if !p.is_file() {
                return Err(Error::Config(format!("geofence file {} does not exist", p.display())));
            }
        }
        Ok(())
    }

    pub fn context_source(&self) -> Result<Box<dyn ContextSource>> {
        let c = &self.context;
        if !c.enabled {
            return Ok(Box::new(GeofenceIndex::empty()));
        }
        if c.overpass_enabled {
            let url = c.overpass_url.as_deref().ok_or_else(|| Error::Config("overpass_url missing".into()))?;
            return Ok(Box::new(OverpassSource::new(url, &c.context_priority, std::time::Duration::from_secs(15))?));
        }
        let path = c.geofence_path.as_deref().ok_or_else(|| Error::Config("geofence_path missing".into()))?;
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Ok(Box::new(GeofenceIndex::from_geojson(&text, &c.context_priority)?))
    }

    pub fn oracle(&self) -> Result<Arc<dyn Oracle>> {
        match self.oracle.backend {
            Backend::Stub => Ok(Arc::new(StubOracle)),
            Backend::Http => {
                let cfg = match &self.oracle.http {
                    Some(c) => c.clone(),
                    None => HttpConfig::from_env()?,
                };
                Ok(Arc::new(HttpOracle::new(cfg)?))
            }
        }
    }
}
