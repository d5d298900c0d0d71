use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use dialsynth::corpus::{FamilyDef, FamilyRegistry};
use dialsynth::gateway::{EndpointConfig, RetryPolicy, SamplingParams};
use serde::Deserialize;

use crate::Failure;

pub const ENV_API_KEY: &str = "DIALSYNTH_API_KEY";

/// Contents of the TOML config file. Every field is optional.
#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub endpoint: EndpointSection,
    pub sampling: Option<SamplingParams>,
    pub retry: Option<RetryPolicy>,
    pub generation: GenerationSection,
    pub families: BTreeMap<String, FamilyDef>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EndpointSection {
    pub base_url: Option<String>,
    pub chat_path: Option<String>,
    pub model: Option<String>,
    /// Name of the environment variable holding the API key.
    pub api_key_env: Option<String>,
    pub timeout_secs: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerationSection {
    pub templates: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    pub base_seed: Option<u64>,
    pub max_in_flight: Option<usize>,
    pub over_generation_factor: Option<f64>,
    pub max_retries_per_slot: Option<u32>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, Failure> {
        let Some(path) = path else { return Ok(Self::default()) };
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::Config(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| Failure::Config(format!("invalid config {}: {e}", path.display())))
    }

    pub fn registry(&self) -> Result<FamilyRegistry, Failure> {
        let mut registry = FamilyRegistry::new();
        for (id, def) in &self.families {
            registry.register(id, def.clone()).map_err(|e| Failure::Config(format!("family `{id}` in config: {e}")))?;
        }
        Ok(registry)
    }
}

/// Settings resolved from flags and environment (already merged by clap)
/// over the config file.
#[derive(Debug)]
pub struct AppConfig {
    pub endpoint: Option<EndpointConfig>,
    pub params: SamplingParams,
    pub retry: RetryPolicy,
    pub templates: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub base_seed: u64,
    pub max_in_flight: usize,
    pub over_generation_factor: Option<f64>,
    pub max_retries_per_slot: Option<u32>,
    pub families: FamilyRegistry,
}

/// Flag or environment overrides; `None` defers to the file.
#[derive(Debug, Default)]
pub struct Overrides {
    pub endpoint: Option<String>,
    pub model: Option<String>,
    pub seed: Option<u64>,
    pub templates: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    pub max_in_flight: Option<usize>,
    pub factor: Option<f64>,
    pub retries: Option<u32>,
}

impl AppConfig {
    pub fn resolve(file: FileConfig, o: Overrides) -> Result<Self, Failure> {
        let families = file.registry()?;
        let base_url = o.endpoint.or(file.endpoint.base_url).filter(|u| !u.trim().is_empty());
        let endpoint = match base_url {
            None => None,
            Some(base_url) => {
                let defaults = EndpointConfig::default();
                let api_key = match std::env::var(ENV_API_KEY) {
                    Ok(k) => Some(k),
                    Err(_) => match &file.endpoint.api_key_env {
                        Some(var) => Some(
                            std::env::var(var)
                                .map_err(|_| Failure::Config(format!("api_key_env names `{var}`, which is not set")))?,
                        ),
                        None => None,
                    },
                };
                Some(EndpointConfig {
                    base_url,
                    chat_path: file.endpoint.chat_path.unwrap_or(defaults.chat_path),
                    model: o.model.or(file.endpoint.model).unwrap_or(defaults.model),
                    api_key,
                    timeout_secs: file.endpoint.timeout_secs.unwrap_or(defaults.timeout_secs),
                })
            }
        };
        let params = file.sampling.unwrap_or_default();
        params.validate().map_err(|e| Failure::Config(format!("sampling: {e}")))?;
        let g = file.generation;
        Ok(Self {
            endpoint,
            params,
            retry: file.retry.unwrap_or_default(),
            templates: o.templates.or(g.templates),
            out_dir: o.out_dir.or(g.out_dir).unwrap_or_else(|| PathBuf::from(".")),
            base_seed: o.seed.or(g.base_seed).unwrap_or(0),
            max_in_flight: o.max_in_flight.or(g.max_in_flight).unwrap_or(4),
            over_generation_factor: o.factor.or(g.over_generation_factor),
            max_retries_per_slot: o.retries.or(g.max_retries_per_slot),
            families,
        })
    }
}
