//! Run configuration file: one JSON document holding everything a command
//! needs beyond its flags. Unknown keys are rejected and a schema version is
//! required so stale configs fail loudly.

use divse_core::compose::PromptMode;
use divse_core::gateway::{
    BackendMode, Gateway, LiveConfig, LiveGateway, PriceTable, RecordingGateway, ReplayGateway,
    ScriptedGateway, TranscriptStore,
};
use divse_core::runner::RunConfig;
use divse_core::strategy::DiscoveryConfig;
use divse_core::task::TaskId;
use serde::Deserialize;
use std::path::{Path, PathBuf};

use crate::{CliError, ExitKind};

pub const CONFIG_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfigFile {
    pub schema_version: u32,
    pub task: TaskId,
    pub mode: PromptMode,
    pub model_id: String,
    pub prices: PricesEntry,
    pub dataset: PathBuf,
    #[serde(default)]
    pub bundle: Option<PathBuf>,
    pub backend: BackendEntry,
    #[serde(default)]
    pub sc_samples: Option<u32>,
    #[serde(default)]
    pub ensemble_size: Option<usize>,
    #[serde(default)]
    pub item_limit: Option<usize>,
    #[serde(default)]
    pub concurrency: Option<usize>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub few_shot: Option<bool>,
    #[serde(default)]
    pub endpoint: Option<String>,
    #[serde(default)]
    pub api_key_env: Option<String>,
    #[serde(default)]
    pub discovery: Option<DiscoveryEntry>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PricesEntry {
    #[serde(default)]
    pub model_id: Option<String>,
    pub input_usd_per_1k: serde_json::Value,
    pub output_usd_per_1k: serde_json::Value,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendEntry {
    pub mode: BackendMode,
    #[serde(default)]
    pub transcripts: Option<PathBuf>,
    #[serde(default)]
    pub script: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscoveryEntry {
    #[serde(default)]
    pub approaches_per_call: Option<u32>,
    #[serde(default)]
    pub calls: Option<u32>,
    #[serde(default)]
    pub keep_approaches: Option<usize>,
    #[serde(default)]
    pub keep_personas: Option<usize>,
    #[serde(default)]
    pub validation_size: Option<usize>,
}

/// One scripted-backend rule in a script file.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptEntryFile {
    #[serde(default)]
    pub contains: Option<String>,
    pub replies: Vec<String>,
}

fn usage(message: impl Into<String>) -> CliError {
    CliError {
        kind: ExitKind::Usage,
        message: message.into(),
    }
}

impl RunConfigFile {
    pub fn load(path: &Path) -> Result<RunConfigFile, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
        let config: RunConfigFile = serde_json::from_str(&text)
            .map_err(|e| usage(format!("invalid config {}: {e}", path.display())))?;
        if config.schema_version != CONFIG_SCHEMA_VERSION {
            return Err(usage(format!(
                "config schema version {} unsupported (expected {CONFIG_SCHEMA_VERSION})",
                config.schema_version
            )));
        }
        Ok(config)
    }

    pub fn price_table(&self) -> Result<PriceTable, CliError> {
        let rate = |value: &serde_json::Value, which: &str| -> Result<String, CliError> {
            match value {
                serde_json::Value::String(s) => Ok(s.clone()),
                serde_json::Value::Number(n) => Ok(n.to_string()),
                other => Err(usage(format!(
                    "{which} price must be a string or number, got {other}"
                ))),
            }
        };
        let model = self
            .prices
            .model_id
            .clone()
            .unwrap_or_else(|| self.model_id.clone());
        PriceTable::from_rates(
            model,
            &rate(&self.prices.input_usd_per_1k, "input")?,
            &rate(&self.prices.output_usd_per_1k, "output")?,
        )
        .map_err(|e| usage(format!("bad price table: {e}")))
    }

    pub fn run_config(&self) -> Result<RunConfig, CliError> {
        let mut config = RunConfig::new(self.task, self.mode, self.model_id.clone());
        config.prices = self.price_table()?;
        if let Some(s) = self.sc_samples {
            config.sc_samples = s;
        }
        config.ensemble_size = self.ensemble_size;
        config.item_limit = self.item_limit;
        config.concurrency = self.concurrency.unwrap_or(1);
        config.seed = self.seed.unwrap_or(0);
        config.few_shot = self.few_shot.unwrap_or(false);
        Ok(config)
    }

    pub fn discovery_config(&self) -> DiscoveryConfig {
        let mut config = DiscoveryConfig::default();
        if let Some(d) = &self.discovery {
            if let Some(v) = d.approaches_per_call {
                config.approaches_per_call = v;
            }
            if let Some(v) = d.calls {
                config.calls = v;
            }
            if let Some(v) = d.keep_approaches {
                config.keep_approaches = v;
            }
            if let Some(v) = d.keep_personas {
                config.keep_personas = v;
            }
            if let Some(v) = d.validation_size {
                config.validation_size = v;
            }
        }
        config
    }

    /// Build the configured backend. Record and replay need a transcript
    /// directory; scripted needs a script file; live needs the API key in
    /// the environment (never on the command line).
    pub fn gateway(&self) -> Result<Box<dyn Gateway>, CliError> {
        let live = || -> Result<LiveGateway, CliError> {
            let mut config = LiveConfig::default();
            if let Some(endpoint) = &self.endpoint {
                config.endpoint = endpoint.clone();
            }
            if let Some(var) = &self.api_key_env {
                config.api_key_env = var.clone();
            }
            LiveGateway::new(config).map_err(|e| CliError {
                kind: ExitKind::Backend,
                message: e.to_string(),
            })
        };
        let transcripts = |purpose: &str| -> Result<TranscriptStore, CliError> {
            let dir = self.backend.transcripts.as_ref().ok_or_else(|| {
                usage(format!(
                    "backend mode {purpose} needs a \"transcripts\" directory"
                ))
            })?;
            TranscriptStore::open(dir).map_err(|e| CliError {
                kind: ExitKind::Backend,
                message: e.to_string(),
            })
        };
        match self.backend.mode {
            BackendMode::Live => Ok(Box::new(live()?)),
            BackendMode::Record => Ok(Box::new(RecordingGateway::new(
                live()?,
                transcripts("record")?,
            ))),
            BackendMode::Replay => Ok(Box::new(ReplayGateway::new(transcripts("replay")?))),
            BackendMode::Scripted => {
                let path = self
                    .backend
                    .script
                    .as_ref()
                    .ok_or_else(|| usage("backend mode scripted needs a \"script\" file"))?;
                let text = std::fs::read_to_string(path)
                    .map_err(|e| usage(format!("cannot read script {}: {e}", path.display())))?;
                let entries: Vec<ScriptEntryFile> = serde_json::from_str(&text)
                    .map_err(|e| usage(format!("invalid script {}: {e}", path.display())))?;
                let mut gateway = ScriptedGateway::new();
                for entry in entries {
                    if entry.replies.is_empty() {
                        return Err(usage("script entries need at least one reply"));
                    }
                    match entry.contains {
                        Some(needle) => gateway.push_sequence(needle, entry.replies),
                        None => {
                            for reply in entry.replies {
                                gateway.push_default(reply);
                            }
                        }
                    }
                }
                Ok(Box::new(gateway))
            }
        }
    }
}
