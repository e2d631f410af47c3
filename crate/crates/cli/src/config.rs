//! Run configuration: a TOML file with `${VAR}` environment interpolation
//! in string values, plus command-line overrides on top.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Deserialize;

use claimcheck_core::corpus::{Index, QueryFields, RetrievalConfig};
use claimcheck_core::eval::DatasetFormat;
use claimcheck_core::gateway::{
    Gateway, HttpTransport, ModelRole, RoleConfig, ScriptedBackend,
};
use claimcheck_core::strategy::PromptMode;

use crate::CliError;

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    #[serde(default)]
    pub corpus: CorpusSection,
    #[serde(default)]
    pub dataset: Option<DatasetSection>,
    #[serde(default)]
    pub retrieval: RetrievalSection,
    #[serde(default)]
    pub models: ModelsSection,
    #[serde(default)]
    pub backend: BackendSection,
    #[serde(default)]
    pub run: RunSection,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct CorpusSection {
    pub path: Option<PathBuf>,
    /// Prebuilt index artifact; takes precedence over `path`.
    pub index: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSection {
    pub path: PathBuf,
    pub format: String,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct RetrievalSection {
    pub k1: Option<f64>,
    pub b: Option<f64>,
    pub top_k: Option<usize>,
    pub query_fields: Option<String>,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ModelsSection {
    pub endpoint: Option<String>,
    /// Name of the environment variable holding the API key.
    pub api_key_env: Option<String>,
    pub retry_budget: Option<u32>,
    pub concurrency: Option<usize>,
    #[serde(default)]
    pub generator: RoleSection,
    #[serde(default)]
    pub optimizer: RoleSection,
    #[serde(default)]
    pub function_llm: RoleSection,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct RoleSection {
    pub model: Option<String>,
    pub temperature: Option<f64>,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct BackendSection {
    /// `http` (default) or `scripted`.
    pub kind: Option<String>,
    pub script: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub mode: Option<String>,
    pub demos: Option<PathBuf>,
    pub seed: Option<u64>,
    pub iterations: Option<usize>,
    pub pool_size: Option<usize>,
    pub batch_size: Option<usize>,
    pub candidate_sets: Option<usize>,
    pub demo_set_size: Option<usize>,
    pub output_dir: Option<PathBuf>,
    pub run_id: Option<String>,
}

/// Replaces `${VAR}` in every string value with the environment variable's
/// content. Unset variables become empty strings.
fn interpolate(value: &mut toml::Value) {
    match value {
        toml::Value::String(s) => {
            if s.contains("${") {
                let mut out = String::with_capacity(s.len());
                let mut rest = s.as_str();
                while let Some(start) = rest.find("${") {
                    out.push_str(&rest[..start]);
                    let tail = &rest[start + 2..];
                    match tail.find('}') {
                        Some(end) => {
                            out.push_str(&std::env::var(&tail[..end]).unwrap_or_default());
                            rest = &tail[end + 1..];
                        }
                        None => {
                            out.push_str(&rest[start..]);
                            rest = "";
                        }
                    }
                }
                out.push_str(rest);
                *s = out;
            }
        }
        toml::Value::Table(table) => {
            for (_, v) in table.iter_mut() {
                interpolate(v);
            }
        }
        toml::Value::Array(items) => {
            for v in items.iter_mut() {
                interpolate(v);
            }
        }
        _ => {}
    }
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
        let mut value: toml::Value = text
            .parse()
            .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        interpolate(&mut value);
        value
            .try_into()
            .map_err(|e| CliError::config(format!("{}: {e}", path.display())))
    }

    pub fn dataset_format(&self) -> Result<Option<DatasetFormat>, CliError> {
        match &self.dataset {
            None => Ok(None),
            Some(section) => DatasetFormat::parse(&section.format)
                .map(Some)
                .ok_or_else(|| {
                    CliError::config(format!(
                        "unknown dataset format `{}` (expected hover, feverous_s, generic)",
                        section.format
                    ))
                }),
        }
    }

    /// Retrieval parameters; `top_k` falls back to the dataset's default
    /// depth when unset.
    pub fn retrieval_config(&self) -> Result<RetrievalConfig, CliError> {
        let defaults = RetrievalConfig::default();
        let format = self.dataset_format()?;
        let query_fields = match self.retrieval.query_fields.as_deref() {
            None | Some("title_and_body") => QueryFields::TitleAndBody,
            Some("body") => QueryFields::Body,
            Some("title") => QueryFields::Title,
            Some(other) => {
                return Err(CliError::config(format!("unknown query_fields `{other}`")))
            }
        };
        let config = RetrievalConfig {
            k1: self.retrieval.k1.unwrap_or(defaults.k1),
            b: self.retrieval.b.unwrap_or(defaults.b),
            top_k: self
                .retrieval
                .top_k
                .or(format.map(DatasetFormat::default_top_k))
                .unwrap_or(defaults.top_k),
            query_fields,
        };
        config.validate().map_err(CliError::config)?;
        Ok(config)
    }

    pub fn prompt_mode(&self) -> Result<PromptMode, CliError> {
        match self.run.mode.as_deref() {
            None | Some("zs") => Ok(PromptMode::Zs),
            Some("cot") => Ok(PromptMode::Cot),
            Some("fs") => Ok(PromptMode::Fs),
            Some(other) => Err(CliError::config(format!("unknown mode `{other}`"))),
        }
    }

    /// Loads or builds the retrieval index.
    pub fn load_index(&self) -> Result<Index, CliError> {
        if let Some(artifact) = &self.corpus.index {
            return Index::load(artifact).map_err(|e| {
                CliError::data(format!("index artifact {}: {e}", artifact.display()))
            });
        }
        let Some(path) = &self.corpus.path else {
            return Err(CliError::config(
                "config needs [corpus].path or [corpus].index",
            ));
        };
        let docs = claimcheck_core::corpus::load_corpus(path)
            .map_err(|e| CliError::data(format!("corpus {}: {e}", path.display())))?;
        Index::build(docs, self.retrieval_config()?)
            .map_err(|e| CliError::data(format!("corpus {}: {e}", path.display())))
    }

    /// Builds the model gateway. Scripted backends serve every role; HTTP
    /// backends bind each role to its configured model and temperature.
    pub fn build_gateway(&self, call_log: Option<&Path>) -> Result<Gateway, CliError> {
        let mut builder = Gateway::builder();
        if let Some(budget) = self.models.retry_budget {
            builder = builder.retry_budget(budget);
        }
        if let Some(cap) = self.models.concurrency {
            builder = builder.concurrency(cap);
        }
        if let Some(path) = call_log {
            builder = builder
                .call_log_path(path)
                .map_err(|e| CliError::data(format!("call log {}: {e}", path.display())))?;
        }

        let role_config = |role: ModelRole| {
            let section = match role {
                ModelRole::Generator => &self.models.generator,
                ModelRole::Optimizer => &self.models.optimizer,
                ModelRole::FunctionLlm => &self.models.function_llm,
            };
            RoleConfig {
                model: section.model.clone().unwrap_or_else(|| "gpt-4o-mini".into()),
                temperature: section.temperature.unwrap_or(role.default_temperature()),
            }
        };

        match self.backend.kind.as_deref().unwrap_or("http") {
            "scripted" => {
                let script = self.backend.script.as_ref().ok_or_else(|| {
                    CliError::config("backend.kind = \"scripted\" needs backend.script")
                })?;
                let backend = Arc::new(ScriptedBackend::from_path(script).map_err(|e| {
                    CliError::config(format!("script {}: {e}", script.display()))
                })?);
                for role in ModelRole::ALL {
                    builder = builder.scripted_role(
                        role,
                        Arc::clone(&backend),
                        Some(role_config(role)),
                    );
                }
            }
            "http" => {
                let endpoint = self.models.endpoint.as_ref().ok_or_else(|| {
                    CliError::config("http backend needs [models].endpoint")
                })?;
                let api_key = self
                    .models
                    .api_key_env
                    .as_ref()
                    .and_then(|name| std::env::var(name).ok());
                let transport: Arc<HttpTransport> =
                    Arc::new(HttpTransport::new(endpoint.clone(), api_key));
                for role in ModelRole::ALL {
                    builder = builder.transport_role(role, transport.clone(), role_config(role));
                }
            }
            other => return Err(CliError::config(format!("unknown backend kind `{other}`"))),
        }
        Ok(builder.build())
    }

    pub fn output_dir(&self) -> PathBuf {
        self.run
            .output_dir
            .clone()
            .unwrap_or_else(|| PathBuf::from("runs"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_release_parameters() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.toml");
        std::fs::write(
            &path,
            "[dataset]\npath = \"claims.jsonl\"\nformat = \"hover\"\n",
        )
        .unwrap();
        let config = FileConfig::load(&path).unwrap();
        let retrieval = config.retrieval_config().unwrap();
        assert_eq!(retrieval.k1, 0.9);
        assert_eq!(retrieval.b, 0.4);
        assert_eq!(retrieval.top_k, 10);

        std::fs::write(
            &path,
            "[dataset]\npath = \"claims.jsonl\"\nformat = \"feverous_s\"\n",
        )
        .unwrap();
        let config = FileConfig::load(&path).unwrap();
        assert_eq!(config.retrieval_config().unwrap().top_k, 5);
    }

    #[test]
    fn env_interpolation_fills_strings() {
        std::env::set_var("CLAIMCHECK_TEST_KEYVAR", "resolved-value");
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.toml");
        std::fs::write(
            &path,
            "[models]\nendpoint = \"https://host/${CLAIMCHECK_TEST_KEYVAR}/v1\"\n",
        )
        .unwrap();
        let config = FileConfig::load(&path).unwrap();
        assert_eq!(
            config.models.endpoint.as_deref(),
            Some("https://host/resolved-value/v1")
        );
    }

    #[test]
    fn unknown_keys_are_config_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.toml");
        std::fs::write(&path, "[retrieval]\nk_one = 1.2\n").unwrap();
        assert!(FileConfig::load(&path).is_err());
    }
}
