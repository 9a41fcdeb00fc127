use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use verirank_core::judge::{JudgePromptConfig, SamplingConfig};
use verirank_core::model::content_digest;
use verirank_core::rerank::{Strategy, DEFAULT_VOTES};
use verirank_gateway::EndpointConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
    Txt,
}

impl Format {
    pub const ALL: [Format; 3] = [Format::Csv, Format::Json, Format::Txt];

    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
            Format::Txt => "txt",
        }
    }
}

/// Where chat and embedding requests go.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TransportKind {
    #[default]
    Http,
    /// Deterministic in-process responder; never touches the network.
    Synthetic,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    /// Built-in combinational interpreter; testbenches are JSON stimulus tables.
    #[default]
    Mini,
    /// Icarus Verilog (`iverilog` + `vvp`).
    Icarus,
    /// Command templates from `[external]`.
    External,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExternalSettings {
    pub compile_template: Option<String>,
    pub run_template: String,
    pub failure_pattern: Option<String>,
    pub timeout_secs: u64,
}

impl Default for ExternalSettings {
    fn default() -> Self {
        ExternalSettings {
            compile_template: None,
            run_template: String::new(),
            failure_pattern: None,
            timeout_secs: 10,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorSettings {
    pub sampling: SamplingConfig,
    /// Samples per problem; defaults to `k`.
    pub n: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Endpoints {
    pub judge: EndpointConfig,
    pub embedder: EndpointConfig,
    pub generator: EndpointConfig,
    /// Secondary teacher for distillation.
    pub teacher: EndpointConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub problems: PathBuf,
    pub candidates: Option<PathBuf>,
    pub generator: Option<GeneratorSettings>,
    /// Ground-truth labels; without them problems are labeled by executing
    /// their testbench on the backend.
    pub labels: Option<PathBuf>,
    pub strategy: Strategy,
    pub k: usize,
    pub m: usize,
    pub backend: BackendKind,
    pub external: ExternalSettings,
    pub transport: TransportKind,
    /// Answer only from the cache; a miss is an error.
    pub offline: bool,
    pub endpoints: Endpoints,
    pub judge: JudgePromptConfig,
    /// Prompt settings of the secondary distillation teacher.
    pub teacher: JudgePromptConfig,
    pub tests_per_candidate: usize,
    pub seeds: BTreeMap<String, u64>,
    pub out_dir: PathBuf,
    /// Defaults to `<out_dir>/cache`.
    pub cache_dir: Option<PathBuf>,
    pub formats: Vec<Format>,
    pub workers: usize,
    /// Row label in reports; defaults to the candidates' generator field.
    pub model_label: Option<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            problems: PathBuf::new(),
            candidates: None,
            generator: None,
            labels: None,
            strategy: Strategy::Discriminator,
            k: 5,
            m: DEFAULT_VOTES,
            backend: BackendKind::Mini,
            external: ExternalSettings::default(),
            transport: TransportKind::Http,
            offline: false,
            endpoints: Endpoints::default(),
            judge: JudgePromptConfig::default(),
            teacher: JudgePromptConfig {
                model: "teacher".into(),
                ..JudgePromptConfig::default()
            },
            tests_per_candidate: 5,
            seeds: BTreeMap::from([("random".to_string(), 0)]),
            out_dir: PathBuf::from("run"),
            cache_dir: None,
            formats: Format::ALL.to_vec(),
            workers: 4,
            model_label: None,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg: RunConfig = toml::from_str(&text).map_err(|e| ConfigError::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        cfg.resolve_relative_to(path.parent().unwrap_or(Path::new("")));
        Ok(cfg)
    }

    /// Makes relative paths relative to the config file's directory.
    pub fn resolve_relative_to(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() && !p.as_os_str().is_empty() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.problems);
        fix(&mut self.out_dir);
        for p in [&mut self.candidates, &mut self.labels, &mut self.cache_dir]
            .into_iter()
            .flatten()
        {
            fix(p);
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |m: &str| Err(ConfigError::Invalid(m.to_string()));
        if self.problems.as_os_str().is_empty() {
            return invalid("`problems` is required");
        }
        match (&self.candidates, &self.generator) {
            (Some(_), Some(_)) => return invalid("set either `candidates` or `[generator]`, not both"),
            (None, None) => return invalid("one of `candidates` or `[generator]` is required"),
            _ => {}
        }
        if self.k == 0 {
            return invalid("`k` must be at least 1");
        }
        if self.m == 0 {
            return invalid("`m` must be at least 1");
        }
        if self.workers == 0 {
            return invalid("`workers` must be at least 1");
        }
        if self.formats.is_empty() {
            return invalid("`formats` must not be empty");
        }
        if let Some(n) = self.generator.as_ref().and_then(|g| g.n) {
            if n < self.k {
                return invalid("`generator.n` must be at least `k`");
            }
        }
        if self.strategy == Strategy::CodeT && self.tests_per_candidate == 0 {
            return invalid("`tests_per_candidate` must be at least 1 for codet");
        }
        if self.backend == BackendKind::External && self.external.run_template.is_empty() {
            return invalid("backend `external` needs `external.run_template`");
        }
        if let Some(p) = &self.external.failure_pattern {
            regex::Regex::new(p).map_err(|e| ConfigError::Invalid(format!("external.failure_pattern: {e}")))?;
        }
        Ok(())
    }

    pub fn cache_dir(&self) -> PathBuf {
        self.cache_dir.clone().unwrap_or_else(|| self.out_dir.join("cache"))
    }

    pub fn seed(&self, name: &str) -> u64 {
        self.seeds.get(name).copied().unwrap_or(0)
    }

    /// Digest over the settings that shape decisions. Output locations and
    /// worker count are excluded so relocated reruns share an identity.
    pub fn digest(&self) -> String {
        let mut canonical = serde_json::to_value(self).expect("serializable config");
        if let Some(obj) = canonical.as_object_mut() {
            for key in ["out_dir", "cache_dir", "formats", "workers", "offline"] {
                obj.remove(key);
            }
        }
        content_digest(canonical.to_string().as_bytes())
    }
}
