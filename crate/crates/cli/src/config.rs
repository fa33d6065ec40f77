//! Run configuration. Each setting resolves as flag, then environment, then
//! config file, then built-in default.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::Args;
use serde::Deserialize;
use storycause::alignment::{ContextConfig, ContextMode, Decoder, DEFAULT_BLEND};
use storycause::corpus::ColumnMapping;
use storycause::ensemble::{Comparator, EnsembleConfig, DEFAULT_PRIORITY};
use storycause::gateway::{GatewayMode, DEFAULT_MODEL};
use storycause::prompt::TemplateName;

use crate::error::{CliError, CliResult};

pub const DEFAULT_API_URL: &str = "https://api.openai.com/v1/chat/completions";

/// Settings shared by every command.
#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// TOML config file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Gateway mode: live, replay or stub.
    #[arg(long, global = true)]
    pub mode: Option<String>,
    #[arg(long, global = true)]
    pub model: Option<String>,
    #[arg(long, global = true)]
    pub temperature: Option<f64>,
    #[arg(long, global = true)]
    pub cache_dir: Option<PathBuf>,
    /// Maximum requests in flight.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Output directory for reports.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Prompt template to run; repeatable. Defaults to all twelve.
    #[arg(long = "template", global = true)]
    pub templates: Vec<String>,
    /// Ensemble vote threshold n.
    #[arg(long, global = true)]
    pub threshold_n: Option<usize>,
    /// strictly_greater or at_least.
    #[arg(long, global = true)]
    pub comparator: Option<String>,
    /// Temporal context size.
    #[arg(long, global = true)]
    pub m: Option<usize>,
    /// Causal context size.
    #[arg(long, global = true)]
    pub c: Option<usize>,
    /// Alignment similarity threshold.
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub t: Option<f64>,
    /// md or dtw.
    #[arg(long, global = true)]
    pub decoder: Option<String>,
    /// none, temporal or causal_temporal.
    #[arg(long, global = true)]
    pub context: Option<String>,
    /// Context blend weight.
    #[arg(long, global = true)]
    pub blend: Option<f64>,
    /// Human-rating cut for the filtered Kendall column.
    #[arg(long, global = true)]
    pub min_stars: Option<f64>,
    /// Make the human-rating cut exclusive.
    #[arg(long, global = true)]
    pub exclusive_filter: bool,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct FileConfig {
    provider: ProviderSection,
    ensemble: EnsembleSection,
    context: ContextSection,
    alignment: AlignmentSection,
    scoring: ScoringSection,
    extract: ExtractSection,
    glucose: Option<ColumnMapping>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ProviderSection {
    mode: Option<String>,
    model: Option<String>,
    temperature: Option<f64>,
    cache_dir: Option<PathBuf>,
    api_url: Option<String>,
    timeout_secs: Option<u64>,
    workers: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct EnsembleSection {
    threshold_n: Option<usize>,
    comparator: Option<String>,
    participating: Option<Vec<String>>,
    priority: Option<Vec<String>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ContextSection {
    m: Option<usize>,
    c: Option<usize>,
    mode: Option<String>,
    blend: Option<f64>,
    warmup: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct AlignmentSection {
    t: Option<f64>,
    decoder: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ScoringSection {
    min_stars: Option<f64>,
    inclusive: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ExtractSection {
    templates: Option<Vec<String>>,
    catalog: Option<PathBuf>,
    out: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub mode: GatewayMode,
    pub model: String,
    pub temperature: f64,
    pub cache_dir: PathBuf,
    pub api_url: String,
    pub api_key: Option<String>,
    pub timeout: Duration,
    pub workers: usize,
    pub out: PathBuf,
    pub catalog: Option<PathBuf>,
    pub templates: Vec<TemplateName>,
    pub ensemble: EnsembleConfig,
    pub context: ContextConfig,
    pub context_mode: ContextMode,
    pub blend: f64,
    pub warmup: bool,
    pub t: f64,
    pub decoder: Decoder,
    pub min_stars: f64,
    pub inclusive: bool,
    pub mapping: ColumnMapping,
}

/// Lookup for environment variables, injectable for tests.
pub type Env<'a> = &'a dyn Fn(&str) -> Option<String>;

pub fn process_env(name: &str) -> Option<String> {
    std::env::var(name).ok().filter(|v| !v.is_empty())
}

fn parse<T: std::str::FromStr>(what: &str, raw: &str) -> CliResult<T>
where
    T::Err: std::fmt::Display,
{
    raw.parse()
        .map_err(|e| CliError::config(format!("{what}: {e}")))
}

fn templates(what: &str, names: &[String]) -> CliResult<Vec<TemplateName>> {
    names
        .iter()
        .map(|n| {
            n.parse::<TemplateName>()
                .map_err(|_| CliError::config(format!("{what}: unknown template `{n}`")))
        })
        .collect()
}

fn read_file_config(path: &Path) -> CliResult<FileConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::config(format!("reading {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))
}

impl RunConfig {
    pub fn resolve(flags: &Flags, env: Env<'_>) -> CliResult<RunConfig> {
        let file = match &flags.config {
            Some(p) => read_file_config(p)?,
            None => FileConfig::default(),
        };
        let p = &file.provider;
        let mode = match flags
            .mode
            .clone()
            .or_else(|| env("STORYCAUSE_MODE"))
            .or_else(|| p.mode.clone())
        {
            Some(m) => parse("mode", &m)?,
            None => GatewayMode::Replay,
        };
        let model = flags
            .model
            .clone()
            .or_else(|| env("STORYCAUSE_MODEL"))
            .or_else(|| p.model.clone());
        let cache_dir = flags
            .cache_dir
            .clone()
            .or_else(|| env("STORYCAUSE_CACHE_DIR").map(PathBuf::from));
        let api_url = env("STORYCAUSE_API_URL")
            .or_else(|| p.api_url.clone())
            .unwrap_or_else(|| DEFAULT_API_URL.into());

        let e = &file.ensemble;
        let participating = match &e.participating {
            Some(names) => templates("ensemble.participating", names)?
                .into_iter()
                .collect(),
            None => TemplateName::ALL.into_iter().collect::<BTreeSet<_>>(),
        };
        let priority = match &e.priority {
            Some(names) => templates("ensemble.priority", names)?,
            None => DEFAULT_PRIORITY.to_vec(),
        };
        let comparator = match flags.comparator.as_ref().or(e.comparator.as_ref()) {
            Some(c) => parse::<Comparator>("comparator", c)?,
            None => Comparator::StrictlyGreater,
        };
        let ensemble = EnsembleConfig {
            threshold: flags.threshold_n.or(e.threshold_n).unwrap_or(4),
            comparator,
            participating,
            priority,
        };
        ensemble
            .validate()
            .map_err(|e| CliError::config(e.to_string()))?;

        let x = &file.extract;
        let templates = if !flags.templates.is_empty() {
            templates("--template", &flags.templates)?
        } else if let Some(names) = &x.templates {
            templates("extract.templates", names)?
        } else {
            TemplateName::ALL.to_vec()
        };

        let cx = &file.context;
        let context_mode = match flags.context.as_ref().or(cx.mode.as_ref()) {
            Some(m) => parse("context", m)?,
            None => ContextMode::CausalTemporal,
        };
        let decoder = match flags.decoder.as_ref().or(file.alignment.decoder.as_ref()) {
            Some(d) => parse("decoder", d)?,
            None => Decoder::Dtw,
        };
        let s = &file.scoring;
        let config = RunConfig {
            mode,
            model: model.unwrap_or_else(|| DEFAULT_MODEL.into()),
            temperature: flags.temperature.or(p.temperature).unwrap_or(0.0),
            cache_dir: cache_dir
                .or_else(|| p.cache_dir.clone())
                .unwrap_or_else(|| PathBuf::from("cache")),
            api_url,
            api_key: env("LLM_API_KEY"),
            timeout: Duration::from_secs(p.timeout_secs.unwrap_or(120)),
            workers: flags.workers.or(p.workers).unwrap_or(4),
            out: flags
                .out
                .clone()
                .or_else(|| x.out.clone())
                .unwrap_or_else(|| PathBuf::from("out")),
            catalog: x.catalog.clone(),
            templates,
            ensemble,
            context: ContextConfig {
                m: flags.m.or(cx.m).unwrap_or(5),
                c: flags.c.or(cx.c).unwrap_or(5),
            },
            context_mode,
            blend: flags.blend.or(cx.blend).unwrap_or(DEFAULT_BLEND),
            warmup: cx.warmup.unwrap_or(true),
            t: flags.t.or(file.alignment.t).unwrap_or(0.5),
            decoder,
            min_stars: flags.min_stars.or(s.min_stars).unwrap_or(3.0),
            inclusive: !flags.exclusive_filter && s.inclusive.unwrap_or(true),
            mapping: file.glucose.unwrap_or_default(),
        };
        config.validate()?;
        Ok(config)
    }

    fn validate(&self) -> CliResult<()> {
        if !self.temperature.is_finite() || self.temperature < 0.0 {
            return Err(CliError::config(format!(
                "temperature {} must be a non-negative number",
                self.temperature
            )));
        }
        if self.workers == 0 {
            return Err(CliError::config("workers must be at least 1"));
        }
        if !self.t.is_finite() {
            return Err(CliError::config("threshold t must be finite"));
        }
        if !(0.0..1.0).contains(&self.blend) {
            return Err(CliError::config(format!(
                "blend {} outside [0, 1)",
                self.blend
            )));
        }
        if self.mode == GatewayMode::Live && self.api_key.is_none() {
            return Err(CliError::config("live mode needs LLM_API_KEY"));
        }
        self.mapping
            .validate()
            .map_err(|e| CliError::config(e.to_string()))?;
        Ok(())
    }
}
