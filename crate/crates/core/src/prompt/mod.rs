//! Extraction prompt templates and their output grammars.
//!
//! The twelve templates live in a JSON catalog shipped with the crate
//! (`data/prompt_catalog.json`). Each record names an instruction, an output
//! grammar, the modes it runs in and the demonstrations it shows. A record
//! running in separate cause/effect modes expands into one
//! [`PromptTemplate`] per mode.

mod parse;

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::story::{Direction, Story};

pub use parse::{
    dimension_histogram, parse_chain_list, parse_edge_list, parse_edges, parse_output,
    parse_statements, statements_from_graph, Diagnostic, DiagnosticsReport, Parsed, ParsedOutput,
    MIN_TOKEN_OVERLAP,
};

const BUILTIN_CATALOG: &str = include_str!("../../data/prompt_catalog.json");

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("catalog json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("reading catalog: {0}")]
    Io(#[from] std::io::Error),
    #[error("catalog is missing template `{0}`")]
    MissingTemplate(TemplateName),
    #[error("template `{0}` is listed twice")]
    DuplicateTemplate(TemplateName),
    #[error("template `{template}` references unknown demonstration `{demo}`")]
    UnknownDemonstration {
        template: TemplateName,
        demo: String,
    },
    #[error("template `{0}` has no demonstrations")]
    NoDemonstrations(TemplateName),
    #[error("template `{0}` has no modes")]
    NoModes(TemplateName),
    #[error("template `{template}` does not run in mode {mode}")]
    ModeUnavailable {
        template: TemplateName,
        mode: PromptMode,
    },
    #[error("unknown snippet `@{0}`")]
    UnknownSnippet(String),
    #[error("demonstration `{demo}` is invalid: {reason}")]
    BadDemonstration { demo: String, reason: String },
}

/// The twelve extraction prompt variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateName {
    Basic,
    Multifactorial,
    Interventionist,
    Probabilistic,
    Counterfactual,
    NoExplicitDefinition,
    EventChain,
    EventGraph,
    NaturalLanguageOutput,
    ChatgptInstruction,
    ChatgptFormat,
    CuratedExamples,
}

impl TemplateName {
    pub const ALL: [TemplateName; 12] = [
        TemplateName::Basic,
        TemplateName::Multifactorial,
        TemplateName::Interventionist,
        TemplateName::Probabilistic,
        TemplateName::Counterfactual,
        TemplateName::NoExplicitDefinition,
        TemplateName::EventChain,
        TemplateName::EventGraph,
        TemplateName::NaturalLanguageOutput,
        TemplateName::ChatgptInstruction,
        TemplateName::ChatgptFormat,
        TemplateName::CuratedExamples,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TemplateName::Basic => "basic",
            TemplateName::Multifactorial => "multifactorial",
            TemplateName::Interventionist => "interventionist",
            TemplateName::Probabilistic => "probabilistic",
            TemplateName::Counterfactual => "counterfactual",
            TemplateName::NoExplicitDefinition => "no_explicit_definition",
            TemplateName::EventChain => "event_chain",
            TemplateName::EventGraph => "event_graph",
            TemplateName::NaturalLanguageOutput => "natural_language_output",
            TemplateName::ChatgptInstruction => "chatgpt_instruction",
            TemplateName::ChatgptFormat => "chatgpt_format",
            TemplateName::CuratedExamples => "curated_examples",
        }
    }
}

impl fmt::Display for TemplateName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("unknown template `{0}`")]
pub struct UnknownTemplate(pub String);

impl FromStr for TemplateName {
    type Err = UnknownTemplate;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TemplateName::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| UnknownTemplate(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputGrammar {
    EdgeList,
    ChainList,
    StatementList,
    NaturalLanguage,
    FreeFormat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptMode {
    Joint,
    CauseOnly,
    EffectOnly,
}

impl PromptMode {
    fn keeps(self, direction: Direction) -> bool {
        match self {
            PromptMode::Joint => true,
            PromptMode::CauseOnly => direction == Direction::Cause,
            PromptMode::EffectOnly => direction == Direction::Effect,
        }
    }
}

impl fmt::Display for PromptMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PromptMode::Joint => "joint",
            PromptMode::CauseOnly => "cause_only",
            PromptMode::EffectOnly => "effect_only",
        })
    }
}

#[derive(Debug, Clone, Deserialize)]
struct CatalogFile {
    templates: Vec<TemplateRecord>,
    #[serde(default)]
    snippets: BTreeMap<String, String>,
    demonstrations: Vec<DemoRecord>,
}

/// One catalog row.
#[derive(Debug, Clone, Deserialize)]
pub struct TemplateRecord {
    pub name: TemplateName,
    pub instruction: String,
    pub grammar: OutputGrammar,
    pub modes: Vec<PromptMode>,
    pub demonstrations: Vec<String>,
    #[serde(default = "default_node_label")]
    pub node_label: String,
    #[serde(default = "default_target_preamble")]
    pub target_preamble: String,
}

fn default_node_label() -> String {
    "Event".into()
}

fn default_target_preamble() -> String {
    "Input:".into()
}

#[derive(Debug, Clone, Deserialize)]
struct DemoStatement {
    focal: usize,
    dimension: u8,
    counterpart: String,
    line: String,
    #[serde(default)]
    natural: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
struct DemoRecord {
    id: String,
    sentences: Vec<String>,
    edges: Vec<(usize, usize)>,
    chains: Vec<String>,
    statements: Vec<DemoStatement>,
    #[serde(default)]
    free_format: Option<String>,
}

impl DemoRecord {
    fn validate(&self) -> Result<(), CatalogError> {
        let bad = |reason: String| CatalogError::BadDemonstration {
            demo: self.id.clone(),
            reason,
        };
        if self.sentences.is_empty() {
            return Err(bad("no sentences".into()));
        }
        let n = self.sentences.len();
        if let Some(&(a, b)) = self
            .edges
            .iter()
            .find(|&&(a, b)| a >= n || b >= n || a == b)
        {
            return Err(bad(format!("edge ({a}, {b}) is invalid")));
        }
        for st in &self.statements {
            if st.focal >= n || !(1..=10).contains(&st.dimension) {
                return Err(bad(format!(
                    "statement `{}` has bad focal/dimension",
                    st.line
                )));
            }
        }
        Ok(())
    }

    fn output(&self, grammar: OutputGrammar, mode: PromptMode) -> String {
        let kept = || {
            self.statements.iter().filter(move |s| {
                let dir = if s.dimension <= 5 {
                    Direction::Cause
                } else {
                    Direction::Effect
                };
                mode.keeps(dir)
            })
        };
        let mut out = String::new();
        match grammar {
            OutputGrammar::EdgeList => {
                for (k, (a, b)) in self.edges.iter().enumerate() {
                    out.push_str(&format!("Edge {k}: (Node {a} -> Node {b})\n"));
                }
            }
            OutputGrammar::ChainList => {
                for (k, c) in self.chains.iter().enumerate() {
                    out.push_str(&format!("Chain {k}: {c}\n"));
                }
            }
            OutputGrammar::StatementList => {
                for s in kept() {
                    out.push_str(&s.line);
                    out.push('\n');
                }
            }
            OutputGrammar::NaturalLanguage => {
                for s in kept() {
                    let line = s.natural.clone().unwrap_or_else(|| naturalize(&s.line));
                    out.push_str(&line);
                    out.push('\n');
                }
            }
            OutputGrammar::FreeFormat => match (&self.free_format, mode) {
                (Some(text), PromptMode::Joint) => {
                    out.push_str(text.trim_end());
                    out.push('\n');
                }
                _ => out.push_str(&self.free_format_from_statements(mode)),
            },
        }
        out
    }

    fn free_format_from_statements(&self, mode: PromptMode) -> String {
        let mut out = String::new();
        for (i, sentence) in self.sentences.iter().enumerate() {
            let mut fields = Vec::new();
            for (label, dim) in [
                ("Motivation", 2),
                ("Cause", 1),
                ("Effect", 6),
                ("Emotional Effect", 7),
            ] {
                let dir = if dim <= 5 {
                    Direction::Cause
                } else {
                    Direction::Effect
                };
                if !mode.keeps(dir) {
                    continue;
                }
                for s in self
                    .statements
                    .iter()
                    .filter(|s| s.focal == i && s.dimension == dim)
                {
                    fields.push(format!("{label}: {}", s.counterpart));
                }
            }
            if fields.is_empty() {
                continue;
            }
            out.push_str(&format!("Original Event ID: {i}\n"));
            out.push_str(&format!("Event: {}\n", sentence.trim_end_matches('.')));
            for f in fields {
                out.push_str(&f);
                out.push('\n');
            }
        }
        out
    }
}

fn naturalize(line: &str) -> String {
    [
        (">Causes/Enables>", "causes"),
        (">Results in>", "results in"),
        (">Enables>", "enables"),
        (">Causes>", "causes"),
        (">Motivates>", "causes"),
    ]
    .iter()
    .fold(line.to_string(), |acc, (from, to)| acc.replace(from, to))
}

/// Worked example shown to the model before the target story.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Demonstration {
    pub id: String,
    pub sentences: Vec<String>,
    pub output: String,
}

/// A template instantiated for one mode, ready to render.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    pub name: TemplateName,
    pub mode: PromptMode,
    pub instruction: String,
    pub demonstrations: Vec<Demonstration>,
    pub grammar: OutputGrammar,
    pub node_label: String,
    pub target_preamble: String,
}

impl PromptTemplate {
    /// Identifier used in caches, detection tables and diagnostics, e.g.
    /// `counterfactual` or `counterfactual/cause_only`.
    pub fn label(&self) -> String {
        match self.mode {
            PromptMode::Joint => self.name.to_string(),
            m => format!("{}/{m}", self.name),
        }
    }

    /// The same template keeping only its first demonstration; used for
    /// stories from outside the annotated corpus.
    pub fn single_demonstration(mut self) -> Self {
        self.demonstrations.truncate(1);
        self
    }

    pub fn render(&self, story: &Story) -> PromptRendering {
        let label = &self.node_label;
        let mut text = String::new();
        text.push_str(&self.instruction);
        text.push('\n');
        for demo in &self.demonstrations {
            text.push_str("Example Input:\n");
            for (i, s) in demo.sentences.iter().enumerate() {
                text.push_str(&format!("{label} {i}: {s}\n"));
            }
            text.push_str("Example Output:\n");
            text.push_str(&demo.output);
        }
        text.push_str(&self.target_preamble);
        text.push('\n');
        for (i, s) in story.sentences().iter().enumerate() {
            text.push_str(&format!("{label} {i}: {s}\n"));
        }
        text.push_str("\nOutput:\n");
        PromptRendering {
            template_name: self.label(),
            story_id: story.id().to_string(),
            text,
        }
    }
}

/// Full message text for one (template, story) pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptRendering {
    pub template_name: String,
    pub story_id: String,
    pub text: String,
}

/// Convenience wrapper around [`PromptTemplate::render`].
pub fn render(template: &PromptTemplate, story: &Story) -> PromptRendering {
    template.render(story)
}

#[derive(Debug, Clone)]
pub struct PromptCatalog {
    records: BTreeMap<TemplateName, TemplateRecord>,
    demos: BTreeMap<String, DemoRecord>,
}

impl PromptCatalog {
    pub fn builtin() -> Self {
        Self::from_json(BUILTIN_CATALOG).expect("builtin catalog is valid")
    }

    pub fn load(path: &Path) -> Result<Self, CatalogError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn from_json(json: &str) -> Result<Self, CatalogError> {
        let file: CatalogFile = serde_json::from_str(json)?;
        let demos: BTreeMap<String, DemoRecord> = file
            .demonstrations
            .into_iter()
            .map(|d| (d.id.clone(), d))
            .collect();
        for d in demos.values() {
            d.validate()?;
        }
        let mut records = BTreeMap::new();
        for mut rec in file.templates {
            rec.instruction = expand_snippets(&rec.instruction, &file.snippets, 0)?;
            if rec.demonstrations.is_empty() {
                return Err(CatalogError::NoDemonstrations(rec.name));
            }
            if rec.modes.is_empty() {
                return Err(CatalogError::NoModes(rec.name));
            }
            if let Some(missing) = rec.demonstrations.iter().find(|d| !demos.contains_key(*d)) {
                return Err(CatalogError::UnknownDemonstration {
                    template: rec.name,
                    demo: missing.clone(),
                });
            }
            let name = rec.name;
            if records.insert(name, rec).is_some() {
                return Err(CatalogError::DuplicateTemplate(name));
            }
        }
        if let Some(missing) = TemplateName::ALL
            .into_iter()
            .find(|t| !records.contains_key(t))
        {
            return Err(CatalogError::MissingTemplate(missing));
        }
        Ok(PromptCatalog { records, demos })
    }

    pub fn record(&self, name: TemplateName) -> &TemplateRecord {
        &self.records[&name]
    }

    pub fn template(
        &self,
        name: TemplateName,
        mode: PromptMode,
    ) -> Result<PromptTemplate, CatalogError> {
        let rec = self.record(name);
        if !rec.modes.contains(&mode) {
            return Err(CatalogError::ModeUnavailable {
                template: name,
                mode,
            });
        }
        let demonstrations = rec
            .demonstrations
            .iter()
            .map(|id| {
                let d = &self.demos[id];
                Demonstration {
                    id: d.id.clone(),
                    sentences: d.sentences.clone(),
                    output: d.output(rec.grammar, mode),
                }
            })
            .collect();
        Ok(PromptTemplate {
            name,
            mode,
            instruction: rec.instruction.clone(),
            demonstrations,
            grammar: rec.grammar,
            node_label: rec.node_label.clone(),
            target_preamble: rec.target_preamble.clone(),
        })
    }

    /// Every mode of a template, in catalog order.
    pub fn templates(&self, name: TemplateName) -> Vec<PromptTemplate> {
        self.record(name)
            .modes
            .iter()
            .map(|&m| self.template(name, m).expect("mode listed in record"))
            .collect()
    }
}

fn expand_snippets(
    text: &str,
    snippets: &BTreeMap<String, String>,
    depth: usize,
) -> Result<String, CatalogError> {
    let re = Regex::new(r"@([a-z_]+)").expect("static regex");
    if depth > 8 || !re.is_match(text) {
        return Ok(text.to_string());
    }
    let mut err = None;
    let replaced = re.replace_all(text, |caps: &regex::Captures<'_>| {
        match snippets.get(&caps[1]) {
            Some(s) => s.clone(),
            None => {
                err.get_or_insert_with(|| CatalogError::UnknownSnippet(caps[1].to_string()));
                String::new()
            }
        }
    });
    if let Some(e) = err {
        return Err(e);
    }
    expand_snippets(&replaced, snippets, depth + 1)
}
