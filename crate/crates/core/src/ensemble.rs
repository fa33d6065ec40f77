//! Voting over the detections of several prompt variants.
//!
//! A (sentence, dimension) cell is kept when enough participating prompts
//! detected something there; the kept statement is the candidate of the
//! highest-priority prompt among the detectors.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::prompt::TemplateName;
use crate::story::{CausalStatement, Dimension};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EnsembleError {
    #[error("priority list does not cover participating prompt `{0}`")]
    PriorityGap(TemplateName),
    #[error("unknown comparator `{0}` (expected strictly_greater or at_least)")]
    UnknownComparator(String),
    #[error("detection table line {line}: {message}")]
    Table { line: usize, message: String },
}

pub type Cell = (usize, Dimension);

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DetectionTable {
    pub story_id: String,
    cells: BTreeMap<Cell, BTreeMap<TemplateName, CausalStatement>>,
}

impl DetectionTable {
    pub fn new(story_id: impl Into<String>) -> Self {
        DetectionTable {
            story_id: story_id.into(),
            cells: BTreeMap::new(),
        }
    }

    /// Records `prompt`'s candidate for the statement's cell. The first
    /// candidate per (prompt, cell) wins; returns whether it was stored.
    pub fn insert(&mut self, prompt: TemplateName, statement: CausalStatement) -> bool {
        let cell = (statement.focal_index, statement.dimension);
        let slot = self.cells.entry(cell).or_default();
        if slot.contains_key(&prompt) {
            return false;
        }
        slot.insert(prompt, statement);
        true
    }

    pub fn cells(&self) -> &BTreeMap<Cell, BTreeMap<TemplateName, CausalStatement>> {
        &self.cells
    }

    pub fn detectors(&self, cell: Cell) -> BTreeSet<TemplateName> {
        self.cells
            .get(&cell)
            .map(|m| m.keys().copied().collect())
            .unwrap_or_default()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparator {
    StrictlyGreater,
    AtLeast,
}

impl Comparator {
    pub fn passes(self, count: usize, n: usize) -> bool {
        match self {
            Comparator::StrictlyGreater => count > n,
            Comparator::AtLeast => count >= n,
        }
    }
}

impl fmt::Display for Comparator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Comparator::StrictlyGreater => "strictly_greater",
            Comparator::AtLeast => "at_least",
        })
    }
}

impl FromStr for Comparator {
    type Err = EnsembleError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "strictly_greater" | "gt" => Ok(Comparator::StrictlyGreater),
            "at_least" | "ge" => Ok(Comparator::AtLeast),
            other => Err(EnsembleError::UnknownComparator(other.to_string())),
        }
    }
}

/// Wording priority: descending per-dimension development BLEU of the
/// single-prompt runs.
pub const DEFAULT_PRIORITY: [TemplateName; 12] = [
    TemplateName::Counterfactual,
    TemplateName::Interventionist,
    TemplateName::Multifactorial,
    TemplateName::CuratedExamples,
    TemplateName::Probabilistic,
    TemplateName::NaturalLanguageOutput,
    TemplateName::NoExplicitDefinition,
    TemplateName::Basic,
    TemplateName::ChatgptInstruction,
    TemplateName::ChatgptFormat,
    TemplateName::EventChain,
    TemplateName::EventGraph,
];

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleConfig {
    pub threshold: usize,
    pub comparator: Comparator,
    pub participating: BTreeSet<TemplateName>,
    pub priority: Vec<TemplateName>,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        EnsembleConfig {
            threshold: 4,
            comparator: Comparator::StrictlyGreater,
            participating: TemplateName::ALL.into_iter().collect(),
            priority: DEFAULT_PRIORITY.to_vec(),
        }
    }
}

impl EnsembleConfig {
    pub fn validate(&self) -> Result<(), EnsembleError> {
        match self
            .participating
            .iter()
            .find(|p| !self.priority.contains(p))
        {
            Some(p) => Err(EnsembleError::PriorityGap(*p)),
            None => Ok(()),
        }
    }
}

/// Marked cells in (sentence, dimension) order, one statement each.
pub fn vote(table: &DetectionTable, config: &EnsembleConfig) -> Vec<CausalStatement> {
    let mut out = Vec::new();
    for candidates in table.cells.values() {
        let count = candidates
            .keys()
            .filter(|p| config.participating.contains(p))
            .count();
        if !config.comparator.passes(count, config.threshold) {
            continue;
        }
        let chosen = config
            .priority
            .iter()
            .find(|p| config.participating.contains(p) && candidates.contains_key(p))
            .and_then(|p| candidates.get(p));
        if let Some(s) = chosen {
            out.push(s.clone());
        }
    }
    out
}

pub fn detection_counts(table: &DetectionTable) -> BTreeMap<Cell, usize> {
    table.cells.iter().map(|(c, m)| (*c, m.len())).collect()
}

pub const TABLE_HEADER: &str =
    "story_id\tsentence\tdimension\tprompt\tstatement\tcounterpart_index";

fn clean(s: &str) -> String {
    s.replace(['\t', '\n', '\r'], " ")
}

/// One line per (story, sentence, dimension, prompt) with the candidate text
/// and, optionally, the counterpart sentence index.
pub fn write_detection_tsv<'a>(tables: impl IntoIterator<Item = &'a DetectionTable>) -> String {
    let mut out = format!("{TABLE_HEADER}\n");
    for t in tables {
        for ((sentence, dim), candidates) in &t.cells {
            for (prompt, s) in candidates {
                let idx = s
                    .counterpart_index
                    .map(|i| i.to_string())
                    .unwrap_or_default();
                out.push_str(&format!(
                    "{}\t{sentence}\t{}\t{prompt}\t{}\t{idx}\n",
                    clean(&t.story_id),
                    dim.value(),
                    clean(&s.counterpart_text)
                ));
            }
        }
    }
    out
}

pub fn read_detection_tsv(text: &str) -> Result<BTreeMap<String, DetectionTable>, EnsembleError> {
    let mut tables: BTreeMap<String, DetectionTable> = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        let line_no = n + 1;
        if line.trim().is_empty() || (n == 0 && line.starts_with("story_id\t")) {
            continue;
        }
        let err = |m: String| EnsembleError::Table {
            line: line_no,
            message: m,
        };
        let f: Vec<&str> = line.split('\t').collect();
        if !(5..=6).contains(&f.len()) {
            return Err(err(format!("expected 5 or 6 columns, found {}", f.len())));
        }
        let sentence: usize = f[1]
            .parse()
            .map_err(|_| err(format!("bad sentence index `{}`", f[1])))?;
        let dim = f[2]
            .parse::<u8>()
            .ok()
            .and_then(|d| Dimension::new(d).ok())
            .ok_or_else(|| err(format!("bad dimension `{}`", f[2])))?;
        let prompt: TemplateName = f[3]
            .split('/')
            .next()
            .unwrap_or("")
            .parse()
            .map_err(|e| err(format!("{e}")))?;
        let idx = match f.get(5).map(|s| s.trim()) {
            None | Some("") => None,
            Some(s) => Some(
                s.parse::<usize>()
                    .map_err(|_| err(format!("bad counterpart index `{s}`")))?,
            ),
        };
        let st = CausalStatement::new(f[0], sentence, dim, f[4], idx, prompt.as_str())
            .map_err(|e| err(e.to_string()))?;
        tables
            .entry(f[0].to_string())
            .or_insert_with(|| DetectionTable::new(f[0]))
            .insert(prompt, st);
    }
    Ok(tables)
}
