//! Delimited GLUCOSE-style tables: one row per annotator and selected
//! sentence, with one column per dimension and reference slot.

use std::collections::{BTreeMap, HashMap};
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{io_err, CorpusError};
use crate::metrics::{Reference, ReferenceSet, MAX_REFERENCES};
use crate::scoring::split_sentences;
use crate::story::{Dimension, Story, StorySource};

/// Column names for one table layout.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ColumnMapping {
    pub story_id: String,
    pub story: String,
    pub sentence: String,
    /// Index of the first sentence in the sentence column.
    pub sentence_base: usize,
    /// Splits the story column into sentences; punctuation-based when unset.
    pub story_separator: Option<String>,
    /// Separates several references packed into one cell.
    pub reference_separator: String,
    pub absent_marker: String,
    /// Entry `d-1` lists the reference columns of dimension `d`.
    pub dimensions: Vec<Vec<String>>,
}

impl Default for ColumnMapping {
    fn default() -> Self {
        Self::with_variant("specificNL")
    }
}

impl ColumnMapping {
    /// Public release layout with `<d>_<variant>` reference columns, e.g.
    /// `specificNL` or `generalNL`.
    pub fn with_variant(variant: &str) -> Self {
        ColumnMapping {
            story_id: "story_id".into(),
            story: "story".into(),
            sentence: "selected_sentence_index".into(),
            sentence_base: 0,
            story_separator: None,
            reference_separator: "****".into(),
            absent_marker: "escaped".into(),
            dimensions: (1..=10).map(|d| vec![format!("{d}_{variant}")]).collect(),
        }
    }

    pub fn validate(&self) -> Result<(), CorpusError> {
        if self.dimensions.len() != 10 {
            return Err(CorpusError::Config(format!(
                "mapping lists {} dimensions, expected 10",
                self.dimensions.len()
            )));
        }
        for (i, cols) in self.dimensions.iter().enumerate() {
            if cols.is_empty() || cols.len() > MAX_REFERENCES {
                return Err(CorpusError::Config(format!(
                    "dimension {} maps {} columns, expected 1..={MAX_REFERENCES}",
                    i + 1,
                    cols.len()
                )));
            }
        }
        if self.reference_separator.is_empty() || self.absent_marker.trim().is_empty() {
            return Err(CorpusError::Config(
                "separator and absent marker must be non-empty".into(),
            ));
        }
        Ok(())
    }
}

/// Gold annotation for one selected sentence; every dimension has a cell.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GlucoseRecord {
    pub story: Story,
    /// 0-based.
    pub selected: usize,
    pub cells: BTreeMap<Dimension, Reference>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowDiagnostic {
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GlucoseLoad {
    pub records: Vec<GlucoseRecord>,
    pub diagnostics: Vec<RowDiagnostic>,
}

struct Columns {
    story_id: usize,
    story: usize,
    sentence: usize,
    dims: Vec<Vec<usize>>,
}

fn locate(headers: &csv::StringRecord, mapping: &ColumnMapping) -> Result<Columns, CorpusError> {
    let index: HashMap<&str, usize> = headers
        .iter()
        .enumerate()
        .map(|(i, h)| (h.trim(), i))
        .collect();
    let find = |name: &str| {
        index
            .get(name)
            .copied()
            .ok_or_else(|| CorpusError::Config(format!("column `{name}` not found in header")))
    };
    Ok(Columns {
        story_id: find(&mapping.story_id)?,
        story: find(&mapping.story)?,
        sentence: find(&mapping.sentence)?,
        dims: mapping
            .dimensions
            .iter()
            .map(|cols| cols.iter().map(|c| find(c)).collect::<Result<_, _>>())
            .collect::<Result<_, _>>()?,
    })
}

fn sentences_of(text: &str, mapping: &ColumnMapping) -> Vec<String> {
    match &mapping.story_separator {
        Some(sep) => text
            .split(sep.as_str())
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(String::from)
            .collect(),
        None => split_sentences(text),
    }
}

/// Texts in one cell; empty when the cell is blank or the absent marker.
fn cell_texts<'a>(cell: &'a str, mapping: &ColumnMapping) -> Vec<&'a str> {
    cell.split(mapping.reference_separator.as_str())
        .map(str::trim)
        .filter(|t| !t.is_empty() && !t.eq_ignore_ascii_case(mapping.absent_marker.trim()))
        .collect()
}

struct Builder {
    record: GlucoseRecord,
}

/// Reads a delimited table. Rows sharing (story, selected sentence) merge
/// into one record; a cell holding the absent marker or nothing stays
/// absent unless another row supplies a reference. Malformed rows are
/// skipped with a diagnostic.
pub fn read_glucose<R: Read>(
    reader: R,
    delimiter: u8,
    mapping: &ColumnMapping,
) -> Result<GlucoseLoad, CorpusError> {
    mapping.validate()?;
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .flexible(true)
        .from_reader(reader);
    let headers = match rdr.headers() {
        Ok(h) if h.iter().all(|f| f.trim().is_empty()) => return Ok(GlucoseLoad::default()),
        Ok(h) => h.clone(),
        Err(e) => {
            return Err(CorpusError::Parse {
                line: 1,
                message: e.to_string(),
            })
        }
    };
    let cols = locate(&headers, mapping)?;
    let mut order: Vec<(String, usize)> = Vec::new();
    let mut builders: HashMap<(String, usize), Builder> = HashMap::new();
    let mut diagnostics = Vec::new();
    for row in rdr.records() {
        let row = match row {
            Ok(r) => r,
            Err(e) => {
                let line = e.position().map_or(0, |p| p.line() as usize);
                diagnostics.push(RowDiagnostic {
                    line,
                    reason: e.to_string(),
                });
                continue;
            }
        };
        let line = row.position().map_or(0, |p| p.line() as usize);
        let mut skip = |reason: String| diagnostics.push(RowDiagnostic { line, reason });
        let field = |i: usize| row.get(i).map(str::trim).unwrap_or("");
        let id = field(cols.story_id);
        if id.is_empty() {
            skip("missing story id".into());
            continue;
        }
        let raw_index = field(cols.sentence);
        let selected = match raw_index
            .parse::<usize>()
            .ok()
            .and_then(|v| v.checked_sub(mapping.sentence_base))
        {
            Some(v) => v,
            None if raw_index.is_empty() => {
                skip("missing sentence index".into());
                continue;
            }
            None => {
                skip(format!("bad sentence index `{raw_index}`"));
                continue;
            }
        };
        let story = match Story::new(
            id,
            sentences_of(field(cols.story), mapping),
            StorySource::Glucose,
        ) {
            Ok(s) => s,
            Err(e) => {
                skip(e.to_string());
                continue;
            }
        };
        if selected >= story.len() {
            skip(format!(
                "selected sentence {selected} outside a {}-sentence story",
                story.len()
            ));
            continue;
        }
        let key = (id.to_string(), selected);
        let builder = builders.entry(key.clone()).or_insert_with(|| {
            order.push(key.clone());
            Builder {
                record: GlucoseRecord {
                    story: story.clone(),
                    selected,
                    cells: Dimension::all().map(|d| (d, Reference::Absent)).collect(),
                },
            }
        });
        if builder.record.story != story {
            skip(format!("story text for `{id}` differs from an earlier row"));
            continue;
        }
        for (d, columns) in Dimension::all().zip(&cols.dims) {
            for &c in columns {
                for text in cell_texts(field(c), mapping) {
                    let cell = builder
                        .record
                        .cells
                        .get_mut(&d)
                        .expect("all dimensions present");
                    match cell {
                        Reference::Absent => *cell = Reference::Present(vec![text.to_string()]),
                        Reference::Present(v) if v.len() >= MAX_REFERENCES => {
                            skip(format!(
                                "dimension {d}: reference beyond {MAX_REFERENCES} dropped"
                            ));
                        }
                        Reference::Present(v) => v.push(text.to_string()),
                    }
                }
            }
        }
    }
    let records = order
        .into_iter()
        .map(|k| builders.remove(&k).expect("ordered key").record)
        .collect();
    Ok(GlucoseLoad {
        records,
        diagnostics,
    })
}

/// Tab-delimited for `.tsv`, comma-delimited otherwise.
pub fn load_glucose(path: &Path, mapping: &ColumnMapping) -> Result<GlucoseLoad, CorpusError> {
    let file = std::fs::File::open(path).map_err(io_err(path))?;
    let delimiter = if path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("tsv"))
    {
        b'\t'
    } else {
        b','
    };
    read_glucose(file, delimiter, mapping)
}

/// Groups records by story into gold reference sets, keeping first-seen
/// story order.
pub fn reference_sets(records: &[GlucoseRecord]) -> Vec<(Story, ReferenceSet)> {
    let mut out: Vec<(Story, ReferenceSet)> = Vec::new();
    for r in records {
        let pos = match out.iter().position(|(s, _)| s.id() == r.story.id()) {
            Some(p) => p,
            None => {
                out.push((r.story.clone(), ReferenceSet::new(r.story.id())));
                out.len() - 1
            }
        };
        let set = &mut out[pos].1;
        for (&d, cell) in &r.cells {
            match cell {
                Reference::Absent => set.add(r.selected, d, None),
                Reference::Present(refs) => refs
                    .iter()
                    .try_for_each(|t| set.add(r.selected, d, Some(t))),
            }
            .expect("record cells hold at most the reference cap");
        }
    }
    out
}
