//! Per-dimension extraction report against multi-reference gold cells.

use std::collections::{BTreeMap, BTreeSet};

use super::{
    corpus_bleu, embedding_match_score, presence_f1, sentence_similarity, EmbeddingProvider,
    MetricError,
};
use crate::story::{CausalStatement, Dimension, Story};

pub const MAX_REFERENCES: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Reference {
    /// Annotators marked the relation as not present.
    Absent,
    Present(Vec<String>),
}

/// Gold references for the annotated cells of one story.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReferenceSet {
    pub story_id: String,
    cells: BTreeMap<(usize, Dimension), Reference>,
}

impl ReferenceSet {
    pub fn new(story_id: impl Into<String>) -> Self {
        ReferenceSet {
            story_id: story_id.into(),
            cells: BTreeMap::new(),
        }
    }

    /// Adds one annotator's reference; blank text marks the cell absent
    /// unless another reference already made it present.
    pub fn add(
        &mut self,
        sentence: usize,
        dim: Dimension,
        text: Option<&str>,
    ) -> Result<(), MetricError> {
        let text = text.map(str::trim).filter(|t| !t.is_empty());
        let cell = self
            .cells
            .entry((sentence, dim))
            .or_insert(Reference::Absent);
        if let Some(t) = text {
            match cell {
                Reference::Absent => *cell = Reference::Present(vec![t.to_string()]),
                Reference::Present(v) if v.len() >= MAX_REFERENCES => {
                    return Err(MetricError::Domain(format!(
                        "more than {MAX_REFERENCES} references for sentence {sentence}, dimension {dim}"
                    )))
                }
                Reference::Present(v) => v.push(t.to_string()),
            }
        }
        Ok(())
    }

    pub fn cells(&self) -> &BTreeMap<(usize, Dimension), Reference> {
        &self.cells
    }
}

/// One story's gold and system output.
pub struct EvalItem<'a> {
    pub story: &'a Story,
    pub gold: &'a ReferenceSet,
    pub predicted: &'a [CausalStatement],
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub scope: String,
    pub pairs: usize,
    pub bleu: Option<f64>,
    pub embedding_f1: Option<f64>,
    pub sentence_sim: Option<f64>,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub system: String,
    pub rows: Vec<ReportRow>,
}

pub const REPORT_HEADER: &str =
    "system\tscope\tpairs\tbleu\tembedding_f1\tsentence_sim\tprecision\trecall\tf1";

fn fixed(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "NA".into())
}

impl MetricReport {
    pub fn to_tsv(&self) -> String {
        let mut out = format!("{REPORT_HEADER}\n");
        out.push_str(&self.body_tsv());
        out
    }

    /// Rows without the header, for concatenating several systems.
    pub fn body_tsv(&self) -> String {
        self.rows
            .iter()
            .map(|r| {
                format!(
                    "{}\t{}\t{}\t{}\t{}\t{}\t{:.4}\t{:.4}\t{:.4}\n",
                    self.system,
                    r.scope,
                    r.pairs,
                    fixed(r.bleu),
                    fixed(r.embedding_f1),
                    fixed(r.sentence_sim),
                    r.precision,
                    r.recall,
                    r.f1
                )
            })
            .collect()
    }

    pub fn row(&self, scope: &str) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.scope == scope)
    }
}

#[derive(Default)]
struct Pool {
    hyps: Vec<String>,
    refs: Vec<Vec<String>>,
    embed: Vec<f64>,
    sim: Vec<f64>,
    predicted: BTreeSet<usize>,
    gold: BTreeSet<usize>,
}

impl Pool {
    fn row(&self, scope: &str) -> Result<ReportRow, MetricError> {
        let mean = |v: &[f64]| (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);
        let bleu = if self.hyps.is_empty() {
            None
        } else {
            Some(corpus_bleu(&self.hyps, &self.refs)?)
        };
        let p = presence_f1(&self.predicted, &self.gold);
        Ok(ReportRow {
            scope: scope.to_string(),
            pairs: self.hyps.len(),
            bleu,
            embedding_f1: mean(&self.embed),
            sentence_sim: mean(&self.sim),
            precision: p.precision,
            recall: p.recall,
            f1: p.f1,
        })
    }

    fn absorb(&mut self, other: &Pool) {
        self.hyps.extend(other.hyps.iter().cloned());
        self.refs.extend(other.refs.iter().cloned());
        self.embed.extend(&other.embed);
        self.sim.extend(&other.sim);
        self.predicted.extend(&other.predicted);
        self.gold.extend(&other.gold);
    }
}

fn macro_row(scope: &str, rows: &[&ReportRow]) -> ReportRow {
    let mean_opt = |f: &dyn Fn(&ReportRow) -> Option<f64>| {
        let v: Vec<f64> = rows.iter().filter_map(|r| f(r)).collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    };
    let mean =
        |f: &dyn Fn(&ReportRow) -> f64| rows.iter().map(|r| f(r)).sum::<f64>() / rows.len() as f64;
    ReportRow {
        scope: scope.to_string(),
        pairs: rows.iter().map(|r| r.pairs).sum(),
        bleu: mean_opt(&|r| r.bleu),
        embedding_f1: mean_opt(&|r| r.embedding_f1),
        sentence_sim: mean_opt(&|r| r.sentence_sim),
        precision: mean(&|r| r.precision),
        recall: mean(&|r| r.recall),
        f1: mean(&|r| r.f1),
    }
}

/// Scores predictions cell by cell over the annotated cells only.
///
/// Text metrics use the cells where both gold and prediction are present,
/// with the prediction written as a rule. Presence metrics use all
/// annotated cells. Aggregate rows come in micro (pooled) and macro (mean
/// of dimension rows) flavours, over all ten dimensions and over 1 & 6.
pub fn evaluate(
    system: &str,
    items: &[EvalItem<'_>],
    provider: &dyn EmbeddingProvider,
) -> Result<MetricReport, MetricError> {
    let mut pools: BTreeMap<Dimension, Pool> =
        Dimension::all().map(|d| (d, Pool::default())).collect();
    let mut cell_id = 0usize;
    for item in items {
        let mut first: BTreeMap<(usize, Dimension), &CausalStatement> = BTreeMap::new();
        for s in item.predicted {
            first.entry((s.focal_index, s.dimension)).or_insert(s);
        }
        for (&(sentence, dim), gold) in item.gold.cells() {
            let pool = pools.get_mut(&dim).expect("all dimensions pooled");
            let pred = first.get(&(sentence, dim));
            if pred.is_some() {
                pool.predicted.insert(cell_id);
            }
            if let Reference::Present(refs) = gold {
                pool.gold.insert(cell_id);
                if let Some(p) = pred {
                    let hyp = p.to_rule(item.story);
                    pool.embed
                        .push(embedding_match_score(&hyp, refs, provider)?);
                    pool.sim.push(sentence_similarity(&hyp, refs, provider)?);
                    pool.hyps.push(hyp);
                    pool.refs.push(refs.clone());
                }
            }
            cell_id += 1;
        }
    }
    let mut rows = Vec::new();
    for (d, pool) in &pools {
        rows.push(pool.row(&format!("dim{d}"))?);
    }
    let mut all = Pool::default();
    let mut one_six = Pool::default();
    for (d, pool) in &pools {
        all.absorb(pool);
        if matches!(d.value(), 1 | 6) {
            one_six.absorb(pool);
        }
    }
    let dim_rows: Vec<&ReportRow> = rows.iter().collect();
    let one_six_rows: Vec<&ReportRow> = rows
        .iter()
        .filter(|r| r.scope == "dim1" || r.scope == "dim6")
        .collect();
    let extra = vec![
        all.row("all_micro")?,
        macro_row("all_macro", &dim_rows),
        one_six.row("dims_1_6_micro")?,
        macro_row("dims_1_6_macro", &one_six_rows),
    ];
    rows.extend(extra);
    Ok(MetricReport {
        system: system.to_string(),
        rows,
    })
}
