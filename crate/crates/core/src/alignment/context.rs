//! Context selection for each video segment and the similarity blend that
//! stands in for memory-bank attention.

use std::collections::BTreeSet;

use super::{AlignmentError, Assignment, Decoder, SimilarityMatrix};
use crate::story::EventGraph;

/// Default blend weight; must stay below 0.5 so a segment's own similarity
/// dominates its context.
pub const DEFAULT_BLEND: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ContextConfig {
    /// Temporal context size.
    pub m: usize,
    /// Causal context size.
    pub c: usize,
}

impl Default for ContextConfig {
    fn default() -> Self {
        ContextConfig { m: 5, c: 5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContextMode {
    /// No context at all.
    None,
    /// The c+m immediately preceding segments.
    Temporal,
    /// Up to c causal segments, the rest of the c+m slots temporal.
    CausalTemporal,
}

impl std::fmt::Display for ContextMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ContextMode::None => "none",
            ContextMode::Temporal => "temporal",
            ContextMode::CausalTemporal => "causal_temporal",
        })
    }
}

impl std::str::FromStr for ContextMode {
    type Err = AlignmentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(ContextMode::None),
            "temporal" => Ok(ContextMode::Temporal),
            "causal_temporal" => Ok(ContextMode::CausalTemporal),
            other => Err(AlignmentError::Domain(format!(
                "unknown context mode `{other}` (expected none, temporal or causal_temporal)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ContextEntry {
    pub causal: Vec<usize>,
    pub temporal: Vec<usize>,
    /// Set when the segment falls in the first c+m and uses every
    /// preceding segment instead.
    pub warmup: bool,
}

impl ContextEntry {
    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.causal.iter().chain(&self.temporal).copied()
    }
}

pub type ContextPlan = Vec<ContextEntry>;

/// `[i-1, i-2, ..., max(0, i-m)]`.
pub fn temporal_context(i: usize, m: usize) -> Vec<usize> {
    (1..=m.min(i)).map(|k| i - k).collect()
}

/// Preceding segments mapped to the closest causal predecessors of the
/// sentence behind segment `i`.
///
/// The sentence is `seg_to_sentence[i]` when known, else the most recent
/// mapped sentence before `i`. Candidates are ranked by predecessor
/// closeness, then by descending segment index, and cut at `c`.
pub fn causal_context(
    i: usize,
    graph: &EventGraph,
    seg_to_sentence: &[Option<usize>],
    c: usize,
) -> Result<Vec<usize>, AlignmentError> {
    if seg_to_sentence.len() < i {
        return Err(AlignmentError::Domain(format!(
            "segment map covers {} segments, segment {i} needs every preceding one",
            seg_to_sentence.len()
        )));
    }
    let current = seg_to_sentence
        .get(i)
        .copied()
        .flatten()
        .or_else(|| seg_to_sentence[..i].iter().rev().find_map(|s| *s));
    let Some(sentence) = current else {
        return Ok(Vec::new());
    };
    let preds = graph
        .causal_predecessors(sentence)
        .map_err(|e| AlignmentError::Domain(e.to_string()))?;
    let mut out = Vec::new();
    for p in preds {
        out.extend((0..i).rev().filter(|&j| seg_to_sentence[j] == Some(p)));
        if out.len() >= c {
            break;
        }
    }
    out.truncate(c);
    Ok(out)
}

fn entry_for(
    i: usize,
    graph: &EventGraph,
    seg_to_sentence: &[Option<usize>],
    config: ContextConfig,
    mode: ContextMode,
    warmup: bool,
) -> Result<ContextEntry, AlignmentError> {
    let slots = config.c + config.m;
    if mode == ContextMode::None {
        return Ok(ContextEntry::default());
    }
    if warmup && i < slots {
        return Ok(ContextEntry {
            causal: Vec::new(),
            temporal: temporal_context(i, i),
            warmup: true,
        });
    }
    let causal = match mode {
        ContextMode::CausalTemporal => causal_context(i, graph, seg_to_sentence, config.c)?,
        _ => Vec::new(),
    };
    let temporal_slots = match mode {
        ContextMode::CausalTemporal => config.m,
        _ => slots,
    };
    let taken: BTreeSet<usize> = causal.iter().copied().collect();
    let temporal = (0..i)
        .rev()
        .filter(|j| !taken.contains(j))
        .take(temporal_slots)
        .collect();
    Ok(ContextEntry {
        causal,
        temporal,
        warmup: false,
    })
}

/// Context for every segment given a known (gold) segment-to-sentence map.
pub fn build_plan(
    graph: &EventGraph,
    seg_to_sentence: &[Option<usize>],
    config: ContextConfig,
    mode: ContextMode,
    warmup: bool,
) -> Result<ContextPlan, AlignmentError> {
    (0..seg_to_sentence.len())
        .map(|i| entry_for(i, graph, seg_to_sentence, config, mode, warmup))
        .collect()
}

fn blended_row(base: &SimilarityMatrix, i: usize, entry: &ContextEntry, blend: f64) -> Vec<f64> {
    let ctx: Vec<usize> = entry.indices().collect();
    if ctx.is_empty() || blend == 0.0 {
        return base.row(i).to_vec();
    }
    (0..base.m())
        .map(|j| {
            let mean = ctx.iter().map(|&k| base.get(k, j)).sum::<f64>() / ctx.len() as f64;
            (1.0 - blend) * base.get(i, j) + blend * mean
        })
        .collect()
}

/// `s'(i,j) = (1-λ) s(i,j) + λ · mean_{k in context(i)} s(k,j)`; rows with
/// an empty context are unchanged.
pub fn contextual_similarity(
    base: &SimilarityMatrix,
    plan: &ContextPlan,
    blend: f64,
) -> Result<SimilarityMatrix, AlignmentError> {
    if !(0.0..=1.0).contains(&blend) {
        return Err(AlignmentError::Domain(format!(
            "blend {blend} outside [0, 1]"
        )));
    }
    if plan.len() != base.n() {
        return Err(AlignmentError::LengthMismatch {
            what: "context plan",
            got: plan.len(),
            expected: base.n(),
        });
    }
    let mut values = Vec::with_capacity(base.n() * base.m());
    for (i, entry) in plan.iter().enumerate() {
        if entry.indices().any(|k| k >= i) {
            return Err(AlignmentError::Domain(format!(
                "context of segment {i} is not strictly preceding"
            )));
        }
        values.extend(blended_row(base, i, entry, blend));
    }
    SimilarityMatrix::new(
        base.n(),
        base.m(),
        values,
        format!("{}+context", base.provenance),
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct Inference {
    pub assignment: Assignment,
    pub plan: ContextPlan,
    pub similarity: SimilarityMatrix,
}

/// Sequential inference: each segment's context comes from the predictions
/// for the segments before it, its blended row is decoded greedily to feed
/// later context, and the chosen decoder runs on the final blended matrix.
#[allow(clippy::too_many_arguments)]
pub fn infer(
    base: &SimilarityMatrix,
    graph: &EventGraph,
    config: ContextConfig,
    mode: ContextMode,
    blend: f64,
    decoder: Decoder,
    t: f64,
    warmup: bool,
) -> Result<Inference, AlignmentError> {
    if graph.len() != base.m() {
        return Err(AlignmentError::LengthMismatch {
            what: "event graph",
            got: graph.len(),
            expected: base.m(),
        });
    }
    let mut predicted: Assignment = Vec::with_capacity(base.n());
    let mut plan = Vec::with_capacity(base.n());
    let mut values = Vec::with_capacity(base.n() * base.m());
    for i in 0..base.n() {
        let entry = entry_for(i, graph, &predicted, config, mode, warmup)?;
        let row = blended_row(base, i, &entry, blend);
        let mut best = 0;
        for j in 1..row.len() {
            if row[j] > row[best] {
                best = j;
            }
        }
        predicted.push((row[best] >= t).then_some(best));
        values.extend(row);
        plan.push(entry);
    }
    let similarity = SimilarityMatrix::new(
        base.n(),
        base.m(),
        values,
        format!("{}+context", base.provenance),
    )?;
    let assignment = decoder.decode(&similarity, t).assignment;
    Ok(Inference {
        assignment,
        plan,
        similarity,
    })
}
