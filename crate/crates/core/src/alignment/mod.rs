//! Video-text alignment: context selection from an event graph, Minimal
//! Distance and DTW decoders, and Clip Accuracy / Sentence IoU.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

mod context;
mod decode;
mod evaluate;
mod io;

pub use context::{
    build_plan, causal_context, contextual_similarity, infer, temporal_context, ContextConfig,
    ContextEntry, ContextMode, ContextPlan, Inference, DEFAULT_BLEND,
};
pub use decode::{dtw_align, dtw_cost_matrix, minimal_distance_align, path_cost, DtwResult};
pub use evaluate::{
    calibrate_threshold, clip_accuracy, planted_fixture, sentence_iou, ClipWeighting,
    PlantedFixture,
};
pub use io::{
    parse_gold, parse_segments, parse_similarity, write_gold, write_segments, write_similarity,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AlignmentError {
    #[error("invalid segment {index}: {reason}")]
    InvalidSegment { index: usize, reason: String },
    #[error("invalid similarity matrix: {0}")]
    InvalidMatrix(String),
    #[error("length mismatch: {what} has {got}, expected {expected}")]
    LengthMismatch {
        what: &'static str,
        got: usize,
        expected: usize,
    },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VideoSegment {
    pub index: usize,
    pub start: f64,
    pub end: f64,
}

impl VideoSegment {
    pub fn duration(&self) -> f64 {
        self.end - self.start
    }
}

/// Checks indices are 0..n in order and intervals are positive, sorted and
/// non-overlapping.
pub fn validate_segments(segments: &[VideoSegment]) -> Result<(), AlignmentError> {
    for (i, s) in segments.iter().enumerate() {
        let bad = |reason: &str| {
            Err(AlignmentError::InvalidSegment {
                index: i,
                reason: reason.into(),
            })
        };
        if s.index != i {
            return bad("index out of order");
        }
        if !(s.start.is_finite() && s.end.is_finite()) || s.end <= s.start {
            return bad("end must be after start");
        }
        if i > 0 && s.start < segments[i - 1].end {
            return bad("overlaps the previous segment");
        }
    }
    Ok(())
}

/// N×M cosine similarities, N segments by M sentences, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    n: usize,
    m: usize,
    values: Vec<f64>,
    pub provenance: String,
}

impl SimilarityMatrix {
    pub fn new(
        n: usize,
        m: usize,
        values: Vec<f64>,
        provenance: impl Into<String>,
    ) -> Result<Self, AlignmentError> {
        if n == 0 || m == 0 {
            return Err(AlignmentError::InvalidMatrix("empty matrix".into()));
        }
        if values.len() != n * m {
            return Err(AlignmentError::InvalidMatrix(format!(
                "{} values for a {n}x{m} matrix",
                values.len()
            )));
        }
        if let Some(v) = values
            .iter()
            .find(|v| !v.is_finite() || v.abs() > 1.0 + 1e-9)
        {
            return Err(AlignmentError::InvalidMatrix(format!(
                "entry {v} outside [-1, 1]"
            )));
        }
        Ok(SimilarityMatrix {
            n,
            m,
            values,
            provenance: provenance.into(),
        })
    }

    pub fn from_rows(
        rows: &[Vec<f64>],
        provenance: impl Into<String>,
    ) -> Result<Self, AlignmentError> {
        let m = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != m) {
            return Err(AlignmentError::InvalidMatrix("ragged rows".into()));
        }
        Self::new(rows.len(), m, rows.concat(), provenance)
    }

    /// 1 where `gold` assigns the segment to the sentence, 0 elsewhere.
    pub fn identity_from(gold: &[Option<usize>], m: usize) -> Result<Self, AlignmentError> {
        let mut values = vec![0.0; gold.len() * m];
        for (i, g) in gold.iter().enumerate() {
            if let Some(j) = g {
                if *j >= m {
                    return Err(AlignmentError::Domain(format!("sentence {j} out of range")));
                }
                values[i * m + j] = 1.0;
            }
        }
        Self::new(gold.len(), m, values, "identity")
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.m + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.m..(i + 1) * self.m]
    }
}

/// Per-segment sentence index, `None` for unmatched.
pub type Assignment = Vec<Option<usize>>;

#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentResult {
    pub assignment: Assignment,
    pub threshold: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Granularity {
    Sentence,
    SubSentence,
}

impl fmt::Display for Granularity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Granularity::Sentence => "sentence",
            Granularity::SubSentence => "sub_sentence",
        })
    }
}

impl FromStr for Granularity {
    type Err = AlignmentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "sentence" => Ok(Granularity::Sentence),
            "sub_sentence" => Ok(Granularity::SubSentence),
            other => Err(AlignmentError::Domain(format!(
                "unknown granularity `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GoldAlignment {
    pub assignment: Assignment,
    pub granularity: Granularity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decoder {
    MinimalDistance,
    Dtw,
}

impl fmt::Display for Decoder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Decoder::MinimalDistance => "md",
            Decoder::Dtw => "dtw",
        })
    }
}

impl FromStr for Decoder {
    type Err = AlignmentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "md" | "minimal_distance" => Ok(Decoder::MinimalDistance),
            "dtw" => Ok(Decoder::Dtw),
            other => Err(AlignmentError::Domain(format!(
                "unknown decoder `{other}` (expected md or dtw)"
            ))),
        }
    }
}

impl Decoder {
    pub fn decode(self, s: &SimilarityMatrix, t: f64) -> AlignmentResult {
        match self {
            Decoder::MinimalDistance => minimal_distance_align(s, t),
            Decoder::Dtw => dtw_align(s, t).alignment,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn segment_validation() {
        let ok = [
            VideoSegment {
                index: 0,
                start: 0.0,
                end: 2.0,
            },
            VideoSegment {
                index: 1,
                start: 2.0,
                end: 3.5,
            },
        ];
        assert!(validate_segments(&ok).is_ok());
        let overlap = [
            VideoSegment {
                index: 0,
                start: 0.0,
                end: 2.0,
            },
            VideoSegment {
                index: 1,
                start: 1.0,
                end: 3.0,
            },
        ];
        assert!(validate_segments(&overlap).is_err());
        assert!(validate_segments(&[VideoSegment {
            index: 0,
            start: 1.0,
            end: 1.0
        }])
        .is_err());
        assert!(validate_segments(&[VideoSegment {
            index: 1,
            start: 0.0,
            end: 1.0
        }])
        .is_err());
    }

    #[test]
    fn matrix_validation() {
        assert!(SimilarityMatrix::new(1, 2, vec![0.5, 1.0], "x").is_ok());
        assert!(SimilarityMatrix::new(1, 2, vec![0.5], "x").is_err());
        assert!(SimilarityMatrix::new(1, 1, vec![f64::NAN], "x").is_err());
        assert!(SimilarityMatrix::new(1, 1, vec![1.5], "x").is_err());
        assert!(SimilarityMatrix::from_rows(&[vec![0.0], vec![0.0, 1.0]], "x").is_err());
        let id = SimilarityMatrix::identity_from(&[Some(0), None, Some(1)], 2).unwrap();
        assert_eq!(id.row(0), [1.0, 0.0]);
        assert_eq!(id.row(1), [0.0, 0.0]);
    }

    #[test]
    fn names_round_trip() {
        for d in [Decoder::MinimalDistance, Decoder::Dtw] {
            assert_eq!(d.to_string().parse::<Decoder>().unwrap(), d);
        }
        for g in [Granularity::Sentence, Granularity::SubSentence] {
            assert_eq!(g.to_string().parse::<Granularity>().unwrap(), g);
        }
    }
}
