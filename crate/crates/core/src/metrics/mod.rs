//! Reference-based extraction metrics and correlation statistics.

mod bleu;
mod correlation;
mod embedding;
mod f1;
mod report;

pub use bleu::{corpus_bleu, corpus_bleu_stats, tokenize_13a, BleuStats, MAX_ORDER};
pub use correlation::{average_ranks, kendall_tau, pearson, spearman};
pub use embedding::{
    cosine, embedding_match_score, sentence_similarity, EmbeddingProvider, HashingEmbedder,
};
pub use f1::{presence_f1, PresenceScore};
pub use report::{
    evaluate, EvalItem, MetricReport, Reference, ReferenceSet, ReportRow, MAX_REFERENCES,
    REPORT_HEADER,
};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MetricError {
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("embedding provider failed: {0}")]
    Provider(String),
}
