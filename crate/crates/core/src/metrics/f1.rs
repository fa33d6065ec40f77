use std::collections::BTreeSet;

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PresenceScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Precision/recall/F1 over sets of present cells. An empty prediction is
/// fully precise only when the gold set is empty too; likewise for recall.
pub fn presence_f1<T: Ord>(predicted: &BTreeSet<T>, gold: &BTreeSet<T>) -> PresenceScore {
    let hit = predicted.intersection(gold).count() as f64;
    let ratio = |den: usize| {
        if den == 0 {
            if predicted.is_empty() && gold.is_empty() {
                1.0
            } else {
                0.0
            }
        } else {
            hit / den as f64
        }
    };
    let precision = ratio(predicted.len());
    let recall = ratio(gold.len());
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    PresenceScore {
        precision,
        recall,
        f1,
    }
}
