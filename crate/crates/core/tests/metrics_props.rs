use std::collections::BTreeSet;

use proptest::prelude::*;
use storycause::metrics::{
    corpus_bleu, embedding_match_score, kendall_tau, pearson, presence_f1, spearman,
    HashingEmbedder,
};

/// Tau-b by direct enumeration of all pairs.
fn kendall_oracle(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len();
    let (mut conc, mut disc, mut tx, mut ty) = (0i64, 0i64, 0i64, 0i64);
    for i in 0..n {
        for j in i + 1..n {
            let dx = (x[i] - x[j]).signum() * f64::from(x[i] != x[j]);
            let dy = (y[i] - y[j]).signum() * f64::from(y[i] != y[j]);
            match (dx == 0.0, dy == 0.0) {
                (true, true) => {}
                (true, false) => tx += 1,
                (false, true) => ty += 1,
                (false, false) if dx == dy => conc += 1,
                _ => disc += 1,
            }
        }
    }
    let n1 = (conc + disc + tx) as f64;
    let n2 = (conc + disc + ty) as f64;
    (n1 > 0.0 && n2 > 0.0).then(|| (conc - disc) as f64 / (n1 * n2).sqrt())
}

fn tied_vec(len: usize) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec((0i32..6).prop_map(f64::from), len)
}

fn paired() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (2usize..=50).prop_flat_map(|n| (tied_vec(n), tied_vec(n)))
}

proptest! {
    #[test]
    fn kendall_matches_pairwise_oracle((x, y) in paired()) {
        match (kendall_tau(&x, &y), kendall_oracle(&x, &y)) {
            (Ok(k), Some(o)) => prop_assert!((k - o).abs() < 1e-12, "{} vs {}", k, o),
            (Err(_), None) => {}
            (a, b) => prop_assert!(false, "disagree: {:?} vs {:?}", a, b),
        }
    }

    #[test]
    fn rank_correlations_ignore_increasing_affine_maps((x, y) in paired(), a in 0.1f64..10.0, b in -5.0f64..5.0) {
        let x2: Vec<f64> = x.iter().map(|v| a * v + b).collect();
        for f in [spearman, kendall_tau] {
            if let (Ok(r1), Ok(r2)) = (f(&x, &y), f(&x2, &y)) {
                prop_assert!((r1 - r2).abs() < 1e-9);
            }
        }
        let y2: Vec<f64> = y.iter().map(|v| -a * v + b).collect();
        if let (Ok(r1), Ok(r2), Ok(r3)) = (pearson(&x, &y), pearson(&x2, &y), pearson(&x, &y2)) {
            prop_assert!((r1 - r2).abs() < 1e-9);
            prop_assert!((r1 + r3).abs() < 1e-9);
        }
    }

    #[test]
    fn bleu_ignores_corpus_order(
        pairs in proptest::collection::vec(("[a-d]( [a-d]){0,8}", "[a-d]( [a-d]){0,8}"), 1..12),
        rot in 0usize..12,
    ) {
        let hyps: Vec<&str> = pairs.iter().map(|(h, _)| h.as_str()).collect();
        let refs: Vec<Vec<&str>> = pairs.iter().map(|(_, r)| vec![r.as_str()]).collect();
        let base = corpus_bleu(&hyps, &refs).unwrap();
        let k = rot % hyps.len();
        let (mut h2, mut r2) = (hyps.clone(), refs.clone());
        h2.rotate_left(k);
        r2.rotate_left(k);
        h2.reverse();
        r2.reverse();
        prop_assert_eq!(corpus_bleu(&h2, &r2).unwrap(), base);
    }

    #[test]
    fn presence_f1_swap_exchanges_precision_and_recall(
        p in proptest::collection::btree_set(0u8..20, 0..15),
        g in proptest::collection::btree_set(0u8..20, 0..15),
    ) {
        let a = presence_f1(&p, &g);
        let b = presence_f1(&g, &p);
        prop_assert_eq!(a.precision, b.recall);
        prop_assert_eq!(a.recall, b.precision);
        prop_assert!((a.f1 - b.f1).abs() < 1e-15);
    }

    #[test]
    fn embedding_match_with_self_is_one(h in "[a-z]{1,8}( [a-z]{1,8}){0,6}", refs in proptest::collection::vec("[a-z]{1,8}( [a-z]{1,8}){0,6}", 0..3)) {
        let mut all = refs.clone();
        all.push(h.clone());
        let v = embedding_match_score(&h, &all, &HashingEmbedder::default()).unwrap();
        prop_assert!((v - 1.0).abs() < 1e-12);
    }
}

#[test]
fn identical_corpora_score_one_hundred() {
    let hyps = [
        "the cat sat on the mat",
        "a dog barked at the mailman today",
    ];
    let refs: Vec<Vec<&str>> = hyps.iter().map(|h| vec![*h]).collect();
    assert_eq!(corpus_bleu(&hyps, &refs).unwrap(), 100.0);
    let empty: BTreeSet<u8> = BTreeSet::new();
    assert_eq!(presence_f1(&empty, &empty).f1, 1.0);
}
