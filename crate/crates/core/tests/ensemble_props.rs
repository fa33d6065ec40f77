use std::collections::BTreeSet;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use storycause::ensemble::{vote, Comparator, DetectionTable, EnsembleConfig};
use storycause::prompt::TemplateName;
use storycause::{CausalStatement, Dimension};

type Cell = (usize, u8);

fn statement(cell: Cell, prompt: TemplateName) -> CausalStatement {
    let (sentence, dim) = cell;
    let counterpart = if sentence == 0 { 1 } else { 0 };
    let dim = Dimension::new(dim).unwrap();
    let index = (dim.kind() == storycause::CounterpartKind::Event).then_some(counterpart);
    CausalStatement::new(
        "s",
        sentence,
        dim,
        format!("{} text", prompt.as_str()),
        index,
        prompt.as_str(),
    )
    .unwrap()
}

fn random_detections(rng: &mut ChaCha8Rng) -> Vec<(Cell, TemplateName)> {
    let n = rng.random_range(0..40);
    (0..n)
        .map(|_| {
            let cell = (rng.random_range(0..4), rng.random_range(1..=10));
            (cell, TemplateName::ALL[rng.random_range(0..12)])
        })
        .collect()
}

fn table(detections: &[(Cell, TemplateName)]) -> DetectionTable {
    let mut t = DetectionTable::new("s");
    for &(cell, p) in detections {
        t.insert(p, statement(cell, p));
    }
    t
}

fn marked(t: &DetectionTable, config: &EnsembleConfig) -> BTreeSet<Cell> {
    vote(t, config)
        .iter()
        .map(|s| (s.focal_index, s.dimension.value()))
        .collect()
}

fn config(n: usize, comparator: Comparator) -> EnsembleConfig {
    EnsembleConfig {
        threshold: n,
        comparator,
        ..EnsembleConfig::default()
    }
}

#[test]
fn monotonicity_over_ten_thousand_tables() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..10_000 {
        let detections = random_detections(&mut rng);
        let comparator = if rng.random_bool(0.5) {
            Comparator::AtLeast
        } else {
            Comparator::StrictlyGreater
        };
        let n = rng.random_range(0..=12);
        let base = table(&detections);
        let before = marked(&base, &config(n, comparator));

        let mut more = detections.clone();
        more.push((
            (rng.random_range(0..4), rng.random_range(1..=10)),
            TemplateName::ALL[rng.random_range(0..12)],
        ));
        let after = marked(&table(&more), &config(n, comparator));
        assert!(
            before.is_subset(&after),
            "adding a detector unmarked a cell"
        );

        let raised = marked(&base, &config(n + 1, comparator));
        assert!(raised.is_subset(&before), "raising n marked a new cell");
    }
}

proptest! {
    #[test]
    fn extreme_thresholds_are_union_and_intersection(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut detections = random_detections(&mut rng);
        if rng.random_bool(0.5) {
            detections.extend(TemplateName::ALL.map(|p| ((3, 6), p)));
        }
        let t = table(&detections);
        let union: BTreeSet<Cell> = detections.iter().map(|(c, _)| *c).collect();
        prop_assert_eq!(marked(&t, &config(0, Comparator::AtLeast)), union);
        let all: BTreeSet<Cell> = t
            .cells()
            .iter()
            .filter(|(_, m)| m.len() == TemplateName::ALL.len())
            .map(|(&(s, d), _)| (s, d.value()))
            .collect();
        prop_assert_eq!(marked(&t, &config(12, Comparator::AtLeast)), all);
    }
}
