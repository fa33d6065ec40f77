use proptest::prelude::*;
use storycause::prompt::TemplateName;
use storycause::prompt::{
    parse_edge_list, parse_statements, statements_from_graph, OutputGrammar, PromptCatalog,
};
use storycause::{
    CausalEdge, CounterpartKind, Dimension, Direction, EventGraph, NodeRef, StateNode, Story,
    StorySource,
};

const WORDS: [&str; 8] = [
    "rain", "dog", "apple", "bus", "door", "cake", "lamp", "boat",
];

fn story(n: usize, salt: usize) -> Story {
    let sentences = (0..n)
        .map(|i| format!("Sam saw the {} number {}.", WORDS[(i + salt) % 8], i))
        .collect();
    Story::new(format!("g{salt}"), sentences, StorySource::Other).unwrap()
}

/// Forward-only event edges plus optional state nodes.
fn graph_strategy() -> impl Strategy<Value = EventGraph> {
    (1usize..9, 0usize..8).prop_flat_map(|(n, salt)| {
        let pairs = proptest::collection::vec((0..n, 0..n), 0..(n * 2));
        let states = proptest::collection::vec(
            (0usize..4, any::<bool>(), 0..n, "[a-z]{3,8}( [a-z]{2,6})?"),
            0..3,
        );
        (Just(n), Just(salt), pairs, states).prop_map(|(n, salt, pairs, states)| {
            let s = story(n, salt);
            let edges = pairs.into_iter().filter(|(a, b)| a < b);
            let mut g = EventGraph::from_story(&s).with_event_edges(edges).unwrap();
            for (kind, outgoing, event, text) in states {
                let kind = CounterpartKind::ALL[1 + kind];
                let k = g.add_state(StateNode { text, kind }).unwrap();
                let edge = if outgoing {
                    CausalEdge {
                        src: NodeRef::State(k),
                        dst: NodeRef::Event(event),
                    }
                } else {
                    CausalEdge {
                        src: NodeRef::Event(event),
                        dst: NodeRef::State(k),
                    }
                };
                g.add_edge(edge).unwrap();
            }
            g
        })
    })
}

fn event_graph_strategy() -> impl Strategy<Value = (Story, EventGraph)> {
    (1usize..9, 0usize..8).prop_flat_map(|(n, salt)| {
        proptest::collection::vec((0..n, 0..n), 0..(n * 2)).prop_map(move |pairs| {
            let s = story(n, salt);
            let g = EventGraph::from_story(&s)
                .with_event_edges(pairs.into_iter().filter(|(a, b)| a < b))
                .unwrap();
            (s, g)
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn text_round_trip(g in graph_strategy()) {
        prop_assert_eq!(EventGraph::from_text(&g.to_text()).unwrap(), g);
    }

    #[test]
    fn edge_list_inverts_serialization((s, g) in event_graph_strategy()) {
        let parsed = parse_edge_list(&g.body_text(), &s);
        prop_assert!(parsed.diagnostics.is_empty() || g.edges().is_empty());
        prop_assert_eq!(parsed.value.event_edges(), g.event_edges());
    }
}

proptest! {
    #[test]
    fn predecessors_are_valid_and_exclude_self(g in graph_strategy()) {
        for v in 0..g.len() {
            let preds = g.causal_predecessors(v).unwrap();
            prop_assert!(!preds.contains(&v));
            prop_assert!(preds.iter().all(|&p| p < g.len()));
            let mut dedup = preds.clone();
            dedup.sort_unstable();
            dedup.dedup();
            prop_assert_eq!(dedup.len(), preds.len());
        }
        prop_assert!(g.causal_predecessors(g.len()).is_err());
    }

    #[test]
    fn projection_is_idempotent(g in graph_strategy()) {
        let p = g.project();
        prop_assert!(p.state_nodes().is_empty());
        prop_assert_eq!(p.project(), p);
    }

    #[test]
    fn graph_statements_mirror_dim1_and_dim6((s, g) in event_graph_strategy()) {
        let st = statements_from_graph(&g, &s, "x");
        for a in &st {
            if a.dimension.value() == 1 {
                let src = a.counterpart_index.unwrap();
                prop_assert!(st.iter().any(|b| b.dimension.value() == 6
                    && b.focal_index == src
                    && b.counterpart_index == Some(a.focal_index)));
            }
        }
        prop_assert_eq!(st.len(), 2 * g.edges().len());
    }

    #[test]
    fn fuzzed_statements_have_consistent_dimensions(
        lines in proptest::collection::vec(
            (0usize..5, 0usize..4, 0usize..5, 0usize..3, 0usize..6),
            0..12,
        )
    ) {
        let s = story(4, 0);
        let lhs = ["Event 1: Sam saw the dog", "Sam saw the rain number 0", "Sam is happy (emotion)", "at the park (location)", "nothing here"];
        let conn = [" >Causes/Enables> ", " >Causes> ", " causes ", " -> "];
        let rhs = ["Event 2: Sam saw the apple", "Sam saw the bus number 3", "Sam has an umbrella (possession)", "xyz", "Event 9: far", "Sam was tired (Event 3)"];
        let text: String = lines
            .iter()
            .map(|&(a, c, b, g, _)| format!("{}{}{}\n", lhs[a], conn[c], rhs[(b + g) % rhs.len()]))
            .collect();
        for grammar in [OutputGrammar::StatementList, OutputGrammar::NaturalLanguage, OutputGrammar::FreeFormat] {
            let parsed = parse_statements(&text, &s, grammar, "fz");
            for st in &parsed.value {
                prop_assert_eq!(Dimension::from_parts(st.dimension.direction(), st.counterpart_kind), st.dimension);
                prop_assert!(st.focal_index < s.len());
                prop_assert!(st.counterpart_index != Some(st.focal_index));
            }
        }
    }

    #[test]
    fn render_is_injective(a in 1usize..6, b in 1usize..6, sa in 0usize..8, sb in 0usize..8) {
        let (x, y) = (story(a, sa), story(b, sb));
        let catalog = PromptCatalog::builtin();
        for name in TemplateName::ALL {
            for t in catalog.templates(name) {
                let same = x.sentences() == y.sentences();
                prop_assert_eq!(t.render(&x).text == t.render(&y).text, same);
            }
        }
    }
}

#[test]
fn dimension_mapping_is_a_bijection() {
    let mut seen = std::collections::BTreeSet::new();
    for d in Dimension::all() {
        assert_eq!(Dimension::from_parts(d.direction(), d.kind()), d);
        seen.insert((d.direction() == Direction::Cause, d.kind()));
    }
    assert_eq!(seen.len(), 10);
}
