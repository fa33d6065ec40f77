use std::collections::BTreeMap;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{write_graphs, write_stories, CorpusError};
use crate::alignment::{
    planted_fixture, write_gold, write_segments, write_similarity, GoldAlignment, Granularity,
    SimilarityMatrix, VideoSegment,
};
use crate::ensemble::{write_detection_tsv, DetectionTable};
use crate::prompt::{statements_from_graph, TemplateName};
use crate::story::{CausalStatement, Dimension, EventGraph, Story, StorySource};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixtureShape {
    pub n_stories: usize,
    pub sentences_per_story: usize,
    pub edge_density: f64,
}

impl Default for FixtureShape {
    fn default() -> Self {
        FixtureShape {
            n_stories: 4,
            sentences_per_story: 5,
            edge_density: 0.3,
        }
    }
}

/// Video segments for one story with a planted gold alignment.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentFixture {
    pub story_id: String,
    pub segments: Vec<VideoSegment>,
    pub gold: GoldAlignment,
    pub similarity: SimilarityMatrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixtureBundle {
    pub stories: Vec<Story>,
    pub graphs: Vec<EventGraph>,
    pub tables: Vec<DetectionTable>,
    pub alignments: Vec<AlignmentFixture>,
}

impl FixtureBundle {
    /// Relative path to file contents, in the formats of the owning modules.
    pub fn files(&self) -> BTreeMap<String, String> {
        let mut files = BTreeMap::new();
        files.insert("stories.jsonl".into(), write_stories(&self.stories));
        files.insert("graphs.txt".into(), write_graphs(&self.graphs));
        files.insert("detections.tsv".into(), write_detection_tsv(&self.tables));
        for a in &self.alignments {
            files.insert(
                format!("alignment/{}.segments", a.story_id),
                write_segments(&a.segments),
            );
            files.insert(
                format!("alignment/{}.gold", a.story_id),
                write_gold(&a.gold),
            );
            files.insert(
                format!("alignment/{}.sim", a.story_id),
                write_similarity(&a.similarity),
            );
        }
        files
    }

    pub fn write_to(&self, dir: &std::path::Path) -> Result<(), CorpusError> {
        for (name, contents) in self.files() {
            super::write_atomic(&dir.join(name), contents.as_bytes())?;
        }
        Ok(())
    }
}

const NAMES: [&str; 8] = ["Ann", "Bo", "Cy", "Dee", "Eli", "Fay", "Gus", "Hal"];
const VERBS: [&str; 10] = [
    "painted", "dropped", "found", "sold", "fixed", "lost", "carried", "washed", "opened",
    "borrowed",
];
const OBJECTS: [&str; 12] = [
    "fence", "kettle", "bicycle", "lantern", "ladder", "piano", "wagon", "basket", "mirror",
    "canoe", "drum", "quilt",
];

fn sentence(rng: &mut ChaCha8Rng, k: usize) -> String {
    let name = NAMES.choose(rng).expect("non-empty");
    let verb = VERBS.choose(rng).expect("non-empty");
    let object = OBJECTS[k % OBJECTS.len()];
    format!("{name} {verb} the {object}.")
}

fn planted_table(rng: &mut ChaCha8Rng, story: &Story, graph: &EventGraph) -> DetectionTable {
    let truth = statements_from_graph(graph, story, "fixture");
    let mut table = DetectionTable::new(story.id());
    for (t, &name) in TemplateName::ALL.iter().enumerate() {
        let recall = 0.5 + 0.04 * t as f64;
        for s in &truth {
            if rng.random_bool(recall) {
                let mut s = s.clone();
                s.source_prompt = name.as_str().into();
                table.insert(name, s);
            }
        }
        if story.len() > 1 && rng.random_bool(0.2) {
            let a = rng.random_range(0..story.len());
            let b = (a + rng.random_range(1..story.len())) % story.len();
            let dim = Dimension::new(if b < a { 1 } else { 6 }).expect("valid dimension");
            let text = story.sentence(b).expect("in range");
            let noise = CausalStatement::new(story.id(), a, dim, text, Some(b), name.as_str())
                .expect("distinct events");
            table.insert(name, noise);
        }
    }
    table
}

/// Seeded synthetic bundle. Graph edges only point forward, each prompt
/// detects true statements with its own recall plus occasional noise, and
/// every story gets a planted alignment over three segments per sentence.
pub fn make_fixture(seed: u64, shape: FixtureShape) -> Result<FixtureBundle, CorpusError> {
    if shape.n_stories == 0 || shape.sentences_per_story == 0 {
        return Err(CorpusError::Config(
            "fixture shape needs positive counts".into(),
        ));
    }
    if !(0.0..=1.0).contains(&shape.edge_density) {
        return Err(CorpusError::Config(format!(
            "edge density {} outside [0, 1]",
            shape.edge_density
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bundle = FixtureBundle {
        stories: Vec::new(),
        graphs: Vec::new(),
        tables: Vec::new(),
        alignments: Vec::new(),
    };
    for k in 0..shape.n_stories {
        let id = format!("fx{seed}-{k}");
        let sentences = (0..shape.sentences_per_story)
            .map(|i| sentence(&mut rng, i))
            .collect();
        let story = Story::new(&id, sentences, StorySource::Other)
            .map_err(|e| CorpusError::Validation(e.to_string()))?;
        let n = story.len();
        let mut edges = Vec::new();
        for a in 0..n {
            for b in a + 1..n {
                if rng.random_bool(shape.edge_density) {
                    edges.push((a, b));
                }
            }
        }
        let graph = EventGraph::from_story(&story)
            .with_event_edges(edges)
            .expect("forward edges are acyclic");
        let table = planted_table(&mut rng, &story, &graph);
        let planted = planted_fixture(rng.random(), n, 3 * n).expect("three segments per sentence");
        bundle.alignments.push(AlignmentFixture {
            story_id: id,
            segments: planted.segments,
            gold: GoldAlignment {
                assignment: planted.gold,
                granularity: Granularity::Sentence,
            },
            similarity: planted.similarity,
        });
        bundle.stories.push(story);
        bundle.graphs.push(graph);
        bundle.tables.push(table);
    }
    Ok(bundle)
}
