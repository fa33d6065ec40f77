use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{io_err, write_atomic, CorpusError};
use crate::story::{EventGraph, Story, StorySource};

#[derive(Serialize, Deserialize)]
struct StoryRecord {
    id: String,
    sentences: Vec<String>,
    #[serde(default)]
    source: StorySource,
}

/// One JSON object per line: `{"id", "sentences", "source"?}`.
pub fn read_stories(text: &str) -> Result<Vec<Story>, CorpusError> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: StoryRecord = serde_json::from_str(line).map_err(|e| CorpusError::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        let story = Story::new(rec.id, rec.sentences, rec.source)
            .map_err(|e| CorpusError::Validation(format!("line {}: {e}", i + 1)))?;
        if !seen.insert(story.id().to_string()) {
            return Err(CorpusError::Config(format!(
                "duplicate story id `{}` on line {}",
                story.id(),
                i + 1
            )));
        }
        out.push(story);
    }
    Ok(out)
}

pub fn load_stories(path: &Path) -> Result<Vec<Story>, CorpusError> {
    read_stories(&std::fs::read_to_string(path).map_err(io_err(path))?)
}

pub fn write_stories(stories: &[Story]) -> String {
    stories
        .iter()
        .map(|s| {
            let rec = StoryRecord {
                id: s.id().into(),
                sentences: s.sentences().to_vec(),
                source: s.source(),
            };
            serde_json::to_string(&rec).expect("plain record serializes") + "\n"
        })
        .collect()
}

pub fn save_stories(path: &Path, stories: &[Story]) -> Result<(), CorpusError> {
    write_atomic(path, write_stories(stories).as_bytes())
}

/// Graph text blocks separated by blank lines.
pub fn read_graphs(text: &str) -> Result<Vec<EventGraph>, CorpusError> {
    let mut out = Vec::new();
    let mut offset = 0;
    for block in text.split("\n\n") {
        let lines = block.lines().count();
        if !block.trim().is_empty() {
            let body = block.trim_start_matches('\n');
            let skipped = block.len() - body.len();
            let body = format!("{}\n", body.trim_end_matches('\n'));
            out.push(
                EventGraph::from_text(&body).map_err(|e| CorpusError::Parse {
                    line: offset + skipped + e.line,
                    message: e.message,
                })?,
            );
        }
        offset += lines + 1;
    }
    Ok(out)
}

pub fn write_graphs(graphs: &[EventGraph]) -> String {
    graphs
        .iter()
        .map(EventGraph::to_text)
        .collect::<Vec<_>>()
        .join("\n")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn five_sentence_record() {
        let text = r#"{"id":"r1","sentences":["a.","b.","c.","d.","e."]}"#;
        let s = read_stories(text).unwrap();
        assert_eq!(s[0].len(), 5);
        assert_eq!(s[0].source(), StorySource::Other);
        assert_eq!(read_stories(&write_stories(&s)).unwrap(), s);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(
            read_stories(r#"{"id":"x","sentences":[]}"#),
            Err(CorpusError::Validation(_))
        ));
        let dup = "{\"id\":\"x\",\"sentences\":[\"a\"]}\n{\"id\":\"x\",\"sentences\":[\"b\"]}\n";
        assert!(matches!(read_stories(dup), Err(CorpusError::Config(_))));
        assert!(matches!(
            read_stories("\n{oops"),
            Err(CorpusError::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn graphs_round_trip() {
        let a = Story::new("a", vec!["x".into(), "y".into()], StorySource::Other).unwrap();
        let b = Story::new(
            "b",
            vec!["p".into(), "q".into(), "r".into()],
            StorySource::Other,
        )
        .unwrap();
        let graphs = vec![
            EventGraph::from_story(&a)
                .with_event_edges([(0, 1)])
                .unwrap(),
            EventGraph::from_story(&b)
                .with_event_edges([(0, 2), (1, 2)])
                .unwrap(),
        ];
        assert_eq!(read_graphs(&write_graphs(&graphs)).unwrap(), graphs);
        assert!(read_graphs("").unwrap().is_empty());
    }
}
