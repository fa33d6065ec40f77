//! Batch extraction: every (template, story) prompt goes through the
//! gateway and the parsed statements land in per-story detection tables.

use std::collections::BTreeMap;

use crate::ensemble::DetectionTable;
use crate::gateway::{ChatRequest, Gateway, GatewayError, Message};
use crate::prompt::{
    parse_output, DiagnosticsReport, ParsedOutput, PromptCatalog, PromptTemplate, TemplateName,
};
use crate::story::{EventGraph, Story};

#[derive(Debug, Clone, PartialEq)]
pub struct ExtractionSettings {
    pub model: String,
    pub temperature: f64,
    /// Keep only the first demonstration of every template.
    pub single_demonstration: bool,
    pub max_in_flight: usize,
}

impl Default for ExtractionSettings {
    fn default() -> Self {
        ExtractionSettings {
            model: crate::gateway::DEFAULT_MODEL.into(),
            temperature: 0.0,
            single_demonstration: false,
            max_in_flight: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtractedGraph {
    pub template: String,
    pub graph: EventGraph,
}

#[derive(Debug, Clone, Default)]
pub struct Extraction {
    /// Keyed by story id, in input order of first appearance.
    pub tables: BTreeMap<String, DetectionTable>,
    pub graphs: Vec<ExtractedGraph>,
    pub diagnostics: DiagnosticsReport,
    /// (story id, template label, message) for requests that failed.
    pub failures: Vec<(String, String, String)>,
}

/// Runs `templates` over `stories`. A replay-mode cache miss aborts the
/// run; other request failures are recorded and skipped.
pub fn run_extraction(
    gateway: &Gateway,
    catalog: &PromptCatalog,
    stories: &[Story],
    templates: &[TemplateName],
    settings: &ExtractionSettings,
) -> Result<Extraction, GatewayError> {
    let mut jobs: Vec<(&Story, PromptTemplate)> = Vec::new();
    for story in stories {
        for &name in templates {
            for t in catalog.templates(name) {
                let t = if settings.single_demonstration {
                    t.single_demonstration()
                } else {
                    t
                };
                jobs.push((story, t));
            }
        }
    }
    let requests = jobs
        .iter()
        .map(|(story, t)| {
            ChatRequest::new(
                &settings.model,
                settings.temperature,
                vec![Message::user(t.render(story).text)],
            )
        })
        .collect::<Result<Vec<_>, _>>()?;
    let responses = gateway.batch_complete(&requests, settings.max_in_flight);
    let mut out = Extraction::default();
    for story in stories {
        out.tables
            .entry(story.id().to_string())
            .or_insert_with(|| DetectionTable::new(story.id()));
    }
    for ((story, template), response) in jobs.iter().zip(responses) {
        let label = template.label();
        let text = match response {
            Ok(r) => r.text,
            Err(e @ GatewayError::CacheMiss { .. }) => return Err(e),
            Err(e) => {
                out.failures
                    .push((story.id().to_string(), label, e.to_string()));
                continue;
            }
        };
        let parsed = parse_output(&text, story, template);
        out.diagnostics
            .extend(story.id(), &label, &parsed.diagnostics);
        let table = out.tables.get_mut(story.id()).expect("table per story");
        for s in parsed.value.statements(story, &label) {
            table.insert(template.name, s);
        }
        if let ParsedOutput::Graph(graph) = parsed.value {
            out.graphs.push(ExtractedGraph {
                template: label,
                graph,
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::ResponseCache;
    use crate::story::StorySource;

    fn stories() -> Vec<Story> {
        vec![Story::new(
            "s1",
            vec![
                "Tom lost his keys.".into(),
                "He searched the house.".into(),
                "He found them in the fridge.".into(),
            ],
            StorySource::Other,
        )
        .unwrap()]
    }

    #[test]
    fn stub_run_fills_tables_and_replays() {
        let dir = tempfile::tempdir().unwrap();
        let catalog = PromptCatalog::builtin();
        let settings = ExtractionSettings::default();
        let stub = Gateway::stub(ResponseCache::new(dir.path()));
        let a = run_extraction(&stub, &catalog, &stories(), &TemplateName::ALL, &settings).unwrap();
        assert!(a.failures.is_empty());
        assert!(!a.tables["s1"].is_empty());
        assert!(a.graphs.iter().any(|g| g.template == "event_graph"));
        let replay = Gateway::replay(ResponseCache::new(dir.path()));
        let b =
            run_extraction(&replay, &catalog, &stories(), &TemplateName::ALL, &settings).unwrap();
        assert_eq!(a.tables, b.tables);
        assert_eq!(a.diagnostics, b.diagnostics);

        let empty = tempfile::tempdir().unwrap();
        let cold = Gateway::replay(ResponseCache::new(empty.path()));
        let err = run_extraction(
            &cold,
            &catalog,
            &stories(),
            &[TemplateName::Basic],
            &settings,
        )
        .unwrap_err();
        assert!(matches!(err, GatewayError::CacheMiss { .. }));
    }
}
