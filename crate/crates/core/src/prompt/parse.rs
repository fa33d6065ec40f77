//! Tolerant parsers for the model output grammars.
//!
//! Model output drifts from the demonstrated format, so every parser scans
//! line by line, keeps whatever it can interpret and records the rest as
//! [`Diagnostic`]s instead of failing.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::OnceLock;

use regex::Regex;

use super::{OutputGrammar, PromptTemplate};
use crate::story::{
    CausalEdge, CausalStatement, CounterpartKind, Dimension, Direction, EventGraph, NodeRef,
    StateNode, Story,
};

/// Minimum fraction of a description's tokens that must appear in a story
/// sentence before an untagged description is resolved to that event.
pub const MIN_TOKEN_OVERLAP: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub reason: String,
    pub line: String,
}

impl Diagnostic {
    fn new(reason: impl Into<String>, line: &str) -> Self {
        Diagnostic {
            reason: reason.into(),
            line: line.to_string(),
        }
    }
}

/// A parse result together with the lines that could not be used.
#[derive(Debug, Clone, PartialEq)]
pub struct Parsed<T> {
    pub value: T,
    pub diagnostics: Vec<Diagnostic>,
}

/// Line-oriented diagnostics for a whole run:
/// `<story_id>\t<template>\t<reason>\t<raw line>`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DiagnosticsReport {
    rows: Vec<(String, String, Diagnostic)>,
}

impl DiagnosticsReport {
    pub fn extend(&mut self, story_id: &str, template: &str, diags: &[Diagnostic]) {
        self.rows.extend(
            diags
                .iter()
                .map(|d| (story_id.to_string(), template.to_string(), d.clone())),
        );
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn to_tsv(&self) -> String {
        let clean = |s: &str| s.replace(['\t', '\n', '\r'], " ");
        self.rows
            .iter()
            .map(|(story, template, d)| {
                format!(
                    "{}\t{}\t{}\t{}\n",
                    clean(story),
                    clean(template),
                    clean(&d.reason),
                    clean(&d.line)
                )
            })
            .collect()
    }
}

fn re(cell: &'static OnceLock<Regex>, pattern: &str) -> &'static Regex {
    cell.get_or_init(|| Regex::new(pattern).expect("static regex"))
}

fn edge_re() -> &'static Regex {
    static R: OnceLock<Regex> = OnceLock::new();
    re(&R, r"Node\s*(\d+)\s*->\s*Node\s*(\d+)")
}

fn node_decl_re() -> &'static Regex {
    static R: OnceLock<Regex> = OnceLock::new();
    re(&R, r"^\s*Node\s*\d+\s*:")
}

/// Extracts `Node i -> Node j` pairs from free text.
pub fn parse_edges(text: &str, n_nodes: usize) -> Parsed<BTreeSet<(usize, usize)>> {
    let mut edges = BTreeSet::new();
    let mut diagnostics = Vec::new();
    let mut matched_any = false;
    for line in text.lines() {
        if node_decl_re().is_match(line) {
            continue;
        }
        for caps in edge_re().captures_iter(line) {
            matched_any = true;
            let (Ok(a), Ok(b)) = (caps[1].parse::<usize>(), caps[2].parse::<usize>()) else {
                diagnostics.push(Diagnostic::new("edge endpoint out of range", line));
                continue;
            };
            if a >= n_nodes || b >= n_nodes {
                diagnostics.push(Diagnostic::new("edge endpoint out of range", line));
            } else if a == b {
                diagnostics.push(Diagnostic::new("self-loop dropped", line));
            } else {
                edges.insert((a, b));
            }
        }
    }
    if !matched_any && !text.trim().is_empty() {
        diagnostics.push(Diagnostic::new(
            "no parseable edges",
            text.lines().next().unwrap_or(""),
        ));
    }
    Parsed {
        value: edges,
        diagnostics,
    }
}

/// Builds an event graph from an edge-list response.
pub fn parse_edge_list(text: &str, story: &Story) -> Parsed<EventGraph> {
    let Parsed { value, diagnostics } = parse_edges(text, story.len());
    let graph = EventGraph::from_story(story)
        .with_event_edges(value)
        .expect("edges were bounds-checked");
    Parsed {
        value: graph,
        diagnostics,
    }
}

fn chain_prefix_re() -> &'static Regex {
    static R: OnceLock<Regex> = OnceLock::new();
    re(&R, r"(?i)^\s*(?:[-*]\s*)?chain\s*\d+\s*:\s*")
}

fn event_item_re() -> &'static Regex {
    static R: OnceLock<Regex> = OnceLock::new();
    re(&R, r"(?i)^\(?\s*event\s*(\d+)\s*\)?\s*(?:[:.]\s*.*)?$")
}

fn trailing_tag_re() -> &'static Regex {
    static R: OnceLock<Regex> = OnceLock::new();
    re(&R, r"^(.*?)\s*\(([^()]*)\)\s*[.,;!]*\s*$")
}

fn event_tag_re() -> &'static Regex {
    static R: OnceLock<Regex> = OnceLock::new();
    re(&R, r"(?i)^\s*event\s*(\d+)\s*$")
}

/// Builds a graph (with state nodes) from `Chain k: a -> b -> c` lines.
pub fn parse_chain_list(text: &str, story: &Story) -> Parsed<EventGraph> {
    let mut graph = EventGraph::from_story(story);
    let mut diagnostics = Vec::new();
    for line in text.lines() {
        if line.trim().is_empty() {
            continue;
        }
        let body = chain_prefix_re().replace(line, "");
        if !body.contains("->") {
            diagnostics.push(Diagnostic::new("not a chain line", line));
            continue;
        }
        let mut prev: Option<NodeRef> = None;
        for item in body.split("->").map(str::trim) {
            let node = chain_item(item, story, &mut graph, line, &mut diagnostics);
            if let (Some(a), Some(b)) = (prev, node) {
                if a != b {
                    graph
                        .add_edge(CausalEdge { src: a, dst: b })
                        .expect("endpoints validated");
                }
            }
            prev = node;
        }
    }
    Parsed {
        value: graph,
        diagnostics,
    }
}

fn chain_item(
    item: &str,
    story: &Story,
    graph: &mut EventGraph,
    line: &str,
    diagnostics: &mut Vec<Diagnostic>,
) -> Option<NodeRef> {
    let item = item.trim_end_matches(['.', ',', ';']).trim();
    if item.is_empty() {
        diagnostics.push(Diagnostic::new("empty chain item", line));
        return None;
    }
    let event_index = event_item_re()
        .captures(item)
        .map(|c| c[1].to_string())
        .or_else(|| {
            let caps = trailing_tag_re().captures(item)?;
            event_tag_re().captures(&caps[2]).map(|c| c[1].to_string())
        });
    if let Some(idx) = event_index {
        return match idx.parse::<usize>() {
            Ok(i) if i < story.len() => Some(NodeRef::Event(i)),
            _ => {
                diagnostics.push(Diagnostic::new("chain event out of range", line));
                None
            }
        };
    }
    let (text, kind) = match trailing_tag_re().captures(item) {
        Some(c) => match c[2].parse::<CounterpartKind>() {
            Ok(CounterpartKind::Event) | Err(_) => {
                (item.to_string(), CounterpartKind::OtherProperty)
            }
            Ok(k) => (c[1].trim().to_string(), k),
        },
        None => (item.to_string(), CounterpartKind::OtherProperty),
    };
    if text.is_empty() {
        diagnostics.push(Diagnostic::new("empty chain item", line));
        return None;
    }
    graph
        .add_state(StateNode { text, kind })
        .ok()
        .map(NodeRef::State)
}

fn tokens(text: &str) -> BTreeSet<String> {
    text.to_lowercase()
        .split(|c: char| !(c.is_alphanumeric() || c == '\''))
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

/// Story sentence sharing the largest fraction of `text`'s tokens, if that
/// fraction reaches [`MIN_TOKEN_OVERLAP`]. Ties go to the earlier sentence.
pub(crate) fn resolve_by_overlap(text: &str, story: &Story) -> Option<usize> {
    let probe = tokens(text);
    if probe.is_empty() {
        return None;
    }
    let mut best: Option<(usize, f64)> = None;
    for (i, s) in story.sentences().iter().enumerate() {
        let sentence = tokens(s);
        let overlap = probe.intersection(&sentence).count() as f64 / probe.len() as f64;
        if best.is_none_or(|(_, b)| overlap > b) {
            best = Some((i, overlap));
        }
    }
    best.filter(|&(_, o)| o >= MIN_TOKEN_OVERLAP)
        .map(|(i, _)| i)
}

#[derive(Debug, Clone, PartialEq)]
enum Side {
    Event { index: usize, text: String },
    UnindexedEvent(String),
    State { kind: CounterpartKind, text: String },
}

fn leading_event_re() -> &'static Regex {
    static R: OnceLock<Regex> = OnceLock::new();
    re(&R, r"(?i)^event\s*(\d+)\s*[:\-]\s*(.+)$")
}

fn bullet_re() -> &'static Regex {
    static R: OnceLock<Regex> = OnceLock::new();
    re(&R, r"^\s*(?:[-*\u{2022}]|\d+[.)])\s+")
}

fn clean_text(s: &str) -> String {
    s.trim()
        .trim_end_matches(['.', ',', ';', '!'])
        .trim()
        .to_string()
}

fn parse_side(raw: &str, story: &Story, line: &str, diags: &mut Vec<Diagnostic>) -> Side {
    let raw = raw.trim();
    let tagged_event =
        |idx: &str, text: String, diags: &mut Vec<Diagnostic>| match idx.parse::<usize>() {
            Ok(i) if i < story.len() => Side::Event { index: i, text },
            _ => {
                diags.push(Diagnostic::new("event index out of range", line));
                Side::UnindexedEvent(text)
            }
        };
    if let Some(c) = trailing_tag_re().captures(raw) {
        let text = clean_text(&c[1]);
        if let Some(e) = event_tag_re().captures(&c[2]) {
            return tagged_event(&e[1], text, diags);
        }
        match c[2].parse::<CounterpartKind>() {
            Ok(CounterpartKind::Event) => {}
            Ok(kind) => return Side::State { kind, text },
            Err(_) => {}
        }
    }
    if let Some(c) = leading_event_re().captures(raw) {
        return tagged_event(&c[1], clean_text(&c[2]), diags);
    }
    let text = clean_text(raw);
    match resolve_by_overlap(&text, story) {
        Some(index) => Side::Event { index, text },
        None => Side::UnindexedEvent(text),
    }
}

fn statements_from_sides(
    cause: Side,
    effect: Side,
    story: &Story,
    source: &str,
    line: &str,
    out: &mut Vec<CausalStatement>,
    diags: &mut Vec<Diagnostic>,
) {
    let mk =
        |focal: usize, dir: Direction, kind: CounterpartKind, text: String, idx: Option<usize>| {
            CausalStatement::new(
                story.id(),
                focal,
                Dimension::from_parts(dir, kind),
                text,
                idx,
                source,
            )
            .expect("dimension derived from kind")
        };
    use Side::*;
    match (cause, effect) {
        (Event { index: a, .. }, Event { index: b, .. }) if a == b => {
            diags.push(Diagnostic::new("cause and effect are the same event", line));
        }
        (Event { index: a, text: ta }, Event { index: b, text: tb }) => {
            out.push(mk(
                a,
                Direction::Effect,
                CounterpartKind::Event,
                tb,
                Some(b),
            ));
            out.push(mk(b, Direction::Cause, CounterpartKind::Event, ta, Some(a)));
        }
        (State { kind, text }, Event { index, .. }) => {
            out.push(mk(index, Direction::Cause, kind, text, None));
        }
        (Event { index, .. }, State { kind, text }) => {
            out.push(mk(index, Direction::Effect, kind, text, None));
        }
        (UnindexedEvent(text), Event { index, .. }) => {
            out.push(mk(
                index,
                Direction::Cause,
                CounterpartKind::Event,
                text,
                None,
            ));
        }
        (Event { index, .. }, UnindexedEvent(text)) => {
            out.push(mk(
                index,
                Direction::Effect,
                CounterpartKind::Event,
                text,
                None,
            ));
        }
        _ => diags.push(Diagnostic::new("no resolvable focal event", line)),
    }
}

fn connective_re() -> &'static Regex {
    static R: OnceLock<Regex> = OnceLock::new();
    re(
        &R,
        r"(?i)>\s*(?:causes\s*/\s*enables|causes|enables|results\s+in|motivates)\s*>",
    )
}

fn natural_connective_re() -> &'static Regex {
    static R: OnceLock<Regex> = OnceLock::new();
    re(&R, r"(?i)\b(?:results\s+in|enables|causes)\b")
}

fn free_id_re() -> &'static Regex {
    static R: OnceLock<Regex> = OnceLock::new();
    re(&R, r"(?i)^\s*original\s+event\s+id\s*:\s*(\d+)")
}

fn free_field_re() -> &'static Regex {
    static R: OnceLock<Regex> = OnceLock::new();
    re(
        &R,
        r"(?i)^\s*(event|cause|effect|motivation|emotional\s+effect)\s*:\s*(.*)$",
    )
}

/// Parses statement-style output into dimensioned causal statements.
///
/// `source` is recorded on every statement as the producing prompt.
pub fn parse_statements(
    text: &str,
    story: &Story,
    grammar: OutputGrammar,
    source: &str,
) -> Parsed<Vec<CausalStatement>> {
    let mut out = Vec::new();
    let mut diags = Vec::new();
    match grammar {
        OutputGrammar::StatementList | OutputGrammar::NaturalLanguage => {
            for line in text.lines() {
                let body = bullet_re().replace(line, "");
                if body.trim().is_empty() {
                    continue;
                }
                let split = if grammar == OutputGrammar::StatementList {
                    connective_re().find(&body).map(|m| (m.start(), m.end()))
                } else {
                    let matches: Vec<_> = natural_connective_re().find_iter(&body).collect();
                    matches
                        .iter()
                        .find(|m| body[..m.start()].trim_end().ends_with(')'))
                        .or(matches.first())
                        .map(|m| (m.start(), m.end()))
                };
                let Some((start, end)) = split else {
                    diags.push(Diagnostic::new("no connective", line));
                    continue;
                };
                let cause = parse_side(&body[..start], story, line, &mut diags);
                let effect = parse_side(&body[end..], story, line, &mut diags);
                statements_from_sides(cause, effect, story, source, line, &mut out, &mut diags);
            }
        }
        OutputGrammar::FreeFormat => {
            let mut focal: Option<usize> = None;
            for line in text.lines() {
                if line.trim().is_empty() {
                    continue;
                }
                if let Some(c) = free_id_re().captures(line) {
                    focal = c[1].parse::<usize>().ok().filter(|&i| i < story.len());
                    if focal.is_none() {
                        diags.push(Diagnostic::new("event id out of range", line));
                    }
                    continue;
                }
                let Some(c) = free_field_re().captures(line) else {
                    diags.push(Diagnostic::new("unrecognised field", line));
                    continue;
                };
                let label = c[1].to_lowercase();
                if label == "event" {
                    continue;
                }
                let Some(f) = focal else {
                    diags.push(Diagnostic::new("no resolvable focal event", line));
                    continue;
                };
                let value = clean_text(&c[2]);
                if value.is_empty() {
                    continue;
                }
                let (dir, kind) = match label.split_whitespace().collect::<Vec<_>>().as_slice() {
                    ["cause"] => (Direction::Cause, CounterpartKind::Event),
                    ["effect"] => (Direction::Effect, CounterpartKind::Event),
                    ["motivation"] => (Direction::Cause, CounterpartKind::Emotion),
                    _ => (Direction::Effect, CounterpartKind::Emotion),
                };
                let idx = if kind == CounterpartKind::Event {
                    resolve_by_overlap(&value, story).filter(|&i| i != f)
                } else {
                    None
                };
                out.push(
                    CausalStatement::new(
                        story.id(),
                        f,
                        Dimension::from_parts(dir, kind),
                        value,
                        idx,
                        source,
                    )
                    .expect("consistent by construction"),
                );
            }
        }
        OutputGrammar::EdgeList | OutputGrammar::ChainList => {
            diags.push(Diagnostic::new(
                "graph grammar passed to statement parser",
                "",
            ));
        }
    }
    Parsed {
        value: out,
        diagnostics: diags,
    }
}

/// Causal statements implied by a graph: each event edge yields the cause
/// statement (dimension 1) for its target and the effect statement
/// (dimension 6) for its source; state nodes adjacent to events yield
/// state dimensions.
pub fn statements_from_graph(
    graph: &EventGraph,
    story: &Story,
    source: &str,
) -> Vec<CausalStatement> {
    let text = |r: NodeRef| match r {
        NodeRef::Event(i) => story.sentence(i).unwrap_or_default().to_string(),
        NodeRef::State(i) => graph.state_nodes()[i].text.clone(),
    };
    let mut out = Vec::new();
    for e in graph.edges() {
        let mk = |focal, dir, kind, cp: NodeRef| {
            CausalStatement::new(
                story.id(),
                focal,
                Dimension::from_parts(dir, kind),
                text(cp),
                cp.event(),
                source,
            )
            .expect("consistent by construction")
        };
        match (e.src, e.dst) {
            (NodeRef::Event(a), NodeRef::Event(b)) => {
                out.push(mk(a, Direction::Effect, CounterpartKind::Event, e.dst));
                out.push(mk(b, Direction::Cause, CounterpartKind::Event, e.src));
            }
            (NodeRef::Event(a), NodeRef::State(s)) => {
                out.push(mk(a, Direction::Effect, graph.state_nodes()[s].kind, e.dst));
            }
            (NodeRef::State(s), NodeRef::Event(b)) => {
                out.push(mk(b, Direction::Cause, graph.state_nodes()[s].kind, e.src));
            }
            (NodeRef::State(_), NodeRef::State(_)) => {}
        }
    }
    out
}

/// Parsed model output in the shape its grammar produces.
#[derive(Debug, Clone, PartialEq)]
pub enum ParsedOutput {
    Graph(EventGraph),
    Statements(Vec<CausalStatement>),
}

impl ParsedOutput {
    /// Statement view; graphs are converted with [`statements_from_graph`].
    pub fn statements(&self, story: &Story, source: &str) -> Vec<CausalStatement> {
        match self {
            ParsedOutput::Graph(g) => statements_from_graph(g, story, source),
            ParsedOutput::Statements(s) => s.clone(),
        }
    }
}

/// Dispatches on the template's grammar.
pub fn parse_output(text: &str, story: &Story, template: &PromptTemplate) -> Parsed<ParsedOutput> {
    match template.grammar {
        OutputGrammar::EdgeList => {
            let p = parse_edge_list(text, story);
            Parsed {
                value: ParsedOutput::Graph(p.value),
                diagnostics: p.diagnostics,
            }
        }
        OutputGrammar::ChainList => {
            let p = parse_chain_list(text, story);
            Parsed {
                value: ParsedOutput::Graph(p.value),
                diagnostics: p.diagnostics,
            }
        }
        g => {
            let p = parse_statements(text, story, g, &template.label());
            let mut value = p.value;
            value.retain(|s| template.mode.keeps(s.dimension.direction()));
            Parsed {
                value: ParsedOutput::Statements(value),
                diagnostics: p.diagnostics,
            }
        }
    }
}

/// Counts statements per dimension; handy in reports.
pub fn dimension_histogram(statements: &[CausalStatement]) -> BTreeMap<Dimension, usize> {
    let mut h = BTreeMap::new();
    for s in statements {
        *h.entry(s.dimension).or_default() += 1;
    }
    h
}
