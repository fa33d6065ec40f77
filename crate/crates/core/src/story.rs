//! Stories, event graphs and dimensioned causal statements.
//!
//! A story is an ordered list of sentences and every sentence is one event.
//! Event graphs connect those events with directed causal edges; graphs
//! decoded from chain-style model output may also carry auxiliary state
//! nodes (emotions, locations, ...) which [`EventGraph::project`] contracts
//! away.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("story `{0}` has no sentences")]
    EmptyStory(String),
    #[error("story `{story}` sentence {index} is blank")]
    BlankSentence { story: String, index: usize },
    #[error("story `{story}` sentence {index} contains a line break")]
    MultilineSentence { story: String, index: usize },
    #[error("invalid identifier `{0}`: must be non-empty and single-line")]
    InvalidId(String),
    #[error("node {node} is out of range for a graph with {len} nodes")]
    NodeOutOfRange { node: usize, len: usize },
    #[error("state node {node} is out of range ({len} state nodes)")]
    StateOutOfRange { node: usize, len: usize },
    #[error("self-loop on {0}")]
    SelfLoop(NodeRef),
    #[error("graph contains a cycle through node {0}")]
    Cycle(usize),
    #[error("dimension {0} is outside 1..=10")]
    InvalidDimension(u8),
    #[error("unknown counterpart kind `{0}`")]
    UnknownKind(String),
    #[error("statement dimension {dimension} conflicts with counterpart kind {kind}")]
    KindMismatch {
        dimension: Dimension,
        kind: CounterpartKind,
    },
    #[error("statement counterpart index equals its focal index {0}")]
    CounterpartIsFocal(usize),
}

/// Error raised while decoding the event-graph text form.
#[derive(Debug, Error, Clone, PartialEq)]
#[error("line {line}: {message}")]
pub struct GraphParseError {
    pub line: usize,
    pub message: String,
}

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, Default,
)]
#[serde(rename_all = "snake_case")]
pub enum StorySource {
    Glucose,
    Openmeva,
    Symon,
    Yms,
    #[default]
    Other,
}

impl fmt::Display for StorySource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StorySource::Glucose => "glucose",
            StorySource::Openmeva => "openmeva",
            StorySource::Symon => "symon",
            StorySource::Yms => "yms",
            StorySource::Other => "other",
        })
    }
}

fn valid_line(s: &str) -> bool {
    !s.trim().is_empty() && !s.contains(['\n', '\r'])
}

/// An ordered narrative; sentence `i` is event `i`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawStory", into = "RawStory")]
pub struct Story {
    id: String,
    sentences: Vec<String>,
    source: StorySource,
}

#[derive(Serialize, Deserialize)]
struct RawStory {
    id: String,
    sentences: Vec<String>,
    #[serde(default)]
    source: StorySource,
}

impl TryFrom<RawStory> for Story {
    type Error = ModelError;
    fn try_from(raw: RawStory) -> Result<Self, Self::Error> {
        Story::new(raw.id, raw.sentences, raw.source)
    }
}

impl From<Story> for RawStory {
    fn from(s: Story) -> Self {
        RawStory {
            id: s.id,
            sentences: s.sentences,
            source: s.source,
        }
    }
}

impl Story {
    pub fn new(
        id: impl Into<String>,
        sentences: Vec<String>,
        source: StorySource,
    ) -> Result<Self, ModelError> {
        let id = id.into();
        if !valid_line(&id) {
            return Err(ModelError::InvalidId(id));
        }
        if sentences.is_empty() {
            return Err(ModelError::EmptyStory(id));
        }
        for (index, s) in sentences.iter().enumerate() {
            if s.trim().is_empty() {
                return Err(ModelError::BlankSentence { story: id, index });
            }
            if s.contains(['\n', '\r']) {
                return Err(ModelError::MultilineSentence { story: id, index });
            }
        }
        Ok(Story {
            id,
            sentences,
            source,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn sentences(&self) -> &[String] {
        &self.sentences
    }

    pub fn source(&self) -> StorySource {
        self.source
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    pub fn sentence(&self, index: usize) -> Option<&str> {
        self.sentences.get(index).map(String::as_str)
    }

    pub fn nodes(&self) -> Vec<EventNode> {
        self.sentences
            .iter()
            .enumerate()
            .map(|(index, text)| EventNode {
                index,
                text: text.clone(),
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EventNode {
    pub index: usize,
    pub text: String,
}

/// Endpoint of a causal edge: a story event or an auxiliary state node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum NodeRef {
    Event(usize),
    State(usize),
}

impl NodeRef {
    pub fn event(self) -> Option<usize> {
        match self {
            NodeRef::Event(i) => Some(i),
            NodeRef::State(_) => None,
        }
    }
}

impl fmt::Display for NodeRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NodeRef::Event(i) => write!(f, "Node {i}"),
            NodeRef::State(i) => write!(f, "State {i}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CausalEdge {
    pub src: NodeRef,
    pub dst: NodeRef,
}

impl CausalEdge {
    pub fn events(src: usize, dst: usize) -> Self {
        CausalEdge {
            src: NodeRef::Event(src),
            dst: NodeRef::Event(dst),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StateNode {
    pub text: String,
    pub kind: CounterpartKind,
}

/// Directed causal graph over the events of one story.
///
/// Edges are kept in a set, so duplicates collapse at construction. Cycles
/// are allowed; use [`EventGraph::ensure_acyclic`] where a DAG is required.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventGraph {
    story_id: String,
    nodes: Vec<EventNode>,
    edges: BTreeSet<CausalEdge>,
    state_nodes: Vec<StateNode>,
}

impl EventGraph {
    /// A graph holding the story's events and no edges.
    pub fn from_story(story: &Story) -> Self {
        EventGraph {
            story_id: story.id().to_string(),
            nodes: story.nodes(),
            edges: BTreeSet::new(),
            state_nodes: Vec::new(),
        }
    }

    pub fn new(
        story_id: impl Into<String>,
        nodes: Vec<EventNode>,
        state_nodes: Vec<StateNode>,
        edges: impl IntoIterator<Item = CausalEdge>,
    ) -> Result<Self, ModelError> {
        let story_id = story_id.into();
        if !valid_line(&story_id) {
            return Err(ModelError::InvalidId(story_id));
        }
        for (i, n) in nodes.iter().enumerate() {
            if n.index != i {
                return Err(ModelError::NodeOutOfRange {
                    node: n.index,
                    len: nodes.len(),
                });
            }
            if !valid_line(&n.text) {
                return Err(ModelError::BlankSentence {
                    story: story_id,
                    index: i,
                });
            }
        }
        for (i, s) in state_nodes.iter().enumerate() {
            if !valid_line(&s.text) {
                return Err(ModelError::BlankSentence {
                    story: story_id,
                    index: i,
                });
            }
        }
        let mut graph = EventGraph {
            story_id,
            nodes,
            edges: BTreeSet::new(),
            state_nodes,
        };
        for e in edges {
            graph.add_edge(e)?;
        }
        Ok(graph)
    }

    pub fn with_event_edges(
        mut self,
        edges: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self, ModelError> {
        for (s, d) in edges {
            self.add_edge(CausalEdge::events(s, d))?;
        }
        Ok(self)
    }

    fn check(&self, r: NodeRef) -> Result<(), ModelError> {
        match r {
            NodeRef::Event(i) if i >= self.nodes.len() => Err(ModelError::NodeOutOfRange {
                node: i,
                len: self.nodes.len(),
            }),
            NodeRef::State(i) if i >= self.state_nodes.len() => Err(ModelError::StateOutOfRange {
                node: i,
                len: self.state_nodes.len(),
            }),
            _ => Ok(()),
        }
    }

    /// Inserts an edge; returns `false` if it was already present.
    pub fn add_edge(&mut self, edge: CausalEdge) -> Result<bool, ModelError> {
        self.check(edge.src)?;
        self.check(edge.dst)?;
        if edge.src == edge.dst {
            return Err(ModelError::SelfLoop(edge.src));
        }
        Ok(self.edges.insert(edge))
    }

    /// Appends a state node, reusing an identical existing one.
    pub fn add_state(&mut self, state: StateNode) -> Result<usize, ModelError> {
        if !valid_line(&state.text) {
            return Err(ModelError::BlankSentence {
                story: self.story_id.clone(),
                index: self.state_nodes.len(),
            });
        }
        if let Some(i) = self.state_nodes.iter().position(|s| *s == state) {
            return Ok(i);
        }
        self.state_nodes.push(state);
        Ok(self.state_nodes.len() - 1)
    }

    pub fn story_id(&self) -> &str {
        &self.story_id
    }

    pub fn nodes(&self) -> &[EventNode] {
        &self.nodes
    }

    pub fn edges(&self) -> &BTreeSet<CausalEdge> {
        &self.edges
    }

    pub fn state_nodes(&self) -> &[StateNode] {
        &self.state_nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Edges whose endpoints are both events, as index pairs.
    pub fn event_edges(&self) -> BTreeSet<(usize, usize)> {
        self.edges
            .iter()
            .filter_map(|e| Some((e.src.event()?, e.dst.event()?)))
            .collect()
    }

    fn successors(&self) -> BTreeMap<NodeRef, Vec<NodeRef>> {
        let mut out: BTreeMap<NodeRef, Vec<NodeRef>> = BTreeMap::new();
        for e in &self.edges {
            out.entry(e.src).or_default().push(e.dst);
        }
        out
    }

    /// Event-only view: every event → state … state → event path becomes a
    /// direct event → event edge. Idempotent.
    pub fn project(&self) -> EventGraph {
        if self.state_nodes.is_empty() {
            return self.clone();
        }
        let succ = self.successors();
        let mut edges = BTreeSet::new();
        for src in 0..self.nodes.len() {
            let start = NodeRef::Event(src);
            let mut seen = BTreeSet::from([start]);
            let mut stack: Vec<NodeRef> = succ.get(&start).cloned().unwrap_or_default();
            while let Some(n) = stack.pop() {
                if !seen.insert(n) {
                    continue;
                }
                match n {
                    NodeRef::Event(dst) => {
                        if dst != src {
                            edges.insert(CausalEdge::events(src, dst));
                        }
                    }
                    NodeRef::State(_) => {
                        if let Some(next) = succ.get(&n) {
                            stack.extend(next.iter().copied());
                        }
                    }
                }
            }
        }
        EventGraph {
            story_id: self.story_id.clone(),
            nodes: self.nodes.clone(),
            edges,
            state_nodes: Vec::new(),
        }
    }

    /// Ancestors of `node` ordered by BFS distance over reversed edges, ties
    /// broken by descending index. State nodes are contracted first.
    pub fn causal_predecessors(&self, node: usize) -> Result<Vec<usize>, ModelError> {
        if node >= self.nodes.len() {
            return Err(ModelError::NodeOutOfRange {
                node,
                len: self.nodes.len(),
            });
        }
        let projected;
        let graph = if self.state_nodes.is_empty() {
            self
        } else {
            projected = self.project();
            &projected
        };
        let mut parents: Vec<Vec<usize>> = vec![Vec::new(); graph.nodes.len()];
        for (s, d) in graph.event_edges() {
            parents[d].push(s);
        }
        let mut visited = vec![false; graph.nodes.len()];
        visited[node] = true;
        let mut out = Vec::new();
        let mut frontier = vec![node];
        while !frontier.is_empty() {
            let mut next: Vec<usize> = frontier
                .iter()
                .flat_map(|&v| parents[v].iter().copied())
                .filter(|&p| !visited[p])
                .collect::<BTreeSet<_>>()
                .into_iter()
                .rev()
                .collect();
            next.retain(|&p| !std::mem::replace(&mut visited[p], true));
            out.extend_from_slice(&next);
            frontier = next;
        }
        Ok(out)
    }

    pub fn is_acyclic(&self) -> bool {
        self.find_cycle_node().is_none()
    }

    pub fn ensure_acyclic(&self) -> Result<(), ModelError> {
        match self.find_cycle_node() {
            Some(n) => Err(ModelError::Cycle(n)),
            None => Ok(()),
        }
    }

    // Kahn's algorithm on the projected event graph.
    fn find_cycle_node(&self) -> Option<usize> {
        let g = self.project();
        let n = g.nodes.len();
        let mut indeg = vec![0usize; n];
        let mut children: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (s, d) in g.event_edges() {
            indeg[d] += 1;
            children[s].push(d);
        }
        let mut queue: VecDeque<usize> = (0..n).filter(|&i| indeg[i] == 0).collect();
        while let Some(v) = queue.pop_front() {
            for &c in &children[v] {
                indeg[c] -= 1;
                if indeg[c] == 0 {
                    queue.push_back(c);
                }
            }
        }
        indeg.iter().position(|&d| d > 0)
    }

    /// Canonical text form.
    ///
    /// ```text
    /// # graph <story_id>
    /// Node <i>: <text>
    /// State <k> (<kind>): <text>
    /// Edge <k>: (Node <i> -> Node <j>)
    /// ```
    ///
    /// Edges are sorted by endpoint; `State` lines only appear when the
    /// graph has state nodes.
    pub fn to_text(&self) -> String {
        let mut out = format!("# graph {}\n", self.story_id);
        out.push_str(&self.body_text());
        out
    }

    /// Node, state and edge lines without the header.
    pub fn body_text(&self) -> String {
        let mut out = String::new();
        for n in &self.nodes {
            out.push_str(&format!("Node {}: {}\n", n.index, n.text));
        }
        for (k, s) in self.state_nodes.iter().enumerate() {
            out.push_str(&format!("State {k} ({}): {}\n", s.kind, s.text));
        }
        for (k, e) in self.edges.iter().enumerate() {
            out.push_str(&format!("Edge {k}: ({} -> {})\n", e.src, e.dst));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<EventGraph, GraphParseError> {
        let err = |line: usize, message: String| GraphParseError { line, message };
        let mut lines = text.split('\n').enumerate().map(|(i, l)| (i + 1, l));
        let (_, header) = lines.next().ok_or_else(|| err(1, "empty input".into()))?;
        let story_id = header
            .strip_prefix("# graph ")
            .ok_or_else(|| err(1, "expected `# graph <story_id>` header".into()))?;
        let mut nodes = Vec::new();
        let mut states = Vec::new();
        let mut edges = Vec::new();
        let mut trailing_blank = false;
        for (no, line) in lines {
            if trailing_blank {
                return Err(err(no - 1, "blank line inside graph".into()));
            }
            if line.is_empty() {
                trailing_blank = true;
                continue;
            }
            if let Some(rest) = line.strip_prefix("Node ") {
                let (idx, body) = rest
                    .split_once(": ")
                    .ok_or_else(|| err(no, "malformed node line".into()))?;
                let idx: usize = idx
                    .parse()
                    .map_err(|_| err(no, format!("bad node index `{idx}`")))?;
                if idx != nodes.len() || !edges.is_empty() || !states.is_empty() {
                    return Err(err(no, format!("node {idx} out of order")));
                }
                nodes.push(EventNode {
                    index: idx,
                    text: body.to_string(),
                });
            } else if let Some(rest) = line.strip_prefix("State ") {
                let (head, body) = rest
                    .split_once("): ")
                    .ok_or_else(|| err(no, "malformed state line".into()))?;
                let (idx, kind) = head
                    .split_once(" (")
                    .ok_or_else(|| err(no, "malformed state line".into()))?;
                let idx: usize = idx
                    .parse()
                    .map_err(|_| err(no, format!("bad state index `{idx}`")))?;
                if idx != states.len() || !edges.is_empty() {
                    return Err(err(no, format!("state {idx} out of order")));
                }
                let kind = kind
                    .parse()
                    .map_err(|e: ModelError| err(no, e.to_string()))?;
                states.push(StateNode {
                    text: body.to_string(),
                    kind,
                });
            } else if let Some(rest) = line.strip_prefix("Edge ") {
                let (idx, body) = rest
                    .split_once(": ")
                    .ok_or_else(|| err(no, "malformed edge line".into()))?;
                if idx.parse::<usize>().ok() != Some(edges.len()) {
                    return Err(err(no, format!("edge number `{idx}` out of sequence")));
                }
                let body = body
                    .strip_prefix('(')
                    .and_then(|b| b.strip_suffix(')'))
                    .ok_or_else(|| err(no, "edge must be parenthesised".into()))?;
                let (a, b) = body
                    .split_once(" -> ")
                    .ok_or_else(|| err(no, "edge missing `->`".into()))?;
                let parse_ref = |s: &str| -> Result<NodeRef, GraphParseError> {
                    if let Some(i) = s.strip_prefix("Node ") {
                        i.parse()
                            .map(NodeRef::Event)
                            .map_err(|_| err(no, format!("bad `{s}`")))
                    } else if let Some(i) = s.strip_prefix("State ") {
                        i.parse()
                            .map(NodeRef::State)
                            .map_err(|_| err(no, format!("bad `{s}`")))
                    } else {
                        Err(err(no, format!("unknown endpoint `{s}`")))
                    }
                };
                let edge = CausalEdge {
                    src: parse_ref(a)?,
                    dst: parse_ref(b)?,
                };
                if edges.last().is_some_and(|last| *last >= edge) {
                    return Err(err(no, "edges not in canonical order".into()));
                }
                edges.push(edge);
            } else {
                return Err(err(no, format!("unrecognised line `{line}`")));
            }
        }
        if !trailing_blank {
            return Err(err(
                text.split('\n').count(),
                "missing final newline".into(),
            ));
        }
        let line_count = text.split('\n').count();
        EventGraph::new(story_id, nodes, states, edges).map_err(|e| err(line_count, e.to_string()))
    }
}

/// Which side of the focal event the counterpart sits on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Cause,
    Effect,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CounterpartKind {
    Event,
    Emotion,
    Location,
    Possession,
    OtherProperty,
}

impl CounterpartKind {
    pub const ALL: [CounterpartKind; 5] = [
        CounterpartKind::Event,
        CounterpartKind::Emotion,
        CounterpartKind::Location,
        CounterpartKind::Possession,
        CounterpartKind::OtherProperty,
    ];

    fn offset(self) -> u8 {
        match self {
            CounterpartKind::Event => 0,
            CounterpartKind::Emotion => 1,
            CounterpartKind::Location => 2,
            CounterpartKind::Possession => 3,
            CounterpartKind::OtherProperty => 4,
        }
    }
}

impl fmt::Display for CounterpartKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CounterpartKind::Event => "event",
            CounterpartKind::Emotion => "emotion",
            CounterpartKind::Location => "location",
            CounterpartKind::Possession => "possession",
            CounterpartKind::OtherProperty => "other property",
        })
    }
}

impl FromStr for CounterpartKind {
    type Err = ModelError;

    /// Accepts the tag spellings models tend to produce ("other property",
    /// "emotional state", "possession state", ...).
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_ascii_lowercase().replace(['_', '-'], " ");
        let norm = norm.trim_end_matches(" state").trim();
        Ok(match norm {
            "event" => CounterpartKind::Event,
            "emotion" | "emotional" | "emotions" | "motivation" | "basic human drive"
            | "human drive" | "feeling" => CounterpartKind::Emotion,
            "location" | "place" => CounterpartKind::Location,
            "possession" | "possessions" => CounterpartKind::Possession,
            "other property" | "other" | "property" | "attribute" | "other attribute"
            | "other properties" => CounterpartKind::OtherProperty,
            _ => return Err(ModelError::UnknownKind(s.to_string())),
        })
    }
}

/// One of the ten annotated causal relation types; 1..=5 describe causes of
/// the focal event, 6..=10 its effects.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct Dimension(u8);

impl Dimension {
    pub fn new(value: u8) -> Result<Self, ModelError> {
        if (1..=10).contains(&value) {
            Ok(Dimension(value))
        } else {
            Err(ModelError::InvalidDimension(value))
        }
    }

    pub fn all() -> impl Iterator<Item = Dimension> {
        (1..=10).map(Dimension)
    }

    pub fn from_parts(direction: Direction, kind: CounterpartKind) -> Self {
        let base = match direction {
            Direction::Cause => 1,
            Direction::Effect => 6,
        };
        Dimension(base + kind.offset())
    }

    pub fn value(self) -> u8 {
        self.0
    }

    pub fn direction(self) -> Direction {
        if self.0 <= 5 {
            Direction::Cause
        } else {
            Direction::Effect
        }
    }

    pub fn kind(self) -> CounterpartKind {
        CounterpartKind::ALL[usize::from((self.0 - 1) % 5)]
    }

    /// Connective used when a statement of this dimension is written out as
    /// a rule, cause side first.
    pub fn connective(self) -> &'static str {
        match self.0 {
            1 | 6 => ">Causes/Enables>",
            2 => ">Motivates>",
            3..=5 => ">Enables>",
            7 => ">Causes>",
            _ => ">Results in>",
        }
    }
}

impl TryFrom<u8> for Dimension {
    type Error = ModelError;
    fn try_from(v: u8) -> Result<Self, Self::Error> {
        Dimension::new(v)
    }
}

impl From<Dimension> for u8 {
    fn from(d: Dimension) -> u8 {
        d.0
    }
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CausalStatement {
    pub story_id: String,
    pub focal_index: usize,
    pub dimension: Dimension,
    pub counterpart_text: String,
    pub counterpart_kind: CounterpartKind,
    pub counterpart_index: Option<usize>,
    pub source_prompt: String,
}

impl CausalStatement {
    pub fn new(
        story_id: impl Into<String>,
        focal_index: usize,
        dimension: Dimension,
        counterpart_text: impl Into<String>,
        counterpart_index: Option<usize>,
        source_prompt: impl Into<String>,
    ) -> Result<Self, ModelError> {
        if counterpart_index == Some(focal_index) {
            return Err(ModelError::CounterpartIsFocal(focal_index));
        }
        let kind = dimension.kind();
        if counterpart_index.is_some() && kind != CounterpartKind::Event {
            return Err(ModelError::KindMismatch { dimension, kind });
        }
        Ok(CausalStatement {
            story_id: story_id.into(),
            focal_index,
            dimension,
            counterpart_text: counterpart_text.into(),
            counterpart_kind: kind,
            counterpart_index,
            source_prompt: source_prompt.into(),
        })
    }

    /// Writes the statement as a `cause >Connective> effect` rule, using the
    /// story sentence for the focal side.
    pub fn to_rule(&self, story: &Story) -> String {
        let focal = story.sentence(self.focal_index).unwrap_or_default().trim();
        let focal = focal.trim_end_matches(['.', '!', '?']);
        let other = self.counterpart_text.trim();
        match self.dimension.direction() {
            Direction::Cause => format!("{other} {} {focal}", self.dimension.connective()),
            Direction::Effect => format!("{focal} {} {other}", self.dimension.connective()),
        }
    }
}
