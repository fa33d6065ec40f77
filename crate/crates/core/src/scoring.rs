//! Story-quality scoring with star-rating prompts and correlation against
//! human ratings.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::gateway::{CacheKey, ChatRequest, Gateway, GatewayError};
use crate::metrics::{kendall_tau, pearson, spearman, MetricError};
use crate::prompt::{parse_edge_list, PromptCatalog, PromptMode, TemplateName};
use crate::story::{EventGraph, Story, StorySource};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ScoringError {
    #[error("could not find a 1-5 star rating in: {0:?}")]
    UnparseableRating(String),
    #[error("two-stage scoring needs an event graph")]
    MissingGraph,
    #[error("duplicate story ({0}, {1})")]
    Duplicate(String, String),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratedStory {
    /// The beginning sentence the story was generated from.
    pub prompt_id: String,
    pub model_id: String,
    pub text: String,
    pub human_stars: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoringVariant {
    Baseline,
    InsertCausal,
    TwoStage,
}

impl ScoringVariant {
    pub const ALL: [ScoringVariant; 3] = [
        ScoringVariant::Baseline,
        ScoringVariant::InsertCausal,
        ScoringVariant::TwoStage,
    ];
}

impl fmt::Display for ScoringVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScoringVariant::Baseline => "baseline",
            ScoringVariant::InsertCausal => "insert_causal",
            ScoringVariant::TwoStage => "two_stage",
        })
    }
}

impl FromStr for ScoringVariant {
    type Err = ScoringError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ScoringVariant::ALL
            .into_iter()
            .find(|v| v.to_string() == s)
            .ok_or_else(|| ScoringError::Invalid(format!("unknown scoring variant `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub prompt_id: String,
    pub model_id: String,
    pub machine_stars: u8,
    pub variant: ScoringVariant,
    pub graph_digest: Option<String>,
}

fn rubric(causal: bool) -> String {
    let (c, cly) = if causal {
        ("causal ", "causally ")
    } else {
        ("", "")
    };
    format!(
        "Score the following storyline given the beginning of the story with one to five stars.\n\
         Where one star means \"Nonsense\",\n\
         two stars mean \"The storyline has some {c}connections with the beginning, but is not understandable\",\n\
         three stars mean \"The storyline has some {c}connections with the beginning and is understandable\",\n\
         four stars mean \"The storyline is {cly}consistent with the beginning and possibly involves a few grammar mistakes\", and\n\
         five stars mean \"Perfect storyline with {c}connections and perfect grammar\".\n"
    )
}

pub const GRAPH_PREAMBLE: &str = "We also provide causal connections analyzed by experts, where each event is represented as a node, and the causal connections between these nodes are listed.";
pub const GRAPH_GUIDANCE: &str =
    "Your score should reward stories with rich causal chains and penalize those that lack or have confusing causal chains.";

/// Prompt text for one story. The two-stage variant places the graph block
/// after the storyline and before the closing `Stars:` cue.
pub fn scoring_prompt_text(
    story: &GeneratedStory,
    variant: ScoringVariant,
    graph: Option<&EventGraph>,
) -> Result<String, ScoringError> {
    let mut text = rubric(variant == ScoringVariant::InsertCausal);
    text.push_str(&format!(
        "\nThe beginning of the story: {}\n\nStoryline: {}\n\n",
        story.prompt_id, story.text
    ));
    if variant == ScoringVariant::TwoStage {
        let g = graph.ok_or(ScoringError::MissingGraph)?;
        text.push_str(GRAPH_PREAMBLE);
        text.push_str("\nEvent graph:\n");
        text.push_str(&g.body_text());
        text.push_str(GRAPH_GUIDANCE);
        text.push_str("\n\n");
    }
    text.push_str("Stars:");
    Ok(text)
}

pub fn build_scoring_prompt(
    story: &GeneratedStory,
    variant: ScoringVariant,
    graph: Option<&EventGraph>,
    model: &str,
) -> Result<ChatRequest, ScoringError> {
    Ok(ChatRequest::user(
        model,
        scoring_prompt_text(story, variant, graph)?,
    ))
}

fn star_adjacent_re() -> &'static Regex {
    static R: OnceLock<Regex> = OnceLock::new();
    R.get_or_init(|| Regex::new(r"(?i)\b(\d+)\s*-?\s*stars?\b|\bstars?\s*[:=]?\s*(\d+)\b").unwrap())
}

fn integer_re() -> &'static Regex {
    static R: OnceLock<Regex> = OnceLock::new();
    R.get_or_init(|| Regex::new(r"\b(\d+)\b").unwrap())
}

fn word_adjacent_re() -> &'static Regex {
    static R: OnceLock<Regex> = OnceLock::new();
    R.get_or_init(|| {
        Regex::new(r"(?i)\b(one|two|three|four|five)\s*-?\s*stars?\b|\bstars?\s*[:=]?\s*(one|two|three|four|five)\b").unwrap()
    })
}

fn word_re() -> &'static Regex {
    static R: OnceLock<Regex> = OnceLock::new();
    R.get_or_init(|| Regex::new(r"(?i)\b(one|two|three|four|five)\b").unwrap())
}

fn in_range(s: &str) -> Option<u8> {
    s.parse::<u8>().ok().filter(|k| (1..=5).contains(k))
}

fn word_value(s: &str) -> u8 {
    match s.to_ascii_lowercase().as_str() {
        "one" => 1,
        "two" => 2,
        "three" => 3,
        "four" => 4,
        _ => 5,
    }
}

/// Reads a 1-5 rating. Tried in order: a number next to "star(s)", any
/// standalone number, a number word (next to "star(s)" first). Values
/// outside 1..=5 are skipped, never clamped.
pub fn parse_star_rating(text: &str) -> Result<u8, ScoringError> {
    let from_caps = |c: regex::Captures<'_>| c.get(1).or(c.get(2)).map(|m| m.as_str().to_string());
    if let Some(k) = star_adjacent_re()
        .captures_iter(text)
        .filter_map(from_caps)
        .find_map(|s| in_range(&s))
    {
        return Ok(k);
    }
    if let Some(k) = integer_re()
        .captures_iter(text)
        .find_map(|c| in_range(&c[1]))
    {
        return Ok(k);
    }
    if let Some(w) = word_adjacent_re().captures_iter(text).find_map(from_caps) {
        return Ok(word_value(&w));
    }
    if let Some(c) = word_re().captures(text) {
        return Ok(word_value(&c[1]));
    }
    Err(ScoringError::UnparseableRating(text.to_string()))
}

/// Naive sentence splitter on `.`, `!` or `?` followed by whitespace.
pub fn split_sentences(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let mut chars = text.chars().peekable();
    while let Some(c) = chars.next() {
        cur.push(c);
        if matches!(c, '.' | '!' | '?') && chars.peek().is_none_or(|n| n.is_whitespace()) {
            let s = cur.split_whitespace().collect::<Vec<_>>().join(" ");
            if !s.is_empty() {
                out.push(s);
            }
            cur.clear();
        }
    }
    let s = cur.split_whitespace().collect::<Vec<_>>().join(" ");
    if !s.is_empty() {
        out.push(s);
    }
    out
}

/// Beginning plus storyline as an event list.
pub fn story_events(story: &GeneratedStory) -> Result<Story, ScoringError> {
    let mut sentences = split_sentences(&story.prompt_id);
    sentences.extend(split_sentences(&story.text));
    let id = format!("{}::{}", story.prompt_id, story.model_id);
    Story::new(id, sentences, StorySource::Other).map_err(|e| ScoringError::Invalid(e.to_string()))
}

/// Stage-1 request: the event-graph template with a single demonstration.
pub fn graph_request(
    catalog: &PromptCatalog,
    story: &Story,
    model: &str,
) -> Result<ChatRequest, ScoringError> {
    let template = catalog
        .template(TemplateName::EventGraph, PromptMode::Joint)
        .map_err(|e| ScoringError::Invalid(e.to_string()))?
        .single_demonstration();
    Ok(ChatRequest::user(model, template.render(story).text))
}

/// Outcome of scoring a whole dataset with one variant.
#[derive(Debug, Clone, Default)]
pub struct ScoringRun {
    pub records: Vec<ScoreRecord>,
    /// (prompt_id, model_id, reason) for stories without a usable score.
    pub failures: Vec<(String, String, String)>,
}

pub fn run_scoring(
    gateway: &Gateway,
    catalog: &PromptCatalog,
    stories: &[GeneratedStory],
    variant: ScoringVariant,
    model: &str,
    max_in_flight: usize,
) -> Result<ScoringRun, ScoringError> {
    let mut seen = std::collections::BTreeSet::new();
    for s in stories {
        if !seen.insert((&s.prompt_id, &s.model_id)) {
            return Err(ScoringError::Duplicate(
                s.prompt_id.clone(),
                s.model_id.clone(),
            ));
        }
    }
    let mut run = ScoringRun::default();
    let mut graphs: Vec<Option<(EventGraph, String)>> = vec![None; stories.len()];
    let mut usable = vec![true; stories.len()];
    if variant == ScoringVariant::TwoStage {
        let events: Vec<Result<Story, ScoringError>> = stories.iter().map(story_events).collect();
        let mut reqs = Vec::new();
        let mut owners = Vec::new();
        for (i, e) in events.iter().enumerate() {
            match e {
                Ok(st) => {
                    reqs.push(graph_request(catalog, st, model)?);
                    owners.push(i);
                }
                Err(err) => {
                    usable[i] = false;
                    run.failures.push((
                        stories[i].prompt_id.clone(),
                        stories[i].model_id.clone(),
                        err.to_string(),
                    ));
                }
            }
        }
        for ((i, req), resp) in owners
            .iter()
            .zip(&reqs)
            .zip(gateway.batch_complete(&reqs, max_in_flight))
        {
            match resp {
                Ok(r) => {
                    let st = events[*i].as_ref().expect("owner has events");
                    let graph = parse_edge_list(&r.text, st).value;
                    graphs[*i] = Some((graph, CacheKey::of(req).to_string()));
                }
                Err(e @ GatewayError::CacheMiss { .. }) => return Err(e.into()),
                Err(e) => {
                    usable[*i] = false;
                    run.failures.push((
                        stories[*i].prompt_id.clone(),
                        stories[*i].model_id.clone(),
                        e.to_string(),
                    ));
                }
            }
        }
    }
    let mut reqs = Vec::new();
    let mut owners = Vec::new();
    for (i, s) in stories.iter().enumerate() {
        if usable[i] {
            reqs.push(build_scoring_prompt(
                s,
                variant,
                graphs[i].as_ref().map(|g| &g.0),
                model,
            )?);
            owners.push(i);
        }
    }
    for (i, resp) in owners
        .into_iter()
        .zip(gateway.batch_complete(&reqs, max_in_flight))
    {
        let s = &stories[i];
        if let Err(e @ GatewayError::CacheMiss { .. }) = resp {
            return Err(e.into());
        }
        match resp
            .map_err(ScoringError::from)
            .and_then(|r| parse_star_rating(&r.text))
        {
            Ok(k) => run.records.push(ScoreRecord {
                prompt_id: s.prompt_id.clone(),
                model_id: s.model_id.clone(),
                machine_stars: k,
                variant,
                graph_digest: graphs[i].as_ref().map(|g| g.1.clone()),
            }),
            Err(e) => run
                .failures
                .push((s.prompt_id.clone(), s.model_id.clone(), e.to_string())),
        }
    }
    Ok(run)
}

/// One JSON object per line with the [`GeneratedStory`] fields.
pub fn read_generated_stories(text: &str) -> Result<Vec<GeneratedStory>, ScoringError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let s: GeneratedStory = serde_json::from_str(l)
                .map_err(|e| ScoringError::Invalid(format!("line {}: {e}", i + 1)))?;
            if !(1.0..=5.0).contains(&s.human_stars) {
                return Err(ScoringError::Invalid(format!(
                    "line {}: human rating {} outside 1-5",
                    i + 1,
                    s.human_stars
                )));
            }
            Ok(s)
        })
        .collect()
}

pub const SCORES_HEADER: &str = "prompt_id\tmodel_id\tvariant\tmachine_stars\tgraph_digest";

pub fn write_scores_tsv(records: &[ScoreRecord]) -> String {
    let clean = |s: &str| s.replace(['\t', '\n', '\r'], " ");
    let mut out = format!("{SCORES_HEADER}\n");
    for r in records {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\n",
            clean(&r.prompt_id),
            clean(&r.model_id),
            r.variant,
            r.machine_stars,
            r.graph_digest.as_deref().unwrap_or("-")
        ));
    }
    out
}

pub fn read_scores_tsv(text: &str) -> Result<Vec<ScoreRecord>, ScoringError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == SCORES_HEADER => {}
        _ => {
            return Err(ScoringError::Invalid(format!(
                "scores file must start with `{SCORES_HEADER}`"
            )))
        }
    }
    let mut out = Vec::new();
    for (i, line) in lines {
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        let bad = |what: &str| ScoringError::Invalid(format!("line {}: {what}", i + 1));
        if f.len() != 5 {
            return Err(bad("expected 5 columns"));
        }
        let machine_stars: u8 = f[3].parse().map_err(|_| bad("bad star count"))?;
        if !(1..=5).contains(&machine_stars) {
            return Err(bad("star count outside 1-5"));
        }
        out.push(ScoreRecord {
            prompt_id: f[0].to_string(),
            model_id: f[1].to_string(),
            variant: f[2].parse()?,
            machine_stars,
            graph_digest: (f[4] != "-").then(|| f[4].to_string()),
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rho {
    Pearson,
    Spearman,
    Kendall,
}

impl Rho {
    pub fn apply(self, x: &[f64], y: &[f64]) -> Result<f64, MetricError> {
        match self {
            Rho::Pearson => pearson(x, y),
            Rho::Spearman => spearman(x, y),
            Rho::Kendall => kendall_tau(x, y),
        }
    }
}

/// A machine score paired with its human rating.
#[derive(Debug, Clone, PartialEq)]
pub struct JoinedScore {
    pub prompt_id: String,
    pub model_id: String,
    pub machine: f64,
    pub human: f64,
}

/// Pairs records with the human ratings of their stories; records without a
/// matching story are dropped.
pub fn join_scores(records: &[ScoreRecord], stories: &[GeneratedStory]) -> Vec<JoinedScore> {
    let human: BTreeMap<(&str, &str), f64> = stories
        .iter()
        .map(|s| ((s.prompt_id.as_str(), s.model_id.as_str()), s.human_stars))
        .collect();
    records
        .iter()
        .filter_map(|r| {
            human
                .get(&(r.prompt_id.as_str(), r.model_id.as_str()))
                .map(|&h| JoinedScore {
                    prompt_id: r.prompt_id.clone(),
                    model_id: r.model_id.clone(),
                    machine: r.machine_stars as f64,
                    human: h,
                })
        })
        .collect()
}

pub fn dataset_correlation(records: &[JoinedScore], rho: Rho) -> Result<f64, MetricError> {
    let m: Vec<f64> = records.iter().map(|r| r.machine).collect();
    let h: Vec<f64> = records.iter().map(|r| r.human).collect();
    rho.apply(&m, &h)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PromptLevel {
    /// `None` when every group was skipped.
    pub mean: Option<f64>,
    pub skipped: usize,
}

/// Mean within-prompt correlation; groups where it is undefined are skipped
/// and counted.
pub fn prompt_level_correlation(records: &[JoinedScore], rho: Rho) -> PromptLevel {
    let mut groups: BTreeMap<&str, Vec<&JoinedScore>> = BTreeMap::new();
    for r in records {
        groups.entry(&r.prompt_id).or_default().push(r);
    }
    let mut values = Vec::new();
    let mut skipped = 0;
    for g in groups.values() {
        let m: Vec<f64> = g.iter().map(|r| r.machine).collect();
        let h: Vec<f64> = g.iter().map(|r| r.human).collect();
        match rho.apply(&m, &h) {
            Ok(v) => values.push(v),
            Err(_) => skipped += 1,
        }
    }
    let mean = (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64);
    PromptLevel { mean, skipped }
}

/// Keeps records whose human rating is at least `min_stars` (or strictly
/// above it when `inclusive` is false).
pub fn filter_by_human(
    records: &[JoinedScore],
    min_stars: f64,
    inclusive: bool,
) -> Vec<JoinedScore> {
    records
        .iter()
        .filter(|r| {
            if inclusive {
                r.human >= min_stars
            } else {
                r.human > min_stars
            }
        })
        .cloned()
        .collect()
}

pub fn filtered_correlation(
    records: &[JoinedScore],
    rho: Rho,
    min_stars: f64,
    inclusive: bool,
) -> Result<f64, MetricError> {
    let kept = filter_by_human(records, min_stars, inclusive);
    if kept.len() < 2 {
        return Err(MetricError::Degenerate(format!(
            "{} record(s) left after filtering",
            kept.len()
        )));
    }
    dataset_correlation(&kept, rho)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationRow {
    pub variant: ScoringVariant,
    pub level: &'static str,
    pub pearson: Option<f64>,
    pub spearman: Option<f64>,
    pub kendall: Option<f64>,
    pub kendall_filtered: Option<f64>,
    pub skipped_prompts: usize,
}

pub const CORRELATION_HEADER: &str =
    "variant\tlevel\tpearson\tspearman\tkendall\tkendall_filtered\tskipped_prompts";

/// Dataset- and prompt-level rows for one variant.
pub fn correlation_rows(
    variant: ScoringVariant,
    records: &[JoinedScore],
    min_stars: f64,
    inclusive: bool,
) -> [CorrelationRow; 2] {
    let filtered = filter_by_human(records, min_stars, inclusive);
    let prompt = |rs: &[JoinedScore], rho| prompt_level_correlation(rs, rho);
    let p = [
        prompt(records, Rho::Pearson),
        prompt(records, Rho::Spearman),
        prompt(records, Rho::Kendall),
    ];
    let pf = prompt(&filtered, Rho::Kendall);
    [
        CorrelationRow {
            variant,
            level: "prompt",
            pearson: p[0].mean,
            spearman: p[1].mean,
            kendall: p[2].mean,
            kendall_filtered: pf.mean,
            skipped_prompts: p[2].skipped,
        },
        CorrelationRow {
            variant,
            level: "dataset",
            pearson: dataset_correlation(records, Rho::Pearson).ok(),
            spearman: dataset_correlation(records, Rho::Spearman).ok(),
            kendall: dataset_correlation(records, Rho::Kendall).ok(),
            kendall_filtered: filtered_correlation(records, Rho::Kendall, min_stars, inclusive)
                .ok(),
            skipped_prompts: 0,
        },
    ]
}

pub fn correlation_tsv(rows: &[CorrelationRow]) -> String {
    let f = |v: Option<f64>| v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "NA".into());
    let mut out = format!("{CORRELATION_HEADER}\n");
    for r in rows {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
            r.variant,
            r.level,
            f(r.pearson),
            f(r.spearman),
            f(r.kendall),
            f(r.kendall_filtered),
            r.skipped_prompts
        ));
    }
    out
}
