//! Offline responder that answers rendered prompts with grammar-correct,
//! deterministic output. It lets the whole pipeline run without credentials
//! and is what the shipped recorded-response fixtures were generated with.
//!
//! Structure is seeded from the target story so that prompt variants mostly
//! agree, then perturbed per prompt so that voting has something to do.

use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use regex::Regex;
use sha2::{Digest, Sha256};

use super::provider::{CallError, Provider};
use super::{ChatRequest, ChatResponse};

#[derive(Debug, Clone, Copy, Default)]
pub struct StubProvider;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Shape {
    Edges,
    Chains,
    Statements,
    Natural,
    Free,
}

fn rng_for(parts: &[&str]) -> ChaCha8Rng {
    let mut h = Sha256::new();
    for p in parts {
        h.update(p.as_bytes());
        h.update([0]);
    }
    ChaCha8Rng::from_seed(h.finalize().into())
}

fn line_re() -> &'static Regex {
    static R: OnceLock<Regex> = OnceLock::new();
    R.get_or_init(|| Regex::new(r"^(Event|Node) (\d+): (.*)$").unwrap())
}

/// Target sentences: the labelled lines right before the final `Output:`.
fn target_sentences(prompt: &str) -> Vec<String> {
    let head = prompt.trim_end();
    let head = head.strip_suffix("Output:").unwrap_or(head);
    let mut out: Vec<String> = head
        .trim_end()
        .lines()
        .rev()
        .map_while(|l| line_re().captures(l).map(|c| c[3].to_string()))
        .collect();
    out.reverse();
    out
}

fn shape(prompt: &str) -> Shape {
    let first_demo = prompt
        .split("Example Output:\n")
        .nth(1)
        .and_then(|s| s.lines().next())
        .unwrap_or("");
    if first_demo.starts_with("Edge ") || (first_demo.is_empty() && prompt.contains("\nNode 0: ")) {
        Shape::Edges
    } else if first_demo.starts_with("Chain ") {
        Shape::Chains
    } else if first_demo.starts_with("Original Event ID") {
        Shape::Free
    } else if first_demo.contains(">") || first_demo.is_empty() {
        Shape::Statements
    } else {
        Shape::Natural
    }
}

fn clause(s: &str) -> String {
    s.trim().trim_end_matches(['.', '!', '?']).to_string()
}

fn tokens(s: &str) -> Vec<String> {
    s.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| t.len() > 2)
        .map(str::to_string)
        .collect()
}

/// Star rating for a story-quality prompt: lexical cohesion between
/// consecutive sentences plus a little seeded noise, clamped to 1..=5.
fn stars(prompt: &str) -> u8 {
    let story = prompt
        .lines()
        .rev()
        .find(|l| l.starts_with("Storyline:") || l.starts_with("Story:"))
        .unwrap_or(prompt);
    let sents: Vec<&str> = story
        .split(['.', '!', '?'])
        .filter(|s| !s.trim().is_empty())
        .collect();
    let mut cohesion = 0.0;
    for w in sents.windows(2) {
        let a = tokens(w[0]);
        let b = tokens(w[1]);
        if !a.is_empty() && b.iter().any(|t| a.contains(t)) {
            cohesion += 1.0;
        }
    }
    let frac = if sents.len() > 1 {
        cohesion / (sents.len() - 1) as f64
    } else {
        0.5
    };
    let noise: f64 = rng_for(&["stars", prompt]).random_range(-0.75..0.75);
    (1.0 + 4.0 * frac + noise).round().clamp(1.0, 5.0) as u8
}

struct Plan {
    edges: Vec<(usize, usize)>,
    motives: Vec<usize>,
    states: Vec<usize>,
}

fn plan(sentences: &[String], prompt: &str) -> Plan {
    let n = sentences.len();
    let story_key = sentences.join("\n");
    let mut story_rng = rng_for(&["story", &story_key]);
    let mut prompt_rng = rng_for(&["prompt", prompt]);
    let mut edges = Vec::new();
    let mut motives = Vec::new();
    let mut states = Vec::new();
    for i in 0..n {
        let adjacent = story_rng.random_bool(0.75);
        let skip = story_rng.random_bool(0.2);
        let motive = story_rng.random_bool(0.3);
        let state = story_rng.random_bool(0.25);
        let flip = |rng: &mut ChaCha8Rng, v: bool| if rng.random_bool(0.15) { !v } else { v };
        if i + 1 < n && flip(&mut prompt_rng, adjacent) {
            edges.push((i, i + 1));
        }
        if i + 2 < n && flip(&mut prompt_rng, skip) {
            edges.push((i, i + 2));
        }
        if flip(&mut prompt_rng, motive) {
            motives.push(i);
        }
        if i + 1 < n && flip(&mut prompt_rng, state) {
            states.push(i);
        }
    }
    edges.sort();
    Plan {
        edges,
        motives,
        states,
    }
}

fn respond(prompt: &str) -> String {
    if prompt.trim_end().ends_with("Stars:") {
        return format!("Stars: {}", stars(prompt));
    }
    let sents = target_sentences(prompt);
    if sents.is_empty() {
        return "I could not find an event list in the request.".to_string();
    }
    let p = plan(&sents, prompt);
    let c = |i: usize| clause(&sents[i]);
    let mut out = String::new();
    match shape(prompt) {
        Shape::Edges => {
            for (k, (a, b)) in p.edges.iter().enumerate() {
                out.push_str(&format!("Edge {k}: (Node {a} -> Node {b})\n"));
            }
        }
        Shape::Chains => {
            for (k, &(a, b)) in p.edges.iter().enumerate() {
                if p.states.contains(&a) && b == a + 1 {
                    out.push_str(&format!(
                        "Chain {k}: Event {a} -> the outcome of event {a} persists(other property) -> Event {b}\n"
                    ));
                } else {
                    out.push_str(&format!("Chain {k}: Event {a} -> Event {b}\n"));
                }
            }
        }
        Shape::Statements => {
            for &(a, b) in &p.edges {
                out.push_str(&format!(
                    "{} (Event {a}) >Causes/Enables> {} (Event {b})\n",
                    c(a),
                    c(b)
                ));
            }
            for &i in &p.motives {
                out.push_str(&format!(
                    "They want things to go well (emotion) >Motivates> {} (Event {i})\n",
                    c(i)
                ));
            }
            for &i in &p.states {
                out.push_str(&format!(
                    "{} (Event {i}) >Results in> the situation has changed (other property)\n",
                    c(i)
                ));
            }
        }
        Shape::Natural => {
            for &(a, b) in &p.edges {
                out.push_str(&format!(
                    "{} (Event {a}) causes {} (Event {b})\n",
                    c(a),
                    c(b)
                ));
            }
            for &i in &p.states {
                out.push_str(&format!(
                    "{} (Event {i}) results in the situation has changed (other property)\n",
                    c(i)
                ));
            }
        }
        Shape::Free => {
            for (i, _) in sents.iter().enumerate() {
                let causes: Vec<_> = p.edges.iter().filter(|e| e.1 == i).collect();
                let effects: Vec<_> = p.edges.iter().filter(|e| e.0 == i).collect();
                if causes.is_empty() && effects.is_empty() && !p.motives.contains(&i) {
                    continue;
                }
                out.push_str(&format!("Original Event ID: {i}\nEvent: {}\n", c(i)));
                for e in causes {
                    out.push_str(&format!("Cause: {}\n", c(e.0)));
                }
                for e in effects {
                    out.push_str(&format!("Effect: {}\n", c(e.1)));
                }
                if p.motives.contains(&i) {
                    out.push_str("Motivation: They want things to go well\n");
                }
            }
        }
    }
    out
}

impl Provider for StubProvider {
    fn call(&self, request: &ChatRequest) -> Result<ChatResponse, CallError> {
        let prompt = request
            .messages
            .iter()
            .rev()
            .find(|m| m.role == "user")
            .map(|m| m.content.as_str())
            .ok_or_else(|| CallError::Rejected("no user message".into()))?;
        let mut r = ChatResponse::new(respond(prompt));
        r.provider_meta.insert("provider".into(), "stub".into());
        Ok(r)
    }
}
