//! Event-causality extraction from stories with prompted chat models.
//!
//! The crate covers the whole batch pipeline: rendering extraction prompts
//! and parsing their output grammars ([`prompt`]), a cached chat-completion
//! gateway ([`gateway`]), ensemble voting over prompt variants
//! ([`ensemble`]), reference-based metrics and correlations ([`metrics`]),
//! the story-quality scoring harness ([`scoring`]), video-text alignment
//! with causal context ([`alignment`]) and corpus loaders ([`corpus`]).

pub mod alignment;
pub mod corpus;
pub mod ensemble;
pub mod extract;
pub mod gateway;
pub mod metrics;
pub mod prompt;
pub mod scoring;
pub mod story;

pub use story::{
    CausalEdge, CausalStatement, CounterpartKind, Dimension, Direction, EventGraph, EventNode,
    ModelError, NodeRef, StateNode, Story, StorySource,
};
