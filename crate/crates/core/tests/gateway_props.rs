use std::sync::Arc;

use proptest::prelude::*;
use storycause::gateway::{
    canonical_decode, canonical_encode, CacheKey, CallError, ChatRequest, ChatResponse, Gateway,
    Message, Provider, ResponseCache, RetryPolicy,
};

fn request_strategy() -> impl Strategy<Value = ChatRequest> {
    let message = (
        prop_oneof![Just("user"), Just("system"), Just("assistant")],
        "(?s).{0,40}",
    )
        .prop_map(|(role, content)| Message {
            role: role.to_string(),
            content,
        });
    (
        "[a-z0-9.-]{1,12}",
        prop_oneof![Just(0.0), Just(-0.0), 0.0f64..2.0],
        proptest::collection::vec(message, 1..4),
    )
        .prop_map(|(model, t, messages)| ChatRequest::new(model, t, messages).unwrap())
}

struct Upper;

impl Provider for Upper {
    fn call(&self, request: &ChatRequest) -> Result<ChatResponse, CallError> {
        Ok(ChatResponse::new(
            request.messages.last().unwrap().content.to_uppercase(),
        ))
    }
}

proptest! {
    #[test]
    fn canonical_form_round_trips(r in request_strategy()) {
        let bytes = canonical_encode(&r);
        let (decoded, used) = canonical_decode(&bytes).unwrap();
        prop_assert_eq!(used, bytes.len());
        prop_assert_eq!(canonical_encode(&decoded), bytes);
    }

    #[test]
    fn keys_collide_iff_canonical_bytes_match(a in request_strategy(), b in request_strategy()) {
        let same = canonical_encode(&a) == canonical_encode(&b);
        prop_assert_eq!(CacheKey::of(&a) == CacheKey::of(&b), same);
        prop_assert_eq!(CacheKey::of(&a), CacheKey::of(&a.clone()));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn live_write_then_replay_read(reqs in proptest::collection::vec(request_strategy(), 1..8)) {
        let dir = tempfile::tempdir().unwrap();
        let live = Gateway::live(ResponseCache::new(dir.path()), Arc::new(Upper), RetryPolicy::default());
        let first: Vec<String> = live.batch_complete(&reqs, 3).into_iter().map(|r| r.unwrap().text).collect();
        for (r, text) in reqs.iter().zip(&first) {
            prop_assert_eq!(text, &r.messages.last().unwrap().content.to_uppercase());
        }
        let replay = Gateway::replay(ResponseCache::new(dir.path()));
        let again: Vec<String> = replay.batch_complete(&reqs, 4).into_iter().map(|r| r.unwrap().text).collect();
        prop_assert_eq!(again, first);
    }
}

#[test]
fn replay_miss_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let g = Gateway::replay(ResponseCache::new(dir.path()));
    assert!(g.complete(&ChatRequest::user("m", "hello")).is_err());
    assert_eq!(g.remote_calls(), 0);
}

#[test]
fn stub_batch_keeps_input_order_and_is_repeatable() {
    let dir = tempfile::tempdir().unwrap();
    let reqs: Vec<ChatRequest> = (0..20)
        .map(|i| {
            ChatRequest::user(
                "m",
                format!("Input:\nEvent 0: A{i} fell.\nEvent 1: A{i} cried.\n\nOutput:\n"),
            )
        })
        .collect();
    let g = Gateway::stub(ResponseCache::new(dir.path()));
    let a: Vec<String> = g
        .batch_complete(&reqs, 6)
        .into_iter()
        .map(|r| r.unwrap().text)
        .collect();
    let serial: Vec<String> = reqs.iter().map(|r| g.complete(r).unwrap().text).collect();
    assert_eq!(a, serial);
}
