use geoagent_core::react::{parse_decision, render_decision, ActionInput, AgentDecision, InputValue, ParseFailureReason};
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

const CANONICAL: &[&str] = &[
    "Thought: segment first\nAction: landuse_classification\nAction Input: {\"category\":\"road\",\"image\":\"u000_airport.png\"}",
    "Action: edge_detection\nAction Input: {\"image\":\"u000_a.png\",\"sigma\":1.4}",
    "Action: scene_classification\nAction Input: {}",
    "Final Answer: There are 2 airplanes on the runway.",
    "Thought: done\nFinal Answer: two lines\nof answer",
    "Clarify: Which image do you mean?",
];

fn mutate(rng: &mut StdRng, text: &str) -> String {
    let mut b = text.as_bytes().to_vec();
    for _ in 0..rng.random_range(1..6) {
        match rng.random_range(0..5) {
            0 if !b.is_empty() => {
                let i = rng.random_range(0..b.len());
                b.remove(i);
            }
            1 => {
                let i = rng.random_range(0..=b.len());
                b.insert(i, rng.random());
            }
            2 if !b.is_empty() => {
                let i = rng.random_range(0..b.len());
                let pool = b"{}\":,\n \rActionFinal";
                b[i] = pool[rng.random_range(0..pool.len())];
            }
            3 => {
                let i = rng.random_range(0..=b.len());
                let extra: &[u8] = [&b"\nAction: x"[..], b"\nFinal Answer:", b"Clarify:", b"\n\n", b"\xe2\x82\xac"]
                    [rng.random_range(0..5)];
                b.splice(i..i, extra.iter().copied());
            }
            _ => b.truncate(rng.random_range(0..=b.len())),
        }
    }
    String::from_utf8_lossy(&b).into_owned()
}

fn check_total(text: &str) {
    match parse_decision(text) {
        Ok(_) => {}
        Err(f) => {
            assert!(f.span.start <= f.span.end && f.span.end <= text.len(), "{f:?} on {text:?}");
            assert!(text.is_char_boundary(f.span.start) && text.is_char_boundary(f.span.end));
            assert!(!f.message.is_empty());
        }
    }
}

#[test]
fn fuzz_never_panics() {
    let mut rng = StdRng::seed_from_u64(42);
    for i in 0..10_000 {
        let text = if i % 2 == 0 {
            let len = rng.random_range(0..200);
            let bytes: Vec<u8> = (0..len).map(|_| rng.random()).collect();
            String::from_utf8_lossy(&bytes).into_owned()
        } else {
            let seed = CANONICAL[rng.random_range(0..CANONICAL.len())];
            mutate(&mut rng, seed)
        };
        check_total(&text);
    }
}

#[test]
fn canonical_texts_survive_parse_then_render() {
    for text in CANONICAL {
        let d = parse_decision(text).unwrap_or_else(|e| panic!("{text}: {e}"));
        assert_eq!(render_decision(&d), *text);
    }
}

#[test]
fn failure_reasons() {
    let reason = |t: &str| parse_decision(t).unwrap_err().reason;
    assert_eq!(reason(""), ParseFailureReason::NoMarker);
    assert_eq!(reason("I think the answer is 4"), ParseFailureReason::NoMarker);
    assert_eq!(reason("Final Answer:   "), ParseFailureReason::NoMarker);
    assert_eq!(reason("Action: a\nAction Input: {}\nAction: b\nAction Input: {}"), ParseFailureReason::MultipleActions);
    assert_eq!(reason("Action: a\nAction Input: [1]"), ParseFailureReason::BadInputPayload);
    assert_eq!(reason("Action: a\nAction Input: {\"k\": [1]}"), ParseFailureReason::BadInputPayload);
    assert_eq!(reason("Action: a b\nAction Input: {}"), ParseFailureReason::BadInputPayload);
    assert_eq!(reason("Action: a"), ParseFailureReason::BadInputPayload);
    assert_eq!(reason("Action: a\nAction Input: {}\nObservation: made up"), ParseFailureReason::TrailingGarbage);
}

fn text_piece() -> impl Strategy<Value = String> {
    "[A-Za-z0-9][A-Za-z0-9 ,.?'()-]{0,40}[A-Za-z0-9.?]"
}

fn value() -> impl Strategy<Value = InputValue> {
    prop_oneof![
        "[a-z0-9_. ]{0,20}".prop_map(InputValue::Str),
        any::<i64>().prop_map(InputValue::from),
        (-4096i32..4096).prop_map(|k| InputValue::from(k as f64 / 8.0 + 0.125)),
    ]
}

fn decision() -> impl Strategy<Value = AgentDecision> {
    let thought = prop_oneof![Just(String::new()), text_piece()];
    prop_oneof![
        (
            thought.clone(),
            "[a-z_][a-z0-9_]{0,24}",
            prop::collection::btree_map("[a-z_]{1,10}", value(), 0..5)
        )
            .prop_map(|(thought, tool, input)| AgentDecision::Action {
                thought,
                tool,
                input: input.into_iter().collect::<ActionInput>(),
            }),
        (thought, prop::collection::vec(text_piece(), 1..3)).prop_map(|(thought, lines)| {
            AgentDecision::FinalAnswer {
                thought,
                answer: lines.join("\n"),
            }
        }),
        text_piece().prop_map(|question| AgentDecision::Clarify { question }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn parse_inverts_render(d in decision()) {
        let text = render_decision(&d);
        prop_assert_eq!(parse_decision(&text).unwrap(), d);
    }

    #[test]
    fn arbitrary_strings_are_total(s in "\\PC*") {
        check_total(&s);
    }
}
