mod common;

use std::collections::BTreeMap;

use common::{ordered_grammar, words_grammar};
use mixdialog::{ConflictPolicy, Grammar, MatchConfig, MatchMode};
use proptest::prelude::*;

const SLOTS: [&str; 3] = ["size", "topping", "crust"];
const FILLER: [&str; 6] = ["uh", "i'd", "like", "a", "please", "pizza"];

fn spot() -> MatchConfig {
    MatchConfig { mode: MatchMode::Spot, conflict: ConflictPolicy::LastWins }
}

fn strict() -> MatchConfig {
    MatchConfig { mode: MatchMode::Strict, conflict: ConflictPolicy::LastWins }
}

fn fills(g: &Grammar, text: &str, config: MatchConfig) -> BTreeMap<String, String> {
    g.match_utterance(text, config).unwrap_or_default().into_iter().map(|f| (f.slot, f.value)).collect()
}

/// Every terminal of every pizza slot, as (slot, terminal).
fn terminals() -> Vec<(&'static str, String)> {
    let g = ordered_grammar();
    SLOTS.iter().flat_map(|s| g.slot_terminals(s).unwrap().into_iter().map(move |t| (*s, t))).collect()
}

/// Phrases for distinct slots, with filler words scattered between them.
fn arb_phrases() -> impl Strategy<Value = (Vec<(&'static str, String)>, Vec<Vec<&'static str>>)> {
    let per_slot: Vec<_> = SLOTS
        .iter()
        .map(|s| {
            let t = ordered_grammar().slot_terminals(s).unwrap();
            prop::option::of(prop::sample::select(t).prop_map(move |v| (*s, v)))
        })
        .collect();
    (per_slot, Just(()))
        .prop_flat_map(|(chosen, ())| {
            let chosen: Vec<_> = chosen.into_iter().flatten().collect();
            let n = chosen.len();
            (Just(chosen).prop_shuffle(), prop::collection::vec(prop::collection::vec(prop::sample::select(&FILLER[..]), 0..3), n + 1))
        })
}

fn join(phrases: &[(&str, String)], filler: &[Vec<&str>]) -> String {
    let mut words: Vec<String> = filler[0].iter().map(|w| w.to_string()).collect();
    for (i, (_, v)) in phrases.iter().enumerate() {
        words.push(v.clone());
        words.extend(filler[i + 1].iter().map(|w| w.to_string()));
    }
    words.join(" ")
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn spot_fills_are_insensitive_to_filler((phrases, filler) in arb_phrases()) {
        let expected: BTreeMap<String, String> = phrases.iter().map(|(s, v)| (s.to_string(), v.clone())).collect();
        let bare = join(&phrases, &vec![Vec::new(); phrases.len() + 1]);
        let noisy = join(&phrases, &filler);
        for g in [ordered_grammar(), words_grammar()] {
            prop_assert_eq!(&fills(&g, &bare, spot()), &expected);
            prop_assert_eq!(&fills(&g, &noisy, spot()), &expected);
        }
    }

    #[test]
    fn fill_values_come_from_the_slot_vocabulary(words in prop::collection::vec(
        prop::sample::select(vec!["small", "medium", "large", "sausage", "pepperoni", "onions", "green", "peppers",
            "regular", "deep", "dish", "thin", "uh", "pizza", "and"]), 0..10)) {
        let text = words.join(" ");
        for g in [ordered_grammar(), words_grammar()] {
            for mode in [MatchMode::Spot, MatchMode::Strict] {
                let config = MatchConfig { mode, conflict: ConflictPolicy::LastWins };
                for f in g.match_utterance(&text, config).unwrap_or_default() {
                    prop_assert!(g.slot_vocabulary(&f.slot).unwrap().contains(&f.value));
                }
            }
        }
    }
}

#[test]
fn single_slot_answers_agree_across_grammars() {
    for (slot, value) in terminals() {
        for text in [value.clone(), format!("uh, {value}, please."), value.replace(' ', "-")] {
            let a = fills(&ordered_grammar(), &text, spot());
            let b = fills(&words_grammar(), &text, spot());
            assert_eq!(a, b, "{text}");
            assert_eq!(a, BTreeMap::from([(slot.to_string(), value.clone())]), "{text}");
        }
    }
}

/// Ordered selections of distinct slots, each with every value combination.
fn ordered_utterances() -> Vec<Vec<(&'static str, String)>> {
    let g = ordered_grammar();
    let mut orders: Vec<Vec<&str>> = Vec::new();
    for a in SLOTS {
        orders.push(vec![a]);
        for b in SLOTS.iter().filter(|b| **b != a) {
            orders.push(vec![a, b]);
            for c in SLOTS.iter().filter(|c| **c != a && *c != b) {
                orders.push(vec![a, b, c]);
            }
        }
    }
    let mut out = Vec::new();
    for order in orders {
        let mut partial: Vec<Vec<(&str, String)>> = vec![Vec::new()];
        for slot in order {
            partial = partial
                .into_iter()
                .flat_map(|p| {
                    g.slot_terminals(slot).unwrap().into_iter().map(move |t| {
                        let mut q = p.clone();
                        q.push((slot, t));
                        q
                    })
                })
                .collect();
        }
        out.extend(partial);
    }
    out
}

#[test]
fn strict_mode_accepts_every_ordering_of_distinct_slots() {
    let all = ordered_utterances();
    // 10 singles, 2 * (12 + 9 + 12) pairs, 3! * 3 * 4 * 3 triples.
    assert_eq!(all.len(), 10 + 66 + 216);
    for phrases in &all {
        let text = phrases.iter().map(|(_, v)| v.as_str()).collect::<Vec<_>>().join(" ");
        let expected: BTreeMap<String, String> = phrases.iter().map(|(s, v)| (s.to_string(), v.clone())).collect();
        for g in [ordered_grammar(), words_grammar()] {
            assert_eq!(fills(&g, &text, strict()), expected, "{text}");
        }
    }
}

#[test]
fn strict_mode_rejects_stray_words_that_spot_mode_skips() {
    let text = "i'd like a sausage pizza";
    assert_eq!(ordered_grammar().match_utterance(text, strict()), Err(mixdialog::grammar::MatchError::NoMatch));
    assert_eq!(fills(&ordered_grammar(), text, spot()), BTreeMap::from([("topping".into(), "sausage".into())]));
}

#[test]
fn ordered_grammar_rejects_a_repeated_slot_in_strict_mode() {
    // The fixed-order grammar never derives two sizes; the word* grammar does.
    let text = "small large";
    assert!(ordered_grammar().match_utterance(text, strict()).is_err());
    assert_eq!(fills(&words_grammar(), text, strict()), BTreeMap::from([("size".into(), "large".into())]));
}

#[test]
fn conflict_policies_on_repeated_slot() {
    let text = "small, no, large";
    let g = words_grammar();
    let first = MatchConfig { mode: MatchMode::Spot, conflict: ConflictPolicy::FirstWins };
    let reject = MatchConfig { mode: MatchMode::Spot, conflict: ConflictPolicy::Reject };
    assert_eq!(fills(&g, text, first)["size"], "small");
    assert_eq!(fills(&g, text, spot())["size"], "large");
    assert_eq!(g.match_utterance(text, reject), Err(mixdialog::grammar::MatchError::Conflict("size".into())));
}
