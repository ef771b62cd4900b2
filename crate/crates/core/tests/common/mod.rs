#![allow(dead_code)]

use std::collections::BTreeMap;
use std::fmt::Write;

use mixdialog::bundles;
use mixdialog::script::{Action, Branch, PromptTemplate, SlotDecl};
use mixdialog::{parse_grammar, parse_script, DialogScript, EngineConfig, Environment, Grammar, Session, Stage};
use proptest::prelude::*;

pub fn pizza() -> DialogScript {
    parse_script(bundles::PIZZA_SCRIPT).unwrap()
}

pub fn ordered_grammar() -> Grammar {
    parse_grammar(bundles::SIZE_TOPPING_CRUST).unwrap()
}

pub fn words_grammar() -> Grammar {
    parse_grammar(bundles::SIZE_TOPPING_CRUST_WORDS).unwrap()
}

pub fn pizza_grammars() -> BTreeMap<String, Grammar> {
    BTreeMap::from([(bundles::PIZZA_GRAMMAR_FILE.to_string(), ordered_grammar())])
}

pub fn pizza_session(config: EngineConfig) -> Session {
    Session::new(pizza(), pizza_grammars(), config).unwrap()
}

pub fn golden(name: &str) -> String {
    let path = format!("{}/tests/golden/{name}", env!("CARGO_MANIFEST_DIR"));
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{path}: {e}"))
}

pub fn golden_inputs(name: &str) -> Vec<String> {
    golden(name).lines().map(str::to_string).collect()
}

/// Caller lines of the three reference pizza dialogs.
pub const DIALOG1: [&str; 4] = ["I'd like a medium, please.", "Pepperoni.", "Uh, deep-dish.", "Yes."];
pub const DIALOG2: [&str; 4] = ["I'd like a sausage pizza, please.", "Medium.", "Deep-dish.", "Yes."];
pub const DIALOG4: [&str; 2] = ["I'd like a sausage pizza, medium, and deep-dish.", "Yes."];

/// Two vocabulary words per slot: `<slot>a` and `<slot>b`.
pub fn slot_words(slot: &str) -> [String; 2] {
    [format!("{slot}a"), format!("{slot}b")]
}

/// A `word*` style grammar tagging every slot of every form in `script`.
pub fn grammar_for(script: &DialogScript) -> Grammar {
    let slots: Vec<&str> = script
        .stages
        .iter()
        .filter_map(|s| match s {
            Stage::MixedForm { slots, .. } => Some(slots.iter().map(|d| d.name.as_str())),
            _ => None,
        })
        .flatten()
        .collect();
    let mut src = String::from("#JSGF V1.0;\ngrammar generated;\npublic <all> = word*;\n");
    if slots.is_empty() {
        src.push_str("word = nothing;\n");
    } else {
        let alts: Vec<String> = slots.iter().map(|s| format!("<{s}> {{this.{s}=$}}")).collect();
        let _ = writeln!(src, "word = {};", alts.join(" | "));
    }
    for s in &slots {
        let [a, b] = slot_words(s);
        let _ = writeln!(src, "<{s}> = {a} | {b};");
    }
    parse_grammar(&src).unwrap()
}

pub fn grammars_for(script: &DialogScript) -> BTreeMap<String, Grammar> {
    let g = grammar_for(script);
    script
        .stages
        .iter()
        .filter_map(|s| match s {
            Stage::MixedForm { grammar, .. } => Some((grammar.clone(), g.clone())),
            _ => None,
        })
        .collect()
}

/// Random valid scripts: optional greeting, one to three forms over
/// uniquely named slots, and an optional confirmation that echoes some
/// slots and may clear them.
pub fn arb_script() -> impl Strategy<Value = DialogScript> {
    (
        any::<bool>(),
        prop::collection::vec(1usize..=4, 1..=3),
        any::<bool>(),
        any::<u64>(),
    )
        .prop_map(|(greet, form_sizes, confirm, seed)| {
            let mut stages = Vec::new();
            if greet {
                stages.push(Stage::Block { name: "hello".into(), messages: vec!["Hello.".into()] });
            }
            let mut n = 0;
            let mut all = Vec::new();
            for (f, size) in form_sizes.iter().enumerate() {
                let mut slots = Vec::new();
                for _ in 0..*size {
                    let name = format!("s{n}");
                    slots.push(SlotDecl { prompt: PromptTemplate::new(format!("Value for {name}?")), name: name.clone() });
                    all.push(name);
                    n += 1;
                }
                stages.push(Stage::MixedForm { name: format!("f{f}"), grammar: format!("g{f}.gram"), slots });
            }
            if confirm {
                let echoed: Vec<&String> = all.iter().enumerate().filter(|(i, _)| seed >> (i % 64) & 1 == 1).map(|(_, s)| s).collect();
                let text = echoed.iter().map(|s| format!("{{{s}}}")).collect::<Vec<_>>().join(" ");
                let mut cleared: Vec<String> = all.iter().step_by(2).cloned().collect();
                cleared.push("ok".into());
                stages.push(Stage::Confirm {
                    name: "ok".into(),
                    slot: SlotDecl { name: "ok".into(), prompt: PromptTemplate::new(format!("Confirm {text}?")) },
                    branches: vec![
                        Branch { value: "yes".into(), actions: vec![Action::Say("Done.".into())] },
                        Branch { value: "no".into(), actions: vec![Action::ClearSlots(cleared)] },
                    ],
                });
            }
            DialogScript { name: "random".into(), bound: Default::default(), stages }
        })
}

pub fn form_slots(script: &DialogScript) -> Vec<String> {
    script
        .stages
        .iter()
        .filter_map(|s| match s {
            Stage::MixedForm { slots, .. } => Some(slots.iter().map(|d| d.name.clone())),
            _ => None,
        })
        .flatten()
        .collect()
}

/// A script plus two environments with disjoint domains.
pub fn script_and_split() -> impl Strategy<Value = (DialogScript, Environment, Environment)> {
    arb_script().prop_flat_map(|script| {
        let slots: Vec<String> = script.declared_slots().into_iter().map(str::to_string).collect();
        let n = slots.len();
        (Just(script), prop::collection::vec(0u8..3, n), prop::collection::vec(0u8..2, n), Just(slots)).prop_map(
            |(script, side, value, slots)| {
                let mut e1 = Environment::new();
                let mut e2 = Environment::new();
                for ((slot, side), value) in slots.iter().zip(side).zip(value) {
                    match side {
                        1 => e1.push(slot.clone(), format!("v{value}")),
                        2 => e2.push(slot.clone(), format!("v{value}")),
                        _ => {}
                    }
                }
                (script, e1, e2)
            },
        )
    })
}
