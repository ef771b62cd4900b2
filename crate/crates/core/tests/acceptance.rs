//! One line per acceptance criterion. Runs as a plain binary so the
//! PASS/FAIL lines always show up in `cargo test` output.

mod common;

use std::collections::{BTreeMap, HashSet};
use std::time::{Duration, Instant};

use common::{ordered_grammar, words_grammar, pizza, pizza_session, script_and_split, DIALOG1, DIALOG2, DIALOG4};
use mixdialog::grammar::MatchError;
use mixdialog::staging::{count_sequences, drive_all_sequences, enumerate_sequences};
use mixdialog::transcript::normalize_whitespace;
use mixdialog::{
    build_trace, render_notation, specialize, ConflictPolicy, EngineConfig, EngineError, MatchConfig, MatchMode, Phase,
    Stage, Turn,
};
use proptest::test_runner::{Config, TestRunner};

type Check = Result<(), String>;
type Criterion = (&'static str, fn() -> Check);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Check {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(limit: Duration, f: impl FnOnce() -> Check) -> Check {
    let start = Instant::now();
    f()?;
    let took = start.elapsed();
    ensure(took < limit, || format!("took {took:?}, limit {limit:?}"))
}

/// Reference system lines, with their original line wrapping.
const DIALOG1_SYSTEM: [&str; 5] = [
    "Thank you for calling Joe's pizza ordering system.",
    "What size pizza would you like?",
    "What topping would you like on your pizza?",
    "What type of crust do you want?",
    "So that is a medium pepperoni pizza with deep-dish crust.\n             Is this correct?",
];
const DIALOG2_SYSTEM: [&str; 6] = [
    "Thank you for calling Joe's pizza ordering system.",
    "What size pizza would you like?",
    "Okay, sausage.",
    "What size pizza would you like?",
    "What type of crust do you want?",
    "So that is a medium sausage pizza with deep-dish crust.\n             Is this correct?",
];
const DIALOG4_SYSTEM: [&str; 3] = [
    "Thank you for calling Joe's pizza ordering system.",
    "What size pizza would you like?",
    "So that is a medium sausage pizza with deep-dish crust. Is this correct?",
];

fn replay(lines: &[&str]) -> Result<mixdialog::Session, String> {
    let mut s = pizza_session(EngineConfig::default());
    s.run_batch(lines).map_err(|e| e.to_string())?;
    Ok(s)
}

fn system_lines(s: &mixdialog::Session) -> Vec<String> {
    s.turn_log().iter().filter(|t| t.is_system()).map(|t| normalize_whitespace(t.text())).collect()
}

fn golden_transcripts() -> Check {
    within(Duration::from_secs(1), || {
        for (name, lines, expected) in [
            ("dialog 1", &DIALOG1[..], &DIALOG1_SYSTEM[..]),
            ("dialog 2", &DIALOG2[..], &DIALOG2_SYSTEM[..]),
            // Only the combined fill is printed; the rest is the confirmation.
            ("dialog 4", &DIALOG4[..1], &DIALOG4_SYSTEM[..]),
        ] {
            let s = replay(lines)?;
            let got = system_lines(&s);
            let want: Vec<String> = expected.iter().map(|l| normalize_whitespace(l)).collect();
            ensure(got.len() >= want.len() && got[..want.len()] == want[..], || format!("{name}: got {got:?}"))?;
        }
        let s = replay(&DIALOG4[..1])?;
        let fills = s.turn_log().iter().find_map(|t| match t {
            Turn::UserUtterance { fills, .. } => Some(fills.len()),
            _ => None,
        });
        ensure(fills == Some(3), || format!("dialog 4 filled {fills:?} slots at once"))
    })
}

fn counting_claims() -> Check {
    within(Duration::from_secs(5), || {
        ensure(count_sequences(3, false) == Some(13), || "count(3) != 13".into())?;
        ensure(count_sequences(3, true) == Some(24), || "count(3, perms) != 24".into())?;
        for n in 1..=5 {
            let slots: Vec<String> = (0..n).map(|i| format!("s{i}")).collect();
            for perms in [false, true] {
                let listed = enumerate_sequences(&slots, perms).map_err(|e| e.to_string())?;
                let distinct: HashSet<String> = listed.iter().map(|s| s.to_string()).collect();
                ensure(distinct.len() == listed.len(), || format!("n={n}: duplicate sequences"))?;
                ensure(count_sequences(n, perms) == Some(listed.len() as u128), || format!("n={n} perms={perms}: count differs"))?;
            }
        }
        Ok(())
    })
}

fn staging_completeness() -> Check {
    within(Duration::from_secs(2), || {
        for (label, g) in [("fixed-order grammar", ordered_grammar()), ("word* grammar", words_grammar())] {
            let r = drive_all_sequences(&pizza(), &g).map_err(|e| e.to_string())?;
            ensure(r.rows.len() == 13 && r.all_passed(), || format!("{label}: {}/{}", r.passed(), r.rows.len()))?;
        }
        Ok(())
    })
}

fn mix_equation() -> Check {
    let mut runner = TestRunner::new(Config { cases: 1000, failure_persistence: None, ..Config::default() });
    let cases = std::cell::Cell::new(0usize);
    let result = runner.run(&script_and_split(), |(script, e1, e2)| {
        cases.set(cases.get() + 1);
        for policy in [ConflictPolicy::FirstWins, ConflictPolicy::LastWins, ConflictPolicy::Reject] {
            let staged = specialize(&specialize(&script, &e1, policy).unwrap(), &e2, policy).unwrap();
            let direct = specialize(&script, &e1.concat(&e2), policy).unwrap();
            proptest::prop_assert_eq!(staged, direct);
        }
        Ok(())
    });
    result.map_err(|e| e.to_string())?;
    ensure(cases.get() >= 1000, || format!("only {} cases", cases.get()))
}

fn clear_and_reprompt() -> Check {
    let s = replay(&["medium", "pepperoni", "thin", "no"])?;
    let out = s.turn_log();
    let filled: Vec<&str> = s.store().iter().map(|(k, _)| k).collect();
    ensure(filled.is_empty(), || format!("still filled: {filled:?}"))?;
    ensure(s.phase() == Phase::Active, || format!("phase {:?}", s.phase()))?;
    let prompt = out.iter().rev().find_map(|t| match t {
        Turn::SystemPrompt { slot, text, .. } => Some((slot.clone(), text.clone())),
        _ => None,
    });
    ensure(
        prompt == Some((Some("size".into()), "What size pizza would you like?".into())),
        || format!("next prompt {prompt:?}"),
    )?;
    ensure(s.residual() == s.original(), || "residual is not the original script".into())
}

fn override_policies() -> Check {
    let run = |policy: ConflictPolicy| {
        let config = EngineConfig { match_config: MatchConfig { mode: MatchMode::Spot, conflict: policy }, ..EngineConfig::default() };
        let mut s = pizza_session(config);
        s.next_output();
        s.submit_utterance("small").unwrap();
        s.next_output();
        let second = s.submit_utterance("pepperoni, and make it large");
        (s.store().value("size").map(str::to_string), s.store().value("topping").map(str::to_string), second)
    };
    let (size, topping, r) = run(ConflictPolicy::LastWins);
    ensure(size.as_deref() == Some("large") && topping.as_deref() == Some("pepperoni") && r.is_ok(), || {
        format!("last wins: {size:?} {topping:?}")
    })?;
    let (size, topping, r) = run(ConflictPolicy::FirstWins);
    ensure(size.as_deref() == Some("small") && topping.as_deref() == Some("pepperoni") && r.is_ok(), || {
        format!("first wins: {size:?} {topping:?}")
    })?;
    let (size, topping, r) = run(ConflictPolicy::Reject);
    ensure(
        size.as_deref() == Some("small") && topping.is_none() && matches!(r, Err(EngineError::Conflict(ref s)) if s == "size"),
        || format!("reject: {size:?} {topping:?} {r:?}"),
    )
}

fn trace_fidelity() -> Check {
    for (lines, expected) in [
        (&DIALOG1[..], "(Ic Rs) (Is Rc) (Is Rc) (Is Rc) (Is Rc)"),
        (&DIALOG2[..], "(Ic Rs) (Is (Ic Rs) Rc) (Is Rc) (Is Rc)"),
    ] {
        let s = replay(lines)?;
        let got = render_notation(&build_trace(s.turn_log(), true).map_err(|e| e.to_string())?);
        ensure(got == expected, || format!("got {got}"))?;
    }
    Ok(())
}

fn fills(g: &mixdialog::Grammar, text: &str, mode: MatchMode, conflict: ConflictPolicy) -> Result<BTreeMap<String, String>, MatchError> {
    Ok(g.match_utterance(text, MatchConfig { mode, conflict })?.into_iter().map(|f| (f.slot, f.value)).collect())
}

fn grammar_suite() -> Check {
    let ordered = ordered_grammar();
    let slots = ["size", "topping", "crust"];
    let orders = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    let mut matched = 0;
    for order in orders {
        for a in ordered.slot_terminals(slots[order[0]]).unwrap() {
            for b in ordered.slot_terminals(slots[order[1]]).unwrap() {
                for c in ordered.slot_terminals(slots[order[2]]).unwrap() {
                    let text = format!("{a} {b} {c}");
                    let got = fills(&ordered, &text, MatchMode::Strict, ConflictPolicy::LastWins).map_err(|e| format!("{text}: {e}"))?;
                    let want = BTreeMap::from([
                        (slots[order[0]].to_string(), a.clone()),
                        (slots[order[1]].to_string(), b.clone()),
                        (slots[order[2]].to_string(), c.clone()),
                    ]);
                    ensure(got == want, || format!("{text}: {got:?}"))?;
                    matched += 1;
                }
            }
        }
    }
    ensure(matched == 6 * 36, || format!("{matched} permutation utterances"))?;

    let spot = [
        ("I'd like a medium, please.", vec![("size", "medium")]),
        ("Pepperoni.", vec![("topping", "pepperoni")]),
        ("Uh, deep-dish.", vec![("crust", "deep dish")]),
        ("I'd like a sausage pizza, please.", vec![("topping", "sausage")]),
        ("I'd like a sausage pizza, medium, and deep-dish.", vec![("size", "medium"), ("topping", "sausage"), ("crust", "deep dish")]),
    ];
    for g in [&ordered, &words_grammar()] {
        for (text, want) in &spot {
            let got = fills(g, text, MatchMode::Spot, ConflictPolicy::LastWins).map_err(|e| format!("{text}: {e}"))?;
            let want: BTreeMap<String, String> = want.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
            ensure(got == want, || format!("{text}: {got:?}"))?;
        }
    }

    let words = words_grammar();
    let text = "pepperoni sausage";
    let last = fills(&words, text, MatchMode::Spot, ConflictPolicy::LastWins);
    let first = fills(&words, text, MatchMode::Spot, ConflictPolicy::FirstWins);
    let reject = fills(&words, text, MatchMode::Spot, ConflictPolicy::Reject);
    ensure(last.as_ref().map(|m| m["topping"].as_str()) == Ok("sausage"), || format!("last wins: {last:?}"))?;
    ensure(first.as_ref().map(|m| m["topping"].as_str()) == Ok("pepperoni"), || format!("first wins: {first:?}"))?;
    ensure(reject == Err(MatchError::Conflict("topping".into())), || format!("reject: {reject:?}"))
}

fn main() {
    // The pizza bundle has exactly one form; the checks above rely on it.
    assert_eq!(pizza().stages.iter().filter(|s| matches!(s, Stage::MixedForm { .. })).count(), 1);

    let checks: [Criterion; 8] = [
        ("golden transcripts", golden_transcripts),
        ("counting claims", counting_claims),
        ("staging completeness", staging_completeness),
        ("mix-equation property suite", mix_equation),
        ("clear-and-reprompt", clear_and_reprompt),
        ("over-ride policies", override_policies),
        ("trace fidelity", trace_fidelity),
        ("grammar suite", grammar_suite),
    ];
    let mut failed = 0;
    for (name, check) in checks {
        let start = Instant::now();
        match check() {
            Ok(()) => println!("PASS {name} ({:.0?})", start.elapsed()),
            Err(why) => {
                failed += 1;
                println!("FAIL {name}: {why}");
            }
        }
    }
    println!("{} of {} criteria passed", checks.len() - failed, checks.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
