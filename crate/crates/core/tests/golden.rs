mod common;

use common::{golden, golden_inputs, pizza_session, DIALOG1, DIALOG2, DIALOG4};
use mixdialog::trace::{render_indexed, NotationOptions};
use mixdialog::transcript::{normalize_whitespace, parse_transcript};
use mixdialog::{build_trace, render_notation, EngineConfig, Phase};

fn replay(name: &str) -> mixdialog::Session {
    let mut s = pizza_session(EngineConfig::default());
    let t = s.run_batch(golden_inputs(&format!("{name}.in"))).unwrap();
    assert_eq!(t.phase, Phase::Completed);
    s
}

fn check_golden(name: &str) {
    let s = replay(name);
    let expected = golden(&format!("{name}.txt"));
    let got = mixdialog::transcript::render_turns(s.turn_log());
    assert_eq!(normalize_whitespace(&got), normalize_whitespace(&expected), "{name}");
    let lines = parse_transcript(&expected).unwrap();
    assert_eq!(lines.len(), s.turn_log().len());
}

#[test]
fn dialog1_transcript() {
    check_golden("dialog1");
}

#[test]
fn dialog2_transcript() {
    check_golden("dialog2");
}

#[test]
fn dialog4_transcript() {
    check_golden("dialog4");
}

#[test]
fn golden_inputs_are_the_dialog_lines() {
    assert_eq!(golden_inputs("dialog1.in"), DIALOG1);
    assert_eq!(golden_inputs("dialog2.in"), DIALOG2);
    assert_eq!(golden_inputs("dialog4.in"), DIALOG4);
}

fn notation(name: &str) -> String {
    render_notation(&build_trace(replay(name).turn_log(), true).unwrap())
}

fn indexed(name: &str) -> String {
    render_indexed(&build_trace(replay(name).turn_log(), true).unwrap(), NotationOptions::default())
}

#[test]
fn dialog_traces() {
    assert_eq!(notation("dialog1"), "(Ic Rs) (Is Rc) (Is Rc) (Is Rc) (Is Rc)");
    assert_eq!(notation("dialog2"), "(Ic Rs) (Is (Ic Rs) Rc) (Is Rc) (Is Rc)");
    assert_eq!(notation("dialog4"), "(Ic Rs) (Is Rc) (Is Rc)");
}

fn numbers(row: &str) -> Vec<String> {
    row.split_whitespace().map(str::to_string).collect()
}

#[test]
fn indexed_rows_number_utterances_like_the_dialogs() {
    let one = indexed("dialog1");
    let row = one.lines().nth(1).unwrap();
    assert_eq!(numbers(row), ["0", "1", "2", "3", "4", "5", "6", "7", "8", "9"]);
    let two = indexed("dialog2");
    let row = two.lines().nth(1).unwrap();
    assert_eq!(numbers(row), ["0", "1", "2,5", "3", "4", "6", "7", "8", "9", "10"]);
}
