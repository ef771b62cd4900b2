use std::io::Write;
use std::path::PathBuf;
use std::process::{Command, Output, Stdio};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mixdialog"))
}

fn core(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core").join(rel)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn piped(args: &[&str], input: &str) -> Output {
    let mut child = bin().args(args).stdin(Stdio::piped()).stdout(Stdio::piped()).stderr(Stdio::piped()).spawn().unwrap();
    child.stdin.take().unwrap().write_all(input.as_bytes()).unwrap();
    child.wait_with_output().unwrap()
}

fn golden(name: &str) -> String {
    core(&format!("tests/golden/{name}")).display().to_string()
}

#[test]
fn run_dialog2_prints_transcript_and_nested_trace() {
    let input = std::fs::read_to_string(golden("dialog2.in")).unwrap();
    let o = piped(&["run"], &input);
    assert!(o.status.success());
    let text = stdout(&o);
    let expected = std::fs::read_to_string(golden("dialog2.txt")).unwrap();
    assert!(text.starts_with(&expected), "{text}");
    assert!(text.trim_end().ends_with("trace: (Ic Rs) (Is (Ic Rs) Rc) (Is Rc) (Is Rc)"));
}

#[test]
fn run_dialog1_is_system_initiated() {
    let input = std::fs::read_to_string(golden("dialog1.in")).unwrap();
    let o = piped(&["run"], &input);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.starts_with(&std::fs::read_to_string(golden("dialog1.txt")).unwrap()));
    assert!(text.contains("trace: (Ic Rs) (Is Rc) (Is Rc) (Is Rc) (Is Rc)"));
}

#[test]
fn run_stopping_early_exits_incomplete() {
    let o = piped(&["run"], "medium\n");
    assert_eq!(o.status.code(), Some(3));
    assert!(stdout(&o).contains("trace: (Ic Rs) (Is Rc) (Is)"));
}

#[test]
fn missing_grammar_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let script = dir.path().join("pizza.dlg");
    std::fs::copy(core("bundles/pizza.dlg"), &script).unwrap();
    let script = script.to_str().unwrap();
    for args in [&["run", "--script", script][..], &["batch", "--script", script, "--input", "/dev/null"][..]] {
        let o = bin()
            .args(args)
            .stdin(Stdio::null())
            .output()
            .unwrap();
        assert_eq!(o.status.code(), Some(2), "{args:?}");
        assert!(String::from_utf8_lossy(&o.stderr).contains("missing grammar"));
    }
}

#[test]
fn batch_matches_golden_transcripts() {
    for name in ["dialog1", "dialog2", "dialog4"] {
        let o = run(&["batch", "--input", &golden(&format!("{name}.in")), "--expect", &golden(&format!("{name}.txt"))]);
        assert_eq!(o.status.code(), Some(0), "{name}: {}", String::from_utf8_lossy(&o.stderr));
    }
}

#[test]
fn batch_dialog4_prompts_once_before_the_combined_answer() {
    let o = run(&["batch", "--input", &golden("dialog4.in")]);
    assert!(o.status.success());
    let text = stdout(&o);
    let before: Vec<&str> = text.lines().take_while(|l| !l.starts_with("C: ")).collect();
    assert_eq!(before.iter().filter(|l| l.contains('?')).count(), 1);
}

#[test]
fn batch_mismatch_shows_a_diff() {
    let o = run(&["batch", "--input", &golden("dialog2.in"), "--expect", &golden("dialog1.txt")]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("+S: Okay, sausage."), "{err}");
    assert!(err.contains("@@"));
}

#[test]
fn batch_on_empty_input_is_incomplete() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.in");
    std::fs::write(&empty, "").unwrap();
    let o = run(&["batch", "--input", empty.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(stdout(&o).lines().last(), Some("S: What size pizza would you like?"));
}

#[test]
fn specialize_removes_bound_guards() {
    let plain = stdout(&run(&["specialize"]));
    let canonical = mixdialog::render_script(&mixdialog::parse_script(mixdialog::bundles::PIZZA_SCRIPT).unwrap());
    assert_eq!(plain, canonical);

    let one = stdout(&run(&["specialize", "--bind", "topping=sausage"]));
    assert!(!one.contains("slot topping"));
    assert!(one.contains("slot size") && one.contains("slot crust"));

    let all = stdout(&run(&["specialize", "--bind", "size=medium", "--bind", "topping=pepperoni", "--bind", "crust=deep dish"]));
    assert!(!all.contains("form place_order"));
    assert!(all.contains("confirm verify"));
    mixdialog::parse_script(&all).unwrap();
}

#[test]
fn specialize_rejects_unknown_slots() {
    let o = run(&["specialize", "--bind", "sauce=extra"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn enumerate_counts() {
    for (args, count) in [
        (&["--slots", "3"][..], "13"),
        (&["--slots", "3", "--permutations"][..], "24"),
        (&["--slots", "4"][..], "75"),
    ] {
        let o = run(&[&["enumerate"][..], args].concat());
        assert!(o.status.success());
        let text = stdout(&o);
        assert_eq!(text.lines().next(), Some(format!("{count} sequences").as_str()));
        assert_eq!(text.lines().count() - 1, count.parse::<usize>().unwrap());
    }
    let o = run(&["enumerate", "--script", core("bundles/pizza.dlg").to_str().unwrap(), "--count-only"]);
    assert_eq!(stdout(&o), "13 sequences\n");
    assert_eq!(run(&["enumerate", "--slots", "0"]).status.code(), Some(2));
}

#[test]
fn drive_passes_with_both_grammars() {
    let o = run(&["drive"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("13/13 passed"));
    let words = core("bundles/sizetoppingcrust-words.gram");
    let o = run(&["drive", "--grammar", words.to_str().unwrap(), "--json"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("\"rows\""));
}
