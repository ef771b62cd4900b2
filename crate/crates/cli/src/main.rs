use std::io::{BufRead, IsTerminal, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mixdialog::bundles::Bundle;
use mixdialog::staging::{count_sequences, drive_all_sequences_with, enumerate_sequences};
use mixdialog::trace::{build_trace, render_notation};
use mixdialog::{
    parse_grammar, render_script, specialize, ConflictPolicy, EngineConfig, Environment, MatchConfig, MatchMode, Phase,
    Session, Stage,
};
use mixdialog_service::ServeArgs;

const EXIT_MISMATCH: u8 = 1;
const EXIT_INPUT: u8 = 2;
const EXIT_INCOMPLETE: u8 = 3;

#[derive(Parser)]
#[command(name = "mixdialog", version, about = "Mixed-initiative dialogs by partial evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Hold a dialog on the terminal, then print its trace.
    Run {
        #[command(flatten)]
        bundle: BundleArgs,
        #[command(flatten)]
        engine: EngineArgs,
    },
    /// Replay caller lines from a file and print the transcript.
    Batch {
        #[command(flatten)]
        bundle: BundleArgs,
        #[command(flatten)]
        engine: EngineArgs,
        /// One caller utterance per line.
        #[arg(long)]
        input: PathBuf,
        /// Compare the transcript with this file and show a diff.
        #[arg(long)]
        expect: Option<PathBuf>,
    },
    /// Print the residual script left after binding slots.
    Specialize {
        #[command(flatten)]
        bundle: BundleArgs,
        /// A `slot=value` binding; repeat for more.
        #[arg(long = "bind", value_parser = parse_binding)]
        bindings: Vec<(String, String)>,
        #[arg(long, value_enum, default_value_t = Conflict::LastWins)]
        conflict: Conflict,
    },
    /// Count and list the ways a form's slots can be supplied.
    Enumerate {
        /// Number of slots.
        #[arg(long, conflicts_with = "script", required_unless_present = "script")]
        slots: Option<usize>,
        /// Take the slots from this script's single form.
        #[arg(long)]
        script: Option<PathBuf>,
        /// Also distinguish the order of slots within one utterance.
        #[arg(long)]
        permutations: bool,
        /// Print only the count.
        #[arg(long)]
        count_only: bool,
    },
    /// Run one session per staging sequence and report which complete.
    Drive {
        #[command(flatten)]
        bundle: BundleArgs,
        #[command(flatten)]
        engine: EngineArgs,
        /// Use this grammar for the form instead of the one the script names.
        #[arg(long)]
        grammar: Option<PathBuf>,
        #[arg(long)]
        json: bool,
    },
    /// Start the HTTP service.
    Serve {
        #[command(flatten)]
        serve: ServeArgs,
        #[command(flatten)]
        engine: EngineArgs,
    },
}

#[derive(Args)]
struct BundleArgs {
    /// Dialog script; the built-in pizza bundle when omitted.
    #[arg(long)]
    script: Option<PathBuf>,
    /// Where the script's grammars live; defaults to the script's directory.
    #[arg(long)]
    grammars: Option<PathBuf>,
}

impl BundleArgs {
    fn load(&self) -> Result<Bundle, String> {
        match &self.script {
            None => Ok(Bundle::pizza()),
            Some(path) => {
                let dir = match &self.grammars {
                    Some(d) => d.clone(),
                    None => path.parent().map(Path::to_path_buf).unwrap_or_default(),
                };
                Bundle::load(path, &dir).map_err(|e| e.to_string())
            }
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Spot,
    Strict,
}

#[derive(Clone, Copy, ValueEnum)]
enum Conflict {
    FirstWins,
    LastWins,
    Reject,
}

impl From<Conflict> for ConflictPolicy {
    fn from(c: Conflict) -> Self {
        match c {
            Conflict::FirstWins => ConflictPolicy::FirstWins,
            Conflict::LastWins => ConflictPolicy::LastWins,
            Conflict::Reject => ConflictPolicy::Reject,
        }
    }
}

#[derive(Args)]
struct EngineArgs {
    #[arg(long, value_enum, default_value_t = Mode::Spot)]
    mode: Mode,
    #[arg(long, value_enum, default_value_t = Conflict::LastWins)]
    conflict: Conflict,
    /// Unrecognized answers tolerated per prompt before giving up.
    #[arg(long, default_value_t = 3)]
    max_reprompts: u32,
    /// Acknowledgement for volunteered values; `{value}` and `{slot}` are substituted.
    #[arg(long, default_value = "Okay, {value}.")]
    ack: String,
    #[arg(long)]
    no_ack: bool,
}

impl EngineArgs {
    fn config(&self) -> EngineConfig {
        let mode = match self.mode {
            Mode::Spot => MatchMode::Spot,
            Mode::Strict => MatchMode::Strict,
        };
        EngineConfig {
            match_config: MatchConfig { mode, conflict: self.conflict.into() },
            ack_template: (!self.no_ack).then(|| self.ack.clone()),
            max_reprompts: self.max_reprompts,
            ..EngineConfig::default()
        }
    }
}

fn parse_binding(s: &str) -> Result<(String, String), String> {
    let (slot, value) = s.split_once('=').ok_or("expected slot=value")?;
    if slot.trim().is_empty() {
        return Err("empty slot name".into());
    }
    Ok((slot.trim().to_string(), value.trim().to_string()))
}

struct Failure(u8, String);

impl Failure {
    fn input(e: impl ToString) -> Self {
        Failure(EXIT_INPUT, e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(Failure(code, message)) => {
            if !message.is_empty() {
                eprintln!("error: {message}");
            }
            ExitCode::from(code)
        }
    }
}

fn new_session(bundle: &Bundle, engine: &EngineArgs) -> Result<Session, Failure> {
    bundle.session(engine.config()).map_err(Failure::input)
}

fn dispatch(command: Command) -> Result<u8, Failure> {
    let mut out = std::io::stdout().lock();
    match command {
        Command::Run { bundle, engine } => {
            let mut session = new_session(&bundle.load().map_err(Failure::input)?, &engine)?;
            let stdin = std::io::stdin();
            let interactive = stdin.is_terminal();
            let mut lines = stdin.lock().lines();
            loop {
                for turn in session.next_output() {
                    writeln!(out, "{}", turn.line()).ok();
                }
                if session.phase() != Phase::Active {
                    break;
                }
                if interactive {
                    write!(out, "C: ").ok();
                    out.flush().ok();
                }
                let Some(Ok(line)) = lines.next() else {
                    if interactive {
                        writeln!(out).ok();
                    }
                    break;
                };
                if !interactive {
                    writeln!(out, "C: {line}").ok();
                }
                if let Err(e) = session.submit_utterance(&line) {
                    writeln!(out, "S: ({e})").ok();
                }
            }
            let trace = build_trace(session.turn_log(), session.config().greeting_as_response).map_err(Failure::input)?;
            writeln!(out, "\ntrace: {}", render_notation(&trace)).ok();
            Ok(if session.phase() == Phase::Completed { 0 } else { EXIT_INCOMPLETE })
        }
        Command::Batch { bundle, engine, input, expect } => {
            let mut session = new_session(&bundle.load().map_err(Failure::input)?, &engine)?;
            let text = std::fs::read_to_string(&input).map_err(|e| Failure::input(format!("{}: {e}", input.display())))?;
            let lines: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).collect();
            let transcript = session.run_batch(&lines).map_err(Failure::input)?;
            let rendered = transcript.render();
            out.write_all(rendered.as_bytes()).ok();
            if let Some(path) = expect {
                let expected = std::fs::read_to_string(&path).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
                if expected == rendered {
                    return Ok(0);
                }
                let diff = similar::TextDiff::from_lines(&expected, &rendered);
                let header = (path.display().to_string(), "transcript".to_string());
                eprint!("{}", diff.unified_diff().header(&header.0, &header.1));
                return Err(Failure(EXIT_MISMATCH, "transcript differs from expectation".into()));
            }
            if transcript.phase != Phase::Completed {
                return Err(Failure(EXIT_INCOMPLETE, format!("session incomplete ({:?})", transcript.phase)));
            }
            Ok(0)
        }
        Command::Specialize { bundle, bindings, conflict } => {
            let bundle = bundle.load().map_err(Failure::input)?;
            let env: Environment = bindings.into_iter().collect();
            let residual = specialize(&bundle.script, &env, conflict.into()).map_err(Failure::input)?;
            out.write_all(render_script(&residual).as_bytes()).ok();
            Ok(0)
        }
        Command::Enumerate { slots, script, permutations, count_only } => {
            let names: Vec<String> = match (slots, script) {
                (Some(0), _) => return Err(Failure::input("--slots must be at least 1")),
                (Some(n), _) => (1..=n).map(|i| format!("s{i}")).collect(),
                (None, Some(path)) => {
                    let src = std::fs::read_to_string(&path).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
                    single_form_slots(&mixdialog::parse_script(&src).map_err(Failure::input)?)?
                }
                (None, None) => return Err(Failure::input("give --slots or --script")),
            };
            let count = count_sequences(names.len(), permutations).ok_or_else(|| Failure::input("count overflows"))?;
            writeln!(out, "{count} sequences").ok();
            if !count_only {
                for seq in enumerate_sequences(&names, permutations).map_err(Failure::input)? {
                    writeln!(out, "{seq}").ok();
                }
            }
            Ok(0)
        }
        Command::Drive { bundle, engine, grammar, json } => {
            let bundle = bundle.load().map_err(Failure::input)?;
            let grammar = match grammar {
                Some(path) => {
                    let src = std::fs::read_to_string(&path).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
                    parse_grammar(&src).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?
                }
                None => bundle.grammars.values().next().cloned().ok_or_else(|| Failure::input("script has no form"))?,
            };
            let report = drive_all_sequences_with(&bundle.script, &grammar, &engine.config()).map_err(Failure::input)?;
            if json {
                writeln!(out, "{}", report.to_json()).ok();
            } else {
                out.write_all(report.render_table().as_bytes()).ok();
            }
            Ok(if report.all_passed() { 0 } else { EXIT_MISMATCH })
        }
        Command::Serve { serve, engine } => {
            let runtime = tokio::runtime::Runtime::new().map_err(Failure::input)?;
            runtime.block_on(mixdialog_service::serve(serve, engine.config())).map_err(Failure::input)?;
            Ok(0)
        }
    }
}

fn single_form_slots(script: &mixdialog::DialogScript) -> Result<Vec<String>, Failure> {
    let forms: Vec<_> = script
        .stages
        .iter()
        .filter_map(|s| match s {
            Stage::MixedForm { slots, .. } => Some(slots.iter().map(|d| d.name.clone()).collect::<Vec<_>>()),
            _ => None,
        })
        .collect();
    match forms.as_slice() {
        [one] => Ok(one.clone()),
        _ => Err(Failure::input(format!("expected one form, found {}", forms.len()))),
    }
}
