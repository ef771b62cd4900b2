//! Mixed-initiative slot-filling dialogs.
//!
//! A dialog script is treated as a program whose arguments are slot
//! variables. Every caller utterance, whether it answers the current prompt
//! or supplies something out of turn, becomes a set of slot bindings that
//! the partial evaluator folds into the script. The interpreter then simply
//! prompts for whatever the residual script still asks for.

pub mod bundles;
pub mod engine;
pub mod grammar;
pub mod peval;
pub mod script;
pub mod staging;
pub mod trace;
pub mod transcript;

pub use engine::{Classification, EngineConfig, EngineError, Phase, Session, Turn, TurnResult};
pub use grammar::{parse_grammar, ConflictPolicy, Grammar, MatchConfig, MatchMode, SlotFill};
pub use peval::{residual_slots, specialize, Environment, SlotStore};
pub use script::{parse_script, render_script, validate, DialogScript, Issue, Stage};
pub use trace::{build_trace, render_notation, Trace};
