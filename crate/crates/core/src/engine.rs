//! The dialog manager.
//!
//! Each round is Select, Collect, Process:
//!
//! * Select walks the residual script and picks the first stage that still
//!   wants something: an unplayed greeting, the first remaining slot of a
//!   mixed-initiative form, or an unanswered confirmation.
//! * Collect queues that prompt and waits for an utterance.
//! * Process turns the utterance into slot fills, records them, and
//!   recomputes the residual by specializing the original script against
//!   the store.
//!
//! Responsive and out-of-turn answers take the same path through Process.
//! The classification attached to a caller turn is computed afterwards and
//! only feeds acknowledgements and the trace.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grammar::{tokenize, ConflictPolicy, Grammar, MatchConfig, MatchError, SlotFill};
use crate::peval::{specialize, PevalError, SlotStore};
use crate::script::{validate, Action, DialogScript, Issue, PromptTemplate, Stage};
use crate::transcript::Transcript;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Classification {
    /// Fills exactly the prompted slot.
    Responsive,
    /// Fills other slots but not the prompted one.
    OutOfTurn,
    /// Fills the prompted slot and others.
    Mixed,
    Unrecognized,
}

impl Classification {
    pub fn of(prompted: &str, fills: &[SlotFill]) -> Self {
        let slots: BTreeSet<&str> = fills.iter().map(|f| f.slot.as_str()).collect();
        match (slots.contains(prompted), slots.len()) {
            (_, 0) => Classification::Unrecognized,
            (true, 1) => Classification::Responsive,
            (true, _) => Classification::Mixed,
            (false, _) => Classification::OutOfTurn,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind")]
pub enum Turn {
    SystemPrompt { stage: String, slot: Option<String>, text: String },
    UserUtterance { text: String, fills: Vec<SlotFill>, classification: Classification },
    SystemAck { text: String },
    SystemSay { text: String },
}

impl Turn {
    pub fn text(&self) -> &str {
        match self {
            Turn::SystemPrompt { text, .. }
            | Turn::UserUtterance { text, .. }
            | Turn::SystemAck { text }
            | Turn::SystemSay { text } => text,
        }
    }

    pub fn is_system(&self) -> bool {
        !matches!(self, Turn::UserUtterance { .. })
    }

    /// One transcript line: `S: ...` or `C: ...`.
    pub fn line(&self) -> String {
        let speaker = if self.is_system() { 'S' } else { 'C' };
        format!("{speaker}: {}", self.text())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Phase {
    Active,
    Completed,
    Aborted,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EngineConfig {
    pub match_config: MatchConfig,
    /// Spoken after an out-of-turn fill; `{value}` is replaced by the value
    /// as the caller said it and `{slot}` by the slot name.
    pub ack_template: Option<String>,
    pub max_reprompts: u32,
    /// Treat the opening greeting as the system's response to the call.
    pub greeting_as_response: bool,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            match_config: MatchConfig::default(),
            ack_template: Some("Okay, {value}.".to_string()),
            max_reprompts: 3,
            greeting_as_response: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EngineError {
    #[error("invalid script: {}", .0.iter().map(Issue::to_string).collect::<Vec<_>>().join("; "))]
    InvalidScript(Vec<Issue>),
    #[error("missing grammar {0}")]
    MissingGrammar(String),
    #[error("slot {slot} is not tagged in grammar {grammar}")]
    SlotNotCovered { slot: String, grammar: String },
    #[error("max_reprompts must be at least 1")]
    InvalidConfig,
    #[error("session is not active")]
    SessionNotActive,
    #[error("no prompt is outstanding")]
    NoPendingPrompt,
    #[error("conflicting values for slot {0}")]
    Conflict(String),
    #[error(transparent)]
    Specialize(#[from] PevalError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TurnResult {
    pub fills: Vec<SlotFill>,
    pub classification: Classification,
    pub phase: Phase,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
enum Target {
    Form { grammar: String },
    Confirm,
}

/// The prompt currently waiting for an answer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Pending {
    pub stage: String,
    pub slot: String,
    target: Target,
}

#[derive(Debug, Clone)]
pub struct Session {
    original: DialogScript,
    residual: DialogScript,
    store: SlotStore,
    grammars: BTreeMap<String, Grammar>,
    config: EngineConfig,
    turn_log: Vec<Turn>,
    phase: Phase,
    reprompts: BTreeMap<String, u32>,
    played: BTreeSet<String>,
    pending: Option<Pending>,
    drained: usize,
}

impl Session {
    pub fn new(script: DialogScript, grammars: BTreeMap<String, Grammar>, config: EngineConfig) -> Result<Self, EngineError> {
        let issues = validate(&script);
        if !issues.is_empty() {
            return Err(EngineError::InvalidScript(issues));
        }
        if config.max_reprompts < 1 {
            return Err(EngineError::InvalidConfig);
        }
        for stage in &script.stages {
            if let Stage::MixedForm { grammar, slots, .. } = stage {
                let g = grammars.get(grammar).ok_or_else(|| EngineError::MissingGrammar(grammar.clone()))?;
                let tagged: BTreeSet<&str> = g.tagged_slots().collect();
                if let Some(d) = slots.iter().find(|d| !tagged.contains(d.name.as_str())) {
                    return Err(EngineError::SlotNotCovered { slot: d.name.clone(), grammar: grammar.clone() });
                }
            }
        }
        Ok(Session {
            residual: script.clone(),
            original: script,
            store: SlotStore::default(),
            grammars,
            config,
            turn_log: Vec::new(),
            phase: Phase::Active,
            reprompts: BTreeMap::new(),
            played: BTreeSet::new(),
            pending: None,
            drained: 0,
        })
    }

    pub fn original(&self) -> &DialogScript {
        &self.original
    }

    pub fn residual(&self) -> &DialogScript {
        &self.residual
    }

    pub fn store(&self) -> &SlotStore {
        &self.store
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn turn_log(&self) -> &[Turn] {
        &self.turn_log
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn pending(&self) -> Option<&Pending> {
        self.pending.as_ref()
    }

    pub fn reprompt_count(&self, slot: &str) -> u32 {
        self.reprompts.get(slot).copied().unwrap_or(0)
    }

    /// System turns queued since the previous call. Runs Select when no
    /// prompt is outstanding, so this also moves the dialog forward.
    pub fn next_output(&mut self) -> Vec<Turn> {
        if self.phase == Phase::Active && self.pending.is_none() {
            self.select();
        }
        let out = self.turn_log[self.drained..].iter().filter(|t| t.is_system()).cloned().collect();
        self.drained = self.turn_log.len();
        out
    }

    fn select(&mut self) {
        let mut next = None;
        for stage in &self.residual.stages {
            match stage {
                Stage::Block { name, messages } => {
                    if self.played.insert(name.clone()) {
                        for m in messages {
                            self.turn_log.push(Turn::SystemSay { text: m.clone() });
                        }
                    }
                }
                Stage::MixedForm { name, grammar, slots } => {
                    let first = &slots[0];
                    next = Some((name, first, Target::Form { grammar: grammar.clone() }));
                    break;
                }
                Stage::Confirm { name, slot, .. } => {
                    if !self.store.contains(&slot.name) {
                        next = Some((name, slot, Target::Confirm));
                        break;
                    }
                }
            }
        }
        match next {
            Some((stage, decl, target)) => {
                let text = fill_template(&decl.prompt, &self.store);
                self.turn_log.push(Turn::SystemPrompt { stage: stage.clone(), slot: Some(decl.name.clone()), text });
                self.pending = Some(Pending { stage: stage.clone(), slot: decl.name.clone(), target });
            }
            None => self.phase = Phase::Completed,
        }
    }

    pub fn submit_utterance(&mut self, text: &str) -> Result<TurnResult, EngineError> {
        if self.phase != Phase::Active {
            return Err(EngineError::SessionNotActive);
        }
        let pending = self.pending.clone().ok_or(EngineError::NoPendingPrompt)?;
        let policy = self.config.match_config.conflict;

        let matched = match &pending.target {
            Target::Form { grammar } => {
                let form_slots = self.original_form_slots(&pending.stage);
                self.grammars[grammar]
                    .match_utterance(text, self.config.match_config)
                    .map(|fills| fills.into_iter().filter(|f| form_slots.contains(f.slot.as_str())).collect())
            }
            Target::Confirm => self.match_confirm(&pending, text),
        };
        let fills = match matched {
            Ok(fills) => fills,
            Err(MatchError::NoMatch) => Vec::new(),
            Err(MatchError::Conflict(slot)) => return Err(EngineError::Conflict(slot)),
        };
        if policy == ConflictPolicy::Reject {
            if let Some(f) = fills.iter().find(|f| self.store.contains(&f.slot)) {
                return Err(EngineError::Conflict(f.slot.clone()));
            }
        }

        // Process: record every fill and re-specialize, whatever was asked.
        let turn = self.turn_log.len();
        self.store.clear_just_filled();
        for fill in &fills {
            self.store.fill(fill, turn, policy)?;
        }
        self.respecialize()?;

        let classification = Classification::of(&pending.slot, &fills);
        self.turn_log.push(Turn::UserUtterance { text: text.to_string(), fills: fills.clone(), classification });
        self.pending = None;

        match classification {
            Classification::Unrecognized => {
                let count = self.reprompts.entry(pending.slot.clone()).or_insert(0);
                *count += 1;
                if *count > self.config.max_reprompts {
                    self.phase = Phase::Aborted;
                }
            }
            Classification::OutOfTurn => {
                if let Some(template) = &self.config.ack_template {
                    for f in &fills {
                        let text = template.replace("{value}", &f.surface).replace("{slot}", &f.slot);
                        self.turn_log.push(Turn::SystemAck { text });
                    }
                }
            }
            Classification::Responsive | Classification::Mixed => {}
        }
        if pending.target == Target::Confirm && classification != Classification::Unrecognized {
            self.run_branch(&pending.stage, &fills[0].value)?;
        }

        Ok(TurnResult { fills, classification, phase: self.phase })
    }

    /// Replays caller lines until the dialog ends or the lines run out.
    pub fn run_batch<I, S>(&mut self, utterances: I) -> Result<Transcript, EngineError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut lines = utterances.into_iter();
        loop {
            self.next_output();
            if self.phase != Phase::Active {
                break;
            }
            match lines.next() {
                Some(line) => {
                    self.submit_utterance(line.as_ref())?;
                }
                None => break,
            }
        }
        Ok(Transcript { turns: self.turn_log.clone(), phase: self.phase })
    }

    fn original_form_slots(&self, stage: &str) -> BTreeSet<&str> {
        match self.original.stage(stage) {
            Some(s) => s.slot_decls().into_iter().map(|d| d.name.as_str()).collect(),
            None => BTreeSet::new(),
        }
    }

    fn match_confirm(&self, pending: &Pending, text: &str) -> Result<Vec<SlotFill>, MatchError> {
        let Some(Stage::Confirm { branches, .. }) = self.original.stage(&pending.stage) else {
            return Err(MatchError::NoMatch);
        };
        let tokens = tokenize(text);
        let said: Vec<&str> = tokens.iter().map(|t| t.text.as_str()).collect();
        for b in branches {
            let expected: Vec<String> = tokenize(&b.value).into_iter().map(|t| t.text).collect();
            if !said.is_empty() && said == expected {
                return Ok(vec![SlotFill {
                    slot: pending.slot.clone(),
                    value: b.value.clone(),
                    surface: said.join(" "),
                    span: 0..said.len(),
                }]);
            }
        }
        Err(MatchError::NoMatch)
    }

    fn run_branch(&mut self, stage: &str, value: &str) -> Result<(), EngineError> {
        let actions = match self.original.stage(stage) {
            Some(Stage::Confirm { branches, .. }) => {
                branches.iter().find(|b| b.value == value).map(|b| b.actions.clone()).unwrap_or_default()
            }
            _ => Vec::new(),
        };
        for action in actions {
            match action {
                Action::ClearSlots(names) => {
                    for n in &names {
                        self.store.clear(n);
                    }
                    self.respecialize()?;
                }
                Action::Say(text) => self.turn_log.push(Turn::SystemSay { text }),
            }
        }
        Ok(())
    }

    fn respecialize(&mut self) -> Result<(), EngineError> {
        self.residual = specialize(&self.original, &self.store.to_environment(), ConflictPolicy::LastWins)?;
        Ok(())
    }
}

fn fill_template(template: &PromptTemplate, store: &SlotStore) -> String {
    // Validation guarantees placeholders only name slots filled earlier.
    template
        .render(|slot| store.get(slot).map(|e| e.surface.as_str()))
        .unwrap_or_else(|_| template.as_str().to_string())
}
