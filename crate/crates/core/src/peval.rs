//! Specialization of dialog scripts against slot bindings.
//!
//! A mixed-initiative form is a sequence of guarded prompts, one per slot
//! (`if unfilled(size) { prompt for size }`). Binding a slot makes its guard
//! statically false, so specialization removes the declaration outright.
//! Forms left without slots disappear. Greetings and confirmations are
//! handled by the interpreter and pass through untouched.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use thiserror::Error;

use crate::grammar::{ConflictPolicy, SlotFill};
use crate::script::{DialogScript, Stage};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PevalError {
    #[error("unknown slot {0}")]
    UnknownSlot(String),
    #[error("slot {0} is already bound")]
    Conflict(String),
}

/// Ordered slot bindings. Later bindings of the same slot shadow earlier
/// ones unless a conflict policy says otherwise.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Environment(Vec<(String, String)>);

impl Environment {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn bind(mut self, slot: impl Into<String>, value: impl Into<String>) -> Self {
        self.0.push((slot.into(), value.into()));
        self
    }

    pub fn push(&mut self, slot: impl Into<String>, value: impl Into<String>) {
        self.0.push((slot.into(), value.into()));
    }

    pub fn bindings(&self) -> &[(String, String)] {
        &self.0
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn domain(&self) -> BTreeSet<&str> {
        self.0.iter().map(|(s, _)| s.as_str()).collect()
    }

    /// Concatenation; bindings of `other` come after those of `self`.
    pub fn concat(&self, other: &Environment) -> Environment {
        Environment(self.0.iter().chain(&other.0).cloned().collect())
    }

    /// One value per slot after applying `policy`.
    pub fn resolve(&self, policy: ConflictPolicy) -> Result<BTreeMap<String, String>, PevalError> {
        let mut out = BTreeMap::new();
        for (slot, value) in &self.0 {
            if out.contains_key(slot) {
                match policy {
                    ConflictPolicy::FirstWins => continue,
                    ConflictPolicy::LastWins => {}
                    ConflictPolicy::Reject => return Err(PevalError::Conflict(slot.clone())),
                }
            }
            out.insert(slot.clone(), value.clone());
        }
        Ok(out)
    }
}

impl<S: Into<String>, V: Into<String>> FromIterator<(S, V)> for Environment {
    fn from_iter<I: IntoIterator<Item = (S, V)>>(iter: I) -> Self {
        Environment(iter.into_iter().map(|(s, v)| (s.into(), v.into())).collect())
    }
}

/// Residual script for `script` given the bindings in `env`.
///
/// Under [`ConflictPolicy::Reject`], binding a slot twice in `env`, or
/// binding one that `script` has already specialized away, is an error.
/// The other policies only affect values, which the residual does not carry.
pub fn specialize(script: &DialogScript, env: &Environment, policy: ConflictPolicy) -> Result<DialogScript, PevalError> {
    for (slot, _) in env.bindings() {
        if !script.is_declared(slot) {
            return Err(PevalError::UnknownSlot(slot.clone()));
        }
        if policy == ConflictPolicy::Reject && script.bound.contains(slot) {
            return Err(PevalError::Conflict(slot.clone()));
        }
    }
    env.resolve(policy)?;

    let domain = env.domain();
    let mut bound = script.bound.clone();
    let mut stages = Vec::with_capacity(script.stages.len());
    for stage in &script.stages {
        match stage {
            Stage::MixedForm { name, grammar, slots } => {
                let (gone, kept): (Vec<_>, Vec<_>) = slots.iter().cloned().partition(|d| domain.contains(d.name.as_str()));
                bound.extend(gone.into_iter().map(|d| d.name));
                if !kept.is_empty() {
                    stages.push(Stage::MixedForm { name: name.clone(), grammar: grammar.clone(), slots: kept });
                }
            }
            other => stages.push(other.clone()),
        }
    }
    Ok(DialogScript { name: script.name.clone(), bound, stages })
}

/// Slots whose guards are still present in mixed-initiative forms.
pub fn residual_slots(script: &DialogScript) -> BTreeSet<String> {
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

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SlotEntry {
    pub value: String,
    /// How the caller said it; used when the value is spoken back.
    pub surface: String,
    pub filled_at_turn: usize,
    pub just_filled: bool,
}

/// Slot values recorded by the interpreter, kept apart from the residual
/// script, which only knows which guards are gone.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct SlotStore(BTreeMap<String, SlotEntry>);

impl SlotStore {
    pub fn get(&self, slot: &str) -> Option<&SlotEntry> {
        self.0.get(slot)
    }

    pub fn value(&self, slot: &str) -> Option<&str> {
        self.0.get(slot).map(|e| e.value.as_str())
    }

    pub fn contains(&self, slot: &str) -> bool {
        self.0.contains_key(slot)
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &SlotEntry)> {
        self.0.iter().map(|(k, v)| (k.as_str(), v))
    }

    /// Ends the turn that set any `just_filled` flags.
    pub fn clear_just_filled(&mut self) {
        for entry in self.0.values_mut() {
            entry.just_filled = false;
        }
    }

    /// Records a fill, honouring `policy` for slots that already hold a
    /// value. Returns whether the store changed.
    pub fn fill(&mut self, fill: &SlotFill, turn: usize, policy: ConflictPolicy) -> Result<bool, PevalError> {
        if self.0.contains_key(&fill.slot) {
            match policy {
                ConflictPolicy::FirstWins => return Ok(false),
                ConflictPolicy::Reject => return Err(PevalError::Conflict(fill.slot.clone())),
                ConflictPolicy::LastWins => {}
            }
        }
        self.0.insert(
            fill.slot.clone(),
            SlotEntry { value: fill.value.clone(), surface: fill.surface.clone(), filled_at_turn: turn, just_filled: true },
        );
        Ok(true)
    }

    pub fn clear(&mut self, slot: &str) {
        self.0.remove(slot);
    }

    pub fn to_environment(&self) -> Environment {
        self.0.iter().map(|(k, v)| (k.clone(), v.value.clone())).collect()
    }
}
