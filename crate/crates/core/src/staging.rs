//! Interaction staging: the ways a caller can split a form's slots across
//! utterances.
//!
//! Without permutations a staging sequence is an ordered set partition of
//! the slots (size+topping first, then crust, and so on). With permutations
//! the order of slots inside each utterance also counts.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::engine::{Classification, EngineConfig, Phase, Session, Turn};
use crate::grammar::Grammar;
use crate::script::{Action, DialogScript, Stage};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct StagingSequence {
    pub utterances: Vec<Vec<String>>,
}

impl fmt::Display for StagingSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.utterances.iter().map(|u| format!("[{}]", u.join(" "))).collect();
        f.write_str(&parts.join(" "))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StagingError {
    #[error("slot set is empty")]
    EmptySlotSet,
    #[error("slot {0} listed twice")]
    DuplicateSlot(String),
    #[error("script must have exactly one mixed-initiative form, found {0}")]
    FormCount(usize),
}

fn permutations(items: &[String]) -> Vec<Vec<String>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.to_vec();
        let head = rest.remove(i);
        for mut tail in permutations(&rest) {
            tail.insert(0, head.clone());
            out.push(tail);
        }
    }
    out
}

fn extend(remaining: &[String], with_permutations: bool, prefix: &mut Vec<Vec<String>>, out: &mut Vec<StagingSequence>) {
    if remaining.is_empty() {
        out.push(StagingSequence { utterances: prefix.clone() });
        return;
    }
    let n = remaining.len();
    for mask in 1u64..(1 << n) {
        let (chosen, rest): (Vec<_>, Vec<_>) =
            remaining.iter().enumerate().partition(|(i, _)| mask & (1 << i) != 0);
        let chosen: Vec<String> = chosen.into_iter().map(|(_, s)| s.clone()).collect();
        let rest: Vec<String> = rest.into_iter().map(|(_, s)| s.clone()).collect();
        let orders = if with_permutations { permutations(&chosen) } else { vec![chosen] };
        for block in orders {
            prefix.push(block);
            extend(&rest, with_permutations, prefix, out);
            prefix.pop();
        }
    }
}

/// Every staging sequence for `slots`, grouped by the slots of the first
/// utterance. Within an utterance, slots keep their input order unless
/// `with_permutations` is set.
pub fn enumerate_sequences<S: AsRef<str>>(slots: &[S], with_permutations: bool) -> Result<Vec<StagingSequence>, StagingError> {
    if slots.is_empty() {
        return Err(StagingError::EmptySlotSet);
    }
    let mut seen = BTreeSet::new();
    for s in slots {
        if !seen.insert(s.as_ref()) {
            return Err(StagingError::DuplicateSlot(s.as_ref().to_string()));
        }
    }
    assert!(slots.len() < 64, "too many slots to enumerate");
    let names: Vec<String> = slots.iter().map(|s| s.as_ref().to_string()).collect();
    let mut out = Vec::new();
    extend(&names, with_permutations, &mut Vec::new(), &mut out);
    Ok(out)
}

/// Number of staging sequences for an `n`-slot form, from the recurrence
/// `a(n) = sum_k C(n,k) w(k) a(n-k)` where `w(k)` is 1, or `k!` when
/// permutations count. Returns `None` on overflow.
pub fn count_sequences(n: usize, with_permutations: bool) -> Option<u128> {
    let mut binom = vec![vec![0u128; n + 1]; n + 1];
    for i in 0..=n {
        binom[i][0] = 1;
        for k in 1..=i {
            binom[i][k] = binom[i - 1][k - 1].checked_add(binom[i - 1][k])?;
        }
    }
    let mut fact = vec![1u128; n + 1];
    for k in 1..=n {
        fact[k] = fact[k - 1].checked_mul(k as u128)?;
    }
    let mut a = vec![0u128; n + 1];
    a[0] = 1;
    for m in 1..=n {
        let mut total = 0u128;
        for k in 1..=m {
            let w = if with_permutations { fact[k] } else { 1 };
            total = total.checked_add(binom[m][k].checked_mul(w)?.checked_mul(a[m - k])?)?;
        }
        a[m] = total;
    }
    Some(a[n])
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DriveRow {
    pub sequence: StagingSequence,
    pub utterances: Vec<String>,
    pub passed: bool,
    pub detail: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DriveReport {
    pub script: String,
    pub grammar: String,
    pub rows: Vec<DriveRow>,
}

impl DriveReport {
    pub fn passed(&self) -> usize {
        self.rows.iter().filter(|r| r.passed).count()
    }

    pub fn all_passed(&self) -> bool {
        self.passed() == self.rows.len()
    }

    pub fn render_table(&self) -> String {
        use std::fmt::Write;

        let width = self.rows.iter().map(|r| r.sequence.to_string().len()).max().unwrap_or(8).max(8);
        let mut out = String::new();
        let _ = writeln!(out, "{:>3}  {:<width$}  result", "#", "sequence");
        for (i, row) in self.rows.iter().enumerate() {
            let result = match (&row.passed, &row.detail) {
                (true, _) => "pass".to_string(),
                (false, Some(d)) => format!("FAIL ({d})"),
                (false, None) => "FAIL".to_string(),
            };
            let _ = writeln!(out, "{:>3}  {:<width$}  {result}", i + 1, row.sequence.to_string());
        }
        let _ = writeln!(out, "{}/{} passed", self.passed(), self.rows.len());
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Runs one session per staging sequence of the script's single
/// mixed-initiative form, answering with the first terminal of each slot,
/// and checks that every session completes with the expected values.
pub fn drive_all_sequences(script: &DialogScript, grammar: &Grammar) -> Result<DriveReport, StagingError> {
    drive_all_sequences_with(script, grammar, &EngineConfig::default())
}

/// As [`drive_all_sequences`], with a chosen engine configuration.
pub fn drive_all_sequences_with(
    script: &DialogScript,
    grammar: &Grammar,
    config: &EngineConfig,
) -> Result<DriveReport, StagingError> {
    let forms: Vec<_> = script
        .stages
        .iter()
        .filter_map(|s| match s {
            Stage::MixedForm { grammar, slots, .. } => Some((grammar, slots)),
            _ => None,
        })
        .collect();
    let [(grammar_ref, decls)] = forms.as_slice() else {
        return Err(StagingError::FormCount(forms.len()));
    };
    let slots: Vec<String> = decls.iter().map(|d| d.name.clone()).collect();

    // One confirming answer per confirmation stage: the first branch that
    // does not clear anything.
    let confirmations: Vec<String> = script
        .stages
        .iter()
        .filter_map(|s| match s {
            Stage::Confirm { branches, .. } => branches
                .iter()
                .find(|b| !b.actions.iter().any(|a| matches!(a, Action::ClearSlots(_))))
                .or(branches.first())
                .map(|b| b.value.clone()),
            _ => None,
        })
        .collect();

    let mut rows = Vec::new();
    for sequence in enumerate_sequences(&slots, false)? {
        rows.push(drive_one(script, grammar, grammar_ref, config, &confirmations, sequence));
    }
    Ok(DriveReport { script: script.name.clone(), grammar: grammar.name.clone(), rows })
}

fn drive_one(
    script: &DialogScript,
    grammar: &Grammar,
    grammar_ref: &str,
    config: &EngineConfig,
    confirmations: &[String],
    sequence: StagingSequence,
) -> DriveRow {
    let mut expected = BTreeMap::new();
    let mut utterances = Vec::new();
    let mut problem = None;
    for block in &sequence.utterances {
        let mut words = Vec::new();
        for slot in block {
            match grammar.slot_terminals(slot).map(|t| t.into_iter().next()) {
                Ok(Some(term)) => {
                    expected.insert(slot.clone(), term.clone());
                    words.push(term);
                }
                Ok(None) => problem = Some(format!("slot {slot} has no terminals")),
                Err(e) => problem = Some(e.to_string()),
            }
        }
        utterances.push(words.join(" "));
    }
    let form_turns = utterances.len();
    utterances.extend(confirmations.iter().cloned());

    let outcome = problem.map(Err).unwrap_or_else(|| {
        let grammars = BTreeMap::from([(grammar_ref.to_string(), grammar.clone())]);
        let mut session = Session::new(script.clone(), grammars, config.clone()).map_err(|e| e.to_string())?;
        let transcript = session.run_batch(&utterances).map_err(|e| e.to_string())?;
        if transcript.phase != Phase::Completed {
            return Err(format!("session ended {:?}", transcript.phase));
        }
        let accepted = transcript
            .turns
            .iter()
            .filter(|t| matches!(t, Turn::UserUtterance { classification, .. } if *classification != Classification::Unrecognized))
            .count();
        if accepted != form_turns + confirmations.len() {
            return Err(format!("{accepted} utterances accepted"));
        }
        for (slot, value) in &expected {
            if session.store().value(slot) != Some(value.as_str()) {
                return Err(format!("slot {slot} = {:?}", session.store().value(slot)));
            }
        }
        Ok(())
    });

    DriveRow { sequence, utterances, passed: outcome.is_ok(), detail: outcome.err() }
}
