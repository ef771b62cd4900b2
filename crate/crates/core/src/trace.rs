//! Adjacency-pair traces of a session.
//!
//! Each pair is written `(Ix ... Ry)`: `I` marks who took the initiative and
//! `R` who responded, with `c` for the caller and `s` for the system. An
//! out-of-turn answer nests inside the system pair it interrupted, so a
//! caller who volunteers a topping when asked for a size produces
//! `(Is (Ic Rs) Rc)`.

use serde::Serialize;
use thiserror::Error;

use crate::engine::{Classification, Turn};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Party {
    Caller,
    System,
}

impl Party {
    fn letter(self) -> char {
        match self {
            Party::Caller => 'c',
            Party::System => 's',
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum Part {
    /// A turn taking (or retaking) the initiative.
    Initiative(usize),
    Insertion(AdjacencyPair),
    Response(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AdjacencyPair {
    pub initiator: Party,
    pub responder: Party,
    /// Turn-log indices and insertions in the order they happened.
    pub parts: Vec<Part>,
    pub closed: bool,
    /// An exchange whose answer was not recognized.
    pub unrecognized: bool,
}

impl AdjacencyPair {
    fn new(initiator: Party) -> Self {
        let responder = match initiator {
            Party::Caller => Party::System,
            Party::System => Party::Caller,
        };
        AdjacencyPair { initiator, responder, parts: Vec::new(), closed: false, unrecognized: false }
    }

    pub fn children(&self) -> impl Iterator<Item = &AdjacencyPair> {
        self.parts.iter().filter_map(|p| match p {
            Part::Insertion(c) => Some(c),
            _ => None,
        })
    }

    /// Turn-log indices covered by this pair, depth first.
    pub fn utterance_refs(&self) -> Vec<usize> {
        let mut out = Vec::new();
        for p in &self.parts {
            match p {
                Part::Initiative(i) | Part::Response(i) => out.push(*i),
                Part::Insertion(c) => out.extend(c.utterance_refs()),
            }
        }
        out
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Trace {
    pub pairs: Vec<AdjacencyPair>,
    /// System turns outside any pair, such as closing remarks.
    pub unpaired: Vec<usize>,
    /// Whether the first pair stands for the call itself.
    pub opens_with_call: bool,
}

impl Trace {
    pub fn utterance_refs(&self) -> Vec<usize> {
        self.pairs.iter().flat_map(AdjacencyPair::utterance_refs).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TraceError {
    #[error("turn {0}: caller utterance without a preceding prompt")]
    MalformedLog(usize),
}

pub fn build_trace(turns: &[Turn], greeting_as_response: bool) -> Result<Trace, TraceError> {
    let mut trace = Trace { opens_with_call: greeting_as_response, ..Trace::default() };
    let mut lead = greeting_as_response.then(|| AdjacencyPair { closed: true, ..AdjacencyPair::new(Party::Caller) });
    let mut open: Option<AdjacencyPair> = None;
    let mut insertion: Option<AdjacencyPair> = None;

    for (i, turn) in turns.iter().enumerate() {
        match turn {
            Turn::SystemSay { .. } | Turn::SystemAck { .. } => {
                if let Some(c) = insertion.as_mut() {
                    c.parts.push(Part::Response(i));
                    c.closed = true;
                } else if let Some(l) = lead.as_mut() {
                    l.parts.push(Part::Response(i));
                } else {
                    trace.unpaired.push(i);
                }
            }
            Turn::SystemPrompt { .. } => {
                if let Some(l) = lead.take() {
                    trace.pairs.push(l);
                }
                let outer = open.get_or_insert_with(|| AdjacencyPair::new(Party::System));
                if let Some(mut c) = insertion.take() {
                    c.closed = true;
                    outer.parts.push(Part::Insertion(c));
                }
                outer.parts.push(Part::Initiative(i));
            }
            Turn::UserUtterance { classification, .. } => {
                let outer = open.as_mut().ok_or(TraceError::MalformedLog(i))?;
                if let Some(c) = insertion.take() {
                    outer.parts.push(Part::Insertion(c));
                }
                match classification {
                    Classification::Responsive | Classification::Mixed => {
                        outer.parts.push(Part::Response(i));
                        outer.closed = true;
                        trace.pairs.extend(open.take());
                    }
                    Classification::OutOfTurn => {
                        let mut c = AdjacencyPair::new(Party::Caller);
                        c.parts.push(Part::Initiative(i));
                        insertion = Some(c);
                    }
                    Classification::Unrecognized => {
                        let mut failed = AdjacencyPair::new(Party::System);
                        failed.parts.push(Part::Response(i));
                        failed.closed = true;
                        failed.unrecognized = true;
                        outer.parts.push(Part::Insertion(failed));
                    }
                }
            }
        }
    }
    if let Some(c) = insertion {
        if let Some(outer) = open.as_mut() {
            outer.parts.push(Part::Insertion(c));
        }
    }
    trace.pairs.extend(lead);
    trace.pairs.extend(open);
    Ok(trace)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct NotationOptions {
    /// Show unrecognized exchanges as `(Is Rc)!`.
    pub extended: bool,
}

/// The trace in parenthesized notation, e.g. `(Ic Rs) (Is Rc)`.
pub fn render_notation(trace: &Trace) -> String {
    render_notation_with(trace, NotationOptions::default())
}

pub fn render_notation_with(trace: &Trace, options: NotationOptions) -> String {
    items(trace, options).into_iter().map(|(sym, _)| sym).collect::<Vec<_>>().join(" ")
}

/// Notation plus a second row of utterance numbers under each symbol. The
/// call is utterance 0 and turn-log entry `i` is utterance `i + 1`.
pub fn render_indexed(trace: &Trace, options: NotationOptions) -> String {
    let items = items(trace, options);
    let mut top = String::new();
    let mut bottom = String::new();
    for (n, (sym, label)) in items.iter().enumerate() {
        let label = if sym.starts_with('(') { format!(" {label}") } else { label.clone() };
        let width = sym.chars().count().max(label.chars().count());
        if n > 0 {
            top.push(' ');
            bottom.push(' ');
        }
        top.push_str(&format!("{sym:<width$}"));
        bottom.push_str(&format!("{label:<width$}"));
    }
    format!("{}\n{}", top.trim_end(), bottom.trim_end())
}

fn items(trace: &Trace, options: NotationOptions) -> Vec<(String, String)> {
    let mut out = Vec::new();
    for (n, pair) in trace.pairs.iter().enumerate() {
        let is_call = n == 0 && trace.opens_with_call && pair.initiator == Party::Caller;
        pair_items(pair, is_call, options, &mut out);
    }
    out
}

fn pair_items(pair: &AdjacencyPair, is_call: bool, options: NotationOptions, out: &mut Vec<(String, String)>) {
    if pair.unrecognized && !options.extended {
        return;
    }
    let number = |i: &usize| (i + 1).to_string();
    let mut initiative: Vec<String> = Vec::new();
    if is_call {
        initiative.push("0".into());
    }
    let mut response = Vec::new();
    for p in &pair.parts {
        match p {
            Part::Initiative(i) => initiative.push(number(i)),
            Part::Response(i) => response.push(number(i)),
            Part::Insertion(_) => {}
        }
    }
    out.push((format!("(I{}", pair.initiator.letter()), initiative.join(",")));
    for child in pair.children() {
        pair_items(child, false, options, out);
    }
    let bang = if pair.unrecognized { "!" } else { "" };
    if pair.closed {
        out.push((format!("R{}){bang}", pair.responder.letter()), response.join(",")));
    } else if let Some(last) = out.last_mut() {
        last.0.push(')');
    }
}
