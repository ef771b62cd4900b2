//! Plain-text transcripts: one `S: ...` or `C: ...` line per turn.

use serde::Serialize;
use thiserror::Error;

use crate::engine::{Phase, Turn};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Transcript {
    pub turns: Vec<Turn>,
    pub phase: Phase,
}

impl Transcript {
    pub fn render(&self) -> String {
        render_turns(&self.turns)
    }

    pub fn lines(&self) -> Vec<Line> {
        self.turns
            .iter()
            .map(|t| Line { speaker: if t.is_system() { Speaker::System } else { Speaker::Caller }, text: t.text().to_string() })
            .collect()
    }
}

pub fn render_turns(turns: &[Turn]) -> String {
    let mut out = String::new();
    for t in turns {
        out.push_str(&t.line());
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Speaker {
    System,
    Caller,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Line {
    pub speaker: Speaker,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: expected `S:` or `C:` prefix")]
pub struct ParseError {
    pub line: usize,
}

/// Parses transcript text. Blank lines are skipped and text is
/// whitespace-normalized.
pub fn parse_transcript(text: &str) -> Result<Vec<Line>, ParseError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let (speaker, rest) = if let Some(rest) = line.strip_prefix("S:") {
            (Speaker::System, rest)
        } else if let Some(rest) = line.strip_prefix("C:") {
            (Speaker::Caller, rest)
        } else {
            return Err(ParseError { line: i + 1 });
        };
        out.push(Line { speaker, text: normalize_whitespace(rest) });
    }
    Ok(out)
}

/// Collapses every run of whitespace to one space and trims the ends.
pub fn normalize_whitespace(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_normalize() {
        let lines = parse_transcript("S:  Sorry.  Your order\thas been canceled.\n\nC: No\n").unwrap();
        assert_eq!(lines, vec![
            Line { speaker: Speaker::System, text: "Sorry. Your order has been canceled.".into() },
            Line { speaker: Speaker::Caller, text: "No".into() },
        ]);
        assert_eq!(parse_transcript("S: hi\nX: nope"), Err(ParseError { line: 2 }));
    }

    #[test]
    fn render_lines() {
        let turns = vec![Turn::SystemSay { text: "hi".into() }, Turn::SystemAck { text: "Okay, thin.".into() }];
        assert_eq!(render_turns(&turns), "S: hi\nS: Okay, thin.\n");
    }
}
