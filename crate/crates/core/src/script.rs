//! Dialog scripts: a small DSL whose mixed-initiative forms are programs
//! parameterized by slot variables.
//!
//! ```text
//! script   := "dialog" IDENT "{" ("bound" IDENT+ ";")? stage* "}"
//! stage    := "greet" IDENT? STRING+
//!           | "form" IDENT "grammar" STRING "{" ("slot" IDENT "prompt" STRING)+ "}"
//!           | "confirm" IDENT "prompt" STRING ("on" IDENT "{" action* "}")+
//! action   := "clear" IDENT+ ";" | "say" STRING ";"
//! ```
//!
//! The `bound` clause only appears in residual scripts. It lists the slots
//! whose guards were removed by specialization so that a residual remains a
//! closed, valid script on its own.

use std::collections::{BTreeSet, HashSet};
use std::fmt;

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DialogScript {
    pub name: String,
    /// Slots already specialized out of their forms.
    pub bound: BTreeSet<String>,
    pub stages: Vec<Stage>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum Stage {
    Block {
        name: String,
        messages: Vec<String>,
    },
    MixedForm {
        name: String,
        grammar: String,
        slots: Vec<SlotDecl>,
    },
    Confirm {
        name: String,
        slot: SlotDecl,
        branches: Vec<Branch>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SlotDecl {
    pub name: String,
    pub prompt: PromptTemplate,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Branch {
    pub value: String,
    pub actions: Vec<Action>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum Action {
    ClearSlots(Vec<String>),
    Say(String),
}

/// Prompt text with `{slot}` placeholders.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(transparent)]
pub struct PromptTemplate(String);

#[derive(Debug, Clone, PartialEq, Eq)]
enum Piece<'a> {
    Text(&'a str),
    Slot(&'a str),
}

impl PromptTemplate {
    pub fn new(text: impl Into<String>) -> Self {
        PromptTemplate(text.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    fn pieces(&self) -> Vec<Piece<'_>> {
        let mut out = Vec::new();
        let mut rest = self.0.as_str();
        while let Some(open) = rest.find('{') {
            match rest[open..].find('}') {
                Some(len) => {
                    if open > 0 {
                        out.push(Piece::Text(&rest[..open]));
                    }
                    out.push(Piece::Slot(&rest[open + 1..open + len]));
                    rest = &rest[open + len + 1..];
                }
                None => break,
            }
        }
        if !rest.is_empty() {
            out.push(Piece::Text(rest));
        }
        out
    }

    /// Slot names referenced by placeholders, in order of appearance.
    pub fn placeholders(&self) -> Vec<&str> {
        self.pieces()
            .into_iter()
            .filter_map(|p| match p {
                Piece::Slot(s) => Some(s),
                Piece::Text(_) => None,
            })
            .collect()
    }

    /// Substitutes every placeholder. Fails with the first slot `lookup`
    /// cannot resolve.
    pub fn render<'v, F>(&self, mut lookup: F) -> Result<String, String>
    where
        F: FnMut(&str) -> Option<&'v str>,
    {
        let mut out = String::with_capacity(self.0.len());
        for piece in self.pieces() {
            match piece {
                Piece::Text(t) => out.push_str(t),
                Piece::Slot(s) => out.push_str(lookup(s).ok_or_else(|| s.to_string())?),
            }
        }
        Ok(out)
    }
}

impl Stage {
    pub fn name(&self) -> &str {
        match self {
            Stage::Block { name, .. } | Stage::MixedForm { name, .. } | Stage::Confirm { name, .. } => name,
        }
    }

    /// Slot declarations owned by this stage.
    pub fn slot_decls(&self) -> Vec<&SlotDecl> {
        match self {
            Stage::Block { .. } => Vec::new(),
            Stage::MixedForm { slots, .. } => slots.iter().collect(),
            Stage::Confirm { slot, .. } => vec![slot],
        }
    }
}

impl DialogScript {
    /// Declared slots in document order, including those already bound.
    pub fn declared_slots(&self) -> Vec<&str> {
        self.bound
            .iter()
            .map(String::as_str)
            .chain(self.stages.iter().flat_map(|s| s.slot_decls()).map(|d| d.name.as_str()))
            .collect()
    }

    pub fn is_declared(&self, slot: &str) -> bool {
        self.bound.contains(slot) || self.stages.iter().flat_map(|s| s.slot_decls()).any(|d| d.name == slot)
    }

    pub fn stage(&self, name: &str) -> Option<&Stage> {
        self.stages.iter().find(|s| s.name() == name)
    }

    /// Every prompt template in the script, in document order.
    pub fn prompts(&self) -> Vec<&PromptTemplate> {
        self.stages.iter().flat_map(|s| s.slot_decls()).map(|d| &d.prompt).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum Issue {
    NoStages,
    DuplicateStage(String),
    DuplicateSlot(String),
    EmptyForm(String),
    EmptyBlock(String),
    EmptyPrompt(String),
    UnknownSlot(String),
    /// A placeholder names a slot that is not filled by an earlier stage.
    PlaceholderNotFilled { stage: String, slot: String },
    NoBranches(String),
    DuplicateBranch { stage: String, value: String },
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Issue::NoStages => write!(f, "script has no stages"),
            Issue::DuplicateStage(s) => write!(f, "duplicate stage {s}"),
            Issue::DuplicateSlot(s) => write!(f, "duplicate slot {s}"),
            Issue::EmptyForm(s) => write!(f, "form {s} declares no slots"),
            Issue::EmptyBlock(s) => write!(f, "greeting {s} has no messages"),
            Issue::EmptyPrompt(s) => write!(f, "slot {s} has an empty prompt"),
            Issue::UnknownSlot(s) => write!(f, "undeclared slot {s}"),
            Issue::PlaceholderNotFilled { stage, slot } => {
                write!(f, "prompt in stage {stage} uses {{{slot}}} before it can be filled")
            }
            Issue::NoBranches(s) => write!(f, "confirm {s} has no branches"),
            Issue::DuplicateBranch { stage, value } => write!(f, "confirm {stage} repeats branch {value}"),
        }
    }
}

/// Checks every script invariant. An empty result means the script is valid.
pub fn validate(script: &DialogScript) -> Vec<Issue> {
    let mut issues = Vec::new();
    // A fully specialized residual keeps its `bound` set and nothing else.
    if script.stages.is_empty() && script.bound.is_empty() {
        issues.push(Issue::NoStages);
    }

    let mut stage_names = HashSet::new();
    let mut slots: HashSet<&str> = script.bound.iter().map(String::as_str).collect();
    for stage in &script.stages {
        if !stage_names.insert(stage.name()) {
            issues.push(Issue::DuplicateStage(stage.name().to_string()));
        }
        for decl in stage.slot_decls() {
            if !slots.insert(&decl.name) {
                issues.push(Issue::DuplicateSlot(decl.name.clone()));
            }
            if decl.prompt.as_str().trim().is_empty() {
                issues.push(Issue::EmptyPrompt(decl.name.clone()));
            }
        }
        match stage {
            Stage::Block { name, messages } if messages.is_empty() => {
                issues.push(Issue::EmptyBlock(name.clone()))
            }
            Stage::MixedForm { name, slots, .. } if slots.is_empty() => {
                issues.push(Issue::EmptyForm(name.clone()))
            }
            Stage::Confirm { name, branches, .. } => {
                if branches.is_empty() {
                    issues.push(Issue::NoBranches(name.clone()));
                }
                let mut seen = HashSet::new();
                for b in branches {
                    if !seen.insert(&b.value) {
                        issues.push(Issue::DuplicateBranch { stage: name.clone(), value: b.value.clone() });
                    }
                }
            }
            _ => {}
        }
    }

    // Placeholders may only name slots bound up front or declared by an
    // earlier stage; clear lists may name any declared slot.
    let mut filled_before: HashSet<&str> = script.bound.iter().map(String::as_str).collect();
    for stage in &script.stages {
        for decl in stage.slot_decls() {
            for slot in decl.prompt.placeholders() {
                if !slots.contains(slot) {
                    issues.push(Issue::UnknownSlot(slot.to_string()));
                } else if !filled_before.contains(slot) {
                    issues.push(Issue::PlaceholderNotFilled {
                        stage: stage.name().to_string(),
                        slot: slot.to_string(),
                    });
                }
            }
        }
        if let Stage::Confirm { branches, .. } = stage {
            for action in branches.iter().flat_map(|b| &b.actions) {
                if let Action::ClearSlots(names) = action {
                    for n in names.iter().filter(|n| !slots.contains(n.as_str())) {
                        issues.push(Issue::UnknownSlot(n.clone()));
                    }
                }
            }
        }
        for decl in stage.slot_decls() {
            filled_before.insert(&decl.name);
        }
    }
    issues
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScriptError {
    #[error("{line}:{col}: {message}")]
    Syntax { line: usize, col: usize, message: String },
    #[error("{}", join_issues(.0))]
    Invalid(Vec<Issue>),
}

fn join_issues(issues: &[Issue]) -> String {
    issues.iter().map(Issue::to_string).collect::<Vec<_>>().join("; ")
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Str(String),
    LBrace,
    RBrace,
    Semi,
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Str(s) => write!(f, "string {s:?}"),
            Tok::LBrace => write!(f, "`{{`"),
            Tok::RBrace => write!(f, "`}}`"),
            Tok::Semi => write!(f, "`;`"),
            Tok::Eof => write!(f, "end of input"),
        }
    }
}

const KEYWORDS: &[&str] = &["dialog", "bound", "greet", "form", "grammar", "slot", "prompt", "confirm", "on", "clear", "say"];

fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '-'
}

fn lex(src: &str) -> Result<Vec<(Tok, usize, usize)>, ScriptError> {
    let mut toks = Vec::new();
    let mut chars = src.chars().peekable();
    let (mut line, mut col) = (1, 1);

    macro_rules! bump {
        () => {{
            let c = chars.next();
            if c == Some('\n') {
                line += 1;
                col = 1;
            } else if c.is_some() {
                col += 1;
            }
            c
        }};
    }

    while let Some(&c) = chars.peek() {
        let (tl, tc) = (line, col);
        if c.is_whitespace() {
            bump!();
        } else if c == '#' {
            while let Some(&c) = chars.peek() {
                if c == '\n' {
                    break;
                }
                bump!();
            }
        } else if c == '{' {
            bump!();
            toks.push((Tok::LBrace, tl, tc));
        } else if c == '}' {
            bump!();
            toks.push((Tok::RBrace, tl, tc));
        } else if c == ';' {
            bump!();
            toks.push((Tok::Semi, tl, tc));
        } else if c == '"' {
            bump!();
            let mut s = String::new();
            loop {
                match bump!() {
                    Some('"') => break,
                    Some('\\') => match bump!() {
                        Some('"') => s.push('"'),
                        Some('\\') => s.push('\\'),
                        Some('n') => s.push('\n'),
                        other => {
                            return Err(ScriptError::Syntax {
                                line,
                                col,
                                message: format!("invalid escape {other:?}"),
                            })
                        }
                    },
                    Some(c) => s.push(c),
                    None => {
                        return Err(ScriptError::Syntax { line: tl, col: tc, message: "unterminated string".into() })
                    }
                }
            }
            toks.push((Tok::Str(s), tl, tc));
        } else if is_ident_start(c) {
            let mut s = String::new();
            while let Some(&c) = chars.peek() {
                if !is_ident_char(c) {
                    break;
                }
                s.push(c);
                bump!();
            }
            toks.push((Tok::Ident(s), tl, tc));
        } else {
            return Err(ScriptError::Syntax { line: tl, col: tc, message: format!("unexpected character {c:?}") });
        }
    }
    toks.push((Tok::Eof, line, col));
    Ok(toks)
}

struct Parser {
    toks: Vec<(Tok, usize, usize)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn next(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, message: String) -> ScriptError {
        let (_, line, col) = self.toks[self.pos];
        ScriptError::Syntax { line, col, message }
    }

    fn at_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn keyword(&mut self, kw: &str) -> Result<(), ScriptError> {
        if self.at_keyword(kw) {
            self.next();
            Ok(())
        } else {
            Err(self.error(format!("expected `{kw}`, found {}", self.peek())))
        }
    }

    fn ident(&mut self) -> Result<String, ScriptError> {
        match self.peek() {
            Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()) => {
                let s = s.clone();
                self.next();
                Ok(s)
            }
            other => Err(self.error(format!("expected identifier, found {other}"))),
        }
    }

    fn string(&mut self) -> Result<String, ScriptError> {
        match self.peek() {
            Tok::Str(s) => {
                let s = s.clone();
                self.next();
                Ok(s)
            }
            other => Err(self.error(format!("expected string, found {other}"))),
        }
    }

    fn expect(&mut self, tok: Tok) -> Result<(), ScriptError> {
        if *self.peek() == tok {
            self.next();
            Ok(())
        } else {
            Err(self.error(format!("expected {tok}, found {}", self.peek())))
        }
    }

    fn is_plain_ident(&self) -> bool {
        matches!(self.peek(), Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()))
    }

    fn script(&mut self) -> Result<DialogScript, ScriptError> {
        self.keyword("dialog")?;
        let name = self.ident()?;
        self.expect(Tok::LBrace)?;
        let mut bound = BTreeSet::new();
        if self.at_keyword("bound") {
            self.next();
            loop {
                bound.insert(self.ident()?);
                if *self.peek() == Tok::Semi {
                    self.next();
                    break;
                }
            }
        }
        let mut stages = Vec::new();
        let mut greet_count = 0;
        loop {
            match self.peek() {
                Tok::RBrace => {
                    self.next();
                    break;
                }
                Tok::Ident(kw) if kw == "greet" => {
                    self.next();
                    greet_count += 1;
                    let name = if self.is_plain_ident() { self.ident()? } else { format!("greet{greet_count}") };
                    let mut messages = vec![self.string()?];
                    while let Tok::Str(_) = self.peek() {
                        messages.push(self.string()?);
                    }
                    stages.push(Stage::Block { name, messages });
                }
                Tok::Ident(kw) if kw == "form" => {
                    self.next();
                    let name = self.ident()?;
                    self.keyword("grammar")?;
                    let grammar = self.string()?;
                    self.expect(Tok::LBrace)?;
                    let mut slots = vec![self.slot_decl()?];
                    while self.at_keyword("slot") {
                        slots.push(self.slot_decl()?);
                    }
                    self.expect(Tok::RBrace)?;
                    stages.push(Stage::MixedForm { name, grammar, slots });
                }
                Tok::Ident(kw) if kw == "confirm" => {
                    self.next();
                    let name = self.ident()?;
                    self.keyword("prompt")?;
                    let prompt = PromptTemplate::new(self.string()?);
                    let mut branches = vec![self.branch()?];
                    while self.at_keyword("on") {
                        branches.push(self.branch()?);
                    }
                    stages.push(Stage::Confirm { slot: SlotDecl { name: name.clone(), prompt }, name, branches });
                }
                other => return Err(self.error(format!("expected stage or `}}`, found {other}"))),
            }
        }
        if stages.is_empty() && bound.is_empty() {
            return Err(self.error("dialog needs at least one stage".into()));
        }
        if *self.peek() != Tok::Eof {
            return Err(self.error(format!("unexpected {} after dialog", self.peek())));
        }
        Ok(DialogScript { name, bound, stages })
    }

    fn slot_decl(&mut self) -> Result<SlotDecl, ScriptError> {
        self.keyword("slot")?;
        let name = self.ident()?;
        self.keyword("prompt")?;
        let prompt = PromptTemplate::new(self.string()?);
        Ok(SlotDecl { name, prompt })
    }

    fn branch(&mut self) -> Result<Branch, ScriptError> {
        self.keyword("on")?;
        let value = self.ident()?;
        self.expect(Tok::LBrace)?;
        let mut actions = Vec::new();
        loop {
            if *self.peek() == Tok::RBrace {
                self.next();
                break;
            }
            if self.at_keyword("clear") {
                self.next();
                let mut names = vec![self.ident()?];
                while *self.peek() != Tok::Semi {
                    names.push(self.ident()?);
                }
                self.next();
                actions.push(Action::ClearSlots(names));
            } else if self.at_keyword("say") {
                self.next();
                let text = self.string()?;
                self.expect(Tok::Semi)?;
                actions.push(Action::Say(text));
            } else {
                return Err(self.error(format!("expected `clear`, `say` or `}}`, found {}", self.peek())));
            }
        }
        Ok(Branch { value, actions })
    }
}

/// Parses and validates DSL source.
pub fn parse_script(src: &str) -> Result<DialogScript, ScriptError> {
    let mut parser = Parser { toks: lex(src)?, pos: 0 };
    let script = parser.script()?;
    let issues = validate(&script);
    if issues.is_empty() {
        Ok(script)
    } else {
        Err(ScriptError::Invalid(issues))
    }
}

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

/// Canonical text form. Whitespace and comments of the source are not
/// preserved, so two scripts that differ only in layout render identically.
pub fn render_script(script: &DialogScript) -> String {
    use std::fmt::Write;

    let mut out = String::new();
    let _ = writeln!(out, "dialog {} {{", script.name);
    if !script.bound.is_empty() {
        let names: Vec<_> = script.bound.iter().map(String::as_str).collect();
        let _ = writeln!(out, "  bound {};", names.join(" "));
    }
    for stage in &script.stages {
        match stage {
            Stage::Block { name, messages } => {
                let _ = writeln!(out, "  greet {name}");
                for m in messages {
                    let _ = writeln!(out, "    {}", quote(m));
                }
            }
            Stage::MixedForm { name, grammar, slots } => {
                let _ = writeln!(out, "  form {name} grammar {} {{", quote(grammar));
                for s in slots {
                    let _ = writeln!(out, "    slot {} prompt {}", s.name, quote(s.prompt.as_str()));
                }
                let _ = writeln!(out, "  }}");
            }
            Stage::Confirm { name, slot, branches } => {
                let _ = writeln!(out, "  confirm {name}");
                let _ = writeln!(out, "    prompt {}", quote(slot.prompt.as_str()));
                for b in branches {
                    let _ = writeln!(out, "    on {} {{", b.value);
                    for a in &b.actions {
                        match a {
                            Action::ClearSlots(names) => {
                                let _ = writeln!(out, "      clear {};", names.join(" "));
                            }
                            Action::Say(text) => {
                                let _ = writeln!(out, "      say {};", quote(text));
                            }
                        }
                    }
                    let _ = writeln!(out, "    }}");
                }
            }
        }
    }
    out.push_str("}\n");
    out
}
