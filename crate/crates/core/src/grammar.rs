//! Form-level grammars in a JSGF subset.
//!
//! Supported: `#JSGF` header, `grammar NAME;`, `public <r> = ...;`,
//! `<r> = ...;` and bare `r = ...;` rule definitions, alternation `|`,
//! grouping `( )`, optionals `[ ]`, kleene `*`, and slot tags
//! `{this.NAME=$}` directly after a rule reference. Weights, imports,
//! kleene `+` and recursive rules are rejected.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::ops::Range;

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum RuleExpr {
    Alt(Vec<RuleExpr>),
    Seq(Vec<RuleExpr>),
    Opt(Box<RuleExpr>),
    Star(Box<RuleExpr>),
    NonTerm { rule: String, tag: Option<String> },
    Terminal(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Grammar {
    pub name: String,
    pub rules: BTreeMap<String, RuleExpr>,
    pub public_rule: String,
    /// Tagged slots in order of first appearance, each with its finite
    /// vocabulary as token sequences in derivation order.
    vocabulary: Vec<(String, Vec<Vec<String>>)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SlotFill {
    pub slot: String,
    /// Matched terminal tokens joined by single spaces.
    pub value: String,
    /// The matched stretch of the utterance as written, lowercased, with
    /// inner punctuation such as hyphens kept.
    pub surface: String,
    /// Token index range in the utterance.
    pub span: Range<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum MatchMode {
    /// The whole utterance must derive from the public rule.
    Strict,
    /// Pick out slot phrases anywhere, skipping everything else.
    #[default]
    Spot,
}

/// What to do when one slot receives more than one value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum ConflictPolicy {
    FirstWins,
    #[default]
    LastWins,
    Reject,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct MatchConfig {
    pub mode: MatchMode,
    pub conflict: ConflictPolicy,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GrammarError {
    #[error("missing #JSGF header")]
    MissingHeader,
    #[error("{line}:{col}: {message}")]
    Syntax { line: usize, col: usize, message: String },
    #[error("undefined rule <{0}>")]
    UndefinedRule(String),
    #[error("rule <{0}> is defined twice")]
    DuplicateRule(String),
    #[error("recursive rule <{0}>")]
    RecursiveRule(String),
    #[error("no public rule")]
    MissingPublicRule,
    #[error("slot {0} has an unbounded vocabulary")]
    UnboundedSlot(String),
    #[error("unknown slot {0}")]
    UnknownSlot(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize)]
pub enum MatchError {
    #[error("no match")]
    NoMatch,
    #[error("conflicting values for slot {0}")]
    Conflict(String),
}

/// A lowercased utterance token with its byte range in the original text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub text: String,
    pub start: usize,
    pub end: usize,
}

fn is_separator(c: char) -> bool {
    c.is_whitespace() || matches!(c, '.' | ',' | '!' | '?' | ';' | ':' | '-' | '\u{2010}'..='\u{2015}' | '"' | '\u{201c}' | '\u{201d}')
}

fn is_apostrophe(c: char) -> bool {
    c == '\'' || c == '\u{2019}' || c == '\u{2018}'
}

/// Splits an utterance into lowercase word tokens. Sentence punctuation,
/// hyphens and double quotes separate words; apostrophes are kept inside a
/// word ("i'd") and stripped at its edges.
pub fn tokenize(text: &str) -> Vec<Token> {
    let mut out = Vec::new();
    let mut start = None;
    let push = |s: usize, e: usize, out: &mut Vec<Token>| {
        let piece = &text[s..e];
        let trimmed = piece.trim_start_matches(is_apostrophe);
        let s = s + (piece.len() - trimmed.len());
        let trimmed = trimmed.trim_end_matches(is_apostrophe);
        let e = s + trimmed.len();
        if s < e {
            let word = trimmed.to_lowercase().replace(['\u{2019}', '\u{2018}'], "'");
            out.push(Token { text: word, start: s, end: e });
        }
    };
    for (i, c) in text.char_indices() {
        if is_separator(c) {
            if let Some(s) = start.take() {
                push(s, i, &mut out);
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        push(s, text.len(), &mut out);
    }
    out
}

fn surface(text: &str, tokens: &[Token], span: &Range<usize>) -> String {
    let raw = &text[tokens[span.start].start..tokens[span.end - 1].end];
    raw.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

/// Collapses repeated fills of one slot. Output keeps utterance order.
pub fn collapse(fills: Vec<SlotFill>, policy: ConflictPolicy) -> Result<Vec<SlotFill>, MatchError> {
    let mut keep: HashMap<&str, usize> = HashMap::new();
    for (i, f) in fills.iter().enumerate() {
        match keep.get(f.slot.as_str()) {
            None => {
                keep.insert(&f.slot, i);
            }
            Some(_) => match policy {
                ConflictPolicy::FirstWins => {}
                ConflictPolicy::LastWins => {
                    keep.insert(&f.slot, i);
                }
                ConflictPolicy::Reject => return Err(MatchError::Conflict(f.slot.clone())),
            },
        }
    }
    let chosen: BTreeSet<usize> = keep.into_values().collect();
    Ok(fills.into_iter().enumerate().filter(|(i, _)| chosen.contains(i)).map(|(_, f)| f).collect())
}

/// End position of a partial parse and the tagged spans it produced.
type Derivation = (usize, Vec<(String, Range<usize>)>);

impl Grammar {
    /// Slot names carried by tags, in order of first appearance.
    pub fn tagged_slots(&self) -> impl Iterator<Item = &str> {
        self.vocabulary.iter().map(|(s, _)| s.as_str())
    }

    /// Every terminal string the slot's rule derives, in derivation order.
    pub fn slot_terminals(&self, slot: &str) -> Result<Vec<String>, GrammarError> {
        self.vocabulary
            .iter()
            .find(|(s, _)| s == slot)
            .map(|(_, v)| v.iter().map(|w| w.join(" ")).collect())
            .ok_or_else(|| GrammarError::UnknownSlot(slot.to_string()))
    }

    pub fn slot_vocabulary(&self, slot: &str) -> Result<BTreeSet<String>, GrammarError> {
        Ok(self.slot_terminals(slot)?.into_iter().collect())
    }

    /// Every word occurring in any slot terminal.
    pub fn vocabulary_words(&self) -> BTreeSet<&str> {
        self.vocabulary.iter().flat_map(|(_, v)| v.iter().flatten()).map(String::as_str).collect()
    }

    pub fn match_utterance(&self, utterance: &str, config: MatchConfig) -> Result<Vec<SlotFill>, MatchError> {
        let tokens = tokenize(utterance);
        let words: Vec<&str> = tokens.iter().map(|t| t.text.as_str()).collect();
        let raw = match config.mode {
            MatchMode::Strict => self.strict(&words),
            MatchMode::Spot => self.spot(&words),
        };
        let mut fills: Vec<SlotFill> = raw
            .into_iter()
            .map(|(slot, span)| SlotFill {
                value: words[span.clone()].join(" "),
                surface: surface(utterance, &tokens, &span),
                slot,
                span,
            })
            .collect();
        if fills.is_empty() {
            return Err(MatchError::NoMatch);
        }
        fills.sort_by_key(|f| f.span.start);
        collapse(fills, config.conflict)
    }

    fn spot(&self, words: &[&str]) -> Vec<(String, Range<usize>)> {
        let mut out = Vec::new();
        let mut pos = 0;
        while pos < words.len() {
            let mut best: Option<(&str, usize)> = None;
            for (slot, terms) in &self.vocabulary {
                for term in terms {
                    let fits = term.len() <= words.len() - pos && term.iter().zip(&words[pos..]).all(|(a, b)| a == b);
                    if fits && best.is_none_or(|(_, len)| term.len() > len) {
                        best = Some((slot, term.len()));
                    }
                }
            }
            match best {
                Some((slot, len)) => {
                    out.push((slot.to_string(), pos..pos + len));
                    pos += len;
                }
                None => pos += 1,
            }
        }
        out
    }

    fn strict(&self, words: &[&str]) -> Vec<(String, Range<usize>)> {
        let public = &self.rules[&self.public_rule];
        self.derive(public, words, 0)
            .into_iter()
            .find(|(end, _)| *end == words.len())
            .map(|(_, fills)| fills)
            .unwrap_or_default()
    }

    /// All ways `expr` can match a prefix of `words[pos..]`, as end
    /// positions paired with the tagged spans of that derivation.
    fn derive(&self, expr: &RuleExpr, words: &[&str], pos: usize) -> Vec<Derivation> {
        match expr {
            RuleExpr::Terminal(t) => {
                let fits = t.len() <= words.len() - pos && t.iter().zip(&words[pos..]).all(|(a, b)| a == b);
                if fits {
                    vec![(pos + t.len(), Vec::new())]
                } else {
                    Vec::new()
                }
            }
            RuleExpr::NonTerm { rule, tag } => {
                let mut results = self.derive(&self.rules[rule], words, pos);
                if let Some(slot) = tag {
                    for (end, fills) in &mut results {
                        if *end > pos {
                            fills.push((slot.clone(), pos..*end));
                        }
                    }
                }
                results
            }
            RuleExpr::Seq(items) => {
                let mut states = vec![(pos, Vec::new())];
                for item in items {
                    let mut next = Vec::new();
                    for (p, fills) in states {
                        for (end, more) in self.derive(item, words, p) {
                            let mut f = fills.clone();
                            f.extend(more);
                            next.push((end, f));
                        }
                    }
                    states = next;
                    if states.is_empty() {
                        break;
                    }
                }
                states
            }
            RuleExpr::Alt(alts) => alts.iter().flat_map(|a| self.derive(a, words, pos)).collect(),
            RuleExpr::Opt(inner) => {
                let mut out = self.derive(inner, words, pos);
                out.push((pos, Vec::new()));
                out
            }
            RuleExpr::Star(inner) => {
                let mut all = vec![(pos, Vec::new())];
                let mut frontier = all.clone();
                while !frontier.is_empty() {
                    let mut next = Vec::new();
                    for (p, fills) in &frontier {
                        for (end, more) in self.derive(inner, words, *p) {
                            if end <= *p {
                                continue;
                            }
                            let mut f = fills.clone();
                            f.extend(more);
                            let state = (end, f);
                            if !all.contains(&state) && !next.contains(&state) {
                                next.push(state);
                            }
                        }
                    }
                    all.extend(next.iter().cloned());
                    frontier = next;
                }
                // Longest repetitions first, so a full-length derivation is
                // found before the empty one.
                all.reverse();
                all
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    RuleRef(String),
    Word(String),
    Tag(String),
    LBracket,
    RBracket,
    LParen,
    RParen,
    Bar,
    Star,
    Equals,
    Semi,
    Eof,
}

fn describe(tok: &Tok) -> String {
    match tok {
        Tok::RuleRef(r) => format!("<{r}>"),
        Tok::Word(w) => format!("`{w}`"),
        Tok::Tag(t) => format!("{{{t}}}"),
        Tok::LBracket => "`[`".into(),
        Tok::RBracket => "`]`".into(),
        Tok::LParen => "`(`".into(),
        Tok::RParen => "`)`".into(),
        Tok::Bar => "`|`".into(),
        Tok::Star => "`*`".into(),
        Tok::Equals => "`=`".into(),
        Tok::Semi => "`;`".into(),
        Tok::Eof => "end of input".into(),
    }
}

fn lex(src: &str) -> Result<Vec<(Tok, usize, usize)>, GrammarError> {
    let mut out = Vec::new();
    let chars: Vec<char> = src.chars().collect();
    let (mut i, mut line, mut col) = (0, 1, 1);

    let syntax = |line, col, message: String| GrammarError::Syntax { line, col, message };

    // Header: `#JSGF ...;` before anything else.
    let lead = src.len() - src.trim_start().len();
    if !src[lead..].starts_with("#JSGF") {
        return Err(GrammarError::MissingHeader);
    }
    while i < chars.len() && chars[i] != ';' {
        if chars[i] == '\n' {
            line += 1;
            col = 1;
        } else {
            col += 1;
        }
        i += 1;
    }
    if i == chars.len() {
        return Err(syntax(line, col, "unterminated #JSGF header".into()));
    }
    i += 1;
    col += 1;

    while i < chars.len() {
        let c = chars[i];
        let (tl, tc) = (line, col);
        let advance = |n: usize, i: &mut usize, line: &mut usize, col: &mut usize| {
            for _ in 0..n {
                if chars[*i] == '\n' {
                    *line += 1;
                    *col = 1;
                } else {
                    *col += 1;
                }
                *i += 1;
            }
        };
        if c.is_whitespace() {
            advance(1, &mut i, &mut line, &mut col);
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'/') {
            while i < chars.len() && chars[i] != '\n' {
                advance(1, &mut i, &mut line, &mut col);
            }
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'*') {
            advance(2, &mut i, &mut line, &mut col);
            while i < chars.len() && !(chars[i] == '*' && chars.get(i + 1) == Some(&'/')) {
                advance(1, &mut i, &mut line, &mut col);
            }
            if i >= chars.len() {
                return Err(syntax(tl, tc, "unterminated comment".into()));
            }
            advance(2, &mut i, &mut line, &mut col);
            continue;
        }
        let simple = match c {
            '[' => Some(Tok::LBracket),
            ']' => Some(Tok::RBracket),
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            '|' => Some(Tok::Bar),
            '*' => Some(Tok::Star),
            '=' => Some(Tok::Equals),
            ';' => Some(Tok::Semi),
            _ => None,
        };
        if let Some(tok) = simple {
            out.push((tok, tl, tc));
            advance(1, &mut i, &mut line, &mut col);
            continue;
        }
        match c {
            '<' => {
                let close = chars[i..].iter().position(|&c| c == '>').ok_or_else(|| syntax(tl, tc, "unterminated rule name".into()))?;
                let name: String = chars[i + 1..i + close].iter().collect();
                if name.is_empty() || name.contains(char::is_whitespace) {
                    return Err(syntax(tl, tc, format!("invalid rule name <{name}>")));
                }
                out.push((Tok::RuleRef(name), tl, tc));
                advance(close + 1, &mut i, &mut line, &mut col);
            }
            '{' => {
                let close = chars[i..].iter().position(|&c| c == '}').ok_or_else(|| syntax(tl, tc, "unterminated tag".into()))?;
                let body: String = chars[i + 1..i + close].iter().collect();
                let compact: String = body.chars().filter(|c| !c.is_whitespace()).collect();
                let slot = compact
                    .strip_prefix("this.")
                    .and_then(|s| s.strip_suffix("=$"))
                    .filter(|s| !s.is_empty() && s.chars().all(|c| c.is_alphanumeric() || c == '_'))
                    .ok_or_else(|| syntax(tl, tc, format!("unsupported tag {{{body}}}")))?;
                out.push((Tok::Tag(slot.to_string()), tl, tc));
                advance(close + 1, &mut i, &mut line, &mut col);
            }
            '+' => return Err(syntax(tl, tc, "kleene `+` is not supported".into())),
            '/' => return Err(syntax(tl, tc, "weights are not supported".into())),
            '>' | '}' => return Err(syntax(tl, tc, format!("unexpected {c:?}"))),
            _ => {
                let start = i;
                while i < chars.len() && !chars[i].is_whitespace() && !"<>{}[]()|*=;+/".contains(chars[i]) {
                    i += 1;
                    col += 1;
                }
                let word: String = chars[start..i].iter().collect();
                out.push((Tok::Word(word), tl, tc));
            }
        }
    }
    out.push((Tok::Eof, line, col));
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, usize, usize)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn peek2(&self) -> &Tok {
        &self.toks[(self.pos + 1).min(self.toks.len() - 1)].0
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, message: String) -> GrammarError {
        let (_, line, col) = self.toks[self.pos];
        GrammarError::Syntax { line, col, message }
    }

    fn expect(&mut self, tok: Tok) -> Result<(), GrammarError> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            Err(self.error(format!("expected {}, found {}", describe(&tok), describe(self.peek()))))
        }
    }

    fn alternatives(&mut self) -> Result<RuleExpr, GrammarError> {
        let mut alts = vec![self.sequence()?];
        while *self.peek() == Tok::Bar {
            self.bump();
            alts.push(self.sequence()?);
        }
        Ok(if alts.len() == 1 { alts.pop().unwrap() } else { RuleExpr::Alt(alts) })
    }

    fn sequence(&mut self) -> Result<RuleExpr, GrammarError> {
        let mut items = Vec::new();
        loop {
            let atom = match self.peek().clone() {
                Tok::RuleRef(rule) => {
                    self.bump();
                    let tag = match self.peek().clone() {
                        Tok::Tag(slot) => {
                            self.bump();
                            Some(slot)
                        }
                        _ => None,
                    };
                    RuleExpr::NonTerm { rule, tag }
                }
                Tok::Word(w) => {
                    self.bump();
                    RuleExpr::Terminal(vec![w])
                }
                Tok::LBracket => {
                    self.bump();
                    let inner = self.alternatives()?;
                    self.expect(Tok::RBracket)?;
                    RuleExpr::Opt(Box::new(inner))
                }
                Tok::LParen => {
                    self.bump();
                    let inner = self.alternatives()?;
                    self.expect(Tok::RParen)?;
                    inner
                }
                Tok::Tag(_) => return Err(self.error("a tag must directly follow a rule reference".into())),
                other => {
                    if items.is_empty() {
                        return Err(self.error(format!("expected an expansion, found {}", describe(&other))));
                    }
                    break;
                }
            };
            let atom = if *self.peek() == Tok::Star {
                self.bump();
                RuleExpr::Star(Box::new(atom))
            } else {
                atom
            };
            if let Tok::Tag(_) = self.peek() {
                return Err(self.error("a tag must directly follow a rule reference".into()));
            }
            items.push(atom);
        }
        Ok(if items.len() == 1 { items.pop().unwrap() } else { RuleExpr::Seq(items) })
    }
}

/// Replaces single words naming a bare-defined rule with references, then
/// merges runs of adjacent words into multi-word terminals.
fn resolve(expr: RuleExpr, bare: &BTreeSet<String>) -> RuleExpr {
    match expr {
        RuleExpr::Terminal(words) if words.len() == 1 && bare.contains(&words[0]) => {
            RuleExpr::NonTerm { rule: words.into_iter().next().unwrap(), tag: None }
        }
        RuleExpr::Terminal(words) => RuleExpr::Terminal(words.into_iter().map(|w| w.to_lowercase()).collect()),
        RuleExpr::Alt(alts) => RuleExpr::Alt(alts.into_iter().map(|a| resolve(a, bare)).collect()),
        RuleExpr::Opt(inner) => RuleExpr::Opt(Box::new(resolve(*inner, bare))),
        RuleExpr::Star(inner) => RuleExpr::Star(Box::new(resolve(*inner, bare))),
        RuleExpr::Seq(items) => {
            let mut out: Vec<RuleExpr> = Vec::new();
            for item in items.into_iter().map(|i| resolve(i, bare)) {
                match (out.last_mut(), item) {
                    (Some(RuleExpr::Terminal(prev)), RuleExpr::Terminal(words)) => prev.extend(words),
                    (_, item) => out.push(item),
                }
            }
            if out.len() == 1 {
                out.pop().unwrap()
            } else {
                RuleExpr::Seq(out)
            }
        }
        nt @ RuleExpr::NonTerm { .. } => nt,
    }
}

fn references<'a>(expr: &'a RuleExpr, out: &mut Vec<&'a str>) {
    match expr {
        RuleExpr::NonTerm { rule, .. } => out.push(rule),
        RuleExpr::Alt(xs) | RuleExpr::Seq(xs) => xs.iter().for_each(|x| references(x, out)),
        RuleExpr::Opt(x) | RuleExpr::Star(x) => references(x, out),
        RuleExpr::Terminal(_) => {}
    }
}

fn tags<'a>(expr: &'a RuleExpr, out: &mut Vec<(&'a str, &'a str)>) {
    match expr {
        RuleExpr::NonTerm { rule, tag: Some(slot) } => out.push((slot, rule)),
        RuleExpr::NonTerm { .. } | RuleExpr::Terminal(_) => {}
        RuleExpr::Alt(xs) | RuleExpr::Seq(xs) => xs.iter().for_each(|x| tags(x, out)),
        RuleExpr::Opt(x) | RuleExpr::Star(x) => tags(x, out),
    }
}

fn check_cycles(rules: &BTreeMap<String, RuleExpr>) -> Result<(), GrammarError> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        Active,
        Done,
    }
    fn visit<'a>(
        name: &'a str,
        rules: &'a BTreeMap<String, RuleExpr>,
        marks: &mut HashMap<&'a str, Mark>,
    ) -> Result<(), GrammarError> {
        match marks.get(name) {
            Some(Mark::Done) => return Ok(()),
            Some(Mark::Active) => return Err(GrammarError::RecursiveRule(name.to_string())),
            None => {}
        }
        marks.insert(name, Mark::Active);
        let mut refs = Vec::new();
        references(&rules[name], &mut refs);
        for r in refs {
            visit(r, rules, marks)?;
        }
        marks.insert(name, Mark::Done);
        Ok(())
    }
    let mut marks = HashMap::new();
    for name in rules.keys() {
        visit(name, rules, &mut marks)?;
    }
    Ok(())
}

fn expand(expr: &RuleExpr, rules: &BTreeMap<String, RuleExpr>, slot: &str) -> Result<Vec<Vec<String>>, GrammarError> {
    Ok(match expr {
        RuleExpr::Terminal(words) => vec![words.clone()],
        RuleExpr::NonTerm { rule, .. } => expand(&rules[rule], rules, slot)?,
        RuleExpr::Alt(alts) => {
            let mut out = Vec::new();
            for a in alts {
                out.extend(expand(a, rules, slot)?);
            }
            out
        }
        RuleExpr::Seq(items) => {
            let mut acc = vec![Vec::new()];
            for item in items {
                let parts = expand(item, rules, slot)?;
                acc = acc
                    .iter()
                    .flat_map(|prefix| {
                        parts.iter().map(move |p| {
                            let mut v: Vec<String> = prefix.clone();
                            v.extend(p.iter().cloned());
                            v
                        })
                    })
                    .collect();
            }
            acc
        }
        RuleExpr::Opt(inner) => {
            let mut out = vec![Vec::new()];
            out.extend(expand(inner, rules, slot)?);
            out
        }
        RuleExpr::Star(_) => return Err(GrammarError::UnboundedSlot(slot.to_string())),
    })
}

pub fn parse_grammar(src: &str) -> Result<Grammar, GrammarError> {
    let mut p = Parser { toks: lex(src)?, pos: 0 };

    let mut name = None;
    let mut public_rule = None;
    let mut order: Vec<String> = Vec::new();
    let mut raw: BTreeMap<String, RuleExpr> = BTreeMap::new();
    let mut bare = BTreeSet::new();

    while *p.peek() != Tok::Eof {
        match p.peek().clone() {
            Tok::Word(w) if w == "grammar" && name.is_none() && matches!(p.peek2(), Tok::Word(_)) => {
                p.bump();
                if let Tok::Word(n) = p.bump() {
                    name = Some(n);
                }
                p.expect(Tok::Semi)?;
            }
            tok => {
                let mut public = false;
                let mut head = tok;
                if head == Tok::Word("public".into()) && matches!(p.peek2(), Tok::RuleRef(_)) {
                    p.bump();
                    public = true;
                    head = p.peek().clone();
                }
                let rule = match head {
                    Tok::RuleRef(r) => r,
                    Tok::Word(w) if *p.peek2() == Tok::Equals => {
                        bare.insert(w.clone());
                        w
                    }
                    other => return Err(p.error(format!("expected a rule definition, found {}", describe(&other)))),
                };
                p.bump();
                p.expect(Tok::Equals)?;
                let body = p.alternatives()?;
                p.expect(Tok::Semi)?;
                if raw.contains_key(&rule) {
                    return Err(GrammarError::DuplicateRule(rule));
                }
                if public && public_rule.is_none() {
                    public_rule = Some(rule.clone());
                }
                order.push(rule.clone());
                raw.insert(rule, body);
            }
        }
    }

    let name = name.ok_or_else(|| p.error("missing `grammar NAME;` declaration".into()))?;
    let public_rule = public_rule.ok_or(GrammarError::MissingPublicRule)?;
    let rules: BTreeMap<String, RuleExpr> = raw.into_iter().map(|(k, v)| (k, resolve(v, &bare))).collect();

    for body in rules.values() {
        let mut refs = Vec::new();
        references(body, &mut refs);
        if let Some(missing) = refs.into_iter().find(|r| !rules.contains_key(*r)) {
            return Err(GrammarError::UndefinedRule(missing.to_string()));
        }
    }
    check_cycles(&rules)?;

    let mut vocabulary: Vec<(String, Vec<Vec<String>>)> = Vec::new();
    for rule in &order {
        let mut found = Vec::new();
        tags(&rules[rule], &mut found);
        for (slot, target) in found {
            let mut terms = expand(&rules[target], &rules, slot)?;
            terms.retain(|t| !t.is_empty());
            match vocabulary.iter_mut().find(|(s, _)| s == slot) {
                Some((_, existing)) => {
                    for t in terms {
                        if !existing.contains(&t) {
                            existing.push(t);
                        }
                    }
                }
                None => {
                    let mut unique: Vec<Vec<String>> = Vec::new();
                    for t in terms {
                        if !unique.contains(&t) {
                            unique.push(t);
                        }
                    }
                    vocabulary.push((slot.to_string(), unique));
                }
            }
        }
    }

    Ok(Grammar { name, rules, public_rule, vocabulary })
}
