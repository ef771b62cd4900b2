//! Script and grammar bundles: the embedded pizza ordering bundle, shared by
//! tests, the CLI and the browser demo, plus loading bundles from disk.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::engine::{EngineConfig, EngineError, Session};
use crate::grammar::{parse_grammar, Grammar, GrammarError};
use crate::script::{parse_script, DialogScript, ScriptError, Stage};

pub const PIZZA_SCRIPT: &str = include_str!("../bundles/pizza.dlg");
pub const PIZZA_WORDS_SCRIPT: &str = include_str!("../bundles/pizza-words.dlg");

/// Form-level grammar enumerating every ordering of the three attributes.
pub const SIZE_TOPPING_CRUST: &str = include_str!("../bundles/sizetoppingcrust.gram");
/// Form-level grammar accepting any sequence of attribute words.
pub const SIZE_TOPPING_CRUST_WORDS: &str = include_str!("../bundles/sizetoppingcrust-words.gram");

pub const PIZZA_GRAMMAR_FILE: &str = "sizetoppingcrust.gram";
pub const PIZZA_WORDS_GRAMMAR_FILE: &str = "sizetoppingcrust-words.gram";

#[derive(Debug, Error)]
pub enum BundleError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Script { path: PathBuf, source: ScriptError },
    #[error("{path}: {source}")]
    Grammar { path: PathBuf, source: GrammarError },
    #[error("missing grammar {0}")]
    MissingGrammar(String),
}

/// A script together with the grammars its forms refer to, keyed by the
/// name used in the script.
#[derive(Debug, Clone)]
pub struct Bundle {
    pub script: DialogScript,
    pub grammars: BTreeMap<String, Grammar>,
}

impl Bundle {
    pub fn pizza() -> Self {
        embedded(PIZZA_SCRIPT, PIZZA_GRAMMAR_FILE, SIZE_TOPPING_CRUST)
    }

    pub fn pizza_words() -> Self {
        embedded(PIZZA_WORDS_SCRIPT, PIZZA_WORDS_GRAMMAR_FILE, SIZE_TOPPING_CRUST_WORDS)
    }

    /// The embedded bundles by id.
    pub fn builtin() -> BTreeMap<String, Bundle> {
        BTreeMap::from([("pizza".to_string(), Bundle::pizza()), ("pizza-words".to_string(), Bundle::pizza_words())])
    }

    /// Reads a script and every grammar it names from `grammar_dir`.
    pub fn load(script_path: &Path, grammar_dir: &Path) -> Result<Self, BundleError> {
        let src = read(script_path)?;
        let script = parse_script(&src).map_err(|source| BundleError::Script { path: script_path.into(), source })?;
        let mut grammars = BTreeMap::new();
        for stage in &script.stages {
            if let Stage::MixedForm { grammar, .. } = stage {
                if grammars.contains_key(grammar) {
                    continue;
                }
                let path = grammar_dir.join(grammar);
                if !path.is_file() {
                    return Err(BundleError::MissingGrammar(path.display().to_string()));
                }
                let g = parse_grammar(&read(&path)?).map_err(|source| BundleError::Grammar { path, source })?;
                grammars.insert(grammar.clone(), g);
            }
        }
        Ok(Bundle { script, grammars })
    }

    pub fn session(&self, config: EngineConfig) -> Result<Session, EngineError> {
        Session::new(self.script.clone(), self.grammars.clone(), config)
    }
}

/// Every `.dlg` file in `dir`, keyed by file stem, with grammars looked up
/// in the same directory.
pub fn load_dir(dir: &Path) -> Result<BTreeMap<String, Bundle>, BundleError> {
    let entries = std::fs::read_dir(dir).map_err(|source| BundleError::Io { path: dir.into(), source })?;
    let mut out = BTreeMap::new();
    for entry in entries {
        let path = entry.map_err(|source| BundleError::Io { path: dir.into(), source })?.path();
        if path.extension().is_some_and(|e| e == "dlg") {
            let id = path.file_stem().unwrap_or_default().to_string_lossy().into_owned();
            out.insert(id, Bundle::load(&path, dir)?);
        }
    }
    Ok(out)
}

fn embedded(script: &str, grammar_file: &str, grammar: &str) -> Bundle {
    Bundle {
        script: parse_script(script).expect("embedded script parses"),
        grammars: BTreeMap::from([(grammar_file.to_string(), parse_grammar(grammar).expect("embedded grammar parses"))]),
    }
}

fn read(path: &Path) -> Result<String, BundleError> {
    std::fs::read_to_string(path).map_err(|source| BundleError::Io { path: path.into(), source })
}
