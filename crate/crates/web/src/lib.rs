//! WebAssembly bindings for the static demo page in `www/`.
//!
//! Each export is a thin wrapper over a plain function so the logic can be
//! tested natively.

use std::collections::BTreeMap;

use mixdialog::bundles::Bundle;
use mixdialog::staging::{count_sequences, enumerate_sequences};
use mixdialog::trace::{build_trace, render_indexed, render_notation, NotationOptions};
use mixdialog::{parse_script, render_script, specialize, ConflictPolicy, EngineConfig, Environment, Phase, Session, Turn};
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Residual of `script` after binding `slot=value` lines.
pub fn specialize_text(script: &str, bindings: &str) -> Result<String, String> {
    let script = parse_script(script).map_err(|e| e.to_string())?;
    let mut env = Environment::new();
    for line in bindings.lines().map(str::trim).filter(|l| !l.is_empty()) {
        let (slot, value) = line.split_once('=').ok_or_else(|| format!("expected slot=value, got {line:?}"))?;
        env.push(slot.trim(), value.trim());
    }
    let residual = specialize(&script, &env, ConflictPolicy::LastWins).map_err(|e| e.to_string())?;
    Ok(render_script(&residual))
}

/// Count and listing of staging sequences over `n` slots named `a`, `b`, ...
pub fn staging_listing(n: usize, permutations: bool, limit: usize) -> Result<String, String> {
    if n == 0 || n > 26 {
        return Err("slots must be between 1 and 26".into());
    }
    let count = count_sequences(n, permutations).ok_or("count overflows")?;
    let mut out = format!("{count} sequences\n");
    if n <= 6 {
        let names: Vec<String> = (0..n).map(|i| char::from(b'a' + i as u8).to_string()).collect();
        for seq in enumerate_sequences(&names, permutations).map_err(|e| e.to_string())?.iter().take(limit) {
            out.push_str(&seq.to_string());
            out.push('\n');
        }
    }
    Ok(out)
}

#[derive(Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct View {
    pub phase: Phase,
    pub turns: Vec<String>,
    pub slots: BTreeMap<String, Option<String>>,
    pub residual_script: String,
    pub trace_notation: String,
    pub trace_indexed: String,
}

/// A live dialog over one of the built-in bundles.
#[wasm_bindgen]
pub struct DemoSession {
    session: Session,
}

impl DemoSession {
    pub fn open(bundle_id: &str) -> Result<DemoSession, String> {
        let bundle = Bundle::builtin().remove(bundle_id).ok_or_else(|| format!("unknown bundle {bundle_id}"))?;
        let mut session = bundle.session(EngineConfig::default()).map_err(|e| e.to_string())?;
        session.next_output();
        Ok(DemoSession { session })
    }

    pub fn submit(&mut self, text: &str) -> Result<View, String> {
        self.session.submit_utterance(text).map_err(|e| e.to_string())?;
        self.session.next_output();
        Ok(self.view())
    }

    pub fn view(&self) -> View {
        let s = &self.session;
        let trace = build_trace(s.turn_log(), s.config().greeting_as_response).unwrap_or_default();
        View {
            phase: s.phase(),
            turns: s.turn_log().iter().map(Turn::line).collect(),
            slots: s
                .original()
                .declared_slots()
                .into_iter()
                .map(|slot| (slot.to_string(), s.store().value(slot).map(str::to_string)))
                .collect(),
            residual_script: render_script(s.residual()),
            trace_notation: render_notation(&trace),
            trace_indexed: render_indexed(&trace, NotationOptions::default()),
        }
    }
}

fn to_json(view: &View) -> String {
    serde_json::to_string(view).unwrap_or_default()
}

#[wasm_bindgen]
impl DemoSession {
    #[wasm_bindgen(constructor)]
    pub fn new(bundle_id: &str) -> Result<DemoSession, JsError> {
        DemoSession::open(bundle_id).map_err(|e| JsError::new(&e))
    }

    /// Submits a caller line and returns the new view as JSON.
    pub fn say(&mut self, text: &str) -> Result<String, JsError> {
        self.submit(text).map(|v| to_json(&v)).map_err(|e| JsError::new(&e))
    }

    #[wasm_bindgen(js_name = viewJson)]
    pub fn view_json(&self) -> String {
        to_json(&self.view())
    }

    #[wasm_bindgen(js_name = originalScript)]
    pub fn original_script(&self) -> String {
        render_script(self.session.original())
    }
}

#[wasm_bindgen(js_name = specializeScript)]
pub fn specialize_script(script: &str, bindings: &str) -> Result<String, JsError> {
    specialize_text(script, bindings).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = stagingSequences)]
pub fn staging_sequences(n: usize, permutations: bool) -> Result<String, JsError> {
    staging_listing(n, permutations, 500).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = pizzaScript)]
pub fn pizza_script() -> String {
    mixdialog::bundles::PIZZA_SCRIPT.to_string()
}
