use efpi::engine::TraceStep;
use efpi::fragments::Quantifier;
use serde::{Deserialize, Serialize};
use serde_json::Value;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub round: usize,
    pub quantifier: String,
    pub variable: String,
    pub quest: String,
    pub response: String,
}

pub fn quantifier_name(q: Quantifier) -> &'static str {
    match q {
        Quantifier::Exists => "exists",
        Quantifier::Forall => "forall",
        Quantifier::NotExists => "not_exists",
        Quantifier::NotForall => "not_forall",
    }
}

pub fn trace_entries(trace: &[TraceStep]) -> Vec<TraceEntry> {
    trace
        .iter()
        .enumerate()
        .map(|(i, s)| TraceEntry {
            round: i + 1,
            quantifier: quantifier_name(s.quantifier).to_string(),
            variable: s.var.to_string(),
            quest: s.quest.to_string(),
            response: s.response.to_string(),
        })
        .collect()
}

/// The part of a run that is replayed from the cache.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub verdict: Value,
    pub trace: Vec<TraceEntry>,
    pub exit: i32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub command: String,
    pub inputs: Value,
    pub params: Value,
    pub verdict: Value,
    pub trace: Vec<TraceEntry>,
    pub timing_ms: u64,
    pub version: String,
}

impl RunRecord {
    pub fn new(command: &str, inputs: Value, params: Value, outcome: &Outcome, timing_ms: u64) -> Self {
        RunRecord {
            command: command.to_string(),
            inputs,
            params,
            verdict: outcome.verdict.clone(),
            trace: outcome.trace.clone(),
            timing_ms,
            version: VERSION.to_string(),
        }
    }
}
