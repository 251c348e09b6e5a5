//! Transcripts: the ordered record of one agent run, serialized one JSON
//! file per run.

use crate::query::Dialect;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Single,
    Iter,
    Plan,
    PlanNoReplan,
}

impl Strategy {
    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Single => "single",
            Strategy::Iter => "iter",
            Strategy::Plan => "plan",
            Strategy::PlanNoReplan => "plan_no_replan",
        }
    }

    pub fn is_plan(self) -> bool {
        matches!(self, Strategy::Plan | Strategy::PlanNoReplan)
    }
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StepTag {
    Plan,
    Thought,
    Action,
    Observation,
    Replan,
    FinalAnswer,
}

/// Details of an executed (or attempted) query on an Action step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryRecord {
    pub dialect: Dialect,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub tag: StepTag,
    /// Plan/Thought/Replan text, observation text, final answer, or the
    /// query text for Action steps.
    pub text: String,
    /// Set on Action steps that attempted a query.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub query: Option<QueryRecord>,
    /// Whether the query parsed and executed without error.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ok: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    /// Canonical symbols touched, recorded for successfully executed queries.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub symbols: Option<Vec<String>>,
}

impl Step {
    pub fn plain(tag: StepTag, text: impl Into<String>) -> Step {
        Step {
            tag,
            text: text.into(),
            query: None,
            ok: None,
            error: None,
            symbols: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Answered,
    StepBudget,
    BackendError,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Counts {
    pub retrievals: u32,
    pub successful_retrievals: u32,
    pub replans: u32,
    pub lm_calls: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    pub instance_id: String,
    pub strategy: Strategy,
    pub dialect: Dialect,
    pub steps: Vec<Step>,
    pub termination: Termination,
    pub final_answer: Option<String>,
    pub counts: Counts,
}

impl Transcript {
    pub fn tag_sequence(&self) -> Vec<StepTag> {
        self.steps.iter().map(|s| s.tag).collect()
    }

    pub fn to_json(&self) -> String {
        let mut out = serde_json::to_string_pretty(self).expect("transcript serializes");
        out.push('\n');
        out
    }

    pub fn from_json(text: &str) -> Result<Transcript, serde_json::Error> {
        serde_json::from_str(text)
    }
}

/// Check a step-tag sequence against the strategy's grammar:
///
/// - single: `Action? FinalAnswer?`
/// - iter:   `(Thought Action Observation)* FinalAnswer?`
/// - plan:   `Plan (Thought Action Observation | Replan)* FinalAnswer?`
///
/// A FinalAnswer appears exactly when the run terminated with an answer. A
/// run aborted before recording anything (for a plan strategy, a backend
/// failing to produce the initial plan) leaves an empty — vacuously
/// conformant — sequence.
pub fn conforms_to_grammar(strategy: Strategy, tags: &[StepTag]) -> bool {
    if tags.is_empty() {
        return true;
    }
    let mut i = 0;
    let n = tags.len();
    let eat = |i: &mut usize, tag: StepTag| {
        if *i < n && tags[*i] == tag {
            *i += 1;
            true
        } else {
            false
        }
    };
    match strategy {
        Strategy::Single => {
            eat(&mut i, StepTag::Action);
            eat(&mut i, StepTag::FinalAnswer);
            i == n
        }
        Strategy::Iter | Strategy::Plan | Strategy::PlanNoReplan => {
            if strategy.is_plan() && !eat(&mut i, StepTag::Plan) {
                return false;
            }
            loop {
                if eat(&mut i, StepTag::Thought) {
                    if !eat(&mut i, StepTag::Action) || !eat(&mut i, StepTag::Observation) {
                        return false;
                    }
                    continue;
                }
                if strategy.is_plan() && eat(&mut i, StepTag::Replan) {
                    continue;
                }
                break;
            }
            eat(&mut i, StepTag::FinalAnswer);
            i == n
        }
    }
}
