//! The decision makers: single-turn (one retrieval, then an answer),
//! iterative (a Thought/Action/Observation loop), and plan-then-retrieve
//! (an initial plan, the same loop, and optional re-planning), all driven
//! over a pluggable LM backend and recorded as transcripts.
//!
//! Runs are single-threaded and strictly ordered; independent instances may
//! run concurrently, each owning its backend session. With a scripted
//! backend a run is bit-reproducible.
//!
//! Failure handling is bounded and deterministic: a malformed completion is
//! re-prompted once and then recorded as a failed step, query errors are fed
//! back verbatim as observations, and no run ever exceeds `max_steps` LM
//! calls.

mod backend;
mod extract;
pub mod prompts;
mod transcript;

pub use backend::{
    BackendError, HttpBackend, LmBackend, Message, PatternRule, Role, ScriptFile, ScriptedBackend,
    ENV_API_KEY, ENV_ENDPOINT, ENV_MODEL, ENV_TIMEOUT_SECS,
};
pub use extract::{extract_action, extract_thought, ExtractedAction};
pub use transcript::{
    conforms_to_grammar, Counts, QueryRecord, Step, StepTag, Strategy, Termination, Transcript,
};

use crate::model::Instance;
use crate::query::{self, Dialect, Schema, Views};

/// Runtime parameters of one agent run.
#[derive(Debug, Clone)]
pub struct AgentConfig {
    pub strategy: Strategy,
    pub dialect: Dialect,
    /// LM-call budget per run.
    pub max_steps: u32,
    /// Observations are truncated at this many characters.
    pub observation_char_cap: usize,
}

impl AgentConfig {
    pub fn new(strategy: Strategy, dialect: Dialect) -> AgentConfig {
        AgentConfig {
            strategy,
            dialect,
            max_steps: 30,
            observation_char_cap: 2000,
        }
    }
}

/// Run one instance with the configured strategy. Transport failures never
/// panic; they terminate the transcript with `backend_error`.
pub fn run(instance: &Instance, backend: &mut dyn LmBackend, config: &AgentConfig) -> Transcript {
    let mut runner = Runner {
        config,
        backend,
        schema: Schema::for_scenario(instance.scenario),
        views: Views::of(&instance.database),
        steps: Vec::new(),
        counts: Counts::default(),
        final_answer: None,
    };
    let termination = match config.strategy {
        Strategy::Single => runner.run_single(instance),
        Strategy::Iter | Strategy::Plan | Strategy::PlanNoReplan => runner.run_loop(instance),
    };
    Transcript {
        instance_id: instance.id.clone(),
        strategy: config.strategy,
        dialect: config.dialect,
        steps: runner.steps,
        termination,
        final_answer: runner.final_answer,
        counts: runner.counts,
    }
}

enum Call {
    Text(String),
    Budget,
    Failed,
}

struct Runner<'a> {
    config: &'a AgentConfig,
    backend: &'a mut dyn LmBackend,
    schema: Schema,
    views: Views,
    steps: Vec<Step>,
    counts: Counts,
    final_answer: Option<String>,
}

impl Runner<'_> {
    fn call(&mut self, messages: &[Message]) -> Call {
        if self.counts.lm_calls >= self.config.max_steps {
            return Call::Budget;
        }
        self.counts.lm_calls += 1;
        match self.backend.complete(messages) {
            Ok(text) => Call::Text(text),
            Err(_) => Call::Failed,
        }
    }

    /// Parse and execute a query; returns the Action step and the raw
    /// observation text (result rendering or the error message).
    fn run_query(&mut self, text: &str) -> (Step, String) {
        self.counts.retrievals += 1;
        let record = QueryRecord {
            dialect: self.config.dialect,
            text: text.to_string(),
        };
        let outcome = query::parse(text, &self.schema)
            .map_err(|e| e.to_string())
            .and_then(|ast| {
                if ast.dialect() != self.config.dialect {
                    return Err(format!(
                        "dialect mismatch: this session uses the {} dialect",
                        self.config.dialect
                    ));
                }
                let table = query::execute(&ast, &self.views).map_err(|e| e.to_string())?;
                let symbols: Vec<String> = query::touched_symbols(&ast)
                    .into_iter()
                    .map(|s| s.to_string())
                    .collect();
                Ok((table, symbols))
            });
        match outcome {
            Ok((table, symbols)) => {
                self.counts.successful_retrievals += 1;
                let obs = table.render();
                (
                    Step {
                        tag: StepTag::Action,
                        text: text.to_string(),
                        query: Some(record),
                        ok: Some(true),
                        error: None,
                        symbols: Some(symbols),
                    },
                    obs,
                )
            }
            Err(message) => (
                Step {
                    tag: StepTag::Action,
                    text: text.to_string(),
                    query: Some(record),
                    ok: Some(false),
                    error: Some(message.clone()),
                    symbols: None,
                },
                message,
            ),
        }
    }

    fn run_single(&mut self, instance: &Instance) -> Termination {
        let retrieval = prompts::single_retrieval(
            instance.scenario,
            self.config.dialect,
            &self.schema,
            &instance.question,
        );
        let (query_text, observation) = match self.call(&retrieval) {
            Call::Budget => return Termination::StepBudget,
            Call::Failed => return Termination::BackendError,
            Call::Text(completion) => {
                let text = match extract_action(&completion) {
                    ExtractedAction::Query(q) => q,
                    _ => completion.trim().to_string(),
                };
                if text.is_empty() {
                    (String::new(), String::new())
                } else {
                    let (step, obs) = self.run_query(&text);
                    // A failed retrieval leaves the observation empty; the
                    // run still proceeds to answering.
                    let obs = if step.ok == Some(true) {
                        obs
                    } else {
                        String::new()
                    };
                    self.steps.push(step);
                    (text, obs)
                }
            }
        };

        let answer_prompt = prompts::single_answer(
            instance.scenario,
            self.config.dialect,
            &self.schema,
            &instance.question,
            &query_text,
            &prompts::cap_observation(&observation, self.config.observation_char_cap),
        );
        match self.call(&answer_prompt) {
            Call::Budget => Termination::StepBudget,
            Call::Failed => Termination::BackendError,
            Call::Text(completion) => {
                let answer = match extract_action(&completion) {
                    ExtractedAction::Final(a) => a,
                    _ => completion.trim().to_string(),
                };
                self.steps
                    .push(Step::plain(StepTag::FinalAnswer, answer.clone()));
                self.final_answer = Some(answer);
                Termination::Answered
            }
        }
    }

    fn run_loop(&mut self, instance: &Instance) -> Termination {
        let strategy = self.config.strategy;
        let mut messages = if strategy.is_plan() {
            prompts::plan_opening(
                strategy,
                instance.scenario,
                self.config.dialect,
                &self.schema,
                &instance.question,
            )
        } else {
            prompts::iter_opening(
                instance.scenario,
                self.config.dialect,
                &self.schema,
                &instance.question,
            )
        };

        if strategy.is_plan() {
            // The first completion must be a plan; one re-prompt, then the
            // run fails.
            let mut reprompted = false;
            loop {
                match self.call(&messages) {
                    Call::Budget => return Termination::StepBudget,
                    Call::Failed => return Termination::BackendError,
                    Call::Text(completion) => match plan_text(&completion) {
                        Some(plan) => {
                            self.steps.push(Step::plain(StepTag::Plan, plan.clone()));
                            messages.push(Message::assistant(completion));
                            messages.push(prompts::plan_ack(&plan));
                            break;
                        }
                        None if !reprompted => {
                            reprompted = true;
                            messages.push(Message::assistant(completion));
                            messages.push(prompts::plan_reminder());
                        }
                        None => return Termination::BackendError,
                    },
                }
            }
        }

        let mut reprompted = false;
        loop {
            match self.call(&messages) {
                Call::Budget => return Termination::StepBudget,
                Call::Failed => return Termination::BackendError,
                Call::Text(completion) => match extract_action(&completion) {
                    ExtractedAction::Final(answer) => {
                        self.steps
                            .push(Step::plain(StepTag::FinalAnswer, answer.clone()));
                        self.final_answer = Some(answer);
                        return Termination::Answered;
                    }
                    ExtractedAction::Query(qtext) => {
                        reprompted = false;
                        let thought = extract_thought(&completion);
                        self.steps.push(Step::plain(StepTag::Thought, thought));
                        let (action, raw_obs) = self.run_query(&qtext);
                        self.steps.push(action);
                        let obs =
                            prompts::cap_observation(&raw_obs, self.config.observation_char_cap);
                        self.steps
                            .push(Step::plain(StepTag::Observation, obs.clone()));
                        messages.push(Message::assistant(completion));
                        messages.push(prompts::observation_message(&obs));
                    }
                    ExtractedAction::Replan(plan) if strategy == Strategy::Plan => {
                        reprompted = false;
                        self.counts.replans += 1;
                        self.steps.push(Step::plain(StepTag::Replan, plan.clone()));
                        messages.push(Message::assistant(completion));
                        messages.push(prompts::plan_ack(&plan));
                    }
                    other => {
                        // Replan under plan_no_replan is rejected like any
                        // malformed output: one re-prompt, then a failed
                        // step.
                        let rejected_replan = matches!(other, ExtractedAction::Replan(_));
                        if !reprompted {
                            reprompted = true;
                            messages.push(Message::assistant(completion));
                            messages.push(if rejected_replan {
                                prompts::replan_rejected()
                            } else {
                                prompts::format_reminder()
                            });
                            continue;
                        }
                        reprompted = false;
                        let note = if rejected_replan {
                            "Re-planning is not available in this session."
                        } else {
                            "No action was recognized in the response."
                        };
                        self.steps
                            .push(Step::plain(StepTag::Thought, extract_thought(&completion)));
                        self.steps.push(Step {
                            tag: StepTag::Action,
                            text: completion.clone(),
                            query: None,
                            ok: None,
                            error: Some(note.to_string()),
                            symbols: None,
                        });
                        self.steps.push(Step::plain(StepTag::Observation, note));
                        messages.push(Message::assistant(completion));
                        messages.push(prompts::observation_message(note));
                    }
                },
            }
        }
    }
}

/// A completion counts as a plan when it does not try to act and is not
/// empty; a leading `Plan:` marker is stripped.
fn plan_text(completion: &str) -> Option<String> {
    match extract_action(completion) {
        ExtractedAction::Malformed => {
            let trimmed = completion.trim();
            let body = if trimmed.to_lowercase().starts_with("plan:") {
                trimmed["plan:".len()..].trim()
            } else {
                trimmed
            };
            (!body.is_empty()).then(|| body.to_string())
        }
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::genesis::{gen_locating, GenConfig, ScalePreset};
    use crate::model::Scenario;

    fn test_instance() -> Instance {
        gen_locating(&GenConfig::preset(
            Scenario::Locating,
            ScalePreset::Small,
            7,
        ))
        .unwrap()
    }

    fn run_scripted(strategy: Strategy, steps: Vec<&str>) -> Transcript {
        let instance = test_instance();
        let mut backend = ScriptedBackend::from_steps(steps);
        run(
            &instance,
            &mut backend,
            &AgentConfig::new(strategy, Dialect::Table),
        )
    }

    const QUERY_STEP: &str =
        "Thought: look at the nodes\nAction: query\nAction Input: SELECT name, local_value FROM TradingNode";

    #[test]
    fn single_answers_after_one_retrieval() {
        let t = run_scripted(
            Strategy::Single,
            vec!["SELECT name FROM TradingNode", "Final Answer: Doab"],
        );
        assert_eq!(t.termination, Termination::Answered);
        assert_eq!(t.counts.retrievals, 1);
        assert_eq!(t.counts.successful_retrievals, 1);
        assert_eq!(t.final_answer.as_deref(), Some("Doab"));
        assert_eq!(
            t.tag_sequence(),
            vec![StepTag::Action, StepTag::FinalAnswer]
        );
    }

    #[test]
    fn single_survives_garbage_query() {
        let t = run_scripted(Strategy::Single, vec!["SELEC * FORM x", "Final Answer: A"]);
        assert_eq!(t.termination, Termination::Answered);
        assert_eq!(t.counts.retrievals, 1);
        assert_eq!(t.counts.successful_retrievals, 0);
        let action = &t.steps[0];
        assert_eq!(action.ok, Some(false));
        assert!(action
            .error
            .as_deref()
            .unwrap_or("")
            .contains("parse error"));
    }

    #[test]
    fn single_with_empty_completions_answers_empty() {
        let t = run_scripted(Strategy::Single, vec!["", ""]);
        assert_eq!(t.termination, Termination::Answered);
        assert_eq!(t.final_answer.as_deref(), Some(""));
        assert_eq!(t.counts.retrievals, 0);
        assert_eq!(t.tag_sequence(), vec![StepTag::FinalAnswer]);
    }

    #[test]
    fn iter_runs_queries_until_final_answer() {
        let t = run_scripted(
            Strategy::Iter,
            vec![QUERY_STEP, QUERY_STEP, QUERY_STEP, "Final Answer: Doab"],
        );
        assert_eq!(t.termination, Termination::Answered);
        assert_eq!(t.counts.retrievals, 3);
        assert_eq!(t.counts.lm_calls, 4);
        assert!(conforms_to_grammar(Strategy::Iter, &t.tag_sequence()));
    }

    #[test]
    fn iter_exhausts_step_budget() {
        let instance = test_instance();
        // Pattern rule answers every prompt with another query, forever.
        let file = ScriptFile {
            default: vec![],
            instances: Default::default(),
            patterns: vec![PatternRule {
                contains: "".into(),
                response: QUERY_STEP.into(),
            }],
        };
        let mut backend = file.session(&instance.id);
        let mut config = AgentConfig::new(Strategy::Iter, Dialect::Table);
        config.max_steps = 5;
        let t = run(&instance, &mut backend, &config);
        assert_eq!(t.termination, Termination::StepBudget);
        assert_eq!(t.counts.lm_calls, 5);
        assert!(conforms_to_grammar(Strategy::Iter, &t.tag_sequence()));
    }

    #[test]
    fn iter_feeds_parse_errors_back_and_continues() {
        let t = run_scripted(
            Strategy::Iter,
            vec![
                "Thought: x\nAction: query\nAction Input: SELEC broken",
                "Final Answer: B",
            ],
        );
        assert_eq!(t.termination, Termination::Answered);
        let obs = t
            .steps
            .iter()
            .find(|s| s.tag == StepTag::Observation)
            .unwrap();
        assert!(obs.text.contains("parse error"));
        assert_eq!(t.counts.retrievals, 1);
        assert_eq!(t.counts.successful_retrievals, 0);
    }

    #[test]
    fn malformed_gets_one_reprompt_then_failed_step() {
        let t = run_scripted(
            Strategy::Iter,
            vec!["free prose", QUERY_STEP, "Final Answer: A"],
        );
        // Re-prompt consumed the second completion as a query step.
        assert_eq!(t.counts.retrievals, 1);
        assert_eq!(t.termination, Termination::Answered);
        assert_eq!(t.counts.lm_calls, 3);

        let t = run_scripted(
            Strategy::Iter,
            vec!["free prose", "more prose", "Final Answer: A"],
        );
        assert_eq!(t.counts.retrievals, 0);
        assert!(conforms_to_grammar(Strategy::Iter, &t.tag_sequence()));
        let failed = t.steps.iter().find(|s| s.tag == StepTag::Action).unwrap();
        assert!(failed.query.is_none());
        assert!(failed.error.is_some());
    }

    #[test]
    fn plan_records_plan_then_loops() {
        let t = run_scripted(
            Strategy::Plan,
            vec![
                "Plan:\n1. inspect flows\n2. answer",
                QUERY_STEP,
                QUERY_STEP,
                "Final Answer: Doab",
            ],
        );
        assert_eq!(t.termination, Termination::Answered);
        assert_eq!(t.counts.replans, 0);
        assert_eq!(
            t.tag_sequence(),
            vec![
                StepTag::Plan,
                StepTag::Thought,
                StepTag::Action,
                StepTag::Observation,
                StepTag::Thought,
                StepTag::Action,
                StepTag::Observation,
                StepTag::FinalAnswer
            ]
        );
        assert_eq!(t.steps[0].text, "1. inspect flows\n2. answer");
    }

    #[test]
    fn plan_counts_replans() {
        let t = run_scripted(
            Strategy::Plan,
            vec![
                "Plan:\n1. a",
                "Re-plan:\n1. a\n2. b",
                QUERY_STEP,
                "Re-plan:\n1. c",
                "Final Answer: X",
            ],
        );
        assert_eq!(t.counts.replans, 2);
        assert!(conforms_to_grammar(Strategy::Plan, &t.tag_sequence()));
    }

    #[test]
    fn plan_no_replan_rejects_replans() {
        let t = run_scripted(
            Strategy::PlanNoReplan,
            vec![
                "Plan:\n1. a",
                "Re-plan:\n1. z",
                "Re-plan:\n1. z again",
                "Final Answer: X",
            ],
        );
        assert_eq!(t.counts.replans, 0);
        assert!(!t.steps.iter().any(|s| s.tag == StepTag::Replan));
        assert_eq!(t.termination, Termination::Answered);
        assert!(conforms_to_grammar(
            Strategy::PlanNoReplan,
            &t.tag_sequence()
        ));
    }

    #[test]
    fn plan_missing_twice_is_backend_error() {
        let t = run_scripted(Strategy::Plan, vec!["", "", "unused"]);
        assert_eq!(t.termination, Termination::BackendError);
        assert!(t.steps.is_empty());
    }

    #[test]
    fn scripted_runs_are_bit_reproducible() {
        let a = run_scripted(
            Strategy::Plan,
            vec!["Plan:\n1. a", QUERY_STEP, "Final Answer: Q"],
        );
        let b = run_scripted(
            Strategy::Plan,
            vec!["Plan:\n1. a", QUERY_STEP, "Final Answer: Q"],
        );
        assert_eq!(a.to_json(), b.to_json());
    }

    #[test]
    fn backend_failure_terminates_cleanly() {
        let t = run_scripted(Strategy::Iter, vec![QUERY_STEP]);
        // Script exhausts on the second call.
        assert_eq!(t.termination, Termination::BackendError);
        assert!(t.final_answer.is_none());
        assert!(conforms_to_grammar(Strategy::Iter, &t.tag_sequence()));
    }

    #[test]
    fn dialect_mismatch_is_a_failed_retrieval() {
        let instance = test_instance();
        let mut backend = ScriptedBackend::from_steps(vec![
            "Thought: g\nAction: query\nAction Input: MATCH (n:TradingNode) RETURN n.name",
            "Final Answer: A",
        ]);
        let t = run(
            &instance,
            &mut backend,
            &AgentConfig::new(Strategy::Iter, Dialect::Table),
        );
        assert_eq!(t.counts.retrievals, 1);
        assert_eq!(t.counts.successful_retrievals, 0);
        let action = t.steps.iter().find(|s| s.tag == StepTag::Action).unwrap();
        assert!(action
            .error
            .as_deref()
            .unwrap()
            .contains("dialect mismatch"));
    }

    #[test]
    fn observations_are_capped() {
        let instance = test_instance();
        let mut backend = ScriptedBackend::from_steps(vec![
            "Thought: all\nAction: query\nAction Input: SELECT * FROM NodeCountry",
            "Final Answer: A",
        ]);
        let mut config = AgentConfig::new(Strategy::Iter, Dialect::Table);
        config.observation_char_cap = 80;
        let t = run(&instance, &mut backend, &config);
        let obs = t
            .steps
            .iter()
            .find(|s| s.tag == StepTag::Observation)
            .unwrap();
        assert!(obs.text.len() < 140);
        assert!(obs.text.contains("(observation truncated)"));
    }
}
