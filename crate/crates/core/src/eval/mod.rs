//! Scoring and analyses over transcripts: answer correctness, SR/MR
//! retrieval classes, missed-data-analysis detection, a failure taxonomy,
//! and re-planning statistics, aggregated into a report.
//!
//! Everything here is pure aggregation over immutable transcripts.
//! Retrieval and analysis metrics depend only on the transcript; gold enters
//! only through correctness and the failure taxonomy.

mod report;

pub use report::{AccuracyCell, CountAcc, EvalError, Report, SrMrRow};

use crate::agent::{StepTag, Termination, Transcript};
use crate::genesis::question::parse_target;
use crate::model::{Instance, Scenario};
use crate::oracle;
use serde::Serialize;
use std::collections::BTreeMap;
use std::collections::BTreeSet;

/// Decision ids an agent could legitimately answer for this instance.
/// Instances that fail to yield candidates (foreign question text, broken
/// references) get an empty set.
pub fn candidate_ids(instance: &Instance) -> Vec<String> {
    parse_target(instance.scenario, &instance.question)
        .ok()
        .and_then(|target| oracle::candidate_ids(&instance.database, &target).ok())
        .unwrap_or_default()
}

fn normalize(text: &str) -> String {
    text.trim()
        .trim_matches(|c: char| !(c.is_alphanumeric() || c == '_'))
        .to_lowercase()
}

fn tokens(text: &str) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    let mut current = String::new();
    for c in text.chars() {
        if c.is_alphanumeric() || c == '_' {
            current.push(c.to_ascii_lowercase());
        } else if !current.is_empty() {
            out.insert(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        out.insert(current);
    }
    out
}

/// Answer matching: normalized equality with the gold id, or the gold id
/// appearing as a whole token while no other candidate id does.
pub fn is_correct(final_answer: &str, instance: &Instance) -> bool {
    let Some(gold) = instance.gold.as_deref() else {
        return false;
    };
    let answer_norm = normalize(final_answer);
    let gold_norm = normalize(gold);
    if answer_norm == gold_norm {
        return true;
    }
    let answer_tokens = tokens(final_answer);
    if !answer_tokens.contains(&gold_norm) {
        return false;
    }
    !candidate_ids(instance)
        .iter()
        .filter(|c| normalize(c) != gold_norm)
        .any(|c| answer_tokens.contains(&normalize(c)))
}

/// Correctness of a whole run: unanswered runs are wrong.
pub fn transcript_correct(transcript: &Transcript, instance: &Instance) -> bool {
    transcript
        .final_answer
        .as_deref()
        .map(|a| is_correct(a, instance))
        .unwrap_or(false)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RetrievalClass {
    /// Exactly one successful retrieval.
    Sr,
    /// Two or more successful retrievals.
    Mr,
    /// No successful retrieval; excluded from the SR/MR table.
    None,
}

pub fn classify_sr_mr(transcript: &Transcript) -> RetrievalClass {
    match transcript.counts.successful_retrievals {
        0 => RetrievalClass::None,
        1 => RetrievalClass::Sr,
        _ => RetrievalClass::Mr,
    }
}

/// Critical quantities per scenario: a run that never touches them cannot
/// have done the decisive analysis.
pub fn required_symbols(scenario: Scenario) -> &'static [&'static str] {
    match scenario {
        Scenario::Locating => &["IV", "TP_total"],
        Scenario::Building => &["CO", "PD"],
    }
}

/// True when the union of symbols over successfully executed queries fails
/// to cover the scenario's critical quantities.
pub fn missed_analysis(transcript: &Transcript, scenario: Scenario) -> bool {
    let mut touched: BTreeSet<&str> = BTreeSet::new();
    for step in &transcript.steps {
        if step.tag == StepTag::Action && step.ok == Some(true) {
            if let Some(symbols) = &step.symbols {
                touched.extend(symbols.iter().map(String::as_str));
            }
        }
    }
    required_symbols(scenario)
        .iter()
        .any(|needed| !touched.contains(needed))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum FailureCategory {
    Correct,
    Can,
    Mis,
    Qur,
    Deep,
    Oth,
}

impl FailureCategory {
    pub fn as_str(self) -> &'static str {
        match self {
            FailureCategory::Correct => "CORRECT",
            FailureCategory::Can => "CAN",
            FailureCategory::Mis => "MIS",
            FailureCategory::Qur => "QUR",
            FailureCategory::Deep => "DEEP",
            FailureCategory::Oth => "OTH",
        }
    }

    pub fn all() -> [FailureCategory; 6] {
        [
            FailureCategory::Correct,
            FailureCategory::Can,
            FailureCategory::Mis,
            FailureCategory::Qur,
            FailureCategory::Deep,
            FailureCategory::Oth,
        ]
    }
}

impl std::fmt::Display for FailureCategory {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// QUR trigger: fraction of query attempts that must fail. The value is a
/// documented heuristic, not a reported quantity; pass a different fraction
/// to [`failure_category_with_threshold`] to recalibrate.
pub const QUR_FAILED_FRACTION: f64 = 0.5;

/// Heuristic failure taxonomy with fixed precedence:
/// CORRECT, then OTH (did not answer), CAN (no candidate named), MIS
/// (missed analysis), QUR (at least [`QUR_FAILED_FRACTION`] of the query
/// attempts failed), DEEP (residual: data or rules misused despite clean
/// inputs).
pub fn failure_category(transcript: &Transcript, instance: &Instance) -> FailureCategory {
    failure_category_with_threshold(transcript, instance, QUR_FAILED_FRACTION)
}

pub fn failure_category_with_threshold(
    transcript: &Transcript,
    instance: &Instance,
    qur_failed_fraction: f64,
) -> FailureCategory {
    if transcript_correct(transcript, instance) {
        return FailureCategory::Correct;
    }
    if transcript.termination != Termination::Answered {
        return FailureCategory::Oth;
    }
    let answer = transcript.final_answer.as_deref().unwrap_or("");
    let answer_tokens = tokens(answer);
    let names_candidate = candidate_ids(instance).iter().any(|c| {
        let c_norm = normalize(c);
        normalize(answer) == c_norm || answer_tokens.contains(&c_norm)
    });
    if !names_candidate {
        return FailureCategory::Can;
    }
    if missed_analysis(transcript, instance.scenario) {
        return FailureCategory::Mis;
    }
    let attempts = transcript.counts.retrievals;
    let failed = attempts - transcript.counts.successful_retrievals;
    if attempts > 0 && failed as f64 >= qur_failed_fraction * attempts as f64 {
        return FailureCategory::Qur;
    }
    FailureCategory::Deep
}

/// Count leading-enumerator lines ("1.", "2)", "3:") in a plan text.
pub fn plan_step_count(plan: &str) -> usize {
    plan.lines()
        .filter(|line| {
            let t = line.trim_start();
            let digits = t.chars().take_while(|c| c.is_ascii_digit()).count();
            digits > 0 && matches!(t.chars().nth(digits), Some('.') | Some(')') | Some(':'))
        })
        .count()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum PlanDelta {
    Increase,
    Same,
    Decrease,
}

impl PlanDelta {
    pub fn as_str(self) -> &'static str {
        match self {
            PlanDelta::Increase => "Increase",
            PlanDelta::Same => "Same",
            PlanDelta::Decrease => "Decrease",
        }
    }
}

/// Coarse classification of every Replan step in a transcript: does the
/// numbered-step count grow, stay, or shrink relative to the plan in effect.
pub fn replan_deltas(transcript: &Transcript) -> Vec<PlanDelta> {
    let mut current = None;
    let mut out = Vec::new();
    for step in &transcript.steps {
        match step.tag {
            StepTag::Plan => current = Some(plan_step_count(&step.text)),
            StepTag::Replan => {
                let next = plan_step_count(&step.text);
                if let Some(prev) = current {
                    out.push(match next.cmp(&prev) {
                        std::cmp::Ordering::Greater => PlanDelta::Increase,
                        std::cmp::Ordering::Equal => PlanDelta::Same,
                        std::cmp::Ordering::Less => PlanDelta::Decrease,
                    });
                }
                current = Some(next);
            }
            _ => {}
        }
    }
    out
}

pub const REPLAN_BUCKETS: &[&str] = &["0", "1", "2", "3", ">=4"];

pub fn replan_bucket(replans: u32) -> &'static str {
    match replans {
        0 => "0",
        1 => "1",
        2 => "2",
        3 => "3",
        _ => ">=4",
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct BucketRow {
    pub runs: usize,
    pub correct: usize,
}

impl BucketRow {
    pub fn accuracy(&self) -> f64 {
        if self.runs == 0 {
            0.0
        } else {
            self.correct as f64 / self.runs as f64
        }
    }
}

/// Re-planning statistics over plan-strategy runs: a histogram over the
/// re-plan count buckets with per-bucket accuracy, plus coarse plan-size
/// deltas across every Replan step.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ReplanStats {
    pub buckets: BTreeMap<String, BucketRow>,
    pub coarse: BTreeMap<String, usize>,
}

pub fn replan_stats(runs: &[(&Transcript, bool)]) -> ReplanStats {
    let mut stats = ReplanStats::default();
    if runs.is_empty() {
        return stats;
    }
    for bucket in REPLAN_BUCKETS {
        stats
            .buckets
            .insert(bucket.to_string(), BucketRow::default());
    }
    for (transcript, correct) in runs {
        let row = stats
            .buckets
            .get_mut(replan_bucket(transcript.counts.replans))
            .expect("bucket exists");
        row.runs += 1;
        if *correct {
            row.correct += 1;
        }
        for delta in replan_deltas(transcript) {
            *stats.coarse.entry(delta.as_str().to_string()).or_insert(0) += 1;
        }
    }
    stats
}

/// Score transcripts against an annotated dataset and aggregate every
/// analysis into a [`Report`].
pub fn report(dataset: &[Instance], transcripts: &[Transcript]) -> Result<Report, EvalError> {
    report::build(dataset, transcripts)
}

#[cfg(test)]
pub(crate) mod test_support {
    use super::*;
    use crate::agent::{Counts, QueryRecord, Step, Strategy};
    use crate::query::Dialect;

    /// Synthetic transcript with the given per-action outcomes, each a
    /// `(succeeded, symbols)` pair.
    pub fn transcript(
        instance_id: &str,
        strategy: Strategy,
        dialect: Dialect,
        answer: Option<&str>,
        termination: Termination,
        action_outcomes: &[(bool, &[&str])],
    ) -> Transcript {
        let mut steps = Vec::new();
        let mut counts = Counts::default();
        if strategy.is_plan() {
            steps.push(Step::plain(StepTag::Plan, "1. look\n2. decide"));
        }
        for (ok, symbols) in action_outcomes {
            counts.retrievals += 1;
            steps.push(Step::plain(StepTag::Thought, ""));
            let mut action = Step::plain(StepTag::Action, "q");
            action.query = Some(QueryRecord {
                dialect,
                text: "q".into(),
            });
            action.ok = Some(*ok);
            if *ok {
                counts.successful_retrievals += 1;
                action.symbols = Some(symbols.iter().map(|s| s.to_string()).collect());
            } else {
                action.error = Some("parse error".into());
            }
            steps.push(action);
            steps.push(Step::plain(StepTag::Observation, ""));
        }
        if let Some(a) = answer {
            steps.push(Step::plain(StepTag::FinalAnswer, a));
        }
        counts.lm_calls = counts.retrievals + 1;
        Transcript {
            instance_id: instance_id.to_string(),
            strategy,
            dialect,
            steps,
            termination,
            final_answer: answer.map(String::from),
            counts,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::test_support::transcript as make_transcript;
    use super::*;
    use crate::agent::{Step, Strategy};
    use crate::model::{Database, Scenario};
    use crate::query::Dialect;

    fn instance() -> Instance {
        let world = crate::oracle::worked_example_world();
        let db = Database::Locating(world);
        Instance {
            id: "loc-worked".into(),
            scenario: Scenario::Locating,
            question: crate::genesis::question::render(
                &crate::genesis::question::Target::Locating {
                    country: "BAH".into(),
                    home: "Deccan".into(),
                },
            ),
            gold: Some("Doab".into()),
            margin: Some(0.2),
            seed: 0,
            database: db,
        }
    }

    fn transcript(
        strategy: Strategy,
        answer: Option<&str>,
        termination: Termination,
        action_outcomes: &[(bool, &[&str])],
    ) -> Transcript {
        make_transcript(
            &instance().id,
            strategy,
            Dialect::Table,
            answer,
            termination,
            action_outcomes,
        )
    }

    #[test]
    fn exact_answer_is_correct() {
        assert!(is_correct("Doab", &instance()));
        assert!(is_correct("  doab. ", &instance()));
    }

    #[test]
    fn token_containment_without_other_candidates_is_correct() {
        assert!(is_correct("I would choose Doab.", &instance()));
    }

    #[test]
    fn mentioning_two_candidates_is_wrong() {
        assert!(!is_correct("Either Doab or Ganges works.", &instance()));
        assert!(!is_correct("Ganges", &instance()));
    }

    #[test]
    fn sr_mr_classification() {
        let sr = transcript(
            Strategy::Iter,
            Some("Doab"),
            Termination::Answered,
            &[(true, &[])],
        );
        assert_eq!(classify_sr_mr(&sr), RetrievalClass::Sr);
        let mr = transcript(
            Strategy::Iter,
            Some("Doab"),
            Termination::Answered,
            &[(true, &[]), (true, &[]), (true, &[]), (true, &[])],
        );
        assert_eq!(classify_sr_mr(&mr), RetrievalClass::Mr);
        let none = transcript(Strategy::Iter, Some("Doab"), Termination::Answered, &[]);
        assert_eq!(classify_sr_mr(&none), RetrievalClass::None);
    }

    #[test]
    fn missed_analysis_requires_both_symbols() {
        let covered = transcript(
            Strategy::Iter,
            Some("Doab"),
            Termination::Answered,
            &[(true, &["flow", "IV"]), (true, &["TP_total"])],
        );
        assert!(!missed_analysis(&covered, Scenario::Locating));
        let only_flow = transcript(
            Strategy::Iter,
            Some("Doab"),
            Termination::Answered,
            &[(true, &["flow"])],
        );
        assert!(missed_analysis(&only_flow, Scenario::Locating));
        let zero_queries = transcript(Strategy::Iter, Some("x"), Termination::Answered, &[]);
        assert!(missed_analysis(&zero_queries, Scenario::Building));
        // Failed queries never count as coverage.
        let failed = transcript(
            Strategy::Iter,
            Some("x"),
            Termination::Answered,
            &[(false, &["IV", "TP_total"])],
        );
        assert!(missed_analysis(&failed, Scenario::Locating));
    }

    #[test]
    fn failure_precedence() {
        let inst = instance();
        let budget = transcript(Strategy::Iter, None, Termination::StepBudget, &[]);
        assert_eq!(failure_category(&budget, &inst), FailureCategory::Oth);

        let outside = transcript(
            Strategy::Iter,
            Some("Bengal"),
            Termination::Answered,
            &[(true, &["IV", "TP_total"])],
        );
        assert_eq!(failure_category(&outside, &inst), FailureCategory::Can);

        let missed = transcript(
            Strategy::Iter,
            Some("Ganges"),
            Termination::Answered,
            &[(true, &["flow"])],
        );
        assert_eq!(failure_category(&missed, &inst), FailureCategory::Mis);

        let query_errors = transcript(
            Strategy::Iter,
            Some("Ganges"),
            Termination::Answered,
            &[(true, &["IV", "TP_total"]), (false, &[]), (false, &[])],
        );
        assert_eq!(failure_category(&query_errors, &inst), FailureCategory::Qur);

        let deep = transcript(
            Strategy::Iter,
            Some("Ganges"),
            Termination::Answered,
            &[(true, &["IV", "TP_total"])],
        );
        assert_eq!(failure_category(&deep, &inst), FailureCategory::Deep);

        let correct = transcript(
            Strategy::Iter,
            Some("Doab"),
            Termination::Answered,
            &[(true, &["IV", "TP_total"])],
        );
        assert_eq!(failure_category(&correct, &inst), FailureCategory::Correct);
    }

    #[test]
    fn every_transcript_gets_exactly_one_category() {
        let inst = instance();
        let runs = [
            transcript(
                Strategy::Iter,
                Some("Doab"),
                Termination::Answered,
                &[(true, &[])],
            ),
            transcript(Strategy::Iter, None, Termination::StepBudget, &[]),
            transcript(Strategy::Iter, Some("nothing"), Termination::Answered, &[]),
            transcript(
                Strategy::Iter,
                Some("Ganges"),
                Termination::Answered,
                &[(false, &[])],
            ),
        ];
        let mut histogram: BTreeMap<FailureCategory, usize> = BTreeMap::new();
        for t in &runs {
            *histogram.entry(failure_category(t, &inst)).or_insert(0) += 1;
        }
        let total: usize = histogram.values().sum();
        assert_eq!(total, runs.len());
    }

    #[test]
    fn plan_step_counting() {
        assert_eq!(plan_step_count("1. a\n2. b\n3. c"), 3);
        assert_eq!(plan_step_count("1) a\nnote\n2) b"), 2);
        assert_eq!(plan_step_count("no numbers here"), 0);
        assert_eq!(plan_step_count("10. tenth step"), 1);
    }

    #[test]
    fn replan_buckets_and_deltas() {
        let mut t0 = transcript(Strategy::Plan, Some("Doab"), Termination::Answered, &[]);
        t0.counts.replans = 0;
        let mut t2 = transcript(Strategy::Plan, Some("Ganges"), Termination::Answered, &[]);
        t2.counts.replans = 2;
        t2.steps
            .push(Step::plain(StepTag::Replan, "1. a\n2. b\n3. c\n4. d\n5. e"));
        t2.steps.push(Step::plain(StepTag::Replan, "1. a"));
        let mut t0b = transcript(Strategy::Plan, Some("Ganges"), Termination::Answered, &[]);
        t0b.counts.replans = 0;

        let stats = replan_stats(&[(&t0, true), (&t0b, false), (&t2, true)]);
        assert_eq!(stats.buckets["0"].runs, 2);
        assert_eq!(stats.buckets["0"].correct, 1);
        assert!((stats.buckets["0"].accuracy() - 0.5).abs() < 1e-12);
        assert_eq!(stats.buckets["2"].runs, 1);
        assert_eq!(stats.buckets["2"].correct, 1);
        // Base plan has 2 steps; 5 steps is Increase, then 1 step Decrease.
        assert_eq!(stats.coarse["Increase"], 1);
        assert_eq!(stats.coarse["Decrease"], 1);
        assert!(!stats.coarse.contains_key("Same"));

        assert_eq!(replan_stats(&[]), ReplanStats::default());
    }

    #[test]
    fn unannotated_instance_is_never_correct() {
        let mut inst = instance();
        inst.gold = None;
        assert!(!is_correct("Doab", &inst));
    }
}
