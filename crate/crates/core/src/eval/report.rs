//! Aggregated evaluation report, emitted as machine-readable JSON and a
//! markdown document.

use super::{
    classify_sr_mr, failure_category, replan_stats, transcript_correct, FailureCategory,
    ReplanStats, RetrievalClass,
};
use crate::agent::Transcript;
use crate::model::Instance;
use serde::Serialize;
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("missing transcripts for {0} instance(s): {1}", .ids.len(), .ids.join(", "))]
    MissingTranscripts { ids: Vec<String> },
    #[error("transcript references unknown instance {0}")]
    UnknownInstance(String),
    #[error("instance {0} is not annotated")]
    Unannotated(String),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AccuracyCell {
    pub n: usize,
    pub correct: usize,
    pub accuracy: f64,
}

impl AccuracyCell {
    fn new(n: usize, correct: usize) -> AccuracyCell {
        AccuracyCell {
            n,
            correct,
            accuracy: if n == 0 {
                0.0
            } else {
                correct as f64 / n as f64
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CountAcc {
    pub runs: usize,
    pub correct: usize,
    pub accuracy: f64,
}

impl CountAcc {
    fn new(runs: usize, correct: usize) -> CountAcc {
        CountAcc {
            runs,
            correct,
            accuracy: if runs == 0 {
                0.0
            } else {
                correct as f64 / runs as f64
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SrMrRow {
    pub sr: CountAcc,
    pub mr: CountAcc,
    /// Runs with zero successful retrievals, excluded from SR/MR.
    pub none: usize,
}

/// The full analysis bundle. Map keys are stable strings
/// (`scenario/strategy/dialect` and prefixes thereof) so the JSON encoding
/// is byte-deterministic.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub dataset_size: usize,
    pub transcript_count: usize,
    /// `strategy/dialect` combinations covered by the transcripts.
    pub combos: Vec<String>,
    /// Accuracy per `scenario/strategy/dialect`.
    pub accuracy: BTreeMap<String, AccuracyCell>,
    /// Per `scenario/strategy`: mean of the per-dialect accuracies.
    pub accuracy_avg_dialects: BTreeMap<String, f64>,
    /// Per strategy: single- vs multi-retrieval split.
    pub sr_mr: BTreeMap<String, SrMrRow>,
    /// Per `scenario/strategy`: fraction of runs that missed the critical
    /// quantities.
    pub missed_analysis_rate: BTreeMap<String, f64>,
    /// Per `scenario/strategy`: histogram over CORRECT/CAN/MIS/QUR/DEEP/OTH.
    /// The non-CORRECT labels are heuristic approximations.
    pub failures: BTreeMap<String, BTreeMap<String, usize>>,
    /// Per `scenario/strategy` for plan strategies: re-plan buckets and
    /// coarse plan-size deltas.
    pub replan: BTreeMap<String, ReplanStats>,
}

pub(super) fn build(dataset: &[Instance], transcripts: &[Transcript]) -> Result<Report, EvalError> {
    let by_id: BTreeMap<&str, &Instance> = dataset.iter().map(|i| (i.id.as_str(), i)).collect();
    for inst in dataset {
        if !inst.is_annotated() {
            return Err(EvalError::Unannotated(inst.id.clone()));
        }
    }
    for t in transcripts {
        if !by_id.contains_key(t.instance_id.as_str()) {
            return Err(EvalError::UnknownInstance(t.instance_id.clone()));
        }
    }

    // Every (strategy, dialect) combo present must cover the whole dataset.
    let combos: BTreeSet<String> = transcripts
        .iter()
        .map(|t| format!("{}/{}", t.strategy, t.dialect))
        .collect();
    let mut missing: BTreeSet<String> = BTreeSet::new();
    if combos.is_empty() {
        missing.extend(dataset.iter().map(|i| i.id.clone()));
    }
    for combo in &combos {
        let covered: BTreeSet<&str> = transcripts
            .iter()
            .filter(|t| format!("{}/{}", t.strategy, t.dialect) == *combo)
            .map(|t| t.instance_id.as_str())
            .collect();
        for inst in dataset {
            if !covered.contains(inst.id.as_str()) {
                missing.insert(inst.id.clone());
            }
        }
    }
    if !missing.is_empty() {
        return Err(EvalError::MissingTranscripts {
            ids: missing.into_iter().collect(),
        });
    }

    let mut accuracy_counts: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    let mut sr_mr_counts: BTreeMap<String, (usize, usize, usize, usize, usize)> = BTreeMap::new();
    let mut missed_counts: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    let mut failures: BTreeMap<String, BTreeMap<String, usize>> = BTreeMap::new();
    let mut plan_runs: BTreeMap<String, Vec<(&Transcript, bool)>> = BTreeMap::new();

    for t in transcripts {
        let inst = by_id[t.instance_id.as_str()];
        let correct = transcript_correct(t, inst);
        let cell_key = format!("{}/{}/{}", inst.scenario, t.strategy, t.dialect);
        let group_key = format!("{}/{}", inst.scenario, t.strategy);

        let cell = accuracy_counts.entry(cell_key).or_insert((0, 0));
        cell.0 += 1;
        cell.1 += correct as usize;

        let sr_mr = sr_mr_counts
            .entry(t.strategy.to_string())
            .or_insert((0, 0, 0, 0, 0));
        match classify_sr_mr(t) {
            RetrievalClass::Sr => {
                sr_mr.0 += 1;
                sr_mr.1 += correct as usize;
            }
            RetrievalClass::Mr => {
                sr_mr.2 += 1;
                sr_mr.3 += correct as usize;
            }
            RetrievalClass::None => sr_mr.4 += 1,
        }

        let missed = missed_counts.entry(group_key.clone()).or_insert((0, 0));
        missed.0 += 1;
        missed.1 += super::missed_analysis(t, inst.scenario) as usize;

        let hist = failures.entry(group_key.clone()).or_insert_with(|| {
            FailureCategory::all()
                .iter()
                .map(|c| (c.as_str().to_string(), 0))
                .collect()
        });
        *hist
            .get_mut(failure_category(t, inst).as_str())
            .expect("all categories pre-seeded") += 1;

        if t.strategy.is_plan() {
            plan_runs.entry(group_key).or_default().push((t, correct));
        }
    }

    let accuracy: BTreeMap<String, AccuracyCell> = accuracy_counts
        .into_iter()
        .map(|(k, (n, c))| (k, AccuracyCell::new(n, c)))
        .collect();

    // Mean of the per-dialect accuracies for each scenario/strategy pair.
    let mut avg_groups: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for (key, cell) in &accuracy {
        let group = key.rsplit_once('/').expect("key has three parts").0;
        avg_groups
            .entry(group.to_string())
            .or_default()
            .push(cell.accuracy);
    }
    let accuracy_avg_dialects: BTreeMap<String, f64> = avg_groups
        .into_iter()
        .map(|(k, accs)| {
            let mean = accs.iter().sum::<f64>() / accs.len() as f64;
            (k, mean)
        })
        .collect();

    let sr_mr: BTreeMap<String, SrMrRow> = sr_mr_counts
        .into_iter()
        .map(|(k, (sr_n, sr_c, mr_n, mr_c, none))| {
            (
                k,
                SrMrRow {
                    sr: CountAcc::new(sr_n, sr_c),
                    mr: CountAcc::new(mr_n, mr_c),
                    none,
                },
            )
        })
        .collect();

    let missed_analysis_rate: BTreeMap<String, f64> = missed_counts
        .into_iter()
        .map(|(k, (n, missed))| {
            (
                k,
                if n == 0 {
                    0.0
                } else {
                    missed as f64 / n as f64
                },
            )
        })
        .collect();

    let replan: BTreeMap<String, ReplanStats> = plan_runs
        .into_iter()
        .map(|(k, runs)| (k, replan_stats(&runs)))
        .collect();

    Ok(Report {
        dataset_size: dataset.len(),
        transcript_count: transcripts.len(),
        combos: combos.into_iter().collect(),
        accuracy,
        accuracy_avg_dialects,
        sr_mr,
        missed_analysis_rate,
        failures,
        replan,
    })
}

impl Report {
    pub fn to_json(&self) -> String {
        let mut out = serde_json::to_string_pretty(self).expect("report serializes");
        out.push('\n');
        out
    }

    pub fn to_markdown(&self) -> String {
        let mut md = String::new();
        let pct = |x: f64| format!("{:.1}%", 100.0 * x);
        md.push_str("# Evaluation report\n\n");
        md.push_str(&format!(
            "{} instances, {} transcripts, combos: {}\n\n",
            self.dataset_size,
            self.transcript_count,
            self.combos.join(", ")
        ));

        md.push_str("## Accuracy\n\n");
        md.push_str("| scenario/strategy/dialect | n | correct | accuracy |\n");
        md.push_str("|---|---|---|---|\n");
        for (key, cell) in &self.accuracy {
            md.push_str(&format!(
                "| {key} | {} | {} | {} |\n",
                cell.n,
                cell.correct,
                pct(cell.accuracy)
            ));
        }
        md.push_str("\n### Dialect-averaged accuracy\n\n");
        md.push_str("| scenario/strategy | accuracy |\n|---|---|\n");
        for (key, acc) in &self.accuracy_avg_dialects {
            md.push_str(&format!("| {key} | {} |\n", pct(*acc)));
        }

        md.push_str("\n## Single vs multiple retrievals\n\n");
        md.push_str(
            "| strategy | SR runs | SR accuracy | MR runs | MR accuracy | no-retrieval runs |\n",
        );
        md.push_str("|---|---|---|---|---|---|\n");
        for (key, row) in &self.sr_mr {
            md.push_str(&format!(
                "| {key} | {} | {} | {} | {} | {} |\n",
                row.sr.runs,
                pct(row.sr.accuracy),
                row.mr.runs,
                pct(row.mr.accuracy),
                row.none
            ));
        }

        md.push_str("\n## Missed data analysis rate\n\n");
        md.push_str("| scenario/strategy | rate |\n|---|---|\n");
        for (key, rate) in &self.missed_analysis_rate {
            md.push_str(&format!("| {key} | {} |\n", pct(*rate)));
        }

        md.push_str("\n## Outcome histogram\n\n");
        md.push_str(
            "Failure labels (CAN, MIS, QUR, DEEP, OTH) are heuristic approximations assigned \
             with fixed precedence; only CORRECT is exact.\n\n",
        );
        md.push_str("| scenario/strategy | CORRECT | CAN | MIS | QUR | DEEP | OTH |\n");
        md.push_str("|---|---|---|---|---|---|---|\n");
        for (key, hist) in &self.failures {
            md.push_str(&format!(
                "| {key} | {} | {} | {} | {} | {} | {} |\n",
                hist["CORRECT"], hist["CAN"], hist["MIS"], hist["QUR"], hist["DEEP"], hist["OTH"]
            ));
        }

        if !self.replan.is_empty() {
            md.push_str("\n## Re-planning\n\n");
            md.push_str("| scenario/strategy | re-plans | runs | accuracy |\n|---|---|---|---|\n");
            for (key, stats) in &self.replan {
                for bucket in super::REPLAN_BUCKETS {
                    if let Some(row) = stats.buckets.get(*bucket) {
                        md.push_str(&format!(
                            "| {key} | {bucket} | {} | {} |\n",
                            row.runs,
                            pct(row.accuracy())
                        ));
                    }
                }
            }
            md.push_str("\n| scenario/strategy | plan-size delta | count |\n|---|---|---|\n");
            for (key, stats) in &self.replan {
                for (delta, count) in &stats.coarse {
                    md.push_str(&format!("| {key} | {delta} | {count} |\n"));
                }
            }
        }
        md
    }
}

#[cfg(test)]
mod tests {
    use super::super::test_support::transcript;
    use super::*;
    use crate::agent::{Strategy, Termination};
    use crate::genesis::question::{render, Target};
    use crate::model::{Database, Scenario};
    use crate::query::Dialect;

    fn tiny_dataset() -> Vec<Instance> {
        let world = crate::oracle::worked_example_world();
        vec![Instance {
            id: "loc-a".into(),
            scenario: Scenario::Locating,
            question: render(&Target::Locating {
                country: "BAH".into(),
                home: "Deccan".into(),
            }),
            gold: Some("Doab".into()),
            margin: Some(0.2),
            seed: 1,
            database: Database::Locating(world),
        }]
    }

    #[test]
    fn perfect_run_scores_full_accuracy() {
        let dataset = tiny_dataset();
        let ts = vec![transcript(
            "loc-a",
            Strategy::Iter,
            Dialect::Table,
            Some("Doab"),
            Termination::Answered,
            &[(true, &["IV", "TP_total"])],
        )];
        let report = build(&dataset, &ts).unwrap();
        assert_eq!(report.accuracy["Locating/iter/table"].accuracy, 1.0);
        assert_eq!(report.accuracy_avg_dialects["Locating/iter"], 1.0);
        assert_eq!(report.failures["Locating/iter"]["CORRECT"], 1);
        let total: usize = report.failures["Locating/iter"].values().sum();
        assert_eq!(total, 1);
    }

    #[test]
    fn empty_transcripts_is_missing() {
        let dataset = tiny_dataset();
        match build(&dataset, &[]) {
            Err(EvalError::MissingTranscripts { ids }) => assert_eq!(ids, vec!["loc-a"]),
            other => panic!("expected MissingTranscripts, got {other:?}"),
        }
    }

    #[test]
    fn partial_combo_coverage_is_missing() {
        let mut dataset = tiny_dataset();
        let mut second = dataset[0].clone();
        second.id = "loc-b".into();
        dataset.push(second);
        let ts = vec![transcript(
            "loc-a",
            Strategy::Iter,
            Dialect::Table,
            Some("Doab"),
            Termination::Answered,
            &[],
        )];
        match build(&dataset, &ts) {
            Err(EvalError::MissingTranscripts { ids }) => assert_eq!(ids, vec!["loc-b"]),
            other => panic!("expected MissingTranscripts, got {other:?}"),
        }
    }

    #[test]
    fn unknown_and_unannotated_instances_error() {
        let dataset = tiny_dataset();
        let ts = vec![transcript(
            "nope",
            Strategy::Iter,
            Dialect::Table,
            None,
            Termination::StepBudget,
            &[],
        )];
        assert!(matches!(
            build(&dataset, &ts),
            Err(EvalError::UnknownInstance(_))
        ));

        let mut unannotated = tiny_dataset();
        unannotated[0].gold = None;
        assert!(matches!(
            build(&unannotated, &[]),
            Err(EvalError::Unannotated(_))
        ));
    }

    #[test]
    fn accuracy_equals_mean_correctness() {
        let mut dataset = tiny_dataset();
        let mut second = dataset[0].clone();
        second.id = "loc-b".into();
        dataset.push(second);
        let ts = vec![
            transcript(
                "loc-a",
                Strategy::Iter,
                Dialect::Table,
                Some("Doab"),
                Termination::Answered,
                &[(true, &[])],
            ),
            transcript(
                "loc-b",
                Strategy::Iter,
                Dialect::Table,
                Some("Ganges"),
                Termination::Answered,
                &[(true, &[])],
            ),
        ];
        let report = build(&dataset, &ts).unwrap();
        let by_hand: f64 = ts
            .iter()
            .map(|t| {
                let inst = dataset.iter().find(|i| i.id == t.instance_id).unwrap();
                super::super::transcript_correct(t, inst) as usize as f64
            })
            .sum::<f64>()
            / ts.len() as f64;
        assert_eq!(report.accuracy["Locating/iter/table"].accuracy, by_hand);
    }

    #[test]
    fn markdown_includes_all_sections() {
        let dataset = tiny_dataset();
        let ts = vec![transcript(
            "loc-a",
            Strategy::Plan,
            Dialect::Graph,
            Some("Doab"),
            Termination::Answered,
            &[(true, &["IV", "TP_total"])],
        )];
        let report = build(&dataset, &ts).unwrap();
        let md = report.to_markdown();
        for heading in [
            "## Accuracy",
            "## Single vs multiple retrievals",
            "## Missed data analysis rate",
            "## Outcome histogram",
            "## Re-planning",
        ] {
            assert!(md.contains(heading), "missing {heading}");
        }
        // Deterministic bytes.
        assert_eq!(report.to_json(), build(&dataset, &ts).unwrap().to_json());
    }
}
