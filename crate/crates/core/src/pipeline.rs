//! File-based pipeline stages behind the `dqa` CLI: generate a dataset,
//! annotate gold answers, run agents over it, and evaluate transcripts.
//!
//! Every stage is deterministic given its flags, input files, and (for
//! scripted backends) the script file. Commands never mutate their inputs
//! besides the documented in-place annotation of a dataset directory, and
//! all writes are atomic per file. Parallelism (`jobs`) spans instances
//! only; a single agent run stays sequential.

use crate::agent::{self, AgentConfig, HttpBackend, LmBackend, ScriptFile, Strategy, Transcript};
use crate::eval::{self, Report};
use crate::genesis::{self, GenConfig, GenError, ScalePreset};
use crate::model::{
    load_dataset, save_instance, write_atomic, Instance, Manifest, ManifestEntry, Scenario,
    REJECTED_DIR,
};
use crate::oracle::{self, Annotation};
use crate::query::Dialect;
use std::path::{Path, PathBuf};
use thiserror::Error;

/// Pipeline failures split by exit-code class: usage/config errors (exit 2)
/// versus data errors (exit 1).
#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
}

impl PipelineError {
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Usage(_) => 2,
            PipelineError::Data(_) => 1,
        }
    }
}

fn data_err(e: impl std::fmt::Display) -> PipelineError {
    PipelineError::Data(e.to_string())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScenarioSel {
    Locating,
    Building,
    Both,
}

impl ScenarioSel {
    fn scenarios(self) -> Vec<Scenario> {
        match self {
            ScenarioSel::Locating => vec![Scenario::Locating],
            ScenarioSel::Building => vec![Scenario::Building],
            ScenarioSel::Both => vec![Scenario::Locating, Scenario::Building],
        }
    }
}

#[derive(Debug, Clone)]
pub struct GenArgs {
    pub scenario: ScenarioSel,
    /// Instances per selected scenario.
    pub count: u32,
    pub seed: u64,
    pub scale: ScalePreset,
    pub out: PathBuf,
}

/// Generate `count` unannotated instances per selected scenario plus a
/// manifest. Deterministic in `(flags, seed)`: rerunning writes identical
/// bytes.
pub fn generate(args: &GenArgs) -> Result<Manifest, PipelineError> {
    if args.count == 0 {
        return Err(PipelineError::Usage("--count must be at least 1".into()));
    }
    std::fs::create_dir_all(&args.out).map_err(data_err)?;
    let mut entries = Vec::new();
    for scenario in args.scenario.scenarios() {
        let tag = match scenario {
            Scenario::Locating => 0u64,
            Scenario::Building => 1u64,
        };
        for k in 0..args.count as u64 {
            let seed = genesis::derive_seed(args.seed, (tag << 32) | k);
            let config = GenConfig::preset(scenario, args.scale, seed);
            let instance = genesis::generate(&config).map_err(|e| match e {
                GenError::Config(msg) => PipelineError::Usage(msg),
                other => data_err(other),
            })?;
            let file = save_instance(&args.out, &instance).map_err(data_err)?;
            entries.push(ManifestEntry {
                file,
                id: instance.id,
                scenario,
            });
        }
    }
    let manifest = Manifest::from_entries(entries, Vec::new());
    manifest.save(&args.out).map_err(data_err)?;
    Ok(manifest)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct AnnotateSummary {
    pub annotated: usize,
    pub rejected: usize,
    /// Already-annotated instances left untouched.
    pub skipped: usize,
}

/// Annotate every instance in a dataset directory in place. Ties and
/// degenerate single-candidate instances move to `rejected/` and leave the
/// manifest. Idempotent: annotated instances are skipped.
pub fn annotate(dir: &Path, jobs: usize) -> Result<AnnotateSummary, PipelineError> {
    let (manifest, instances) = load_dataset(dir).map_err(data_err)?;

    enum Outcome {
        Skipped(ManifestEntry),
        Annotated(ManifestEntry, Box<Instance>),
        Rejected(String),
    }

    let work =
        |(entry, mut instance): (ManifestEntry, Instance)| -> Result<Outcome, PipelineError> {
            if instance.is_annotated() {
                return Ok(Outcome::Skipped(entry));
            }
            match oracle::annotate_instance(&instance)
                .map_err(|e| PipelineError::Data(format!("annotating {}: {e}", entry.file)))?
            {
                Annotation::Annotated(label) if !label.degenerate => {
                    instance.gold = Some(label.gold);
                    instance.margin = Some(label.margin);
                    Ok(Outcome::Annotated(entry, Box::new(instance)))
                }
                _ => Ok(Outcome::Rejected(entry.file)),
            }
        };

    let inputs: Vec<(ManifestEntry, Instance)> =
        manifest.instances.iter().cloned().zip(instances).collect();
    let outcomes = if jobs <= 1 {
        inputs
            .into_iter()
            .map(work)
            .collect::<Result<Vec<_>, _>>()?
    } else {
        in_pool(jobs, || {
            use rayon::prelude::*;
            inputs
                .into_par_iter()
                .map(work)
                .collect::<Result<Vec<_>, _>>()
        })?
    };

    let mut summary = AnnotateSummary::default();
    let mut entries = Vec::new();
    let mut rejected = manifest.rejected.clone();
    for outcome in outcomes {
        match outcome {
            Outcome::Skipped(entry) => {
                summary.skipped += 1;
                entries.push(entry);
            }
            Outcome::Annotated(entry, instance) => {
                save_instance(dir, instance.as_ref()).map_err(data_err)?;
                summary.annotated += 1;
                entries.push(entry);
            }
            Outcome::Rejected(file) => {
                let rejected_dir = dir.join(REJECTED_DIR);
                std::fs::create_dir_all(&rejected_dir).map_err(data_err)?;
                std::fs::rename(dir.join(&file), rejected_dir.join(&file)).map_err(data_err)?;
                summary.rejected += 1;
                rejected.push(file);
            }
        }
    }
    Manifest::from_entries(entries, rejected)
        .save(dir)
        .map_err(data_err)?;
    Ok(summary)
}

#[derive(Debug, Clone)]
pub enum BackendSpec {
    Scripted(PathBuf),
    Http,
}

impl BackendSpec {
    /// Parse the CLI form: `scripted:FILE` or `http`.
    pub fn parse(spec: &str) -> Result<BackendSpec, PipelineError> {
        if spec == "http" {
            return Ok(BackendSpec::Http);
        }
        if let Some(path) = spec.strip_prefix("scripted:") {
            if path.is_empty() {
                return Err(PipelineError::Usage(
                    "scripted backend needs a file: scripted:FILE".into(),
                ));
            }
            return Ok(BackendSpec::Scripted(PathBuf::from(path)));
        }
        Err(PipelineError::Usage(format!(
            "unknown backend {spec:?}; expected scripted:FILE or http"
        )))
    }
}

#[derive(Debug, Clone)]
pub struct RunArgs {
    pub dataset: PathBuf,
    pub out: PathBuf,
    pub strategy: Strategy,
    pub dialect: Dialect,
    pub backend: BackendSpec,
    pub max_steps: u32,
    pub jobs: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunSummary {
    pub written: usize,
    /// Transcripts that already existed (resumed run).
    pub skipped: usize,
}

pub fn transcript_file_name(strategy: Strategy, dialect: Dialect, instance_id: &str) -> String {
    format!("{strategy}-{dialect}-{instance_id}.json")
}

/// Run one agent configuration over a dataset, one transcript JSON per
/// instance. Backend configuration is validated before any run starts, and
/// existing transcripts are skipped so interrupted runs resume.
pub fn run_agents(args: &RunArgs) -> Result<RunSummary, PipelineError> {
    if args.max_steps < 2 {
        return Err(PipelineError::Usage(
            "--max-steps must be at least 2".into(),
        ));
    }
    let (_, instances) = load_dataset(&args.dataset).map_err(data_err)?;

    // Fail fast on backend misconfiguration.
    let script = match &args.backend {
        BackendSpec::Scripted(path) => {
            Some(ScriptFile::load(path).map_err(|e| PipelineError::Usage(e.to_string()))?)
        }
        BackendSpec::Http => {
            HttpBackend::from_env().map_err(|e| PipelineError::Usage(e.to_string()))?;
            None
        }
    };

    std::fs::create_dir_all(&args.out).map_err(data_err)?;
    let config = AgentConfig {
        strategy: args.strategy,
        dialect: args.dialect,
        max_steps: args.max_steps,
        observation_char_cap: 2000,
    };

    let work = |instance: &Instance| -> Result<bool, PipelineError> {
        let file = transcript_file_name(args.strategy, args.dialect, &instance.id);
        let path = args.out.join(&file);
        if path.exists() {
            return Ok(false);
        }
        let mut backend: Box<dyn LmBackend> = match &script {
            Some(file) => Box::new(file.session(&instance.id)),
            None => {
                Box::new(HttpBackend::from_env().map_err(|e| PipelineError::Usage(e.to_string()))?)
            }
        };
        let transcript = agent::run(instance, backend.as_mut(), &config);
        write_atomic(&path, transcript.to_json().as_bytes()).map_err(data_err)?;
        Ok(true)
    };

    let results = if args.jobs <= 1 {
        instances.iter().map(work).collect::<Result<Vec<_>, _>>()?
    } else {
        in_pool(args.jobs, || {
            use rayon::prelude::*;
            instances
                .par_iter()
                .map(work)
                .collect::<Result<Vec<_>, _>>()
        })?
    };

    let written = results.iter().filter(|w| **w).count();
    Ok(RunSummary {
        written,
        skipped: results.len() - written,
    })
}

/// Load every transcript JSON under a directory (recursively), sorted by
/// path.
pub fn load_transcripts(dir: &Path) -> Result<Vec<Transcript>, PipelineError> {
    let mut files = Vec::new();
    collect_json_files(dir, &mut files)?;
    files.sort();
    let mut out = Vec::with_capacity(files.len());
    for path in files {
        let text = std::fs::read_to_string(&path)
            .map_err(|e| PipelineError::Data(format!("{}: {e}", path.display())))?;
        let t = Transcript::from_json(&text)
            .map_err(|e| PipelineError::Data(format!("{}: {e}", path.display())))?;
        out.push(t);
    }
    Ok(out)
}

fn collect_json_files(dir: &Path, out: &mut Vec<PathBuf>) -> Result<(), PipelineError> {
    let entries = std::fs::read_dir(dir)
        .map_err(|e| PipelineError::Data(format!("{}: {e}", dir.display())))?;
    for entry in entries {
        let entry = entry.map_err(data_err)?;
        let path = entry.path();
        if path.is_dir() {
            collect_json_files(&path, out)?;
        } else if path.extension().is_some_and(|e| e == "json") {
            out.push(path);
        }
    }
    Ok(())
}

/// Score a transcript directory against an annotated dataset, writing
/// `report.md` and `report.json` under `out`.
pub fn evaluate(dataset: &Path, transcripts: &Path, out: &Path) -> Result<Report, PipelineError> {
    let (_, instances) = load_dataset(dataset).map_err(data_err)?;
    let transcripts = load_transcripts(transcripts)?;
    let report = eval::report(&instances, &transcripts).map_err(data_err)?;
    std::fs::create_dir_all(out).map_err(data_err)?;
    write_atomic(&out.join("report.json"), report.to_json().as_bytes()).map_err(data_err)?;
    write_atomic(&out.join("report.md"), report.to_markdown().as_bytes()).map_err(data_err)?;
    Ok(report)
}

fn in_pool<T: Send>(
    jobs: usize,
    f: impl FnOnce() -> Result<Vec<T>, PipelineError> + Send,
) -> Result<Vec<T>, PipelineError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(data_err)?;
    pool.install(f)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gen_args(dir: &Path, scenario: ScenarioSel, count: u32, seed: u64) -> GenArgs {
        GenArgs {
            scenario,
            count,
            seed,
            scale: ScalePreset::Small,
            out: dir.to_path_buf(),
        }
    }

    fn dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
        let mut files = Vec::new();
        collect_json_files(dir, &mut files).unwrap();
        files.sort();
        files
            .into_iter()
            .map(|p| {
                (
                    p.strip_prefix(dir).unwrap().display().to_string(),
                    std::fs::read(&p).unwrap(),
                )
            })
            .collect()
    }

    /// Script that queries the required symbols and then answers with the
    /// instance's gold (or a wrong candidate).
    fn script_for(instances: &[Instance], correct: bool, plan_first: bool) -> ScriptFile {
        let mut file = ScriptFile::default();
        for inst in instances {
            let answer = if correct {
                inst.gold.clone().unwrap()
            } else {
                let ids = crate::eval::candidate_ids(inst);
                ids.iter()
                    .find(|c| Some(c.as_str()) != inst.gold.as_deref())
                    .cloned()
                    .unwrap_or_else(|| "nothing".into())
            };
            let steps = match inst.scenario {
                Scenario::Locating => vec![
                    "Thought: flows\nAction: query\nAction Input: SELECT dest, SUM(flow) FROM TradingFlow GROUP BY dest".to_string(),
                    "Thought: power\nAction: query\nAction Input: SELECT node, SUM(power) FROM NodeCountry GROUP BY node".to_string(),
                    format!("Final Answer: {answer}"),
                ],
                Scenario::Building => vec![
                    "Thought: output\nAction: query\nAction Input: SELECT goods, SUM(current_output) FROM Supply GROUP BY goods".to_string(),
                    "Thought: demand\nAction: query\nAction Input: SELECT code, pop_demand FROM Goods".to_string(),
                    format!("Final Answer: {answer}"),
                ],
            };
            let steps = if plan_first {
                let mut with_plan = vec![
                    "Plan:\n1. retrieve the critical quantities\n2. compare candidates\n3. answer"
                        .to_string(),
                ];
                with_plan.extend(steps);
                with_plan
            } else {
                steps
            };
            file.instances.insert(inst.id.clone(), steps);
        }
        file
    }

    #[test]
    fn generate_annotate_run_eval_round_trip() {
        let tmp = tempfile::tempdir().unwrap();
        let data = tmp.path().join("data");
        let manifest = generate(&gen_args(&data, ScenarioSel::Both, 2, 11)).unwrap();
        assert_eq!(manifest.instances.len(), 4);
        assert_eq!(manifest.counts["Locating"], 2);
        assert_eq!(manifest.counts["Building"], 2);

        let summary = annotate(&data, 1).unwrap();
        assert_eq!(summary.annotated, 4);
        assert_eq!(summary.rejected, 0);

        // Idempotent re-annotation.
        let again = annotate(&data, 1).unwrap();
        assert_eq!(again.skipped, 4);
        assert_eq!(again.annotated, 0);

        let (_, instances) = load_dataset(&data).unwrap();
        assert!(instances.iter().all(|i| i.is_annotated()));

        let script_path = tmp.path().join("script.json");
        std::fs::write(
            &script_path,
            serde_json::to_string(&script_for(&instances, true, false)).unwrap(),
        )
        .unwrap();

        let out = tmp.path().join("transcripts");
        let run = run_agents(&RunArgs {
            dataset: data.clone(),
            out: out.clone(),
            strategy: Strategy::Iter,
            dialect: Dialect::Table,
            backend: BackendSpec::Scripted(script_path),
            max_steps: 30,
            jobs: 1,
        })
        .unwrap();
        assert_eq!(run.written, 4);

        let report_dir = tmp.path().join("report");
        let report = evaluate(&data, &out, &report_dir).unwrap();
        assert_eq!(report.dataset_size, 4);
        assert_eq!(report.accuracy["Locating/iter/table"].accuracy, 1.0);
        assert_eq!(report.accuracy["Building/iter/table"].accuracy, 1.0);
        assert!(report_dir.join("report.json").exists());
        assert!(report_dir.join("report.md").exists());
    }

    #[test]
    fn generation_is_byte_identical_across_reruns() {
        let tmp = tempfile::tempdir().unwrap();
        let a = tmp.path().join("a");
        let b = tmp.path().join("b");
        generate(&gen_args(&a, ScenarioSel::Both, 2, 42)).unwrap();
        generate(&gen_args(&b, ScenarioSel::Both, 2, 42)).unwrap();
        assert_eq!(dir_bytes(&a), dir_bytes(&b));
    }

    #[test]
    fn runs_resume_without_rewriting() {
        let tmp = tempfile::tempdir().unwrap();
        let data = tmp.path().join("data");
        generate(&gen_args(&data, ScenarioSel::Locating, 2, 3)).unwrap();
        annotate(&data, 1).unwrap();
        let (_, instances) = load_dataset(&data).unwrap();
        let script_path = tmp.path().join("script.json");
        std::fs::write(
            &script_path,
            serde_json::to_string(&script_for(&instances, true, false)).unwrap(),
        )
        .unwrap();
        let out = tmp.path().join("t");
        let args = RunArgs {
            dataset: data.clone(),
            out: out.clone(),
            strategy: Strategy::Single,
            dialect: Dialect::Table,
            backend: BackendSpec::Scripted(script_path),
            max_steps: 30,
            jobs: 1,
        };
        let first = run_agents(&args).unwrap();
        assert_eq!(first.written, 2);
        // Drop one transcript; only that one is reproduced.
        let victim = out.join(transcript_file_name(
            Strategy::Single,
            Dialect::Table,
            &instances[0].id,
        ));
        std::fs::remove_file(&victim).unwrap();
        let second = run_agents(&args).unwrap();
        assert_eq!(second.written, 1);
        assert_eq!(second.skipped, 1);
    }

    #[test]
    fn http_backend_without_env_is_usage_error() {
        let tmp = tempfile::tempdir().unwrap();
        let data = tmp.path().join("data");
        generate(&gen_args(&data, ScenarioSel::Locating, 1, 5)).unwrap();
        std::env::remove_var(agent::ENV_ENDPOINT);
        std::env::remove_var(agent::ENV_MODEL);
        std::env::remove_var(agent::ENV_API_KEY);
        let err = run_agents(&RunArgs {
            dataset: data,
            out: tmp.path().join("t"),
            strategy: Strategy::Iter,
            dialect: Dialect::Table,
            backend: BackendSpec::Http,
            max_steps: 30,
            jobs: 1,
        })
        .unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn corrupted_instance_is_a_data_error() {
        let tmp = tempfile::tempdir().unwrap();
        let data = tmp.path().join("data");
        generate(&gen_args(&data, ScenarioSel::Locating, 1, 5)).unwrap();
        let manifest = Manifest::load(&data).unwrap();
        let victim = data.join(&manifest.instances[0].file);
        std::fs::write(&victim, b"{ not json").unwrap();
        let err = annotate(&data, 1).unwrap_err();
        assert_eq!(err.exit_code(), 1);
    }

    #[test]
    fn backend_spec_parsing() {
        assert!(matches!(BackendSpec::parse("http"), Ok(BackendSpec::Http)));
        assert!(matches!(
            BackendSpec::parse("scripted:foo.json"),
            Ok(BackendSpec::Scripted(_))
        ));
        assert!(BackendSpec::parse("scripted:").is_err());
        assert!(BackendSpec::parse("llm").is_err());
    }

    #[test]
    fn scripted_pipeline_is_deterministic_end_to_end() {
        let tmp = tempfile::tempdir().unwrap();
        let mut outputs = Vec::new();
        for side in ["x", "y"] {
            let data = tmp.path().join(side).join("data");
            generate(&gen_args(&data, ScenarioSel::Locating, 2, 42)).unwrap();
            annotate(&data, 1).unwrap();
            let (_, instances) = load_dataset(&data).unwrap();
            let script_path = tmp.path().join(side).join("script.json");
            std::fs::write(
                &script_path,
                serde_json::to_string(&script_for(&instances, true, true)).unwrap(),
            )
            .unwrap();
            let transcripts = tmp.path().join(side).join("t");
            run_agents(&RunArgs {
                dataset: data.clone(),
                out: transcripts.clone(),
                strategy: Strategy::Plan,
                dialect: Dialect::Table,
                backend: BackendSpec::Scripted(script_path),
                max_steps: 30,
                jobs: 2,
            })
            .unwrap();
            let report_dir = tmp.path().join(side).join("report");
            evaluate(&data, &transcripts, &report_dir).unwrap();
            outputs.push((
                dir_bytes(&data),
                dir_bytes(&transcripts),
                std::fs::read(report_dir.join("report.json")).unwrap(),
            ));
        }
        assert_eq!(outputs[0], outputs[1]);
    }
}
