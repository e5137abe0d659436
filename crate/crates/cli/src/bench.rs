//! Offline benchmark harness: runs assessment or the correction loop over a
//! JSONL dataset with a bounded worker pool, isolates per-record failures,
//! and writes a reproducible set of run artifacts.
//!
//! A run directory holds:
//!
//! - `manifest.json` — what ran (dataset, store, mode, config, timestamp)
//! - `reports.jsonl` — one line per successfully processed record, in
//!   dataset order
//! - `errors.jsonl` — one line per malformed dataset line or failed record
//!   (always written; empty when the run is clean)
//! - `summary.jsonl` / `summary.tsv` — aggregate rows for the whole dataset
//!   and per origin (human / synthetic)
//! - correction runs only: `traces/NNNN-<id>.jsonl` (one JSON line per loop
//!   iteration, partial traces included for failed records),
//!   `precision_table.tsv` (per-record before/after precision), and
//!   `gains.json` (relative gains of the aggregate means)
//!
//! Re-running with the same inputs reproduces every artifact byte for byte
//! except the timestamp inside `manifest.json`.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use veracity_core::{
    aggregate, gain_report, relative_gain, AggregateSummary, AtomRecord, FactualityReport,
    GainReport, MetricError,
};

use crate::dataset::{load_dataset, DatasetError, DatasetRecord, Origin};
use crate::llm::{ClientConfig, IoError, IoMode, ServiceClient};
use crate::pipeline::{
    assess, run_correction_loop, CorrectionConfig, CorrectionTrace, PromptRefiner,
};
use crate::prompts::{PromptError, TemplateSet};

/// What the harness does with each record.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunKind {
    /// One factuality assessment per record.
    Assess,
    /// The full iterative correction loop per record.
    Correct,
}

/// Inputs of one benchmark run.
#[derive(Clone, Debug)]
pub struct RunOptions {
    pub kind: RunKind,
    pub dataset: PathBuf,
    pub out_dir: PathBuf,
    pub store: PathBuf,
    pub mode: IoMode,
    pub config: CorrectionConfig,
    /// Worker threads processing records; 0 is treated as 1.
    pub parallelism: usize,
}

/// The run's provenance, written to `manifest.json`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub kind: RunKind,
    pub dataset: String,
    pub store: String,
    pub out_dir: String,
    pub mode: IoMode,
    pub parallelism: usize,
    pub config: CorrectionConfig,
    /// Seconds since the Unix epoch; the only non-reproducible field of a
    /// run directory.
    pub started_at_unix: u64,
}

/// One line of `reports.jsonl`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RecordOutcome {
    /// Position in the dataset (0-based, counting only valid records).
    pub index: usize,
    pub id: String,
    pub origin: Origin,
    pub category: String,
    pub question: String,
    pub initial: FactualityReport,
    #[serde(rename = "final")]
    pub final_report: FactualityReport,
    /// Assessments performed (1 for plain assessment runs).
    pub iterations: usize,
    /// Assessments whose response was kept as the incumbent.
    pub accepted_iterations: usize,
    pub final_response: String,
    /// Labeled atoms of the final response.
    pub atoms: Vec<AtomRecord>,
}

/// One line of `errors.jsonl`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ErrorRecord {
    /// `"dataset"` for malformed input lines, `"record"` for processing
    /// failures.
    pub kind: String,
    /// 1-based dataset line for `"dataset"` errors, 0-based record index
    /// for `"record"` errors.
    pub index: usize,
    /// Empty for dataset errors.
    pub id: String,
    pub message: String,
    /// Loop iterations completed before the failure.
    pub iterations_completed: usize,
}

/// One aggregate row of `summary.jsonl` / `summary.tsv`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SummaryRow {
    /// `"all"`, `"human"`, or `"synthetic"`.
    pub subset: String,
    /// `"assessment"` for assessment runs; `"initial"` or `"final"` for
    /// correction runs.
    pub phase: String,
    #[serde(flatten)]
    pub summary: AggregateSummary,
}

/// What `run_benchmark` hands back to the caller.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub processed: usize,
    pub failed: usize,
    pub rows: Vec<SummaryRow>,
    pub out_dir: PathBuf,
}

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("{0}")]
    Dataset(#[from] DatasetError),
    #[error("{0}")]
    Prompt(#[from] PromptError),
    #[error("{0}")]
    Client(#[from] IoError),
    #[error("{0}")]
    Metric(#[from] MetricError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("failed to write {path}: {source}")]
    Output {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("failed to read {path}: {source}")]
    Input {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("malformed run artifact {path}: {message}")]
    Malformed { path: PathBuf, message: String },
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), HarnessError> {
    fs::write(path, bytes).map_err(|source| HarnessError::Output {
        path: path.to_path_buf(),
        source,
    })
}

fn json_line<T: Serialize>(value: &T) -> String {
    serde_json::to_string(value).expect("run artifacts serialize")
}

/// Replaces filesystem-hostile characters so record ids can name trace
/// files; the numeric prefix keeps names unique even when ids collide
/// after sanitization.
fn trace_file_name(index: usize, id: &str) -> String {
    let sanitized: String = id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect();
    format!("{index:04}-{sanitized}.jsonl")
}

struct RecordFailure {
    message: String,
    partial: Option<CorrectionTrace>,
}

type RecordResult = Result<(RecordOutcome, Option<CorrectionTrace>), RecordFailure>;

fn process_record(
    kind: RunKind,
    client: &ServiceClient,
    templates: &TemplateSet,
    config: &CorrectionConfig,
    index: usize,
    record: &DatasetRecord,
) -> RecordResult {
    let base = |report_initial: FactualityReport,
                report_final: FactualityReport,
                iterations: usize,
                accepted: usize,
                final_response: String,
                atoms: Vec<AtomRecord>| RecordOutcome {
        index,
        id: record.id.clone(),
        origin: record.origin,
        category: record.category.clone(),
        question: record.question.clone(),
        initial: report_initial,
        final_report: report_final,
        iterations,
        accepted_iterations: accepted,
        final_response,
        atoms,
    };
    match kind {
        RunKind::Assess => {
            let assessment = assess(client, templates, config, &record.question, &record.response)
                .map_err(|e| RecordFailure { message: e.to_string(), partial: None })?;
            Ok((
                base(
                    assessment.report.clone(),
                    assessment.report,
                    1,
                    1,
                    record.response.clone(),
                    assessment.atoms,
                ),
                None,
            ))
        }
        RunKind::Correct => {
            let refiner = PromptRefiner {
                client,
                templates,
                generation: &config.generation,
            };
            let trace = run_correction_loop(
                client,
                templates,
                config,
                &record.question,
                &record.response,
                &refiner,
            )
            .map_err(|e| RecordFailure {
                message: e.source.to_string(),
                partial: Some(e.partial),
            })?;
            let initial = trace.iterations[0].report.clone();
            let last_accepted = trace
                .iterations
                .iter()
                .filter(|i| i.accepted)
                .last()
                .expect("the initial iteration is always accepted");
            let accepted = trace.iterations.iter().filter(|i| i.accepted).count();
            Ok((
                base(
                    initial,
                    last_accepted.report.clone(),
                    trace.iterations.len(),
                    accepted,
                    trace.final_response.clone(),
                    last_accepted.atoms.clone(),
                ),
                Some(trace),
            ))
        }
    }
}

/// Aggregates the given phase of `outcomes` for the whole set and per
/// origin. Empty subsets are skipped (aggregation over nothing is
/// undefined).
fn summarize(
    outcomes: &[RecordOutcome],
    kind: RunKind,
) -> Result<Vec<SummaryRow>, MetricError> {
    let phases: &[(&str, fn(&RecordOutcome) -> &FactualityReport)] = match kind {
        RunKind::Assess => &[("assessment", |o| &o.final_report)],
        RunKind::Correct => &[("initial", |o| &o.initial), ("final", |o| &o.final_report)],
    };
    let subsets: [(&str, Option<Origin>); 3] = [
        ("all", None),
        ("human", Some(Origin::Human)),
        ("synthetic", Some(Origin::Synthetic)),
    ];
    let mut rows = Vec::new();
    for (subset, origin) in subsets {
        let selected: Vec<&RecordOutcome> = outcomes
            .iter()
            .filter(|o| origin.map_or(true, |wanted| o.origin == wanted))
            .collect();
        if selected.is_empty() {
            continue;
        }
        for (phase, pick) in phases {
            let mut reports: Vec<FactualityReport> =
                selected.iter().map(|o| pick(o).clone()).collect();
            let summary = aggregate(&mut reports)?;
            rows.push(SummaryRow {
                subset: String::from(subset),
                phase: String::from(*phase),
                summary,
            });
        }
    }
    Ok(rows)
}

/// Renders summary rows as a TSV table (shared by the run artifacts, the
/// `report` command, and callers that print a run's outcome).
pub fn render_summary_tsv(rows: &[SummaryRow]) -> String {
    let mut out = String::from(
        "subset\tphase\tcount\tk\tprecision_mean\tprecision_std\trecall_at_k_mean\t\
         recall_at_k_std\tf1_at_k_mean\tf1_at_k_std\tsupported_mean\tsupported_std\t\
         verifiability_mean\tverifiability_std\tcomprehensiveness_mean\tcomprehensiveness_std\n",
    );
    for row in rows {
        let s = &row.summary;
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\n",
            row.subset,
            row.phase,
            s.count,
            s.k,
            s.precision.mean,
            s.precision.std_dev,
            s.recall_at_k.mean,
            s.recall_at_k.std_dev,
            s.f1_at_k.mean,
            s.f1_at_k.std_dev,
            s.supported.mean,
            s.supported.std_dev,
            s.verifiability.mean,
            s.verifiability.std_dev,
            s.comprehensiveness.mean,
            s.comprehensiveness.std_dev,
        ));
    }
    out
}

fn render_precision_table(outcomes: &[RecordOutcome]) -> String {
    let mut out = String::from(
        "index\tid\torigin\tatoms_initial\tatoms_final\tprecision_initial\tprecision_final\tgain\n",
    );
    let mut before = Vec::new();
    let mut after = Vec::new();
    let mut gains = Vec::new();
    for o in outcomes {
        let gain = relative_gain(o.initial.precision, o.final_report.precision);
        before.push(o.initial.precision);
        after.push(o.final_report.precision);
        gains.push(gain);
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{:.6}\t{:.6}\t{:.6}\n",
            o.index,
            o.id,
            o.origin,
            o.initial.n_atoms,
            o.final_report.n_atoms,
            o.initial.precision,
            o.final_report.precision,
            gain,
        ));
    }
    if !outcomes.is_empty() {
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        out.push_str(&format!(
            "mean\t-\t-\t-\t-\t{:.6}\t{:.6}\t{:.6}\n",
            mean(&before),
            mean(&after),
            mean(&gains),
        ));
    }
    out
}

/// Runs the benchmark described by `options` and writes the run directory.
/// Individual record failures do not abort the run; they are reported in
/// `errors.jsonl` and in the returned `failed` count.
pub fn run_benchmark(options: &RunOptions) -> Result<RunOutcome, HarnessError> {
    options
        .config
        .validate()
        .map_err(|e| HarnessError::Config(e.to_string()))?;
    let templates = TemplateSet::resolve(&options.config.prompts)?;
    let (records, issues) = load_dataset(&options.dataset)?;
    let client_config = match options.mode {
        IoMode::Replay => ClientConfig::replay(&options.store),
        IoMode::Record => ClientConfig::record_from_env(&options.store),
    };
    let client = ServiceClient::new(client_config)?;

    fs::create_dir_all(&options.out_dir).map_err(|source| HarnessError::Output {
        path: options.out_dir.clone(),
        source,
    })?;
    let traces_dir = options.out_dir.join("traces");
    if options.kind == RunKind::Correct {
        fs::create_dir_all(&traces_dir).map_err(|source| HarnessError::Output {
            path: traces_dir.clone(),
            source,
        })?;
    }

    // Bounded worker pool: each worker claims the next unprocessed index.
    let slots: Vec<Mutex<Option<RecordResult>>> =
        records.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let workers = options.parallelism.max(1).min(records.len().max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= records.len() {
                    break;
                }
                let result = process_record(
                    options.kind,
                    &client,
                    &templates,
                    &options.config,
                    i,
                    &records[i],
                );
                *slots[i].lock().expect("no worker panics while holding the slot") =
                    Some(result);
            });
        }
    });

    let mut outcomes: Vec<RecordOutcome> = Vec::new();
    let mut errors: Vec<ErrorRecord> = issues
        .iter()
        .map(|issue| ErrorRecord {
            kind: String::from("dataset"),
            index: issue.line,
            id: String::new(),
            message: issue.message.clone(),
            iterations_completed: 0,
        })
        .collect();
    for (i, slot) in slots.into_iter().enumerate() {
        let result = slot
            .into_inner()
            .expect("slot mutex is never poisoned")
            .expect("every index below records.len() was processed");
        match result {
            Ok((outcome, trace)) => {
                if let Some(trace) = trace {
                    write_trace(&traces_dir, i, &records[i].id, &trace)?;
                }
                outcomes.push(outcome);
            }
            Err(failure) => {
                let iterations = failure.partial.as_ref().map_or(0, |t| t.iterations.len());
                if let Some(partial) = &failure.partial {
                    write_trace(&traces_dir, i, &records[i].id, partial)?;
                }
                errors.push(ErrorRecord {
                    kind: String::from("record"),
                    index: i,
                    id: records[i].id.clone(),
                    message: failure.message,
                    iterations_completed: iterations,
                });
            }
        }
    }

    let manifest = RunManifest {
        kind: options.kind,
        dataset: options.dataset.display().to_string(),
        store: options.store.display().to_string(),
        out_dir: options.out_dir.display().to_string(),
        mode: options.mode,
        parallelism: workers,
        config: options.config.clone(),
        started_at_unix: std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
    };
    write_file(
        &options.out_dir.join("manifest.json"),
        serde_json::to_vec_pretty(&manifest)
            .expect("manifest serializes")
            .as_slice(),
    )?;

    let reports_body: String = outcomes.iter().map(|o| json_line(o) + "\n").collect();
    write_file(&options.out_dir.join("reports.jsonl"), reports_body.as_bytes())?;
    let errors_body: String = errors.iter().map(|e| json_line(e) + "\n").collect();
    write_file(&options.out_dir.join("errors.jsonl"), errors_body.as_bytes())?;

    let rows = if outcomes.is_empty() { Vec::new() } else { summarize(&outcomes, options.kind)? };
    let summary_body: String = rows.iter().map(|r| json_line(r) + "\n").collect();
    write_file(&options.out_dir.join("summary.jsonl"), summary_body.as_bytes())?;
    write_file(
        &options.out_dir.join("summary.tsv"),
        render_summary_tsv(&rows).as_bytes(),
    )?;

    if options.kind == RunKind::Correct {
        write_file(
            &options.out_dir.join("precision_table.tsv"),
            render_precision_table(&outcomes).as_bytes(),
        )?;
        let initial_row = rows
            .iter()
            .find(|r| r.subset == "all" && r.phase == "initial");
        let final_row = rows.iter().find(|r| r.subset == "all" && r.phase == "final");
        let gains: Option<GainReport> = match (initial_row, final_row) {
            (Some(i), Some(f)) => Some(gain_report(&i.summary, &f.summary)),
            _ => None,
        };
        write_file(
            &options.out_dir.join("gains.json"),
            serde_json::to_vec_pretty(&gains)
                .expect("gains serialize")
                .as_slice(),
        )?;
    }

    Ok(RunOutcome {
        processed: outcomes.len(),
        failed: errors.len(),
        rows,
        out_dir: options.out_dir.clone(),
    })
}

fn write_trace(
    traces_dir: &Path,
    index: usize,
    id: &str,
    trace: &CorrectionTrace,
) -> Result<(), HarnessError> {
    let path = traces_dir.join(trace_file_name(index, id));
    let mut body = String::new();
    for iteration in &trace.iterations {
        body.push_str(&json_line(iteration));
        body.push('\n');
    }
    let mut file = fs::File::create(&path).map_err(|source| HarnessError::Output {
        path: path.clone(),
        source,
    })?;
    file.write_all(body.as_bytes())
        .map_err(|source| HarnessError::Output { path, source })
}

/// Loads `manifest.json` and `reports.jsonl` back from a run directory.
pub fn load_run(dir: &Path) -> Result<(RunManifest, Vec<RecordOutcome>), HarnessError> {
    let manifest_path = dir.join("manifest.json");
    let manifest_bytes = fs::read(&manifest_path).map_err(|source| HarnessError::Input {
        path: manifest_path.clone(),
        source,
    })?;
    let manifest: RunManifest =
        serde_json::from_slice(&manifest_bytes).map_err(|e| HarnessError::Malformed {
            path: manifest_path,
            message: e.to_string(),
        })?;
    let reports_path = dir.join("reports.jsonl");
    let reports_text =
        fs::read_to_string(&reports_path).map_err(|source| HarnessError::Input {
            path: reports_path.clone(),
            source,
        })?;
    let mut outcomes = Vec::new();
    for (line_no, line) in reports_text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let outcome: RecordOutcome =
            serde_json::from_str(line).map_err(|e| HarnessError::Malformed {
                path: reports_path.clone(),
                message: format!("line {}: {e}", line_no + 1),
            })?;
        outcomes.push(outcome);
    }
    Ok((manifest, outcomes))
}

/// Recomputes the aggregate summary of a finished run and renders it as a
/// human-readable report.
pub fn report_run(dir: &Path) -> Result<String, HarnessError> {
    let (manifest, outcomes) = load_run(dir)?;
    let errors_path = dir.join("errors.jsonl");
    let failed = match fs::read_to_string(&errors_path) {
        Ok(text) => text.lines().filter(|l| !l.trim().is_empty()).count(),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => 0,
        Err(source) => return Err(HarnessError::Input { path: errors_path, source }),
    };
    let rows = if outcomes.is_empty() {
        Vec::new()
    } else {
        summarize(&outcomes, manifest.kind)?
    };
    let mut out = String::new();
    out.push_str(&format!(
        "dataset: {}\nkind: {}\nrecords: {} ok, {} failed\n\n",
        manifest.dataset,
        match manifest.kind {
            RunKind::Assess => "assess",
            RunKind::Correct => "correct",
        },
        outcomes.len(),
        failed,
    ));
    out.push_str(&render_summary_tsv(&rows));
    let gains_path = dir.join("gains.json");
    if let Ok(bytes) = fs::read(&gains_path) {
        if let Ok(Some(gains)) = serde_json::from_slice::<Option<GainReport>>(&bytes) {
            out.push_str(&format!(
                "\nrelative gains (final vs initial, aggregate means):\n\
                 supported\t{:.6}\nprecision\t{:.6}\nrecall_at_k\t{:.6}\nf1_at_k\t{:.6}\n",
                gains.supported, gains.precision, gains.recall_at_k, gains.f1_at_k,
            ));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{
        seed_assessment, seed_refinement, snippet_hit, RelationReply, ScriptedAssessment,
        ScriptedAtom,
    };
    use crate::prompts::IncorrectAtomBlock;
    use std::collections::BTreeMap;
    use veracity_core::RelationKind;

    fn scripted_atom(text: &str, link: &str, snippet: &str) -> ScriptedAtom {
        ScriptedAtom {
            original: String::from(text),
            revised: String::from(text),
            query: format!("search {text}"),
            hits: vec![snippet_hit("t", link, snippet)],
        }
    }

    /// Two records: one passes immediately, one improves over a single
    /// refinement round.
    fn seed_two_record_run(store: &Path, config: &CorrectionConfig) -> Vec<DatasetRecord> {
        let templates = TemplateSet::builtin();
        let q1 = "q one?";
        let r1 = ScriptedAssessment {
            response: String::from("rec1 answer"),
            atoms: vec![scripted_atom("rec1 claim", "https://x.example/1", "confirms rec1")],
            relations: vec![RelationReply::new(
                "https://x.example/1",
                "rec1 claim",
                "RELATION: ENTAILMENT 0.9",
            )],
        };
        seed_assessment(store, &templates, config, q1, &r1).unwrap();

        let q2 = "q two?";
        let r2_initial = ScriptedAssessment {
            response: String::from("rec2 answer"),
            atoms: vec![
                scripted_atom("rec2 wrong claim", "https://x.example/2w", "refutes rec2"),
                scripted_atom("rec2 right claim", "https://x.example/2r", "confirms rec2"),
            ],
            relations: vec![
                RelationReply::new(
                    "https://x.example/2w",
                    "rec2 wrong claim",
                    "RELATION: CONTRADICTION 0.9",
                ),
                RelationReply::new(
                    "https://x.example/2r",
                    "rec2 right claim",
                    "RELATION: ENTAILMENT 0.9",
                ),
            ],
        };
        seed_assessment(store, &templates, config, q2, &r2_initial).unwrap();
        seed_refinement(
            store,
            &templates,
            config,
            q2,
            &[IncorrectAtomBlock {
                text: String::from("rec2 wrong claim"),
                evidence: vec![(String::from("refutes rec2"), RelationKind::Contradict)],
            }],
            &[],
            "rec2 fixed answer",
        )
        .unwrap();
        let r2_fixed = ScriptedAssessment {
            response: String::from("rec2 fixed answer"),
            atoms: vec![scripted_atom(
                "rec2 corrected claim",
                "https://x.example/2c",
                "confirms correction",
            )],
            relations: vec![RelationReply::new(
                "https://x.example/2c",
                "rec2 corrected claim",
                "RELATION: ENTAILMENT 0.9",
            )],
        };
        seed_assessment(store, &templates, config, q2, &r2_fixed).unwrap();

        vec![
            DatasetRecord {
                id: String::from("rec-1"),
                category: String::from("people"),
                question: String::from(q1),
                response: String::from("rec1 answer"),
                origin: Origin::Human,
                reference_correction: None,
            },
            DatasetRecord {
                id: String::from("rec-2"),
                category: String::from("places"),
                question: String::from(q2),
                response: String::from("rec2 answer"),
                origin: Origin::Synthetic,
                reference_correction: None,
            },
        ]
    }

    fn write_dataset(path: &Path, records: &[DatasetRecord]) {
        let body: String = records
            .iter()
            .map(|r| serde_json::to_string(r).unwrap() + "\n")
            .collect();
        fs::write(path, body).unwrap();
    }

    fn run_dir_files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
        let mut files = BTreeMap::new();
        let mut stack = vec![dir.to_path_buf()];
        while let Some(current) = stack.pop() {
            for entry in fs::read_dir(&current).unwrap() {
                let entry = entry.unwrap();
                let path = entry.path();
                if path.is_dir() {
                    stack.push(path);
                } else {
                    let rel = path.strip_prefix(dir).unwrap().display().to_string();
                    files.insert(rel, fs::read(&path).unwrap());
                }
            }
        }
        files
    }

    fn base_options(root: &Path, kind: RunKind, out: &str) -> RunOptions {
        RunOptions {
            kind,
            dataset: root.join("data.jsonl"),
            out_dir: root.join(out),
            store: root.join("store"),
            mode: IoMode::Replay,
            config: CorrectionConfig::default(),
            parallelism: 2,
        }
    }

    #[test]
    fn correction_run_writes_all_artifacts_in_record_order() {
        let dir = tempfile::tempdir().unwrap();
        let config = CorrectionConfig::default();
        let records = seed_two_record_run(&dir.path().join("store"), &config);
        write_dataset(&dir.path().join("data.jsonl"), &records);

        let options = base_options(dir.path(), RunKind::Correct, "run");
        let outcome = run_benchmark(&options).unwrap();
        assert_eq!(outcome.processed, 2);
        assert_eq!(outcome.failed, 0);

        let (manifest, outcomes) = load_run(&options.out_dir).unwrap();
        assert_eq!(manifest.kind, RunKind::Correct);
        assert_eq!(outcomes.len(), 2);
        assert_eq!(outcomes[0].id, "rec-1");
        assert_eq!(outcomes[1].id, "rec-2");
        assert_eq!(outcomes[0].iterations, 1);
        assert_eq!(outcomes[0].initial.precision, 1.0);
        assert_eq!(outcomes[1].iterations, 2);
        assert_eq!(outcomes[1].initial.precision, 0.5);
        assert_eq!(outcomes[1].final_report.precision, 1.0);
        assert_eq!(outcomes[1].final_response, "rec2 fixed answer");

        // Aggregate precision must equal the hand-computed mean.
        let all_final = outcome
            .rows
            .iter()
            .find(|r| r.subset == "all" && r.phase == "final")
            .unwrap();
        let hand_mean = (outcomes[0].final_report.precision
            + outcomes[1].final_report.precision)
            / 2.0;
        assert!((all_final.summary.precision.mean - hand_mean).abs() < 1e-12);

        // Origin stratification: one human row, one synthetic row per phase.
        assert!(outcome
            .rows
            .iter()
            .any(|r| r.subset == "human" && r.summary.count == 1));
        assert!(outcome
            .rows
            .iter()
            .any(|r| r.subset == "synthetic" && r.summary.count == 1));

        let files = run_dir_files(&options.out_dir);
        for expected in [
            "manifest.json",
            "reports.jsonl",
            "errors.jsonl",
            "summary.jsonl",
            "summary.tsv",
            "precision_table.tsv",
            "gains.json",
        ] {
            assert!(files.contains_key(expected), "missing {expected}");
        }
        assert!(files.keys().any(|k| k.starts_with("traces/0000-rec-1")));
        assert!(files.keys().any(|k| k.starts_with("traces/0001-rec-2")));
        assert_eq!(files.get("errors.jsonl").unwrap().len(), 0);

        let table = String::from_utf8(files.get("precision_table.tsv").unwrap().clone()).unwrap();
        assert!(table.contains("rec-2\tsynthetic\t2\t1\t0.500000\t1.000000"));
        assert!(table.lines().last().unwrap().starts_with("mean\t"));
    }

    #[test]
    fn reruns_are_byte_identical_except_the_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let config = CorrectionConfig::default();
        let records = seed_two_record_run(&dir.path().join("store"), &config);
        write_dataset(&dir.path().join("data.jsonl"), &records);

        let first = base_options(dir.path(), RunKind::Correct, "run-a");
        run_benchmark(&first).unwrap();
        let second = base_options(dir.path(), RunKind::Correct, "run-b");
        run_benchmark(&second).unwrap();

        let mut a = run_dir_files(&first.out_dir);
        let mut b = run_dir_files(&second.out_dir);
        a.remove("manifest.json");
        b.remove("manifest.json");
        assert_eq!(a.keys().collect::<Vec<_>>(), b.keys().collect::<Vec<_>>());
        for (name, bytes) in &a {
            assert_eq!(bytes, b.get(name).unwrap(), "artifact {name} differs between runs");
        }
    }

    #[test]
    fn record_failures_are_isolated_and_reported() {
        let dir = tempfile::tempdir().unwrap();
        let config = CorrectionConfig::default();
        let mut records = seed_two_record_run(&dir.path().join("store"), &config);
        // A record with no fixtures in the store: its assessment fails with
        // a replay miss, the others still complete.
        records.insert(
            1,
            DatasetRecord {
                id: String::from("rec-missing"),
                category: String::from("people"),
                question: String::from("unseeded question?"),
                response: String::from("unseeded response"),
                origin: Origin::Human,
                reference_correction: None,
            },
        );
        write_dataset(&dir.path().join("data.jsonl"), &records);

        let options = base_options(dir.path(), RunKind::Correct, "run");
        let outcome = run_benchmark(&options).unwrap();
        assert_eq!(outcome.processed, 2);
        assert_eq!(outcome.failed, 1);

        let errors_text =
            fs::read_to_string(options.out_dir.join("errors.jsonl")).unwrap();
        let error: ErrorRecord =
            serde_json::from_str(errors_text.lines().next().unwrap()).unwrap();
        assert_eq!(error.kind, "record");
        assert_eq!(error.id, "rec-missing");
        assert_eq!(error.index, 1);
        assert_eq!(error.iterations_completed, 0);
        assert!(error.message.contains("replay store has no entry"));

        let (_, outcomes) = load_run(&options.out_dir).unwrap();
        let ids: Vec<&str> = outcomes.iter().map(|o| o.id.as_str()).collect();
        assert_eq!(ids, vec!["rec-1", "rec-2"]);
    }

    #[test]
    fn malformed_dataset_lines_become_dataset_errors() {
        let dir = tempfile::tempdir().unwrap();
        let config = CorrectionConfig::default();
        let records = seed_two_record_run(&dir.path().join("store"), &config);
        let mut body = serde_json::to_string(&records[0]).unwrap() + "\n";
        body.push_str("{ not json\n");
        fs::write(dir.path().join("data.jsonl"), body).unwrap();

        let options = base_options(dir.path(), RunKind::Assess, "run");
        let outcome = run_benchmark(&options).unwrap();
        assert_eq!(outcome.processed, 1);
        assert_eq!(outcome.failed, 1);
        let errors_text =
            fs::read_to_string(options.out_dir.join("errors.jsonl")).unwrap();
        let error: ErrorRecord =
            serde_json::from_str(errors_text.lines().next().unwrap()).unwrap();
        assert_eq!(error.kind, "dataset");
        assert_eq!(error.index, 2);
    }

    #[test]
    fn assess_runs_emit_one_phase_and_no_correction_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        let config = CorrectionConfig::default();
        let records = seed_two_record_run(&dir.path().join("store"), &config);
        // Only the first record's initial assessment is needed here; assess
        // mode never refines, so rec-2's single assessment suffices too.
        write_dataset(&dir.path().join("data.jsonl"), &records);

        let options = base_options(dir.path(), RunKind::Assess, "run");
        let outcome = run_benchmark(&options).unwrap();
        assert_eq!(outcome.processed, 2);
        assert_eq!(outcome.failed, 0);
        assert!(outcome.rows.iter().all(|r| r.phase == "assessment"));
        let files = run_dir_files(&options.out_dir);
        assert!(!files.contains_key("precision_table.tsv"));
        assert!(!files.contains_key("gains.json"));
        assert!(files.keys().all(|k| !k.starts_with("traces/")));
        let (_, outcomes) = load_run(&options.out_dir).unwrap();
        assert_eq!(outcomes[1].iterations, 1);
        assert_eq!(outcomes[1].final_report.precision, 0.5);
        assert_eq!(outcomes[1].final_response, "rec2 answer");
        assert_eq!(outcomes[1].atoms.len(), 2);
    }

    #[test]
    fn report_recomputes_the_stored_summary() {
        let dir = tempfile::tempdir().unwrap();
        let config = CorrectionConfig::default();
        let records = seed_two_record_run(&dir.path().join("store"), &config);
        write_dataset(&dir.path().join("data.jsonl"), &records);
        let options = base_options(dir.path(), RunKind::Correct, "run");
        run_benchmark(&options).unwrap();

        let rendered = report_run(&options.out_dir).unwrap();
        let stored =
            fs::read_to_string(options.out_dir.join("summary.tsv")).unwrap();
        assert!(rendered.contains(&stored), "report must embed the stored summary table");
        assert!(rendered.contains("records: 2 ok, 0 failed"));
        assert!(rendered.contains("relative gains"));
    }

    #[test]
    fn trace_file_names_are_sanitized_and_unique() {
        assert_eq!(trace_file_name(3, "a/b c"), "0003-a_b_c.jsonl");
        assert_ne!(trace_file_name(1, "x"), trace_file_name(2, "x"));
    }
}
