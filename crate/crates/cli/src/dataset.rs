//! Dataset ingestion and construction utilities.
//!
//! The on-disk format is JSON Lines: one record per line, UTF-8, with the
//! field names of [`DatasetRecord`]. Malformed lines are skipped and
//! reported rather than failing the whole file; an input that yields zero
//! valid records is an error.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::llm::{GenerationRequest, IoError, ServiceClient};
use crate::pipeline::{GenerationOptions, StageError};
use crate::prompts::{render_synth_incorrect, TemplateSet};

/// Where a response came from: written by a person, or generated
/// adversarially to be factually wrong.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    Human,
    Synthetic,
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Origin::Human => f.write_str("human"),
            Origin::Synthetic => f.write_str("synthetic"),
        }
    }
}

/// One question/response instance of a benchmark dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub id: String,
    pub category: String,
    pub question: String,
    pub response: String,
    pub origin: Origin,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_correction: Option<String>,
}

/// A line that failed validation, kept for the error report.
#[derive(Clone, Debug, Serialize)]
pub struct LoadIssue {
    /// 1-based line number in the source file.
    pub line: usize,
    pub message: String,
}

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path} contains no valid records ({issues} lines rejected)")]
    Empty { path: String, issues: usize },
    #[error("canonical selection over an empty answer list")]
    NoAnswers,
}

/// Parses a JSONL dataset file. Valid records are returned in file order;
/// every rejected line becomes a [`LoadIssue`]. Blank lines are ignored.
pub fn load_dataset(path: &Path) -> Result<(Vec<DatasetRecord>, Vec<LoadIssue>), DatasetError> {
    let text = std::fs::read_to_string(path).map_err(|source| DatasetError::Read {
        path: path.display().to_string(),
        source,
    })?;
    let mut records = Vec::new();
    let mut issues = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<DatasetRecord>(line) {
            Ok(record) => {
                if record.question.trim().is_empty() {
                    issues.push(LoadIssue {
                        line: idx + 1,
                        message: String::from("question is empty"),
                    });
                } else if record.response.trim().is_empty() {
                    issues.push(LoadIssue {
                        line: idx + 1,
                        message: String::from("response is empty"),
                    });
                } else {
                    records.push(record);
                }
            }
            Err(e) => issues.push(LoadIssue { line: idx + 1, message: e.to_string() }),
        }
    }
    if records.is_empty() {
        return Err(DatasetError::Empty {
            path: path.display().to_string(),
            issues: issues.len(),
        });
    }
    Ok((records, issues))
}

/// Picks the canonical answer from scored candidates: highest score wins,
/// ties broken by earliest position.
pub fn select_canonical<'a>(answers: &'a [(String, i64)]) -> Result<&'a str, DatasetError> {
    let mut best: Option<(usize, i64)> = None;
    for (i, (_, score)) in answers.iter().enumerate() {
        match best {
            Some((_, top)) if *score <= top => {}
            _ => best = Some((i, *score)),
        }
    }
    best.map(|(i, _)| answers[i].0.as_str()).ok_or(DatasetError::NoAnswers)
}

/// Generates a deliberately incorrect answer for `question` using the
/// adversarial template; callers tag the result `origin = synthetic`.
pub fn synth_incorrect(
    client: &ServiceClient,
    templates: &TemplateSet,
    generation: &GenerationOptions,
    question: &str,
) -> Result<String, StageError> {
    if question.trim().is_empty() {
        return Err(StageError::Empty { what: "question" });
    }
    let prompt = render_synth_incorrect(templates, question)?;
    let text = client.generate(&GenerationRequest {
        model_name: generation.model_name.clone(),
        prompt,
        temperature: generation.temperature,
        max_tokens: generation.max_tokens,
        seed: generation.seed,
    })?;
    let out = text.trim();
    if out.is_empty() {
        return Err(StageError::Io(IoError::BadResponse(String::from(
            "adversarial generation returned empty text",
        ))));
    }
    Ok(String::from(out))
}
