//! Prompt template assets and their renderers.
//!
//! The nine templates ship embedded in the binary (see `assets/`) and can
//! be overridden by a directory holding files with the same names. Each
//! template marks substitution points with `{}`; the refinement template
//! additionally uses three named block markers (`{incorrect atoms}`,
//! `{contexts for incorrect atoms}`, `{relations from contexts to incorrect
//! atoms}`), each on its own line, replaced by zero or more generated lines.

use std::path::Path;

use veracity_core::RelationKind;

/// Block markers recognized by [`render_refinement`], each of which must
/// appear in the refinement template followed by a newline.
const ATOMS_MARKER: &str = "{incorrect atoms}\n";
const CONTEXTS_MARKER: &str = "{contexts for incorrect atoms}\n";
const RELATIONS_MARKER: &str = "{relations from contexts to incorrect atoms}\n";

#[derive(Debug, thiserror::Error)]
pub enum PromptError {
    #[error("template expects {expected} `{{}}` markers but {found} values were supplied")]
    MarkerMismatch { expected: usize, found: usize },
    #[error("refinement template is missing its `{0}` marker line")]
    MissingMarker(&'static str),
    #[error("cannot load template {name}: {source}")]
    Load {
        name: &'static str,
        #[source]
        source: std::io::Error,
    },
}

/// The full set of prompts used across the pipeline, keyed by stage.
#[derive(Clone, Debug)]
pub struct TemplateSet {
    /// Semantic-equivalence judge; fills reference, candidate.
    pub judge: String,
    /// Internal-knowledge-only corrector baseline; fills question, answer.
    pub llm1: String,
    /// Context-only corrector baseline; fills question, contexts, answer,
    /// unverified atoms.
    pub llm2: String,
    /// Feedback-driven corrector; fills question plus the three block
    /// markers.
    pub refine: String,
    /// Adversarial response generator; fills question.
    pub synth_incorrect: String,
    /// Response decomposition; fills question, response.
    pub atomizer: String,
    /// Atom decontextualization; fills question, response, atom.
    pub reviser: String,
    /// Search-query generation; fills atom.
    pub query: String,
    /// Context–atom relation classification; fills context, atom.
    pub relations: String,
}

impl TemplateSet {
    /// The templates compiled into the binary.
    pub fn builtin() -> Self {
        TemplateSet {
            judge: String::from(include_str!("../assets/judge.txt")),
            llm1: String::from(include_str!("../assets/llm1.txt")),
            llm2: String::from(include_str!("../assets/llm2.txt")),
            refine: String::from(include_str!("../assets/refine.txt")),
            synth_incorrect: String::from(include_str!("../assets/synth_incorrect.txt")),
            atomizer: String::from(include_str!("../assets/atomizer.txt")),
            reviser: String::from(include_str!("../assets/reviser.txt")),
            query: String::from(include_str!("../assets/query.txt")),
            relations: String::from(include_str!("../assets/relations.txt")),
        }
    }

    /// Loads all nine templates from a directory of files named like the
    /// bundled assets (`judge.txt`, `llm1.txt`, ...).
    pub fn from_dir(dir: &Path) -> Result<Self, PromptError> {
        let read = |name: &'static str| -> Result<String, PromptError> {
            std::fs::read_to_string(dir.join(name))
                .map_err(|source| PromptError::Load { name, source })
        };
        Ok(TemplateSet {
            judge: read("judge.txt")?,
            llm1: read("llm1.txt")?,
            llm2: read("llm2.txt")?,
            refine: read("refine.txt")?,
            synth_incorrect: read("synth_incorrect.txt")?,
            atomizer: read("atomizer.txt")?,
            reviser: read("reviser.txt")?,
            query: read("query.txt")?,
            relations: read("relations.txt")?,
        })
    }

    /// Resolves a template-set identifier: `"default"` selects the bundled
    /// templates, anything else is treated as a directory of override files.
    pub fn resolve(spec: &str) -> Result<Self, PromptError> {
        if spec == "default" {
            Ok(TemplateSet::builtin())
        } else {
            TemplateSet::from_dir(Path::new(spec))
        }
    }
}

/// Replaces the template's `{}` markers with `values`, in order. The count
/// must match exactly.
pub fn fill(template: &str, values: &[&str]) -> Result<String, PromptError> {
    let parts: Vec<&str> = template.split("{}").collect();
    if parts.len() - 1 != values.len() {
        return Err(PromptError::MarkerMismatch {
            expected: parts.len() - 1,
            found: values.len(),
        });
    }
    let mut out = String::with_capacity(template.len());
    for (i, part) in parts.iter().enumerate() {
        out.push_str(part);
        if i < values.len() {
            out.push_str(values[i]);
        }
    }
    Ok(out)
}

pub fn render_judge(set: &TemplateSet, reference: &str, candidate: &str) -> Result<String, PromptError> {
    fill(&set.judge, &[reference, candidate])
}

pub fn render_llm1(set: &TemplateSet, question: &str, answer: &str) -> Result<String, PromptError> {
    fill(&set.llm1, &[question, answer])
}

/// Quotes each item on its own line, the layout the in-template examples
/// use for context and atom lists.
fn quoted_lines(items: &[&str]) -> String {
    items
        .iter()
        .map(|s| format!("\"{s}\""))
        .collect::<Vec<_>>()
        .join("\n")
}

pub fn render_llm2(
    set: &TemplateSet,
    question: &str,
    contexts: &[&str],
    answer: &str,
    unverified_atoms: &[&str],
) -> Result<String, PromptError> {
    fill(
        &set.llm2,
        &[question, &quoted_lines(contexts), answer, &quoted_lines(unverified_atoms)],
    )
}

pub fn render_synth_incorrect(set: &TemplateSet, question: &str) -> Result<String, PromptError> {
    fill(&set.synth_incorrect, &[question])
}

pub fn render_atomizer(set: &TemplateSet, question: &str, response: &str) -> Result<String, PromptError> {
    fill(&set.atomizer, &[question, response])
}

pub fn render_reviser(
    set: &TemplateSet,
    question: &str,
    response: &str,
    atom: &str,
) -> Result<String, PromptError> {
    fill(&set.reviser, &[question, response, atom])
}

pub fn render_query(set: &TemplateSet, atom: &str) -> Result<String, PromptError> {
    fill(&set.query, &[atom])
}

pub fn render_relations(set: &TemplateSet, context: &str, atom: &str) -> Result<String, PromptError> {
    fill(&set.relations, &[context, atom])
}

/// One atom judged false, with the evidence passages connected to it and
/// each edge's direction.
#[derive(Clone, Debug)]
pub struct IncorrectAtomBlock {
    pub text: String,
    /// (context text, relation kind); only non-neutral kinds are rendered.
    pub evidence: Vec<(String, RelationKind)>,
}

fn relation_label(kind: RelationKind) -> Option<&'static str> {
    match kind {
        RelationKind::Entail => Some("ENTAILMENT"),
        RelationKind::Contradict => Some("CONTRADICTION"),
        RelationKind::Neutral => None,
    }
}

/// Renders the feedback-driven correction prompt: the question replaces the
/// template's `{}`, and the three marker lines are replaced by the numbered
/// atom, context, and relation lines (`INCORRECT ATOM 1`, `CONTEXT 1-1 FOR
/// INCORRECT ATOM 1`, `RELATION FROM CONTEXT 1-1 TO INCORRECT ATOM 1`).
/// Unverified atoms are listed after the incorrect ones as removal
/// candidates and carry no evidence lines.
pub fn render_refinement(
    set: &TemplateSet,
    question: &str,
    incorrect: &[IncorrectAtomBlock],
    unverified: &[&str],
) -> Result<String, PromptError> {
    let mut atom_lines = Vec::new();
    let mut context_lines = Vec::new();
    let mut relation_lines = Vec::new();
    for (i, atom) in incorrect.iter().enumerate() {
        let i = i + 1;
        atom_lines.push(format!("INCORRECT ATOM {i}: \"{}\"", atom.text));
        let mut j = 0;
        for (context, kind) in &atom.evidence {
            let Some(label) = relation_label(*kind) else { continue };
            j += 1;
            context_lines.push(format!("CONTEXT {i}-{j} FOR INCORRECT ATOM {i}: \"{context}\""));
            relation_lines
                .push(format!("RELATION FROM CONTEXT {i}-{j} TO INCORRECT ATOM {i}: \"{label}\""));
        }
    }
    for (j, atom) in unverified.iter().enumerate() {
        atom_lines.push(format!("UNVERIFIED ATOM {}: \"{atom}\"", j + 1));
    }

    let template = fill(&set.refine, &[question])?;
    let mut out = template;
    for (marker, lines) in [
        (ATOMS_MARKER, atom_lines),
        (CONTEXTS_MARKER, context_lines),
        (RELATIONS_MARKER, relation_lines),
    ] {
        let position = out
            .find(marker)
            .ok_or(PromptError::MissingMarker(marker.trim_end()))?;
        let block = if lines.is_empty() {
            String::new()
        } else {
            let mut b = lines.join("\n");
            b.push('\n');
            b
        };
        out.replace_range(position..position + marker.len(), &block);
    }
    Ok(out)
}
