//! The assessment stages (decompose → revise → retrieve → relate → infer →
//! label → score) and the iterative correction loop built on top of them,
//! plus the two single-shot corrector baselines.

use serde::{Deserialize, Serialize};

use veracity_core::{
    build_model, build_report, label_atoms, merge_duplicate_contexts, min_fill_order,
    wmb_marginals, AtomLabel, AtomRecord, BuildError, ContextRecord, FactualityReport,
    GraphicalModel, InferenceConfig, InferenceMode, MetricError, ModelError, PriorConfig,
    RelationKind, RelationRecord,
};

use crate::llm::{GenerationRequest, IoError, ServiceClient, DEFAULT_K};
use crate::prompts::{
    render_atomizer, render_llm1, render_llm2, render_query, render_refinement, render_relations,
    render_reviser, IncorrectAtomBlock, PromptError, TemplateSet,
};

/// Sampling parameters shared by every generation call in a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenerationOptions {
    pub model_name: String,
    pub temperature: f64,
    pub max_tokens: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl Default for GenerationOptions {
    fn default() -> Self {
        GenerationOptions {
            model_name: String::from("gpt-4o-mini"),
            temperature: 0.0,
            max_tokens: 1024,
            seed: None,
        }
    }
}

impl GenerationOptions {
    fn request(&self, prompt: String) -> GenerationRequest {
        GenerationRequest {
            model_name: self.model_name.clone(),
            prompt,
            temperature: self.temperature,
            max_tokens: self.max_tokens,
            seed: self.seed,
        }
    }
}

/// Knobs of the correction loop.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorrectionConfig {
    /// Precision threshold: the loop stops once the accepted response
    /// reaches it. In [0, 1].
    pub theta: f64,
    /// Cap on refinement rounds.
    pub max_iterations: usize,
    /// Search results requested per atom.
    pub k_contexts: usize,
    /// Scope cap of the approximate-inference engine.
    pub ibound: usize,
    /// Template-set identifier: "default" for the bundled assets, otherwise
    /// a directory path holding override files.
    pub prompts: String,
    pub generation: GenerationOptions,
    pub priors: PriorConfig,
}

impl Default for CorrectionConfig {
    fn default() -> Self {
        CorrectionConfig {
            theta: 0.95,
            max_iterations: 3,
            k_contexts: DEFAULT_K,
            ibound: veracity_core::DEFAULT_IBOUND,
            prompts: String::from("default"),
            generation: GenerationOptions::default(),
            priors: PriorConfig::default(),
        }
    }
}

impl CorrectionConfig {
    pub fn validate(&self) -> Result<(), StageError> {
        if !(0.0..=1.0).contains(&self.theta) {
            return Err(StageError::Config("theta must be in [0, 1]"));
        }
        if self.max_iterations == 0 {
            return Err(StageError::Config("max_iterations must be positive"));
        }
        if self.k_contexts == 0 {
            return Err(StageError::Config("k_contexts must be positive"));
        }
        if self.ibound == 0 {
            return Err(StageError::Config("ibound must be positive"));
        }
        Ok(())
    }
}

/// Errors from any pipeline stage.
#[derive(Debug, thiserror::Error)]
pub enum StageError {
    #[error("{0}")]
    Io(#[from] IoError),
    #[error("{0}")]
    Prompt(#[from] PromptError),
    #[error("{0}")]
    Build(#[from] BuildError),
    #[error("{0}")]
    Model(#[from] ModelError),
    #[error("{0}")]
    Metric(#[from] MetricError),
    #[error("{what} must be non-empty")]
    Empty { what: &'static str },
    #[error("invalid configuration: {0}")]
    Config(&'static str),
    #[error("unparseable {stage} output: {message}; raw text: {raw:?}")]
    Format {
        stage: &'static str,
        message: String,
        raw: String,
    },
    #[error("{stage} stage failed: {source}")]
    At {
        stage: &'static str,
        #[source]
        source: Box<StageError>,
    },
}

impl StageError {
    /// Tags the error with the stage it escaped from, once.
    fn at(self, stage: &'static str) -> StageError {
        match self {
            StageError::At { .. } => self,
            other => StageError::At { stage, source: Box::new(other) },
        }
    }
}

/// Splits a response into atomic claims via the decomposition prompt. Atoms
/// are the lines of the completion that start with `- `, in order, with ids
/// `a1`, `a2`, ...
pub fn atomize(
    client: &ServiceClient,
    templates: &TemplateSet,
    generation: &GenerationOptions,
    question: &str,
    response: &str,
) -> Result<Vec<AtomRecord>, StageError> {
    if response.trim().is_empty() {
        return Err(StageError::Empty { what: "response" });
    }
    let prompt = render_atomizer(templates, question, response)?;
    let text = client.generate(&generation.request(prompt))?;
    let mut atoms = Vec::new();
    for line in text.lines() {
        if let Some(rest) = line.trim_start().strip_prefix("- ") {
            let claim = rest.trim();
            if !claim.is_empty() {
                atoms.push(AtomRecord::new(&format!("a{}", atoms.len() + 1), claim));
            }
        }
    }
    if atoms.is_empty() {
        return Err(StageError::Format {
            stage: "atomize",
            message: String::from("no `- ` fact lines found"),
            raw: text,
        });
    }
    Ok(atoms)
}

/// Rewrites each atom to be self-contained (names resolved, pronouns
/// replaced) via one rewrite call per atom. Atom count is preserved.
pub fn revise(
    client: &ServiceClient,
    templates: &TemplateSet,
    generation: &GenerationOptions,
    question: &str,
    response: &str,
    mut atoms: Vec<AtomRecord>,
) -> Result<Vec<AtomRecord>, StageError> {
    for atom in &mut atoms {
        let prompt = render_reviser(templates, question, response, &atom.original_text)?;
        let text = client.generate(&generation.request(prompt))?;
        let revised = text.trim().trim_start_matches("REVISED ATOM:").trim();
        if revised.is_empty() {
            return Err(StageError::Format {
                stage: "revise",
                message: format!("empty rewrite for atom {}", atom.id),
                raw: text,
            });
        }
        atom.revised_text = String::from(revised);
    }
    Ok(atoms)
}

/// Generates one search query per atom, runs it, and pools the hits into
/// contexts (ids `c1`, `c2`, ... in discovery order), dropping duplicate
/// (link, snippet) pairs across atoms.
pub fn retrieve_contexts(
    client: &ServiceClient,
    templates: &TemplateSet,
    config: &CorrectionConfig,
    atoms: &[AtomRecord],
) -> Result<Vec<ContextRecord>, StageError> {
    let mut contexts: Vec<ContextRecord> = Vec::new();
    for atom in atoms {
        let prompt = render_query(templates, atom.text())?;
        let text = client.generate(&config.generation.request(prompt))?;
        let query = text
            .lines()
            .map(|l| l.trim().trim_start_matches("QUERY:").trim())
            .find(|l| !l.is_empty())
            .unwrap_or("");
        if query.is_empty() {
            return Err(StageError::Format {
                stage: "retrieve_contexts",
                message: format!("empty search query for atom {}", atom.id),
                raw: text,
            });
        }
        for hit in client.search(query, config.k_contexts)? {
            let duplicate = contexts
                .iter()
                .any(|c| c.link == hit.link && c.snippet == hit.snippet);
            if duplicate {
                continue;
            }
            contexts.push(ContextRecord::new(
                &format!("c{}", contexts.len() + 1),
                &hit.title,
                &hit.link,
                &hit.snippet,
                &hit.fetched_body,
                config.priors.reliable_context_prior,
            ));
        }
    }
    Ok(contexts)
}

/// Parses a relation classification like `RELATION: ENTAILMENT 0.95` (the
/// leading tag is optional). The probability must land in (0, 1].
fn parse_relation(text: &str) -> Option<(RelationKind, f64)> {
    let upper = text.to_uppercase();
    let (kind, position, token_len) = [
        ("ENTAILMENT", RelationKind::Entail),
        ("CONTRADICTION", RelationKind::Contradict),
        ("NEUTRAL", RelationKind::Neutral),
    ]
    .iter()
    .filter_map(|(token, kind)| upper.find(token).map(|pos| (*kind, pos, token.len())))
    .min_by_key(|(_, pos, _)| *pos)?;
    let rest = &text[position + token_len..];
    // The first number after the label, tolerating sentence punctuation
    // such as a trailing period ("... probability 0.9.").
    let p = rest
        .split(|c: char| !(c.is_ascii_digit() || c == '.'))
        .filter(|tok| !tok.is_empty())
        .find_map(|tok| tok.trim_end_matches('.').parse::<f64>().ok())?;
    if p > 0.0 && p <= 1.0 {
        Some((kind, p))
    } else {
        None
    }
}

/// Classifies every (context, atom) pair as entailment, contradiction, or
/// neutral with a confidence, one call per pair.
pub fn extract_relations(
    client: &ServiceClient,
    templates: &TemplateSet,
    generation: &GenerationOptions,
    atoms: &[AtomRecord],
    contexts: &[ContextRecord],
) -> Result<Vec<RelationRecord>, StageError> {
    if atoms.is_empty() {
        return Err(StageError::Empty { what: "atoms" });
    }
    let mut relations = Vec::with_capacity(atoms.len() * contexts.len());
    for context in contexts {
        for atom in atoms {
            let prompt = render_relations(templates, context.text(), atom.text())?;
            let text = client.generate(&generation.request(prompt))?;
            let Some((kind, p)) = parse_relation(&text) else {
                return Err(StageError::Format {
                    stage: "extract_relations",
                    message: format!(
                        "no relation label with in-range probability for ({}, {})",
                        context.id, atom.id
                    ),
                    raw: text,
                });
            };
            relations.push(RelationRecord {
                source_id: context.id.clone(),
                target_id: atom.id.clone(),
                kind,
                p,
            });
        }
    }
    Ok(relations)
}

/// Everything one factuality assessment produces.
#[derive(Clone, Debug)]
pub struct Assessment {
    /// Atoms with posterior and label filled in.
    pub atoms: Vec<AtomRecord>,
    pub contexts: Vec<ContextRecord>,
    pub relations: Vec<RelationRecord>,
    pub model: GraphicalModel,
    pub report: FactualityReport,
}

/// Runs the full assessment: decompose, revise, retrieve, relate, build the
/// model, infer posteriors, label, and score.
pub fn assess(
    client: &ServiceClient,
    templates: &TemplateSet,
    config: &CorrectionConfig,
    question: &str,
    response: &str,
) -> Result<Assessment, StageError> {
    config.validate()?;
    let atoms = atomize(client, templates, &config.generation, question, response)
        .map_err(|e| e.at("atomize"))?;
    let atoms = revise(client, templates, &config.generation, question, response, atoms)
        .map_err(|e| e.at("revise"))?;
    let contexts =
        retrieve_contexts(client, templates, config, &atoms).map_err(|e| e.at("retrieve_contexts"))?;
    let relations = extract_relations(client, templates, &config.generation, &atoms, &contexts)
        .map_err(|e| e.at("extract_relations"))?;
    let (contexts, relations) = merge_duplicate_contexts(&contexts, &relations);

    let mut atoms = atoms;
    let model = build_model(&atoms, &contexts, &relations, &config.priors)
        .map_err(|e| StageError::from(e).at("build_model"))?;
    let order = min_fill_order(&model);
    let inference = InferenceConfig {
        ibound: config.ibound,
        mode: InferenceMode::WeightedMiniBucket,
    };
    let marginals = wmb_marginals(&model, &order, &inference)
        .map_err(|e| StageError::from(e).at("inference"))?;
    label_atoms(&marginals, &model, &mut atoms).map_err(|e| StageError::from(e).at("label"))?;
    let labels: Vec<AtomLabel> = atoms.iter().map(|a| a.label).collect();
    let report =
        build_report(&labels, &model).map_err(|e| StageError::from(e).at("report"))?;
    Ok(Assessment { atoms, contexts, relations, model, report })
}

/// One evidence edge attached to a false atom.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvidenceEdge {
    pub context_id: String,
    pub atom_id: String,
    pub kind: RelationKind,
    pub p: f64,
}

/// What the corrector gets to see: the atoms judged False or Unverified,
/// and for each False atom the evidence passages connected to it in the
/// model with each edge's direction and strength.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Feedback {
    pub flagged: Vec<AtomRecord>,
    pub evidence: Vec<EvidenceEdge>,
}

impl Feedback {
    pub fn is_empty(&self) -> bool {
        self.flagged.is_empty()
    }
}

/// Collects the False/Unverified atoms and, for False atoms only, their
/// model-adjacent evidence edges. Unverified atoms are removal candidates
/// and carry no evidence requirement.
pub fn build_feedback(
    atoms: &[AtomRecord],
    model: &GraphicalModel,
    contexts: &[ContextRecord],
    relations: &[RelationRecord],
) -> Feedback {
    let flagged: Vec<AtomRecord> = atoms
        .iter()
        .filter(|a| matches!(a.label, AtomLabel::False | AtomLabel::Unverified))
        .cloned()
        .collect();
    let mut evidence = Vec::new();
    for relation in relations {
        if relation.kind == RelationKind::Neutral {
            continue;
        }
        let target_is_false = flagged
            .iter()
            .any(|a| a.label == AtomLabel::False && a.id == relation.target_id);
        if !target_is_false {
            continue;
        }
        if !contexts.iter().any(|c| c.id == relation.source_id) {
            continue;
        }
        let adjacent = match (
            model.variable_by_source(&relation.source_id),
            model.variable_by_source(&relation.target_id),
        ) {
            (Some(source), Some(target)) => model
                .factors()
                .iter()
                .any(|f| f.arity() == 2 && f.scope().contains(&source) && f.scope().contains(&target)),
            _ => false,
        };
        if adjacent {
            evidence.push(EvidenceEdge {
                context_id: relation.source_id.clone(),
                atom_id: relation.target_id.clone(),
                kind: relation.kind,
                p: relation.p,
            });
        }
    }
    Feedback { flagged, evidence }
}

/// Renders the feedback into the correction prompt and returns the model's
/// corrected answer.
pub fn refine(
    client: &ServiceClient,
    templates: &TemplateSet,
    generation: &GenerationOptions,
    question: &str,
    feedback: &Feedback,
    contexts: &[ContextRecord],
) -> Result<String, StageError> {
    if feedback.is_empty() {
        return Err(StageError::Empty { what: "feedback" });
    }
    let mut incorrect = Vec::new();
    let mut unverified = Vec::new();
    for atom in &feedback.flagged {
        match atom.label {
            AtomLabel::False => {
                let evidence = feedback
                    .evidence
                    .iter()
                    .filter(|e| e.atom_id == atom.id)
                    .filter_map(|e| {
                        contexts
                            .iter()
                            .find(|c| c.id == e.context_id)
                            .map(|c| (String::from(c.text()), e.kind))
                    })
                    .collect();
                incorrect.push(IncorrectAtomBlock { text: String::from(atom.text()), evidence });
            }
            _ => unverified.push(atom.text()),
        }
    }
    let prompt = render_refinement(templates, question, &incorrect, &unverified)?;
    let text = client.generate(&generation.request(prompt))?;
    let answer = text.trim().trim_start_matches("CORRECTED ANSWER:").trim();
    if answer.is_empty() {
        return Err(StageError::Format {
            stage: "refine",
            message: String::from("empty corrected answer"),
            raw: text,
        });
    }
    Ok(String::from(answer))
}

/// Produces a correction candidate from feedback. The loop is generic over
/// this so tests can plug in stubs; production uses [`PromptRefiner`].
pub trait Refiner {
    fn refine(
        &self,
        question: &str,
        response: &str,
        feedback: &Feedback,
        contexts: &[ContextRecord],
    ) -> Result<String, StageError>;
}

/// The production refiner: the feedback-driven correction prompt.
pub struct PromptRefiner<'a> {
    pub client: &'a ServiceClient,
    pub templates: &'a TemplateSet,
    pub generation: &'a GenerationOptions,
}

impl Refiner for PromptRefiner<'_> {
    fn refine(
        &self,
        question: &str,
        _response: &str,
        feedback: &Feedback,
        contexts: &[ContextRecord],
    ) -> Result<String, StageError> {
        refine(self.client, self.templates, self.generation, question, feedback, contexts)
    }
}

/// One assessed response inside a correction trace.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceIteration {
    pub response: String,
    pub report: FactualityReport,
    /// Labeled atoms of this response.
    pub atoms: Vec<AtomRecord>,
    pub feedback: Feedback,
    /// True exactly when this response's precision strictly exceeds the
    /// best accepted precision before it (the initial entry is the
    /// incumbent and is always accepted).
    pub accepted: bool,
}

/// The full history of one correction run.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CorrectionTrace {
    pub iterations: Vec<TraceIteration>,
    pub final_response: String,
}

/// A stage failure mid-loop, carrying whatever the loop had established.
#[derive(Debug, thiserror::Error)]
#[error("correction loop aborted: {source}")]
pub struct LoopError {
    #[source]
    pub source: StageError,
    pub partial: CorrectionTrace,
}

/// Iteratively assesses and corrects `response` until its precision
/// reaches `theta`, a candidate fails to improve, or `max_iterations`
/// refinement rounds have run. A candidate is accepted only when its
/// precision strictly exceeds the incumbent's, so the accepted precision
/// sequence is strictly increasing and the final response never scores
/// below the original.
pub fn run_correction_loop(
    client: &ServiceClient,
    templates: &TemplateSet,
    config: &CorrectionConfig,
    question: &str,
    response: &str,
    refiner: &dyn Refiner,
) -> Result<CorrectionTrace, LoopError> {
    let mut trace = CorrectionTrace {
        iterations: Vec::new(),
        final_response: String::from(response),
    };
    let fail = |source: StageError, trace: &CorrectionTrace| LoopError {
        source,
        partial: trace.clone(),
    };

    let initial = assess(client, templates, config, question, response)
        .map_err(|e| fail(e, &trace))?;
    let mut best_feedback =
        build_feedback(&initial.atoms, &initial.model, &initial.contexts, &initial.relations);
    let mut best_report = initial.report.clone();
    let mut best_response = String::from(response);
    let mut best_contexts = initial.contexts;
    trace.iterations.push(TraceIteration {
        response: best_response.clone(),
        report: best_report.clone(),
        atoms: initial.atoms,
        feedback: best_feedback.clone(),
        accepted: true,
    });

    let mut rounds = 0;
    while rounds < config.max_iterations && best_report.precision < config.theta {
        if best_feedback.is_empty() {
            break;
        }
        let candidate = refiner
            .refine(question, &best_response, &best_feedback, &best_contexts)
            .map_err(|e| fail(e, &trace))?;
        rounds += 1;
        let assessment = assess(client, templates, config, question, &candidate)
            .map_err(|e| fail(e, &trace))?;
        let feedback = build_feedback(
            &assessment.atoms,
            &assessment.model,
            &assessment.contexts,
            &assessment.relations,
        );
        let accepted = assessment.report.precision > best_report.precision;
        let Assessment { atoms, contexts, report, .. } = assessment;
        trace.iterations.push(TraceIteration {
            response: candidate.clone(),
            report: report.clone(),
            atoms,
            feedback: feedback.clone(),
            accepted,
        });
        if !accepted {
            break;
        }
        best_report = report;
        best_response = candidate;
        best_feedback = feedback;
        best_contexts = contexts;
    }

    trace.final_response = best_response;
    Ok(trace)
}

/// Corrects using only the model's internal knowledge (no retrieval).
pub fn baseline_llm1(
    client: &ServiceClient,
    templates: &TemplateSet,
    generation: &GenerationOptions,
    question: &str,
    response: &str,
) -> Result<String, StageError> {
    if response.trim().is_empty() {
        return Err(StageError::Empty { what: "response" });
    }
    let prompt = render_llm1(templates, question, response)?;
    let text = client.generate(&generation.request(prompt))?;
    let answer = text.trim().trim_start_matches("CORRECTED ANSWER:").trim();
    if answer.is_empty() {
        return Err(StageError::Format {
            stage: "baseline_llm1",
            message: String::from("empty corrected answer"),
            raw: text,
        });
    }
    Ok(String::from(answer))
}

/// Corrects using retrieved contexts only, ignoring internal knowledge.
pub fn baseline_llm2(
    client: &ServiceClient,
    templates: &TemplateSet,
    generation: &GenerationOptions,
    question: &str,
    response: &str,
    contexts: &[ContextRecord],
    unverified_atoms: &[&str],
) -> Result<String, StageError> {
    if response.trim().is_empty() {
        return Err(StageError::Empty { what: "response" });
    }
    let context_texts: Vec<&str> = contexts.iter().map(|c| c.text()).collect();
    let prompt = render_llm2(templates, question, &context_texts, response, unverified_atoms)?;
    let text = client.generate(&generation.request(prompt))?;
    let answer = text.trim().trim_start_matches("CORRECTED ANSWER:").trim();
    if answer.is_empty() {
        return Err(StageError::Format {
            stage: "baseline_llm2",
            message: String::from("empty corrected answer"),
            raw: text,
        });
    }
    Ok(String::from(answer))
}
