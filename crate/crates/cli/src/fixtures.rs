//! Declarative scripting of replay stores.
//!
//! Tests and offline benchmarks drive the pipeline against a replay store, a
//! directory of recorded service replies. Writing those entries by hand is
//! error-prone because every entry is keyed by the exact request the pipeline
//! will issue. The helpers here accept a high-level description of one
//! assessment round — the atoms the decomposer should emit, each atom's
//! rewrite, search query, and hits, and the relation verdict per
//! (context, atom) pair — and derive every cache entry from it using the same
//! prompt renderers the pipeline calls. If a scripted scenario drifts from
//! what the pipeline actually requests, replay misses surface the drift
//! immediately.

use std::io;
use std::path::Path;

use veracity_core::{ContextRecord, PriorConfig};

use crate::llm::{record_generation, record_search, SearchResult};
use crate::pipeline::CorrectionConfig;
use crate::prompts::{
    render_atomizer, render_query, render_refinement, render_relations, render_reviser,
    IncorrectAtomBlock, TemplateSet,
};

/// One atom's scripted journey through an assessment.
#[derive(Clone, Debug)]
pub struct ScriptedAtom {
    /// Text emitted by the decomposition call (as a `- ` line).
    pub original: String,
    /// Reply of the rewrite call for this atom.
    pub revised: String,
    /// Reply of the query-generation call (searched verbatim).
    pub query: String,
    /// Search hits for `query`. Must already be in final shape: at most
    /// `k_contexts` entries, no duplicate links, bodies within the length
    /// cap — the scripting layer does not re-run retrieval post-processing.
    pub hits: Vec<SearchResult>,
}

/// The scripted verdict for one (context, atom) pair, addressed by the
/// context's link and the atom's revised text. Pairs without an entry
/// default to a neutral verdict.
#[derive(Clone, Debug)]
pub struct RelationReply {
    pub link: String,
    pub atom: String,
    /// Raw reply text, e.g. `RELATION: ENTAILMENT 0.95`.
    pub reply: String,
}

impl RelationReply {
    pub fn new(link: &str, atom: &str, reply: &str) -> Self {
        RelationReply {
            link: String::from(link),
            atom: String::from(atom),
            reply: String::from(reply),
        }
    }
}

/// Everything one assessment of `response` should observe.
#[derive(Clone, Debug)]
pub struct ScriptedAssessment {
    pub response: String,
    pub atoms: Vec<ScriptedAtom>,
    pub relations: Vec<RelationReply>,
}

const NEUTRAL_REPLY: &str = "RELATION: NEUTRAL 0.9";

/// Pools scripted hits the way retrieval does: discovery order across atoms,
/// duplicates by (link, snippet) dropped, ids `c1`, `c2`, ...
pub fn pooled_contexts(atoms: &[ScriptedAtom], priors: &PriorConfig) -> Vec<ContextRecord> {
    let mut pooled: Vec<ContextRecord> = Vec::new();
    for atom in atoms {
        for hit in &atom.hits {
            if pooled
                .iter()
                .any(|c| c.link == hit.link && c.snippet == hit.snippet)
            {
                continue;
            }
            pooled.push(ContextRecord::new(
                &format!("c{}", pooled.len() + 1),
                &hit.title,
                &hit.link,
                &hit.snippet,
                &hit.fetched_body,
                priors.reliable_context_prior,
            ));
        }
    }
    pooled
}

/// Writes every cache entry one assessment of `script.response` consumes:
/// the decomposition reply, one rewrite and one query reply per atom, one
/// search result set per atom, and one relation verdict per (context, atom)
/// pair. Returns the pooled context list so callers can script the follow-up
/// refinement against the same evidence.
pub fn seed_assessment(
    store: &Path,
    templates: &TemplateSet,
    config: &CorrectionConfig,
    question: &str,
    script: &ScriptedAssessment,
) -> io::Result<Vec<ContextRecord>> {
    let request = |prompt: String| crate::llm::GenerationRequest {
        model_name: config.generation.model_name.clone(),
        prompt,
        temperature: config.generation.temperature,
        max_tokens: config.generation.max_tokens,
        seed: config.generation.seed,
    };
    let render_error = |e| io::Error::new(io::ErrorKind::InvalidInput, format!("{e}"));

    let atom_lines: Vec<String> = script
        .atoms
        .iter()
        .map(|a| format!("- {}", a.original))
        .collect();
    let prompt = render_atomizer(templates, question, &script.response).map_err(render_error)?;
    record_generation(store, &request(prompt), &atom_lines.join("\n"))?;

    for atom in &script.atoms {
        let prompt = render_reviser(templates, question, &script.response, &atom.original)
            .map_err(render_error)?;
        record_generation(store, &request(prompt), &atom.revised)?;

        let prompt = render_query(templates, &atom.revised).map_err(render_error)?;
        record_generation(store, &request(prompt), &atom.query)?;

        record_search(store, &atom.query, config.k_contexts, &atom.hits)?;
    }

    let pooled = pooled_contexts(&script.atoms, &config.priors);
    for context in &pooled {
        for atom in &script.atoms {
            let reply = script
                .relations
                .iter()
                .find(|r| r.link == context.link && r.atom == atom.revised)
                .map(|r| r.reply.as_str())
                .unwrap_or(NEUTRAL_REPLY);
            let prompt =
                render_relations(templates, context.text(), &atom.revised).map_err(render_error)?;
            record_generation(store, &request(prompt), reply)?;
        }
    }
    Ok(pooled)
}

/// Writes the cache entry for one refinement call: the correction prompt
/// built from `incorrect` and `unverified` answered by `reply`.
pub fn seed_refinement(
    store: &Path,
    templates: &TemplateSet,
    config: &CorrectionConfig,
    question: &str,
    incorrect: &[IncorrectAtomBlock],
    unverified: &[&str],
    reply: &str,
) -> io::Result<()> {
    let prompt = render_refinement(templates, question, incorrect, unverified)
        .map_err(|e| io::Error::new(io::ErrorKind::InvalidInput, format!("{e}")))?;
    let request = crate::llm::GenerationRequest {
        model_name: config.generation.model_name.clone(),
        prompt,
        temperature: config.generation.temperature,
        max_tokens: config.generation.max_tokens,
        seed: config.generation.seed,
    };
    record_generation(store, &request, reply)
}

/// A single search hit with only a snippet (no fetched body), the common
/// case in scripted scenarios.
pub fn snippet_hit(title: &str, link: &str, snippet: &str) -> SearchResult {
    SearchResult {
        title: String::from(title),
        link: String::from(link),
        snippet: String::from(snippet),
        fetched_body: String::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::{ClientConfig, ServiceClient};
    use crate::pipeline::assess;
    use veracity_core::AtomLabel;

    /// A scripted scenario must replay through the real assessment with no
    /// misses and produce the labels its relation verdicts imply.
    #[test]
    fn scripted_assessment_replays_through_assess() {
        let dir = tempfile::tempdir().unwrap();
        let templates = TemplateSet::builtin();
        let config = CorrectionConfig::default();
        let script = ScriptedAssessment {
            response: String::from("The tower is in Paris. It was built in 1887."),
            atoms: vec![
                ScriptedAtom {
                    original: String::from("The tower is in Paris"),
                    revised: String::from("The Eiffel Tower is in Paris"),
                    query: String::from("where is the eiffel tower"),
                    hits: vec![snippet_hit(
                        "Eiffel Tower",
                        "https://example.org/tower",
                        "The Eiffel Tower stands in Paris, France.",
                    )],
                },
                ScriptedAtom {
                    original: String::from("It was built in 1887"),
                    revised: String::from("The Eiffel Tower was built in 1887"),
                    query: String::from("when was the eiffel tower built"),
                    hits: vec![snippet_hit(
                        "History",
                        "https://example.org/history",
                        "Construction started in 1887 and finished in 1889.",
                    )],
                },
            ],
            relations: vec![
                RelationReply::new(
                    "https://example.org/tower",
                    "The Eiffel Tower is in Paris",
                    "RELATION: ENTAILMENT 0.9",
                ),
                RelationReply::new(
                    "https://example.org/history",
                    "The Eiffel Tower was built in 1887",
                    "RELATION: CONTRADICTION 0.9",
                ),
            ],
        };
        seed_assessment(dir.path(), &templates, &config, "tell me about the tower", &script)
            .unwrap();
        let client = ServiceClient::new(ClientConfig::replay(dir.path())).unwrap();
        let assessment = assess(
            &client,
            &templates,
            &config,
            "tell me about the tower",
            &script.response,
        )
        .unwrap();
        assert_eq!(assessment.atoms.len(), 2);
        assert_eq!(assessment.atoms[0].label, AtomLabel::True);
        assert_eq!(assessment.atoms[1].label, AtomLabel::False);
        assert_eq!(assessment.contexts.len(), 2);
        assert_eq!(assessment.report.precision, 0.5);
        assert_eq!(assessment.report.n_atoms, 2);
        assert_eq!(assessment.report.verifiability, 2);
    }

    #[test]
    fn pooling_drops_cross_atom_duplicates() {
        let shared = snippet_hit("s", "https://same", "same snippet");
        let atoms = vec![
            ScriptedAtom {
                original: String::from("a"),
                revised: String::from("a"),
                query: String::from("qa"),
                hits: vec![shared.clone(), snippet_hit("x", "https://x", "sx")],
            },
            ScriptedAtom {
                original: String::from("b"),
                revised: String::from("b"),
                query: String::from("qb"),
                hits: vec![shared, snippet_hit("y", "https://y", "sy")],
            },
        ];
        let pooled = pooled_contexts(&atoms, &PriorConfig::default());
        let links: Vec<&str> = pooled.iter().map(|c| c.link.as_str()).collect();
        assert_eq!(links, vec!["https://same", "https://x", "https://y"]);
        assert_eq!(pooled[0].id, "c1");
        assert_eq!(pooled[2].id, "c3");
    }
}
