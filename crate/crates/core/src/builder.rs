//! Constructing the assessment graphical model from atoms, contexts, and
//! typed relations, and mapping posterior marginals back to atom labels.
//!
//! Each atom and each context becomes a Boolean variable with a unary prior
//! factor; every entailment or contradiction relation becomes a binary
//! factor over (source context, target). Neutral relations carry no evidence
//! and are dropped. The binary tables are uninformative (0.5) whenever the
//! context variable is false, so evidence from a disbelieved context exerts
//! no pull on its atom.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::graph::{Factor, GraphicalModel, MarginalTable, ModelError, VarKind, VariableId};

/// Numeric half-width of the band around 0.5 treated as "posterior equals
/// one half" when labeling atoms.
pub const TIE_TOLERANCE: f64 = 1e-9;

/// Truthfulness verdict for one atom.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum AtomLabel {
    True,
    False,
    Unverified,
    /// No assessment has run yet.
    Unlabeled,
}

impl fmt::Display for AtomLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AtomLabel::True => f.write_str("True"),
            AtomLabel::False => f.write_str("False"),
            AtomLabel::Unverified => f.write_str("Unverified"),
            AtomLabel::Unlabeled => f.write_str("Unlabeled"),
        }
    }
}

/// An atomic claim extracted from a response.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AtomRecord {
    /// Unique within one response (e.g. `a1`, `a2`, ...).
    pub id: String,
    /// The claim as decomposition produced it.
    pub original_text: String,
    /// The claim after decontextualization; equals `original_text` when no
    /// rewriting was needed. Non-empty once the revision stage has run.
    pub revised_text: String,
    pub label: AtomLabel,
    /// Posterior probability the claim is true, once assessed.
    pub posterior: Option<f64>,
}

impl AtomRecord {
    pub fn new(id: &str, text: &str) -> Self {
        AtomRecord {
            id: String::from(id),
            original_text: String::from(text),
            revised_text: String::from(text),
            label: AtomLabel::Unlabeled,
            posterior: None,
        }
    }

    /// The text later stages should use: the revised form when present.
    pub fn text(&self) -> &str {
        if self.revised_text.is_empty() {
            &self.original_text
        } else {
            &self.revised_text
        }
    }
}

/// Maximum number of characters retained from a retrieved page body.
pub const CONTEXT_BODY_CAP: usize = 4000;

/// A retrieved evidence passage.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContextRecord {
    /// Unique within one assessment (e.g. `c1`, `c2`, ...).
    pub id: String,
    pub title: String,
    pub link: String,
    pub snippet: String,
    /// Page text, capped at [`CONTEXT_BODY_CAP`] characters.
    pub body: String,
    /// Prior probability the passage is trustworthy; in (0, 1).
    pub prior: f64,
}

impl ContextRecord {
    /// Builds a context, truncating `body` to [`CONTEXT_BODY_CAP`]
    /// characters on a character boundary.
    pub fn new(id: &str, title: &str, link: &str, snippet: &str, body: &str, prior: f64) -> Self {
        ContextRecord {
            id: String::from(id),
            title: String::from(title),
            link: String::from(link),
            snippet: String::from(snippet),
            body: truncate_chars(body, CONTEXT_BODY_CAP),
            prior,
        }
    }

    /// The passage text used for relation extraction: the fetched body when
    /// available, otherwise the search snippet.
    pub fn text(&self) -> &str {
        if self.body.is_empty() {
            &self.snippet
        } else {
            &self.body
        }
    }
}

/// Returns at most the first `cap` characters of `text`.
pub fn truncate_chars(text: &str, cap: usize) -> String {
    match text.char_indices().nth(cap) {
        Some((byte_idx, _)) => String::from(&text[..byte_idx]),
        None => String::from(text),
    }
}

/// The direction of evidence a relation carries.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RelationKind {
    Entail,
    Contradict,
    /// No evidence either way; dropped during model construction.
    Neutral,
}

impl fmt::Display for RelationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RelationKind::Entail => f.write_str("entailment"),
            RelationKind::Contradict => f.write_str("contradiction"),
            RelationKind::Neutral => f.write_str("neutral"),
        }
    }
}

/// A typed probabilistic judgment that context `source_id` supports or
/// refutes the atom (or context) `target_id`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelationRecord {
    pub source_id: String,
    pub target_id: String,
    pub kind: RelationKind,
    /// Confidence of the judgment; in (0, 1].
    pub p: f64,
}

/// Prior probabilities used when building models.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PriorConfig {
    /// Prior that an atom is true before any evidence: uniform by default.
    pub atom_prior: f64,
    /// Prior assigned to passages from sources treated as reliable.
    pub reliable_context_prior: f64,
    /// Prior available for passages from sources the caller wants to
    /// down-weight; nothing selects it automatically.
    pub unreliable_context_prior: f64,
}

impl Default for PriorConfig {
    fn default() -> Self {
        PriorConfig { atom_prior: 0.5, reliable_context_prior: 0.99, unreliable_context_prior: 0.7 }
    }
}

/// Errors raised while assembling a model or labeling atoms.
#[derive(Clone, Debug, PartialEq)]
pub enum BuildError {
    /// A relation's source does not name a known context.
    UnknownSource { id: String },
    /// A relation's target names neither a known atom nor a known context.
    UnknownTarget { id: String },
    /// A relation connects an id to itself.
    SelfRelation { id: String },
    /// A relation probability is outside (0, 1].
    InvalidProbability { p: f64 },
    /// A prior is outside the open interval (0, 1).
    InvalidPrior { value: f64 },
    /// No model variable carries the given atom id.
    MissingAtomVariable { id: String },
    /// Model assembly failed a structural check.
    Model(ModelError),
}

impl fmt::Display for BuildError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BuildError::UnknownSource { id } => write!(f, "relation source `{id}` is not a known context"),
            BuildError::UnknownTarget { id } => {
                write!(f, "relation target `{id}` is neither a known atom nor a known context")
            }
            BuildError::SelfRelation { id } => write!(f, "relation connects `{id}` to itself"),
            BuildError::InvalidProbability { p } => {
                write!(f, "relation probability {p} is outside (0, 1]")
            }
            BuildError::InvalidPrior { value } => write!(f, "prior {value} is outside (0, 1)"),
            BuildError::MissingAtomVariable { id } => {
                write!(f, "no model variable represents atom `{id}`")
            }
            BuildError::Model(e) => write!(f, "model assembly failed: {e}"),
        }
    }
}

impl core::error::Error for BuildError {}

impl From<ModelError> for BuildError {
    fn from(e: ModelError) -> Self {
        BuildError::Model(e)
    }
}

/// Binary factor over `(source, target)` whose table says: when the source
/// holds, the target holds with probability `p`; when the source does not
/// hold, the factor is uninformative.
///
/// Table in `[ (f,f), (f,t), (t,f), (t,t) ]` order: `[0.5, 0.5, 1-p, p]`.
pub fn entailment_factor(source: VariableId, target: VariableId, p: f64) -> Result<Factor, BuildError> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(BuildError::InvalidProbability { p });
    }
    Ok(Factor::binary(source, target, [0.5, 0.5, 1.0 - p, p])?)
}

/// Binary factor over `(source, target)` whose table says: when the source
/// holds, the target fails with probability `p`; when the source does not
/// hold, the factor is uninformative.
///
/// Table in `[ (f,f), (f,t), (t,f), (t,t) ]` order: `[0.5, 0.5, p, 1-p]`.
pub fn contradiction_factor(source: VariableId, target: VariableId, p: f64) -> Result<Factor, BuildError> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(BuildError::InvalidProbability { p });
    }
    Ok(Factor::binary(source, target, [0.5, 0.5, p, 1.0 - p])?)
}

/// Collapses contexts that share both link and snippet, keeping the first
/// occurrence, and rewrites relations to the surviving ids. Relations that
/// become duplicates collapse to their first occurrence; relations that
/// become self-loops are dropped.
pub fn merge_duplicate_contexts(
    contexts: &[ContextRecord],
    relations: &[RelationRecord],
) -> (Vec<ContextRecord>, Vec<RelationRecord>) {
    let mut kept: Vec<ContextRecord> = Vec::new();
    // id -> id of the surviving duplicate (identity for survivors)
    let mut alias: Vec<(String, String)> = Vec::new();
    for ctx in contexts {
        match kept.iter().find(|k| k.link == ctx.link && k.snippet == ctx.snippet) {
            Some(survivor) => alias.push((ctx.id.clone(), survivor.id.clone())),
            None => {
                alias.push((ctx.id.clone(), ctx.id.clone()));
                kept.push(ctx.clone());
            }
        }
    }
    let resolve = |id: &str| -> String {
        alias
            .iter()
            .find(|(from, _)| from == id)
            .map(|(_, to)| to.clone())
            .unwrap_or_else(|| String::from(id))
    };
    let mut rewritten: Vec<RelationRecord> = Vec::new();
    for rel in relations {
        let source_id = resolve(&rel.source_id);
        let target_id = resolve(&rel.target_id);
        if source_id == target_id {
            continue;
        }
        if rewritten.iter().any(|r| r.source_id == source_id && r.target_id == target_id) {
            continue;
        }
        rewritten.push(RelationRecord { source_id, target_id, kind: rel.kind, p: rel.p });
    }
    (kept, rewritten)
}

/// Assembles the graphical model: one variable and one unary prior factor
/// per atom and per context, one binary factor per non-neutral relation.
/// Callers that retrieved contexts through search should merge duplicates
/// first (see [`merge_duplicate_contexts`]).
pub fn build_model(
    atoms: &[AtomRecord],
    contexts: &[ContextRecord],
    relations: &[RelationRecord],
    priors: &PriorConfig,
) -> Result<GraphicalModel, BuildError> {
    if !(priors.atom_prior > 0.0 && priors.atom_prior < 1.0) {
        return Err(BuildError::InvalidPrior { value: priors.atom_prior });
    }
    let mut model = GraphicalModel::new();
    for atom in atoms {
        let v = model.add_variable(VarKind::Atom, &atom.id);
        model.add_factor(Factor::unary(v, 1.0 - priors.atom_prior, priors.atom_prior)?)?;
    }
    for ctx in contexts {
        if !(ctx.prior > 0.0 && ctx.prior < 1.0) {
            return Err(BuildError::InvalidPrior { value: ctx.prior });
        }
        let v = model.add_variable(VarKind::Context, &ctx.id);
        model.add_factor(Factor::unary(v, 1.0 - ctx.prior, ctx.prior)?)?;
    }
    for rel in relations {
        if rel.kind == RelationKind::Neutral {
            continue;
        }
        if rel.source_id == rel.target_id {
            return Err(BuildError::SelfRelation { id: rel.source_id.clone() });
        }
        let source = model
            .variables()
            .iter()
            .find(|v| v.kind == VarKind::Context && v.source_id == rel.source_id)
            .map(|v| v.id)
            .ok_or_else(|| BuildError::UnknownSource { id: rel.source_id.clone() })?;
        let target = model
            .variable_by_source(&rel.target_id)
            .ok_or_else(|| BuildError::UnknownTarget { id: rel.target_id.clone() })?;
        let factor = match rel.kind {
            RelationKind::Entail => entailment_factor(source, target, rel.p)?,
            RelationKind::Contradict => contradiction_factor(source, target, rel.p)?,
            RelationKind::Neutral => unreachable!("neutral relations are skipped above"),
        };
        model.add_factor(factor)?;
    }
    Ok(model)
}

/// Writes posterior and label onto every atom: above one half is `True`,
/// below is `False`, and within [`TIE_TOLERANCE`] of one half is
/// `Unverified`.
pub fn label_atoms(
    marginals: &MarginalTable,
    model: &GraphicalModel,
    atoms: &mut [AtomRecord],
) -> Result<(), BuildError> {
    for atom in atoms.iter_mut() {
        let variable = model
            .variables()
            .iter()
            .find(|v| v.kind == VarKind::Atom && v.source_id == atom.id)
            .map(|v| v.id)
            .ok_or_else(|| BuildError::MissingAtomVariable { id: atom.id.clone() })?;
        if variable.0 >= marginals.len() {
            return Err(BuildError::MissingAtomVariable { id: atom.id.clone() });
        }
        let p = marginals.p_true(variable);
        atom.posterior = Some(p);
        atom.label = if (p - 0.5).abs() <= TIE_TOLERANCE {
            AtomLabel::Unverified
        } else if p > 0.5 {
            AtomLabel::True
        } else {
            AtomLabel::False
        };
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inference::{exact_marginals, min_fill_order};

    fn assess(
        atoms: &mut [AtomRecord],
        contexts: &[ContextRecord],
        relations: &[RelationRecord],
    ) -> GraphicalModel {
        let model = build_model(atoms, contexts, relations, &PriorConfig::default()).unwrap();
        let marginals = exact_marginals(&model, &min_fill_order(&model)).unwrap();
        label_atoms(&marginals, &model, atoms).unwrap();
        model
    }

    fn context(id: &str, link: &str) -> ContextRecord {
        ContextRecord::new(id, "title", link, "snippet", "body text", 0.99)
    }

    fn entail(source: &str, target: &str, p: f64) -> RelationRecord {
        RelationRecord {
            source_id: String::from(source),
            target_id: String::from(target),
            kind: RelationKind::Entail,
            p,
        }
    }

    #[test]
    fn entailment_factor_tables() {
        let s = VariableId(0);
        let t = VariableId(1);
        let hard = entailment_factor(s, t, 1.0).unwrap();
        assert_eq!(hard.table(), &[0.5, 0.5, 0.0, 1.0]);
        let soft = entailment_factor(s, t, 0.9).unwrap();
        assert!((soft.value_at(&[true, true]) - 0.9).abs() < 1e-15);
        assert!((soft.value_at(&[true, false]) - 0.1).abs() < 1e-15);
        assert_eq!(soft.value_at(&[false, true]), 0.5);
        assert_eq!(soft.value_at(&[false, false]), 0.5);
        assert_eq!(
            entailment_factor(s, t, 0.0),
            Err(BuildError::InvalidProbability { p: 0.0 })
        );
        assert_eq!(
            entailment_factor(s, t, 1.5),
            Err(BuildError::InvalidProbability { p: 1.5 })
        );
    }

    #[test]
    fn contradiction_factor_tables() {
        let s = VariableId(0);
        let t = VariableId(1);
        let hard = contradiction_factor(s, t, 1.0).unwrap();
        assert_eq!(hard.table(), &[0.5, 0.5, 1.0, 0.0]);
        let soft = contradiction_factor(s, t, 0.9).unwrap();
        assert!((soft.value_at(&[true, true]) - 0.1).abs() < 1e-15);
        assert!((soft.value_at(&[true, false]) - 0.9).abs() < 1e-15);
    }

    #[test]
    fn half_probability_relation_is_uninformative() {
        let mut atoms = [AtomRecord::new("a1", "claim")];
        let contexts = [context("c1", "https://example.org/1")];
        assess(&mut atoms, &contexts, &[entail("c1", "a1", 0.5)]);
        assert!((atoms[0].posterior.unwrap() - 0.5).abs() <= TIE_TOLERANCE);
        assert_eq!(atoms[0].label, AtomLabel::Unverified);
    }

    #[test]
    fn single_entailment_closed_form() {
        // One atom (prior 0.5), one context (prior 0.99), entailment p=0.9:
        // enumerating the four assignments gives Z = 1/2 and posterior
        // 112/125 = 0.896 exactly.
        let mut atoms = [AtomRecord::new("a1", "claim")];
        let contexts = [context("c1", "https://example.org/1")];
        assess(&mut atoms, &contexts, &[entail("c1", "a1", 0.9)]);
        assert!((atoms[0].posterior.unwrap() - 0.896).abs() < 1e-9);
        assert_eq!(atoms[0].label, AtomLabel::True);
    }

    #[test]
    fn single_contradiction_closed_form() {
        // Mirror of the entailment case: posterior 13/125 = 0.104 exactly.
        let mut atoms = [AtomRecord::new("a1", "claim")];
        let contexts = [context("c1", "https://example.org/1")];
        let rel = RelationRecord {
            source_id: String::from("c1"),
            target_id: String::from("a1"),
            kind: RelationKind::Contradict,
            p: 0.9,
        };
        assess(&mut atoms, &contexts, &[rel]);
        assert!((atoms[0].posterior.unwrap() - 0.104).abs() < 1e-9);
        assert_eq!(atoms[0].label, AtomLabel::False);
    }

    #[test]
    fn atom_without_relations_stays_unverified() {
        let mut atoms = [AtomRecord::new("a1", "claim")];
        let model = assess(&mut atoms, &[], &[]);
        assert_eq!(model.num_variables(), 1);
        assert_eq!(model.factors().len(), 1);
        assert!((atoms[0].posterior.unwrap() - 0.5).abs() <= TIE_TOLERANCE);
        assert_eq!(atoms[0].label, AtomLabel::Unverified);
    }

    #[test]
    fn neutral_relations_change_nothing() {
        let mut atoms = [AtomRecord::new("a1", "claim")];
        let contexts = [context("c1", "https://example.org/1")];
        let neutral = RelationRecord {
            source_id: String::from("c1"),
            target_id: String::from("a1"),
            kind: RelationKind::Neutral,
            p: 0.8,
        };
        let model = assess(&mut atoms, &contexts, &[neutral]);
        // Two variables, two unary priors, no binary factor.
        assert_eq!(model.num_variables(), 2);
        assert_eq!(model.factors().len(), 2);
        assert_eq!(atoms[0].label, AtomLabel::Unverified);
    }

    #[test]
    fn variable_and_factor_counts_scale_with_input() {
        // 5 atoms, 8 contexts, 19 non-neutral relations -> 13 variables,
        // 13 unary priors plus 19 binary factors.
        let mut atoms: Vec<AtomRecord> = (1..=5)
            .map(|i| AtomRecord::new(&alloc::format!("a{i}"), "claim"))
            .collect();
        let contexts: Vec<ContextRecord> = (1..=8)
            .map(|i| context(&alloc::format!("c{i}"), &alloc::format!("https://example.org/{i}")))
            .collect();
        let mut relations = Vec::new();
        let mut count = 0;
        'outer: for c in 1..=8 {
            for a in 1..=5 {
                if count == 19 {
                    break 'outer;
                }
                let kind =
                    if (c + a) % 3 == 0 { RelationKind::Contradict } else { RelationKind::Entail };
                relations.push(RelationRecord {
                    source_id: alloc::format!("c{c}"),
                    target_id: alloc::format!("a{a}"),
                    kind,
                    p: 0.9,
                });
                count += 1;
            }
        }
        let model = assess(&mut atoms, &contexts, &relations);
        assert_eq!(model.num_variables(), 13);
        assert_eq!(model.factors().len(), 13 + 19);
        assert_eq!(model.factors().iter().filter(|f| f.arity() == 2).count(), 19);
    }

    #[test]
    fn dangling_relation_endpoints_are_rejected() {
        let atoms = [AtomRecord::new("a1", "claim")];
        let contexts = [context("c1", "https://example.org/1")];
        let priors = PriorConfig::default();
        let bad_source = [entail("c9", "a1", 0.9)];
        assert_eq!(
            build_model(&atoms, &contexts, &bad_source, &priors),
            Err(BuildError::UnknownSource { id: String::from("c9") })
        );
        let bad_target = [entail("c1", "a9", 0.9)];
        assert_eq!(
            build_model(&atoms, &contexts, &bad_target, &priors),
            Err(BuildError::UnknownTarget { id: String::from("a9") })
        );
        // An atom id as relation source is dangling too: sources are contexts.
        let atom_source = [entail("a1", "c1", 0.9)];
        assert_eq!(
            build_model(&atoms, &contexts, &atom_source, &priors),
            Err(BuildError::UnknownSource { id: String::from("a1") })
        );
    }

    #[test]
    fn context_to_context_relations_are_supported() {
        let mut atoms = [AtomRecord::new("a1", "claim")];
        let contexts =
            [context("c1", "https://example.org/1"), context("c2", "https://example.org/2")];
        let relations = [entail("c1", "a1", 0.9), entail("c2", "c1", 0.8)];
        let model = assess(&mut atoms, &contexts, &relations);
        assert_eq!(model.factors().iter().filter(|f| f.arity() == 2).count(), 2);
        // The supporting chain still pushes the atom above one half.
        assert!(atoms[0].posterior.unwrap() > 0.5);
    }

    #[test]
    fn labeling_uses_tie_tolerance() {
        let model = {
            let mut m = GraphicalModel::new();
            let v = m.add_variable(VarKind::Atom, "a1");
            m.add_factor(Factor::unary(v, 0.5, 0.5).unwrap()).unwrap();
            m
        };
        let mut atoms = [AtomRecord::new("a1", "claim")];
        let exactly_half = MarginalTable::from_rows(alloc::vec![[0.5, 0.5]]);
        label_atoms(&exactly_half, &model, &mut atoms).unwrap();
        assert_eq!(atoms[0].label, AtomLabel::Unverified);

        let barely_above = MarginalTable::from_rows(alloc::vec![[0.5 - 2e-9, 0.5 + 2e-9]]);
        label_atoms(&barely_above, &model, &mut atoms).unwrap();
        assert_eq!(atoms[0].label, AtomLabel::True);

        let within_band = MarginalTable::from_rows(alloc::vec![[0.5 - 5e-10, 0.5 + 5e-10]]);
        label_atoms(&within_band, &model, &mut atoms).unwrap();
        assert_eq!(atoms[0].label, AtomLabel::Unverified);
    }

    #[test]
    fn labeling_rejects_missing_atom_variable() {
        let model = GraphicalModel::new();
        let marginals = MarginalTable::from_rows(alloc::vec![]);
        let mut atoms = [AtomRecord::new("a1", "claim")];
        assert_eq!(
            label_atoms(&marginals, &model, &mut atoms),
            Err(BuildError::MissingAtomVariable { id: String::from("a1") })
        );
    }

    #[test]
    fn duplicate_contexts_merge_and_relations_follow() {
        let contexts = [
            context("c1", "https://example.org/same"),
            context("c2", "https://example.org/other"),
            context("c3", "https://example.org/same"), // duplicate of c1
        ];
        let relations = [
            entail("c1", "a1", 0.9),
            entail("c3", "a1", 0.9), // collapses onto c1 -> a1, dropped
            entail("c3", "a2", 0.8), // rewritten to c1 -> a2
            entail("c2", "c3", 0.7), // rewritten to c2 -> c1
        ];
        let (kept, rewritten) = merge_duplicate_contexts(&contexts, &relations);
        assert_eq!(kept.len(), 2);
        assert_eq!(kept[0].id, "c1");
        assert_eq!(kept[1].id, "c2");
        assert_eq!(rewritten.len(), 3);
        assert_eq!((rewritten[0].source_id.as_str(), rewritten[0].target_id.as_str()), ("c1", "a1"));
        assert_eq!((rewritten[1].source_id.as_str(), rewritten[1].target_id.as_str()), ("c1", "a2"));
        assert_eq!((rewritten[2].source_id.as_str(), rewritten[2].target_id.as_str()), ("c2", "c1"));
    }

    #[test]
    fn merged_self_loops_are_dropped() {
        let contexts = [
            context("c1", "https://example.org/same"),
            context("c2", "https://example.org/same"),
        ];
        let relations = [entail("c1", "c2", 0.9)];
        let (kept, rewritten) = merge_duplicate_contexts(&contexts, &relations);
        assert_eq!(kept.len(), 1);
        assert!(rewritten.is_empty());
    }

    #[test]
    fn body_truncation_respects_char_boundaries() {
        let long = "é".repeat(CONTEXT_BODY_CAP + 25);
        let ctx = ContextRecord::new("c1", "t", "l", "s", &long, 0.99);
        assert_eq!(ctx.body.chars().count(), CONTEXT_BODY_CAP);
        let short = ContextRecord::new("c2", "t", "l", "s", "tiny", 0.99);
        assert_eq!(short.body, "tiny");
    }

    #[test]
    fn invalid_priors_are_rejected() {
        let atoms = [AtomRecord::new("a1", "claim")];
        let mut bad_atom_prior = PriorConfig::default();
        bad_atom_prior.atom_prior = 1.0;
        assert_eq!(
            build_model(&atoms, &[], &[], &bad_atom_prior),
            Err(BuildError::InvalidPrior { value: 1.0 })
        );
        let mut ctx = context("c1", "https://example.org/1");
        ctx.prior = 0.0;
        assert_eq!(
            build_model(&atoms, &[ctx], &[], &PriorConfig::default()),
            Err(BuildError::InvalidPrior { value: 0.0 })
        );
    }
}
