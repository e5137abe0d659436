//! Equivalence judging: decides whether a corrected answer matches a
//! reference correction, via a rubric prompt whose verdict line ends in
//! `[Yes]` or `[No]`.

use crate::llm::ServiceClient;
use crate::pipeline::{GenerationOptions, StageError};
use crate::prompts::{render_judge, TemplateSet};

/// Asks the judge model whether `candidate` conveys the same answer as
/// `reference`. The verdict is the last `[Yes]` or `[No]` marker in the
/// reply, so chain-of-thought preambles are tolerated.
pub fn judge_equivalence(
    client: &ServiceClient,
    templates: &TemplateSet,
    generation: &GenerationOptions,
    reference: &str,
    candidate: &str,
) -> Result<bool, StageError> {
    if reference.trim().is_empty() {
        return Err(StageError::Empty { what: "reference" });
    }
    if candidate.trim().is_empty() {
        return Err(StageError::Empty { what: "candidate" });
    }
    let prompt = render_judge(templates, reference, candidate)?;
    let request = crate::llm::GenerationRequest {
        model_name: generation.model_name.clone(),
        prompt,
        temperature: generation.temperature,
        max_tokens: generation.max_tokens,
        seed: generation.seed,
    };
    let text = client.generate(&request)?;
    let yes = text.rfind("[Yes]");
    let no = text.rfind("[No]");
    match (yes, no) {
        (Some(y), Some(n)) => Ok(y > n),
        (Some(_), None) => Ok(true),
        (None, Some(_)) => Ok(false),
        (None, None) => Err(StageError::Format {
            stage: "judge",
            message: String::from("no [Yes] or [No] verdict marker"),
            raw: text,
        }),
    }
}
