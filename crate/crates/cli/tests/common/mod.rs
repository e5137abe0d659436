//! Shared helpers for the integration tests: locations of the committed
//! fixture corpus and the golden inputs both the generator and the
//! acceptance suite must agree on.

#![allow(dead_code)]

use std::path::PathBuf;

use veracity::pipeline::CorrectionConfig;
use veracity::prompts::{
    render_judge, render_llm1, render_llm2, render_refinement, render_synth_incorrect,
    IncorrectAtomBlock, TemplateSet,
};
use veracity_core::RelationKind;

/// Root of the committed fixture corpus.
pub fn fixtures_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

/// The configuration the fixture corpus was recorded under. Must stay in
/// sync with `tests/fixtures/config.toml` (the generator writes that file
/// from this value).
pub fn fixture_config() -> CorrectionConfig {
    let mut config = CorrectionConfig::default();
    config.generation.model_name = String::from("fixture-model");
    config
}

/// Renders every outward-facing prompt on fixed inputs. The generator
/// freezes these renderings under `tests/fixtures/golden/prompts/`; the
/// acceptance suite re-renders and compares byte for byte.
pub fn golden_prompt_renderings() -> Vec<(&'static str, String)> {
    let templates = TemplateSet::builtin();
    let question = "Who painted the Mona Lisa?";
    let answer = "The Mona Lisa was painted by Vincent van Gogh.";
    let contexts = [
        "The Mona Lisa is a portrait by Leonardo da Vinci.",
        "It hangs in the Louvre in Paris.",
    ];
    let unverified = ["The painting was completed in 1519"];
    let incorrect = [IncorrectAtomBlock {
        text: String::from("The Mona Lisa was painted by Vincent van Gogh"),
        evidence: vec![(
            String::from("The Mona Lisa is a portrait by Leonardo da Vinci."),
            RelationKind::Contradict,
        )],
    }];
    vec![
        (
            "judge.txt",
            render_judge(
                &templates,
                "The Nile is the longest river in Africa.",
                "Africa's longest river is the Nile.",
            )
            .expect("judge template renders"),
        ),
        (
            "llm1.txt",
            render_llm1(&templates, question, answer).expect("llm1 template renders"),
        ),
        (
            "llm2.txt",
            render_llm2(&templates, question, &contexts, answer, &unverified)
                .expect("llm2 template renders"),
        ),
        (
            "refinement.txt",
            render_refinement(&templates, question, &incorrect, &unverified)
                .expect("refinement template renders"),
        ),
        (
            "synth.txt",
            render_synth_incorrect(&templates, question).expect("synth template renders"),
        ),
    ]
}
