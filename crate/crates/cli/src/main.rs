use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};

use veracity::bench::{render_summary_tsv, report_run, run_benchmark, RunKind, RunOptions};
use veracity::dataset::{synth_incorrect, DatasetRecord, Origin};
use veracity::llm::{ClientConfig, IoMode, ServiceClient};
use veracity::pipeline::CorrectionConfig;
use veracity::prompts::TemplateSet;

#[derive(Parser)]
#[command(
    name = "veracity",
    version,
    about = "Factuality assessment and iterative correction of long-form answers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Assess every dataset record once and write a run directory.
    Assess(AssessArgs),
    /// Run the iterative correction loop over every dataset record.
    Correct(CorrectArgs),
    /// Recompute and print the summary of a finished run directory.
    Report {
        /// Run directory written by `assess` or `correct`.
        run_dir: PathBuf,
    },
    /// Generate an intentionally flawed answer per question, emitting
    /// dataset records ready for correction benchmarks.
    Synth(SynthArgs),
}

/// How service traffic is handled.
#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    /// Serve every request from the local store; a missing entry is an
    /// error. No network access happens.
    Replay,
    /// Call the configured endpoints and store every response.
    Record,
}

impl From<ModeArg> for IoMode {
    fn from(mode: ModeArg) -> IoMode {
        match mode {
            ModeArg::Replay => IoMode::Replay,
            ModeArg::Record => IoMode::Record,
        }
    }
}

#[derive(Args)]
struct CommonRunArgs {
    /// JSONL dataset: one record per line with id, category, question,
    /// response, origin, and optional reference_correction.
    dataset: PathBuf,
    /// replay serves responses from --store; record calls the live
    /// endpoints (VERACITY_LLM_URL, VERACITY_LLM_KEY, VERACITY_SEARCH_URL,
    /// VERACITY_SEARCH_KEY) and fills the store.
    #[arg(long, value_enum, default_value_t = ModeArg::Replay)]
    mode: ModeArg,
    /// Directory of recorded service responses.
    #[arg(long, default_value = "store")]
    store: PathBuf,
    /// Run directory to write; defaults to runs/<kind>-<unix-time>.
    #[arg(long)]
    out: Option<PathBuf>,
    /// TOML file with correction settings; omitted fields use defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Prompt template directory overriding the bundled templates.
    #[arg(long)]
    prompts: Option<String>,
    /// Records processed concurrently.
    #[arg(long, default_value_t = 1)]
    parallelism: usize,
}

#[derive(Args)]
struct AssessArgs {
    #[command(flatten)]
    common: CommonRunArgs,
    /// Scope cap of the approximate inference engine.
    #[arg(long)]
    ibound: Option<usize>,
    /// Search results requested per atom.
    #[arg(long)]
    k: Option<usize>,
}

#[derive(Args)]
struct CorrectArgs {
    #[command(flatten)]
    common: CommonRunArgs,
    /// Precision threshold that stops the loop.
    #[arg(long)]
    theta: Option<f64>,
    /// Maximum refinement rounds.
    #[arg(long = "max-iter")]
    max_iter: Option<usize>,
    /// Scope cap of the approximate inference engine.
    #[arg(long)]
    ibound: Option<usize>,
    /// Search results requested per atom.
    #[arg(long)]
    k: Option<usize>,
}

#[derive(Args)]
struct SynthArgs {
    /// Plain-text file with one question per line (blank lines skipped).
    questions: PathBuf,
    /// Output JSONL file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = ModeArg::Replay)]
    mode: ModeArg,
    #[arg(long, default_value = "store")]
    store: PathBuf,
    /// TOML file with generation settings; omitted fields use defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Prompt template directory overriding the bundled templates.
    #[arg(long)]
    prompts: Option<String>,
}

fn load_config(path: Option<&PathBuf>) -> anyhow::Result<CorrectionConfig> {
    match path {
        None => Ok(CorrectionConfig::default()),
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading config file {}", path.display()))?;
            toml::from_str(&text)
                .with_context(|| format!("parsing config file {}", path.display()))
        }
    }
}

fn default_out_dir(kind: &str) -> PathBuf {
    let now = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    PathBuf::from("runs").join(format!("{kind}-{now}"))
}

fn run_command(
    kind: RunKind,
    common: CommonRunArgs,
    theta: Option<f64>,
    max_iter: Option<usize>,
    ibound: Option<usize>,
    k: Option<usize>,
) -> anyhow::Result<ExitCode> {
    let mut config = load_config(common.config.as_ref())?;
    if let Some(theta) = theta {
        config.theta = theta;
    }
    if let Some(max_iter) = max_iter {
        config.max_iterations = max_iter;
    }
    if let Some(ibound) = ibound {
        config.ibound = ibound;
    }
    if let Some(k) = k {
        config.k_contexts = k;
    }
    if let Some(prompts) = common.prompts {
        config.prompts = prompts;
    }
    let options = RunOptions {
        kind,
        dataset: common.dataset,
        out_dir: common.out.unwrap_or_else(|| {
            default_out_dir(match kind {
                RunKind::Assess => "assess",
                RunKind::Correct => "correct",
            })
        }),
        store: common.store,
        mode: common.mode.into(),
        config,
        parallelism: common.parallelism,
    };
    let outcome = run_benchmark(&options)?;
    print!("{}", render_summary_tsv(&outcome.rows));
    println!(
        "\n{} record(s) processed, {} failed; artifacts in {}",
        outcome.processed,
        outcome.failed,
        outcome.out_dir.display()
    );
    Ok(if outcome.failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}

fn synth_command(args: SynthArgs) -> anyhow::Result<ExitCode> {
    let config = load_config(args.config.as_ref())?;
    let templates = TemplateSet::resolve(
        args.prompts.as_deref().unwrap_or(config.prompts.as_str()),
    )?;
    let text = fs::read_to_string(&args.questions)
        .with_context(|| format!("reading questions file {}", args.questions.display()))?;
    let questions: Vec<&str> = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .collect();
    anyhow::ensure!(!questions.is_empty(), "no questions found in the input file");

    let client_config = match args.mode.into() {
        IoMode::Replay => ClientConfig::replay(&args.store),
        IoMode::Record => ClientConfig::record_from_env(&args.store),
    };
    let client = ServiceClient::new(client_config)?;

    let mut lines = String::new();
    let mut failed = 0usize;
    for (i, question) in questions.into_iter().enumerate() {
        match synth_incorrect(&client, &templates, &config.generation, question) {
            Ok(response) => {
                let record = DatasetRecord {
                    id: format!("synth-{}", i + 1),
                    category: String::from("synthetic"),
                    question: String::from(question),
                    response,
                    origin: Origin::Synthetic,
                    reference_correction: None,
                };
                lines.push_str(&serde_json::to_string(&record)?);
                lines.push('\n');
            }
            Err(e) => {
                failed += 1;
                eprintln!("question {}: {e}", i + 1);
            }
        }
    }
    match args.out {
        Some(path) => fs::write(&path, lines)
            .with_context(|| format!("writing output file {}", path.display()))?,
        None => print!("{lines}"),
    }
    Ok(if failed == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn run() -> anyhow::Result<ExitCode> {
    match Cli::parse().command {
        Command::Assess(args) => run_command(
            RunKind::Assess,
            args.common,
            None,
            None,
            args.ibound,
            args.k,
        ),
        Command::Correct(args) => run_command(
            RunKind::Correct,
            args.common,
            args.theta,
            args.max_iter,
            args.ibound,
            args.k,
        ),
        Command::Report { run_dir } => {
            print!("{}", report_run(&run_dir)?);
            Ok(ExitCode::SUCCESS)
        }
        Command::Synth(args) => synth_command(args),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
