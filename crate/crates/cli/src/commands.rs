use std::path::{Path, PathBuf};

use anyhow::anyhow;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use proctor_core::analysis::{action_rate, aggregate, rate_metrics};
use proctor_core::config::{parse_document, validate_config, ConfigError, ExperimentConfig};
use proctor_core::export::{csv_row, read_jsonl, write_csv, write_jsonl, ExportError};
use proctor_core::judge::Judgment;
use proctor_core::judge_data::{
    build_paraphrase_prompts, builtin_judge_templates, builtin_paraphrase_strategies,
    bootstrap_f1, filter_by_similarity, generate_seed_pairs, point_f1, sample_negatives,
    select_entropy_threshold, F1Averaging, JudgePair, LabeledEntropy,
};
use proctor_core::pipeline::{
    apply_model_judgment, model_judge_request, postprocess_rule, prepare_record, PipelineError,
};
use proctor_core::plan::enumerate_run_plan;
use proctor_core::prompt::PromptVariant;
use proctor_core::record::{RawResponse, ResponseRecord};
use proctor_core::scoring::ScoreRecord;
use proctor_core::validity::RefusalRules;
use proctor_runner::connector::ConnectorError;
use proctor_runner::executor::{build_connectors, execute_plan, resume_plan, RunnerError};
use proctor_runner::remote::{HttpProbabilityProvider, ProbabilityProvider};
use proctor_runner::sink::JsonlSink;

/// `Invalid` is the user's fault (bad config, bad flags, inputs that fail
/// checks) and exits 1; `Runtime` is the world's fault (IO, endpoints,
/// corrupt files) and exits 2.
pub enum CliError {
    Invalid(String),
    Runtime(anyhow::Error),
}

pub type Result<T> = std::result::Result<T, CliError>;

fn invalid(message: impl std::fmt::Display) -> CliError {
    CliError::Invalid(message.to_string())
}

fn runtime(error: impl Into<anyhow::Error>) -> CliError {
    CliError::Runtime(error.into())
}

fn export_err(error: ExportError) -> CliError {
    runtime(error)
}

fn pipeline_err(error: PipelineError) -> CliError {
    match error {
        PipelineError::UnknownQuestion { .. } | PipelineError::NoOptions { .. } => invalid(error),
        PipelineError::Score(inner) => invalid(inner),
        other => runtime(anyhow!(other)),
    }
}

fn runner_err(error: RunnerError) -> CliError {
    match error {
        RunnerError::UnknownModel { .. }
        | RunnerError::UnknownQuestion { .. }
        | RunnerError::Prompt(_)
        | RunnerError::Persona(_) => invalid(error),
        other => runtime(anyhow!(other)),
    }
}

fn connector_err(error: ConnectorError) -> CliError {
    match error {
        ConnectorError::Client { .. } => runtime(anyhow!(error)),
        config_problem => invalid(config_problem),
    }
}

fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let json = std::fs::read_to_string(path)
        .map_err(|e| runtime(anyhow!("{}: {e}", path.display())))?;
    parse_document(&json).map_err(|e| match e {
        parse @ ConfigError::Parse { .. } => invalid(parse),
        other => runtime(anyhow!(other)),
    })
}

fn check(config: &ExperimentConfig) -> Result<()> {
    let violations = validate_config(config);
    if violations.is_empty() {
        return Ok(());
    }
    let lines: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
    Err(CliError::Invalid(lines.join("\n")))
}

/// Reads a JSONL file, refusing one that ends mid-record: that is an
/// interrupted run, and `run --resume` should finish it first.
fn read_complete<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = read_jsonl::<T>(path).map_err(export_err)?;
    if file.truncated {
        return Err(runtime(anyhow!(
            "{}: ends mid-record; finish the interrupted run with `run --resume` first",
            path.display()
        )));
    }
    Ok(file.records)
}

fn tokio_runtime() -> Result<tokio::runtime::Runtime> {
    tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| runtime(anyhow!("tokio runtime: {e}")))
}

pub fn validate(config_path: &Path) -> Result<()> {
    let config = load_config(config_path)?;
    let violations = validate_config(&config);
    if !violations.is_empty() {
        for violation in &violations {
            println!("{violation}");
        }
        return Err(CliError::Invalid(format!("{} violation(s)", violations.len())));
    }
    let plan = enumerate_run_plan(&config).map_err(invalid)?;
    println!(
        "{}: ok, {} task(s) across {} model(s)",
        config.name,
        plan.len(),
        config.models.len()
    );
    Ok(())
}

pub struct RunArgs {
    pub config: PathBuf,
    pub out: PathBuf,
    pub parallelism: usize,
    pub resume: bool,
    pub seed: Option<u64>,
    pub variant: Option<PromptVariant>,
}

pub fn run(args: RunArgs) -> Result<()> {
    let mut config = load_config(&args.config)?;
    if let Some(seed) = args.seed {
        config.seeds = vec![seed];
    }
    if let Some(variant) = args.variant {
        config.prompt.variant = variant;
    }
    check(&config)?;

    let plan = enumerate_run_plan(&config).map_err(invalid)?;
    let connectors = build_connectors(&config).map_err(|e| match e {
        RunnerError::Connector(c) => connector_err(c),
        other => runner_err(other),
    })?;

    let (mut sink, todo) = if args.resume && args.out.exists() {
        let (existing, sink) = JsonlSink::resume(&args.out).map_err(|e| runtime(anyhow!(e)))?;
        let todo = resume_plan(&plan, &existing);
        (sink, todo)
    } else {
        std::fs::File::create(&args.out)
            .map_err(|e| runtime(anyhow!("{}: {e}", args.out.display())))?;
        let sink = JsonlSink::append_to(&args.out).map_err(|e| runtime(anyhow!(e)))?;
        (sink, plan.clone())
    };
    let carried = plan.len() - todo.len();

    let rt = tokio_runtime()?;
    let summary = rt
        .block_on(execute_plan(&todo, &config, &connectors, &mut sink, args.parallelism))
        .map_err(runner_err)?;
    println!(
        "{} attempted, {} succeeded, {} failed, {} carried over, {} ms -> {}",
        summary.attempted,
        summary.succeeded,
        summary.failed,
        carried,
        summary.wall_clock_ms,
        args.out.display()
    );
    if summary.failed > 0 {
        return Err(runtime(anyhow!(
            "{} task(s) failed; rerun with --resume to retry them",
            summary.failed
        )));
    }
    Ok(())
}

pub struct PostprocessArgs {
    pub input: PathBuf,
    pub config: PathBuf,
    pub out: PathBuf,
    pub model_judge: bool,
    pub entropy_threshold: Option<f64>,
}

pub fn postprocess(args: PostprocessArgs) -> Result<()> {
    let mut config = load_config(&args.config)?;
    if let Some(threshold) = args.entropy_threshold {
        config.judge.entropy_threshold = threshold;
    }
    check(&config)?;

    let raws: Vec<RawResponse> = read_complete(&args.input)?;
    let rules = RefusalRules::builtin();
    let records = if args.model_judge {
        let provider_ref = config.judge.probability_provider.as_ref().ok_or_else(|| {
            invalid("--judge model needs judge.probability_provider in the config")
        })?;
        let provider =
            HttpProbabilityProvider::new(provider_ref).map_err(|e| runtime(anyhow!(e)))?;
        let rt = tokio_runtime()?;
        let mut records = Vec::with_capacity(raws.len());
        for raw in &raws {
            let mut record = prepare_record(raw, &rules);
            if let Some(request) =
                model_judge_request(&record, &config.questionnaire).map_err(pipeline_err)?
            {
                let probabilities = rt
                    .block_on(provider.probabilities(&request.response_text, &request.option_displays))
                    .map_err(|e| runtime(anyhow!("judge endpoint: {e}")))?;
                apply_model_judgment(&mut record, &request, &probabilities, &config.judge)
                    .map_err(pipeline_err)?;
            }
            records.push(record);
        }
        records
    } else {
        raws.iter()
            .map(|raw| postprocess_rule(raw, &config.questionnaire, &rules))
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(pipeline_err)?
    };

    write_jsonl(&args.out, &records).map_err(export_err)?;
    println!("{} record(s) -> {}", records.len(), args.out.display());
    Ok(())
}

pub fn score(input: &Path, config_path: &Path, out: &Path) -> Result<()> {
    let config = load_config(config_path)?;
    check(&config)?;
    let records: Vec<ResponseRecord> = read_complete(input)?;
    let scores = proctor_core::pipeline::score_records(&records, &config.questionnaire)
        .map_err(pipeline_err)?;
    write_jsonl(out, &scores).map_err(export_err)?;
    println!("{} score(s) -> {}", scores.len(), out.display());
    Ok(())
}

pub struct ReportArgs {
    pub input: PathBuf,
    pub config: PathBuf,
    pub out: Option<PathBuf>,
    pub group_by: Vec<String>,
    pub rates: bool,
    pub action_label: Option<String>,
}

pub fn report(args: ReportArgs) -> Result<()> {
    let config = load_config(&args.config)?;
    check(&config)?;

    if args.rates {
        let records: Vec<ResponseRecord> = read_complete(&args.input)?;
        let rates = rate_metrics(&records).map_err(invalid)?;
        let mut doc = serde_json::json!({
            "invalid_pct": rates.invalid_pct,
            "rejected_pct": rates.rejected_pct,
            "na_pct": rates.na_pct,
        });
        if let Some(label) = &args.action_label {
            let judged: Vec<Judgment> =
                records.iter().filter_map(|r| r.judgment.clone()).collect();
            let pct = action_rate(&judged, label).map_err(invalid)?;
            doc["action_pct"] = serde_json::json!(pct);
        }
        let line = serde_json::to_string(&doc).map_err(|e| runtime(anyhow!(e)))?;
        match &args.out {
            Some(path) => std::fs::write(path, format!("{line}\n"))
                .map_err(|e| runtime(anyhow!("{}: {e}", path.display())))?,
            None => println!("{line}"),
        }
        return Ok(());
    }

    if args.action_label.is_some() {
        return Err(invalid("--action-label needs --rates"));
    }
    let scores: Vec<ScoreRecord> = read_complete(&args.input)?;
    let table = aggregate(&scores, &args.group_by, &config.stats).map_err(invalid)?;
    match &args.out {
        Some(path) => {
            write_csv(path, &table).map_err(export_err)?;
            println!("{} row(s) -> {}", table.data_rows().len(), path.display());
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            csv_row(&mut lock, &table.header()).map_err(|e| runtime(anyhow!(e)))?;
            for row in table.data_rows() {
                csv_row(&mut lock, &row).map_err(|e| runtime(anyhow!(e)))?;
            }
        }
    }
    Ok(())
}

fn judge_data_err(error: proctor_core::judge_data::JudgeDataError) -> CliError {
    invalid(error)
}

pub fn seed_pair(config_path: &Path, question: Option<&str>, out: &Path) -> Result<()> {
    let config = load_config(config_path)?;
    check(&config)?;
    let questionnaire = &config.questionnaire;
    let options = match question {
        Some(id) => questionnaire
            .options_for(id)
            .ok_or_else(|| invalid(format!("question {id} not found or has no options")))?,
        None => {
            if questionnaire.global_options.is_empty() {
                return Err(invalid(
                    "questionnaire has per-question options; pick one with --question",
                ));
            }
            &questionnaire.global_options[..]
        }
    };
    let pairs =
        generate_seed_pairs(&builtin_judge_templates(), options).map_err(judge_data_err)?;
    write_jsonl(out, &pairs).map_err(export_err)?;
    println!("{} pair(s) -> {}", pairs.len(), out.display());
    Ok(())
}

pub fn negative(input: &Path, ratio: u32, seed: u64, out: &Path) -> Result<()> {
    let positives: Vec<JudgePair> = read_complete(input)?;
    let negatives = sample_negatives(&positives, ratio, seed).map_err(judge_data_err)?;
    write_jsonl(out, &negatives).map_err(export_err)?;
    println!("{} negative(s) -> {}", negatives.len(), out.display());
    Ok(())
}

pub fn paraphrase_prompt(input: &Path, strategies: usize, seed: u64, out: &Path) -> Result<()> {
    let pairs: Vec<JudgePair> = read_complete(input)?;
    let prompts =
        build_paraphrase_prompts(&pairs, &builtin_paraphrase_strategies(), strategies, seed)
            .map_err(judge_data_err)?;
    write_jsonl(out, &prompts).map_err(export_err)?;
    println!("{} prompt(s) -> {}", prompts.len(), out.display());
    Ok(())
}

pub fn threshold(input: &Path) -> Result<()> {
    let points: Vec<LabeledEntropy> = read_complete(input)?;
    let threshold = select_entropy_threshold(&points).map_err(judge_data_err)?;
    println!("{threshold}");
    Ok(())
}

/// Pair plus an externally computed paraphrase similarity score.
#[derive(Serialize, Deserialize)]
struct ScoredPair {
    #[serde(flatten)]
    pair: JudgePair,
    similarity: f64,
}

pub fn filter(input: &Path, percentile: f64, out: &Path) -> Result<()> {
    let scored: Vec<ScoredPair> = read_complete(input)?;
    let total = scored.len();
    let tuples: Vec<(JudgePair, f64)> =
        scored.into_iter().map(|s| (s.pair, s.similarity)).collect();
    let kept = filter_by_similarity(&tuples, percentile).map_err(judge_data_err)?;
    write_jsonl(out, &kept).map_err(export_err)?;
    println!("kept {} of {} -> {}", kept.len(), total, out.display());
    Ok(())
}

#[derive(Deserialize)]
struct EvalRow {
    gold: String,
    judgment: Judgment,
}

pub fn f1(
    input: &Path,
    iterations: u32,
    seed: u64,
    averaging: F1Averaging,
    averaging_name: &str,
) -> Result<()> {
    let rows: Vec<EvalRow> = read_complete(input)?;
    let (judgments, gold): (Vec<Judgment>, Vec<String>) =
        rows.into_iter().map(|r| (r.judgment, r.gold)).unzip();
    let point = point_f1(&judgments, &gold, averaging).map_err(judge_data_err)?;
    let summary =
        bootstrap_f1(&judgments, &gold, iterations, seed, averaging).map_err(judge_data_err)?;
    let doc = serde_json::json!({
        "averaging": averaging_name,
        "point": point,
        "mean": summary.mean,
        "q01": summary.q01,
        "q99": summary.q99,
        "iterations": iterations,
    });
    println!("{}", serde_json::to_string(&doc).map_err(|e| runtime(anyhow!(e)))?);
    Ok(())
}
