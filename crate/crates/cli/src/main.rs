use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use proctor_core::judge_data::F1Averaging;
use proctor_core::prompt::PromptVariant;

mod commands;

use commands::CliError;

/// Administers questionnaires to language models: validate a definition,
/// run it, judge and score the responses, report aggregates.
#[derive(Parser)]
#[command(name = "proctor", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check an experiment config and print every violation.
    Validate {
        /// Experiment config (JSON).
        #[arg(value_name = "CONFIG", required_unless_present = "config_flag", conflicts_with = "config_flag")]
        config: Option<PathBuf>,
        #[arg(long = "config", value_name = "CONFIG", hide = true)]
        config_flag: Option<PathBuf>,
    },
    /// Execute the run plan, appending one raw response per line.
    Run {
        #[arg(value_name = "CONFIG", required_unless_present = "config_flag", conflicts_with = "config_flag")]
        config: Option<PathBuf>,
        #[arg(long = "config", value_name = "CONFIG", hide = true)]
        config_flag: Option<PathBuf>,
        /// Raw response file to write.
        #[arg(long)]
        out: PathBuf,
        /// Requests in flight at once.
        #[arg(long, default_value_t = 4)]
        parallelism: usize,
        /// Keep completed tasks from an interrupted file, redo the rest.
        #[arg(long)]
        resume: bool,
        /// Replace the config's seed list with this one seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the prompt variant.
        #[arg(long, value_enum)]
        variant: Option<VariantArg>,
    },
    /// Clean, validate and judge raw responses into records.
    Postprocess {
        /// Raw response file from `run`.
        #[arg(value_name = "IN", required_unless_present = "in_flag", conflicts_with = "in_flag")]
        input: Option<PathBuf>,
        #[arg(long = "in", value_name = "IN", hide = true)]
        in_flag: Option<PathBuf>,
        #[arg(long)]
        config: PathBuf,
        /// Record file to write.
        #[arg(long)]
        out: PathBuf,
        /// Which judge decides the chosen option.
        #[arg(long, value_enum, default_value_t = JudgeArg::Rule)]
        judge: JudgeArg,
        /// Override the entropy cutoff for the model judge.
        #[arg(long)]
        entropy_threshold: Option<f64>,
    },
    /// Score judged records into per-run scale values.
    Score {
        /// Record file from `postprocess`.
        #[arg(value_name = "IN", required_unless_present = "in_flag", conflicts_with = "in_flag")]
        input: Option<PathBuf>,
        #[arg(long = "in", value_name = "IN", hide = true)]
        in_flag: Option<PathBuf>,
        #[arg(long)]
        config: PathBuf,
        /// Score file to write.
        #[arg(long)]
        out: PathBuf,
    },
    /// Aggregate scores into a CSV table, or summarize answer rates.
    Report {
        /// Score file from `score` (record file with --rates).
        #[arg(value_name = "IN", required_unless_present = "in_flag", conflicts_with = "in_flag")]
        input: Option<PathBuf>,
        #[arg(long = "in", value_name = "IN", hide = true)]
        in_flag: Option<PathBuf>,
        #[arg(long)]
        config: PathBuf,
        /// Write here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Comma-separated grouping keys: model, group, gender, scale.
        #[arg(long, value_delimiter = ',')]
        group_by: Vec<String>,
        /// Report invalid/rejected/NA percentages from a record file.
        #[arg(long)]
        rates: bool,
        /// With --rates: also report how often this option label was chosen.
        #[arg(long)]
        action_label: Option<String>,
    },
    /// Build and evaluate training data for the model judge.
    #[command(subcommand)]
    JudgeData(JudgeDataCommand),
}

#[derive(Subcommand)]
enum JudgeDataCommand {
    /// Cross the built-in answer templates with a questionnaire's options.
    SeedPair {
        #[arg(long)]
        config: PathBuf,
        /// Take options from this question instead of the shared list.
        #[arg(long)]
        question: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Draw mismatched options for existing pairs.
    Negative {
        /// Pair file (JSONL).
        #[arg(value_name = "IN", required_unless_present = "in_flag", conflicts_with = "in_flag")]
        input: Option<PathBuf>,
        #[arg(long = "in", value_name = "IN", hide = true)]
        in_flag: Option<PathBuf>,
        /// Negatives drawn per pair.
        #[arg(long, default_value_t = 3)]
        ratio: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render paraphrasing prompts for pairs; running them is external.
    ParaphrasePrompt {
        /// Pair file (JSONL).
        #[arg(value_name = "IN", required_unless_present = "in_flag", conflicts_with = "in_flag")]
        input: Option<PathBuf>,
        #[arg(long = "in", value_name = "IN", hide = true)]
        in_flag: Option<PathBuf>,
        /// Strategies sampled into each prompt.
        #[arg(long, default_value_t = 5)]
        strategies: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Pick the entropy cutoff from annotated judgments.
    Threshold {
        /// JSONL of {"entropy": x, "gold": "match"|"noise"}.
        #[arg(value_name = "IN", required_unless_present = "in_flag", conflicts_with = "in_flag")]
        input: Option<PathBuf>,
        #[arg(long = "in", value_name = "IN", hide = true)]
        in_flag: Option<PathBuf>,
    },
    /// Drop pairs scored below a similarity percentile.
    Filter {
        /// JSONL of pairs with a "similarity" field.
        #[arg(value_name = "IN", required_unless_present = "in_flag", conflicts_with = "in_flag")]
        input: Option<PathBuf>,
        #[arg(long = "in", value_name = "IN", hide = true)]
        in_flag: Option<PathBuf>,
        #[arg(long, default_value_t = 25.0)]
        percentile: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Bootstrap F1 of judge predictions against gold labels.
    F1 {
        /// JSONL of {"gold": label-or-no-answer, "judgment": {...}}.
        #[arg(value_name = "IN", required_unless_present = "in_flag", conflicts_with = "in_flag")]
        input: Option<PathBuf>,
        #[arg(long = "in", value_name = "IN", hide = true)]
        in_flag: Option<PathBuf>,
        #[arg(long, default_value_t = 1000)]
        iterations: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = AveragingArg::Macro)]
        averaging: AveragingArg,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    Natural,
    Friendly,
    Json,
}

impl From<VariantArg> for PromptVariant {
    fn from(arg: VariantArg) -> Self {
        match arg {
            VariantArg::Natural => PromptVariant::Natural,
            VariantArg::Friendly => PromptVariant::Friendly,
            VariantArg::Json => PromptVariant::Json,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum JudgeArg {
    Rule,
    Model,
}

#[derive(Clone, Copy, ValueEnum)]
enum AveragingArg {
    Macro,
    Micro,
    Weighted,
}

impl AveragingArg {
    fn name(self) -> &'static str {
        match self {
            AveragingArg::Macro => "macro",
            AveragingArg::Micro => "micro",
            AveragingArg::Weighted => "weighted",
        }
    }
}

impl From<AveragingArg> for F1Averaging {
    fn from(arg: AveragingArg) -> Self {
        match arg {
            AveragingArg::Macro => F1Averaging::Macro,
            AveragingArg::Micro => F1Averaging::Micro,
            AveragingArg::Weighted => F1Averaging::Weighted,
        }
    }
}

fn pick(positional: Option<PathBuf>, flag: Option<PathBuf>) -> PathBuf {
    positional.or(flag).expect("clap enforces one of the two")
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env()
                .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("warn")),
        )
        .with_writer(std::io::stderr)
        .init();

    let cli = Cli::parse();
    let result = match cli.command {
        Command::Validate { config, config_flag } => commands::validate(&pick(config, config_flag)),
        Command::Run { config, config_flag, out, parallelism, resume, seed, variant } => {
            commands::run(commands::RunArgs {
                config: pick(config, config_flag),
                out,
                parallelism,
                resume,
                seed,
                variant: variant.map(Into::into),
            })
        }
        Command::Postprocess { input, in_flag, config, out, judge, entropy_threshold } => {
            commands::postprocess(commands::PostprocessArgs {
                input: pick(input, in_flag),
                config,
                out,
                model_judge: judge == JudgeArg::Model,
                entropy_threshold,
            })
        }
        Command::Score { input, in_flag, config, out } => {
            commands::score(&pick(input, in_flag), &config, &out)
        }
        Command::Report { input, in_flag, config, out, group_by, rates, action_label } => {
            commands::report(commands::ReportArgs {
                input: pick(input, in_flag),
                config,
                out,
                group_by,
                rates,
                action_label,
            })
        }
        Command::JudgeData(cmd) => match cmd {
            JudgeDataCommand::SeedPair { config, question, out } => {
                commands::seed_pair(&config, question.as_deref(), &out)
            }
            JudgeDataCommand::Negative { input, in_flag, ratio, seed, out } => {
                commands::negative(&pick(input, in_flag), ratio, seed, &out)
            }
            JudgeDataCommand::ParaphrasePrompt { input, in_flag, strategies, seed, out } => {
                commands::paraphrase_prompt(&pick(input, in_flag), strategies, seed, &out)
            }
            JudgeDataCommand::Threshold { input, in_flag } => {
                commands::threshold(&pick(input, in_flag))
            }
            JudgeDataCommand::Filter { input, in_flag, percentile, out } => {
                commands::filter(&pick(input, in_flag), percentile, &out)
            }
            JudgeDataCommand::F1 { input, in_flag, iterations, seed, averaging } => {
                commands::f1(
                    &pick(input, in_flag),
                    iterations,
                    seed,
                    averaging.into(),
                    averaging.name(),
                )
            }
        },
    };

    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Invalid(message)) => {
            eprintln!("{message}");
            ExitCode::from(1)
        }
        Err(CliError::Runtime(error)) => {
            eprintln!("error: {error}");
            ExitCode::from(2)
        }
    }
}
