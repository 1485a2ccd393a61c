//! `intrasent` — command-line front end for the discourse-relation toolkit.
//!
//! One binary, six subcommands (`dataset`, `train`, `eval`, `crossval`,
//! `parse`, `fixture`), all driven by a TOML run configuration. Exit codes:
//! 0 success, 1 invalid input or configuration, 2 runtime failure.

mod commands;
mod config;

use clap::{Parser, Subcommand, ValueEnum};
use config::RunConfig;
use intrasent::checkpoint::Task;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "intrasent",
    version,
    about = "Intra-sentential implicit discourse relation toolkit",
    max_term_width = 100
)]
struct Cli {
    /// Run configuration (TOML). Required by every subcommand.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Override every seed in the configuration (init, shuffle, split, fixture).
    #[arg(long, global = true, value_name = "INT")]
    seed: Option<u64>,

    /// Override the output directory.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Model checkpoint; repeat to pass both a tagger and a sense model.
    #[arg(long, global = true, value_name = "PATH")]
    checkpoint: Vec<PathBuf>,

    /// Extra evaluation slices: `multi`, `senses`, or `senses-<min gold count>`.
    #[arg(long, global = true, value_name = "LIST", value_delimiter = ',')]
    slices: Vec<String>,

    /// Restrict the command to one model.
    #[arg(long, global = true, value_enum)]
    task: Option<TaskArg>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum TaskArg {
    Tagger,
    Sense,
}

impl TaskArg {
    fn core(self) -> Task {
        match self {
            TaskArg::Tagger => Task::Tagger,
            TaskArg::Sense => Task::Sense,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Derive the tagging and sense datasets from a corpus and report its statistics.
    Dataset,
    /// Train one model (`--task tagger` or `--task sense`) on the configured split.
    Train,
    /// Evaluate checkpoints on the test split.
    Eval {
        /// Score the gold annotations against themselves instead of a model
        /// (every metric must come out at 100).
        #[arg(long)]
        self_test: bool,
    },
    /// K-fold cross-validation: train and evaluate per fold, report mean ± std.
    Crossval,
    /// Run the full pipeline over a corpus and write one parse per sentence.
    Parse,
    /// Generate the synthetic corpus and its generation ledger.
    Fixture,
}

fn run(cli: &Cli) -> anyhow::Result<()> {
    let config_path = cli
        .config
        .as_deref()
        .ok_or_else(|| intrasent::Error::Config("--config <PATH> is required".into()))?;
    let cfg = RunConfig::load(config_path, cli.seed, cli.out.as_deref())?;
    let task = cli.task.map(TaskArg::core);
    match cli.command {
        Command::Dataset => commands::cmd_dataset(&cfg),
        Command::Train => commands::cmd_train(&cfg, task),
        Command::Eval { self_test } => {
            commands::cmd_eval(&cfg, &cli.checkpoint, task, &cli.slices, self_test)
        }
        Command::Crossval => commands::cmd_crossval(&cfg, task),
        Command::Parse => commands::cmd_parse(&cfg, &cli.checkpoint),
        Command::Fixture => commands::cmd_fixture(&cfg),
    }
}

/// 1 for anything the user can fix in their invocation or inputs, 2 for
/// runtime failures (I/O, serialization, numerics).
fn exit_code_for(err: &anyhow::Error) -> u8 {
    err.chain()
        .find_map(|cause| cause.downcast_ref::<intrasent::Error>())
        .map_or(2, |e| e.exit_code() as u8)
}

/// The cause chain joined with `": "`, skipping causes whose text the wrapper
/// above them already embeds in its own message.
fn render_error(err: &anyhow::Error) -> String {
    let mut msg = String::new();
    let mut prev = String::new();
    for cause in err.chain() {
        let text = cause.to_string();
        if !prev.is_empty() && prev.ends_with(&text) {
            prev = text;
            continue;
        }
        if !msg.is_empty() {
            msg.push_str(": ");
        }
        msg.push_str(&text);
        prev = text;
    }
    msg
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {}", render_error(&err));
            ExitCode::from(exit_code_for(&err))
        }
    }
}
