//! `streamdec`: batch decoding, CTC score comparison, attention dumps and
//! toy data generation over a TOML run manifest.

// `!(x > 0.0)` is used on purpose so NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod manifest;
mod settings;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use settings::Overrides;

#[derive(Debug, Parser)]
#[command(name = "streamdec", version, about = "Streaming hybrid CTC/attention decoding")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Decode every utterance; writes `<id>.hyp` files and `rtf.csv`.
    Decode(RunArgs),
    /// Compare full and truncated CTC prefix scores; writes `<id>.ctc.csv`.
    CompareCtc(CompareArgs),
    /// Dump decode-mode and training-mode attention weights.
    DumpAttention(DumpArgs),
    /// Generate toy utterances and a manifest that decodes them.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
struct RunArgs {
    manifest: PathBuf,
    /// Overrides `output_dir` from the manifest.
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Debug, Args)]
struct CompareArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Random prefixes per utterance, on top of the reference prefixes.
    #[arg(long, default_value_t = 20)]
    samples: usize,
    /// Longest random prefix, in content labels.
    #[arg(long, default_value_t = 6)]
    max_prefix_len: usize,
    /// Score gaps larger than this are flagged.
    #[arg(long, default_value_t = 1e-6)]
    gap_tolerance: f64,
}

#[derive(Debug, Args)]
struct DumpArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Use this selection probability everywhere for the training-mode dump.
    #[arg(long)]
    constant_p: Option<f64>,
    /// Output steps in the training-mode dump; defaults to the length of
    /// the best hypothesis.
    #[arg(long)]
    steps: Option<usize>,
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// Directory that receives the vocabulary, inputs and manifest.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 3)]
    utterances: usize,
    /// Labels per utterance.
    #[arg(long, default_value_t = 5)]
    labels: usize,
    #[arg(long, default_value_t = 8)]
    content_labels: usize,
    #[arg(long, default_value_t = 0.25)]
    temperature: f64,
    /// Write encoder outputs and posteriors instead of raw frames.
    #[arg(long)]
    encoded: bool,
    #[arg(long, env = "STREAMDEC_SEED", default_value_t = 0)]
    seed: u64,
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
    let code = match cli.command {
        Command::Decode(a) => commands::decode(&a.manifest, a.output_dir, &a.overrides),
        Command::CompareCtc(a) => commands::compare_ctc(
            &a.run.manifest,
            a.run.output_dir,
            &a.run.overrides,
            &commands::CompareOptions {
                samples: a.samples,
                max_prefix_len: a.max_prefix_len,
                gap_tolerance: a.gap_tolerance,
            },
        ),
        Command::DumpAttention(a) => commands::dump_attention(
            &a.run.manifest,
            a.run.output_dir,
            &a.run.overrides,
            a.constant_p,
            a.steps,
        ),
        Command::Synth(a) => commands::synth(&commands::SynthOptions {
            out: a.out,
            utterances: a.utterances,
            labels: a.labels,
            content_labels: a.content_labels,
            temperature: a.temperature,
            encoded: a.encoded,
            seed: a.seed,
        }),
    };
    ExitCode::from(code)
}
