mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

/// Category-overlap scoring of text pairs with mean, CNN or LSTM encoders.
///
/// Every command reads its defaults from an optional JSON config file;
/// flags override it. Seeds come from --seed, then the config file, then
/// the PAIRSIM_SEED environment variable, then 0.
#[derive(Parser, Debug)]
#[command(name = "pairsim", version, arg_required_else_help = true)]
pub struct Cli {
    /// JSON run configuration (all fields optional)
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Seed for every random stream
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Write a synthetic categorized records file
    Synth(SynthArgs),
    /// Normalize, tokenize and filter stop words of a records file
    Preprocess(IoArgs),
    /// Count words and write the vocabulary (word<TAB>count)
    BuildVocab(VocabArgs),
    /// Train CBOW word vectors
    TrainEmbeddings(EmbeddingArgs),
    /// Draw balanced scored pairs from records
    GenPairs(PairArgs),
    /// Split a pairs file into test, validation and train parts
    Split(SplitArgs),
    /// Train a pair model
    Train(TrainArgs),
    /// Evaluate a model on labelled pairs
    Eval(EvalArgs),
    /// Train and evaluate at growing training-set sizes
    LearningCurve(CurveArgs),
    /// Score two raw texts
    Predict(PredictArgs),
    /// Check model gradients against finite differences
    Gradcheck(GradArgs),
}

#[derive(Args, Debug)]
pub struct IoArgs {
    /// Input records [default: records.jsonl]
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Output file
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SplitArgs {
    /// Pairs file; parts go to <stem>.{train,validation,test}.jsonl beside it [default: pairs.jsonl]
    #[arg(long)]
    pub input: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    /// Output records file [default: records.jsonl]
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Records per leaf category [default: 100]
    #[arg(long)]
    pub records_per_leaf: Option<usize>,
    /// Total records dealt round-robin over the leaves (overrides --records-per-leaf)
    #[arg(long)]
    pub total_records: Option<usize>,
}

#[derive(Args, Debug)]
pub struct VocabArgs {
    #[command(flatten)]
    pub io: IoArgs,
    /// Minimum word count [default: 2]
    #[arg(long)]
    pub min_count: Option<u64>,
}

#[derive(Args, Debug)]
pub struct EmbeddingArgs {
    #[command(flatten)]
    pub io: IoArgs,
    /// Minimum word count [default: 2]
    #[arg(long)]
    pub min_count: Option<u64>,
    /// Vector width [default: 300]
    #[arg(long)]
    pub dim: Option<usize>,
    /// Context words on each side [default: 5]
    #[arg(long)]
    pub window: Option<usize>,
    /// Negative samples per prediction [default: 5]
    #[arg(long)]
    pub negatives: Option<usize>,
    /// Passes over the corpus [default: 5]
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Starting learning rate [default: 0.025]
    #[arg(long)]
    pub lr: Option<f64>,
}

#[derive(Args, Debug)]
pub struct PairArgs {
    #[command(flatten)]
    pub io: IoArgs,
    /// Pairs per score [default: 1000]
    #[arg(long)]
    pub target_per_class: Option<usize>,
    /// Round the 15% length tolerance down instead of half away from zero
    #[arg(long)]
    pub floor_rounding: bool,
}

#[derive(Args, Debug, Default)]
pub struct ModelArgs {
    /// Maximum text length in words [default: 40]
    #[arg(long)]
    pub max_len: Option<usize>,
    /// LSTM state size [default: embedding width]
    #[arg(long)]
    pub hidden: Option<usize>,
    /// CNN filter width [default: 3]
    #[arg(long)]
    pub filter_width: Option<usize>,
    /// Separate encoder weights for the two texts
    #[arg(long)]
    pub independent_encoders: bool,
    /// Epochs [default: 20, or 5 for lstm]
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Minibatch size [default: 64]
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Adam learning rate [default: 0.001]
    #[arg(long)]
    pub lr: Option<f64>,
    /// Keep word vectors fixed during training
    #[arg(long)]
    pub freeze_embeddings: bool,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Encoder: mean, cnn, cnn-full or lstm [default: cnn]
    #[arg(long)]
    pub encoder: Option<String>,
    /// Pairs file whose .train/.validation parts are used [default: pairs.jsonl]
    #[arg(long)]
    pub pairs: Option<PathBuf>,
    /// Word vectors [default: embeddings.txt]
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    /// Model output [default: model.ckpt]
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Report directory [default: reports]
    #[arg(long)]
    pub reports: Option<PathBuf>,
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// Model [default: model.ckpt]
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Labelled pairs [default: the .test part of the pairs file]
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Report directory [default: reports]
    #[arg(long)]
    pub reports: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct CurveArgs {
    /// Comma-separated training-set sizes [default: 2000,8000,32000]
    #[arg(long, value_delimiter = ',')]
    pub sizes: Option<Vec<usize>>,
    /// Comma-separated encoders [default: mean,cnn,lstm]
    #[arg(long, value_delimiter = ',')]
    pub encoders: Option<Vec<String>>,
    /// Pairs file whose split parts are used [default: pairs.jsonl]
    #[arg(long)]
    pub pairs: Option<PathBuf>,
    /// Word vectors [default: embeddings.txt]
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    /// Report directory [default: reports]
    #[arg(long)]
    pub reports: Option<PathBuf>,
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Args, Debug)]
pub struct PredictArgs {
    /// Model [default: model.ckpt]
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// First raw text
    #[arg(long)]
    pub text_a: String,
    /// Second raw text
    #[arg(long)]
    pub text_b: String,
}

#[derive(Args, Debug)]
pub struct GradArgs {
    /// Comma-separated encoders [default: mean,cnn,lstm]
    #[arg(long, value_delimiter = ',')]
    pub encoders: Option<Vec<String>>,
    /// Finite-difference step [default: 0.0001]
    #[arg(long)]
    pub eps: Option<f64>,
    /// Largest accepted relative error [default: 0.001]
    #[arg(long, default_value_t = 1e-3)]
    pub tolerance: f64,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_user_error() { 1 } else { 2 })
        }
    }
}
