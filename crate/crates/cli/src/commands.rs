use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use pairsim::corpus::{
    generate_pairs, prepare_records, read_jsonl, read_records, split_dataset, synth_corpus, write_jsonl,
    write_records, DatasetSplit, PreparedRecord, Rounding, TextPair,
};
use pairsim::embedding::{build_vocab, load_embeddings, save_embeddings, train_cbow};
use pairsim::encoder::EncoderRegistry;
use pairsim::pipeline::{
    config_digest, evaluate, fit, gradient_suite, learning_curve, results_table, Checkpoint, EpochRecord,
    GradSuiteConfig, LearningCurve, Metrics, MetricsReport,
};
use pairsim::simhead::predict_score;
use pairsim::textproc::{NormalizationTable, Preprocessor, StopWordList};
use pairsim::{Error, Result};
use serde::Serialize;

use crate::config::{part_path, RunConfig};
use crate::{Cli, Command, ModelArgs};

const PARTS: [&str; 3] = ["train", "validation", "test"];

/// Effective configuration plus what every artifact records about it.
struct Run {
    cfg: RunConfig,
    seed: u64,
    digest: String,
    command: &'static str,
}

#[derive(Serialize)]
struct Meta<'a> {
    command: &'a str,
    seed: u64,
    config_digest: &'a str,
}

impl Run {
    /// Seed and config digest beside an artifact whose format has no room
    /// for them.
    fn write_meta(&self, artifact: &Path) -> Result<()> {
        let mut name = artifact.as_os_str().to_owned();
        name.push(".meta.json");
        write_json(
            Path::new(&name),
            &Meta {
                command: self.command,
                seed: self.seed,
                config_digest: &self.digest,
            },
        )
    }

    fn preprocessor(&self) -> Result<Preprocessor> {
        let table = match &self.cfg.paths.normalization {
            Some(p) => NormalizationTable::load(require(p)?)?,
            None => NormalizationTable::persian_default(),
        };
        let stops = match &self.cfg.paths.stopwords {
            Some(p) => StopWordList::load(require(p)?, &table)?,
            None => StopWordList::persian_default(&table),
        };
        Ok(Preprocessor::new(table, stops))
    }

    /// Records from either a raw records file or a preprocessed one.
    fn prepared(&self, path: &Path) -> Result<Vec<PreparedRecord>> {
        require(path)?;
        let text = std::fs::read_to_string(path)?;
        let first = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("{}");
        let already = serde_json::from_str::<serde_json::Value>(first)
            .map(|v| v.get("tokens").is_some())
            .unwrap_or(false);
        let prepared = if already {
            read_jsonl(path)?
        } else {
            prepare_records(&read_records(path)?, &self.preprocessor()?)
        };
        if prepared.is_empty() {
            return Err(Error::Validation(format!("{} holds no usable records", path.display())));
        }
        Ok(prepared)
    }

    fn header(&self) -> String {
        format!("# seed {}, config sha256 {}\n", self.seed, self.digest)
    }
}

fn require(path: &Path) -> Result<&Path> {
    if path.exists() {
        Ok(path)
    } else {
        Err(Error::Validation(format!("input {} does not exist", path.display())))
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, text)?;
    Ok(())
}

fn set<T>(slot: &mut T, flag: Option<T>) {
    if let Some(v) = flag {
        *slot = v;
    }
}

fn apply_model_args(cfg: &mut RunConfig, m: &ModelArgs) {
    let t = &mut cfg.train;
    set(&mut t.max_len, m.max_len);
    if m.hidden.is_some() {
        t.hidden = m.hidden;
    }
    set(&mut t.filter_width, m.filter_width);
    if m.independent_encoders {
        t.share_weights = false;
    }
    if m.epochs.is_some() {
        t.epochs = m.epochs;
    }
    set(&mut t.batch_size, m.batch_size);
    set(&mut t.adam.lr, m.lr);
    if m.freeze_embeddings {
        t.fine_tune_embeddings = false;
    }
}

/// Folds the command's flags into the configuration.
fn apply_flags(cfg: &mut RunConfig, command: &Command) {
    let p = &mut cfg.paths;
    match command {
        Command::Synth(a) => {
            set(&mut p.records, a.out.clone());
            set(&mut cfg.synth.records_per_leaf, a.records_per_leaf);
            if a.total_records.is_some() {
                cfg.synth.total_records = a.total_records;
            }
        }
        Command::Preprocess(a) => {
            set(&mut p.records, a.input.clone());
            set(&mut p.prepared, a.out.clone());
        }
        Command::BuildVocab(a) => {
            set(&mut p.records, a.io.input.clone());
            set(&mut p.vocab, a.io.out.clone());
            set(&mut cfg.embedding.min_count, a.min_count);
        }
        Command::TrainEmbeddings(a) => {
            set(&mut p.records, a.io.input.clone());
            set(&mut p.embeddings, a.io.out.clone());
            let e = &mut cfg.embedding;
            set(&mut e.min_count, a.min_count);
            set(&mut e.dim, a.dim);
            set(&mut e.window, a.window);
            set(&mut e.negatives, a.negatives);
            set(&mut e.epochs, a.epochs);
            set(&mut e.lr, a.lr);
        }
        Command::GenPairs(a) => {
            set(&mut p.records, a.io.input.clone());
            set(&mut p.pairs, a.io.out.clone());
            set(&mut cfg.pairs.target_per_class, a.target_per_class);
            if a.floor_rounding {
                cfg.pairs.rounding = Rounding::Floor;
            }
        }
        Command::Split(a) => set(&mut p.pairs, a.input.clone()),
        Command::Train(a) => {
            set(&mut p.pairs, a.pairs.clone());
            set(&mut p.embeddings, a.embeddings.clone());
            set(&mut p.checkpoint, a.checkpoint.clone());
            set(&mut p.reports, a.reports.clone());
            set(&mut cfg.train.encoder, a.encoder.clone());
            apply_model_args(cfg, &a.model);
        }
        Command::Eval(a) => {
            set(&mut p.checkpoint, a.checkpoint.clone());
            set(&mut p.reports, a.reports.clone());
        }
        Command::LearningCurve(a) => {
            set(&mut p.pairs, a.pairs.clone());
            set(&mut p.embeddings, a.embeddings.clone());
            set(&mut p.reports, a.reports.clone());
            set(&mut cfg.curve.sizes, a.sizes.clone());
            set(&mut cfg.curve.encoders, a.encoders.clone());
            apply_model_args(cfg, &a.model);
        }
        Command::Predict(a) => set(&mut p.checkpoint, a.checkpoint.clone()),
        Command::Gradcheck(_) => {}
    }
}

fn name(command: &Command) -> &'static str {
    match command {
        Command::Synth(_) => "synth",
        Command::Preprocess(_) => "preprocess",
        Command::BuildVocab(_) => "build-vocab",
        Command::TrainEmbeddings(_) => "train-embeddings",
        Command::GenPairs(_) => "gen-pairs",
        Command::Split(_) => "split",
        Command::Train(_) => "train",
        Command::Eval(_) => "eval",
        Command::LearningCurve(_) => "learning-curve",
        Command::Predict(_) => "predict",
        Command::Gradcheck(_) => "gradcheck",
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    apply_flags(&mut cfg, &cli.command);
    let seed = cfg.resolve_seed(cli.seed)?;
    let run = Run {
        digest: config_digest(&cfg)?,
        cfg,
        seed,
        command: name(&cli.command),
    };
    match cli.command {
        Command::Synth(_) => synth(&run),
        Command::Preprocess(a) => preprocess(&run, a.out.as_deref()),
        Command::BuildVocab(_) => vocab(&run),
        Command::TrainEmbeddings(_) => embeddings(&run),
        Command::GenPairs(_) => pairs(&run),
        Command::Split(_) => split(&run),
        Command::Train(_) => train(&run),
        Command::Eval(a) => eval(&run, a.input),
        Command::LearningCurve(_) => curve(&run),
        Command::Predict(a) => predict(&run, &a.text_a, &a.text_b),
        Command::Gradcheck(a) => gradcheck(&run, a.encoders, a.eps, a.tolerance),
    }
}

fn synth(run: &Run) -> Result<()> {
    let corpus = synth_corpus(&run.cfg.synth, run.seed)?;
    let out = &run.cfg.paths.records;
    write_records(out, &corpus.records)?;
    run.write_meta(out)?;
    println!("wrote {} records over {} leaves to {}", corpus.records.len(), corpus.leaves.len(), out.display());
    Ok(())
}

fn preprocess(run: &Run, out: Option<&Path>) -> Result<()> {
    let paths = &run.cfg.paths;
    let records = read_records(require(&paths.records)?)?;
    let prepared = prepare_records(&records, &run.preprocessor()?);
    let out = out.unwrap_or(&paths.prepared);
    write_jsonl(out, &prepared)?;
    run.write_meta(out)?;
    println!(
        "wrote {} records to {} ({} left without tokens)",
        prepared.len(),
        out.display(),
        records.len() - prepared.len()
    );
    Ok(())
}

fn vocab(run: &Run) -> Result<()> {
    let paths = &run.cfg.paths;
    let prepared = run.prepared(&paths.records)?;
    let streams: Vec<_> = prepared.into_iter().map(|r| r.tokens).collect();
    let vocab = build_vocab(&streams, run.cfg.embedding.min_count)?;
    let mut text = String::new();
    for (w, c) in vocab.words().iter().zip(vocab.counts()) {
        writeln!(text, "{w}\t{c}").expect("writing to a String");
    }
    write_text(&paths.vocab, &text)?;
    run.write_meta(&paths.vocab)?;
    println!("wrote {} words to {}", vocab.len(), paths.vocab.display());
    Ok(())
}

fn embeddings(run: &Run) -> Result<()> {
    let paths = &run.cfg.paths;
    let prepared = run.prepared(&paths.records)?;
    let streams: Vec<_> = prepared.into_iter().map(|r| r.tokens).collect();
    let vocab = build_vocab(&streams, run.cfg.embedding.min_count)?;
    let outcome = train_cbow(&streams, &vocab, &run.cfg.cbow())?;
    save_embeddings(&outcome.matrix, &vocab, &paths.embeddings)?;
    run.write_meta(&paths.embeddings)?;
    for (i, loss) in outcome.epoch_losses.iter().enumerate() {
        println!("epoch {}: loss {loss:.4}", i + 1);
    }
    println!("wrote {} vectors of width {} to {}", vocab.len(), outcome.matrix.dim(), paths.embeddings.display());
    Ok(())
}

fn pairs(run: &Run) -> Result<()> {
    let paths = &run.cfg.paths;
    let prepared = run.prepared(&paths.records)?;
    let pairs = generate_pairs(&prepared, run.cfg.pair_gen(), run.seed)?;
    write_jsonl(&paths.pairs, &pairs)?;
    run.write_meta(&paths.pairs)?;
    println!("wrote {} pairs to {}", pairs.len(), paths.pairs.display());
    Ok(())
}

fn split(run: &Run) -> Result<()> {
    let input = &run.cfg.paths.pairs;
    let pairs: Vec<TextPair> = read_jsonl(require(input)?)?;
    let split = split_dataset(pairs, run.seed)?;
    for (part, items) in PARTS.iter().zip([&split.train, &split.validation, &split.test]) {
        let out = part_path(input, part);
        write_jsonl(&out, items)?;
        run.write_meta(&out)?;
        println!("{part}: {} pairs in {}", items.len(), out.display());
    }
    Ok(())
}

fn load_split(pairs: &Path, parts: &[&str]) -> Result<Vec<Vec<TextPair>>> {
    let files: Vec<PathBuf> = parts.iter().map(|p| part_path(pairs, p)).collect();
    for f in &files {
        require(f)?;
    }
    files.iter().map(read_jsonl).collect()
}

#[derive(Serialize)]
struct TrainReport<'a> {
    seed: u64,
    config_digest: &'a str,
    encoder: &'a str,
    skipped_pairs: usize,
    history: &'a [EpochRecord],
}

fn train(run: &Run) -> Result<()> {
    let paths = &run.cfg.paths;
    require(&paths.embeddings)?;
    let mut parts = load_split(&paths.pairs, &PARTS[..2])?;
    let (validation, train) = (parts.pop().expect("two parts"), parts.pop().expect("two parts"));
    let (matrix, vocab) = load_embeddings(&paths.embeddings)?;
    let kind = run.cfg.train.encoder.clone();
    let cfg = run.cfg.train_config(&kind, matrix.dim());
    let mut outcome = fit(&EncoderRegistry::builtin(), &train, &validation, &matrix, &vocab, &cfg)?;
    outcome.checkpoint.config_digest = Some(run.digest.clone());
    outcome.checkpoint.save(&paths.checkpoint)?;
    for h in &outcome.history {
        println!(
            "epoch {}: train loss {:.4}, validation weighted F1 {:.4}",
            h.epoch, h.train_loss, h.validation_weighted_f1
        );
    }
    let report = paths.reports.join(format!("train-{kind}.json"));
    write_json(
        &report,
        &TrainReport {
            seed: run.seed,
            config_digest: &run.digest,
            encoder: &kind,
            skipped_pairs: outcome.skipped,
            history: &outcome.history,
        },
    )?;
    println!("saved {} and {}", paths.checkpoint.display(), report.display());
    Ok(())
}

fn eval(run: &Run, input: Option<PathBuf>) -> Result<()> {
    let paths = &run.cfg.paths;
    let input = input.unwrap_or_else(|| part_path(&paths.pairs, "test"));
    let checkpoint = Checkpoint::load(require(&paths.checkpoint)?)?;
    let pairs: Vec<TextPair> = read_jsonl(require(&input)?)?;
    let eval = evaluate(&checkpoint.model, &pairs)?;
    let kind = checkpoint.model.encoder_name().to_owned();
    let table = results_table(&[(kind.clone(), &eval.metrics)]);
    write_json(
        &paths.reports.join("metrics.json"),
        &MetricsReport {
            seed: checkpoint.train.seed,
            config_digest: run.digest.clone(),
            encoder: kind,
            metrics: eval.metrics.clone(),
            excluded_pairs: eval.excluded,
            history: Vec::new(),
        },
    )?;
    let header = format!("# seed {}, config sha256 {}\n", checkpoint.train.seed, run.digest);
    write_text(&paths.reports.join("metrics.txt"), &(header + &table))?;
    print!("{table}");
    print_confusion(&eval.metrics);
    if eval.excluded > 0 {
        println!("{} pairs without known words were excluded", eval.excluded);
    }
    Ok(())
}

fn print_confusion(m: &Metrics) {
    println!("confusion (rows true score, columns predicted):");
    for (score, row) in m.confusion.iter().enumerate() {
        let cells: Vec<String> = row.iter().map(|c| format!("{c:>7}")).collect();
        println!("  {score} {}", cells.join(""));
    }
}

#[derive(Serialize)]
struct CurveReport<'a> {
    seed: u64,
    config_digest: &'a str,
    curve: &'a LearningCurve,
}

fn curve(run: &Run) -> Result<()> {
    let paths = &run.cfg.paths;
    require(&paths.embeddings)?;
    let mut parts = load_split(&paths.pairs, &PARTS)?;
    let test = parts.pop().expect("three parts");
    let validation = parts.pop().expect("three parts");
    let train = parts.pop().expect("three parts");
    let split = DatasetSplit {
        train,
        validation,
        test,
        seed: run.seed,
    };
    let (matrix, vocab) = load_embeddings(&paths.embeddings)?;
    let configs: Vec<_> = run
        .cfg
        .curve
        .encoders
        .iter()
        .map(|k| run.cfg.train_config(k, matrix.dim()))
        .collect();
    let curve = learning_curve(&run.cfg.curve.sizes, &configs, &split, &matrix, &vocab, run.seed)?;
    let table = curve.table();
    write_json(
        &paths.reports.join("learning_curve.json"),
        &CurveReport {
            seed: run.seed,
            config_digest: &run.digest,
            curve: &curve,
        },
    )?;
    write_text(&paths.reports.join("learning_curve.txt"), &(run.header() + &table))?;
    print!("{table}");
    Ok(())
}

fn predict(run: &Run, text_a: &str, text_b: &str) -> Result<()> {
    let checkpoint = Checkpoint::load(require(&run.cfg.paths.checkpoint)?)?;
    let pre = run.preprocessor()?;
    let (a, b) = (pre.run(text_a), pre.run(text_b));
    let dist = checkpoint
        .model
        .predict_tokens(&a, &b)?
        .ok_or_else(|| Error::Compatibility("a text has no word known to the model".into()))?;
    let probs: Vec<String> = dist.0.iter().map(|p| p.to_string()).collect();
    println!("distribution: {}", probs.join(" "));
    println!("score: {}", predict_score(&dist));
    Ok(())
}

fn gradcheck(run: &Run, encoders: Option<Vec<String>>, eps: Option<f64>, tolerance: f64) -> Result<()> {
    let mut cfg = GradSuiteConfig {
        seed: run.seed,
        ..GradSuiteConfig::default()
    };
    set(&mut cfg.encoders, encoders);
    set(&mut cfg.eps, eps);
    let mut worst: f64 = 0.0;
    for (kind, report) in gradient_suite(&cfg)? {
        println!("{kind}: max relative error {:.3e} over {} coordinates", report.max_rel_error, report.coords_checked);
        worst = worst.max(report.max_rel_error);
    }
    println!("max relative error: {worst:.3e}");
    if worst > tolerance {
        return Err(Error::Contract(format!("gradient error {worst:.3e} exceeds {tolerance:.1e}")));
    }
    Ok(())
}
