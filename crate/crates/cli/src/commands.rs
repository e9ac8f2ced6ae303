use std::io::{self, BufRead, Write};
use std::path::Path;

use anyhow::{anyhow, Context};
use pratyaya::corpus::{
    corpus_stats, filter_category, filter_suffixes, load_corpus, make_split, CorpusError, DerivationRecord, Direction,
    SequenceLimits, SuffixCategory, Vocabulary,
};
use pratyaya::eval::{benchmark_report, evaluate as score, per_suffix_table, reference_rows, report_tsv, Task};
use pratyaya::seq2seq::{self, Checkpoint, CheckpointMetadata, ModelConfig, ModelError, Predictor};
use pratyaya::translit;

use crate::config::RunConfig;

/// A failed command. Usage failures exit with 2, runtime failures with 1.
#[derive(Debug)]
pub enum Failure {
    Usage(anyhow::Error),
    Runtime(anyhow::Error),
}

fn runtime(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Runtime(e.into())
}

fn corpus_failure(e: CorpusError) -> Failure {
    match e {
        CorpusError::Io { .. } => Failure::Usage(anyhow!("cannot read corpus: {e}")),
        other => Failure::Runtime(other.into()),
    }
}

fn model_failure(e: ModelError) -> Failure {
    match e {
        ModelError::Config(_) | ModelError::Io { .. } => Failure::Usage(e.into()),
        other => Failure::Runtime(other.into()),
    }
}

fn load_filtered(
    path: &Path,
    category: Option<SuffixCategory>,
    excluded: &[String],
) -> Result<Vec<DerivationRecord>, Failure> {
    let mut records = load_corpus(path).map_err(corpus_failure)?;
    if let Some(category) = category {
        records = filter_category(records, category);
    }
    Ok(filter_suffixes(records, excluded))
}

fn write_file(path: &Path, contents: &str) -> Result<(), Failure> {
    std::fs::write(path, contents).with_context(|| format!("cannot write {}", path.display())).map_err(runtime)
}

pub fn train(c: &RunConfig) -> Result<(), Failure> {
    let corpus = c.corpus_path().map_err(|e| Failure::Usage(e.into()))?;
    let excluded = c.excluded_suffixes();
    let records = load_filtered(corpus, c.category, &excluded)?;
    let (fraction, split_seed) = c.resolved_split();
    let split = make_split(&records, fraction, split_seed).map_err(corpus_failure)?;
    // the alphabet and length limits cover the whole filtered corpus so the
    // test partition never holds an unencodable record
    let vocab = Vocabulary::build(&records).map_err(runtime)?;
    let fitted = SequenceLimits::fit(&records, c.direction);
    let limits = SequenceLimits {
        source_max: c.source_max.unwrap_or(fitted.source_max),
        target_max: c.target_max.unwrap_or(fitted.target_max),
    };
    if limits.source_max < fitted.source_max || limits.target_max < fitted.target_max {
        return Err(Failure::Usage(anyhow!(
            "pinned lengths {}/{} are shorter than the corpus needs ({}/{})",
            limits.source_max,
            limits.target_max,
            fitted.source_max,
            fitted.target_max
        )));
    }
    let model_config = ModelConfig::new(c.latent_dim, vocab.len(), limits.source_max, limits.target_max);
    let train_config = c.train_config();
    eprintln!(
        "{} model: {} training records, {} test records, vocabulary {}, lengths {}/{}",
        c.direction,
        split.train.len(),
        split.test.len(),
        vocab.len(),
        limits.source_max,
        limits.target_max
    );
    let outcome =
        seq2seq::train(&split.train, c.direction, &vocab, &model_config, &train_config, |e| match e.validation_loss {
            Some(v) => eprintln!("epoch {:>3}  train {:.4}  validation {:.4}", e.epoch, e.train_loss, v),
            None => eprintln!("epoch {:>3}  train {:.4}", e.epoch, e.train_loss),
        })
        .map_err(model_failure)?;

    let last = outcome.history.last();
    let metadata = CheckpointMetadata {
        direction: c.direction,
        seed: c.seed,
        epochs_run: outcome.history.epochs.len(),
        best_epoch: outcome.best_epoch,
        final_train_loss: last.map(|e| e.train_loss),
        final_validation_loss: last.and_then(|e| e.validation_loss),
        split_seed: Some(split_seed),
        split_fraction: Some(fraction),
        category: c.category,
        excluded_suffixes: excluded,
        corpus_records: Some(records.len()),
    };
    let checkpoint = Checkpoint::new(vocab, outcome.params, metadata).map_err(runtime)?;
    checkpoint.save(&c.checkpoint).map_err(runtime)?;
    let history = c.history_path();
    write_file(&history, &outcome.history.to_tsv())?;
    eprintln!("best epoch {}; wrote {} and {}", outcome.best_epoch, c.checkpoint.display(), history.display());
    Ok(())
}

fn load_checkpoint(path: &Path) -> Result<Checkpoint, Failure> {
    Checkpoint::load(path).map_err(|e| match e {
        ModelError::Io { .. } => Failure::Usage(anyhow!("cannot read checkpoint: {e}")),
        other => Failure::Runtime(other.into()),
    })
}

fn itrans_input(line: &str, direction: Direction) -> Result<String, translit::TranslitError> {
    match direction {
        Direction::Formation => {
            let parts = line.split('+').map(translit::itrans_to_slp1).collect::<Result<Vec<_>, _>>()?;
            Ok(parts.join("+"))
        }
        Direction::Split => translit::itrans_to_slp1(line),
    }
}

/// One output line per input line; inputs that fail print an empty line on
/// stdout and a message on stderr.
pub fn predict(c: &RunConfig, direction_given: bool, itrans: bool, inputs: &[String]) -> Result<(), Failure> {
    let checkpoint = load_checkpoint(&c.checkpoint)?;
    let direction = checkpoint.metadata.direction;
    if direction_given && c.direction != direction {
        return Err(Failure::Usage(anyhow!(
            "{} holds a {direction} model, not {}",
            c.checkpoint.display(),
            c.direction
        )));
    }
    let lines: Vec<String> = if inputs.is_empty() {
        io::stdin().lock().lines().collect::<Result<_, _>>().map_err(runtime)?
    } else {
        inputs.to_vec()
    };
    let mut converted: Vec<Result<String, String>> = Vec::with_capacity(lines.len());
    for line in &lines {
        let line = line.trim();
        converted.push(if itrans {
            itrans_input(line, direction).map_err(|e| e.to_string())
        } else {
            Ok(line.to_string())
        });
    }
    let ready: Vec<&str> = converted.iter().filter_map(|r| r.as_deref().ok()).filter(|s| !s.is_empty()).collect();
    let predictor = Predictor::new(&checkpoint.params, &checkpoint.vocab, direction);
    let mut outputs = predictor.predict(&ready).map_err(runtime)?.into_iter();

    let stdout = io::stdout();
    let mut out = stdout.lock();
    let mut failed = 0;
    for (i, input) in converted.iter().enumerate() {
        let result = match input {
            Ok(s) if s.is_empty() => Ok(String::new()),
            Ok(_) => outputs.next().expect("one output per input").map_err(|e| e.to_string()),
            Err(e) => Err(e.clone()),
        };
        match result {
            Ok(s) => writeln!(out, "{s}").map_err(runtime)?,
            Err(e) => {
                failed += 1;
                eprintln!("input {}: {e}", i + 1);
                writeln!(out).map_err(runtime)?;
            }
        }
    }
    if failed > 0 {
        return Err(runtime(anyhow!("{failed} of {} inputs could not be processed", converted.len())));
    }
    Ok(())
}

fn check_split(c: &RunConfig, meta: &CheckpointMetadata) -> Result<(f64, u64), Failure> {
    let stored_fraction =
        meta.split_fraction.ok_or_else(|| runtime(anyhow!("checkpoint does not record its split")))?;
    let stored_seed = meta.split_seed.ok_or_else(|| runtime(anyhow!("checkpoint does not record its split")))?;
    if let Some(f) = c.split_fraction.filter(|&f| f != stored_fraction) {
        return Err(Failure::Usage(anyhow!(
            "split mismatch: requested split_fraction {f}, checkpoint was trained with {stored_fraction}"
        )));
    }
    if let Some(s) = c.split_seed.filter(|&s| s != stored_seed) {
        return Err(Failure::Usage(anyhow!(
            "split mismatch: requested split_seed {s}, checkpoint was trained with {stored_seed}"
        )));
    }
    Ok((stored_fraction, stored_seed))
}

pub fn evaluate(c: &RunConfig) -> Result<(), Failure> {
    let checkpoint = load_checkpoint(&c.checkpoint)?;
    let meta = &checkpoint.metadata;
    let (fraction, split_seed) = check_split(c, meta)?;
    let corpus = c.corpus_path().map_err(|e| Failure::Usage(e.into()))?;
    let records = load_filtered(corpus, meta.category, &meta.excluded_suffixes)?;
    if let Some(n) = meta.corpus_records.filter(|&n| n != records.len()) {
        return Err(Failure::Usage(anyhow!(
            "split mismatch: corpus has {} records after filtering, checkpoint was trained on {n}",
            records.len()
        )));
    }
    let split = make_split(&records, fraction, split_seed).map_err(corpus_failure)?;
    let direction = meta.direction;
    let inputs: Vec<String> = split.test.iter().map(|r| direction.texts(r).0).collect();
    let refs: Vec<&str> = inputs.iter().map(String::as_str).collect();
    let predictor = Predictor::new(&checkpoint.params, &checkpoint.vocab, direction);
    let mut unencodable = 0;
    let predictions: Vec<String> = predictor
        .predict(&refs)
        .map_err(runtime)?
        .into_iter()
        .map(|r| {
            r.unwrap_or_else(|_| {
                unencodable += 1;
                String::new()
            })
        })
        .collect();
    if unencodable > 0 {
        eprintln!("warning: {unencodable} test inputs could not be encoded and count as failures");
    }
    let task = Task { direction, category: meta.category };
    let report = score(&split.test, &predictions, task, &c.model_name, c.char_alignment).map_err(runtime)?;

    let mut text = benchmark_report(std::slice::from_ref(&report), &reference_rows());
    text.push_str(
        &format!("\ncharacter accuracy ({:?}): {:.4}\n", report.alignment, report.char_accuracy).to_lowercase(),
    );
    if let Some(f) = report.char_accuracy_failures {
        text.push_str(&format!("character accuracy on failures: {f:.4}\n"));
    }
    if direction == Direction::Split {
        text.push_str(&format!("outputs without '+': {}\n", report.malformed));
    }
    text.push('\n');
    text.push_str(&per_suffix_table(&report));
    print!("{text}");
    if let Some(path) = &c.report {
        write_file(path, &text)?;
    }
    if let Some(path) = &c.report_tsv {
        write_file(path, &report_tsv(std::slice::from_ref(&report)))?;
    }
    if let Some(floor) = c.min_accuracy {
        if report.accuracy() < floor {
            return Err(runtime(anyhow!("accuracy {:.4} is below the floor {floor}", report.accuracy())));
        }
    }
    Ok(())
}

pub fn stats(c: &RunConfig, kv: bool) -> Result<(), Failure> {
    let corpus = c.corpus_path().map_err(|e| Failure::Usage(e.into()))?;
    let records = load_corpus(corpus).map_err(corpus_failure)?;
    let stats = corpus_stats(&records);
    print!("{}", if kv { stats.render_kv() } else { stats.render_table() });
    Ok(())
}

pub fn translit(from_itrans: bool) -> Result<(), Failure> {
    let stdin = io::stdin();
    let stdout = io::stdout();
    let mut out = stdout.lock();
    let mut failed = 0;
    for (i, line) in stdin.lock().lines().enumerate() {
        let line = line.map_err(runtime)?;
        let converted = if from_itrans { translit::itrans_to_slp1(&line) } else { translit::slp1_to_itrans(&line) };
        match converted {
            Ok(s) => writeln!(out, "{s}").map_err(runtime)?,
            Err(e) => {
                failed += 1;
                eprintln!("line {}: {e}", i + 1);
                writeln!(out).map_err(runtime)?;
            }
        }
    }
    if failed > 0 {
        return Err(runtime(anyhow!("{failed} lines could not be converted")));
    }
    Ok(())
}
