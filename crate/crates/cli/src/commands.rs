//! The six subcommands. Every command reads the run configuration, writes
//! its outputs (plus a config echo) under the output directory, and never
//! mutates its inputs; identical config and seed produce byte-identical
//! primary outputs.

use crate::config::{DisambiguationMode, Mode, RunConfig, SplitMode};
use anyhow::{Context, Result};
use intrasent::checkpoint::{self, Task};
use intrasent::corpus::{
    corpus_stats, generate_d1, generate_d2, generate_fixture, kfold, load_corpus, save_corpus,
    save_d1, save_d2, split_random, AnnotatedSentence, D1Example, D2Example,
};
use intrasent::encoder::{load_contextual_vectors, EmbeddingSource, EncoderMode};
use intrasent::eval::{
    crossval_aggregate, evaluate_tagging, render_crossval, sense_report, slice_eval,
    tagged_examples, EvalReport, MeanStd, TaggedExample,
};
use intrasent::pipeline::{
    evaluate_pipeline, parse_corpus, save_parses, Disambiguation, PipelineEval,
};
use intrasent::sense::{train_sense, SenseModel};
use intrasent::tagger::{train_tagger, TaggerModel};
use intrasent::training::save_train_log;
use intrasent::{Error, SenseLabel, TagSequence, TrainConfig, TrainLog};
use serde::Serialize;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

fn config_error(msg: impl Into<String>) -> anyhow::Error {
    Error::Config(msg.into()).into()
}

fn load_input_corpus(cfg: &RunConfig) -> Result<Vec<AnnotatedSentence>> {
    let path = cfg.corpus_path()?;
    load_corpus(path).with_context(|| format!("loading corpus {}", path.display()))
}

/// Token-vector source for model construction, as the config requests.
fn embedding_source(cfg: &RunConfig, corpus: &[AnnotatedSentence]) -> Result<EmbeddingSource> {
    match cfg.encoder.mode {
        Mode::Scratch => Ok(EmbeddingSource::Seeded),
        Mode::PretrainedVectors => {
            let path = cfg.paths.vectors.clone().ok_or_else(|| {
                config_error("encoder mode pretrained-vectors needs paths.vectors")
            })?;
            Ok(EmbeddingSource::PretrainedFile(path))
        }
        Mode::ContextualFile => {
            let path = cfg.paths.contextual.as_ref().ok_or_else(|| {
                config_error("encoder mode contextual-file needs paths.contextual")
            })?;
            let vectors = load_contextual_vectors(path, corpus)
                .with_context(|| format!("loading contextual vectors {}", path.display()))?;
            Ok(EmbeddingSource::Contextual(Arc::new(vectors)))
        }
    }
}

/// Re-attach sentence vectors to a reloaded contextual-mode tagger.
fn attach_if_contextual(
    model: &mut TaggerModel,
    cfg: &RunConfig,
    corpus: &[AnnotatedSentence],
) -> Result<()> {
    if model.config().mode != EncoderMode::Contextual {
        return Ok(());
    }
    let path =
        cfg.paths.contextual.as_ref().ok_or_else(|| {
            config_error("checkpoint uses contextual vectors: set paths.contextual")
        })?;
    let vectors = load_contextual_vectors(path, corpus)
        .with_context(|| format!("loading contextual vectors {}", path.display()))?;
    model.attach_contextual(Arc::new(vectors))?;
    Ok(())
}

/// The train/dev/test partition; commands that need a single split reject
/// k-fold configurations up front.
fn random_split(
    cfg: &RunConfig,
    corpus: &[AnnotatedSentence],
) -> Result<(
    Vec<AnnotatedSentence>,
    Vec<AnnotatedSentence>,
    Vec<AnnotatedSentence>,
)> {
    match cfg.split.parse_mode()? {
        SplitMode::Random { ratios } => Ok(split_random(
            corpus,
            ratios,
            cfg.split.seed,
            cfg.split.unit,
        )?),
        SplitMode::KFold { .. } => Err(config_error(format!(
            "split mode {:?} has no single train/dev/test partition; use the crossval command \
             or a random-<train>-<dev>-<test> mode",
            cfg.split.mode
        ))),
    }
}

/// Load each `--checkpoint` by its stored task. At most one checkpoint per
/// task; `task_filter` drops the other one when `--task` was given.
fn load_checkpoints(
    paths: &[PathBuf],
    task_filter: Option<Task>,
    cfg: &RunConfig,
    corpus: &[AnnotatedSentence],
) -> Result<(Option<TaggerModel>, Option<SenseModel>)> {
    let mut tagger: Option<(TaggerModel, PathBuf)> = None;
    let mut sense: Option<(SenseModel, PathBuf)> = None;
    for path in paths {
        let task = checkpoint::peek_task(path)
            .with_context(|| format!("reading checkpoint {}", path.display()))?;
        if task_filter.is_some_and(|t| t != task) {
            continue;
        }
        let occupied = match task {
            Task::Tagger => tagger.as_ref().map(|(_, p)| p),
            Task::Sense => sense.as_ref().map(|(_, p)| p),
        };
        if let Some(first) = occupied {
            return Err(config_error(format!(
                "both {} and {} hold a {task} model; pass at most one checkpoint per task",
                first.display(),
                path.display()
            )));
        }
        match task {
            Task::Tagger => {
                let mut model = checkpoint::load_tagger(path)
                    .with_context(|| format!("loading {}", path.display()))?;
                attach_if_contextual(&mut model, cfg, corpus)?;
                tagger = Some((model, path.clone()));
            }
            Task::Sense => {
                let model = checkpoint::load_sense(path)
                    .with_context(|| format!("loading {}", path.display()))?;
                sense = Some((model, path.clone()));
            }
        }
    }
    Ok((tagger.map(|(m, _)| m), sense.map(|(m, _)| m)))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text)
        .map_err(Error::Io)
        .with_context(|| format!("writing {}", path.display()))
}

fn write_json_pretty<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(Error::Json)?;
    text.push('\n');
    write_text(path, &text)
}

fn loss_curve_csv(log: &TrainLog) -> String {
    let mut out = String::from("epoch,train_loss,dev_loss,grad_norm\n");
    for e in &log.epochs {
        out.push_str(&format!(
            "{},{},{},{}\n",
            e.epoch, e.train_loss, e.dev_loss, e.grad_norm
        ));
    }
    out
}

// ---------------------------------------------------------------------------
// dataset

pub fn cmd_dataset(cfg: &RunConfig) -> Result<()> {
    let corpus = load_input_corpus(cfg)?;
    cfg.write_echo()?;
    let opts = cfg.dataset.d1_options();
    let d1 = generate_d1(&corpus, &opts);
    let d2 = generate_d2(&corpus, &opts);
    save_d1(cfg.out_file("d1.jsonl"), &d1)?;
    save_d2(cfg.out_file("d2.jsonl"), &d2)?;
    let stats = corpus_stats(&corpus);
    let rendered = stats.render();
    write_text(&cfg.out_file("stats.txt"), &rendered)?;
    write_json_pretty(&cfg.out_file("stats.json"), &stats)?;
    print!("{rendered}");
    println!(
        "wrote {} tagging examples and {} sense examples to {}",
        d1.len(),
        d2.len(),
        cfg.paths.out.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// train

pub fn cmd_train(cfg: &RunConfig, task: Option<Task>) -> Result<()> {
    let task = task.ok_or_else(|| config_error("train needs --task tagger or --task sense"))?;
    let corpus = load_input_corpus(cfg)?;
    cfg.write_echo()?;
    let (train_s, dev_s, _) = random_split(cfg, &corpus)?;
    if train_s.is_empty() || dev_s.is_empty() {
        return Err(config_error(format!(
            "split leaves {} training and {} dev sentences; nothing to train on",
            train_s.len(),
            dev_s.len()
        )));
    }
    let source = embedding_source(cfg, &corpus)?;
    let opts = cfg.dataset.d1_options();

    let log = match task {
        Task::Tagger => {
            let d1_train = generate_d1(&train_s, &opts);
            let d1_dev = generate_d1(&dev_s, &opts);
            let tc = cfg.train.train_config(TrainConfig::tagger_defaults());
            let (model, log) = train_tagger(
                &d1_train,
                &d1_dev,
                &cfg.encoder.tagger_config(),
                source,
                &tc,
            )?;
            checkpoint::save_tagger(&cfg.out_file("tagger.ckpt.json"), &model)?;
            log
        }
        Task::Sense => {
            let d2_train = generate_d2(&train_s, &opts);
            let d2_dev = generate_d2(&dev_s, &opts);
            if d2_train.is_empty() || d2_dev.is_empty() {
                return Err(config_error(
                    "the split contains no in-scope relations to train the sense model on",
                ));
            }
            let tc = cfg.train.train_config(TrainConfig::sense_defaults());
            let (model, log) =
                train_sense(&d2_train, &d2_dev, &cfg.encoder.sense_config(), source, &tc)?;
            checkpoint::save_sense(&cfg.out_file("sense.ckpt.json"), &model)?;
            log
        }
    };

    save_train_log(cfg.out_file(&format!("{task}.train_log.jsonl")), &log)?;
    write_text(
        &cfg.out_file(&format!("{task}.loss_curve.csv")),
        &loss_curve_csv(&log),
    )?;
    let best = &log.epochs[log.best_epoch - 1];
    println!(
        "trained {task} for {} epochs ({}best epoch {}, dev loss {:.6})",
        log.epochs.len(),
        if log.stopped_early {
            "stopped early, "
        } else {
            ""
        },
        log.best_epoch,
        best.dev_loss
    );
    println!(
        "checkpoint: {}",
        cfg.out_file(&format!("{task}.ckpt.json")).display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// eval

/// Which slice families `--slices` asks for.
struct SliceSelection {
    multi: bool,
    senses: bool,
    sense_threshold: usize,
}

impl SliceSelection {
    fn parse(tokens: &[String]) -> Result<SliceSelection> {
        let mut sel = SliceSelection {
            multi: false,
            senses: false,
            sense_threshold: 1,
        };
        for t in tokens {
            match t.as_str() {
                "multi" => sel.multi = true,
                "senses" => sel.senses = true,
                other => match other.strip_prefix("senses-").map(str::parse::<usize>) {
                    Some(Ok(n)) => {
                        sel.senses = true;
                        sel.sense_threshold = n;
                    }
                    _ => {
                        return Err(config_error(format!(
                            "unknown slice {other:?} (expected multi, senses, or senses-<min gold count>)"
                        )));
                    }
                },
            }
        }
        Ok(sel)
    }

    fn any(&self) -> bool {
        self.multi || self.senses
    }

    fn apply(&self, examples: &[TaggedExample]) -> Result<Vec<EvalReport>> {
        let all = slice_eval(examples, self.sense_threshold)?;
        Ok(all
            .into_iter()
            .filter(|r| {
                let name = r.slice.as_deref().unwrap_or("");
                if name.starts_with("sense:") {
                    self.senses
                } else {
                    self.multi
                }
            })
            .collect())
    }
}

/// Everything one eval run produced; sections are present when the matching
/// model (or the self-test) ran.
#[derive(Serialize)]
struct EvalOutput {
    #[serde(skip_serializing_if = "Option::is_none")]
    tagging: Option<EvalReport>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    slices: Vec<EvalReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sense: Option<EvalReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pipeline: Option<PipelineEval>,
}

fn predict_tags(
    model: &TaggerModel,
    examples: &[D1Example],
    exec: intrasent::Exec,
) -> Result<Vec<TagSequence>> {
    let sentences: Vec<AnnotatedSentence> = examples.iter().map(|e| e.sentence.clone()).collect();
    Ok(model.tag_all(&sentences, exec)?)
}

fn predict_senses(model: &SenseModel, examples: &[D2Example]) -> Result<Vec<SenseLabel>> {
    examples
        .iter()
        .map(|e| {
            Ok(model
                .classify(&e.arg1_tokens, &e.arg2_tokens, &e.parse)?
                .best()
                .0)
        })
        .collect()
}

pub fn cmd_eval(
    cfg: &RunConfig,
    checkpoints: &[PathBuf],
    task: Option<Task>,
    slices: &[String],
    self_test: bool,
) -> Result<()> {
    let slice_sel = SliceSelection::parse(slices)?;
    let corpus = load_input_corpus(cfg)?;
    cfg.write_echo()?;
    let (_, _, test_s) = random_split(cfg, &corpus)?;
    if test_s.is_empty() {
        return Err(config_error("the test split is empty; nothing to evaluate"));
    }
    let opts = cfg.dataset.d1_options();
    let d1_test = generate_d1(&test_s, &opts);
    let d2_test = generate_d2(&test_s, &opts);
    let exec = cfg.train.exec();

    let (tagger, sense) = if self_test {
        (None, None)
    } else {
        let loaded = load_checkpoints(checkpoints, task, cfg, &corpus)?;
        if loaded.0.is_none() && loaded.1.is_none() {
            return Err(config_error(match task {
                Some(t) => format!("no --checkpoint holds a {t} model"),
                None => "eval needs --checkpoint (or --self-test)".to_string(),
            }));
        }
        loaded
    };

    let mut output = EvalOutput {
        tagging: None,
        slices: Vec::new(),
        sense: None,
        pipeline: None,
    };
    let mut text = String::new();

    let tag_this = task.is_none_or(|t| t == Task::Tagger);
    let sense_this = task.is_none_or(|t| t == Task::Sense);

    if tag_this && (self_test || tagger.is_some()) {
        let preds = match &tagger {
            Some(model) => predict_tags(model, &d1_test, exec)?,
            None => d1_test.iter().map(|e| e.tags.clone()).collect(),
        };
        let tagged = tagged_examples(&d1_test, &preds)?;
        let report = evaluate_tagging(&tagged)?;
        text.push_str("== argument tagging ==\n");
        text.push_str(&report.render());
        if slice_sel.any() {
            output.slices = slice_sel.apply(&tagged)?;
            for s in &output.slices {
                text.push('\n');
                text.push_str(&s.render());
            }
        }
        output.tagging = Some(report);
    }

    if sense_this && !d2_test.is_empty() && (self_test || sense.is_some()) {
        let gold: Vec<SenseLabel> = d2_test.iter().map(|e| e.sense).collect();
        let preds = match &sense {
            Some(model) => predict_senses(model, &d2_test)?,
            None => gold.clone(),
        };
        let report = sense_report(&gold, &preds)?;
        write_text(&cfg.out_file("confusion.csv"), &report.confusion_csv())?;
        let report = EvalReport::from_sense(report);
        text.push_str("\n== sense classification (gold arguments) ==\n");
        text.push_str(&report.render());
        output.sense = Some(report);
    }

    if let (Some(tagger), Some(sense)) = (&tagger, &sense) {
        let pipeline = evaluate_pipeline(tagger, sense, &test_s, exec)?;
        text.push_str("\n== end-to-end pipeline ==\n");
        text.push_str(&format!(
            "{} sentences evaluated, {} dropped (no argument pair found)\n",
            pipeline.evaluated, pipeline.dropped
        ));
        text.push_str("sense accuracy with gold arguments:\n");
        text.push_str(&pipeline.gold_arguments.render());
        text.push_str("sense accuracy with predicted arguments:\n");
        text.push_str(&pipeline.predicted_arguments.render());
        output.pipeline = Some(pipeline);
    }

    write_json_pretty(&cfg.out_file("eval.json"), &output)?;
    write_text(&cfg.out_file("eval.txt"), &text)?;
    print!("{text}");
    println!("reports written to {}", cfg.paths.out.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// crossval

/// Train and evaluate the selected task(s) on one fold, flattened to metric
/// cells with a task prefix.
fn run_fold(
    cfg: &RunConfig,
    fold: &intrasent::corpus::Fold,
    task: Option<Task>,
    corpus: &[AnnotatedSentence],
) -> Result<BTreeMap<String, f64>> {
    let opts = cfg.dataset.d1_options();
    let exec = cfg.train.exec();
    let mut cells = BTreeMap::new();

    if task.is_none_or(|t| t == Task::Tagger) {
        let d1_train = generate_d1(&fold.train, &opts);
        let d1_dev = generate_d1(&fold.dev, &opts);
        let d1_test = generate_d1(&fold.test, &opts);
        let tc = cfg.train.train_config(TrainConfig::tagger_defaults());
        let source = embedding_source(cfg, corpus)?;
        let (model, _) = train_tagger(
            &d1_train,
            &d1_dev,
            &cfg.encoder.tagger_config(),
            source,
            &tc,
        )?;
        let preds = predict_tags(&model, &d1_test, exec)?;
        let report = evaluate_tagging(&tagged_examples(&d1_test, &preds)?)?;
        for (k, v) in report.flatten() {
            cells.insert(format!("tagger.{k}"), v);
        }
    }

    if task.is_none_or(|t| t == Task::Sense) {
        let d2_train = generate_d2(&fold.train, &opts);
        let d2_dev = generate_d2(&fold.dev, &opts);
        let d2_test = generate_d2(&fold.test, &opts);
        if d2_train.is_empty() || d2_dev.is_empty() || d2_test.is_empty() {
            return Err(config_error(
                "a fold contains no in-scope relations; the corpus is too sparse for this k",
            ));
        }
        let tc = cfg.train.train_config(TrainConfig::sense_defaults());
        let source = embedding_source(cfg, corpus)?;
        let (model, _) = train_sense(&d2_train, &d2_dev, &cfg.encoder.sense_config(), source, &tc)?;
        let gold: Vec<SenseLabel> = d2_test.iter().map(|e| e.sense).collect();
        let report =
            EvalReport::from_sense(sense_report(&gold, &predict_senses(&model, &d2_test)?)?);
        for (k, v) in report.flatten() {
            cells.insert(format!("sense.{k}"), v);
        }
    }

    Ok(cells)
}

pub fn cmd_crossval(cfg: &RunConfig, task: Option<Task>) -> Result<()> {
    let SplitMode::KFold { k } = cfg.split.parse_mode()? else {
        return Err(config_error(format!(
            "crossval needs a kfold-<k> split mode, the config says {:?}",
            cfg.split.mode
        )));
    };
    let corpus = load_input_corpus(cfg)?;
    cfg.write_echo()?;
    let folds = kfold(&corpus, k, cfg.split.seed)?;

    let mut fold_cells: Vec<BTreeMap<String, f64>> = Vec::with_capacity(k);
    for (i, fold) in folds.iter().enumerate() {
        let cells =
            run_fold(cfg, fold, task, &corpus).with_context(|| format!("fold {} of {k}", i + 1))?;
        write_json_pretty(&cfg.out_file(&format!("fold{i:02}.metrics.json")), &cells)?;
        println!(
            "fold {}/{k}: {} train / {} dev / {} test sentences, {} metrics",
            i + 1,
            fold.train.len(),
            fold.dev.len(),
            fold.test.len(),
            cells.len()
        );
        fold_cells.push(cells);
    }

    // Per-sense rows exist only in folds where that sense occurs, so the
    // fold reports need not share a schema. Aggregate the cells measured in
    // every fold; the fold files keep the rest.
    let mut common: Vec<&String> = fold_cells[0].keys().collect();
    common.retain(|key| fold_cells[1..].iter().all(|cells| cells.contains_key(*key)));
    let reduced: Vec<BTreeMap<String, f64>> = fold_cells
        .iter()
        .map(|cells| common.iter().map(|&k| (k.clone(), cells[k])).collect())
        .collect();

    let aggregate: BTreeMap<String, MeanStd> = crossval_aggregate(&reduced)?;
    write_json_pretty(&cfg.out_file("crossval.json"), &aggregate)?;
    let rendered = render_crossval(&aggregate);
    write_text(&cfg.out_file("crossval.txt"), &rendered)?;
    let skipped = fold_cells.iter().map(BTreeMap::len).max().unwrap_or(0) - common.len();
    println!(
        "mean ± std of {} metrics over {k} folds ({skipped} fold-specific cells left in fold files):",
        common.len()
    );
    print!("{rendered}");
    Ok(())
}

// ---------------------------------------------------------------------------
// parse

pub fn cmd_parse(cfg: &RunConfig, checkpoints: &[PathBuf]) -> Result<()> {
    let corpus = load_input_corpus(cfg)?;
    cfg.write_echo()?;
    let (tagger, sense) = load_checkpoints(checkpoints, None, cfg, &corpus)?;
    let tagger =
        tagger.ok_or_else(|| config_error("parse needs a tagger checkpoint (--checkpoint)"))?;
    let sense =
        sense.ok_or_else(|| config_error("parse needs a sense checkpoint (--checkpoint)"))?;
    let strategy = match cfg.pipeline.disambiguation {
        DisambiguationMode::Likelihood => Disambiguation::Likelihood,
        DisambiguationMode::MostFrequentBaseline => Disambiguation::MostFrequentBaseline,
    };
    let parses = parse_corpus(&tagger, &sense, &corpus, strategy, cfg.train.exec())?;
    let path = cfg.out_file("parses.jsonl");
    save_parses(&path, &parses)?;
    let with_relation = parses.iter().filter(|p| p.relation.is_some()).count();
    println!(
        "parsed {} sentences, found a relation in {with_relation}; records in {}",
        parses.len(),
        path.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// fixture

pub fn cmd_fixture(cfg: &RunConfig) -> Result<()> {
    cfg.write_echo()?;
    let fixture = generate_fixture(cfg.fixture.seed, &cfg.fixture.params())?;
    save_corpus(cfg.out_file("corpus.jsonl"), &fixture.sentences)?;
    write_json_pretty(&cfg.out_file("ledger.json"), &fixture.ledger)?;
    println!(
        "fixture: {} sentences, {} eligible relations ({} tagging / {} sense examples implied)",
        fixture.ledger.n_sentences,
        fixture.ledger.eligible_relations,
        fixture.ledger.d1_examples,
        fixture.ledger.d2_examples
    );
    println!("corpus: {}", cfg.out_file("corpus.jsonl").display());
    Ok(())
}
