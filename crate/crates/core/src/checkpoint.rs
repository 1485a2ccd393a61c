//! Model checkpoints: a single JSON file holding the config, vocabularies,
//! tensor layout, and flat parameter data of a trained model.
//!
//! JSON keeps `f64` values exact (shortest round-tripping decimal), so
//! save → load → save is byte-identical; tests pin that. On load the tensor
//! list is verified against the layout the stored config implies, so a
//! checkpoint can never silently deserialize into a model of the wrong
//! shape.
//!
//! A contextual-mode tagger checkpoint stores no embedding table; after
//! loading, sentence vectors must be re-attached
//! ([`TaggerModel::attach_contextual`]) before tagging.

use crate::encoder::Vocabulary;
use crate::error::{Error, Result};
use crate::nn::ParamVec;
use crate::sense::{SenseConfig, SenseModel};
use crate::tagger::{TaggerConfig, TaggerModel};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

/// Format tag written into every checkpoint.
pub const CHECKPOINT_FORMAT: &str = "intrasent-checkpoint-v1";

/// Which model a checkpoint (or a training run) is about.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    Tagger,
    Sense,
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Task::Tagger => "tagger",
            Task::Sense => "sense",
        })
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Task> {
        match s {
            "tagger" => Ok(Task::Tagger),
            "sense" => Ok(Task::Sense),
            other => Err(Error::config(format!(
                "unknown task {other:?} (expected \"tagger\" or \"sense\")"
            ))),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CheckpointFile {
    format: String,
    task: Task,
    #[serde(skip_serializing_if = "Option::is_none")]
    tagger_config: Option<TaggerConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sense_config: Option<SenseConfig>,
    /// Token input width; differs from `emb_dim` only in contextual mode.
    #[serde(skip_serializing_if = "Option::is_none")]
    input_dim: Option<usize>,
    vocab: Vocabulary,
    #[serde(skip_serializing_if = "Option::is_none")]
    parse_vocab: Option<Vocabulary>,
    /// Tensor names and shapes, in layout order — an integrity check against
    /// the layout the config implies.
    tensors: Vec<(String, Vec<usize>)>,
    data: Vec<f64>,
}

fn write_file(path: &Path, file: &CheckpointFile) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer(&mut w, file)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

fn read_file(path: &Path, expected_task: Task) -> Result<CheckpointFile> {
    let file: CheckpointFile = serde_json::from_reader(BufReader::new(File::open(path)?))
        .map_err(|e| Error::format(format!("{}: {e}", path.display())))?;
    if file.format != CHECKPOINT_FORMAT {
        return Err(Error::format(format!(
            "{}: format {:?} is not {CHECKPOINT_FORMAT:?}",
            path.display(),
            file.format
        )));
    }
    if file.task != expected_task {
        return Err(Error::format(format!(
            "{}: holds a {} model, expected {}",
            path.display(),
            file.task,
            expected_task
        )));
    }
    Ok(file)
}

/// Read only the task of a checkpoint, e.g. to dispatch `--checkpoint`
/// arguments.
pub fn peek_task(path: &Path) -> Result<Task> {
    #[derive(Deserialize)]
    struct Probe {
        format: String,
        task: Task,
    }
    let probe: Probe = serde_json::from_reader(BufReader::new(File::open(path)?))
        .map_err(|e| Error::format(format!("{}: {e}", path.display())))?;
    if probe.format != CHECKPOINT_FORMAT {
        return Err(Error::format(format!(
            "{}: format {:?} is not {CHECKPOINT_FORMAT:?}",
            path.display(),
            probe.format
        )));
    }
    Ok(probe.task)
}

fn spec_list(params: &ParamVec) -> Vec<(String, Vec<usize>)> {
    params
        .layout()
        .specs()
        .iter()
        .map(|s| (s.name.clone(), s.shape.clone()))
        .collect()
}

fn check_tensors(
    path: &Path,
    stored: &[(String, Vec<usize>)],
    expected: &[(String, Vec<usize>)],
) -> Result<()> {
    if stored != expected {
        let detail = stored
            .iter()
            .zip(expected)
            .find(|(s, e)| s != e)
            .map(|(s, e)| format!("stored {:?}{:?} vs expected {:?}{:?}", s.0, s.1, e.0, e.1))
            .unwrap_or_else(|| {
                format!(
                    "stored {} tensors, expected {}",
                    stored.len(),
                    expected.len()
                )
            });
        return Err(Error::format(format!(
            "{}: tensor layout does not match the stored config ({detail})",
            path.display()
        )));
    }
    Ok(())
}

fn restore_params(
    path: &Path,
    layout: std::sync::Arc<crate::nn::Layout>,
    data: Vec<f64>,
) -> Result<ParamVec> {
    let params = ParamVec::from_data(layout, data)
        .map_err(|e| Error::format(format!("{}: {e}", path.display())))?;
    if !params.all_finite() {
        return Err(Error::format(format!(
            "{}: checkpoint contains non-finite parameter values",
            path.display()
        )));
    }
    Ok(params)
}

/// Save a tagger model.
pub fn save_tagger(path: &Path, model: &TaggerModel) -> Result<()> {
    write_file(
        path,
        &CheckpointFile {
            format: CHECKPOINT_FORMAT.to_string(),
            task: Task::Tagger,
            tagger_config: Some(model.config().clone()),
            sense_config: None,
            input_dim: Some(model.input_dim()),
            vocab: model.vocab().clone(),
            parse_vocab: model.parse_vocab().cloned(),
            tensors: spec_list(model.params()),
            data: model.params().data().to_vec(),
        },
    )
}

/// Load a tagger model. A contextual-mode model comes back without sentence
/// vectors; attach them before tagging.
pub fn load_tagger(path: &Path) -> Result<TaggerModel> {
    let file = read_file(path, Task::Tagger)?;
    let cfg = file.tagger_config.ok_or_else(|| {
        Error::format(format!(
            "{}: tagger checkpoint without tagger_config",
            path.display()
        ))
    })?;
    cfg.validate()?;
    let input_dim = file.input_dim.ok_or_else(|| {
        Error::format(format!(
            "{}: tagger checkpoint without input_dim",
            path.display()
        ))
    })?;
    if cfg.mode != crate::encoder::EncoderMode::Contextual && input_dim != cfg.emb_dim {
        return Err(Error::format(format!(
            "{}: input_dim {} does not match emb_dim {} for mode {}",
            path.display(),
            input_dim,
            cfg.emb_dim,
            cfg.mode
        )));
    }
    if cfg.parse_features != file.parse_vocab.is_some() {
        return Err(Error::format(format!(
            "{}: parse_features is {} but the checkpoint {} a parse vocabulary",
            path.display(),
            cfg.parse_features,
            if file.parse_vocab.is_some() {
                "carries"
            } else {
                "lacks"
            }
        )));
    }
    let parse_vocab_len = file.parse_vocab.as_ref().map(|v| v.len()).unwrap_or(0);
    let layout = crate::tagger::build_layout(&cfg, input_dim, file.vocab.len(), parse_vocab_len);
    let expected = layout
        .specs()
        .iter()
        .map(|s| (s.name.clone(), s.shape.clone()))
        .collect::<Vec<_>>();
    check_tensors(path, &file.tensors, &expected)?;
    let params = restore_params(path, layout, file.data)?;
    Ok(TaggerModel::from_parts(
        cfg,
        file.vocab,
        file.parse_vocab,
        params,
        input_dim,
    ))
}

/// Save a sense model.
pub fn save_sense(path: &Path, model: &SenseModel) -> Result<()> {
    write_file(
        path,
        &CheckpointFile {
            format: CHECKPOINT_FORMAT.to_string(),
            task: Task::Sense,
            tagger_config: None,
            sense_config: Some(model.config().clone()),
            input_dim: None,
            vocab: model.vocab().clone(),
            parse_vocab: model.parse_vocab().cloned(),
            tensors: spec_list(model.params()),
            data: model.params().data().to_vec(),
        },
    )
}

/// Load a sense model.
pub fn load_sense(path: &Path) -> Result<SenseModel> {
    let file = read_file(path, Task::Sense)?;
    let cfg = file.sense_config.ok_or_else(|| {
        Error::format(format!(
            "{}: sense checkpoint without sense_config",
            path.display()
        ))
    })?;
    cfg.validate()?;
    if cfg.parse_features != file.parse_vocab.is_some() {
        return Err(Error::format(format!(
            "{}: parse_features is {} but the checkpoint {} a parse vocabulary",
            path.display(),
            cfg.parse_features,
            if file.parse_vocab.is_some() {
                "carries"
            } else {
                "lacks"
            }
        )));
    }
    let parse_vocab_len = file.parse_vocab.as_ref().map(|v| v.len()).unwrap_or(0);
    let layout = crate::sense::build_layout(&cfg, file.vocab.len(), parse_vocab_len);
    let expected = layout
        .specs()
        .iter()
        .map(|s| (s.name.clone(), s.shape.clone()))
        .collect::<Vec<_>>();
    check_tensors(path, &file.tensors, &expected)?;
    let params = restore_params(path, layout, file.data)?;
    Ok(SenseModel::from_parts(
        cfg,
        file.vocab,
        file.parse_vocab,
        params,
    ))
}
