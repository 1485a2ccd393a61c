//! Derived datasets: per-sentence BIO tagging examples (D1) and per-relation
//! argument-pair sense examples (D2).
//!
//! A sentence with k eligible relations becomes k tagging examples, each
//! labeling exactly one relation and leaving every other token `O` — the
//! tagger is trained to find one relation at a time. Relations linked to an
//! explicit connective never appear; discontinuous relations are skipped by
//! default because a single BIO span cannot represent them (a flag keeps
//! them, labeling each argument's every span).

use super::{AnnotatedSentence, GoldRelation};
use crate::error::{Error, Result};
use crate::labels::{Label, Role, SenseLabel, TagSequence};
use serde::{Deserialize, Serialize};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

/// Options for [`generate_d1`] / [`generate_d2`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct D1Options {
    /// Drop relations whose arguments need more than one span (default).
    pub skip_discontinuous: bool,
}

impl Default for D1Options {
    fn default() -> D1Options {
        D1Options {
            skip_discontinuous: true,
        }
    }
}

/// One BIO tagging example: a sentence and the tags for one of its relations
/// (or all-`O` if it has none).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct D1Example {
    pub sentence: AnnotatedSentence,
    pub tags: TagSequence,
    /// Index into `sentence.relations` of the labeled relation; `None` for
    /// the all-`O` example of a relation-free sentence.
    pub source_relation: Option<usize>,
}

/// One sense classification example: the token strings of both arguments
/// plus the sentence parse (empty when absent).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct D2Example {
    pub arg1_tokens: Vec<String>,
    pub arg2_tokens: Vec<String>,
    #[serde(default)]
    pub parse: String,
    pub sense: SenseLabel,
}

fn rel_in_scope(rel: &GoldRelation, opts: &D1Options) -> bool {
    !rel.linked && (rel.is_continuous() || !opts.skip_discontinuous)
}

/// Tags for one relation: `B-`/`I-` over each argument span, `O` elsewhere.
fn relation_tags(n: usize, rel: &GoldRelation) -> TagSequence {
    let mut labels = vec![Label::O; n];
    for role in Role::ALL {
        for span in rel.spans(role) {
            if span.is_empty() {
                continue;
            }
            labels[span.start] = role.begin();
            for slot in &mut labels[span.start + 1..span.end] {
                *slot = role.inside();
            }
        }
    }
    TagSequence::new(labels).expect("disjoint gold spans always yield valid BIO")
}

/// Expand a corpus into BIO tagging examples.
///
/// Every sentence contributes at least one example; sentences with k in-scope
/// relations contribute k (one relation labeled per copy).
pub fn generate_d1(corpus: &[AnnotatedSentence], opts: &D1Options) -> Vec<D1Example> {
    let mut out = Vec::new();
    for s in corpus {
        let n = s.tokens.len();
        let mut any = false;
        for (ri, rel) in s.relations.iter().enumerate() {
            if !rel_in_scope(rel, opts) {
                continue;
            }
            any = true;
            out.push(D1Example {
                sentence: s.clone(),
                tags: relation_tags(n, rel),
                source_relation: Some(ri),
            });
        }
        if !any {
            out.push(D1Example {
                sentence: s.clone(),
                tags: TagSequence::all_outside(n),
                source_relation: None,
            });
        }
    }
    out
}

/// Expand a corpus into argument-pair sense examples, one per in-scope
/// relation (same eligibility rules as [`generate_d1`]).
pub fn generate_d2(corpus: &[AnnotatedSentence], opts: &D1Options) -> Vec<D2Example> {
    let mut out = Vec::new();
    for s in corpus {
        for rel in &s.relations {
            if !rel_in_scope(rel, opts) {
                continue;
            }
            out.push(D2Example {
                arg1_tokens: rel.argument_tokens(Role::Arg1, &s.tokens),
                arg2_tokens: rel.argument_tokens(Role::Arg2, &s.tokens),
                parse: s.parse.clone(),
                sense: rel.sense,
            });
        }
    }
    out
}

fn save_jsonl<T: Serialize>(path: impl AsRef<Path>, items: &[T]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path.as_ref())?);
    for item in items {
        serde_json::to_writer(&mut w, item)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

fn load_jsonl<T: serde::de::DeserializeOwned>(path: impl AsRef<Path>) -> Result<Vec<T>> {
    let reader = BufReader::new(File::open(path.as_ref())?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let item = serde_json::from_str(&line).map_err(|e| Error::CorpusParse {
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(item);
    }
    Ok(out)
}

pub fn save_d1(path: impl AsRef<Path>, examples: &[D1Example]) -> Result<()> {
    save_jsonl(path, examples)
}

pub fn load_d1(path: impl AsRef<Path>) -> Result<Vec<D1Example>> {
    let examples: Vec<D1Example> = load_jsonl(path)?;
    for (i, ex) in examples.iter().enumerate() {
        if ex.tags.len() != ex.sentence.tokens.len() {
            return Err(Error::CorpusParse {
                line: i + 1,
                message: format!(
                    "{} tags for {} tokens",
                    ex.tags.len(),
                    ex.sentence.tokens.len()
                ),
            });
        }
    }
    Ok(examples)
}

pub fn save_d2(path: impl AsRef<Path>, examples: &[D2Example]) -> Result<()> {
    save_jsonl(path, examples)
}

pub fn load_d2(path: impl AsRef<Path>) -> Result<Vec<D2Example>> {
    let examples: Vec<D2Example> = load_jsonl(path)?;
    for (i, ex) in examples.iter().enumerate() {
        if ex.arg1_tokens.is_empty() || ex.arg2_tokens.is_empty() {
            return Err(Error::CorpusParse {
                line: i + 1,
                message: "empty argument token list".to_string(),
            });
        }
    }
    Ok(examples)
}
