//! Frozen per-sentence contextual token vectors.
//!
//! When an external contextual encoder produced token vectors ahead of time,
//! they arrive as JSON lines keyed by sentence:
//!
//! ```json
//! {"doc_id":"wsj_0618","sent_index":12,"vectors":[[0.1,-0.2,...], ...]}
//! ```
//!
//! `vectors` has one row per token. The table is read-only at training time
//! (the rows are inputs, not parameters).

use crate::corpus::{AnnotatedSentence, SentenceKey};
use crate::error::{Error, Result};
use ndarray::Array2;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct VectorLine {
    doc_id: String,
    sent_index: usize,
    vectors: Vec<Vec<f64>>,
}

/// Sentence-keyed token vector lookup.
#[derive(Debug, Clone)]
pub struct ContextualVectors {
    dim: usize,
    map: HashMap<SentenceKey, Array2<f64>>,
}

impl ContextualVectors {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// Vectors for one sentence (`tokens x dim`).
    pub fn get(&self, key: &SentenceKey) -> Result<&Array2<f64>> {
        self.map
            .get(key)
            .ok_or_else(|| Error::Lookup(format!("no contextual vectors for sentence {key}")))
    }

    pub fn from_entries(entries: Vec<(SentenceKey, Array2<f64>)>) -> Result<ContextualVectors> {
        let dim = entries
            .first()
            .map(|(_, m)| m.ncols())
            .ok_or_else(|| Error::validation("contextual vector set is empty"))?;
        let mut map = HashMap::with_capacity(entries.len());
        for (key, m) in entries {
            if m.ncols() != dim {
                return Err(Error::Format(format!(
                    "sentence {key}: vector width {} but earlier sentences have {dim}",
                    m.ncols()
                )));
            }
            if map.insert(key.clone(), m).is_some() {
                return Err(Error::validation(format!(
                    "duplicate vectors for sentence {key}"
                )));
            }
        }
        Ok(ContextualVectors { dim, map })
    }
}

/// Load a vector file and check it against a corpus: every sentence must
/// have vectors (one row per token, constant width).
pub fn load_contextual_vectors(
    path: impl AsRef<Path>,
    corpus: &[AnnotatedSentence],
) -> Result<ContextualVectors> {
    let reader = BufReader::new(File::open(path.as_ref())?);
    let mut entries = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: VectorLine = serde_json::from_str(&line).map_err(|e| Error::CorpusParse {
            line: i + 1,
            message: e.to_string(),
        })?;
        let rows = parsed.vectors.len();
        let cols = parsed.vectors.first().map(|r| r.len()).unwrap_or(0);
        let mut m = Array2::zeros((rows, cols));
        for (r, row) in parsed.vectors.iter().enumerate() {
            if row.len() != cols {
                return Err(Error::CorpusParse {
                    line: i + 1,
                    message: format!("row {r} has {} values, row 0 has {cols}", row.len()),
                });
            }
            for (c, v) in row.iter().enumerate() {
                m[[r, c]] = *v;
            }
        }
        entries.push((
            SentenceKey {
                doc_id: parsed.doc_id,
                sent_index: parsed.sent_index,
            },
            m,
        ));
    }
    let vectors = ContextualVectors::from_entries(entries)?;
    for s in corpus {
        let m = vectors.get(&s.key())?;
        if m.nrows() != s.tokens.len() {
            return Err(Error::Format(format!(
                "sentence {}: {} vector rows for {} tokens",
                s.key(),
                m.nrows(),
                s.tokens.len()
            )));
        }
    }
    Ok(vectors)
}

/// Write vectors in the format [`load_contextual_vectors`] reads.
pub fn save_contextual_vectors(
    path: impl AsRef<Path>,
    entries: &[(SentenceKey, Array2<f64>)],
) -> Result<()> {
    let mut w = BufWriter::new(File::create(path.as_ref())?);
    for (key, m) in entries {
        let line = VectorLine {
            doc_id: key.doc_id.clone(),
            sent_index: key.sent_index,
            vectors: m.rows().into_iter().map(|r| r.to_vec()).collect(),
        };
        serde_json::to_writer(&mut w, &line)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}
