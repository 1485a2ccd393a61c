//! Token embedding initialization: seeded random or from a text vector file.

use super::vocab::Vocabulary;
use crate::error::{Error, Result};
use ndarray::Array2;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

/// An initial embedding matrix (`vocab x dim`) plus whether training should
/// update it.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    pub matrix: Array2<f64>,
    pub trainable: bool,
}

/// Per-row seeded uniform(-0.05, 0.05) values.
///
/// Each row gets its own RNG stream derived from `(seed, row)`, so one row's
/// initialization never depends on how many rows come before it.
fn seeded_row(seed: u64, row: usize, dim: usize) -> Vec<f64> {
    let mut rng =
        ChaCha8Rng::seed_from_u64(seed ^ (row as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    (0..dim).map(|_| rng.random_range(-0.05..0.05f64)).collect()
}

impl EmbeddingTable {
    /// Fresh random table for training from scratch.
    pub fn seeded(vocab_len: usize, dim: usize, seed: u64) -> EmbeddingTable {
        let mut matrix = Array2::zeros((vocab_len, dim));
        for row in 0..vocab_len {
            let values = seeded_row(seed, row, dim);
            for (j, v) in values.into_iter().enumerate() {
                matrix[[row, j]] = v;
            }
        }
        EmbeddingTable {
            matrix,
            trainable: true,
        }
    }
}

/// Read a text vector file (`token v1 v2 ... v_dim` per line) into an
/// embedding table aligned with `vocab`.
///
/// Tokens absent from the file keep their seeded random row; tokens in the
/// file but not in the vocabulary are ignored; if a token appears twice the
/// first line wins. Every line must have exactly `dim` values.
pub fn load_pretrained_vectors(
    path: impl AsRef<Path>,
    vocab: &Vocabulary,
    dim: usize,
    seed: u64,
) -> Result<EmbeddingTable> {
    let mut table = EmbeddingTable::seeded(vocab.len(), dim, seed);
    let reader = BufReader::new(File::open(path.as_ref())?);
    let mut seen = vec![false; vocab.len()];
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let token = parts
            .next()
            .ok_or_else(|| Error::Format(format!("vector file line {}: empty", i + 1)))?;
        if !vocab.contains(token) {
            continue;
        }
        let row = vocab.id(token);
        if seen[row] {
            continue;
        }
        seen[row] = true;
        let values: std::result::Result<Vec<f64>, _> = parts.map(|p| p.parse::<f64>()).collect();
        let values = values
            .map_err(|e| Error::Format(format!("vector file line {}: bad float ({e})", i + 1)))?;
        if values.len() != dim {
            return Err(Error::Format(format!(
                "vector file line {}: {} values for {token:?} but the configured dimension is {dim}",
                i + 1,
                values.len()
            )));
        }
        for (j, v) in values.into_iter().enumerate() {
            table.matrix[[row, j]] = v;
        }
    }
    Ok(table)
}
