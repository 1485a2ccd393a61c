//! Seeded random splits: a single train/dev/test partition and rotating
//! k-fold cross-validation.

use super::AnnotatedSentence;
use crate::error::{Error, Result};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Granularity of shuffling and partitioning.
///
/// `Sentence` partitions sentences exactly (part sizes differ from the ideal
/// ratio by less than one). `Document` keeps all sentences of a document
/// together; exactness then holds over documents, and sentence counts only
/// approximate the ratios.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SplitUnit {
    #[default]
    Sentence,
    Document,
}

/// One cross-validation fold.
#[derive(Debug, Clone)]
pub struct Fold {
    pub train: Vec<AnnotatedSentence>,
    pub dev: Vec<AnnotatedSentence>,
    pub test: Vec<AnnotatedSentence>,
}

/// Largest-remainder apportionment of `total` items to `ratios`.
///
/// Sizes sum to `total` exactly and each differs from `total * ratio` by
/// less than 1.
fn apportion(total: usize, ratios: &[f64]) -> Vec<usize> {
    let ideal: Vec<f64> = ratios.iter().map(|r| r * total as f64).collect();
    let mut sizes: Vec<usize> = ideal.iter().map(|x| x.floor() as usize).collect();
    let assigned: usize = sizes.iter().sum();
    // Hand out the remaining items by descending fractional part, ties by
    // position so the result is deterministic.
    let mut order: Vec<usize> = (0..ratios.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = ideal[a] - ideal[a].floor();
        let fb = ideal[b] - ideal[b].floor();
        fb.partial_cmp(&fa).unwrap().then(a.cmp(&b))
    });
    for i in 0..(total - assigned) {
        sizes[order[i % order.len()]] += 1;
    }
    sizes
}

fn check_ratios(ratios: (f64, f64, f64)) -> Result<[f64; 3]> {
    let r = [ratios.0, ratios.1, ratios.2];
    if r.iter().any(|&x| x < 0.0) {
        return Err(Error::validation("split ratios must be non-negative"));
    }
    let sum: f64 = r.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::validation(format!(
            "split ratios must sum to 1 (got {sum})"
        )));
    }
    Ok(r)
}

/// Shuffle with a seeded RNG and partition into train/dev/test.
pub fn split_random(
    corpus: &[AnnotatedSentence],
    ratios: (f64, f64, f64),
    seed: u64,
    unit: SplitUnit,
) -> Result<(
    Vec<AnnotatedSentence>,
    Vec<AnnotatedSentence>,
    Vec<AnnotatedSentence>,
)> {
    let r = check_ratios(ratios)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // Work over groups: singleton groups for sentence-level splitting, one
    // group per document otherwise (first-appearance order before shuffling).
    let groups: Vec<Vec<usize>> = match unit {
        SplitUnit::Sentence => (0..corpus.len()).map(|i| vec![i]).collect(),
        SplitUnit::Document => {
            let mut order: Vec<String> = Vec::new();
            let mut by_doc: std::collections::HashMap<&str, Vec<usize>> =
                std::collections::HashMap::new();
            for (i, s) in corpus.iter().enumerate() {
                let entry = by_doc.entry(&s.doc_id).or_default();
                if entry.is_empty() {
                    order.push(s.doc_id.clone());
                }
                entry.push(i);
            }
            order.iter().map(|d| by_doc[d.as_str()].clone()).collect()
        }
    };

    let mut shuffled: Vec<&Vec<usize>> = groups.iter().collect();
    shuffled.shuffle(&mut rng);
    let sizes = apportion(shuffled.len(), &r);

    let mut parts: [Vec<AnnotatedSentence>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    let mut cursor = 0usize;
    for (part, &size) in parts.iter_mut().zip(&sizes) {
        for group in &shuffled[cursor..cursor + size] {
            part.extend(group.iter().map(|&i| corpus[i].clone()));
        }
        cursor += size;
    }
    let [train, dev, test] = parts;
    Ok((train, dev, test))
}

/// Rotating k-fold splits: fold i uses chunk i as test, chunk (i+1) mod k as
/// dev, and the remaining k-2 chunks as train.
///
/// Chunk sizes differ by at most one; every sentence appears in exactly one
/// test chunk across the k folds.
pub fn kfold(corpus: &[AnnotatedSentence], k: usize, seed: u64) -> Result<Vec<Fold>> {
    if k < 3 {
        return Err(Error::validation(format!(
            "k-fold needs k >= 3 so train, dev, and test are disjoint (got k = {k})"
        )));
    }
    if corpus.len() < k {
        return Err(Error::validation(format!(
            "cannot make {k} folds from {} sentences",
            corpus.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx: Vec<usize> = (0..corpus.len()).collect();
    idx.shuffle(&mut rng);

    // Chunk boundaries: the first (len % k) chunks get one extra item.
    let base = corpus.len() / k;
    let extra = corpus.len() % k;
    let mut chunks: Vec<Vec<usize>> = Vec::with_capacity(k);
    let mut cursor = 0usize;
    for c in 0..k {
        let size = base + usize::from(c < extra);
        chunks.push(idx[cursor..cursor + size].to_vec());
        cursor += size;
    }

    let collect = |ids: &[usize]| ids.iter().map(|&i| corpus[i].clone()).collect::<Vec<_>>();
    let mut folds = Vec::with_capacity(k);
    for i in 0..k {
        let dev_chunk = (i + 1) % k;
        let mut train_ids = Vec::new();
        for (c, chunk) in chunks.iter().enumerate() {
            if c != i && c != dev_chunk {
                train_ids.extend_from_slice(chunk);
            }
        }
        folds.push(Fold {
            train: collect(&train_ids),
            dev: collect(&chunks[dev_chunk]),
            test: collect(&chunks[i]),
        });
    }
    Ok(folds)
}
