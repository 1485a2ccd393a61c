//! Flat parameter storage addressed by named tensors.

use crate::error::{Error, Result};
use ndarray::{ArrayView1, ArrayView2, ArrayViewMut1, ArrayViewMut2};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::collections::HashMap;
use std::sync::Arc;

/// Name of the (optionally present) token-embedding tensor. It is the only
/// tensor with per-row sparse gradients, and the layout keeps it last so the
/// dense remainder is a contiguous prefix.
pub const EMBED: &str = "embed";

/// One named tensor inside the flat vector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorSpec {
    pub name: String,
    pub shape: Vec<usize>,
    #[serde(skip)]
    pub offset: usize,
}

impl TensorSpec {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Immutable map from tensor names to slices of the flat vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    specs: Vec<TensorSpec>,
    by_name: HashMap<String, usize>,
    total: usize,
    /// Start of the `embed` tensor, or `total` when there is none.
    dense_len: usize,
}

pub struct LayoutBuilder {
    specs: Vec<TensorSpec>,
    offset: usize,
}

impl LayoutBuilder {
    pub fn new() -> LayoutBuilder {
        LayoutBuilder {
            specs: Vec::new(),
            offset: 0,
        }
    }

    /// Append a tensor. The `embed` tensor, if present, must come last.
    pub fn add(mut self, name: &str, shape: &[usize]) -> LayoutBuilder {
        assert!(
            self.specs.last().map(|s| s.name != EMBED).unwrap_or(true),
            "no tensor may follow {EMBED:?}"
        );
        let spec = TensorSpec {
            name: name.to_string(),
            shape: shape.to_vec(),
            offset: self.offset,
        };
        self.offset += spec.len();
        self.specs.push(spec);
        self
    }

    pub fn build(self) -> Arc<Layout> {
        let mut by_name = HashMap::new();
        for (i, s) in self.specs.iter().enumerate() {
            let prev = by_name.insert(s.name.clone(), i);
            assert!(prev.is_none(), "duplicate tensor name {:?}", s.name);
        }
        let dense_len = self
            .specs
            .iter()
            .find(|s| s.name == EMBED)
            .map(|s| s.offset)
            .unwrap_or(self.offset);
        Arc::new(Layout {
            specs: self.specs,
            by_name,
            total: self.offset,
            dense_len,
        })
    }
}

impl Default for LayoutBuilder {
    fn default() -> Self {
        Self::new()
    }
}

impl Layout {
    /// Rebuild a layout from (name, shape) pairs, e.g. out of a checkpoint.
    pub fn from_specs(specs: &[(String, Vec<usize>)]) -> Arc<Layout> {
        let mut b = LayoutBuilder::new();
        for (name, shape) in specs {
            b = b.add(name, shape);
        }
        b.build()
    }

    pub fn total_len(&self) -> usize {
        self.total
    }

    /// Length of the dense prefix (everything except `embed`).
    pub fn dense_len(&self) -> usize {
        self.dense_len
    }

    pub fn specs(&self) -> &[TensorSpec] {
        &self.specs
    }

    pub fn spec(&self, name: &str) -> &TensorSpec {
        let i = *self
            .by_name
            .get(name)
            .unwrap_or_else(|| panic!("unknown tensor {name:?}"));
        &self.specs[i]
    }

    pub fn has(&self, name: &str) -> bool {
        self.by_name.contains_key(name)
    }

    fn range(&self, name: &str) -> std::ops::Range<usize> {
        let s = self.spec(name);
        s.offset..s.offset + s.len()
    }
}

/// A flat `f64` vector with tensor views — used both for parameters and for
/// accumulated (dense) gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVec {
    layout: Arc<Layout>,
    data: Vec<f64>,
}

impl ParamVec {
    pub fn zeros(layout: Arc<Layout>) -> ParamVec {
        let n = layout.total_len();
        ParamVec {
            layout,
            data: vec![0.0; n],
        }
    }

    pub fn from_data(layout: Arc<Layout>, data: Vec<f64>) -> Result<ParamVec> {
        if data.len() != layout.total_len() {
            return Err(Error::Format(format!(
                "parameter data has {} values but the layout needs {}",
                data.len(),
                layout.total_len()
            )));
        }
        Ok(ParamVec { layout, data })
    }

    pub fn layout(&self) -> &Arc<Layout> {
        &self.layout
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn view1(&self, name: &str) -> ArrayView1<'_, f64> {
        let s = self.layout.spec(name);
        assert_eq!(s.shape.len(), 1, "{name:?} is not rank 1");
        ArrayView1::from_shape(s.shape[0], &self.data[s.offset..s.offset + s.len()])
            .expect("layout guarantees the slice length")
    }

    pub fn view2(&self, name: &str) -> ArrayView2<'_, f64> {
        let s = self.layout.spec(name);
        assert_eq!(s.shape.len(), 2, "{name:?} is not rank 2");
        ArrayView2::from_shape(
            (s.shape[0], s.shape[1]),
            &self.data[s.offset..s.offset + s.len()],
        )
        .expect("layout guarantees the slice length")
    }

    pub fn view1_mut(&mut self, name: &str) -> ArrayViewMut1<'_, f64> {
        let s = self.layout.spec(name).clone();
        ArrayViewMut1::from_shape(s.shape[0], &mut self.data[s.offset..s.offset + s.len()])
            .expect("layout guarantees the slice length")
    }

    pub fn view2_mut(&mut self, name: &str) -> ArrayViewMut2<'_, f64> {
        let s = self.layout.spec(name).clone();
        ArrayViewMut2::from_shape(
            (s.shape[0], s.shape[1]),
            &mut self.data[s.offset..s.offset + s.len()],
        )
        .expect("layout guarantees the slice length")
    }

    pub fn slice(&self, name: &str) -> &[f64] {
        &self.data[self.layout.range(name)]
    }

    pub fn slice_mut(&mut self, name: &str) -> &mut [f64] {
        let r = self.layout.range(name);
        &mut self.data[r]
    }

    /// `self += other`, elementwise (same layout required).
    pub fn add_assign(&mut self, other: &ParamVec) {
        debug_assert_eq!(self.data.len(), other.data.len());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for x in &mut self.data {
            *x *= factor;
        }
    }

    /// Fold one sentence's gradients into this accumulator.
    pub fn accumulate(&mut self, g: &SentGrad) {
        debug_assert_eq!(g.dense.len(), self.layout.dense_len());
        for (a, b) in self.data.iter_mut().zip(&g.dense) {
            *a += b;
        }
        if !g.embed_rows.is_empty() {
            let spec = self.layout.spec(EMBED);
            let dim = spec.shape[1];
            for (&row, grad) in &g.embed_rows {
                let start = spec.offset + row * dim;
                for (a, b) in self.data[start..start + dim].iter_mut().zip(grad) {
                    *a += b;
                }
            }
        }
    }

    pub fn l2_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// Largest absolute entry per tensor — handy in training diagnostics.
    pub fn per_tensor_max_abs(&self) -> Vec<(String, f64)> {
        self.layout
            .specs()
            .iter()
            .map(|s| {
                let m = self.data[s.offset..s.offset + s.len()]
                    .iter()
                    .fold(0.0f64, |acc, x| acc.max(x.abs()));
                (s.name.clone(), m)
            })
            .collect()
    }
}

/// Gradients of one sentence: dense over every tensor except `embed`, whose
/// rows are stored sparsely (a sentence touches only its own tokens).
#[derive(Debug, Clone)]
pub struct SentGrad {
    pub(crate) dense: Vec<f64>,
    pub(crate) embed_rows: BTreeMap<usize, Vec<f64>>,
}

impl SentGrad {
    pub fn zeros(layout: &Layout) -> SentGrad {
        SentGrad {
            dense: vec![0.0; layout.dense_len()],
            embed_rows: BTreeMap::new(),
        }
    }

    pub fn all_finite(&self) -> bool {
        self.dense.iter().all(|x| x.is_finite())
            && self
                .embed_rows
                .values()
                .all(|r| r.iter().all(|x| x.is_finite()))
    }
}

/// Mutable window over a [`SentGrad`] that resolves tensor names through the
/// layout, so backward passes read like the math.
pub struct GradWriter<'a> {
    layout: &'a Layout,
    grad: &'a mut SentGrad,
    embed_dim: usize,
}

impl<'a> GradWriter<'a> {
    pub fn new(layout: &'a Layout, grad: &'a mut SentGrad) -> GradWriter<'a> {
        let embed_dim = if layout.has(EMBED) {
            layout.spec(EMBED).shape[1]
        } else {
            0
        };
        GradWriter {
            layout,
            grad,
            embed_dim,
        }
    }

    pub fn view1_mut(&mut self, name: &str) -> ArrayViewMut1<'_, f64> {
        let s = self.layout.spec(name);
        assert_ne!(s.name, EMBED, "embedding rows go through add_embed_row");
        ArrayViewMut1::from_shape(
            s.shape[0],
            &mut self.grad.dense[s.offset..s.offset + s.len()],
        )
        .expect("layout guarantees the slice length")
    }

    pub fn view2_mut(&mut self, name: &str) -> ArrayViewMut2<'_, f64> {
        let s = self.layout.spec(name);
        assert_ne!(s.name, EMBED, "embedding rows go through add_embed_row");
        ArrayViewMut2::from_shape(
            (s.shape[0], s.shape[1]),
            &mut self.grad.dense[s.offset..s.offset + s.len()],
        )
        .expect("layout guarantees the slice length")
    }

    /// `d embed[row] += contribution`.
    pub fn add_embed_row(&mut self, row: usize, contribution: ArrayView1<'_, f64>) {
        debug_assert_eq!(contribution.len(), self.embed_dim);
        let acc = self
            .grad
            .embed_rows
            .entry(row)
            .or_insert_with(|| vec![0.0; self.embed_dim]);
        for (a, b) in acc.iter_mut().zip(contribution.iter()) {
            *a += b;
        }
    }
}
