//! Sequence encoders shared by the tagger and the sense classifier.
//!
//! A bidirectional LSTM reads embedded tokens and yields one `2*hidden`-wide
//! vector per position (forward and backward states concatenated). A second
//! BiLSTM over the linearized parse tree produces a single summary vector —
//! forward direction's last state next to backward direction's state at
//! position 0 — which [`fuse_features`] appends to every token encoding.
//!
//! Weight tensors follow a naming convention inside the flat parameter
//! vector: a BiLSTM called `name` owns `name_fwd.w` (4h, d), `name_fwd.u`
//! (4h, h), `name_fwd.b` (4h), and the `name_bwd.*` mirror set.

mod contextual;
mod embedding;
mod vocab;

pub use contextual::{load_contextual_vectors, save_contextual_vectors, ContextualVectors};
pub use embedding::{load_pretrained_vectors, EmbeddingTable};
pub use vocab::{Vocabulary, CLS_TOKEN, PAD_TOKEN, SEP_TOKEN, UNK_TOKEN};

use crate::nn::{lstm_backward, lstm_forward, GradWriter, LayoutBuilder, LstmCache, ParamVec};
use ndarray::{s, Array1};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::path::PathBuf;
use std::sync::Arc;

/// Where a model's token vectors come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EncoderMode {
    /// A trainable embedding table initialized from a seeded RNG.
    Scratch,
    /// A trainable embedding table initialized from a word-vector file.
    PretrainedVectors,
    /// Frozen per-sentence vectors supplied by an external file; the model
    /// holds no token-embedding tensor at all in this mode.
    Contextual,
}

impl std::fmt::Display for EncoderMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            EncoderMode::Scratch => "scratch",
            EncoderMode::PretrainedVectors => "pretrained-vectors",
            EncoderMode::Contextual => "contextual",
        })
    }
}

/// Concrete origin of the token vectors handed to [`EncoderMode`]-matching
/// model constructors.
#[derive(Debug, Clone)]
pub enum EmbeddingSource {
    /// Seeded random initialization ([`EncoderMode::Scratch`]).
    Seeded,
    /// Word-vector file in `token v1 v2 …` format
    /// ([`EncoderMode::PretrainedVectors`]).
    PretrainedFile(PathBuf),
    /// Pre-computed sentence vectors ([`EncoderMode::Contextual`]).
    Contextual(Arc<ContextualVectors>),
}

impl EmbeddingSource {
    pub fn mode(&self) -> EncoderMode {
        match self {
            EmbeddingSource::Seeded => EncoderMode::Scratch,
            EmbeddingSource::PretrainedFile(_) => EncoderMode::PretrainedVectors,
            EmbeddingSource::Contextual(_) => EncoderMode::Contextual,
        }
    }
}

/// Forward-pass state of one BiLSTM run.
pub struct BiCache {
    fwd: LstmCache,
    bwd: LstmCache,
    hidden: usize,
}

fn tensor(name: &str, dir: &str, part: &str) -> String {
    format!("{name}_{dir}.{part}")
}

/// Declare the six tensors of a BiLSTM named `name`.
pub fn add_bilstm_tensors(
    builder: LayoutBuilder,
    name: &str,
    input_dim: usize,
    hidden: usize,
) -> LayoutBuilder {
    let mut b = builder;
    for dir in ["fwd", "bwd"] {
        b = b
            .add(&tensor(name, dir, "w"), &[4 * hidden, input_dim])
            .add(&tensor(name, dir, "u"), &[4 * hidden, hidden])
            .add(&tensor(name, dir, "b"), &[4 * hidden]);
    }
    b
}

/// Initialize a BiLSTM's tensors in place: weights uniform in
/// `(-1/sqrt(hidden), 1/sqrt(hidden))`, biases zero except the forget-gate
/// block, which starts at 1.0 so memory is kept by default early in
/// training.
pub fn init_bilstm_tensors(params: &mut ParamVec, name: &str, rng: &mut ChaCha8Rng) {
    for dir in ["fwd", "bwd"] {
        let hidden = {
            let u = params.view2(&tensor(name, dir, "u"));
            u.ncols()
        };
        let bound = 1.0 / (hidden as f64).sqrt();
        for part in ["w", "u"] {
            for v in params.slice_mut(&tensor(name, dir, part)) {
                *v = rng.random_range(-bound..bound);
            }
        }
        let b = params.slice_mut(&tensor(name, dir, "b"));
        for v in b.iter_mut() {
            *v = 0.0;
        }
        for v in &mut b[hidden..2 * hidden] {
            *v = 1.0;
        }
    }
}

fn concat1(a: ndarray::ArrayView1<'_, f64>, b: ndarray::ArrayView1<'_, f64>) -> Array1<f64> {
    let mut out = Array1::zeros(a.len() + b.len());
    out.slice_mut(s![0..a.len()]).assign(&a);
    out.slice_mut(s![a.len()..]).assign(&b);
    out
}

/// Run a BiLSTM over input vectors; output `i` is
/// `[forward state at i ; backward state at i]`, width `2*hidden`.
pub fn bilstm_encode(
    params: &ParamVec,
    name: &str,
    xs: &[Array1<f64>],
) -> (Vec<Array1<f64>>, BiCache) {
    let w_f = params.view2(&tensor(name, "fwd", "w"));
    let u_f = params.view2(&tensor(name, "fwd", "u"));
    let b_f = params.view1(&tensor(name, "fwd", "b"));
    let (h_fwd, cache_f) = lstm_forward(w_f, u_f, b_f, xs);

    let xs_rev: Vec<Array1<f64>> = xs.iter().rev().cloned().collect();
    let w_b = params.view2(&tensor(name, "bwd", "w"));
    let u_b = params.view2(&tensor(name, "bwd", "u"));
    let b_b = params.view1(&tensor(name, "bwd", "b"));
    let (h_bwd_rev, cache_b) = lstm_forward(w_b, u_b, b_b, &xs_rev);

    let n = xs.len();
    let hidden = u_f.ncols();
    let out = (0..n)
        .map(|i| concat1(h_fwd[i].view(), h_bwd_rev[n - 1 - i].view()))
        .collect();
    (
        out,
        BiCache {
            fwd: cache_f,
            bwd: cache_b,
            hidden,
        },
    )
}

/// Backprop through [`bilstm_encode`]: writes the six weight gradients and
/// returns the gradient w.r.t. each input vector.
pub fn bilstm_backward(
    params: &ParamVec,
    name: &str,
    xs: &[Array1<f64>],
    cache: &BiCache,
    d_out: &[Array1<f64>],
    writer: &mut GradWriter<'_>,
) -> Vec<Array1<f64>> {
    let n = xs.len();
    let hidden = cache.hidden;
    debug_assert_eq!(d_out.len(), n);

    let d_h_fwd: Vec<Array1<f64>> = d_out
        .iter()
        .map(|d| d.slice(s![0..hidden]).to_owned())
        .collect();
    let d_h_bwd_rev: Vec<Array1<f64>> = (0..n)
        .map(|j| d_out[n - 1 - j].slice(s![hidden..2 * hidden]).to_owned())
        .collect();

    let w_f = params.view2(&tensor(name, "fwd", "w"));
    let u_f = params.view2(&tensor(name, "fwd", "u"));
    let (grads_f, d_x_f) = lstm_backward(w_f, u_f, xs, &cache.fwd, &d_h_fwd);

    let xs_rev: Vec<Array1<f64>> = xs.iter().rev().cloned().collect();
    let w_b = params.view2(&tensor(name, "bwd", "w"));
    let u_b = params.view2(&tensor(name, "bwd", "u"));
    let (grads_b, d_x_b_rev) = lstm_backward(w_b, u_b, &xs_rev, &cache.bwd, &d_h_bwd_rev);

    for (dir, grads) in [("fwd", &grads_f), ("bwd", &grads_b)] {
        let mut w = writer.view2_mut(&tensor(name, dir, "w"));
        w += &grads.d_w;
        let mut u = writer.view2_mut(&tensor(name, dir, "u"));
        u += &grads.d_u;
        let mut b = writer.view1_mut(&tensor(name, dir, "b"));
        b += &grads.d_b;
    }

    (0..n).map(|i| &d_x_f[i] + &d_x_b_rev[n - 1 - i]).collect()
}

/// Encode a linearized parse into one fixed-width vector:
/// `[forward state after the last token ; backward state after the first]`.
pub fn encode_parse(params: &ParamVec, name: &str, xs: &[Array1<f64>]) -> (Array1<f64>, BiCache) {
    assert!(!xs.is_empty(), "parse token sequence cannot be empty");
    let (out, cache) = bilstm_encode(params, name, xs);
    let hidden = cache.hidden;
    let n = out.len();
    let summary = concat1(
        out[n - 1].slice(s![0..hidden]),
        out[0].slice(s![hidden..2 * hidden]),
    );
    (summary, cache)
}

/// Spread a parse-summary gradient back over per-position output gradients
/// (the inverse of the selection [`encode_parse`] performs).
pub fn parse_summary_grad(d_summary: &Array1<f64>, n: usize) -> Vec<Array1<f64>> {
    let hidden = d_summary.len() / 2;
    let mut d_out = vec![Array1::zeros(2 * hidden); n];
    d_out[n - 1]
        .slice_mut(s![0..hidden])
        .assign(&d_summary.slice(s![0..hidden]));
    d_out[0]
        .slice_mut(s![hidden..2 * hidden])
        .assign(&d_summary.slice(s![hidden..2 * hidden]));
    d_out
}

/// Append the parse summary (if any) to every token encoding.
///
/// With no parse vector this is the identity; otherwise output `i` is
/// `[token_encodings[i] ; parse_vector]`, and slicing the result at the
/// original width recovers both inputs.
pub fn fuse_features(
    token_encodings: &[Array1<f64>],
    parse_vector: Option<&Array1<f64>>,
) -> Vec<Array1<f64>> {
    match parse_vector {
        None => token_encodings.to_vec(),
        Some(p) => token_encodings
            .iter()
            .map(|t| concat1(t.view(), p.view()))
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::LayoutBuilder;
    use rand::SeedableRng;

    fn toy_params(name: &str, d: usize, h: usize, seed: u64) -> ParamVec {
        let layout = add_bilstm_tensors(LayoutBuilder::new(), name, d, h).build();
        let mut p = ParamVec::zeros(layout);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        init_bilstm_tensors(&mut p, name, &mut rng);
        p
    }

    fn toy_inputs(n: usize, d: usize, seed: u64) -> Vec<Array1<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| Array1::from_shape_fn(d, |_| rng.random_range(-1.0..1.0f64)))
            .collect()
    }

    #[test]
    fn output_width_is_twice_hidden() {
        let p = toy_params("enc", 3, 4, 1);
        let xs = toy_inputs(5, 3, 2);
        let (out, _) = bilstm_encode(&p, "enc", &xs);
        assert_eq!(out.len(), 5);
        assert!(out.iter().all(|o| o.len() == 8));
    }

    #[test]
    fn forget_gate_bias_starts_at_one() {
        let p = toy_params("enc", 3, 4, 1);
        let b = p.view1("enc_fwd.b");
        for k in 0..4 {
            assert_eq!(b[k + 4], 1.0); // forget block
            assert_eq!(b[k], 0.0); // input block
            assert_eq!(b[k + 8], 0.0); // cell block
            assert_eq!(b[k + 12], 0.0); // output block
        }
        let bound = 1.0 / 2.0;
        assert!(p.slice("enc_bwd.w").iter().all(|v| v.abs() < bound));
    }

    /// With the backward direction's weights copied from the forward
    /// direction, encoding a reversed sequence must swap the two halves:
    /// fwd-half(reverse(x))[j] == bwd-half(x)[n-1-j].
    #[test]
    fn reversal_swaps_directions_under_shared_weights() {
        let mut p = toy_params("enc", 3, 4, 5);
        for part in ["w", "u", "b"] {
            let fwd = p.slice(&format!("enc_fwd.{part}")).to_vec();
            p.slice_mut(&format!("enc_bwd.{part}"))
                .copy_from_slice(&fwd);
        }
        let xs = toy_inputs(6, 3, 6);
        let xs_rev: Vec<Array1<f64>> = xs.iter().rev().cloned().collect();
        let (out, _) = bilstm_encode(&p, "enc", &xs);
        let (out_rev, _) = bilstm_encode(&p, "enc", &xs_rev);
        let n = xs.len();
        for j in 0..n {
            let fwd_of_rev = out_rev[j].slice(s![0..4]);
            let bwd_of_orig = out[n - 1 - j].slice(s![4..8]);
            for (a, b) in fwd_of_rev.iter().zip(bwd_of_orig.iter()) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn parse_summary_selects_final_states() {
        let p = toy_params("parse", 3, 4, 9);
        let xs = toy_inputs(5, 3, 10);
        let (out, _) = bilstm_encode(&p, "parse", &xs);
        let (summary, _) = encode_parse(&p, "parse", &xs);
        assert_eq!(summary.len(), 8);
        for k in 0..4 {
            assert_eq!(summary[k], out[4][k]); // fwd last
            assert_eq!(summary[4 + k], out[0][4 + k]); // bwd first
        }
    }

    #[test]
    fn fuse_without_parse_is_identity() {
        let xs = toy_inputs(3, 4, 11);
        let fused = fuse_features(&xs, None);
        assert_eq!(fused, xs);
    }

    #[test]
    fn fuse_appends_and_slices_recover_inputs() {
        let xs = toy_inputs(3, 4, 12);
        let parse = Array1::from_vec(vec![9.0, -9.0]);
        let fused = fuse_features(&xs, Some(&parse));
        for (f, x) in fused.iter().zip(&xs) {
            assert_eq!(f.len(), 6);
            for k in 0..4 {
                assert_eq!(f[k], x[k]);
            }
            assert_eq!(f[4], 9.0);
            assert_eq!(f[5], -9.0);
        }
    }

    /// Finite-difference check through the whole BiLSTM (weights + inputs),
    /// with loss = sum of all output entries weighted by a fixed pattern.
    #[test]
    fn bilstm_backward_matches_finite_differences() {
        let name = "enc";
        let (d, h, n) = (3, 4, 5);
        let p = toy_params(name, d, h, 21);
        let xs = toy_inputs(n, d, 22);
        let weights: Vec<Array1<f64>> = (0..n)
            .map(|i| Array1::from_shape_fn(2 * h, |j| ((i + j) as f64 * 0.17).sin()))
            .collect();

        let loss = |p: &ParamVec, xs: &[Array1<f64>]| {
            let (out, _) = bilstm_encode(p, name, xs);
            out.iter().zip(&weights).map(|(o, w)| o.dot(w)).sum::<f64>()
        };

        let (_, cache) = bilstm_encode(&p, name, &xs);
        let mut grad = crate::nn::SentGrad::zeros(p.layout());
        let mut writer = GradWriter::new(p.layout(), &mut grad);
        let d_xs = bilstm_backward(&p, name, &xs, &cache, &weights, &mut writer);

        let step = 1e-6;
        // every weight tensor
        let mut p2 = p.clone();
        for spec in p.layout().specs().to_vec() {
            for k in 0..spec.len() {
                let idx = spec.offset + k;
                let orig = p.data()[idx];
                p2.data_mut()[idx] = orig + step;
                let up = loss(&p2, &xs);
                p2.data_mut()[idx] = orig - step;
                let down = loss(&p2, &xs);
                p2.data_mut()[idx] = orig;
                let numeric = (up - down) / (2.0 * step);
                let analytic = grad.dense[idx];
                let scale = analytic.abs().max(numeric.abs()).max(1.0);
                assert!(
                    (analytic - numeric).abs() < 1e-6 * scale,
                    "{}[{k}]: {analytic} vs {numeric}",
                    spec.name
                );
            }
        }
        // every input coordinate
        let mut xs2 = xs.clone();
        for t in 0..n {
            for j in 0..d {
                let orig = xs[t][j];
                xs2[t][j] = orig + step;
                let up = loss(&p, &xs2);
                xs2[t][j] = orig - step;
                let down = loss(&p, &xs2);
                xs2[t][j] = orig;
                let numeric = (up - down) / (2.0 * step);
                let analytic = d_xs[t][j];
                let scale = analytic.abs().max(numeric.abs()).max(1.0);
                assert!((analytic - numeric).abs() < 1e-6 * scale);
            }
        }
    }
}
