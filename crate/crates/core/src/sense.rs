//! Level-2 sense classification of argument pairs.
//!
//! The two argument token sequences are joined into one marker-delimited
//! input, `<cls> arg1 <sep> arg2 <sep>`, run through a BiLSTM, and the
//! encoding at the `<cls>` position (optionally extended with a parse-tree
//! summary) feeds a softmax over the twenty senses. Trained with
//! cross-entropy; [`SenseModel::classify`] returns the full distribution.
//!
//! Contextual vectors are not supported here: they are keyed by sentence
//! and cover that sentence's tokens one-to-one, while this model consumes
//! detached argument pairs with marker tokens in between.

use crate::corpus::D2Example;
use crate::encoder::{
    add_bilstm_tensors, bilstm_backward, bilstm_encode, encode_parse, fuse_features,
    parse_summary_grad, BiCache, EmbeddingSource, EncoderMode, Vocabulary, CLS_TOKEN, SEP_TOKEN,
};
use crate::error::{Error, Result};
use crate::labels::{SenseLabel, NUM_SENSES};
use crate::nn::{GradWriter, Layout, LayoutBuilder, ParamVec, SentGrad, EMBED};
use crate::par::{map_ordered, Exec};
use crate::tagger::{
    build_parse_vocab, embedding_table, init_common_tensors, install_embeddings, LSTM, PARSE,
    PARSE_EMBED,
};
use crate::training::{run_training, TrainConfig, TrainLog, Trainable};
use ndarray::{s, Array1};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Output-head tensor names (the encoder tensors reuse the tagger's names).
pub const OUT_W: &str = "out.w";
pub const OUT_B: &str = "out.b";

/// Architecture of a [`SenseModel`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SenseConfig {
    /// Token-vector source; [`EncoderMode::Contextual`] is rejected.
    pub mode: EncoderMode,
    pub emb_dim: usize,
    pub hidden: usize,
    /// Encode the sentence parse and append its summary to the `<cls>`
    /// encoding before the softmax.
    pub parse_features: bool,
    pub parse_emb_dim: usize,
    pub parse_hidden: usize,
    pub vocab_cap: usize,
    pub train_embeddings: bool,
    pub init_seed: u64,
}

impl Default for SenseConfig {
    fn default() -> SenseConfig {
        SenseConfig {
            mode: EncoderMode::Scratch,
            emb_dim: 100,
            hidden: 256,
            parse_features: false,
            parse_emb_dim: 50,
            parse_hidden: 100,
            vocab_cap: 50_000,
            train_embeddings: true,
            init_seed: 0,
        }
    }
}

impl SenseConfig {
    pub fn validate(&self) -> Result<()> {
        if self.mode == EncoderMode::Contextual {
            return Err(Error::config(
                "the sense classifier runs on detached argument pairs and cannot use \
                 per-sentence contextual vectors; choose scratch or pretrained-vectors",
            ));
        }
        if self.emb_dim == 0 || self.hidden == 0 {
            return Err(Error::config("emb_dim and hidden must be at least 1"));
        }
        if self.parse_features && (self.parse_emb_dim == 0 || self.parse_hidden == 0) {
            return Err(Error::config(
                "parse_emb_dim and parse_hidden must be at least 1 when parse_features is on",
            ));
        }
        if self.vocab_cap == 0 {
            return Err(Error::config("vocab_cap must be at least 1"));
        }
        Ok(())
    }
}

/// `<cls> arg1 <sep> arg2 <sep>` — the classifier's input sequence.
pub fn build_pair_input(arg1: &[String], arg2: &[String]) -> Result<Vec<String>> {
    if arg1.is_empty() || arg2.is_empty() {
        return Err(Error::validation(
            "both argument token sequences must be non-empty",
        ));
    }
    let mut out = Vec::with_capacity(arg1.len() + arg2.len() + 3);
    out.push(CLS_TOKEN.to_string());
    out.extend(arg1.iter().cloned());
    out.push(SEP_TOKEN.to_string());
    out.extend(arg2.iter().cloned());
    out.push(SEP_TOKEN.to_string());
    Ok(out)
}

/// A probability distribution over the twenty senses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SenseDistribution {
    probs: Vec<f64>,
}

impl SenseDistribution {
    /// Wrap explicit probabilities; they must be one per sense, finite,
    /// non-negative, and sum to 1 within 1e-6.
    pub fn from_probs(probs: Vec<f64>) -> Result<SenseDistribution> {
        if probs.len() != NUM_SENSES {
            return Err(Error::validation(format!(
                "expected {NUM_SENSES} probabilities, got {}",
                probs.len()
            )));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::validation(
                "probabilities must be finite and non-negative",
            ));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > 1e-6 {
            return Err(Error::validation(format!(
                "probabilities sum to {sum}, expected 1"
            )));
        }
        Ok(SenseDistribution { probs })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, sense: SenseLabel) -> f64 {
        self.probs[sense.index()]
    }

    /// Highest-probability sense; ties break toward the lowest sense index.
    pub fn best(&self) -> (SenseLabel, f64) {
        let mut best = 0;
        for (i, &p) in self.probs.iter().enumerate() {
            if p > self.probs[best] {
                best = i;
            }
        }
        (
            SenseLabel::from_index(best).expect("index < NUM_SENSES"),
            self.probs[best],
        )
    }

    pub fn max_prob(&self) -> f64 {
        self.probs.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    /// True when no sense is preferred over any other (within `tolerance`).
    pub fn is_uniform(&self, tolerance: f64) -> bool {
        let max = self.probs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min = self.probs.iter().cloned().fold(f64::INFINITY, f64::min);
        max - min <= tolerance
    }
}

fn softmax(logits: &Array1<f64>) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&x| (x - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// The argument-pair sense classifier.
#[derive(Debug, Clone)]
pub struct SenseModel {
    cfg: SenseConfig,
    vocab: Vocabulary,
    parse_vocab: Option<Vocabulary>,
    params: ParamVec,
}

struct Forward {
    ids: Vec<usize>,
    xs: Vec<Array1<f64>>,
    cache: BiCache,
    parse: Option<ParseForward>,
    /// `<cls>` encoding, possibly extended with the parse summary.
    feature: Array1<f64>,
    probs: Vec<f64>,
}

struct ParseForward {
    ids: Vec<usize>,
    xs: Vec<Array1<f64>>,
    cache: BiCache,
}

pub(crate) fn build_layout(
    cfg: &SenseConfig,
    vocab_len: usize,
    parse_vocab_len: usize,
) -> Arc<Layout> {
    let mut b = add_bilstm_tensors(LayoutBuilder::new(), LSTM, cfg.emb_dim, cfg.hidden);
    let mut width = 2 * cfg.hidden;
    if cfg.parse_features {
        b = b.add(PARSE_EMBED, &[parse_vocab_len, cfg.parse_emb_dim]);
        b = add_bilstm_tensors(b, PARSE, cfg.parse_emb_dim, cfg.parse_hidden);
        width += 2 * cfg.parse_hidden;
    }
    b = b
        .add(OUT_W, &[NUM_SENSES, width])
        .add(OUT_B, &[NUM_SENSES])
        .add(EMBED, &[vocab_len, cfg.emb_dim]);
    b.build()
}

impl SenseModel {
    pub fn init(
        cfg: &SenseConfig,
        train: &[D2Example],
        source: EmbeddingSource,
    ) -> Result<SenseModel> {
        cfg.validate()?;
        if source.mode() != cfg.mode {
            return Err(Error::config(format!(
                "config says encoder mode {} but the embedding source is {}",
                cfg.mode,
                source.mode()
            )));
        }
        if train.is_empty() {
            return Err(Error::validation(
                "cannot initialize a sense classifier from an empty training set",
            ));
        }

        let vocab = Vocabulary::build_with_markers(
            train
                .iter()
                .flat_map(|ex| ex.arg1_tokens.iter().chain(&ex.arg2_tokens))
                .map(String::as_str),
            cfg.vocab_cap,
        );
        let parse_vocab = if cfg.parse_features {
            Some(build_parse_vocab(
                train
                    .iter()
                    .enumerate()
                    .map(|(i, ex)| (format!("pair example {i}"), ex.parse.as_str())),
                cfg.vocab_cap,
            )?)
        } else {
            None
        };

        let layout = build_layout(
            cfg,
            vocab.len(),
            parse_vocab.as_ref().map(Vocabulary::len).unwrap_or(0),
        );
        let mut params = ParamVec::zeros(layout);
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.init_seed);
        init_common_tensors(&mut params, cfg.parse_features, OUT_W, OUT_B, &mut rng);
        let table = embedding_table(&source, &vocab, cfg.emb_dim, cfg.init_seed)?
            .expect("contextual mode was rejected above");
        install_embeddings(&mut params, &table);

        Ok(SenseModel {
            cfg: cfg.clone(),
            vocab,
            parse_vocab,
            params,
        })
    }

    pub(crate) fn from_parts(
        cfg: SenseConfig,
        vocab: Vocabulary,
        parse_vocab: Option<Vocabulary>,
        params: ParamVec,
    ) -> SenseModel {
        SenseModel {
            cfg,
            vocab,
            parse_vocab,
            params,
        }
    }

    pub fn config(&self) -> &SenseConfig {
        &self.cfg
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn parse_vocab(&self) -> Option<&Vocabulary> {
        self.parse_vocab.as_ref()
    }

    pub fn params(&self) -> &ParamVec {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamVec {
        &mut self.params
    }

    fn parse_inputs(&self, parse: &str, context: &str) -> Result<Option<ParseForward>> {
        if !self.cfg.parse_features {
            return Ok(None);
        }
        if parse.is_empty() {
            return Err(Error::validation(format!(
                "parse features are enabled but {context} has no parse"
            )));
        }
        let vocab = self
            .parse_vocab
            .as_ref()
            .expect("parse_features implies a parse vocabulary");
        let tree = crate::corpus::ParseTree::parse(parse)?;
        let tokens = tree.linearize(crate::corpus::Linearize::LabelsOnly);
        let ids = vocab.ids(&tokens);
        let table = self.params.view2(PARSE_EMBED);
        let xs: Vec<Array1<f64>> = ids.iter().map(|&id| table.row(id).to_owned()).collect();
        let (_, cache) = encode_parse(&self.params, PARSE, &xs);
        Ok(Some(ParseForward { ids, xs, cache }))
    }

    fn forward(&self, arg1: &[String], arg2: &[String], parse: &str) -> Result<Forward> {
        let pair = build_pair_input(arg1, arg2)?;
        let ids = self.vocab.ids(&pair);
        let table = self.params.view2(EMBED);
        let xs: Vec<Array1<f64>> = ids.iter().map(|&id| table.row(id).to_owned()).collect();
        let (hs, cache) = bilstm_encode(&self.params, LSTM, &xs);
        let parse_fwd = self.parse_inputs(parse, "this argument pair")?;
        let summary = parse_fwd.as_ref().map(|p| {
            let (s, _) = encode_parse(&self.params, PARSE, &p.xs);
            s
        });
        // Only the <cls> position feeds the head, so fuse just that one.
        let feature = fuse_features(&hs[0..1], summary.as_ref()).remove(0);
        let logits = self.params.view2(OUT_W).dot(&feature) + self.params.view1(OUT_B);
        let probs = softmax(&logits);
        Ok(Forward {
            ids,
            xs,
            cache,
            parse: parse_fwd,
            feature,
            probs,
        })
    }

    /// Cross-entropy loss of one labeled pair.
    pub fn example_loss(&self, example: &D2Example) -> Result<f64> {
        let fwd = self.forward(&example.arg1_tokens, &example.arg2_tokens, &example.parse)?;
        Ok(-fwd.probs[example.sense.index()].max(f64::MIN_POSITIVE).ln())
    }

    /// Loss plus exact gradients for one labeled pair.
    pub fn example_loss_grads(&self, example: &D2Example) -> Result<(f64, SentGrad)> {
        let fwd = self.forward(&example.arg1_tokens, &example.arg2_tokens, &example.parse)?;
        let loss = -fwd.probs[example.sense.index()].max(f64::MIN_POSITIVE).ln();

        let mut grad = SentGrad::zeros(self.params.layout());
        let mut writer = GradWriter::new(self.params.layout(), &mut grad);

        // d loss / d logits = softmax - onehot(gold)
        let mut d_logits = Array1::from_vec(fwd.probs.clone());
        d_logits[example.sense.index()] -= 1.0;

        {
            let mut d_w = writer.view2_mut(OUT_W);
            for k in 0..NUM_SENSES {
                let dk = d_logits[k];
                if dk != 0.0 {
                    for (j, &f) in fwd.feature.iter().enumerate() {
                        d_w[[k, j]] += dk * f;
                    }
                }
            }
        }
        {
            let mut d_b = writer.view1_mut(OUT_B);
            d_b += &d_logits;
        }
        let d_feature = self.params.view2(OUT_W).t().dot(&d_logits);

        // only position 0 of the sequence encoder receives a gradient
        let token_width = 2 * self.cfg.hidden;
        let n = fwd.xs.len();
        let mut d_hs = vec![Array1::zeros(token_width); n];
        d_hs[0].assign(&d_feature.slice(s![0..token_width]));
        let d_xs = bilstm_backward(&self.params, LSTM, &fwd.xs, &fwd.cache, &d_hs, &mut writer);
        if self.cfg.train_embeddings {
            for (i, &id) in fwd.ids.iter().enumerate() {
                writer.add_embed_row(id, d_xs[i].view());
            }
        }

        if let Some(pf) = &fwd.parse {
            let d_summary = d_feature.slice(s![token_width..]).to_owned();
            let d_out = parse_summary_grad(&d_summary, pf.xs.len());
            let d_pxs =
                bilstm_backward(&self.params, PARSE, &pf.xs, &pf.cache, &d_out, &mut writer);
            let mut d_table = writer.view2_mut(PARSE_EMBED);
            for (j, &id) in pf.ids.iter().enumerate() {
                let mut row = d_table.row_mut(id);
                row += &d_pxs[j];
            }
        }

        Ok((loss, grad))
    }

    pub fn batch_loss(&self, batch: &[D2Example], exec: Exec) -> Result<f64> {
        if batch.is_empty() {
            return Err(Error::validation("empty batch"));
        }
        let losses = map_ordered(exec, batch, |ex| self.example_loss(ex));
        let mut sum = 0.0;
        for l in losses {
            sum += l?;
        }
        Ok(sum / batch.len() as f64)
    }

    pub fn batch_loss_grads(&self, batch: &[D2Example], exec: Exec) -> Result<(f64, ParamVec)> {
        if batch.is_empty() {
            return Err(Error::validation("empty batch"));
        }
        let results = map_ordered(exec, batch, |ex| self.example_loss_grads(ex));
        let mut acc = ParamVec::zeros(self.params.layout().clone());
        let mut sum = 0.0;
        for r in results {
            let (loss, g) = r?;
            sum += loss;
            acc.accumulate(&g);
        }
        let inv = 1.0 / batch.len() as f64;
        acc.scale(inv);
        Ok((sum * inv, acc))
    }

    /// Distribution over senses for one argument pair. `parse` is consulted
    /// only when the model was built with parse features.
    pub fn classify(
        &self,
        arg1: &[String],
        arg2: &[String],
        parse: &str,
    ) -> Result<SenseDistribution> {
        let fwd = self.forward(arg1, arg2, parse)?;
        SenseDistribution::from_probs(fwd.probs)
    }
}

impl Trainable for SenseModel {
    type Example = D2Example;

    fn batch_loss_grads(&self, batch: &[D2Example], exec: Exec) -> Result<(f64, ParamVec)> {
        SenseModel::batch_loss_grads(self, batch, exec)
    }

    fn batch_loss(&self, batch: &[D2Example], exec: Exec) -> Result<f64> {
        SenseModel::batch_loss(self, batch, exec)
    }

    fn params(&self) -> &ParamVec {
        &self.params
    }

    fn params_mut(&mut self) -> &mut ParamVec {
        &mut self.params
    }
}

/// Train a sense classifier with Adam and dev-loss early stopping.
pub fn train_sense(
    train: &[D2Example],
    dev: &[D2Example],
    cfg: &SenseConfig,
    source: EmbeddingSource,
    tc: &TrainConfig,
) -> Result<(SenseModel, TrainLog)> {
    let model = SenseModel::init(cfg, train, source)?;
    run_training(model, train, dev, tc)
}
