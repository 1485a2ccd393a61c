//! Argument identification as BIO sequence tagging.
//!
//! [`TaggerModel`] embeds a sentence's tokens (trainable table or frozen
//! contextual vectors), encodes them with a BiLSTM, optionally appends a
//! parse-tree summary vector to every position, projects each fused vector
//! to five per-label scores, and trains a linear-chain CRF on top.
//! Decoding runs Viterbi under the BIO constraint mask, so predicted tag
//! sequences are structurally valid by construction; [`extract_spans`]
//! turns them into argument spans.

use crate::corpus::{AnnotatedSentence, D1Example, Linearize, ParseTree, Span};
use crate::crf::{self, bio_mask, CrfView};
use crate::encoder::{
    add_bilstm_tensors, bilstm_backward, bilstm_encode, encode_parse, fuse_features,
    init_bilstm_tensors, load_pretrained_vectors, parse_summary_grad, BiCache, ContextualVectors,
    EmbeddingSource, EmbeddingTable, EncoderMode, Vocabulary,
};
use crate::error::{Error, Result};
use crate::labels::{Label, Role, TagSequence, NUM_LABELS};
use crate::nn::{GradWriter, Layout, LayoutBuilder, ParamVec, SentGrad, EMBED};
use crate::par::{map_ordered, Exec};
use crate::training::{run_training, TrainConfig, TrainLog, Trainable};
use ndarray::{s, Array1, Array2};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Tensor names the tagger adds around the shared CRF/embedding ones.
pub const LSTM: &str = "lstm";
pub const PARSE: &str = "parse";
pub const PARSE_EMBED: &str = "parse_embed";
pub const PROJ_W: &str = "proj.w";
pub const PROJ_B: &str = "proj.b";

/// Architecture of a [`TaggerModel`]. `mode` must agree with the
/// [`EmbeddingSource`] handed to [`TaggerModel::init`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaggerConfig {
    pub mode: EncoderMode,
    /// Token embedding width (ignored in contextual mode, where the input
    /// width comes from the vector file).
    pub emb_dim: usize,
    /// Per-direction BiLSTM state width.
    pub hidden: usize,
    /// Encode the linearized parse tree and append its summary vector to
    /// every token encoding.
    pub parse_features: bool,
    pub parse_emb_dim: usize,
    pub parse_hidden: usize,
    /// Keep at most this many token types (reserved tokens aside).
    pub vocab_cap: usize,
    /// Update the embedding table during training (scratch/pretrained only).
    pub train_embeddings: bool,
    pub init_seed: u64,
}

impl Default for TaggerConfig {
    fn default() -> TaggerConfig {
        TaggerConfig {
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

impl TaggerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.emb_dim == 0 && self.mode != EncoderMode::Contextual {
            return Err(Error::config("emb_dim must be at least 1"));
        }
        if self.hidden == 0 {
            return Err(Error::config("hidden must be at least 1"));
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

/// One contiguous argument span recovered from a tag sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArgumentSpan {
    pub role: Role,
    pub span: Span,
}

/// Collect the `B-X I-X*` runs of a valid tag sequence, in sentence order.
pub fn extract_spans(tags: &TagSequence) -> Vec<ArgumentSpan> {
    let mut out = Vec::new();
    let mut open: Option<(Role, usize)> = None;
    for (i, &label) in tags.labels().iter().enumerate() {
        match label {
            Label::O => {
                if let Some((role, start)) = open.take() {
                    out.push(ArgumentSpan {
                        role,
                        span: Span { start, end: i },
                    });
                }
            }
            Label::BArg1 | Label::BArg2 => {
                if let Some((role, start)) = open.take() {
                    out.push(ArgumentSpan {
                        role,
                        span: Span { start, end: i },
                    });
                }
                open = Some((label.role().expect("B labels carry a role"), i));
            }
            // valid sequences only continue the currently open span
            Label::IArg1 | Label::IArg2 => {}
        }
    }
    if let Some((role, start)) = open.take() {
        out.push(ArgumentSpan {
            role,
            span: Span {
                start,
                end: tags.len(),
            },
        });
    }
    out
}

/// Inverse of [`extract_spans`]: render spans as a BIO sequence of length
/// `len`. Spans must be in bounds, non-empty, and pairwise disjoint.
pub fn tags_from_spans(len: usize, spans: &[ArgumentSpan]) -> Result<TagSequence> {
    let mut labels = vec![Label::O; len];
    let mut sorted: Vec<&ArgumentSpan> = spans.iter().collect();
    sorted.sort_by_key(|a| (a.span.start, a.span.end));
    for w in sorted.windows(2) {
        if w[1].span.start < w[0].span.end {
            return Err(Error::validation(format!(
                "overlapping argument spans [{}, {}) and [{}, {})",
                w[0].span.start, w[0].span.end, w[1].span.start, w[1].span.end
            )));
        }
    }
    for a in &sorted {
        if a.span.start >= a.span.end || a.span.end > len {
            return Err(Error::validation(format!(
                "argument span [{}, {}) is invalid for a {len}-token sentence",
                a.span.start, a.span.end
            )));
        }
        labels[a.span.start] = a.role.begin();
        for l in labels.iter_mut().take(a.span.end).skip(a.span.start + 1) {
            *l = a.role.inside();
        }
    }
    TagSequence::new(labels)
}

/// The BIO argument tagger: embeddings → BiLSTM (→ parse summary) →
/// per-label projection → linear-chain CRF.
#[derive(Debug, Clone)]
pub struct TaggerModel {
    cfg: TaggerConfig,
    vocab: Vocabulary,
    parse_vocab: Option<Vocabulary>,
    params: ParamVec,
    contextual: Option<Arc<ContextualVectors>>,
    input_dim: usize,
}

/// Everything a forward pass computes, kept for the backward pass.
struct Forward {
    token_ids: Vec<usize>,
    xs: Vec<Array1<f64>>,
    cache: BiCache,
    parse: Option<ParseForward>,
    fused: Vec<Array1<f64>>,
    emissions: Array2<f64>,
}

struct ParseForward {
    ids: Vec<usize>,
    xs: Vec<Array1<f64>>,
    cache: BiCache,
}

pub(crate) fn build_layout(
    cfg: &TaggerConfig,
    input_dim: usize,
    vocab_len: usize,
    parse_vocab_len: usize,
) -> Arc<Layout> {
    let mut b = add_bilstm_tensors(LayoutBuilder::new(), LSTM, input_dim, cfg.hidden);
    let mut width = 2 * cfg.hidden;
    if cfg.parse_features {
        b = b.add(PARSE_EMBED, &[parse_vocab_len, cfg.parse_emb_dim]);
        b = add_bilstm_tensors(b, PARSE, cfg.parse_emb_dim, cfg.parse_hidden);
        width += 2 * cfg.parse_hidden;
    }
    b = b
        .add(PROJ_W, &[NUM_LABELS, width])
        .add(PROJ_B, &[NUM_LABELS])
        .add(crf::TRANS, &[NUM_LABELS, NUM_LABELS])
        .add(crf::START, &[NUM_LABELS])
        .add(crf::END, &[NUM_LABELS]);
    if cfg.mode != EncoderMode::Contextual {
        b = b.add(EMBED, &[vocab_len, cfg.emb_dim]);
    }
    b.build()
}

/// Shared by the tagger and the sense model: seed the non-CRF dense tensors.
pub(crate) fn init_common_tensors(
    params: &mut ParamVec,
    parse_features: bool,
    proj_w: &str,
    proj_b: &str,
    rng: &mut ChaCha8Rng,
) {
    init_bilstm_tensors(params, LSTM, rng);
    if parse_features {
        for v in params.slice_mut(PARSE_EMBED) {
            *v = rng.random_range(-0.05..0.05);
        }
        init_bilstm_tensors(params, PARSE, rng);
    }
    let fan_in = params.view2(proj_w).ncols();
    let bound = 1.0 / (fan_in as f64).sqrt();
    for v in params.slice_mut(proj_w) {
        *v = rng.random_range(-bound..bound);
    }
    for v in params.slice_mut(proj_b) {
        *v = 0.0;
    }
}

/// Copy an embedding table into the `embed` tensor region.
pub(crate) fn install_embeddings(params: &mut ParamVec, table: &EmbeddingTable) {
    let mut view = params.view2_mut(EMBED);
    assert_eq!(
        view.shape(),
        table.matrix.shape(),
        "embedding table must match the layout"
    );
    view.assign(&table.matrix);
}

/// Table construction for the two trainable-embedding modes.
pub(crate) fn embedding_table(
    source: &EmbeddingSource,
    vocab: &Vocabulary,
    dim: usize,
    seed: u64,
) -> Result<Option<EmbeddingTable>> {
    match source {
        EmbeddingSource::Seeded => Ok(Some(EmbeddingTable::seeded(vocab.len(), dim, seed))),
        EmbeddingSource::PretrainedFile(path) => {
            Ok(Some(load_pretrained_vectors(path, vocab, dim, seed)?))
        }
        EmbeddingSource::Contextual(_) => Ok(None),
    }
}

/// Build the parse-token vocabulary over linearized trees (labels only —
/// terminals already reach the model through the token encoder).
pub(crate) fn build_parse_vocab<'a>(
    parses: impl Iterator<Item = (String, &'a str)>,
    cap: usize,
) -> Result<Vocabulary> {
    let mut tokens: Vec<String> = Vec::new();
    for (context, parse) in parses {
        if parse.is_empty() {
            return Err(Error::validation(format!(
                "parse features are enabled but {context} has no parse"
            )));
        }
        let tree = ParseTree::parse(parse)?;
        tokens.extend(tree.linearize(Linearize::LabelsOnly));
    }
    Ok(Vocabulary::build(tokens.iter().map(String::as_str), cap))
}

impl TaggerModel {
    /// Build an untrained model: vocabulary from the training examples,
    /// seeded weight initialization, embeddings per `source`.
    pub fn init(
        cfg: &TaggerConfig,
        train: &[D1Example],
        source: EmbeddingSource,
    ) -> Result<TaggerModel> {
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
                "cannot initialize a tagger from an empty training set",
            ));
        }

        let vocab = Vocabulary::build(
            train
                .iter()
                .flat_map(|ex| ex.sentence.tokens.iter().map(String::as_str)),
            cfg.vocab_cap,
        );
        let parse_vocab = if cfg.parse_features {
            Some(build_parse_vocab(
                train
                    .iter()
                    .map(|ex| (ex.sentence.key().to_string(), ex.sentence.parse.as_str())),
                cfg.vocab_cap,
            )?)
        } else {
            None
        };

        let (input_dim, contextual) = match &source {
            EmbeddingSource::Contextual(v) => (v.dim(), Some(Arc::clone(v))),
            _ => (cfg.emb_dim, None),
        };

        let layout = build_layout(
            cfg,
            input_dim,
            vocab.len(),
            parse_vocab.as_ref().map(Vocabulary::len).unwrap_or(0),
        );
        let mut params = ParamVec::zeros(layout);
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.init_seed);
        init_common_tensors(&mut params, cfg.parse_features, PROJ_W, PROJ_B, &mut rng);
        if let Some(table) = embedding_table(&source, &vocab, cfg.emb_dim, cfg.init_seed)? {
            install_embeddings(&mut params, &table);
        }

        Ok(TaggerModel {
            cfg: cfg.clone(),
            vocab,
            parse_vocab,
            params,
            contextual,
            input_dim,
        })
    }

    /// Reassemble a model from checkpointed pieces.
    pub(crate) fn from_parts(
        cfg: TaggerConfig,
        vocab: Vocabulary,
        parse_vocab: Option<Vocabulary>,
        params: ParamVec,
        input_dim: usize,
    ) -> TaggerModel {
        TaggerModel {
            cfg,
            vocab,
            parse_vocab,
            params,
            contextual: None,
            input_dim,
        }
    }

    pub fn config(&self) -> &TaggerConfig {
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

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    /// True when the model runs on external sentence vectors that still have
    /// to be attached ([`TaggerModel::attach_contextual`]).
    pub fn needs_contextual(&self) -> bool {
        self.cfg.mode == EncoderMode::Contextual && self.contextual.is_none()
    }

    pub fn attach_contextual(&mut self, vectors: Arc<ContextualVectors>) -> Result<()> {
        if self.cfg.mode != EncoderMode::Contextual {
            return Err(Error::config(format!(
                "model runs in {} mode and takes no contextual vectors",
                self.cfg.mode
            )));
        }
        if vectors.dim() != self.input_dim {
            return Err(Error::config(format!(
                "contextual vectors are {}-dimensional but the model expects {}",
                vectors.dim(),
                self.input_dim
            )));
        }
        self.contextual = Some(vectors);
        Ok(())
    }

    fn token_inputs(&self, sentence: &AnnotatedSentence) -> Result<(Vec<usize>, Vec<Array1<f64>>)> {
        if self.cfg.mode == EncoderMode::Contextual {
            let vectors = self.contextual.as_ref().ok_or_else(|| {
                Error::config("contextual mode needs vectors attached before running the model")
            })?;
            let rows = vectors.get(&sentence.key())?;
            if rows.nrows() != sentence.tokens.len() {
                return Err(Error::validation(format!(
                    "sentence {} has {} tokens but its contextual entry has {} rows",
                    sentence.key(),
                    sentence.tokens.len(),
                    rows.nrows()
                )));
            }
            Ok((
                Vec::new(),
                rows.rows().into_iter().map(|r| r.to_owned()).collect(),
            ))
        } else {
            let ids = self.vocab.ids(&sentence.tokens);
            let table = self.params.view2(EMBED);
            let xs = ids.iter().map(|&id| table.row(id).to_owned()).collect();
            Ok((ids, xs))
        }
    }

    fn parse_inputs(&self, sentence: &AnnotatedSentence) -> Result<Option<ParseForward>> {
        if !self.cfg.parse_features {
            return Ok(None);
        }
        if !sentence.has_parse() {
            return Err(Error::validation(format!(
                "parse features are enabled but sentence {} has no parse",
                sentence.key()
            )));
        }
        let vocab = self
            .parse_vocab
            .as_ref()
            .expect("parse_features implies a parse vocabulary");
        let tree = ParseTree::parse(&sentence.parse)?;
        let tokens = tree.linearize(Linearize::LabelsOnly);
        let ids = vocab.ids(&tokens);
        let table = self.params.view2(PARSE_EMBED);
        let xs: Vec<Array1<f64>> = ids.iter().map(|&id| table.row(id).to_owned()).collect();
        let (_, cache) = encode_parse(&self.params, PARSE, &xs);
        Ok(Some(ParseForward { ids, xs, cache }))
    }

    fn forward(&self, sentence: &AnnotatedSentence) -> Result<Forward> {
        if sentence.tokens.is_empty() {
            return Err(Error::validation(format!(
                "sentence {} has no tokens",
                sentence.key()
            )));
        }
        let (token_ids, xs) = self.token_inputs(sentence)?;
        let (hs, cache) = bilstm_encode(&self.params, LSTM, &xs);
        let parse = self.parse_inputs(sentence)?;
        let summary = parse.as_ref().map(|p| {
            let (s, _) = encode_parse(&self.params, PARSE, &p.xs);
            s
        });
        let fused = fuse_features(&hs, summary.as_ref());

        let w = self.params.view2(PROJ_W);
        let b = self.params.view1(PROJ_B);
        let n = fused.len();
        let mut emissions = Array2::zeros((n, NUM_LABELS));
        for (i, f) in fused.iter().enumerate() {
            let scores = w.dot(f) + b;
            emissions.row_mut(i).assign(&scores);
        }
        Ok(Forward {
            token_ids,
            xs,
            cache,
            parse,
            fused,
            emissions,
        })
    }

    /// Per-token label scores — mostly a debugging/inspection hook.
    pub fn emissions(&self, sentence: &AnnotatedSentence) -> Result<Array2<f64>> {
        self.forward(sentence).map(|f| f.emissions)
    }

    /// CRF negative log-likelihood of the example's gold tags.
    pub fn sentence_loss(&self, example: &D1Example) -> Result<f64> {
        self.check_example(example)?;
        let fwd = self.forward(&example.sentence)?;
        let crf_view = CrfView::from_params(&self.params);
        let log_z = crf::log_partition(&crf_view, fwd.emissions.view())?;
        let gold = crf::score_sequence(&crf_view, fwd.emissions.view(), example.tags.labels());
        Ok(log_z - gold)
    }

    /// Loss plus exact gradients for every parameter the example touches.
    pub fn sentence_loss_grads(&self, example: &D1Example) -> Result<(f64, SentGrad)> {
        self.check_example(example)?;
        let fwd = self.forward(&example.sentence)?;
        let crf_view = CrfView::from_params(&self.params);
        let (loss, crf_grads) = crf::nll(&crf_view, fwd.emissions.view(), &example.tags)?;

        let mut grad = SentGrad::zeros(self.params.layout());
        let mut writer = GradWriter::new(self.params.layout(), &mut grad);
        crf::write_grads(&crf_grads, &mut writer);

        // projection: emissions[i] = W fused[i] + b
        let n = fwd.fused.len();
        let width = fwd.fused[0].len();
        {
            let mut d_w = writer.view2_mut(PROJ_W);
            for i in 0..n {
                let d_row = crf_grads.d_emissions.row(i);
                for k in 0..NUM_LABELS {
                    let dk = d_row[k];
                    if dk != 0.0 {
                        for j in 0..width {
                            d_w[[k, j]] += dk * fwd.fused[i][j];
                        }
                    }
                }
            }
        }
        {
            let mut d_b = writer.view1_mut(PROJ_B);
            for i in 0..n {
                d_b += &crf_grads.d_emissions.row(i);
            }
        }
        let w = self.params.view2(PROJ_W);
        let d_fused: Vec<Array1<f64>> = (0..n)
            .map(|i| w.t().dot(&crf_grads.d_emissions.row(i)))
            .collect();

        // token half of the fused vectors
        let token_width = 2 * self.cfg.hidden;
        let d_hs: Vec<Array1<f64>> = d_fused
            .iter()
            .map(|d| d.slice(s![0..token_width]).to_owned())
            .collect();
        let d_xs = bilstm_backward(&self.params, LSTM, &fwd.xs, &fwd.cache, &d_hs, &mut writer);
        if self.cfg.mode != EncoderMode::Contextual && self.cfg.train_embeddings {
            for (i, &id) in fwd.token_ids.iter().enumerate() {
                writer.add_embed_row(id, d_xs[i].view());
            }
        }

        // parse half: every position received the same summary vector
        if let Some(pf) = &fwd.parse {
            let mut d_summary = Array1::zeros(2 * self.cfg.parse_hidden);
            for d in &d_fused {
                d_summary += &d.slice(s![token_width..]);
            }
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

    fn check_example(&self, example: &D1Example) -> Result<()> {
        if example.tags.len() != example.sentence.tokens.len() {
            return Err(Error::validation(format!(
                "example for sentence {} has {} tags for {} tokens",
                example.sentence.key(),
                example.tags.len(),
                example.sentence.tokens.len()
            )));
        }
        Ok(())
    }

    /// Mean loss over a batch (no gradients).
    pub fn batch_loss(&self, batch: &[D1Example], exec: Exec) -> Result<f64> {
        if batch.is_empty() {
            return Err(Error::validation("empty batch"));
        }
        let losses = map_ordered(exec, batch, |ex| self.sentence_loss(ex));
        let mut sum = 0.0;
        for l in losses {
            sum += l?;
        }
        Ok(sum / batch.len() as f64)
    }

    /// Mean loss and mean gradients over a batch. Per-sentence work runs
    /// under `exec`; the reduction is always sequential and in input order,
    /// so both modes give bitwise-identical results.
    pub fn batch_loss_grads(&self, batch: &[D1Example], exec: Exec) -> Result<(f64, ParamVec)> {
        if batch.is_empty() {
            return Err(Error::validation("empty batch"));
        }
        let results = map_ordered(exec, batch, |ex| self.sentence_loss_grads(ex));
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

    /// Decode the best BIO-constrained tag sequence for one sentence.
    pub fn tag(&self, sentence: &AnnotatedSentence) -> Result<TagSequence> {
        let fwd = self.forward(sentence)?;
        let crf_view = CrfView::from_params(&self.params);
        let (tags, _) = crf::viterbi_decode(&crf_view, fwd.emissions.view(), &bio_mask())?;
        Ok(tags)
    }

    pub fn tag_all(&self, sentences: &[AnnotatedSentence], exec: Exec) -> Result<Vec<TagSequence>> {
        map_ordered(exec, sentences, |s| self.tag(s))
            .into_iter()
            .collect()
    }
}

impl Trainable for TaggerModel {
    type Example = D1Example;

    fn batch_loss_grads(&self, batch: &[D1Example], exec: Exec) -> Result<(f64, ParamVec)> {
        TaggerModel::batch_loss_grads(self, batch, exec)
    }

    fn batch_loss(&self, batch: &[D1Example], exec: Exec) -> Result<f64> {
        TaggerModel::batch_loss(self, batch, exec)
    }

    fn params(&self) -> &ParamVec {
        &self.params
    }

    fn params_mut(&mut self) -> &mut ParamVec {
        &mut self.params
    }
}

/// Train a tagger with Adam and dev-loss early stopping; the returned model
/// carries the best epoch's weights.
pub fn train_tagger(
    train: &[D1Example],
    dev: &[D1Example],
    cfg: &TaggerConfig,
    source: EmbeddingSource,
    tc: &TrainConfig,
) -> Result<(TaggerModel, TrainLog)> {
    let model = TaggerModel::init(cfg, train, source)?;
    run_training(model, train, dev, tc)
}
