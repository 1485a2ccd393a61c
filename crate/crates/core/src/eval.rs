//! Evaluation protocols: exact-match argument P/R/F1, token-level label
//! P/R/F1, argument-order scoring, sense reports with confusion matrices and
//! weighted averages, condition-sliced analysis, and cross-validation
//! aggregation.
//!
//! Conventions (documented rather than silently assumed):
//! * Exact match gives no reward for partial overlap; a predicted span is
//!   correct only when some gold argument of the same role is exactly that
//!   `[start, end)` interval. A discontinuous gold argument occupies several
//!   intervals and therefore can never be matched — it counts as a false
//!   negative.
//! * With multiple same-role spans, matching is greedy left-to-right and
//!   one-to-one; unmatched predictions are false positives.
//! * Precision with zero predictions is defined as 0 so aggregation stays
//!   total.
//! * All rates live in [0, 1] inside the structs; [`EvalReport::flatten`]
//!   and the renderers scale to percent.

use crate::corpus::{GoldRelation, SentenceKey, Span};
use crate::error::{Error, Result};
use crate::labels::{Label, Role, SenseLabel, TagSequence, NUM_SENSES};
use crate::tagger::{extract_spans, ArgumentSpan};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Precision / recall / F1 with the gold-instance count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Number of gold instances (true positives + false negatives).
    pub support: usize,
}

impl Prf {
    pub fn from_counts(tp: usize, fp: usize, fn_count: usize) -> Prf {
        let precision = if tp + fp == 0 {
            0.0
        } else {
            tp as f64 / (tp + fp) as f64
        };
        let recall = if tp + fn_count == 0 {
            0.0
        } else {
            tp as f64 / (tp + fn_count) as f64
        };
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Prf {
            precision,
            recall,
            f1,
            support: tp + fn_count,
        }
    }

    pub fn zero() -> Prf {
        Prf {
            precision: 0.0,
            recall: 0.0,
            f1: 0.0,
            support: 0,
        }
    }

    fn flatten_into(&self, prefix: &str, out: &mut BTreeMap<String, f64>) {
        out.insert(format!("{prefix}.p"), 100.0 * self.precision);
        out.insert(format!("{prefix}.r"), 100.0 * self.recall);
        out.insert(format!("{prefix}.f1"), 100.0 * self.f1);
        out.insert(format!("{prefix}.support"), self.support as f64);
    }
}

/// The two argument span sets of one gold relation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldRelationSpans {
    pub arg1: Vec<Span>,
    pub arg2: Vec<Span>,
}

impl GoldRelationSpans {
    pub fn from_relation(rel: &GoldRelation) -> GoldRelationSpans {
        GoldRelationSpans {
            arg1: rel.spans(Role::Arg1).to_vec(),
            arg2: rel.spans(Role::Arg2).to_vec(),
        }
    }

    /// Read one relation's spans out of a gold BIO sequence. `None` when the
    /// sequence contains no argument spans at all.
    pub fn from_tags(tags: &TagSequence) -> Option<GoldRelationSpans> {
        let spans = extract_spans(tags);
        if spans.is_empty() {
            return None;
        }
        let mut g = GoldRelationSpans {
            arg1: Vec::new(),
            arg2: Vec::new(),
        };
        for s in spans {
            match s.role {
                Role::Arg1 => g.arg1.push(s.span),
                Role::Arg2 => g.arg2.push(s.span),
            }
        }
        Some(g)
    }

    fn spans(&self, role: Role) -> &[Span] {
        match role {
            Role::Arg1 => &self.arg1,
            Role::Arg2 => &self.arg2,
        }
    }

    /// Leftmost token index covered by either argument.
    pub fn leftmost_start(&self) -> usize {
        self.arg1
            .iter()
            .chain(&self.arg2)
            .map(|s| s.start)
            .min()
            .expect("a relation has at least one span")
    }
}

/// Exact-match argument identification scores, by role.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactMatchReport {
    pub arg1: Prf,
    pub arg2: Prf,
}

/// Exact span matching per role over key-aligned sentence lists.
///
/// `gold[i]` and `pred[i]` must describe the same sentence (keys are
/// checked). Each gold argument may be matched by at most one predicted
/// span, greedily left-to-right; partial overlap earns nothing.
pub fn exact_match(
    gold: &[(SentenceKey, Vec<GoldRelationSpans>)],
    pred: &[(SentenceKey, Vec<ArgumentSpan>)],
) -> Result<ExactMatchReport> {
    if gold.len() != pred.len() {
        return Err(Error::validation(format!(
            "gold has {} sentences but predictions have {}",
            gold.len(),
            pred.len()
        )));
    }
    let mut counts = [[0usize; 3]; 2]; // [role][tp, fp, fn]
    for ((gk, grels), (pk, pspans)) in gold.iter().zip(pred) {
        if gk != pk {
            return Err(Error::validation(format!(
                "gold/prediction key mismatch: {gk} vs {pk}"
            )));
        }
        for (ri, role) in [Role::Arg1, Role::Arg2].into_iter().enumerate() {
            let gold_args: Vec<&[Span]> = grels.iter().map(|r| r.spans(role)).collect();
            let mut matched = vec![false; gold_args.len()];
            let mut tp = 0usize;
            let mut fp = 0usize;
            for p in pspans.iter().filter(|p| p.role == role) {
                let hit = gold_args
                    .iter()
                    .enumerate()
                    .position(|(gi, ga)| !matched[gi] && ga.len() == 1 && ga[0] == p.span);
                match hit {
                    Some(gi) => {
                        matched[gi] = true;
                        tp += 1;
                    }
                    None => fp += 1,
                }
            }
            let fn_count = matched.iter().filter(|m| !**m).count();
            counts[ri][0] += tp;
            counts[ri][1] += fp;
            counts[ri][2] += fn_count;
        }
    }
    Ok(ExactMatchReport {
        arg1: Prf::from_counts(counts[0][0], counts[0][1], counts[0][2]),
        arg2: Prf::from_counts(counts[1][0], counts[1][1], counts[1][2]),
    })
}

/// Token-level tagging scores: one PRF per BIO label (O included) plus
/// overall token accuracy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenReport {
    pub per_label: Vec<(Label, Prf)>,
    pub accuracy: f64,
    pub tokens: usize,
}

pub fn token_prf(gold: &[TagSequence], pred: &[TagSequence]) -> Result<TokenReport> {
    if gold.len() != pred.len() {
        return Err(Error::validation(format!(
            "gold has {} sequences but predictions have {}",
            gold.len(),
            pred.len()
        )));
    }
    let mut tp = [0usize; 5];
    let mut fp = [0usize; 5];
    let mut fn_ = [0usize; 5];
    let mut correct = 0usize;
    let mut total = 0usize;
    for (i, (g, p)) in gold.iter().zip(pred).enumerate() {
        if g.len() != p.len() {
            return Err(Error::validation(format!(
                "sequence {i}: gold has {} tags but prediction has {}",
                g.len(),
                p.len()
            )));
        }
        for (gl, pl) in g.labels().iter().zip(p.labels()) {
            total += 1;
            if gl == pl {
                correct += 1;
                tp[gl.index()] += 1;
            } else {
                fn_[gl.index()] += 1;
                fp[pl.index()] += 1;
            }
        }
    }
    let per_label = Label::ALL
        .iter()
        .map(|&l| {
            (
                l,
                Prf::from_counts(tp[l.index()], fp[l.index()], fn_[l.index()]),
            )
        })
        .collect();
    let accuracy = if total == 0 {
        0.0
    } else {
        correct as f64 / total as f64
    };
    Ok(TokenReport {
        per_label,
        accuracy,
        tokens: total,
    })
}

/// Which argument comes first in the sentence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OrderClass {
    Arg1First,
    Arg2First,
}

/// Order of a predicted span list: the first-by-position span of each role
/// decides; `None` when either role is missing.
pub fn order_of_spans(spans: &[ArgumentSpan]) -> Option<OrderClass> {
    let first = |role: Role| spans.iter().find(|s| s.role == role).map(|s| s.span.start);
    match (first(Role::Arg1), first(Role::Arg2)) {
        (Some(a1), Some(a2)) => Some(if a1 < a2 {
            OrderClass::Arg1First
        } else {
            OrderClass::Arg2First
        }),
        _ => None,
    }
}

/// Order class of a gold relation, by leftmost argument start.
pub fn order_of_relation(rel: &GoldRelationSpans) -> Option<OrderClass> {
    let leftmost = |spans: &[Span]| spans.iter().map(|s| s.start).min();
    match (leftmost(&rel.arg1), leftmost(&rel.arg2)) {
        (Some(a1), Some(a2)) => Some(if a1 < a2 {
            OrderClass::Arg1First
        } else {
            OrderClass::Arg2First
        }),
        _ => None,
    }
}

/// Per-class argument-order scores. Order agreement is judged on the class
/// alone — it does not require the spans to match exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderReport {
    pub arg1_first: Prf,
    pub arg2_first: Prf,
}

/// Score order classification over aligned instance lists (`None` = no
/// gold relation / no order-classifiable prediction). A missed prediction
/// counts against recall; a prediction without a gold relation counts
/// against precision.
pub fn order_score(
    gold: &[Option<OrderClass>],
    pred: &[Option<OrderClass>],
) -> Result<OrderReport> {
    if gold.len() != pred.len() {
        return Err(Error::validation(format!(
            "gold has {} instances but predictions have {}",
            gold.len(),
            pred.len()
        )));
    }
    let idx = |c: OrderClass| match c {
        OrderClass::Arg1First => 0usize,
        OrderClass::Arg2First => 1,
    };
    let mut tp = [0usize; 2];
    let mut fp = [0usize; 2];
    let mut fn_ = [0usize; 2];
    for (g, p) in gold.iter().zip(pred) {
        match (g, p) {
            (Some(g), Some(p)) if g == p => tp[idx(*g)] += 1,
            (Some(g), Some(p)) => {
                fn_[idx(*g)] += 1;
                fp[idx(*p)] += 1;
            }
            (Some(g), None) => fn_[idx(*g)] += 1,
            (None, Some(p)) => fp[idx(*p)] += 1,
            (None, None) => {}
        }
    }
    Ok(OrderReport {
        arg1_first: Prf::from_counts(tp[0], fp[0], fn_[0]),
        arg2_first: Prf::from_counts(tp[1], fp[1], fn_[1]),
    })
}

/// Sense classification scores: per-sense PRF, micro average (= accuracy for
/// single-label classification), frequency-weighted average, and a 20×20
/// confusion matrix (rows gold, columns predicted, both in sense-index
/// order).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SenseReport {
    pub per_sense: Vec<(SenseLabel, Prf)>,
    pub micro: Prf,
    pub weighted: Prf,
    pub confusion: Vec<Vec<usize>>,
    pub instances: usize,
}

pub fn sense_report(gold: &[SenseLabel], pred: &[SenseLabel]) -> Result<SenseReport> {
    if gold.len() != pred.len() {
        return Err(Error::validation(format!(
            "gold has {} labels but predictions have {}",
            gold.len(),
            pred.len()
        )));
    }
    let mut confusion = vec![vec![0usize; NUM_SENSES]; NUM_SENSES];
    let mut correct = 0usize;
    for (g, p) in gold.iter().zip(pred) {
        confusion[g.index()][p.index()] += 1;
        if g == p {
            correct += 1;
        }
    }
    let n = gold.len();
    let mut per_sense = Vec::with_capacity(NUM_SENSES);
    let mut weighted = (0.0, 0.0, 0.0);
    for &s in SenseLabel::ALL.iter() {
        let i = s.index();
        let tp = confusion[i][i];
        let gold_count: usize = confusion[i].iter().sum();
        let pred_count: usize = confusion.iter().map(|row| row[i]).sum();
        let prf = Prf::from_counts(tp, pred_count - tp, gold_count - tp);
        if n > 0 {
            let w = gold_count as f64 / n as f64;
            weighted.0 += w * prf.precision;
            weighted.1 += w * prf.recall;
            weighted.2 += w * prf.f1;
        }
        per_sense.push((s, prf));
    }
    let accuracy = if n == 0 {
        0.0
    } else {
        correct as f64 / n as f64
    };
    Ok(SenseReport {
        per_sense,
        micro: Prf {
            precision: accuracy,
            recall: accuracy,
            f1: accuracy,
            support: n,
        },
        weighted: Prf {
            precision: weighted.0,
            recall: weighted.1,
            f1: weighted.2,
            support: n,
        },
        confusion,
        instances: n,
    })
}

impl SenseReport {
    /// The confusion matrix as CSV: header row/column use the sense names.
    pub fn confusion_csv(&self) -> String {
        let mut out = String::from("gold\\pred");
        for s in SenseLabel::ALL.iter() {
            out.push(',');
            out.push_str(s.as_str());
        }
        out.push('\n');
        for (i, s) in SenseLabel::ALL.iter().enumerate() {
            out.push_str(s.as_str());
            for c in &self.confusion[i] {
                out.push(',');
                out.push_str(&c.to_string());
            }
            out.push('\n');
        }
        out
    }
}

/// One tagging-evaluation instance: a gold relation's BIO rendering plus the
/// model's prediction for the sentence, with the metadata slicing needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaggedExample {
    pub key: SentenceKey,
    pub gold: TagSequence,
    pub pred: TagSequence,
    /// In-scope relations in the source sentence (0 for an all-O example).
    pub siblings: usize,
    /// Rank of this relation among its siblings, by leftmost argument start
    /// (0 = leftmost).
    pub position: usize,
    /// Gold sense, when the example carries a relation.
    pub sense: Option<SenseLabel>,
}

/// Pair up tagging-dataset examples with model predictions and attach slice
/// metadata (sibling counts, left/right position, gold sense).
pub fn tagged_examples(
    examples: &[crate::corpus::D1Example],
    preds: &[TagSequence],
) -> Result<Vec<TaggedExample>> {
    if examples.len() != preds.len() {
        return Err(Error::validation(format!(
            "{} examples but {} predictions",
            examples.len(),
            preds.len()
        )));
    }
    // leftmost start per relation-bearing example, grouped by sentence
    let mut groups: BTreeMap<String, Vec<(usize, usize)>> = BTreeMap::new();
    for (i, ex) in examples.iter().enumerate() {
        if ex.source_relation.is_some() {
            if let Some(g) = GoldRelationSpans::from_tags(&ex.tags) {
                groups
                    .entry(ex.sentence.key().to_string())
                    .or_default()
                    .push((i, g.leftmost_start()));
            }
        }
    }
    let mut position = vec![0usize; examples.len()];
    let mut siblings = vec![0usize; examples.len()];
    for members in groups.values_mut() {
        members.sort_by_key(|&(i, start)| (start, i));
        for (rank, &(i, _)) in members.iter().enumerate() {
            position[i] = rank;
            siblings[i] = members.len();
        }
    }

    examples
        .iter()
        .zip(preds)
        .enumerate()
        .map(|(i, (ex, pred))| {
            if ex.tags.len() != pred.len() {
                return Err(Error::validation(format!(
                    "example {i}: gold has {} tags but prediction has {}",
                    ex.tags.len(),
                    pred.len()
                )));
            }
            let sense = match ex.source_relation {
                Some(ri) => Some(
                    ex.sentence
                        .relations
                        .get(ri)
                        .ok_or_else(|| {
                            Error::validation(format!(
                                "example {i} points at relation {ri} of sentence {}, which has {}",
                                ex.sentence.key(),
                                ex.sentence.relations.len()
                            ))
                        })?
                        .sense,
                ),
                None => None,
            };
            Ok(TaggedExample {
                key: ex.sentence.key(),
                gold: ex.tags.clone(),
                pred: pred.clone(),
                siblings: siblings[i],
                position: position[i],
                sense,
            })
        })
        .collect()
}

type KeyedGoldSpans = Vec<(SentenceKey, Vec<GoldRelationSpans>)>;
type KeyedPredSpans = Vec<(SentenceKey, Vec<ArgumentSpan>)>;

fn exact_inputs(examples: &[TaggedExample]) -> (KeyedGoldSpans, KeyedPredSpans) {
    let gold = examples
        .iter()
        .map(|e| {
            (
                e.key.clone(),
                GoldRelationSpans::from_tags(&e.gold).into_iter().collect(),
            )
        })
        .collect();
    let pred = examples
        .iter()
        .map(|e| (e.key.clone(), extract_spans(&e.pred)))
        .collect();
    (gold, pred)
}

/// The full argument-identification report over one example set.
pub fn evaluate_tagging(examples: &[TaggedExample]) -> Result<EvalReport> {
    let (gold, pred) = exact_inputs(examples);
    let exact = exact_match(&gold, &pred)?;
    let gold_tags: Vec<TagSequence> = examples.iter().map(|e| e.gold.clone()).collect();
    let pred_tags: Vec<TagSequence> = examples.iter().map(|e| e.pred.clone()).collect();
    let tokens = token_prf(&gold_tags, &pred_tags)?;
    let gold_order: Vec<Option<OrderClass>> = gold
        .iter()
        .map(|(_, g)| g.first().and_then(order_of_relation))
        .collect();
    let pred_order: Vec<Option<OrderClass>> = pred.iter().map(|(_, p)| order_of_spans(p)).collect();
    let order = order_score(&gold_order, &pred_order)?;
    Ok(EvalReport {
        slice: None,
        size: examples.len(),
        exact: Some(exact),
        tokens: Some(tokens),
        order: Some(order),
        sense: None,
    })
}

/// Exact-match reports over the standard condition slices: multi-relation
/// sentences (with left/right sub-slices) and every sense whose gold
/// frequency reaches `sense_threshold`.
pub fn slice_eval(examples: &[TaggedExample], sense_threshold: usize) -> Result<Vec<EvalReport>> {
    let mut out = Vec::new();
    let mut add = |name: String, members: Vec<TaggedExample>| -> Result<()> {
        let (gold, pred) = exact_inputs(&members);
        let exact = exact_match(&gold, &pred)?;
        out.push(EvalReport {
            slice: Some(name),
            size: members.len(),
            exact: Some(exact),
            tokens: None,
            order: None,
            sense: None,
        });
        Ok(())
    };

    let multi: Vec<TaggedExample> = examples
        .iter()
        .filter(|e| e.siblings >= 2)
        .cloned()
        .collect();
    let left: Vec<TaggedExample> = multi.iter().filter(|e| e.position == 0).cloned().collect();
    let right: Vec<TaggedExample> = multi
        .iter()
        .filter(|e| e.position + 1 == e.siblings)
        .cloned()
        .collect();
    add("multi-relation".to_string(), multi)?;
    add("multi-relation-left".to_string(), left)?;
    add("multi-relation-right".to_string(), right)?;

    let mut sense_counts = [0usize; NUM_SENSES];
    for e in examples {
        if let Some(s) = e.sense {
            sense_counts[s.index()] += 1;
        }
    }
    for &s in SenseLabel::ALL.iter() {
        if sense_counts[s.index()] >= sense_threshold.max(1) {
            let members: Vec<TaggedExample> = examples
                .iter()
                .filter(|e| e.sense == Some(s))
                .cloned()
                .collect();
            add(format!("sense:{}", s.as_str()), members)?;
        }
    }
    Ok(out)
}

/// A composite report; sections are present when the protocol that produces
/// them ran.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Slice name, or `None` for the full test set.
    pub slice: Option<String>,
    /// Number of instances the report covers.
    pub size: usize,
    pub exact: Option<ExactMatchReport>,
    pub tokens: Option<TokenReport>,
    pub order: Option<OrderReport>,
    pub sense: Option<SenseReport>,
}

impl EvalReport {
    pub fn from_sense(report: SenseReport) -> EvalReport {
        EvalReport {
            slice: None,
            size: report.instances,
            exact: None,
            tokens: None,
            order: None,
            sense: Some(report),
        }
    }

    /// Flatten every metric into `name -> value`, percentages on the 0–100
    /// scale — the cell format cross-validation aggregates over.
    pub fn flatten(&self) -> BTreeMap<String, f64> {
        let mut out = BTreeMap::new();
        out.insert("size".to_string(), self.size as f64);
        if let Some(e) = &self.exact {
            e.arg1.flatten_into("exact.arg1", &mut out);
            e.arg2.flatten_into("exact.arg2", &mut out);
        }
        if let Some(t) = &self.tokens {
            for (l, prf) in &t.per_label {
                prf.flatten_into(&format!("token.{l}"), &mut out);
            }
            out.insert("token.accuracy".to_string(), 100.0 * t.accuracy);
        }
        if let Some(o) = &self.order {
            o.arg1_first.flatten_into("order.arg1-first", &mut out);
            o.arg2_first.flatten_into("order.arg2-first", &mut out);
        }
        if let Some(s) = &self.sense {
            for (label, prf) in &s.per_sense {
                if prf.support > 0 {
                    prf.flatten_into(&format!("sense.{}", label.as_str()), &mut out);
                }
            }
            s.micro.flatten_into("sense.micro", &mut out);
            s.weighted.flatten_into("sense.weighted", &mut out);
        }
        out
    }

    /// Plain-text table rendering.
    pub fn render(&self) -> String {
        let mut out = String::new();
        if let Some(name) = &self.slice {
            out.push_str(&format!("slice: {name} ({} instances)\n", self.size));
        } else {
            out.push_str(&format!("{} instances\n", self.size));
        }
        let row = |out: &mut String, name: &str, p: &Prf| {
            out.push_str(&format!(
                "  {name:<38} P {:6.2}  R {:6.2}  F1 {:6.2}  support {}\n",
                100.0 * p.precision,
                100.0 * p.recall,
                100.0 * p.f1,
                p.support
            ));
        };
        if let Some(e) = &self.exact {
            out.push_str("exact match\n");
            row(&mut out, "Arg1", &e.arg1);
            row(&mut out, "Arg2", &e.arg2);
        }
        if let Some(t) = &self.tokens {
            out.push_str(&format!(
                "token labels (accuracy {:.2} over {} tokens)\n",
                100.0 * t.accuracy,
                t.tokens
            ));
            for (l, prf) in &t.per_label {
                row(&mut out, &l.to_string(), prf);
            }
        }
        if let Some(o) = &self.order {
            out.push_str("argument order\n");
            row(&mut out, "Arg1-Arg2", &o.arg1_first);
            row(&mut out, "Arg2-Arg1", &o.arg2_first);
        }
        if let Some(s) = &self.sense {
            out.push_str(&format!(
                "sense classification ({} instances)\n",
                s.instances
            ));
            for (label, prf) in &s.per_sense {
                if prf.support > 0 {
                    row(&mut out, label.as_str(), prf);
                }
            }
            row(&mut out, "micro", &s.micro);
            row(&mut out, "weighted", &s.weighted);
        }
        out
    }
}

/// Mean and sample standard deviation of one metric across folds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

/// Aggregate flattened fold reports: per metric cell, arithmetic mean and
/// sample (n−1) standard deviation. All folds must share the same key set.
pub fn crossval_aggregate(folds: &[BTreeMap<String, f64>]) -> Result<BTreeMap<String, MeanStd>> {
    if folds.len() < 2 {
        return Err(Error::validation(format!(
            "cross-validation aggregation needs at least 2 folds, got {}",
            folds.len()
        )));
    }
    let schema: Vec<&String> = folds[0].keys().collect();
    for (i, fold) in folds.iter().enumerate().skip(1) {
        if fold.len() != schema.len() || !schema.iter().all(|k| fold.contains_key(*k)) {
            let missing = schema
                .iter()
                .find(|k| !fold.contains_key(**k))
                .map(|k| (*k).clone())
                .or_else(|| fold.keys().find(|k| !folds[0].contains_key(*k)).cloned())
                .unwrap_or_default();
            return Err(Error::validation(format!(
                "fold {i} does not share the report schema (differs at {missing:?})"
            )));
        }
    }
    let n = folds.len() as f64;
    let mut out = BTreeMap::new();
    for key in schema {
        let values: Vec<f64> = folds.iter().map(|f| f[key]).collect();
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
        out.insert(
            key.clone(),
            MeanStd {
                mean,
                std: var.sqrt(),
            },
        );
    }
    Ok(out)
}

/// Render an aggregated cross-validation table as `metric  mean ± std`.
pub fn render_crossval(agg: &BTreeMap<String, MeanStd>) -> String {
    let mut out = String::new();
    for (k, v) in agg {
        out.push_str(&format!("  {k:<42} {:7.2} ± {:.2}\n", v.mean, v.std));
    }
    out
}
