//! Linear-chain CRF over the five BIO labels.
//!
//! A labeling `y` of an `n`-token sentence scores
//!
//! ```text
//! score(y) = start[y_0] + sum_t emissions[t, y_t]
//!          + sum_t transitions[y_{t-1}, y_t] + end[y_{n-1}]
//! ```
//!
//! [`log_partition`] computes `log sum_y exp(score(y))` with the forward
//! algorithm (log-sum-exp at every step, so large scores don't overflow);
//! [`nll`] returns `log_partition - score(gold)` together with its exact
//! gradients, obtained from forward-backward marginals (expected feature
//! counts minus observed ones). [`viterbi_decode`] finds the best labeling
//! subject to a structural [`ConstraintMask`]; masked cells are replaced by
//! a large negative constant rather than true negative infinity so the
//! arithmetic never produces NaN.

use crate::error::Result;
use crate::labels::{Label, TagSequence, NUM_LABELS};
use crate::nn::{GradWriter, ParamVec};
use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

/// Score stand-in for "forbidden". Far below any reachable path score at
/// this crate's score magnitudes, yet finite, so masked additions stay NaN-free.
pub const MASKED_SCORE: f64 = -1.0e4;

/// Tensor names the CRF occupies inside a model's flat parameter vector.
pub const TRANS: &str = "crf.trans";
pub const START: &str = "crf.start";
pub const END: &str = "crf.end";

/// Borrowed CRF parameters: `transitions[a][b]` scores label `a` followed by
/// label `b`; `start`/`end` score the first/last label of a sequence.
#[derive(Clone, Copy)]
pub struct CrfView<'a> {
    pub transitions: ArrayView2<'a, f64>,
    pub start: ArrayView1<'a, f64>,
    pub end: ArrayView1<'a, f64>,
}

impl<'a> CrfView<'a> {
    pub fn from_params(params: &'a ParamVec) -> CrfView<'a> {
        CrfView {
            transitions: params.view2(TRANS),
            start: params.view1(START),
            end: params.view1(END),
        }
    }
}

/// Owned CRF parameters, for standalone use and tests.
#[derive(Debug, Clone, PartialEq)]
pub struct CrfParams {
    pub transitions: Array2<f64>,
    pub start: Array1<f64>,
    pub end: Array1<f64>,
}

impl CrfParams {
    pub fn zeros() -> CrfParams {
        CrfParams {
            transitions: Array2::zeros((NUM_LABELS, NUM_LABELS)),
            start: Array1::zeros(NUM_LABELS),
            end: Array1::zeros(NUM_LABELS),
        }
    }

    pub fn view(&self) -> CrfView<'_> {
        CrfView {
            transitions: self.transitions.view(),
            start: self.start.view(),
            end: self.end.view(),
        }
    }
}

/// Which labels may start a sequence, follow one another, and end one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConstraintMask {
    pub start: [bool; NUM_LABELS],
    pub transitions: [[bool; NUM_LABELS]; NUM_LABELS],
    pub end: [bool; NUM_LABELS],
}

impl ConstraintMask {
    /// Everything allowed.
    pub fn none() -> ConstraintMask {
        ConstraintMask {
            start: [true; NUM_LABELS],
            transitions: [[true; NUM_LABELS]; NUM_LABELS],
            end: [true; NUM_LABELS],
        }
    }

    /// A path through the mask exists for every admissible tag sequence and
    /// for no other.
    pub fn admits(&self, tags: &[Label]) -> bool {
        if tags.is_empty() {
            return false;
        }
        if !self.start[tags[0].index()] {
            return false;
        }
        for w in tags.windows(2) {
            if !self.transitions[w[0].index()][w[1].index()] {
                return false;
            }
        }
        self.end[tags[tags.len() - 1].index()]
    }
}

/// The BIO structural constraints: `I-X` can't open a sequence and can only
/// follow `B-X`/`I-X` of the same role. Any label may end a sequence.
pub fn bio_mask() -> ConstraintMask {
    let mut mask = ConstraintMask::none();
    for l in Label::ALL {
        mask.start[l.index()] = l.may_start();
        for next in Label::ALL {
            mask.transitions[l.index()][next.index()] = next.may_follow(l);
        }
    }
    mask
}

fn check_emissions(emissions: &ArrayView2<'_, f64>) -> Result<()> {
    if emissions.nrows() == 0 {
        return Err(crate::error::Error::validation("empty emission matrix"));
    }
    if emissions.ncols() != NUM_LABELS {
        return Err(crate::error::Error::validation(format!(
            "emission matrix has {} columns, expected {NUM_LABELS}",
            emissions.ncols()
        )));
    }
    Ok(())
}

/// Score one labeling under the CRF (no constraints applied).
pub fn score_sequence(crf: &CrfView<'_>, emissions: ArrayView2<'_, f64>, tags: &[Label]) -> f64 {
    assert_eq!(tags.len(), emissions.nrows(), "one tag per token");
    let mut score = crf.start[tags[0].index()] + emissions[[0, tags[0].index()]];
    for t in 1..tags.len() {
        score += crf.transitions[[tags[t - 1].index(), tags[t].index()]];
        score += emissions[[t, tags[t].index()]];
    }
    score + crf.end[tags[tags.len() - 1].index()]
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// `log sum over all label sequences of exp(score)`, by the forward
/// algorithm.
pub fn log_partition(crf: &CrfView<'_>, emissions: ArrayView2<'_, f64>) -> Result<f64> {
    check_emissions(&emissions)?;
    let n = emissions.nrows();
    let mut alpha = [0.0f64; NUM_LABELS];
    for y in 0..NUM_LABELS {
        alpha[y] = crf.start[y] + emissions[[0, y]];
    }
    let mut scratch = [0.0f64; NUM_LABELS];
    for t in 1..n {
        let mut next = [0.0f64; NUM_LABELS];
        for (y, slot) in next.iter_mut().enumerate() {
            for (prev, s) in scratch.iter_mut().enumerate() {
                *s = alpha[prev] + crf.transitions[[prev, y]];
            }
            *slot = log_sum_exp(&scratch) + emissions[[t, y]];
        }
        alpha = next;
    }
    for (y, a) in alpha.iter_mut().enumerate() {
        *a += crf.end[y];
    }
    Ok(log_sum_exp(&alpha))
}

/// Gradients of the negative log-likelihood w.r.t. every CRF input.
pub struct CrfGrads {
    pub d_emissions: Array2<f64>,
    pub d_transitions: Array2<f64>,
    pub d_start: Array1<f64>,
    pub d_end: Array1<f64>,
}

/// Negative log-likelihood of `gold` and its exact gradients.
///
/// The gradient of `logZ - score(gold)` w.r.t. each score entry is the
/// model's marginal probability of the corresponding event minus its
/// indicator under the gold labeling, so the heavy lifting is one
/// forward-backward pass.
pub fn nll(
    crf: &CrfView<'_>,
    emissions: ArrayView2<'_, f64>,
    gold: &TagSequence,
) -> Result<(f64, CrfGrads)> {
    check_emissions(&emissions)?;
    let n = emissions.nrows();
    assert_eq!(gold.len(), n, "one gold tag per token");
    let l = NUM_LABELS;

    // forward (alpha) and backward (beta) tables in log space
    let mut alpha = Array2::<f64>::zeros((n, l));
    for y in 0..l {
        alpha[[0, y]] = crf.start[y] + emissions[[0, y]];
    }
    let mut scratch = [0.0f64; NUM_LABELS];
    for t in 1..n {
        for y in 0..l {
            for (prev, s) in scratch.iter_mut().enumerate() {
                *s = alpha[[t - 1, prev]] + crf.transitions[[prev, y]];
            }
            alpha[[t, y]] = log_sum_exp(&scratch) + emissions[[t, y]];
        }
    }
    let mut beta = Array2::<f64>::zeros((n, l));
    for y in 0..l {
        beta[[n - 1, y]] = crf.end[y];
    }
    for t in (0..n - 1).rev() {
        for y in 0..l {
            for (next, s) in scratch.iter_mut().enumerate() {
                *s = crf.transitions[[y, next]] + emissions[[t + 1, next]] + beta[[t + 1, next]];
            }
            beta[[t, y]] = log_sum_exp(&scratch);
        }
    }
    let mut final_scores = [0.0f64; NUM_LABELS];
    for y in 0..l {
        final_scores[y] = alpha[[n - 1, y]] + crf.end[y];
    }
    let log_z = log_sum_exp(&final_scores);

    let gold_score = score_sequence(crf, emissions, gold.labels());
    let loss = log_z - gold_score;

    // expected counts minus observed counts
    let mut d_emissions = Array2::<f64>::zeros((n, l));
    let mut d_start = Array1::<f64>::zeros(l);
    let mut d_end = Array1::<f64>::zeros(l);
    let mut d_transitions = Array2::<f64>::zeros((l, l));

    for t in 0..n {
        for y in 0..l {
            let marginal = (alpha[[t, y]] + beta[[t, y]] - log_z).exp();
            d_emissions[[t, y]] = marginal;
            if t == 0 {
                d_start[y] = marginal;
            }
            if t == n - 1 {
                d_end[y] = marginal;
            }
        }
    }
    for t in 0..n - 1 {
        for a in 0..l {
            for b in 0..l {
                let p = (alpha[[t, a]]
                    + crf.transitions[[a, b]]
                    + emissions[[t + 1, b]]
                    + beta[[t + 1, b]]
                    - log_z)
                    .exp();
                d_transitions[[a, b]] += p;
            }
        }
    }

    d_emissions[[0, gold[0].index()]] -= 1.0;
    d_start[gold[0].index()] -= 1.0;
    d_end[gold[n - 1].index()] -= 1.0;
    for t in 1..n {
        d_emissions[[t, gold[t].index()]] -= 1.0;
        d_transitions[[gold[t - 1].index(), gold[t].index()]] -= 1.0;
    }

    Ok((
        loss,
        CrfGrads {
            d_emissions,
            d_transitions,
            d_start,
            d_end,
        },
    ))
}

/// Add CRF gradients into a sentence-gradient writer (tensor names
/// [`TRANS`], [`START`], [`END`]).
pub fn write_grads(grads: &CrfGrads, writer: &mut GradWriter<'_>) {
    let mut t = writer.view2_mut(TRANS);
    t += &grads.d_transitions;
    let mut s = writer.view1_mut(START);
    s += &grads.d_start;
    let mut e = writer.view1_mut(END);
    e += &grads.d_end;
}

/// Highest-scoring labeling subject to `mask`, with ties broken toward the
/// lowest label index (so all-equal scores decode to all-`O`).
///
/// Returns the tags and the masked path score. The result is guaranteed
/// admissible under `mask` as long as genuine path scores stay above
/// [`MASKED_SCORE`] territory, which holds for any realistic emission scale.
pub fn viterbi_decode(
    crf: &CrfView<'_>,
    emissions: ArrayView2<'_, f64>,
    mask: &ConstraintMask,
) -> Result<(TagSequence, f64)> {
    let (labels, score) = viterbi_path(crf, emissions, mask)?;
    let tags = TagSequence::new(labels)
        .expect("masked decode cannot produce an inadmissible sequence at sane score scales");
    Ok((tags, score))
}

/// The raw Viterbi path — like [`viterbi_decode`] but without wrapping the
/// result in a validity-checked [`TagSequence`], so it also serves masks
/// weaker than [`bio_mask`].
pub fn viterbi_path(
    crf: &CrfView<'_>,
    emissions: ArrayView2<'_, f64>,
    mask: &ConstraintMask,
) -> Result<(Vec<Label>, f64)> {
    check_emissions(&emissions)?;
    let n = emissions.nrows();
    let l = NUM_LABELS;

    let mut delta = Array2::<f64>::zeros((n, l));
    let mut back = Array2::<usize>::zeros((n, l));
    for y in 0..l {
        let s = if mask.start[y] {
            crf.start[y]
        } else {
            MASKED_SCORE
        };
        delta[[0, y]] = s + emissions[[0, y]];
    }
    for t in 1..n {
        for y in 0..l {
            let mut best_prev = 0usize;
            let mut best = f64::NEG_INFINITY;
            for prev in 0..l {
                let trans = if mask.transitions[prev][y] {
                    crf.transitions[[prev, y]]
                } else {
                    MASKED_SCORE
                };
                let cand = delta[[t - 1, prev]] + trans;
                // strict > keeps the lowest previous index on ties
                if cand > best {
                    best = cand;
                    best_prev = prev;
                }
            }
            delta[[t, y]] = best + emissions[[t, y]];
            back[[t, y]] = best_prev;
        }
    }

    let mut best_last = 0usize;
    let mut best_score = f64::NEG_INFINITY;
    for y in 0..l {
        let e = if mask.end[y] {
            crf.end[y]
        } else {
            MASKED_SCORE
        };
        let cand = delta[[n - 1, y]] + e;
        if cand > best_score {
            best_score = cand;
            best_last = y;
        }
    }

    let mut path = vec![0usize; n];
    path[n - 1] = best_last;
    for t in (1..n).rev() {
        path[t - 1] = back[[t, path[t]]];
    }
    let labels: Vec<Label> = path
        .into_iter()
        .map(|i| Label::from_index(i).expect("index < NUM_LABELS"))
        .collect();
    Ok((labels, best_score))
}
