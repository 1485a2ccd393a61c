//! End-to-end parsing: tag a sentence, extract argument spans, enumerate
//! candidate argument pairs, classify each pair's sense, and choose at most
//! one relation per sentence — plus the paired gold-vs-predicted-argument
//! evaluation protocol.
//!
//! Disambiguation follows the sense classifier's certainty (its maximum
//! probability). When every candidate pair receives the same predicted
//! sense, certainty carries no signal and the first pair by position is
//! returned with an explicit note. A most-frequent-sense baseline strategy
//! is provided for comparison.

use crate::corpus::{AnnotatedSentence, SentenceKey, Span};
use crate::error::{Error, Result};
use crate::eval::{sense_report, EvalReport};
use crate::labels::{Role, SenseLabel, TagSequence};
use crate::par::{map_ordered, Exec};
use crate::sense::{SenseDistribution, SenseModel};
use crate::tagger::{extract_spans, ArgumentSpan, TaggerModel};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

/// Upper bound on scored candidate pairs per sentence. With several spans of
/// both roles the cross-product can blow up on degenerate tag outputs; pairs
/// beyond this bound (in position order) are not scored.
pub const MAX_CANDIDATE_PAIRS: usize = 16;

/// Anything that turns a sentence into a BIO tag sequence.
pub trait ArgumentTagger: Sync {
    fn tag_sentence(&self, sentence: &AnnotatedSentence) -> Result<TagSequence>;
    /// Whether tagging consumes the constituency parse.
    fn uses_parse(&self) -> bool;
}

impl ArgumentTagger for TaggerModel {
    fn tag_sentence(&self, sentence: &AnnotatedSentence) -> Result<TagSequence> {
        self.tag(sentence)
    }

    fn uses_parse(&self) -> bool {
        self.config().parse_features
    }
}

/// Anything that scores an argument pair with a sense distribution.
pub trait SenseScorer: Sync {
    fn score_pair(
        &self,
        arg1: &[String],
        arg2: &[String],
        parse: &str,
    ) -> Result<SenseDistribution>;
    /// Whether scoring consumes the constituency parse.
    fn uses_parse(&self) -> bool;
}

impl SenseScorer for SenseModel {
    fn score_pair(
        &self,
        arg1: &[String],
        arg2: &[String],
        parse: &str,
    ) -> Result<SenseDistribution> {
        self.classify(arg1, arg2, parse)
    }

    fn uses_parse(&self) -> bool {
        self.config().parse_features
    }
}

/// How the returned relation was selected among the candidates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DisambiguationNote {
    /// Exactly one Arg1 and one Arg2 span — nothing to choose.
    Unique,
    /// Several candidates with differing predicted senses; the pair with the
    /// highest maximum probability won.
    ChosenByLikelihood,
    /// Every candidate received the same predicted sense, so certainty
    /// carries no signal; the first pair by position was returned.
    SkippedEqualSenses,
    /// Baseline rule: the pair predicted as the most frequent sense.
    BaselineMostFrequent,
}

impl fmt::Display for DisambiguationNote {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DisambiguationNote::Unique => "unique",
            DisambiguationNote::ChosenByLikelihood => "chosen_by_likelihood",
            DisambiguationNote::SkippedEqualSenses => "skipped_equal_senses",
            DisambiguationNote::BaselineMostFrequent => "baseline_most_frequent",
        })
    }
}

/// One parsed relation: two disjoint argument spans, the predicted sense,
/// its probability, and how the pair was selected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParsedRelation {
    pub arg1: ArgumentSpan,
    pub arg2: ArgumentSpan,
    pub sense: SenseLabel,
    pub probability: f64,
    pub disambiguation_note: DisambiguationNote,
}

/// A candidate argument pair with its sense distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredPair {
    pub arg1: Span,
    pub arg2: Span,
    pub distribution: SenseDistribution,
}

/// Candidate selection rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Disambiguation {
    /// Highest sense-classifier certainty, skipping all-equal-sense cases.
    Likelihood,
    /// Always the pair predicted as the most frequent sense
    /// (Contingency.Cause); first pair when no candidate is.
    MostFrequentBaseline,
}

/// All Arg1×Arg2 span pairs, ordered by leftmost span start then shortest
/// span (Arg1 key first), truncated to [`MAX_CANDIDATE_PAIRS`].
pub fn candidate_pairs(spans: &[ArgumentSpan]) -> Vec<(Span, Span)> {
    let arg1s: Vec<Span> = spans
        .iter()
        .filter(|s| s.role == Role::Arg1)
        .map(|s| s.span)
        .collect();
    let arg2s: Vec<Span> = spans
        .iter()
        .filter(|s| s.role == Role::Arg2)
        .map(|s| s.span)
        .collect();
    let mut pairs: Vec<(Span, Span)> = arg1s
        .iter()
        .flat_map(|&a1| arg2s.iter().map(move |&a2| (a1, a2)))
        .collect();
    pairs.sort_by_key(|&(a1, a2)| (a1.start, a1.len(), a2.start, a2.len()));
    pairs.truncate(MAX_CANDIDATE_PAIRS);
    pairs
}

/// Pick one pair by sense-classifier certainty. Returns the index into
/// `pairs` plus the note. A single candidate is `unique`; if every
/// candidate's predicted sense is the same, the first pair is returned with
/// `skipped_equal_senses`; otherwise the highest maximum probability wins,
/// ties broken toward the earlier pair.
pub fn disambiguate(pairs: &[ScoredPair]) -> (usize, DisambiguationNote) {
    assert!(
        !pairs.is_empty(),
        "disambiguate needs at least one candidate"
    );
    if pairs.len() == 1 {
        return (0, DisambiguationNote::Unique);
    }
    let first_sense = pairs[0].distribution.best().0;
    if pairs.iter().all(|p| p.distribution.best().0 == first_sense) {
        return (0, DisambiguationNote::SkippedEqualSenses);
    }
    let mut best = 0;
    for (i, p) in pairs.iter().enumerate().skip(1) {
        if p.distribution.max_prob() > pairs[best].distribution.max_prob() {
            best = i;
        }
    }
    (best, DisambiguationNote::ChosenByLikelihood)
}

/// Baseline selection: the first pair predicted as the most frequent sense
/// (Contingency.Cause), or the first pair overall when none is.
pub fn disambiguate_baseline(pairs: &[ScoredPair]) -> (usize, DisambiguationNote) {
    assert!(
        !pairs.is_empty(),
        "disambiguate needs at least one candidate"
    );
    if pairs.len() == 1 {
        return (0, DisambiguationNote::Unique);
    }
    let idx = pairs
        .iter()
        .position(|p| p.distribution.best().0 == SenseLabel::Cause)
        .unwrap_or(0);
    (idx, DisambiguationNote::BaselineMostFrequent)
}

/// Everything the pipeline derived from one sentence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentenceParse {
    pub key: SentenceKey,
    pub tags: TagSequence,
    /// Scored candidate pairs in selection order (argmax sense + certainty).
    pub candidates: Vec<CandidateRecord>,
    /// The chosen relation; `None` when tagging produced no Arg1/Arg2 pair.
    pub relation: Option<ParsedRelation>,
}

/// One candidate pair as recorded in pipeline output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateRecord {
    pub arg1: Span,
    pub arg2: Span,
    pub sense: SenseLabel,
    pub probability: f64,
}

fn check_feature_compat(tagger_parse: bool, scorer_parse: bool) -> Result<()> {
    if tagger_parse != scorer_parse {
        return Err(Error::config(format!(
            "tagger ({}) and sense model ({}) disagree on parse features",
            if tagger_parse {
                "with parse features"
            } else {
                "without parse features"
            },
            if scorer_parse { "with" } else { "without" },
        )));
    }
    Ok(())
}

/// Run the full pipeline on one sentence and keep the intermediate products.
pub fn analyze_sentence<T: ArgumentTagger + ?Sized, S: SenseScorer + ?Sized>(
    tagger: &T,
    scorer: &S,
    sentence: &AnnotatedSentence,
    strategy: Disambiguation,
) -> Result<SentenceParse> {
    check_feature_compat(tagger.uses_parse(), scorer.uses_parse())?;
    let tags = tagger.tag_sentence(sentence)?;
    let spans = extract_spans(&tags);
    let pairs = candidate_pairs(&spans);
    let mut scored = Vec::with_capacity(pairs.len());
    for (a1, a2) in pairs {
        let arg1_tokens = sentence.tokens[a1.start..a1.end].to_vec();
        let arg2_tokens = sentence.tokens[a2.start..a2.end].to_vec();
        let distribution = scorer.score_pair(&arg1_tokens, &arg2_tokens, &sentence.parse)?;
        scored.push(ScoredPair {
            arg1: a1,
            arg2: a2,
            distribution,
        });
    }
    let relation = if scored.is_empty() {
        None
    } else {
        let (idx, note) = match strategy {
            Disambiguation::Likelihood => disambiguate(&scored),
            Disambiguation::MostFrequentBaseline => disambiguate_baseline(&scored),
        };
        let chosen = &scored[idx];
        let (sense, probability) = chosen.distribution.best();
        Some(ParsedRelation {
            arg1: ArgumentSpan {
                role: Role::Arg1,
                span: chosen.arg1,
            },
            arg2: ArgumentSpan {
                role: Role::Arg2,
                span: chosen.arg2,
            },
            sense,
            probability,
            disambiguation_note: note,
        })
    };
    let candidates = scored
        .into_iter()
        .map(|p| {
            let (sense, probability) = p.distribution.best();
            CandidateRecord {
                arg1: p.arg1,
                arg2: p.arg2,
                sense,
                probability,
            }
        })
        .collect();
    Ok(SentenceParse {
        key: sentence.key(),
        tags,
        candidates,
        relation,
    })
}

/// Parse one sentence into zero or one relations (certainty-based
/// disambiguation). Sentences where tagging yields no Arg1 span or no Arg2
/// span produce an empty result.
pub fn parse_sentence<T: ArgumentTagger + ?Sized, S: SenseScorer + ?Sized>(
    tagger: &T,
    scorer: &S,
    sentence: &AnnotatedSentence,
) -> Result<Vec<ParsedRelation>> {
    Ok(
        analyze_sentence(tagger, scorer, sentence, Disambiguation::Likelihood)?
            .relation
            .into_iter()
            .collect(),
    )
}

/// Parse a whole corpus, one record per sentence, in input order.
pub fn parse_corpus<T: ArgumentTagger, S: SenseScorer>(
    tagger: &T,
    scorer: &S,
    sentences: &[AnnotatedSentence],
    strategy: Disambiguation,
    exec: Exec,
) -> Result<Vec<SentenceParse>> {
    map_ordered(exec, sentences, |s| {
        analyze_sentence(tagger, scorer, s, strategy)
    })
    .into_iter()
    .collect()
}

/// Write pipeline records as JSON lines.
pub fn save_parses(path: &Path, parses: &[SentenceParse]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for p in parses {
        serde_json::to_writer(&mut w, p)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

/// Read pipeline records back from JSON lines.
pub fn load_parses(path: &Path) -> Result<Vec<SentenceParse>> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line)
                .map_err(|e| Error::format(format!("{}:{}: {e}", path.display(), i + 1)))?,
        );
    }
    Ok(out)
}

/// The paired pipeline evaluation: sense classification scored once with
/// gold argument spans and once with pipeline-predicted spans, over exactly
/// the same sentences.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineEval {
    /// Sense report with gold argument spans as classifier input.
    pub gold_arguments: EvalReport,
    /// Sense report with pipeline-predicted argument spans as input.
    pub predicted_arguments: EvalReport,
    /// Sentences both reports cover.
    pub evaluated: usize,
    /// Sentences with a gold relation where tagging produced no argument
    /// pair; excluded from both reports.
    pub dropped: usize,
}

enum SentenceOutcome {
    /// No gold relation to evaluate against.
    NoGold,
    /// Gold relation present but the pipeline found no argument pair.
    Dropped,
    Kept {
        gold: SenseLabel,
        from_gold_args: SenseLabel,
        from_pred_args: SenseLabel,
    },
}

/// Evaluate the pipeline against a corpus: per sentence, the reference is
/// the leftmost gold relation (earliest argument start, ties toward earliest
/// Arg1 start). Sentences without a gold relation are skipped; sentences
/// where the pipeline finds no argument pair are dropped from BOTH reports,
/// so the two reports always cover identical sentence sets.
pub fn evaluate_pipeline<T: ArgumentTagger, S: SenseScorer>(
    tagger: &T,
    scorer: &S,
    sentences: &[AnnotatedSentence],
    exec: Exec,
) -> Result<PipelineEval> {
    let outcomes: Result<Vec<SentenceOutcome>> =
        map_ordered(exec, sentences, |sentence| -> Result<SentenceOutcome> {
            let reference = sentence
                .eligible_relations()
                .enumerate()
                .min_by_key(|(i, rel)| {
                    let arg1_start = rel
                        .spans(Role::Arg1)
                        .first()
                        .map(|s| s.start)
                        .unwrap_or(usize::MAX);
                    (rel.leftmost_start(), arg1_start, *i)
                })
                .map(|(_, rel)| rel);
            let Some(reference) = reference else {
                // still check config compatibility via a parse attempt below
                // only when a relation exists; relation-free sentences are
                // skipped outright
                return Ok(SentenceOutcome::NoGold);
            };
            let relations = parse_sentence(tagger, scorer, sentence)?;
            let Some(predicted) = relations.into_iter().next() else {
                return Ok(SentenceOutcome::Dropped);
            };
            let gold_arg1 = reference.argument_tokens(Role::Arg1, &sentence.tokens);
            let gold_arg2 = reference.argument_tokens(Role::Arg2, &sentence.tokens);
            let gold_dist = scorer.score_pair(&gold_arg1, &gold_arg2, &sentence.parse)?;
            Ok(SentenceOutcome::Kept {
                gold: reference.sense,
                from_gold_args: gold_dist.best().0,
                from_pred_args: predicted.sense,
            })
        })
        .into_iter()
        .collect();

    let mut gold = Vec::new();
    let mut from_gold = Vec::new();
    let mut from_pred = Vec::new();
    let mut dropped = 0usize;
    for outcome in outcomes? {
        match outcome {
            SentenceOutcome::NoGold => {}
            SentenceOutcome::Dropped => dropped += 1,
            SentenceOutcome::Kept {
                gold: g,
                from_gold_args,
                from_pred_args,
            } => {
                gold.push(g);
                from_gold.push(from_gold_args);
                from_pred.push(from_pred_args);
            }
        }
    }
    let evaluated = gold.len();
    Ok(PipelineEval {
        gold_arguments: EvalReport::from_sense(sense_report(&gold, &from_gold)?),
        predicted_arguments: EvalReport::from_sense(sense_report(&gold, &from_pred)?),
        evaluated,
        dropped,
    })
}
