//! Synthetic corpus with a known answer key.
//!
//! The generator plants relations with fully deterministic surface cues so a
//! small model can actually learn the task end to end:
//!
//! * Arg1 always opens with the token `alpha` and runs up to a comma.
//! * Arg2 opens with a marker word drawn from a fixed weighted inventory
//!   (`because`, `to`, `and`, ...), and the marker decides the sense.
//! * Relation groups are separated by `;`, sentences end with `.`, and any
//!   leading filler tokens are outside both arguments.
//!
//! Alongside the sentences the generator returns a [`FixtureLedger`] with
//! exact counts and the planted span/sense of every continuous relation, so
//! tests can verify dataset generation against ground truth instead of
//! against the generator's own output.

use super::{AnnotatedSentence, GoldRelation, Provenance, SentenceKey, Span};
use crate::error::{Error, Result};
use crate::labels::SenseLabel;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Marker inventory: surface token, the sense it encodes, and its draw
/// weight (out of 100). `because`/Cause is deliberately the most frequent so
/// a most-frequent-sense baseline has a well-defined answer.
const MARKERS: [(&str, SenseLabel, u32); 6] = [
    ("because", SenseLabel::Cause, 30),
    ("to", SenseLabel::Purpose, 25),
    ("and", SenseLabel::Conjunction, 15),
    ("namely", SenseLabel::LevelOfDetail, 15),
    ("then", SenseLabel::Asynchronous, 8),
    ("if", SenseLabel::Condition, 7),
];

const P_THREE_GIVEN_MULTI: f64 = 0.25;
const P_ALTLEX: f64 = 0.10;
const P_LINKED: f64 = 0.07;
const P_DISCONTINUOUS: f64 = 0.06;

/// Knobs for [`generate_fixture`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixtureParams {
    pub n_sentences: usize,
    /// Number of distinct filler tokens.
    pub vocab_size: usize,
    /// Probability that a sentence carries at least one relation.
    pub relation_rate: f64,
    /// Probability that a sentence carries two or more relations; must not
    /// exceed `relation_rate`.
    pub multi_relation_rate: f64,
}

impl Default for FixtureParams {
    fn default() -> FixtureParams {
        FixtureParams {
            n_sentences: 200,
            vocab_size: 50,
            relation_rate: 0.7,
            multi_relation_rate: 0.05,
        }
    }
}

impl FixtureParams {
    fn validate(&self) -> Result<()> {
        if self.n_sentences == 0 {
            return Err(Error::validation("fixture needs at least one sentence"));
        }
        if self.vocab_size < 2 {
            return Err(Error::validation("fixture vocab_size must be at least 2"));
        }
        if !(0.0..=1.0).contains(&self.relation_rate)
            || !(0.0..=1.0).contains(&self.multi_relation_rate)
        {
            return Err(Error::validation("fixture rates must lie in [0, 1]"));
        }
        if self.multi_relation_rate > self.relation_rate {
            return Err(Error::validation(
                "multi_relation_rate cannot exceed relation_rate",
            ));
        }
        Ok(())
    }
}

/// Ground truth for one planted continuous relation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlantedRelation {
    pub key: SentenceKey,
    /// Index into the sentence's `relations` vector.
    pub relation_index: usize,
    pub arg1: Span,
    pub arg2: Span,
    pub sense: SenseLabel,
}

/// Exact bookkeeping of what [`generate_fixture`] planted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureLedger {
    pub n_sentences: usize,
    /// eligible-relation count per sentence -> sentences.
    pub sentences_by_relation_count: BTreeMap<usize, usize>,
    /// Non-linked relations (continuous + discontinuous).
    pub eligible_relations: usize,
    pub discontinuous_relations: usize,
    pub altlex_relations: usize,
    pub linked_relations: usize,
    /// sense -> eligible relations carrying it.
    pub sense_counts: BTreeMap<SenseLabel, usize>,
    /// Tagging examples `generate_d1` must produce under default options.
    pub d1_examples: usize,
    /// Sense examples `generate_d2` must produce under default options.
    pub d2_examples: usize,
    /// Every continuous eligible relation with its exact spans.
    pub planted: Vec<PlantedRelation>,
}

/// A synthetic corpus plus its answer key.
#[derive(Debug, Clone)]
pub struct Fixture {
    pub sentences: Vec<AnnotatedSentence>,
    pub ledger: FixtureLedger,
}

fn draw_marker(rng: &mut ChaCha8Rng) -> (&'static str, SenseLabel) {
    let mut x = rng.random_range(0..100u32);
    for (m, s, w) in MARKERS {
        if x < w {
            return (m, s);
        }
        x -= w;
    }
    unreachable!("marker weights sum to 100")
}

/// Right-branching parse over the tokens: `(S (W t0) (S (W t1) ...))`.
fn right_branching_parse(tokens: &[String]) -> String {
    fn build(tokens: &[String]) -> String {
        let head = format!("(W {})", tokens[0]);
        if tokens.len() == 1 {
            format!("(S {head})")
        } else {
            format!("(S {head} {})", build(&tokens[1..]))
        }
    }
    build(tokens)
}

/// Generate a deterministic synthetic corpus.
pub fn generate_fixture(seed: u64, params: &FixtureParams) -> Result<Fixture> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let filler = |rng: &mut ChaCha8Rng| format!("w{:03}", rng.random_range(0..params.vocab_size));

    let mut sentences = Vec::with_capacity(params.n_sentences);
    let mut ledger = FixtureLedger {
        n_sentences: params.n_sentences,
        sentences_by_relation_count: BTreeMap::new(),
        eligible_relations: 0,
        discontinuous_relations: 0,
        altlex_relations: 0,
        linked_relations: 0,
        sense_counts: BTreeMap::new(),
        d1_examples: 0,
        d2_examples: 0,
        planted: Vec::new(),
    };

    for i in 0..params.n_sentences {
        let key = SentenceKey {
            doc_id: format!("fix{:04}", i / 20),
            sent_index: i % 20,
        };
        let u: f64 = rng.random();
        let n_rels = if u < params.multi_relation_rate {
            if rng.random::<f64>() < P_THREE_GIVEN_MULTI {
                3
            } else {
                2
            }
        } else if u < params.relation_rate {
            1
        } else {
            0
        };

        let mut tokens: Vec<String> = Vec::new();
        let mut relations: Vec<GoldRelation> = Vec::new();

        if n_rels == 0 {
            for _ in 0..rng.random_range(2..=5usize) {
                tokens.push(filler(&mut rng));
            }
        } else {
            for _ in 0..rng.random_range(0..=2usize) {
                tokens.push(filler(&mut rng));
            }
            for g in 0..n_rels {
                if g > 0 {
                    tokens.push(";".to_string());
                }
                let a1_start = tokens.len();
                tokens.push("alpha".to_string());
                let discontinuous = rng.random::<f64>() < P_DISCONTINUOUS;
                let arg1_spans = if discontinuous {
                    // alpha f | gap | f  ->  two spans around an O token
                    tokens.push(filler(&mut rng));
                    tokens.push(filler(&mut rng)); // the gap
                    tokens.push(filler(&mut rng));
                    vec![
                        Span::new(a1_start, a1_start + 2),
                        Span::new(a1_start + 3, a1_start + 4),
                    ]
                } else {
                    for _ in 0..rng.random_range(1..=3usize) {
                        tokens.push(filler(&mut rng));
                    }
                    vec![Span::new(a1_start, tokens.len())]
                };
                tokens.push(",".to_string());
                let a2_start = tokens.len();
                let (marker, sense) = draw_marker(&mut rng);
                tokens.push(marker.to_string());
                for _ in 0..rng.random_range(1..=3usize) {
                    tokens.push(filler(&mut rng));
                }
                let arg2 = Span::new(a2_start, tokens.len());
                let provenance = if rng.random::<f64>() < P_ALTLEX {
                    Provenance::AltLex
                } else {
                    Provenance::Implicit
                };

                ledger.eligible_relations += 1;
                *ledger.sense_counts.entry(sense).or_insert(0) += 1;
                if provenance == Provenance::AltLex {
                    ledger.altlex_relations += 1;
                }
                if discontinuous {
                    ledger.discontinuous_relations += 1;
                } else {
                    ledger.planted.push(PlantedRelation {
                        key: key.clone(),
                        relation_index: relations.len(),
                        arg1: arg1_spans[0],
                        arg2,
                        sense,
                    });
                }
                relations.push(GoldRelation {
                    arg1_spans,
                    arg2_spans: vec![arg2],
                    sense,
                    provenance,
                    linked: false,
                });
            }
            if rng.random::<f64>() < P_LINKED {
                // A relation that was annotated alongside an explicit
                // connective: same spans as the first group, excluded from
                // every derived dataset.
                let first = relations[0].clone();
                relations.push(GoldRelation {
                    arg1_spans: first.arg1_spans,
                    arg2_spans: first.arg2_spans,
                    sense: SenseLabel::Contrast,
                    provenance: Provenance::Implicit,
                    linked: true,
                });
                ledger.linked_relations += 1;
            }
        }
        tokens.push(".".to_string());

        let eligible = relations.iter().filter(|r| !r.linked).count();
        *ledger
            .sentences_by_relation_count
            .entry(eligible)
            .or_insert(0) += 1;
        let in_scope = relations
            .iter()
            .filter(|r| !r.linked && r.is_continuous())
            .count();
        ledger.d1_examples += in_scope.max(1);
        ledger.d2_examples += in_scope;

        let parse = right_branching_parse(&tokens);
        let sentence = AnnotatedSentence {
            doc_id: key.doc_id.clone(),
            sent_index: key.sent_index,
            tokens,
            parse,
            relations,
        };
        debug_assert!(sentence.validate().is_ok());
        sentences.push(sentence);
    }

    Ok(Fixture { sentences, ledger })
}
