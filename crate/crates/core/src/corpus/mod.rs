//! Corpus data model: gold-annotated sentences, JSON-lines I/O, dataset
//! generation, splits, summary statistics, and a synthetic fixture.
//!
//! The on-disk corpus is one JSON object per line:
//!
//! ```json
//! {"doc_id":"wsj_0618","sent_index":12,
//!  "tokens":["Father","McKenna","..."],
//!  "parse":"( (S ...) )",
//!  "relations":[{"arg1_spans":[[6,9]],"arg2_spans":[[10,15]],
//!                "sense":"Contingency.Purpose","provenance":"Implicit",
//!                "linked":false}]}
//! ```
//!
//! Spans are `[start, end)` token intervals. A relation whose argument needs
//! more than one span is *discontinuous*; relations annotated alongside an
//! explicit connective carry `linked = true` and are excluded from every
//! derived dataset.

mod dataset;
mod fixture;
mod split;
pub mod tree;

pub use dataset::{
    generate_d1, generate_d2, load_d1, load_d2, save_d1, save_d2, D1Example, D1Options, D2Example,
};
pub use fixture::{generate_fixture, Fixture, FixtureLedger, FixtureParams, PlantedRelation};
pub use split::{kfold, split_random, Fold, SplitUnit};
pub use tree::{Linearize, ParseTree};

use crate::error::{Error, Result};
use crate::labels::SenseLabel;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

/// Identity of a sentence within a corpus.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SentenceKey {
    pub doc_id: String,
    pub sent_index: usize,
}

impl fmt::Display for SentenceKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}#{}", self.doc_id, self.sent_index)
    }
}

/// Half-open token interval `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "[usize; 2]", into = "[usize; 2]")]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Span {
        Span { start, end }
    }

    pub fn len(&self) -> usize {
        self.end.saturating_sub(self.start)
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    pub fn contains(&self, i: usize) -> bool {
        self.start <= i && i < self.end
    }

    pub fn overlaps(&self, other: &Span) -> bool {
        self.start < other.end && other.start < self.end
    }
}

impl From<[usize; 2]> for Span {
    fn from(v: [usize; 2]) -> Span {
        Span {
            start: v[0],
            end: v[1],
        }
    }
}

impl From<Span> for [usize; 2] {
    fn from(s: Span) -> [usize; 2] {
        [s.start, s.end]
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {})", self.start, self.end)
    }
}

/// How a relation was annotated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Provenance {
    Implicit,
    AltLex,
}

/// One gold intra-sentential relation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GoldRelation {
    /// Token spans of Arg1, sorted, non-overlapping, non-empty.
    pub arg1_spans: Vec<Span>,
    /// Token spans of Arg2, same shape constraints.
    pub arg2_spans: Vec<Span>,
    pub sense: SenseLabel,
    pub provenance: Provenance,
    /// Annotated alongside an explicit relation; such relations are excluded
    /// from the tagging and sense datasets.
    #[serde(default)]
    pub linked: bool,
}

impl GoldRelation {
    /// Both arguments consist of a single span.
    pub fn is_continuous(&self) -> bool {
        self.arg1_spans.len() == 1 && self.arg2_spans.len() == 1
    }

    pub fn spans(&self, role: crate::labels::Role) -> &[Span] {
        match role {
            crate::labels::Role::Arg1 => &self.arg1_spans,
            crate::labels::Role::Arg2 => &self.arg2_spans,
        }
    }

    /// First token index covered by either argument.
    pub fn leftmost_start(&self) -> usize {
        self.arg1_spans
            .iter()
            .chain(&self.arg2_spans)
            .map(|s| s.start)
            .min()
            .unwrap_or(0)
    }

    /// Tokens of one argument, concatenated across its spans.
    pub fn argument_tokens(&self, role: crate::labels::Role, tokens: &[String]) -> Vec<String> {
        self.spans(role)
            .iter()
            .flat_map(|s| tokens[s.start..s.end].iter().cloned())
            .collect()
    }
}

/// One corpus sentence with its gold relations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnotatedSentence {
    pub doc_id: String,
    pub sent_index: usize,
    pub tokens: Vec<String>,
    /// Bracketed constituency parse; empty string when absent.
    #[serde(default)]
    pub parse: String,
    #[serde(default)]
    pub relations: Vec<GoldRelation>,
}

impl AnnotatedSentence {
    pub fn key(&self) -> SentenceKey {
        SentenceKey {
            doc_id: self.doc_id.clone(),
            sent_index: self.sent_index,
        }
    }

    pub fn has_parse(&self) -> bool {
        !self.parse.is_empty()
    }

    /// Relations eligible for dataset generation: everything not linked to an
    /// explicit relation (AltLex included).
    pub fn eligible_relations(&self) -> impl Iterator<Item = &GoldRelation> {
        self.relations.iter().filter(|r| !r.linked)
    }

    /// Check every documented invariant; returns a message naming the first
    /// violation.
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::validation(format!("sentence {}: {msg}", self.key())));
        if self.tokens.is_empty() {
            return fail("no tokens".into());
        }
        let n = self.tokens.len();
        for (ri, rel) in self.relations.iter().enumerate() {
            for (role, spans) in [("arg1", &rel.arg1_spans), ("arg2", &rel.arg2_spans)] {
                if spans.is_empty() {
                    return fail(format!("relation {ri}: {role} has no spans"));
                }
                for s in spans {
                    if s.is_empty() {
                        return fail(format!("relation {ri}: {role} span {s} is empty"));
                    }
                    if s.end > n {
                        return fail(format!(
                            "relation {ri}: {role} span {s} exceeds sentence length {n}"
                        ));
                    }
                }
                for w in spans.windows(2) {
                    if w[1].start < w[0].end {
                        return fail(format!(
                            "relation {ri}: {role} spans {} and {} out of order or overlapping",
                            w[0], w[1]
                        ));
                    }
                }
            }
            for a in &rel.arg1_spans {
                for b in &rel.arg2_spans {
                    if a.overlaps(b) {
                        return fail(format!(
                            "relation {ri}: arg1 span {a} overlaps arg2 span {b}"
                        ));
                    }
                }
            }
        }
        if self.has_parse() {
            let tree = ParseTree::parse(&self.parse)
                .map_err(|e| Error::validation(format!("sentence {}: {e}", self.key())))?;
            let count = tree.terminal_count();
            if count != n {
                return fail(format!(
                    "parse has {count} terminals but the sentence has {n} tokens"
                ));
            }
        }
        Ok(())
    }
}

/// Read a JSON-lines corpus, validating every sentence.
///
/// Blank lines are ignored. Errors carry the 1-based line number.
pub fn load_corpus(path: impl AsRef<Path>) -> Result<Vec<AnnotatedSentence>> {
    let file = File::open(path.as_ref())?;
    let reader = BufReader::new(file);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let sentence: AnnotatedSentence =
            serde_json::from_str(&line).map_err(|e| Error::CorpusParse {
                line: i + 1,
                message: e.to_string(),
            })?;
        sentence.validate().map_err(|e| Error::CorpusParse {
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(sentence);
    }
    Ok(out)
}

/// Write sentences as a JSON-lines corpus.
pub fn save_corpus(path: impl AsRef<Path>, corpus: &[AnnotatedSentence]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path.as_ref())?);
    for s in corpus {
        serde_json::to_writer(&mut w, s)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

/// Corpus summary: sentence counts by relation count and the sense
/// distribution over eligible (non-linked) relations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub total_sentences: usize,
    pub total_relations: usize,
    /// relation count per sentence -> number of sentences.
    pub sentences_by_relation_count: BTreeMap<usize, usize>,
    /// sense -> number of eligible relations.
    pub relations_by_sense: BTreeMap<SenseLabel, usize>,
    pub discontinuous_relations: usize,
    pub altlex_relations: usize,
    pub linked_relations_excluded: usize,
}

impl CorpusStats {
    pub fn percent_sentences(&self, relation_count: usize) -> f64 {
        if self.total_sentences == 0 {
            return 0.0;
        }
        let n = self
            .sentences_by_relation_count
            .get(&relation_count)
            .copied()
            .unwrap_or(0);
        100.0 * n as f64 / self.total_sentences as f64
    }

    pub fn percent_sense(&self, sense: SenseLabel) -> f64 {
        if self.total_relations == 0 {
            return 0.0;
        }
        let n = self.relations_by_sense.get(&sense).copied().unwrap_or(0);
        100.0 * n as f64 / self.total_relations as f64
    }

    /// Human-readable summary: sentences by relation count, then the sense
    /// distribution, in a fixed column layout.
    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str("Sentences by intra-sentential relation count\n");
        out.push_str("  relations   sentences        %\n");
        for (&k, &n) in &self.sentences_by_relation_count {
            out.push_str(&format!(
                "  {k:>9}   {n:>9}   {:>6.2}\n",
                self.percent_sentences(k)
            ));
        }
        out.push_str(&format!(
            "  {:>9}   {:>9}   100.00\n",
            "total", self.total_sentences
        ));
        out.push_str("\nSense distribution (eligible relations)\n");
        out.push_str(&format!("  {:<35} {:>6}        %\n", "sense", "count"));
        for (&sense, &n) in &self.relations_by_sense {
            out.push_str(&format!(
                "  {:<35} {n:>6}   {:>6.2}\n",
                sense.as_str(),
                self.percent_sense(sense)
            ));
        }
        out.push_str(&format!(
            "  {:<35} {:>6}   100.00\n",
            "total", self.total_relations
        ));
        out
    }
}

/// Count sentences by relation count and eligible relations by sense.
///
/// "Eligible" means not linked to an explicit relation; AltLex relations are
/// included, and discontinuous relations count like any other.
pub fn corpus_stats(corpus: &[AnnotatedSentence]) -> CorpusStats {
    let mut by_count: BTreeMap<usize, usize> = BTreeMap::new();
    let mut by_sense: BTreeMap<SenseLabel, usize> = BTreeMap::new();
    let mut total_relations = 0usize;
    let mut discontinuous = 0usize;
    let mut altlex = 0usize;
    let mut linked = 0usize;
    for s in corpus {
        let eligible: Vec<&GoldRelation> = s.eligible_relations().collect();
        *by_count.entry(eligible.len()).or_insert(0) += 1;
        linked += s.relations.len() - eligible.len();
        for r in eligible {
            total_relations += 1;
            *by_sense.entry(r.sense).or_insert(0) += 1;
            if !r.is_continuous() {
                discontinuous += 1;
            }
            if r.provenance == Provenance::AltLex {
                altlex += 1;
            }
        }
    }
    CorpusStats {
        total_sentences: corpus.len(),
        total_relations,
        sentences_by_relation_count: by_count,
        relations_by_sense: by_sense,
        discontinuous_relations: discontinuous,
        altlex_relations: altlex,
        linked_relations_excluded: linked,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::labels::Role;

    fn sentence(tokens: &[&str], relations: Vec<GoldRelation>) -> AnnotatedSentence {
        AnnotatedSentence {
            doc_id: "doc".into(),
            sent_index: 0,
            tokens: tokens.iter().map(|t| t.to_string()).collect(),
            parse: String::new(),
            relations,
        }
    }

    fn relation(a1: &[[usize; 2]], a2: &[[usize; 2]], sense: SenseLabel) -> GoldRelation {
        GoldRelation {
            arg1_spans: a1.iter().map(|&s| Span::from(s)).collect(),
            arg2_spans: a2.iter().map(|&s| Span::from(s)).collect(),
            sense,
            provenance: Provenance::Implicit,
            linked: false,
        }
    }

    #[test]
    fn corpus_line_round_trip() {
        let line = r#"{"doc_id":"wsj_0001","sent_index":3,"tokens":["a","b","c","d"],"parse":"","relations":[{"arg1_spans":[[0,2]],"arg2_spans":[[2,4]],"sense":"Contingency.Cause","provenance":"Implicit","linked":false}]}"#;
        let s: AnnotatedSentence = serde_json::from_str(line).unwrap();
        s.validate().unwrap();
        assert_eq!(s.relations[0].arg1_spans, vec![Span::new(0, 2)]);
        assert_eq!(s.relations[0].sense, SenseLabel::Cause);
        let back = serde_json::to_string(&s).unwrap();
        let again: AnnotatedSentence = serde_json::from_str(&back).unwrap();
        assert_eq!(s, again);
    }

    #[test]
    fn unknown_keys_and_senses_are_rejected() {
        let extra = r#"{"doc_id":"d","sent_index":0,"tokens":["a"],"parse":"","relations":[],"color":"red"}"#;
        assert!(serde_json::from_str::<AnnotatedSentence>(extra).is_err());
        let bad_sense = r#"{"doc_id":"d","sent_index":0,"tokens":["a","b"],"parse":"","relations":[{"arg1_spans":[[0,1]],"arg2_spans":[[1,2]],"sense":"Contingency.Banana","provenance":"Implicit","linked":false}]}"#;
        assert!(serde_json::from_str::<AnnotatedSentence>(bad_sense).is_err());
    }

    #[test]
    fn validation_catches_span_problems() {
        // span beyond sentence end
        let s = sentence(
            &["a", "b"],
            vec![relation(&[[0, 1]], &[[1, 3]], SenseLabel::Cause)],
        );
        assert!(s.validate().is_err());
        // overlapping roles
        let s = sentence(
            &["a", "b", "c"],
            vec![relation(&[[0, 2]], &[[1, 3]], SenseLabel::Cause)],
        );
        assert!(s.validate().is_err());
        // empty span
        let s = sentence(
            &["a", "b"],
            vec![relation(&[[1, 1]], &[[0, 1]], SenseLabel::Cause)],
        );
        assert!(s.validate().is_err());
        // unordered span list
        let s = sentence(
            &["a", "b", "c", "d", "e"],
            vec![relation(&[[3, 4], [0, 1]], &[[1, 2]], SenseLabel::Cause)],
        );
        assert!(s.validate().is_err());
        // and a good one
        let s = sentence(
            &["a", "b", "c", "d", "e"],
            vec![relation(&[[0, 1], [3, 4]], &[[1, 2]], SenseLabel::Cause)],
        );
        s.validate().unwrap();
    }

    #[test]
    fn validation_checks_parse_terminal_count() {
        let mut s = sentence(&["dog", "barks"], vec![]);
        s.parse = "(S (NP (NN dog)) (VP (VBZ barks)))".into();
        s.validate().unwrap();
        s.parse = "(S (NN dog))".into();
        assert!(s.validate().is_err());
    }

    #[test]
    fn load_reports_line_numbers() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("corpus.jsonl");
        std::fs::write(
            &path,
            concat!(
                r#"{"doc_id":"d","sent_index":0,"tokens":["a"],"parse":"","relations":[]}"#,
                "\n\n",
                r#"{"doc_id":"d","sent_index":1,"tokens":[],"parse":"","relations":[]}"#,
                "\n"
            ),
        )
        .unwrap();
        let err = load_corpus(&path).unwrap_err();
        match err {
            Error::CorpusParse { line, .. } => assert_eq!(line, 3),
            other => panic!("expected CorpusParse, got {other}"),
        }
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.jsonl");
        let corpus = vec![
            sentence(
                &["a", "b", "c"],
                vec![relation(&[[0, 1]], &[[1, 2]], SenseLabel::Purpose)],
            ),
            sentence(&["x"], vec![]),
        ];
        save_corpus(&path, &corpus).unwrap();
        let back = load_corpus(&path).unwrap();
        assert_eq!(corpus, back);
    }

    #[test]
    fn stats_count_eligible_relations_only() {
        let mut linked_rel = relation(&[[0, 1]], &[[1, 2]], SenseLabel::Contrast);
        linked_rel.linked = true;
        let mut altlex_rel = relation(&[[0, 1]], &[[1, 2]], SenseLabel::Cause);
        altlex_rel.provenance = Provenance::AltLex;
        let corpus = vec![
            sentence(&["a", "b"], vec![]),
            sentence(
                &["a", "b"],
                vec![relation(&[[0, 1]], &[[1, 2]], SenseLabel::Cause)],
            ),
            sentence(&["a", "b"], vec![altlex_rel, linked_rel]),
            sentence(
                &["a", "b", "c", "d", "e"],
                vec![
                    relation(&[[0, 1]], &[[1, 2]], SenseLabel::Purpose),
                    relation(&[[2, 3], [4, 5]], &[[3, 4]], SenseLabel::Conjunction),
                ],
            ),
        ];
        let stats = corpus_stats(&corpus);
        assert_eq!(stats.total_sentences, 4);
        assert_eq!(stats.total_relations, 4); // linked one excluded
        assert_eq!(stats.sentences_by_relation_count.get(&0), Some(&1));
        assert_eq!(stats.sentences_by_relation_count.get(&1), Some(&2));
        assert_eq!(stats.sentences_by_relation_count.get(&2), Some(&1));
        assert_eq!(stats.relations_by_sense.get(&SenseLabel::Cause), Some(&2));
        assert_eq!(stats.discontinuous_relations, 1);
        assert_eq!(stats.altlex_relations, 1);
        assert_eq!(stats.linked_relations_excluded, 1);
        assert!((stats.percent_sentences(0) - 25.0).abs() < 1e-12);
        assert!((stats.percent_sense(SenseLabel::Cause) - 50.0).abs() < 1e-12);
        let rendered = stats.render();
        assert!(rendered.contains("Contingency.Cause"));
        assert!(rendered.contains("total"));
    }

    #[test]
    fn argument_tokens_follow_span_order() {
        let s = sentence(
            &["a", "b", "c", "d", "e"],
            vec![relation(&[[0, 1], [3, 4]], &[[1, 2]], SenseLabel::Cause)],
        );
        let toks = s.relations[0].argument_tokens(Role::Arg1, &s.tokens);
        assert_eq!(toks, vec!["a".to_string(), "d".to_string()]);
    }
}
