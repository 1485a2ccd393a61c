//! The BIO tag set, argument roles, and the Level-2 sense inventory.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// Number of BIO labels.
pub const NUM_LABELS: usize = 5;

/// Number of Level-2 sense labels.
pub const NUM_SENSES: usize = 20;

/// Token-level BIO label over the two argument roles.
///
/// `O` is index 0 on purpose: ties in Viterbi decoding are broken toward the
/// lowest label index, so an all-zero score matrix decodes to all-`O`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    #[serde(rename = "O")]
    O,
    #[serde(rename = "B-Arg1")]
    BArg1,
    #[serde(rename = "I-Arg1")]
    IArg1,
    #[serde(rename = "B-Arg2")]
    BArg2,
    #[serde(rename = "I-Arg2")]
    IArg2,
}

/// Which argument a span fills.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Role {
    Arg1,
    Arg2,
}

impl Role {
    pub const ALL: [Role; 2] = [Role::Arg1, Role::Arg2];

    pub fn as_str(self) -> &'static str {
        match self {
            Role::Arg1 => "Arg1",
            Role::Arg2 => "Arg2",
        }
    }

    /// The `B-` label opening a span of this role.
    pub fn begin(self) -> Label {
        match self {
            Role::Arg1 => Label::BArg1,
            Role::Arg2 => Label::BArg2,
        }
    }

    /// The `I-` label continuing a span of this role.
    pub fn inside(self) -> Label {
        match self {
            Role::Arg1 => Label::IArg1,
            Role::Arg2 => Label::IArg2,
        }
    }
}

impl Label {
    pub const ALL: [Label; NUM_LABELS] = [
        Label::O,
        Label::BArg1,
        Label::IArg1,
        Label::BArg2,
        Label::IArg2,
    ];

    pub fn index(self) -> usize {
        match self {
            Label::O => 0,
            Label::BArg1 => 1,
            Label::IArg1 => 2,
            Label::BArg2 => 3,
            Label::IArg2 => 4,
        }
    }

    pub fn from_index(i: usize) -> Option<Label> {
        Label::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::O => "O",
            Label::BArg1 => "B-Arg1",
            Label::IArg1 => "I-Arg1",
            Label::BArg2 => "B-Arg2",
            Label::IArg2 => "I-Arg2",
        }
    }

    /// Role this label belongs to (`None` for `O`).
    pub fn role(self) -> Option<Role> {
        match self {
            Label::O => None,
            Label::BArg1 | Label::IArg1 => Some(Role::Arg1),
            Label::BArg2 | Label::IArg2 => Some(Role::Arg2),
        }
    }

    pub fn is_begin(self) -> bool {
        matches!(self, Label::BArg1 | Label::BArg2)
    }

    pub fn is_inside(self) -> bool {
        matches!(self, Label::IArg1 | Label::IArg2)
    }

    /// BIO well-formedness of a single transition: `I-X` may only follow
    /// `B-X` or `I-X` of the same role. Everything else is allowed.
    pub fn may_follow(self, prev: Label) -> bool {
        match self {
            Label::IArg1 => matches!(prev, Label::BArg1 | Label::IArg1),
            Label::IArg2 => matches!(prev, Label::BArg2 | Label::IArg2),
            _ => true,
        }
    }

    /// Whether a sequence may start with this label (`I-` labels may not).
    pub fn may_start(self) -> bool {
        !self.is_inside()
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Label> {
        Label::ALL
            .into_iter()
            .find(|l| l.as_str() == s)
            .ok_or_else(|| Error::validation(format!("unknown BIO label {s:?}")))
    }
}

/// A BIO-valid labeling of one sentence.
///
/// Validity (no `I-X` at the start, no `I-X` after a label of another role)
/// is enforced at construction, so every value of this type is well-formed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(transparent)]
pub struct TagSequence(Vec<Label>);

impl TagSequence {
    /// Wrap a label vector, rejecting BIO violations.
    pub fn new(labels: Vec<Label>) -> Result<TagSequence> {
        if let Some(pos) = Self::first_violation(&labels) {
            return Err(Error::validation(format!(
                "invalid BIO sequence: {} at position {pos} cannot follow {}",
                labels[pos],
                if pos == 0 {
                    "sequence start".to_string()
                } else {
                    labels[pos - 1].to_string()
                },
            )));
        }
        Ok(TagSequence(labels))
    }

    /// All-`O` sequence of length `n`.
    pub fn all_outside(n: usize) -> TagSequence {
        TagSequence(vec![Label::O; n])
    }

    fn first_violation(labels: &[Label]) -> Option<usize> {
        for (i, &l) in labels.iter().enumerate() {
            let ok = if i == 0 {
                l.may_start()
            } else {
                l.may_follow(labels[i - 1])
            };
            if !ok {
                return Some(i);
            }
        }
        None
    }

    pub fn is_valid(labels: &[Label]) -> bool {
        Self::first_violation(labels).is_none()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn labels(&self) -> &[Label] {
        &self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = Label> + '_ {
        self.0.iter().copied()
    }
}

impl std::ops::Index<usize> for TagSequence {
    type Output = Label;

    fn index(&self, i: usize) -> &Label {
        &self.0[i]
    }
}

impl<'de> Deserialize<'de> for TagSequence {
    fn deserialize<D>(deserializer: D) -> std::result::Result<TagSequence, D::Error>
    where
        D: serde::Deserializer<'de>,
    {
        let labels = Vec::<Label>::deserialize(deserializer)?;
        TagSequence::new(labels).map_err(serde::de::Error::custom)
    }
}

/// Level-2 sense of an implicit (or AltLex) discourse relation.
///
/// The twenty labels and their exact spellings are the closed inventory the
/// sense classifier predicts over; anything else is rejected at parse time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SenseLabel {
    #[serde(rename = "Comparison.Concession")]
    Concession,
    #[serde(rename = "Comparison.Concession+SpeechAct")]
    ConcessionSpeechAct,
    #[serde(rename = "Comparison.Contrast")]
    Contrast,
    #[serde(rename = "Comparison.Similarity")]
    Similarity,
    #[serde(rename = "Contingency.Cause")]
    Cause,
    #[serde(rename = "Contingency.Cause+Belief")]
    CauseBelief,
    #[serde(rename = "Contingency.Cause+SpeechAct")]
    CauseSpeechAct,
    #[serde(rename = "Contingency.Condition")]
    Condition,
    #[serde(rename = "Contingency.Condition+SpeechAct")]
    ConditionSpeechAct,
    #[serde(rename = "Contingency.Negative-condition")]
    NegativeCondition,
    #[serde(rename = "Contingency.Purpose")]
    Purpose,
    #[serde(rename = "Expansion.Conjunction")]
    Conjunction,
    #[serde(rename = "Expansion.Disjunction")]
    Disjunction,
    #[serde(rename = "Expansion.Equivalence")]
    Equivalence,
    #[serde(rename = "Expansion.Instantiation")]
    Instantiation,
    #[serde(rename = "Expansion.Level-of-detail")]
    LevelOfDetail,
    #[serde(rename = "Expansion.Manner")]
    Manner,
    #[serde(rename = "Expansion.Substitution")]
    Substitution,
    #[serde(rename = "Temporal.Asynchronous")]
    Asynchronous,
    #[serde(rename = "Temporal.Synchronous")]
    Synchronous,
}

impl SenseLabel {
    pub const ALL: [SenseLabel; NUM_SENSES] = [
        SenseLabel::Concession,
        SenseLabel::ConcessionSpeechAct,
        SenseLabel::Contrast,
        SenseLabel::Similarity,
        SenseLabel::Cause,
        SenseLabel::CauseBelief,
        SenseLabel::CauseSpeechAct,
        SenseLabel::Condition,
        SenseLabel::ConditionSpeechAct,
        SenseLabel::NegativeCondition,
        SenseLabel::Purpose,
        SenseLabel::Conjunction,
        SenseLabel::Disjunction,
        SenseLabel::Equivalence,
        SenseLabel::Instantiation,
        SenseLabel::LevelOfDetail,
        SenseLabel::Manner,
        SenseLabel::Substitution,
        SenseLabel::Asynchronous,
        SenseLabel::Synchronous,
    ];

    pub fn index(self) -> usize {
        Self::ALL
            .iter()
            .position(|&s| s == self)
            .expect("label in ALL")
    }

    pub fn from_index(i: usize) -> Option<SenseLabel> {
        Self::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SenseLabel::Concession => "Comparison.Concession",
            SenseLabel::ConcessionSpeechAct => "Comparison.Concession+SpeechAct",
            SenseLabel::Contrast => "Comparison.Contrast",
            SenseLabel::Similarity => "Comparison.Similarity",
            SenseLabel::Cause => "Contingency.Cause",
            SenseLabel::CauseBelief => "Contingency.Cause+Belief",
            SenseLabel::CauseSpeechAct => "Contingency.Cause+SpeechAct",
            SenseLabel::Condition => "Contingency.Condition",
            SenseLabel::ConditionSpeechAct => "Contingency.Condition+SpeechAct",
            SenseLabel::NegativeCondition => "Contingency.Negative-condition",
            SenseLabel::Purpose => "Contingency.Purpose",
            SenseLabel::Conjunction => "Expansion.Conjunction",
            SenseLabel::Disjunction => "Expansion.Disjunction",
            SenseLabel::Equivalence => "Expansion.Equivalence",
            SenseLabel::Instantiation => "Expansion.Instantiation",
            SenseLabel::LevelOfDetail => "Expansion.Level-of-detail",
            SenseLabel::Manner => "Expansion.Manner",
            SenseLabel::Substitution => "Expansion.Substitution",
            SenseLabel::Asynchronous => "Temporal.Asynchronous",
            SenseLabel::Synchronous => "Temporal.Synchronous",
        }
    }

    /// Top-level (Level-1) class prefix, e.g. `"Contingency"`.
    pub fn level1(self) -> &'static str {
        self.as_str().split('.').next().expect("dotted label")
    }
}

impl fmt::Display for SenseLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SenseLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<SenseLabel> {
        SenseLabel::ALL
            .into_iter()
            .find(|l| l.as_str() == s)
            .ok_or_else(|| Error::validation(format!("unknown sense label {s:?}")))
    }
}
