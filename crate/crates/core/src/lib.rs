//! Intra-sentential implicit discourse relation parsing.
//!
//! The crate turns gold-annotated sentences into two supervised tasks and
//! solves both with small, fully hand-differentiated neural models:
//!
//! * **Argument identification** — BIO tagging of Arg1/Arg2 token spans with
//!   a BiLSTM encoder and a linear-chain CRF whose decoder is constrained to
//!   well-formed BIO sequences ([`tagger`], [`crf`], [`encoder`]).
//! * **Sense classification** — Level-2 sense prediction for an argument
//!   pair, from a marker-delimited token sequence ([`sense`]).
//!
//! [`corpus`] holds the data model (JSON-lines corpus, bracketed parses,
//! dataset generation, splits, and a synthetic fixture generator); [`eval`]
//! implements the exact-match / token / order / sense metrics and k-fold
//! aggregation; [`pipeline`] chains the two models into a sentence parser.
//!
//! All trainable weights live in a single flat `Vec<f64>` described by a
//! named-tensor [`nn::Layout`], which is what makes the exact-gradient
//! story practical: the optimizer, gradient clipping, finite-difference
//! checks, and checkpoints all operate on one slice.
//!
//! Training and inference are deterministic per seed. With the `parallel`
//! feature (on by default) batch work is distributed with rayon; results are
//! collected in input order and reduced sequentially, so parallel and
//! sequential runs produce bitwise-identical outputs.

pub mod checkpoint;
pub mod corpus;
pub mod crf;
pub mod encoder;
pub mod error;
pub mod eval;
pub mod labels;
pub mod nn;
pub mod par;
pub mod pipeline;
pub mod sense;
pub mod tagger;
pub mod training;

pub use error::{Error, Result};
pub use labels::{Label, Role, SenseLabel, TagSequence, NUM_LABELS, NUM_SENSES};
pub use par::Exec;
pub use training::{EpochLog, TrainConfig, TrainLog};
