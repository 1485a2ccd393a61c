//! The run configuration file: one TOML document covering data paths, the
//! encoder, training, splitting, and generation settings for every
//! subcommand. Unknown keys are rejected, and each run writes the effective
//! configuration (after command-line overrides) next to its outputs.

use anyhow::{Context, Result};
use intrasent::corpus::{D1Options, FixtureParams, SplitUnit};
use intrasent::encoder::EncoderMode;
use intrasent::sense::SenseConfig;
use intrasent::tagger::TaggerConfig;
use intrasent::{Error, Exec, TrainConfig};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub paths: Paths,
    pub encoder: Encoder,
    pub train: Train,
    pub split: Split,
    pub dataset: Dataset,
    pub pipeline: Pipeline,
    pub fixture: Fixture,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Paths {
    /// Corpus of annotated sentences (JSON lines).
    pub corpus: Option<PathBuf>,
    /// Word-vector file, `token v1 v2 …` per line (pretrained-vectors mode).
    pub vectors: Option<PathBuf>,
    /// Per-sentence token-vector file, JSON lines (contextual-file mode).
    pub contextual: Option<PathBuf>,
    /// Output directory; `--out` overrides it.
    pub out: PathBuf,
}

impl Default for Paths {
    fn default() -> Paths {
        Paths {
            corpus: None,
            vectors: None,
            contextual: None,
            out: PathBuf::from("out"),
        }
    }
}

/// Encoder mode as spelled in configuration files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    #[default]
    Scratch,
    PretrainedVectors,
    /// Frozen per-sentence vectors from `paths.contextual`.
    #[serde(alias = "contextual")]
    ContextualFile,
}

impl Mode {
    pub fn core(self) -> EncoderMode {
        match self {
            Mode::Scratch => EncoderMode::Scratch,
            Mode::PretrainedVectors => EncoderMode::PretrainedVectors,
            Mode::ContextualFile => EncoderMode::Contextual,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Encoder {
    pub mode: Mode,
    pub parse_features: bool,
    pub emb_dim: usize,
    pub hidden: usize,
    pub parse_emb_dim: usize,
    pub parse_hidden: usize,
    pub vocab_cap: usize,
    pub train_embeddings: bool,
    pub init_seed: u64,
}

impl Default for Encoder {
    fn default() -> Encoder {
        let d = TaggerConfig::default();
        Encoder {
            mode: Mode::Scratch,
            parse_features: d.parse_features,
            emb_dim: d.emb_dim,
            hidden: d.hidden,
            parse_emb_dim: d.parse_emb_dim,
            parse_hidden: d.parse_hidden,
            vocab_cap: d.vocab_cap,
            train_embeddings: d.train_embeddings,
            init_seed: d.init_seed,
        }
    }
}

impl Encoder {
    pub fn tagger_config(&self) -> TaggerConfig {
        TaggerConfig {
            mode: self.mode.core(),
            emb_dim: self.emb_dim,
            hidden: self.hidden,
            parse_features: self.parse_features,
            parse_emb_dim: self.parse_emb_dim,
            parse_hidden: self.parse_hidden,
            vocab_cap: self.vocab_cap,
            train_embeddings: self.train_embeddings,
            init_seed: self.init_seed,
        }
    }

    pub fn sense_config(&self) -> SenseConfig {
        SenseConfig {
            mode: self.mode.core(),
            emb_dim: self.emb_dim,
            hidden: self.hidden,
            parse_features: self.parse_features,
            parse_emb_dim: self.parse_emb_dim,
            parse_hidden: self.parse_hidden,
            vocab_cap: self.vocab_cap,
            train_embeddings: self.train_embeddings,
            init_seed: self.init_seed,
        }
    }
}

/// Optimizer settings. Every field is optional; absent fields take the
/// task's defaults (clip norm 1.0 for tagging, 0.5 for sense
/// classification; everything else is shared).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Train {
    pub learning_rate: Option<f64>,
    pub batch_size: Option<usize>,
    pub max_grad_norm: Option<f64>,
    pub beta1: Option<f64>,
    pub beta2: Option<f64>,
    pub epsilon: Option<f64>,
    pub patience: Option<usize>,
    pub max_epochs: Option<usize>,
    pub seed: Option<u64>,
    /// Distribute batch work across threads; sequential runs produce the
    /// same bytes either way.
    pub parallel: bool,
}

impl Default for Train {
    fn default() -> Train {
        Train {
            learning_rate: None,
            batch_size: None,
            max_grad_norm: None,
            beta1: None,
            beta2: None,
            epsilon: None,
            patience: None,
            max_epochs: None,
            seed: None,
            parallel: true,
        }
    }
}

impl Train {
    pub fn train_config(&self, base: TrainConfig) -> TrainConfig {
        TrainConfig {
            learning_rate: self.learning_rate.unwrap_or(base.learning_rate),
            batch_size: self.batch_size.unwrap_or(base.batch_size),
            max_grad_norm: self.max_grad_norm.unwrap_or(base.max_grad_norm),
            beta1: self.beta1.unwrap_or(base.beta1),
            beta2: self.beta2.unwrap_or(base.beta2),
            epsilon: self.epsilon.unwrap_or(base.epsilon),
            patience: self.patience.unwrap_or(base.patience),
            max_epochs: self.max_epochs.unwrap_or(base.max_epochs),
            seed: self.seed.unwrap_or(base.seed),
            exec: self.exec(),
        }
    }

    pub fn exec(&self) -> Exec {
        if self.parallel {
            Exec::Parallel
        } else {
            Exec::Sequential
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Split {
    /// `random-60-20-20` (any percentages summing to 100) or `kfold-10`
    /// (any count from 3 up).
    pub mode: String,
    pub unit: SplitUnit,
    pub seed: u64,
}

impl Default for Split {
    fn default() -> Split {
        Split {
            mode: "random-60-20-20".to_string(),
            unit: SplitUnit::Sentence,
            seed: 0,
        }
    }
}

/// Parsed form of [`Split::mode`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SplitMode {
    Random { ratios: (f64, f64, f64) },
    KFold { k: usize },
}

impl Split {
    pub fn parse_mode(&self) -> Result<SplitMode> {
        let parts: Vec<&str> = self.mode.split('-').collect();
        let bad = || {
            Error::Config(format!(
                "split mode {:?} is neither random-<train>-<dev>-<test> nor kfold-<k>",
                self.mode
            ))
        };
        match parts.as_slice() {
            ["random", tr, dv, te] => {
                let pct = |s: &str| s.parse::<u32>().map_err(|_| bad());
                let (tr, dv, te) = (pct(tr)?, pct(dv)?, pct(te)?);
                if tr + dv + te != 100 {
                    return Err(Error::Config(format!(
                        "split percentages {tr}-{dv}-{te} must sum to 100"
                    ))
                    .into());
                }
                Ok(SplitMode::Random {
                    ratios: (tr as f64 / 100.0, dv as f64 / 100.0, te as f64 / 100.0),
                })
            }
            ["kfold", k] => {
                let k = k.parse::<usize>().map_err(|_| bad())?;
                Ok(SplitMode::KFold { k })
            }
            _ => Err(bad().into()),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Dataset {
    pub skip_discontinuous: bool,
}

impl Default for Dataset {
    fn default() -> Dataset {
        Dataset {
            skip_discontinuous: D1Options::default().skip_discontinuous,
        }
    }
}

impl Dataset {
    pub fn d1_options(&self) -> D1Options {
        D1Options {
            skip_discontinuous: self.skip_discontinuous,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum DisambiguationMode {
    #[default]
    Likelihood,
    MostFrequentBaseline,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Pipeline {
    pub disambiguation: DisambiguationMode,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Fixture {
    pub n_sentences: usize,
    pub vocab_size: usize,
    pub relation_rate: f64,
    pub multi_relation_rate: f64,
    pub seed: u64,
}

impl Default for Fixture {
    fn default() -> Fixture {
        let d = FixtureParams::default();
        Fixture {
            n_sentences: d.n_sentences,
            vocab_size: d.vocab_size,
            relation_rate: d.relation_rate,
            multi_relation_rate: d.multi_relation_rate,
            seed: 0,
        }
    }
}

impl Fixture {
    pub fn params(&self) -> FixtureParams {
        FixtureParams {
            n_sentences: self.n_sentences,
            vocab_size: self.vocab_size,
            relation_rate: self.relation_rate,
            multi_relation_rate: self.multi_relation_rate,
        }
    }
}

impl RunConfig {
    /// Load a TOML file and apply command-line overrides: `--seed` replaces
    /// every seed in the file, `--out` replaces the output directory.
    pub fn load(path: &Path, seed: Option<u64>, out: Option<&Path>) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(Error::Io)
            .with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg: RunConfig = toml::from_str(&text)
            .map_err(|e| Error::Config(e.to_string()))
            .with_context(|| format!("parsing config {}", path.display()))?;
        if let Some(seed) = seed {
            cfg.encoder.init_seed = seed;
            cfg.train.seed = Some(seed);
            cfg.split.seed = seed;
            cfg.fixture.seed = seed;
        }
        if let Some(out) = out {
            cfg.paths.out = out.to_path_buf();
        }
        Ok(cfg)
    }

    /// The corpus path, required by every subcommand except `fixture`.
    pub fn corpus_path(&self) -> Result<&Path> {
        self.paths
            .corpus
            .as_deref()
            .ok_or_else(|| Error::Config("config sets no paths.corpus".to_string()).into())
    }

    /// Create the output directory and write the effective configuration
    /// into it.
    pub fn write_echo(&self) -> Result<()> {
        std::fs::create_dir_all(&self.paths.out)
            .map_err(Error::Io)
            .with_context(|| format!("creating {}", self.paths.out.display()))?;
        let text = toml::to_string_pretty(self)
            .map_err(|e| Error::Format(format!("serializing config echo: {e}")))?;
        std::fs::write(self.paths.out.join("config.echo.toml"), text).map_err(Error::Io)?;
        Ok(())
    }

    pub fn out_file(&self, name: &str) -> PathBuf {
        self.paths.out.join(name)
    }
}
