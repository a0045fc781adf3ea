//! Run configuration resolved from flags, `POLAR_*` environment variables, an
//! optional TOML file and built-in defaults, in that order of precedence.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use polar_core::analysis::SessionRange;
use polar_core::glm::{GlmOptions, VarianceMode};
use polar_core::lexicon::LabeledFilter;
use polar_core::metrics::{Group, MetricsConfig, Thresholds};
use polar_core::stats::TTestVariant;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TTestArg {
    Pooled,
    Welch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VarianceArg {
    PerCommittee,
    Pooled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GroupArg {
    All,
    Government,
    Opposition,
}

/// Settings that may come from the command line, the environment or a config
/// file. Every field is optional here; [`Settings::resolve`] fills the gaps.
#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Settings {
    /// Score above which a sentence counts as high
    #[arg(long, global = true, env = "POLAR_HI")]
    pub hi: Option<f64>,
    /// Score below which a sentence counts as low
    #[arg(long, global = true, env = "POLAR_LO")]
    pub lo: Option<f64>,
    /// Significance level of the t-tests and trend tests
    #[arg(long, global = true, env = "POLAR_ALPHA")]
    pub alpha: Option<f64>,
    /// Committees with fewer sentences are dropped at ingestion
    #[arg(long, global = true, env = "POLAR_MIN_COMMITTEE_SENTENCES")]
    pub min_committee_sentences: Option<usize>,
    /// Smallest government or opposition group that yields a metrics record
    #[arg(long, global = true, env = "POLAR_MIN_GROUP_N")]
    pub min_group_n: Option<usize>,
    /// Two-sample t-test flavour
    #[arg(long, global = true, env = "POLAR_TTEST", value_enum)]
    pub ttest: Option<TTestArg>,
    /// Ridge penalty on the non-intercept GLM coefficients
    #[arg(long, global = true, env = "POLAR_RIDGE")]
    pub ridge: Option<f64>,
    /// IRLS convergence tolerance on the relative deviance change
    #[arg(long, global = true, env = "POLAR_TOL")]
    pub tol: Option<f64>,
    /// IRLS iteration cap
    #[arg(long, global = true, env = "POLAR_MAX_ITER")]
    pub max_iter: Option<usize>,
    /// Seed for tuple generation, data splits and feature hashing
    #[arg(long, global = true, env = "POLAR_SEED")]
    pub seed: Option<u64>,
    /// Inclusive session range, e.g. 15..24
    #[arg(long, global = true, env = "POLAR_SESSIONS")]
    pub sessions: Option<String>,
    /// Two-column TSV mapping raw committee names to canonical ones
    #[arg(long, global = true, env = "POLAR_ALIAS_MAP")]
    pub alias_map: Option<PathBuf>,
    /// Base path of precomputed embeddings (`<base>.f32` and `<base>.ids`)
    #[arg(long, global = true, env = "POLAR_EMBEDDINGS")]
    pub embeddings: Option<PathBuf>,
    /// Output directory
    #[arg(long, global = true, env = "POLAR_OUT")]
    pub out: Option<PathBuf>,
    /// Hash buckets of the baseline embedder
    #[arg(long, global = true, env = "POLAR_EMBED_DIM")]
    pub embed_dim: Option<usize>,
    /// Folds of the cross-validation
    #[arg(long, global = true, env = "POLAR_FOLDS")]
    pub folds: Option<usize>,
    /// Share of annotated texts used for training in the train/test split
    #[arg(long, global = true, env = "POLAR_TRAIN_FRACTION")]
    pub train_fraction: Option<f64>,
    /// Labeled texts need more tokens than this to enter training
    #[arg(long, global = true, env = "POLAR_MIN_TOKENS")]
    pub min_tokens: Option<usize>,
    /// Labeled texts need fewer tokens than this to enter training
    #[arg(long, global = true, env = "POLAR_MAX_TOKENS")]
    pub max_tokens: Option<usize>,
    /// Sentences listed per committee and dimension by `extremes`
    #[arg(long, global = true, env = "POLAR_EXTREMES_K")]
    pub extremes_k: Option<usize>,
    /// Items per best-worst tuple
    #[arg(long, global = true, env = "POLAR_TUPLE_SIZE")]
    pub tuple_size: Option<usize>,
    /// Residual variance behind each committee block of the OLS report
    #[arg(long, global = true, env = "POLAR_VARIANCE", value_enum)]
    pub variance: Option<VarianceArg>,
    /// Speaker group whose series `trends` tests
    #[arg(long, global = true, env = "POLAR_TREND_GROUP", value_enum)]
    pub trend_group: Option<GroupArg>,
}

/// Fully resolved configuration; serialized verbatim into every manifest.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub hi: f64,
    pub lo: f64,
    pub alpha: f64,
    pub min_committee_sentences: usize,
    pub min_group_n: usize,
    pub ttest: TTestArg,
    pub ridge: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
    pub sessions: String,
    pub alias_map: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub out: PathBuf,
    pub embed_dim: usize,
    pub folds: usize,
    pub train_fraction: f64,
    pub min_tokens: usize,
    pub max_tokens: usize,
    pub extremes_k: usize,
    pub tuple_size: usize,
    pub variance: VarianceArg,
    pub trend_group: GroupArg,
}

impl Default for RunConfig {
    fn default() -> Self {
        let glm = GlmOptions::default();
        let filter = LabeledFilter::default();
        RunConfig {
            hi: Thresholds::DEFAULT.hi,
            lo: Thresholds::DEFAULT.lo,
            alpha: 0.05,
            min_committee_sentences: 400_000,
            min_group_n: MetricsConfig::default().min_group_n,
            ttest: TTestArg::Pooled,
            ridge: glm.ridge,
            tol: glm.tol,
            max_iter: glm.max_iter,
            seed: 0,
            sessions: SessionRange::default().to_string(),
            alias_map: None,
            embeddings: None,
            out: PathBuf::from("out"),
            embed_dim: 256,
            folds: 5,
            train_fraction: 0.7,
            min_tokens: filter.min_tokens,
            max_tokens: filter.max_tokens,
            extremes_k: 20,
            tuple_size: polar_core::bws::DEFAULT_TUPLE_SIZE,
            variance: VarianceArg::PerCommittee,
            trend_group: GroupArg::All,
        }
    }
}

impl Settings {
    pub fn from_file(path: &Path) -> Result<Settings> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config file {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config file {}", path.display()))
    }

    /// Layers `self` (flags and environment) over `file` over the defaults.
    pub fn resolve(&self, file: &Settings) -> Result<RunConfig> {
        let d = RunConfig::default();
        macro_rules! pick {
            ($field:ident) => {
                self.$field.clone().or_else(|| file.$field.clone()).unwrap_or(d.$field)
            };
            ($field:ident, optional) => {
                self.$field.clone().or_else(|| file.$field.clone())
            };
        }
        let cfg = RunConfig {
            hi: pick!(hi),
            lo: pick!(lo),
            alpha: pick!(alpha),
            min_committee_sentences: pick!(min_committee_sentences),
            min_group_n: pick!(min_group_n),
            ttest: pick!(ttest),
            ridge: pick!(ridge),
            tol: pick!(tol),
            max_iter: pick!(max_iter),
            seed: pick!(seed),
            sessions: pick!(sessions),
            alias_map: pick!(alias_map, optional),
            embeddings: pick!(embeddings, optional),
            out: pick!(out),
            embed_dim: pick!(embed_dim),
            folds: pick!(folds),
            train_fraction: pick!(train_fraction),
            min_tokens: pick!(min_tokens),
            max_tokens: pick!(max_tokens),
            extremes_k: pick!(extremes_k),
            tuple_size: pick!(tuple_size),
            variance: pick!(variance),
            trend_group: pick!(trend_group),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

impl RunConfig {
    fn validate(&self) -> Result<()> {
        self.thresholds()?;
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            bail!("alpha must lie in (0, 1), got {}", self.alpha);
        }
        self.session_range()?;
        if self.folds < 2 {
            bail!("folds must be at least 2, got {}", self.folds);
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            bail!("train fraction must lie in (0, 1), got {}", self.train_fraction);
        }
        if !(self.ridge >= 0.0 && self.tol > 0.0 && self.max_iter > 0) {
            bail!("GLM options need ridge >= 0, tol > 0 and max_iter > 0");
        }
        Ok(())
    }

    pub fn thresholds(&self) -> Result<Thresholds> {
        Ok(Thresholds::new(self.hi, self.lo)?)
    }

    pub fn session_range(&self) -> Result<SessionRange> {
        Ok(self.sessions.parse()?)
    }

    pub fn glm(&self) -> GlmOptions {
        GlmOptions { ridge: self.ridge, tol: self.tol, max_iter: self.max_iter }
    }

    pub fn labeled_filter(&self) -> LabeledFilter {
        LabeledFilter { hi: self.hi, lo: self.lo, min_tokens: self.min_tokens, max_tokens: self.max_tokens }
    }

    pub fn metrics(&self) -> Result<MetricsConfig> {
        Ok(MetricsConfig {
            thresholds: self.thresholds()?,
            min_group_n: self.min_group_n,
            ..MetricsConfig::default()
        })
    }

    pub fn ttest_variant(&self) -> TTestVariant {
        match self.ttest {
            TTestArg::Pooled => TTestVariant::Pooled,
            TTestArg::Welch => TTestVariant::Welch,
        }
    }

    pub fn variance_mode(&self) -> VarianceMode {
        match self.variance {
            VarianceArg::PerCommittee => VarianceMode::PerCommittee,
            VarianceArg::Pooled => VarianceMode::Pooled,
        }
    }

    pub fn trend_group(&self) -> Group {
        match self.trend_group {
            GroupArg::All => Group::All,
            GroupArg::Government => Group::Government,
            GroupArg::Opposition => Group::Opposition,
        }
    }
}
