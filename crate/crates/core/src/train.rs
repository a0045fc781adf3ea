//! Assembles training sets, fits the three VAD models, scores sentences and
//! evaluates the models on annotated texts.
//!
//! Features come either from the baseline hashing embedder or from a
//! precomputed embedding matrix looked up by id. With precomputed embeddings,
//! lexicon forms are looked up under the id `lex:<form>` and labeled texts
//! under their `text_id`.

use std::io::Write;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::corpus::SentenceRecord;
use crate::embeddings::{BaselineEmbedder, EmbeddingMatrix};
use crate::error::{Error, Result};
use crate::glm::{crossval_pearson, fit_binomial, holdout_pearson, CrossValResult, FittedGlm, FoldResult, GlmOptions, Labeled};
use crate::lexicon::{filter_labeled, LabeledFilter, LabeledText, VadLexicon};
use crate::vad::{Dimension, Vad};

/// Id prefix of lexicon forms inside a precomputed embedding matrix.
pub const LEXICON_ID_PREFIX: &str = "lex:";

pub fn lexicon_form_id(form: &str) -> String {
    format!("{LEXICON_ID_PREFIX}{form}")
}

pub enum FeatureSource<'a> {
    Baseline(BaselineEmbedder<'a>),
    Precomputed(&'a EmbeddingMatrix),
}

/// Feature lookup that caches the id index of a precomputed matrix.
pub struct Featurizer<'a> {
    source: FeatureSource<'a>,
    index: Option<std::collections::HashMap<&'a str, usize>>,
}

impl<'a> Featurizer<'a> {
    pub fn new(source: FeatureSource<'a>) -> Self {
        let index = match &source {
            FeatureSource::Precomputed(m) => Some(m.id_index()),
            FeatureSource::Baseline(_) => None,
        };
        Featurizer { source, index }
    }

    pub fn width(&self) -> usize {
        match &self.source {
            FeatureSource::Baseline(e) => e.width(),
            FeatureSource::Precomputed(m) => m.dim(),
        }
    }

    /// Feature row for one text.
    pub fn row(&self, id: &str, text: &str) -> Result<Vec<f64>> {
        match &self.source {
            FeatureSource::Baseline(e) => Ok(e.embed(text).into_iter().map(f64::from).collect()),
            FeatureSource::Precomputed(m) => {
                let i = self
                    .index
                    .as_ref()
                    .and_then(|ix| ix.get(id))
                    .ok_or_else(|| Error::InvalidInput(format!("no embedding for id {id:?}")))?;
                Ok(m.row(*i).iter().map(|&x| f64::from(x)).collect())
            }
        }
    }

    /// Stacks feature rows for `(id, text)` pairs in order.
    pub fn matrix(&self, items: &[(String, String)]) -> Result<DMatrix<f64>> {
        let rows: Vec<Vec<f64>> = items
            .par_iter()
            .map(|(id, text)| self.row(id, text))
            .collect::<Result<Vec<_>>>()?;
        let width = self.width();
        Ok(DMatrix::from_fn(rows.len(), width, |i, j| rows[i][j]))
    }
}

fn labeled_from(featurizer: &Featurizer, items: Vec<(String, String)>, y: Vec<f64>) -> Result<Labeled> {
    if items.is_empty() {
        return Labeled::new(DMatrix::zeros(0, featurizer.width()), y);
    }
    Labeled::new(featurizer.matrix(&items)?, y)
}

/// Lexicon forms (each scored as a one-word text) plus the filtered
/// auxiliary texts: the block that stays in every training set.
pub fn static_training_set(
    dim: Dimension,
    featurizer: &Featurizer,
    lexicon: Option<&VadLexicon>,
    auxiliary: &[LabeledText],
    filter: &LabeledFilter,
) -> Result<Labeled> {
    let mut items = Vec::new();
    let mut y = Vec::new();
    if let Some(lex) = lexicon {
        for (form, vad) in lex.form_scores() {
            items.push((lexicon_form_id(&form), form));
            y.push(vad.get(dim));
        }
    }
    for t in filter_labeled(auxiliary, dim, filter)? {
        items.push((t.text_id.clone(), t.text.clone()));
        y.push(t.gold(dim).expect("filtered texts carry a gold score"));
    }
    labeled_from(featurizer, items, y)
}

/// Annotated texts that carry a gold score on `dim`.
pub fn annotated_set(dim: Dimension, featurizer: &Featurizer, annotated: &[LabeledText]) -> Result<Labeled> {
    let (items, y): (Vec<_>, Vec<_>) = annotated
        .iter()
        .filter_map(|t| t.gold(dim).map(|g| ((t.text_id.clone(), t.text.clone()), g)))
        .unzip();
    labeled_from(featurizer, items, y)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub filter: LabeledFilter,
    pub glm: GlmOptions,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            filter: LabeledFilter::default(),
            glm: GlmOptions::default(),
        }
    }
}

/// Fits the V, A and D models on static data plus every annotated text.
pub fn train_models(
    featurizer: &Featurizer,
    lexicon: Option<&VadLexicon>,
    auxiliary: &[LabeledText],
    annotated: &[LabeledText],
    config: &TrainConfig,
) -> Result<[FittedGlm; 3]> {
    let fit = |dim: Dimension| -> Result<FittedGlm> {
        let data = static_training_set(dim, featurizer, lexicon, auxiliary, &config.filter)?
            .stack(&annotated_set(dim, featurizer, annotated)?)?;
        if data.is_empty() {
            return Err(Error::InsufficientData(format!("no training rows for {dim}")));
        }
        fit_binomial(dim, &data.x, &data.y, &config.glm)
    };
    Ok([fit(Dimension::Valence)?, fit(Dimension::Arousal)?, fit(Dimension::Dominance)?])
}

/// Predicts a VAD triple for every record, replacing any existing one.
pub fn score_records(records: &mut [SentenceRecord], models: &[FittedGlm; 3], featurizer: &Featurizer) -> Result<()> {
    for (k, m) in models.iter().enumerate() {
        if m.dimension != Dimension::ALL[k] {
            return Err(Error::InvalidInput(format!(
                "model {k} is for {} but {} was expected",
                m.dimension,
                Dimension::ALL[k]
            )));
        }
        if m.dim() != featurizer.width() {
            return Err(Error::DimensionMismatch { expected: m.dim(), actual: featurizer.width() });
        }
    }
    records.par_iter_mut().try_for_each(|rec| -> Result<()> {
        let row = featurizer.row(&rec.sentence_id, &rec.text)?;
        let v = models[0].predict_one(&row)?;
        let a = models[1].predict_one(&row)?;
        let d = models[2].predict_one(&row)?;
        rec.vad = Some(Vad::new(v, a, d)?);
        Ok(())
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalConfig {
    pub train_fraction: f64,
    pub folds: usize,
    pub seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            train_fraction: 0.7,
            folds: 5,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DimensionEval {
    pub dimension: Dimension,
    pub holdout: FoldResult,
    pub crossval: CrossValResult,
}

/// Train/test and k-fold Pearson r per dimension. Only annotated texts are
/// split; the static block joins every training set.
pub fn evaluate_models(
    featurizer: &Featurizer,
    lexicon: Option<&VadLexicon>,
    auxiliary: &[LabeledText],
    annotated: &[LabeledText],
    train: &TrainConfig,
    eval: &EvalConfig,
) -> Result<Vec<DimensionEval>> {
    Dimension::ALL
        .iter()
        .map(|&dim| {
            let fixed = static_training_set(dim, featurizer, lexicon, auxiliary, &train.filter)?;
            let data = annotated_set(dim, featurizer, annotated)?;
            let static_train = (!fixed.is_empty()).then_some(&fixed);
            Ok(DimensionEval {
                dimension: dim,
                holdout: holdout_pearson(dim, &data, eval.train_fraction, eval.seed, static_train, &train.glm)?,
                crossval: crossval_pearson(dim, &data, eval.folds, eval.seed, static_train, &train.glm)?,
            })
        })
        .collect()
}

/// Writes `dimension, split, fold, n, r`; undefined correlations are `NA`.
pub fn write_eval<W: Write>(mut w: W, results: &[DimensionEval]) -> Result<()> {
    let fmt_r = |r: Option<f64>| r.map(|x| x.to_string()).unwrap_or_else(|| "NA".to_string());
    writeln!(w, "dimension\tsplit\tfold\tn\tr")?;
    for res in results {
        let d = res.dimension;
        writeln!(w, "{d}\ttrain_test\t0\t{}\t{}", res.holdout.size, fmt_r(res.holdout.r))?;
        for f in &res.crossval.folds {
            writeln!(w, "{d}\tkfold\t{}\t{}\t{}", f.fold, f.size, fmt_r(f.r))?;
        }
        let total: usize = res.crossval.folds.iter().map(|f| f.size).sum();
        writeln!(w, "{d}\tkfold_mean\tall\t{total}\t{}", fmt_r(res.crossval.mean_r))?;
    }
    Ok(())
}
