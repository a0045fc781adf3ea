//! Held-out Pearson evaluation of the binomial models.
//!
//! A static training block (lexicon forms, filtered auxiliary sentences) joins
//! every training fold and is never evaluated; only the annotated rows are
//! split.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::glm::binomial::{fit_binomial, predict_binomial, GlmOptions};
use crate::stats::{pearson, Correlation};
use crate::vad::Dimension;

/// Feature rows with their gold targets.
#[derive(Debug, Clone, PartialEq)]
pub struct Labeled {
    pub x: DMatrix<f64>,
    pub y: Vec<f64>,
}

impl Labeled {
    pub fn new(x: DMatrix<f64>, y: Vec<f64>) -> Result<Self> {
        if x.nrows() != y.len() {
            return Err(Error::DimensionMismatch { expected: x.nrows(), actual: y.len() });
        }
        Ok(Labeled { x, y })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn select(&self, rows: &[usize]) -> Labeled {
        Labeled {
            x: self.x.select_rows(rows),
            y: rows.iter().map(|&i| self.y[i]).collect(),
        }
    }

    /// Stacks `self` on top of `other`.
    pub fn stack(&self, other: &Labeled) -> Result<Labeled> {
        if self.is_empty() {
            return Ok(other.clone());
        }
        if other.is_empty() {
            return Ok(self.clone());
        }
        if self.x.ncols() != other.x.ncols() {
            return Err(Error::DimensionMismatch { expected: self.x.ncols(), actual: other.x.ncols() });
        }
        let mut x = DMatrix::zeros(self.len() + other.len(), self.x.ncols());
        x.rows_mut(0, self.len()).copy_from(&self.x);
        x.rows_mut(self.len(), other.len()).copy_from(&other.x);
        let mut y = self.y.clone();
        y.extend(&other.y);
        Ok(Labeled { x, y })
    }
}

/// Fold id per row: a seeded permutation cut into `k` contiguous runs whose
/// sizes differ by at most one.
pub fn assign_folds(n: usize, k: usize, seed: u64) -> Result<Vec<usize>> {
    if k < 2 {
        return Err(Error::InvalidInput(format!("k must be at least 2, got {k}")));
    }
    if n < k {
        return Err(Error::InsufficientData(format!("{n} rows cannot fill {k} folds")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut folds = vec![0; n];
    let (base, extra) = (n / k, n % k);
    let mut pos = 0;
    for f in 0..k {
        let size = base + usize::from(f < extra);
        for &row in &order[pos..pos + size] {
            folds[row] = f;
        }
        pos += size;
    }
    Ok(folds)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FoldResult {
    pub fold: usize,
    pub size: usize,
    /// `None` when predictions or gold are constant within the fold.
    pub r: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossValResult {
    pub folds: Vec<FoldResult>,
    /// Mean over folds with a defined r.
    pub mean_r: Option<f64>,
}

fn held_out_r(
    dimension: Dimension,
    train: &Labeled,
    eval: &Labeled,
    opts: &GlmOptions,
) -> Result<Option<f64>> {
    let model = fit_binomial(dimension, &train.x, &train.y, opts)?;
    let pred = predict_binomial(&model, &eval.x)?;
    Ok(match pearson(&pred, &eval.y)? {
        Correlation::Defined { r, .. } => Some(r),
        Correlation::ZeroVariance => None,
    })
}

/// k-fold Pearson evaluation on `data`, with `static_train` in every training set.
pub fn crossval_pearson(
    dimension: Dimension,
    data: &Labeled,
    k: usize,
    seed: u64,
    static_train: Option<&Labeled>,
    opts: &GlmOptions,
) -> Result<CrossValResult> {
    let folds = assign_folds(data.len(), k, seed)?;
    if data.len() / k < 3 {
        return Err(Error::InsufficientData(format!(
            "{} rows give fewer than 3 evaluation rows per fold at k = {k}",
            data.len()
        )));
    }
    let mut results = Vec::with_capacity(k);
    for f in 0..k {
        let eval_rows: Vec<usize> = (0..data.len()).filter(|&i| folds[i] == f).collect();
        let train_rows: Vec<usize> = (0..data.len()).filter(|&i| folds[i] != f).collect();
        let mut train = data.select(&train_rows);
        if let Some(s) = static_train {
            train = s.stack(&train)?;
        }
        let eval = data.select(&eval_rows);
        let r = held_out_r(dimension, &train, &eval, opts)?;
        results.push(FoldResult { fold: f, size: eval_rows.len(), r });
    }
    Ok(CrossValResult {
        mean_r: mean_defined(results.iter().map(|f| f.r)),
        folds: results,
    })
}

/// Single seeded train/test split; `train_fraction` of `data` joins `static_train`.
pub fn holdout_pearson(
    dimension: Dimension,
    data: &Labeled,
    train_fraction: f64,
    seed: u64,
    static_train: Option<&Labeled>,
    opts: &GlmOptions,
) -> Result<FoldResult> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidInput(format!("train fraction {train_fraction} outside (0, 1)")));
    }
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = (data.len() as f64 * train_fraction).round() as usize;
    let (train_rows, eval_rows) = order.split_at(n_train);
    if eval_rows.len() < 3 {
        return Err(Error::InsufficientData(format!("only {} evaluation rows", eval_rows.len())));
    }
    let mut train = data.select(train_rows);
    if let Some(s) = static_train {
        train = s.stack(&train)?;
    }
    let r = held_out_r(dimension, &train, &data.select(eval_rows), opts)?;
    Ok(FoldResult { fold: 0, size: eval_rows.len(), r })
}

fn mean_defined(rs: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let defined: Vec<f64> = rs.flatten().collect();
    if defined.is_empty() {
        None
    } else {
        Some(defined.iter().sum::<f64>() / defined.len() as f64)
    }
}
