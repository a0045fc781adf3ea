// =============================================================================
// Binomial-family GLM with logit link, fitted by IRLS
// =============================================================================
//
// Targets are proportions in [0, 1] (VAD scores), not 0/1 outcomes. Each
// iteration solves the ridge-penalized weighted least-squares system
//
//     (X'WX + ridge * I') beta = X'Wz
//     mu = sigmoid(X beta),  W = diag(mu (1 - mu)),  z = X beta + (y - mu) / W
//
// where I' is the identity with a zero in the intercept slot. A step that
// raises the penalized deviance is halved until it does not; three
// consecutive iterations that cannot be repaired this way are a divergence.
// =============================================================================

use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::vad::Dimension;

/// Boundary labels are pulled inside (0, 1) by this much.
pub const Y_CLAMP: f64 = 1e-6;
/// Fitted means are kept inside [MU_CLAMP, 1 - MU_CLAMP].
pub const MU_CLAMP: f64 = 1e-8;

const MAX_HALVINGS: usize = 30;
const DIVERGENCE_STREAK: usize = 3;
// Cholesky pivot below this fraction of the largest diagonal entry means the
// weighted normal equations are numerically singular.
const SINGULAR_PIVOT: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GlmOptions {
    pub ridge: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for GlmOptions {
    fn default() -> Self {
        GlmOptions {
            ridge: 1e-6,
            tol: 1e-8,
            max_iter: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FittedGlm {
    pub dimension: Dimension,
    /// Intercept first, then one coefficient per feature column.
    pub coefficients: Vec<f64>,
    pub ridge: f64,
    pub iterations: usize,
    pub converged: bool,
    pub deviance: f64,
    /// Deviance after each accepted iteration (index 0 = starting point).
    pub deviance_trace: Vec<f64>,
}

pub fn sigmoid(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

fn clamp_mu(mu: f64) -> f64 {
    mu.clamp(MU_CLAMP, 1.0 - MU_CLAMP)
}

/// Binomial deviance `2 Σ [y ln(y/μ) + (1-y) ln((1-y)/(1-μ))]`.
pub fn binomial_deviance(y: &[f64], mu: &[f64]) -> f64 {
    let mut dev = 0.0;
    for (&yi, &mi) in y.iter().zip(mu) {
        if yi > 0.0 {
            dev += yi * (yi / mi).ln();
        }
        if yi < 1.0 {
            dev += (1.0 - yi) * ((1.0 - yi) / (1.0 - mi)).ln();
        }
    }
    2.0 * dev
}

/// Prepends a column of ones.
pub fn with_intercept(x: &DMatrix<f64>) -> DMatrix<f64> {
    x.clone().insert_column(0, 1.0)
}

fn linear_predictor(xi: &DMatrix<f64>, beta: &DVector<f64>) -> DVector<f64> {
    xi * beta
}

fn penalized_deviance(xi: &DMatrix<f64>, y: &[f64], beta: &DVector<f64>, ridge: f64) -> (f64, f64) {
    let eta = linear_predictor(xi, beta);
    let mu: Vec<f64> = eta.iter().map(|&e| clamp_mu(sigmoid(e))).collect();
    let dev = binomial_deviance(y, &mu);
    let penalty = ridge * beta.iter().skip(1).map(|b| b * b).sum::<f64>();
    (dev, dev + penalty)
}

/// Fits `y ~ sigmoid(b0 + X b)` by IRLS. `x` excludes the intercept column.
pub fn fit_binomial(dimension: Dimension, x: &DMatrix<f64>, y: &[f64], opts: &GlmOptions) -> Result<FittedGlm> {
    let (n, d) = x.shape();
    if y.len() != n {
        return Err(Error::DimensionMismatch { expected: n, actual: y.len() });
    }
    if n == 0 {
        return Err(Error::InsufficientData("no training rows".to_string()));
    }
    if let Some(bad) = y.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::InvalidInput(format!("target {bad} outside [0, 1]")));
    }
    if !(opts.ridge >= 0.0) || !(opts.tol > 0.0) || opts.max_iter == 0 {
        return Err(Error::InvalidInput(format!("invalid GLM options {opts:?}")));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("feature matrix contains non-finite values".to_string()));
    }
    if n < d + 1 && opts.ridge == 0.0 {
        return Err(Error::Singular { iteration: 0 });
    }

    let y: Vec<f64> = y.iter().map(|v| v.clamp(Y_CLAMP, 1.0 - Y_CLAMP)).collect();
    let xi = with_intercept(x);
    let k = d + 1;

    let mut beta = DVector::zeros(k);
    let ybar = y.iter().sum::<f64>() / n as f64;
    beta[0] = (ybar / (1.0 - ybar)).ln();

    let (mut dev, mut objective) = penalized_deviance(&xi, &y, &beta, opts.ridge);
    let mut trace = vec![dev];
    let mut converged = false;
    let mut iterations = 0;
    let mut bad_streak = 0;

    while iterations < opts.max_iter {
        iterations += 1;
        let eta = linear_predictor(&xi, &beta);
        let mut lhs = DMatrix::<f64>::zeros(k, k);
        let mut rhs = DVector::<f64>::zeros(k);
        let mut row = DVector::<f64>::zeros(k);
        for i in 0..n {
            let mu = clamp_mu(sigmoid(eta[i]));
            let w = mu * (1.0 - mu);
            let z = eta[i] + (y[i] - mu) / w;
            for j in 0..k {
                row[j] = xi[(i, j)];
            }
            lhs.ger(w, &row, &row, 1.0);
            rhs.axpy(w * z, &row, 1.0);
        }
        for j in 1..k {
            lhs[(j, j)] += opts.ridge;
        }
        let scale = (0..k).fold(0.0f64, |m, j| m.max(lhs[(j, j)]));
        let chol = lhs.cholesky().ok_or(Error::Singular { iteration: iterations })?;
        let l = chol.l_dirty();
        if (0..k).any(|j| l[(j, j)] * l[(j, j)] <= SINGULAR_PIVOT * scale) {
            return Err(Error::Singular { iteration: iterations });
        }
        let proposal = chol.solve(&rhs);
        if proposal.iter().any(|b| !b.is_finite()) {
            return Err(Error::Singular { iteration: iterations });
        }

        // Step halving keeps the penalized deviance from increasing.
        let mut step = &proposal - &beta;
        let mut candidate = proposal.clone();
        let (mut cand_dev, mut cand_obj) = penalized_deviance(&xi, &y, &candidate, opts.ridge);
        let mut halvings = 0;
        while cand_obj > objective && halvings < MAX_HALVINGS {
            step *= 0.5;
            candidate = &beta + &step;
            (cand_dev, cand_obj) = penalized_deviance(&xi, &y, &candidate, opts.ridge);
            halvings += 1;
        }

        if cand_obj > objective {
            // Tolerate roundoff at the optimum; anything larger counts toward divergence.
            let slack = 1e-12 * objective.abs().max(1.0);
            if cand_obj - objective > slack {
                bad_streak += 1;
                if bad_streak >= DIVERGENCE_STREAK {
                    return Err(Error::Diverged {
                        iteration: iterations,
                        deviance: cand_dev,
                        previous: dev,
                    });
                }
                continue;
            }
            converged = true;
            break;
        }
        bad_streak = 0;

        let max_change = step.iter().fold(0.0f64, |m, s| m.max(s.abs()));
        beta = candidate;
        dev = cand_dev;
        objective = cand_obj;
        trace.push(dev);
        if max_change < opts.tol {
            converged = true;
            break;
        }
    }

    Ok(FittedGlm {
        dimension,
        coefficients: beta.iter().copied().collect(),
        ridge: opts.ridge,
        iterations,
        converged,
        deviance: dev,
        deviance_trace: trace,
    })
}

impl FittedGlm {
    /// Number of feature columns (excluding the intercept).
    pub fn dim(&self) -> usize {
        self.coefficients.len() - 1
    }

    pub fn linear_predictor<T: Copy + Into<f64>>(&self, row: &[T]) -> Result<f64> {
        if row.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: row.len(),
            });
        }
        Ok(self.coefficients[0]
            + self.coefficients[1..]
                .iter()
                .zip(row)
                .map(|(b, &x)| b * x.into())
                .sum::<f64>())
    }

    /// Predicted score for one feature row, strictly inside (0, 1).
    pub fn predict_one<T: Copy + Into<f64>>(&self, row: &[T]) -> Result<f64> {
        Ok(clamp_mu(sigmoid(self.linear_predictor(row)?)))
    }

    /// Serializes to the `VADM` model format.
    ///
    /// Layout (little-endian): `VADM`, u16 version, u8 dimension letter,
    /// u8 reserved, u32 dim, f64 ridge, `dim + 1` f64 coefficients, then
    /// u32 iterations, u8 converged, 3 reserved bytes, f64 deviance.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(MODEL_MAGIC)?;
        w.write_all(&MODEL_VERSION.to_le_bytes())?;
        w.write_all(&[self.dimension.letter() as u8, 0])?;
        w.write_all(&(self.dim() as u32).to_le_bytes())?;
        w.write_all(&self.ridge.to_le_bytes())?;
        for c in &self.coefficients {
            w.write_all(&c.to_le_bytes())?;
        }
        w.write_all(&(self.iterations as u32).to_le_bytes())?;
        w.write_all(&[self.converged as u8, 0, 0, 0])?;
        w.write_all(&self.deviance.to_le_bytes())?;
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        let bad = |what: &str| Error::Format(format!("model file: {what}"));
        if bytes.len() < 20 || &bytes[0..4] != MODEL_MAGIC {
            return Err(bad("bad magic or truncated header"));
        }
        let version = u16::from_le_bytes([bytes[4], bytes[5]]);
        if version != MODEL_VERSION {
            return Err(bad(&format!("unsupported version {version}")));
        }
        let dimension: Dimension = (bytes[6] as char).to_string().parse()?;
        let dim = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes")) as usize;
        let ridge = f64::from_le_bytes(bytes[12..20].try_into().expect("8 bytes"));
        let expected = 20 + (dim + 1) * 8 + 16;
        if bytes.len() != expected {
            return Err(bad(&format!("expected {expected} bytes, found {}", bytes.len())));
        }
        let coefficients: Vec<f64> = bytes[20..20 + (dim + 1) * 8]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        let tail = &bytes[20 + (dim + 1) * 8..];
        let iterations = u32::from_le_bytes(tail[0..4].try_into().expect("4 bytes")) as usize;
        let converged = tail[4] != 0;
        let deviance = f64::from_le_bytes(tail[8..16].try_into().expect("8 bytes"));
        if coefficients.iter().any(|c| !c.is_finite()) {
            return Err(bad("non-finite coefficient"));
        }
        Ok(FittedGlm {
            dimension,
            coefficients,
            ridge,
            iterations,
            converged,
            deviance,
            deviance_trace: vec![deviance],
        })
    }
}

pub const MODEL_MAGIC: &[u8; 4] = b"VADM";
pub const MODEL_VERSION: u16 = 1;

/// `sigmoid(X b)` for each row of `x` (no intercept column).
pub fn predict_binomial(model: &FittedGlm, x: &DMatrix<f64>) -> Result<Vec<f64>> {
    if x.ncols() != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            actual: x.ncols(),
        });
    }
    let beta = DVector::from_column_slice(&model.coefficients[1..]);
    let eta = x * beta;
    Ok(eta
        .iter()
        .map(|e| clamp_mu(sigmoid(e + model.coefficients[0])))
        .collect())
}
