//! Ordinary least squares with classical inference, and the per-committee
//! interaction designs used by the confound analysis.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::stats::special::{t_quantile, t_two_sided_p};

/// Relative size of an R diagonal entry below which a column counts as
/// linearly dependent on the columns before it.
const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct OlsFit {
    pub terms: Vec<String>,
    pub beta: Vec<f64>,
    pub std_err: Vec<f64>,
    pub t_stat: Vec<f64>,
    pub p_value: Vec<f64>,
    pub ci_low: Vec<f64>,
    pub ci_high: Vec<f64>,
    /// Residual degrees of freedom behind each term's inference.
    pub term_dof: Vec<usize>,
    pub r_squared: f64,
    pub rss: f64,
    pub n: usize,
    /// `n - k`.
    pub dof: usize,
}

impl OlsFit {
    pub fn term_index(&self, name: &str) -> Option<usize> {
        self.terms.iter().position(|t| t == name)
    }
}

/// QR factors of a full-rank design plus the least-squares solution.
struct Solved {
    beta: DVector<f64>,
    residuals: DVector<f64>,
    /// Inverse of R; `(X'X)^-1 = R^-1 R^-T`.
    r_inv: DMatrix<f64>,
}

fn solve_least_squares(x: &DMatrix<f64>, y: &DVector<f64>, terms: &[String]) -> Result<Solved> {
    let (n, k) = x.shape();
    if n <= k {
        return Err(Error::InsufficientData(format!(
            "OLS needs more rows than columns ({n} rows, {k} columns)"
        )));
    }
    if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("OLS input contains non-finite values".to_string()));
    }
    let qr = x.clone().qr();
    let r = qr.r();
    for j in 0..k {
        let col_norm = x.column(j).norm();
        if col_norm == 0.0 || r[(j, j)].abs() <= RANK_TOL * col_norm {
            return Err(Error::RankDeficient {
                column: j,
                name: terms.get(j).cloned().unwrap_or_else(|| format!("x{j}")),
            });
        }
    }
    let qty = qr.q().transpose() * y;
    let beta = r
        .solve_upper_triangular(&qty)
        .ok_or_else(|| Error::RankDeficient { column: k - 1, name: terms[k - 1].clone() })?;
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(k, k))
        .ok_or_else(|| Error::RankDeficient { column: k - 1, name: terms[k - 1].clone() })?;
    let residuals = y - x * &beta;
    Ok(Solved { beta, residuals, r_inv })
}

fn r_squared(y: &DVector<f64>, rss: f64) -> f64 {
    let mean = y.mean();
    let tss: f64 = y.iter().map(|v| (v - mean) * (v - mean)).sum();
    if tss > 0.0 {
        (1.0 - rss / tss).clamp(0.0, 1.0)
    } else if rss == 0.0 {
        1.0
    } else {
        0.0
    }
}

/// Per-term inference from a coefficient, its `(X'X)^-1` diagonal entry, the
/// residual variance and the residual dof.
struct TermStats {
    se: f64,
    t: f64,
    p: f64,
    lo: f64,
    hi: f64,
}

fn term_stats(beta: f64, xtx_inv_diag: f64, sigma2: f64, dof: usize) -> TermStats {
    let se = (sigma2 * xtx_inv_diag).sqrt();
    let q = t_quantile(0.975, dof as f64);
    let (t, p) = if se > 0.0 {
        let t = beta / se;
        (t, t_two_sided_p(t, dof as f64))
    } else if beta == 0.0 {
        (0.0, 1.0)
    } else {
        (beta.signum() * f64::INFINITY, 0.0)
    };
    TermStats {
        se,
        t,
        p,
        lo: beta - q * se,
        hi: beta + q * se,
    }
}

fn row_norms_sq(m: &DMatrix<f64>) -> Vec<f64> {
    (0..m.nrows()).map(|i| m.row(i).norm_squared()).collect()
}

/// `beta = argmin |y - X beta|^2` with classical standard errors
/// (`sigma^2 = RSS / (n - k)`), two-sided t-test p-values and 95% intervals.
pub fn fit_ols(x: &DMatrix<f64>, y: &[f64], terms: &[String]) -> Result<OlsFit> {
    let (n, k) = x.shape();
    if y.len() != n {
        return Err(Error::DimensionMismatch { expected: n, actual: y.len() });
    }
    if terms.len() != k {
        return Err(Error::DimensionMismatch { expected: k, actual: terms.len() });
    }
    let y = DVector::from_column_slice(y);
    let solved = solve_least_squares(x, &y, terms)?;
    let rss = solved.residuals.norm_squared();
    let dof = n - k;
    let sigma2 = rss / dof as f64;
    let diag = row_norms_sq(&solved.r_inv);

    let mut fit = empty_fit(terms, n, dof, rss, r_squared(&y, rss));
    for j in 0..k {
        push_term(&mut fit, solved.beta[j], diag[j], sigma2, dof);
    }
    Ok(fit)
}

fn empty_fit(terms: &[String], n: usize, dof: usize, rss: f64, r_squared: f64) -> OlsFit {
    let k = terms.len();
    OlsFit {
        terms: terms.to_vec(),
        beta: Vec::with_capacity(k),
        std_err: Vec::with_capacity(k),
        t_stat: Vec::with_capacity(k),
        p_value: Vec::with_capacity(k),
        ci_low: Vec::with_capacity(k),
        ci_high: Vec::with_capacity(k),
        term_dof: Vec::with_capacity(k),
        r_squared,
        rss,
        n,
        dof,
    }
}

fn push_term(fit: &mut OlsFit, beta: f64, diag: f64, sigma2: f64, dof: usize) {
    let s = term_stats(beta, diag, sigma2, dof);
    fit.beta.push(beta);
    fit.std_err.push(s.se);
    fit.t_stat.push(s.t);
    fit.p_value.push(s.p);
    fit.ci_low.push(s.lo);
    fit.ci_high.push(s.hi);
    fit.term_dof.push(dof);
}

/// One protocol-level observation for the confound regression.
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionRow {
    pub committee: String,
    pub tp: f64,
    pub ratio_f: f64,
    pub ratio_g: f64,
    pub outcome: f64,
}

pub const PER_COMMITTEE_TERMS: usize = 4;
const SLOPE_NAMES: [&str; 3] = ["TP", "RatioF", "RatioG"];

/// Design with one intercept and three slopes per committee and no global
/// intercept, so each committee's block is estimated from its own rows.
///
/// Columns are grouped by term kind: every `Comm[c]`, then every `Comm[c]:TP`,
/// then `Comm[c]:RatioF`, then `Comm[c]:RatioG`, committees in sorted order.
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionDesign {
    pub committees: Vec<String>,
    pub terms: Vec<String>,
    pub x: DMatrix<f64>,
    pub y: Vec<f64>,
    /// Committee index of each row.
    pub row_committee: Vec<usize>,
}

impl InteractionDesign {
    /// Column indices of committee `c`'s block, in const/TP/RatioF/RatioG order.
    pub fn block_columns(&self, c: usize) -> [usize; 4] {
        let m = self.committees.len();
        [c, m + c, 2 * m + c, 3 * m + c]
    }

    pub fn rows_of(&self, c: usize) -> Vec<usize> {
        (0..self.row_committee.len()).filter(|&i| self.row_committee[i] == c).collect()
    }
}

fn committee_index(rows: &[InteractionRow]) -> Result<(Vec<String>, Vec<usize>)> {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for r in rows {
        *counts.entry(r.committee.as_str()).or_insert(0) += 1;
    }
    for (c, n) in &counts {
        if *n < PER_COMMITTEE_TERMS {
            return Err(Error::TooFewRows {
                committee: c.to_string(),
                rows: *n,
                needed: PER_COMMITTEE_TERMS,
            });
        }
    }
    let committees: Vec<String> = counts.keys().map(|c| c.to_string()).collect();
    let pos: BTreeMap<&str, usize> = committees.iter().enumerate().map(|(i, c)| (c.as_str(), i)).collect();
    let row_committee = rows.iter().map(|r| pos[r.committee.as_str()]).collect();
    Ok((committees, row_committee))
}

/// `outcome ~ Comm:TP + Comm:RatioF + Comm:RatioG` with per-committee intercepts.
pub fn build_interaction_design(rows: &[InteractionRow]) -> Result<InteractionDesign> {
    if rows.is_empty() {
        return Err(Error::InsufficientData("no rows for the interaction design".to_string()));
    }
    let (committees, row_committee) = committee_index(rows)?;
    let m = committees.len();
    let mut terms: Vec<String> = committees.iter().map(|c| format!("Comm[{c}]")).collect();
    for slope in SLOPE_NAMES {
        terms.extend(committees.iter().map(|c| format!("Comm[{c}]:{slope}")));
    }
    let mut x = DMatrix::zeros(rows.len(), PER_COMMITTEE_TERMS * m);
    for (i, r) in rows.iter().enumerate() {
        let c = row_committee[i];
        x[(i, c)] = 1.0;
        x[(i, m + c)] = r.tp;
        x[(i, 2 * m + c)] = r.ratio_f;
        x[(i, 3 * m + c)] = r.ratio_g;
    }
    Ok(InteractionDesign {
        committees,
        terms,
        x,
        y: rows.iter().map(|r| r.outcome).collect(),
        row_committee,
    })
}

/// The equivalent base-category parameterization
/// `outcome ~ Comm*TP + Comm*RatioF + Comm*RatioG`: a global intercept and
/// slopes for the first committee, plus offsets for every other committee.
/// Spans the same column space as [`build_interaction_design`].
pub fn build_base_category_design(rows: &[InteractionRow]) -> Result<InteractionDesign> {
    if rows.is_empty() {
        return Err(Error::InsufficientData("no rows for the interaction design".to_string()));
    }
    let (committees, row_committee) = committee_index(rows)?;
    let m = committees.len();
    let mut terms = vec!["const".to_string()];
    terms.extend(committees[1..].iter().map(|c| format!("Comm[{c}]")));
    terms.extend(SLOPE_NAMES.iter().map(|s| s.to_string()));
    for slope in SLOPE_NAMES {
        terms.extend(committees[1..].iter().map(|c| format!("Comm[{c}]:{slope}")));
    }
    let others = m - 1;
    let mut x = DMatrix::zeros(rows.len(), PER_COMMITTEE_TERMS * m);
    for (i, r) in rows.iter().enumerate() {
        let c = row_committee[i];
        let slopes = [r.tp, r.ratio_f, r.ratio_g];
        x[(i, 0)] = 1.0;
        for (s, v) in slopes.iter().enumerate() {
            x[(i, m + s)] = *v;
        }
        if c > 0 {
            x[(i, c)] = 1.0;
            for (s, v) in slopes.iter().enumerate() {
                x[(i, m + 3 + s * others + (c - 1))] = *v;
            }
        }
    }
    Ok(InteractionDesign {
        committees,
        terms,
        x,
        y: rows.iter().map(|r| r.outcome).collect(),
        row_committee,
    })
}

/// Residual variance used for each committee block of an interaction fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum VarianceMode {
    /// Each block uses its committee's own residuals (`RSS_c / (n_c - 4)`), so
    /// its inference matches a regression on that committee's rows alone.
    #[default]
    PerCommittee,
    /// One residual variance pooled over all rows (`RSS / (n - 4m)`).
    Pooled,
}

/// Fits an [`InteractionDesign`] with the chosen residual-variance mode.
pub fn fit_interaction(design: &InteractionDesign, mode: VarianceMode) -> Result<OlsFit> {
    match mode {
        VarianceMode::Pooled => fit_ols(&design.x, &design.y, &design.terms),
        VarianceMode::PerCommittee => {
            let (n, k) = design.x.shape();
            let y = DVector::from_column_slice(&design.y);
            let solved = solve_least_squares(&design.x, &y, &design.terms)?;
            let rss = solved.residuals.norm_squared();
            let diag = row_norms_sq(&solved.r_inv);

            let m = design.committees.len();
            let mut block_sigma2 = vec![0.0; m];
            let mut block_dof = vec![0usize; m];
            for c in 0..m {
                let rows = design.rows_of(c);
                if rows.len() <= PER_COMMITTEE_TERMS {
                    return Err(Error::TooFewRows {
                        committee: design.committees[c].clone(),
                        rows: rows.len(),
                        needed: PER_COMMITTEE_TERMS + 1,
                    });
                }
                let rss_c: f64 = rows.iter().map(|&i| solved.residuals[i] * solved.residuals[i]).sum();
                block_dof[c] = rows.len() - PER_COMMITTEE_TERMS;
                block_sigma2[c] = rss_c / block_dof[c] as f64;
            }
            let mut owner = vec![0usize; k];
            for c in 0..m {
                for col in design.block_columns(c) {
                    owner[col] = c;
                }
            }
            let mut fit = empty_fit(&design.terms, n, n - k, rss, r_squared(&y, rss));
            for j in 0..k {
                let c = owner[j];
                push_term(&mut fit, solved.beta[j], diag[j], block_sigma2[c], block_dof[c]);
            }
            Ok(fit)
        }
    }
}
