//! Pearson correlation, two-sample t-tests and the Mann-Kendall trend test.
//!
//! All tests are two-sided; direction is read off the sign of the statistic
//! once the p-value clears the significance level.

pub mod special;

use crate::error::{Error, Result};

/// Pearson correlation outcome.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Correlation {
    Defined { r: f64, p: f64, n: usize },
    /// One of the inputs is constant; r is undefined.
    ZeroVariance,
}

impl Correlation {
    pub fn r(&self) -> Option<f64> {
        match self {
            Correlation::Defined { r, .. } => Some(*r),
            Correlation::ZeroVariance => None,
        }
    }
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Sample variance (n - 1 denominator); 0 for a single value.
pub fn sample_variance(x: &[f64]) -> f64 {
    if x.len() < 2 {
        return 0.0;
    }
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() - 1) as f64
}

/// Pearson's r with a two-sided p-value from t(n - 2).
pub fn pearson(x: &[f64], y: &[f64]) -> Result<Correlation> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            actual: y.len(),
        });
    }
    let n = x.len();
    if n < 3 {
        return Err(Error::InsufficientData(format!("pearson needs at least 3 pairs, got {n}")));
    }
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Ok(Correlation::ZeroVariance);
    }
    let r = (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0);
    let dof = (n - 2) as f64;
    let p = if r.abs() == 1.0 {
        0.0
    } else {
        special::t_two_sided_p(r * (dof / (1.0 - r * r)).sqrt(), dof)
    };
    Ok(Correlation::Defined { r, p, n })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TTestVariant {
    /// Equal-variance Student t.
    #[default]
    Pooled,
    Welch,
}

impl std::str::FromStr for TTestVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pooled" => Ok(TTestVariant::Pooled),
            "welch" => Ok(TTestVariant::Welch),
            other => Err(Error::InvalidInput(format!("unknown t-test variant {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HigherGroup {
    First,
    Second,
    Neither,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TTestResult {
    pub t: f64,
    pub dof: f64,
    pub p: f64,
    pub higher_group: HigherGroup,
    pub significant: bool,
    /// Both groups constant with different means (t is infinite).
    pub degenerate: bool,
}

/// Two-sample t-test. `higher_group` names the larger-mean group iff `p < alpha`.
pub fn two_sample_t(a: &[f64], b: &[f64], variant: TTestVariant, alpha: f64) -> Result<TTestResult> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "t-test needs at least 2 values per group, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (ma, mb) = (mean(a), mean(b));
    let (va, vb) = (sample_variance(a), sample_variance(b));
    let diff = ma - mb;

    let (se, dof) = match variant {
        TTestVariant::Pooled => {
            let dof = na + nb - 2.0;
            let pooled = ((na - 1.0) * va + (nb - 1.0) * vb) / dof;
            ((pooled * (1.0 / na + 1.0 / nb)).sqrt(), dof)
        }
        TTestVariant::Welch => {
            let (qa, qb) = (va / na, vb / nb);
            let se2 = qa + qb;
            let dof = if se2 > 0.0 {
                se2 * se2 / (qa * qa / (na - 1.0) + qb * qb / (nb - 1.0))
            } else {
                na + nb - 2.0
            };
            (se2.sqrt(), dof)
        }
    };

    if se == 0.0 {
        if diff == 0.0 {
            return Ok(TTestResult {
                t: 0.0,
                dof,
                p: 1.0,
                higher_group: HigherGroup::Neither,
                significant: false,
                degenerate: false,
            });
        }
        let higher = if diff > 0.0 { HigherGroup::First } else { HigherGroup::Second };
        return Ok(TTestResult {
            t: diff.signum() * f64::INFINITY,
            dof,
            p: 0.0,
            higher_group: higher,
            significant: true,
            degenerate: true,
        });
    }

    let t = diff / se;
    let p = special::t_two_sided_p(t, dof);
    let significant = p < alpha;
    let higher_group = match (significant, t > 0.0) {
        (false, _) => HigherGroup::Neither,
        (true, true) => HigherGroup::First,
        (true, false) => HigherGroup::Second,
    };
    Ok(TTestResult {
        t,
        dof,
        p,
        higher_group,
        significant,
        degenerate: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrendDirection {
    Increasing,
    Decreasing,
    NoTrend,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrendResult {
    pub n: usize,
    pub s: i64,
    pub var_s: f64,
    pub z: f64,
    pub p: f64,
    pub direction: TrendDirection,
}

pub const MANN_KENDALL_MIN_N: usize = 8;

/// Mann-Kendall monotonic trend test with tie-corrected variance and a
/// continuity-corrected normal approximation.
pub fn mann_kendall(series: &[f64], alpha: f64) -> Result<TrendResult> {
    let n = series.len();
    if n < MANN_KENDALL_MIN_N {
        return Err(Error::InsufficientData(format!(
            "Mann-Kendall needs at least {MANN_KENDALL_MIN_N} points, got {n}"
        )));
    }
    if series.iter().any(|x| x.is_nan()) {
        return Err(Error::InvalidInput("series contains NaN".to_string()));
    }

    let s = kendall_s(series);

    let mut sorted = series.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("no NaN"));
    let mut tie_term = 0i128;
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && sorted[j] == sorted[i] {
            j += 1;
        }
        let t = (j - i) as i128;
        tie_term += t * (t - 1) * (2 * t + 5);
        i = j;
    }
    let nn = n as i128;
    let var_s = (nn * (nn - 1) * (2 * nn + 5) - tie_term) as f64 / 18.0;

    if var_s <= 0.0 {
        return Ok(TrendResult {
            n,
            s,
            var_s: 0.0,
            z: 0.0,
            p: 1.0,
            direction: TrendDirection::NoTrend,
        });
    }
    let sd = var_s.sqrt();
    let z = match s {
        s if s > 0 => (s - 1) as f64 / sd,
        s if s < 0 => (s + 1) as f64 / sd,
        _ => 0.0,
    };
    let p = special::normal_two_sided_p(z);
    let direction = if p < alpha && s > 0 {
        TrendDirection::Increasing
    } else if p < alpha && s < 0 {
        TrendDirection::Decreasing
    } else {
        TrendDirection::NoTrend
    };
    Ok(TrendResult {
        n,
        s,
        var_s,
        z,
        p,
        direction,
    })
}

/// `S = Σ_{i<j} sign(x_j - x_i)` in O(n log n).
///
/// Counts strict inversions with a merge sort (equal values never count), then
/// `S = concordant - discordant` where
/// `concordant = all pairs - tied pairs - discordant`.
fn kendall_s(series: &[f64]) -> i64 {
    let n = series.len() as i64;
    let mut buf = series.to_vec();
    let mut scratch = vec![0.0; buf.len()];
    let discordant = count_inversions(&mut buf, &mut scratch);
    // buf is now sorted; tally tied pairs.
    let mut tied = 0i64;
    let mut i = 0;
    while i < buf.len() {
        let mut j = i + 1;
        while j < buf.len() && buf[j] == buf[i] {
            j += 1;
        }
        let t = (j - i) as i64;
        tied += t * (t - 1) / 2;
        i = j;
    }
    let concordant = n * (n - 1) / 2 - tied - discordant;
    concordant - discordant
}

fn count_inversions(v: &mut [f64], scratch: &mut [f64]) -> i64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut count = {
        let (left, right) = v.split_at_mut(mid);
        let (sl, sr) = scratch.split_at_mut(mid);
        count_inversions(left, sl) + count_inversions(right, sr)
    };
    let (mut i, mut j, mut k) = (0, mid, 0);
    while i < mid && j < n {
        // Ties go left first, so equal values are never counted as inverted.
        if v[i] <= v[j] {
            scratch[k] = v[i];
            i += 1;
        } else {
            scratch[k] = v[j];
            count += (mid - i) as i64;
            j += 1;
        }
        k += 1;
    }
    scratch[k..k + mid - i].copy_from_slice(&v[i..mid]);
    k += mid - i;
    scratch[k..k + n - j].copy_from_slice(&v[j..n]);
    v.copy_from_slice(&scratch[..n]);
    count
}
