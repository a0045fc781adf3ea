mod common;

use common::{normal, normal_matrix, rng};
use nalgebra::DMatrix;
use polar_core::glm::{
    build_base_category_design, build_interaction_design, fit_interaction, fit_ols, InteractionRow, VarianceMode,
};
use polar_core::Error;
use proptest::prelude::*;
use rand::Rng;
use statrs::distribution::{ContinuousCDF, StudentsT};

fn names(k: usize) -> Vec<String> {
    (0..k).map(|i| format!("x{i}")).collect()
}

/// Gauss-Jordan inverse with partial pivoting.
fn invert(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let k = a.len();
    let mut m: Vec<Vec<f64>> = a
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..k).map(|j| if i == j { 1.0 } else { 0.0 }));
            r
        })
        .collect();
    for col in 0..k {
        let piv = (col..k).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs())).unwrap();
        m.swap(col, piv);
        let p = m[col][col];
        for v in m[col].iter_mut() {
            *v /= p;
        }
        for i in 0..k {
            if i != col {
                let f = m[i][col];
                let pivot_row = m[col].clone();
                for (v, pv) in m[i].iter_mut().zip(pivot_row) {
                    *v -= f * pv;
                }
            }
        }
    }
    m.into_iter().map(|r| r[k..].to_vec()).collect()
}

struct Oracle {
    beta: Vec<f64>,
    se: Vec<f64>,
    p: Vec<f64>,
    r2: f64,
}

/// Textbook OLS: beta = (X'X)^-1 X'y, SE from sigma^2 (X'X)^-1, p from statrs.
fn normal_equations(x: &DMatrix<f64>, y: &[f64]) -> Oracle {
    let (n, k) = x.shape();
    let xtx: Vec<Vec<f64>> = (0..k)
        .map(|a| (0..k).map(|b| (0..n).map(|i| x[(i, a)] * x[(i, b)]).sum()).collect())
        .collect();
    let xty: Vec<f64> = (0..k).map(|a| (0..n).map(|i| x[(i, a)] * y[i]).sum()).collect();
    let inv = invert(&xtx);
    let beta: Vec<f64> = (0..k).map(|a| (0..k).map(|b| inv[a][b] * xty[b]).sum()).collect();
    let rss: f64 = (0..n)
        .map(|i| {
            let fitted: f64 = (0..k).map(|j| x[(i, j)] * beta[j]).sum();
            (y[i] - fitted).powi(2)
        })
        .sum();
    let dof = (n - k) as f64;
    let sigma2 = rss / dof;
    let se: Vec<f64> = (0..k).map(|j| (sigma2 * inv[j][j]).sqrt()).collect();
    let t = StudentsT::new(0.0, 1.0, dof).unwrap();
    let p = (0..k).map(|j| 2.0 * t.sf((beta[j] / se[j]).abs())).collect();
    let mean = y.iter().sum::<f64>() / n as f64;
    let tss: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    Oracle { beta, se, p, r2: 1.0 - rss / tss }
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1.0)
}

#[test]
fn exact_line_fit() {
    let x = DMatrix::from_fn(10, 2, |i, j| if j == 0 { 1.0 } else { i as f64 });
    let y: Vec<f64> = (0..10).map(|i| 2.0 * i as f64 + 1.0).collect();
    let fit = fit_ols(&x, &y, &names(2)).unwrap();
    assert!((fit.beta[0] - 1.0).abs() < 1e-12 && (fit.beta[1] - 2.0).abs() < 1e-12);
    assert!(fit.rss < 1e-20);
    assert_eq!(fit.r_squared, 1.0);
}

#[test]
fn random_fixture_matches_normal_equations() {
    let mut r = rng(200);
    let mut x = normal_matrix(&mut r, 200, 5);
    for i in 0..200 {
        x[(i, 0)] = 1.0;
    }
    let y: Vec<f64> = (0..200)
        .map(|i| 0.5 + 0.3 * x[(i, 1)] - 0.2 * x[(i, 2)] + 0.05 * x[(i, 4)] + normal(&mut r))
        .collect();
    let fit = fit_ols(&x, &y, &names(5)).unwrap();
    let o = normal_equations(&x, &y);
    for j in 0..5 {
        assert!(close(fit.beta[j], o.beta[j], 1e-8), "beta {j}");
        assert!(close(fit.std_err[j], o.se[j], 1e-8), "se {j}");
        assert!((fit.p_value[j] - o.p[j]).abs() < 1e-8, "p {j}: {} vs {}", fit.p_value[j], o.p[j]);
        let q = StudentsT::new(0.0, 1.0, 195.0).unwrap().inverse_cdf(0.975);
        assert!(close(fit.ci_high[j], o.beta[j] + q * o.se[j], 1e-8));
    }
    assert!(close(fit.r_squared, o.r2, 1e-10));
    assert_eq!((fit.n, fit.dof), (200, 195));
}

#[test]
fn dependent_column_is_named() {
    let x = DMatrix::from_fn(20, 3, |i, j| match j {
        0 => 1.0,
        1 => i as f64,
        _ => 3.0 * i as f64 - 2.0,
    });
    let y: Vec<f64> = (0..20).map(|i| (i % 4) as f64).collect();
    let terms = vec!["const".to_string(), "a".to_string(), "b".to_string()];
    match fit_ols(&x, &y, &terms) {
        Err(Error::RankDeficient { name, .. }) => assert_eq!(name, "b"),
        other => panic!("expected rank deficiency, got {other:?}"),
    }
}

fn committee_rows(r: &mut impl Rng, committee: &str, n: usize, slope: f64) -> Vec<InteractionRow> {
    (0..n)
        .map(|i| {
            let ratio_f = r.random_range(0.05..0.6);
            let ratio_g = r.random_range(0.2..0.8);
            InteractionRow {
                committee: committee.to_string(),
                tp: (i + 1) as f64,
                ratio_f,
                ratio_g,
                outcome: 0.02 + slope * (i + 1) as f64 + 0.01 * ratio_f - 0.02 * ratio_g + 0.005 * r.random::<f64>(),
            }
        })
        .collect()
}

fn plain_design(rows: &[&InteractionRow]) -> (DMatrix<f64>, Vec<f64>) {
    let x = DMatrix::from_fn(rows.len(), 4, |i, j| match j {
        0 => 1.0,
        1 => rows[i].tp,
        2 => rows[i].ratio_f,
        _ => rows[i].ratio_g,
    });
    (x, rows.iter().map(|r| r.outcome).collect())
}

#[test]
fn split_equivalence_per_committee() {
    let mut r = rng(9);
    let mut rows = committee_rows(&mut r, "Finance", 40, 0.0003);
    rows.extend(committee_rows(&mut r, "Economy", 25, -0.0001));
    rows.extend(committee_rows(&mut r, "Education", 60, 0.0));
    let design = build_interaction_design(&rows).unwrap();
    let fit = fit_interaction(&design, VarianceMode::PerCommittee).unwrap();
    for (c, name) in design.committees.iter().enumerate() {
        let own: Vec<&InteractionRow> = rows.iter().filter(|row| &row.committee == name).collect();
        let (x, y) = plain_design(&own);
        let solo = fit_ols(&x, &y, &names(4)).unwrap();
        for (k, &j) in design.block_columns(c).iter().enumerate() {
            assert!(close(fit.beta[j], solo.beta[k], 1e-8), "{name} beta {k}");
            assert!(close(fit.std_err[j], solo.std_err[k], 1e-8), "{name} se {k}");
            assert!(close(fit.t_stat[j], solo.t_stat[k], 1e-8), "{name} t {k}");
            assert!((fit.p_value[j] - solo.p_value[k]).abs() < 1e-8, "{name} p {k}");
            assert!(close(fit.ci_low[j], solo.ci_low[k], 1e-8));
        }
        assert_eq!(fit.terms[design.block_columns(c)[1]], format!("Comm[{name}]:TP"));
    }
}

#[test]
fn pooled_variance_rescales_standard_errors() {
    let mut r = rng(10);
    let mut rows = committee_rows(&mut r, "A", 30, 0.0002);
    rows.extend(committee_rows(&mut r, "B", 45, 0.0));
    let design = build_interaction_design(&rows).unwrap();
    let per = fit_interaction(&design, VarianceMode::PerCommittee).unwrap();
    let pooled = fit_interaction(&design, VarianceMode::Pooled).unwrap();
    let n = rows.len();
    for (c, name) in design.committees.iter().enumerate() {
        let own: Vec<&InteractionRow> = rows.iter().filter(|row| &row.committee == name).collect();
        let (x, y) = plain_design(&own);
        let solo = fit_ols(&x, &y, &names(4)).unwrap();
        let sigma2_c = solo.rss / solo.dof as f64;
        let sigma2_pooled = pooled.rss / (n - 8) as f64;
        for &j in &design.block_columns(c) {
            assert!(close(pooled.beta[j], per.beta[j], 1e-10));
            let ratio = pooled.std_err[j] / per.std_err[j];
            assert!(close(ratio, (sigma2_pooled / sigma2_c).sqrt(), 1e-8));
        }
    }
}

#[test]
fn single_committee_matches_plain_fit() {
    let mut r = rng(12);
    let rows = committee_rows(&mut r, "Only", 30, 0.001);
    let design = build_interaction_design(&rows).unwrap();
    assert_eq!(design.terms.len(), 4);
    let fit = fit_interaction(&design, VarianceMode::PerCommittee).unwrap();
    let refs: Vec<&InteractionRow> = rows.iter().collect();
    let (x, y) = plain_design(&refs);
    let solo = fit_ols(&x, &y, &names(4)).unwrap();
    for j in 0..4 {
        assert!(close(fit.beta[j], solo.beta[j], 1e-10));
        assert!(close(fit.std_err[j], solo.std_err[j], 1e-10));
    }
    let pooled = fit_interaction(&design, VarianceMode::Pooled).unwrap();
    assert!(close(pooled.std_err[1], solo.std_err[1], 1e-10));
}

#[test]
fn thirteen_committees_give_fifty_two_columns() {
    let mut r = rng(13);
    let rows: Vec<InteractionRow> = (0..13).flat_map(|c| committee_rows(&mut r, &format!("C{c:02}"), 8, 0.0)).collect();
    let design = build_interaction_design(&rows).unwrap();
    assert_eq!(design.x.ncols(), 52);
    assert!(!design.terms.iter().any(|t| t == "const"));
}

#[test]
fn committee_with_too_few_rows_is_named() {
    let mut r = rng(14);
    let mut rows = committee_rows(&mut r, "Big", 20, 0.0);
    rows.extend(committee_rows(&mut r, "Tiny", 3, 0.0));
    match build_interaction_design(&rows) {
        Err(Error::TooFewRows { committee, .. }) => assert_eq!(committee, "Tiny"),
        other => panic!("expected TooFewRows, got {other:?}"),
    }
}

#[test]
fn planted_time_slope_is_detected() {
    let mut r = rng(15);
    let mut rows = Vec::new();
    for (name, slope) in [("Planted", 0.0003), ("Control", 0.0)] {
        for i in 0..300 {
            let tp = (i + 1) as f64;
            rows.push(InteractionRow {
                committee: name.to_string(),
                tp,
                ratio_f: r.random_range(0.1..0.5),
                ratio_g: r.random_range(0.3..0.7),
                outcome: 0.02 + slope * tp + 0.01 * normal(&mut r),
            });
        }
    }
    let design = build_interaction_design(&rows).unwrap();
    let fit = fit_interaction(&design, VarianceMode::PerCommittee).unwrap();
    let j = fit.term_index("Comm[Planted]:TP").unwrap();
    assert!(fit.beta[j] > 0.0 && fit.p_value[j] < 0.05);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(30))]

    #[test]
    fn base_category_and_split_designs_share_r_squared(seed in 0u64..100_000, m in 1usize..5) {
        let mut r = rng(seed);
        let rows: Vec<InteractionRow> = (0..m)
            .flat_map(|c| {
                let n = r.random_range(8..30);
                let slope = r.random_range(-0.001..0.001);
                committee_rows(&mut r, &format!("C{c}"), n, slope)
            })
            .collect();
        let split = build_interaction_design(&rows).unwrap();
        let base = build_base_category_design(&rows).unwrap();
        prop_assert_eq!(split.x.ncols(), base.x.ncols());
        let a = fit_interaction(&split, VarianceMode::Pooled).unwrap();
        let b = fit_ols(&base.x, &base.y, &base.terms).unwrap();
        prop_assert!((a.r_squared - b.r_squared).abs() < 1e-10);
    }

    #[test]
    fn each_row_lives_in_its_own_block(seed in 0u64..100_000, m in 1usize..5) {
        let mut r = rng(seed);
        let rows: Vec<InteractionRow> = (0..m).flat_map(|c| committee_rows(&mut r, &format!("C{c}"), 6, 0.0)).collect();
        let design = build_interaction_design(&rows).unwrap();
        prop_assert_eq!(design.x.ncols(), 4 * m);
        for i in 0..rows.len() {
            let c = design.row_committee[i];
            let block = design.block_columns(c);
            let nonzero: Vec<usize> = (0..design.x.ncols()).filter(|&j| design.x[(i, j)] != 0.0).collect();
            prop_assert_eq!(nonzero.len(), 4);
            prop_assert!(nonzero.iter().all(|j| block.contains(j)));
        }
    }

    #[test]
    fn intervals_bracket_estimates(seed in 0u64..100_000) {
        let mut r = rng(seed);
        let mut x = normal_matrix(&mut r, 40, 3);
        for i in 0..40 { x[(i, 0)] = 1.0; }
        let y: Vec<f64> = (0..40).map(|_| normal(&mut r)).collect();
        let fit = fit_ols(&x, &y, &names(3)).unwrap();
        for j in 0..3 {
            prop_assert!(fit.ci_low[j] <= fit.beta[j] && fit.beta[j] <= fit.ci_high[j]);
        }
        prop_assert!((0.0..=1.0).contains(&fit.r_squared));
    }
}
