//! Margin retargeting: the per-row projection of a regression output `g` onto
//! `{t : t_h − t_j ≥ 1 for all j ≠ h}`.
//!
//! Writing `t_h = g_h + Δ`, every rival is clipped to `min(g_j, t_h − 1)`, so the row
//! problem collapses to the scalar `min_Δ Δ² + Σ_{j≠h} min(Δ − v_j, 0)²` with
//! `v_j = 1 + g_j − g_h`. Its derivative `Γ'(Δ) = 2(Δ + Σ min(Δ − v_j, 0))` is strictly
//! increasing, so the rivals that end up on the margin are exactly those with
//! `Γ'(v_j) > 0`, and `Δ` is the mean of their `v_j` with an extra zero.

use log::warn;
use nalgebra::DMatrix;

use crate::data::TargetMatrix;
use crate::error::{AlprError, Result};

/// One row subproblem: regression output `g` and the correct class `label` (1-based).
#[derive(Debug, Clone, PartialEq)]
pub struct RetargetRow<'a> {
    pub g: &'a [f64],
    pub label: usize,
}

impl<'a> RetargetRow<'a> {
    pub fn new(g: &'a [f64], label: usize) -> Result<Self> {
        if label == 0 || label > g.len() {
            return Err(AlprError::LabelOutOfRange {
                index: 0,
                label,
                class_count: g.len(),
            });
        }
        if g.iter().any(|v| !v.is_finite()) {
            return Err(AlprError::InvalidDataset("non-finite regression output".into()));
        }
        Ok(Self { g, label })
    }
}

/// Closed-form margin projection of one row.
///
/// Falls back to [`qp_oracle`] (with a warning) if the closed form ever fails its
/// KKT certificate.
pub fn retarget_row(row: &RetargetRow<'_>) -> Result<Vec<f64>> {
    let c = row.g.len();
    if c < 2 {
        return Err(AlprError::TooFewClasses(c));
    }
    let t = closed_form(row.g, row.label - 1);
    if kkt_residual(row.g, row.label - 1, &t) <= 1e-9 * (1.0 + max_abs(row.g)) {
        return Ok(t);
    }
    warn!(
        "closed-form retarget failed its KKT check for g={:?}, label={}; using enumeration",
        row.g, row.label
    );
    qp_oracle(row)
}

fn closed_form(g: &[f64], h: usize) -> Vec<f64> {
    let v: Vec<f64> = g.iter().map(|gi| 1.0 + gi - g[h]).collect();
    let rivals = || (0..g.len()).filter(move |&i| i != h);
    let gamma_prime = |x: f64| 2.0 * (x + rivals().map(|i| (x - v[i]).min(0.0)).sum::<f64>());

    let mut numerator = 0.0;
    let mut active = 0usize;
    for i in rivals() {
        if gamma_prime(v[i]) > 0.0 {
            numerator += v[i];
            active += 1;
        }
    }
    let delta = numerator / (1 + active) as f64;

    (0..g.len())
        .map(|i| {
            if i == h {
                g[i] + delta
            } else {
                g[i] + (delta - v[i]).min(0.0)
            }
        })
        .collect()
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, b| a.max(b.abs()))
}

/// Largest violation of feasibility, multiplier sign, complementary slackness or
/// stationarity for a candidate `t`.
fn kkt_residual(g: &[f64], h: usize, t: &[f64]) -> f64 {
    let mut worst = 0.0f64;
    let mut multiplier_sum = 0.0;
    for j in (0..g.len()).filter(|&j| j != h) {
        let slack = t[h] - t[j] - 1.0;
        let mu = 2.0 * (g[j] - t[j]);
        worst = worst.max(-slack).max(-mu);
        worst = worst.max((mu * slack).abs());
        multiplier_sum += mu;
    }
    worst.max((2.0 * (t[h] - g[h]) - multiplier_sum).abs())
}

/// Applies [`retarget_row`] to every row of an n × C regression output.
pub fn retarget_matrix(regression_output: &DMatrix<f64>, labels: &[usize]) -> Result<TargetMatrix> {
    let (n, c) = regression_output.shape();
    if labels.len() != n {
        return Err(AlprError::ShapeMismatch(format!(
            "{} labels for {n} output rows",
            labels.len()
        )));
    }
    let mut matrix = DMatrix::zeros(n, c);
    let mut g = vec![0.0; c];
    for (i, &label) in labels.iter().enumerate() {
        for (dst, src) in g.iter_mut().zip(regression_output.row(i).iter()) {
            *dst = *src;
        }
        let t = retarget_row(&RetargetRow::new(&g, label)?)?;
        for (j, v) in t.into_iter().enumerate() {
            matrix[(i, j)] = v;
        }
    }
    Ok(TargetMatrix { matrix })
}

/// Brute-force solver for the row problem: enumerates every set `A` of rivals held
/// on the margin and keeps the best candidate whose multipliers are nonnegative and
/// whose inactive constraints are slack.
pub fn qp_oracle(row: &RetargetRow<'_>) -> Result<Vec<f64>> {
    let c = row.g.len();
    if c < 2 {
        return Err(AlprError::TooFewClasses(c));
    }
    if c > 16 {
        return Err(AlprError::EnumerationTooLarge(c));
    }
    let g = row.g;
    let h = row.label - 1;
    let rivals: Vec<usize> = (0..c).filter(|&j| j != h).collect();
    let tol = 1e-12 * (1.0 + max_abs(g));

    let mut best: Option<(f64, Vec<f64>)> = None;
    for mask in 0u32..(1 << rivals.len()) {
        let in_set = |k: usize| mask & (1 << k) != 0;
        let size = mask.count_ones() as f64;
        let sum: f64 = rivals
            .iter()
            .enumerate()
            .filter(|&(k, _)| in_set(k))
            .map(|(_, &j)| g[j] + 1.0)
            .sum();
        let th = (g[h] + sum) / (1.0 + size);

        let mut t = g.to_vec();
        t[h] = th;
        let mut consistent = true;
        for (k, &j) in rivals.iter().enumerate() {
            if in_set(k) {
                t[j] = th - 1.0;
                // multiplier 2(g_j − t_j) must be nonnegative
                if g[j] - t[j] < -tol {
                    consistent = false;
                }
            } else if th - g[j] < 1.0 - tol {
                consistent = false;
            }
        }
        if !consistent {
            continue;
        }
        let obj: f64 = t.iter().zip(g).map(|(a, b)| (a - b) * (a - b)).sum();
        if best.as_ref().map_or(true, |(o, _)| obj < *o) {
            best = Some((obj, t));
        }
    }
    best.map(|(_, t)| t)
        .ok_or_else(|| AlprError::InvalidDataset("no KKT-consistent active set".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rt(g: &[f64], label: usize) -> Vec<f64> {
        retarget_row(&RetargetRow::new(g, label).unwrap()).unwrap()
    }

    fn assert_close(a: &[f64], b: &[f64], tol: f64) {
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() <= tol, "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn already_feasible_row_is_unchanged() {
        assert_eq!(rt(&[2.0, 0.5], 1), vec![2.0, 0.5]);
    }

    #[test]
    fn symmetric_two_class() {
        assert_close(&rt(&[0.0, 0.0], 1), &[0.5, -0.5], 1e-15);
        assert_close(&rt(&[0.0, 0.0], 2), &[-0.5, 0.5], 1e-15);
    }

    #[test]
    fn three_class_both_active() {
        let expect = [23.0 / 30.0, -7.0 / 30.0, -7.0 / 30.0];
        assert_close(&rt(&[0.0, 0.5, -0.2], 1), &expect, 1e-12);
    }

    #[test]
    fn oracle_examples() {
        let o = |g: &[f64], l| qp_oracle(&RetargetRow::new(g, l).unwrap()).unwrap();
        assert_close(&o(&[0.0, 0.0], 1), &[0.5, -0.5], 1e-15);
        assert_close(&o(&[2.0, 0.5], 1), &[2.0, 0.5], 0.0);
        assert_close(
            &o(&[0.0, 0.5, -0.2], 1),
            &[23.0 / 30.0, -7.0 / 30.0, -7.0 / 30.0],
            1e-12,
        );
    }

    #[test]
    fn tie_at_zero_derivative_is_inactive() {
        // v = (., 2, 1): Γ'(1) = 2(1 + (1 − 2)) = 0 exactly, so only rival 2 is active.
        let t = rt(&[0.0, 1.0, 0.0], 1);
        assert_eq!(t, vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn errors() {
        assert!(matches!(
            retarget_row(&RetargetRow { g: &[1.0], label: 1 }),
            Err(AlprError::TooFewClasses(1))
        ));
        let big = vec![0.0; 17];
        assert!(matches!(
            qp_oracle(&RetargetRow::new(&big, 1).unwrap()),
            Err(AlprError::EnumerationTooLarge(17))
        ));
        assert!(RetargetRow::new(&[0.0, 1.0], 3).is_err());
    }

    #[test]
    fn matrix_rows() {
        let out = DMatrix::zeros(4, 2);
        let t = retarget_matrix(&out, &[1, 2, 1, 2]).unwrap();
        let expect = DMatrix::from_row_slice(4, 2, &[0.5, -0.5, -0.5, 0.5, 0.5, -0.5, -0.5, 0.5]);
        assert_eq!(t.matrix, expect);

        let feasible = DMatrix::from_row_slice(2, 3, &[3.0, 1.0, 0.0, -1.0, 0.0, 2.0]);
        let t = retarget_matrix(&feasible, &[1, 3]).unwrap();
        assert_eq!(t.matrix, feasible);
        assert!(retarget_matrix(&feasible, &[1]).is_err());
    }

    fn row_strategy() -> impl Strategy<Value = (Vec<f64>, usize)> {
        (2usize..=8).prop_flat_map(|c| (prop::collection::vec(-3.0f64..3.0, c), 1..=c))
    }

    proptest! {
        #[test]
        fn feasible_and_optimal((g, h) in row_strategy()) {
            let row = RetargetRow::new(&g, h).unwrap();
            let t = retarget_row(&row).unwrap();
            let o = qp_oracle(&row).unwrap();
            let margin = (0..g.len()).filter(|&j| j != h - 1)
                .map(|j| t[h - 1] - t[j]).fold(f64::INFINITY, f64::min);
            prop_assert!(margin >= 1.0 - 1e-9);
            for (a, b) in t.iter().zip(&o) {
                prop_assert!((a - b).abs() <= 1e-6);
            }
        }

        #[test]
        fn idempotent((g, h) in row_strategy()) {
            let t = rt(&g, h);
            let tt = rt(&t, h);
            for (a, b) in t.iter().zip(&tt) {
                prop_assert!((a - b).abs() <= 1e-10);
            }
        }

        #[test]
        fn translation_equivariant((g, h) in row_strategy(), shift in -50.0f64..50.0) {
            let t = rt(&g, h);
            let shifted: Vec<f64> = g.iter().map(|v| v + shift).collect();
            let ts = rt(&shifted, h);
            for (a, b) in t.iter().zip(&ts) {
                prop_assert!((a + shift - b).abs() <= 1e-9);
            }
        }
    }
}
