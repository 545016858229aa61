//! Prediction metrics: concordance, squared L2 curve distance, count MSE,
//! and Spearman rank correlation.

use crate::data::{curve_integral, Curve};
use crate::error::{BoostError, Result};

/// Fraction of correctly ordered pairs among pairs with different observed
/// counts. Tied predictions score one half.
pub fn c_index(predicted: &[f64], observed: &[f64]) -> Result<f64> {
    if predicted.len() != observed.len() {
        return Err(BoostError::DimensionMismatch {
            expected: observed.len(),
            got: predicted.len(),
        });
    }
    let mut score = 0.0;
    let mut pairs = 0usize;
    for i in 0..observed.len() {
        for j in i + 1..observed.len() {
            if observed[i] == observed[j] {
                continue;
            }
            pairs += 1;
            let (lo, hi) = if observed[i] < observed[j] { (i, j) } else { (j, i) };
            if predicted[lo] < predicted[hi] {
                score += 1.0;
            } else if predicted[lo] == predicted[hi] {
                score += 0.5;
            }
        }
    }
    if pairs == 0 {
        return Err(BoostError::UndefinedMetric(
            "no pairs with distinct observed counts".into(),
        ));
    }
    Ok(score / pairs as f64)
}

/// Squared L2 distance over the region both curves observe.
pub fn l2_distance(a: &Curve, b: &Curve) -> Result<f64> {
    let d = a.zip_with(b, |x, y| x - y)?;
    curve_integral(&d, &d)
}

pub fn mse_counts(predicted: &[f64], observed: &[f64]) -> Result<f64> {
    if predicted.len() != observed.len() {
        return Err(BoostError::DimensionMismatch {
            expected: observed.len(),
            got: predicted.len(),
        });
    }
    if observed.is_empty() {
        return Err(BoostError::UndefinedMetric("no individuals observed at the evaluation time".into()));
    }
    Ok(predicted
        .iter()
        .zip(observed)
        .map(|(p, o)| (p - o).powi(2))
        .sum::<f64>()
        / observed.len() as f64)
}

/// 1-based ranks with ties given their average rank.
pub fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && xs[order[j + 1]] == xs[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Pearson correlation of average ranks.
pub fn spearman(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(BoostError::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    let (ra, rb) = (average_ranks(a), average_ranks(b));
    let n = a.len() as f64;
    let ma = ra.iter().sum::<f64>() / n;
    let mb = rb.iter().sum::<f64>() / n;
    let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = ra.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = rb.iter().map(|y| (y - mb).powi(2)).sum();
    if va == 0.0 || vb == 0.0 {
        return Err(BoostError::UndefinedMetric("constant input has no rank correlation".into()));
    }
    Ok(cov / (va * vb).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::TimeGrid;
    use proptest::prelude::*;

    #[test]
    fn c_index_examples() {
        let obs = [1.0, 2.0, 3.0, 5.0];
        assert_eq!(c_index(&obs, &obs).unwrap(), 1.0);
        let neg: Vec<f64> = obs.iter().map(|v| -v).collect();
        assert_eq!(c_index(&neg, &obs).unwrap(), 0.0);
        let c = c_index(&[10.0, 30.0, 20.0], &[1.0, 2.0, 3.0]).unwrap();
        assert!((c - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(c_index(&[1.0, 1.0], &[0.0, 4.0]).unwrap(), 0.5);
        assert!(matches!(c_index(&[1.0, 2.0], &[3.0, 3.0]), Err(BoostError::UndefinedMetric(_))));
    }

    #[test]
    fn l2_examples() {
        let g = TimeGrid::new(120.0, 120).unwrap();
        let a = Curve::from_fn(g, |t| t.sqrt());
        assert_eq!(l2_distance(&a, &a).unwrap(), 0.0);
        let b = a.map(|v| v + 1.0);
        assert!((l2_distance(&a, &b).unwrap() - 120.0).abs() < 1e-6);
    }

    #[test]
    fn l2_matches_refined_quadrature() {
        let f = |t: f64| (t / 7.0).sin() * t;
        let h = |t: f64| 0.3 * t;
        let coarse = TimeGrid::new(30.0, 300).unwrap();
        let d = l2_distance(&Curve::from_fn(coarse, f), &Curve::from_fn(coarse, h)).unwrap();
        let fine = TimeGrid::new(30.0, 30_000).unwrap();
        let r = l2_distance(&Curve::from_fn(fine, f), &Curve::from_fn(fine, h)).unwrap();
        assert!((d - r).abs() < 1e-3 * r);
    }

    #[test]
    fn mse_and_spearman() {
        assert_eq!(mse_counts(&[1.0, 3.0], &[2.0, 1.0]).unwrap(), 2.5);
        assert_eq!(average_ranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
        assert!((spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 35.0]).unwrap() - 1.0).abs() < 1e-15);
        assert!((spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap() + 1.0).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn c_index_invariant_to_monotone_transform(
            pairs in proptest::collection::vec((-50.0f64..50.0, 0u8..6), 3..30)
        ) {
            let pred: Vec<f64> = pairs.iter().map(|p| p.0).collect();
            let obs: Vec<f64> = pairs.iter().map(|p| p.1 as f64).collect();
            prop_assume!(obs.iter().any(|&o| o != obs[0]));
            let base = c_index(&pred, &obs).unwrap();
            let transformed: Vec<f64> = pred.iter().map(|v| (v / 10.0).exp() * 3.0 + 1.0).collect();
            prop_assert_eq!(base, c_index(&transformed, &obs).unwrap());
            prop_assert!((0.0..=1.0).contains(&base));
        }
    }
}
