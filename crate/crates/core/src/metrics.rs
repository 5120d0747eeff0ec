//! Prediction-quality and elasticity diagnostics.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::action_encoding::{encode_rbf, DiscountDepth, RbfConfig};
use crate::embedding::ContextEmbedding;
use crate::error::{Error, Result};
use crate::reward_model::{compose_slices, predictive_sd_with, PosteriorState};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub wape: f64,
    pub spearman_rho: f64,
    pub n: usize,
}

/// WAPE and Spearman correlation of `predicted` against `actual`.
pub fn evaluate(actual: &[f64], predicted: &[f64]) -> Result<EvalReport> {
    Ok(EvalReport {
        wape: wape(actual, predicted)?,
        spearman_rho: spearman(actual, predicted)?,
        n: actual.len(),
    })
}

fn check_lengths(actual: &[f64], predicted: &[f64]) -> Result<()> {
    if actual.len() != predicted.len() {
        return Err(Error::DimensionMismatch {
            expected: actual.len(),
            actual: predicted.len(),
        });
    }
    Ok(())
}

/// `sum |a - p| / sum |a|`.
pub fn wape(actual: &[f64], predicted: &[f64]) -> Result<f64> {
    check_lengths(actual, predicted)?;
    let denom: f64 = actual.iter().map(|a| a.abs()).sum();
    if !(denom > 0.0) {
        return Err(Error::Domain("WAPE undefined when sum |actual| = 0".into()));
    }
    let num: f64 = actual
        .iter()
        .zip(predicted)
        .map(|(a, p)| (a - p).abs())
        .sum();
    Ok(num / denom)
}

/// 1-based ranks; tied values share the mean of their positions.
fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&i, &j| xs[i].total_cmp(&xs[j]));
    let mut ranks = vec![0.0; xs.len()];
    let mut start = 0;
    while start < idx.len() {
        let mut end = start + 1;
        while end < idx.len() && xs[idx[end]] == xs[idx[start]] {
            end += 1;
        }
        let avg = (start + end + 1) as f64 / 2.0;
        for &i in &idx[start..end] {
            ranks[i] = avg;
        }
        start = end;
    }
    ranks
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut sab = 0.0;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        return 0.0;
    }
    (sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0)
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(actual: &[f64], predicted: &[f64]) -> Result<f64> {
    check_lengths(actual, predicted)?;
    if actual.len() < 2 {
        return Err(Error::Domain("Spearman correlation needs at least 2 points".into()));
    }
    if actual.iter().chain(predicted).any(|v| v.is_nan()) {
        return Err(Error::Domain("Spearman correlation of NaN".into()));
    }
    Ok(pearson(&average_ranks(actual), &average_ranks(predicted)))
}

/// `depths` evenly spaced points from `lo` to `hi` inclusive.
pub fn depth_grid(lo: f64, hi: f64, points: usize) -> Result<Vec<DiscountDepth>> {
    if points < 2 {
        return Err(Error::InvalidConfig("depth grid needs at least 2 points".into()));
    }
    (0..points)
        .map(|i| DiscountDepth::new(lo + (hi - lo) * i as f64 / (points - 1) as f64))
        .collect()
}

/// Posterior-mean predicted full-price value for every (customer, depth) pair.
///
/// Rows are customers, columns grid depths.
pub fn mean_prediction_grid(
    posterior: &PosteriorState,
    customers: &[ContextEmbedding],
    grid: &[DiscountDepth],
    rbf: &RbfConfig,
) -> Result<Vec<Vec<f64>>> {
    let encodings: Vec<_> = grid.iter().map(|&a| encode_rbf(a, rbf)).collect();
    customers
        .iter()
        .map(|c| {
            encodings
                .iter()
                .map(|e| posterior.mean_prediction(&compose_slices(c.as_slice(), e.as_slice())?))
                .collect()
        })
        .collect()
}

/// Mean over customers of the posterior-mean prediction at each grid depth.
pub fn elasticity_curve(
    posterior: &PosteriorState,
    customers: &[ContextEmbedding],
    grid: &[DiscountDepth],
    rbf: &RbfConfig,
) -> Result<Vec<f64>> {
    if customers.is_empty() {
        return Err(Error::Empty("customers".into()));
    }
    let rows = mean_prediction_grid(posterior, customers, grid, rbf)?;
    let n = rows.len() as f64;
    Ok((0..grid.len())
        .map(|k| rows.iter().map(|r| r[k]).sum::<f64>() / n)
        .collect())
}

/// Fraction of (customer, adjacent grid pair) cells where the predicted
/// full-price value does not decrease as the depth increases.
pub fn monotonicity_rate(
    posterior: &PosteriorState,
    customers: &[ContextEmbedding],
    grid: &[DiscountDepth],
    rbf: &RbfConfig,
) -> Result<f64> {
    if customers.is_empty() {
        return Err(Error::Empty("customers".into()));
    }
    if grid.len() < 2 {
        return Err(Error::InvalidConfig("grid needs at least 2 depths".into()));
    }
    let rows = mean_prediction_grid(posterior, customers, grid, rbf)?;
    Ok(monotone_fraction(&rows))
}

/// Fraction of adjacent pairs, over all rows, with `row[k + 1] >= row[k]`.
pub fn monotone_fraction(rows: &[Vec<f64>]) -> f64 {
    let mut ok = 0usize;
    let mut total = 0usize;
    for r in rows {
        for w in r.windows(2) {
            total += 1;
            if w[1] >= w[0] {
                ok += 1;
            }
        }
    }
    if total == 0 {
        return 1.0;
    }
    ok as f64 / total as f64
}

/// Mean predictive standard deviation across customers at each grid depth.
pub fn uncertainty_profile<R: Rng + ?Sized>(
    posterior: &PosteriorState,
    customers: &[ContextEmbedding],
    grid: &[DiscountDepth],
    rbf: &RbfConfig,
    n_samples: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if customers.is_empty() {
        return Err(Error::Empty("customers".into()));
    }
    let sampler = posterior.sampler()?;
    let encodings: Vec<_> = grid.iter().map(|&a| encode_rbf(a, rbf)).collect();
    let mut out = vec![0.0; grid.len()];
    for c in customers {
        for (k, e) in encodings.iter().enumerate() {
            let phi = compose_slices(c.as_slice(), e.as_slice())?;
            out[k] += predictive_sd_with(&sampler, &phi, n_samples, rng)?;
        }
    }
    let n = customers.len() as f64;
    out.iter_mut().for_each(|v| *v /= n);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn wape_examples() {
        assert!((wape(&[10.0, 20.0], &[12.0, 18.0]).unwrap() - 4.0 / 30.0).abs() < 1e-12);
        assert_eq!(wape(&[3.0, 4.0], &[3.0, 4.0]).unwrap(), 0.0);
        assert_eq!(wape(&[3.0, 4.0], &[0.0, 0.0]).unwrap(), 1.0);
        assert!(wape(&[0.0, 0.0], &[1.0, 1.0]).is_err());
        assert!(wape(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn spearman_examples() {
        assert!((spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]).unwrap() - 1.0).abs() < 1e-12);
        assert!((spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap() + 1.0).abs() < 1e-12);
        let r = spearman(&[1.0, 2.0, 3.0, 4.0], &[1.0, 3.0, 2.0, 4.0]).unwrap();
        assert!((r - 0.8).abs() < 1e-9);
        assert!(spearman(&[1.0], &[1.0]).is_err());
    }

    #[test]
    fn ties_get_average_rank() {
        assert_eq!(average_ranks(&[5.0, 1.0, 5.0, 3.0]), vec![3.5, 1.0, 3.5, 2.0]);
    }

    #[test]
    fn grid_endpoints() {
        let g = depth_grid(0.1, 0.6, 21).unwrap();
        assert_eq!(g.len(), 21);
        assert_eq!(g[0].value(), 0.1);
        assert!((g[20].value() - 0.6).abs() < 1e-15);
    }

    #[test]
    fn monotone_fraction_counts_pairs() {
        assert_eq!(monotone_fraction(&[vec![1.0, 2.0, 2.0], vec![3.0, 2.0, 1.0]]), 0.5);
    }

    proptest! {
        #[test]
        fn wape_scale_invariant(xs in proptest::collection::vec((0.1f64..100.0, 0.0f64..100.0), 1..30), c in 0.01f64..100.0) {
            let a: Vec<f64> = xs.iter().map(|p| p.0).collect();
            let p: Vec<f64> = xs.iter().map(|p| p.1).collect();
            let ca: Vec<f64> = a.iter().map(|v| v * c).collect();
            let cp: Vec<f64> = p.iter().map(|v| v * c).collect();
            prop_assert!((wape(&a, &p).unwrap() - wape(&ca, &cp).unwrap()).abs() < 1e-9);
            prop_assert!(wape(&a, &p).unwrap() >= 0.0);
        }

        #[test]
        fn spearman_monotone_transform_invariant(xs in proptest::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 2..30)) {
            let a: Vec<f64> = xs.iter().map(|p| p.0).collect();
            let p: Vec<f64> = xs.iter().map(|p| p.1).collect();
            let ta: Vec<f64> = a.iter().map(|v| v.exp()).collect();
            let tp: Vec<f64> = p.iter().map(|v| v * v * v + 2.0 * v).collect();
            let r = spearman(&a, &p).unwrap();
            prop_assert!(r.abs() <= 1.0);
            prop_assert!((r - spearman(&ta, &tp).unwrap()).abs() < 1e-9);
        }
    }
}
