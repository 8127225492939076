//! Returns, moment estimates and random return perturbations.
//!
//! Returns are simple (arithmetic) returns, `P[t+1] / P[t] - 1`, because the
//! portfolio return `sum_i r_i x_i` is exactly linear in them. Covariances
//! use the population divisor `1/T`, matching the `1/T` normalisation of the
//! mean-absolute-deviation and standard-deviation formulas used elsewhere in
//! the crate. Users comparing against `T - 1` estimators should expect a
//! factor of `T / (T - 1)`.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use thiserror::Error;

use crate::types::{AssetStats, DataError, PriceMatrix, ReturnMatrix};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimationError {
    #[error("need at least {required} observations, got {actual}")]
    InsufficientData { required: usize, actual: usize },
    #[error("dimension mismatch: {left:?} vs {right:?}")]
    DimensionMismatch {
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("perturbation divisor must be positive and finite, got {0}")]
    InvalidDivisor(f64),
    #[error(transparent)]
    Data(#[from] DataError),
}

/// `r[i, t] = P[i, t+1] / P[i, t] - 1`; the output has one fewer column and
/// each return is dated by its closing day.
pub fn compute_simple_returns(prices: &PriceMatrix) -> Result<ReturnMatrix, EstimationError> {
    let days = prices.n_days();
    if days < 2 {
        return Err(EstimationError::InsufficientData {
            required: 2,
            actual: days,
        });
    }
    let p = prices.prices();
    let returns = DMatrix::from_fn(prices.n_assets(), days - 1, |i, t| {
        p[(i, t + 1)] / p[(i, t)] - 1.0
    });
    Ok(ReturnMatrix::new(
        prices.tickers().to_vec(),
        prices.dates()[1..].to_vec(),
        returns,
    )?)
}

/// Arithmetic mean of each asset's returns over the window.
pub fn mean_returns(returns: &ReturnMatrix) -> Result<DVector<f64>, EstimationError> {
    let t = returns.n_days();
    if t == 0 || returns.n_assets() == 0 {
        return Err(EstimationError::InsufficientData {
            required: 1,
            actual: t.min(returns.n_assets()),
        });
    }
    let r = returns.returns();
    Ok(DVector::from_fn(returns.n_assets(), |i, _| {
        r.row(i).iter().sum::<f64>() / t as f64
    }))
}

/// Population covariance `(1/T) sum_t (r_i - mean_i)(r_j - mean_j)`.
///
/// The result is symmetrised exactly so it passes the `AssetStats` checks.
pub fn covariance(returns: &ReturnMatrix) -> Result<DMatrix<f64>, EstimationError> {
    let t = returns.n_days();
    if t < 2 {
        return Err(EstimationError::InsufficientData {
            required: 2,
            actual: t,
        });
    }
    let mean = mean_returns(returns)?;
    let r = returns.returns();
    let centered = DMatrix::from_fn(r.nrows(), t, |i, k| r[(i, k)] - mean[i]);
    let mut cov = &centered * centered.transpose() / t as f64;
    let n = cov.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (cov[(i, j)] + cov[(j, i)]);
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }
    Ok(cov)
}

/// Mean vector and covariance for a window, validated as [`AssetStats`].
pub fn asset_stats(returns: &ReturnMatrix) -> Result<AssetStats, EstimationError> {
    Ok(AssetStats::new(mean_returns(returns)?, covariance(returns)?)?)
}

/// Population standard deviation of each asset over the window.
pub fn asset_std_devs(returns: &ReturnMatrix) -> Result<DVector<f64>, EstimationError> {
    let mean = mean_returns(returns)?;
    let r = returns.returns();
    let t = returns.n_days() as f64;
    Ok(DVector::from_fn(returns.n_assets(), |i, _| {
        (r.row(i).iter().map(|v| (v - mean[i]).powi(2)).sum::<f64>() / t).sqrt()
    }))
}

/// Scale and seed of the return perturbation `r' = r + N(0, sigma_s) / c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerturbationConfig {
    c: f64,
    seed: u64,
}

impl PerturbationConfig {
    pub const DEFAULT_DIVISOR: f64 = 1000.0;

    pub fn new(c: f64, seed: u64) -> Result<Self, EstimationError> {
        if !(c > 0.0) || !c.is_finite() {
            return Err(EstimationError::InvalidDivisor(c));
        }
        Ok(Self { c, seed })
    }

    pub fn with_seed(seed: u64) -> Self {
        Self {
            c: Self::DEFAULT_DIVISOR,
            seed,
        }
    }

    pub fn divisor(&self) -> f64 {
        self.c
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

/// Adds `N(0, sigma_s) / c` to every return of asset `s`, where `sigma_s` is
/// the asset's population standard deviation over the supplied window.
///
/// Draws come from ChaCha8 seeded with `cfg.seed()`, one stream per asset
/// (stream id = asset row index), consumed in date order. Assets are
/// processed in parallel and the output does not depend on thread count.
pub fn perturb_returns(
    returns: &ReturnMatrix,
    cfg: &PerturbationConfig,
) -> Result<ReturnMatrix, EstimationError> {
    let sigma = asset_std_devs(returns)?;
    let r = returns.returns();
    let t = returns.n_days();
    let rows: Vec<Vec<f64>> = (0..returns.n_assets())
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(i as u64);
            let scale = sigma[i] / cfg.c;
            (0..t)
                .map(|k| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    r[(i, k)] + scale * z
                })
                .collect()
        })
        .collect();
    let perturbed = DMatrix::from_fn(returns.n_assets(), t, |i, k| rows[i][k]);
    Ok(ReturnMatrix::new(
        returns.tickers().to_vec(),
        returns.dates().to_vec(),
        perturbed,
    )?)
}

/// Change between two covariance matrices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovarianceChange {
    /// Mean over all `n^2` entries of `|after - before|`.
    pub avg_abs_diff: f64,
    /// Mean over all entries of `|before|`.
    pub avg_abs_before: f64,
    /// `avg_abs_diff / avg_abs_before` (zero when both are zero).
    pub relative_change: f64,
}

pub fn covariance_change(
    before: &DMatrix<f64>,
    after: &DMatrix<f64>,
) -> Result<CovarianceChange, EstimationError> {
    if before.shape() != after.shape() {
        return Err(EstimationError::DimensionMismatch {
            left: before.shape(),
            right: after.shape(),
        });
    }
    let count = before.len().max(1) as f64;
    let avg_abs_diff = before
        .iter()
        .zip(after.iter())
        .map(|(a, b)| (b - a).abs())
        .sum::<f64>()
        / count;
    let avg_abs_before = before.iter().map(|v| v.abs()).sum::<f64>() / count;
    let relative_change = if avg_abs_diff == 0.0 {
        0.0
    } else {
        avg_abs_diff / avg_abs_before
    };
    Ok(CovarianceChange {
        avg_abs_diff,
        avg_abs_before,
        relative_change,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;

    fn prices(rows: &[&[f64]]) -> PriceMatrix {
        let days = rows[0].len();
        let start = NaiveDate::from_ymd_opt(2020, 2, 3).unwrap();
        PriceMatrix::new(
            (0..rows.len()).map(|i| format!("T{i}")).collect(),
            (0..days)
                .map(|k| start + chrono::Days::new(k as u64))
                .collect(),
            DMatrix::from_fn(rows.len(), days, |i, t| rows[i][t]),
        )
        .unwrap()
    }

    fn assert_close(a: f64, b: f64) {
        assert!((a - b).abs() < 1e-12, "{a} vs {b}");
    }

    #[test]
    fn constant_prices_give_zero_returns() {
        let r = compute_simple_returns(&prices(&[&[100.0, 100.0, 100.0]])).unwrap();
        assert_eq!(r.returns().as_slice(), &[0.0, 0.0]);
        assert_eq!(r.n_days(), 2);
    }

    #[test]
    fn simple_return_formula() {
        let r = compute_simple_returns(&prices(&[&[100.0, 110.0]])).unwrap();
        assert_close(r.returns()[(0, 0)], 0.10);
        let r = compute_simple_returns(&prices(&[&[100.0, 110.0, 99.0]])).unwrap();
        assert_close(r.returns()[(0, 0)], 0.10);
        assert_close(r.returns()[(0, 1)], -0.10);
        assert_eq!(r.dates()[0], NaiveDate::from_ymd_opt(2020, 2, 4).unwrap());
    }

    #[test]
    fn single_day_is_rejected() {
        assert!(matches!(
            compute_simple_returns(&prices(&[&[100.0]])),
            Err(EstimationError::InsufficientData { .. })
        ));
    }

    #[test]
    fn means() {
        let r = ReturnMatrix::from_rows(&[vec![0.1, -0.1]]).unwrap();
        assert_close(mean_returns(&r).unwrap()[0], 0.0);
        let r = ReturnMatrix::from_rows(&[vec![0.02]]).unwrap();
        assert_close(mean_returns(&r).unwrap()[0], 0.02);
        let r = ReturnMatrix::from_rows(&[vec![0.1, 0.3], vec![0.0, 0.2]]).unwrap();
        let m = mean_returns(&r).unwrap();
        assert_close(m[0], 0.2);
        assert_close(m[1], 0.1);
        let empty = ReturnMatrix::from_rows(&[]).unwrap();
        assert!(mean_returns(&empty).is_err());
    }

    #[test]
    fn covariance_examples() {
        let r = ReturnMatrix::from_rows(&[vec![0.03, 0.03, 0.03]]).unwrap();
        assert_eq!(covariance(&r).unwrap()[(0, 0)], 0.0);

        let row = vec![0.01, -0.02, 0.05, 0.0];
        let r = ReturnMatrix::from_rows(&[row.clone(), row]).unwrap();
        let c = covariance(&r).unwrap();
        assert_close(c[(0, 0)], c[(0, 1)]);
        assert_close(c[(1, 1)], c[(0, 1)]);

        let r = ReturnMatrix::from_rows(&[vec![0.1, -0.1], vec![-0.1, 0.1]]).unwrap();
        let c = covariance(&r).unwrap();
        assert_close(c[(0, 0)], 0.01);
        assert_close(c[(0, 1)], -0.01);
        assert_close(c[(1, 0)], -0.01);
        assert_close(c[(1, 1)], 0.01);

        let short = ReturnMatrix::from_rows(&[vec![0.1]]).unwrap();
        assert!(covariance(&short).is_err());
    }

    #[test]
    fn perturbation_limits() {
        let r = ReturnMatrix::from_rows(&[
            vec![0.01, -0.02, 0.03, 0.00],
            vec![0.02, 0.02, 0.02, 0.02],
        ])
        .unwrap();
        let tiny = perturb_returns(&r, &PerturbationConfig::new(1e15, 3).unwrap()).unwrap();
        let max = (tiny.returns() - r.returns()).abs().max();
        assert!(max < 1e-12 && max > 0.0);
        // constant row has zero std, hence zero noise
        let p = perturb_returns(&r, &PerturbationConfig::with_seed(9)).unwrap();
        assert_eq!(p.returns().row(1), r.returns().row(1));
        assert_ne!(p.returns().row(0), r.returns().row(0));
        let again = perturb_returns(&r, &PerturbationConfig::with_seed(9)).unwrap();
        assert_eq!(p, again);
        let other = perturb_returns(&r, &PerturbationConfig::with_seed(10)).unwrap();
        assert_ne!(p, other);
    }

    #[test]
    fn invalid_divisor() {
        assert!(PerturbationConfig::new(0.0, 1).is_err());
        assert!(PerturbationConfig::new(f64::INFINITY, 1).is_err());
    }

    #[test]
    fn covariance_change_examples() {
        let a = DMatrix::from_element(2, 2, 0.5);
        let c = covariance_change(&a, &a).unwrap();
        assert_eq!((c.avg_abs_diff, c.relative_change), (0.0, 0.0));
        let c = covariance_change(
            &DMatrix::from_element(1, 1, 2.0),
            &DMatrix::from_element(1, 1, 3.0),
        )
        .unwrap();
        assert_eq!((c.avg_abs_diff, c.relative_change), (1.0, 0.5));
        assert!(covariance_change(&a, &DMatrix::zeros(3, 3)).is_err());
    }
}
