//! Backtests, portfolio metrics, the λ heuristic and the perturbation study.

use chrono::NaiveDate;
use rayon::prelude::*;
use thiserror::Error;

use crate::estimation::{
    asset_stats, covariance_change, perturb_returns, CovarianceChange, EstimationError,
    PerturbationConfig,
};
use crate::models::{solve_model, solve_simultaneous, ModelError};
use crate::types::{
    Allocation, AssetStats, ModelConfig, ModelKind, ReturnMatrix, SolveReport, SolveStatus,
};

/// Weights above this count as held positions.
pub const POSITION_THRESHOLD: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalyticsError {
    #[error("allocation has {actual} weights but the return matrix has {expected} assets")]
    Dimension { expected: usize, actual: usize },
    #[error("return series is empty")]
    EmptySeries,
    #[error("{0} window contains no trading days")]
    EmptyPartition(&'static str),
    #[error("invalid split: {0}")]
    InvalidSplit(String),
    #[error("lambda grid is empty")]
    EmptyGrid,
    #[error("invalid lambda grid: {0}")]
    InvalidGrid(String),
    #[error("no grid point produced an optimal portfolio")]
    NoFrontierPoint,
    #[error("original allocation has no positive weights")]
    NoPositiveWeights,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Estimation(#[from] EstimationError),
}

/// Daily portfolio returns `sum_i r_it x_i`.
pub fn portfolio_series(returns: &ReturnMatrix, x: &Allocation) -> Result<Vec<f64>, AnalyticsError> {
    if x.len() != returns.n_assets() {
        return Err(AnalyticsError::Dimension {
            expected: returns.n_assets(),
            actual: x.len(),
        });
    }
    let r = returns.returns();
    let w = x.weights();
    Ok((0..returns.n_days())
        .map(|t| r.column(t).iter().zip(w).map(|(a, b)| a * b).sum())
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PortfolioMetrics {
    pub mean_daily_return: f64,
    /// Population standard deviation of the daily series.
    pub std_daily: f64,
    /// Worst single-day return.
    pub max_drawdown: f64,
    /// Compounded return over the window.
    pub cumulative_return: f64,
    pub n_positions: usize,
}

pub fn compute_metrics(series: &[f64], x: &Allocation) -> Result<PortfolioMetrics, AnalyticsError> {
    if series.is_empty() {
        return Err(AnalyticsError::EmptySeries);
    }
    let t = series.len() as f64;
    let mean = series.iter().sum::<f64>() / t;
    let var = series.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / t;
    Ok(PortfolioMetrics {
        mean_daily_return: mean,
        std_daily: var.sqrt(),
        max_drawdown: series.iter().copied().fold(f64::INFINITY, f64::min),
        cumulative_return: series.iter().map(|v| 1.0 + v).product::<f64>() - 1.0,
        n_positions: x.positions(POSITION_THRESHOLD),
    })
}

/// Inclusive date interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DateRange {
    pub start: NaiveDate,
    pub end: NaiveDate,
}

impl DateRange {
    pub fn new(start: NaiveDate, end: NaiveDate) -> Result<Self, AnalyticsError> {
        if end < start {
            return Err(AnalyticsError::InvalidSplit(format!(
                "range ends ({end}) before it starts ({start})"
            )));
        }
        Ok(Self { start, end })
    }

    pub fn contains(&self, d: NaiveDate) -> bool {
        self.start <= d && d <= self.end
    }
}

/// Train and test windows; the train window ends strictly before the test
/// window starts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitSpec {
    train: DateRange,
    test: DateRange,
}

impl SplitSpec {
    pub fn new(train: DateRange, test: DateRange) -> Result<Self, AnalyticsError> {
        if train.end >= test.start {
            return Err(AnalyticsError::InvalidSplit(format!(
                "train window ends {} but test window starts {}",
                train.end, test.start
            )));
        }
        Ok(Self { train, test })
    }

    /// Train on `[start, train_end]`, test on the days after `train_end`
    /// up to and including `test_end`.
    pub fn by_end_dates(
        start: NaiveDate,
        train_end: NaiveDate,
        test_end: NaiveDate,
    ) -> Result<Self, AnalyticsError> {
        let test_start = train_end
            .succ_opt()
            .ok_or_else(|| AnalyticsError::InvalidSplit("train end out of range".into()))?;
        Self::new(
            DateRange::new(start, train_end)?,
            DateRange::new(test_start, test_end)?,
        )
    }

    pub fn train(&self) -> DateRange {
        self.train
    }

    pub fn test(&self) -> DateRange {
        self.test
    }
}

/// Splits the columns of `returns` by date. Days outside both windows are
/// discarded.
pub fn train_test_split(
    returns: &ReturnMatrix,
    spec: &SplitSpec,
) -> Result<(ReturnMatrix, ReturnMatrix), AnalyticsError> {
    let train = returns.select_columns(|_, d| spec.train.contains(d));
    let test = returns.select_columns(|_, d| spec.test.contains(d));
    if train.n_days() == 0 {
        return Err(AnalyticsError::EmptyPartition("train"));
    }
    if test.n_days() == 0 {
        return Err(AnalyticsError::EmptyPartition("test"));
    }
    Ok((train, test))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GridSpacing {
    #[default]
    Log,
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambdaGrid {
    pub min: f64,
    pub max: f64,
    pub n: usize,
    pub spacing: GridSpacing,
}

impl Default for LambdaGrid {
    fn default() -> Self {
        Self {
            min: 1e-3,
            max: 1e4,
            n: 100,
            spacing: GridSpacing::Log,
        }
    }
}

impl LambdaGrid {
    pub fn values(&self) -> Result<Vec<f64>, AnalyticsError> {
        if self.n == 0 {
            return Err(AnalyticsError::EmptyGrid);
        }
        let finite = self.min.is_finite() && self.max.is_finite();
        if !finite || self.min < 0.0 || self.max < self.min {
            return Err(AnalyticsError::InvalidGrid(format!(
                "need 0 <= min <= max, got [{}, {}]",
                self.min, self.max
            )));
        }
        if self.n == 1 {
            return Ok(vec![self.min]);
        }
        let steps = (self.n - 1) as f64;
        Ok(match self.spacing {
            GridSpacing::Linear => (0..self.n)
                .map(|k| self.min + (self.max - self.min) * k as f64 / steps)
                .collect(),
            GridSpacing::Log => {
                if self.min <= 0.0 {
                    return Err(AnalyticsError::InvalidGrid(
                        "log spacing needs a positive minimum".into(),
                    ));
                }
                let (a, b) = (self.min.ln(), self.max.ln());
                let mut v: Vec<f64> = (0..self.n)
                    .map(|k| (a + (b - a) * k as f64 / steps).exp())
                    .collect();
                v[0] = self.min;
                v[self.n - 1] = self.max;
                v
            }
        })
    }
}

/// One λ of the sweep. Coordinates are in percent; `None` when the solve
/// did not reach optimality.
#[derive(Debug, Clone, PartialEq)]
pub struct FrontierPoint {
    pub lambda: f64,
    pub status: SolveStatus,
    pub std_pct: Option<f64>,
    pub return_pct: Option<f64>,
    pub distance: Option<f64>,
    pub allocation: Option<Allocation>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub points: Vec<FrontierPoint>,
    /// `(min std%, max return%)` over the optimal points.
    pub ideal: (f64, f64),
    /// Index into `points` of the chosen λ.
    pub chosen: usize,
}

impl SweepResult {
    pub fn lambda_star(&self) -> f64 {
        self.points[self.chosen].lambda
    }

    pub fn chosen_point(&self) -> &FrontierPoint {
        &self.points[self.chosen]
    }
}

/// Solves the simultaneous model for every λ and picks the point nearest
/// the ideal `(min std%, max return%)`. Ties go to the smaller λ.
pub fn lambda_sweep(
    stats: &AssetStats,
    lambdas: &[f64],
    base: &ModelConfig,
) -> Result<SweepResult, AnalyticsError> {
    if lambdas.is_empty() {
        return Err(AnalyticsError::EmptyGrid);
    }
    if let Some(bad) = lambdas.iter().find(|l| !(**l >= 0.0) || !l.is_finite()) {
        return Err(AnalyticsError::InvalidGrid(format!("lambda {bad} is not >= 0")));
    }
    let mut points = lambdas
        .par_iter()
        .map(|&lambda| {
            let cfg = ModelConfig { lambda, ..*base };
            let rep = solve_simultaneous(stats, &cfg)?;
            let coords = rep.allocation.as_ref().map(|a| {
                let w = a.weights();
                (
                    100.0 * stats.portfolio_variance(w).max(0.0).sqrt(),
                    100.0 * stats.portfolio_return(w),
                )
            });
            Ok(FrontierPoint {
                lambda,
                status: rep.status,
                std_pct: coords.map(|c| c.0),
                return_pct: coords.map(|c| c.1),
                distance: None,
                allocation: rep.allocation,
            })
        })
        .collect::<Result<Vec<_>, ModelError>>()?;

    let solved = || points.iter().filter_map(|p| p.std_pct.zip(p.return_pct));
    if solved().next().is_none() {
        return Err(AnalyticsError::NoFrontierPoint);
    }
    let ideal = solved().fold((f64::INFINITY, f64::NEG_INFINITY), |(s, r), (ps, pr)| {
        (s.min(ps), r.max(pr))
    });
    let mut chosen: Option<usize> = None;
    for k in 0..points.len() {
        let Some((s, r)) = points[k].std_pct.zip(points[k].return_pct) else {
            continue;
        };
        let d = (s - ideal.0).hypot(r - ideal.1);
        points[k].distance = Some(d);
        let better = match chosen {
            None => true,
            Some(c) => {
                let dc = points[c].distance.unwrap_or(f64::INFINITY);
                d < dc || (d == dc && points[k].lambda < points[c].lambda)
            }
        };
        if better {
            chosen = Some(k);
        }
    }
    Ok(SweepResult {
        points,
        ideal,
        chosen: chosen.unwrap_or(0),
    })
}

/// Mean absolute percent change over the originally held positions. A
/// position dropped to zero counts as 100%.
pub fn allocation_change(before: &Allocation, after: &Allocation) -> Result<f64, AnalyticsError> {
    if before.len() != after.len() {
        return Err(AnalyticsError::Dimension {
            expected: before.len(),
            actual: after.len(),
        });
    }
    let changes: Vec<f64> = before
        .weights()
        .iter()
        .zip(after.weights())
        .filter(|(b, _)| **b > POSITION_THRESHOLD)
        .map(|(b, a)| (a - b).abs() / b)
        .collect();
    if changes.is_empty() {
        return Err(AnalyticsError::NoPositiveWeights);
    }
    Ok(100.0 * changes.iter().sum::<f64>() / changes.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityRow {
    pub model: ModelKind,
    /// Average absolute allocation change in percent.
    pub change_pct: Option<f64>,
    /// Why the change is missing.
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityReport {
    pub covariance: CovarianceChange,
    pub rows: Vec<SensitivityRow>,
}

fn solve_on(
    model: ModelKind,
    returns: &ReturnMatrix,
    stats: &AssetStats,
    cfg: &ModelConfig,
) -> Result<Allocation, String> {
    match solve_model(model, returns, stats, cfg) {
        Ok(SolveReport {
            allocation: Some(a),
            ..
        }) => Ok(a),
        Ok(rep) => Err(format!("{:?}", rep.status).to_lowercase()),
        Err(e) => Err(e.to_string()),
    }
}

/// Solves each model on `returns` and on a perturbed copy and reports how
/// far the allocations move. Rows keep the order of `models`.
pub fn sensitivity_run(
    returns: &ReturnMatrix,
    models: &[(ModelKind, ModelConfig)],
    pcfg: &PerturbationConfig,
) -> Result<SensitivityReport, AnalyticsError> {
    let perturbed = perturb_returns(returns, pcfg)?;
    let before = asset_stats(returns)?;
    let after = asset_stats(&perturbed)?;
    let covariance = covariance_change(before.covariance(), after.covariance())?;
    let rows = models
        .par_iter()
        .map(|(model, cfg)| {
            let outcome = solve_on(*model, returns, &before, cfg).and_then(|x0| {
                let x1 = solve_on(*model, &perturbed, &after, cfg)?;
                allocation_change(&x0, &x1).map_err(|e| e.to_string())
            });
            match outcome {
                Ok(c) => SensitivityRow {
                    model: *model,
                    change_pct: Some(c),
                    failure: None,
                },
                Err(e) => SensitivityRow {
                    model: *model,
                    change_pct: None,
                    failure: Some(e),
                },
            }
        })
        .collect();
    Ok(SensitivityReport { covariance, rows })
}

/// One model's train-window solve and its metrics on both windows.
#[derive(Debug, Clone, PartialEq)]
pub struct BacktestRow {
    pub report: SolveReport,
    pub in_sample: Option<PortfolioMetrics>,
    pub out_of_sample: Option<PortfolioMetrics>,
}

/// Fits every model on the train window and evaluates on both windows.
/// Models run one after another so their wall times are comparable.
pub fn backtest(
    returns: &ReturnMatrix,
    split: &SplitSpec,
    models: &[(ModelKind, ModelConfig)],
) -> Result<Vec<BacktestRow>, AnalyticsError> {
    let (train, test) = train_test_split(returns, split)?;
    let stats = asset_stats(&train)?;
    models
        .iter()
        .map(|(model, cfg)| {
            let report = solve_model(*model, &train, &stats, cfg)?;
            let (in_sample, out_of_sample) = match &report.allocation {
                Some(x) => (
                    Some(compute_metrics(&portfolio_series(&train, x)?, x)?),
                    Some(compute_metrics(&portfolio_series(&test, x)?, x)?),
                ),
                None => (None, None),
            };
            Ok(BacktestRow {
                report,
                in_sample,
                out_of_sample,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};

    fn alloc(w: &[f64]) -> Allocation {
        Allocation::new(w.to_vec()).unwrap()
    }

    #[test]
    fn series_examples() {
        let r = ReturnMatrix::from_rows(&[vec![0.1, 0.0], vec![-0.1, 0.2]]).unwrap();
        let s = portfolio_series(&r, &alloc(&[0.5, 0.5])).unwrap();
        assert!((s[0] - 0.0).abs() < 1e-15 && (s[1] - 0.1).abs() < 1e-15);
        assert_eq!(portfolio_series(&r, &alloc(&[0.0, 1.0])).unwrap(), vec![-0.1, 0.2]);
        assert!(matches!(
            portfolio_series(&r, &alloc(&[1.0])),
            Err(AnalyticsError::Dimension { .. })
        ));
    }

    #[test]
    fn metrics_examples() {
        let x = alloc(&[1.0]);
        let m = compute_metrics(&[0.01, 0.01], &x).unwrap();
        assert_eq!(m.mean_daily_return, 0.01);
        assert_eq!(m.std_daily, 0.0);
        assert_eq!(m.max_drawdown, 0.01);
        assert!((m.cumulative_return - 0.0201).abs() < 1e-15);
        let m = compute_metrics(&[0.1, -0.1], &x).unwrap();
        assert_eq!(m.mean_daily_return, 0.0);
        assert_eq!(m.max_drawdown, -0.1);
        assert!((m.cumulative_return - -0.01).abs() < 1e-15);
        assert_eq!(m.n_positions, 1);
        assert_eq!(compute_metrics(&[], &x), Err(AnalyticsError::EmptySeries));
    }

    #[test]
    fn split_examples() {
        let r = ReturnMatrix::from_rows(&[(0..10).map(|k| k as f64 / 100.0).collect()]).unwrap();
        let d = r.dates().to_vec();
        let spec = SplitSpec::by_end_dates(d[0], d[4], d[9]).unwrap();
        let (a, b) = train_test_split(&r, &spec).unwrap();
        assert_eq!((a.n_days(), b.n_days()), (5, 5));
        assert!(a.dates().last() < b.dates().first());

        let early = d[0].pred_opt().unwrap();
        let spec = SplitSpec::by_end_dates(early - chrono::Days::new(5), early, d[9]).unwrap();
        assert_eq!(
            train_test_split(&r, &spec),
            Err(AnalyticsError::EmptyPartition("train"))
        );
        let overlap = SplitSpec::new(
            DateRange::new(d[0], d[5]).unwrap(),
            DateRange::new(d[5], d[9]).unwrap(),
        );
        assert!(matches!(overlap, Err(AnalyticsError::InvalidSplit(_))));
    }

    #[test]
    fn grid_values() {
        let g = LambdaGrid::default().values().unwrap();
        assert_eq!(g.len(), 100);
        assert_eq!((g[0], g[99]), (1e-3, 1e4));
        let ratio = g[1] / g[0];
        assert!(g.windows(2).all(|w| (w[1] / w[0] - ratio).abs() < 1e-9));
        let lin = LambdaGrid {
            min: 0.0,
            max: 10.0,
            n: 11,
            spacing: GridSpacing::Linear,
        };
        assert_eq!(lin.values().unwrap()[3], 3.0);
        let bad = LambdaGrid {
            min: 0.0,
            spacing: GridSpacing::Log,
            ..LambdaGrid::default()
        };
        assert!(bad.values().is_err());
    }

    fn two_asset() -> AssetStats {
        AssetStats::new(
            DVector::from_column_slice(&[0.001, 0.003]),
            DMatrix::from_row_slice(2, 2, &[0.0001, 0.0, 0.0, 0.0009]),
        )
        .unwrap()
    }

    #[test]
    fn singleton_sweep() {
        let res = lambda_sweep(&two_asset(), &[2.0], &ModelConfig::default()).unwrap();
        assert_eq!(res.lambda_star(), 2.0);
        assert_eq!(res.chosen_point().distance, Some(0.0));
    }

    #[test]
    fn sweep_endpoints_match_closed_form() {
        let s = two_asset();
        let res = lambda_sweep(&s, &[0.0, 1e9], &ModelConfig::default()).unwrap();
        // lambda = 0: all in the higher-mean asset.
        let p0 = &res.points[0];
        assert!((p0.return_pct.unwrap() - 0.3).abs() < 1e-9);
        assert!((p0.std_pct.unwrap() - 3.0).abs() < 1e-9);
        // lambda -> inf: minimum variance, w0 = v2 / (v1 + v2).
        let w0 = 0.0009 / 0.0010;
        let p1 = &res.points[1];
        let sd = (w0 * w0 * 0.0001 + (1.0 - w0) * (1.0 - w0) * 0.0009_f64).sqrt();
        assert!((p1.std_pct.unwrap() - 100.0 * sd).abs() < 1e-6);
        // Neither dominates; the ideal point mixes their coordinates.
        assert!((res.ideal.0 - p1.std_pct.unwrap()).abs() < 1e-12);
        assert!((res.ideal.1 - p0.return_pct.unwrap()).abs() < 1e-12);
    }

    #[test]
    fn allocation_change_examples() {
        let a = alloc(&[0.5, 0.5, 0.0]);
        assert_eq!(allocation_change(&a, &a).unwrap(), 0.0);
        let b = alloc(&[0.5, 0.0, 0.5]);
        assert!((allocation_change(&a, &b).unwrap() - 50.0).abs() < 1e-12);
    }

    #[test]
    fn sensitivity_deterministic() {
        let r = ReturnMatrix::from_rows(&[
            vec![0.01, -0.02, 0.015, 0.003, -0.004],
            vec![0.002, 0.004, -0.001, 0.0, 0.006],
            vec![-0.01, 0.02, 0.0, 0.01, -0.002],
        ])
        .unwrap();
        let models: Vec<_> = [ModelKind::Markowitz, ModelKind::MaxDrawdown]
            .into_iter()
            .map(|m| (m, ModelConfig::with_rho(-1.0)))
            .collect();
        let p = PerturbationConfig::new(1000.0, 7).unwrap();
        let a = sensitivity_run(&r, &models, &p).unwrap();
        let b = sensitivity_run(&r, &models, &p).unwrap();
        assert_eq!(a, b);
        assert!(a.rows.iter().all(|row| row.change_pct.is_some()));
    }
}
