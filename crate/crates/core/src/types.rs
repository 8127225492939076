//! Domain types shared by every module: price and return panels, moment
//! estimates, allocations, model configuration and solve reports.
//!
//! All types are immutable once constructed. Constructors check the
//! invariants listed on each type and return [`DataError`] otherwise.

use std::fmt;

use chrono::NaiveDate;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use thiserror::Error;

/// Absolute tolerance on `sum(x) = 1`.
pub const BUDGET_TOL: f64 = 1e-8;
/// Slack allowed above a per-asset cap.
pub const CAP_TOL: f64 = 1e-9;
/// Elementwise symmetry tolerance for covariance matrices.
pub const SYMMETRY_TOL: f64 = 1e-12;
/// Smallest eigenvalue accepted for a positive semi-definite matrix.
pub const PSD_TOL: f64 = 1e-10;

/// Errors raised when building domain types from raw data.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum DataError {
    #[error("dimension mismatch in {what}: expected {expected}, got {actual}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("need at least {required} {what}, got {actual}")]
    TooFew {
        what: &'static str,
        required: usize,
        actual: usize,
    },
    #[error("dates must be strictly increasing (offending date {0})")]
    UnorderedDates(NaiveDate),
    #[error("non-positive price {value} for {ticker} on {date}")]
    NonPositivePrice {
        ticker: String,
        date: NaiveDate,
        value: f64,
    },
    #[error("return {value} for {ticker} on {date} is not above -1")]
    ReturnOutOfRange {
        ticker: String,
        date: NaiveDate,
        value: f64,
    },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("covariance is not symmetric: |s[{i},{j}] - s[{j},{i}]| = {diff:e}")]
    NotSymmetric { i: usize, j: usize, diff: f64 },
    #[error("covariance is not positive semi-definite: minimum eigenvalue {0:e}")]
    NotPsd(f64),
    #[error("invalid allocation: {0}")]
    InvalidAllocation(AllocationVerdict),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

fn check_dates(dates: &[NaiveDate]) -> Result<(), DataError> {
    for w in dates.windows(2) {
        if w[1] <= w[0] {
            return Err(DataError::UnorderedDates(w[1]));
        }
    }
    Ok(())
}

/// Adjusted-close prices, one row per asset and one column per trading day.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceMatrix {
    tickers: Vec<String>,
    dates: Vec<NaiveDate>,
    prices: DMatrix<f64>,
}

impl PriceMatrix {
    pub fn new(
        tickers: Vec<String>,
        dates: Vec<NaiveDate>,
        prices: DMatrix<f64>,
    ) -> Result<Self, DataError> {
        if prices.nrows() != tickers.len() {
            return Err(DataError::DimensionMismatch {
                what: "price rows vs tickers",
                expected: tickers.len(),
                actual: prices.nrows(),
            });
        }
        if prices.ncols() != dates.len() {
            return Err(DataError::DimensionMismatch {
                what: "price columns vs dates",
                expected: dates.len(),
                actual: prices.ncols(),
            });
        }
        check_dates(&dates)?;
        for (i, ticker) in tickers.iter().enumerate() {
            for (t, date) in dates.iter().enumerate() {
                let value = prices[(i, t)];
                if !value.is_finite() || value <= 0.0 {
                    return Err(DataError::NonPositivePrice {
                        ticker: ticker.clone(),
                        date: *date,
                        value,
                    });
                }
            }
        }
        Ok(Self {
            tickers,
            dates,
            prices,
        })
    }

    pub fn tickers(&self) -> &[String] {
        &self.tickers
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn prices(&self) -> &DMatrix<f64> {
        &self.prices
    }

    pub fn n_assets(&self) -> usize {
        self.tickers.len()
    }

    pub fn n_days(&self) -> usize {
        self.dates.len()
    }
}

/// Daily simple returns `r[i, t]`, one row per asset.
///
/// Each column is labelled with the date on which the return was realised,
/// i.e. the later of the two prices it was computed from.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnMatrix {
    tickers: Vec<String>,
    dates: Vec<NaiveDate>,
    returns: DMatrix<f64>,
}

impl ReturnMatrix {
    pub fn new(
        tickers: Vec<String>,
        dates: Vec<NaiveDate>,
        returns: DMatrix<f64>,
    ) -> Result<Self, DataError> {
        if returns.nrows() != tickers.len() {
            return Err(DataError::DimensionMismatch {
                what: "return rows vs tickers",
                expected: tickers.len(),
                actual: returns.nrows(),
            });
        }
        if returns.ncols() != dates.len() {
            return Err(DataError::DimensionMismatch {
                what: "return columns vs dates",
                expected: dates.len(),
                actual: returns.ncols(),
            });
        }
        check_dates(&dates)?;
        for (i, ticker) in tickers.iter().enumerate() {
            for (t, date) in dates.iter().enumerate() {
                let value = returns[(i, t)];
                if !value.is_finite() || value <= -1.0 {
                    return Err(DataError::ReturnOutOfRange {
                        ticker: ticker.clone(),
                        date: *date,
                        value,
                    });
                }
            }
        }
        Ok(Self {
            tickers,
            dates,
            returns,
        })
    }

    /// Builds a matrix with synthetic tickers `A0, A1, ...` and consecutive
    /// calendar dates. Handy for tests and the book.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, DataError> {
        let n = rows.len();
        let t = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != t) {
            return Err(DataError::DimensionMismatch {
                what: "return row length",
                expected: t,
                actual: bad.len(),
            });
        }
        let start = NaiveDate::from_ymd_opt(2020, 1, 1).expect("valid date");
        let dates = (0..t)
            .map(|k| start + chrono::Days::new(k as u64))
            .collect();
        let tickers = (0..n).map(|i| format!("A{i}")).collect();
        let returns = DMatrix::from_fn(n, t, |i, j| rows[i][j]);
        Self::new(tickers, dates, returns)
    }

    pub fn tickers(&self) -> &[String] {
        &self.tickers
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn returns(&self) -> &DMatrix<f64> {
        &self.returns
    }

    pub fn n_assets(&self) -> usize {
        self.tickers.len()
    }

    pub fn n_days(&self) -> usize {
        self.dates.len()
    }

    /// Keeps the columns whose index satisfies `keep`, in order.
    pub fn select_columns(&self, keep: impl Fn(usize, NaiveDate) -> bool) -> Self {
        let cols: Vec<usize> = self
            .dates
            .iter()
            .enumerate()
            .filter(|(t, d)| keep(*t, **d))
            .map(|(t, _)| t)
            .collect();
        let returns = self.returns.select_columns(cols.iter());
        Self {
            tickers: self.tickers.clone(),
            dates: cols.iter().map(|&t| self.dates[t]).collect(),
            returns,
        }
    }
}

/// Sample moments of a return window: mean vector and covariance matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct AssetStats {
    mean_returns: DVector<f64>,
    covariance: DMatrix<f64>,
}

impl AssetStats {
    /// Checks symmetry (1e-12 elementwise), non-negative diagonal and PSD
    /// (minimum eigenvalue >= -1e-10).
    pub fn new(mean_returns: DVector<f64>, covariance: DMatrix<f64>) -> Result<Self, DataError> {
        let n = mean_returns.len();
        if covariance.nrows() != n || covariance.ncols() != n {
            return Err(DataError::DimensionMismatch {
                what: "covariance vs mean vector",
                expected: n,
                actual: covariance.nrows().max(covariance.ncols()),
            });
        }
        if mean_returns.iter().chain(covariance.iter()).any(|v| !v.is_finite()) {
            return Err(DataError::NonFinite("asset statistics"));
        }
        check_psd(&covariance)?;
        Ok(Self {
            mean_returns,
            covariance,
        })
    }

    pub fn mean_returns(&self) -> &DVector<f64> {
        &self.mean_returns
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    pub fn n_assets(&self) -> usize {
        self.mean_returns.len()
    }

    /// `x' S x`.
    pub fn portfolio_variance(&self, weights: &[f64]) -> f64 {
        let x = DVector::from_column_slice(weights);
        (x.transpose() * &self.covariance * &x)[(0, 0)]
    }

    /// `r' x`.
    pub fn portfolio_return(&self, weights: &[f64]) -> f64 {
        self.mean_returns
            .iter()
            .zip(weights)
            .map(|(r, x)| r * x)
            .sum()
    }
}

/// Symmetry, diagonal and eigenvalue checks shared by [`AssetStats`] and the
/// QP solver.
pub fn check_psd(matrix: &DMatrix<f64>) -> Result<(), DataError> {
    let n = matrix.nrows();
    for i in 0..n {
        if matrix[(i, i)] < 0.0 {
            return Err(DataError::NotPsd(matrix[(i, i)]));
        }
        for j in (i + 1)..n {
            let diff = (matrix[(i, j)] - matrix[(j, i)]).abs();
            if diff > SYMMETRY_TOL {
                return Err(DataError::NotSymmetric { i, j, diff });
            }
        }
    }
    if n == 0 {
        return Ok(());
    }
    let eig = SymmetricEigen::new(matrix.clone());
    let min = eig.eigenvalues.min();
    if min < -PSD_TOL {
        return Err(DataError::NotPsd(min));
    }
    Ok(())
}

/// Outcome of [`validate_allocation`]. Reports the first violated invariant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AllocationVerdict {
    Valid,
    Empty,
    NonFinite { index: usize },
    Negative { index: usize, value: f64 },
    AboveCap { index: usize, value: f64, cap: f64 },
    Budget { sum: f64 },
}

impl AllocationVerdict {
    pub fn is_valid(&self) -> bool {
        matches!(self, AllocationVerdict::Valid)
    }
}

impl fmt::Display for AllocationVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AllocationVerdict::Valid => write!(f, "valid"),
            AllocationVerdict::Empty => write!(f, "no weights"),
            AllocationVerdict::NonFinite { index } => write!(f, "weight {index} is not finite"),
            AllocationVerdict::Negative { index, value } => {
                write!(f, "weight {index} is negative ({value})")
            }
            AllocationVerdict::AboveCap { index, value, cap } => {
                write!(f, "weight {index} = {value} exceeds cap {cap}")
            }
            AllocationVerdict::Budget { sum } => write!(f, "weights sum to {sum}, not 1"),
        }
    }
}

/// Accepts `x` iff `sum(x) = 1 +- 1e-8` and `0 <= x_i <= cap + 1e-9`.
///
/// Checks run per index (finiteness, sign, cap) before the budget, so the
/// verdict names the first offending weight.
pub fn validate_allocation(weights: &[f64], cap: f64) -> AllocationVerdict {
    if weights.is_empty() {
        return AllocationVerdict::Empty;
    }
    for (index, &value) in weights.iter().enumerate() {
        if !value.is_finite() {
            return AllocationVerdict::NonFinite { index };
        }
        // Tolerance on the lower side mirrors the cap slack.
        if value < -CAP_TOL {
            return AllocationVerdict::Negative { index, value };
        }
        if value > cap + CAP_TOL {
            return AllocationVerdict::AboveCap { index, value, cap };
        }
    }
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > BUDGET_TOL {
        return AllocationVerdict::Budget { sum };
    }
    AllocationVerdict::Valid
}

/// Budget fractions per asset, summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct Allocation {
    weights: Vec<f64>,
}

impl Allocation {
    pub fn new(weights: Vec<f64>) -> Result<Self, DataError> {
        Self::with_cap(weights, 1.0)
    }

    pub fn with_cap(weights: Vec<f64>, cap: f64) -> Result<Self, DataError> {
        match validate_allocation(&weights, cap) {
            AllocationVerdict::Valid => Ok(Self { weights }),
            other => Err(DataError::InvalidAllocation(other)),
        }
    }

    /// Builds an allocation from a solver vector, clearing round-off below
    /// zero. The result is still validated.
    pub fn from_solver(raw: &[f64], cap: f64) -> Result<Self, DataError> {
        let weights = raw
            .iter()
            .map(|&w| if w < 0.0 && w > -CAP_TOL { 0.0 } else { w })
            .collect();
        Self::with_cap(weights, cap)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Number of weights above `threshold`.
    pub fn positions(&self, threshold: f64) -> usize {
        self.weights.iter().filter(|&&w| w > threshold).count()
    }
}

/// The six portfolio models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ModelKind {
    Markowitz,
    ReverseMarkowitz,
    Simultaneous,
    Mad,
    MaxDrawdown,
    MaxDrawdownMilp,
}

impl ModelKind {
    pub const ALL: [ModelKind; 6] = [
        ModelKind::Markowitz,
        ModelKind::ReverseMarkowitz,
        ModelKind::Simultaneous,
        ModelKind::Mad,
        ModelKind::MaxDrawdown,
        ModelKind::MaxDrawdownMilp,
    ];

    /// The five models deployed in the backtest tables (MAD excluded).
    pub const DEPLOYED: [ModelKind; 5] = [
        ModelKind::Markowitz,
        ModelKind::ReverseMarkowitz,
        ModelKind::Simultaneous,
        ModelKind::MaxDrawdown,
        ModelKind::MaxDrawdownMilp,
    ];

    /// Row label used in report tables.
    pub fn label(&self) -> &'static str {
        match self {
            ModelKind::Markowitz => "Markowitz",
            ModelKind::ReverseMarkowitz => "Markowitz (reverse)",
            ModelKind::Simultaneous => "Simultaneous optimization",
            ModelKind::Mad => "MAD",
            ModelKind::MaxDrawdown => "MD",
            ModelKind::MaxDrawdownMilp => "MD (constrained)",
        }
    }

    /// Short command-line name.
    pub fn slug(&self) -> &'static str {
        match self {
            ModelKind::Markowitz => "markowitz",
            ModelKind::ReverseMarkowitz => "reverse-markowitz",
            ModelKind::Simultaneous => "simultaneous",
            ModelKind::Mad => "mad",
            ModelKind::MaxDrawdown => "md",
            ModelKind::MaxDrawdownMilp => "md-milp",
        }
    }

    pub fn from_slug(slug: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.slug() == slug)
    }

    pub fn is_max_drawdown(&self) -> bool {
        matches!(self, ModelKind::MaxDrawdown | ModelKind::MaxDrawdownMilp)
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Parameters shared by the six models. Fields a model does not use are
/// ignored by it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelConfig {
    /// Minimum required daily expected return (decimal).
    pub rho: f64,
    /// Maximum daily standard deviation (decimal), reverse Markowitz only.
    pub sigma0: f64,
    /// Risk-penalty weight for simultaneous optimization.
    pub lambda: f64,
    /// L1 penalty; zero disables the augmentation.
    pub mu_l1: f64,
    /// Per-asset ceiling. `None` means 0.5 for the MD models and 1.0 otherwise.
    pub cap: Option<f64>,
    /// Minimum positive weight for the MD MILP.
    pub min_alloc: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            rho: 0.0,
            sigma0: 1.0,
            lambda: 1.0,
            mu_l1: 0.0,
            cap: None,
            min_alloc: 0.05,
        }
    }
}

impl ModelConfig {
    pub fn with_rho(rho: f64) -> Self {
        Self {
            rho,
            ..Self::default()
        }
    }

    pub fn effective_cap(&self, model: ModelKind) -> f64 {
        self.cap
            .unwrap_or(if model.is_max_drawdown() { 0.5 } else { 1.0 })
    }

    pub fn validate(&self, model: ModelKind) -> Result<(), DataError> {
        let bad = |msg: String| Err(DataError::InvalidConfig(msg));
        if !self.rho.is_finite() {
            return bad(format!("rho must be finite, got {}", self.rho));
        }
        if !(self.sigma0 > 0.0) || !self.sigma0.is_finite() {
            return bad(format!("sigma0 must be positive, got {}", self.sigma0));
        }
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return bad(format!("lambda must be >= 0, got {}", self.lambda));
        }
        if !(self.mu_l1 >= 0.0) || !self.mu_l1.is_finite() {
            return bad(format!("mu_l1 must be >= 0, got {}", self.mu_l1));
        }
        let cap = self.effective_cap(model);
        if !(cap > 0.0 && cap <= 1.0) {
            return bad(format!("cap must lie in (0, 1], got {cap}"));
        }
        if !(self.min_alloc > 0.0 && self.min_alloc <= cap) {
            return bad(format!(
                "min_alloc must lie in (0, cap = {cap}], got {}",
                self.min_alloc
            ));
        }
        Ok(())
    }
}

/// Termination state of a model solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

impl fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::Unbounded => "unbounded",
            SolveStatus::IterationLimit => "iteration_limit",
        };
        f.write_str(s)
    }
}

/// Result of running one model.
///
/// `allocation` is `Some` exactly when `status` is [`SolveStatus::Optimal`].
#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub model: ModelKind,
    pub status: SolveStatus,
    pub allocation: Option<Allocation>,
    /// Model-native objective (variance, expected return, MAD, worst day, ...).
    pub objective: Option<f64>,
    /// Wall-clock seconds spent inside the solver.
    pub wall_time: f64,
    /// Solver-specific count: pivots, Frank-Wolfe iterations, B&B nodes or
    /// bisection steps.
    pub iterations: usize,
}

impl SolveReport {
    pub fn failed(model: ModelKind, status: SolveStatus, wall_time: f64, iterations: usize) -> Self {
        debug_assert!(status != SolveStatus::Optimal);
        Self {
            model,
            status,
            allocation: None,
            objective: None,
            wall_time,
            iterations,
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_asset_is_valid() {
        assert_eq!(validate_allocation(&[1.0], 1.0), AllocationVerdict::Valid);
    }

    #[test]
    fn cap_violation_reports_index() {
        match validate_allocation(&[0.6, 0.4], 0.5) {
            AllocationVerdict::AboveCap { index, .. } => assert_eq!(index, 0),
            other => panic!("unexpected verdict {other:?}"),
        }
    }

    #[test]
    fn cap_boundary_is_valid() {
        assert!(validate_allocation(&[0.5, 0.5], 0.5).is_valid());
    }

    #[test]
    fn budget_violation() {
        assert!(matches!(
            validate_allocation(&[0.5, 0.4], 1.0),
            AllocationVerdict::Budget { .. }
        ));
        assert!(validate_allocation(&[0.5, 0.5 + 5e-9], 1.0).is_valid());
    }

    #[test]
    fn negative_and_nan_rejected() {
        assert!(matches!(
            validate_allocation(&[1.1, -0.1], 2.0),
            AllocationVerdict::Negative { index: 1, .. }
        ));
        assert!(matches!(
            validate_allocation(&[f64::NAN, 1.0], 1.0),
            AllocationVerdict::NonFinite { index: 0 }
        ));
    }

    #[test]
    fn price_matrix_invariants() {
        let d = |day| NaiveDate::from_ymd_opt(2020, 2, day).unwrap();
        let ok = PriceMatrix::new(
            vec!["A".into()],
            vec![d(3), d(4)],
            DMatrix::from_row_slice(1, 2, &[1.0, 2.0]),
        );
        assert!(ok.is_ok());
        let unordered = PriceMatrix::new(
            vec!["A".into()],
            vec![d(4), d(4)],
            DMatrix::from_row_slice(1, 2, &[1.0, 2.0]),
        );
        assert!(matches!(unordered, Err(DataError::UnorderedDates(_))));
        let negative = PriceMatrix::new(
            vec!["A".into()],
            vec![d(3), d(4)],
            DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
        );
        assert!(matches!(negative, Err(DataError::NonPositivePrice { .. })));
    }

    #[test]
    fn stats_reject_indefinite() {
        let mean = DVector::from_vec(vec![0.0, 0.0]);
        let cov = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(
            AssetStats::new(mean.clone(), cov),
            Err(DataError::NotPsd(_))
        ));
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.1, 0.0, 1.0]);
        assert!(matches!(
            AssetStats::new(mean, asym),
            Err(DataError::NotSymmetric { .. })
        ));
    }

    #[test]
    fn config_defaults_and_validation() {
        let cfg = ModelConfig::default();
        assert_eq!(cfg.effective_cap(ModelKind::MaxDrawdown), 0.5);
        assert_eq!(cfg.effective_cap(ModelKind::Markowitz), 1.0);
        assert!(cfg.validate(ModelKind::MaxDrawdownMilp).is_ok());
        let bad = ModelConfig {
            min_alloc: 0.6,
            ..cfg
        };
        assert!(bad.validate(ModelKind::MaxDrawdownMilp).is_err());
        let bad = ModelConfig {
            sigma0: 0.0,
            ..cfg
        };
        assert!(bad.validate(ModelKind::ReverseMarkowitz).is_err());
    }

    #[test]
    fn slugs_round_trip() {
        for m in ModelKind::ALL {
            assert_eq!(ModelKind::from_slug(m.slug()), Some(m));
        }
    }
}
