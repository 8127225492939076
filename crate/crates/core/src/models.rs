//! The six portfolio formulations and their solver dispatch.
//!
//! | model | input | program | objective |
//! |---|---|---|---|
//! | Markowitz | [`AssetStats`] | QP | minimise `x'Sx` s.t. `r'x >= rho` |
//! | reverse Markowitz | [`AssetStats`] | bisection over Markowitz | maximise `r'x` s.t. `x'Sx <= sigma0^2` |
//! | simultaneous | [`AssetStats`] | QP | minimise `-r'x + lambda x'Sx` |
//! | MAD | [`ReturnMatrix`] | LP | minimise `(1/T) sum_t y_t`, `y_t >= |dev_t . x|` |
//! | MD | [`ReturnMatrix`] | LP | maximise `y`, `y <= sum_i r_it x_i` for every day |
//! | MD MILP | [`ReturnMatrix`] | MILP | MD plus `min_alloc z_i <= x_i <= cap z_i` |
//!
//! Every model has the budget row `sum x = 1` and bounds `0 <= x_i <= cap`.

use std::ops::Range;
use std::time::Instant;

use nalgebra::DMatrix;
use thiserror::Error;

use crate::estimation::mean_returns;
use crate::lp::{solve_lp, Constraints, LpError, LpProblem, LpStatus, Sense};
use crate::milp::{solve_milp, MilpError, MilpProblem, MilpStatus};
use crate::qp::{solve_qp_with, QpError, QpOptions, QpProblem, QpStatus};
use crate::types::{
    Allocation, AssetStats, DataError, ModelConfig, ModelKind, ReturnMatrix, SolveReport,
    SolveStatus,
};

/// Node budget for the MD MILP.
pub const DEFAULT_NODE_LIMIT: usize = 200_000;
/// Bisection iterations for reverse Markowitz.
pub const BISECTION_MAX_ITERS: usize = 60;
/// Bisection stops once the return interval is narrower than this.
pub const BISECTION_TOL: f64 = 1e-10;
/// Standard-deviation slack accepted by reverse Markowitz.
pub const SIGMA_SLACK: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("{model} needs {expected} assets in its inputs, got {actual}")]
    Dimension {
        model: ModelKind,
        expected: usize,
        actual: usize,
    },
    #[error("{0} is not a quadratic model and cannot take an L1 penalty")]
    NotQuadratic(ModelKind),
    #[error("solver returned an allocation that fails validation: {0}")]
    BadSolution(DataError),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error(transparent)]
    Qp(#[from] QpError),
    #[error(transparent)]
    Milp(#[from] MilpError),
}

/// Which solver columns belong to which model block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EpigraphLayout {
    /// Portfolio weights `x`.
    pub weights: Range<usize>,
    /// MAD epigraph variables `y_t`, one per day.
    pub deviations: Option<Range<usize>>,
    /// MD epigraph scalar `y`.
    pub worst_day: Option<usize>,
    /// MILP indicators `z`.
    pub indicators: Option<Range<usize>>,
    /// L1 epigraph variables `u`.
    pub l1: Option<Range<usize>>,
    pub total: usize,
}

impl EpigraphLayout {
    fn weights_only(n: usize) -> Self {
        Self {
            weights: 0..n,
            deviations: None,
            worst_day: None,
            indicators: None,
            l1: None,
            total: n,
        }
    }

    pub fn n_assets(&self) -> usize {
        self.weights.len()
    }

    /// True when every column in `0..total` belongs to exactly one block.
    pub fn is_partition(&self) -> bool {
        let mut owners = vec![0usize; self.total];
        let mut mark = |r: Range<usize>| {
            for j in r {
                if let Some(slot) = owners.get_mut(j) {
                    *slot += 1;
                } else {
                    return false;
                }
            }
            true
        };
        let mut ok = mark(self.weights.clone());
        if let Some(r) = &self.deviations {
            ok &= mark(r.clone());
        }
        if let Some(j) = self.worst_day {
            ok &= mark(j..j + 1);
        }
        if let Some(r) = &self.indicators {
            ok &= mark(r.clone());
        }
        if let Some(r) = &self.l1 {
            ok &= mark(r.clone());
        }
        ok && owners.iter().all(|&c| c == 1)
    }

    /// Columns with continuous domain.
    pub fn n_continuous(&self) -> usize {
        self.total - self.indicators.as_ref().map_or(0, Range::len)
    }
}

/// An optimisation program ready for one of the solvers.
#[derive(Debug, Clone, PartialEq)]
pub enum Program {
    Lp(LpProblem),
    Qp(QpProblem),
    Milp(MilpProblem),
}

impl Program {
    pub fn constraints(&self) -> &Constraints {
        match self {
            Program::Lp(p) => &p.constraints,
            Program::Qp(p) => &p.constraints,
            Program::Milp(p) => &p.base.constraints,
        }
    }
}

/// A model instance: program, column layout and the cap its weights obey.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelProgram {
    pub model: ModelKind,
    pub layout: EpigraphLayout,
    pub program: Program,
    pub cap: f64,
}

/// Encoding of the MD linear program.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MdEncoding {
    /// Budget as an equality row.
    #[default]
    Direct,
    /// Every functional row as `<=`; the budget becomes two rows.
    StandardForm,
}

fn check_assets(model: ModelKind, expected: usize, actual: usize) -> Result<(), ModelError> {
    if expected == actual && expected > 0 {
        Ok(())
    } else {
        Err(ModelError::Dimension {
            model,
            expected,
            actual,
        })
    }
}

/// Budget row and `[0, cap]` bounds on the first `n` of `total` columns.
fn budget_region(n: usize, total: usize, cap: f64) -> Constraints {
    let mut c = Constraints::new(total);
    for j in 0..n {
        c.set_bounds(j, 0.0, cap);
    }
    let mut row = vec![0.0; total];
    row[..n].fill(1.0);
    c.add_eq(row, 1.0);
    c
}

fn return_row(means: &[f64], total: usize) -> Vec<f64> {
    let mut row = vec![0.0; total];
    row[..means.len()].copy_from_slice(means);
    row
}

/// Minimum-variance program; `rho = None` drops the return row.
fn markowitz_program(stats: &AssetStats, rho: Option<f64>, cap: f64) -> ModelProgram {
    let n = stats.n_assets();
    let mut c = budget_region(n, n, cap);
    if let Some(rho) = rho {
        c.add_ge(return_row(stats.mean_returns().as_slice(), n), rho);
    }
    ModelProgram {
        model: ModelKind::Markowitz,
        layout: EpigraphLayout::weights_only(n),
        program: Program::Qp(QpProblem::new(stats.covariance().clone(), vec![0.0; n], c)),
        cap,
    }
}

/// Markowitz: minimise `x'Sx` subject to `r'x >= rho`, budget and box.
pub fn build_markowitz(stats: &AssetStats, cfg: &ModelConfig) -> Result<ModelProgram, ModelError> {
    let kind = ModelKind::Markowitz;
    cfg.validate(kind)?;
    let program = markowitz_program(stats, Some(cfg.rho), cfg.effective_cap(kind));
    maybe_l1(program, cfg.mu_l1)
}

/// Simultaneous: minimise `-r'x + lambda x'Sx` subject to budget and box.
pub fn build_simultaneous(
    stats: &AssetStats,
    cfg: &ModelConfig,
) -> Result<ModelProgram, ModelError> {
    let kind = ModelKind::Simultaneous;
    cfg.validate(kind)?;
    let n = stats.n_assets();
    let cap = cfg.effective_cap(kind);
    let q = stats.covariance() * cfg.lambda;
    let c: Vec<f64> = stats.mean_returns().iter().map(|r| -r).collect();
    let program = ModelProgram {
        model: kind,
        layout: EpigraphLayout::weights_only(n),
        program: Program::Qp(QpProblem::new(q, c, budget_region(n, n, cap))),
        cap,
    };
    maybe_l1(program, cfg.mu_l1)
}

fn maybe_l1(program: ModelProgram, mu: f64) -> Result<ModelProgram, ModelError> {
    if mu > 0.0 {
        l1_augment(&program, mu)
    } else {
        Ok(program)
    }
}

/// Adds `u_i >= x_i` (with `u_i >= 0`, no upper bound) and `+mu sum u` to a
/// quadratic model. With long-only weights and a unit budget the optimum
/// has `sum u = 1`, so the weights are unchanged and the objective moves by
/// exactly `mu`. `mu = 0` returns the program untouched.
pub fn l1_augment(program: &ModelProgram, mu: f64) -> Result<ModelProgram, ModelError> {
    if !(mu >= 0.0) || !mu.is_finite() {
        return Err(DataError::InvalidConfig(format!("mu_l1 must be >= 0, got {mu}")).into());
    }
    if mu == 0.0 {
        return Ok(program.clone());
    }
    let Program::Qp(qp) = &program.program else {
        return Err(ModelError::NotQuadratic(program.model));
    };
    if program.layout.l1.is_some() {
        return Err(DataError::InvalidConfig("program already carries an L1 block".into()).into());
    }
    let old = program.layout.total;
    let n = program.layout.n_assets();
    let total = old + n;

    let mut constraints = qp.constraints.clone();
    constraints.extend_vars(n, 0.0, f64::INFINITY);
    for (k, j) in program.layout.weights.clone().enumerate() {
        let mut row = vec![0.0; total];
        row[j] = 1.0;
        row[old + k] = -1.0;
        constraints.add_le(row, 0.0);
    }
    let mut quadratic = DMatrix::zeros(total, total);
    quadratic
        .view_mut((0, 0), (old, old))
        .copy_from(&qp.quadratic);
    let mut linear = qp.linear.clone();
    linear.resize(total, mu);

    let mut layout = program.layout.clone();
    layout.l1 = Some(old..total);
    layout.total = total;
    Ok(ModelProgram {
        model: program.model,
        layout,
        program: Program::Qp(QpProblem::new(quadratic, linear, constraints)),
        cap: program.cap,
    })
}

/// Mean absolute deviation as an LP with one epigraph variable per
/// day. Deviations are taken from each asset's time-mean return.
pub fn build_mad(returns: &ReturnMatrix, cfg: &ModelConfig) -> Result<ModelProgram, ModelError> {
    let kind = ModelKind::Mad;
    cfg.validate(kind)?;
    let n = returns.n_assets();
    let t = returns.n_days();
    check_assets(kind, n.max(1), n)?;
    let means = mean_returns(returns).map_err(|_| DataError::TooFew {
        what: "return observations",
        required: 1,
        actual: t,
    })?;
    let cap = cfg.effective_cap(kind);
    let total = n + t;
    let r = returns.returns();

    let mut c = budget_region(n, total, cap);
    c.add_ge(return_row(means.as_slice(), total), cfg.rho);
    for k in 0..t {
        let mut up = vec![0.0; total];
        let mut down = vec![0.0; total];
        for i in 0..n {
            let dev = r[(i, k)] - means[i];
            up[i] = dev;
            down[i] = -dev;
        }
        up[n + k] = -1.0;
        down[n + k] = -1.0;
        c.add_le(up, 0.0);
        c.add_le(down, 0.0);
    }
    let mut objective = vec![0.0; total];
    objective[n..].fill(1.0 / t as f64);
    Ok(ModelProgram {
        model: kind,
        layout: EpigraphLayout {
            weights: 0..n,
            deviations: Some(n..total),
            worst_day: None,
            indicators: None,
            l1: None,
            total,
        },
        program: Program::Lp(LpProblem::new(objective, Sense::Minimize, c)),
        cap,
    })
}

/// MD rows over `total` columns: `y - sum_i r_it x_i <= 0` per day, the
/// return row and the budget in the requested encoding.
fn md_constraints(
    returns: &ReturnMatrix,
    means: &[f64],
    rho: f64,
    cap: f64,
    total: usize,
    encoding: MdEncoding,
) -> Constraints {
    let n = returns.n_assets();
    let r = returns.returns();
    let mut c = Constraints::new(total);
    for j in 0..n {
        c.set_bounds(j, 0.0, cap);
    }
    c.set_bounds(n, f64::NEG_INFINITY, f64::INFINITY);
    for k in 0..returns.n_days() {
        let mut row = vec![0.0; total];
        for i in 0..n {
            row[i] = -r[(i, k)];
        }
        row[n] = 1.0;
        c.add_le(row, 0.0);
    }
    c.add_ge(return_row(means, total), rho);
    let mut budget = vec![0.0; total];
    budget[..n].fill(1.0);
    match encoding {
        MdEncoding::Direct => {
            c.add_eq(budget, 1.0);
        }
        MdEncoding::StandardForm => {
            c.add_le(budget.clone(), 1.0);
            c.add_ge(budget, 1.0);
        }
    }
    c
}

/// MD: maximise the worst daily portfolio return.
pub fn build_md(
    returns: &ReturnMatrix,
    cfg: &ModelConfig,
    encoding: MdEncoding,
) -> Result<ModelProgram, ModelError> {
    let kind = ModelKind::MaxDrawdown;
    cfg.validate(kind)?;
    let n = returns.n_assets();
    check_assets(kind, n.max(1), n)?;
    let means = mean_returns(returns).map_err(|_| DataError::TooFew {
        what: "return observations",
        required: 1,
        actual: returns.n_days(),
    })?;
    let cap = cfg.effective_cap(kind);
    let total = n + 1;
    let c = md_constraints(returns, means.as_slice(), cfg.rho, cap, total, encoding);
    let mut objective = vec![0.0; total];
    objective[n] = 1.0;
    Ok(ModelProgram {
        model: kind,
        layout: EpigraphLayout {
            weights: 0..n,
            deviations: None,
            worst_day: Some(n),
            indicators: None,
            l1: None,
            total,
        },
        program: Program::Lp(LpProblem::new(objective, Sense::Maximize, c)),
        cap,
    })
}

/// Constrained MD: the MD program plus indicators `z_i` with
/// `min_alloc z_i <= x_i <= cap z_i`. The big-M is the cap itself, the
/// smallest value that leaves every feasible weight reachable.
pub fn build_md_milp(returns: &ReturnMatrix, cfg: &ModelConfig) -> Result<ModelProgram, ModelError> {
    let kind = ModelKind::MaxDrawdownMilp;
    cfg.validate(kind)?;
    let n = returns.n_assets();
    check_assets(kind, n.max(1), n)?;
    let means = mean_returns(returns).map_err(|_| DataError::TooFew {
        what: "return observations",
        required: 1,
        actual: returns.n_days(),
    })?;
    let cap = cfg.effective_cap(kind);
    let big_m = cap;
    let total = 2 * n + 1;
    let mut c = md_constraints(returns, means.as_slice(), cfg.rho, cap, total, MdEncoding::Direct);
    let z0 = n + 1;
    for i in 0..n {
        c.set_bounds(z0 + i, 0.0, 1.0);
        let mut floor = vec![0.0; total];
        floor[i] = -1.0;
        floor[z0 + i] = cfg.min_alloc;
        c.add_le(floor, 0.0);
        let mut ceiling = vec![0.0; total];
        ceiling[i] = 1.0;
        ceiling[z0 + i] = -big_m;
        c.add_le(ceiling, 0.0);
    }
    let mut objective = vec![0.0; total];
    objective[n] = 1.0;
    Ok(ModelProgram {
        model: kind,
        layout: EpigraphLayout {
            weights: 0..n,
            deviations: None,
            worst_day: Some(n),
            indicators: Some(z0..total),
            l1: None,
            total,
        },
        program: Program::Milp(MilpProblem::new(
            LpProblem::new(objective, Sense::Maximize, c),
            (z0..total).collect(),
        )),
        cap,
    })
}

/// Raw solver output for a [`ModelProgram`].
#[derive(Debug, Clone, PartialEq)]
pub struct ProgramOutcome {
    pub status: SolveStatus,
    /// Full column vector (all blocks); empty unless optimal.
    pub columns: Vec<f64>,
    pub objective: Option<f64>,
    pub iterations: usize,
}

/// Convexity is established by [`AssetStats`], so the QP check is skipped.
fn qp_options() -> QpOptions {
    QpOptions {
        gap_tol: 1e-10,
        check_convexity: false,
        ..QpOptions::default()
    }
}

pub fn solve_program(program: &ModelProgram) -> Result<ProgramOutcome, ModelError> {
    solve_program_with(program, DEFAULT_NODE_LIMIT)
}

pub fn solve_program_with(
    program: &ModelProgram,
    node_limit: usize,
) -> Result<ProgramOutcome, ModelError> {
    let outcome = match &program.program {
        Program::Lp(lp) => {
            let sol = solve_lp(lp)?;
            let status = match sol.status {
                LpStatus::Optimal => SolveStatus::Optimal,
                LpStatus::Infeasible => SolveStatus::Infeasible,
                LpStatus::Unbounded => SolveStatus::Unbounded,
                LpStatus::IterationLimit => SolveStatus::IterationLimit,
            };
            let optimal = status == SolveStatus::Optimal;
            ProgramOutcome {
                status,
                objective: optimal.then_some(sol.objective),
                columns: if optimal { sol.x } else { Vec::new() },
                iterations: sol.pivots,
            }
        }
        Program::Qp(qp) => {
            let sol = solve_qp_with(qp, &qp_options())?;
            let status = match sol.status {
                QpStatus::Optimal => SolveStatus::Optimal,
                QpStatus::Infeasible => SolveStatus::Infeasible,
                QpStatus::IterationLimit => SolveStatus::IterationLimit,
            };
            let optimal = status == SolveStatus::Optimal;
            ProgramOutcome {
                status,
                objective: optimal.then_some(sol.objective),
                columns: if optimal { sol.x } else { Vec::new() },
                iterations: sol.iterations,
            }
        }
        Program::Milp(milp) => {
            let sol = solve_milp(milp, node_limit)?;
            let status = match sol.status {
                MilpStatus::Optimal => SolveStatus::Optimal,
                MilpStatus::Infeasible => SolveStatus::Infeasible,
                MilpStatus::Unbounded => SolveStatus::Unbounded,
                MilpStatus::IterationLimit => SolveStatus::IterationLimit,
            };
            let optimal = status == SolveStatus::Optimal;
            ProgramOutcome {
                status,
                objective: if optimal { sol.objective } else { None },
                columns: if optimal { sol.x.unwrap_or_default() } else { Vec::new() },
                iterations: sol.nodes,
            }
        }
    };
    Ok(outcome)
}

fn report(
    program: &ModelProgram,
    outcome: ProgramOutcome,
    wall_time: f64,
) -> Result<SolveReport, ModelError> {
    if outcome.status != SolveStatus::Optimal {
        return Ok(SolveReport::failed(
            program.model,
            outcome.status,
            wall_time,
            outcome.iterations,
        ));
    }
    let weights = &outcome.columns[program.layout.weights.clone()];
    let allocation =
        Allocation::from_solver(weights, program.cap).map_err(ModelError::BadSolution)?;
    Ok(SolveReport {
        model: program.model,
        status: SolveStatus::Optimal,
        allocation: Some(allocation),
        objective: outcome.objective,
        wall_time,
        iterations: outcome.iterations,
    })
}

fn timed(program: &ModelProgram) -> Result<SolveReport, ModelError> {
    let start = Instant::now();
    let outcome = solve_program(program)?;
    report(program, outcome, start.elapsed().as_secs_f64())
}

/// Markowitz. The objective is the portfolio variance (plus `mu` when the L1
/// penalty is on).
pub fn solve_markowitz(stats: &AssetStats, cfg: &ModelConfig) -> Result<SolveReport, ModelError> {
    timed(&build_markowitz(stats, cfg)?)
}

/// Simultaneous optimization. The objective is `-r'x + lambda x'Sx` (plus `mu` under L1).
pub fn solve_simultaneous(
    stats: &AssetStats,
    cfg: &ModelConfig,
) -> Result<SolveReport, ModelError> {
    timed(&build_simultaneous(stats, cfg)?)
}

/// MAD. The objective is the mean absolute deviation.
pub fn solve_mad(returns: &ReturnMatrix, cfg: &ModelConfig) -> Result<SolveReport, ModelError> {
    timed(&build_mad(returns, cfg)?)
}

/// MD. The objective is the worst daily portfolio return.
pub fn solve_md(returns: &ReturnMatrix, cfg: &ModelConfig) -> Result<SolveReport, ModelError> {
    timed(&build_md(returns, cfg, MdEncoding::Direct)?)
}

/// Constrained MD. The objective is the worst daily portfolio return.
pub fn solve_md_milp(returns: &ReturnMatrix, cfg: &ModelConfig) -> Result<SolveReport, ModelError> {
    timed(&build_md_milp(returns, cfg)?)
}

/// Outcome of the reverse-Markowitz frontier search.
#[derive(Debug, Clone, PartialEq)]
pub struct FrontierSearch {
    pub report: SolveReport,
    /// Return target of the Markowitz solve that produced the allocation.
    pub rho_star: Option<f64>,
    /// Whether the variance ceiling binds at the returned point.
    pub variance_active: bool,
    pub bisection_steps: usize,
}

/// Reverse Markowitz by bisection on the required return of Markowitz.
///
/// The minimum variance attainable with `r'x >= rho` is nondecreasing in
/// `rho`, so the largest `rho` whose Markowitz optimum has standard
/// deviation within `sigma0` gives the return-maximising portfolio under the
/// variance ceiling.
pub fn reverse_markowitz_search(
    stats: &AssetStats,
    cfg: &ModelConfig,
) -> Result<FrontierSearch, ModelError> {
    let kind = ModelKind::ReverseMarkowitz;
    cfg.validate(kind)?;
    let start = Instant::now();
    let cap = cfg.effective_cap(kind);
    let n = stats.n_assets();
    let sigma_ok = |x: &[f64]| stats.portfolio_variance(x).max(0.0).sqrt() <= cfg.sigma0 + SIGMA_SLACK;
    let fail = |status, steps| FrontierSearch {
        report: SolveReport::failed(kind, status, start.elapsed().as_secs_f64(), steps),
        rho_star: None,
        variance_active: false,
        bisection_steps: steps,
    };

    let frontier_point = |rho: Option<f64>| -> Result<Option<Vec<f64>>, ModelError> {
        let program = markowitz_program(stats, rho, cap);
        let outcome = solve_program(&program)?;
        Ok((outcome.status == SolveStatus::Optimal).then_some(outcome.columns))
    };

    let Some(min_var) = frontier_point(None)? else {
        return Ok(fail(SolveStatus::Infeasible, 0));
    };
    if !sigma_ok(&min_var) {
        return Ok(fail(SolveStatus::Infeasible, 0));
    }

    // Largest attainable return under budget and caps.
    let region = budget_region(n, n, cap);
    let lp = LpProblem::new(stats.mean_returns().as_slice().to_vec(), Sense::Maximize, region);
    let best = solve_lp(&lp)?;
    if !best.is_optimal() {
        return Ok(fail(SolveStatus::Infeasible, 0));
    }
    let r_max = best.objective;

    let finish = |x: Vec<f64>, rho: f64, active: bool, steps: usize| -> Result<FrontierSearch, ModelError> {
        let allocation = Allocation::from_solver(&x, cap).map_err(ModelError::BadSolution)?;
        Ok(FrontierSearch {
            report: SolveReport {
                model: kind,
                status: SolveStatus::Optimal,
                objective: Some(stats.portfolio_return(&x)),
                allocation: Some(allocation),
                wall_time: start.elapsed().as_secs_f64(),
                iterations: steps,
            },
            rho_star: Some(rho),
            variance_active: active,
            bisection_steps: steps,
        })
    };

    // Ceiling slack at the top of the frontier.
    if let Some(top) = frontier_point(Some(r_max - 1e-12 * (1.0 + r_max.abs())))? {
        if sigma_ok(&top) {
            return finish(top, r_max, false, 0);
        }
    }

    let mut lo = stats.portfolio_return(&min_var);
    let mut hi = r_max;
    let mut best_x = min_var;
    let mut steps = 0;
    while steps < BISECTION_MAX_ITERS && hi - lo >= BISECTION_TOL {
        steps += 1;
        let mid = 0.5 * (lo + hi);
        match frontier_point(Some(mid))? {
            Some(x) if sigma_ok(&x) => {
                lo = mid;
                best_x = x;
            }
            _ => hi = mid,
        }
    }
    finish(best_x, lo, true, steps)
}

/// Reverse Markowitz. The objective is the portfolio's expected return.
pub fn solve_reverse_markowitz(
    stats: &AssetStats,
    cfg: &ModelConfig,
) -> Result<SolveReport, ModelError> {
    Ok(reverse_markowitz_search(stats, cfg)?.report)
}

/// Runs `model` on a training window. The quadratic models read `stats`,
/// the linear ones read `returns`.
pub fn solve_model(
    model: ModelKind,
    returns: &ReturnMatrix,
    stats: &AssetStats,
    cfg: &ModelConfig,
) -> Result<SolveReport, ModelError> {
    check_assets(model, returns.n_assets(), stats.n_assets())?;
    match model {
        ModelKind::Markowitz => solve_markowitz(stats, cfg),
        ModelKind::ReverseMarkowitz => solve_reverse_markowitz(stats, cfg),
        ModelKind::Simultaneous => solve_simultaneous(stats, cfg),
        ModelKind::Mad => solve_mad(returns, cfg),
        ModelKind::MaxDrawdown => solve_md(returns, cfg),
        ModelKind::MaxDrawdownMilp => solve_md_milp(returns, cfg),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimation::asset_stats;
    use nalgebra::DVector;

    fn stats(means: &[f64], cov: &[f64]) -> AssetStats {
        let n = means.len();
        AssetStats::new(
            DVector::from_column_slice(means),
            DMatrix::from_row_slice(n, n, cov),
        )
        .unwrap()
    }

    #[test]
    fn single_asset_markowitz() {
        let s = stats(&[0.01], &[0.0004]);
        let rep = solve_markowitz(&s, &ModelConfig::with_rho(0.005)).unwrap();
        assert_eq!(rep.allocation.unwrap().weights(), &[1.0]);
    }

    #[test]
    fn markowitz_infeasible_above_best_mean() {
        let s = stats(&[0.01, 0.02], &[0.01, 0.0, 0.0, 0.02]);
        let rep = solve_markowitz(&s, &ModelConfig::with_rho(0.03)).unwrap();
        assert_eq!(rep.status, SolveStatus::Infeasible);
        assert!(rep.allocation.is_none());
    }

    #[test]
    fn two_uncorrelated_assets_closed_form() {
        let (v1, v2) = (0.0009, 0.0004);
        let s = stats(&[0.01, 0.012], &[v1, 0.0, 0.0, v2]);
        let rep = solve_markowitz(&s, &ModelConfig::with_rho(0.0)).unwrap();
        let w = rep.allocation.unwrap();
        assert!((w.weights()[0] - v2 / (v1 + v2)).abs() < 1e-9);
        let expected_var = v1 * v2 / (v1 + v2);
        assert!((rep.objective.unwrap() - expected_var).abs() < 1e-14);
    }

    #[test]
    fn layouts() {
        let r = ReturnMatrix::from_rows(&[
            vec![0.01, -0.02, 0.03],
            vec![0.00, 0.01, -0.01],
        ])
        .unwrap();
        let cfg = ModelConfig::with_rho(-1.0);
        let md = build_md(&r, &cfg, MdEncoding::Direct).unwrap();
        assert_eq!(md.layout.total, 3);
        assert_eq!(md.layout.n_continuous(), 3);
        assert!(md.layout.is_partition());
        let mad = build_mad(&r, &cfg).unwrap();
        assert_eq!(mad.layout.total, 2 + 3);
        assert!(mad.layout.is_partition());
        let milp = build_md_milp(&r, &cfg).unwrap();
        assert_eq!(milp.layout.total, 5);
        assert_eq!(milp.layout.indicators.as_ref().unwrap().len(), 2);
        assert!(milp.layout.is_partition());
        let s = asset_stats(&r).unwrap();
        let m1 = build_markowitz(&s, &cfg).unwrap();
        assert_eq!(l1_augment(&m1, 0.0).unwrap(), m1);
        let aug = l1_augment(&m1, 1.0).unwrap();
        assert_eq!(aug.layout.total, 4);
        assert!(aug.layout.is_partition());
        assert!(matches!(
            l1_augment(&md, 1.0),
            Err(ModelError::NotQuadratic(ModelKind::MaxDrawdown))
        ));
    }

    #[test]
    fn md_objective_is_worst_day() {
        let r = ReturnMatrix::from_rows(&[
            vec![0.02, -0.03, 0.01, 0.00],
            vec![-0.01, 0.02, 0.00, 0.01],
            vec![0.00, 0.00, -0.02, 0.03],
        ])
        .unwrap();
        let rep = solve_md(&r, &ModelConfig::with_rho(-1.0)).unwrap();
        let x = rep.allocation.unwrap();
        let worst = (0..4)
            .map(|t| (0..3).map(|i| r.returns()[(i, t)] * x.weights()[i]).sum::<f64>())
            .fold(f64::INFINITY, f64::min);
        assert!((rep.objective.unwrap() - worst).abs() < 1e-12);
    }

    #[test]
    fn md_prefers_assets_whose_bad_days_differ() {
        // A and B crash on day 0, C crashes on day 1. Each has worst day -0.1.
        let r = ReturnMatrix::from_rows(&[
            vec![-0.10, 0.05],
            vec![-0.10, 0.05],
            vec![0.05, -0.10],
        ])
        .unwrap();
        let rep = solve_md(&r, &ModelConfig::with_rho(-1.0)).unwrap();
        let w = rep.allocation.unwrap();
        // Pairing A (or B) with C at 1/2 each gives worst day -0.025; A+B gives -0.1.
        assert!((rep.objective.unwrap() - -0.025).abs() < 1e-12);
        assert!((w.weights()[2] - 0.5).abs() < 1e-9);
    }

    #[test]
    fn milp_min_alloc_equal_to_cap_forces_two_halves() {
        let r = ReturnMatrix::from_rows(&[
            vec![0.01, -0.02, 0.03],
            vec![0.00, 0.01, -0.01],
            vec![0.02, 0.00, 0.00],
        ])
        .unwrap();
        let cfg = ModelConfig {
            rho: -1.0,
            min_alloc: 0.5,
            ..ModelConfig::default()
        };
        let rep = solve_md_milp(&r, &cfg).unwrap();
        let w = rep.allocation.unwrap();
        assert_eq!(w.positions(1e-9), 2);
        for &x in w.weights() {
            assert!(x < 1e-9 || (x - 0.5).abs() < 1e-9);
        }
    }

    #[test]
    fn reverse_markowitz_paths() {
        let s = stats(&[0.01, 0.02, 0.015], &[
            0.0004, 0.0, 0.0, //
            0.0, 0.0009, 0.0, //
            0.0, 0.0, 0.0006,
        ]);
        // Loose ceiling: concentrates on the best asset.
        let cfg = ModelConfig {
            sigma0: 0.03,
            ..ModelConfig::default()
        };
        let out = reverse_markowitz_search(&s, &cfg).unwrap();
        assert!(!out.variance_active);
        assert!((out.report.allocation.unwrap().weights()[1] - 1.0).abs() < 1e-9);
        // Too tight: infeasible.
        let cfg = ModelConfig {
            sigma0: 0.005,
            ..ModelConfig::default()
        };
        let out = reverse_markowitz_search(&s, &cfg).unwrap();
        assert_eq!(out.report.status, SolveStatus::Infeasible);
        // Binding ceiling.
        let cfg = ModelConfig {
            sigma0: 0.018,
            ..ModelConfig::default()
        };
        let out = reverse_markowitz_search(&s, &cfg).unwrap();
        assert!(out.variance_active);
        let w = out.report.allocation.unwrap();
        let sd = s.portfolio_variance(w.weights()).sqrt();
        assert!((sd - 0.018).abs() < 1e-4);
    }
}
