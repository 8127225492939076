//! Dense two-phase simplex with bounded variables.
//!
//! Variable bounds are handled implicitly: a nonbasic column sits at its
//! lower or upper bound and a ratio test may simply flip it to the other
//! bound. Only functional rows (equalities and `<=` rows) enter the tableau,
//! so box-constrained portfolio programs keep a basis of `rows` columns no
//! matter how many assets they have.
//!
//! Internally every original variable is rewritten as a column with bounds
//! `[0, u]`:
//!
//! * finite lower bound: `x = l + x'`, `x' in [0, u - l]`
//! * only an upper bound: `x = u - x'`, `x' >= 0`
//! * free: `x = x+ - x-`
//!
//! Each `<=` row receives a slack. Rows are sign-normalised to a
//! non-negative right-hand side; a row whose slack cannot start basic gets an
//! artificial column, and phase one minimises the sum of artificials.
//!
//! Pricing is Dantzig's largest reduced cost. After
//! [`LpOptions::bland_after`] consecutive degenerate pivots the solver
//! switches to Bland's smallest-index rule until a pivot makes progress.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use thiserror::Error;

/// Optimisation direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("dimension mismatch in {what}: expected {expected}, got {actual}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("variable {index} has lower bound {lower} above upper bound {upper}")]
    InvertedBounds { index: usize, lower: f64, upper: f64 },
}

/// Linear rows and variable bounds describing a polyhedron.
///
/// Rows are dense. `le_rows[k] . v <= le_rhs[k]` and
/// `eq_rows[k] . v = eq_rhs[k]`; bounds may be infinite.
#[derive(Debug, Clone, PartialEq)]
pub struct Constraints {
    pub eq_rows: Vec<Vec<f64>>,
    pub eq_rhs: Vec<f64>,
    pub le_rows: Vec<Vec<f64>>,
    pub le_rhs: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Constraints {
    /// `n_vars` variables with bounds `[0, +inf)` and no rows.
    pub fn new(n_vars: usize) -> Self {
        Self {
            eq_rows: Vec::new(),
            eq_rhs: Vec::new(),
            le_rows: Vec::new(),
            le_rhs: Vec::new(),
            lower: vec![0.0; n_vars],
            upper: vec![f64::INFINITY; n_vars],
        }
    }

    pub fn n_vars(&self) -> usize {
        self.lower.len()
    }

    pub fn n_rows(&self) -> usize {
        self.eq_rows.len() + self.le_rows.len()
    }

    pub fn add_eq(&mut self, row: Vec<f64>, rhs: f64) -> &mut Self {
        self.eq_rows.push(row);
        self.eq_rhs.push(rhs);
        self
    }

    pub fn add_le(&mut self, row: Vec<f64>, rhs: f64) -> &mut Self {
        self.le_rows.push(row);
        self.le_rhs.push(rhs);
        self
    }

    /// Stored as the negated `<=` row.
    pub fn add_ge(&mut self, row: Vec<f64>, rhs: f64) -> &mut Self {
        self.add_le(row.into_iter().map(|v| -v).collect(), -rhs)
    }

    pub fn set_bounds(&mut self, index: usize, lower: f64, upper: f64) -> &mut Self {
        self.lower[index] = lower;
        self.upper[index] = upper;
        self
    }

    /// Appends `extra` variables with the given bounds; existing rows are
    /// padded with zeros.
    pub fn extend_vars(&mut self, extra: usize, lower: f64, upper: f64) {
        for row in self.eq_rows.iter_mut().chain(self.le_rows.iter_mut()) {
            row.resize(row.len() + extra, 0.0);
        }
        self.lower.resize(self.lower.len() + extra, lower);
        self.upper.resize(self.upper.len() + extra, upper);
    }

    pub fn validate(&self) -> Result<(), LpError> {
        let n = self.n_vars();
        if self.upper.len() != n {
            return Err(LpError::DimensionMismatch {
                what: "upper bounds",
                expected: n,
                actual: self.upper.len(),
            });
        }
        if self.eq_rhs.len() != self.eq_rows.len() {
            return Err(LpError::DimensionMismatch {
                what: "equality right-hand side",
                expected: self.eq_rows.len(),
                actual: self.eq_rhs.len(),
            });
        }
        if self.le_rhs.len() != self.le_rows.len() {
            return Err(LpError::DimensionMismatch {
                what: "inequality right-hand side",
                expected: self.le_rows.len(),
                actual: self.le_rhs.len(),
            });
        }
        for row in self.eq_rows.iter().chain(&self.le_rows) {
            if row.len() != n {
                return Err(LpError::DimensionMismatch {
                    what: "constraint row",
                    expected: n,
                    actual: row.len(),
                });
            }
            if !all_finite(row) {
                return Err(LpError::NonFinite("constraint matrix"));
            }
        }
        if self.eq_rhs.iter().chain(&self.le_rhs).any(|v| !v.is_finite()) {
            return Err(LpError::NonFinite("right-hand side"));
        }
        self.validate_bounds()
    }

    /// Checks only the variable bounds.
    pub fn validate_bounds(&self) -> Result<(), LpError> {
        for (index, (&lower, &upper)) in self.lower.iter().zip(&self.upper).enumerate() {
            if lower.is_nan() || upper.is_nan() || lower == f64::INFINITY || upper == f64::NEG_INFINITY
            {
                return Err(LpError::NonFinite("bounds"));
            }
            if lower > upper {
                return Err(LpError::InvertedBounds {
                    index,
                    lower,
                    upper,
                });
            }
        }
        Ok(())
    }

    /// Largest violation of any row or bound at `v`.
    pub fn max_violation(&self, v: &[f64]) -> f64 {
        let dot = |row: &[f64]| row.iter().zip(v).map(|(a, x)| a * x).sum::<f64>();
        let eq = self
            .eq_rows
            .iter()
            .zip(&self.eq_rhs)
            .map(|(row, b)| (dot(row) - b).abs());
        let le = self
            .le_rows
            .iter()
            .zip(&self.le_rhs)
            .map(|(row, b)| (dot(row) - b).max(0.0));
        let bounds = v
            .iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(x, (l, u))| (l - x).max(x - u).max(0.0));
        eq.chain(le).chain(bounds).fold(0.0, f64::max)
    }
}

/// Branch-free finiteness test; constraint matrices can be large.
fn all_finite(xs: &[f64]) -> bool {
    const EXP: u64 = 0x7ff0_0000_0000_0000;
    !xs.iter().fold(false, |bad, v| bad | (v.to_bits() & EXP == EXP))
}

/// A linear program over [`Constraints`].
#[derive(Debug, Clone, PartialEq)]
pub struct LpProblem {
    pub objective: Vec<f64>,
    pub sense: Sense,
    pub constraints: Constraints,
}

impl LpProblem {
    pub fn new(objective: Vec<f64>, sense: Sense, constraints: Constraints) -> Self {
        Self {
            objective,
            sense,
            constraints,
        }
    }

    pub fn n_vars(&self) -> usize {
        self.constraints.n_vars()
    }

    pub fn validate(&self) -> Result<(), LpError> {
        if self.objective.len() != self.constraints.n_vars() {
            return Err(LpError::DimensionMismatch {
                what: "objective",
                expected: self.constraints.n_vars(),
                actual: self.objective.len(),
            });
        }
        if self.objective.iter().any(|v| !v.is_finite()) {
            return Err(LpError::NonFinite("objective"));
        }
        self.constraints.validate()
    }

    pub fn evaluate(&self, v: &[f64]) -> f64 {
        self.objective.iter().zip(v).map(|(c, x)| c * x).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

impl fmt::Display for LpStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Where an original variable ended up in the final basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarStatus {
    Basic,
    AtLower,
    AtUpper,
    /// Nonbasic free variable, fixed at zero.
    FreeZero,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Variable values; meaningful only when `status` is `Optimal`.
    pub x: Vec<f64>,
    pub objective: f64,
    pub basis: Vec<VarStatus>,
    /// Row multipliers, equality rows first and then `<=` rows, signed so
    /// that `objective = b'y + sum_j bound_term(d_j)` for the problem's own
    /// sense.
    pub row_duals: Vec<f64>,
    /// `c - A'y` for the original variables.
    pub reduced_costs: Vec<f64>,
    /// Basis changes plus bound flips, both phases.
    pub pivots: usize,
}

impl LpSolution {
    fn empty(status: LpStatus, n: usize, pivots: usize) -> Self {
        Self {
            status,
            x: vec![f64::NAN; n],
            objective: f64::NAN,
            basis: Vec::new(),
            row_duals: Vec::new(),
            reduced_costs: Vec::new(),
            pivots,
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }

    /// Objective of the dual solution carried by `row_duals` and
    /// `reduced_costs`. Returns `None` when the multipliers have the wrong
    /// sign or price an infinite bound.
    pub fn dual_objective(&self, problem: &LpProblem, tol: f64) -> Option<f64> {
        if !self.is_optimal() {
            return None;
        }
        let c = &problem.constraints;
        let maximize = problem.sense == Sense::Maximize;
        let n_eq = c.eq_rows.len();
        let mut value = 0.0;
        for (k, y) in self.row_duals.iter().enumerate() {
            if k < n_eq {
                value += y * c.eq_rhs[k];
            } else {
                // <= rows: y <= 0 when minimising, y >= 0 when maximising.
                if (!maximize && *y > tol) || (maximize && *y < -tol) {
                    return None;
                }
                value += y * c.le_rhs[k - n_eq];
            }
        }
        for (j, d) in self.reduced_costs.iter().enumerate() {
            let d = if maximize { -d } else { *d };
            if d.abs() <= tol {
                continue;
            }
            let bound = if d > 0.0 { c.lower[j] } else { c.upper[j] };
            if !bound.is_finite() {
                return None;
            }
            value += if maximize { -d * bound } else { d * bound };
        }
        Some(value)
    }
}

/// Tolerances and limits. The defaults are the documented solver settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LpOptions {
    /// Smallest tableau entry accepted as a pivot.
    pub pivot_tol: f64,
    /// Phase-one objective above this means infeasible.
    pub feasibility_tol: f64,
    /// Reduced costs within this of zero count as optimal.
    pub optimality_tol: f64,
    /// Consecutive degenerate pivots before Bland's rule engages.
    pub bland_after: usize,
    /// Pivot budget; `None` scales with problem size.
    pub max_pivots: Option<usize>,
    /// Relative size of the right-hand-side shift applied to `<=` rows
    /// against degeneracy. The shift is removed before the solution is
    /// reported. Zero disables it.
    pub perturbation: f64,
}

impl Default for LpOptions {
    fn default() -> Self {
        Self {
            pivot_tol: 1e-9,
            feasibility_tol: 1e-7,
            optimality_tol: 1e-9,
            bland_after: 50,
            max_pivots: None,
            perturbation: 1e-6,
        }
    }
}

/// Solves `p` with default options.
pub fn solve_lp(p: &LpProblem) -> Result<LpSolution, LpError> {
    solve_lp_with(p, &LpOptions::default())
}

pub fn solve_lp_with(p: &LpProblem, opts: &LpOptions) -> Result<LpSolution, LpError> {
    Ok(solve_lp_warm(p, opts)?.0)
}

/// Final tableau of an optimal solve. A problem that differs only in
/// variable bounds can restart from it with [`resolve_lp`].
#[derive(Debug, Clone)]
pub struct WarmStart {
    tab: Tableau,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl WarmStart {
    /// Tableau entries held, a proxy for memory use.
    pub fn size(&self) -> usize {
        self.tab.a.len()
    }
}

/// Like [`solve_lp_with`], also returning the final tableau when optimal.
pub fn solve_lp_warm(
    p: &LpProblem,
    opts: &LpOptions,
) -> Result<(LpSolution, Option<WarmStart>), LpError> {
    p.validate()?;
    let mut tab = Tableau::build(p);
    let limit = pivot_limit(&tab, opts);
    let perturbed = opts.perturbation > 0.0 && tab.perturb(opts.perturbation);

    if tab.has_artificials() {
        tab.set_phase_one_costs();
        match tab.run(opts, limit) {
            PhaseEnd::Optimal => {}
            PhaseEnd::Limit => {
                return Ok((LpSolution::empty(LpStatus::IterationLimit, p.n_vars(), tab.pivots), None))
            }
            // Phase one is bounded below by zero.
            PhaseEnd::Unbounded => unreachable!("phase one cannot be unbounded"),
        }
        let infeasibility: f64 = (0..tab.ncols)
            .filter(|&j| tab.kind[j] == ColKind::Artificial)
            .map(|j| tab.value(j))
            .sum();
        if infeasibility > opts.feasibility_tol {
            return Ok((LpSolution::empty(LpStatus::Infeasible, p.n_vars(), tab.pivots), None));
        }
        tab.retire_artificials();
    }
    tab.set_phase_two_costs();
    match finish(tab, p, opts, limit, perturbed, false) {
        // The shifted region may be unbounded while the original is empty;
        // settle it on the exact data.
        Ok((sol, _)) if sol.status == LpStatus::Unbounded && perturbed => {
            let exact = LpOptions {
                perturbation: 0.0,
                ..*opts
            };
            let (mut again, warm) = solve_lp_warm(p, &exact)?;
            again.pivots += sol.pivots;
            Ok((again, warm))
        }
        other => other,
    }
}

/// Re-solves `p` from `warm`, which must come from a problem with the same
/// objective and rows; only the bounds of `p` are validated. Bound changes
/// on variables with a finite lower bound are applied in place and primal
/// feasibility is restored by dual simplex; anything else falls back to a
/// cold solve.
pub fn resolve_lp(
    warm: WarmStart,
    p: &LpProblem,
    opts: &LpOptions,
) -> Result<(LpSolution, Option<WarmStart>), LpError> {
    let c = &p.constraints;
    let same_shape = warm.lower.len() == c.n_vars()
        && warm.upper.len() == c.upper.len()
        && warm.tab.m == c.n_rows();
    if !same_shape {
        return solve_lp_warm(p, opts);
    }
    c.validate_bounds()?;
    let WarmStart {
        mut tab,
        lower: old_lower,
        upper: old_upper,
    } = warm;
    tab.pivots = 0;
    for j in 0..c.n_vars() {
        let (l, u) = (c.lower[j], c.upper[j]);
        if l == old_lower[j] && u == old_upper[j] {
            continue;
        }
        if !tab.rebound(j, l, u, old_upper[j]) {
            return solve_lp_warm(p, opts);
        }
    }
    let limit = pivot_limit(&tab, opts);
    finish(tab, p, opts, limit, false, true)
}

fn pivot_limit(tab: &Tableau, opts: &LpOptions) -> usize {
    opts.max_pivots
        .unwrap_or_else(|| 10_000.max(50 * (tab.m + tab.ncols)))
}

/// Phase two from a dual- or primal-feasible tableau, then cleanup and
/// extraction.
fn finish(
    mut tab: Tableau,
    p: &LpProblem,
    opts: &LpOptions,
    limit: usize,
    mut perturbed: bool,
    mut dual_first: bool,
) -> Result<(LpSolution, Option<WarmStart>), LpError> {
    let n = p.n_vars();
    let mut refactors = 0;
    loop {
        if std::mem::take(&mut dual_first) {
            match tab.dual_cleanup(opts, limit) {
                PhaseEnd::Optimal => {}
                PhaseEnd::Unbounded => {
                    return Ok((LpSolution::empty(LpStatus::Infeasible, n, tab.pivots), None))
                }
                PhaseEnd::Limit => {
                    return Ok((LpSolution::empty(LpStatus::IterationLimit, n, tab.pivots), None))
                }
            }
        }
        match tab.run(opts, limit) {
            PhaseEnd::Optimal => {}
            PhaseEnd::Unbounded => {
                return Ok((LpSolution::empty(LpStatus::Unbounded, n, tab.pivots), None))
            }
            PhaseEnd::Limit => {
                return Ok((LpSolution::empty(LpStatus::IterationLimit, n, tab.pivots), None))
            }
        }
        if perturbed {
            perturbed = false;
            tab.unperturb();
            dual_first = true;
            continue;
        }
        // Rebuild from the original data when round-off has crept in, then
        // let the loop confirm optimality on the clean tableau.
        if refactors < 3 && tab.residual() > 1e-10 {
            refactors += 1;
            tab.refactor();
            dual_first = true;
            continue;
        }
        break;
    }
    let sol = tab.extract(p);
    let warm = WarmStart {
        tab,
        lower: p.constraints.lower.clone(),
        upper: p.constraints.upper.clone(),
    };
    Ok((sol, Some(warm)))
}

/// Bound violation tolerated by the first pass of the ratio test.
const HARRIS_TOL: f64 = 1e-9;

/// Deterministic value in `[0, 1)` for perturbation sizes.
fn unit_hash(i: u64) -> f64 {
    let mut z = i.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^= z >> 31;
    (z >> 11) as f64 / (1u64 << 53) as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ColKind {
    Structural,
    Slack,
    Artificial,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ColState {
    Basic(usize),
    Lower,
    Upper,
}

#[derive(Debug, Clone, Copy)]
enum ColMap {
    Shift { col: usize, lower: f64 },
    Mirror { col: usize, upper: f64 },
    Split { pos: usize, neg: usize },
}

enum PhaseEnd {
    Optimal,
    Unbounded,
    Limit,
}

enum Step {
    Flip(f64),
    Pivot { row: usize, theta: f64, to_upper: bool },
    Unbounded,
}

#[derive(Debug, Clone)]
struct Tableau {
    m: usize,
    ncols: usize,
    /// Current `B^-1 A`, row-major.
    a: Vec<f64>,
    /// Values of the basic columns.
    beta: Vec<f64>,
    basis: Vec<usize>,
    state: Vec<ColState>,
    upper: Vec<f64>,
    cost: Vec<f64>,
    /// Phase-two costs in minimisation form.
    true_cost: Vec<f64>,
    d: Vec<f64>,
    kind: Vec<ColKind>,
    /// Unpivoted matrix and right-hand side, kept for refactoring.
    a0: Arc<[f64]>,
    b0: Vec<f64>,
    /// Right-hand-side perturbation currently in effect.
    shift: Vec<f64>,
    /// Column that was the identity for each row at the start.
    identity: Vec<usize>,
    /// +1 or -1 applied to each original row.
    row_sign: Vec<f64>,
    maps: Vec<ColMap>,
    pivots: usize,
}

impl Tableau {
    fn build(p: &LpProblem) -> Self {
        let c = &p.constraints;
        let n = c.n_vars();
        let sign = if p.sense == Sense::Maximize { -1.0 } else { 1.0 };

        let mut maps = Vec::with_capacity(n);
        let mut upper = Vec::new();
        let mut true_cost = Vec::new();
        for j in 0..n {
            let (l, u) = (c.lower[j], c.upper[j]);
            let cj = sign * p.objective[j];
            if l.is_finite() {
                maps.push(ColMap::Shift {
                    col: upper.len(),
                    lower: l,
                });
                upper.push(u - l);
                true_cost.push(cj);
            } else if u.is_finite() {
                maps.push(ColMap::Mirror {
                    col: upper.len(),
                    upper: u,
                });
                upper.push(f64::INFINITY);
                true_cost.push(-cj);
            } else {
                let pos = upper.len();
                maps.push(ColMap::Split { pos, neg: pos + 1 });
                upper.extend([f64::INFINITY, f64::INFINITY]);
                true_cost.extend([cj, -cj]);
            }
        }
        let n_struct = upper.len();

        let rows: Vec<(&Vec<f64>, f64, bool)> = c
            .eq_rows
            .iter()
            .zip(&c.eq_rhs)
            .map(|(r, &b)| (r, b, true))
            .chain(c.le_rows.iter().zip(&c.le_rhs).map(|(r, &b)| (r, b, false)))
            .collect();
        let m = rows.len();

        // Internal rows over structural columns plus adjusted rhs.
        let mut dense = vec![vec![0.0; n_struct]; m];
        let mut rhs = vec![0.0; m];
        for (i, (row, b, _)) in rows.iter().enumerate() {
            let mut bi = *b;
            for (j, &aij) in row.iter().enumerate() {
                if aij == 0.0 {
                    continue;
                }
                match maps[j] {
                    ColMap::Shift { col, lower } => {
                        dense[i][col] = aij;
                        bi -= aij * lower;
                    }
                    ColMap::Mirror { col, upper } => {
                        dense[i][col] = -aij;
                        bi -= aij * upper;
                    }
                    ColMap::Split { pos, neg } => {
                        dense[i][pos] = aij;
                        dense[i][neg] = -aij;
                    }
                }
            }
            rhs[i] = bi;
        }

        let n_slack = rows.iter().filter(|r| !r.2).count();
        let row_sign: Vec<f64> = rhs.iter().map(|&b| if b < 0.0 { -1.0 } else { 1.0 }).collect();
        let n_art = rows
            .iter()
            .zip(&row_sign)
            .filter(|((_, _, eq), s)| *eq || **s < 0.0)
            .count();
        let ncols = n_struct + n_slack + n_art;

        let mut kind = vec![ColKind::Structural; n_struct];
        kind.extend(std::iter::repeat_n(ColKind::Slack, n_slack));
        kind.extend(std::iter::repeat_n(ColKind::Artificial, n_art));
        upper.resize(ncols, f64::INFINITY);
        true_cost.resize(ncols, 0.0);

        let mut a0 = vec![0.0; m * ncols];
        let mut identity = vec![0; m];
        let mut next_slack = n_struct;
        let mut next_art = n_struct + n_slack;
        for (i, (_, _, eq)) in rows.iter().enumerate() {
            let s = row_sign[i];
            let row = &mut a0[i * ncols..(i + 1) * ncols];
            for (dst, src) in row.iter_mut().zip(&dense[i]) {
                *dst = s * src;
            }
            if !eq {
                row[next_slack] = s;
                if s > 0.0 {
                    identity[i] = next_slack;
                }
                next_slack += 1;
            }
            if *eq || s < 0.0 {
                row[next_art] = 1.0;
                identity[i] = next_art;
                next_art += 1;
            }
        }
        let b0: Vec<f64> = rhs.iter().zip(&row_sign).map(|(b, s)| b * s).collect();

        let mut state = vec![ColState::Lower; ncols];
        for (i, &col) in identity.iter().enumerate() {
            state[col] = ColState::Basic(i);
        }

        Self {
            m,
            ncols,
            a: a0.clone(),
            beta: b0.clone(),
            basis: identity.clone(),
            state,
            upper,
            cost: vec![0.0; ncols],
            true_cost,
            d: vec![0.0; ncols],
            kind,
            a0: a0.into(),
            b0,
            shift: vec![0.0; m],
            identity,
            row_sign,
            maps,
            pivots: 0,
        }
    }

    /// Loosens every `<=` row whose slack starts basic by a small
    /// deterministic amount. Returns false when no row qualifies.
    fn perturb(&mut self, scale: f64) -> bool {
        let mut any = false;
        for i in 0..self.m {
            if self.kind[self.identity[i]] != ColKind::Slack {
                continue;
            }
            let eps = scale * (1.0 + self.b0[i].abs()) * (1.0 + unit_hash(i as u64));
            self.shift[i] = eps;
            self.beta[i] += eps;
            any = true;
        }
        any
    }

    /// Drops the perturbation. Column `identity[i]` of the tableau is
    /// `B^-1 e_i`, so the basic values move by `-B^-1 shift`.
    fn unperturb(&mut self) {
        let n = self.ncols;
        for i in 0..self.m {
            let eps = std::mem::take(&mut self.shift[i]);
            if eps == 0.0 {
                continue;
            }
            let col = self.identity[i];
            for k in 0..self.m {
                let a = self.a[k * n + col];
                if a != 0.0 {
                    self.beta[k] -= eps * a;
                }
            }
        }
    }

    /// Bounded dual simplex from a dual-feasible basis. `Unbounded` means
    /// the dual is unbounded, i.e. the primal is infeasible.
    fn dual_cleanup(&mut self, opts: &LpOptions, limit: usize) -> PhaseEnd {
        let n = self.ncols;
        let tol = opts.feasibility_tol * 1e-2;
        loop {
            if self.pivots >= limit {
                return PhaseEnd::Limit;
            }
            let mut leave: Option<(usize, f64)> = None;
            let mut worst = tol;
            for i in 0..self.m {
                let b = self.basis[i];
                let below = -self.beta[i];
                let above = self.beta[i] - self.upper[b];
                if below > worst {
                    worst = below;
                    leave = Some((i, 0.0));
                } else if above > worst {
                    worst = above;
                    leave = Some((i, self.upper[b]));
                }
            }
            let Some((r, target)) = leave else {
                return PhaseEnd::Optimal;
            };
            let increase = self.beta[r] < target;
            let row = &self.a[r * n..(r + 1) * n];
            let mut best: Option<(usize, f64, f64)> = None;
            let mut min_ratio = f64::INFINITY;
            let mut candidates = Vec::new();
            for j in 0..n {
                if self.upper[j] == 0.0 {
                    continue;
                }
                let alpha = row[j];
                if alpha.abs() <= opts.pivot_tol {
                    continue;
                }
                let eligible = match self.state[j] {
                    ColState::Basic(_) => false,
                    // Raising x_j moves x_B_r by -alpha.
                    ColState::Lower => (alpha < 0.0) == increase,
                    ColState::Upper => (alpha > 0.0) == increase,
                };
                if !eligible {
                    continue;
                }
                let ratio = self.d[j].abs() / alpha.abs();
                min_ratio = min_ratio.min(ratio);
                candidates.push((j, ratio, alpha));
            }
            for (j, ratio, alpha) in candidates {
                if ratio <= min_ratio + opts.optimality_tol
                    && best.is_none_or(|(_, _, a)| alpha.abs() > a.abs())
                {
                    best = Some((j, ratio, alpha));
                }
            }
            let Some((q, _, alpha)) = best else {
                return PhaseEnd::Unbounded;
            };
            let delta = (self.beta[r] - target) / alpha;
            let start = self.value(q);
            for i in 0..self.m {
                let aiq = self.a[i * n + q];
                if aiq != 0.0 {
                    self.beta[i] -= delta * aiq;
                }
            }
            let leaving = self.basis[r];
            self.state[leaving] = if target == 0.0 {
                ColState::Lower
            } else {
                ColState::Upper
            };
            self.beta[r] = start + delta;
            self.pivots += 1;
            self.pivot(r, q);
        }
    }

    /// Moves original variable `j` (currently bounded above by `old_upper`)
    /// to bounds `[l, u]`, keeping the basis. Only shifted columns with a
    /// finite new lower bound qualify.
    fn rebound(&mut self, j: usize, l: f64, u: f64, old_upper: f64) -> bool {
        let ColMap::Shift { col, lower: old } = self.maps[j] else {
            return false;
        };
        if !l.is_finite() {
            return false;
        }
        // How far the variable's reference value moves.
        let delta = match self.state[col] {
            ColState::Upper if u.is_finite() => u - old_upper,
            ColState::Upper => {
                self.state[col] = ColState::Lower;
                l - old_upper
            }
            _ => l - old,
        };
        // The internal column now measures from `l` instead of `old`.
        let n = self.ncols;
        if delta != 0.0 {
            for i in 0..self.m {
                let a = self.a[i * n + col];
                if a != 0.0 {
                    self.beta[i] -= delta * a;
                }
            }
        }
        if l != old {
            for i in 0..self.m {
                let a = self.a0[i * n + col];
                if a != 0.0 {
                    self.b0[i] -= (l - old) * a;
                }
            }
        }
        self.maps[j] = ColMap::Shift { col, lower: l };
        self.upper[col] = u - l;
        true
    }

    fn has_artificials(&self) -> bool {
        self.kind.contains(&ColKind::Artificial)
    }

    fn value(&self, j: usize) -> f64 {
        match self.state[j] {
            ColState::Basic(r) => self.beta[r],
            ColState::Lower => 0.0,
            ColState::Upper => self.upper[j],
        }
    }

    fn set_phase_one_costs(&mut self) {
        self.cost = self
            .kind
            .iter()
            .map(|k| if *k == ColKind::Artificial { 1.0 } else { 0.0 })
            .collect();
        self.reprice();
    }

    fn set_phase_two_costs(&mut self) {
        self.cost = self.true_cost.clone();
        self.reprice();
    }

    /// Artificials are pinned to zero and never re-enter.
    fn retire_artificials(&mut self) {
        for j in 0..self.ncols {
            if self.kind[j] == ColKind::Artificial {
                self.upper[j] = 0.0;
            }
        }
    }

    fn reprice(&mut self) {
        let n = self.ncols;
        self.d.copy_from_slice(&self.cost);
        for i in 0..self.m {
            let cb = self.cost[self.basis[i]];
            if cb == 0.0 {
                continue;
            }
            let row = &self.a[i * n..(i + 1) * n];
            for (dj, aij) in self.d.iter_mut().zip(row) {
                *dj -= cb * aij;
            }
        }
    }

    fn choose_entering(&self, opts: &LpOptions, bland: bool) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for j in 0..self.ncols {
            if self.kind[j] == ColKind::Artificial && self.upper[j] == 0.0 {
                continue;
            }
            let score = match self.state[j] {
                ColState::Basic(_) => continue,
                ColState::Lower if self.upper[j] > 0.0 => -self.d[j],
                ColState::Upper => self.d[j],
                ColState::Lower => continue,
            };
            if score > opts.optimality_tol {
                if bland {
                    return Some(j);
                }
                if best.is_none_or(|(_, s)| score > s) {
                    best = Some((j, score));
                }
            }
        }
        best.map(|(j, _)| j)
    }

    /// Two-pass (Harris) ratio test: the first pass finds the longest step
    /// that keeps every basic variable within a small tolerance of its
    /// bounds, the second picks the largest pivot among rows blocking within
    /// that step.
    fn ratio_test(&self, q: usize, dir: f64, opts: &LpOptions, bland: bool) -> Step {
        let n = self.ncols;
        let mut relaxed = f64::INFINITY;
        let mut limits = Vec::new();
        for i in 0..self.m {
            let alpha = self.a[i * n + q] * dir;
            let b = self.basis[i];
            let (room, to_upper) = if alpha > opts.pivot_tol {
                (self.beta[i].max(0.0), false)
            } else if alpha < -opts.pivot_tol && self.upper[b].is_finite() {
                ((self.upper[b] - self.beta[i]).max(0.0), true)
            } else {
                continue;
            };
            let a = alpha.abs();
            relaxed = relaxed.min((room + HARRIS_TOL) / a);
            limits.push((i, room / a, to_upper, a));
        }
        let min_theta = limits.iter().map(|l| l.1).fold(f64::INFINITY, f64::min);
        let flip = self.upper[q];
        if flip.is_finite() && flip <= min_theta + 1e-12 {
            return Step::Flip(flip);
        }
        if min_theta.is_infinite() {
            return Step::Unbounded;
        }
        let pick = if bland {
            let cutoff = min_theta + 1e-12;
            let tied: Vec<_> = limits.into_iter().filter(|l| l.1 <= cutoff).collect();
            let largest = tied.iter().map(|l| l.3).fold(0.0, f64::max);
            tied.into_iter()
                .filter(|l| l.3 >= 0.1 * largest)
                .min_by_key(|l| self.basis[l.0])
        } else {
            limits
                .into_iter()
                .filter(|l| l.1 <= relaxed)
                .max_by(|x, y| x.3.total_cmp(&y.3))
        }
        .expect("at least one blocking row");
        Step::Pivot {
            row: pick.0,
            theta: pick.1,
            to_upper: pick.2,
        }
    }

    fn run(&mut self, opts: &LpOptions, limit: usize) -> PhaseEnd {
        let mut degenerate = 0usize;
        loop {
            if self.pivots >= limit {
                return PhaseEnd::Limit;
            }
            let bland = degenerate >= opts.bland_after;
            let Some(q) = self.choose_entering(opts, bland) else {
                return PhaseEnd::Optimal;
            };
            let dir = if self.state[q] == ColState::Upper { -1.0 } else { 1.0 };
            let step = self.ratio_test(q, dir, opts, bland);
            let theta = match step {
                Step::Unbounded => return PhaseEnd::Unbounded,
                Step::Flip(t) => t,
                Step::Pivot { theta, .. } => theta,
            };
            if theta <= 1e-12 {
                degenerate += 1;
            } else {
                degenerate = 0;
            }
            let n = self.ncols;
            if theta != 0.0 {
                for i in 0..self.m {
                    let aiq = self.a[i * n + q];
                    if aiq != 0.0 {
                        self.beta[i] -= theta * dir * aiq;
                    }
                }
            }
            self.pivots += 1;
            match step {
                Step::Flip(_) => {
                    self.state[q] = if dir > 0.0 {
                        ColState::Upper
                    } else {
                        ColState::Lower
                    };
                }
                Step::Pivot { row, to_upper, .. } => {
                    let start = if dir > 0.0 { 0.0 } else { self.upper[q] };
                    let leaving = self.basis[row];
                    self.state[leaving] = if to_upper {
                        ColState::Upper
                    } else {
                        ColState::Lower
                    };
                    self.beta[row] = start + dir * theta;
                    self.pivot(row, q);
                }
                Step::Unbounded => unreachable!(),
            }
        }
    }

    fn pivot(&mut self, r: usize, q: usize) {
        let n = self.ncols;
        let piv = self.a[r * n + q];
        let (before, rest) = self.a.split_at_mut(r * n);
        let (prow, after) = rest.split_at_mut(n);
        for v in prow.iter_mut() {
            *v /= piv;
        }
        prow[q] = 1.0;
        for row in before.chunks_exact_mut(n).chain(after.chunks_exact_mut(n)) {
            let f = row[q];
            if f == 0.0 {
                continue;
            }
            for (v, p) in row.iter_mut().zip(prow.iter()) {
                *v -= f * p;
            }
            row[q] = 0.0;
        }
        let f = self.d[q];
        if f != 0.0 {
            for (v, p) in self.d.iter_mut().zip(prow.iter()) {
                *v -= f * p;
            }
            self.d[q] = 0.0;
        }
        self.basis[r] = q;
        self.state[q] = ColState::Basic(r);
    }

    /// Largest absolute residual of the internal rows at the current point.
    fn residual(&self) -> f64 {
        let n = self.ncols;
        let nonzero: Vec<(usize, f64)> = (0..n)
            .map(|j| (j, self.value(j)))
            .filter(|&(_, v)| v != 0.0)
            .collect();
        (0..self.m)
            .map(|i| {
                let row = &self.a0[i * n..(i + 1) * n];
                let lhs: f64 = nonzero.iter().map(|&(j, v)| row[j] * v).sum();
                (lhs - self.b0[i]).abs() / (1.0 + self.b0[i].abs())
            })
            .fold(0.0, f64::max)
    }

    /// Recomputes `B^-1 A`, basic values and reduced costs from the original
    /// data.
    fn refactor(&mut self) {
        let (m, n) = (self.m, self.ncols);
        if m == 0 {
            return;
        }
        let b = DMatrix::from_fn(m, m, |i, k| self.a0[i * n + self.basis[k]]);
        let lu = b.lu();
        let full = DMatrix::from_fn(m, n, |i, j| self.a0[i * n + j]);
        let Some(inv_a) = lu.solve(&full) else {
            return;
        };
        let mut rhs = nalgebra::DVector::from_fn(m, |i, _| self.b0[i] + self.shift[i]);
        for j in 0..n {
            if self.state[j] == ColState::Upper {
                for i in 0..m {
                    rhs[i] -= self.a0[i * n + j] * self.upper[j];
                }
            }
        }
        let Some(beta) = lu.solve(&rhs) else {
            return;
        };
        for i in 0..m {
            for j in 0..n {
                self.a[i * n + j] = inv_a[(i, j)];
            }
            self.beta[i] = beta[i];
        }
        self.reprice();
    }

    fn extract(&self, p: &LpProblem) -> LpSolution {
        let c = &p.constraints;
        let values: Vec<f64> = (0..self.ncols).map(|j| self.value(j)).collect();
        let mut x = Vec::with_capacity(self.maps.len());
        let mut basis = Vec::with_capacity(self.maps.len());
        for (j, map) in self.maps.iter().enumerate() {
            let (v, status) = match *map {
                ColMap::Shift { col, lower } => {
                    let status = match self.state[col] {
                        ColState::Basic(_) => VarStatus::Basic,
                        ColState::Lower => VarStatus::AtLower,
                        ColState::Upper => VarStatus::AtUpper,
                    };
                    let v = match self.state[col] {
                        ColState::Lower => lower,
                        ColState::Upper => c.upper[j],
                        ColState::Basic(_) => lower + values[col],
                    };
                    (v, status)
                }
                ColMap::Mirror { col, upper } => {
                    let status = match self.state[col] {
                        ColState::Basic(_) => VarStatus::Basic,
                        _ => VarStatus::AtUpper,
                    };
                    (upper - values[col], status)
                }
                ColMap::Split { pos, neg } => {
                    let basic = matches!(self.state[pos], ColState::Basic(_))
                        || matches!(self.state[neg], ColState::Basic(_));
                    let status = if basic {
                        VarStatus::Basic
                    } else {
                        VarStatus::FreeZero
                    };
                    (values[pos] - values[neg], status)
                }
            };
            x.push(v);
            basis.push(status);
        }
        // Clamp round-off against bounds.
        for (j, v) in x.iter_mut().enumerate() {
            *v = v.clamp(c.lower[j], c.upper[j]);
        }

        let sense = if p.sense == Sense::Maximize { -1.0 } else { 1.0 };
        let row_duals: Vec<f64> = (0..self.m)
            .map(|i| {
                let col = self.identity[i];
                let y_internal = self.cost[col] - self.d[col];
                sense * self.row_sign[i] * y_internal
            })
            .collect();
        let mut reduced_costs = p.objective.clone();
        for (row, y) in c.eq_rows.iter().chain(&c.le_rows).zip(&row_duals) {
            if *y != 0.0 {
                for (d, a) in reduced_costs.iter_mut().zip(row) {
                    *d -= y * a;
                }
            }
        }
        LpSolution {
            status: LpStatus::Optimal,
            objective: p.evaluate(&x),
            x,
            basis,
            row_duals,
            reduced_costs,
            pivots: self.pivots,
        }
    }
}
