//! Convex quadratic programs over a polytope, by Frank-Wolfe.
//!
//! Minimises `f(v) = c'v + v'Qv` over [`Constraints`]. Each iteration asks
//! the simplex solver for the vertex `s` minimising `grad f(v)' s`, takes the
//! Frank-Wolfe gap `g = grad f(v)'(v - s)` as an optimality certificate
//! (`f(v) - f* <= g` for convex `f`), then moves along `d = s - v` with the
//! exact step `clamp(-grad'd / (2 d'Qd), 0, 1)`, or `1` when `d'Qd <= 1e-14`.
//!
//! Plain Frank-Wolfe zigzags when the optimum sits on a low-dimensional
//! face, which is the usual case for portfolios. After every Frank-Wolfe
//! step the solver therefore *polishes*: it fixes the variables at a bound
//! and the tight rows, minimises the quadratic exactly on the remaining
//! affine subspace, and walks toward that minimiser as far as feasibility
//! allows. Both moves are feasible descent steps, so the objective never
//! increases, and termination is still decided by the Frank-Wolfe gap.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::lp::{solve_lp_with, Constraints, LpError, LpOptions, LpProblem, LpStatus, Sense};
use crate::types::{check_psd, DataError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QpError {
    #[error("quadratic term is {rows}x{cols}, expected {n}x{n}")]
    Dimension { rows: usize, cols: usize, n: usize },
    #[error("linear term has length {actual}, expected {expected}")]
    LinearLength { expected: usize, actual: usize },
    #[error("quadratic term rejected: {0}")]
    NotConvex(DataError),
    #[error("feasible region is unbounded along the gradient")]
    UnboundedRegion,
    #[error(transparent)]
    Lp(#[from] LpError),
}

/// `minimize c'v + v'Qv` subject to `constraints`.
#[derive(Debug, Clone, PartialEq)]
pub struct QpProblem {
    pub quadratic: DMatrix<f64>,
    pub linear: Vec<f64>,
    pub constraints: Constraints,
}

impl QpProblem {
    pub fn new(quadratic: DMatrix<f64>, linear: Vec<f64>, constraints: Constraints) -> Self {
        Self {
            quadratic,
            linear,
            constraints,
        }
    }

    pub fn n_vars(&self) -> usize {
        self.constraints.n_vars()
    }

    /// Shape, finiteness and convexity checks.
    pub fn validate(&self) -> Result<(), QpError> {
        self.validate_shape()?;
        check_psd(&self.quadratic).map_err(QpError::NotConvex)
    }

    /// [`QpProblem::validate`] without the eigenvalue check.
    pub fn validate_shape(&self) -> Result<(), QpError> {
        let n = self.n_vars();
        let (rows, cols) = self.quadratic.shape();
        if rows != n || cols != n {
            return Err(QpError::Dimension { rows, cols, n });
        }
        if self.linear.len() != n {
            return Err(QpError::LinearLength {
                expected: n,
                actual: self.linear.len(),
            });
        }
        if self.linear.iter().any(|v| !v.is_finite()) {
            return Err(QpError::Lp(LpError::NonFinite("linear term")));
        }
        if self.quadratic.iter().any(|v| !v.is_finite()) {
            return Err(QpError::NotConvex(DataError::NonFinite("quadratic term")));
        }
        self.constraints.validate()?;
        Ok(())
    }

    pub fn objective(&self, v: &[f64]) -> f64 {
        let x = DVector::from_column_slice(v);
        let lin: f64 = self.linear.iter().zip(v).map(|(c, x)| c * x).sum();
        lin + x.dot(&(&self.quadratic * &x))
    }

    pub fn gradient(&self, v: &[f64]) -> Vec<f64> {
        let x = DVector::from_column_slice(v);
        let qx = &self.quadratic * &x;
        self.linear
            .iter()
            .zip(qx.iter())
            .map(|(c, q)| c + 2.0 * q)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QpStatus {
    Optimal,
    Infeasible,
    IterationLimit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub status: QpStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    /// Frank-Wolfe gap at `x`; an upper bound on `objective - optimum`.
    pub fw_gap: f64,
    pub iterations: usize,
    pub polish_steps: usize,
}

impl QpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == QpStatus::Optimal
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QpOptions {
    pub max_iters: usize,
    /// Stop once `fw_gap <= gap_tol * (1 + |f|)`.
    pub gap_tol: f64,
    /// Run the face-polishing step after each Frank-Wolfe step.
    pub polish: bool,
    /// Check `Q` for positive semi-definiteness before solving.
    pub check_convexity: bool,
    pub lp: LpOptions,
}

impl Default for QpOptions {
    fn default() -> Self {
        Self {
            max_iters: 50_000,
            gap_tol: 1e-8,
            polish: true,
            check_convexity: true,
            lp: LpOptions::default(),
        }
    }
}

/// Solves `p` with at most `max_iters` Frank-Wolfe iterations.
pub fn solve_qp(p: &QpProblem, max_iters: usize) -> Result<QpSolution, QpError> {
    solve_qp_with(
        p,
        &QpOptions {
            max_iters,
            ..QpOptions::default()
        },
    )
}

pub fn solve_qp_with(p: &QpProblem, opts: &QpOptions) -> Result<QpSolution, QpError> {
    if opts.check_convexity {
        p.validate()?;
    } else {
        p.validate_shape()?;
    }
    let n = p.n_vars();

    let start = LpProblem::new(vec![0.0; n], Sense::Minimize, p.constraints.clone());
    let first = solve_lp_with(&start, &opts.lp)?;
    match first.status {
        LpStatus::Optimal => {}
        LpStatus::Infeasible | LpStatus::Unbounded | LpStatus::IterationLimit => {
            return Ok(QpSolution {
                status: QpStatus::Infeasible,
                x: Vec::new(),
                objective: f64::NAN,
                fw_gap: f64::INFINITY,
                iterations: 0,
                polish_steps: 0,
            })
        }
    }
    let mut v = first.x;
    let mut f = p.objective(&v);
    let mut oracle = LpProblem::new(vec![0.0; n], Sense::Minimize, p.constraints.clone());
    let mut polish_steps = 0;
    let mut gap = f64::INFINITY;
    let mut iterations = 0;

    while iterations < opts.max_iters {
        let g = p.gradient(&v);
        oracle.objective.clone_from(&g);
        let s = solve_lp_with(&oracle, &opts.lp)?;
        match s.status {
            LpStatus::Optimal => {}
            LpStatus::Unbounded => return Err(QpError::UnboundedRegion),
            LpStatus::Infeasible | LpStatus::IterationLimit => break,
        }
        gap = g.iter().zip(v.iter().zip(&s.x)).map(|(gi, (vi, si))| gi * (vi - si)).sum();
        if gap <= opts.gap_tol * (1.0 + f.abs()) {
            return Ok(QpSolution {
                status: QpStatus::Optimal,
                x: v,
                objective: f,
                fw_gap: gap.max(0.0),
                iterations,
                polish_steps,
            });
        }
        iterations += 1;

        let d: Vec<f64> = s.x.iter().zip(&v).map(|(si, vi)| si - vi).collect();
        let curvature = quad_form(&p.quadratic, &d);
        let slope: f64 = g.iter().zip(&d).map(|(a, b)| a * b).sum();
        let gamma = if curvature <= 1e-14 {
            1.0
        } else {
            (-slope / (2.0 * curvature)).clamp(0.0, 1.0)
        };
        let candidate: Vec<f64> = v.iter().zip(&d).map(|(vi, di)| vi + gamma * di).collect();
        let fc = p.objective(&candidate);
        if fc <= f {
            v = candidate;
            f = fc;
        }

        if opts.polish {
            polish_steps += polish(p, &mut v, &mut f);
        }
    }
    Ok(QpSolution {
        status: QpStatus::IterationLimit,
        x: v,
        objective: f,
        fw_gap: gap,
        iterations,
        polish_steps,
    })
}

fn quad_form(q: &DMatrix<f64>, d: &[f64]) -> f64 {
    let x = DVector::from_column_slice(d);
    x.dot(&(q * &x))
}

const ACTIVE_TOL: f64 = 1e-10;

/// Repeated subspace-minimisation steps from `v`; returns how many moves
/// were taken.
fn polish(p: &QpProblem, v: &mut Vec<f64>, f: &mut f64) -> usize {
    let c = &p.constraints;
    let n = v.len();
    let mut steps = 0;
    for _ in 0..(2 * (n + c.n_rows()) + 4) {
        let free: Vec<usize> = (0..n)
            .filter(|&j| v[j] > c.lower[j] + ACTIVE_TOL && v[j] < c.upper[j] - ACTIVE_TOL)
            .collect();
        if free.is_empty() {
            break;
        }
        let mut active: Vec<&[f64]> = c.eq_rows.iter().map(Vec::as_slice).collect();
        for (row, b) in c.le_rows.iter().zip(&c.le_rhs) {
            let lhs: f64 = row.iter().zip(v.iter()).map(|(a, x)| a * x).sum();
            if b - lhs <= ACTIVE_TOL * (1.0 + b.abs()) {
                active.push(row);
            }
        }
        let g = p.gradient(v);
        let Some(d_free) = subspace_direction(p, &free, &active, &g) else {
            break;
        };
        let mut d = vec![0.0; n];
        for (k, &j) in free.iter().enumerate() {
            d[j] = d_free[k];
        }
        // A round-off direction in a zero-dimensional subspace would be
        // scaled up to reach a bound and drag the rows along with it.
        let scale = v.iter().fold(1.0f64, |m, x| m.max(x.abs()));
        if d.iter().all(|x| x.abs() <= 1e-12 * scale) {
            break;
        }
        let slope: f64 = g.iter().zip(&d).map(|(a, b)| a * b).sum();
        if slope >= -1e-18 {
            break;
        }
        let curvature = quad_form(&p.quadratic, &d);
        let dd: f64 = d.iter().map(|x| x * x).sum();
        let exact = if curvature > 1e-14 * dd {
            -slope / (2.0 * curvature)
        } else {
            f64::INFINITY
        };
        let (max_step, blocker) = max_feasible_step(c, v, &d, &free);
        let step = exact.min(max_step);
        if !step.is_finite() || step <= 0.0 {
            break;
        }
        let candidate: Vec<f64> = v.iter().zip(&d).map(|(vi, di)| vi + step * di).collect();
        let mut candidate = candidate;
        if step == max_step {
            if let Some(Blocker::Bound(j, value)) = blocker {
                candidate[j] = value;
            }
        }
        for (j, x) in candidate.iter_mut().enumerate() {
            *x = x.clamp(c.lower[j], c.upper[j]);
        }
        let fc = p.objective(&candidate);
        if fc > *f || c.max_violation(&candidate) > c.max_violation(v) + 1e-12 {
            break;
        }
        *v = candidate;
        *f = fc;
        steps += 1;
        if step < max_step {
            // Reached the subspace minimiser without hitting a new constraint.
            break;
        }
    }
    steps
}

enum Blocker {
    Bound(usize, f64),
    Row,
}

fn max_feasible_step(c: &Constraints, v: &[f64], d: &[f64], free: &[usize]) -> (f64, Option<Blocker>) {
    let mut best = f64::INFINITY;
    let mut blocker = None;
    for &j in free {
        let dj = d[j];
        let t = if dj > 1e-15 {
            (c.upper[j] - v[j]) / dj
        } else if dj < -1e-15 {
            (c.lower[j] - v[j]) / dj
        } else {
            continue;
        };
        if t < best {
            best = t;
            let target = if dj > 0.0 { c.upper[j] } else { c.lower[j] };
            blocker = Some(Blocker::Bound(j, target));
        }
    }
    for (row, b) in c.le_rows.iter().zip(&c.le_rhs) {
        let rate: f64 = row.iter().zip(d).map(|(a, x)| a * x).sum();
        // Rows held tight by the subspace see only cancellation noise.
        let scale: f64 = row.iter().zip(d).map(|(a, x)| (a * x).abs()).sum();
        if rate <= 1e-15 || rate <= 1e-12 * scale {
            continue;
        }
        let lhs: f64 = row.iter().zip(v).map(|(a, x)| a * x).sum();
        let t = ((b - lhs) / rate).max(0.0);
        if t < best {
            best = t;
            blocker = Some(Blocker::Row);
        }
    }
    (best, blocker)
}

/// Minimiser of the quadratic model on `{d : d_j = 0 off free, A d = 0}`,
/// falling back to the projected negative gradient when the model is flat
/// or the Newton direction does not descend.
fn subspace_direction(
    p: &QpProblem,
    free: &[usize],
    active: &[&[f64]],
    g: &[f64],
) -> Option<Vec<f64>> {
    let k = free.len();
    let m = active.len();
    let q = &p.quadratic;
    let gf: Vec<f64> = free.iter().map(|&j| g[j]).collect();

    let solve = |hessian: &dyn Fn(usize, usize) -> f64| -> Option<Vec<f64>> {
        let size = k + m;
        let kkt = DMatrix::from_fn(size, size, |r, s| match (r < k, s < k) {
            (true, true) => hessian(r, s),
            (true, false) => active[s - k][free[r]],
            (false, true) => active[r - k][free[s]],
            (false, false) => 0.0,
        });
        let mut rhs = DVector::zeros(size);
        for (r, gr) in gf.iter().enumerate() {
            rhs[r] = -gr;
        }
        let svd = kkt.clone().svd(true, true);
        let mut sol = svd.solve(&rhs, 1e-12).ok()?;
        // One round of refinement keeps `A d` at round-off level.
        sol += svd.solve(&(&rhs - &kkt * &sol), 1e-12).ok()?;
        let residual = (&kkt * &sol - &rhs).norm();
        if residual > 1e-8 * (1.0 + rhs.norm()) {
            return None;
        }
        Some(sol.rows(0, k).iter().copied().collect())
    };
    let descends = |d: &[f64]| d.iter().zip(&gf).map(|(a, b)| a * b).sum::<f64>() < -1e-18;

    if let Some(d) = solve(&|r, s| 2.0 * q[(free[r], free[s])]) {
        if descends(&d) {
            return Some(d);
        }
    }
    let d = solve(&|r, s| if r == s { 1.0 } else { 0.0 })?;
    descends(&d).then_some(d)
}
