//! Best-first branch-and-bound over binary variables.
//!
//! Each node is the base LP with some binaries fixed through their bounds.
//! Open nodes are kept in a priority queue keyed by their parent's LP bound
//! and evaluated lazily when popped. The branching variable is the most
//! fractional binary, lowest index on ties. Whenever a node relaxation is
//! integral, and at the root via a rounding heuristic, the binaries are fixed
//! to exact 0/1 values and the LP re-solved, so every incumbent is integral
//! by construction.
//!
//! A node is pruned when its bound cannot improve the incumbent by more than
//! `rel_gap * (1 + |incumbent|)`.
//!
//! Binaries with zero cost whose only rows are two-variable links to a single
//! continuous column (the big-M pattern `m z <= x <= M z`) are eliminated
//! before the search. Their rows become bounds on the linked column, with
//! the unfixed case relaxed to the hull of the `z = 0` and `z = 1` slices.
//! That relaxation is never weaker than the LP one and node LPs lose two
//! rows per indicator. Reported points always carry the eliminated columns.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::lp::{
    resolve_lp, solve_lp_warm, Constraints, LpError, LpOptions, LpProblem, LpStatus, Sense,
    WarmStart,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MilpError {
    #[error("node limit must be positive")]
    ZeroNodeLimit,
    #[error("binary index {0} out of range")]
    BinaryOutOfRange(usize),
    #[error("binary variable {index} must have bounds within [0, 1], got [{lower}, {upper}]")]
    BinaryBounds { index: usize, lower: f64, upper: f64 },
    #[error(transparent)]
    Lp(#[from] LpError),
}

/// An LP plus a set of variables restricted to `{0, 1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct MilpProblem {
    pub base: LpProblem,
    pub binaries: Vec<usize>,
}

impl MilpProblem {
    pub fn new(base: LpProblem, binaries: Vec<usize>) -> Self {
        Self { base, binaries }
    }

    pub fn validate(&self) -> Result<(), MilpError> {
        self.base.validate()?;
        let c = &self.base.constraints;
        for &index in &self.binaries {
            if index >= c.n_vars() {
                return Err(MilpError::BinaryOutOfRange(index));
            }
            let (lower, upper) = (c.lower[index], c.upper[index]);
            if lower < 0.0 || upper > 1.0 {
                return Err(MilpError::BinaryBounds {
                    index,
                    lower,
                    upper,
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MilpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

impl fmt::Display for MilpStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MilpOptions {
    pub node_limit: usize,
    /// Distance from 0 or 1 still treated as integral.
    pub integrality_tol: f64,
    /// Relative optimality gap at which a node is pruned.
    pub rel_gap: f64,
    pub lp: LpOptions,
}

impl Default for MilpOptions {
    fn default() -> Self {
        Self {
            node_limit: 100_000,
            integrality_tol: 1e-6,
            rel_gap: 1e-7,
            lp: LpOptions::default(),
        }
    }
}

/// What happened at an evaluated node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeOutcome {
    Infeasible,
    Pruned,
    Integral,
    Branched { var: usize },
    LpFailed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeRecord {
    pub id: usize,
    pub parent: Option<usize>,
    pub depth: usize,
    /// LP relaxation objective in the problem's own sense.
    pub bound: Option<f64>,
    pub outcome: NodeOutcome,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MilpSolution {
    pub status: MilpStatus,
    /// Best integral point found, if any.
    pub x: Option<Vec<f64>>,
    pub objective: Option<f64>,
    /// Best bound over all unexplored nodes and the incumbent, in the
    /// problem's own sense.
    pub best_bound: f64,
    /// Evaluated nodes, root included.
    pub nodes: usize,
    pub lp_pivots: usize,
    pub log: Vec<NodeRecord>,
}

impl MilpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == MilpStatus::Optimal
    }
}

/// Tableau entries kept alive across open nodes for warm starts.
const WARM_BUDGET: usize = 50_000_000;

struct OpenNode {
    /// Parent bound in minimisation form; lower is better.
    key: f64,
    seq: usize,
    parent: Option<usize>,
    depth: usize,
    lower: Vec<f64>,
    upper: Vec<f64>,
    /// Parent's final tableau.
    warm: Option<Arc<WarmStart>>,
}

impl PartialEq for OpenNode {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for OpenNode {}

impl PartialOrd for OpenNode {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for OpenNode {
    // BinaryHeap is a max-heap: smallest key first, then oldest.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .key
            .total_cmp(&self.key)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

/// Solves `p` exploring at most `node_limit` nodes.
pub fn solve_milp(p: &MilpProblem, node_limit: usize) -> Result<MilpSolution, MilpError> {
    solve_milp_with(
        p,
        &MilpOptions {
            node_limit,
            ..MilpOptions::default()
        },
    )
}

pub fn solve_milp_with(p: &MilpProblem, opts: &MilpOptions) -> Result<MilpSolution, MilpError> {
    if opts.node_limit == 0 {
        return Err(MilpError::ZeroNodeLimit);
    }
    p.validate()?;
    let mut search = Search::new(p, opts);
    search.run()
}

/// Closed interval; `None` when empty.
type Slice = Option<(f64, f64)>;

fn intersect(a: Slice, lo: f64, hi: f64) -> Slice {
    let (l, u) = a?;
    let (l, u) = (l.max(lo), u.min(hi));
    (l <= u).then_some((l, u))
}

/// An eliminated binary and the rows `a x + b z <= c` tying it to column
/// `target`.
#[derive(Debug, Clone)]
struct Indicator {
    binary: usize,
    target: usize,
    rows: Vec<(f64, f64, f64)>,
    /// Range of the target with the binary at 0 and at 1.
    slices: [Slice; 2],
}

impl Indicator {
    fn bounds(&self, zl: f64, zu: f64) -> Slice {
        let off = if zl <= 0.0 { self.slices[0] } else { None };
        let on = if zu >= 1.0 { self.slices[1] } else { None };
        match (off, on) {
            (Some(a), Some(b)) => Some((a.0.min(b.0), a.1.max(b.1))),
            (a, b) => a.or(b),
        }
    }

    /// A binary value consistent with target value `x`, as close to 0 or 1
    /// as the rows allow.
    fn binary_value(&self, x: f64, zl: f64, zu: f64) -> f64 {
        let (mut lo, mut hi) = (zl, zu);
        for &(a, b, c) in &self.rows {
            let bound = (c - a * x) / b;
            if b > 0.0 {
                hi = hi.min(bound);
            } else {
                lo = lo.max(bound);
            }
        }
        let tol = 1e-9;
        if lo > hi + tol {
            return (0.5 * (lo + hi)).clamp(0.0, 1.0);
        }
        if lo <= tol {
            0.0
        } else if hi >= 1.0 - tol {
            1.0
        } else if lo < 1.0 - hi {
            lo
        } else {
            hi
        }
    }
}

/// Indices of the nonzero entries of `row`. Whole zero blocks are skipped
/// with a branch-free test since link rows are almost entirely zero.
fn nonzeros(row: &[f64]) -> Vec<usize> {
    let mut nz = Vec::new();
    for (b, block) in row.chunks(16).enumerate() {
        if block.iter().fold(0u64, |acc, v| acc | (v.to_bits() << 1)) == 0 {
            continue;
        }
        nz.extend((0..block.len()).filter(|&k| block[k] != 0.0).map(|k| b * 16 + k));
    }
    nz
}

/// The base LP with indicator binaries projected out.
struct Reduction {
    lp: LpProblem,
    /// Original column of each reduced column.
    keep: Vec<usize>,
    /// Reduced column of each original column.
    position: Vec<Option<usize>>,
    indicators: Vec<Indicator>,
    /// Indicator index of each entry of `binaries`.
    indicator_of: Vec<Option<usize>>,
}

impl Reduction {
    fn new(p: &MilpProblem) -> Self {
        let base = &p.base;
        let c = &base.constraints;
        let n = c.n_vars();
        let mut is_binary = vec![false; n];
        for &j in &p.binaries {
            is_binary[j] = true;
        }
        let mut in_eq = vec![false; n];
        for row in &c.eq_rows {
            for j in nonzeros(row) {
                in_eq[j] = true;
            }
        }
        // Rows touching each binary, and whether every such row is a link.
        let mut rows_of: Vec<Vec<usize>> = vec![Vec::new(); n];
        let mut link_target: Vec<Option<usize>> = vec![None; c.le_rows.len()];
        for (r, row) in c.le_rows.iter().enumerate() {
            let nz = nonzeros(row);
            for &j in &nz {
                if is_binary[j] {
                    rows_of[j].push(r);
                }
            }
            if let [a, b] = nz[..] {
                if is_binary[a] != is_binary[b] {
                    link_target[r] = Some(if is_binary[a] { b } else { a });
                }
            }
        }
        let mut taken = vec![false; n];
        let mut indicators = Vec::new();
        let mut indicator_of = vec![None; p.binaries.len()];
        let mut dropped_rows = vec![false; c.le_rows.len()];
        for (k, &z) in p.binaries.iter().enumerate() {
            if base.objective[z] != 0.0 || in_eq[z] || rows_of[z].is_empty() {
                continue;
            }
            let target = link_target[rows_of[z][0]];
            let Some(x) = target else { continue };
            if taken[x] || rows_of[z].iter().any(|&r| link_target[r] != Some(x)) {
                continue;
            }
            let rows: Vec<(f64, f64, f64)> = rows_of[z]
                .iter()
                .map(|&r| (c.le_rows[r][x], c.le_rows[r][z], c.le_rhs[r]))
                .collect();
            let slice = |v: f64| -> Slice {
                if v < c.lower[z] || v > c.upper[z] {
                    return None;
                }
                let mut s = Some((c.lower[x], c.upper[x]));
                for &(a, b, rhs) in &rows {
                    let bound = (rhs - b * v) / a;
                    s = if a > 0.0 {
                        intersect(s, f64::NEG_INFINITY, bound)
                    } else {
                        intersect(s, bound, f64::INFINITY)
                    };
                }
                s
            };
            taken[x] = true;
            for &r in &rows_of[z] {
                dropped_rows[r] = true;
            }
            indicator_of[k] = Some(indicators.len());
            indicators.push(Indicator {
                binary: z,
                target: x,
                slices: [slice(0.0), slice(1.0)],
                rows,
            });
        }

        let mut removed = vec![false; n];
        for ind in &indicators {
            removed[ind.binary] = true;
        }
        let keep: Vec<usize> = (0..n).filter(|&j| !removed[j]).collect();
        let mut position = vec![None; n];
        for (r, &j) in keep.iter().enumerate() {
            position[j] = Some(r);
        }
        let project = |row: &Vec<f64>| keep.iter().map(|&j| row[j]).collect::<Vec<f64>>();
        let mut reduced = Constraints::new(keep.len());
        for (r, &j) in keep.iter().enumerate() {
            reduced.set_bounds(r, c.lower[j], c.upper[j]);
        }
        for (row, &rhs) in c.eq_rows.iter().zip(&c.eq_rhs) {
            reduced.add_eq(project(row), rhs);
        }
        for (r, (row, &rhs)) in c.le_rows.iter().zip(&c.le_rhs).enumerate() {
            if !dropped_rows[r] {
                reduced.add_le(project(row), rhs);
            }
        }
        let objective = keep.iter().map(|&j| base.objective[j]).collect();
        Self {
            lp: LpProblem::new(objective, base.sense, reduced),
            keep,
            position,
            indicators,
            indicator_of,
        }
    }
}

/// LP outcome at a node, lifted back to the original columns.
struct NodeLp {
    status: LpStatus,
    objective: f64,
    x: Vec<f64>,
}

struct Search<'a> {
    p: &'a MilpProblem,
    opts: &'a MilpOptions,
    red: Reduction,
    /// Reduced LP whose binary-controlled bounds are reset for each node.
    work: LpProblem,
    /// +1 to minimise, -1 to maximise; keys are `sign * objective`.
    sign: f64,
    incumbent: Option<(f64, Vec<f64>)>,
    lp_pivots: usize,
    log: Vec<NodeRecord>,
}

impl<'a> Search<'a> {
    fn new(p: &'a MilpProblem, opts: &'a MilpOptions) -> Self {
        let sign = if p.base.sense == Sense::Maximize { -1.0 } else { 1.0 };
        let red = Reduction::new(p);
        Self {
            p,
            opts,
            work: red.lp.clone(),
            red,
            sign,
            incumbent: None,
            lp_pivots: 0,
            log: Vec::new(),
        }
    }

    fn solve_with_bounds(
        &mut self,
        lower: &[f64],
        upper: &[f64],
        warm: Option<Arc<WarmStart>>,
    ) -> Result<(NodeLp, Option<WarmStart>), MilpError> {
        let infeasible = (
            NodeLp {
                status: LpStatus::Infeasible,
                objective: f64::NAN,
                x: Vec::new(),
            },
            None,
        );
        let lp = &mut self.work;
        for (k, &j) in self.p.binaries.iter().enumerate() {
            let r = match self.red.indicator_of[k] {
                None => self.red.position[j],
                Some(i) => self.red.position[self.red.indicators[i].target],
            }
            .expect("kept column");
            lp.constraints.lower[r] = self.red.lp.constraints.lower[r];
            lp.constraints.upper[r] = self.red.lp.constraints.upper[r];
        }
        for (k, &j) in self.p.binaries.iter().enumerate() {
            match self.red.indicator_of[k] {
                None => {
                    let r = self.red.position[j].expect("kept binary");
                    lp.constraints.lower[r] = lower[k];
                    lp.constraints.upper[r] = upper[k];
                }
                Some(i) => {
                    let ind = &self.red.indicators[i];
                    let r = self.red.position[ind.target].expect("kept target");
                    let current = Some((lp.constraints.lower[r], lp.constraints.upper[r]));
                    let Some((l, u)) = ind.bounds(lower[k], upper[k]) else {
                        return Ok(infeasible);
                    };
                    let Some((l, u)) = intersect(current, l, u) else {
                        return Ok(infeasible);
                    };
                    lp.constraints.lower[r] = l;
                    lp.constraints.upper[r] = u;
                }
            }
        }
        let (sol, next) = match warm {
            Some(w) => {
                let w = Arc::try_unwrap(w).unwrap_or_else(|shared| (*shared).clone());
                resolve_lp(w, lp, &self.opts.lp)?
            }
            None => solve_lp_warm(lp, &self.opts.lp)?,
        };
        self.lp_pivots += sol.pivots;
        if sol.status != LpStatus::Optimal {
            return Ok((
                NodeLp {
                    status: sol.status,
                    objective: f64::NAN,
                    x: Vec::new(),
                },
                None,
            ));
        }
        let mut x = vec![0.0; self.p.base.n_vars()];
        for (r, &j) in self.red.keep.iter().enumerate() {
            x[j] = sol.x[r];
        }
        for (k, ind) in self.red.indicator_of.iter().enumerate() {
            if let Some(i) = ind {
                let ind = &self.red.indicators[*i];
                x[ind.binary] = ind.binary_value(x[ind.target], lower[k], upper[k]);
            }
        }
        Ok((
            NodeLp {
                status: LpStatus::Optimal,
                objective: self.p.base.evaluate(&x),
                x,
            },
            next,
        ))
    }

    fn cutoff(&self) -> f64 {
        match &self.incumbent {
            Some((key, _)) => key - self.opts.rel_gap * (1.0 + key.abs()),
            None => f64::INFINITY,
        }
    }

    /// Fixes every binary to `values` and offers the LP optimum as incumbent.
    fn try_incumbent(&mut self, values: &[f64], warm: Option<&Arc<WarmStart>>) -> Result<bool, MilpError> {
        let (sol, _) = self.solve_with_bounds(values, values, warm.cloned())?;
        if sol.status != LpStatus::Optimal {
            return Ok(false);
        }
        let key = self.sign * sol.objective;
        let better = self.incumbent.as_ref().is_none_or(|(best, _)| key < *best);
        if better {
            self.incumbent = Some((key, sol.x));
        }
        Ok(better)
    }

    fn fractionality(&self, x: &[f64]) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for &j in &self.p.binaries {
            let frac = (x[j] - x[j].round()).abs();
            if frac > self.opts.integrality_tol {
                // distance from 0.5; smaller is more fractional
                let score = (x[j] - 0.5).abs();
                if best.is_none_or(|(_, s)| score < s) {
                    best = Some((j, score));
                }
            }
        }
        best.map(|(j, _)| j)
    }

    fn run(&mut self) -> Result<MilpSolution, MilpError> {
        let nb = self.p.binaries.len();
        let c = &self.p.base.constraints;
        let root_lower: Vec<f64> = self.p.binaries.iter().map(|&j| c.lower[j].ceil()).collect();
        let root_upper: Vec<f64> = self.p.binaries.iter().map(|&j| c.upper[j].floor()).collect();

        let mut heap = BinaryHeap::new();
        heap.push(OpenNode {
            key: f64::NEG_INFINITY,
            seq: 0,
            parent: None,
            depth: 0,
            lower: root_lower,
            upper: root_upper,
            warm: None,
        });
        let mut seq = 1;
        let mut nodes = 0;
        let mut hit_limit = false;
        let mut unbounded = false;

        while let Some(node) = heap.pop() {
            if node.key >= self.cutoff() {
                // Best-first: everything left is at least as bad.
                heap.clear();
                break;
            }
            if nodes >= self.opts.node_limit {
                heap.push(node);
                hit_limit = true;
                break;
            }
            let id = nodes;
            nodes += 1;
            let (sol, warm) =
                self.solve_with_bounds(&node.lower, &node.upper, node.warm)?;
            // Keep tableaux for children only while the open list stays small.
            let warm = warm
                .filter(|w| w.size().saturating_mul(heap.len() + 2) <= WARM_BUDGET)
                .map(Arc::new);
            let record = |bound, outcome| NodeRecord {
                id,
                parent: node.parent,
                depth: node.depth,
                bound,
                outcome,
            };
            match sol.status {
                LpStatus::Optimal => {}
                LpStatus::Infeasible => {
                    self.log.push(record(None, NodeOutcome::Infeasible));
                    continue;
                }
                LpStatus::Unbounded => {
                    self.log.push(record(None, NodeOutcome::LpFailed));
                    unbounded = true;
                    break;
                }
                LpStatus::IterationLimit => {
                    self.log.push(record(None, NodeOutcome::LpFailed));
                    continue;
                }
            }
            let key = self.sign * sol.objective;
            if key >= self.cutoff() {
                self.log.push(record(Some(sol.objective), NodeOutcome::Pruned));
                continue;
            }
            let Some(var) = self.fractionality(&sol.x) else {
                let values: Vec<f64> = self.p.binaries.iter().map(|&j| sol.x[j].round()).collect();
                self.try_incumbent(&values, warm.as_ref())?;
                self.log.push(record(Some(sol.objective), NodeOutcome::Integral));
                continue;
            };
            if id == 0 {
                // Round every positive indicator up: a cheap first incumbent
                // for big-M style models.
                let values: Vec<f64> = self
                    .p
                    .binaries
                    .iter()
                    .map(|&j| if sol.x[j] > self.opts.integrality_tol { 1.0 } else { 0.0 })
                    .zip(node.lower.iter().zip(&node.upper))
                    .map(|(v, (l, u))| f64::clamp(v, *l, *u))
                    .collect();
                self.try_incumbent(&values, warm.as_ref())?;
            }
            self.log
                .push(record(Some(sol.objective), NodeOutcome::Branched { var }));
            let k = self
                .p
                .binaries
                .iter()
                .position(|&j| j == var)
                .expect("branch variable is binary");
            for value in [0.0, 1.0] {
                let mut lower = node.lower.clone();
                let mut upper = node.upper.clone();
                lower[k] = value;
                upper[k] = value;
                heap.push(OpenNode {
                    key,
                    seq,
                    parent: Some(id),
                    depth: node.depth + 1,
                    lower,
                    upper,
                    warm: warm.clone(),
                });
                seq += 1;
            }
        }
        debug_assert!(nb == self.p.binaries.len());

        let open_bound = heap.iter().map(|n| n.key).fold(f64::INFINITY, f64::min);
        let (status, x, objective, best_key) = if unbounded {
            (MilpStatus::Unbounded, None, None, f64::NEG_INFINITY)
        } else {
            match self.incumbent.take() {
                Some((key, x)) => {
                    let status = if hit_limit && open_bound < key - self.opts.rel_gap * (1.0 + key.abs()) {
                        MilpStatus::IterationLimit
                    } else {
                        MilpStatus::Optimal
                    };
                    (status, Some(x), Some(self.sign * key), open_bound.min(key))
                }
                None if hit_limit => (MilpStatus::IterationLimit, None, None, open_bound),
                None => (MilpStatus::Infeasible, None, None, f64::INFINITY),
            }
        };
        Ok(MilpSolution {
            status,
            x,
            objective,
            best_bound: self.sign * best_key,
            nodes,
            lp_pivots: self.lp_pivots,
            log: std::mem::take(&mut self.log),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn knapsack() -> MilpProblem {
        // max 5a + 4b + 3c, 2a + 3b + c <= 4 (weights), binaries.
        let mut c = Constraints::new(3);
        for j in 0..3 {
            c.set_bounds(j, 0.0, 1.0);
        }
        c.add_le(vec![2.0, 3.0, 1.0], 4.0);
        MilpProblem::new(
            LpProblem::new(vec![5.0, 4.0, 3.0], Sense::Maximize, c),
            vec![0, 1, 2],
        )
    }

    #[test]
    fn small_knapsack() {
        let sol = solve_milp(&knapsack(), 100).unwrap();
        assert_eq!(sol.status, MilpStatus::Optimal);
        assert_eq!(sol.objective, Some(8.0));
        let x = sol.x.unwrap();
        assert_eq!(x, vec![1.0, 0.0, 1.0]);
    }

    #[test]
    fn integral_root_takes_one_node() {
        let mut c = Constraints::new(2);
        c.set_bounds(0, 0.0, 1.0).set_bounds(1, 0.0, 1.0);
        c.add_le(vec![1.0, 1.0], 1.0);
        let p = MilpProblem::new(LpProblem::new(vec![2.0, 1.0], Sense::Maximize, c), vec![0, 1]);
        let relaxed = crate::lp::solve_lp(&p.base).unwrap();
        let sol = solve_milp(&p, 10).unwrap();
        assert_eq!(sol.nodes, 1);
        assert_eq!(sol.objective, Some(relaxed.objective));
    }

    #[test]
    fn infeasible_and_errors() {
        let mut c = Constraints::new(1);
        c.set_bounds(0, 0.0, 1.0);
        c.add_eq(vec![2.0], 1.0);
        let p = MilpProblem::new(LpProblem::new(vec![1.0], Sense::Minimize, c), vec![0]);
        assert_eq!(solve_milp(&p, 10).unwrap().status, MilpStatus::Infeasible);
        assert_eq!(solve_milp(&p, 0), Err(MilpError::ZeroNodeLimit));
        let mut bad = p.clone();
        bad.binaries = vec![3];
        assert_eq!(solve_milp(&bad, 1), Err(MilpError::BinaryOutOfRange(3)));
        let mut bad = p;
        bad.base.constraints.upper[0] = 2.0;
        assert!(matches!(solve_milp(&bad, 1), Err(MilpError::BinaryBounds { .. })));
    }

    #[test]
    fn node_limit_returns_incumbent_with_gap() {
        let sol = solve_milp(&knapsack(), 1).unwrap();
        assert_eq!(sol.nodes, 1);
        if sol.status == MilpStatus::IterationLimit {
            assert!(sol.best_bound >= sol.objective.unwrap_or(f64::NEG_INFINITY));
        }
    }

    #[test]
    fn deterministic_search() {
        let a = solve_milp(&knapsack(), 100).unwrap();
        let b = solve_milp(&knapsack(), 100).unwrap();
        assert_eq!(a, b);
    }
}
