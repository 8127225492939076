use mdport::lp::{
    resolve_lp, solve_lp, solve_lp_warm, Constraints, LpOptions, LpProblem, LpStatus, Sense,
};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

/// Every point where `n` linearly independent constraints are tight, with the
/// equalities always among them. Boxes are finite, so a feasible problem has
/// an optimal vertex.
fn best_vertex(p: &LpProblem) -> Option<f64> {
    let c = &p.constraints;
    let n = c.n_vars();
    let mut rows: Vec<(Vec<f64>, f64)> = Vec::new();
    for (row, &b) in c.le_rows.iter().zip(&c.le_rhs) {
        rows.push((row.clone(), b));
    }
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        rows.push((e.clone(), c.lower[j]));
        rows.push((e, c.upper[j]));
    }
    let free = n - c.eq_rows.len();
    let sign = if p.sense == Sense::Maximize { -1.0 } else { 1.0 };
    let mut best: Option<f64> = None;
    for pick in subsets(rows.len(), free) {
        let mut a = DMatrix::zeros(n, n);
        let mut b = DVector::zeros(n);
        let tight = c
            .eq_rows
            .iter()
            .zip(&c.eq_rhs)
            .map(|(r, &v)| (r, v))
            .chain(pick.iter().map(|&k| (&rows[k].0, rows[k].1)));
        for (i, (r, v)) in tight.enumerate() {
            for j in 0..n {
                a[(i, j)] = r[j];
            }
            b[i] = v;
        }
        if a.determinant().abs() < 1e-9 {
            continue;
        }
        let Some(x) = a.lu().solve(&b) else { continue };
        let x: Vec<f64> = x.iter().copied().collect();
        if c.max_violation(&x) > 1e-9 {
            continue;
        }
        let f = sign * p.evaluate(&x);
        if best.is_none_or(|b| f < b) {
            best = Some(f);
        }
    }
    best.map(|f| sign * f)
}

fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![Vec::new()];
    }
    if n < k {
        return Vec::new();
    }
    let mut out = subsets(n - 1, k);
    for mut s in subsets(n - 1, k - 1) {
        s.push(n - 1);
        out.push(s);
    }
    out
}

fn coef() -> impl Strategy<Value = f64> {
    (-20i32..=20).prop_map(|v| v as f64 / 4.0)
}

prop_compose! {
    fn small_lp()(n in 1usize..=3)(
        objective in prop::collection::vec(coef(), n),
        le in prop::collection::vec((prop::collection::vec(coef(), n), -10i32..=20), 0..=3),
        eq in prop::collection::vec((prop::collection::vec(coef(), n), -5i32..=5), 0..=1),
        boxes in prop::collection::vec((-8i32..=0, 0i32..=8), n),
        maximize in any::<bool>(),
    ) -> LpProblem {
        let n = objective.len();
        let mut c = Constraints::new(n);
        for (j, (l, u)) in boxes.into_iter().enumerate() {
            c.set_bounds(j, l as f64, u as f64);
        }
        for (row, b) in le {
            c.add_le(row, b as f64 / 2.0);
        }
        if n > 1 {
            for (row, b) in eq {
                c.add_eq(row, b as f64 / 2.0);
            }
        }
        let sense = if maximize { Sense::Maximize } else { Sense::Minimize };
        LpProblem::new(objective, sense, c)
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn simplex_matches_vertex_enumeration(p in small_lp()) {
        let sol = solve_lp(&p).unwrap();
        match best_vertex(&p) {
            None => prop_assert_eq!(sol.status, LpStatus::Infeasible),
            Some(best) => {
                prop_assert_eq!(sol.status, LpStatus::Optimal);
                prop_assert!((sol.objective - best).abs() <= 1e-7 * (1.0 + best.abs()),
                    "simplex {} vs vertices {}", sol.objective, best);
                prop_assert!(p.constraints.max_violation(&sol.x) <= 1e-7);
                let dual = sol.dual_objective(&p, 1e-9).expect("dual certificate");
                prop_assert!((dual - sol.objective).abs() <= 1e-9 * (1.0 + sol.objective.abs()),
                    "primal {} dual {}", sol.objective, dual);
            }
        }
    }

    #[test]
    fn warm_restart_agrees_with_cold_solve(p in small_lp(), j in 0usize..3, cut in 0i32..=4) {
        let (first, warm) = solve_lp_warm(&p, &LpOptions::default()).unwrap();
        prop_assume!(first.status == LpStatus::Optimal);
        let j = j % p.n_vars();
        let mut q = p.clone();
        let (l, u) = (q.constraints.lower[j], q.constraints.upper[j]);
        q.constraints.set_bounds(j, l + (u - l) * cut as f64 / 8.0, u);
        let cold = solve_lp(&q).unwrap();
        let (hot, _) = resolve_lp(warm.unwrap(), &q, &LpOptions::default()).unwrap();
        prop_assert_eq!(hot.status, cold.status);
        if cold.status == LpStatus::Optimal {
            prop_assert!((hot.objective - cold.objective).abs() <= 1e-9 * (1.0 + cold.objective.abs()));
        }
    }
}

#[test]
fn unbounded_ray() {
    let mut c = Constraints::new(2);
    c.set_bounds(0, 0.0, f64::INFINITY).set_bounds(1, 0.0, f64::INFINITY);
    c.add_le(vec![1.0, -1.0], 1.0);
    let p = LpProblem::new(vec![1.0, 1.0], Sense::Maximize, c);
    assert_eq!(solve_lp(&p).unwrap().status, LpStatus::Unbounded);
}

/// Klee-Minty cube in three dimensions, the textbook bad case for Dantzig
/// pricing.
#[test]
fn klee_minty() {
    let mut c = Constraints::new(3);
    for j in 0..3 {
        c.set_bounds(j, 0.0, f64::INFINITY);
    }
    c.add_le(vec![1.0, 0.0, 0.0], 5.0);
    c.add_le(vec![4.0, 1.0, 0.0], 25.0);
    c.add_le(vec![8.0, 4.0, 1.0], 125.0);
    let p = LpProblem::new(vec![4.0, 2.0, 1.0], Sense::Maximize, c);
    let sol = solve_lp(&p).unwrap();
    assert_eq!(sol.status, LpStatus::Optimal);
    assert!((sol.objective - 125.0).abs() < 1e-9);
    assert!((sol.x[2] - 125.0).abs() < 1e-9);
}
