use mdport::lp::{solve_lp, Constraints, LpProblem, LpStatus, Sense};
use mdport::milp::{solve_milp, MilpError, MilpProblem, MilpStatus};
use proptest::prelude::*;

/// Best objective over every 0/1 assignment of the binaries, each solved as
/// an LP with the binaries fixed.
fn enumerate(p: &MilpProblem) -> Option<f64> {
    let sign = if p.base.sense == Sense::Maximize { -1.0 } else { 1.0 };
    let mut best: Option<f64> = None;
    for mask in 0u32..(1 << p.binaries.len()) {
        let mut lp = p.base.clone();
        for (k, &j) in p.binaries.iter().enumerate() {
            let v = f64::from((mask >> k) & 1);
            lp.constraints.set_bounds(j, v, v);
        }
        let sol = solve_lp(&lp).unwrap();
        if sol.status == LpStatus::Optimal && best.is_none_or(|b| sign * sol.objective < sign * b) {
            best = Some(sol.objective);
        }
    }
    best
}

fn coef() -> impl Strategy<Value = f64> {
    (-12i32..=12).prop_map(|v| v as f64 / 4.0)
}

prop_compose! {
    /// `nc` continuous columns followed by `nb` binaries. Some binaries gate
    /// a continuous column through `lo z <= x <= hi z`; the rest only appear
    /// in general rows.
    fn small_milp()(nc in 1usize..=3, nb in 1usize..=4)(
        objective in prop::collection::vec(coef(), nc + nb),
        rows in prop::collection::vec((prop::collection::vec(coef(), nc + nb), 0i32..=12), 1..=3),
        gates in prop::collection::vec(any::<bool>(), nb),
        floors in prop::collection::vec(1i32..=3, nb),
        maximize in any::<bool>(),
        nc in Just(nc),
    ) -> MilpProblem {
        let nb = gates.len();
        let total = nc + nb;
        let mut c = Constraints::new(total);
        for j in 0..nc {
            c.set_bounds(j, 0.0, 4.0);
        }
        for k in 0..nb {
            c.set_bounds(nc + k, 0.0, 1.0);
        }
        for (row, b) in rows {
            c.add_le(row, b as f64 / 2.0);
        }
        let mut objective = objective;
        for k in 0..nb {
            if gates[k] && k < nc {
                // The gated binary must not carry its own cost or rows for
                // the presolve to pick it up, so clear them.
                objective[nc + k] = 0.0;
                for row in c.le_rows.iter_mut() {
                    row[nc + k] = 0.0;
                }
                let mut floor = vec![0.0; total];
                floor[k] = -1.0;
                floor[nc + k] = floors[k] as f64 / 4.0;
                c.add_le(floor, 0.0);
                let mut ceiling = vec![0.0; total];
                ceiling[k] = 1.0;
                ceiling[nc + k] = -4.0;
                c.add_le(ceiling, 0.0);
            }
        }
        let sense = if maximize { Sense::Maximize } else { Sense::Minimize };
        MilpProblem::new(LpProblem::new(objective, sense, c), (nc..total).collect())
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn branch_and_bound_matches_enumeration(p in small_milp()) {
        let sol = solve_milp(&p, 10_000).unwrap();
        match enumerate(&p) {
            None => prop_assert_eq!(sol.status, MilpStatus::Infeasible),
            Some(best) => {
                prop_assert_eq!(sol.status, MilpStatus::Optimal);
                let got = sol.objective.unwrap();
                prop_assert!((got - best).abs() <= 1e-7 * (1.0 + best.abs()), "b&b {} vs enumeration {}", got, best);
                let x = sol.x.unwrap();
                prop_assert!(p.base.constraints.max_violation(&x) <= 1e-6);
                for &j in &p.binaries {
                    prop_assert!((x[j] - x[j].round()).abs() <= 1e-6);
                }
            }
        }
    }
}

#[test]
fn zero_node_limit_is_rejected() {
    let mut c = Constraints::new(1);
    c.set_bounds(0, 0.0, 1.0);
    let p = MilpProblem::new(LpProblem::new(vec![1.0], Sense::Maximize, c), vec![0]);
    assert!(matches!(solve_milp(&p, 0), Err(MilpError::ZeroNodeLimit)));
}

#[test]
fn node_log_is_a_tree() {
    // Knapsack with a fractional relaxation.
    let mut c = Constraints::new(3);
    for j in 0..3 {
        c.set_bounds(j, 0.0, 1.0);
    }
    c.add_le(vec![5.0, 4.0, 3.0], 7.0);
    let p = MilpProblem::new(LpProblem::new(vec![6.0, 5.0, 3.5], Sense::Maximize, c), vec![0, 1, 2]);
    let sol = solve_milp(&p, 100).unwrap();
    assert_eq!(sol.status, MilpStatus::Optimal);
    assert!((sol.objective.unwrap() - 8.5).abs() < 1e-9);
    assert_eq!(sol.log[0].parent, None);
    for rec in &sol.log[1..] {
        let parent = rec.parent.expect("child node");
        assert!(parent < rec.id);
        assert_eq!(rec.depth, sol.log[parent].depth + 1);
    }
    assert!(sol.best_bound >= sol.objective.unwrap() - 1e-9);
}

#[test]
fn node_limit_reports_incumbent() {
    let n = 12;
    let mut c = Constraints::new(n);
    for j in 0..n {
        c.set_bounds(j, 0.0, 1.0);
    }
    let weights: Vec<f64> = (0..n).map(|j| 3.0 + (j * 7 % 5) as f64 + 0.1 * j as f64).collect();
    c.add_le(weights.clone(), 20.5);
    let values: Vec<f64> = weights.iter().map(|w| w * 1.3 + 0.7).collect();
    let p = MilpProblem::new(LpProblem::new(values, Sense::Maximize, c), (0..n).collect());
    let sol = solve_milp(&p, 3).unwrap();
    assert_eq!(sol.nodes, 3);
    if sol.status == MilpStatus::IterationLimit {
        assert!(sol.best_bound >= sol.objective.unwrap_or(f64::NEG_INFINITY));
    }
}
