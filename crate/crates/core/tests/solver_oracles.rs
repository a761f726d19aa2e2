mod common;

use common::*;
use gcs_core::cuts::separate_gomory;
use gcs_core::policy::{DefaultScore, NoCuts, RandomSelector};
use gcs_core::simplex::{solve_lp, LpProblem, LpStatus};
use gcs_core::tree::{solve, CutScope, CutSelector, DecisionContext, RunStatus, SolveConfig};
use gcs_core::Result;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn simplex_matches_vertex_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for case in 0..100 {
        let lp = random_lp(&mut rng);
        let sol = solve_lp(&lp, None);
        let oracle = vertex_enum_min(&lp.objective, &dense(&lp.rows, lp.num_structural()), &lp.lower, &lp.upper);
        match oracle {
            Some((z, _)) => {
                assert_eq!(sol.status, LpStatus::Optimal, "case {case}");
                assert!((sol.objective - z).abs() <= 1e-7 * (1.0 + z.abs()), "case {case}: {} vs {z}", sol.objective);
            }
            None => assert_eq!(sol.status, LpStatus::Infeasible, "case {case}"),
        }
    }
}

/// Selects every candidate after checking it against the enumerated feasible set.
struct ValidatingAll<'a> {
    inst: &'a gcs_core::instance::MipInstance,
    checked: usize,
}

impl CutSelector for ValidatingAll<'_> {
    fn tag(&self) -> String {
        "validating".into()
    }
    fn select(&mut self, ctx: &DecisionContext<'_>) -> Result<Vec<usize>> {
        let mut local = self.inst.clone();
        local.var_lower = ctx.lower.to_vec();
        local.var_upper = ctx.upper.to_vec();
        for cut in ctx.candidates {
            let mut alpha = vec![0.0; self.inst.num_vars];
            for &(j, a) in &cut.raw.coefs {
                alpha[j] = a;
            }
            if let Some(max) = max_activity(&local, &alpha) {
                assert!(max <= cut.raw.rhs + 1e-7, "cut {:?} cuts off a feasible point ({max})", cut.raw);
            }
            assert!(cut.violation(ctx.lp_x) >= 1e-7 / 2.0);
            self.checked += 1;
        }
        Ok((0..ctx.candidates.len()).collect())
    }
}

#[test]
fn gomory_cuts_never_remove_integer_points() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut total = 0;
    for _ in 0..60 {
        let inst = random_mip(&mut rng, 8, true);
        let lp = LpProblem::from_instance(&inst);
        let sol = solve_lp(&lp, None);
        if sol.status == LpStatus::Optimal {
            for c in separate_gomory(&lp, &sol, &inst, 20, 0, 0) {
                assert!(c.violation(&sol.x) >= 1e-7);
            }
        }
        let mut sel = ValidatingAll { inst: &inst, checked: 0 };
        let cfg = SolveConfig { rounds_per_node: 3, ..Default::default() };
        let out = solve(&inst, &cfg, &mut sel).unwrap();
        total += sel.checked;
        let opt = brute_force_optimum(&inst);
        assert_eq!(out.metrics.incumbent_value.is_some(), opt.is_some());
        if let (Some(a), Some(b)) = (out.metrics.incumbent_value, opt) {
            assert!((a - b).abs() < 1e-6, "{}: {a} vs {b}", inst.name);
        }
    }
    assert!(total > 50, "too few cuts exercised: {total}");
}

#[test]
fn branch_and_cut_is_exact_for_every_selector() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for case in 0..60 {
        let inst = random_mip(&mut rng, 7, true);
        let opt = brute_force_optimum(&inst);
        for scope in [CutScope::AllNodes, CutScope::RootOnly] {
            let cfg = SolveConfig { cut_scope: scope, ..Default::default() };
            let runs = [
                solve(&inst, &cfg, NoCuts).unwrap(),
                solve(&inst, &cfg, DefaultScore::default()).unwrap(),
                solve(&inst, &cfg, RandomSelector::new(case)).unwrap(),
            ];
            for r in &runs {
                match opt {
                    Some(z) => {
                        assert_eq!(r.metrics.status, RunStatus::Optimal);
                        let v = r.metrics.incumbent_value.unwrap();
                        assert!((v - z).abs() < 1e-6, "case {case} {}: {v} vs {z}", inst.name);
                        assert!(inst.is_feasible(r.incumbent.as_ref().unwrap(), 1e-6));
                    }
                    None => assert_eq!(r.metrics.status, RunStatus::Infeasible),
                }
            }
        }
    }
}
