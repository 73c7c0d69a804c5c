use proptest::prelude::*;

use thzmec::channel::channel_gain;
use thzmec::delay_model::DelayModel;
use thzmec::numerics::{min_cost_assignment, BoxSimplexFeasibleSet, SumKind};
use thzmec::pdd::subproblems::theorem2_powers;
use thzmec::pdd::{initial_point, round_solution};
use thzmec::queueing::{erlang_c, operation_delay, operation_delay_upper};
use thzmec::scenario::ScenarioConfig;

fn permutations(n: usize, k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in permutations(n, k - 1) {
        for c in 0..n {
            if !p.contains(&c) {
                let mut q = p.clone();
                q.push(c);
                out.push(q);
            }
        }
    }
    out
}

proptest! {
    #[test]
    fn erlang_c_is_a_probability_increasing_in_load(s in 1usize..40, a in 0.01f64..0.98, b in 0.01f64..0.98) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let (cl, ch) = (erlang_c(s, lo).unwrap(), erlang_c(s, hi).unwrap());
        prop_assert!((0.0..=1.0).contains(&cl) && (0.0..=1.0).contains(&ch));
        prop_assert!(cl <= ch + 1e-15);
    }

    #[test]
    fn upper_bound_dominates_exact_delay(s in 2usize..30, mu in 0.5f64..50.0, rho in 0.01f64..0.99) {
        let lambda = rho * s as f64 * mu;
        let exact = operation_delay(s, mu, lambda).unwrap();
        let upper = operation_delay_upper(s, mu, lambda).unwrap();
        prop_assert!(exact >= 1.0 / mu);
        prop_assert!(upper >= exact);
    }

    #[test]
    fn unstable_loads_are_rejected(s in 1usize..10, mu in 0.5f64..5.0, excess in 0.0f64..3.0) {
        let lambda = s as f64 * mu * (1.0 + excess);
        prop_assert!(operation_delay(s, mu, lambda).is_err());
    }

    #[test]
    fn channel_gain_decays_with_distance(d in 1.0f64..500.0, extra in 0.1f64..100.0, k in 0.0f64..0.05) {
        let f = 0.35e12;
        let near = channel_gain(d, f, k).unwrap();
        let far = channel_gain(d + extra, f, k).unwrap();
        prop_assert!(near > far && far > 0.0);
    }

    #[test]
    fn closed_form_powers_fill_the_budget(
        l in prop::collection::vec(1e-3f64..10.0, 2..6),
        g in prop::collection::vec(1e2f64..1e6, 6),
        budget in 0.5f64..20.0,
    ) {
        let gamma = &g[..l.len()];
        let p = theorem2_powers(&l, gamma, budget).unwrap();
        prop_assert!(p.iter().all(|&x| x > 0.0));
        prop_assert!((p.iter().sum::<f64>() - budget).abs() <= 1e-9 * budget.max(1.0));
    }

    #[test]
    fn projection_is_feasible_and_idempotent(y in prop::collection::vec(-3.0f64..3.0, 2..8), target in 0.2f64..1.5) {
        let n = y.len();
        let set = BoxSimplexFeasibleSet::uniform(n, 0.0, 1.0)
            .unwrap()
            .with_group((0..n).collect(), None, SumKind::AtMost, target)
            .unwrap();
        let x = set.project(&y);
        prop_assert!(set.contains(&x, 1e-9));
        let again = set.project(&x);
        for (a, b) in x.iter().zip(&again) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn hungarian_matches_brute_force(rows in 1usize..4, extra in 0usize..2, c in prop::collection::vec(0.0f64..10.0, 20)) {
        let cols = rows + extra;
        let cost: Vec<Vec<f64>> = (0..rows).map(|r| c[r * cols..(r + 1) * cols].to_vec()).collect();
        let pick = min_cost_assignment(&cost);
        let total = |p: &[usize]| p.iter().enumerate().map(|(r, &k)| cost[r][k]).sum::<f64>();
        let best = permutations(cols, rows).iter().map(|p| total(p)).fold(f64::INFINITY, f64::min);
        prop_assert!((total(&pick) - best).abs() <= 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn rounding_yields_a_feasible_binary_point(seed in 0u64..1000, ni in 2usize..6, nm in 1usize..3) {
        let sc = ScenarioConfig {
            num_iots: ni,
            num_mecs: 2,
            num_uavs: nm.min(ni),
            area_side: 120.0,
            ..ScenarioConfig::table1()
        }
        .generate(seed)
        .unwrap();
        let model = DelayModel::new(&sc).unwrap();
        let v = initial_point(&model, seed).unwrap();
        let (rounded, _) = round_solution(&model, &v).unwrap();
        prop_assert!(rounded.check_binary_feasible(&sc, 1e-9).is_ok());
        prop_assert!(model.mec_loads(&rounded.assoc).iter().all(|&l| l < sc.queue.capacity()));
    }
}
