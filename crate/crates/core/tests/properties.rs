use proptest::prelude::*;

use cvdb::adversary::{ShiftTiming, Strategy};
use cvdb::gauss::{
    npt_min_eigenvalue, outcome_table_by_overlap, outcome_table_closed_form, partial_trace, tripartite_state,
    MeasurementModel, OutcomeTriple, TripartiteParams,
};
use cvdb::primitive::{feasibility_margin, pair_to_trit, wflip_feasible, Bit, Trit};
use cvdb::proto::transcript_jsonl;
use cvdb::validation::shift_tv_distance;
use cvdb::{full_run, PlayerId, RunConfig};

#[test]
fn pair_to_trit_is_a_bijection() {
    let bits = [Bit::Zero, Bit::One];
    let mut seen = Vec::new();
    for a in bits {
        for b in bits {
            seen.push(pair_to_trit(a, b));
        }
    }
    for t in [Trit::Zero, Trit::One, Trit::Two, Trit::Z] {
        assert_eq!(seen.iter().filter(|&&s| s == t).count(), 1);
    }
}

#[test]
fn honest_strategy_leaves_transcript_unchanged() {
    let base = RunConfig { instances: 6000, seed: 77, ..RunConfig::default() };
    let plain = full_run(&base).unwrap();
    for p in PlayerId::ALL {
        let attached = full_run(&base.clone().with_adversary(p, Strategy::Honest).unwrap()).unwrap();
        assert_eq!(transcript_jsonl(&attached.transcript), transcript_jsonl(&plain.transcript));
        assert_eq!(attached.decisions, plain.decisions);
    }
}

#[test]
fn shifts_two_away_from_honest_are_visible() {
    // Frozen floor of the conditional-table distance at the default point.
    let tv3 = shift_tv_distance(3.0, 0.2, 1.0, 0, 3.0).unwrap();
    let tvm1 = shift_tv_distance(3.0, 0.2, 1.0, 0, -1.0).unwrap();
    assert!((tv3 - 0.143_014_765_872).abs() < 1e-9, "{tv3}");
    assert!((tvm1 - 0.224_028_932_836).abs() < 1e-9, "{tvm1}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn closed_form_equals_overlap(a in 1.0f64..10.0, sigma in 0.02f64..2.0, x0 in 0.0f64..3.0) {
        let m = MeasurementModel::new(sigma, x0, 0.0).unwrap();
        let closed = outcome_table_closed_form(a, &m).unwrap();
        let generic = outcome_table_by_overlap(&tripartite_state(&TripartiteParams::new(a, x0)).unwrap(), &m).unwrap();
        for (c, g) in closed.p_abs.iter().zip(&generic.p_abs) {
            prop_assert!(((c - g) / g).abs() < 1e-8, "{c} vs {g}");
        }
    }

    #[test]
    fn conditionals_normalized_and_symmetric(a in 1.0f64..10.0, sigma in 0.02f64..2.0, x0 in 0.0f64..3.0) {
        let t = outcome_table_closed_form(a, &MeasurementModel::new(sigma, x0, 0.0).unwrap()).unwrap();
        prop_assert!((t.p_tilde.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for u in OutcomeTriple::all() {
            for v in OutcomeTriple::all() {
                if u.ones() == v.ones() {
                    prop_assert_eq!(t.p_abs(u), t.p_abs(v));
                }
            }
        }
    }

    #[test]
    fn reduced_state_ignores_own_shift(a in 1.0f64..10.0, x0 in 0.0f64..3.0, k in -10.0f64..10.0, player in 0usize..3) {
        let keep: Vec<usize> = (0..3).filter(|&m| m != player).collect();
        let mut mult = [1.0; 3];
        mult[player] = k;
        let honest = partial_trace(&tripartite_state(&TripartiteParams::new(a, x0)).unwrap(), &keep).unwrap();
        let shifted = partial_trace(&tripartite_state(&TripartiteParams::new(a, x0).with_multipliers(mult)).unwrap(), &keep).unwrap();
        prop_assert_eq!(honest, shifted);
    }

    #[test]
    fn entangled_above_one(a in 1.001f64..20.0, m in 0usize..3) {
        let st = tripartite_state(&TripartiteParams::new(a, 0.0)).unwrap();
        prop_assert!(npt_min_eigenvalue(&st, &[m]).unwrap() < 0.0);
    }

    #[test]
    fn feasibility_matches_closed_inequality(a in 1.0f64..10.0, sigma in 0.0f64..1.5) {
        let margin = feasibility_margin(a, sigma).unwrap();
        prop_assume!(margin.abs() > 1e-9);
        prop_assert_eq!(wflip_feasible(a, sigma).unwrap().feasible, margin > 0.0);
    }

    #[test]
    fn config_round_trip(
        a in 1.0f64..10.0,
        sigma in 0.01f64..1.0,
        eps in 0.0f64..0.5,
        instances in 0u32..100_000,
        seed in any::<u64>(),
        k in -5.0f64..5.0,
    ) {
        let cfg = RunConfig { a, sigma, epsilon: eps, instances, seed, ..RunConfig::default() }
            .with_adversary(PlayerId::R0, Strategy::DisplacementShift { k, when: ShiftTiming::BeforeMeasuring })
            .unwrap();
        let parsed = RunConfig::parse(&cfg.to_config_string(), None).unwrap();
        prop_assert_eq!(&parsed, &cfg);
        prop_assert_eq!(parsed.digest(), cfg.digest());
    }
}
