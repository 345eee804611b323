//! Cross-module invariants: engine equivalences, live tableau-vs-oracle
//! identities, initialization identities, and randomized structure checks.

#![allow(clippy::needless_range_loop)]

mod common;

use common::*;
use proptest::prelude::*;
use whittle::gen::{gen_random, SplitMix64};
use whittle::{
    bisect_index, check_identities, cp_index, fp_index, initial_tableau, lu_factor, lu_solve,
    marginal_metrics, occupation_measures, policy_metrics, rp_index, run_index, scaled_residual,
    solve_price, ActiveSet, ActiveSetFamily, Base, DenseMatrix, Direction, EngineKind,
    EngineOptions, FlopCounter,
};

#[test]
fn instances_and_results_are_shareable_across_threads() {
    fn assert_send_sync<T: Send + Sync>() {}
    assert_send_sync::<whittle::Instance>();
    assert_send_sync::<whittle::IndexResultF64>();
    assert_send_sync::<whittle::Tableau<f64>>();
}

#[test]
fn oracle_metrics_bundle_is_consistent() {
    let inst = gen_random(5, 0.8, 60);
    let s = ActiveSet::from_states(5, &[0, 3]);
    let p = vec![0.2; 5];
    let bundle = whittle::oracle_metrics(&inst, &s, &p).unwrap();
    let (f, g) = policy_metrics(&inst, &s).unwrap();
    assert_eq!(bundle.f, f);
    assert_eq!(bundle.g, g);
    for i in 0..5 {
        assert!(bundle.x1[i] >= -1e-12 && bundle.x0[i] >= -1e-12);
        if s.contains(i) {
            assert_eq!(bundle.x0[i], 0.0);
        } else {
            assert_eq!(bundle.x1[i], 0.0);
        }
    }
}

#[test]
fn engines_agree_on_random_instances() {
    for seed in 0..12u64 {
        let n = [5, 17, 40][seed as usize % 3];
        let inst = gen_random(n, 0.8, seed);
        let fp = fp_index(&inst, ActiveSetFamily::Full).unwrap();
        let rp = rp_index(&inst, ActiveSetFamily::Full).unwrap();
        let cp = cp_index(&inst, ActiveSetFamily::Full, Direction::TopDown).unwrap();
        assert!(whittle_close(&fp.whittle, &rp.whittle, 1e-9), "seed {seed}");
        assert!(whittle_close(&fp.whittle, &cp.whittle, 1e-9), "seed {seed}");
        assert!(orders_agree_up_to_ties(
            &fp.order,
            &rp.order,
            &fp.whittle,
            1e-9
        ));
        assert!(orders_agree_up_to_ties(
            &fp.order,
            &cp.order,
            &fp.whittle,
            1e-9
        ));
    }
}

#[test]
fn bottom_up_matches_top_down_on_pcl_indexable_instances() {
    for seed in 0..8u64 {
        let n = 4 + (seed as usize % 13);
        let inst = gen_random(n, 0.8, 77 + seed);
        let td = cp_index(&inst, ActiveSetFamily::Full, Direction::TopDown).unwrap();
        let bu = cp_index(&inst, ActiveSetFamily::Full, Direction::BottomUp).unwrap();
        assert!(td.pcl_positive && bu.pcl_positive);
        assert!(whittle_close(&td.whittle, &bu.whittle, 1e-9), "seed {seed}");
        let reversed: Vec<usize> = bu.order.iter().rev().copied().collect();
        assert!(orders_agree_up_to_ties(
            &td.order,
            &reversed,
            &td.whittle,
            1e-9
        ));
    }
}

#[test]
fn cp_tableau_reduced_costs_match_the_oracle_at_every_step() {
    for seed in [3u64, 19, 31] {
        let n = 6 + (seed as usize % 9);
        let inst = gen_random(n, 0.8, seed);
        for direction in [Direction::TopDown, Direction::BottomUp] {
            let run = run_index(
                &inst,
                ActiveSetFamily::Full,
                EngineKind::Cp(direction),
                &EngineOptions {
                    record_trace: true,
                    ..Default::default()
                },
            )
            .unwrap();
            for record in run.trace.unwrap() {
                let s = ActiveSet::from_states(n, &record.active);
                let (g_oracle, f_oracle) = marginal_metrics(&inst, &s).unwrap();
                for &(state, g, f) in &record.metrics {
                    let tol = |x: f64| 1e-9 * (1.0 + x.abs());
                    assert!(
                        (g - g_oracle[state]).abs() <= tol(g_oracle[state]),
                        "seed {seed} {direction:?} step {} state {state}: g {g} vs {}",
                        record.step,
                        g_oracle[state]
                    );
                    assert!(
                        (f - f_oracle[state]).abs() <= tol(f_oracle[state]),
                        "seed {seed} {direction:?} step {} state {state}: f {f} vs {}",
                        record.step,
                        f_oracle[state]
                    );
                }
            }
        }
    }
}

#[test]
fn fp_trace_matches_the_oracle_on_remaining_states() {
    let inst = gen_random(9, 0.8, 5);
    let run = run_index(
        &inst,
        ActiveSetFamily::Full,
        EngineKind::Fp,
        &EngineOptions {
            record_trace: true,
            ..Default::default()
        },
    )
    .unwrap();
    for record in run.trace.unwrap() {
        let s = ActiveSet::from_states(9, &record.active);
        let (g_oracle, f_oracle) = marginal_metrics(&inst, &s).unwrap();
        for &(state, g, f) in &record.metrics {
            assert!((g - g_oracle[state]).abs() <= 1e-9 * (1.0 + g_oracle[state].abs()));
            assert!((f - f_oracle[state]).abs() <= 1e-9 * (1.0 + f_oracle[state].abs()));
        }
    }
}

#[test]
fn initialization_identity_holds_for_semi_markov_instances() {
    for seed in 0..6u64 {
        let n = 3 + (seed as usize % 10);
        let inst = random_semi_markov(n, 900 + seed);
        let tab = initial_tableau(&inst, Base::Empty, None).unwrap();
        let eye_minus = |action: u8| {
            DenseMatrix::from_fn(n, n, |i, j| {
                let identity = if i == j { 1.0 } else { 0.0 };
                identity - inst.psi(action).get(i, j)
            })
        };
        // (A⁰)ᵀ(I − Ψ⁰) = (I − Ψ¹), checked as a scaled residual.
        let res = scaled_residual(
            &eye_minus(0).transpose(),
            tab.matrix(),
            &eye_minus(1).transpose(),
        );
        assert!(res.unwrap() <= 1e-10, "seed {seed}");
    }
}

#[test]
fn semi_markov_engines_agree_with_the_bisection_oracle() {
    let inst = random_semi_markov(6, 3);
    // Certify PCL-indexability with the complete per-state check first.
    let cp = cp_index(&inst, ActiveSetFamily::Full, Direction::TopDown).unwrap();
    assert!(cp.pcl_positive && cp.monotone);
    let fp = fp_index(&inst, ActiveSetFamily::Full).unwrap();
    for i in 0..6 {
        let w = fp.whittle[i];
        let oracle = bisect_index(&inst, i, (w - 1.0, w + 1.0), 1e-9).unwrap();
        assert!((w - oracle).abs() <= 1e-6, "state {i}: {w} vs {oracle}");
    }
}

#[test]
fn non_indexable_instance_is_caught_by_cp_and_by_the_dp_oracle() {
    // This draw violates marginal-resource positivity at a state that has
    // already been activated. FP only stores complement entries, so its
    // partial checks pass; CP's full-vector check and the independent DP
    // verification both flag the defect.
    let inst = random_semi_markov(6, 4242);
    let fp = fp_index(&inst, ActiveSetFamily::Full).unwrap();
    assert!(fp.pcl_positive, "FP's partial checks cannot see this one");
    let cp = cp_index(&inst, ActiveSetFamily::Full, Direction::TopDown).unwrap();
    assert!(!cp.pcl_positive);
    assert!(cp
        .violations
        .iter()
        .any(|v| matches!(v.kind, whittle::ViolationKind::NonpositiveMarginal) && v.state == 3));
    assert_eq!(whittle::pcl_diagnose(&cp).verdict, whittle::Verdict::NotPcl);
    let report = whittle::verify_indexability(&inst, &fp.whittle, 0.5).unwrap();
    assert!(!report.is_clean());
}

#[test]
fn marginal_metrics_match_two_one_step_evaluations() {
    let mut rng = SplitMix64::new(2024);
    for seed in 0..10u64 {
        let n = 3 + (seed as usize % 8);
        let inst = gen_random(n, 0.8, 500 + seed);
        let (s, _) = random_set_and_state(n, &mut rng);
        let (g, f) = marginal_metrics(&inst, &s).unwrap();
        let (f_s, g_s) = policy_metrics(&inst, &s).unwrap();
        for i in 0..n {
            let one_step = |action: u8, per_stage: &[f64], metric: &[f64]| {
                let mut acc = per_stage[i];
                for j in 0..n {
                    acc += inst.psi(action).get(i, j) * metric[j];
                }
                acc
            };
            let g_direct = one_step(1, inst.q(1), &g_s) - one_step(0, inst.q(0), &g_s);
            let f_direct = one_step(1, inst.r(1), &f_s) - one_step(0, inst.r(0), &f_s);
            assert!((g[i] - g_direct).abs() <= 1e-10 * (1.0 + g_direct.abs()));
            assert!((f[i] - f_direct).abs() <= 1e-10 * (1.0 + f_direct.abs()));
        }
    }
}

#[test]
fn occupation_measures_are_nonnegative_and_reproduce_metrics() {
    let mut rng = SplitMix64::new(77);
    for seed in 0..10u64 {
        let n = 2 + (seed as usize % 10);
        let inst = gen_random(n, 0.8, 300 + seed);
        let (s, _) = random_set_and_state(n, &mut rng);
        let p = random_distribution(n, &mut rng);
        let (x1, x0) = occupation_measures(&inst, &s, &p).unwrap();
        for i in 0..n {
            assert!(x1[i] >= -1e-12 && x0[i] >= -1e-12);
        }
        let (f_s, g_s) = policy_metrics(&inst, &s).unwrap();
        let f_direct: f64 = (0..n).map(|i| p[i] * f_s[i]).sum();
        let g_direct: f64 = (0..n).map(|i| p[i] * g_s[i]).sum();
        let f_from_x: f64 = (0..n)
            .map(|i| inst.r(1)[i] * x1[i] + inst.r(0)[i] * x0[i])
            .sum();
        let g_from_x: f64 = (0..n)
            .map(|i| inst.q(1)[i] * x1[i] + inst.q(0)[i] * x0[i])
            .sum();
        assert!((f_direct - f_from_x).abs() <= 1e-10 * (1.0 + f_direct.abs()));
        assert!((g_direct - g_from_x).abs() <= 1e-10 * (1.0 + g_direct.abs()));
    }
}

#[test]
fn resource_metric_grows_along_the_greedy_chain() {
    // Strong monotone increasingness of G^S in S, sampled along the chain
    // the top-down algorithm actually visits.
    for seed in [11u64, 23] {
        let n = 7;
        let inst = gen_random(n, 0.8, seed);
        let result = fp_index(&inst, ActiveSetFamily::Full).unwrap();
        assert!(result.pcl_positive);
        let mut s = ActiveSet::empty(n);
        for &j in &result.order {
            let (_, g_before) = policy_metrics(&inst, &s).unwrap();
            s.insert(j);
            let (_, g_after) = policy_metrics(&inst, &s).unwrap();
            let mut strict = false;
            for i in 0..n {
                assert!(
                    g_after[i] >= g_before[i] - 1e-12,
                    "component {i} decreased when adding {j}"
                );
                if g_after[i] > g_before[i] + 1e-12 {
                    strict = true;
                }
            }
            assert!(strict, "adding {j} left G^S unchanged");
        }
    }
}

#[test]
fn price_values_are_non_increasing_in_lambda() {
    let inst = gen_random(6, 0.8, 99);
    let mut previous: Option<Vec<f64>> = None;
    for step in 0..8 {
        let lambda = -1.0 + step as f64 * 0.5;
        let sol = solve_price(&inst, lambda, 1e-10).unwrap();
        if let Some(prev) = previous {
            for i in 0..6 {
                assert!(
                    sol.v[i] <= prev[i] + 1e-8,
                    "V[{i}] increased moving lambda to {lambda}"
                );
            }
        }
        previous = Some(sol.v);
    }
}

#[test]
fn identity_residuals_stay_small_on_random_draws() {
    let mut rng = SplitMix64::new(31337);
    for seed in 0..20u64 {
        let n = 2 + (seed as usize % 11);
        let inst = gen_random(n, 0.8, 7000 + seed);
        let (s, j) = random_set_and_state(n, &mut rng);
        let p = random_distribution(n, &mut rng);
        let report = check_identities(&inst, &s, j, &p).unwrap();
        assert!(
            report.max_scaled_residual() <= 1e-9,
            "seed {seed}: {:?}",
            report.checks
        );
        assert!(!report.ratio_undefined);
    }
}

#[test]
fn mid_size_instance_agrees_with_the_bisection_oracle() {
    let inst = gen_random(30, 0.8, 314);
    let fp = fp_index(&inst, ActiveSetFamily::Full).unwrap();
    for &state in &[0usize, 13, 29] {
        let w = fp.whittle[state];
        let oracle = bisect_index(&inst, state, (w - 1.0, w + 1.0), 1e-9).unwrap();
        assert!((w - oracle).abs() <= 1e-7, "state {state}: {w} vs {oracle}");
    }
}

#[test]
fn threshold_family_reproduces_indices_after_relabeling_by_greedy_order() {
    // Relabel states so the full-family greedy order becomes 0, 1, 2, …;
    // the threshold chain then visits exactly the same active sets and must
    // reproduce the same index values.
    let n = 10;
    let inst = gen_random(n, 0.8, 5150);
    let full = fp_index(&inst, ActiveSetFamily::Full).unwrap();
    let rank = {
        // rank[old_state] = new label = position in the greedy order
        let mut rank = vec![0usize; n];
        for (pos, &state) in full.order.iter().enumerate() {
            rank[state] = pos;
        }
        rank
    };
    let old_of = |new: usize| full.order[new];
    let permute_matrix =
        |m: &whittle::Mat| DenseMatrix::from_fn(n, n, |i, j| m.get(old_of(i), old_of(j)));
    let permute_vec = |v: &[f64]| -> Vec<f64> { (0..n).map(|i| v[old_of(i)]).collect() };
    let relabeled = whittle::BanditInstance::new_semi_markov(
        whittle::Criterion::Discounted,
        permute_matrix(inst.psi(0)),
        permute_matrix(inst.psi(1)),
        permute_vec(inst.r(0)),
        permute_vec(inst.r(1)),
        permute_vec(inst.q(0)),
        permute_vec(inst.q(1)),
        permute_vec(inst.mtilde(0)),
        permute_vec(inst.mtilde(1)),
    )
    .unwrap();
    for kind in [
        EngineKind::Fp,
        EngineKind::Rp,
        EngineKind::Cp(Direction::TopDown),
        EngineKind::Cp(Direction::BottomUp),
    ] {
        let run = run_index(
            &relabeled,
            ActiveSetFamily::Threshold,
            kind,
            &EngineOptions::default(),
        )
        .unwrap();
        for old_state in 0..n {
            let expected = full.whittle[old_state];
            let got = run.result.whittle[rank[old_state]];
            assert!(
                (expected - got).abs() <= 1e-9 * (1.0 + expected.abs()),
                "{kind:?} state {old_state}: {expected} vs {got}"
            );
        }
    }
}

#[test]
fn average_criterion_engines_agree_with_each_other() {
    use whittle::gen::gen_random_average;
    for seed in [8u64, 21] {
        let inst = gen_random_average(15, seed);
        assert!(inst.is_communicating());
        let fp = fp_index(&inst, ActiveSetFamily::Full).unwrap();
        let rp = rp_index(&inst, ActiveSetFamily::Full).unwrap();
        let td = cp_index(&inst, ActiveSetFamily::Full, Direction::TopDown).unwrap();
        let bu = cp_index(&inst, ActiveSetFamily::Full, Direction::BottomUp).unwrap();
        assert!(fp.pcl_positive && fp.monotone, "seed {seed}");
        for other in [&rp.whittle, &td.whittle, &bu.whittle] {
            assert!(whittle_close(&fp.whittle, other, 1e-9), "seed {seed}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn instance_json_round_trips(n in 1usize..6, seed in 0u64..1000) {
        let inst = gen_random(n, 0.8, seed);
        let text = whittle::io::to_json(&inst);
        let back = whittle::io::from_json(&text).unwrap();
        prop_assert_eq!(inst, back);
    }

    #[test]
    fn boundaries_respect_family_membership(n in 1usize..9, bits in 0u32..512) {
        let states: Vec<usize> = (0..n).filter(|i| bits >> i & 1 == 1).collect();
        let s = ActiveSet::from_states(n, &states);
        for family in [ActiveSetFamily::Full, ActiveSetFamily::Threshold] {
            if !family.contains(&s) {
                continue;
            }
            for j in family.outer_boundary(&s).unwrap() {
                let mut grown = s.clone();
                prop_assert!(!grown.contains(j));
                grown.insert(j);
                prop_assert!(family.contains(&grown));
            }
            for i in family.inner_boundary(&s).unwrap() {
                let mut shrunk = s.clone();
                prop_assert!(shrunk.contains(i));
                shrunk.remove(i);
                prop_assert!(family.contains(&shrunk));
            }
        }
        // For the full family the outer boundary is the whole complement.
        let outer = ActiveSetFamily::Full.outer_boundary(&s).unwrap();
        prop_assert_eq!(outer.len() + s.cardinality(), n);
    }

    #[test]
    fn lu_solves_diagonally_dominant_systems(seed in 0u64..300, n in 2usize..12) {
        let mut rng = SplitMix64::new(seed);
        let nf = n as f64;
        let m = DenseMatrix::from_fn(n, n, |i, j| {
            rng.next_f64() + if i == j { nf } else { 0.0 }
        });
        let b = DenseMatrix::from_fn(n, 2, |_, _| rng.next_f64());
        let mut flops = FlopCounter::new();
        let lu = lu_factor(&m, 1e-12, &mut flops).unwrap();
        let x = lu_solve(&lu, &b, &mut flops).unwrap();
        prop_assert!(scaled_residual(&m, &x, &b).unwrap() <= 1e-10);
    }
}
