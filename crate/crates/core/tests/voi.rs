use std::sync::Arc;

use proptest::prelude::*;
use rand::Rng as _;
use voi_core::dp::{
    advantage_table, exact_performance, q_from_v, value_iteration, PolicyTable, TabularEnv, TabularMdp, TabularSsdp,
};
use voi_core::nn::{td_error, TabularQ, TabularValue};
use voi_core::rng::{derive_seed, rng_from_seed};
use voi_core::vehicle::{RewardWeights, VehicleGridConfig, VehicleGridModel, VehicleParams};
use voi_core::voi::{
    collect_inferior_transitions, evoi, evoi_montecarlo, itvoi, itvoi_vehicle, ivoi, ivoi_method_a, ivoi_method_b,
    ivoi_method_c, lemma2_check, lemma2_montecarlo, AdvantageSource, ItvoiOptions, JointModel, MethodAConfig,
    PolicyPair, PredictabilityModel, TabularCritic,
};
use voi_core::Error;

fn small_mdp() -> TabularMdp {
    let p = vec![
        vec![vec![0.7, 0.3, 0.0], vec![0.1, 0.2, 0.7]],
        vec![vec![0.0, 0.5, 0.5], vec![0.6, 0.4, 0.0]],
        vec![vec![0.3, 0.3, 0.4], vec![0.0, 0.0, 1.0]],
    ];
    let r = vec![vec![1.0, 0.0], vec![0.5, 2.0], vec![0.0, -1.0]];
    TabularMdp::from_dense(&p, &r, 0.8, vec![1.0 / 3.0; 3]).unwrap()
}

fn table_policy(t: Vec<usize>) -> impl Fn(&[f64]) -> Vec<f64> + Send + Sync {
    move |o: &[f64]| vec![t[o[0].round() as usize] as f64]
}

struct Exact {
    sol_policy: Vec<usize>,
    v: Vec<f64>,
    q: Vec<Vec<f64>>,
}

fn solve(mdp: &TabularMdp) -> Exact {
    let sol = value_iteration(mdp, 1e-13).unwrap();
    let q = q_from_v(mdp, &sol.values).unwrap();
    Exact {
        sol_policy: sol.policy,
        v: sol.values,
        q,
    }
}

#[test]
fn evoi_examples() {
    assert_eq!(evoi(-5.0, -2.0), -3.0);
    assert_eq!(evoi(1.25, 1.25), 0.0);
}

#[test]
fn identical_policies_give_exactly_zero_evoi() {
    let env = TabularEnv::new(Arc::new(small_mdp()), 50).unwrap();
    let pi = table_policy(vec![1, 0, 1]);
    let pair = PolicyPair::new(&pi, &pi);
    let est = evoi_montecarlo(&env, &pair, 64, 50, 3).unwrap();
    assert!(est.differences.iter().all(|&d| d == 0.0));
    assert_eq!(est.record.value, 0.0);
}

#[test]
fn evoi_montecarlo_interval_covers_exact_difference() {
    let mdp = Arc::new(small_mdp());
    let ex = solve(&mdp);
    let inf_t = vec![0, 0, 1];
    let j_inf = exact_performance(&mdp, &PolicyTable::Deterministic(inf_t.clone())).unwrap();
    let j_sup = exact_performance(&mdp, &PolicyTable::Deterministic(ex.sol_policy.clone())).unwrap();
    let exact = evoi(j_inf, j_sup);
    assert!(exact < 0.0);
    let env = TabularEnv::new(mdp, 150).unwrap();
    let inf = table_policy(inf_t);
    let sup = table_policy(ex.sol_policy.clone());
    let pair = PolicyPair::new(&inf, &sup);
    let mut covered = 0;
    for rep in 0..100 {
        let est = evoi_montecarlo(&env, &pair, 200, 150, derive_seed(17, 0, rep)).unwrap();
        let (lo, hi) = est.record.ci.unwrap();
        if lo <= exact && exact <= hi {
            covered += 1;
        }
    }
    assert!(covered >= 90, "95% interval covered the exact value {covered}/100 times");
}

#[test]
fn deterministic_environment_has_zero_width_interval() {
    let p = vec![vec![vec![0.0, 1.0], vec![1.0, 0.0]], vec![vec![1.0, 0.0], vec![0.0, 1.0]]];
    let r = vec![vec![1.0, 0.0], vec![0.0, 2.0]];
    let mdp = TabularMdp::from_dense(&p, &r, 0.9, vec![1.0, 0.0]).unwrap();
    let env = TabularEnv::new(Arc::new(mdp), 30).unwrap();
    let inf = table_policy(vec![1, 0]);
    let sup = table_policy(vec![0, 1]);
    let est = evoi_montecarlo(&env, &PolicyPair::new(&inf, &sup), 10, 30, 5).unwrap();
    let (lo, hi) = est.record.ci.unwrap();
    assert!(hi - lo <= 1e-9 && est.std_err <= 1e-12, "({lo}, {hi})");
}

#[test]
fn evoi_needs_two_episodes() {
    let env = TabularEnv::new(Arc::new(small_mdp()), 5).unwrap();
    let pi = table_policy(vec![0, 0, 0]);
    assert!(matches!(evoi_montecarlo(&env, &PolicyPair::new(&pi, &pi), 1, 5, 0), Err(Error::Invalid { .. })));
}

#[test]
fn ivoi_of_the_superior_action_is_zero_and_matches_the_advantage_table() {
    let mdp = small_mdp();
    let ex = solve(&mdp);
    let adv = advantage_table(&ex.q, &ex.v).unwrap();
    let critic = TabularCritic {
        q: ex.q.clone(),
        v: ex.v.clone(),
    };
    let sup = table_policy(ex.sol_policy.clone());
    let same = PolicyPair::new(&sup, &sup).with_critic(&critic);
    for s in 0..3 {
        let o = [s as f64];
        assert!(ivoi(&same, &o, &o).unwrap().abs() <= 1e-10);
        for a in 0..2 {
            let fixed = move |_: &[f64]| vec![a as f64];
            let pair = PolicyPair::new(&fixed, &sup).with_critic(&critic);
            assert!((ivoi(&pair, &o, &o).unwrap() - adv[s][a]).abs() <= 1e-12);
        }
    }
    let no_critic = PolicyPair::new(&sup, &sup);
    assert!(matches!(ivoi(&no_critic, &[0.0], &[0.0]), Err(Error::Unsupported { .. })));
}

#[test]
fn method_b_with_exact_q_reproduces_the_advantage_table() {
    let mdp = small_mdp();
    let ex = solve(&mdp);
    let adv = advantage_table(&ex.q, &ex.v).unwrap();
    let q = TabularQ(ex.q.clone());
    let sup = table_policy(ex.sol_policy.clone());
    let b = ivoi_method_b(&q, &sup, true).unwrap();
    for s in 0..3 {
        for a in 0..2 {
            assert!((b.advantage(&[s as f64], &[a as f64]).unwrap() - adv[s][a]).abs() <= 1e-8);
        }
    }
    assert!(matches!(ivoi_method_b(&q, &sup, false), Err(Error::Unsupported { .. })));
}

#[test]
fn method_c_along_transitions_averages_to_the_advantage() {
    let mdp = Arc::new(small_mdp());
    let ex = solve(&mdp);
    let v = TabularValue(ex.v.clone());
    // Exo-averaged: enumerate the successor law exactly.
    for s in 0..3 {
        for a in 0..2 {
            let mean: f64 = mdp
                .row(s, a)
                .iter()
                .map(|&(j, p)| p * td_error(&v, &[s as f64], mdp.reward(s, a), &[j as f64], mdp.gamma(), false))
                .sum();
            assert!((mean - (ex.q[s][a] - ex.v[s])).abs() <= 1e-8);
        }
    }
    // Sampled: the TD errors are one-sample advantages.
    let env = TabularEnv::new(mdp.clone(), 40).unwrap();
    let inf = table_policy(vec![1, 1, 0]);
    let sup = table_policy(ex.sol_policy.clone());
    let pair = PolicyPair::new(&inf, &sup);
    let tr = collect_inferior_transitions(&env, &pair, 40, 9).unwrap();
    assert_eq!(tr.len(), 40);
    let deltas = ivoi_method_c(&v, &tr, mdp.gamma());
    for (t, d) in tr.iter().zip(&deltas) {
        let s = t.s_sup[0] as usize;
        let a = t.a_inf[0] as usize;
        let expected = mdp.reward(s, a) + mdp.gamma() * ex.v[t.s_sup_next[0] as usize] - ex.v[s];
        assert!((d - expected).abs() <= 1e-12);
    }
}

#[test]
fn method_a_labels_match_the_advantage_table() {
    let mdp = Arc::new(small_mdp());
    let ex = solve(&mdp);
    let env = TabularEnv::new(mdp, 100_000).unwrap();
    let inf = table_policy(vec![1, 0, 1]);
    let sup = table_policy(ex.sol_policy.clone());
    let pair = PolicyPair::new(&inf, &sup);
    let cfg = MethodAConfig {
        rollout_set_size: 20,
        rollouts_per_state: 400,
        rollout_len: 150,
        ..MethodAConfig::default()
    };
    let res = ivoi_method_a(&env, &pair, &cfg, 0).unwrap();
    assert_eq!(res.labels.len(), 20);
    let mut z_sum = 0.0;
    for l in &res.labels {
        let s = l.s_sup[0] as usize;
        let a = l.a_inf[0] as usize;
        let exact = ex.q[s][a] - ex.v[s];
        if l.std_err == 0.0 {
            assert!((l.mean - exact).abs() <= 1e-8);
        } else {
            let z = (l.mean - exact) / l.std_err;
            assert!(z.abs() <= 4.0, "state {s}: z = {z}");
            z_sum += z;
        }
    }
    // Labels on the same state are strongly correlated, so only a loose
    // bound on the pooled z is meaningful.
    assert!((z_sum / res.labels.len() as f64).abs() <= 2.0);
}

#[test]
fn method_a_identical_policies_give_zero_labels() {
    let env = TabularEnv::new(Arc::new(small_mdp()), 1000).unwrap();
    let pi = table_policy(vec![1, 1, 0]);
    let cfg = MethodAConfig {
        rollout_set_size: 5,
        rollouts_per_state: 10,
        rollout_len: 50,
        ..MethodAConfig::default()
    };
    let res = ivoi_method_a(&env, &PolicyPair::new(&pi, &pi), &cfg, 1).unwrap();
    assert!(res.labels.iter().all(|l| l.mean == 0.0 && l.std_err == 0.0));
}

#[test]
fn method_a_rejects_empty_rollout_set() {
    let env = TabularEnv::new(Arc::new(small_mdp()), 10).unwrap();
    let pi = table_policy(vec![0, 0, 0]);
    let cfg = MethodAConfig {
        rollout_set_size: 0,
        ..MethodAConfig::default()
    };
    assert!(matches!(
        ivoi_method_a(&env, &PolicyPair::new(&pi, &pi), &cfg, 0),
        Err(Error::Invalid { .. })
    ));
}

fn joint(n_s: usize, n_i: usize, n_a: usize, f: impl Fn(usize, usize, usize) -> Vec<((usize, usize), f64)>) -> JointModel {
    let mut transitions = Vec::new();
    let mut rewards = Vec::new();
    for s in 0..n_s {
        for i in 0..n_i {
            for a in 0..n_a {
                transitions.push(f(s, i, a));
                rewards.push(vec![(s as f64, 1.0)]);
            }
        }
    }
    JointModel {
        n_s,
        n_i,
        n_a,
        transitions,
        rewards,
    }
}

#[test]
fn itvoi_of_independent_information_is_zero() {
    let m = joint(2, 3, 2, |s, i, a| {
        let ps = if (s + a) % 2 == 0 { [0.25, 0.75] } else { [0.5, 0.5] };
        let pi = [[0.2, 0.3, 0.5], [0.1, 0.1, 0.8], [1.0 / 3.0; 3]][i];
        let mut row = Vec::new();
        for (sn, p) in ps.iter().enumerate() {
            for (inx, q) in pi.iter().enumerate() {
                row.push(((sn, inx), p * q));
            }
        }
        row
    });
    let w = vec![1.0; m.n_cells()];
    let rep = itvoi(&m, &w, ItvoiOptions::default()).unwrap();
    assert!(rep.total.abs() <= 1e-12, "{rep:?}");
}

#[test]
fn itvoi_of_a_copied_bit_is_ln2() {
    let m = joint(2, 2, 1, |_s, i, _a| vec![((i, i), 1.0)]);
    let rep = itvoi(&m, &[1.0; 4], ItvoiOptions::default()).unwrap();
    assert!((rep.transition_kl - std::f64::consts::LN_2).abs() <= 1e-12);
    assert_eq!(rep.reward_kl, 0.0);
}

#[test]
fn itvoi_is_non_negative_with_and_without_smoothing() {
    let mut m = joint(2, 2, 2, |s, i, a| vec![(((s + i + a) % 2, i), 0.7), (((s + a) % 2, 1 - i), 0.3)]);
    let c = m.cell(0, 1, 0);
    m.rewards[c] = vec![(7.0, 0.5), (0.0, 0.5)];
    let w = [1.0, 2.0, 0.5, 1.0, 3.0, 1.0, 1.0, 0.25];
    let plain = itvoi(&m, &w, ItvoiOptions::default()).unwrap();
    let smoothed = itvoi(&m, &w, ItvoiOptions { laplace: Some(1e-3) }).unwrap();
    for rep in [plain, smoothed] {
        assert!(rep.total.is_finite() && rep.transition_kl >= 0.0 && rep.reward_kl > 0.0, "{rep:?}");
        assert!(rep.diagnostic.is_none());
    }
}

#[test]
fn itvoi_rejects_bad_weights() {
    let m = joint(2, 2, 1, |_s, i, _a| vec![((i, i), 1.0)]);
    assert!(itvoi(&m, &[0.0; 4], ItvoiOptions::default()).is_err());
    assert!(itvoi(&m, &[1.0; 3], ItvoiOptions::default()).is_err());
}

#[test]
fn vehicle_predictability_examples() {
    let constant = PredictabilityModel::from_samples(2, &[(0, 0.0), (0, 0.0), (1, 0.0)]).unwrap();
    assert_eq!(itvoi_vehicle(&constant).unwrap(), 0.0);
    let coin: Vec<(usize, f64)> = (0..1000).map(|i| (0, if i % 2 == 0 { 1.0 } else { -1.0 })).collect();
    let m = PredictabilityModel::from_samples(1, &coin).unwrap();
    assert!((itvoi_vehicle(&m).unwrap() - std::f64::consts::LN_2).abs() <= 1e-12);
    // Acceleration a deterministic function of the cell.
    let det: Vec<(usize, f64)> = (0..300).map(|i| (i % 3, (i % 3) as f64 - 1.0)).collect();
    let m = PredictabilityModel::from_samples(3, &det).unwrap();
    assert_eq!(itvoi_vehicle(&m).unwrap(), 0.0);
    assert!(PredictabilityModel::from_samples(1, &[]).is_err());
    assert!(PredictabilityModel::from_samples(1, &[(2, 0.0)]).is_err());
}

#[test]
fn lemma2_exact_on_identical_and_random_policies() {
    let mdp = small_mdp();
    let pi = PolicyTable::Deterministic(vec![1, 0, 1]);
    let rep = lemma2_check(&mdp, &pi, &pi).unwrap();
    assert_eq!((rep.evoi, rep.weighted_ivoi), (0.0, 0.0));
    let mut rng = rng_from_seed(4);
    for i in 0..10 {
        let mdp = TabularSsdp::random(derive_seed(8, 0, i), 20, 3, 3, true).unwrap().to_mdp().unwrap();
        let sup = value_iteration(&mdp, 1e-12).unwrap().policy_table();
        let inf = PolicyTable::Deterministic((0..mdp.n_states()).map(|_| rng.random_range(0..mdp.n_actions())).collect());
        let rep = lemma2_check(&mdp, &inf, &sup).unwrap();
        assert!(rep.pass && rep.gap <= 1e-8, "{rep:?}");
        let rep = lemma2_check(&mdp, &PolicyTable::uniform(mdp.n_states(), mdp.n_actions()), &sup).unwrap();
        assert!(rep.pass, "{rep:?}");
    }
}

fn small_vehicle() -> VehicleGridModel {
    let p = VehicleParams::default();
    VehicleGridModel::build(&p, &RewardWeights::default(), &VehicleGridConfig::small(), 0).unwrap()
}

#[test]
fn lemma2_montecarlo_on_discretized_vehicle() {
    let m = small_vehicle();
    let mdp = Arc::new(m.tabular.mdp.clone());
    let ex = solve(&mdp);
    // The inferior agent does not observe the predecessor acceleration.
    let map: Vec<usize> = (0..mdp.n_states())
        .map(|s| {
            let mut x = m.tabular.state_grid.point(s);
            x[3] = 0.0;
            m.state_index(&x)
        })
        .collect();
    let env = TabularEnv::new(mdp.clone(), 200).unwrap().with_inferior(map).unwrap();
    let critic = TabularCritic { q: ex.q, v: ex.v };
    let pol = table_policy(ex.sol_policy);
    let pair = PolicyPair::new(&pol, &pol).with_critic(&critic);
    let rep = lemma2_montecarlo(&env, &pair, 2000, 200, 11).unwrap();
    assert!(rep.evoi < 0.0, "{rep:?}");
    assert!(rep.pass, "{rep:?}");
}

#[test]
fn lemma2_montecarlo_needs_a_critic() {
    let env = TabularEnv::new(Arc::new(small_mdp()), 10).unwrap();
    let pi = table_policy(vec![0, 0, 0]);
    assert!(matches!(
        lemma2_montecarlo(&env, &PolicyPair::new(&pi, &pi), 10, 10, 0),
        Err(Error::Unsupported { .. })
    ));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn optimal_superior_policy_has_non_positive_voi(seed in any::<u64>(), inf_seed in any::<u64>()) {
        let mdp = TabularSsdp::random(seed, 12, 3, 3, true).unwrap().to_mdp().unwrap();
        let ex = solve(&mdp);
        let mut rng = rng_from_seed(inf_seed);
        let inf_t: Vec<usize> = (0..mdp.n_states()).map(|_| rng.random_range(0..mdp.n_actions())).collect();
        let j_inf = exact_performance(&mdp, &PolicyTable::Deterministic(inf_t.clone())).unwrap();
        let j_sup = exact_performance(&mdp, &PolicyTable::Deterministic(ex.sol_policy.clone())).unwrap();
        prop_assert!(evoi(j_inf, j_sup) <= 1e-9);
        let critic = TabularCritic { q: ex.q.clone(), v: ex.v.clone() };
        let inf = table_policy(inf_t);
        let sup = table_policy(ex.sol_policy.clone());
        let pair = PolicyPair::new(&inf, &sup).with_critic(&critic);
        for s in 0..mdp.n_states() {
            prop_assert!(ivoi(&pair, &[s as f64], &[s as f64]).unwrap() <= 1e-9);
        }
    }
}
