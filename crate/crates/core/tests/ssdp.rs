//! SSDP construction, augmentation, rollout and the Markov check.

use approx::assert_abs_diff_eq;
use proptest::prelude::*;
use voi_core::dp::{exact_performance, value_iteration, TabularSsdp};
use voi_core::ssdp::{
    augment_random_delay, augment_with_exogenous, augment_with_predictor, check_markov, discounted_return, rollout,
    DelayProcess, Distribution, ExoProcess, FnDynamics, Grid, Horizon, MarkovGrids, Policy, SsdpSpec,
};
use voi_core::vehicle::{following_spec, predecessor_exo, PredecessorModel, RewardWeights, VehicleParams};
use voi_core::Error;

fn vehicle_spec(model: PredecessorModel) -> SsdpSpec {
    let p = VehicleParams::default();
    following_spec(&p, &RewardWeights::default(), predecessor_exo(&model, &p).unwrap(), 0.99, Horizon::Finite(500)).unwrap()
}

fn lag_model() -> PredecessorModel {
    PredecessorModel::Lag {
        u_values: vec![-1.0, 0.0, 1.0],
        u_probs: vec![0.25, 0.5, 0.25],
        initial: 0.0,
    }
}

struct Constant(f64);
impl Policy for Constant {
    fn act(&self, _obs: &[f64]) -> Vec<f64> {
        vec![self.0]
    }
}

#[test]
fn vehicle_step_matches_hand_evaluated_matrices() {
    let spec = vehicle_spec(PredecessorModel::Constant { acc: 0.0 });
    let (s, r) = spec.step(&[0.0, 0.0, 0.0], &[0.0], &[0.0]).unwrap();
    assert_eq!((s, r), (vec![0.0, 0.0, 0.0], 0.0));
    let (s, _) = spec.step(&[0.0, 0.0, 0.0], &[1.0], &[0.0]).unwrap();
    for (got, want) in s.iter().zip([0.0, 0.0, 0.2]) {
        assert_abs_diff_eq!(*got, want, epsilon = 1e-12);
    }
    let (s, _) = spec.step(&[1.0, 0.5, 0.2], &[0.0], &[0.3]).unwrap();
    for (got, want) in s.iter().zip([1.03, 0.51, 0.16]) {
        assert_abs_diff_eq!(*got, want, epsilon = 1e-12);
    }
}

#[test]
fn wrong_dimensions_are_contract_errors() {
    let spec = vehicle_spec(PredecessorModel::Constant { acc: 0.0 });
    assert!(matches!(spec.step(&[0.0, 0.0], &[0.0], &[0.0]), Err(Error::Dimension { .. })));
    assert!(matches!(spec.step(&[0.0; 3], &[0.0, 1.0], &[0.0]), Err(Error::Dimension { .. })));
}

#[test]
fn augmentation_dimensions() {
    let iid = vehicle_spec(PredecessorModel::Constant { acc: 0.0 });
    assert_eq!(augment_with_exogenous(&iid).unwrap().augmented_state_dim(), 4);
    let lag = vehicle_spec(lag_model());
    assert_eq!(augment_with_exogenous(&lag).unwrap().augmented_state_dim(), 4);
    assert_eq!(augment_with_predictor(&lag, 2).unwrap().augmented_state_dim(), 5);
    assert_eq!(augment_with_predictor(&lag, 0).unwrap().augmented_state_dim(), 3);
    assert!(matches!(augment_with_predictor(&iid, 2), Err(Error::Unsupported { .. })));
    let delayed = augment_random_delay(&iid, 5, DelayProcess::constant(1)).unwrap();
    assert_eq!(delayed.augmented_state_dim(), 3 + 1 + 5 + 1);
}

#[test]
fn zero_policy_on_zero_trace_stays_at_origin() {
    let spec = vehicle_spec(PredecessorModel::Trace { acc: vec![0.0; 50] }).with_init(Distribution::constant(vec![0.0; 3])).unwrap();
    let traj = rollout(&spec, &Constant(0.0), spec.exo(), 50, 3).unwrap();
    assert_eq!(traj.steps.len(), 50);
    assert!(traj.steps.iter().all(|t| t.s_next == vec![0.0; 3] && t.r == 0.0));
    assert_eq!(discounted_return(&traj, 0.9), 0.0);
}

#[test]
fn horizon_one_gives_one_record() {
    let spec = vehicle_spec(lag_model());
    assert_eq!(rollout(&spec, &Constant(0.5), spec.exo(), 1, 0).unwrap().steps.len(), 1);
}

#[test]
fn discounted_return_examples() {
    let spec = SsdpSpec::new(
        "unit",
        1,
        1,
        FnDynamics::new(|s, _, _| (s.to_vec(), 1.0)),
        ExoProcess::none(),
        0.5,
        Horizon::Finite(3),
    )
    .unwrap();
    let traj = rollout(&spec, &Constant(0.0), spec.exo(), 3, 0).unwrap();
    assert_eq!(discounted_return(&traj, 0.0), 1.0);
    assert_eq!(discounted_return(&traj, 0.5), 1.75);
}

#[test]
fn iid_exogenous_information_is_markov() {
    let iid = vehicle_spec(PredecessorModel::Constant { acc: 0.0 })
        .with_exo(ExoProcess::Iid(Distribution::discrete_scalar(&[-1.0, 0.0, 1.0], &[1.0 / 3.0; 3]).unwrap()))
        .unwrap();
    let grids = MarkovGrids {
        state: Grid::uniform(&[-2.0, -1.0, -1.0], &[2.0, 1.0, 1.0], &[5, 5, 5]).unwrap(),
        action: Grid::uniform(&[-3.0], &[3.0], &[3]).unwrap(),
    };
    let r = check_markov(&iid, &grids, 20_000, 1).unwrap();
    assert!(r.structural_markov && r.structural_authoritative && r.markov);
}

#[test]
fn lagged_predecessor_without_its_state_is_not_markov() {
    let spec = vehicle_spec(lag_model());
    let grids = MarkovGrids {
        state: Grid::uniform(&[-2.0, -1.0, -1.0], &[2.0, 1.0, 1.0], &[5, 5, 5]).unwrap(),
        action: Grid::uniform(&[-3.0], &[3.0], &[3]).unwrap(),
    };
    let r = check_markov(&spec, &grids, 50_000, 2).unwrap();
    assert!(!r.structural_markov);
    assert!(!r.markov, "p = {}", r.p_value);
}

#[test]
fn deterministic_chain_is_markov_with_unit_p_value() {
    let spec = SsdpSpec::new(
        "chain",
        1,
        1,
        FnDynamics::new(|s, _, _| (vec![(s[0] + 1.0) % 3.0], 0.0)),
        ExoProcess::none(),
        0.9,
        Horizon::Finite(20),
    )
    .unwrap()
    .with_init(Distribution::constant(vec![0.0]))
    .unwrap();
    let grids = MarkovGrids {
        state: Grid::new(vec![vec![0.0, 1.0, 2.0]]).unwrap(),
        action: Grid::new(vec![vec![0.0]]).unwrap(),
    };
    let r = check_markov(&spec, &grids, 10_000, 0).unwrap();
    assert!(r.markov);
    assert_eq!(r.p_value, 1.0);
}

#[test]
fn augmenting_irrelevant_information_keeps_optimal_performance() {
    for seed in 0..20 {
        let mut inst = TabularSsdp::random(seed, 12, 3, 4, true).unwrap();
        let (na, nw) = (inst.n_actions, inst.n_exo);
        for s in 0..inst.n_states {
            for a in 0..na {
                let base = (s * na + a) * nw;
                for w in 1..nw {
                    inst.next[base + w] = inst.next[base];
                    inst.reward[base + w] = inst.reward[base];
                }
            }
        }
        let j = |m| {
            let sol = value_iteration(&m, 1e-12).unwrap();
            exact_performance(&m, &sol.policy_table()).unwrap()
        };
        let (plain, aug) = (j(inst.to_mdp().unwrap()), j(inst.augmented_mdp().unwrap()));
        assert_abs_diff_eq!(plain, aug, epsilon = 1e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rollouts_chain_and_repeat(seed in any::<u64>(), u in -5.0f64..5.0, horizon in 1usize..60) {
        let spec = vehicle_spec(lag_model());
        let a = rollout(&spec, &Constant(u), spec.exo(), horizon, seed).unwrap();
        let b = rollout(&spec, &Constant(u), spec.exo(), horizon, seed).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(a.steps.len(), horizon);
        for w in a.steps.windows(2) {
            prop_assert_eq!(&w[0].s_next, &w[1].s);
        }
        prop_assert_eq!(a.any_clamped(), u.abs() > VehicleParams::default().u_max);
    }

    #[test]
    fn bounded_rewards_give_bounded_returns(seed in any::<u64>(), gamma in 0.0f64..0.99) {
        let spec = vehicle_spec(lag_model());
        let traj = rollout(&spec, &Constant(1.0), spec.exo(), 200, seed).unwrap();
        let bound = traj.rewards().iter().fold(0.0f64, |m, r| m.max(r.abs())) / (1.0 - gamma);
        let g = discounted_return(&traj, gamma);
        prop_assert!(g.is_finite() && g.abs() <= bound + 1e-9);
    }

    #[test]
    fn augmented_dims_follow_field_counts(tau_max in 1usize..12) {
        let spec = vehicle_spec(lag_model());
        let d = augment_random_delay(&spec, tau_max, DelayProcess::Delivery { success_prob: 0.5 }).unwrap();
        prop_assert_eq!(d.augmented_state_dim(), 3 + 1 + tau_max + 1);
    }
}
