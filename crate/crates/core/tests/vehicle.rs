//! Follower dynamics, reward, observation models, traces and the grid model.

use std::io::Write as _;
use std::sync::Arc;

use approx::assert_abs_diff_eq;
use proptest::prelude::*;
use voi_core::nn::Environment;
use voi_core::rng::rng_from_seed;
use voi_core::ssdp::Policy;
use voi_core::vehicle::{
    control_errors, desired_headway, dynamics_step, headway, load_trajectory, observe, predecessor_acc_step, reward,
    synth_stop_and_go, ColumnMap, FollowingEnv, ObservationHistory, ObservationModel, PredecessorSource, RewardWeights,
    StopAndGoConfig, VehicleGridConfig, VehicleGridModel, VehicleParams, VehicleState,
};

fn p() -> VehicleParams {
    VehicleParams::default()
}

fn csv_file(rows: &[(f64, f64)]) -> tempfile::NamedTempFile {
    let mut f = tempfile::NamedTempFile::new().unwrap();
    writeln!(f, "time_s,velocity_mps").unwrap();
    for (t, v) in rows {
        writeln!(f, "{t},{v}").unwrap();
    }
    f
}

#[test]
fn matrix_evaluation_examples() {
    let (x, _) = dynamics_step(VehicleState::new(0.0, 0.0, 0.0), 1.0, 0.0, &p());
    assert_abs_diff_eq!(x.acc, 0.2, epsilon = 1e-12);
    assert_eq!((x.e_p, x.e_v), (0.0, 0.0));
    let (x, _) = dynamics_step(VehicleState::new(1.0, 0.5, 0.2), 0.0, 0.3, &p());
    assert_abs_diff_eq!(x.e_p, 1.03, epsilon = 1e-12);
    assert_abs_diff_eq!(x.e_v, 0.51, epsilon = 1e-12);
    assert_abs_diff_eq!(x.acc, 0.16, epsilon = 1e-12);
}

#[test]
fn free_decay_matches_closed_form() {
    let d = 1.0 - p().t / p().rho;
    let mut x = VehicleState::new(0.3, -0.2, 2.0);
    for n in 1..=100 {
        x = dynamics_step(x, 0.0, 0.0, &p()).0;
        assert!((x.acc - 2.0 * d.powi(n)).abs() <= 1e-12);
    }
}

#[test]
fn predecessor_lag_examples() {
    assert_eq!(predecessor_acc_step(0.0, 0.0, &p()), 0.0);
    assert_abs_diff_eq!(predecessor_acc_step(0.2, 1.0, &p()), 0.36, epsilon = 1e-12);
    assert_abs_diff_eq!(predecessor_acc_step(0.7, 0.7, &p()), 0.7, epsilon = 1e-12);
}

#[test]
fn headway_and_error_examples() {
    assert_eq!(desired_headway(10.0, &p()), 12.0);
    assert_eq!(desired_headway(0.0, &p()), 2.0);
    assert_eq!(desired_headway(7.0, &VehicleParams { h: 0.0, ..p() }), 2.0);
    assert_eq!(headway(20.0, 10.0, 4.0), 6.0);
    assert_eq!(control_errors(6.0, 12.0, 10.0, 8.0), (-6.0, 2.0));
    assert_eq!(control_errors(12.0, 12.0, 8.0, 8.0), (0.0, 0.0));
}

#[test]
fn reward_example() {
    let w = RewardWeights::default();
    assert_eq!(reward(&VehicleState::new(0.0, 0.0, 0.0), 0.0, &p(), &w), 0.0);
    assert_abs_diff_eq!(reward(&VehicleState::new(1.5, 1.0, 0.0), 0.0, &p(), &w), -0.2, epsilon = 1e-12);
}

#[test]
fn missing_information_reads_the_dummy() {
    let s = [0.1, 0.2, 0.3, 0.36];
    let h = ObservationHistory::new(0, &s);
    assert_eq!(observe(&s, &ObservationModel::MissingDummy { dummy_value: 0.0 }, &h, 1).unwrap(), vec![0.1, 0.2, 0.3, 0.0]);
    assert_eq!(observe(&s, &ObservationModel::Full, &h, 1).unwrap(), s.to_vec());
}

#[test]
fn last_received_replays_the_sample_two_intervals_old() {
    let mut h = ObservationHistory::new(3, &[0.0, 0.0, 0.0, 0.5]);
    h.push(1.0, &[0.1, 0.0, 0.0, 0.6]);
    h.push(2.0, &[0.2, 0.0, 0.0, 0.7]);
    h.push(3.0, &[0.3, 0.0, 0.0, 0.8]);
    let o = observe(&[0.3, 0.0, 0.0, 0.8], &ObservationModel::LastReceived { tau_max: 3 }, &h, 2).unwrap();
    assert_eq!(o[3], 0.6);
    assert_eq!(&o[4..7], &[1.0, 2.0, 3.0]);
    assert_eq!(o[7], 2.0);
    assert!(observe(&[0.0; 4], &ObservationModel::LastReceived { tau_max: 3 }, &h, 4).is_err());
}

#[test]
fn stop_and_go_traces() {
    let zero = StopAndGoConfig {
        magnitudes: vec![0.0],
        ..StopAndGoConfig::default()
    };
    assert!(synth_stop_and_go(&zero, 5).unwrap().acc.iter().all(|&a| a == 0.0));
    let a = synth_stop_and_go(&StopAndGoConfig::default(), 9).unwrap();
    let b = synth_stop_and_go(&StopAndGoConfig::default(), 9).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.acc.len(), StopAndGoConfig::default().duration);
    assert!(a.velocity.iter().all(|&v| v >= 0.0));
}

#[test]
fn recorded_trajectories() {
    let flat = csv_file(&[(0.0, 8.0), (0.5, 8.0), (1.0, 8.0)]);
    let t = load_trajectory(flat.path(), &ColumnMap::default(), 0.1, 3.0).unwrap();
    assert!(t.acc.iter().all(|&a| a == 0.0));
    let jump = csv_file(&[(0.0, 0.0), (0.1, 1.0)]);
    let t = load_trajectory(jump.path(), &ColumnMap::default(), 0.1, 3.0).unwrap();
    assert_eq!(t.acc, vec![3.0]);
    assert_eq!(t.clip_count, 1);
    let empty = csv_file(&[]);
    assert!(load_trajectory(empty.path(), &ColumnMap::default(), 0.1, 3.0).is_err());
    let backwards = csv_file(&[(0.0, 1.0), (0.2, 1.0), (0.1, 1.0)]);
    assert!(load_trajectory(backwards.path(), &ColumnMap::default(), 0.1, 3.0).is_err());
    let renamed = ColumnMap {
        time: "t".into(),
        velocity: "v".into(),
    };
    assert!(load_trajectory(flat.path(), &renamed, 0.1, 3.0).is_err());
}

#[test]
fn environment_episode_has_the_configured_length_and_masks_one_slot() {
    let trace = Arc::new(synth_stop_and_go(&StopAndGoConfig::default(), 3).unwrap().acc);
    let mut env = FollowingEnv::new(p(), RewardWeights::default(), PredecessorSource::Trace(trace.clone()), 40, 0.99).unwrap();
    let mut rng = rng_from_seed(0);
    env.reset(&mut rng).unwrap();
    let mut steps = 0;
    loop {
        let o = env.observation();
        let inf = env.inferior_observation();
        assert_eq!(&o[..3], &inf[..3]);
        assert_eq!(o[3], trace[steps]);
        assert_eq!(inf[3], 0.0);
        steps += 1;
        if env.step(&[0.0], &mut rng).unwrap().done {
            break;
        }
    }
    assert_eq!(steps, 40);
}

#[test]
fn small_grid_model_is_consistent() {
    let m = VehicleGridModel::build(&p(), &RewardWeights::default(), &VehicleGridConfig::small(), 0).unwrap();
    let sup = m.sup_policy();
    let inf = m.inf_policy(0.0);
    for s in 0..m.n_states() {
        let x = m.tabular.state_grid.point(s);
        assert_eq!(m.advantage(&x, sup.act(&x)[0]), 0.0);
        assert!(m.advantage(&x, inf.act(&x)[0]) <= 0.0);
        if x[3] == 0.0 {
            assert_eq!(inf.act(&x), sup.act(&x));
        }
    }
}

#[test]
fn interpolated_lookup_agrees_with_the_grid_at_grid_points() {
    let cfg = VehicleGridConfig {
        projection: voi_core::dp::Projection::Multilinear,
        ..VehicleGridConfig::small()
    };
    let m = VehicleGridModel::build(&p(), &RewardWeights::default(), &cfg, 0).unwrap();
    let sup = m.sup_policy();
    for s in 0..m.n_states() {
        let x = m.tabular.state_grid.point(s);
        assert_eq!(m.tabular.action_grid.point(m.solution.policy[s])[0], sup.act(&x)[0]);
        assert_eq!(m.advantage(&x, sup.act(&x)[0]), 0.0);
    }
    let between = [0.1, -0.2, 0.3, 0.0];
    assert_eq!(m.advantage(&between, sup.act(&between)[0]), 0.0);
    assert!(m.advantage(&between, -3.0) <= 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn dynamics_are_linear(
        x1 in prop::array::uniform3(-1.0f64..1.0), x2 in prop::array::uniform3(-1.0f64..1.0),
        u1 in -1.0f64..1.0, u2 in -1.0f64..1.0, w1 in -1.0f64..1.0, w2 in -1.0f64..1.0,
    ) {
        let s = |x: [f64; 3]| VehicleState::new(x[0], x[1], x[2]);
        let sum = [x1[0] + x2[0], x1[1] + x2[1], x1[2] + x2[2]];
        let lhs = dynamics_step(s(sum), u1 + u2, w1 + w2, &p()).0.to_vec();
        let a = dynamics_step(s(x1), u1, w1, &p()).0.to_vec();
        let b = dynamics_step(s(x2), u2, w2, &p()).0.to_vec();
        let z = dynamics_step(s([0.0; 3]), 0.0, 0.0, &p()).0.to_vec();
        for i in 0..3 {
            prop_assert!((lhs[i] - (a[i] + b[i] - z[i])).abs() <= 1e-12);
        }
    }

    #[test]
    fn reward_is_non_positive_and_zero_only_at_rest(
        x in prop::array::uniform3(-5.0f64..5.0), u in -3.0f64..3.0, huber in prop::option::of(0.01f64..1.0),
    ) {
        let w = RewardWeights { huber_delta: huber, ..RewardWeights::default() };
        let st = VehicleState::new(x[0], x[1], x[2]);
        let r = reward(&st, u, &p(), &w);
        prop_assert!(r <= 0.0);
        let at_rest = x[0] == 0.0 && x[1] == 0.0 && u == 0.0 && u == x[2];
        prop_assert_eq!(r == 0.0, at_rest);
    }

    #[test]
    fn synthetic_velocity_stays_non_negative(seed in any::<u64>(), v0 in 0.0f64..5.0) {
        let cfg = StopAndGoConfig { v0, ..StopAndGoConfig::default() };
        let t = synth_stop_and_go(&cfg, seed).unwrap();
        prop_assert!(t.velocity.iter().all(|&v| v >= 0.0));
        let mut v = v0;
        for a in &t.acc {
            v += a * cfg.dt;
            prop_assert!(v >= -1e-9);
        }
    }

    #[test]
    fn dummy_observation_differs_in_one_slot(s in prop::array::uniform4(-3.0f64..3.0), dummy in -1.0f64..1.0) {
        let h = ObservationHistory::new(0, &s);
        let o = observe(&s, &ObservationModel::MissingDummy { dummy_value: dummy }, &h, 1).unwrap();
        prop_assert_eq!(&o[..3], &s[..3]);
        prop_assert_eq!(o[3], dummy);
    }
}
