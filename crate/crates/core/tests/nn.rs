use std::sync::Arc;

use proptest::prelude::*;
use rand::Rng as _;
use voi_core::dp::{exact_performance, q_from_v, policy_evaluation_exact, value_iteration, PolicyTable, TabularMdp};
use voi_core::nn::{
    finetune_q_montecarlo, fit_advantage_estimator, rollout_return, td_error, train_td3, Activation, AdvantageSample,
    EnvStep, Environment, FinetuneConfig, Mlp, RegressionConfig, TabularValue, Td3Config,
};
use voi_core::rng::{rng_from_seed, Rng};
use voi_core::Result;

fn random_net(rng: &mut Rng) -> Mlp {
    let n_hidden = rng.random_range(1..=3);
    let mut sizes = vec![rng.random_range(1..=5)];
    for _ in 0..n_hidden {
        sizes.push(rng.random_range(1..=8));
    }
    sizes.push(rng.random_range(1..=3));
    let acts = [Activation::Tanh, Activation::Relu, Activation::Identity];
    let h = acts[rng.random_range(0..3)];
    let o = acts[rng.random_range(0..3)];
    let mut net = Mlp::new(&sizes, h, o, rng).unwrap();
    // Random biases too: with zero biases a dead ReLU layer puts the next
    // pre-activation exactly on the kink, where differences are meaningless.
    let p: Vec<f64> = (0..net.param_count()).map(|_| rng.random_range(-1.0..1.0)).collect();
    net.set_params(&p).unwrap();
    net
}

fn objective(net: &Mlp, x: &[f64], up: &[f64]) -> f64 {
    net.forward(x).unwrap().iter().zip(up).map(|(a, b)| a * b).sum()
}

#[test]
fn gradients_match_central_differences() {
    let mut rng = rng_from_seed(2024);
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let mut net = random_net(&mut rng);
        let x: Vec<f64> = (0..net.input_dim()).map(|_| rng.random_range(-1.5..1.5)).collect();
        let up: Vec<f64> = (0..net.output_dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let (g, gx) = net.backward(&x, &up).unwrap();
        let theta = net.params().to_vec();
        for i in 0..theta.len() {
            let mut p = theta.clone();
            p[i] = theta[i] + h;
            net.set_params(&p).unwrap();
            let fp = objective(&net, &x, &up);
            p[i] = theta[i] - h;
            net.set_params(&p).unwrap();
            let fm = objective(&net, &x, &up);
            let fd = (fp - fm) / (2.0 * h);
            let rel = (g[i] - fd).abs() / g[i].abs().max(fd.abs()).max(1e-6);
            worst = worst.max(rel);
            assert!(rel <= 1e-4, "param {i}: analytic {} vs fd {fd}", g[i]);
        }
        net.set_params(&theta).unwrap();
        for i in 0..x.len() {
            let mut xp = x.clone();
            xp[i] += h;
            let mut xm = x.clone();
            xm[i] -= h;
            let fd = (objective(&net, &xp, &up) - objective(&net, &xm, &up)) / (2.0 * h);
            let rel = (gx[i] - fd).abs() / gx[i].abs().max(fd.abs()).max(1e-6);
            assert!(rel <= 1e-4, "input {i}: analytic {} vs fd {fd}", gx[i]);
        }
    }
    assert!(worst <= 1e-4);
}

proptest! {
    #[test]
    fn param_count_matches_layer_formula(sizes in prop::collection::vec(1usize..10, 2..5)) {
        let net = Mlp::zeros(&sizes, Activation::Tanh, Activation::Identity).unwrap();
        let expected: usize = sizes.windows(2).map(|w| (w[0] + 1) * w[1]).sum();
        prop_assert_eq!(net.param_count(), expected);
    }

    #[test]
    fn soft_update_is_exact_convex_combination(seed in 0u64..1000, rate in 0.0f64..=1.0) {
        let mut rng = rng_from_seed(seed);
        let src = Mlp::new(&[3, 4, 2], Activation::Tanh, Activation::Identity, &mut rng).unwrap();
        let mut tgt = Mlp::new(&[3, 4, 2], Activation::Tanh, Activation::Identity, &mut rng).unwrap();
        let old = tgt.params().to_vec();
        tgt.soft_update_from(&src, rate).unwrap();
        for ((t, o), s) in tgt.params().iter().zip(&old).zip(src.params()) {
            prop_assert_eq!(*t, (1.0 - rate) * o + rate * s);
        }
    }

    #[test]
    fn forward_is_deterministic(seed in 0u64..1000) {
        let mut rng = rng_from_seed(seed);
        let net = random_net(&mut rng);
        let x: Vec<f64> = (0..net.input_dim()).map(|_| rng.random_range(-2.0..2.0)).collect();
        prop_assert_eq!(net.forward(&x).unwrap(), net.forward(&x).unwrap());
    }
}

/// One-step bandit with reward `−(a − peak)²` on `a ∈ [−1, 1]`.
#[derive(Clone)]
struct Bandit {
    peak: f64,
    zero_reward: bool,
    horizon: usize,
    k: usize,
}

impl Environment for Bandit {
    type Snapshot = ();
    fn obs_dim(&self) -> usize {
        1
    }
    fn action_bounds(&self) -> Vec<(f64, f64)> {
        vec![(-1.0, 1.0)]
    }
    fn gamma(&self) -> f64 {
        0.9
    }
    fn reset(&mut self, _rng: &mut Rng) -> Result<Vec<f64>> {
        self.k = 0;
        Ok(vec![0.0])
    }
    fn step(&mut self, a: &[f64], rng: &mut Rng) -> Result<EnvStep> {
        self.k += 1;
        let reward = if self.zero_reward { 0.0 } else { -(a[0] - self.peak).powi(2) };
        let obs = if self.zero_reward { vec![rng.random_range(-1.0..1.0)] } else { vec![0.0] };
        let done = self.k >= self.horizon;
        Ok(EnvStep {
            obs,
            reward,
            done,
            terminal: done && !self.zero_reward,
        })
    }
    fn observation(&self) -> Vec<f64> {
        vec![0.0]
    }
}

fn small_config(steps: usize) -> Td3Config {
    Td3Config {
        hidden: vec![32, 32],
        batch_size: 64,
        warmup_steps: 500,
        total_steps: steps,
        ..Td3Config::default()
    }
}

#[test]
fn bandit_actor_finds_peak() {
    let env = Bandit {
        peak: 0.5,
        zero_reward: false,
        horizon: 1,
        k: 0,
    };
    let cfg = Td3Config {
        total_steps: 5000,
        warmup_steps: 500,
        ..Td3Config::default()
    };
    let (ac, log) = train_td3(&env, &cfg, 11).unwrap();
    let a = ac.act(&[0.0]).unwrap()[0];
    assert!((a - 0.5).abs() <= 0.05, "actor output {a}");
    assert_eq!(log.episodes.len(), 5000);
}

#[test]
fn zero_reward_critics_vanish() {
    let env = Bandit {
        peak: 0.0,
        zero_reward: true,
        horizon: 20,
        k: 0,
    };
    let cfg = Td3Config {
        target_rate: 0.02,
        ..small_config(20000)
    };
    let (ac, _) = train_td3(&env, &cfg, 5).unwrap();
    for i in 0..21 {
        let s = -1.0 + 0.1 * i as f64;
        for a in [-1.0, -0.3, 0.4, 1.0] {
            let (q1, q2) = ac.q_pair(&[s], &[a]).unwrap();
            assert!(q1.abs() <= 0.01 && q2.abs() <= 0.01, "Q({s},{a}) = ({q1},{q2})");
        }
    }
}

#[test]
fn identical_seeds_identical_training() {
    let env = Bandit {
        peak: 0.2,
        zero_reward: false,
        horizon: 1,
        k: 0,
    };
    let cfg = small_config(800);
    let (a, la) = train_td3(&env, &cfg, 3).unwrap();
    let (b, lb) = train_td3(&env, &cfg, 3).unwrap();
    assert_eq!(a, b);
    // NaN losses in the warm-up episodes make `==` on logs unusable.
    let key = |l: &voi_core::nn::TrainingLog| l.episodes.iter().map(|e| (e.ret.to_bits(), e.critic_loss.to_bits())).collect::<Vec<_>>();
    assert_eq!(key(&la), key(&lb));
    let (c, _) = train_td3(&env, &cfg, 4).unwrap();
    assert_ne!(a, c);
}

#[test]
fn divergence_is_reported() {
    #[derive(Clone)]
    struct Exploding;
    impl Environment for Exploding {
        type Snapshot = ();
        fn obs_dim(&self) -> usize {
            1
        }
        fn action_bounds(&self) -> Vec<(f64, f64)> {
            vec![(-1.0, 1.0)]
        }
        fn gamma(&self) -> f64 {
            0.99
        }
        fn reset(&mut self, _: &mut Rng) -> Result<Vec<f64>> {
            Ok(vec![0.0])
        }
        fn step(&mut self, _: &[f64], _: &mut Rng) -> Result<EnvStep> {
            Ok(EnvStep {
                obs: vec![0.0],
                reward: 1e9,
                done: false,
                terminal: false,
            })
        }
        fn observation(&self) -> Vec<f64> {
            vec![0.0]
        }
    }
    let err = train_td3(&Exploding, &small_config(2000), 0).unwrap_err();
    assert!(matches!(err, voi_core::Error::Diverged { .. }), "{err}");
}

/// Two states; `P(s' = 1) = (a + 1)/2`, reward `s − KAPPA a²`.
#[derive(Clone)]
struct Coin {
    s: usize,
    k: usize,
    horizon: usize,
}

const KAPPA: f64 = 1.0;
const COIN_GAMMA: f64 = 0.9;

impl Coin {
    fn p(a: f64) -> f64 {
        0.5 * (a.clamp(-1.0, 1.0) + 1.0)
    }
    fn reward(s: usize, a: f64) -> f64 {
        s as f64 - KAPPA * a * a
    }

    /// Exact MDP restricted to the given per-state action sets.
    fn mdp(actions: &[Vec<f64>]) -> TabularMdp {
        let n_a = actions[0].len();
        let mut rows = Vec::new();
        let mut rewards = Vec::new();
        for s in 0..2 {
            for &a in &actions[s] {
                let p = Self::p(a);
                rows.push(vec![(0, 1.0 - p), (1, p)]);
                rewards.push(Self::reward(s, a));
            }
        }
        TabularMdp::new(2, n_a, rows, rewards, COIN_GAMMA, vec![0.5, 0.5]).unwrap()
    }
}

impl Environment for Coin {
    type Snapshot = (usize, usize);
    fn obs_dim(&self) -> usize {
        1
    }
    fn action_bounds(&self) -> Vec<(f64, f64)> {
        vec![(-1.0, 1.0)]
    }
    fn gamma(&self) -> f64 {
        COIN_GAMMA
    }
    fn reset(&mut self, rng: &mut Rng) -> Result<Vec<f64>> {
        self.s = (rng.random::<f64>() < 0.5) as usize;
        self.k = 0;
        Ok(vec![self.s as f64])
    }
    fn step(&mut self, a: &[f64], rng: &mut Rng) -> Result<EnvStep> {
        let a = a[0].clamp(-1.0, 1.0);
        let r = Self::reward(self.s, a);
        self.s = (rng.random::<f64>() < Self::p(a)) as usize;
        self.k += 1;
        Ok(EnvStep {
            obs: vec![self.s as f64],
            reward: r,
            done: self.k >= self.horizon,
            terminal: false,
        })
    }
    fn observation(&self) -> Vec<f64> {
        vec![self.s as f64]
    }
    fn snapshot(&self) -> Result<(usize, usize)> {
        Ok((self.s, self.k))
    }
    fn restore(&mut self, s: &(usize, usize)) -> Result<()> {
        self.s = s.0;
        self.k = s.1;
        Ok(())
    }
}

fn coin_j_star() -> f64 {
    let grid: Vec<f64> = (0..=400).map(|i| -1.0 + i as f64 / 200.0).collect();
    let mdp = Coin::mdp(&[grid.clone(), grid]);
    let sol = value_iteration(&mdp, 1e-12).unwrap();
    exact_performance(&mdp, &sol.policy_table()).unwrap()
}

fn actor_performance(ac: &voi_core::nn::ActorCritic) -> f64 {
    let acts: Vec<Vec<f64>> = (0..2).map(|s| vec![ac.act(&[s as f64]).unwrap()[0]]).collect();
    exact_performance(&Coin::mdp(&acts), &PolicyTable::Deterministic(vec![0, 0])).unwrap()
}

#[test]
fn td3_reaches_dp_optimum_on_tabular_env() {
    let j_star = coin_j_star();
    // Closed form: the optimal action is γ/(4κ) in both states.
    let a_opt = COIN_GAMMA / (4.0 * KAPPA);
    let j_closed = Coin::reward(0, a_opt) / (1.0 - COIN_GAMMA) + 0.5 + COIN_GAMMA * Coin::p(a_opt) / (1.0 - COIN_GAMMA);
    let j_closed = j_closed - 0.5 + 0.5;
    assert!((j_star - j_closed).abs() < 1e-3 * j_closed.abs(), "{j_star} vs {j_closed}");

    let env = Coin { s: 0, k: 0, horizon: 50 };
    let mut ratios = Vec::new();
    for seed in 0..5 {
        let (ac, _) = train_td3(&env, &small_config(6000), seed).unwrap();
        ratios.push(actor_performance(&ac) / j_star);
    }
    let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
    assert!(mean >= 0.95, "greedy/J* ratios {ratios:?}");
}

#[test]
fn finetune_matches_exact_q_of_actor() {
    let env = Coin { s: 0, k: 0, horizon: 200 };
    let (ac, _) = train_td3(&env, &small_config(4000), 1).unwrap();
    let a_inf = -0.8;
    let pi_inf = move |_: &[f64]| vec![a_inf];
    let cfg = FinetuneConfig {
        n_rollouts: 64,
        n_start_episodes: 4,
        start_steps: 20,
        epochs: 500,
        ..FinetuneConfig::default()
    };
    let (tuned, report) = finetune_q_montecarlo(&ac, &env, &pi_inf, &cfg, 0).unwrap();

    let acts: Vec<Vec<f64>> = (0..2).map(|s| vec![ac.act(&[s as f64]).unwrap()[0]]).collect();
    let v = policy_evaluation_exact(&Coin::mdp(&acts), &PolicyTable::Deterministic(vec![0, 0])).unwrap();
    let q_inf = q_from_v(&Coin::mdp(&[vec![a_inf], vec![a_inf]]), &v).unwrap();
    for s in 0..2 {
        let labels: Vec<_> = report.labels.iter().filter(|l| l.obs[0] as usize == s).collect();
        assert!(!labels.is_empty());
        let n = labels.len() as f64;
        let pooled_se = (labels.iter().map(|l| l.std_err.powi(2)).sum::<f64>()).sqrt() / n;
        let fit = tuned.q_min(&[s as f64], &[a_inf]).unwrap();
        let exact = q_inf[s][0];
        assert!((fit - exact).abs() <= 2.0 * pooled_se, "s={s}: fit {fit} exact {exact} se {pooled_se}");
    }
}

#[test]
fn finetune_on_policy_is_a_noop_up_to_noise() {
    // TD3's smoothed, pessimistic targets leave the raw critic biased with
    // respect to Monte-Carlo returns of the greedy actor, so the no-op
    // property is checked on a critic already consistent with those returns.
    let env = Coin { s: 0, k: 0, horizon: 200 };
    let (ac, _) = train_td3(&env, &small_config(6000), 2).unwrap();
    let actor = ac.clone();
    let pi_inf = move |o: &[f64]| actor.act(o).unwrap();
    let cfg = FinetuneConfig {
        n_rollouts: 64,
        n_start_episodes: 2,
        start_steps: 20,
        epochs: 300,
        ..FinetuneConfig::default()
    };
    let (consistent, _) = finetune_q_montecarlo(&ac, &env, &pi_inf, &cfg, 9).unwrap();
    let (tuned, report) = finetune_q_montecarlo(&consistent, &env, &pi_inf, &cfg, 10).unwrap();
    let n = report.labels.len() as f64;
    let mean_dq = report
        .labels
        .iter()
        .map(|l| (tuned.q_min(&l.obs, &l.action).unwrap() - consistent.q_min(&l.obs, &l.action).unwrap()).abs())
        .sum::<f64>()
        / n;
    let mean_se = report.labels.iter().map(|l| l.std_err).sum::<f64>() / n;
    assert!(mean_dq < 2.0 * mean_se, "mean |dQ| {mean_dq} vs se {mean_se}");
}

#[test]
fn finetune_rejects_zero_rollouts() {
    let env = Coin { s: 0, k: 0, horizon: 10 };
    let (ac, _) = train_td3(&env, &small_config(10), 0).unwrap();
    let cfg = FinetuneConfig {
        n_rollouts: 0,
        ..FinetuneConfig::default()
    };
    assert!(finetune_q_montecarlo(&ac, &env, &|_: &[f64]| vec![0.0], &cfg, 0).is_err());
}

#[test]
fn advantage_estimator_constant_and_mean() {
    let cfg = RegressionConfig {
        hidden: vec![16],
        epochs: 300,
        ..RegressionConfig::default()
    };
    let data: Vec<AdvantageSample> = (0..64)
        .map(|i| AdvantageSample {
            obs: vec![i as f64 / 64.0],
            action: vec![(i % 5) as f64 / 5.0],
            target: -0.7,
        })
        .collect();
    let est = fit_advantage_estimator(&data, &cfg, 1).unwrap();
    for d in &data {
        assert!((est.predict(&d.obs, &d.action).unwrap() + 0.7).abs() <= 0.01);
    }

    let mut dup = Vec::new();
    for i in 0..40 {
        dup.push(AdvantageSample {
            obs: vec![0.3],
            action: vec![0.1],
            target: if i % 2 == 0 { 1.0 } else { 3.0 },
        });
    }
    let est = fit_advantage_estimator(&dup, &cfg, 2).unwrap();
    assert!((est.predict(&[0.3], &[0.1]).unwrap() - 2.0).abs() <= 0.01);
    assert!((est.train_mse - 1.0).abs() <= 0.02);
}

fn small_tabular() -> TabularMdp {
    let p = vec![
        vec![vec![0.7, 0.3, 0.0], vec![0.1, 0.2, 0.7]],
        vec![vec![0.0, 0.5, 0.5], vec![0.6, 0.4, 0.0]],
        vec![vec![0.3, 0.3, 0.4], vec![0.0, 0.0, 1.0]],
    ];
    let r = vec![vec![1.0, 0.0], vec![0.5, 2.0], vec![0.0, -1.0]];
    TabularMdp::from_dense(&p, &r, 0.8, vec![1.0 / 3.0; 3]).unwrap()
}

#[test]
fn advantage_estimator_recovers_tabular_advantages() {
    let mdp = Arc::new(small_tabular());
    let sol = value_iteration(&mdp, 1e-13).unwrap();
    let q = q_from_v(&mdp, &sol.values).unwrap();
    let env = voi_core::dp::TabularEnv::new(mdp.clone(), 120).unwrap();
    let pol = sol.policy.clone();
    let greedy = move |o: &[f64]| vec![pol[o[0] as usize] as f64];

    let per_cell = 200;
    let mut data = Vec::new();
    let mut cells = Vec::new();
    for s in 0..3 {
        for a in 0..2 {
            let mut labels = Vec::with_capacity(per_cell);
            for j in 0..per_cell {
                let seed = voi_core::rng::derive_seed(99, (s * 2 + a) as u64, j as u64);
                let mut e = env.clone();
                e.restore(&(s, 0)).unwrap();
                let ra = rollout_return(&mut e, &[a as f64], &greedy, 120, &mut rng_from_seed(seed)).unwrap();
                e.restore(&(s, 0)).unwrap();
                let rs = rollout_return(&mut e, &[sol.policy[s] as f64], &greedy, 120, &mut rng_from_seed(seed)).unwrap();
                labels.push(ra - rs);
            }
            let (mean, se) = voi_core::nn::mean_and_se(&labels);
            cells.push((s, a, mean, se));
            for l in labels {
                data.push(AdvantageSample {
                    obs: vec![s as f64],
                    action: vec![a as f64],
                    target: l,
                });
            }
        }
    }
    // Label noise: pooled standard deviation of individual labels.
    let noise = (cells.iter().map(|c| c.3.powi(2) * per_cell as f64).sum::<f64>() / cells.len() as f64).sqrt();
    let cfg = RegressionConfig {
        hidden: vec![32],
        epochs: 150,
        ..RegressionConfig::default()
    };
    let est = fit_advantage_estimator(&data, &cfg, 3).unwrap();
    for (s, a, mean, se) in cells {
        let exact = q[s][a] - sol.values[s];
        let pred = est.predict(&[s as f64], &[a as f64]).unwrap();
        assert!((mean - exact).abs() <= 3.0 * se.max(1e-12), "label mean ({s},{a}) {mean} vs {exact}");
        assert!((pred - exact).abs() <= 2.0 * noise, "pred ({s},{a}) {pred} vs {exact} (noise {noise})");
    }
}

#[test]
fn exo_averaged_td_error_equals_advantage() {
    let mdp = small_tabular();
    let sol = value_iteration(&mdp, 1e-14).unwrap();
    let q = q_from_v(&mdp, &sol.values).unwrap();
    let v = TabularValue(sol.values.clone());
    for s in 0..3 {
        for a in 0..2 {
            let mean: f64 = mdp
                .row(s, a)
                .iter()
                .map(|&(j, p)| p * td_error(&v, &[s as f64], mdp.reward(s, a), &[j as f64], mdp.gamma(), false))
                .sum();
            assert!((mean - (q[s][a] - sol.values[s])).abs() <= 1e-8);
        }
    }
}



