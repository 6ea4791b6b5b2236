//! Twin-critic deterministic actor-critic training (TD3).
//!
//! Actions are handled in normalised form `y ∈ [−1, 1]^m`; the actor ends in
//! `tanh` and the critics take `[obs / obs_scale, y]`. [`ActorCritic::act`]
//! maps back to the environment's bounds.

use rand::Rng as _;
use rand_distr::{Distribution as _, StandardNormal};
use serde::{Deserialize, Serialize};

use super::adam::Adam;
use super::env::Environment;
use super::mlp::{Activation, Mlp};
use super::replay::{ReplayBuffer, Transition};
use crate::error::{check_dim, Error, Result};
use crate::rng::{derive_seed, rng_from_seed, Rng};
use crate::ssdp::Policy;

const MODULE: &str = "nn";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Td3Config {
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub value_lr: f64,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    /// Soft target update rate.
    pub target_rate: f64,
    pub policy_delay: usize,
    /// Gaussian exploration noise, in normalised action units.
    pub explore_noise: f64,
    pub target_noise: f64,
    pub target_noise_clip: f64,
    /// Uniformly random actions before the first update.
    pub warmup_steps: usize,
    pub total_steps: usize,
    pub value_head: bool,
    /// Observations are divided by this before entering any network.
    pub obs_scale: Option<Vec<f64>>,
    /// Divergence threshold on |Q|.
    pub max_abs_q: f64,
}

impl Default for Td3Config {
    fn default() -> Self {
        Td3Config {
            hidden: vec![64, 64],
            activation: Activation::Tanh,
            actor_lr: 1e-3,
            critic_lr: 1e-3,
            value_lr: 1e-3,
            batch_size: 256,
            buffer_capacity: 1_000_000,
            target_rate: 0.005,
            policy_delay: 2,
            explore_noise: 0.1,
            target_noise: 0.2,
            target_noise_clip: 0.5,
            warmup_steps: 1000,
            total_steps: 20_000,
            value_head: false,
            obs_scale: None,
            max_abs_q: 1e6,
        }
    }
}

impl Td3Config {
    pub fn validate(&self) -> Result<()> {
        let pos = |x: f64| x.is_finite() && x > 0.0;
        if !(pos(self.actor_lr) && pos(self.critic_lr) && pos(self.value_lr)) {
            return Err(Error::invalid(MODULE, "learning rates must be positive"));
        }
        if self.batch_size == 0 || self.policy_delay == 0 || self.buffer_capacity == 0 {
            return Err(Error::invalid(MODULE, "batch size, policy delay and buffer capacity must be >= 1"));
        }
        if !(self.target_rate > 0.0 && self.target_rate <= 1.0) {
            return Err(Error::invalid(MODULE, "target rate must lie in (0, 1]"));
        }
        if self.explore_noise < 0.0 || self.target_noise < 0.0 || self.target_noise_clip < 0.0 {
            return Err(Error::invalid(MODULE, "noise levels must be non-negative"));
        }
        if self.hidden.iter().any(|&h| h == 0) {
            return Err(Error::invalid(MODULE, "hidden widths must be >= 1"));
        }
        if let Some(s) = &self.obs_scale {
            if s.iter().any(|&x| !pos(x)) {
                return Err(Error::invalid(MODULE, "observation scales must be positive"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActorCritic {
    pub actor: Mlp,
    pub critic_q1: Mlp,
    pub critic_q2: Mlp,
    pub value_head: Option<Mlp>,
    pub actor_target: Mlp,
    pub q1_target: Mlp,
    pub q2_target: Mlp,
    pub bounds: Vec<(f64, f64)>,
    pub obs_scale: Vec<f64>,
    pub config: Td3Config,
}

impl ActorCritic {
    pub fn new(obs_dim: usize, bounds: &[(f64, f64)], config: &Td3Config, rng: &mut Rng) -> Result<Self> {
        config.validate()?;
        if obs_dim == 0 || bounds.is_empty() {
            return Err(Error::invalid(MODULE, "observation and action dimensions must be >= 1"));
        }
        if bounds.iter().any(|&(l, h)| !(l.is_finite() && h.is_finite() && l < h)) {
            return Err(Error::invalid(MODULE, "actor-critic training needs finite, non-empty action bounds"));
        }
        let obs_scale = match &config.obs_scale {
            Some(s) => {
                check_dim(MODULE, "observation scale", obs_dim, s.len())?;
                s.clone()
            }
            None => vec![1.0; obs_dim],
        };
        let m = bounds.len();
        let sizes = |n_in: usize, n_out: usize| {
            let mut v = vec![n_in];
            v.extend(&config.hidden);
            v.push(n_out);
            v
        };
        let act = config.activation;
        let actor = Mlp::new(&sizes(obs_dim, m), act, Activation::Tanh, rng)?;
        let critic_q1 = Mlp::new(&sizes(obs_dim + m, 1), act, Activation::Identity, rng)?;
        let critic_q2 = Mlp::new(&sizes(obs_dim + m, 1), act, Activation::Identity, rng)?;
        let value_head = if config.value_head {
            Some(Mlp::new(&sizes(obs_dim, 1), act, Activation::Identity, rng)?)
        } else {
            None
        };
        Ok(ActorCritic {
            actor_target: actor.clone(),
            q1_target: critic_q1.clone(),
            q2_target: critic_q2.clone(),
            actor,
            critic_q1,
            critic_q2,
            value_head,
            bounds: bounds.to_vec(),
            obs_scale,
            config: config.clone(),
        })
    }

    pub fn obs_dim(&self) -> usize {
        self.obs_scale.len()
    }

    pub fn action_dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn scale_obs(&self, obs: &[f64]) -> Vec<f64> {
        obs.iter().zip(&self.obs_scale).map(|(o, s)| o / s).collect()
    }

    pub fn normalize_action(&self, a: &[f64]) -> Vec<f64> {
        a.iter()
            .zip(&self.bounds)
            .map(|(&x, &(l, h))| (2.0 * (x - l) / (h - l) - 1.0).clamp(-1.0, 1.0))
            .collect()
    }

    pub fn denormalize_action(&self, y: &[f64]) -> Vec<f64> {
        y.iter()
            .zip(&self.bounds)
            .map(|(&v, &(l, h))| (l + 0.5 * (v.clamp(-1.0, 1.0) + 1.0) * (h - l)).clamp(l, h))
            .collect()
    }

    /// Greedy action in environment units.
    pub fn act(&self, obs: &[f64]) -> Result<Vec<f64>> {
        let y = self.actor.forward(&self.scale_obs(obs))?;
        Ok(self.denormalize_action(&y))
    }

    fn critic_input(&self, obs: &[f64], a: &[f64]) -> Result<Vec<f64>> {
        check_dim(MODULE, "observation", self.obs_dim(), obs.len())?;
        check_dim(MODULE, "action", self.action_dim(), a.len())?;
        let mut x = self.scale_obs(obs);
        x.extend(self.normalize_action(a));
        Ok(x)
    }

    /// Both critic estimates at `(obs, a)`, `a` in environment units.
    pub fn q_pair(&self, obs: &[f64], a: &[f64]) -> Result<(f64, f64)> {
        let x = self.critic_input(obs, a)?;
        Ok((self.critic_q1.forward(&x)?[0], self.critic_q2.forward(&x)?[0]))
    }

    /// Pessimistic critic estimate `min(Q1, Q2)`.
    pub fn q_min(&self, obs: &[f64], a: &[f64]) -> Result<f64> {
        let (a1, a2) = self.q_pair(obs, a)?;
        Ok(a1.min(a2))
    }

    /// State value: the value head if trained, else `min Q(s, π(s))`.
    pub fn value(&self, obs: &[f64]) -> Result<f64> {
        match &self.value_head {
            Some(v) => Ok(v.forward(&self.scale_obs(obs))?[0]),
            None => {
                let a = self.act(obs)?;
                self.q_min(obs, &a)
            }
        }
    }
}

impl Policy for ActorCritic {
    fn act(&self, obs: &[f64]) -> Vec<f64> {
        ActorCritic::act(self, obs).unwrap_or_else(|_| self.bounds.iter().map(|&(l, h)| 0.5 * (l + h)).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeLog {
    pub episode: usize,
    pub steps: usize,
    #[serde(rename = "return")]
    pub ret: f64,
    /// Mean critic loss over updates made during the episode; NaN if none.
    pub critic_loss: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingLog {
    pub episodes: Vec<EpisodeLog>,
}

impl TrainingLog {
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        for e in &self.episodes {
            wr.serialize(e)?;
        }
        wr.flush().map_err(|e| Error::io("<training log>", e))?;
        Ok(())
    }
}

struct Optimisers {
    actor: Adam,
    q1: Adam,
    q2: Adam,
    value: Option<Adam>,
}

fn gaussian(rng: &mut Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn diverged(what: &str, v: f64) -> Error {
    Error::Diverged {
        module: MODULE,
        msg: format!("{what} reached {v}"),
    }
}

/// One critic/actor/value update on a sampled batch. Returns the mean
/// critic loss.
fn update(
    ac: &mut ActorCritic,
    opt: &mut Optimisers,
    batch: &[&Transition],
    gamma: f64,
    update_actor: bool,
    rng: &mut Rng,
) -> Result<f64> {
    let cfg = ac.config.clone();
    let n = batch.len() as f64;
    let m = ac.action_dim();

    let mut g1 = vec![0.0; ac.critic_q1.param_count()];
    let mut g2 = vec![0.0; ac.critic_q2.param_count()];
    let mut loss = 0.0;
    for t in batch {
        let sn = ac.scale_obs(&t.s_next);
        let mut yn = ac.actor_target.forward(&sn)?;
        for v in &mut yn {
            let eps = (cfg.target_noise * gaussian(rng)).clamp(-cfg.target_noise_clip, cfg.target_noise_clip);
            *v = (*v + eps).clamp(-1.0, 1.0);
        }
        let target = if t.terminal {
            t.r
        } else {
            let mut xn = sn;
            xn.extend(&yn);
            let q1 = ac.q1_target.forward(&xn)?[0];
            let q2 = ac.q2_target.forward(&xn)?[0];
            t.r + gamma * q1.min(q2)
        };
        let mut x = ac.scale_obs(&t.s);
        x.extend(&t.a);
        let tr1 = ac.critic_q1.forward_trace(&x)?;
        let tr2 = ac.critic_q2.forward_trace(&x)?;
        let (q1, q2) = (tr1.output()[0], tr2.output()[0]);
        for q in [q1, q2, target] {
            if !q.is_finite() || q.abs() > cfg.max_abs_q {
                return Err(diverged("critic estimate", q));
            }
        }
        let (e1, e2) = (q1 - target, q2 - target);
        loss += 0.5 * (e1 * e1 + e2 * e2) / n;
        ac.critic_q1.backward_into(&tr1, &[2.0 * e1 / n], &mut g1)?;
        ac.critic_q2.backward_into(&tr2, &[2.0 * e2 / n], &mut g2)?;
    }
    opt.q1.step(ac.critic_q1.params_mut(), &g1);
    opt.q2.step(ac.critic_q2.params_mut(), &g2);

    if let (Some(vnet), Some(vopt)) = (ac.value_head.as_ref(), opt.value.as_mut()) {
        let mut gv = vec![0.0; vnet.param_count()];
        for t in batch {
            let s = ac.scale_obs(&t.s);
            let mut x = s.clone();
            x.extend(ac.actor.forward(&s)?);
            let target = ac.critic_q1.forward(&x)?[0].min(ac.critic_q2.forward(&x)?[0]);
            let tr = vnet.forward_trace(&s)?;
            let e = tr.output()[0] - target;
            vnet.backward_into(&tr, &[2.0 * e / n], &mut gv)?;
        }
        let mut v = vnet.clone();
        vopt.step(v.params_mut(), &gv);
        ac.value_head = Some(v);
    }

    if update_actor {
        let mut ga = vec![0.0; ac.actor.param_count()];
        let obs_dim = ac.obs_dim();
        let mut scratch = vec![0.0; ac.critic_q1.param_count()];
        for t in batch {
            let s = ac.scale_obs(&t.s);
            let tra = ac.actor.forward_trace(&s)?;
            let mut x = s;
            x.extend(tra.output());
            let trq = ac.critic_q1.forward_trace(&x)?;
            let gx = ac.critic_q1.backward_into(&trq, &[-1.0 / n], &mut scratch)?;
            ac.actor.backward_into(&tra, &gx[obs_dim..obs_dim + m], &mut ga)?;
        }
        opt.actor.step(ac.actor.params_mut(), &ga);
        let rate = cfg.target_rate;
        ac.actor_target.soft_update_from(&ac.actor, rate)?;
        ac.q1_target.soft_update_from(&ac.critic_q1, rate)?;
        ac.q2_target.soft_update_from(&ac.critic_q2, rate)?;
    }
    Ok(loss)
}

/// Trains an actor-critic on `env` for `config.total_steps` environment
/// steps. The same `(env, config, seed)` always yields the same networks and
/// log.
pub fn train_td3<E: Environment>(env: &E, config: &Td3Config, seed: u64) -> Result<(ActorCritic, TrainingLog)> {
    let bounds = env.action_bounds();
    let mut init_rng = rng_from_seed(derive_seed(seed, 0, 0));
    let mut ac = ActorCritic::new(env.obs_dim(), &bounds, config, &mut init_rng)?;
    let mut log = TrainingLog::default();
    train_td3_from(&mut ac, env, config.total_steps, seed, &mut log)?;
    Ok((ac, log))
}

/// Continues training `ac` for `steps` environment steps, appending to `log`.
pub fn train_td3_from<E: Environment>(
    ac: &mut ActorCritic,
    env: &E,
    steps: usize,
    seed: u64,
    log: &mut TrainingLog,
) -> Result<()> {
    let cfg = ac.config.clone();
    check_dim(MODULE, "action bounds", ac.action_dim(), env.action_bounds().len())?;
    check_dim(MODULE, "observation", ac.obs_dim(), env.obs_dim())?;
    let gamma = env.gamma();
    let mut env = env.clone();
    let mut env_rng = rng_from_seed(derive_seed(seed, 1, 0));
    let mut rng = rng_from_seed(derive_seed(seed, 2, 0));
    let mut opt = Optimisers {
        actor: Adam::new(ac.actor.param_count(), cfg.actor_lr),
        q1: Adam::new(ac.critic_q1.param_count(), cfg.critic_lr),
        q2: Adam::new(ac.critic_q2.param_count(), cfg.critic_lr),
        value: ac.value_head.as_ref().map(|v| Adam::new(v.param_count(), cfg.value_lr)),
    };
    let mut buffer = ReplayBuffer::new(cfg.buffer_capacity);
    let m = ac.action_dim();
    let mut n_updates = 0usize;

    let mut t = 0;
    let mut episode = log.episodes.len();
    while t < steps {
        let mut obs = env.reset(&mut env_rng)?;
        let (mut ret, mut disc, mut ep_steps) = (0.0, 1.0, 0);
        let (mut loss_sum, mut loss_n) = (0.0, 0usize);
        loop {
            let y: Vec<f64> = if t < cfg.warmup_steps {
                (0..m).map(|_| rng.random_range(-1.0..=1.0)).collect()
            } else {
                let mut y = ac.actor.forward(&ac.scale_obs(&obs))?;
                for v in &mut y {
                    *v = (*v + cfg.explore_noise * gaussian(&mut rng)).clamp(-1.0, 1.0);
                }
                y
            };
            let a = ac.denormalize_action(&y);
            let st = env.step(&a, &mut env_rng)?;
            if !st.reward.is_finite() {
                return Err(diverged("reward", st.reward));
            }
            ret += disc * st.reward;
            disc *= gamma;
            buffer.push(Transition {
                s: obs,
                a: y,
                r: st.reward,
                s_next: st.obs.clone(),
                terminal: st.terminal,
            });
            obs = st.obs;
            t += 1;
            ep_steps += 1;
            if t >= cfg.warmup_steps && buffer.len() >= cfg.batch_size.min(buffer.capacity()) {
                let batch = buffer.sample(cfg.batch_size, &mut rng);
                n_updates += 1;
                let l = update(ac, &mut opt, &batch, gamma, n_updates % cfg.policy_delay == 0, &mut rng)?;
                loss_sum += l;
                loss_n += 1;
            }
            if st.done || t >= steps {
                break;
            }
        }
        if !ret.is_finite() {
            return Err(diverged("episode return", ret));
        }
        log.episodes.push(EpisodeLog {
            episode,
            steps: ep_steps,
            ret,
            critic_loss: if loss_n > 0 { loss_sum / loss_n as f64 } else { f64::NAN },
        });
        episode += 1;
    }
    Ok(())
}
