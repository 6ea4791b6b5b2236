//! Monte-Carlo refitting of critics on off-policy start actions.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::env::Environment;
use super::fit::regress;
use super::td3::ActorCritic;
use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from_seed, Rng};
use crate::ssdp::Policy;

const MODULE: &str = "nn";

/// Discounted return of taking `first` in the current state of `env` and
/// following `follow` afterwards, for at most `max_len` steps in total.
pub fn rollout_return<E: Environment>(
    env: &mut E,
    first: &[f64],
    follow: &dyn Policy,
    max_len: usize,
    rng: &mut Rng,
) -> Result<f64> {
    let gamma = env.gamma();
    let mut st = env.step(first, rng)?;
    let mut ret = st.reward;
    let mut disc = gamma;
    let mut n = 1;
    while !st.done && n < max_len {
        let a = follow.act(&st.obs);
        st = env.step(&a, rng)?;
        ret += disc * st.reward;
        disc *= gamma;
        n += 1;
    }
    Ok(ret)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FinetuneConfig {
    pub n_rollouts: usize,
    /// Greedy episodes used to collect start states.
    pub n_start_episodes: usize,
    /// Only steps `k < start_steps` of each episode become start states.
    pub start_steps: usize,
    pub rollout_len: usize,
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
}

impl Default for FinetuneConfig {
    fn default() -> Self {
        FinetuneConfig {
            n_rollouts: 32,
            n_start_episodes: 4,
            start_steps: 50,
            rollout_len: usize::MAX,
            epochs: 200,
            lr: 1e-3,
            batch_size: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct McLabel {
    pub obs: Vec<f64>,
    pub action: Vec<f64>,
    pub mean: f64,
    pub std_err: f64,
    pub n: usize,
}

pub fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct FinetuneReport {
    pub labels: Vec<McLabel>,
    pub train_mse: f64,
}

/// Refits both critics of `ac` on Monte-Carlo returns of `(S^sup_k, a^inf_k)`
/// pairs continued by the actor.
pub fn finetune_q_montecarlo<E: Environment>(
    ac: &ActorCritic,
    env: &E,
    pi_inf: &dyn Policy,
    cfg: &FinetuneConfig,
    seed: u64,
) -> Result<(ActorCritic, FinetuneReport)> {
    if cfg.n_rollouts < 1 {
        return Err(Error::invalid(MODULE, "n_rollouts must be >= 1"));
    }
    if cfg.n_start_episodes < 1 || cfg.start_steps < 1 || cfg.rollout_len < 1 {
        return Err(Error::invalid(MODULE, "start episodes, start steps and rollout length must be >= 1"));
    }
    let mut env = env.clone();
    let mut rng = rng_from_seed(derive_seed(seed, 0, 0));
    let mut starts = Vec::new();
    for _ in 0..cfg.n_start_episodes {
        let mut obs = env.reset(&mut rng)?;
        for _ in 0..cfg.start_steps {
            let a_inf = pi_inf.act(&env.inferior_observation());
            starts.push((env.snapshot()?, obs.clone(), a_inf));
            let st = env.step(&ac.act(&obs)?, &mut rng)?;
            obs = st.obs;
            if st.done {
                break;
            }
        }
    }

    let labels = crate::rng::with_pool(|| {
        starts
            .par_iter()
            .enumerate()
            .map(|(i, (snap, obs, a_inf))| {
                let mut e = env.clone();
                let mut rets = Vec::with_capacity(cfg.n_rollouts);
                for j in 0..cfg.n_rollouts {
                    e.restore(snap)?;
                    let mut r = rng_from_seed(derive_seed(seed, 1 + i as u64, j as u64));
                    rets.push(rollout_return(&mut e, a_inf, ac, cfg.rollout_len, &mut r)?);
                }
                let (mean, std_err) = mean_and_se(&rets);
                Ok(McLabel {
                    obs: obs.clone(),
                    action: a_inf.clone(),
                    mean,
                    std_err,
                    n: rets.len(),
                })
            })
            .collect::<Result<Vec<_>>>()
    })?;

    let mut out = ac.clone();
    let xs: Vec<Vec<f64>> = labels
        .iter()
        .map(|l| {
            let mut x = ac.scale_obs(&l.obs);
            x.extend(ac.normalize_action(&l.action));
            x
        })
        .collect();
    let ys: Vec<f64> = labels.iter().map(|l| l.mean).collect();
    let mut fit_rng = rng_from_seed(derive_seed(seed, 0, 1));
    let m1 = regress(&mut out.critic_q1, &xs, &ys, cfg.lr, cfg.epochs, cfg.batch_size, &mut fit_rng)?;
    let m2 = regress(&mut out.critic_q2, &xs, &ys, cfg.lr, cfg.epochs, cfg.batch_size, &mut fit_rng)?;
    out.q1_target = out.critic_q1.clone();
    out.q2_target = out.critic_q2.clone();
    Ok((
        out,
        FinetuneReport {
            labels,
            train_mse: 0.5 * (m1 + m2),
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn se_of_constant_is_zero() {
        assert_eq!(mean_and_se(&[2.0, 2.0, 2.0]), (2.0, 0.0));
    }
}
