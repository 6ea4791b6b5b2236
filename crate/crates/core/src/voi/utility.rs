//! Utility-based VoI: expected (EVoI) and immediate (IVoI) values and the
//! three IVoI estimation methods.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::record::{InfoScenario, VoiKind, VoiMethod, VoiRecord};
use crate::error::{Error, Result};
use crate::nn::{
    fit_advantage_estimator, mean_and_se, td_error, AdvantageEstimator, AdvantageSample, Environment, QFunction,
    RegressionConfig, ValueFunction,
};
use crate::rng::{derive_seed, rng_from_seed, with_pool, Rng};
use crate::ssdp::Policy;
use crate::vehicle::VehicleGridModel;

const MODULE: &str = "voi";

/// Advantage `A_{π^sup}(s, a)` of the superior policy.
pub trait AdvantageSource: Send + Sync {
    fn advantage(&self, s_sup: &[f64], a: &[f64]) -> Result<f64>;
}

/// Exact tables over observations `[s]` and actions `[a]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularCritic {
    pub q: Vec<Vec<f64>>,
    pub v: Vec<f64>,
}

impl TabularCritic {
    fn index(&self, s: &[f64], a: &[f64]) -> Result<(usize, usize)> {
        let (si, ai) = (s.first().copied().unwrap_or(-1.0), a.first().copied().unwrap_or(-1.0));
        let (si, ai) = (si.round(), ai.round());
        if si < 0.0 || ai < 0.0 || si as usize >= self.q.len() || ai as usize >= self.q[si as usize].len() {
            return Err(Error::invalid(MODULE, format!("({si}, {ai}) outside the tabular critic")));
        }
        Ok((si as usize, ai as usize))
    }
}

impl AdvantageSource for TabularCritic {
    fn advantage(&self, s: &[f64], a: &[f64]) -> Result<f64> {
        let (si, ai) = self.index(s, a)?;
        Ok(self.q[si][ai] - self.v[si])
    }
}

impl AdvantageSource for AdvantageEstimator {
    fn advantage(&self, s: &[f64], a: &[f64]) -> Result<f64> {
        self.predict(s, a)
    }
}

impl AdvantageSource for crate::vehicle::VehicleGridModel {
    fn advantage(&self, s: &[f64], a: &[f64]) -> Result<f64> {
        let u = a.first().copied().ok_or_else(|| Error::invalid(MODULE, "empty action"))?;
        Ok(VehicleGridModel::advantage(self, s, u))
    }
}

/// Which policy plays the superior role.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairMode {
    #[default]
    Standard,
    /// No superior policy is available: the inferior policy, fed the
    /// inferior observation, stands in for it.
    InferiorFallback,
}

/// The inferior/superior policies compared by every VoI estimator, plus an
/// optional advantage source for the superior policy.
#[derive(Clone, Copy)]
pub struct PolicyPair<'a> {
    pub pi_inf: &'a dyn Policy,
    pub pi_sup: &'a dyn Policy,
    pub critic_sup: Option<&'a dyn AdvantageSource>,
    pub mode: PairMode,
    pub scenario: InfoScenario,
}

impl<'a> PolicyPair<'a> {
    pub fn new(pi_inf: &'a dyn Policy, pi_sup: &'a dyn Policy) -> Self {
        PolicyPair {
            pi_inf,
            pi_sup,
            critic_sup: None,
            mode: PairMode::Standard,
            scenario: InfoScenario::Missing,
        }
    }

    pub fn fallback(pi_inf: &'a dyn Policy) -> Self {
        PolicyPair {
            mode: PairMode::InferiorFallback,
            ..PolicyPair::new(pi_inf, pi_inf)
        }
    }

    pub fn with_critic(mut self, c: &'a dyn AdvantageSource) -> Self {
        self.critic_sup = Some(c);
        self
    }

    pub fn with_scenario(mut self, s: InfoScenario) -> Self {
        self.scenario = s;
        self
    }

    pub fn inf_action<E: Environment>(&self, env: &E) -> Vec<f64> {
        self.pi_inf.act(&env.inferior_observation())
    }

    pub fn sup_action<E: Environment>(&self, env: &E) -> Vec<f64> {
        match self.mode {
            PairMode::Standard => self.pi_sup.act(&env.observation()),
            PairMode::InferiorFallback => self.pi_inf.act(&env.inferior_observation()),
        }
    }
}

/// `Ξ = J_inf − J_sup`.
pub fn evoi(j_inf: f64, j_sup: f64) -> f64 {
    j_inf - j_sup
}

/// Mean, standard error and two-sided 95% Student-t interval.
pub fn t_interval(xs: &[f64]) -> Result<(f64, f64, f64, f64)> {
    if xs.len() < 2 {
        return Err(Error::invalid(MODULE, "a confidence interval needs at least two samples"));
    }
    let (mean, se) = mean_and_se(xs);
    let t = StudentsT::new(0.0, 1.0, (xs.len() - 1) as f64)
        .map_err(|e| Error::invalid(MODULE, e.to_string()))?
        .inverse_cdf(0.975);
    Ok((mean, se, mean - t * se, mean + t * se))
}

struct Paired {
    inf: f64,
    sup: f64,
}

fn run_episode<E: Environment>(env: &mut E, pair: &PolicyPair, inferior: bool, seed: u64, max_len: usize) -> Result<f64> {
    let mut rng = rng_from_seed(seed);
    env.reset(&mut rng)?;
    let gamma = env.gamma();
    let (mut ret, mut disc) = (0.0, 1.0);
    for _ in 0..max_len {
        let a = if inferior { pair.inf_action(env) } else { pair.sup_action(env) };
        let st = env.step(&a, &mut rng)?;
        ret += disc * st.reward;
        disc *= gamma;
        if st.done {
            break;
        }
    }
    Ok(ret)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvoiEstimate {
    pub record: VoiRecord,
    pub mean_inf: f64,
    pub mean_sup: f64,
    pub std_err: f64,
    pub differences: Vec<f64>,
}

/// Paired Monte-Carlo EVoI: episode `e` of both policies uses the same
/// seed, so environments that consume randomness independently of the
/// action see common random numbers.
pub fn evoi_montecarlo<E: Environment>(
    env: &E,
    pair: &PolicyPair,
    n_episodes: usize,
    max_len: usize,
    seed: u64,
) -> Result<EvoiEstimate> {
    if n_episodes < 2 {
        return Err(Error::invalid(MODULE, "Monte-Carlo EVoI needs n_episodes >= 2"));
    }
    let runs: Vec<Paired> = with_pool(|| {
        (0..n_episodes)
            .into_par_iter()
            .map(|e| {
                let s = derive_seed(seed, 0, e as u64);
                let mut env_i = env.clone();
                let mut env_s = env.clone();
                Ok(Paired {
                    inf: run_episode(&mut env_i, pair, true, s, max_len)?,
                    sup: run_episode(&mut env_s, pair, false, s, max_len)?,
                })
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let diffs: Vec<f64> = runs.iter().map(|p| p.inf - p.sup).collect();
    let (mean, se, lo, hi) = t_interval(&diffs)?;
    let n = n_episodes as f64;
    let record = VoiRecord::aggregate(pair.scenario.expected_kind(), VoiMethod::MonteCarlo, mean)
        .with_ci(lo, hi)
        .with_note(format!("paired episodes={n_episodes}"));
    Ok(EvoiEstimate {
        record,
        mean_inf: runs.iter().map(|p| p.inf).sum::<f64>() / n,
        mean_sup: runs.iter().map(|p| p.sup).sum::<f64>() / n,
        std_err: se,
        differences: diffs,
    })
}

/// `ξ = A_{π^sup}(s_sup, a_inf)` with `a_inf = π^inf(s_inf)`.
pub fn ivoi(pair: &PolicyPair, s_sup: &[f64], s_inf: &[f64]) -> Result<f64> {
    let critic = pair.critic_sup.ok_or_else(|| {
        Error::unsupported(
            MODULE,
            "IVoI needs an advantage source for the superior policy: a Method A estimator, Method B critics or an exact tabular critic",
        )
    })?;
    critic.advantage(s_sup, &pair.pi_inf.act(s_inf))
}

/// Method B: `Q(s, a) − Q(s, π^sup(s))` from a Q function (the twin-critic
/// minimum for an [`crate::nn::ActorCritic`]).
pub struct MethodB<'a> {
    q: &'a dyn QFunctionSync,
    pi_sup: &'a dyn Policy,
}

/// [`QFunction`] usable across threads.
pub trait QFunctionSync: QFunction + Send + Sync {}
impl<T: QFunction + Send + Sync> QFunctionSync for T {}

/// `deterministic` states that π^sup is a deterministic policy; otherwise
/// `Q(s, π(s))` is not the state value and Method C should be used.
pub fn ivoi_method_b<'a>(q: &'a dyn QFunctionSync, pi_sup: &'a dyn Policy, deterministic: bool) -> Result<MethodB<'a>> {
    if !deterministic {
        return Err(Error::unsupported(
            MODULE,
            "Method B's Q(s, π(s)) shortcut needs a deterministic superior policy; use Method C with a value head",
        ));
    }
    Ok(MethodB { q, pi_sup })
}

impl AdvantageSource for MethodB<'_> {
    fn advantage(&self, s: &[f64], a: &[f64]) -> Result<f64> {
        let a_sup = self.pi_sup.act(s);
        Ok(self.q.q(s, a) - self.q.q(s, &a_sup))
    }
}

/// One observed transition under the inferior policy.
#[derive(Debug, Clone, PartialEq)]
pub struct SupTransition {
    pub k: usize,
    pub s_sup: Vec<f64>,
    pub a_inf: Vec<f64>,
    pub r: f64,
    pub s_sup_next: Vec<f64>,
    pub terminal: bool,
}

/// Method C: TD errors `δ_k` of the superior value function along the
/// transitions.
pub fn ivoi_method_c(v: &dyn ValueFunction, transitions: &[SupTransition], gamma: f64) -> Vec<f64> {
    transitions
        .iter()
        .map(|t| td_error(v, &t.s_sup, t.r, &t.s_sup_next, gamma, t.terminal))
        .collect()
}

/// Runs `pi_inf` for one episode and records the superior-observation
/// transitions it generates.
pub fn collect_inferior_transitions<E: Environment>(env: &E, pair: &PolicyPair, max_len: usize, seed: u64) -> Result<Vec<SupTransition>> {
    let mut env = env.clone();
    let mut rng = rng_from_seed(seed);
    let mut obs = env.reset(&mut rng)?;
    let mut out = Vec::new();
    for k in 0..max_len {
        let a = pair.inf_action(&env);
        let st = env.step(&a, &mut rng)?;
        out.push(SupTransition {
            k,
            s_sup: obs,
            a_inf: a,
            r: st.reward,
            s_sup_next: st.obs.clone(),
            terminal: st.terminal,
        });
        obs = st.obs;
        if st.done {
            break;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MethodAConfig {
    pub rollout_set_size: usize,
    pub rollouts_per_state: usize,
    /// Probability that the data-collection policy plays `a_inf`.
    pub mix_prob: f64,
    /// Probability that a visited state joins the rollout set.
    pub keep_prob: f64,
    /// Maximum steps per rollout, including the first action.
    pub rollout_len: usize,
    pub fit: Option<RegressionConfig>,
}

impl Default for MethodAConfig {
    fn default() -> Self {
        MethodAConfig {
            rollout_set_size: 50,
            rollouts_per_state: 200,
            mix_prob: 0.5,
            keep_prob: 0.2,
            rollout_len: 500,
            fit: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodALabel {
    pub k: usize,
    pub s_sup: Vec<f64>,
    pub s_inf: Vec<f64>,
    pub a_inf: Vec<f64>,
    pub a_sup: Vec<f64>,
    pub mean: f64,
    pub std_err: f64,
    pub samples: Vec<f64>,
}

pub struct MethodAResult {
    pub labels: Vec<MethodALabel>,
    pub estimator: Option<AdvantageEstimator>,
}

fn continue_with_sup<E: Environment>(env: &mut E, pair: &PolicyPair, first: &[f64], max_len: usize, rng: &mut Rng) -> Result<f64> {
    let gamma = env.gamma();
    let mut st = env.step(first, rng)?;
    let (mut ret, mut disc, mut n) = (st.reward, gamma, 1);
    while !st.done && n < max_len {
        let a = pair.sup_action(env);
        st = env.step(&a, rng)?;
        ret += disc * st.reward;
        disc *= gamma;
        n += 1;
    }
    Ok(ret)
}

/// Method A: Monte-Carlo advantage labels on a rollout set gathered by a
/// policy mixing `a_inf` and `a_sup`, optionally followed by a regression
/// fit. Each label pairs an `a_inf`-first and an `a_sup`-first rollout on
/// the same seed.
pub fn ivoi_method_a<E: Environment>(env: &E, pair: &PolicyPair, cfg: &MethodAConfig, seed: u64) -> Result<MethodAResult> {
    if cfg.rollout_set_size == 0 || cfg.rollouts_per_state == 0 {
        return Err(Error::invalid(MODULE, "rollout set size and rollouts per state must be >= 1"));
    }
    if !(0.0..=1.0).contains(&cfg.mix_prob) || !(cfg.keep_prob > 0.0 && cfg.keep_prob <= 1.0) {
        return Err(Error::invalid(MODULE, "mix_prob must lie in [0,1] and keep_prob in (0,1]"));
    }
    let mut env0 = env.clone();
    env0.snapshot()
        .map_err(|_| Error::unsupported(MODULE, "Method A needs an environment that can restore recorded states"))?;
    let mut rng = rng_from_seed(derive_seed(seed, 0, 0));
    let mut set = Vec::with_capacity(cfg.rollout_set_size);
    let mut episodes = 0;
    while set.len() < cfg.rollout_set_size {
        episodes += 1;
        if episodes > 100 * cfg.rollout_set_size + 100 {
            return Err(Error::contract(MODULE, "could not gather the rollout set; keep_prob too small?"));
        }
        env0.reset(&mut rng)?;
        for k in 0..cfg.rollout_len {
            let a_inf = pair.inf_action(&env0);
            let a_sup = pair.sup_action(&env0);
            if rand::Rng::random::<f64>(&mut rng) < cfg.keep_prob {
                set.push((k, env0.snapshot()?, env0.observation(), env0.inferior_observation(), a_inf.clone(), a_sup.clone()));
                if set.len() == cfg.rollout_set_size {
                    break;
                }
            }
            let a = if rand::Rng::random::<f64>(&mut rng) < cfg.mix_prob { a_inf } else { a_sup };
            if env0.step(&a, &mut rng)?.done {
                break;
            }
        }
    }

    let labels = with_pool(|| {
        set.par_iter()
            .enumerate()
            .map(|(i, (k, snap, s_sup, s_inf, a_inf, a_sup))| {
                let mut e = env.clone();
                let mut samples = Vec::with_capacity(cfg.rollouts_per_state);
                for j in 0..cfg.rollouts_per_state {
                    let s = derive_seed(seed, 1 + i as u64, j as u64);
                    e.restore(snap)?;
                    let ri = continue_with_sup(&mut e, pair, a_inf, cfg.rollout_len, &mut rng_from_seed(s))?;
                    e.restore(snap)?;
                    let rs = continue_with_sup(&mut e, pair, a_sup, cfg.rollout_len, &mut rng_from_seed(s))?;
                    samples.push(ri - rs);
                }
                let (mean, std_err) = mean_and_se(&samples);
                Ok(MethodALabel {
                    k: *k,
                    s_sup: s_sup.clone(),
                    s_inf: s_inf.clone(),
                    a_inf: a_inf.clone(),
                    a_sup: a_sup.clone(),
                    mean,
                    std_err,
                    samples,
                })
            })
            .collect::<Result<Vec<_>>>()
    })?;

    let estimator = match &cfg.fit {
        Some(fc) => {
            let data: Vec<AdvantageSample> = labels
                .iter()
                .flat_map(|l| {
                    l.samples.iter().map(move |&t| AdvantageSample {
                        obs: l.s_sup.clone(),
                        action: l.a_inf.clone(),
                        target: t,
                    })
                })
                .collect();
            Some(fit_advantage_estimator(&data, fc, derive_seed(seed, 0, 1))?)
        }
        None => None,
    };
    Ok(MethodAResult { labels, estimator })
}

/// Per-step IVoI records along one inferior-policy episode, with the
/// advantage given by `pair.critic_sup`.
pub fn ivoi_trajectory<E: Environment>(env: &E, pair: &PolicyPair, method: VoiMethod, max_len: usize, seed: u64) -> Result<Vec<VoiRecord>> {
    let mut env = env.clone();
    let mut rng = rng_from_seed(seed);
    env.reset(&mut rng)?;
    let kind: VoiKind = pair.scenario.immediate_kind();
    let mut out = Vec::new();
    for k in 0..max_len {
        let s_sup = env.observation();
        let s_inf = env.inferior_observation();
        let xi = ivoi(pair, &s_sup, &s_inf)?;
        let a = pair.pi_inf.act(&s_inf);
        out.push(VoiRecord::aggregate(kind, method, xi).at(k, s_sup, a.clone()));
        if env.step(&a, &mut rng)?.done {
            break;
        }
    }
    Ok(out)
}
