//! Finite SSDPs with enumerated exogenous outcomes.
//!
//! `W_k ~ p(·|S_k)` is drawn after the action, so the information it
//! carries is unavailable to a policy over `S_k` but becomes observable once
//! folded into the state. Both the plain MDP (W marginalised) and the
//! `(S, W)` augmentation can be built exactly, which is what the
//! augmentation-dominance property is checked against.

use rand::Rng as _;

use super::{Row, TabularMdp, MODULE};
use crate::error::{Error, Result};
use crate::rng::rng_from_seed;
use crate::ssdp::{Distribution, ExoProcess, FnDynamics, Horizon, SsdpSpec};

#[derive(Debug, Clone, PartialEq)]
pub struct TabularSsdp {
    pub n_states: usize,
    pub n_actions: usize,
    pub n_exo: usize,
    /// `next[(s * n_actions + a) * n_exo + w]`.
    pub next: Vec<usize>,
    /// Same indexing as `next`.
    pub reward: Vec<f64>,
    /// `p(w | s)` at `exo_probs[s * n_exo + w]`.
    pub exo_probs: Vec<f64>,
    pub init: Vec<f64>,
    pub gamma: f64,
}

impl TabularSsdp {
    /// Random instance with sizes drawn uniformly from `2..=max_*`.
    pub fn random(
        seed: u64,
        max_states: usize,
        max_actions: usize,
        max_exo: usize,
        state_dependent_exo: bool,
    ) -> Result<Self> {
        if max_states < 2 || max_actions < 1 || max_exo < 1 {
            return Err(Error::invalid(MODULE, "random SSDP needs max_states >= 2 and non-zero sizes"));
        }
        let mut rng = rng_from_seed(seed);
        let n_states = rng.random_range(2..=max_states);
        let n_actions = rng.random_range(1..=max_actions);
        let n_exo = rng.random_range(1..=max_exo);
        let gamma = rng.random_range(0.5..0.95);
        let n = n_states * n_actions * n_exo;
        let next = (0..n).map(|_| rng.random_range(0..n_states)).collect();
        let reward = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let exo_row = |rng: &mut crate::rng::Rng| {
            let raw: Vec<f64> = (0..n_exo).map(|_| rng.random::<f64>() + 0.05).collect();
            let t: f64 = raw.iter().sum();
            raw.into_iter().map(|x| x / t).collect::<Vec<_>>()
        };
        let exo_probs = if state_dependent_exo {
            (0..n_states).flat_map(|_| exo_row(&mut rng)).collect()
        } else {
            let row = exo_row(&mut rng);
            (0..n_states).flat_map(|_| row.clone()).collect()
        };
        let raw: Vec<f64> = (0..n_states).map(|_| rng.random::<f64>()).collect();
        let t: f64 = raw.iter().sum();
        let init = raw.into_iter().map(|x| x / t).collect();
        Ok(TabularSsdp {
            n_states,
            n_actions,
            n_exo,
            next,
            reward,
            exo_probs,
            init,
            gamma,
        })
    }

    fn idx(&self, s: usize, a: usize, w: usize) -> usize {
        (s * self.n_actions + a) * self.n_exo + w
    }

    fn p_w(&self, s: usize, w: usize) -> f64 {
        self.exo_probs[s * self.n_exo + w]
    }

    /// The SSDP with `W` marginalised out: a policy sees only `S_k`.
    pub fn to_mdp(&self) -> Result<TabularMdp> {
        let mut rows = Vec::with_capacity(self.n_states * self.n_actions);
        let mut rewards = Vec::with_capacity(self.n_states * self.n_actions);
        for s in 0..self.n_states {
            for a in 0..self.n_actions {
                let mut row: Row = Vec::new();
                let mut r = 0.0;
                for w in 0..self.n_exo {
                    let p = self.p_w(s, w);
                    row.push((self.next[self.idx(s, a, w)], p));
                    r += p * self.reward[self.idx(s, a, w)];
                }
                rows.push(row);
                rewards.push(r);
            }
        }
        TabularMdp::new(self.n_states, self.n_actions, rows, rewards, self.gamma, self.init.clone())
    }

    /// The `(S, W)` augmentation; state index `s * n_exo + w`.
    pub fn augmented_mdp(&self) -> Result<TabularMdp> {
        let ns = self.n_states * self.n_exo;
        let mut rows = Vec::with_capacity(ns * self.n_actions);
        let mut rewards = Vec::with_capacity(ns * self.n_actions);
        for s in 0..self.n_states {
            for w in 0..self.n_exo {
                for a in 0..self.n_actions {
                    let s2 = self.next[self.idx(s, a, w)];
                    rows.push((0..self.n_exo).map(|w2| (s2 * self.n_exo + w2, self.p_w(s2, w2))).collect());
                    rewards.push(self.reward[self.idx(s, a, w)]);
                }
            }
        }
        let init = (0..self.n_states)
            .flat_map(|s| (0..self.n_exo).map(move |w| (s, w)))
            .map(|(s, w)| self.init[s] * self.p_w(s, w))
            .collect();
        TabularMdp::new(ns, self.n_actions, rows, rewards, self.gamma, init)
    }

    /// The same process as a generic [`SsdpSpec`] over scalar indices.
    ///
    /// Only available when `p(w|s)` does not depend on `s`.
    pub fn to_spec(&self) -> Result<SsdpSpec> {
        let row = &self.exo_probs[..self.n_exo];
        if (1..self.n_states).any(|s| &self.exo_probs[s * self.n_exo..(s + 1) * self.n_exo] != row) {
            return Err(Error::unsupported(MODULE, "state-dependent exogenous law has no iid spec form"));
        }
        let values: Vec<f64> = (0..self.n_exo).map(|w| w as f64).collect();
        let exo = ExoProcess::Iid(Distribution::discrete_scalar(&values, row)?);
        let me = self.clone();
        let dynamics = FnDynamics::new(move |s, a, w| {
            let i = me.idx(s[0] as usize, a[0] as usize, w[0] as usize);
            (vec![me.next[i] as f64], me.reward[i])
        });
        let states: Vec<f64> = (0..self.n_states).map(|s| s as f64).collect();
        SsdpSpec::new("tabular", 1, 1, dynamics, exo, self.gamma, Horizon::Unbounded)?
            .with_init(Distribution::discrete_scalar(&states, &self.init)?)
    }
}
