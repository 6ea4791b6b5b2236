//! Episodic follower environment over a predecessor trace.

use std::sync::Arc;

use rand::Rng as _;

use super::observe::ACC_PRED_SLOT;
use super::spec::default_initial_state;
use super::{
    dynamics_step, reward, synth_stop_and_go, RewardWeights, StopAndGoConfig, VehicleParams, VehicleState,
    MODULE,
};
use crate::error::{Error, Result};
use crate::nn::{EnvStep, Environment};
use crate::rng::Rng;
use crate::ssdp::Distribution;

#[derive(Debug, Clone, PartialEq)]
pub enum PredecessorSource {
    /// The same recorded trace every episode.
    Trace(Arc<Vec<f64>>),
    /// A fresh synthetic trace per episode, seeded from the episode RNG.
    StopAndGo(StopAndGoConfig),
}

/// Observation `[e_p, e_v, acc, acc_pred_k]`. The inferior observation
/// replaces `acc_pred_k` with `dummy_value`.
#[derive(Debug, Clone)]
pub struct FollowingEnv {
    params: VehicleParams,
    weights: RewardWeights,
    source: PredecessorSource,
    horizon: usize,
    gamma: f64,
    init: Distribution,
    dummy_value: f64,
    x: VehicleState,
    k: usize,
    trace: Arc<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FollowingSnapshot {
    pub x: VehicleState,
    pub k: usize,
    pub trace: Arc<Vec<f64>>,
}

impl FollowingEnv {
    pub fn new(
        params: VehicleParams,
        weights: RewardWeights,
        source: PredecessorSource,
        horizon: usize,
        gamma: f64,
    ) -> Result<Self> {
        params.validate()?;
        weights.validate()?;
        if horizon == 0 || !(0.0..1.0).contains(&gamma) {
            return Err(Error::invalid(MODULE, "episode length must be >= 1 and gamma in [0,1)"));
        }
        if let PredecessorSource::Trace(t) = &source {
            if t.len() < horizon + 1 {
                return Err(Error::invalid(
                    MODULE,
                    format!("trace of {} samples is shorter than K + 1 = {}", t.len(), horizon + 1),
                ));
            }
        }
        if let PredecessorSource::StopAndGo(cfg) = &source {
            cfg.validate()?;
            if cfg.duration < horizon + 1 {
                return Err(Error::invalid(MODULE, "stop-and-go duration shorter than K + 1"));
            }
        }
        Ok(FollowingEnv {
            params,
            weights,
            source,
            horizon,
            gamma,
            init: default_initial_state(),
            dummy_value: 0.0,
            x: VehicleState::default(),
            k: 0,
            trace: Arc::new(Vec::new()),
        })
    }

    pub fn with_init(mut self, init: Distribution) -> Result<Self> {
        if init.dim() != 3 {
            return Err(Error::invalid(MODULE, "initial law must be 3-dimensional"));
        }
        init.validate()?;
        self.init = init;
        Ok(self)
    }

    pub fn with_dummy_value(mut self, v: f64) -> Self {
        self.dummy_value = v;
        self
    }

    pub fn state(&self) -> VehicleState {
        self.x
    }

    pub fn step_index(&self) -> usize {
        self.k
    }

    pub fn acc_pred(&self) -> f64 {
        self.trace.get(self.k).copied().unwrap_or(0.0)
    }

    pub fn trace(&self) -> &Arc<Vec<f64>> {
        &self.trace
    }

    pub fn params(&self) -> &VehicleParams {
        &self.params
    }
}

impl Environment for FollowingEnv {
    type Snapshot = FollowingSnapshot;

    fn obs_dim(&self) -> usize {
        4
    }
    fn action_bounds(&self) -> Vec<(f64, f64)> {
        vec![(-self.params.u_max, self.params.u_max)]
    }
    fn gamma(&self) -> f64 {
        self.gamma
    }
    fn reset(&mut self, rng: &mut Rng) -> Result<Vec<f64>> {
        self.x = VehicleState::from_slice(&self.init.sample(rng));
        self.k = 0;
        self.trace = match &self.source {
            PredecessorSource::Trace(t) => t.clone(),
            PredecessorSource::StopAndGo(cfg) => Arc::new(synth_stop_and_go(cfg, rng.random())?.acc),
        };
        Ok(self.observation())
    }
    fn step(&mut self, a: &[f64], _rng: &mut Rng) -> Result<EnvStep> {
        let u = a
            .first()
            .copied()
            .ok_or_else(|| Error::invalid(MODULE, "empty action"))?
            .clamp(-self.params.u_max, self.params.u_max);
        let r = reward(&self.x, u, &self.params, &self.weights);
        let (next, _) = dynamics_step(self.x, u, self.acc_pred(), &self.params);
        self.x = next;
        self.k += 1;
        Ok(EnvStep {
            obs: self.observation(),
            reward: r,
            done: self.k >= self.horizon,
            terminal: false,
        })
    }
    fn observation(&self) -> Vec<f64> {
        let mut o = self.x.to_vec();
        o.push(self.acc_pred());
        o
    }
    fn inferior_observation(&self) -> Vec<f64> {
        let mut o = self.observation();
        o[ACC_PRED_SLOT] = self.dummy_value;
        o
    }
    fn snapshot(&self) -> Result<FollowingSnapshot> {
        Ok(FollowingSnapshot {
            x: self.x,
            k: self.k,
            trace: self.trace.clone(),
        })
    }
    fn restore(&mut self, snap: &FollowingSnapshot) -> Result<()> {
        self.x = snap.x;
        self.k = snap.k;
        self.trace = snap.trace.clone();
        Ok(())
    }
}
