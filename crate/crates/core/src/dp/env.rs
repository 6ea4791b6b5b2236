//! Sampling environment over a [`TabularMdp`].

use std::sync::Arc;

use rand::Rng as _;

use super::TabularMdp;
use crate::error::{Error, Result};
use crate::nn::{EnvStep, Environment};
use crate::rng::Rng;

/// Observations are `[s as f64]`; actions are rounded to the nearest index.
///
/// Every step consumes exactly one uniform draw whatever the action, so two
/// policies run on the same seed see common random numbers.
#[derive(Clone)]
pub struct TabularEnv {
    mdp: Arc<TabularMdp>,
    horizon: usize,
    inferior: Option<Arc<Vec<usize>>>,
    s: usize,
    k: usize,
}

impl TabularEnv {
    pub fn new(mdp: Arc<TabularMdp>, horizon: usize) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::invalid("dp", "episode length must be >= 1"));
        }
        Ok(TabularEnv {
            mdp,
            horizon,
            inferior: None,
            s: 0,
            k: 0,
        })
    }

    /// Inferior observation of state `s` is `map[s]`.
    pub fn with_inferior(mut self, map: Vec<usize>) -> Result<Self> {
        if map.len() != self.mdp.n_states() || map.iter().any(|&j| j >= self.mdp.n_states()) {
            return Err(Error::invalid("dp", "inferior observation map has wrong size or range"));
        }
        self.inferior = Some(Arc::new(map));
        Ok(self)
    }

    pub fn mdp(&self) -> &TabularMdp {
        &self.mdp
    }

    pub fn state(&self) -> usize {
        self.s
    }

    fn sample(dist: &[(usize, f64)], u: f64) -> usize {
        let mut acc = 0.0;
        for &(j, p) in dist {
            acc += p;
            if u < acc {
                return j;
            }
        }
        dist.last().map_or(0, |e| e.0)
    }

    pub fn action_index(&self, a: &[f64]) -> usize {
        let x = a.first().copied().unwrap_or(0.0).round();
        x.clamp(0.0, (self.mdp.n_actions() - 1) as f64) as usize
    }
}

impl Environment for TabularEnv {
    type Snapshot = (usize, usize);

    fn obs_dim(&self) -> usize {
        1
    }
    fn action_bounds(&self) -> Vec<(f64, f64)> {
        vec![(0.0, (self.mdp.n_actions() - 1) as f64)]
    }
    fn gamma(&self) -> f64 {
        self.mdp.gamma()
    }
    fn reset(&mut self, rng: &mut Rng) -> Result<Vec<f64>> {
        let init: Vec<(usize, f64)> = self.mdp.init().iter().copied().enumerate().collect();
        self.s = Self::sample(&init, rng.random());
        self.k = 0;
        Ok(vec![self.s as f64])
    }
    fn step(&mut self, a: &[f64], rng: &mut Rng) -> Result<EnvStep> {
        let ai = self.action_index(a);
        let r = self.mdp.reward(self.s, ai);
        self.s = Self::sample(self.mdp.row(self.s, ai), rng.random());
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
    fn inferior_observation(&self) -> Vec<f64> {
        match &self.inferior {
            Some(m) => vec![m[self.s] as f64],
            None => vec![self.s as f64],
        }
    }
    fn snapshot(&self) -> Result<(usize, usize)> {
        Ok((self.s, self.k))
    }
    fn restore(&mut self, snap: &(usize, usize)) -> Result<()> {
        if snap.0 >= self.mdp.n_states() {
            return Err(Error::invalid("dp", "snapshot state out of range"));
        }
        self.s = snap.0;
        self.k = snap.1;
        Ok(())
    }
}
