//! Value-function interfaces and the one-step TD error.

use super::mlp::Mlp;
use super::td3::ActorCritic;

pub trait ValueFunction {
    fn value(&self, obs: &[f64]) -> f64;
}

pub trait QFunction {
    fn q(&self, obs: &[f64], a: &[f64]) -> f64;
}

/// A network's first output; NaN on a dimension mismatch.
impl ValueFunction for Mlp {
    fn value(&self, obs: &[f64]) -> f64 {
        self.forward(obs).map(|y| y[0]).unwrap_or(f64::NAN)
    }
}

impl ValueFunction for ActorCritic {
    fn value(&self, obs: &[f64]) -> f64 {
        ActorCritic::value(self, obs).unwrap_or(f64::NAN)
    }
}

impl QFunction for ActorCritic {
    fn q(&self, obs: &[f64], a: &[f64]) -> f64 {
        self.q_min(obs, a).unwrap_or(f64::NAN)
    }
}

/// Table over states observed as `[s as f64]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularValue(pub Vec<f64>);

impl ValueFunction for TabularValue {
    fn value(&self, obs: &[f64]) -> f64 {
        let s = obs[0].round();
        if s < 0.0 {
            return f64::NAN;
        }
        self.0.get(s as usize).copied().unwrap_or(f64::NAN)
    }
}

/// `q[s][a]` over observations `[s]` and actions `[a]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularQ(pub Vec<Vec<f64>>);

impl QFunction for TabularQ {
    fn q(&self, obs: &[f64], a: &[f64]) -> f64 {
        let (s, a) = (obs[0].round(), a[0].round());
        if s < 0.0 || a < 0.0 {
            return f64::NAN;
        }
        self.0
            .get(s as usize)
            .and_then(|row| row.get(a as usize))
            .copied()
            .unwrap_or(f64::NAN)
    }
}

/// `δ = r + γ V(s') − V(s)`, without the bootstrap term when `terminal`.
pub fn td_error(v: &dyn ValueFunction, s: &[f64], r: f64, s_next: &[f64], gamma: f64, terminal: bool) -> f64 {
    let boot = if terminal { 0.0 } else { gamma * v.value(s_next) };
    r + boot - v.value(s)
}
