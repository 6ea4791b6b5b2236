//! Observation models for the predecessor-acceleration slot.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::MODULE;
use crate::error::{Error, Result};

/// Index of the predecessor acceleration in the augmented follower state.
pub const ACC_PRED_SLOT: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ObservationModel {
    Full,
    /// The slot carries `dummy_value` whenever the information is missing.
    MissingDummy { dummy_value: f64 },
    /// Stale snapshot `τ` intervals old plus the actions taken since and `τ`.
    LastReceived { tau_max: usize },
}

impl Default for ObservationModel {
    fn default() -> Self {
        ObservationModel::MissingDummy { dummy_value: 0.0 }
    }
}

/// Recent augmented states (newest last) and actions.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationHistory {
    depth: usize,
    states: VecDeque<Vec<f64>>,
    actions: VecDeque<f64>,
}

impl ObservationHistory {
    /// Starts from `s0` with `depth` zero actions; missing older states
    /// replay `s0`.
    pub fn new(depth: usize, s0: &[f64]) -> Self {
        let mut states = VecDeque::with_capacity(depth + 1);
        states.push_back(s0.to_vec());
        ObservationHistory {
            depth,
            states,
            actions: std::iter::repeat(0.0).take(depth).collect(),
        }
    }

    /// Records `u_k` and then `S_{k+1}`.
    pub fn push(&mut self, u: f64, next_state: &[f64]) {
        self.actions.push_back(u);
        while self.actions.len() > self.depth {
            self.actions.pop_front();
        }
        self.states.push_back(next_state.to_vec());
        while self.states.len() > self.depth + 1 {
            self.states.pop_front();
        }
    }

    /// State `tau` intervals before the newest one.
    pub fn state_ago(&self, tau: usize) -> &[f64] {
        let n = self.states.len();
        &self.states[n - 1 - tau.min(n - 1)]
    }

    pub fn actions(&self) -> impl Iterator<Item = f64> + '_ {
        self.actions.iter().copied()
    }
}

/// Applies `model` to the true augmented state `[e_p, e_v, acc, acc_pred]`.
///
/// `tau` is the current observation delay and matters only for
/// `LastReceived`, whose output is the delayed-state layout
/// `[x_{k-τ} (3), acc_pred_{k-τ}, u_{k-τ_max}..u_{k-1}, τ]`.
pub fn observe(
    true_state: &[f64],
    model: &ObservationModel,
    history: &ObservationHistory,
    tau: usize,
) -> Result<Vec<f64>> {
    match model {
        ObservationModel::Full => Ok(true_state.to_vec()),
        ObservationModel::MissingDummy { dummy_value } => {
            let mut o = true_state.to_vec();
            *o.get_mut(ACC_PRED_SLOT)
                .ok_or_else(|| Error::invalid(MODULE, "state has no predecessor slot"))? = *dummy_value;
            Ok(o)
        }
        ObservationModel::LastReceived { tau_max } => {
            if tau > *tau_max {
                return Err(Error::contract(MODULE, format!("delay {tau} exceeds tau_max {tau_max}")));
            }
            if history.depth < *tau_max {
                return Err(Error::invalid(MODULE, "history shorter than tau_max"));
            }
            let mut o = history.state_ago(tau).to_vec();
            let skip = history.actions.len() - tau_max;
            o.extend(history.actions().skip(skip));
            o.push(tau as f64);
            Ok(o)
        }
    }
}
