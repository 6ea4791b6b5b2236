//! The follower as an [`SsdpSpec`] with the predecessor acceleration as
//! exogenous information.

use serde::{Deserialize, Serialize};

use super::{dynamics_step, predecessor_acc_step, reward, RewardWeights, VehicleParams, VehicleState, MODULE};
use crate::error::{Error, Result};
use crate::ssdp::{Distribution, ExoInput, ExoProcess, FnDriver, FnDynamics, Horizon, SsdpSpec};

/// Law of `acc_pred`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PredecessorModel {
    /// First-order lag driven by an iid predecessor input `u_pred`.
    Lag { u_values: Vec<f64>, u_probs: Vec<f64>, initial: f64 },
    /// Finite set of levels; each interval the level is redrawn from
    /// `weights` with probability `resample_prob`, otherwise kept.
    Levels {
        levels: Vec<f64>,
        weights: Vec<f64>,
        resample_prob: f64,
    },
    /// Recorded sequence.
    Trace { acc: Vec<f64> },
    Constant { acc: f64 },
}

fn normalised(w: &[f64]) -> Result<Vec<f64>> {
    let t: f64 = w.iter().sum();
    if w.is_empty() || w.iter().any(|&x| !(x >= 0.0)) || !(t > 0.0) {
        return Err(Error::invalid(MODULE, "level weights must be non-negative with positive sum"));
    }
    Ok(w.iter().map(|x| x / t).collect())
}

/// Exogenous process realising `model`.
pub fn predecessor_exo(model: &PredecessorModel, pred: &VehicleParams) -> Result<ExoProcess> {
    match model {
        PredecessorModel::Lag { u_values, u_probs, initial } => {
            let p = *pred;
            ExoProcess::driven(
                FnDriver::new(1, vec![ExoInput::PreviousW, ExoInput::Innovation], move |w, _, _, e| {
                    vec![predecessor_acc_step(w[0], e[0], &p)]
                }),
                ExoProcess::Iid(Distribution::discrete_scalar(u_values, u_probs)?),
                Distribution::constant(vec![*initial]),
            )
        }
        PredecessorModel::Levels { levels, weights, resample_prob } => {
            if levels.len() != weights.len() || !(0.0..=1.0).contains(resample_prob) {
                return Err(Error::invalid(MODULE, "levels/weights mismatch or resample_prob outside [0,1]"));
            }
            let w = normalised(weights)?;
            let mut outcomes = vec![0.0];
            let mut probs = vec![1.0 - resample_prob];
            for (j, wj) in w.iter().enumerate() {
                outcomes.push((j + 1) as f64);
                probs.push(resample_prob * wj);
            }
            let lv = levels.clone();
            ExoProcess::driven(
                FnDriver::new(1, vec![ExoInput::PreviousW, ExoInput::Innovation], move |w, _, _, e| {
                    let j = e[0] as usize;
                    vec![if j == 0 { w[0] } else { lv[j - 1] }]
                }),
                ExoProcess::Iid(Distribution::discrete_scalar(&outcomes, &probs)?),
                Distribution::discrete_scalar(levels, &w)?,
            )
        }
        PredecessorModel::Trace { acc } => Ok(ExoProcess::Trace(acc.iter().map(|&a| vec![a]).collect())),
        PredecessorModel::Constant { acc } => Ok(ExoProcess::Iid(Distribution::constant(vec![*acc]))),
    }
}

/// Default `p(S_0)`: `e_p ~ U[-2,2]`, `e_v ~ U[-1,1]`, `acc = 0`.
pub fn default_initial_state() -> Distribution {
    Distribution::Uniform {
        lo: vec![-2.0, -1.0, 0.0],
        hi: vec![2.0, 1.0, 0.0],
    }
}

/// State `[e_p, e_v, acc]`, action `[u]` in `±u_max`, `W_k = [acc_pred_k]`.
pub fn following_spec(
    params: &VehicleParams,
    weights: &RewardWeights,
    exo: ExoProcess,
    gamma: f64,
    horizon: Horizon,
) -> Result<SsdpSpec> {
    params.validate()?;
    weights.validate()?;
    if exo.w_dim() != 1 {
        return Err(Error::invalid(MODULE, "predecessor process must be scalar"));
    }
    let (p, w) = (*params, *weights);
    let dynamics = FnDynamics::new(move |s, a, acc_pred| {
        let x = VehicleState::from_slice(s);
        let (next, _) = dynamics_step(x, a[0], acc_pred[0], &p);
        (next.to_vec(), reward(&x, a[0], &p, &w))
    });
    SsdpSpec::new("vehicle-following", 3, 1, dynamics, exo, gamma, horizon)?
        .with_action_bounds(vec![(-params.u_max, params.u_max)])?
        .with_init(default_initial_state())
}
