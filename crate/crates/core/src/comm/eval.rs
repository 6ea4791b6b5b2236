//! The joint communication objective and ranking of fixed decisions.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::NetworkConfig;
use super::policy::{CommDecision, CommPolicy};
use super::sim::{full_information_returns, simulate_coupled, ControlSide, CoupledConfig, IntervalRecord};
use super::MODULE;
use crate::error::{Error, Result};
use crate::rng::{derive_seed, with_pool};
use crate::voi::t_interval;

/// `κ1 Σ_k γ^k Σ_t γ^t Σ_m C + κ2 Σ_l EVoI_l`.
pub fn objective_jcm(log: &[IntervalRecord], evoi_per_link: &[f64], cfg: &NetworkConfig) -> f64 {
    let mut disc = 1.0;
    let mut thr = 0.0;
    for iv in log {
        thr += disc * iv.throughput;
        disc *= cfg.gamma_cm;
    }
    cfg.kappa1 * thr + cfg.kappa2 * evoi_per_link.iter().sum::<f64>()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    /// 95% Student-t interval; absent with fewer than two episodes.
    pub ci: Option<(f64, f64)>,
}

impl Estimate {
    fn from_samples(xs: &[f64]) -> Self {
        if xs.len() < 2 {
            return Estimate {
                mean: xs.first().copied().unwrap_or(f64::NAN),
                ci: None,
            };
        }
        match t_interval(xs) {
            Ok((mean, _, lo, hi)) => Estimate { mean, ci: Some((lo, hi)) },
            Err(_) => Estimate { mean: f64::NAN, ci: None },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionScore {
    pub decision: CommDecision,
    pub name: String,
    pub jcm: Estimate,
    pub throughput: Estimate,
    /// Sum over links of `J_inf − J_sup`.
    pub evoi: Estimate,
}

/// The vehicle side and traces shared by every candidate.
#[derive(Clone)]
pub struct DecisionSetup {
    pub traces: Vec<Arc<Vec<f64>>>,
    pub control: ControlSide,
    pub config: CoupledConfig,
}

/// Scores each candidate over `n_episodes` paired episodes and returns them
/// best first. Ties keep the candidate order.
pub fn static_decision_eval(
    candidates: &[CommDecision],
    setup: &DecisionSetup,
    n_episodes: usize,
    seed: u64,
) -> Result<Vec<DecisionScore>> {
    if candidates.is_empty() || n_episodes == 0 {
        return Err(Error::invalid(MODULE, "need at least one candidate and one episode"));
    }
    let net = &setup.config.network;
    let per_episode: Vec<Result<Vec<(f64, f64)>>> = with_pool(|| {
        (0..n_episodes)
            .into_par_iter()
            .map(|e| {
                let s = derive_seed(seed, 0, e as u64);
                let sup = full_information_returns(&setup.traces, &setup.control, setup.config.horizon, s)?;
                candidates
                    .iter()
                    .map(|c| {
                        let run = simulate_coupled(&setup.traces, &setup.control, c, &setup.config, s)?;
                        let evoi: f64 = run.summary.control_return.iter().zip(&sup).map(|(i, s)| i - s).sum();
                        Ok((run.summary.discounted_throughput, evoi))
                    })
                    .collect()
            })
            .collect()
    });
    let per_episode: Vec<Vec<(f64, f64)>> = per_episode.into_iter().collect::<Result<_>>()?;
    let mut scores: Vec<DecisionScore> = candidates
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let thr: Vec<f64> = per_episode.iter().map(|e| e[i].0).collect();
            let evoi: Vec<f64> = per_episode.iter().map(|e| e[i].1).collect();
            let jcm: Vec<f64> = thr.iter().zip(&evoi).map(|(t, v)| net.kappa1 * t + net.kappa2 * v).collect();
            DecisionScore {
                decision: *c,
                name: c.name(),
                jcm: Estimate::from_samples(&jcm),
                throughput: Estimate::from_samples(&thr),
                evoi: Estimate::from_samples(&evoi),
            }
        })
        .collect();
    scores.sort_by(|a, b| b.jcm.mean.total_cmp(&a.jcm.mean));
    Ok(scores)
}
