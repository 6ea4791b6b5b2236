//! Consistency of EVoI with the occupancy-weighted sum of IVoI.

use rayon::prelude::*;

use super::utility::{t_interval, PolicyPair};
use crate::dp::{performance_difference, PolicyTable, TabularMdp};
use crate::error::{Error, Result};
use crate::nn::Environment;
use crate::rng::{derive_seed, rng_from_seed, with_pool};

pub const EXACT_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct Lemma2Report {
    pub evoi: f64,
    pub weighted_ivoi: f64,
    pub gap: f64,
    /// Standard error of the gap; zero on the exact path.
    pub std_err: f64,
    pub pass: bool,
}

/// Exact check on a tabular MDP: `J_inf − J_sup` against
/// `Σ_s d_inf(s) Σ_a π_inf(a|s) A_sup(s, a)`.
pub fn lemma2_check(mdp: &TabularMdp, pi_inf: &PolicyTable, pi_sup: &PolicyTable) -> Result<Lemma2Report> {
    let (evoi, weighted) = performance_difference(mdp, pi_inf, pi_sup)?;
    let gap = (evoi - weighted).abs();
    Ok(Lemma2Report {
        evoi,
        weighted_ivoi: weighted,
        gap,
        std_err: 0.0,
        pass: gap <= EXACT_TOL,
    })
}

/// Monte-Carlo check: per paired episode, the return difference against
/// the discounted IVoI sum along the inferior trajectory. Passes when the
/// mean gap is within two standard errors of zero.
pub fn lemma2_montecarlo<E: Environment>(env: &E, pair: &PolicyPair, n_episodes: usize, max_len: usize, seed: u64) -> Result<Lemma2Report> {
    if n_episodes < 2 {
        return Err(Error::invalid("voi", "Monte-Carlo Lemma 2 check needs n_episodes >= 2"));
    }
    let critic = pair
        .critic_sup
        .ok_or_else(|| Error::unsupported("voi", "Lemma 2 check needs an advantage source for the superior policy"))?;
    let rows: Vec<(f64, f64)> = with_pool(|| {
        (0..n_episodes)
            .into_par_iter()
            .map(|e| {
                let s = derive_seed(seed, 0, e as u64);
                let gamma = env.gamma();
                let mut inf_env = env.clone();
                let mut rng = rng_from_seed(s);
                inf_env.reset(&mut rng)?;
                let (mut r_inf, mut xi_sum, mut disc) = (0.0, 0.0, 1.0);
                for _ in 0..max_len {
                    let a = pair.inf_action(&inf_env);
                    xi_sum += disc * critic.advantage(&inf_env.observation(), &a)?;
                    let st = inf_env.step(&a, &mut rng)?;
                    r_inf += disc * st.reward;
                    disc *= gamma;
                    if st.done {
                        break;
                    }
                }
                let mut sup_env = env.clone();
                let mut rng = rng_from_seed(s);
                sup_env.reset(&mut rng)?;
                let (mut r_sup, mut disc) = (0.0, 1.0);
                for _ in 0..max_len {
                    let a = pair.sup_action(&sup_env);
                    let st = sup_env.step(&a, &mut rng)?;
                    r_sup += disc * st.reward;
                    disc *= gamma;
                    if st.done {
                        break;
                    }
                }
                Ok((r_inf - r_sup, xi_sum))
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let n = rows.len() as f64;
    let evoi = rows.iter().map(|r| r.0).sum::<f64>() / n;
    let weighted = rows.iter().map(|r| r.1).sum::<f64>() / n;
    let diffs: Vec<f64> = rows.iter().map(|r| r.0 - r.1).collect();
    let (mean, se, _, _) = t_interval(&diffs)?;
    Ok(Lemma2Report {
        evoi,
        weighted_ivoi: weighted,
        gap: mean.abs(),
        std_err: se,
        pass: mean.abs() <= 2.0 * se,
    })
}
