//! Communication rewards and the joint objective.

use super::config::{HowVoiWeight, NetworkConfig};

/// `κ1 Σ_t γ^t Σ_m C_(k,t) + κ2 Σ ξ_{k+1}`; `v2i_rates[t][m]`.
pub fn comm_reward_when(v2i_rates: &[Vec<f64>], ivoi_next: &[f64], cfg: &NetworkConfig) -> f64 {
    let mut thr = 0.0;
    let mut disc = 1.0;
    for slot in v2i_rates {
        thr += disc * slot.iter().sum::<f64>();
        disc *= cfg.gamma_cm;
    }
    cfg.kappa1 * thr + cfg.kappa2 * ivoi_next.iter().sum::<f64>()
}

/// Per-slot reward: throughput, and at the last slot the VoI term.
pub fn comm_reward_how(v2i_rates_t: &[f64], t: usize, ivoi_next: &[f64], cfg: &NetworkConfig) -> f64 {
    let thr = cfg.kappa1 * v2i_rates_t.iter().sum::<f64>();
    if t + 1 == cfg.t_slots {
        let w = match cfg.how_voi_weight {
            HowVoiWeight::Compensated => cfg.gamma_cm.powi(1 - cfg.t_slots as i32),
            HowVoiWeight::Literal => 1.0,
        };
        thr + w * cfg.kappa2 * ivoi_next.iter().sum::<f64>()
    } else {
        thr
    }
}

/// `Σ_t γ^t r_(k,t)` over one control interval.
pub fn discounted_slot_sum(how: &[f64], gamma: f64) -> f64 {
    let mut s = 0.0;
    let mut d = 1.0;
    for r in how {
        s += d * r;
        d *= gamma;
    }
    s
}
