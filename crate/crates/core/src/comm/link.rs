//! SINR, rates, CAM queue and observation delay.

use super::channel::ChannelState;
use super::config::NetworkConfig;
use super::MODULE;
use crate::error::{check_dim, Error, Result};

/// Sub-channel choice and power for each V2V link.
#[derive(Debug, Clone, PartialEq)]
pub struct CommAction {
    /// `theta[l] = Some(m)` when link `l` occupies sub-channel `m`.
    pub theta: Vec<Option<usize>>,
    /// Transmit power of link `l` on its sub-channel (W).
    pub power: Vec<f64>,
}

impl CommAction {
    /// Link `l` on sub-channel `l mod M` at full power.
    pub fn fixed(cfg: &NetworkConfig) -> Self {
        CommAction {
            theta: (0..cfg.l).map(|l| Some(l % cfg.m)).collect(),
            power: vec![cfg.p_v_max; cfg.l],
        }
    }

    pub fn silent(cfg: &NetworkConfig) -> Self {
        CommAction {
            theta: vec![None; cfg.l],
            power: vec![0.0; cfg.l],
        }
    }

    pub fn validate(&self, cfg: &NetworkConfig) -> Result<()> {
        check_dim(MODULE, "sub-channel indicators", cfg.l, self.theta.len())?;
        check_dim(MODULE, "V2V powers", cfg.l, self.power.len())?;
        if self.theta.iter().flatten().any(|&m| m >= cfg.m) {
            return Err(Error::invalid(MODULE, "sub-channel index out of range"));
        }
        if self.power.iter().any(|&p| !(0.0..=cfg.p_v_max).contains(&p)) {
            return Err(Error::invalid(MODULE, "V2V power outside [0, P_V_max]"));
        }
        Ok(())
    }

    fn on(&self, l: usize, m: usize) -> bool {
        self.theta[l] == Some(m)
    }
}

pub fn sinr_v2i(cs: &ChannelState, action: &CommAction, phi: &[bool], cfg: &NetworkConfig, m: usize) -> f64 {
    let mut interference = 0.0;
    for l in 0..action.theta.len() {
        if phi[l] && action.on(l, m) {
            interference += action.power[l] * cs.v2v_to_bs[l][m];
        }
    }
    cfg.p_i * cs.v2i[m] / (cfg.sigma2 + interference)
}

/// SINR of V2V link `l` on sub-channel `m`. Interference from another link
/// `j` counts when `j` itself transmits.
pub fn sinr_v2v(cs: &ChannelState, action: &CommAction, phi: &[bool], cfg: &NetworkConfig, l: usize, m: usize) -> Result<f64> {
    if !action.on(l, m) {
        return Err(Error::contract(MODULE, format!("V2V link {l} does not occupy sub-channel {m}")));
    }
    let mut interference = cfg.p_i * cs.v2i_to_v2v[m][l];
    for j in 0..action.theta.len() {
        if j != l && phi[j] && action.on(j, m) {
            interference += action.power[j] * cs.v2v_cross[j][l][m];
        }
    }
    Ok(action.power[l] * cs.v2v[l][m] / (cfg.sigma2 + interference))
}

pub fn shannon(bandwidth: f64, sinr: f64) -> f64 {
    bandwidth * (1.0 + sinr).log2()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rates {
    pub v2i: Vec<f64>,
    pub v2v: Vec<f64>,
    /// CAMs per second.
    pub cam: Vec<f64>,
    pub sinr_v2i: Vec<f64>,
    /// SINR on the occupied sub-channel; NaN when the link is idle.
    pub sinr_v2v: Vec<f64>,
}

pub fn rates(cs: &ChannelState, action: &CommAction, phi: &[bool], cfg: &NetworkConfig) -> Result<Rates> {
    action.validate(cfg)?;
    check_dim(MODULE, "transmission indicators", cfg.l, phi.len())?;
    let sinr_i: Vec<f64> = (0..cfg.m).map(|m| sinr_v2i(cs, action, phi, cfg, m)).collect();
    let mut sinr_v = vec![f64::NAN; cfg.l];
    let mut v2v = vec![0.0; cfg.l];
    for l in 0..cfg.l {
        if let Some(m) = action.theta[l] {
            let g = sinr_v2v(cs, action, phi, cfg, l, m)?;
            sinr_v[l] = g;
            v2v[l] = shannon(cfg.bandwidth, g);
        }
    }
    Ok(Rates {
        v2i: sinr_i.iter().map(|&g| shannon(cfg.bandwidth, g)).collect(),
        cam: v2v.iter().map(|c| c / cfg.cam_bits).collect(),
        v2v,
        sinr_v2i: sinr_i,
        sinr_v2v: sinr_v,
    })
}

/// Per-link CAM buffer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CamQueue {
    /// Fraction of the current CAM still to send.
    pub q: f64,
    /// Whether this control interval's CAM is transmitted.
    pub phi: bool,
    /// Observation delay in control intervals.
    pub tau: usize,
}

impl Default for CamQueue {
    fn default() -> Self {
        CamQueue {
            q: 0.0,
            phi: false,
            tau: 1,
        }
    }
}

/// Queue length at slot `t` of the current control interval, from the
/// length and CAM rate at slot `t − 1`. Slot 0 loads the new CAM when
/// `phi` is set; `t = T` is the end-of-interval length.
pub fn queue_step(cq: CamQueue, cam_rate: f64, cfg: &NetworkConfig, t: usize) -> Result<CamQueue> {
    if t > cfg.t_slots {
        return Err(Error::invalid(MODULE, format!("slot {t} beyond T = {}", cfg.t_slots)));
    }
    let q = if t == 0 {
        if cq.phi {
            1.0
        } else {
            0.0
        }
    } else {
        (cq.q - cam_rate * cfg.dt).max(0.0)
    };
    Ok(CamQueue { q, ..cq })
}

/// Delay at the next control interval from the end-of-interval queue. A
/// reset needs a delivered CAM, so an interval without transmission counts
/// as a miss even though its queue is empty.
pub fn delay_step(cq: &CamQueue) -> usize {
    if cq.phi && cq.q == 0.0 {
        1
    } else {
        cq.tau + 1
    }
}
