//! The communication decision problems as SSDPs.
//!
//! Both kinds draw fading from uniforms carried in `W`, so the large-scale
//! gains are fixed when the spec is built.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::channel::{ChannelState, LargeScale};
use super::config::{Geometry, NetworkConfig};
use super::ivoi::CommIvoi;
use super::link::{rates, CommAction, CamQueue, queue_step};
use super::policy::{predecessor_inputs, CommSignal};
use super::reward::{comm_reward_how, comm_reward_when};
use super::MODULE;
use crate::error::{Error, Result};
use crate::rng::rng_from_seed;
use crate::ssdp::{Distribution, ExoProcess, FnDynamics, Horizon, InitialState, SsdpSpec};
use crate::vehicle::VehicleParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CommSsdpKind {
    /// One step per control interval; action `φ` per link.
    When,
    /// One step per communication interval; action `(θ, P^V)` per link.
    How,
}

/// The parts of the vehicle layer the communication problem sees.
#[derive(Debug, Clone)]
pub struct CommEnvHandles {
    /// Predecessor acceleration trace per V2V link.
    pub traces: Vec<Arc<Vec<f64>>>,
    pub pred: VehicleParams,
    pub geometry: Geometry,
    /// Seed of the large-scale draw fixed into the spec.
    pub large_scale_seed: u64,
    /// Signal placed in the state.
    pub signal: CommSignal,
    /// Past predecessor signals kept in the how-kind state.
    pub history: usize,
}

impl CommEnvHandles {
    pub fn new(traces: Vec<Arc<Vec<f64>>>, pred: VehicleParams, geometry: Geometry) -> Self {
        CommEnvHandles {
            traces,
            pred,
            geometry,
            large_scale_seed: 0,
            signal: CommSignal::default(),
            history: 1,
        }
    }

    fn signals(&self) -> Vec<Vec<f64>> {
        self.traces
            .iter()
            .map(|t| match self.signal {
                CommSignal::Acceleration => t.to_vec(),
                CommSignal::Input => predecessor_inputs(t, &self.pred),
            })
            .collect()
    }
}

/// State layout of a built communication SSDP.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CommLayout {
    pub kind: CommSsdpKind,
    pub n_gain: usize,
    pub links: usize,
    pub history: usize,
}

impl CommLayout {
    pub fn state_dim(&self) -> usize {
        match self.kind {
            CommSsdpKind::When => self.n_gain + self.links,
            CommSsdpKind::How => self.n_gain + self.links + self.history * self.links + 1,
        }
    }

    pub fn slot_index(&self) -> Option<usize> {
        match self.kind {
            CommSsdpKind::When => None,
            CommSsdpKind::How => Some(self.state_dim() - 1),
        }
    }
}

fn how_action(a: &[f64], cfg: &NetworkConfig) -> CommAction {
    let theta = (0..cfg.l)
        .map(|l| {
            let c = a[2 * l].round();
            if c < 0.0 {
                None
            } else {
                Some((c as usize).min(cfg.m - 1))
            }
        })
        .collect();
    let power = (0..cfg.l).map(|l| a[2 * l + 1].clamp(0.0, cfg.p_v_max)).collect();
    CommAction { theta, power }
}

fn sum_ivoi(ivoi: &dyn CommIvoi, acc: &[f64], delivered: &[bool]) -> Result<Vec<f64>> {
    acc.iter().zip(delivered).enumerate().map(|(l, (&a, &d))| ivoi.ivoi_next(l, a, d)).collect()
}

/// Builds the when- or how-kind communication SSDP over the given traces.
pub fn build_comm_ssdp(
    kind: CommSsdpKind,
    env: &CommEnvHandles,
    ivoi: Option<Arc<dyn CommIvoi>>,
    cfg: &NetworkConfig,
) -> Result<(SsdpSpec, CommLayout)> {
    let ivoi = ivoi.ok_or_else(|| Error::invalid(MODULE, "an IVoI evaluator is required to build the communication SSDP"))?;
    cfg.validate()?;
    env.geometry.validate(cfg.m, cfg.l)?;
    if env.traces.len() != cfg.l {
        return Err(Error::invalid(MODULE, format!("{} traces for {} V2V links", env.traces.len(), cfg.l)));
    }
    let k_len = env.traces.iter().map(|t| t.len()).min().unwrap_or(0);
    if k_len < 2 {
        return Err(Error::invalid(MODULE, "predecessor traces need at least two samples"));
    }
    let horizon_k = k_len - 1;
    let ls = Arc::new(LargeScale::sample(&env.geometry, cfg, &mut rng_from_seed(env.large_scale_seed))?);
    let n_gain = ChannelState::n_fields(cfg.m, cfg.l);
    let layout = CommLayout {
        kind,
        n_gain,
        links: cfg.l,
        history: env.history.max(1),
    };
    let signals = env.signals();
    let l_n = cfg.l;
    let t_n = cfg.t_slots;
    let unif = Distribution::Uniform {
        lo: vec![0.0; t_n * n_gain],
        hi: vec![1.0; t_n * n_gain],
    };
    let c = cfg.clone();
    let ls_init = ls.clone();
    let c_init = cfg.clone();
    let spec = match kind {
        CommSsdpKind::When => {
            // W_k = [fading uniforms for slots 1..T and slot 0 of k+1, signal_{k+1}, acc_k].
            let trace: Vec<Vec<f64>> = (0..horizon_k)
                .map(|k| {
                    let mut row: Vec<f64> = signals.iter().map(|s| s[k + 1]).collect();
                    row.extend(env.traces.iter().map(|t| t[k]));
                    row
                })
                .collect();
            let exo = ExoProcess::Joint(vec![ExoProcess::Iid(unif.clone()), ExoProcess::Trace(trace)]);
            let dynamics = FnDynamics::new(move |s: &[f64], a: &[f64], w: &[f64]| {
                when_step(s, a, w, &c, &ls, ivoi.as_ref(), n_gain).unwrap_or_else(|_| (s.to_vec(), f64::NAN))
            });
            let s0: Vec<f64> = signals.iter().map(|s| s[0]).collect();
            let init = InitialState::mapped(
                Distribution::Uniform {
                    lo: vec![0.0; n_gain],
                    hi: vec![1.0; n_gain],
                }
                .into(),
                n_gain + l_n,
                move |u: &[f64]| {
                    let mut x = ls_init.slot_from_uniforms(&c_init, u)?.flatten();
                    x.extend(&s0);
                    Ok(x)
                },
            );
            SsdpSpec::new("comm-when", layout.state_dim(), l_n, dynamics, exo, cfg.gamma_cm, Horizon::Finite(horizon_k))?
                .with_init(init)?
                .with_action_bounds(vec![(0.0, 1.0); l_n])?
        }
        CommSsdpKind::How => {
            let h = layout.history;
            // W at slot n = kT + t: [fading uniforms for slot t+1, signal_{k+1}, acc_k].
            let slot_unif = Distribution::Uniform {
                lo: vec![0.0; n_gain],
                hi: vec![1.0; n_gain],
            };
            let mut trace = Vec::with_capacity(horizon_k * t_n);
            for k in 0..horizon_k {
                let mut row: Vec<f64> = signals.iter().map(|s| s[k + 1]).collect();
                row.extend(env.traces.iter().map(|t| t[k]));
                for _ in 0..t_n {
                    trace.push(row.clone());
                }
            }
            let exo = ExoProcess::Joint(vec![ExoProcess::Iid(slot_unif), ExoProcess::Trace(trace)]);
            let dynamics = FnDynamics::new(move |s: &[f64], a: &[f64], w: &[f64]| {
                how_step(s, a, w, &c, &ls, ivoi.as_ref(), n_gain, h).unwrap_or_else(|_| (s.to_vec(), f64::NAN))
            });
            let mut tail = vec![1.0; l_n];
            for _ in 0..h {
                tail.extend(signals.iter().map(|s| s[0]));
            }
            tail.push(0.0);
            let init = InitialState::mapped(
                Distribution::Uniform {
                    lo: vec![0.0; n_gain],
                    hi: vec![1.0; n_gain],
                }
                .into(),
                layout.state_dim(),
                move |u: &[f64]| {
                    let mut x = ls_init.slot_from_uniforms(&c_init, u)?.flatten();
                    x.extend(&tail);
                    Ok(x)
                },
            );
            let mut bounds = Vec::with_capacity(2 * l_n);
            for _ in 0..l_n {
                bounds.push((-1.0, (cfg.m - 1) as f64));
                bounds.push((0.0, cfg.p_v_max));
            }
            SsdpSpec::new("comm-how", layout.state_dim(), 2 * l_n, dynamics, exo, cfg.gamma_cm, Horizon::Finite(horizon_k * t_n))?
                .with_init(init)?
                .with_action_bounds(bounds)?
        }
    };
    Ok((spec, layout))
}

fn when_step(
    s: &[f64],
    a: &[f64],
    w: &[f64],
    cfg: &NetworkConfig,
    ls: &LargeScale,
    ivoi: &dyn CommIvoi,
    n_gain: usize,
) -> Result<(Vec<f64>, f64)> {
    let (l_n, t_n) = (cfg.l, cfg.t_slots);
    let phi: Vec<bool> = a.iter().take(l_n).map(|&x| x >= 0.5).collect();
    let action = CommAction::fixed(cfg);
    let uniforms = &w[..t_n * n_gain];
    let sig_next = &w[t_n * n_gain..t_n * n_gain + l_n];
    let acc_k = &w[t_n * n_gain + l_n..t_n * n_gain + 2 * l_n];
    let mut cs = ChannelState::unflatten(cfg.m, l_n, &s[..n_gain])?;
    let mut queues: Vec<CamQueue> = phi.iter().map(|&p| CamQueue { q: 0.0, phi: p, tau: 1 }).collect();
    for q in queues.iter_mut() {
        *q = queue_step(*q, 0.0, cfg, 0)?;
    }
    let mut v2i = Vec::with_capacity(t_n);
    for t in 0..t_n {
        let r = rates(&cs, &action, &phi, cfg)?;
        for (l, q) in queues.iter_mut().enumerate() {
            *q = queue_step(*q, r.cam[l], cfg, t + 1)?;
        }
        v2i.push(r.v2i);
        cs = ls.slot_from_uniforms(cfg, &uniforms[t * n_gain..(t + 1) * n_gain])?;
    }
    let delivered: Vec<bool> = queues.iter().map(|q| q.phi && q.q == 0.0).collect();
    let xi = sum_ivoi(ivoi, acc_k, &delivered)?;
    let r = comm_reward_when(&v2i, &xi, cfg);
    let mut next = cs.flatten();
    next.extend(sig_next);
    Ok((next, r))
}

#[allow(clippy::too_many_arguments)]
fn how_step(
    s: &[f64],
    a: &[f64],
    w: &[f64],
    cfg: &NetworkConfig,
    ls: &LargeScale,
    ivoi: &dyn CommIvoi,
    n_gain: usize,
    history: usize,
) -> Result<(Vec<f64>, f64)> {
    let l_n = cfg.l;
    let t = s[s.len() - 1].round() as usize;
    let cs = ChannelState::unflatten(cfg.m, l_n, &s[..n_gain])?;
    let action = how_action(a, cfg);
    let q0 = &s[n_gain..n_gain + l_n];
    let window = &s[n_gain + l_n..n_gain + l_n + history * l_n];
    // Every interval carries a CAM in this kind, so every assigned link interferes.
    let phi = vec![true; l_n];
    let r = rates(&cs, &action, &phi, cfg)?;
    let q1: Vec<f64> = q0
        .iter()
        .enumerate()
        .map(|(l, &q)| (q - r.cam[l] * cfg.dt).max(0.0))
        .collect();
    let sig_next = &w[n_gain..n_gain + l_n];
    let acc_k = &w[n_gain + l_n..n_gain + 2 * l_n];
    let last = t + 1 == cfg.t_slots;
    let xi = if last {
        let delivered: Vec<bool> = (0..l_n).map(|l| q1[l] == 0.0).collect();
        sum_ivoi(ivoi, acc_k, &delivered)?
    } else {
        Vec::new()
    };
    let reward = comm_reward_how(&r.v2i, t, &xi, cfg);
    let mut next = ls.slot_from_uniforms(cfg, &w[..n_gain])?.flatten();
    if last {
        next.extend(std::iter::repeat_n(1.0, l_n));
        next.extend(&window[l_n..]);
        next.extend(sig_next);
        next.push(0.0);
    } else {
        next.extend(&q1);
        next.extend(window);
        next.push((t + 1) as f64);
    }
    Ok((next, reward))
}
