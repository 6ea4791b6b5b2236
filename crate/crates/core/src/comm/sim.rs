//! Coupled control and communication simulation.
//!
//! Each V2V link carries the CAM of one predecessor to one follower. The
//! CAM sampled in control interval `k` is available to the follower's
//! controller at `k + 1`; a follower without a fresh CAM sees the dummy
//! value in the predecessor slot.

use std::io::Write;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::channel::LargeScale;
use super::config::{Geometry, NetworkConfig};
use super::link::{delay_step, queue_step, rates, CamQueue, CommAction};
use super::policy::{predecessor_inputs, CommPolicy};
use super::reward::{comm_reward_how, comm_reward_when, discounted_slot_sum};
use super::MODULE;
use crate::error::{Error, Result};
use crate::nn::Environment;
use crate::rng::{derive_seed, rng_from_seed};
use crate::ssdp::Policy;
use crate::vehicle::{FollowingEnv, PredecessorSource, RewardWeights, VehicleParams};
use crate::voi::AdvantageSource;

/// Vehicle side of the coupled simulation.
#[derive(Clone)]
pub struct ControlSide {
    /// Acts on `[e_p, e_v, acc, acc_pred]` with the received predecessor value.
    pub policy: Arc<dyn Policy>,
    /// Superior advantage used for the per-step IVoI.
    pub critic: Arc<dyn AdvantageSource>,
    pub params: VehicleParams,
    pub weights: RewardWeights,
    pub gamma: f64,
    /// Value seen when no CAM arrived.
    pub dummy_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoupledConfig {
    pub network: NetworkConfig,
    pub geometry: Option<Geometry>,
    /// Control intervals per episode.
    pub horizon: usize,
}

impl Default for CoupledConfig {
    fn default() -> Self {
        CoupledConfig {
            network: NetworkConfig::default(),
            geometry: None,
            horizon: 500,
        }
    }
}

impl CoupledConfig {
    pub fn geometry(&self) -> Geometry {
        self.geometry
            .clone()
            .unwrap_or_else(|| Geometry::standard(self.network.m, self.network.l))
    }
}

/// One communication interval.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotRecord {
    pub k: usize,
    pub t: usize,
    pub sinr_v2i: Vec<f64>,
    pub rate_v2i: Vec<f64>,
    pub sinr_v2v: Vec<f64>,
    pub rate_v2v: Vec<f64>,
    /// Queue after this slot.
    pub q: Vec<f64>,
    pub phi: Vec<bool>,
    pub tau: Vec<usize>,
    pub reward_how: f64,
}

/// One control interval.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalRecord {
    pub k: usize,
    pub phi: Vec<bool>,
    pub delivered: Vec<bool>,
    /// Delay for the next interval.
    pub tau_next: Vec<usize>,
    pub acc_pred: Vec<f64>,
    /// Predecessor value the controller acted on at `k`.
    pub received: Vec<f64>,
    pub e_p: Vec<f64>,
    pub e_v: Vec<f64>,
    pub acc: Vec<f64>,
    pub u: Vec<f64>,
    pub control_reward: Vec<f64>,
    /// `ξ_k` per link.
    pub ivoi: Vec<f64>,
    /// `ξ_{k+1}` per link, the VoI term of this interval's rewards.
    pub ivoi_next: Vec<f64>,
    pub throughput: f64,
    pub reward_when: f64,
    pub reward_how_sum: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub policy: String,
    pub intervals: usize,
    /// `Σ_k γ^k Σ_t γ^t Σ_m C`.
    pub discounted_throughput: f64,
    pub mean_throughput: f64,
    pub throughput_term: f64,
    /// `κ2 Σ_k γ^k Σ_l ξ_{k+1}`.
    pub voi_term: f64,
    pub rms_e_p: f64,
    pub control_return: Vec<f64>,
    pub transmissions: usize,
    pub deliveries: usize,
    pub zero_acc_fraction: f64,
}

#[derive(Debug, Clone)]
pub struct CoupledRun {
    pub slots: Vec<SlotRecord>,
    pub intervals: Vec<IntervalRecord>,
    pub summary: RunSummary,
}

/// Runs one episode. Channel draws depend only on `seed` and `k`, and
/// follower initial states only on `seed` and the link, so two policies
/// run with the same seed see common random numbers.
pub fn simulate_coupled(
    traces: &[Arc<Vec<f64>>],
    control: &ControlSide,
    policy: &dyn CommPolicy,
    cfg: &CoupledConfig,
    seed: u64,
) -> Result<CoupledRun> {
    let net = &cfg.network;
    net.validate()?;
    let geo = cfg.geometry();
    geo.validate(net.m, net.l)?;
    if traces.len() != net.l {
        return Err(Error::invalid(MODULE, format!("{} traces for {} V2V links", traces.len(), net.l)));
    }
    let k_len = cfg.horizon;
    let mut envs = Vec::with_capacity(net.l);
    let mut inputs = Vec::with_capacity(net.l);
    for (l, tr) in traces.iter().enumerate() {
        let mut env = FollowingEnv::new(
            control.params,
            control.weights,
            PredecessorSource::Trace(tr.clone()),
            k_len,
            control.gamma,
        )?;
        env.reset(&mut rng_from_seed(derive_seed(seed, 2, l as u64)))?;
        envs.push(env);
        inputs.push(predecessor_inputs(tr, &control.params));
    }
    let action = CommAction::fixed(net);
    let mut queues = vec![CamQueue::default(); net.l];
    let mut received = vec![control.dummy_value; net.l];
    let mut slots = Vec::with_capacity(k_len * net.t_slots);
    let mut intervals = Vec::with_capacity(k_len);
    let mut xi_k = Vec::with_capacity(net.l);
    for (l, env) in envs.iter().enumerate() {
        xi_k.push(step_ivoi(env, control, received[l])?);
    }
    let mut step_rng = rng_from_seed(derive_seed(seed, 3, 0));
    for k in 0..k_len {
        let acc_k: Vec<f64> = envs.iter().map(|e| e.acc_pred()).collect();
        let phi: Vec<bool> = (0..net.l).map(|l| policy.transmit(l, acc_k[l], inputs[l][k])).collect();
        let mut ch_rng = rng_from_seed(derive_seed(seed, 1, k as u64));
        let ls = LargeScale::sample(&geo, net, &mut ch_rng)?;
        for (q, &p) in queues.iter_mut().zip(&phi) {
            q.phi = p;
            *q = queue_step(*q, 0.0, net, 0)?;
        }
        let mut v2i_slots = Vec::with_capacity(net.t_slots);
        let first_slot = slots.len();
        for t in 0..net.t_slots {
            let cs = ls.slot(net, &mut ch_rng);
            let r = rates(&cs, &action, &phi, net)?;
            for (l, q) in queues.iter_mut().enumerate() {
                *q = queue_step(*q, r.cam[l], net, t + 1)?;
            }
            slots.push(SlotRecord {
                k,
                t,
                sinr_v2i: r.sinr_v2i,
                rate_v2i: r.v2i.clone(),
                sinr_v2v: r.sinr_v2v,
                rate_v2v: r.v2v,
                q: queues.iter().map(|q| q.q).collect(),
                phi: phi.clone(),
                tau: queues.iter().map(|q| q.tau).collect(),
                reward_how: 0.0,
            });
            v2i_slots.push(r.v2i);
        }
        let delivered: Vec<bool> = queues.iter().map(|q| q.phi && q.q == 0.0).collect();
        let tau_next: Vec<usize> = queues.iter().map(delay_step).collect();

        // Control step k on the value received during k − 1.
        let mut rec_obs = Vec::with_capacity(net.l);
        let mut e_p = Vec::with_capacity(net.l);
        let mut e_v = Vec::with_capacity(net.l);
        let mut accs = Vec::with_capacity(net.l);
        let mut us = Vec::with_capacity(net.l);
        let mut ctrl_r = Vec::with_capacity(net.l);
        for (l, env) in envs.iter_mut().enumerate() {
            let x = env.state();
            e_p.push(x.e_p);
            e_v.push(x.e_v);
            accs.push(x.acc);
            let mut obs = env.observation();
            obs[3] = received[l];
            rec_obs.push(received[l]);
            let u = control.policy.act(&obs);
            us.push(u[0]);
            ctrl_r.push(env.step(&u, &mut step_rng)?.reward);
        }
        for l in 0..net.l {
            received[l] = if delivered[l] { acc_k[l] } else { control.dummy_value };
            queues[l].tau = tau_next[l];
        }
        let mut xi_next = Vec::with_capacity(net.l);
        for (l, env) in envs.iter().enumerate() {
            xi_next.push(step_ivoi(env, control, received[l])?);
        }
        let when = comm_reward_when(&v2i_slots, &xi_next, net);
        let how: Vec<f64> = v2i_slots.iter().enumerate().map(|(t, r)| comm_reward_how(r, t, &xi_next, net)).collect();
        for (rec, &h) in slots[first_slot..].iter_mut().zip(&how) {
            rec.reward_how = h;
        }
        intervals.push(IntervalRecord {
            k,
            phi,
            delivered,
            tau_next,
            acc_pred: acc_k,
            received: rec_obs,
            e_p,
            e_v,
            acc: accs,
            u: us,
            control_reward: ctrl_r,
            ivoi: std::mem::replace(&mut xi_k, xi_next.clone()),
            ivoi_next: xi_next,
            throughput: discounted_slot_sum(&v2i_slots.iter().map(|r| r.iter().sum()).collect::<Vec<f64>>(), net.gamma_cm),
            reward_when: when,
            reward_how_sum: discounted_slot_sum(&how, net.gamma_cm),
        });
    }
    let summary = summarize(&intervals, &slots, policy.name(), net, control.gamma);
    Ok(CoupledRun {
        slots,
        intervals,
        summary,
    })
}

fn step_ivoi(env: &FollowingEnv, control: &ControlSide, received: f64) -> Result<f64> {
    let truth = env.observation();
    let mut obs = truth.clone();
    obs[3] = received;
    let u = control.policy.act(&obs);
    control.critic.advantage(&truth, &u)
}

fn summarize(intervals: &[IntervalRecord], slots: &[SlotRecord], name: String, net: &NetworkConfig, control_gamma: f64) -> RunSummary {
    let mut disc = 1.0;
    let (mut thr, mut voi) = (0.0, 0.0);
    let links = net.l;
    let mut ret = vec![0.0; links];
    let mut cdisc = 1.0;
    let mut sq = 0.0;
    for iv in intervals {
        thr += disc * iv.throughput;
        voi += disc * iv.ivoi_next.iter().sum::<f64>();
        disc *= net.gamma_cm;
        for l in 0..links {
            ret[l] += cdisc * iv.control_reward[l];
            sq += iv.e_p[l] * iv.e_p[l];
        }
        cdisc *= control_gamma;
    }
    let n = intervals.len().max(1);
    let zero = intervals.iter().flat_map(|iv| &iv.acc_pred).filter(|a| a.abs() < 1e-12).count();
    RunSummary {
        policy: name,
        intervals: intervals.len(),
        discounted_throughput: thr,
        mean_throughput: slots.iter().map(|s| s.rate_v2i.iter().sum::<f64>()).sum::<f64>() / slots.len().max(1) as f64,
        throughput_term: net.kappa1 * thr,
        voi_term: net.kappa2 * voi,
        rms_e_p: (sq / (n * links) as f64).sqrt(),
        control_return: ret,
        transmissions: intervals.iter().flat_map(|iv| &iv.phi).filter(|&&p| p).count(),
        deliveries: intervals.iter().flat_map(|iv| &iv.delivered).filter(|&&d| d).count(),
        zero_acc_fraction: zero as f64 / (n * links) as f64,
    }
}

/// Slot log with columns `k, t`, then per link `sinr_v2i_m`, `rate_v2i_m`
/// for every V2I link and `sinr_v2v_l, rate_v2v_l, q_l, phi_l, tau_l` for
/// every V2V link, then `reward_how`, and on the last slot of a control
/// interval `reward_when` and `ivoi_next_l`.
pub fn write_run_csv(run: &CoupledRun, net: &NetworkConfig, w: impl Write) -> Result<()> {
    let (m, l) = (net.m, net.l);
    let mut wr = csv::Writer::from_writer(w);
    let mut header = vec!["k".to_string(), "t".to_string()];
    for i in 0..m {
        header.push(format!("sinr_v2i_{i}"));
        header.push(format!("rate_v2i_{i}"));
    }
    for j in 0..l {
        for c in ["sinr_v2v", "rate_v2v", "q", "phi", "tau"] {
            header.push(format!("{c}_{j}"));
        }
    }
    header.push("reward_how".into());
    header.push("reward_when".into());
    for j in 0..l {
        header.push(format!("ivoi_next_{j}"));
    }
    wr.write_record(&header)?;
    for s in &run.slots {
        let mut row = vec![s.k.to_string(), s.t.to_string()];
        for i in 0..m {
            row.push(s.sinr_v2i[i].to_string());
            row.push(s.rate_v2i[i].to_string());
        }
        for j in 0..l {
            row.push(s.sinr_v2v[j].to_string());
            row.push(s.rate_v2v[j].to_string());
            row.push(s.q[j].to_string());
            row.push(u8::from(s.phi[j]).to_string());
            row.push(s.tau[j].to_string());
        }
        row.push(s.reward_how.to_string());
        let iv = &run.intervals[s.k];
        if s.t + 1 == net.t_slots {
            row.push(iv.reward_when.to_string());
            row.extend(iv.ivoi_next.iter().map(|x| x.to_string()));
        } else {
            row.push(String::new());
            row.extend(std::iter::repeat_n(String::new(), l));
        }
        wr.write_record(&row)?;
    }
    wr.flush().map_err(|e| Error::io("run log", e))?;
    Ok(())
}

/// Returns under full information: every controller sees the true
/// predecessor value. Initial states match [`simulate_coupled`] for the
/// same seed.
pub fn full_information_returns(traces: &[Arc<Vec<f64>>], control: &ControlSide, horizon: usize, seed: u64) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(traces.len());
    let mut step_rng = rng_from_seed(derive_seed(seed, 3, 0));
    for (l, tr) in traces.iter().enumerate() {
        let mut env = FollowingEnv::new(
            control.params,
            control.weights,
            PredecessorSource::Trace(tr.clone()),
            horizon,
            control.gamma,
        )?;
        let mut obs = env.reset(&mut rng_from_seed(derive_seed(seed, 2, l as u64)))?;
        let mut ret = 0.0;
        let mut disc = 1.0;
        loop {
            let step = env.step(&control.policy.act(&obs), &mut step_rng)?;
            ret += disc * step.reward;
            disc *= control.gamma;
            obs = step.obs;
            if step.done {
                break;
            }
        }
        out.push(ret);
    }
    Ok(out)
}
