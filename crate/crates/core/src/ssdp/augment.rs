//! State augmentations: folding `W_k`, its predictor `W̃_k`, or a delayed
//! snapshot plus action history into the state.
//!
//! Every transform returns an ordinary [`SsdpSpec`] whose exogenous process
//! is the base process's innovation stream, so augmented specs can be rolled
//! out and discretised like any other spec.

use std::sync::Arc;

use super::{
    Distribution, Dynamics, ExoDriver, ExoInput, ExoProcess, InitialState, SsdpSpec,
};
use crate::error::{Error, Result};

const MODULE: &str = "ssdp";

/// How the delay `τ_{k+1}` is produced in a random-delay augmentation.
#[derive(Debug, Clone)]
pub enum DelayProcess {
    /// A one-dimensional exogenous process emitting candidate delays in
    /// `[1, tau_max]`; the realised delay is `min(candidate, τ_k + 1)`.
    Exogenous(ExoProcess),
    /// Delivery law: with probability `success_prob` the newest sample
    /// arrives (`τ' = 1`), otherwise `τ' = τ + 1` saturated at `tau_max`.
    Delivery { success_prob: f64 },
}

impl DelayProcess {
    pub fn constant(tau: usize) -> Self {
        DelayProcess::Exogenous(ExoProcess::Iid(Distribution::Constant(vec![tau as f64])))
    }
}

#[derive(Debug, Clone)]
pub enum AugmentationKind {
    WithW,
    WithPredictor { predictor_dim: usize },
    RandomDelay { tau_max: usize, delay: DelayProcess },
}

#[derive(Debug, Clone)]
pub struct AugmentedSpec {
    pub base: SsdpSpec,
    pub kind: AugmentationKind,
    pub spec: SsdpSpec,
}

impl AugmentedSpec {
    pub fn augmented_state_dim(&self) -> usize {
        self.spec.state_dim()
    }
}

enum ExoMode {
    /// `W_k` is a direct draw of the exogenous stream.
    Direct,
    /// `W_k = f^W(W_{k-1}, S_k, ζ_k)`.
    Driven(Arc<dyn ExoDriver>),
}

impl ExoMode {
    fn next_w(&self, prev_w: &[f64], s: &[f64], a_dim: usize, e: &[f64]) -> Vec<f64> {
        match self {
            ExoMode::Direct => e.to_vec(),
            ExoMode::Driven(d) => d.next(prev_w, s, &vec![0.0; a_dim], e),
        }
    }
}

fn reject_action_input(d: &dyn ExoDriver, what: &str) -> Result<()> {
    if d.inputs().contains(&ExoInput::Action) {
        Err(Error::unsupported(
            MODULE,
            format!("{what}: driver reads a_k, which is not yet chosen when the augmented state is formed"),
        ))
    } else {
        Ok(())
    }
}

struct WithWDynamics {
    base: SsdpSpec,
    mode: ExoMode,
}

impl Dynamics for WithWDynamics {
    fn step(&self, x: &[f64], a: &[f64], e: &[f64]) -> Result<(Vec<f64>, f64)> {
        let n = self.base.state_dim();
        let (s, w) = x.split_at(n);
        let (s_next, r) = self.base.step(s, a, w)?;
        let w_next = self.mode.next_w(w, &s_next, self.base.action_dim(), e);
        let mut out = s_next;
        out.extend(w_next);
        Ok((out, r))
    }
}

/// State `(S_k, W_k)`; `r(S̃_k, a_k) = r(S_k, a_k, W_k)`.
pub fn augment_with_exogenous(spec: &SsdpSpec) -> Result<AugmentedSpec> {
    let n = spec.state_dim();
    let m = spec.w_dim();
    let a_dim = spec.action_dim();
    let (mode, exo, w0_init) = match spec.exo() {
        ExoProcess::Driven(d) => {
            reject_action_input(d.driver.as_ref(), "exogenous augmentation")?;
            let driver = d.driver.clone();
            let first = d.innovation.first_draw()?;
            let base = InitialState::Product(vec![
                spec.init().clone(),
                InitialState::Dist(d.initial.clone()),
                InitialState::Dist(first),
            ]);
            let drv = driver.clone();
            let init = InitialState::mapped(base, n + m, move |x| {
                let (s, rest) = x.split_at(n);
                let (w_prev, e) = rest.split_at(m);
                let mut out = s.to_vec();
                out.extend(drv.next(w_prev, s, &vec![0.0; a_dim], e));
                Ok(out)
            });
            (ExoMode::Driven(driver), d.innovation.tail(), init)
        }
        other => {
            let first = other.first_draw()?;
            let init = InitialState::Product(vec![spec.init().clone(), InitialState::Dist(first)]);
            (ExoMode::Direct, other.tail(), init)
        }
    };
    let dynamics = WithWDynamics {
        base: spec.clone(),
        mode,
    };
    let aug = SsdpSpec::new(
        format!("{}+W", spec.name()),
        n + m,
        a_dim,
        dynamics,
        exo,
        spec.gamma(),
        spec.horizon(),
    )?
    .with_action_bounds(spec.action_bounds().to_vec())?
    .with_init(w0_init)?;
    Ok(AugmentedSpec {
        base: spec.clone(),
        kind: AugmentationKind::WithW,
        spec: aug,
    })
}

struct PredictorDynamics {
    base: SsdpSpec,
    driver: Arc<dyn ExoDriver>,
    w_dim: usize,
}

impl Dynamics for PredictorDynamics {
    fn step(&self, x: &[f64], a: &[f64], e_next: &[f64]) -> Result<(Vec<f64>, f64)> {
        let n = self.base.state_dim();
        let (s, rest) = x.split_at(n);
        let (w_prev, e) = rest.split_at(self.w_dim);
        let w = self.driver.next(w_prev, s, a, e);
        let (s_next, r) = self.base.step(s, a, &w)?;
        let mut out = s_next;
        out.extend(w);
        out.extend_from_slice(e_next);
        Ok((out, r))
    }
}

/// State `(S_k, W̃_k)` with `W̃_k = (W_{k-1}, ζ_k)`; the reward is
/// `r(S_k, a_k, f^W(W̃_k))`.
///
/// `predictor_dim` must be 0 (identity transform) or `w_dim + innovation
/// dim` of the driven process.
pub fn augment_with_predictor(spec: &SsdpSpec, predictor_dim: usize) -> Result<AugmentedSpec> {
    let ExoProcess::Driven(d) = spec.exo() else {
        return Err(Error::unsupported(
            MODULE,
            "predictor augmentation needs a driven exogenous process; iid or trace information has no predictor",
        ));
    };
    if predictor_dim == 0 {
        return Ok(AugmentedSpec {
            base: spec.clone(),
            kind: AugmentationKind::WithPredictor { predictor_dim },
            spec: spec.clone(),
        });
    }
    let m = d.driver.w_dim();
    let p = d.innovation.w_dim();
    if predictor_dim != m + p {
        return Err(Error::invalid(
            MODULE,
            format!("predictor_dim {predictor_dim} must equal w_dim + innovation dim = {}", m + p),
        ));
    }
    let n = spec.state_dim();
    let init = InitialState::Product(vec![
        spec.init().clone(),
        InitialState::Dist(d.initial.clone()),
        InitialState::Dist(d.innovation.first_draw()?),
    ]);
    let dynamics = PredictorDynamics {
        base: spec.clone(),
        driver: d.driver.clone(),
        w_dim: m,
    };
    let aug = SsdpSpec::new(
        format!("{}+Wtilde", spec.name()),
        n + predictor_dim,
        spec.action_dim(),
        dynamics,
        d.innovation.tail(),
        spec.gamma(),
        spec.horizon(),
    )?
    .with_action_bounds(spec.action_bounds().to_vec())?
    .with_init(init)?;
    Ok(AugmentedSpec {
        base: spec.clone(),
        kind: AugmentationKind::WithPredictor { predictor_dim },
        spec: aug,
    })
}

enum DelayMode {
    Candidate,
    Delivery(f64),
}

struct DelayDynamics {
    base: SsdpSpec,
    mode: ExoMode,
    tau_max: usize,
    innovation_dim: usize,
    delay: DelayMode,
}

impl DelayDynamics {
    fn next_tau(&self, tau: usize, draw: f64) -> Result<usize> {
        match self.delay {
            DelayMode::Candidate => {
                let c = draw.round();
                if (draw - c).abs() > 1e-9 || c < 1.0 || c > self.tau_max as f64 {
                    return Err(Error::contract(
                        MODULE,
                        format!("delay process emitted {draw}, outside the integers 1..={}", self.tau_max),
                    ));
                }
                Ok((c as usize).min(tau + 1))
            }
            DelayMode::Delivery(p) => Ok(if draw < p { 1 } else { (tau + 1).min(self.tau_max) }),
        }
    }
}

impl Dynamics for DelayDynamics {
    fn step(&self, x: &[f64], a: &[f64], e: &[f64]) -> Result<(Vec<f64>, f64)> {
        let n = self.base.state_dim();
        let m = self.base.w_dim();
        let ad = self.base.action_dim();
        let tm = self.tau_max;
        let p = self.innovation_dim;
        let s_snap = &x[..n];
        let w_snap = &x[n..n + m];
        let hist = &x[n + m..n + m + tm * ad];
        let tau_raw = x[n + m + tm * ad];
        let tau = tau_raw.round() as usize;
        if (tau_raw - tau as f64).abs() > 1e-9 || tau < 1 || tau > tm {
            return Err(Error::contract(MODULE, format!("delay state {tau_raw} outside 1..={tm}")));
        }
        // Replay the stored actions from the snapshot to recover S_k, W_k.
        let mut traj_s = vec![s_snap.to_vec()];
        let mut traj_w = vec![w_snap.to_vec()];
        for i in 0..tau {
            let act = &hist[(tm - tau + i) * ad..(tm - tau + i + 1) * ad];
            let (s_next, _) = self.base.step(&traj_s[i], act, &traj_w[i])?;
            let w_next = self.mode.next_w(&traj_w[i], &s_next, ad, &e[i * p..(i + 1) * p]);
            traj_s.push(s_next);
            traj_w.push(w_next);
        }
        let (_, r) = self.base.step(&traj_s[tau], a, &traj_w[tau])?;
        let tau_next = self.next_tau(tau, e[tm * p])?;
        let idx = tau + 1 - tau_next;
        let mut out = traj_s.swap_remove(idx);
        out.extend_from_slice(&traj_w[idx]);
        out.extend_from_slice(&hist[ad..]);
        out.extend_from_slice(a);
        out.push(tau_next as f64);
        Ok((out, r))
    }
}

/// State `(S_{k-τ_k}, W_{k-τ_k}, a_{k-τ_max}..a_{k-1}, τ_k)`.
///
/// The reward is evaluated on the true `S_k`, recovered by replaying the
/// stored actions from the snapshot. Episodes start with a pre-episode
/// snapshot drawn from the base initial law, zero action history and
/// `τ_0 = 1`.
pub fn augment_random_delay(
    spec: &SsdpSpec,
    tau_max: usize,
    delay_process: DelayProcess,
) -> Result<AugmentedSpec> {
    if tau_max == 0 {
        return Err(Error::invalid(MODULE, "tau_max must be >= 1"));
    }
    let (mode, innovation, w_init) = match spec.exo() {
        ExoProcess::Driven(d) => {
            reject_action_input(d.driver.as_ref(), "random-delay augmentation")?;
            let inn = d.innovation.as_iid().ok_or_else(|| {
                Error::unsupported(MODULE, "random-delay augmentation needs iid innovations")
            })?;
            (ExoMode::Driven(d.driver.clone()), inn, d.initial.clone())
        }
        other => {
            let inn = other.as_iid().ok_or_else(|| {
                Error::unsupported(MODULE, "random-delay augmentation of a trace-driven spec")
            })?;
            (ExoMode::Direct, inn.clone(), inn)
        }
    };
    let (delay_mode, delay_exo) = match &delay_process {
        DelayProcess::Exogenous(p) => {
            if p.w_dim() != 1 || matches!(p, ExoProcess::Driven(_)) {
                return Err(Error::invalid(MODULE, "delay process must be a scalar iid or trace process"));
            }
            p.validate()?;
            (DelayMode::Candidate, p.clone())
        }
        DelayProcess::Delivery { success_prob } => {
            if !(0.0..=1.0).contains(success_prob) {
                return Err(Error::invalid(MODULE, "delivery probability outside [0,1]"));
            }
            (
                DelayMode::Delivery(*success_prob),
                ExoProcess::Iid(Distribution::Uniform {
                    lo: vec![0.0],
                    hi: vec![1.0],
                }),
            )
        }
    };
    let n = spec.state_dim();
    let m = spec.w_dim();
    let ad = spec.action_dim();
    let p = innovation.dim();
    let window = Distribution::Product(vec![innovation; tau_max]);
    let exo = ExoProcess::Joint(vec![ExoProcess::Iid(window), delay_exo]);
    let init = InitialState::Product(vec![
        spec.init().clone(),
        InitialState::Dist(w_init),
        InitialState::Dist(Distribution::Constant(vec![0.0; tau_max * ad])),
        InitialState::Dist(Distribution::Constant(vec![1.0])),
    ]);
    let dynamics = DelayDynamics {
        base: spec.clone(),
        mode,
        tau_max,
        innovation_dim: p,
        delay: delay_mode,
    };
    let aug = SsdpSpec::new(
        format!("{}+delay{tau_max}", spec.name()),
        n + m + tau_max * ad + 1,
        ad,
        dynamics,
        exo,
        spec.gamma(),
        spec.horizon(),
    )?
    .with_action_bounds(spec.action_bounds().to_vec())?
    .with_init(init)?;
    Ok(AugmentedSpec {
        base: spec.clone(),
        kind: AugmentationKind::RandomDelay {
            tau_max,
            delay: delay_process,
        },
        spec: aug,
    })
}
