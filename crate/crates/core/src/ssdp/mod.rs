//! Sequential stochastic decision processes.
//!
//! An [`SsdpSpec`] is a pure step map `(S_k, a_k, W_k) -> (S_{k+1}, r_k)`
//! together with an exogenous process, an initial-state law, a discount and
//! a horizon. Augmentations that fold exogenous information (or a delayed
//! view of it) into the state live in [`augment`].

mod augment;
mod distribution;
mod exo;
mod grid;
mod markov;
mod rollout;

use std::fmt;
use std::sync::Arc;

pub use augment::{
    augment_random_delay, augment_with_exogenous, augment_with_predictor, AugmentationKind,
    AugmentedSpec, DelayProcess,
};
pub use distribution::Distribution;
pub use exo::{DrivenExo, ExoDriver, ExoInput, ExoKind, ExoProcess, ExoState, ExoStream, FnDriver};
pub use grid::Grid;
pub use markov::{check_markov, MarkovGrids, MarkovReport};
pub use rollout::{
    discounted_return, rollout, write_trajectory_csv, Trajectory, TransitionRecord,
};

use crate::error::{check_dim, Error, Result};
use crate::rng::Rng;

const MODULE: &str = "ssdp";

/// Transition and reward maps of an SSDP.
pub trait Dynamics: Send + Sync {
    fn step(&self, s: &[f64], a: &[f64], w: &[f64]) -> Result<(Vec<f64>, f64)>;
}

type StepFn = dyn Fn(&[f64], &[f64], &[f64]) -> (Vec<f64>, f64) + Send + Sync;

/// Closure-backed [`Dynamics`].
#[derive(Clone)]
pub struct FnDynamics(Arc<StepFn>);

impl FnDynamics {
    pub fn new(f: impl Fn(&[f64], &[f64], &[f64]) -> (Vec<f64>, f64) + Send + Sync + 'static) -> Self {
        FnDynamics(Arc::new(f))
    }
}

impl Dynamics for FnDynamics {
    fn step(&self, s: &[f64], a: &[f64], w: &[f64]) -> Result<(Vec<f64>, f64)> {
        Ok((self.0)(s, a, w))
    }
}

/// Deterministic state-to-action map.
pub trait Policy: Send + Sync {
    fn act(&self, obs: &[f64]) -> Vec<f64>;
}

impl<F> Policy for F
where
    F: Fn(&[f64]) -> Vec<f64> + Send + Sync,
{
    fn act(&self, obs: &[f64]) -> Vec<f64> {
        self(obs)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Horizon {
    Finite(usize),
    Unbounded,
}

type InitMap = dyn Fn(&[f64]) -> Result<Vec<f64>> + Send + Sync;

/// Law of `S_0`.
#[derive(Clone)]
pub enum InitialState {
    Dist(Distribution),
    /// Independent blocks concatenated in order.
    Product(Vec<InitialState>),
    /// Push-forward of `base` through a deterministic map.
    Mapped {
        base: Box<InitialState>,
        dim: usize,
        map: Arc<InitMap>,
    },
}

impl fmt::Debug for InitialState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InitialState::Dist(d) => f.debug_tuple("Dist").field(d).finish(),
            InitialState::Product(p) => f.debug_tuple("Product").field(p).finish(),
            InitialState::Mapped { base, dim, .. } => f
                .debug_struct("Mapped")
                .field("base", base)
                .field("dim", dim)
                .finish(),
        }
    }
}

impl From<Distribution> for InitialState {
    fn from(d: Distribution) -> Self {
        InitialState::Dist(d)
    }
}

impl InitialState {
    pub fn mapped(
        base: InitialState,
        dim: usize,
        map: impl Fn(&[f64]) -> Result<Vec<f64>> + Send + Sync + 'static,
    ) -> Self {
        InitialState::Mapped {
            base: Box::new(base),
            dim,
            map: Arc::new(map),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            InitialState::Dist(d) => d.dim(),
            InitialState::Product(p) => p.iter().map(InitialState::dim).sum(),
            InitialState::Mapped { dim, .. } => *dim,
        }
    }

    pub fn sample(&self, rng: &mut Rng) -> Result<Vec<f64>> {
        match self {
            InitialState::Dist(d) => Ok(d.sample(rng)),
            InitialState::Product(parts) => {
                let mut out = Vec::with_capacity(self.dim());
                for p in parts {
                    out.extend(p.sample(rng)?);
                }
                Ok(out)
            }
            InitialState::Mapped { base, map, .. } => map(&base.sample(rng)?),
        }
    }

    /// Finite support with probabilities, if every block is enumerable.
    pub fn enumerate(&self) -> Result<Option<Vec<(Vec<f64>, f64)>>> {
        match self {
            InitialState::Dist(d) => Ok(d.enumerate()),
            InitialState::Product(parts) => {
                let mut acc: Vec<(Vec<f64>, f64)> = vec![(Vec::new(), 1.0)];
                for part in parts {
                    let Some(support) = part.enumerate()? else {
                        return Ok(None);
                    };
                    let mut next = Vec::with_capacity(acc.len() * support.len());
                    for (prefix, p) in &acc {
                        for (o, q) in &support {
                            let mut v = prefix.clone();
                            v.extend_from_slice(o);
                            next.push((v, p * q));
                        }
                    }
                    acc = next;
                }
                Ok(Some(acc))
            }
            InitialState::Mapped { base, map, .. } => match base.enumerate()? {
                None => Ok(None),
                Some(support) => support
                    .into_iter()
                    .map(|(x, p)| Ok((map(&x)?, p)))
                    .collect::<Result<Vec<_>>>()
                    .map(Some),
            },
        }
    }
}

/// A sequential stochastic decision process.
#[derive(Clone)]
pub struct SsdpSpec {
    name: String,
    state_dim: usize,
    action_dim: usize,
    action_bounds: Vec<(f64, f64)>,
    dynamics: Arc<dyn Dynamics>,
    exo: ExoProcess,
    init: InitialState,
    gamma: f64,
    horizon: Horizon,
}

impl fmt::Debug for SsdpSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SsdpSpec")
            .field("name", &self.name)
            .field("state_dim", &self.state_dim)
            .field("action_dim", &self.action_dim)
            .field("w_dim", &self.exo.w_dim())
            .field("exo", &self.exo)
            .field("gamma", &self.gamma)
            .field("horizon", &self.horizon)
            .finish()
    }
}

impl SsdpSpec {
    pub fn new(
        name: impl Into<String>,
        state_dim: usize,
        action_dim: usize,
        dynamics: impl Dynamics + 'static,
        exo: ExoProcess,
        gamma: f64,
        horizon: Horizon,
    ) -> Result<Self> {
        Self::from_arc(name, state_dim, action_dim, Arc::new(dynamics), exo, gamma, horizon)
    }

    pub fn from_arc(
        name: impl Into<String>,
        state_dim: usize,
        action_dim: usize,
        dynamics: Arc<dyn Dynamics>,
        exo: ExoProcess,
        gamma: f64,
        horizon: Horizon,
    ) -> Result<Self> {
        if !(0.0..=1.0).contains(&gamma) {
            return Err(Error::invalid(MODULE, format!("gamma {gamma} outside [0,1]")));
        }
        match horizon {
            Horizon::Finite(0) => return Err(Error::invalid(MODULE, "finite horizon must be >= 1")),
            Horizon::Unbounded if gamma >= 1.0 => {
                return Err(Error::invalid(MODULE, "unbounded horizon requires gamma < 1"))
            }
            _ => {}
        }
        exo.validate()?;
        Ok(SsdpSpec {
            name: name.into(),
            state_dim,
            action_dim,
            action_bounds: vec![(f64::NEG_INFINITY, f64::INFINITY); action_dim],
            dynamics,
            exo,
            init: InitialState::Dist(Distribution::Constant(vec![0.0; state_dim])),
            gamma,
            horizon,
        })
    }

    pub fn with_init(mut self, init: impl Into<InitialState>) -> Result<Self> {
        let init = init.into();
        check_dim(MODULE, "initial state", self.state_dim, init.dim())?;
        if let InitialState::Dist(d) = &init {
            d.validate()?;
        }
        self.init = init;
        Ok(self)
    }

    pub fn with_action_bounds(mut self, bounds: Vec<(f64, f64)>) -> Result<Self> {
        check_dim(MODULE, "action bounds", self.action_dim, bounds.len())?;
        if bounds.iter().any(|(l, h)| !(l <= h)) {
            return Err(Error::invalid(MODULE, "action bounds must satisfy lo <= hi"));
        }
        self.action_bounds = bounds;
        Ok(self)
    }

    pub fn with_exo(mut self, exo: ExoProcess) -> Result<Self> {
        exo.validate()?;
        self.exo = exo;
        Ok(self)
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }
    pub fn state_dim(&self) -> usize {
        self.state_dim
    }
    pub fn action_dim(&self) -> usize {
        self.action_dim
    }
    pub fn w_dim(&self) -> usize {
        self.exo.w_dim()
    }
    pub fn action_bounds(&self) -> &[(f64, f64)] {
        &self.action_bounds
    }
    pub fn exo(&self) -> &ExoProcess {
        &self.exo
    }
    pub fn init(&self) -> &InitialState {
        &self.init
    }
    pub fn gamma(&self) -> f64 {
        self.gamma
    }
    pub fn horizon(&self) -> Horizon {
        self.horizon
    }
    pub fn dynamics(&self) -> &Arc<dyn Dynamics> {
        &self.dynamics
    }

    /// `(f^S(s,a,w), r(s,a,w))` with dimension checks.
    pub fn step(&self, s: &[f64], a: &[f64], w: &[f64]) -> Result<(Vec<f64>, f64)> {
        check_dim(MODULE, "state", self.state_dim, s.len())?;
        check_dim(MODULE, "action", self.action_dim, a.len())?;
        check_dim(MODULE, "exogenous sample", self.exo.w_dim(), w.len())?;
        let (next, r) = self.dynamics.step(s, a, w)?;
        check_dim(MODULE, "next state", self.state_dim, next.len())?;
        Ok((next, r))
    }

    /// Clamps `a` into the action box, reporting whether anything moved.
    pub fn clamp_action(&self, a: &mut [f64]) -> bool {
        let mut clamped = false;
        for (x, &(lo, hi)) in a.iter_mut().zip(&self.action_bounds) {
            let c = x.clamp(lo, hi);
            if c != *x {
                clamped = true;
                *x = c;
            }
        }
        clamped
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn counter() -> SsdpSpec {
        SsdpSpec::new(
            "counter",
            1,
            1,
            FnDynamics::new(|s, a, w| (vec![s[0] + a[0] + w[0]], -s[0].abs())),
            ExoProcess::Iid(Distribution::constant(vec![0.0])),
            0.9,
            Horizon::Finite(10),
        )
        .unwrap()
    }

    #[test]
    fn step_checks_dimensions() {
        let spec = counter();
        assert!(spec.step(&[0.0, 1.0], &[0.0], &[0.0]).is_err());
        assert!(spec.step(&[0.0], &[], &[0.0]).is_err());
        let (s, r) = spec.step(&[2.0], &[1.0], &[0.5]).unwrap();
        assert_eq!(s, vec![3.5]);
        assert_eq!(r, -2.0);
    }

    #[test]
    fn invalid_gamma_and_horizon() {
        let mk = |g, h| {
            SsdpSpec::new(
                "x",
                1,
                1,
                FnDynamics::new(|s, _, _| (s.to_vec(), 0.0)),
                ExoProcess::none(),
                g,
                h,
            )
        };
        assert!(mk(1.5, Horizon::Finite(3)).is_err());
        assert!(mk(0.5, Horizon::Finite(0)).is_err());
        assert!(mk(1.0, Horizon::Unbounded).is_err());
        assert!(mk(1.0, Horizon::Finite(3)).is_ok());
    }

    #[test]
    fn mapped_init_enumerates() {
        let base = InitialState::Dist(Distribution::discrete_scalar(&[1.0, 2.0], &[0.5, 0.5]).unwrap());
        let m = InitialState::mapped(base, 2, |x| Ok(vec![x[0], 2.0 * x[0]]));
        let e = m.enumerate().unwrap().unwrap();
        assert_eq!(e[1].0, vec![2.0, 4.0]);
    }
}
