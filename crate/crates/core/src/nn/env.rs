//! Episodic environment interface shared by the trainer and the VoI
//! estimators.

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::ssdp::{ExoState, SsdpSpec};

#[derive(Debug, Clone, PartialEq)]
pub struct EnvStep {
    pub obs: Vec<f64>,
    pub reward: f64,
    /// The episode is over (time limit or terminal state).
    pub done: bool,
    /// The episode ended in a true terminal state: no bootstrapping.
    pub terminal: bool,
}

/// An episodic environment. Observations returned by `reset`/`step` are the
/// superior (full) observation `S^sup`.
pub trait Environment: Clone + Send + Sync {
    type Snapshot: Clone + Send + Sync;

    fn obs_dim(&self) -> usize;
    fn action_bounds(&self) -> Vec<(f64, f64)>;
    fn gamma(&self) -> f64;
    fn reset(&mut self, rng: &mut Rng) -> Result<Vec<f64>>;
    fn step(&mut self, a: &[f64], rng: &mut Rng) -> Result<EnvStep>;

    /// Current superior observation.
    fn observation(&self) -> Vec<f64>;

    /// Observation available to the inferior policy; defaults to the full one.
    fn inferior_observation(&self) -> Vec<f64> {
        self.observation()
    }

    fn snapshot(&self) -> Result<Self::Snapshot> {
        Err(Error::unsupported("nn", "environment cannot record its state"))
    }

    fn restore(&mut self, _snap: &Self::Snapshot) -> Result<()> {
        Err(Error::unsupported("nn", "environment cannot restore recorded states"))
    }
}

pub(crate) fn clamp_to(bounds: &[(f64, f64)], a: &[f64]) -> Vec<f64> {
    a.iter().zip(bounds).map(|(&x, &(l, h))| x.clamp(l, h)).collect()
}

type ObsMap = std::sync::Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// Environment view of an [`SsdpSpec`] with a finite episode length.
#[derive(Clone)]
pub struct SpecEnv {
    spec: SsdpSpec,
    horizon: usize,
    inferior: Option<ObsMap>,
    state: Vec<f64>,
    exo: ExoState,
    k: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpecSnapshot {
    pub state: Vec<f64>,
    pub exo: ExoState,
    pub k: usize,
}

impl SpecEnv {
    pub fn new(spec: SsdpSpec, horizon: usize) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::invalid("nn", "episode length must be >= 1"));
        }
        let n = spec.state_dim();
        Ok(SpecEnv {
            spec,
            horizon,
            inferior: None,
            state: vec![0.0; n],
            exo: crate::ssdp::ExoState { k: 0, prev: Vec::new() },
            k: 0,
        })
    }

    /// Sets the map from the full state to the inferior observation.
    pub fn with_inferior(mut self, f: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static) -> Self {
        self.inferior = Some(std::sync::Arc::new(f));
        self
    }

    pub fn spec(&self) -> &SsdpSpec {
        &self.spec
    }
}

impl Environment for SpecEnv {
    type Snapshot = SpecSnapshot;

    fn obs_dim(&self) -> usize {
        self.spec.state_dim()
    }
    fn action_bounds(&self) -> Vec<(f64, f64)> {
        self.spec.action_bounds().to_vec()
    }
    fn gamma(&self) -> f64 {
        self.spec.gamma()
    }
    fn reset(&mut self, rng: &mut Rng) -> Result<Vec<f64>> {
        self.state = self.spec.init().sample(rng)?;
        self.exo = self.spec.exo().start(rng);
        self.k = 0;
        Ok(self.state.clone())
    }
    fn step(&mut self, a: &[f64], rng: &mut Rng) -> Result<EnvStep> {
        let a = clamp_to(self.spec.action_bounds(), a);
        let w = self.spec.exo().draw(&mut self.exo, &self.state, &a, rng)?;
        let (next, r) = self.spec.step(&self.state, &a, &w)?;
        self.state = next;
        self.k += 1;
        Ok(EnvStep {
            obs: self.state.clone(),
            reward: r,
            done: self.k >= self.horizon,
            terminal: false,
        })
    }
    fn observation(&self) -> Vec<f64> {
        self.state.clone()
    }
    fn inferior_observation(&self) -> Vec<f64> {
        match &self.inferior {
            Some(f) => f(&self.state),
            None => self.state.clone(),
        }
    }
    fn snapshot(&self) -> Result<SpecSnapshot> {
        Ok(SpecSnapshot {
            state: self.state.clone(),
            exo: self.exo.clone(),
            k: self.k,
        })
    }
    fn restore(&mut self, snap: &SpecSnapshot) -> Result<()> {
        self.state = snap.state.clone();
        self.exo = snap.exo.clone();
        self.k = snap.k;
        Ok(())
    }
}
