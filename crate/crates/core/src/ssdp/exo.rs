//! Exogenous information processes.
//!
//! `W_k` is drawn after `a_k` has been chosen and before `S_{k+1}` is
//! computed. A process is either memoryless (`Iid`), a recorded sequence
//! (`Trace`), a concatenation of such parts (`Joint`), or `Driven` by a
//! recursion `W_k = f^W(W̃_k)` whose inputs are declared up front so the
//! structural Markov test can be read off without running anything.

use std::fmt;
use std::sync::Arc;

use super::Distribution;
use crate::error::{check_dim, Error, Result};
use crate::rng::Rng;

const MODULE: &str = "ssdp";

/// Ingredients a driver may read when producing `W_k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExoInput {
    /// `W_{k-1}`.
    PreviousW,
    /// `S_k`.
    State,
    /// `a_k`.
    Action,
    /// A fresh draw from the innovation process (`ζ_k`).
    Innovation,
}

pub trait ExoDriver: Send + Sync {
    fn w_dim(&self) -> usize;
    fn inputs(&self) -> &[ExoInput];
    fn next(&self, prev_w: &[f64], s: &[f64], a: &[f64], innovation: &[f64]) -> Vec<f64>;
}

type DriverFn = dyn Fn(&[f64], &[f64], &[f64], &[f64]) -> Vec<f64> + Send + Sync;

/// Closure-backed [`ExoDriver`].
#[derive(Clone)]
pub struct FnDriver {
    w_dim: usize,
    inputs: Vec<ExoInput>,
    f: Arc<DriverFn>,
}

impl FnDriver {
    pub fn new(
        w_dim: usize,
        inputs: Vec<ExoInput>,
        f: impl Fn(&[f64], &[f64], &[f64], &[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        FnDriver {
            w_dim,
            inputs,
            f: Arc::new(f),
        }
    }
}

impl ExoDriver for FnDriver {
    fn w_dim(&self) -> usize {
        self.w_dim
    }
    fn inputs(&self) -> &[ExoInput] {
        &self.inputs
    }
    fn next(&self, prev_w: &[f64], s: &[f64], a: &[f64], innovation: &[f64]) -> Vec<f64> {
        (self.f)(prev_w, s, a, innovation)
    }
}

#[derive(Clone)]
pub struct DrivenExo {
    pub driver: Arc<dyn ExoDriver>,
    /// Source of `ζ_k`; must not itself be driven.
    pub innovation: Box<ExoProcess>,
    /// Distribution of `W_{-1}`.
    pub initial: Distribution,
}

#[derive(Clone)]
pub enum ExoProcess {
    Iid(Distribution),
    Trace(Vec<Vec<f64>>),
    Joint(Vec<ExoProcess>),
    Driven(DrivenExo),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExoKind {
    Iid,
    Driven,
    Trace,
}

impl fmt::Debug for ExoProcess {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExoProcess::Iid(d) => f.debug_tuple("Iid").field(d).finish(),
            ExoProcess::Trace(rows) => write!(f, "Trace(len={})", rows.len()),
            ExoProcess::Joint(parts) => f.debug_tuple("Joint").field(parts).finish(),
            ExoProcess::Driven(d) => f
                .debug_struct("Driven")
                .field("inputs", &d.driver.inputs())
                .field("w_dim", &d.driver.w_dim())
                .field("innovation", &d.innovation)
                .finish(),
        }
    }
}

impl ExoProcess {
    /// A process that always emits the empty vector.
    pub fn none() -> Self {
        ExoProcess::Iid(Distribution::Constant(Vec::new()))
    }

    pub fn driven(
        driver: impl ExoDriver + 'static,
        innovation: ExoProcess,
        initial: Distribution,
    ) -> Result<Self> {
        let p = ExoProcess::Driven(DrivenExo {
            driver: Arc::new(driver),
            innovation: Box::new(innovation),
            initial,
        });
        p.validate()?;
        Ok(p)
    }

    pub fn w_dim(&self) -> usize {
        match self {
            ExoProcess::Iid(d) => d.dim(),
            ExoProcess::Trace(rows) => rows.first().map_or(0, Vec::len),
            ExoProcess::Joint(parts) => parts.iter().map(ExoProcess::w_dim).sum(),
            ExoProcess::Driven(d) => d.driver.w_dim(),
        }
    }

    pub fn kind(&self) -> ExoKind {
        match self {
            ExoProcess::Iid(_) => ExoKind::Iid,
            ExoProcess::Trace(_) => ExoKind::Trace,
            ExoProcess::Driven(_) => ExoKind::Driven,
            ExoProcess::Joint(parts) => {
                if parts.iter().any(|p| p.kind() == ExoKind::Trace) {
                    ExoKind::Trace
                } else {
                    ExoKind::Iid
                }
            }
        }
    }

    /// Theorem-1 style structural test: every ingredient of `W̃_k` lies in
    /// `{S_k, a_k, ζ_k}`.
    pub fn structurally_markov(&self) -> bool {
        match self {
            ExoProcess::Iid(_) | ExoProcess::Trace(_) => true,
            ExoProcess::Joint(parts) => parts.iter().all(ExoProcess::structurally_markov),
            ExoProcess::Driven(d) => {
                !d.driver.inputs().contains(&ExoInput::PreviousW)
                    && d.innovation.structurally_markov()
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ExoProcess::Iid(d) => d.validate(),
            ExoProcess::Trace(rows) => {
                let dim = rows.first().map_or(0, Vec::len);
                if rows.iter().any(|r| r.len() != dim) {
                    return Err(Error::invalid(MODULE, "trace rows differ in dimension"));
                }
                if rows.iter().flatten().any(|x| !x.is_finite()) {
                    return Err(Error::invalid(MODULE, "trace contains non-finite values"));
                }
                Ok(())
            }
            ExoProcess::Joint(parts) => {
                for p in parts {
                    if matches!(p, ExoProcess::Driven(_)) {
                        return Err(Error::invalid(MODULE, "driven process inside a joint process"));
                    }
                    p.validate()?;
                }
                Ok(())
            }
            ExoProcess::Driven(d) => {
                if d.innovation.contains_driven() {
                    return Err(Error::invalid(MODULE, "innovation of a driven process is driven"));
                }
                d.innovation.validate()?;
                d.initial.validate()?;
                check_dim(MODULE, "initial W_{-1}", d.driver.w_dim(), d.initial.dim())
            }
        }
    }

    fn contains_driven(&self) -> bool {
        match self {
            ExoProcess::Driven(_) => true,
            ExoProcess::Joint(parts) => parts.iter().any(ExoProcess::contains_driven),
            _ => false,
        }
    }

    /// Shortest recorded trace length, if the process contains a trace.
    pub fn trace_len(&self) -> Option<usize> {
        match self {
            ExoProcess::Iid(_) => None,
            ExoProcess::Trace(rows) => Some(rows.len()),
            ExoProcess::Joint(parts) => parts.iter().filter_map(ExoProcess::trace_len).min(),
            ExoProcess::Driven(d) => d.innovation.trace_len(),
        }
    }

    /// The process seen one step later (traces lose their first row).
    pub(crate) fn tail(&self) -> ExoProcess {
        match self {
            ExoProcess::Iid(_) => self.clone(),
            ExoProcess::Trace(rows) => ExoProcess::Trace(rows.iter().skip(1).cloned().collect()),
            ExoProcess::Joint(parts) => ExoProcess::Joint(parts.iter().map(ExoProcess::tail).collect()),
            ExoProcess::Driven(d) => ExoProcess::Driven(DrivenExo {
                driver: d.driver.clone(),
                innovation: Box::new(d.innovation.tail()),
                initial: d.initial.clone(),
            }),
        }
    }

    /// Distribution of the first draw of a non-driven process.
    pub(crate) fn first_draw(&self) -> Result<Distribution> {
        match self {
            ExoProcess::Iid(d) => Ok(d.clone()),
            ExoProcess::Trace(rows) => rows
                .first()
                .map(|r| Distribution::Constant(r.clone()))
                .ok_or_else(|| Error::invalid(MODULE, "empty exogenous trace")),
            ExoProcess::Joint(parts) => Ok(Distribution::Product(
                parts.iter().map(ExoProcess::first_draw).collect::<Result<_>>()?,
            )),
            ExoProcess::Driven(_) => Err(Error::unsupported(
                MODULE,
                "first-draw distribution of a driven process",
            )),
        }
    }

    /// The equivalent memoryless distribution, if the process has no trace
    /// and no recursion.
    pub(crate) fn as_iid(&self) -> Option<Distribution> {
        match self {
            ExoProcess::Iid(d) => Some(d.clone()),
            ExoProcess::Joint(parts) => Some(Distribution::Product(
                parts.iter().map(ExoProcess::as_iid).collect::<Option<_>>()?,
            )),
            _ => None,
        }
    }
}

/// Position of a sequence of draws from an [`ExoProcess`]: the step index
/// and, for driven processes, `W_{k-1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExoState {
    pub k: usize,
    pub prev: Vec<f64>,
}

impl ExoProcess {
    /// Fresh state; draws `W_{-1}` for driven processes.
    pub fn start(&self, rng: &mut Rng) -> ExoState {
        let prev = match self {
            ExoProcess::Driven(d) => d.initial.sample(rng),
            _ => Vec::new(),
        };
        ExoState { k: 0, prev }
    }

    /// Draws `W_k` given `S_k` and `a_k`, advancing `state`.
    pub fn draw(&self, state: &mut ExoState, s: &[f64], a: &[f64], rng: &mut Rng) -> Result<Vec<f64>> {
        let w = match self {
            ExoProcess::Driven(d) => {
                let innovation = draw_plain(&d.innovation, state.k, rng)?;
                let w = d.driver.next(&state.prev, s, a, &innovation);
                check_dim(MODULE, "driver output", d.driver.w_dim(), w.len())?;
                state.prev = w.clone();
                w
            }
            other => draw_plain(other, state.k, rng)?,
        };
        state.k += 1;
        Ok(w)
    }
}

/// Borrowing sampler over an [`ExoProcess`].
pub struct ExoStream<'a> {
    process: &'a ExoProcess,
    state: ExoState,
}

impl<'a> ExoStream<'a> {
    pub fn new(process: &'a ExoProcess, rng: &mut Rng) -> Self {
        ExoStream {
            process,
            state: process.start(rng),
        }
    }

    pub fn step_index(&self) -> usize {
        self.state.k
    }

    /// Draws `W_k` given `S_k` and `a_k`.
    pub fn draw(&mut self, s: &[f64], a: &[f64], rng: &mut Rng) -> Result<Vec<f64>> {
        self.process.draw(&mut self.state, s, a, rng)
    }
}

fn draw_plain(process: &ExoProcess, k: usize, rng: &mut Rng) -> Result<Vec<f64>> {
    match process {
        ExoProcess::Iid(d) => Ok(d.sample(rng)),
        ExoProcess::Trace(rows) => rows.get(k).cloned().ok_or_else(|| {
            Error::contract(
                MODULE,
                format!("exogenous trace exhausted at step {k} (length {})", rows.len()),
            )
        }),
        ExoProcess::Joint(parts) => {
            let mut out = Vec::new();
            for p in parts {
                out.extend(draw_plain(p, k, rng)?);
            }
            Ok(out)
        }
        ExoProcess::Driven(_) => Err(Error::invalid(MODULE, "nested driven process")),
    }
}
