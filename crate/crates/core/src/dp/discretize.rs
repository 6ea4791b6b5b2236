//! Discretisation of an SSDP onto a state/action grid.
//!
//! [`Projection::Nearest`] snaps each successor to one grid point, which
//! keeps rows sparse but biases the model wherever one step moves the state
//! by less than half a cell. [`Projection::Multilinear`] spreads each
//! successor over the corners of its cell with interpolation weights, so
//! the expected successor equals the true one inside the grid box.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Row, TabularMdp, MODULE};
use crate::error::{check_dim, Error, Result};
use crate::rng::rng_from_seed;
use crate::ssdp::{Grid, SsdpSpec};

/// How a continuous successor state is mapped onto grid points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Projection {
    #[default]
    Nearest,
    Multilinear,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscretizeMeta {
    /// Probability mass (summed over all `(s, a)` rows) that left the grid
    /// and was clipped to a boundary cell.
    pub clipped_mass: f64,
    /// Number of `(s, a)` rows with any clipped mass.
    pub clipped_rows: usize,
    pub exo_outcomes: usize,
    /// The exogenous law was enumerated exactly instead of sampled.
    pub exact_exo: bool,
}

#[derive(Debug, Clone)]
pub struct Discretized {
    pub mdp: TabularMdp,
    pub state_grid: Grid,
    pub action_grid: Grid,
    pub meta: DiscretizeMeta,
}

impl Discretized {
    pub fn state_index(&self, s: &[f64]) -> Result<usize> {
        Ok(self.state_grid.locate(s)?.0)
    }

    pub fn action_index(&self, a: &[f64]) -> Result<usize> {
        Ok(self.action_grid.locate(a)?.0)
    }
}

/// Estimates `P` and `R` on the grid.
///
/// Finite exogenous laws are enumerated exactly; otherwise `exo_samples`
/// draws (shared by every row) stand in for the law. The exogenous process
/// must be iid; augment driven or trace specs first.
pub fn discretize(
    spec: &SsdpSpec,
    state_grid: &Grid,
    action_grid: &Grid,
    exo_samples: usize,
    seed: u64,
) -> Result<Discretized> {
    discretize_projected(spec, state_grid, action_grid, exo_samples, seed, Projection::Nearest)
}

/// [`discretize`] with an explicit successor projection.
pub fn discretize_projected(
    spec: &SsdpSpec,
    state_grid: &Grid,
    action_grid: &Grid,
    exo_samples: usize,
    seed: u64,
    projection: Projection,
) -> Result<Discretized> {
    check_dim(MODULE, "state grid", spec.state_dim(), state_grid.dim())?;
    check_dim(MODULE, "action grid", spec.action_dim(), action_grid.dim())?;
    if exo_samples == 0 {
        return Err(Error::invalid(MODULE, "exo_samples must be >= 1"));
    }
    if state_grid.is_empty() || action_grid.is_empty() {
        return Err(Error::invalid(MODULE, "empty grid"));
    }
    let law = spec.exo().as_iid().ok_or_else(|| {
        Error::unsupported(
            MODULE,
            "discretize needs an iid exogenous process; augment driven or trace specs first",
        )
    })?;
    let mut rng = rng_from_seed(seed);
    let (outcomes, exact_exo) = match law.enumerate() {
        Some(o) => (o, true),
        None => {
            let p = 1.0 / exo_samples as f64;
            ((0..exo_samples).map(|_| (law.sample(&mut rng), p)).collect(), false)
        }
    };
    let init = match spec.init().enumerate()? {
        Some(support) => {
            let mut d = vec![0.0; state_grid.len()];
            for (x, p) in support {
                d[state_grid.locate(&x)?.0] += p;
            }
            d
        }
        None => {
            let mut d = vec![0.0; state_grid.len()];
            let p = 1.0 / exo_samples as f64;
            for _ in 0..exo_samples {
                let x = spec.init().sample(&mut rng)?;
                d[state_grid.locate(&x)?.0] += p;
            }
            d
        }
    };
    let total: f64 = init.iter().sum();
    let init: Vec<f64> = init.iter().map(|p| p / total).collect();

    let n_a = action_grid.len();
    let actions: Vec<Vec<f64>> = (0..n_a).map(|a| action_grid.point(a)).collect();
    type Cell = (Row, f64, f64);
    let cells: Vec<Result<Vec<Cell>>> = (0..state_grid.len())
        .into_par_iter()
        .map(|s| {
            let x = state_grid.point(s);
            actions
                .iter()
                .map(|a| {
                    let mut row: Row = Vec::with_capacity(outcomes.len());
                    let mut r = 0.0;
                    let mut clipped = 0.0;
                    for (w, p) in &outcomes {
                        let (next, rew) = spec.step(&x, a, w)?;
                        let (j, out) = state_grid.locate(&next)?;
                        if out {
                            clipped += p;
                        }
                        match projection {
                            Projection::Nearest => row.push((j, *p)),
                            Projection::Multilinear => {
                                for (k, wk) in state_grid.interpolation_weights(&next)? {
                                    row.push((k, p * wk));
                                }
                            }
                        }
                        r += p * rew;
                    }
                    if projection == Projection::Multilinear {
                        row.sort_by_key(|e| e.0);
                        row.dedup_by(|b, a| {
                            if a.0 == b.0 {
                                a.1 += b.1;
                                true
                            } else {
                                false
                            }
                        });
                    }
                    Ok((row, r, clipped))
                })
                .collect()
        })
        .collect();
    let mut rows = Vec::with_capacity(state_grid.len() * n_a);
    let mut rewards = Vec::with_capacity(state_grid.len() * n_a);
    let mut meta = DiscretizeMeta {
        clipped_mass: 0.0,
        clipped_rows: 0,
        exo_outcomes: outcomes.len(),
        exact_exo,
    };
    for cell in cells {
        for (row, r, c) in cell? {
            rows.push(row);
            rewards.push(r);
            if c > 0.0 {
                meta.clipped_mass += c;
                meta.clipped_rows += 1;
            }
        }
    }
    let mdp = TabularMdp::new(state_grid.len(), n_a, rows, rewards, spec.gamma(), init)?;
    Ok(Discretized {
        mdp,
        state_grid: state_grid.clone(),
        action_grid: action_grid.clone(),
        meta,
    })
}
