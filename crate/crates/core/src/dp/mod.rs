//! Exact tabular oracle.
//!
//! [`TabularMdp`] stores sparse transition rows per `(s, a)` pair. Solvers
//! here are the reference against which every estimator in the crate is
//! checked, so they favour exactness (dense LU for policy evaluation on
//! small instances) over speed.

mod discretize;
mod env;
mod io;
mod random;
mod solve;

pub use discretize::{discretize, discretize_projected, DiscretizeMeta, Discretized, Projection};
pub use env::TabularEnv;
pub use io::{read_mdp, write_mdp};
pub use random::TabularSsdp;
pub use solve::{
    advantage_table, exact_performance, occupancy, performance_difference, policy_evaluation,
    policy_evaluation_exact, policy_evaluation_iterative, q_from_v, value_iteration, Solution,
};

use crate::error::{Error, Result};

const MODULE: &str = "dp";
pub(crate) const ROW_TOL: f64 = 1e-12;

/// Sparse transition row: `(s', probability)` pairs.
pub type Row = Vec<(usize, f64)>;

#[derive(Debug, Clone, PartialEq)]
pub struct TabularMdp {
    n_states: usize,
    n_actions: usize,
    rows: Vec<Row>,
    rewards: Vec<f64>,
    gamma: f64,
    init: Vec<f64>,
}

/// A policy over enumerated states.
#[derive(Debug, Clone, PartialEq)]
pub enum PolicyTable {
    Deterministic(Vec<usize>),
    /// Row-stochastic `[s][a]`.
    Stochastic(Vec<Vec<f64>>),
}

impl PolicyTable {
    pub fn uniform(n_states: usize, n_actions: usize) -> Self {
        PolicyTable::Stochastic(vec![vec![1.0 / n_actions as f64; n_actions]; n_states])
    }

    pub fn n_states(&self) -> usize {
        match self {
            PolicyTable::Deterministic(v) => v.len(),
            PolicyTable::Stochastic(v) => v.len(),
        }
    }

    /// `(a, π(a|s))` pairs with positive probability.
    pub fn actions(&self, s: usize) -> Vec<(usize, f64)> {
        match self {
            PolicyTable::Deterministic(v) => vec![(v[s], 1.0)],
            PolicyTable::Stochastic(v) => v[s]
                .iter()
                .enumerate()
                .filter(|(_, &p)| p > 0.0)
                .map(|(a, &p)| (a, p))
                .collect(),
        }
    }

    pub fn validate(&self, n_states: usize, n_actions: usize) -> Result<()> {
        if self.n_states() != n_states {
            return Err(Error::Dimension {
                module: MODULE,
                what: "policy table",
                expected: n_states,
                got: self.n_states(),
            });
        }
        match self {
            PolicyTable::Deterministic(v) => {
                if let Some(&a) = v.iter().find(|&&a| a >= n_actions) {
                    return Err(Error::invalid(MODULE, format!("policy action {a} out of range")));
                }
            }
            PolicyTable::Stochastic(v) => {
                for row in v {
                    if row.len() != n_actions || row.iter().any(|&p| !(p >= 0.0)) {
                        return Err(Error::invalid(MODULE, "malformed stochastic policy row"));
                    }
                    let t: f64 = row.iter().sum();
                    if (t - 1.0).abs() > 1e-9 {
                        return Err(Error::invalid(MODULE, format!("policy row sums to {t}")));
                    }
                }
            }
        }
        Ok(())
    }
}

impl TabularMdp {
    /// Builds and validates an MDP from sparse rows indexed `s * n_actions + a`.
    pub fn new(
        n_states: usize,
        n_actions: usize,
        rows: Vec<Row>,
        rewards: Vec<f64>,
        gamma: f64,
        init: Vec<f64>,
    ) -> Result<Self> {
        if n_states == 0 || n_actions == 0 {
            return Err(Error::invalid(MODULE, "MDP needs at least one state and one action"));
        }
        let n = n_states * n_actions;
        if rows.len() != n || rewards.len() != n || init.len() != n_states {
            return Err(Error::invalid(MODULE, "MDP tensor sizes do not match n_states x n_actions"));
        }
        if !(0.0..=1.0).contains(&gamma) {
            return Err(Error::invalid(MODULE, format!("gamma {gamma} outside [0,1]")));
        }
        let mut rows = rows;
        for (i, row) in rows.iter_mut().enumerate() {
            row.sort_by_key(|&(s, _)| s);
            let mut merged: Row = Vec::with_capacity(row.len());
            for &(s, p) in row.iter() {
                if s >= n_states || !(p >= 0.0) || !p.is_finite() {
                    return Err(Error::invalid(
                        MODULE,
                        format!("row {i}: entry ({s}, {p}) is not a valid transition"),
                    ));
                }
                match merged.last_mut() {
                    Some(last) if last.0 == s => last.1 += p,
                    _ => merged.push((s, p)),
                }
            }
            merged.retain(|&(_, p)| p > 0.0);
            let total: f64 = merged.iter().map(|e| e.1).sum();
            if (total - 1.0).abs() > ROW_TOL {
                return Err(Error::invalid(
                    MODULE,
                    format!(
                        "P[{}, {}, :] sums to {total}, not a stochastic row",
                        i / n_actions,
                        i % n_actions
                    ),
                ));
            }
            *row = merged;
        }
        if rewards.iter().any(|r| !r.is_finite()) {
            return Err(Error::invalid(MODULE, "non-finite reward"));
        }
        if init.iter().any(|&p| !(p >= 0.0)) || (init.iter().sum::<f64>() - 1.0).abs() > ROW_TOL {
            return Err(Error::invalid(MODULE, "init_dist is not a probability vector"));
        }
        Ok(TabularMdp {
            n_states,
            n_actions,
            rows,
            rewards,
            gamma,
            init,
        })
    }

    /// Dense constructor `P[s][a][s']`, `R[s][a]`.
    pub fn from_dense(p: &[Vec<Vec<f64>>], r: &[Vec<f64>], gamma: f64, init: Vec<f64>) -> Result<Self> {
        let n_states = p.len();
        let n_actions = p.first().map_or(0, Vec::len);
        let mut rows = Vec::with_capacity(n_states * n_actions);
        let mut rewards = Vec::with_capacity(n_states * n_actions);
        for s in 0..n_states {
            if p[s].len() != n_actions || r.get(s).map_or(true, |x| x.len() != n_actions) {
                return Err(Error::invalid(MODULE, "ragged dense tensors"));
            }
            for a in 0..n_actions {
                if p[s][a].len() != n_states {
                    return Err(Error::invalid(MODULE, "ragged dense transition row"));
                }
                rows.push(
                    p[s][a]
                        .iter()
                        .enumerate()
                        .filter(|(_, &q)| q != 0.0)
                        .map(|(j, &q)| (j, q))
                        .collect(),
                );
                rewards.push(r[s][a]);
            }
        }
        TabularMdp::new(n_states, n_actions, rows, rewards, gamma, init)
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }
    pub fn n_actions(&self) -> usize {
        self.n_actions
    }
    pub fn gamma(&self) -> f64 {
        self.gamma
    }
    pub fn init(&self) -> &[f64] {
        &self.init
    }
    pub fn row(&self, s: usize, a: usize) -> &[(usize, f64)] {
        &self.rows[s * self.n_actions + a]
    }
    pub fn reward(&self, s: usize, a: usize) -> f64 {
        self.rewards[s * self.n_actions + a]
    }
    pub fn prob(&self, s: usize, a: usize, s_next: usize) -> f64 {
        self.row(s, a)
            .iter()
            .find(|e| e.0 == s_next)
            .map_or(0.0, |e| e.1)
    }

    pub fn with_gamma(mut self, gamma: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&gamma) {
            return Err(Error::invalid(MODULE, format!("gamma {gamma} outside [0,1]")));
        }
        self.gamma = gamma;
        Ok(self)
    }

    pub fn with_init(self, init: Vec<f64>) -> Result<Self> {
        TabularMdp::new(self.n_states, self.n_actions, self.rows, self.rewards, self.gamma, init)
    }

    /// Maximum absolute reward.
    pub fn reward_bound(&self) -> f64 {
        self.rewards.iter().fold(0.0, |m, r| m.max(r.abs()))
    }
}
