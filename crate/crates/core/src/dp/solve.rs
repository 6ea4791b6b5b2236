//! Value iteration, policy evaluation, Q/advantage tables and the
//! discounted occupancy measure.

use nalgebra::{DMatrix, DVector};

use super::{PolicyTable, TabularMdp, MODULE};
use crate::error::{check_dim, Error, Result};

/// Above this size policy evaluation iterates instead of factorising.
pub const DENSE_LIMIT: usize = 5000;
const MAX_SWEEPS: usize = 10_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub values: Vec<f64>,
    pub policy: Vec<usize>,
    /// Sup-norm distance between consecutive sweeps.
    pub residuals: Vec<f64>,
}

impl Solution {
    pub fn policy_table(&self) -> PolicyTable {
        PolicyTable::Deterministic(self.policy.clone())
    }
}

fn backup(mdp: &TabularMdp, s: usize, a: usize, v: &[f64]) -> f64 {
    mdp.reward(s, a) + mdp.gamma() * mdp.row(s, a).iter().map(|&(j, p)| p * v[j]).sum::<f64>()
}

/// Greedy action with ties broken towards the lowest index.
fn greedy(mdp: &TabularMdp, s: usize, v: &[f64]) -> (usize, f64) {
    let mut best = (0, backup(mdp, s, 0, v));
    for a in 1..mdp.n_actions() {
        let q = backup(mdp, s, a, v);
        if q > best.1 {
            best = (a, q);
        }
    }
    best
}

/// Sweeps `V <- max_a Q` until `‖TV − V‖∞ ≤ tol`.
pub fn value_iteration(mdp: &TabularMdp, tol: f64) -> Result<Solution> {
    if !(tol > 0.0) {
        return Err(Error::invalid(MODULE, "value iteration tolerance must be > 0"));
    }
    let n = mdp.n_states();
    let mut v = vec![0.0; n];
    let mut next = vec![0.0; n];
    let mut residuals = Vec::new();
    loop {
        let mut res: f64 = 0.0;
        for s in 0..n {
            next[s] = greedy(mdp, s, &v).1;
            res = res.max((next[s] - v[s]).abs());
        }
        std::mem::swap(&mut v, &mut next);
        residuals.push(res);
        if res <= tol {
            break;
        }
        if residuals.len() >= MAX_SWEEPS || !res.is_finite() {
            return Err(Error::invalid(
                MODULE,
                format!("value iteration did not converge (residual {res} after {} sweeps)", residuals.len()),
            ));
        }
    }
    let policy = (0..n).map(|s| greedy(mdp, s, &v).0).collect();
    Ok(Solution {
        values: v,
        policy,
        residuals,
    })
}

fn policy_reward(mdp: &TabularMdp, pi: &PolicyTable, s: usize) -> f64 {
    pi.actions(s).iter().map(|&(a, p)| p * mdp.reward(s, a)).sum()
}

/// `V_π` by dense LU of `(I − γ P_π)`.
pub fn policy_evaluation_exact(mdp: &TabularMdp, pi: &PolicyTable) -> Result<Vec<f64>> {
    pi.validate(mdp.n_states(), mdp.n_actions())?;
    let n = mdp.n_states();
    let g = mdp.gamma();
    let mut m = DMatrix::<f64>::identity(n, n);
    let mut r = DVector::<f64>::zeros(n);
    for s in 0..n {
        for (a, pa) in pi.actions(s) {
            for &(j, p) in mdp.row(s, a) {
                m[(s, j)] -= g * pa * p;
            }
        }
        r[s] = policy_reward(mdp, pi, s);
    }
    let v = m
        .lu()
        .solve(&r)
        .ok_or_else(|| Error::invalid(MODULE, "policy evaluation system is singular (gamma = 1 without absorption?)"))?;
    Ok(v.iter().copied().collect())
}

/// `V_π` by fixed-point iteration to a sup-norm residual of `tol`.
pub fn policy_evaluation_iterative(mdp: &TabularMdp, pi: &PolicyTable, tol: f64) -> Result<Vec<f64>> {
    pi.validate(mdp.n_states(), mdp.n_actions())?;
    if !(tol > 0.0) {
        return Err(Error::invalid(MODULE, "policy evaluation tolerance must be > 0"));
    }
    let n = mdp.n_states();
    let acts: Vec<Vec<(usize, f64)>> = (0..n).map(|s| pi.actions(s)).collect();
    let mut v = vec![0.0; n];
    let mut next = vec![0.0; n];
    for sweep in 0.. {
        let mut res: f64 = 0.0;
        for s in 0..n {
            next[s] = acts[s].iter().map(|&(a, p)| p * backup(mdp, s, a, &v)).sum();
            res = res.max((next[s] - v[s]).abs());
        }
        std::mem::swap(&mut v, &mut next);
        if res <= tol {
            break;
        }
        if sweep >= MAX_SWEEPS || !res.is_finite() {
            return Err(Error::invalid(MODULE, "policy evaluation did not converge"));
        }
    }
    Ok(v)
}

/// Exact solve up to [`DENSE_LIMIT`] states, iterative above.
pub fn policy_evaluation(mdp: &TabularMdp, pi: &PolicyTable, tol: f64) -> Result<Vec<f64>> {
    if mdp.n_states() <= DENSE_LIMIT {
        policy_evaluation_exact(mdp, pi)
    } else {
        policy_evaluation_iterative(mdp, pi, tol)
    }
}

/// `Q(s,a) = R[s,a] + γ Σ_{s'} P[s,a,s'] V(s')`, indexed `[s][a]`.
pub fn q_from_v(mdp: &TabularMdp, v: &[f64]) -> Result<Vec<Vec<f64>>> {
    check_dim(MODULE, "value table", mdp.n_states(), v.len())?;
    Ok((0..mdp.n_states())
        .map(|s| (0..mdp.n_actions()).map(|a| backup(mdp, s, a, v)).collect())
        .collect())
}

/// `A(s,a) = Q(s,a) − V(s)`.
pub fn advantage_table(q: &[Vec<f64>], v: &[f64]) -> Result<Vec<Vec<f64>>> {
    check_dim(MODULE, "value table", q.len(), v.len())?;
    Ok(q
        .iter()
        .zip(v)
        .map(|(row, &vs)| row.iter().map(|&x| x - vs).collect())
        .collect())
}

const EXACT_TOL: f64 = 1e-13;

/// `J_π = Σ_s init(s) V_π(s)`.
pub fn exact_performance(mdp: &TabularMdp, pi: &PolicyTable) -> Result<f64> {
    let v = policy_evaluation(mdp, pi, EXACT_TOL)?;
    Ok(dot(mdp.init(), &v))
}

/// Unnormalised discounted occupancy `d = (I − γ P_π^T)^{-1} init`.
pub fn occupancy(mdp: &TabularMdp, pi: &PolicyTable) -> Result<Vec<f64>> {
    pi.validate(mdp.n_states(), mdp.n_actions())?;
    if mdp.gamma() >= 1.0 {
        return Err(Error::invalid(MODULE, "discounted occupancy is unbounded for gamma = 1"));
    }
    let n = mdp.n_states();
    let g = mdp.gamma();
    if n <= DENSE_LIMIT {
        let mut m = DMatrix::<f64>::identity(n, n);
        for s in 0..n {
            for (a, pa) in pi.actions(s) {
                for &(j, p) in mdp.row(s, a) {
                    m[(j, s)] -= g * pa * p;
                }
            }
        }
        let b = DVector::from_column_slice(mdp.init());
        let d = m
            .lu()
            .solve(&b)
            .ok_or_else(|| Error::invalid(MODULE, "occupancy system is singular"))?;
        return Ok(d.iter().copied().collect());
    }
    let acts: Vec<Vec<(usize, f64)>> = (0..n).map(|s| pi.actions(s)).collect();
    let mut d = mdp.init().to_vec();
    loop {
        let mut next = mdp.init().to_vec();
        for s in 0..n {
            for &(a, pa) in &acts[s] {
                for &(j, p) in mdp.row(s, a) {
                    next[j] += g * pa * p * d[s];
                }
            }
        }
        let res = next.iter().zip(&d).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
        d = next;
        if res <= EXACT_TOL {
            return Ok(d);
        }
    }
}

/// `(J_inf − J_sup, Σ_s d_inf(s) Σ_a π_inf(a|s) A_sup(s,a))`.
pub fn performance_difference(
    mdp: &TabularMdp,
    pi_inf: &PolicyTable,
    pi_sup: &PolicyTable,
) -> Result<(f64, f64)> {
    if mdp.gamma() >= 1.0 {
        return Err(Error::invalid(MODULE, "performance difference needs gamma < 1"));
    }
    let v_sup = policy_evaluation(mdp, pi_sup, EXACT_TOL)?;
    let v_inf = policy_evaluation(mdp, pi_inf, EXACT_TOL)?;
    let q_sup = q_from_v(mdp, &v_sup)?;
    let d_inf = occupancy(mdp, pi_inf)?;
    let j_diff = dot(mdp.init(), &v_inf) - dot(mdp.init(), &v_sup);
    // Where both policies pick the same deterministic action the advantage
    // is zero by definition; skipping it keeps identical policies exact.
    let weighted: f64 = (0..mdp.n_states())
        .map(|s| {
            let same = matches!(pi_sup, PolicyTable::Deterministic(v) if pi_inf.actions(s) == [(v[s], 1.0)]);
            if same {
                return 0.0;
            }
            d_inf[s]
                * pi_inf
                    .actions(s)
                    .iter()
                    .map(|&(a, p)| p * (q_sup[s][a] - v_sup[s]))
                    .sum::<f64>()
        })
        .sum();
    Ok((j_diff, weighted))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
