//! Information-theoretic VoI on enumerated models.
//!
//! The joint model is over the augmented state `(s, i)` and action `a`.
//! The transition term compares `p(s', i' | s, i, a)` with the product of
//! the marginal `p(s' | s, a)` and `p(i' | s, i, a)`; the reward term
//! compares `p(r | s, i, a)` with `p(r | s, a)`. Marginals over `i` use the
//! supplied weighting of `(s, i, a)`, which also weights the expectation.

use std::collections::HashMap;

use crate::dp::{occupancy, PolicyTable, TabularMdp};
use crate::error::{check_dim, Error, Result};

const MODULE: &str = "voi";

#[derive(Debug, Clone, PartialEq)]
pub struct JointModel {
    pub n_s: usize,
    pub n_i: usize,
    pub n_a: usize,
    /// `transitions[cell]` lists `((s', i'), p)`, `cell = (s·n_i + i)·n_a + a`.
    pub transitions: Vec<Vec<((usize, usize), f64)>>,
    /// `rewards[cell]` lists `(r, p)`.
    pub rewards: Vec<Vec<(f64, f64)>>,
}

impl JointModel {
    pub fn cell(&self, s: usize, i: usize, a: usize) -> usize {
        (s * self.n_i + i) * self.n_a + a
    }

    pub fn n_cells(&self) -> usize {
        self.n_s * self.n_i * self.n_a
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_cells();
        if n == 0 {
            return Err(Error::invalid(MODULE, "joint model has an empty space"));
        }
        check_dim(MODULE, "transition table", n, self.transitions.len())?;
        check_dim(MODULE, "reward table", n, self.rewards.len())?;
        for (c, row) in self.transitions.iter().enumerate() {
            let mut tot = 0.0;
            for &((s, i), p) in row {
                if s >= self.n_s || i >= self.n_i || !(p >= 0.0) {
                    return Err(Error::invalid(MODULE, format!("bad transition entry in cell {c}")));
                }
                tot += p;
            }
            if (tot - 1.0).abs() > 1e-9 {
                return Err(Error::invalid(MODULE, format!("transition row {c} sums to {tot}")));
            }
        }
        for (c, row) in self.rewards.iter().enumerate() {
            let tot: f64 = row.iter().map(|e| e.1).sum();
            if row.iter().any(|e| !(e.1 >= 0.0) || !e.0.is_finite()) || (tot - 1.0).abs() > 1e-9 {
                return Err(Error::invalid(MODULE, format!("reward row {c} is not a distribution")));
            }
        }
        Ok(())
    }

    /// Augmented-state MDP with state `s·n_i + i` and expected rewards.
    pub fn to_mdp(&self, gamma: f64, init: Vec<f64>) -> Result<TabularMdp> {
        self.validate()?;
        let mut rows = Vec::with_capacity(self.n_cells());
        let mut r = Vec::with_capacity(self.n_cells());
        for c in 0..self.n_cells() {
            rows.push(self.transitions[c].iter().map(|&((s, i), p)| (s * self.n_i + i, p)).collect());
            r.push(self.rewards[c].iter().map(|&(v, p)| v * p).sum());
        }
        TabularMdp::new(self.n_s * self.n_i, self.n_a, rows, r, gamma, init)
    }
}

/// Normalised discounted occupancy of `pi` (over augmented states) times
/// `pi(a | s̃)`, as a weighting of joint cells.
pub fn occupancy_weighting(model: &JointModel, pi: &PolicyTable, gamma: f64, init: Vec<f64>) -> Result<Vec<f64>> {
    let mdp = model.to_mdp(gamma, init)?;
    let d = occupancy(&mdp, pi)?;
    let tot: f64 = d.iter().sum();
    let mut w = vec![0.0; model.n_cells()];
    for (sx, &ds) in d.iter().enumerate() {
        for (a, p) in pi.actions(sx) {
            w[sx * model.n_a + a] += ds * p / tot;
        }
    }
    Ok(w)
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ItvoiOptions {
    /// Additive smoothing of every conditional over the union of supports.
    pub laplace: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ItvoiReport {
    pub transition_kl: f64,
    pub reward_kl: f64,
    pub total: f64,
    /// Why a term is infinite, if one is.
    pub diagnostic: Option<String>,
}

fn reward_key(r: f64) -> u64 {
    if r == 0.0 { 0.0f64 } else { r }.to_bits()
}

fn smooth<K: Copy + Eq + std::hash::Hash>(p: &HashMap<K, f64>, support: &[K], eps: Option<f64>) -> HashMap<K, f64> {
    match eps {
        None => p.clone(),
        Some(e) => {
            let tot: f64 = support.iter().map(|k| p.get(k).copied().unwrap_or(0.0) + e).sum();
            support.iter().map(|&k| (k, (p.get(&k).copied().unwrap_or(0.0) + e) / tot)).collect()
        }
    }
}

/// `Σ p log(p / q)` with infinity when `q = 0 < p`.
fn kl_term(p: f64, q: f64) -> f64 {
    if p <= 0.0 {
        0.0
    } else if q <= 0.0 {
        f64::INFINITY
    } else {
        p * (p / q).ln()
    }
}

pub fn itvoi(model: &JointModel, weights: &[f64], opts: ItvoiOptions) -> Result<ItvoiReport> {
    model.validate()?;
    check_dim(MODULE, "ITVoI weighting", model.n_cells(), weights.len())?;
    let wsum: f64 = weights.iter().sum();
    if weights.iter().any(|w| !(*w >= 0.0)) || !(wsum > 0.0) {
        return Err(Error::invalid(MODULE, "ITVoI weighting must be non-negative with positive mass"));
    }
    let (ns, ni, na) = (model.n_s, model.n_i, model.n_a);
    let mut diagnostic = None;

    let mut trans_kl = 0.0;
    let mut rew_kl = 0.0;
    for s in 0..ns {
        for a in 0..na {
            let cells: Vec<(usize, f64)> = (0..ni).map(|i| (model.cell(s, i, a), weights[model.cell(s, i, a)] / wsum)).collect();
            let mass: f64 = cells.iter().map(|c| c.1).sum();
            if mass <= 0.0 {
                continue;
            }
            // Marginals over i under the weighting.
            let mut t_s: HashMap<usize, f64> = HashMap::new();
            let mut t_r: HashMap<u64, f64> = HashMap::new();
            for &(c, w) in &cells {
                for &((sn, _), p) in &model.transitions[c] {
                    *t_s.entry(sn).or_default() += w / mass * p;
                }
                for &(r, p) in &model.rewards[c] {
                    *t_r.entry(reward_key(r)).or_default() += w / mass * p;
                }
            }
            let s_support: Vec<usize> = {
                let mut v: Vec<usize> = t_s.keys().copied().collect();
                v.sort_unstable();
                v
            };
            let r_support: Vec<u64> = {
                let mut v: Vec<u64> = t_r.keys().copied().collect();
                v.sort_unstable();
                v
            };
            let t_s = smooth(&t_s, &s_support, opts.laplace);
            let t_r = smooth(&t_r, &r_support, opts.laplace);

            for &(c, w) in &cells {
                if w <= 0.0 {
                    continue;
                }
                let mut joint: HashMap<(usize, usize), f64> = HashMap::new();
                let mut t_i: HashMap<usize, f64> = HashMap::new();
                for &((sn, inx), p) in &model.transitions[c] {
                    *joint.entry((sn, inx)).or_default() += p;
                    *t_i.entry(inx).or_default() += p;
                }
                let mut i_support: Vec<usize> = t_i.keys().copied().collect();
                i_support.sort_unstable();
                let t_i = smooth(&t_i, &i_support, opts.laplace);
                let mut keys: Vec<(usize, usize)> = joint.keys().copied().collect();
                keys.sort_unstable();
                for key in keys {
                    let p = joint[&key];
                    let q = t_s.get(&key.0).copied().unwrap_or(0.0) * t_i.get(&key.1).copied().unwrap_or(0.0);
                    let term = kl_term(p, q);
                    if term.is_infinite() && diagnostic.is_none() {
                        diagnostic = Some(format!("transition support mismatch at s={s}, a={a}, next={key:?}"));
                    }
                    trans_kl += w * term;
                }
                let mut rc: HashMap<u64, f64> = HashMap::new();
                for &(r, p) in &model.rewards[c] {
                    *rc.entry(reward_key(r)).or_default() += p;
                }
                let mut rkeys: Vec<u64> = rc.keys().copied().collect();
                rkeys.sort_unstable();
                for key in rkeys {
                    let term = kl_term(rc[&key], t_r.get(&key).copied().unwrap_or(0.0));
                    if term.is_infinite() && diagnostic.is_none() {
                        diagnostic = Some(format!("reward support mismatch at s={s}, a={a}, r={}", f64::from_bits(key)));
                    }
                    rew_kl += w * term;
                }
            }
        }
    }
    Ok(ItvoiReport {
        transition_kl: trans_kl,
        reward_kl: rew_kl,
        total: trans_kl + rew_kl,
        diagnostic,
    })
}

/// Predictability of the predecessor acceleration: cell `c` is a
/// `(follower state, control)` pair with weight `weights[c]` and
/// conditional law `cond[c]` over acceleration values.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictabilityModel {
    pub weights: Vec<f64>,
    pub cond: Vec<Vec<(f64, f64)>>,
}

impl PredictabilityModel {
    /// Empirical model from `(cell, acceleration)` samples; cells are
    /// weighted by visit frequency.
    pub fn from_samples(n_cells: usize, samples: &[(usize, f64)]) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::invalid(MODULE, "no samples for the predictability model"));
        }
        let mut counts: Vec<HashMap<u64, f64>> = vec![HashMap::new(); n_cells];
        for &(c, acc) in samples {
            if c >= n_cells {
                return Err(Error::invalid(MODULE, format!("sample cell {c} out of range")));
            }
            *counts[c].entry(reward_key(acc)).or_default() += 1.0;
        }
        let n = samples.len() as f64;
        let mut weights = Vec::with_capacity(n_cells);
        let mut cond = Vec::with_capacity(n_cells);
        for m in counts {
            let tot: f64 = m.values().sum();
            weights.push(tot / n);
            let mut row: Vec<(f64, f64)> = m.into_iter().map(|(k, v)| (f64::from_bits(k), v / tot)).collect();
            row.sort_by(|a, b| a.0.total_cmp(&b.0));
            cond.push(row);
        }
        Ok(PredictabilityModel { weights, cond })
    }
}

/// `E[−ln p(acc | S, u)]` under the model's weighting.
pub fn itvoi_vehicle(model: &PredictabilityModel) -> Result<f64> {
    check_dim(MODULE, "predictability weights", model.cond.len(), model.weights.len())?;
    let wsum: f64 = model.weights.iter().sum();
    if !(wsum > 0.0) || model.weights.iter().any(|w| !(*w >= 0.0)) {
        return Err(Error::invalid(MODULE, "predictability weights must be non-negative with positive mass"));
    }
    let mut h = 0.0;
    for (w, row) in model.weights.iter().zip(&model.cond) {
        if *w <= 0.0 {
            continue;
        }
        let tot: f64 = row.iter().map(|e| e.1).sum();
        if (tot - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(MODULE, "conditional acceleration law does not sum to 1"));
        }
        for &(_, p) in row {
            if p > 0.0 {
                h -= w / wsum * p * p.ln();
            }
        }
    }
    Ok(h)
}
