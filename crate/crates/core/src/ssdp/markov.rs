//! Empirical and structural tests of the Markov property.
//!
//! The empirical test compares next-state frequencies conditioned on the
//! current (state, action) cell against frequencies additionally
//! conditioned on the previous cell pair. Within each current context a
//! chi-square test of independence between history and next cell is run on
//! Laplace-smoothed counts; the statistics and degrees of freedom are summed
//! over contexts.

use std::collections::BTreeMap;

use rand::Rng as _;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use super::{ExoKind, ExoStream, Grid, Horizon, SsdpSpec};
use crate::error::{check_dim, Error, Result};
use crate::rng::rng_from_seed;

const MODULE: &str = "ssdp";
const SIGNIFICANCE: f64 = 0.01;
const MAX_EPISODE: usize = 50;

pub struct MarkovGrids {
    pub state: Grid,
    pub action: Grid,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarkovReport {
    /// Every ingredient of `W̃_k` lies in `{S_k, a_k, ζ_k}`.
    pub structural_markov: bool,
    /// The structural test decided the verdict (exogenous process is iid).
    pub structural_authoritative: bool,
    pub chi_square: f64,
    pub dof: usize,
    pub p_value: f64,
    pub transitions: usize,
    pub markov: bool,
}

pub fn check_markov(
    spec: &SsdpSpec,
    grids: &MarkovGrids,
    n_samples: usize,
    seed: u64,
) -> Result<MarkovReport> {
    check_dim(MODULE, "state grid", spec.state_dim(), grids.state.dim())?;
    check_dim(MODULE, "action grid", spec.action_dim(), grids.action.dim())?;
    if n_samples < 10_000 {
        return Err(Error::invalid(MODULE, "check_markov needs n_samples >= 10^4"));
    }
    let ep_len = match spec.horizon() {
        Horizon::Finite(h) => h.min(MAX_EPISODE),
        Horizon::Unbounded => MAX_EPISODE,
    };
    let mut rng = rng_from_seed(seed);
    // counts[(s, a)][(s_prev, a_prev)][s_next]
    let mut counts: BTreeMap<(usize, usize), BTreeMap<(usize, usize), BTreeMap<usize, u64>>> =
        BTreeMap::new();
    let mut transitions = 0;
    while transitions < n_samples {
        let mut s = spec.init().sample(&mut rng)?;
        let mut stream = ExoStream::new(spec.exo(), &mut rng);
        let mut prev: Option<(usize, usize)> = None;
        for _ in 0..ep_len {
            let ai = rng.random_range(0..grids.action.len());
            let a = grids.action.point(ai);
            let w = stream.draw(&s, &a, &mut rng)?;
            let (s_next, _) = spec.step(&s, &a, &w)?;
            let (si, _) = grids.state.locate(&s)?;
            let (ni, _) = grids.state.locate(&s_next)?;
            if let Some(h) = prev {
                *counts
                    .entry((si, ai))
                    .or_default()
                    .entry(h)
                    .or_default()
                    .entry(ni)
                    .or_default() += 1;
                transitions += 1;
            }
            prev = Some((si, ai));
            s = s_next;
            if transitions >= n_samples {
                break;
            }
        }
    }

    let mut stat = 0.0;
    let mut dof = 0usize;
    for by_hist in counts.values() {
        let mut cols: Vec<usize> = by_hist.values().flat_map(|m| m.keys().copied()).collect();
        cols.sort_unstable();
        cols.dedup();
        let rows = by_hist.len();
        if rows < 2 || cols.len() < 2 {
            continue;
        }
        let table: Vec<Vec<f64>> = by_hist
            .values()
            .map(|m| cols.iter().map(|c| *m.get(c).unwrap_or(&0) as f64 + 1.0).collect())
            .collect();
        let total: f64 = table.iter().flatten().sum();
        let row_sums: Vec<f64> = table.iter().map(|r| r.iter().sum()).collect();
        let col_sums: Vec<f64> = (0..cols.len()).map(|j| table.iter().map(|r| r[j]).sum()).collect();
        for (i, row) in table.iter().enumerate() {
            for (j, &o) in row.iter().enumerate() {
                let e = row_sums[i] * col_sums[j] / total;
                stat += (o - e) * (o - e) / e;
            }
        }
        dof += (rows - 1) * (cols.len() - 1);
    }
    let p_value = if dof == 0 {
        1.0
    } else {
        let chi = ChiSquared::new(dof as f64)
            .map_err(|e| Error::invalid(MODULE, format!("chi-square: {e}")))?;
        (1.0 - chi.cdf(stat)).clamp(0.0, 1.0)
    };
    let structural = spec.exo().structurally_markov();
    let authoritative = spec.exo().kind() == ExoKind::Iid;
    let markov = if authoritative {
        structural
    } else {
        p_value >= SIGNIFICANCE
    };
    Ok(MarkovReport {
        structural_markov: structural,
        structural_authoritative: authoritative,
        chi_square: stat,
        dof,
        p_value,
        transitions,
        markov,
    })
}
