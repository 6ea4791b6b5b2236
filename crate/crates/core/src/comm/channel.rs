//! Large-scale path loss with log-normal shadowing times small-scale fading.

use rand_distr::{Distribution as _, Exp1, StandardNormal};

use super::config::{Geometry, NetworkConfig};
use super::MODULE;
use crate::error::{Error, Result};
use crate::rng::{rng_from_seed, Rng};

/// `10^{(PL0 − 10 n log10 d + X)/10}`.
pub fn path_gain(pl0_db: f64, exponent: f64, d: f64, shadow_db: f64) -> Result<f64> {
    if !(d > 0.0) {
        return Err(Error::invalid(MODULE, format!("link distance {d} must be positive")));
    }
    Ok(10f64.powf((pl0_db - 10.0 * exponent * d.log10() + shadow_db) / 10.0))
}

/// Frequency-independent large-scale gains `α`.
#[derive(Debug, Clone, PartialEq)]
pub struct LargeScale {
    pub v2i: Vec<f64>,
    pub v2v: Vec<f64>,
    pub v2v_to_bs: Vec<f64>,
    pub v2i_to_v2v: Vec<Vec<f64>>,
    pub v2v_cross: Vec<Vec<f64>>,
}

/// Instantaneous gains for one communication interval.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelState {
    /// V2I link `m` to the BS, `[m]`.
    pub v2i: Vec<f64>,
    /// V2V link `l` on sub-channel `m`, `[l][m]`.
    pub v2v: Vec<Vec<f64>>,
    /// V2V transmitter `l` to the BS on sub-channel `m`, `[l][m]`.
    pub v2v_to_bs: Vec<Vec<f64>>,
    /// V2I transmitter `m` to V2V receiver `l`, `[m][l]`.
    pub v2i_to_v2v: Vec<Vec<f64>>,
    /// V2V transmitter `j` to receiver `l` on sub-channel `m`, `[j][l][m]`.
    pub v2v_cross: Vec<Vec<Vec<f64>>>,
}

impl ChannelState {
    pub fn m(&self) -> usize {
        self.v2i.len()
    }

    pub fn l(&self) -> usize {
        self.v2v.len()
    }

    /// Number of scalar gains, excluding the unused cross diagonal.
    pub fn n_fields(m: usize, l: usize) -> usize {
        m + 3 * l * m + l * l.saturating_sub(1) * m
    }

    /// Gains in a fixed order: V2I, V2V, V2V→BS, V2I→V2V, then cross terms
    /// with `j ≠ l`.
    pub fn flatten(&self) -> Vec<f64> {
        let (m, l) = (self.m(), self.l());
        let mut v = self.v2i.clone();
        v.extend(self.v2v.iter().flatten());
        v.extend(self.v2v_to_bs.iter().flatten());
        v.extend(self.v2i_to_v2v.iter().flatten());
        for j in 0..l {
            for i in 0..l {
                if i != j {
                    v.extend(&self.v2v_cross[j][i][..m]);
                }
            }
        }
        v
    }

    pub fn unflatten(m: usize, l: usize, v: &[f64]) -> Result<Self> {
        crate::error::check_dim(MODULE, "flattened channel", Self::n_fields(m, l), v.len())?;
        let mut it = v.iter().copied();
        let mut take = |n: usize| -> Vec<f64> { (0..n).map(|_| it.next().unwrap()).collect() };
        let v2i = take(m);
        let v2v = (0..l).map(|_| take(m)).collect();
        let v2v_to_bs = (0..l).map(|_| take(m)).collect();
        let v2i_to_v2v = (0..m).map(|_| take(l)).collect();
        let mut v2v_cross = vec![vec![vec![0.0; m]; l]; l];
        for (j, row) in v2v_cross.iter_mut().enumerate() {
            for (i, cell) in row.iter_mut().enumerate() {
                if i != j {
                    *cell = take(m);
                }
            }
        }
        Ok(ChannelState {
            v2i,
            v2v,
            v2v_to_bs,
            v2i_to_v2v,
            v2v_cross,
        })
    }
}

fn shadow(cfg: &NetworkConfig, rng: &mut Rng) -> f64 {
    let s = cfg.channel.shadowing_db;
    if s > 0.0 {
        let z: f64 = StandardNormal.sample(rng);
        s * z
    } else {
        0.0
    }
}

impl LargeScale {
    pub fn sample(geo: &Geometry, cfg: &NetworkConfig, rng: &mut Rng) -> Result<Self> {
        cfg.validate()?;
        geo.validate(cfg.m, cfg.l)?;
        let ch = &cfg.channel;
        let g = |n: f64, d: f64, rng: &mut Rng| path_gain(ch.pl0_db, n, d, shadow(cfg, rng));
        let v2i = geo.v2i.iter().map(|&d| g(ch.exp_direct, d, rng)).collect::<Result<_>>()?;
        let v2v = geo.v2v.iter().map(|&d| g(ch.exp_direct, d, rng)).collect::<Result<_>>()?;
        let v2v_to_bs = geo.v2v_to_bs.iter().map(|&d| g(ch.exp_interference, d, rng)).collect::<Result<_>>()?;
        let v2i_to_v2v = geo
            .v2i_to_v2v
            .iter()
            .map(|row| row.iter().map(|&d| g(ch.exp_interference, d, rng)).collect::<Result<Vec<_>>>())
            .collect::<Result<_>>()?;
        let mut v2v_cross = vec![vec![0.0; cfg.l]; cfg.l];
        for j in 0..cfg.l {
            for i in 0..cfg.l {
                if i != j {
                    v2v_cross[j][i] = g(ch.exp_interference, geo.v2v_cross[j][i], rng)?;
                }
            }
        }
        Ok(LargeScale {
            v2i,
            v2v,
            v2v_to_bs,
            v2i_to_v2v,
            v2v_cross,
        })
    }

    /// Gains with fading powers taken in order from `h`, which must supply
    /// [`ChannelState::n_fields`] values.
    pub fn with_fading(&self, h: &[f64]) -> Result<ChannelState> {
        let (m, l) = (self.v2i.len(), self.v2v.len());
        crate::error::check_dim(MODULE, "fading vector", ChannelState::n_fields(m, l), h.len())?;
        let mut alpha = self.v2i.clone();
        for &a in &self.v2v {
            alpha.extend(std::iter::repeat_n(a, m));
        }
        for &a in &self.v2v_to_bs {
            alpha.extend(std::iter::repeat_n(a, m));
        }
        alpha.extend(self.v2i_to_v2v.iter().flatten());
        for j in 0..l {
            for i in 0..l {
                if i != j {
                    alpha.extend(std::iter::repeat_n(self.v2v_cross[j][i], m));
                }
            }
        }
        let g: Vec<f64> = alpha.iter().zip(h).map(|(a, h)| a * h).collect();
        ChannelState::unflatten(m, l, &g)
    }

    /// Draws one interval's small-scale fading.
    pub fn slot(&self, cfg: &NetworkConfig, rng: &mut Rng) -> ChannelState {
        let n = ChannelState::n_fields(self.v2i.len(), self.v2v.len());
        let h: Vec<f64> = (0..n)
            .map(|_| if cfg.channel.rayleigh { Exp1.sample(rng) } else { 1.0 })
            .collect();
        self.with_fading(&h).expect("fading vector has the right length")
    }

    /// Fading from uniforms `u ∈ (0,1]` via `h = −ln u`.
    pub fn slot_from_uniforms(&self, cfg: &NetworkConfig, u: &[f64]) -> Result<ChannelState> {
        let h: Vec<f64> = u
            .iter()
            .map(|&x| if cfg.channel.rayleigh { -(x.max(f64::MIN_POSITIVE)).ln() } else { 1.0 })
            .collect();
        self.with_fading(&h)
    }
}

/// Large-scale draw plus one interval of fading.
pub fn sample_channel(geo: &Geometry, cfg: &NetworkConfig, seed: u64) -> Result<ChannelState> {
    let mut rng = rng_from_seed(seed);
    let ls = LargeScale::sample(geo, cfg, &mut rng)?;
    Ok(ls.slot(cfg, &mut rng))
}
