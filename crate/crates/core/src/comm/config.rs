use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::MODULE;

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

/// How the VoI term of the last slot's reward is weighted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HowVoiWeight {
    /// Multiplied by `γ^{1−T}` so that the discounted slot sum of per-slot
    /// rewards reproduces the per-interval reward exactly.
    #[default]
    Compensated,
    /// Added unscaled.
    Literal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelConfig {
    /// Path gain at 1 m, in dB.
    pub pl0_db: f64,
    /// Exponent of the direct V2I and V2V links.
    pub exp_direct: f64,
    /// Exponent of every interference path.
    pub exp_interference: f64,
    pub shadowing_db: f64,
    /// Rayleigh fading (unit-mean exponential power); `false` fixes h = 1.
    pub rayleigh: bool,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        ChannelConfig {
            pl0_db: -47.87,
            exp_direct: 2.0,
            exp_interference: 3.0,
            shadowing_db: 3.0,
            rayleigh: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkConfig {
    /// V2I links, one pre-assigned sub-channel each.
    pub m: usize,
    /// V2V links.
    pub l: usize,
    /// Sub-channel bandwidth (Hz).
    pub bandwidth: f64,
    /// CAM size (bits).
    pub cam_bits: f64,
    /// Noise power (W).
    pub sigma2: f64,
    /// V2I transmit power (W).
    pub p_i: f64,
    /// Maximum V2V transmit power (W).
    pub p_v_max: f64,
    /// Communication intervals per control interval.
    pub t_slots: usize,
    /// Communication interval (s).
    pub dt: f64,
    /// Control interval (s); must equal `dt · t_slots`.
    pub control_t: f64,
    /// Throughput weight; the default expresses rates in Mbit/s.
    pub kappa1: f64,
    pub kappa2: f64,
    pub gamma_cm: f64,
    pub how_voi_weight: HowVoiWeight,
    pub channel: ChannelConfig,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        NetworkConfig {
            m: 1,
            l: 1,
            bandwidth: 180e3,
            cam_bits: 3200.0,
            sigma2: dbm_to_watts(-114.0),
            p_i: 0.2,
            p_v_max: 0.01,
            t_slots: 10,
            dt: 0.01,
            control_t: 0.1,
            kappa1: 1e-6,
            kappa2: 1.0,
            gamma_cm: 0.99,
            how_voi_weight: HowVoiWeight::Compensated,
            channel: ChannelConfig::default(),
        }
    }
}

impl NetworkConfig {
    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.l == 0 || self.t_slots == 0 {
            return Err(Error::invalid(MODULE, "M, L and T_slots must be >= 1"));
        }
        let pos = |x: f64| x.is_finite() && x > 0.0;
        if !(pos(self.bandwidth) && pos(self.cam_bits) && pos(self.dt) && pos(self.p_i) && pos(self.p_v_max)) {
            return Err(Error::invalid(MODULE, "bandwidth, CAM size, dt and powers must be positive"));
        }
        if ((self.dt * self.t_slots as f64) - self.control_t).abs() > 1e-9 * self.control_t.abs().max(1.0) {
            return Err(Error::invalid(
                MODULE,
                format!("dt * T_slots = {} does not equal the control interval {}", self.dt * self.t_slots as f64, self.control_t),
            ));
        }
        if !(self.gamma_cm > 0.0 && self.gamma_cm <= 1.0) {
            return Err(Error::invalid(MODULE, "gamma_cm must lie in (0, 1]"));
        }
        if !(self.sigma2.is_finite() && self.sigma2 > 0.0) || !self.kappa1.is_finite() || !self.kappa2.is_finite() {
            return Err(Error::invalid(MODULE, "noise power and weights must be finite"));
        }
        if self.channel.shadowing_db < 0.0 {
            return Err(Error::invalid(MODULE, "shadowing std must be non-negative"));
        }
        Ok(())
    }
}

/// Link distances in metres. V2I transmitter `m`, V2V pair `l`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    /// V2I transmitter to BS, `[m]`.
    pub v2i: Vec<f64>,
    /// V2V transmitter to its receiver, `[l]`.
    pub v2v: Vec<f64>,
    /// V2V transmitter to BS, `[l]`.
    pub v2v_to_bs: Vec<f64>,
    /// V2I transmitter to V2V receiver, `[m][l]`.
    pub v2i_to_v2v: Vec<Vec<f64>>,
    /// V2V transmitter `j` to V2V receiver `l`, `[j][l]`; the diagonal is unused.
    pub v2v_cross: Vec<Vec<f64>>,
}

impl Geometry {
    /// 150 m to the BS, 15 m V2V pairs, 20 m from each V2I transmitter to
    /// each V2V receiver, 50 m between distinct V2V pairs.
    pub fn standard(m: usize, l: usize) -> Self {
        Geometry {
            v2i: vec![150.0; m],
            v2v: vec![15.0; l],
            v2v_to_bs: vec![150.0; l],
            v2i_to_v2v: vec![vec![20.0; l]; m],
            v2v_cross: vec![vec![50.0; l]; l],
        }
    }

    pub fn validate(&self, m: usize, l: usize) -> Result<()> {
        let shape_ok = self.v2i.len() == m
            && self.v2v.len() == l
            && self.v2v_to_bs.len() == l
            && self.v2i_to_v2v.len() == m
            && self.v2i_to_v2v.iter().all(|r| r.len() == l)
            && self.v2v_cross.len() == l
            && self.v2v_cross.iter().all(|r| r.len() == l);
        if !shape_ok {
            return Err(Error::invalid(MODULE, "geometry shape does not match M and L"));
        }
        let mut all: Vec<f64> = self.v2i.iter().chain(&self.v2v).chain(&self.v2v_to_bs).copied().collect();
        all.extend(self.v2i_to_v2v.iter().flatten());
        for j in 0..l {
            for i in 0..l {
                if i != j {
                    all.push(self.v2v_cross[j][i]);
                }
            }
        }
        if all.iter().any(|&d| !(d.is_finite() && d > 0.0)) {
            return Err(Error::invalid(MODULE, "link distances must be positive"));
        }
        Ok(())
    }
}
