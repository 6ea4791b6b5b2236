//! Predecessor acceleration traces: synthetic stop-and-go and CSV ingestion.

use std::path::{Path, PathBuf};

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::MODULE;
use crate::error::{Error, Result};
use crate::rng::{rng_from_seed, Rng};

#[derive(Debug, Clone, PartialEq)]
pub enum TrajectorySource {
    Synthetic { seed: u64 },
    File { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredecessorTrajectory {
    pub dt: f64,
    /// `acc[k]` holds over `[k T, (k+1) T)`.
    pub acc: Vec<f64>,
    /// Velocity at the start of each interval; one entry longer than `acc`.
    pub velocity: Vec<f64>,
    pub source: TrajectorySource,
    /// Samples clipped to `±acc_max` during ingestion.
    pub clip_count: usize,
}

impl PredecessorTrajectory {
    pub fn len(&self) -> usize {
        self.acc.len()
    }

    pub fn is_empty(&self) -> bool {
        self.acc.is_empty()
    }

    /// Fraction of intervals with `|acc| <= tol`.
    pub fn zero_fraction(&self, tol: f64) -> f64 {
        if self.acc.is_empty() {
            return 0.0;
        }
        self.acc.iter().filter(|a| a.abs() <= tol).count() as f64 / self.acc.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StopAndGoConfig {
    /// Number of control intervals.
    pub duration: usize,
    pub dt: f64,
    pub v0: f64,
    /// Candidate acceleration magnitudes (m/s²).
    pub magnitudes: Vec<f64>,
    /// Inclusive dwell ranges in intervals.
    pub accel_dwell: (usize, usize),
    pub cruise_dwell: (usize, usize),
    pub brake_dwell: (usize, usize),
}

impl Default for StopAndGoConfig {
    fn default() -> Self {
        StopAndGoConfig {
            duration: 501,
            dt: 0.1,
            v0: 10.0,
            magnitudes: vec![1.0, 1.5],
            accel_dwell: (10, 30),
            cruise_dwell: (20, 60),
            brake_dwell: (10, 30),
        }
    }
}

impl StopAndGoConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || self.v0 < 0.0 || self.magnitudes.is_empty() {
            return Err(Error::invalid(MODULE, "stop-and-go needs dt > 0, v0 >= 0 and magnitudes"));
        }
        if self.magnitudes.iter().any(|m| !(m.is_finite() && *m >= 0.0)) {
            return Err(Error::invalid(MODULE, "stop-and-go magnitudes must be non-negative"));
        }
        for (lo, hi) in [self.accel_dwell, self.cruise_dwell, self.brake_dwell] {
            if lo == 0 || lo > hi {
                return Err(Error::invalid(MODULE, "dwell ranges need 1 <= min <= max"));
            }
        }
        Ok(())
    }
}

fn dwell(rng: &mut Rng, (lo, hi): (usize, usize)) -> usize {
    rng.random_range(lo..=hi)
}

/// Cruise, accelerate, cruise, brake, … with seeded magnitudes and dwell
/// times. A braking phase that would reverse the vehicle is cut so the
/// velocity stops exactly at zero.
pub fn synth_stop_and_go(cfg: &StopAndGoConfig, seed: u64) -> Result<PredecessorTrajectory> {
    cfg.validate()?;
    let mut rng = rng_from_seed(seed);
    let mut acc = Vec::with_capacity(cfg.duration);
    let mut velocity = Vec::with_capacity(cfg.duration + 1);
    let mut v = cfg.v0;
    velocity.push(v);
    let mut phase = 0usize;
    while acc.len() < cfg.duration {
        let (level, len) = match phase % 4 {
            0 | 2 => (0.0, dwell(&mut rng, cfg.cruise_dwell)),
            1 => {
                let m = cfg.magnitudes[rng.random_range(0..cfg.magnitudes.len())];
                (m, dwell(&mut rng, cfg.accel_dwell))
            }
            _ => {
                let m = cfg.magnitudes[rng.random_range(0..cfg.magnitudes.len())];
                (-m, dwell(&mut rng, cfg.brake_dwell))
            }
        };
        for _ in 0..len {
            if acc.len() == cfg.duration {
                break;
            }
            let mut a = level;
            if v + a * cfg.dt < 0.0 {
                a = -v / cfg.dt;
            }
            if v <= 0.0 && a < 0.0 {
                a = 0.0;
            }
            v = (v + a * cfg.dt).max(0.0);
            acc.push(a);
            velocity.push(v);
        }
        phase += 1;
    }
    Ok(PredecessorTrajectory {
        dt: cfg.dt,
        acc,
        velocity,
        source: TrajectorySource::Synthetic { seed },
        clip_count: 0,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnMap {
    pub time: String,
    pub velocity: String,
}

impl Default for ColumnMap {
    fn default() -> Self {
        ColumnMap {
            time: "time_s".into(),
            velocity: "velocity_mps".into(),
        }
    }
}

/// Reads a time/velocity CSV, resamples velocity linearly onto a `target_t`
/// grid and differentiates it. Accelerations beyond `±acc_max` are clipped
/// and counted.
pub fn load_trajectory(
    path: impl AsRef<Path>,
    columns: &ColumnMap,
    target_t: f64,
    acc_max: f64,
) -> Result<PredecessorTrajectory> {
    let path = path.as_ref();
    if !(target_t > 0.0) || !(acc_max > 0.0) {
        return Err(Error::invalid(MODULE, "target_T and acc_max must be positive"));
    }
    let mut rdr = csv::Reader::from_path(path)?;
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::invalid(MODULE, format!("{}: missing column {name:?}", path.display())))
    };
    let (ti, vi) = (col(&columns.time)?, col(&columns.velocity)?);
    let mut times = Vec::new();
    let mut vels = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let parse = |i: usize| -> Result<f64> {
            rec.get(i)
                .and_then(|x| x.trim().parse::<f64>().ok())
                .filter(|x| x.is_finite())
                .ok_or_else(|| Error::invalid(MODULE, format!("{}: bad value on data row {}", path.display(), line + 1)))
        };
        times.push(parse(ti)?);
        vels.push(parse(vi)?);
    }
    if times.is_empty() {
        return Err(Error::invalid(MODULE, format!("{}: no samples", path.display())));
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::invalid(MODULE, format!("{}: time column is not strictly increasing", path.display())));
    }
    let t0 = times[0];
    let t_end = *times.last().unwrap();
    let tol = 1e-9 * t_end.abs().max(1.0);
    let mut grid_v = Vec::new();
    let mut j = 0;
    for k in 0.. {
        let t = t0 + k as f64 * target_t;
        if t > t_end + tol {
            break;
        }
        while j + 1 < times.len() && times[j + 1] < t {
            j += 1;
        }
        let v = if j + 1 >= times.len() || t <= times[j] {
            vels[j.min(times.len() - 1)]
        } else {
            let f = ((t - times[j]) / (times[j + 1] - times[j])).clamp(0.0, 1.0);
            vels[j] + f * (vels[j + 1] - vels[j])
        };
        grid_v.push(v);
    }
    let mut clip_count = 0;
    let acc = grid_v
        .windows(2)
        .map(|w| {
            let a = (w[1] - w[0]) / target_t;
            let c = a.clamp(-acc_max, acc_max);
            if c != a {
                clip_count += 1;
            }
            c
        })
        .collect();
    Ok(PredecessorTrajectory {
        dt: target_t,
        acc,
        velocity: grid_v,
        source: TrajectorySource::File { path: path.to_path_buf() },
        clip_count,
    })
}
