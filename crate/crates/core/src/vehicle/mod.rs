//! Predecessor/follower longitudinal model.
//!
//! The follower state is `x = [e_p, e_v, acc]` with
//!
//! ```text
//! x_{k+1} = A x_k + B u_k + C acc_pred_k
//! A = [[1, T, -hT], [0, 1, -T], [0, 0, 1 - T/ρ]],  B = [0, 0, T/ρ],  C = [0, T, 0]
//! ```
//!
//! The predecessor's own first-order lag uses the same forward-Euler form,
//! `acc' = (1 - T/ρ) acc + (T/ρ) u`.

mod env;
mod observe;
mod spec;
mod tabular;
mod trajectory;

use serde::{Deserialize, Serialize};

pub use env::{FollowingEnv, PredecessorSource};
pub use observe::{observe, ObservationHistory, ObservationModel};
pub use spec::{following_spec, predecessor_exo, PredecessorModel};
pub use tabular::{Axis, GridPolicy, Lookup, VehicleGridConfig, VehicleGridModel};
pub use trajectory::{load_trajectory, synth_stop_and_go, ColumnMap, PredecessorTrajectory, StopAndGoConfig, TrajectorySource};

use crate::error::{Error, Result};

const MODULE: &str = "vehicle";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VehicleParams {
    /// Driveline time constant ρ (s).
    pub rho: f64,
    /// Desired time gap h (s).
    pub h: f64,
    /// Standstill distance σ (m).
    pub sigma: f64,
    /// Predecessor length (m).
    pub l_pred: f64,
    /// Control interval T (s).
    pub t: f64,
    pub u_max: f64,
    pub acc_max: f64,
}

impl Default for VehicleParams {
    fn default() -> Self {
        VehicleParams {
            rho: 0.5,
            h: 1.0,
            sigma: 2.0,
            l_pred: 5.0,
            t: 0.1,
            u_max: 3.0,
            acc_max: 3.0,
        }
    }
}

impl VehicleParams {
    pub fn validate(&self) -> Result<()> {
        let all = [self.rho, self.h, self.sigma, self.l_pred, self.t, self.u_max, self.acc_max];
        if all.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid(MODULE, "vehicle parameters must be finite"));
        }
        if !(self.rho > 0.0 && self.t > 0.0 && self.t < self.rho) {
            return Err(Error::invalid(
                MODULE,
                format!("need rho > 0, T > 0 and T < rho (got T={}, rho={})", self.t, self.rho),
            ));
        }
        if self.h < 0.0 || self.u_max <= 0.0 || self.acc_max <= 0.0 {
            return Err(Error::invalid(MODULE, "h must be >= 0, u_max and acc_max > 0"));
        }
        Ok(())
    }

    /// `1 - T/ρ`.
    pub fn decay(&self) -> f64 {
        1.0 - self.t / self.rho
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardWeights {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub e_p_max: f64,
    pub e_v_max: f64,
    /// Normalised terms below this value are squared.
    pub huber_delta: Option<f64>,
}

impl Default for RewardWeights {
    fn default() -> Self {
        RewardWeights {
            a: 1.0,
            b: 1.0,
            c: 1.0,
            e_p_max: 15.0,
            e_v_max: 10.0,
            huber_delta: None,
        }
    }
}

impl RewardWeights {
    pub fn validate(&self) -> Result<()> {
        let all = [self.a, self.b, self.c, self.e_p_max, self.e_v_max];
        if all.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
            return Err(Error::invalid(MODULE, "reward weights and nominal maxima must be positive"));
        }
        if let Some(d) = self.huber_delta {
            if !(d > 0.0) {
                return Err(Error::invalid(MODULE, "huber_delta must be positive"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct VehicleState {
    pub e_p: f64,
    pub e_v: f64,
    pub acc: f64,
}

impl VehicleState {
    pub fn new(e_p: f64, e_v: f64, acc: f64) -> Self {
        VehicleState { e_p, e_v, acc }
    }

    pub fn from_slice(x: &[f64]) -> Self {
        VehicleState::new(x[0], x[1], x[2])
    }

    pub fn to_vec(self) -> Vec<f64> {
        vec![self.e_p, self.e_v, self.acc]
    }
}

/// One control interval of the follower. The flag reports whether the new
/// acceleration was clamped to `±acc_max`.
pub fn dynamics_step(x: VehicleState, u: f64, acc_pred: f64, p: &VehicleParams) -> (VehicleState, bool) {
    let t = p.t;
    let e_p = x.e_p + t * x.e_v - p.h * t * x.acc;
    let e_v = x.e_v - t * x.acc + t * acc_pred;
    let acc = p.decay() * x.acc + (t / p.rho) * u;
    let clamped_acc = acc.clamp(-p.acc_max, p.acc_max);
    (VehicleState::new(e_p, e_v, clamped_acc), clamped_acc != acc)
}

/// Predecessor acceleration recursion (forward-Euler first-order lag).
pub fn predecessor_acc_step(acc_prev: f64, u_prev: f64, p_pred: &VehicleParams) -> f64 {
    p_pred.decay() * acc_prev + (p_pred.t / p_pred.rho) * u_prev
}

/// Constant time-headway spacing `σ + h v`.
pub fn desired_headway(v: f64, p: &VehicleParams) -> f64 {
    p.sigma + p.h * v
}

/// Gap `d = p_pred - p - L`.
pub fn headway(p_pred: f64, p: f64, l_pred: f64) -> f64 {
    p_pred - p - l_pred
}

/// `(d - d_σ, v_pred - v)`.
pub fn control_errors(d: f64, d_sigma: f64, v_pred: f64, v: f64) -> (f64, f64) {
    (d - d_sigma, v_pred - v)
}

/// Jerk `(u - acc)/ρ`.
pub fn jerk(x: &VehicleState, u: f64, p: &VehicleParams) -> f64 {
    (u - x.acc) / p.rho
}

fn shaped(z: f64, delta: Option<f64>) -> f64 {
    let t = z.abs();
    match delta {
        Some(d) if t < d => t * t,
        _ => t,
    }
}

/// `-(|e_p/ê_p| + a|e_v/ê_v| + b|u/u_max| + c|j/(2 acc_max/T)|)`.
pub fn reward(x: &VehicleState, u: f64, p: &VehicleParams, w: &RewardWeights) -> f64 {
    let d = w.huber_delta;
    let j = jerk(x, u, p);
    -(shaped(x.e_p / w.e_p_max, d)
        + w.a * shaped(x.e_v / w.e_v_max, d)
        + w.b * shaped(u / p.u_max, d)
        + w.c * shaped(j / (2.0 * p.acc_max / p.t), d))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn matrix_examples() {
        let p = VehicleParams::default();
        let (x, _) = dynamics_step(VehicleState::default(), 0.0, 0.0, &p);
        assert_eq!(x, VehicleState::default());
        let (x, _) = dynamics_step(VehicleState::default(), 1.0, 0.0, &p);
        assert_abs_diff_eq!(x.acc, 0.2, epsilon = 1e-12);
        assert_eq!((x.e_p, x.e_v), (0.0, 0.0));
        let (x, _) = dynamics_step(VehicleState::new(1.0, 0.5, 0.2), 0.0, 0.3, &p);
        assert_abs_diff_eq!(x.e_p, 1.03, epsilon = 1e-12);
        assert_abs_diff_eq!(x.e_v, 0.51, epsilon = 1e-12);
        assert_abs_diff_eq!(x.acc, 0.16, epsilon = 1e-12);
    }

    #[test]
    fn acceleration_clamped() {
        let p = VehicleParams::default();
        let (x, c) = dynamics_step(VehicleState::new(0.0, 0.0, 3.0), 100.0, 0.0, &p);
        assert!(c);
        assert_eq!(x.acc, 3.0);
    }

    #[test]
    fn predecessor_lag() {
        let p = VehicleParams::default();
        assert_eq!(predecessor_acc_step(0.0, 0.0, &p), 0.0);
        assert_abs_diff_eq!(predecessor_acc_step(0.2, 1.0, &p), 0.36, epsilon = 1e-12);
        assert_abs_diff_eq!(predecessor_acc_step(0.7, 0.7, &p), 0.7, epsilon = 1e-15);
    }

    #[test]
    fn headway_and_errors() {
        let p = VehicleParams::default();
        assert_eq!(desired_headway(10.0, &p), 12.0);
        assert_eq!(desired_headway(0.0, &p), 2.0);
        let p0 = VehicleParams { h: 0.0, ..p };
        assert_eq!(desired_headway(25.0, &p0), 2.0);
        assert_eq!(headway(20.0, 10.0, 4.0), 6.0);
        assert_eq!(control_errors(6.0, 12.0, 10.0, 8.0), (-6.0, 2.0));
        assert_eq!(control_errors(12.0, 12.0, 8.0, 8.0), (0.0, 0.0));
    }

    #[test]
    fn reward_examples() {
        let p = VehicleParams::default();
        let w = RewardWeights::default();
        assert_eq!(reward(&VehicleState::default(), 0.0, &p, &w), 0.0);
        assert_abs_diff_eq!(reward(&VehicleState::new(1.5, 1.0, 0.0), 0.0, &p, &w), -0.2, epsilon = 1e-12);
        let hub = RewardWeights { huber_delta: Some(1.0), ..w };
        assert_abs_diff_eq!(reward(&VehicleState::new(1.5, 1.0, 0.0), 0.0, &p, &hub), -0.02, epsilon = 1e-12);
    }

    #[test]
    fn invalid_params() {
        assert!(VehicleParams { t: 0.6, ..Default::default() }.validate().is_err());
        assert!(VehicleParams::default().validate().is_ok());
        assert!(RewardWeights { a: 0.0, ..Default::default() }.validate().is_err());
    }
}
