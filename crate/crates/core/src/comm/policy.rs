//! Transmission policies and the predecessor signals they read.

use serde::{Deserialize, Serialize};

use crate::vehicle::VehicleParams;

/// Which predecessor quantity a communication decision looks at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CommSignal {
    /// The predecessor's control input `u_pred,k`.
    #[default]
    Input,
    /// The predecessor's acceleration `acc_pred,k`.
    Acceleration,
}

/// Recovers `u_pred,k` from consecutive accelerations by inverting the
/// predecessor lag; the last sample reuses the previous input.
pub fn predecessor_inputs(acc: &[f64], pred: &VehicleParams) -> Vec<f64> {
    let d = pred.decay();
    let mut u: Vec<f64> = acc.windows(2).map(|w| (w[1] - d * w[0]) / (1.0 - d)).collect();
    if let Some(&last) = u.last() {
        u.push(last);
    } else if !acc.is_empty() {
        u.push(acc[0]);
    }
    u
}

/// Decides `φ` per link from the CAM content of this control interval.
pub trait CommPolicy: Send + Sync {
    fn transmit(&self, link: usize, acc: f64, input: f64) -> bool;
    fn name(&self) -> String;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CommDecision {
    Always,
    Never,
    /// Suppresses the CAM when `|signal| <= gate`.
    Gated { gate: f64, signal: CommSignal },
}

pub fn policy_always_transmit() -> CommDecision {
    CommDecision::Always
}

/// Gate on the predecessor acceleration.
pub fn policy_voi_gated(gate: f64) -> CommDecision {
    CommDecision::Gated {
        gate,
        signal: CommSignal::Acceleration,
    }
}

pub const DEFAULT_GATE: f64 = 1e-3;

impl CommPolicy for CommDecision {
    fn transmit(&self, _link: usize, acc: f64, input: f64) -> bool {
        match *self {
            CommDecision::Always => true,
            CommDecision::Never => false,
            CommDecision::Gated { gate, signal } => {
                let x = match signal {
                    CommSignal::Acceleration => acc,
                    CommSignal::Input => input,
                };
                x.abs() > gate
            }
        }
    }

    fn name(&self) -> String {
        match *self {
            CommDecision::Always => "always".into(),
            CommDecision::Never => "never".into(),
            CommDecision::Gated { gate, .. } => format!("gated({gate})"),
        }
    }
}
