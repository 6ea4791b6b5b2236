//! Episode rollout, returns and trajectory export.

use std::io::Write;

use super::{ExoProcess, ExoStream, Policy, SsdpSpec};
use crate::error::{check_dim, Error, Result};
use crate::rng::rng_from_seed;

const MODULE: &str = "ssdp";

#[derive(Debug, Clone, PartialEq)]
pub struct TransitionRecord {
    pub s: Vec<f64>,
    pub a: Vec<f64>,
    pub w: Vec<f64>,
    pub r: f64,
    pub s_next: Vec<f64>,
    /// The policy output was outside the action box and got clamped.
    pub clamped: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub steps: Vec<TransitionRecord>,
    pub seed: u64,
    pub gamma: f64,
}

impl Trajectory {
    pub fn rewards(&self) -> Vec<f64> {
        self.steps.iter().map(|t| t.r).collect()
    }

    pub fn any_clamped(&self) -> bool {
        self.steps.iter().any(|t| t.clamped)
    }
}

/// Runs `policy` for exactly `horizon` steps with exogenous draws from
/// `exo_source`.
pub fn rollout(
    spec: &SsdpSpec,
    policy: &dyn Policy,
    exo_source: &ExoProcess,
    horizon: usize,
    seed: u64,
) -> Result<Trajectory> {
    if horizon == 0 {
        return Err(Error::invalid(MODULE, "rollout horizon must be >= 1"));
    }
    check_dim(MODULE, "exogenous source", spec.w_dim(), exo_source.w_dim())?;
    let mut rng = rng_from_seed(seed);
    let mut s = spec.init().sample(&mut rng)?;
    let mut stream = ExoStream::new(exo_source, &mut rng);
    let mut steps = Vec::with_capacity(horizon);
    for _ in 0..horizon {
        let mut a = policy.act(&s);
        check_dim(MODULE, "policy output", spec.action_dim(), a.len())?;
        let clamped = spec.clamp_action(&mut a);
        let w = stream.draw(&s, &a, &mut rng)?;
        let (s_next, r) = spec.step(&s, &a, &w)?;
        steps.push(TransitionRecord {
            s: std::mem::replace(&mut s, s_next.clone()),
            a,
            w,
            r,
            s_next,
            clamped,
        });
    }
    Ok(Trajectory {
        steps,
        seed,
        gamma: spec.gamma(),
    })
}

/// `Σ_l γ^l R_{l+1}`.
pub fn discounted_return(traj: &Trajectory, gamma: f64) -> f64 {
    let mut g = 0.0;
    let mut d = 1.0;
    for t in &traj.steps {
        g += d * t.r;
        d *= gamma;
    }
    g
}

/// Writes `step, s0.., a0.., w0.., r` with a header row.
pub fn write_trajectory_csv<W: Write>(traj: &Trajectory, out: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    let (ns, na, nw) = traj
        .steps
        .first()
        .map_or((0, 0, 0), |t| (t.s.len(), t.a.len(), t.w.len()));
    let mut header = vec!["step".to_string()];
    header.extend((0..ns).map(|i| format!("s{i}")));
    header.extend((0..na).map(|i| format!("a{i}")));
    header.extend((0..nw).map(|i| format!("w{i}")));
    header.push("r".into());
    wtr.write_record(&header)?;
    for (k, t) in traj.steps.iter().enumerate() {
        let mut row = vec![k.to_string()];
        row.extend(t.s.iter().chain(&t.a).chain(&t.w).map(|x| x.to_string()));
        row.push(t.r.to_string());
        wtr.write_record(&row)?;
    }
    wtr.flush().map_err(|e| Error::io("trajectory csv", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ssdp::{Distribution, FnDynamics, Horizon};

    fn noisy_walk() -> SsdpSpec {
        SsdpSpec::new(
            "walk",
            1,
            1,
            FnDynamics::new(|s, a, w| (vec![s[0] + a[0] + w[0]], -(s[0] * s[0]))),
            ExoProcess::Iid(Distribution::Normal {
                mean: vec![0.0],
                std: vec![1.0],
            }),
            0.95,
            Horizon::Finite(50),
        )
        .unwrap()
        .with_action_bounds(vec![(-1.0, 1.0)])
        .unwrap()
    }

    #[test]
    fn horizon_one_and_zero() {
        let spec = noisy_walk();
        let p = |_: &[f64]| vec![0.0];
        assert_eq!(rollout(&spec, &p, spec.exo(), 1, 0).unwrap().steps.len(), 1);
        assert!(rollout(&spec, &p, spec.exo(), 0, 0).is_err());
    }

    #[test]
    fn chained_and_reproducible() {
        let spec = noisy_walk();
        let p = |s: &[f64]| vec![-0.5 * s[0]];
        let a = rollout(&spec, &p, spec.exo(), 30, 11).unwrap();
        let b = rollout(&spec, &p, spec.exo(), 30, 11).unwrap();
        assert_eq!(a, b);
        for w in a.steps.windows(2) {
            assert_eq!(w[0].s_next, w[1].s);
        }
        let c = rollout(&spec, &p, spec.exo(), 30, 12).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn out_of_bounds_actions_clamped() {
        let spec = noisy_walk();
        let p = |_: &[f64]| vec![5.0];
        let t = rollout(&spec, &p, spec.exo(), 3, 0).unwrap();
        assert!(t.steps.iter().all(|s| s.clamped && s.a == vec![1.0]));
    }

    #[test]
    fn discounting() {
        let mk = |r: &[f64]| Trajectory {
            steps: r
                .iter()
                .map(|&r| TransitionRecord {
                    s: vec![],
                    a: vec![],
                    w: vec![],
                    r,
                    s_next: vec![],
                    clamped: false,
                })
                .collect(),
            seed: 0,
            gamma: 0.5,
        };
        assert_eq!(discounted_return(&mk(&[1.0, 1.0, 1.0]), 0.0), 1.0);
        assert_eq!(discounted_return(&mk(&[1.0, 1.0, 1.0]), 0.5), 1.75);
        assert_eq!(discounted_return(&mk(&[0.0, 0.0]), 0.9), 0.0);
    }

    #[test]
    fn csv_header_and_rows() {
        let spec = noisy_walk();
        let p = |_: &[f64]| vec![0.0];
        let t = rollout(&spec, &p, spec.exo(), 4, 3).unwrap();
        let mut buf = Vec::new();
        write_trajectory_csv(&t, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "step,s0,a0,w0,r");
        assert_eq!(lines.len(), 5);
    }
}
