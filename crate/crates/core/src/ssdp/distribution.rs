//! Finite-dimensional distributions used for initial states and exogenous
//! draws.

use rand::Rng as _;
use rand_distr::{Distribution as _, StandardNormal};

use crate::error::{Error, Result};
use crate::rng::Rng;

const MODULE: &str = "ssdp";

#[derive(Debug, Clone, PartialEq)]
pub enum Distribution {
    /// Point mass.
    Constant(Vec<f64>),
    /// Finite support; every outcome has the same dimension.
    Discrete {
        outcomes: Vec<Vec<f64>>,
        probs: Vec<f64>,
    },
    /// Independent uniforms on `[lo_i, hi_i]`.
    Uniform { lo: Vec<f64>, hi: Vec<f64> },
    /// Independent normals.
    Normal { mean: Vec<f64>, std: Vec<f64> },
    /// Independent blocks, concatenated in order.
    Product(Vec<Distribution>),
}

impl Distribution {
    pub fn constant(v: impl Into<Vec<f64>>) -> Self {
        Distribution::Constant(v.into())
    }

    /// Discrete distribution over scalar outcomes.
    pub fn discrete_scalar(values: &[f64], probs: &[f64]) -> Result<Self> {
        let d = Distribution::Discrete {
            outcomes: values.iter().map(|&v| vec![v]).collect(),
            probs: probs.to_vec(),
        };
        d.validate()?;
        Ok(d)
    }

    pub fn dim(&self) -> usize {
        match self {
            Distribution::Constant(v) => v.len(),
            Distribution::Discrete { outcomes, .. } => outcomes.first().map_or(0, Vec::len),
            Distribution::Uniform { lo, .. } => lo.len(),
            Distribution::Normal { mean, .. } => mean.len(),
            Distribution::Product(parts) => parts.iter().map(Distribution::dim).sum(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Distribution::Constant(v) => finite(v, "constant value"),
            Distribution::Discrete { outcomes, probs } => {
                if outcomes.is_empty() || outcomes.len() != probs.len() {
                    return Err(Error::invalid(
                        MODULE,
                        format!(
                            "discrete distribution needs matching non-empty outcomes/probs ({} vs {})",
                            outcomes.len(),
                            probs.len()
                        ),
                    ));
                }
                let d = outcomes[0].len();
                if outcomes.iter().any(|o| o.len() != d) {
                    return Err(Error::invalid(MODULE, "discrete outcomes differ in dimension"));
                }
                if probs.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
                    return Err(Error::invalid(MODULE, "negative or non-finite probability"));
                }
                let total: f64 = probs.iter().sum();
                if (total - 1.0).abs() > 1e-9 {
                    return Err(Error::invalid(
                        MODULE,
                        format!("discrete probabilities sum to {total}"),
                    ));
                }
                outcomes.iter().try_for_each(|o| finite(o, "discrete outcome"))
            }
            Distribution::Uniform { lo, hi } => {
                if lo.len() != hi.len() || lo.iter().zip(hi).any(|(l, h)| !(l <= h)) {
                    return Err(Error::invalid(MODULE, "uniform bounds must satisfy lo <= hi"));
                }
                finite(lo, "uniform lo")?;
                finite(hi, "uniform hi")
            }
            Distribution::Normal { mean, std } => {
                if mean.len() != std.len() || std.iter().any(|&s| !(s >= 0.0)) {
                    return Err(Error::invalid(MODULE, "normal std must be non-negative"));
                }
                finite(mean, "normal mean")?;
                finite(std, "normal std")
            }
            Distribution::Product(parts) => parts.iter().try_for_each(Distribution::validate),
        }
    }

    pub fn sample(&self, rng: &mut Rng) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.dim());
        self.sample_into(rng, &mut out);
        out
    }

    fn sample_into(&self, rng: &mut Rng, out: &mut Vec<f64>) {
        match self {
            Distribution::Constant(v) => out.extend_from_slice(v),
            Distribution::Discrete { outcomes, probs } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                let mut pick = outcomes.len() - 1;
                for (i, p) in probs.iter().enumerate() {
                    acc += p;
                    if u < acc {
                        pick = i;
                        break;
                    }
                }
                out.extend_from_slice(&outcomes[pick]);
            }
            Distribution::Uniform { lo, hi } => {
                for (l, h) in lo.iter().zip(hi) {
                    let u: f64 = rng.random();
                    out.push(l + (h - l) * u);
                }
            }
            Distribution::Normal { mean, std } => {
                for (m, s) in mean.iter().zip(std) {
                    let z: f64 = StandardNormal.sample(rng);
                    out.push(m + s * z);
                }
            }
            Distribution::Product(parts) => {
                for p in parts {
                    p.sample_into(rng, out);
                }
            }
        }
    }

    /// Enumerates the support with probabilities when it is finite.
    ///
    /// Outcomes of a product are emitted in lexicographic order of the
    /// factors; zero-probability outcomes are dropped.
    pub fn enumerate(&self) -> Option<Vec<(Vec<f64>, f64)>> {
        match self {
            Distribution::Constant(v) => Some(vec![(v.clone(), 1.0)]),
            Distribution::Discrete { outcomes, probs } => Some(
                outcomes
                    .iter()
                    .zip(probs)
                    .filter(|(_, &p)| p > 0.0)
                    .map(|(o, &p)| (o.clone(), p))
                    .collect(),
            ),
            Distribution::Uniform { lo, hi } if lo == hi => Some(vec![(lo.clone(), 1.0)]),
            Distribution::Normal { mean, std } if std.iter().all(|&s| s == 0.0) => {
                Some(vec![(mean.clone(), 1.0)])
            }
            Distribution::Uniform { .. } | Distribution::Normal { .. } => None,
            Distribution::Product(parts) => {
                let mut acc: Vec<(Vec<f64>, f64)> = vec![(Vec::new(), 1.0)];
                for part in parts {
                    let support = part.enumerate()?;
                    let mut next = Vec::with_capacity(acc.len() * support.len());
                    for (prefix, p) in &acc {
                        for (o, q) in &support {
                            let mut v = prefix.clone();
                            v.extend_from_slice(o);
                            next.push((v, p * q));
                        }
                    }
                    acc = next;
                }
                Some(acc)
            }
        }
    }

    pub fn is_finite_support(&self) -> bool {
        match self {
            Distribution::Constant(_) | Distribution::Discrete { .. } => true,
            Distribution::Product(parts) => parts.iter().all(Distribution::is_finite_support),
            other => other.enumerate().is_some(),
        }
    }
}

fn finite(v: &[f64], what: &str) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::invalid(MODULE, format!("{what} is not finite")))
    }
}
