//! Supervised least-squares regression of scalar targets.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::adam::Adam;
use super::mlp::{Activation, Mlp};
use crate::error::{check_dim, Error, Result};
use crate::rng::{rng_from_seed, Rng};

const MODULE: &str = "nn";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RegressionConfig {
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Inputs are divided by this elementwise.
    pub input_scale: Option<Vec<f64>>,
}

impl Default for RegressionConfig {
    fn default() -> Self {
        RegressionConfig {
            hidden: vec![64, 64],
            activation: Activation::Tanh,
            lr: 1e-3,
            epochs: 200,
            batch_size: 64,
            input_scale: None,
        }
    }
}

/// Minibatch Adam on the mean squared error. Returns the final training MSE.
pub fn regress(net: &mut Mlp, xs: &[Vec<f64>], ys: &[f64], lr: f64, epochs: usize, batch: usize, rng: &mut Rng) -> Result<f64> {
    if xs.is_empty() {
        return Err(Error::invalid(MODULE, "empty regression dataset"));
    }
    check_dim(MODULE, "regression targets", xs.len(), ys.len())?;
    for x in xs {
        check_dim(MODULE, "regression input", net.input_dim(), x.len())?;
    }
    let batch = batch.max(1);
    let mut opt = Adam::new(net.param_count(), lr);
    let mut order: Vec<usize> = (0..xs.len()).collect();
    let mut g = vec![0.0; net.param_count()];
    for _ in 0..epochs {
        order.shuffle(rng);
        for chunk in order.chunks(batch) {
            g.iter_mut().for_each(|v| *v = 0.0);
            let n = chunk.len() as f64;
            for &i in chunk {
                let tr = net.forward_trace(&xs[i])?;
                let e = tr.output()[0] - ys[i];
                net.backward_into(&tr, &[2.0 * e / n], &mut g)?;
            }
            opt.step(net.params_mut(), &g);
        }
    }
    mse(net, xs, ys)
}

pub fn mse(net: &Mlp, xs: &[Vec<f64>], ys: &[f64]) -> Result<f64> {
    let mut s = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        let e = net.forward(x)?[0] - y;
        s += e * e;
    }
    Ok(s / xs.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdvantageSample {
    pub obs: Vec<f64>,
    pub action: Vec<f64>,
    pub target: f64,
}

/// Regressor of the advantage from `[obs, action]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdvantageEstimator {
    pub net: Mlp,
    pub input_scale: Vec<f64>,
    pub train_mse: f64,
}

impl AdvantageEstimator {
    fn input(&self, obs: &[f64], a: &[f64]) -> Vec<f64> {
        obs.iter().chain(a).zip(&self.input_scale).map(|(x, s)| x / s).collect()
    }

    pub fn predict(&self, obs: &[f64], a: &[f64]) -> Result<f64> {
        check_dim(MODULE, "estimator input", self.input_scale.len(), obs.len() + a.len())?;
        Ok(self.net.forward(&self.input(obs, a))?[0])
    }
}

pub fn fit_advantage_estimator(data: &[AdvantageSample], cfg: &RegressionConfig, seed: u64) -> Result<AdvantageEstimator> {
    let first = data.first().ok_or_else(|| Error::invalid(MODULE, "empty advantage dataset"))?;
    let n_in = first.obs.len() + first.action.len();
    let input_scale = match &cfg.input_scale {
        Some(s) => {
            check_dim(MODULE, "input scale", n_in, s.len())?;
            s.clone()
        }
        None => vec![1.0; n_in],
    };
    let mut rng = rng_from_seed(seed);
    let mut sizes = vec![n_in];
    sizes.extend(&cfg.hidden);
    sizes.push(1);
    let mut net = Mlp::new(&sizes, cfg.activation, Activation::Identity, &mut rng)?;
    // Start from the constant predictor at the target mean.
    let mean = data.iter().map(|d| d.target).sum::<f64>() / data.len() as f64;
    let n = net.param_count();
    let last_in = sizes[sizes.len() - 2];
    net.params_mut()[n - 1 - last_in..n - 1].iter_mut().for_each(|w| *w = 0.0);
    net.params_mut()[n - 1] = mean;
    let mut est = AdvantageEstimator {
        net,
        input_scale,
        train_mse: f64::NAN,
    };
    let mut xs = Vec::with_capacity(data.len());
    for d in data {
        check_dim(MODULE, "sample input", n_in, d.obs.len() + d.action.len())?;
        xs.push(est.input(&d.obs, &d.action));
    }
    let ys: Vec<f64> = data.iter().map(|d| d.target).collect();
    est.train_mse = regress(&mut est.net, &xs, &ys, cfg.lr, cfg.epochs, cfg.batch_size, &mut rng)?;
    Ok(est)
}
