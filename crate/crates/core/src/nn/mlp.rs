//! Fully connected network in f64 with exact reverse-mode gradients.
//!
//! Parameters are flattened layer by layer, each layer as its row-major
//! `out x in` weight matrix followed by its bias vector. Gradients and
//! optimiser state use the same layout.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::rng::Rng;

const MODULE: &str = "nn";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Tanh,
    Relu,
    Identity,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Relu => x.max(0.0),
            Activation::Identity => x,
        }
    }

    /// Derivative expressed through the pre-activation `z` and output `y`.
    fn derivative(self, z: f64, y: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - y * y,
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Tanh => "tanh",
            Activation::Relu => "relu",
            Activation::Identity => "identity",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "tanh" => Some(Activation::Tanh),
            "relu" => Some(Activation::Relu),
            "identity" => Some(Activation::Identity),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    sizes: Vec<usize>,
    hidden: Activation,
    output: Activation,
    params: Vec<f64>,
    /// Offset of each layer's weights in `params`.
    offsets: Vec<usize>,
}

/// Activations cached by a forward pass.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    /// `acts[0]` is the input, `acts[l+1]` the output of layer `l`.
    pub acts: Vec<Vec<f64>>,
    pub pre: Vec<Vec<f64>>,
}

impl ForwardTrace {
    pub fn output(&self) -> &[f64] {
        self.acts.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

impl Mlp {
    /// All-zero parameters.
    pub fn zeros(sizes: &[usize], hidden: Activation, output: Activation) -> Result<Self> {
        if sizes.len() < 2 || sizes.iter().any(|&n| n == 0) {
            return Err(Error::invalid(MODULE, "an MLP needs at least input and output layers of non-zero width"));
        }
        let mut offsets = Vec::with_capacity(sizes.len() - 1);
        let mut total = 0;
        for w in sizes.windows(2) {
            offsets.push(total);
            total += (w[0] + 1) * w[1];
        }
        Ok(Mlp {
            sizes: sizes.to_vec(),
            hidden,
            output,
            params: vec![0.0; total],
            offsets,
        })
    }

    /// Glorot-uniform weights, zero biases.
    pub fn new(sizes: &[usize], hidden: Activation, output: Activation, rng: &mut Rng) -> Result<Self> {
        let mut net = Mlp::zeros(sizes, hidden, output)?;
        for l in 0..net.n_layers() {
            let (n_in, n_out) = (net.sizes[l], net.sizes[l + 1]);
            let limit = (6.0 / (n_in + n_out) as f64).sqrt();
            let off = net.offsets[l];
            for p in &mut net.params[off..off + n_in * n_out] {
                *p = rng.random_range(-limit..limit);
            }
        }
        Ok(net)
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }
    pub fn hidden_activation(&self) -> Activation {
        self.hidden
    }
    pub fn output_activation(&self) -> Activation {
        self.output
    }
    pub fn n_layers(&self) -> usize {
        self.sizes.len() - 1
    }
    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }
    pub fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }
    pub fn param_count(&self) -> usize {
        self.params.len()
    }
    pub fn params(&self) -> &[f64] {
        &self.params
    }
    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn set_params(&mut self, p: &[f64]) -> Result<()> {
        check_dim(MODULE, "parameter vector", self.params.len(), p.len())?;
        self.params.copy_from_slice(p);
        Ok(())
    }

    fn activation(&self, layer: usize) -> Activation {
        if layer + 1 == self.n_layers() {
            self.output
        } else {
            self.hidden
        }
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(MODULE, "network input", self.input_dim(), x.len())?;
        let mut cur = x.to_vec();
        for l in 0..self.n_layers() {
            cur = self.layer(l, &cur).1;
        }
        Ok(cur)
    }

    fn layer(&self, l: usize, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
        let off = self.offsets[l];
        let w = &self.params[off..off + n_in * n_out];
        let b = &self.params[off + n_in * n_out..off + (n_in + 1) * n_out];
        let act = self.activation(l);
        let mut z = Vec::with_capacity(n_out);
        let mut y = Vec::with_capacity(n_out);
        for o in 0..n_out {
            let row = &w[o * n_in..(o + 1) * n_in];
            let v = row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + b[o];
            z.push(v);
            y.push(act.apply(v));
        }
        (z, y)
    }

    pub fn forward_trace(&self, x: &[f64]) -> Result<ForwardTrace> {
        check_dim(MODULE, "network input", self.input_dim(), x.len())?;
        let mut acts = vec![x.to_vec()];
        let mut pre = Vec::with_capacity(self.n_layers());
        for l in 0..self.n_layers() {
            let (z, y) = self.layer(l, &acts[l]);
            pre.push(z);
            acts.push(y);
        }
        Ok(ForwardTrace { acts, pre })
    }

    /// Adds `∂(output · upstream)/∂θ` into `grads` and returns the input
    /// gradient.
    pub fn backward_into(&self, trace: &ForwardTrace, upstream: &[f64], grads: &mut [f64]) -> Result<Vec<f64>> {
        check_dim(MODULE, "upstream gradient", self.output_dim(), upstream.len())?;
        check_dim(MODULE, "gradient buffer", self.params.len(), grads.len())?;
        let mut delta: Vec<f64> = upstream.to_vec();
        for l in (0..self.n_layers()).rev() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let act = self.activation(l);
            for o in 0..n_out {
                delta[o] *= act.derivative(trace.pre[l][o], trace.acts[l + 1][o]);
            }
            let off = self.offsets[l];
            let x = &trace.acts[l];
            for o in 0..n_out {
                let d = delta[o];
                if d != 0.0 {
                    let g = &mut grads[off + o * n_in..off + (o + 1) * n_in];
                    for (gi, xi) in g.iter_mut().zip(x) {
                        *gi += d * xi;
                    }
                }
                grads[off + n_in * n_out + o] += d;
            }
            let w = &self.params[off..off + n_in * n_out];
            let mut next = vec![0.0; n_in];
            for o in 0..n_out {
                let d = delta[o];
                if d != 0.0 {
                    for (ni, wi) in next.iter_mut().zip(&w[o * n_in..(o + 1) * n_in]) {
                        *ni += d * wi;
                    }
                }
            }
            delta = next;
        }
        Ok(delta)
    }

    /// Parameter and input gradients of `output · upstream` at `x`.
    pub fn backward(&self, x: &[f64], upstream: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let trace = self.forward_trace(x)?;
        let mut g = vec![0.0; self.params.len()];
        let gx = self.backward_into(&trace, upstream, &mut g)?;
        Ok((g, gx))
    }

    /// `θ ← (1 − rate) θ + rate θ_src`.
    pub fn soft_update_from(&mut self, src: &Mlp, rate: f64) -> Result<()> {
        check_dim(MODULE, "soft update source", self.params.len(), src.params.len())?;
        for (t, s) in self.params.iter_mut().zip(&src.params) {
            *t = (1.0 - rate) * *t + rate * s;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;

    #[test]
    fn param_count_formula() {
        let net = Mlp::zeros(&[4, 64, 64, 1], Activation::Tanh, Activation::Identity).unwrap();
        assert_eq!(net.param_count(), 5 * 64 + 65 * 64 + 65);
    }

    #[test]
    fn zero_net_outputs_zero() {
        let net = Mlp::zeros(&[3, 5, 2], Activation::Tanh, Activation::Identity).unwrap();
        assert_eq!(net.forward(&[1.0, -2.0, 3.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn single_linear_layer() {
        let mut net = Mlp::zeros(&[1, 1], Activation::Identity, Activation::Identity).unwrap();
        net.set_params(&[2.0, 1.0]).unwrap();
        assert_eq!(net.forward(&[3.0]).unwrap(), vec![7.0]);
        let (g, gx) = net.backward(&[3.0], &[1.0]).unwrap();
        assert_eq!(g, vec![3.0, 1.0]);
        assert_eq!(gx, vec![2.0]);
    }

    #[test]
    fn tanh_saturates_inside_unit_interval() {
        let mut net = Mlp::zeros(&[1, 1], Activation::Tanh, Activation::Tanh).unwrap();
        net.set_params(&[100.0, 0.0]).unwrap();
        let y = net.forward(&[1e6]).unwrap()[0];
        assert!(y <= 1.0 && y > 0.99);
    }

    #[test]
    fn zero_upstream_zero_gradient() {
        let mut rng = rng_from_seed(1);
        let net = Mlp::new(&[3, 4, 2], Activation::Tanh, Activation::Identity, &mut rng).unwrap();
        let (g, gx) = net.backward(&[0.1, 0.2, 0.3], &[0.0, 0.0]).unwrap();
        assert!(g.iter().chain(&gx).all(|&v| v == 0.0));
    }

    #[test]
    fn dimension_errors() {
        let net = Mlp::zeros(&[2, 1], Activation::Tanh, Activation::Identity).unwrap();
        assert!(net.forward(&[1.0]).is_err());
        assert!(net.backward(&[1.0, 2.0], &[1.0, 1.0]).is_err());
        assert!(Mlp::zeros(&[2], Activation::Tanh, Activation::Identity).is_err());
    }
}
