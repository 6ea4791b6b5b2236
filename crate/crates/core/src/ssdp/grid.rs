//! Rectangular grids with nearest-neighbour snapping.

use crate::error::{check_dim, Error, Result};

const MODULE: &str = "ssdp";

/// Tensor-product grid of points. Flat indices are row-major with the last
/// axis varying fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    axes: Vec<Vec<f64>>,
    strides: Vec<usize>,
    len: usize,
}

impl Grid {
    pub fn new(axes: Vec<Vec<f64>>) -> Result<Self> {
        if axes.iter().any(Vec::is_empty) {
            return Err(Error::invalid(MODULE, "grid axis is empty"));
        }
        for ax in &axes {
            if ax.iter().any(|x| !x.is_finite()) || ax.windows(2).any(|w| !(w[0] < w[1])) {
                return Err(Error::invalid(MODULE, "grid axis must be finite and strictly increasing"));
            }
        }
        let mut strides = vec![1; axes.len()];
        for d in (0..axes.len().saturating_sub(1)).rev() {
            strides[d] = strides[d + 1] * axes[d + 1].len();
        }
        let len = axes.iter().map(Vec::len).product();
        Ok(Grid { axes, strides, len })
    }

    /// `n` evenly spaced points on `[lo, hi]` per axis.
    pub fn uniform(lo: &[f64], hi: &[f64], n: &[usize]) -> Result<Self> {
        if lo.len() != hi.len() || lo.len() != n.len() {
            return Err(Error::invalid(MODULE, "grid bound lengths differ"));
        }
        let axes = lo
            .iter()
            .zip(hi)
            .zip(n)
            .map(|((&l, &h), &k)| linspace(l, h, k))
            .collect();
        Grid::new(axes)
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn axes(&self) -> &[Vec<f64>] {
        &self.axes
    }

    /// Nearest point index along one axis and whether `x` lay outside it.
    pub fn axis_index(&self, d: usize, x: f64) -> (usize, bool) {
        let ax = &self.axes[d];
        let n = ax.len();
        let span = (ax[n - 1] - ax[0]).abs().max(1.0);
        let tol = 1e-9 * span;
        let outside = x < ax[0] - tol || x > ax[n - 1] + tol || x.is_nan();
        let i = ax.partition_point(|&g| g < x);
        let idx = if i == 0 {
            0
        } else if i >= n {
            n - 1
        } else if x - ax[i - 1] <= ax[i] - x {
            i - 1
        } else {
            i
        };
        (idx, outside)
    }

    /// Flat index of the nearest grid point and a flag for clipping.
    pub fn locate(&self, x: &[f64]) -> Result<(usize, bool)> {
        check_dim(MODULE, "grid point", self.dim(), x.len())?;
        let mut idx = 0;
        let mut clipped = false;
        for (d, &v) in x.iter().enumerate() {
            let (i, out) = self.axis_index(d, v);
            idx += i * self.strides[d];
            clipped |= out;
        }
        Ok((idx, clipped))
    }

    /// Multilinear interpolation weights: the corner points of the cell
    /// containing `x` (clamped to the grid box) with their weights.
    pub fn interpolation_weights(&self, x: &[f64]) -> Result<Vec<(usize, f64)>> {
        check_dim(MODULE, "grid point", self.dim(), x.len())?;
        let mut out = vec![(0usize, 1.0f64)];
        for (d, &v) in x.iter().enumerate() {
            let ax = &self.axes[d];
            let n = ax.len();
            let (i, t) = if n == 1 || v.is_nan() {
                (0, 0.0)
            } else {
                let v = v.clamp(ax[0], ax[n - 1]);
                let i = ax.partition_point(|&g| g <= v).clamp(1, n - 1) - 1;
                (i, (v - ax[i]) / (ax[i + 1] - ax[i]))
            };
            let mut next = Vec::with_capacity(out.len() * 2);
            for &(idx, w) in &out {
                if t < 1.0 {
                    next.push((idx + i * self.strides[d], w * (1.0 - t)));
                }
                if t > 0.0 {
                    next.push((idx + (i + 1) * self.strides[d], w * t));
                }
            }
            out = next;
        }
        Ok(out)
    }

    pub fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        let mut out = vec![0; self.dim()];
        for d in 0..self.dim() {
            out[d] = flat / self.strides[d];
            flat %= self.strides[d];
        }
        out
    }

    pub fn point(&self, flat: usize) -> Vec<f64> {
        self.multi_index(flat)
            .iter()
            .enumerate()
            .map(|(d, &i)| self.axes[d][i])
            .collect()
    }
}

pub(crate) fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|i| {
                if i == n - 1 {
                    hi
                } else {
                    lo + (hi - lo) * i as f64 / (n - 1) as f64
                }
            })
            .collect(),
    }
}
