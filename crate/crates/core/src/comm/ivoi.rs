//! Next-step IVoI as seen from the communication layer.

use super::MODULE;
use crate::error::{Error, Result};
use crate::vehicle::VehicleGridModel;

/// `ξ_{k+1}` of link `link` given the CAM content and whether it arrived.
pub trait CommIvoi: Send + Sync {
    fn ivoi_next(&self, link: usize, acc: f64, delivered: bool) -> Result<f64>;
}

/// Average IVoI per predecessor level: for every follower grid state with
/// the predecessor at level `a`, the advantage of the action chosen with the
/// dummy value in place of `a`. A delivered CAM is worth nothing more.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelIvoiTable {
    pub levels: Vec<f64>,
    pub missing: Vec<f64>,
}

impl LevelIvoiTable {
    pub fn from_model(model: &VehicleGridModel, dummy: f64) -> Self {
        let grid = &model.tabular.state_grid;
        let levels = grid.axes()[3].clone();
        let mut sum = vec![0.0; levels.len()];
        let mut count = vec![0usize; levels.len()];
        for s in 0..model.n_states() {
            let x = grid.point(s);
            let li = grid.axis_index(3, x[3]).0;
            let a = model.solution.policy[model.masked_index(s, dummy)];
            sum[li] += model.q[s][a] - model.q[s][model.solution.policy[s]];
            count[li] += 1;
        }
        let missing = sum.iter().zip(&count).map(|(s, &c)| if c > 0 { s / c as f64 } else { 0.0 }).collect();
        LevelIvoiTable { levels, missing }
    }
}

impl CommIvoi for LevelIvoiTable {
    fn ivoi_next(&self, _link: usize, acc: f64, delivered: bool) -> Result<f64> {
        if self.levels.is_empty() {
            return Err(Error::invalid(MODULE, "empty IVoI level table"));
        }
        if delivered {
            return Ok(0.0);
        }
        let i = self
            .levels
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - acc).abs().total_cmp(&(b.1 - acc).abs()))
            .map(|x| x.0)
            .unwrap_or(0);
        Ok(self.missing[i])
    }
}

impl<F> CommIvoi for F
where
    F: Fn(usize, f64, bool) -> f64 + Send + Sync,
{
    fn ivoi_next(&self, link: usize, acc: f64, delivered: bool) -> Result<f64> {
        Ok(self(link, acc, delivered))
    }
}
