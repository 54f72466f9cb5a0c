use alloc::format;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::{mismatch, NumError, ParamGrads, ParamStore, Tensor};
use crate::math;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam moment accumulators for one [`ParamStore`].
#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerState {
    pub config: AdamConfig,
    pub step: u64,
    pub first: Vec<Tensor>,
    pub second: Vec<Tensor>,
}

impl OptimizerState {
    pub fn new(config: AdamConfig, params: &ParamStore) -> Self {
        let zeros = |p: &ParamStore| p.iter().map(|(_, _, t)| Tensor::zeros(t.shape())).collect();
        Self {
            config,
            step: 0,
            first: zeros(params),
            second: zeros(params),
        }
    }
}

/// Adaptive moment estimation with bias correction.
pub struct Adam;

impl Adam {
    /// Apply one update. Parameters without a gradient are treated as having
    /// a zero gradient. `frozen` parameters are left untouched entirely.
    pub fn step(
        params: &mut ParamStore,
        grads: &ParamGrads,
        state: &mut OptimizerState,
        frozen: &dyn Fn(super::ParamId) -> bool,
    ) -> Result<(), NumError> {
        if state.first.len() != params.len() {
            return Err(mismatch(
                "adam",
                format!("state has {} slots, store has {}", state.first.len(), params.len()),
            ));
        }
        state.step += 1;
        let AdamConfig { lr, beta1, beta2, eps } = state.config;
        let bc1 = 1.0 - math::powi(beta1, state.step as i32);
        let bc2 = 1.0 - math::powi(beta2, state.step as i32);
        let ids: Vec<_> = params.ids().collect();
        for id in ids {
            if frozen(id) {
                continue;
            }
            let i = id.index();
            let p = params.get_mut(id);
            if state.first[i].shape() != p.shape() {
                return Err(mismatch(
                    "adam",
                    format!("moment shape {:?} vs param {:?}", state.first[i].shape(), p.shape()),
                ));
            }
            let g = grads.get(id);
            if let Some(g) = g {
                if g.shape() != p.shape() {
                    return Err(mismatch(
                        "adam",
                        format!("grad shape {:?} vs param {:?}", g.shape(), p.shape()),
                    ));
                }
            }
            let m = state.first[i].data_mut();
            let v = state.second[i].data_mut();
            for k in 0..m.len() {
                let gk = g.map_or(0.0, |g| g.data()[k]);
                m[k] = beta1 * m[k] + (1.0 - beta1) * gk;
                v[k] = beta2 * v[k] + (1.0 - beta2) * gk * gk;
            }
            let pd = p.data_mut();
            for k in 0..pd.len() {
                let m_hat = m[k] / bc1;
                let v_hat = v[k] / bc2;
                pd[k] -= lr * m_hat / (math::sqrt(v_hat) + eps);
            }
            if !pd.iter().all(|x| x.is_finite()) {
                return Err(NumError::NonFinite { op: "adam" });
            }
        }
        Ok(())
    }
}
