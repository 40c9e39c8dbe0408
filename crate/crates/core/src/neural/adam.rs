use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamHyper {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamHyper {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Moment estimates for one parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub hyper: AdamHyper,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
}

impl AdamState {
    pub fn new(n_params: usize, hyper: AdamHyper) -> Self {
        Self {
            hyper,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            step: 0,
        }
    }
}

/// One bias-corrected Adam descent step, in place.
pub fn adam_step(params: &mut [f64], grads: &[f64], opt: &mut AdamState) -> Result<()> {
    if params.len() != grads.len() || params.len() != opt.m.len() {
        return Err(Error::contract(format!(
            "adam: {} params, {} grads, {} moments",
            params.len(),
            grads.len(),
            opt.m.len()
        )));
    }
    opt.step += 1;
    let AdamHyper {
        lr,
        beta1,
        beta2,
        eps,
    } = opt.hyper;
    let c1 = 1.0 - beta1.powi(opt.step as i32);
    let c2 = 1.0 - beta2.powi(opt.step as i32);
    for (((p, &g), m), v) in params
        .iter_mut()
        .zip(grads)
        .zip(opt.m.iter_mut())
        .zip(opt.v.iter_mut())
    {
        *m = beta1 * *m + (1.0 - beta1) * g;
        *v = beta2 * *v + (1.0 - beta2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *p -= lr * m_hat / (v_hat.sqrt() + eps);
    }
    Ok(())
}
