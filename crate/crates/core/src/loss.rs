//! Label-free penalty loss over the heterogeneous encoding:
//!
//! `λ_obj [Σ_off w_ij x_i x_j + Σ_i w_ii x_i²] + λ_constr Σ_e max(0, A_e x − b_e)`
//!
//! On binary points it coincides with the discrete objective plus total
//! constraint violation.

use serde::{Deserialize, Serialize};

use crate::encoding::{BatchedHeteroGraph, HeteroGraph};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    pub lambda_obj: f64,
    pub lambda_constr: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self { lambda_obj: 1.0, lambda_constr: 1.0 }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_obj > 0.0 && self.lambda_constr > 0.0) {
            return Err(Error::Config("loss coefficients must be positive".into()));
        }
        Ok(())
    }
}

fn check(h: &HeteroGraph, x: &[f64]) -> Result<()> {
    if x.len() != h.num_var {
        return Err(Error::Dimension { expected: h.num_var, got: x.len() });
    }
    Ok(())
}

fn activities(h: &HeteroGraph, x: &[f64]) -> Vec<f64> {
    let mut act = vec![0.0; h.num_constr];
    for &(j, e, a) in &h.e_constr {
        act[e] += a * x[j];
    }
    act
}

pub fn objective(h: &HeteroGraph, x: &[f64]) -> Result<f64> {
    check(h, x)?;
    Ok(h.e_obj_off.iter().map(|&(i, j, w)| w * x[i] * x[j]).sum::<f64>()
        + h.e_obj_diag.iter().map(|&(i, w)| w * x[i] * x[i]).sum::<f64>())
}

/// Total hinge violation `Σ_e max(0, A_e x − b_e)`.
pub fn penalty(h: &HeteroGraph, x: &[f64]) -> Result<f64> {
    check(h, x)?;
    let b = h.constr_features.column(0);
    Ok(activities(h, x).iter().zip(b.iter()).map(|(a, b)| (a - b).max(0.0)).sum())
}

pub fn relaxed_loss(h: &HeteroGraph, x: &[f64], cfg: &LossConfig) -> Result<f64> {
    Ok(cfg.lambda_obj * objective(h, x)? + cfg.lambda_constr * penalty(h, x)?)
}

/// Gradient of [`relaxed_loss`] with respect to `x`. Hinges exactly at their
/// kink contribute nothing.
pub fn loss_grad_xr(h: &HeteroGraph, x: &[f64], cfg: &LossConfig) -> Result<Vec<f64>> {
    check(h, x)?;
    let mut grad = vec![0.0; h.num_var];
    for &(i, j, w) in &h.e_obj_off {
        grad[i] += cfg.lambda_obj * w * x[j];
        grad[j] += cfg.lambda_obj * w * x[i];
    }
    for &(i, w) in &h.e_obj_diag {
        grad[i] += cfg.lambda_obj * 2.0 * w * x[i];
    }
    let act = activities(h, x);
    let b = h.constr_features.column(0);
    for &(j, e, a) in &h.e_constr {
        if act[e] > b[e] {
            grad[j] += cfg.lambda_constr * a;
        }
    }
    Ok(grad)
}

pub fn loss_and_grad(h: &HeteroGraph, x: &[f64], cfg: &LossConfig) -> Result<(f64, Vec<f64>)> {
    Ok((relaxed_loss(h, x, cfg)?, loss_grad_xr(h, x, cfg)?))
}

/// Per-member losses of a batch. The slice `x` spans all variable nodes.
pub fn batch_losses(b: &BatchedHeteroGraph, x: &[f64], cfg: &LossConfig) -> Result<Vec<f64>> {
    check(&b.graph, x)?;
    b.unbatch()
        .iter()
        .enumerate()
        .map(|(k, h)| relaxed_loss(h, &x[b.var_range(k)], cfg))
        .collect()
}
