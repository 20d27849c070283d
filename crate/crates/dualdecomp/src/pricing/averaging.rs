//! Weighted average of localization query points whose dual value
//! converges to the optimum: `λ̄_k = Σ_i θ_ik λ_i` with weights built from
//! the normalized separation oracles and their slacks at the current
//! center.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::dot;
use crate::scalar::Scalar;

/// One recorded query: the homogeneous iterate `z_i = (t, λ̄)`, the
/// unnormalized oracle `q̂(z_i)` and the prices `λ_i = λ̄_i/t_i`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct QueryRecord<T> {
    pub z_t: T,
    pub z_lam: Vec<T>,
    pub qhat_t: T,
    pub qhat_lam: Vec<T>,
    pub lambda: Vec<T>,
}

impl<T: Scalar> QueryRecord<T> {
    pub fn qhat_norm(&self) -> T {
        (self.qhat_t * self.qhat_t + dot(&self.qhat_lam, &self.qhat_lam)).sqrt()
    }

    /// `q̂(z_i)ᵀ(z_i − z)` for `z = (t, λ̄)`.
    pub fn qhat_slack(&self, t: T, lam_bar: &[T]) -> T {
        let mut v = self.qhat_t * (self.z_t - t);
        for (i, &qi) in self.qhat_lam.iter().enumerate() {
            v = v + qi * (self.z_lam[i] - lam_bar[i]);
        }
        v
    }
}

/// The per-index weights of one averaged-dual evaluation.
#[derive(Clone, Debug)]
pub struct DualAverageWeights<T> {
    pub beta: Vec<T>,
    pub pi: Vec<T>,
    pub p_total: T,
    pub theta: Vec<T>,
    /// Indices skipped because their slack was numerically nonpositive.
    pub dropped: Vec<usize>,
}

/// Averaged price `Σ_i θ_i λ_i` over all recorded queries, with slacks
/// taken at the current center `z = (t, λ̄)`. Nonpositive slacks (which
/// cannot occur at a strictly interior center) drop their index.
pub fn averaged_dual<T: Scalar>(
    history: &[QueryRecord<T>],
    t: T,
    lam_bar: &[T],
) -> Result<(Vec<T>, DualAverageWeights<T>)> {
    if history.is_empty() {
        return Err(Error::Invalid("no queries recorded yet".into()));
    }
    let m = history[0].lambda.len();
    let mut beta = Vec::with_capacity(history.len());
    let mut pi = Vec::with_capacity(history.len());
    let mut dropped = Vec::new();
    for (i, rec) in history.iter().enumerate() {
        let slack_hat = rec.qhat_slack(t, lam_bar);
        let qnorm = rec.qhat_norm();
        if slack_hat <= T::zero() || qnorm <= T::zero() {
            beta.push(T::zero());
            pi.push(T::zero());
            dropped.push(i);
            continue;
        }
        // β = 1/(qᵀ(z_i − z)) with q = q̂/‖q̂‖; π = β/‖q̂‖
        let b = qnorm / slack_hat;
        beta.push(b);
        pi.push(b / qnorm);
    }
    let p_total = pi.iter().fold(T::zero(), |a, &v| a + v);
    if p_total <= T::zero() {
        return Err(Error::Invalid("all averaging slacks were nonpositive".into()));
    }
    let theta: Vec<T> = pi.iter().map(|&v| v / p_total).collect();
    let mut lam = vec![T::zero(); m];
    for (rec, &w) in history.iter().zip(&theta) {
        for (acc, &v) in lam.iter_mut().zip(&rec.lambda) {
            *acc = *acc + w * v;
        }
    }
    debug_assert!(lam.iter().all(|v| v.is_finite()));
    Ok((lam, DualAverageWeights { beta, pi, p_total, theta, dropped }))
}
