//! Projected dual subgradient method: `λ^{k+1} = Π_P(λ^k − α^k q^k)` with
//! `q^k ∈ ∂(−g)(λ^k)` and a diminishing step rule.

use serde::{Deserialize, Serialize};

use super::PriceBox;
use crate::error::{Error, Result};
use crate::linalg::norm_inf;
use crate::scalar::{s, Scalar};

/// Diminishing step-size rules swept by the experiments.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum StepRule {
    #[serde(rename = "0.1/sqrt(k)")]
    PointOneOverSqrtK,
    #[serde(rename = "1/sqrt(k)")]
    OneOverSqrtK,
    #[serde(rename = "1/k")]
    OneOverK,
    #[serde(rename = "10/k")]
    TenOverK,
}

impl StepRule {
    pub const ALL: [StepRule; 4] = [
        StepRule::PointOneOverSqrtK,
        StepRule::OneOverSqrtK,
        StepRule::OneOverK,
        StepRule::TenOverK,
    ];

    /// α^k; the k = 0 step evaluates the rule at k = 1.
    pub fn alpha<T: Scalar>(self, k: usize) -> T {
        let k = s::<T>(k.max(1) as f64);
        match self {
            StepRule::PointOneOverSqrtK => s::<T>(0.1) / k.sqrt(),
            StepRule::OneOverSqrtK => T::one() / k.sqrt(),
            StepRule::OneOverK => T::one() / k,
            StepRule::TenOverK => s::<T>(10.0) / k,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            StepRule::PointOneOverSqrtK => "0.1/sqrt(k)",
            StepRule::OneOverSqrtK => "1/sqrt(k)",
            StepRule::OneOverK => "1/k",
            StepRule::TenOverK => "10/k",
        }
    }
}

/// One projected step `clamp(λ − α q, box)`.
pub fn projected_step<T: Scalar>(
    lambda: &[T],
    alpha: T,
    q: &[T],
    pbox: &PriceBox<T>,
) -> Vec<T> {
    let raw: Vec<T> = lambda.iter().zip(q).map(|(&l, &qi)| l - alpha * qi).collect();
    pbox.project(&raw)
}

/// Mutable state of the projected dual subgradient method.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SubgradState<T> {
    lambda: Vec<T>,
    rule: StepRule,
    g_best: T,
    k: usize,
    stall_count: usize,
    patience: usize,
    min_improvement: T,
}

impl<T: Scalar> SubgradState<T> {
    pub fn new(lambda0: Vec<T>, rule: StepRule, pbox: &PriceBox<T>) -> Result<Self> {
        if lambda0.len() != pbox.dim() {
            return Err(Error::DimensionMismatch("initial point dim != box dim".into()));
        }
        if !pbox.contains(&lambda0, T::zero()) {
            return Err(Error::Invalid("initial point lies outside the price box".into()));
        }
        Ok(Self {
            lambda: lambda0,
            rule,
            g_best: -T::infinity(),
            k: 0,
            stall_count: 0,
            patience: 50,
            min_improvement: s(1e-9),
        })
    }

    pub fn with_stopping(mut self, patience: usize, min_improvement: T) -> Self {
        self.patience = patience;
        self.min_improvement = min_improvement;
        self
    }

    pub fn lambda(&self) -> &[T] {
        &self.lambda
    }

    pub fn g_best(&self) -> T {
        self.g_best
    }

    pub fn rule(&self) -> StepRule {
        self.rule
    }

    pub fn iteration(&self) -> usize {
        self.k
    }

    /// Process the oracle answer at the current iterate: update `g_best`,
    /// take the projected step, advance `k`. Returns `true` when the
    /// stopping rule fires (best-value stall or a zero subgradient).
    pub fn step(&mut self, g_value: T, q: &[T], pbox: &PriceBox<T>) -> bool {
        let prev_best = self.g_best;
        self.g_best = self.g_best.max(g_value);
        let improvement = self.g_best - prev_best;
        if prev_best.is_finite() && improvement < self.min_improvement {
            self.stall_count += 1;
        } else {
            self.stall_count = 0;
        }
        if norm_inf(q) == T::zero() {
            self.k += 1;
            return true;
        }
        let alpha = self.rule.alpha::<T>(self.k.max(1));
        self.lambda = projected_step(&self.lambda, alpha, q, pbox);
        self.k += 1;
        self.stall_count >= self.patience
    }
}
