//! Price discovery: the dual engines that search for good prices.
//!
//! Two engines share a cut/box vocabulary: a projected dual subgradient
//! method and the homogeneous analytic-center cutting-plane method, plus
//! the averaged dual iterate that certifies value convergence for the
//! latter.

pub mod accpm;
pub mod averaging;
pub mod subgradient;

pub use accpm::{accpm_step, AccpmConfig, AccpmState, AccpmStep, CenterOutcome};
pub use averaging::{averaged_dual, DualAverageWeights, QueryRecord};
pub use subgradient::{projected_step, StepRule, SubgradState};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, norm_inf};
use crate::problem::{BlockAffineCoupling, BlockPrimalPoint, DualPoint};
use crate::scalar::{s, Scalar};

/// Box `P = [lower, upper] ⊂ R₊^m` believed to contain the optimal prices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PriceBox<T> {
    lower: Vec<T>,
    upper: Vec<T>,
}

impl<T: Scalar> PriceBox<T> {
    pub fn new(lower: Vec<T>, upper: Vec<T>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch("box bound lengths differ".into()));
        }
        for (l, u) in lower.iter().zip(&upper) {
            if *l < T::zero() || u < l {
                return Err(Error::Invalid("price box needs 0 <= lower <= upper".into()));
            }
        }
        Ok(Self { lower, upper })
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[T] {
        &self.lower
    }

    pub fn upper(&self) -> &[T] {
        &self.upper
    }

    pub fn midpoint(&self) -> Vec<T> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(&l, &u)| (l + u) * s(0.5))
            .collect()
    }

    pub fn project(&self, v: &[T]) -> Vec<T> {
        v.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(&x, (&l, &u))| x.max(l).min(u))
            .collect()
    }

    pub fn contains(&self, v: &[T], tol: T) -> bool {
        v.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(&x, (&l, &u))| x >= l - tol && x <= u + tol)
    }

    /// The 2m halfspaces `λ_i <= u_i` and `-λ_i <= -l_i` as cuts.
    pub fn box_cuts(&self) -> Vec<Cut<T>> {
        let m = self.dim();
        let mut cuts = Vec::with_capacity(2 * m);
        for i in 0..m {
            let mut c = vec![T::zero(); m];
            c[i] = T::one();
            cuts.push(Cut::new(c, self.upper[i], 0).expect("unit cut is never degenerate"));
            let mut c = vec![T::zero(); m];
            c[i] = -T::one();
            cuts.push(Cut::new(c, -self.lower[i], 0).expect("unit cut is never degenerate"));
        }
        cuts
    }
}

/// Price box spanning 1/3 of the estimated per-coordinate minimum to 3x
/// the estimated maximum.
pub fn make_price_box<T: Scalar>(p_min: &[T], p_max: &[T]) -> Result<PriceBox<T>> {
    if p_min.len() != p_max.len() {
        return Err(Error::DimensionMismatch("estimate lengths differ".into()));
    }
    for (lo, hi) in p_min.iter().zip(p_max) {
        if *lo < T::zero() || *hi < T::zero() {
            return Err(Error::Invalid("price estimates must be nonnegative".into()));
        }
        if hi < lo {
            return Err(Error::Invalid("price estimate needs p_min <= p_max".into()));
        }
    }
    let third = T::one() / s(3.0);
    PriceBox::new(
        p_min.iter().map(|&v| v * third).collect(),
        p_max.iter().map(|&v| v * s(3.0)).collect(),
    )
}

/// Halfspace `{λ̃ | cᵀλ̃ <= d}` known to contain the optimal prices,
/// normalized by `n = √(‖c‖² + d²)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cut<T> {
    pub c: Vec<T>,
    pub d: T,
    pub n: T,
    pub source_iteration: usize,
}

impl<T: Scalar> Cut<T> {
    pub fn new(c: Vec<T>, d: T, source_iteration: usize) -> Result<Self> {
        let n = (dot(&c, &c) + d * d).sqrt();
        if n <= T::epsilon() {
            return Err(Error::Invalid("degenerate zero cut".into()));
        }
        Ok(Self { c, d, n, source_iteration })
    }

    /// Slack of the homogenized row `t·d − cᵀλ̄` at z = (t, λ̄).
    pub fn slack(&self, t: T, lam_bar: &[T]) -> T {
        t * self.d - dot(&self.c, lam_bar)
    }
}

/// Neutral cut at `λ` from the exact oracle response: `c = b − A x̂`,
/// `d = cᵀλ`, so the boundary passes through the query point. `None`
/// signals a zero subgradient, i.e. the current prices are dual optimal.
pub fn generate_cut<T: Scalar>(
    coupling: &BlockAffineCoupling<T>,
    oracle_x: &BlockPrimalPoint<T>,
    dual: &DualPoint<T>,
    source_iteration: usize,
) -> Result<Option<Cut<T>>> {
    let ax = coupling.apply(oracle_x)?;
    let c: Vec<T> = coupling.b().iter().zip(&ax).map(|(&b, &a)| b - a).collect();
    let scale = T::one() + norm_inf(coupling.b());
    if norm_inf(&c) <= s::<T>(1e-13) * scale {
        return Ok(None);
    }
    let d = dot(&c, dual.lambda());
    Ok(Some(Cut::new(c, d, source_iteration)?))
}

/// Dual subgradient at `λ`: `q = b − A x(y) ∈ ∂(−g)(λ)`; identical to the
/// cut vector of [`generate_cut`].
pub fn dual_subgradient<T: Scalar>(
    coupling: &BlockAffineCoupling<T>,
    oracle_x: &BlockPrimalPoint<T>,
) -> Result<Vec<T>> {
    let ax = coupling.apply(oracle_x)?;
    Ok(coupling.b().iter().zip(&ax).map(|(&b, &a)| b - a).collect())
}

#[cfg(test)]
mod tests;
