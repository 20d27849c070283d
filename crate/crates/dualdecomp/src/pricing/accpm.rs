//! Homogeneous analytic-center cutting-plane method.
//!
//! The dual problem is embedded into `z = (t, λ̄) ∈ R₊₊ × R^m` with
//! `λ = λ̄/t`. Each iteration recenters the augmented barrier
//!
//! `F(z) = −Σ_j log((t·d_j − c_jᵀλ̄)/n_j) − log t + ½‖z‖₂²`
//!
//! by damped Newton, queries a neutral cut at `λ̄/t` and appends it.

use serde::{Deserialize, Serialize};

use super::averaging::QueryRecord;
use super::{generate_cut, Cut, PriceBox};
use crate::error::{Error, Result};
use crate::linalg::{dot, norm2, Cholesky, Mat};
use crate::problem::{BlockAffineCoupling, BlockPrimalPoint, DualPoint};
use crate::scalar::{s, Scalar};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AccpmConfig<T> {
    pub newton_tol: T,
    pub max_newton: usize,
    pub armijo: T,
    pub backtrack: T,
    /// Stop when `‖λ^{k+1} − λ^k‖₂` falls below this.
    pub lambda_tol: T,
}

impl<T: Scalar> Default for AccpmConfig<T> {
    fn default() -> Self {
        Self {
            newton_tol: s(1e-8),
            max_newton: 100,
            armijo: s(0.25),
            backtrack: s(0.5),
            lambda_tol: s(1e-6),
        }
    }
}

/// Result of one centering.
#[derive(Clone, Copy, Debug)]
pub struct CenterOutcome<T> {
    pub converged: bool,
    pub newton_iters: usize,
    pub grad_norm: T,
}

/// Localization state: accumulated cuts plus the homogeneous iterate.
#[derive(Clone, Debug)]
pub struct AccpmState<T> {
    cuts: Vec<Cut<T>>,
    t: T,
    lam_bar: Vec<T>,
    queries: Vec<QueryRecord<T>>,
    last_query_lambda: Option<Vec<T>>,
}

impl<T: Scalar> AccpmState<T> {
    /// Start from the 2m box cuts of a price box with nonempty interior.
    pub fn new(pbox: &PriceBox<T>) -> Result<Self> {
        for (l, u) in pbox.lower().iter().zip(pbox.upper()) {
            if u <= l {
                return Err(Error::Invalid(
                    "price box needs nonempty interior for localization".into(),
                ));
            }
        }
        Ok(Self::with_cuts(pbox.box_cuts(), T::one(), pbox.midpoint()))
    }

    /// Direct construction (mainly for tests and replay).
    pub fn with_cuts(cuts: Vec<Cut<T>>, t: T, lam_bar: Vec<T>) -> Self {
        Self { cuts, t, lam_bar, queries: Vec::new(), last_query_lambda: None }
    }

    pub fn cuts(&self) -> &[Cut<T>] {
        &self.cuts
    }

    pub fn queries(&self) -> &[QueryRecord<T>] {
        &self.queries
    }

    pub fn z(&self) -> (T, &[T]) {
        (self.t, &self.lam_bar)
    }

    /// Prices at the current iterate, `λ = λ̄/t` clamped to R₊
    /// (box cuts keep the center nonnegative up to round-off).
    pub fn query_point(&self) -> DualPoint<T> {
        DualPoint::clamped(self.lam_bar.iter().map(|&v| v / self.t).collect())
    }

    fn slacks(&self, t: T, lam_bar: &[T]) -> Vec<T> {
        self.cuts.iter().map(|cut| cut.slack(t, lam_bar)).collect()
    }

    pub fn strictly_interior(&self) -> bool {
        self.t > T::zero() && self.slacks(self.t, &self.lam_bar).iter().all(|&v| v > T::zero())
    }

    /// Barrier value F(z).
    pub fn barrier_value(&self, t: T, lam_bar: &[T]) -> T {
        let mut f = -t.ln();
        for cut in &self.cuts {
            let sigma = cut.slack(t, lam_bar);
            f = f - (sigma / cut.n).ln();
        }
        f + (t * t + dot(lam_bar, lam_bar)) * s(0.5)
    }

    /// Gradient and Hessian of F at (t, λ̄); coordinate 0 is t.
    fn barrier_grad_hess(&self, t: T, lam_bar: &[T]) -> (Vec<T>, Mat<T>) {
        let m = lam_bar.len();
        let dim = m + 1;
        let mut grad = vec![T::zero(); dim];
        let mut hess = Mat::scaled_identity(dim, T::one());
        // proximal term
        grad[0] = t;
        for (i, &v) in lam_bar.iter().enumerate() {
            grad[1 + i] = v;
        }
        // -log t
        grad[0] = grad[0] - T::one() / t;
        hess[(0, 0)] = hess[(0, 0)] + T::one() / (t * t);
        // cut terms: a_j = (d_j, -c_j), σ_j = a_jᵀz
        for cut in &self.cuts {
            let sigma = cut.slack(t, lam_bar);
            let inv = T::one() / sigma;
            let inv2 = inv * inv;
            grad[0] = grad[0] - cut.d * inv;
            for (i, &ci) in cut.c.iter().enumerate() {
                grad[1 + i] = grad[1 + i] + ci * inv;
            }
            // rank-one update a aᵀ/σ²
            hess[(0, 0)] = hess[(0, 0)] + cut.d * cut.d * inv2;
            for (i, &ci) in cut.c.iter().enumerate() {
                let v = -cut.d * ci * inv2;
                hess[(0, 1 + i)] = hess[(0, 1 + i)] + v;
                hess[(1 + i, 0)] = hess[(1 + i, 0)] + v;
                for (j, &cj) in cut.c.iter().enumerate().skip(i) {
                    let w = ci * cj * inv2;
                    hess[(1 + i, 1 + j)] = hess[(1 + i, 1 + j)] + w;
                    if i != j {
                        hess[(1 + j, 1 + i)] = hess[(1 + j, 1 + i)] + w;
                    }
                }
            }
        }
        (grad, hess)
    }

    /// Cancellation noise floor of the gradient evaluation at the current
    /// iterate: the barrier terms `a_j/σ_j` have magnitude `n_j/σ_j` and
    /// mostly cancel at the center, so the gradient cannot be resolved
    /// below roughly `ε` times their magnitude sum.
    fn gradient_noise_floor(&self, t: T, lam_bar: &[T]) -> T {
        let mut mag = T::one() / t + (t * t + dot(lam_bar, lam_bar)).sqrt();
        for cut in &self.cuts {
            mag = mag + cut.n / cut.slack(t, lam_bar);
        }
        T::epsilon() * mag * s(10.0)
    }

    /// Damped Newton with backtracking to the analytic center of the
    /// current barrier. Interiority is maintained by the line search;
    /// convergence is declared at `newton_tol` or at the gradient's
    /// evaluation noise floor, whichever is larger.
    pub fn center(&mut self, config: &AccpmConfig<T>) -> Result<CenterOutcome<T>> {
        if !self.strictly_interior() {
            return Err(Error::Solver("centering started outside the localization set".into()));
        }
        let mut best_grad = T::infinity();
        for iter in 0..config.max_newton {
            let (grad, hess) = self.barrier_grad_hess(self.t, &self.lam_bar);
            let gnorm = norm2(&grad);
            best_grad = best_grad.min(gnorm);
            let floor = self.gradient_noise_floor(self.t, &self.lam_bar);
            if gnorm <= config.newton_tol.max(floor) {
                return Ok(CenterOutcome { converged: true, newton_iters: iter, grad_norm: gnorm });
            }
            // collapsed localization sets push 1/σ² beyond the dynamic
            // range of the factorization; a diagonal bump keeps the step a
            // guarded descent direction
            let chol = {
                let mut factored = Cholesky::factor(&hess);
                if factored.is_none() {
                    let dim = hess.rows();
                    let diag_max =
                        (0..dim).fold(T::zero(), |m, i| m.max(hess[(i, i)].abs()));
                    for bump_exp in [-10.0f64, -6.0, -2.0] {
                        let mut bumped = hess.clone();
                        let mu = diag_max * s::<T>(10f64.powf(bump_exp));
                        for i in 0..dim {
                            bumped[(i, i)] = bumped[(i, i)] + mu;
                        }
                        factored = Cholesky::factor(&bumped);
                        if factored.is_some() {
                            break;
                        }
                    }
                }
                factored.ok_or_else(|| {
                    Error::Solver("barrier Hessian not positive definite".into())
                })?
            };
            let neg_grad: Vec<T> = grad.iter().map(|&v| -v).collect();
            let mut dir = chol.solve(&neg_grad);
            // one round of iterative refinement; tight slacks make the
            // Hessian ill-conditioned enough to cost six digits otherwise
            let residual: Vec<T> = {
                let hd = hess.matvec(&dir);
                neg_grad.iter().zip(&hd).map(|(&a, &b)| a - b).collect()
            };
            let correction = chol.solve(&residual);
            for (d, c) in dir.iter_mut().zip(&correction) {
                *d = *d + *c;
            }
            let decrement = -dot(&grad, &dir); // positive for a descent step
            // Newton decrement √(gᵀH⁻¹g): with the modulus-1 proximal term
            // it bounds the distance to the center, and unlike the raw
            // gradient it stays meaningful when tight slacks blow up the
            // conditioning.
            if decrement <= config.newton_tol * config.newton_tol {
                return Ok(CenterOutcome { converged: true, newton_iters: iter, grad_norm: gnorm });
            }

            let f0 = self.barrier_value(self.t, &self.lam_bar);
            // absolute slack absorbing float noise once the decrement is
            // below evaluation precision
            let noise = s::<T>(1e-13) * (T::one() + f0.abs());
            let mut step = T::one();
            let mut accepted = false;
            for _ in 0..60 {
                let t_new = self.t + step * dir[0];
                let lam_new: Vec<T> = self
                    .lam_bar
                    .iter()
                    .enumerate()
                    .map(|(i, &v)| v + step * dir[1 + i])
                    .collect();
                let interior = t_new > T::zero()
                    && self.slacks(t_new, &lam_new).iter().all(|&v| v > T::zero());
                if interior {
                    let f_new = self.barrier_value(t_new, &lam_new);
                    if f_new <= f0 - config.armijo * step * decrement + noise {
                        self.t = t_new;
                        self.lam_bar = lam_new;
                        accepted = true;
                        break;
                    }
                }
                step = step * config.backtrack;
            }
            if !accepted {
                // line search exhausted; gradient is at its noise floor
                return Ok(CenterOutcome {
                    converged: false,
                    newton_iters: iter,
                    grad_norm: best_grad,
                });
            }
        }
        let (grad, _) = self.barrier_grad_hess(self.t, &self.lam_bar);
        Ok(CenterOutcome {
            converged: false,
            newton_iters: config.max_newton,
            grad_norm: norm2(&grad),
        })
    }

    /// Record the query at the current iterate and append its cut. The
    /// iterate is pushed strictly inside the new halfspace (whose boundary
    /// passes through it) so the next centering starts interior.
    pub fn append_cut(&mut self, cut: Cut<T>) {
        let lambda = self.query_point();
        // q̂(z) = (−d, c) in the (t, λ̄) ordering; ‖q̂‖ = n
        self.queries.push(QueryRecord {
            z_t: self.t,
            z_lam: self.lam_bar.clone(),
            qhat_t: -cut.d,
            qhat_lam: cut.c.clone(),
            lambda: lambda.lambda().to_vec(),
        });
        self.last_query_lambda = Some(lambda.lambda().to_vec());

        // inward normal of the new cut in z-space
        let mut normal = Vec::with_capacity(1 + cut.c.len());
        normal.push(cut.d / cut.n);
        normal.extend(cut.c.iter().map(|&v| -v / cut.n));
        // largest step keeping the old slacks and t positive
        let mut beta_max = T::infinity();
        for old in &self.cuts {
            let mut a_dot_u = old.d * normal[0];
            for (i, &ci) in old.c.iter().enumerate() {
                a_dot_u = a_dot_u - ci * normal[1 + i];
            }
            if a_dot_u < T::zero() {
                beta_max = beta_max.min(-old.slack(self.t, &self.lam_bar) / a_dot_u);
            }
        }
        if normal[0] < T::zero() {
            beta_max = beta_max.min(-self.t / normal[0]);
        }
        let mut beta = if beta_max.is_finite() {
            (beta_max * s(0.5)).min(T::one())
        } else {
            T::one()
        };
        // verify in floating point and halve until every slack (including
        // the new cut's, which grows with β) stays strictly positive
        let base_t = self.t;
        let base_lam = self.lam_bar.clone();
        self.cuts.push(cut);
        for _ in 0..100 {
            let t_new = base_t + beta * normal[0];
            let lam_new: Vec<T> = base_lam
                .iter()
                .enumerate()
                .map(|(i, &v)| v + beta * normal[1 + i])
                .collect();
            let interior =
                t_new > T::zero() && self.slacks(t_new, &lam_new).iter().all(|&v| v > T::zero());
            if interior {
                self.t = t_new;
                self.lam_bar = lam_new;
                return;
            }
            beta = beta * s(0.5);
        }
        // the set has collapsed below float resolution along the new
        // normal; stay at the boundary point and let centering's noise
        // guards cope
        self.t = base_t;
        self.lam_bar = base_lam;
    }
}

/// Outcome of one full localization step.
#[derive(Clone, Debug)]
pub struct AccpmStep<T> {
    pub lambda: DualPoint<T>,
    pub g_value: T,
    pub oracle_x: BlockPrimalPoint<T>,
    pub centering: CenterOutcome<T>,
    /// ‖λ^{k+1} − λ^k‖₂ against the previous query, once there is one.
    pub lambda_delta: Option<T>,
    /// Zero subgradient: current prices are dual optimal.
    pub converged: bool,
}

/// One iteration of the localization loop: recenter, query the oracle at
/// `λ̄/t`, append the normalized neutral cut, record the query for dual
/// averaging.
pub fn accpm_step<T, F>(
    state: &mut AccpmState<T>,
    coupling: &BlockAffineCoupling<T>,
    config: &AccpmConfig<T>,
    oracle: F,
) -> Result<AccpmStep<T>>
where
    T: Scalar,
    F: FnOnce(&DualPoint<T>) -> Result<(BlockPrimalPoint<T>, T)>,
{
    let centering = state.center(config)?;
    let lambda = state.query_point();
    let previous = state.last_query_lambda.clone();
    let (oracle_x, g_value) = oracle(&lambda)?;
    let cut = generate_cut(coupling, &oracle_x, &lambda, state.queries.len() + 1)?;
    let converged = cut.is_none();
    if let Some(cut) = cut {
        state.append_cut(cut);
    }
    let lambda_delta = previous.map(|prev| {
        let diff: Vec<T> =
            lambda.lambda().iter().zip(&prev).map(|(&a, &b)| a - b).collect();
        norm2(&diff)
    });
    Ok(AccpmStep { lambda, g_value, oracle_x, centering, lambda_delta, converged })
}
