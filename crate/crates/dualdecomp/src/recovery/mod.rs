//! Multi-response primal recovery: blend per-agent candidate responses
//! into a primal point with low residuals.
//!
//! The convex path solves a linear program over simplex weights per agent
//! (optionally dropping the complementary-slackness term from the
//! objective); the integral paths pick exactly one column per agent,
//! either exactly through branch-and-bound or by sampling the fractional
//! weights and greedy rounding.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::oracles::ResponseBundle;
use crate::problem::{BlockAffineCoupling, BlockPrimalPoint, DualPoint, Residuals};
use crate::rng::{domain, substream};
use crate::scalar::{s, Scalar};
use crate::solver::{solve, Affine, ConicProgram, ConstraintBlock, SolveStatus};

/// Residual objective used by the recovery problem.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveMode {
    RpPlusRc,
    RpOnly,
}

/// How the blending weights are constrained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SelectionMode {
    Convex,
    IntegralExact,
    IntegralHeuristic,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RecoveryConfig<T> {
    pub objective_mode: ObjectiveMode,
    pub selection_mode: SelectionMode,
    /// Samples drawn by the integral heuristic.
    pub heuristic_samples: usize,
    pub solve_tol: T,
    pub seed: u64,
}

impl<T: Scalar> Default for RecoveryConfig<T> {
    fn default() -> Self {
        Self {
            objective_mode: ObjectiveMode::RpPlusRc,
            selection_mode: SelectionMode::Convex,
            heuristic_samples: 16,
            solve_tol: s(1e-9),
            seed: 0,
        }
    }
}

impl<T: Scalar> RecoveryConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if self.selection_mode == SelectionMode::IntegralHeuristic && self.heuristic_samples == 0 {
            return Err(Error::Config("heuristic needs at least one sample".into()));
        }
        Ok(())
    }
}

/// Recovered point with its blending weights and residuals.
#[derive(Clone, Debug)]
pub struct RecoveryResult<T> {
    pub x_bar: BlockPrimalPoint<T>,
    /// Per-agent weights; a simplex element (convex) or one-hot (integral).
    pub weights: Vec<Vec<T>>,
    pub residuals: Residuals<T>,
    pub lp_objective: T,
    /// Set when the LP solver failed and the exact-response point was
    /// returned instead.
    pub fallback: bool,
}

/// Per-agent images G_i = A_i Z_i plus bookkeeping shared by all paths.
struct BundleImages<T> {
    g: Vec<Mat<T>>,
    widths: Vec<usize>,
}

fn bundle_images<T: Scalar>(
    bundles: &[ResponseBundle<T>],
    coupling: &BlockAffineCoupling<T>,
) -> Result<BundleImages<T>> {
    if bundles.len() != coupling.num_blocks() {
        return Err(Error::DimensionMismatch(format!(
            "{} bundles for {} coupling blocks",
            bundles.len(),
            coupling.num_blocks()
        )));
    }
    let mut g = Vec::with_capacity(bundles.len());
    let mut widths = Vec::with_capacity(bundles.len());
    for (i, bundle) in bundles.iter().enumerate() {
        if bundle.columns.is_empty() {
            return Err(Error::Invalid(format!("agent {i} bundle is empty")));
        }
        let z = bundle.z_matrix();
        if z.rows() != coupling.block(i).cols() {
            return Err(Error::DimensionMismatch(format!(
                "agent {i}: bundle dim {} vs coupling dim {}",
                z.rows(),
                coupling.block(i).cols()
            )));
        }
        g.push(coupling.block(i).matmat(&z));
        widths.push(bundle.width());
    }
    Ok(BundleImages { g, widths })
}

fn blend_point<T: Scalar>(
    bundles: &[ResponseBundle<T>],
    weights: &[Vec<T>],
) -> BlockPrimalPoint<T> {
    let blocks = bundles
        .iter()
        .zip(weights)
        .map(|(bundle, w)| {
            let n = bundle.columns[0].x.len();
            let mut x = vec![T::zero(); n];
            for (col, &wj) in bundle.columns.iter().zip(w) {
                for (xi, &v) in x.iter_mut().zip(&col.x) {
                    *xi = *xi + wj * v;
                }
            }
            x
        })
        .collect();
    BlockPrimalPoint::new(blocks)
}

fn one_hot<T: Scalar>(widths: &[usize], selection: &[usize]) -> Vec<Vec<T>> {
    widths
        .iter()
        .zip(selection)
        .map(|(&w, &j)| {
            let mut u = vec![T::zero(); w];
            u[j] = T::one();
            u
        })
        .collect()
}

fn exact_selection_result<T: Scalar>(
    bundles: &[ResponseBundle<T>],
    coupling: &BlockAffineCoupling<T>,
    dual: &DualPoint<T>,
    fallback: bool,
) -> Result<RecoveryResult<T>> {
    let widths: Vec<usize> = bundles.iter().map(ResponseBundle::width).collect();
    let weights = one_hot(&widths, &vec![0; bundles.len()]);
    let x_bar = blend_point(bundles, &weights);
    let res = crate::problem::residuals(coupling, &x_bar, dual)?;
    Ok(RecoveryResult { x_bar, weights, residuals: res, lp_objective: res.sum(), fallback })
}

/// Convex recovery LP over per-agent simplex weights.
///
/// Variables `u_i ∈ Δ^{N_i}`, slack `t >= (A x̄ − b)` with `t >= 0` so
/// `r_p = 1ᵀt` at the optimum, and in `RpPlusRc` mode `w >= |A x̄ − b|`
/// so `r_c = λᵀw`; the objective is `1ᵀt (+ λᵀw)`.
pub fn recover_convex<T: Scalar>(
    bundles: &[ResponseBundle<T>],
    coupling: &BlockAffineCoupling<T>,
    dual: &DualPoint<T>,
    config: &RecoveryConfig<T>,
) -> Result<RecoveryResult<T>> {
    config.validate()?;
    if dual.len() != coupling.num_rows() {
        return Err(Error::DimensionMismatch("dual length != m".into()));
    }
    let images = bundle_images(bundles, coupling)?;
    let m = coupling.num_rows();

    let mut prog = ConicProgram::<T>::new();
    let mut u_start = Vec::with_capacity(bundles.len());
    for (i, &w) in images.widths.iter().enumerate() {
        let range = prog.add_vars(&format!("u{i}_"), w);
        u_start.push(range.start);
    }
    let slack = prog.add_vars("t", m);
    for r in slack.clone() {
        prog.add_obj_linear(r, T::one());
    }
    let wvars = if config.objective_mode == ObjectiveMode::RpPlusRc {
        let wv = prog.add_vars("w", m);
        for (k, r) in wv.clone().enumerate() {
            prog.add_obj_linear(r, dual.lambda()[k]);
        }
        Some(wv)
    } else {
        None
    };

    // simplex rows per agent
    let mut eq_rows = Vec::with_capacity(bundles.len());
    let mut nonneg = Vec::new();
    for (i, &w) in images.widths.iter().enumerate() {
        let mut sum = Affine::constant(-T::one());
        for j in 0..w {
            sum = sum.plus_term(u_start[i] + j, T::one());
            nonneg.push(Affine::term(u_start[i] + j, -T::one()));
        }
        eq_rows.push(sum);
    }
    prog.push_block(ConstraintBlock::Equality(eq_rows));
    for r in slack.clone() {
        nonneg.push(Affine::term(r, -T::one()));
    }
    prog.push_block(ConstraintBlock::Inequality(nonneg));

    // Σ_i G_i u_i − t <= b  (and the |·| pair when tracking r_c)
    let mut rows = Vec::with_capacity(m);
    for r in 0..m {
        let mut e = Affine::constant(-coupling.b()[r]).plus_term(slack.start + r, -T::one());
        for (i, g) in images.g.iter().enumerate() {
            for j in 0..g.cols() {
                let v = g[(r, j)];
                if v != T::zero() {
                    e = e.plus_term(u_start[i] + j, v);
                }
            }
        }
        rows.push(e);
    }
    if let Some(wv) = &wvars {
        for r in 0..m {
            let mut up = Affine::constant(-coupling.b()[r]).plus_term(wv.start + r, -T::one());
            let mut lo = Affine::constant(coupling.b()[r]).plus_term(wv.start + r, -T::one());
            for (i, g) in images.g.iter().enumerate() {
                for j in 0..g.cols() {
                    let v = g[(r, j)];
                    if v != T::zero() {
                        up = up.plus_term(u_start[i] + j, v);
                        lo = lo.plus_term(u_start[i] + j, -v);
                    }
                }
            }
            rows.push(up);
            rows.push(lo);
        }
    }
    prog.push_block(ConstraintBlock::Inequality(rows));

    let out = match solve(&prog, config.solve_tol) {
        Ok(out) if out.status == SolveStatus::Optimal => out,
        // solver failure: fall back to the exact-response point, flagged
        _ => return exact_selection_result(bundles, coupling, dual, true),
    };
    let point = out.point.as_ref().expect("optimal implies point");

    // clamp solver round-off and renormalize each simplex weight vector
    let mut weights = Vec::with_capacity(bundles.len());
    for (i, &w) in images.widths.iter().enumerate() {
        let mut u: Vec<T> =
            point[u_start[i]..u_start[i] + w].iter().map(|&v| v.max(T::zero())).collect();
        let total = u.iter().fold(T::zero(), |a, &v| a + v);
        if total > T::zero() {
            for v in &mut u {
                *v = *v / total;
            }
        } else {
            u[0] = T::one();
        }
        weights.push(u);
    }
    let x_bar = blend_point(bundles, &weights);
    let res = crate::problem::residuals(coupling, &x_bar, dual)?;

    // the exact-response point is feasible for this LP; never do worse
    let exact = exact_selection_result(bundles, coupling, dual, false)?;
    let (cand_obj, exact_obj) = match config.objective_mode {
        ObjectiveMode::RpPlusRc => (res.sum(), exact.residuals.sum()),
        ObjectiveMode::RpOnly => (res.r_p, exact.residuals.r_p),
    };
    if exact_obj < cand_obj {
        return Ok(exact);
    }
    Ok(RecoveryResult {
        x_bar,
        weights,
        residuals: res,
        lp_objective: out.objective_value.expect("optimal implies objective"),
        fallback: false,
    })
}

/// Exact one-column-per-agent recovery minimizing `r_p`, via the binary
/// path of the subproblem solver.
pub fn recover_milp_exact<T: Scalar>(
    bundles: &[ResponseBundle<T>],
    coupling: &BlockAffineCoupling<T>,
    config: &RecoveryConfig<T>,
) -> Result<RecoveryResult<T>> {
    let images = bundle_images(bundles, coupling)?;
    let total_binaries: usize = images.widths.iter().sum();
    if total_binaries > crate::solver::MILP_BINARY_CAP {
        return Err(Error::BinaryCapExceeded {
            found: total_binaries,
            cap: crate::solver::MILP_BINARY_CAP,
        });
    }
    let m = coupling.num_rows();
    let mut prog = ConicProgram::<T>::new();
    let mut u_start = Vec::with_capacity(bundles.len());
    for (i, &w) in images.widths.iter().enumerate() {
        let range = prog.add_vars(&format!("u{i}_"), w);
        for v in range.clone() {
            prog.mark_binary(v);
        }
        u_start.push(range.start);
    }
    let slack = prog.add_vars("t", m);
    for r in slack.clone() {
        prog.add_obj_linear(r, T::one());
    }
    let mut eq_rows = Vec::new();
    for (i, &w) in images.widths.iter().enumerate() {
        let mut sum = Affine::constant(-T::one());
        for j in 0..w {
            sum = sum.plus_term(u_start[i] + j, T::one());
        }
        eq_rows.push(sum);
    }
    prog.push_block(ConstraintBlock::Equality(eq_rows));
    let mut rows: Vec<Affine<T>> =
        slack.clone().map(|r| Affine::term(r, -T::one())).collect();
    for r in 0..m {
        let mut e = Affine::constant(-coupling.b()[r]).plus_term(slack.start + r, -T::one());
        for (i, g) in images.g.iter().enumerate() {
            for j in 0..g.cols() {
                let v = g[(r, j)];
                if v != T::zero() {
                    e = e.plus_term(u_start[i] + j, v);
                }
            }
        }
        rows.push(e);
    }
    prog.push_block(ConstraintBlock::Inequality(rows));

    let out = solve(&prog, config.solve_tol)?;
    let point = out.optimal_point()?;
    let selection: Vec<usize> = images
        .widths
        .iter()
        .enumerate()
        .map(|(i, &w)| {
            let u = &point[u_start[i]..u_start[i] + w];
            u.iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap().then(b.0.cmp(&a.0)))
                .map(|(j, _)| j)
                .unwrap_or(0)
        })
        .collect();
    let weights = one_hot(&images.widths, &selection);
    let x_bar = blend_point(bundles, &weights);
    let zero = DualPoint::zeros(m);
    let res = crate::problem::residuals(coupling, &x_bar, &zero)?;
    Ok(RecoveryResult { x_bar, weights, residuals: res, lp_objective: res.r_p, fallback: false })
}

/// Total positive violation of `Σ columns - b`.
fn rp_of_totals<T: Scalar>(totals: &[T], b: &[T]) -> T {
    totals
        .iter()
        .zip(b)
        .fold(T::zero(), |acc, (&t, &bi)| acc + (t - bi).max(T::zero()))
}

/// Coordinate descent over per-agent column selections: repeatedly move an
/// agent to the column that strictly lowers `r_p` with all others fixed,
/// until a full pass makes no change. Returns the number of passes.
pub fn greedy_round<T: Scalar>(
    selection: &mut [usize],
    images: &[Mat<T>],
    b: &[T],
) -> usize {
    let m = b.len();
    let mut totals = vec![T::zero(); m];
    for (i, g) in images.iter().enumerate() {
        for r in 0..m {
            totals[r] = totals[r] + g[(r, selection[i])];
        }
    }
    let mut passes = 0;
    loop {
        passes += 1;
        let mut changed = false;
        for (i, g) in images.iter().enumerate() {
            let current = selection[i];
            // residual contribution with agent i removed
            let base: Vec<T> = (0..m).map(|r| totals[r] - g[(r, current)]).collect();
            let mut best_j = current;
            let mut best_rp = {
                let with: Vec<T> = (0..m).map(|r| base[r] + g[(r, current)]).collect();
                rp_of_totals(&with, b)
            };
            for j in 0..g.cols() {
                if j == current {
                    continue;
                }
                let with: Vec<T> = (0..m).map(|r| base[r] + g[(r, j)]).collect();
                let rp = rp_of_totals(&with, b);
                if rp < best_rp {
                    best_rp = rp;
                    best_j = j;
                }
            }
            if best_j != current {
                for r in 0..m {
                    totals[r] = totals[r] - g[(r, current)] + g[(r, best_j)];
                }
                selection[i] = best_j;
                changed = true;
            }
        }
        if !changed {
            return passes;
        }
        // strict decrease per move bounds the loop; this is a hard stop
        if passes > 10_000 {
            return passes;
        }
    }
}

/// Sampling + greedy-rounding heuristic for the integral recovery problem:
/// solve the convex relaxation, draw `S` one-hot samples per agent from the
/// fractional weights, greedy-round each, keep the lowest `r_p`.
pub fn recover_milp_heuristic<T: Scalar>(
    bundles: &[ResponseBundle<T>],
    coupling: &BlockAffineCoupling<T>,
    dual: &DualPoint<T>,
    config: &RecoveryConfig<T>,
) -> Result<RecoveryResult<T>> {
    config.validate()?;
    if config.heuristic_samples == 0 {
        return Err(Error::Config("heuristic needs at least one sample".into()));
    }
    let relax_cfg =
        RecoveryConfig { objective_mode: ObjectiveMode::RpPlusRc, ..config.clone() };
    let relaxed = recover_convex(bundles, coupling, dual, &relax_cfg)?;
    let images = bundle_images(bundles, coupling)?;

    let mut best: Option<(T, Vec<usize>)> = None;
    for sample_idx in 0..config.heuristic_samples {
        let mut rng = substream(config.seed, &[domain::HEURISTIC, sample_idx as u64]);
        let mut selection: Vec<usize> = relaxed
            .weights
            .iter()
            .map(|u| {
                // categorical draw respecting the one-hot constraint
                let draw = T::uniform(&mut rng, T::zero(), T::one());
                let mut acc = T::zero();
                for (j, &w) in u.iter().enumerate() {
                    acc = acc + w;
                    if draw <= acc {
                        return j;
                    }
                }
                u.len() - 1
            })
            .collect();
        greedy_round(&mut selection, &images.g, coupling.b());
        let mut totals = vec![T::zero(); coupling.num_rows()];
        for (i, g) in images.g.iter().enumerate() {
            for r in 0..coupling.num_rows() {
                totals[r] = totals[r] + g[(r, selection[i])];
            }
        }
        let rp = rp_of_totals(&totals, coupling.b());
        let improves = match &best {
            Some((cur, _)) => rp < *cur,
            None => true,
        };
        if improves {
            best = Some((rp, selection));
        }
    }
    let (_, selection) = best.expect("at least one sample");
    let weights = one_hot(&images.widths, &selection);
    let x_bar = blend_point(bundles, &weights);
    let res = crate::problem::residuals(coupling, &x_bar, dual)?;
    Ok(RecoveryResult { x_bar, weights, residuals: res, lp_objective: res.r_p, fallback: false })
}

/// Dispatch on the configured selection mode.
pub fn recover<T: Scalar>(
    bundles: &[ResponseBundle<T>],
    coupling: &BlockAffineCoupling<T>,
    dual: &DualPoint<T>,
    config: &RecoveryConfig<T>,
) -> Result<RecoveryResult<T>> {
    match config.selection_mode {
        SelectionMode::Convex => recover_convex(bundles, coupling, dual, config),
        SelectionMode::IntegralExact => recover_milp_exact(bundles, coupling, config),
        SelectionMode::IntegralHeuristic => {
            recover_milp_heuristic(bundles, coupling, dual, config)
        }
    }
}
