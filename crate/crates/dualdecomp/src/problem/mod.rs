//! Coupled-problem data model: block coupling data, primal/dual points,
//! optimality-condition residuals and the stopping rule shared by every
//! other module.
//!
//! All types are immutable after construction; the operations are pure
//! functions, so everything here is safe to share across threads.

pub mod instance;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, norm2, Mat};
use crate::scalar::{s, Scalar};

/// Per-row tag: plain inequality, or one side of an opposing pair that
/// encodes an original equality constraint.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RowKind {
    #[serde(rename = "inequality")]
    Inequality,
    #[serde(rename = "equality-pair-upper")]
    EqualityPairUpper,
    #[serde(rename = "equality-pair-lower")]
    EqualityPairLower,
}

/// Coupling data `Σ A_i x_i <= b` stored as K dense column blocks.
#[derive(Clone, Debug)]
pub struct BlockAffineCoupling<T> {
    blocks: Vec<Mat<T>>,
    b: Vec<T>,
    row_kind: Vec<RowKind>,
    /// For an equality-pair row, the index of its partner.
    pair_of: Vec<Option<usize>>,
}

impl<T: Scalar> BlockAffineCoupling<T> {
    pub fn new(blocks: Vec<Mat<T>>, b: Vec<T>, row_kind: Vec<RowKind>) -> Result<Self> {
        let m = b.len();
        if blocks.is_empty() {
            return Err(Error::Invalid("coupling needs at least one block".into()));
        }
        for (i, blk) in blocks.iter().enumerate() {
            if blk.rows() != m {
                return Err(Error::DimensionMismatch(format!(
                    "block {i} has {} rows, expected {m}",
                    blk.rows()
                )));
            }
        }
        if row_kind.len() != m {
            return Err(Error::DimensionMismatch("row_kind length != m".into()));
        }
        let pair_of = Self::match_pairs(&blocks, &b, &row_kind)?;
        Ok(Self { blocks, b, row_kind, pair_of })
    }

    /// Convenience constructor for all-inequality couplings.
    pub fn inequalities(blocks: Vec<Mat<T>>, b: Vec<T>) -> Result<Self> {
        let kinds = vec![RowKind::Inequality; b.len()];
        Self::new(blocks, b, kinds)
    }

    fn match_pairs(
        blocks: &[Mat<T>],
        b: &[T],
        row_kind: &[RowKind],
    ) -> Result<Vec<Option<usize>>> {
        let m = b.len();
        let scale = norm2(b).max(T::one());
        let tol = T::epsilon() * scale * s(100.0);
        let mut pair_of = vec![None; m];
        let uppers: Vec<usize> =
            (0..m).filter(|&r| row_kind[r] == RowKind::EqualityPairUpper).collect();
        let mut lowers: Vec<usize> =
            (0..m).filter(|&r| row_kind[r] == RowKind::EqualityPairLower).collect();
        for up in uppers {
            let found = lowers.iter().position(|&lo| {
                if (b[up] + b[lo]).abs() > tol {
                    return false;
                }
                blocks.iter().all(|blk| {
                    (0..blk.cols()).all(|c| (blk[(up, c)] + blk[(lo, c)]).abs() <= tol)
                })
            });
            match found {
                Some(pos) => {
                    let lo = lowers.swap_remove(pos);
                    pair_of[up] = Some(lo);
                    pair_of[lo] = Some(up);
                }
                None => {
                    return Err(Error::Invalid(format!(
                        "equality-pair-upper row {up} has no negated partner"
                    )))
                }
            }
        }
        if let Some(lo) = lowers.first() {
            return Err(Error::Invalid(format!("equality-pair-lower row {lo} is unmatched")));
        }
        Ok(pair_of)
    }

    pub fn num_rows(&self) -> usize {
        self.b.len()
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn block(&self, i: usize) -> &Mat<T> {
        &self.blocks[i]
    }

    pub fn blocks(&self) -> &[Mat<T>] {
        &self.blocks
    }

    pub fn block_dims(&self) -> Vec<usize> {
        self.blocks.iter().map(Mat::cols).collect()
    }

    pub fn total_dim(&self) -> usize {
        self.blocks.iter().map(Mat::cols).sum()
    }

    pub fn b(&self) -> &[T] {
        &self.b
    }

    pub fn row_kind(&self) -> &[RowKind] {
        &self.row_kind
    }

    pub fn pair_of(&self, row: usize) -> Option<usize> {
        self.pair_of[row]
    }

    /// A x for a conforming block point.
    pub fn apply(&self, x: &BlockPrimalPoint<T>) -> Result<Vec<T>> {
        self.check_dims(x)?;
        let mut out = vec![T::zero(); self.num_rows()];
        for (blk, xb) in self.blocks.iter().zip(&x.blocks) {
            let part = blk.matvec(xb);
            for (o, p) in out.iter_mut().zip(part) {
                *o = *o + p;
            }
        }
        Ok(out)
    }

    pub fn check_dims(&self, x: &BlockPrimalPoint<T>) -> Result<()> {
        if x.blocks.len() != self.num_blocks() {
            return Err(Error::DimensionMismatch(format!(
                "point has {} blocks, coupling {}",
                x.blocks.len(),
                self.num_blocks()
            )));
        }
        for (i, (blk, xb)) in self.blocks.iter().zip(&x.blocks).enumerate() {
            if blk.cols() != xb.len() {
                return Err(Error::DimensionMismatch(format!(
                    "block {i}: point dim {} vs coupling dim {}",
                    xb.len(),
                    blk.cols()
                )));
            }
        }
        Ok(())
    }
}

/// Price vector for the coupling rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualPoint<T> {
    lambda: Vec<T>,
}

impl<T: Scalar> DualPoint<T> {
    pub fn new(lambda: Vec<T>) -> Result<Self> {
        if let Some(v) = lambda.iter().find(|v| **v < T::zero()) {
            return Err(Error::Invalid(format!("negative price {v}")));
        }
        Ok(Self { lambda })
    }

    pub fn zeros(m: usize) -> Self {
        Self { lambda: vec![T::zero(); m] }
    }

    /// Clamp entries slightly below zero (solver round-off) up to zero.
    pub fn clamped(lambda: Vec<T>) -> Self {
        Self { lambda: lambda.into_iter().map(|v| v.max(T::zero())).collect() }
    }

    pub fn lambda(&self) -> &[T] {
        &self.lambda
    }

    pub fn len(&self) -> usize {
        self.lambda.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambda.is_empty()
    }
}

/// Block-structured primal point, optionally carrying per-block objective
/// values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockPrimalPoint<T> {
    pub blocks: Vec<Vec<T>>,
    pub f_values: Option<Vec<T>>,
}

impl<T: Scalar> BlockPrimalPoint<T> {
    pub fn new(blocks: Vec<Vec<T>>) -> Self {
        Self { blocks, f_values: None }
    }

    pub fn with_f_values(blocks: Vec<Vec<T>>, f_values: Vec<T>) -> Self {
        assert_eq!(blocks.len(), f_values.len());
        Self { blocks, f_values: Some(f_values) }
    }

    pub fn concat(&self) -> Vec<T> {
        self.blocks.iter().flatten().copied().collect()
    }

    pub fn total_f(&self) -> Option<T> {
        self.f_values.as_ref().map(|fs| fs.iter().fold(T::zero(), |a, &v| a + v))
    }

    /// Split a concatenated vector back into blocks of the given dims.
    pub fn from_concat(dims: &[usize], flat: &[T]) -> Result<Self> {
        if dims.iter().sum::<usize>() != flat.len() {
            return Err(Error::DimensionMismatch("concat length != Σ dims".into()));
        }
        let mut blocks = Vec::with_capacity(dims.len());
        let mut cursor = 0;
        for &d in dims {
            blocks.push(flat[cursor..cursor + d].to_vec());
            cursor += d;
        }
        Ok(Self::new(blocks))
    }
}

/// Primal and complementary-slackness residuals.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Residuals<T> {
    pub r_p: T,
    pub r_c: T,
}

impl<T: Scalar> Residuals<T> {
    pub fn sum(&self) -> T {
        self.r_p + self.r_c
    }
}

/// Local prices `y_i = -A_iᵀ λ` for every block.
pub fn local_prices<T: Scalar>(
    coupling: &BlockAffineCoupling<T>,
    dual: &DualPoint<T>,
) -> Result<Vec<Vec<T>>> {
    if dual.len() != coupling.num_rows() {
        return Err(Error::DimensionMismatch(format!(
            "dual has {} entries, coupling {} rows",
            dual.len(),
            coupling.num_rows()
        )));
    }
    Ok(coupling
        .blocks
        .iter()
        .map(|blk| blk.tr_matvec(dual.lambda()).into_iter().map(|v| -v).collect())
        .collect())
}

/// `r_p = 1ᵀ(Ax − b)₊` and `r_c = λᵀ|Ax − b|`.
pub fn residuals<T: Scalar>(
    coupling: &BlockAffineCoupling<T>,
    x: &BlockPrimalPoint<T>,
    dual: &DualPoint<T>,
) -> Result<Residuals<T>> {
    if dual.len() != coupling.num_rows() {
        return Err(Error::DimensionMismatch("dual length != m".into()));
    }
    let ax = coupling.apply(x)?;
    Ok(residuals_from_ax(&ax, coupling.b(), dual.lambda()))
}

/// Residuals from a precomputed `A x`.
pub fn residuals_from_ax<T: Scalar>(ax: &[T], b: &[T], lambda: &[T]) -> Residuals<T> {
    let mut r_p = T::zero();
    let mut r_c = T::zero();
    for ((&axr, &br), &lr) in ax.iter().zip(b).zip(lambda) {
        let viol = axr - br;
        r_p = r_p + viol.max(T::zero());
        r_c = r_c + lr * viol.abs();
    }
    Residuals { r_p, r_c }
}

/// `r_p / ‖b‖₂`; errors when `b = 0`, in which case callers must supply an
/// absolute feasibility threshold instead.
pub fn relative_primal_infeasibility<T: Scalar>(
    res: &Residuals<T>,
    coupling: &BlockAffineCoupling<T>,
) -> Result<T> {
    let denom = norm2(coupling.b());
    if denom <= T::zero() {
        return Err(Error::Invalid(
            "‖b‖₂ = 0: relative infeasibility undefined, use an absolute threshold".into(),
        ));
    }
    Ok(res.r_p / denom)
}

/// Dual function value `g(λ) = Σ_i (f_i(x_i) − y_iᵀ x_i) − λᵀ b` from exact
/// oracle responses (with per-block f values) at `y = −Aᵀλ`.
pub fn dual_value<T: Scalar>(
    coupling: &BlockAffineCoupling<T>,
    dual: &DualPoint<T>,
    oracle_responses: &BlockPrimalPoint<T>,
) -> Result<T> {
    coupling.check_dims(oracle_responses)?;
    let f_values = oracle_responses
        .f_values
        .as_ref()
        .ok_or_else(|| Error::Invalid("oracle responses carry no f values".into()))?;
    let prices = local_prices(coupling, dual)?;
    let mut g = -dot(dual.lambda(), coupling.b());
    for ((fb, xb), yb) in f_values.iter().zip(&oracle_responses.blocks).zip(&prices) {
        g = g + *fb - dot(yb, xb);
    }
    Ok(g)
}

/// Stopping rule `r_p + r_c <= eps_r` (closed inequality).
pub fn stopping_check<T: Scalar>(res: &Residuals<T>, eps_r: T) -> bool {
    res.sum() <= eps_r
}
