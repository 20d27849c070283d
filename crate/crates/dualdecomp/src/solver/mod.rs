//! Uniform interface to the convex subproblems the toolkit solves: linear,
//! convex-quadratic and second-order-cone representable programs, plus an
//! exact path for small binary selection problems.
//!
//! Programs are assembled through [`ConicProgram`] and handed to a single
//! conic backend ([`backend`], built on Clarabel). Callers never talk to
//! the backend directly, so it can be swapped without touching them.

mod backend;
mod milp;

use crate::error::{Error, Result};
use crate::linalg::norm2;
use crate::scalar::{s, Scalar};

/// Exactness cap for the binary path of [`solve`].
pub const MILP_BINARY_CAP: usize = 25;

/// Default solve tolerance.
pub fn default_tol<T: Scalar>() -> T {
    s(1e-8)
}

/// Sparse affine expression `Σ coeff·x_i + constant`.
#[derive(Clone, Debug, PartialEq)]
pub struct Affine<T> {
    pub terms: Vec<(usize, T)>,
    pub constant: T,
}

impl<T: Scalar> Affine<T> {
    pub fn zero() -> Self {
        Self { terms: Vec::new(), constant: T::zero() }
    }

    pub fn constant(v: T) -> Self {
        Self { terms: Vec::new(), constant: v }
    }

    pub fn var(i: usize) -> Self {
        Self { terms: vec![(i, T::one())], constant: T::zero() }
    }

    pub fn term(i: usize, c: T) -> Self {
        Self { terms: vec![(i, c)], constant: T::zero() }
    }

    pub fn plus_term(mut self, i: usize, c: T) -> Self {
        self.terms.push((i, c));
        self
    }

    pub fn plus_const(mut self, v: T) -> Self {
        self.constant = self.constant + v;
        self
    }

    pub fn eval(&self, x: &[T]) -> T {
        let mut acc = self.constant;
        for &(i, c) in &self.terms {
            acc = acc + c * x[i];
        }
        acc
    }
}

/// One block of constraints over program variables.
#[derive(Clone, Debug)]
pub enum ConstraintBlock<T> {
    /// Each row: `expr == 0`.
    Equality(Vec<Affine<T>>),
    /// Each row: `expr <= 0`.
    Inequality(Vec<Affine<T>>),
    /// `‖(e_1, …, e_d)‖₂ <= e_0` where all entries are affine.
    SecondOrder(Vec<Affine<T>>),
    /// Two-term geometric-mean cone `{u >= 0, v >= 0, u·v >= ‖w‖₂²}`
    /// (a rotated second-order cone without the factor 2).
    RotatedSecondOrder { u: Affine<T>, v: Affine<T>, w: Vec<Affine<T>> },
}

impl<T: Scalar> ConstraintBlock<T> {
    pub fn num_rows(&self) -> usize {
        match self {
            ConstraintBlock::Equality(rows) | ConstraintBlock::Inequality(rows) => rows.len(),
            ConstraintBlock::SecondOrder(entries) => entries.len(),
            ConstraintBlock::RotatedSecondOrder { w, .. } => 2 + w.len(),
        }
    }

    fn max_var(&self) -> Option<usize> {
        let exprs: Vec<&Affine<T>> = match self {
            ConstraintBlock::Equality(rows) | ConstraintBlock::Inequality(rows) => {
                rows.iter().collect()
            }
            ConstraintBlock::SecondOrder(entries) => entries.iter().collect(),
            ConstraintBlock::RotatedSecondOrder { u, v, w } => {
                let mut e: Vec<&Affine<T>> = vec![u, v];
                e.extend(w.iter());
                e
            }
        };
        exprs.iter().flat_map(|e| e.terms.iter().map(|&(i, _)| i)).max()
    }

    /// Worst violation of this block at `x`. Cone products are reported
    /// raw (`‖w‖² - u·v`), so magnitudes are heuristic across kinds.
    pub fn violation(&self, x: &[T]) -> T {
        match self {
            ConstraintBlock::Equality(rows) => {
                rows.iter().fold(T::zero(), |m, e| m.max(e.eval(x).abs()))
            }
            ConstraintBlock::Inequality(rows) => {
                rows.iter().fold(T::zero(), |m, e| m.max(e.eval(x)))
            }
            ConstraintBlock::SecondOrder(entries) => {
                let head = entries[0].eval(x);
                let tail: Vec<T> = entries[1..].iter().map(|e| e.eval(x)).collect();
                norm2(&tail) - head
            }
            ConstraintBlock::RotatedSecondOrder { u, v, w } => {
                let uv = u.eval(x);
                let vv = v.eval(x);
                let wn: Vec<T> = w.iter().map(|e| e.eval(x)).collect();
                let prod = crate::linalg::dot(&wn, &wn) - uv * vv;
                (-uv).max(-vv).max(prod)
            }
        }
    }
}

/// A conic program: `minimize c0 + qᵀx + ½ xᵀPx` subject to constraint
/// blocks, with optional per-variable binary flags.
#[derive(Clone, Debug)]
pub struct ConicProgram<T> {
    names: Vec<String>,
    objective_const: T,
    objective_linear: Vec<T>,
    /// Upper-triangular entries of P (`i <= j`).
    objective_quad: Vec<(usize, usize, T)>,
    blocks: Vec<ConstraintBlock<T>>,
    binaries: Vec<usize>,
}

impl<T: Scalar> Default for ConicProgram<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> ConicProgram<T> {
    pub fn new() -> Self {
        Self {
            names: Vec::new(),
            objective_const: T::zero(),
            objective_linear: Vec::new(),
            objective_quad: Vec::new(),
            blocks: Vec::new(),
            binaries: Vec::new(),
        }
    }

    pub fn add_var(&mut self, name: impl Into<String>) -> usize {
        self.names.push(name.into());
        self.objective_linear.push(T::zero());
        self.names.len() - 1
    }

    pub fn add_vars(&mut self, prefix: &str, count: usize) -> std::ops::Range<usize> {
        let start = self.names.len();
        for i in 0..count {
            self.add_var(format!("{prefix}{i}"));
        }
        start..start + count
    }

    pub fn n_vars(&self) -> usize {
        self.names.len()
    }

    pub fn var_names(&self) -> &[String] {
        &self.names
    }

    pub fn set_obj_const(&mut self, v: T) {
        self.objective_const = v;
    }

    pub fn obj_const(&self) -> T {
        self.objective_const
    }

    pub fn add_obj_linear(&mut self, i: usize, c: T) {
        self.objective_linear[i] = self.objective_linear[i] + c;
    }

    pub fn obj_linear(&self) -> &[T] {
        &self.objective_linear
    }

    /// Add an entry of P for the quadratic term ½ xᵀPx; symmetric entries
    /// are stored upper-triangular.
    pub fn add_obj_quad(&mut self, i: usize, j: usize, v: T) {
        let (a, b) = if i <= j { (i, j) } else { (j, i) };
        self.objective_quad.push((a, b, v));
    }

    pub fn obj_quad(&self) -> &[(usize, usize, T)] {
        &self.objective_quad
    }

    pub fn push_block(&mut self, block: ConstraintBlock<T>) {
        self.blocks.push(block);
    }

    pub fn blocks(&self) -> &[ConstraintBlock<T>] {
        &self.blocks
    }

    pub fn mark_binary(&mut self, var: usize) {
        self.binaries.push(var);
    }

    pub fn binaries(&self) -> &[usize] {
        &self.binaries
    }

    /// Evaluate the objective at a point.
    pub fn objective_at(&self, x: &[T]) -> T {
        let mut v = self.objective_const + crate::linalg::dot(&self.objective_linear, x);
        for &(i, j, p) in &self.objective_quad {
            let contrib = p * x[i] * x[j];
            v = v + if i == j { contrib * s(0.5) } else { contrib };
        }
        v
    }

    /// Worst constraint violation over all blocks at `x`.
    pub fn max_violation(&self, x: &[T]) -> T {
        self.blocks.iter().fold(T::zero(), |m, b| m.max(b.violation(x)))
    }

    /// Half-open row range of each block in the stacked constraint order
    /// used by the backend (and its dual vector).
    pub fn block_row_ranges(&self) -> Vec<std::ops::Range<usize>> {
        let mut out = Vec::with_capacity(self.blocks.len());
        let mut cursor = 0;
        for b in &self.blocks {
            let n = b.num_rows();
            out.push(cursor..cursor + n);
            cursor += n;
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_vars();
        for (k, b) in self.blocks.iter().enumerate() {
            if let Some(mx) = b.max_var() {
                if mx >= n {
                    return Err(Error::Invalid(format!(
                        "block {k} references variable {mx} but only {n} are declared"
                    )));
                }
            }
        }
        for &(i, j, v) in &self.objective_quad {
            if i >= n || j >= n {
                return Err(Error::Invalid("quadratic term references undeclared variable".into()));
            }
            if i == j && v < T::zero() {
                return Err(Error::Invalid("quadratic objective has a negative diagonal".into()));
            }
        }
        for &b in &self.binaries {
            if b >= n {
                return Err(Error::Invalid("binary flag on undeclared variable".into()));
            }
        }
        Ok(())
    }
}

/// Solve status of one conic (or binary) program.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    NumericalLimit,
}

#[derive(Clone, Debug, Default)]
pub struct SolverStats {
    pub iterations: usize,
    pub solve_time: f64,
}

/// Outcome of a solve. `point` is present iff the status is `Optimal`;
/// numerical-limit exits attach their best iterate separately.
#[derive(Clone, Debug)]
pub struct SolveOutcome<T> {
    pub status: SolveStatus,
    pub point: Option<Vec<T>>,
    pub best_iterate: Option<Vec<T>>,
    pub objective_value: Option<T>,
    /// Dual values for the stacked constraint rows (see
    /// [`ConicProgram::block_row_ranges`]); inequality rows use the
    /// convention `L = obj + Σ λ_r·expr_r` with `λ >= 0`.
    pub row_duals: Option<Vec<T>>,
    pub stats: SolverStats,
}

impl<T: Scalar> SolveOutcome<T> {
    /// The optimal point, or an error describing why there is none.
    pub fn optimal_point(&self) -> Result<&[T]> {
        match self.status {
            SolveStatus::Optimal => Ok(self.point.as_deref().expect("optimal implies point")),
            SolveStatus::Infeasible => Err(Error::Infeasible("program infeasible".into())),
            SolveStatus::Unbounded => Err(Error::Unbounded("program unbounded".into())),
            SolveStatus::NumericalLimit => {
                Err(Error::Solver("numerical limit before optimality".into()))
            }
        }
    }
}

/// Solve a conic program to tolerance `tol`. Programs with binary flags are
/// solved exactly by branch-and-bound as long as the binary count stays
/// within [`MILP_BINARY_CAP`].
pub fn solve<T: Scalar>(prog: &ConicProgram<T>, tol: T) -> Result<SolveOutcome<T>> {
    prog.validate()?;
    if prog.binaries.is_empty() {
        backend::solve_conic(prog, tol)
    } else if prog.binaries.len() <= MILP_BINARY_CAP {
        milp::solve_binary(prog, tol)
    } else {
        Err(Error::BinaryCapExceeded { found: prog.binaries.len(), cap: MILP_BINARY_CAP })
    }
}

/// Append to `prog` a hypograph formulation of the geometric mean:
/// the projection of the added constraints onto `(terms, hypo)` is
/// `{ terms >= 0, hypo <= geomean(terms) }`.
///
/// Pairs of terms are combined through a balanced binary tower of
/// two-term geometric-mean cones. When the term count is not a power of
/// two the tower is padded with copies of the hypograph expression
/// itself, whose fixed point is exactly the p-term geometric mean; the
/// padding additionally pins `hypo >= 0`, which is immaterial for every
/// use that maximizes (or upper-bounds by) the hypograph value.
pub fn geomean_hypograph<T: Scalar>(
    prog: &mut ConicProgram<T>,
    terms: &[Affine<T>],
    hypo: Affine<T>,
) -> Result<()> {
    let p = terms.len();
    if p == 0 {
        return Err(Error::Invalid("geometric mean of zero terms".into()));
    }
    if p == 1 {
        // hypo <= u_1, u_1 >= 0
        let mut row = hypo.clone();
        for &(i, c) in &terms[0].terms {
            row = row.plus_term(i, -c);
        }
        row = row.plus_const(-terms[0].constant);
        let mut neg = Affine::constant(-terms[0].constant);
        for &(i, c) in &terms[0].terms {
            neg = neg.plus_term(i, -c);
        }
        prog.push_block(ConstraintBlock::Inequality(vec![row, neg]));
        return Ok(());
    }
    let width = p.next_power_of_two();
    let mut level: Vec<Affine<T>> = terms.to_vec();
    level.resize(width, hypo.clone());
    let mut depth = 0;
    while level.len() > 1 {
        let mut next = Vec::with_capacity(level.len() / 2);
        for (pair_idx, pair) in level.chunks(2).enumerate() {
            let g = prog.add_var(format!("geo{depth}_{pair_idx}"));
            prog.push_block(ConstraintBlock::RotatedSecondOrder {
                u: pair[0].clone(),
                v: pair[1].clone(),
                w: vec![Affine::var(g)],
            });
            next.push(Affine::var(g));
        }
        level = next;
        depth += 1;
    }
    // hypo <= root
    let root = level.pop().expect("tower leaves a root");
    let mut row = hypo;
    for &(i, c) in &root.terms {
        row = row.plus_term(i, -c);
    }
    row = row.plus_const(-root.constant);
    prog.push_block(ConstraintBlock::Inequality(vec![row]));
    Ok(())
}
