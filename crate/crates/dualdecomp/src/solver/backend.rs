//! Clarabel backend: assembles a [`ConicProgram`] into the solver's
//! `min ½xᵀPx + qᵀx  s.t.  Ax + s = b, s ∈ K` form and maps the result
//! back. This is the only module that touches the solver crate.

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus, SupportedConeT,
};

use super::{Affine, ConicProgram, ConstraintBlock, SolveOutcome, SolveStatus, SolverStats};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

struct RowStacker<T> {
    rows: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<T>,
    b: Vec<T>,
    cones: Vec<SupportedConeT<T>>,
    cursor: usize,
}

impl<T: Scalar> RowStacker<T> {
    fn new() -> Self {
        Self {
            rows: Vec::new(),
            cols: Vec::new(),
            vals: Vec::new(),
            b: Vec::new(),
            cones: Vec::new(),
            cursor: 0,
        }
    }

    /// Row enforcing `s_row = -expr(x)` (so `expr + s = 0` shifted into b).
    fn push_expr_leq(&mut self, e: &Affine<T>) {
        for &(i, c) in &e.terms {
            self.rows.push(self.cursor);
            self.cols.push(i);
            self.vals.push(c);
        }
        self.b.push(-e.constant);
        self.cursor += 1;
    }

    /// Row enforcing `s_row = expr(x)` (cone entry rows).
    fn push_expr_entry(&mut self, e: &Affine<T>) {
        for &(i, c) in &e.terms {
            self.rows.push(self.cursor);
            self.cols.push(i);
            self.vals.push(-c);
        }
        self.b.push(e.constant);
        self.cursor += 1;
    }
}

pub(super) fn solve_conic<T: Scalar>(prog: &ConicProgram<T>, tol: T) -> Result<SolveOutcome<T>> {
    let n = prog.n_vars();
    let mut st = RowStacker::new();
    for block in prog.blocks() {
        match block {
            ConstraintBlock::Equality(rows) => {
                for e in rows {
                    st.push_expr_leq(e);
                }
                st.cones.push(SupportedConeT::ZeroConeT(rows.len()));
            }
            ConstraintBlock::Inequality(rows) => {
                for e in rows {
                    st.push_expr_leq(e);
                }
                st.cones.push(SupportedConeT::NonnegativeConeT(rows.len()));
            }
            ConstraintBlock::SecondOrder(entries) => {
                for e in entries {
                    st.push_expr_entry(e);
                }
                st.cones.push(SupportedConeT::SecondOrderConeT(entries.len()));
            }
            ConstraintBlock::RotatedSecondOrder { u, v, w } => {
                // u·v >= ‖w‖² with u,v >= 0  <=>  ‖(u-v, 2w)‖ <= u+v
                let two = crate::scalar::s::<T>(2.0);
                let mut head = u.clone();
                for &(i, c) in &v.terms {
                    head = head.plus_term(i, c);
                }
                head = head.plus_const(v.constant);
                let mut diff = u.clone();
                for &(i, c) in &v.terms {
                    diff = diff.plus_term(i, -c);
                }
                diff = diff.plus_const(-v.constant);
                st.push_expr_entry(&head);
                st.push_expr_entry(&diff);
                for e in w {
                    let scaled = Affine {
                        terms: e.terms.iter().map(|&(i, c)| (i, c * two)).collect(),
                        constant: e.constant * two,
                    };
                    st.push_expr_entry(&scaled);
                }
                st.cones.push(SupportedConeT::SecondOrderConeT(2 + w.len()));
            }
        }
    }

    let m = st.cursor;
    let a = CscMatrix::new_from_triplets(m, n, st.rows, st.cols, st.vals);
    let (pr, pc, pv): (Vec<usize>, Vec<usize>, Vec<T>) = {
        let mut r = Vec::new();
        let mut c = Vec::new();
        let mut v = Vec::new();
        for &(i, j, val) in prog.obj_quad() {
            r.push(i);
            c.push(j);
            v.push(val);
        }
        (r, c, v)
    };
    let p = CscMatrix::new_from_triplets(n, n, pr, pc, pv);
    let q = prog.obj_linear().to_vec();

    let settings = DefaultSettingsBuilder::default()
        .verbose(false)
        .tol_gap_abs(tol)
        .tol_gap_rel(tol)
        .tol_feas(tol)
        .build()
        .map_err(|e| Error::Solver(format!("settings: {e}")))?;

    let mut solver = DefaultSolver::new(&p, &q, &a, &st.b, &st.cones, settings)
        .map_err(|e| Error::Solver(format!("problem setup: {e:?}")))?;
    solver.solve();
    let sol = &solver.solution;

    let stats = SolverStats { iterations: sol.iterations as usize, solve_time: sol.solve_time };
    let obj = sol.obj_val + prog.obj_const();
    let outcome = match sol.status {
        SolverStatus::Solved => SolveOutcome {
            status: SolveStatus::Optimal,
            point: Some(sol.x.clone()),
            best_iterate: None,
            objective_value: Some(obj),
            row_duals: Some(sol.z.clone()),
            stats,
        },
        SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => SolveOutcome {
            status: SolveStatus::Infeasible,
            point: None,
            best_iterate: None,
            objective_value: None,
            row_duals: None,
            stats,
        },
        SolverStatus::DualInfeasible | SolverStatus::AlmostDualInfeasible => SolveOutcome {
            status: SolveStatus::Unbounded,
            point: None,
            best_iterate: None,
            objective_value: None,
            row_duals: None,
            stats,
        },
        _ => SolveOutcome {
            status: SolveStatus::NumericalLimit,
            point: None,
            best_iterate: Some(sol.x.clone()),
            objective_value: Some(obj),
            row_duals: Some(sol.z.clone()),
            stats,
        },
    };
    Ok(outcome)
}
