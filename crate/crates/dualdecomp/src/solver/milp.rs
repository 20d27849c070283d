//! Exact branch-and-bound over binary variables, using the conic backend
//! for continuous relaxations. Intended for small selection problems
//! (the cap is enforced by [`super::solve`]).

use super::{backend, Affine, ConicProgram, ConstraintBlock, SolveOutcome, SolveStatus, SolverStats};
use crate::error::{Error, Result};
use crate::scalar::{s, Scalar};

const INT_TOL: f64 = 1e-6;
const PRUNE_TOL: f64 = 1e-9;
const MAX_NODES: usize = 200_000;

pub(super) fn solve_binary<T: Scalar>(prog: &ConicProgram<T>, tol: T) -> Result<SolveOutcome<T>> {
    // Relaxation box 0 <= u <= 1 for every binary.
    let mut relaxed = prog.clone();
    let box_rows: Vec<Affine<T>> = prog
        .binaries()
        .iter()
        .flat_map(|&i| {
            [Affine::term(i, -T::one()), Affine::term(i, T::one()).plus_const(-T::one())]
        })
        .collect();
    relaxed.push_block(ConstraintBlock::Inequality(box_rows));

    let mut best: Option<(T, Vec<T>)> = None;
    let mut nodes = 0usize;
    let mut iterations = 0usize;
    let mut solve_time = 0.0f64;
    // DFS over partial assignments (var, value).
    let mut stack: Vec<Vec<(usize, T)>> = vec![Vec::new()];

    while let Some(fixes) = stack.pop() {
        nodes += 1;
        if nodes > MAX_NODES {
            return Err(Error::Solver("branch-and-bound node limit exceeded".into()));
        }
        let mut node = relaxed.clone();
        if !fixes.is_empty() {
            let rows: Vec<Affine<T>> =
                fixes.iter().map(|&(i, v)| Affine::term(i, T::one()).plus_const(-v)).collect();
            node.push_block(ConstraintBlock::Equality(rows));
        }
        let out = backend::solve_conic(&node, tol)?;
        iterations += out.stats.iterations;
        solve_time += out.stats.solve_time;
        match out.status {
            SolveStatus::Infeasible => continue,
            SolveStatus::Unbounded => {
                if fixes.is_empty() {
                    return Err(Error::Unbounded("binary relaxation unbounded".into()));
                }
                // No usable bound; cannot prune, cannot trust the point.
                // Branch on the first unfixed binary blindly.
            }
            SolveStatus::Optimal | SolveStatus::NumericalLimit => {}
        }
        let point = match (&out.point, &out.best_iterate) {
            (Some(p), _) => Some(p.clone()),
            (None, Some(p)) => Some(p.clone()),
            _ => None,
        };
        let bound_usable = out.status == SolveStatus::Optimal;
        if bound_usable {
            let lb = out.objective_value.expect("optimal implies objective");
            if let Some((best_obj, _)) = &best {
                if lb >= *best_obj - s(PRUNE_TOL) {
                    continue;
                }
            }
        }
        // Pick the most fractional unfixed binary (ties by lowest index).
        let fractional = point.as_ref().and_then(|x| {
            prog.binaries()
                .iter()
                .filter(|i| !fixes.iter().any(|&(f, _)| f == **i))
                .map(|&i| {
                    let xi = x[i].as_f64();
                    (i, (xi - xi.round()).abs())
                })
                .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(b.0.cmp(&a.0)))
        });
        match fractional {
            Some((_, frac)) if frac <= INT_TOL && bound_usable => {
                // Integral leaf: candidate solution.
                let mut x = point.expect("usable bound implies point");
                for &i in prog.binaries() {
                    x[i] = s(x[i].as_f64().round());
                }
                let obj = out.objective_value.expect("optimal implies objective");
                let improves = match &best {
                    Some((bo, _)) => obj < *bo - s(PRUNE_TOL),
                    None => true,
                };
                if improves {
                    best = Some((obj, x));
                }
            }
            Some((var, _)) => {
                // Children; value 1 explored first (pushed last).
                let mut zero = fixes.clone();
                zero.push((var, T::zero()));
                let mut one = fixes;
                one.push((var, T::one()));
                stack.push(zero);
                stack.push(one);
            }
            None => {
                // All binaries fixed but relaxation not cleanly optimal: skip.
            }
        }
    }

    let stats = SolverStats { iterations, solve_time };
    Ok(match best {
        Some((obj, x)) => SolveOutcome {
            status: SolveStatus::Optimal,
            point: Some(x),
            best_iterate: None,
            objective_value: Some(obj),
            row_duals: None,
            stats,
        },
        None => SolveOutcome {
            status: SolveStatus::Infeasible,
            point: None,
            best_iterate: None,
            objective_value: None,
            row_duals: None,
            stats,
        },
    })
}
