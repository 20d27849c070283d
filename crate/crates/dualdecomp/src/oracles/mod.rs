//! Agent models and price-directed oracles.
//!
//! An agent is a lifted conic description of one convex objective f_i:
//! decision variables first, then inner (epigraph/auxiliary) variables,
//! with a linear objective whose partial minimum over the inner variables
//! at fixed decision equals f_i. On top of that sit the exact conjugate
//! subgradient oracle and the two multiple-response oracles: value
//! suboptimality and price perturbation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, Mat};
use crate::rng::{domain, substream};
use crate::scalar::{s, Scalar};
use crate::solver::{
    solve, Affine, ConicProgram, ConstraintBlock, SolveStatus,
};

/// Lifted description of one agent objective. Decision variables are the
/// first `n_decision` program variables; the objective must be linear.
#[derive(Clone, Debug)]
pub struct LiftedTemplate<T> {
    program: ConicProgram<T>,
    n_decision: usize,
}

impl<T: Scalar> LiftedTemplate<T> {
    pub fn new(program: ConicProgram<T>, n_decision: usize) -> Result<Self> {
        if n_decision == 0 || n_decision > program.n_vars() {
            return Err(Error::Invalid("decision variable count out of range".into()));
        }
        if !program.obj_quad().is_empty() {
            return Err(Error::Invalid(
                "lifted templates need linear objectives; lift quadratics through cones".into(),
            ));
        }
        program.validate()?;
        Ok(Self { program, n_decision })
    }

    pub fn n_decision(&self) -> usize {
        self.n_decision
    }

    pub fn program(&self) -> &ConicProgram<T> {
        &self.program
    }

    /// f expression evaluated at a full lifted point.
    pub fn objective_at(&self, point: &[T]) -> T {
        self.program.objective_at(point)
    }

    /// `min f(z, inner) − yᵀz`.
    fn conjugate_program(&self, y: &[T]) -> ConicProgram<T> {
        let mut p = self.program.clone();
        for (i, &yi) in y.iter().enumerate() {
            p.add_obj_linear(i, -yi);
        }
        p
    }

    /// `max δᵀz  s.t.  lifted constraints, f(z, inner) − yᵀz <= bound`.
    fn subopt_program(&self, y: &[T], delta: &[T], bound: T) -> ConicProgram<T> {
        let mut p = self.program.clone();
        let mut row = Affine::constant(p.obj_const() - bound);
        for (i, &c) in p.obj_linear().iter().enumerate() {
            if c != T::zero() {
                row = row.plus_term(i, c);
            }
        }
        for (i, &yi) in y.iter().enumerate() {
            if yi != T::zero() {
                row = row.plus_term(i, -yi);
            }
        }
        p.push_block(ConstraintBlock::Inequality(vec![row]));
        // replace the objective: maximize δᵀz over the decision block
        let n = p.n_vars();
        for i in 0..n {
            let cur = p.obj_linear()[i];
            if cur != T::zero() {
                p.add_obj_linear(i, -cur);
            }
        }
        p.set_obj_const(T::zero());
        for (i, &d) in delta.iter().enumerate() {
            p.add_obj_linear(i, -d);
        }
        p
    }
}

/// Closed-form conjugate oracles installed by benchmark families that
/// admit one.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub enum AnalyticConjugate<T> {
    /// `f(x) = costᵀx` on `{x >= 0, 1ᵀx = total}`: the argmin of
    /// `(cost − y)ᵀx` is the vertex at the smallest reduced cost
    /// (ties broken by lowest index).
    ScaledSimplexLinear { cost: Vec<T>, total: T },
}

impl<T: Scalar> AnalyticConjugate<T> {
    pub fn query(&self, y: &[T]) -> OracleResponse<T> {
        match self {
            AnalyticConjugate::ScaledSimplexLinear { cost, total } => {
                let mut best = 0usize;
                let mut best_red = cost[0] - y[0];
                for j in 1..cost.len() {
                    let red = cost[j] - y[j];
                    if red < best_red {
                        best = j;
                        best_red = red;
                    }
                }
                let mut x = vec![T::zero(); cost.len()];
                x[best] = *total;
                let f_value = cost[best] * *total;
                OracleResponse { x, f_value, lagrangian_value: best_red * *total }
            }
        }
    }
}

/// One agent: lifted template plus an optional closed-form conjugate
/// oracle used in place of the solver when present.
#[derive(Clone, Debug)]
pub struct AgentModel<T> {
    pub agent_id: usize,
    pub template: LiftedTemplate<T>,
    pub analytic: Option<AnalyticConjugate<T>>,
}

/// Exact oracle output for one price query.
#[derive(Clone, Debug, PartialEq)]
pub struct OracleResponse<T> {
    pub x: Vec<T>,
    pub f_value: T,
    pub lagrangian_value: T,
}

/// Result of evaluating f_i at a fixed decision point.
#[derive(Clone, Debug)]
pub struct Evaluation<T> {
    /// f_i(x), when the inner program is solvable at this point.
    pub f: Option<T>,
    /// Whether x lies in dom f_i up to the domain tolerance.
    pub dom_feasible: bool,
    /// Worst violation among constraints fully determined by the decision.
    pub violation: T,
}

/// Solve an oracle program with a tolerance-relaxation retry: tight
/// tolerances occasionally stall the interior-point backend on small
/// cone programs, and oracle responses tolerate reduced accuracy. A
/// stalled iterate is accepted only when it is near-feasible.
fn solve_oracle_program<T: Scalar>(prog: &ConicProgram<T>, tol: T) -> Result<Vec<T>> {
    let first = solve(prog, tol)?;
    if first.status == SolveStatus::Optimal {
        return Ok(first.point.expect("optimal implies point"));
    }
    if first.status == SolveStatus::NumericalLimit {
        let retry = solve(prog, tol * s(100.0))?;
        if retry.status == SolveStatus::Optimal {
            return Ok(retry.point.expect("optimal implies point"));
        }
        for out in [&retry, &first] {
            if let Some(best) = &out.best_iterate {
                if prog.max_violation(best) <= s(1e-6) {
                    return Ok(best.clone());
                }
            }
        }
    }
    first.optimal_point().map(|p| p.to_vec())
}

impl<T: Scalar> AgentModel<T> {
    pub fn n_decision(&self) -> usize {
        self.template.n_decision()
    }

    /// Solver-based conjugate oracle (always available).
    pub fn conjugate_via_solver(&self, y: &[T], tol: T) -> Result<OracleResponse<T>> {
        if y.len() != self.n_decision() {
            return Err(Error::DimensionMismatch("price length != decision dim".into()));
        }
        let prog = self.template.conjugate_program(y);
        let point = solve_oracle_program(&prog, tol)?;
        let x = point[..self.n_decision()].to_vec();
        let f_value = self.template.objective_at(&point);
        let lagrangian_value = f_value - dot(y, &x);
        Ok(OracleResponse { x, f_value, lagrangian_value })
    }

    /// Evaluate f_i at fixed decision x by minimizing the lifted objective
    /// over the inner variables; pure-decision constraints are checked
    /// directly against `dom_tol`.
    pub fn evaluate_f(&self, x: &[T], tol: T, dom_tol: T) -> Result<Evaluation<T>> {
        let nd = self.n_decision();
        if x.len() != nd {
            return Err(Error::DimensionMismatch("point length != decision dim".into()));
        }
        let prog = self.template.program();
        let n_inner = prog.n_vars() - nd;

        let subst = |e: &Affine<T>| -> Affine<T> {
            let mut constant = e.constant;
            let mut terms = Vec::new();
            for &(i, c) in &e.terms {
                if i < nd {
                    constant = constant + c * x[i];
                } else {
                    terms.push((i - nd, c));
                }
            }
            Affine { terms, constant }
        };
        // cone sides that collapse to a tiny negative constant are clamped
        // so boundary round-off does not flip the inner program infeasible
        let clamp_side = |e: Affine<T>| -> Affine<T> {
            if e.terms.is_empty() && e.constant < T::zero() && e.constant > -dom_tol {
                Affine::constant(T::zero())
            } else {
                e
            }
        };

        let mut inner = ConicProgram::<T>::new();
        inner.add_vars("v", n_inner);
        let mut violation = T::zero();
        for block in prog.blocks() {
            match block {
                ConstraintBlock::Equality(rows) => {
                    let mut keep = Vec::new();
                    for e in rows {
                        let se = subst(e);
                        if se.terms.is_empty() {
                            violation = violation.max(se.constant.abs());
                        } else {
                            keep.push(se);
                        }
                    }
                    if !keep.is_empty() {
                        inner.push_block(ConstraintBlock::Equality(keep));
                    }
                }
                ConstraintBlock::Inequality(rows) => {
                    let mut keep = Vec::new();
                    for e in rows {
                        let had_decision = e.terms.iter().any(|&(i, _)| i < nd);
                        let se = subst(e);
                        if se.terms.is_empty() {
                            violation = violation.max(se.constant);
                        } else if had_decision {
                            // rows that absorbed the fixed decision get a
                            // small cushion so solver round-off on the
                            // boundary cannot flip the inner program
                            // infeasible; the bias on f is O(cushion)
                            keep.push(se.plus_const(-s::<T>(1e-8)));
                        } else {
                            keep.push(se);
                        }
                    }
                    if !keep.is_empty() {
                        inner.push_block(ConstraintBlock::Inequality(keep));
                    }
                }
                ConstraintBlock::SecondOrder(entries) => {
                    let se: Vec<Affine<T>> = entries.iter().map(&subst).collect();
                    if se.iter().all(|e| e.terms.is_empty()) {
                        let head = se[0].constant;
                        let tail: Vec<T> = se[1..].iter().map(|e| e.constant).collect();
                        violation = violation.max(crate::linalg::norm2(&tail) - head);
                    } else {
                        inner.push_block(ConstraintBlock::SecondOrder(se));
                    }
                }
                ConstraintBlock::RotatedSecondOrder { u, v, w } => {
                    let su = clamp_side(subst(u));
                    let sv = clamp_side(subst(v));
                    let sw: Vec<Affine<T>> = w.iter().map(&subst).collect();
                    let all_const = su.terms.is_empty()
                        && sv.terms.is_empty()
                        && sw.iter().all(|e| e.terms.is_empty());
                    if all_const {
                        let blk = ConstraintBlock::RotatedSecondOrder { u: su, v: sv, w: sw };
                        violation = violation.max(blk.violation(&[]));
                    } else {
                        inner.push_block(ConstraintBlock::RotatedSecondOrder {
                            u: su,
                            v: sv,
                            w: sw,
                        });
                    }
                }
            }
        }
        let mut obj_const = prog.obj_const();
        for i in 0..nd {
            obj_const = obj_const + prog.obj_linear()[i] * x[i];
        }
        inner.set_obj_const(obj_const);
        for i in nd..prog.n_vars() {
            inner.add_obj_linear(i - nd, prog.obj_linear()[i]);
        }

        let dom_feasible_consts = violation <= dom_tol;
        if n_inner == 0 {
            return Ok(Evaluation {
                f: dom_feasible_consts.then_some(obj_const),
                dom_feasible: dom_feasible_consts,
                violation,
            });
        }
        let out = solve(&inner, tol)?;
        match out.status {
            SolveStatus::Optimal => Ok(Evaluation {
                f: Some(out.objective_value.expect("optimal implies objective")),
                dom_feasible: dom_feasible_consts,
                violation,
            }),
            SolveStatus::NumericalLimit => Ok(Evaluation {
                f: out.objective_value,
                dom_feasible: dom_feasible_consts,
                violation,
            }),
            SolveStatus::Infeasible => {
                Ok(Evaluation { f: None, dom_feasible: false, violation })
            }
            SolveStatus::Unbounded => {
                Err(Error::Unbounded("inner evaluation unbounded; dom f not bounded".into()))
            }
        }
    }
}

/// Exact conjugate subgradient oracle: a minimizer of `f(z) − yᵀz` over
/// dom f, through the closed form when the agent has one.
pub fn conjugate_oracle<T: Scalar>(
    agent: &AgentModel<T>,
    y: &[T],
    tol: T,
) -> Result<OracleResponse<T>> {
    if let Some(analytic) = &agent.analytic {
        if y.len() != agent.n_decision() {
            return Err(Error::DimensionMismatch("price length != decision dim".into()));
        }
        return Ok(analytic.query(y));
    }
    agent.conjugate_via_solver(y, tol)
}

/// Which multiple-response oracle generates the suboptimal columns.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OracleFamily {
    ValueSubopt,
    PricePerturbed,
}

/// Per-column provenance tag.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum OracleTag<T> {
    Exact,
    ValueSubopt(T),
    PricePerturbed(T),
}

/// Multiple-response oracle parameters.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OracleConfig<T> {
    pub family: OracleFamily,
    /// Relative suboptimality ε_v or perturbation radius ε_p.
    pub epsilon: T,
    /// Responses per agent per iteration (N_i), including the exact one.
    pub n_responses: usize,
    /// Optional (ε, count) splits of the response budget; counts must sum
    /// to `n_responses`.
    pub mixing: Option<Vec<(T, usize)>>,
    /// Absolute floor for the suboptimality budget when f*(y) ≈ 0.
    pub abs_floor: T,
    pub seed: u64,
    pub solve_tol: T,
}

impl<T: Scalar> OracleConfig<T> {
    pub fn new(family: OracleFamily, epsilon: T, n_responses: usize, seed: u64) -> Self {
        Self {
            family,
            epsilon,
            n_responses,
            mixing: None,
            abs_floor: s(1e-6),
            seed,
            solve_tol: crate::solver::default_tol(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epsilon < T::zero() {
            return Err(Error::Config("oracle epsilon must be nonnegative".into()));
        }
        if self.n_responses == 0 {
            return Err(Error::Config("need at least one response per agent".into()));
        }
        if let Some(mix) = &self.mixing {
            if mix.is_empty() {
                return Err(Error::Config("mixing list is empty".into()));
            }
            let total: usize = mix.iter().map(|&(_, c)| c).sum();
            if total != self.n_responses {
                return Err(Error::Config(format!(
                    "mixing counts sum to {total}, expected {}",
                    self.n_responses
                )));
            }
            if mix.iter().any(|&(e, _)| e < T::zero()) {
                return Err(Error::Config("mixing epsilons must be nonnegative".into()));
            }
        }
        Ok(())
    }
}

/// One candidate primal response.
#[derive(Clone, Debug)]
pub struct ResponseColumn<T> {
    pub x: Vec<T>,
    pub f_value: T,
    pub lagrangian_value: T,
    pub tag: OracleTag<T>,
    pub iteration: usize,
}

/// The matrix of candidate responses of one agent, column 1 always being
/// the exact oracle response for the query prices.
#[derive(Clone, Debug)]
pub struct ResponseBundle<T> {
    pub agent_id: usize,
    pub columns: Vec<ResponseColumn<T>>,
    /// Solver-failed columns replaced by duplicates of the exact column.
    pub dropped_columns: usize,
}

impl<T: Scalar> ResponseBundle<T> {
    pub fn width(&self) -> usize {
        self.columns.len()
    }

    /// Z_i as a dense n_i × N_i matrix.
    pub fn z_matrix(&self) -> Mat<T> {
        let n = self.columns[0].x.len();
        let mut z = Mat::zeros(n, self.columns.len());
        for (j, col) in self.columns.iter().enumerate() {
            for (i, &v) in col.x.iter().enumerate() {
                z[(i, j)] = v;
            }
        }
        z
    }
}

fn exact_column<T: Scalar>(
    agent: &AgentModel<T>,
    y: &[T],
    tol: T,
    iteration: usize,
) -> Result<ResponseColumn<T>> {
    let resp = conjugate_oracle(agent, y, tol)?;
    Ok(ResponseColumn {
        x: resp.x,
        f_value: resp.f_value,
        lagrangian_value: resp.lagrangian_value,
        tag: OracleTag::Exact,
        iteration,
    })
}

/// Suboptimality budget `ε·max(|f*(y)|, abs_floor)` on top of −f*(y).
fn subopt_bound<T: Scalar>(exact_lagrangian: T, epsilon: T, abs_floor: T) -> T {
    exact_lagrangian + epsilon * exact_lagrangian.abs().max(abs_floor)
}

/// Solve one spread direction of the value-suboptimality oracle.
/// Exposed at crate level so tests can pin the direction δ.
pub(crate) fn value_subopt_column<T: Scalar>(
    agent: &AgentModel<T>,
    y: &[T],
    delta: &[T],
    bound: T,
    tol: T,
) -> Result<(Vec<T>, T)> {
    let prog = agent.template.subopt_program(y, delta, bound);
    let point = solve_oracle_program(&prog, tol)?;
    let x = point[..agent.n_decision()].to_vec();
    let f_value = agent.template.objective_at(&point);
    Ok((x, f_value))
}

fn value_subopt_columns<T: Scalar>(
    agent: &AgentModel<T>,
    y: &[T],
    epsilon: T,
    count: usize,
    lead_exact: bool,
    cfg: &OracleConfig<T>,
    iteration: usize,
    sub_index: usize,
    out: &mut ResponseBundle<T>,
) -> Result<()> {
    let exact = exact_column(agent, y, cfg.solve_tol, iteration)?;
    let bound = subopt_bound(exact.lagrangian_value, epsilon, cfg.abs_floor);
    let start = if lead_exact {
        out.columns.push(exact.clone());
        1
    } else {
        0
    };
    for j in start..count {
        let mut rng = substream(
            cfg.seed,
            &[domain::ORACLE, agent.agent_id as u64, iteration as u64, 1, sub_index as u64, j as u64],
        );
        let delta: Vec<T> =
            (0..agent.n_decision()).map(|_| T::standard_normal(&mut rng)).collect();
        match value_subopt_column(agent, y, &delta, bound, cfg.solve_tol) {
            Ok((x, f_value)) => {
                let lagrangian_value = f_value - dot(y, &x);
                out.columns.push(ResponseColumn {
                    x,
                    f_value,
                    lagrangian_value,
                    tag: OracleTag::ValueSubopt(epsilon),
                    iteration,
                });
            }
            Err(_) => {
                out.dropped_columns += 1;
                out.columns.push(exact.clone());
            }
        }
    }
    Ok(())
}

fn price_perturbed_columns<T: Scalar>(
    agent: &AgentModel<T>,
    y: &[T],
    epsilon: T,
    count: usize,
    lead_exact: bool,
    cfg: &OracleConfig<T>,
    iteration: usize,
    sub_index: usize,
    out: &mut ResponseBundle<T>,
) -> Result<()> {
    let exact = exact_column(agent, y, cfg.solve_tol, iteration)?;
    let start = if lead_exact {
        out.columns.push(exact.clone());
        1
    } else {
        0
    };
    for j in start..count {
        let mut rng = substream(
            cfg.seed,
            &[domain::ORACLE, agent.agent_id as u64, iteration as u64, 2, sub_index as u64, j as u64],
        );
        let perturbed: Vec<T> = y
            .iter()
            .map(|&yc| {
                let radius = epsilon * yc.abs();
                yc + T::uniform(&mut rng, -radius, radius)
            })
            .collect();
        match conjugate_oracle(agent, &perturbed, cfg.solve_tol) {
            Ok(resp) => {
                // Lagrangian value is reported against the base prices y.
                let f_value = resp.f_value;
                let lagrangian_value = f_value - dot(y, &resp.x);
                out.columns.push(ResponseColumn {
                    x: resp.x,
                    f_value,
                    lagrangian_value,
                    tag: OracleTag::PricePerturbed(epsilon),
                    iteration,
                });
            }
            Err(_) => {
                out.dropped_columns += 1;
                out.columns.push(exact.clone());
            }
        }
    }
    Ok(())
}

/// ε_v-value-suboptimal response bundle: column 1 exact, columns 2..N the
/// maximizers of i.i.d. normal directions over the ε_v-suboptimal set.
pub fn value_suboptimal_bundle<T: Scalar>(
    agent: &AgentModel<T>,
    y: &[T],
    cfg: &OracleConfig<T>,
    iteration: usize,
) -> Result<ResponseBundle<T>> {
    cfg.validate()?;
    let mut out =
        ResponseBundle { agent_id: agent.agent_id, columns: Vec::new(), dropped_columns: 0 };
    value_subopt_columns(agent, y, cfg.epsilon, cfg.n_responses, true, cfg, iteration, 0, &mut out)?;
    Ok(out)
}

/// ε_p-price-perturbed response bundle: column 1 exact at y, columns 2..N
/// exact responses at prices drawn from the box `y ± ε_p·|y|`.
pub fn price_perturbed_bundle<T: Scalar>(
    agent: &AgentModel<T>,
    y: &[T],
    cfg: &OracleConfig<T>,
    iteration: usize,
) -> Result<ResponseBundle<T>> {
    cfg.validate()?;
    let mut out =
        ResponseBundle { agent_id: agent.agent_id, columns: Vec::new(), dropped_columns: 0 };
    price_perturbed_columns(agent, y, cfg.epsilon, cfg.n_responses, true, cfg, iteration, 0, &mut out)?;
    Ok(out)
}

/// Fresh bundle per the config (honoring the mixing splits, with the exact
/// column leading exactly once), concatenated with history columns from
/// previous iterations.
pub fn compose_bundle<T: Scalar>(
    agent: &AgentModel<T>,
    y: &[T],
    cfg: &OracleConfig<T>,
    history: &[&ResponseBundle<T>],
    iteration: usize,
) -> Result<ResponseBundle<T>> {
    cfg.validate()?;
    let mut out =
        ResponseBundle { agent_id: agent.agent_id, columns: Vec::new(), dropped_columns: 0 };
    let splits: Vec<(T, usize)> = match &cfg.mixing {
        Some(mix) => mix.clone(),
        None => vec![(cfg.epsilon, cfg.n_responses)],
    };
    for (sub_index, &(eps, count)) in splits.iter().enumerate() {
        if count == 0 {
            continue;
        }
        let lead_exact = sub_index == 0;
        match cfg.family {
            OracleFamily::ValueSubopt => value_subopt_columns(
                agent, y, eps, count, lead_exact, cfg, iteration, sub_index, &mut out,
            )?,
            OracleFamily::PricePerturbed => price_perturbed_columns(
                agent, y, eps, count, lead_exact, cfg, iteration, sub_index, &mut out,
            )?,
        }
    }
    for prior in history {
        out.columns.extend(prior.columns.iter().cloned());
    }
    Ok(out)
}
