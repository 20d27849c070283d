//! Convex relaxation of the project/team assignment problem: n project
//! agents bid capacity from m team agents, coupled by
//! `Σ_i (x_i)_j <= c_j` with the team capacities themselves variables.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::InstanceBundle;
use crate::error::Result;
use crate::linalg::Mat;
use crate::oracles::{AgentModel, LiftedTemplate};
use crate::problem::BlockAffineCoupling;
use crate::rng::{domain, substream};
use crate::scalar::{s, Scalar};
use crate::solver::{Affine, ConicProgram, ConstraintBlock};

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct AssignParams {
    /// n (projects)
    pub projects: usize,
    /// m (teams = coupling rows)
    pub teams: usize,
}

impl Default for AssignParams {
    fn default() -> Self {
        Self { projects: 200, teams: 50 }
    }
}

const STREAM_TAG: u64 = 2;

pub fn generate<T: Scalar>(params: &AssignParams, seed: u64) -> Result<InstanceBundle<T>> {
    let n = params.projects;
    let m = params.teams;
    let mut rng = substream(seed, &[domain::GENERATOR, STREAM_TAG]);

    // rewards r_i ~ U[0,1]^m
    let rewards: Vec<Vec<T>> = (0..n)
        .map(|_| (0..m).map(|_| T::uniform(&mut rng, T::zero(), T::one())).collect())
        .collect();
    // consumed capacities q_i ∈ {1, ..., ceil(n/2m)}
    let q_hi = (n as f64 / (2.0 * m as f64)).ceil() as u64;
    let qs: Vec<u64> = (0..n).map(|_| rng.random_range(1..=q_hi.max(1))).collect();
    // a_j ~ U[0.8w, 1.25w], w = (1ᵀR1)/(30 qᵀ1)
    let reward_sum: f64 = rewards.iter().flatten().map(|v| v.as_f64()).sum();
    let q_sum: u64 = qs.iter().sum();
    let w = reward_sum / (30.0 * q_sum as f64);
    let a: Vec<T> = (0..m)
        .map(|_| T::uniform(&mut rng, s(0.8 * w), s(1.25 * w)))
        .collect();
    // d_j ∈ {1, ..., ceil(qᵀ1/n)}
    let d_hi = (q_sum as f64 / n as f64).ceil() as u64;
    let ds: Vec<u64> = (0..m).map(|_| rng.random_range(1..=d_hi.max(1))).collect();

    let mut agents = Vec::with_capacity(n + m);
    for (i, (r, &q)) in rewards.iter().zip(&qs).enumerate() {
        agents.push(project_agent(i, r, s(q as f64))?);
    }
    let team_cap = s::<T>(q_sum as f64);
    for j in 0..m {
        agents.push(team_agent(n + j, a[j], s(ds[j] as f64), team_cap)?);
    }

    // coupling: Σ_i (x_i)_j − c_j <= 0  (projects contribute I, team j a
    // single −1 in row j)
    let mut blocks: Vec<Mat<T>> = vec![Mat::identity(m); n];
    for j in 0..m {
        let mut col = Mat::zeros(m, 1);
        col[(j, 0)] = -T::one();
        blocks.push(col);
    }
    let coupling = BlockAffineCoupling::inequalities(blocks, vec![T::zero(); m])?;
    Ok(InstanceBundle {
        coupling,
        agents,
        family: super::Family::Assignment,
        params: serde_json::to_value(params)?,
        seed,
        reference: None,
    })
}

/// Project agent: f(x) is the optimal value of the relaxed one-project
/// assignment `min −rᵀx̃ s.t. q·x̃ <= x, 1ᵀx̃ <= 1, x̃ ∈ [0,1]^m`, with the
/// decision capped at `x <= q·1` to keep dom f bounded (larger requests
/// cannot change the inner optimum).
fn project_agent<T: Scalar>(id: usize, rewards: &[T], q: T) -> Result<AgentModel<T>> {
    let m = rewards.len();
    let mut prog = ConicProgram::<T>::new();
    let xs = prog.add_vars("x", m);
    let inner = prog.add_vars("y", m);
    for (j, &r) in rewards.iter().enumerate() {
        prog.add_obj_linear(inner.start + j, -r);
    }
    let mut rows: Vec<Affine<T>> = Vec::with_capacity(4 * m + 1);
    for j in 0..m {
        rows.push(Affine::term(xs.start + j, -T::one()));
        rows.push(Affine::term(xs.start + j, T::one()).plus_const(-q));
        rows.push(Affine::term(inner.start + j, q).plus_term(xs.start + j, -T::one()));
        rows.push(Affine::term(inner.start + j, -T::one()));
        rows.push(Affine::term(inner.start + j, T::one()).plus_const(-T::one()));
    }
    let mut budget = Affine::constant(-T::one());
    for j in inner.clone() {
        budget = budget.plus_term(j, T::one());
    }
    rows.push(budget);
    prog.push_block(ConstraintBlock::Inequality(rows));
    Ok(AgentModel { agent_id: id, template: LiftedTemplate::new(prog, m)?, analytic: None })
}

/// Team agent: `f(c) = a·(c − d)₊²` lifted through an epigraph and a
/// squared slack (`h >= s²`, `s >= c̃ − d`, `c <= c̃`); dom is capped at
/// the total consumable capacity.
fn team_agent<T: Scalar>(id: usize, a: T, d: T, cap: T) -> Result<AgentModel<T>> {
    let mut prog = ConicProgram::<T>::new();
    let c = prog.add_var("c");
    let c_tilde = prog.add_var("ct");
    let slack = prog.add_var("s");
    let epi = prog.add_var("h");
    prog.add_obj_linear(epi, a);
    prog.push_block(ConstraintBlock::Inequality(vec![
        Affine::term(c, -T::one()),
        Affine::var(c).plus_const(-cap),
        Affine::var(c).plus_term(c_tilde, -T::one()),
        Affine::term(c_tilde, -T::one()),
        Affine::var(c_tilde).plus_term(slack, -T::one()).plus_const(-d),
        Affine::term(slack, -T::one()),
    ]));
    prog.push_block(ConstraintBlock::RotatedSecondOrder {
        u: Affine::var(epi),
        v: Affine::constant(T::one()),
        w: vec![Affine::var(slack)],
    });
    Ok(AgentModel { agent_id: id, template: LiftedTemplate::new(prog, 1)?, analytic: None })
}

/// Closed-form project value via the fractional knapsack greedy; an
/// independent route for tests.
pub fn project_value<T: Scalar>(rewards: &[T], q: T, x: &[T]) -> T {
    let mut order: Vec<usize> = (0..rewards.len()).collect();
    order.sort_by(|&i, &j| rewards[j].partial_cmp(&rewards[i]).unwrap());
    let mut budget = T::one();
    let mut value = T::zero();
    for j in order {
        if budget <= T::zero() {
            break;
        }
        let cap = (x[j] / q).min(T::one()).max(T::zero());
        let take = cap.min(budget);
        value = value + rewards[j] * take;
        budget = budget - take;
    }
    -value
}

/// Closed-form team value `a (c − d)₊²`.
pub fn team_value<T: Scalar>(a: T, d: T, c: T) -> T {
    let over = (c - d).max(T::zero());
    a * over * over
}

#[cfg(test)]
pub(crate) fn project_agent_for_tests<T: Scalar>(rewards: &[T], q: T) -> AgentModel<T> {
    project_agent(0, rewards, q).unwrap()
}

#[cfg(test)]
pub(crate) fn team_agent_for_tests<T: Scalar>(a: T, d: T, cap: T) -> AgentModel<T> {
    team_agent(0, a, d, cap).unwrap()
}
