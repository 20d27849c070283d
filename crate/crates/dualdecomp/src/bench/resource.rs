//! Resource allocation: K agents with geometric-mean utilities over m
//! shared resources, coupled by per-resource budgets.
//!
//! Agent i maximizes `geomean(C_i x_i)` over the simplex
//! `{x >= 0, 1ᵀx <= 1}`; budgets are drawn so the cheaper rows are also
//! the scarcer ones.

use serde::{Deserialize, Serialize};

use super::InstanceBundle;
use crate::error::Result;
use crate::linalg::Mat;
use crate::oracles::{AgentModel, LiftedTemplate};
use crate::problem::BlockAffineCoupling;
use crate::rng::{domain, substream};
use crate::scalar::{s, Scalar};
use crate::solver::{geomean_hypograph, Affine, ConicProgram, ConstraintBlock};

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct RaParams {
    /// K
    pub agents: usize,
    /// m (resources = coupling rows)
    pub resources: usize,
    /// p (affine terms inside each geometric mean)
    pub terms: usize,
}

impl Default for RaParams {
    fn default() -> Self {
        Self { agents: 100, resources: 50, terms: 5 }
    }
}

const STREAM_TAG: u64 = 1;

pub fn generate<T: Scalar>(params: &RaParams, seed: u64) -> Result<InstanceBundle<T>> {
    let k = params.agents;
    let m = params.resources;
    let p = params.terms;
    let n = (k * m) as f64;
    let mut rng = substream(seed, &[domain::GENERATOR, STREAM_TAG]);

    // C_i entries: the coefficient on resource j is uniform on
    // [(j-1)/m, j/m], so higher-indexed resources are more productive;
    // the matching budgets below make exactly those resources scarce
    let mut cs: Vec<Vec<Vec<T>>> = Vec::with_capacity(k);
    for _ in 0..k {
        let mut c = Vec::with_capacity(p);
        for _ in 0..p {
            c.push(
                (1..=m)
                    .map(|j| {
                        let lo = s::<T>((j - 1) as f64 / m as f64);
                        let hi = s::<T>(j as f64 / m as f64);
                        T::uniform(&mut rng, lo, hi)
                    })
                    .collect(),
            );
        }
        cs.push(c);
    }
    // budgets R_{m-j} ~ (sqrt(n) + (n/2 - sqrt(n))·U[(j-1)/m, j/m]) / m:
    // reversed against the efficiency ramp (productive resources are
    // scarce) and scaled to the per-resource demand K/m so that the
    // scarce rows actually bind
    let base = s::<T>(n.sqrt() / m as f64);
    let spread = s::<T>((n / 2.0 - n.sqrt()) / m as f64);
    let mut budgets = vec![T::zero(); m];
    for j in 1..=m {
        let lo = s::<T>((j - 1) as f64 / m as f64);
        let hi = s::<T>(j as f64 / m as f64);
        budgets[m - j] = base + spread * T::uniform(&mut rng, lo, hi);
    }

    let agents = cs
        .iter()
        .enumerate()
        .map(|(i, c)| build_agent(i, c, m))
        .collect::<Result<Vec<_>>>()?;
    let blocks = vec![Mat::identity(m); k];
    let coupling = BlockAffineCoupling::inequalities(blocks, budgets)?;
    Ok(InstanceBundle {
        coupling,
        agents,
        family: super::Family::ResourceAllocation,
        params: serde_json::to_value(params)?,
        seed,
        reference: None,
    })
}

fn build_agent<T: Scalar>(id: usize, c: &[Vec<T>], m: usize) -> Result<AgentModel<T>> {
    let mut prog = ConicProgram::<T>::new();
    let xs = prog.add_vars("x", m);
    let hypo = prog.add_var("g");
    prog.add_obj_linear(hypo, -T::one());
    let mut dom: Vec<Affine<T>> = xs.clone().map(|i| Affine::term(i, -T::one())).collect();
    let mut budget = Affine::constant(-T::one());
    for i in xs.clone() {
        budget = budget.plus_term(i, T::one());
    }
    dom.push(budget);
    prog.push_block(ConstraintBlock::Inequality(dom));
    let terms: Vec<Affine<T>> = c
        .iter()
        .map(|row| {
            let mut e = Affine::zero();
            for (i, &v) in row.iter().enumerate() {
                if v != T::zero() {
                    e = e.plus_term(xs.start + i, v);
                }
            }
            e
        })
        .collect();
    geomean_hypograph(&mut prog, &terms, Affine::var(hypo))?;
    Ok(AgentModel { agent_id: id, template: LiftedTemplate::new(prog, m)?, analytic: None })
}

/// Closed-form utility `-geomean(Cx)`, used by tests as an independent
/// route to the lifted evaluation.
pub fn utility_value<T: Scalar>(c: &[Vec<T>], x: &[T]) -> T {
    let p = s::<T>(c.len() as f64);
    let mut log_sum = T::zero();
    for row in c {
        let v = crate::linalg::dot(row, x);
        log_sum = log_sum + v.ln();
    }
    -(log_sum / p).exp()
}
