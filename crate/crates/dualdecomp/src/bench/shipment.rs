//! Capacitated optimal transport: each source row of the plan is one
//! agent with a linear cost over its scaled simplex; the target-marginal
//! equalities (as opposing inequality pairs) and volume-weighted capacity
//! rows couple them.

use serde::{Deserialize, Serialize};

use super::InstanceBundle;
use crate::error::Result;
use crate::linalg::{dot, Mat};
use crate::oracles::{AgentModel, AnalyticConjugate, LiftedTemplate};
use crate::problem::{BlockAffineCoupling, RowKind};
use crate::rng::{domain, substream};
use crate::scalar::{s, Scalar};
use crate::solver::{Affine, ConicProgram, ConstraintBlock};

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct ShipParams {
    /// K (source locations = agents)
    pub sources: usize,
    /// m (target locations)
    pub targets: usize,
    /// location dimension
    pub dim: usize,
    /// volume log-std σ
    pub sigma: f64,
}

impl Default for ShipParams {
    fn default() -> Self {
        Self { sources: 100, targets: 25, dim: 10, sigma: 0.8 }
    }
}

const STREAM_TAG: u64 = 4;

pub fn generate<T: Scalar>(params: &ShipParams, seed: u64) -> Result<InstanceBundle<T>> {
    let k = params.sources;
    let m = params.targets;
    let d = params.dim;
    let sigma = s::<T>(params.sigma);
    let mut rng = substream(seed, &[domain::GENERATOR, STREAM_TAG]);

    let src_loc: Vec<Vec<T>> = (0..k)
        .map(|_| (0..d).map(|_| T::standard_normal(&mut rng)).collect())
        .collect();
    let tgt_loc: Vec<Vec<T>> = (0..m)
        .map(|_| (0..d).map(|_| T::standard_normal(&mut rng)).collect())
        .collect();
    let costs: Vec<Vec<T>> = src_loc
        .iter()
        .map(|si| {
            tgt_loc
                .iter()
                .map(|tj| {
                    let diff: Vec<T> = si.iter().zip(tj).map(|(&a, &b)| a - b).collect();
                    dot(&diff, &diff).sqrt()
                })
                .collect()
        })
        .collect();
    let mu_src: Vec<T> = normalized_lognormal(&mut rng, k);
    let mu_tgt: Vec<T> = normalized_lognormal(&mut rng, m);

    // volumes ~ exp N(0, σ²); redraw until the aggregate volume leaves a
    // strictly feasible margin under the capacities (the capacity recipe
    // binds at exactly the expected volume, so about half the raw draws
    // admit no transport plan at all)
    let cap_ratio = s::<T>((params.sigma * params.sigma / 2.0).exp());
    let volumes: Vec<T> = loop {
        let v: Vec<T> =
            (0..k).map(|_| (sigma * T::standard_normal(&mut rng)).exp()).collect();
        if dot(&v, &mu_src) <= cap_ratio * s(0.98) {
            break v;
        }
    };
    let caps: Vec<T> = mu_tgt.iter().map(|&mu| mu * cap_ratio).collect();

    let agents: Vec<AgentModel<T>> = costs
        .iter()
        .zip(&mu_src)
        .enumerate()
        .map(|(i, (cost, &mu))| build_agent(i, cost, mu))
        .collect::<Result<Vec<_>>>()?;

    // rows: target marginal as an opposing pair, then capacities
    let mut blocks = Vec::with_capacity(k);
    for &v in &volumes {
        let mut a = Mat::zeros(3 * m, m);
        for j in 0..m {
            a[(j, j)] = T::one();
            a[(m + j, j)] = -T::one();
            a[(2 * m + j, j)] = v;
        }
        blocks.push(a);
    }
    let mut b = Vec::with_capacity(3 * m);
    b.extend(mu_tgt.iter().copied());
    b.extend(mu_tgt.iter().map(|&v| -v));
    b.extend(caps.iter().copied());
    let mut kinds = vec![RowKind::EqualityPairUpper; m];
    kinds.extend(vec![RowKind::EqualityPairLower; m]);
    kinds.extend(vec![RowKind::Inequality; m]);
    let coupling = BlockAffineCoupling::new(blocks, b, kinds)?;
    Ok(InstanceBundle {
        coupling,
        agents,
        family: super::Family::Shipment,
        params: serde_json::to_value(params)?,
        seed,
        reference: None,
    })
}

fn normalized_lognormal<T: Scalar, R: rand::Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<T> {
    let raw: Vec<T> = (0..n).map(|_| T::standard_normal(rng).exp()).collect();
    let total = raw.iter().fold(T::zero(), |a, &v| a + v);
    raw.into_iter().map(|v| v / total).collect()
}

/// Shipment agent: linear cost over `{x >= 0, 1ᵀx = μ}` with the
/// closed-form conjugate oracle installed.
fn build_agent<T: Scalar>(id: usize, cost: &[T], mu: T) -> Result<AgentModel<T>> {
    let m = cost.len();
    let mut prog = ConicProgram::<T>::new();
    let xs = prog.add_vars("x", m);
    for (j, &c) in cost.iter().enumerate() {
        prog.add_obj_linear(xs.start + j, c);
    }
    prog.push_block(ConstraintBlock::Inequality(
        xs.clone().map(|i| Affine::term(i, -T::one())).collect(),
    ));
    let mut sum = Affine::constant(-mu);
    for i in xs.clone() {
        sum = sum.plus_term(i, T::one());
    }
    prog.push_block(ConstraintBlock::Equality(vec![sum]));
    Ok(AgentModel {
        agent_id: id,
        template: LiftedTemplate::new(prog, m)?,
        analytic: Some(AnalyticConjugate::ScaledSimplexLinear { cost: cost.to_vec(), total: mu }),
    })
}
