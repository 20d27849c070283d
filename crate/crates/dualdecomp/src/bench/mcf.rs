//! Multi-commodity network flow: each commodity buys per-edge bandwidth
//! x_i and routes as much flow as that bandwidth allows between its
//! source/sink pair; bandwidths are coupled by volume-weighted edge
//! capacities.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::InstanceBundle;
use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::oracles::{AgentModel, LiftedTemplate};
use crate::problem::BlockAffineCoupling;
use crate::rng::{domain, substream};
use crate::scalar::{s, Scalar};
use crate::solver::{Affine, ConicProgram, ConstraintBlock};

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct McfParams {
    /// K
    pub commodities: usize,
    /// p (graph nodes)
    pub nodes: usize,
    /// q (directed edges = coupling rows), including the connectivity cycle
    pub edges: usize,
}

impl Default for McfParams {
    fn default() -> Self {
        Self { commodities: 100, nodes: 15, edges: 100 }
    }
}

const STREAM_TAG: u64 = 3;

pub fn generate<T: Scalar>(params: &McfParams, seed: u64) -> Result<InstanceBundle<T>> {
    let k = params.commodities;
    let p = params.nodes;
    let q = params.edges;
    if q < p {
        return Err(Error::Config(
            "edge count must cover the connectivity cycle (edges >= nodes)".into(),
        ));
    }
    if p < 2 {
        return Err(Error::Config("graph needs at least two nodes".into()));
    }
    let mut rng = substream(seed, &[domain::GENERATOR, STREAM_TAG]);

    // random edges plus one cycle through all vertices (strong connectivity)
    let mut edges: Vec<(usize, usize)> = Vec::with_capacity(q);
    for _ in 0..(q - p) {
        let tail = rng.random_range(0..p);
        let mut head = rng.random_range(0..p - 1);
        if head >= tail {
            head += 1;
        }
        edges.push((tail, head));
    }
    for v in 0..p {
        edges.push((v, (v + 1) % p));
    }
    // source/sink pairs
    let pairs: Vec<(usize, usize)> = (0..k)
        .map(|_| {
            let r = rng.random_range(0..p);
            let mut t = rng.random_range(0..p - 1);
            if t >= r {
                t += 1;
            }
            (r, t)
        })
        .collect();
    // capacities and weights
    let c_raw: Vec<T> = (0..q).map(|_| T::uniform(&mut rng, s(0.2), s(2.0))).collect();
    let gains: Vec<T> = (0..k).map(|_| T::uniform(&mut rng, s(0.5), s(1.5))).collect();
    let volumes: Vec<T> = (0..k).map(|_| T::standard_normal(&mut rng).exp()).collect();
    let caps: Vec<T> = c_raw.iter().map(|&v| v * s::<T>(0.5f64.exp())).collect();
    // per-commodity bandwidth bound: no single edge purchase needs to
    // exceed the largest capacity
    let r_bound = caps.iter().fold(T::zero(), |m, &v| m.max(v));

    let agents = (0..k)
        .map(|i| build_agent(i, q, p, &edges, pairs[i], gains[i], r_bound))
        .collect::<Result<Vec<_>>>()?;
    let blocks: Vec<Mat<T>> =
        volumes.iter().map(|&v| Mat::scaled_identity(q, v)).collect();
    let coupling = BlockAffineCoupling::inequalities(blocks, caps)?;
    Ok(InstanceBundle {
        coupling,
        agents,
        family: super::Family::MultiCommodityFlow,
        params: serde_json::to_value(params)?,
        seed,
        reference: None,
    })
}

/// Commodity agent: f(x) is the optimal value of
/// `min −b·√(flow) s.t. 0 <= z <= x, conservation, x ∈ [0, R·1]`,
/// with √ lifted through `w² <= flow`.
fn build_agent<T: Scalar>(
    id: usize,
    q: usize,
    p: usize,
    edges: &[(usize, usize)],
    (src, sink): (usize, usize),
    gain: T,
    r_bound: T,
) -> Result<AgentModel<T>> {
    let mut prog = ConicProgram::<T>::new();
    let xs = prog.add_vars("x", q);
    let zs = prog.add_vars("z", q);
    let flow = prog.add_var("d");
    let sqrt_flow = prog.add_var("w");
    prog.add_obj_linear(sqrt_flow, -gain);

    let mut rows: Vec<Affine<T>> = Vec::with_capacity(4 * q);
    for e in 0..q {
        rows.push(Affine::term(xs.start + e, -T::one()));
        rows.push(Affine::term(xs.start + e, T::one()).plus_const(-r_bound));
        rows.push(Affine::term(zs.start + e, -T::one()));
        rows.push(Affine::term(zs.start + e, T::one()).plus_term(xs.start + e, -T::one()));
    }
    prog.push_block(ConstraintBlock::Inequality(rows));
    // conservation: A z + d(e_src − e_sink) = 0
    let mut balance: Vec<Affine<T>> = (0..p).map(|_| Affine::zero()).collect();
    for (e, &(tail, head)) in edges.iter().enumerate() {
        balance[tail] = balance[tail].clone().plus_term(zs.start + e, -T::one());
        balance[head] = balance[head].clone().plus_term(zs.start + e, T::one());
    }
    balance[src] = balance[src].clone().plus_term(flow, T::one());
    balance[sink] = balance[sink].clone().plus_term(flow, -T::one());
    prog.push_block(ConstraintBlock::Equality(balance));
    prog.push_block(ConstraintBlock::RotatedSecondOrder {
        u: Affine::var(flow),
        v: Affine::constant(T::one()),
        w: vec![Affine::var(sqrt_flow)],
    });
    Ok(AgentModel { agent_id: id, template: LiftedTemplate::new(prog, q)?, analytic: None })
}
