//! Seeded benchmark generators for the four problem families, each
//! producing agent models plus coupling data, and a centralized reference
//! solve that supplies the optimal value, point and prices.

pub mod assignment;
pub mod mcf;
pub mod resource;
pub mod shipment;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::oracles::AgentModel;
use crate::problem::instance::{InstanceDoc, ReferenceDoc};
use crate::problem::{BlockAffineCoupling, BlockPrimalPoint, DualPoint, RowKind};
use crate::scalar::Scalar;
use crate::solver::{solve, Affine, ConicProgram, ConstraintBlock};

/// Benchmark family tags; the strings double as CLI names and the
/// `generator` field of instance files.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Family {
    #[serde(rename = "ra")]
    ResourceAllocation,
    #[serde(rename = "assign")]
    Assignment,
    #[serde(rename = "mcf")]
    MultiCommodityFlow,
    #[serde(rename = "ship")]
    Shipment,
}

impl Family {
    pub fn as_str(self) -> &'static str {
        match self {
            Family::ResourceAllocation => "ra",
            Family::Assignment => "assign",
            Family::MultiCommodityFlow => "mcf",
            Family::Shipment => "ship",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "ra" => Ok(Family::ResourceAllocation),
            "assign" => Ok(Family::Assignment),
            "mcf" => Ok(Family::MultiCommodityFlow),
            "ship" => Ok(Family::Shipment),
            other => Err(Error::Config(format!("unknown benchmark family '{other}'"))),
        }
    }
}

/// Optimal value, point and coupling prices from a centralized solve.
#[derive(Clone, Debug)]
pub struct ReferenceSolution<T> {
    pub f_star: T,
    pub x_star: BlockPrimalPoint<T>,
    pub lambda_star: DualPoint<T>,
}

/// One generated benchmark instance.
#[derive(Clone, Debug)]
pub struct InstanceBundle<T> {
    pub coupling: BlockAffineCoupling<T>,
    pub agents: Vec<AgentModel<T>>,
    pub family: Family,
    pub params: serde_json::Value,
    pub seed: u64,
    pub reference: Option<ReferenceSolution<T>>,
}

impl<T: Scalar> InstanceBundle<T> {
    /// Compute the reference solution if not present yet.
    pub fn ensure_reference(&mut self, tol: T) -> Result<&ReferenceSolution<T>> {
        if self.reference.is_none() {
            self.reference = Some(reference_solve(&self.coupling, &self.agents, tol)?);
        }
        Ok(self.reference.as_ref().expect("just set"))
    }

    pub fn to_doc(&self) -> InstanceDoc<T> {
        let reference = self.reference.as_ref().map(|r| ReferenceDoc {
            f_star: r.f_star,
            x_star: r.x_star.concat(),
            lambda_star: r.lambda_star.lambda().to_vec(),
        });
        InstanceDoc::from_coupling(
            &self.coupling,
            self.family.as_str(),
            self.params.clone(),
            self.seed,
            reference,
        )
    }

    /// Rebuild the bundle from an instance document by replaying its
    /// generator and verifying the stored coupling matches bit-exactly.
    pub fn from_doc(doc: &InstanceDoc<T>) -> Result<Self> {
        let family = Family::parse(&doc.generator)?;
        let mut bundle = generate(family, doc.params.clone(), doc.seed)?;
        let stored = doc.to_coupling()?;
        if stored.b() != bundle.coupling.b()
            || stored.block_dims() != bundle.coupling.block_dims()
            || (0..stored.num_blocks())
                .any(|i| stored.block(i).data() != bundle.coupling.block(i).data())
        {
            return Err(Error::Invalid(
                "instance file does not match its generator parameters and seed".into(),
            ));
        }
        bundle.reference = doc.reference.as_ref().map(|r| -> Result<_> {
            Ok(ReferenceSolution {
                f_star: r.f_star,
                x_star: BlockPrimalPoint::from_concat(&stored.block_dims(), &r.x_star)?,
                lambda_star: DualPoint::clamped(r.lambda_star.clone()),
            })
        }).transpose()?;
        Ok(bundle)
    }
}

/// Generate an instance of `family` with the given JSON parameters (the
/// family defaults fill anything missing).
pub fn generate<T: Scalar>(
    family: Family,
    params: serde_json::Value,
    seed: u64,
) -> Result<InstanceBundle<T>> {
    match family {
        Family::ResourceAllocation => {
            let p: resource::RaParams = parse_params(params)?;
            resource::generate(&p, seed)
        }
        Family::Assignment => {
            let p: assignment::AssignParams = parse_params(params)?;
            assignment::generate(&p, seed)
        }
        Family::MultiCommodityFlow => {
            let p: mcf::McfParams = parse_params(params)?;
            mcf::generate(&p, seed)
        }
        Family::Shipment => {
            let p: shipment::ShipParams = parse_params(params)?;
            shipment::generate(&p, seed)
        }
    }
}

fn parse_params<P: serde::de::DeserializeOwned>(params: serde_json::Value) -> Result<P> {
    serde_json::from_value(params).map_err(|e| Error::Config(format!("generator params: {e}")))
}

/// Assemble the full coupled program: all agent templates side by side,
/// Lagrangian-coupled by the shared inequality rows (which come first so
/// their duals are easy to find).
fn centralized_program<T: Scalar>(
    coupling: &BlockAffineCoupling<T>,
    agents: &[AgentModel<T>],
) -> (ConicProgram<T>, Vec<usize>) {
    let mut prog = ConicProgram::<T>::new();
    let mut offsets = Vec::with_capacity(agents.len());
    for agent in agents {
        let base = prog.n_vars();
        offsets.push(base);
        let tpl = agent.template.program();
        prog.add_vars(&format!("a{}_", agent.agent_id), tpl.n_vars());
        for (i, &c) in tpl.obj_linear().iter().enumerate() {
            if c != T::zero() {
                prog.add_obj_linear(base + i, c);
            }
        }
        prog.set_obj_const(prog.obj_const() + tpl.obj_const());
    }
    let shift = |e: &Affine<T>, base: usize| Affine {
        terms: e.terms.iter().map(|&(i, c)| (base + i, c)).collect(),
        constant: e.constant,
    };
    // coupling rows first
    let mut rows = Vec::with_capacity(coupling.num_rows());
    for r in 0..coupling.num_rows() {
        let mut e = Affine::constant(-coupling.b()[r]);
        for (i, blk) in coupling.blocks().iter().enumerate() {
            for c in 0..blk.cols() {
                let v = blk[(r, c)];
                if v != T::zero() {
                    e = e.plus_term(offsets[i] + c, v);
                }
            }
        }
        rows.push(e);
    }
    prog.push_block(ConstraintBlock::Inequality(rows));
    for (agent, &base) in agents.iter().zip(&offsets) {
        for block in agent.template.program().blocks() {
            let shifted = match block {
                ConstraintBlock::Equality(rows) => {
                    ConstraintBlock::Equality(rows.iter().map(|e| shift(e, base)).collect())
                }
                ConstraintBlock::Inequality(rows) => {
                    ConstraintBlock::Inequality(rows.iter().map(|e| shift(e, base)).collect())
                }
                ConstraintBlock::SecondOrder(entries) => {
                    ConstraintBlock::SecondOrder(entries.iter().map(|e| shift(e, base)).collect())
                }
                ConstraintBlock::RotatedSecondOrder { u, v, w } => {
                    ConstraintBlock::RotatedSecondOrder {
                        u: shift(u, base),
                        v: shift(v, base),
                        w: w.iter().map(|e| shift(e, base)).collect(),
                    }
                }
            };
            prog.push_block(shifted);
        }
    }
    (prog, offsets)
}

/// Centralized solve of the coupled problem; the coupling-row duals are
/// the reference prices.
pub fn reference_solve<T: Scalar>(
    coupling: &BlockAffineCoupling<T>,
    agents: &[AgentModel<T>],
    tol: T,
) -> Result<ReferenceSolution<T>> {
    let (prog, offsets) = centralized_program(coupling, agents);
    let mut out = solve(&prog, tol)?;
    if out.status == crate::solver::SolveStatus::NumericalLimit {
        out = solve(&prog, tol * crate::scalar::s(100.0))?;
    }
    let point = out.optimal_point()?;
    let blocks: Vec<Vec<T>> = agents
        .iter()
        .zip(&offsets)
        .map(|(agent, &base)| point[base..base + agent.n_decision()].to_vec())
        .collect();
    let duals = out
        .row_duals
        .as_ref()
        .ok_or_else(|| Error::Solver("no duals on centralized solve".into()))?;
    let lambda = DualPoint::clamped(duals[..coupling.num_rows()].to_vec());
    Ok(ReferenceSolution {
        f_star: out.objective_value.expect("optimal implies objective"),
        x_star: BlockPrimalPoint::new(blocks),
        lambda_star: lambda,
    })
}

/// Largest uniform slack of the plain inequality rows over the lifted
/// feasible set (equality pairs stay exact); positive means the instance
/// has a strictly feasible point.
pub fn slater_margin<T: Scalar>(
    coupling: &BlockAffineCoupling<T>,
    agents: &[AgentModel<T>],
    tol: T,
) -> Result<T> {
    let (mut prog, _offsets) = centralized_program(coupling, agents);
    // wipe the objective: maximize the margin only
    for i in 0..prog.n_vars() {
        let c = prog.obj_linear()[i];
        if c != T::zero() {
            prog.add_obj_linear(i, -c);
        }
    }
    prog.set_obj_const(T::zero());
    let margin = prog.add_var("margin");
    prog.add_obj_linear(margin, -T::one());
    // rebuild the coupling block with the margin added to inequality rows
    // (block 0 is the coupling by construction)
    let mut blocks = prog.blocks().to_vec();
    if let ConstraintBlock::Inequality(rows) = &mut blocks[0] {
        for (r, row) in rows.iter_mut().enumerate() {
            if coupling.row_kind()[r] == RowKind::Inequality {
                *row = row.clone().plus_term(margin, T::one());
            }
        }
    }
    let mut rebuilt = ConicProgram::<T>::new();
    rebuilt.add_vars("v", prog.n_vars());
    for (i, &c) in prog.obj_linear().iter().enumerate() {
        if c != T::zero() {
            rebuilt.add_obj_linear(i, c);
        }
    }
    for b in blocks {
        rebuilt.push_block(b);
    }
    let out = solve(&rebuilt, tol)?;
    let point = out.optimal_point()?;
    Ok(point[margin])
}
