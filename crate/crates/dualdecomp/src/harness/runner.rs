//! The experiment driver: price discovery loop with parallel oracle
//! fan-out, per-iteration recovery, metric evaluation for every tracked
//! point, and incremental CSV logging.

use std::collections::VecDeque;
use std::io::Write;

use rayon::prelude::*;

use super::config::{
    ExperimentConfig, FeasibilityThreshold, InstanceSource, MethodConfig,
};
use super::record::{csv_header, record_fields, IterationRecord, PointMetrics, CSV_SCHEMA};
use crate::bench::{generate, InstanceBundle, ReferenceSolution};
use crate::error::{Error, Result};
use crate::linalg::norm2;
use crate::oracles::{
    compose_bundle, conjugate_oracle, AgentModel, OracleConfig, ResponseBundle,
};
use crate::pricing::{
    averaged_dual, dual_subgradient, generate_cut, make_price_box, AccpmConfig, AccpmState,
    PriceBox, StepRule, SubgradState,
};
use crate::problem::{
    local_prices, residuals, BlockAffineCoupling, BlockPrimalPoint, DualPoint,
};
use crate::recovery::{recover, RecoveryConfig};
use crate::scalar::{s, Scalar};
use crate::solver::{solve, ConicProgram, ConstraintBlock, SolveStatus};

/// Why the dual loop ended.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopReason {
    MaxIterations,
    /// Zero subgradient: the current prices are dual optimal.
    DualOptimal,
    /// ACCPM query movement fell below its tolerance.
    LambdaDelta,
    /// Subgradient best-value stall.
    Stalled,
    /// Recovered-point residuals met the requested `ε_r`.
    ResidualTarget,
}

/// Everything a run produces beyond the CSV log.
#[derive(Clone, Debug)]
pub struct RunOutput<T> {
    pub records: Vec<IterationRecord<T>>,
    /// Dual value at the averaged prices per iteration, when tracked.
    pub g_dualavg: Vec<Option<T>>,
    pub stop: StopReason,
    pub f_star: T,
    pub lambda_star: Vec<T>,
}

enum Engine<T: Scalar> {
    Subgradient { state: SubgradState<T>, pbox: PriceBox<T> },
    Accpm { state: AccpmState<T>, config: AccpmConfig<T> },
}

/// Running arithmetic mean of the exact oracle responses.
pub fn primal_average<T: Scalar>(history: &[BlockPrimalPoint<T>], k: usize) -> BlockPrimalPoint<T> {
    assert!(k >= 1 && k <= history.len());
    let scale = T::one() / s::<T>(k as f64);
    let blocks = (0..history[0].blocks.len())
        .map(|b| {
            let n = history[0].blocks[b].len();
            let mut acc = vec![T::zero(); n];
            for point in &history[..k] {
                for (a, &v) in acc.iter_mut().zip(&point.blocks[b]) {
                    *a = *a + v;
                }
            }
            for a in &mut acc {
                *a = *a * scale;
            }
            acc
        })
        .collect();
    BlockPrimalPoint::new(blocks)
}

/// Euclidean projection onto `{z | Az <= b}` (a convex QP).
pub fn project_feasible<T: Scalar>(
    coupling: &BlockAffineCoupling<T>,
    x: &BlockPrimalPoint<T>,
    tol: T,
) -> Result<BlockPrimalPoint<T>> {
    coupling.check_dims(x)?;
    let n = coupling.total_dim();
    let flat = x.concat();
    let mut prog = ConicProgram::<T>::new();
    prog.add_vars("z", n);
    let two = s::<T>(2.0);
    for (i, &xi) in flat.iter().enumerate() {
        prog.add_obj_quad(i, i, two);
        prog.add_obj_linear(i, -two * xi);
    }
    let mut rows = Vec::with_capacity(coupling.num_rows());
    for r in 0..coupling.num_rows() {
        let mut e = crate::solver::Affine::constant(-coupling.b()[r]);
        let mut offset = 0;
        for blk in coupling.blocks() {
            for c in 0..blk.cols() {
                let v = blk[(r, c)];
                if v != T::zero() {
                    e = e.plus_term(offset + c, v);
                }
            }
            offset += blk.cols();
        }
        rows.push(e);
    }
    prog.push_block(ConstraintBlock::Inequality(rows));
    let out = solve(&prog, tol)?;
    let point = match out.status {
        SolveStatus::Optimal => out.point.expect("optimal implies point"),
        SolveStatus::NumericalLimit => out
            .best_iterate
            .ok_or_else(|| Error::Solver("projection hit a numerical limit".into()))?,
        _ => return Err(Error::Solver("projection infeasible or unbounded".into())),
    };
    BlockPrimalPoint::from_concat(&coupling.block_dims(), &point)
}

struct MetricContext<'a, T: Scalar> {
    coupling: &'a BlockAffineCoupling<T>,
    agents: &'a [AgentModel<T>],
    f_star: T,
    b_norm: T,
    solve_tol: T,
    dom_tol: T,
}

impl<'a, T: Scalar> MetricContext<'a, T> {
    fn subopt(&self, f: T) -> T {
        if self.f_star.abs() < s(1e-12) {
            f - self.f_star
        } else {
            (f - self.f_star) / self.f_star.abs()
        }
    }

    /// Metrics with f re-evaluated through the lifted agent programs.
    fn evaluate(&self, point: &BlockPrimalPoint<T>, lambda: &DualPoint<T>) -> Result<PointMetrics<T>> {
        let res = residuals(self.coupling, point, lambda)?;
        let evals: Vec<_> = self
            .agents
            .par_iter()
            .zip(point.blocks.par_iter())
            .map(|(agent, xb)| agent.evaluate_f(xb, self.solve_tol, self.dom_tol))
            .collect::<Result<_>>()?;
        let dom_feasible = evals.iter().all(|e| e.dom_feasible);
        let f = evals
            .iter()
            .try_fold(T::zero(), |acc, e| e.f.map(|v| acc + v));
        Ok(PointMetrics {
            f,
            subopt: f.map(|v| self.subopt(v)),
            r_p: res.r_p,
            r_c: res.r_c,
            rel_inf: (self.b_norm > T::zero()).then(|| res.r_p / self.b_norm),
            dom_feasible,
        })
    }

    /// Metrics for a point whose f values are exact oracle outputs.
    fn from_oracle(
        &self,
        point: &BlockPrimalPoint<T>,
        lambda: &DualPoint<T>,
    ) -> Result<PointMetrics<T>> {
        let res = residuals(self.coupling, point, lambda)?;
        let f = point.total_f().expect("oracle points carry f values");
        Ok(PointMetrics {
            f: Some(f),
            subopt: Some(self.subopt(f)),
            r_p: res.r_p,
            r_c: res.r_c,
            rel_inf: (self.b_norm > T::zero()).then(|| res.r_p / self.b_norm),
            dom_feasible: true,
        })
    }
}

/// Parallel exact-oracle sweep at prices λ; returns the responses (with f
/// values attached) and the dual value g(λ).
fn oracle_sweep<T: Scalar>(
    agents: &[AgentModel<T>],
    coupling: &BlockAffineCoupling<T>,
    lambda: &DualPoint<T>,
    tol: T,
) -> Result<(BlockPrimalPoint<T>, T)> {
    let prices = local_prices(coupling, lambda)?;
    let responses: Vec<_> = agents
        .par_iter()
        .zip(prices.par_iter())
        .map(|(agent, y)| conjugate_oracle(agent, y, tol))
        .collect::<Result<_>>()?;
    let mut g = -crate::linalg::dot(lambda.lambda(), coupling.b());
    for resp in &responses {
        g = g + resp.lagrangian_value;
    }
    let point = BlockPrimalPoint::with_f_values(
        responses.iter().map(|r| r.x.clone()).collect(),
        responses.iter().map(|r| r.f_value).collect(),
    );
    Ok((point, g))
}

fn load_instance<T: Scalar>(source: &InstanceSource) -> Result<InstanceBundle<T>> {
    match source {
        InstanceSource::File { path } => {
            let doc = crate::problem::instance::InstanceDoc::read_file(path.as_ref())?;
            InstanceBundle::from_doc(&doc)
        }
        InstanceSource::Generator { family, params, seed } => {
            generate(*family, params.clone(), *seed)
        }
    }
}

/// Price-box estimate from the reference prices: the coordinate-uniform
/// span from the smallest to the largest optimal price, floored away from
/// a degenerate all-zero box.
pub fn price_box_from_reference<T: Scalar>(
    reference: &ReferenceSolution<T>,
    m: usize,
) -> Result<PriceBox<T>> {
    let lam = reference.lambda_star.lambda();
    let lo = lam.iter().fold(T::infinity(), |a, &v| a.min(v)).max(T::zero());
    let hi = lam.iter().fold(T::zero(), |a, &v| a.max(v)).max(s(1e-3));
    make_price_box(&vec![lo; m], &vec![hi; m])
}

/// Run one experiment end to end. The CSV log (when configured) is
/// written incrementally so aborts leave a usable partial log behind.
pub fn run_experiment<T: Scalar>(cfg: &ExperimentConfig<T>) -> Result<RunOutput<T>> {
    cfg.validate()?;
    let solve_tol = cfg.solve_tol_or_default();
    let dom_tol = s::<T>(1e-6);
    let mut instance = load_instance::<T>(&cfg.instance)?;
    instance.ensure_reference(solve_tol)?;
    let reference = instance.reference.clone().expect("just ensured");
    let coupling = &instance.coupling;
    let agents = &instance.agents;
    let m = coupling.num_rows();
    let b_norm = norm2(coupling.b());
    if matches!(cfg.feasibility, FeasibilityThreshold::Relative(_)) && b_norm <= T::zero() {
        return Err(Error::Config(
            "relative feasibility threshold undefined for b = 0; use an absolute one".into(),
        ));
    }

    let pbox = price_box_from_reference(&reference, m)?;
    let mut engine = match &cfg.method {
        MethodConfig::Subgradient { step_rule, patience, min_improvement } => {
            let state = SubgradState::new(pbox.midpoint(), *step_rule, &pbox)?
                .with_stopping(*patience, s(*min_improvement));
            Engine::Subgradient { state, pbox: pbox.clone() }
        }
        MethodConfig::Accpm { newton_tol, max_newton, lambda_tol } => Engine::Accpm {
            state: AccpmState::new(&pbox)?,
            config: AccpmConfig {
                newton_tol: s(*newton_tol),
                max_newton: *max_newton,
                lambda_tol: s(*lambda_tol),
                ..AccpmConfig::default()
            },
        },
    };

    let oracle_cfg = OracleConfig::<T> {
        family: cfg.oracle.family,
        epsilon: cfg.oracle.epsilon.unwrap_or(T::zero()),
        n_responses: cfg.oracle.responses,
        mixing: cfg.oracle.mixing.clone(),
        abs_floor: s(cfg.oracle.abs_floor),
        seed: cfg.seed,
        solve_tol,
    };
    let recovery_cfg = RecoveryConfig::<T> {
        objective_mode: cfg.recovery.objective,
        selection_mode: cfg.recovery.selection,
        heuristic_samples: cfg.recovery.samples,
        solve_tol: cfg.recovery_tol_or_default(),
        seed: cfg.seed,
    };

    let metrics = MetricContext {
        coupling,
        agents,
        f_star: reference.f_star,
        b_norm,
        solve_tol,
        dom_tol,
    };

    let mut csv_out = match &cfg.output.csv {
        Some(path) => {
            let mut file = std::fs::File::create(path)?;
            writeln!(file, "# {CSV_SCHEMA}")?;
            let mut w = csv::Writer::from_writer(file);
            w.write_record(csv_header())?;
            w.flush()?;
            Some(w)
        }
        None => None,
    };
    let mut snapshots = match &cfg.output.snapshots {
        Some(path) => Some(std::fs::File::create(path)?),
        None => None,
    };

    let mut history: Vec<VecDeque<ResponseBundle<T>>> =
        (0..agents.len()).map(|_| VecDeque::new()).collect();
    let mut raw_sum: Vec<Vec<T>> =
        coupling.block_dims().iter().map(|&d| vec![T::zero(); d]).collect();
    let mut records: Vec<IterationRecord<T>> = Vec::new();
    let mut g_dualavg: Vec<Option<T>> = Vec::new();
    let mut stop = StopReason::MaxIterations;

    for k in 1..=cfg.max_iters {
        // current prices
        let lambda = match &mut engine {
            Engine::Subgradient { state, .. } => DualPoint::clamped(state.lambda().to_vec()),
            Engine::Accpm { state, config } => {
                state.center(config)?;
                state.query_point()
            }
        };
        let (raw_point, g_value) = oracle_sweep(agents, coupling, &lambda, solve_tol)?;

        // engine update (metrics below use the prices captured above)
        let mut engine_stop: Option<StopReason> = None;
        match &mut engine {
            Engine::Subgradient { state, pbox } => {
                let q = dual_subgradient(coupling, &raw_point)?;
                if crate::linalg::norm_inf(&q) == T::zero() {
                    engine_stop = Some(StopReason::DualOptimal);
                } else if state.step(g_value, &q, pbox) {
                    engine_stop = Some(StopReason::Stalled);
                }
            }
            Engine::Accpm { state, config } => {
                match generate_cut(coupling, &raw_point, &lambda, k)? {
                    Some(cut) => {
                        let prev = state.queries().last().map(|q| q.lambda.clone());
                        state.append_cut(cut);
                        if let Some(prev) = prev {
                            let delta: Vec<T> = lambda
                                .lambda()
                                .iter()
                                .zip(&prev)
                                .map(|(&a, &b)| a - b)
                                .collect();
                            if norm2(&delta) <= config.lambda_tol {
                                engine_stop = Some(StopReason::LambdaDelta);
                            }
                        }
                    }
                    None => engine_stop = Some(StopReason::DualOptimal),
                }
            }
        }

        // tracked points
        let raw_metrics = metrics.from_oracle(&raw_point, &lambda)?;
        for (acc, blk) in raw_sum.iter_mut().zip(&raw_point.blocks) {
            for (a, &v) in acc.iter_mut().zip(blk) {
                *a = *a + v;
            }
        }
        let inv_k = T::one() / s::<T>(k as f64);
        let avg_point = BlockPrimalPoint::new(
            raw_sum.iter().map(|b| b.iter().map(|&v| v * inv_k).collect()).collect(),
        );
        let avg_metrics = metrics.evaluate(&avg_point, &lambda)?;

        let mra_metrics = if (k - 1) % cfg.recovery.cadence == 0 {
            let prices = local_prices(coupling, &lambda)?;
            let bundles: Vec<ResponseBundle<T>> = agents
                .par_iter()
                .zip(prices.par_iter())
                .zip(history.par_iter())
                .map(|((agent, y), prior)| {
                    let refs: Vec<&ResponseBundle<T>> = prior.iter().collect();
                    compose_bundle(agent, y, &oracle_cfg, &refs, k)
                })
                .collect::<Result<_>>()?;
            // remember only the fresh columns for the history window
            if cfg.oracle.history > 1 {
                for (deque, bundle) in history.iter_mut().zip(&bundles) {
                    let fresh = ResponseBundle {
                        agent_id: bundle.agent_id,
                        columns: bundle.columns[..cfg.oracle.responses].to_vec(),
                        dropped_columns: 0,
                    };
                    deque.push_back(fresh);
                    while deque.len() > cfg.oracle.history - 1 {
                        deque.pop_front();
                    }
                }
            }
            let result = recover(&bundles, coupling, &lambda, &recovery_cfg)?;
            Some((metrics.evaluate(&result.x_bar, &lambda)?, result))
        } else {
            None
        };

        let proj_metrics = if cfg.track.projection {
            let projected = project_feasible(coupling, &raw_point, solve_tol)?;
            Some(metrics.evaluate(&projected, &lambda)?)
        } else {
            None
        };

        let (dualavg_metrics, g_avg) = if cfg.track.dual_average {
            match &engine {
                Engine::Accpm { state, .. } if !state.queries().is_empty() => {
                    let (t, lam_bar) = state.z();
                    let lam_bar = lam_bar.to_vec();
                    let (avg_lambda, _) = averaged_dual(state.queries(), t, &lam_bar)?;
                    let avg_dual = DualPoint::clamped(avg_lambda);
                    let (avg_resp, g_at_avg) =
                        oracle_sweep(agents, coupling, &avg_dual, solve_tol)?;
                    (Some(metrics.from_oracle(&avg_resp, &lambda)?), Some(g_at_avg))
                }
                _ => (None, None),
            }
        } else {
            (None, None)
        };

        let record = IterationRecord {
            k,
            g_lambda: g_value,
            raw: Some(raw_metrics),
            mra: mra_metrics.as_ref().map(|(m, _)| m.clone()),
            avg: Some(avg_metrics),
            proj: proj_metrics,
            dualavg: dualavg_metrics,
        };
        if let Some(w) = &mut csv_out {
            w.write_record(record_fields(&record))?;
            w.flush()?;
        }
        if let Some(f) = &mut snapshots {
            let line = serde_json::json!({"k": k, "lambda": lambda.lambda()});
            writeln!(f, "{line}")?;
        }
        records.push(record);
        g_dualavg.push(g_avg);

        if let Some(eps_r) = cfg.stop_residual {
            if let Some((m, _)) = &mra_metrics {
                if m.r_p + m.r_c <= eps_r {
                    stop = StopReason::ResidualTarget;
                    break;
                }
            }
        }
        if let Some(reason) = engine_stop {
            stop = reason;
            break;
        }
    }

    Ok(RunOutput {
        records,
        g_dualavg,
        stop,
        f_star: reference.f_star,
        lambda_star: reference.lambda_star.lambda().to_vec(),
    })
}

/// Output of the four-rule step-size sweep.
#[derive(Debug)]
pub struct SweepOutput<T> {
    pub chosen: StepRule,
    pub runs: Vec<(StepRule, RunOutput<T>)>,
}

fn with_rule_suffix(path: &str, rule: StepRule) -> String {
    let slug = rule.label().replace('/', "-").replace('.', "_");
    match path.rsplit_once('.') {
        Some((stem, ext)) => format!("{stem}.{slug}.{ext}"),
        None => format!("{path}.{slug}"),
    }
}

/// Run all four step rules and pick the one minimizing the final primal
/// residuals (`r_p + r_c` of the last recovered point, falling back to the
/// raw point).
pub fn run_step_rule_sweep<T: Scalar>(cfg: &ExperimentConfig<T>) -> Result<SweepOutput<T>> {
    let MethodConfig::Subgradient { patience, min_improvement, .. } = cfg.method else {
        return Err(Error::Config("step-rule sweep requires the subgradient method".into()));
    };
    let mut runs = Vec::new();
    for rule in StepRule::ALL {
        let mut rule_cfg = cfg.clone();
        rule_cfg.method =
            MethodConfig::Subgradient { step_rule: rule, patience, min_improvement };
        if let Some(csv) = &cfg.output.csv {
            rule_cfg.output.csv = Some(with_rule_suffix(csv, rule));
        }
        if let Some(snap) = &cfg.output.snapshots {
            rule_cfg.output.snapshots = Some(with_rule_suffix(snap, rule));
        }
        let out = run_experiment(&rule_cfg)?;
        runs.push((rule, out));
    }
    let chosen = runs
        .iter()
        .min_by(|a, b| {
            let final_res = |r: &RunOutput<T>| {
                r.records
                    .last()
                    .and_then(|rec| rec.mra.as_ref().or(rec.raw.as_ref()))
                    .map(|p| p.r_p + p.r_c)
                    .unwrap_or_else(T::infinity)
            };
            final_res(&a.1).partial_cmp(&final_res(&b.1)).unwrap_or(std::cmp::Ordering::Equal)
        })
        .map(|(r, _)| *r)
        .expect("four rules ran");
    Ok(SweepOutput { chosen, runs })
}
