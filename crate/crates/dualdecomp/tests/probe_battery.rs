// temporary: locate the failing battery solve
use dualdecomp::bench::{generate, Family};
use dualdecomp::harness::price_box_from_reference;
use dualdecomp::oracles::conjugate_oracle;
use dualdecomp::pricing::{AccpmConfig, AccpmState};
use dualdecomp::problem::local_prices;

#[test]
fn probe_battery_solves() {
    for family in [Family::ResourceAllocation, Family::Assignment, Family::MultiCommodityFlow, Family::Shipment] {
        for seed in 0..3u64 {
            let mut inst = generate::<f64>(family, serde_json::json!({}), seed).unwrap();
            inst.ensure_reference(1e-8).unwrap();
            let pbox = price_box_from_reference(inst.reference.as_ref().unwrap(), inst.coupling.num_rows()).unwrap();
            let mut state = AccpmState::new(&pbox).unwrap();
            let cfg = AccpmConfig::default();
            for k in 1..=6 {
                state.center(&cfg).unwrap();
                let lambda = state.query_point();
                let prices = local_prices(&inst.coupling, &lambda).unwrap();
                let mut xs = Vec::new();
                let mut fs = Vec::new();
                for (agent, y) in inst.agents.iter().zip(&prices) {
                    match conjugate_oracle(agent, y, 1e-8) {
                        Ok(r) => { xs.push(r.x); fs.push(r.f_value); }
                        Err(e) => {
                            eprintln!("FAIL {family:?} seed {seed} iter {k} agent {}: {e}", agent.agent_id);
                            // retry at looser tolerance to see if that helps
                            match conjugate_oracle(agent, y, 1e-6) {
                                Ok(_) => eprintln!("  ... solves fine at tol 1e-6"),
                                Err(e2) => eprintln!("  ... still fails at 1e-6: {e2}"),
                            }
                            panic!("probe done");
                        }
                    }
                }
                let point = dualdecomp::problem::BlockPrimalPoint::with_f_values(xs, fs);
                match dualdecomp::pricing::generate_cut(&inst.coupling, &point, &lambda, k).unwrap() {
                    Some(cut) => state.append_cut(cut),
                    None => break,
                }
            }
            eprintln!("ok {family:?} seed {seed}");
        }
    }
}
