//! Built-in three-period, single-node cases.

use thiserror::Error;

use crate::model::{Consumer, Esr, Horizon, Node, Scenario, Supplier};

/// ESR charge and discharge bid used by the built-in cases, $/MWh.
pub const DEFAULT_ESR_BID: f64 = 0.1;

#[derive(Debug, Error, Clone, PartialEq)]
#[error("unknown built-in case {0} (expected 1 to 4)")]
pub struct UnknownCase(pub u32);

/// Ramp limit and initial state of charge of each built-in case.
const CASES: [(f64, f64); 4] = [(25.0, 50.0), (15.0, 50.0), (15.0, 95.0), (5.0, 50.0)];

/// One generator, one load and one storage unit at a single node over three
/// hours. Cases differ in the generator ramp limit and the initial SOC.
pub fn builtin_single_node(id: u32) -> Result<Scenario, UnknownCase> {
    let (ramp, s0) = *CASES
        .get((id as usize).wrapping_sub(1))
        .ok_or(UnknownCase(id))?;
    Ok(single_node(ramp, s0, DEFAULT_ESR_BID))
}

/// The single-node case with explicit ramp limit, initial SOC and ESR bid.
pub fn single_node(ramp: f64, soc_init: f64, esr_bid: f64) -> Scenario {
    let t = 3;
    Scenario {
        horizon: Horizon::new(t),
        nodes: vec![Node { id: 1 }],
        lines: vec![],
        suppliers: vec![Supplier {
            id: "gen".into(),
            node: 1,
            capacity: vec![50.0; t],
            bid: vec![5.0, 20.0, 10.0],
            ramp_limit: Some(ramp),
        }],
        consumers: vec![Consumer {
            id: "load".into(),
            node: 1,
            max_demand: vec![25.0, 100.0, 25.0],
            bid: vec![30.0, 60.0, 40.0],
        }],
        esrs: vec![Esr {
            id: "esr".into(),
            node: 1,
            eta_charge: 0.9,
            eta_discharge: 0.8,
            soc_min: 0.0,
            soc_max: 100.0,
            soc_init,
            power_cap: 10.0,
            charge_bid: vec![esr_bid; t],
            discharge_bid: vec![esr_bid; t],
        }],
    }
}
