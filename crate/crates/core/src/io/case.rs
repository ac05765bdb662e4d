//! Turning a parsed case into market scenarios.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::matpower::CaseFile;
use crate::model::{Consumer, Esr, Horizon, Node, Scenario, Supplier, TransmissionLine};

/// Consumer bid used for sampled loads, $/MWh.
pub const LOAD_BID: f64 = 200.0;
/// Range of the per-period load factor.
pub const LOAD_FACTOR_RANGE: (f64, f64) = (0.75, 1.25);

pub const SWEEP_ETA_CHARGE: f64 = 0.95;
pub const SWEEP_ETA_DISCHARGE: f64 = 0.85;

/// Samples one consumer per bus with positive demand.
///
/// `max_demand[t] = u * Pd` with `u` uniform on [0.75, 1.25], drawn from
/// ChaCha8 (`rand_chacha`) seeded with `seed`, bus by bus in case order and
/// period by period within a bus. Every consumer bids [`LOAD_BID`].
pub fn sample_loads(case: &CaseFile, periods: usize, seed: u64) -> Vec<Consumer> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = LOAD_FACTOR_RANGE;
    case.buses
        .iter()
        .filter(|b| b.pd > 0.0)
        .map(|b| Consumer {
            id: format!("d{}", b.id),
            node: b.id,
            max_demand: (0..periods)
                .map(|_| rng.gen_range(lo..=hi) * b.pd)
                .collect(),
            bid: vec![LOAD_BID; periods],
        })
        .collect()
}

/// Network and generators of `case` over `periods` intervals, with the given
/// consumers and no storage.
///
/// Line `k` (1-based, in case order) is `br{k}` with susceptance
/// `baseMVA / x` and capacity equal to its rating. Generator `k` is `g{k}`
/// bidding its linear cost coefficient. Transmission bids are zero and no
/// separate angle caps are set.
pub fn case_scenario(case: &CaseFile, periods: usize, consumers: Vec<Consumer>) -> Scenario {
    Scenario {
        horizon: Horizon::new(periods),
        nodes: case.buses.iter().map(|b| Node { id: b.id }).collect(),
        lines: case
            .branches
            .iter()
            .enumerate()
            .map(|(k, br)| {
                TransmissionLine::constant(
                    format!("br{}", k + 1),
                    br.from,
                    br.to,
                    case.base_mva / br.x,
                    br.rate,
                    periods,
                )
            })
            .collect(),
        suppliers: case
            .generators
            .iter()
            .enumerate()
            .map(|(k, g)| Supplier::constant(format!("g{}", k + 1), g.bus, g.pmax, g.cost, periods))
            .collect(),
        consumers,
        esrs: Vec::new(),
    }
}

/// ESR sized by multiplier `k`: SOC range [0, 4k] MWh starting at 2k, power
/// cap k MW, efficiencies 0.95 / 0.85. `k = 0` gives a zero-capacity unit.
pub fn esr_from_multiplier(
    id: impl Into<String>,
    node: usize,
    k: f64,
    bid: f64,
    periods: usize,
) -> Esr {
    Esr {
        id: id.into(),
        node,
        eta_charge: SWEEP_ETA_CHARGE,
        eta_discharge: SWEEP_ETA_DISCHARGE,
        soc_min: 0.0,
        soc_max: 4.0 * k,
        soc_init: 2.0 * k,
        power_cap: k,
        charge_bid: vec![bid; periods],
        discharge_bid: vec![bid; periods],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::matpower::{Branch, Bus, Generator};

    fn tiny() -> CaseFile {
        CaseFile {
            base_mva: 100.0,
            buses: vec![
                Bus { id: 1, pd: 0.0 },
                Bus { id: 2, pd: 40.0 },
                Bus { id: 3, pd: 10.0 },
            ],
            branches: vec![
                Branch {
                    from: 1,
                    to: 2,
                    x: 0.2,
                    rate: 30.0,
                },
                Branch {
                    from: 2,
                    to: 3,
                    x: 0.5,
                    rate: 20.0,
                },
            ],
            generators: vec![Generator {
                bus: 1,
                pmax: 80.0,
                cost: 2.0,
            }],
        }
    }

    #[test]
    fn sampling_is_seeded_and_in_range() {
        let c = tiny();
        let a = sample_loads(&c, 24, 3);
        assert_eq!(a, sample_loads(&c, 24, 3));
        assert_ne!(a, sample_loads(&c, 24, 4));
        assert_eq!(a.len(), 2);
        for (load, pd) in a.iter().zip([40.0, 10.0]) {
            assert!(load
                .max_demand
                .iter()
                .all(|&d| (0.75 * pd..=1.25 * pd).contains(&d)));
            assert!(load.bid.iter().all(|&b| b == 200.0));
        }
    }

    #[test]
    fn scenario_from_case() {
        let c = tiny();
        let s = case_scenario(&c, 4, sample_loads(&c, 4, 0));
        assert!(s.validate().is_empty());
        assert_eq!(s.lines[0].susceptance, 500.0);
        assert_eq!(s.lines[1].flow_cap, vec![20.0; 4]);
        assert_eq!(s.suppliers[0].bid, vec![2.0; 4]);
    }

    #[test]
    fn multiplier_sizes_storage() {
        let e = esr_from_multiplier("b", 5, 10.0, 0.1, 24);
        assert_eq!((e.soc_max, e.soc_init, e.power_cap), (40.0, 20.0, 10.0));
        assert_eq!((e.eta_charge, e.eta_discharge), (0.95, 0.85));
        assert!((e.round_trip() - 0.8075).abs() < 1e-12);
        let z = esr_from_multiplier("b", 5, 0.0, 0.1, 24);
        assert_eq!((z.soc_max, z.soc_init, z.power_cap), (0.0, 0.0, 0.0));
    }
}
