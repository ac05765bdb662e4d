//! Seeded random scenarios shared by the integration tests.
#![allow(dead_code)]

pub mod goldens;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vlmarket_core::model::{Consumer, Esr, Horizon, Node, Scenario, Supplier, TransmissionLine};

pub const CORPUS_SIZE: usize = 200;

/// Random scenario with 1 to 5 nodes and at most 12 periods.
///
/// Ramp-limited suppliers facing strongly varying demand are common, which
/// pushes some intervals to negative prices.
pub fn random_scenario(seed: u64) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(1..=5usize);
    let t = rng.gen_range(2..=12usize);
    let nodes = (1..=n).map(|id| Node { id }).collect();

    let mut lines = Vec::new();
    for k in 2..=n {
        let from = rng.gen_range(1..k);
        lines.push(random_line(&mut rng, lines.len(), from, k, t));
    }
    if n >= 3 && rng.gen_bool(0.5) {
        let a = rng.gen_range(1..=n);
        let b = (a % n) + 1;
        lines.push(random_line(&mut rng, lines.len(), a, b, t));
    }

    let mut suppliers = Vec::new();
    for i in 0..rng.gen_range(1..=3usize) {
        let cap = rng.gen_range(20.0..100.0);
        suppliers.push(Supplier {
            id: format!("g{i}"),
            node: rng.gen_range(1..=n),
            capacity: vec![cap; t],
            bid: (0..t).map(|_| rng.gen_range(1.0..40.0)).collect(),
            ramp_limit: rng.gen_bool(0.8).then(|| rng.gen_range(2.0..30.0)),
        });
    }

    let mut consumers = Vec::new();
    // At most one consumer per node.
    for node in 1..=n {
        if node > 1 && rng.gen_bool(0.4) {
            continue;
        }
        consumers.push(Consumer {
            id: format!("c{node}"),
            node,
            max_demand: (0..t).map(|_| rng.gen_range(0.0..80.0)).collect(),
            bid: (0..t).map(|_| rng.gen_range(20.0..100.0)).collect(),
        });
    }

    let mut esrs = Vec::new();
    for b in 0..rng.gen_range(1..=3usize) {
        let soc_max = rng.gen_range(10.0..100.0);
        let soc_min = if rng.gen_bool(0.5) {
            0.0
        } else {
            rng.gen_range(0.0..0.3 * soc_max)
        };
        let bid = if rng.gen_bool(0.2) {
            0.0
        } else {
            rng.gen_range(0.0..1.0)
        };
        esrs.push(Esr {
            id: format!("s{b}"),
            node: rng.gen_range(1..=n),
            eta_charge: rng.gen_range(0.7..=1.0),
            eta_discharge: rng.gen_range(0.7..=1.0),
            soc_min,
            soc_max,
            soc_init: rng.gen_range(soc_min..=soc_max),
            power_cap: rng.gen_range(1.0..30.0),
            charge_bid: (0..t).map(|_| bid).collect(),
            discharge_bid: (0..t).map(|_| bid).collect(),
        });
    }

    Scenario {
        horizon: Horizon::new(t),
        nodes,
        lines,
        suppliers,
        consumers,
        esrs,
    }
}

fn random_line(
    rng: &mut ChaCha8Rng,
    k: usize,
    snd: usize,
    rec: usize,
    t: usize,
) -> TransmissionLine {
    let mut line = TransmissionLine::constant(
        format!("l{k}"),
        snd,
        rec,
        rng.gen_range(5.0..50.0),
        rng.gen_range(5.0..60.0),
        t,
    );
    if rng.gen_bool(0.2) {
        line.angle_cap = vec![rng.gen_range(0.2..1.0); t];
    }
    line
}

pub fn corpus() -> impl Iterator<Item = (u64, Scenario)> {
    (0..CORPUS_SIZE as u64).map(|seed| (seed, random_scenario(seed)))
}
