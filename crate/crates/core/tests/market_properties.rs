//! Market properties over the seeded scenario corpus and fresh random seeds.

mod common;

use proptest::prelude::*;
use vlmarket_core::analysis::{complementarity_report, participant_profits, CONSISTENCY_TOL};
use vlmarket_core::formulations::{clear, ClearingResult, FormulationKind};
use vlmarket_core::model::Scenario;
use vlmarket_core::virtual_links::{
    compose, decompose, enumerate_links, esr_bid_cost, plan_from_decompositions,
};

const COMP_TOL: f64 = 1e-9;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / (1.0 + a.abs().max(b.abs()))
}

fn max_diff(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter()
        .flatten()
        .zip(b.iter().flatten())
        .fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// Checks every property for one scenario, returning a description of the
/// first failure.
fn check(s: &Scenario) -> Result<(), String> {
    let cleared = |k| clear(s, k).map_err(|e| format!("{k}: {e}"));
    let base = cleared(FormulationKind::Base)?;
    let relaxed = cleared(FormulationKind::EsrRelaxed)?;
    let robust = cleared(FormulationKind::EsrRobust)?;
    let vl = cleared(FormulationKind::VirtualLink)?;

    for r in [&robust, &vl] {
        let audit = complementarity_report(r, s, COMP_TOL).map_err(|e| e.to_string())?;
        if let Some(e) = audit.violations().next() {
            return Err(format!(
                "{}: complementarity violated by {} at t={}",
                r.kind, e.esr, e.t
            ));
        };
    }
    let audit = complementarity_report(&relaxed, s, COMP_TOL).map_err(|e| e.to_string())?;
    if let Some(e) = audit.counterexamples().next() {
        return Err(format!(
            "relaxed: violation above the price bound for {} at t={}",
            e.esr, e.t
        ));
    }

    for r in [&relaxed, &robust, &vl] {
        let audit = complementarity_report(r, s, COMP_TOL).map_err(|e| e.to_string())?;
        if let Some(c) = audit.consistency.iter().find(|c| c.gap > CONSISTENCY_TOL) {
            return Err(format!(
                "{}: consistency gap {} for {}",
                r.kind, c.gap, c.esr
            ));
        }
        let p = participant_profits(r, s);
        let worst = p
            .suppliers
            .iter()
            .chain(&p.consumers)
            .map(|x| x.iter().sum::<f64>())
            .fold(0.0, f64::min);
        if worst < -1e-6 * (1.0 + r.welfare.abs()) {
            return Err(format!("{}: participant loses {worst}", r.kind));
        }
    }

    if rel(robust.welfare, vl.welfare) > 1e-6 {
        return Err(format!("robust {} vs vl {}", robust.welfare, vl.welfare));
    }
    let slack = 1e-7 * (1.0 + relaxed.welfare.abs());
    if base.welfare > robust.welfare + slack || robust.welfare > relaxed.welfare + slack {
        return Err(format!(
            "ordering {} {} {}",
            base.welfare, robust.welfare, relaxed.welfare
        ));
    }

    round_trip(s, &robust)?;
    round_trip(s, &vl)
}

fn round_trip(s: &Scenario, r: &ClearingResult) -> Result<(), String> {
    let links = enumerate_links(s);
    let mut parts = Vec::new();
    for (b, e) in s.esrs.iter().enumerate() {
        let d =
            decompose(&r.charge[b], &r.discharge[b], e).map_err(|x| format!("{}: {x}", r.kind))?;
        let (pc, pd) = d.compose(e);
        let err = max_diff(&[pc, pd], &[r.charge[b].clone(), r.discharge[b].clone()]);
        if err > 1e-8 {
            return Err(format!("{}: round trip error {err}", r.kind));
        }
        let direct = esr_bid_cost(e, &r.charge[b], &r.discharge[b]);
        if (d.bid_cost(e) - direct).abs() > 1e-8 * (1.0 + direct.abs()) {
            return Err(format!(
                "{}: link cost {} vs {direct}",
                r.kind,
                d.bid_cost(e)
            ));
        }
        parts.push(d);
    }
    let plan = plan_from_decompositions(&links, &parts).map_err(|x| x.to_string())?;
    let (pc, pd) = compose(&plan, &links, &s.esrs);
    let err = max_diff(&pc, &r.charge).max(max_diff(&pd, &r.discharge));
    if err > 1e-8 {
        return Err(format!("{}: plan round trip error {err}", r.kind));
    }
    Ok(())
}

#[test]
fn corpus_properties() {
    let failures: Vec<String> = common::corpus()
        .filter_map(|(seed, s)| check(&s).err().map(|e| format!("seed {seed}: {e}")))
        .collect();
    assert!(failures.is_empty(), "{failures:#?}");
}

#[test]
fn corpus_exercises_negative_prices() {
    let negative = common::corpus()
        .filter(|(_, s)| {
            let r = clear(s, FormulationKind::EsrRobust).unwrap();
            r.prices.iter().flatten().any(|&p| p < 0.0)
        })
        .count();
    assert!(negative >= 20, "{negative}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn fresh_scenarios(seed in 10_000u64..u64::MAX) {
        let s = common::random_scenario(seed);
        prop_assert!(check(&s).is_ok(), "{:?}", check(&s));
    }
}
