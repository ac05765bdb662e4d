//! Single-node golden results.

mod common;

use common::goldens::{tables, PRICE_TOL, SERIES_TOL, WELFARE_TOL};
use vlmarket_core::analysis::certify_prices;
use vlmarket_core::formulations::{clear, FormulationKind};
use vlmarket_core::io::{builtin_single_node, single_node};

fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
}

#[test]
fn welfare_and_esr_series_match() {
    for (kind, rows) in tables() {
        for row in rows.iter() {
            let s = builtin_single_node(row.scenario).unwrap();
            let r = clear(&s, kind).unwrap();
            assert!(
                (r.welfare - row.welfare).abs() <= WELFARE_TOL,
                "{kind} s{}: {}",
                row.scenario,
                r.welfare
            );
            assert!(
                close(&r.charge[0], &row.charge, SERIES_TOL),
                "{kind} s{} pc {:?}",
                row.scenario,
                r.charge[0]
            );
            assert!(
                close(&r.discharge[0], &row.discharge, SERIES_TOL),
                "{kind} s{} pd {:?}",
                row.scenario,
                r.discharge[0]
            );
            assert!(
                close(&r.soc[0], &row.soc, SERIES_TOL),
                "{kind} s{} soc {:?}",
                row.scenario,
                r.soc[0]
            );
        }
    }
}

#[test]
fn robust_matches_virtual_link_rows() {
    for row in common::goldens::VIRTUAL_LINK.iter() {
        let s = builtin_single_node(row.scenario).unwrap();
        let r = clear(&s, FormulationKind::EsrRobust).unwrap();
        assert!((r.welfare - row.welfare).abs() <= WELFARE_TOL);
        assert!(
            close(&r.soc[0], &row.soc, SERIES_TOL),
            "s{} soc {:?}",
            row.scenario,
            r.soc[0]
        );
    }
}

#[test]
fn prices_match_or_certify() {
    for (kind, rows) in tables() {
        for row in rows.iter() {
            let s = builtin_single_node(row.scenario).unwrap();
            let r = clear(&s, kind).unwrap();
            if close(&r.prices[0], &row.price, PRICE_TOL) {
                continue;
            }
            let published = certify_prices(&r, &[row.price.to_vec()], 1e-6);
            let computed = certify_prices(&r, &r.prices, 1e-6);
            assert!(published.passed(), "{kind} s{}: {published}", row.scenario);
            assert!(computed.passed(), "{kind} s{}: {computed}", row.scenario);
        }
    }
}

#[test]
fn bid_free_welfare() {
    let s = single_node(25.0, 50.0, 0.0);
    let free = clear(&s, FormulationKind::EsrRelaxed).unwrap().welfare;
    assert!((free - 3886.11).abs() <= 0.01, "{free}");
    let bid = clear(
        &builtin_single_node(1).unwrap(),
        FormulationKind::EsrRelaxed,
    )
    .unwrap()
    .welfare;
    assert!((bid - 3883.72).abs() <= 0.01);
}
