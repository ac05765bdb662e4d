//! Acceptance suite: one PASS/FAIL line per criterion.

mod common;

use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::goldens::{tables, PRICE_TOL, SERIES_TOL, WELFARE_TOL};
use vlmarket_core::analysis::{
    certify_prices, complementarity_report, AuditReport, CONSISTENCY_TOL,
};
use vlmarket_core::formulations::{clear, ClearingResult, FormulationKind};
use vlmarket_core::io::{
    builtin_single_node, load_case_file, run_sweep, single_node, SweepConfig, SweepMode,
    SweepReport,
};
use vlmarket_core::lp::Tolerances;
use vlmarket_core::model::Scenario;
use vlmarket_core::virtual_links::{decompose, esr_bid_cost};

const COMP_TOL: f64 = 1e-9;
const EQUALITY_TOL: f64 = 1e-6;
const ROUND_TRIP_TOL: f64 = 1e-8;
const STD_NOISE: f64 = 1.05;
const BREAK_DROP: f64 = 0.5;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
}

fn single_node_goldens() -> Outcome {
    let start = Instant::now();
    let mut misses = Vec::new();
    for (kind, rows) in tables() {
        for row in rows.iter() {
            let r = clear(&builtin_single_node(row.scenario).unwrap(), kind).unwrap();
            let ok = (r.welfare - row.welfare).abs() <= WELFARE_TOL
                && close(&r.charge[0], &row.charge, SERIES_TOL)
                && close(&r.discharge[0], &row.discharge, SERIES_TOL)
                && close(&r.soc[0], &row.soc, SERIES_TOL);
            if !ok {
                misses.push(format!("{kind} s{} welfare {:.4}", row.scenario, r.welfare));
            }
        }
    }
    let elapsed = start.elapsed();
    let fast = elapsed < Duration::from_secs(1);
    outcome(
        misses.is_empty() && fast,
        format!(
            "8 rows, {} mismatches {misses:?}, {:.3} s",
            misses.len(),
            elapsed.as_secs_f64()
        ),
    )
}

fn single_node_prices() -> Outcome {
    let mut matched = 0;
    let mut certified = Vec::new();
    let mut failed = Vec::new();
    for (kind, rows) in tables() {
        for row in rows.iter() {
            let r = clear(&builtin_single_node(row.scenario).unwrap(), kind).unwrap();
            if close(&r.prices[0], &row.price, PRICE_TOL) {
                matched += 1;
                continue;
            }
            let published = certify_prices(&r, &[row.price.to_vec()], 1e-6);
            let computed = certify_prices(&r, &r.prices, 1e-6);
            let label = format!("{kind} s{} {:?}", row.scenario, r.prices[0]);
            if published.passed() && computed.passed() && published.duality_gap <= 1e-6 {
                certified.push(label);
            } else {
                failed.push(label);
            }
        }
    }
    outcome(
        failed.is_empty(),
        format!("{matched} match within {PRICE_TOL}; both vectors certify for {certified:?}; failures {failed:?}"),
    )
}

/// Clearings of one corpus scenario.
struct Cleared {
    seed: u64,
    scenario: Scenario,
    robust: ClearingResult,
    vl: ClearingResult,
}

struct Audits {
    relaxed: AuditReport,
    robust: AuditReport,
    vl: AuditReport,
}

fn clear_corpus() -> Result<(Vec<Cleared>, Vec<Audits>, Duration), String> {
    let mut cleared = Vec::new();
    let mut audits = Vec::new();
    let mut robust_time = Duration::ZERO;
    for (seed, s) in common::corpus() {
        let run = |k| clear(&s, k).map_err(|e| format!("seed {seed} {k}: {e}"));
        let audit = |r: &ClearingResult| {
            complementarity_report(r, &s, COMP_TOL).map_err(|e| format!("seed {seed}: {e}"))
        };
        let relaxed = run(FormulationKind::EsrRelaxed)?;
        let t0 = Instant::now();
        let robust = run(FormulationKind::EsrRobust)?;
        let vl = run(FormulationKind::VirtualLink)?;
        let a_robust = audit(&robust)?;
        let a_vl = audit(&vl)?;
        robust_time += t0.elapsed();
        audits.push(Audits {
            relaxed: audit(&relaxed)?,
            robust: a_robust,
            vl: a_vl,
        });
        cleared.push(Cleared {
            seed,
            scenario: s,
            robust,
            vl,
        });
    }
    Ok((cleared, audits, robust_time))
}

fn robust_complementarity(audits: &[Audits], elapsed: Duration) -> Outcome {
    let violations: usize = audits
        .iter()
        .map(|a| a.robust.violations().count() + a.vl.violations().count())
        .sum();
    let fast = elapsed < Duration::from_secs(60);
    outcome(
        violations == 0 && fast && audits.len() == common::CORPUS_SIZE,
        format!(
            "{} scenarios, {violations} violations at tol {COMP_TOL:e}*pmax^2, {:.2} s",
            audits.len(),
            elapsed.as_secs_f64()
        ),
    )
}

fn bound_sufficiency(audits: &[Audits]) -> Outcome {
    let violations: usize = audits.iter().map(|a| a.relaxed.violations().count()).sum();
    let counter: usize = audits
        .iter()
        .map(|a| a.relaxed.counterexamples().count())
        .sum();
    let s4 = builtin_single_node(4).unwrap();
    let r4 = clear(&s4, FormulationKind::EsrRelaxed).unwrap();
    let a4 = complementarity_report(&r4, &s4, COMP_TOL).unwrap();
    let non_necessity =
        a4.violations().next().is_none() && a4.complementarity.iter().any(|e| e.below_bound);
    outcome(
        counter == 0 && non_necessity,
        format!(
            "{violations} relaxed violations, {counter} without a bound violation; scenario 4 complementary below the bound: {non_necessity}"
        ),
    )
}

fn link_equality(corpus: &[Cleared]) -> Outcome {
    let mut worst_welfare = 0.0f64;
    let mut worst_trip = 0.0f64;
    let mut worst_cost = 0.0f64;
    let mut errors = Vec::new();
    for c in corpus {
        let scale = 1.0 + c.robust.welfare.abs().max(c.vl.welfare.abs());
        worst_welfare = worst_welfare.max((c.robust.welfare - c.vl.welfare).abs() / scale);
        for r in [&c.robust, &c.vl] {
            for (b, e) in c.scenario.esrs.iter().enumerate() {
                match decompose(&r.charge[b], &r.discharge[b], e) {
                    Ok(d) => {
                        let (pc, pd) = d.compose(e);
                        for (x, y) in pc
                            .iter()
                            .zip(&r.charge[b])
                            .chain(pd.iter().zip(&r.discharge[b]))
                        {
                            worst_trip = worst_trip.max((x - y).abs());
                        }
                        let direct = esr_bid_cost(e, &r.charge[b], &r.discharge[b]);
                        worst_cost =
                            worst_cost.max((d.bid_cost(e) - direct).abs() / (1.0 + direct.abs()));
                    }
                    Err(err) => errors.push(format!("seed {} {}: {err}", c.seed, r.kind)),
                }
            }
        }
    }
    outcome(
        worst_welfare <= EQUALITY_TOL && worst_trip <= ROUND_TRIP_TOL && worst_cost <= ROUND_TRIP_TOL && errors.is_empty(),
        format!(
            "max relative welfare gap {worst_welfare:.2e}, round trip {worst_trip:.2e}, cost identity {worst_cost:.2e}, decompose errors {errors:?}"
        ),
    )
}

fn consistency(audits: &[Audits]) -> Outcome {
    let mut worst = 0.0f64;
    let mut entries = 0;
    for a in audits {
        for e in a
            .relaxed
            .consistency
            .iter()
            .chain(&a.robust.consistency)
            .chain(&a.vl.consistency)
        {
            worst = worst.max(e.gap);
            entries += 1;
        }
    }
    outcome(
        worst <= CONSISTENCY_TOL,
        format!("{entries} ESR checks, worst gap {worst:.2e}"),
    )
}

fn std_at(
    report: &SweepReport,
    mode: SweepMode,
    esr_node: Option<usize>,
    k: u32,
    node: usize,
) -> f64 {
    let r = report.find(mode, esr_node, k).expect("sweep point");
    r.volatility.temporal[r.nodes.iter().position(|&n| n == node).expect("bus")]
}

fn sweep_properties() -> Outcome {
    let start = Instant::now();
    let case = load_case_file(&Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/case30_api.m"))
        .unwrap();
    let cfg = SweepConfig::default();
    let report = match run_sweep(&case, &cfg, &Tolerances::default()) {
        Ok(r) => r,
        Err(e) => return outcome(false, format!("sweep failed: {e}")),
    };
    let elapsed = start.elapsed();

    let mut nonincreasing = true;
    let mut worst_ratio = 0.0f64;
    let mut best_drop = 0.0f64;
    for &n in &cfg.placements {
        let series: Vec<f64> = cfg
            .k_values
            .iter()
            .map(|&k| std_at(&report, SweepMode::All, None, k, n))
            .collect();
        for w in series.windows(2) {
            if w[1] > STD_NOISE * w[0] {
                nonincreasing = false;
            }
            if w[0] > 0.0 {
                worst_ratio = worst_ratio.max(w[1] / w[0]);
                best_drop = best_drop.max(1.0 - w[1] / w[0]);
            }
        }
    }
    let a = nonincreasing && best_drop >= BREAK_DROP;

    let mean = |mode, node, k| {
        report
            .find(mode, node, k)
            .expect("sweep point")
            .volatility
            .mean_temporal()
    };
    let k0 = mean(SweepMode::All, None, 0);
    let all20 = mean(SweepMode::All, None, 20);
    let singles: Vec<f64> = cfg
        .placements
        .iter()
        .map(|&n| mean(SweepMode::Single, Some(n), 20))
        .collect();
    let b = singles.iter().all(|&s| all20 <= s && s <= k0);

    let worst_net = report
        .runs
        .iter()
        .flat_map(|r| &r.remuneration)
        .map(|m| m.net + 1e-6 * (1.0 + m.gross.abs()))
        .fold(f64::INFINITY, f64::min);
    let c = worst_net >= 0.0;

    outcome(
        a && b && c && elapsed < Duration::from_secs(600),
        format!(
            "(a) {a}: worst step ratio {worst_ratio:.3}, largest drop {best_drop:.2}; (b) {b}: all-ESR {all20:.3} <= singles {singles:.3?} <= K=0 {k0:.3}; (c) {c}; {} clearings in {:.1} s",
            report.runs.len(),
            elapsed.as_secs_f64()
        ),
    )
}

fn calibration() -> Outcome {
    let free = clear(&single_node(25.0, 50.0, 0.0), FormulationKind::EsrRelaxed)
        .unwrap()
        .welfare;
    let with_bid = clear(
        &builtin_single_node(1).unwrap(),
        FormulationKind::EsrRelaxed,
    )
    .unwrap()
    .welfare;
    let ok = (free - 3886.11).abs() <= 0.01 && (with_bid - 3883.72).abs() <= 0.01;
    outcome(
        ok,
        format!("bid-free {free:.4}, with 0.1 bid {with_bid:.4}"),
    )
}

fn main() -> ExitCode {
    let mut results: Vec<(&str, Outcome)> = vec![
        ("1 single-node goldens", single_node_goldens()),
        ("2 single-node prices", single_node_prices()),
    ];
    match clear_corpus() {
        Ok((corpus, audits, elapsed)) => {
            results.push((
                "3 robust complementarity",
                robust_complementarity(&audits, elapsed),
            ));
            results.push(("4 price-bound sufficiency", bound_sufficiency(&audits)));
            results.push(("5 robust and virtual-link equality", link_equality(&corpus)));
            results.push(("6 agent consistency", consistency(&audits)));
        }
        Err(e) => {
            for name in [
                "3 robust complementarity",
                "4 price-bound sufficiency",
                "5 robust and virtual-link equality",
                "6 agent consistency",
            ] {
                results.push((name, outcome(false, e.clone())));
            }
        }
    }
    results.push(("7 network sweep properties", sweep_properties()));
    results.push(("8 bid calibration", calibration()));

    let mut all = true;
    for (name, o) in &results {
        all &= o.passed;
        println!(
            "{} criterion {name}: {}",
            if o.passed { "PASS" } else { "FAIL" },
            o.detail
        );
    }
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
