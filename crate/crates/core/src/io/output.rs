//! CSV emission of clearing results and sweeps.
//!
//! Files are comma separated with a header row and LF line endings. Floats
//! are written in shortest round-trip form, so parsing them back gives the
//! same `f64`. Periods are 1-based.

use std::fs;
use std::io;
use std::path::Path;

use serde::Serialize;
use thiserror::Error;

use super::sweep::SweepReport;
use crate::analysis::welfare_breakdown;
use crate::formulations::ClearingResult;
use crate::model::Scenario;

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },
    #[error("nothing to write")]
    Empty,
}

fn write_csv<T: Serialize>(
    dir: &Path,
    name: &str,
    rows: impl IntoIterator<Item = T>,
) -> Result<(), OutputError> {
    let path = dir.join(name);
    let shown = path.display().to_string();
    let csv_err = |source| OutputError::Csv {
        path: shown.clone(),
        source,
    };
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(&path)
        .map_err(csv_err)?;
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush().map_err(|source| OutputError::Io {
        path: shown.clone(),
        source,
    })
}

fn ensure_dir(dir: &Path) -> Result<(), OutputError> {
    fs::create_dir_all(dir).map_err(|source| OutputError::Io {
        path: dir.display().to_string(),
        source,
    })
}

#[derive(Serialize)]
struct PriceRow {
    node: usize,
    t: usize,
    price: f64,
}

#[derive(Serialize)]
struct AllocationRow<'a> {
    kind: &'a str,
    id: String,
    t: usize,
    value: f64,
}

#[derive(Serialize)]
struct EsrRow<'a> {
    esr: &'a str,
    node: usize,
    t: usize,
    charge: f64,
    discharge: f64,
    soc: f64,
    net_charge: Option<f64>,
    net_discharge: Option<f64>,
}

/// One-line summary of a clearing, also used for ndjson output.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub formulation: &'static str,
    pub welfare: f64,
    pub consumer_value: f64,
    pub supply_cost: f64,
    pub transmission_cost: f64,
    pub storage_bid_cost: f64,
    pub iterations: usize,
}

pub fn summary_row(result: &ClearingResult, scenario: &Scenario) -> SummaryRow {
    let w = welfare_breakdown(result, scenario);
    SummaryRow {
        formulation: result.kind.as_str(),
        welfare: result.welfare,
        consumer_value: w.consumer_value,
        supply_cost: w.supply_cost,
        transmission_cost: w.transmission_cost,
        storage_bid_cost: w.storage_bid_cost,
        iterations: result.solution.iterations,
    }
}

/// Writes `prices.csv`, `allocations.csv`, `esr_ops.csv` and `summary.csv`
/// into `dir`, creating it if needed.
pub fn write_results(
    result: &ClearingResult,
    scenario: &Scenario,
    dir: &Path,
) -> Result<(), OutputError> {
    ensure_dir(dir)?;
    let periods = scenario.periods();

    write_csv(
        dir,
        "prices.csv",
        scenario
            .nodes
            .iter()
            .zip(&result.prices)
            .flat_map(|(n, p)| {
                p.iter().enumerate().map(move |(t, &price)| PriceRow {
                    node: n.id,
                    t: t + 1,
                    price,
                })
            }),
    )?;

    let mut alloc = Vec::new();
    let mut push = |kind: &'static str, id: String, series: &[f64]| {
        for (t, &value) in series.iter().enumerate() {
            alloc.push(AllocationRow {
                kind,
                id: id.clone(),
                t: t + 1,
                value,
            });
        }
    };
    for (g, p) in scenario.suppliers.iter().zip(&result.supply) {
        push("supply", g.id.clone(), p);
    }
    for (c, d) in scenario.consumers.iter().zip(&result.demand) {
        push("demand", c.id.clone(), d);
    }
    for (e, f) in result.market.edges.iter().zip(&result.flows) {
        let sign = if e.forward { '+' } else { '-' };
        push("flow", format!("{}{sign}", scenario.lines[e.line].id), f);
    }
    for (n, th) in scenario.nodes.iter().zip(&result.angles) {
        push("angle", n.id.to_string(), th);
    }
    write_csv(dir, "allocations.csv", alloc)?;

    let mut esr_rows = Vec::new();
    for (b, e) in scenario.esrs.iter().enumerate() {
        for t in 0..periods {
            esr_rows.push(EsrRow {
                esr: &e.id,
                node: e.node,
                t: t + 1,
                charge: result.charge[b][t],
                discharge: result.discharge[b][t],
                soc: result.soc[b][t],
                net_charge: result.plan.as_ref().map(|p| p.net_charge[b][t]),
                net_discharge: result.plan.as_ref().map(|p| p.net_discharge[b][t]),
            });
        }
    }
    write_csv(dir, "esr_ops.csv", esr_rows)?;
    write_csv(dir, "summary.csv", [summary_row(result, scenario)])
}

#[derive(Serialize)]
struct VolatilityRow {
    mode: &'static str,
    esr_node: Option<usize>,
    k: u32,
    node: usize,
    temporal_std: f64,
}

#[derive(Serialize)]
struct RemunerationRow<'a> {
    mode: &'static str,
    esr_node: Option<usize>,
    k: u32,
    esr: &'a str,
    node: usize,
    link_term: f64,
    net_term: f64,
    gross: f64,
    bid_cost: f64,
    net: f64,
}

#[derive(Serialize)]
struct SweepSummaryRow {
    mode: &'static str,
    esr_node: Option<usize>,
    k: u32,
    welfare: f64,
    mean_temporal_std: f64,
}

#[derive(Serialize)]
struct SweepMeta<'a> {
    seed: u64,
    rng: &'a str,
    load_factor: &'a str,
    formulation: &'a str,
    std: &'a str,
    esr_bid: f64,
    single_scale: f64,
    periods: usize,
}

/// Writes `volatility_by_K.csv`, `remuneration_by_K.csv`,
/// `sweep_summary.csv` and `sweep_meta.toml` into `dir`.
pub fn write_sweep(report: &SweepReport, dir: &Path) -> Result<(), OutputError> {
    if report.runs.is_empty() {
        return Err(OutputError::Empty);
    }
    ensure_dir(dir)?;
    write_csv(
        dir,
        "volatility_by_K.csv",
        report.runs.iter().flat_map(|r| {
            r.nodes
                .iter()
                .zip(&r.volatility.temporal)
                .map(move |(&node, &temporal_std)| VolatilityRow {
                    mode: r.mode.as_str(),
                    esr_node: r.esr_node,
                    k: r.k,
                    node,
                    temporal_std,
                })
        }),
    )?;
    write_csv(
        dir,
        "remuneration_by_K.csv",
        report.runs.iter().flat_map(|r| {
            r.remuneration
                .iter()
                .zip(&r.esr_nodes)
                .map(move |(m, &node)| RemunerationRow {
                    mode: r.mode.as_str(),
                    esr_node: r.esr_node,
                    k: r.k,
                    esr: &m.esr,
                    node,
                    link_term: m.link_term,
                    net_term: m.net_term,
                    gross: m.gross,
                    bid_cost: m.bid_cost,
                    net: m.net,
                })
        }),
    )?;
    write_csv(
        dir,
        "sweep_summary.csv",
        report.runs.iter().map(|r| SweepSummaryRow {
            mode: r.mode.as_str(),
            esr_node: r.esr_node,
            k: r.k,
            welfare: r.welfare,
            mean_temporal_std: r.volatility.mean_temporal(),
        }),
    )?;

    let c = &report.config;
    let meta = SweepMeta {
        seed: c.seed,
        rng: "ChaCha8 (rand_chacha 0.3), seed_from_u64",
        load_factor: "uniform [0.75, 1.25] x Pd, consumer bid 200",
        formulation: "vl",
        std: "population",
        esr_bid: c.esr_bid,
        single_scale: c.single_scale,
        periods: c.periods,
    };
    let path = dir.join("sweep_meta.toml");
    let text = toml::to_string(&meta).expect("plain struct serializes");
    fs::write(&path, text).map_err(|source| OutputError::Io {
        path: path.display().to_string(),
        source,
    })
}
