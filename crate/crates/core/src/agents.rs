//! Storage profit maximization at fixed prices.
//!
//! Each market decomposes into per-participant problems once prices are
//! fixed. Solving the storage problem independently and comparing with the
//! cleared operation checks that the market prices support the allocation.

use serde::Serialize;
use thiserror::Error;

use crate::formulations::{
    add_esr_rows, add_vl_rows, ClearingResult, FormulationKind, SocUpper, VlSocRows,
};
use crate::lp::{LinearProgram, LpError, Status, VarId};
use crate::model::{Esr, Scenario};
use crate::virtual_links::{compose, link_bid, LinkSet, VirtualFlowPlan, VirtualLink};

#[derive(Debug, Clone, PartialEq)]
pub enum ProfitMaxVariant {
    /// Exact SOC bounds, complementarity relaxed.
    Exact,
    /// Conservative net-charge upper bound.
    Robust,
    /// Link form; `links` must refer to ESR index 0.
    VirtualLink { links: LinkSet, rows: VlSocRows },
}

impl ProfitMaxVariant {
    /// Link-form variant with every link of a single ESR priced at its
    /// cost-equivalent bid.
    pub fn all_links(esr: &Esr, periods: usize, rows: VlSocRows) -> Self {
        let mut links = Vec::new();
        for tc in 1..=periods {
            for td in (1..=periods).filter(|&td| td != tc) {
                links.push(VirtualLink {
                    esr: 0,
                    t_charge: tc,
                    t_discharge: td,
                    bid: link_bid(esr, tc, td),
                });
            }
        }
        ProfitMaxVariant::VirtualLink {
            links: LinkSet::new(links, 1, periods).expect("valid links"),
            rows,
        }
    }
}

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("price series has {got} entries, expected {expected}")]
    PriceLength { got: usize, expected: usize },
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error("profit maximization is {0}")]
    NotOptimal(Status),
}

/// Optimal operation of one ESR at given prices.
#[derive(Debug, Clone)]
pub struct AgentOutcome {
    pub charge: Vec<f64>,
    pub discharge: Vec<f64>,
    /// Link flows for the link-form variant.
    pub plan: Option<VirtualFlowPlan>,
    pub profit: f64,
}

/// Maximizes storage profit at the nodal price series `prices` (length `T`).
pub fn profit_max(
    esr: &Esr,
    prices: &[f64],
    variant: &ProfitMaxVariant,
) -> Result<AgentOutcome, AgentError> {
    let periods = esr.charge_bid.len();
    if prices.len() != periods {
        return Err(AgentError::PriceLength {
            got: prices.len(),
            expected: periods,
        });
    }
    let mut lp = LinearProgram::new();
    let id = &esr.id;
    match variant {
        ProfitMaxVariant::Exact | ProfitMaxVariant::Robust => {
            let mut pc = Vec::with_capacity(periods);
            let mut pd = Vec::with_capacity(periods);
            for t in 0..periods {
                pc.push(lp.add_var(
                    format!("pc[{id},{}]", t + 1),
                    0.0,
                    esr.power_cap,
                    prices[t] + esr.charge_bid[t],
                )?);
                pd.push(lp.add_var(
                    format!("pd[{id},{}]", t + 1),
                    0.0,
                    esr.power_cap,
                    esr.discharge_bid[t] - prices[t],
                )?);
            }
            let upper = if *variant == ProfitMaxVariant::Exact {
                SocUpper::Exact
            } else {
                SocUpper::Robust
            };
            add_esr_rows(&mut lp, esr, &pc, &pd, upper)?;
            let sol = lp.solve()?;
            if sol.status != Status::Optimal {
                return Err(AgentError::NotOptimal(sol.status));
            }
            Ok(AgentOutcome {
                charge: pc.iter().map(|&v| sol.value(v)).collect(),
                discharge: pd.iter().map(|&v| sol.value(v)).collect(),
                plan: None,
                profit: -sol.objective,
            })
        }
        ProfitMaxVariant::VirtualLink { links, rows } => {
            let eta = esr.round_trip();
            let mut delta: Vec<Option<VarId>> = Vec::with_capacity(links.len());
            for l in links.links() {
                let cost = prices[l.t_charge - 1] + l.bid - eta * prices[l.t_discharge - 1];
                delta.push(Some(lp.add_var(
                    format!("delta[{id},{},{}]", l.t_charge, l.t_discharge),
                    0.0,
                    esr.power_cap,
                    cost,
                )?));
            }
            let mut nc = Vec::with_capacity(periods);
            let mut nd = Vec::with_capacity(periods);
            for t in 0..periods {
                nc.push(lp.add_var(
                    format!("pnc[{id},{}]", t + 1),
                    0.0,
                    esr.power_cap,
                    prices[t] + esr.charge_bid[t],
                )?);
                nd.push(lp.add_var(
                    format!("pnd[{id},{}]", t + 1),
                    0.0,
                    esr.power_cap,
                    esr.discharge_bid[t] - prices[t],
                )?);
            }
            add_vl_rows(&mut lp, esr, 0, links, &delta, &nc, &nd, *rows)?;
            let sol = lp.solve()?;
            if sol.status != Status::Optimal {
                return Err(AgentError::NotOptimal(sol.status));
            }
            let plan = VirtualFlowPlan {
                delta: delta
                    .iter()
                    .map(|v| sol.value(v.expect("all links have columns")))
                    .collect(),
                net_charge: vec![nc.iter().map(|&v| sol.value(v)).collect()],
                net_discharge: vec![nd.iter().map(|&v| sol.value(v)).collect()],
            };
            let (pc, pd) = compose(&plan, links, std::slice::from_ref(esr));
            Ok(AgentOutcome {
                charge: pc.into_iter().next().expect("one ESR"),
                discharge: pd.into_iter().next().expect("one ESR"),
                plan: Some(plan),
                profit: -sol.objective,
            })
        }
    }
}

/// Profit `sum_t (pi - a_sd) pd - (pi + a_sc) pc` of a charge/discharge series.
pub fn operation_profit(esr: &Esr, prices: &[f64], charge: &[f64], discharge: &[f64]) -> f64 {
    (0..prices.len())
        .map(|t| {
            (prices[t] - esr.discharge_bid[t]) * discharge[t]
                - (prices[t] + esr.charge_bid[t]) * charge[t]
        })
        .sum()
}

/// Comparison of one ESR's cleared profit with its best response.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConsistencyEntry {
    pub esr: String,
    pub cleared_profit: f64,
    pub optimal_profit: f64,
    /// `optimal_profit - cleared_profit`.
    pub gap: f64,
    pub passed: bool,
}

/// Links of ESR `b` re-indexed as ESR 0, plus the position map into `links`.
fn single_esr_links(links: &LinkSet, b: usize) -> (LinkSet, Vec<usize>) {
    let mut own = Vec::new();
    let mut map = Vec::new();
    for (v, l) in links.links().iter().enumerate() {
        if l.esr == b {
            own.push(VirtualLink { esr: 0, ..*l });
            map.push(v);
        }
    }
    (
        LinkSet::new(own, 1, links.periods()).expect("subset of a valid set"),
        map,
    )
}

/// Solves every ESR's profit problem at the cleared prices and compares with
/// the cleared operation. Passes when the gap is at most
/// `tol * (1 + |optimal profit|)`. The base market has no storage and yields
/// no entries.
pub fn consistency_check(
    result: &ClearingResult,
    scenario: &Scenario,
    tol: f64,
) -> Result<Vec<ConsistencyEntry>, AgentError> {
    let mut out = Vec::new();
    for (b, esr) in scenario.esrs.iter().enumerate() {
        let pos = scenario
            .node_position(esr.node)
            .expect("validated scenario");
        let prices = &result.prices[pos];
        let (cleared, variant) = match result.kind {
            FormulationKind::Base => return Ok(out),
            FormulationKind::EsrRelaxed | FormulationKind::EsrRobust => {
                let cleared =
                    operation_profit(esr, prices, &result.charge[b], &result.discharge[b]);
                let variant = if result.kind == FormulationKind::EsrRelaxed {
                    ProfitMaxVariant::Exact
                } else {
                    ProfitMaxVariant::Robust
                };
                (cleared, variant)
            }
            FormulationKind::VirtualLink => {
                let links = result
                    .market
                    .links
                    .as_ref()
                    .expect("virtual-link market carries links");
                let plan = result
                    .plan
                    .as_ref()
                    .expect("virtual-link result carries a plan");
                let (own, map) = single_esr_links(links, b);
                let eta = esr.round_trip();
                let mut cleared = 0.0;
                for (l, &v) in own.links().iter().zip(&map) {
                    let margin = eta * prices[l.t_discharge - 1] - prices[l.t_charge - 1] - l.bid;
                    cleared += margin * plan.delta[v];
                }
                cleared +=
                    operation_profit(esr, prices, &plan.net_charge[b], &plan.net_discharge[b]);
                (
                    cleared,
                    ProfitMaxVariant::VirtualLink {
                        links: own,
                        rows: result.market.vl_rows,
                    },
                )
            }
        };
        let best = profit_max(esr, prices, &variant)?;
        let gap = best.profit - cleared;
        out.push(ConsistencyEntry {
            esr: esr.id.clone(),
            cleared_profit: cleared,
            optimal_profit: best.profit,
            gap,
            passed: gap.abs() <= tol * (1.0 + best.profit.abs()),
        });
    }
    Ok(out)
}
