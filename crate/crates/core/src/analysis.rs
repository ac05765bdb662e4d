//! Accounting and audits over cleared markets.

use serde::Serialize;
use thiserror::Error;

use crate::agents::{consistency_check, AgentError, ConsistencyEntry};
use crate::formulations::{ClearingResult, FormulationKind};
use crate::lp::{certify_with_fixed_duals, CertificateReport};
use crate::model::{Esr, Scenario};

/// Tolerance of the duality-consistency entries in an [`AuditReport`].
pub const CONSISTENCY_TOL: f64 = 1e-6;

/// Slack allowed when checking that a complementarity violation sits below
/// the price bound.
pub const BOUND_SLACK: f64 = 1e-6;

#[derive(Debug, Error, PartialEq)]
pub enum AnalysisError {
    #[error("remuneration needs a virtual-link result, got `{0}`")]
    NotVirtualLink(FormulationKind),
}

/// Per-period profits `[participant][t]` at the cleared prices.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParticipantProfits {
    /// `(pi - bid) p`
    pub suppliers: Vec<Vec<f64>>,
    /// `(bid - pi) d`
    pub consumers: Vec<Vec<f64>>,
    /// `(pi_to - pi_from - bid) f` per directed edge.
    pub edges: Vec<Vec<f64>>,
}

pub fn participant_profits(result: &ClearingResult, scenario: &Scenario) -> ParticipantProfits {
    let price = |node: usize, t: usize| {
        result.prices[scenario.node_position(node).expect("validated scenario")][t]
    };
    let periods = scenario.periods();
    let suppliers = scenario
        .suppliers
        .iter()
        .zip(&result.supply)
        .map(|(g, p)| {
            (0..periods)
                .map(|t| (price(g.node, t) - g.bid[t]) * p[t])
                .collect()
        })
        .collect();
    let consumers = scenario
        .consumers
        .iter()
        .zip(&result.demand)
        .map(|(c, d)| {
            (0..periods)
                .map(|t| (c.bid[t] - price(c.node, t)) * d[t])
                .collect()
        })
        .collect();
    let edges = result
        .market
        .edges
        .iter()
        .zip(&result.flows)
        .map(|(e, f)| {
            let line = &scenario.lines[e.line];
            (0..periods)
                .map(|t| {
                    let bid = if e.forward {
                        line.bid_forward[t]
                    } else {
                        line.bid_backward[t]
                    };
                    (result.prices[e.to][t] - result.prices[e.from][t] - bid) * f[t]
                })
                .collect()
        })
        .collect();
    ParticipantProfits {
        suppliers,
        consumers,
        edges,
    }
}

/// Settlement of one ESR in the virtual-link market.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Remuneration {
    pub esr: String,
    /// `sum_v (eta pi_d - pi_c) delta_v`
    pub link_term: f64,
    /// `sum_t pi (pnd - pnc)`
    pub net_term: f64,
    /// `link_term + net_term`
    pub gross: f64,
    /// Discharge revenue minus charge payments of the composed series.
    pub cashflow: f64,
    /// Bids paid on links and net operations.
    pub bid_cost: f64,
    /// `gross - bid_cost`
    pub net: f64,
}

pub fn esr_remuneration(
    result: &ClearingResult,
    scenario: &Scenario,
) -> Result<Vec<Remuneration>, AnalysisError> {
    let (Some(links), Some(plan)) = (result.market.links.as_ref(), result.plan.as_ref()) else {
        return Err(AnalysisError::NotVirtualLink(result.kind));
    };
    let mut out: Vec<Remuneration> = scenario
        .esrs
        .iter()
        .enumerate()
        .map(|(b, esr)| {
            let pi = &result.prices[scenario
                .node_position(esr.node)
                .expect("validated scenario")];
            let mut net_term = 0.0;
            let mut cashflow = 0.0;
            let mut bid_cost = 0.0;
            for t in 0..pi.len() {
                let (nc, nd) = (plan.net_charge[b][t], plan.net_discharge[b][t]);
                net_term += pi[t] * (nd - nc);
                cashflow += pi[t] * (result.discharge[b][t] - result.charge[b][t]);
                bid_cost += esr.charge_bid[t] * nc + esr.discharge_bid[t] * nd;
            }
            Remuneration {
                esr: esr.id.clone(),
                link_term: 0.0,
                net_term,
                gross: 0.0,
                cashflow,
                bid_cost,
                net: 0.0,
            }
        })
        .collect();
    for (l, &delta) in links.links().iter().zip(&plan.delta) {
        let esr = &scenario.esrs[l.esr];
        let pi = &result.prices[scenario
            .node_position(esr.node)
            .expect("validated scenario")];
        let r = &mut out[l.esr];
        r.link_term += (esr.round_trip() * pi[l.t_discharge - 1] - pi[l.t_charge - 1]) * delta;
        r.bid_cost += l.bid * delta;
    }
    for r in &mut out {
        r.gross = r.link_term + r.net_term;
        r.net = r.gross - r.bid_cost;
    }
    Ok(out)
}

/// Complementarity and price-bound audit of one `(esr, t)` pair.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComplementarityEntry {
    pub esr: String,
    /// 1-based period.
    pub t: usize,
    pub charge: f64,
    pub discharge: f64,
    pub product: f64,
    pub threshold: f64,
    /// `product > threshold`
    pub violated: bool,
    pub price: f64,
    /// Lowest price at which complementarity is guaranteed.
    pub bound: f64,
    /// `price < bound`
    pub below_bound: bool,
}

impl ComplementarityEntry {
    /// A complementarity violation at a price the bound says cannot produce one.
    pub fn is_counterexample(&self) -> bool {
        self.violated && self.price > self.bound + BOUND_SLACK
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditReport {
    pub kind: FormulationKind,
    pub tol: f64,
    pub complementarity: Vec<ComplementarityEntry>,
    pub consistency: Vec<ConsistencyEntry>,
}

impl AuditReport {
    pub fn violations(&self) -> impl Iterator<Item = &ComplementarityEntry> {
        self.complementarity.iter().filter(|e| e.violated)
    }

    pub fn counterexamples(&self) -> impl Iterator<Item = &ComplementarityEntry> {
        self.complementarity
            .iter()
            .filter(|e| e.is_counterexample())
    }

    pub fn consistency_failures(&self) -> impl Iterator<Item = &ConsistencyEntry> {
        self.consistency.iter().filter(|e| !e.passed)
    }

    /// True when no `(esr, t)` violates complementarity and every ESR's
    /// cleared profit matches its best response.
    pub fn passed(&self) -> bool {
        self.violations().next().is_none() && self.consistency_failures().next().is_none()
    }
}

/// `-(eta a_sd + a_sc) / (1 - eta)`; minus infinity for a lossless ESR.
pub fn price_lower_bound(esr: &Esr, t: usize) -> f64 {
    let eta = esr.round_trip();
    if eta >= 1.0 {
        return f64::NEG_INFINITY;
    }
    -(eta * esr.discharge_bid[t] + esr.charge_bid[t]) / (1.0 - eta)
}

/// Audits every `(esr, t)`: a product `pc * pd` above `tol * pcap^2` is a
/// violation. Also runs the duality-consistency check.
pub fn complementarity_report(
    result: &ClearingResult,
    scenario: &Scenario,
    tol: f64,
) -> Result<AuditReport, AgentError> {
    let mut complementarity = Vec::new();
    for (b, esr) in scenario.esrs.iter().enumerate() {
        let pi = &result.prices[scenario
            .node_position(esr.node)
            .expect("validated scenario")];
        let threshold = tol * esr.power_cap * esr.power_cap;
        for t in 0..scenario.periods() {
            let (charge, discharge) = (result.charge[b][t], result.discharge[b][t]);
            let product = charge * discharge;
            let bound = price_lower_bound(esr, t);
            complementarity.push(ComplementarityEntry {
                esr: esr.id.clone(),
                t: t + 1,
                charge,
                discharge,
                product,
                threshold,
                violated: product > threshold,
                price: pi[t],
                bound,
                below_bound: pi[t] < bound,
            });
        }
    }
    Ok(AuditReport {
        kind: result.kind,
        tol,
        complementarity,
        consistency: consistency_check(result, scenario, CONSISTENCY_TOL)?,
    })
}

/// Population standard deviation; zero for an empty slice.
pub fn population_std(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt()
}

/// Price dispersion over time and over space (population standard deviation).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VolatilityProfile {
    /// Per node position, over periods.
    pub temporal: Vec<f64>,
    /// Per period, over nodes.
    pub spatial: Vec<f64>,
}

impl VolatilityProfile {
    pub fn mean_temporal(&self) -> f64 {
        if self.temporal.is_empty() {
            return 0.0;
        }
        self.temporal.iter().sum::<f64>() / self.temporal.len() as f64
    }
}

pub fn volatility(result: &ClearingResult) -> VolatilityProfile {
    let periods = result.prices.first().map_or(0, Vec::len);
    let temporal = result.prices.iter().map(|p| population_std(p)).collect();
    let spatial = (0..periods)
        .map(|t| population_std(&result.prices.iter().map(|p| p[t]).collect::<Vec<_>>()))
        .collect();
    VolatilityProfile { temporal, spatial }
}

/// Welfare split into the value and cost terms of the clearing objective.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WelfareBreakdown {
    pub consumer_value: f64,
    pub supply_cost: f64,
    pub transmission_cost: f64,
    pub storage_bid_cost: f64,
}

impl WelfareBreakdown {
    pub fn total(&self) -> f64 {
        self.consumer_value - self.supply_cost - self.transmission_cost - self.storage_bid_cost
    }
}

pub fn welfare_breakdown(result: &ClearingResult, scenario: &Scenario) -> WelfareBreakdown {
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let consumer_value = scenario
        .consumers
        .iter()
        .zip(&result.demand)
        .map(|(c, d)| dot(&c.bid, d))
        .sum();
    let supply_cost = scenario
        .suppliers
        .iter()
        .zip(&result.supply)
        .map(|(g, p)| dot(&g.bid, p))
        .sum();
    let transmission_cost = result
        .market
        .edges
        .iter()
        .zip(&result.flows)
        .map(|(e, f)| {
            let line = &scenario.lines[e.line];
            dot(
                if e.forward {
                    &line.bid_forward
                } else {
                    &line.bid_backward
                },
                f,
            )
        })
        .sum();
    let storage_bid_cost = match (
        result.kind,
        result.market.links.as_ref(),
        result.plan.as_ref(),
    ) {
        (FormulationKind::Base, ..) => 0.0,
        (FormulationKind::VirtualLink, Some(links), Some(plan)) => {
            let link_cost: f64 = links
                .links()
                .iter()
                .zip(&plan.delta)
                .map(|(l, d)| l.bid * d)
                .sum();
            let net_cost: f64 = scenario
                .esrs
                .iter()
                .enumerate()
                .map(|(b, e)| {
                    dot(&e.charge_bid, &plan.net_charge[b])
                        + dot(&e.discharge_bid, &plan.net_discharge[b])
                })
                .sum();
            link_cost + net_cost
        }
        _ => scenario
            .esrs
            .iter()
            .enumerate()
            .map(|(b, e)| {
                dot(&e.charge_bid, &result.charge[b]) + dot(&e.discharge_bid, &result.discharge[b])
            })
            .sum(),
    };
    WelfareBreakdown {
        consumer_value,
        supply_cost,
        transmission_cost,
        storage_bid_cost,
    }
}

/// Certifies `prices[node position][t]` as optimal balance-row duals of the
/// cleared allocation. Several price vectors can support one dispatch when
/// the market is dual degenerate; this tells whether a given one does.
pub fn certify_prices(result: &ClearingResult, prices: &[Vec<f64>], tol: f64) -> CertificateReport {
    let fixed: Vec<_> = result
        .market
        .index
        .balance
        .iter()
        .zip(prices)
        .flat_map(|(rows, p)| rows.iter().copied().zip(p.iter().copied()))
        .collect();
    certify_with_fixed_duals(&result.market.lp, &result.solution.primal, &fixed, tol).0
}
