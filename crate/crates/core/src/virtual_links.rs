//! Virtual links: storage operations expressed as energy moved between two
//! periods of the same ESR, plus net charging and net discharging.
//!
//! A link `(b, t_c, t_d)` charges `delta` at `t_c` and discharges
//! `eta_b * delta` at `t_d`. Periods are 1-based.

use serde::Serialize;
use thiserror::Error;

use crate::model::{Esr, Scenario};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VirtualLink {
    /// Index into `Scenario::esrs`.
    pub esr: usize,
    pub t_charge: usize,
    pub t_discharge: usize,
    /// Bid per MWh charged into the link.
    pub bid: f64,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinkError {
    #[error("link {index} references unknown ESR {esr}")]
    UnknownEsr { index: usize, esr: usize },
    #[error("link {index} charges and discharges in the same period {t}")]
    SamePeriod { index: usize, t: usize },
    #[error("link {index} uses period {t} outside 1..={periods}")]
    PeriodOutOfRange {
        index: usize,
        t: usize,
        periods: usize,
    },
    #[error("link {index} has a non-finite bid")]
    NonFiniteBid { index: usize },
}

/// Links with per-(ESR, period) incidence lists.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkSet {
    links: Vec<VirtualLink>,
    periods: usize,
    /// `outgoing[b][t-1]`: links charging at `t`.
    outgoing: Vec<Vec<Vec<usize>>>,
    /// `incoming[b][t-1]`: links discharging at `t`.
    incoming: Vec<Vec<Vec<usize>>>,
}

impl LinkSet {
    pub fn new(
        links: Vec<VirtualLink>,
        num_esrs: usize,
        periods: usize,
    ) -> Result<Self, LinkError> {
        let mut outgoing = vec![vec![Vec::new(); periods]; num_esrs];
        let mut incoming = vec![vec![Vec::new(); periods]; num_esrs];
        for (index, l) in links.iter().enumerate() {
            if l.esr >= num_esrs {
                return Err(LinkError::UnknownEsr { index, esr: l.esr });
            }
            for t in [l.t_charge, l.t_discharge] {
                if t == 0 || t > periods {
                    return Err(LinkError::PeriodOutOfRange { index, t, periods });
                }
            }
            if l.t_charge == l.t_discharge {
                return Err(LinkError::SamePeriod {
                    index,
                    t: l.t_charge,
                });
            }
            if !l.bid.is_finite() {
                return Err(LinkError::NonFiniteBid { index });
            }
            outgoing[l.esr][l.t_charge - 1].push(index);
            incoming[l.esr][l.t_discharge - 1].push(index);
        }
        Ok(Self {
            links,
            periods,
            outgoing,
            incoming,
        })
    }

    pub fn links(&self) -> &[VirtualLink] {
        &self.links
    }

    pub fn len(&self) -> usize {
        self.links.len()
    }

    pub fn is_empty(&self) -> bool {
        self.links.is_empty()
    }

    pub fn periods(&self) -> usize {
        self.periods
    }

    pub fn num_esrs(&self) -> usize {
        self.outgoing.len()
    }

    /// Links of ESR `b` charging at period `t`.
    pub fn outgoing(&self, b: usize, t: usize) -> &[usize] {
        &self.outgoing[b][t - 1]
    }

    /// Links of ESR `b` discharging at period `t`.
    pub fn incoming(&self, b: usize, t: usize) -> &[usize] {
        &self.incoming[b][t - 1]
    }

    /// Index of the link `(b, t_c, t_d)`, if present.
    pub fn find(&self, b: usize, t_charge: usize, t_discharge: usize) -> Option<usize> {
        self.outgoing(b, t_charge)
            .iter()
            .copied()
            .find(|&v| self.links[v].t_discharge == t_discharge)
    }
}

/// `alpha_sc[t_c] + eta_b * alpha_sd[t_d]`, the bid that makes the link
/// formulation cost-equivalent to charge/discharge bidding.
pub fn link_bid(esr: &Esr, t_charge: usize, t_discharge: usize) -> f64 {
    esr.charge_bid[t_charge - 1] + esr.round_trip() * esr.discharge_bid[t_discharge - 1]
}

/// One link per ordered period pair `t_c != t_d` and ESR, priced with
/// [`link_bid`]. Ordered by ESR, then charge period, then discharge period.
pub fn enumerate_links(scenario: &Scenario) -> LinkSet {
    let t = scenario.periods();
    let mut links = Vec::with_capacity(scenario.esrs.len() * t * t.saturating_sub(1));
    for (b, esr) in scenario.esrs.iter().enumerate() {
        for tc in 1..=t {
            for td in 1..=t {
                if tc != td {
                    links.push(VirtualLink {
                        esr: b,
                        t_charge: tc,
                        t_discharge: td,
                        bid: link_bid(esr, tc, td),
                    });
                }
            }
        }
    }
    LinkSet::new(links, scenario.esrs.len(), t).expect("enumerated links are valid")
}

/// Cleared link flows and net operations.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VirtualFlowPlan {
    /// Energy charged into each link, aligned with [`LinkSet::links`].
    pub delta: Vec<f64>,
    /// `net_charge[b][t-1]`.
    pub net_charge: Vec<Vec<f64>>,
    /// `net_discharge[b][t-1]`.
    pub net_discharge: Vec<Vec<f64>>,
}

impl VirtualFlowPlan {
    pub fn zero(links: &LinkSet) -> Self {
        let b = links.num_esrs();
        let t = links.periods();
        Self {
            delta: vec![0.0; links.len()],
            net_charge: vec![vec![0.0; t]; b],
            net_discharge: vec![vec![0.0; t]; b],
        }
    }
}

/// Charge and discharge series `(p_c[b][t-1], p_d[b][t-1])` implied by a plan.
pub fn compose(
    plan: &VirtualFlowPlan,
    links: &LinkSet,
    esrs: &[Esr],
) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let mut pc = plan.net_charge.clone();
    let mut pd = plan.net_discharge.clone();
    for (v, l) in links.links().iter().enumerate() {
        let dv = plan.delta[v];
        pc[l.esr][l.t_charge - 1] += dv;
        pd[l.esr][l.t_discharge - 1] += esrs[l.esr].round_trip() * dv;
    }
    (pc, pd)
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DecomposeError {
    #[error("series lengths differ: {charge} charge vs {discharge} discharge periods")]
    LengthMismatch { charge: usize, discharge: usize },
    #[error("negative or non-finite operation at period {t}")]
    Negative { t: usize },
    #[error("power cap exceeded at period {t}: {total} > {cap}")]
    PowerCap { t: usize, total: f64, cap: f64 },
    #[error("simultaneous residual charge and discharge at period {t}")]
    Simultaneous { t: usize },
    #[error("link ({t_charge}, {t_discharge}) of ESR {esr} is not in the link set")]
    MissingLink {
        esr: usize,
        t_charge: usize,
        t_discharge: usize,
    },
}

/// Link-form representation of one ESR's operation.
#[derive(Debug, Clone, PartialEq)]
pub struct EsrDecomposition {
    /// `(t_c, t_d, delta)` with 1-based periods.
    pub transfers: Vec<(usize, usize, f64)>,
    pub net_charge: Vec<f64>,
    pub net_discharge: Vec<f64>,
}

impl EsrDecomposition {
    /// Charge and discharge series reproduced from this decomposition.
    pub fn compose(&self, esr: &Esr) -> (Vec<f64>, Vec<f64>) {
        let mut pc = self.net_charge.clone();
        let mut pd = self.net_discharge.clone();
        for &(tc, td, d) in &self.transfers {
            pc[tc - 1] += d;
            pd[td - 1] += esr.round_trip() * d;
        }
        (pc, pd)
    }

    /// Total bid cost with links priced by [`link_bid`].
    pub fn bid_cost(&self, esr: &Esr) -> f64 {
        let net: f64 = self
            .net_charge
            .iter()
            .zip(&self.net_discharge)
            .enumerate()
            .map(|(t, (c, d))| esr.charge_bid[t] * c + esr.discharge_bid[t] * d)
            .sum();
        let links: f64 = self
            .transfers
            .iter()
            .map(|&(tc, td, d)| link_bid(esr, tc, td) * d)
            .sum();
        net + links
    }
}

/// Bid cost `sum_t alpha_sc p_c + alpha_sd p_d` of a charge/discharge series.
pub fn esr_bid_cost(esr: &Esr, charge: &[f64], discharge: &[f64]) -> f64 {
    charge
        .iter()
        .zip(discharge)
        .enumerate()
        .map(|(t, (c, d))| esr.charge_bid[t] * c + esr.discharge_bid[t] * d)
        .sum()
}

/// Splits a charge/discharge series into net operations and period-to-period
/// transfers.
///
/// The net change of state of charge decides whether net charging or net
/// discharging is needed; that amount is placed at the earliest periods that
/// can hold it. The remaining charge (sources) and discharge (sinks) are
/// paired greedily in chronological order.
pub fn decompose(
    charge: &[f64],
    discharge: &[f64],
    esr: &Esr,
) -> Result<EsrDecomposition, DecomposeError> {
    if charge.len() != discharge.len() {
        return Err(DecomposeError::LengthMismatch {
            charge: charge.len(),
            discharge: discharge.len(),
        });
    }
    let scale = 1.0
        + charge
            .iter()
            .chain(discharge)
            .fold(0.0f64, |a, b| a.max(b.abs()));
    let eps = 1e-12 * scale;
    for (t, (&c, &d)) in charge.iter().zip(discharge).enumerate() {
        if !(c.is_finite() && d.is_finite()) || c < -eps || d < -eps {
            return Err(DecomposeError::Negative { t: t + 1 });
        }
        if c + d > esr.power_cap + 1e-9 * (1.0 + esr.power_cap) {
            return Err(DecomposeError::PowerCap {
                t: t + 1,
                total: c + d,
                cap: esr.power_cap,
            });
        }
    }
    let pc: Vec<f64> = charge.iter().map(|c| c.max(0.0)).collect();
    let pd: Vec<f64> = discharge.iter().map(|d| d.max(0.0)).collect();
    let n = pc.len();
    let (ec, ed, eta) = (esr.eta_charge, esr.eta_discharge, esr.round_trip());

    let dsoc = ec * pc.iter().sum::<f64>() - pd.iter().sum::<f64>() / ed;
    let mut net_charge = vec![0.0; n];
    let mut net_discharge = vec![0.0; n];
    if dsoc > eps {
        place_earliest(&mut net_charge, &pc, dsoc / ec);
    } else if dsoc < -eps {
        place_earliest(&mut net_discharge, &pd, -dsoc * ed);
    }

    let mut src: Vec<f64> = pc.iter().zip(&net_charge).map(|(c, x)| c - x).collect();
    let mut snk: Vec<f64> = pd.iter().zip(&net_discharge).map(|(d, x)| d - x).collect();
    for t in 0..n {
        if src[t] > eps && snk[t] > eps {
            return Err(DecomposeError::Simultaneous { t: t + 1 });
        }
    }

    let mut transfers = Vec::new();
    for tc in 0..n {
        if src[tc] <= eps {
            continue;
        }
        for td in 0..n {
            if td == tc || snk[td] <= eps {
                continue;
            }
            let d = src[tc].min(snk[td] / eta);
            if d <= 0.0 {
                continue;
            }
            transfers.push((tc + 1, td + 1, d));
            src[tc] -= d;
            snk[td] -= eta * d;
            if src[tc] <= eps {
                break;
            }
        }
    }
    // Rounding leftovers stay with the net operations so the round trip is exact.
    for t in 0..n {
        if src[t] > 0.0 {
            net_charge[t] += src[t];
        }
        if snk[t] > 0.0 {
            net_discharge[t] += snk[t];
        }
    }
    Ok(EsrDecomposition {
        transfers,
        net_charge,
        net_discharge,
    })
}

fn place_earliest(target: &mut [f64], cap: &[f64], mut amount: f64) {
    for (x, &c) in target.iter_mut().zip(cap) {
        if amount <= 0.0 {
            break;
        }
        let take = c.min(amount);
        *x = take;
        amount -= take;
    }
    // Any rounding remainder goes to the last period with capacity.
    if amount > 0.0 {
        if let Some(i) = cap.iter().rposition(|c| *c > 0.0) {
            target[i] += amount;
        }
    }
}

/// Builds a link-set plan from per-ESR decompositions (indexed like the ESRs).
pub fn plan_from_decompositions(
    links: &LinkSet,
    parts: &[EsrDecomposition],
) -> Result<VirtualFlowPlan, DecomposeError> {
    let mut plan = VirtualFlowPlan::zero(links);
    for (b, part) in parts.iter().enumerate() {
        plan.net_charge[b].copy_from_slice(&part.net_charge);
        plan.net_discharge[b].copy_from_slice(&part.net_discharge);
        for &(tc, td, d) in &part.transfers {
            let v = links.find(b, tc, td).ok_or(DecomposeError::MissingLink {
                esr: b,
                t_charge: tc,
                t_discharge: td,
            })?;
            plan.delta[v] += d;
        }
    }
    Ok(plan)
}

/// Minimum price spread `pi_d - pi_c` that makes a link profitable, and its
/// derivative with respect to the round-trip efficiency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActivationThreshold {
    pub spread: f64,
    pub d_eta: f64,
}

impl ActivationThreshold {
    pub fn is_profitable(&self, pi_charge: f64, pi_discharge: f64) -> bool {
        pi_discharge - pi_charge >= self.spread
    }
}

pub fn activation_threshold(eta: f64, bid: f64, pi_charge: f64) -> ActivationThreshold {
    ActivationThreshold {
        spread: (1.0 - eta) / eta * pi_charge + bid / eta,
        d_eta: -(pi_charge + bid) / (eta * eta),
    }
}
