//! Market-clearing LPs and their solution as priced allocations.
//!
//! Every builder emits the same column and row naming scheme (periods are
//! 1-based, ids are the scenario ids):
//!
//! | item | name |
//! |---|---|
//! | supply | `p[gen,t]` |
//! | served load | `d[load,t]` |
//! | directed flow | `f[line+,t]`, `f[line-,t]` |
//! | angle | `theta[node,t]` |
//! | charge / discharge | `pc[esr,t]`, `pd[esr,t]` |
//! | link flow | `delta[esr,tc,td]` |
//! | net charge / discharge | `pnc[esr,t]`, `pnd[esr,t]` |
//! | nodal balance | `bal[node,t]` |
//! | DC flow | `flow[line,t]` |
//!
//! Balance rows read `(inflow + supply + discharge) - (outflow + load + charge) = 0`
//! so that each row dual is the nodal price.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

use crate::lp::{
    write_mps, ConId, LinearProgram, LpError, PrimalDualSolution, Relation, Status, Tolerances,
    VarId,
};
use crate::model::{DirectedEdge, Esr, ModelError, Scenario};
use crate::virtual_links::{enumerate_links, LinkError, LinkSet, VirtualFlowPlan};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum FormulationKind {
    /// No storage.
    Base,
    /// Exact cumulative SOC bounds, charge/discharge complementarity relaxed.
    EsrRelaxed,
    /// Exact lower SOC bound, conservative net-charge upper bound.
    EsrRobust,
    /// Storage as virtual links plus net charge/discharge.
    VirtualLink,
}

impl FormulationKind {
    pub const ALL: [FormulationKind; 4] = [
        FormulationKind::Base,
        FormulationKind::EsrRelaxed,
        FormulationKind::EsrRobust,
        FormulationKind::VirtualLink,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FormulationKind::Base => "base",
            FormulationKind::EsrRelaxed => "esr",
            FormulationKind::EsrRobust => "robust",
            FormulationKind::VirtualLink => "vl",
        }
    }
}

impl fmt::Display for FormulationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FormulationKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "base" => Ok(FormulationKind::Base),
            "esr" | "relaxed" => Ok(FormulationKind::EsrRelaxed),
            "robust" => Ok(FormulationKind::EsrRobust),
            "vl" | "virtual-link" | "virtual_link" => Ok(FormulationKind::VirtualLink),
            other => Err(format!(
                "unknown formulation `{other}` (expected base, esr, robust or vl)"
            )),
        }
    }
}

/// Form of the SOC rows in the virtual-link market.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum VlSocRows {
    /// The robust-market SOC rows rewritten through the link mapping, so both
    /// markets have the same feasible charge/discharge series.
    #[default]
    Composed,
    /// Net-operation terms as in the original statement of the link market:
    /// the lower rows carry only `-(1/eta_d) sum pnd`, the upper rows only
    /// `+eta_c sum pnc`.
    Printed,
}

#[derive(Debug, Error)]
pub enum FormulationError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Link(#[from] LinkError),
    #[error("link set covers {links} ESRs and {periods} periods, scenario has {esrs} ESRs and {scenario_periods} periods")]
    LinkMismatch {
        links: usize,
        periods: usize,
        esrs: usize,
        scenario_periods: usize,
    },
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error("{kind} market LP is {status}")]
    NotOptimal {
        kind: FormulationKind,
        status: Status,
        /// The LP in free MPS, for inspection with an external solver.
        lp_export: String,
    },
}

/// Which market to build, and the link options for the virtual-link market.
#[derive(Debug, Clone)]
pub struct Formulation {
    pub kind: FormulationKind,
    /// Custom links; when `None` the virtual-link market enumerates all
    /// links with cost-equivalent bids.
    pub links: Option<LinkSet>,
    pub vl_rows: VlSocRows,
}

impl Formulation {
    pub fn new(kind: FormulationKind) -> Self {
        Self {
            kind,
            links: None,
            vl_rows: VlSocRows::default(),
        }
    }

    pub fn with_links(mut self, links: LinkSet) -> Self {
        self.links = Some(links);
        self
    }

    pub fn with_vl_rows(mut self, rows: VlSocRows) -> Self {
        self.vl_rows = rows;
        self
    }
}

impl From<FormulationKind> for Formulation {
    fn from(kind: FormulationKind) -> Self {
        Formulation::new(kind)
    }
}

/// Column and row handles of a market LP. Outer index is the participant,
/// inner index the zero-based period.
#[derive(Debug, Clone, Default)]
pub struct MarketIndex {
    pub supply: Vec<Vec<VarId>>,
    pub demand: Vec<Vec<VarId>>,
    /// Per directed edge, see [`Scenario::directed_edges`].
    pub flow: Vec<Vec<VarId>>,
    /// Empty when the scenario has no lines.
    pub theta: Vec<Vec<VarId>>,
    pub charge: Vec<Vec<VarId>>,
    pub discharge: Vec<Vec<VarId>>,
    pub delta: Vec<VarId>,
    pub net_charge: Vec<Vec<VarId>>,
    pub net_discharge: Vec<Vec<VarId>>,
    /// Per node position.
    pub balance: Vec<Vec<ConId>>,
}

#[derive(Debug, Clone)]
pub struct MarketLp {
    pub kind: FormulationKind,
    pub lp: LinearProgram,
    pub index: MarketIndex,
    pub edges: Vec<DirectedEdge>,
    pub links: Option<LinkSet>,
    pub vl_rows: VlSocRows,
}

impl MarketLp {
    /// Balance-row handles flattened node-major, matching `prices`.
    pub fn balance_rows(&self) -> impl Iterator<Item = ConId> + '_ {
        self.index.balance.iter().flatten().copied()
    }

    pub fn export_mps(&self) -> String {
        let mut buf = Vec::new();
        write_mps(&self.lp, &format!("market_{}", self.kind), &mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("names are UTF-8")
    }
}

pub fn build_base(s: &Scenario) -> Result<MarketLp, FormulationError> {
    build(s, &Formulation::new(FormulationKind::Base))
}

pub fn build_esr(s: &Scenario) -> Result<MarketLp, FormulationError> {
    build(s, &Formulation::new(FormulationKind::EsrRelaxed))
}

pub fn build_robust(s: &Scenario) -> Result<MarketLp, FormulationError> {
    build(s, &Formulation::new(FormulationKind::EsrRobust))
}

pub fn build_vl(s: &Scenario, links: LinkSet) -> Result<MarketLp, FormulationError> {
    build(
        s,
        &Formulation::new(FormulationKind::VirtualLink).with_links(links),
    )
}

/// Upper cumulative-SOC row used for charge/discharge columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum SocUpper {
    /// `eta_c sum pc - (1/eta_d) sum pd <= delta_soc_max`
    Exact,
    /// `(eta_c/eta_d) sum (pc - pd) <= delta_soc_max`
    Robust,
}

/// Adds the SOC and power-cap rows of one ESR over charge/discharge columns.
pub(crate) fn add_esr_rows(
    lp: &mut LinearProgram,
    esr: &Esr,
    pc: &[VarId],
    pd: &[VarId],
    upper: SocUpper,
) -> Result<(), LpError> {
    let periods = pc.len();
    let (ec, ed) = (esr.eta_charge, esr.eta_discharge);
    let id = &esr.id;
    for t in 1..=periods {
        let mut lb = Vec::with_capacity(2 * t);
        let mut ub = Vec::with_capacity(2 * t);
        for s in 0..t {
            lb.push((pc[s], ec));
            lb.push((pd[s], -1.0 / ed));
            match upper {
                SocUpper::Exact => {
                    ub.push((pc[s], ec));
                    ub.push((pd[s], -1.0 / ed));
                }
                SocUpper::Robust => {
                    ub.push((pc[s], ec / ed));
                    ub.push((pd[s], -ec / ed));
                }
            }
        }
        lp.add_constraint(
            format!("soc_lb[{id},{t}]"),
            lb,
            Relation::Ge,
            esr.delta_soc_min(t, periods),
        )?;
        lp.add_constraint(
            format!("soc_ub[{id},{t}]"),
            ub,
            Relation::Le,
            esr.delta_soc_max(),
        )?;
        lp.add_constraint(
            format!("pcap[{id},{t}]"),
            [(pc[t - 1], 1.0), (pd[t - 1], 1.0)],
            Relation::Le,
            esr.power_cap,
        )?;
    }
    Ok(())
}

/// Adds the SOC and power-cap rows of ESR `b` in link form.
/// `delta` is indexed like `links.links()`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn add_vl_rows(
    lp: &mut LinearProgram,
    esr: &Esr,
    b: usize,
    links: &LinkSet,
    delta: &[Option<VarId>],
    pnc: &[VarId],
    pnd: &[VarId],
    rows: VlSocRows,
) -> Result<(), LpError> {
    let periods = pnc.len();
    let (ec, ed, eta) = (esr.eta_charge, esr.eta_discharge, esr.round_trip());
    let id = &esr.id;
    let var = |v: usize| delta[v].expect("link column exists for this ESR");
    for t in 1..=periods {
        let mut lb = Vec::new();
        let mut ub = Vec::new();
        for s in 1..=t {
            for &v in links.outgoing(b, s) {
                lb.push((var(v), ec));
                ub.push((var(v), ec / ed));
            }
            for &v in links.incoming(b, s) {
                lb.push((var(v), -ec));
                ub.push((var(v), -ec / ed * eta));
            }
            let (nc, nd) = (pnc[s - 1], pnd[s - 1]);
            match rows {
                VlSocRows::Composed => {
                    lb.push((nc, ec));
                    lb.push((nd, -1.0 / ed));
                    ub.push((nc, ec / ed));
                    ub.push((nd, -ec / ed));
                }
                VlSocRows::Printed => {
                    lb.push((nd, -1.0 / ed));
                    ub.push((nc, ec));
                }
            }
        }
        lp.add_constraint(
            format!("soc_lb[{id},{t}]"),
            lb,
            Relation::Ge,
            esr.delta_soc_min(t, periods),
        )?;
        lp.add_constraint(
            format!("soc_ub[{id},{t}]"),
            ub,
            Relation::Le,
            esr.delta_soc_max(),
        )?;

        let mut cap = vec![(pnc[t - 1], 1.0), (pnd[t - 1], 1.0)];
        cap.extend(links.outgoing(b, t).iter().map(|&v| (var(v), 1.0)));
        cap.extend(links.incoming(b, t).iter().map(|&v| (var(v), eta)));
        lp.add_constraint(format!("pcap[{id},{t}]"), cap, Relation::Le, esr.power_cap)?;
    }
    Ok(())
}

/// Builds the market LP selected by `form`.
pub fn build(s: &Scenario, form: &Formulation) -> Result<MarketLp, FormulationError> {
    s.ensure_valid()?;
    let periods = s.periods();
    let edges = s.directed_edges();
    let inc = s.incidence();
    let kind = form.kind;
    let mut lp = LinearProgram::new();
    let mut ix = MarketIndex::default();

    let links = match kind {
        FormulationKind::VirtualLink => {
            let links = form.links.clone().unwrap_or_else(|| enumerate_links(s));
            if links.num_esrs() != s.esrs.len() || links.periods() != periods {
                return Err(FormulationError::LinkMismatch {
                    links: links.num_esrs(),
                    periods: links.periods(),
                    esrs: s.esrs.len(),
                    scenario_periods: periods,
                });
            }
            Some(links)
        }
        _ => None,
    };

    for g in &s.suppliers {
        let cols = (0..periods)
            .map(|t| {
                lp.add_var(
                    format!("p[{},{}]", g.id, t + 1),
                    0.0,
                    g.capacity[t],
                    g.bid[t],
                )
            })
            .collect::<Result<Vec<_>, _>>()?;
        ix.supply.push(cols);
    }
    for c in &s.consumers {
        let cols = (0..periods)
            .map(|t| {
                lp.add_var(
                    format!("d[{},{}]", c.id, t + 1),
                    0.0,
                    c.max_demand[t],
                    -c.bid[t],
                )
            })
            .collect::<Result<Vec<_>, _>>()?;
        ix.demand.push(cols);
    }
    for e in &edges {
        let line = &s.lines[e.line];
        let (sign, bids) = if e.forward {
            ('+', &line.bid_forward)
        } else {
            ('-', &line.bid_backward)
        };
        let cols = (0..periods)
            .map(|t| {
                lp.add_var(
                    format!("f[{}{sign},{}]", line.id, t + 1),
                    0.0,
                    line.flow_cap[t],
                    bids[t],
                )
            })
            .collect::<Result<Vec<_>, _>>()?;
        ix.flow.push(cols);
    }
    if !s.lines.is_empty() {
        // One angle per island is fixed at zero; angles only matter through
        // their differences, and a free common shift stalls the simplex.
        let reference = s.reference_nodes();
        for (n, &fixed) in s.nodes.iter().zip(&reference) {
            let (lo, hi) = if fixed {
                (0.0, 0.0)
            } else {
                (f64::NEG_INFINITY, f64::INFINITY)
            };
            let cols = (0..periods)
                .map(|t| lp.add_var(format!("theta[{},{}]", n.id, t + 1), lo, hi, 0.0))
                .collect::<Result<Vec<_>, _>>()?;
            ix.theta.push(cols);
        }
    }

    let mut link_cols: Vec<Option<VarId>> = Vec::new();
    match kind {
        FormulationKind::Base => {}
        FormulationKind::EsrRelaxed | FormulationKind::EsrRobust => {
            for e in &s.esrs {
                let mut pc = Vec::with_capacity(periods);
                let mut pd = Vec::with_capacity(periods);
                for t in 0..periods {
                    pc.push(lp.add_var(
                        format!("pc[{},{}]", e.id, t + 1),
                        0.0,
                        e.power_cap,
                        e.charge_bid[t],
                    )?);
                    pd.push(lp.add_var(
                        format!("pd[{},{}]", e.id, t + 1),
                        0.0,
                        e.power_cap,
                        e.discharge_bid[t],
                    )?);
                }
                ix.charge.push(pc);
                ix.discharge.push(pd);
            }
        }
        FormulationKind::VirtualLink => {
            let links = links.as_ref().expect("set above");
            for l in links.links() {
                let e = &s.esrs[l.esr];
                let v = lp.add_var(
                    format!("delta[{},{},{}]", e.id, l.t_charge, l.t_discharge),
                    0.0,
                    e.power_cap,
                    l.bid,
                )?;
                ix.delta.push(v);
                link_cols.push(Some(v));
            }
            for e in &s.esrs {
                let mut nc = Vec::with_capacity(periods);
                let mut nd = Vec::with_capacity(periods);
                for t in 0..periods {
                    nc.push(lp.add_var(
                        format!("pnc[{},{}]", e.id, t + 1),
                        0.0,
                        e.power_cap,
                        e.charge_bid[t],
                    )?);
                    nd.push(lp.add_var(
                        format!("pnd[{},{}]", e.id, t + 1),
                        0.0,
                        e.power_cap,
                        e.discharge_bid[t],
                    )?);
                }
                ix.net_charge.push(nc);
                ix.net_discharge.push(nd);
            }
        }
    }

    // Nodal balance.
    for (pos, node) in s.nodes.iter().enumerate() {
        let mut rows = Vec::with_capacity(periods);
        for t in 0..periods {
            let mut coeffs: Vec<(VarId, f64)> = Vec::new();
            let n = &inc[pos];
            coeffs.extend(n.edges_in.iter().map(|&k| (ix.flow[k][t], 1.0)));
            coeffs.extend(n.edges_out.iter().map(|&k| (ix.flow[k][t], -1.0)));
            coeffs.extend(n.suppliers.iter().map(|&i| (ix.supply[i][t], 1.0)));
            coeffs.extend(n.consumers.iter().map(|&j| (ix.demand[j][t], -1.0)));
            match kind {
                FormulationKind::Base => {}
                FormulationKind::EsrRelaxed | FormulationKind::EsrRobust => {
                    for &b in &n.esrs {
                        coeffs.push((ix.discharge[b][t], 1.0));
                        coeffs.push((ix.charge[b][t], -1.0));
                    }
                }
                FormulationKind::VirtualLink => {
                    let links = links.as_ref().expect("set above");
                    for &b in &n.esrs {
                        let eta = s.esrs[b].round_trip();
                        coeffs.extend(links.incoming(b, t + 1).iter().map(|&v| (ix.delta[v], eta)));
                        coeffs.extend(
                            links
                                .outgoing(b, t + 1)
                                .iter()
                                .map(|&v| (ix.delta[v], -1.0)),
                        );
                        coeffs.push((ix.net_discharge[b][t], 1.0));
                        coeffs.push((ix.net_charge[b][t], -1.0));
                    }
                }
            }
            rows.push(lp.add_constraint(
                format!("bal[{},{}]", node.id, t + 1),
                coeffs,
                Relation::Eq,
                0.0,
            )?);
        }
        ix.balance.push(rows);
    }

    // DC flow and angle caps that are tighter than the flow caps.
    for (l, line) in s.lines.iter().enumerate() {
        let sp = s.node_position(line.snd).expect("validated");
        let rp = s.node_position(line.rec).expect("validated");
        for t in 0..periods {
            let (fp, fm) = (ix.flow[2 * l][t], ix.flow[2 * l + 1][t]);
            let (ts, tr) = (ix.theta[sp][t], ix.theta[rp][t]);
            let b = line.susceptance;
            lp.add_constraint(
                format!("flow[{},{}]", line.id, t + 1),
                [(fp, 1.0), (fm, -1.0), (ts, -b), (tr, b)],
                Relation::Eq,
                0.0,
            )?;
            let cap = line.angle_cap[t];
            if cap < line.flow_cap[t] / b {
                lp.add_constraint(
                    format!("ang_hi[{},{}]", line.id, t + 1),
                    [(ts, 1.0), (tr, -1.0)],
                    Relation::Le,
                    cap,
                )?;
                lp.add_constraint(
                    format!("ang_lo[{},{}]", line.id, t + 1),
                    [(ts, 1.0), (tr, -1.0)],
                    Relation::Ge,
                    -cap,
                )?;
            }
        }
    }

    // Ramping.
    for (i, g) in s.suppliers.iter().enumerate() {
        if let Some(r) = g.ramp_limit {
            for t in 1..periods {
                let (a, b) = (ix.supply[i][t - 1], ix.supply[i][t]);
                lp.add_constraint(
                    format!("ramp_up[{},{}]", g.id, t + 1),
                    [(b, 1.0), (a, -1.0)],
                    Relation::Le,
                    r,
                )?;
                lp.add_constraint(
                    format!("ramp_dn[{},{}]", g.id, t + 1),
                    [(a, 1.0), (b, -1.0)],
                    Relation::Le,
                    r,
                )?;
            }
        }
    }

    // Storage.
    match kind {
        FormulationKind::Base => {}
        FormulationKind::EsrRelaxed | FormulationKind::EsrRobust => {
            let upper = if kind == FormulationKind::EsrRelaxed {
                SocUpper::Exact
            } else {
                SocUpper::Robust
            };
            for (b, e) in s.esrs.iter().enumerate() {
                add_esr_rows(&mut lp, e, &ix.charge[b], &ix.discharge[b], upper)?;
            }
        }
        FormulationKind::VirtualLink => {
            let links = links.as_ref().expect("set above");
            for (b, e) in s.esrs.iter().enumerate() {
                add_vl_rows(
                    &mut lp,
                    e,
                    b,
                    links,
                    &link_cols,
                    &ix.net_charge[b],
                    &ix.net_discharge[b],
                    form.vl_rows,
                )?;
            }
        }
    }

    Ok(MarketLp {
        kind,
        lp,
        index: ix,
        edges,
        links,
        vl_rows: form.vl_rows,
    })
}

/// Solved market: allocations, prices and the underlying LP solution.
/// Series are indexed `[participant][period - 1]`.
#[derive(Debug, Clone)]
pub struct ClearingResult {
    pub kind: FormulationKind,
    /// Social surplus, the negated LP objective.
    pub welfare: f64,
    /// `prices[node position][t]`.
    pub prices: Vec<Vec<f64>>,
    pub supply: Vec<Vec<f64>>,
    pub demand: Vec<Vec<f64>>,
    /// Per directed edge.
    pub flows: Vec<Vec<f64>>,
    /// Zero-length when the scenario has no lines.
    pub angles: Vec<Vec<f64>>,
    /// Charge/discharge per ESR. All zero for the base market.
    pub charge: Vec<Vec<f64>>,
    pub discharge: Vec<Vec<f64>>,
    /// State of charge after each period.
    pub soc: Vec<Vec<f64>>,
    /// Link flows and net operations for the virtual-link market.
    pub plan: Option<VirtualFlowPlan>,
    pub market: MarketLp,
    pub solution: PrimalDualSolution,
}

/// Builds, solves and extracts the market with default tolerances.
pub fn clear(s: &Scenario, kind: FormulationKind) -> Result<ClearingResult, FormulationError> {
    clear_with(s, &Formulation::new(kind), &Tolerances::default())
}

pub fn clear_with(
    s: &Scenario,
    form: &Formulation,
    tol: &Tolerances,
) -> Result<ClearingResult, FormulationError> {
    let market = build(s, form)?;
    let solution = market.lp.solve_with(tol)?;
    if solution.status != Status::Optimal {
        return Err(FormulationError::NotOptimal {
            kind: market.kind,
            status: solution.status,
            lp_export: market.export_mps(),
        });
    }
    Ok(extract(s, market, solution))
}

fn extract(s: &Scenario, market: MarketLp, solution: PrimalDualSolution) -> ClearingResult {
    let ix = &market.index;
    let vals = |cols: &Vec<Vec<VarId>>| -> Vec<Vec<f64>> {
        cols.iter()
            .map(|r| r.iter().map(|&v| solution.value(v)).collect())
            .collect()
    };
    let periods = s.periods();
    let prices = ix
        .balance
        .iter()
        .map(|r| r.iter().map(|&c| solution.dual(c)).collect())
        .collect();

    let (charge, discharge, plan) = match market.kind {
        FormulationKind::Base => (
            vec![vec![0.0; periods]; s.esrs.len()],
            vec![vec![0.0; periods]; s.esrs.len()],
            None,
        ),
        FormulationKind::EsrRelaxed | FormulationKind::EsrRobust => {
            (vals(&ix.charge), vals(&ix.discharge), None)
        }
        FormulationKind::VirtualLink => {
            let links = market
                .links
                .as_ref()
                .expect("virtual-link market carries links");
            let plan = VirtualFlowPlan {
                delta: ix.delta.iter().map(|&v| solution.value(v)).collect(),
                net_charge: vals(&ix.net_charge),
                net_discharge: vals(&ix.net_discharge),
            };
            let (pc, pd) = crate::virtual_links::compose(&plan, links, &s.esrs);
            (pc, pd, Some(plan))
        }
    };
    let soc = s
        .esrs
        .iter()
        .zip(charge.iter().zip(&discharge))
        .map(|(e, (c, d))| e.soc_series(c, d))
        .collect();

    ClearingResult {
        kind: market.kind,
        welfare: -solution.objective,
        prices,
        supply: vals(&ix.supply),
        demand: vals(&ix.demand),
        flows: vals(&ix.flow),
        angles: vals(&ix.theta),
        charge,
        discharge,
        soc,
        plan,
        solution,
        market,
    }
}
