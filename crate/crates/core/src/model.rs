//! Market participants, the transmission network and storage physics.
//!
//! Periods are numbered `1..=T` in names and public accessors; series are
//! stored as `Vec<f64>` of length `T` indexed from zero.

use std::collections::{HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Number of hourly intervals in the clearing window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Horizon {
    pub periods: usize,
}

impl Horizon {
    pub fn new(periods: usize) -> Self {
        Self { periods }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransmissionLine {
    pub id: String,
    pub snd: usize,
    pub rec: usize,
    /// MW per radian of angle difference.
    pub susceptance: f64,
    /// Flow capacity per interval, MW.
    pub flow_cap: Vec<f64>,
    /// Bid of the forward edge (snd to rec), $/MWh.
    pub bid_forward: Vec<f64>,
    /// Bid of the backward edge (rec to snd), $/MWh.
    pub bid_backward: Vec<f64>,
    /// Angle-difference cap in radians; infinite when unconstrained.
    pub angle_cap: Vec<f64>,
}

impl TransmissionLine {
    /// Line with constant capacity, zero bids and no separate angle cap.
    pub fn constant(
        id: impl Into<String>,
        snd: usize,
        rec: usize,
        susceptance: f64,
        cap: f64,
        periods: usize,
    ) -> Self {
        Self {
            id: id.into(),
            snd,
            rec,
            susceptance,
            flow_cap: vec![cap; periods],
            bid_forward: vec![0.0; periods],
            bid_backward: vec![0.0; periods],
            angle_cap: vec![f64::INFINITY; periods],
        }
    }

    /// `min(f_cap / B, angle_cap)` for period index `t` (zero-based).
    pub fn effective_angle_cap(&self, t: usize) -> f64 {
        (self.flow_cap[t] / self.susceptance).min(self.angle_cap[t])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Supplier {
    pub id: String,
    pub node: usize,
    pub capacity: Vec<f64>,
    pub bid: Vec<f64>,
    /// Maximum change of output between consecutive intervals, MW.
    #[serde(default)]
    pub ramp_limit: Option<f64>,
}

impl Supplier {
    pub fn constant(
        id: impl Into<String>,
        node: usize,
        capacity: f64,
        bid: f64,
        periods: usize,
    ) -> Self {
        Self {
            id: id.into(),
            node,
            capacity: vec![capacity; periods],
            bid: vec![bid; periods],
            ramp_limit: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Consumer {
    pub id: String,
    pub node: usize,
    pub max_demand: Vec<f64>,
    pub bid: Vec<f64>,
}

impl Consumer {
    pub fn constant(
        id: impl Into<String>,
        node: usize,
        max_demand: f64,
        bid: f64,
        periods: usize,
    ) -> Self {
        Self {
            id: id.into(),
            node,
            max_demand: vec![max_demand; periods],
            bid: vec![bid; periods],
        }
    }
}

/// Energy storage resource.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Esr {
    pub id: String,
    pub node: usize,
    pub eta_charge: f64,
    pub eta_discharge: f64,
    pub soc_min: f64,
    pub soc_max: f64,
    pub soc_init: f64,
    pub power_cap: f64,
    pub charge_bid: Vec<f64>,
    pub discharge_bid: Vec<f64>,
}

impl Esr {
    /// Round-trip efficiency `eta_c * eta_d`.
    pub fn round_trip(&self) -> f64 {
        self.eta_charge * self.eta_discharge
    }

    /// Headroom above the initial state of charge.
    pub fn delta_soc_max(&self) -> f64 {
        self.soc_max - self.soc_init
    }

    /// Lower cumulative-SOC bound for period `t` in `1..=periods`. The final
    /// period returns zero, which encodes the terminal condition `s_T >= s_0`.
    pub fn delta_soc_min(&self, t: usize, periods: usize) -> f64 {
        if t == periods {
            0.0
        } else {
            self.soc_min - self.soc_init
        }
    }

    /// State of charge after each period for the given charge/discharge series.
    pub fn soc_series(&self, charge: &[f64], discharge: &[f64]) -> Vec<f64> {
        let mut s = self.soc_init;
        charge
            .iter()
            .zip(discharge)
            .map(|(c, d)| {
                s += self.eta_charge * c - d / self.eta_discharge;
                s
            })
            .collect()
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("period {t} outside 1..={periods}")]
    PeriodOutOfRange { t: usize, periods: usize },
    #[error("invalid scenario: {}", summarize(.0))]
    Invalid(Vec<Violation>),
}

fn summarize(v: &[Violation]) -> String {
    let shown: Vec<String> = v.iter().take(3).map(|x| x.to_string()).collect();
    if v.len() > 3 {
        format!("{} (and {} more)", shown.join("; "), v.len() - 3)
    } else {
        shown.join("; ")
    }
}

/// `(delta_soc_min(t), delta_soc_max)` for `t` in `1..=periods`.
pub fn soc_bounds(esr: &Esr, t: usize, periods: usize) -> Result<(f64, f64), ModelError> {
    if t == 0 || t > periods {
        return Err(ModelError::PeriodOutOfRange { t, periods });
    }
    Ok((esr.delta_soc_min(t, periods), esr.delta_soc_max()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ViolationCode {
    EmptyHorizon,
    DuplicateId,
    DanglingNode,
    SeriesLength,
    NegativeCapacity,
    NegativeBid,
    NonFinite,
    NegativeRamp,
    SharedConsumerNode,
    NonPositiveSusceptance,
    SelfLoop,
    NegativeAngleCap,
    Efficiency,
    SocBounds,
}

impl ViolationCode {
    pub fn as_str(self) -> &'static str {
        match self {
            ViolationCode::EmptyHorizon => "empty_horizon",
            ViolationCode::DuplicateId => "duplicate_id",
            ViolationCode::DanglingNode => "dangling_node",
            ViolationCode::SeriesLength => "series_length",
            ViolationCode::NegativeCapacity => "negative_capacity",
            ViolationCode::NegativeBid => "negative_bid",
            ViolationCode::NonFinite => "non_finite",
            ViolationCode::NegativeRamp => "negative_ramp",
            ViolationCode::SharedConsumerNode => "shared_consumer_node",
            ViolationCode::NonPositiveSusceptance => "non_positive_susceptance",
            ViolationCode::SelfLoop => "self_loop",
            ViolationCode::NegativeAngleCap => "negative_angle_cap",
            ViolationCode::Efficiency => "efficiency",
            ViolationCode::SocBounds => "soc_bounds",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub code: ViolationCode,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] {}", self.code.as_str(), self.message)
    }
}

/// One direction of a transmission line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DirectedEdge {
    pub line: usize,
    pub forward: bool,
    /// Node positions (indices into `Scenario::nodes`).
    pub from: usize,
    pub to: usize,
}

/// Participant and edge sets attached to every node position.
#[derive(Debug, Clone, Default)]
pub struct NodeIncidence {
    pub suppliers: Vec<usize>,
    pub consumers: Vec<usize>,
    pub esrs: Vec<usize>,
    /// Directed edges whose receiving end is this node.
    pub edges_in: Vec<usize>,
    /// Directed edges whose sending end is this node.
    pub edges_out: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub horizon: Horizon,
    pub nodes: Vec<Node>,
    #[serde(default)]
    pub lines: Vec<TransmissionLine>,
    #[serde(default)]
    pub suppliers: Vec<Supplier>,
    #[serde(default)]
    pub consumers: Vec<Consumer>,
    #[serde(default)]
    pub esrs: Vec<Esr>,
}

impl Scenario {
    pub fn periods(&self) -> usize {
        self.horizon.periods
    }

    /// Position of node `id` in `nodes`.
    pub fn node_position(&self, id: usize) -> Option<usize> {
        self.nodes.iter().position(|n| n.id == id)
    }

    /// Edges `l+` (position `2l`) and `l-` (position `2l + 1`) for every line.
    /// Assumes the scenario validates.
    pub fn directed_edges(&self) -> Vec<DirectedEdge> {
        let pos = self.position_map();
        let mut out = Vec::with_capacity(2 * self.lines.len());
        for (l, line) in self.lines.iter().enumerate() {
            let (s, r) = (pos[&line.snd], pos[&line.rec]);
            out.push(DirectedEdge {
                line: l,
                forward: true,
                from: s,
                to: r,
            });
            out.push(DirectedEdge {
                line: l,
                forward: false,
                from: r,
                to: s,
            });
        }
        out
    }

    /// Incidence sets per node position. Assumes the scenario validates.
    pub fn incidence(&self) -> Vec<NodeIncidence> {
        let pos = self.position_map();
        let mut inc = vec![NodeIncidence::default(); self.nodes.len()];
        for (i, s) in self.suppliers.iter().enumerate() {
            inc[pos[&s.node]].suppliers.push(i);
        }
        for (j, c) in self.consumers.iter().enumerate() {
            inc[pos[&c.node]].consumers.push(j);
        }
        for (b, e) in self.esrs.iter().enumerate() {
            inc[pos[&e.node]].esrs.push(b);
        }
        for (k, e) in self.directed_edges().iter().enumerate() {
            inc[e.to].edges_in.push(k);
            inc[e.from].edges_out.push(k);
        }
        inc
    }

    /// For each node position, whether it is the first node (in `nodes`
    /// order) of its connected component. Assumes the scenario validates.
    pub fn reference_nodes(&self) -> Vec<bool> {
        let pos = self.position_map();
        let mut parent: Vec<usize> = (0..self.nodes.len()).collect();
        fn root(parent: &mut [usize], mut i: usize) -> usize {
            while parent[i] != i {
                parent[i] = parent[parent[i]];
                i = parent[i];
            }
            i
        }
        for l in &self.lines {
            let (a, b) = (
                root(&mut parent, pos[&l.snd]),
                root(&mut parent, pos[&l.rec]),
            );
            // Keep the smaller position as the root.
            parent[a.max(b)] = a.min(b);
        }
        (0..self.nodes.len())
            .map(|i| root(&mut parent, i) == i)
            .collect()
    }

    fn position_map(&self) -> HashMap<usize, usize> {
        self.nodes
            .iter()
            .enumerate()
            .map(|(p, n)| (n.id, p))
            .collect()
    }

    /// Every invariant violation; an empty list means the scenario is valid.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let mut push = |code, message: String| out.push(Violation { code, message });
        let t = self.periods();
        if t == 0 {
            push(ViolationCode::EmptyHorizon, "horizon has no periods".into());
        }

        let mut seen = HashSet::new();
        for n in &self.nodes {
            if !seen.insert(n.id) {
                push(
                    ViolationCode::DuplicateId,
                    format!("node {} listed twice", n.id),
                );
            }
        }
        let known = |id: usize| seen.contains(&id);

        let check_ids =
            |kind: &str, ids: Vec<&str>, push: &mut dyn FnMut(ViolationCode, String)| {
                let mut s = HashSet::new();
                for id in ids {
                    if !s.insert(id) {
                        push(
                            ViolationCode::DuplicateId,
                            format!("{kind} `{id}` listed twice"),
                        );
                    }
                }
            };
        check_ids(
            "line",
            self.lines.iter().map(|l| l.id.as_str()).collect(),
            &mut push,
        );
        check_ids(
            "supplier",
            self.suppliers.iter().map(|l| l.id.as_str()).collect(),
            &mut push,
        );
        check_ids(
            "consumer",
            self.consumers.iter().map(|l| l.id.as_str()).collect(),
            &mut push,
        );
        check_ids(
            "esr",
            self.esrs.iter().map(|l| l.id.as_str()).collect(),
            &mut push,
        );

        let series =
            |what: String, v: &[f64], nonneg: bool, push: &mut dyn FnMut(ViolationCode, String)| {
                if v.len() != t {
                    push(
                        ViolationCode::SeriesLength,
                        format!("{what} has {} entries, expected {t}", v.len()),
                    );
                }
                if let Some(x) = v.iter().find(|x| x.is_nan()) {
                    push(ViolationCode::NonFinite, format!("{what} contains {x}"));
                } else if nonneg {
                    if let Some(x) = v.iter().find(|x| **x < 0.0) {
                        let code = if what.contains("bid") {
                            ViolationCode::NegativeBid
                        } else {
                            ViolationCode::NegativeCapacity
                        };
                        push(code, format!("{what} contains negative value {x}"));
                    }
                }
            };

        for l in &self.lines {
            for end in [l.snd, l.rec] {
                if !known(end) {
                    push(
                        ViolationCode::DanglingNode,
                        format!("line `{}` references unknown node {end}", l.id),
                    );
                }
            }
            if l.snd == l.rec {
                push(
                    ViolationCode::SelfLoop,
                    format!("line `{}` connects node {} to itself", l.id, l.snd),
                );
            }
            if !(l.susceptance > 0.0 && l.susceptance.is_finite()) {
                push(
                    ViolationCode::NonPositiveSusceptance,
                    format!("line `{}` has susceptance {}", l.id, l.susceptance),
                );
            }
            series(
                format!("line `{}` flow_cap", l.id),
                &l.flow_cap,
                true,
                &mut push,
            );
            series(
                format!("line `{}` bid_forward", l.id),
                &l.bid_forward,
                true,
                &mut push,
            );
            series(
                format!("line `{}` bid_backward", l.id),
                &l.bid_backward,
                true,
                &mut push,
            );
            if l.angle_cap.len() != t {
                push(
                    ViolationCode::SeriesLength,
                    format!(
                        "line `{}` angle_cap has {} entries, expected {t}",
                        l.id,
                        l.angle_cap.len()
                    ),
                );
            }
            if l.angle_cap.iter().any(|x| x.is_nan() || *x < 0.0) {
                push(
                    ViolationCode::NegativeAngleCap,
                    format!("line `{}` has a negative angle cap", l.id),
                );
            }
        }

        for s in &self.suppliers {
            if !known(s.node) {
                push(
                    ViolationCode::DanglingNode,
                    format!("supplier `{}` references unknown node {}", s.id, s.node),
                );
            }
            series(
                format!("supplier `{}` capacity", s.id),
                &s.capacity,
                true,
                &mut push,
            );
            series(format!("supplier `{}` bid", s.id), &s.bid, true, &mut push);
            if s.capacity.iter().chain(&s.bid).any(|x| x.is_infinite()) {
                push(
                    ViolationCode::NonFinite,
                    format!("supplier `{}` has an infinite capacity or bid", s.id),
                );
            }
            if let Some(r) = s.ramp_limit {
                if r.is_nan() || r < 0.0 {
                    push(
                        ViolationCode::NegativeRamp,
                        format!("supplier `{}` has ramp limit {r}", s.id),
                    );
                }
            }
        }

        let mut consumer_nodes = HashSet::new();
        for c in &self.consumers {
            if !known(c.node) {
                push(
                    ViolationCode::DanglingNode,
                    format!("consumer `{}` references unknown node {}", c.id, c.node),
                );
            }
            if !consumer_nodes.insert(c.node) {
                push(
                    ViolationCode::SharedConsumerNode,
                    format!(
                        "consumer `{}` shares node {} with another consumer",
                        c.id, c.node
                    ),
                );
            }
            series(
                format!("consumer `{}` max_demand", c.id),
                &c.max_demand,
                true,
                &mut push,
            );
            series(format!("consumer `{}` bid", c.id), &c.bid, true, &mut push);
            if c.max_demand.iter().chain(&c.bid).any(|x| x.is_infinite()) {
                push(
                    ViolationCode::NonFinite,
                    format!("consumer `{}` has an infinite demand or bid", c.id),
                );
            }
        }

        for e in &self.esrs {
            if !known(e.node) {
                push(
                    ViolationCode::DanglingNode,
                    format!("esr `{}` references unknown node {}", e.id, e.node),
                );
            }
            for (name, eta) in [
                ("eta_charge", e.eta_charge),
                ("eta_discharge", e.eta_discharge),
            ] {
                if !(eta > 0.0 && eta <= 1.0) {
                    push(
                        ViolationCode::Efficiency,
                        format!("esr `{}` {name} = {eta} outside (0, 1]", e.id),
                    );
                }
            }
            let finite = [e.soc_min, e.soc_max, e.soc_init, e.power_cap]
                .iter()
                .all(|x| x.is_finite());
            if !finite {
                push(
                    ViolationCode::NonFinite,
                    format!("esr `{}` has a non-finite parameter", e.id),
                );
            } else if !(e.soc_min <= e.soc_init && e.soc_init <= e.soc_max) {
                push(
                    ViolationCode::SocBounds,
                    format!(
                        "esr `{}` initial SOC {} outside [{}, {}]",
                        e.id, e.soc_init, e.soc_min, e.soc_max
                    ),
                );
            } else if e.soc_min < 0.0 {
                push(
                    ViolationCode::SocBounds,
                    format!("esr `{}` has negative minimum SOC {}", e.id, e.soc_min),
                );
            }
            if e.power_cap < 0.0 {
                push(
                    ViolationCode::NegativeCapacity,
                    format!("esr `{}` has power cap {}", e.id, e.power_cap),
                );
            }
            series(
                format!("esr `{}` charge_bid", e.id),
                &e.charge_bid,
                true,
                &mut push,
            );
            series(
                format!("esr `{}` discharge_bid", e.id),
                &e.discharge_bid,
                true,
                &mut push,
            );
        }
        out
    }

    /// `Ok(())` when [`Scenario::validate`] finds nothing.
    pub fn ensure_valid(&self) -> Result<(), ModelError> {
        let v = self.validate();
        if v.is_empty() {
            Ok(())
        } else {
            Err(ModelError::Invalid(v))
        }
    }

    /// Copy of the scenario without storage.
    pub fn without_esrs(&self) -> Scenario {
        Scenario {
            esrs: Vec::new(),
            ..self.clone()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn esr(s0: f64) -> Esr {
        Esr {
            id: "b".into(),
            node: 1,
            eta_charge: 0.9,
            eta_discharge: 0.8,
            soc_min: 0.0,
            soc_max: 100.0,
            soc_init: s0,
            power_cap: 10.0,
            charge_bid: vec![0.1; 3],
            discharge_bid: vec![0.1; 3],
        }
    }

    fn two_node() -> Scenario {
        Scenario {
            horizon: Horizon::new(3),
            nodes: vec![Node { id: 1 }, Node { id: 2 }],
            lines: vec![TransmissionLine::constant("l1", 1, 2, 10.0, 5.0, 3)],
            suppliers: vec![Supplier::constant("g", 1, 50.0, 5.0, 3)],
            consumers: vec![Consumer::constant("c", 2, 20.0, 30.0, 3)],
            esrs: vec![esr(50.0)],
        }
    }

    #[test]
    fn soc_bounds_apply_terminal_override() {
        let e = esr(50.0);
        assert_eq!(soc_bounds(&e, 1, 3).unwrap(), (-50.0, 50.0));
        assert_eq!(soc_bounds(&e, 3, 3).unwrap(), (0.0, 50.0));
        assert!(soc_bounds(&e, 0, 3).is_err());
        assert!(soc_bounds(&e, 4, 3).is_err());
    }

    #[test]
    fn validate_reports_soc_and_dangling_reference() {
        let mut s = two_node();
        assert!(s.validate().is_empty());
        s.esrs[0].soc_init = 110.0;
        let v = s.validate();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].code, ViolationCode::SocBounds);

        let mut s = two_node();
        s.suppliers[0].node = 99;
        let v = s.validate();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].code, ViolationCode::DanglingNode);
    }

    #[test]
    fn validate_checks_series_and_efficiencies() {
        let mut s = two_node();
        s.consumers[0].bid.pop();
        s.esrs[0].eta_charge = 1.2;
        s.lines[0].susceptance = 0.0;
        let codes: Vec<_> = s.validate().iter().map(|v| v.code).collect();
        assert!(codes.contains(&ViolationCode::SeriesLength));
        assert!(codes.contains(&ViolationCode::Efficiency));
        assert!(codes.contains(&ViolationCode::NonPositiveSusceptance));
    }

    #[test]
    fn directed_edges_partition_incidence() {
        let s = two_node();
        let edges = s.directed_edges();
        assert_eq!(edges.len(), 2);
        let inc = s.incidence();
        let total_in: usize = inc.iter().map(|n| n.edges_in.len()).sum();
        let total_out: usize = inc.iter().map(|n| n.edges_out.len()).sum();
        assert_eq!((total_in, total_out), (2, 2));
        assert_eq!(inc[0].edges_out, vec![0]);
        assert_eq!(inc[0].edges_in, vec![1]);
        assert_eq!(inc[1].esrs, Vec::<usize>::new());
        assert_eq!(inc[0].esrs, vec![0]);
    }

    #[test]
    fn soc_series_follows_recursion() {
        let e = esr(50.0);
        let s = e.soc_series(&[10.0, 0.0, 3.8888888888888893], &[0.0, 10.0, 0.0]);
        assert!((s[0] - 59.0).abs() < 1e-12);
        assert!((s[1] - 46.5).abs() < 1e-12);
        assert!((s[2] - 50.0).abs() < 1e-12);
    }

    #[test]
    fn one_reference_per_island() {
        let mut s = two_node();
        assert_eq!(s.reference_nodes(), vec![true, false]);
        s.nodes.extend([Node { id: 3 }, Node { id: 4 }]);
        s.lines
            .push(TransmissionLine::constant("l2", 4, 3, 10.0, 5.0, 3));
        assert_eq!(s.reference_nodes(), vec![true, false, true, false]);
        s.lines
            .push(TransmissionLine::constant("l3", 2, 4, 10.0, 5.0, 3));
        assert_eq!(s.reference_nodes(), vec![true, false, false, false]);
    }
}
