//! Storage-size sweeps on a network case.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::case::{case_scenario, esr_from_multiplier, sample_loads};
use super::matpower::CaseFile;
use super::DEFAULT_ESR_BID;
use crate::analysis::{esr_remuneration, volatility, Remuneration, VolatilityProfile};
use crate::formulations::{clear_with, Formulation, FormulationError, FormulationKind};
use crate::lp::Tolerances;
use crate::model::Scenario;

/// Seed used when none is given.
pub const DEFAULT_SEED: u64 = 2024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepMode {
    /// Every placement gets an ESR of size K.
    All,
    /// One run per placement with a single ESR of size `single_scale * K`.
    Single,
}

impl SweepMode {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepMode::All => "all",
            SweepMode::Single => "single",
        }
    }
}

fn default_k() -> Vec<u32> {
    vec![0, 1, 5, 10, 15, 20, 25, 50]
}
fn default_seed() -> u64 {
    DEFAULT_SEED
}
fn default_placements() -> Vec<usize> {
    vec![5, 15, 24]
}
fn default_modes() -> Vec<SweepMode> {
    vec![SweepMode::All, SweepMode::Single]
}
fn default_periods() -> usize {
    24
}
fn default_bid() -> f64 {
    DEFAULT_ESR_BID
}
fn default_scale() -> f64 {
    3.0
}

/// Sweep settings. Every field has a default, so an empty TOML document is
/// a valid configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default = "default_k")]
    pub k_values: Vec<u32>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Bus ids that receive storage.
    #[serde(default = "default_placements")]
    pub placements: Vec<usize>,
    #[serde(default = "default_modes")]
    pub modes: Vec<SweepMode>,
    #[serde(default = "default_periods")]
    pub periods: usize,
    /// Charge and discharge bid of every ESR, $/MWh.
    #[serde(default = "default_bid")]
    pub esr_bid: f64,
    #[serde(default = "default_scale")]
    pub single_scale: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            k_values: default_k(),
            seed: default_seed(),
            placements: default_placements(),
            modes: default_modes(),
            periods: default_periods(),
            esr_bid: default_bid(),
            single_scale: default_scale(),
        }
    }
}

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("invalid sweep configuration: {0}")]
    Config(String),
    #[error("K = {k}, mode {mode}: {source}")]
    Clear {
        k: u32,
        mode: &'static str,
        #[source]
        source: Box<FormulationError>,
    },
}

/// One cleared point of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRun {
    pub mode: SweepMode,
    /// Equipped bus for single-ESR runs.
    pub esr_node: Option<usize>,
    pub k: u32,
    pub welfare: f64,
    /// Bus ids in the order of `volatility.temporal`.
    pub nodes: Vec<usize>,
    pub volatility: VolatilityProfile,
    pub remuneration: Vec<Remuneration>,
    /// Bus of each entry of `remuneration`.
    pub esr_nodes: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    pub config: SweepConfig,
    pub runs: Vec<SweepRun>,
}

impl SweepReport {
    pub fn find(&self, mode: SweepMode, esr_node: Option<usize>, k: u32) -> Option<&SweepRun> {
        self.runs
            .iter()
            .find(|r| r.mode == mode && r.esr_node == esr_node && r.k == k)
    }
}

impl SweepConfig {
    pub fn check(&self, case: &CaseFile) -> Result<(), SweepError> {
        if self.periods == 0 {
            return Err(SweepError::Config("periods must be positive".into()));
        }
        if !(self.esr_bid >= 0.0 && self.esr_bid.is_finite()) {
            return Err(SweepError::Config(format!(
                "esr_bid {} must be a nonnegative number",
                self.esr_bid
            )));
        }
        if !(self.single_scale >= 0.0 && self.single_scale.is_finite()) {
            return Err(SweepError::Config(format!(
                "single_scale {} must be nonnegative",
                self.single_scale
            )));
        }
        if let Some(n) = self
            .placements
            .iter()
            .find(|n| !case.buses.iter().any(|b| b.id == **n))
        {
            return Err(SweepError::Config(format!(
                "placement bus {n} is not in the case"
            )));
        }
        Ok(())
    }

    /// Scenario for one sweep point, sharing the sampled loads.
    pub fn scenario(&self, base: &Scenario, esrs: &[(usize, f64)]) -> Scenario {
        let mut s = base.clone();
        s.esrs = esrs
            .iter()
            .map(|&(node, size)| {
                esr_from_multiplier(format!("esr{node}"), node, size, self.esr_bid, self.periods)
            })
            .collect();
        s
    }
}

/// Clears the virtual-link market at every `(mode, K)` on one set of loads
/// sampled with `config.seed`. Runs are ordered by mode, then placement, then K.
pub fn run_sweep(
    case: &CaseFile,
    config: &SweepConfig,
    tol: &Tolerances,
) -> Result<SweepReport, SweepError> {
    config.check(case)?;
    let base = case_scenario(
        case,
        config.periods,
        sample_loads(case, config.periods, config.seed),
    );
    let nodes: Vec<usize> = base.nodes.iter().map(|n| n.id).collect();

    let mut plan: Vec<(SweepMode, Option<usize>, u32, Vec<(usize, f64)>)> = Vec::new();
    for &mode in &config.modes {
        match mode {
            SweepMode::All => {
                for &k in &config.k_values {
                    plan.push((
                        mode,
                        None,
                        k,
                        config.placements.iter().map(|&n| (n, k as f64)).collect(),
                    ));
                }
            }
            SweepMode::Single => {
                for &n in &config.placements {
                    for &k in &config.k_values {
                        plan.push((mode, Some(n), k, vec![(n, config.single_scale * k as f64)]));
                    }
                }
            }
        }
    }

    let mut runs = Vec::with_capacity(plan.len());
    for (mode, esr_node, k, esrs) in plan {
        log::info!("sweep {} K={k} node={esr_node:?}", mode.as_str());
        let s = config.scenario(&base, &esrs);
        let wrap = |e: FormulationError| SweepError::Clear {
            k,
            mode: mode.as_str(),
            source: Box::new(e),
        };
        let r =
            clear_with(&s, &Formulation::new(FormulationKind::VirtualLink), tol).map_err(wrap)?;
        let remuneration = esr_remuneration(&r, &s).expect("virtual-link result");
        runs.push(SweepRun {
            mode,
            esr_node,
            k,
            welfare: r.welfare,
            nodes: nodes.clone(),
            volatility: volatility(&r),
            remuneration,
            esr_nodes: s.esrs.iter().map(|e| e.node).collect(),
        });
    }
    Ok(SweepReport {
        config: config.clone(),
        runs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_toml_gives_defaults() {
        let c: SweepConfig = toml::from_str("").unwrap();
        assert_eq!(c, SweepConfig::default());
        assert_eq!(c.k_values, vec![0, 1, 5, 10, 15, 20, 25, 50]);
        let c: SweepConfig = toml::from_str("k_values = [0, 2]\nmodes = [\"single\"]").unwrap();
        assert_eq!(c.k_values, vec![0, 2]);
        assert_eq!(c.modes, vec![SweepMode::Single]);
        assert!(toml::from_str::<SweepConfig>("k_values = [-1]").is_err());
        assert!(toml::from_str::<SweepConfig>("bogus = 1").is_err());
    }
}
