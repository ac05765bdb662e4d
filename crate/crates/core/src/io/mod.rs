//! Case input, built-in cases, load sampling and result output.

mod builtin;
mod case;
pub mod matpower;
mod output;
mod sweep;

use std::fs;
use std::path::Path;

use thiserror::Error;

pub use builtin::{builtin_single_node, single_node, UnknownCase, DEFAULT_ESR_BID};
pub use case::{
    case_scenario, esr_from_multiplier, sample_loads, LOAD_BID, LOAD_FACTOR_RANGE,
    SWEEP_ETA_CHARGE, SWEEP_ETA_DISCHARGE,
};
pub use matpower::{parse_case, write_case, CaseError, CaseFile};
pub use output::{summary_row, write_results, write_sweep, OutputError, SummaryRow};
pub use sweep::{
    run_sweep, SweepConfig, SweepError, SweepMode, SweepReport, SweepRun, DEFAULT_SEED,
};

use crate::model::Scenario;

#[derive(Debug, Error)]
pub enum InputError {
    #[error("{path}: {source}")]
    Read {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Toml {
        path: String,
        #[source]
        source: toml::de::Error,
    },
    #[error("{path}: {source}")]
    Case {
        path: String,
        #[source]
        source: CaseError,
    },
    #[error(transparent)]
    Builtin(#[from] UnknownCase),
    #[error("`{0}` is not a builtin id")]
    BuiltinId(String),
    #[error("{0}: unknown file type, expected .toml or .m")]
    Extension(String),
}

fn read(path: &Path) -> Result<String, InputError> {
    fs::read_to_string(path).map_err(|source| InputError::Read {
        path: path.display().to_string(),
        source,
    })
}

/// Parses a scenario from TOML text (the serde layout of [`Scenario`]).
pub fn scenario_from_toml(text: &str) -> Result<Scenario, toml::de::Error> {
    toml::from_str(text)
}

pub fn scenario_to_toml(s: &Scenario) -> String {
    toml::to_string(s).expect("scenario serializes")
}

pub fn load_case_file(path: &Path) -> Result<CaseFile, InputError> {
    parse_case(&read(path)?).map_err(|source| InputError::Case {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_sweep_config(path: &Path) -> Result<SweepConfig, InputError> {
    toml::from_str(&read(path)?).map_err(|source| InputError::Toml {
        path: path.display().to_string(),
        source,
    })
}

/// Where a scenario comes from: `builtin:N`, a `.toml` scenario, or a `.m`
/// case whose loads are sampled.
#[derive(Debug, Clone, PartialEq)]
pub enum CaseSource {
    Builtin(u32),
    Scenario(std::path::PathBuf),
    Matpower(std::path::PathBuf),
}

impl CaseSource {
    pub fn parse(source: &str) -> Result<Self, InputError> {
        if let Some(id) = source.strip_prefix("builtin:") {
            return id
                .parse()
                .map(CaseSource::Builtin)
                .map_err(|_| InputError::BuiltinId(id.to_string()));
        }
        let path = std::path::PathBuf::from(source);
        match path.extension().and_then(|e| e.to_str()) {
            Some("toml") => Ok(CaseSource::Scenario(path)),
            Some("m") => Ok(CaseSource::Matpower(path)),
            _ => Err(InputError::Extension(source.to_string())),
        }
    }

    /// Loads the scenario. A MATPOWER case is turned into a `periods`-long
    /// scenario with loads sampled from `seed` and storage of size `k` at
    /// each bus in `placements`.
    pub fn load(
        &self,
        seed: u64,
        periods: usize,
        k: f64,
        placements: &[usize],
    ) -> Result<Scenario, InputError> {
        match self {
            CaseSource::Builtin(id) => Ok(builtin_single_node(*id)?),
            CaseSource::Scenario(path) => {
                scenario_from_toml(&read(path)?).map_err(|source| InputError::Toml {
                    path: path.display().to_string(),
                    source,
                })
            }
            CaseSource::Matpower(path) => {
                let case = load_case_file(path)?;
                let mut s = case_scenario(&case, periods, sample_loads(&case, periods, seed));
                s.esrs = placements
                    .iter()
                    .map(|&n| {
                        esr_from_multiplier(format!("esr{n}"), n, k, DEFAULT_ESR_BID, periods)
                    })
                    .collect();
                Ok(s)
            }
        }
    }
}
