//! Shared inputs for the benchmarks.

use std::path::PathBuf;

use vlmarket_core::io::{load_case_file, CaseFile};

/// The 30-bus network case shipped with the core crate.
pub fn network_case() -> CaseFile {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures/case30_api.m");
    load_case_file(&path).expect("fixture parses")
}
