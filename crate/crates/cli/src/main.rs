use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use vlmarket_core::agents::AgentError;
use vlmarket_core::analysis::{complementarity_report, participant_profits, volatility};
use vlmarket_core::formulations::{
    build, clear_with, ClearingResult, Formulation, FormulationError, FormulationKind, VlSocRows,
};
use vlmarket_core::io::{
    load_case_file, load_sweep_config, run_sweep, summary_row, write_results, write_sweep,
    CaseSource, InputError, OutputError, SweepConfig, SweepError, SweepMode, DEFAULT_SEED,
};
use vlmarket_core::lp::{certify, Tolerances};
use vlmarket_core::model::Scenario;

/// Market clearing with energy storage: base, relaxed, robust and
/// virtual-link formulations.
#[derive(Parser)]
#[command(name = "vlmarket", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Clear one market and write prices and allocations.
    Clear {
        #[command(flatten)]
        case: CaseArgs,
        #[arg(long, short = 'f', default_value = "vl")]
        formulation: FormulationKind,
        /// Directory for prices.csv, allocations.csv, esr_ops.csv and summary.csv.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// Clear a network case for a range of storage sizes.
    Sweep {
        /// MATPOWER case file.
        #[arg(long)]
        case: PathBuf,
        /// TOML sweep configuration; flags below override it.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Storage multipliers, e.g. 0,1,5,10.
        #[arg(long = "K", value_delimiter = ',')]
        k: Option<Vec<u32>>,
        #[arg(long)]
        seed: Option<u64>,
        /// Participation modes, e.g. all,single.
        #[arg(long, value_enum, value_delimiter = ',')]
        mode: Option<Vec<ModeArg>>,
        /// Buses that receive storage.
        #[arg(long, value_delimiter = ',')]
        placements: Option<Vec<usize>>,
        #[arg(long, default_value = "sweep_out")]
        out: PathBuf,
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// Clear with every formulation and compare welfare and prices.
    Compare {
        #[command(flatten)]
        case: CaseArgs,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// Certify the LP solution and audit storage operation.
    Verify {
        #[command(flatten)]
        case: CaseArgs,
        #[arg(long, short = 'f', default_value = "vl")]
        formulation: FormulationKind,
        /// Relative complementarity threshold, scaled by the squared power cap.
        #[arg(long, default_value_t = 1e-9)]
        comp_tol: f64,
    },
    /// Write the market LP in free MPS format.
    ExportLp {
        #[command(flatten)]
        case: CaseArgs,
        #[arg(long, short = 'f', default_value = "vl")]
        formulation: FormulationKind,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct CaseArgs {
    /// `builtin:N` (N = 1..4), a scenario `.toml`, or a MATPOWER `.m` case.
    #[arg(long)]
    case: String,
    /// Seed for load sampling on MATPOWER cases.
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Periods for MATPOWER cases.
    #[arg(long, default_value_t = 24)]
    periods: usize,
    /// Storage multiplier for MATPOWER cases (0 = no storage capacity).
    #[arg(long = "K", default_value_t = 0.0)]
    k: f64,
    /// Buses that receive storage on MATPOWER cases.
    #[arg(long, value_delimiter = ',', default_value = "5,15,24")]
    placements: Vec<usize>,
    /// Relative tolerance of the solver self-certification.
    #[arg(long)]
    tol: Option<f64>,
    /// SOC rows of the virtual-link market.
    #[arg(long, value_enum, default_value_t = RowsArg::Composed)]
    vl_rows: RowsArg,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Ndjson,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    All,
    Single,
}

#[derive(Clone, Copy, ValueEnum)]
enum RowsArg {
    Composed,
    Printed,
}

enum Failure {
    Input(String),
    Solver(String),
    Audit,
}

impl From<InputError> for Failure {
    fn from(e: InputError) -> Self {
        Failure::Input(e.to_string())
    }
}

impl From<OutputError> for Failure {
    fn from(e: OutputError) -> Self {
        Failure::Input(e.to_string())
    }
}

impl From<FormulationError> for Failure {
    fn from(e: FormulationError) -> Self {
        match e {
            FormulationError::Model(_)
            | FormulationError::Link(_)
            | FormulationError::LinkMismatch { .. } => Failure::Input(e.to_string()),
            FormulationError::Lp(_) | FormulationError::NotOptimal { .. } => {
                Failure::Solver(e.to_string())
            }
        }
    }
}

impl From<AgentError> for Failure {
    fn from(e: AgentError) -> Self {
        Failure::Solver(format!("profit maximization: {e}"))
    }
}

impl From<SweepError> for Failure {
    fn from(e: SweepError) -> Self {
        match e {
            SweepError::Config(_) => Failure::Input(e.to_string()),
            SweepError::Clear { .. } => Failure::Solver(e.to_string()),
        }
    }
}

impl CaseArgs {
    fn tolerances(&self) -> Tolerances {
        tolerances(self.tol)
    }

    fn formulation(&self, kind: FormulationKind) -> Formulation {
        let rows = match self.vl_rows {
            RowsArg::Composed => VlSocRows::Composed,
            RowsArg::Printed => VlSocRows::Printed,
        };
        Formulation::new(kind).with_vl_rows(rows)
    }

    fn load(&self) -> Result<Scenario, Failure> {
        let source = CaseSource::parse(&self.case)?;
        let s = source.load(self.seed, self.periods, self.k, &self.placements)?;
        s.ensure_valid()
            .map_err(|e| Failure::Input(format!("{}: {e}", self.case)))?;
        Ok(s)
    }
}

fn tolerances(tol: Option<f64>) -> Tolerances {
    let mut t = Tolerances::default();
    if let Some(c) = tol {
        t.certification = c;
    }
    t
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Clear {
            case,
            formulation,
            out,
            format,
        } => cmd_clear(&case, formulation, out, format),
        Command::Sweep {
            case,
            config,
            k,
            seed,
            mode,
            placements,
            out,
            tol,
            format,
        } => cmd_sweep(case, config, k, seed, mode, placements, out, tol, format),
        Command::Compare { case, format } => cmd_compare(&case, format),
        Command::Verify {
            case,
            formulation,
            comp_tol,
        } => cmd_verify(&case, formulation, comp_tol),
        Command::ExportLp {
            case,
            formulation,
            out,
        } => cmd_export(&case, formulation, out),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Audit) => ExitCode::from(1),
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Solver(msg)) => {
            eprintln!("solver failure: {msg}");
            ExitCode::from(3)
        }
    }
}

fn node_ids(s: &Scenario) -> Vec<usize> {
    s.nodes.iter().map(|n| n.id).collect()
}

fn fmt_series(xs: &[f64]) -> String {
    xs.iter()
        .map(|x| format!("{x:.4}"))
        .collect::<Vec<_>>()
        .join(" ")
}

fn print_clearing(r: &ClearingResult, s: &Scenario, format: Format) {
    let summary = summary_row(r, s);
    match format {
        Format::Csv => {
            println!("formulation,welfare,consumer_value,supply_cost,transmission_cost,storage_bid_cost,iterations");
            println!(
                "{},{},{},{},{},{},{}",
                summary.formulation,
                summary.welfare,
                summary.consumer_value,
                summary.supply_cost,
                summary.transmission_cost,
                summary.storage_bid_cost,
                summary.iterations
            );
            println!();
            println!("node,min_price,mean_price,max_price,prices");
            for (id, p) in node_ids(s).iter().zip(&r.prices) {
                let (lo, hi) = p
                    .iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| {
                        (a.min(x), b.max(x))
                    });
                let mean = p.iter().sum::<f64>() / p.len() as f64;
                println!("{id},{lo},{mean},{hi},{}", fmt_series(p));
            }
        }
        Format::Ndjson => {
            let mut v = serde_json::to_value(&summary).expect("summary serializes");
            v["type"] = json!("summary");
            println!("{v}");
            for (id, p) in node_ids(s).iter().zip(&r.prices) {
                println!("{}", json!({"type": "prices", "node": id, "prices": p}));
            }
        }
    }
}

fn cmd_clear(
    case: &CaseArgs,
    kind: FormulationKind,
    out: Option<PathBuf>,
    format: Format,
) -> Result<(), Failure> {
    let s = case.load()?;
    let r = clear_with(&s, &case.formulation(kind), &case.tolerances())?;
    print_clearing(&r, &s, format);
    if let Some(dir) = out {
        write_results(&r, &s, &dir)?;
        log::info!("results written to {}", dir.display());
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_sweep(
    case: PathBuf,
    config: Option<PathBuf>,
    k: Option<Vec<u32>>,
    seed: Option<u64>,
    mode: Option<Vec<ModeArg>>,
    placements: Option<Vec<usize>>,
    out: PathBuf,
    tol: Option<f64>,
    format: Format,
) -> Result<(), Failure> {
    let file = load_case_file(&case)?;
    let mut cfg = match config {
        Some(p) => load_sweep_config(&p)?,
        None => SweepConfig::default(),
    };
    if let Some(k) = k {
        cfg.k_values = k;
    }
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    if let Some(modes) = mode {
        cfg.modes = modes
            .into_iter()
            .map(|m| match m {
                ModeArg::All => SweepMode::All,
                ModeArg::Single => SweepMode::Single,
            })
            .collect();
    }
    if let Some(p) = placements {
        cfg.placements = p;
    }
    let report = run_sweep(&file, &cfg, &tolerances(tol))?;
    write_sweep(&report, &out)?;
    if let Format::Csv = format {
        println!("mode,esr_node,K,welfare,mean_temporal_std");
    }
    for r in &report.runs {
        let node = r.esr_node.map(|n| n.to_string()).unwrap_or_default();
        match format {
            Format::Csv => println!(
                "{},{node},{},{},{}",
                r.mode.as_str(),
                r.k,
                r.welfare,
                r.volatility.mean_temporal()
            ),
            Format::Ndjson => println!(
                "{}",
                json!({
                    "mode": r.mode.as_str(),
                    "esr_node": r.esr_node,
                    "K": r.k,
                    "welfare": r.welfare,
                    "mean_temporal_std": r.volatility.mean_temporal(),
                })
            ),
        }
    }
    Ok(())
}

fn cmd_compare(case: &CaseArgs, format: Format) -> Result<(), Failure> {
    let s = case.load()?;
    let tol = case.tolerances();
    let mut results = Vec::new();
    for kind in FormulationKind::ALL {
        results.push(clear_with(&s, &case.formulation(kind), &tol)?);
    }
    let w = |k: FormulationKind| {
        results
            .iter()
            .find(|r| r.kind == k)
            .expect("all kinds cleared")
            .welfare
    };
    let (base, esr, robust, vl) = (
        w(FormulationKind::Base),
        w(FormulationKind::EsrRelaxed),
        w(FormulationKind::EsrRobust),
        w(FormulationKind::VirtualLink),
    );
    let eps = 1e-6 * (1.0 + esr.abs());
    let ordered = base <= robust + eps && robust <= esr + eps;
    let equal = (robust - vl).abs() <= eps;
    let reference = &results[1].prices;
    match format {
        Format::Csv => {
            println!("formulation,welfare,max_price_diff_vs_esr,mean_temporal_std");
            for r in &results {
                let diff = max_abs_diff(&r.prices, reference);
                println!(
                    "{},{},{},{}",
                    r.kind,
                    r.welfare,
                    diff,
                    volatility(&r).mean_temporal()
                );
            }
            println!();
            println!(
                "ordering base <= robust <= esr: {}; robust = vl: {} (difference {:e})",
                if ordered { "holds" } else { "violated" },
                if equal { "yes" } else { "no" },
                robust - vl
            );
        }
        Format::Ndjson => {
            for r in &results {
                println!(
                    "{}",
                    json!({
                        "type": "welfare",
                        "formulation": r.kind.as_str(),
                        "welfare": r.welfare,
                        "max_price_diff_vs_esr": max_abs_diff(&r.prices, reference),
                        "prices": r.prices,
                    })
                );
            }
            println!(
                "{}",
                json!({"type": "ordering", "ordered": ordered, "robust_equals_vl": equal})
            );
        }
    }
    Ok(())
}

fn max_abs_diff(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter()
        .flatten()
        .zip(b.iter().flatten())
        .fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

fn cmd_verify(case: &CaseArgs, kind: FormulationKind, comp_tol: f64) -> Result<(), Failure> {
    let s = case.load()?;
    let tol = case.tolerances();
    let r = clear_with(&s, &case.formulation(kind), &tol)?;
    let mut ok = true;

    let cert = certify(&r.market.lp, &r.solution, tol.certification);
    println!("certificate: {} ({cert})", pass(cert.passed()));
    ok &= cert.passed();

    let profits = participant_profits(&r, &s);
    let worst = profits
        .suppliers
        .iter()
        .chain(&profits.consumers)
        .map(|p| p.iter().sum::<f64>())
        .fold(0.0f64, f64::min);
    println!("participant profits over the horizon: min {worst:.6e}");

    let audit = complementarity_report(&r, &s, comp_tol)?;
    let violations: Vec<_> = audit.violations().collect();
    println!(
        "complementarity: {} ({} violations)",
        pass(violations.is_empty()),
        violations.len()
    );
    for e in &violations {
        println!(
            "  {} t={}: charge {:.4} discharge {:.4} product {:.4e} > {:.4e}; price {:.4} vs lower bound {:.4}",
            e.esr, e.t, e.charge, e.discharge, e.product, e.threshold, e.price, e.bound
        );
        if e.below_bound {
            println!("    price is below the bound, so the relaxation may charge and discharge at once; this operation is not physically realizable");
        }
    }
    for e in audit.counterexamples() {
        println!(
            "  counterexample: {} t={} violates complementarity at price {} above bound {}",
            e.esr, e.t, e.price, e.bound
        );
    }
    if violations.is_empty() {
        for e in audit.complementarity.iter().filter(|e| e.below_bound) {
            println!(
                "  note: {} t={} price {:.4} is below the bound {:.4} yet operation is complementary (the bound is sufficient, not necessary)",
                e.esr, e.t, e.price, e.bound
            );
        }
    }
    ok &= violations.is_empty();

    for c in &audit.consistency {
        println!(
            "consistency {}: {} (cleared profit {:.6}, best response {:.6}, gap {:.3e})",
            c.esr,
            pass(c.passed),
            c.cleared_profit,
            c.optimal_profit,
            c.gap
        );
        ok &= c.passed;
    }
    if ok {
        println!("all checks passed");
        Ok(())
    } else {
        Err(Failure::Audit)
    }
}

fn pass(ok: bool) -> &'static str {
    if ok {
        "pass"
    } else {
        "FAIL"
    }
}

fn cmd_export(case: &CaseArgs, kind: FormulationKind, out: Option<PathBuf>) -> Result<(), Failure> {
    let s = case.load()?;
    let m = build(&s, &case.formulation(kind))?;
    let text = m.export_mps();
    match out {
        Some(path) => std::fs::write(&path, text)
            .map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?,
        None => print!("{text}"),
    }
    Ok(())
}
