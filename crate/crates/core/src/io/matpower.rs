//! Reader and writer for a subset of the MATPOWER case format.
//!
//! Accepted input: `mpc.baseMVA = <num>;` and the matrices `mpc.bus`,
//! `mpc.gen`, `mpc.branch` and `mpc.gencost`, each written as
//! `mpc.<name> = [ row; row; ... ];` with whitespace- or comma-separated
//! numbers. `%` starts a comment. Other assignments and `function` lines are
//! ignored. Columns used:
//!
//! | matrix | columns (1-based) |
//! |---|---|
//! | bus | 1 id, 3 Pd |
//! | gen | 1 bus, 8 status, 9 Pmax |
//! | branch | 1 from, 2 to, 4 x, 6 rateA, 11 status |
//! | gencost | 1 model (must be 2), 4 n, then n coefficients |
//!
//! Out-of-service generators and branches are dropped. A `rateA` of 0 means
//! unlimited. The supply bid is the linear cost coefficient.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq)]
pub struct Bus {
    pub id: usize,
    /// Real power demand, MW.
    pub pd: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub from: usize,
    pub to: usize,
    /// Series reactance, per unit.
    pub x: f64,
    /// Long-term rating, MW; infinite when unlimited.
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Generator {
    pub bus: usize,
    pub pmax: f64,
    /// Linear cost coefficient, $/MWh.
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaseFile {
    pub base_mva: f64,
    pub buses: Vec<Bus>,
    pub branches: Vec<Branch>,
    pub generators: Vec<Generator>,
}

#[derive(Debug, Error, PartialEq)]
pub enum CaseError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("missing `mpc.{0}`")]
    Missing(&'static str),
    #[error("`mpc.{matrix}` row {row} has {got} columns, need at least {need}")]
    ShortRow {
        matrix: &'static str,
        row: usize,
        got: usize,
        need: usize,
    },
    #[error("{what} references unknown bus {bus}")]
    UnknownBus { what: String, bus: usize },
    #[error("branch {index} ({from}-{to}) has nonpositive reactance {x}")]
    Reactance {
        index: usize,
        from: usize,
        to: usize,
        x: f64,
    },
    #[error("generator {index}: {msg}")]
    Cost { index: usize, msg: String },
    #[error("{0} is not a valid bus id")]
    BusId(f64),
}

const MATRICES: [&str; 4] = ["bus", "gen", "branch", "gencost"];

struct Raw {
    base_mva: Option<f64>,
    matrices: HashMap<&'static str, Vec<Vec<f64>>>,
}

fn strip_comment(line: &str) -> &str {
    line.split('%').next().unwrap_or("")
}

fn parse_numbers(text: &str, line: usize) -> Result<Vec<f64>, CaseError> {
    text.split(|c: char| c.is_whitespace() || c == ',')
        .filter(|t| !t.is_empty())
        .map(|t| {
            let v = match t {
                "Inf" | "inf" => Ok(f64::INFINITY),
                "-Inf" | "-inf" => Ok(f64::NEG_INFINITY),
                _ => t.parse::<f64>(),
            };
            v.map_err(|_| CaseError::Syntax {
                line,
                msg: format!("`{t}` is not a number"),
            })
        })
        .collect()
}

fn tokenize(text: &str) -> Result<Raw, CaseError> {
    let mut raw = Raw {
        base_mva: None,
        matrices: HashMap::new(),
    };
    // (matrix name, rows, partial row) while inside brackets
    let mut open: Option<(&'static str, Vec<Vec<f64>>, Vec<f64>)> = None;
    for (i, full) in text.lines().enumerate() {
        let lineno = i + 1;
        let mut line = strip_comment(full).trim();
        if open.is_none() {
            if line.is_empty() || line.starts_with("function") {
                continue;
            }
            let Some((lhs, rhs)) = line.split_once('=') else {
                continue;
            };
            let name = lhs.trim().trim_start_matches("mpc.");
            let rhs = rhs.trim();
            if name == "baseMVA" {
                let v = parse_numbers(rhs.trim_end_matches(';'), lineno)?;
                if v.len() != 1 {
                    return Err(CaseError::Syntax {
                        line: lineno,
                        msg: "baseMVA needs one number".into(),
                    });
                }
                raw.base_mva = Some(v[0]);
                continue;
            }
            let Some(&key) = MATRICES.iter().find(|m| **m == name) else {
                continue;
            };
            let Some(body) = rhs.strip_prefix('[') else {
                return Err(CaseError::Syntax {
                    line: lineno,
                    msg: format!("`mpc.{key}` must be a bracketed matrix"),
                });
            };
            open = Some((key, Vec::new(), Vec::new()));
            line = body;
        }
        let (_, rows, row) = open.as_mut().expect("inside a matrix");
        let (body, closed) = match line.split_once(']') {
            Some((b, _)) => (b, true),
            None => (line, false),
        };
        let mut parts = body.split(';').peekable();
        while let Some(part) = parts.next() {
            row.extend(parse_numbers(part, lineno)?);
            if parts.peek().is_some() && !row.is_empty() {
                rows.push(std::mem::take(row));
            }
        }
        // A line break also ends a row.
        if !row.is_empty() {
            rows.push(std::mem::take(row));
        }
        if closed {
            let (key, rows, _) = open.take().expect("inside a matrix");
            raw.matrices.insert(key, rows);
        }
    }
    if let Some((key, ..)) = open {
        return Err(CaseError::Syntax {
            line: text.lines().count(),
            msg: format!("`mpc.{key}` is not closed"),
        });
    }
    Ok(raw)
}

fn bus_id(x: f64) -> Result<usize, CaseError> {
    if x >= 0.0 && x.fract() == 0.0 && x.is_finite() {
        Ok(x as usize)
    } else {
        Err(CaseError::BusId(x))
    }
}

fn rows<'a>(raw: &'a Raw, key: &'static str, need: usize) -> Result<&'a [Vec<f64>], CaseError> {
    let m = raw.matrices.get(key).ok_or(CaseError::Missing(key))?;
    for (i, r) in m.iter().enumerate() {
        if r.len() < need {
            return Err(CaseError::ShortRow {
                matrix: key,
                row: i + 1,
                got: r.len(),
                need,
            });
        }
    }
    Ok(m)
}

pub fn parse_case(text: &str) -> Result<CaseFile, CaseError> {
    let raw = tokenize(text)?;
    let base_mva = raw.base_mva.ok_or(CaseError::Missing("baseMVA"))?;

    let buses = rows(&raw, "bus", 3)?
        .iter()
        .map(|r| {
            Ok(Bus {
                id: bus_id(r[0])?,
                pd: r[2],
            })
        })
        .collect::<Result<Vec<_>, CaseError>>()?;
    let known: HashSet<usize> = buses.iter().map(|b| b.id).collect();
    let check = |what: String, bus: usize| {
        if known.contains(&bus) {
            Ok(bus)
        } else {
            Err(CaseError::UnknownBus { what, bus })
        }
    };

    let gen_rows = rows(&raw, "gen", 9)?;
    let cost_rows = rows(&raw, "gencost", 4)?;
    if cost_rows.len() < gen_rows.len() {
        return Err(CaseError::Cost {
            index: cost_rows.len() + 1,
            msg: "no gencost row".into(),
        });
    }
    let mut generators = Vec::new();
    for (i, (g, c)) in gen_rows.iter().zip(cost_rows).enumerate() {
        let bus = check(format!("generator {}", i + 1), bus_id(g[0])?)?;
        if g[7] <= 0.0 {
            continue;
        }
        if c[0] != 2.0 {
            return Err(CaseError::Cost {
                index: i + 1,
                msg: format!("cost model {} unsupported, only polynomial (2)", c[0]),
            });
        }
        let n = c[3] as usize;
        if c.len() < 4 + n {
            return Err(CaseError::Cost {
                index: i + 1,
                msg: format!("declares {n} coefficients but has {}", c.len() - 4),
            });
        }
        // Coefficients run from the highest power down to the constant.
        let cost = if n >= 2 { c[4 + n - 2] } else { 0.0 };
        generators.push(Generator {
            bus,
            pmax: g[8],
            cost,
        });
    }

    let mut branches = Vec::new();
    for (i, r) in rows(&raw, "branch", 6)?.iter().enumerate() {
        let from = check(format!("branch {}", i + 1), bus_id(r[0])?)?;
        let to = check(format!("branch {}", i + 1), bus_id(r[1])?)?;
        if r.len() > 10 && r[10] <= 0.0 {
            continue;
        }
        if !(r[3] > 0.0) {
            return Err(CaseError::Reactance {
                index: i + 1,
                from,
                to,
                x: r[3],
            });
        }
        let rate = if r[5] == 0.0 { f64::INFINITY } else { r[5] };
        branches.push(Branch {
            from,
            to,
            x: r[3],
            rate,
        });
    }

    Ok(CaseFile {
        base_mva,
        buses,
        branches,
        generators,
    })
}

fn num(x: f64) -> String {
    if x.is_infinite() {
        if x > 0.0 {
            "Inf".into()
        } else {
            "-Inf".into()
        }
    } else {
        format!("{x}")
    }
}

/// Writes `case` in the accepted subset. Unused columns are zero, status is 1
/// and unlimited ratings are written as 0.
pub fn write_case(case: &CaseFile, name: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "function mpc = {name}");
    let _ = writeln!(s, "mpc.version = '2';");
    let _ = writeln!(s, "mpc.baseMVA = {};", num(case.base_mva));
    let _ = writeln!(
        s,
        "\n%% bus_i type Pd Qd Gs Bs area Vm Va baseKV zone Vmax Vmin"
    );
    let _ = writeln!(s, "mpc.bus = [");
    for b in &case.buses {
        let _ = writeln!(
            s,
            "\t{}\t1\t{}\t0\t0\t0\t1\t1\t0\t135\t1\t1.05\t0.95;",
            b.id,
            num(b.pd)
        );
    }
    let _ = writeln!(s, "];\n\n%% bus Pg Qg Qmax Qmin Vg mBase status Pmax Pmin");
    let _ = writeln!(s, "mpc.gen = [");
    for g in &case.generators {
        let _ = writeln!(s, "\t{}\t0\t0\t0\t0\t1\t100\t1\t{}\t0;", g.bus, num(g.pmax));
    }
    let _ = writeln!(
        s,
        "];\n\n%% fbus tbus r x b rateA rateB rateC ratio angle status"
    );
    let _ = writeln!(s, "mpc.branch = [");
    for br in &case.branches {
        let rate = if br.rate.is_infinite() {
            "0".to_string()
        } else {
            num(br.rate)
        };
        let _ = writeln!(
            s,
            "\t{}\t{}\t0\t{}\t0\t{rate}\t{rate}\t{rate}\t0\t0\t1;",
            br.from,
            br.to,
            num(br.x)
        );
    }
    let _ = writeln!(s, "];\n\n%% 2 startup shutdown n c1 c0");
    let _ = writeln!(s, "mpc.gencost = [");
    for g in &case.generators {
        let _ = writeln!(s, "\t2\t0\t0\t2\t{}\t0;", num(g.cost));
    }
    let _ = writeln!(s, "];");
    s
}
