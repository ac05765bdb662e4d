//! Free-format MPS export.

use std::io::{self, Write};

use super::{LinearProgram, Relation};

/// Writes `lp` in free MPS. Names containing whitespace are not valid MPS
/// tokens, so spaces are replaced by underscores.
pub fn write_mps<W: Write>(lp: &LinearProgram, name: &str, mut w: W) -> io::Result<()> {
    let tok = |s: &str| s.replace(char::is_whitespace, "_");
    writeln!(w, "NAME {}", tok(name))?;
    writeln!(w, "ROWS")?;
    writeln!(w, " N obj")?;
    for c in lp.constraints() {
        let kind = match c.relation {
            Relation::Le => 'L',
            Relation::Ge => 'G',
            Relation::Eq => 'E',
        };
        writeln!(w, " {kind} {}", tok(&c.name))?;
    }

    let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); lp.num_vars()];
    for (i, c) in lp.constraints().iter().enumerate() {
        for (v, a) in &c.coeffs {
            cols[v.0].push((i, *a));
        }
    }
    writeln!(w, "COLUMNS")?;
    for (j, v) in lp.variables().iter().enumerate() {
        let vn = tok(&v.name);
        if v.cost != 0.0 {
            writeln!(w, " {vn} obj {:e}", v.cost)?;
        }
        for &(i, a) in &cols[j] {
            writeln!(w, " {vn} {} {:e}", tok(&lp.constraints()[i].name), a)?;
        }
    }

    writeln!(w, "RHS")?;
    for c in lp.constraints() {
        if c.rhs != 0.0 {
            writeln!(w, " rhs {} {:e}", tok(&c.name), c.rhs)?;
        }
    }

    writeln!(w, "BOUNDS")?;
    for v in lp.variables() {
        let vn = tok(&v.name);
        match (v.lower.is_finite(), v.upper.is_finite()) {
            (true, true) if v.lower == v.upper => writeln!(w, " FX bnd {vn} {:e}", v.lower)?,
            (false, false) => writeln!(w, " FR bnd {vn}")?,
            (lo, hi) => {
                if !lo {
                    writeln!(w, " MI bnd {vn}")?;
                } else if v.lower != 0.0 {
                    writeln!(w, " LO bnd {vn} {:e}", v.lower)?;
                }
                if hi {
                    writeln!(w, " UP bnd {vn} {:e}", v.upper)?;
                }
            }
        }
    }
    writeln!(w, "ENDATA")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn writes_all_sections() {
        let mut lp = LinearProgram::new();
        let x = lp.add_var("x", 0.0, 5.0, -1.0).unwrap();
        let th = lp
            .add_var("theta 1", f64::NEG_INFINITY, f64::INFINITY, 0.0)
            .unwrap();
        lp.add_constraint("bal", [(x, 1.0), (th, 2.0)], Relation::Eq, 3.0)
            .unwrap();
        let mut out = Vec::new();
        write_mps(&lp, "demo", &mut out).unwrap();
        let s = String::from_utf8(out).unwrap();
        assert!(s.contains(" E bal"));
        assert!(s.contains(" x obj -1e0"));
        assert!(s.contains(" theta_1 bal 2e0"));
        assert!(s.contains(" FR bnd theta_1"));
        assert!(s.contains(" UP bnd x 5e0"));
        assert!(s.ends_with("ENDATA\n"));
    }
}
