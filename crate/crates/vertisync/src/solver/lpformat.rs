//! Plain-text dump in the CPLEX LP file format.
//!
//! Variables are written as `x<index>` unless a name table is supplied;
//! rows as `c<index>`. Integer columns go in a `General` section.

use std::fmt::Write;

use super::{LinearProgram, Relation};

fn term(out: &mut String, a: f64, name: &str, first: bool) {
    if a < 0.0 {
        let _ = write!(out, " - {} {}", -a, name);
    } else if first {
        let _ = write!(out, " {a} {name}");
    } else {
        let _ = write!(out, " + {a} {name}");
    }
}

pub fn write_lp(lp: &LinearProgram, integer_vars: &[usize], names: Option<&[String]>) -> String {
    let name = |j: usize| names.map_or_else(|| format!("x{j}"), |n| n[j].clone());
    let mut out = String::from("\\ generated by vertisync\nMinimize\n obj:");
    let mut first = true;
    for (j, &c) in lp.objective.iter().enumerate() {
        if c != 0.0 {
            term(&mut out, c, &name(j), first);
            first = false;
        }
    }
    if first {
        out.push_str(" 0 ");
        out.push_str(&name(0));
    }
    out.push_str("\nSubject To\n");
    for (i, row) in lp.constraints.iter().enumerate() {
        let _ = write!(out, " c{i}:");
        let mut first = true;
        for &(j, a) in &row.coeffs {
            term(&mut out, a, &name(j), first);
            first = false;
        }
        if first {
            out.push_str(" 0 ");
            out.push_str(&name(0));
        }
        let rel = match row.relation {
            Relation::Le => "<=",
            Relation::Ge => ">=",
            Relation::Eq => "=",
        };
        let _ = writeln!(out, " {rel} {}", row.rhs);
    }
    out.push_str("Bounds\n");
    for j in 0..lp.num_vars() {
        let (lo, hi) = (lp.lower[j], lp.upper[j]);
        let nm = name(j);
        match (lo.is_finite(), hi.is_finite()) {
            (true, true) if lo == hi => {
                let _ = writeln!(out, " {nm} = {lo}");
            }
            (true, true) => {
                let _ = writeln!(out, " {lo} <= {nm} <= {hi}");
            }
            (true, false) if lo == 0.0 => {}
            (true, false) => {
                let _ = writeln!(out, " {nm} >= {lo}");
            }
            (false, true) => {
                let _ = writeln!(out, " -inf <= {nm} <= {hi}");
            }
            (false, false) => {
                let _ = writeln!(out, " {nm} free");
            }
        }
    }
    if !integer_vars.is_empty() {
        out.push_str("General\n");
        for &j in integer_vars {
            let _ = writeln!(out, " {}", name(j));
        }
    }
    out.push_str("End\n");
    out
}
