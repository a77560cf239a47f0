//! CPLEX-style LP text export, one constraint per line, for cross-checking
//! a model with an external solver.

use std::fmt::Write;

use super::LinearizedModel;
use crate::lp::Sense;

fn term(out: &mut String, first: bool, coef: f64, name: &str) {
    if coef < 0.0 {
        let _ = write!(out, " - {} {}", -coef, name);
    } else if first {
        let _ = write!(out, " {} {}", coef, name);
    } else {
        let _ = write!(out, " + {} {}", coef, name);
    }
}

/// Writes the model with every row of the full constraint set plus the cut
/// pools (cuts are valid, so the optimum is unchanged).
pub fn write_lp(model: &LinearizedModel) -> String {
    let names = &model.vars.names;
    let mut out = String::new();
    let _ = writeln!(out, "\\ time unit {} s", model.time_unit);
    out.push_str("Minimize\n obj:");
    let mut first = true;
    for (c, &v) in model.objective.iter().enumerate() {
        if v != 0.0 {
            term(&mut out, first, v, &names[c]);
            first = false;
        }
    }
    if first {
        out.push_str(" 0 ");
        out.push_str(&names[0]);
    }
    out.push_str("\nSubject To\n");
    for (r, row) in model.rows.iter().enumerate() {
        let _ = write!(out, " r{r}_{:?}:", model.classes[r]);
        let mut first = true;
        for &(c, a) in &row.coefs {
            term(&mut out, first, a, &names[c]);
            first = false;
        }
        if first {
            out.push_str(" 0 ");
            out.push_str(&names[0]);
        }
        let op = match row.sense {
            Sense::Le => "<=",
            Sense::Ge => ">=",
            Sense::Eq => "=",
        };
        let _ = writeln!(out, " {op} {}", row.rhs);
    }
    out.push_str("Bounds\n");
    for c in 0..model.n_vars() {
        if !model.vars.binary[c] {
            let _ = writeln!(
                out,
                " {} <= {} <= {}",
                model.vars.lower[c], names[c], model.vars.upper[c]
            );
        }
    }
    out.push_str("Binaries\n");
    for c in model.vars.binaries() {
        let _ = writeln!(out, " {}", names[c]);
    }
    out.push_str("End\n");
    out
}
