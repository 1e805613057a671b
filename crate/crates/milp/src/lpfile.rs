use std::fmt::Write;

use crate::problem::{LinExpr, MilpProblem, Sense, VarKind};

fn clean(name: &str, fallback: usize) -> String {
    let s: String = name
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || "_.[]".contains(c) { c } else { '_' })
        .collect();
    match s.chars().next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => s,
        Some(_) => format!("v{s}"),
        None => format!("v{fallback}"),
    }
}

fn write_expr(out: &mut String, expr: &LinExpr, names: &[String]) {
    let terms = expr.compacted();
    if terms.is_empty() {
        out.push_str(" 0");
        return;
    }
    for (k, (j, c)) in terms.into_iter().enumerate() {
        let sign = if c < 0.0 { "-" } else { "+" };
        if k == 0 && c >= 0.0 {
            let _ = write!(out, " {} {}", c, names[j]);
        } else {
            let _ = write!(out, " {} {} {}", sign, c.abs(), names[j]);
        }
    }
}

/// Renders the problem in CPLEX LP text format, for handing to an external
/// solver or for inspection.
pub fn write_lp(problem: &MilpProblem) -> String {
    let names: Vec<String> = problem
        .vars
        .iter()
        .enumerate()
        .map(|(j, v)| format!("{}_{j}", clean(&v.name, j)))
        .collect();
    let mut out = String::new();
    let _ = writeln!(out, "\\ {}", problem.name);
    out.push_str("Minimize\n obj:");
    write_expr(&mut out, &problem.objective, &names);
    out.push('\n');
    if problem.objective.constant != 0.0 {
        let _ = writeln!(out, "\\ objective constant {}", problem.objective.constant);
    }
    out.push_str("Subject To\n");
    for (i, c) in problem.constraints.iter().enumerate() {
        let _ = write!(out, " {}:", clean(&format!("{}_{i}", c.name), i));
        write_expr(&mut out, &c.expr, &names);
        let op = match c.sense {
            Sense::Le => "<=",
            Sense::Eq => "=",
            Sense::Ge => ">=",
        };
        let _ = writeln!(out, " {op} {}", c.rhs);
    }
    out.push_str("Bounds\n");
    for (v, name) in problem.vars.iter().zip(&names) {
        if v.kind == VarKind::Binary {
            continue;
        }
        match (v.lower.is_finite(), v.upper.is_finite()) {
            (true, true) => {
                let _ = writeln!(out, " {} <= {name} <= {}", v.lower, v.upper);
            }
            (true, false) => {
                let _ = writeln!(out, " {name} >= {}", v.lower);
            }
            (false, true) => {
                let _ = writeln!(out, " -inf <= {name} <= {}", v.upper);
            }
            (false, false) => {
                let _ = writeln!(out, " {name} free");
            }
        }
    }
    let bins: Vec<&String> = problem
        .vars
        .iter()
        .zip(&names)
        .filter(|(v, _)| v.kind == VarKind::Binary)
        .map(|(_, n)| n)
        .collect();
    if !bins.is_empty() {
        out.push_str("Binaries\n");
        for n in bins {
            let _ = writeln!(out, " {n}");
        }
    }
    out.push_str("End\n");
    out
}
