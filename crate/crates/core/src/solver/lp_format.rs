use std::fmt::Write;

use super::{LinearProgram, Sense};

fn term(out: &mut String, first: bool, coeff: f64, name: &str) {
    let sign = if coeff < 0.0 { "-" } else if first { "" } else { "+" };
    let mag = coeff.abs();
    if !first {
        out.push(' ');
    }
    if mag == 1.0 {
        let _ = write!(out, "{sign} {name}");
    } else {
        let _ = write!(out, "{sign} {mag:e} {name}");
    }
}

fn sanitize(name: &str, j: usize) -> String {
    let s: String = name
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || "_.[]()".contains(c) { c } else { '_' })
        .collect();
    if s.is_empty() || s.starts_with(|c: char| c.is_ascii_digit() || c == '.') {
        format!("x{j}_{s}")
    } else {
        s
    }
}

/// Renders `lp` in CPLEX LP-format text; `binaries` go to a `Binary` section.
pub fn to_lp_format(lp: &LinearProgram, binaries: &[usize]) -> String {
    let names: Vec<String> = lp.names.iter().enumerate().map(|(j, n)| sanitize(n, j)).collect();
    let mut out = String::new();
    out.push_str(match lp.sense {
        Sense::Minimize => "Minimize\n",
        Sense::Maximize => "Maximize\n",
    });
    out.push_str(" obj:");
    let mut first = true;
    for (j, &c) in lp.objective.iter().enumerate() {
        if c != 0.0 {
            term(&mut out, first, c, &names[j]);
            first = false;
        }
    }
    if first {
        out.push_str(" 0");
    }
    out.push_str("\nSubject To\n");
    for (i, c) in lp.constraints.iter().enumerate() {
        let _ = write!(out, " c{i}_{}:", sanitize(&c.name, i));
        let mut first = true;
        for &(j, a) in &c.coeffs {
            term(&mut out, first, a, &names[j]);
            first = false;
        }
        if first {
            out.push_str(" 0");
        }
        let _ = writeln!(out, " {} {:e}", c.relation, c.rhs);
    }
    out.push_str("Bounds\n");
    for j in 0..lp.num_variables() {
        let (l, u) = (lp.lower[j], lp.upper[j]);
        match (l.is_finite(), u.is_finite()) {
            (true, true) => {
                let _ = writeln!(out, " {l:e} <= {} <= {u:e}", names[j]);
            }
            (true, false) if l == 0.0 => {}
            (true, false) => {
                let _ = writeln!(out, " {} >= {l:e}", names[j]);
            }
            (false, true) => {
                let _ = writeln!(out, " -inf <= {} <= {u:e}", names[j]);
            }
            (false, false) => {
                let _ = writeln!(out, " {} free", names[j]);
            }
        }
    }
    if !binaries.is_empty() {
        out.push_str("Binary\n");
        for &j in binaries {
            let _ = writeln!(out, " {}", names[j]);
        }
    }
    out.push_str("End\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::Relation;

    #[test]
    fn renders_every_section() {
        let mut lp = LinearProgram::new(Sense::Maximize);
        let g = lp.add_variable("g(s0)", 0.0, 1.0, 1.0);
        let v = lp.add_variable("v", f64::NEG_INFINITY, f64::INFINITY, 0.0);
        let k = lp.add_variable("k", 0.0, 1.0, 0.0);
        lp.add_constraint("9b", vec![(g, 1.0), (v, -0.5)], Relation::Ge, 0.0);
        let text = to_lp_format(&lp, &[k]);
        assert!(text.starts_with("Maximize\n obj: g(s0)\n"));
        assert!(text.contains(" c0_x0_9b: g(s0) - 5e-1 v >= 0e0\n"));
        assert!(text.contains(" v free\n"));
        assert!(text.contains("Binary\n k\n"));
        assert!(text.ends_with("End\n"));
    }
}
