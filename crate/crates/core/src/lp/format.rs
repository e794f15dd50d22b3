//! Plain-text dump of a program, one constraint per line, for diffing
//! against external solvers.
//!
//! ```text
//! vars 2
//! min 0:1 1:1
//! c0: 0:1 1:1 >= 2
//! c1: 0:1 1:-1 = 0
//! bound 0 0 inf
//! bound 1 0 inf
//! ```

use std::fmt::Write;

use super::{LinearProgram, LpError, Relation, VariableBounds};

fn write_terms(out: &mut String, terms: &[(usize, f64)]) {
    for (j, a) in terms {
        let _ = write!(out, " {j}:{a}");
    }
}

pub fn to_debug_text(program: &LinearProgram) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "vars {}", program.n_vars());
    out.push_str("min");
    write_terms(&mut out, &program.objective);
    out.push('\n');
    for (i, con) in program.constraints.iter().enumerate() {
        let _ = write!(out, "c{i}:");
        write_terms(&mut out, &con.row);
        let _ = writeln!(out, " {} {}", con.relation, con.rhs);
    }
    for (j, b) in program.bounds.iter().enumerate() {
        match b.upper {
            Some(u) => {
                let _ = writeln!(out, "bound {j} {} {u}", b.lower);
            }
            None => {
                let _ = writeln!(out, "bound {j} {} inf", b.lower);
            }
        }
    }
    out
}

fn parse_err(line: usize, message: impl Into<String>) -> LpError {
    LpError::Parse {
        line,
        message: message.into(),
    }
}

fn parse_f64(line: usize, s: &str) -> Result<f64, LpError> {
    s.parse()
        .map_err(|_| parse_err(line, format!("bad number `{s}`")))
}

fn parse_term(line: usize, s: &str) -> Result<(usize, f64), LpError> {
    let (j, a) = s
        .split_once(':')
        .ok_or_else(|| parse_err(line, format!("expected index:coefficient, got `{s}`")))?;
    let j = j
        .parse()
        .map_err(|_| parse_err(line, format!("bad index `{j}`")))?;
    Ok((j, parse_f64(line, a)?))
}

pub fn parse_debug_text(text: &str) -> Result<LinearProgram, LpError> {
    let mut program: Option<LinearProgram> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let raw = raw.trim();
        if raw.is_empty() || raw.starts_with('#') {
            continue;
        }
        let mut tokens = raw.split_whitespace();
        let head = tokens.next().unwrap_or_default();
        if head == "vars" {
            let n = tokens
                .next()
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| parse_err(line, "expected variable count"))?;
            program = Some(LinearProgram::new(n));
            continue;
        }
        let lp = program
            .as_mut()
            .ok_or_else(|| parse_err(line, "`vars` must come first"))?;
        match head {
            "min" => {
                lp.objective = tokens
                    .map(|t| parse_term(line, t))
                    .collect::<Result<_, _>>()?;
            }
            "bound" => {
                let parts: Vec<&str> = tokens.collect();
                if parts.len() != 3 {
                    return Err(parse_err(line, "expected `bound <var> <lower> <upper>`"));
                }
                let j: usize = parts[0]
                    .parse()
                    .map_err(|_| parse_err(line, "bad variable index"))?;
                if j >= lp.n_vars() {
                    return Err(parse_err(line, format!("variable {j} out of range")));
                }
                let lower = parse_f64(line, parts[1])?;
                let upper = match parts[2] {
                    "inf" => None,
                    u => Some(parse_f64(line, u)?),
                };
                lp.bounds[j] = VariableBounds::new(lower, upper);
            }
            h if h.starts_with('c') && h.ends_with(':') => {
                let parts: Vec<&str> = tokens.collect();
                if parts.len() < 2 {
                    return Err(parse_err(line, "expected relation and rhs"));
                }
                let (terms, tail) = parts.split_at(parts.len() - 2);
                let relation = match tail[0] {
                    "<=" => Relation::Le,
                    ">=" => Relation::Ge,
                    "=" => Relation::Eq,
                    other => return Err(parse_err(line, format!("bad relation `{other}`"))),
                };
                let rhs = parse_f64(line, tail[1])?;
                let row = terms
                    .iter()
                    .map(|t| parse_term(line, t))
                    .collect::<Result<_, _>>()?;
                lp.add_constraint(row, relation, rhs);
            }
            other => return Err(parse_err(line, format!("unknown directive `{other}`"))),
        }
    }
    let program = program.ok_or_else(|| parse_err(0, "empty program"))?;
    program.validate()?;
    Ok(program)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dump_shape() {
        let mut lp = LinearProgram::new(2);
        lp.set_objective(vec![(0, 1.0), (1, 1.0)]);
        lp.add_constraint(vec![(0, 1.0), (1, 1.0)], Relation::Ge, 2.0);
        lp.set_bounds(1, 0.0, Some(4.5));
        let text = to_debug_text(&lp);
        assert_eq!(
            text,
            "vars 2\nmin 0:1 1:1\nc0: 0:1 1:1 >= 2\nbound 0 0 inf\nbound 1 0 4.5\n"
        );
        assert_eq!(parse_debug_text(&text).unwrap(), lp);
    }

    #[test]
    fn parse_reports_line() {
        let err = parse_debug_text("vars 1\nmin 0:1\nc0: 0:x >= 1\n").unwrap_err();
        assert!(matches!(err, LpError::Parse { line: 3, .. }));
    }
}
