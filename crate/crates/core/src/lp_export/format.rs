//! CPLEX LP text format: a writer and a parser for the subset it emits.
//!
//! Grammar subset:
//! ```text
//! \ comment
//! Maximize | Minimize
//!  obj: [term]...
//! Subject To
//!  name: term... (<= | = | >=) number
//! Bounds
//!  name free | lo <= name <= hi
//! End
//! ```
//! A term is `(+|-) coefficient name`. Every variable appears in the
//! objective (with zero coefficient if needed), which fixes the variable
//! order on parse-back. Numbers use Rust's shortest round-trip notation.

use std::fmt::Write;

use super::{LinearProgram, Sense};
use crate::error::{Error, Result};

const TERMS_PER_LINE: usize = 8;

fn fmt_num(v: f64) -> String {
    if v == f64::INFINITY {
        "+inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{v:e}")
    }
}

fn write_terms(out: &mut String, terms: impl Iterator<Item = (f64, String)>) {
    for (k, (a, name)) in terms.enumerate() {
        if k > 0 && k % TERMS_PER_LINE == 0 {
            out.push_str("\n   ");
        }
        let sign = if a.is_sign_negative() { '-' } else { '+' };
        let _ = write!(out, " {sign} {} {name}", fmt_num(a.abs()));
    }
}

/// Renders the program in LP format.
pub fn serialize_lp(lp: &LinearProgram) -> Result<String> {
    lp.validate()?;
    let mut out = String::from("\\ written by pmp\n");
    out.push_str(if lp.maximize { "Maximize\n" } else { "Minimize\n" });
    out.push_str(" obj:");
    write_terms(&mut out, lp.objective.iter().zip(&lp.names).map(|(&a, n)| (a, n.clone())));
    out.push_str("\nSubject To\n");
    for row in &lp.rows {
        let _ = write!(out, " {}:", row.name);
        write_terms(&mut out, row.coeffs.iter().map(|&(v, a)| (a, lp.names[v].clone())));
        let _ = writeln!(out, " {} {}", row.sense.symbol(), fmt_num(row.rhs));
    }
    out.push_str("Bounds\n");
    for (name, &(lo, hi)) in lp.names.iter().zip(&lp.bounds) {
        if lo == f64::NEG_INFINITY && hi == f64::INFINITY {
            let _ = writeln!(out, " {name} free");
        } else {
            let _ = writeln!(out, " {} <= {name} <= {}", fmt_num(lo), fmt_num(hi));
        }
    }
    out.push_str("End\n");
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Section {
    Start,
    Objective,
    Rows,
    Bounds,
    End,
}

struct Parser {
    lp: LinearProgram,
    index: std::collections::HashMap<String, usize>,
}

impl Parser {
    fn var(&mut self, name: &str) -> usize {
        if let Some(&k) = self.index.get(name) {
            return k;
        }
        let k = self.lp.add_var(name, 0.0);
        self.index.insert(name.to_string(), k);
        k
    }
}

fn parse_number(tok: &str, offset: usize) -> Result<f64> {
    match tok {
        "+inf" | "inf" | "+infinity" | "infinity" => Ok(f64::INFINITY),
        "-inf" | "-infinity" => Ok(f64::NEG_INFINITY),
        _ => tok.parse().map_err(|_| Error::Parse {
            offset,
            message: format!("expected a number, found {tok:?}"),
        }),
    }
}

/// Parses `± coef name` sequences into sparse terms.
fn parse_terms(p: &mut Parser, toks: &[&str], offset: usize) -> Result<Vec<(usize, f64)>> {
    let mut out = Vec::new();
    let mut k = 0;
    while k < toks.len() {
        let mut sign = 1.0;
        if toks[k] == "+" || toks[k] == "-" {
            if toks[k] == "-" {
                sign = -1.0;
            }
            k += 1;
        }
        let mut coef = 1.0;
        if k < toks.len() && toks[k].parse::<f64>().is_ok() {
            coef = parse_number(toks[k], offset)?;
            k += 1;
        }
        let name = toks.get(k).ok_or_else(|| Error::Parse {
            offset,
            message: "term without a variable".into(),
        })?;
        out.push((p.var(name), sign * coef));
        k += 1;
    }
    Ok(out)
}

/// Parses documents produced by [`serialize_lp`].
pub fn parse_lp(text: &str) -> Result<LinearProgram> {
    let mut p = Parser {
        lp: LinearProgram::new(true),
        index: Default::default(),
    };
    let mut section = Section::Start;
    // Logical lines: continuation lines (not starting a new labelled entry)
    // are appended to the previous one.
    let mut entries: Vec<(Section, usize, String)> = Vec::new();
    let mut offset = 0;
    for raw in text.split_inclusive('\n') {
        let line_offset = offset;
        offset += raw.len();
        let line = raw.split('\\').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let lower = line.to_ascii_lowercase();
        let next = match lower.as_str() {
            "maximize" | "maximise" | "max" => Some((Section::Objective, true)),
            "minimize" | "minimise" | "min" => Some((Section::Objective, false)),
            "subject to" | "st" | "s.t." => Some((Section::Rows, true)),
            "bounds" => Some((Section::Bounds, true)),
            "end" => Some((Section::End, true)),
            _ => None,
        };
        if let Some((s, maximize)) = next {
            if s == Section::Objective {
                p.lp.maximize = maximize;
            }
            section = s;
            continue;
        }
        let continuation = match section {
            Section::Objective => !entries.is_empty() && !line.contains(':'),
            Section::Rows => !line.contains(':'),
            _ => false,
        };
        match section {
            Section::Start | Section::End => {
                return Err(Error::Parse {
                    offset: line_offset,
                    message: format!("content outside a section: {line:?}"),
                })
            }
            _ if continuation => match entries.last_mut() {
                Some(last) if last.0 == section => {
                    last.2.push(' ');
                    last.2.push_str(line);
                }
                _ => {
                    return Err(Error::Parse {
                        offset: line_offset,
                        message: "continuation line without an entry".into(),
                    })
                }
            },
            _ => entries.push((section, line_offset, line.to_string())),
        }
    }
    if section != Section::End {
        return Err(Error::Parse {
            offset: text.len(),
            message: "missing End".into(),
        });
    }
    let mut objective_terms = Vec::new();
    for (sec, off, line) in entries {
        let toks: Vec<&str> = line.split_whitespace().collect();
        match sec {
            Section::Objective => {
                let body = match line.split_once(':') {
                    Some((_, rest)) => rest,
                    None => &line,
                };
                let toks: Vec<&str> = body.split_whitespace().collect();
                objective_terms.extend(parse_terms(&mut p, &toks, off)?);
            }
            Section::Rows => {
                let (name, body) = line.split_once(':').expect("rows carry labels");
                let toks: Vec<&str> = body.split_whitespace().collect();
                let pos = toks
                    .iter()
                    .position(|t| matches!(*t, "<=" | "=<" | ">=" | "=>" | "="))
                    .ok_or_else(|| Error::Parse {
                        offset: off,
                        message: format!("row {name} has no relation"),
                    })?;
                let sense = match toks[pos] {
                    "<=" | "=<" => Sense::Le,
                    ">=" | "=>" => Sense::Ge,
                    _ => Sense::Eq,
                };
                if toks.len() != pos + 2 {
                    return Err(Error::Parse {
                        offset: off,
                        message: format!("row {name} needs a single right-hand side"),
                    });
                }
                let coeffs = parse_terms(&mut p, &toks[..pos], off)?;
                let rhs = parse_number(toks[pos + 1], off)?;
                p.lp.add_row(name.trim(), coeffs, sense, rhs);
            }
            Section::Bounds => match toks.as_slice() {
                [name, free] if free.eq_ignore_ascii_case("free") => {
                    let k = p.var(name);
                    p.lp.bounds[k] = (f64::NEG_INFINITY, f64::INFINITY);
                }
                [lo, "<=", name, "<=", hi] => {
                    let k = p.var(name);
                    p.lp.bounds[k] = (parse_number(lo, off)?, parse_number(hi, off)?);
                }
                _ => {
                    return Err(Error::Parse {
                        offset: off,
                        message: format!("unsupported bound {line:?}"),
                    })
                }
            },
            Section::Start | Section::End => unreachable!(),
        }
    }
    for (v, a) in objective_terms {
        p.lp.objective[v] += a;
    }
    p.lp.validate()?;
    Ok(p.lp)
}
