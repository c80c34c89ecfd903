//! Reading and writing MPS files.
//!
//! Lines are split on whitespace, so both fixed- and free-format files are
//! accepted as long as names contain no spaces. Section headers start in the
//! first column; data lines are indented. Names are case-sensitive.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{normalize_infinity, ProblemInstance, SparseMatrix, VariableBounds, DEFAULT_INFINITY};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Section {
    Name,
    ObjSense,
    ObjName,
    Rows,
    Columns,
    Rhs,
    Ranges,
    Bounds,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum RowKind {
    Objective,
    Le,
    Ge,
    Eq,
}

#[derive(Default)]
struct Builder {
    name: String,
    row_index: HashMap<String, usize>,
    row_kinds: Vec<RowKind>,
    objective: Option<String>,
    col_index: HashMap<String, usize>,
    integral: Vec<bool>,
    triplets: Vec<(usize, usize, f64)>,
    rhs: HashMap<usize, f64>,
    ranges: HashMap<usize, f64>,
    lower: Vec<Option<f64>>,
    upper: Vec<Option<f64>>,
}

impl Builder {
    fn column(&mut self, name: &str, integral: bool) -> usize {
        if let Some(&j) = self.col_index.get(name) {
            return j;
        }
        let j = self.integral.len();
        self.col_index.insert(name.to_string(), j);
        self.integral.push(integral);
        self.lower.push(None);
        self.upper.push(None);
        j
    }

    /// Constraint index for a row name, or `None` for the objective row.
    fn row(&self, name: &str, line: usize) -> Result<Option<usize>> {
        if self.objective.as_deref() == Some(name) {
            return Ok(None);
        }
        self.row_index
            .get(name)
            .map(|&i| Some(i))
            .ok_or_else(|| Error::parse(line, format!("unknown row '{name}'")))
    }
}

fn number(token: &str, line: usize) -> Result<f64> {
    token
        .parse::<f64>()
        .ok()
        .filter(|v| !v.is_nan())
        .ok_or_else(|| Error::parse(line, format!("expected a number, found '{token}'")))
}

/// Parse an MPS model, treating magnitudes of at least 1e20 as infinite.
pub fn parse_mps(text: &str) -> Result<ProblemInstance> {
    parse_mps_with_threshold(text, DEFAULT_INFINITY)
}

pub fn parse_mps_with_threshold(text: &str, infinity_threshold: f64) -> Result<ProblemInstance> {
    let inf = |v: f64| normalize_infinity(v, infinity_threshold);
    let mut b = Builder::default();
    let mut section: Option<Section> = None;
    let mut in_integer_block = false;
    let mut ended = false;

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        if raw.trim().is_empty() || raw.starts_with('*') {
            continue;
        }
        let tokens: Vec<&str> = raw.split_whitespace().collect();
        let indented = raw.starts_with(' ') || raw.starts_with('\t');

        if !indented {
            section = Some(match tokens[0] {
                "NAME" => {
                    b.name = tokens.get(1).map(|s| s.to_string()).unwrap_or_default();
                    Section::Name
                }
                "OBJSENSE" => Section::ObjSense,
                "OBJNAME" => Section::ObjName,
                "ROWS" => Section::Rows,
                "COLUMNS" => Section::Columns,
                "RHS" => Section::Rhs,
                "RANGES" => Section::Ranges,
                "BOUNDS" => Section::Bounds,
                "ENDATA" => {
                    ended = true;
                    break;
                }
                other => return Err(Error::parse(line, format!("unknown section '{other}'"))),
            });
            continue;
        }

        match section {
            None => return Err(Error::parse(line, "data before the first section")),
            // The objective sense and name do not affect propagation.
            Some(Section::Name) | Some(Section::ObjSense) | Some(Section::ObjName) => {}
            Some(Section::Rows) => {
                let [kind, name] = tokens[..] else {
                    return Err(Error::parse(line, "ROWS entries need a type and a name"));
                };
                if b.row_index.contains_key(name) || b.objective.as_deref() == Some(name) {
                    return Err(Error::parse(line, format!("duplicate row '{name}'")));
                }
                let kind = match kind {
                    "N" => RowKind::Objective,
                    "L" => RowKind::Le,
                    "G" => RowKind::Ge,
                    "E" => RowKind::Eq,
                    other => return Err(Error::parse(line, format!("unknown row type '{other}'"))),
                };
                if kind == RowKind::Objective {
                    if b.objective.is_some() {
                        return Err(Error::parse(line, format!("second objective row '{name}'")));
                    }
                    b.objective = Some(name.to_string());
                } else {
                    b.row_index.insert(name.to_string(), b.row_kinds.len());
                    b.row_kinds.push(kind);
                }
            }
            Some(Section::Columns) => {
                if tokens.len() >= 3 && tokens[1].trim_matches('\'') == "MARKER" {
                    match tokens[2].trim_matches('\'') {
                        "INTORG" => in_integer_block = true,
                        "INTEND" => in_integer_block = false,
                        other => return Err(Error::parse(line, format!("unknown marker '{other}'"))),
                    }
                    continue;
                }
                if tokens.len() != 3 && tokens.len() != 5 {
                    return Err(Error::parse(line, "COLUMNS entries need a column and one or two row/value pairs"));
                }
                let j = b.column(tokens[0], in_integer_block);
                for pair in tokens[1..].chunks(2) {
                    let value = number(pair[1], line)?;
                    if let Some(i) = b.row(pair[0], line)? {
                        b.triplets.push((i, j, value));
                    }
                }
            }
            Some(Section::Rhs) | Some(Section::Ranges) => {
                // The set name is optional in free format.
                let pairs = match tokens.len() {
                    2 | 4 => &tokens[..],
                    3 | 5 => &tokens[1..],
                    _ => return Err(Error::parse(line, "expected one or two row/value pairs")),
                };
                for pair in pairs.chunks(2) {
                    let value = number(pair[1], line)?;
                    // Right-hand sides on the objective are objective constants.
                    if let Some(i) = b.row(pair[0], line)? {
                        if section == Some(Section::Rhs) {
                            b.rhs.insert(i, inf(value));
                        } else {
                            b.ranges.insert(i, inf(value));
                        }
                    }
                }
            }
            Some(Section::Bounds) => parse_bound(&mut b, &tokens, line, &inf)?,
        }
    }

    if !ended {
        return Err(Error::parse(text.lines().count(), "missing ENDATA"));
    }
    b.finish()
}

fn parse_bound(b: &mut Builder, tokens: &[&str], line: usize, inf: &dyn Fn(f64) -> f64) -> Result<()> {
    let kind = tokens[0];
    let needs_value = !matches!(kind, "FR" | "MI" | "PL" | "BV");
    let (col, value) = if needs_value {
        match tokens.len() {
            4 => (tokens[2], number(tokens[3], line)?),
            3 => (tokens[1], number(tokens[2], line)?),
            _ => return Err(Error::parse(line, format!("malformed {kind} bound"))),
        }
    } else {
        match tokens.len() {
            2 => (tokens[1], 0.0),
            3 if b.col_index.contains_key(tokens[2]) => (tokens[2], 0.0),
            3 => (tokens[1], 0.0),
            4 => (tokens[2], 0.0),
            _ => return Err(Error::parse(line, format!("malformed {kind} bound"))),
        }
    };
    let j = *b
        .col_index
        .get(col)
        .ok_or_else(|| Error::parse(line, format!("bound on unknown column '{col}'")))?;
    let value = inf(value);
    match kind {
        "LO" => b.lower[j] = Some(value),
        "UP" => {
            // Classic MPS rule: a negative upper bound with no explicit lower bound
            // makes the variable unbounded below.
            if value < 0.0 && b.lower[j].is_none() {
                b.lower[j] = Some(f64::NEG_INFINITY);
            }
            b.upper[j] = Some(value);
        }
        "FX" => {
            b.lower[j] = Some(value);
            b.upper[j] = Some(value);
        }
        "FR" => {
            b.lower[j] = Some(f64::NEG_INFINITY);
            b.upper[j] = Some(f64::INFINITY);
        }
        "MI" => b.lower[j] = Some(f64::NEG_INFINITY),
        "PL" => b.upper[j] = Some(f64::INFINITY),
        "BV" => {
            b.integral[j] = true;
            b.lower[j] = Some(0.0);
            b.upper[j] = Some(1.0);
        }
        "LI" => {
            b.integral[j] = true;
            b.lower[j] = Some(value);
        }
        "UI" => {
            b.integral[j] = true;
            if value < 0.0 && b.lower[j].is_none() {
                b.lower[j] = Some(f64::NEG_INFINITY);
            }
            b.upper[j] = Some(value);
        }
        other => return Err(Error::parse(line, format!("unknown bound type '{other}'"))),
    }
    Ok(())
}

impl Builder {
    fn finish(self) -> Result<ProblemInstance> {
        let m = self.row_kinds.len();
        let n = self.integral.len();
        let matrix = SparseMatrix::from_triplets(&self.triplets, m, n)?;
        let mut lhs = vec![0.0; m];
        let mut rhs = vec![0.0; m];
        for (i, kind) in self.row_kinds.iter().enumerate() {
            let b = self.rhs.get(&i).copied().unwrap_or(0.0);
            let (mut l, mut r) = match kind {
                RowKind::Le => (f64::NEG_INFINITY, b),
                RowKind::Ge => (b, f64::INFINITY),
                RowKind::Eq | RowKind::Objective => (b, b),
            };
            if let Some(&range) = self.ranges.get(&i) {
                match kind {
                    RowKind::Le => l = b - range.abs(),
                    RowKind::Ge => r = b + range.abs(),
                    RowKind::Eq if range >= 0.0 => r = b + range,
                    RowKind::Eq => l = b + range,
                    RowKind::Objective => {}
                }
            }
            lhs[i] = l;
            rhs[i] = r;
        }
        let lower = self.lower.iter().map(|l| l.unwrap_or(0.0)).collect();
        let upper = self.upper.iter().map(|u| u.unwrap_or(f64::INFINITY)).collect();
        ProblemInstance::new(
            self.name,
            matrix,
            lhs,
            rhs,
            VariableBounds::new(lower, upper)?,
            self.integral,
        )
    }
}

pub fn read_mps_file(path: impl AsRef<Path>) -> Result<ProblemInstance> {
    let text = std::fs::read_to_string(path.as_ref())?;
    let mut instance = parse_mps(&text)?;
    if instance.name.is_empty() {
        if let Some(stem) = path.as_ref().file_stem() {
            instance.name = stem.to_string_lossy().into_owned();
        }
    }
    Ok(instance)
}

/// Write an instance as free-format MPS with generated names `r<i>` / `x<j>`.
///
/// Every bound is written explicitly and numbers use the shortest exact
/// decimal form. Parsing the output reproduces the instance exactly, except
/// that the lower side of a ranged row is rebuilt as `rhs - range`.
pub fn write_mps(instance: &ProblemInstance) -> String {
    let mut out = String::new();
    let name = if instance.name.is_empty() { "instance" } else { &instance.name };
    let num = |v: f64| format!("{v:?}");
    let _ = writeln!(out, "NAME {name}");
    out.push_str("ROWS\n N obj\n");
    let mut kinds = Vec::with_capacity(instance.num_rows());
    for i in 0..instance.num_rows() {
        let (l, r) = (instance.lhs[i], instance.rhs[i]);
        let kind = if l == r {
            'E'
        } else if l == f64::NEG_INFINITY {
            'L'
        } else if r == f64::INFINITY {
            'G'
        } else {
            // Both sides finite: an L row with a range.
            'L'
        };
        kinds.push(kind);
        let _ = writeln!(out, " {kind} r{i}");
    }

    out.push_str("COLUMNS\n");
    let csc = instance.matrix.to_csc();
    let mut in_marker = false;
    let mut markers = 0;
    for j in 0..instance.num_cols() {
        if instance.integral[j] != in_marker {
            let tag = if in_marker { "INTEND" } else { "INTORG" };
            let _ = writeln!(out, " M{markers} 'MARKER' '{tag}'");
            markers += 1;
            in_marker = instance.integral[j];
        }
        let (rows, values) = csc.col(j);
        if rows.is_empty() {
            let _ = writeln!(out, " x{j} obj 0");
        }
        for (&i, &v) in rows.iter().zip(values) {
            let _ = writeln!(out, " x{j} r{i} {}", num(v));
        }
    }
    if in_marker {
        let _ = writeln!(out, " M{markers} 'MARKER' 'INTEND'");
    }

    out.push_str("RHS\n");
    for (i, &kind) in kinds.iter().enumerate() {
        let b = match kind {
            'G' => instance.lhs[i],
            _ => instance.rhs[i],
        };
        let b = if b == f64::INFINITY { 1e30 } else { b };
        if b != 0.0 {
            let _ = writeln!(out, " rhs r{i} {}", num(b));
        }
    }
    let ranged: Vec<usize> = (0..instance.num_rows())
        .filter(|&i| instance.lhs[i].is_finite() && instance.rhs[i].is_finite() && instance.lhs[i] != instance.rhs[i])
        .collect();
    if !ranged.is_empty() {
        out.push_str("RANGES\n");
        for i in ranged {
            let _ = writeln!(out, " rng r{i} {}", num(instance.rhs[i] - instance.lhs[i]));
        }
    }

    out.push_str("BOUNDS\n");
    for j in 0..instance.num_cols() {
        let (l, u) = (instance.bounds.lower[j], instance.bounds.upper[j]);
        if l == f64::NEG_INFINITY {
            let _ = writeln!(out, " MI bnd x{j}");
        } else {
            let _ = writeln!(out, " LO bnd x{j} {}", num(l));
        }
        if u == f64::INFINITY {
            let _ = writeln!(out, " PL bnd x{j}");
        } else {
            let _ = writeln!(out, " UP bnd x{j} {}", num(u));
        }
    }
    out.push_str("ENDATA\n");
    out
}
