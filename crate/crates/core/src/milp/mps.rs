//! Fixed-column MPS.
//!
//! Names longer than eight characters are replaced by a deterministic
//! short form (first three characters plus five base-36 hash digits). The
//! original names are kept in `* name <short> <long>` comment lines, which
//! this parser uses to restore them. Numbers are written in shortest
//! round-trip form, one matrix entry per line, so a number wider than the
//! 12-character field only runs past the end of its own line. The parser
//! splits on whitespace; names must not contain spaces.
//!
//! Supported: `NAME`, `ROWS` (one `N` row), `COLUMNS` with `'MARKER'`
//! integer blocks, `RHS`, `BOUNDS` (`UP LO FX FR MI PL BV`), `ENDATA`.
//! `RANGES`, `OBJSENSE MAX`, general integers and other bound types are
//! unsupported.

use std::collections::{HashMap, HashSet};
use std::fmt::Write;

use super::lp_format::fmt_num;
use super::{Formulation, MilpModel, ModelError, Relation, VarKind};

const NAME_LIMIT: usize = 8;
const OBJ_ROW: &str = "obj";

fn fnv1a(s: &str) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in s.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

fn base36(mut v: u64, digits: usize) -> String {
    const ALPHABET: &[u8] = b"0123456789abcdefghijklmnopqrstuvwxyz";
    let mut out = vec![b'0'; digits];
    for slot in out.iter_mut().rev() {
        *slot = ALPHABET[(v % 36) as usize];
        v /= 36;
    }
    String::from_utf8(out).expect("ascii")
}

/// Short names for one namespace; errors on a collision.
fn shorten_all<'a>(names: impl Iterator<Item = &'a str>) -> Result<Vec<String>, ModelError> {
    let names: Vec<&str> = names.collect();
    let mut used: HashSet<String> =
        names.iter().filter(|n| n.len() <= NAME_LIMIT).map(|n| n.to_string()).collect();
    let mut out = Vec::with_capacity(names.len());
    for name in names {
        if name.len() <= NAME_LIMIT {
            out.push(name.to_string());
            continue;
        }
        let prefix: String = name.chars().take(3).collect();
        let short = format!("{prefix}{}", base36(fnv1a(name), NAME_LIMIT - prefix.len()));
        if !used.insert(short.clone()) {
            return Err(ModelError::NameTooLong(name.to_string()));
        }
        out.push(short);
    }
    Ok(out)
}

fn field_line(out: &mut String, code: &str, name: &str, name2: &str, value: &str) {
    writeln!(out, " {code:<2} {name:<8}  {name2:<8}  {value}").unwrap();
}

pub fn write_mps(model: &MilpModel) -> Result<String, ModelError> {
    let col_names = shorten_all(model.variables().iter().map(|v| v.name.as_str()))?;
    let row_names = shorten_all(
        std::iter::once(OBJ_ROW).chain(model.constraints().iter().map(|c| c.name.as_str())),
    )?;
    let mut out = String::new();
    if let Some(f) = model.meta.formulation {
        writeln!(out, "* formulation: {f}").unwrap();
    }
    if let Some(h) = &model.meta.instance_hash {
        writeln!(out, "* instance_hash: {h}").unwrap();
    }
    for (short, var) in col_names.iter().zip(model.variables()) {
        if *short != var.name {
            writeln!(out, "* name {short} {}", var.name).unwrap();
        }
    }
    for (short, row) in row_names[1..].iter().zip(model.constraints()) {
        if *short != row.name {
            writeln!(out, "* name {short} {}", row.name).unwrap();
        }
    }
    writeln!(out, "NAME          {}", model.name).unwrap();
    out.push_str("ROWS\n");
    writeln!(out, " N  {OBJ_ROW}").unwrap();
    for (row, short) in model.constraints().iter().zip(&row_names[1..]) {
        if row.terms.is_empty() {
            return Err(ModelError::EmptyRow(row.name.clone()));
        }
        let code = match row.relation {
            Relation::Le => "L",
            Relation::Ge => "G",
            Relation::Eq => "E",
        };
        writeln!(out, " {code}  {short}").unwrap();
    }

    // column-major entries
    let mut entries: Vec<Vec<(usize, f64)>> = vec![Vec::new(); model.variables().len()];
    for &(j, c) in model.objective() {
        entries[j].push((0, c));
    }
    for (r, row) in model.constraints().iter().enumerate() {
        for &(j, a) in &row.terms {
            entries[j].push((r + 1, a));
        }
    }
    out.push_str("COLUMNS\n");
    let mut in_marker = false;
    let mut marker_count = 0;
    for (j, var) in model.variables().iter().enumerate() {
        let binary = var.kind == VarKind::Binary;
        if binary != in_marker {
            let tag = if binary { "'INTORG'" } else { "'INTEND'" };
            if binary {
                marker_count += 1;
            }
            writeln!(out, "    MARKER{marker_count:<4}  'MARKER'                 {tag}").unwrap();
            in_marker = binary;
        }
        if entries[j].is_empty() {
            field_line(&mut out, "", &col_names[j], OBJ_ROW, "0");
        }
        for &(r, a) in &entries[j] {
            field_line(&mut out, "", &col_names[j], &row_names[r], &fmt_num(a));
        }
    }
    if in_marker {
        writeln!(out, "    MARKER{marker_count:<4}  'MARKER'                 'INTEND'").unwrap();
    }
    out.push_str("RHS\n");
    for (row, short) in model.constraints().iter().zip(&row_names[1..]) {
        if row.rhs != 0.0 {
            field_line(&mut out, "", "RHS", short, &fmt_num(row.rhs));
        }
    }
    out.push_str("BOUNDS\n");
    for (var, short) in model.variables().iter().zip(&col_names) {
        let (lo, up) = (var.lower, var.upper);
        if lo == up {
            field_line(&mut out, "FX", "BND", short, &fmt_num(lo));
            continue;
        }
        if lo == f64::NEG_INFINITY && up == f64::INFINITY {
            field_line(&mut out, "FR", "BND", short, "");
            continue;
        }
        if lo == f64::NEG_INFINITY {
            field_line(&mut out, "MI", "BND", short, "");
        } else if lo != 0.0 {
            field_line(&mut out, "LO", "BND", short, &fmt_num(lo));
        }
        if up != f64::INFINITY {
            field_line(&mut out, "UP", "BND", short, &fmt_num(up));
        }
    }
    out.push_str("ENDATA\n");
    Ok(out)
}

#[derive(Clone, Copy, PartialEq)]
enum Section {
    Start,
    Rows,
    Columns,
    Rhs,
    Bounds,
    End,
}

fn syntax(line: usize, message: impl Into<String>) -> ModelError {
    ModelError::SyntaxError { line, column: 1, message: message.into() }
}

fn number(tok: &str, line: usize) -> Result<f64, ModelError> {
    match tok.to_ascii_lowercase().as_str() {
        "inf" | "+inf" | "infinity" | "1e30" | "1e+30" => Ok(f64::INFINITY),
        "-inf" | "-infinity" | "-1e30" | "-1e+30" => Ok(f64::NEG_INFINITY),
        _ => tok.parse().map_err(|_| syntax(line, format!("bad number {tok:?}"))),
    }
}

pub fn parse_mps(text: &str) -> Result<MilpModel, ModelError> {
    let mut section = Section::Start;
    let mut long_names: HashMap<String, String> = HashMap::new();
    let mut formulation = None;
    let mut instance_hash = None;
    let mut model_name = String::from("model");

    let mut obj_row: Option<String> = None;
    let mut rows: Vec<(String, Relation)> = Vec::new();
    let mut row_index: HashMap<String, usize> = HashMap::new();
    let mut row_terms: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut rhs: Vec<f64> = Vec::new();

    let mut cols: Vec<String> = Vec::new();
    let mut col_index: HashMap<String, usize> = HashMap::new();
    let mut integer: Vec<bool> = Vec::new();
    let mut bounds: Vec<(f64, f64, bool)> = Vec::new();
    let mut objective: Vec<(usize, f64)> = Vec::new();
    let mut in_marker = false;

    for (k, raw) in text.lines().enumerate() {
        let line_no = k + 1;
        if let Some(comment) = raw.strip_prefix('*') {
            let comment = comment.trim();
            if let Some(rest) = comment.strip_prefix("formulation:") {
                formulation = Formulation::from_tag(rest.trim());
            } else if let Some(rest) = comment.strip_prefix("instance_hash:") {
                instance_hash = Some(rest.trim().to_string());
            } else if let Some(rest) = comment.strip_prefix("name ") {
                let mut parts = rest.split_whitespace();
                if let (Some(short), Some(long)) = (parts.next(), parts.next()) {
                    long_names.insert(short.to_string(), long.to_string());
                }
            }
            continue;
        }
        if raw.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = raw.split_whitespace().collect();
        if !raw.starts_with(' ') && !raw.starts_with('\t') {
            section = match fields[0].to_ascii_uppercase().as_str() {
                "NAME" => {
                    model_name = fields.get(1).map_or("model", |s| s).to_string();
                    Section::Start
                }
                "ROWS" => Section::Rows,
                "COLUMNS" => Section::Columns,
                "RHS" => Section::Rhs,
                "BOUNDS" => Section::Bounds,
                "ENDATA" => Section::End,
                "RANGES" => return Err(ModelError::UnsupportedFeature("RANGES section".into())),
                "OBJSENSE" => {
                    if fields.get(1).is_some_and(|s| s.eq_ignore_ascii_case("MAX")) {
                        return Err(ModelError::UnsupportedFeature("maximization".into()));
                    }
                    Section::Start
                }
                other => return Err(syntax(line_no, format!("unknown section {other}"))),
            };
            continue;
        }
        match section {
            Section::Start | Section::End => {
                return Err(syntax(line_no, "data line outside a section"));
            }
            Section::Rows => {
                let [code, name] = fields[..] else {
                    return Err(syntax(line_no, "expected row type and name"));
                };
                let relation = match code.to_ascii_uppercase().as_str() {
                    "N" => {
                        if obj_row.is_some() {
                            return Err(ModelError::UnsupportedFeature("multiple N rows".into()));
                        }
                        obj_row = Some(name.to_string());
                        continue;
                    }
                    "L" => Relation::Le,
                    "G" => Relation::Ge,
                    "E" => Relation::Eq,
                    other => return Err(syntax(line_no, format!("unknown row type {other}"))),
                };
                row_index.insert(name.to_string(), rows.len());
                rows.push((name.to_string(), relation));
                row_terms.push(Vec::new());
                rhs.push(0.0);
            }
            Section::Columns => {
                if fields.len() >= 3 && fields[1].trim_matches('\'') == "MARKER" {
                    match fields[2].trim_matches('\'') {
                        "INTORG" => in_marker = true,
                        "INTEND" => in_marker = false,
                        other => return Err(syntax(line_no, format!("unknown marker {other}"))),
                    }
                    continue;
                }
                if fields.len() != 3 && fields.len() != 5 {
                    return Err(syntax(line_no, "expected column, row, value [row, value]"));
                }
                let col = fields[0];
                let j = match col_index.get(col) {
                    Some(&j) => j,
                    None => {
                        col_index.insert(col.to_string(), cols.len());
                        cols.push(col.to_string());
                        integer.push(in_marker);
                        bounds.push((0.0, f64::INFINITY, false));
                        cols.len() - 1
                    }
                };
                for pair in fields[1..].chunks(2) {
                    let value = number(pair[1], line_no)?;
                    if Some(pair[0]) == obj_row.as_deref() {
                        if value != 0.0 {
                            objective.push((j, value));
                        }
                    } else {
                        let r = *row_index
                            .get(pair[0])
                            .ok_or_else(|| syntax(line_no, format!("unknown row {}", pair[0])))?;
                        if value != 0.0 {
                            row_terms[r].push((j, value));
                        }
                    }
                }
            }
            Section::Rhs => {
                if fields.len() != 3 && fields.len() != 5 {
                    return Err(syntax(line_no, "expected set, row, value [row, value]"));
                }
                for pair in fields[1..].chunks(2) {
                    let value = number(pair[1], line_no)?;
                    if Some(pair[0]) == obj_row.as_deref() {
                        return Err(ModelError::UnsupportedFeature("objective constant".into()));
                    }
                    let r = *row_index
                        .get(pair[0])
                        .ok_or_else(|| syntax(line_no, format!("unknown row {}", pair[0])))?;
                    rhs[r] = value;
                }
            }
            Section::Bounds => {
                if fields.len() < 3 {
                    return Err(syntax(line_no, "expected bound type, set and column"));
                }
                let code = fields[0].to_ascii_uppercase();
                let j = *col_index
                    .get(fields[2])
                    .ok_or_else(|| syntax(line_no, format!("unknown column {}", fields[2])))?;
                let value = || -> Result<f64, ModelError> {
                    number(fields.get(3).ok_or_else(|| syntax(line_no, "missing bound value"))?, line_no)
                };
                let b = &mut bounds[j];
                b.2 = true;
                match code.as_str() {
                    "UP" => b.1 = value()?,
                    "LO" => b.0 = value()?,
                    "FX" => {
                        let v = value()?;
                        b.0 = v;
                        b.1 = v;
                    }
                    "FR" => {
                        b.0 = f64::NEG_INFINITY;
                        b.1 = f64::INFINITY;
                    }
                    "MI" => b.0 = f64::NEG_INFINITY,
                    "PL" => b.1 = f64::INFINITY,
                    "BV" => {
                        b.0 = 0.0;
                        b.1 = 1.0;
                        integer[j] = true;
                    }
                    other => {
                        return Err(ModelError::UnsupportedFeature(format!("bound type {other}")))
                    }
                }
            }
        }
    }
    if section != Section::End {
        return Err(syntax(text.lines().count() + 1, "missing ENDATA"));
    }

    let restore = |name: &str| long_names.get(name).cloned().unwrap_or_else(|| name.to_string());
    let mut model = MilpModel::new(model_name);
    for (j, col) in cols.iter().enumerate() {
        let (lo, up, _) = bounds[j];
        let kind = if integer[j] {
            if lo < 0.0 || up > 1.0 {
                return Err(ModelError::UnsupportedFeature(format!(
                    "general integer variable {col}"
                )));
            }
            VarKind::Binary
        } else {
            VarKind::Continuous
        };
        model.add_var(restore(col), lo, up, kind);
    }
    model.set_objective(objective);
    for (r, (name, relation)) in rows.into_iter().enumerate() {
        model.add_constraint(restore(&name), std::mem::take(&mut row_terms[r]), relation, rhs[r]);
    }
    model.meta.formulation = formulation;
    model.meta.instance_hash = instance_hash;
    Ok(model.finish())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> MilpModel {
        let mut m = MilpModel::new("small");
        let a = m.add_var("a", 0.0, 1.0, VarKind::Binary);
        let b = m.add_var("a_long_variable_name", -2.5, 7.0, VarKind::Continuous);
        let c = m.add_var("c", f64::NEG_INFINITY, f64::INFINITY, VarKind::Continuous);
        m.add_constraint("row_with_long_name", [(a, 1.0), (b, 2.25)], Relation::Le, 4.0);
        m.add_constraint("r2", [(c, -1.0), (b, 1.0)], Relation::Eq, 0.0);
        m.set_objective([(b, 1.0)]);
        m.finish()
    }

    #[test]
    fn round_trip_restores_long_names() {
        let m = small();
        let text = write_mps(&m).unwrap();
        for line in text.lines().filter(|l| !l.starts_with('*')) {
            for field in line.split_whitespace().take(3) {
                assert!(field.len() <= NAME_LIMIT || field.starts_with('\''), "{field}");
            }
        }
        let back = parse_mps(&text).unwrap();
        assert_eq!(back, m);
        assert_eq!(write_mps(&back).unwrap(), text);
    }

    #[test]
    fn shortening_is_deterministic() {
        let a = shorten_all(["variable_one", "x"].into_iter()).unwrap();
        let b = shorten_all(["variable_one", "x"].into_iter()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a[0].len(), NAME_LIMIT);
        assert!(a[0].starts_with("var"));
    }

    #[test]
    fn unsupported() {
        let text = "NAME t\nROWS\n N obj\nRANGES\nENDATA\n";
        assert!(matches!(parse_mps(text), Err(ModelError::UnsupportedFeature(_))));
        let text = "NAME t\nROWS\n N obj\n L r\nCOLUMNS\n x r 1\nBOUNDS\n SC BND x 3\nENDATA\n";
        assert!(matches!(parse_mps(text), Err(ModelError::UnsupportedFeature(_))));
    }

    #[test]
    fn bad_row_type() {
        let text = "NAME t\nROWS\n Q r\nENDATA\n";
        assert!(matches!(parse_mps(text), Err(ModelError::SyntaxError { line: 3, .. })));
    }
}
