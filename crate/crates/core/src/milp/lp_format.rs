//! CPLEX-style LP text format.
//!
//! Names start with a letter or underscore and continue with letters,
//! digits, `_` or `.`. Supported subset: `Minimize` objective, `Subject To` rows with a single
//! relation and numeric right-hand side, `Bounds` (one bound statement per
//! line, `free` and `±inf` accepted), `Binaries`, `End`. Comments start with
//! a backslash. `Maximize`, `Generals`, semi-continuous and SOS sections are
//! rejected as unsupported.
//!
//! Variable order after parsing: variables listed in `Bounds` in that order,
//! then any others in order of first appearance. The writer lists every
//! variable in `Bounds`, so parsing its output preserves the order.

use std::collections::HashMap;
use std::fmt::Write;

use super::{Formulation, MilpModel, ModelError, Relation, VarKind};

const TERMS_PER_LINE: usize = 6;

pub(super) fn fmt_num(x: f64) -> String {
    if x == 0.0 {
        "0".to_string()
    } else if x == f64::INFINITY {
        "+inf".to_string()
    } else if x == f64::NEG_INFINITY {
        "-inf".to_string()
    } else {
        format!("{x}")
    }
}

fn write_terms(out: &mut String, model: &MilpModel, terms: &[(usize, f64)]) {
    for (k, &(j, a)) in terms.iter().enumerate() {
        if k > 0 && k % TERMS_PER_LINE == 0 {
            out.push_str("\n   ");
        }
        let name = &model.variables()[j].name;
        let sign = if a < 0.0 { "-" } else { "+" };
        let mag = a.abs();
        if k > 0 || a < 0.0 {
            write!(out, " {sign}").unwrap();
        }
        if mag == 1.0 {
            write!(out, " {name}").unwrap();
        } else {
            write!(out, " {} {name}", fmt_num(mag)).unwrap();
        }
    }
}

pub fn write_lp(model: &MilpModel) -> Result<String, ModelError> {
    let mut out = String::new();
    writeln!(out, "\\ Problem name: {}", model.name).unwrap();
    if let Some(f) = model.meta.formulation {
        writeln!(out, "\\ formulation: {f}").unwrap();
    }
    if let Some(h) = &model.meta.instance_hash {
        writeln!(out, "\\ instance_hash: {h}").unwrap();
    }
    out.push_str("Minimize\n obj:");
    write_terms(&mut out, model, model.objective());
    out.push_str("\nSubject To\n");
    for row in model.constraints() {
        if row.terms.is_empty() {
            return Err(ModelError::EmptyRow(row.name.clone()));
        }
        write!(out, " {}:", row.name).unwrap();
        write_terms(&mut out, model, &row.terms);
        writeln!(out, " {} {}", row.relation.symbol(), fmt_num(row.rhs)).unwrap();
    }
    out.push_str("Bounds\n");
    for var in model.variables() {
        let (lo, up, name) = (var.lower, var.upper, &var.name);
        if lo == up {
            writeln!(out, " {name} = {}", fmt_num(lo)).unwrap();
        } else if lo == f64::NEG_INFINITY && up == f64::INFINITY {
            writeln!(out, " {name} free").unwrap();
        } else if up == f64::INFINITY {
            writeln!(out, " {name} >= {}", fmt_num(lo)).unwrap();
        } else {
            writeln!(out, " {} <= {name} <= {}", fmt_num(lo), fmt_num(up)).unwrap();
        }
    }
    let binaries: Vec<&str> = model
        .variables()
        .iter()
        .filter(|v| v.kind == VarKind::Binary)
        .map(|v| v.name.as_str())
        .collect();
    if !binaries.is_empty() {
        out.push_str("Binaries\n");
        for chunk in binaries.chunks(8) {
            writeln!(out, " {}", chunk.join(" ")).unwrap();
        }
    }
    out.push_str("End\n");
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Name(String),
    Num(f64),
    Plus,
    Minus,
    Colon,
    Rel(Relation),
}

#[derive(Clone, Debug)]
struct Token {
    tok: Tok,
    line: usize,
    column: usize,
}

fn syntax(line: usize, column: usize, message: impl Into<String>) -> ModelError {
    ModelError::SyntaxError { line, column, message: message.into() }
}

fn is_name_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

fn is_name_char(c: char) -> bool {
    is_name_start(c) || c.is_ascii_digit() || c == '.'
}

fn lex_line(text: &str, line: usize, out: &mut Vec<Token>) -> Result<(), ModelError> {
    let chars: Vec<char> = text.chars().collect();
    let mut k = 0;
    while k < chars.len() {
        let c = chars[k];
        let column = k + 1;
        let push = |out: &mut Vec<Token>, tok| out.push(Token { tok, line, column });
        if c.is_whitespace() {
            k += 1;
        } else if c == '+' {
            push(out, Tok::Plus);
            k += 1;
        } else if c == '-' {
            push(out, Tok::Minus);
            k += 1;
        } else if c == ':' {
            push(out, Tok::Colon);
            k += 1;
        } else if c == '<' || c == '>' || c == '=' {
            let next = chars.get(k + 1).copied();
            let (rel, len) = match (c, next) {
                ('<', Some('=')) | ('=', Some('<')) => (Relation::Le, 2),
                ('>', Some('=')) | ('=', Some('>')) => (Relation::Ge, 2),
                ('<', _) => (Relation::Le, 1),
                ('>', _) => (Relation::Ge, 1),
                _ => (Relation::Eq, 1),
            };
            push(out, Tok::Rel(rel));
            k += len;
        } else if c.is_ascii_digit() || c == '.' {
            let start = k;
            while k < chars.len() && (chars[k].is_ascii_digit() || chars[k] == '.') {
                k += 1;
            }
            if k < chars.len() && (chars[k] == 'e' || chars[k] == 'E') {
                let mut e = k + 1;
                if e < chars.len() && (chars[e] == '+' || chars[e] == '-') {
                    e += 1;
                }
                if e < chars.len() && chars[e].is_ascii_digit() {
                    k = e;
                    while k < chars.len() && chars[k].is_ascii_digit() {
                        k += 1;
                    }
                }
            }
            let s: String = chars[start..k].iter().collect();
            let value = s.parse::<f64>().map_err(|_| syntax(line, column, format!("bad number {s:?}")))?;
            push(out, Tok::Num(value));
        } else if is_name_start(c) {
            let start = k;
            while k < chars.len() && is_name_char(chars[k]) {
                k += 1;
            }
            let s: String = chars[start..k].iter().collect();
            let lower = s.to_ascii_lowercase();
            if lower == "inf" || lower == "infinity" {
                push(out, Tok::Num(f64::INFINITY));
            } else {
                push(out, Tok::Name(s));
            }
        } else {
            return Err(syntax(line, column, format!("unexpected character {c:?}")));
        }
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Section {
    Preamble,
    Objective,
    Constraints,
    Bounds,
    Binaries,
    End,
}

fn section_header(line: &str) -> Option<Result<Section, ModelError>> {
    let lower = line.trim().to_ascii_lowercase();
    let words: Vec<&str> = lower.split_whitespace().collect();
    let joined = words.join(" ");
    Some(Ok(match joined.as_str() {
        "minimize" | "minimum" | "min" => Section::Objective,
        "subject to" | "such that" | "st" | "s.t." => Section::Constraints,
        "bounds" | "bound" => Section::Bounds,
        "binaries" | "binary" | "bin" => Section::Binaries,
        "end" => Section::End,
        "maximize" | "maximum" | "max" => {
            return Some(Err(ModelError::UnsupportedFeature("maximization".into())))
        }
        "generals" | "general" | "gen" | "integers" => {
            return Some(Err(ModelError::UnsupportedFeature("general integer variables".into())))
        }
        "semi-continuous" | "semis" | "semi" | "sec" => {
            return Some(Err(ModelError::UnsupportedFeature("semi-continuous variables".into())))
        }
        "sos" => return Some(Err(ModelError::UnsupportedFeature("SOS constraints".into()))),
        _ => return None,
    }))
}

struct Builder {
    names: HashMap<String, usize>,
    order: Vec<String>,
    bounds: Vec<(f64, f64)>,
    explicit_bounds: Vec<bool>,
    binary: Vec<bool>,
    bounds_order: Vec<usize>,
}

impl Builder {
    fn var(&mut self, name: &str) -> usize {
        if let Some(&k) = self.names.get(name) {
            return k;
        }
        let k = self.order.len();
        self.names.insert(name.to_string(), k);
        self.order.push(name.to_string());
        self.bounds.push((0.0, f64::INFINITY));
        self.explicit_bounds.push(false);
        self.binary.push(false);
        k
    }
}

/// Parses `[sign] [number] name` terms until a relation or the end.
fn parse_expr(
    toks: &[Token],
    pos: &mut usize,
    builder: &mut Builder,
) -> Result<Vec<(usize, f64)>, ModelError> {
    let mut terms = Vec::new();
    while *pos < toks.len() {
        let t = &toks[*pos];
        let mut sign = 1.0;
        let mut coef = None;
        let mut k = *pos;
        let mut saw_sign = false;
        while k < toks.len() && matches!(toks[k].tok, Tok::Plus | Tok::Minus) {
            if toks[k].tok == Tok::Minus {
                sign = -sign;
            }
            saw_sign = true;
            k += 1;
        }
        if k < toks.len() {
            if let Tok::Num(v) = toks[k].tok {
                coef = Some(v);
                k += 1;
            }
        }
        match toks.get(k).map(|t| &t.tok) {
            Some(Tok::Name(name)) if !matches!(toks.get(k + 1).map(|t| &t.tok), Some(Tok::Colon)) => {
                let j = builder.var(name);
                terms.push((j, sign * coef.unwrap_or(1.0)));
                *pos = k + 1;
            }
            _ => {
                if saw_sign || coef.is_some() {
                    // a trailing constant belongs to the caller only at a relation
                    if matches!(toks.get(k).map(|t| &t.tok), Some(Tok::Rel(_))) && coef.is_some() {
                        return Err(ModelError::UnsupportedFeature(format!(
                            "constant term on line {}",
                            t.line
                        )));
                    }
                    let bad = toks.get(k).unwrap_or(t);
                    return Err(syntax(bad.line, bad.column, "expected a variable name"));
                }
                break;
            }
        }
    }
    Ok(terms)
}

fn parse_signed_number(toks: &[Token], pos: &mut usize) -> Option<f64> {
    let mut sign = 1.0;
    let mut k = *pos;
    while k < toks.len() && matches!(toks[k].tok, Tok::Plus | Tok::Minus) {
        if toks[k].tok == Tok::Minus {
            sign = -sign;
        }
        k += 1;
    }
    if let Some(Tok::Num(v)) = toks.get(k).map(|t| &t.tok) {
        *pos = k + 1;
        Some(sign * v)
    } else {
        None
    }
}

fn parse_bound_line(toks: &[Token], builder: &mut Builder) -> Result<(), ModelError> {
    let first = &toks[0];
    let err = || syntax(first.line, first.column, "unrecognized bound statement");
    let mut pos = 0;
    let set = |builder: &mut Builder, name: &str, lo: Option<f64>, up: Option<f64>| {
        let j = builder.var(name);
        if !builder.explicit_bounds[j] {
            builder.explicit_bounds[j] = true;
            builder.bounds_order.push(j);
        }
        if let Some(lo) = lo {
            builder.bounds[j].0 = lo;
        }
        if let Some(up) = up {
            builder.bounds[j].1 = up;
        }
    };
    if let Some(lo) = parse_signed_number(toks, &mut pos) {
        // l <= x [<= u]
        if !matches!(toks.get(pos).map(|t| &t.tok), Some(Tok::Rel(Relation::Le))) {
            return Err(err());
        }
        let Some(Tok::Name(name)) = toks.get(pos + 1).map(|t| &t.tok) else { return Err(err()) };
        let name = name.clone();
        pos += 2;
        if pos == toks.len() {
            set(builder, &name, Some(lo), None);
            return Ok(());
        }
        if !matches!(toks.get(pos).map(|t| &t.tok), Some(Tok::Rel(Relation::Le))) {
            return Err(err());
        }
        pos += 1;
        let up = parse_signed_number(toks, &mut pos).ok_or_else(err)?;
        if pos != toks.len() {
            return Err(err());
        }
        set(builder, &name, Some(lo), Some(up));
        return Ok(());
    }
    let Some(Tok::Name(name)) = toks.first().map(|t| &t.tok) else { return Err(err()) };
    let name = name.clone();
    if toks.len() == 2 {
        if let Tok::Name(word) = &toks[1].tok {
            if word.eq_ignore_ascii_case("free") {
                set(builder, &name, Some(f64::NEG_INFINITY), Some(f64::INFINITY));
                return Ok(());
            }
        }
    }
    let Some(Tok::Rel(rel)) = toks.get(1).map(|t| t.tok.clone()) else { return Err(err()) };
    pos = 2;
    let value = parse_signed_number(toks, &mut pos).ok_or_else(err)?;
    if pos != toks.len() {
        return Err(err());
    }
    match rel {
        Relation::Le => set(builder, &name, None, Some(value)),
        Relation::Ge => set(builder, &name, Some(value), None),
        Relation::Eq => set(builder, &name, Some(value), Some(value)),
    }
    Ok(())
}

pub fn parse_lp(text: &str) -> Result<MilpModel, ModelError> {
    let mut section = Section::Preamble;
    let mut formulation = None;
    let mut instance_hash = None;
    let mut model_name = String::from("model");
    let mut objective_toks = Vec::new();
    let mut row_toks = Vec::new();
    let mut bound_lines: Vec<Vec<Token>> = Vec::new();
    let mut binary_toks = Vec::new();

    for (k, raw) in text.lines().enumerate() {
        let line_no = k + 1;
        let (body, comment) = match raw.find('\\') {
            Some(p) => (&raw[..p], Some(&raw[p + 1..])),
            None => (raw, None),
        };
        if let Some(comment) = comment {
            let comment = comment.trim();
            if let Some(rest) = comment.strip_prefix("formulation:") {
                formulation = Formulation::from_tag(rest.trim());
            } else if let Some(rest) = comment.strip_prefix("instance_hash:") {
                instance_hash = Some(rest.trim().to_string());
            } else if let Some(rest) = comment.strip_prefix("Problem name:") {
                model_name = rest.trim().to_string();
            }
        }
        if body.trim().is_empty() {
            continue;
        }
        if let Some(header) = section_header(body) {
            section = header?;
            continue;
        }
        match section {
            Section::Preamble => return Err(syntax(line_no, 1, "expected an objective section")),
            Section::End => return Err(syntax(line_no, 1, "text after End")),
            Section::Objective => lex_line(body, line_no, &mut objective_toks)?,
            Section::Constraints => lex_line(body, line_no, &mut row_toks)?,
            Section::Bounds => {
                let mut toks = Vec::new();
                lex_line(body, line_no, &mut toks)?;
                bound_lines.push(toks);
            }
            Section::Binaries => lex_line(body, line_no, &mut binary_toks)?,
        }
    }
    if section != Section::End {
        return Err(syntax(text.lines().count() + 1, 1, "missing End"));
    }

    let mut builder = Builder {
        names: HashMap::new(),
        order: Vec::new(),
        bounds: Vec::new(),
        explicit_bounds: Vec::new(),
        binary: Vec::new(),
        bounds_order: Vec::new(),
    };

    // objective: optional "name:" then an expression
    let mut pos = 0;
    if objective_toks.len() >= 2 && objective_toks[1].tok == Tok::Colon {
        pos = 2;
    }
    let objective = parse_expr(&objective_toks, &mut pos, &mut builder)?;
    if pos != objective_toks.len() {
        let t = &objective_toks[pos];
        return Err(syntax(t.line, t.column, "unexpected token in objective"));
    }

    let mut rows = Vec::new();
    let mut pos = 0;
    while pos < row_toks.len() {
        let start = &row_toks[pos];
        let name = match (&start.tok, row_toks.get(pos + 1).map(|t| &t.tok)) {
            (Tok::Name(n), Some(Tok::Colon)) => {
                pos += 2;
                n.clone()
            }
            _ => format!("c{}", rows.len() + 1),
        };
        let terms = parse_expr(&row_toks, &mut pos, &mut builder)?;
        let rel = match row_toks.get(pos) {
            Some(Token { tok: Tok::Rel(r), .. }) => *r,
            Some(t) => return Err(syntax(t.line, t.column, "expected a relation")),
            None => return Err(syntax(start.line, start.column, "constraint without relation")),
        };
        let rel_tok = row_toks[pos].clone();
        pos += 1;
        let rhs = parse_signed_number(&row_toks, &mut pos)
            .ok_or_else(|| syntax(rel_tok.line, rel_tok.column, "expected a numeric right-hand side"))?;
        if terms.is_empty() {
            return Err(syntax(start.line, start.column, "constraint has no terms"));
        }
        rows.push((name, terms, rel, rhs));
    }

    for toks in &bound_lines {
        parse_bound_line(toks, &mut builder)?;
    }
    for t in &binary_toks {
        match &t.tok {
            Tok::Name(name) => {
                let j = builder.var(name);
                builder.binary[j] = true;
            }
            _ => return Err(syntax(t.line, t.column, "expected a variable name")),
        }
    }

    // Bounds-section order first, then first appearance.
    let mut order: Vec<usize> = builder.bounds_order.clone();
    let mut placed = vec![false; builder.order.len()];
    for &j in &order {
        placed[j] = true;
    }
    order.extend((0..builder.order.len()).filter(|&j| !placed[j]));
    let mut new_index = vec![0; order.len()];
    let mut model = MilpModel::new(model_name);
    for (k, &j) in order.iter().enumerate() {
        new_index[j] = k;
        let (mut lo, mut up) = builder.bounds[j];
        let kind = if builder.binary[j] {
            if !builder.explicit_bounds[j] {
                lo = 0.0;
                up = 1.0;
            }
            if lo < 0.0 || up > 1.0 {
                return Err(ModelError::UnsupportedFeature(format!(
                    "integer variable {} with bounds [{lo}, {up}]",
                    builder.order[j]
                )));
            }
            VarKind::Binary
        } else {
            VarKind::Continuous
        };
        model.add_var(builder.order[j].clone(), lo, up, kind);
    }
    model.set_objective(objective.into_iter().map(|(j, a)| (new_index[j], a)));
    for (name, terms, rel, rhs) in rows {
        model.add_constraint(name, terms.into_iter().map(|(j, a)| (new_index[j], a)), rel, rhs);
    }
    model.meta.formulation = formulation;
    model.meta.instance_hash = instance_hash;
    Ok(model.finish())
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = "\\ tiny model
Minimize
 obj: 2 a - b
Subject To
 r1: a + 3 b <= 4
 r2: - a
     + b >= -1.5
 a - b = 0
Bounds
 b free
 -inf <= c <= 3
Binaries
 a
End
";

    #[test]
    fn parses_small_model() {
        let m = parse_lp(SMALL).unwrap();
        let names: Vec<&str> = m.variables().iter().map(|v| v.name.as_str()).collect();
        assert_eq!(names, ["b", "c", "a"]);
        let b = &m.variables()[0];
        assert_eq!((b.lower, b.upper), (f64::NEG_INFINITY, f64::INFINITY));
        let c = &m.variables()[1];
        assert_eq!((c.lower, c.upper), (f64::NEG_INFINITY, 3.0));
        let a = &m.variables()[2];
        assert_eq!((a.lower, a.upper, a.kind), (0.0, 1.0, VarKind::Binary));
        assert_eq!(m.objective(), &[(0, -1.0), (2, 2.0)]);
        assert_eq!(m.constraints().len(), 3);
        assert_eq!(m.constraints()[1].rhs, -1.5);
        assert_eq!(m.constraints()[2].name, "c3");
    }

    #[test]
    fn bad_relation_reports_line() {
        let text = "Minimize\n obj: x\nSubject To\n r1: x !! 3\nEnd\n";
        match parse_lp(text) {
            Err(ModelError::SyntaxError { line, .. }) => assert_eq!(line, 4),
            other => panic!("expected syntax error, got {other:?}"),
        }
        let text = "Minimize\n obj: x\nSubject To\n r1: x 3\nEnd\n";
        assert!(matches!(parse_lp(text), Err(ModelError::SyntaxError { line: 4, .. })));
    }

    #[test]
    fn unsupported_sections() {
        let text = "Maximize\n obj: x\nEnd\n";
        assert!(matches!(parse_lp(text), Err(ModelError::UnsupportedFeature(_))));
        let text = "Minimize\n obj: x\nGenerals\n x\nEnd\n";
        assert!(matches!(parse_lp(text), Err(ModelError::UnsupportedFeature(_))));
    }

    #[test]
    fn fixpoint() {
        let once = write_lp(&parse_lp(SMALL).unwrap()).unwrap();
        let twice = write_lp(&parse_lp(&once).unwrap()).unwrap();
        assert_eq!(once, twice);
    }
}
