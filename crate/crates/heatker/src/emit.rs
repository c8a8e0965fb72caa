//! Rendering of results as LaTeX, plain text or JSON, and the JSON reader.
//!
//! JSON schema (`"schema": "heatker.result"`, `"version": 1`):
//!
//! ```text
//! {
//!   "schema": "heatker.result", "version": 1,
//!   "operator": {"name", "rank", "a", "endomorphism", "torsion", "gauge"},
//!   "order": m, "dimension": "symbolic" | n,
//!   "atom": {"symbol": "A" | "L", "value": "(1-a)^(-n/2)" | "ln(1-a)"},
//!   "prefactor": "(4*pi)^(-n/2)",
//!   "expression": EXPR, "trace": EXPR | null,
//!   "groups": [{"coefficient": COEFF, "structure": [{"weight": "p/q", "factors": [FACTOR]}]}],
//!   "trace_groups": [...], "notes": [string]
//! }
//! EXPR   = 0 | [{"coefficient": COEFF, "factors": [FACTOR]}]
//! COEFF  = {"numerator": polynomial text, "denominator": [[name, power]]}
//!          name is "a", "1-a", "n" or "n+c"/"n-c"
//! FACTOR = {"kind": "g"|"delta"|"T"|"R"|"W"|"X", "derivatives": [IDX], "slots": [IDX]}
//! IDX    = "^m0" | "_d3" | ...   (m: free, d: dummy)
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;

use heatker_core::expr::{parse_factor, write_factor, Factor, Index, Label, TensorExpr, Term};
use heatker_core::num::{fmt_rational, is_negative, parse_rational};
use heatker_core::poly::VarNames;
use heatker_core::ratfunc::DenFactor;
use heatker_core::reduce::{CoeffGroup, Mode};
use heatker_core::sigma::{AParam, Endomorphism};
use heatker_core::{RPoly, RatFunc, Rational, Var};
use num_traits::{One, Signed};
use serde_json::{json, Value};
use thiserror::Error;

use crate::pipeline::Report;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Latex,
    Text,
    Json,
}

pub fn names(mode: Mode) -> VarNames {
    match mode {
        Mode::Symbolic => VarNames::SYMBOLIC,
        Mode::Fixed(_) => VarNames::LOG,
    }
}

const LATEX_FREE: [&str; 4] = ["\\mu", "\\nu", "\\rho", "\\sigma"];
const LATEX_DUMMY: [&str; 10] = [
    "\\alpha",
    "\\beta",
    "\\gamma",
    "\\delta",
    "\\epsilon",
    "\\zeta",
    "\\eta",
    "\\theta",
    "\\kappa",
    "\\lambda",
];
const TEXT_FREE: [&str; 4] = ["mu", "nu", "rho", "sigma"];

fn latex_label(l: Label) -> String {
    match l {
        Label::Free(i) => LATEX_FREE
            .get(i as usize)
            .map(|s| s.to_string())
            .unwrap_or_else(|| format!("\\mu_{{{i}}}")),
        Label::Dummy(i) => LATEX_DUMMY
            .get(i as usize)
            .map(|s| s.to_string())
            .unwrap_or_else(|| format!("\\alpha_{{{i}}}")),
    }
}

fn text_label(l: Label) -> String {
    match l {
        Label::Free(i) => TEXT_FREE
            .get(i as usize)
            .map(|s| s.to_string())
            .unwrap_or_else(|| format!("m{i}")),
        Label::Dummy(i) if i < 26 => ((b'a' + i as u8) as char).to_string(),
        Label::Dummy(i) => format!("d{i}"),
    }
}

fn latex_kind(f: &Factor) -> &'static str {
    match f.kind.symbol() {
        "delta" => "\\delta",
        s => s,
    }
}

/// `T^{\alpha}{}_{\mu\nu}`: runs of equal variance share one script.
fn latex_slots(slots: &[Index]) -> String {
    let mut out = String::new();
    let mut k = 0;
    while k < slots.len() {
        let up = slots[k].up;
        let mut run = String::new();
        while k < slots.len() && slots[k].up == up {
            run.push_str(&latex_label(slots[k].label));
            k += 1;
        }
        if !out.is_empty() {
            out.push_str("{}");
        }
        let _ = write!(out, "{}{{{}}}", if up { '^' } else { '_' }, run);
    }
    out
}

fn latex_factor(f: &Factor) -> String {
    let mut out = String::new();
    for d in &f.derivs {
        let _ = write!(
            out,
            "D{}{{{}}}",
            if d.up { '^' } else { '_' },
            latex_label(d.label)
        );
    }
    out.push_str(latex_kind(f));
    out.push_str(&latex_slots(&f.slots));
    out
}

fn text_factor(f: &Factor) -> String {
    let idx = |i: &Index| format!("{}{}", if i.up { '^' } else { '_' }, text_label(i.label));
    let mut out = String::new();
    for d in &f.derivs {
        out.push('D');
        out.push_str(&idx(d));
        out.push(' ');
    }
    out.push_str(f.kind.symbol());
    for s in &f.slots {
        out.push_str(&idx(s));
    }
    out
}

fn latex_monomial(factors: &[Factor]) -> String {
    if factors.is_empty() {
        return "1".into();
    }
    factors
        .iter()
        .map(latex_factor)
        .collect::<Vec<_>>()
        .join("")
}

fn text_monomial(factors: &[Factor]) -> String {
    if factors.is_empty() {
        return "1".into();
    }
    factors
        .iter()
        .map(text_factor)
        .collect::<Vec<_>>()
        .join(" ")
}

fn latex_rational(r: &Rational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("\\frac{{{}}}{{{}}}", r.numer(), r.denom())
    }
}

fn latex_poly(p: &RPoly, mode: Mode) -> String {
    let atom = match mode {
        Mode::Symbolic => "(1-a)^{-n/2}",
        Mode::Fixed(_) => "\\ln(1-a)",
    };
    let vars = ["n", "a", atom];
    let mut items: Vec<_> = p.terms().collect();
    if items.is_empty() {
        return "0".into();
    }
    items.sort_by(|(e1, _), (e2, _)| {
        let d1: u16 = e1.iter().sum();
        let d2: u16 = e2.iter().sum();
        d2.cmp(&d1).then_with(|| e2.cmp(e1))
    });
    let mut s = String::new();
    for (k, (e, c)) in items.into_iter().enumerate() {
        let neg = is_negative(c);
        if k == 0 {
            if neg {
                s.push('-');
            }
        } else {
            s.push_str(if neg { " - " } else { " + " });
        }
        let abs = c.abs();
        let constant = e.iter().all(|&x| x == 0);
        if !abs.is_one() || constant {
            s.push_str(&latex_rational(&abs));
        }
        for (i, &pw) in e.iter().enumerate() {
            match pw {
                0 => {}
                1 => s.push_str(vars[i]),
                _ if i == 2 && mode == Mode::Symbolic => {
                    let _ = write!(s, "(1-a)^{{-{pw}n/2}}");
                }
                _ if i == 2 => {
                    let _ = write!(s, "\\ln^{{{pw}}}(1-a)");
                }
                _ => {
                    let _ = write!(s, "{}^{{{pw}}}", vars[i]);
                }
            }
        }
    }
    s
}

fn latex_den(f: DenFactor) -> String {
    match f {
        DenFactor::Param => "a".into(),
        DenFactor::OneMinusParam => "(1-a)".into(),
        DenFactor::DimPlus(0) => "n".into(),
        DenFactor::DimPlus(c) if c > 0 => format!("(n+{c})"),
        DenFactor::DimPlus(c) => format!("(n-{})", -c),
    }
}

pub fn latex_coeff(c: &RatFunc, mode: Mode) -> String {
    let num = latex_poly(c.numer(), mode);
    if c.denom().is_empty() {
        return num;
    }
    let den: String = c
        .denom()
        .iter()
        .map(|(f, &k)| {
            if k == 1 {
                latex_den(*f)
            } else {
                format!("{}^{{{k}}}", latex_den(*f))
            }
        })
        .collect();
    format!("\\frac{{{num}}}{{{den}}}")
}

pub fn text_coeff(c: &RatFunc, mode: Mode) -> String {
    c.fmt_with(names(mode))
}

fn structure_latex(s: &TensorExpr<RPoly>) -> (String, bool) {
    let mut parts = Vec::new();
    for (k, t) in s.terms.iter().enumerate() {
        let w = t
            .coeff
            .terms()
            .next()
            .map(|(_, c)| c.clone())
            .unwrap_or_else(Rational::one);
        let neg = is_negative(&w);
        let abs = w.abs();
        let sign = match (k, neg) {
            (0, false) => "",
            (0, true) => "-",
            (_, false) => " + ",
            (_, true) => " - ",
        };
        let weight = if abs.is_one() {
            String::new()
        } else {
            latex_rational(&abs)
        };
        parts.push(format!("{sign}{weight}{}", latex_monomial(&t.factors)));
    }
    (parts.concat(), s.terms.len() > 1)
}

fn structure_text(s: &TensorExpr<RPoly>) -> (String, bool) {
    let mut parts = Vec::new();
    for (k, t) in s.terms.iter().enumerate() {
        let w = t
            .coeff
            .terms()
            .next()
            .map(|(_, c)| c.clone())
            .unwrap_or_else(Rational::one);
        let neg = is_negative(&w);
        let abs = w.abs();
        let sign = match (k, neg) {
            (0, false) => "",
            (0, true) => "-",
            (_, false) => " + ",
            (_, true) => " - ",
        };
        let weight = if abs.is_one() {
            String::new()
        } else {
            format!("{} ", fmt_rational(&abs))
        };
        parts.push(format!("{sign}{weight}{}", text_monomial(&t.factors)));
    }
    (parts.concat(), s.terms.len() > 1)
}

fn head_indices_latex(e: &TensorExpr<RatFunc>) -> String {
    let free = e
        .terms
        .first()
        .map(|t| t.free_indices())
        .unwrap_or_default();
    if free.is_empty() {
        String::new()
    } else {
        format!(
            "^{{{}}}",
            free.iter()
                .map(|i| latex_label(i.label))
                .collect::<String>()
        )
    }
}

fn latex_block(lhs: &str, groups: &[CoeffGroup], mode: Mode, out: &mut String) {
    if groups.is_empty() {
        let _ = writeln!(out, "{lhs} = 0");
        return;
    }
    let _ = writeln!(out, "{lhs} = (4\\pi)^{{-n/2}}\\Big\\{{");
    for (i, g) in groups.iter().enumerate() {
        let (s, wrap) = structure_latex(&g.structure);
        let s = if wrap {
            format!("\\left({s}\\right)")
        } else {
            s
        };
        let _ = writeln!(
            out,
            "  {}C_{{{}}}\\,{s}",
            if i == 0 { "" } else { "+ " },
            i + 1
        );
    }
    out.push_str("\\Big\\}\n\n");
    for (i, g) in groups.iter().enumerate() {
        let _ = writeln!(out, "C_{{{}}} = {}\\\\", i + 1, latex_coeff(&g.coeff, mode));
    }
}

fn text_block(lhs: &str, groups: &[CoeffGroup], mode: Mode, out: &mut String) {
    if groups.is_empty() {
        let _ = writeln!(out, "{lhs} = 0");
        return;
    }
    let _ = writeln!(out, "{lhs} = (4 pi)^(-n/2) * (");
    for (i, g) in groups.iter().enumerate() {
        let (s, wrap) = structure_text(&g.structure);
        let s = if wrap { format!("({s})") } else { s };
        let _ = writeln!(out, "  + C{} * {s}", i + 1);
    }
    out.push_str(")\n");
    for (i, g) in groups.iter().enumerate() {
        let _ = writeln!(out, "C{} = {}", i + 1, text_coeff(&g.coeff, mode));
    }
}

fn atom_text(mode: Mode) -> (&'static str, &'static str) {
    match mode {
        Mode::Symbolic => ("A", "(1-a)^(-n/2)"),
        Mode::Fixed(_) => ("L", "ln(1-a)"),
    }
}

/// A bare expression: one term per line, `0` when empty.
pub fn emit_expression(e: &TensorExpr<RatFunc>, mode: Mode, format: Format) -> String {
    if e.is_zero() {
        return "0".into();
    }
    match format {
        Format::Json => serde_json::to_string_pretty(&expr_json(e, mode)).expect("json"),
        Format::Text => e
            .terms
            .iter()
            .map(|t| {
                format!(
                    "({}) * {}",
                    text_coeff(&t.coeff, mode),
                    text_monomial(&t.factors)
                )
            })
            .collect::<Vec<_>>()
            .join("\n+ "),
        Format::Latex => e
            .terms
            .iter()
            .map(|t| {
                format!(
                    "{}\\,{}",
                    latex_coeff(&t.coeff, mode),
                    latex_monomial(&t.factors)
                )
            })
            .collect::<Vec<_>>()
            .join("\n+ "),
    }
}

/// The full report (expression, trace, coefficient lists); timings are not
/// part of the output so that it is reproducible.
pub fn emit_report(r: &Report, format: Format) -> String {
    match format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(&report_json(r)).expect("json");
            s.push('\n');
            s
        }
        Format::Text => {
            let mut out = String::new();
            let m = r.order;
            let free = r
                .expression
                .terms
                .first()
                .map(|t| t.free_indices())
                .unwrap_or_default();
            let idx: String = free
                .iter()
                .map(|i| format!("^{}", text_label(i.label)))
                .collect();
            text_block(&format!("E_{m}{idx}"), &r.groups, r.mode, &mut out);
            if let Some(tr) = &r.trace {
                out.push('\n');
                text_block(&format!("tr E_{m}"), &r.trace_groups, r.mode, &mut out);
                let _ = tr;
            }
            let (sym, val) = atom_text(r.mode);
            let uses_atom = r
                .groups
                .iter()
                .chain(&r.trace_groups)
                .any(|g| g.coeff.contains(Var::Atom));
            if uses_atom {
                let _ = writeln!(out, "\nwhere {sym} = {val}");
            }
            if let Mode::Fixed(n0) = r.mode {
                let _ = writeln!(out, "dimension n = {n0}");
            }
            if let AParam::Value(v) = &r.operator.a {
                let _ = writeln!(out, "a = {}", fmt_rational(v));
            }
            for n in &r.notes {
                let _ = writeln!(out, "note: {n}");
            }
            out
        }
        Format::Latex => {
            let mut out = String::new();
            let m = r.order;
            latex_block(
                &format!("E_{{{m}}}{}", head_indices_latex(&r.expression)),
                &r.groups,
                r.mode,
                &mut out,
            );
            if r.trace.is_some() {
                out.push('\n');
                latex_block(
                    &format!("{{\\rm tr_L}}\\,E_{{{m}}}"),
                    &r.trace_groups,
                    r.mode,
                    &mut out,
                );
            }
            if let Mode::Fixed(n0) = r.mode {
                let _ = writeln!(out, "% n = {n0}");
            }
            if let AParam::Value(v) = &r.operator.a {
                let _ = writeln!(out, "% a = {}", fmt_rational(v));
            }
            for n in &r.notes {
                let _ = writeln!(out, "% {n}");
            }
            out
        }
    }
}

fn den_name(f: DenFactor) -> String {
    match f {
        DenFactor::Param => "a".into(),
        DenFactor::OneMinusParam => "1-a".into(),
        DenFactor::DimPlus(0) => "n".into(),
        DenFactor::DimPlus(c) if c > 0 => format!("n+{c}"),
        DenFactor::DimPlus(c) => format!("n-{}", -c),
    }
}

fn coeff_json(c: &RatFunc, mode: Mode) -> Value {
    let den: Vec<Value> = c
        .denom()
        .iter()
        .map(|(f, &k)| json!([den_name(*f), k]))
        .collect();
    json!({"numerator": c.numer().fmt_with(names(mode)), "denominator": den})
}

fn index_text(i: &Index) -> String {
    let l = match i.label {
        Label::Free(k) => format!("m{k}"),
        Label::Dummy(k) => format!("d{k}"),
    };
    format!("{}{l}", if i.up { '^' } else { '_' })
}

fn factor_json(f: &Factor) -> Value {
    json!({
        "kind": f.kind.symbol(),
        "derivatives": f.derivs.iter().map(index_text).collect::<Vec<_>>(),
        "slots": f.slots.iter().map(index_text).collect::<Vec<_>>(),
    })
}

pub fn expr_json(e: &TensorExpr<RatFunc>, mode: Mode) -> Value {
    if e.is_zero() {
        return json!(0);
    }
    Value::Array(
        e.terms
            .iter()
            .map(|t| json!({"coefficient": coeff_json(&t.coeff, mode), "factors": t.factors.iter().map(factor_json).collect::<Vec<_>>()}))
            .collect(),
    )
}

fn groups_json(groups: &[CoeffGroup], mode: Mode) -> Value {
    Value::Array(
        groups
            .iter()
            .map(|g| {
                let s: Vec<Value> = g
                    .structure
                    .terms
                    .iter()
                    .map(|t| {
                        let w = t.coeff.terms().next().map(|(_, c)| c.clone()).unwrap_or_else(Rational::one);
                        json!({"weight": fmt_rational(&w), "factors": t.factors.iter().map(factor_json).collect::<Vec<_>>()})
                    })
                    .collect();
                json!({"coefficient": coeff_json(&g.coeff, mode), "structure": s})
            })
            .collect(),
    )
}

pub fn report_json(r: &Report) -> Value {
    let op = &r.operator;
    let a = match &op.a {
        AParam::Symbolic => "symbolic".to_string(),
        AParam::Value(v) => fmt_rational(v),
    };
    let endo = match &op.endo {
        Endomorphism::Absent => "absent".to_string(),
        Endomorphism::Generic => "present".to_string(),
        Endomorphism::Bound(b) => format!("bound: {}", heatker_core::expr::write_expr(b)),
    };
    let (sym, val) = atom_text(r.mode);
    let dim = match r.mode {
        Mode::Symbolic => json!("symbolic"),
        Mode::Fixed(n0) => json!(n0),
    };
    json!({
        "schema": "heatker.result",
        "version": 1,
        "operator": {"name": op.name, "rank": op.rank, "a": a, "endomorphism": endo, "torsion": op.flags.torsion, "gauge": op.flags.gauge},
        "order": r.order,
        "dimension": dim,
        "atom": {"symbol": sym, "value": val},
        "prefactor": "(4*pi)^(-n/2)",
        "expression": expr_json(&r.expression, r.mode),
        "trace": r.trace.as_ref().map(|t| expr_json(t, r.mode)),
        "groups": groups_json(&r.groups, r.mode),
        "trace_groups": groups_json(&r.trace_groups, r.mode),
        "notes": r.notes,
    })
}

#[derive(Debug, Error)]
pub enum ReadError {
    #[error("invalid json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unexpected document shape: {0}")]
    Shape(String),
}

fn shape(msg: impl Into<String>) -> ReadError {
    ReadError::Shape(msg.into())
}

/// Result document read back from JSON.
#[derive(Clone, Debug, PartialEq)]
pub struct Document {
    pub mode: Mode,
    pub order: usize,
    pub expression: TensorExpr<RatFunc>,
    pub trace: Option<TensorExpr<RatFunc>>,
}

fn read_den(name: &str) -> Option<DenFactor> {
    match name {
        "a" => Some(DenFactor::Param),
        "1-a" => Some(DenFactor::OneMinusParam),
        "n" => Some(DenFactor::DimPlus(0)),
        _ => {
            let rest = name.strip_prefix('n')?;
            let c: i32 = rest.strip_prefix('+').unwrap_or(rest).parse().ok()?;
            Some(DenFactor::DimPlus(c))
        }
    }
}

fn read_coeff(v: &Value, mode: Mode) -> Result<RatFunc, ReadError> {
    let num = v["numerator"]
        .as_str()
        .ok_or_else(|| shape("coefficient without numerator"))?;
    let num = RPoly::parse_with(num, names(mode)).map_err(shape)?;
    let mut den = BTreeMap::new();
    for d in v["denominator"]
        .as_array()
        .ok_or_else(|| shape("coefficient without denominator"))?
    {
        let name = d[0]
            .as_str()
            .ok_or_else(|| shape("denominator factor name"))?;
        let f =
            read_den(name).ok_or_else(|| shape(format!("unknown denominator factor '{name}'")))?;
        let k = d[1].as_u64().ok_or_else(|| shape("denominator power"))? as u32;
        den.insert(f, k);
    }
    Ok(RatFunc::new(num, den))
}

fn read_factor(v: &Value) -> Result<Factor, ReadError> {
    let strs = |key: &str| -> Result<String, ReadError> {
        Ok(v[key]
            .as_array()
            .ok_or_else(|| shape(format!("factor without {key}")))?
            .iter()
            .map(|x| x.as_str().unwrap_or("?").to_string())
            .collect())
    };
    let kind = v["kind"]
        .as_str()
        .ok_or_else(|| shape("factor without kind"))?;
    parse_factor(&format!(
        "{kind}[{}|{}]",
        strs("derivatives")?,
        strs("slots")?
    ))
    .map_err(|e| shape(e.to_string()))
}

pub fn read_expression(v: &Value, mode: Mode) -> Result<TensorExpr<RatFunc>, ReadError> {
    if v.as_i64() == Some(0) {
        return Ok(TensorExpr::zero());
    }
    let terms = v
        .as_array()
        .ok_or_else(|| shape("expression must be 0 or an array"))?;
    let mut out = Vec::with_capacity(terms.len());
    for t in terms {
        let coeff = read_coeff(&t["coefficient"], mode)?;
        let factors = t["factors"]
            .as_array()
            .ok_or_else(|| shape("term without factors"))?
            .iter()
            .map(read_factor)
            .collect::<Result<Vec<_>, _>>()?;
        out.push(Term::new(coeff, factors));
    }
    Ok(TensorExpr::from_terms(out))
}

pub fn read_json(text: &str) -> Result<Document, ReadError> {
    let v: Value = serde_json::from_str(text)?;
    if v["schema"] != "heatker.result" {
        return Err(shape("not a heatker result"));
    }
    if v["version"].as_u64() != Some(1) {
        return Err(shape(format!("unsupported version {}", v["version"])));
    }
    let mode = match &v["dimension"] {
        Value::String(s) if s == "symbolic" => Mode::Symbolic,
        Value::Number(n) => Mode::Fixed(n.as_i64().ok_or_else(|| shape("dimension"))?),
        _ => return Err(shape("dimension")),
    };
    let order = v["order"].as_u64().ok_or_else(|| shape("order"))? as usize;
    let expression = read_expression(&v["expression"], mode)?;
    let trace = match &v["trace"] {
        Value::Null => None,
        t => Some(read_expression(t, mode)?),
    };
    Ok(Document {
        mode,
        order,
        expression,
        trace,
    })
}

/// Weight of a structure term written as `p/q`.
pub fn parse_weight(s: &str) -> Option<Rational> {
    parse_rational(s)
}

/// Renders a single factor in the stable serial form.
pub fn serial_factor(f: &Factor) -> String {
    write_factor(f)
}
