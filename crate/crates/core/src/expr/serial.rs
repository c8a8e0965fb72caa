//! Stable plain-text serialization.
//!
//! ```text
//! expr   := "0" | term ("\n" term)*
//! term   := "{" coeff "}" (" " factor)*
//! factor := kind "[" index* "|" index* "]"      derivatives | slots
//! index  := ("^" | "_") label
//! label  := "m" digits                           free
//!         | "d" digits                           dummy
//! kind   := "g" | "delta" | "k" | "T" | "R" | "W" | "X" | "l" | "I"
//! ```
//!
//! Example: `{-1/2} k[|_d0] T[|^d0_m0_m1]`.

use super::{Coeff, ExprError, Factor, Index, Kind, Label, TensorExpr, Term};
use crate::poly::{RPoly, VarNames};
use crate::ratfunc::RatFunc;

/// Text form of a coefficient inside `{...}`.
pub trait CoeffText: Coeff {
    fn to_text(&self) -> String;
    fn from_text(s: &str) -> Result<Self, ExprError>;
}

impl CoeffText for RPoly {
    fn to_text(&self) -> String {
        self.fmt_with(VarNames::SYMBOLIC)
    }

    fn from_text(s: &str) -> Result<Self, ExprError> {
        RPoly::parse(s).map_err(ExprError::Parse)
    }
}

impl CoeffText for RatFunc {
    fn to_text(&self) -> String {
        let den = self.denom_poly();
        if self.denom().is_empty() {
            self.numer().to_string()
        } else {
            format!("({}) / ({})", self.numer(), den)
        }
    }

    fn from_text(s: &str) -> Result<Self, ExprError> {
        match split_top_level_div(s) {
            Some((n, d)) => {
                let n = RPoly::parse(n).map_err(ExprError::Parse)?;
                let d = RPoly::parse(d).map_err(ExprError::Parse)?;
                RatFunc::from_poly(n)
                    .checked_div(&RatFunc::from_poly(d))
                    .ok_or_else(|| {
                        ExprError::Parse("denominator outside the supported factor family".into())
                    })
            }
            None => Ok(RatFunc::from_poly(
                RPoly::parse(s).map_err(ExprError::Parse)?,
            )),
        }
    }
}

fn split_top_level_div(s: &str) -> Option<(&str, &str)> {
    let mut depth = 0i32;
    for (i, c) in s.char_indices() {
        match c {
            '(' => depth += 1,
            ')' => depth -= 1,
            '/' if depth == 0 => {
                let (l, r) = (s[..i].trim(), s[i + 1..].trim());
                // `1/2` style constants are handled by the polynomial parser
                if l.starts_with('(') && r.starts_with('(') {
                    return Some((l, r));
                }
            }
            _ => {}
        }
    }
    None
}

fn write_label(l: Label) -> String {
    match l {
        Label::Free(i) => format!("m{i}"),
        Label::Dummy(i) => format!("d{i}"),
    }
}

fn write_index(i: &Index) -> String {
    format!("{}{}", if i.up { '^' } else { '_' }, write_label(i.label))
}

pub fn write_factor(f: &Factor) -> String {
    let d: String = f.derivs.iter().map(write_index).collect();
    let s: String = f.slots.iter().map(write_index).collect();
    format!("{}[{}|{}]", f.kind.symbol(), d, s)
}

pub fn write_term<C: CoeffText>(t: &Term<C>) -> String {
    let mut out = format!("{{{}}}", t.coeff.to_text());
    for f in &t.factors {
        out.push(' ');
        out.push_str(&write_factor(f));
    }
    out
}

pub fn write_expr<C: CoeffText>(e: &TensorExpr<C>) -> String {
    if e.is_zero() {
        return "0".to_string();
    }
    e.terms
        .iter()
        .map(write_term)
        .collect::<Vec<_>>()
        .join("\n")
}

fn parse_indices(s: &str) -> Result<Vec<Index>, ExprError> {
    let mut out = Vec::new();
    let b = s.as_bytes();
    let mut i = 0;
    while i < b.len() {
        let up = match b[i] {
            b'^' => true,
            b'_' => false,
            c => {
                return Err(ExprError::Parse(format!(
                    "expected ^ or _, found '{}'",
                    c as char
                )))
            }
        };
        i += 1;
        let kind = *b
            .get(i)
            .ok_or_else(|| ExprError::Parse("truncated index".into()))?;
        i += 1;
        let start = i;
        while i < b.len() && b[i].is_ascii_digit() {
            i += 1;
        }
        let k: u16 = s[start..i]
            .parse()
            .map_err(|_| ExprError::Parse(format!("bad label in '{s}'")))?;
        let label = match kind {
            b'm' => Label::Free(k),
            b'd' => Label::Dummy(k),
            c => {
                return Err(ExprError::Parse(format!(
                    "unknown label class '{}'",
                    c as char
                )))
            }
        };
        out.push(Index { label, up });
    }
    Ok(out)
}

pub fn parse_factor(s: &str) -> Result<Factor, ExprError> {
    let s = s.trim();
    let open = s
        .find('[')
        .ok_or_else(|| ExprError::Parse(format!("missing '[' in '{s}'")))?;
    if !s.ends_with(']') {
        return Err(ExprError::Parse(format!("missing ']' in '{s}'")));
    }
    let kind = Kind::from_symbol(&s[..open])
        .ok_or_else(|| ExprError::Parse(format!("unknown kind '{}'", &s[..open])))?;
    let body = &s[open + 1..s.len() - 1];
    let (d, sl) = body
        .split_once('|')
        .ok_or_else(|| ExprError::Parse(format!("missing '|' in '{s}'")))?;
    let derivs = parse_indices(d)?;
    let slots = parse_indices(sl)?;
    if !kind.slot_counts().contains(&slots.len()) {
        return Err(ExprError::Parse(format!(
            "{} cannot carry {} slots",
            kind.symbol(),
            slots.len()
        )));
    }
    Ok(Factor::new(kind, &derivs, &slots))
}

pub fn parse_term<C: CoeffText>(s: &str) -> Result<Term<C>, ExprError> {
    let s = s.trim();
    if !s.starts_with('{') {
        return Err(ExprError::Parse(format!(
            "term must start with '{{': '{s}'"
        )));
    }
    let close = s
        .find('}')
        .ok_or_else(|| ExprError::Parse("unterminated coefficient".into()))?;
    let coeff = C::from_text(&s[1..close])?;
    let factors = s[close + 1..]
        .split_whitespace()
        .map(parse_factor)
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Term::new(coeff, factors))
}

pub fn parse_expr<C: CoeffText>(s: &str) -> Result<TensorExpr<C>, ExprError> {
    let s = s.trim();
    if s == "0" || s.is_empty() {
        return Ok(TensorExpr::zero());
    }
    let terms = s
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(parse_term)
        .collect::<Result<Vec<_>, _>>()?;
    Ok(TensorExpr { terms })
}
