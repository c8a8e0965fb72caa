//! Operator presets and the key-value operator description format.
//!
//! ```text
//! # comments run to the end of the line
//! name=my-operator
//! rank=2; a=symbolic; X=present
//! torsion=on; gauge=on
//! ```
//!
//! Keys: `name`, `rank` (0 or 2), `order` (2), `a` (`symbolic` or a
//! rational), `alpha` (sets `a = 1 - 1/alpha`), `X` (`present`, `absent`,
//! `ricci`, `field-strength`), `torsion` and `gauge` (`on`/`off`).

use std::fmt;

use heatker_core::expr::{parse_expr, TensorExpr};
use heatker_core::num::parse_rational;
use heatker_core::rewrite::Background;
use heatker_core::sigma::{AParam, Endomorphism, OperatorSpec, SigmaError};
use heatker_core::{RPoly, Rational};
use num_traits::{One, Zero};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum OperatorError {
    #[error("{0}")]
    Parse(ParseError),
    #[error("unsupported operator: {0}")]
    UnsupportedShape(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "line {}, column {}: {}",
            self.line, self.column, self.message
        )
    }
}

impl std::error::Error for ParseError {}

impl From<SigmaError> for OperatorError {
    fn from(e: SigmaError) -> Self {
        OperatorError::UnsupportedShape(e.to_string())
    }
}

pub const PRESETS: [&str; 4] = [
    "minimal-scalar",
    "nonminimal",
    "yang-mills",
    "maxwell-gravity",
];

/// `X_{μν} = R^α_{μαν}`.
pub fn ricci_endomorphism() -> TensorExpr<RPoly> {
    parse_expr("{1} R[|^d0_m0_d0_m1]").expect("static expression")
}

/// `X_{μν} = -2 W_{μν}`.
pub fn field_strength_endomorphism() -> TensorExpr<RPoly> {
    parse_expr("{-2} W[|_m0_m1]").expect("static expression")
}

fn err(line: usize, column: usize, message: impl Into<String>) -> OperatorError {
    OperatorError::Parse(ParseError {
        line,
        column,
        message: message.into(),
    })
}

/// `a = 1 - 1/alpha`.
fn a_from_alpha(alpha: &Rational) -> AParam {
    AParam::Value(Rational::one() - alpha.recip())
}

fn spec(name: &str, rank: u8, a: AParam, endo: Endomorphism, flags: Background) -> OperatorSpec {
    OperatorSpec {
        name: name.to_string(),
        rank,
        order: 2,
        a,
        endo,
        flags,
    }
}

/// Parses a preset line (`yang-mills alpha=2`) or a key-value description.
pub fn parse_operator(text: &str) -> Result<OperatorSpec, OperatorError> {
    let first = text
        .lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .find(|l| !l.is_empty())
        .unwrap_or("");
    let head = first.split_whitespace().next().unwrap_or("");
    let op = if PRESETS.contains(&head) {
        parse_preset(text)?
    } else {
        parse_keyvalue(text)?
    };
    op.validate()?;
    if op.rank == 0 && matches!(op.endo, Endomorphism::Bound(_)) {
        return Err(OperatorError::UnsupportedShape(
            "a bound endomorphism needs two Lorentz slots".into(),
        ));
    }
    Ok(op)
}

fn parse_preset(text: &str) -> Result<OperatorSpec, OperatorError> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.split('#').next().unwrap_or("").trim().is_empty());
    let (lno, line) = lines.next().expect("caller checked a non-empty line");
    if let Some((extra, _)) = lines.next() {
        return Err(err(extra + 1, 1, "a preset takes a single line"));
    }
    let line = line.split('#').next().unwrap_or("");
    let mut words = word_spans(line).into_iter();
    let (_, name) = words.next().expect("preset name");
    let mut alpha: Option<Rational> = None;
    for (col, w) in words {
        let Some((k, v)) = w.split_once('=') else {
            return Err(err(
                lno + 1,
                col,
                format!("expected key=value, found '{w}'"),
            ));
        };
        match k {
            "alpha" if matches!(name, "yang-mills" | "maxwell-gravity") => {
                let v = parse_rational(v).ok_or_else(|| {
                    err(lno + 1, col + k.len() + 1, format!("bad rational '{v}'"))
                })?;
                if v.is_zero() {
                    return Err(err(lno + 1, col + k.len() + 1, "alpha must be nonzero"));
                }
                alpha = Some(v);
            }
            _ => {
                return Err(err(
                    lno + 1,
                    col,
                    format!("unknown parameter '{k}' for preset {name}"),
                ))
            }
        }
    }
    let alpha = alpha.unwrap_or_else(Rational::one);
    Ok(match name {
        "minimal-scalar" => spec(
            name,
            0,
            AParam::Value(Rational::zero()),
            Endomorphism::Generic,
            Background::FULL,
        ),
        "nonminimal" => spec(
            name,
            2,
            AParam::Symbolic,
            Endomorphism::Generic,
            Background::FULL,
        ),
        "yang-mills" => spec(
            name,
            2,
            a_from_alpha(&alpha),
            Endomorphism::Bound(field_strength_endomorphism()),
            Background::FULL,
        ),
        "maxwell-gravity" => spec(
            name,
            2,
            a_from_alpha(&alpha),
            Endomorphism::Bound(ricci_endomorphism()),
            Background {
                torsion: true,
                gauge: false,
            },
        ),
        _ => unreachable!("checked against PRESETS"),
    })
}

/// Whitespace-separated words with their 1-based columns.
fn word_spans(line: &str) -> Vec<(usize, &str)> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, c) in line.char_indices() {
        match (c.is_whitespace(), start) {
            (true, Some(s)) => {
                out.push((s + 1, &line[s..i]));
                start = None;
            }
            (false, None) => start = Some(i),
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push((s + 1, &line[s..]));
    }
    out
}

fn on_off(v: &str, line: usize, col: usize) -> Result<bool, OperatorError> {
    match v {
        "on" | "true" | "yes" => Ok(true),
        "off" | "false" | "no" => Ok(false),
        _ => Err(err(line, col, format!("expected on/off, found '{v}'"))),
    }
}

fn parse_keyvalue(text: &str) -> Result<OperatorSpec, OperatorError> {
    let mut name = "custom".to_string();
    let mut rank: Option<u8> = None;
    let mut order = 2u8;
    let mut a: Option<AParam> = None;
    let mut endo = Endomorphism::Generic;
    let mut flags = Background::FULL;
    let mut seen: Vec<String> = Vec::new();
    for (lno, raw) in text.lines().enumerate() {
        let line = lno + 1;
        let body = raw.split('#').next().unwrap_or("");
        let mut offset = 0;
        for item in body.split(';') {
            let col0 = offset + 1;
            offset += item.len() + 1;
            let lead = item.len() - item.trim_start().len();
            let item_t = item.trim();
            if item_t.is_empty() {
                continue;
            }
            let col = col0 + lead;
            let Some(eq) = item_t.find('=') else {
                return Err(err(
                    line,
                    col,
                    format!("expected key=value, found '{item_t}'"),
                ));
            };
            let rhs = &item_t[eq + 1..];
            let vcol = col + eq + 1 + (rhs.len() - rhs.trim_start().len());
            let (k, v) = (item_t[..eq].trim(), rhs.trim());
            if seen.iter().any(|s| s == k) {
                return Err(err(line, col, format!("duplicate key '{k}'")));
            }
            seen.push(k.to_string());
            match k {
                "name" => name = v.to_string(),
                "rank" => {
                    rank = Some(match v {
                        "0" => 0,
                        "2" => 2,
                        _ => {
                            return Err(OperatorError::UnsupportedShape(format!(
                                "rank {v}: only scalar (0) and vector (2) sections"
                            )))
                        }
                    })
                }
                "order" => {
                    order = v
                        .parse()
                        .map_err(|_| err(line, vcol, format!("bad order '{v}'")))?;
                }
                "a" => {
                    if a.is_some() {
                        return Err(err(line, col, "both a and alpha given"));
                    }
                    a = Some(if v == "symbolic" {
                        AParam::Symbolic
                    } else {
                        AParam::Value(
                            parse_rational(v)
                                .ok_or_else(|| err(line, vcol, format!("bad rational '{v}'")))?,
                        )
                    });
                }
                "alpha" => {
                    if a.is_some() {
                        return Err(err(line, col, "both a and alpha given"));
                    }
                    let al = parse_rational(v)
                        .ok_or_else(|| err(line, vcol, format!("bad rational '{v}'")))?;
                    if al.is_zero() {
                        return Err(err(line, vcol, "alpha must be nonzero"));
                    }
                    a = Some(a_from_alpha(&al));
                }
                "X" => {
                    endo = match v {
                        "present" => Endomorphism::Generic,
                        "absent" => Endomorphism::Absent,
                        "ricci" => Endomorphism::Bound(ricci_endomorphism()),
                        "field-strength" => Endomorphism::Bound(field_strength_endomorphism()),
                        _ => return Err(err(line, vcol, format!("unknown X form '{v}'"))),
                    }
                }
                "torsion" => flags.torsion = on_off(v, line, vcol)?,
                "gauge" => flags.gauge = on_off(v, line, vcol)?,
                _ => return Err(err(line, col, format!("unknown key '{k}'"))),
            }
        }
    }
    let Some(rank) = rank else {
        return Err(err(1, 1, "missing key 'rank'"));
    };
    let a = a.unwrap_or(if rank == 0 {
        AParam::Value(Rational::zero())
    } else {
        AParam::Symbolic
    });
    Ok(OperatorSpec {
        name,
        rank,
        order,
        a,
        endo,
        flags,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn yang_mills_feynman_gauge_is_minimal() {
        let op = parse_operator("yang-mills alpha=1").unwrap();
        assert!(op.a.is_zero());
        assert_eq!(op.rank, 2);
    }

    #[test]
    fn columns_point_at_the_offending_value() {
        let e = parse_operator("rank=2\ntorsion=maybe").unwrap_err();
        assert_eq!(e, err(2, 9, "expected on/off, found 'maybe'"));
    }
}
