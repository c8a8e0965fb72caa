//! Momentum and contour integrals of coincidence limits.
//!
//! For `r = 1`,
//!
//! ```text
//! J(k^{2p} k_{μ1}..k_{μ2s} / ((k²-λ)^l ((1-a)k²-λ)^m))
//!   = g_{{μ1..μ2s}} (s+n/2)_p / (2^s (l+m-1)!) F(m, p+s+n/2; l+m; a)
//! ```
//!
//! times the global `(4π)^{-n/2}`, which is kept out of the coefficients.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{
    contract_metric, Coeff, ExprError, Factor, Index, Kind, Label, ScalarCoeff, TensorExpr, Term,
};
use crate::num::{factorial, int, Rational};
use crate::poly::{RPoly, Var};

#[derive(Debug, Error)]
pub enum IntegrateError {
    #[error("odd number of indices ({0}) cannot be paired")]
    OddIndexCount(usize),
    #[error("integrand is not of J form: {0}")]
    UnmatchedIntegrand(String),
    #[error(transparent)]
    Expr(#[from] ExprError),
}

/// `F(first, b_shift + n/2; c; a)`. `first = 0` is the constant 1 and is
/// stored as [`FAtom::ONE`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FAtom {
    pub first: u16,
    pub b_shift: u16,
    pub c: u16,
}

impl FAtom {
    pub const ONE: FAtom = FAtom {
        first: 0,
        b_shift: 0,
        c: 0,
    };

    pub fn new(first: u16, b_shift: u16, c: u16) -> Self {
        if first == 0 {
            Self::ONE
        } else {
            FAtom { first, b_shift, c }
        }
    }
}

impl fmt::Display for FAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if *self == Self::ONE {
            return f.write_str("1");
        }
        write!(f, "F({}, n/2+{}; {}; a)", self.first, self.b_shift, self.c)
    }
}

/// Linear combination of hypergeometric atoms with polynomial coefficients
/// in `n` and `a`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct HyperCoeff {
    pub atoms: BTreeMap<FAtom, RPoly>,
}

impl HyperCoeff {
    pub fn atom(f: FAtom, c: RPoly) -> Self {
        let mut h = HyperCoeff::default();
        h.add_atom(f, &c);
        h
    }

    pub fn add_atom(&mut self, f: FAtom, c: &RPoly) {
        if c.is_zero() {
            return;
        }
        let e = self.atoms.entry(f).or_default();
        *e += c;
        if e.is_zero() {
            self.atoms.remove(&f);
        }
    }
}

impl Coeff for HyperCoeff {
    fn zero() -> Self {
        HyperCoeff::default()
    }

    fn is_zero(&self) -> bool {
        self.atoms.is_empty()
    }

    fn add_assign(&mut self, rhs: &Self) {
        for (f, c) in &rhs.atoms {
            self.add_atom(*f, c);
        }
    }

    fn mul_poly(&mut self, p: &RPoly) {
        for c in self.atoms.values_mut() {
            *c = &*c * p;
        }
        self.atoms.retain(|_, c| !c.is_zero());
    }

    fn from_poly_coeff(p: RPoly) -> Self {
        Self::atom(FAtom::ONE, p)
    }
}

impl fmt::Display for HyperCoeff {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.atoms.is_empty() {
            return f.write_str("0");
        }
        let parts: Vec<String> = self
            .atoms
            .iter()
            .map(|(a, c)| format!("({c})*{a}"))
            .collect();
        f.write_str(&parts.join(" + "))
    }
}

/// Sum over the `(2s-1)!!` pairings of `indices` into metric factors.
pub fn symmetrized_metric(indices: &[Index]) -> Result<TensorExpr<RPoly>, IntegrateError> {
    if indices.len() % 2 == 1 {
        return Err(IntegrateError::OddIndexCount(indices.len()));
    }
    Ok(TensorExpr::from_terms(
        pairings(indices)
            .into_iter()
            .map(|fs| Term::new(RPoly::one(), fs))
            .collect(),
    ))
}

fn pairings(indices: &[Index]) -> Vec<Vec<Factor>> {
    let Some((&first, rest)) = indices.split_first() else {
        return vec![Vec::new()];
    };
    let mut out = Vec::new();
    for j in 0..rest.len() {
        let other = rest[j];
        let remaining: Vec<Index> = rest
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != j)
            .map(|(_, x)| *x)
            .collect();
        let kind = if first.up == other.up {
            Kind::Metric
        } else {
            Kind::Delta
        };
        for mut tail in pairings(&remaining) {
            tail.insert(0, Factor::plain(kind, &[first, other]));
            out.push(tail);
        }
    }
    out
}

/// Removes contracted `k·k` pairs; returns the remaining factors, the number
/// of removed pairs and the open wave-vector indices.
pub fn fold_wave_squares(factors: &[Factor]) -> (Vec<Factor>, u16, Vec<Index>) {
    let mut rest = Vec::new();
    let mut waves: Vec<Index> = Vec::new();
    for f in factors {
        if f.kind == Kind::Wave {
            waves.push(f.slots[0]);
        } else {
            rest.push(f.clone());
        }
    }
    let mut open = Vec::new();
    let mut p = 0;
    let mut used = vec![false; waves.len()];
    for i in 0..waves.len() {
        if used[i] {
            continue;
        }
        match (i + 1..waves.len()).find(|&j| !used[j] && waves[j].label == waves[i].label) {
            Some(j) => {
                used[j] = true;
                p += 1;
            }
            None => open.push(waves[i]),
        }
        used[i] = true;
    }
    (rest, p, open)
}

/// `(x + n/2)_p` as a polynomial in `n`.
fn pochhammer_half_n(x: u16, p: u16) -> RPoly {
    let half_n = RPoly::var(Var::Dim).scale(&Rational::new(1.into(), 2.into()));
    (0..p).fold(RPoly::one(), |acc, j| {
        &acc * &(&half_n + &RPoly::constant(int((x + j) as i64)))
    })
}

/// `J` of one coincidence-limit term.
pub fn integrate_term(t: &Term<ScalarCoeff>) -> Result<Vec<Term<HyperCoeff>>, IntegrateError> {
    if let Some(f) = t
        .factors
        .iter()
        .find(|f| matches!(f.kind, Kind::Phase | Kind::Transport))
    {
        return Err(IntegrateError::UnmatchedIntegrand(format!(
            "unresolved {} factor",
            f.kind.symbol()
        )));
    }
    let (rest, p_fold, open) = fold_wave_squares(&t.factors);
    if open.len() % 2 == 1 {
        return Ok(Vec::new());
    }
    let s = (open.len() / 2) as u16;
    let mut coeff = HyperCoeff::default();
    for (key, c) in &t.coeff.atoms {
        if key.i {
            return Err(IntegrateError::UnmatchedIntegrand("odd power of i".into()));
        }
        if key.l < 0 || key.m < 0 || key.l + key.m == 0 {
            return Err(IntegrateError::UnmatchedIntegrand(format!(
                "propagator powers ({}, {})",
                key.l, key.m
            )));
        }
        let (l, m) = (key.l as u16, key.m as u16);
        let p = key.p + p_fold;
        let pref = pochhammer_half_n(s, p).scale(
            &(Rational::from_integer(1.into())
                / (Rational::from_integer(num_bigint::BigInt::from(1u64 << s))
                    * factorial((l + m - 1) as u32))),
        );
        coeff.add_atom(FAtom::new(m, p + s, l + m), &(&pref * c));
    }
    if coeff.is_zero() {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    for pairing in pairings(&open) {
        let mut factors = pairing;
        factors.extend(rest.iter().cloned());
        out.push(Term {
            coeff: coeff.clone(),
            factors,
        });
    }
    Ok(out)
}

/// `E_m` in hypergeometric form from `[σ_m]`.
pub fn integrate_expression(
    e: &TensorExpr<ScalarCoeff>,
) -> Result<TensorExpr<HyperCoeff>, IntegrateError> {
    let mut out = Vec::new();
    for t in &e.terms {
        out.extend(integrate_term(t)?);
    }
    Ok(contract_metric(&TensorExpr::from_terms(out))?)
}

/// Labels of the open wave-vector indices of `t` (for diagnostics).
pub fn open_wave_labels<C: Coeff>(t: &Term<C>) -> Vec<Label> {
    fold_wave_squares(&t.factors)
        .2
        .into_iter()
        .map(|i| i.label)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{MomKey, ScalarCoeff};

    fn k(l: Label, up: bool) -> Factor {
        Factor::plain(Kind::Wave, &[Index { label: l, up }])
    }

    #[test]
    fn pairing_counts() {
        let idx: Vec<Index> = (0..6).map(|i| Index::down(Label::Free(i))).collect();
        assert_eq!(symmetrized_metric(&idx[..2]).unwrap().len(), 1);
        assert_eq!(symmetrized_metric(&idx[..4]).unwrap().len(), 3);
        assert_eq!(symmetrized_metric(&idx).unwrap().len(), 15);
        assert!(matches!(
            symmetrized_metric(&idx[..3]),
            Err(IntegrateError::OddIndexCount(3))
        ));
    }

    #[test]
    fn simple_propagator() {
        let t = Term::new(
            ScalarCoeff::atom(MomKey::new(false, 0, 1, 0), RPoly::one()),
            vec![],
        );
        let e = integrate_term(&t).unwrap();
        assert_eq!(e.len(), 1);
        assert_eq!(e[0].coeff, HyperCoeff::atom(FAtom::ONE, RPoly::one()));
    }

    #[test]
    fn two_open_indices() {
        let t = Term::new(
            ScalarCoeff::atom(MomKey::new(false, 0, 1, 1), RPoly::one()),
            vec![k(Label::Free(0), false), k(Label::Free(1), false)],
        );
        let e = integrate_term(&t).unwrap();
        assert_eq!(
            e[0].coeff,
            HyperCoeff::atom(FAtom::new(1, 1, 2), RPoly::parse("1/2").unwrap())
        );
        assert_eq!(
            e[0].factors,
            vec![Factor::plain(
                Kind::Metric,
                &[Index::down(Label::Free(0)), Index::down(Label::Free(1))]
            )]
        );
    }

    #[test]
    fn odd_count_vanishes() {
        let t = Term::new(
            ScalarCoeff::atom(MomKey::new(false, 0, 1, 0), RPoly::one()),
            vec![k(Label::Free(0), false)],
        );
        assert!(integrate_term(&t).unwrap().is_empty());
    }

    #[test]
    fn contracted_pair_folds() {
        let d = Label::Dummy(0);
        let t = Term::new(
            ScalarCoeff::atom(MomKey::new(false, 0, 2, 0), RPoly::one()),
            vec![k(d, true), k(d, false)],
        );
        let e = integrate_term(&t).unwrap();
        // (n/2)_1 / 1! = n/2
        assert_eq!(
            e[0].coeff,
            HyperCoeff::atom(FAtom::ONE, RPoly::parse("n/2").unwrap())
        );
    }
}
