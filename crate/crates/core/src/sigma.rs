//! Symbol recursion for `A = -g□ + a D D + X` acting on sections with an
//! optional Lorentz index, and its coincidence limit.
//!
//! With `G = ∫ e^{il} σ`, the amplitude satisfies
//! `(A(D + i Dl) - λ) σ = I`. Grouping by homogeneity in `k`:
//!
//! ```text
//! P σ_0 = I,    P σ_m + B σ_{m-1} + C σ_{m-2} = 0
//! ```
//!
//! where `P` is the principal symbol, `B` the `i`-linear tier and `C = A`.
//! Term labels: `Free(0)` is the Lorentz slot at `x` (rank 2 only) and
//! `Free(1)` the slot at the second point carried by the transport
//! function `I`.

use thiserror::Error;

use crate::colim::{substitute_limits, ColimError, ColimTables};
use crate::expr::{
    canonicalize, contract_metric, fresh_dummy_base, Coeff, CoeffRing, ExprError, Factor, Index,
    Kind, Label, MomKey, ScalarCoeff, TensorExpr, Term,
};
use crate::num::Rational;
use crate::poly::{RPoly, Var};
use crate::rewrite::{leibniz, Background};

#[derive(Debug, Error)]
pub enum SigmaError {
    #[error("principal symbol is not invertible: {0}")]
    NotInvertible(String),
    #[error("unsupported operator: {0}")]
    UnsupportedShape(String),
    #[error(transparent)]
    Colim(#[from] ColimError),
    #[error(transparent)]
    Expr(#[from] ExprError),
}

/// The nonminimality parameter.
#[derive(Clone, Debug, PartialEq)]
pub enum AParam {
    Symbolic,
    Value(Rational),
}

impl AParam {
    pub fn is_zero(&self) -> bool {
        matches!(self, AParam::Value(v) if *v == Rational::from_integer(0.into()))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Endomorphism {
    Absent,
    /// A free `X` factor.
    Generic,
    /// `X` replaced in the result by an expression in the background fields
    /// with free labels `Free(0)`, `Free(1)` for the two slots.
    Bound(TensorExpr<RPoly>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct OperatorSpec {
    pub name: String,
    /// 0 for scalar sections, 2 for one Lorentz index.
    pub rank: u8,
    /// Order of the operator (always 2).
    pub order: u8,
    pub a: AParam,
    pub endo: Endomorphism,
    pub flags: Background,
}

impl OperatorSpec {
    pub fn validate(&self) -> Result<(), SigmaError> {
        if !matches!(self.rank, 0 | 2) {
            return Err(SigmaError::UnsupportedShape(format!("rank {}", self.rank)));
        }
        if self.order != 2 {
            return Err(SigmaError::UnsupportedShape(format!(
                "order {}",
                self.order
            )));
        }
        if self.rank == 0 && !self.a.is_zero() {
            return Err(SigmaError::UnsupportedShape(
                "scalar operator with a ≠ 0".into(),
            ));
        }
        if let AParam::Value(v) = &self.a {
            if *v == Rational::from_integer(1.into()) {
                return Err(SigmaError::NotInvertible("a = 1".into()));
            }
        }
        Ok(())
    }

    fn has_a(&self) -> bool {
        self.rank == 2 && !self.a.is_zero()
    }
}

/// One homogeneity tier of `A(D + i Dl) - λ`, shown applied to the
/// placeholder `I`.
#[derive(Clone, Debug, PartialEq)]
pub struct SymbolTier {
    pub degree: i32,
    pub expr: TensorExpr<ScalarCoeff>,
}

fn f0() -> Label {
    Label::Free(0)
}

fn phase(derivs: &[Index]) -> Factor {
    Factor::new(Kind::Phase, derivs, &[])
}

fn coeff_a() -> RPoly {
    RPoly::var(Var::Param)
}

fn with_factors(coeff: ScalarCoeff, front: Vec<Factor>, rest: &[Factor]) -> Term<ScalarCoeff> {
    let mut factors = front;
    factors.extend(rest.iter().cloned());
    Term { coeff, factors }
}

/// The identity placeholder `I`.
pub fn transport_placeholder(rank: u8) -> Term<ScalarCoeff> {
    let slots = if rank == 2 {
        vec![Index::up(f0()), Index::down(Label::Free(1))]
    } else {
        Vec::new()
    };
    Term::new(
        ScalarCoeff::one(),
        vec![Factor::new(Kind::Transport, &[], &slots)],
    )
}

/// `P = g(Dl·Dl - λ) - a Dl Dl` with both slots upper.
pub fn principal_symbol(op: &OperatorSpec) -> TensorExpr<ScalarCoeff> {
    let p1 = ScalarCoeff::atom(MomKey::new(false, 0, -1, 0), RPoly::one());
    if op.rank == 0 {
        return TensorExpr::single(Term::scalar(p1));
    }
    let (m, n) = (Index::up(f0()), Index::up(Label::Free(1)));
    let mut out = vec![Term::new(p1, vec![Factor::plain(Kind::Metric, &[m, n])])];
    if op.has_a() {
        out.push(Term::new(
            ScalarCoeff::from_poly(-coeff_a()),
            vec![phase(&[m]), phase(&[n])],
        ));
    }
    TensorExpr::from_terms(out)
}

/// `P^{-1}` with both slots lower:
/// `g/(Dl² - λ) + a Dl Dl / ((Dl² - λ)((1-a)Dl² - λ))`.
pub fn invert_principal_symbol(op: &OperatorSpec) -> Result<TensorExpr<ScalarCoeff>, SigmaError> {
    op.validate()?;
    let inv1 = ScalarCoeff::atom(MomKey::new(false, 0, 1, 0), RPoly::one());
    if op.rank == 0 {
        return Ok(TensorExpr::single(Term::scalar(inv1)));
    }
    let (m, n) = (Index::down(f0()), Index::down(Label::Free(1)));
    let mut out = vec![Term::new(inv1, vec![Factor::plain(Kind::Metric, &[m, n])])];
    if op.has_a() {
        let c = ScalarCoeff::atom(MomKey::new(false, 0, 1, 1), coeff_a());
        out.push(Term::new(c, vec![phase(&[m]), phase(&[n])]));
    }
    Ok(TensorExpr::from_terms(out))
}

fn next_after(t: &Term<ScalarCoeff>, extra: &[Index]) -> u16 {
    let mut base = fresh_dummy_base(t);
    for i in extra {
        if let Label::Dummy(k) = i.label {
            base = base.max(k + 1);
        }
    }
    base
}

/// `D_idx t`: Leibniz over the factors plus the derivative of the
/// propagator atoms in the coefficient.
pub fn differentiate(t: &Term<ScalarCoeff>, idx: Index) -> Vec<Term<ScalarCoeff>> {
    let mut out: Vec<Term<ScalarCoeff>> = leibniz(&t.factors, idx)
        .into_iter()
        .map(|factors| Term {
            coeff: t.coeff.clone(),
            factors,
        })
        .collect();
    let dc = t.coeff.propagator_derivative();
    if !dc.is_zero() {
        let eta = Label::Dummy(next_after(t, &[idx]));
        let front = vec![phase(&[Index::up(eta)]), phase(&[idx, Index::down(eta)])];
        out.push(with_factors(dc, front, &t.factors));
    }
    out
}

fn differentiate_all(ts: Vec<Term<ScalarCoeff>>, idx: Index) -> Vec<Term<ScalarCoeff>> {
    ts.iter().flat_map(|t| differentiate(t, idx)).collect()
}

/// Renames the `Free(0)` slot of `t` to `d`, returning the index that
/// contracts with it.
fn open_slot(t: &Term<ScalarCoeff>, d: Label) -> (Term<ScalarCoeff>, Index) {
    let mut t = t.clone();
    let mut partner = Index::up(d);
    for f in &mut t.factors {
        for i in f.indices_mut() {
            if i.label == f0() {
                i.label = d;
                partner = Index {
                    label: d,
                    up: !i.up,
                };
            }
        }
    }
    (t, partner)
}

/// Sets every occurrence of `Free(0)` to the lower position.
fn lower_slot(mut t: Term<ScalarCoeff>) -> Term<ScalarCoeff> {
    for f in &mut t.factors {
        for i in f.indices_mut() {
            if i.label == f0() {
                i.up = false;
            }
        }
    }
    t
}

fn scaled(c: &ScalarCoeff, p: RPoly) -> ScalarCoeff {
    let mut c = c.clone();
    c.mul_poly(&p);
    c
}

/// `P^{-1}` applied to one term whose `Free(0)` slot is the row index.
pub fn apply_ainv_term(op: &OperatorSpec, t: &Term<ScalarCoeff>) -> Vec<Term<ScalarCoeff>> {
    if op.rank == 0 {
        return vec![Term {
            coeff: t.coeff.shifted(1, 0, &RPoly::one()),
            factors: t.factors.clone(),
        }];
    }
    let d = Label::Dummy(fresh_dummy_base(t));
    let (u, partner) = open_slot(t, d);
    let m = Index::down(f0());
    let mut out = vec![with_factors(
        t.coeff.shifted(1, 0, &RPoly::one()),
        vec![Factor::plain(Kind::Metric, &[m, partner])],
        &u.factors,
    )];
    if op.has_a() {
        out.push(with_factors(
            t.coeff.shifted(1, 1, &coeff_a()),
            vec![phase(&[m]), phase(&[partner])],
            &u.factors,
        ));
    }
    out
}

/// The `i`-linear tier applied to one term of `σ`:
/// `i[-g(□l + 2 D^η l D_η) + a(D^μ D^λ l + D^μ l D^λ + D^λ l D^μ)] σ_λ`.
pub fn apply_b_term(op: &OperatorSpec, t: &Term<ScalarCoeff>) -> Vec<Term<ScalarCoeff>> {
    let base = fresh_dummy_base(t);
    let (d, e) = (Label::Dummy(base), Label::Dummy(base + 1));
    let ci = t.coeff.times_i();
    let mut out = Vec::new();
    // -i □l σ
    out.push(with_factors(
        scaled(&ci, RPoly::from_i64(-1)),
        vec![phase(&[Index::up(e), Index::down(e)])],
        &t.factors,
    ));
    // -2i D^e l D_e σ
    let dt = differentiate(
        &Term {
            coeff: scaled(&ci, RPoly::from_i64(-2)),
            factors: t.factors.clone(),
        },
        Index::down(e),
    );
    for u in dt {
        out.push(with_factors(
            u.coeff,
            vec![phase(&[Index::up(e)])],
            &u.factors,
        ));
    }
    if op.has_a() {
        let (u, lam) = open_slot(t, d);
        let m = Index::down(f0());
        let ca = scaled(&ci, coeff_a());
        out.push(with_factors(ca.clone(), vec![phase(&[m, lam])], &u.factors));
        let us = Term {
            coeff: ca,
            factors: u.factors.clone(),
        };
        for v in differentiate(&us, lam) {
            out.push(with_factors(v.coeff, vec![phase(&[m])], &v.factors));
        }
        for v in differentiate(&us, m) {
            out.push(with_factors(v.coeff, vec![phase(&[lam])], &v.factors));
        }
    }
    out.into_iter().map(lower_slot).collect()
}

/// The second-order tier `(-g□ + a D^μ D^λ + X^{μλ}) σ_λ` applied to one
/// term.
pub fn apply_c_term(op: &OperatorSpec, t: &Term<ScalarCoeff>) -> Vec<Term<ScalarCoeff>> {
    let base = fresh_dummy_base(t);
    let (d, e) = (Label::Dummy(base), Label::Dummy(base + 1));
    let mut out = Vec::new();
    let neg = Term {
        coeff: scaled(&t.coeff, RPoly::from_i64(-1)),
        factors: t.factors.clone(),
    };
    out.extend(differentiate_all(
        differentiate(&neg, Index::down(e)),
        Index::up(e),
    ));
    let (u, lam) = open_slot(t, d);
    let m = Index::down(f0());
    if op.has_a() {
        let ua = Term {
            coeff: scaled(&t.coeff, coeff_a()),
            factors: u.factors.clone(),
        };
        out.extend(differentiate_all(differentiate(&ua, lam), m));
    }
    if op.endo != Endomorphism::Absent {
        let x = if op.rank == 2 {
            Factor::plain(Kind::Endo, &[m, lam])
        } else {
            Factor::plain(Kind::Endo, &[])
        };
        let src = if op.rank == 2 { &u } else { t };
        out.push(with_factors(t.coeff.clone(), vec![x], &src.factors));
    }
    out.into_iter().map(lower_slot).collect()
}

fn apply_all(
    e: &TensorExpr<ScalarCoeff>,
    f: impl Fn(&Term<ScalarCoeff>) -> Vec<Term<ScalarCoeff>>,
) -> Vec<Term<ScalarCoeff>> {
    e.terms.iter().flat_map(f).collect()
}

fn tidy(terms: Vec<Term<ScalarCoeff>>) -> Result<TensorExpr<ScalarCoeff>, SigmaError> {
    Ok(contract_metric(&TensorExpr::from_terms(terms))?)
}

/// The three tiers by decreasing degree, each applied to `I`.
pub fn build_recursion(op: &OperatorSpec) -> Result<Vec<SymbolTier>, SigmaError> {
    op.validate()?;
    let id = TensorExpr::single(lower_slot(transport_placeholder(op.rank)));
    Ok(vec![
        SymbolTier {
            degree: 2,
            expr: principal_symbol(op),
        },
        SymbolTier {
            degree: 1,
            expr: tidy(apply_all(&id, |t| apply_b_term(op, t)))?,
        },
        SymbolTier {
            degree: 0,
            expr: tidy(apply_all(&id, |t| apply_c_term(op, t)))?,
        },
    ])
}

/// Unsimplified terms of `B σ_{m-1} + C σ_{m-2}` (the right-hand side of
/// the order-`m` equation up to sign).
pub fn tier_source(
    op: &OperatorSpec,
    prev: &TensorExpr<ScalarCoeff>,
    prev2: Option<&TensorExpr<ScalarCoeff>>,
) -> Vec<Term<ScalarCoeff>> {
    let mut out = apply_all(prev, |t| apply_b_term(op, t));
    if let Some(p2) = prev2 {
        out.extend(apply_all(p2, |t| apply_c_term(op, t)));
    }
    out
}

/// `-P^{-1}` applied to one source term: the contribution of that term to
/// `σ_m`.
pub fn sigma_contribution(op: &OperatorSpec, source: &Term<ScalarCoeff>) -> Vec<Term<ScalarCoeff>> {
    apply_ainv_term(op, source)
        .into_iter()
        .map(|mut t| {
            t.coeff.negate();
            lower_slot(t)
        })
        .collect()
}

/// `σ_0 … σ_m`, canonicalized.
pub fn solve_sigma(
    op: &OperatorSpec,
    m: usize,
) -> Result<Vec<TensorExpr<ScalarCoeff>>, SigmaError> {
    op.validate()?;
    let id = transport_placeholder(op.rank);
    let s0: Vec<Term<ScalarCoeff>> = apply_ainv_term(op, &id)
        .into_iter()
        .map(lower_slot)
        .collect();
    let mut out = vec![tidy(s0)?];
    for k in 1..=m {
        let prev2 = if k >= 2 { Some(&out[k - 2]) } else { None };
        let src = tier_source(op, &out[k - 1], prev2);
        let terms: Vec<Term<ScalarCoeff>> =
            src.iter().flat_map(|t| sigma_contribution(op, t)).collect();
        out.push(tidy(terms)?);
    }
    Ok(out)
}

/// Coincidence limit of one term: `D..l` and `D..I` replaced from the
/// tables, not canonicalized.
pub fn take_colim_term(
    t: &Term<ScalarCoeff>,
    tables: &ColimTables,
) -> Result<Vec<Term<ScalarCoeff>>, SigmaError> {
    Ok(substitute_limits(
        t,
        Some(&tables.phase),
        Some(&tables.transport),
    )?)
}

/// `[σ_m]`.
pub fn take_colim(
    e: &TensorExpr<ScalarCoeff>,
    tables: &ColimTables,
) -> Result<TensorExpr<ScalarCoeff>, SigmaError> {
    let mut out = Vec::new();
    for t in &e.terms {
        out.extend(take_colim_term(t, tables)?);
    }
    tidy(out)
}

/// Highest derivative order on the phase and transport functions in `e`.
pub fn required_orders(e: &TensorExpr<ScalarCoeff>) -> (usize, usize) {
    let mut p = 0;
    let mut i = 0;
    for f in e.terms.iter().flat_map(|t| t.factors.iter()) {
        match f.kind {
            Kind::Phase => p = p.max(f.derivs.len()),
            Kind::Transport => i = i.max(f.derivs.len()),
            _ => {}
        }
    }
    (p, i)
}

/// Replaces every `D..D X` factor by the bound expression, the derivatives
/// acting on its single non-metric factor.
pub fn bind_endomorphism<C: CoeffRing>(
    e: &TensorExpr<C>,
    bound: &TensorExpr<RPoly>,
) -> Result<TensorExpr<C>, SigmaError> {
    for b in &bound.terms {
        if b.factors.iter().filter(|f| !f.kind.is_parallel()).count() != 1 {
            return Err(SigmaError::UnsupportedShape(
                "bound endomorphism must be linear in one field".into(),
            ));
        }
    }
    let mut work: Vec<Term<C>> = e.terms.clone();
    let mut done = Vec::new();
    while let Some(t) = work.pop() {
        let Some(pos) = t.factors.iter().position(|f| f.kind == Kind::Endo) else {
            done.push(t);
            continue;
        };
        let x = &t.factors[pos];
        let base = fresh_dummy_base(&t);
        for b in &bound.terms {
            let mut map = std::collections::HashMap::new();
            for (j, s) in x.slots.iter().enumerate() {
                map.insert(Label::Free(j as u16), (s.label, false));
            }
            // free slot j takes the variance of the j-th slot of X
            let mut b = b.clone();
            for f in &mut b.factors {
                for i in f.indices_mut() {
                    if let Label::Free(j) = i.label {
                        if let Some(s) = x.slots.get(j as usize) {
                            i.up = s.up;
                        }
                    }
                }
            }
            let mut placed = crate::expr::relabel_free(&b, &map, base);
            if let Some(field) = placed.factors.iter_mut().find(|f| !f.kind.is_parallel()) {
                let mut derivs: Vec<Index> = x.derivs.to_vec();
                derivs.extend(field.derivs.iter().copied());
                field.derivs = derivs.into_iter().collect();
            }
            let mut factors = t.factors[..pos].to_vec();
            factors.extend(placed.factors);
            factors.extend(t.factors[pos + 1..].iter().cloned());
            let coeff = t.coeff.mul(&C::from_poly_coeff(placed.coeff.clone()));
            work.push(Term { coeff, factors });
        }
    }
    Ok(contract_metric(&canonicalize(&TensorExpr::from_terms(
        done,
    ))?)?)
}
