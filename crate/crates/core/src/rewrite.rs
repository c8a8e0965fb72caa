//! Covariant derivative reordering and the curvature identities.
//!
//! Conventions: `D_μ V^λ = ∂_μ V^λ + Γ^λ_{μν} V^ν`, torsion
//! `T^λ_{μν} = Γ^λ_{νμ} - Γ^λ_{μν}`, and
//!
//! ```text
//! [D_μ, D_ν] φ^{η..}_{λ..} = Σ R^η_{αμν} φ^{α..} - Σ R^α_{λμν} φ_{α..}
//!                            + T^α_{μν} D_α φ + W_{μν} φ
//! ```
//!
//! where the gauge term acts by left multiplication on sections, by
//! commutator on endomorphisms, and not at all on bundle scalars.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{
    canonicalize, fresh_dummy_base, BundleAction, Coeff, ExprError, Factor, Index, Kind, Label,
    TensorExpr, Term,
};
use crate::num::Rational;
use crate::poly::RPoly;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RewriteError {
    #[error("no derivative pair at position {deriv_pos} of factor {factor_pos}")]
    OutOfRange { factor_pos: usize, deriv_pos: usize },
    #[error(transparent)]
    Expr(#[from] ExprError),
}

/// Background fields that are switched on. Curvature is always present.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Background {
    pub torsion: bool,
    pub gauge: bool,
}

impl Background {
    pub const FULL: Background = Background {
        torsion: true,
        gauge: true,
    };
}

impl Default for Background {
    fn default() -> Self {
        Self::FULL
    }
}

/// `D_idx` of an ordered product by the Leibniz rule.
pub fn leibniz(factors: &[Factor], idx: Index) -> Vec<Vec<Factor>> {
    let mut out = Vec::with_capacity(factors.len());
    for (i, f) in factors.iter().enumerate() {
        if f.kind.is_parallel() {
            continue;
        }
        let mut fs = factors.to_vec();
        fs[i] = f.differentiated(idx);
        out.push(fs);
    }
    out
}

fn index_at(f: &Factor, pos: usize) -> Index {
    let nd = f.derivs.len();
    if pos < nd {
        f.derivs[pos]
    } else {
        f.slots[pos - nd]
    }
}

fn set_index(f: &mut Factor, pos: usize, idx: Index) {
    let nd = f.derivs.len();
    if pos < nd {
        f.derivs[pos] = idx;
    } else {
        f.slots[pos - nd] = idx;
    }
}

/// The signed products making up `[D_x, D_y] ψ`.
fn commutator_products(
    psi: &Factor,
    x: Index,
    y: Index,
    alpha: Label,
    bg: Background,
) -> Vec<(bool, Vec<Factor>)> {
    let mut out = Vec::new();
    let nd = psi.derivs.len();
    for pos in 0..nd + psi.slots.len() {
        if pos >= nd && psi.slot_is_primed(pos - nd) {
            continue;
        }
        let i = index_at(psi, pos);
        let mut p = psi.clone();
        if i.up {
            set_index(&mut p, pos, Index::up(alpha));
            out.push((
                false,
                vec![
                    Factor::plain(Kind::Riemann, &[i, Index::down(alpha), x, y]),
                    p,
                ],
            ));
        } else {
            set_index(&mut p, pos, Index::down(alpha));
            out.push((
                true,
                vec![
                    Factor::plain(Kind::Riemann, &[Index::up(alpha), i, x, y]),
                    p,
                ],
            ));
        }
    }
    if bg.torsion {
        out.push((
            false,
            vec![
                Factor::plain(Kind::Torsion, &[Index::up(alpha), x, y]),
                psi.differentiated(Index::down(alpha)),
            ],
        ));
    }
    if bg.gauge {
        let w = Factor::plain(Kind::Gauge, &[x, y]);
        match psi.kind.bundle_action() {
            BundleAction::Section => out.push((false, vec![w, psi.clone()])),
            BundleAction::Endomorphism => {
                out.push((false, vec![w.clone(), psi.clone()]));
                out.push((true, vec![psi.clone(), w]));
            }
            BundleAction::None => {}
        }
    }
    out
}

/// Correction terms `c` in `D..D_x D_y.. φ = D..D_y D_x.. φ + c` for the
/// derivative pair at `deriv_pos` of factor `factor_pos`. Not canonicalized.
pub fn commutator_terms<C: Coeff>(
    t: &Term<C>,
    factor_pos: usize,
    deriv_pos: usize,
    bg: Background,
) -> Result<Vec<Term<C>>, RewriteError> {
    let err = RewriteError::OutOfRange {
        factor_pos,
        deriv_pos,
    };
    let f = t.factors.get(factor_pos).ok_or(err.clone())?;
    if deriv_pos + 1 >= f.derivs.len() {
        return Err(err);
    }
    if f.kind.is_parallel() {
        return Ok(Vec::new());
    }
    let (x, y) = (f.derivs[deriv_pos], f.derivs[deriv_pos + 1]);
    let psi = Factor {
        kind: f.kind,
        derivs: f.derivs[deriv_pos + 2..].iter().copied().collect(),
        slots: f.slots.clone(),
    };
    let alpha = Label::Dummy(fresh_dummy_base(t));
    let mut out = Vec::new();
    for (neg, prod) in commutator_products(&psi, x, y, alpha, bg) {
        let mut prods = vec![prod];
        for idx in f.derivs[..deriv_pos].iter().rev() {
            prods = prods.iter().flat_map(|p| leibniz(p, *idx)).collect();
        }
        for p in prods {
            let mut factors = t.factors[..factor_pos].to_vec();
            factors.extend(p);
            factors.extend(t.factors[factor_pos + 1..].iter().cloned());
            let mut coeff = t.coeff.clone();
            if neg {
                coeff.negate();
            }
            out.push(Term { coeff, factors });
        }
    }
    Ok(out)
}

fn swapped<C: Coeff>(t: &Term<C>, factor_pos: usize, deriv_pos: usize) -> Term<C> {
    let mut s = t.clone();
    s.factors[factor_pos].derivs.swap(deriv_pos, deriv_pos + 1);
    s
}

/// Swaps the derivative pair at `deriv_pos` and adds the full commutator.
pub fn commute_pair<C: Coeff>(
    t: &Term<C>,
    factor_pos: usize,
    deriv_pos: usize,
) -> Result<TensorExpr<C>, RewriteError> {
    commute_pair_in(t, factor_pos, deriv_pos, Background::FULL)
}

pub fn commute_pair_in<C: Coeff>(
    t: &Term<C>,
    factor_pos: usize,
    deriv_pos: usize,
    bg: Background,
) -> Result<TensorExpr<C>, RewriteError> {
    let mut terms = commutator_terms(t, factor_pos, deriv_pos, bg)?;
    terms.push(swapped(t, factor_pos, deriv_pos));
    Ok(canonicalize(&TensorExpr::from_terms(terms))?)
}

fn first_inversion<C: Coeff>(t: &Term<C>) -> Option<(usize, usize)> {
    for (fi, f) in t.factors.iter().enumerate() {
        if f.kind.is_parallel() {
            continue;
        }
        for j in 0..f.derivs.len().saturating_sub(1) {
            if f.derivs[j].label > f.derivs[j + 1].label {
                return Some((fi, j));
            }
        }
    }
    None
}

/// Sorts every derivative chain by label. Each swap either lowers the
/// number of inversions or produces terms with fewer derivatives in total,
/// so the process terminates.
pub fn to_canonical_derivative_order<C: Coeff>(
    e: &TensorExpr<C>,
    bg: Background,
) -> Result<TensorExpr<C>, RewriteError> {
    let mut work: Vec<Term<C>> = e.terms.clone();
    let mut done = Vec::new();
    while let Some(t) = work.pop() {
        match first_inversion(&t) {
            None => done.push(t),
            Some((fi, j)) => {
                work.extend(commutator_terms(&t, fi, j, bg)?);
                work.push(swapped(&t, fi, j));
            }
        }
    }
    Ok(canonicalize(&TensorExpr::from_terms(done))?)
}

fn next_dummy(idx: &[Index]) -> Label {
    let k = idx
        .iter()
        .filter_map(|i| match i.label {
            Label::Dummy(k) => Some(k + 1),
            Label::Free(_) => None,
        })
        .max()
        .unwrap_or(0);
    Label::Dummy(k)
}

fn term(factors: Vec<Factor>) -> Term<RPoly> {
    Term::new(RPoly::one(), factors)
}

fn r(s: [Index; 4]) -> Factor {
    Factor::plain(Kind::Riemann, &s)
}

fn tor(s: [Index; 3]) -> Factor {
    Factor::plain(Kind::Torsion, &s)
}

/// Left-hand side of the cyclic identity (vanishes identically).
pub fn cyclic_identity(al: Index, b: Index, c: Index, d: Index) -> TensorExpr<RPoly> {
    cyclic_with(al, b, c, d, next_dummy(&[al, b, c, d]))
}

fn cyclic_with(al: Index, b: Index, c: Index, d: Index, la: Label) -> TensorExpr<RPoly> {
    let (lu, ld) = (Index::up(la), Index::down(la));
    let mut out = Vec::new();
    for (x, y, z) in [(b, c, d), (c, d, b), (d, b, c)] {
        out.push(term(vec![r([al, x, y, z])]));
        out.push(term(vec![tor([al, y, z]).differentiated(x)]));
        out.push(term(vec![tor([al, x, ld]), tor([lu, y, z])]));
    }
    TensorExpr::from_terms(out)
}

/// Left-hand side of the affine Bianchi identity.
pub fn bianchi_affine(al: Index, be: Index, ga: Index, de: Index, ep: Index) -> TensorExpr<RPoly> {
    bianchi_affine_with(al, be, ga, de, ep, next_dummy(&[al, be, ga, de, ep]))
}

fn bianchi_affine_with(
    al: Index,
    be: Index,
    ga: Index,
    de: Index,
    ep: Index,
    la: Label,
) -> TensorExpr<RPoly> {
    let (lu, ld) = (Index::up(la), Index::down(la));
    let mut out = Vec::new();
    for (x, y, z) in [(al, de, ep), (de, ep, al), (ep, al, de)] {
        out.push(term(vec![r([be, ga, y, z]).differentiated(x)]));
        out.push(term(vec![tor([lu, x, y]), r([be, ga, z, ld])]));
    }
    TensorExpr::from_terms(out)
}

/// Left-hand side of the gauge Bianchi identity.
pub fn bianchi_gauge(al: Index, be: Index, ga: Index) -> TensorExpr<RPoly> {
    bianchi_gauge_with(al, be, ga, next_dummy(&[al, be, ga]))
}

fn bianchi_gauge_with(al: Index, be: Index, ga: Index, la: Label) -> TensorExpr<RPoly> {
    let (lu, ld) = (Index::up(la), Index::down(la));
    let mut out = Vec::new();
    for (x, y, z) in [(al, be, ga), (be, ga, al), (ga, al, be)] {
        out.push(term(vec![
            Factor::plain(Kind::Gauge, &[y, z]).differentiated(x)
        ]));
        out.push(term(vec![
            Factor::plain(Kind::Gauge, &[x, ld]),
            tor([lu, y, z]),
        ]));
    }
    TensorExpr::from_terms(out)
}

/// Places an identity at factor `fp` of `host`: the outer derivatives act
/// on it by Leibniz and the remaining factors multiply it.
fn embed<C: Coeff>(
    host: &Term<C>,
    fp: usize,
    outer: &[Index],
    id: &TensorExpr<RPoly>,
) -> TensorExpr<RPoly> {
    let mut out = Vec::new();
    for t in &id.terms {
        let mut prods = vec![t.factors.clone()];
        for idx in outer.iter().rev() {
            prods = prods.iter().flat_map(|p| leibniz(p, *idx)).collect();
        }
        for p in prods {
            let mut factors = host.factors[..fp].to_vec();
            factors.extend(p);
            factors.extend(host.factors[fp + 1..].iter().cloned());
            out.push(Term::new(t.coeff.clone(), factors));
        }
    }
    TensorExpr::from_terms(out)
}

fn cyclic_seeds<C: Coeff>(t: &Term<C>) -> Vec<TensorExpr<RPoly>> {
    let la = Label::Dummy(fresh_dummy_base(t));
    let mut out = Vec::new();
    for (fp, f) in t.factors.iter().enumerate() {
        let s = &f.slots;
        match f.kind {
            Kind::Riemann => {
                for (a, b) in [(0, 1), (1, 0)] {
                    let id = cyclic_with(s[a], s[b], s[2], s[3], la);
                    out.push(embed(t, fp, &f.derivs, &id));
                }
            }
            Kind::Torsion => {
                let Some((&inner, outer)) = f.derivs.split_last() else {
                    continue;
                };
                let id = cyclic_with(s[0], inner, s[1], s[2], la);
                out.push(embed(t, fp, outer, &id));
            }
            _ => {}
        }
    }
    // contracted torsion pairs `T^a_{x λ} T^λ_{y z}`
    for (i, f) in t.factors.iter().enumerate() {
        if f.kind != Kind::Torsion || !f.derivs.is_empty() {
            continue;
        }
        for (j, h) in t.factors.iter().enumerate() {
            if i == j || h.kind != Kind::Torsion || !h.derivs.is_empty() {
                continue;
            }
            for q in [1, 2] {
                if f.slots[q].label != h.slots[0].label {
                    continue;
                }
                let id = cyclic_with(f.slots[0], f.slots[3 - q], h.slots[1], h.slots[2], la);
                let mut host = t.clone();
                host.factors.remove(i.max(j));
                out.push(embed(&host, i.min(j), &[], &id));
            }
        }
    }
    out
}

fn bianchi_seeds<C: Coeff>(t: &Term<C>) -> Vec<TensorExpr<RPoly>> {
    let la = Label::Dummy(fresh_dummy_base(t));
    let mut out = Vec::new();
    for (fp, f) in t.factors.iter().enumerate() {
        let Some((&inner, outer)) = f.derivs.split_last() else {
            continue;
        };
        let s = &f.slots;
        let id = match f.kind {
            Kind::Riemann => bianchi_affine_with(inner, s[0], s[1], s[2], s[3], la),
            Kind::Gauge => bianchi_gauge_with(inner, s[0], s[1], la),
            _ => continue,
        };
        out.push(embed(t, fp, outer, &id));
    }
    out
}

/// Canonical identity instances grown from the terms of `e`: seeds are
/// generated from every matching factor, and again from the terms of the
/// seeds, `depth` times.
fn instances<C: Coeff>(
    e: &TensorExpr<C>,
    depth: usize,
    seeds: fn(&Term<RPoly>) -> Vec<TensorExpr<RPoly>>,
) -> Result<Vec<TensorExpr<RPoly>>, RewriteError> {
    let mut seen: BTreeMap<Vec<Factor>, ()> = BTreeMap::new();
    let mut frontier: Vec<Term<RPoly>> = Vec::new();
    for t in &canonicalize(e)?.terms {
        if seen.insert(t.factors.clone(), ()).is_none() {
            frontier.push(Term::new(RPoly::one(), t.factors.clone()));
        }
    }
    let mut out = Vec::new();
    for _ in 0..depth {
        let mut next = Vec::new();
        for t in &frontier {
            for inst in seeds(t) {
                let c = canonicalize(&inst)?;
                if c.is_zero() {
                    continue;
                }
                for u in &c.terms {
                    if seen.insert(u.factors.clone(), ()).is_none() {
                        next.push(Term::new(RPoly::one(), u.factors.clone()));
                    }
                }
                out.push(c);
            }
        }
        frontier = next;
    }
    Ok(out)
}

pub fn cyclic_instances<C: Coeff>(
    e: &TensorExpr<C>,
    depth: usize,
) -> Result<Vec<TensorExpr<RPoly>>, RewriteError> {
    instances(e, depth, cyclic_seeds::<RPoly>)
}

pub fn bianchi_instances<C: Coeff>(
    e: &TensorExpr<C>,
    depth: usize,
) -> Result<Vec<TensorExpr<RPoly>>, RewriteError> {
    instances(e, depth, bianchi_seeds::<RPoly>)
}

/// Reduced row-echelon basis of a family of linear identities between
/// tensor monomials; the pivot of each row is its largest monomial.
#[derive(Clone, Debug, Default)]
pub struct IdentityReducer {
    rows: Vec<(Vec<Factor>, BTreeMap<Vec<Factor>, Rational>)>,
}

impl IdentityReducer {
    /// Identities whose coefficients are not rational constants are skipped.
    pub fn new(identities: &[TensorExpr<RPoly>]) -> Self {
        let mut red = IdentityReducer::default();
        for id in identities {
            let mut row = BTreeMap::new();
            let mut ok = true;
            for t in &id.terms {
                match t.coeff.constant_value() {
                    Some(c) => {
                        row.insert(t.factors.clone(), c);
                    }
                    None => ok = false,
                }
            }
            if ok {
                red.insert(row);
            }
        }
        red
    }

    fn insert(&mut self, mut row: BTreeMap<Vec<Factor>, Rational>) {
        for (p, r) in &self.rows {
            if let Some(c) = row.get(p).cloned() {
                axpy(&mut row, &-c, r);
            }
        }
        let Some((pivot, lead)) = row.iter().next_back().map(|(k, v)| (k.clone(), v.clone()))
        else {
            return;
        };
        for v in row.values_mut() {
            *v = &*v / &lead;
        }
        for (_, r) in &mut self.rows {
            if let Some(c) = r.get(&pivot).cloned() {
                axpy(r, &-c, &row);
            }
        }
        self.rows.push((pivot, row));
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Normal form of a canonical expression modulo the identities.
    pub fn reduce<C: Coeff>(&self, e: &TensorExpr<C>) -> TensorExpr<C> {
        let mut acc: BTreeMap<Vec<Factor>, C> = e
            .terms
            .iter()
            .map(|t| (t.factors.clone(), t.coeff.clone()))
            .collect();
        for (pivot, row) in &self.rows {
            let Some(c) = acc.get(pivot).cloned() else {
                continue;
            };
            for (k, v) in row {
                let mut d = c.clone();
                d.mul_poly(&RPoly::constant(-v.clone()));
                match acc.get_mut(k) {
                    Some(x) => x.add_assign(&d),
                    None => {
                        acc.insert(k.clone(), d);
                    }
                }
            }
            acc.retain(|_, v| !v.is_zero());
        }
        TensorExpr {
            terms: acc
                .into_iter()
                .map(|(factors, coeff)| Term { coeff, factors })
                .collect(),
        }
    }
}

fn axpy(
    row: &mut BTreeMap<Vec<Factor>, Rational>,
    c: &Rational,
    other: &BTreeMap<Vec<Factor>, Rational>,
) {
    for (k, v) in other {
        let e = row
            .entry(k.clone())
            .or_insert_with(|| Rational::from_integer(0.into()));
        *e = &*e + &(c * v);
    }
    row.retain(|_, v| *v != Rational::from_integer(0.into()));
}

/// Normal form modulo the cyclic identity, grown from the terms of `e`.
pub fn apply_cyclic<C: Coeff>(e: &TensorExpr<C>) -> Result<TensorExpr<C>, RewriteError> {
    let e = canonicalize(e)?;
    let red = IdentityReducer::new(&cyclic_instances(&e, 2)?);
    Ok(red.reduce(&e))
}

/// `D_x D_y F - D_y D_x F - [D_x, D_y] F` for every adjacent derivative pair
/// of a background factor.
fn ricci_seeds(t: &Term<RPoly>) -> Vec<TensorExpr<RPoly>> {
    let mut out = Vec::new();
    for (fp, f) in t.factors.iter().enumerate() {
        if f.kind.is_parallel() || matches!(f.kind, Kind::Phase | Kind::Transport) {
            continue;
        }
        for j in 0..f.derivs.len().saturating_sub(1) {
            let Ok(mut terms) = commutator_terms(t, fp, j, Background::FULL) else {
                continue;
            };
            for c in &mut terms {
                c.coeff = -&c.coeff;
            }
            let mut s = swapped(t, fp, j);
            s.coeff = -&s.coeff;
            terms.push(s);
            terms.push(t.clone());
            out.push(TensorExpr::from_terms(terms));
        }
    }
    out
}

fn all_seeds(t: &Term<RPoly>) -> Vec<TensorExpr<RPoly>> {
    let mut out = cyclic_seeds(t);
    out.extend(bianchi_seeds(t));
    out.extend(ricci_seeds(t));
    out
}

/// Cyclic and Bianchi instances grown jointly from the terms of `e`.
pub fn identity_instances<C: Coeff>(
    e: &TensorExpr<C>,
    depth: usize,
) -> Result<Vec<TensorExpr<RPoly>>, RewriteError> {
    instances(e, depth, all_seeds)
}

/// Normal form modulo the span of both identity families.
pub fn apply_identities<C: Coeff>(
    e: &TensorExpr<C>,
    depth: usize,
) -> Result<TensorExpr<C>, RewriteError> {
    let e = canonicalize(e)?;
    let red = IdentityReducer::new(&identity_instances(&e, depth)?);
    Ok(red.reduce(&e))
}

/// Normal form modulo the affine and gauge Bianchi identities.
pub fn apply_bianchi<C: Coeff>(e: &TensorExpr<C>) -> Result<TensorExpr<C>, RewriteError> {
    let e = canonicalize(e)?;
    let red = IdentityReducer::new(&bianchi_instances(&e, 2)?);
    Ok(red.reduce(&e))
}
