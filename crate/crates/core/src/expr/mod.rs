//! Abstract-index tensor expressions.
//!
//! A [`TensorExpr`] is a sum of [`Term`]s; a term is a coefficient times an
//! ordered product of [`Factor`]s. Index variance is stored explicitly, but
//! since the connection is metric compatible the variance of a contracted
//! pair carries no information and canonical form fixes it positionally:
//! the first occurrence of a dummy is lower, the second upper.
//!
//! Factors that take values in the bundle endomorphisms (`W`, `X`, the
//! transport function `I`) do not commute with each other; canonical form
//! reorders only the remaining factors and keeps the bundle word intact.

mod canon;
mod coeff;
mod contract;
mod ops;
mod scalar;
mod serial;

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};
use smallvec::SmallVec;
use thiserror::Error;

pub use canon::{canonicalize, canonicalize_term, check_homogeneous};
pub use coeff::{Coeff, CoeffRing};
pub use contract::{contract_metric, contract_metric_term};
pub use ops::{
    fresh_dummy_base, permutations, product, product_terms, relabel_free, rename_contracted_apart,
    substitute, symmetrize,
};
pub use scalar::{MomKey, ScalarCoeff};
pub use serial::{
    parse_expr, parse_factor, parse_term, write_expr, write_factor, write_term, CoeffText,
};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ExprError {
    #[error("malformed indexing: label {0} {1}")]
    MalformedIndexing(String, &'static str),
    #[error("terms carry different free indices")]
    RankMismatch,
    #[error("index {0} is not free in the expression")]
    UnknownIndex(String),
    #[error("pattern and replacement disagree on free indices")]
    ArityMismatch,
    #[error("parse error: {0}")]
    Parse(String),
}

/// Index label. Free labels name the open slots of an expression; dummy
/// labels are produced by canonical renaming.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    Free(u16),
    Dummy(u16),
}

const FREE_NAMES: [&str; 10] = ["mu", "nu", "la", "rho", "si", "ka", "tau", "om", "ph", "ps"];
const DUMMY_NAMES: [&str; 8] = ["a", "b", "c", "d", "e", "f", "g", "h"];

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Label::Free(i) if (i as usize) < FREE_NAMES.len() => {
                f.write_str(FREE_NAMES[i as usize])
            }
            Label::Free(i) => write!(f, "m{i}"),
            Label::Dummy(i) if (i as usize) < DUMMY_NAMES.len() => {
                f.write_str(DUMMY_NAMES[i as usize])
            }
            Label::Dummy(i) => write!(f, "d{i}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Index {
    pub label: Label,
    pub up: bool,
}

impl Index {
    pub fn up(label: Label) -> Self {
        Index { label, up: true }
    }

    pub fn down(label: Label) -> Self {
        Index { label, up: false }
    }

    pub fn flipped(self) -> Self {
        Index {
            label: self.label,
            up: !self.up,
        }
    }
}

/// Free index shorthand: `free(0)` is μ, `free(1)` is ν, ...
pub fn free(i: u16) -> Label {
    Label::Free(i)
}

pub fn dummy(i: u16) -> Label {
    Label::Dummy(i)
}

/// Factor kinds in canonical order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Kind {
    /// Metric `g` with both indices of equal variance.
    Metric,
    /// Kronecker delta (metric with mixed variance).
    Delta,
    /// Wave vector `k`.
    Wave,
    /// Torsion `T^λ_{μν}`, antisymmetric in the last two slots.
    Torsion,
    /// Curvature `R^λ_{ημν}`, antisymmetric in each slot pair.
    Riemann,
    /// Gauge curvature `W_{μν}`.
    Gauge,
    /// Endomorphism `X` (two Lorentz slots for rank-2 operators, none for rank 0).
    Endo,
    /// Phase function `l`; appears only with derivatives.
    Phase,
    /// Transport function `I`; slot 1 of the rank-2 version sits at the
    /// second point and is inert under derivatives.
    Transport,
}

/// How the bundle connection acts on a factor.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BundleAction {
    None,
    /// Left multiplication (`W φ`).
    Section,
    /// Commutator (`W φ - φ W`).
    Endomorphism,
}

impl Kind {
    pub const ALL: [Kind; 9] = [
        Kind::Metric,
        Kind::Delta,
        Kind::Wave,
        Kind::Torsion,
        Kind::Riemann,
        Kind::Gauge,
        Kind::Endo,
        Kind::Phase,
        Kind::Transport,
    ];

    /// Admissible slot counts.
    pub fn slot_counts(self) -> &'static [usize] {
        match self {
            Kind::Metric | Kind::Delta | Kind::Gauge => &[2],
            Kind::Riemann => &[4],
            Kind::Torsion => &[3],
            Kind::Wave => &[1],
            Kind::Phase => &[0],
            Kind::Endo | Kind::Transport => &[0, 2],
        }
    }

    pub fn bundle_action(self) -> BundleAction {
        match self {
            Kind::Gauge | Kind::Endo => BundleAction::Endomorphism,
            Kind::Transport => BundleAction::Section,
            _ => BundleAction::None,
        }
    }

    /// Bundle-valued factors do not commute among themselves.
    pub fn is_bundle(self) -> bool {
        self.bundle_action() != BundleAction::None
    }

    /// Whether covariant derivatives of this factor vanish identically.
    pub fn is_parallel(self) -> bool {
        matches!(self, Kind::Metric | Kind::Delta | Kind::Wave)
    }

    /// Background-field weight (derivatives add one each).
    pub fn weight(self) -> u32 {
        match self {
            Kind::Torsion => 1,
            Kind::Riemann | Kind::Gauge | Kind::Endo => 2,
            _ => 0,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Kind::Metric => "g",
            Kind::Delta => "delta",
            Kind::Wave => "k",
            Kind::Torsion => "T",
            Kind::Riemann => "R",
            Kind::Gauge => "W",
            Kind::Endo => "X",
            Kind::Phase => "l",
            Kind::Transport => "I",
        }
    }

    pub fn from_symbol(s: &str) -> Option<Kind> {
        Kind::ALL.into_iter().find(|k| k.symbol() == s)
    }
}

pub type Indices = SmallVec<[Index; 4]>;

/// `D_{d1} ... D_{dp} F_{slots}`: leading covariant derivatives (outermost
/// first) applied to a kernel factor.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Factor {
    pub kind: Kind,
    pub derivs: Indices,
    pub slots: Indices,
}

impl Factor {
    pub fn new(kind: Kind, derivs: &[Index], slots: &[Index]) -> Self {
        debug_assert!(
            kind.slot_counts().contains(&slots.len()),
            "{kind:?} with {} slots",
            slots.len()
        );
        Factor {
            kind,
            derivs: derivs.iter().copied().collect(),
            slots: slots.iter().copied().collect(),
        }
    }

    pub fn plain(kind: Kind, slots: &[Index]) -> Self {
        Self::new(kind, &[], slots)
    }

    pub fn indices(&self) -> impl Iterator<Item = &Index> {
        self.derivs.iter().chain(self.slots.iter())
    }

    pub fn indices_mut(&mut self) -> impl Iterator<Item = &mut Index> {
        self.derivs.iter_mut().chain(self.slots.iter_mut())
    }

    pub fn weight(&self) -> u32 {
        self.kind.weight()
            + if self.kind.weight() > 0 {
                self.derivs.len() as u32
            } else {
                0
            }
    }

    /// Whether slot `i` sits at the second point of a two-point object.
    pub fn slot_is_primed(&self, i: usize) -> bool {
        self.kind == Kind::Transport && self.slots.len() == 2 && i == 1
    }

    /// With one more derivative prepended.
    pub fn differentiated(&self, idx: Index) -> Self {
        let mut f = self.clone();
        f.derivs.insert(0, idx);
        f
    }
}

impl PartialOrd for Factor {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Factor {
    fn cmp(&self, other: &Self) -> Ordering {
        self.kind
            .cmp(&other.kind)
            .then(self.derivs.len().cmp(&other.derivs.len()))
            .then_with(|| self.slots.len().cmp(&other.slots.len()))
            .then_with(|| self.derivs.cmp(&other.derivs))
            .then_with(|| self.slots.cmp(&other.slots))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Term<C> {
    pub coeff: C,
    pub factors: Vec<Factor>,
}

impl<C: Coeff> Term<C> {
    pub fn new(coeff: C, factors: Vec<Factor>) -> Self {
        Term { coeff, factors }
    }

    pub fn scalar(coeff: C) -> Self {
        Term {
            coeff,
            factors: Vec::new(),
        }
    }

    pub fn indices(&self) -> impl Iterator<Item = &Index> {
        self.factors.iter().flat_map(|f| f.indices())
    }

    /// Indices whose label occurs exactly once, sorted.
    pub fn free_indices(&self) -> Vec<Index> {
        let mut seen: Vec<(Label, usize, Index)> = Vec::new();
        for idx in self.indices() {
            match seen.iter_mut().find(|(l, _, _)| *l == idx.label) {
                Some(e) => e.1 += 1,
                None => seen.push((idx.label, 1, *idx)),
            }
        }
        let mut out: Vec<Index> = seen
            .into_iter()
            .filter(|(_, c, _)| *c == 1)
            .map(|(_, _, i)| i)
            .collect();
        out.sort();
        out
    }

    pub fn weight(&self) -> u32 {
        self.factors.iter().map(Factor::weight).sum()
    }

    pub fn count_kind(&self, kind: Kind) -> usize {
        self.factors.iter().filter(|f| f.kind == kind).count()
    }

    pub fn map_coeff<D: Coeff>(&self, f: impl FnOnce(&C) -> D) -> Term<D> {
        Term {
            coeff: f(&self.coeff),
            factors: self.factors.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TensorExpr<C> {
    pub terms: Vec<Term<C>>,
}

impl<C: Coeff> Default for TensorExpr<C> {
    fn default() -> Self {
        Self::zero()
    }
}

impl<C: Coeff> TensorExpr<C> {
    pub fn zero() -> Self {
        TensorExpr { terms: Vec::new() }
    }

    pub fn from_terms(terms: Vec<Term<C>>) -> Self {
        TensorExpr {
            terms: terms.into_iter().filter(|t| !t.coeff.is_zero()).collect(),
        }
    }

    pub fn single(t: Term<C>) -> Self {
        Self::from_terms(vec![t])
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn push(&mut self, t: Term<C>) {
        if !t.coeff.is_zero() {
            self.terms.push(t);
        }
    }

    pub fn extend(&mut self, other: TensorExpr<C>) {
        self.terms.extend(other.terms);
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.terms.extend(other.terms.iter().cloned());
        out
    }

    pub fn negated(&self) -> Self {
        TensorExpr {
            terms: self
                .terms
                .iter()
                .map(|t| {
                    let mut t = t.clone();
                    t.coeff.negate();
                    t
                })
                .collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.negated())
    }

    pub fn scaled(&self, r: &crate::num::Rational) -> Self {
        let p = crate::poly::RPoly::constant(r.clone());
        TensorExpr {
            terms: self
                .terms
                .iter()
                .map(|t| {
                    let mut t = t.clone();
                    t.coeff.mul_poly(&p);
                    t
                })
                .filter(|t| !t.coeff.is_zero())
                .collect(),
        }
    }

    /// Free indices of the first term (all terms agree when homogeneous).
    pub fn free_indices(&self) -> Vec<Index> {
        self.terms
            .first()
            .map(|t| t.free_indices())
            .unwrap_or_default()
    }

    pub fn map_coeffs<D: Coeff>(&self, f: impl Fn(&C) -> D) -> TensorExpr<D> {
        TensorExpr::from_terms(self.terms.iter().map(|t| t.map_coeff(&f)).collect())
    }

    pub fn max_weight(&self) -> u32 {
        self.terms.iter().map(Term::weight).max().unwrap_or(0)
    }
}
