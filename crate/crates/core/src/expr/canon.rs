//! Canonical form of terms and expressions.
//!
//! The canonical representative of a term is the lexicographically smallest
//! encoding over all admissible factor orders, all mono-term slot
//! symmetries, and positional dummy renaming. The minimum is found by a
//! breadth-first search that places one factor per step and keeps every
//! partial placement tied for the smallest prefix. If two minimal
//! placements disagree in sign the term equals its own negative and
//! vanishes.

use std::collections::{BTreeMap, HashMap, HashSet};

use smallvec::SmallVec;

use super::{Coeff, ExprError, Factor, Index, Kind, Label, TensorExpr, Term};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
enum Enc {
    Free(Label, bool),
    Dummy(u16),
}

type Perm = (&'static [usize], i8);

const ID0: [Perm; 1] = [(&[], 1)];
const ID1: [Perm; 1] = [(&[0], 1)];
const ID2: [Perm; 1] = [(&[0, 1], 1)];
const SYM2: [Perm; 2] = [(&[0, 1], 1), (&[1, 0], 1)];
const ASYM2: [Perm; 2] = [(&[0, 1], 1), (&[1, 0], -1)];
const TORSION: [Perm; 2] = [(&[0, 1, 2], 1), (&[0, 2, 1], -1)];
const RIEMANN: [Perm; 4] = [
    (&[0, 1, 2, 3], 1),
    (&[1, 0, 2, 3], -1),
    (&[0, 1, 3, 2], -1),
    (&[1, 0, 3, 2], 1),
];

/// Slot permutations (new slot i takes old slot `perm[i]`) with their signs.
fn symmetries(f: &Factor) -> &'static [Perm] {
    match (f.kind, f.slots.len()) {
        (Kind::Metric | Kind::Delta, 2) => &SYM2,
        (Kind::Gauge, 2) => &ASYM2,
        (Kind::Torsion, 3) => &TORSION,
        (Kind::Riemann, 4) => &RIEMANN,
        (_, 0) => &ID0,
        (_, 1) => &ID1,
        (_, 2) => &ID2,
        (k, n) => panic!("{k:?} cannot carry {n} slots"),
    }
}

fn static_key(f: &Factor) -> (Kind, usize, usize) {
    let kind = if f.kind == Kind::Delta {
        Kind::Metric
    } else {
        f.kind
    };
    (kind, f.derivs.len(), f.slots.len())
}

#[derive(Clone)]
struct State {
    placed: Vec<(usize, usize)>,
    /// (original label, new id, occurrences seen)
    map: Vec<(Label, u16, u8)>,
    next: u16,
    sign: i8,
    remaining: Vec<bool>,
}

impl State {
    fn encode(
        &mut self,
        f: &Factor,
        perm: &[usize],
        contracted: &HashSet<Label>,
    ) -> SmallVec<[Enc; 8]> {
        let mut out = SmallVec::new();
        let slots = perm.iter().map(|&p| &f.slots[p]);
        for idx in f.derivs.iter().chain(slots) {
            if contracted.contains(&idx.label) {
                match self.map.iter_mut().find(|e| e.0 == idx.label) {
                    Some(e) => {
                        e.2 += 1;
                        out.push(Enc::Dummy(e.1));
                    }
                    None => {
                        self.map.push((idx.label, self.next, 1));
                        out.push(Enc::Dummy(self.next));
                        self.next += 1;
                    }
                }
            } else {
                out.push(Enc::Free(idx.label, idx.up));
            }
        }
        out
    }

    fn dedup_key(&self) -> (Vec<bool>, i8, Vec<(Label, u16)>) {
        let mut open: Vec<(Label, u16)> = self
            .map
            .iter()
            .filter(|e| e.2 == 1)
            .map(|e| (e.0, e.1))
            .collect();
        open.sort();
        (self.remaining.clone(), self.sign, open)
    }
}

/// Validates index multiplicities and returns the set of contracted labels.
fn contracted_labels(factors: &[Factor]) -> Result<HashSet<Label>, ExprError> {
    let mut occ: HashMap<Label, (u8, bool)> = HashMap::new();
    for idx in factors.iter().flat_map(|f| f.indices()) {
        let e = occ.entry(idx.label).or_insert((0, idx.up));
        e.0 += 1;
        if e.0 > 2 {
            return Err(ExprError::MalformedIndexing(
                idx.label.to_string(),
                "occurs more than twice",
            ));
        }
        if e.0 == 2 && e.1 == idx.up {
            return Err(ExprError::MalformedIndexing(
                idx.label.to_string(),
                "is contracted with equal variance",
            ));
        }
    }
    Ok(occ
        .into_iter()
        .filter(|(_, (c, _))| *c == 2)
        .map(|(l, _)| l)
        .collect())
}

/// Canonical form of one term; `None` when the term vanishes.
pub fn canonicalize_term<C: Coeff>(t: &Term<C>) -> Result<Option<Term<C>>, ExprError> {
    if t.coeff.is_zero() {
        return Ok(None);
    }
    let contracted = contracted_labels(&t.factors)?;
    if t.factors
        .iter()
        .any(|f| f.kind.is_parallel() && !f.derivs.is_empty())
    {
        return Ok(None);
    }
    let nf = t.factors.len();

    // Placement plan: commuting factors grouped by static key, then the
    // bundle word in its given order.
    let mut commuting: Vec<usize> = (0..nf)
        .filter(|&i| !t.factors[i].kind.is_bundle())
        .collect();
    commuting.sort_by_key(|&i| static_key(&t.factors[i]));
    let bundle: Vec<usize> = (0..nf).filter(|&i| t.factors[i].kind.is_bundle()).collect();

    let mut frontier = vec![State {
        placed: Vec::with_capacity(nf),
        map: Vec::new(),
        next: 0,
        sign: 1,
        remaining: vec![true; nf],
    }];

    for pos in 0..nf {
        let candidates: Vec<usize> = if pos < commuting.len() {
            let key = static_key(&t.factors[commuting[pos]]);
            commuting
                .iter()
                .copied()
                .filter(|&i| static_key(&t.factors[i]) == key)
                .collect()
        } else {
            vec![bundle[pos - commuting.len()]]
        };
        let mut best: Option<SmallVec<[Enc; 8]>> = None;
        let mut next_frontier: Vec<State> = Vec::new();
        let mut seen = HashSet::new();
        for st in &frontier {
            for &fi in &candidates {
                if !st.remaining[fi] {
                    continue;
                }
                let f = &t.factors[fi];
                for (si, (perm, sgn)) in symmetries(f).iter().enumerate() {
                    let mut ns = st.clone();
                    let enc = ns.encode(f, perm, &contracted);
                    let ord = match &best {
                        None => std::cmp::Ordering::Less,
                        Some(b) => enc.cmp(b),
                    };
                    if ord == std::cmp::Ordering::Greater {
                        continue;
                    }
                    if ord == std::cmp::Ordering::Less {
                        best = Some(enc);
                        next_frontier.clear();
                        seen.clear();
                    }
                    ns.placed.push((fi, si));
                    ns.sign *= sgn;
                    ns.remaining[fi] = false;
                    if seen.insert(ns.dedup_key()) {
                        next_frontier.push(ns);
                    }
                }
            }
        }
        frontier = next_frontier;
    }

    let sign = frontier[0].sign;
    if frontier.iter().any(|s| s.sign != sign) {
        return Ok(None);
    }
    let st = &frontier[0];
    let relabel: HashMap<Label, u16> = st.map.iter().map(|e| (e.0, e.1)).collect();
    let mut seen_dummy: HashSet<u16> = HashSet::new();
    let mut factors = Vec::with_capacity(nf);
    for &(fi, si) in &st.placed {
        let f = &t.factors[fi];
        let (perm, _) = symmetries(f)[si];
        let mut nf = Factor {
            kind: f.kind,
            derivs: f.derivs.clone(),
            slots: perm.iter().map(|&p| f.slots[p]).collect(),
        };
        for idx in nf.indices_mut() {
            if let Some(&id) = relabel.get(&idx.label) {
                let first = seen_dummy.insert(id);
                *idx = Index {
                    label: Label::Dummy(id),
                    up: !first,
                };
            }
        }
        if matches!(nf.kind, Kind::Metric | Kind::Delta) {
            nf.kind = if nf.slots[0].up == nf.slots[1].up {
                Kind::Metric
            } else {
                Kind::Delta
            };
        }
        factors.push(nf);
    }
    let mut coeff = t.coeff.clone();
    if sign < 0 {
        coeff.negate();
    }
    Ok(Some(Term { coeff, factors }))
}

/// Canonicalizes every term and merges like terms; the result is sorted.
pub fn canonicalize<C: Coeff>(e: &TensorExpr<C>) -> Result<TensorExpr<C>, ExprError> {
    let mut acc: BTreeMap<Vec<Factor>, C> = BTreeMap::new();
    for t in &e.terms {
        if let Some(c) = canonicalize_term(t)? {
            match acc.get_mut(&c.factors) {
                Some(v) => v.add_assign(&c.coeff),
                None => {
                    acc.insert(c.factors, c.coeff);
                }
            }
        }
    }
    Ok(TensorExpr {
        terms: acc
            .into_iter()
            .filter(|(_, c)| !c.is_zero())
            .map(|(factors, coeff)| Term { coeff, factors })
            .collect(),
    })
}

/// Checks that all terms carry the same free indices.
pub fn check_homogeneous<C: Coeff>(e: &TensorExpr<C>) -> Result<Vec<Index>, ExprError> {
    let mut it = e.terms.iter();
    let Some(first) = it.next() else {
        return Ok(Vec::new());
    };
    let free = first.free_indices();
    for t in it {
        if t.free_indices() != free {
            return Err(ExprError::RankMismatch);
        }
    }
    Ok(free)
}
