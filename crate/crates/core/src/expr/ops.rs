use std::collections::HashMap;

use super::{canonicalize, Coeff, CoeffRing, ExprError, Factor, Index, Label, TensorExpr, Term};
use crate::num::{factorial, Rational};

/// One past the largest dummy id used by `t`.
pub fn fresh_dummy_base<C: Coeff>(t: &Term<C>) -> u16 {
    t.indices()
        .filter_map(|i| match i.label {
            Label::Dummy(k) => Some(k + 1),
            Label::Free(_) => None,
        })
        .max()
        .unwrap_or(0)
}

fn contracted<C: Coeff>(t: &Term<C>) -> Vec<Label> {
    let mut counts: Vec<(Label, u8)> = Vec::new();
    for i in t.indices() {
        match counts.iter_mut().find(|(l, _)| *l == i.label) {
            Some(e) => e.1 += 1,
            None => counts.push((i.label, 1)),
        }
    }
    counts
        .into_iter()
        .filter(|(_, c)| *c == 2)
        .map(|(l, _)| l)
        .collect()
}

/// Renames every contracted label of `t` to `Dummy(base)`, `Dummy(base+1)`, ...
/// Returns the next unused id.
pub fn rename_contracted_apart<C: Coeff>(t: &mut Term<C>, base: u16) -> u16 {
    let map: HashMap<Label, Label> = contracted(t)
        .into_iter()
        .enumerate()
        .map(|(k, l)| (l, Label::Dummy(base + k as u16)))
        .collect();
    let next = base + map.len() as u16;
    for f in &mut t.factors {
        for idx in f.indices_mut() {
            if let Some(&l) = map.get(&idx.label) {
                idx.label = l;
            }
        }
    }
    next
}

/// Product of two terms; shared free labels become contractions.
pub fn product_terms<C: CoeffRing>(a: &Term<C>, b: &Term<C>) -> Term<C> {
    let mut a = a.clone();
    let mut b = b.clone();
    let base = fresh_dummy_base(&a).max(fresh_dummy_base(&b));
    let next = rename_contracted_apart(&mut a, base);
    rename_contracted_apart(&mut b, next);
    let mut factors = a.factors;
    factors.extend(b.factors);
    Term {
        coeff: a.coeff.mul(&b.coeff),
        factors,
    }
}

/// Distributed product (not canonicalized).
pub fn product<C: CoeffRing>(a: &TensorExpr<C>, b: &TensorExpr<C>) -> TensorExpr<C> {
    let mut out = Vec::with_capacity(a.len() * b.len());
    for x in &a.terms {
        for y in &b.terms {
            out.push(product_terms(x, y));
        }
    }
    TensorExpr::from_terms(out)
}

/// Replaces free labels; each entry maps an old label to the new index and
/// a flag telling whether the variance must be flipped relative to the old
/// occurrence (`false` keeps the variance written in the expression).
/// Contracted labels of `t` are renamed to dummies numbered from at least
/// `min_dummy` so they cannot collide with a host term.
pub fn relabel_free<C: Coeff>(
    t: &Term<C>,
    map: &HashMap<Label, (Label, bool)>,
    min_dummy: u16,
) -> Term<C> {
    let mut t = t.clone();
    let target_base = map
        .values()
        .filter_map(|(l, _)| match l {
            Label::Dummy(k) => Some(k + 1),
            _ => None,
        })
        .max()
        .unwrap_or(0);
    let base = fresh_dummy_base(&t).max(target_base).max(min_dummy);
    rename_contracted_apart(&mut t, base);
    let internal = contracted(&t);
    for f in &mut t.factors {
        for idx in f.indices_mut() {
            if internal.contains(&idx.label) {
                continue;
            }
            if let Some(&(l, flip)) = map.get(&idx.label) {
                idx.label = l;
                if flip {
                    idx.up = !idx.up;
                }
            }
        }
    }
    t
}

/// Normalized symmetrization over free labels: the mean over all
/// permutations (weight `1/m!`), canonicalized.
pub fn symmetrize<C: Coeff>(e: &TensorExpr<C>, idx: &[Label]) -> Result<TensorExpr<C>, ExprError> {
    if e.is_zero() {
        return Ok(TensorExpr::zero());
    }
    let free = e.free_indices();
    let mut targets = Vec::new();
    for l in idx {
        match free.iter().find(|i| i.label == *l) {
            Some(i) => targets.push(*i),
            None => return Err(ExprError::UnknownIndex(l.to_string())),
        }
    }
    let mut out = TensorExpr::zero();
    for perm in permutations(idx.len()) {
        let map: HashMap<Label, (Label, bool)> = targets
            .iter()
            .enumerate()
            .map(|(i, src)| {
                let dst = targets[perm[i]];
                (src.label, (dst.label, src.up != dst.up))
            })
            .collect();
        for t in &e.terms {
            out.push(relabel_free(t, &map, 0));
        }
    }
    let w = Rational::from_integer(1.into()) / factorial(idx.len() as u32);
    canonicalize(&out.scaled(&w))
}

/// All permutations of `0..n` in lexicographic order.
pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..n).collect();
    loop {
        out.push(cur.clone());
        // next lexicographic permutation
        let Some(i) = (1..n).rev().find(|&i| cur[i - 1] < cur[i]) else {
            break;
        };
        let j = (i..n).rev().find(|&j| cur[j] > cur[i - 1]).unwrap();
        cur.swap(i - 1, j);
        cur[i..].reverse();
    }
    out
}

struct PatternInfo {
    free: Vec<Label>,
}

fn pattern_info(pattern: &[Factor]) -> PatternInfo {
    let mut counts: Vec<(Label, u8)> = Vec::new();
    for i in pattern.iter().flat_map(|f| f.indices()) {
        match counts.iter_mut().find(|(l, _)| *l == i.label) {
            Some(e) => e.1 += 1,
            None => counts.push((i.label, 1)),
        }
    }
    PatternInfo {
        free: counts
            .iter()
            .filter(|(_, c)| *c == 1)
            .map(|(l, _)| *l)
            .collect(),
    }
}

/// Finds an injective assignment of pattern factors to term factors.
fn match_pattern<C: Coeff>(
    t: &Term<C>,
    pattern: &[Factor],
) -> Option<(Vec<usize>, HashMap<Label, Index>)> {
    fn go<C: Coeff>(
        t: &Term<C>,
        pattern: &[Factor],
        k: usize,
        used: &mut Vec<usize>,
        binding: &mut HashMap<Label, Index>,
    ) -> bool {
        if k == pattern.len() {
            return true;
        }
        let p = &pattern[k];
        for (fi, f) in t.factors.iter().enumerate() {
            if used.contains(&fi)
                || f.kind != p.kind
                || f.derivs.len() != p.derivs.len()
                || f.slots.len() != p.slots.len()
            {
                continue;
            }
            let saved = binding.clone();
            let mut ok = true;
            for (pi, ti) in p.indices().zip(f.indices()) {
                match binding.get(&pi.label) {
                    // Second occurrence of a pattern label: the term must
                    // contract the same pair.
                    Some(prev) => {
                        if prev.label != ti.label || prev.up == ti.up {
                            ok = false;
                            break;
                        }
                    }
                    None => {
                        binding.insert(pi.label, *ti);
                    }
                }
            }
            if ok {
                used.push(fi);
                if go(t, pattern, k + 1, used, binding) {
                    return true;
                }
                used.pop();
            }
            *binding = saved;
        }
        false
    }
    let mut used = Vec::new();
    let mut binding = HashMap::new();
    if go(t, pattern, 0, &mut used, &mut binding) {
        Some((used, binding))
    } else {
        None
    }
}

/// Replaces every occurrence of the factor product `pattern` by
/// `replacement`, whose free labels must be exactly the pattern's free
/// labels. Pattern labels occurring twice must match a contracted pair.
pub fn substitute<C: CoeffRing>(
    e: &TensorExpr<C>,
    pattern: &[Factor],
    replacement: &TensorExpr<C>,
) -> Result<TensorExpr<C>, ExprError> {
    let info = pattern_info(pattern);
    let mut pf = info.free.clone();
    pf.sort();
    for t in &replacement.terms {
        let mut rf: Vec<Label> = t.free_indices().iter().map(|i| i.label).collect();
        rf.sort();
        if rf != pf {
            return Err(ExprError::ArityMismatch);
        }
    }
    // Variance of each pattern free label as written in the pattern.
    let pattern_up: HashMap<Label, bool> = pattern
        .iter()
        .flat_map(|f| f.indices())
        .filter(|i| info.free.contains(&i.label))
        .map(|i| (i.label, i.up))
        .collect();

    let mut work: Vec<Term<C>> = e.terms.clone();
    let mut done: Vec<Term<C>> = Vec::new();
    let mut guard = 0usize;
    while let Some(t) = work.pop() {
        guard += 1;
        if guard > 1_000_000 {
            return Err(ExprError::Parse("substitution does not terminate".into()));
        }
        let Some((used, binding)) = match_pattern(&t, pattern) else {
            done.push(t);
            continue;
        };
        let insert_at = *used.iter().min().unwrap();
        let mut rest = t.clone();
        let mut sorted = used.clone();
        sorted.sort_unstable_by(|a, b| b.cmp(a));
        for fi in &sorted {
            rest.factors.remove(*fi);
        }
        let insert_at = insert_at.min(rest.factors.len());
        let base = fresh_dummy_base(&t);
        for r in &replacement.terms {
            let r = r.clone();
            let mut map = HashMap::new();
            for l in &info.free {
                let target = binding[l];
                map.insert(*l, (target.label, target.up != pattern_up[l]));
            }
            // keep replacement dummies away from the host term's labels
            let host_max = rest
                .indices()
                .map(|i| match i.label {
                    Label::Dummy(k) => k + 1,
                    Label::Free(_) => 0,
                })
                .max()
                .unwrap_or(0);
            let r = relabel_free(&r, &map, base.max(host_max));
            let mut factors = rest.factors[..insert_at].to_vec();
            factors.extend(r.factors.iter().cloned());
            factors.extend(rest.factors[insert_at..].iter().cloned());
            work.push(Term {
                coeff: rest.coeff.mul(&r.coeff),
                factors,
            });
        }
    }
    canonicalize(&TensorExpr::from_terms(done))
}
