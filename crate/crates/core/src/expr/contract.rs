use super::{canonicalize, Coeff, ExprError, Index, Kind, TensorExpr, Term};
use crate::poly::{RPoly, Var};

/// Eliminates metric and Kronecker factors that share an index with anything
/// else, renaming the partner index; `δ^α_α` becomes the scalar `n`.
/// Returns `None` if the term vanishes (a differentiated metric).
pub fn contract_metric_term<C: Coeff>(t: &Term<C>) -> Option<Term<C>> {
    let mut t = t.clone();
    'outer: loop {
        for gi in 0..t.factors.len() {
            let g = &t.factors[gi];
            if !matches!(g.kind, Kind::Metric | Kind::Delta) {
                continue;
            }
            if !g.derivs.is_empty() {
                return None;
            }
            let (s0, s1) = (g.slots[0], g.slots[1]);
            if s0.label == s1.label {
                t.factors.remove(gi);
                t.coeff.mul_poly(&RPoly::var(Var::Dim));
                continue 'outer;
            }
            for (mine, other) in [(s0, s1), (s1, s0)] {
                if let Some((fi, pos)) = find_partner(&t, gi, mine) {
                    t.factors.remove(gi);
                    let fi = if fi > gi { fi - 1 } else { fi };
                    let slot = index_mut(&mut t, fi, pos);
                    *slot = Index {
                        label: other.label,
                        up: other.up,
                    };
                    continue 'outer;
                }
            }
        }
        break;
    }
    Some(t)
}

fn find_partner<C: Coeff>(t: &Term<C>, skip: usize, idx: Index) -> Option<(usize, usize)> {
    for (fi, f) in t.factors.iter().enumerate() {
        if fi == skip {
            continue;
        }
        if let Some(pos) = f.indices().position(|j| j.label == idx.label) {
            return Some((fi, pos));
        }
    }
    None
}

fn index_mut<C: Coeff>(t: &mut Term<C>, fi: usize, pos: usize) -> &mut Index {
    let f = &mut t.factors[fi];
    let nd = f.derivs.len();
    if pos < nd {
        &mut f.derivs[pos]
    } else {
        &mut f.slots[pos - nd]
    }
}

/// Metric contraction followed by canonicalization.
pub fn contract_metric<C: Coeff>(e: &TensorExpr<C>) -> Result<TensorExpr<C>, ExprError> {
    let terms = e.terms.iter().filter_map(contract_metric_term).collect();
    canonicalize(&TensorExpr::from_terms(terms))
}
