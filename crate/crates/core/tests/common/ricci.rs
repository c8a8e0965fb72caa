//! The commutator of two covariant derivatives against the explicit
//! background.

use heatker_core::expr::{free, Factor, Index, Kind, Label, TensorExpr, Term};
use heatker_core::rewrite::commute_pair;
use heatker_core::RPoly;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{random_binding, val_is_zero, Background};

pub fn idx(rng: &mut ChaCha8Rng, k: u16) -> Index {
    if rng.gen_bool(0.5) {
        Index::up(free(k))
    } else {
        Index::down(free(k))
    }
}

/// A field with 2 or 3 derivatives, all indices free and distinct, with an
/// occasional spectator factor in front.
pub fn random_term(rng: &mut ChaCha8Rng) -> (Term<RPoly>, usize, usize) {
    let kinds = [
        (Kind::Torsion, 3),
        (Kind::Riemann, 4),
        (Kind::Gauge, 2),
        (Kind::Endo, 2),
        (Kind::Endo, 0),
    ];
    let (kind, nslots) = kinds[rng.gen_range(0..kinds.len())];
    let nd = rng.gen_range(2..=3);
    let mut next = 0u16;
    let mut take = |rng: &mut ChaCha8Rng| {
        next += 1;
        idx(rng, next - 1)
    };
    let derivs: Vec<Index> = (0..nd).map(|_| take(rng)).collect();
    let slots: Vec<Index> = (0..nslots).map(|_| take(rng)).collect();
    let mut factors = Vec::new();
    if rng.gen_bool(0.3) {
        let s: Vec<Index> = (0..3).map(|_| take(rng)).collect();
        factors.push(Factor::plain(Kind::Torsion, &s));
    }
    let pos = factors.len();
    factors.push(Factor::new(kind, &derivs, &slots));
    let deriv_pos = rng.gen_range(0..nd - 1);
    (Term::new(RPoly::one(), factors), pos, deriv_pos)
}

/// Random derivative swaps, each evaluated at three random bindings.
pub fn ricci_cases(seed: u64, count: usize) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bgs: Vec<Background> = (0..3)
        .map(|s| Background::random(100 + s, 6, true))
        .collect();
    for case in 0..count {
        let (t, fpos, dpos) = random_term(&mut rng);
        let rhs = commute_pair(&t, fpos, dpos).map_err(|e| format!("case {case}: {e}"))?;
        let diff = TensorExpr::single(t.clone()).sub(&rhs);
        let bg = &bgs[case % bgs.len()];
        let labels: Vec<Label> = t.free_indices().iter().map(|i| i.label).collect();
        for _ in 0..3 {
            let bind = random_binding(&mut rng, &labels);
            if !val_is_zero(&bg.eval(&diff, &bind)) {
                return Err(format!("case {case}: {t:?} at {fpos}/{dpos}"));
            }
        }
    }
    Ok(())
}
