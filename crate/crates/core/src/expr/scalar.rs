//! Scalar coefficients of symbol expressions.
//!
//! Before integration a coefficient is a finite sum over momentum atoms
//! `i^q k^{2p} (k^2 - λ)^{-l} ((1-a)k^2 - λ)^{-m}` with polynomial
//! coefficients in `n` and `a`. Negative `l`, `m` encode positive powers
//! (the principal symbol itself).

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{Coeff, CoeffRing};
use crate::num::Rational;
use crate::poly::{RPoly, Var};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MomKey {
    /// Odd power of `i`; `i^2 = -1` is folded into the coefficient.
    pub i: bool,
    /// Power of `k^2`.
    pub p: u16,
    /// Power of `(k^2 - λ)^{-1}`.
    pub l: i16,
    /// Power of `((1-a)k^2 - λ)^{-1}`.
    pub m: i16,
}

impl MomKey {
    pub const ONE: MomKey = MomKey {
        i: false,
        p: 0,
        l: 0,
        m: 0,
    };

    pub fn new(i: bool, p: u16, l: i16, m: i16) -> Self {
        MomKey { i, p, l, m }
    }
}

impl fmt::Display for MomKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        if self.i {
            parts.push("i".to_string());
        }
        if self.p > 0 {
            parts.push(format!("k2^{}", self.p));
        }
        if self.l != 0 {
            parts.push(format!("P1^{}", -self.l));
        }
        if self.m != 0 {
            parts.push(format!("P2^{}", -self.m));
        }
        if parts.is_empty() {
            f.write_str("1")
        } else {
            f.write_str(&parts.join("*"))
        }
    }
}

/// Sum of momentum atoms with polynomial coefficients.
#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct ScalarCoeff {
    pub atoms: BTreeMap<MomKey, RPoly>,
}

impl ScalarCoeff {
    pub fn atom(key: MomKey, c: RPoly) -> Self {
        let mut atoms = BTreeMap::new();
        if !c.is_zero() {
            atoms.insert(key, c);
        }
        ScalarCoeff { atoms }
    }

    pub fn from_poly(c: RPoly) -> Self {
        Self::atom(MomKey::ONE, c)
    }

    pub fn one() -> Self {
        Self::from_poly(RPoly::one())
    }

    /// Multiplies by `i`.
    pub fn times_i(&self) -> Self {
        let mut out = ScalarCoeff::default();
        for (k, c) in &self.atoms {
            let (key, c) = if k.i {
                (MomKey { i: false, ..*k }, -c)
            } else {
                (MomKey { i: true, ..*k }, c.clone())
            };
            out.add_atom(key, &c);
        }
        out
    }

    pub fn add_atom(&mut self, key: MomKey, c: &RPoly) {
        if c.is_zero() {
            return;
        }
        match self.atoms.get_mut(&key) {
            Some(v) => {
                *v += c;
                if v.is_zero() {
                    self.atoms.remove(&key);
                }
            }
            None => {
                self.atoms.insert(key, c.clone());
            }
        }
    }

    /// Shifts every atom by `(dl, dm)` and scales by `c`.
    pub fn shifted(&self, dl: i16, dm: i16, c: &RPoly) -> Self {
        let mut out = ScalarCoeff::default();
        for (k, v) in &self.atoms {
            out.add_atom(
                MomKey {
                    l: k.l + dl,
                    m: k.m + dm,
                    ..*k
                },
                &(v * c),
            );
        }
        out
    }

    /// `D_α` of the propagator atoms divided by `D^η l D_α D_η l`, using
    /// `D_α (D l)^2 = 2 D^η l D_α D_η l`.
    pub fn propagator_derivative(&self) -> Self {
        let one_minus_a = &RPoly::one() - &RPoly::var(Var::Param);
        let mut out = ScalarCoeff::default();
        for (k, v) in &self.atoms {
            if k.l != 0 {
                let c = v.scale(&Rational::from_integer((-2 * k.l as i64).into()));
                out.add_atom(MomKey { l: k.l + 1, ..*k }, &c);
            }
            if k.m != 0 {
                let c = &v.scale(&Rational::from_integer((-2 * k.m as i64).into())) * &one_minus_a;
                out.add_atom(MomKey { m: k.m + 1, ..*k }, &c);
            }
        }
        out
    }

    /// Clears the propagators by multiplying with `P1^lmax P2^mmax` and
    /// expands in `k^2` and `λ`: map `(k2 power, λ power) -> coefficient`.
    /// Returns `None` if an atom has `l > lmax` or `m > mmax`, or carries `i`.
    pub fn expand_atoms(&self, lmax: i16, mmax: i16) -> Option<BTreeMap<(u16, u16), RPoly>> {
        type Bivar = BTreeMap<(u16, u16), RPoly>;
        fn mul(x: &Bivar, y: &Bivar) -> Bivar {
            let mut out: Bivar = BTreeMap::new();
            for (ex, cx) in x {
                for (ey, cy) in y {
                    let e = (ex.0 + ey.0, ex.1 + ey.1);
                    let v = out.entry(e).or_default();
                    *v += &(cx * cy);
                }
            }
            out.retain(|_, v| !v.is_zero());
            out
        }
        let p1: Bivar = [((1, 0), RPoly::one()), ((0, 1), RPoly::from_i64(-1))]
            .into_iter()
            .collect();
        let one_minus_a = &RPoly::one() - &RPoly::var(Var::Param);
        let p2: Bivar = [((1, 0), one_minus_a), ((0, 1), RPoly::from_i64(-1))]
            .into_iter()
            .collect();
        let pow = |b: &Bivar, e: i16| -> Bivar {
            let mut acc: Bivar = [((0, 0), RPoly::one())].into_iter().collect();
            for _ in 0..e {
                acc = mul(&acc, b);
            }
            acc
        };
        let mut out: Bivar = BTreeMap::new();
        for (k, v) in &self.atoms {
            if k.i || k.l > lmax || k.m > mmax {
                return None;
            }
            let mut term: Bivar = [((k.p, 0), v.clone())].into_iter().collect();
            term = mul(&term, &pow(&p1, lmax - k.l));
            term = mul(&term, &pow(&p2, mmax - k.m));
            for (e, c) in term {
                *out.entry(e).or_default() += &c;
            }
        }
        out.retain(|_, v| !v.is_zero());
        Some(out)
    }
}

impl Coeff for ScalarCoeff {
    fn zero() -> Self {
        ScalarCoeff::default()
    }

    fn is_zero(&self) -> bool {
        self.atoms.is_empty()
    }

    fn add_assign(&mut self, rhs: &Self) {
        for (k, v) in &rhs.atoms {
            self.add_atom(*k, v);
        }
    }

    fn mul_poly(&mut self, p: &RPoly) {
        for v in self.atoms.values_mut() {
            *v = &*v * p;
        }
        self.atoms.retain(|_, v| !v.is_zero());
    }

    fn from_poly_coeff(p: RPoly) -> Self {
        Self::from_poly(p)
    }
}

impl CoeffRing for ScalarCoeff {
    fn one() -> Self {
        ScalarCoeff::one()
    }

    fn mul(&self, rhs: &Self) -> Self {
        let mut out = ScalarCoeff::default();
        for (ka, va) in &self.atoms {
            for (kb, vb) in &rhs.atoms {
                let mut c = va * vb;
                if ka.i && kb.i {
                    c = -c;
                }
                let key = MomKey {
                    i: ka.i ^ kb.i,
                    p: ka.p + kb.p,
                    l: ka.l + kb.l,
                    m: ka.m + kb.m,
                };
                out.add_atom(key, &c);
            }
        }
        out
    }
}

impl fmt::Display for ScalarCoeff {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.atoms.is_empty() {
            return f.write_str("0");
        }
        let parts: Vec<String> = self
            .atoms
            .iter()
            .map(|(k, v)| format!("({v})*{k}"))
            .collect();
        f.write_str(&parts.join(" + "))
    }
}
