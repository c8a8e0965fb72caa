//! Rational functions whose denominators factor over a fixed family of
//! linear polynomials: `a`, `1 - a` and `n + c` for integer `c`.
//!
//! Every denominator produced by the Gauss/Prudnikov reductions lies in
//! this family, so normalization reduces to trial division by linear
//! factors and no multivariate gcd is required.

use std::collections::BTreeMap;
use std::fmt;

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::num::{int, Rational};
use crate::poly::{RPoly, Var, VarNames};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DenFactor {
    /// `a`
    Param,
    /// `1 - a`
    OneMinusParam,
    /// `n + c`
    DimPlus(i32),
}

impl DenFactor {
    pub fn as_poly(self) -> RPoly {
        match self {
            DenFactor::Param => RPoly::var(Var::Param),
            DenFactor::OneMinusParam => &RPoly::one() - &RPoly::var(Var::Param),
            DenFactor::DimPlus(c) => &RPoly::var(Var::Dim) + &RPoly::constant(int(c as i64)),
        }
    }

    fn divide(self, p: &RPoly) -> Option<RPoly> {
        match self {
            DenFactor::Param => p.div_var_pow(Var::Param, 1),
            DenFactor::OneMinusParam => p.div_linear(Var::Param, &int(1)).map(|q| -q),
            DenFactor::DimPlus(c) => p.div_linear(Var::Dim, &int(-(c as i64))),
        }
    }

    fn fmt_with(self, names: VarNames) -> String {
        let a = names.0[1];
        let n = names.0[0];
        match self {
            DenFactor::Param => a.to_string(),
            DenFactor::OneMinusParam => format!("(1-{a})"),
            DenFactor::DimPlus(0) => n.to_string(),
            DenFactor::DimPlus(c) if c > 0 => format!("({n}+{c})"),
            DenFactor::DimPlus(c) => format!("({n}-{})", -c),
        }
    }
}

/// Normalized quotient `num / prod(factor^power)`.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RatFunc {
    num: RPoly,
    den: BTreeMap<DenFactor, u32>,
}

impl Default for RatFunc {
    fn default() -> Self {
        Self::zero()
    }
}

impl RatFunc {
    pub fn zero() -> Self {
        RatFunc {
            num: RPoly::zero(),
            den: BTreeMap::new(),
        }
    }

    pub fn one() -> Self {
        Self::from_poly(RPoly::one())
    }

    pub fn from_poly(num: RPoly) -> Self {
        RatFunc {
            num,
            den: BTreeMap::new(),
        }
    }

    pub fn constant(c: Rational) -> Self {
        Self::from_poly(RPoly::constant(c))
    }

    pub fn from_i64(v: i64) -> Self {
        Self::constant(int(v))
    }

    pub fn new(num: RPoly, den: BTreeMap<DenFactor, u32>) -> Self {
        let mut r = RatFunc { num, den };
        r.normalize();
        r
    }

    pub fn numer(&self) -> &RPoly {
        &self.num
    }

    pub fn denom(&self) -> &BTreeMap<DenFactor, u32> {
        &self.den
    }

    pub fn denom_poly(&self) -> RPoly {
        self.den
            .iter()
            .fold(RPoly::one(), |acc, (f, &k)| &acc * &f.as_poly().pow(k))
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub fn is_one(&self) -> bool {
        self.den.is_empty() && self.num == RPoly::one()
    }

    pub fn constant_value(&self) -> Option<Rational> {
        if self.den.is_empty() {
            self.num.constant_value()
        } else {
            None
        }
    }

    fn normalize(&mut self) {
        if self.num.is_zero() {
            self.den.clear();
            return;
        }
        let factors: Vec<DenFactor> = self.den.keys().copied().collect();
        for f in factors {
            loop {
                let k = self.den[&f];
                if k == 0 {
                    self.den.remove(&f);
                    break;
                }
                match f.divide(&self.num) {
                    Some(q) => {
                        self.num = q;
                        if k == 1 {
                            self.den.remove(&f);
                            break;
                        }
                        self.den.insert(f, k - 1);
                    }
                    None => break,
                }
            }
        }
    }

    pub fn div_factor(&self, f: DenFactor, k: u32) -> Self {
        let mut den = self.den.clone();
        *den.entry(f).or_insert(0) += k;
        Self::new(self.num.clone(), den)
    }

    /// Multiplies by `f^k`, cancelling against the denominator first.
    pub fn mul_factor(&self, f: DenFactor, k: u32) -> Self {
        let mut den = self.den.clone();
        let mut num = self.num.clone();
        let have = den.get(&f).copied().unwrap_or(0);
        let cancel = have.min(k);
        if cancel > 0 {
            if have == cancel {
                den.remove(&f);
            } else {
                den.insert(f, have - cancel);
            }
        }
        if k > cancel {
            num = &num * &f.as_poly().pow(k - cancel);
        }
        Self::new(num, den)
    }

    pub fn scale(&self, c: &Rational) -> Self {
        if c.is_zero() {
            return Self::zero();
        }
        RatFunc {
            num: self.num.scale(c),
            den: self.den.clone(),
        }
    }

    pub fn mul_poly(&self, p: &RPoly) -> Self {
        Self::new(&self.num * p, self.den.clone())
    }

    pub fn add(&self, rhs: &Self) -> Self {
        if rhs.is_zero() {
            return self.clone();
        }
        if self.is_zero() {
            return rhs.clone();
        }
        let mut den = self.den.clone();
        for (f, &k) in &rhs.den {
            let e = den.entry(*f).or_insert(0);
            *e = (*e).max(k);
        }
        let lift = |r: &RatFunc| -> RPoly {
            let mut num = r.num.clone();
            for (f, &k) in &den {
                let have = r.den.get(f).copied().unwrap_or(0);
                if k > have {
                    num = &num * &f.as_poly().pow(k - have);
                }
            }
            num
        };
        let num = &lift(self) + &lift(rhs);
        Self::new(num, den)
    }

    pub fn neg(&self) -> Self {
        RatFunc {
            num: -&self.num,
            den: self.den.clone(),
        }
    }

    pub fn sub(&self, rhs: &Self) -> Self {
        self.add(&rhs.neg())
    }

    pub fn mul(&self, rhs: &Self) -> Self {
        let mut den = self.den.clone();
        for (f, &k) in &rhs.den {
            *den.entry(*f).or_insert(0) += k;
        }
        Self::new(&self.num * &rhs.num, den)
    }

    /// Division by a rational function whose numerator is a constant times a
    /// product of denominator-family factors.
    pub fn checked_div(&self, rhs: &Self) -> Option<Self> {
        if rhs.is_zero() {
            return None;
        }
        let (c, factors) = factor_over_family(&rhs.num)?;
        let mut out = self.scale(&(Rational::one() / c));
        for (f, k) in factors {
            out = out.div_factor(f, k);
        }
        for (f, &k) in &rhs.den {
            out = out.mul_factor(*f, k);
        }
        Some(out)
    }

    /// Substitutes `v := q` where `q` is a polynomial free of denominators in
    /// `v`; the denominator factors are mapped when possible.
    pub fn subs_value(&self, v: Var, value: &Rational) -> Option<Self> {
        let num = self.num.subs(v, &RPoly::constant(value.clone()));
        let mut den_val = Rational::one();
        let mut den = BTreeMap::new();
        for (f, &k) in &self.den {
            let hit = matches!(
                (f, v),
                (DenFactor::Param | DenFactor::OneMinusParam, Var::Param)
                    | (DenFactor::DimPlus(_), Var::Dim)
            );
            if hit {
                let fv = f
                    .as_poly()
                    .subs(v, &RPoly::constant(value.clone()))
                    .constant_value()?;
                if fv.is_zero() {
                    return None;
                }
                for _ in 0..k {
                    den_val = &den_val * &fv;
                }
            } else {
                den.insert(*f, k);
            }
        }
        Some(Self::new(num.scale(&(Rational::one() / den_val)), den))
    }

    pub fn contains(&self, v: Var) -> bool {
        self.num.contains(v)
            || self.den.keys().any(|f| match (f, v) {
                (DenFactor::Param | DenFactor::OneMinusParam, Var::Param) => true,
                (DenFactor::DimPlus(_), Var::Dim) => true,
                _ => false,
            })
    }

    pub fn eval_f64(&self, vals: &[f64; 3]) -> f64 {
        let num = self.num.map_coeffs(crate::num::rat_to_f64).eval(vals);
        let den = self
            .denom_poly()
            .map_coeffs(crate::num::rat_to_f64)
            .eval(vals);
        num / den
    }

    pub fn fmt_with(&self, names: VarNames) -> String {
        let num = self.num.fmt_with(names);
        if self.den.is_empty() {
            return num;
        }
        let den: Vec<String> = self
            .den
            .iter()
            .map(|(f, &k)| {
                if k == 1 {
                    f.fmt_with(names)
                } else {
                    format!("{}^{}", f.fmt_with(names), k)
                }
            })
            .collect();
        match den.as_slice() {
            [single] if single.starts_with('(') || !single.contains(['*', '^']) => {
                format!("({num})/{single}")
            }
            _ => format!("({})/({})", num, den.join("*")),
        }
    }
}

/// Splits a polynomial into `c * prod(f^k)` over the denominator family.
pub fn factor_over_family(p: &RPoly) -> Option<(Rational, Vec<(DenFactor, u32)>)> {
    let mut rest = p.clone();
    let mut out = Vec::new();
    let mut candidates = vec![DenFactor::Param, DenFactor::OneMinusParam];
    // Dimension roots of a factorable polynomial are integers bounded by the
    // constant term; scan a generous window.
    for c in -64..=64 {
        candidates.push(DenFactor::DimPlus(c));
    }
    for f in candidates {
        let mut k = 0;
        while !rest.is_constant() {
            match f.divide(&rest) {
                Some(q) => {
                    rest = q;
                    k += 1;
                }
                None => break,
            }
        }
        if k > 0 {
            out.push((f, k));
        }
    }
    let c = rest.constant_value()?;
    Some((c, out))
}

impl fmt::Display for RatFunc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.fmt_with(VarNames::SYMBOLIC))
    }
}

impl fmt::Debug for RatFunc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "RatFunc({self})")
    }
}
