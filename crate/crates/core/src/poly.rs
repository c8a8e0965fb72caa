//! Sparse multivariate polynomials in the dimension `n`, the nonminimality
//! parameter `a` and one transcendental atom (`(1-a)^(-n/2)` in symbolic
//! dimension, `ln(1-a)` at fixed dimension).

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};

use crate::num::{fmt_rational, Rational, Scalar};

pub const NVARS: usize = 3;

/// Exponent vector indexed by [`Var`].
pub type Exps = [u16; NVARS];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Var {
    /// Spacetime dimension `n`.
    Dim = 0,
    /// Nonminimality parameter `a`.
    Param = 1,
    /// Transcendental atom of the elementary coefficient field.
    Atom = 2,
}

impl Var {
    pub const ALL: [Var; NVARS] = [Var::Dim, Var::Param, Var::Atom];

    pub fn idx(self) -> usize {
        self as usize
    }
}

#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Poly<C> {
    terms: BTreeMap<Exps, C>,
}

impl<C: Scalar> Default for Poly<C> {
    fn default() -> Self {
        Self::zero()
    }
}

impl<C: Scalar> Poly<C> {
    pub fn zero() -> Self {
        Poly {
            terms: BTreeMap::new(),
        }
    }

    pub fn one() -> Self {
        Self::constant(C::one())
    }

    pub fn constant(c: C) -> Self {
        let mut p = Self::zero();
        if !c.is_zero() {
            p.terms.insert([0; NVARS], c);
        }
        p
    }

    pub fn var(v: Var) -> Self {
        Self::monomial(C::one(), unit(v, 1))
    }

    pub fn monomial(c: C, e: Exps) -> Self {
        let mut p = Self::zero();
        if !c.is_zero() {
            p.terms.insert(e, c);
        }
        p
    }

    pub fn from_i64(v: i64) -> Self {
        Self::constant(C::from_i64(v))
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

    pub fn terms(&self) -> impl Iterator<Item = (&Exps, &C)> {
        self.terms.iter()
    }

    pub fn constant_value(&self) -> Option<C> {
        match self.terms.len() {
            0 => Some(C::zero()),
            1 => self.terms.get(&[0; NVARS]).cloned(),
            _ => None,
        }
    }

    pub fn is_constant(&self) -> bool {
        self.constant_value().is_some()
    }

    pub fn degree(&self, v: Var) -> u16 {
        self.terms.keys().map(|e| e[v.idx()]).max().unwrap_or(0)
    }

    pub fn min_degree(&self, v: Var) -> u16 {
        self.terms.keys().map(|e| e[v.idx()]).min().unwrap_or(0)
    }

    pub fn contains(&self, v: Var) -> bool {
        self.degree(v) > 0
    }

    fn add_term(&mut self, e: Exps, c: C) {
        if c.is_zero() {
            return;
        }
        match self.terms.get_mut(&e) {
            Some(old) => {
                let sum = old.clone() + c;
                if sum.is_zero() {
                    self.terms.remove(&e);
                } else {
                    *old = sum;
                }
            }
            None => {
                self.terms.insert(e, c);
            }
        }
    }

    pub fn scale(&self, c: &C) -> Self {
        if c.is_zero() {
            return Self::zero();
        }
        Poly {
            terms: self
                .terms
                .iter()
                .map(|(e, v)| (*e, v.clone() * c.clone()))
                .collect(),
        }
    }

    pub fn mul_monomial(&self, e: &Exps) -> Self {
        Poly {
            terms: self
                .terms
                .iter()
                .map(|(k, v)| {
                    let mut k = *k;
                    for i in 0..NVARS {
                        k[i] += e[i];
                    }
                    (k, v.clone())
                })
                .collect(),
        }
    }

    pub fn pow(&self, k: u32) -> Self {
        let mut out = Self::one();
        for _ in 0..k {
            out = &out * self;
        }
        out
    }

    pub fn eval(&self, vals: &[C; NVARS]) -> C {
        let mut acc = C::zero();
        for (e, c) in &self.terms {
            let mut t = c.clone();
            for (i, &k) in e.iter().enumerate() {
                for _ in 0..k {
                    t = t * vals[i].clone();
                }
            }
            acc = acc + t;
        }
        acc
    }

    /// Substitutes `v := q`.
    pub fn subs(&self, v: Var, q: &Poly<C>) -> Self {
        let by_power = self.coeffs_in(v);
        // Horner in q.
        let mut acc = Self::zero();
        for c in by_power.iter().rev() {
            acc = &(&acc * q) + c;
        }
        acc
    }

    /// Coefficients of `self` as a polynomial in `v`, lowest power first.
    pub fn coeffs_in(&self, v: Var) -> Vec<Poly<C>> {
        let d = self.degree(v) as usize;
        let mut out = vec![Self::zero(); d + 1];
        for (e, c) in &self.terms {
            let mut k = *e;
            let p = k[v.idx()] as usize;
            k[v.idx()] = 0;
            out[p].add_term(k, c.clone());
        }
        if self.is_zero() {
            out.clear();
        }
        out
    }

    /// Exact quotient by `(v - root)`, or `None` when it does not divide.
    pub fn div_linear(&self, v: Var, root: &C) -> Option<Self> {
        let cs = self.coeffs_in(v);
        if cs.is_empty() {
            return Some(Self::zero());
        }
        // Synthetic division from the top coefficient down.
        let d = cs.len() - 1;
        let rootp = Self::constant(root.clone());
        let mut q = vec![Self::zero(); d.max(1)];
        let mut carry = Self::zero();
        for i in (0..=d).rev() {
            let cur = &cs[i] + &(&carry * &rootp);
            if i == 0 {
                if !cur.is_zero() {
                    return None;
                }
            } else {
                q[i - 1] = cur.clone();
            }
            carry = cur;
        }
        let mut out = Self::zero();
        for (i, c) in q.into_iter().enumerate() {
            out = &out + &c.mul_monomial(&unit(v, i as u16));
        }
        Some(out)
    }

    /// Divides every monomial by `v^k`; `None` if some monomial has lower degree.
    pub fn div_var_pow(&self, v: Var, k: u16) -> Option<Self> {
        let mut out = Self::zero();
        for (e, c) in &self.terms {
            if e[v.idx()] < k {
                return None;
            }
            let mut e2 = *e;
            e2[v.idx()] -= k;
            out.terms.insert(e2, c.clone());
        }
        Some(out)
    }

    /// Drops every monomial with `v`-degree above `max`.
    pub fn truncate(&self, v: Var, max: u16) -> Self {
        Poly {
            terms: self
                .terms
                .iter()
                .filter(|(e, _)| e[v.idx()] <= max)
                .map(|(e, c)| (*e, c.clone()))
                .collect(),
        }
    }

    pub fn map_coeffs<D: Scalar>(&self, f: impl Fn(&C) -> D) -> Poly<D> {
        let mut out = Poly::zero();
        for (e, c) in &self.terms {
            out.add_term(*e, f(c));
        }
        out
    }

    pub fn leading(&self) -> Option<(&Exps, &C)> {
        self.terms.iter().next_back()
    }
}

fn unit(v: Var, k: u16) -> Exps {
    let mut e = [0; NVARS];
    e[v.idx()] = k;
    e
}

impl<C: Scalar> Add for &Poly<C> {
    type Output = Poly<C>;
    fn add(self, rhs: &Poly<C>) -> Poly<C> {
        let mut out = self.clone();
        for (e, c) in &rhs.terms {
            out.add_term(*e, c.clone());
        }
        out
    }
}

impl<C: Scalar> Sub for &Poly<C> {
    type Output = Poly<C>;
    fn sub(self, rhs: &Poly<C>) -> Poly<C> {
        let mut out = self.clone();
        for (e, c) in &rhs.terms {
            out.add_term(*e, C::zero() - c.clone());
        }
        out
    }
}

impl<C: Scalar> Mul for &Poly<C> {
    type Output = Poly<C>;
    fn mul(self, rhs: &Poly<C>) -> Poly<C> {
        let mut out = Poly::zero();
        for (e1, c1) in &self.terms {
            for (e2, c2) in &rhs.terms {
                let mut e = *e1;
                for i in 0..NVARS {
                    e[i] += e2[i];
                }
                out.add_term(e, c1.clone() * c2.clone());
            }
        }
        out
    }
}

impl<C: Scalar> Neg for &Poly<C> {
    type Output = Poly<C>;
    fn neg(self) -> Poly<C> {
        Poly {
            terms: self
                .terms
                .iter()
                .map(|(e, c)| (*e, C::zero() - c.clone()))
                .collect(),
        }
    }
}

impl<C: Scalar> Add for Poly<C> {
    type Output = Poly<C>;
    fn add(self, rhs: Poly<C>) -> Poly<C> {
        &self + &rhs
    }
}

impl<C: Scalar> Sub for Poly<C> {
    type Output = Poly<C>;
    fn sub(self, rhs: Poly<C>) -> Poly<C> {
        &self - &rhs
    }
}

impl<C: Scalar> Mul for Poly<C> {
    type Output = Poly<C>;
    fn mul(self, rhs: Poly<C>) -> Poly<C> {
        &self * &rhs
    }
}

impl<C: Scalar> Neg for Poly<C> {
    type Output = Poly<C>;
    fn neg(self) -> Poly<C> {
        -&self
    }
}

impl<C: Scalar> AddAssign<&Poly<C>> for Poly<C> {
    fn add_assign(&mut self, rhs: &Poly<C>) {
        for (e, c) in &rhs.terms {
            self.add_term(*e, c.clone());
        }
    }
}

impl<C: Scalar> SubAssign<&Poly<C>> for Poly<C> {
    fn sub_assign(&mut self, rhs: &Poly<C>) {
        for (e, c) in &rhs.terms {
            self.add_term(*e, C::zero() - c.clone());
        }
    }
}

/// Variable names used when printing; the atom name depends on the mode.
#[derive(Clone, Copy, Debug)]
pub struct VarNames(pub [&'static str; NVARS]);

impl VarNames {
    pub const SYMBOLIC: VarNames = VarNames(["n", "a", "A"]);
    pub const LOG: VarNames = VarNames(["n", "a", "L"]);
}

impl Poly<Rational> {
    pub fn fmt_with(&self, names: VarNames) -> String {
        if self.is_zero() {
            return "0".to_string();
        }
        let mut s = String::new();
        // Highest total degree first reads more naturally.
        let mut items: Vec<_> = self.terms.iter().collect();
        items.sort_by(|(e1, _), (e2, _)| {
            let d1: u16 = e1.iter().sum();
            let d2: u16 = e2.iter().sum();
            d2.cmp(&d1).then_with(|| e2.cmp(e1))
        });
        for (k, (e, c)) in items.into_iter().enumerate() {
            let neg = crate::num::is_negative(c);
            let abs = if neg { -c.clone() } else { c.clone() };
            if k == 0 {
                if neg {
                    s.push('-');
                }
            } else {
                s.push_str(if neg { " - " } else { " + " });
            }
            let mut parts = Vec::new();
            let unit_coeff = abs == Rational::from_i64(1);
            if !unit_coeff || e.iter().all(|&x| x == 0) {
                parts.push(fmt_rational(&abs));
            }
            for (i, &p) in e.iter().enumerate() {
                match p {
                    0 => {}
                    1 => parts.push(names.0[i].to_string()),
                    _ => parts.push(format!("{}^{}", names.0[i], p)),
                }
            }
            s.push_str(&parts.join("*"));
        }
        s
    }

    /// Parses `+ - * ^ ( )`, integers, `/` by integer constants and the
    /// variable names of `names`.
    pub fn parse_with(text: &str, names: VarNames) -> Result<Self, String> {
        let mut p = PolyParser {
            s: text.as_bytes(),
            pos: 0,
            names,
        };
        let out = p.sum()?;
        p.skip_ws();
        if p.pos != p.s.len() {
            return Err(format!("unexpected input at byte {}", p.pos));
        }
        Ok(out)
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        Self::parse_with(text, VarNames::SYMBOLIC)
    }
}

impl fmt::Display for Poly<Rational> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.fmt_with(VarNames::SYMBOLIC))
    }
}

impl<C: Scalar> fmt::Debug for Poly<C> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_map().entries(self.terms.iter()).finish()
    }
}

struct PolyParser<'a> {
    s: &'a [u8],
    pos: usize,
    names: VarNames,
}

impl PolyParser<'_> {
    fn skip_ws(&mut self) {
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.s.get(self.pos).copied()
    }

    fn sum(&mut self) -> Result<Poly<Rational>, String> {
        let mut acc = match self.peek() {
            Some(b'-') => {
                self.pos += 1;
                -self.product()?
            }
            Some(b'+') => {
                self.pos += 1;
                self.product()?
            }
            _ => self.product()?,
        };
        loop {
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    acc = &acc + &self.product()?;
                }
                Some(b'-') => {
                    self.pos += 1;
                    acc = &acc - &self.product()?;
                }
                _ => return Ok(acc),
            }
        }
    }

    fn product(&mut self) -> Result<Poly<Rational>, String> {
        let mut acc = self.power()?;
        loop {
            match self.peek() {
                Some(b'*') => {
                    self.pos += 1;
                    acc = &acc * &self.power()?;
                }
                Some(b'/') => {
                    self.pos += 1;
                    let d = self.power()?;
                    let c = d.constant_value().ok_or("division by a non-constant")?;
                    if c == Rational::from_i64(0) {
                        return Err("division by zero".into());
                    }
                    acc = acc.scale(&(Rational::from_i64(1) / c));
                }
                // Implicit multiplication: `3a`, `a(n+1)`, `2(n-1)`.
                Some(c) if c == b'(' || c.is_ascii_alphanumeric() => {
                    acc = &acc * &self.power()?;
                }
                _ => return Ok(acc),
            }
        }
    }

    fn power(&mut self) -> Result<Poly<Rational>, String> {
        let base = self.atom()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            self.skip_ws();
            let start = self.pos;
            while self.pos < self.s.len() && self.s[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            let k: u32 = std::str::from_utf8(&self.s[start..self.pos])
                .unwrap()
                .parse()
                .map_err(|_| format!("bad exponent at byte {start}"))?;
            return Ok(base.pow(k));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Poly<Rational>, String> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let inner = self.sum()?;
                if self.peek() != Some(b')') {
                    return Err(format!("expected ')' at byte {}", self.pos));
                }
                self.pos += 1;
                Ok(inner)
            }
            Some(c) if c.is_ascii_digit() => {
                let start = self.pos;
                while self.pos < self.s.len() && self.s[self.pos].is_ascii_digit() {
                    self.pos += 1;
                }
                let txt = std::str::from_utf8(&self.s[start..self.pos]).unwrap();
                let v = crate::num::parse_rational(txt).ok_or("bad integer")?;
                Ok(Poly::constant(v))
            }
            Some(c) if c.is_ascii_alphabetic() => {
                self.pos += 1;
                let name = (c as char).to_string();
                for (i, n) in self.names.0.iter().enumerate() {
                    if *n == name {
                        return Ok(Poly::var(Var::ALL[i]));
                    }
                }
                Err(format!("unknown variable '{name}'"))
            }
            other => Err(format!(
                "unexpected {:?} at byte {}",
                other.map(|c| c as char),
                self.pos
            )),
        }
    }
}

pub type RPoly = Poly<Rational>;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::int;

    fn p(s: &str) -> RPoly {
        RPoly::parse(s).unwrap()
    }

    #[test]
    fn parse_and_print() {
        let q = p("3a^2 n - (n+2)(n-2) + 1/2");
        assert_eq!(
            q,
            &(&p("3*a^2*n") - &p("n^2 - 4")) + &RPoly::constant(crate::num::rat(1, 2))
        );
        assert_eq!(RPoly::parse(&q.to_string()).unwrap(), q);
    }

    #[test]
    fn linear_division() {
        let q = p("(n+2)(a n - 3)");
        assert_eq!(q.div_linear(Var::Dim, &int(-2)).unwrap(), p("a n - 3"));
        assert!(q.div_linear(Var::Dim, &int(2)).is_none());
        let r = p("(1-a)^2 n");
        assert_eq!(r.div_linear(Var::Param, &int(1)).unwrap(), p("(a-1) n"));
    }

    #[test]
    fn substitution_and_eval() {
        let q = p("n^2 + a");
        let s = q.subs(Var::Dim, &p("a+1"));
        assert_eq!(s, p("a^2 + 3a + 1"));
        let v = q.map_coeffs(crate::num::rat_to_f64).eval(&[3.0, 0.5, 0.0]);
        assert!((v - 9.5).abs() < 1e-15);
    }
}
