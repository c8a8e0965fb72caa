//! Hypergeometric atoms to elementary functions, and linear dependencies
//! between the resulting coefficients.
//!
//! Elementary coefficients are [`RatFunc`]s whose numerator may contain
//! [`Var::Atom`]: `(1-a)^{-n/2}` for symbolic `n`, `ln(1-a)` for a fixed even
//! dimension (where `n` is already substituted).

use std::collections::{BTreeMap, HashMap};
use std::sync::Mutex;

use num_traits::{Float, One, Zero};
use thiserror::Error;

use crate::expr::{Factor, TensorExpr, Term};
use crate::integrate::{FAtom, HyperCoeff};
use crate::num::{factorial, int, Rational};
use crate::poly::{RPoly, Var};
use crate::ratfunc::{DenFactor, RatFunc};

#[derive(Debug, Error, PartialEq)]
pub enum ReduceError {
    #[error("dimension {0} is not even")]
    OddDimension(i64),
    #[error("dimension must be at least 2, got {0}")]
    DimensionTooSmall(i64),
    #[error("coefficient is singular at a = 0")]
    SingularLimit,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Mode {
    Symbolic,
    /// Fixed even dimension.
    Fixed(i64),
}

impl Mode {
    pub fn fixed(n0: i64) -> Result<Mode, ReduceError> {
        if n0 % 2 != 0 {
            return Err(ReduceError::OddDimension(n0));
        }
        if n0 < 2 {
            return Err(ReduceError::DimensionTooSmall(n0));
        }
        Ok(Mode::Fixed(n0))
    }

    /// Name of the transcendental atom.
    pub fn atom_name(self) -> &'static str {
        match self {
            Mode::Symbolic => "(1-a)^(-n/2)",
            Mode::Fixed(_) => "ln(1-a)",
        }
    }
}

fn half() -> Rational {
    Rational::new(1.into(), 2.into())
}

fn z() -> RPoly {
    RPoly::var(Var::Param)
}

fn atom() -> RPoly {
    RPoly::var(Var::Atom)
}

/// `b = b_shift + n/2` in the given mode.
fn b_value(b_shift: u16, mode: Mode) -> RPoly {
    match mode {
        Mode::Symbolic => {
            &RPoly::var(Var::Dim).scale(&half()) + &RPoly::constant(int(b_shift as i64))
        }
        Mode::Fixed(n0) => RPoly::constant(int(b_shift as i64 + n0 / 2)),
    }
}

/// `(1-a)^e` for an integer `e`.
fn one_minus_z_pow(e: i64) -> RatFunc {
    if e >= 0 {
        RatFunc::one().mul_factor(DenFactor::OneMinusParam, e as u32)
    } else {
        RatFunc::one().div_factor(DenFactor::OneMinusParam, (-e) as u32)
    }
}

/// One step of the contiguous relation solved for the top parameter:
/// `(m-1)(1-z) F(m) = (c-m+1) F(m-2) + (2(m-1) - c - (m-1)z + bz) F(m-1)`.
pub fn gauss_lower(m: u16, b: &RPoly, c: u16, f_m2: &RatFunc, f_m1: &RatFunc) -> RatFunc {
    assert!(m >= 2);
    let m1 = (m - 1) as i64;
    let c_i = c as i64;
    let t1 = f_m2.scale(&int(c_i - m1));
    let lin = &(&RPoly::constant(int(2 * m1 - c_i)) - &z().scale(&int(m1))) + &(b * &z());
    let t2 = f_m1.mul_poly(&lin);
    t1.add(&t2)
        .scale(&(Rational::one() / int(m1)))
        .div_factor(DenFactor::OneMinusParam, 1)
}

/// `F(1, b_shift + n/2; c; z)` in elementary form.
pub fn reduce_f1(b_shift: u16, c: u16, mode: Mode) -> RatFunc {
    assert!(c >= 1);
    match mode {
        Mode::Symbolic => reduce_f1_symbolic(b_shift, c),
        Mode::Fixed(n0) => reduce_f1_fixed(b_shift as i64 + n0 / 2, c as i64),
    }
}

/// `(c-1)! (-z)^{1-c}` as a rational function.
fn front(c: i64) -> RatFunc {
    let sign = if (c - 1) % 2 == 0 { int(1) } else { int(-1) };
    RatFunc::constant(factorial((c - 1) as u32) * sign).div_factor(DenFactor::Param, (c - 1) as u32)
}

fn reduce_f1_symbolic(bs: u16, c: u16) -> RatFunc {
    let (bs_i, c_i) = (bs as i64, c as i64);
    let b = b_value(bs, Mode::Symbolic);
    // (1-z)^{c-b-1} = A (1-z)^{c-1-bs}
    let mut bracket = one_minus_z_pow(c_i - 1 - bs_i).mul_poly(&atom());
    // - Σ_{k ≤ c-2} (b-c+1)_k z^k / k!
    let x = &b - &RPoly::constant(int(c_i - 1));
    let mut poch = RPoly::one();
    for k in 0..=(c_i - 2).max(-1) {
        if k > 0 {
            poch = &poch * &(&x + &RPoly::constant(int(k - 1)));
        }
        let term = (&poch * &z().pow(k as u32)).scale(&(Rational::one() / factorial(k as u32)));
        bracket = bracket.sub(&RatFunc::from_poly(term));
    }
    // 1/(1-b)_{c-1}; each factor 1-b+j = -(n + 2(bs-1-j))/2
    let mut out = front(c_i).mul(&bracket);
    for j in 0..(c_i - 1) {
        out = out
            .scale(&int(-2))
            .div_factor(DenFactor::DimPlus((2 * (bs_i - 1 - j)) as i32), 1);
    }
    out
}

/// Derivative of `(x)_k` at `x = x0`.
fn pochhammer_derivative(x0: i64, k: i64) -> Rational {
    let mut total = Rational::zero();
    for i in 0..k {
        let mut p = Rational::one();
        for j in 0..k {
            if j != i {
                p *= int(x0 + j);
            }
        }
        total += p;
    }
    total
}

fn pochhammer_int(x: i64, k: i64) -> Rational {
    (0..k).fold(Rational::one(), |acc, j| acc * int(x + j))
}

fn reduce_f1_fixed(b: i64, c: i64) -> RatFunc {
    let n_exp = c - b - 1;
    if n_exp < 0 || b < 1 {
        // regular case: the printed formula with integer parameters
        let mut bracket = one_minus_z_pow(n_exp);
        for k in 0..=(c - 2) {
            let coef = pochhammer_int(b - c + 1, k) / factorial(k as u32);
            bracket = bracket.sub(&RatFunc::from_poly(z().pow(k as u32).scale(&coef)));
        }
        return front(c)
            .mul(&bracket)
            .scale(&(Rational::one() / pochhammer_int(1 - b, c - 1)));
    }
    // logarithmic limit: (1-b)_{c-1} has a simple zero at j0 = b-1
    let j0 = b - 1;
    let q = (0..(c - 1))
        .filter(|&j| j != j0)
        .fold(Rational::one(), |acc, j| acc * int(1 - b + j));
    let mut bracket = one_minus_z_pow(n_exp).mul_poly(&atom());
    for k in 0..=(c - 2) {
        let coef = pochhammer_derivative(-n_exp, k) / factorial(k as u32);
        bracket = bracket.add(&RatFunc::from_poly(z().pow(k as u32).scale(&coef)));
    }
    front(c).mul(&bracket).scale(&(Rational::one() / q))
}

/// Memoized reduction of hypergeometric atoms.
#[derive(Debug)]
pub struct Reducer {
    pub mode: Mode,
    cache: Mutex<HashMap<FAtom, RatFunc>>,
}

impl Reducer {
    pub fn new(mode: Mode) -> Self {
        Reducer {
            mode,
            cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn reduce_atom(&self, f: FAtom) -> RatFunc {
        if f == FAtom::ONE {
            return RatFunc::one();
        }
        if let Some(v) = self.cache.lock().unwrap().get(&f) {
            return v.clone();
        }
        let b = b_value(f.b_shift, self.mode);
        let mut lo = RatFunc::one();
        let mut hi = reduce_f1(f.b_shift, f.c, self.mode);
        for m in 2..=f.first {
            let next = gauss_lower(m, &b, f.c, &lo, &hi);
            lo = hi;
            hi = next;
        }
        self.cache.lock().unwrap().insert(f, hi.clone());
        hi
    }

    /// Substitutes the dimension (fixed mode) into a polynomial coefficient.
    pub fn coeff_poly(&self, p: &RPoly) -> RPoly {
        match self.mode {
            Mode::Symbolic => p.clone(),
            Mode::Fixed(n0) => p.subs(Var::Dim, &RPoly::constant(int(n0))),
        }
    }

    pub fn reduce_coeff(&self, h: &HyperCoeff) -> RatFunc {
        let mut out = RatFunc::zero();
        for (f, c) in &h.atoms {
            out = out.add(&self.reduce_atom(*f).mul_poly(&self.coeff_poly(c)));
        }
        out
    }

    pub fn reduce_expression(&self, e: &TensorExpr<HyperCoeff>) -> TensorExpr<RatFunc> {
        let terms = e
            .terms
            .iter()
            .map(|t| Term {
                coeff: self.reduce_coeff(&t.coeff),
                factors: t.factors.clone(),
            })
            .filter(|t| !t.coeff.is_zero())
            .collect();
        TensorExpr::from_terms(terms)
    }
}

/// One independent coefficient and the combination of structures it
/// multiplies.
#[derive(Clone, Debug, PartialEq)]
pub struct CoeffGroup {
    pub coeff: RatFunc,
    pub structure: TensorExpr<RPoly>,
}

/// Finds all rational-linear relations among the coefficients of `e` and
/// regroups the structures over an independent subset. Earlier terms are
/// preferred as basis elements.
pub fn eliminate_dependencies(e: &TensorExpr<RatFunc>) -> Vec<CoeffGroup> {
    let coeffs: Vec<&RatFunc> = e.terms.iter().map(|t| &t.coeff).collect();
    // common denominator
    let mut den: BTreeMap<DenFactor, u32> = BTreeMap::new();
    for c in &coeffs {
        for (f, &k) in c.denom() {
            let v = den.entry(*f).or_insert(0);
            *v = (*v).max(k);
        }
    }
    let lifted: Vec<BTreeMap<[u16; 3], Rational>> = coeffs
        .iter()
        .map(|c| {
            let mut num = c.numer().clone();
            for (f, &k) in &den {
                let have = c.denom().get(f).copied().unwrap_or(0);
                if k > have {
                    num = &num * &f.as_poly().pow(k - have);
                }
            }
            num.terms().map(|(e, v)| (*e, v.clone())).collect()
        })
        .collect();
    // Gaussian elimination tracking combinations of the original vectors.
    let mut basis: Vec<(BTreeMap<[u16; 3], Rational>, [u16; 3], Vec<Rational>)> = Vec::new();
    let mut groups: Vec<CoeffGroup> = Vec::new();
    let mut basis_group: Vec<usize> = Vec::new();
    let structure_of =
        |t: &Term<RatFunc>| TensorExpr::single(Term::new(RPoly::one(), t.factors.clone()));
    for (i, v) in lifted.iter().enumerate() {
        let mut r = v.clone();
        // combination over basis vectors: r = v - Σ w_j basis_j
        let mut w = vec![Rational::zero(); basis.len()];
        for (j, (b, piv, _)) in basis.iter().enumerate() {
            if let Some(c) = r.get(piv).cloned() {
                let c = c / &b[piv];
                for (k, bv) in b {
                    let x = r.entry(*k).or_insert_with(Rational::zero);
                    *x -= &c * bv;
                }
                r.retain(|_, x| !x.is_zero());
                w[j] = c;
            }
        }
        if r.is_empty() {
            // v = Σ w_j basis_j, and each basis_j is a combination of originals
            let mut expr_coeffs = vec![Rational::zero(); basis.len()];
            for (j, wj) in w.iter().enumerate() {
                if wj.is_zero() {
                    continue;
                }
                for (k, c) in basis[j].2.iter().enumerate() {
                    expr_coeffs[k] += wj * c;
                }
            }
            // c_i = Σ q_k c_{basis k}: structure S_i joins group k with weight q_k
            for (k, q) in expr_coeffs.iter().enumerate() {
                if q.is_zero() {
                    continue;
                }
                let g = &mut groups[basis_group[k]];
                g.structure = g.structure.add(&structure_of(&e.terms[i]).scaled(q));
            }
        } else {
            let piv = *r.keys().next_back().unwrap();
            // express r in terms of the basis originals: r = v_i - Σ w_j basis_j
            let mut comb = vec![Rational::zero(); basis.len() + 1];
            for (j, wj) in w.iter().enumerate() {
                if wj.is_zero() {
                    continue;
                }
                for (k, c) in basis[j].2.iter().enumerate() {
                    comb[k] -= wj * c;
                }
            }
            comb[basis.len()] = Rational::one();
            for b in &mut basis {
                b.2.push(Rational::zero());
            }
            basis.push((r, piv, comb));
            basis_group.push(groups.len());
            groups.push(CoeffGroup {
                coeff: e.terms[i].coeff.clone(),
                structure: structure_of(&e.terms[i]),
            });
        }
    }
    groups
}

/// Expands the groups back into a flat expression.
pub fn expand_groups(groups: &[CoeffGroup]) -> TensorExpr<RatFunc> {
    let mut out: BTreeMap<Vec<Factor>, RatFunc> = BTreeMap::new();
    for g in groups {
        for t in &g.structure.terms {
            let c = g.coeff.mul_poly(&t.coeff);
            let e = out.entry(t.factors.clone()).or_insert_with(RatFunc::zero);
            *e = e.add(&c);
        }
    }
    TensorExpr::from_terms(
        out.into_iter()
            .filter(|(_, c)| !c.is_zero())
            .map(|(factors, coeff)| Term { coeff, factors })
            .collect(),
    )
}

/// Taylor coefficients in `a` of the atom up to `a^order`.
fn atom_series(mode: Mode, order: usize) -> Vec<RPoly> {
    let half_n = RPoly::var(Var::Dim).scale(&half());
    let mut out = Vec::with_capacity(order + 1);
    match mode {
        Mode::Symbolic => {
            // (1-a)^{-n/2} = Σ (n/2)_k a^k / k!
            let mut poch = RPoly::one();
            for k in 0..=order {
                if k > 0 {
                    poch = &poch * &(&half_n + &RPoly::constant(int(k as i64 - 1)));
                }
                out.push(poch.scale(&(Rational::one() / factorial(k as u32))));
            }
        }
        Mode::Fixed(_) => {
            // ln(1-a) = -Σ a^k / k
            out.push(RPoly::zero());
            for k in 1..=order {
                out.push(RPoly::constant(-(Rational::one() / int(k as i64))));
            }
        }
    }
    out
}

/// Value at `a = 0` of an elementary coefficient, as a rational function of
/// `n` (constant in fixed mode).
pub fn limit_a0(c: &RatFunc, mode: Mode) -> Result<RatFunc, ReduceError> {
    let pa = c.denom().get(&DenFactor::Param).copied().unwrap_or(0) as usize;
    let order = pa + 1;
    let series = atom_series(mode, order);
    // numerator as a series in a: Σ_k coeff(n) a^k
    let mut num_series = vec![RPoly::zero(); order + 1];
    for (e, v) in c.numer().terms() {
        let (ea, eatom) = (e[Var::Param.idx()] as usize, e[Var::Atom.idx()] as u32);
        let mut rest = *e;
        rest[Var::Param.idx()] = 0;
        rest[Var::Atom.idx()] = 0;
        let base = RPoly::monomial(v.clone(), rest);
        // atom^eatom truncated
        let mut pow = vec![RPoly::one()];
        for _ in 0..eatom {
            let mut next = vec![RPoly::zero(); order + 1];
            for (i, x) in pow.iter().enumerate() {
                for (j, y) in series.iter().enumerate() {
                    if i + j <= order {
                        next[i + j] = &next[i + j] + &(x * y);
                    }
                }
            }
            pow = next;
        }
        for (i, x) in pow.iter().enumerate() {
            if ea + i <= order {
                num_series[ea + i] = &num_series[ea + i] + &(&base * x);
            }
        }
    }
    if num_series[..pa].iter().any(|x| !x.is_zero()) {
        return Err(ReduceError::SingularLimit);
    }
    let mut out = RatFunc::from_poly(num_series[pa].clone());
    for (f, &k) in c.denom() {
        match f {
            DenFactor::Param => {}
            DenFactor::OneMinusParam => {}
            DenFactor::DimPlus(_) => out = out.div_factor(*f, k),
        }
    }
    Ok(out)
}

/// `F(a, b; c; z)` by direct summation, for numeric cross-checks.
pub fn hyp2f1_series<F: Float>(a: F, b: F, c: F, z: F, tol: F) -> F {
    let mut term = F::one();
    let mut sum = F::one();
    let mut k = F::zero();
    for _ in 0..100_000 {
        term = term * (a + k) * (b + k) / ((c + k) * (k + F::one())) * z;
        sum = sum + term;
        k = k + F::one();
        if term.abs() <= tol * sum.abs() {
            break;
        }
    }
    sum
}

/// Evaluates an elementary coefficient at numeric `(n, a)`.
pub fn eval_elem(c: &RatFunc, mode: Mode, n: f64, a: f64) -> f64 {
    let atom = match mode {
        Mode::Symbolic => (1.0 - a).powf(-n / 2.0),
        Mode::Fixed(_) => (1.0 - a).ln(),
    };
    c.eval_f64(&[n, a, atom])
}
