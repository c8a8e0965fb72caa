use std::fmt::Debug;

use crate::poly::RPoly;
use crate::ratfunc::RatFunc;

/// Coefficient of a [`super::Term`]: a module over polynomials in `n` and `a`.
pub trait Coeff: Clone + Debug + PartialEq + Send + Sync + 'static {
    fn zero() -> Self;
    fn is_zero(&self) -> bool;
    fn add_assign(&mut self, rhs: &Self);
    fn mul_poly(&mut self, p: &RPoly);

    fn negate(&mut self) {
        self.mul_poly(&RPoly::from_i64(-1));
    }

    fn from_poly_coeff(p: RPoly) -> Self;
}

/// Coefficients that also multiply among themselves.
pub trait CoeffRing: Coeff {
    fn one() -> Self;
    fn mul(&self, rhs: &Self) -> Self;
}

impl Coeff for RPoly {
    fn zero() -> Self {
        RPoly::zero()
    }

    fn is_zero(&self) -> bool {
        RPoly::is_zero(self)
    }

    fn add_assign(&mut self, rhs: &Self) {
        *self += rhs;
    }

    fn mul_poly(&mut self, p: &RPoly) {
        *self = &*self * p;
    }

    fn from_poly_coeff(p: RPoly) -> Self {
        p
    }
}

impl CoeffRing for RPoly {
    fn one() -> Self {
        RPoly::one()
    }

    fn mul(&self, rhs: &Self) -> Self {
        self * rhs
    }
}

impl Coeff for RatFunc {
    fn zero() -> Self {
        RatFunc::zero()
    }

    fn is_zero(&self) -> bool {
        RatFunc::is_zero(self)
    }

    fn add_assign(&mut self, rhs: &Self) {
        *self = RatFunc::add(self, rhs);
    }

    fn mul_poly(&mut self, p: &RPoly) {
        *self = RatFunc::mul_poly(self, p);
    }

    fn from_poly_coeff(p: RPoly) -> Self {
        RatFunc::from_poly(p)
    }
}

impl CoeffRing for RatFunc {
    fn one() -> Self {
        RatFunc::one()
    }

    fn mul(&self, rhs: &Self) -> Self {
        RatFunc::mul(self, rhs)
    }
}
