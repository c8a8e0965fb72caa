//! Symbolic engine for heat kernel coefficients of second-order minimal and
//! nonminimal operators on manifolds with torsion and a gauge connection.

pub mod colim;
pub mod expr;
pub mod integrate;
pub mod num;
pub mod poly;
pub mod ratfunc;
pub mod reduce;
pub mod rewrite;
pub mod sigma;

pub use num::Rational;
pub use poly::{Poly, RPoly, Var};
pub use ratfunc::RatFunc;
