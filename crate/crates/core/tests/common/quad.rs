//! `J` against direct quadrature in three dimensions: the λ contour by the
//! trapezoid rule on small circles around the poles, the radial and polar
//! integrals by Simpson's rule.

use std::f64::consts::PI;

use heatker_core::expr::{dummy, free, Factor, Index, Kind, MomKey, ScalarCoeff, Term};
use heatker_core::integrate::{integrate_term, HyperCoeff};
use heatker_core::reduce::{eval_elem, hyp2f1_series, Mode, Reducer};
use heatker_core::{RPoly, RatFunc};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const N: f64 = 3.0;

pub fn simpson(f: impl Fn(f64) -> f64, lo: f64, hi: f64, intervals: usize) -> f64 {
    let h = (hi - lo) / intervals as f64;
    let mut s = f(lo) + f(hi);
    for i in 1..intervals {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(lo + h * i as f64);
    }
    s * h / 3.0
}

/// `-(1/2πi) ∮ e^{-λ} / ((k²-λ)^l ((1-a)k²-λ)^m) dλ` around both poles.
pub fn contour(k2: f64, a: f64, l: i32, m: i32) -> f64 {
    let f = |lam: Complex64| {
        (-lam).exp()
            / ((Complex64::from(k2) - lam).powi(l)
                * (Complex64::from((1.0 - a) * k2) - lam).powi(m))
    };
    let circle = |c: f64, r: f64| -> Complex64 {
        let pts = 96;
        let mut acc = Complex64::new(0.0, 0.0);
        for j in 0..pts {
            let e = Complex64::from_polar(1.0, 2.0 * PI * j as f64 / pts as f64);
            acc += f(c + r * e) * e;
        }
        -acc * r / pts as f64
    };
    let gap = (a * k2).abs();
    let poles: Vec<f64> = [(l, k2), (m, (1.0 - a) * k2)]
        .iter()
        .filter(|(p, _)| *p > 0)
        .map(|(_, x)| *x)
        .collect();
    if poles.len() == 1 {
        return circle(poles[0], 1.0).re;
    }
    if gap < 1.0 {
        circle((poles[0] + poles[1]) / 2.0, 1.0 + gap / 2.0).re
    } else {
        let r = (gap / 3.0).min(1.0);
        (circle(poles[0], r) + circle(poles[1], r)).re
    }
}

/// `(4π)^{3/2} ∫ d³k/(2π)³ k_1^{2s} k^{2p} [contour]`.
pub fn quadrature(p: u16, s: u16, l: i32, m: i32, a: f64) -> f64 {
    let polar = simpson(|t| t.cos().powi(2 * s as i32) * t.sin(), 0.0, PI, 2000) / 2.0;
    let radial = simpson(
        |k| 4.0 * PI * k * k * k.powi(2 * (p + s) as i32) * contour(k * k, a, l, m),
        0.0,
        12.0,
        4000,
    );
    (4.0 * PI).powf(1.5) / (2.0 * PI).powi(3) * polar * radial
}

pub fn hyper_value(h: &HyperCoeff, a: f64) -> f64 {
    h.atoms
        .iter()
        .map(|(f, c)| {
            let ca = RatFunc::from_poly(c.clone()).eval_f64(&[N, a, 0.0]);
            let fv = if f.first == 0 {
                1.0
            } else {
                hyp2f1_series(
                    f.first as f64,
                    f.b_shift as f64 + N / 2.0,
                    f.c as f64,
                    a,
                    1e-16,
                )
            };
            ca * fv
        })
        .sum()
}

pub fn double_factorial(k: u16) -> f64 {
    (1..=k).filter(|i| i % 2 == 1).map(|i| i as f64).product()
}

/// Random integrands checked against quadrature; returns the largest
/// relative error seen.
pub fn j_cases(seed: u64, count: usize, tol: f64) -> Result<f64, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let reducer = Reducer::new(Mode::Symbolic);
    let mut worst: f64 = 0.0;
    for case in 0..count {
        let (l, m) = loop {
            let l = rng.gen_range(0..=3);
            let m = rng.gen_range(0..=3);
            if l + m > 0 {
                break (l, m);
            }
        };
        let p = rng.gen_range(0..=2u16);
        let s = rng.gen_range(0..=2u16);
        let folded = rng.gen_bool(0.4);
        let a = loop {
            let a: f64 = rng.gen_range(-0.6..0.6);
            if a.abs() > 0.05 {
                break a;
            }
        };
        let mut factors: Vec<Factor> = (0..2 * s)
            .map(|j| Factor::plain(Kind::Wave, &[Index::down(free(j))]))
            .collect();
        if folded {
            factors.push(Factor::plain(Kind::Wave, &[Index::up(dummy(0))]));
            factors.push(Factor::plain(Kind::Wave, &[Index::down(dummy(0))]));
        }
        let t = Term::new(
            ScalarCoeff::atom(MomKey::new(false, p, l as i16, m as i16), RPoly::one()),
            factors,
        );
        let out = integrate_term(&t).map_err(|e| format!("case {case}: {e}"))?;
        // all pairings share the coefficient; every one is 1 at μ_i = 1
        if out.len() as f64 != double_factorial(2 * s) {
            return Err(format!("case {case}: {} pairings", out.len()));
        }
        let h = &out[0].coeff;
        let elem =
            eval_elem(&reducer.reduce_coeff(h), Mode::Symbolic, N, a) * double_factorial(2 * s);
        let series = hyper_value(h, a) * double_factorial(2 * s);
        let pp = p + folded as u16;
        let numeric = quadrature(pp, s, l, m, a);
        let rel = |x: f64| (x - numeric).abs() / numeric.abs().max(1e-300);
        worst = worst.max(rel(elem)).max(rel(series));
        if rel(elem) >= tol || rel(series) >= tol {
            return Err(format!(
                "case {case}: l={l} m={m} p={pp} s={s} a={a}: {elem}, {series} vs {numeric}"
            ));
        }
    }
    Ok(worst)
}
