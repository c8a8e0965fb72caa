//! Acceptance criteria, one PASS/FAIL line each. Reference coefficients are
//! transcribed from the published tables; corrections to misprinted entries
//! are verified independently below.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::f64::consts::PI;
use std::fmt::Display;
use std::time::{Duration, Instant};

use heatker::{parse_operator, run, Dimension, Report, RunConfig};
use heatker_core::colim::{
    build_phase_table, build_transport_table, ordering_residual, symmetrized_residual, ColimTables,
};
use heatker_core::expr::{
    canonicalize, contract_metric, parse_expr, parse_term, permutations, product, write_expr,
    CoeffText, Factor, TensorExpr, Term,
};
use heatker_core::integrate::integrate_expression;
use heatker_core::num::int;
use heatker_core::poly::VarNames;
use heatker_core::ratfunc::DenFactor;
use heatker_core::reduce::{eval_elem, expand_groups, limit_a0, Mode, Reducer};
use heatker_core::rewrite::{apply_identities, Background};
use heatker_core::sigma::{required_orders, solve_sigma, take_colim};
use heatker_core::{RPoly, RatFunc, Var};

const NUMERIC_TOL: f64 = 1e-8;
/// Symmetric difference quotient around `n = 2`.
const LIMIT_STEP: f64 = 1e-4;
const LIMIT_TOL: f64 = 1e-6;
const TIME_LIMIT: Duration = Duration::from_secs(60);
const IDENTITY_DEPTH: usize = 2;
const PRESETS: [&str; 4] = [
    "minimal-scalar",
    "nonminimal",
    "yang-mills",
    "maxwell-gravity",
];

type Check = Result<String, String>;

fn s<E: Display>(e: E) -> String {
    e.to_string()
}

fn rf(num: &str, den: &str) -> RatFunc {
    let p = |s: &str| RatFunc::from_poly(RPoly::parse(s).expect("reference polynomial"));
    p(num).checked_div(&p(den)).expect("nonzero denominator")
}

fn lf(num: &str, den: &str) -> RatFunc {
    let p = |s: &str| {
        RatFunc::from_poly(RPoly::parse_with(s, VarNames::LOG).expect("reference polynomial"))
    };
    p(num).checked_div(&p(den)).expect("nonzero denominator")
}

fn two(x: (&str, &str), y: (&str, &str)) -> RatFunc {
    lf(x.0, x.1).add(&lf(y.0, y.1))
}

/// `C_1 … C_17` as listed, in symbolic `n` with `A = (1-a)^{-n/2}`.
fn listed_cs() -> Vec<RatFunc> {
    let d1 = "a*(n-2)*n*(n+2)";
    let d6 = "6*a*(n-2)*n*(n+2)";
    let e6 = "6*a^2*(n-2)*n*(n+2)";
    vec![
        rf("A*(-3*a*n-6*a+4*n+4)+a*n^3-2*a*n^2-3*a*n+6*a-4*n-4", d1),
        rf("A*(a*n+2*a-4)+a*n-2*a+4", d1),
        rf("(1-a)*A*(a*n-8)+3*a*n-8*a+8", "a*(n-2)*n"),
        rf("A*(17*a^2*n^2+34*a^2*n-17*a*n^2-168*a*n-268*a+140*n+256)-53*a*n^2+40*a*n+268*a-140*n-256", d6),
        rf("A*(15*a^2*n^2+30*a^2*n-15*a*n^2-152*a*n-244*a+116*n+256)-43*a*n^2+24*a*n+244*a-116*n-256", d6),
        rf("A*(a^3*n^2+2*a^3*n-a^2*n^2-20*a^2*n-36*a^2+12*a*n+96*a-48)+a^2*n^2-16*a^2*n+36*a^2+12*a*n-96*a+48", e6),
        rf(
            "A*(-a^3*n^3-6*a^3*n^2+a^2*n^3-8*a^3*n+30*a^2*n^2+152*a^2*n-24*a*n^2+192*a^2-240*a*n-576*a+144*n+288)-7*a^2*n^3+18*a^2*n^2+64*a^2*n-48*a*n^2-192*a^2+96*a*n+576*a-144*n-288",
            "6*a^2*(n-2)*n*(n+2)*(n+4)",
        ),
        rf("(1-a)*A*(a^2*n^2+2*a^2*n-24*a*n-48*a+144)-7*a^2*n^2+34*a^2*n-48*a^2-48*a*n+192*a-144", e6),
        rf("A*(a^2*n^2+6*a^2*n+8*a^2-12*a*n-48*a+48)-a^2*n^2+6*a^2*n-8*a^2-12*a*n+48*a-48", "a^2*(n-2)*n*(n+2)*(n+4)"),
        rf(
            "A*(-a^3*n^3-6*a^3*n^2+a^2*n^3-8*a^3*n+30*a^2*n^2+152*a^2*n+192*a^2-192*a*n-768*a+576)-a^2*n^3-6*a^2*n^2+88*a^2*n-192*a^2-96*a*n+768*a-576",
            "12*a^2*(n-2)*n*(n+2)*(n+4)",
        ),
        rf("(1-a)*A*(-9*a^2*n^2-18*a^2*n+76*a*n+152*a-24)+2*(-13*a^2*n^2+6*a^2*n+76*a^2-32*a*n-88*a+12)", "3*a^2*(n-2)*n*(n+2)"),
        rf("2*(1-a)*A*(-5*a^2*n^2-10*a^2*n+38*a*n+76*a+12)-31*a^2*n^2+26*a^2*n+152*a^2-88*a*n-128*a-24", "3*a^2*(n-2)*n*(n+2)"),
        rf(
            "A*(a^3*n^3+6*a^3*n^2-a^2*n^3+8*a^3*n-18*a^2*n^2-80*a^2*n+12*a*n^2-96*a^2+72*a*n+96*a-48*n+96)+a^2*n^3-18*a^2*n^2+8*a^2*n+12*a*n^2+96*a^2-120*a*n-96*a+48*n-96",
            "6*a*(n-2)*n*(n+2)*(n+4)",
        ),
        rf("(1-a)*A*(-a^2*n^2-2*a^2*n+8*a*n+16*a-16)-a^2*n^2-2*a^2*n+16*a^2-32*a+16", "2*a^2*(n-2)*n*(n+2)"),
        rf("A*(-a^2*n^2-2*a^2*n+a*n^2+8*a*n+12*a-24)+a*n^3-a*n^2-12*a+24", d6),
        rf(
            "A*(-a^3*n^3-6*a^3*n^2+a^2*n^3-8*a^3*n+6*a^2*n^2+8*a^2*n+48*a*n+192*a-288)+a^2*n^4+3*a^2*n^3+2*a^2*n^2-48*a^2*n+96*a*n-192*a+288",
            "12*a^2*(n-2)*n*(n+2)*(n+4)",
        ),
        rf(
            "A*(-a^3*n^3-6*a^3*n^2+a^2*n^3-8*a^3*n+30*a^2*n^2+152*a^2*n+192*a^2-192*a*n-768*a+576)+a^2*n^4+3*a^2*n^3-10*a^2*n^2+72*a^2*n-192*a^2-96*a*n+768*a-576",
            "24*a^2*(n-2)*n*(n+2)*(n+4)",
        ),
    ]
}

/// The listed `C_13` lacks one power of `a` in its denominator.
fn corrected_cs() -> Vec<RatFunc> {
    let mut cs = listed_cs();
    cs[12] = cs[12].div_factor(DenFactor::Param, 1);
    cs
}

/// `C_1 … C_17` at `n = 2` as listed, with `L = ln(1-a)`.
fn listed_cs_n2() -> Vec<RatFunc> {
    vec![
        two(("-3*L", "4*a"), ("-(2-a)", "8*(1-a)")),
        two(("L", "a"), ("2-a", "2*(1-a)")),
        two(("-(a-4)*L", "2*a"), ("2", "1")),
        two(("(17*a-67)*L", "12*a"), ("137*a-134", "24*(1-a)")),
        two(("(15*a-61)*L", "12*a"), ("119*a-122", "24*(1-a)")),
        two(("(a^2-9*a+6)*L", "12*a^2"), ("(3*a-2)*(a-2)", "8*a*(1-a)")),
        two(
            ("-(a^2-12*a+12)*L", "12*a^2"),
            ("-(2*a^2-9*a+6)", "6*a*(1-a)"),
        ),
        two(("-(a^2-12*a+18)*L", "12*a^2"), ("a-6", "4*a")),
        two(("(a-2)*L", "4*a^2"), ("-(a^2-12*a+12)", "24*a*(1-a)")),
        two(
            ("-(a^2-12*a+12)*L", "24*a^2"),
            ("-(2*a^2-9*a+6)", "12*a*(1-a)"),
        ),
        two(("(9*a^2-38*a+3)*L", "6*a^2"), ("-(73*a-6)", "12*a")),
        two(("(10*a^2-38*a-3)*L", "6*a^2"), ("-(79*a+6)", "12*a")),
        two(("(a-6)*L", "12*a"), ("2*a-3", "6*(1-a)")),
        two(("(a^2-4*a+2)*L", "4*a^2"), ("-(3*a-2)", "4*a")),
        two(("-(a-3)*L", "12*a"), ("-(7*a-10)", "24*(1-a)")),
        two(("-(a^2-6)*L", "24*a^2"), ("-(3*a^2+a-6)", "24*a*(1-a)")),
        two(
            ("-(a^2-12*a+12)*L", "48*a^2"),
            ("-(3*a^2-10*a+6)", "24*a*(1-a)"),
        ),
    ]
}

/// The listed `C_1`, `C_2` at `n = 2` are not the limits of the general
/// ones; these are.
fn corrected_cs_n2() -> Vec<RatFunc> {
    let mut cs = listed_cs_n2();
    cs[0] = two(("-3*L", "4*a"), ("2-a", "8*(1-a)"));
    cs[1] = two(("L", "4*a"), ("2-a", "8*(1-a)"));
    cs
}

/// `(C index, sign, weight, structure)` with lower free indices `μ = m0`,
/// `ν = m1`.
fn structures() -> Vec<(usize, i64, &'static str, &'static str)> {
    vec![
        (1, -1, "1", "X[|_m0_m1]"),
        (2, -1, "1", "X[|_m1_m0]"),
        (2, -1, "1", "g[|_m0_m1] X[|_d0^d0]"),
        (3, 1, "1", "W[|_m0_m1]"),
        (3, 1, "8/3", "T[_d0|^d0_m0_m1]"),
        (3, 1, "19/6", "T[|^d1_d1_d0] T[|^d0_m0_m1]"),
        (4, 1, "1", "R[|^d0_m0_d0_m1]"),
        (5, -1, "1", "R[|^d0_m1_d0_m0]"),
        (6, 1, "1", "T[_d0|_m0^d0_m1]"),
        (6, 1, "1", "T[_d0|_m1^d0_m0]"),
        (7, 1, "1", "T[|_d0_d1_m0] T[|^d0^d1_m1]"),
        (8, 1, "1", "T[|_d0_d1_m0] T[|^d1^d0_m1]"),
        (9, 1, "1", "T[|_d0_d1_m0] T[|_m1^d0^d1]"),
        (9, 1, "1", "T[|_d0_d1_m1] T[|_m0^d0^d1]"),
        (10, -1, "1", "T[|_m0_d0_d1] T[|_m1^d0^d1]"),
        (11, 1, "1", "T[_m0|^d0_d0_m1]"),
        (12, -1, "1", "T[_m1|^d0_d0_m0]"),
        (13, 1, "1", "T[|^d1_d1_d0] T[|_m0^d0_m1]"),
        (13, 1, "1", "T[|^d1_d1_d0] T[|_m1^d0_m0]"),
        (14, -1, "1", "T[|^d0_d0_m0] T[|^d1_d1_m1]"),
        (15, 1, "1", "g[|_m0_m1] R[|^d0_d1_d0^d1]"),
        (15, 1, "1", "g[|_m0_m1] T[_d0|^d1_d1^d0]"),
        (16, 1, "1", "g[|_m0_m1] T[|^d0_d0_d2] T[|^d1_d1^d2]"),
        (16, 1, "1", "g[|_m0_m1] T[|_d0_d1_d2] T[|^d1^d0^d2]"),
        (15, -1, "1", "g[|_m0_m1] T[|_d0_d1_d2] T[|^d1^d0^d2]"),
        (17, -1, "1", "g[|_m0_m1] T[|_d0_d1_d2] T[|^d0^d1^d2]"),
    ]
}

/// Trace coefficients `C_1 … C_5` and their structures.
fn trace_structures() -> Vec<(usize, i64, &'static str)> {
    vec![
        (1, -1, "X[|_d0^d0]"),
        (2, 1, "R[|^d0_d1_d0^d1]"),
        (3, -1, "T[|_d0_d1_d2] T[|^d0^d1^d2]"),
        (4, 1, "T[|_d0_d1_d2] T[|^d1^d0^d2]"),
        (5, 1, "T[_d0|^d1_d1^d0]"),
        (4, 1, "T[|^d0_d0_d2] T[|^d1_d1^d2]"),
        (5, 1, "T[|^d0_d0_d2] T[|^d1_d1^d2]"),
    ]
}

fn trace_cs() -> Vec<RatFunc> {
    vec![
        rf("A+n-1", "n"),
        rf("A*(-a*n+n+6)+n^2-n-6", "6*n"),
        rf(
            "-A*(a^2*n^2+2*a^2*n-a*n^2-26*a*n-48*a+96)+a*n^3+a*n^2+22*a*n-48*a+96",
            "24*a*n*(n+2)",
        ),
        rf(
            "A*(a^2*n^2+2*a^2*n-a*n^2-14*a*n-24*a+48)-a*n^3-a*n^2-10*a*n+24*a-48",
            "12*a*n*(n+2)",
        ),
        rf(
            "-A*(a^2*n^2+4*a^2*n-a*n^2-10*a*n-36*a+48)+a*n^3-3*a*n^2+14*a*n-36*a+48",
            "6*a*(n-2)*n",
        ),
    ]
}

fn trace_cs_n2() -> Vec<RatFunc> {
    vec![
        lf("2-a", "2*(1-a)"),
        lf("2+a", "6*(1-a)"),
        lf("1", "12"),
        lf("-1", "6"),
        two(("-(a-4)*L", "2*a"), ("-(11*a-14)", "6*(1-a)")),
    ]
}

fn factors(text: &str) -> Vec<Factor> {
    let t: Term<RPoly> = parse_term(&format!("{{1}} {text}")).expect("reference structure");
    t.factors
}

fn assemble(cs: &[RatFunc]) -> TensorExpr<RatFunc> {
    let terms = structures()
        .into_iter()
        .map(|(i, sign, w, text)| {
            let c = cs[i - 1].mul(&rf(w, "1")).scale(&int(sign));
            Term::new(c, factors(text))
        })
        .collect();
    TensorExpr::from_terms(terms)
}

fn assemble_trace(cs: &[RatFunc]) -> TensorExpr<RatFunc> {
    TensorExpr::from_terms(
        trace_structures()
            .into_iter()
            .map(|(i, sign, text)| Term::new(cs[i - 1].scale(&int(sign)), factors(text)))
            .collect(),
    )
}

/// `x - y` modulo the cyclic and Bianchi identities.
fn residual(
    x: &TensorExpr<RatFunc>,
    y: &TensorExpr<RatFunc>,
) -> Result<TensorExpr<RatFunc>, String> {
    let d = canonicalize(&x.sub(y)).map_err(s)?;
    apply_identities(&d, IDENTITY_DEPTH).map_err(s)
}

fn expect_zero<C: CoeffText>(what: &str, r: &TensorExpr<C>) -> Result<(), String> {
    if r.is_zero() {
        Ok(())
    } else {
        Err(format!(
            "{what}: {} residual terms, first {}",
            r.len(),
            write_expr(&TensorExpr::single(r.terms[0].clone()))
        ))
    }
}

fn compute(
    preset: &str,
    order: usize,
    dim: Dimension,
    torsion: bool,
    gauge: bool,
) -> Result<Report, String> {
    let op = parse_operator(preset).map_err(s)?;
    let mut cfg = RunConfig::new(op, order, dim);
    cfg.torsion = torsion;
    cfg.gauge = gauge;
    run(&cfg).map_err(s)
}

fn lowered(r: &Report) -> Result<TensorExpr<RatFunc>, String> {
    canonicalize(&heatker::pipeline::with_free_variance(&r.expression, false)).map_err(s)
}

fn symbolic_at(c: &RatFunc, n: f64, a: f64) -> f64 {
    c.eval_f64(&[n, a, (1.0 - a).powf(-n / 2.0)])
}

fn at_two(c: &RatFunc, a: f64) -> f64 {
    c.eval_f64(&[2.0, a, (1.0 - a).ln()])
}

/// Compares the `n → 2` limit of `general` with `fixed` at a few values of `a`.
fn limit_matches(general: &RatFunc, fixed: &RatFunc) -> bool {
    [0.3, -0.4, 0.6, -1.5].iter().all(|&a| {
        let lim = (symbolic_at(general, 2.0 + LIMIT_STEP, a)
            + symbolic_at(general, 2.0 - LIMIT_STEP, a))
            / 2.0;
        let v = at_two(fixed, a);
        (lim - v).abs() <= LIMIT_TOL * v.abs().max(1.0)
    })
}

fn full_e2_symbolic() -> Check {
    let clock = Instant::now();
    let r = compute("nonminimal", 2, Dimension::Symbolic, true, true)?;
    let elapsed = clock.elapsed();
    if elapsed > TIME_LIMIT {
        return Err(format!("took {elapsed:?}"));
    }
    let mine = lowered(&r)?;
    expect_zero(
        "against reference",
        &residual(&mine, &assemble(&corrected_cs()))?,
    )?;
    let regrouped = canonicalize(&heatker::pipeline::with_free_variance(
        &expand_groups(&r.groups),
        false,
    ))
    .map_err(s)?;
    expect_zero("grouped output", &residual(&regrouped, &mine)?)?;
    let listed = listed_cs();
    if residual(&mine, &assemble(&listed))?.is_zero() {
        return Err("the listed C13 should not match".into());
    }
    // the corrected C13 reproduces the listed n = 2 value, the listed one does not
    let n2 = listed_cs_n2();
    if !limit_matches(&corrected_cs()[12], &n2[12]) || limit_matches(&listed[12], &n2[12]) {
        return Err("C13 correction not confirmed by its n = 2 limit".into());
    }
    Ok(format!(
        "{} terms in {} groups match C1..C17 (C13 with a^2 in the denominator) in {:.2}s",
        mine.len(),
        r.groups.len(),
        elapsed.as_secs_f64()
    ))
}

fn full_e2_two_dimensions() -> Check {
    let r = compute("nonminimal", 2, Dimension::Fixed(2), true, true)?;
    let mine = lowered(&r)?;
    let fixed = corrected_cs_n2();
    expect_zero("against reference", &residual(&mine, &assemble(&fixed))?)?;
    let general = corrected_cs();
    let listed = listed_cs_n2();
    for i in 0..17 {
        if !limit_matches(&general[i], &fixed[i]) {
            return Err(format!(
                "C{} is not the n -> 2 limit of the general coefficient",
                i + 1
            ));
        }
        if (i < 2) == limit_matches(&general[i], &listed[i]) {
            return Err(format!(
                "listed C{} unexpectedly {}",
                i + 1,
                if i < 2 { "consistent" } else { "inconsistent" }
            ));
        }
    }
    // tr X enters through C1 + (n+1) C2
    let tr_x = |cs: &[RatFunc]| cs[0].add(&cs[1].scale(&int(3)));
    let tr1 = &trace_cs_n2()[0];
    if tr_x(&fixed) != *tr1 || tr_x(&listed) == *tr1 {
        return Err("trace identity C1 + 3 C2 = tr C1 fails".into());
    }
    Ok(format!(
        "{} terms match with C1, C2 replaced by their n -> 2 limits",
        mine.len()
    ))
}

/// `g_{μν} E^{μν}` computed from the emitted full coefficient.
fn contracted(r: &Report) -> Result<TensorExpr<RatFunc>, String> {
    let g: TensorExpr<RatFunc> = parse_expr("{1} g[|_m0_m1]").map_err(s)?;
    let tr = contract_metric(&product(&r.expression, &g)).map_err(s)?;
    let tr = match r.mode {
        Mode::Symbolic => tr,
        Mode::Fixed(n0) => TensorExpr::from_terms(
            tr.terms
                .iter()
                .map(|t| {
                    t.coeff
                        .subs_value(Var::Dim, &int(n0))
                        .map(|c| Term::new(c, t.factors.clone()))
                        .ok_or("pole")
                })
                .collect::<Result<_, _>>()?,
        ),
    };
    canonicalize(&tr).map_err(s)
}

fn lorentz_trace() -> Check {
    let mut sizes = Vec::new();
    for (dim, cs) in [
        (Dimension::Symbolic, trace_cs()),
        (Dimension::Fixed(2), trace_cs_n2()),
    ] {
        let r = compute("nonminimal", 2, dim, true, true)?;
        let tr = r.trace.clone().ok_or("no trace emitted")?;
        expect_zero(
            &format!("{dim:?} against reference"),
            &residual(&tr, &assemble_trace(&cs))?,
        )?;
        expect_zero(
            &format!("{dim:?} contraction of the full result"),
            &residual(&contracted(&r)?, &tr)?,
        )?;
        sizes.push(tr.len());
    }
    let (general, fixed) = (trace_cs(), trace_cs_n2());
    if let Some(i) = (0..5).find(|&i| !limit_matches(&general[i], &fixed[i])) {
        return Err(format!("trace C{} at n = 2 is not the limit", i + 1));
    }
    Ok(format!(
        "C1..C5 match in symbolic n ({} terms) and n = 2 ({} terms); g E equals the emitted trace",
        sizes[0], sizes[1]
    ))
}

fn coefficient_of(e: &TensorExpr<RatFunc>, text: &str) -> Result<RatFunc, String> {
    let key = canonicalize(&TensorExpr::from_terms(vec![Term::new(
        RatFunc::one(),
        factors(text),
    )]))
    .map_err(s)?;
    let f = &key.terms[0].factors;
    Ok(e.terms
        .iter()
        .find(|t| &t.factors == f)
        .map(|t| t.coeff.clone())
        .unwrap_or_else(RatFunc::zero))
}

fn minimal_limit() -> Check {
    let r = compute("nonminimal", 2, Dimension::Symbolic, true, true)?;
    for t in r
        .expression
        .terms
        .iter()
        .chain(r.trace.iter().flat_map(|t| t.terms.iter()))
    {
        limit_a0(&t.coeff, Mode::Symbolic).map_err(|e| format!("a -> 0 of {}: {e}", t.coeff))?;
    }
    let tr = r.trace.clone().ok_or("no trace")?;
    let c1 = limit_a0(&coefficient_of(&tr, "X[|_d0^d0]")?.neg(), Mode::Symbolic).map_err(s)?;
    let c2 = limit_a0(&coefficient_of(&tr, "R[|^d0_d1_d0^d1]")?, Mode::Symbolic).map_err(s)?;
    if c1 != RatFunc::one() || c2 != rf("n", "6") {
        return Err(format!("trace C1 -> {c1}, C2 -> {c2}"));
    }
    let scalar = compute("minimal-scalar", 2, Dimension::Symbolic, false, false)?;
    let expect: TensorExpr<RatFunc> = parse_expr("{1/6} R[|^d0_d1_d0^d1]\n{-1} X[|]").map_err(s)?;
    expect_zero("minimal scalar", &residual(&scalar.expression, &expect)?)?;
    // the vector operator at a = 0 is minimal as well
    let flat = compute("nonminimal", 2, Dimension::Symbolic, false, false)?;
    let limit = TensorExpr::from_terms(
        lowered(&flat)?
            .terms
            .iter()
            .map(|t| limit_a0(&t.coeff, Mode::Symbolic).map(|c| Term::new(c, t.factors.clone())))
            .collect::<Result<_, _>>()
            .map_err(s)?,
    );
    let vector: TensorExpr<RatFunc> =
        parse_expr("{1/6} g[|_m0_m1] R[|^d0_d1_d0^d1]\n{-1} X[|_m0_m1]").map_err(s)?;
    expect_zero("vector at a = 0", &residual(&limit, &vector)?)?;
    Ok(
        "all coefficients finite at a = 0; trace C1 -> 1, C2 -> n/6; minimal case gives R/6 - X"
            .into(),
    )
}

/// `[σ_m]` integrated and reduced without the parity shortcut.
fn unpruned(preset: &str, m: usize) -> Result<TensorExpr<RatFunc>, String> {
    let op = parse_operator(preset).map_err(s)?;
    let sigma = solve_sigma(&op, m).map_err(s)?;
    let (p, i) = required_orders(&sigma[m]);
    let tables = ColimTables {
        phase: build_phase_table(p.max(1), op.flags).map_err(s)?,
        transport: build_transport_table(i.max(1), op.rank, op.flags).map_err(s)?,
    };
    let c = take_colim(&sigma[m], &tables).map_err(s)?;
    let h = integrate_expression(&c).map_err(s)?;
    canonicalize(&contract_metric(&Reducer::new(Mode::Symbolic).reduce_expression(&h)).map_err(s)?)
        .map_err(s)
}

fn odd_orders() -> Check {
    for p in PRESETS {
        for m in [1, 3] {
            let r = compute(p, m, Dimension::Symbolic, true, true)?;
            if !r.expression.is_zero() {
                return Err(format!("{p}: E{m} has {} terms", r.expression.len()));
            }
        }
    }
    for (p, m) in [("nonminimal", 1), ("minimal-scalar", 3), ("yang-mills", 1)] {
        let e = unpruned(p, m)?;
        expect_zero(&format!("{p} E{m} without the parity shortcut"), &e)?;
    }
    Ok(format!(
        "E1 = E3 = 0 for {} presets, also by full integration",
        PRESETS.len()
    ))
}

fn simpson(f: impl Fn(f64) -> f64, lo: f64, hi: f64, intervals: usize) -> f64 {
    common::quad::simpson(f, lo, hi, intervals)
}

fn leading_order() -> Check {
    let r = compute("nonminimal", 0, Dimension::Symbolic, true, true)?;
    let expect: TensorExpr<RatFunc> =
        TensorExpr::from_terms(vec![Term::new(rf("n-1+A", "n"), factors("g[|^m0^m1]"))]);
    expect_zero(
        "closed form",
        &canonicalize(&r.expression.sub(&expect)).map_err(s)?,
    )?;
    // E_0^{11} at n = 3 from the heat kernel of the principal symbol:
    // e^{-k²} (δ - k̂k̂) + e^{-(1-a)k²} k̂k̂
    let a = 0.5;
    let c = &r.expression.terms[0].coeff;
    let mine = eval_elem(c, Mode::Symbolic, 3.0, a);
    // k̂_1 k̂_1 = cos²θ averaged over the sphere
    let angular =
        |f: fn(f64) -> f64| 2.0 * PI * simpson(|t| f(t.cos().powi(2)) * t.sin(), 0.0, PI, 2000);
    let transverse = angular(|c| 1.0 - c);
    let longitudinal = angular(|c| c);
    let radial = |b: f64| simpson(|k| k * k * (-b * k * k).exp(), 0.0, 12.0, 4000);
    let numeric = (4.0 * PI).powf(1.5) / (2.0 * PI).powi(3)
        * (transverse * radial(1.0) + longitudinal * radial(1.0 - a));
    let rel = (mine - numeric).abs() / numeric.abs();
    if rel > NUMERIC_TOL {
        return Err(format!("E0^11 = {mine}, quadrature {numeric}"));
    }
    Ok(format!(
        "E0 = g (n-1+A)/n; quadrature at n = 3, a = 1/2 agrees to {rel:.1e}"
    ))
}

fn coincidence_limits() -> Check {
    let bg = common::Background::random(11, 6, true);
    let phase = build_phase_table(4, Background::FULL).map_err(s)?;
    let mut orderings = 0;
    for m in 2..=4 {
        expect_zero(
            &format!("phase order {m}"),
            &symmetrized_residual(&phase, m).map_err(s)?,
        )?;
        for perm in permutations(m) {
            let r = ordering_residual(&phase, m, &perm).map_err(s)?;
            if !bg.vanishes(&r) || !apply_identities(&r, 3).map_err(s)?.is_zero() {
                return Err(format!("phase order {m}, ordering {perm:?}"));
            }
            orderings += 1;
        }
    }
    for rank in [0, 2] {
        let t = build_transport_table(3, rank, Background::FULL).map_err(s)?;
        for m in 1..=3 {
            expect_zero(
                &format!("transport rank {rank} order {m}"),
                &symmetrized_residual(&t, m).map_err(s)?,
            )?;
            for perm in permutations(m) {
                if !bg.vanishes(&ordering_residual(&t, m, &perm).map_err(s)?) {
                    return Err(format!(
                        "transport rank {rank}, order {m}, ordering {perm:?}"
                    ));
                }
                orderings += 1;
            }
        }
    }
    Ok(format!(
        "symmetrized conditions exact; {orderings} orderings consistent"
    ))
}

fn numeric_suites() -> Check {
    let worst = common::quad::j_cases(77, 20, NUMERIC_TOL)?;
    common::ricci::ricci_cases(2024, 50)?;
    Ok(format!("20 J integrals within {worst:.1e} of quadrature; 50 derivative swaps exact on the background"))
}

type Criterion = (&'static str, fn() -> Check);

fn main() {
    let criteria: [Criterion; 8] = [
        ("full E2, symbolic n", full_e2_symbolic),
        ("full E2, n = 2", full_e2_two_dimensions),
        ("Lorentz trace", lorentz_trace),
        ("minimal limit a -> 0", minimal_limit),
        ("odd orders vanish", odd_orders),
        ("E0", leading_order),
        ("coincidence limit tables", coincidence_limits),
        ("J quadrature and Ricci identity", numeric_suites),
    ];
    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let clock = Instant::now();
        let outcome = check();
        let secs = clock.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS [{}] {name}: {detail} ({secs:.1}s)", k + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL [{}] {name}: {why} ({secs:.1}s)", k + 1);
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
