//! The computation of `E_m`: symbol recursion, coincidence limits, `J`
//! integration and hypergeometric reduction, streamed term by term.

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use heatker_core::colim::{
    build_phase_table, build_transport_table, cache_file_name, load_table, save_table, ColimTable,
    ColimTables, Target,
};
use heatker_core::expr::{
    canonicalize, canonicalize_term, contract_metric, parse_expr, product, Coeff, Kind, Label,
    ScalarCoeff, TensorExpr, Term,
};
use heatker_core::integrate::integrate_term;
use heatker_core::reduce::{eliminate_dependencies, limit_a0, CoeffGroup, Mode, Reducer};
use heatker_core::rewrite::{apply_bianchi, apply_cyclic, Background};
use heatker_core::sigma::{
    bind_endomorphism, required_orders, solve_sigma, take_colim_term, AParam, Endomorphism,
    OperatorSpec,
};
use heatker_core::{num::int, RatFunc, Var};
use num_traits::Zero;
use rayon::prelude::*;
use thiserror::Error;

/// Largest order computed without `allow_large_order`.
pub const MAX_GUARDED_ORDER: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Dimension {
    Symbolic,
    Fixed(i64),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Passes {
    pub bianchi: bool,
    pub cyclic: bool,
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub operator: OperatorSpec,
    pub order: usize,
    pub dimension: Dimension,
    pub torsion: bool,
    pub gauge: bool,
    pub cache: Option<PathBuf>,
    pub simplify: Passes,
    pub workers: Option<usize>,
    pub allow_large_order: bool,
    /// Watchdog on the number of terms of `σ_m`.
    pub max_terms: usize,
}

impl RunConfig {
    pub fn new(operator: OperatorSpec, order: usize, dimension: Dimension) -> Self {
        RunConfig {
            operator,
            order,
            dimension,
            torsion: true,
            gauge: true,
            cache: None,
            simplify: Passes::default(),
            workers: None,
            allow_large_order: false,
            max_terms: 2_000_000,
        }
    }
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error("unsupported operator: {0}")]
    Unsupported(String),
    #[error("resource guard: {0}")]
    ResourceGuard(String),
    #[error("{stage}: {message}")]
    Internal {
        stage: &'static str,
        message: String,
    },
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Unsupported(_) => 3,
            RunError::ResourceGuard(_) => 4,
            RunError::Internal { .. } => 5,
        }
    }
}

fn internal(stage: &'static str) -> impl Fn(String) -> RunError {
    move |message| RunError::Internal { stage, message }
}

#[derive(Clone, Debug)]
pub struct StageStat {
    pub name: &'static str,
    pub elapsed: Duration,
    pub terms: usize,
}

#[derive(Clone, Debug)]
pub struct Report {
    /// The operator with the effective background flags.
    pub operator: OperatorSpec,
    pub order: usize,
    pub mode: Mode,
    /// `E_m` with upper free indices, without the factor `(4π)^{-n/2}`.
    pub expression: TensorExpr<RatFunc>,
    pub groups: Vec<CoeffGroup>,
    pub trace: Option<TensorExpr<RatFunc>>,
    pub trace_groups: Vec<CoeffGroup>,
    pub stages: Vec<StageStat>,
    pub warnings: Vec<String>,
    pub notes: Vec<String>,
}

/// Number of wave-vector factors a term carries after the coincidence
/// limit: one per `k` and one per phase-function factor.
fn k_count(t: &Term<ScalarCoeff>) -> usize {
    t.factors
        .iter()
        .filter(|f| matches!(f.kind, Kind::Wave | Kind::Phase))
        .count()
}

/// Sets the variance of every free index.
pub fn with_free_variance<C: Coeff>(e: &TensorExpr<C>, up: bool) -> TensorExpr<C> {
    let mut out = e.clone();
    for t in &mut out.terms {
        for f in &mut t.factors {
            for i in f.indices_mut() {
                if matches!(i.label, Label::Free(_)) {
                    i.up = up;
                }
            }
        }
    }
    out
}

/// `g_{μν} E^{μν}` (or `g^{μν} E_{μν}`); in fixed dimension `n` is replaced
/// by its value.
pub fn lorentz_trace(e: &TensorExpr<RatFunc>, mode: Mode) -> Result<TensorExpr<RatFunc>, String> {
    let up = e
        .terms
        .first()
        .and_then(|t| t.free_indices().first().map(|i| i.up))
        .unwrap_or(false);
    let g: TensorExpr<RatFunc> = parse_expr(if up {
        "{1} g[|_m0_m1]"
    } else {
        "{1} g[|^m0^m1]"
    })
    .map_err(|e| e.to_string())?;
    let tr = contract_metric(&product(e, &g)).map_err(|e| e.to_string())?;
    match mode {
        Mode::Symbolic => Ok(tr),
        Mode::Fixed(n0) => {
            let terms = tr
                .terms
                .iter()
                .map(|t| {
                    let c = t
                        .coeff
                        .subs_value(Var::Dim, &int(n0))
                        .ok_or("dimension hits a pole")?;
                    Ok(Term::new(c, t.factors.clone()))
                })
                .collect::<Result<Vec<_>, String>>()?;
            canonicalize(&TensorExpr::from_terms(terms)).map_err(|e| e.to_string())
        }
    }
}

/// Loads a table from the cache directory, or builds (and stores) it.
fn obtain_table(
    target: Target,
    order: usize,
    flags: Background,
    cache: Option<&Path>,
    warnings: &mut Vec<String>,
) -> Result<ColimTable, RunError> {
    let path = cache.map(|d| d.join(cache_file_name(target, flags)));
    if let Some(path) = &path {
        if path.exists() {
            match load_table(path, target, flags) {
                Ok(t) if t.max_order() >= order => return Ok(t),
                Ok(_) => {}
                Err(e) => warnings.push(format!(
                    "ignoring cache file {}: {e}; recomputing",
                    path.display()
                )),
            }
        }
    }
    let table = match target {
        Target::Phase => build_phase_table(order, flags),
        Target::Transport { rank } => build_transport_table(order, rank, flags),
    }
    .map_err(|e| internal("colim")(e.to_string()))?;
    if let Some(path) = &path {
        if let Err(e) = save_table(&table, path) {
            warnings.push(format!(
                "could not write cache file {}: {e}",
                path.display()
            ));
        }
    }
    Ok(table)
}

/// Builds (or refreshes) the cached phase and transport tables.
pub fn prepare_cache(
    max_order: usize,
    rank: u8,
    flags: Background,
    dir: &Path,
) -> Result<Vec<String>, RunError> {
    let mut warnings = Vec::new();
    obtain_table(
        Target::Phase,
        max_order.max(1),
        flags,
        Some(dir),
        &mut warnings,
    )?;
    obtain_table(
        Target::Transport { rank },
        max_order.max(1),
        flags,
        Some(dir),
        &mut warnings,
    )?;
    Ok(warnings)
}

/// `[σ]` of one term, integrated and reduced.
fn process_term(
    t: &Term<ScalarCoeff>,
    tables: &ColimTables,
    reducer: &Reducer,
) -> Result<(usize, Vec<Term<RatFunc>>), String> {
    if k_count(t) % 2 == 1 {
        return Ok((0, Vec::new()));
    }
    let limits = take_colim_term(t, tables).map_err(|e| e.to_string())?;
    let mut out = Vec::new();
    for c in &limits {
        let Some(c) = canonicalize_term(c).map_err(|e| e.to_string())? else {
            continue;
        };
        for h in integrate_term(&c).map_err(|e| e.to_string())? {
            let coeff = reducer.reduce_coeff(&h.coeff);
            if !coeff.is_zero() {
                out.push(Term::new(coeff, h.factors));
            }
        }
    }
    Ok((limits.len(), out))
}

fn simplify(e: &TensorExpr<RatFunc>, passes: Passes) -> Result<TensorExpr<RatFunc>, RunError> {
    let mut cur = e.clone();
    let err = internal("simplify");
    if passes.bianchi {
        let next = apply_bianchi(&cur).map_err(|e| err(e.to_string()))?;
        if next.len() <= cur.len() {
            cur = next;
        }
    }
    if passes.cyclic {
        let next = apply_cyclic(&cur).map_err(|e| err(e.to_string()))?;
        if next.len() <= cur.len() {
            cur = next;
        }
    }
    Ok(cur)
}

/// Fixes `a` after reduction; `a = 0` goes through the series limit since
/// the individual coefficients carry removable poles there.
fn substitute_a(
    e: &TensorExpr<RatFunc>,
    a: &AParam,
    mode: Mode,
) -> Result<TensorExpr<RatFunc>, RunError> {
    let AParam::Value(v) = a else {
        return Ok(e.clone());
    };
    let terms = e
        .terms
        .iter()
        .map(|t| {
            let c = if v.is_zero() {
                limit_a0(&t.coeff, mode)
                    .map_err(|e| RunError::Unsupported(format!("a = 0: {e}")))?
            } else {
                t.coeff.subs_value(Var::Param, v).ok_or_else(|| {
                    RunError::Unsupported(format!("coefficient singular at a = {v}"))
                })?
            };
            Ok(Term::new(c, t.factors.clone()))
        })
        .collect::<Result<Vec<_>, RunError>>()?;
    canonicalize(&TensorExpr::from_terms(terms)).map_err(|e| internal("reduce")(e.to_string()))
}

pub fn run(config: &RunConfig) -> Result<Report, RunError> {
    let mut stages = Vec::new();
    let mut warnings = Vec::new();
    let mut notes = Vec::new();
    let m = config.order;

    let clock = Instant::now();
    let mut op = config.operator.clone();
    op.flags = Background {
        torsion: op.flags.torsion && config.torsion,
        gauge: op.flags.gauge && config.gauge,
    };
    op.validate()
        .map_err(|e| RunError::Unsupported(e.to_string()))?;
    if m > MAX_GUARDED_ORDER && !config.allow_large_order {
        return Err(RunError::ResourceGuard(format!(
            "order {m} exceeds {MAX_GUARDED_ORDER}; pass the override flag to compute it anyway"
        )));
    }
    let mode = match config.dimension {
        Dimension::Symbolic => Mode::Symbolic,
        Dimension::Fixed(n0) => {
            Mode::fixed(n0).map_err(|e| RunError::Unsupported(e.to_string()))?
        }
    };
    stages.push(StageStat {
        name: "read",
        elapsed: clock.elapsed(),
        terms: 0,
    });

    let clock = Instant::now();
    let sigma = solve_sigma(&op, m).map_err(|e| internal("sigma")(e.to_string()))?;
    let sigma_m = &sigma[m];
    stages.push(StageStat {
        name: "sigma",
        elapsed: clock.elapsed(),
        terms: sigma_m.len(),
    });
    if sigma_m.len() > config.max_terms {
        return Err(RunError::ResourceGuard(format!(
            "σ_{m} has {} terms (limit {})",
            sigma_m.len(),
            config.max_terms
        )));
    }

    let clock = Instant::now();
    let (p, i) = required_orders(sigma_m);
    let cache = config.cache.as_deref();
    let tables = ColimTables {
        phase: obtain_table(Target::Phase, p.max(1), op.flags, cache, &mut warnings)?,
        transport: obtain_table(
            Target::Transport { rank: op.rank },
            i.max(1),
            op.flags,
            cache,
            &mut warnings,
        )?,
    };
    stages.push(StageStat {
        name: "colim-tables",
        elapsed: clock.elapsed(),
        terms: p.max(i),
    });

    let clock = Instant::now();
    let reducer = Reducer::new(mode);
    let work = || -> Result<Vec<(usize, Vec<Term<RatFunc>>)>, String> {
        sigma_m
            .terms
            .par_iter()
            .map(|t| process_term(t, &tables, &reducer))
            .collect()
    };
    let parts = match config.workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| internal("workers")(e.to_string()))?
            .install(work),
        None => work(),
    }
    .map_err(internal("colim"))?;
    let colim_terms: usize = parts.iter().map(|(n, _)| n).sum();
    let integrated: Vec<Term<RatFunc>> = parts.into_iter().flat_map(|(_, v)| v).collect();
    stages.push(StageStat {
        name: "stream",
        elapsed: clock.elapsed(),
        terms: colim_terms,
    });

    let clock = Instant::now();
    let mut e = contract_metric(&TensorExpr::from_terms(integrated))
        .map_err(|e| internal("merge")(e.to_string()))?;
    stages.push(StageStat {
        name: "merge",
        elapsed: clock.elapsed(),
        terms: e.len(),
    });

    let clock = Instant::now();
    if let Endomorphism::Bound(b) = &op.endo {
        e = bind_endomorphism(&e, b).map_err(|e| internal("bind")(e.to_string()))?;
    }
    e = substitute_a(&e, &op.a, mode)?;
    if op.rank == 2 {
        e = canonicalize(&with_free_variance(&e, false))
            .map_err(|e| internal("assemble")(e.to_string()))?;
    }
    e = simplify(&e, config.simplify)?;
    let trace = if op.rank == 2 {
        let tr = lorentz_trace(&e, mode).map_err(internal("trace"))?;
        Some(simplify(&tr, config.simplify)?)
    } else {
        None
    };
    if op.rank == 2 {
        e = canonicalize(&with_free_variance(&e, true))
            .map_err(|e| internal("assemble")(e.to_string()))?;
    }
    if m % 2 == 1 {
        notes.push(format!(
            "E_{m} vanishes: every term of [σ_{m}] carries an odd number of open wave-vector indices"
        ));
    }
    let groups = eliminate_dependencies(&e);
    let trace_groups = trace
        .as_ref()
        .map(eliminate_dependencies)
        .unwrap_or_default();
    stages.push(StageStat {
        name: "output",
        elapsed: clock.elapsed(),
        terms: e.len(),
    });

    Ok(Report {
        operator: op,
        order: m,
        mode,
        expression: e,
        groups,
        trace,
        trace_groups,
        stages,
        warnings,
        notes,
    })
}
