//! Coincidence limits `[D_{μ1}..D_{μm} l]` and `[D_{μ1}..D_{μm} I]`.
//!
//! The symmetrized limits vanish for `m > 1` (phase) and `m > 0`
//! (transport). Writing every ordering of the derivatives as the identity
//! ordering plus commutator corrections turns the vanishing sum into
//! `m! L_m + Σ corrections = 0`, and the corrections only involve limits of
//! lower order.
//!
//! Entry `m` carries free labels `Free(0)..Free(m-1)` for the derivatives,
//! outermost first. The rank-2 transport function adds `Free(m)` (upper,
//! first point) and `Free(m+1)` (lower, second point).

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::expr::{
    canonicalize, fresh_dummy_base, parse_expr, permutations, relabel_free, symmetrize, write_expr,
    Coeff, ExprError, Factor, Index, Kind, Label, TensorExpr, Term,
};
use crate::num::{factorial, Rational};
use crate::poly::RPoly;
use crate::rewrite::{commutator_terms, Background, RewriteError};

pub const CACHE_VERSION: u32 = 1;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ColimError {
    #[error("order {0} cannot be solved: corrections reference the unknown itself")]
    UnsolvableOrder(usize),
    #[error("no {target} limit of order {order} (table holds up to {max})")]
    MissingColimOrder {
        target: Target,
        order: usize,
        max: usize,
    },
    #[error("unsupported transport rank {0}")]
    BadRank(u8),
    #[error("cache version mismatch: {0}")]
    VersionMismatch(String),
    #[error("cache flags do not match the request: {0}")]
    FlagMismatch(String),
    #[error("corrupt cache file: {0}")]
    CorruptFile(String),
    #[error("i/o: {0}")]
    Io(String),
    #[error(transparent)]
    Rewrite(#[from] RewriteError),
    #[error(transparent)]
    Expr(#[from] ExprError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Target {
    Phase,
    Transport { rank: u8 },
}

impl Target {
    fn kind(self) -> Kind {
        match self {
            Target::Phase => Kind::Phase,
            Target::Transport { .. } => Kind::Transport,
        }
    }

    pub fn rank(self) -> u8 {
        match self {
            Target::Phase => 0,
            Target::Transport { rank } => rank,
        }
    }

    /// Lowest order whose symmetrized limit vanishes.
    pub fn first_condition(self) -> usize {
        match self {
            Target::Phase => 2,
            Target::Transport { .. } => 1,
        }
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Target::Phase => f.write_str("phase"),
            Target::Transport { rank } => write!(f, "transport(rank {rank})"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ColimTable {
    pub target: Target,
    pub flags: Background,
    /// `entries[m]` is the limit with `m` derivatives.
    pub entries: Vec<TensorExpr<RPoly>>,
}

impl ColimTable {
    pub fn max_order(&self) -> usize {
        self.entries.len().saturating_sub(1)
    }

    pub fn entry(&self, m: usize) -> Result<&TensorExpr<RPoly>, ColimError> {
        self.entries.get(m).ok_or(ColimError::MissingColimOrder {
            target: self.target,
            order: m,
            max: self.max_order(),
        })
    }
}

/// The phase and transport tables used by one computation.
#[derive(Clone, Debug, PartialEq)]
pub struct ColimTables {
    pub phase: ColimTable,
    pub transport: ColimTable,
}

/// `D_{Free(0)} .. D_{Free(m-1)}` applied to the target function.
pub fn unknown_factor(target: Target, m: usize) -> Factor {
    let derivs: Vec<Index> = (0..m as u16).map(|i| Index::down(Label::Free(i))).collect();
    let slots: Vec<Index> = if target.rank() == 2 {
        vec![
            Index::up(Label::Free(m as u16)),
            Index::down(Label::Free(m as u16 + 1)),
        ]
    } else {
        Vec::new()
    };
    Factor::new(target.kind(), &derivs, &slots)
}

fn initial_entries(target: Target) -> Vec<TensorExpr<RPoly>> {
    match target {
        Target::Phase => vec![
            TensorExpr::zero(),
            TensorExpr::single(Term::new(
                RPoly::one(),
                vec![Factor::plain(Kind::Wave, &[Index::down(Label::Free(0))])],
            )),
        ],
        Target::Transport { rank } => {
            let id = if rank == 2 {
                vec![Factor::plain(
                    Kind::Delta,
                    &[Index::up(Label::Free(0)), Index::down(Label::Free(1))],
                )]
            } else {
                Vec::new()
            };
            vec![
                TensorExpr::single(Term::new(RPoly::one(), id)),
                TensorExpr::zero(),
            ]
        }
    }
}

/// Commutator corrections collected while bubble-sorting the derivative
/// labels of factor 0 of `t` into increasing order.
fn sort_corrections(t: &Term<RPoly>, bg: Background) -> Result<Vec<Term<RPoly>>, ColimError> {
    let mut main = t.clone();
    let mut out = Vec::new();
    loop {
        let d = &main.factors[0].derivs;
        let Some(j) = (0..d.len().saturating_sub(1)).find(|&j| d[j].label > d[j + 1].label) else {
            break;
        };
        out.extend(commutator_terms(&main, 0, j, bg)?);
        main.factors[0].derivs.swap(j, j + 1);
    }
    Ok(out)
}

fn ordering(target: Target, m: usize, perm: &[usize]) -> Term<RPoly> {
    let mut f = unknown_factor(target, m);
    for (i, p) in perm.iter().enumerate() {
        f.derivs[i] = Index::down(Label::Free(*p as u16));
    }
    Term::new(RPoly::one(), vec![f])
}

fn build(target: Target, max_order: usize, flags: Background) -> Result<ColimTable, ColimError> {
    if !matches!(target.rank(), 0 | 2) {
        return Err(ColimError::BadRank(target.rank()));
    }
    let mut table = ColimTable {
        target,
        flags,
        entries: initial_entries(target),
    };
    table.entries.truncate(max_order + 1);
    for m in 2..=max_order {
        let mut acc = TensorExpr::zero();
        for perm in permutations(m) {
            for c in sort_corrections(&ordering(target, m, &perm), flags)? {
                for t in substitute_limits_below(&c, &table, m)? {
                    acc.push(t);
                }
            }
        }
        let w = -(Rational::from_integer(1.into()) / factorial(m as u32));
        table.entries.push(canonicalize(&acc.scaled(&w))?);
    }
    Ok(table)
}

/// Phase limits up to `max_order`.
pub fn build_phase_table(max_order: usize, flags: Background) -> Result<ColimTable, ColimError> {
    build(Target::Phase, max_order, flags)
}

/// Transport limits up to `max_order` for a scalar (`rank = 0`) or
/// rank-2 (`rank = 2`) transport function.
pub fn build_transport_table(
    max_order: usize,
    rank: u8,
    flags: Background,
) -> Result<ColimTable, ColimError> {
    build(Target::Transport { rank }, max_order, flags)
}

fn substitute_limits_below(
    t: &Term<RPoly>,
    table: &ColimTable,
    m: usize,
) -> Result<Vec<Term<RPoly>>, ColimError> {
    let kind = table.target.kind();
    if t.factors
        .iter()
        .any(|f| f.kind == kind && f.derivs.len() >= m)
    {
        return Err(ColimError::UnsolvableOrder(m));
    }
    let (phase, transport) = match table.target {
        Target::Phase => (Some(table), None),
        Target::Transport { .. } => (None, Some(table)),
    };
    substitute_limits(t, phase, transport)
}

/// Relabels one table term onto the indices of `f`.
fn place_entry(entry: &Term<RPoly>, f: &Factor, min_dummy: u16) -> Term<RPoly> {
    let m = f.derivs.len();
    let targets: Vec<Index> = f.derivs.iter().chain(f.slots.iter()).copied().collect();
    let mut map = std::collections::HashMap::new();
    for idx in entry.free_indices() {
        let Label::Free(j) = idx.label else { continue };
        let j = j as usize;
        let dst = if j < m + f.slots.len() {
            targets[j]
        } else {
            continue;
        };
        map.insert(idx.label, (dst.label, idx.up != dst.up));
    }
    relabel_free(entry, &map, min_dummy)
}

/// Replaces every phase and transport factor of `t` by its limit.
pub fn substitute_limits<C: Coeff>(
    t: &Term<C>,
    phase: Option<&ColimTable>,
    transport: Option<&ColimTable>,
) -> Result<Vec<Term<C>>, ColimError> {
    // partial products: (coefficient, factors, next free dummy id)
    let mut partial: Vec<(C, Vec<Factor>, u16)> =
        vec![(t.coeff.clone(), Vec::new(), fresh_dummy_base(t))];
    for f in &t.factors {
        let table = match f.kind {
            Kind::Phase => phase,
            Kind::Transport => transport,
            _ => {
                for p in &mut partial {
                    p.1.push(f.clone());
                }
                continue;
            }
        };
        let target = if f.kind == Kind::Phase {
            Target::Phase
        } else {
            Target::Transport {
                rank: f.slots.len() as u8,
            }
        };
        let table = table.ok_or(ColimError::MissingColimOrder {
            target,
            order: f.derivs.len(),
            max: 0,
        })?;
        let entry = table.entry(f.derivs.len())?;
        let mut next = Vec::with_capacity(partial.len() * entry.len());
        for (c, fs, base) in &partial {
            for et in &entry.terms {
                let placed = place_entry(et, f, *base);
                let mut coeff = c.clone();
                coeff.mul_poly(&placed.coeff);
                if coeff.is_zero() {
                    continue;
                }
                let nb = fresh_dummy_base(&placed).max(*base);
                let mut nfs = fs.clone();
                nfs.extend(placed.factors);
                next.push((coeff, nfs, nb));
            }
        }
        partial = next;
    }
    Ok(partial
        .into_iter()
        .map(|(coeff, factors, _)| Term { coeff, factors })
        .collect())
}

/// `Σ_π [D_π φ]` evaluated from the table by relabeling entry `m`; zero
/// for a correct table.
pub fn symmetrized_residual(table: &ColimTable, m: usize) -> Result<TensorExpr<RPoly>, ColimError> {
    let entry = table.entry(m)?;
    let labels: Vec<Label> = (0..m as u16).map(Label::Free).collect();
    Ok(symmetrize(entry, &labels)?)
}

/// `[D_π φ] - [D_id φ] - [corrections]` for one ordering `π`, with the
/// left side read from the table by relabeling; zero for a correct table.
pub fn ordering_residual(
    table: &ColimTable,
    m: usize,
    perm: &[usize],
) -> Result<TensorExpr<RPoly>, ColimError> {
    let t = ordering(table.target, m, perm);
    let (phase, transport) = match table.target {
        Target::Phase => (Some(table), None),
        Target::Transport { .. } => (None, Some(table)),
    };
    let mut acc = TensorExpr::from_terms(substitute_limits(&t, phase, transport)?);
    acc = acc.sub(table.entry(m)?);
    for c in sort_corrections(&t, table.flags)? {
        for u in substitute_limits(&c, phase, transport)? {
            let mut u = u;
            u.coeff.negate();
            acc.push(u);
        }
    }
    Ok(canonicalize(&acc)?)
}

fn flag(b: bool) -> u8 {
    b as u8
}

fn body_of(t: &ColimTable) -> String {
    let mut body = String::new();
    for (m, e) in t.entries.iter().enumerate() {
        body.push_str(&format!("entry {m}:\n"));
        body.push_str(&write_expr(e));
        body.push('\n');
    }
    body
}

fn target_name(t: Target) -> &'static str {
    match t {
        Target::Phase => "phase",
        Target::Transport { .. } => "transport",
    }
}

/// Deterministic text form of a table.
pub fn render_table(t: &ColimTable) -> String {
    let body = body_of(t);
    let sum = hex(&Sha256::digest(body.as_bytes()));
    format!(
        "version={CACHE_VERSION}\ntarget={}\nrank={}\ntorsion={}\ngauge={}\nmax_order={}\nchecksum={sum}\n{body}",
        target_name(t.target),
        t.target.rank(),
        flag(t.flags.torsion),
        flag(t.flags.gauge),
        t.max_order(),
    )
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Parses a table, checking version and checksum.
pub fn parse_table(text: &str) -> Result<ColimTable, ColimError> {
    let mut header = std::collections::HashMap::new();
    let mut rest = text;
    for key in [
        "version",
        "target",
        "rank",
        "torsion",
        "gauge",
        "max_order",
        "checksum",
    ] {
        let (line, tail) = rest
            .split_once('\n')
            .ok_or_else(|| ColimError::CorruptFile("truncated header".into()))?;
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| ColimError::CorruptFile(format!("bad header line '{line}'")))?;
        if k != key {
            return Err(ColimError::CorruptFile(format!(
                "expected '{key}', found '{k}'"
            )));
        }
        if key == "version" && v != CACHE_VERSION.to_string() {
            return Err(ColimError::VersionMismatch(format!(
                "file has {v}, expected {CACHE_VERSION}"
            )));
        }
        header.insert(key, v.to_string());
        rest = tail;
    }
    if hex(&Sha256::digest(rest.as_bytes())) != header["checksum"] {
        return Err(ColimError::CorruptFile("checksum mismatch".into()));
    }
    let num = |k: &str| -> Result<usize, ColimError> {
        header[k]
            .parse()
            .map_err(|_| ColimError::CorruptFile(format!("bad value for {k}")))
    };
    let rank = num("rank")? as u8;
    let target = match header["target"].as_str() {
        "phase" => Target::Phase,
        "transport" => Target::Transport { rank },
        other => return Err(ColimError::CorruptFile(format!("unknown target '{other}'"))),
    };
    let flags = Background {
        torsion: num("torsion")? == 1,
        gauge: num("gauge")? == 1,
    };
    let max_order = num("max_order")?;
    let mut entries = Vec::new();
    let mut current: Option<String> = None;
    for line in rest.lines() {
        if let Some(m) = line
            .strip_prefix("entry ")
            .and_then(|s| s.strip_suffix(':'))
        {
            if let Some(text) = current.take() {
                entries.push(parse_expr(&text)?);
            }
            if m.parse::<usize>().ok() != Some(entries.len()) {
                return Err(ColimError::CorruptFile(format!(
                    "entry {m} out of sequence"
                )));
            }
            current = Some(String::new());
        } else {
            let cur = current
                .as_mut()
                .ok_or_else(|| ColimError::CorruptFile("data before first entry".into()))?;
            cur.push_str(line);
            cur.push('\n');
        }
    }
    if let Some(text) = current {
        entries.push(parse_expr(&text)?);
    }
    if entries.len() != max_order + 1 {
        return Err(ColimError::CorruptFile(format!(
            "expected {} entries, found {}",
            max_order + 1,
            entries.len()
        )));
    }
    Ok(ColimTable {
        target,
        flags,
        entries,
    })
}

/// Writes the table atomically (temporary file, then rename).
pub fn save_table(t: &ColimTable, path: &Path) -> Result<(), ColimError> {
    let io = |e: std::io::Error| ColimError::Io(e.to_string());
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io)?;
    }
    let tmp = path.with_extension("tmp");
    let mut f = fs::File::create(&tmp).map_err(io)?;
    f.write_all(render_table(t).as_bytes()).map_err(io)?;
    f.sync_all().map_err(io)?;
    fs::rename(&tmp, path).map_err(io)
}

/// Loads a table and checks that it was built for `target` and `flags`.
pub fn load_table(
    path: &Path,
    target: Target,
    flags: Background,
) -> Result<ColimTable, ColimError> {
    let text = fs::read_to_string(path).map_err(|e| ColimError::Io(e.to_string()))?;
    let t = parse_table(&text)?;
    if t.target != target {
        return Err(ColimError::FlagMismatch(format!(
            "file holds {}, requested {target}",
            t.target
        )));
    }
    if t.flags != flags {
        return Err(ColimError::FlagMismatch(format!(
            "file has torsion={} gauge={}, requested torsion={} gauge={}",
            flag(t.flags.torsion),
            flag(t.flags.gauge),
            flag(flags.torsion),
            flag(flags.gauge)
        )));
    }
    Ok(t)
}

/// Cache file name for a target and background.
pub fn cache_file_name(target: Target, flags: Background) -> String {
    format!(
        "{}{}_t{}_g{}.colim",
        target_name(target),
        if target == Target::Phase {
            String::new()
        } else {
            target.rank().to_string()
        },
        flag(flags.torsion),
        flag(flags.gauge)
    )
}
