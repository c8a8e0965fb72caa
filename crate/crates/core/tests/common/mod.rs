//! Numeric background for checking tensor identities: a metric-compatible
//! connection with torsion on flat coordinates in three dimensions, a
//! `U(2)`-like gauge potential and endomorphism fields, all polynomial in
//! the coordinates with small random integer coefficients. Components are
//! evaluated exactly at the origin.

#![allow(dead_code)]

pub mod quad;
pub mod ricci;

use std::cell::RefCell;
use std::collections::{BTreeMap, HashMap};

use heatker_core::expr::{Kind, Label, TensorExpr, Term};
use heatker_core::num::{int, Rational};
use heatker_core::RPoly;
use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const DIM: usize = 3;
pub const BUNDLE: usize = 2;

/// Polynomial in the three coordinates, truncated at a total degree.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct P3(BTreeMap<[u8; 3], Rational>);

impl P3 {
    pub fn constant(c: Rational) -> Self {
        let mut m = BTreeMap::new();
        if !c.is_zero() {
            m.insert([0, 0, 0], c);
        }
        P3(m)
    }

    pub fn at_origin(&self) -> Rational {
        self.0
            .get(&[0, 0, 0])
            .cloned()
            .unwrap_or_else(Rational::zero)
    }

    fn add_term(&mut self, e: [u8; 3], c: Rational) {
        let v = self.0.entry(e).or_insert_with(Rational::zero);
        *v += c;
        if v.is_zero() {
            self.0.remove(&e);
        }
    }

    pub fn add(&self, o: &P3) -> P3 {
        let mut out = self.clone();
        for (e, c) in &o.0 {
            out.add_term(*e, c.clone());
        }
        out
    }

    pub fn scale(&self, c: &Rational) -> P3 {
        if c.is_zero() {
            return P3::default();
        }
        P3(self.0.iter().map(|(e, v)| (*e, v * c)).collect())
    }

    pub fn mul(&self, o: &P3, cap: u8) -> P3 {
        let mut out = P3::default();
        for (ea, ca) in &self.0 {
            for (eb, cb) in &o.0 {
                let e = [ea[0] + eb[0], ea[1] + eb[1], ea[2] + eb[2]];
                if e.iter().sum::<u8>() <= cap {
                    out.add_term(e, ca * cb);
                }
            }
        }
        out
    }

    pub fn deriv(&self, i: usize) -> P3 {
        let mut out = P3::default();
        for (e, c) in &self.0 {
            if e[i] == 0 {
                continue;
            }
            let mut f = *e;
            f[i] -= 1;
            out.add_term(f, c * int(e[i] as i64));
        }
        out
    }

    pub fn truncate(&self, cap: u8) -> P3 {
        P3(self
            .0
            .iter()
            .filter(|(e, _)| e.iter().sum::<u8>() <= cap)
            .map(|(e, c)| (*e, c.clone()))
            .collect())
    }

    fn random(rng: &mut ChaCha8Rng, deg: u8) -> P3 {
        let mut out = P3::default();
        for a in 0..=deg {
            for b in 0..=deg - a {
                for c in 0..=deg - a - b {
                    if rng.gen_bool(0.6) {
                        out.add_term([a, b, c], int(rng.gen_range(-3..=3)));
                    }
                }
            }
        }
        out
    }
}

pub type Mat = [[P3; BUNDLE]; BUNDLE];

fn mat_zero() -> Mat {
    Default::default()
}

fn mat_scalar(p: P3) -> Mat {
    let mut m = mat_zero();
    for i in 0..BUNDLE {
        m[i][i] = p.clone();
    }
    m
}

fn mat_add(a: &Mat, b: &Mat) -> Mat {
    let mut m = mat_zero();
    for i in 0..BUNDLE {
        for j in 0..BUNDLE {
            m[i][j] = a[i][j].add(&b[i][j]);
        }
    }
    m
}

fn mat_scale(a: &Mat, c: &Rational) -> Mat {
    let mut m = mat_zero();
    for i in 0..BUNDLE {
        for j in 0..BUNDLE {
            m[i][j] = a[i][j].scale(c);
        }
    }
    m
}

fn mat_mul(a: &Mat, b: &Mat, cap: u8) -> Mat {
    let mut m = mat_zero();
    for i in 0..BUNDLE {
        for j in 0..BUNDLE {
            for k in 0..BUNDLE {
                m[i][j] = m[i][j].add(&a[i][k].mul(&b[k][j], cap));
            }
        }
    }
    m
}

fn mat_deriv(a: &Mat, d: usize) -> Mat {
    let mut m = mat_zero();
    for i in 0..BUNDLE {
        for j in 0..BUNDLE {
            m[i][j] = a[i][j].deriv(d);
        }
    }
    m
}

/// Matrix of values at the origin.
pub type Val = [[Rational; BUNDLE]; BUNDLE];

pub fn val_zero() -> Val {
    Default::default()
}

pub fn val_is_zero(v: &Val) -> bool {
    v.iter().flatten().all(|x| x.is_zero())
}

fn val_mul(a: &Val, b: &Val) -> Val {
    let mut m = val_zero();
    for i in 0..BUNDLE {
        for j in 0..BUNDLE {
            for k in 0..BUNDLE {
                m[i][j] += &a[i][k] * &b[k][j];
            }
        }
    }
    m
}

pub fn val_add_scaled(acc: &mut Val, v: &Val, c: &Rational) {
    for i in 0..BUNDLE {
        for j in 0..BUNDLE {
            acc[i][j] += &v[i][j] * c;
        }
    }
}

type Key = (Kind, Vec<usize>, Vec<usize>);

pub struct Background {
    /// `gamma[λ][μ][ν] = Γ^λ_{μν}`.
    pub gamma: Vec<Vec<Vec<P3>>>,
    pub pot: Vec<Mat>,
    pub endo2: Vec<Vec<Mat>>,
    pub endo0: Mat,
    pub wave: Vec<Rational>,
    /// Values substituted for the polynomial coefficient variables.
    pub dim_value: Rational,
    pub param_value: Rational,
    /// Truncation degree of the underived fields.
    pub cap: u8,
    memo: RefCell<HashMap<Key, Mat>>,
}

impl Background {
    /// Random background; `cap` bounds the number of derivatives that can be
    /// evaluated exactly.
    pub fn random(seed: u64, cap: u8, gauge: bool) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let deg = cap.min(4);
        let mut gamma = vec![vec![vec![P3::default(); DIM]; DIM]; DIM];
        for mu in 0..DIM {
            for l in 0..DIM {
                for n in l + 1..DIM {
                    let p = P3::random(&mut rng, deg);
                    gamma[l][mu][n] = p.clone();
                    gamma[n][mu][l] = p.scale(&int(-1));
                }
            }
        }
        let rmat = |rng: &mut ChaCha8Rng| -> Mat {
            let mut m = mat_zero();
            for row in m.iter_mut() {
                for x in row.iter_mut() {
                    *x = P3::random(rng, deg);
                }
            }
            m
        };
        let pot: Vec<Mat> = (0..DIM)
            .map(|_| if gauge { rmat(&mut rng) } else { mat_zero() })
            .collect();
        let endo2: Vec<Vec<Mat>> = (0..DIM)
            .map(|_| (0..DIM).map(|_| rmat(&mut rng)).collect())
            .collect();
        let endo0 = rmat(&mut rng);
        let wave = (0..DIM).map(|_| int(rng.gen_range(-3..=3))).collect();
        Background {
            gamma,
            pot,
            endo2,
            endo0,
            wave,
            dim_value: int(DIM as i64),
            param_value: Rational::new(2.into(), 7.into()),
            cap,
            memo: RefCell::new(HashMap::new()),
        }
    }

    fn base(&self, kind: Kind, s: &[usize]) -> Mat {
        let c = self.cap;
        let g = &self.gamma;
        match kind {
            Kind::Metric | Kind::Delta => mat_scalar(P3::constant(if s[0] == s[1] {
                Rational::one()
            } else {
                Rational::zero()
            })),
            Kind::Wave => mat_scalar(P3::constant(self.wave[s[0]].clone())),
            Kind::Torsion => {
                mat_scalar(g[s[0]][s[2]][s[1]].add(&g[s[0]][s[1]][s[2]].scale(&int(-1))))
            }
            Kind::Riemann => {
                let (e, a, m, n) = (s[0], s[1], s[2], s[3]);
                let mut p = g[e][n][a]
                    .deriv(m)
                    .add(&g[e][m][a].deriv(n).scale(&int(-1)));
                for b in 0..DIM {
                    p = p.add(&g[e][m][b].mul(&g[b][n][a], c));
                    p = p.add(&g[e][n][b].mul(&g[b][m][a], c).scale(&int(-1)));
                }
                mat_scalar(p.truncate(c))
            }
            Kind::Gauge => {
                let (m, n) = (s[0], s[1]);
                let mut w = mat_add(
                    &mat_deriv(&self.pot[n], m),
                    &mat_scale(&mat_deriv(&self.pot[m], n), &int(-1)),
                );
                w = mat_add(&w, &mat_mul(&self.pot[m], &self.pot[n], c));
                w = mat_add(
                    &w,
                    &mat_scale(&mat_mul(&self.pot[n], &self.pot[m], c), &int(-1)),
                );
                w
            }
            Kind::Endo => {
                if s.is_empty() {
                    self.endo0.clone()
                } else {
                    self.endo2[s[0]][s[1]].clone()
                }
            }
            Kind::Phase | Kind::Transport => panic!("{kind:?} has no background value"),
        }
    }

    /// `D_{d[0]} ... D_{d[p-1]} F_{s}` as a polynomial matrix.
    pub fn field(&self, kind: Kind, d: &[usize], s: &[usize]) -> Mat {
        let key = (kind, d.to_vec(), s.to_vec());
        if let Some(v) = self.memo.borrow().get(&key) {
            return v.clone();
        }
        let v = if d.is_empty() {
            self.base(kind, s)
        } else if kind.is_parallel() {
            mat_zero()
        } else {
            let mu = d[0];
            let cap = self.cap.saturating_sub(d.len() as u8);
            let inner_d = &d[1..];
            let mut out = mat_deriv(&self.field(kind, inner_d, s), mu);
            let n_idx = inner_d.len() + s.len();
            for p in 0..n_idx {
                for c in 0..DIM {
                    let mut dd = inner_d.to_vec();
                    let mut ss = s.to_vec();
                    let a = if p < inner_d.len() {
                        std::mem::replace(&mut dd[p], c)
                    } else {
                        std::mem::replace(&mut ss[p - inner_d.len()], c)
                    };
                    let gp = mat_scalar(self.gamma[c][mu][a].scale(&int(-1)));
                    out = mat_add(&out, &mat_mul(&gp, &self.field(kind, &dd, &ss), cap + 1));
                }
            }
            if matches!(kind, Kind::Gauge | Kind::Endo) {
                let f = self.field(kind, inner_d, s);
                out = mat_add(&out, &mat_mul(&self.pot[mu], &f, cap + 1));
                out = mat_add(
                    &out,
                    &mat_scale(&mat_mul(&f, &self.pot[mu], cap + 1), &int(-1)),
                );
            }
            let mut t = mat_zero();
            for i in 0..BUNDLE {
                for j in 0..BUNDLE {
                    t[i][j] = out[i][j].truncate(cap);
                }
            }
            t
        };
        self.memo.borrow_mut().insert(key, v.clone());
        v
    }

    pub fn value(&self, kind: Kind, d: &[usize], s: &[usize]) -> Val {
        let m = self.field(kind, d, s);
        let mut v = val_zero();
        for i in 0..BUNDLE {
            for j in 0..BUNDLE {
                v[i][j] = m[i][j].at_origin();
            }
        }
        v
    }

    pub fn coeff_value(&self, c: &RPoly) -> Rational {
        c.eval(&[
            self.dim_value.clone(),
            self.param_value.clone(),
            Rational::zero(),
        ])
    }

    /// Value of one term with the free labels bound by `free`.
    pub fn eval_term(&self, t: &Term<RPoly>, free: &HashMap<Label, usize>) -> Val {
        let mut dummies: Vec<Label> = Vec::new();
        for i in t.indices() {
            if !free.contains_key(&i.label) && !dummies.contains(&i.label) {
                dummies.push(i.label);
            }
        }
        let c = self.coeff_value(&t.coeff);
        let mut acc = val_zero();
        let total = DIM.pow(dummies.len() as u32);
        let mut bind = free.clone();
        for code in 0..total {
            let mut r = code;
            for l in &dummies {
                bind.insert(*l, r % DIM);
                r /= DIM;
            }
            let mut prod = {
                let mut id = val_zero();
                for i in 0..BUNDLE {
                    id[i][i] = Rational::one();
                }
                id
            };
            for f in &t.factors {
                let d: Vec<usize> = f.derivs.iter().map(|i| bind[&i.label]).collect();
                let s: Vec<usize> = f.slots.iter().map(|i| bind[&i.label]).collect();
                let v = self.value(f.kind, &d, &s);
                if val_is_zero(&v) {
                    prod = val_zero();
                    break;
                }
                prod = val_mul(&prod, &v);
            }
            val_add_scaled(&mut acc, &prod, &c);
        }
        acc
    }

    pub fn eval(&self, e: &TensorExpr<RPoly>, free: &HashMap<Label, usize>) -> Val {
        let mut acc = val_zero();
        for t in &e.terms {
            let v = self.eval_term(t, free);
            val_add_scaled(&mut acc, &v, &Rational::one());
        }
        acc
    }

    /// Whether `e` vanishes for every binding of the free labels.
    pub fn vanishes(&self, e: &TensorExpr<RPoly>) -> bool {
        let free: Vec<Label> = match e.terms.first() {
            Some(t) => t.free_indices().iter().map(|i| i.label).collect(),
            None => return true,
        };
        (0..DIM.pow(free.len() as u32)).all(|code| {
            let mut r = code;
            let mut bind = HashMap::new();
            for l in &free {
                bind.insert(*l, r % DIM);
                r /= DIM;
            }
            val_is_zero(&self.eval(e, &bind))
        })
    }
}

pub fn random_binding(rng: &mut ChaCha8Rng, labels: &[Label]) -> HashMap<Label, usize> {
    labels.iter().map(|l| (*l, rng.gen_range(0..DIM))).collect()
}
