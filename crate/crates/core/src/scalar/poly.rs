//! Sparse multivariate polynomials over exact rationals.
//!
//! Terms are kept in a `BTreeMap` keyed by exponent vectors under the
//! graded-lexicographic order (total degree first, then lexicographic).
//! No zero coefficient is ever stored, so structural equality of the
//! term maps is polynomial equality.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

pub type Rat = BigRational;

pub fn rat(n: i64, d: i64) -> Rat {
    Rat::new(BigInt::from(n), BigInt::from(d))
}

pub fn rat_int(n: i64) -> Rat {
    Rat::from_integer(BigInt::from(n))
}

/// Exponent vector of one monomial, ordered graded-lexicographically.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Mono(pub Vec<u32>);

impl Mono {
    pub fn total_degree(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn is_constant(&self) -> bool {
        self.0.iter().all(|&e| e == 0)
    }
}

impl Ord for Mono {
    fn cmp(&self, other: &Self) -> Ordering {
        self.total_degree()
            .cmp(&other.total_degree())
            .then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for Mono {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Multivariate polynomial with exact rational coefficients.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Poly {
    pub nvars: usize,
    pub terms: BTreeMap<Mono, Rat>,
}

impl Poly {
    pub fn zero(nvars: usize) -> Self {
        Poly {
            nvars,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(nvars: usize, c: Rat) -> Self {
        let mut p = Poly::zero(nvars);
        if !c.is_zero() {
            p.terms.insert(Mono(vec![0; nvars]), c);
        }
        p
    }

    pub fn one(nvars: usize) -> Self {
        Poly::constant(nvars, Rat::one())
    }

    pub fn var(nvars: usize, idx: usize) -> Self {
        assert!(idx < nvars);
        let mut exps = vec![0; nvars];
        exps[idx] = 1;
        let mut p = Poly::zero(nvars);
        p.terms.insert(Mono(exps), Rat::one());
        p
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_constant(&self) -> bool {
        self.terms.keys().all(|m| m.is_constant())
    }

    pub fn is_one(&self) -> bool {
        self.terms.len() == 1
            && self
                .terms
                .iter()
                .all(|(m, c)| m.is_constant() && c.is_one())
    }

    /// The constant term as a rational, if the polynomial is constant.
    pub fn as_constant(&self) -> Option<Rat> {
        if self.is_zero() {
            return Some(Rat::zero());
        }
        if self.is_constant() {
            return Some(self.terms.values().next().unwrap().clone());
        }
        None
    }

    fn insert_term(&mut self, m: Mono, c: Rat) {
        if c.is_zero() {
            return;
        }
        use std::collections::btree_map::Entry;
        match self.terms.entry(m) {
            Entry::Vacant(v) => {
                v.insert(c);
            }
            Entry::Occupied(mut o) => {
                let sum = o.get() + &c;
                if sum.is_zero() {
                    o.remove();
                } else {
                    *o.get_mut() = sum;
                }
            }
        }
    }

    pub fn add(&self, other: &Poly) -> Poly {
        debug_assert_eq!(self.nvars, other.nvars);
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.insert_term(m.clone(), c.clone());
        }
        out
    }

    pub fn neg(&self) -> Poly {
        let mut out = Poly::zero(self.nvars);
        for (m, c) in &self.terms {
            out.terms.insert(m.clone(), -c.clone());
        }
        out
    }

    pub fn sub(&self, other: &Poly) -> Poly {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        debug_assert_eq!(self.nvars, other.nvars);
        let mut out = Poly::zero(self.nvars);
        for (ma, ca) in &self.terms {
            for (mb, cb) in &other.terms {
                let exps: Vec<u32> = ma.0.iter().zip(&mb.0).map(|(a, b)| a + b).collect();
                out.insert_term(Mono(exps), ca * cb);
            }
        }
        out
    }

    pub fn scale(&self, c: &Rat) -> Poly {
        if c.is_zero() {
            return Poly::zero(self.nvars);
        }
        let mut out = Poly::zero(self.nvars);
        for (m, co) in &self.terms {
            out.terms.insert(m.clone(), co * c);
        }
        out
    }

    pub fn pow(&self, e: u32) -> Poly {
        let mut out = Poly::one(self.nvars);
        for _ in 0..e {
            out = out.mul(self);
        }
        out
    }

    /// Leading term under graded-lex order.
    pub fn leading(&self) -> Option<(&Mono, &Rat)> {
        self.terms.iter().next_back()
    }

    pub fn eval(&self, point: &[Rat]) -> Rat {
        assert_eq!(point.len(), self.nvars);
        let mut acc = Rat::zero();
        for (m, c) in &self.terms {
            let mut t = c.clone();
            for (i, &e) in m.0.iter().enumerate() {
                for _ in 0..e {
                    t *= &point[i];
                }
            }
            acc += t;
        }
        acc
    }

    pub fn derivative(&self, var: usize) -> Poly {
        assert!(var < self.nvars);
        let mut out = Poly::zero(self.nvars);
        for (m, c) in &self.terms {
            let e = m.0[var];
            if e == 0 {
                continue;
            }
            let mut exps = m.0.clone();
            exps[var] = e - 1;
            out.insert_term(Mono(exps), c * rat_int(e as i64));
        }
        out
    }

    /// Substitutes each variable by a polynomial (in a possibly different
    /// variable set). All images must share `nvars_out`.
    pub fn subst_polys(&self, images: &[Poly], nvars_out: usize) -> Poly {
        assert_eq!(images.len(), self.nvars);
        let mut out = Poly::zero(nvars_out);
        for (m, c) in &self.terms {
            let mut t = Poly::constant(nvars_out, c.clone());
            for (i, &e) in m.0.iter().enumerate() {
                if e > 0 {
                    t = t.mul(&images[i].pow(e));
                }
            }
            out = out.add(&t);
        }
        out
    }

    /// Degree in one variable.
    pub fn deg_in(&self, var: usize) -> u32 {
        self.terms.keys().map(|m| m.0[var]).max().unwrap_or(0)
    }

    /// The coefficient of `var^k`, as a polynomial with that variable removed
    /// (exponent set to zero).
    pub fn coeff_of_power(&self, var: usize, k: u32) -> Poly {
        let mut out = Poly::zero(self.nvars);
        for (m, c) in &self.terms {
            if m.0[var] == k {
                let mut exps = m.0.clone();
                exps[var] = 0;
                out.insert_term(Mono(exps), c.clone());
            }
        }
        out
    }

    pub fn mul_var_pow(&self, var: usize, k: u32) -> Poly {
        let mut out = Poly::zero(self.nvars);
        for (m, c) in &self.terms {
            let mut exps = m.0.clone();
            exps[var] += k;
            out.terms.insert(Mono(exps), c.clone());
        }
        out
    }

    /// Exact multivariate division; `None` when the division leaves a remainder.
    pub fn exact_div(&self, divisor: &Poly) -> Option<Poly> {
        assert!(!divisor.is_zero(), "division by zero polynomial");
        let mut rem = self.clone();
        let mut quot = Poly::zero(self.nvars);
        let (dm, dc) = {
            let (m, c) = divisor.leading().unwrap();
            (m.clone(), c.clone())
        };
        while !rem.is_zero() {
            let (rm, rc) = {
                let (m, c) = rem.leading().unwrap();
                (m.clone(), c.clone())
            };
            let mut exps = Vec::with_capacity(self.nvars);
            for (a, b) in rm.0.iter().zip(&dm.0) {
                if a < b {
                    return None;
                }
                exps.push(a - b);
            }
            let qm = Mono(exps);
            let qc = rc / &dc;
            let mut single = Poly::zero(self.nvars);
            single.terms.insert(qm.clone(), qc.clone());
            rem = rem.sub(&single.mul(divisor));
            quot.insert_term(qm, qc);
        }
        Some(quot)
    }

    /// Lowest-index variable that occurs with nonzero exponent.
    fn main_var(&self) -> Option<usize> {
        let mut best: Option<usize> = None;
        for m in self.terms.keys() {
            for (i, &e) in m.0.iter().enumerate() {
                if e > 0 && best.map_or(true, |b| i < b) {
                    best = Some(i);
                }
            }
        }
        best
    }

    /// Content with respect to `var`: the gcd of the `var`-coefficients.
    fn content_in(&self, var: usize) -> Poly {
        let mut g = Poly::zero(self.nvars);
        for k in 0..=self.deg_in(var) {
            let c = self.coeff_of_power(var, k);
            if !c.is_zero() {
                g = poly_gcd(&g, &c);
            }
        }
        g
    }

    /// Normalizes scale: divides by the leading coefficient (monic under grlex).
    pub fn monic(&self) -> Poly {
        match self.leading() {
            None => self.clone(),
            Some((_, lc)) => {
                let inv = Rat::one() / lc.clone();
                self.scale(&inv)
            }
        }
    }
}

/// Pseudo-remainder of `f` by `g` in variable `var`.
fn prem(f: &Poly, g: &Poly, var: usize) -> Poly {
    let dg = g.deg_in(var);
    let lg = g.coeff_of_power(var, dg);
    let mut r = f.clone();
    while !r.is_zero() {
        let dr = r.deg_in(var);
        if dr < dg {
            break;
        }
        let lr = r.coeff_of_power(var, dr);
        // r <- lg*r - lr*x^(dr-dg)*g
        r = lg.mul(&r).sub(&lr.mul_var_pow(var, dr - dg).mul(g));
    }
    r
}

/// Multivariate polynomial gcd over the rationals via a primitive
/// pseudo-remainder sequence. The result is monic under grlex, so
/// `poly_gcd(f, g)` of coprime inputs is the constant 1.
pub fn poly_gcd(f: &Poly, g: &Poly) -> Poly {
    if f.is_zero() {
        return g.monic();
    }
    if g.is_zero() {
        return f.monic();
    }
    let var = match f.main_var().into_iter().chain(g.main_var()).min() {
        None => return Poly::one(f.nvars), // both constants
        Some(v) => v,
    };
    if f.deg_in(var) == 0 || g.deg_in(var) == 0 {
        // One side has no main variable: gcd divides its content.
        let (consts, other) = if f.deg_in(var) == 0 { (f, g) } else { (g, f) };
        let c = other.content_in(var);
        return poly_gcd(consts, &c).monic();
    }
    let cf = f.content_in(var);
    let cg = g.content_in(var);
    let c = poly_gcd(&cf, &cg);
    let mut a = f.exact_div(&cf).expect("content divides");
    let mut b = g.exact_div(&cg).expect("content divides");
    if a.deg_in(var) < b.deg_in(var) {
        std::mem::swap(&mut a, &mut b);
    }
    loop {
        let r = prem(&a, &b, var);
        if r.is_zero() {
            let pb = b.content_in(var);
            let prim = b.exact_div(&pb).expect("content divides");
            return c.mul(&prim).monic();
        }
        if r.deg_in(var) == 0 {
            return c.monic();
        }
        let cr = r.content_in(var);
        a = b;
        b = r.exact_div(&cr).expect("content divides");
    }
}

/// Renders a rational without a trailing `/1`.
pub fn rat_to_string(r: &Rat) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// True when the rational is negative.
pub fn rat_is_negative(r: &Rat) -> bool {
    r.is_negative()
}
