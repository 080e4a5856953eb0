//! The graded-commutative function algebra: weight-truncated,
//! degree-homogeneous series in graded generators with exact
//! rational-function coefficients.
//!
//! A generator signature fixes an ordered list of named generators with
//! integer degrees, split into a "base" class (nonzero degree; the graded
//! coordinates of a chart) and a "fiber" class (any degree, including
//! zero). Degree-zero base coordinates are not generators: they live in
//! the coefficient ring. Monomials are multi-indices over the generators;
//! odd-degree generators square to zero, so their exponents stay <= 1.
//!
//! Series are truncated by weight (total generator exponent). Every
//! operation is exact through the common truncation weight.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use num_traits::Zero;

use crate::error::{CoreError, Result};
use crate::scalar::poly::{rat_int, Rat};
use crate::scalar::{CoeffExpr, SymbolSet};

/// Default truncation weight for series.
pub const DEFAULT_WEIGHT: u32 = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GenClass {
    Base,
    Fiber,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Generator {
    pub name: String,
    pub degree: i64,
    pub class: GenClass,
}

/// Ordered list of generators plus the scalar symbol set for coefficients.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneratorSignature {
    gens: Vec<Generator>,
    coeff_symbols: Arc<SymbolSet>,
}

impl GeneratorSignature {
    pub fn new(gens: Vec<Generator>, coeff_symbols: Arc<SymbolSet>) -> Result<Arc<Self>> {
        let mut seen = BTreeSet::new();
        for g in &gens {
            if !seen.insert(g.name.clone()) {
                return Err(CoreError::invalid(format!(
                    "duplicate generator name `{}`",
                    g.name
                )));
            }
            if g.class == GenClass::Base && g.degree == 0 {
                return Err(CoreError::invalid(format!(
                    "base generator `{}` has degree zero; degree-zero base coordinates are coefficient symbols",
                    g.name
                )));
            }
        }
        for s in coeff_symbols.names() {
            if seen.contains(s) {
                return Err(CoreError::invalid(format!(
                    "name `{s}` used both as generator and coefficient symbol"
                )));
            }
        }
        Ok(Arc::new(GeneratorSignature {
            gens,
            coeff_symbols,
        }))
    }

    pub fn gens(&self) -> &[Generator] {
        &self.gens
    }

    pub fn len(&self) -> usize {
        self.gens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gens.is_empty()
    }

    pub fn coeff_symbols(&self) -> &Arc<SymbolSet> {
        &self.coeff_symbols
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.gens.iter().position(|g| g.name == name)
    }

    pub fn degree_of(&self, idx: usize) -> i64 {
        self.gens[idx].degree
    }

    fn parity(&self, idx: usize) -> u8 {
        (self.gens[idx].degree & 1) as u8
    }

    /// Extends the signature with fiber generators (total-space signature).
    pub fn with_fiber(&self, fiber: &[(String, i64)]) -> Result<Arc<Self>> {
        let mut gens = self.gens.clone();
        for (name, degree) in fiber {
            gens.push(Generator {
                name: name.clone(),
                degree: *degree,
                class: GenClass::Fiber,
            });
        }
        GeneratorSignature::new(gens, self.coeff_symbols.clone())
    }
}

fn same_sig(a: &Arc<GeneratorSignature>, b: &Arc<GeneratorSignature>) -> bool {
    Arc::ptr_eq(a, b) || a == b
}

/// Exponent vector over a signature's generators, ordered by weight and
/// then lexicographically.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MultiIndex(pub Vec<u32>);

impl MultiIndex {
    pub fn empty(n: usize) -> Self {
        MultiIndex(vec![0; n])
    }

    pub fn weight(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn degree(&self, sig: &GeneratorSignature) -> i64 {
        self.0
            .iter()
            .zip(sig.gens())
            .map(|(&e, g)| e as i64 * g.degree)
            .sum()
    }

    pub fn fiber_weight(&self, sig: &GeneratorSignature) -> u32 {
        self.0
            .iter()
            .zip(sig.gens())
            .filter(|(_, g)| g.class == GenClass::Fiber)
            .map(|(&e, _)| e)
            .sum()
    }

    pub fn is_empty_index(&self) -> bool {
        self.0.iter().all(|&e| e == 0)
    }

    /// Componentwise sum; `None` when an odd generator would exceed exponent 1.
    pub fn checked_add(&self, other: &MultiIndex, sig: &GeneratorSignature) -> Option<MultiIndex> {
        let mut out = Vec::with_capacity(self.0.len());
        for i in 0..self.0.len() {
            let e = self.0[i] + other.0[i];
            if sig.parity(i) == 1 && e > 1 {
                return None;
            }
            out.push(e);
        }
        Some(MultiIndex(out))
    }
}

impl Ord for MultiIndex {
    fn cmp(&self, other: &Self) -> Ordering {
        self.weight()
            .cmp(&other.weight())
            .then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for MultiIndex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// All multi-indices of the given degree with weight `<= max_weight`,
/// odd exponents `<= 1`, in weight-then-lexicographic order.
pub fn enumerate_multiindices(
    sig: &GeneratorSignature,
    degree: i64,
    max_weight: u32,
) -> Vec<MultiIndex> {
    let n = sig.len();
    let mut out = BTreeSet::new();
    let mut current = vec![0u32; n];
    fn rec(
        sig: &GeneratorSignature,
        degree: i64,
        budget: u32,
        pos: usize,
        acc_deg: i64,
        current: &mut Vec<u32>,
        out: &mut BTreeSet<MultiIndex>,
    ) {
        if pos == sig.len() {
            if acc_deg == degree {
                out.insert(MultiIndex(current.clone()));
            }
            return;
        }
        let cap = if sig.gens()[pos].degree % 2 != 0 {
            1.min(budget)
        } else {
            budget
        };
        for e in 0..=cap {
            current[pos] = e;
            rec(
                sig,
                degree,
                budget - e,
                pos + 1,
                acc_deg + e as i64 * sig.gens()[pos].degree,
                current,
                out,
            );
        }
        current[pos] = 0;
    }
    rec(sig, degree, max_weight, 0, 0, &mut current, &mut out);
    out.into_iter().collect()
}

/// Koszul sign of rearranging the concatenated monomial `x^r x^s` into
/// `x^(r+s)`: the closed form `prod_{i<j} (-1)^(par_i par_j s_i r_j)`.
pub fn koszul_sign(sig: &GeneratorSignature, r: &MultiIndex, s: &MultiIndex) -> i64 {
    let mut count: u64 = 0;
    for i in 0..sig.len() {
        if sig.parity(i) == 0 || s.0[i] == 0 {
            continue;
        }
        for j in (i + 1)..sig.len() {
            if sig.parity(j) == 1 {
                count += (s.0[i] as u64) * (r.0[j] as u64);
            }
        }
    }
    if count % 2 == 0 {
        1
    } else {
        -1
    }
}

/// Degree-homogeneous weight-truncated series over a generator signature.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GradedFunction {
    sig: Arc<GeneratorSignature>,
    degree: i64,
    max_weight: u32,
    terms: BTreeMap<MultiIndex, CoeffExpr>,
}

impl GradedFunction {
    pub fn zero(sig: Arc<GeneratorSignature>, degree: i64, max_weight: u32) -> Self {
        GradedFunction {
            sig,
            degree,
            max_weight,
            terms: BTreeMap::new(),
        }
    }

    pub fn from_coeff(sig: Arc<GeneratorSignature>, c: CoeffExpr, max_weight: u32) -> Self {
        let mut f = GradedFunction::zero(sig.clone(), 0, max_weight);
        if !c.is_zero() {
            f.terms.insert(MultiIndex::empty(sig.len()), c);
        }
        f
    }

    pub fn one(sig: Arc<GeneratorSignature>, max_weight: u32) -> Self {
        let c = CoeffExpr::one(sig.coeff_symbols().clone());
        GradedFunction::from_coeff(sig, c, max_weight)
    }

    pub fn constant(sig: Arc<GeneratorSignature>, r: Rat, max_weight: u32) -> Self {
        let c = CoeffExpr::constant(sig.coeff_symbols().clone(), r);
        GradedFunction::from_coeff(sig, c, max_weight)
    }

    pub fn generator(sig: Arc<GeneratorSignature>, name: &str, max_weight: u32) -> Result<Self> {
        let idx = sig
            .index_of(name)
            .ok_or_else(|| CoreError::UnknownGenerator {
                name: name.to_string(),
            })?;
        let mut idxv = MultiIndex::empty(sig.len());
        idxv.0[idx] = 1;
        let mut f = GradedFunction::zero(sig.clone(), sig.degree_of(idx), max_weight);
        f.terms.insert(
            idxv,
            CoeffExpr::one(sig.coeff_symbols().clone()),
        );
        Ok(f)
    }

    pub fn monomial(
        sig: Arc<GeneratorSignature>,
        index: MultiIndex,
        coeff: CoeffExpr,
        max_weight: u32,
    ) -> Result<Self> {
        for (i, &e) in index.0.iter().enumerate() {
            if sig.parity(i) == 1 && e > 1 {
                return Err(CoreError::invalid(format!(
                    "odd generator `{}` with exponent {e}",
                    sig.gens()[i].name
                )));
            }
        }
        let degree = index.degree(&sig);
        let mut f = GradedFunction::zero(sig, degree, max_weight);
        if !coeff.is_zero() && index.weight() <= max_weight {
            f.terms.insert(index, coeff);
        }
        Ok(f)
    }

    pub fn sig(&self) -> &Arc<GeneratorSignature> {
        &self.sig
    }

    pub fn degree(&self) -> i64 {
        self.degree
    }

    pub fn max_weight(&self) -> u32 {
        self.max_weight
    }

    pub fn terms(&self) -> &BTreeMap<MultiIndex, CoeffExpr> {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    fn insert_term(&mut self, m: MultiIndex, c: CoeffExpr) {
        if c.is_zero() || m.weight() > self.max_weight {
            return;
        }
        use std::collections::btree_map::Entry;
        match self.terms.entry(m) {
            Entry::Vacant(v) => {
                v.insert(c);
            }
            Entry::Occupied(mut o) => {
                let sum = o.get().add(&c).expect("same symbol set");
                if sum.is_zero() {
                    o.remove();
                } else {
                    *o.get_mut() = sum;
                }
            }
        }
    }

    fn check_sig(&self, other: &Self, context: &str) -> Result<()> {
        if !same_sig(&self.sig, &other.sig) {
            return Err(CoreError::SignatureMismatch {
                context: context.to_string(),
            });
        }
        Ok(())
    }

    /// Termwise sum. The paper's algebra has no inhomogeneous elements, so
    /// differing degrees are an error (zero summands excepted).
    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_sig(other, "add")?;
        if self.degree != other.degree && !self.is_zero() && !other.is_zero() {
            return Err(CoreError::DegreeMismatch {
                expected: self.degree,
                found: other.degree,
                context: "sum of homogeneous functions".into(),
            });
        }
        let degree = if self.is_zero() { other.degree } else { self.degree };
        let mut out = GradedFunction::zero(
            self.sig.clone(),
            degree,
            self.max_weight.min(other.max_weight),
        );
        for (m, c) in &self.terms {
            out.insert_term(m.clone(), c.clone());
        }
        for (m, c) in &other.terms {
            out.insert_term(m.clone(), c.clone());
        }
        Ok(out)
    }

    pub fn neg(&self) -> Self {
        let mut out = GradedFunction::zero(self.sig.clone(), self.degree, self.max_weight);
        for (m, c) in &self.terms {
            out.terms.insert(m.clone(), c.neg());
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.neg())
    }

    /// Scale by a scalar coefficient (degree-zero role).
    pub fn scale(&self, c: &CoeffExpr) -> Result<Self> {
        let mut out = GradedFunction::zero(self.sig.clone(), self.degree, self.max_weight);
        for (m, co) in &self.terms {
            out.insert_term(m.clone(), co.mul(c)?);
        }
        Ok(out)
    }

    pub fn scale_rat(&self, r: &Rat) -> Self {
        let c = CoeffExpr::constant(self.sig.coeff_symbols().clone(), r.clone());
        self.scale(&c).expect("same symbol set")
    }

    /// Graded product: `(f g)_p = sum_{r <= p} eps^{r,p-r} f_r g_{p-r}`.
    /// Monomials that would square an odd generator vanish.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.check_sig(other, "mul")?;
        let mut out = GradedFunction::zero(
            self.sig.clone(),
            self.degree + other.degree,
            self.max_weight.min(other.max_weight),
        );
        for (r, a) in &self.terms {
            for (q, b) in &other.terms {
                if r.weight() + q.weight() > out.max_weight {
                    continue;
                }
                let Some(p) = r.checked_add(q, &self.sig) else {
                    continue;
                };
                let sign = koszul_sign(&self.sig, r, q);
                let mut c = a.mul(b)?;
                if sign < 0 {
                    c = c.neg();
                }
                out.insert_term(p, c);
            }
        }
        Ok(out)
    }

    pub fn pow(&self, e: u32) -> Result<Self> {
        let mut out = GradedFunction::one(self.sig.clone(), self.max_weight);
        for _ in 0..e {
            out = out.mul(self)?;
        }
        Ok(out)
    }

    /// Value of the underlying smooth function at a base point: the empty
    /// multi-index coefficient for degree zero, and zero otherwise.
    pub fn body_value(&self, point: &BTreeMap<String, Rat>) -> Result<Rat> {
        if self.degree != 0 {
            return Ok(Rat::zero());
        }
        match self.terms.get(&MultiIndex::empty(self.sig.len())) {
            None => Ok(Rat::zero()),
            Some(c) => c.evaluate(point),
        }
    }

    /// The empty-index coefficient (the body as an expression).
    pub fn body(&self) -> CoeffExpr {
        if self.degree != 0 {
            return CoeffExpr::zero(self.sig.coeff_symbols().clone());
        }
        self.terms
            .get(&MultiIndex::empty(self.sig.len()))
            .cloned()
            .unwrap_or_else(|| CoeffExpr::zero(self.sig.coeff_symbols().clone()))
    }

    /// Left partial derivative by a generator or a coefficient symbol.
    ///
    /// For a generator `mu`: `d_mu(x^p) = sign(mu,p) p_mu x^(p - e_mu)` with
    /// `sign(mu,p) = prod_{nu < mu} (-1)^(deg_nu deg_mu p_nu)`. For a
    /// degree-zero base symbol the coefficients are differentiated.
    pub fn partial_derivative(&self, name: &str) -> Result<Self> {
        if let Some(gi) = self.sig.index_of(name) {
            let gdeg = self.sig.degree_of(gi);
            let mut out =
                GradedFunction::zero(self.sig.clone(), self.degree - gdeg, self.max_weight);
            for (p, c) in &self.terms {
                let e = p.0[gi];
                if e == 0 {
                    continue;
                }
                let mut count = 0u64;
                for nu in 0..gi {
                    if self.sig.parity(nu) == 1 && self.sig.parity(gi) == 1 {
                        count += p.0[nu] as u64;
                    }
                }
                let mut idx = p.clone();
                idx.0[gi] = e - 1;
                let mut coeff = c.scale(&rat_int(e as i64));
                if count % 2 == 1 {
                    coeff = coeff.neg();
                }
                out.insert_term(idx, coeff);
            }
            Ok(out)
        } else if self.sig.coeff_symbols().index_of(name).is_some() {
            let mut out = GradedFunction::zero(self.sig.clone(), self.degree, self.max_weight);
            for (p, c) in &self.terms {
                out.insert_term(p.clone(), c.differentiate(name)?);
            }
            Ok(out)
        } else {
            Err(CoreError::UnknownGenerator {
                name: name.to_string(),
            })
        }
    }

    /// Multiplicative inverse of a degree-zero function with invertible body,
    /// exact through the truncation weight: `f = c(1+u)` with `w(u) >= 1`,
    /// and `1/f = (1/c) sum_n (-u)^n`.
    pub fn reciprocal(&self, max_weight: u32) -> Result<Self> {
        if self.degree != 0 {
            return Err(CoreError::NonzeroDegree {
                degree: self.degree,
            });
        }
        let c = self.body();
        if c.is_zero() {
            return Err(CoreError::ZeroBody);
        }
        let w = max_weight.min(self.max_weight);
        let cinv = c.inverse()?;
        let scaled = self.scale(&cinv)?; // 1 + u
        let one = GradedFunction::one(self.sig.clone(), w);
        let u = scaled.truncated(w).sub(&one)?;
        // Horner form of sum_{n=0..w} (-u)^n.
        let mut acc = one.clone();
        for _ in 0..w {
            acc = one.sub(&u.mul(&acc)?)?;
        }
        acc.scale(&cinv)
    }

    /// Ring-homomorphic substitution. Generator images must carry the
    /// generator's degree; coefficient symbols map through `coeff_images`
    /// into the target signature's scalar ring.
    pub fn substitute(
        &self,
        gen_images: &BTreeMap<String, GradedFunction>,
        coeff_images: &BTreeMap<String, CoeffExpr>,
        target: &Arc<GeneratorSignature>,
    ) -> Result<Self> {
        let mut w = self.max_weight;
        for img in gen_images.values() {
            w = w.min(img.max_weight);
        }
        // Resolve images in signature order, checking degrees.
        let mut images: Vec<Option<&GradedFunction>> = Vec::with_capacity(self.sig.len());
        for g in self.sig.gens() {
            match gen_images.get(&g.name) {
                None => images.push(None),
                Some(img) => {
                    if !same_sig(&img.sig, target) {
                        return Err(CoreError::SignatureMismatch {
                            context: format!("substitution image for `{}`", g.name),
                        });
                    }
                    if img.degree != g.degree {
                        return Err(CoreError::DegreeMismatch {
                            expected: g.degree,
                            found: img.degree,
                            context: format!("substitution image for `{}`", g.name),
                        });
                    }
                    images.push(Some(img));
                }
            }
        }
        let mut out = GradedFunction::zero(target.clone(), self.degree, w);
        for (p, c) in &self.terms {
            let mapped = c.substitute(coeff_images, target.coeff_symbols())?;
            let mut term = GradedFunction::from_coeff(target.clone(), mapped, w);
            for (i, &e) in p.0.iter().enumerate() {
                if e == 0 {
                    continue;
                }
                let img = images[i].ok_or_else(|| {
                    CoreError::invalid(format!(
                        "substitution does not cover generator `{}`",
                        self.sig.gens()[i].name
                    ))
                })?;
                for _ in 0..e {
                    term = term.mul(img)?;
                    if term.is_zero() {
                        break;
                    }
                }
                if term.is_zero() {
                    break;
                }
            }
            out = out.add_allow_zero(&term)?;
        }
        Ok(out)
    }

    fn add_allow_zero(&self, other: &Self) -> Result<Self> {
        if other.is_zero() {
            let mut out = self.clone();
            out.max_weight = out.max_weight.min(other.max_weight);
            return Ok(out);
        }
        if self.is_zero() {
            let mut out = other.clone();
            out.max_weight = out.max_weight.min(self.max_weight);
            out.degree = if self.terms.is_empty() && !other.terms.is_empty() {
                other.degree
            } else {
                self.degree
            };
            return Ok(out);
        }
        self.add(other)
    }

    /// Splits by fiber weight: part `w` holds exactly the terms whose fiber
    /// multi-index has weight `w`.
    pub fn fiber_weight_parts(&self) -> BTreeMap<u32, GradedFunction> {
        let mut parts: BTreeMap<u32, GradedFunction> = BTreeMap::new();
        for (p, c) in &self.terms {
            let w = p.fiber_weight(&self.sig);
            parts
                .entry(w)
                .or_insert_with(|| {
                    GradedFunction::zero(self.sig.clone(), self.degree, self.max_weight)
                })
                .terms
                .insert(p.clone(), c.clone());
        }
        parts
    }

    /// True exactly when every term is linear in the fiber generators.
    pub fn is_fiber_linear(&self) -> bool {
        self.terms
            .keys()
            .all(|p| p.fiber_weight(&self.sig) == 1)
    }

    /// Applies the formal homothety that scales every fiber generator by a
    /// fresh scalar symbol `lambda`; the result lives in a signature whose
    /// coefficient ring is extended by that symbol.
    pub fn homothety_scaled(&self, lambda: &str) -> Result<Self> {
        let ext = self.extended_symbols(lambda)?;
        let lam = CoeffExpr::symbol(ext.coeff_symbols().clone(), lambda)?;
        let mut gen_images = BTreeMap::new();
        for g in self.sig.gens() {
            let base = GradedFunction::generator(ext.clone(), &g.name, self.max_weight)?;
            let img = match g.class {
                GenClass::Fiber => base.scale(&lam)?,
                GenClass::Base => base,
            };
            gen_images.insert(g.name.clone(), img);
        }
        let mut coeff_images = BTreeMap::new();
        for s in self.sig.coeff_symbols().names() {
            coeff_images.insert(s.clone(), CoeffExpr::symbol(ext.coeff_symbols().clone(), s)?);
        }
        self.substitute(&gen_images, &coeff_images, &ext)
    }

    /// The same signature with the coefficient ring extended by one symbol.
    pub fn extended_symbols(&self, extra: &str) -> Result<Arc<GeneratorSignature>> {
        let mut names = self.sig.coeff_symbols().names().to_vec();
        names.push(extra.to_string());
        GeneratorSignature::new(self.sig.gens().to_vec(), SymbolSet::new(names))
    }

    /// Re-truncates to a lower weight.
    pub fn truncated(&self, max_weight: u32) -> Self {
        let mut out = GradedFunction::zero(self.sig.clone(), self.degree, max_weight);
        for (m, c) in &self.terms {
            if m.weight() <= max_weight {
                out.terms.insert(m.clone(), c.clone());
            }
        }
        out
    }

    /// Weight of a term counting both generator exponents and the vanishing
    /// order of the coefficient at an anchor point; used by the residual
    /// checks. Returns `true` when every contribution of weight `<= cutoff`
    /// vanishes at all anchors.
    pub fn vanishes_through(
        &self,
        cutoff: u32,
        anchors: &[BTreeMap<String, Rat>],
    ) -> Result<bool> {
        if self.is_zero() {
            return Ok(true);
        }
        if anchors.is_empty() {
            return Ok(false);
        }
        for (p, c) in &self.terms {
            let w = p.weight();
            if w > cutoff {
                continue;
            }
            let slack = cutoff - w;
            for anchor in anchors {
                match c.taylor_order_at(anchor, slack)? {
                    Some(_) => return Ok(false),
                    None => {}
                }
            }
        }
        Ok(true)
    }
}

impl fmt::Display for GradedFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (m, c) in &self.terms {
            let mono: Vec<String> = m
                .0
                .iter()
                .enumerate()
                .filter(|(_, &e)| e > 0)
                .map(|(i, &e)| {
                    if e == 1 {
                        self.sig.gens()[i].name.clone()
                    } else {
                        format!("{}^{}", self.sig.gens()[i].name, e)
                    }
                })
                .collect();
            let mono = mono.join("*");
            let s = if mono.is_empty() {
                c.to_string()
            } else if c.is_one() {
                mono
            } else {
                format!("{}*{}", c.to_factor_string(), mono)
            };
            if first {
                write!(f, "{s}")?;
                first = false;
            } else {
                write!(f, " + {s}")?;
            }
        }
        Ok(())
    }
}


#[cfg(test)]
mod tests {
    use super::test_support::*;
    use super::*;
    use crate::scalar::poly::rat;

    fn sig(gens: &[(&str, i64)]) -> Arc<GeneratorSignature> {
        let symbols = SymbolSet::new(vec!["x".to_string()]);
        GeneratorSignature::new(
            gens.iter()
                .map(|(n, d)| Generator {
                    name: n.to_string(),
                    degree: *d,
                    class: GenClass::Base,
                })
                .collect(),
            symbols,
        )
        .unwrap()
    }

    fn coeff(s: &Arc<GeneratorSignature>, text: &str) -> CoeffExpr {
        CoeffExpr::parse(text, s.coeff_symbols()).unwrap()
    }

    fn gen(s: &Arc<GeneratorSignature>, name: &str, w: u32) -> GradedFunction {
        GradedFunction::generator(s.clone(), name, w).unwrap()
    }

    #[test]
    fn enumerate_matches_oracle() {
        // Degrees (1,-1), k=0, W=4 -> [(0,0),(1,1)]
        let s = sig(&[("a", 1), ("b", -1)]);
        let got = enumerate_multiindices(&s, 0, 4);
        assert_eq!(got, vec![MultiIndex(vec![0, 0]), MultiIndex(vec![1, 1])]);
        assert_eq!(got, enumerate_oracle(&s, 0, 4));

        // Degrees (2,-2), k=0, W=4 -> [(0,0),(1,1),(2,2)]
        let s2 = sig(&[("a", 2), ("b", -2)]);
        let got2 = enumerate_multiindices(&s2, 0, 4);
        assert_eq!(
            got2,
            vec![
                MultiIndex(vec![0, 0]),
                MultiIndex(vec![1, 1]),
                MultiIndex(vec![2, 2])
            ]
        );
        assert_eq!(got2, enumerate_oracle(&s2, 0, 4));

        // Parity obstruction: single odd generator of degree 1, k=2 -> []
        let s3 = sig(&[("a", 1)]);
        assert!(enumerate_multiindices(&s3, 2, 6).is_empty());
    }

    #[test]
    fn enumerate_matches_oracle_battery() {
        let sigs = [
            sig(&[("a", 1), ("b", -1), ("c", 2)]),
            sig(&[("a", -3), ("b", 3)]),
            sig(&[("a", 1), ("b", 1), ("c", -2), ("d", 2)]),
        ];
        for s in &sigs {
            for k in -4..=4 {
                assert_eq!(
                    enumerate_multiindices(s, k, 5),
                    enumerate_oracle(s, k, 5),
                    "degree {k}"
                );
            }
        }
    }

    #[test]
    fn koszul_sign_examples() {
        let s = sig(&[("th", -1), ("xi", 1)]);
        // already ordered
        assert_eq!(
            koszul_sign(&s, &MultiIndex(vec![1, 0]), &MultiIndex(vec![0, 1])),
            1
        );
        // one odd-odd transposition
        assert_eq!(
            koszul_sign(&s, &MultiIndex(vec![0, 1]), &MultiIndex(vec![1, 0])),
            -1
        );
        // moving an even generator is free
        let s2 = sig(&[("th", 1), ("e", 2)]);
        assert_eq!(
            koszul_sign(&s2, &MultiIndex(vec![0, 1]), &MultiIndex(vec![1, 0])),
            1
        );
    }

    #[test]
    fn koszul_sign_matches_oracle_exhaustive() {
        // Every multi-index pair of weight <= 5 over signatures of <= 4 gens.
        let sigs = [
            sig(&[("a", 1), ("b", -1)]),
            sig(&[("a", 1), ("b", 1), ("c", -3)]),
            sig(&[("a", -1), ("b", 2), ("c", 1), ("d", -2)]),
        ];
        for s in &sigs {
            let all: Vec<MultiIndex> = (-8..=8)
                .flat_map(|k| enumerate_multiindices(s, k, 5))
                .collect();
            for r in &all {
                for q in &all {
                    assert_eq!(
                        koszul_sign(s, r, q),
                        koszul_sign_oracle(s, r, q),
                        "sig mismatch for r={r:?} s={q:?}"
                    );
                }
            }
        }
    }

    #[test]
    fn add_requires_homogeneity() {
        let s = sig(&[("th", -1), ("xi", 1)]);
        let xi = gen(&s, "xi", 6);
        let sum = xi.add(&xi).unwrap();
        assert_eq!(sum.terms().len(), 1);
        let th = gen(&s, "th", 6);
        assert!(matches!(
            xi.add(&th),
            Err(CoreError::DegreeMismatch { .. })
        ));
        let z = GradedFunction::zero(s.clone(), 1, 6);
        assert_eq!(xi.add(&z).unwrap(), xi);
    }

    #[test]
    fn odd_square_vanishes() {
        let s = sig(&[("xi", 1)]);
        let xi = gen(&s, "xi", 6);
        assert!(xi.mul(&xi).unwrap().is_zero());
    }

    #[test]
    fn unit_product_with_nilpotents() {
        // (1 + th*xi)(1 - th*xi) = 1 with |th| = -1, |xi| = 1
        let s = sig(&[("th", -1), ("xi", 1)]);
        let one = GradedFunction::one(s.clone(), 6);
        let thxi = gen(&s, "th", 6).mul(&gen(&s, "xi", 6)).unwrap();
        let a = one.add(&thxi).unwrap();
        let b = one.sub(&thxi).unwrap();
        assert_eq!(a.mul(&b).unwrap(), one);
    }

    #[test]
    fn graded_commutativity_small() {
        let s = sig(&[("a", 1), ("b", -1), ("c", 1)]);
        let f = gen(&s, "a", 6).mul(&gen(&s, "b", 6)).unwrap(); // degree 0
        let g = gen(&s, "c", 6);
        let fg = f.mul(&g).unwrap();
        let gf = g.mul(&f).unwrap();
        assert_eq!(fg, gf); // |f| even
        let a = gen(&s, "a", 6);
        let c = gen(&s, "c", 6);
        let ac = a.mul(&c).unwrap();
        let ca = c.mul(&a).unwrap();
        assert_eq!(ac, ca.neg()); // both odd
    }

    #[test]
    fn body_values() {
        let s = sig(&[("th", -1), ("xi", 1)]);
        let pt: BTreeMap<String, Rat> =
            [("x".to_string(), rat_int(1))].into_iter().collect();
        // f = 5 + x + th*xi at x=1 -> 6
        let five_x = GradedFunction::from_coeff(s.clone(), coeff(&s, "5 + x"), 6);
        let thxi = gen(&s, "th", 6).mul(&gen(&s, "xi", 6)).unwrap();
        let f = five_x.add(&thxi).unwrap();
        assert_eq!(f.body_value(&pt).unwrap(), rat_int(6));
        // nonzero degree -> 0
        let xi = gen(&s, "xi", 6);
        assert_eq!(xi.body_value(&pt).unwrap(), rat_int(0));
        // zero -> 0
        let z = GradedFunction::zero(s.clone(), 0, 6);
        assert_eq!(z.body_value(&pt).unwrap(), rat_int(0));
    }

    #[test]
    fn partial_derivative_examples() {
        let s = sig(&[("th", -1), ("xi", 1)]);
        let xi = gen(&s, "xi", 6);
        let one = GradedFunction::one(s.clone(), 6);
        assert_eq!(xi.partial_derivative("xi").unwrap(), one);
        // d/dxi (x*xi) = x
        let x_xi = xi.scale(&coeff(&s, "x")).unwrap();
        assert_eq!(
            x_xi.partial_derivative("xi").unwrap(),
            GradedFunction::from_coeff(s.clone(), coeff(&s, "x"), 6)
        );
        // d/dxi (th*xi) = -th   (th before xi, both odd)
        let thxi = gen(&s, "th", 6).mul(&xi).unwrap();
        assert_eq!(
            thxi.partial_derivative("xi").unwrap(),
            gen(&s, "th", 6).neg()
        );
        // coefficient symbol derivative
        let fx = GradedFunction::from_coeff(s.clone(), coeff(&s, "x^3"), 6);
        assert_eq!(
            fx.partial_derivative("x").unwrap(),
            GradedFunction::from_coeff(s.clone(), coeff(&s, "3*x^2"), 6)
        );
        assert!(xi.partial_derivative("nope").is_err());
    }

    #[test]
    fn derivative_graded_leibniz_random() {
        // X(fg) = X(f) g + (-1)^(|X||f|) f X(g) with X = d/dmu.
        // Data of weight <= 3 under a cap of 12, so both routes are exact.
        let s = sig(&[("a", 1), ("b", -1), ("c", 2), ("d", -2)]);
        let funcs = random_functions_capped(&s, 60, 3, 12);
        let names: Vec<String> = s.gens().iter().map(|g| g.name.clone()).collect();
        for (f, g) in funcs.iter().zip(funcs.iter().rev()) {
            let fg = f.mul(g).unwrap();
            for mu in &names {
                let xdeg = -s.degree_of(s.index_of(mu).unwrap());
                let lhs = fg.partial_derivative(mu).unwrap();
                let mut rhs = f
                    .partial_derivative(mu)
                    .unwrap()
                    .mul(g)
                    .unwrap();
                let mut second = f.mul(&g.partial_derivative(mu).unwrap()).unwrap();
                if (xdeg % 2 != 0) && (f.degree() % 2 != 0) {
                    second = second.neg();
                }
                rhs = rhs.add_allow_zero(&second).unwrap();
                let diff = lhs.sub(&rhs);
                match diff {
                    Ok(d) => assert!(d.is_zero(), "Leibniz failed for X=d/d{mu}"),
                    Err(_) => {
                        // both sides zero with mismatching formal degrees
                        assert!(lhs.is_zero() && rhs.is_zero());
                    }
                }
            }
        }
    }

    #[test]
    fn derivatives_graded_commute() {
        // d_mu d_nu = (-1)^(deg_mu deg_nu) d_nu d_mu
        let s = sig(&[("a", 1), ("b", -1), ("c", 2)]);
        let funcs = random_functions(&s, 30, 5);
        for f in &funcs {
            for mu in ["a", "b", "c"] {
                for nu in ["a", "b", "c"] {
                    let lhs = f
                        .partial_derivative(mu)
                        .unwrap()
                        .partial_derivative(nu)
                        .unwrap();
                    let mut rhs = f
                        .partial_derivative(nu)
                        .unwrap()
                        .partial_derivative(mu)
                        .unwrap();
                    let dm = s.degree_of(s.index_of(mu).unwrap());
                    let dn = s.degree_of(s.index_of(nu).unwrap());
                    if dm % 2 != 0 && dn % 2 != 0 {
                        rhs = rhs.neg();
                    }
                    assert_eq!(lhs, rhs);
                }
            }
        }
    }

    #[test]
    fn reciprocal_examples() {
        let s = sig(&[("th", -1), ("xi", 1)]);
        let two = GradedFunction::constant(s.clone(), rat_int(2), 6);
        let half = two.reciprocal(6).unwrap();
        assert_eq!(half, GradedFunction::constant(s.clone(), rat(1, 2), 6));
        // f = 1 + th*xi -> 1 - th*xi
        let one = GradedFunction::one(s.clone(), 6);
        let thxi = gen(&s, "th", 6).mul(&gen(&s, "xi", 6)).unwrap();
        let f = one.add(&thxi).unwrap();
        let inv = f.reciprocal(6).unwrap();
        assert_eq!(inv, one.sub(&thxi).unwrap());
        assert_eq!(f.mul(&inv).unwrap(), one);
        // nonzero degree is never invertible
        let xi = gen(&s, "xi", 6);
        assert!(matches!(
            xi.reciprocal(6),
            Err(CoreError::NonzeroDegree { .. })
        ));
        // zero body
        assert!(matches!(thxi.reciprocal(6), Err(CoreError::ZeroBody)));
    }

    #[test]
    fn reciprocal_is_two_sided_random() {
        let s = sig(&[("a", 1), ("b", -1), ("c", 2), ("d", -2)]);
        let one = GradedFunction::one(s.clone(), 6);
        for f0 in random_functions(&s, 25, 6) {
            if f0.degree() != 0 {
                continue;
            }
            // force an invertible body
            let f = match f0.body().is_zero() {
                true => f0.add(&one).unwrap(),
                false => f0,
            };
            let inv = f.reciprocal(6).unwrap();
            assert_eq!(f.mul(&inv).unwrap(), one);
            assert_eq!(inv.mul(&f).unwrap(), one);
        }
    }

    #[test]
    fn substitution_examples() {
        let s = sig(&[("th", -1), ("xi", 1)]);
        // identity substitution
        let f = gen(&s, "xi", 6)
            .mul(&gen(&s, "th", 6))
            .unwrap()
            .scale(&coeff(&s, "x"))
            .unwrap();
        let mut ids = BTreeMap::new();
        ids.insert("th".to_string(), gen(&s, "th", 6));
        ids.insert("xi".to_string(), gen(&s, "xi", 6));
        let mut cids = BTreeMap::new();
        cids.insert("x".to_string(), coeff(&s, "x"));
        let sub = f.substitute(&ids, &cids, &s).unwrap();
        assert_eq!(sub, f);

        // f = xi*th, xi -> (1+x^2) xi, th -> th gives (1+x^2) xi th
        let xith = gen(&s, "xi", 6).mul(&gen(&s, "th", 6)).unwrap();
        let mut imgs = BTreeMap::new();
        imgs.insert(
            "xi".to_string(),
            gen(&s, "xi", 6).scale(&coeff(&s, "1 + x^2")).unwrap(),
        );
        imgs.insert("th".to_string(), gen(&s, "th", 6));
        let sub2 = xith.substitute(&imgs, &cids, &s).unwrap();
        let expect = xith.scale(&coeff(&s, "1 + x^2")).unwrap();
        assert_eq!(sub2, expect);

        // degree mismatch on an image is an error
        let mut bad = ids.clone();
        bad.insert("xi".to_string(), gen(&s, "th", 6));
        assert!(f.substitute(&bad, &cids, &s).is_err());
    }

    #[test]
    fn substitution_is_ring_homomorphism() {
        let s = sig(&[("a", 1), ("b", -1), ("c", 2)]);
        let mut imgs = BTreeMap::new();
        imgs.insert(
            "a".to_string(),
            gen(&s, "a", 6).scale(&coeff(&s, "1 + x")).unwrap(),
        );
        imgs.insert(
            "b".to_string(),
            gen(&s, "b", 6).scale(&coeff(&s, "x")).unwrap(),
        );
        imgs.insert(
            "c".to_string(),
            gen(&s, "c", 6)
                .scale(&coeff(&s, "2"))
                .unwrap()
                .add(&gen(&s, "a", 6).mul(&gen(&s, "a", 6).scale(&coeff(&s, "x")).unwrap()).unwrap())
                .unwrap(),
        );
        let mut cids = BTreeMap::new();
        cids.insert("x".to_string(), coeff(&s, "x^2"));
        for (f, g) in random_functions(&s, 20, 4)
            .iter()
            .zip(random_functions(&s, 20, 4).iter().rev())
        {
            let lhs = f
                .mul(g)
                .unwrap()
                .substitute(&imgs, &cids, &s)
                .unwrap();
            let rhs = f
                .substitute(&imgs, &cids, &s)
                .unwrap()
                .mul(&g.substitute(&imgs, &cids, &s).unwrap())
                .unwrap();
            assert_eq!(lhs, rhs);
            assert_eq!(lhs.degree(), f.degree() + g.degree());
        }
    }

    #[test]
    fn fiber_parts_and_linearity() {
        let symbols = SymbolSet::new(vec!["x".to_string()]);
        let s = GeneratorSignature::new(
            vec![
                Generator {
                    name: "xi".into(),
                    degree: 1,
                    class: GenClass::Base,
                },
                Generator {
                    name: "k1".into(),
                    degree: 0,
                    class: GenClass::Fiber,
                },
                Generator {
                    name: "k2".into(),
                    degree: 1,
                    class: GenClass::Fiber,
                },
            ],
            symbols,
        )
        .unwrap();
        let k1 = GradedFunction::generator(s.clone(), "k1", 6).unwrap();
        let k2 = GradedFunction::generator(s.clone(), "k2", 6).unwrap();
        let xi = GradedFunction::generator(s.clone(), "xi", 6).unwrap();

        // f = f_a(x) k^a is linear
        let f = k1
            .scale(&CoeffExpr::parse("1 + x", s.coeff_symbols()).unwrap())
            .unwrap();
        assert!(f.is_fiber_linear());

        // k1*k2 has fiber weight 2
        let k1k2 = k1.mul(&k2).unwrap();
        assert!(!k1k2.is_fiber_linear());
        let parts = k1k2.fiber_weight_parts();
        assert_eq!(parts.len(), 1);
        assert_eq!(parts[&2], k1k2);

        // base-only functions have fiber weight 0
        assert!(!xi.is_fiber_linear());
        assert_eq!(xi.fiber_weight_parts()[&0], xi);

        // parts sum to f and have disjoint support (k1 is even of degree 0,
        // so k1^2 is a legal weight-2 part of the same degree as f)
        let mixed = f.add(&k1.mul(&k1).unwrap().scale_rat(&rat_int(3))).unwrap();
        let parts = mixed.fiber_weight_parts();
        let mut sum = GradedFunction::zero(s.clone(), mixed.degree(), mixed.max_weight());
        let mut total_terms = 0;
        for p in parts.values() {
            total_terms += p.terms().len();
            sum = sum.add_allow_zero(p).unwrap();
        }
        assert_eq!(sum, mixed);
        assert_eq!(total_terms, mixed.terms().len());
    }

    #[test]
    fn vanishes_through_jet_order() {
        let s = sig(&[("xi", 1)]);
        let anchor: BTreeMap<String, Rat> =
            [("x".to_string(), rat_int(0))].into_iter().collect();
        // x^7 * xi has weight 1 + order 7 = 8 > 7 but <= 8
        let f = gen(&s, "xi", 8).scale(&coeff(&s, "x^7")).unwrap();
        assert!(f.vanishes_through(7, &[anchor.clone()]).unwrap());
        assert!(!f.vanishes_through(8, &[anchor.clone()]).unwrap());
        // exact zero needs no anchors
        let z = GradedFunction::zero(s.clone(), 0, 8);
        assert!(z.vanishes_through(8, &[]).unwrap());
        // nonzero with no anchors fails
        assert!(!f.vanishes_through(8, &[]).unwrap());
    }

    #[test]
    fn render_roundtrip_shape() {
        let s = sig(&[("th", -1), ("xi", 1)]);
        let f = GradedFunction::one(s.clone(), 6)
            .add(
                &gen(&s, "th", 6)
                    .mul(&gen(&s, "xi", 6))
                    .unwrap()
                    .scale(&coeff(&s, "(1+x)/(1-x)"))
                    .unwrap(),
            )
            .unwrap();
        // canonical form: monic denominator, sign pushed into the numerator
        assert_eq!(f.to_string(), "1 + (-1*x - 1)/(x - 1)*th*xi");
    }

    /// Deterministic pseudo-random homogeneous functions for property tests.
    pub fn random_functions(
        s: &Arc<GeneratorSignature>,
        count: usize,
        max_w: u32,
    ) -> Vec<GradedFunction> {
        random_functions_capped(s, count, max_w, max_w)
    }

    /// Random functions whose terms have weight <= data_w while the series
    /// carries truncation cap_w; headroom keeps derived identities exact.
    pub fn random_functions_capped(
        s: &Arc<GeneratorSignature>,
        count: usize,
        data_w: u32,
        cap_w: u32,
    ) -> Vec<GradedFunction> {
        let mut seed = 0x243f6a8885a308d3u64;
        let mut next = move || {
            seed ^= seed << 13;
            seed ^= seed >> 7;
            seed ^= seed << 17;
            seed
        };
        let mut out = Vec::new();
        while out.len() < count {
            let degree = (next() % 7) as i64 - 3;
            let indices = enumerate_multiindices(s, degree, data_w);
            if indices.is_empty() {
                continue;
            }
            let mut f = GradedFunction::zero(s.clone(), degree, cap_w);
            for idx in &indices {
                match next() % 4 {
                    0 => {}
                    1 => f.insert_term(
                        idx.clone(),
                        CoeffExpr::constant(
                            s.coeff_symbols().clone(),
                            rat_int((next() % 9) as i64 - 4),
                        ),
                    ),
                    2 => {
                        let c = CoeffExpr::parse("x", s.coeff_symbols())
                            .unwrap()
                            .scale(&rat_int((next() % 5) as i64 - 2));
                        f.insert_term(idx.clone(), c);
                    }
                    _ => {
                        let c = CoeffExpr::parse("1 + x^2", s.coeff_symbols()).unwrap();
                        f.insert_term(idx.clone(), c);
                    }
                }
            }
            out.push(f);
        }
        out
    }
}
