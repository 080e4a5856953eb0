//! Exact coefficient ring: rational functions in the degree-zero base
//! coordinates, held in canonical form.
//!
//! Canonical form is a reduced fraction of two multivariate polynomials,
//! denominator monic under the graded-lexicographic order. Equality of
//! canonical forms is structural, and an expression is zero exactly when
//! its numerator is the zero polynomial.

pub mod parse;
pub mod poly;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use num_traits::{One, Signed, Zero};

use crate::error::{CoreError, Result};
use parse::Ast;
use poly::{poly_gcd, rat_to_string, Mono, Poly, Rat};

/// Ordered set of scalar symbol names (the degree-zero base coordinates).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SymbolSet {
    names: Vec<String>,
}

impl SymbolSet {
    pub fn new(names: Vec<String>) -> Arc<Self> {
        Arc::new(SymbolSet { names })
    }

    pub fn empty() -> Arc<Self> {
        Arc::new(SymbolSet { names: Vec::new() })
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }
}

/// Exact rational-function expression over a declared symbol set.
#[derive(Clone, PartialEq, Eq)]
pub struct CoeffExpr {
    symbols: Arc<SymbolSet>,
    num: Poly,
    den: Poly,
}

impl CoeffExpr {
    fn normalized(symbols: Arc<SymbolSet>, num: Poly, den: Poly) -> Result<Self> {
        if den.is_zero() {
            return Err(CoreError::invalid("zero denominator in coefficient"));
        }
        if num.is_zero() {
            return Ok(CoeffExpr {
                symbols: symbols.clone(),
                num: Poly::zero(symbols.len()),
                den: Poly::one(symbols.len()),
            });
        }
        let g = poly_gcd(&num, &den);
        let mut num = num.exact_div(&g).expect("gcd divides numerator");
        let mut den = den.exact_div(&g).expect("gcd divides denominator");
        let lc = den.leading().map(|(_, c)| c.clone()).unwrap();
        if !lc.is_one() {
            let inv = Rat::one() / lc;
            num = num.scale(&inv);
            den = den.scale(&inv);
        }
        Ok(CoeffExpr { symbols, num, den })
    }

    pub fn zero(symbols: Arc<SymbolSet>) -> Self {
        let n = symbols.len();
        CoeffExpr {
            symbols,
            num: Poly::zero(n),
            den: Poly::one(n),
        }
    }

    pub fn one(symbols: Arc<SymbolSet>) -> Self {
        Self::constant(symbols, Rat::one())
    }

    pub fn constant(symbols: Arc<SymbolSet>, c: Rat) -> Self {
        let n = symbols.len();
        CoeffExpr {
            symbols,
            num: Poly::constant(n, c),
            den: Poly::one(n),
        }
    }

    pub fn symbol(symbols: Arc<SymbolSet>, name: &str) -> Result<Self> {
        let idx = symbols
            .index_of(name)
            .ok_or_else(|| CoreError::UndeclaredSymbol {
                name: name.to_string(),
                pos: 0,
            })?;
        let n = symbols.len();
        Ok(CoeffExpr {
            symbols: symbols.clone(),
            num: Poly::var(n, idx),
            den: Poly::one(n),
        })
    }

    pub fn symbols(&self) -> &Arc<SymbolSet> {
        &self.symbols
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub fn is_one(&self) -> bool {
        self.num == self.den
    }

    /// The constant value, if the expression is a constant.
    pub fn as_constant(&self) -> Option<Rat> {
        if self.num.is_constant() && self.den.is_constant() {
            Some(self.num.as_constant()? / self.den.as_constant()?)
        } else {
            None
        }
    }

    fn check_same_symbols(&self, other: &Self, context: &str) -> Result<()> {
        if self.symbols != other.symbols {
            return Err(CoreError::invalid(format!(
                "coefficient symbol sets differ ({context})"
            )));
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same_symbols(other, "add")?;
        let num = self
            .num
            .mul(&other.den)
            .add(&other.num.mul(&self.den));
        let den = self.den.mul(&other.den);
        Self::normalized(self.symbols.clone(), num, den)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Self {
        CoeffExpr {
            symbols: self.symbols.clone(),
            num: self.num.neg(),
            den: self.den.clone(),
        }
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.check_same_symbols(other, "mul")?;
        Self::normalized(
            self.symbols.clone(),
            self.num.mul(&other.num),
            self.den.mul(&other.den),
        )
    }

    pub fn div(&self, other: &Self) -> Result<Self> {
        self.check_same_symbols(other, "div")?;
        if other.is_zero() {
            return Err(CoreError::invalid("division by zero expression"));
        }
        Self::normalized(
            self.symbols.clone(),
            self.num.mul(&other.den),
            self.den.mul(&other.num),
        )
    }

    pub fn inverse(&self) -> Result<Self> {
        if self.is_zero() {
            return Err(CoreError::invalid("inverse of zero expression"));
        }
        Self::normalized(self.symbols.clone(), self.den.clone(), self.num.clone())
    }

    pub fn pow(&self, e: u32) -> Self {
        CoeffExpr {
            symbols: self.symbols.clone(),
            num: self.num.pow(e),
            den: self.den.pow(e),
        }
    }

    pub fn scale(&self, c: &Rat) -> Self {
        CoeffExpr {
            symbols: self.symbols.clone(),
            num: self.num.scale(c),
            den: self.den.clone(),
        }
    }

    /// Exact partial derivative (quotient rule), in canonical form.
    pub fn differentiate(&self, name: &str) -> Result<Self> {
        let idx = self
            .symbols
            .index_of(name)
            .ok_or_else(|| CoreError::UnknownGenerator {
                name: name.to_string(),
            })?;
        let dn = self.num.derivative(idx);
        let dd = self.den.derivative(idx);
        let num = dn.mul(&self.den).sub(&self.num.mul(&dd));
        let den = self.den.mul(&self.den);
        Self::normalized(self.symbols.clone(), num, den)
    }

    /// Exact evaluation at a rational point; a vanishing denominator is a
    /// domain error.
    pub fn evaluate(&self, point: &BTreeMap<String, Rat>) -> Result<Rat> {
        let mut vals = Vec::with_capacity(self.symbols.len());
        for name in self.symbols.names() {
            let v = point.get(name).ok_or_else(|| {
                CoreError::invalid(format!("point does not assign symbol `{name}`"))
            })?;
            vals.push(v.clone());
        }
        let d = self.den.eval(&vals);
        if d.is_zero() {
            return Err(CoreError::DomainError {
                point: format_point(point),
            });
        }
        Ok(self.num.eval(&vals) / d)
    }

    /// Ring-homomorphic substitution of every symbol by an expression over a
    /// common target symbol set.
    pub fn substitute(
        &self,
        images: &BTreeMap<String, CoeffExpr>,
        target: &Arc<SymbolSet>,
    ) -> Result<Self> {
        let mut nums = Vec::with_capacity(self.symbols.len());
        let mut dens = Vec::with_capacity(self.symbols.len());
        for name in self.symbols.names() {
            let img = images.get(name).ok_or_else(|| {
                CoreError::invalid(format!("substitution does not cover symbol `{name}`"))
            })?;
            if &img.symbols != target {
                return Err(CoreError::invalid(format!(
                    "substitution image for `{name}` uses a different symbol set"
                )));
            }
            nums.push(img.num.clone());
            dens.push(img.den.clone());
        }
        let nv = target.len();
        let (pn, pd_pow) = subst_poly(&self.num, &nums, &dens, nv);
        let (qn, qd_pow) = subst_poly(&self.den, &nums, &dens, nv);
        // self = num/den; num -> pn / prod(d_i^pd_pow), den -> qn / prod(d_i^qd_pow)
        let mut final_num = pn;
        let mut final_den = qn;
        for i in 0..nums.len() {
            if qd_pow[i] > pd_pow[i] {
                final_num = final_num.mul(&dens[i].pow(qd_pow[i] - pd_pow[i]));
            } else if pd_pow[i] > qd_pow[i] {
                final_den = final_den.mul(&dens[i].pow(pd_pow[i] - qd_pow[i]));
            }
        }
        Self::normalized(target.clone(), final_num, final_den)
    }

    /// Builds an expression from a parsed syntax tree, resolving every
    /// identifier against the declared symbol set.
    pub fn from_ast(ast: &Ast, symbols: &Arc<SymbolSet>) -> Result<Self> {
        match ast {
            Ast::Rat(r) => Ok(CoeffExpr::constant(symbols.clone(), r.clone())),
            Ast::Ident { name, pos } => {
                if symbols.index_of(name).is_none() {
                    return Err(CoreError::UndeclaredSymbol {
                        name: name.clone(),
                        pos: *pos,
                    });
                }
                CoeffExpr::symbol(symbols.clone(), name)
            }
            Ast::Add(a, b) => Self::from_ast(a, symbols)?.add(&Self::from_ast(b, symbols)?),
            Ast::Sub(a, b) => Self::from_ast(a, symbols)?.sub(&Self::from_ast(b, symbols)?),
            Ast::Mul(a, b) => Self::from_ast(a, symbols)?.mul(&Self::from_ast(b, symbols)?),
            Ast::Div(a, b) => Self::from_ast(a, symbols)?.div(&Self::from_ast(b, symbols)?),
            Ast::Pow(a, e) => Ok(Self::from_ast(a, symbols)?.pow(*e)),
        }
    }

    /// Parses an expression over the given symbols into canonical form.
    pub fn parse(text: &str, symbols: &Arc<SymbolSet>) -> Result<Self> {
        let ast = parse::parse_expr(text)?;
        Self::from_ast(&ast, symbols)
    }

    /// Vanishing order of the Taylor expansion at `point`, searched up to
    /// total order `cap`. Returns `None` when every term of total order
    /// `<= cap` vanishes there.
    ///
    /// Since the denominator does not vanish at the point, the order equals
    /// the valuation of the numerator there: the minimal total degree of
    /// the numerator re-expanded around the point.
    pub fn taylor_order_at(&self, point: &BTreeMap<String, Rat>, cap: u32) -> Result<Option<u32>> {
        if self.is_zero() {
            return Ok(None);
        }
        let mut vals = Vec::with_capacity(self.symbols.len());
        for name in self.symbols.names() {
            let v = point.get(name).ok_or_else(|| {
                CoreError::invalid(format!("point does not assign symbol `{name}`"))
            })?;
            vals.push(v.clone());
        }
        if self.den.eval(&vals).is_zero() {
            return Err(CoreError::DomainError {
                point: format_point(point),
            });
        }
        let n = self.symbols.len();
        let shifts: Vec<Poly> = (0..n)
            .map(|i| Poly::var(n, i).add(&Poly::constant(n, vals[i].clone())))
            .collect();
        let shifted = self.num.subst_polys(&shifts, n);
        let ord = shifted
            .terms
            .keys()
            .map(|m| m.total_degree())
            .min()
            .expect("nonzero numerator");
        Ok(if ord <= cap { Some(ord) } else { None })
    }

    /// Renders the polynomial part for embedding in larger expressions;
    /// parenthesized when it is a sum or a fraction.
    pub fn to_factor_string(&self) -> String {
        let s = self.to_string();
        if self.den.is_one() && self.num.terms.len() <= 1 {
            s
        } else if !self.den.is_one() {
            s // already of the form (num)/(den)
        } else {
            format!("({s})")
        }
    }
}

/// Substitutes rational images into a polynomial: returns `(N, e)` such that
/// the value is `N / prod_i d_i^(e_i)` with `e_i` the degree of the
/// polynomial in variable `i`.
fn subst_poly(p: &Poly, nums: &[Poly], dens: &[Poly], nvars_out: usize) -> (Poly, Vec<u32>) {
    let degs: Vec<u32> = (0..p.nvars).map(|i| p.deg_in(i)).collect();
    let mut out = Poly::zero(nvars_out);
    for (m, c) in &p.terms {
        let mut t = Poly::constant(nvars_out, c.clone());
        for (i, &e) in m.0.iter().enumerate() {
            if e > 0 {
                t = t.mul(&nums[i].pow(e));
            }
            let def = degs[i] - e;
            if def > 0 {
                t = t.mul(&dens[i].pow(def));
            }
        }
        out = out.add(&t);
    }
    (out, degs)
}

pub fn format_point(point: &BTreeMap<String, Rat>) -> String {
    let parts: Vec<String> = point
        .iter()
        .map(|(k, v)| format!("{k}={}", rat_to_string(v)))
        .collect();
    parts.join(",")
}

fn mono_string(m: &Mono, names: &[String]) -> String {
    let mut parts = Vec::new();
    for (i, &e) in m.0.iter().enumerate() {
        if e == 1 {
            parts.push(names[i].clone());
        } else if e > 1 {
            parts.push(format!("{}^{}", names[i], e));
        }
    }
    parts.join("*")
}

fn poly_string(p: &Poly, names: &[String]) -> String {
    if p.is_zero() {
        return "0".to_string();
    }
    let mut out = String::new();
    for (i, (m, c)) in p.terms.iter().rev().enumerate() {
        let mono = mono_string(m, names);
        let (neg, abs) = if c.is_negative() {
            (true, -c.clone())
        } else {
            (false, c.clone())
        };
        if i == 0 {
            // A leading negative coefficient is printed as a signed rational
            // literal so the result stays inside the grammar.
            if mono.is_empty() {
                out.push_str(&rat_to_string(c));
            } else if neg {
                out.push_str(&format!("{}*{}", rat_to_string(c), mono));
            } else if abs.is_one() {
                out.push_str(&mono);
            } else {
                out.push_str(&format!("{}*{}", rat_to_string(&abs), mono));
            }
        } else {
            out.push_str(if neg { " - " } else { " + " });
            if mono.is_empty() {
                out.push_str(&rat_to_string(&abs));
            } else if abs.is_one() {
                out.push_str(&mono);
            } else {
                out.push_str(&format!("{}*{}", rat_to_string(&abs), mono));
            }
        }
    }
    out
}

impl fmt::Display for CoeffExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names = self.symbols.names();
        if self.den.is_one() {
            write!(f, "{}", poly_string(&self.num, names))
        } else {
            write!(
                f,
                "({})/({})",
                poly_string(&self.num, names),
                poly_string(&self.den, names)
            )
        }
    }
}

impl fmt::Debug for CoeffExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CoeffExpr({self})")
    }
}

#[cfg(test)]
mod tests {
    use super::poly::{rat, rat_int};
    use super::*;

    fn syms(names: &[&str]) -> Arc<SymbolSet> {
        SymbolSet::new(names.iter().map(|s| s.to_string()).collect())
    }

    fn pt(pairs: &[(&str, Rat)]) -> BTreeMap<String, Rat> {
        pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
    }

    #[test]
    fn parse_collects_like_terms() {
        let s = syms(&["x"]);
        let e = CoeffExpr::parse("x + x", &s).unwrap();
        let two_x = CoeffExpr::parse("2*x", &s).unwrap();
        assert_eq!(e, two_x);
        assert_eq!(e.to_string(), "2*x");
    }

    #[test]
    fn parse_expands_products() {
        let s = syms(&["x"]);
        let e = CoeffExpr::parse("(1+x)*(1-x)", &s).unwrap();
        let direct = CoeffExpr::parse("1 - x^2", &s).unwrap();
        assert_eq!(e, direct);
    }

    #[test]
    fn parse_reduces_fractions() {
        let s = syms(&["x"]);
        let e = CoeffExpr::parse("x/(x)", &s).unwrap();
        assert!(e.is_one());
        assert_eq!(e.to_string(), "1");
    }

    #[test]
    fn undeclared_symbol_is_named() {
        let s = syms(&["x"]);
        let err = CoeffExpr::parse("x + y", &s).unwrap_err();
        match err {
            CoreError::UndeclaredSymbol { name, .. } => assert_eq!(name, "y"),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn differentiate_power_rule() {
        let s = syms(&["x", "y"]);
        let e = CoeffExpr::parse("x^3", &s).unwrap();
        assert_eq!(e.differentiate("x").unwrap().to_string(), "3*x^2");
        let y = CoeffExpr::parse("y", &s).unwrap();
        assert!(y.differentiate("x").unwrap().is_zero());
    }

    #[test]
    fn differentiate_matches_central_difference() {
        // Symmetric difference quotient oracle at rational points, 1e-9 window.
        let s = syms(&["x"]);
        let e = CoeffExpr::parse("x + x^3", &s).unwrap();
        let d = e.differentiate("x").unwrap();
        let h = rat(1, 1 << 20);
        let tol = rat(1, 1_000_000_000);
        for xv in [rat_int(0), rat_int(1), rat(3, 7), rat_int(-2)] {
            let plus = e.evaluate(&pt(&[("x", xv.clone() + h.clone())])).unwrap();
            let minus = e.evaluate(&pt(&[("x", xv.clone() - h.clone())])).unwrap();
            let fd = (plus - minus) / (rat_int(2) * h.clone());
            let exact = d.evaluate(&pt(&[("x", xv)])).unwrap();
            let diff = if fd > exact {
                fd - exact.clone()
            } else {
                exact.clone() - fd
            };
            assert!(diff < tol, "difference quotient too far from derivative");
        }
    }

    #[test]
    fn quotient_rule() {
        let s = syms(&["x"]);
        let e = CoeffExpr::parse("1/(1-x)", &s).unwrap();
        let d = e.differentiate("x").unwrap();
        let expect = CoeffExpr::parse("1/(1-x)^2", &s).unwrap();
        assert_eq!(d, expect);
    }

    #[test]
    fn evaluate_and_domain_error() {
        let s = syms(&["x"]);
        let e = CoeffExpr::parse("1/(1-x)", &s).unwrap();
        assert_eq!(e.evaluate(&pt(&[("x", rat_int(2))])).unwrap(), rat_int(-1));
        assert!(matches!(
            e.evaluate(&pt(&[("x", rat_int(1))])),
            Err(CoreError::DomainError { .. })
        ));
        let q = CoeffExpr::parse("1 + x^2", &s).unwrap();
        assert_eq!(q.evaluate(&pt(&[("x", rat_int(3))])).unwrap(), rat_int(10));
    }

    #[test]
    fn substitution_composes() {
        let sy = syms(&["y"]);
        let sx = syms(&["x"]);
        // y -> x/(1+x) substituted into 1/(1-y) gives (1+x)/1 ... compute both ways
        let f = CoeffExpr::parse("1/(1-y)", &sy).unwrap();
        let img = CoeffExpr::parse("x/(1+x)", &sx).unwrap();
        let mut m = BTreeMap::new();
        m.insert("y".to_string(), img);
        let sub = f.substitute(&m, &sx).unwrap();
        let expect = CoeffExpr::parse("1 + x", &sx).unwrap();
        assert_eq!(sub, expect);
    }

    #[test]
    fn print_parse_roundtrip_idempotent() {
        let s = syms(&["x", "y"]);
        for text in [
            "(x + y)^3/(x - y)",
            "-2/3*x + 1",
            "x^2*y - y^2*x + 1/2",
            "1/(1 + x^2)",
        ] {
            let e = CoeffExpr::parse(text, &s).unwrap();
            let printed = e.to_string();
            let reparsed = CoeffExpr::parse(&printed, &s).unwrap();
            assert_eq!(e, reparsed, "roundtrip failed for `{text}` -> `{printed}`");
            assert_eq!(printed, reparsed.to_string());
        }
    }

    #[test]
    fn taylor_order() {
        let s = syms(&["x"]);
        let e = CoeffExpr::parse("x^3/(1+x)", &s).unwrap();
        let p = pt(&[("x", rat_int(0))]);
        assert_eq!(e.taylor_order_at(&p, 8).unwrap(), Some(3));
        let z = CoeffExpr::zero(s.clone());
        assert_eq!(z.taylor_order_at(&p, 8).unwrap(), None);
        // Nonzero at the point: order 0.
        let c = CoeffExpr::parse("1 + x", &s).unwrap();
        assert_eq!(c.taylor_order_at(&p, 8).unwrap(), Some(0));
    }

    #[test]
    fn ring_laws_random() {
        // Distributivity and associativity on a deterministic sample grid.
        let s = syms(&["x", "y"]);
        let exprs: Vec<CoeffExpr> = [
            "x + 1",
            "y^2 - x",
            "x*y/(1+x^2)",
            "-3*x + y",
            "2/(x - y + 5)",
        ]
        .iter()
        .map(|t| CoeffExpr::parse(t, &s).unwrap())
        .collect();
        for a in &exprs {
            for b in &exprs {
                for c in &exprs {
                    let ab_c = a.mul(b).unwrap().mul(c).unwrap();
                    let a_bc = a.mul(&b.mul(c).unwrap()).unwrap();
                    assert_eq!(ab_c, a_bc);
                    let dist = a.mul(&b.add(c).unwrap()).unwrap();
                    let expand = a.mul(b).unwrap().add(&a.mul(c).unwrap()).unwrap();
                    assert_eq!(dist, expand);
                }
            }
        }
    }

    #[test]
    fn leibniz_exact() {
        let s = syms(&["x", "y"]);
        let pairs = [
            ("x^2*y", "1/(1+x)"),
            ("x - y^3", "x*y"),
            ("(x+y)/(1+y^2)", "x^4"),
        ];
        for (ta, tb) in pairs {
            let a = CoeffExpr::parse(ta, &s).unwrap();
            let b = CoeffExpr::parse(tb, &s).unwrap();
            let lhs = a.mul(&b).unwrap().differentiate("x").unwrap();
            let rhs = a
                .differentiate("x")
                .unwrap()
                .mul(&b)
                .unwrap()
                .add(&a.mul(&b.differentiate("x").unwrap()).unwrap())
                .unwrap();
            assert_eq!(lhs, rhs);
        }
    }
}
