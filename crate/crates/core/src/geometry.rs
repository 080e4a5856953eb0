//! Symbolic atlases and geometric graded vector bundles presented by
//! transition cocycles, together with the standard constructions: tangent,
//! dual, tensor, direct sum, degree shift, and pullback.
//!
//! Charts are generator signatures (degree-zero coordinates as scalar
//! symbols, nonzero-degree coordinates as base generators). An overlap of
//! an ordered chart pair `(A, B)` stores the image of every B-coordinate
//! expressed in A-variables; both directions are stored and checked to
//! compose to the identity. There is no point-set topology: domain
//! validity is certified at declared rational anchor points, and residual
//! checks compare jets there through the truncation weight.

use std::collections::BTreeMap;
use std::sync::Arc;


use crate::error::{CoreError, Result};
use crate::grading::{dual_entry_sign, parity, GradedDimension};
use crate::matrix::{GradedMatrix, NumericBlockMatrix};
use crate::report::Report;
use crate::scalar::poly::Rat;
use crate::scalar::{CoeffExpr, SymbolSet};
use crate::series::{GenClass, Generator, GeneratorSignature, GradedFunction};

pub type Point = BTreeMap<String, Rat>;

/// One chart: named, with degree-zero coordinates as scalar symbols and
/// nonzero-degree coordinates as base generators.
#[derive(Debug, Clone, PartialEq)]
pub struct Chart {
    pub name: String,
    pub sig: Arc<GeneratorSignature>,
}

impl Chart {
    pub fn new(name: &str, zero_coords: &[&str], graded_coords: &[(&str, i64)]) -> Result<Self> {
        let symbols = SymbolSet::new(zero_coords.iter().map(|s| s.to_string()).collect());
        let gens = graded_coords
            .iter()
            .map(|(n, d)| Generator {
                name: n.to_string(),
                degree: *d,
                class: GenClass::Base,
            })
            .collect();
        Ok(Chart {
            name: name.to_string(),
            sig: GeneratorSignature::new(gens, symbols)?,
        })
    }

    /// Coordinate names in canonical order: degree-zero first, then graded.
    pub fn coordinate_names(&self) -> Vec<String> {
        let mut names: Vec<String> = self.sig.coeff_symbols().names().to_vec();
        names.extend(self.sig.gens().iter().map(|g| g.name.clone()));
        names
    }

    /// Degrees aligned with `coordinate_names`.
    pub fn coordinate_degrees(&self) -> Vec<i64> {
        let mut degs = vec![0i64; self.sig.coeff_symbols().len()];
        degs.extend(self.sig.gens().iter().map(|g| g.degree));
        degs
    }
}

/// Transition data for an ordered chart pair `(A, B)`: the image of every
/// B-coordinate in A-variables.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub scalar_images: BTreeMap<String, CoeffExpr>,
    pub graded_images: BTreeMap<String, GradedFunction>,
}

impl Transition {
    pub fn identity(chart: &Chart, max_weight: u32) -> Result<Self> {
        let mut scalar_images = BTreeMap::new();
        for s in chart.sig.coeff_symbols().names() {
            scalar_images.insert(s.clone(), CoeffExpr::symbol(chart.sig.coeff_symbols().clone(), s)?);
        }
        let mut graded_images = BTreeMap::new();
        for g in chart.sig.gens() {
            graded_images.insert(
                g.name.clone(),
                GradedFunction::generator(chart.sig.clone(), &g.name, max_weight)?,
            );
        }
        Ok(Transition {
            scalar_images,
            graded_images,
        })
    }
}

/// Symbolic atlas: charts of one graded dimension plus two-way overlap
/// transitions and named rational anchor points.
#[derive(Debug, Clone)]
pub struct Atlas {
    pub name: String,
    charts: Vec<Chart>,
    transitions: BTreeMap<(String, String), Transition>,
    /// Named anchor points: name -> (chart, assignment of its zero coords).
    points: BTreeMap<String, (String, Point)>,
}

impl Atlas {
    pub fn new(name: &str, charts: Vec<Chart>) -> Result<Self> {
        if charts.is_empty() {
            return Err(CoreError::invalid("atlas needs at least one chart"));
        }
        let degs = charts[0].coordinate_degrees();
        for c in &charts[1..] {
            if c.coordinate_degrees() != degs {
                return Err(CoreError::invalid(format!(
                    "chart `{}` has a different graded dimension",
                    c.name
                )));
            }
        }
        let mut names = std::collections::BTreeSet::new();
        for c in &charts {
            if !names.insert(c.name.clone()) {
                return Err(CoreError::invalid(format!("duplicate chart `{}`", c.name)));
            }
        }
        Ok(Atlas {
            name: name.to_string(),
            charts,
            transitions: BTreeMap::new(),
            points: BTreeMap::new(),
        })
    }

    pub fn charts(&self) -> &[Chart] {
        &self.charts
    }

    pub fn chart(&self, name: &str) -> Result<&Chart> {
        self.charts
            .iter()
            .find(|c| c.name == name)
            .ok_or_else(|| CoreError::UnknownChart {
                name: name.to_string(),
            })
    }

    /// Graded dimension: coordinate counts by degree (including zero).
    pub fn dimension(&self) -> GradedDimension {
        GradedDimension::from_degrees(&self.charts[0].coordinate_degrees())
    }

    /// Declares the transition for the ordered pair `(a, b)`: images of all
    /// b-coordinates in a-variables. Both directions must be declared for
    /// an overlap to be usable.
    pub fn add_transition(&mut self, a: &str, b: &str, t: Transition) -> Result<()> {
        let chart_a = self.chart(a)?.clone();
        let chart_b = self.chart(b)?;
        for s in chart_b.sig.coeff_symbols().names() {
            let img = t.scalar_images.get(s).ok_or_else(|| {
                CoreError::invalid(format!("transition ({a},{b}) misses coordinate `{s}`"))
            })?;
            if img.symbols() != chart_a.sig.coeff_symbols() {
                return Err(CoreError::invalid(format!(
                    "image of `{s}` in ({a},{b}) is not over chart `{a}` symbols"
                )));
            }
        }
        for g in chart_b.sig.gens() {
            let img = t.graded_images.get(&g.name).ok_or_else(|| {
                CoreError::invalid(format!(
                    "transition ({a},{b}) misses coordinate `{}`",
                    g.name
                ))
            })?;
            if !img.is_zero() && img.degree() != g.degree {
                return Err(CoreError::DegreeMismatch {
                    expected: g.degree,
                    found: img.degree(),
                    context: format!("image of `{}` in ({a},{b})", g.name),
                });
            }
        }
        self.transitions.insert((a.to_string(), b.to_string()), t);
        Ok(())
    }

    pub fn add_point(&mut self, name: &str, chart: &str, point: Point) -> Result<()> {
        let c = self.chart(chart)?;
        for s in c.sig.coeff_symbols().names() {
            if !point.contains_key(s) {
                return Err(CoreError::invalid(format!(
                    "point `{name}` does not assign coordinate `{s}`"
                )));
            }
        }
        self.points
            .insert(name.to_string(), (chart.to_string(), point));
        Ok(())
    }

    pub fn points(&self) -> &BTreeMap<String, (String, Point)> {
        &self.points
    }

    /// Anchor points declared in a chart.
    pub fn anchors_in(&self, chart: &str) -> Vec<Point> {
        self.points
            .values()
            .filter(|(c, _)| c == chart)
            .map(|(_, p)| p.clone())
            .collect()
    }

    pub fn transition(&self, a: &str, b: &str) -> Result<&Transition> {
        self.transitions
            .get(&(a.to_string(), b.to_string()))
            .ok_or_else(|| CoreError::MissingOverlap {
                a: a.to_string(),
                b: b.to_string(),
            })
    }

    pub fn overlaps(&self) -> impl Iterator<Item = (&String, &String)> {
        self.transitions.keys().map(|(a, b)| (a, b))
    }

    /// Re-expresses a function written in chart `from` into chart `to`
    /// variables using the `(to, from)` transition.
    pub fn reexpress(
        &self,
        f: &GradedFunction,
        from: &str,
        to: &str,
    ) -> Result<GradedFunction> {
        let t = self.transition(to, from)?;
        let target = self.chart(to)?.sig.clone();
        f.substitute(&t.graded_images, &t.scalar_images, &target)
    }

    pub fn reexpress_matrix(
        &self,
        m: &GradedMatrix,
        from: &str,
        to: &str,
    ) -> Result<GradedMatrix> {
        let t = self.transition(to, from)?;
        let target = self.chart(to)?.sig.clone();
        m.substitute(&t.graded_images, &t.scalar_images, &target)
    }

    pub fn reexpress_scalar(&self, c: &CoeffExpr, from: &str, to: &str) -> Result<CoeffExpr> {
        let t = self.transition(to, from)?;
        let target = self.chart(to)?.sig.coeff_symbols().clone();
        c.substitute(&t.scalar_images, &target)
    }

    /// Verifies that both directions of every overlap compose to the
    /// identity on all coordinates through the weight cutoff, and that
    /// image degrees match. Violations are report entries with residuals.
    pub fn atlas_check(&self, max_weight: u32) -> Result<Report> {
        let mut report = Report::new();
        for ((a, b), t) in &self.transitions {
            if self.transitions.get(&(b.clone(), a.clone())).is_none() {
                report.fail(
                    format!("overlap({a},{b}): inverse direction declared"),
                    format!("missing transition ({b},{a})"),
                );
                continue;
            }
            let chart_b = self.chart(b)?;
            let anchors = self.anchors_in(b);
            // Compose (a,b) images through (b,a) images: the result must be
            // the identity on chart-b coordinates.
            for s in chart_b.sig.coeff_symbols().names() {
                let img = &t.scalar_images[s];
                let back = self.reexpress_scalar(img, a, b)?;
                let coord = CoeffExpr::symbol(chart_b.sig.coeff_symbols().clone(), s)?;
                let resid = back.sub(&coord)?;
                let lifted = GradedFunction::from_coeff(chart_b.sig.clone(), resid, max_weight);
                let ok = lifted.vanishes_through(max_weight, &anchors)?;
                report.record(
                    format!("overlap({a},{b}): {s} composes to identity"),
                    ok,
                    if ok { None } else { Some(lifted.to_string()) },
                );
            }
            for g in chart_b.sig.gens() {
                let img = &t.graded_images[&g.name];
                let back = self.reexpress(img, a, b)?;
                let coord =
                    GradedFunction::generator(chart_b.sig.clone(), &g.name, max_weight)?;
                let resid = back.sub(&coord)?;
                let ok = resid.vanishes_through(max_weight, &anchors)?;
                report.record(
                    format!("overlap({a},{b}): {} composes to identity", g.name),
                    ok,
                    if ok { None } else { Some(resid.to_string()) },
                );
            }
        }
        Ok(report)
    }
}

/// Geometric graded vector bundle: an atlas, fiber coordinates with
/// degrees, and one transition matrix per ordered overlap, stored in the
/// source-chart variables of the pair.
#[derive(Debug, Clone)]
pub struct Bundle {
    pub name: String,
    pub atlas: Arc<Atlas>,
    /// Fiber coordinate names with degrees `|k^a|`.
    pub fiber: Vec<(String, i64)>,
    /// `(A, B) -> T`, the transition matrix in chart-A variables.
    pub transitions: BTreeMap<(String, String), GradedMatrix>,
}

impl Bundle {
    pub fn new(
        name: &str,
        atlas: Arc<Atlas>,
        fiber: Vec<(String, i64)>,
        transitions: BTreeMap<(String, String), GradedMatrix>,
    ) -> Result<Self> {
        let degs: Vec<i64> = fiber.iter().map(|(_, d)| *d).collect();
        for ((a, b), m) in &transitions {
            atlas.transition(a, b)?;
            if m.row_degrees != degs || m.col_degrees != degs {
                return Err(CoreError::ShapeMismatch {
                    context: format!(
                        "transition ({a},{b}) degrees do not match the fiber coordinates"
                    ),
                });
            }
        }
        Ok(Bundle {
            name: name.to_string(),
            atlas,
            fiber,
            transitions,
        })
    }

    /// Trivial bundle: identity transitions on every declared overlap.
    pub fn trivial(
        name: &str,
        atlas: Arc<Atlas>,
        fiber: Vec<(String, i64)>,
        max_weight: u32,
    ) -> Result<Self> {
        let degs: Vec<i64> = fiber.iter().map(|(_, d)| *d).collect();
        let mut transitions = BTreeMap::new();
        for (a, b) in atlas.overlaps() {
            let sig = atlas.chart(a)?.sig.clone();
            transitions.insert(
                (a.clone(), b.clone()),
                GradedMatrix::identity(sig, degs.clone(), max_weight),
            );
        }
        Bundle::new(name, atlas.clone(), fiber, transitions)
    }

    pub fn fiber_degrees(&self) -> Vec<i64> {
        self.fiber.iter().map(|(_, d)| *d).collect()
    }

    /// Graded rank: frame elements have degree `-|k^a|`.
    pub fn rank(&self) -> GradedDimension {
        let degs: Vec<i64> = self.fiber.iter().map(|(_, d)| -d).collect();
        GradedDimension::from_degrees(&degs)
    }

    /// Total-space signature over a chart: base coordinates plus the fiber
    /// generators.
    pub fn total_sig(&self, chart: &str) -> Result<Arc<GeneratorSignature>> {
        self.atlas.chart(chart)?.sig.with_fiber(&self.fiber)
    }

    pub fn transition(&self, a: &str, b: &str) -> Result<&GradedMatrix> {
        self.transitions
            .get(&(a.to_string(), b.to_string()))
            .ok_or_else(|| CoreError::MissingOverlap {
                a: a.to_string(),
                b: b.to_string(),
            })
    }

    /// Pair conditions `T_ab (T_ba -> a) = 1` for every ordered overlap and
    /// triple conditions `T_ac = (T_bc -> a) T_ab` for the given triples
    /// (all chart triples with pairwise overlaps when `None`).
    pub fn cocycle_check(
        &self,
        max_weight: u32,
        triples: Option<&[(String, String, String)]>,
    ) -> Result<Report> {
        let mut report = Report::new();
        for ((a, b), t_ab) in &self.transitions {
            let Ok(t_ba) = self.transition(b, a) else {
                report.fail(
                    format!("cocycle({a},{b}): reverse transition present"),
                    format!("missing transition ({b},{a})"),
                );
                continue;
            };
            let back = self.atlas.reexpress_matrix(t_ba, b, a)?;
            let prod = t_ab.mul(&back)?;
            let id = GradedMatrix::identity(
                self.atlas.chart(a)?.sig.clone(),
                self.fiber_degrees(),
                prod.max_weight(),
            );
            let resid = prod.sub(&id)?;
            let anchors = self.atlas.anchors_in(a);
            let (ok, why) = matrix_vanishes(&resid, max_weight, &anchors)?;
            report.record(format!("cocycle({a},{b}): pair condition"), ok, why);
        }
        let own: Vec<(String, String, String)>;
        let triples = match triples {
            Some(t) => t,
            None => {
                own = self.derive_triples();
                &own
            }
        };
        for (a, b, c) in triples {
            let t_ac = self.transition(a, c)?;
            let t_ab = self.transition(a, b)?;
            let t_bc = self.transition(b, c)?;
            let lifted = self.atlas.reexpress_matrix(t_bc, b, a)?;
            let rhs = lifted.mul(t_ab)?;
            let resid = t_ac.sub(&rhs)?;
            let anchors = self.atlas.anchors_in(a);
            let (ok, why) = matrix_vanishes(&resid, max_weight, &anchors)?;
            report.record(format!("cocycle({a},{b},{c}): triple condition"), ok, why);
        }
        Ok(report)
    }

    fn derive_triples(&self) -> Vec<(String, String, String)> {
        let mut out = Vec::new();
        let names: Vec<&str> = self.atlas.charts().iter().map(|c| c.name.as_str()).collect();
        for &a in &names {
            for &b in &names {
                for &c in &names {
                    if a == b || b == c || a == c {
                        continue;
                    }
                    let have = |x: &str, y: &str| {
                        self.transitions
                            .contains_key(&(x.to_string(), y.to_string()))
                    };
                    if have(a, c) && have(a, b) && have(b, c) {
                        out.push((a.to_string(), b.to_string(), c.to_string()));
                    }
                }
            }
        }
        out
    }
}

/// Jet-vanishing for every entry of a residual matrix; returns the first
/// offending entry rendered.
pub fn matrix_vanishes(
    m: &GradedMatrix,
    max_weight: u32,
    anchors: &[Point],
) -> Result<(bool, Option<String>)> {
    for i in 0..m.nrows() {
        for k in 0..m.ncols() {
            let e = m.entry(i, k);
            if !e.vanishes_through(max_weight, anchors)? {
                return Ok((false, Some(format!("entry ({i},{k}): {e}"))));
            }
        }
    }
    Ok((true, None))
}

/// Tangent bundle: fiber coordinates named after the base coordinates,
/// transitions built from graded Jacobians with the sign
/// `(-1)^(|x^i|(|x^i| - |x^j|))` on the entry differentiating coordinate
/// `i` by coordinate `j`.
pub fn tangent_bundle(atlas: &Arc<Atlas>, max_weight: u32) -> Result<Bundle> {
    let first = &atlas.charts()[0];
    let coord_names = first.coordinate_names();
    let coord_degs = first.coordinate_degrees();
    let fiber: Vec<(String, i64)> = coord_names
        .iter()
        .zip(&coord_degs)
        .map(|(n, &d)| (format!("d_{n}"), d))
        .collect();
    let mut transitions = BTreeMap::new();
    let pairs: Vec<(String, String)> = atlas
        .overlaps()
        .map(|(a, b)| (a.clone(), b.clone()))
        .collect();
    for (a, b) in pairs {
        let chart_a = atlas.chart(&a)?;
        let chart_b = atlas.chart(&b)?;
        let t = atlas.transition(&a, &b)?;
        let a_names = chart_a.coordinate_names();
        let b_names = chart_b.coordinate_names();
        let n = a_names.len();
        let mut entries = Vec::with_capacity(n);
        for i in 0..n {
            // image of b-coordinate i in a-variables, lifted to a series
            let img = if coord_degs[i] == 0 {
                GradedFunction::from_coeff(
                    chart_a.sig.clone(),
                    t.scalar_images[&b_names[i]].clone(),
                    max_weight,
                )
            } else {
                t.graded_images[&b_names[i]].clone()
            };
            let mut row = Vec::with_capacity(n);
            for j in 0..n {
                let mut d = img.partial_derivative(&a_names[j])?;
                if parity(coord_degs[i]) == 1 && parity(coord_degs[j]) == 0 {
                    d = d.neg();
                }
                row.push(d);
            }
            entries.push(row);
        }
        transitions.insert(
            (a.clone(), b.clone()),
            GradedMatrix::from_entries(coord_degs.clone(), coord_degs.clone(), entries)?,
        );
    }
    Bundle::new(
        &format!("T_{}", atlas.name),
        atlas.clone(),
        fiber,
        transitions,
    )
}

fn dual_fiber_name(name: &str) -> String {
    match name.strip_prefix("du_") {
        Some(rest) => rest.to_string(),
        None => format!("du_{name}"),
    }
}

/// Dual bundle: negated fiber degrees, transitions the sign-twisted
/// transpose of the stored reverse transition (the inverse data).
pub fn dual_bundle(e: &Bundle, max_weight: u32) -> Result<Bundle> {
    let fiber: Vec<(String, i64)> = e
        .fiber
        .iter()
        .map(|(n, d)| (dual_fiber_name(n), -d))
        .collect();
    let degs = e.fiber_degrees();
    let mut transitions = BTreeMap::new();
    for ((a, b), _) in &e.transitions {
        let rev = e.transition(b, a)?;
        let inv_in_a = e.atlas.reexpress_matrix(rev, b, a)?;
        let n = degs.len();
        let sig = e.atlas.chart(a)?.sig.clone();
        let out_degs: Vec<i64> = degs.iter().map(|&d| -d).collect();
        let mut out =
            GradedMatrix::zero(sig, out_degs.clone(), out_degs.clone(), max_weight);
        for i in 0..n {
            for j in 0..n {
                let mut entry = inv_in_a.entry(j, i).clone();
                if dual_entry_sign(degs[i], degs[j]) < 0 {
                    entry = entry.neg();
                }
                out.set_entry(i, j, entry)?;
            }
        }
        transitions.insert((a.clone(), b.clone()), out);
    }
    Bundle::new(
        &format!("dual_{}", e.name),
        e.atlas.clone(),
        fiber,
        transitions,
    )
}

fn check_same_atlas(e: &Bundle, f: &Bundle, context: &str) -> Result<()> {
    if !Arc::ptr_eq(&e.atlas, &f.atlas) && e.atlas.name != f.atlas.name {
        return Err(CoreError::AtlasMismatch {
            context: context.to_string(),
        });
    }
    Ok(())
}

/// Tensor product: fiber coordinates are ordered products `k^a l^B`; the
/// transition of each product coordinate is the expanded product of the
/// factors' transitions, so every Koszul sign is generated by the series
/// product rather than written by hand.
pub fn tensor_bundle(e: &Bundle, f: &Bundle, max_weight: u32) -> Result<Bundle> {
    check_same_atlas(e, f, "tensor product")?;
    // Distinct internal names for the two fiber blocks (self-tensor safe).
    let left: Vec<(String, i64)> = e
        .fiber
        .iter()
        .map(|(n, d)| (format!("l_{n}"), *d))
        .collect();
    let right: Vec<(String, i64)> = f
        .fiber
        .iter()
        .map(|(n, d)| (format!("r_{n}"), *d))
        .collect();
    let mut fiber = Vec::new();
    for (an, ad) in &e.fiber {
        for (bn, bd) in &f.fiber {
            fiber.push((format!("t_{an}_{bn}"), ad + bd));
        }
    }
    let ne = e.fiber.len();
    let nf = f.fiber.len();
    let mut transitions = BTreeMap::new();
    for ((a, b), te) in &e.transitions {
        let tf = f.transition(a, b)?;
        let chart = e.atlas.chart(a)?;
        let mut ext_fiber = left.clone();
        ext_fiber.extend(right.clone());
        let ext = chart.sig.with_fiber(&ext_fiber)?;
        let nbase = chart.sig.len();
        // Pulled-back fiber coordinates as total-space functions.
        let mut pe = Vec::with_capacity(ne);
        for i in 0..ne {
            let mut acc = GradedFunction::zero(ext.clone(), e.fiber[i].1, max_weight);
            for bidx in 0..ne {
                let gen = GradedFunction::generator(ext.clone(), &left[bidx].0, max_weight)?;
                let coeff = lift_to(&te.entry(i, bidx).clone(), &ext)?;
                let term = coeff.mul(&gen)?;
                acc = loose_add(&acc, &term)?;
            }
            pe.push(acc);
        }
        let mut pf = Vec::with_capacity(nf);
        for i in 0..nf {
            let mut acc = GradedFunction::zero(ext.clone(), f.fiber[i].1, max_weight);
            for bidx in 0..nf {
                let gen = GradedFunction::generator(ext.clone(), &right[bidx].0, max_weight)?;
                let coeff = lift_to(&tf.entry(i, bidx).clone(), &ext)?;
                let term = coeff.mul(&gen)?;
                acc = loose_add(&acc, &term)?;
            }
            pf.push(acc);
        }
        let degs: Vec<i64> = fiber.iter().map(|(_, d)| *d).collect();
        let mut out = GradedMatrix::zero(chart.sig.clone(), degs.clone(), degs, max_weight);
        for ia in 0..ne {
            for ib in 0..nf {
                let prod = pe[ia].mul(&pf[ib])?;
                let split = split_fiber(&prod, nbase, &chart.sig)?;
                for ja in 0..ne {
                    for jb in 0..nf {
                        let mut key = vec![0u32; ne + nf];
                        key[ja] = 1;
                        key[ne + jb] += 1;
                        let entry = split
                            .get(&key)
                            .cloned()
                            .unwrap_or_else(|| {
                                GradedFunction::zero(
                                    chart.sig.clone(),
                                    e.fiber[ia].1 + f.fiber[ib].1
                                        - e.fiber[ja].1
                                        - f.fiber[jb].1,
                                    max_weight,
                                )
                            });
                        out.set_entry(ia * nf + ib, ja * nf + jb, entry)?;
                    }
                }
            }
        }
        transitions.insert((a.clone(), b.clone()), out);
    }
    Bundle::new(
        &format!("{}_x_{}", e.name, f.name),
        e.atlas.clone(),
        fiber,
        transitions,
    )
}

/// Direct sum: block-diagonal transitions.
pub fn direct_sum(e: &Bundle, f: &Bundle, max_weight: u32) -> Result<Bundle> {
    check_same_atlas(e, f, "direct sum")?;
    let mut fiber: Vec<(String, i64)> = e
        .fiber
        .iter()
        .map(|(n, d)| (format!("p1_{n}"), *d))
        .collect();
    fiber.extend(f.fiber.iter().map(|(n, d)| (format!("p2_{n}"), *d)));
    let degs: Vec<i64> = fiber.iter().map(|(_, d)| *d).collect();
    let ne = e.fiber.len();
    let mut transitions = BTreeMap::new();
    for ((a, b), te) in &e.transitions {
        let tf = f.transition(a, b)?;
        let sig = e.atlas.chart(a)?.sig.clone();
        let mut out = GradedMatrix::zero(sig, degs.clone(), degs.clone(), max_weight);
        for i in 0..ne {
            for j in 0..ne {
                out.set_entry(i, j, te.entry(i, j).clone())?;
            }
        }
        for i in 0..f.fiber.len() {
            for j in 0..f.fiber.len() {
                out.set_entry(ne + i, ne + j, tf.entry(i, j).clone())?;
            }
        }
        transitions.insert((a.clone(), b.clone()), out);
    }
    Bundle::new(
        &format!("{}_plus_{}", e.name, f.name),
        e.atlas.clone(),
        fiber,
        transitions,
    )
}

/// Degree shift: identical transition matrices, fiber degrees raised by l.
pub fn shift_bundle(e: &Bundle, l: i64) -> Result<Bundle> {
    let fiber: Vec<(String, i64)> = e.fiber.iter().map(|(n, d)| (n.clone(), d + l)).collect();
    let degs: Vec<i64> = fiber.iter().map(|(_, d)| *d).collect();
    let mut transitions = BTreeMap::new();
    for ((a, b), t) in &e.transitions {
        let mut entries = Vec::with_capacity(t.nrows());
        for i in 0..t.nrows() {
            let mut row = Vec::with_capacity(t.ncols());
            for j in 0..t.ncols() {
                row.push(t.entry(i, j).clone());
            }
            entries.push(row);
        }
        transitions.insert(
            (a.clone(), b.clone()),
            GradedMatrix::from_entries(degs.clone(), degs.clone(), entries)?,
        );
    }
    Bundle::new(&format!("{}_shift", e.name), e.atlas.clone(), fiber, transitions)
}

/// Base map between atlases: per source chart, a target chart and the
/// pullbacks of its coordinates in source variables.
#[derive(Debug, Clone)]
pub struct BaseMap {
    pub name: String,
    pub source: Arc<Atlas>,
    pub target: Arc<Atlas>,
    pub assignments: BTreeMap<String, String>,
    pub pullbacks: BTreeMap<String, Transition>,
}

impl BaseMap {
    /// Applies the pullback at a source chart to a function written in the
    /// assigned target chart's variables.
    pub fn pullback(&self, f: &GradedFunction, source_chart: &str) -> Result<GradedFunction> {
        let t = self.pullbacks.get(source_chart).ok_or_else(|| {
            CoreError::ChartAssignmentGap {
                chart: source_chart.to_string(),
            }
        })?;
        let target_sig = self.source.chart(source_chart)?.sig.clone();
        f.substitute(&t.graded_images, &t.scalar_images, &target_sig)
    }

    pub fn pullback_matrix(&self, m: &GradedMatrix, source_chart: &str) -> Result<GradedMatrix> {
        let t = self.pullbacks.get(source_chart).ok_or_else(|| {
            CoreError::ChartAssignmentGap {
                chart: source_chart.to_string(),
            }
        })?;
        let target_sig = self.source.chart(source_chart)?.sig.clone();
        m.substitute(&t.graded_images, &t.scalar_images, &target_sig)
    }

    /// Degree preservation and compatibility with transitions on overlaps:
    /// pulling back and then changing source chart agrees with changing
    /// target chart and then pulling back.
    pub fn check(&self, max_weight: u32) -> Result<Report> {
        let mut report = Report::new();
        for chart in self.source.charts() {
            if !self.assignments.contains_key(&chart.name) {
                report.fail(
                    format!("map covers chart {}", chart.name),
                    "no chart assignment".to_string(),
                );
            }
        }
        let pairs: Vec<(String, String)> = self
            .source
            .overlaps()
            .map(|(a, b)| (a.clone(), b.clone()))
            .collect();
        for (a, b) in pairs {
            let (Some(ta), Some(tb)) = (self.assignments.get(&a), self.assignments.get(&b))
            else {
                continue;
            };
            let anchors = self.source.anchors_in(&a);
            let target_chart = self.target.chart(tb)?;
            for g in target_chart.sig.gens() {
                // route 1: pull back at b, re-express to a
                let img_b = GradedFunction::generator(
                    target_chart.sig.clone(),
                    &g.name,
                    max_weight,
                )?;
                let via_b = self.source.reexpress(&self.pullback(&img_b, &b)?, &b, &a)?;
                // route 2: move to chart ta in the target, pull back at a
                let moved = if ta == tb {
                    img_b
                } else {
                    self.target.reexpress(&img_b, tb, ta)?
                };
                let via_a = self.pullback(&moved, &a)?;
                let resid = via_b.sub(&via_a)?;
                let ok = resid.vanishes_through(max_weight, &anchors)?;
                report.record(
                    format!("map({a}->{ta},{b}->{tb}): {} pullback compatible", g.name),
                    ok,
                    if ok { None } else { Some(resid.to_string()) },
                );
            }
            for s in target_chart.sig.coeff_symbols().names() {
                let img_b = GradedFunction::from_coeff(
                    target_chart.sig.clone(),
                    CoeffExpr::symbol(target_chart.sig.coeff_symbols().clone(), s)?,
                    max_weight,
                );
                let via_b = self.source.reexpress(&self.pullback(&img_b, &b)?, &b, &a)?;
                let moved = if ta == tb {
                    img_b
                } else {
                    self.target.reexpress(&img_b, tb, ta)?
                };
                let via_a = self.pullback(&moved, &a)?;
                let resid = via_b.sub(&via_a)?;
                let ok = resid.vanishes_through(max_weight, &anchors)?;
                report.record(
                    format!("map({a}->{ta},{b}->{tb}): {s} pullback compatible"),
                    ok,
                    if ok { None } else { Some(resid.to_string()) },
                );
            }
        }
        Ok(report)
    }
}

/// Pullback bundle along a base map: same fiber, transitions pulled back
/// through the chart assignments.
pub fn pullback_bundle(e: &Bundle, phi: &BaseMap, max_weight: u32) -> Result<Bundle> {
    if phi.target.name != e.atlas.name {
        return Err(CoreError::AtlasMismatch {
            context: "pullback target atlas".into(),
        });
    }
    let degs = e.fiber_degrees();
    let mut transitions = BTreeMap::new();
    let pairs: Vec<(String, String)> = phi
        .source
        .overlaps()
        .map(|(a, b)| (a.clone(), b.clone()))
        .collect();
    for (a, b) in pairs {
        let ta = phi
            .assignments
            .get(&a)
            .ok_or_else(|| CoreError::ChartAssignmentGap { chart: a.clone() })?;
        let tb = phi
            .assignments
            .get(&b)
            .ok_or_else(|| CoreError::ChartAssignmentGap { chart: b.clone() })?;
        let m = if ta == tb {
            GradedMatrix::identity(
                phi.source.chart(&a)?.sig.clone(),
                degs.clone(),
                max_weight,
            )
        } else {
            let t = e.transition(ta, tb)?;
            phi.pullback_matrix(t, &a)?
        };
        transitions.insert((a.clone(), b.clone()), m);
    }
    Bundle::new(
        &format!("pullback_{}", e.name),
        phi.source.clone(),
        e.fiber.clone(),
        transitions,
    )
}

/// Bundle morphism: per source chart, a matrix with rows indexed by the
/// target bundle's fiber coordinates and columns by the source bundle's.
#[derive(Debug, Clone)]
pub struct Morphism {
    pub name: String,
    /// None means the identity base map (both bundles over one atlas).
    pub base: Option<BaseMap>,
    pub matrices: BTreeMap<String, GradedMatrix>,
}

impl Morphism {
    /// Overlap compatibility: `Phi_a (T^E_ba -> a) = (phi* T^F) Phi_b -> a`
    /// on every ordered source overlap.
    pub fn check(&self, e: &Bundle, f: &Bundle, max_weight: u32) -> Result<Report> {
        let mut report = Report::new();
        let source_atlas = &e.atlas;
        for chart in source_atlas.charts() {
            if !self.matrices.contains_key(&chart.name) {
                report.fail(
                    format!("morphism matrix on chart {}", chart.name),
                    "missing".to_string(),
                );
            }
        }
        let pairs: Vec<(String, String)> = source_atlas
            .overlaps()
            .map(|(a, b)| (a.clone(), b.clone()))
            .collect();
        for (a, b) in pairs {
            let (Some(phi_a), Some(phi_b)) = (self.matrices.get(&a), self.matrices.get(&b))
            else {
                continue;
            };
            let te_ba = e.transition(&b, &a)?;
            let lhs = phi_a.mul(&source_atlas.reexpress_matrix(te_ba, &b, &a)?)?;
            let tf_in_b = match &self.base {
                None => {
                    let tf_ba = f.transition(&b, &a)?;
                    source_atlas.reexpress_matrix(tf_ba, &b, &a)?
                }
                Some(phi) => {
                    let ta = phi.assignments.get(&a).ok_or_else(|| {
                        CoreError::ChartAssignmentGap { chart: a.clone() }
                    })?;
                    let tb = phi.assignments.get(&b).ok_or_else(|| {
                        CoreError::ChartAssignmentGap { chart: b.clone() }
                    })?;
                    let pulled = if ta == tb {
                        GradedMatrix::identity(
                            source_atlas.chart(&b)?.sig.clone(),
                            f.fiber_degrees(),
                            max_weight,
                        )
                    } else {
                        // T^F_{tb,ta} in tb-variables, pulled back at b.
                        phi.pullback_matrix(f.transition(tb, ta)?, &b)?
                    };
                    source_atlas.reexpress_matrix(&pulled, &b, &a)?
                }
            };
            let rhs = tf_in_b.mul(&source_atlas.reexpress_matrix(phi_b, &b, &a)?)?;
            let resid = lhs.sub(&rhs)?;
            let anchors = source_atlas.anchors_in(&a);
            let (ok, why) = matrix_vanishes(&resid, max_weight, &anchors)?;
            report.record(
                format!("morphism({a},{b}): overlap compatibility"),
                ok,
                why,
            );
        }
        Ok(report)
    }

    /// The induced fiber map at a point of a chart: evaluated bodies.
    pub fn fiber_map(&self, chart: &str, point: &Point) -> Result<NumericBlockMatrix> {
        let m = self
            .matrices
            .get(chart)
            .ok_or_else(|| CoreError::UnknownChart {
                name: chart.to_string(),
            })?;
        m.evaluate_at(point)
    }

    /// Injectivity/surjectivity/isomorphy of the fiber map at one point,
    /// per degree block. When the fiber map is an isomorphism, the chart
    /// matrix is certified invertible at the point.
    pub fn classify_at(
        &self,
        chart: &str,
        point: &Point,
        max_weight: u32,
    ) -> Result<Classification> {
        let m = self
            .matrices
            .get(chart)
            .ok_or_else(|| CoreError::UnknownChart {
                name: chart.to_string(),
            })?;
        let fm = m.evaluate_at(point)?;
        let injective = fm.is_injective();
        let surjective = fm.is_surjective();
        let iso = injective && surjective;
        if iso {
            m.invert(max_weight, std::slice::from_ref(point))?;
        }
        Ok(Classification {
            blocks: fm.block_info(),
            rank: fm.graded_rank(),
            injective,
            surjective,
            iso,
        })
    }

    /// Classification over several sample points with the regressions the
    /// fiber criteria call out: non-constant rank, and a nonzero morphism
    /// whose fiber maps all vanish (its image cannot be a subbundle).
    pub fn classify(
        &self,
        chart: &str,
        points: &[Point],
        max_weight: u32,
    ) -> Result<(Vec<Classification>, Vec<String>)> {
        let mut out = Vec::new();
        for p in points {
            out.push(self.classify_at(chart, p, max_weight)?);
        }
        let mut warnings = Vec::new();
        if out.len() > 1 {
            let first = &out[0].rank;
            if out.iter().any(|c| &c.rank != first) {
                warnings.push("non-constant graded rank across sample points".to_string());
            }
        }
        let symbolically_zero = self
            .matrices
            .get(chart)
            .map(|m| m.is_zero())
            .unwrap_or(true);
        if !symbolically_zero
            && !out.is_empty()
            && out.iter().all(|c| c.rank.total() == 0)
        {
            warnings.push(
                "image is not a subbundle: nonzero morphism with vanishing fiber maps"
                    .to_string(),
            );
        }
        Ok((out, warnings))
    }
}

#[derive(Debug, Clone)]
pub struct Classification {
    /// degree -> (rank, block rows, block cols)
    pub blocks: BTreeMap<i64, (usize, usize, usize)>,
    pub rank: GradedDimension,
    pub injective: bool,
    pub surjective: bool,
    pub iso: bool,
}

fn lift_to(
    f: &GradedFunction,
    target: &Arc<GeneratorSignature>,
) -> Result<GradedFunction> {
    // Embeds a function over the chart signature into the total-space
    // signature (same leading generators, extra fiber generators unused).
    let mut gen_images = BTreeMap::new();
    for g in f.sig().gens() {
        gen_images.insert(
            g.name.clone(),
            GradedFunction::generator(target.clone(), &g.name, f.max_weight())?,
        );
    }
    let mut coeff_images = BTreeMap::new();
    for s in f.sig().coeff_symbols().names() {
        coeff_images.insert(
            s.clone(),
            CoeffExpr::symbol(target.coeff_symbols().clone(), s)?,
        );
    }
    f.substitute(&gen_images, &coeff_images, target)
}

fn loose_add(a: &GradedFunction, b: &GradedFunction) -> Result<GradedFunction> {
    if a.is_zero() {
        return Ok(b.clone());
    }
    if b.is_zero() {
        return Ok(a.clone());
    }
    a.add(b)
}

/// Splits a total-space function by its fiber exponent vector; values are
/// functions over the chart signature. The fiber generators sit at the end
/// of the signature, so no reordering sign arises.
fn split_fiber(
    f: &GradedFunction,
    nbase: usize,
    base_sig: &Arc<GeneratorSignature>,
) -> Result<BTreeMap<Vec<u32>, GradedFunction>> {
    use crate::series::MultiIndex;
    let mut out: BTreeMap<Vec<u32>, GradedFunction> = BTreeMap::new();
    for (idx, coeff) in f.terms() {
        let base_part = MultiIndex(idx.0[..nbase].to_vec());
        let fiber_part = idx.0[nbase..].to_vec();
        let fiber_degree: i64 = idx.0[nbase..]
            .iter()
            .zip(&f.sig().gens()[nbase..])
            .map(|(&e, g)| e as i64 * g.degree)
            .sum();
        let term = GradedFunction::monomial(
            base_sig.clone(),
            base_part,
            coeff.clone(),
            f.max_weight(),
        )?;
        let entry = out.entry(fiber_part).or_insert_with(|| {
            GradedFunction::zero(base_sig.clone(), f.degree() - fiber_degree, f.max_weight())
        });
        *entry = loose_add(entry, &term)?;
    }
    Ok(out)
}
