//! Sections of a bundle as compatible per-chart component tuples, the
//! module structure with its signs, frames and dual frames, pairings,
//! values, fiber-linear functions, and the exterior derivative.
//!
//! A section never sees a total space: it is its component tuple, with
//! the degree shift stored explicitly. Components transform on overlaps
//! by the stored reverse transition re-expressed in the local chart, and
//! the module action carries the sign `(f . s)^a = (-1)^(|f||s|) s^a f`
//! that makes the action associative.

use std::collections::BTreeMap;

use num_traits::Zero;

use crate::error::{CoreError, Result};
use crate::geometry::{Atlas, Bundle, Morphism, Point};
use crate::grading::{dual_norm_sign, parity};
use crate::report::Report;
use crate::scalar::poly::Rat;
use crate::scalar::CoeffExpr;
use crate::series::GradedFunction;

/// Per-chart component tuple of a section; `shift` is the section's degree.
#[derive(Debug, Clone, PartialEq)]
pub struct Section {
    pub name: String,
    pub shift: i64,
    /// chart -> components aligned with the bundle's fiber coordinates.
    pub components: BTreeMap<String, Vec<GradedFunction>>,
}

/// A chart-compatible global function: one representative per chart.
pub type GlobalFunction = BTreeMap<String, GradedFunction>;

impl Section {
    pub fn zero(bundle: &Bundle, shift: i64, max_weight: u32) -> Result<Self> {
        let mut components = BTreeMap::new();
        for chart in bundle.atlas.charts() {
            let comps = bundle
                .fiber
                .iter()
                .map(|(_, d)| GradedFunction::zero(chart.sig.clone(), d + shift, max_weight))
                .collect();
            components.insert(chart.name.clone(), comps);
        }
        Ok(Section {
            name: "zero".into(),
            shift,
            components,
        })
    }

    pub fn component(&self, chart: &str, idx: usize) -> Result<&GradedFunction> {
        self.components
            .get(chart)
            .and_then(|v| v.get(idx))
            .ok_or_else(|| CoreError::UnknownChart {
                name: chart.to_string(),
            })
    }

    pub fn add(&self, other: &Section) -> Result<Section> {
        if self.shift != other.shift {
            return Err(CoreError::DegreeMismatch {
                expected: self.shift,
                found: other.shift,
                context: "section sum".into(),
            });
        }
        let mut components = BTreeMap::new();
        for (chart, mine) in &self.components {
            let theirs = other.components.get(chart).ok_or_else(|| {
                CoreError::UnknownChart {
                    name: chart.clone(),
                }
            })?;
            let sum: Result<Vec<GradedFunction>> = mine
                .iter()
                .zip(theirs)
                .map(|(a, b)|

 loose_add(a, b))
                .collect();
            components.insert(chart.clone(), sum?);
        }
        Ok(Section {
            name: format!("{}+{}", self.name, other.name),
            shift: self.shift,
            components,
        })
    }
}

fn loose_add(a: &GradedFunction, b: &GradedFunction) -> Result<GradedFunction> {
    if a.is_zero() {
        Ok(b.clone())
    } else if b.is_zero() {
        Ok(a.clone())
    } else {
        a.add(b)
    }
}

/// The frame section `delta_i`: degree `-|k^i|`, components the Kronecker
/// tuple in every chart of a trivial bundle (general bundles get the frame
/// of one chart transported by the transitions).
pub fn frame_section(bundle: &Bundle, home: &str, idx: usize, max_weight: u32) -> Result<Section> {
    let d = bundle.fiber[idx].1;
    let mut sec = Section::zero(bundle, -d, max_weight)?;
    sec.name = format!("frame_{}", bundle.fiber[idx].0);
    let chart = bundle.atlas.chart(home)?;
    let comps = sec.components.get_mut(home).unwrap();
    comps[idx] = GradedFunction::one(chart.sig.clone(), max_weight);
    let sec = transport_from(bundle, sec, home, max_weight)?;
    Ok(sec)
}

/// Fills in the components of every other chart from the home chart via
/// the transformation rule, so the result satisfies the overlap identities
/// on a pairwise-overlapping atlas by construction.
pub fn transport_from(
    bundle: &Bundle,
    mut sec: Section,
    home: &str,
    max_weight: u32,
) -> Result<Section> {
    let home_comps = sec.components[home].clone();
    let charts: Vec<String> = bundle
        .atlas
        .charts()
        .iter()
        .map(|c| c.name.clone())
        .filter(|c| c != home)
        .collect();
    for chart in charts {
        let t = bundle.transition(home, &chart)?; // stored (home, chart), home vars
        let s_matrix = bundle.atlas.reexpress_matrix(t, home, &chart)?;
        let mut comps = Vec::with_capacity(bundle.fiber.len());
        for a in 0..bundle.fiber.len() {
            let mut acc = GradedFunction::zero(
                bundle.atlas.chart(&chart)?.sig.clone(),
                bundle.fiber[a].1 + sec.shift,
                max_weight,
            );
            for b in 0..bundle.fiber.len() {
                let comp_b = bundle.atlas.reexpress(&home_comps[b], home, &chart)?;
                let term = s_matrix.entry(a, b).mul(&comp_b)?;
                acc = loose_add(&acc, &term)?;
            }
            comps.push(acc);
        }
        sec.components.insert(chart, comps);
    }
    Ok(sec)
}

/// Verifies the transformation rule `s_a^x = (S_ab)^x_y s_b^y` on every
/// ordered overlap, plus the component degree bookkeeping.
pub fn section_check(bundle: &Bundle, sec: &Section, max_weight: u32) -> Result<Report> {
    let mut report = Report::new();
    for (chart, comps) in &sec.components {
        if comps.len() != bundle.fiber.len() {
            report.fail(
                format!("components on {chart} match fiber rank"),
                format!("{} components for {} fiber coordinates", comps.len(), bundle.fiber.len()),
            );
            continue;
        }
        for (i, c) in comps.iter().enumerate() {
            let want = bundle.fiber[i].1 + sec.shift;
            if !c.is_zero() && c.degree() != want {
                report.fail(
                    format!("degree of component {} on {chart}", bundle.fiber[i].0),
                    format!("expected {want}, found {}", c.degree()),
                );
            }
        }
    }
    let pairs: Vec<(String, String)> = bundle
        .atlas
        .overlaps()
        .map(|(a, b)| (a.clone(), b.clone()))
        .collect();
    for (a, b) in pairs {
        let (Some(ca), Some(cb)) = (sec.components.get(&a), sec.components.get(&b)) else {
            continue;
        };
        // sigma_a = (T_ba -> a) sigma_b
        let t_ba = bundle.transition(&b, &a)?;
        let s_ab = bundle.atlas.reexpress_matrix(t_ba, &b, &a)?;
        let anchors = bundle.atlas.anchors_in(&a);
        for i in 0..bundle.fiber.len() {
            let mut rhs = GradedFunction::zero(
                bundle.atlas.chart(&a)?.sig.clone(),
                bundle.fiber[i].1 + sec.shift,
                max_weight,
            );
            for j in 0..bundle.fiber.len() {
                let comp = bundle.atlas.reexpress(&cb[j], &b, &a)?;
                rhs = loose_add(&rhs, &s_ab.entry(i, j).mul(&comp)?)?;
            }
            let resid = ca[i].sub(&rhs)?;
            let ok = resid.vanishes_through(max_weight, &anchors)?;
            report.record(
                format!("section({a},{b}): component {} transforms", bundle.fiber[i].0),
                ok,
                if ok { None } else { Some(resid.to_string()) },
            );
        }
    }
    Ok(report)
}

/// Module action `(f . s)^a = (-1)^(|f||s|) s^a f`; the sign is what makes
/// `f . (g . s) = (fg) . s` hold.
pub fn module_action(
    _bundle: &Bundle,
    f: &GlobalFunction,
    f_degree: i64,
    sec: &Section,
) -> Result<Section> {
    let mut components = BTreeMap::new();
    for (chart, comps) in &sec.components {
        let fc = f.get(chart).ok_or_else(|| CoreError::UnknownChart {
            name: chart.clone(),
        })?;
        let mut out = Vec::with_capacity(comps.len());
        for c in comps {
            let mut v = c.mul(fc)?;
            if parity(f_degree) == 1 && parity(sec.shift) == 1 {
                v = v.neg();
            }
            out.push(v);
        }
        components.insert(chart.clone(), out);
    }
    Ok(Section {
        name: format!("({})*{}", f_degree, sec.name),
        shift: sec.shift + f_degree,
        components,
    })
}

/// Value of a section at a base point: body values per fiber coordinate.
pub fn section_value(
    bundle: &Bundle,
    sec: &Section,
    chart: &str,
    point: &Point,
) -> Result<BTreeMap<String, Rat>> {
    let comps = sec
        .components
        .get(chart)
        .ok_or_else(|| CoreError::UnknownChart {
            name: chart.to_string(),
        })?;
    let mut out = BTreeMap::new();
    for (i, (name, _)) in bundle.fiber.iter().enumerate() {
        out.insert(name.clone(), comps[i].body_value(point)?);
    }
    Ok(out)
}

/// Cross-chart value compatibility at a point declared in chart `a`: the
/// value tuple in `a` equals the evaluated transition block applied to the
/// value tuple in `b` (nonzero-degree entries vanish at points).
pub fn section_value_compatible(
    bundle: &Bundle,
    sec: &Section,
    a: &str,
    b: &str,
    point_a: &Point,
) -> Result<bool> {
    let t_ab = bundle.atlas.transition(a, b)?;
    // the same point in b-coordinates
    let mut point_b = Point::new();
    for (name, img) in &t_ab.scalar_images {
        point_b.insert(name.clone(), img.evaluate(point_a)?);
    }
    let va = section_value(bundle, sec, a, point_a)?;
    let vb = section_value(bundle, sec, b, &point_b)?;
    let t_ba = bundle.transition(b, a)?;
    let s_ab = bundle.atlas.reexpress_matrix(t_ba, b, a)?;
    for i in 0..bundle.fiber.len() {
        let mut acc = Rat::zero();
        for j in 0..bundle.fiber.len() {
            let coeff = s_ab.entry(i, j).body_value(point_a)?;
            acc += coeff * vb[&bundle.fiber[j].0].clone();
        }
        if acc != va[&bundle.fiber[i].0] {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Componentwise matrix action of a morphism over the identity.
pub fn apply_morphism(
    phi: &Morphism,
    source: &Bundle,
    target: &Bundle,
    sec: &Section,
    max_weight: u32,
) -> Result<Section> {
    let mut components = BTreeMap::new();
    for (chart, comps) in &sec.components {
        let m = phi
            .matrices
            .get(chart)
            .ok_or_else(|| CoreError::UnknownChart {
                name: chart.clone(),
            })?;
        let sig = source.atlas.chart(chart)?.sig.clone();
        let mut out = Vec::with_capacity(target.fiber.len());
        for i in 0..target.fiber.len() {
            let mut acc = GradedFunction::zero(
                sig.clone(),
                target.fiber[i].1 + sec.shift,
                max_weight,
            );
            for j in 0..source.fiber.len() {
                acc = loose_add(&acc, &m.entry(i, j).mul(&comps[j])?)?;
            }
            out.push(acc);
        }
        components.insert(chart.clone(), out);
    }
    Ok(Section {
        name: format!("{}({})", phi.name, sec.name),
        shift: sec.shift,
        components,
    })
}

/// Pairing sign for component `a`: `mu(|k^a|) (-1)^(shift' |k^a|)` with
/// `shift'` the dual section's degree; the normalization makes the dual
/// frame pair to the Kronecker delta.
fn pairing_sign(fiber_degree: i64, dual_shift: i64) -> i64 {
    let mut s = dual_norm_sign(fiber_degree);
    if parity(dual_shift) == 1 && parity(fiber_degree) == 1 {
        s = -s;
    }
    s
}

/// Pairing of a dual section against a section: per chart
/// `sum_a sign_a tau^a sigma^a`, a chart-independent graded function of
/// degree `|tau| + |sigma|`.
pub fn pair(
    bundle: &Bundle,
    tau: &Section,
    sigma: &Section,
    max_weight: u32,
) -> Result<GlobalFunction> {
    let mut out = BTreeMap::new();
    for (chart, tcomps) in &tau.components {
        let scomps = sigma
            .components
            .get(chart)
            .ok_or_else(|| CoreError::UnknownChart {
                name: chart.clone(),
            })?;
        let sig = bundle.atlas.chart(chart)?.sig.clone();
        let mut acc =
            GradedFunction::zero(sig, tau.shift + sigma.shift, max_weight);
        for (a, (_, d)) in bundle.fiber.iter().enumerate() {
            let mut term = tcomps[a].mul(&scomps[a])?;
            if pairing_sign(*d, tau.shift) < 0 {
                term = term.neg();
            }
            acc = loose_add(&acc, &term)?;
        }
        out.insert(chart.clone(), acc);
    }
    Ok(out)
}

/// The dual frame as a section of the dual bundle: it pairs with the frame
/// sections to the Kronecker delta and has degree `-|frame element|`.
pub fn dual_frame_section(
    bundle: &Bundle,
    dual: &Bundle,
    home: &str,
    idx: usize,
    max_weight: u32,
) -> Result<Section> {
    let d = bundle.fiber[idx].1;
    let mut sec = Section::zero(dual, d, max_weight)?;
    sec.name = format!("coframe_{}", bundle.fiber[idx].0);
    let chart = bundle.atlas.chart(home)?;
    let mut one = GradedFunction::one(chart.sig.clone(), max_weight);
    if dual_norm_sign(d) * if parity(d) == 1 { -1 } else { 1 } < 0 {
        one = one.neg();
    }
    let comps = sec.components.get_mut(home).unwrap();
    comps[idx] = one;
    transport_from(dual, sec, home, max_weight)
}

/// Realizes a dual section as the fiberwise-linear function
/// `sum_a lambda_a tau^a k^a` on the total space over one chart, with
/// `lambda_a = mu(|k^a|) (-1)^(|k^a|(|tau| + 1))`; a dual frame element of
/// fiber degree 0 maps to `+k^a` and of degree 1 to `-k^a`.
pub fn linear_function_of(
    bundle: &Bundle,
    tau: &Section,
    chart: &str,
    max_weight: u32,
) -> Result<GradedFunction> {
    let total = bundle.total_sig(chart)?;
    let comps = tau
        .components
        .get(chart)
        .ok_or_else(|| CoreError::UnknownChart {
            name: chart.to_string(),
        })?;
    let mut acc = GradedFunction::zero(total.clone(), tau.shift, max_weight);
    for (a, (name, d)) in bundle.fiber.iter().enumerate() {
        let lifted = lift_to_total(&comps[a], bundle, chart, max_weight)?;
        let gen = GradedFunction::generator(total.clone(), name, max_weight)?;
        let mut term = lifted.mul(&gen)?;
        if linear_sign(*d, tau.shift) < 0 {
            term = term.neg();
        }
        acc = loose_add(&acc, &term)?;
    }
    Ok(acc)
}

fn linear_sign(fiber_degree: i64, dual_shift: i64) -> i64 {
    let mut s = dual_norm_sign(fiber_degree);
    if parity(fiber_degree) == 1 && parity(dual_shift + 1) == 1 {
        s = -s;
    }
    s
}

/// Inverse of `linear_function_of`: reads the dual-section components off a
/// fiberwise-linear function over one chart.
pub fn section_of_linear_function(
    bundle: &Bundle,
    dual: &Bundle,
    f: &GradedFunction,
    chart: &str,
    max_weight: u32,
) -> Result<Section> {
    if !f.is_fiber_linear() {
        return Err(CoreError::invalid(
            "function is not linear in the fiber generators",
        ));
    }
    let shift = f.degree();
    let nbase = bundle.atlas.chart(chart)?.sig.len();
    let mut sec = Section::zero(dual, shift, max_weight)?;
    sec.name = "from_linear".into();
    {
        let comps = sec.components.get_mut(chart).unwrap();
        let base_sig = bundle.atlas.chart(chart)?.sig.clone();
        for (a, (_, d)) in bundle.fiber.iter().enumerate() {
            // coefficient of the unit fiber exponent at slot a
            let mut acc = GradedFunction::zero(base_sig.clone(), -d + shift, max_weight);
            for (idx, coeff) in f.terms() {
                let fiber_part = &idx.0[nbase..];
                let mut unit = vec![0u32; bundle.fiber.len()];
                unit[a] = 1;
                if fiber_part != &unit[..] {
                    continue;
                }
                let base_part = crate::series::MultiIndex(idx.0[..nbase].to_vec());
                let term = GradedFunction::monomial(
                    base_sig.clone(),
                    base_part,
                    coeff.clone(),
                    max_weight,
                )?;
                acc = loose_add(&acc, &term)?;
            }
            if linear_sign(*d, shift) < 0 {
                acc = acc.neg();
            }
            comps[a] = acc;
        }
    }
    transport_from(dual, sec, chart, max_weight)
}

/// Applies a tangent section as a derivation:
/// `X(g) = sum_a (-1)^(|k^a|(|k^a| + |X|)) X^a dg/dx^a`.
pub fn vector_field_apply(
    atlas: &Atlas,
    tangent: &Bundle,
    x: &Section,
    chart: &str,
    g: &GradedFunction,
) -> Result<GradedFunction> {
    let chart_data = atlas.chart(chart)?;
    let names = chart_data.coordinate_names();
    let comps = x
        .components
        .get(chart)
        .ok_or_else(|| CoreError::UnknownChart {
            name: chart.to_string(),
        })?;
    let mut acc = GradedFunction::zero(
        chart_data.sig.clone(),
        g.degree() + x.shift,
        g.max_weight(),
    );
    for (a, name) in names.iter().enumerate() {
        let d = tangent.fiber[a].1;
        let mut term = comps[a].mul(&g.partial_derivative(name)?)?;
        if parity(d) == 1 && parity(d + x.shift) == 1 {
            term = term.neg();
        }
        acc = loose_add(&acc, &term)?;
    }
    Ok(acc)
}

/// The coordinate vector field of one chart as a section of the tangent
/// bundle: the Kronecker tuple at home, transported elsewhere.
pub fn coordinate_field(
    tangent: &Bundle,
    home: &str,
    idx: usize,
    max_weight: u32,
) -> Result<Section> {
    frame_section(tangent, home, idx, max_weight)
}

/// Exterior derivative of a chart-compatible function, as a section of the
/// cotangent bundle, defined through `df(X) = (-1)^(|f||X|) X(f)`:
/// components `(df)^j = mu(|x^j|) df/dx^j`.
pub fn exterior_derivative(
    atlas: &Atlas,
    cotangent: &Bundle,
    f: &GlobalFunction,
    f_degree: i64,
    _max_weight: u32,
) -> Result<Section> {
    if cotangent.fiber.len() != atlas.charts()[0].coordinate_names().len() {
        return Err(CoreError::ShapeMismatch {
            context: "cotangent rank does not match coordinate count".into(),
        });
    }
    let mut components = BTreeMap::new();
    for chart in atlas.charts() {
        let fc = f.get(&chart.name).ok_or_else(|| CoreError::UnknownChart {
            name: chart.name.clone(),
        })?;
        let names = chart.coordinate_names();
        let degs = chart.coordinate_degrees();
        let mut comps = Vec::with_capacity(names.len());
        for (j, name) in names.iter().enumerate() {
            let mut d = fc.partial_derivative(name)?;
            if dual_norm_sign(degs[j]) < 0 {
                d = d.neg();
            }
            comps.push(d);
        }
        components.insert(chart.name.clone(), comps);
    }
    Ok(Section {
        name: "d(f)".into(),
        shift: f_degree,
        components,
    })
}

/// Chart compatibility of a global function: representatives agree after
/// re-expression on every ordered overlap.
pub fn global_function_check(
    atlas: &Atlas,
    f: &GlobalFunction,
    max_weight: u32,
) -> Result<Report> {
    let mut report = Report::new();
    let pairs: Vec<(String, String)> = atlas
        .overlaps()
        .map(|(a, b)| (a.clone(), b.clone()))
        .collect();
    for (a, b) in pairs {
        let (Some(fa), Some(fb)) = (f.get(&a), f.get(&b)) else {
            continue;
        };
        let moved = atlas.reexpress(fb, &b, &a)?;
        let resid = fa.sub(&moved)?;
        let anchors = atlas.anchors_in(&a);
        let ok = resid.vanishes_through(max_weight, &anchors)?;
        report.record(
            format!("function({a},{b}): representatives agree"),
            ok,
            if ok { None } else { Some(resid.to_string()) },
        );
    }
    Ok(report)
}

fn lift_to_total(
    f: &GradedFunction,
    bundle: &Bundle,
    chart: &str,
    max_weight: u32,
) -> Result<GradedFunction> {
    let total = bundle.total_sig(chart)?;
    let mut gen_images = BTreeMap::new();
    for g in f.sig().gens() {
        gen_images.insert(
            g.name.clone(),
            GradedFunction::generator(total.clone(), &g.name, max_weight)?,
        );
    }
    let mut coeff_images = BTreeMap::new();
    for s in f.sig().coeff_symbols().names() {
        coeff_images.insert(
            s.clone(),
            CoeffExpr::symbol(total.coeff_symbols().clone(), s)?,
        );
    }
    f.substitute(&gen_images, &coeff_images, &total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{dual_bundle, tangent_bundle};
    use crate::scalar::poly::{rat, rat_int};
    use crate::scalar::SymbolSet;
    use crate::series::{GenClass, Generator, GeneratorSignature};
    use std::sync::Arc;

    fn graded_line() -> Arc<Atlas> {
        // reuse the geometry test atlas
        crate::geometry::tests::graded_line(8)
    }

    #[test]
    fn zero_and_frame_sections_pass() {
        let atlas = graded_line();
        let t = tangent_bundle(&atlas, 8).unwrap();
        let z = Section::zero(&t, 0, 8).unwrap();
        assert!(section_check(&t, &z, 8).unwrap().passed());
        for i in 0..2 {
            let fr = frame_section(&t, "A", i, 8).unwrap();
            assert!(section_check(&t, &fr, 8).unwrap().passed(), "frame {i}");
            assert_eq!(fr.shift, -t.fiber[i].1);
        }
    }

    #[test]
    fn coordinate_fields_satisfy_eq3_and_act_as_derivations() {
        let atlas = graded_line();
        let t = tangent_bundle(&atlas, 8).unwrap();
        for home in ["A", "B"] {
            for i in 0..2 {
                let x = coordinate_field(&t, home, i, 8).unwrap();
                assert!(
                    section_check(&t, &x, 8).unwrap().passed(),
                    "field {home}/{i}"
                );
                // independent oracle: applying the transported field in the
                // OTHER chart agrees with differentiating there directly.
                let other = if home == "A" { "B" } else { "A" };
                let sig_o = atlas.chart(other).unwrap().sig.clone();
                let g = GradedFunction::generator(sig_o.clone(), sig_o.gens()[0].name.as_str(), 8)
                    .unwrap()
                    .scale(&CoeffExpr::parse(
                        &format!("1 + {}^2", sig_o.coeff_symbols().names()[0]),
                        sig_o.coeff_symbols(),
                    ).unwrap())
                    .unwrap();
                let applied_other = vector_field_apply(&atlas, &t, &x, other, &g).unwrap();
                // same computation routed through the home chart
                let g_home = atlas.reexpress(&g, other, home).unwrap();
                let applied_home =
                    vector_field_apply(&atlas, &t, &x, home, &g_home).unwrap();
                let back = atlas.reexpress(&applied_home, home, other).unwrap();
                let resid = applied_other.sub(&back).unwrap();
                assert!(
                    resid.vanishes_through(8, &[]).unwrap() || resid.is_zero(),
                    "derivation mismatch for {home}/{i}: {resid}"
                );
            }
        }
    }

    #[test]
    fn broken_jacobian_fails_eq3() {
        let atlas = graded_line();
        let t = tangent_bundle(&atlas, 8).unwrap();
        let mut x = coordinate_field(&t, "A", 0, 8).unwrap();
        // drop the Jacobian factor: claim the B-components are also Kronecker
        let sb = atlas.chart("B").unwrap().sig.clone();
        let comps = x.components.get_mut("B").unwrap();
        comps[0] = GradedFunction::one(sb.clone(), 8);
        comps[1] = GradedFunction::zero(sb, t.fiber[1].1 + x.shift, 8);
        let report = section_check(&t, &x, 8).unwrap();
        // A-chart components are Kronecker for d_x; B-chart now wrong unless
        // the Jacobian is trivial, which it is not (eta = (1+x^2) xi).
        assert!(!report.passed());
    }

    #[test]
    fn module_action_unit_and_associativity() {
        let atlas = graded_line();
        let t = tangent_bundle(&atlas, 8).unwrap();
        let sa = atlas.chart("A").unwrap().sig.clone();
        let sec = coordinate_field(&t, "A", 1, 8).unwrap();
        // unit acts trivially
        let mut one = GlobalFunction::new();
        for c in atlas.charts() {
            one.insert(c.name.clone(), GradedFunction::one(c.sig.clone(), 8));
        }
        let acted = module_action(&t, &one, 0, &sec).unwrap();
        assert_eq!(acted.components, sec.components);

        // f.(g.s) = (fg).s for odd f, g
        let f_a = GradedFunction::generator(sa.clone(), "xi", 8).unwrap();
        let mut f = GlobalFunction::new();
        f.insert("A".into(), f_a.clone());
        f.insert("B".into(), atlas.reexpress(&f_a, "A", "B").unwrap());
        let g_a = f_a.scale(&CoeffExpr::parse("x", sa.coeff_symbols()).unwrap()).unwrap();
        let mut g = GlobalFunction::new();
        g.insert("A".into(), g_a.clone());
        g.insert("B".into(), atlas.reexpress(&g_a, "A", "B").unwrap());
        let gs = module_action(&t, &g, 1, &sec).unwrap();
        let f_gs = module_action(&t, &f, 1, &gs).unwrap();
        let mut fg = GlobalFunction::new();
        for c in ["A", "B"] {
            fg.insert(c.into(), f[c].mul(&g[c]).unwrap());
        }
        let fg_s = module_action(&t, &fg, 2, &sec).unwrap();
        assert_eq!(f_gs.shift, fg_s.shift);
        for c in ["A", "B"] {
            for i in 0..2 {
                let resid = f_gs.components[c][i].sub(&fg_s.components[c][i]);
                match resid {
                    Ok(r) => assert!(r.is_zero(), "associativity failed at {c}/{i}"),
                    Err(_) => assert!(
                        f_gs.components[c][i].is_zero() && fg_s.components[c][i].is_zero()
                    ),
                }
            }
        }
        // bilinearity
        let sum = module_action(
            &t,
            &{
                let mut h = GlobalFunction::new();
                for c in ["A", "B"] {
                    h.insert(c.into(), f[c].add(&g[c]).unwrap());
                }
                h
            },
            1,
            &sec,
        )
        .unwrap();
        let separate = module_action(&t, &f, 1, &sec)
            .unwrap()
            .add(&module_action(&t, &g, 1, &sec).unwrap())
            .unwrap();
        for c in ["A", "B"] {
            for i in 0..2 {
                assert_eq!(sum.components[c][i], separate.components[c][i]);
            }
        }
    }

    #[test]
    fn section_values() {
        let atlas = graded_line();
        let t = tangent_bundle(&atlas, 8).unwrap();
        let z = Section::zero(&t, 0, 8).unwrap();
        let pt: Point = [("x".to_string(), rat_int(2))].into_iter().collect();
        let v = section_value(&t, &z, "A", &pt).unwrap();
        assert!(v.values().all(|r| r.is_zero()));

        // sigma with sigma^(d_x) = x: value 2 at x=2
        let sa = atlas.chart("A").unwrap().sig.clone();
        let mut sec = Section::zero(&t, 0, 8).unwrap();
        sec.components.get_mut("A").unwrap()[0] = GradedFunction::from_coeff(
            sa.clone(),
            CoeffExpr::parse("x", sa.coeff_symbols()).unwrap(),
            8,
        );
        let sec = transport_from(&t, sec, "A", 8).unwrap();
        let v = section_value(&t, &sec, "A", &pt).unwrap();
        assert_eq!(v["d_x"], rat_int(2));
        // the odd component has nonzero degree, so its value vanishes
        assert_eq!(v["d_xi"], rat_int(0));
        // chart independence at the anchor
        assert!(section_value_compatible(&t, &sec, "A", "B", &pt).unwrap());
        let frame = coordinate_field(&t, "A", 0, 8).unwrap();
        assert!(section_value_compatible(&t, &frame, "A", "B", &pt).unwrap());
    }

    #[test]
    fn dual_frame_pairs_to_delta() {
        let atlas = graded_line();
        let t = tangent_bundle(&atlas, 8).unwrap();
        let td = dual_bundle(&t, 8).unwrap();
        for i in 0..2 {
            let co = dual_frame_section(&t, &td, "A", i, 8).unwrap();
            assert!(section_check(&td, &co, 8).unwrap().passed(), "coframe {i}");
            assert_eq!(co.shift, t.fiber[i].1); // |s^i| = -|s_i|
            for j in 0..2 {
                let fr = frame_section(&t, "A", j, 8).unwrap();
                let p = pair(&t, &co, &fr, 8).unwrap();
                for (chart, val) in &p {
                    if i == j {
                        let one = GradedFunction::one(
                            atlas.chart(chart).unwrap().sig.clone(),
                            8,
                        );
                        assert_eq!(val.sub(&one).unwrap().is_zero(), true, "delta at {chart}");
                    } else {
                        assert!(val.is_zero(), "off-diagonal at {chart}");
                    }
                }
            }
        }
    }

    #[test]
    fn pairing_is_chart_independent() {
        let atlas = graded_line();
        let t = tangent_bundle(&atlas, 8).unwrap();
        let td = dual_bundle(&t, 8).unwrap();
        let sa = atlas.chart("A").unwrap().sig.clone();
        let x_expr = CoeffExpr::parse("x", sa.coeff_symbols()).unwrap();
        // a few sections and dual sections with assorted shifts
        let mut sections = Vec::new();
        for (shift, scale_odd) in [(0i64, false), (1, true), (-1, false), (2, true)] {
            let mut s = Section::zero(&t, shift, 8).unwrap();
            {
                let comps = s.components.get_mut("A").unwrap();
                for i in 0..2 {
                    let deg = t.fiber[i].1 + shift;
                    let mut f = GradedFunction::zero(sa.clone(), deg, 8);
                    for idx in crate::series::enumerate_multiindices(&sa, deg, 3) {
                        let c = if scale_odd {
                            x_expr.clone()
                        } else {
                            CoeffExpr::constant(sa.coeff_symbols().clone(), rat(1, 2))
                        };
                        f = loose_add(
                            &f,
                            &GradedFunction::monomial(sa.clone(), idx, c, 8).unwrap(),
                        )
                        .unwrap();
                    }
                    comps[i] = f;
                }
            }
            sections.push(transport_from(&t, s, "A", 8).unwrap());
        }
        let mut duals = Vec::new();
        for (shift, k) in [(0i64, 1i64), (1, 2), (-2, 1), (2, 3)] {
            let mut s = Section::zero(&td, shift, 8).unwrap();
            {
                let comps = s.components.get_mut("A").unwrap();
                for i in 0..2 {
                    let deg = td.fiber[i].1 + shift;
                    let mut f = GradedFunction::zero(sa.clone(), deg, 8);
                    for idx in crate::series::enumerate_multiindices(&sa, deg, 3) {
                        f = loose_add(
                            &f,
                            &GradedFunction::monomial(
                                sa.clone(),
                                idx,
                                CoeffExpr::constant(sa.coeff_symbols().clone(), rat_int(k)),
                                8,
                            )
                            .unwrap(),
                        )
                        .unwrap();
                    }
                    comps[i] = f;
                }
            }
            duals.push(transport_from(&td, s, "A", 8).unwrap());
        }
        for tau in &duals {
            assert!(section_check(&td, tau, 8).unwrap().passed());
            for sigma in &sections {
                assert!(section_check(&t, sigma, 8).unwrap().passed());
                let p = pair(&t, tau, sigma, 8).unwrap();
                let moved = atlas.reexpress(&p["B"], "B", "A").unwrap();
                let resid = match p["A"].sub(&moved) {
                    Ok(r) => r,
                    Err(_) => {
                        assert!(p["A"].is_zero() && moved.is_zero());
                        continue;
                    }
                };
                assert!(
                    resid.is_zero(),
                    "pairing not chart-independent (tau shift {}, sigma shift {}): {resid}",
                    tau.shift,
                    sigma.shift
                );
            }
        }
    }

    #[test]
    fn linear_functions_roundtrip_and_signs() {
        let atlas = graded_line();
        let t = tangent_bundle(&atlas, 8).unwrap();
        let td = dual_bundle(&t, 8).unwrap();
        // dual frame element with |k^a| = 0 -> +k^a; |k^a| = 1 -> -k^a
        let co0 = dual_frame_section(&t, &td, "A", 0, 8).unwrap();
        let f0 = linear_function_of(&t, &co0, "A", 8).unwrap();
        let total = t.total_sig("A").unwrap();
        let k0 = GradedFunction::generator(total.clone(), "d_x", 8).unwrap();
        assert!(f0.sub(&k0).unwrap().is_zero(), "expected +k^0, got {f0}");
        let co1 = dual_frame_section(&t, &td, "A", 1, 8).unwrap();
        let f1 = linear_function_of(&t, &co1, "A", 8).unwrap();
        let k1 = GradedFunction::generator(total.clone(), "d_xi", 8).unwrap();
        assert!(
            f1.add(&k1).unwrap().is_zero(),
            "expected -k^1, got {f1}"
        );
        assert!(f0.is_fiber_linear() && f1.is_fiber_linear());

        // roundtrip on transported random dual sections
        let sa = atlas.chart("A").unwrap().sig.clone();
        for shift in [-1i64, 0, 1, 2] {
            let mut s = Section::zero(&td, shift, 8).unwrap();
            {
                let comps = s.components.get_mut("A").unwrap();
                for i in 0..2 {
                    let deg = td.fiber[i].1 + shift;
                    let mut f = GradedFunction::zero(sa.clone(), deg, 8);
                    for idx in crate::series::enumerate_multiindices(&sa, deg, 2) {
                        f = loose_add(
                            &f,
                            &GradedFunction::monomial(
                                sa.clone(),
                                idx,
                                CoeffExpr::parse("1 + x", sa.coeff_symbols()).unwrap(),
                                8,
                            )
                            .unwrap(),
                        )
                        .unwrap();
                    }
                    comps[i] = f;
                }
            }
            let tau = transport_from(&td, s, "A", 8).unwrap();
            let f = linear_function_of(&t, &tau, "A", 8).unwrap();
            assert!(f.is_fiber_linear() || f.is_zero());
            let back = section_of_linear_function(&t, &td, &f, "A", 8).unwrap();
            for i in 0..2 {
                let resid = tau.components["A"][i].sub(&back.components["A"][i]);
                match resid {
                    Ok(r) => assert!(r.is_zero(), "roundtrip failed shift {shift} comp {i}"),
                    Err(_) => assert!(
                        tau.components["A"][i].is_zero()
                            && back.components["A"][i].is_zero()
                    ),
                }
            }
        }
    }

    #[test]
    fn homothety_scaling_identity() {
        // (H_lambda)* f = sum_w lambda^w part_w, coefficientwise in lambda.
        let symbols = SymbolSet::new(vec!["x".to_string()]);
        let s = GeneratorSignature::new(
            vec![
                Generator {
                    name: "xi".into(),
                    degree: 1,
                    class: GenClass::Base,
                },
                Generator {
                    name: "k0".into(),
                    degree: 0,
                    class: GenClass::Fiber,
                },
                Generator {
                    name: "k1".into(),
                    degree: 1,
                    class: GenClass::Fiber,
                },
            ],
            symbols,
        )
        .unwrap();
        let k0 = GradedFunction::generator(s.clone(), "k0", 8).unwrap();
        let k1 = GradedFunction::generator(s.clone(), "k1", 8).unwrap();
        let xi = GradedFunction::generator(s.clone(), "xi", 8).unwrap();
        // degree-1 parts of fiber weight 0, 1 and 2
        let f = xi
            .add(
                &k1.scale(&CoeffExpr::parse("1 + x", s.coeff_symbols()).unwrap())
                    .unwrap(),
            )
            .unwrap()
            .add(&xi.mul(&k0).unwrap().mul(&k0).unwrap().neg())
            .unwrap();
        let scaled = f.homothety_scaled("lam").unwrap();
        let parts = f.fiber_weight_parts();
        let ext = scaled.sig().clone();
        let lam = CoeffExpr::symbol(ext.coeff_symbols().clone(), "lam").unwrap();
        let mut expect = GradedFunction::zero(ext.clone(), f.degree(), f.max_weight());
        for (w, part) in &parts {
            let lifted = {
                // embed into the lambda-extended signature
                let mut gen_images = BTreeMap::new();
                for g in part.sig().gens() {
                    gen_images.insert(
                        g.name.clone(),
                        GradedFunction::generator(ext.clone(), &g.name, 8).unwrap(),
                    );
                }
                let mut coeff_images = BTreeMap::new();
                for sym in part.sig().coeff_symbols().names() {
                    coeff_images.insert(
                        sym.clone(),
                        CoeffExpr::symbol(ext.coeff_symbols().clone(), sym).unwrap(),
                    );
                }
                part.substitute(&gen_images, &coeff_images, &ext).unwrap()
            };
            expect = loose_add(&expect, &lifted.scale(&lam.pow(*w)).unwrap()).unwrap();
        }
        assert!(scaled.sub(&expect).unwrap().is_zero());
        // fiber-linear means the scaling is exactly linear
        let lin = k1
            .scale(&CoeffExpr::parse("x", s.coeff_symbols()).unwrap())
            .unwrap()
            .add(&xi.mul(&k0).unwrap())
            .unwrap();
        assert!(lin.is_fiber_linear());
        let lin_scaled = lin.homothety_scaled("lam").unwrap();
        let lin_ext = lin_scaled.sig().clone();
        let lam2 = CoeffExpr::symbol(lin_ext.coeff_symbols().clone(), "lam").unwrap();
        let lifted = {
            let mut gen_images = BTreeMap::new();
            for g in lin.sig().gens() {
                gen_images.insert(
                    g.name.clone(),
                    GradedFunction::generator(lin_ext.clone(), &g.name, 8).unwrap(),
                );
            }
            let mut coeff_images = BTreeMap::new();
            for sym in lin.sig().coeff_symbols().names() {
                coeff_images.insert(
                    sym.clone(),
                    CoeffExpr::symbol(lin_ext.coeff_symbols().clone(), sym).unwrap(),
                );
            }
            lin.substitute(&gen_images, &coeff_images, &lin_ext).unwrap()
        };
        assert!(lin_scaled
            .sub(&lifted.scale(&lam2).unwrap())
            .unwrap()
            .is_zero());
    }

    #[test]
    fn exterior_derivative_basics() {
        let atlas = graded_line();
        let t = tangent_bundle(&atlas, 8).unwrap();
        let td = dual_bundle(&t, 8).unwrap();
        let sa = atlas.chart("A").unwrap().sig.clone();
        // d(constant) = 0
        let mut c = GlobalFunction::new();
        for chart in atlas.charts() {
            c.insert(
                chart.name.clone(),
                GradedFunction::constant(chart.sig.clone(), rat_int(5), 8),
            );
        }
        let dc = exterior_derivative(&atlas, &td, &c, 0, 8).unwrap();
        assert!(dc
            .components
            .values()
            .all(|v| v.iter().all(|f| f.is_zero())));

        // d(x) pairs to 1 with d/dx and to 0 with d/dxi
        let mut fx = GlobalFunction::new();
        fx.insert(
            "A".into(),
            GradedFunction::from_coeff(
                sa.clone(),
                CoeffExpr::parse("x", sa.coeff_symbols()).unwrap(),
                8,
            ),
        );
        let sb = atlas.chart("B").unwrap().sig.clone();
        fx.insert(
            "B".into(),
            GradedFunction::from_coeff(
                sb.clone(),
                CoeffExpr::parse("y", sb.coeff_symbols()).unwrap(),
                8,
            ),
        );
        assert!(global_function_check(&atlas, &fx, 8).unwrap().passed());
        let dx = exterior_derivative(&atlas, &td, &fx, 0, 8).unwrap();
        assert!(section_check(&td, &dx, 8).unwrap().passed(), "dx cotangent");
        let ddx = coordinate_field(&t, "A", 0, 8).unwrap();
        let ddxi = coordinate_field(&t, "A", 1, 8).unwrap();
        let p1 = pair(&t, &dx, &ddx, 8).unwrap();
        assert!(p1["A"]
            .sub(&GradedFunction::one(sa.clone(), 8))
            .unwrap()
            .is_zero());
        let p0 = pair(&t, &dx, &ddxi, 8).unwrap();
        assert!(p0["A"].is_zero());

        // d of a degree-1 function passes the cotangent check too
        let mut fxi = GlobalFunction::new();
        let xi_a = GradedFunction::generator(sa.clone(), "xi", 8)
            .unwrap()
            .scale(&CoeffExpr::parse("x^2", sa.coeff_symbols()).unwrap())
            .unwrap();
        fxi.insert("A".into(), xi_a.clone());
        fxi.insert("B".into(), atlas.reexpress(&xi_a, "A", "B").unwrap());
        assert!(global_function_check(&atlas, &fxi, 8).unwrap().passed());
        let dxi = exterior_derivative(&atlas, &td, &fxi, 1, 8).unwrap();
        let rep = section_check(&td, &dxi, 8).unwrap();
        assert!(rep.passed(), "{rep:?}");
        // df(X) = (-1)^(|f||X|) X(f) against both coordinate fields
        for (i, field) in [&ddx, &ddxi].into_iter().enumerate() {
            let lhs = pair(&t, &dxi, field, 8).unwrap();
            let xf = vector_field_apply(&atlas, &t, field, "A", &fxi["A"]).unwrap();
            let mut rhs = xf;
            if parity(1) == 1 && parity(field.shift) == 1 {
                rhs = rhs.neg();
            }
            let resid = lhs["A"].sub(&rhs);
            match resid {
                Ok(r) => assert!(r.is_zero(), "df(X) mismatch for field {i}"),
                Err(_) => assert!(lhs["A"].is_zero() && rhs.is_zero()),
            }
        }
    }
}
