//! Resolves parsed declarations into kernel objects and renders them back
//! in canonical form.

use std::collections::BTreeMap;
use std::str::FromStr;
use std::sync::Arc;

use gvb_core::error::CoreError;
use gvb_core::geometry::{Atlas, BaseMap, Bundle, Chart, Morphism, Point, Transition};
use gvb_core::matrix::GradedMatrix;
use gvb_core::scalar::parse::{parse_expr, Ast};
use gvb_core::scalar::poly::Rat;
use gvb_core::scalar::CoeffExpr;
use gvb_core::sections::Section;
use gvb_core::series::{GeneratorSignature, GradedFunction};

use crate::dsl::{self, Decl};

#[derive(Debug)]
pub struct WsError(pub String);

impl std::fmt::Display for WsError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl From<CoreError> for WsError {
    fn from(e: CoreError) -> Self {
        WsError(e.to_string())
    }
}

pub type WsResult<T> = Result<T, WsError>;

fn ws<T>(context: &str, r: Result<T, CoreError>) -> WsResult<T> {
    r.map_err(|e| WsError(format!("{context}: {e}")))
}

#[derive(Debug, Clone, PartialEq)]
pub enum FunctionHost {
    Manifold(String),
    Bundle(String),
}

#[derive(Debug, Clone)]
pub struct FunctionEntry {
    pub host: FunctionHost,
    pub degree: i64,
    pub per_chart: BTreeMap<String, GradedFunction>,
}

#[derive(Debug, Clone)]
pub struct MorphismEntry {
    pub from: String,
    pub to: String,
    pub morphism: Morphism,
}

/// Parsed and resolved contents of one `.gvb` file.
pub struct Workspace {
    pub weight: u32,
    pub atlases: BTreeMap<String, Arc<Atlas>>,
    pub bundles: BTreeMap<String, Bundle>,
    pub maps: BTreeMap<String, BaseMap>,
    pub morphisms: BTreeMap<String, MorphismEntry>,
    pub sections: BTreeMap<String, (String, Section)>,
    pub functions: BTreeMap<String, FunctionEntry>,
}

/// Evaluates a parsed expression over a generator signature: identifiers
/// resolve to scalar symbols or generators; division requires a
/// degree-zero divisor with invertible body.
pub fn eval_expr(
    ast: &Ast,
    sig: &Arc<GeneratorSignature>,
    weight: u32,
) -> Result<GradedFunction, CoreError> {
    match ast {
        Ast::Rat(r) => Ok(GradedFunction::constant(sig.clone(), r.clone(), weight)),
        Ast::Ident { name, pos } => {
            if sig.coeff_symbols().index_of(name).is_some() {
                Ok(GradedFunction::from_coeff(
                    sig.clone(),
                    CoeffExpr::symbol(sig.coeff_symbols().clone(), name)?,
                    weight,
                ))
            } else if sig.index_of(name).is_some() {
                GradedFunction::generator(sig.clone(), name, weight)
            } else {
                Err(CoreError::UndeclaredSymbol {
                    name: name.clone(),
                    pos: *pos,
                })
            }
        }
        Ast::Add(a, b) => eval_expr(a, sig, weight)?.add(&eval_expr(b, sig, weight)?),
        Ast::Sub(a, b) => eval_expr(a, sig, weight)?.sub(&eval_expr(b, sig, weight)?),
        Ast::Mul(a, b) => eval_expr(a, sig, weight)?.mul(&eval_expr(b, sig, weight)?),
        Ast::Div(a, b) => {
            let num = eval_expr(a, sig, weight)?;
            let den = eval_expr(b, sig, weight)?;
            num.mul(&den.reciprocal(weight)?)
        }
        Ast::Pow(a, e) => eval_expr(a, sig, weight)?.pow(*e),
    }
}

/// Evaluates expression text over a signature.
pub fn eval_text(
    text: &str,
    sig: &Arc<GeneratorSignature>,
    weight: u32,
) -> Result<GradedFunction, CoreError> {
    let ast = parse_expr(text)?;
    eval_expr(&ast, sig, weight)
}

/// Evaluates expression text that must be a pure scalar (no generators).
pub fn eval_scalar(
    text: &str,
    sig: &Arc<GeneratorSignature>,
    weight: u32,
) -> Result<CoeffExpr, CoreError> {
    let f = eval_text(text, sig, weight)?;
    if f.is_zero() {
        return Ok(CoeffExpr::zero(sig.coeff_symbols().clone()));
    }
    if f.degree() != 0 || f.terms().keys().any(|m| !m.is_empty_index()) {
        return Err(CoreError::invalid(format!(
            "expected a scalar expression in the base coordinates, found `{f}`"
        )));
    }
    Ok(f.body())
}

fn parse_rat(text: &str) -> WsResult<Rat> {
    Rat::from_str(text.trim()).map_err(|e| WsError(format!("bad rational `{text}`: {e}")))
}

impl Workspace {
    pub fn build(decls: &[Decl], weight: u32) -> WsResult<Workspace> {
        let mut wsp = Workspace {
            weight,
            atlases: BTreeMap::new(),
            bundles: BTreeMap::new(),
            maps: BTreeMap::new(),
            morphisms: BTreeMap::new(),
            sections: BTreeMap::new(),
            functions: BTreeMap::new(),
        };
        for d in decls {
            match d {
                Decl::Manifold(m) => wsp.add_manifold(m)?,
                Decl::Bundle(b) => wsp.add_bundle(b)?,
                Decl::Map(m) => wsp.add_map(m)?,
                Decl::Morphism(m) => wsp.add_morphism(m)?,
                Decl::Section(s) => wsp.add_section(s)?,
                Decl::Function(f) => wsp.add_function(f)?,
            }
        }
        Ok(wsp)
    }

    pub fn load(text: &str, weight: u32) -> WsResult<Workspace> {
        let decls = dsl::parse_file(text).map_err(|e| WsError(e.to_string()))?;
        Workspace::build(&decls, weight)
    }

    fn add_manifold(&mut self, m: &dsl::ManifoldDecl) -> WsResult<()> {
        let mut charts = Vec::new();
        for c in &m.charts {
            let zero: Vec<&str> = c.base.iter().map(|s| s.as_str()).collect();
            let graded: Vec<(&str, i64)> =
                c.coords.iter().map(|(n, d)| (n.as_str(), *d)).collect();
            charts.push(ws(
                &format!("chart {}", c.name),
                Chart::new(&c.name, &zero, &graded),
            )?);
        }
        let mut atlas = ws(&format!("manifold {}", m.name), Atlas::new(&m.name, charts))?;
        for o in &m.overlaps {
            let fwd = self.resolve_transition(&atlas, &o.a, &o.b, &o.forward)?;
            ws(
                &format!("overlap {} {}", o.a, o.b),
                atlas.add_transition(&o.a, &o.b, fwd),
            )?;
            if !o.inverse.is_empty() {
                let bwd = self.resolve_transition(&atlas, &o.b, &o.a, &o.inverse)?;
                ws(
                    &format!("overlap {} {} (inverse)", o.a, o.b),
                    atlas.add_transition(&o.b, &o.a, bwd),
                )?;
            }
        }
        for p in &m.points {
            let mut point = Point::new();
            for (n, v) in &p.assigns {
                point.insert(n.clone(), parse_rat(v)?);
            }
            ws(
                &format!("point {}", p.name),
                atlas.add_point(&p.name, &p.chart, point),
            )?;
        }
        self.atlases.insert(m.name.clone(), Arc::new(atlas));
        Ok(())
    }

    fn resolve_transition(
        &self,
        atlas: &Atlas,
        src: &str,
        dst: &str,
        assigns: &[(String, String)],
    ) -> WsResult<Transition> {
        let src_chart = ws("chart lookup", atlas.chart(src))?;
        let dst_chart = ws("chart lookup", atlas.chart(dst))?;
        let mut scalar_images = BTreeMap::new();
        let mut graded_images = BTreeMap::new();
        for (coord, text) in assigns {
            let context = format!("overlap ({src},{dst}), coordinate `{coord}`");
            if dst_chart.sig.coeff_symbols().index_of(coord).is_some() {
                scalar_images.insert(
                    coord.clone(),
                    ws(&context, eval_scalar(text, &src_chart.sig, self.weight))?,
                );
            } else if dst_chart.sig.index_of(coord).is_some() {
                graded_images.insert(
                    coord.clone(),
                    ws(&context, eval_text(text, &src_chart.sig, self.weight))?,
                );
            } else {
                return Err(WsError(format!(
                    "{context}: `{coord}` is not a coordinate of chart `{dst}`"
                )));
            }
        }
        Ok(Transition {
            scalar_images,
            graded_images,
        })
    }

    fn add_bundle(&mut self, b: &dsl::BundleDecl) -> WsResult<()> {
        let atlas = self
            .atlases
            .get(&b.manifold)
            .ok_or_else(|| WsError(format!("bundle {}: unknown manifold `{}`", b.name, b.manifold)))?
            .clone();
        let degs: Vec<i64> = b.fiber.iter().map(|(_, d)| *d).collect();
        let mut transitions = BTreeMap::new();
        for (ca, cb, rows) in &b.transitions {
            let sig = ws("chart lookup", atlas.chart(ca))?.sig.clone();
            let mut entries = Vec::new();
            for row in rows {
                let mut er = Vec::new();
                for text in row {
                    er.push(ws(
                        &format!("bundle {}, transition ({ca},{cb})", b.name),
                        eval_text(text, &sig, self.weight),
                    )?);
                }
                entries.push(er);
            }
            let m = ws(
                &format!("bundle {}, transition ({ca},{cb})", b.name),
                GradedMatrix::from_entries(degs.clone(), degs.clone(), entries),
            )?;
            transitions.insert((ca.clone(), cb.clone()), m);
        }
        let bundle = ws(
            &format!("bundle {}", b.name),
            Bundle::new(&b.name, atlas, b.fiber.clone(), transitions),
        )?;
        self.bundles.insert(b.name.clone(), bundle);
        Ok(())
    }

    fn add_map(&mut self, m: &dsl::MapDecl) -> WsResult<()> {
        let source = self
            .atlases
            .get(&m.from)
            .ok_or_else(|| WsError(format!("map {}: unknown manifold `{}`", m.name, m.from)))?
            .clone();
        let target = self
            .atlases
            .get(&m.to)
            .ok_or_else(|| WsError(format!("map {}: unknown manifold `{}`", m.name, m.to)))?
            .clone();
        let mut assignments = BTreeMap::new();
        let mut pullbacks = BTreeMap::new();
        for (src, dst, assigns) in &m.charts {
            let src_chart = ws("chart lookup", source.chart(src))?.clone();
            let dst_chart = ws("chart lookup", target.chart(dst))?;
            let mut scalar_images = BTreeMap::new();
            let mut graded_images = BTreeMap::new();
            for (coord, text) in assigns {
                let context = format!("map {}, chart {src}->{dst}, `{coord}`", m.name);
                if dst_chart.sig.coeff_symbols().index_of(coord).is_some() {
                    scalar_images.insert(
                        coord.clone(),
                        ws(&context, eval_scalar(text, &src_chart.sig, self.weight))?,
                    );
                } else if dst_chart.sig.index_of(coord).is_some() {
                    graded_images.insert(
                        coord.clone(),
                        ws(&context, eval_text(text, &src_chart.sig, self.weight))?,
                    );
                } else {
                    return Err(WsError(format!(
                        "{context}: not a coordinate of `{dst}`"
                    )));
                }
            }
            assignments.insert(src.clone(), dst.clone());
            pullbacks.insert(
                src.clone(),
                Transition {
                    scalar_images,
                    graded_images,
                },
            );
        }
        self.maps.insert(
            m.name.clone(),
            BaseMap {
                name: m.name.clone(),
                source,
                target,
                assignments,
                pullbacks,
            },
        );
        Ok(())
    }

    fn add_morphism(&mut self, m: &dsl::MorphismDecl) -> WsResult<()> {
        let from = self
            .bundles
            .get(&m.from)
            .ok_or_else(|| WsError(format!("morphism {}: unknown bundle `{}`", m.name, m.from)))?;
        let to = self
            .bundles
            .get(&m.to)
            .ok_or_else(|| WsError(format!("morphism {}: unknown bundle `{}`", m.name, m.to)))?;
        let base = match &m.over {
            None => None,
            Some(name) => Some(
                self.maps
                    .get(name)
                    .ok_or_else(|| {
                        WsError(format!("morphism {}: unknown map `{name}`", m.name))
                    })?
                    .clone(),
            ),
        };
        let rows = to.fiber_degrees();
        let cols = from.fiber_degrees();
        let mut matrices = BTreeMap::new();
        for (chart, grid) in &m.matrices {
            let sig = ws("chart lookup", from.atlas.chart(chart))?.sig.clone();
            let mut entries = Vec::new();
            for row in grid {
                let mut er = Vec::new();
                for text in row {
                    er.push(ws(
                        &format!("morphism {}, chart {chart}", m.name),
                        eval_text(text, &sig, self.weight),
                    )?);
                }
                entries.push(er);
            }
            matrices.insert(
                chart.clone(),
                ws(
                    &format!("morphism {}, chart {chart}", m.name),
                    GradedMatrix::from_entries(rows.clone(), cols.clone(), entries),
                )?,
            );
        }
        self.morphisms.insert(
            m.name.clone(),
            MorphismEntry {
                from: m.from.clone(),
                to: m.to.clone(),
                morphism: Morphism {
                    name: m.name.clone(),
                    base,
                    matrices,
                },
            },
        );
        Ok(())
    }

    fn add_section(&mut self, s: &dsl::SectionDecl) -> WsResult<()> {
        let bundle = self
            .bundles
            .get(&s.bundle)
            .ok_or_else(|| WsError(format!("section {}: unknown bundle `{}`", s.name, s.bundle)))?;
        let mut sec = ws(
            &format!("section {}", s.name),
            Section::zero(bundle, s.shift, self.weight),
        )?;
        sec.name = s.name.clone();
        for (chart, comps) in &s.components {
            let sig = ws("chart lookup", bundle.atlas.chart(chart))?.sig.clone();
            if comps.len() != bundle.fiber.len() {
                return Err(WsError(format!(
                    "section {}: {} components for {} fiber coordinates on chart {chart}",
                    s.name,
                    comps.len(),
                    bundle.fiber.len()
                )));
            }
            let mut out = Vec::new();
            for (i, text) in comps.iter().enumerate() {
                let f = ws(
                    &format!("section {}, chart {chart}", s.name),
                    eval_text(text, &sig, self.weight),
                )?;
                let want = bundle.fiber[i].1 + s.shift;
                if !f.is_zero() && f.degree() != want {
                    return Err(WsError(format!(
                        "section {}, chart {chart}, component {}: degree {} but |k^a|+shift = {want}",
                        s.name,
                        bundle.fiber[i].0,
                        f.degree()
                    )));
                }
                let f = if f.is_zero() {
                    GradedFunction::zero(sig.clone(), want, self.weight)
                } else {
                    f
                };
                out.push(f);
            }
            sec.components.insert(chart.clone(), out);
        }
        self.sections
            .insert(s.name.clone(), (s.bundle.clone(), sec));
        Ok(())
    }

    fn add_function(&mut self, f: &dsl::FunctionDecl) -> WsResult<()> {
        let (host, charts_and_sigs): (FunctionHost, Vec<(String, Arc<GeneratorSignature>)>) =
            if let Some(atlas) = self.atlases.get(&f.host) {
                (
                    FunctionHost::Manifold(f.host.clone()),
                    atlas
                        .charts()
                        .iter()
                        .map(|c| (c.name.clone(), c.sig.clone()))
                        .collect(),
                )
            } else if let Some(bundle) = self.bundles.get(&f.host) {
                let mut v = Vec::new();
                for c in bundle.atlas.charts() {
                    v.push((
                        c.name.clone(),
                        ws("total signature", bundle.total_sig(&c.name))?,
                    ));
                }
                (FunctionHost::Bundle(f.host.clone()), v)
            } else {
                return Err(WsError(format!(
                    "function {}: unknown manifold or bundle `{}`",
                    f.name, f.host
                )));
            };
        let mut per_chart = BTreeMap::new();
        for (chart, text) in &f.exprs {
            let sig = charts_and_sigs
                .iter()
                .find(|(n, _)| n == chart)
                .map(|(_, s)| s.clone())
                .ok_or_else(|| {
                    WsError(format!("function {}: unknown chart `{chart}`", f.name))
                })?;
            let g = ws(
                &format!("function {}, chart {chart}", f.name),
                eval_text(text, &sig, self.weight),
            )?;
            if !g.is_zero() && g.degree() != f.degree {
                return Err(WsError(format!(
                    "function {}, chart {chart}: degree {} declared {}",
                    f.name,
                    g.degree(),
                    f.degree
                )));
            }
            per_chart.insert(chart.clone(), g);
        }
        self.functions.insert(
            f.name.clone(),
            FunctionEntry {
                host,
                degree: f.degree,
                per_chart,
            },
        );
        Ok(())
    }

    /// Renders the workspace back to canonical declaration text.
    pub fn print(&self) -> String {
        let mut decls = Vec::new();
        for (name, atlas) in &self.atlases {
            let charts = atlas
                .charts()
                .iter()
                .map(|c| dsl::ChartDecl {
                    name: c.name.clone(),
                    coords: c
                        .sig
                        .gens()
                        .iter()
                        .map(|g| (g.name.clone(), g.degree))
                        .collect(),
                    base: c.sig.coeff_symbols().names().to_vec(),
                })
                .collect();
            let mut seen = std::collections::BTreeSet::new();
            let mut overlaps = Vec::new();
            for (a, b) in atlas.overlaps() {
                let key = if a < b {
                    (a.clone(), b.clone())
                } else {
                    (b.clone(), a.clone())
                };
                if !seen.insert(key.clone()) {
                    continue;
                }
                let (a, b) = key;
                let fwd = atlas.transition(&a, &b).ok();
                let bwd = atlas.transition(&b, &a).ok();
                let render = |t: &Transition, chart: &str| -> Vec<(String, String)> {
                    let c = atlas.chart(chart).unwrap();
                    let mut out = Vec::new();
                    for s in c.sig.coeff_symbols().names() {
                        out.push((s.clone(), t.scalar_images[s].to_string()));
                    }
                    for g in c.sig.gens() {
                        out.push((g.name.clone(), t.graded_images[&g.name].to_string()));
                    }
                    out
                };
                overlaps.push(dsl::OverlapDecl {
                    a: a.clone(),
                    b: b.clone(),
                    forward: fwd.map(|t| render(t, &b)).unwrap_or_default(),
                    inverse: bwd.map(|t| render(t, &a)).unwrap_or_default(),
                });
            }
            let points = atlas
                .points()
                .iter()
                .map(|(pname, (chart, pt))| dsl::PointDecl {
                    name: pname.clone(),
                    chart: chart.clone(),
                    assigns: pt
                        .iter()
                        .map(|(k, v)| (k.clone(), gvb_core::scalar::poly::rat_to_string(v)))
                        .collect(),
                })
                .collect();
            decls.push(Decl::Manifold(dsl::ManifoldDecl {
                name: name.clone(),
                charts,
                overlaps,
                points,
            }));
        }
        for (name, b) in &self.bundles {
            decls.push(Decl::Bundle(dsl::BundleDecl {
                name: name.clone(),
                manifold: b.atlas.name.clone(),
                fiber: b.fiber.clone(),
                transitions: b
                    .transitions
                    .iter()
                    .map(|((a, bb), m)| (a.clone(), bb.clone(), m.render_entries()))
                    .collect(),
            }));
        }
        for (name, m) in &self.maps {
            decls.push(Decl::Map(dsl::MapDecl {
                name: name.clone(),
                from: m.source.name.clone(),
                to: m.target.name.clone(),
                charts: m
                    .assignments
                    .iter()
                    .map(|(src, dst)| {
                        let t = &m.pullbacks[src];
                        let dst_chart = m.target.chart(dst).unwrap();
                        let mut assigns = Vec::new();
                        for s in dst_chart.sig.coeff_symbols().names() {
                            assigns.push((s.clone(), t.scalar_images[s].to_string()));
                        }
                        for g in dst_chart.sig.gens() {
                            assigns
                                .push((g.name.clone(), t.graded_images[&g.name].to_string()));
                        }
                        (src.clone(), dst.clone(), assigns)
                    })
                    .collect(),
            }));
        }
        for (name, entry) in &self.morphisms {
            decls.push(Decl::Morphism(dsl::MorphismDecl {
                name: name.clone(),
                from: entry.from.clone(),
                to: entry.to.clone(),
                over: entry.morphism.base.as_ref().map(|b| b.name.clone()),
                matrices: entry
                    .morphism
                    .matrices
                    .iter()
                    .map(|(c, m)| (c.clone(), m.render_entries()))
                    .collect(),
            }));
        }
        for (name, (bundle, sec)) in &self.sections {
            decls.push(Decl::Section(dsl::SectionDecl {
                name: name.clone(),
                bundle: bundle.clone(),
                shift: sec.shift,
                components: sec
                    .components
                    .iter()
                    .map(|(c, v)| (c.clone(), v.iter().map(|f| f.to_string()).collect()))
                    .collect(),
            }));
        }
        for (name, f) in &self.functions {
            decls.push(Decl::Function(dsl::FunctionDecl {
                name: name.clone(),
                host: match &f.host {
                    FunctionHost::Manifold(m) => m.clone(),
                    FunctionHost::Bundle(b) => b.clone(),
                },
                degree: f.degree,
                exprs: f
                    .per_chart
                    .iter()
                    .map(|(c, g)| (c.clone(), g.to_string()))
                    .collect(),
            }));
        }
        dsl::print_decls(&decls)
    }
}

/// Parses a `--point x=0,y=1/2` style assignment list.
pub fn parse_point_flag(text: &str) -> WsResult<Point> {
    let mut out = Point::new();
    for part in text.split(',') {
        let mut it = part.splitn(2, '=');
        let name = it
            .next()
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .ok_or_else(|| WsError(format!("bad point assignment `{part}`")))?;
        let value = it
            .next()
            .ok_or_else(|| WsError(format!("bad point assignment `{part}`")))?;
        out.insert(name.to_string(), parse_rat(value)?);
    }
    Ok(out)
}
