//! Command-line front end: parses `.gvb` declaration files, dispatches
//! kernel operations, and emits deterministic JSON or text reports.
//!
//! Exit codes: 0 all checks pass, 1 a check failed, 2 input error.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use gvb_core::geometry::{
    dual_bundle, pullback_bundle, shift_bundle, tangent_bundle, tensor_bundle, Bundle, Point,
};
use gvb_core::grading::GradedDimension;
use gvb_core::report::Report;
use gvb_core::scalar::poly::rat_to_string;
use gvb_core::sections::{
    exterior_derivative, global_function_check, section_check, section_value,
    section_value_compatible, GlobalFunction,
};

use gvb_cli::workspace::{parse_point_flag, FunctionHost, Workspace, WsError};

#[derive(Parser)]
#[command(name = "gvb", about = "Exact kernel for graded manifolds and vector bundles")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, ValueEnum)]
enum Format {
    Json,
    Text,
}

#[derive(Args)]
struct Common {
    /// Input declaration file (.gvb)
    file: PathBuf,
    /// Truncation weight for all series
    #[arg(long, default_value_t = 8)]
    weight: u32,
    /// Report format
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Subcommand)]
enum Command {
    /// Verify that overlap transitions compose to the identity
    CheckAtlas {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        manifold: Option<String>,
    },
    /// Verify bundle transition pair and triple conditions
    CheckCocycle {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        bundle: Option<String>,
    },
    /// Construct the tangent bundle from graded Jacobians
    Tangent {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        manifold: Option<String>,
    },
    /// Construct the dual bundle
    Dual {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        bundle: Option<String>,
    },
    /// Construct a tensor product bundle
    Tensor {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        left: Option<String>,
        #[arg(long)]
        right: Option<String>,
    },
    /// Construct a degree-shifted bundle
    Shift {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        bundle: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        by: i64,
    },
    /// Construct a pullback bundle along a declared map
    Pullback {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        bundle: Option<String>,
        #[arg(long)]
        map: Option<String>,
    },
    /// Invert bundle transition matrices through the truncation weight
    Invert {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        bundle: Option<String>,
        /// Restrict to one ordered overlap: --overlap A B
        #[arg(long, num_args = 2)]
        overlap: Option<Vec<String>>,
    },
    /// Verify morphism overlap compatibility
    CheckMorphism {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        morphism: Option<String>,
    },
    /// Evaluate fiber maps at sample points and classify them
    Classify {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        morphism: Option<String>,
        #[arg(long)]
        chart: Option<String>,
        /// Sample point, e.g. --point x=0 (repeatable)
        #[arg(long)]
        point: Vec<String>,
    },
    /// Verify section overlap compatibility
    CheckSection {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        section: Option<String>,
    },
    /// Evaluate a section at a base point
    Value {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        section: Option<String>,
        #[arg(long)]
        chart: Option<String>,
        #[arg(long)]
        point: Option<String>,
        /// Use a named point declared in the manifold
        #[arg(long)]
        at: Option<String>,
    },
    /// Fiber-weight analysis and the formal homothety identity
    EulerCheck {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        function: Option<String>,
    },
    /// Exterior derivative of a base function, checked on the cotangent bundle
    Derive {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        function: Option<String>,
    },
}

type Runner<'a> = Box<dyn FnOnce(&Workspace) -> Result<(Report, Value), WsError> + 'a>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (common, runner): (&Common, Runner) = match &cli.command {
        Command::CheckAtlas { common, manifold } => {
            (common, Box::new(move |w| cmd_check_atlas(w, manifold)))
        }
        Command::CheckCocycle { common, bundle } => {
            (common, Box::new(move |w| cmd_check_cocycle(w, bundle)))
        }
        Command::Tangent { common, manifold } => {
            (common, Box::new(move |w| cmd_tangent(w, manifold)))
        }
        Command::Dual { common, bundle } => (common, Box::new(move |w| cmd_dual(w, bundle))),
        Command::Tensor {
            common,
            left,
            right,
        } => (common, Box::new(move |w| cmd_tensor(w, left, right))),
        Command::Shift { common, bundle, by } => {
            let by = *by;
            (common, Box::new(move |w| cmd_shift(w, bundle, by)))
        }
        Command::Pullback {
            common,
            bundle,
            map,
        } => (common, Box::new(move |w| cmd_pullback(w, bundle, map))),
        Command::Invert {
            common,
            bundle,
            overlap,
        } => (common, Box::new(move |w| cmd_invert(w, bundle, overlap))),
        Command::CheckMorphism { common, morphism } => {
            (common, Box::new(move |w| cmd_check_morphism(w, morphism)))
        }
        Command::Classify {
            common,
            morphism,
            chart,
            point,
        } => (
            common,
            Box::new(move |w| cmd_classify(w, morphism, chart, point)),
        ),
        Command::CheckSection { common, section } => {
            (common, Box::new(move |w| cmd_check_section(w, section)))
        }
        Command::Value {
            common,
            section,
            chart,
            point,
            at,
        } => (
            common,
            Box::new(move |w| cmd_value(w, section, chart, point, at)),
        ),
        Command::EulerCheck { common, function } => {
            (common, Box::new(move |w| cmd_euler(w, function)))
        }
        Command::Derive { common, function } => {
            (common, Box::new(move |w| cmd_derive(w, function)))
        }
    };
    let name = command_name(&cli.command);
    let text = match std::fs::read_to_string(&common.file) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", common.file.display());
            return ExitCode::from(2);
        }
    };
    let wsp = match Workspace::load(&text, common.weight) {
        Ok(w) => w,
        Err(e) => {
            eprintln!("error: {}: {e}", common.file.display());
            return ExitCode::from(2);
        }
    };
    match runner(&wsp) {
        Ok((report, data)) => {
            let pass = report.passed();
            emit(name, common, &report, data);
            if pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::CheckAtlas { .. } => "check-atlas",
        Command::CheckCocycle { .. } => "check-cocycle",
        Command::Tangent { .. } => "tangent",
        Command::Dual { .. } => "dual",
        Command::Tensor { .. } => "tensor",
        Command::Shift { .. } => "shift",
        Command::Pullback { .. } => "pullback",
        Command::Invert { .. } => "invert",
        Command::CheckMorphism { .. } => "check-morphism",
        Command::Classify { .. } => "classify",
        Command::CheckSection { .. } => "check-section",
        Command::Value { .. } => "value",
        Command::EulerCheck { .. } => "euler-check",
        Command::Derive { .. } => "derive",
    }
}

fn emit(name: &str, common: &Common, report: &Report, data: Value) {
    let checks: Vec<Value> = report
        .checks
        .iter()
        .map(|c| {
            json!({
                "name": c.name,
                "pass": c.pass,
                "residual": c.residual,
            })
        })
        .collect();
    let out = json!({
        "command": name,
        "weight": common.weight,
        "checks": checks,
        "warnings": report.warnings,
        "data": data,
    });
    match common.format {
        Format::Json => println!("{}", serde_json::to_string_pretty(&out).unwrap()),
        Format::Text => {
            println!("command: {name} (weight {})", common.weight);
            for c in &report.checks {
                if c.pass {
                    println!("PASS {}", c.name);
                } else {
                    println!(
                        "FAIL {}: {}",
                        c.name,
                        c.residual.as_deref().unwrap_or("(no residual)")
                    );
                }
            }
            for w in &report.warnings {
                println!("WARN {w}");
            }
            println!("data: {}", serde_json::to_string_pretty(&data).unwrap());
        }
    }
}

fn pick<'a, T>(
    map: &'a BTreeMap<String, T>,
    name: &Option<String>,
    kind: &str,
) -> Result<Vec<(&'a String, &'a T)>, WsError> {
    match name {
        Some(n) => map
            .get_key_value(n)
            .map(|kv| vec![kv])
            .ok_or_else(|| WsError(format!("unknown {kind} `{n}`"))),
        None => {
            if map.is_empty() {
                Err(WsError(format!("no {kind} declared in the file")))
            } else {
                Ok(map.iter().collect())
            }
        }
    }
}

fn gdim_json(d: &GradedDimension) -> Value {
    d.to_json()
}

fn bundle_json(b: &Bundle) -> Value {
    let fiber: Vec<Value> = b
        .fiber
        .iter()
        .map(|(n, d)| json!({"name": n, "degree": d}))
        .collect();
    let mut transitions = serde_json::Map::new();
    for ((a, c), m) in &b.transitions {
        transitions.insert(format!("{a}->{c}"), json!(m.render_entries()));
    }
    json!({
        "name": b.name,
        "manifold": b.atlas.name,
        "rank": gdim_json(&b.rank()),
        "fiber": fiber,
        "transitions": Value::Object(transitions),
    })
}

fn cmd_check_atlas(w: &Workspace, manifold: &Option<String>) -> Result<(Report, Value), WsError> {
    let mut report = Report::new();
    let mut data = serde_json::Map::new();
    for (name, atlas) in pick(&w.atlases, manifold, "manifold")? {
        let r = atlas.atlas_check(w.weight)?;
        report.merge(r);
        data.insert(
            name.clone(),
            json!({"dimension": gdim_json(&atlas.dimension())}),
        );
    }
    Ok((report, Value::Object(data)))
}

fn cmd_check_cocycle(w: &Workspace, bundle: &Option<String>) -> Result<(Report, Value), WsError> {
    let mut report = Report::new();
    let mut data = serde_json::Map::new();
    for (name, b) in pick(&w.bundles, bundle, "bundle")? {
        let r = b.cocycle_check(w.weight, None)?;
        report.merge(r);
        data.insert(name.clone(), json!({"rank": gdim_json(&b.rank())}));
    }
    Ok((report, Value::Object(data)))
}

fn cmd_tangent(w: &Workspace, manifold: &Option<String>) -> Result<(Report, Value), WsError> {
    let mut report = Report::new();
    let mut data = serde_json::Map::new();
    for (name, atlas) in pick(&w.atlases, manifold, "manifold")? {
        let pre = atlas.atlas_check(w.weight)?;
        let ok = pre.passed();
        report.merge(pre);
        if !ok {
            report.fail(
                format!("tangent({name}): atlas precondition"),
                "atlas check failed",
            );
            continue;
        }
        let t = tangent_bundle(atlas, w.weight)?;
        report.merge(t.cocycle_check(w.weight, None)?);
        data.insert(name.clone(), bundle_json(&t));
    }
    Ok((report, Value::Object(data)))
}

fn cmd_dual(w: &Workspace, bundle: &Option<String>) -> Result<(Report, Value), WsError> {
    let mut report = Report::new();
    let mut data = serde_json::Map::new();
    for (name, b) in pick(&w.bundles, bundle, "bundle")? {
        let d = dual_bundle(b, w.weight)?;
        report.merge(d.cocycle_check(w.weight, None)?);
        data.insert(name.clone(), bundle_json(&d));
    }
    Ok((report, Value::Object(data)))
}

fn cmd_tensor(
    w: &Workspace,
    left: &Option<String>,
    right: &Option<String>,
) -> Result<(Report, Value), WsError> {
    let pick_one = |sel: &Option<String>, fallback: usize| -> Result<&Bundle, WsError> {
        match sel {
            Some(n) => w
                .bundles
                .get(n)
                .ok_or_else(|| WsError(format!("unknown bundle `{n}`"))),
            None => {
                let names: Vec<&String> = w.bundles.keys().collect();
                match names.len() {
                    0 => Err(WsError("no bundle declared in the file".into())),
                    1 => Ok(&w.bundles[names[0]]),
                    2 => Ok(&w.bundles[names[fallback]]),
                    _ => Err(WsError(
                        "several bundles declared; use --left and --right".into(),
                    )),
                }
            }
        }
    };
    let l = pick_one(left, 0)?;
    let r = pick_one(right, 1)?;
    let t = tensor_bundle(l, r, w.weight)?;
    let mut report = Report::new();
    report.merge(t.cocycle_check(w.weight, None)?);
    report.record(
        "tensor rank is the convolution of the factor ranks",
        t.rank() == l.rank().convolve(&r.rank()),
        None,
    );
    let data = bundle_json(&t);
    Ok((report, data))
}

fn cmd_shift(w: &Workspace, bundle: &Option<String>, by: i64) -> Result<(Report, Value), WsError> {
    let mut report = Report::new();
    let mut data = serde_json::Map::new();
    for (name, b) in pick(&w.bundles, bundle, "bundle")? {
        let s = shift_bundle(b, by)?;
        report.merge(s.cocycle_check(w.weight, None)?);
        report.record(
            format!("shift({name},{by}): rank shifts accordingly"),
            s.rank() == b.rank().shift(by),
            None,
        );
        data.insert(name.clone(), bundle_json(&s));
    }
    Ok((report, Value::Object(data)))
}

fn cmd_pullback(
    w: &Workspace,
    bundle: &Option<String>,
    map: &Option<String>,
) -> Result<(Report, Value), WsError> {
    let picked_map = match map {
        Some(n) => w
            .maps
            .get(n)
            .ok_or_else(|| WsError(format!("unknown map `{n}`")))?,
        None => {
            let mut it = w.maps.values();
            let first = it
                .next()
                .ok_or_else(|| WsError("no map declared in the file".into()))?;
            if it.next().is_some() {
                return Err(WsError("several maps declared; use --map".into()));
            }
            first
        }
    };
    let mut report = Report::new();
    report.merge(picked_map.check(w.weight)?);
    let mut data = serde_json::Map::new();
    for (name, b) in pick(&w.bundles, bundle, "bundle")? {
        if b.atlas.name != picked_map.target.name {
            continue;
        }
        let p = pullback_bundle(b, picked_map, w.weight)?;
        report.merge(p.cocycle_check(w.weight, None)?);
        report.record(
            format!("pullback({name}): rank preserved"),
            p.rank() == b.rank(),
            None,
        );
        data.insert(name.clone(), bundle_json(&p));
    }
    if data.is_empty() {
        return Err(WsError(
            "no declared bundle lives over the map's target manifold".into(),
        ));
    }
    Ok((report, Value::Object(data)))
}

fn cmd_invert(
    w: &Workspace,
    bundle: &Option<String>,
    overlap: &Option<Vec<String>>,
) -> Result<(Report, Value), WsError> {
    let mut report = Report::new();
    let mut data = serde_json::Map::new();
    for (name, b) in pick(&w.bundles, bundle, "bundle")? {
        let keys: Vec<(String, String)> = match overlap {
            Some(v) if v.len() == 2 => vec![(v[0].clone(), v[1].clone())],
            _ => b.transitions.keys().cloned().collect(),
        };
        for (a, c) in keys {
            let t = b.transition(&a, &c)?;
            let anchors = b.atlas.anchors_in(&a);
            match t.invert(w.weight, &anchors) {
                Err(e) => {
                    report.fail(format!("invert({name},{a},{c})"), e.to_string());
                }
                Ok(g) => {
                    let id = gvb_core::matrix::GradedMatrix::identity(
                        b.atlas.chart(&a)?.sig.clone(),
                        b.fiber_degrees(),
                        g.max_weight(),
                    );
                    let fg = t.mul(&g)?.sub(&id)?;
                    let gf = g.mul(t)?.sub(&id)?;
                    report.record(
                        format!("invert({name},{a},{c}): F G = 1"),
                        fg.is_zero(),
                        None,
                    );
                    report.record(
                        format!("invert({name},{a},{c}): G F = 1"),
                        gf.is_zero(),
                        None,
                    );
                    data.insert(format!("{name}:{a}->{c}"), json!(g.render_entries()));
                }
            }
        }
    }
    Ok((report, Value::Object(data)))
}

fn cmd_check_morphism(
    w: &Workspace,
    morphism: &Option<String>,
) -> Result<(Report, Value), WsError> {
    let mut report = Report::new();
    let mut data = serde_json::Map::new();
    for (name, entry) in pick(&w.morphisms, morphism, "morphism")? {
        let e = w
            .bundles
            .get(&entry.from)
            .ok_or_else(|| WsError(format!("unknown bundle `{}`", entry.from)))?;
        let f = w
            .bundles
            .get(&entry.to)
            .ok_or_else(|| WsError(format!("unknown bundle `{}`", entry.to)))?;
        report.merge(entry.morphism.check(e, f, w.weight)?);
        data.insert(name.clone(), json!({"from": entry.from, "to": entry.to}));
    }
    Ok((report, Value::Object(data)))
}

fn cmd_classify(
    w: &Workspace,
    morphism: &Option<String>,
    chart: &Option<String>,
    point_flags: &[String],
) -> Result<(Report, Value), WsError> {
    let mut report = Report::new();
    let mut data = serde_json::Map::new();
    for (name, entry) in pick(&w.morphisms, morphism, "morphism")? {
        let e = w
            .bundles
            .get(&entry.from)
            .ok_or_else(|| WsError(format!("unknown bundle `{}`", entry.from)))?;
        let chart_name = match chart {
            Some(c) => c.clone(),
            None => e.atlas.charts()[0].name.clone(),
        };
        let mut points: Vec<Point> = Vec::new();
        for p in point_flags {
            points.push(parse_point_flag(p)?);
        }
        if points.is_empty() {
            points = e.atlas.anchors_in(&chart_name);
        }
        if points.is_empty() {
            return Err(WsError(format!(
                "no sample points: pass --point or declare point blocks in chart {chart_name}"
            )));
        }
        let (classes, warnings) = entry.morphism.classify(&chart_name, &points, w.weight)?;
        for wmsg in warnings {
            report.warn(format!("{name}: {wmsg}"));
        }
        let mut per_point = Vec::new();
        for (p, c) in points.iter().zip(&classes) {
            let blocks: serde_json::Map<String, Value> = c
                .blocks
                .iter()
                .map(|(d, (rank, rows, cols))| {
                    (
                        d.to_string(),
                        json!({"rank": rank, "rows": rows, "cols": cols}),
                    )
                })
                .collect();
            per_point.push(json!({
                "point": gvb_core::scalar::format_point(p),
                "blocks": blocks,
                "rank": gdim_json(&c.rank),
                "injective": c.injective,
                "surjective": c.surjective,
                "iso": c.iso,
            }));
            report.pass(format!(
                "classify({name}) at {}",
                gvb_core::scalar::format_point(p)
            ));
        }
        data.insert(
            name.clone(),
            json!({"chart": chart_name, "points": per_point}),
        );
    }
    Ok((report, Value::Object(data)))
}

fn cmd_check_section(
    w: &Workspace,
    section: &Option<String>,
) -> Result<(Report, Value), WsError> {
    let mut report = Report::new();
    let mut data = serde_json::Map::new();
    for (name, (bundle_name, sec)) in pick(&w.sections, section, "section")? {
        let b = w
            .bundles
            .get(bundle_name)
            .ok_or_else(|| WsError(format!("unknown bundle `{bundle_name}`")))?;
        report.merge(section_check(b, sec, w.weight)?);
        data.insert(
            name.clone(),
            json!({"bundle": bundle_name, "shift": sec.shift}),
        );
    }
    Ok((report, Value::Object(data)))
}

fn cmd_value(
    w: &Workspace,
    section: &Option<String>,
    chart: &Option<String>,
    point: &Option<String>,
    at: &Option<String>,
) -> Result<(Report, Value), WsError> {
    let mut report = Report::new();
    let mut data = serde_json::Map::new();
    for (name, (bundle_name, sec)) in pick(&w.sections, section, "section")? {
        let b = w
            .bundles
            .get(bundle_name)
            .ok_or_else(|| WsError(format!("unknown bundle `{bundle_name}`")))?;
        let (chart_name, pt): (String, Point) = match (at, point) {
            (Some(pn), _) => {
                let (c, p) = b
                    .atlas
                    .points()
                    .get(pn)
                    .ok_or_else(|| WsError(format!("unknown point `{pn}`")))?
                    .clone();
                (c, p)
            }
            (None, Some(p)) => {
                let c = chart
                    .clone()
                    .unwrap_or_else(|| b.atlas.charts()[0].name.clone());
                (c, parse_point_flag(p)?)
            }
            (None, None) => {
                return Err(WsError("pass --point or --at".into()));
            }
        };
        let v = section_value(b, sec, &chart_name, &pt)?;
        let values: serde_json::Map<String, Value> = v
            .iter()
            .map(|(k, r)| (k.clone(), Value::String(rat_to_string(r))))
            .collect();
        for other in b.atlas.charts() {
            if other.name == chart_name {
                continue;
            }
            if b.atlas.transition(&chart_name, &other.name).is_ok() {
                let ok = section_value_compatible(b, sec, &chart_name, &other.name, &pt)?;
                report.record(
                    format!("value({name}): chart-independent against {}", other.name),
                    ok,
                    None,
                );
            }
        }
        data.insert(
            name.clone(),
            json!({"chart": chart_name, "point": gvb_core::scalar::format_point(&pt), "values": values}),
        );
    }
    Ok((report, Value::Object(data)))
}

fn cmd_euler(w: &Workspace, function: &Option<String>) -> Result<(Report, Value), WsError> {
    let mut report = Report::new();
    let mut data = serde_json::Map::new();
    for (name, entry) in pick(&w.functions, function, "function")? {
        let FunctionHost::Bundle(_) = &entry.host else {
            continue;
        };
        let mut linear = true;
        let mut parts_json = serde_json::Map::new();
        for (chart, f) in &entry.per_chart {
            linear = linear && f.is_fiber_linear();
            let parts = f.fiber_weight_parts();
            let mut sum =
                gvb_core::series::GradedFunction::zero(f.sig().clone(), f.degree(), f.max_weight());
            let mut chart_parts = serde_json::Map::new();
            for (weight, part) in &parts {
                chart_parts.insert(weight.to_string(), Value::String(part.to_string()));
                sum = if sum.is_zero() {
                    part.clone()
                } else {
                    sum.add(part)?
                };
            }
            let resid = f.sub(&sum)?;
            report.record(
                format!("euler({name},{chart}): parts sum to the function"),
                resid.is_zero(),
                if resid.is_zero() {
                    None
                } else {
                    Some(resid.to_string())
                },
            );
            // Formal homothety: scaling every fiber generator by a fresh
            // symbol reproduces the weight decomposition coefficientwise.
            let scaled = f.homothety_scaled("lam")?;
            let ext = scaled.sig().clone();
            let lam = gvb_core::scalar::CoeffExpr::symbol(ext.coeff_symbols().clone(), "lam")?;
            let mut expect =
                gvb_core::series::GradedFunction::zero(ext.clone(), f.degree(), f.max_weight());
            for (weight, part) in &parts {
                let mut gen_images = BTreeMap::new();
                for g in part.sig().gens() {
                    gen_images.insert(
                        g.name.clone(),
                        gvb_core::series::GradedFunction::generator(
                            ext.clone(),
                            &g.name,
                            f.max_weight(),
                        )?,
                    );
                }
                let mut coeff_images = BTreeMap::new();
                for s in part.sig().coeff_symbols().names() {
                    coeff_images.insert(
                        s.clone(),
                        gvb_core::scalar::CoeffExpr::symbol(ext.coeff_symbols().clone(), s)?,
                    );
                }
                let lifted = part.substitute(&gen_images, &coeff_images, &ext)?;
                let term = lifted.scale(&lam.pow(*weight))?;
                expect = if expect.is_zero() {
                    term
                } else {
                    expect.add(&term)?
                };
            }
            let hresid = scaled.sub(&expect)?;
            report.record(
                format!("euler({name},{chart}): homothety scaling identity"),
                hresid.is_zero(),
                if hresid.is_zero() {
                    None
                } else {
                    Some(hresid.to_string())
                },
            );
            parts_json.insert(chart.clone(), Value::Object(chart_parts));
        }
        data.insert(
            name.clone(),
            json!({"linear": linear, "parts": Value::Object(parts_json)}),
        );
    }
    if data.is_empty() {
        return Err(WsError(
            "no bundle-hosted function declared (euler-check needs fiber coordinates)".into(),
        ));
    }
    Ok((report, Value::Object(data)))
}

fn cmd_derive(w: &Workspace, function: &Option<String>) -> Result<(Report, Value), WsError> {
    let mut report = Report::new();
    let mut data = serde_json::Map::new();
    for (name, entry) in pick(&w.functions, function, "function")? {
        let FunctionHost::Manifold(mname) = &entry.host else {
            continue;
        };
        let atlas = w
            .atlases
            .get(mname)
            .ok_or_else(|| WsError(format!("unknown manifold `{mname}`")))?;
        let pre = atlas.atlas_check(w.weight)?;
        let ok = pre.passed();
        report.merge(pre);
        if !ok {
            continue;
        }
        let f: GlobalFunction = entry.per_chart.clone();
        report.merge(global_function_check(atlas, &f, w.weight)?);
        let tangent = tangent_bundle(atlas, w.weight)?;
        let cotangent = dual_bundle(&tangent, w.weight)?;
        let df = exterior_derivative(atlas, &cotangent, &f, entry.degree, w.weight)?;
        report.merge(section_check(&cotangent, &df, w.weight)?);
        let comps: serde_json::Map<String, Value> = df
            .components
            .iter()
            .map(|(c, v)| {
                (
                    c.clone(),
                    Value::Array(v.iter().map(|g| Value::String(g.to_string())).collect()),
                )
            })
            .collect();
        data.insert(
            name.clone(),
            json!({"shift": df.shift, "components": Value::Object(comps)}),
        );
    }
    if data.is_empty() {
        return Err(WsError(
            "no manifold-hosted function declared (derive needs a base function)".into(),
        ));
    }
    Ok((report, Value::Object(data)))
}
