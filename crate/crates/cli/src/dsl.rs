//! The `.gvb` declaration language: parser and canonical printer.
//!
//! ```text
//! manifold <name> {
//!   chart <name> { coords: <id>:<degree>, ... ; base: <id>, ... }
//!   overlap <A> <B> { <coord> = <expr> ; ... | inverse: <coord> = <expr> ; ... }
//!   point <name> in <chart> { <id> = <rational>, ... }
//! }
//! bundle <name> over <manifold> {
//!   fiber: <id>:<degree>, ... ;
//!   transition <A> <B> = [[<expr>, ...], ...]
//! }
//! map <name> from <M> to <N> { <chart> -> <chart> { <coord> = <expr> ; ... } ... }
//! morphism <name> from <E> to <F> [over <map>] { matrix <chart> = [[...]] ... }
//! section <name> of <E> shift <int> { <chart>: [<expr>, ...] ... }
//! function <name> on <manifold|bundle> degree <int> { <chart>: <expr> ; ... }
//! ```
//!
//! `#` starts a comment; layout is whitespace-insensitive. Expressions use
//! the shared term grammar and may mention chart coordinates and (for
//! bundle-hosted functions) fiber coordinates.

use std::fmt::Write as _;

#[derive(Debug, Clone, PartialEq)]
pub struct Pos {
    pub line: usize,
    pub col: usize,
}

#[derive(Debug)]
pub struct DslError {
    pub pos: Pos,
    pub msg: String,
}

impl std::fmt::Display for DslError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}: {}", self.pos.line, self.pos.col, self.msg)
    }
}

pub type DslResult<T> = Result<T, DslError>;

#[derive(Debug, Clone)]
pub struct ChartDecl {
    pub name: String,
    pub coords: Vec<(String, i64)>,
    pub base: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct OverlapDecl {
    pub a: String,
    pub b: String,
    pub forward: Vec<(String, String)>,
    pub inverse: Vec<(String, String)>,
}

#[derive(Debug, Clone)]
pub struct PointDecl {
    pub name: String,
    pub chart: String,
    pub assigns: Vec<(String, String)>,
}

#[derive(Debug, Clone)]
pub struct ManifoldDecl {
    pub name: String,
    pub charts: Vec<ChartDecl>,
    pub overlaps: Vec<OverlapDecl>,
    pub points: Vec<PointDecl>,
}

#[derive(Debug, Clone)]
pub struct BundleDecl {
    pub name: String,
    pub manifold: String,
    pub fiber: Vec<(String, i64)>,
    pub transitions: Vec<(String, String, Vec<Vec<String>>)>,
}

#[derive(Debug, Clone)]
pub struct MapDecl {
    pub name: String,
    pub from: String,
    pub to: String,
    pub charts: Vec<(String, String, Vec<(String, String)>)>,
}

#[derive(Debug, Clone)]
pub struct MorphismDecl {
    pub name: String,
    pub from: String,
    pub to: String,
    pub over: Option<String>,
    pub matrices: Vec<(String, Vec<Vec<String>>)>,
}

#[derive(Debug, Clone)]
pub struct SectionDecl {
    pub name: String,
    pub bundle: String,
    pub shift: i64,
    pub components: Vec<(String, Vec<String>)>,
}

#[derive(Debug, Clone)]
pub struct FunctionDecl {
    pub name: String,
    pub host: String,
    pub degree: i64,
    pub exprs: Vec<(String, String)>,
}

#[derive(Debug, Clone)]
pub enum Decl {
    Manifold(ManifoldDecl),
    Bundle(BundleDecl),
    Map(MapDecl),
    Morphism(MorphismDecl),
    Section(SectionDecl),
    Function(FunctionDecl),
}

struct Lexer<'a> {
    text: &'a [u8],
    pos: usize,
    line: usize,
    col: usize,
}

impl<'a> Lexer<'a> {
    fn new(text: &'a str) -> Self {
        Lexer {
            text: text.as_bytes(),
            pos: 0,
            line: 1,
            col: 1,
        }
    }

    fn here(&self) -> Pos {
        Pos {
            line: self.line,
            col: self.col,
        }
    }

    fn bump(&mut self) -> Option<u8> {
        let c = self.text.get(self.pos).copied()?;
        self.pos += 1;
        if c == b'\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn peek(&self) -> Option<u8> {
        self.text.get(self.pos).copied()
    }

    fn skip_ws(&mut self) {
        loop {
            match self.peek() {
                Some(b' ') | Some(b'\t') | Some(b'\r') | Some(b'\n') => {
                    self.bump();
                }
                Some(b'#') => {
                    while let Some(c) = self.bump() {
                        if c == b'\n' {
                            break;
                        }
                    }
                }
                _ => return,
            }
        }
    }

    fn err<T>(&self, msg: impl Into<String>) -> DslResult<T> {
        Err(DslError {
            pos: self.here(),
            msg: msg.into(),
        })
    }

    fn ident(&mut self) -> DslResult<String> {
        self.skip_ws();
        let start = self.pos;
        match self.peek() {
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => {}
            _ => return self.err("expected identifier"),
        }
        while let Some(c) = self.peek() {
            if c.is_ascii_alphanumeric() || c == b'_' {
                self.bump();
            } else {
                break;
            }
        }
        Ok(std::str::from_utf8(&self.text[start..self.pos])
            .unwrap()
            .to_string())
    }

    fn keyword(&mut self, kw: &str) -> DslResult<()> {
        let p = self.here();
        let got = self.ident()?;
        if got == kw {
            Ok(())
        } else {
            Err(DslError {
                pos: p,
                msg: format!("expected `{kw}`, found `{got}`"),
            })
        }
    }

    fn punct(&mut self, c: u8) -> DslResult<()> {
        self.skip_ws();
        if self.peek() == Some(c) {
            self.bump();
            Ok(())
        } else {
            self.err(format!("expected `{}`", c as char))
        }
    }

    fn try_punct(&mut self, c: u8) -> bool {
        self.skip_ws();
        if self.peek() == Some(c) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn integer(&mut self) -> DslResult<i64> {
        self.skip_ws();
        let neg = self.try_punct(b'-');
        let start = self.pos;
        while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
            self.bump();
        }
        if start == self.pos {
            return self.err("expected integer");
        }
        let v: i64 = std::str::from_utf8(&self.text[start..self.pos])
            .unwrap()
            .parse()
            .map_err(|_| DslError {
                pos: self.here(),
                msg: "integer out of range".into(),
            })?;
        Ok(if neg { -v } else { v })
    }

    /// Raw expression text up to a top-level terminator (one of `;,]}|`),
    /// respecting parenthesis depth.
    fn expr_text(&mut self) -> DslResult<String> {
        self.skip_ws();
        let start = self.pos;
        let mut depth = 0usize;
        loop {
            match self.peek() {
                None => break,
                Some(b'(') => {
                    depth += 1;
                    self.bump();
                }
                Some(b')') => {
                    if depth == 0 {
                        break;
                    }
                    depth -= 1;
                    self.bump();
                }
                Some(b';') | Some(b',') | Some(b']') | Some(b'}') | Some(b'|')
                    if depth == 0 =>
                {
                    break
                }
                Some(b'#') => break,
                Some(_) => {
                    self.bump();
                }
            }
        }
        let s = std::str::from_utf8(&self.text[start..self.pos])
            .unwrap()
            .trim()
            .to_string();
        if s.is_empty() {
            return self.err("expected expression");
        }
        Ok(s)
    }

    fn peek_ident(&mut self) -> Option<String> {
        self.skip_ws();
        let save = (self.pos, self.line, self.col);
        let id = self.ident().ok();
        self.pos = save.0;
        self.line = save.1;
        self.col = save.2;
        id
    }
}

fn parse_assignments(lx: &mut Lexer, stop_at_pipe: bool) -> DslResult<Vec<(String, String)>> {
    let mut out = Vec::new();
    loop {
        lx.skip_ws();
        match lx.peek() {
            Some(b'}') => break,
            Some(b'|') if stop_at_pipe => break,
            None => return lx.err("unexpected end of input in block"),
            _ => {}
        }
        let name = lx.ident()?;
        lx.punct(b'=')?;
        let expr = lx.expr_text()?;
        out.push((name, expr));
        // optional separators
        while lx.try_punct(b';') || lx.try_punct(b',') {}
    }
    Ok(out)
}

fn parse_matrix(lx: &mut Lexer) -> DslResult<Vec<Vec<String>>> {
    lx.punct(b'[')?;
    let mut rows = Vec::new();
    loop {
        lx.punct(b'[')?;
        let mut row = Vec::new();
        loop {
            row.push(lx.expr_text()?);
            if lx.try_punct(b',') {
                continue;
            }
            lx.punct(b']')?;
            break;
        }
        rows.push(row);
        if lx.try_punct(b',') {
            continue;
        }
        lx.punct(b']')?;
        break;
    }
    Ok(rows)
}

fn parse_name_degree_list(lx: &mut Lexer) -> DslResult<Vec<(String, i64)>> {
    let mut out = Vec::new();
    loop {
        lx.skip_ws();
        match lx.peek() {
            Some(b';') | Some(b'}') | None => break,
            _ => {}
        }
        let name = lx.ident()?;
        lx.punct(b':')?;
        let deg = lx.integer()?;
        out.push((name, deg));
        if !lx.try_punct(b',') {
            break;
        }
    }
    Ok(out)
}

fn parse_chart(lx: &mut Lexer) -> DslResult<ChartDecl> {
    let name = lx.ident()?;
    lx.punct(b'{')?;
    let mut coords = Vec::new();
    let mut base = Vec::new();
    loop {
        lx.skip_ws();
        if lx.try_punct(b'}') {
            break;
        }
        let kw = lx.ident()?;
        lx.punct(b':')?;
        match kw.as_str() {
            "coords" => {
                coords = parse_name_degree_list(lx)?;
            }
            "base" => loop {
                lx.skip_ws();
                match lx.peek() {
                    Some(b';') | Some(b'}') | None => break,
                    _ => {}
                }
                base.push(lx.ident()?);
                if !lx.try_punct(b',') {
                    break;
                }
            },
            other => {
                return lx.err(format!("expected `coords` or `base`, found `{other}`"))
            }
        }
        let _ = lx.try_punct(b';');
    }
    Ok(ChartDecl { name, coords, base })
}

fn parse_manifold(lx: &mut Lexer) -> DslResult<ManifoldDecl> {
    let name = lx.ident()?;
    lx.punct(b'{')?;
    let mut charts = Vec::new();
    let mut overlaps = Vec::new();
    let mut points = Vec::new();
    loop {
        lx.skip_ws();
        if lx.try_punct(b'}') {
            break;
        }
        let kw = lx.ident()?;
        match kw.as_str() {
            "chart" => charts.push(parse_chart(lx)?),
            "overlap" => {
                let a = lx.ident()?;
                let b = lx.ident()?;
                lx.punct(b'{')?;
                let forward = parse_assignments(lx, true)?;
                let mut inverse = Vec::new();
                if lx.try_punct(b'|') {
                    lx.keyword("inverse")?;
                    lx.punct(b':')?;
                    inverse = parse_assignments(lx, false)?;
                }
                lx.punct(b'}')?;
                overlaps.push(OverlapDecl {
                    a,
                    b,
                    forward,
                    inverse,
                });
            }
            "point" => {
                let pname = lx.ident()?;
                lx.keyword("in")?;
                let chart = lx.ident()?;
                lx.punct(b'{')?;
                let assigns = parse_assignments(lx, false)?;
                lx.punct(b'}')?;
                points.push(PointDecl {
                    name: pname,
                    chart,
                    assigns,
                });
            }
            other => {
                return lx.err(format!(
                    "expected `chart`, `overlap` or `point`, found `{other}`"
                ))
            }
        }
    }
    Ok(ManifoldDecl {
        name,
        charts,
        overlaps,
        points,
    })
}

fn parse_bundle(lx: &mut Lexer) -> DslResult<BundleDecl> {
    let name = lx.ident()?;
    lx.keyword("over")?;
    let manifold = lx.ident()?;
    lx.punct(b'{')?;
    let mut fiber = Vec::new();
    let mut transitions = Vec::new();
    loop {
        lx.skip_ws();
        if lx.try_punct(b'}') {
            break;
        }
        let kw = lx.ident()?;
        match kw.as_str() {
            "fiber" => {
                lx.punct(b':')?;
                fiber = parse_name_degree_list(lx)?;
                let _ = lx.try_punct(b';');
            }
            "transition" => {
                let a = lx.ident()?;
                let b = lx.ident()?;
                lx.punct(b'=')?;
                let m = parse_matrix(lx)?;
                transitions.push((a, b, m));
                let _ = lx.try_punct(b';');
            }
            other => {
                return lx.err(format!(
                    "expected `fiber` or `transition`, found `{other}`"
                ))
            }
        }
    }
    Ok(BundleDecl {
        name,
        manifold,
        fiber,
        transitions,
    })
}

fn parse_map(lx: &mut Lexer) -> DslResult<MapDecl> {
    let name = lx.ident()?;
    lx.keyword("from")?;
    let from = lx.ident()?;
    lx.keyword("to")?;
    let to = lx.ident()?;
    lx.punct(b'{')?;
    let mut charts = Vec::new();
    loop {
        lx.skip_ws();
        if lx.try_punct(b'}') {
            break;
        }
        let src = lx.ident()?;
        lx.punct(b'-')?;
        lx.punct(b'>')?;
        let dst = lx.ident()?;
        lx.punct(b'{')?;
        let assigns = parse_assignments(lx, false)?;
        lx.punct(b'}')?;
        charts.push((src, dst, assigns));
    }
    Ok(MapDecl {
        name,
        from,
        to,
        charts,
    })
}

fn parse_morphism(lx: &mut Lexer) -> DslResult<MorphismDecl> {
    let name = lx.ident()?;
    lx.keyword("from")?;
    let from = lx.ident()?;
    lx.keyword("to")?;
    let to = lx.ident()?;
    let mut over = None;
    if lx.peek_ident().as_deref() == Some("over") {
        lx.keyword("over")?;
        over = Some(lx.ident()?);
    }
    lx.punct(b'{')?;
    let mut matrices = Vec::new();
    loop {
        lx.skip_ws();
        if lx.try_punct(b'}') {
            break;
        }
        lx.keyword("matrix")?;
        let chart = lx.ident()?;
        lx.punct(b'=')?;
        let m = parse_matrix(lx)?;
        matrices.push((chart, m));
        let _ = lx.try_punct(b';');
    }
    Ok(MorphismDecl {
        name,
        from,
        to,
        over,
        matrices,
    })
}

fn parse_section(lx: &mut Lexer) -> DslResult<SectionDecl> {
    let name = lx.ident()?;
    lx.keyword("of")?;
    let bundle = lx.ident()?;
    lx.keyword("shift")?;
    let shift = lx.integer()?;
    lx.punct(b'{')?;
    let mut components = Vec::new();
    loop {
        lx.skip_ws();
        if lx.try_punct(b'}') {
            break;
        }
        let chart = lx.ident()?;
        lx.punct(b':')?;
        lx.punct(b'[')?;
        let mut comps = Vec::new();
        loop {
            comps.push(lx.expr_text()?);
            if lx.try_punct(b',') {
                continue;
            }
            lx.punct(b']')?;
            break;
        }
        components.push((chart, comps));
        let _ = lx.try_punct(b';');
    }
    Ok(SectionDecl {
        name,
        bundle,
        shift,
        components,
    })
}

fn parse_function(lx: &mut Lexer) -> DslResult<FunctionDecl> {
    let name = lx.ident()?;
    lx.keyword("on")?;
    let host = lx.ident()?;
    lx.keyword("degree")?;
    let degree = lx.integer()?;
    lx.punct(b'{')?;
    let mut exprs = Vec::new();
    loop {
        lx.skip_ws();
        if lx.try_punct(b'}') {
            break;
        }
        let chart = lx.ident()?;
        lx.punct(b':')?;
        let e = lx.expr_text()?;
        exprs.push((chart, e));
        let _ = lx.try_punct(b';');
    }
    Ok(FunctionDecl {
        name,
        host,
        degree,
        exprs,
    })
}

pub fn parse_file(text: &str) -> DslResult<Vec<Decl>> {
    let mut lx = Lexer::new(text);
    let mut decls = Vec::new();
    loop {
        lx.skip_ws();
        if lx.peek().is_none() {
            break;
        }
        let kw = lx.ident()?;
        match kw.as_str() {
            "manifold" => decls.push(Decl::Manifold(parse_manifold(&mut lx)?)),
            "bundle" => decls.push(Decl::Bundle(parse_bundle(&mut lx)?)),
            "map" => decls.push(Decl::Map(parse_map(&mut lx)?)),
            "morphism" => decls.push(Decl::Morphism(parse_morphism(&mut lx)?)),
            "section" => decls.push(Decl::Section(parse_section(&mut lx)?)),
            "function" => decls.push(Decl::Function(parse_function(&mut lx)?)),
            other => {
                return lx.err(format!("unknown top-level declaration `{other}`"))
            }
        }
    }
    Ok(decls)
}

/// Canonical printer; `parse(print(parse(text)))` reproduces the same
/// declarations with all expressions in canonical form.
pub fn print_decls(decls: &[Decl]) -> String {
    let mut out = String::new();
    for d in decls {
        match d {
            Decl::Manifold(m) => {
                let _ = writeln!(out, "manifold {} {{", m.name);
                for c in &m.charts {
                    let coords: Vec<String> = c
                        .coords
                        .iter()
                        .map(|(n, d)| format!("{n}:{d}"))
                        .collect();
                    let _ = writeln!(
                        out,
                        "  chart {} {{ coords: {} ; base: {} }}",
                        c.name,
                        coords.join(", "),
                        c.base.join(", ")
                    );
                }
                for o in &m.overlaps {
                    let _ = writeln!(out, "  overlap {} {} {{", o.a, o.b);
                    for (n, e) in &o.forward {
                        let _ = writeln!(out, "    {n} = {e} ;");
                    }
                    if !o.inverse.is_empty() {
                        let _ = writeln!(out, "    | inverse:");
                        for (n, e) in &o.inverse {
                            let _ = writeln!(out, "    {n} = {e} ;");
                        }
                    }
                    let _ = writeln!(out, "  }}");
                }
                for p in &m.points {
                    let assigns: Vec<String> = p
                        .assigns
                        .iter()
                        .map(|(n, e)| format!("{n} = {e}"))
                        .collect();
                    let _ = writeln!(
                        out,
                        "  point {} in {} {{ {} }}",
                        p.name,
                        p.chart,
                        assigns.join(", ")
                    );
                }
                let _ = writeln!(out, "}}");
            }
            Decl::Bundle(b) => {
                let _ = writeln!(out, "bundle {} over {} {{", b.name, b.manifold);
                let fiber: Vec<String> =
                    b.fiber.iter().map(|(n, d)| format!("{n}:{d}")).collect();
                let _ = writeln!(out, "  fiber: {} ;", fiber.join(", "));
                for (a, bb, m) in &b.transitions {
                    let _ = writeln!(out, "  transition {a} {bb} = {}", fmt_matrix(m));
                }
                let _ = writeln!(out, "}}");
            }
            Decl::Map(m) => {
                let _ = writeln!(out, "map {} from {} to {} {{", m.name, m.from, m.to);
                for (src, dst, assigns) in &m.charts {
                    let _ = writeln!(out, "  {src} -> {dst} {{");
                    for (n, e) in assigns {
                        let _ = writeln!(out, "    {n} = {e} ;");
                    }
                    let _ = writeln!(out, "  }}");
                }
                let _ = writeln!(out, "}}");
            }
            Decl::Morphism(m) => {
                let over = match &m.over {
                    Some(o) => format!(" over {o}"),
                    None => String::new(),
                };
                let _ = writeln!(
                    out,
                    "morphism {} from {} to {}{} {{",
                    m.name, m.from, m.to, over
                );
                for (chart, mat) in &m.matrices {
                    let _ = writeln!(out, "  matrix {chart} = {}", fmt_matrix(mat));
                }
                let _ = writeln!(out, "}}");
            }
            Decl::Section(s) => {
                let _ = writeln!(
                    out,
                    "section {} of {} shift {} {{",
                    s.name, s.bundle, s.shift
                );
                for (chart, comps) in &s.components {
                    let _ = writeln!(out, "  {chart}: [{}]", comps.join(", "));
                }
                let _ = writeln!(out, "}}");
            }
            Decl::Function(f) => {
                let _ = writeln!(
                    out,
                    "function {} on {} degree {} {{",
                    f.name, f.host, f.degree
                );
                for (chart, e) in &f.exprs {
                    let _ = writeln!(out, "  {chart}: {e} ;");
                }
                let _ = writeln!(out, "}}");
            }
        }
    }
    out
}

fn fmt_matrix(m: &[Vec<String>]) -> String {
    let rows: Vec<String> = m.iter().map(|r| format!("[{}]", r.join(", "))).collect();
    format!("[{}]", rows.join(", "))
}
