//! Built-in geometries and the line-oriented geometry definition format.
//!
//! ```text
//! # comment
//! param k = 0.5
//! surface sph (u,v in [0.1,3.04]x[0,6.2]) = (sin(u)*cos(v), sin(u)*sin(v), cos(u))
//! metric hyp (x,y in [-5,5]x[0.1,10]) = [[1/y^2,0],[0,1/y^2]]
//! curve helix (t in [0,10]) = (cos(t), sin(t), k*t)
//! ```

pub mod expr;
pub mod hyperbolic;

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::Write as _;

use nalgebra::DMatrix;
use serde::Serialize;

pub use expr::{parse_expr, BinOp, Compiled, Expr, Func, ParseError};
pub use hyperbolic::{
    fit_semicircle, geodesic_through, hyperbolic_distance, hyperboloid_distance, hyperboloid_to_halfplane, invert,
    right_triangle, translate, HalfPlaneGeodesic,
};

use crate::curves::ParamCurve;
use crate::error::{GeomError, Result};
use crate::intrinsic::{pullback_metric, MetricChart, Provenance};
use crate::surface::SurfacePatch;
use expr::{lex_line, Cursor, Tok};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum GeometryKind {
    Curve,
    Surface,
    Metric,
}

impl GeometryKind {
    pub fn keyword(self) -> &'static str {
        match self {
            GeometryKind::Curve => "curve",
            GeometryKind::Surface => "surface",
            GeometryKind::Metric => "metric",
        }
    }
}

/// Description of a geometry: either a built-in with its parameters or a
/// parsed definition with its component expressions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeometrySpec {
    pub kind: GeometryKind,
    pub name: String,
    pub coords: Vec<String>,
    pub domain: Vec<(f64, f64)>,
    pub params: BTreeMap<String, f64>,
    /// Components (curves, surfaces) or row-major metric entries.
    pub components: Vec<Expr>,
    /// Set for built-ins; `components` is then empty.
    pub builtin: Option<String>,
}

impl GeometrySpec {
    /// Source text in the definition format (parsed specs only).
    pub fn to_source(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.params {
            let _ = writeln!(s, "param {k} = {v}");
        }
        let intervals: Vec<String> = self.domain.iter().map(|(a, b)| format!("[{},{}]", fmt_num(*a), fmt_num(*b))).collect();
        let _ = write!(
            s,
            "{} {} ({} in {}) = ",
            self.kind.keyword(),
            self.name,
            self.coords.join(","),
            intervals.join("x")
        );
        let comps: Vec<String> = self.components.iter().map(|e| e.to_string()).collect();
        match self.kind {
            GeometryKind::Metric => {
                let n = self.coords.len();
                let rows: Vec<String> = comps.chunks(n).map(|r| format!("[{}]", r.join(","))).collect();
                let _ = write!(s, "[{}]", rows.join(","));
            }
            _ => {
                let _ = write!(s, "({})", comps.join(", "));
            }
        }
        s.push('\n');
        s
    }
}

fn fmt_num(x: f64) -> String {
    format!("{x}")
}

/// A compiled geometry.
#[derive(Debug, Clone)]
pub enum Shape {
    Curve(ParamCurve),
    Surface(SurfacePatch),
    Metric(MetricChart),
}

#[derive(Debug, Clone)]
pub struct Geometry {
    pub spec: GeometrySpec,
    pub shape: Shape,
    pub warnings: Vec<String>,
}

impl Geometry {
    pub fn kind(&self) -> GeometryKind {
        self.spec.kind
    }

    pub fn curve(&self) -> Result<&ParamCurve> {
        match &self.shape {
            Shape::Curve(c) => Ok(c),
            _ => Err(GeomError::Precondition(format!("`{}` is not a curve", self.spec.name))),
        }
    }

    pub fn surface(&self) -> Result<&SurfacePatch> {
        match &self.shape {
            Shape::Surface(s) => Ok(s),
            _ => Err(GeomError::Precondition(format!("`{}` is not a surface", self.spec.name))),
        }
    }

    /// The metric chart: the pullback for surfaces.
    pub fn chart(&self) -> Result<MetricChart> {
        match &self.shape {
            Shape::Metric(m) => Ok(m.clone()),
            Shape::Surface(s) => pullback_metric(s),
            Shape::Curve(_) => Err(GeomError::Precondition(format!("`{}` is a curve, not a chart", self.spec.name))),
        }
    }
}

// ---------------------------------------------------------------------------
// parsing

fn reserved(name: &str) -> bool {
    matches!(name, "param" | "in" | "curve" | "surface" | "metric") || Func::from_name(name).is_some()
}

fn constants(params: &BTreeMap<String, f64>) -> BTreeMap<String, f64> {
    let mut c = BTreeMap::new();
    c.insert("pi".to_string(), PI);
    c.extend(params.iter().map(|(k, v)| (k.clone(), *v)));
    c
}

fn const_value(e: &Expr, consts: &BTreeMap<String, f64>, line: usize, column: usize) -> std::result::Result<f64, ParseError> {
    let v = e
        .compile(&[], consts)
        .map_err(|m| ParseError {
            line,
            column,
            message: m,
            expected: vec![],
        })?
        .eval(&[]);
    if !v.is_finite() {
        return Err(ParseError {
            line,
            column,
            message: "constant does not evaluate to a finite number".into(),
            expected: vec![],
        });
    }
    Ok(v)
}

/// Parses every definition in `text`.
pub fn parse_geometries(text: &str) -> std::result::Result<Vec<GeometrySpec>, ParseError> {
    let mut params = BTreeMap::new();
    let mut lines = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let toks = lex_line(raw, i + 1)?;
        if toks.len() == 1 {
            continue;
        }
        lines.push(toks);
    }
    // parameters first, in order, so definitions may use them anywhere
    let mut defs = Vec::new();
    for toks in lines {
        let mut c = Cursor::new(toks);
        match c.peek().tok.clone() {
            Tok::Ident(k) if k == "param" => {
                c.next();
                let (name, line, column) = c.expect_ident()?;
                if reserved(&name) || name == "pi" {
                    return Err(ParseError {
                        line,
                        column,
                        message: format!("`{name}` is reserved"),
                        expected: vec!["parameter name".into()],
                    });
                }
                if params.contains_key(&name) {
                    return Err(ParseError {
                        line,
                        column,
                        message: format!("parameter `{name}` defined twice"),
                        expected: vec![],
                    });
                }
                c.expect_sym('=')?;
                let consts = constants(&params);
                c.scope = Some(consts.keys().cloned().collect());
                let at = c.peek().clone();
                let e = c.expr()?;
                c.expect_end()?;
                params.insert(name, const_value(&e, &consts, at.line, at.column)?);
            }
            Tok::Ident(k) if k == "curve" || k == "surface" || k == "metric" => defs.push(c),
            _ => return Err(c.error(&["`param`", "`curve`", "`surface`", "`metric`"])),
        }
    }
    defs.into_iter().map(|c| parse_definition(c, &params)).collect()
}

/// Parses a text holding exactly one definition.
pub fn parse_geometry(text: &str) -> std::result::Result<GeometrySpec, ParseError> {
    let mut specs = parse_geometries(text)?;
    match specs.len() {
        1 => Ok(specs.remove(0)),
        n => Err(ParseError {
            line: 1,
            column: 1,
            message: format!("expected exactly one definition, found {n}"),
            expected: vec!["`curve`".into(), "`surface`".into(), "`metric`".into()],
        }),
    }
}

fn parse_definition(mut c: Cursor, params: &BTreeMap<String, f64>) -> std::result::Result<GeometrySpec, ParseError> {
    let kind = match c.next().tok {
        Tok::Ident(k) if k == "curve" => GeometryKind::Curve,
        Tok::Ident(k) if k == "surface" => GeometryKind::Surface,
        _ => GeometryKind::Metric,
    };
    let (name, ..) = c.expect_ident()?;
    c.expect_sym('(')?;
    let mut coords = Vec::new();
    loop {
        let (v, line, column) = c.expect_ident()?;
        if reserved(&v) || params.contains_key(&v) || v == "pi" || coords.contains(&v) {
            return Err(ParseError {
                line,
                column,
                message: format!("`{v}` cannot name a coordinate"),
                expected: vec!["fresh identifier".into()],
            });
        }
        coords.push(v);
        if !c.eat_sym(',') {
            break;
        }
    }
    let expected_dims: &[usize] = match kind {
        GeometryKind::Curve => &[1],
        GeometryKind::Surface => &[2],
        GeometryKind::Metric => &[2, 3],
    };
    if !expected_dims.contains(&coords.len()) {
        let t = c.peek();
        return Err(ParseError {
            line: t.line,
            column: t.column,
            message: format!("arity error: a {} takes {:?} coordinate(s), got {}", kind.keyword(), expected_dims, coords.len()),
            expected: vec![],
        });
    }
    match c.next().tok {
        Tok::Ident(k) if k == "in" => {}
        _ => return Err(c.error_before(&["`in`", "`,`"])),
    }
    let consts = constants(params);
    c.scope = Some(consts.keys().cloned().collect());
    let mut domain = Vec::new();
    for k in 0..coords.len() {
        if k > 0 {
            match c.peek().tok.clone() {
                Tok::Ident(x) if x == "x" => {
                    c.next();
                }
                _ => return Err(c.error(&["`x`"])),
            }
        }
        c.expect_sym('[')?;
        let at = c.peek().clone();
        let a = const_value(&c.expr()?, &consts, at.line, at.column)?;
        c.expect_sym(',')?;
        let at = c.peek().clone();
        let b = const_value(&c.expr()?, &consts, at.line, at.column)?;
        c.expect_sym(']')?;
        if !(a < b) {
            return Err(ParseError {
                line: at.line,
                column: at.column,
                message: format!("empty interval [{a}, {b}]"),
                expected: vec![],
            });
        }
        domain.push((a, b));
    }
    c.expect_sym(')')?;
    c.expect_sym('=')?;
    let mut scope: Vec<String> = coords.clone();
    scope.extend(consts.keys().cloned());
    c.scope = Some(scope);
    let mut components = Vec::new();
    match kind {
        GeometryKind::Metric => {
            let n = coords.len();
            c.expect_sym('[')?;
            for row in 0..n {
                if row > 0 {
                    c.expect_sym(',')?;
                }
                c.expect_sym('[')?;
                for col in 0..n {
                    if col > 0 && !c.eat_sym(',') {
                        let mut e = c.error(&["`,`"]);
                        e.message = format!("arity error: metric row {} has {col} entries, need {n}", row + 1);
                        return Err(e);
                    }
                    components.push(c.expr()?);
                }
                if c.peek().tok == Tok::Sym(',') {
                    let mut e = c.error(&["`]`"]);
                    e.message = format!("arity error: metric row {} has more than {n} entries", row + 1);
                    return Err(e);
                }
                c.expect_sym(']')?;
            }
            if c.peek().tok == Tok::Sym(',') {
                let mut e = c.error(&["`]`"]);
                e.message = format!("arity error: metric has more than {n} rows");
                return Err(e);
            }
            c.expect_sym(']')?;
        }
        _ => {
            c.expect_sym('(')?;
            loop {
                components.push(c.expr()?);
                if !c.eat_sym(',') {
                    break;
                }
            }
            let ok = match kind {
                GeometryKind::Curve => components.len() == 2 || components.len() == 3,
                _ => components.len() == 3,
            };
            if !ok {
                let mut e = c.error(&[]);
                e.message = format!("arity error: {} with {} components", kind.keyword(), components.len());
                return Err(e);
            }
            c.expect_sym(')')?;
        }
    }
    c.expect_end()?;
    Ok(GeometrySpec {
        kind,
        name,
        coords,
        domain,
        params: params.clone(),
        components,
        builtin: None,
    })
}

// ---------------------------------------------------------------------------
// compiling parsed specs

fn compile_all(spec: &GeometrySpec) -> Result<Vec<Compiled>> {
    let consts = constants(&spec.params);
    spec.components
        .iter()
        .map(|e| e.compile(&spec.coords, &consts).map_err(GeomError::InvalidParam))
        .collect()
}

/// Builds the evaluator of a spec. Non-regular patches and metrics that are
/// not positive definite at sample points produce warnings.
pub fn compile(spec: &GeometrySpec) -> Result<Geometry> {
    if let Some(name) = &spec.builtin {
        let args = spec.params.iter().map(|(k, v)| (k.clone(), format!("{v}"))).collect();
        return builtin(name, &args);
    }
    let comps = compile_all(spec)?;
    let mut warnings = Vec::new();
    let shape = match spec.kind {
        GeometryKind::Curve => {
            let dim = comps.len();
            let c = ParamCurve::new(dim, spec.domain[0], move |t| comps.iter().map(|e| e.eval_jet(std::slice::from_ref(t))).collect())?;
            Shape::Curve(c)
        }
        GeometryKind::Surface => {
            let domain = [spec.domain[0], spec.domain[1]];
            let s = SurfacePatch::new(domain, move |u, v| {
                let x = [*u, *v];
                [comps[0].eval_jet(&x), comps[1].eval_jet(&x), comps[2].eval_jet(&x)]
            })?;
            if let Err(e) = s.check_regular_on_grid(16) {
                warnings.push(e.to_string());
            }
            Shape::Surface(s)
        }
        GeometryKind::Metric => {
            let n = spec.coords.len();
            let chart = MetricChart::new(n, spec.domain.clone(), move |x| {
                (0..n * n)
                    .map(|k| {
                        let (i, j) = (k / n, k % n);
                        if i == j {
                            comps[k].eval_jet(x)
                        } else {
                            (comps[i * n + j].eval_jet(x) + comps[j * n + i].eval_jet(x)) * 0.5
                        }
                    })
                    .collect()
            })?
            .with_provenance(Provenance::Parsed(spec.name.clone()));
            if !symmetric_entries(spec) {
                warnings.push("metric matrix is not symmetric as written; using its symmetric part".into());
            }
            warnings.extend(metric_defects(&chart, 5));
            Shape::Metric(chart)
        }
    };
    Ok(Geometry {
        spec: spec.clone(),
        shape,
        warnings,
    })
}

fn symmetric_entries(spec: &GeometrySpec) -> bool {
    let n = spec.coords.len();
    (0..n).all(|i| (0..n).all(|j| spec.components[i * n + j] == spec.components[j * n + i]))
}

/// Grid points (cell centres, `k` per axis) where the metric is not finite
/// and positive definite.
pub fn metric_defects(chart: &MetricChart, k: usize) -> Vec<String> {
    let n = chart.dim();
    let dom = chart.domain().to_vec();
    let mut out = Vec::new();
    let total = k.pow(n as u32);
    for idx in 0..total {
        let mut r = idx;
        let x: Vec<f64> = dom
            .iter()
            .map(|(a, b)| {
                let i = r % k;
                r /= k;
                a + (b - a) * (i as f64 + 0.5) / k as f64
            })
            .collect();
        let g = chart.metric_at(&x);
        let ok = g.iter().all(|v| v.is_finite()) && g.clone().cholesky().is_some();
        if !ok {
            out.push(format!("metric is not positive definite at {x:?}"));
        }
    }
    out
}

/// Parses and compiles a single definition.
pub fn load(text: &str) -> Result<Geometry> {
    compile(&parse_geometry(text)?)
}

// ---------------------------------------------------------------------------
// built-ins

#[derive(Debug, Clone, Copy, Serialize)]
pub struct BuiltinInfo {
    pub name: &'static str,
    pub kind: GeometryKind,
    /// `name=default` pairs.
    pub params: &'static str,
}

pub const BUILTINS: &[BuiltinInfo] = &[
    BuiltinInfo { name: "plane", kind: GeometryKind::Surface, params: "" },
    BuiltinInfo { name: "sphere", kind: GeometryKind::Surface, params: "R=1" },
    BuiltinInfo { name: "cylinder", kind: GeometryKind::Surface, params: "R=1" },
    BuiltinInfo { name: "cone", kind: GeometryKind::Surface, params: "k=1" },
    BuiltinInfo { name: "torus", kind: GeometryKind::Surface, params: "R=2 r=1" },
    BuiltinInfo { name: "graph", kind: GeometryKind::Surface, params: "f=(u^2+v^2)/2" },
    BuiltinInfo { name: "revolution", kind: GeometryKind::Surface, params: "f=2+cos(v) h=sin(v)" },
    BuiltinInfo { name: "saddle", kind: GeometryKind::Surface, params: "" },
    BuiltinInfo { name: "ellipsoid", kind: GeometryKind::Surface, params: "a=1 b=1 c=1" },
    BuiltinInfo { name: "helix", kind: GeometryKind::Curve, params: "r=1 omega=1 v=0.5" },
    BuiltinInfo { name: "parabola", kind: GeometryKind::Curve, params: "a=1" },
    BuiltinInfo { name: "cycloid", kind: GeometryKind::Curve, params: "R=1" },
    BuiltinInfo { name: "viviani", kind: GeometryKind::Curve, params: "R=1" },
    BuiltinInfo { name: "lobachevsky_halfplane", kind: GeometryKind::Metric, params: "" },
    BuiltinInfo { name: "conformal", kind: GeometryKind::Metric, params: "n=2 lambda=4/(1+x^2+y^2+z^2)^2" },
    BuiltinInfo { name: "s3_round", kind: GeometryKind::Metric, params: "R=1" },
    BuiltinInfo { name: "hyperboloid_pullback", kind: GeometryKind::Metric, params: "" },
];

struct Args<'a> {
    name: &'a str,
    raw: &'a BTreeMap<String, String>,
    used: Vec<&'static str>,
}

impl<'a> Args<'a> {
    fn num(&mut self, key: &'static str, default: f64) -> Result<f64> {
        self.used.push(key);
        match self.raw.get(key) {
            None => Ok(default),
            Some(s) => {
                let e = parse_expr(s).map_err(|e| GeomError::InvalidParam(format!("{key}: {e}")))?;
                let v = e
                    .compile(&[], &constants(&BTreeMap::new()))
                    .map_err(|m| GeomError::InvalidParam(format!("{key}: {m}")))?
                    .eval(&[]);
                if !v.is_finite() {
                    return Err(GeomError::InvalidParam(format!("{key} = {s} is not finite")));
                }
                Ok(v)
            }
        }
    }

    fn positive(&mut self, key: &'static str, default: f64) -> Result<f64> {
        let v = self.num(key, default)?;
        if !(v > 0.0) {
            return Err(GeomError::InvalidParam(format!("{} needs {key} > 0, got {v}", self.name)));
        }
        Ok(v)
    }

    fn expr(&mut self, key: &'static str, default: &str, coords: &[&str]) -> Result<(Compiled, bool)> {
        self.used.push(key);
        let given = self.raw.get(key);
        let text = given.map(String::as_str).unwrap_or(default);
        let e = parse_expr(text).map_err(|e| GeomError::InvalidParam(format!("{key}: {e}")))?;
        let coords: Vec<String> = coords.iter().map(|s| s.to_string()).collect();
        let c = e
            .compile(&coords, &constants(&BTreeMap::new()))
            .map_err(|m| GeomError::InvalidParam(format!("{key}: {m}")))?;
        Ok((c, given.is_some()))
    }

    fn domain(&mut self, keys: [&'static str; 2], default: (f64, f64)) -> Result<(f64, f64)> {
        let a = self.num(keys[0], default.0)?;
        let b = self.num(keys[1], default.1)?;
        if !(a < b) {
            return Err(GeomError::InvalidParam(format!("empty interval [{a}, {b}]")));
        }
        Ok((a, b))
    }

    fn finish(&self) -> Result<()> {
        for k in self.raw.keys() {
            if !self.used.iter().any(|u| u == k) {
                return Err(GeomError::InvalidParam(format!("`{}` has no parameter `{k}`", self.name)));
            }
        }
        Ok(())
    }

    fn numeric(&self) -> BTreeMap<String, f64> {
        self.raw
            .iter()
            .filter_map(|(k, v)| parse_expr(v).ok().and_then(|e| e.compile(&[], &constants(&BTreeMap::new())).ok()).map(|c| (k.clone(), c.eval(&[]))))
            .collect()
    }
}

fn surface_domain(a: &mut Args, du: (f64, f64), dv: (f64, f64)) -> Result<[(f64, f64); 2]> {
    Ok([a.domain(["u0", "u1"], du)?, a.domain(["v0", "v1"], dv)?])
}

/// Builds a named geometry; parameter values are constant expressions
/// (`pi` is bound), or expressions in the coordinates for function-valued
/// parameters. Every surface accepts `flip=1` for the coorientation
/// `−r_u×r_v`, and `u0,u1,v0,v1` for its domain.
pub fn builtin(name: &str, params: &BTreeMap<String, String>) -> Result<Geometry> {
    let mut a = Args { name, raw: params, used: Vec::new() };
    let tau = 2.0 * PI;
    let (shape, coords): (Shape, &[&str]) = match name {
        "plane" => {
            let d = surface_domain(&mut a, (-10.0, 10.0), (-10.0, 10.0))?;
            (Shape::Surface(SurfacePatch::new(d, |u, v| [*u, *v, u.lift(0.0)])?), &["u", "v"])
        }
        "sphere" => {
            let r = a.positive("R", 1.0)?;
            let d = surface_domain(&mut a, (0.1, PI - 0.1), (0.0, tau))?;
            let s = SurfacePatch::new(d, move |u, v| {
                let su = u.sin() * r;
                [su * v.cos(), su * v.sin(), u.cos() * r]
            })?;
            (Shape::Surface(s.with_periods([None, periodic(d[1], tau)])), &["u", "v"])
        }
        "cylinder" => {
            let r = a.positive("R", 1.0)?;
            let d = surface_domain(&mut a, (0.0, tau), (-5.0, 5.0))?;
            let s = SurfacePatch::new(d, move |u, v| [u.cos() * r, u.sin() * r, *v])?;
            (Shape::Surface(s.with_periods([periodic(d[0], tau), None])), &["u", "v"])
        }
        "cone" => {
            let k = a.positive("k", 1.0)?;
            let d = surface_domain(&mut a, (0.0, tau), (0.1, 10.0))?;
            if d[1].0 <= 0.0 {
                return Err(GeomError::InvalidParam("cone needs v0 > 0 (apex excluded)".into()));
            }
            let s = SurfacePatch::new(d, move |u, v| [*v * u.cos(), *v * u.sin(), *v * k])?;
            (Shape::Surface(s.with_periods([periodic(d[0], tau), None])), &["u", "v"])
        }
        "torus" => {
            let big = a.positive("R", 2.0)?;
            let small = a.positive("r", 1.0)?;
            if !(small < big) {
                return Err(GeomError::InvalidParam(format!("torus needs r < R, got r = {small}, R = {big}")));
            }
            let d = surface_domain(&mut a, (0.0, tau), (0.0, tau))?;
            let s = SurfacePatch::new(d, move |u, v| {
                let w = v.cos() * small + big;
                [w * u.cos(), w * u.sin(), v.sin() * small]
            })?;
            (Shape::Surface(s.with_periods([periodic(d[0], tau), periodic(d[1], tau)])), &["u", "v"])
        }
        "graph" => {
            let (f, _) = a.expr("f", "(u^2+v^2)/2", &["u", "v"])?;
            let d = surface_domain(&mut a, (-1.0, 1.0), (-1.0, 1.0))?;
            let s = SurfacePatch::new(d, move |u, v| [*u, *v, f.eval_jet(&[*u, *v])])?;
            (Shape::Surface(s), &["u", "v"])
        }
        "saddle" => {
            let d = surface_domain(&mut a, (-1.0, 1.0), (-1.0, 1.0))?;
            (Shape::Surface(SurfacePatch::new(d, |u, v| [*u, *v, *u * *v])?), &["u", "v"])
        }
        "revolution" => {
            let (f, fg) = a.expr("f", "2+cos(v)", &["v"])?;
            let (h, hg) = a.expr("h", "sin(v)", &["v"])?;
            let default_dv = if fg || hg { (-1.0, 1.0) } else { (0.0, tau) };
            let d = surface_domain(&mut a, (0.0, tau), default_dv)?;
            let vp = a.num("vperiod", if fg || hg { 0.0 } else { tau })?;
            let s = SurfacePatch::new(d, move |u, v| {
                let r = f.eval_jet(std::slice::from_ref(v));
                [r * u.cos(), r * u.sin(), h.eval_jet(std::slice::from_ref(v))]
            })?;
            let pv = if vp > 0.0 { periodic(d[1], vp) } else { None };
            (Shape::Surface(s.with_periods([periodic(d[0], tau), pv])), &["u", "v"])
        }
        "ellipsoid" => {
            let (ea, eb, ec) = (a.positive("a", 1.0)?, a.positive("b", 1.0)?, a.positive("c", 1.0)?);
            let d = surface_domain(&mut a, (0.1, PI - 0.1), (0.0, tau))?;
            let s = SurfacePatch::new(d, move |u, v| {
                let su = u.sin();
                [su * v.cos() * ea, su * v.sin() * eb, u.cos() * ec]
            })?;
            (Shape::Surface(s.with_periods([None, periodic(d[1], tau)])), &["u", "v"])
        }
        "helix" => {
            let r = a.positive("r", 1.0)?;
            let w = a.num("omega", 1.0)?;
            let v = a.num("v", 0.5)?;
            let d = a.domain(["t0", "t1"], (0.0, 4.0 * PI))?;
            let c = ParamCurve::new(3, d, move |t| {
                let p = *t * w;
                vec![p.cos() * r, p.sin() * r, *t * v]
            })?;
            (Shape::Curve(c), &["t"])
        }
        "parabola" => {
            let k = a.num("a", 1.0)?;
            let d = a.domain(["t0", "t1"], (-2.0, 2.0))?;
            (Shape::Curve(ParamCurve::new(2, d, move |t| vec![*t, *t * *t * k])?), &["t"])
        }
        "cycloid" => {
            let r = a.positive("R", 1.0)?;
            let d = a.domain(["t0", "t1"], (0.1, tau - 0.1))?;
            let c = ParamCurve::new(2, d, move |t| vec![(*t - t.sin()) * r, (1.0 - t.cos()) * r])?;
            (Shape::Curve(c), &["t"])
        }
        "viviani" => {
            let r = a.positive("R", 1.0)?;
            let d = a.domain(["t0", "t1"], (-tau, tau))?;
            let c = ParamCurve::new(3, d, move |t| {
                vec![(t.cos() + 1.0) * (r / 2.0), t.sin() * (r / 2.0), (*t * 0.5).sin() * r]
            })?;
            (Shape::Curve(c), &["t"])
        }
        "lobachevsky_halfplane" => {
            let chart = MetricChart::new(2, vec![(-50.0, 50.0), (1e-3, 1e3)], |x| {
                let w = x[1].powi(-2);
                vec![w, x[0].lift(0.0), x[0].lift(0.0), w]
            })?;
            (Shape::Metric(chart), &["x", "y"])
        }
        "conformal" => {
            let n = a.num("n", 2.0)?;
            if n != 2.0 && n != 3.0 {
                return Err(GeomError::InvalidParam(format!("conformal needs n in {{2, 3}}, got {n}")));
            }
            let n = n as usize;
            let names: &[&str] = if n == 2 { &["x", "y"] } else { &["x", "y", "z"] };
            let default = if n == 2 { "4/(1+x^2+y^2)^2" } else { "4/(1+x^2+y^2+z^2)^2" };
            let (lam, _) = a.expr("lambda", default, names)?;
            let half = a.positive("half", 2.0)?;
            let chart = MetricChart::new(n, vec![(-half, half); n], move |x| {
                let l = lam.eval_jet(x);
                (0..n * n).map(|k| if k % (n + 1) == 0 { l } else { x[0].lift(0.0) }).collect()
            })?;
            let bad = metric_defects(&chart, 6);
            if !bad.is_empty() {
                return Err(GeomError::InvalidParam(format!("conformal factor: {}", bad[0])));
            }
            (Shape::Metric(chart), names)
        }
        "s3_round" => {
            let r = a.positive("R", 1.0)?;
            let chart = MetricChart::new(3, vec![(-3.0, 3.0); 3], move |x| {
                let s = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
                let l = (s + r * r).powi(-2) * (4.0 * r.powi(4));
                (0..9).map(|k| if k % 4 == 0 { l } else { x[0].lift(0.0) }).collect()
            })?;
            (Shape::Metric(chart), &["x", "y", "z"])
        }
        "hyperboloid_pullback" => {
            // z = √(1 + x² + y²) pulled back by dx² + dy² − dz²
            let chart = MetricChart::new(2, vec![(-20.0, 20.0), (-20.0, 20.0)], |x| {
                let q = (x[0] * x[0] + x[1] * x[1] + 1.0).recip();
                let xy = -(x[0] * x[1] * q);
                vec![1.0 - x[0] * x[0] * q, xy, xy, 1.0 - x[1] * x[1] * q]
            })?;
            (Shape::Metric(chart), &["x", "y"])
        }
        _ => return Err(GeomError::UnknownGeometry(name.to_string())),
    };
    let shape = match shape {
        Shape::Surface(s) => {
            let flip = a.num("flip", 0.0)?;
            if flip != 0.0 && flip != 1.0 {
                return Err(GeomError::InvalidParam(format!("flip must be 0 or 1, got {flip}")));
            }
            Shape::Surface(if flip == 1.0 { s.flipped() } else { s })
        }
        s => s,
    };
    a.finish()?;
    let shape = match shape {
        Shape::Metric(m) => Shape::Metric(m.with_provenance(Provenance::Builtin(name.to_string()))),
        s => s,
    };
    let (kind, domain) = match &shape {
        Shape::Curve(c) => (GeometryKind::Curve, vec![c.domain()]),
        Shape::Surface(s) => (GeometryKind::Surface, s.domain().to_vec()),
        Shape::Metric(m) => (GeometryKind::Metric, m.domain().to_vec()),
    };
    Ok(Geometry {
        spec: GeometrySpec {
            kind,
            name: name.to_string(),
            coords: coords.iter().map(|s| s.to_string()).collect(),
            domain,
            params: a.numeric(),
            components: vec![],
            builtin: Some(name.to_string()),
        },
        shape,
        warnings: vec![],
    })
}

fn periodic(d: (f64, f64), period: f64) -> Option<f64> {
    ((d.1 - d.0 - period).abs() < 1e-12).then_some(period)
}

/// Convenience for built-ins with numeric parameters.
pub fn builtin_with(name: &str, params: &[(&str, f64)]) -> Result<Geometry> {
    let m = params.iter().map(|(k, v)| (k.to_string(), format!("{v:e}"))).collect();
    builtin(name, &m)
}

/// Metric matrix of `geometry` at `x` (first form for surfaces).
pub fn metric_at(geometry: &Geometry, x: &[f64]) -> Result<DMatrix<f64>> {
    Ok(geometry.chart()?.metric_at(x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::intrinsic::{geodesic_distance, geodesic_trace, scalar_curvature_estimate};
    use crate::surface::principal_at;
    use num_complex::Complex64;

    const SPH: &str = "surface sph (u,v in [0.1,3.04]x[0,6.2]) = (sin(u)*cos(v), sin(u)*sin(v), cos(u))";
    const HYP: &str = "metric hyp (x,y in [-5,5]x[0.1,10]) = [[1/y^2,0],[0,1/y^2]]";
    const HELIX: &str = "curve helix (t in [0,10]) = (cos(t), sin(t), 0.5*t)";

    #[test]
    fn grammar_examples_parse() {
        let s = parse_geometry(SPH).unwrap();
        assert_eq!(s.kind, GeometryKind::Surface);
        assert_eq!(s.domain, vec![(0.1, 3.04), (0.0, 6.2)]);
        let m = parse_geometry(HYP).unwrap();
        assert_eq!(m.components.len(), 4);
        let c = parse_geometry(HELIX).unwrap();
        assert_eq!(c.coords, vec!["t"]);
    }

    #[test]
    fn source_round_trip() {
        let text = "# test\nparam k = -0.25\nparam m = 2*k\nsurface s (u,v in [-1,1]x[0,pi]) = (u, v, k*u^2 - m*sin(v))\n";
        let spec = parse_geometry(text).unwrap();
        assert_eq!(spec.params["m"], -0.5);
        assert_eq!(parse_geometry(&spec.to_source()).unwrap(), spec);
        let m = parse_geometry(HYP).unwrap();
        assert_eq!(parse_geometry(&m.to_source()).unwrap(), m);
    }

    #[test]
    fn errors_are_located() {
        let e = parse_geometry("surface s (u,v in [0,1]x[0,1]) = (u, v, w)").unwrap_err();
        assert_eq!((e.line, e.column), (1, 41));
        assert!(e.message.contains("unbound"));
        let e = parse_geometry("\n\nsurface s (u,v in [0,1]x[0,1]) = (u, v)").unwrap_err();
        assert_eq!(e.line, 3);
        assert!(e.message.contains("arity"));
        let e = parse_geometry("metric m (x,y in [0,1]x[1,2]) = [[1,0],[0]]").unwrap_err();
        assert!(e.message.contains("arity"));
        let e = parse_geometry("curve c (t in [0,1] = (t, t)").unwrap_err();
        assert!(e.expected.contains(&"`x`".to_string()) || e.expected.contains(&"`)`".to_string()));
        let e = parse_geometry("surface s (u,v in [0,1]x[0,1]) = (sin(u, v), v, u)").unwrap_err();
        assert!(e.message.contains("arity"));
    }

    #[test]
    fn non_spd_metric_warns() {
        let g = load("metric m (x,y in [-1,1]x[-1,1]) = [[x,0],[0,1]]").unwrap();
        assert!(!g.warnings.is_empty());
    }

    #[test]
    fn parsed_twins_match_builtins() {
        let parsed = load(SPH).unwrap();
        let twin = builtin_with("sphere", &[("R", 1.0)]).unwrap();
        let a = principal_at(parsed.surface().unwrap(), [1.0, 0.5]).unwrap();
        let b = principal_at(twin.surface().unwrap(), [1.0, 0.5]).unwrap();
        assert!((a.gaussian - b.gaussian).abs() < 1e-12 && (a.mean - b.mean).abs() < 1e-12);
        let ph = load(HYP).unwrap().chart().unwrap();
        let bh = builtin_with("lobachevsky_halfplane", &[]).unwrap().chart().unwrap();
        assert!((ph.metric_at(&[0.3, 2.0]) - bh.metric_at(&[0.3, 2.0])).amax() < 1e-15);
    }

    #[test]
    fn torus_matches_formula() {
        let t = builtin_with("torus", &[("R", 2.0), ("r", 1.0)]).unwrap();
        let p = t.surface().unwrap().point(0.4, 1.1);
        let e = [(2.0 + 1.1f64.cos()) * 0.4f64.cos(), (2.0 + 1.1f64.cos()) * 0.4f64.sin(), 1.1f64.sin()];
        for i in 0..3 {
            assert!((p[i] - e[i]).abs() < 1e-15);
        }
    }

    #[test]
    fn catalog_is_regular() {
        for info in BUILTINS {
            let g = builtin(info.name, &BTreeMap::new()).unwrap();
            match &g.shape {
                Shape::Surface(s) => s.check_regular_on_grid(32).unwrap(),
                Shape::Metric(m) => assert!(metric_defects(m, if m.dim() == 2 { 32 } else { 10 }).is_empty(), "{}", info.name),
                Shape::Curve(c) => {
                    let (a, b) = c.domain();
                    for k in 0..32 {
                        assert!(c.speed(a + (b - a) * (k as f64 + 0.5) / 32.0) > 1e-6);
                    }
                }
            }
        }
        assert!(matches!(builtin("klein_bottle", &BTreeMap::new()), Err(GeomError::UnknownGeometry(_))));
        assert!(builtin_with("sphere", &[("R", -1.0)]).is_err());
        assert!(builtin_with("sphere", &[("Q", 1.0)]).is_err());
    }

    #[test]
    fn hyperbolic_models_agree() {
        let hb = builtin_with("hyperboloid_pullback", &[]).unwrap().chart().unwrap();
        let tau = scalar_curvature_estimate(&hb, &[0.3, -0.2]).unwrap();
        assert!((tau.tau + 2.0).abs() < 5e-3, "{tau:?}");
        let (p, q) = ([0.3, -0.2], [1.1, 0.7]);
        let d = geodesic_distance(&hb, &p, &q).unwrap().distance;
        let z = hyperbolic_distance(hyperboloid_to_halfplane(p[0], p[1]), hyperboloid_to_halfplane(q[0], q[1])).unwrap();
        assert!((d - z).abs() < 1e-5);
    }

    #[test]
    fn halfplane_geodesics_are_vertical_lines_or_semicircles() {
        let h = builtin_with("lobachevsky_halfplane", &[]).unwrap().chart().unwrap();
        let path = geodesic_trace(&h, &[0.5, 1.0], &[0.0, 1.0], 3.0).unwrap();
        assert!(path.samples.iter().all(|s| (s.x[0] - 0.5).abs() < 1e-8));
        let path = geodesic_trace(&h, &[0.5, 1.0], &[1.0, 0.4], 3.0).unwrap();
        let pts: Vec<[f64; 2]> = path.samples.iter().map(|s| [s.x[0], s.x[1]]).collect();
        let (_, _, res) = fit_semicircle(&pts);
        assert!(res < 1e-6, "{res}");
        let d = hyperbolic_distance(Complex64::new(0.0, 1.0), Complex64::new(0.0, 3.0)).unwrap();
        assert!((geodesic_distance(&h, &[0.0, 1.0], &[0.0, 3.0]).unwrap().distance - d).abs() < 1e-6);
    }
}
