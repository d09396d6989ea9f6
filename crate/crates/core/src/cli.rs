//! Command-line front end.
//!
//! Every command writes one JSON document
//! `{"command", "geometry", "inputs", "results", "diagnostics"}` or a CSV
//! table. Exit codes: 0 success, 1 computation failure, 2 usage error,
//! 3 verification failure. Errors are also reported as a JSON document on
//! standard error.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde::Serialize;
use serde_json::{json, Value};

use crate::catalog::{self, builtin, hyperbolic_distance, Geometry, Shape};
use crate::curves::{
    arc_length, frenet_frame, reconstruct_plane_curve, reconstruct_space_curve, ParamCurve, ScalarFn,
};
use crate::error::GeomError;
use crate::intrinsic::{
    geodesic_circles, geodesic_distance, geodesic_trace, holonomy, parallel_transport, plane_scalar_curvature,
    CircleConfig, MetricChart, PathSegment, ScalarConfig,
};
use crate::surface::{area_over, forms_at, principal_at, total_curvatures_over, Rect};
use crate::tensors::{
    ricci_at, ricci_volume_oracle, riemann_at, riemann_holonomy_oracle, sectional_at, HOLONOMY_LADDER,
    RIEMANN_CONVENTION, VOLUME_LADDER,
};
use crate::verify;

const AFTER_HELP: &str = "Angles are in radians. Coordinates are given in chart order, comma-separated \
(e.g. --at 1.0,0.5). Paths are semicolon-separated point lists (e.g. --points \"0,0;1,0;1,1\").";

#[derive(Debug, Parser)]
#[command(name = "curvatur", version, about = "Numerical differential geometry of curves, surfaces and metrics", after_help = AFTER_HELP)]
pub struct Cli {
    /// Worker threads for data-parallel sampling.
    #[arg(long, global = true, env = "CURVATUR_THREADS")]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Curves in the plane and in space.
    #[command(subcommand)]
    Curve(CurveCmd),
    /// Extrinsic geometry of surface patches.
    #[command(subcommand)]
    Surface(SurfaceCmd),
    /// Geodesics of a chart.
    #[command(subcommand)]
    Geodesic(GeodesicCmd),
    /// Parallel transport and holonomy.
    #[command(subcommand)]
    Transport(TransportCmd),
    /// Scalar, Riemann, Ricci and sectional curvature.
    #[command(subcommand)]
    Curvature(CurvatureCmd),
    /// Closed forms of the Lobachevsky half-plane.
    #[command(subcommand)]
    Hyperbolic(HyperbolicCmd),
    /// Run verification suites.
    Verify(VerifyArgs),
    /// Parse and check a geometry file.
    Parse(ParseArgs),
}

#[derive(Debug, Args, Clone)]
pub struct GeometryArgs {
    /// Built-in geometry name.
    #[arg(long, conflicts_with = "file")]
    pub builtin: Option<String>,
    /// Built-in parameter `name=value` (repeatable).
    #[arg(long = "param", value_name = "K=V")]
    pub params: Vec<String>,
    /// Geometry definition file.
    #[arg(long)]
    pub file: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, Default, ValueEnum)]
pub enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Debug, Args, Clone)]
pub struct OutputArgs {
    /// Output format.
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Output file (standard output when absent).
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum CurveCmd {
    /// Frenet frame, curvature and torsion at parameter values.
    Analyze {
        #[command(flatten)]
        geometry: GeometryArgs,
        /// Parameter values, comma-separated; defaults to 11 samples over the domain.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        at: Vec<f64>,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Natural curve with prescribed curvature (and torsion).
    Reconstruct {
        /// Curvature as an expression in `s`.
        #[arg(long, allow_hyphen_values = true)]
        kbar: String,
        /// Torsion as an expression in `s`; gives a space curve.
        #[arg(long, allow_hyphen_values = true)]
        tbar: Option<String>,
        /// Arc length.
        #[arg(long, default_value_t = 10.0)]
        length: f64,
        /// Number of output samples.
        #[arg(long, default_value_t = 101)]
        samples: usize,
        #[command(flatten)]
        out: OutputArgs,
    },
}

#[derive(Debug, Subcommand)]
pub enum SurfaceCmd {
    /// Fundamental forms and curvatures at a point.
    Report {
        #[command(flatten)]
        geometry: GeometryArgs,
        /// Point in chart coordinates.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        at: Vec<f64>,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Area over the domain or a sub-rectangle.
    Area {
        #[command(flatten)]
        geometry: GeometryArgs,
        /// Rectangle `u0,u1,v0,v1`.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        rect: Option<Vec<f64>>,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Total mean and Gaussian curvature, and the offset-area fit.
    Offset {
        #[command(flatten)]
        geometry: GeometryArgs,
        /// Rectangle `u0,u1,v0,v1`.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        rect: Option<Vec<f64>>,
        #[command(flatten)]
        out: OutputArgs,
    },
}

#[derive(Debug, Subcommand)]
pub enum GeodesicCmd {
    /// Unit-speed geodesic from a point in a direction.
    Trace {
        #[command(flatten)]
        geometry: GeometryArgs,
        /// Start point.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        from: Vec<f64>,
        /// Initial direction; rescaled to unit speed.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        dir: Vec<f64>,
        /// Arc length.
        #[arg(long)]
        length: f64,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Geodesic distance by shooting.
    Distance {
        #[command(flatten)]
        geometry: GeometryArgs,
        /// Start point.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        from: Vec<f64>,
        /// End point.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        to: Vec<f64>,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Length and area of geodesic circles.
    Circle {
        #[command(flatten)]
        geometry: GeometryArgs,
        /// Point in chart coordinates.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        at: Vec<f64>,
        /// Circle radii.
        #[arg(long, value_delimiter = ',', required = true)]
        radii: Vec<f64>,
        /// Initial directions per circle.
        #[arg(long, default_value_t = 512)]
        directions: usize,
        #[command(flatten)]
        out: OutputArgs,
    },
}

#[derive(Debug, Subcommand)]
pub enum TransportCmd {
    /// Transport a vector along a polyline.
    Along {
        #[command(flatten)]
        geometry: GeometryArgs,
        /// Vertices `x,y;x,y;...`.
        #[arg(long, allow_hyphen_values = true)]
        points: String,
        /// Initial vector.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        vector: Vec<f64>,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Holonomy of a closed polygon.
    Holonomy {
        #[command(flatten)]
        geometry: GeometryArgs,
        /// Vertices `x,y;x,y;...`.
        #[arg(long, allow_hyphen_values = true)]
        points: String,
        #[command(flatten)]
        out: OutputArgs,
    },
}

#[derive(Debug, Subcommand)]
pub enum CurvatureCmd {
    /// Scalar curvature as a limit of geodesic circles, disks or spheres.
    Scalar {
        #[command(flatten)]
        geometry: GeometryArgs,
        /// Point in chart coordinates.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        at: Vec<f64>,
        /// Largest radius of the extrapolation ladder.
        #[arg(long, default_value_t = 0.2)]
        r0: f64,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Riemann tensor from the coordinate formula; `--oracle` adds holonomy.
    Riemann {
        #[command(flatten)]
        geometry: GeometryArgs,
        /// Point in chart coordinates.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        at: Vec<f64>,
        /// Also compute the independent oracle route.
        #[arg(long)]
        oracle: bool,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Ricci form and operator; `--oracle` adds the volume route.
    Ricci {
        #[command(flatten)]
        geometry: GeometryArgs,
        /// Point in chart coordinates.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        at: Vec<f64>,
        /// Also compute the independent oracle route.
        #[arg(long)]
        oracle: bool,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Sectional curvature of the plane spanned by `u`, `v`.
    Sectional {
        #[command(flatten)]
        geometry: GeometryArgs,
        /// Point in chart coordinates.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        at: Vec<f64>,
        /// First spanning vector.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        u: Vec<f64>,
        /// Second spanning vector.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        v: Vec<f64>,
        #[command(flatten)]
        out: OutputArgs,
    },
}

#[derive(Debug, Subcommand)]
pub enum HyperbolicCmd {
    /// Distance between half-plane points `x,y`.
    Distance {
        /// First point `x,y`.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        z1: Vec<f64>,
        /// Second point `x,y`.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        z2: Vec<f64>,
        /// Also shoot the geodesic in the half-plane chart.
        #[arg(long)]
        shoot: bool,
        #[command(flatten)]
        out: OutputArgs,
    },
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Suite name or `all`.
    #[arg(long, default_value = "all")]
    pub suite: String,
    /// Seed for randomized suites.
    #[arg(long, default_value_t = 2024)]
    pub seed: u64,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Args)]
pub struct ParseArgs {
    /// Geometry file to check.
    #[arg(long)]
    pub check: PathBuf,
    #[command(flatten)]
    pub out: OutputArgs,
}

fn parse_point(s: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .map(|c| c.trim().parse::<f64>().map_err(|e| format!("`{c}`: {e}")))
        .collect()
}

/// `"x,y;x,y;..."` into points of one dimension.
fn parse_path(s: &str) -> Result<Vec<Vec<f64>>, String> {
    let pts: Vec<Vec<f64>> = s.split(';').map(parse_point).collect::<Result<_, _>>()?;
    let n = pts.first().map_or(0, |p| p.len());
    if n == 0 || pts.iter().any(|p| p.len() != n) {
        return Err("points must share one dimension".into());
    }
    Ok(pts)
}

// ---------------------------------------------------------------------------

/// Failure of a command, mapped to an exit code.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Parse(catalog::ParseError),
    Compute(GeomError),
    Verification(Value),
}

impl From<GeomError> for CliError {
    fn from(e: GeomError) -> Self {
        match e {
            GeomError::Parse(p) => CliError::Parse(p),
            GeomError::UnknownGeometry(_) | GeomError::InvalidParam(_) => CliError::Usage(e.to_string()),
            other => CliError::Compute(other),
        }
    }
}

impl From<catalog::ParseError> for CliError {
    fn from(e: catalog::ParseError) -> Self {
        CliError::Parse(e)
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Parse(_) => 2,
            CliError::Compute(_) => 1,
            CliError::Verification(_) => 3,
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// A result document plus an optional table for CSV output.
pub struct Output {
    pub doc: Document,
    pub table: Option<Table>,
}

pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

#[derive(Debug, Serialize)]
pub struct Document {
    pub command: String,
    pub geometry: Value,
    pub inputs: Value,
    pub results: Value,
    pub diagnostics: Diagnostics,
}

#[derive(Debug, Default, Serialize)]
pub struct Diagnostics {
    pub tolerances: Value,
    pub error_estimates: Value,
    pub warnings: Vec<String>,
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).unwrap_or(Value::Null)
}

/// JSON text with every number printed to 17 significant digits and
/// non-finite numbers as `null`.
pub fn render_json(v: &Value) -> String {
    let mut s = String::new();
    write_value(v, 0, &mut s);
    s.push('\n');
    s
}

fn fmt_number(x: f64) -> String {
    if !x.is_finite() {
        return "null".into();
    }
    format!("{x:.16e}")
}

fn write_value(v: &Value, indent: usize, s: &mut String) {
    let pad = |n: usize| "  ".repeat(n);
    match v {
        Value::Null => s.push_str("null"),
        Value::Bool(b) => s.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if n.is_f64() {
                s.push_str(&fmt_number(n.as_f64().unwrap_or(f64::NAN)));
            } else {
                s.push_str(&n.to_string());
            }
        }
        Value::String(t) => s.push_str(&serde_json::to_string(t).unwrap_or_default()),
        Value::Array(a) => {
            if a.is_empty() {
                s.push_str("[]");
            } else if a.iter().all(|x| !x.is_array() && !x.is_object()) {
                s.push('[');
                for (i, x) in a.iter().enumerate() {
                    if i > 0 {
                        s.push_str(", ");
                    }
                    write_value(x, indent, s);
                }
                s.push(']');
            } else {
                s.push_str("[\n");
                for (i, x) in a.iter().enumerate() {
                    s.push_str(&pad(indent + 1));
                    write_value(x, indent + 1, s);
                    s.push_str(if i + 1 < a.len() { ",\n" } else { "\n" });
                }
                s.push_str(&pad(indent));
                s.push(']');
            }
        }
        Value::Object(m) => {
            if m.is_empty() {
                s.push_str("{}");
                return;
            }
            s.push_str("{\n");
            for (i, (k, x)) in m.iter().enumerate() {
                s.push_str(&pad(indent + 1));
                s.push_str(&serde_json::to_string(k).unwrap_or_default());
                s.push_str(": ");
                write_value(x, indent + 1, s);
                s.push_str(if i + 1 < m.len() { ",\n" } else { "\n" });
            }
            s.push_str(&pad(indent));
            s.push('}');
        }
    }
}

fn flatten_into(prefix: &str, v: &Value, rows: &mut Vec<(String, String)>) {
    match v {
        Value::Object(m) => {
            for (k, x) in m {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten_into(&key, x, rows);
            }
        }
        Value::Array(a) => {
            for (i, x) in a.iter().enumerate() {
                flatten_into(&format!("{prefix}[{i}]"), x, rows);
            }
        }
        Value::Number(n) if n.is_f64() => rows.push((prefix.to_string(), fmt_number(n.as_f64().unwrap_or(f64::NAN)))),
        Value::Null => rows.push((prefix.to_string(), String::new())),
        Value::String(t) => rows.push((prefix.to_string(), t.clone())),
        other => rows.push((prefix.to_string(), other.to_string())),
    }
}

fn render_csv(out: &Output) -> CliResult<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| CliError::Compute(GeomError::Precondition(format!("csv: {e}")));
    match &out.table {
        Some(t) => {
            w.write_record(&t.header).map_err(io)?;
            for r in &t.rows {
                w.write_record(r.iter().map(|x| fmt_number(*x))).map_err(io)?;
            }
        }
        None => {
            let mut rows = Vec::new();
            flatten_into("", &out.doc.results, &mut rows);
            w.write_record(["key", "value"]).map_err(io)?;
            for (k, v) in rows {
                w.write_record([k, v]).map_err(io)?;
            }
        }
    }
    let bytes = w.into_inner().map_err(|e| usage(e.to_string()))?;
    Ok(String::from_utf8_lossy(&bytes).into_owned())
}

// ---------------------------------------------------------------------------

struct Loaded {
    geometry: Geometry,
    source: Value,
}

fn load_geometry(args: &GeometryArgs) -> CliResult<Loaded> {
    match (&args.builtin, &args.file) {
        (Some(name), None) => {
            let mut params = BTreeMap::new();
            for p in &args.params {
                let (k, v) = p.split_once('=').ok_or_else(|| usage(format!("--param `{p}` is not K=V")))?;
                params.insert(k.trim().to_string(), v.trim().to_string());
            }
            let geometry = builtin(name, &params)?;
            Ok(Loaded {
                source: json!({"builtin": name, "params": params, "kind": geometry.kind().keyword()}),
                geometry,
            })
        }
        (None, Some(path)) => {
            if !args.params.is_empty() {
                return Err(usage("--param applies to --builtin only"));
            }
            let text = std::fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
            let geometry = catalog::load(&text)?;
            Ok(Loaded {
                source: json!({"file": path.display().to_string(), "name": geometry.spec.name, "kind": geometry.kind().keyword()}),
                geometry,
            })
        }
        _ => Err(usage("give exactly one of --builtin or --file")),
    }
}

fn check_dim(what: &str, v: &[f64], n: usize) -> CliResult<()> {
    if v.len() != n {
        return Err(usage(format!("{what} needs {n} coordinates, got {}", v.len())));
    }
    Ok(())
}

fn curve_of(g: &Geometry) -> CliResult<&ParamCurve> {
    g.curve().map_err(|_| usage("this command needs a curve"))
}

fn chart_of(g: &Geometry) -> CliResult<MetricChart> {
    if matches!(g.shape, Shape::Curve(_)) {
        return Err(usage("this command needs a surface or a metric"));
    }
    Ok(g.chart()?)
}

fn rect_of(r: &Option<Vec<f64>>, default: Rect) -> CliResult<Rect> {
    match r {
        None => Ok(default),
        Some(v) if v.len() == 4 => Ok([(v[0], v[1]), (v[2], v[3])]),
        Some(_) => Err(usage("--rect needs u0,u1,v0,v1")),
    }
}

fn doc(command: &str, geometry: Value, inputs: Value, results: Value) -> Document {
    Document {
        command: command.to_string(),
        geometry,
        inputs,
        results,
        diagnostics: Diagnostics {
            tolerances: json!({}),
            error_estimates: json!({}),
            warnings: Vec::new(),
        },
    }
}

fn expr_fn(text: &str) -> CliResult<ScalarFn> {
    let e = catalog::parse_expr(text)?;
    let mut consts = BTreeMap::new();
    consts.insert("pi".to_string(), std::f64::consts::PI);
    let c = e.compile(&["s".to_string()], &consts).map_err(usage)?;
    Ok(std::sync::Arc::new(move |s| c.eval_jet(std::slice::from_ref(s))))
}

fn execute(cmd: Command) -> CliResult<(Output, OutputArgs)> {
    Ok(match cmd {
        Command::Curve(CurveCmd::Analyze { geometry, at, out }) => {
            let l = load_geometry(&geometry)?;
            let c = curve_of(&l.geometry)?;
            let (a, b) = c.domain();
            let ts = if at.is_empty() { (0..=10).map(|k| a + (b - a) * k as f64 / 10.0).collect() } else { at };
            let mut rows = Vec::new();
            let mut frames = Vec::new();
            for &t in &ts {
                let f = frenet_frame(c, t)?;
                rows.push(vec![t, c.speed(t), f.curvature, f.torsion.unwrap_or(f64::NAN)]);
                frames.push(json!({"t": t, "speed": c.speed(t), "frame": to_value(&f)}));
            }
            let length = arc_length(c, a, b)?;
            let mut d = doc("curve analyze", l.source, json!({"at": ts}), json!({"length": length, "samples": frames}));
            d.diagnostics.warnings = l.geometry.warnings.clone();
            let header = ["t", "speed", "curvature", "torsion"].map(String::from).to_vec();
            (Output { doc: d, table: Some(Table { header, rows }) }, out)
        }
        Command::Curve(CurveCmd::Reconstruct { kbar, tbar, length, samples, out }) => {
            if !(length > 0.0) || samples < 2 {
                return Err(usage("--length must be positive and --samples at least 2"));
            }
            let k = expr_fn(&kbar)?;
            let c = match &tbar {
                Some(t) => reconstruct_space_curve(k, expr_fn(t)?, length)?,
                None => reconstruct_plane_curve(k, length)?,
            };
            let mut rows = Vec::new();
            for i in 0..samples {
                let s = length * i as f64 / (samples - 1) as f64;
                let p = c.point(s);
                let f = frenet_frame(&c, s)?;
                let mut row = vec![s, p[0], p[1]];
                if tbar.is_some() {
                    row.push(p[2]);
                }
                row.push(f.curvature);
                if tbar.is_some() {
                    row.push(f.torsion.unwrap_or(f64::NAN));
                }
                rows.push(row);
            }
            let header: Vec<String> = if tbar.is_some() {
                ["s", "x", "y", "z", "curvature", "torsion"].map(String::from).to_vec()
            } else {
                ["s", "x", "y", "curvature"].map(String::from).to_vec()
            };
            let results = json!({"columns": header, "samples": rows});
            let d = doc(
                "curve reconstruct",
                json!({"kbar": kbar, "tbar": tbar}),
                json!({"length": length, "samples": samples}),
                results,
            );
            (Output { doc: d, table: Some(Table { header, rows }) }, out)
        }
        Command::Surface(SurfaceCmd::Report { geometry, at, out }) => {
            let l = load_geometry(&geometry)?;
            let s = l.geometry.surface().map_err(|_| usage("this command needs a surface"))?;
            check_dim("--at", &at, 2)?;
            let uv = [at[0], at[1]];
            let forms = forms_at(s, uv)?;
            let rep = principal_at(s, uv)?;
            let chart = l.geometry.chart()?;
            let intrinsic = ricci_at(&chart, &at)?.tau;
            let mut d = doc(
                "surface report",
                l.source,
                json!({"at": at}),
                json!({
                    "point": to_value(&s.point(uv[0], uv[1])),
                    "normal": to_value(&s.normal(uv[0], uv[1])),
                    "forms": to_value(&forms),
                    "principal": to_value(&rep),
                    "scalar_curvature_intrinsic": intrinsic,
                }),
            );
            d.diagnostics.error_estimates = json!({"egregium_gap": (intrinsic - 2.0 * rep.lambda_plus * rep.lambda_minus).abs()});
            d.diagnostics.warnings = l.geometry.warnings.clone();
            (Output { doc: d, table: None }, out)
        }
        Command::Surface(SurfaceCmd::Area { geometry, rect, out }) => {
            let l = load_geometry(&geometry)?;
            let s = l.geometry.surface().map_err(|_| usage("this command needs a surface"))?;
            let r = rect_of(&rect, s.domain())?;
            let a = area_over(s, r)?;
            let mut d = doc("surface area", l.source, json!({"rect": [r[0].0, r[0].1, r[1].0, r[1].1]}), json!({"area": a}));
            d.diagnostics.tolerances = json!({"quadrature_relative": 1e-12});
            (Output { doc: d, table: None }, out)
        }
        Command::Surface(SurfaceCmd::Offset { geometry, rect, out }) => {
            let l = load_geometry(&geometry)?;
            let s = l.geometry.surface().map_err(|_| usage("this command needs a surface"))?;
            let r = rect_of(&rect, s.domain())?;
            let t = total_curvatures_over(s, r)?;
            let mut d = doc("surface offset", l.source, json!({"rect": [r[0].0, r[0].1, r[1].0, r[1].1]}), to_value(&t));
            d.diagnostics.error_estimates = json!({"fit_mismatch": t.mismatch});
            d.diagnostics.tolerances = json!({"fit_mismatch": 1e-4});
            if !t.consistent {
                d.diagnostics.warnings.push("offset-area fit disagrees with the direct integrals".into());
            }
            (Output { doc: d, table: None }, out)
        }
        Command::Geodesic(GeodesicCmd::Trace { geometry, from, dir, length, out }) => {
            let l = load_geometry(&geometry)?;
            let chart = chart_of(&l.geometry)?;
            let n = chart.dim();
            check_dim("--from", &from, n)?;
            check_dim("--dir", &dir, n)?;
            let path = geodesic_trace(&chart, &from, &dir, length)?;
            let surface = chart.surface().cloned();
            let mut header: Vec<String> = vec!["t".into()];
            header.extend(coord_names(n));
            if surface.is_some() {
                header.extend(["x", "y", "z"].map(String::from));
            }
            let rows: Vec<Vec<f64>> = path
                .samples
                .iter()
                .map(|s| {
                    let mut r = vec![s.t];
                    r.extend(&s.x);
                    if let Some(sf) = &surface {
                        let p = sf.point(s.x[0], s.x[1]);
                        r.extend([p[0], p[1], p[2]]);
                    }
                    r
                })
                .collect();
            let mut d = doc(
                "geodesic trace",
                l.source,
                json!({"from": from, "dir": dir, "length": length}),
                json!({"length": path.length, "termination": to_value(&path.termination), "samples": to_value(&path.samples)}),
            );
            d.diagnostics.error_estimates = json!({"speed_drift": path.speed_drift});
            if path.termination != crate::intrinsic::Termination::Completed {
                d.diagnostics.warnings.push(format!("stopped early at t = {}: {:?}", path.length, path.termination));
            }
            d.diagnostics.tolerances = json!({"ode_relative": 1e-12, "ode_absolute": 1e-12});
            (Output { doc: d, table: Some(Table { header, rows }) }, out)
        }
        Command::Geodesic(GeodesicCmd::Distance { geometry, from, to, out }) => {
            let l = load_geometry(&geometry)?;
            let chart = chart_of(&l.geometry)?;
            check_dim("--from", &from, chart.dim())?;
            check_dim("--to", &to, chart.dim())?;
            let dist = geodesic_distance(&chart, &from, &to)?;
            let mut d = doc("geodesic distance", l.source, json!({"from": from, "to": to}), to_value(&dist));
            d.diagnostics.error_estimates = json!({"miss": dist.miss});
            (Output { doc: d, table: None }, out)
        }
        Command::Geodesic(GeodesicCmd::Circle { geometry, at, radii, directions, out }) => {
            let l = load_geometry(&geometry)?;
            let chart = chart_of(&l.geometry)?;
            check_dim("--at", &at, chart.dim())?;
            let cfg = CircleConfig { directions, ..CircleConfig::default() };
            let circles = geodesic_circles(&chart, &at, &radii, None, cfg)?;
            let header = ["radius", "length", "length_error", "area", "area_error"].map(String::from).to_vec();
            let rows = circles.iter().map(|c| vec![c.radius, c.length, c.length_error, c.area, c.area_error]).collect();
            let mut d = doc("geodesic circle", l.source, json!({"at": at, "radii": radii, "config": to_value(&cfg)}), to_value(&circles));
            d.diagnostics.error_estimates = json!(circles.iter().map(|c| json!({"length": c.length_error, "area": c.area_error})).collect::<Vec<_>>());
            (Output { doc: d, table: Some(Table { header, rows }) }, out)
        }
        Command::Transport(TransportCmd::Along { geometry, points, vector, out }) => {
            let l = load_geometry(&geometry)?;
            let chart = chart_of(&l.geometry)?;
            let pts = parse_path(&points).map_err(usage)?;
            if pts.len() < 2 {
                return Err(usage("--points needs at least two points"));
            }
            for p in &pts {
                check_dim("--points", p, chart.dim())?;
            }
            check_dim("--vector", &vector, chart.dim())?;
            let path: Vec<PathSegment> = pts.windows(2).map(|w| PathSegment::line(&w[0], &w[1])).collect();
            let (res, end) = parallel_transport(&chart, &path, &vector)?;
            let n = chart.dim();
            let mut header: Vec<String> = vec!["segment".into(), "t".into()];
            header.extend(coord_names(n));
            header.extend((0..n).map(|i| format!("a{i}")));
            let rows: Vec<Vec<f64>> = res
                .samples
                .iter()
                .zip(res.vectors(&vector))
                .map(|(s, a)| {
                    let mut r = vec![s.segment as f64, s.t];
                    r.extend(&s.x);
                    r.extend(a);
                    r
                })
                .collect();
            let d = doc(
                "transport along",
                l.source,
                json!({"points": pts, "vector": vector}),
                json!({"end_vector": end, "frame": to_value(&res)}),
            );
            (Output { doc: d, table: Some(Table { header, rows }) }, out)
        }
        Command::Transport(TransportCmd::Holonomy { geometry, points, out }) => {
            let l = load_geometry(&geometry)?;
            let chart = chart_of(&l.geometry)?;
            let pts = parse_path(&points).map_err(usage)?;
            if pts.len() < 3 {
                return Err(usage("--points needs at least three vertices"));
            }
            for p in &pts {
                check_dim("--points", p, chart.dim())?;
            }
            let h = holonomy(&chart, &PathSegment::polygon(&pts))?;
            let mut d = doc("transport holonomy", l.source, json!({"points": pts}), to_value(&h));
            d.diagnostics.error_estimates = json!({"orthogonality_residual": h.orthogonality_residual});
            (Output { doc: d, table: None }, out)
        }
        Command::Curvature(CurvatureCmd::Scalar { geometry, at, r0, out }) => {
            let l = load_geometry(&geometry)?;
            let chart = chart_of(&l.geometry)?;
            check_dim("--at", &at, chart.dim())?;
            let cfg = ScalarConfig { r0, ..ScalarConfig::default() };
            let sc = crate::intrinsic::scalar_curvature_with(&chart, &at, cfg)?;
            let exact = ricci_at(&chart, &at)?.tau;
            let mut d = doc("curvature scalar", l.source, json!({"at": at, "config": to_value(&cfg)}), to_value(&sc));
            d.results["tau_coordinate"] = json!(exact);
            d.diagnostics.error_estimates = json!({"tau": sc.error});
            if !sc.routes_agree {
                d.diagnostics.warnings.push("limit routes disagree beyond their error estimates".into());
            }
            (Output { doc: d, table: None }, out)
        }
        Command::Curvature(CurvatureCmd::Riemann { geometry, at, oracle, out }) => {
            let l = load_geometry(&geometry)?;
            let chart = chart_of(&l.geometry)?;
            let n = chart.dim();
            check_dim("--at", &at, n)?;
            let r = riemann_at(&chart, &at)?;
            let mut results = json!({"convention": RIEMANN_CONVENTION, "up": r.up, "symmetry_residual": r.symmetry_residual()});
            let mut d = doc("curvature riemann", l.source, json!({"at": at, "oracle": oracle}), Value::Null);
            if oracle {
                let mut worst = 0.0f64;
                let mut errs = Vec::new();
                for a in 0..n {
                    for b in a + 1..n {
                        let (ea, eb) = (unit(n, a), unit(n, b));
                        let op = riemann_holonomy_oracle(&chart, &at, &ea, &eb, &HOLONOMY_LADDER)?;
                        worst = worst.max((&op.operator - r.operator(&ea, &eb)).amax());
                        errs.push(op.error);
                    }
                }
                results["oracle_max_difference"] = json!(worst);
                d.diagnostics.error_estimates = json!({"holonomy_oracle": errs});
                d.diagnostics.tolerances = json!({"holonomy_ladder": HOLONOMY_LADDER});
            }
            d.results = results;
            (Output { doc: d, table: None }, out)
        }
        Command::Curvature(CurvatureCmd::Ricci { geometry, at, oracle, out }) => {
            let l = load_geometry(&geometry)?;
            let chart = chart_of(&l.geometry)?;
            check_dim("--at", &at, chart.dim())?;
            let ric = ricci_at(&chart, &at)?;
            let mut d = doc("curvature ricci", l.source, json!({"at": at, "oracle": oracle}), to_value(&ric));
            if oracle {
                let vo = ricci_volume_oracle(&chart, &at, &VOLUME_LADDER)?;
                d.results["oracle"] = to_value(&vo);
                d.results["oracle_max_difference"] = json!((&vo.rho - &ric.rho).amax());
                d.diagnostics.error_estimates = json!({"volume_oracle": vo.error});
                d.diagnostics.tolerances = json!({"volume_ladder": VOLUME_LADDER});
                if vo.ill_conditioned {
                    d.diagnostics.warnings.push("volume oracle system is ill-conditioned".into());
                }
            }
            (Output { doc: d, table: None }, out)
        }
        Command::Curvature(CurvatureCmd::Sectional { geometry, at, u, v, out }) => {
            let l = load_geometry(&geometry)?;
            let chart = chart_of(&l.geometry)?;
            let n = chart.dim();
            check_dim("--at", &at, n)?;
            check_dim("--u", &u, n)?;
            check_dim("--v", &v, n)?;
            let sigma = sectional_at(&chart, &at, &u, &v)?;
            let lim = plane_scalar_curvature(&chart, &at, &u, &v, ScalarConfig::default())?;
            let mut d = doc(
                "curvature sectional",
                l.source,
                json!({"at": at, "u": u, "v": v}),
                json!({"sectional": sigma, "sectional_from_circles": lim.value / 2.0, "limit": to_value(&lim)}),
            );
            d.diagnostics.error_estimates = json!({"sectional_from_circles": lim.error / 2.0});
            (Output { doc: d, table: None }, out)
        }
        Command::Hyperbolic(HyperbolicCmd::Distance { z1, z2, shoot, out }) => {
            check_dim("--z1", &z1, 2)?;
            check_dim("--z2", &z2, 2)?;
            let (a, b) = (Complex64::new(z1[0], z1[1]), Complex64::new(z2[0], z2[1]));
            let dist = hyperbolic_distance(a, b).map_err(|e| usage(e.to_string()))?;
            let mut d = doc("hyperbolic distance", json!({"model": "upper half-plane"}), json!({"z1": z1, "z2": z2}), json!({"distance": dist}));
            if shoot {
                let chart = builtin("lobachevsky_halfplane", &BTreeMap::new())?.chart()?;
                let s = geodesic_distance(&chart, &z1, &z2)?;
                d.results["shooting"] = to_value(&s);
                d.diagnostics.error_estimates = json!({"shooting_gap": (s.distance - dist).abs()});
            }
            (Output { doc: d, table: None }, out)
        }
        Command::Verify(args) => return run_verify(args),
        Command::Parse(args) => {
            let text = std::fs::read_to_string(&args.check).map_err(|e| usage(format!("{}: {e}", args.check.display())))?;
            let specs = catalog::parse_geometries(&text)?;
            let mut items = Vec::new();
            let mut warnings = Vec::new();
            for spec in &specs {
                let g = catalog::compile(spec)?;
                warnings.extend(g.warnings.iter().map(|w| format!("{}: {w}", spec.name)));
                items.push(json!({"name": spec.name, "kind": spec.kind.keyword(), "coords": spec.coords, "domain": spec.domain, "source": spec.to_source()}));
            }
            let mut d = doc("parse", json!({"file": args.check.display().to_string()}), json!({}), json!({"definitions": items}));
            d.diagnostics.warnings = warnings;
            (Output { doc: d, table: None }, args.out)
        }
    })
}

fn run_verify(args: VerifyArgs) -> CliResult<(Output, OutputArgs)> {
    let names: Vec<&str> = if args.suite == "all" {
        verify::suite_names()
    } else if verify::SUITES.iter().any(|s| s.name == args.suite) {
        vec![args.suite.as_str()]
    } else {
        return Err(usage(format!("unknown suite `{}`; known: all, {}", args.suite, verify::suite_names().join(", "))));
    };
    let mut reports = Vec::new();
    for name in names {
        let r = verify::run_suite(name, args.seed).expect("known suite");
        for c in &r.checks {
            eprintln!("{} {}: {}: {:.3e} (tol {:.1e})", if c.passed { "pass" } else { "FAIL" }, r.suite, c.name, c.measured, c.tolerance);
        }
        reports.push(r);
    }
    let passed = reports.iter().all(|r| r.passed);
    let rows = reports
        .iter()
        .flat_map(|r| r.checks.iter().map(move |c| vec![r.criterion as f64, c.measured, c.tolerance, if c.passed { 1.0 } else { 0.0 }]))
        .collect();
    let header = ["criterion", "measured", "tolerance", "passed"].map(String::from).to_vec();
    let d = doc("verify", Value::Null, json!({"suite": args.suite, "seed": args.seed}), json!({"passed": passed, "suites": to_value(&reports)}));
    let out = Output { doc: d, table: Some(Table { header, rows }) };
    if !passed {
        emit(&out, &args.out).map_err(|e| usage(e.to_string()))?;
        return Err(CliError::Verification(json!({"failed": reports.iter().filter(|r| !r.passed).map(|r| r.suite.clone()).collect::<Vec<_>>()})));
    }
    Ok((out, args.out))
}

fn unit(n: usize, i: usize) -> Vec<f64> {
    (0..n).map(|k| if k == i { 1.0 } else { 0.0 }).collect()
}

fn coord_names(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("x{i}")).collect()
}

fn emit(out: &Output, args: &OutputArgs) -> std::io::Result<()> {
    let text = match args.format {
        Format::Json => render_json(&to_value(&out.doc)),
        Format::Csv => render_csv(out).map_err(|e| std::io::Error::other(format!("{e:?}")))?,
    };
    match &args.output {
        Some(p) => std::fs::write(p, text),
        None => std::io::stdout().write_all(text.as_bytes()),
    }
}

fn error_document(kind: &str, message: &str, code: i32, extra: Value) -> String {
    render_json(&json!({"error": {"kind": kind, "message": message, "exit_code": code, "details": extra}}))
}

/// Runs the CLI on `argv` and returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return 0;
            }
            let _ = e.print();
            eprint!("{}", error_document("usage", &e.kind().to_string(), 2, Value::Null));
            return 2;
        }
    };
    if let Some(n) = cli.threads {
        if n == 0 || n > 1024 {
            eprint!("{}", error_document("usage", "--threads must be in 1..=1024", 2, Value::Null));
            return 2;
        }
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match execute(cli.command) {
        Ok((out, args)) => match emit(&out, &args) {
            Ok(()) => 0,
            Err(e) => {
                eprint!("{}", error_document("io", &e.to_string(), 1, Value::Null));
                1
            }
        },
        Err(e) => {
            let code = e.exit_code();
            let (kind, msg, extra) = match &e {
                CliError::Usage(m) => ("usage", m.clone(), Value::Null),
                CliError::Parse(p) => ("parse", p.to_string(), to_value(p)),
                CliError::Compute(g) => ("computation", g.to_string(), json!(format!("{g:?}"))),
                CliError::Verification(v) => ("verification", "verification suite failed".to_string(), v.clone()),
            };
            eprint!("{}", error_document(kind, &msg, code, extra));
            code
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_have_17_digits() {
        let s = render_json(&json!({"a": 0.1, "b": [1, 2.5], "c": f64::NAN}));
        assert!(s.contains("1.0000000000000001e-1"), "{s}");
        assert!(s.contains("[1, 2.5000000000000000e0]"), "{s}");
        assert!(serde_json::from_str::<Value>(&s).is_ok());
    }

    #[test]
    fn usage_errors_exit_2() {
        assert_eq!(run(["curvatur", "surface", "report", "--at", "1,2"]), 2);
        assert_eq!(run(["curvatur", "surface", "report", "--builtin", "nonesuch", "--at", "1,2"]), 2);
        assert_eq!(run(["curvatur", "verify", "--suite", "nonesuch"]), 2);
    }

    #[test]
    fn paths_parse() {
        let p = parse_path("0,0;1,0;1,1").unwrap();
        assert_eq!(p, vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![1.0, 1.0]]);
        assert!(parse_path("0,0;1").is_err());
    }
}
