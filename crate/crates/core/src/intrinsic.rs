//! Intrinsic geometry over metric charts.
//!
//! A [`MetricChart`] is a coordinate box with a metric evaluator that
//! accepts jets, so Christoffel symbols and their first partials come out
//! of jet arithmetic. Everything else (geodesics, the exponential map,
//! parallel transport, geodesic circles and the limit definitions of scalar
//! curvature) is built on the geodesic and transport ODEs.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{GeomError, Result};
use crate::numkit::{
    gauss_legendre_on, integrate_ode, local_then_compose, orthonormal_frame, quadrature, richardson,
    ExtrapolationLadder, FailureKind, Jet, OdeProblem, OutOfDomain, Trajectory,
};
use crate::surface::SurfacePatch;

type ChartPosition = Box<dyn Fn(&[f64], f64) -> Result<Vec<f64>>>;

/// Metric evaluator: coordinate jets to the `n × n` row-major matrix `g_ij`.
pub type MetricFn = Arc<dyn Fn(&[Jet]) -> Vec<Jet> + Send + Sync>;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Provenance {
    Pullback,
    Builtin(String),
    Parsed(String),
    User,
}

#[derive(Clone)]
pub struct MetricChart {
    dim: usize,
    domain: Vec<(f64, f64)>,
    periods: Vec<Option<f64>>,
    eval: MetricFn,
    /// Highest metric jet order the evaluator delivers exactly.
    max_order: usize,
    provenance: Provenance,
    surface: Option<SurfacePatch>,
}

impl std::fmt::Debug for MetricChart {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MetricChart")
            .field("dim", &self.dim)
            .field("domain", &self.domain)
            .field("provenance", &self.provenance)
            .finish()
    }
}

/// Volume of the unit ball and area of the unit sphere in `R^n`.
pub fn unit_ball_volume(n: usize) -> f64 {
    match n {
        2 => PI,
        3 => 4.0 * PI / 3.0,
        _ => panic!("dimension {n} not supported"),
    }
}

pub fn unit_sphere_area(n: usize) -> f64 {
    match n {
        2 => 2.0 * PI,
        3 => 4.0 * PI,
        _ => panic!("dimension {n} not supported"),
    }
}

impl MetricChart {
    pub fn new<F>(dim: usize, domain: Vec<(f64, f64)>, eval: F) -> Result<Self>
    where
        F: Fn(&[Jet]) -> Vec<Jet> + Send + Sync + 'static,
    {
        if !(2..=3).contains(&dim) {
            return Err(GeomError::Precondition(format!("chart dimension {dim} not in {{2, 3}}")));
        }
        if domain.len() != dim || domain.iter().any(|(a, b)| !(a < b)) {
            return Err(GeomError::Precondition("domain must be a non-empty box".into()));
        }
        Ok(MetricChart {
            dim,
            domain,
            periods: vec![None; dim],
            eval: Arc::new(eval),
            max_order: 3,
            provenance: Provenance::User,
            surface: None,
        })
    }

    pub fn with_periods(mut self, periods: Vec<Option<f64>>) -> Self {
        assert_eq!(periods.len(), self.dim);
        self.periods = periods;
        self
    }

    pub fn with_provenance(mut self, p: Provenance) -> Self {
        self.provenance = p;
        self
    }

    pub fn with_domain(&self, domain: Vec<(f64, f64)>) -> Self {
        MetricChart { domain, ..self.clone() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn domain(&self) -> &[(f64, f64)] {
        &self.domain
    }

    pub fn periods(&self) -> &[Option<f64>] {
        &self.periods
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    /// The immersed patch, for pullback charts.
    pub fn surface(&self) -> Option<&SurfacePatch> {
        self.surface.as_ref()
    }

    pub fn max_order(&self) -> usize {
        self.max_order
    }

    /// Strictly inside the box; periodic coordinates are unrestricted.
    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter().zip(&self.domain).zip(&self.periods).all(|((&xi, &(a, b)), p)| {
            xi.is_finite() && (p.is_some() || (xi > a && xi < b))
        })
    }

    /// `x` with periodic coordinates reduced into the domain box.
    pub fn wrap(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.domain)
            .zip(&self.periods)
            .map(|((&xi, &(a, _)), p)| match p {
                Some(per) => a + (xi - a).rem_euclid(*per),
                None => xi,
            })
            .collect()
    }

    /// Coordinate difference `y − x` with periodic coordinates taken to the
    /// nearest representative.
    pub fn difference(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(y)
            .zip(&self.periods)
            .map(|((&a, &b), p)| match p {
                Some(per) => {
                    let d = b - a;
                    d - per * (d / per).round()
                }
                None => b - a,
            })
            .collect()
    }

    pub fn metric_jets(&self, x: &[Jet]) -> Vec<Jet> {
        (self.eval)(x)
    }

    pub fn metric_at(&self, x: &[f64]) -> DMatrix<f64> {
        let vars: Vec<Jet> = x.iter().map(|&v| Jet::constant(v, self.dim, 0)).collect();
        let g = self.metric_jets(&vars);
        DMatrix::from_fn(self.dim, self.dim, |i, j| g[i * self.dim + j].value())
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(GeomError::Precondition(format!(
                "point has {} coordinates, chart has {}",
                x.len(),
                self.dim
            )));
        }
        if !self.contains(x) {
            return Err(GeomError::DomainExit {
                t: 0.0,
                state: x.to_vec(),
            });
        }
        Ok(())
    }

    /// Christoffel symbols `Γ^k_ij` (index `k·n² + i·n + j`) as jets of
    /// order `order` in the local coordinates at `x`.
    pub fn christoffel_jets_at(&self, x: &[f64], order: usize) -> Result<Vec<Jet>> {
        if order + 1 > self.max_order {
            return Err(GeomError::Precondition(format!(
                "metric carries {} derivatives; Christoffel jets of order {order} need {}",
                self.max_order,
                order + 1
            )));
        }
        let vars = Jet::variables(x, order + 1);
        let g = self.metric_jets(&vars);
        christoffel_from_metric(&g, self.dim)
    }

    /// Christoffel symbols re-expressed at arbitrary input jets (one order
    /// is consumed by the metric derivative).
    pub fn christoffel_of(&self, inputs: &[Jet]) -> Vec<Jet> {
        let n = self.dim;
        local_then_compose(inputs, 1, |local| {
            let g = self.metric_jets(local);
            christoffel_from_metric(&g, n).unwrap_or_else(|_| vec![local[0].lift(f64::NAN); n * n * n])
        })
    }
}

/// Inverse of a small symmetric jet matrix by cofactors.
pub(crate) fn inverse_jets(g: &[Jet], n: usize) -> Result<Vec<Jet>> {
    let at = |i: usize, j: usize| g[i * n + j];
    match n {
        2 => {
            let det = at(0, 0) * at(1, 1) - at(0, 1) * at(1, 0);
            if !(det.value() > 0.0) {
                return Err(GeomError::Precondition("metric is not positive definite".into()));
            }
            let inv = det.recip();
            Ok(vec![at(1, 1) * inv, -at(0, 1) * inv, -at(1, 0) * inv, at(0, 0) * inv])
        }
        3 => {
            let cof = |i: usize, j: usize| {
                let (r0, r1) = ((i + 1) % 3, (i + 2) % 3);
                let (c0, c1) = ((j + 1) % 3, (j + 2) % 3);
                at(r0, c0) * at(r1, c1) - at(r0, c1) * at(r1, c0)
            };
            let det = at(0, 0) * cof(0, 0) + at(0, 1) * cof(0, 1) + at(0, 2) * cof(0, 2);
            if !(det.value() > 0.0) {
                return Err(GeomError::Precondition("metric is not positive definite".into()));
            }
            let inv = det.recip();
            let mut out = Vec::with_capacity(9);
            for i in 0..3 {
                for j in 0..3 {
                    out.push(cof(j, i) * inv);
                }
            }
            Ok(out)
        }
        _ => Err(GeomError::Precondition(format!("dimension {n} not supported"))),
    }
}

/// `2Γ^k_ij = Σ_l g^{kl}(∂_i g_lj + ∂_j g_li − ∂_l g_ij)`.
pub(crate) fn christoffel_from_metric(g: &[Jet], n: usize) -> Result<Vec<Jet>> {
    let order = g[0].order();
    if order == 0 {
        return Err(GeomError::Precondition("metric jets carry no derivatives".into()));
    }
    let ginv: Vec<Jet> = inverse_jets(g, n)?.iter().map(|j| j.truncate(order - 1)).collect();
    // dg[a][i][j] = ∂_a g_ij
    let dg: Vec<Jet> = (0..n)
        .flat_map(|a| (0..n * n).map(move |ij| (a, ij)))
        .map(|(a, ij)| g[ij].derivative(a))
        .collect();
    let d = |a: usize, i: usize, j: usize| dg[a * n * n + i * n + j];
    let mut out = Vec::with_capacity(n * n * n);
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let mut acc = ginv[0].lift(0.0);
                for l in 0..n {
                    acc += ginv[k * n + l] * (d(i, l, j) + d(j, l, i) - d(l, i, j));
                }
                out.push(acc * 0.5);
            }
        }
    }
    Ok(out)
}

/// The first fundamental form of a patch as a chart.
pub fn pullback_metric(surface: &SurfacePatch) -> Result<MetricChart> {
    surface.check_regular_on_grid(8)?;
    let s = surface.clone();
    let [(a, b), (c, d)] = surface.domain();
    let eval = move |x: &[Jet]| -> Vec<Jet> {
        local_then_compose(x, 1, |loc| {
            let r = s.eval_jet(&loc[0], &loc[1]);
            let ru: Vec<Jet> = r.iter().map(|c| c.derivative(0)).collect();
            let rv: Vec<Jet> = r.iter().map(|c| c.derivative(1)).collect();
            let dot = |p: &[Jet], q: &[Jet]| p[0] * q[0] + p[1] * q[1] + p[2] * q[2];
            let e = dot(&ru, &ru);
            let f = dot(&ru, &rv);
            let g = dot(&rv, &rv);
            vec![e, f, f, g]
        })
    };
    let mut chart = MetricChart::new(2, vec![(a, b), (c, d)], eval)?;
    chart.periods = surface.periods().to_vec();
    chart.max_order = surface.max_order().saturating_sub(1);
    chart.provenance = Provenance::Pullback;
    chart.surface = Some(surface.clone());
    Ok(chart)
}

/// Christoffel symbols at a point, `Γ^k_ij` at index `k·n² + i·n + j`.
#[derive(Debug, Clone, Serialize)]
pub struct Christoffel {
    pub dim: usize,
    pub values: Vec<f64>,
}

impl Christoffel {
    pub fn get(&self, k: usize, i: usize, j: usize) -> f64 {
        let n = self.dim;
        self.values[k * n * n + i * n + j]
    }
}

pub fn christoffel_at(chart: &MetricChart, x: &[f64]) -> Result<Christoffel> {
    chart.check_point(x)?;
    let g = chart.christoffel_jets_at(x, 0)?;
    Ok(Christoffel {
        dim: chart.dim,
        values: g.iter().map(|j| j.value()).collect(),
    })
}

/// Christoffel symbols of a patch from the ambient decomposition
/// `r_ij = Γ^1_ij r_1 + Γ^2_ij r_2 + q_ij n`.
pub fn christoffel_embedded(surface: &SurfacePatch, uv: [f64; 2]) -> Result<Christoffel> {
    let f = crate::surface::forms_at(surface, uv)?;
    let r = surface.local_jet(uv, 2);
    let basis = [f.r_u, f.r_v];
    let ginv = f
        .g
        .try_inverse()
        .ok_or_else(|| GeomError::Precondition("degenerate first form".into()))?;
    let mut values = vec![0.0; 8];
    for i in 0..2 {
        for j in 0..2 {
            let rij = nalgebra::Vector3::new(r[0].partial(&[i, j]), r[1].partial(&[i, j]), r[2].partial(&[i, j]));
            let proj = nalgebra::Vector2::new(basis[0].dot(&rij), basis[1].dot(&rij));
            let c = ginv * proj;
            for k in 0..2 {
                values[k * 4 + i * 2 + j] = c[k];
            }
        }
    }
    Ok(Christoffel { dim: 2, values })
}

// ---------------------------------------------------------------------------
// geodesics and the exponential map

/// Right-hand side of the geodesic equation, optionally with `jacobi`
/// variational fields. State layout: `x`, `x'`, then the fields `J_c`
/// followed by their derivatives `J_c'`.
fn geodesic_rhs(chart: &MetricChart, jacobi: usize, y: &[f64], dy: &mut [f64]) -> std::result::Result<(), OutOfDomain> {
    let n = chart.dim;
    let x = &y[..n];
    if !chart.contains(x) {
        return Err(OutOfDomain);
    }
    let order = usize::from(jacobi > 0);
    let gam = chart.christoffel_jets_at(x, order).map_err(|_| OutOfDomain)?;
    let v = &y[n..2 * n];
    dy[..n].copy_from_slice(v);
    for k in 0..n {
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                acc -= gam[k * n * n + i * n + j].value() * v[i] * v[j];
            }
        }
        dy[n + k] = acc;
    }
    for c in 0..jacobi {
        let jo = 2 * n + c * n;
        let jpo = 2 * n + jacobi * n + c * n;
        for k in 0..n {
            dy[jo + k] = y[jpo + k];
            let mut acc = 0.0;
            for i in 0..n {
                for j in 0..n {
                    let gm = &gam[k * n * n + i * n + j];
                    let mut dgam_j = 0.0;
                    for p in 0..n {
                        dgam_j += gm.partial(&[p]) * y[jo + p];
                    }
                    acc -= dgam_j * v[i] * v[j] + 2.0 * gm.value() * v[i] * y[jpo + j];
                }
            }
            dy[jpo + k] = acc;
        }
    }
    if dy.iter().all(|d| d.is_finite()) {
        Ok(())
    } else {
        Err(OutOfDomain)
    }
}

fn solve_geodesic(
    chart: &MetricChart,
    y0: Vec<f64>,
    jacobi: usize,
    t1: f64,
) -> std::result::Result<Trajectory, crate::numkit::OdeFailure> {
    let rhs = |_t: f64, y: &[f64], dy: &mut [f64]| geodesic_rhs(chart, jacobi, y, dy);
    integrate_ode(OdeProblem::new(rhs, y0, 0.0, t1))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Termination {
    Completed,
    DomainExit { at: f64 },
}

#[derive(Debug, Clone, Serialize)]
pub struct GeodesicSample {
    pub t: f64,
    pub x: Vec<f64>,
    pub velocity: Vec<f64>,
}

/// A unit-speed geodesic, sampled at the accepted solver steps.
#[derive(Debug, Clone, Serialize)]
pub struct GeodesicPath {
    pub samples: Vec<GeodesicSample>,
    /// Length actually traced.
    pub length: f64,
    pub termination: Termination,
    /// `max |g(x', x') − 1|` over the samples.
    pub speed_drift: f64,
    #[serde(skip)]
    trajectory: Trajectory,
}

impl GeodesicPath {
    pub fn position(&self, t: f64) -> Vec<f64> {
        let n = self.samples[0].x.len();
        self.trajectory.interpolate(t)[..n].to_vec()
    }

    pub fn velocity(&self, t: f64) -> Vec<f64> {
        let n = self.samples[0].x.len();
        self.trajectory.interpolate(t)[n..2 * n].to_vec()
    }

    pub fn end(&self) -> &GeodesicSample {
        self.samples.last().expect("non-empty path")
    }
}

/// `v` scaled to unit `g`-length at `x`.
pub fn normalize_at(chart: &MetricChart, x: &[f64], v: &[f64]) -> Result<Vec<f64>> {
    let g = chart.metric_at(x);
    let len = g_len(&g, v);
    if !(len > 0.0) || !len.is_finite() {
        return Err(GeomError::Precondition("initial velocity has zero length".into()));
    }
    Ok(v.iter().map(|c| c / len).collect())
}

fn g_len(g: &DMatrix<f64>, v: &[f64]) -> f64 {
    crate::numkit::g_norm(g, v)
}

/// Geodesic from `x0` with initial direction `v0` (normalized to unit speed)
/// traced for arc length `length`. Leaving the chart truncates the path.
pub fn geodesic_trace(chart: &MetricChart, x0: &[f64], v0: &[f64], length: f64) -> Result<GeodesicPath> {
    chart.check_point(x0)?;
    if !(length >= 0.0) || !length.is_finite() {
        return Err(GeomError::Precondition("length must be finite and non-negative".into()));
    }
    let v = normalize_at(chart, x0, v0)?;
    let mut y0 = x0.to_vec();
    y0.extend_from_slice(&v);
    let (traj, termination) = match solve_geodesic(chart, y0, 0, length) {
        Ok(t) => (t, Termination::Completed),
        Err(f) if f.kind == FailureKind::DomainExit => {
            let at = f.t;
            (f.partial, Termination::DomainExit { at })
        }
        Err(f) => return Err(f.into()),
    };
    let n = chart.dim;
    let mut drift = 0.0f64;
    let samples: Vec<GeodesicSample> = (0..traj.len())
        .map(|i| {
            let s = traj.state(i);
            let g = chart.metric_at(&s[..n]);
            drift = drift.max((crate::numkit::g_dot(&g, &s[n..], &s[n..]) - 1.0).abs());
            GeodesicSample {
                t: traj.ts[i],
                x: s[..n].to_vec(),
                velocity: s[n..2 * n].to_vec(),
            }
        })
        .collect();
    Ok(GeodesicPath {
        length: traj.t_end(),
        samples,
        termination,
        speed_drift: drift,
        trajectory: traj,
    })
}

/// `exp_P(u)`: the geodesic with initial velocity `u` at parameter 1.
pub fn exp_map(chart: &MetricChart, p: &[f64], u: &[f64]) -> Result<Vec<f64>> {
    chart.check_point(p)?;
    if u.iter().all(|c| *c == 0.0) {
        return Ok(p.to_vec());
    }
    let mut y0 = p.to_vec();
    y0.extend_from_slice(u);
    let traj = solve_geodesic(chart, y0, 0, 1.0)?;
    Ok(traj.final_state()[..chart.dim].to_vec())
}

/// `exp_P(u)` together with its differential `D exp_P(u)` (columns are
/// the images of the coordinate basis), from the variational equations.
pub fn exp_with_differential(chart: &MetricChart, p: &[f64], u: &[f64]) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let n = chart.dim;
    let cols = DMatrix::identity(n, n);
    let (x, j) = exp_with_jacobi(chart, p, u, &cols)?;
    Ok((x, j))
}

/// `exp_P(u)` and `D exp_P(u) · W` for the columns of `w`.
pub fn exp_with_jacobi(chart: &MetricChart, p: &[f64], u: &[f64], w: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    chart.check_point(p)?;
    let n = chart.dim;
    let m = w.ncols();
    let mut y0 = p.to_vec();
    y0.extend_from_slice(u);
    y0.extend(std::iter::repeat_n(0.0, n * m));
    for c in 0..m {
        for k in 0..n {
            y0.push(w[(k, c)]);
        }
    }
    let traj = solve_geodesic(chart, y0, m, 1.0)?;
    let y = traj.final_state();
    let x = y[..n].to_vec();
    let j = DMatrix::from_fn(n, m, |k, c| y[2 * n + c * n + k]);
    Ok((x, j))
}

/// Metric of the normal coordinates `y ↦ exp_P(E y)`, `E` the
/// `g`-orthonormal frame at `P`.
pub fn normal_coordinate_metric(chart: &MetricChart, p: &[f64], y: &[f64]) -> Result<DMatrix<f64>> {
    let e = orthonormal_frame(&chart.metric_at(p))?;
    let u = &e * DVector::from_column_slice(y);
    let (x, j) = exp_with_jacobi(chart, p, u.as_slice(), &e)?;
    let g = chart.metric_at(&x);
    Ok(j.transpose() * g * j)
}

// ---------------------------------------------------------------------------
// parallel transport and holonomy

/// Curve in chart coordinates: parameter to `(x, x')`.
pub type CurveMap = Arc<dyn Fn(f64) -> Result<(Vec<f64>, Vec<f64>)> + Send + Sync>;

#[derive(Clone)]
pub enum PathSegment {
    /// Geodesic with initial point and velocity, traced for `t ∈ [0, 1]`.
    Geodesic { from: Vec<f64>, velocity: Vec<f64> },
    /// Arbitrary smooth curve over `span`.
    Curve { map: CurveMap, span: (f64, f64) },
}

impl std::fmt::Debug for PathSegment {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PathSegment::Geodesic { from, velocity } => {
                f.debug_struct("Geodesic").field("from", from).field("velocity", velocity).finish()
            }
            PathSegment::Curve { span, .. } => f.debug_struct("Curve").field("span", span).finish(),
        }
    }
}

impl PathSegment {
    pub fn curve<F>(span: (f64, f64), f: F) -> Self
    where
        F: Fn(f64) -> (Vec<f64>, Vec<f64>) + Send + Sync + 'static,
    {
        PathSegment::Curve {
            map: Arc::new(move |t| Ok(f(t))),
            span,
        }
    }

    /// Straight coordinate segment from `a` to `b`.
    pub fn line(a: &[f64], b: &[f64]) -> Self {
        let a = a.to_vec();
        let d: Vec<f64> = b.iter().zip(&a).map(|(y, x)| y - x).collect();
        PathSegment::curve((0.0, 1.0), move |t| {
            (a.iter().zip(&d).map(|(x, dx)| x + t * dx).collect(), d.clone())
        })
    }

    pub fn geodesic(from: &[f64], velocity: &[f64]) -> Self {
        PathSegment::Geodesic {
            from: from.to_vec(),
            velocity: velocity.to_vec(),
        }
    }

    /// The closed coordinate polygon through `points`.
    pub fn polygon(points: &[Vec<f64>]) -> Vec<Self> {
        (0..points.len())
            .map(|i| PathSegment::line(&points[i], &points[(i + 1) % points.len()]))
            .collect()
    }

    fn start(&self) -> Result<Vec<f64>> {
        match self {
            PathSegment::Geodesic { from, .. } => Ok(from.clone()),
            PathSegment::Curve { map, span } => Ok(map(span.0)?.0),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TransportSample {
    pub segment: usize,
    pub t: f64,
    pub x: Vec<f64>,
    /// Transported images of the starting coordinate basis (columns).
    pub frame: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TransportResult {
    pub samples: Vec<TransportSample>,
    pub start: Vec<f64>,
    pub end: Vec<f64>,
    /// Transport matrix in coordinate bases (column `c` is the image of `e_c`).
    #[serde(serialize_with = "ser_matrix")]
    pub matrix: DMatrix<f64>,
    /// `max |g(Ta_i, Ta_j) − g(a_i, a_j)|` over samples.
    pub inner_product_drift: f64,
}

impl TransportResult {
    pub fn apply(&self, a: &[f64]) -> Vec<f64> {
        (&self.matrix * DVector::from_column_slice(a)).as_slice().to_vec()
    }

    /// Transported vector at each sample.
    pub fn vectors(&self, a: &[f64]) -> Vec<Vec<f64>> {
        self.samples
            .iter()
            .map(|s| {
                (0..a.len())
                    .map(|k| s.frame.iter().zip(a).map(|(col, ac)| col[k] * ac).sum())
                    .collect()
            })
            .collect()
    }
}

pub(crate) fn ser_matrix<S: serde::Serializer>(m: &DMatrix<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::Serialize;
    let rows: Vec<Vec<f64>> = (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect();
    rows.serialize(s)
}

const JOIN_TOL: f64 = 1e-9;

/// Parallel transport of the full coordinate frame along consecutive
/// segments, `a_k' + Σ Γ^k_ij x_i' a_j = 0`.
pub fn parallel_transport_frame(chart: &MetricChart, path: &[PathSegment]) -> Result<TransportResult> {
    let n = chart.dim;
    if path.is_empty() {
        return Err(GeomError::Precondition("empty path".into()));
    }
    let start = path[0].start()?;
    chart.check_point(&start)?;
    let g0 = chart.metric_at(&start);
    let mut frame = DMatrix::<f64>::identity(n, n);
    let mut here = start.clone();
    let mut samples = Vec::new();
    let mut drift = 0.0f64;
    for (si, seg) in path.iter().enumerate() {
        let s0 = seg.start()?;
        let gap = chart.difference(&here, &s0).iter().fold(0.0f64, |m, d| m.max(d.abs()));
        if gap > JOIN_TOL {
            return Err(GeomError::Precondition(format!(
                "segment {si} starts {gap:e} away from the end of the previous one"
            )));
        }
        let (traj, xs_of): (Trajectory, ChartPosition) = match seg {
            PathSegment::Geodesic { from, velocity } => {
                let mut y0 = from.clone();
                y0.extend_from_slice(velocity);
                y0.extend(frame.iter().copied());
                let rhs = |_t: f64, y: &[f64], dy: &mut [f64]| -> std::result::Result<(), OutOfDomain> {
                    geodesic_rhs(chart, 0, &y[..2 * n], &mut dy[..2 * n])?;
                    let gam = chart.christoffel_jets_at(&y[..n], 0).map_err(|_| OutOfDomain)?;
                    transport_rhs(&gam, n, &y[n..2 * n], &y[2 * n..], &mut dy[2 * n..]);
                    Ok(())
                };
                let traj = integrate_ode(OdeProblem::new(rhs, y0, 0.0, 1.0))?;
                (traj, Box::new(move |y: &[f64], _t: f64| Ok(y[..n].to_vec())))
            }
            PathSegment::Curve { map, span } => {
                let y0: Vec<f64> = frame.iter().copied().collect();
                let map2 = map.clone();
                let rhs = |t: f64, y: &[f64], dy: &mut [f64]| -> std::result::Result<(), OutOfDomain> {
                    let (x, xd) = map2(t).map_err(|_| OutOfDomain)?;
                    if !chart.contains(&x) {
                        return Err(OutOfDomain);
                    }
                    let gam = chart.christoffel_jets_at(&x, 0).map_err(|_| OutOfDomain)?;
                    transport_rhs(&gam, n, &xd, y, dy);
                    Ok(())
                };
                let traj = integrate_ode(OdeProblem::new(rhs, y0, span.0, span.1))?;
                let map3 = map.clone();
                (traj, Box::new(move |_y: &[f64], t: f64| Ok(map3(t)?.0)))
            }
        };
        let off = if matches!(seg, PathSegment::Geodesic { .. }) { 2 * n } else { 0 };
        for i in 0..traj.len() {
            let y = traj.state(i);
            let x = xs_of(y, traj.ts[i])?;
            let f = DMatrix::from_column_slice(n, n, &y[off..off + n * n]);
            let g = chart.metric_at(&x);
            let gram = f.transpose() * &g * &f;
            drift = drift.max((gram - &g0).amax());
            samples.push(TransportSample {
                segment: si,
                t: traj.ts[i],
                x,
                frame: (0..n).map(|c| f.column(c).iter().copied().collect()).collect(),
            });
        }
        let y = traj.final_state();
        frame = DMatrix::from_column_slice(n, n, &y[off..off + n * n]);
        here = xs_of(y, traj.t_end())?;
    }
    Ok(TransportResult {
        samples,
        start,
        end: here,
        matrix: frame,
        inner_product_drift: drift,
    })
}

fn transport_rhs(gam: &[Jet], n: usize, xd: &[f64], a: &[f64], da: &mut [f64]) {
    for c in 0..n {
        for k in 0..n {
            let mut acc = 0.0;
            for i in 0..n {
                for j in 0..n {
                    acc -= gam[k * n * n + i * n + j].value() * xd[i] * a[c * n + j];
                }
            }
            da[c * n + k] = acc;
        }
    }
}

/// Transport of a single vector `a0` along the path.
pub fn parallel_transport(chart: &MetricChart, path: &[PathSegment], a0: &[f64]) -> Result<(TransportResult, Vec<f64>)> {
    let r = parallel_transport_frame(chart, path)?;
    let a = r.apply(a0);
    Ok((r, a))
}

#[derive(Debug, Clone, Serialize)]
pub struct Holonomy {
    /// Transport matrix in the coordinate basis at the base point.
    #[serde(serialize_with = "ser_matrix")]
    pub matrix: DMatrix<f64>,
    /// The same map in the `g`-orthonormal frame at the base point.
    #[serde(serialize_with = "ser_matrix")]
    pub orthonormal: DMatrix<f64>,
    /// Rotation angle in `(−π, π]`, measured from the first frame vector
    /// towards the second (2D charts only).
    pub angle: Option<f64>,
    /// `max |Mᵀ G M − G|`.
    pub orthogonality_residual: f64,
}

/// Holonomy of a closed loop.
pub fn holonomy(chart: &MetricChart, path: &[PathSegment]) -> Result<Holonomy> {
    let t = parallel_transport_frame(chart, path)?;
    let gap = chart.difference(&t.start, &t.end).iter().fold(0.0f64, |m, d| m.max(d.abs()));
    if gap > JOIN_TOL {
        return Err(GeomError::Precondition(format!("loop is not closed (gap {gap:e})")));
    }
    holonomy_from_matrix(chart, &t.start, t.matrix)
}

fn holonomy_from_matrix(chart: &MetricChart, base: &[f64], m: DMatrix<f64>) -> Result<Holonomy> {
    let g = chart.metric_at(base);
    let e = orthonormal_frame(&g)?;
    let einv = e.clone().try_inverse().expect("frame is invertible");
    let q = &einv * &m * &e;
    let residual = (m.transpose() * &g * &m - &g).amax();
    let angle = (chart.dim == 2).then(|| q[(1, 0)].atan2(q[(0, 0)]));
    Ok(Holonomy {
        matrix: m,
        orthonormal: q,
        angle,
        orthogonality_residual: residual,
    })
}

/// Loop `exp_P(∂A)` for the polygon `A ⊂ T_P` with the given vertices
/// (tangent vectors at `P`), traversed in order starting and ending at `P`.
/// Edges through `P` are radial geodesics; others are exp-images of straight
/// edges.
pub fn exp_polygon_loop(chart: &MetricChart, p: &[f64], vertices: &[Vec<f64>]) -> Vec<PathSegment> {
    let n = chart.dim;
    let zero = vec![0.0; n];
    let mut pts = vec![zero.clone()];
    pts.extend(vertices.iter().cloned());
    pts.push(zero.clone());
    let mut segs = Vec::new();
    for w in pts.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        let a_zero = a.iter().all(|c| *c == 0.0);
        let b_zero = b.iter().all(|c| *c == 0.0);
        if a_zero {
            segs.push(PathSegment::geodesic(p, b));
        } else if b_zero {
            // reversed radial edge: exp_P((1−t)a)
            segs.push(exp_edge(chart, p, a, &zero));
        } else {
            segs.push(exp_edge(chart, p, a, b));
        }
    }
    segs
}

fn exp_edge(chart: &MetricChart, p: &[f64], a: &[f64], b: &[f64]) -> PathSegment {
    let chart = chart.clone();
    let p = p.to_vec();
    let a = a.to_vec();
    let d: Vec<f64> = b.iter().zip(&a).map(|(y, x)| y - x).collect();
    let n = chart.dim;
    PathSegment::Curve {
        span: (0.0, 1.0),
        map: Arc::new(move |t| {
            let w: Vec<f64> = a.iter().zip(&d).map(|(x, dx)| x + t * dx).collect();
            let (x, j) = exp_with_jacobi(&chart, &p, &w, &DMatrix::from_column_slice(n, 1, &d))?;
            Ok((x, j.column(0).iter().copied().collect()))
        }),
    }
}

// ---------------------------------------------------------------------------
// geodesic circles and scalar curvature

#[derive(Debug, Clone, Copy, Serialize)]
pub struct CircleConfig {
    /// Direction samples of the finest polygon; the two coarser rungs use
    /// every second and fourth direction.
    pub directions: usize,
    /// Gauss–Legendre nodes for `S(R) = ∫₀^R L`.
    pub area_nodes: usize,
}

impl Default for CircleConfig {
    fn default() -> Self {
        CircleConfig {
            directions: 512,
            area_nodes: 12,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct GeodesicCircle {
    pub radius: f64,
    pub length: f64,
    pub length_error: f64,
    pub area: f64,
    pub area_error: f64,
}

/// Positions of the geodesic from `p` with velocity `dir` at the arc-length
/// parameters `stops` (ascending).
fn trace_stops(chart: &MetricChart, p: &[f64], dir: &[f64], stops: &[f64]) -> Result<Vec<Vec<f64>>> {
    let n = chart.dim;
    let mut y = p.to_vec();
    y.extend_from_slice(dir);
    let mut t = 0.0;
    let mut out = Vec::with_capacity(stops.len());
    for &s in stops {
        if s > t {
            let rhs = |_t: f64, y: &[f64], dy: &mut [f64]| geodesic_rhs(chart, 0, y, dy);
            let traj = integrate_ode(OdeProblem::new(rhs, y.clone(), t, s))?;
            y = traj.final_state().to_vec();
            t = s;
        }
        out.push(y[..n].to_vec());
    }
    Ok(out)
}

/// `g`-orthonormal pair spanning the plane of `a`, `b` at `p`; the first
/// two frame vectors when no plane is given.
pub fn plane_frame(chart: &MetricChart, p: &[f64], plane: Option<(&[f64], &[f64])>) -> Result<(Vec<f64>, Vec<f64>)> {
    let g = chart.metric_at(p);
    match plane {
        None => {
            let e = orthonormal_frame(&g)?;
            Ok((e.column(0).iter().copied().collect(), e.column(1).iter().copied().collect()))
        }
        Some((a, b)) => {
            let la = g_len(&g, a);
            let e1: Vec<f64> = a.iter().map(|c| c / la).collect();
            let ab = crate::numkit::g_dot(&g, &e1, b);
            let w: Vec<f64> = b.iter().zip(&e1).map(|(bi, ei)| bi - ab * ei).collect();
            let lw = g_len(&g, &w);
            if !(la > 0.0) || !(lw > 1e-12 * la.max(1.0)) {
                return Err(GeomError::Precondition("plane vectors are linearly dependent".into()));
            }
            Ok((e1, w.iter().map(|c| c / lw).collect()))
        }
    }
}

/// Geodesic circles of the given radii about `p`, in the plane of the given
/// pair (the whole tangent plane for 2D charts).
pub fn geodesic_circles(
    chart: &MetricChart,
    p: &[f64],
    radii: &[f64],
    plane: Option<(&[f64], &[f64])>,
    cfg: CircleConfig,
) -> Result<Vec<GeodesicCircle>> {
    chart.check_point(p)?;
    if cfg.directions < 16 || !cfg.directions.is_multiple_of(4) {
        return Err(GeomError::InvalidParam("directions must be a multiple of 4, at least 16".into()));
    }
    if radii.iter().any(|r| !(*r > 0.0)) {
        return Err(GeomError::InvalidParam("radii must be positive".into()));
    }
    if chart.dim == 3 && plane.is_none() {
        return Err(GeomError::Precondition("3D charts need a plane for geodesic circles".into()));
    }
    let (a, b) = plane_frame(chart, p, plane)?;
    // stop list: every radius and the quadrature nodes of every [0, R]
    let mut stops: Vec<f64> = radii.to_vec();
    let nodes: Vec<Vec<(f64, f64)>> = radii.iter().map(|&r| gauss_legendre_on(cfg.area_nodes, 0.0, r)).collect();
    for nd in &nodes {
        stops.extend(nd.iter().map(|(x, _)| *x));
    }
    stops.sort_by(f64::total_cmp);
    stops.dedup();
    let m = cfg.directions;
    let rows: Vec<Vec<Vec<f64>>> = (0..m)
        .into_par_iter()
        .map(|j| {
            let phi = 2.0 * PI * j as f64 / m as f64;
            let dir: Vec<f64> = a.iter().zip(&b).map(|(x, y)| phi.cos() * x + phi.sin() * y).collect();
            trace_stops(chart, p, &dir, &stops)
        })
        .collect::<Result<_>>()?;
    let index = |r: f64| stops.binary_search_by(|s| s.total_cmp(&r)).expect("stop present");
    let length_at = |r: f64| -> (f64, f64) {
        let k = index(r);
        let pts: Vec<&Vec<f64>> = rows.iter().map(|row| &row[k]).collect();
        let poly = |stride: usize| -> f64 {
            let q = m / stride;
            (0..q)
                .map(|i| {
                    let x0 = pts[i * stride];
                    let x1 = pts[((i + 1) % q) * stride];
                    let mid: Vec<f64> = x0.iter().zip(x1).map(|(u, v)| 0.5 * (u + v)).collect();
                    let d: Vec<f64> = x0.iter().zip(x1).map(|(u, v)| v - u).collect();
                    g_len(&chart.metric_at(&mid), &d)
                })
                .sum()
        };
        let ladder = ExtrapolationLadder::new(
            vec![4.0 / m as f64, 2.0 / m as f64, 1.0 / m as f64],
            vec![poly(4), poly(2), poly(1)],
            2,
        )
        .expect("valid ladder");
        let e = richardson(&ladder);
        (e.value, e.error)
    };
    Ok(radii
        .iter()
        .zip(&nodes)
        .map(|(&r, nd)| {
            let (length, length_error) = length_at(r);
            let mut area = 0.0;
            let mut area_error = 0.0;
            for &(x, w) in nd {
                let (l, e) = length_at(x);
                area += w * l;
                area_error += w * e;
            }
            GeodesicCircle {
                radius: r,
                length,
                length_error,
                area,
                area_error,
            }
        })
        .collect())
}

pub fn geodesic_circle(chart: &MetricChart, p: &[f64], r: f64) -> Result<GeodesicCircle> {
    Ok(geodesic_circles(chart, p, &[r], None, CircleConfig::default())?[0])
}

#[derive(Debug, Clone, Serialize)]
pub struct LimitEstimate {
    pub value: f64,
    pub error: f64,
    pub non_monotone: bool,
    pub ladder: ExtrapolationLadder,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScalarCurvature {
    pub tau: f64,
    pub error: f64,
    /// `6 lim (2πR − L(R)) / (πR³)` (2D).
    pub circle: Option<LimitEstimate>,
    /// `24 lim (πR² − S(R)) / (πR⁴)` (2D).
    pub disk: Option<LimitEstimate>,
    /// `6 lim (S_n R^{n−1} − S(R)) / (V_n R^{n+1})` (3D).
    pub sphere: Option<LimitEstimate>,
    /// Radii actually used.
    pub radii: Vec<f64>,
    /// Circle and disk routes agree within their combined error estimate.
    pub routes_agree: bool,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ScalarConfig {
    pub r0: f64,
    pub circle: CircleConfig,
    /// Direction grid for 3D geodesic spheres: Gauss–Legendre nodes in `cos θ`
    /// and uniform samples in `φ`.
    pub sphere_grid: (usize, usize),
}

impl Default for ScalarConfig {
    fn default() -> Self {
        ScalarConfig {
            r0: 0.2,
            circle: CircleConfig::default(),
            sphere_grid: (16, 32),
        }
    }
}

/// Scalar curvature at `p` from the limit definitions, Richardson-extrapolated
/// over `{R₀, R₀/2, R₀/4}`. `R₀` is halved (up to six times) while a geodesic
/// leaves the chart.
pub fn scalar_curvature_estimate(chart: &MetricChart, p: &[f64]) -> Result<ScalarCurvature> {
    scalar_curvature_with(chart, p, ScalarConfig::default())
}

pub fn scalar_curvature_with(chart: &MetricChart, p: &[f64], cfg: ScalarConfig) -> Result<ScalarCurvature> {
    chart.check_point(p)?;
    let mut r0 = cfg.r0;
    for _ in 0..7 {
        match scalar_at_radius(chart, p, r0, cfg) {
            Err(GeomError::DomainExit { .. }) => r0 /= 2.0,
            other => return other,
        }
    }
    Err(GeomError::Precondition("geodesic circles leave the chart at every tried radius".into()))
}

fn scalar_at_radius(chart: &MetricChart, p: &[f64], r0: f64, cfg: ScalarConfig) -> Result<ScalarCurvature> {
    let radii = vec![r0, r0 / 2.0, r0 / 4.0];
    if chart.dim == 2 {
        let circles = geodesic_circles(chart, p, &radii, None, cfg.circle)?;
        let circle = limit(&radii, circles.iter().map(|c| 6.0 * (2.0 * PI * c.radius - c.length) / (PI * c.radius.powi(3))));
        let disk = limit(
            &radii,
            circles.iter().map(|c| 24.0 * (PI * c.radius.powi(2) - c.area) / (PI * c.radius.powi(4))),
        );
        let routes_agree = (circle.value - disk.value).abs() <= circle.error + disk.error;
        Ok(ScalarCurvature {
            tau: circle.value,
            error: circle.error,
            routes_agree,
            circle: Some(circle),
            disk: Some(disk),
            sphere: None,
            radii,
        })
    } else {
        let areas = geodesic_sphere_areas(chart, p, &radii, cfg.sphere_grid)?;
        let n = chart.dim;
        let (sn, vn) = (unit_sphere_area(n), unit_ball_volume(n));
        let sphere = limit(
            &radii,
            radii
                .iter()
                .zip(&areas)
                .map(|(&r, s)| 6.0 * (sn * r.powi(n as i32 - 1) - s) / (vn * r.powi(n as i32 + 1))),
        );
        Ok(ScalarCurvature {
            tau: sphere.value,
            error: sphere.error,
            routes_agree: true,
            circle: None,
            disk: None,
            sphere: Some(sphere),
            radii,
        })
    }
}

/// `6 lim (2πR − L(R)) / (πR³)` for geodesic circles in the plane of `a`,
/// `b` at `p`; equals `2σ` of that plane.
pub fn plane_scalar_curvature(chart: &MetricChart, p: &[f64], a: &[f64], b: &[f64], cfg: ScalarConfig) -> Result<LimitEstimate> {
    chart.check_point(p)?;
    let mut r0 = cfg.r0;
    for _ in 0..7 {
        let radii = vec![r0, r0 / 2.0, r0 / 4.0];
        match geodesic_circles(chart, p, &radii, Some((a, b)), cfg.circle) {
            Err(GeomError::DomainExit { .. }) => r0 /= 2.0,
            Err(e) => return Err(e),
            Ok(c) => {
                return Ok(limit(
                    &radii,
                    c.iter().map(|c| 6.0 * (2.0 * PI * c.radius - c.length) / (PI * c.radius.powi(3))),
                ))
            }
        }
    }
    Err(GeomError::Precondition("geodesic circles leave the chart at every tried radius".into()))
}

fn limit(radii: &[f64], samples: impl Iterator<Item = f64>) -> LimitEstimate {
    let ladder = ExtrapolationLadder::new(radii.to_vec(), samples.collect(), 2).expect("halving radii");
    let e = richardson(&ladder);
    LimitEstimate {
        value: e.value,
        error: e.error,
        non_monotone: e.non_monotone,
        ladder,
    }
}

/// Areas of geodesic spheres about `p` in a 3D chart: the image of the
/// direction sphere under `u ↦ exp_P(R u)` integrated with Gauss–Legendre
/// nodes in `cos θ` and the trapezoid rule in `φ`.
pub fn geodesic_sphere_areas(chart: &MetricChart, p: &[f64], radii: &[f64], grid: (usize, usize)) -> Result<Vec<f64>> {
    chart.check_point(p)?;
    if chart.dim != 3 {
        return Err(GeomError::Precondition("geodesic spheres need a 3D chart".into()));
    }
    let e = orthonormal_frame(&chart.metric_at(p))?;
    let (nc, nphi) = grid;
    let cos_nodes = gauss_legendre_on(nc, -1.0, 1.0);
    let cells: Vec<(f64, f64, f64)> = cos_nodes
        .iter()
        .flat_map(|&(c, w)| (0..nphi).map(move |k| (c, w, 2.0 * PI * k as f64 / nphi as f64)))
        .collect();
    let per_radius: Vec<Vec<f64>> = cells
        .par_iter()
        .map(|&(c, wt, phi)| -> Result<Vec<f64>> {
            let s = (1.0 - c * c).sqrt();
            let dir = nalgebra::Vector3::new(s * phi.cos(), s * phi.sin(), c);
            // ∂/∂θ and (1/sin θ) ∂/∂φ of the direction
            let d_theta = nalgebra::Vector3::new(c * phi.cos(), c * phi.sin(), -s);
            let d_phi = nalgebra::Vector3::new(-phi.sin(), phi.cos(), 0.0);
            let to_chart = |v: nalgebra::Vector3<f64>| -> Vec<f64> {
                (0..3).map(|k| (0..3).map(|l| e[(k, l)] * v[l]).sum()).collect()
            };
            let u = to_chart(dir);
            let w = DMatrix::from_fn(3, 2, |k, col| {
                let v = if col == 0 { to_chart(d_theta) } else { to_chart(d_phi) };
                v[k]
            });
            radii
                .iter()
                .map(|&r| {
                    let ur: Vec<f64> = u.iter().map(|x| x * r).collect();
                    let (x, j) = exp_with_jacobi(chart, p, &ur, &(w.clone() * r))?;
                    let g = chart.metric_at(&x);
                    let gram = j.transpose() * g * j;
                    let det = gram[(0, 0)] * gram[(1, 1)] - gram[(0, 1)] * gram[(1, 0)];
                    Ok(wt * 2.0 * PI / nphi as f64 * det.max(0.0).sqrt())
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    Ok((0..radii.len()).map(|i| per_radius.iter().map(|row| row[i]).sum()).collect())
}

// ---------------------------------------------------------------------------
// distance

#[derive(Debug, Clone, Serialize)]
pub struct Distance {
    pub distance: f64,
    /// Initial velocity `w` with `exp_P(w) = Q`.
    pub velocity: Vec<f64>,
    pub miss: f64,
    pub iterations: usize,
    /// Length of the straight coordinate segment, an upper bound.
    pub chart_line_length: f64,
}

const SHOOTING_MAX_ITER: usize = 64;

/// Geodesic distance by Newton shooting on the initial velocity, started
/// from the straight coordinate direction. The Jacobian is `D exp`.
pub fn geodesic_distance(chart: &MetricChart, p: &[f64], q: &[f64]) -> Result<Distance> {
    chart.check_point(p)?;
    chart.check_point(q)?;
    let n = chart.dim;
    let target = q.to_vec();
    let mut w = chart.difference(p, q);
    let scale = w.iter().fold(0.0f64, |m, d| m.max(d.abs())).max(1.0);
    let chart_line_length = line_length(chart, p, &w)?;
    let eye = DMatrix::identity(n, n);
    let miss_of = |x: &[f64]| -> Vec<f64> { chart.difference(&target, x) };
    let norm = |v: &[f64]| v.iter().map(|c| c * c).sum::<f64>().sqrt();
    if norm(&w) == 0.0 {
        return Ok(Distance {
            distance: 0.0,
            velocity: w,
            miss: 0.0,
            iterations: 0,
            chart_line_length,
        });
    }
    // shorten the initial guess until the geodesic stays inside the chart
    let (mut x, mut j) = loop {
        match exp_with_jacobi(chart, p, &w, &eye) {
            Ok(r) => break r,
            Err(GeomError::DomainExit { .. } | GeomError::StepUnderflow { .. }) if norm(&w) > 1e-6 * scale => {
                w.iter_mut().for_each(|c| *c *= 0.5);
            }
            Err(e) => return Err(e),
        }
    };
    let mut f = miss_of(&x);
    let mut miss = norm(&f);
    for it in 1..=SHOOTING_MAX_ITER {
        if miss < 1e-13 * scale {
            let g = chart.metric_at(p);
            return Ok(Distance {
                distance: g_len(&g, &w),
                velocity: w,
                miss,
                iterations: it - 1,
                chart_line_length,
            });
        }
        let step = j
            .clone()
            .lu()
            .solve(&DVector::from_column_slice(&f))
            .ok_or(GeomError::Shooting { iterations: it, miss })?;
        // damped Newton: halve while the miss does not shrink or exp fails
        let mut lambda = 1.0;
        loop {
            let trial: Vec<f64> = w.iter().zip(step.iter()).map(|(a, b)| a - lambda * b).collect();
            if let Ok((xt, jt)) = exp_with_jacobi(chart, p, &trial, &eye) {
                let ft = miss_of(&xt);
                let mt = norm(&ft);
                if mt < miss || lambda < 1e-3 {
                    w = trial;
                    x = xt;
                    j = jt;
                    f = ft;
                    miss = mt;
                    break;
                }
            }
            lambda *= 0.5;
            if lambda < 1e-4 {
                return Err(GeomError::Shooting { iterations: it, miss });
            }
        }
        let _ = &x;
    }
    if miss < 1e-10 * scale {
        let g = chart.metric_at(p);
        return Ok(Distance {
            distance: g_len(&g, &w),
            velocity: w,
            miss,
            iterations: SHOOTING_MAX_ITER,
            chart_line_length,
        });
    }
    Err(GeomError::Shooting {
        iterations: SHOOTING_MAX_ITER,
        miss,
    })
}

fn line_length(chart: &MetricChart, p: &[f64], d: &[f64]) -> Result<f64> {
    let mut bad = false;
    let v = quadrature(
        |t| {
            let x: Vec<f64> = p.iter().zip(d).map(|(a, b)| a + t * b).collect();
            if !chart.contains(&x) {
                bad = true;
                return 0.0;
            }
            g_len(&chart.metric_at(&x), d)
        },
        0.0,
        1.0,
        1e-12,
    )?;
    Ok(if bad { f64::INFINITY } else { v })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat(n: usize) -> MetricChart {
        MetricChart::new(n, vec![(-10.0, 10.0); n], move |x| {
            let mut g = vec![x[0].lift(0.0); n * n];
            for i in 0..n {
                g[i * n + i] = x[0].lift(1.0);
            }
            g
        })
        .unwrap()
    }

    fn sphere_polar() -> MetricChart {
        MetricChart::new(2, vec![(0.05, PI - 0.05), (-10.0, 10.0)], |x| {
            let s = x[0].sin();
            vec![x[0].lift(1.0), x[0].lift(0.0), x[0].lift(0.0), s * s]
        })
        .unwrap()
        .with_periods(vec![None, Some(2.0 * PI)])
    }

    fn half_plane() -> MetricChart {
        MetricChart::new(2, vec![(-50.0, 50.0), (1e-3, 1e3)], |x| {
            let w = x[1].powi(-2);
            vec![w, x[0].lift(0.0), x[0].lift(0.0), w]
        })
        .unwrap()
    }

    fn sphere_patch() -> SurfacePatch {
        SurfacePatch::new([(0.05, PI - 0.05), (0.0, 2.0 * PI)], |p, f| [p.sin() * f.cos(), p.sin() * f.sin(), p.cos()])
            .unwrap()
            .with_periods([None, Some(2.0 * PI)])
    }

    #[test]
    fn christoffel_symbols() {
        let c = christoffel_at(&flat(3), &[0.1, 0.2, 0.3]).unwrap();
        assert!(c.values.iter().all(|v| *v == 0.0));
        let rho = 0.7;
        let c = christoffel_at(&sphere_polar(), &[rho, 0.3]).unwrap();
        assert!((c.get(0, 1, 1) + rho.sin() * rho.cos()).abs() < 1e-14);
        assert!((c.get(1, 0, 1) - 1.0 / rho.tan()).abs() < 1e-14);
        assert!((c.get(1, 1, 0) - 1.0 / rho.tan()).abs() < 1e-14);
        assert!(c.get(0, 0, 0).abs() + c.get(1, 1, 1).abs() + c.get(0, 0, 1).abs() < 1e-14);
        let y = 1.7;
        let c = christoffel_at(&half_plane(), &[0.3, y]).unwrap();
        assert!((c.get(0, 0, 1) + 1.0 / y).abs() < 1e-14);
        assert!((c.get(1, 0, 0) - 1.0 / y).abs() < 1e-14);
        assert!((c.get(1, 1, 1) + 1.0 / y).abs() < 1e-14);
    }

    #[test]
    fn pullback_matches_closed_form_and_embedded_symbols() {
        let chart = pullback_metric(&sphere_patch()).unwrap();
        let g = chart.metric_at(&[0.8, 1.1]);
        assert!((g[(0, 0)] - 1.0).abs() < 1e-15 && g[(0, 1)].abs() < 1e-15);
        assert!((g[(1, 1)] - 0.8f64.sin().powi(2)).abs() < 1e-15);
        let a = christoffel_at(&chart, &[0.8, 1.1]).unwrap();
        let b = christoffel_embedded(&sphere_patch(), [0.8, 1.1]).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn great_circle_closes() {
        let chart = sphere_polar();
        let path = geodesic_trace(&chart, &[PI / 2.0, 0.0], &[0.0, 1.0], 2.0 * PI).unwrap();
        assert_eq!(path.termination, Termination::Completed);
        let end = &path.end().x;
        assert!((end[0] - PI / 2.0).abs() < 1e-9);
        assert!((end[1] - 2.0 * PI).abs() < 1e-8);
        assert!(path.speed_drift < 1e-9);
    }

    #[test]
    fn exp_map_basics() {
        let chart = flat(2);
        assert_eq!(exp_map(&chart, &[1.0, 2.0], &[0.0, 0.0]).unwrap(), vec![1.0, 2.0]);
        let x = exp_map(&chart, &[1.0, 2.0], &[0.5, -1.0]).unwrap();
        assert!((x[0] - 1.5).abs() < 1e-13 && (x[1] - 1.0).abs() < 1e-13);
        // antipode along a meridian of the unit sphere
        let x = exp_map(&sphere_polar(), &[0.5, 0.3], &[PI - 1.0, 0.0]).unwrap();
        assert!((x[0] - (PI - 0.5)).abs() < 1e-9);
    }

    #[test]
    fn differential_matches_differences() {
        let chart = sphere_polar();
        let p = [1.0, 0.2];
        let u = [0.3, 0.4];
        let (_, j) = exp_with_differential(&chart, &p, &u).unwrap();
        let h = 1e-6;
        for c in 0..2 {
            let mut up = u;
            let mut um = u;
            up[c] += h;
            um[c] -= h;
            let a = exp_map(&chart, &p, &up).unwrap();
            let b = exp_map(&chart, &p, &um).unwrap();
            for k in 0..2 {
                assert!(((a[k] - b[k]) / (2.0 * h) - j[(k, c)]).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn flat_transport_is_identity() {
        let chart = flat(2);
        let loop_ = PathSegment::polygon(&[vec![0.0, 0.0], vec![1.0, 0.0], vec![1.0, 2.0], vec![-1.0, 1.0]]);
        let h = holonomy(&chart, &loop_).unwrap();
        assert!((h.matrix - DMatrix::identity(2, 2)).amax() < 1e-14);
        assert!(h.angle.unwrap().abs() < 1e-14);
    }

    #[test]
    fn sphere_parallel_holonomy() {
        let chart = sphere_polar();
        let t0: f64 = 0.6;
        let loop_ = [PathSegment::curve((0.0, 2.0 * PI), move |t| (vec![t0, t], vec![0.0, 1.0]))];
        let h = holonomy(&chart, &loop_).unwrap();
        let expect = 2.0 * PI * (1.0 - t0.cos());
        assert!((h.angle.unwrap() - expect).abs() < 1e-8, "{:?}", h.angle);
        assert!(h.orthogonality_residual < 1e-9);
    }

    #[test]
    fn open_loop_is_rejected() {
        let chart = flat(2);
        let path = [PathSegment::line(&[0.0, 0.0], &[1.0, 0.0])];
        assert!(holonomy(&chart, &path).is_err());
    }

    #[test]
    fn velocity_is_self_parallel() {
        let chart = sphere_polar();
        let p = [1.0, 0.0];
        let v = normalize_at(&chart, &p, &[0.3, 1.0]).unwrap();
        let (res, a) = parallel_transport(&chart, &[PathSegment::geodesic(&p, &v)], &v).unwrap();
        let y = exp_with_differential(&chart, &p, &v).unwrap();
        let _ = y;
        let path = geodesic_trace(&chart, &p, &v, 1.0).unwrap();
        let vend = &path.end().velocity;
        for k in 0..2 {
            assert!((a[k] - vend[k]).abs() < 1e-8);
        }
        assert!(res.inner_product_drift < 1e-9);
    }

    #[test]
    fn circles_on_plane_and_sphere() {
        let cfg = CircleConfig {
            directions: 128,
            area_nodes: 10,
        };
        let c = geodesic_circles(&flat(2), &[0.0, 0.0], &[0.5], None, cfg).unwrap()[0];
        assert!((c.length - PI).abs() < 1e-10);
        assert!((c.area - PI * 0.25).abs() < 1e-10);
        let c = geodesic_circles(&sphere_polar(), &[1.2, 0.0], &[0.7], None, cfg).unwrap()[0];
        assert!((c.length - 2.0 * PI * 0.7f64.sin()).abs() < 1e-8);
        assert!((c.area - 2.0 * PI * (1.0 - 0.7f64.cos())).abs() < 1e-8);
    }

    #[test]
    fn scalar_curvature_limits() {
        let t = scalar_curvature_estimate(&flat(2), &[0.0, 0.0]).unwrap();
        assert!(t.tau.abs() < 1e-6);
        let t = scalar_curvature_estimate(&sphere_polar(), &[1.0, 0.0]).unwrap();
        assert!((t.tau - 2.0).abs() < 2e-3, "{t:?}");
        let t = scalar_curvature_estimate(&half_plane(), &[0.0, 1.0]).unwrap();
        assert!((t.tau + 2.0).abs() < 2e-3, "{t:?}");
    }

    #[test]
    fn distances() {
        let d = geodesic_distance(&flat(2), &[0.0, 0.0], &[3.0, 4.0]).unwrap();
        assert!((d.distance - 5.0).abs() < 1e-12);
        let d = geodesic_distance(&half_plane(), &[0.0, 1.0], &[0.0, 3.0]).unwrap();
        assert!((d.distance - 3f64.ln()).abs() < 1e-9);
        assert!(d.distance <= d.chart_line_length + 1e-12);
        let d = geodesic_distance(&sphere_polar(), &[1.0, 0.0], &[1.5, 1.0]).unwrap();
        let pt = |r: f64, f: f64| nalgebra::Vector3::new(r.sin() * f.cos(), r.sin() * f.sin(), r.cos());
        let exact = pt(1.0, 0.0).dot(&pt(1.5, 1.0)).acos();
        assert!((d.distance - exact).abs() < 1e-9);
    }

    #[test]
    fn normal_coordinates_are_euclidean_at_p() {
        let chart = sphere_polar();
        let p = [1.0, 0.0];
        let g0 = normal_coordinate_metric(&chart, &p, &[0.0, 0.0]).unwrap();
        assert!((g0 - DMatrix::identity(2, 2)).amax() < 1e-12);
        let h = 1e-3;
        for k in 0..2 {
            let mut yp = [0.0; 2];
            let mut ym = [0.0; 2];
            yp[k] = h;
            ym[k] = -h;
            let d = (normal_coordinate_metric(&chart, &p, &yp).unwrap() - normal_coordinate_metric(&chart, &p, &ym).unwrap())
                / (2.0 * h);
            assert!(d.amax() < 1e-5);
        }
    }
}
