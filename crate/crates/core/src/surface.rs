//! Extrinsic geometry of cooriented surface patches in R³.
//!
//! A [`SurfacePatch`] is an immersion of a parameter rectangle together with
//! a choice of unit normal. By default the normal is `r_u × r_v / |r_u × r_v|`;
//! [`SurfacePatch::flipped`] reverses it. Every report records the
//! orientation it was computed with.

use std::f64::consts::FRAC_PI_2;
use std::sync::Arc;

use nalgebra::{Matrix2, Vector2, Vector3};
use serde::Serialize;

use crate::curves::{space_curvature_torsion, ParamCurve};
use crate::error::{GeomError, Result};
use crate::numkit::{
    cross3, dot3, generalized_symmetric_eigen, local_then_compose, quadrature_2d, scale3, values3, Jet, Jet3,
};

/// Evaluator mapping parameter jets `(u, v)` to the jets of `r(u, v)`.
pub type SurfaceFn = Arc<dyn Fn(&Jet, &Jet) -> Jet3 + Send + Sync>;

pub type Rect = [(f64, f64); 2];

/// Coorientation of a patch relative to `r_u × r_v`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Orientation {
    /// `n = r_u × r_v / |r_u × r_v|`
    Parametric,
    /// `n = −r_u × r_v / |r_u × r_v|`
    Reversed,
}

impl Orientation {
    pub fn sign(self) -> f64 {
        match self {
            Orientation::Parametric => 1.0,
            Orientation::Reversed => -1.0,
        }
    }
}

#[derive(Clone)]
pub struct SurfacePatch {
    domain: Rect,
    /// Period of each parameter, when the immersion is periodic in it.
    periods: [Option<f64>; 2],
    eval: SurfaceFn,
    orientation: Orientation,
    /// Highest jet order the evaluator can deliver exactly.
    max_order: usize,
    eps_reg: f64,
}

impl std::fmt::Debug for SurfacePatch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SurfacePatch")
            .field("domain", &self.domain)
            .field("orientation", &self.orientation)
            .finish()
    }
}

/// Tolerance for `|r_u × r_v|`.
pub const EPS_REGULAR: f64 = 1e-9;

impl SurfacePatch {
    pub fn new<F>(domain: Rect, eval: F) -> Result<Self>
    where
        F: Fn(&Jet, &Jet) -> Jet3 + Send + Sync + 'static,
    {
        for (lo, hi) in domain {
            if !(lo < hi) {
                return Err(GeomError::Precondition("empty parameter rectangle".into()));
            }
        }
        Ok(SurfacePatch {
            domain,
            periods: [None, None],
            eval: Arc::new(eval),
            orientation: Orientation::Parametric,
            max_order: 3,
            eps_reg: EPS_REGULAR,
        })
    }

    pub fn with_periods(mut self, periods: [Option<f64>; 2]) -> Self {
        self.periods = periods;
        self
    }

    /// Same immersion over another rectangle.
    pub fn with_domain(&self, domain: Rect) -> SurfacePatch {
        SurfacePatch { domain, ..self.clone() }
    }

    pub fn flipped(&self) -> SurfacePatch {
        let orientation = match self.orientation {
            Orientation::Parametric => Orientation::Reversed,
            Orientation::Reversed => Orientation::Parametric,
        };
        SurfacePatch {
            orientation,
            ..self.clone()
        }
    }

    pub fn with_orientation(&self, orientation: Orientation) -> SurfacePatch {
        SurfacePatch {
            orientation,
            ..self.clone()
        }
    }

    /// The patch `c·r` (homothety about the origin).
    pub fn scaled(&self, c: f64) -> SurfacePatch {
        let inner = self.eval.clone();
        SurfacePatch {
            eval: Arc::new(move |u, v| {
                let r = inner(u, v);
                [r[0] * c, r[1] * c, r[2] * c]
            }),
            ..self.clone()
        }
    }

    pub fn domain(&self) -> Rect {
        self.domain
    }

    pub fn periods(&self) -> [Option<f64>; 2] {
        self.periods
    }

    pub fn orientation(&self) -> Orientation {
        self.orientation
    }

    pub fn max_order(&self) -> usize {
        self.max_order
    }

    pub fn eval_jet(&self, u: &Jet, v: &Jet) -> Jet3 {
        (self.eval)(u, v)
    }

    pub fn point(&self, u: f64, v: f64) -> Vector3<f64> {
        values3(&self.eval_jet(&Jet::constant(u, 2, 0), &Jet::constant(v, 2, 0)))
    }

    /// Jets of `r` in the local variables `(u − u0, v − v0)`.
    pub fn local_jet(&self, uv: [f64; 2], order: usize) -> Jet3 {
        let vars = Jet::variables(&uv, order);
        self.eval_jet(&vars[0], &vars[1])
    }

    /// Jets of the unit normal at arbitrary input jets.
    pub fn normal_jet(&self, u: &Jet, v: &Jet) -> Jet3 {
        let sign = self.orientation.sign();
        let out = local_then_compose(&[*u, *v], 1, |local| {
            let r = self.eval_jet(&local[0], &local[1]);
            unit_normal(&r, sign).to_vec()
        });
        [out[0], out[1], out[2]]
    }

    pub fn normal(&self, u: f64, v: f64) -> Vector3<f64> {
        let vars = Jet::variables(&[u, v], 0);
        values3(&self.normal_jet(&vars[0], &vars[1]))
    }

    fn check_regular(&self, uv: [f64; 2], ru: &Vector3<f64>, rv: &Vector3<f64>) -> Result<()> {
        let c = ru.cross(rv).norm();
        if !(c > self.eps_reg) {
            return Err(GeomError::Regularity {
                at: format!("(u, v) = ({}, {})", uv[0], uv[1]),
                detail: format!("|r_u × r_v| = {c:e}"),
            });
        }
        Ok(())
    }

    /// Checks regularity on an `n × n` grid of cell centres.
    pub fn check_regular_on_grid(&self, n: usize) -> Result<()> {
        for (u, v) in cell_centres(self.domain, n) {
            let r = self.local_jet([u, v], 1);
            let (ru, rv) = first_partials(&r);
            self.check_regular([u, v], &ru, &rv)?;
        }
        Ok(())
    }
}

fn unit_normal(r: &Jet3, sign: f64) -> Jet3 {
    let ru = [r[0].derivative(0), r[1].derivative(0), r[2].derivative(0)];
    let rv = [r[0].derivative(1), r[1].derivative(1), r[2].derivative(1)];
    let c = cross3(&ru, &rv);
    let inv = dot3(&c, &c).sqrt().recip() * sign;
    scale3(&c, inv)
}

fn first_partials(r: &Jet3) -> (Vector3<f64>, Vector3<f64>) {
    let ru = Vector3::new(r[0].partial(&[0]), r[1].partial(&[0]), r[2].partial(&[0]));
    let rv = Vector3::new(r[0].partial(&[1]), r[1].partial(&[1]), r[2].partial(&[1]));
    (ru, rv)
}

fn second_partial(r: &Jet3, i: usize, j: usize) -> Vector3<f64> {
    Vector3::new(r[0].partial(&[i, j]), r[1].partial(&[i, j]), r[2].partial(&[i, j]))
}

pub(crate) fn cell_centres(domain: Rect, n: usize) -> impl Iterator<Item = (f64, f64)> {
    let [(a, b), (c, d)] = domain;
    (0..n).flat_map(move |i| {
        (0..n).map(move |j| {
            (
                a + (b - a) * (i as f64 + 0.5) / n as f64,
                c + (d - c) * (j as f64 + 0.5) / n as f64,
            )
        })
    })
}

/// First and second fundamental forms at a point.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct FormsAtPoint {
    pub uv: [f64; 2],
    pub point: Vector3<f64>,
    pub r_u: Vector3<f64>,
    pub r_v: Vector3<f64>,
    pub normal: Vector3<f64>,
    pub g: Matrix2<f64>,
    pub q: Matrix2<f64>,
    pub orientation: Orientation,
}

/// `g_ij = r_i · r_j` and `q_ij = r_ij · n`.
pub fn forms_at(surface: &SurfacePatch, uv: [f64; 2]) -> Result<FormsAtPoint> {
    let r = surface.local_jet(uv, 2);
    let (ru, rv) = first_partials(&r);
    surface.check_regular(uv, &ru, &rv)?;
    let n = ru.cross(&rv).normalize() * surface.orientation.sign();
    let g = Matrix2::new(ru.dot(&ru), ru.dot(&rv), rv.dot(&ru), rv.dot(&rv));
    let quu = second_partial(&r, 0, 0).dot(&n);
    let quv = second_partial(&r, 0, 1).dot(&n);
    let qvv = second_partial(&r, 1, 1).dot(&n);
    Ok(FormsAtPoint {
        uv,
        point: values3(&r),
        r_u: ru,
        r_v: rv,
        normal: n,
        g,
        q: Matrix2::new(quu, quv, quv, qvv),
        orientation: surface.orientation,
    })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ShapeOperator {
    /// `g⁻¹ q` in the basis `(r_u, r_v)`.
    pub matrix: Matrix2<f64>,
    /// The same operator assembled from `−∂n/∂u`, `−∂n/∂v`.
    pub from_normal: Matrix2<f64>,
    /// Max-norm difference of the two.
    pub discrepancy: f64,
}

/// Weingarten operator `a ↦ −∂n/∂a` in the basis `(r_u, r_v)`, computed
/// from the fundamental forms and, independently, from the normal's jets.
pub fn shape_operator_at(surface: &SurfacePatch, uv: [f64; 2]) -> Result<ShapeOperator> {
    let f = forms_at(surface, uv)?;
    let ginv = f
        .g
        .try_inverse()
        .ok_or_else(|| GeomError::Precondition("degenerate first form".into()))?;
    let matrix = ginv * f.q;
    let vars = Jet::variables(&uv, 1);
    let n = surface.normal_jet(&vars[0], &vars[1]);
    let mut from_normal = Matrix2::zeros();
    for j in 0..2 {
        let dn = Vector3::new(n[0].partial(&[j]), n[1].partial(&[j]), n[2].partial(&[j]));
        let rhs = Vector2::new(-f.r_u.dot(&dn), -f.r_v.dot(&dn));
        let c = ginv * rhs;
        from_normal[(0, j)] = c[0];
        from_normal[(1, j)] = c[1];
    }
    let discrepancy = (matrix - from_normal).amax();
    Ok(ShapeOperator {
        matrix,
        from_normal,
        discrepancy,
    })
}

/// Principal and derived curvatures at a point.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ExtrinsicReport {
    pub uv: [f64; 2],
    pub lambda_plus: f64,
    pub lambda_minus: f64,
    /// Unit tangent vectors in R³ for `λ₊` and `λ₋`.
    pub directions: [Vector3<f64>; 2],
    /// Coordinates of the directions in the basis `(r_u, r_v)`.
    pub directions_uv: [Vector2<f64>; 2],
    /// `λ₊ = λ₋` within 1e-10; the directions are then an arbitrary
    /// orthonormal pair.
    pub umbilic: bool,
    /// `(λ₊ + λ₋) / 2`.
    pub mean: f64,
    /// Mean curvature density `H` with `−H/2 = (λ₊ + λ₋)/2`.
    pub mean_density: f64,
    /// `K = λ₊ λ₋`.
    pub gaussian: f64,
    /// `τ = 2 λ₊ λ₋`.
    pub scalar: f64,
    pub orientation: Orientation,
}

const UMBILIC_TOL: f64 = 1e-10;

pub fn principal_at(surface: &SurfacePatch, uv: [f64; 2]) -> Result<ExtrinsicReport> {
    let f = forms_at(surface, uv)?;
    let eig = generalized_symmetric_eigen(&f.q, &f.g)?;
    let [lp, lm] = eig.values;
    let umbilic = (lp - lm).abs() < UMBILIC_TOL;
    let directions_uv = if umbilic {
        // r_u normalized and its g-orthogonal complement
        let e1 = Vector2::new(1.0 / f.g[(0, 0)].sqrt(), 0.0);
        let w = Vector2::new(-f.g[(0, 1)], f.g[(0, 0)]);
        let norm = (w.transpose() * f.g * w)[0].sqrt();
        [e1, w / norm]
    } else {
        eig.vectors
    };
    let to3 = |c: &Vector2<f64>| f.r_u * c[0] + f.r_v * c[1];
    let mean = 0.5 * (lp + lm);
    Ok(ExtrinsicReport {
        uv,
        lambda_plus: lp,
        lambda_minus: lm,
        directions: [to3(&directions_uv[0]), to3(&directions_uv[1])],
        directions_uv,
        umbilic,
        mean,
        mean_density: -2.0 * mean,
        gaussian: lp * lm,
        scalar: 2.0 * lp * lm,
        orientation: surface.orientation,
    })
}

fn check_tilt(theta: f64) -> Result<()> {
    if !(0.0..FRAC_PI_2).contains(&theta) || theta.cos() < 1e-6 {
        return Err(GeomError::Precondition(format!(
            "tilt θ = {theta} must lie in [0, π/2) away from a tangent plane"
        )));
    }
    Ok(())
}

/// Curvature of the section through the point by the plane containing the
/// tangent direction at angle `phi` from the `λ₊` direction and tilted by
/// `theta` from the normal: `(λ₊ cos²φ + λ₋ sin²φ) / cos θ`.
pub fn section_curvature(surface: &SurfacePatch, uv: [f64; 2], phi: f64, theta: f64) -> Result<f64> {
    check_tilt(theta)?;
    let p = principal_at(surface, uv)?;
    let kn = p.lambda_plus * phi.cos().powi(2) + p.lambda_minus * phi.sin().powi(2);
    Ok(kn / theta.cos())
}

/// Independent route to [`section_curvature`]: intersects the surface with
/// the actual cutting plane and measures the space curvature of the
/// intersection curve. The result is signed like the normal curvature (its
/// sign is that of the curvature vector against the surface normal).
pub fn section_curvature_by_slicing(surface: &SurfacePatch, uv: [f64; 2], phi: f64, theta: f64) -> Result<f64> {
    check_tilt(theta)?;
    let f = forms_at(surface, uv)?;
    let rep = principal_at(surface, uv)?;
    let n = f.normal;
    let e_plus = rep.directions[0].normalize();
    let e_minus = n.cross(&e_plus);
    let d = e_plus * phi.cos() + e_minus * phi.sin();
    let m = n * theta.cos() + n.cross(&d) * theta.sin();
    let plane_normal = d.cross(&m).normalize();
    let p0 = f.point;
    let slice = SliceCurve {
        surface: surface.clone(),
        origin: p0,
        along: d,
        plane_normal,
        uv0: uv,
    };
    let slice = Arc::new(slice);
    let s2 = slice.clone();
    let h = 1e-2;
    let curve = ParamCurve::new(3, (-h, h), move |s: &Jet| s2.eval(s))?;
    let sc = space_curvature_torsion(&curve, 0.0)?;
    let [_, d1, d2, _] = curve.derivatives(0.0);
    let t = d1.normalize();
    let kvec = (d2 - t * d2.dot(&t)) / d1.norm_squared();
    let sign = if kvec.dot(&n) < 0.0 { -1.0 } else { 1.0 };
    Ok(sign * sc.curvature)
}

/// Points of `surface ∩ plane` parametrized by the projection `s` onto the
/// in-plane tangent direction; `(u(s), v(s))` are solved by Newton's method,
/// first on values and then on jets (each jet pass fixes one more order).
struct SliceCurve {
    surface: SurfacePatch,
    origin: Vector3<f64>,
    along: Vector3<f64>,
    plane_normal: Vector3<f64>,
    uv0: [f64; 2],
}

impl SliceCurve {
    fn residual(&self, r: &Jet3, s: &Jet) -> [Jet; 2] {
        let rel = [r[0] - self.origin[0], r[1] - self.origin[1], r[2] - self.origin[2]];
        let a = [s.lift(self.along[0]), s.lift(self.along[1]), s.lift(self.along[2])];
        let b = [
            s.lift(self.plane_normal[0]),
            s.lift(self.plane_normal[1]),
            s.lift(self.plane_normal[2]),
        ];
        [dot3(&rel, &a) - *s, dot3(&rel, &b)]
    }

    fn jacobian(&self, uv: [f64; 2]) -> Matrix2<f64> {
        let r = self.surface.local_jet(uv, 1);
        let (ru, rv) = first_partials(&r);
        Matrix2::new(
            ru.dot(&self.along),
            rv.dot(&self.along),
            ru.dot(&self.plane_normal),
            rv.dot(&self.plane_normal),
        )
    }

    fn eval(&self, s: &Jet) -> Vec<Jet> {
        let s0 = s.value();
        let mut uv = self.uv0;
        let sc = Jet::constant(s0, 1, 0);
        for _ in 0..50 {
            let r = self.surface.eval_jet(&Jet::constant(uv[0], 1, 0), &Jet::constant(uv[1], 1, 0));
            let res = self.residual(&r, &sc);
            let jinv = self.jacobian(uv).try_inverse().unwrap_or_else(Matrix2::zeros);
            let step = jinv * Vector2::new(res[0].value(), res[1].value());
            uv[0] -= step[0];
            uv[1] -= step[1];
            if step.norm() < 1e-15 {
                break;
            }
        }
        let jinv = self.jacobian(uv).try_inverse().unwrap_or_else(Matrix2::zeros);
        let mut u = s.lift(uv[0]);
        let mut v = s.lift(uv[1]);
        for _ in 0..=s.order() {
            let r = self.surface.eval_jet(&u, &v);
            let res = self.residual(&r, s);
            let du = res[0] * jinv[(0, 0)] + res[1] * jinv[(0, 1)];
            let dv = res[0] * jinv[(1, 0)] + res[1] * jinv[(1, 1)];
            u -= du;
            v -= dv;
        }
        self.surface.eval_jet(&u, &v).to_vec()
    }
}

/// `∫∫_D |r_u × r_v| du dv`.
pub fn area(surface: &SurfacePatch) -> Result<f64> {
    area_over(surface, surface.domain)
}

pub fn area_over(surface: &SurfacePatch, domain: Rect) -> Result<f64> {
    integrate(surface, domain, 1, |r| {
        let (ru, rv) = first_partials(r);
        ru.cross(&rv).norm()
    })
}

/// Relative accuracy requested from surface integrals.
const INTEGRAL_RTOL: f64 = 1e-12;

fn integrate<F>(surface: &SurfacePatch, domain: Rect, order: usize, density: F) -> Result<f64>
where
    F: Fn(&Jet3) -> f64,
{
    let [(a, b), (c, d)] = domain;
    // coarse estimate to turn the relative tolerance into an absolute one
    let rough: f64 = cell_centres(domain, 8)
        .map(|(u, v)| density(&surface.local_jet([u, v], order)).abs())
        .sum::<f64>()
        * (b - a)
        * (d - c)
        / 64.0;
    let tol = INTEGRAL_RTOL * rough.max(1e-3 * (b - a) * (d - c));
    quadrature_2d(|u, v| density(&surface.local_jet([u, v], order)), (a, b), (c, d), tol)
}

/// The parallel patch `r + ε n`.
///
/// Its jets are one order shorter than those of the base patch.
pub fn offset_surface(surface: &SurfacePatch, eps: f64) -> Result<SurfacePatch> {
    if surface.max_order < 2 {
        return Err(GeomError::Precondition("offset needs a patch with second derivatives".into()));
    }
    for (u, v) in cell_centres(surface.domain, 16) {
        let p = principal_at(surface, [u, v])?;
        if (eps * p.lambda_plus).abs() >= 1.0 || (eps * p.lambda_minus).abs() >= 1.0 {
            return Err(GeomError::Precondition(format!(
                "offset ε = {eps} reaches the focal set near (u, v) = ({u}, {v})"
            )));
        }
    }
    let base = surface.clone();
    let sign = surface.orientation.sign();
    let eval = move |u: &Jet, v: &Jet| -> Jet3 {
        let out = local_then_compose(&[*u, *v], 1, |local| {
            let r = base.eval_jet(&local[0], &local[1]);
            let n = unit_normal(&r, sign);
            (0..3).map(|i| r[i] + n[i] * eps).collect()
        });
        [out[0], out[1], out[2]]
    };
    let mut patch = SurfacePatch::new(surface.domain, eval)?;
    patch.periods = surface.periods;
    patch.orientation = surface.orientation;
    patch.max_order = surface.max_order - 1;
    Ok(patch)
}

/// Area, total mean curvature and total Gaussian curvature, with the
/// quadratic fit of `ε ↦ area(r + ε n)` that cross-checks them.
#[derive(Debug, Clone, Serialize)]
pub struct TotalCurvatures {
    pub area: f64,
    pub mean_total: f64,
    pub gauss_total: f64,
    /// Offsets used for the fit.
    pub fit_eps: Vec<f64>,
    /// Coefficients `(c0, c1, c2)` of the least-squares fit `c0 + c1 ε + c2 ε²`.
    pub fit: [f64; 3],
    /// Largest mismatch between fit coefficients and integrals, relative to
    /// `max(|integral|, 1)`.
    pub mismatch: f64,
    pub consistent: bool,
}

pub const OFFSET_LADDER: [f64; 6] = [-1e-2, -5e-3, -2.5e-3, 2.5e-3, 5e-3, 1e-2];
pub const OFFSET_FIT_TOL: f64 = 1e-4;

/// Total curvatures over the patch.
///
/// Integrands are triple products against the parametric normal
/// `N = r_u×r_v/|r_u×r_v|`, so that they are the coefficients of the offset
/// area polynomial for either coorientation:
/// `H = ∫∫ (r_u × n_v + n_u × r_v)·N`, `K = ∫∫ (n_u × n_v)·N`.
pub fn total_curvatures(surface: &SurfacePatch) -> Result<TotalCurvatures> {
    total_curvatures_over(surface, surface.domain)
}

pub fn total_curvatures_over(surface: &SurfacePatch, domain: Rect) -> Result<TotalCurvatures> {
    let patch = surface.with_domain(domain);
    let area = area(&patch)?;
    let mean_total = integrate(&patch, domain, 2, |r| {
        let (ru, rv, nu, nv, big_n) = normal_derivatives(&patch, r);
        (ru.cross(&nv) + nu.cross(&rv)).dot(&big_n)
    })?;
    let gauss_total = gauss_map_signed_area_over(&patch, domain)?;
    let mut rows = Vec::new();
    for &eps in OFFSET_LADDER.iter() {
        let off = offset_surface(&patch, eps)?;
        rows.push((eps, crate::surface::area(&off)?));
    }
    let fit = quadratic_fit(&rows);
    let mismatch = [
        (fit[0] - area) / area.abs().max(1.0),
        (fit[1] - mean_total) / mean_total.abs().max(1.0),
        (fit[2] - gauss_total) / gauss_total.abs().max(1.0),
    ]
    .iter()
    .fold(0.0f64, |m, x| m.max(x.abs()));
    Ok(TotalCurvatures {
        area,
        mean_total,
        gauss_total,
        fit_eps: OFFSET_LADDER.to_vec(),
        fit,
        mismatch,
        consistent: mismatch <= OFFSET_FIT_TOL,
    })
}

type V3 = Vector3<f64>;

fn normal_derivatives(patch: &SurfacePatch, r: &Jet3) -> (V3, V3, V3, V3, V3) {
    let (ru, rv) = first_partials(r);
    let n = unit_normal(r, patch.orientation.sign());
    let nu = Vector3::new(n[0].partial(&[0]), n[1].partial(&[0]), n[2].partial(&[0]));
    let nv = Vector3::new(n[0].partial(&[1]), n[1].partial(&[1]), n[2].partial(&[1]));
    let big_n = ru.cross(&rv).normalize();
    (ru, rv, nu, nv, big_n)
}

fn quadratic_fit(rows: &[(f64, f64)]) -> [f64; 3] {
    let a = nalgebra::DMatrix::from_fn(rows.len(), 3, |i, j| rows[i].0.powi(j as i32));
    let b = nalgebra::DVector::from_iterator(rows.len(), rows.iter().map(|r| r.1));
    let sol = a.svd(true, true).solve(&b, 1e-15).expect("fit system");
    [sol[0], sol[1], sol[2]]
}

/// Signed area of the spherical image, `∫∫ (n_u × n_v)·N du dv`, which is
/// the total Gaussian curvature of the patch.
pub fn gauss_map_signed_area(surface: &SurfacePatch) -> Result<f64> {
    gauss_map_signed_area_over(surface, surface.domain)
}

pub fn gauss_map_signed_area_over(surface: &SurfacePatch, domain: Rect) -> Result<f64> {
    let patch = surface.with_domain(domain);
    integrate(&patch, domain, 2, |r| {
        let (_, _, nu, nv, big_n) = normal_derivatives(&patch, r);
        nu.cross(&nv).dot(&big_n)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn plane() -> SurfacePatch {
        SurfacePatch::new([(0.0, 1.0), (0.0, 1.0)], |u, v| [*u, *v, u.lift(0.0)]).unwrap()
    }

    fn sphere(r: f64) -> SurfacePatch {
        SurfacePatch::new([(0.0, PI), (0.0, 2.0 * PI)], move |p, f| {
            [p.sin() * f.cos() * r, p.sin() * f.sin() * r, p.cos() * r]
        })
        .unwrap()
    }

    fn cylinder(r: f64) -> SurfacePatch {
        SurfacePatch::new([(0.0, 2.0 * PI), (0.0, 1.0)], move |a, z| [a.cos() * r, a.sin() * r, *z]).unwrap()
    }

    fn graph(f: impl Fn(&Jet, &Jet) -> Jet + Send + Sync + 'static) -> SurfacePatch {
        SurfacePatch::new([(-1.0, 1.0), (-1.0, 1.0)], move |x, y| [*x, *y, f(x, y)]).unwrap()
    }

    #[test]
    fn plane_forms() {
        let f = forms_at(&plane(), [0.3, 0.4]).unwrap();
        assert_eq!(f.g, Matrix2::identity());
        assert_eq!(f.q, Matrix2::zeros());
        assert_eq!(shape_operator_at(&plane(), [0.5, 0.5]).unwrap().matrix, Matrix2::zeros());
    }

    #[test]
    fn inward_sphere_second_form_equals_metric() {
        // r_ρ × r_φ points outward on this patch
        let s = sphere(1.0).flipped();
        for &uv in &[[0.7, 0.3], [1.5, 2.0], [2.6, 5.0]] {
            let f = forms_at(&s, uv).unwrap();
            assert!((f.q - f.g).amax() < 1e-14);
            let w = shape_operator_at(&s, uv).unwrap();
            assert!((w.matrix - Matrix2::identity()).amax() < 1e-13);
            assert!(w.discrepancy < 1e-10);
            let p = principal_at(&s, uv).unwrap();
            assert!(p.umbilic);
            assert!((p.lambda_plus - 1.0).abs() < 1e-13 && (p.lambda_minus - 1.0).abs() < 1e-13);
            assert!((p.gaussian - 1.0).abs() < 1e-13 && (p.scalar - 2.0).abs() < 1e-13);
        }
    }

    #[test]
    fn graph_second_form_is_hessian() {
        // f = 0.5 x² − 1.5 xy + 2 y², tangent to z = 0 at O
        let s = graph(|x, y| *x * *x * 0.5 - *x * *y * 1.5 + *y * *y * 2.0);
        let f = forms_at(&s, [0.0, 0.0]).unwrap();
        assert!((f.q - Matrix2::new(1.0, -1.5, -1.5, 4.0)).amax() < 1e-15);
        let p = principal_at(&s, [0.0, 0.0]).unwrap();
        assert!((p.gaussian - (4.0 - 2.25)).abs() < 1e-14);
        assert!((p.mean_density - (-1.0 - 4.0)).abs() < 1e-14);
    }

    #[test]
    fn saddle_gaussian_curvature() {
        let s = graph(|x, y| *x * *y);
        let p = principal_at(&s, [0.0, 0.0]).unwrap();
        assert!((p.gaussian + 1.0).abs() < 1e-15);
        assert!(p.directions[0].dot(&p.directions[1]).abs() < 1e-14);
    }

    #[test]
    fn cylinder_shape_operator() {
        let c = cylinder(2.0).flipped();
        let w = shape_operator_at(&c, [1.0, 0.5]).unwrap();
        let eig = w.matrix.symmetric_eigenvalues();
        let (hi, lo) = (eig.max(), eig.min());
        assert!((hi - 0.5).abs() < 1e-14 && lo.abs() < 1e-14);
        let p = principal_at(&c, [1.0, 0.5]).unwrap();
        assert!((p.lambda_plus - 0.5).abs() < 1e-14 && p.lambda_minus.abs() < 1e-14);
    }

    #[test]
    fn section_curvatures() {
        let s = sphere(1.0).flipped();
        let k = section_curvature(&s, [1.0, 1.0], 0.4, PI / 3.0).unwrap();
        assert!((k - 2.0).abs() < 1e-12);
        assert!(section_curvature(&s, [1.0, 1.0], 0.0, FRAC_PI_2).is_err());
        let c = cylinder(2.0).flipped();
        let p = principal_at(&c, [0.5, 0.5]).unwrap();
        assert!((section_curvature(&c, [0.5, 0.5], 0.0, 0.0).unwrap() - p.lambda_plus).abs() < 1e-14);
        assert!((section_curvature(&c, [0.5, 0.5], FRAC_PI_2, 0.0).unwrap() - p.lambda_minus).abs() < 1e-14);
    }

    #[test]
    fn slicing_matches_euler_and_meusnier() {
        let s = graph(|x, y| *x * *x * 0.8 - *y * *y * 0.3 + *x * *y * 0.2);
        for i in 0..8 {
            let phi = PI * i as f64 / 8.0;
            for &theta in &[0.0, 0.5] {
                let a = section_curvature(&s, [0.1, -0.2], phi, theta).unwrap();
                let b = section_curvature_by_slicing(&s, [0.1, -0.2], phi, theta).unwrap();
                assert!((a - b).abs() < 1e-9, "φ={phi} θ={theta}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn areas() {
        assert!((area(&plane()).unwrap() - 1.0).abs() < 1e-14);
        let a = area(&sphere(2.0)).unwrap();
        assert!((a - 16.0 * PI).abs() < 1e-9);
        let cap = area_over(&sphere(1.0), [(0.0, 0.8), (0.0, 2.0 * PI)]).unwrap();
        assert!((cap - 2.0 * PI * (1.0 - 0.8f64.cos())).abs() < 1e-12);
    }

    #[test]
    fn offsets() {
        let p = offset_surface(&plane(), 0.3).unwrap();
        assert!((p.point(0.2, 0.7) - Vector3::new(0.2, 0.7, 0.3)).norm() < 1e-15);
        assert!((area(&p).unwrap() - 1.0).abs() < 1e-13);
        let s = offset_surface(&sphere(1.0), 0.25).unwrap();
        assert!((s.point(1.0, 2.0).norm() - 1.25).abs() < 1e-14);
        let c = offset_surface(&cylinder(1.0), 0.5).unwrap();
        let q = c.point(0.3, 0.2);
        assert!(((q.x * q.x + q.y * q.y).sqrt() - 1.5).abs() < 1e-14);
        assert!(offset_surface(&sphere(1.0), -1.2).is_err());
    }

    #[test]
    fn sphere_totals() {
        let t = total_curvatures(&sphere(1.0)).unwrap();
        assert!((t.area - 4.0 * PI).abs() < 1e-9);
        assert!((t.mean_total - 8.0 * PI).abs() < 1e-9);
        assert!((t.gauss_total - 4.0 * PI).abs() < 1e-9);
        assert!(t.consistent, "mismatch {}", t.mismatch);
        let flipped = total_curvatures(&sphere(1.0).flipped()).unwrap();
        assert!((flipped.mean_total + 8.0 * PI).abs() < 1e-9);
        assert!((flipped.gauss_total - 4.0 * PI).abs() < 1e-9);
    }

    #[test]
    fn plane_totals_vanish() {
        let t = total_curvatures(&plane()).unwrap();
        assert!(t.mean_total.abs() < 1e-14 && t.gauss_total.abs() < 1e-14);
        assert!(t.consistent);
    }

    #[test]
    fn saddle_gauss_image_is_negative() {
        let s = graph(|x, y| *x * *x - *y * *y);
        assert!(gauss_map_signed_area(&s).unwrap() < 0.0);
    }
}
