//! Parametrized curves in R² and R³: length, natural parametrization,
//! curvature, torsion, the Frenet frame, and reconstruction of a curve from
//! its curvature (and torsion) as functions of arc length.

use std::sync::Arc;

use nalgebra::{Matrix3, Vector2, Vector3};
use serde::Serialize;

use crate::error::{GeomError, Result};
use crate::numkit::{quadrature, Jet, OdeProblem, OutOfDomain, Trajectory};

/// Evaluator mapping a parameter jet to the jets of the coordinates.
pub type CurveFn = Arc<dyn Fn(&Jet) -> Vec<Jet> + Send + Sync>;

/// A scalar function of arc length that can be evaluated on jets.
pub type ScalarFn = Arc<dyn Fn(&Jet) -> Jet + Send + Sync>;

const LENGTH_TOL: f64 = 1e-12;
/// Below this `|γ̇ × γ̈|` the torsion is not reported.
pub const EPS_BIREGULAR: f64 = 1e-9;

/// Smooth map `[a, b] → R^dim`, `dim ∈ {2, 3}`.
#[derive(Clone)]
pub struct ParamCurve {
    dim: usize,
    domain: (f64, f64),
    eval: CurveFn,
    eps_reg: f64,
}

impl std::fmt::Debug for ParamCurve {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ParamCurve")
            .field("dim", &self.dim)
            .field("domain", &self.domain)
            .finish()
    }
}

impl ParamCurve {
    pub fn new<F>(dim: usize, domain: (f64, f64), eval: F) -> Result<Self>
    where
        F: Fn(&Jet) -> Vec<Jet> + Send + Sync + 'static,
    {
        if !(dim == 2 || dim == 3) {
            return Err(GeomError::Precondition(format!("curves live in R² or R³, got dim {dim}")));
        }
        if !(domain.0 < domain.1) {
            return Err(GeomError::Precondition("empty parameter interval".into()));
        }
        let eps_reg = 1e-9 * (domain.1 - domain.0).max(1.0);
        Ok(ParamCurve {
            dim,
            domain,
            eval: Arc::new(eval),
            eps_reg,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn domain(&self) -> (f64, f64) {
        self.domain
    }

    pub fn eval_jet(&self, t: &Jet) -> Vec<Jet> {
        let out = (self.eval)(t);
        debug_assert_eq!(out.len(), self.dim);
        out
    }

    /// `[γ, γ̇, γ̈, γ⃛]` at `t`, each padded to R³.
    pub fn derivatives(&self, t: f64) -> [Vector3<f64>; 4] {
        let comps = self.eval_jet(&Jet::variable(t, 0, 1, 3));
        let mut out = [Vector3::zeros(); 4];
        for (i, c) in comps.iter().enumerate() {
            out[0][i] = c.value();
            out[1][i] = c.partial(&[0]);
            out[2][i] = c.partial(&[0, 0]);
            out[3][i] = c.partial(&[0, 0, 0]);
        }
        out
    }

    pub fn point(&self, t: f64) -> Vector3<f64> {
        let comps = self.eval_jet(&Jet::constant(t, 1, 0));
        let mut p = Vector3::zeros();
        for (i, c) in comps.iter().enumerate() {
            p[i] = c.value();
        }
        p
    }

    pub fn speed(&self, t: f64) -> f64 {
        let comps = self.eval_jet(&Jet::variable(t, 0, 1, 1));
        comps.iter().map(|c| c.partial(&[0]).powi(2)).sum::<f64>().sqrt()
    }

    fn check_regular(&self, t: f64, velocity: &Vector3<f64>) -> Result<()> {
        if velocity.norm() <= self.eps_reg {
            return Err(GeomError::Regularity {
                at: format!("t = {t}"),
                detail: format!("|γ'| = {:e}", velocity.norm()),
            });
        }
        Ok(())
    }

    /// The curve `c·γ` (homothety about the origin).
    pub fn scaled(&self, c: f64) -> ParamCurve {
        let inner = self.eval.clone();
        ParamCurve {
            eval: Arc::new(move |t| inner(t).into_iter().map(|x| x * c).collect()),
            ..self.clone()
        }
    }

    /// A planar curve viewed in the plane `z = 0` of R³.
    pub fn embed_in_space(&self) -> ParamCurve {
        if self.dim == 3 {
            return self.clone();
        }
        let inner = self.eval.clone();
        ParamCurve {
            dim: 3,
            eval: Arc::new(move |t| {
                let mut v = inner(t);
                v.push(t.lift(0.0));
                v
            }),
            ..self.clone()
        }
    }

    /// Restricts the parameter interval.
    pub fn restricted(&self, a: f64, b: f64) -> Result<ParamCurve> {
        if !(self.domain.0 <= a && a < b && b <= self.domain.1) {
            return Err(GeomError::Precondition(format!("[{a}, {b}] is not inside the domain")));
        }
        Ok(ParamCurve {
            domain: (a, b),
            ..self.clone()
        })
    }
}

/// `∫_a^b |γ̇(t)| dt`.
pub fn arc_length(curve: &ParamCurve, a: f64, b: f64) -> Result<f64> {
    let (lo, hi) = curve.domain;
    let slack = 1e-12 * (hi - lo);
    if a < lo - slack || b > hi + slack || a > b {
        return Err(GeomError::Precondition(format!(
            "[{a}, {b}] is not a subinterval of [{lo}, {hi}]"
        )));
    }
    quadrature(|t| curve.speed(t), a, b, LENGTH_TOL)
}

/// Unit-speed reparametrization on `[0, L]`.
///
/// Each evaluation inverts the length function `s(t)` by safeguarded Newton
/// iteration, then composes the curve with the Taylor expansion of `t(s)`.
pub fn natural_reparametrize(curve: &ParamCurve) -> Result<ParamCurve> {
    let (a, b) = curve.domain;
    // regularity on a dense sample
    let n = 512;
    for i in 0..=n {
        let t = a + (b - a) * i as f64 / n as f64;
        let d = curve.derivatives(t);
        curve.check_regular(t, &d[1])?;
    }
    let total = arc_length(curve, a, b)?;
    let base = curve.clone();
    let inv = Arc::new(LengthInverse { curve: base.clone(), total });
    let eval = move |s: &Jet| -> Vec<Jet> {
        let s0 = s.value().clamp(0.0, total);
        let t0 = inv.invert(s0);
        // w(t) = 1/|γ̇(t)| as an order-2 jet in t
        let tj = Jet::variable(t0, 0, 1, 3);
        let comps = base.eval_jet(&tj);
        let mut speed2 = tj.lift(0.0).truncate(2);
        for c in &comps {
            let d = c.derivative(0);
            speed2 += d * d;
        }
        let w = speed2.sqrt().recip();
        let (w0, w1, w2) = (w.value(), w.partial(&[0]), w.partial(&[0, 0]));
        // t' = w, t'' = w' w, t''' = (w'' w + w'^2) w
        let t1 = w0;
        let t2 = w1 * w0;
        let t3 = (w2 * w0 + w1 * w1) * w0;
        let tt = Jet::univariate(&[t0, t1, t2 / 2.0, t3 / 6.0]);
        let ts = tt.compose(std::slice::from_ref(s));
        base.eval_jet(&ts)
    };
    let mut out = ParamCurve::new(curve.dim, (0.0, total), eval)?;
    out.eps_reg = 1e-9 * total.max(1.0);
    Ok(out)
}

struct LengthInverse {
    curve: ParamCurve,
    total: f64,
}

impl LengthInverse {
    fn invert(&self, s: f64) -> f64 {
        let (a, b) = self.curve.domain;
        if s <= 0.0 {
            return a;
        }
        if s >= self.total {
            return b;
        }
        let (mut lo, mut hi) = (a, b);
        let mut t = a + (b - a) * s / self.total;
        for _ in 0..100 {
            let f = quadrature(|x| self.curve.speed(x), a, t, LENGTH_TOL * 1e-2).unwrap_or(f64::NAN) - s;
            if f > 0.0 {
                hi = t;
            } else {
                lo = t;
            }
            let step = f / self.curve.speed(t);
            let mut next = t - step;
            if !(next > lo && next < hi) || !next.is_finite() {
                next = 0.5 * (lo + hi);
            }
            if (next - t).abs() <= 1e-15 * (b - a).max(1.0) {
                return next;
            }
            t = next;
        }
        t
    }
}

/// Signed curvature `(ẋÿ − ẏẍ)/|γ̇|³` of a planar curve.
pub fn plane_curvature(curve: &ParamCurve, t: f64) -> Result<f64> {
    if curve.dim != 2 {
        return Err(GeomError::Precondition("signed curvature needs a planar curve".into()));
    }
    let [_, d1, d2, _] = curve.derivatives(t);
    curve.check_regular(t, &d1)?;
    Ok((d1.x * d2.y - d1.y * d2.x) / d1.norm().powi(3))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpaceCurvature {
    pub curvature: f64,
    /// Absent where the curve is not biregular.
    pub torsion: Option<f64>,
}

/// Curvature `|γ̇×γ̈|/|γ̇|³` and torsion `(γ̇×γ̈)·γ⃛ / |γ̇×γ̈|²`.
pub fn space_curvature_torsion(curve: &ParamCurve, t: f64) -> Result<SpaceCurvature> {
    let [_, d1, d2, d3] = curve.derivatives(t);
    curve.check_regular(t, &d1)?;
    let cr = d1.cross(&d2);
    let curvature = cr.norm() / d1.norm().powi(3);
    let torsion = if cr.norm() > EPS_BIREGULAR {
        Some(cr.dot(&d3) / cr.norm_squared())
    } else {
        None
    };
    Ok(SpaceCurvature { curvature, torsion })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FrenetFrame {
    pub point: Vector3<f64>,
    pub tangent: Vector3<f64>,
    pub normal: Vector3<f64>,
    /// Only for space curves.
    pub binormal: Option<Vector3<f64>>,
    /// Signed for planar curves, non-negative for space curves.
    pub curvature: f64,
    pub torsion: Option<f64>,
}

/// Moving frame at `t`.
///
/// Planar curves get the normal obtained by rotating the tangent through
/// +π/2 and a signed curvature; space curves need to be biregular.
pub fn frenet_frame(curve: &ParamCurve, t: f64) -> Result<FrenetFrame> {
    let [p, d1, d2, d3] = curve.derivatives(t);
    curve.check_regular(t, &d1)?;
    let v = d1 / d1.norm();
    if curve.dim == 2 {
        let n = Vector3::new(-v.y, v.x, 0.0);
        return Ok(FrenetFrame {
            point: p,
            tangent: v,
            normal: n,
            binormal: None,
            curvature: plane_curvature(curve, t)?,
            torsion: None,
        });
    }
    let cr = d1.cross(&d2);
    if cr.norm() <= EPS_BIREGULAR {
        return Err(GeomError::Regularity {
            at: format!("t = {t}"),
            detail: "curve is not biregular (γ' ∥ γ'')".into(),
        });
    }
    let b = cr / cr.norm();
    let n = b.cross(&v);
    Ok(FrenetFrame {
        point: p,
        tangent: v,
        normal: n,
        binormal: Some(b),
        curvature: cr.norm() / d1.norm().powi(3),
        torsion: Some(cr.dot(&d3) / cr.norm_squared()),
    })
}

/// Unit-speed planar curve with `σ(0) = 0`, `σ'(0) = (1, 0)` and signed
/// curvature `kbar(s)`.
pub fn reconstruct_plane_curve(kbar: ScalarFn, s_max: f64) -> Result<ParamCurve> {
    reconstruct_plane_curve_from(kbar, s_max, Vector2::zeros(), 0.0)
}

/// As [`reconstruct_plane_curve`] with a chosen start point and heading
/// angle.
pub fn reconstruct_plane_curve_from(
    kbar: ScalarFn,
    s_max: f64,
    origin: Vector2<f64>,
    heading: f64,
) -> Result<ParamCurve> {
    if !(s_max > 0.0) {
        return Err(GeomError::Precondition("s_max must be positive".into()));
    }
    let k = kbar.clone();
    let traj = OdeProblem::new(
        move |s, y: &[f64], dy: &mut [f64]| {
            dy[0] = y[2].cos();
            dy[1] = y[2].sin();
            dy[2] = k(&Jet::constant(s, 1, 0)).value();
            Ok::<(), OutOfDomain>(())
        },
        vec![origin.x, origin.y, heading],
        0.0,
        s_max,
    )
    .tolerances(1e-12, 1e-14)
    .max_step(0.01 * s_max.min(1.0))
    .solve()?;
    let traj = Arc::new(traj);
    ParamCurve::new(2, (0.0, s_max), move |s: &Jet| {
        let s0 = s.value();
        let y = traj.interpolate(s0);
        let kj = kbar(&Jet::variable(s0, 0, 1, 2));
        let (k0, k1, k2) = (kj.value(), kj.partial(&[0]), kj.partial(&[0, 0]));
        let theta = Jet::univariate(&[y[2], k0, k1 / 2.0, k2 / 6.0]);
        let (c, sn) = (theta.cos(), theta.sin());
        let x = Jet::univariate(&[y[0], c.coeffs()[0], c.coeffs()[1] / 2.0, c.coeffs()[2] / 3.0]);
        let yy = Jet::univariate(&[y[1], sn.coeffs()[0], sn.coeffs()[1] / 2.0, sn.coeffs()[2] / 3.0]);
        vec![x.compose(std::slice::from_ref(s)), yy.compose(std::slice::from_ref(s))]
    })
}

/// Unit-speed space curve with curvature `kbar > 0` and torsion `tbar`,
/// starting at the origin with the standard frame.
pub fn reconstruct_space_curve(kbar: ScalarFn, tbar: ScalarFn, s_max: f64) -> Result<ParamCurve> {
    reconstruct_space_curve_from(kbar, tbar, s_max, Vector3::zeros(), Matrix3::identity())
}

/// As [`reconstruct_space_curve`]; the columns of `frame` are the initial
/// tangent, normal and binormal.
pub fn reconstruct_space_curve_from(
    kbar: ScalarFn,
    tbar: ScalarFn,
    s_max: f64,
    origin: Vector3<f64>,
    frame: Matrix3<f64>,
) -> Result<ParamCurve> {
    if !(s_max > 0.0) {
        return Err(GeomError::Precondition("s_max must be positive".into()));
    }
    let samples = 2000;
    for i in 0..=samples {
        let s = s_max * i as f64 / samples as f64;
        let k = kbar(&Jet::constant(s, 1, 0)).value();
        if !(k > 0.0) {
            return Err(GeomError::Precondition(format!("curvature must be positive, got {k} at s = {s}")));
        }
    }
    let (k, tau) = (kbar.clone(), tbar.clone());
    let v0 = frame.column(0).into_owned();
    let n0 = frame.column(1).into_owned();
    let mut y0 = Vec::with_capacity(9);
    y0.extend(origin.iter());
    y0.extend(v0.iter());
    y0.extend(n0.iter());
    let traj = OdeProblem::new(
        move |s, y: &[f64], dy: &mut [f64]| {
            let kv = k(&Jet::constant(s, 1, 0)).value();
            let tv = tau(&Jet::constant(s, 1, 0)).value();
            let v = Vector3::new(y[3], y[4], y[5]);
            let n = Vector3::new(y[6], y[7], y[8]);
            let b = v.cross(&n);
            let dv = kv * n;
            let dn = -kv * v + tv * b;
            dy[..3].copy_from_slice(v.as_slice());
            dy[3..6].copy_from_slice(dv.as_slice());
            dy[6..9].copy_from_slice(dn.as_slice());
            Ok::<(), OutOfDomain>(())
        },
        y0,
        0.0,
        s_max,
    )
    .tolerances(1e-12, 1e-14)
    .max_step(0.01 * s_max.min(1.0))
    .solve()?;
    let traj: Arc<Trajectory> = Arc::new(traj);
    ParamCurve::new(3, (0.0, s_max), move |s: &Jet| {
        let s0 = s.value();
        let y = traj.interpolate(s0);
        let p = Vector3::new(y[0], y[1], y[2]);
        let v = Vector3::new(y[3], y[4], y[5]).normalize();
        let n_raw = Vector3::new(y[6], y[7], y[8]);
        let n = (n_raw - v * v.dot(&n_raw)).normalize();
        let b = v.cross(&n);
        let kj = kbar(&Jet::variable(s0, 0, 1, 1));
        let (k0, k1) = (kj.value(), kj.partial(&[0]));
        let t0 = tbar(&Jet::constant(s0, 1, 0)).value();
        let third = k1 * n - k0 * k0 * v + k0 * t0 * b;
        (0..3)
            .map(|i| {
                Jet::univariate(&[p[i], v[i], k0 * n[i] / 2.0, third[i] / 6.0])
                    .compose(std::slice::from_ref(s))
            })
            .collect()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn circle(r: f64) -> ParamCurve {
        ParamCurve::new(2, (0.0, 2.0 * PI), move |t| vec![t.cos() * r, t.sin() * r]).unwrap()
    }

    fn helix(r: f64, w: f64, v: f64) -> ParamCurve {
        ParamCurve::new(3, (0.0, 10.0), move |t| {
            let a = *t * w;
            vec![a.cos() * r, a.sin() * r, *t * v]
        })
        .unwrap()
    }

    #[test]
    fn lengths() {
        assert!((arc_length(&circle(1.0), 0.0, 2.0 * PI).unwrap() - 2.0 * PI).abs() < 1e-10);
        let seg = ParamCurve::new(2, (0.0, 5.0), |t| vec![*t, t.lift(0.0)]).unwrap();
        assert!((arc_length(&seg, 0.0, 5.0).unwrap() - 5.0).abs() < 1e-12);
        let (r, w, v) = (1.5, 2.0, 0.3);
        let len = arc_length(&helix(r, w, v), 0.0, 7.0).unwrap();
        assert!((len - 7.0 * (r * r * w * w + v * v).sqrt()).abs() < 1e-10);
    }

    #[test]
    fn length_outside_domain_is_rejected() {
        assert!(arc_length(&circle(1.0), -1.0, 1.0).is_err());
    }

    #[test]
    fn circle_and_line_curvature() {
        for &t in &[0.0, 1.0, 4.0] {
            assert!((plane_curvature(&circle(2.0), t).unwrap() - 0.5).abs() < 1e-14);
        }
        let line = ParamCurve::new(2, (0.0, 1.0), |t| vec![*t * 2.0, *t * 3.0 + 1.0]).unwrap();
        assert_eq!(plane_curvature(&line, 0.5).unwrap(), 0.0);
        let cw = ParamCurve::new(2, (0.0, 6.0), |t| vec![t.cos(), -t.sin()]).unwrap();
        assert!((plane_curvature(&cw, 1.0).unwrap() + 1.0).abs() < 1e-14);
    }

    #[test]
    fn parabola_vertex() {
        let p = ParamCurve::new(2, (-1.0, 1.0), |t| vec![*t, *t * *t]).unwrap();
        assert!((plane_curvature(&p, 0.0).unwrap() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn singular_point_is_rejected() {
        let cusp = ParamCurve::new(2, (-1.0, 1.0), |t| vec![*t * *t, *t * *t * *t]).unwrap();
        assert!(matches!(plane_curvature(&cusp, 0.0), Err(GeomError::Regularity { .. })));
    }

    #[test]
    fn helix_torsion() {
        let (r, w, v) = (2.0, 1.5, 0.7);
        let sc = space_curvature_torsion(&helix(r, w, v), 0.8).unwrap();
        let den = r * r * w * w + v * v;
        assert!((sc.curvature - r * w * w / den).abs() < 1e-13);
        assert!((sc.torsion.unwrap() - v * w / den).abs() < 1e-13);
    }

    #[test]
    fn planar_curves_have_no_torsion() {
        let c = circle(3.0).embed_in_space();
        let sc = space_curvature_torsion(&c, 1.3).unwrap();
        assert!((sc.curvature - 1.0 / 3.0).abs() < 1e-14);
        assert!(sc.torsion.unwrap().abs() < 1e-14);
        let line = ParamCurve::new(3, (0.0, 1.0), |t| vec![*t, *t, *t]).unwrap();
        assert_eq!(space_curvature_torsion(&line, 0.3).unwrap().torsion, None);
    }

    #[test]
    fn frames() {
        let f = frenet_frame(&circle(1.0).embed_in_space(), 0.0).unwrap();
        assert!((f.tangent - Vector3::new(0.0, 1.0, 0.0)).norm() < 1e-15);
        assert!((f.normal - Vector3::new(-1.0, 0.0, 0.0)).norm() < 1e-15);
        assert!((f.binormal.unwrap() - Vector3::new(0.0, 0.0, 1.0)).norm() < 1e-15);

        let (r, w, v) = (1.0, 2.0, 0.5);
        let f = frenet_frame(&helix(r, w, v), 0.0).unwrap();
        let expect = Vector3::new(0.0, r * w, v).normalize();
        assert!((f.tangent - expect).norm() < 1e-15);
        assert!((f.normal - Vector3::new(-1.0, 0.0, 0.0)).norm() < 1e-15);
        for &t in &[0.0, 0.4, 2.2] {
            let f = frenet_frame(&helix(r, w, v), t).unwrap();
            let m = Matrix3::from_columns(&[f.tangent, f.normal, f.binormal.unwrap()]);
            assert!((m.determinant() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn linear_rescale_reparametrization() {
        let c = ParamCurve::new(2, (0.0, 1.0), |t| vec![*t * 2.0, t.lift(0.0)]).unwrap();
        let n = natural_reparametrize(&c).unwrap();
        assert!((n.domain().1 - 2.0).abs() < 1e-12);
        for &s in &[0.0, 0.3, 1.7, 2.0] {
            let p = n.point(s);
            assert!((p.x - s).abs() < 1e-12 && p.y.abs() < 1e-15);
        }
    }

    #[test]
    fn parabola_natural_length() {
        let p = ParamCurve::new(2, (0.0, 1.0), |t| vec![*t, *t * *t]).unwrap();
        let n = natural_reparametrize(&p).unwrap();
        let exact = (2.0 * 5f64.sqrt() + 2f64.asinh()) / 4.0;
        assert!((n.domain().1 - exact).abs() < 1e-11);
        for i in 0..=20 {
            let s = exact * i as f64 / 20.0;
            assert!((n.speed(s) - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn reconstruct_constant_curvatures() {
        let line = reconstruct_plane_curve(Arc::new(|s: &Jet| s.lift(0.0)), 3.0).unwrap();
        let p = line.point(2.5);
        assert!((p.x - 2.5).abs() < 1e-12 && p.y.abs() < 1e-12);
        let circ = reconstruct_plane_curve(Arc::new(|s: &Jet| s.lift(1.0)), 2.0 * PI).unwrap();
        for &s in &[0.5, 2.0, 5.0] {
            let p = circ.point(s);
            assert!((p.x - s.sin()).abs() < 1e-10 && (p.y - (1.0 - s.cos())).abs() < 1e-10);
        }
    }

    #[test]
    fn clothoid_round_trip() {
        let c = reconstruct_plane_curve(Arc::new(|s: &Jet| *s), 3.0).unwrap();
        for i in 0..=60 {
            let s = 3.0 * i as f64 / 60.0;
            assert!((plane_curvature(&c, s).unwrap() - s).abs() < 1e-7);
        }
    }

    #[test]
    fn space_reconstruction_rejects_nonpositive_curvature() {
        let r = reconstruct_space_curve(Arc::new(|s: &Jet| *s - 1.0), Arc::new(|s: &Jet| s.lift(0.0)), 2.0);
        assert!(matches!(r, Err(GeomError::Precondition(_))));
    }

    #[test]
    fn space_reconstruction_circle() {
        let c = reconstruct_space_curve(Arc::new(|s: &Jet| s.lift(2.0)), Arc::new(|s: &Jet| s.lift(0.0)), 3.0).unwrap();
        for &s in &[0.2, 1.0, 2.9] {
            let p = c.point(s);
            assert!(p.z.abs() < 1e-12);
            assert!(((p - Vector3::new(0.0, 0.5, 0.0)).norm() - 0.5).abs() < 1e-10);
        }
    }
}
