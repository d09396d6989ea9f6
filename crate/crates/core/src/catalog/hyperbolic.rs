//! Closed forms for the Lobachevsky plane in the upper half-plane model.

use num_complex::Complex64;

use crate::error::{GeomError, Result};

fn check(z: Complex64) -> Result<()> {
    if !(z.im > 0.0) || !z.re.is_finite() || !z.im.is_finite() {
        return Err(GeomError::InvalidParam(format!("point {z} is not in the upper half-plane")));
    }
    Ok(())
}

/// `ch d = 1 + |z₁ − z₂|² / (2 Im z₁ Im z₂)`, evaluated as
/// `d = 2 asinh(|z₁ − z₂| / (2 √(Im z₁ Im z₂)))`.
pub fn hyperbolic_distance(z1: Complex64, z2: Complex64) -> Result<f64> {
    check(z1)?;
    check(z2)?;
    Ok(2.0 * ((z1 - z2).norm() / (2.0 * (z1.im * z2.im).sqrt())).asinh())
}

/// `z ↦ z + a`.
pub fn translate(z: Complex64, a: f64) -> Complex64 {
    z + a
}

/// `z ↦ −1/z`.
pub fn invert(z: Complex64) -> Complex64 {
    -z.inv()
}

/// Vertices `(C, A, B)` of a right triangle with the right angle at `C = i`
/// and legs `|CA| = a` (along the imaginary axis), `|CB| = b` (along the unit
/// semicircle).
pub fn right_triangle(a: f64, b: f64) -> [Complex64; 3] {
    let c = Complex64::new(0.0, 1.0);
    let pa = Complex64::new(0.0, a.exp());
    let pb = Complex64::new(b.tanh(), 1.0 / b.cosh());
    [c, pa, pb]
}

/// Point of the half-plane corresponding to `(x, y, √(1 + x² + y²))` on the
/// upper sheet of the hyperboloid `x² + y² − z² = −1`.
pub fn hyperboloid_to_halfplane(x: f64, y: f64) -> Complex64 {
    let z = (1.0 + x * x + y * y).sqrt();
    let w = Complex64::new(x, y) / (1.0 + z);
    Complex64::new(0.0, 1.0) * (1.0 + w) / (1.0 - w)
}

/// `ch d = z₁z₂ − x₁x₂ − y₁y₂` on the hyperboloid.
pub fn hyperboloid_distance(p: [f64; 2], q: [f64; 2]) -> f64 {
    let zp = (1.0 + p[0] * p[0] + p[1] * p[1]).sqrt();
    let zq = (1.0 + q[0] * q[0] + q[1] * q[1]).sqrt();
    (zp * zq - p[0] * q[0] - p[1] * q[1]).max(1.0).acosh()
}

/// The geodesic through two points: `Vertical(x)` or a semicircle
/// `Semicircle { center, radius }` centred on the real axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HalfPlaneGeodesic {
    Vertical(f64),
    Semicircle { center: f64, radius: f64 },
}

pub fn geodesic_through(z1: Complex64, z2: Complex64) -> Result<HalfPlaneGeodesic> {
    check(z1)?;
    check(z2)?;
    let dx = z2.re - z1.re;
    if dx.abs() <= 1e-14 * (z1.re.abs() + z2.re.abs()).max(1.0) {
        return Ok(HalfPlaneGeodesic::Vertical(0.5 * (z1.re + z2.re)));
    }
    let center = (z2.norm_sqr() - z1.norm_sqr()) / (2.0 * dx);
    let radius = (z1 - center).norm();
    Ok(HalfPlaneGeodesic::Semicircle { center, radius })
}

/// Least-squares circle centred on the real axis through `points`, and the
/// largest radial residual.
pub fn fit_semicircle(points: &[[f64; 2]]) -> (f64, f64, f64) {
    // |p − c|² = ρ²  ⇔  x² + y² = 2cx + (ρ² − c²)
    let n = points.len() as f64;
    let (mut sx, mut sxx, mut sr, mut sxr) = (0.0, 0.0, 0.0, 0.0);
    for p in points {
        let r = p[0] * p[0] + p[1] * p[1];
        sx += p[0];
        sxx += p[0] * p[0];
        sr += r;
        sxr += p[0] * r;
    }
    let det = n * sxx - sx * sx;
    let a = (n * sxr - sx * sr) / det;
    let b = (sxx * sr - sx * sxr) / det;
    let center = a / 2.0;
    let radius = (b + center * center).sqrt();
    let residual = points
        .iter()
        .map(|p| (((p[0] - center).powi(2) + p[1] * p[1]).sqrt() - radius).abs())
        .fold(0.0, f64::max);
    (center, radius, residual)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn distance_basics() {
        assert_eq!(hyperbolic_distance(c(0.0, 1.0), c(0.0, 1.0)).unwrap(), 0.0);
        for k in [1.5, 3.0, 10.0] {
            assert!((hyperbolic_distance(c(0.0, 1.0), c(0.0, k)).unwrap() - f64::ln(k)).abs() < 1e-14);
        }
        assert!(hyperbolic_distance(c(0.0, 0.0), c(0.0, 1.0)).is_err());
    }

    #[test]
    fn isometries_preserve_distance() {
        let (z1, z2) = (c(0.3, 0.7), c(-1.2, 2.5));
        let d = hyperbolic_distance(z1, z2).unwrap();
        let t = hyperbolic_distance(translate(z1, 4.0), translate(z2, 4.0)).unwrap();
        let i = hyperbolic_distance(invert(z1), invert(z2)).unwrap();
        assert!((d - t).abs() < 1e-12 && (d - i).abs() < 1e-12);
    }

    #[test]
    fn pythagoras() {
        let [pc, pa, pb] = right_triangle(0.7, 1.3);
        let a = hyperbolic_distance(pc, pa).unwrap();
        let b = hyperbolic_distance(pc, pb).unwrap();
        let h = hyperbolic_distance(pa, pb).unwrap();
        assert!((a - 0.7).abs() < 1e-14 && (b - 1.3).abs() < 1e-14);
        assert!((h.cosh() - a.cosh() * b.cosh()).abs() < 1e-12);
    }

    #[test]
    fn hyperboloid_model_matches() {
        let (p, q) = ([0.4, -1.1], [2.0, 0.3]);
        let d = hyperbolic_distance(hyperboloid_to_halfplane(p[0], p[1]), hyperboloid_to_halfplane(q[0], q[1])).unwrap();
        assert!((d - hyperboloid_distance(p, q)).abs() < 1e-12);
    }

    #[test]
    fn semicircle_through_points() {
        let g = geodesic_through(c(-1.0, 1.0), c(1.0, 1.0)).unwrap();
        assert_eq!(g, HalfPlaneGeodesic::Semicircle { center: 0.0, radius: 2f64.sqrt() });
        let pts: Vec<[f64; 2]> = (1..10).map(|k| {
            let a = 0.3 * k as f64;
            [1.0 + 2.0 * a.cos(), 2.0 * a.sin()]
        })
        .collect();
        let (cx, r, res) = fit_semicircle(&pts);
        assert!((cx - 1.0).abs() < 1e-12 && (r - 2.0).abs() < 1e-12 && res < 1e-12);
    }
}
