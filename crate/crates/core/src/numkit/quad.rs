//! Adaptive Gauss–Kronrod (7, 15) quadrature and fixed Gauss–Legendre rules.
#![allow(clippy::excessive_precision)]

use crate::error::{GeomError, Result};

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

const MAX_INTERVALS: usize = 4000;

fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        kron += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

/// `∫_a^b f` to absolute error `tol`.
///
/// Globally adaptive: the interval with the largest error estimate is
/// bisected until the summed estimate falls below `tol`. Failure to converge
/// returns [`GeomError::Quadrature`] with the best estimate.
pub fn quadrature<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    if a > b {
        return quadrature(f, b, a, tol).map(|v| -v);
    }
    let (v, e) = gk15(&mut f, a, b);
    let mut parts = vec![(a, b, v, e)];
    let mut total = v;
    let mut err = e;
    while err > tol {
        if parts.len() >= MAX_INTERVALS || !total.is_finite() {
            return Err(GeomError::Quadrature {
                estimate: total,
                error: err,
            });
        }
        let (imax, _) = parts
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .unwrap();
        let (lo, hi, v0, e0) = parts.swap_remove(imax);
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            // interval can no longer be split in floating point
            return Err(GeomError::Quadrature {
                estimate: total,
                error: err,
            });
        }
        let (v1, e1) = gk15(&mut f, lo, mid);
        let (v2, e2) = gk15(&mut f, mid, hi);
        total += v1 + v2 - v0;
        err += e1 + e2 - e0;
        parts.push((lo, mid, v1, e1));
        parts.push((mid, hi, v2, e2));
        // re-sum occasionally to shed accumulated rounding
        if parts.len() % 64 == 0 {
            total = parts.iter().map(|p| p.2).sum();
            err = parts.iter().map(|p| p.3).sum();
        }
    }
    Ok(parts.iter().map(|p| p.2).sum())
}

/// `∫∫ f(u, v)` over `[a,b]×[c,d]` by nested adaptive quadrature.
pub fn quadrature_2d<F: FnMut(f64, f64) -> f64>(
    mut f: F,
    (a, b): (f64, f64),
    (c, d): (f64, f64),
    tol: f64,
) -> Result<f64> {
    let inner_tol = tol / (4.0 * (b - a).abs().max(1e-300));
    let mut failure = None;
    let outer = quadrature(
        |u| match quadrature(|v| f(u, v), c, d, inner_tol) {
            Ok(x) => x,
            Err(e) => {
                failure.get_or_insert(e);
                f64::NAN
            }
        },
        a,
        b,
        tol / 2.0,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    outer
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { z } else { p1 };
            let pnm1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * pn - pnm1) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        if n == 1 {
            dp = 1.0;
            z = 0.0;
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n == 1 {
        w[0] = 2.0;
    }
    (x, w)
}

/// Gauss–Legendre nodes and weights mapped to `[a, b]`.
pub fn gauss_legendre_on(n: usize, a: f64, b: f64) -> Vec<(f64, f64)> {
    let (x, w) = gauss_legendre(n);
    let (c, h) = (0.5 * (a + b), 0.5 * (b - a));
    x.iter().zip(&w).map(|(xi, wi)| (c + h * xi, h * wi)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn sine_over_half_period() {
        let v = quadrature(f64::sin, 0.0, PI, 1e-12).unwrap();
        assert!((v - 2.0).abs() < 1e-12);
    }

    #[test]
    fn zero_integrand() {
        assert_eq!(quadrature(|_| 0.0, 0.0, 1.0, 1e-12).unwrap(), 0.0);
    }

    #[test]
    fn parabola_arc_length() {
        // closed form (2√5 + asinh 2)/4
        let exact = (2.0 * 5f64.sqrt() + 2f64.asinh()) / 4.0;
        assert!((exact - 1.478942857).abs() < 1e-9);
        let v = quadrature(|t| (1.0 + 4.0 * t * t).sqrt(), 0.0, 1.0, 1e-12).unwrap();
        assert!((v - exact).abs() < 1e-12);
    }

    #[test]
    fn reversed_limits_negate() {
        let v = quadrature(|t| t, 1.0, 0.0, 1e-12).unwrap();
        assert!((v + 0.5).abs() < 1e-14);
    }

    #[test]
    fn singular_integrand_reports_failure() {
        let err = quadrature(|t: f64| 1.0 / t, 0.0, 1.0, 1e-10).unwrap_err();
        assert!(matches!(err, GeomError::Quadrature { .. }));
    }

    #[test]
    fn legendre_rules_integrate_polynomials() {
        for n in 1..12 {
            let rule = gauss_legendre_on(n, 0.0, 2.0);
            let deg = 2 * n - 1;
            let v: f64 = rule.iter().map(|(x, w)| w * x.powi(deg as i32)).sum();
            let exact = 2f64.powi(deg as i32 + 1) / (deg as f64 + 1.0);
            assert!((v - exact).abs() < 1e-11 * exact, "n = {n}");
        }
    }

    #[test]
    fn square_area() {
        let v = quadrature_2d(|_, _| 1.0, (0.0, 1.0), (0.0, 1.0), 1e-12).unwrap();
        assert!((v - 1.0).abs() < 1e-14);
    }
}
