use std::f64::consts::PI;

use curvatur::catalog::{builtin, builtin_with, fit_semicircle};
use curvatur::intrinsic::{geodesic_trace, holonomy, scalar_curvature_estimate, MetricChart, PathSegment};
use proptest::prelude::*;

fn chart(name: &str, params: &[(&str, f64)]) -> MetricChart {
    builtin_with(name, params).unwrap().chart().unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn holonomy_preserves_the_metric(
        which in 0usize..3, x in 0.3f64..0.7, y in 0.3f64..0.7,
        a in 0.05f64..0.4, b in 0.05f64..0.4, c in -0.3f64..0.3,
    ) {
        let (name, box_lo, box_hi) = [
            ("sphere", [0.5, 0.0], [2.5, 6.0]),
            ("torus", [0.0, 0.0], [6.0, 6.0]),
            ("lobachevsky_halfplane", [-1.0, 0.5], [1.0, 2.0]),
        ][which];
        let ch = chart(name, &[]);
        let p = vec![box_lo[0] + x * (box_hi[0] - box_lo[0]), box_lo[1] + y * (box_hi[1] - box_lo[1])];
        let pts = vec![p.clone(), vec![p[0] + a, p[1] + c * a], vec![p[0] + c * b, p[1] + b]];
        let h = holonomy(&ch, &PathSegment::polygon(&pts)).unwrap();
        let g = ch.metric_at(&p);
        let drift = (h.matrix.transpose() * &g * &h.matrix - &g).amax();
        prop_assert!(drift < 1e-8, "{drift}");
        prop_assert!(h.orthogonality_residual < 1e-8);
    }

    #[test]
    fn halfplane_geodesics_are_lines_or_semicircles(x in -1.0f64..1.0, y in 0.5f64..2.0, angle in 0.0f64..(2.0 * PI)) {
        let ch = chart("lobachevsky_halfplane", &[]);
        let vertical = (angle.cos()).abs() < 1e-3;
        let dir = [angle.cos(), angle.sin()];
        let path = geodesic_trace(&ch, &[x, y], &dir, 2.0).unwrap();
        let pts: Vec<[f64; 2]> = path.samples.iter().map(|s| [s.x[0], s.x[1]]).collect();
        if vertical {
            prop_assert!(pts.iter().all(|p| (p[0] - x).abs() < 1e-2));
        } else {
            let (_, _, residual) = fit_semicircle(&pts);
            prop_assert!(residual < 1e-6, "{residual}");
        }
    }
}

#[test]
fn vertical_geodesics_stay_vertical() {
    let ch = chart("lobachevsky_halfplane", &[]);
    for (x, y, up) in [(0.0, 1.0, 1.0), (-3.0, 0.5, -1.0), (2.5, 4.0, 1.0)] {
        let path = geodesic_trace(&ch, &[x, y], &[0.0, up], 3.0).unwrap();
        let worst = path.samples.iter().map(|s| (s.x[0] - x).abs()).fold(0.0, f64::max);
        assert!(worst < 1e-8, "{worst}");
    }
}

#[test]
fn scalar_curvature_is_chart_independent() {
    let polar = chart("sphere", &[]);
    let mut p = std::collections::BTreeMap::new();
    p.insert("f".to_string(), "sqrt(1-u^2-v^2)".to_string());
    for k in ["u0", "v0"] {
        p.insert(k.to_string(), "-0.7".to_string());
    }
    for k in ["u1", "v1"] {
        p.insert(k.to_string(), "0.7".to_string());
    }
    let graph = builtin("graph", &p).unwrap().chart().unwrap();
    for (rho, phi) in [(0.3, 0.4), (0.5, 2.0), (0.2, 4.0)] {
        let a = scalar_curvature_estimate(&polar, &[rho, phi]).unwrap().tau;
        let b = scalar_curvature_estimate(&graph, &[rho.sin() * phi.cos(), rho.sin() * phi.sin()]).unwrap().tau;
        assert!((a - b).abs() < 2e-3, "{a} vs {b}");
        assert!((a - 2.0).abs() < 2e-3);
    }
}
