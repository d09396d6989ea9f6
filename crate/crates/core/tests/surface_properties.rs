use std::f64::consts::PI;

use curvatur::catalog::builtin_with;
use curvatur::surface::{
    area_over, forms_at, principal_at, section_curvature, section_curvature_by_slicing, shape_operator_at,
    total_curvatures_over, SurfacePatch,
};
use proptest::prelude::*;

fn surface(name: &str) -> SurfacePatch {
    builtin_with(name, &[]).unwrap().surface().unwrap().clone()
}

fn point_in(s: &SurfacePatch, a: f64, b: f64) -> [f64; 2] {
    let d = s.domain();
    [d[0].0 + (0.1 + 0.8 * a) * (d[0].1 - d[0].0), d[1].0 + (0.1 + 0.8 * b) * (d[1].1 - d[1].0)]
}

const NAMES: [&str; 6] = ["sphere", "torus", "saddle", "graph", "revolution", "ellipsoid"];

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn flipping_the_normal(i in 0usize..6, a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let s = surface(NAMES[i]);
        let uv = point_in(&s, a, b);
        let (p, q) = (principal_at(&s, uv).unwrap(), principal_at(&s.flipped(), uv).unwrap());
        let (fp, fq) = (forms_at(&s, uv).unwrap(), forms_at(&s.flipped(), uv).unwrap());
        prop_assert!((fp.q + fq.q).amax() < 1e-12);
        prop_assert!((p.lambda_plus + q.lambda_minus).abs() < 1e-10);
        prop_assert!((p.lambda_minus + q.lambda_plus).abs() < 1e-10);
        prop_assert!((p.mean + q.mean).abs() < 1e-10);
        prop_assert!((p.gaussian - q.gaussian).abs() < 1e-10);
    }

    #[test]
    fn homothety(i in 0usize..6, a in 0.0f64..1.0, b in 0.0f64..1.0, c in 0.3f64..4.0) {
        let s = surface(NAMES[i]);
        let t = s.scaled(c);
        let uv = point_in(&s, a, b);
        let (fs, ft) = (forms_at(&s, uv).unwrap(), forms_at(&t, uv).unwrap());
        let tol = 1e-9 * (1.0 + c * c);
        prop_assert!((ft.g - fs.g * (c * c)).amax() < tol * (1.0 + fs.g.amax()));
        prop_assert!((ft.q - fs.q * c).amax() < tol * (1.0 + fs.q.amax()));
        let (p, q) = (principal_at(&s, uv).unwrap(), principal_at(&t, uv).unwrap());
        prop_assert!((q.lambda_plus - p.lambda_plus / c).abs() < 1e-9 * (1.0 + p.lambda_plus.abs()));
        prop_assert!((q.gaussian - p.gaussian / (c * c)).abs() < 1e-9 * (1.0 + p.gaussian.abs()));
    }

    #[test]
    fn weingarten_and_gauss_routes_agree(i in 0usize..6, a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let s = surface(NAMES[i]);
        let sh = shape_operator_at(&s, point_in(&s, a, b)).unwrap();
        prop_assert!(sh.discrepancy < 1e-10 * (1.0 + sh.matrix.amax()), "{}", sh.discrepancy);
    }

    #[test]
    fn euler_formula_by_slicing(i in 0usize..6, a in 0.0f64..1.0, b in 0.0f64..1.0, phi in 0.0f64..(2.0 * PI)) {
        let s = surface(NAMES[i]);
        let uv = point_in(&s, a, b);
        let exact = section_curvature(&s, uv, phi, 0.0).unwrap();
        let sliced = section_curvature_by_slicing(&s, uv, phi, 0.0).unwrap();
        prop_assert!((exact - sliced).abs() < 1e-6);
    }
}

#[test]
fn homothety_of_areas_and_total_curvature() {
    let s = surface("torus");
    let rect = [(0.2, 2.0), (0.5, 3.5)];
    let (a, ta) = (area_over(&s, rect).unwrap(), total_curvatures_over(&s, rect).unwrap());
    for c in [0.5, 3.0] {
        let t = s.scaled(c);
        assert!((area_over(&t, rect).unwrap() - c * c * a).abs() < 1e-9 * c * c * a);
        let tb = total_curvatures_over(&t, rect).unwrap();
        assert!((tb.gauss_total - ta.gauss_total).abs() < 1e-9);
    }
}
