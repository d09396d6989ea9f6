use std::sync::Arc;

use curvatur::catalog::builtin_with;
use curvatur::curves::{
    frenet_frame, natural_reparametrize, plane_curvature, reconstruct_space_curve, reconstruct_space_curve_from,
    space_curvature_torsion, ParamCurve, ScalarFn,
};
use curvatur::numkit::{fit_rigid_motion, Jet};
use nalgebra::{Matrix3, Rotation3, Vector3};
use proptest::prelude::*;

fn helix(r: f64, w: f64, v: f64) -> ParamCurve {
    builtin_with("helix", &[("r", r), ("omega", w), ("v", v), ("t0", 0.0), ("t1", 3.0)])
        .unwrap()
        .curve()
        .unwrap()
        .clone()
}

fn scalar(f: impl Fn(&Jet) -> Jet + Send + Sync + 'static) -> ScalarFn {
    Arc::new(f)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn natural_reparametrization_keeps_curvature_and_torsion(
        r in 0.5f64..2.0, w in 0.5f64..2.0, v in -1.0f64..1.0, frac in 0.1f64..0.9,
    ) {
        let c = helix(r, w, v);
        let n = natural_reparametrize(&c).unwrap();
        let (a, b) = c.domain();
        let t = a + frac * (b - a);
        let s = curvatur::curves::arc_length(&c, a, t).unwrap();
        let x = space_curvature_torsion(&c, t).unwrap();
        let y = space_curvature_torsion(&n, s).unwrap();
        prop_assert!((x.curvature - y.curvature).abs() < 1e-8);
        prop_assert!((x.torsion.unwrap() - y.torsion.unwrap()).abs() < 1e-8);
        prop_assert!((n.speed(s) - 1.0).abs() < 1e-8);
    }

    #[test]
    fn plane_curvature_survives_reparametrization(a in 0.2f64..2.0, frac in 0.1f64..0.9) {
        let c = builtin_with("parabola", &[("a", a)]).unwrap().curve().unwrap().clone();
        let n = natural_reparametrize(&c).unwrap();
        let (t0, t1) = c.domain();
        let t = t0 + frac * (t1 - t0);
        let s = curvatur::curves::arc_length(&c, t0, t).unwrap();
        prop_assert!((plane_curvature(&c, t).unwrap() - plane_curvature(&n, s).unwrap()).abs() < 1e-8);
    }

    #[test]
    fn frenet_equations_hold(r in 0.5f64..2.0, w in 0.5f64..2.0, v in -1.0f64..1.0, frac in 0.2f64..0.8) {
        let n = natural_reparametrize(&helix(r, w, v)).unwrap();
        let s = frac * n.domain().1;
        let h = 1e-4;
        let f = frenet_frame(&n, s).unwrap();
        let (fp, fm) = (frenet_frame(&n, s + h).unwrap(), frenet_frame(&n, s - h).unwrap());
        let d = |a: Vector3<f64>, b: Vector3<f64>| (a - b) / (2.0 * h);
        let (k, kappa) = (f.curvature, f.torsion.unwrap());
        let b = f.binormal.unwrap();
        prop_assert!((d(fp.tangent, fm.tangent) - f.normal * k).norm() < 1e-6);
        prop_assert!((d(fp.normal, fm.normal) + f.tangent * k - b * kappa).norm() < 1e-6);
        prop_assert!((d(fp.binormal.unwrap(), fm.binormal.unwrap()) + f.normal * kappa).norm() < 1e-6);
    }

    #[test]
    fn homothety_scales_curvature_and_torsion(c in 0.2f64..5.0, frac in 0.1f64..0.9) {
        let h = helix(1.0, 1.3, 0.4);
        let t = frac * 3.0;
        let a = space_curvature_torsion(&h, t).unwrap();
        let b = space_curvature_torsion(&h.scaled(c), t).unwrap();
        prop_assert!((b.curvature - a.curvature / c).abs() < 1e-10 * (1.0 + a.curvature / c));
        prop_assert!((b.torsion.unwrap() - a.torsion.unwrap() / c).abs() < 1e-10 * (1.0 + 1.0 / c));
    }

    #[test]
    fn reconstruction_is_unique_up_to_rigid_motion(
        ax in -3.0f64..3.0, ay in -3.0f64..3.0, az in -3.0f64..3.0,
        ox in -5.0f64..5.0, oy in -5.0f64..5.0, oz in -5.0f64..5.0,
    ) {
        let k = scalar(|s| s.cos() * 0.4 + 1.0);
        let t = scalar(|s| *s * 0.3 - 0.2);
        let a = reconstruct_space_curve(k.clone(), t.clone(), 4.0).unwrap();
        let rot: Matrix3<f64> = Rotation3::from_scaled_axis(Vector3::new(ax, ay, az)).into_inner();
        let origin = Vector3::new(ox, oy, oz);
        let b = reconstruct_space_curve_from(k, t, 4.0, origin, rot).unwrap();
        let ss: Vec<f64> = (0..40).map(|i| 0.1 * i as f64).collect();
        let pa: Vec<_> = ss.iter().map(|&s| a.point(s)).collect();
        let pb: Vec<_> = ss.iter().map(|&s| b.point(s)).collect();
        let (m, shift, residual) = fit_rigid_motion(&pa, &pb);
        prop_assert!(residual < 1e-7, "residual {residual}");
        prop_assert!((m - rot).amax() < 1e-7);
        prop_assert!((shift - origin).amax() < 1e-7);
    }
}
