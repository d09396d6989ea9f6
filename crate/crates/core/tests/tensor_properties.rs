use std::collections::BTreeMap;

use curvatur::catalog::{builtin, builtin_with, BUILTINS, Shape};
use curvatur::intrinsic::MetricChart;
use curvatur::numkit::g_dot;
use curvatur::tensors::{ricci_at, riemann_at, riemann_from_ricci_3d, sectional_at};
use proptest::prelude::*;

fn charts() -> Vec<(String, MetricChart)> {
    BUILTINS
        .iter()
        .filter_map(|b| {
            let g = builtin(b.name, &BTreeMap::new()).unwrap();
            (!matches!(g.shape, Shape::Curve(_))).then(|| (b.name.to_string(), g.chart().unwrap()))
        })
        .collect()
}

fn interior(ch: &MetricChart, t: &[f64]) -> Vec<f64> {
    ch.domain()
        .iter()
        .zip(t)
        .map(|((a, b), s)| {
            let (a, b) = (a.max(-3.0), b.min(3.0));
            a + (0.1 + 0.8 * s) * (b - a)
        })
        .collect()
}

fn conformal_3d() -> MetricChart {
    let mut p = BTreeMap::new();
    p.insert("n".to_string(), "3".to_string());
    p.insert("lambda".to_string(), "exp(0.3*x - 0.2*y*z + 0.1*z^2)".to_string());
    builtin("conformal", &p).unwrap().chart().unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn riemann_symmetries(i in 0usize..13, t in proptest::collection::vec(0.0f64..1.0, 3)) {
        let all = charts();
        let (name, ch) = &all[i % all.len()];
        let x = interior(ch, &t[..ch.dim()]);
        let r = riemann_at(ch, &x).unwrap();
        prop_assert!(r.symmetry_residual() < 1e-9, "{name} at {x:?}: {}", r.symmetry_residual());
    }

    #[test]
    fn three_dimensional_decomposition(
        t in proptest::collection::vec(-0.5f64..0.5, 3),
        u in proptest::collection::vec(-1.0f64..1.0, 3),
        v in proptest::collection::vec(-1.0f64..1.0, 3),
        w in proptest::collection::vec(-1.0f64..1.0, 3),
    ) {
        for ch in [conformal_3d(), builtin_with("s3_round", &[("R", 1.7)]).unwrap().chart().unwrap()] {
            let direct = riemann_at(&ch, &t).unwrap().apply(&u, &v, &w);
            let via_ricci = riemann_from_ricci_3d(&ch, &t, &u, &v, &w).unwrap();
            let scale = 1.0 + direct.iter().fold(0.0f64, |m, c| m.max(c.abs()));
            for k in 0..3 {
                prop_assert!((direct[k] - via_ricci[k]).abs() < 1e-6 * scale);
            }
        }
    }

    #[test]
    fn sectional_curvature_is_half_the_scalar_in_2d(i in 0usize..13, t in proptest::collection::vec(0.0f64..1.0, 2), a in -1.0f64..1.0) {
        let all: Vec<_> = charts().into_iter().filter(|(_, c)| c.dim() == 2).collect();
        let (_, ch) = &all[i % all.len()];
        let x = interior(ch, &t);
        let s = sectional_at(ch, &x, &[1.0, a], &[-a, 1.0 + a * a]).unwrap();
        let tau = ricci_at(ch, &x).unwrap().tau;
        prop_assert!((2.0 * s - tau).abs() < 1e-6 * (1.0 + tau.abs()));
    }
}

#[test]
fn ricci_trace_in_an_orthonormal_frame() {
    let ch = conformal_3d();
    let x = [0.2, -0.1, 0.3];
    let g = ch.metric_at(&x);
    let ric = ricci_at(&ch, &x).unwrap();
    let e = curvatur::numkit::orthonormal_frame(&g).unwrap();
    let mut sum = 0.0;
    for i in 0..3 {
        let c: Vec<f64> = e.column(i).iter().copied().collect();
        assert!((g_dot(&g, &c, &c) - 1.0).abs() < 1e-12);
        sum += ric.form(&c, &c);
    }
    assert!((sum - ric.tau).abs() < 1e-9);
}
