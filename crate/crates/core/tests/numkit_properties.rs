use curvatur::numkit::{generalized_symmetric_eigen, integrate_ode, Jet, OdeProblem, OutOfDomain};
use nalgebra::Matrix2;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn generalized_eigen_residual(
        a in -2.0f64..2.0, b in -2.0f64..2.0, c in 0.2f64..3.0, d in 0.2f64..3.0,
        q11 in -5.0f64..5.0, q12 in -5.0f64..5.0, q22 in -5.0f64..5.0,
    ) {
        let l = Matrix2::new(c, 0.0, a, d);
        let g = l * l.transpose() + Matrix2::identity() * (0.01 * b.abs());
        let q = Matrix2::new(q11, q12, q12, q22);
        let e = generalized_symmetric_eigen(&q, &g).unwrap();
        prop_assert!(e.values[0] >= e.values[1]);
        for k in 0..2 {
            let v = e.vectors[k];
            prop_assert!((q * v - g * v * e.values[k]).norm() < 1e-12 * (1.0 + q.amax() + g.amax()) * (1.0 + v.norm()));
            prop_assert!(((v.transpose() * g * v)[0] - 1.0).abs() < 1e-12);
        }
        let cross = (e.vectors[0].transpose() * g * e.vectors[1])[0];
        prop_assert!(cross.abs() < 1e-10);
    }

    #[test]
    fn oscillator_energy(y0 in -1.0f64..1.0, t1 in 1.0f64..30.0) {
        let v0 = (1.0 - y0 * y0).sqrt();
        let traj = OdeProblem::new(
            |_t, y: &[f64], dy: &mut [f64]| {
                dy[0] = y[1];
                dy[1] = -y[0];
                Ok::<(), OutOfDomain>(())
            },
            vec![y0, v0],
            0.0,
            t1,
        )
        .solve()
        .unwrap();
        for i in 0..traj.len() {
            let y = traj.state(i);
            prop_assert!((y[0] * y[0] + y[1] * y[1] - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn jet_chain_rule(x in 0.1f64..2.0, y in -1.0f64..1.0) {
        let v = Jet::variables(&[x, y], 3);
        let f = (v[0] * v[1]).sin() + v[0].ln() * v[1].exp();
        // ∂²f/∂x∂y against the closed form
        let want = (x * y).cos() - x * y * (x * y).sin() + y.exp() / x;
        prop_assert!((f.partial(&[0, 1]) - want).abs() < 1e-12 * (1.0 + want.abs()));
        let third = -2.0 * x * (x * y).sin() - x * x * y * (x * y).cos();
        prop_assert!((f.partial(&[0, 1, 1]) - (third + y.exp() / x)).abs() < 1e-11 * (1.0 + third.abs()));
    }
}

#[test]
fn integrate_ode_wrapper_matches_builder() {
    let f = |_t: f64, y: &[f64], dy: &mut [f64]| {
        dy[0] = y[0];
        Ok::<(), OutOfDomain>(())
    };
    let a = integrate_ode(OdeProblem::new(f, vec![1.0], 0.0, 1.0)).unwrap();
    assert!((a.interpolate(1.0)[0] - std::f64::consts::E).abs() < 1e-9);
}
