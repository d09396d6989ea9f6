//! Covariant derivatives of fields on the round sphere: the torsion-free
//! and metric properties of the connection, and the curvature operator as
//! a commutator of covariant derivatives.

use curvatur::catalog::builtin_with;
use curvatur::numkit::Jet;
use curvatur::tensors::{
    commutator, covariant_derivative, exterior_derivative, integrability_on_box, nabla_field, riemann_at, Field, FieldKind,
};

fn main() -> curvatur::error::Result<()> {
    let chart = builtin_with("sphere", &[])?.chart()?;
    let u = Field::new(FieldKind::Vector, 2, |x: &[Jet]| vec![x[1].sin(), x[0] * x[1]]);
    let v = Field::new(FieldKind::Vector, 2, |x: &[Jet]| vec![x[0].lift(1.0), x[0].cos()]);
    let w = Field::new(FieldKind::Vector, 2, |x: &[Jet]| vec![x[0] * x[0], x[1].lift(0.5)]);
    let p = [1.1, 0.7];

    let lie = commutator(&chart, &u, &v)?;
    let nuv = nabla_field(&chart, &u, &v)?.at(&p);
    let nvu = nabla_field(&chart, &v, &u)?.at(&p);
    println!("[u,v]         = {:?}", lie.at(&p));
    println!("∇_u v − ∇_v u = {:?}", [nuv[0] - nvu[0], nuv[1] - nvu[1]]);

    let lhs = riemann_at(&chart, &p)?.apply(&u.at(&p), &v.at(&p), &w.at(&p));
    let a = nabla_field(&chart, &u, &nabla_field(&chart, &v, &w)?)?.at(&p);
    let b = nabla_field(&chart, &v, &nabla_field(&chart, &u, &w)?)?.at(&p);
    let c = nabla_field(&chart, &lie, &w)?.at(&p);
    println!("R(u,v)w                          = {lhs:?}");
    println!("∇_u∇_v w − ∇_v∇_u w − ∇_[u,v] w = {:?}", [a[0] - b[0] - c[0], a[1] - b[1] - c[1]]);

    let g = Field::metric(&chart);
    println!("∇_u g = {:?}", covariant_derivative(&chart, &g, &p, &u.at(&p))?);

    let closed = Field::new(FieldKind::Covector, 2, |x: &[Jet]| vec![x[1].cos() * 2.0 * x[0], -(x[0] * x[0]) * x[1].sin()]);
    let open = Field::new(FieldKind::Covector, 2, |x: &[Jet]| vec![x[1].lift(0.0), x[0].lift(0.0) + x[0]]);
    for (name, phi) in [("d(u² cos v)", &closed), ("u dv", &open)] {
        let d = exterior_derivative(&chart, phi)?.at(&p);
        let i = integrability_on_box(&chart, phi, &[(0.8, 1.4), (0.2, 1.0)])?;
        println!("{name:>12}: dφ = {d:?}, path spread {:.2e}", i.path_spread);
    }
    Ok(())
}
