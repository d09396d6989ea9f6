//! Riemann and Ricci tensors from Christoffel symbols, cross-checked by
//! the holonomy of small parallelograms and by volume distortion of
//! geodesic balls.

use std::collections::BTreeMap;

use curvatur::catalog::builtin;
use curvatur::tensors::{
    ricci_at, ricci_volume_oracle, riemann_at, riemann_holonomy_oracle, second_bianchi_residual, sectional_at,
    HOLONOMY_LADDER, RIEMANN_CONVENTION, VOLUME_LADDER,
};

fn main() -> curvatur::error::Result<()> {
    println!("convention: {RIEMANN_CONVENTION}\n");
    let mut p = BTreeMap::new();
    p.insert("n".to_string(), "3".to_string());
    p.insert("lambda".to_string(), "1+0.3*x^2+0.2*y*z+0.1*z".to_string());
    p.insert("half".to_string(), "1".to_string());
    let chart = builtin("conformal", &p)?.chart()?;
    let x = [0.1, 0.2, -0.1];

    let r = riemann_at(&chart, &x)?;
    println!("symmetry residual {:.2e}", r.symmetry_residual());
    println!("second Bianchi residual {:.2e}", second_bianchi_residual(&chart, &x)?.relative);
    let (u, v) = ([1.0, 0.0, 0.0], [0.0, 1.0, 0.0]);
    let op = riemann_holonomy_oracle(&chart, &x, &u, &v, &HOLONOMY_LADDER)?;
    println!("R(∂x, ∂y) from Christoffel symbols:\n{:.6}", r.operator(&u, &v));
    println!("from holonomy (error {:.1e}):\n{:.6}", op.error, op.operator);
    println!("sectional curvature of the xy-plane {:.8}", sectional_at(&chart, &x, &u, &v)?);

    let ric = ricci_at(&chart, &x)?;
    let vo = ricci_volume_oracle(&chart, &x, &VOLUME_LADDER)?;
    println!("\nRicci from contraction:\n{:.6}", ric.rho);
    println!("from volume distortion (error {:.1e}):\n{:.6}", vo.error, vo.rho);
    println!("scalar curvature τ = {:.10}", ric.tau);
    Ok(())
}
