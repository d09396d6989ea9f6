//! Fundamental forms, principal curvatures, and the Euler and Meusnier
//! formulas on a torus.

use std::f64::consts::PI;

use curvatur::catalog::builtin_with;
use curvatur::surface::{forms_at, principal_at, section_curvature_by_slicing, shape_operator_at};

fn main() -> curvatur::error::Result<()> {
    let g = builtin_with("torus", &[("R", 2.0), ("r", 1.0)])?;
    let s = g.surface()?;
    for uv in [[0.0, 0.0], [0.0, PI / 2.0], [0.0, PI]] {
        let f = forms_at(s, uv)?;
        let p = principal_at(s, uv)?;
        let w = shape_operator_at(s, uv)?;
        println!("uv = {uv:?}");
        println!("  g = {:?}", f.g.as_slice());
        println!("  q = {:?}", f.q.as_slice());
        println!("  λ₊ = {:.12}, λ₋ = {:.12}, K = {:.12}, H = {:.12}", p.lambda_plus, p.lambda_minus, p.gaussian, p.mean);
        println!("  Weingarten routes differ by {:.2e}", w.discrepancy);
    }

    let uv = [0.3, 0.8];
    let p = principal_at(s, uv)?;
    println!("\nEuler: normal sections at uv = {uv:?}");
    for k in 0..6 {
        let phi = k as f64 * PI / 6.0;
        let euler = p.lambda_plus * phi.cos().powi(2) + p.lambda_minus * phi.sin().powi(2);
        let sliced = section_curvature_by_slicing(s, uv, phi, 0.0)?;
        println!("  φ = {phi:.4}: sliced {sliced:+.12}, formula {euler:+.12}");
    }
    println!("Meusnier: oblique sections at φ = 0");
    for theta in [0.2, 0.6, 1.0] {
        let k = section_curvature_by_slicing(s, uv, 0.0, theta)?;
        println!("  θ = {theta}: k cos θ = {:+.12}, k_n = {:+.12}", k * theta.cos(), p.lambda_plus);
    }
    Ok(())
}
