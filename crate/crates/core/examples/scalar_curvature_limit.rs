//! Scalar curvature as a limit: circumference and area of small geodesic
//! circles (2D) or area of geodesic spheres (3D), extrapolated to zero radius.

use curvatur::catalog::builtin_with;
use curvatur::intrinsic::{geodesic_circles, scalar_curvature_estimate, CircleConfig};

fn main() -> curvatur::error::Result<()> {
    let sphere = builtin_with("sphere", &[])?.chart()?;
    let radii = [0.25, 0.5, 1.0];
    for c in geodesic_circles(&sphere, &[1.2, 0.4], &radii, None, CircleConfig::default())? {
        println!(
            "sphere R = {:.2}: L = {:.12} (2π sin R = {:.12}), S = {:.12} (2π(1 − cos R) = {:.12})",
            c.radius,
            c.length,
            2.0 * std::f64::consts::PI * c.radius.sin(),
            c.area,
            2.0 * std::f64::consts::PI * (1.0 - c.radius.cos())
        );
    }
    let cases: [(&str, Vec<f64>); 5] = [
        ("plane", vec![0.0, 0.0]),
        ("sphere", vec![1.0, 2.0]),
        ("torus", vec![0.0, 0.0]),
        ("lobachevsky_halfplane", vec![0.0, 1.0]),
        ("s3_round", vec![0.1, 0.2, 0.0]),
    ];
    for (name, p) in cases {
        let chart = builtin_with(name, &[])?.chart()?;
        let sc = scalar_curvature_estimate(&chart, &p)?;
        println!("{name:>22}: τ = {:+.9} ± {:.1e}", sc.tau, sc.error);
    }
    Ok(())
}
