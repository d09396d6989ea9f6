//! Geodesics: great circles, Clairaut's invariant on a surface of
//! revolution, and distances by shooting.

use std::f64::consts::PI;

use curvatur::catalog::builtin_with;
use curvatur::intrinsic::{exp_map, geodesic_distance, geodesic_trace};

fn main() -> curvatur::error::Result<()> {
    let sphere = builtin_with("sphere", &[])?.chart()?;
    let start = [PI / 2.0, 0.0];
    let path = geodesic_trace(&sphere, &start, &[-0.5, 1.0], 2.0 * PI)?;
    let end = path.end();
    println!("sphere: after length 2π the geodesic is at {:?} (started at {start:?})", end.x);
    println!("        speed drift {:.2e} over {} samples", path.speed_drift, path.samples.len());
    println!("        exp of u = (1, 0) from (1, 0.5) lands at {:?}", exp_map(&sphere, &[1.0, 0.5], &[1.0, 0.0])?);

    let rev = builtin_with("revolution", &[])?.chart()?;
    let path = geodesic_trace(&rev, &[0.0, 0.3], &[0.2, 0.5], 50.0)?;
    let clairaut: Vec<f64> = path.samples.iter().map(|s| (2.0 + s.x[1].cos()).powi(2) * s.velocity[0]).collect();
    let spread = clairaut.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - clairaut.iter().cloned().fold(f64::INFINITY, f64::min);
    println!("revolution f = 2 + cos v: Clairaut invariant {:.12}, spread {spread:.2e}", clairaut[0]);

    let torus = builtin_with("torus", &[])?.chart()?;
    let d = geodesic_distance(&torus, &[0.0, 0.0], &[1.0, 1.5])?;
    println!(
        "torus: distance {:.12} ({} Newton steps, straight chart line {:.6})",
        d.distance, d.iterations, d.chart_line_length
    );
    Ok(())
}
