//! Parallel transport around closed loops: a sphere triangle with three
//! right angles, a cone parallel, and small loops against enclosed area.

use std::f64::consts::PI;

use curvatur::catalog::builtin_with;
use curvatur::intrinsic::{holonomy, parallel_transport, PathSegment};
use curvatur::verify::cone_holonomy_by_unrolling;

fn main() -> curvatur::error::Result<()> {
    // stereographic chart of the unit sphere: pole at the origin, equator on |x| = 1
    let s2 = builtin_with("conformal", &[])?.chart()?;
    let triangle = vec![
        PathSegment::line(&[0.0, 0.0], &[1.0, 0.0]),
        PathSegment::curve((0.0, PI / 2.0), |t| (vec![t.cos(), t.sin()], vec![-t.sin(), t.cos()])),
        PathSegment::line(&[0.0, 1.0], &[0.0, 0.0]),
    ];
    let h = holonomy(&s2, &triangle)?;
    println!("sphere octant: rotation {:.10} (π/2 = {:.10})", h.angle.unwrap(), PI / 2.0);

    let (_, end) = parallel_transport(&s2, &triangle, &[0.5, 0.0])?;
    println!("  vector (0.5, 0) comes back as ({:.10}, {:.10})", end[0], end[1]);

    let cone = builtin_with("cone", &[("k", 1.0)])?.chart()?;
    let h = holonomy(&cone, &[PathSegment::line(&[2.0 * PI, 1.0], &[0.0, 1.0])])?;
    println!(
        "cone k = 1: rotation {:.10}, unrolling {:.10}, 2π − π√2 = {:.10}",
        h.angle.unwrap(),
        cone_holonomy_by_unrolling(1.0, 1.0),
        2.0 * PI - PI * 2f64.sqrt()
    );

    let sphere = builtin_with("sphere", &[])?.chart()?;
    for theta in [0.3, 0.8, 1.0] {
        let h = holonomy(&sphere, &[PathSegment::line(&[theta, 0.0], &[theta, 2.0 * PI])])?;
        println!(
            "sphere parallel θ = {theta}: rotation {:+.10}, cap area 2π(1 − cos θ) = {:.10}",
            h.angle.unwrap(),
            2.0 * PI * (1.0 - theta.cos())
        );
    }
    Ok(())
}
