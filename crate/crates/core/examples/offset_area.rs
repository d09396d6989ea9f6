//! Total mean and Gaussian curvature from the area of parallel surfaces,
//! compared with direct integrals.

use std::f64::consts::PI;

use curvatur::catalog::builtin_with;
use curvatur::surface::{gauss_map_signed_area_over, total_curvatures_over};

fn main() -> curvatur::error::Result<()> {
    let cases = [
        ("sphere", vec![], [(0.0, PI), (0.0, 2.0 * PI)]),
        ("torus", vec![], [(0.0, 2.0 * PI), (0.0, 2.0 * PI)]),
        ("cylinder", vec![("v0", -1.0), ("v1", 1.0)], [(0.0, 2.0 * PI), (-1.0, 1.0)]),
        ("saddle", vec![], [(-0.5, 0.5), (-0.5, 0.5)]),
    ];
    for (name, params, rect) in cases {
        let g = builtin_with(name, &params)?;
        let s = g.surface()?;
        let t = total_curvatures_over(s, rect)?;
        println!("{name}:");
        println!("  direct   S = {:.10}  H_total = {:.10}  K_total = {:.10}", t.area, t.mean_total, t.gauss_total);
        println!("  offsets  S = {:.10}  H_total = {:.10}  K_total = {:.10}", t.fit[0], t.fit[1], t.fit[2]);
        println!("  Gauss-image signed area {:.10}", gauss_map_signed_area_over(s, rect)?);
    }
    Ok(())
}
