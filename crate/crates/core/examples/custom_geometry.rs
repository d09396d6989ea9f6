//! Geometry definitions written in the text format, parsed and analysed.
//! Pass a file path to analyse your own definitions.

use curvatur::catalog::{compile, parse_geometries, Shape};
use curvatur::curves::space_curvature_torsion;
use curvatur::intrinsic::scalar_curvature_estimate;
use curvatur::surface::principal_at;
use curvatur::tensors::ricci_at;

const DEFAULT: &str = "\
# a catenoid, a twisted cubic and a warped product metric
param a = 1.5
surface catenoid (u,v in [-1,1]x[0,6.283185307179586]) = (a*cosh(u/a)*cos(v), a*cosh(u/a)*sin(v), u)
curve cubic (t in [-1,1]) = (t, t^2, t^3)
metric warped (r,s in [0.5,2]x[-3,3]) = [[1,0],[0,exp(2*r)]]
";

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let text = match std::env::args().nth(1) {
        Some(path) => std::fs::read_to_string(path)?,
        None => DEFAULT.to_string(),
    };
    for spec in parse_geometries(&text)? {
        let g = compile(&spec)?;
        println!("{} {}:", spec.kind.keyword(), spec.name);
        for w in &g.warnings {
            println!("  warning: {w}");
        }
        let mid: Vec<f64> = spec.domain.iter().map(|(a, b)| 0.5 * (a + b)).collect();
        match &g.shape {
            Shape::Curve(c) => {
                let sc = space_curvature_torsion(c, mid[0])?;
                println!("  at t = {}: k = {:.10}, κ = {:?}", mid[0], sc.curvature, sc.torsion);
            }
            Shape::Surface(s) => {
                let p = principal_at(s, [mid[0], mid[1]])?;
                let tau = scalar_curvature_estimate(&g.chart()?, &mid)?.tau;
                println!("  at {mid:?}: K = {:.10}, H = {:.10}, τ (limit) = {tau:.8}", p.gaussian, p.mean);
            }
            Shape::Metric(m) => {
                let ric = ricci_at(m, &mid)?;
                println!("  at {mid:?}: τ = {:.10}", ric.tau);
            }
        }
    }
    Ok(())
}
