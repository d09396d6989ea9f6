//! Curvature, torsion and Frenet frames of a helix, then a curve rebuilt
//! from prescribed curvature and torsion.

use std::sync::Arc;

use curvatur::catalog::builtin_with;
use curvatur::curves::{arc_length, frenet_frame, reconstruct_space_curve, space_curvature_torsion};

fn main() -> curvatur::error::Result<()> {
    let (r, w, v) = (1.5, 2.0, 0.7);
    let helix = builtin_with("helix", &[("r", r), ("omega", w), ("v", v)])?;
    let c = helix.curve()?;
    let (a, b) = c.domain();
    println!("helix r={r} ω={w} v={v}, length {:.6}", arc_length(c, a, b)?);
    println!("expected curvature {:.12}", r * w * w / (r * r * w * w + v * v));
    println!("expected torsion   {:.12}", v * w / (r * r * w * w + v * v));
    for t in [0.5, 2.0, 5.0] {
        let f = frenet_frame(c, t)?;
        println!(
            "t={t:4}: k={:.12} κ={:.12} T={:.4?} N={:.4?}",
            f.curvature,
            f.torsion.unwrap_or(0.0),
            f.tangent.as_slice(),
            f.normal.as_slice()
        );
    }

    let kbar = Arc::new(|s: &curvatur::numkit::Jet| s.sin() * 0.3 + 1.0);
    let tbar = Arc::new(|s: &curvatur::numkit::Jet| *s * 0.1);
    let rebuilt = reconstruct_space_curve(kbar, tbar, 8.0)?;
    println!("\nreconstructed from k(s) = 1 + 0.3 sin s, κ(s) = 0.1 s:");
    for s in [1.0, 4.0, 7.0] {
        let sc = space_curvature_torsion(&rebuilt, s)?;
        println!(
            "s={s}: k={:.10} (want {:.10}), κ={:.10} (want {:.10})",
            sc.curvature,
            1.0 + 0.3 * f64::sin(s),
            sc.torsion.unwrap_or(0.0),
            0.1 * s
        );
    }
    Ok(())
}
