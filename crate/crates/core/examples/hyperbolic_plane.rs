//! The Lobachevsky plane: closed-form distance against geodesic shooting,
//! the hyperbolic Pythagorean theorem, and circle lengths.

use curvatur::catalog::{builtin_with, geodesic_through, hyperbolic_distance, hyperboloid_distance, hyperboloid_to_halfplane, right_triangle};
use curvatur::intrinsic::{geodesic_circles, geodesic_distance, CircleConfig};
use num_complex::Complex64;

fn main() -> curvatur::error::Result<()> {
    let h = builtin_with("lobachevsky_halfplane", &[])?.chart()?;
    let (z1, z2) = (Complex64::new(-1.0, 0.5), Complex64::new(1.5, 2.0));
    let closed = hyperbolic_distance(z1, z2)?;
    let shot = geodesic_distance(&h, &[z1.re, z1.im], &[z2.re, z2.im])?;
    println!("d({z1}, {z2}) = {closed:.12} closed form, {:.12} by shooting", shot.distance);
    println!("geodesic through them: {:?}", geodesic_through(z1, z2)?);

    let (a, b) = (0.8, 1.3);
    let [c, pa, pb] = right_triangle(a, b);
    let hyp = hyperbolic_distance(pa, pb)?;
    println!(
        "right triangle legs {a}, {b}: ch c = {:.12}, ch a ch b = {:.12}",
        hyp.cosh(),
        hyperbolic_distance(c, pa)?.cosh() * hyperbolic_distance(c, pb)?.cosh()
    );

    let (p, q) = ([0.3, -0.4], [1.2, 0.7]);
    let via_halfplane = hyperbolic_distance(hyperboloid_to_halfplane(p[0], p[1]), hyperboloid_to_halfplane(q[0], q[1]))?;
    println!("hyperboloid distance {:.12}, through the half-plane {via_halfplane:.12}", hyperboloid_distance(p, q));

    for c in geodesic_circles(&h, &[0.0, 1.0], &[0.5, 1.0, 1.5], None, CircleConfig::default())? {
        println!("circle R = {}: length {:.10}, 2π sh R = {:.10}", c.radius, c.length, 2.0 * std::f64::consts::PI * c.radius.sinh());
    }
    Ok(())
}
