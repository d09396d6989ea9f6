//! Curvature tensors and covariant calculus on metric charts.
//!
//! Sign convention: `R(u,v)w = ∇_u∇_v w − ∇_v∇_u w − ∇_[u,v] w`, so that on
//! the unit sphere `R(u,v)w = u(v·w) − v(u·w)` and sectional curvature is
//! `g(R(u,v)v, u) / |u∧v|²`. Components: `R(∂_k,∂_l)∂_j = R^i_jkl ∂_i`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{GeomError, Result};
use crate::intrinsic::{
    christoffel_from_metric, exp_polygon_loop, exp_with_jacobi, holonomy, ser_matrix, MetricChart,
};
use crate::numkit::{gauss_legendre_on, g_dot, local_then_compose, orthonormal_frame, quadrature, richardson, ExtrapolationLadder, Jet};

pub const RIEMANN_CONVENTION: &str = "R(u,v)w = ∇_u∇_v w − ∇_v∇_u w − ∇_[u,v] w; R^i_jkl ∂_i = R(∂_k,∂_l)∂_j";

#[derive(Debug, Clone, Serialize)]
pub struct RiemannAt {
    pub point: Vec<f64>,
    pub dim: usize,
    /// `R^i_jkl` at index `((i·n + j)·n + k)·n + l`.
    pub up: Vec<f64>,
    /// `R_ijkl = g_im R^m_jkl`.
    pub low: Vec<f64>,
    pub convention: &'static str,
}

impl RiemannAt {
    fn idx(&self, i: usize, j: usize, k: usize, l: usize) -> usize {
        let n = self.dim;
        ((i * n + j) * n + k) * n + l
    }

    pub fn up(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        self.up[self.idx(i, j, k, l)]
    }

    pub fn low(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        self.low[self.idx(i, j, k, l)]
    }

    /// `R(u,v)w`.
    pub fn apply(&self, u: &[f64], v: &[f64], w: &[f64]) -> Vec<f64> {
        let n = self.dim;
        (0..n)
            .map(|i| {
                let mut s = 0.0;
                for j in 0..n {
                    for k in 0..n {
                        for l in 0..n {
                            s += self.up(i, j, k, l) * w[j] * u[k] * v[l];
                        }
                    }
                }
                s
            })
            .collect()
    }

    /// Operator `R(u,v)` as a matrix acting on coordinates.
    pub fn operator(&self, u: &[f64], v: &[f64]) -> DMatrix<f64> {
        let n = self.dim;
        DMatrix::from_fn(n, n, |i, j| {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            self.apply(u, v, &e)[i]
        })
    }

    /// Largest violation of antisymmetry in each index pair, pair symmetry
    /// and the first Bianchi identity, relative to `max(1, max |R_ijkl|)`.
    pub fn symmetry_residual(&self) -> f64 {
        let n = self.dim;
        let scale = self.low.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(1.0);
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let r = self.low(i, j, k, l);
                        worst = worst
                            .max((r + self.low(j, i, k, l)).abs())
                            .max((r + self.low(i, j, l, k)).abs())
                            .max((r - self.low(k, l, i, j)).abs())
                            .max((self.up(i, j, k, l) + self.up(i, k, l, j) + self.up(i, l, j, k)).abs());
                    }
                }
            }
        }
        worst / scale
    }
}

fn riemann_from_christoffel(gam: &[Jet], n: usize) -> Vec<f64> {
    let g = |k: usize, i: usize, j: usize| &gam[k * n * n + i * n + j];
    let mut up = vec![0.0; n * n * n * n];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    let mut r = g(i, l, j).partial(&[k]) - g(i, k, j).partial(&[l]);
                    for m in 0..n {
                        r += g(i, k, m).value() * g(m, l, j).value() - g(i, l, m).value() * g(m, k, j).value();
                    }
                    up[((i * n + j) * n + k) * n + l] = r;
                }
            }
        }
    }
    up
}

pub fn riemann_at(chart: &MetricChart, x: &[f64]) -> Result<RiemannAt> {
    if !chart.contains(x) {
        return Err(GeomError::DomainExit { t: 0.0, state: x.to_vec() });
    }
    let n = chart.dim();
    let gam = chart.christoffel_jets_at(x, 1)?;
    let up = riemann_from_christoffel(&gam, n);
    let g = chart.metric_at(x);
    let mut low = vec![0.0; up.len()];
    for i in 0..n {
        for rest in 0..n * n * n {
            low[i * n * n * n + rest] = (0..n).map(|m| g[(i, m)] * up[m * n * n * n + rest]).sum();
        }
    }
    Ok(RiemannAt {
        point: x.to_vec(),
        dim: n,
        up,
        low,
        convention: RIEMANN_CONVENTION,
    })
}

fn independent(g: &DMatrix<f64>, u: &[f64], v: &[f64]) -> (bool, f64) {
    let area2 = g_dot(g, u, u) * g_dot(g, v, v) - g_dot(g, u, v).powi(2);
    let scale = g_dot(g, u, u) * g_dot(g, v, v);
    (area2 > 1e-14 * scale && scale > 0.0, area2)
}

/// `σ = g(R(u,v)v, u) / (g(u,u)g(v,v) − g(u,v)²)`.
pub fn sectional_at(chart: &MetricChart, x: &[f64], u: &[f64], v: &[f64]) -> Result<f64> {
    let r = riemann_at(chart, x)?;
    let g = chart.metric_at(x);
    let (ok, area2) = independent(&g, u, v);
    if !ok {
        return Err(GeomError::Precondition("u and v are linearly dependent".into()));
    }
    Ok(g_dot(&g, &r.apply(u, v, v), u) / area2)
}

#[derive(Debug, Clone, Serialize)]
pub struct RicciAt {
    pub point: Vec<f64>,
    /// `ρ_ij = ρ(∂_i, ∂_j)`.
    #[serde(serialize_with = "ser_matrix")]
    pub rho: DMatrix<f64>,
    /// `ρ̃ = g⁻¹ρ`.
    #[serde(serialize_with = "ser_matrix")]
    pub operator: DMatrix<f64>,
    pub tau: f64,
}

impl RicciAt {
    pub fn form(&self, u: &[f64], v: &[f64]) -> f64 {
        g_dot(&self.rho, u, v)
    }

    pub fn apply_operator(&self, u: &[f64]) -> Vec<f64> {
        (&self.operator * DVector::from_column_slice(u)).as_slice().to_vec()
    }
}

/// `ρ(u,v) = Σ_i g(R(e_i,u)v, e_i)` over a `g`-orthonormal basis.
pub fn ricci_at(chart: &MetricChart, x: &[f64]) -> Result<RicciAt> {
    let r = riemann_at(chart, x)?;
    let n = chart.dim();
    let g = chart.metric_at(x);
    let e = orthonormal_frame(&g)?;
    let basis: Vec<Vec<f64>> = (0..n).map(|c| e.column(c).iter().copied().collect()).collect();
    let mut rho: DMatrix<f64> = DMatrix::zeros(n, n);
    for a in 0..n {
        for b in 0..n {
            let mut ua = vec![0.0; n];
            let mut vb = vec![0.0; n];
            ua[a] = 1.0;
            vb[b] = 1.0;
            rho[(a, b)] = basis.iter().map(|ei| g_dot(&g, &r.apply(ei, &ua, &vb), ei)).sum();
        }
    }
    let rho: DMatrix<f64> = (&rho + rho.transpose()) * 0.5;
    let ginv: DMatrix<f64> = g.clone().try_inverse().ok_or_else(|| GeomError::Precondition("singular metric".into()))?;
    let operator = &ginv * &rho;
    let tau = operator.trace();
    Ok(RicciAt {
        point: x.to_vec(),
        rho,
        operator,
        tau,
    })
}

/// Orientation of `∂(hA_{u,v})` turns a ccw loop's rotation into `−h²R(u,v)`;
/// frozen once by the unit sphere, where `g(R(u,v)v,u) = +|u∧v|²`.
pub const HOLONOMY_SIGN: f64 = -1.0;

pub const HOLONOMY_LADDER: [f64; 3] = [0.1, 0.05, 0.025];

#[derive(Debug, Clone, Serialize)]
pub struct HolonomyOperator {
    #[serde(serialize_with = "ser_matrix")]
    pub operator: DMatrix<f64>,
    pub error: f64,
    pub non_monotone: bool,
    pub ladder: Vec<f64>,
}

/// `R(u,v)` from `σ(hA_{u,v}) = E + h²R(u,v) + o(h²)`: parallel transport
/// around the exp-image of the parallelogram spanned by `hu`, `hv`,
/// starting along `u`, Richardson-extrapolated in `h` (error order 1).
pub fn riemann_holonomy_oracle(
    chart: &MetricChart,
    x: &[f64],
    u: &[f64],
    v: &[f64],
    ladder: &[f64],
) -> Result<HolonomyOperator> {
    let n = chart.dim();
    let g = chart.metric_at(x);
    if !independent(&g, u, v).0 {
        return Ok(HolonomyOperator {
            operator: DMatrix::zeros(n, n),
            error: 0.0,
            non_monotone: false,
            ladder: ladder.to_vec(),
        });
    }
    let samples: Vec<DMatrix<f64>> = ladder
        .par_iter()
        .map(|&h| -> Result<DMatrix<f64>> {
            let hu: Vec<f64> = u.iter().map(|c| h * c).collect();
            let huv: Vec<f64> = u.iter().zip(v).map(|(a, b)| h * (a + b)).collect();
            let hv: Vec<f64> = v.iter().map(|c| h * c).collect();
            let segs = exp_polygon_loop(chart, x, &[hu, huv, hv]);
            let hol = holonomy(chart, &segs)?;
            Ok((hol.matrix - DMatrix::identity(n, n)) * (HOLONOMY_SIGN / (h * h)))
        })
        .collect::<Result<_>>()?;
    let mut operator = DMatrix::zeros(n, n);
    let mut error = 0.0f64;
    let mut non_monotone = false;
    for i in 0..n {
        for j in 0..n {
            let l = ExtrapolationLadder::new(ladder.to_vec(), samples.iter().map(|m| m[(i, j)]).collect(), 1)?;
            let e = richardson(&l);
            operator[(i, j)] = e.value;
            error = error.max(e.error);
            non_monotone |= e.non_monotone;
        }
    }
    Ok(HolonomyOperator {
        operator,
        error,
        non_monotone,
        ladder: ladder.to_vec(),
    })
}

pub const VOLUME_LADDER: [f64; 3] = [0.2, 0.1, 0.05];

#[derive(Debug, Clone, Serialize)]
pub struct VolumeOracle {
    #[serde(serialize_with = "ser_matrix")]
    pub rho: DMatrix<f64>,
    pub error: f64,
    /// Condition number of the moment system.
    pub condition: f64,
    pub ill_conditioned: bool,
    pub non_monotone: bool,
    pub ladder: Vec<f64>,
}

/// Unit directions used as cube diagonals.
fn design_directions(n: usize) -> Vec<Vec<f64>> {
    let raw: Vec<Vec<f64>> = if n == 2 {
        (0..6).map(|k| {
            let a = std::f64::consts::PI * k as f64 / 6.0;
            vec![a.cos(), a.sin()]
        })
        .collect()
    } else {
        vec![
            vec![1.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0],
            vec![1.0, 1.0, 0.0],
            vec![1.0, 0.0, 1.0],
            vec![0.0, 1.0, 1.0],
            vec![1.0, -1.0, 0.0],
            vec![1.0, 0.0, -1.0],
            vec![0.0, 1.0, -1.0],
            vec![1.0, 1.0, 1.0],
        ]
    };
    raw.into_iter()
        .map(|d| {
            let l = d.iter().map(|c| c * c).sum::<f64>().sqrt();
            d.iter().map(|c| c / l).collect()
        })
        .collect()
}

/// Orthogonal matrix (a reflection) taking `(1,…,1)/√n` to `d`.
fn frame_with_diagonal(d: &[f64]) -> DMatrix<f64> {
    let n = d.len();
    let s = 1.0 / (n as f64).sqrt();
    let w: Vec<f64> = d.iter().map(|c| s - c).collect();
    let ww: f64 = w.iter().map(|c| c * c).sum();
    let mut h = DMatrix::identity(n, n);
    if ww > 1e-28 {
        for i in 0..n {
            for j in 0..n {
                h[(i, j)] -= 2.0 * w[i] * w[j] / ww;
            }
        }
    }
    h
}

/// Ricci form from `V(exp(hA)) = hⁿ − h^{n+2}/6 ∫_A ρ(u,u) du + O(h^{n+3})`.
///
/// `A` ranges over unit cubes at `P` whose diagonals point along design
/// directions; `∫_A ρ(u,u) du = tr ρ/12 + (n/4) ρ(d,d)` for unit diagonal
/// direction `d`, and the resulting linear system is solved by least squares.
pub fn ricci_volume_oracle(chart: &MetricChart, p: &[f64], ladder: &[f64]) -> Result<VolumeOracle> {
    let n = chart.dim();
    let g0 = chart.metric_at(p);
    let e = orthonormal_frame(&g0)?;
    let nodes = gauss_legendre_on(6, 0.0, 1.0);
    let mut grid: Vec<(Vec<f64>, f64)> = vec![(Vec::new(), 1.0)];
    for _ in 0..n {
        grid = grid
            .iter()
            .flat_map(|(y, w)| {
                nodes.iter().map(move |(x, wx)| {
                    let mut y = y.clone();
                    y.push(*x);
                    (y, w * wx)
                })
            })
            .collect();
    }
    let dirs = design_directions(n);
    let mut rhs = Vec::new();
    let mut err = 0.0f64;
    let mut non_monotone = false;
    for d in &dirs {
        let ef = &e * frame_with_diagonal(d);
        let samples: Vec<f64> = ladder
            .iter()
            .map(|&h| -> Result<f64> {
                let ratio: f64 = grid
                    .par_iter()
                    .map(|(y, w)| -> Result<f64> {
                        let u = &ef * DVector::from_column_slice(y) * h;
                        let (x, j) = exp_with_jacobi(chart, p, u.as_slice(), &ef)?;
                        let g = chart.metric_at(&x);
                        Ok(w * g.determinant().sqrt() * j.determinant().abs())
                    })
                    .collect::<Result<Vec<f64>>>()?
                    .iter()
                    .sum();
                Ok(6.0 * (1.0 - ratio) / (h * h))
            })
            .collect::<Result<_>>()?;
        let l = ExtrapolationLadder::new(ladder.to_vec(), samples, 1)?;
        let r = richardson(&l);
        err = err.max(r.error);
        non_monotone |= r.non_monotone;
        rhs.push(r.value);
    }
    // unknowns: ρ'_ij (i ≤ j) in the orthonormal frame
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).collect();
    let a = DMatrix::from_fn(dirs.len(), pairs.len(), |r, c| {
        let (i, j) = pairs[c];
        let d = &dirs[r];
        if i == j {
            1.0 / 12.0 + n as f64 / 4.0 * d[i] * d[i]
        } else {
            n as f64 / 4.0 * 2.0 * d[i] * d[j]
        }
    });
    let svd = a.clone().svd(true, true);
    let sv = &svd.singular_values;
    let condition = sv.max() / sv.min();
    let sol = svd
        .solve(&DVector::from_vec(rhs), 1e-14)
        .map_err(|e| GeomError::Precondition(e.to_string()))?;
    let mut rho_on = DMatrix::zeros(n, n);
    for (c, &(i, j)) in pairs.iter().enumerate() {
        rho_on[(i, j)] = sol[c];
        rho_on[(j, i)] = sol[c];
    }
    let einv = e.try_inverse().expect("frame invertible");
    let rho = einv.transpose() * rho_on * einv;
    Ok(VolumeOracle {
        rho,
        error: err / sv.min(),
        condition,
        ill_conditioned: condition > 1e8,
        non_monotone,
        ladder: ladder.to_vec(),
    })
}

pub const BIANCHI_STEP: f64 = 1e-3;

#[derive(Debug, Clone, Copy, Serialize)]
pub struct BianchiResidual {
    pub absolute: f64,
    /// `absolute / (max |R^i_jkl| + 1e-8)`.
    pub relative: f64,
}

/// `max |∇_m R^i_jkl + ∇_k R^i_jlm + ∇_l R^i_jmk|` with `∂R` from central
/// differences of [`riemann_at`] (step `1e-3`).
pub fn second_bianchi_residual(chart: &MetricChart, x: &[f64]) -> Result<BianchiResidual> {
    let n = chart.dim();
    let r0 = riemann_at(chart, x)?;
    let gam = chart.christoffel_jets_at(x, 0)?;
    let gm = |k: usize, i: usize, j: usize| gam[k * n * n + i * n + j].value();
    let h = BIANCHI_STEP;
    let mut dr = Vec::with_capacity(n);
    for m in 0..n {
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[m] += h;
        xm[m] -= h;
        let rp = riemann_at(chart, &xp)?;
        let rm = riemann_at(chart, &xm)?;
        dr.push(rp.up.iter().zip(&rm.up).map(|(a, b)| (a - b) / (2.0 * h)).collect::<Vec<f64>>());
    }
    let idx = |i: usize, j: usize, k: usize, l: usize| ((i * n + j) * n + k) * n + l;
    let r = |i: usize, j: usize, k: usize, l: usize| r0.up[idx(i, j, k, l)];
    let nabla = |m: usize, i: usize, j: usize, k: usize, l: usize| -> f64 {
        let mut s = dr[m][idx(i, j, k, l)];
        for p in 0..n {
            s += gm(i, m, p) * r(p, j, k, l) - gm(p, m, j) * r(i, p, k, l) - gm(p, m, k) * r(i, j, p, l)
                - gm(p, m, l) * r(i, j, k, p);
        }
        s
    };
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    for m in 0..n {
                        let c = nabla(m, i, j, k, l) + nabla(k, i, j, l, m) + nabla(l, i, j, m, k);
                        worst = worst.max(c.abs());
                    }
                }
            }
        }
    }
    let scale = r0.up.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    Ok(BianchiResidual {
        absolute: worst,
        relative: worst / (scale + 1e-8),
    })
}

// ---------------------------------------------------------------------------
// fields

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum FieldKind {
    Scalar,
    Vector,
    Covector,
    /// Row-major `ω_ij`.
    Bilinear,
}

pub type FieldFn = Arc<dyn Fn(&[Jet]) -> Vec<Jet> + Send + Sync>;

/// A tensor field on a chart, given by a jet evaluator of its components.
#[derive(Clone)]
pub struct Field {
    pub kind: FieldKind,
    pub dim: usize,
    eval: FieldFn,
}

impl std::fmt::Debug for Field {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Field").field("kind", &self.kind).field("dim", &self.dim).finish()
    }
}

pub fn component_count(kind: FieldKind, n: usize) -> usize {
    match kind {
        FieldKind::Scalar => 1,
        FieldKind::Vector | FieldKind::Covector => n,
        FieldKind::Bilinear => n * n,
    }
}

impl Field {
    pub fn new<F>(kind: FieldKind, dim: usize, f: F) -> Field
    where
        F: Fn(&[Jet]) -> Vec<Jet> + Send + Sync + 'static,
    {
        Field {
            kind,
            dim,
            eval: Arc::new(f),
        }
    }

    pub fn components(&self) -> usize {
        component_count(self.kind, self.dim)
    }

    pub fn eval_jets(&self, x: &[Jet]) -> Vec<Jet> {
        let out = (self.eval)(x);
        debug_assert_eq!(out.len(), self.components());
        out
    }

    pub fn at(&self, x: &[f64]) -> Vec<f64> {
        let vars: Vec<Jet> = x.iter().map(|&v| Jet::constant(v, x.len(), 0)).collect();
        self.eval_jets(&vars).iter().map(|j| j.value()).collect()
    }

    /// The metric `g` as a bilinear field.
    pub fn metric(chart: &MetricChart) -> Field {
        let c = chart.clone();
        Field::new(FieldKind::Bilinear, chart.dim(), move |x| c.metric_jets(x))
    }

    /// Constant coordinate vector field `∂_i`.
    pub fn coordinate(dim: usize, i: usize) -> Field {
        Field::new(FieldKind::Vector, dim, move |x| (0..dim).map(|k| x[0].lift(if k == i { 1.0 } else { 0.0 })).collect())
    }

    /// `f · self` for a scalar field `f`.
    pub fn scaled_by(&self, f: &Field) -> Field {
        assert_eq!(f.kind, FieldKind::Scalar);
        let (a, b) = (self.clone(), f.clone());
        Field::new(self.kind, self.dim, move |x| {
            let s = b.eval_jets(x)[0];
            a.eval_jets(x).into_iter().map(|c| c * s).collect()
        })
    }

    pub fn check_chart(&self, chart: &MetricChart) -> Result<()> {
        if self.dim != chart.dim() {
            return Err(GeomError::Precondition(format!(
                "field lives on a {}-dimensional chart, chart has dimension {}",
                self.dim,
                chart.dim()
            )));
        }
        Ok(())
    }
}

/// `g(v, w)` as a scalar field.
pub fn pairing(chart: &MetricChart, v: &Field, w: &Field) -> Field {
    let (c, v, w) = (chart.clone(), v.clone(), w.clone());
    let n = chart.dim();
    Field::new(FieldKind::Scalar, n, move |x| {
        let g = c.metric_jets(x);
        let (a, b) = (v.eval_jets(x), w.eval_jets(x));
        let mut s = x[0].lift(0.0);
        for i in 0..n {
            for j in 0..n {
                s += g[i * n + j] * a[i] * b[j];
            }
        }
        vec![s]
    })
}

/// Components of `∇_u field` from jets: `field`'s components at order `o+1`,
/// `Γ` and `u` at order `o`.
fn nabla_components(kind: FieldKind, n: usize, f: &[Jet], gam: &[Jet], u: &[Jet]) -> Vec<Jet> {
    let order = gam[0].order();
    let gm = |k: usize, i: usize, j: usize| gam[k * n * n + i * n + j];
    // directional derivative of every component
    let d: Vec<Jet> = f
        .iter()
        .map(|c| {
            let mut s = u[0].lift(0.0);
            for (j, uj) in u.iter().enumerate() {
                s += c.derivative(j).truncate(order) * *uj;
            }
            s
        })
        .collect();
    let fv: Vec<Jet> = f.iter().map(|c| c.truncate(order)).collect();
    match kind {
        FieldKind::Scalar => d,
        FieldKind::Vector => (0..n)
            .map(|i| {
                let mut s = d[i];
                for j in 0..n {
                    for k in 0..n {
                        s += gm(i, j, k) * u[j] * fv[k];
                    }
                }
                s
            })
            .collect(),
        FieldKind::Covector => (0..n)
            .map(|i| {
                let mut s = d[i];
                for j in 0..n {
                    for k in 0..n {
                        s -= gm(k, j, i) * u[j] * fv[k];
                    }
                }
                s
            })
            .collect(),
        FieldKind::Bilinear => (0..n * n)
            .map(|ab| {
                let (a, b) = (ab / n, ab % n);
                let mut s = d[ab];
                for j in 0..n {
                    for k in 0..n {
                        s -= gm(k, j, a) * u[j] * fv[k * n + b] + gm(k, j, b) * u[j] * fv[a * n + k];
                    }
                }
                s
            })
            .collect(),
    }
}

/// `∇_u field` at `x` for a constant tangent vector `u`.
pub fn covariant_derivative(chart: &MetricChart, field: &Field, x: &[f64], u: &[f64]) -> Result<Vec<f64>> {
    field.check_chart(chart)?;
    if !chart.contains(x) {
        return Err(GeomError::DomainExit { t: 0.0, state: x.to_vec() });
    }
    let n = chart.dim();
    let vars = Jet::variables(x, 1);
    let f = field.eval_jets(&vars);
    let gam = chart.christoffel_jets_at(x, 0)?;
    let uj: Vec<Jet> = u.iter().map(|&c| Jet::constant(c, n, 0)).collect();
    Ok(nabla_components(field.kind, n, &f, &gam, &uj).iter().map(|j| j.value()).collect())
}

/// The field `∇_u w` for a vector field `u`.
pub fn nabla_field(chart: &MetricChart, u: &Field, w: &Field) -> Result<Field> {
    u.check_chart(chart)?;
    w.check_chart(chart)?;
    if u.kind != FieldKind::Vector {
        return Err(GeomError::Precondition("direction field must be a vector field".into()));
    }
    let (c, u, w) = (chart.clone(), u.clone(), w.clone());
    let n = chart.dim();
    let kind = w.kind;
    Ok(Field::new(kind, n, move |x| {
        local_then_compose(x, 1, |loc| {
            let g = c.metric_jets(loc);
            let gam = match christoffel_from_metric(&g, n) {
                Ok(gm) => gm,
                Err(_) => return vec![loc[0].lift(f64::NAN); component_count(kind, n)],
            };
            let order = gam[0].order();
            let uj: Vec<Jet> = u.eval_jets(loc).iter().map(|j| j.truncate(order)).collect();
            nabla_components(kind, n, &w.eval_jets(loc), &gam, &uj)
        })
    }))
}

/// `[u,v]^i = Σ_j (u^j ∂_j v^i − v^j ∂_j u^i)`.
pub fn commutator(chart: &MetricChart, u: &Field, v: &Field) -> Result<Field> {
    u.check_chart(chart)?;
    v.check_chart(chart)?;
    if u.kind != FieldKind::Vector || v.kind != FieldKind::Vector {
        return Err(GeomError::Precondition("commutator needs two vector fields".into()));
    }
    let (u, v) = (u.clone(), v.clone());
    let n = chart.dim();
    Ok(Field::new(FieldKind::Vector, n, move |x| {
        local_then_compose(x, 1, |loc| {
            let a = u.eval_jets(loc);
            let b = v.eval_jets(loc);
            let o = loc[0].order() - 1;
            (0..n)
                .map(|i| {
                    let mut s = loc[0].lift(0.0).truncate(o);
                    for j in 0..n {
                        s += a[j].truncate(o) * b[i].derivative(j) - b[j].truncate(o) * a[i].derivative(j);
                    }
                    s
                })
                .collect()
        })
    }))
}

/// `(dφ)_ij = ∂_i φ_j − ∂_j φ_i`.
pub fn exterior_derivative(chart: &MetricChart, phi: &Field) -> Result<Field> {
    phi.check_chart(chart)?;
    if phi.kind != FieldKind::Covector {
        return Err(GeomError::Precondition("exterior derivative needs a covector field".into()));
    }
    let phi = phi.clone();
    let n = chart.dim();
    Ok(Field::new(FieldKind::Bilinear, n, move |x| {
        local_then_compose(x, 1, |loc| {
            let f = phi.eval_jets(loc);
            (0..n * n)
                .map(|ij| {
                    let (i, j) = (ij / n, ij % n);
                    f[j].derivative(i) - f[i].derivative(j)
                })
                .collect()
        })
    }))
}

/// `Alt(∇φ)_ij = (∇_{∂_i}φ)_j − (∇_{∂_j}φ)_i`, with the Christoffel terms kept.
pub fn alt_nabla(chart: &MetricChart, phi: &Field, x: &[f64]) -> Result<DMatrix<f64>> {
    let n = chart.dim();
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut e = vec![0.0; n];
            e[i] = 1.0;
            covariant_derivative(chart, phi, x, &e)
        })
        .collect::<Result<_>>()?;
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j] - rows[j][i]))
}

/// `∇_u v` by differentiating the ambient field `v^i r_i` along `u` and
/// projecting onto the tangent plane (pullback charts only).
pub fn covariant_derivative_embedded(chart: &MetricChart, field: &Field, uv: &[f64], u: &[f64]) -> Result<Vec<f64>> {
    let surface = chart
        .surface()
        .ok_or_else(|| GeomError::Precondition("chart is not a pullback of an immersed patch".into()))?;
    if field.kind != FieldKind::Vector {
        return Err(GeomError::Precondition("embedded route is for vector fields".into()));
    }
    let vars = Jet::variables(uv, 2);
    let r = surface.eval_jet(&vars[0], &vars[1]);
    let comps: Vec<Jet> = field.eval_jets(&vars).iter().map(|c| c.truncate(1)).collect();
    let basis: Vec<[Jet; 3]> = (0..2).map(|k| [r[0].derivative(k), r[1].derivative(k), r[2].derivative(k)]).collect();
    // ambient V = v^k r_k, then dV(u)
    let amb: Vec<Jet> = (0..3).map(|a| comps[0] * basis[0][a] + comps[1] * basis[1][a]).collect();
    let dv: Vec<f64> = amb.iter().map(|c| c.partial(&[0]) * u[0] + c.partial(&[1]) * u[1]).collect();
    let rb: Vec<Vec<f64>> = basis.iter().map(|b| b.iter().map(|c| c.value()).collect()).collect();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let g = nalgebra::Matrix2::new(dot(&rb[0], &rb[0]), dot(&rb[0], &rb[1]), dot(&rb[1], &rb[0]), dot(&rb[1], &rb[1]));
    let rhs = nalgebra::Vector2::new(dot(&rb[0], &dv), dot(&rb[1], &dv));
    let c = g.try_inverse().ok_or_else(|| GeomError::Precondition("degenerate first form".into()))? * rhs;
    Ok(vec![c[0], c[1]])
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Integrability {
    /// `max |dφ|` on a grid of the box.
    pub closedness: f64,
    /// Largest disagreement between line integrals of `φ` along different
    /// edge paths between opposite corners of the box and its sub-boxes.
    pub path_spread: f64,
}

/// Closedness versus path independence of `∫ φ` on a coordinate box.
pub fn integrability_on_box(chart: &MetricChart, phi: &Field, bounds: &[(f64, f64)]) -> Result<Integrability> {
    let n = chart.dim();
    let d = exterior_derivative(chart, phi)?;
    let mut closedness = 0.0f64;
    let grid = 5;
    let mut idx = vec![0usize; n];
    loop {
        let x: Vec<f64> = (0..n)
            .map(|k| bounds[k].0 + (bounds[k].1 - bounds[k].0) * idx[k] as f64 / (grid - 1) as f64)
            .collect();
        closedness = closedness.max(d.at(&x).iter().fold(0.0f64, |m, v| m.max(v.abs())));
        let mut k = 0;
        while k < n {
            idx[k] += 1;
            if idx[k] < grid {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
        if k == n {
            break;
        }
    }
    // the box and its halves along each axis
    let mut boxes = vec![bounds.to_vec()];
    for k in 0..n {
        let mid = 0.5 * (bounds[k].0 + bounds[k].1);
        let mut lo = bounds.to_vec();
        lo[k].1 = mid;
        let mut hi = bounds.to_vec();
        hi[k].0 = mid;
        boxes.push(lo);
        boxes.push(hi);
    }
    let mut spread = 0.0f64;
    for b in &boxes {
        let vals: Vec<f64> = permutations(n)
            .iter()
            .map(|order| edge_path_integral(phi, b, order))
            .collect::<Result<_>>()?;
        let (mn, mx) = vals.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, c), v| (a.min(*v), c.max(*v)));
        spread = spread.max(mx - mn);
    }
    Ok(Integrability {
        closedness,
        path_spread: spread,
    })
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 2 {
        vec![vec![0, 1], vec![1, 0]]
    } else {
        vec![vec![0, 1, 2], vec![0, 2, 1], vec![1, 0, 2], vec![1, 2, 0], vec![2, 0, 1], vec![2, 1, 0]]
    }
}

/// `∫ φ` from the lower to the upper corner moving along the axes in `order`.
fn edge_path_integral(phi: &Field, b: &[(f64, f64)], order: &[usize]) -> Result<f64> {
    let mut x: Vec<f64> = b.iter().map(|p| p.0).collect();
    let mut total = 0.0;
    for &k in order {
        let base = x.clone();
        total += quadrature(
            |t| {
                let mut y = base.clone();
                y[k] = t;
                phi.at(&y)[k]
            },
            b[k].0,
            b[k].1,
            1e-13,
        )?;
        x[k] = b[k].1;
    }
    Ok(total)
}

/// `R(u,v)w` assembled from the 3D Ricci decomposition
/// `(v·w)ρ̃(u) − (u·w)ρ̃(v) + ρ(v,w)u − ρ(u,w)v − (τ/2)[(v·w)u − (u·w)v]`.
pub fn riemann_from_ricci_3d(chart: &MetricChart, x: &[f64], u: &[f64], v: &[f64], w: &[f64]) -> Result<Vec<f64>> {
    if chart.dim() != 3 {
        return Err(GeomError::Precondition("Ricci decomposition of R holds in dimension 3".into()));
    }
    let ric = ricci_at(chart, x)?;
    let g = chart.metric_at(x);
    let (vw, uw) = (g_dot(&g, v, w), g_dot(&g, u, w));
    let (ru, rv) = (ric.apply_operator(u), ric.apply_operator(v));
    let (rvw, ruw) = (ric.form(v, w), ric.form(u, w));
    Ok((0..3)
        .map(|i| vw * ru[i] - uw * rv[i] + rvw * u[i] - ruw * v[i] - 0.5 * ric.tau * (vw * u[i] - uw * v[i]))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn flat(n: usize) -> MetricChart {
        MetricChart::new(n, vec![(-10.0, 10.0); n], move |x| {
            (0..n * n).map(|k| x[0].lift(if k % (n + 1) == 0 { 1.0 } else { 0.0 })).collect()
        })
        .unwrap()
    }

    fn sphere_polar() -> MetricChart {
        MetricChart::new(2, vec![(0.05, PI - 0.05), (-10.0, 10.0)], |x| {
            let s = x[0].sin();
            vec![x[0].lift(1.0), x[0].lift(0.0), x[0].lift(0.0), s * s]
        })
        .unwrap()
    }

    fn conformal(n: usize, c: f64) -> MetricChart {
        MetricChart::new(n, vec![(-2.0, 2.0); n], move |x| {
            let mut r2 = x[0].lift(0.0);
            for xi in x {
                r2 += *xi * *xi;
            }
            let lam = (r2 * c + 1.0).powi(-2) * 4.0;
            (0..n * n).map(|k| if k % (n + 1) == 0 { lam } else { x[0].lift(0.0) }).collect()
        })
        .unwrap()
    }

    #[test]
    fn sphere_riemann_components() {
        let rho = 0.9;
        let r = riemann_at(&sphere_polar(), &[rho, 0.2]).unwrap();
        assert!((r.low(0, 1, 0, 1) - rho.sin().powi(2)).abs() < 1e-13);
        assert!(r.symmetry_residual() < 1e-12);
        let s = sectional_at(&sphere_polar(), &[rho, 0.2], &[1.0, 0.3], &[0.2, 1.0]).unwrap();
        assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pole_chart_formula() {
        for n in [2, 3] {
            let chart = conformal(n, 1.0);
            let x = vec![0.0; n];
            let r = riemann_at(&chart, &x).unwrap();
            let g = chart.metric_at(&x);
            let (u, v, w) = (vec![0.3, -0.2, 0.5], vec![0.1, 0.4, -0.3], vec![-0.6, 0.2, 0.1]);
            let (u, v, w) = (&u[..n], &v[..n], &w[..n]);
            let got = r.apply(u, v, w);
            for i in 0..n {
                let expect = u[i] * g_dot(&g, v, w) - v[i] * g_dot(&g, u, w);
                assert!((got[i] - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn ricci_of_spheres() {
        let r = ricci_at(&sphere_polar(), &[1.1, 0.0]).unwrap();
        let g = sphere_polar().metric_at(&[1.1, 0.0]);
        assert!((r.rho.clone() - g).amax() < 1e-12);
        assert!((r.tau - 2.0).abs() < 1e-12);
        let chart = conformal(3, 1.0);
        let x = [0.2, -0.3, 0.1];
        let r = ricci_at(&chart, &x).unwrap();
        assert!((r.tau - 6.0).abs() < 1e-11);
        assert!((r.rho.clone() - chart.metric_at(&x) * 2.0).amax() < 1e-11);
    }

    #[test]
    fn flat_everything_vanishes() {
        let chart = flat(3);
        let x = [0.1, 0.2, 0.3];
        assert!(riemann_at(&chart, &x).unwrap().up.iter().all(|v| *v == 0.0));
        assert!(ricci_at(&chart, &x).unwrap().tau == 0.0);
        assert!(second_bianchi_residual(&chart, &x).unwrap().absolute == 0.0);
    }

    #[test]
    fn holonomy_oracle_on_sphere() {
        let chart = sphere_polar();
        let x = [1.0, 0.0];
        let g = chart.metric_at(&x);
        let u = [1.0, 0.0];
        let v = [0.0, 1.0 / g[(1, 1)].sqrt()];
        let op = riemann_holonomy_oracle(&chart, &x, &u, &v, &HOLONOMY_LADDER).unwrap();
        let rv = &op.operator * DVector::from_column_slice(&v);
        assert!((g_dot(&g, rv.as_slice(), &u) - 1.0).abs() < 1e-3, "{op:?}");
        let exact = riemann_at(&chart, &x).unwrap().operator(&u, &v);
        assert!((op.operator - exact).amax() < 1e-3);
        let z = riemann_holonomy_oracle(&chart, &x, &u, &[2.0, 0.0], &HOLONOMY_LADDER).unwrap();
        assert!(z.operator.amax() == 0.0);
    }

    #[test]
    fn volume_oracle_on_sphere() {
        let chart = sphere_polar();
        let x = [1.0, 0.0];
        let vo = ricci_volume_oracle(&chart, &x, &VOLUME_LADDER).unwrap();
        let r = ricci_at(&chart, &x).unwrap();
        assert!((vo.rho - r.rho).amax() < 5e-3);
        let vo = ricci_volume_oracle(&flat(2), &[0.0, 0.0], &VOLUME_LADDER).unwrap();
        assert!(vo.rho.amax() < 1e-10);
    }

    #[test]
    fn bianchi_on_curved_charts() {
        let b = second_bianchi_residual(&sphere_polar(), &[1.0, 0.3]).unwrap();
        assert!(b.relative < 1e-4, "{b:?}");
        let b = second_bianchi_residual(&conformal(3, -0.5), &[0.1, 0.2, -0.1]).unwrap();
        assert!(b.relative < 1e-4, "{b:?}");
    }

    #[test]
    fn exterior_derivative_of_rotation_form() {
        let chart = flat(2);
        let phi = Field::new(FieldKind::Covector, 2, |x| vec![-x[1], x[0]]);
        let d = exterior_derivative(&chart, &phi).unwrap().at(&[0.3, 0.4]);
        assert_eq!(d, vec![0.0, 2.0, -2.0, 0.0]);
        let i = integrability_on_box(&chart, &phi, &[(0.0, 1.0), (0.0, 1.0)]).unwrap();
        assert!(i.closedness > 1.0 && i.path_spread > 1.0);
        let df = Field::new(FieldKind::Covector, 2, |x| vec![x[1] * 2.0 * x[0], x[0] * x[0]]);
        let i = integrability_on_box(&chart, &df, &[(0.0, 1.0), (0.0, 1.0)]).unwrap();
        assert!(i.closedness < 1e-14 && i.path_spread < 1e-12);
    }

    #[test]
    fn metric_is_parallel_and_commutator_matches() {
        let chart = conformal(2, 1.0);
        let g = Field::metric(&chart);
        let x = [0.3, -0.2];
        let d = covariant_derivative(&chart, &g, &x, &[0.7, 0.4]).unwrap();
        assert!(d.iter().all(|v| v.abs() < 1e-12));
        let u = Field::new(FieldKind::Vector, 2, |x| vec![x[0] * x[1], x[1] + 1.0]);
        let v = Field::new(FieldKind::Vector, 2, |x| vec![x[0] * x[0] - 1.0, x[0] * 0.5]);
        let c = commutator(&chart, &u, &v).unwrap().at(&x);
        let a = nabla_field(&chart, &u, &v).unwrap().at(&x);
        let b = nabla_field(&chart, &v, &u).unwrap().at(&x);
        for i in 0..2 {
            assert!((c[i] - (a[i] - b[i])).abs() < 1e-12);
        }
        // linear fields Ax, Bx commute to (BA − AB)x
        let lin = |m: [[f64; 2]; 2]| Field::new(FieldKind::Vector, 2, move |x| (0..2).map(|i| x[0] * m[i][0] + x[1] * m[i][1]).collect());
        let (ma, mb) = ([[1.0, 2.0], [0.5, -1.0]], [[0.0, 1.0], [3.0, 2.0]]);
        let c = commutator(&flat(2), &lin(ma), &lin(mb)).unwrap().at(&[0.4, 0.9]);
        let a = nalgebra::Matrix2::new(ma[0][0], ma[0][1], ma[1][0], ma[1][1]);
        let b = nalgebra::Matrix2::new(mb[0][0], mb[0][1], mb[1][0], mb[1][1]);
        let e = (b * a - a * b) * nalgebra::Vector2::new(0.4, 0.9);
        assert!((c[0] - e[0]).abs() < 1e-14 && (c[1] - e[1]).abs() < 1e-14);
    }

    #[test]
    fn ricci_decomposition_in_3d() {
        let chart = MetricChart::new(3, vec![(-1.0, 1.0); 3], |x| {
            let z = x[0].lift(0.0);
            let a = (x[0] * x[1]).sin() * 0.2 + 1.0;
            let b = x[2].exp();
            let c = x[0] * 0.1;
            vec![a, c, z, c, b, z, z, z, x[1].cosh()]
        })
        .unwrap();
        let x = [0.2, 0.3, -0.1];
        let r = riemann_at(&chart, &x).unwrap();
        let (u, v, w) = ([0.3, 0.1, -0.4], [-0.2, 0.5, 0.3], [0.6, -0.1, 0.2]);
        let a = r.apply(&u, &v, &w);
        let b = riemann_from_ricci_3d(&chart, &x, &u, &v, &w).unwrap();
        for i in 0..3 {
            assert!((a[i] - b[i]).abs() < 1e-10, "{a:?} {b:?}");
        }
    }
}
