//! Adaptive Dormand–Prince 5(4) integration with cubic Hermite dense output.

use crate::error::GeomError;

/// Signals that the right-hand side cannot be evaluated at the given state,
/// typically because the state left a coordinate domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OutOfDomain;

/// Initial value problem `y' = f(t, y)`, `y(t0) = y0` on `[t0, t1]`.
pub struct OdeProblem<F> {
    pub rhs: F,
    pub y0: Vec<f64>,
    pub t0: f64,
    pub t1: f64,
    pub rtol: f64,
    pub atol: f64,
    pub max_step: f64,
}

impl<F> OdeProblem<F>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<(), OutOfDomain>,
{
    pub fn new(rhs: F, y0: Vec<f64>, t0: f64, t1: f64) -> Self {
        OdeProblem {
            rhs,
            y0,
            t0,
            t1,
            rtol: 1e-10,
            atol: 1e-12,
            max_step: f64::INFINITY,
        }
    }

    pub fn tolerances(mut self, rtol: f64, atol: f64) -> Self {
        self.rtol = rtol;
        self.atol = atol;
        self
    }

    pub fn max_step(mut self, h: f64) -> Self {
        self.max_step = h;
        self
    }

    pub fn dim(&self) -> usize {
        self.y0.len()
    }

    pub fn solve(self) -> Result<Trajectory, OdeFailure> {
        integrate_ode(self)
    }
}

/// Accepted steps of a solution, with derivative samples for Hermite
/// interpolation in between.
#[derive(Debug, Clone)]
pub struct Trajectory {
    dim: usize,
    pub ts: Vec<f64>,
    ys: Vec<f64>,
    dys: Vec<f64>,
}

impl Trajectory {
    fn new(dim: usize) -> Self {
        Trajectory {
            dim,
            ts: Vec::new(),
            ys: Vec::new(),
            dys: Vec::new(),
        }
    }

    fn push(&mut self, t: f64, y: &[f64], dy: &[f64]) {
        self.ts.push(t);
        self.ys.extend_from_slice(y);
        self.dys.extend_from_slice(dy);
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ts.is_empty()
    }

    pub fn state(&self, i: usize) -> &[f64] {
        &self.ys[i * self.dim..(i + 1) * self.dim]
    }

    pub fn derivative(&self, i: usize) -> &[f64] {
        &self.dys[i * self.dim..(i + 1) * self.dim]
    }

    pub fn t_start(&self) -> f64 {
        self.ts[0]
    }

    pub fn t_end(&self) -> f64 {
        *self.ts.last().unwrap()
    }

    pub fn final_state(&self) -> &[f64] {
        self.state(self.len() - 1)
    }

    /// Cubic Hermite interpolation between the bracketing accepted steps.
    /// `t` is clamped to the solved span.
    pub fn interpolate(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.interpolate_into(t, &mut out, None);
        out
    }

    /// State and derivative at `t`.
    pub fn interpolate_with_derivative(&self, t: f64) -> (Vec<f64>, Vec<f64>) {
        let mut y = vec![0.0; self.dim];
        let mut dy = vec![0.0; self.dim];
        self.interpolate_into(t, &mut y, Some(&mut dy));
        (y, dy)
    }

    fn interpolate_into(&self, t: f64, y: &mut [f64], dy: Option<&mut [f64]>) {
        let n = self.len();
        if n == 1 {
            y.copy_from_slice(self.state(0));
            if let Some(dy) = dy {
                dy.copy_from_slice(self.derivative(0));
            }
            return;
        }
        let forward = self.ts[n - 1] >= self.ts[0];
        let key = |s: f64| if forward { s } else { -s };
        let tk = key(t).clamp(key(self.ts[0]), key(self.ts[n - 1]));
        // index of the last sample with key <= tk
        let i = match self.ts.partition_point(|&s| key(s) <= tk) {
            0 => 0,
            p => (p - 1).min(n - 2),
        };
        let (t0, t1) = (self.ts[i], self.ts[i + 1]);
        let h = t1 - t0;
        let s = if h == 0.0 { 0.0 } else { (if forward { tk } else { -tk } - t0) / h };
        let (y0, y1) = (self.state(i), self.state(i + 1));
        let (f0, f1) = (self.derivative(i), self.derivative(i + 1));
        let h00 = 2.0 * s * s * s - 3.0 * s * s + 1.0;
        let h10 = s * s * s - 2.0 * s * s + s;
        let h01 = -2.0 * s * s * s + 3.0 * s * s;
        let h11 = s * s * s - s * s;
        for k in 0..self.dim {
            y[k] = h00 * y0[k] + h10 * h * f0[k] + h01 * y1[k] + h11 * h * f1[k];
        }
        if let Some(dy) = dy {
            let d00 = (6.0 * s * s - 6.0 * s) / h;
            let d10 = 3.0 * s * s - 4.0 * s + 1.0;
            let d01 = (-6.0 * s * s + 6.0 * s) / h;
            let d11 = 3.0 * s * s - 2.0 * s;
            for k in 0..self.dim {
                dy[k] = d00 * y0[k] + d10 * f0[k] + d01 * y1[k] + d11 * f1[k];
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FailureKind {
    /// The state left the right-hand side's domain (or produced NaN).
    DomainExit,
    /// The controller shrank the step below resolution.
    StepUnderflow,
    /// Too many steps.
    StepBudget,
}

/// A failed integration, carrying everything solved before the failure.
#[derive(Debug, Clone)]
pub struct OdeFailure {
    pub kind: FailureKind,
    pub t: f64,
    pub partial: Trajectory,
}

impl From<OdeFailure> for GeomError {
    fn from(f: OdeFailure) -> Self {
        let state = f.partial.final_state().to_vec();
        match f.kind {
            FailureKind::DomainExit => GeomError::DomainExit { t: f.t, state },
            _ => GeomError::StepUnderflow { t: f.t, state },
        }
    }
}

// Dormand–Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
// Difference between the 5th and embedded 4th order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

const MAX_STEPS: usize = 2_000_000;

/// Integrates `problem` with adaptive step control.
///
/// Each accepted step satisfies the mixed error test
/// `‖err_i / (atol + rtol·max(|y_i|, |y_new_i|))‖_rms ≤ 1`.
/// When the right-hand side reports [`OutOfDomain`] the step is shrunk; once
/// it can no longer shrink the failure carries the solution up to the last
/// good state.
pub fn integrate_ode<F>(problem: OdeProblem<F>) -> Result<Trajectory, OdeFailure>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<(), OutOfDomain>,
{
    let OdeProblem {
        mut rhs,
        y0,
        t0,
        t1,
        rtol,
        atol,
        max_step,
    } = problem;
    assert!(rtol > 0.0 && atol > 0.0, "tolerances must be positive");
    assert!(t0.is_finite() && t1.is_finite(), "integration span must be finite");
    let n = y0.len();
    let mut traj = Trajectory::new(n);
    let mut eval = |t: f64, y: &[f64], out: &mut [f64]| -> Result<(), OutOfDomain> {
        rhs(t, y, out)?;
        if out.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(OutOfDomain)
        }
    };

    let mut k: Vec<Vec<f64>> = vec![vec![0.0; n]; 7];
    if eval(t0, &y0, &mut k[0]).is_err() {
        traj.push(t0, &y0, &vec![0.0; n]);
        return Err(OdeFailure {
            kind: FailureKind::DomainExit,
            t: t0,
            partial: traj,
        });
    }
    traj.push(t0, &y0, &k[0]);
    if t1 == t0 {
        return Ok(traj);
    }
    let dir = (t1 - t0).signum();
    let span = (t1 - t0).abs();
    let hmax = max_step.min(span);
    let hmin = 1e-14 * span.max(t0.abs()).max(1.0);

    let mut h = initial_step(&y0, &k[0], rtol, atol, span).min(hmax);
    let mut t = t0;
    let mut y = y0.clone();
    let mut ytmp = vec![0.0; n];
    let mut ynew = vec![0.0; n];
    let mut domain_trouble = false;
    let mut steps = 0usize;

    while (t1 - t) * dir > 0.0 {
        steps += 1;
        if steps > MAX_STEPS {
            return Err(OdeFailure {
                kind: FailureKind::StepBudget,
                t,
                partial: traj,
            });
        }
        let last = (t + dir * h - t1) * dir >= 0.0;
        if last {
            h = (t1 - t).abs();
        }
        // stages
        let mut stage_ok = true;
        for s in 1..7 {
            for i in 0..n {
                let mut acc = 0.0;
                for (j, a) in A[s].iter().enumerate().take(s) {
                    acc += a * k[j][i];
                }
                ytmp[i] = y[i] + dir * h * acc;
            }
            let (head, tail) = k.split_at_mut(s);
            let _ = head;
            if eval(t + dir * C[s] * h, &ytmp, &mut tail[0]).is_err() {
                stage_ok = false;
                break;
            }
        }
        if !stage_ok {
            domain_trouble = true;
            h *= 0.5;
            if h < hmin {
                return Err(OdeFailure {
                    kind: FailureKind::DomainExit,
                    t,
                    partial: traj,
                });
            }
            continue;
        }
        // The last stage is evaluated at the 5th order solution (FSAL).
        ynew.copy_from_slice(&ytmp);
        let mut err = 0.0;
        for i in 0..n {
            let mut e = 0.0;
            for (j, ej) in E.iter().enumerate() {
                e += ej * k[j][i];
            }
            e *= h;
            let sc = atol + rtol * y[i].abs().max(ynew[i].abs());
            err += (e / sc) * (e / sc);
        }
        let err = (err / n.max(1) as f64).sqrt();
        if err <= 1.0 {
            t = if last { t1 } else { t + dir * h };
            y.copy_from_slice(&ynew);
            let fsal = k[6].clone();
            k[0].copy_from_slice(&fsal);
            traj.push(t, &y, &k[0]);
            let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            // After trouble at a domain boundary, grow cautiously.
            let fac = if domain_trouble { fac.min(1.0) } else { fac };
            domain_trouble = false;
            h = (h * fac).min(hmax);
        } else {
            h *= (0.9 * err.powf(-0.2)).clamp(0.1, 1.0);
            if h < hmin {
                return Err(OdeFailure {
                    kind: FailureKind::StepUnderflow,
                    t,
                    partial: traj,
                });
            }
        }
    }
    Ok(traj)
}

fn initial_step(y0: &[f64], f0: &[f64], rtol: f64, atol: f64, span: f64) -> f64 {
    let n = y0.len().max(1) as f64;
    let mut d0 = 0.0;
    let mut d1 = 0.0;
    for (y, f) in y0.iter().zip(f0) {
        let sc = atol + rtol * y.abs();
        d0 += (y / sc).powi(2);
        d1 += (f / sc).powi(2);
    }
    let (d0, d1) = ((d0 / n).sqrt(), (d1 / n).sqrt());
    let h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    h.min(span).max(1e-12 * span)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_growth() {
        let traj = OdeProblem::new(
            |_t, y: &[f64], dy: &mut [f64]| {
                dy[0] = y[0];
                Ok(())
            },
            vec![1.0],
            0.0,
            1.0,
        )
        .solve()
        .unwrap();
        assert!((traj.final_state()[0] - std::f64::consts::E).abs() < 1e-9);
    }

    #[test]
    fn zero_rhs_is_constant() {
        let traj = OdeProblem::new(
            |_t, _y: &[f64], dy: &mut [f64]| {
                dy[0] = 0.0;
                Ok(())
            },
            vec![3.5],
            0.0,
            10.0,
        )
        .solve()
        .unwrap();
        for i in 0..traj.len() {
            assert_eq!(traj.state(i)[0], 3.5);
        }
        assert_eq!(traj.interpolate(4.2)[0], 3.5);
    }

    #[test]
    fn harmonic_oscillator_reaches_minus_one_at_pi() {
        let traj = OdeProblem::new(
            |_t, y: &[f64], dy: &mut [f64]| {
                dy[0] = y[1];
                dy[1] = -y[0];
                Ok(())
            },
            vec![1.0, 0.0],
            0.0,
            std::f64::consts::PI,
        )
        .solve()
        .unwrap();
        assert!((traj.final_state()[0] + 1.0).abs() < 1e-8);
        for i in 0..traj.len() {
            let s = traj.state(i);
            assert!((s[0] * s[0] + s[1] * s[1] - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn backward_integration_and_interpolation() {
        let traj = OdeProblem::new(
            |_t, y: &[f64], dy: &mut [f64]| {
                dy[0] = y[0];
                Ok(())
            },
            vec![1.0],
            0.0,
            -1.0,
        )
        .max_step(0.01)
        .solve()
        .unwrap();
        assert!((traj.final_state()[0] - (-1.0f64).exp()).abs() < 1e-9);
        assert!((traj.interpolate(-0.503)[0] - (-0.503f64).exp()).abs() < 1e-9);
    }

    #[test]
    fn domain_exit_reports_last_good_state() {
        let res = OdeProblem::new(
            |_t, y: &[f64], dy: &mut [f64]| {
                if y[0] > 2.0 {
                    return Err(OutOfDomain);
                }
                dy[0] = 1.0;
                Ok(())
            },
            vec![0.0],
            0.0,
            5.0,
        )
        .solve();
        let fail = res.unwrap_err();
        assert_eq!(fail.kind, FailureKind::DomainExit);
        let last = fail.partial.final_state()[0];
        assert!(last <= 2.0 && last > 1.99, "stopped at {last}");
    }

    #[test]
    fn nan_is_a_domain_exit() {
        let res = OdeProblem::new(
            |_t, y: &[f64], dy: &mut [f64]| {
                dy[0] = (2.0 - y[0]).sqrt() * 0.0 + 1.0;
                Ok(())
            },
            vec![1.0],
            0.0,
            3.0,
        )
        .solve();
        assert_eq!(res.unwrap_err().kind, FailureKind::DomainExit);
    }
}
