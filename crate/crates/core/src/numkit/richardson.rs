//! Richardson extrapolation of `f(h)` as `h → 0` over a halving ladder.

use serde::Serialize;

use crate::error::{GeomError, Result};

/// Samples `f(h_k)` with `h_{k+1} = h_k / 2`.
///
/// The error is assumed to expand as `c_1 h^p + c_2 h^{2p} + …`; curvature
/// limits use `p = 2` (even expansions).
#[derive(Debug, Clone, Serialize)]
pub struct ExtrapolationLadder {
    pub steps: Vec<f64>,
    pub samples: Vec<f64>,
    pub order: u32,
}

impl ExtrapolationLadder {
    pub fn new(steps: Vec<f64>, samples: Vec<f64>, order: u32) -> Result<Self> {
        if steps.len() != samples.len() {
            return Err(GeomError::Precondition("one sample per step".into()));
        }
        if steps.len() < 3 {
            return Err(GeomError::Precondition("ladder needs at least 3 rungs".into()));
        }
        if order < 1 {
            return Err(GeomError::Precondition("error order must be >= 1".into()));
        }
        for w in steps.windows(2) {
            if !(w[1] < w[0]) || ((w[0] / w[1]) - 2.0).abs() > 1e-9 {
                return Err(GeomError::Precondition(
                    "steps must halve strictly from rung to rung".into(),
                ));
            }
        }
        Ok(ExtrapolationLadder { steps, samples, order })
    }

    /// Evaluates `f` on `h0, h0/2, …` (`rungs` values).
    pub fn sample<F: FnMut(f64) -> Result<f64>>(h0: f64, rungs: usize, order: u32, mut f: F) -> Result<Self> {
        let steps: Vec<f64> = (0..rungs).map(|k| h0 / 2f64.powi(k as i32)).collect();
        let samples = steps.iter().map(|&h| f(h)).collect::<Result<Vec<_>>>()?;
        ExtrapolationLadder::new(steps, samples, order)
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Extrapolated {
    pub value: f64,
    pub error: f64,
    /// Set when the diagonal of the tableau did not shrink monotonically.
    pub non_monotone: bool,
}

/// Builds the Richardson tableau and returns its final diagonal entry, with
/// the difference of the last two diagonal entries as error estimate.
pub fn richardson(ladder: &ExtrapolationLadder) -> Extrapolated {
    let n = ladder.samples.len();
    let p = ladder.order as i32;
    let mut table: Vec<Vec<f64>> = vec![ladder.samples.clone()];
    for j in 1..n {
        let prev = &table[j - 1];
        let factor = 2f64.powi(p * j as i32);
        let col: Vec<f64> = (1..prev.len())
            .map(|i| prev[i] + (prev[i] - prev[i - 1]) / (factor - 1.0))
            .collect();
        table.push(col);
    }
    let diag: Vec<f64> = (0..n).map(|j| table[j][0]).collect();
    let value = diag[n - 1];
    let error = (diag[n - 1] - diag[n - 2]).abs();
    let diffs: Vec<f64> = diag.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    let non_monotone = diffs.windows(2).any(|w| w[1] > w[0] && w[1] > 1e-14 * value.abs().max(1.0));
    Extrapolated {
        value,
        error,
        non_monotone,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ladder(f: impl Fn(f64) -> f64, p: u32) -> ExtrapolationLadder {
        ExtrapolationLadder::sample(0.4, 3, p, |h| Ok(f(h))).unwrap()
    }

    #[test]
    fn quadratic_error_is_annihilated() {
        let r = richardson(&ladder(|h| 3.0 + h * h, 2));
        assert!((r.value - 3.0).abs() < 1e-14);
    }

    #[test]
    fn linear_sequence() {
        let r = richardson(&ladder(|h| h, 1));
        assert!(r.value.abs() < 1e-15);
    }

    #[test]
    fn sinc_limit() {
        let r = richardson(&ladder(|h| h.sin() / h, 2));
        assert!((r.value - 1.0).abs() < 1e-7);
        assert!(r.error < 1e-4);
    }

    #[test]
    fn rejects_short_or_uneven_ladders() {
        assert!(ExtrapolationLadder::new(vec![0.2, 0.1], vec![1.0, 1.0], 2).is_err());
        assert!(ExtrapolationLadder::new(vec![0.2, 0.1, 0.04], vec![1.0; 3], 2).is_err());
    }

    #[test]
    fn erratic_sequence_is_flagged_not_rejected() {
        let l = ExtrapolationLadder::new(vec![0.4, 0.2, 0.1, 0.05], vec![1.0, 1.0, 1.0, 5.0], 2).unwrap();
        assert!(richardson(&l).non_monotone);
    }
}
