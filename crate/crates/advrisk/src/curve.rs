//! Monotone scalar curves on a closed interval.
//!
//! A [`MonotoneCurve`] stores knots with strictly ascending abscissae and
//! values monotone in a declared direction. Evaluation outside the knot range
//! clamps to the end values. Two interpolation modes cover the uses here:
//! piecewise-linear curves (calibration functions, envelopes, bound curves)
//! and right-continuous step curves (cdfs of discrete measures).

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    NonDecreasing,
    NonIncreasing,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Interp {
    /// Piecewise-linear between knots.
    Linear,
    /// Right-continuous step: the value on `[x_k, x_{k+1})` is `y_k`.
    StepRight,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MonotoneCurve {
    xs: Vec<f64>,
    ys: Vec<f64>,
    direction: Direction,
    interp: Interp,
}

/// Monotonicity violations up to this fraction of the value span are treated
/// as numerical noise from the tabulation and clamped away; anything larger is
/// rejected as a real defect in the input.
const REPAIR_FRACTION: f64 = 1e-7;

impl MonotoneCurve {
    pub fn nondecreasing(knots: Vec<(f64, f64)>) -> Result<Self> {
        Self::build(knots, Direction::NonDecreasing, Interp::Linear)
    }

    pub fn nonincreasing(knots: Vec<(f64, f64)>) -> Result<Self> {
        Self::build(knots, Direction::NonIncreasing, Interp::Linear)
    }

    /// Right-continuous step cdf; knots give the value from each abscissa on.
    pub fn step_nondecreasing(knots: Vec<(f64, f64)>) -> Result<Self> {
        Self::build(knots, Direction::NonDecreasing, Interp::StepRight)
    }

    fn build(knots: Vec<(f64, f64)>, direction: Direction, interp: Interp) -> Result<Self> {
        if knots.is_empty() {
            return Err(Error::Curve {
                reason: "no knots".into(),
            });
        }
        let mut xs = Vec::with_capacity(knots.len());
        let mut ys = Vec::with_capacity(knots.len());
        for (i, &(x, y)) in knots.iter().enumerate() {
            if !x.is_finite() || !y.is_finite() {
                return Err(Error::Curve {
                    reason: format!("non-finite knot ({x}, {y}) at index {i}"),
                });
            }
            if let Some(&prev) = xs.last() {
                if x <= prev {
                    return Err(Error::Curve {
                        reason: format!(
                            "abscissae not strictly ascending at index {i}: {prev} then {x}"
                        ),
                    });
                }
            }
            xs.push(x);
            ys.push(y);
        }
        let span = {
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for &y in &ys {
                lo = lo.min(y);
                hi = hi.max(y);
            }
            (hi - lo).abs()
        };
        let repair = REPAIR_FRACTION * (span + 1.0);
        for i in 1..ys.len() {
            let step = ys[i] - ys[i - 1];
            let bad = match direction {
                Direction::NonDecreasing => -step,
                Direction::NonIncreasing => step,
            };
            if bad > repair {
                return Err(Error::Curve {
                    reason: format!(
                        "values not {:?} at index {i}: {} then {}",
                        direction,
                        ys[i - 1],
                        ys[i]
                    ),
                });
            }
            if bad > 0.0 {
                ys[i] = ys[i - 1];
            }
        }
        Ok(Self {
            xs,
            ys,
            direction,
            interp,
        })
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    pub fn interp(&self) -> Interp {
        self.interp
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.xs[0], *self.xs.last().unwrap())
    }

    pub fn knots(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.xs.iter().copied().zip(self.ys.iter().copied())
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    /// Evaluate with clamped extension beyond the knot range.
    pub fn eval(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if x <= self.xs[0] {
            // Clamp below the range. Step cdfs that need a zero left tail
            // carry an explicit leading knot.
            return self.ys[0];
        }
        if x >= self.xs[n - 1] {
            return self.ys[n - 1];
        }
        // Last index with xs[i] <= x; x is interior here.
        let i = match self.xs.partition_point(|&k| k <= x) {
            0 => 0,
            p => p - 1,
        };
        match self.interp {
            Interp::StepRight => self.ys[i],
            Interp::Linear => {
                let (x0, x1) = (self.xs[i], self.xs[i + 1]);
                let (y0, y1) = (self.ys[i], self.ys[i + 1]);
                let t = (x - x0) / (x1 - x0);
                y0 + t * (y1 - y0)
            }
        }
    }

    /// Left-most preimage of `y` for a nondecreasing piecewise-linear curve.
    ///
    /// Plateaus resolve to their left edge. Values outside the attained range
    /// are a domain error.
    pub fn inverse_leftmost(&self, y: f64) -> Result<f64> {
        if self.direction != Direction::NonDecreasing || self.interp != Interp::Linear {
            return Err(Error::Curve {
                reason: "inverse requires a nondecreasing piecewise-linear curve".into(),
            });
        }
        let (y_lo, y_hi) = (self.ys[0], *self.ys.last().unwrap());
        if !(y >= y_lo && y <= y_hi) {
            return Err(Error::Domain {
                what: "curve inverse",
                value: y,
                lo: y_lo,
                hi: y_hi,
            });
        }
        // First knot reaching y, then solve on the segment entering it.
        let j = self.ys.partition_point(|&v| v < y);
        if j == 0 {
            return Ok(self.xs[0]);
        }
        let (x0, x1) = (self.xs[j - 1], self.xs[j]);
        let (y0, y1) = (self.ys[j - 1], self.ys[j]);
        if y1 == y0 {
            return Ok(x0);
        }
        Ok(x0 + (x1 - x0) * (y - y0) / (y1 - y0))
    }

    /// Serialize as two-column CSV with a header.
    pub fn to_csv(&self, x_name: &str, y_name: &str) -> String {
        let mut out = format!("{x_name},{y_name}\n");
        for (x, y) in self.knots() {
            out.push_str(&format!("{x},{y}\n"));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_eval_interpolates_and_clamps() {
        let c = MonotoneCurve::nondecreasing(vec![(0.0, 0.0), (1.0, 2.0), (3.0, 2.0)]).unwrap();
        assert_eq!(c.eval(0.5), 1.0);
        assert_eq!(c.eval(2.0), 2.0);
        assert_eq!(c.eval(-5.0), 0.0);
        assert_eq!(c.eval(9.0), 2.0);
    }

    #[test]
    fn step_eval_is_right_continuous() {
        let c =
            MonotoneCurve::step_nondecreasing(vec![(0.0, 0.0), (0.3, 1.0), (0.5, 1.0)]).unwrap();
        assert_eq!(c.eval(0.29), 0.0);
        assert_eq!(c.eval(0.3), 1.0);
        assert_eq!(c.eval(0.4), 1.0);
    }

    #[test]
    fn inverse_returns_leftmost_preimage() {
        let c = MonotoneCurve::nondecreasing(vec![(0.0, 0.0), (1.0, 1.0), (2.0, 1.0), (3.0, 2.0)])
            .unwrap();
        assert_eq!(c.inverse_leftmost(1.0).unwrap(), 1.0);
        assert!((c.inverse_leftmost(0.25).unwrap() - 0.25).abs() < 1e-12);
        assert!(c.inverse_leftmost(2.5).is_err());
    }

    #[test]
    fn rejects_descending_abscissae_and_large_violations() {
        assert!(MonotoneCurve::nondecreasing(vec![(0.0, 0.0), (0.0, 1.0)]).is_err());
        assert!(MonotoneCurve::nondecreasing(vec![(0.0, 1.0), (1.0, 0.0)]).is_err());
    }

    #[test]
    fn repairs_tabulation_noise() {
        let c =
            MonotoneCurve::nondecreasing(vec![(0.0, 0.0), (1.0, 1.0), (2.0, 1.0 - 1e-12)]).unwrap();
        assert_eq!(c.eval(2.0), 1.0);
    }
}
