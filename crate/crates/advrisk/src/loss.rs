//! Loss functions and the conditional-risk calculus built on them.
//!
//! A [`Loss`] is a continuous, non-increasing score penalty `phi` with
//! `phi(alpha) -> 0` as `alpha -> +inf`. Everything downstream (optimal
//! attacks, calibration transforms, risk bounds) reduces to a handful of
//! scalar quantities of `phi` at a fixed class probability `eta`:
//! the conditional risk `C(eta, alpha)`, its minimum `C*(eta)`, the
//! minimum under forced misclassification, and the smallest minimizing
//! score. All searches are numeric; closed forms are deliberately not
//! special-cased so the same code path covers user-supplied tables.

use serde::{Deserialize, Serialize};

use crate::curve::MonotoneCurve;
use crate::error::{Error, Result};

/// Scores are searched over `[-SCORE_BOUND, SCORE_BOUND]`; minimizers
/// beyond it are reported as the nearer infinity.
pub const SCORE_BOUND: f64 = 50.0;

/// Default tolerance for the scalar searches in this module.
pub const DEFAULT_TOL: f64 = 1e-8;

/// Knot count for the tabulated calibration transform.
const PSI_KNOTS: usize = 4097;

/// Points in the coarse scan over the truncated score interval.
const SCAN_POINTS: usize = 2001;

/// A score still descending this far past the first near-minimal point
/// is treated as minimized only in the limit at `+inf`.
const DESCENT_PROBE: f64 = 2.0;

const INV_PHI: f64 = 0.618_033_988_749_894_8;

/// A binary-classification loss satisfying: continuous, non-increasing,
/// and vanishing at `+inf`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Loss {
    /// `max(1 - alpha, 0)`
    Hinge,
    /// `exp(-alpha)`
    Exponential,
    /// `ln(1 + exp(-alpha))`
    Logistic,
    /// `min(1, max(1 - alpha/rho, 0))`, bounded with a flat top.
    RhoMargin { rho: f64 },
    /// `1 / (1 + exp(alpha - tau))`, a sigmoid pushed right by `tau > 0`.
    ShiftedSigmoid { tau: f64 },
    /// `(1 - alpha)_+ / 2`, the hinge scaled to value 1/2 at zero.
    HalfHinge,
    /// User-supplied sampled loss, linearly interpolated.
    Table(TableLoss),
}

/// A loss given by samples `(alpha, value)`, interpolated linearly and
/// clamped to the end values outside the sampled range. The behaviour at
/// `-inf` is declared, not derived; the limit at `+inf` is taken to be 0
/// even though finite evaluation clamps to the last sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableLoss {
    name: String,
    alphas: Vec<f64>,
    values: Vec<f64>,
    limit_neg: f64,
}

impl TableLoss {
    fn eval(&self, alpha: f64) -> f64 {
        let n = self.alphas.len();
        if alpha <= self.alphas[0] {
            return self.values[0];
        }
        if alpha >= self.alphas[n - 1] {
            return self.values[n - 1];
        }
        let i = self.alphas.partition_point(|&a| a <= alpha) - 1;
        let (a0, a1) = (self.alphas[i], self.alphas[i + 1]);
        let (v0, v1) = (self.values[i], self.values[i + 1]);
        v0 + (v1 - v0) * (alpha - a0) / (a1 - a0)
    }
}

impl Loss {
    /// Builds the rho-margin loss, rejecting non-positive `rho`.
    pub fn rho_margin(rho: f64) -> Result<Self> {
        if !(rho.is_finite() && rho > 0.0) {
            return Err(Error::LossParameter {
                name: "rho",
                value: rho,
                requirement: "positive and finite",
            });
        }
        Ok(Loss::RhoMargin { rho })
    }

    /// Builds the shifted sigmoid loss, rejecting non-positive `tau`.
    pub fn shifted_sigmoid(tau: f64) -> Result<Self> {
        if !(tau.is_finite() && tau > 0.0) {
            return Err(Error::LossParameter {
                name: "tau",
                value: tau,
                requirement: "positive and finite",
            });
        }
        Ok(Loss::ShiftedSigmoid { tau })
    }

    /// Builds a table loss from parallel sample vectors.
    ///
    /// The samples must be finite, strictly increasing in `alpha`,
    /// non-increasing in value, nonnegative, and must cover `alpha = 0`.
    /// `limit_neg` may be `+inf` but must majorize the first value.
    pub fn table(name: &str, alphas: Vec<f64>, values: Vec<f64>, limit_neg: f64) -> Result<Self> {
        let fail = |reason: String| Err(Error::LossTable { reason });
        if alphas.len() != values.len() {
            return fail(format!(
                "{} scores but {} values",
                alphas.len(),
                values.len()
            ));
        }
        if alphas.len() < 2 {
            return fail("needs at least two samples".to_string());
        }
        if alphas.iter().any(|a| !a.is_finite()) {
            return fail("scores must be finite".to_string());
        }
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return fail("values must be finite and nonnegative".to_string());
        }
        if alphas.windows(2).any(|w| w[0] >= w[1]) {
            return fail("scores must be strictly increasing".to_string());
        }
        let span = values[0] - values[values.len() - 1];
        let wiggle = 1e-12 * span.max(1.0);
        if values.windows(2).any(|w| w[1] > w[0] + wiggle) {
            return fail("values must be non-increasing".to_string());
        }
        if !(alphas[0] <= 0.0 && 0.0 <= alphas[alphas.len() - 1]) {
            return fail("samples must cover alpha = 0".to_string());
        }
        if limit_neg.is_nan() || limit_neg < values[0] {
            return fail(format!(
                "declared limit at -inf ({limit_neg}) must majorize the first value ({})",
                values[0]
            ));
        }
        // Clamp tabulation noise so the table is monotone exactly.
        let mut values = values;
        for i in 1..values.len() {
            if values[i] > values[i - 1] {
                values[i] = values[i - 1];
            }
        }
        Ok(Loss::Table(TableLoss {
            name: name.to_string(),
            alphas,
            values,
            limit_neg,
        }))
    }

    /// Parses a table loss from two-column CSV text with a header line.
    pub fn table_from_csv(name: &str, csv: &str, limit_neg: f64) -> Result<Self> {
        let mut alphas = Vec::new();
        let mut values = Vec::new();
        for (idx, line) in csv.lines().enumerate() {
            let line = line.trim();
            if idx == 0 || line.is_empty() {
                continue;
            }
            let mut fields = line.split(',');
            let mut field = |what: &str| -> Result<f64> {
                let raw = fields.next().ok_or_else(|| Error::Csv {
                    line: idx + 1,
                    reason: format!("missing {what} column"),
                })?;
                raw.trim().parse::<f64>().map_err(|_| Error::Csv {
                    line: idx + 1,
                    reason: format!("bad {what} value {raw:?}"),
                })
            };
            alphas.push(field("alpha")?);
            values.push(field("value")?);
            if fields.next().is_some() {
                return Err(Error::Csv {
                    line: idx + 1,
                    reason: "expected exactly two columns".to_string(),
                });
            }
        }
        Loss::table(name, alphas, values, limit_neg)
    }

    /// Parses a loss name, optionally with a `=parameter` suffix for the
    /// parametric families (e.g. `rho-margin=0.5`, `shifted-sigmoid=2`).
    pub fn from_spec(spec: &str) -> Result<Self> {
        let (name, param) = match spec.split_once('=') {
            Some((n, p)) => {
                let value = p.trim().parse::<f64>().map_err(|_| Error::Config {
                    reason: format!("bad loss parameter {p:?} in {spec:?}"),
                })?;
                (n.trim(), Some(value))
            }
            None => (spec.trim(), None),
        };
        let bare = |loss: Loss| match param {
            Some(_) => Err(Error::Config {
                reason: format!("loss {name:?} takes no parameter"),
            }),
            None => Ok(loss),
        };
        match name {
            "hinge" => bare(Loss::Hinge),
            "exponential" | "exp" => bare(Loss::Exponential),
            "logistic" => bare(Loss::Logistic),
            "half-hinge" => bare(Loss::HalfHinge),
            "rho-margin" => Loss::rho_margin(param.unwrap_or(1.0)),
            "shifted-sigmoid" => Loss::shifted_sigmoid(param.unwrap_or(1.0)),
            _ => Err(Error::Config {
                reason: format!("unknown loss {spec:?}"),
            }),
        }
    }

    /// Identifier for reports; parametric families include the parameter.
    pub fn name(&self) -> String {
        match self {
            Loss::Hinge => "hinge".to_string(),
            Loss::Exponential => "exponential".to_string(),
            Loss::Logistic => "logistic".to_string(),
            Loss::RhoMargin { rho } => format!("rho-margin({rho})"),
            Loss::ShiftedSigmoid { tau } => format!("shifted-sigmoid({tau})"),
            Loss::HalfHinge => "half-hinge".to_string(),
            Loss::Table(t) => t.name.clone(),
        }
    }

    /// Evaluates the loss at a score; `alpha` may be `+-inf`.
    pub fn eval(&self, alpha: f64) -> f64 {
        assert!(!alpha.is_nan(), "score must not be NaN");
        if alpha == f64::INFINITY {
            return self.limit_pos();
        }
        if alpha == f64::NEG_INFINITY {
            return self.limit_neg();
        }
        match self {
            Loss::Hinge => (1.0 - alpha).max(0.0),
            Loss::Exponential => (-alpha).exp(),
            Loss::Logistic => {
                // Stable softplus: ln(1 + e^-a) = max(-a, 0) + ln(1 + e^-|a|).
                (-alpha).max(0.0) + (-alpha.abs()).exp().ln_1p()
            }
            Loss::RhoMargin { rho } => (1.0 - alpha / rho).clamp(0.0, 1.0),
            Loss::ShiftedSigmoid { tau } => 1.0 / (1.0 + (alpha - tau).exp()),
            Loss::HalfHinge => 0.5 * (1.0 - alpha).max(0.0),
            Loss::Table(t) => t.eval(alpha),
        }
    }

    /// `phi(0)`.
    pub fn value_at_zero(&self) -> f64 {
        self.eval(0.0)
    }

    /// Limit at `+inf`; zero for every admissible loss.
    pub fn limit_pos(&self) -> f64 {
        0.0
    }

    /// Limit at `-inf`; may be `+inf` (hinge, exponential, logistic).
    pub fn limit_neg(&self) -> f64 {
        match self {
            Loss::Hinge | Loss::Exponential | Loss::Logistic | Loss::HalfHinge => f64::INFINITY,
            Loss::RhoMargin { .. } | Loss::ShiftedSigmoid { .. } => 1.0,
            Loss::Table(t) => t.limit_neg,
        }
    }

    /// Conditional risk `eta * phi(alpha) + (1 - eta) * phi(-alpha)`.
    ///
    /// Zero-weight terms are dropped before multiplying so that an
    /// infinite limit with weight zero contributes nothing.
    pub fn conditional_risk(&self, eta: f64, alpha: f64) -> Result<f64> {
        check_eta(eta)?;
        Ok(self.cond_raw(eta, alpha))
    }

    fn cond_raw(&self, eta: f64, alpha: f64) -> f64 {
        let mut risk = 0.0;
        if eta > 0.0 {
            risk += eta * self.eval(alpha);
        }
        if eta < 1.0 {
            risk += (1.0 - eta) * self.eval(-alpha);
        }
        risk
    }

    /// Minimal conditional risk `C*(eta)` over extended-real scores.
    ///
    /// Scans the truncated score interval, refines the best cell by
    /// golden-section, and compares against both limit values.
    pub fn min_conditional_risk(&self, eta: f64, tol: f64) -> Result<f64> {
        check_eta(eta)?;
        check_tol(tol)?;
        let f = |alpha: f64| self.cond_raw(eta, alpha);
        let refined = scan_and_refine(&f, -SCORE_BOUND, SCORE_BOUND, SCAN_POINTS, tol);
        let candidates = [
            refined,
            f(0.0),
            self.cond_raw(eta, f64::NEG_INFINITY),
            self.cond_raw(eta, f64::INFINITY),
        ];
        Ok(candidates.into_iter().fold(f64::INFINITY, f64::min))
    }

    /// Minimal conditional risk under forced misclassification: the
    /// infimum of `C(eta, alpha)` over scores with `(2 eta - 1) alpha <= 0`.
    pub fn min_misclassify_risk(&self, eta: f64, tol: f64) -> Result<f64> {
        check_eta(eta)?;
        check_tol(tol)?;
        if eta == 0.5 {
            return self.min_conditional_risk(eta, tol);
        }
        let f = |alpha: f64| self.cond_raw(eta, alpha);
        let half_points = SCAN_POINTS / 2 + 1;
        let (lo, hi, limit) = if eta > 0.5 {
            (-SCORE_BOUND, 0.0, self.cond_raw(eta, f64::NEG_INFINITY))
        } else {
            (0.0, SCORE_BOUND, self.cond_raw(eta, f64::INFINITY))
        };
        let refined = scan_and_refine(&f, lo, hi, half_points, tol);
        Ok(refined.min(f(0.0)).min(limit))
    }

    /// Smallest minimizing score of the conditional risk, over extended
    /// reals: `-inf` when the limit at `-inf` matches the minimum within
    /// `tol`, otherwise the leftmost score whose risk is within `tol` of
    /// the minimum, or `+inf` when the minimum is only approached to the
    /// right of the truncated search interval.
    pub fn smallest_minimizer(&self, eta: f64, tol: f64) -> Result<f64> {
        check_eta(eta)?;
        check_tol(tol)?;
        let threshold = self.min_conditional_risk(eta, tol)? + tol;
        if self.cond_raw(eta, f64::NEG_INFINITY) <= threshold {
            return Ok(f64::NEG_INFINITY);
        }
        let f = |alpha: f64| self.cond_raw(eta, alpha);
        let step = 2.0 * SCORE_BOUND / (SCAN_POINTS - 1) as f64;
        let grid = |k: usize| -SCORE_BOUND + k as f64 * step;
        let mut first_inside = None;
        let mut best_k = 0;
        let mut best = f64::INFINITY;
        for k in 0..SCAN_POINTS {
            let v = f(grid(k));
            if first_inside.is_none() && v <= threshold {
                first_inside = Some(k);
            }
            if v < best {
                best = v;
                best_k = k;
            }
        }
        let bracket = match first_inside {
            Some(0) => None,
            Some(k) => Some((grid(k - 1), grid(k))),
            None => {
                // The minimum can sit in a basin narrower than the scan
                // step; refine the best cell before giving up on finite
                // attainment.
                let a = grid(best_k.saturating_sub(1));
                let b = grid((best_k + 1).min(SCAN_POINTS - 1));
                let (xmin, fmin) = golden_min(&f, a, b, tol);
                if fmin > threshold {
                    return Ok(f64::INFINITY);
                }
                // Every scanned point is above the threshold here, so
                // the nearest grid point to the left brackets from above.
                let mut k = ((xmin + SCORE_BOUND) / step) as usize;
                while grid(k) >= xmin {
                    k -= 1;
                }
                Some((grid(k), xmin))
            }
        };
        let leftmost = match bracket {
            None => -SCORE_BOUND,
            Some((mut above, mut inside)) => {
                // Bisect for the crossing of the threshold level; the
                // left end stays strictly above it, the right at or below.
                while inside - above > tol * 1e-3 {
                    let mid = 0.5 * (above + inside);
                    if f(mid) <= threshold {
                        inside = mid;
                    } else {
                        above = mid;
                    }
                }
                inside
            }
        };
        // A risk still strictly decreasing well past the found point
        // means the infimum is approached, not attained, on the right.
        let tail = f(leftmost + DESCENT_PROBE) - f(leftmost + 2.0 * DESCENT_PROBE);
        if tail > 1e-12 * threshold.abs().max(1.0) {
            return Ok(f64::INFINITY);
        }
        Ok(leftmost)
    }

    /// Grid-certified consistency check.
    ///
    /// Samples the excess margin `phi(0) - C*(eta)` on an eta grid; the
    /// flags report strict positivity beyond `tol` away from (and at)
    /// `eta = 1/2` respectively. Certificates are only as fine as the
    /// grid, which the report records.
    pub fn check_consistency(&self, tol: f64) -> Result<ConsistencyReport> {
        check_tol(tol)?;
        let samples = 201;
        let at_zero = self.value_at_zero();
        let mut margins = Vec::with_capacity(samples);
        for k in 0..samples {
            let eta = k as f64 / (samples - 1) as f64;
            margins.push(at_zero - self.min_conditional_risk(eta, tol)?);
        }
        let mid = samples / 2;
        let consistent = margins
            .iter()
            .enumerate()
            .all(|(k, &m)| k == mid || m > tol);
        let adversarially_consistent = margins[mid] > tol;
        // The margin is symmetric about 1/2 and non-increasing on the
        // lower half; only that half is recorded.
        let knots = (0..=mid)
            .map(|k| (k as f64 / (samples - 1) as f64, margins[k]))
            .collect();
        Ok(ConsistencyReport {
            loss: self.name(),
            consistent,
            adversarially_consistent,
            margin_curve: MonotoneCurve::nonincreasing(knots)?,
            eta_samples: samples,
            tol,
        })
    }
}

/// Result of [`Loss::check_consistency`].
#[derive(Debug, Clone, Serialize)]
pub struct ConsistencyReport {
    pub loss: String,
    /// Excess margin strictly positive at every sampled `eta != 1/2`.
    pub consistent: bool,
    /// Excess margin strictly positive at `eta = 1/2`.
    pub adversarially_consistent: bool,
    /// `eta -> phi(0) - C*(eta)` on `[0, 1/2]`; symmetric about 1/2.
    pub margin_curve: MonotoneCurve,
    /// Number of eta samples across `[0, 1]`.
    pub eta_samples: usize,
    pub tol: f64,
}

/// The calibration transform `Psi(theta) = phi(0) - C*((1 + theta) / 2)`
/// tabulated once on a fine knot grid, with its left-inverse.
///
/// The transform is the link between excess conditional risks; it is
/// meaningful as an excess-risk gauge when `C*(1/2) = phi(0)`, but the
/// table is built for any admissible loss.
#[derive(Debug, Clone, Serialize)]
pub struct CalibrationMap {
    loss: String,
    curve: MonotoneCurve,
    tol: f64,
}

impl CalibrationMap {
    /// Tabulates the transform for `loss`.
    pub fn new(loss: &Loss, tol: f64) -> Result<Self> {
        check_tol(tol)?;
        let at_zero = loss.value_at_zero();
        let mut knots = Vec::with_capacity(PSI_KNOTS);
        for k in 0..PSI_KNOTS {
            let theta = k as f64 / (PSI_KNOTS - 1) as f64;
            let eta = 0.5 * (1.0 + theta);
            knots.push((theta, at_zero - loss.min_conditional_risk(eta, tol)?));
        }
        Ok(CalibrationMap {
            loss: loss.name(),
            curve: MonotoneCurve::nondecreasing(knots)?,
            tol,
        })
    }

    /// Evaluates `Psi` at `theta` in `[0, 1]`.
    pub fn psi(&self, theta: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&theta) {
            return Err(Error::Domain {
                what: "calibration transform",
                value: theta,
                lo: 0.0,
                hi: 1.0,
            });
        }
        Ok(self.curve.eval(theta))
    }

    /// Leftmost `theta` with `Psi(theta) >= y`, for `y` in `[0, Psi(1)]`.
    ///
    /// Values below `Psi(0)` map to 0: the transform starts above zero
    /// exactly for losses whose minimal risk at `eta = 1/2` stays below
    /// `phi(0)`, and every such level is first reached at the left edge.
    pub fn psi_inverse(&self, y: f64) -> Result<f64> {
        let top = self.curve.eval(1.0);
        if !(0.0..=top + 1e-12).contains(&y) {
            return Err(Error::Domain {
                what: "calibration inverse",
                value: y,
                lo: 0.0,
                hi: top,
            });
        }
        if y <= self.curve.eval(0.0) {
            return Ok(0.0);
        }
        self.curve.inverse_leftmost(y.min(top))
    }

    /// The tabulated transform.
    pub fn curve(&self) -> &MonotoneCurve {
        &self.curve
    }

    /// Name of the loss the table was built for.
    pub fn loss_name(&self) -> &str {
        &self.loss
    }

    /// Tolerance the table was built with.
    pub fn tol(&self) -> f64 {
        self.tol
    }
}

fn check_eta(eta: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::EtaOutOfRange { eta });
    }
    Ok(())
}

fn check_tol(tol: f64) -> Result<()> {
    if !(tol.is_finite() && tol > 0.0) {
        return Err(Error::Precondition {
            reason: format!("tolerance {tol} must be positive and finite"),
        });
    }
    Ok(())
}

/// Coarse scan of `f` on `points` equispaced values in `[lo, hi]`,
/// followed by golden-section refinement of the best bracketing cell.
fn scan_and_refine<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64, points: usize, tol: f64) -> f64 {
    let step = (hi - lo) / (points - 1) as f64;
    let mut best_k = 0;
    let mut best = f64::INFINITY;
    for k in 0..points {
        let v = f(lo + k as f64 * step);
        if v < best {
            best = v;
            best_k = k;
        }
    }
    let a = lo + best_k.saturating_sub(1) as f64 * step;
    let b = lo + (best_k + 1).min(points - 1) as f64 * step;
    let (_, refined) = golden_min(f, a, b, tol);
    refined.min(best)
}

/// Golden-section minimization of a unimodal-enough scalar function.
/// Returns the best probed point and its value.
fn golden_min<F: Fn(f64) -> f64>(f: &F, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while b - a > tol {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = f(x2);
        }
    }
    if f1 <= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}
