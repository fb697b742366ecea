//! Evaluable surrogate-to-classification risk bounds: linear constants
//! under a posterior margin, their slack-corrected variants, and concave
//! transforms assembled from a calibration map and a distance envelope.
//!
//! Every builder returns a `BoundSpec` whose `eval` maps an excess
//! adversarial surrogate risk to an upper bound on the excess adversarial
//! classification risk. Linear kinds carry a constant, concave kinds a
//! tabulated nondecreasing curve; either may add a constant offset for
//! mass the transform cannot control.

use serde::Serialize;
use serde_json::json;

use crate::attack::{mass_where_eta, AttackPair};
use crate::curve::{Direction, MonotoneCurve};
use crate::envelope::EnvelopeCdf;
use crate::error::{Error, Result};
use crate::loss::{CalibrationMap, Loss};

/// Euler's number, used by the entropy-shaped term of the concave curves.
const E: f64 = std::f64::consts::E;

/// Ratio of consecutive points in the geometric knot ladder near zero.
const LADDER_RATIO: f64 = 1.189_207_115_002_721;

/// Relative depth of the geometric ladder below the curve's right edge.
const LADDER_FLOOR: f64 = 1e-12;

/// Uniform knot count laid over the full tabulation range.
const UNIFORM_KNOTS: usize = 1024;

/// Which bound a `BoundSpec` encodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    /// Linear in the surrogate excess under a posterior margin.
    MassartLinear,
    /// Linear plus the mass of the posterior band the margin misses.
    MassartSlack,
    /// Concave transform built from a distance envelope.
    Concave,
    /// Concave transform on the strict envelope plus half the atom mass.
    ConcaveAtom,
    /// Linear constant for the non-adversarial risks.
    NonadvLinear,
    /// One member of the exponent-parameterized concave family.
    ProtoR,
}

/// The two linear constants attached to a posterior margin `alpha`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct MassartConstants {
    /// Constant the inequality is certified with, `1 / gap`.
    pub constant: f64,
    /// Smaller constant believed tight, `(1/2 + alpha) / gap`.
    pub conjectured: f64,
    /// Posterior margin the constants were computed for.
    pub alpha: f64,
    /// Denominator `phi(0) - C*(1/2 - alpha)`.
    pub gap: f64,
}

/// An evaluable bound on excess classification risk.
#[derive(Debug, Clone, Serialize)]
pub struct BoundSpec {
    pub kind: BoundKind,
    /// Name of the loss the bound was built for.
    pub loss: String,
    /// Posterior margin, for the linear kinds.
    pub alpha: Option<f64>,
    /// Family exponent, for `ProtoR`.
    pub r: Option<f64>,
    /// Certified linear constant, for the linear kinds.
    pub constant: Option<f64>,
    /// Conjectured tight constant, reported alongside `constant`.
    pub conjectured_constant: Option<f64>,
    /// Tabulated transform, for the concave kinds.
    pub curve: Option<MonotoneCurve>,
    /// Distance envelope the curve was built from.
    pub envelope: Option<EnvelopeCdf>,
    /// Constant added to every evaluation.
    pub additive_offset: f64,
}

impl BoundSpec {
    /// Upper bound on the excess classification risk at surrogate excess
    /// `z`. Negative `z` (numerical noise around an optimal classifier)
    /// evaluates at zero.
    pub fn eval(&self, z: f64) -> f64 {
        let z = z.max(0.0);
        let base = match self.kind {
            BoundKind::MassartLinear | BoundKind::MassartSlack | BoundKind::NonadvLinear => {
                self.constant.map_or(f64::NAN, |c| c * z)
            }
            BoundKind::Concave | BoundKind::ConcaveAtom | BoundKind::ProtoR => {
                self.curve.as_ref().map_or(f64::NAN, |c| c.eval(z))
            }
        };
        base + self.additive_offset
    }

    /// Compact report: kind, constants, offset, and curve knots.
    pub fn to_json(&self) -> serde_json::Value {
        let knots = self
            .curve
            .as_ref()
            .map(|c| c.knots().map(|(x, y)| json!([x, y])).collect::<Vec<_>>());
        json!({
            "kind": self.kind,
            "loss": self.loss,
            "alpha": self.alpha,
            "r": self.r,
            "constant": self.constant,
            "conjectured_constant": self.conjectured_constant,
            "additive_offset": self.additive_offset,
            "curve": knots,
        })
    }
}

fn massart_core(loss: &Loss, alpha: f64, tol: f64) -> Result<MassartConstants> {
    if !(0.0..=0.5).contains(&alpha) {
        return Err(Error::Domain {
            what: "posterior margin",
            value: alpha,
            lo: 0.0,
            hi: 0.5,
        });
    }
    let gap = loss.value_at_zero() - loss.min_conditional_risk(0.5 - alpha, tol)?;
    if !(gap > tol) {
        return Err(Error::DegenerateBound {
            reason: format!(
                "phi(0) - C*({}) = {gap:.3e} is not above tol {tol:.1e} for loss {}; \
                 the linear constant diverges",
                0.5 - alpha,
                loss.name()
            ),
        });
    }
    Ok(MassartConstants {
        constant: 1.0 / gap,
        conjectured: (0.5 + alpha) / gap,
        alpha,
        gap,
    })
}

/// Linear constants for the adversarial risks under posterior margin
/// `alpha`: every distribution of optimal attacks with `|eta* - 1/2| >=
/// alpha` admits `excess classification <= constant * excess surrogate`.
pub fn massart_constant(loss: &Loss, alpha: f64, tol: f64) -> Result<MassartConstants> {
    massart_core(loss, alpha, tol)
}

/// Same constants for the non-adversarial risks (`eps = 0`), exposed as
/// its own entry point.
pub fn prop4_bound(loss: &Loss, alpha: f64, tol: f64) -> Result<MassartConstants> {
    massart_core(loss, alpha, tol)
}

fn linear_spec(kind: BoundKind, loss: &Loss, c: MassartConstants, offset: f64) -> BoundSpec {
    BoundSpec {
        kind,
        loss: loss.name(),
        alpha: Some(c.alpha),
        r: None,
        constant: Some(c.constant),
        conjectured_constant: Some(c.conjectured),
        curve: None,
        envelope: None,
        additive_offset: offset,
    }
}

/// `massart_constant` packaged as an evaluable bound with zero offset.
pub fn massart_bound(loss: &Loss, alpha: f64, tol: f64) -> Result<BoundSpec> {
    Ok(linear_spec(
        BoundKind::MassartLinear,
        loss,
        massart_core(loss, alpha, tol)?,
        0.0,
    ))
}

/// `prop4_bound` packaged as an evaluable bound for the plain risks.
pub fn nonadv_bound(loss: &Loss, alpha: f64, tol: f64) -> Result<BoundSpec> {
    Ok(linear_spec(
        BoundKind::NonadvLinear,
        loss,
        massart_core(loss, alpha, tol)?,
        0.0,
    ))
}

/// Linear bound plus the attacked mass the margin misses: the offset is
/// `(1/2 + alpha)` times the mass with `|eta* - 1/2|` strictly below
/// `alpha`, so a margin that holds everywhere adds nothing. Attacked
/// masses enter unnormalized, matching the risk integrals.
pub fn massart_bound_with_slack(
    loss: &Loss,
    alpha: f64,
    attack: &AttackPair,
    tol: f64,
) -> Result<BoundSpec> {
    let c = massart_core(loss, alpha, tol)?;
    let band = mass_where_eta(&attack.attacked, |eta| (eta - 0.5).abs() < alpha);
    Ok(linear_spec(
        BoundKind::MassartSlack,
        loss,
        c,
        (0.5 + alpha) * band,
    ))
}

fn check_balanced_at_half(loss: &Loss, tol: f64) -> Result<f64> {
    let phi0 = loss.value_at_zero();
    let gap = phi0 - loss.min_conditional_risk(0.5, tol)?;
    if gap.abs() > 10.0 * tol + 1e-9 {
        return Err(Error::Precondition {
            reason: format!(
                "loss {} has phi(0) - C*(1/2) = {gap:.3e}; the concave transform \
                 needs C*(1/2) = phi(0)",
                loss.name()
            ),
        });
    }
    Ok(phi0)
}

/// Knot positions for a curve on `[0, zcap]`: a geometric ladder into the
/// left endpoint, a uniform cover, and caller-supplied breakpoints.
fn dense_zs(zcap: f64, pullbacks: &[f64]) -> Vec<f64> {
    let mut zs = vec![0.0, zcap];
    let mut z = zcap;
    while z > zcap * LADDER_FLOOR {
        zs.push(z);
        z /= LADDER_RATIO;
    }
    for j in 1..UNIFORM_KNOTS {
        zs.push(zcap * j as f64 / UNIFORM_KNOTS as f64);
    }
    zs.extend(
        pullbacks
            .iter()
            .copied()
            .filter(|z| z.is_finite() && *z > 0.0 && *z < zcap),
    );
    zs.sort_by(f64::total_cmp);
    let merge = (zcap * 1e-14).max(1e-300);
    let mut out: Vec<f64> = Vec::with_capacity(zs.len());
    for z in zs {
        if out.last().is_none_or(|&last| z - last > merge) {
            out.push(z);
        }
    }
    out
}

/// Tabulates `value` at each knot and takes the running maximum, making
/// the result nondecreasing while staying an upper bound pointwise.
fn tabulate_nondecreasing(
    zs: &[f64],
    mut value: impl FnMut(f64) -> Result<f64>,
) -> Result<MonotoneCurve> {
    let mut knots = Vec::with_capacity(zs.len());
    let mut best = f64::NEG_INFINITY;
    for &z in zs {
        best = best.max(value(z)?);
        knots.push((z, best));
    }
    MonotoneCurve::nondecreasing(knots)
}

/// Entropy-shaped factor `min(1, sqrt(-e H ln H))`, with the limit value
/// 0 at both `H = 0` and `H = 1`.
fn entropy_term(h: f64) -> f64 {
    let h = h.clamp(0.0, 1.0);
    if h <= 0.0 {
        return 0.0;
    }
    (-E * h * h.ln()).max(0.0).sqrt().min(1.0)
}

/// The inverse calibration transform truncated to its domain.
fn lambda(cal: &CalibrationMap, cap: f64, y: f64) -> Result<f64> {
    cal.psi_inverse(y.min(cap))
}

fn concave_curve(
    cal: &CalibrationMap,
    phi0: f64,
    env_curve: &MonotoneCurve,
) -> Result<MonotoneCurve> {
    let cap = phi0.min(cal.curve().eval(1.0));
    if !(cap > 0.0) {
        return Err(Error::Precondition {
            reason: format!(
                "calibration transform for {} is flat; no concave bound exists",
                cal.loss_name()
            ),
        });
    }
    let mut pullbacks: Vec<f64> = env_curve
        .knots()
        .map(|(x, _)| cal.psi(x.clamp(0.0, 1.0)).map(|y| 4.0 * y))
        .collect::<Result<_>>()?;
    if let Ok(x) = env_curve.inverse_leftmost(1.0 / E) {
        pullbacks.push(4.0 * cal.psi(x.clamp(0.0, 1.0))?);
    }
    let zs = dense_zs(4.0 * cap, &pullbacks);
    tabulate_nondecreasing(&zs, |z| {
        let lam = lambda(cal, cap, z / 4.0)?;
        Ok(4.0 * (lam + entropy_term(env_curve.eval(lam))))
    })
}

/// Concave transform of the surrogate excess: `z` maps to
/// `4 (lam + min(1, sqrt(-e H(lam) ln H(lam))))` with
/// `lam = Psi^{-1}(min(z/4, phi(0)))` and `H` the concave envelope of the
/// posterior-distance cdf. Requires a loss with `C*(1/2) = phi(0)` and an
/// envelope with no detected mass at one half; distributions with a real
/// atom go through `phi_tilde_with_atom` instead.
pub fn phi_tilde(loss: &Loss, env: &EnvelopeCdf, tol: f64) -> Result<BoundSpec> {
    let phi0 = check_balanced_at_half(loss, tol)?;
    if env.atom_at_half > tol.max(1e-12) {
        return Err(Error::Precondition {
            reason: format!(
                "envelope carries mass {:.3e} at eta = 1/2; use the atom-aware \
                 variant for this distribution",
                env.atom_at_half
            ),
        });
    }
    let cal = CalibrationMap::new(loss, tol)?;
    let curve = concave_curve(&cal, phi0, &env.envelope)?;
    Ok(BoundSpec {
        kind: BoundKind::Concave,
        loss: loss.name(),
        alpha: None,
        r: None,
        constant: None,
        conjectured_constant: None,
        curve: Some(curve),
        envelope: Some(env.clone()),
        additive_offset: 0.0,
    })
}

/// Concave transform on the strict envelope, plus half the atom mass as
/// a constant offset. The envelope must have been built with
/// `strict = true` so the atom is excluded from the cdf.
pub fn phi_tilde_with_atom(loss: &Loss, env: &EnvelopeCdf, tol: f64) -> Result<BoundSpec> {
    if !env.strict {
        return Err(Error::Precondition {
            reason: "atom-aware bound needs the strict distance cdf; rebuild the \
                     envelope with strict = true"
                .to_string(),
        });
    }
    let phi0 = check_balanced_at_half(loss, tol)?;
    let cal = CalibrationMap::new(loss, tol)?;
    let curve = concave_curve(&cal, phi0, &env.envelope)?;
    Ok(BoundSpec {
        kind: BoundKind::ConcaveAtom,
        loss: loss.name(),
        alpha: None,
        r: None,
        constant: None,
        conjectured_constant: None,
        curve: Some(curve),
        envelope: Some(env.clone()),
        additive_offset: env.atom_at_half / 2.0,
    })
}

/// One member of the exponent family: `z` maps to
/// `4 sqrt(H(lam(z/4)/2)^r / (1-r)) + 2 lam(z/2)` with
/// `lam(y) = Psi^{-1}(min(y, phi(0)))`. Valid for `r` strictly inside
/// `(0, 1)` and a loss with `C*(1/2) = phi(0)`.
pub fn proto_bound_r(loss: &Loss, env: &EnvelopeCdf, r: f64, tol: f64) -> Result<BoundSpec> {
    if !(r > 0.0 && r < 1.0) || !r.is_finite() {
        return Err(Error::Domain {
            what: "exponent r",
            value: r,
            lo: 0.0,
            hi: 1.0,
        });
    }
    let phi0 = check_balanced_at_half(loss, tol)?;
    let cal = CalibrationMap::new(loss, tol)?;
    let cap = phi0.min(cal.curve().eval(1.0));
    if !(cap > 0.0) {
        return Err(Error::Precondition {
            reason: format!(
                "calibration transform for {} is flat; no concave bound exists",
                loss.name()
            ),
        });
    }
    let mut pullbacks = Vec::new();
    for (x, _) in env.envelope.knots() {
        pullbacks.push(4.0 * cal.psi((2.0 * x).clamp(0.0, 1.0))?);
        pullbacks.push(2.0 * cal.psi(x.clamp(0.0, 1.0))?);
    }
    let zs = dense_zs(4.0 * cap, &pullbacks);
    let env_curve = env.envelope.clone();
    let curve = tabulate_nondecreasing(&zs, |z| {
        let quarter = lambda(&cal, cap, z / 4.0)?;
        let half = lambda(&cal, cap, z / 2.0)?;
        let h = env_curve.eval(0.5 * quarter).clamp(0.0, 1.0);
        Ok(4.0 * (h.powf(r) / (1.0 - r)).sqrt() + 2.0 * half)
    })?;
    Ok(BoundSpec {
        kind: BoundKind::ProtoR,
        loss: loss.name(),
        alpha: None,
        r: Some(r),
        constant: None,
        conjectured_constant: None,
        curve: Some(curve),
        envelope: Some(env.clone()),
        additive_offset: 0.0,
    })
}

/// Minimum of `a^r / (1 - r)` over the exponent range.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ROptimum {
    /// The minimal value: 1 when `a > 1/e`, else `-e a ln a`.
    pub value: f64,
    /// Where the minimum is attained: 0 when `a > 1/e`, else
    /// `1 + 1/ln a`.
    pub r_star: f64,
}

/// Closed-form minimum of `r -> a^r / (1 - r)` over `[0, 1)` for
/// `a` in `(0, 1]`.
pub fn optimize_r(a: f64) -> Result<ROptimum> {
    if !(a > 0.0 && a <= 1.0) {
        return Err(Error::Domain {
            what: "optimizer argument",
            value: a,
            lo: 0.0,
            hi: 1.0,
        });
    }
    if a > (-1.0f64).exp() {
        Ok(ROptimum {
            value: 1.0,
            r_star: 0.0,
        })
    } else {
        Ok(ROptimum {
            value: -E * a * a.ln(),
            r_star: 1.0 + 1.0 / a.ln(),
        })
    }
}

fn check_concave_knots(curve: &MonotoneCurve, label: &'static str) -> Result<()> {
    if curve.direction() != Direction::NonDecreasing {
        return Err(Error::Precondition {
            reason: format!("{label} must be nondecreasing"),
        });
    }
    let knots: Vec<(f64, f64)> = curve.knots().collect();
    let mut prev = f64::INFINITY;
    for w in knots.windows(2) {
        let slope = (w[1].1 - w[0].1) / (w[1].0 - w[0].0);
        let slack = 1e-9
            * (1.0
                + slope
                    .abs()
                    .max(if prev.is_finite() { prev.abs() } else { 0.0 }));
        if slope > prev + slack {
            return Err(Error::Precondition {
                reason: format!(
                    "{label} must be concave: slope rises from {prev:.6} to {slope:.6} \
                     at x = {:.6}",
                    w[0].0
                ),
            });
        }
        prev = slope;
    }
    Ok(())
}

/// General concave assembly `z -> 4 sqrt(K G(z/4)) + 2 Phi(z/2)` for a
/// caller-certified conditional-risk transform `Phi` and a concave
/// weight `G` with `G(0) = 0`. Both curves are checked for concavity on
/// their knots; that `Phi` dominates the pointwise conditional-risk gap
/// is the caller's obligation.
pub fn general_concave_bound(
    phi_curve: &MonotoneCurve,
    g: &MonotoneCurve,
    k: f64,
) -> Result<BoundSpec> {
    if !(k > 0.0) || !k.is_finite() {
        return Err(Error::Domain {
            what: "integral constant",
            value: k,
            lo: 0.0,
            hi: f64::INFINITY,
        });
    }
    check_concave_knots(g, "weight curve")?;
    check_concave_knots(phi_curve, "risk transform")?;
    let g0 = g.eval(0.0);
    if g0.abs() > 1e-9 {
        return Err(Error::Precondition {
            reason: format!("weight curve must vanish at zero, got {g0:.3e}"),
        });
    }
    let zcap = (4.0 * g.domain().1).max(2.0 * phi_curve.domain().1);
    let mut pullbacks = Vec::new();
    for (x, _) in g.knots() {
        pullbacks.push(4.0 * x);
    }
    for (x, _) in phi_curve.knots() {
        pullbacks.push(2.0 * x);
    }
    let zs = dense_zs(zcap, &pullbacks);
    let curve = tabulate_nondecreasing(&zs, |z| {
        Ok(4.0 * (k * g.eval(z / 4.0).max(0.0)).sqrt() + 2.0 * phi_curve.eval(z / 2.0))
    })?;
    Ok(BoundSpec {
        kind: BoundKind::Concave,
        loss: "general".to_string(),
        alpha: None,
        r: None,
        constant: None,
        conjectured_constant: None,
        curve: Some(curve),
        envelope: None,
        additive_offset: 0.0,
    })
}
