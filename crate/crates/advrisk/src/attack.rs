//! Optimal-attack construction for one-dimensional distribution pairs.
//!
//! A shift attack moves the whole class-1 distribution left by `eps` and
//! the whole class-0 distribution right by `eps`, which is the worst case
//! for monotone posteriors. The module also builds the three reference
//! families (separated uniforms, noisy uniforms, Gaussians), the witness
//! scores induced by a given attack, and a complementary-slackness check
//! that certifies a primal/dual pair jointly optimal up to grid slack.

use serde::Serialize;
use serde_json::json;

use crate::error::{Error, Result};
use crate::grid::{Grid, GridDistribution, GridFunction};
use crate::loss::Loss;
use crate::risk;

/// Relative tolerance for lengths that must be whole numbers of cells.
const CELL_ALIGN_TOL: f64 = 1e-9;

/// Truncation radius for Gaussian tails, in standard deviations.
const GAUSSIAN_RADIUS: f64 = 8.0;

/// A source distribution pair together with its shifted counterpart.
#[derive(Debug, Clone)]
pub struct AttackPair {
    /// Distribution pair under attack.
    pub source: GridDistribution,
    /// Result of displacing each class by its shift.
    pub attacked: GridDistribution,
    /// Displacement applied to every class-1 point.
    pub shift1: f64,
    /// Displacement applied to every class-0 point.
    pub shift0: f64,
    /// Posterior of the attacked pair, extended off the mass support.
    pub eta_star: GridFunction,
    /// Perturbation radius the shifts exhaust.
    pub eps: f64,
}

impl AttackPair {
    /// CSV rendering of the source pair.
    pub fn source_csv(&self) -> String {
        self.source.to_csv()
    }

    /// CSV rendering of the attacked pair.
    pub fn attacked_csv(&self) -> String {
        self.attacked.to_csv()
    }

    /// Manifest with the shifts, the radius, and the per-class totals.
    pub fn manifest_json(&self) -> serde_json::Value {
        json!({
            "eps": self.eps,
            "shift0": self.shift0,
            "shift1": self.shift1,
            "spacing": self.source.grid().spacing(),
            "source_total0": self.source.total_mass0(),
            "source_total1": self.source.total_mass1(),
            "attacked_total0": self.attacked.total_mass0(),
            "attacked_total1": self.attacked.total_mass1(),
        })
    }
}

/// Displaces class 1 left and class 0 right by `eps`, node for node, so
/// that the attacked pair satisfies `mass1(x) = source mass1(x + eps)` and
/// `mass0(x) = source mass0(x - eps)`. The grid must already be extended
/// by `eps` on both sides; mass that would fall off the grid is an error.
pub fn shift_attack(d: &GridDistribution, eps: f64) -> Result<AttackPair> {
    let grid = *d.grid();
    let w = grid.steps_for(eps)?;
    let n = grid.count();
    if w >= n {
        return Err(Error::Precondition {
            reason: format!("shift of {w} steps empties a grid of {n} nodes"),
        });
    }
    for j in 0..w {
        if d.mass1()[j] > 0.0 {
            return Err(Error::Precondition {
                reason: format!(
                    "class-1 mass at {} would shift off the grid; extend the grid by eps first",
                    grid.node(j)
                ),
            });
        }
        if d.mass0()[n - 1 - j] > 0.0 {
            return Err(Error::Precondition {
                reason: format!(
                    "class-0 mass at {} would shift off the grid; extend the grid by eps first",
                    grid.node(n - 1 - j)
                ),
            });
        }
    }
    let mut mass0 = vec![0.0; n];
    let mut mass1 = vec![0.0; n];
    for k in 0..n {
        if k + w < n {
            mass1[k] = d.mass1()[k + w];
        }
        if k >= w {
            mass0[k] = d.mass0()[k - w];
        }
    }
    let attacked = GridDistribution::new_unnormalized(grid, mass0, mass1)?;
    let eta_star = risk::eta_star(&attacked);
    Ok(AttackPair {
        source: d.clone(),
        attacked,
        shift1: -eps,
        shift0: eps,
        eta_star,
        eps,
    })
}

/// Better of the unmoved and fully shifted pairs under the surrogate dual
/// objective, with the full budget recorded either way. The shift wins on
/// monotone posteriors; leaving the pair unmoved wins when the posterior
/// margin survives the budget. Neither candidate is optimal in general:
/// attacks that pool mass from both classes onto shared points can score
/// higher still, so the returned value is a lower bound on the dual optimum.
pub fn dual_best_attack(
    d: &GridDistribution,
    loss: &Loss,
    eps: f64,
    tol: f64,
) -> Result<AttackPair> {
    let shifted = shift_attack(d, eps)?;
    if eps == 0.0 {
        return Ok(shifted);
    }
    let mut unmoved = shift_attack(d, 0.0)?;
    unmoved.eps = eps;
    let shifted_value = risk::dual_surrogate_objective(&shifted.attacked, loss, tol)?.value;
    let unmoved_value = risk::dual_surrogate_objective(&unmoved.attacked, loss, tol)?.value;
    if unmoved_value > shifted_value {
        Ok(unmoved)
    } else {
        Ok(shifted)
    }
}

/// Scores that minimize the conditional risk of the attacked posterior at
/// every node, taking the smallest minimizer throughout. Infinite scores
/// appear wherever the posterior is degenerate and the loss calls for
/// them.
pub fn primal_witness(attack: &AttackPair, loss: &Loss, tol: f64) -> Result<GridFunction> {
    let values = attack
        .eta_star
        .values()
        .iter()
        .map(|&eta| loss.smallest_minimizer(eta, tol))
        .collect::<Result<Vec<_>>>()?;
    GridFunction::new(*attack.attacked.grid(), values)
}

/// Outcome of the complementary-slackness check for a primal/dual pair.
#[derive(Debug, Clone, Serialize)]
pub struct SlacknessReport {
    /// Distance between each class's worst-case loss under the source and
    /// its plain loss under the attack, summed over classes.
    pub cond1_gap: f64,
    /// Largest excess of the scores' conditional risk over the optimal
    /// conditional risk across attacked mass nodes.
    pub cond2_maxviol: f64,
    /// Discretization allowance added to the tolerance.
    pub slack: f64,
    /// Tolerance requested by the caller.
    pub tol: f64,
    /// Whether both conditions hold within tolerance plus slack.
    pub pass: bool,
}

/// Checks the two optimality conditions linking scores `f_star` and the
/// attack: the attack must realize the worst case of `f_star` class by
/// class, and `f_star` must minimize the conditional risk at every
/// attacked mass node. Both are allowed `tol` plus a grid slack.
pub fn check_complementary_slackness(
    d: &GridDistribution,
    loss: &Loss,
    f_star: &GridFunction,
    attack: &AttackPair,
    tol: f64,
) -> Result<SlacknessReport> {
    risk::check_feasibility(d, &attack.attacked, attack.eps)?;
    let (a0, a1) = risk::adv_surrogate_risk_by_class(d, loss, f_star, attack.eps)?;
    let (b0, b1) = risk::surrogate_risk_by_class(&attack.attacked, loss, f_star)?;
    let part = |a: f64, b: f64| {
        if a.is_finite() && b.is_finite() {
            (a - b).abs()
        } else {
            f64::INFINITY
        }
    };
    let cond1_gap = part(a0, b0) + part(a1, b1);
    let mut cond2_maxviol = 0.0_f64;
    for (k, _, m0, m1) in attack.attacked.atoms() {
        let eta = m1 / (m0 + m1);
        let held = loss.conditional_risk(eta, f_star.value_at(k))?;
        let best = loss.min_conditional_risk(eta, tol)?;
        cond2_maxviol = cond2_maxviol.max(held - best);
    }
    let slack = risk::slack_budget(d.grid().spacing(), d.total_mass(), risk::SLACK_KAPPA);
    let pass = cond1_gap <= tol + slack && cond2_maxviol <= tol + slack;
    Ok(SlacknessReport {
        cond1_gap,
        cond2_maxviol,
        slack,
        tol,
        pass,
    })
}

/// Total mass sitting at nodes whose posterior satisfies the predicate.
pub fn mass_where_eta(attack: &GridDistribution, pred: impl Fn(f64) -> bool) -> f64 {
    attack
        .atoms()
        .filter(|&(_, _, m0, m1)| pred(m1 / (m0 + m1)))
        .map(|(_, _, m0, m1)| m0 + m1)
        .fold(0.0, |acc, m| acc + m)
}

/// Midpoint-cell grid over the two unit intervals `[-1-delta, -delta]`
/// and `[delta, 1+delta]`, returned with the cell counts per interval and
/// across the central gap.
fn two_interval_grid(delta: f64, spacing: f64) -> Result<(Grid, usize, usize)> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::Domain {
            what: "delta",
            value: delta,
            lo: 0.0,
            hi: f64::INFINITY,
        });
    }
    if !(spacing > 0.0 && spacing <= 1.0) {
        return Err(Error::Domain {
            what: "spacing",
            value: spacing,
            lo: 0.0,
            hi: 1.0,
        });
    }
    let per = (1.0 / spacing).round();
    if (per * spacing - 1.0).abs() > CELL_ALIGN_TOL {
        return Err(Error::Precondition {
            reason: format!("spacing {spacing} must divide the interval length 1 evenly"),
        });
    }
    let gap = (2.0 * delta / spacing).round();
    if (gap * spacing - 2.0 * delta).abs() > CELL_ALIGN_TOL * (1.0 + 2.0 * delta) {
        return Err(Error::Precondition {
            reason: format!(
                "spacing {spacing} must divide the class gap {} evenly",
                2.0 * delta
            ),
        });
    }
    let per = per as usize;
    let gap = gap as usize;
    let grid = Grid::new(-1.0 - delta + 0.5 * spacing, spacing, 2 * per + gap)?;
    Ok((grid, per, gap))
}

/// Separated pair: class 0 uniform on `[-1-delta, -delta]`, class 1
/// uniform on `[delta, 1+delta]`, half the mass each, atomized at cell
/// midpoints. The spacing must divide both the interval length and the
/// gap.
pub fn make_realizable(delta: f64, spacing: f64) -> Result<GridDistribution> {
    let (grid, per, gap) = two_interval_grid(delta, spacing)?;
    let cell = 0.5 / per as f64;
    let mut mass0 = vec![0.0; grid.count()];
    let mut mass1 = vec![0.0; grid.count()];
    for k in 0..per {
        mass0[k] = cell;
        mass1[per + gap + k] = cell;
    }
    GridDistribution::new(grid, mass0, mass1)
}

/// Noisy pair on the same two intervals: the marginal is uniform over
/// both, the posterior is 1/4 on the left interval and 3/4 on the right.
pub fn make_massart(delta: f64, spacing: f64) -> Result<GridDistribution> {
    let (grid, per, gap) = two_interval_grid(delta, spacing)?;
    let quarter = 0.125 / per as f64;
    let mut mass0 = vec![0.0; grid.count()];
    let mut mass1 = vec![0.0; grid.count()];
    for k in 0..per {
        mass0[k] = 3.0 * quarter;
        mass1[k] = quarter;
        mass0[per + gap + k] = quarter;
        mass1[per + gap + k] = 3.0 * quarter;
    }
    GridDistribution::new(grid, mass0, mass1)
}

/// Homoscedastic Gaussian pair with half the mass per class, atomized as
/// cell-midpoint density times spacing and renormalized exactly. Each
/// class is truncated eight standard deviations from its own mean, so a
/// node carries a class's mass only inside that class's window.
pub fn make_gaussian(mu0: f64, mu1: f64, sigma: f64, spacing: f64) -> Result<GridDistribution> {
    if !(mu1 > mu0) || !mu0.is_finite() || !mu1.is_finite() {
        return Err(Error::Domain {
            what: "mean gap",
            value: mu1 - mu0,
            lo: 0.0,
            hi: f64::INFINITY,
        });
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::Domain {
            what: "sigma",
            value: sigma,
            lo: 0.0,
            hi: f64::INFINITY,
        });
    }
    if !(spacing > 0.0 && spacing.is_finite()) {
        return Err(Error::Domain {
            what: "spacing",
            value: spacing,
            lo: 0.0,
            hi: f64::INFINITY,
        });
    }
    let radius = GAUSSIAN_RADIUS * sigma;
    let lo_edge = mu0 - radius;
    let hi_edge = mu1 + radius;
    let cells = ((hi_edge - lo_edge) / spacing - CELL_ALIGN_TOL).ceil() as usize;
    let grid = Grid::new(lo_edge + 0.5 * spacing, spacing, cells)?;
    let truncated = |mu: f64| -> Vec<f64> {
        let w: Vec<f64> = grid
            .nodes()
            .map(|x| {
                if (x - mu).abs() <= radius {
                    (-0.5 * ((x - mu) / sigma).powi(2)).exp()
                } else {
                    0.0
                }
            })
            .collect();
        let total: f64 = w.iter().sum();
        w.into_iter().map(|v| v * 0.5 / total).collect()
    };
    let mass0 = truncated(mu0);
    let mass1 = truncated(mu1);
    GridDistribution::new(grid, mass0, mass1)
}

/// Verifies the Gaussian parameter regime that keeps the shift attack
/// meaningful and the envelope concave: `mu0 + 2*eps < mu1` and
/// `mu1 < mu0 + sqrt(2)*sigma`.
pub fn check_gaussian_regime(mu0: f64, mu1: f64, sigma: f64, eps: f64) -> Result<()> {
    if !(mu0 + 2.0 * eps < mu1) {
        return Err(Error::Precondition {
            reason: format!("need mu0 + 2*eps < mu1, got {} + 2*{} >= {}", mu0, eps, mu1),
        });
    }
    let cap = mu0 + std::f64::consts::SQRT_2 * sigma;
    if !(mu1 < cap) {
        return Err(Error::Precondition {
            reason: format!("need mu1 < mu0 + sqrt(2)*sigma, got {} >= {}", mu1, cap),
        });
    }
    Ok(())
}

/// Half-width of the region where the Gaussian posterior stays within `z`
/// of one half: `|eta(x) - 1/2| <= z` exactly on `|x - midpoint| <=
/// delta_of_z(..)`. Requires `z` in `[0, 1/2)` and `mu1 > mu0`.
pub fn delta_of_z(mu0: f64, mu1: f64, sigma: f64, z: f64) -> Result<f64> {
    if !(mu1 > mu0) {
        return Err(Error::Domain {
            what: "mean gap",
            value: mu1 - mu0,
            lo: 0.0,
            hi: f64::INFINITY,
        });
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::Domain {
            what: "sigma",
            value: sigma,
            lo: 0.0,
            hi: f64::INFINITY,
        });
    }
    if !(0.0..0.5).contains(&z) {
        return Err(Error::Domain {
            what: "z",
            value: z,
            lo: 0.0,
            hi: 0.5,
        });
    }
    Ok(sigma * sigma / (mu1 - mu0) * ((0.5 + z) / (0.5 - z)).ln())
}

/// Excess risks of the score sequence that witnesses the lower bound on
/// achievable comparison constants.
#[derive(Debug, Clone, Serialize)]
pub struct LowerBoundReport {
    /// Posterior tilt of the single-node distribution.
    pub alpha: f64,
    /// Sequence index the scores were built at.
    pub n: u64,
    /// Adversarial classification excess risk; equals `1/2 + alpha`.
    pub class_excess: f64,
    /// Adversarial surrogate excess risk.
    pub surr_excess: f64,
    /// Ratio of classification to surrogate excess.
    pub ratio: f64,
}

/// Builds the single-node distribution with posterior `1/2 + alpha` and
/// the scores that are `1/n` everywhere except `-1/n` at the node, then
/// reports both adversarial excess risks and their ratio. The loss must
/// attain its optimal balanced conditional risk at zero.
pub fn lower_bound_sequence(
    loss: &Loss,
    alpha: f64,
    n: u64,
    eps: f64,
    spacing: f64,
    tol: f64,
) -> Result<LowerBoundReport> {
    if !(0.0..=0.5).contains(&alpha) {
        return Err(Error::Domain {
            what: "alpha",
            value: alpha,
            lo: 0.0,
            hi: 0.5,
        });
    }
    if n == 0 {
        return Err(Error::Precondition {
            reason: "sequence index n must be at least 1".into(),
        });
    }
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::Precondition {
            reason: format!("radius eps must be positive and finite, got {eps}"),
        });
    }
    let c_half = loss.min_conditional_risk(0.5, tol)?;
    let phi0 = loss.value_at_zero();
    if phi0 - c_half > 10.0 * tol + 1e-9 {
        return Err(Error::Precondition {
            reason: format!(
                "loss {} has optimal balanced conditional risk {} below its value {} at zero, \
                 so the witness sequence does not apply",
                loss.name(),
                c_half,
                phi0
            ),
        });
    }
    let w = Grid::new(0.0, spacing, 1)?.steps_for(eps)?;
    let grid = Grid::new(-eps, spacing, 2 * w + 1)?;
    let mut mass0 = vec![0.0; grid.count()];
    let mut mass1 = vec![0.0; grid.count()];
    mass0[w] = 0.5 - alpha;
    mass1[w] = 0.5 + alpha;
    let d = GridDistribution::new(grid, mass0, mass1)?;
    let step = 1.0 / n as f64;
    let mut values = vec![step; grid.count()];
    values[w] = -step;
    let f = GridFunction::new(grid, values)?;
    let class_excess = risk::adv_classification_risk(&d, &f, eps)? - (0.5 - alpha);
    let surr = risk::adv_surrogate_risk(&d, loss, &f, eps)?;
    let surr_excess = surr - loss.min_conditional_risk(0.5 + alpha, tol)?;
    Ok(LowerBoundReport {
        alpha,
        n,
        class_excess,
        surr_excess,
        ratio: class_excess / surr_excess,
    })
}
