//! Distribution of the posterior's distance from one half, its concave
//! envelope, and Darboux sums for integrals against that distribution.
//!
//! For an attacked pair with posterior eta, the curve `h` is the cdf of
//! `|eta - 1/2|` under the total attacked mass. Its upper concave hull is
//! the envelope the concave surrogate bounds are built from. Integrals of
//! nonincreasing functions against `h` are bracketed by lower and upper
//! Darboux sums; the improper endpoint at zero is handled by shrinking
//! the left limit along a dyadic sequence.

use serde::Serialize;
use serde_json::json;

use crate::attack::AttackPair;
use crate::curve::{Direction, MonotoneCurve};
use crate::error::{Error, Result};
use crate::grid::GridDistribution;

/// Distances from one half closer than this merge into one cdf knot.
const KNOT_MERGE_TOL: f64 = 1e-12;

/// Ceiling on the spacing-scaled default atom tolerance; a posterior step
/// across one cell would otherwise swallow every level.
const ATOM_TOL_CAP: f64 = 0.1;

/// Smallest left endpoint used when shrinking an improper integral's
/// lower limit toward zero.
const IMPROPER_FLOOR: f64 = 1e-8;

/// Cdf of `|eta - 1/2|` together with its concave envelope.
#[derive(Debug, Clone, Serialize)]
pub struct EnvelopeCdf {
    /// Right-continuous step cdf on `[0, 1/2]`, normalized by total mass.
    pub h: MonotoneCurve,
    /// Upper concave hull of the cdf knots.
    pub envelope: MonotoneCurve,
    /// Normalized mass detected at distance at most the atom tolerance.
    pub atom_at_half: f64,
    /// Whether the atom mass was excluded from the cdf.
    pub strict: bool,
    /// Mass the normalization divided by.
    pub total_mass: f64,
}

impl EnvelopeCdf {
    /// Bundle with the knots of both curves and the atom mass.
    pub fn to_json(&self) -> serde_json::Value {
        let knots = |c: &MonotoneCurve| c.knots().map(|(x, y)| json!([x, y])).collect::<Vec<_>>();
        json!({
            "h": knots(&self.h),
            "H": knots(&self.envelope),
            "atom_at_half": self.atom_at_half,
            "strict": self.strict,
            "total_mass": self.total_mass,
        })
    }
}

/// Spacing-scaled tolerance for detecting posterior mass at one half: two
/// cells at the steepest posterior slope between adjacent mass nodes,
/// clamped to keep distinct levels distinguishable.
pub fn default_atom_tol(attacked: &GridDistribution) -> f64 {
    let massed: Vec<(f64, f64)> = attacked
        .atoms()
        .map(|(_, x, m0, m1)| (x, m1 / (m0 + m1)))
        .collect();
    let mut slope = 0.0_f64;
    for pair in massed.windows(2) {
        let dx = pair[1].0 - pair[0].0;
        slope = slope.max((pair[1].1 - pair[0].1).abs() / dx);
    }
    (2.0 * attacked.grid().spacing() * slope).clamp(1e-12, ATOM_TOL_CAP)
}

/// Cdf of the posterior's distance from one half under an attacked
/// distribution, with its concave envelope. `strict` drops the mass
/// within `atom_tol` of one half from the cdf while still reporting it.
pub fn cdf_abs_eta_of(
    attacked: &GridDistribution,
    atom_tol: f64,
    strict: bool,
) -> Result<EnvelopeCdf> {
    let total = attacked.total_mass();
    if !(total > 0.0) {
        return Err(Error::Precondition {
            reason: "attack carries no mass".into(),
        });
    }
    let mut atom = 0.0;
    let mut dist: Vec<(f64, f64)> = Vec::new();
    for (_, _, m0, m1) in attacked.atoms() {
        let s = (m1 / (m0 + m1) - 0.5).abs();
        let mass = m0 + m1;
        if s <= atom_tol {
            atom += mass;
            if strict {
                continue;
            }
        }
        dist.push((s, mass));
    }
    dist.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut knots: Vec<(f64, f64)> = vec![(0.0, 0.0)];
    let mut cum = 0.0;
    for &(s, mass) in &dist {
        cum += mass / total;
        let last = knots.last_mut().unwrap();
        if s - last.0 <= KNOT_MERGE_TOL {
            last.1 = cum;
        } else {
            knots.push((s, cum));
        }
    }
    if knots.last().unwrap().0 < 0.5 {
        knots.push((0.5, cum));
    }
    let h = MonotoneCurve::step_nondecreasing(knots)?;
    let envelope = concave_envelope(&h)?;
    Ok(EnvelopeCdf {
        h,
        envelope,
        atom_at_half: atom / total,
        strict,
        total_mass: total,
    })
}

/// Cdf of the posterior's distance from one half for a shift attack.
pub fn cdf_abs_eta(attack: &AttackPair, atom_tol: f64, strict: bool) -> Result<EnvelopeCdf> {
    cdf_abs_eta_of(&attack.attacked, atom_tol, strict)
}

/// Pointwise-smallest concave piecewise-linear majorant of the knots of a
/// nondecreasing curve, via a monotone-chain scan over the knot closure.
pub fn concave_envelope(curve: &MonotoneCurve) -> Result<MonotoneCurve> {
    if curve.direction() != Direction::NonDecreasing {
        return Err(Error::Curve {
            reason: "concave envelope requires a nondecreasing curve".into(),
        });
    }
    let mut hull: Vec<(f64, f64)> = Vec::new();
    for (x, y) in curve.knots() {
        while hull.len() >= 2 {
            let a = hull[hull.len() - 2];
            let b = hull[hull.len() - 1];
            let cross = (b.0 - a.0) * (y - a.1) - (b.1 - a.1) * (x - a.0);
            if cross >= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push((x, y));
    }
    MonotoneCurve::nondecreasing(hull)
}

/// Sorted partition of `[a, b]`: the integrator's knots, any extra seed
/// points, and `refine` equal subdivisions of every resulting gap.
fn build_partition(h: &MonotoneCurve, a: f64, b: f64, refine: usize, extra: &[f64]) -> Vec<f64> {
    let mut coarse = vec![a, b];
    for (x, _) in h.knots() {
        if x > a && x < b {
            coarse.push(x);
        }
    }
    for &x in extra {
        if x > a && x < b {
            coarse.push(x);
        }
    }
    coarse.sort_by(f64::total_cmp);
    coarse.dedup();
    let mut pts = Vec::with_capacity(coarse.len() * refine);
    for pair in coarse.windows(2) {
        let (lo, hi) = (pair[0], pair[1]);
        pts.push(lo);
        for j in 1..refine {
            pts.push(lo + (hi - lo) * j as f64 / refine as f64);
        }
    }
    pts.push(b);
    pts
}

/// Darboux sums of a nonincreasing integrand over a partition. Intervals
/// where the integrator does not grow contribute nothing, so an infinite
/// integrand over a flat stretch stays harmless.
fn darboux_sums(g: impl Fn(f64) -> f64, h: &MonotoneCurve, pts: &[f64]) -> (f64, f64) {
    let (mut lower, mut upper) = (0.0, 0.0);
    for pair in pts.windows(2) {
        let dh = h.eval(pair[1]) - h.eval(pair[0]);
        if dh > 0.0 {
            lower += g(pair[1]) * dh;
            upper += g(pair[0]) * dh;
        }
    }
    (lower, upper)
}

/// Lower and upper Darboux–Stieltjes sums of a nonincreasing integrand
/// against a nondecreasing integrator over the overlap of their domains,
/// with `refine` subdivisions per knot gap.
pub fn rs_integral(g: &MonotoneCurve, h: &MonotoneCurve, refine: usize) -> Result<(f64, f64)> {
    if g.direction() != Direction::NonIncreasing {
        return Err(Error::Curve {
            reason: "integrand must be nonincreasing".into(),
        });
    }
    if h.direction() != Direction::NonDecreasing {
        return Err(Error::Curve {
            reason: "integrator must be nondecreasing".into(),
        });
    }
    if refine == 0 {
        return Err(Error::Precondition {
            reason: "refine must be at least 1".into(),
        });
    }
    let (ga, gb) = g.domain();
    let (ha, hb) = h.domain();
    let (a, b) = (ga.max(ha), gb.min(hb));
    if !(b > a) {
        return Err(Error::Curve {
            reason: format!("domains [{ga}, {gb}] and [{ha}, {hb}] do not overlap"),
        });
    }
    let extra: Vec<f64> = g.knots().map(|(x, _)| x).collect();
    let pts = build_partition(h, a, b, refine, &extra);
    Ok(darboux_sums(|z| g.eval(z), h, &pts))
}

/// Improper integral of the envelope raised to `-r` against the cdf,
/// taken over `(delta, 1/2]` along a dyadic sequence of left endpoints.
#[derive(Debug, Clone, Serialize)]
pub struct ImproperIntegral {
    /// Exponent the envelope was raised to, negated.
    pub r: f64,
    /// Left endpoints of the shrinking integration intervals.
    pub deltas: Vec<f64>,
    /// Lower Darboux sum at each left endpoint.
    pub lowers: Vec<f64>,
    /// Upper Darboux sum at each left endpoint.
    pub uppers: Vec<f64>,
    /// Final lower sum, reported as the integral's value.
    pub value: f64,
}

/// Evaluates the integral of `envelope^{-r}` against the cdf by Darboux
/// sums over `(delta, 1/2]`, shrinking `delta` dyadically until it passes
/// the floor. Geometric seed points keep the sums tight where the
/// integrand blows up at the left end.
pub fn improper_power_integral(
    cdf: &EnvelopeCdf,
    r: f64,
    refine: usize,
) -> Result<ImproperIntegral> {
    if !(0.0..1.0).contains(&r) {
        return Err(Error::Domain {
            what: "exponent r",
            value: r,
            lo: 0.0,
            hi: 1.0,
        });
    }
    if refine == 0 {
        return Err(Error::Precondition {
            reason: "refine must be at least 1".into(),
        });
    }
    let g = |z: f64| cdf.envelope.eval(z).powf(-r);
    let mut deltas = Vec::new();
    let mut lowers = Vec::new();
    let mut uppers = Vec::new();
    let mut delta = 0.25;
    loop {
        let mut ladder = Vec::new();
        let mut rung = delta;
        while rung < 0.5 {
            ladder.push(rung);
            rung *= 2.0;
        }
        let pts = build_partition(&cdf.h, delta, 0.5, refine, &ladder);
        let (lower, upper) = darboux_sums(g, &cdf.h, &pts);
        deltas.push(delta);
        lowers.push(lower);
        uppers.push(upper);
        if delta <= IMPROPER_FLOOR {
            break;
        }
        delta *= 0.5;
    }
    let value = *lowers.last().unwrap();
    Ok(ImproperIntegral {
        r,
        deltas,
        lowers,
        uppers,
        value,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attack::{delta_of_z, make_gaussian, make_massart, make_realizable, shift_attack};
    use crate::risk::slack_budget;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    #[test]
    fn massart_distances_step_at_one_quarter() {
        let d = make_massart(0.5, 0.25).unwrap();
        let pair = shift_attack(&d, 0.0).unwrap();
        let cdf = cdf_abs_eta(&pair, default_atom_tol(&pair.attacked), false).unwrap();
        assert_eq!(cdf.h.eval(0.0), 0.0);
        assert_eq!(cdf.h.eval(0.24), 0.0);
        assert!((cdf.h.eval(0.25) - 1.0).abs() < 1e-12);
        assert!((cdf.h.eval(0.5) - 1.0).abs() < 1e-12);
        assert_eq!(cdf.atom_at_half, 0.0);
    }

    #[test]
    fn degenerate_posterior_jumps_only_at_one_half() {
        let d = make_realizable(0.5, 0.25).unwrap();
        let pair = shift_attack(&d, 0.0).unwrap();
        let cdf = cdf_abs_eta(&pair, default_atom_tol(&pair.attacked), false).unwrap();
        assert_eq!(cdf.h.eval(0.499), 0.0);
        assert!((cdf.h.eval(0.5) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gaussian_distance_cdf_matches_band_mass() {
        let d = make_gaussian(0.0, 1.0, 1.0, 0.05)
            .unwrap()
            .extend(0.25)
            .unwrap();
        let pair = shift_attack(&d, 0.25).unwrap();
        let cdf = cdf_abs_eta(&pair, default_atom_tol(&pair.attacked), false).unwrap();
        let slack = slack_budget(0.05, 1.0, 4.0);
        for z in [0.05, 0.15, 0.25, 0.35, 0.45] {
            let radius = delta_of_z(0.25, 0.75, 1.0, z).unwrap();
            let band: f64 = pair
                .attacked
                .atoms()
                .filter(|&(_, x, _, _)| (x - 0.5).abs() <= radius)
                .map(|(_, _, m0, m1)| m0 + m1)
                .sum();
            assert!(
                (cdf.h.eval(z) - band).abs() <= slack,
                "z {z}: cdf {} band {band}",
                cdf.h.eval(z)
            );
        }
    }

    #[test]
    fn strict_variant_drops_the_atom_but_reports_it() {
        let grid = crate::grid::Grid::new(0.0, 1.0, 3).unwrap();
        let d = GridDistribution::new(grid, vec![0.2, 0.1, 0.0], vec![0.2, 0.3, 0.2]).unwrap();
        let loose = cdf_abs_eta_of(&d, 1e-9, false).unwrap();
        let strict = cdf_abs_eta_of(&d, 1e-9, true).unwrap();
        assert!((loose.atom_at_half - 0.4).abs() < 1e-12);
        assert!((strict.atom_at_half - 0.4).abs() < 1e-12);
        assert!((loose.h.eval(0.0) - 0.4).abs() < 1e-12);
        assert_eq!(strict.h.eval(0.0), 0.0);
        assert!((loose.h.eval(0.5) - 1.0).abs() < 1e-12);
        assert!((strict.h.eval(0.5) - 0.6).abs() < 1e-12);
    }

    #[test]
    fn default_tolerance_tracks_posterior_slope() {
        let d = make_gaussian(0.0, 1.0, 1.0, 0.001).unwrap();
        let tol = default_atom_tol(&d);
        assert!(tol > 0.0 && tol < 0.01, "tolerance {tol}");
        let m = make_massart(0.5, 0.25).unwrap();
        assert!(default_atom_tol(&m) < 0.25);
    }

    #[test]
    fn envelope_of_a_step_is_the_chord() {
        let h =
            MonotoneCurve::step_nondecreasing(vec![(0.0, 0.0), (0.3, 1.0), (0.5, 1.0)]).unwrap();
        let env = concave_envelope(&h).unwrap();
        assert!((env.eval(0.15) - 0.5).abs() < 1e-12);
        assert!((env.eval(0.3) - 1.0).abs() < 1e-12);
        assert!((env.eval(0.45) - 1.0).abs() < 1e-12);
        let knots: Vec<(f64, f64)> = env.knots().collect();
        assert_eq!(knots, vec![(0.0, 0.0), (0.3, 1.0), (0.5, 1.0)]);
    }

    #[test]
    fn envelope_leaves_concave_curves_unchanged() {
        let c = MonotoneCurve::nondecreasing(vec![(0.0, 0.0), (0.1, 0.4), (0.25, 0.7), (0.5, 1.0)])
            .unwrap();
        let env = concave_envelope(&c).unwrap();
        for (x, y) in c.knots() {
            assert!((env.eval(x) - y).abs() < 1e-12, "changed at {x}");
        }
        let line = MonotoneCurve::nondecreasing(vec![(0.0, 0.0), (0.5, 1.0)]).unwrap();
        let env = concave_envelope(&line).unwrap();
        assert_eq!(
            env.knots().collect::<Vec<_>>(),
            vec![(0.0, 0.0), (0.5, 1.0)]
        );
    }

    #[test]
    fn envelope_majorizes_and_no_vertex_can_drop() {
        let mut rng = StdRng::seed_from_u64(7);
        for _ in 0..50 {
            let n = rng.gen_range(2..8);
            let mut knots = vec![(0.0, 0.0)];
            let mut x: f64 = 0.0;
            let mut y: f64 = 0.0;
            for _ in 0..n {
                x += rng.gen_range(0.01..0.2);
                y += rng.gen_range(0.0..0.4);
                knots.push((x.min(0.49), y.min(1.0)));
                if x >= 0.49 {
                    break;
                }
            }
            knots.dedup_by(|a, b| a.0 <= b.0 + 1e-12);
            knots.push((0.5, 1.0));
            let h = MonotoneCurve::step_nondecreasing(knots.clone()).unwrap();
            let env = concave_envelope(&h).unwrap();
            for &(x, y) in &knots {
                assert!(env.eval(x) >= y - 1e-12, "hull below knot at {x}");
            }
            let verts: Vec<(f64, f64)> = env.knots().collect();
            for j in 0..verts.len() {
                let mut lowered = verts.clone();
                // Past the monotonicity-repair band, so a plateau vertex
                // cannot be clamped back up during construction.
                lowered[j].1 -= 1e-4;
                let majorizes = match MonotoneCurve::nondecreasing(lowered) {
                    Ok(c) => knots.iter().all(|&(x, y)| c.eval(x) >= y - 1e-12),
                    Err(_) => false,
                };
                assert!(!majorizes, "vertex {j} admits a lower majorant");
            }
        }
    }

    #[test]
    fn envelope_vanishes_at_zero_without_an_atom() {
        let d = make_massart(0.5, 0.25).unwrap();
        let pair = shift_attack(&d, 0.0).unwrap();
        let cdf = cdf_abs_eta(&pair, default_atom_tol(&pair.attacked), false).unwrap();
        assert_eq!(cdf.envelope.eval(0.0), 0.0);
        for k in 1..8 {
            let delta = 0.25_f64.powi(k);
            assert!(cdf.envelope.eval(delta) <= 4.0 * delta + 1e-12);
        }
    }

    #[test]
    fn constant_integrand_matches_total_variation() {
        let h =
            MonotoneCurve::step_nondecreasing(vec![(0.0, 0.0), (0.2, 0.3), (0.5, 1.0)]).unwrap();
        let g = MonotoneCurve::nonincreasing(vec![(0.0, 2.5), (0.5, 2.5)]).unwrap();
        let (lower, upper) = rs_integral(&g, &h, 4).unwrap();
        assert!((lower - 2.5).abs() < 1e-12);
        assert!((upper - 2.5).abs() < 1e-12);
    }

    #[test]
    fn darboux_gap_shrinks_with_refinement() {
        let h = MonotoneCurve::nondecreasing(vec![(0.0, 0.0), (0.5, 1.0)]).unwrap();
        let g = MonotoneCurve::nonincreasing(vec![(0.0, 1.0), (0.5, 0.0)]).unwrap();
        let mut last_gap = f64::INFINITY;
        for refine in [1, 2, 4, 8, 16] {
            let (lower, upper) = rs_integral(&g, &h, refine).unwrap();
            let gap = upper - lower;
            assert!(lower <= upper);
            assert!(gap <= last_gap + 1e-15);
            last_gap = gap;
        }
        let (lower, upper) = rs_integral(&g, &h, 64).unwrap();
        assert!(lower <= 0.5 && 0.5 <= upper);
        assert!(upper - lower < 0.02);
    }

    #[test]
    fn square_root_integrand_converges_to_two() {
        let line = MonotoneCurve::nondecreasing(vec![(0.0, 0.0), (0.5, 1.0)]).unwrap();
        let cdf = EnvelopeCdf {
            h: line.clone(),
            envelope: line,
            atom_at_half: 0.0,
            strict: false,
            total_mass: 1.0,
        };
        let report = improper_power_integral(&cdf, 0.5, 256).unwrap();
        assert!((report.value - 2.0).abs() < 0.01, "value {}", report.value);
        for pair in report.lowers.windows(2) {
            assert!(pair[1] >= pair[0] - 1e-12, "lower sums not monotone");
        }
    }

    #[test]
    fn power_integrals_respect_the_reciprocal_bound() {
        let mut cdfs = Vec::new();
        let d = make_massart(0.5, 0.25).unwrap();
        let pair = shift_attack(&d, 0.0).unwrap();
        cdfs.push(cdf_abs_eta(&pair, default_atom_tol(&pair.attacked), false).unwrap());
        let d = make_gaussian(0.0, 1.0, 1.0, 0.05)
            .unwrap()
            .extend(0.25)
            .unwrap();
        let pair = shift_attack(&d, 0.25).unwrap();
        cdfs.push(cdf_abs_eta(&pair, default_atom_tol(&pair.attacked), false).unwrap());
        for cdf in &cdfs {
            for r in [0.1, 0.5, 0.9] {
                let report = improper_power_integral(cdf, r, 64).unwrap();
                assert!(
                    report.value <= 1.0 / (1.0 - r) + 1e-6,
                    "r {r}: value {} exceeds {}",
                    report.value,
                    1.0 / (1.0 - r)
                );
            }
        }
    }

    #[test]
    fn bundle_carries_both_curves_and_the_atom() {
        let d = make_massart(0.5, 0.25).unwrap();
        let pair = shift_attack(&d, 0.0).unwrap();
        let cdf = cdf_abs_eta(&pair, default_atom_tol(&pair.attacked), false).unwrap();
        let bundle = cdf.to_json();
        assert!(bundle["h"].as_array().unwrap().len() >= 2);
        assert!(bundle["H"].as_array().unwrap().len() >= 2);
        assert_eq!(bundle["atom_at_half"], 0.0);
        let csv = cdf.h.to_csv("z", "mass");
        assert!(csv.starts_with("z,mass\n"));
    }

    #[test]
    fn integral_inputs_are_validated() {
        let h = MonotoneCurve::nondecreasing(vec![(0.0, 0.0), (0.5, 1.0)]).unwrap();
        let g = MonotoneCurve::nonincreasing(vec![(0.0, 1.0), (0.5, 0.5)]).unwrap();
        assert!(rs_integral(&h, &h, 4).is_err());
        assert!(rs_integral(&g, &g, 4).is_err());
        assert!(rs_integral(&g, &h, 0).is_err());
        let line = MonotoneCurve::nondecreasing(vec![(0.0, 0.0), (0.5, 1.0)]).unwrap();
        let cdf = EnvelopeCdf {
            h: line.clone(),
            envelope: line,
            atom_at_half: 0.0,
            strict: false,
            total_mass: 1.0,
        };
        assert!(improper_power_integral(&cdf, 1.0, 16).is_err());
        assert!(improper_power_integral(&cdf, -0.1, 16).is_err());
    }
}
