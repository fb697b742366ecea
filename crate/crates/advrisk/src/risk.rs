//! Primal classification and surrogate risks, their adversarial versions,
//! dual transport objectives, and small-instance exhaustive oracles.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::grid::{Grid, GridDistribution, GridFunction};
use crate::loss::Loss;

/// Movable atoms beyond this count are rejected by the brute-force dual.
const BRUTE_ATOM_CAP: usize = 16;

/// Displacement combinations beyond this count are rejected outright.
const BRUTE_COMBO_CAP: u128 = 5_000_000;

/// Relative tolerance on marginal mass equality in feasibility checks.
const MASS_EQ_TOL: f64 = 1e-9;

/// Which risk a report carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RiskKind {
    Classification,
    Surrogate,
}

/// One evaluated risk, ready for JSON emission.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RiskReport {
    pub value: f64,
    pub eps: f64,
    pub kind: RiskKind,
    pub adversarial: bool,
    pub distribution: String,
    pub function: String,
    pub spacing: f64,
}

/// Transport distances certifying an attack stays within its budget.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Feasibility {
    pub dist0: f64,
    pub dist1: f64,
    pub eps: f64,
}

/// Value and witness of a dual objective evaluation.
#[derive(Debug, Clone)]
pub struct DualReport {
    pub value: f64,
    pub feasibility: Option<Feasibility>,
    pub eta_star: GridFunction,
    pub attack: Option<GridDistribution>,
}

impl DualReport {
    /// Compact JSON record with stable field names.
    pub fn summary_json(&self) -> serde_json::Value {
        json!({
            "value": self.value,
            "feasibility": self.feasibility,
            "spacing": self.eta_star.grid().spacing(),
        })
    }
}

/// Primal and dual values for one (classifier, attack) pair.
#[derive(Debug, Clone)]
pub struct GapReport {
    pub primal: f64,
    pub dual: DualReport,
    pub gap: f64,
}

/// Index in `f`'s grid of the distribution's node 0, after checking that
/// `f` covers the mass-bearing nodes padded by `pad_steps` on both sides.
fn coverage_offset(
    d: &GridDistribution,
    f: &GridFunction,
    pad_steps: usize,
    what: &'static str,
) -> Result<i64> {
    let off = f.grid().step_offset(d.grid())?;
    let (first, last) = d.support_range().expect("distribution carries mass");
    let pad = pad_steps as i64;
    let lo = off + first as i64 - pad;
    let hi = off + last as i64 + pad;
    if lo < 0 || hi >= f.grid().count() as i64 {
        let eps = pad_steps as f64 * d.grid().spacing();
        return Err(Error::Coverage {
            what,
            need_lo: d.grid().node(first) - eps,
            need_hi: d.grid().node(last) + eps,
            have_lo: f.grid().lo(),
            have_hi: f.grid().hi(),
        });
    }
    Ok(off)
}

/// Default number of grid cells of transported mass allowed as slack.
pub const SLACK_KAPPA: f64 = 4.0;

/// Allowed violation of continuum identities after discretization: up to
/// `kappa` grid cells of transported mass.
pub fn slack_budget(spacing: f64, total_mass: f64, kappa: f64) -> f64 {
    kappa * spacing * total_mass
}

/// Per-class expected loss of the scores `f`, as `(class0, class1)`.
pub fn surrogate_risk_by_class(
    d: &GridDistribution,
    loss: &Loss,
    f: &GridFunction,
) -> Result<(f64, f64)> {
    let off = coverage_offset(d, f, 0, "the distribution support")?;
    let (mut r0, mut r1) = (0.0, 0.0);
    for (k, _, m0, m1) in d.atoms() {
        let fv = f.value_at((off + k as i64) as usize);
        if m1 > 0.0 {
            r1 += m1 * loss.eval(fv);
        }
        if m0 > 0.0 {
            r0 += m0 * loss.eval(-fv);
        }
    }
    Ok((r0, r1))
}

/// Expected loss of the scores `f` under the distribution pair.
pub fn surrogate_risk(d: &GridDistribution, loss: &Loss, f: &GridFunction) -> Result<f64> {
    let (r0, r1) = surrogate_risk_by_class(d, loss, f)?;
    Ok(r0 + r1)
}

/// Per-class expected worst-case loss when every point may move by up to
/// `eps`, as `(class0, class1)`.
pub fn adv_surrogate_risk_by_class(
    d: &GridDistribution,
    loss: &Loss,
    f: &GridFunction,
    eps: f64,
) -> Result<(f64, f64)> {
    let w = f.grid().steps_for(eps)?;
    let off = coverage_offset(d, f, w, "the support padded by eps")?;
    let worst1 = f.map(|v| loss.eval(v))?.sup_ball(eps)?;
    let worst0 = f.map(|v| loss.eval(-v))?.sup_ball(eps)?;
    let (mut r0, mut r1) = (0.0, 0.0);
    for (k, _, m0, m1) in d.atoms() {
        let j = (off + k as i64) as usize;
        if m1 > 0.0 {
            r1 += m1 * worst1.value_at(j);
        }
        if m0 > 0.0 {
            r0 += m0 * worst0.value_at(j);
        }
    }
    Ok((r0, r1))
}

/// Expected worst-case loss when every point may move by up to `eps`.
pub fn adv_surrogate_risk(
    d: &GridDistribution,
    loss: &Loss,
    f: &GridFunction,
    eps: f64,
) -> Result<f64> {
    let (r0, r1) = adv_surrogate_risk_by_class(d, loss, f, eps)?;
    Ok(r0 + r1)
}

/// Mass misclassified when every point may move by up to `eps`; class 1
/// counts as wrong wherever the window reaches `f <= 0`, class 0 wherever
/// it reaches `f > 0`.
pub fn adv_classification_risk(d: &GridDistribution, f: &GridFunction, eps: f64) -> Result<f64> {
    let w = f.grid().steps_for(eps)?;
    let off = coverage_offset(d, f, w, "the support padded by eps")?;
    let (le, gt) = f.threshold_indicators();
    let wrong1 = le.sup_ball(eps)?;
    let wrong0 = gt.sup_ball(eps)?;
    let mut value = 0.0;
    for (k, _, m0, m1) in d.atoms() {
        let j = (off + k as i64) as usize;
        value += m1 * wrong1.value_at(j) + m0 * wrong0.value_at(j);
    }
    Ok(value)
}

/// Mass misclassified by the scores `f` with no perturbation.
pub fn classification_risk(d: &GridDistribution, f: &GridFunction) -> Result<f64> {
    adv_classification_risk(d, f, 0.0)
}

/// Posterior class-1 probability per node, extended from mass-bearing
/// nodes to the rest of the grid by nearest neighbor (ties to the left).
pub fn eta_star(attack: &GridDistribution) -> GridFunction {
    let grid = *attack.grid();
    let massed: Vec<(usize, f64)> = attack
        .atoms()
        .map(|(k, _, m0, m1)| (k, m1 / (m0 + m1)))
        .collect();
    let mut values = vec![0.0; grid.count()];
    let mut left = 0;
    for (k, value) in values.iter_mut().enumerate() {
        while left + 1 < massed.len() && massed[left + 1].0 <= k {
            left += 1;
        }
        let (kl, el) = massed[left];
        *value = if k <= kl {
            el
        } else if left + 1 < massed.len() {
            let (kr, er) = massed[left + 1];
            if k - kl <= kr - k {
                el
            } else {
                er
            }
        } else {
            el
        };
    }
    GridFunction::new(grid, values).expect("posteriors are finite")
}

/// Transport value of an attack against the zero-one loss.
pub fn dual_classification_objective(attack: &GridDistribution) -> Result<DualReport> {
    let mut value = 0.0;
    for (_, _, m0, m1) in attack.atoms() {
        value += m0.min(m1);
    }
    Ok(DualReport {
        value,
        feasibility: None,
        eta_star: eta_star(attack),
        attack: None,
    })
}

/// Transport value of an attack against a surrogate loss: each node
/// contributes its mass times the minimal conditional risk at its
/// posterior.
pub fn dual_surrogate_objective(
    attack: &GridDistribution,
    loss: &Loss,
    tol: f64,
) -> Result<DualReport> {
    let mut value = 0.0;
    for (_, _, m0, m1) in attack.atoms() {
        let m = m0 + m1;
        value += m * loss.min_conditional_risk(m1 / m, tol)?;
    }
    Ok(DualReport {
        value,
        feasibility: None,
        eta_star: eta_star(attack),
        attack: None,
    })
}

/// Largest displacement of the monotone (quantile) coupling between two
/// atomic measures of equal total mass, which attains the 1-D infinity
/// transport distance.
pub fn w_infinity_1d(q: &[(f64, f64)], q_prime: &[(f64, f64)], tol: f64) -> Result<f64> {
    for &(x, m) in q.iter().chain(q_prime) {
        if !x.is_finite() || !m.is_finite() || m < 0.0 {
            return Err(Error::Precondition {
                reason: format!("atom ({x}, {m}) must be finite with nonnegative mass"),
            });
        }
    }
    let total: f64 = q.iter().map(|&(_, m)| m).sum();
    let total_prime: f64 = q_prime.iter().map(|&(_, m)| m).sum();
    let difference = (total - total_prime).abs();
    if difference > tol {
        return Err(Error::MassMismatch { difference, tol });
    }
    if total <= tol {
        return Ok(0.0);
    }
    let mut a = q.to_vec();
    let mut b = q_prime.to_vec();
    a.sort_by(|p, q| p.0.total_cmp(&q.0));
    b.sort_by(|p, q| p.0.total_cmp(&q.0));
    // Slabs below this floor are accumulation noise, not transported mass.
    let floor = 1e-12 * total;
    let mut best = 0.0_f64;
    let (mut i, mut j) = (0, 0);
    let mut ri = a[0].1;
    let mut rj = b[0].1;
    'walk: loop {
        while ri <= floor {
            i += 1;
            if i == a.len() {
                break 'walk;
            }
            ri = a[i].1;
        }
        while rj <= floor {
            j += 1;
            if j == b.len() {
                break 'walk;
            }
            rj = b[j].1;
        }
        best = best.max((a[i].0 - b[j].0).abs());
        let m = ri.min(rj);
        ri -= m;
        rj -= m;
    }
    Ok(best)
}

/// Verifies that each attacked marginal sits within `eps` of its source,
/// up to one grid cell of slack, and reports the measured distances.
pub fn check_feasibility(
    d: &GridDistribution,
    attack: &GridDistribution,
    eps: f64,
) -> Result<Feasibility> {
    let slack = attack.grid().spacing();
    let mut dists = [0.0; 2];
    for class in 0..2u8 {
        let dist = w_infinity_1d(&d.marginal(class), &attack.marginal(class), MASS_EQ_TOL)?;
        if dist > eps + slack {
            return Err(Error::Infeasible {
                class,
                displacement: dist,
                eps,
                slack,
            });
        }
        dists[class as usize] = dist;
    }
    Ok(Feasibility {
        dist0: dists[0],
        dist1: dists[1],
        eps,
    })
}

/// Adversarial surrogate risk of `f` minus the dual value of a feasible
/// attack; nonnegative up to discretization slack, and near zero exactly
/// when both sides are optimal.
pub fn duality_gap(
    d: &GridDistribution,
    loss: &Loss,
    f: &GridFunction,
    attack: &GridDistribution,
    eps: f64,
    tol: f64,
) -> Result<GapReport> {
    let feasibility = check_feasibility(d, attack, eps)?;
    let primal = adv_surrogate_risk(d, loss, f, eps)?;
    let mut dual = dual_surrogate_objective(attack, loss, tol)?;
    dual.feasibility = Some(feasibility);
    Ok(GapReport {
        primal,
        gap: primal - dual.value,
        dual,
    })
}

struct MovableAtom {
    mass: f64,
    class: u8,
    choice_slots: Vec<usize>,
}

/// Exhaustive dual maximization: every mass-bearing (node, class) atom
/// tries each lattice node within `eps`, and the best node-value total
/// wins. Choices are ordered nearest-first, so ties go to the attack
/// moving the least.
fn brute_force_dual_core(
    d: &GridDistribution,
    eps: f64,
    lattice: &Grid,
    mut node_value: impl FnMut(f64, f64) -> Result<f64>,
) -> Result<(f64, GridDistribution)> {
    if !eps.is_finite() || eps < 0.0 {
        return Err(Error::Precondition {
            reason: format!("eps {eps} must be finite and nonnegative"),
        });
    }
    let mut atoms: Vec<(f64, f64, u8)> = Vec::new();
    for (_, x, m0, m1) in d.atoms() {
        if m0 > 0.0 {
            atoms.push((x, m0, 0));
        }
        if m1 > 0.0 {
            atoms.push((x, m1, 1));
        }
    }
    if atoms.len() > BRUTE_ATOM_CAP {
        return Err(Error::TooManyAtoms {
            atoms: atoms.len(),
            cap: BRUTE_ATOM_CAP,
        });
    }
    let slop = 1e-9 * eps.max(lattice.spacing());
    let mut dest_nodes: Vec<usize> = Vec::new();
    let mut slot_of = vec![usize::MAX; lattice.count()];
    let mut movable: Vec<MovableAtom> = Vec::new();
    let mut combos: u128 = 1;
    for &(x, mass, class) in &atoms {
        let mut idx: Vec<usize> = (0..lattice.count())
            .filter(|&k| (lattice.node(k) - x).abs() <= eps + slop)
            .collect();
        if idx.is_empty() {
            return Err(Error::Precondition {
                reason: format!("no lattice node within {eps} of the atom at {x}"),
            });
        }
        idx.sort_by(|&p, &q| {
            let dp = (lattice.node(p) - x).abs();
            let dq = (lattice.node(q) - x).abs();
            dp.total_cmp(&dq).then(p.cmp(&q))
        });
        let choice_slots: Vec<usize> = idx
            .iter()
            .map(|&k| {
                if slot_of[k] == usize::MAX {
                    slot_of[k] = dest_nodes.len();
                    dest_nodes.push(k);
                }
                slot_of[k]
            })
            .collect();
        combos = combos.saturating_mul(choice_slots.len() as u128);
        movable.push(MovableAtom {
            mass,
            class,
            choice_slots,
        });
    }
    if combos > BRUTE_COMBO_CAP {
        return Err(Error::TooLarge {
            combinations: combos,
            cap: BRUTE_COMBO_CAP,
        });
    }
    let slots = dest_nodes.len();
    let mut acc0 = vec![0.0; slots];
    let mut acc1 = vec![0.0; slots];
    let mut state = vec![0usize; movable.len()];
    let mut best = f64::NEG_INFINITY;
    let mut best_state = state.clone();
    loop {
        acc0.fill(0.0);
        acc1.fill(0.0);
        for (atom, &s) in movable.iter().zip(&state) {
            let slot = atom.choice_slots[s];
            if atom.class == 0 {
                acc0[slot] += atom.mass;
            } else {
                acc1[slot] += atom.mass;
            }
        }
        let mut value = 0.0;
        for s in 0..slots {
            if acc0[s] > 0.0 || acc1[s] > 0.0 {
                value += node_value(acc0[s], acc1[s])?;
            }
        }
        if value > best {
            best = value;
            best_state.copy_from_slice(&state);
        }
        let mut i = state.len();
        while i > 0 && state[i - 1] + 1 == movable[i - 1].choice_slots.len() {
            state[i - 1] = 0;
            i -= 1;
        }
        if i == 0 {
            break;
        }
        state[i - 1] += 1;
    }
    let mut mass0 = vec![0.0; lattice.count()];
    let mut mass1 = vec![0.0; lattice.count()];
    for (atom, &s) in movable.iter().zip(&best_state) {
        let node = dest_nodes[atom.choice_slots[s]];
        if atom.class == 0 {
            mass0[node] += atom.mass;
        } else {
            mass1[node] += atom.mass;
        }
    }
    let attack = GridDistribution::new_unnormalized(*lattice, mass0, mass1)?;
    Ok((best, attack))
}

/// Exhaustively maximized surrogate dual over per-atom lattice moves.
pub fn brute_force_dual_surrogate(
    d: &GridDistribution,
    loss: &Loss,
    eps: f64,
    lattice: &Grid,
    tol: f64,
) -> Result<DualReport> {
    let mut memo: HashMap<(u64, u64), f64> = HashMap::new();
    let (value, attack) = brute_force_dual_core(d, eps, lattice, |m0, m1| {
        let key = (m0.to_bits(), m1.to_bits());
        if let Some(&v) = memo.get(&key) {
            return Ok(v);
        }
        let m = m0 + m1;
        let v = m * loss.min_conditional_risk(m1 / m, tol)?;
        memo.insert(key, v);
        Ok(v)
    })?;
    let feasibility = check_feasibility(d, &attack, eps)?;
    Ok(DualReport {
        value,
        feasibility: Some(feasibility),
        eta_star: eta_star(&attack),
        attack: Some(attack),
    })
}

/// Exhaustively maximized zero-one dual over per-atom lattice moves.
pub fn brute_force_dual_classification(
    d: &GridDistribution,
    eps: f64,
    lattice: &Grid,
) -> Result<DualReport> {
    let (value, attack) = brute_force_dual_core(d, eps, lattice, |m0, m1| Ok(m0.min(m1)))?;
    let feasibility = check_feasibility(d, &attack, eps)?;
    Ok(DualReport {
        value,
        feasibility: Some(feasibility),
        eta_star: eta_star(&attack),
        attack: Some(attack),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn example2() -> GridDistribution {
        let grid = Grid::new(-0.5, 1.0, 2).unwrap();
        GridDistribution::new(grid, vec![0.375, 0.125], vec![0.125, 0.375]).unwrap()
    }

    fn random_instance(rng: &mut ChaCha8Rng, grid: Grid, atoms: usize) -> GridDistribution {
        let mut mass0 = vec![0.0; grid.count()];
        let mut mass1 = vec![0.0; grid.count()];
        for _ in 0..atoms {
            let k = rng.gen_range(0..grid.count());
            let m = rng.gen_range(0.02..0.15);
            if rng.gen_bool(0.5) {
                mass0[k] += m;
            } else {
                mass1[k] += m;
            }
        }
        GridDistribution::new(grid, mass0, mass1).unwrap()
    }

    #[test]
    fn surrogate_risk_of_zero_scores_is_loss_at_zero_times_mass() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let grid = Grid::new(-1.0, 0.25, 9).unwrap();
        let d = random_instance(&mut rng, grid, 4);
        let f = GridFunction::constant(grid, 0.0).unwrap();
        for loss in [Loss::Hinge, Loss::Logistic, Loss::rho_margin(1.0).unwrap()] {
            let r = surrogate_risk(&d, &loss, &f).unwrap();
            let expect = loss.value_at_zero() * d.total_mass();
            assert!(
                (r - expect).abs() < 1e-12,
                "{}: {r} vs {expect}",
                loss.name()
            );
        }
    }

    #[test]
    fn surrogate_risk_matches_quadrature_on_two_posterior_nodes() {
        let d = example2();
        let loss = Loss::rho_margin(1.0).unwrap();
        let f = GridFunction::new(*d.grid(), vec![f64::NEG_INFINITY, 1.0]).unwrap();
        let r = surrogate_risk(&d, &loss, &f).unwrap();
        assert!((r - 0.25).abs() < 1e-12, "got {r}");
    }

    #[test]
    fn surrogate_risk_vanishes_on_correct_confident_atom() {
        let grid = Grid::new(2.0, 1.0, 1).unwrap();
        let d = GridDistribution::new(grid, vec![0.0], vec![1.0]).unwrap();
        let f = GridFunction::constant(grid, 1.0).unwrap();
        assert_eq!(surrogate_risk(&d, &Loss::Hinge, &f).unwrap(), 0.0);
    }

    #[test]
    fn adversarial_surrogate_risk_at_zero_radius_is_plain_risk() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let grid = Grid::new(-1.0, 0.25, 9).unwrap();
        let d = random_instance(&mut rng, grid, 5);
        let f = GridFunction::from_fn(grid, |x| (3.0 * x).sin()).unwrap();
        for loss in [Loss::Hinge, Loss::Exponential] {
            let plain = surrogate_risk(&d, &loss, &f).unwrap();
            let adv = adv_surrogate_risk(&d, &loss, &f, 0.0).unwrap();
            assert!((plain - adv).abs() < 1e-12);
        }
    }

    #[test]
    fn adversarial_surrogate_risk_of_separated_step_scores_is_zero() {
        let grid = Grid::new(-1.0, 0.25, 9).unwrap();
        let mut mass0 = vec![0.0; 9];
        let mut mass1 = vec![0.0; 9];
        mass0[2] = 0.5;
        mass1[6] = 0.5;
        let d = GridDistribution::new(grid, mass0, mass1).unwrap();
        let f = GridFunction::from_fn(grid, |x| if x > 0.0 { 1.0 } else { -1.0 }).unwrap();
        let loss = Loss::rho_margin(1.0).unwrap();
        let r = adv_surrogate_risk(&d, &loss, &f, 0.25).unwrap();
        assert_eq!(r, 0.0);
        let c = GridFunction::constant(grid, 0.0).unwrap();
        let r0 = adv_surrogate_risk(&d, &loss, &c, 0.5).unwrap();
        assert!((r0 - loss.value_at_zero() * d.total_mass()).abs() < 1e-12);
    }

    #[test]
    fn adversarial_classification_risk_flips_with_radius() {
        let grid = Grid::new(-1.5, 0.05, 61).unwrap();
        let mut mass0 = vec![0.0; 61];
        let mut mass1 = vec![0.0; 61];
        mass0[grid.index_of(-0.5).unwrap()] = 0.5;
        mass1[grid.index_of(0.5).unwrap()] = 0.5;
        let d = GridDistribution::new(grid, mass0, mass1).unwrap();
        let f = GridFunction::from_fn(grid, |x| x).unwrap();
        assert_eq!(adv_classification_risk(&d, &f, 0.25).unwrap(), 0.0);
        assert_eq!(adv_classification_risk(&d, &f, 0.6).unwrap(), 1.0);
        assert_eq!(classification_risk(&d, &f).unwrap(), 0.0);
    }

    #[test]
    fn adversarial_risks_grow_with_radius() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let grid = Grid::new(-2.0, 0.25, 17).unwrap();
        let d = random_instance(&mut rng, grid, 5);
        let f = GridFunction::from_fn(grid.extended(4), |x| x.cos() - 0.3).unwrap();
        let mut last_class = 0.0;
        let mut last_surr = 0.0;
        for (i, eps) in [0.0, 0.25, 0.5, 1.0].into_iter().enumerate() {
            let rc = adv_classification_risk(&d, &f, eps).unwrap();
            let rs = adv_surrogate_risk(&d, &Loss::Logistic, &f, eps).unwrap();
            if i > 0 {
                assert!(rc >= last_class - 1e-12);
                assert!(rs >= last_surr - 1e-12);
            }
            last_class = rc;
            last_surr = rs;
        }
    }

    #[test]
    fn coverage_and_mismatch_errors_are_reported() {
        let grid = Grid::new(0.0, 0.5, 3).unwrap();
        let d = GridDistribution::new(grid, vec![0.25, 0.0, 0.0], vec![0.0, 0.0, 0.25]).unwrap();
        let f = GridFunction::constant(grid, 1.0).unwrap();
        assert!(matches!(
            adv_surrogate_risk(&d, &Loss::Hinge, &f, 0.5),
            Err(Error::Coverage { .. })
        ));
        let shifted = GridFunction::constant(Grid::new(0.1, 0.5, 3).unwrap(), 1.0).unwrap();
        assert!(matches!(
            surrogate_risk(&d, &Loss::Hinge, &shifted),
            Err(Error::GridMismatch { .. })
        ));
        let narrow = GridFunction::constant(Grid::new(0.5, 0.5, 1).unwrap(), 1.0).unwrap();
        assert!(matches!(
            surrogate_risk(&d, &Loss::Hinge, &narrow),
            Err(Error::Coverage { .. })
        ));
    }

    #[test]
    fn posterior_extension_is_nearest_with_left_ties() {
        let grid = Grid::new(0.0, 1.0, 5).unwrap();
        let d = GridDistribution::new(
            grid,
            vec![0.0, 0.0, 0.0, 0.25, 0.0],
            vec![0.0, 0.25, 0.0, 0.0, 0.0],
        )
        .unwrap();
        let eta = eta_star(&d);
        assert_eq!(eta.values(), &[1.0, 1.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn dual_objectives_match_closed_forms() {
        let grid = Grid::new(0.0, 1.0, 3).unwrap();
        let balanced =
            GridDistribution::new(grid, vec![0.2, 0.2, 0.1], vec![0.2, 0.2, 0.1]).unwrap();
        let r = dual_classification_objective(&balanced).unwrap();
        assert!((r.value - 0.5).abs() < 1e-12);

        let pure = GridDistribution::new(grid, vec![0.5, 0.0, 0.0], vec![0.0, 0.0, 0.5]).unwrap();
        assert_eq!(dual_classification_objective(&pure).unwrap().value, 0.0);
        let surr = dual_surrogate_objective(&pure, &Loss::Hinge, 1e-8).unwrap();
        assert!(surr.value.abs() < 1e-9);

        let single =
            GridDistribution::new(Grid::new(0.0, 1.0, 1).unwrap(), vec![0.5], vec![0.5]).unwrap();
        let exp = dual_surrogate_objective(&single, &Loss::Exponential, 1e-8).unwrap();
        assert!((exp.value - 1.0).abs() < 1e-7, "got {}", exp.value);

        let unmoved = example2();
        let rho = Loss::rho_margin(1.0).unwrap();
        assert!(
            (dual_surrogate_objective(&unmoved, &rho, 1e-8)
                .unwrap()
                .value
                - 0.25)
                .abs()
                < 1e-9
        );
        assert!((dual_classification_objective(&unmoved).unwrap().value - 0.25).abs() < 1e-12);
    }

    #[test]
    fn quantile_walk_matches_hand_checked_distances() {
        let q = vec![(0.0, 0.5), (1.0, 0.5)];
        assert_eq!(w_infinity_1d(&q, &q, 1e-9).unwrap(), 0.0);
        let shifted: Vec<(f64, f64)> = q.iter().map(|&(x, m)| (x + 0.3, m)).collect();
        let d = w_infinity_1d(&q, &shifted, 1e-9).unwrap();
        assert!((d - 0.3).abs() < 1e-12);
        assert_eq!(
            w_infinity_1d(&shifted, &q, 1e-9).unwrap(),
            w_infinity_1d(&q, &shifted, 1e-9).unwrap()
        );

        let single = vec![(0.0, 1.0)];
        let other = vec![(0.5, 1.0)];
        assert_eq!(w_infinity_1d(&single, &other, 1e-9).unwrap(), 0.5);

        let split = vec![(0.25, 0.25), (0.75, 0.75)];
        let dd = w_infinity_1d(&q, &split, 1e-9).unwrap();
        assert!((dd - 0.75).abs() < 1e-12, "got {dd}");

        let short = vec![(0.0, 0.7)];
        assert!(matches!(
            w_infinity_1d(&q, &short, 1e-9),
            Err(Error::MassMismatch { .. })
        ));
    }

    #[test]
    fn infeasible_attacks_are_rejected_with_the_offending_class() {
        let grid = Grid::new(0.0, 0.25, 9).unwrap();
        let mut mass0 = vec![0.0; 9];
        let mass1 = vec![0.0; 9];
        mass0[0] = 0.5;
        let mut m1 = mass1.clone();
        m1[8] = 0.5;
        let d = GridDistribution::new(grid, mass0.clone(), m1.clone()).unwrap();
        let mut moved0 = vec![0.0; 9];
        moved0[3] = 0.5;
        let attack = GridDistribution::new(grid, moved0, m1).unwrap();
        match check_feasibility(&d, &attack, 0.25) {
            Err(Error::Infeasible {
                class,
                displacement,
                ..
            }) => {
                assert_eq!(class, 0);
                assert!((displacement - 0.75).abs() < 1e-12);
            }
            other => panic!("expected infeasibility, got {other:?}"),
        }
        let ok = check_feasibility(&d, &d, 0.0).unwrap();
        assert_eq!((ok.dist0, ok.dist1), (0.0, 0.0));
    }

    #[test]
    fn unmoved_attack_lower_bounds_any_classifier() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let grid = Grid::new(-1.0, 0.25, 9).unwrap();
        for _ in 0..10 {
            let d = random_instance(&mut rng, grid, 4);
            let values: Vec<f64> = (0..9).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let f = GridFunction::new(grid, values).unwrap();
            let report = duality_gap(&d, &Loss::Hinge, &f, &d, 0.0, 1e-8).unwrap();
            assert!(report.gap >= -1e-6, "gap {}", report.gap);
        }
    }

    #[test]
    fn weak_duality_holds_against_brute_force_on_small_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let grid = Grid::new(-1.0, 0.25, 9).unwrap();
        let eps = 0.25;
        for _ in 0..10 {
            let d = random_instance(&mut rng, grid, 3);
            let wide = d.extend(eps).unwrap();
            let values: Vec<f64> = (0..wide.grid().count())
                .map(|_| rng.gen_range(-2.0..2.0))
                .collect();
            let f = GridFunction::new(*wide.grid(), values).unwrap();
            let primal = adv_surrogate_risk(&d, &Loss::Hinge, &f, eps).unwrap();
            let brute =
                brute_force_dual_surrogate(&d, &Loss::Hinge, eps, wide.grid(), 1e-8).unwrap();
            assert!(
                primal >= brute.value - 1e-6,
                "primal {primal} vs brute {}",
                brute.value
            );
        }
    }

    #[test]
    fn brute_force_on_a_single_node_matches_the_unmoved_dual() {
        let grid = Grid::new(0.0, 1.0, 1).unwrap();
        let d = GridDistribution::new(grid, vec![0.3], vec![0.2]).unwrap();
        let lattice = Grid::new(-0.25, 0.25, 3).unwrap();
        let brute = brute_force_dual_surrogate(&d, &Loss::Hinge, 0.25, &lattice, 1e-8).unwrap();
        let unmoved = dual_surrogate_objective(&d, &Loss::Hinge, 1e-8).unwrap();
        assert!((brute.value - unmoved.value).abs() < 1e-12);
        assert!((brute.value - 0.4).abs() < 1e-8, "got {}", brute.value);
    }

    #[test]
    fn brute_force_finds_zero_when_supports_cannot_meet() {
        let grid = Grid::new(0.0, 0.1, 12).unwrap();
        let mut mass0 = vec![0.0; 12];
        let mut mass1 = vec![0.0; 12];
        mass1[0] = 0.5;
        mass0[11] = 0.5;
        let d = GridDistribution::new(grid, mass0, mass1).unwrap();
        let class = brute_force_dual_classification(&d, 0.5, &grid).unwrap();
        assert_eq!(class.value, 0.0);
        let surr = brute_force_dual_surrogate(&d, &Loss::Hinge, 0.5, &grid, 1e-8).unwrap();
        assert!(surr.value.abs() < 1e-9);
    }

    #[test]
    fn brute_force_meets_in_the_middle_when_exactly_reachable() {
        let grid = Grid::new(0.0, 0.5, 3).unwrap();
        let d = GridDistribution::new(grid, vec![0.0, 0.0, 0.5], vec![0.5, 0.0, 0.0]).unwrap();
        let report = brute_force_dual_classification(&d, 0.5, &grid).unwrap();
        assert_eq!(report.value, 0.5);
        let attack = report.attack.unwrap();
        assert_eq!(attack.mass0(), &[0.0, 0.5, 0.0]);
        assert_eq!(attack.mass1(), &[0.0, 0.5, 0.0]);
    }

    #[test]
    fn brute_force_keeps_the_least_motion_maximizer_on_ties() {
        let d = example2();
        let lattice = Grid::new(-0.75, 0.25, 7).unwrap();
        let rho = Loss::rho_margin(1.0).unwrap();
        let report = brute_force_dual_surrogate(&d, &rho, 0.25, &lattice, 1e-8).unwrap();
        assert!((report.value - 0.25).abs() < 1e-9, "got {}", report.value);
        let attack = report.attack.unwrap();
        let k_neg = lattice.index_of(-0.5).unwrap();
        let k_pos = lattice.index_of(0.5).unwrap();
        assert_eq!(attack.mass0()[k_neg], 0.375);
        assert_eq!(attack.mass1()[k_neg], 0.125);
        assert_eq!(attack.mass0()[k_pos], 0.125);
        assert_eq!(attack.mass1()[k_pos], 0.375);
        assert!((attack.total_mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn brute_force_size_guards_trigger() {
        let grid = Grid::new(0.0, 1.0, 9).unwrap();
        let d = GridDistribution::new_unnormalized(grid, vec![0.1; 9], vec![0.1; 9]).unwrap();
        assert!(matches!(
            brute_force_dual_classification(&d, 1.0, &grid),
            Err(Error::TooManyAtoms { .. })
        ));

        let fine = Grid::new(0.0, 0.05, 201).unwrap();
        let mut mass0 = vec![0.0; 201];
        let mut mass1 = vec![0.0; 201];
        for k in 0..3 {
            mass0[40 * k] = 0.1;
            mass1[40 * k + 20] = 0.1;
        }
        let big = GridDistribution::new(fine, mass0, mass1).unwrap();
        assert!(matches!(
            brute_force_dual_classification(&big, 2.0, &fine),
            Err(Error::TooLarge { .. })
        ));
    }

    #[test]
    fn risk_report_serializes_with_stable_names() {
        let report = RiskReport {
            value: 0.25,
            eps: 0.5,
            kind: RiskKind::Classification,
            adversarial: true,
            distribution: "example".into(),
            function: "step".into(),
            spacing: 0.001,
        };
        let text = serde_json::to_string(&report).unwrap();
        assert!(text.contains("\"kind\":\"classification\""));
        assert!(text.contains("\"eps\":0.5"));
        let dual = DualReport {
            value: 0.1,
            feasibility: Some(Feasibility {
                dist0: 0.0,
                dist1: 0.25,
                eps: 0.25,
            }),
            eta_star: eta_star(&example2()),
            attack: None,
        };
        let summary = dual.summary_json();
        assert_eq!(summary["value"], 0.1);
        assert_eq!(summary["feasibility"]["dist1"], 0.25);
    }
}
