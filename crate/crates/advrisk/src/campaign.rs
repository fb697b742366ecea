//! Bound-verification campaigns: sample classifiers from a named
//! family, measure both adversarial excess risks against certified
//! transport baselines, and test every sample against a bound with an
//! explicit slack budget.
//!
//! Baselines are the dual transport values of the supplied attack, so
//! both excesses are overestimates of the true excess risks and a
//! certified duality gap keeps the margin honest to within one slack.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::attack::{primal_witness, AttackPair};
use crate::bounds::BoundSpec;
use crate::error::{Error, Result};
use crate::grid::GridFunction;
use crate::loss::{Loss, SCORE_BOUND};
use crate::risk::{
    adv_classification_risk, adv_surrogate_risk, dual_classification_objective,
    dual_surrogate_objective, slack_budget,
};

/// Stride that decorrelates per-sample seeds derived from one seed.
const SEED_STRIDE: u64 = 0x9E37_79B9_7F4A_7C15;

/// Score range of the random piecewise family.
const PIECEWISE_SCALE: f64 = 2.0;

/// Knot count range of the random piecewise family.
const PIECEWISE_KNOTS: std::ops::RangeInclusive<usize> = 2..=8;

/// Noise amplitude added to the witness scores.
const WITNESS_NOISE: f64 = 0.5;

/// Classifier family a campaign samples from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplerKind {
    /// Threshold scores `x - t` with `t` uniform over the padded domain.
    RandomThreshold,
    /// Piecewise-linear scores through uniformly random anchor values.
    RandomPiecewise,
    /// The attack's witness scores plus bounded uniform noise.
    PerturbedWitness,
    /// Vanishing scores `1/n` carrying the wrong sign on majority-one
    /// nodes, indexed by sample number.
    FnSequence,
}

impl SamplerKind {
    pub const ALL: [SamplerKind; 4] = [
        SamplerKind::RandomThreshold,
        SamplerKind::RandomPiecewise,
        SamplerKind::PerturbedWitness,
        SamplerKind::FnSequence,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SamplerKind::RandomThreshold => "random-threshold",
            SamplerKind::RandomPiecewise => "random-piecewise",
            SamplerKind::PerturbedWitness => "perturbed-witness",
            SamplerKind::FnSequence => "fn-sequence",
        }
    }
}

impl fmt::Display for SamplerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SamplerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SamplerKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Precondition {
                reason: format!(
                    "unknown sampler kind {s:?}; expected one of random-threshold, \
                     random-piecewise, perturbed-witness, fn-sequence"
                ),
            })
    }
}

/// One sampled classifier's excess risks and bound margin.
#[derive(Debug, Clone, Serialize)]
pub struct SampleRow {
    pub index: usize,
    /// Seed the sample's generator was constructed with.
    pub seed: u64,
    /// Adversarial surrogate risk minus the dual baseline.
    pub surrogate_excess: f64,
    /// Adversarial classification risk minus the dual baseline.
    pub classification_excess: f64,
    /// The bound evaluated at the surrogate excess.
    pub bound_value: f64,
    /// `bound_value - classification_excess`; a violation when below
    /// the negated slack.
    pub margin: f64,
    pub slack: f64,
}

/// Aggregates of one campaign, recomputable from its rows.
#[derive(Debug, Clone, Serialize)]
pub struct CampaignSummary {
    pub sampler: SamplerKind,
    pub samples: usize,
    /// Rows with `margin < -slack`.
    pub violations: usize,
    pub min_margin: f64,
    pub slack: f64,
    pub spacing: f64,
    pub kappa: f64,
    /// Dual transport value against the zero-one loss.
    pub classification_baseline: f64,
    /// Dual transport value against the surrogate loss.
    pub surrogate_baseline: f64,
    pub runtime_seconds: f64,
}

/// Rows plus summary of one campaign run.
#[derive(Debug, Clone, Serialize)]
pub struct CampaignReport {
    pub rows: Vec<SampleRow>,
    pub summary: CampaignSummary,
}

impl CampaignReport {
    /// Rows as CSV with a header, one newline-terminated record per
    /// sample in index order.
    pub fn rows_csv(&self) -> String {
        let mut out = String::from(
            "index,seed,surrogate_excess,classification_excess,bound_value,margin,slack\n",
        );
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                r.index,
                r.seed,
                r.surrogate_excess,
                r.classification_excess,
                r.bound_value,
                r.margin,
                r.slack
            ));
        }
        out
    }

    pub fn summary_json(&self) -> serde_json::Value {
        serde_json::to_value(&self.summary).expect("summary serializes")
    }
}

fn sample_scores(
    kind: SamplerKind,
    index: usize,
    rng: &mut ChaCha8Rng,
    attack: &AttackPair,
    witness: Option<&GridFunction>,
) -> Result<GridFunction> {
    let grid = *attack.source.grid();
    match kind {
        SamplerKind::RandomThreshold => {
            let pad = attack.eps + 0.25 * (grid.hi() - grid.lo());
            let t = rng.gen_range((grid.lo() - pad)..=(grid.hi() + pad));
            GridFunction::from_fn(grid, |x| x - t)
        }
        SamplerKind::RandomPiecewise => {
            let k = rng.gen_range(PIECEWISE_KNOTS);
            let ys: Vec<f64> = (0..k)
                .map(|_| rng.gen_range(-PIECEWISE_SCALE..=PIECEWISE_SCALE))
                .collect();
            let (lo, hi) = (grid.lo(), grid.hi());
            GridFunction::from_fn(grid, move |x| {
                let t = (x - lo) / (hi - lo) * (k - 1) as f64;
                let j = (t.floor().max(0.0) as usize).min(k - 2);
                let frac = (t - j as f64).clamp(0.0, 1.0);
                ys[j] * (1.0 - frac) + ys[j + 1] * frac
            })
        }
        SamplerKind::PerturbedWitness => {
            let base = witness.expect("witness precomputed for this sampler");
            let values = base
                .values()
                .iter()
                .map(|&v| {
                    (v + rng.gen_range(-WITNESS_NOISE..=WITNESS_NOISE))
                        .clamp(-SCORE_BOUND, SCORE_BOUND)
                })
                .collect();
            GridFunction::new(grid, values)
        }
        SamplerKind::FnSequence => {
            let step = 1.0 / (index + 1) as f64;
            let values = attack
                .eta_star
                .values()
                .iter()
                .map(|&eta| if eta >= 0.5 { -step } else { step })
                .collect();
            GridFunction::new(grid, values)
        }
    }
}

/// Knobs of one campaign run, separate from the distribution, loss, and
/// bound under test.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CampaignSettings {
    pub sampler: SamplerKind,
    pub samples: usize,
    pub seed: u64,
    /// Slack multiplier on one grid spacing of mass.
    pub kappa: f64,
    /// Tolerance forwarded to the scalar minimizations.
    pub tol: f64,
}

/// Runs one campaign: sampled classifiers, each scored against `bound`
/// at the slack implied by the grid spacing and the settings' `kappa`.
pub fn run_campaign(
    attack: &AttackPair,
    loss: &Loss,
    bound: &BoundSpec,
    settings: &CampaignSettings,
) -> Result<CampaignReport> {
    let started = Instant::now();
    let CampaignSettings {
        sampler,
        samples,
        seed,
        kappa,
        tol,
    } = *settings;
    if samples == 0 {
        return Err(Error::Precondition {
            reason: "sample count must be at least 1".to_string(),
        });
    }
    if !(kappa > 0.0) || !kappa.is_finite() {
        return Err(Error::Domain {
            what: "slack multiplier kappa",
            value: kappa,
            lo: 0.0,
            hi: f64::INFINITY,
        });
    }
    let d = &attack.source;
    let eps = attack.eps;
    let classification_baseline = dual_classification_objective(&attack.attacked)?.value;
    let surrogate_baseline = dual_surrogate_objective(&attack.attacked, loss, tol)?.value;
    let slack = slack_budget(d.grid().spacing(), d.total_mass(), kappa);
    let witness = if sampler == SamplerKind::PerturbedWitness {
        Some(primal_witness(attack, loss, tol)?)
    } else {
        None
    };
    let mut rows = Vec::with_capacity(samples);
    let mut violations = 0;
    let mut min_margin = f64::INFINITY;
    for index in 0..samples {
        let sample_seed = seed ^ (index as u64).wrapping_mul(SEED_STRIDE);
        let mut rng = ChaCha8Rng::seed_from_u64(sample_seed);
        let f = sample_scores(sampler, index, &mut rng, attack, witness.as_ref())?;
        let surrogate_excess = adv_surrogate_risk(d, loss, &f, eps)? - surrogate_baseline;
        let classification_excess = adv_classification_risk(d, &f, eps)? - classification_baseline;
        let bound_value = bound.eval(surrogate_excess);
        let margin = bound_value - classification_excess;
        if margin < -slack {
            violations += 1;
        }
        min_margin = min_margin.min(margin);
        rows.push(SampleRow {
            index,
            seed: sample_seed,
            surrogate_excess,
            classification_excess,
            bound_value,
            margin,
            slack,
        });
    }
    Ok(CampaignReport {
        rows,
        summary: CampaignSummary {
            sampler,
            samples,
            violations,
            min_margin,
            slack,
            spacing: d.grid().spacing(),
            kappa,
            classification_baseline,
            surrogate_baseline,
            runtime_seconds: started.elapsed().as_secs_f64(),
        },
    })
}
