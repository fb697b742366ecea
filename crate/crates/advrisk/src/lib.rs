// Negated comparisons are used throughout to reject NaN alongside the
// out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Adversarial classification and surrogate risk toolkit.
//!
//! Computes adversarial classification and surrogate risks for
//! one-dimensional grid distributions, constructs optimal adversarial
//! attacks, assembles certified surrogate-risk bound functions, and
//! verifies every bound numerically on sampled classifiers.

pub mod attack;
pub mod bounds;
pub mod campaign;
pub mod curve;
pub mod envelope;
pub mod error;
pub mod grid;
pub mod loss;
pub mod risk;

pub use attack::{
    check_complementary_slackness, check_gaussian_regime, delta_of_z, dual_best_attack,
    lower_bound_sequence, make_gaussian, make_massart, make_realizable, mass_where_eta,
    primal_witness, shift_attack, AttackPair, LowerBoundReport, SlacknessReport,
};
pub use bounds::{
    general_concave_bound, massart_bound, massart_bound_with_slack, massart_constant, nonadv_bound,
    optimize_r, phi_tilde, phi_tilde_with_atom, prop4_bound, proto_bound_r, BoundKind, BoundSpec,
    MassartConstants, ROptimum,
};
pub use campaign::{
    run_campaign, CampaignReport, CampaignSettings, CampaignSummary, SampleRow, SamplerKind,
};
pub use curve::{Direction, Interp, MonotoneCurve};
pub use envelope::{
    cdf_abs_eta, cdf_abs_eta_of, concave_envelope, default_atom_tol, improper_power_integral,
    rs_integral, EnvelopeCdf, ImproperIntegral,
};
pub use error::{Error, Result};
pub use grid::{Grid, GridDistribution, GridFunction};
pub use loss::{CalibrationMap, ConsistencyReport, Loss};
pub use risk::{
    adv_classification_risk, adv_surrogate_risk, adv_surrogate_risk_by_class,
    brute_force_dual_classification, brute_force_dual_surrogate, check_feasibility,
    classification_risk, dual_classification_objective, dual_surrogate_objective, duality_gap,
    eta_star, slack_budget, surrogate_risk, surrogate_risk_by_class, w_infinity_1d, DualReport,
    Feasibility, GapReport, RiskKind, RiskReport,
};
