//! Subcommand implementations: build distributions and attacks, run the
//! library pipeline, and write CSV/JSON reports into the output
//! directory.

use std::fs;
use std::path::Path;

use advrisk::attack::{
    check_complementary_slackness, check_gaussian_regime, dual_best_attack, lower_bound_sequence,
    make_gaussian, make_massart, make_realizable, mass_where_eta, primal_witness, AttackPair,
};
use advrisk::bounds::{
    massart_bound, massart_bound_with_slack, massart_constant, phi_tilde, phi_tilde_with_atom,
    proto_bound_r, BoundSpec,
};
use advrisk::campaign::{run_campaign, CampaignSettings};
use advrisk::envelope::cdf_abs_eta;
use advrisk::error::{Error, Result};
use advrisk::grid::{GridDistribution, GridFunction};
use advrisk::loss::{CalibrationMap, Loss, DEFAULT_TOL};
use advrisk::risk::{
    adv_classification_risk, adv_surrogate_risk, brute_force_dual_classification,
    brute_force_dual_surrogate, classification_risk, dual_classification_objective,
    dual_surrogate_objective, duality_gap, slack_budget, surrogate_risk,
};
use serde_json::json;

use crate::config::{BoundRequest, CampaignConfig};

/// Tolerance forwarded to every scalar minimization and calibration sweep.
const TOL: f64 = DEFAULT_TOL;

/// Posterior distance from one half below which attacked mass counts as
/// sitting exactly at one half.
const ENV_ATOM_TOL: f64 = 1e-9;

/// Environment stamp embedded in every report.
fn stamp(spacing: f64, kappa: f64) -> serde_json::Value {
    json!({
        "version": env!("CARGO_PKG_VERSION"),
        "spacing": spacing,
        "kappa": kappa,
    })
}

fn pretty(value: &serde_json::Value) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("report serializes");
    text.push('\n');
    text
}

/// Writes `name` under the output directory, creating it as needed.
fn write_file(out: &Path, name: &str, contents: &str) -> Result<()> {
    fs::create_dir_all(out)?;
    fs::write(out.join(name), contents)?;
    Ok(())
}

/// Builds the named example distribution from the config parameters.
fn build_example(cfg: &CampaignConfig) -> Result<GridDistribution> {
    match cfg.example.as_str() {
        "realizable" => make_realizable(cfg.delta, cfg.spacing),
        "massart" => make_massart(cfg.delta, cfg.spacing),
        "gaussian" => make_gaussian(cfg.mu0, cfg.mu1, cfg.sigma, cfg.spacing),
        other => Err(Error::Config {
            reason: format!("unknown example {other:?}; expected realizable, massart, or gaussian"),
        }),
    }
}

/// Loads the distribution, pads its grid by the perturbation radius, and
/// constructs the dual-best attack. Returns the padded distribution and
/// the pair.
fn build_attack(cfg: &CampaignConfig, loss: &Loss) -> Result<(GridDistribution, AttackPair)> {
    let d = match &cfg.distribution {
        Some(path) => GridDistribution::from_csv(&fs::read_to_string(path)?)?,
        None => build_example(cfg)?,
    };
    let padded = d.extend(cfg.eps)?;
    let attack = dual_best_attack(&padded, loss, cfg.eps, TOL)?;
    Ok((padded, attack))
}

/// Builds one requested bound against the attacked pair.
fn build_bound(
    req: BoundRequest,
    loss: &Loss,
    attack: &AttackPair,
    alpha: f64,
) -> Result<BoundSpec> {
    match req {
        BoundRequest::MassartLinear => massart_bound(loss, alpha, TOL),
        BoundRequest::MassartSlack => massart_bound_with_slack(loss, alpha, attack, TOL),
        BoundRequest::Concave => {
            let env = cdf_abs_eta(attack, ENV_ATOM_TOL, false)?;
            phi_tilde(loss, &env, TOL)
        }
        BoundRequest::ConcaveAtom => {
            let env = cdf_abs_eta(attack, ENV_ATOM_TOL, true)?;
            phi_tilde_with_atom(loss, &env, TOL)
        }
        BoundRequest::ProtoR(r) => {
            let env = cdf_abs_eta(attack, ENV_ATOM_TOL, false)?;
            proto_bound_r(loss, &env, r, TOL)
        }
    }
}

/// Smallest distance of the attacked posterior from one half over the
/// mass-bearing nodes.
fn posterior_margin(attack: &AttackPair) -> f64 {
    attack
        .attacked
        .atoms()
        .map(|(_, _, m0, m1)| (m1 / (m0 + m1) - 0.5).abs())
        .fold(f64::INFINITY, f64::min)
}

/// Reproduces a named example end to end: distribution, attack, witness,
/// duality gap, optimality conditions, and (gaussian) the envelope bundle
/// with its linear-growth check.
pub fn cmd_example(cfg: &CampaignConfig) -> Result<()> {
    let gaussian = cfg.example == "gaussian" && cfg.distribution.is_none();
    if gaussian {
        check_gaussian_regime(cfg.mu0, cfg.mu1, cfg.sigma, cfg.eps)?;
    }
    let loss = Loss::from_spec(&cfg.loss)?;
    let (d, attack) = build_attack(cfg, &loss)?;
    let witness = primal_witness(&attack, &loss, TOL)?;
    let gap = duality_gap(&d, &loss, &witness, &attack.attacked, cfg.eps, TOL)?;
    let slackness = check_complementary_slackness(&d, &loss, &witness, &attack, TOL)?;
    let class_dual = dual_classification_objective(&attack.attacked)?;
    let witness_class_risk = adv_classification_risk(&d, &witness, cfg.eps)?;
    let slack = slack_budget(cfg.spacing, d.total_mass(), cfg.kappa);
    let margin = posterior_margin(&attack);
    let at_half = mass_where_eta(&attack.attacked, |eta| (eta - 0.5).abs() <= ENV_ATOM_TOL);

    write_file(&cfg.out, "distribution.csv", &attack.source_csv())?;
    write_file(&cfg.out, "attacked.csv", &attack.attacked_csv())?;
    write_file(&cfg.out, "witness.csv", &witness.to_csv())?;
    write_file(&cfg.out, "eta_star.csv", &attack.eta_star.to_csv())?;

    let report = json!({
        "example": cfg.example,
        "params": {
            "delta": cfg.delta,
            "mu0": cfg.mu0,
            "mu1": cfg.mu1,
            "sigma": cfg.sigma,
        },
        "loss": loss.name(),
        "eps": cfg.eps,
        "attack": attack.manifest_json(),
        "duality": {
            "primal": gap.primal,
            "dual": gap.dual.value,
            "gap": gap.gap,
            "slack": slack,
            "within_slack": gap.gap.abs() <= TOL + slack,
        },
        "slackness": slackness,
        "classification": {
            "dual_value": class_dual.value,
            "witness_adv_risk": witness_class_risk,
        },
        "posterior_margin": margin,
        "mass_at_half": at_half,
        "environment": stamp(cfg.spacing, cfg.kappa),
    });
    write_file(&cfg.out, "report.json", &pretty(&report))?;

    if gaussian {
        let env = cdf_abs_eta(&attack, ENV_ATOM_TOL, false)?;
        write_file(&cfg.out, "envelope.json", &pretty(&env.to_json()))?;
        write_file(&cfg.out, "h_cdf.csv", &env.h.to_csv("z", "h"))?;
        write_file(&cfg.out, "h_envelope.csv", &env.envelope.to_csv("z", "H"))?;
        let slope = 16.0 * cfg.sigma * cfg.sigma / (cfg.mu1 - cfg.mu0 - 2.0 * cfg.eps);
        let mut excess = 0.0_f64;
        for (z, y) in env.envelope.knots() {
            excess = excess.max(y - slope * z);
        }
        let concavity = json!({
            "slope_bound": slope,
            "max_excess": excess,
            "slack": slack,
            "pass": excess <= TOL + slack,
            "environment": stamp(cfg.spacing, cfg.kappa),
        });
        write_file(&cfg.out, "concavity.json", &pretty(&concavity))?;
    }

    println!(
        "duality gap {:.6e} (slack {:.6e}), slackness pass {}",
        gap.gap, slack, slackness.pass
    );
    println!(
        "optimal classification risk within [{}, {}]",
        class_dual.value, witness_class_risk
    );
    println!("posterior margin {margin}, mass at one half {at_half}");
    Ok(())
}

/// Runs one campaign per requested bound and returns the total violation
/// count across all of them.
pub fn cmd_verify(cfg: &CampaignConfig) -> Result<u64> {
    let loss = Loss::from_spec(&cfg.loss)?;
    let (_, attack) = build_attack(cfg, &loss)?;
    let settings = CampaignSettings {
        sampler: cfg.sampler,
        samples: cfg.samples,
        seed: cfg.seed,
        kappa: cfg.kappa,
        tol: TOL,
    };
    let mut campaigns = Vec::new();
    let mut total = 0u64;
    for &req in &cfg.bounds {
        let bound = build_bound(req, &loss, &attack, cfg.alpha)?;
        let report = run_campaign(&attack, &loss, &bound, &settings)?;
        let stem = req.file_stem();
        write_file(&cfg.out, &format!("rows_{stem}.csv"), &report.rows_csv())?;
        write_file(&cfg.out, &format!("bound_{stem}.json"), &pretty(&bound.to_json()))?;
        println!(
            "{}: {} samples, {} violations, min margin {:.6e} (slack {:.6e})",
            req.label(),
            report.summary.samples,
            report.summary.violations,
            report.summary.min_margin,
            report.summary.slack,
        );
        total += report.summary.violations as u64;
        campaigns.push(json!({
            "bound": req,
            "summary": report.summary_json(),
        }));
    }
    let summary = json!({
        "config": cfg,
        "campaigns": campaigns,
        "total_violations": total,
        "environment": stamp(cfg.spacing, cfg.kappa),
    });
    write_file(&cfg.out, "summary.json", &pretty(&summary))?;
    Ok(total)
}

/// Tabulates the witness-sequence excess ratio against the sequence index
/// and writes the trend report next to the proof constants.
pub fn cmd_lowerbound(
    loss_spec: &str,
    alpha: f64,
    n_list: &str,
    eps: f64,
    spacing: f64,
    kappa: f64,
    out: &Path,
) -> Result<()> {
    let loss = Loss::from_spec(loss_spec)?;
    let constants = massart_constant(&loss, alpha, TOL)?;
    let mut ns = Vec::new();
    for part in n_list.split(',') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        ns.push(part.parse::<u64>().map_err(|_| Error::Config {
            reason: format!("invalid sequence index {part:?} in n list"),
        })?);
    }
    if ns.is_empty() {
        return Err(Error::Config {
            reason: "empty n list".into(),
        });
    }
    let mut rows = Vec::new();
    let mut csv = String::from("n,ratio\n");
    for &n in &ns {
        let row = lower_bound_sequence(&loss, alpha, n, eps, spacing, TOL)?;
        csv.push_str(&format!("{},{}\n", n, row.ratio));
        rows.push(row);
    }
    let deltas: Vec<f64> = rows
        .windows(2)
        .map(|w| (w[1].ratio - w[0].ratio).abs())
        .collect();
    let first_delta = deltas.first().copied().unwrap_or(0.0);
    let last_delta = deltas.last().copied().unwrap_or(0.0);
    let final_ratio = rows.last().expect("n list is nonempty").ratio;
    let report = json!({
        "loss": loss.name(),
        "alpha": alpha,
        "eps": eps,
        "proof_constant": constants.constant,
        "conjectured_constant": constants.conjectured,
        "rows": rows,
        "final_ratio": final_ratio,
        "first_delta": first_delta,
        "last_delta": last_delta,
        "converging": last_delta <= first_delta + TOL,
        "environment": stamp(spacing, kappa),
    });
    write_file(out, "lowerbound.csv", &csv)?;
    write_file(out, "lowerbound.json", &pretty(&report))?;
    println!(
        "final ratio {} (proof constant {}, conjectured {})",
        final_ratio, constants.constant, constants.conjectured
    );
    Ok(())
}

/// Writes the conditional-risk curves, the calibration transform, the
/// pointwise minimizer curve, and the consistency report for one loss.
pub fn cmd_losscurves(loss_spec: &str, kappa: f64, out: &Path) -> Result<()> {
    let loss = Loss::from_spec(loss_spec)?;
    let consistency = loss.check_consistency(TOL)?;
    let cal = CalibrationMap::new(&loss, TOL)?;
    let steps = 200usize;
    let spacing = 1.0 / steps as f64;
    let mut cstar = String::from("eta,cstar\n");
    let mut cminus = String::from("eta,cminus\n");
    let mut alpha_curve = String::from("eta,alpha\n");
    let mut psi = String::from("theta,psi\n");
    for k in 0..=steps {
        let eta = k as f64 * spacing;
        cstar.push_str(&format!("{},{}\n", eta, loss.min_conditional_risk(eta, TOL)?));
        cminus.push_str(&format!("{},{}\n", eta, loss.min_misclassify_risk(eta, TOL)?));
        alpha_curve.push_str(&format!("{},{}\n", eta, loss.smallest_minimizer(eta, TOL)?));
        psi.push_str(&format!("{},{}\n", eta, cal.psi(eta)?));
    }
    write_file(out, "cstar.csv", &cstar)?;
    write_file(out, "cminus.csv", &cminus)?;
    write_file(out, "alpha.csv", &alpha_curve)?;
    write_file(out, "psi.csv", &psi)?;
    let consistent = consistency.consistent;
    let adversarially = consistency.adversarially_consistent;
    let report = json!({
        "consistency": consistency,
        "phi_at_zero": loss.value_at_zero(),
        "environment": stamp(spacing, kappa),
    });
    write_file(out, "consistency.json", &pretty(&report))?;
    println!(
        "{}: consistent {}, adversarially consistent {}",
        loss.name(),
        consistent,
        adversarially
    );
    Ok(())
}

/// Evaluates the plain and adversarial risks of one classifier and prints
/// the JSON record.
pub fn cmd_risk(cfg: &CampaignConfig, threshold: Option<f64>, scores: Option<&Path>) -> Result<()> {
    let loss = Loss::from_spec(&cfg.loss)?;
    let d = match &cfg.distribution {
        Some(path) => GridDistribution::from_csv(&fs::read_to_string(path)?)?,
        None => build_example(cfg)?,
    };
    let padded = d.extend(cfg.eps)?;
    let f = match (threshold, scores) {
        (Some(t), None) => GridFunction::from_fn(*padded.grid(), |x| x - t)?,
        (None, Some(path)) => GridFunction::from_csv(&fs::read_to_string(path)?)?,
        _ => {
            return Err(Error::Config {
                reason: "risk needs exactly one of --threshold or --scores".into(),
            })
        }
    };
    let report = json!({
        "loss": loss.name(),
        "eps": cfg.eps,
        "classification_risk": classification_risk(&padded, &f)?,
        "surrogate_risk": surrogate_risk(&padded, &loss, &f)?,
        "adv_classification_risk": adv_classification_risk(&padded, &f, cfg.eps)?,
        "adv_surrogate_risk": adv_surrogate_risk(&padded, &loss, &f, cfg.eps)?,
        "total_mass": padded.total_mass(),
        "environment": stamp(cfg.spacing, cfg.kappa),
    });
    println!("{}", pretty(&report).trim_end());
    Ok(())
}

/// Evaluates the constructed attack's dual objectives, optionally
/// alongside the exhaustive maxima, and prints the JSON record.
pub fn cmd_dual(cfg: &CampaignConfig, brute: bool) -> Result<()> {
    let loss = Loss::from_spec(&cfg.loss)?;
    let (d, attack) = build_attack(cfg, &loss)?;
    let class = dual_classification_objective(&attack.attacked)?;
    let surr = dual_surrogate_objective(&attack.attacked, &loss, TOL)?;
    let mut report = json!({
        "loss": loss.name(),
        "eps": cfg.eps,
        "attack": attack.manifest_json(),
        "classification_dual": class.summary_json(),
        "surrogate_dual": surr.summary_json(),
        "environment": stamp(cfg.spacing, cfg.kappa),
    });
    if brute {
        let lattice = *d.grid();
        let brute_class = brute_force_dual_classification(&d, cfg.eps, &lattice)?;
        let brute_surr = brute_force_dual_surrogate(&d, &loss, cfg.eps, &lattice, TOL)?;
        report["brute_classification"] = brute_class.summary_json();
        report["brute_surrogate"] = brute_surr.summary_json();
    }
    println!("{}", pretty(&report).trim_end());
    Ok(())
}
