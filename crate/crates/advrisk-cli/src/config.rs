//! Campaign configuration: a flat key = value file with full flag
//! overrides, and the bound-request vocabulary shared by the verify
//! command and its reports.

use std::path::PathBuf;
use std::str::FromStr;

use advrisk::campaign::SamplerKind;
use advrisk::error::{Error, Result};
use advrisk::risk::SLACK_KAPPA;
use serde::Serialize;

/// A bound the verify command should build and test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoundRequest {
    /// Linear constant under a posterior margin.
    MassartLinear,
    /// Linear constant plus the missed-band offset.
    MassartSlack,
    /// Concave transform of the surrogate excess.
    Concave,
    /// Concave transform on the strict envelope plus the atom offset.
    ConcaveAtom,
    /// One exponent-family member at the given exponent.
    ProtoR(f64),
}

impl BoundRequest {
    /// Canonical spelling, as accepted in configs and used in reports.
    pub fn label(self) -> String {
        match self {
            BoundRequest::MassartLinear => "massart-linear".to_string(),
            BoundRequest::MassartSlack => "massart-slack".to_string(),
            BoundRequest::Concave => "concave".to_string(),
            BoundRequest::ConcaveAtom => "concave-atom".to_string(),
            BoundRequest::ProtoR(r) => format!("proto-r={r}"),
        }
    }

    /// Label with filename-safe punctuation.
    pub fn file_stem(self) -> String {
        self.label().replace('=', "-")
    }

    /// Parses a comma-separated request list.
    pub fn parse_list(text: &str) -> Result<Vec<BoundRequest>> {
        let mut out = Vec::new();
        for part in text.split(',') {
            let part = part.trim();
            if part.is_empty() {
                continue;
            }
            let req = part.parse::<BoundRequest>()?;
            if !out.contains(&req) {
                out.push(req);
            }
        }
        if out.is_empty() {
            return Err(Error::Config {
                reason: format!("no bound requests in {text:?}"),
            });
        }
        Ok(out)
    }
}

impl FromStr for BoundRequest {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "massart-linear" => Ok(BoundRequest::MassartLinear),
            "massart-slack" => Ok(BoundRequest::MassartSlack),
            "concave" => Ok(BoundRequest::Concave),
            "concave-atom" => Ok(BoundRequest::ConcaveAtom),
            _ => match s.strip_prefix("proto-r=") {
                Some(r) => {
                    let r = r.parse::<f64>().map_err(|_| Error::Config {
                        reason: format!("bad exponent in bound request {s:?}"),
                    })?;
                    Ok(BoundRequest::ProtoR(r))
                }
                None => Err(Error::Config {
                    reason: format!(
                        "unknown bound request {s:?}; expected massart-linear, \
                         massart-slack, concave, concave-atom, or proto-r=R"
                    ),
                }),
            },
        }
    }
}

impl Serialize for BoundRequest {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.label())
    }
}

/// Everything one verification campaign needs, with defaults for every
/// field so a config file or flags only state the deviations.
#[derive(Debug, Clone, Serialize)]
pub struct CampaignConfig {
    /// Named example family when no distribution CSV is given.
    pub example: String,
    /// Distribution CSV path overriding the named example.
    pub distribution: Option<PathBuf>,
    pub delta: f64,
    pub mu0: f64,
    pub mu1: f64,
    pub sigma: f64,
    pub eps: f64,
    pub spacing: f64,
    pub loss: String,
    /// Posterior margin used by the linear bound kinds.
    pub alpha: f64,
    pub samples: usize,
    pub sampler: SamplerKind,
    pub seed: u64,
    pub bounds: Vec<BoundRequest>,
    pub kappa: f64,
    pub out: PathBuf,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        CampaignConfig {
            example: "massart".to_string(),
            distribution: None,
            delta: 0.25,
            mu0: 0.0,
            mu1: 1.0,
            sigma: 1.0,
            eps: 0.25,
            spacing: 0.01,
            loss: "rho-margin=1".to_string(),
            alpha: 0.25,
            samples: 200,
            sampler: SamplerKind::RandomThreshold,
            seed: 7,
            bounds: vec![BoundRequest::MassartLinear],
            kappa: SLACK_KAPPA,
            out: PathBuf::from("out"),
        }
    }
}

fn parse_num<T: FromStr>(value: &str, key: &str, ctx: &str) -> Result<T> {
    value.parse::<T>().map_err(|_| Error::Config {
        reason: format!("{ctx}: invalid value {value:?} for {key}"),
    })
}

impl CampaignConfig {
    /// Applies one key = value pair; `ctx` names the source location for
    /// diagnostics.
    pub fn apply(&mut self, key: &str, value: &str, ctx: &str) -> Result<()> {
        match key {
            "example" => self.example = value.to_string(),
            "distribution" => self.distribution = Some(PathBuf::from(value)),
            "delta" => self.delta = parse_num(value, key, ctx)?,
            "mu0" => self.mu0 = parse_num(value, key, ctx)?,
            "mu1" => self.mu1 = parse_num(value, key, ctx)?,
            "sigma" => self.sigma = parse_num(value, key, ctx)?,
            "eps" => self.eps = parse_num(value, key, ctx)?,
            "spacing" => self.spacing = parse_num(value, key, ctx)?,
            "loss" => self.loss = value.to_string(),
            "alpha" => self.alpha = parse_num(value, key, ctx)?,
            "samples" => self.samples = parse_num(value, key, ctx)?,
            "sampler" => {
                self.sampler = value.parse::<SamplerKind>().map_err(|e| Error::Config {
                    reason: format!("{ctx}: {e}"),
                })?
            }
            "seed" => self.seed = parse_num(value, key, ctx)?,
            "bounds" => {
                self.bounds = BoundRequest::parse_list(value).map_err(|e| Error::Config {
                    reason: format!("{ctx}: {e}"),
                })?
            }
            "kappa" => self.kappa = parse_num(value, key, ctx)?,
            "out" => self.out = PathBuf::from(value),
            _ => {
                return Err(Error::Config {
                    reason: format!("{ctx}: unknown key {key:?}"),
                })
            }
        }
        Ok(())
    }

    /// Parses a config file body on top of the defaults. Lines hold one
    /// `key = value` pair; `#` starts a comment; blank lines are skipped.
    pub fn parse(text: &str) -> Result<CampaignConfig> {
        let mut cfg = CampaignConfig::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let ctx = format!("config line {}", idx + 1);
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Config {
                reason: format!("{ctx}: expected key = value, got {raw:?}"),
            })?;
            cfg.apply(key.trim(), value.trim(), &ctx)?;
        }
        Ok(cfg)
    }
}
