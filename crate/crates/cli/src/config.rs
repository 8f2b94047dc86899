//! Optional JSON run configuration. Every field can also be given as a
//! flag; flags win.

use std::path::Path;

use anyhow::Result;
use copmix::copula::{parse_families, Family};
use copmix::mesh::BinsRule;
use copmix::mixture::{Init, MixtureConfig};
use copmix::stat_tests::Estimator;
use serde::Deserialize;

use crate::usage;

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum BinsField {
    Count(usize),
    Name(String),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum FamiliesField {
    List(Vec<String>),
    Csv(String),
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub bins: Option<BinsField>,
    pub families: Option<FamiliesField>,
    #[serde(rename = "K", alias = "k")]
    pub k: Option<usize>,
    pub init: Option<Init>,
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub restarts: Option<usize>,
    pub marginal_method: Option<Estimator>,
    pub clamp: Option<f64>,
    pub adaptive_clamp: Option<bool>,
    pub padding: Option<f64>,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| usage(format!("config {}: {e}", path.display())))
    }

    pub fn bins(&self) -> Result<Option<BinsRule>> {
        Ok(match &self.bins {
            None => None,
            Some(BinsField::Count(n)) => Some(BinsRule::Explicit(*n)),
            Some(BinsField::Name(s)) => Some(s.parse()?),
        })
    }

    pub fn families(&self) -> Result<Option<Vec<Family>>> {
        Ok(match &self.families {
            None => None,
            Some(FamiliesField::Csv(s)) => Some(parse_families(s)?),
            Some(FamiliesField::List(v)) => Some(parse_families(&v.join(","))?),
        })
    }
}

/// Knobs of a clustering run; `None` falls back to the config file, then to
/// the library default.
#[derive(Debug, Clone, Default)]
pub struct ClusterOverrides {
    pub k: Option<usize>,
    pub families: Option<Vec<Family>>,
    pub init: Option<Init>,
    pub bins: Option<BinsRule>,
    pub restarts: Option<usize>,
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub marginal_method: Option<Estimator>,
    pub clamp: Option<f64>,
    pub adaptive_clamp: Option<bool>,
}

pub fn mixture_config(file: &RunConfig, flags: ClusterOverrides) -> Result<MixtureConfig> {
    let d = MixtureConfig::default();
    let cfg = MixtureConfig {
        k: flags.k.or(file.k).unwrap_or(d.k),
        families: match flags.families {
            Some(f) => f,
            None => file.families()?.unwrap_or(d.families),
        },
        init: flags.init.or(file.init).unwrap_or(d.init),
        restarts: flags.restarts.or(file.restarts).unwrap_or(d.restarts),
        tol: flags.tol.or(file.tol).unwrap_or(d.tol),
        max_iter: flags.max_iter.or(file.max_iter).unwrap_or(d.max_iter),
        bins: match flags.bins {
            Some(b) => b,
            None => file.bins()?.unwrap_or(d.bins),
        },
        marginal_method: flags
            .marginal_method
            .or(file.marginal_method)
            .unwrap_or(d.marginal_method),
        clamp: flags.clamp.or(file.clamp).unwrap_or(d.clamp),
        adaptive_clamp: flags
            .adaptive_clamp
            .or(file.adaptive_clamp)
            .unwrap_or(d.adaptive_clamp),
        ..d
    };
    cfg.validate()?;
    Ok(cfg)
}

fn ci_mode() -> bool {
    std::env::var("CI").is_ok_and(|v| !v.is_empty() && v != "0" && !v.eq_ignore_ascii_case("false"))
}

/// Flag, then config file; in CI mode a seed is mandatory.
pub fn resolve_seed(flag: Option<u64>, file: &RunConfig) -> Result<u64> {
    match flag.or(file.seed) {
        Some(s) => Ok(s),
        None if ci_mode() => Err(usage("a seed is required when CI is set (use --seed or the config file)")),
        None => Ok(0),
    }
}
