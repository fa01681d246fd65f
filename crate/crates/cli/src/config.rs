//! Effective run configuration: a JSON config file overlaid by command-line flags.

use std::path::Path;

use anyhow::{bail, Context, Result};
use clap::ValueEnum;
use possim_core::grid::{GridKind, ParameterGrid};
use possim_core::model::{canonical_name, make_model, Model, ModelConfig, ModelParams, Observation};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::SpecError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Exact,
    Closed,
    Mc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Exact,
    Mc,
}

/// A model given either as `name(k=v,...)` or as a config object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModelSpec {
    Inline(String),
    Object(ModelConfig),
}

impl ModelSpec {
    pub fn to_config(&self) -> Result<ModelConfig> {
        match self {
            ModelSpec::Object(c) => Ok(c.clone()),
            ModelSpec::Inline(s) => parse_model_spec(s),
        }
    }
}

/// Everything that determines a command's output. Serialized canonically for
/// the config hash; the output path is deliberately not part of it.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ensemble: Option<Vec<ModelSpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method: Option<Method>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<Format>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hypothesis: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thetas: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alphas: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<Mode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coverage: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tail_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub uncalibrated_power: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub demo: Option<String>,
}

macro_rules! overlay {
    ($dst:ident, $src:ident, $($f:ident),*) => {
        $( if $src.$f.is_some() { $dst.$f = $src.$f; } )*
    };
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| SpecError(format!("--config: cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| SpecError(format!("--config: {e}")).into())
    }

    /// Fields set in `flags` replace those in `self`.
    pub fn overlay(mut self, flags: RunConfig) -> Self {
        if flags.model.is_some() || flags.ensemble.is_some() {
            self.model = flags.model;
            self.ensemble = flags.ensemble;
        }
        overlay!(
            self, flags, command, data, grid, alpha, seed, reps, method, format, hypothesis, thetas, alphas, mode,
            coverage, tail_tol, window, uncalibrated_power, demo
        );
        self
    }

    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        let digest = Sha256::digest(&bytes);
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha.unwrap_or(0.05)
    }

    pub fn format(&self) -> Format {
        self.format.unwrap_or_default()
    }

    pub fn model_specs(&self) -> Result<Vec<ModelConfig>> {
        match (&self.model, &self.ensemble) {
            (Some(m), None) => Ok(vec![m.to_config()?]),
            (None, Some(e)) if !e.is_empty() => e.iter().map(ModelSpec::to_config).collect(),
            (Some(_), Some(_)) => bail!(SpecError("--model and --ensemble are mutually exclusive".into())),
            _ => bail!(SpecError("--model or --ensemble is required".into())),
        }
    }

    pub fn is_ensemble(&self) -> bool {
        self.ensemble.is_some()
    }

    pub fn observation(&self, family: &str) -> Result<Option<Observation>> {
        self.data.as_deref().map(|d| parse_data(d, family)).transpose()
    }
}

/// `name` or `name(n=10, y=3)`.
pub fn parse_model_spec(s: &str) -> Result<ModelConfig> {
    let s = s.trim();
    let (name, args) = match s.split_once('(') {
        Some((name, rest)) => {
            let inner = rest
                .strip_suffix(')')
                .ok_or_else(|| SpecError(format!("--model: unbalanced parentheses in `{s}`")))?;
            (name.trim(), inner)
        }
        None => (s, ""),
    };
    let mut params = ModelParams::default();
    for kv in args.split(',').map(str::trim).filter(|kv| !kv.is_empty()) {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| SpecError(format!("--model: expected key=value, got `{kv}`")))?;
        let v: u64 = v
            .trim()
            .parse()
            .map_err(|_| SpecError(format!("--model: `{}` must be a non-negative integer", k.trim())))?;
        match k.trim() {
            "n" => params.n = Some(v),
            "y" => params.y = Some(v),
            other => bail!(SpecError(format!("--model: unknown parameter `{other}`"))),
        }
    }
    Ok(ModelConfig {
        model: name.to_string(),
        params,
    })
}

/// Split on commas outside parentheses.
pub fn split_top_level(s: &str) -> Vec<String> {
    let mut out = Vec::new();
    let (mut depth, mut cur) = (0i32, String::new());
    for c in s.chars() {
        match c {
            '(' => depth += 1,
            ')' => depth -= 1,
            ',' if depth == 0 => {
                out.push(std::mem::take(&mut cur).trim().to_string());
                continue;
            }
            _ => {}
        }
        cur.push(c);
    }
    if !cur.trim().is_empty() {
        out.push(cur.trim().to_string());
    }
    out
}

fn int_list(d: &str) -> Result<Vec<u64>> {
    d.split(',')
        .map(|t| {
            t.trim()
                .parse::<u64>()
                .map_err(|_| SpecError(format!("--data: `{}` is not a non-negative integer", t.trim())).into())
        })
        .collect()
}

/// Datum syntax by model family: `n,y` for Bernoulli designs, a comma list
/// for the discrete uniform, a single number otherwise.
pub fn parse_data(d: &str, family: &str) -> Result<Observation> {
    match canonical_name(family) {
        Some("binomial" | "negative-binomial" | "example21") => match int_list(d)?.as_slice() {
            &[n, y] => Ok(Observation::Trials { n, y }),
            _ => bail!(SpecError(format!("--data: expected `n,y` for `{family}`, got `{d}`"))),
        },
        Some("discrete-uniform") => Ok(Observation::Sample(int_list(d)?)),
        Some(_) => d
            .trim()
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .map(Observation::Scalar)
            .ok_or_else(|| SpecError(format!("--data: `{d}` is not a finite number")).into()),
        None => bail!(possim_core::Error::UnknownModel(family.to_string())),
    }
}

pub fn build_model(mut cfg: ModelConfig, x: Option<&Observation>) -> Result<Model> {
    if let Some(x) = x {
        cfg.fill_from(x);
    }
    make_model(&cfg).context("--model")
}

/// `lo:hi:step`; integer-valued models get an integer lattice.
pub fn parse_grid(s: &str, m: &Model) -> Result<ParameterGrid> {
    let g: ParameterGrid = s.parse().context("--grid")?;
    if matches!(m, Model::DiscreteUniform { .. }) {
        let pts: Vec<f64> = g.points().iter().copied().filter(|t| t.fract() == 0.0).collect();
        if pts.is_empty() {
            bail!(SpecError(format!("--grid: `{s}` contains no integer parameter values")));
        }
        return ParameterGrid::from_points(pts, GridKind::IntegerLattice).context("--grid");
    }
    Ok(g)
}

pub fn parse_levels(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .ok()
                .filter(|a| (0.0..=1.0).contains(a))
                .ok_or_else(|| SpecError(format!("--alphas: `{}` is not a level in [0, 1]", t.trim())).into())
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn model_spec_forms() {
        let c = parse_model_spec("binomial(n=10)").unwrap();
        assert_eq!(c.model, "binomial");
        assert_eq!(c.params.n, Some(10));
        let c = parse_model_spec("negbinom").unwrap();
        assert_eq!(c.params, ModelParams::default());
        assert!(parse_model_spec("binomial(n=ten)").is_err());
        assert!(parse_model_spec("binomial(k=1)").is_err());
        assert_eq!(
            split_top_level("binomial(n=10),negative-binomial(y=3), example21"),
            vec!["binomial(n=10)", "negative-binomial(y=3)", "example21"]
        );
    }

    #[test]
    fn data_by_family() {
        assert_eq!(parse_data("10,3", "binom").unwrap(), Observation::Trials { n: 10, y: 3 });
        assert_eq!(parse_data("2,5,3", "discrete-uniform").unwrap(), Observation::Sample(vec![2, 5, 3]));
        assert_eq!(parse_data("7", "normal").unwrap(), Observation::Scalar(7.0));
        assert!(parse_data("10", "binomial").is_err());
        assert!(parse_data("x", "normal").is_err());
    }

    #[test]
    fn overlay_and_hash() {
        let file = RunConfig {
            model: Some(ModelSpec::Inline("normal".into())),
            alpha: Some(0.1),
            seed: Some(3),
            ..Default::default()
        };
        let flags = RunConfig {
            seed: Some(4),
            ..Default::default()
        };
        let merged = file.clone().overlay(flags);
        assert_eq!(merged.seed, Some(4));
        assert_eq!(merged.alpha, Some(0.1));
        assert_ne!(merged.hash(), file.hash());
        assert_eq!(merged.hash(), merged.clone().hash());
        assert_eq!(merged.hash().len(), 64);
    }

    #[test]
    fn config_json_accepts_objects() {
        let c: RunConfig =
            serde_json::from_str(r#"{"model":{"model":"binomial","params":{"n":10}},"data":"10,3"}"#).unwrap();
        assert_eq!(c.model_specs().unwrap()[0].params.n, Some(10));
        assert!(serde_json::from_str::<RunConfig>(r#"{"modle":"x"}"#).is_err());
    }
}
