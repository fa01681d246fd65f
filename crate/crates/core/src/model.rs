//! Sampling models: densities, samplers, maximum likelihood and outcome
//! enumeration for the six built-in designs.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Geometric, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::special::{ln_choose, xlogy};

/// A single observed datum. Which variant applies depends on the model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Observation {
    /// Real scalar: unit-variance normal draw or ticket label.
    Scalar(f64),
    /// iid sample from a discrete uniform on `1..=theta`.
    Sample(Vec<u64>),
    /// Bernoulli design outcome: `n` trials, `y` successes.
    Trials { n: u64, y: u64 },
}

impl fmt::Display for Observation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Observation::Scalar(v) => write!(f, "{v}"),
            Observation::Sample(v) => {
                let parts: Vec<String> = v.iter().map(|x| x.to_string()).collect();
                write!(f, "({})", parts.join(","))
            }
            Observation::Trials { n, y } => write!(f, "({n},{y})"),
        }
    }
}

/// Basu's urn: 20 balls carry the parameter, 980 carry `a_j * theta`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TicketSpec {
    multipliers: Vec<f64>,
    #[serde(skip)]
    sorted: Vec<f64>,
}

impl TicketSpec {
    pub const N_BALLS: usize = 1000;
    pub const N_THETA_BALLS: usize = 20;
    pub const N_MULTIPLIERS: usize = Self::N_BALLS - Self::N_THETA_BALLS;
    pub const MIN_MULTIPLIER: f64 = 9.9;
    pub const MAX_MULTIPLIER: f64 = 10.1;
    /// Relative tolerance when matching a label against `a_j * theta`.
    const MATCH_TOL: f64 = 1e-10;

    pub fn new(multipliers: Vec<f64>) -> Result<Self> {
        if multipliers.len() != Self::N_MULTIPLIERS {
            return Err(Error::config(
                "params.multipliers",
                format!("expected {} values, got {}", Self::N_MULTIPLIERS, multipliers.len()),
            ));
        }
        if let Some(a) = multipliers
            .iter()
            .find(|a| !(Self::MIN_MULTIPLIER..=Self::MAX_MULTIPLIER).contains(*a))
        {
            return Err(Error::config(
                "params.multipliers",
                format!("{a} is outside [9.9, 10.1]"),
            ));
        }
        let mut sorted = multipliers.clone();
        sorted.sort_by(f64::total_cmp);
        if sorted.windows(2).any(|w| w[1] - w[0] <= Self::MATCH_TOL * w[1]) {
            return Err(Error::config("params.multipliers", "values must be distinct"));
        }
        Ok(Self { multipliers, sorted })
    }

    pub fn multipliers(&self) -> &[f64] {
        &self.multipliers
    }

    /// Index into `multipliers` of the `a_j` with `a_j * theta == x`.
    fn matching_multiplier(&self, x: f64, theta: f64) -> Option<f64> {
        let r = x / theta;
        let i = self.sorted.partition_point(|&a| a < r);
        [i.checked_sub(1), Some(i)]
            .into_iter()
            .flatten()
            .filter_map(|j| self.sorted.get(j).copied())
            .find(|&a| (a * theta - x).abs() <= Self::MATCH_TOL * x.abs())
    }
}

impl Default for TicketSpec {
    /// `a_j = 9.9 + 0.2 (j - 1) / 979` for `j = 1..=980`.
    fn default() -> Self {
        let last = (Self::N_MULTIPLIERS - 1) as f64;
        let m = (0..Self::N_MULTIPLIERS)
            .map(|j| Self::MIN_MULTIPLIER + 0.2 * j as f64 / last)
            .collect();
        Self::new(m).expect("default multipliers are valid")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Capabilities {
    pub has_closed_form_contour: bool,
    pub enumerable: bool,
    pub samplable: bool,
}

/// A parametric sampling model with scalar parameter.
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    /// `X ~ N(theta, 1)`.
    NormalUnitVariance,
    /// Fixed number of Bernoulli trials.
    Binomial { trials: u64 },
    /// Trials until a fixed number of successes.
    NegativeBinomial { successes: u64 },
    /// iid sample of fixed size from `Unif{1, ..., theta}`.
    DiscreteUniform { sample_size: usize },
    Ticket(Arc<TicketSpec>),
    /// Stop after the first trial if it succeeds, otherwise after the second.
    Example21,
}

/// Enumerated outcomes with their probabilities, plus the mass left out.
#[derive(Debug, Clone)]
pub struct Enumeration {
    pub outcomes: Vec<(Observation, f64)>,
    pub residual_tail_mass: f64,
}

/// Upper bound on tail truncation accepted by [`Model::enumerate_outcomes`].
pub const MAX_TAIL_TOL: f64 = 1e-6;
pub const DEFAULT_TAIL_TOL: f64 = 1e-10;
const MAX_OUTCOMES: usize = 20_000_000;

fn bernoulli_pair(x: &Observation) -> Option<(u64, u64)> {
    match *x {
        Observation::Trials { n, y } if y <= n => Some((n, y)),
        _ => None,
    }
}

impl Model {
    pub fn name(&self) -> &'static str {
        match self {
            Model::NormalUnitVariance => "normal",
            Model::Binomial { .. } => "binomial",
            Model::NegativeBinomial { .. } => "negative-binomial",
            Model::DiscreteUniform { .. } => "discrete-uniform",
            Model::Ticket(_) => "ticket",
            Model::Example21 => "example21",
        }
    }

    /// Name plus design constants, e.g. `binomial(n=10)`.
    pub fn id(&self) -> String {
        match self {
            Model::Binomial { trials } => format!("binomial(n={trials})"),
            Model::NegativeBinomial { successes } => format!("negative-binomial(y={successes})"),
            Model::DiscreteUniform { sample_size } => format!("discrete-uniform(n={sample_size})"),
            other => other.name().to_string(),
        }
    }

    pub fn capabilities(&self) -> Capabilities {
        Capabilities {
            has_closed_form_contour: matches!(
                self,
                Model::NormalUnitVariance | Model::DiscreteUniform { .. } | Model::Ticket(_)
            ),
            enumerable: !matches!(self, Model::NormalUnitVariance),
            samplable: true,
        }
    }

    pub fn contains_theta(&self, theta: f64) -> bool {
        if !theta.is_finite() {
            return false;
        }
        match self {
            Model::NormalUnitVariance => true,
            Model::Binomial { .. } | Model::Example21 => (0.0..=1.0).contains(&theta),
            Model::NegativeBinomial { .. } => theta > 0.0 && theta <= 1.0,
            Model::DiscreteUniform { .. } => theta >= 1.0 && theta.fract() == 0.0,
            Model::Ticket(_) => theta > 0.0,
        }
    }

    pub(crate) fn check_theta(&self, theta: f64) -> Result<()> {
        if self.contains_theta(theta) {
            Ok(())
        } else {
            Err(Error::OutsideParameterSpace {
                model: self.id(),
                theta,
            })
        }
    }

    pub fn in_sample_space(&self, x: &Observation) -> bool {
        match (self, x) {
            (Model::NormalUnitVariance, Observation::Scalar(v)) => v.is_finite(),
            (Model::Ticket(_), Observation::Scalar(v)) => v.is_finite() && *v > 0.0,
            (Model::Binomial { trials }, _) => {
                bernoulli_pair(x).is_some_and(|(n, _)| n == *trials)
            }
            (Model::NegativeBinomial { successes }, _) => {
                bernoulli_pair(x).is_some_and(|(n, y)| y == *successes && n >= y)
            }
            (Model::Example21, _) => {
                matches!(bernoulli_pair(x), Some((1, 1)) | Some((2, 0)) | Some((2, 1)))
            }
            (Model::DiscreteUniform { sample_size }, Observation::Sample(v)) => {
                v.len() == *sample_size && v.iter().all(|&s| s >= 1)
            }
            _ => false,
        }
    }

    pub(crate) fn check_observation(&self, x: &Observation) -> Result<()> {
        if self.in_sample_space(x) {
            Ok(())
        } else {
            Err(Error::NotInSampleSpace {
                model: self.id(),
                observation: x.to_string(),
            })
        }
    }

    /// The member of this model's design family whose sample space contains `x`
    /// (a binomial model with `n` trials for `x = (n, y)`, and so on).
    pub fn reinterpret(&self, x: &Observation) -> Result<Model> {
        let m = match (self, x) {
            (Model::Binomial { .. }, Observation::Trials { n, .. }) => Model::Binomial { trials: *n },
            (Model::NegativeBinomial { .. }, Observation::Trials { y, .. }) if *y >= 1 => {
                Model::NegativeBinomial { successes: *y }
            }
            (Model::DiscreteUniform { .. }, Observation::Sample(v)) => Model::DiscreteUniform {
                sample_size: v.len(),
            },
            (other, _) => other.clone(),
        };
        m.check_observation(x)?;
        Ok(m)
    }

    /// `log p_theta(x)`; `-inf` where the mass/density vanishes.
    pub fn log_density(&self, x: &Observation, theta: f64) -> Result<f64> {
        self.check_theta(theta)?;
        self.check_observation(x)?;
        Ok(self.log_density_unchecked(x, theta))
    }

    pub(crate) fn log_density_unchecked(&self, x: &Observation, theta: f64) -> f64 {
        match (self, x) {
            (Model::NormalUnitVariance, Observation::Scalar(v)) => {
                let z = v - theta;
                -0.5 * (2.0 * std::f64::consts::PI).ln() - 0.5 * z * z
            }
            (Model::Binomial { .. }, &Observation::Trials { n, y }) => {
                ln_choose(n, y) + xlogy(y as f64, theta) + xlogy((n - y) as f64, 1.0 - theta)
            }
            (Model::NegativeBinomial { .. }, &Observation::Trials { n, y }) => {
                ln_choose(n - 1, y - 1)
                    + xlogy(y as f64, theta)
                    + xlogy((n - y) as f64, 1.0 - theta)
            }
            (Model::Example21, &Observation::Trials { n, y }) => {
                xlogy(y as f64, theta) + xlogy((n - y) as f64, 1.0 - theta)
            }
            (Model::DiscreteUniform { sample_size }, Observation::Sample(v)) => {
                let max = v.iter().copied().max().unwrap_or(0) as f64;
                if max <= theta {
                    -(*sample_size as f64) * theta.ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
            (Model::Ticket(spec), Observation::Scalar(v)) => {
                let total = TicketSpec::N_BALLS as f64;
                if (v - theta).abs() <= TicketSpec::MATCH_TOL * v.abs() {
                    (TicketSpec::N_THETA_BALLS as f64 / total).ln()
                } else if spec.matching_multiplier(*v, theta).is_some() {
                    (1.0 / total).ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
            _ => f64::NEG_INFINITY,
        }
    }

    /// Maximum likelihood estimate. Bernoulli boundary data `y = 0` and
    /// `y = n` give 0 and 1 (with `0^0 = 1`).
    pub fn mle(&self, x: &Observation) -> Result<f64> {
        self.check_observation(x)?;
        Ok(match x {
            Observation::Scalar(v) => *v,
            Observation::Sample(v) => v.iter().copied().max().unwrap_or(1) as f64,
            Observation::Trials { n, y } => *y as f64 / *n as f64,
        })
    }

    /// All outcomes with positive probability under `theta`, truncated for the
    /// negative binomial once the geometric tail bound falls to `tail_tol`.
    ///
    /// The discrete uniform is enumerated by its sample maximum `s`; each group
    /// is represented by the constant sample `(s, ..., s)`, which carries the
    /// same likelihood as every other sample with that maximum.
    pub fn enumerate_outcomes(&self, theta: f64, tail_tol: f64) -> Result<Enumeration> {
        self.check_theta(theta)?;
        if !(0.0..=MAX_TAIL_TOL).contains(&tail_tol) {
            return Err(Error::config(
                "tail_tol",
                format!("must lie in [0, {MAX_TAIL_TOL}], got {tail_tol}"),
            ));
        }
        let finite = |outcomes| {
            Ok(Enumeration {
                outcomes,
                residual_tail_mass: 0.0,
            })
        };
        match self {
            Model::NormalUnitVariance => Err(Error::NotEnumerable(self.id())),
            Model::Binomial { trials } => finite(
                (0..=*trials)
                    .map(|y| {
                        let x = Observation::Trials { n: *trials, y };
                        let p = self.log_density_unchecked(&x, theta).exp();
                        (x, p)
                    })
                    .collect(),
            ),
            Model::Example21 => finite(
                [(1, 1), (2, 0), (2, 1)]
                    .into_iter()
                    .map(|(n, y)| {
                        let x = Observation::Trials { n, y };
                        let p = self.log_density_unchecked(&x, theta).exp();
                        (x, p)
                    })
                    .collect(),
            ),
            Model::DiscreteUniform { sample_size } => {
                let top = theta as u64;
                let k = *sample_size as i32;
                finite(
                    (1..=top)
                        .map(|s| {
                            let p = (s as f64 / theta).powi(k) - ((s - 1) as f64 / theta).powi(k);
                            (Observation::Sample(vec![s; *sample_size]), p)
                        })
                        .collect(),
                )
            }
            Model::Ticket(spec) => {
                let total = TicketSpec::N_BALLS as f64;
                let mut outcomes = Vec::with_capacity(TicketSpec::N_MULTIPLIERS + 1);
                outcomes.push((
                    Observation::Scalar(theta),
                    TicketSpec::N_THETA_BALLS as f64 / total,
                ));
                outcomes.extend(
                    spec.multipliers
                        .iter()
                        .map(|a| (Observation::Scalar(a * theta), 1.0 / total)),
                );
                finite(outcomes)
            }
            Model::NegativeBinomial { successes } => {
                let y = *successes;
                let mut outcomes = Vec::new();
                let mut total = 0.0;
                let mut n = y;
                loop {
                    let x = Observation::Trials { n, y };
                    let p = self.log_density_unchecked(&x, theta).exp();
                    total += p;
                    outcomes.push((x, p));
                    // p(n+1)/p(n) = n (1 - theta) / (n - y + 1), non-increasing in n
                    let ratio = n as f64 * (1.0 - theta) / (n - y + 1) as f64;
                    if ratio < 1.0 && p * ratio / (1.0 - ratio) <= tail_tol {
                        break;
                    }
                    if outcomes.len() >= MAX_OUTCOMES {
                        return Err(Error::Numeric(format!(
                            "negative binomial enumeration at theta={theta} exceeds {MAX_OUTCOMES} outcomes"
                        )));
                    }
                    n += 1;
                }
                Ok(Enumeration {
                    outcomes,
                    residual_tail_mass: (1.0 - total).max(0.0),
                })
            }
        }
    }

    /// One draw from `P_theta`. `theta` must already be validated.
    pub(crate) fn draw(&self, theta: f64, rng: &mut ChaCha8Rng) -> Observation {
        match self {
            Model::NormalUnitVariance => {
                let z: f64 = rng.sample(StandardNormal);
                Observation::Scalar(theta + z)
            }
            Model::Binomial { trials } => {
                let y = Binomial::new(*trials, theta)
                    .expect("theta validated")
                    .sample(rng);
                Observation::Trials { n: *trials, y }
            }
            Model::NegativeBinomial { successes } => {
                let geo = Geometric::new(theta).expect("theta validated");
                let failures: u64 = (0..*successes).map(|_| geo.sample(rng)).sum();
                Observation::Trials {
                    n: successes + failures,
                    y: *successes,
                }
            }
            Model::DiscreteUniform { sample_size } => {
                let top = theta as u64;
                Observation::Sample((0..*sample_size).map(|_| rng.random_range(1..=top)).collect())
            }
            Model::Ticket(spec) => {
                let ball = rng.random_range(0..TicketSpec::N_BALLS);
                if ball < TicketSpec::N_THETA_BALLS {
                    Observation::Scalar(theta)
                } else {
                    Observation::Scalar(spec.multipliers[ball - TicketSpec::N_THETA_BALLS] * theta)
                }
            }
            Model::Example21 => {
                if rng.random_bool(theta) {
                    Observation::Trials { n: 1, y: 1 }
                } else if rng.random_bool(theta) {
                    Observation::Trials { n: 2, y: 1 }
                } else {
                    Observation::Trials { n: 2, y: 0 }
                }
            }
        }
    }

    /// `count` iid draws from `P_theta`, deterministic in `(self, theta, seed, count)`
    /// and independent of the worker count.
    pub fn sample(&self, theta: f64, seed: u64, count: usize) -> Result<Vec<Observation>> {
        self.check_theta(theta)?;
        if count == 0 {
            return Err(Error::config("count", "must be at least 1"));
        }
        let chunks: Vec<Vec<Observation>> = rng::blocks(count)
            .collect::<Vec<_>>()
            .into_par_iter()
            .map(|(block, _, len)| {
                let mut r = rng::substream(seed, u64::MAX, block);
                (0..len).map(|_| self.draw(theta, &mut r)).collect()
            })
            .collect();
        Ok(chunks.into_iter().flatten().collect())
    }
}

/// Design constants accepted in a model config's `params` object.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    /// Trials (binomial) or sample size (discrete uniform).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<u64>,
    /// Required successes (negative binomial).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub multipliers: Option<Vec<f64>>,
}

/// `{"model": name, "params": {...}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub model: String,
    #[serde(default)]
    pub params: ModelParams,
}

impl ModelConfig {
    pub fn named(name: &str) -> Self {
        Self {
            model: name.to_string(),
            params: ModelParams::default(),
        }
    }

    /// Fill design constants that the datum determines (`n` for a binomial,
    /// `y` for a negative binomial, sample size for a discrete uniform).
    pub fn fill_from(&mut self, x: &Observation) {
        let kind = canonical_name(&self.model);
        match (kind, x) {
            (Some("binomial"), Observation::Trials { n, .. }) => {
                self.params.n.get_or_insert(*n);
            }
            (Some("negative-binomial"), Observation::Trials { y, .. }) => {
                self.params.y.get_or_insert(*y);
            }
            (Some("discrete-uniform"), Observation::Sample(v)) => {
                self.params.n.get_or_insert(v.len() as u64);
            }
            _ => {}
        }
    }
}

/// Map accepted aliases onto canonical model names.
pub fn canonical_name(name: &str) -> Option<&'static str> {
    Some(match name.trim().to_ascii_lowercase().as_str() {
        "normal" | "normal-unit-variance" => "normal",
        "binomial" | "binom" => "binomial",
        "negative-binomial" | "negbinom" | "negbin" | "neg-binomial" => "negative-binomial",
        "discrete-uniform" | "uniform" => "discrete-uniform",
        "ticket" => "ticket",
        "example21" | "example-21" => "example21",
        _ => return None,
    })
}

pub fn make_model(cfg: &ModelConfig) -> Result<Model> {
    let name = canonical_name(&cfg.model).ok_or_else(|| Error::UnknownModel(cfg.model.clone()))?;
    let p = &cfg.params;
    let required = |v: Option<u64>, field: &str| {
        v.ok_or_else(|| Error::config(field, format!("required for `{name}`")))
    };
    Ok(match name {
        "normal" => Model::NormalUnitVariance,
        "binomial" => {
            let n = required(p.n, "params.n")?;
            if n == 0 {
                return Err(Error::config("params.n", "at least one trial required"));
            }
            Model::Binomial { trials: n }
        }
        "negative-binomial" => {
            let y = required(p.y, "params.y")?;
            if y == 0 {
                return Err(Error::config("params.y", "at least one success required to stop"));
            }
            Model::NegativeBinomial { successes: y }
        }
        "discrete-uniform" => {
            let n = required(p.n, "params.n")?;
            if n == 0 {
                return Err(Error::config("params.n", "sample size must be positive"));
            }
            Model::DiscreteUniform {
                sample_size: n as usize,
            }
        }
        "ticket" => Model::Ticket(Arc::new(match &p.multipliers {
            Some(m) => TicketSpec::new(m.clone())?,
            None => TicketSpec::default(),
        })),
        "example21" => Model::Example21,
        _ => unreachable!(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn binom(n: u64) -> Model {
        Model::Binomial { trials: n }
    }

    #[test]
    fn make_model_names_and_errors() {
        let m = make_model(&ModelConfig {
            model: "binomial".into(),
            params: ModelParams {
                n: Some(10),
                ..Default::default()
            },
        })
        .unwrap();
        assert_eq!(m, binom(10));
        assert!(m.in_sample_space(&Observation::Trials { n: 10, y: 0 }));
        assert!(m.in_sample_space(&Observation::Trials { n: 10, y: 10 }));
        assert!(!m.in_sample_space(&Observation::Trials { n: 10, y: 11 }));

        let t = make_model(&ModelConfig::named("ticket")).unwrap();
        let e = t.enumerate_outcomes(1.0, 0.0).unwrap();
        assert_eq!(e.outcomes.len(), 981);
        let total: f64 = e.outcomes.iter().map(|o| o.1).sum();
        assert!((total - 1.0).abs() < 1e-12);

        let mut nb = ModelConfig::named("negbinom");
        nb.params.y = Some(0);
        assert!(matches!(make_model(&nb), Err(Error::InvalidConfig { .. })));
        assert!(matches!(
            make_model(&ModelConfig::named("cauchy")),
            Err(Error::UnknownModel(_))
        ));
        assert!(make_model(&ModelConfig::named("binomial")).is_err());
    }

    #[test]
    fn ticket_multipliers_validated() {
        let mut m: Vec<f64> = TicketSpec::default().multipliers().to_vec();
        m[5] = m[4];
        assert!(TicketSpec::new(m.clone()).is_err());
        m[5] = 10.2;
        assert!(TicketSpec::new(m).is_err());
        assert!(TicketSpec::new(vec![10.0; 3]).is_err());
        let d = TicketSpec::default();
        assert_eq!(d.multipliers()[0], 9.9);
        assert!((d.multipliers()[979] - 10.1).abs() < 1e-15);
    }

    #[test]
    fn ticket_density_levels() {
        let t = make_model(&ModelConfig::named("ticket")).unwrap();
        let x = Observation::Scalar(1.0);
        assert!((t.log_density(&x, 1.0).unwrap() - (0.02f64).ln()).abs() < 1e-15);
        let a = TicketSpec::default().multipliers()[17];
        assert!((t.log_density(&x, 1.0 / a).unwrap() - (0.001f64).ln()).abs() < 1e-15);
        assert_eq!(t.log_density(&x, 0.5).unwrap(), f64::NEG_INFINITY);
        assert!(t.log_density(&x, -1.0).is_err());
    }

    #[test]
    fn discrete_uniform_support() {
        let m = Model::DiscreteUniform { sample_size: 3 };
        let x = Observation::Sample(vec![2, 5, 3]);
        assert_eq!(m.log_density(&x, 4.0).unwrap(), f64::NEG_INFINITY);
        assert!((m.log_density(&x, 5.0).unwrap() + 3.0 * 5f64.ln()).abs() < 1e-15);
        assert_eq!(m.mle(&x).unwrap(), 5.0);
        assert!(m.log_density(&x, 4.5).is_err());
        assert!(m.sample(1.0, 9, 50).unwrap().iter().all(|o| *o == Observation::Sample(vec![1, 1, 1])));
    }

    #[test]
    fn example21_enumeration() {
        let e = Model::Example21.enumerate_outcomes(0.5, 0.0).unwrap();
        let probs: Vec<_> = e.outcomes.iter().map(|(x, p)| (x.to_string(), *p)).collect();
        assert_eq!(
            probs,
            vec![("(1,1)".into(), 0.5), ("(2,0)".into(), 0.25), ("(2,1)".into(), 0.25)]
        );
        assert_eq!(e.residual_tail_mass, 0.0);
        let draws = Model::Example21.sample(1.0, 3, 100).unwrap();
        assert!(draws.iter().all(|d| *d == Observation::Trials { n: 1, y: 1 }));
    }

    #[test]
    fn boundary_mle() {
        let m = binom(10);
        assert_eq!(m.mle(&Observation::Trials { n: 10, y: 0 }).unwrap(), 0.0);
        assert_eq!(m.mle(&Observation::Trials { n: 10, y: 10 }).unwrap(), 1.0);
        assert_eq!(m.log_density(&Observation::Trials { n: 10, y: 0 }, 0.0).unwrap(), 0.0);
        assert_eq!(m.mle(&Observation::Trials { n: 10, y: 3 }).unwrap(), 0.3);
    }

    #[test]
    fn negbinom_enumeration_meets_tail_tol() {
        let m = Model::NegativeBinomial { successes: 3 };
        let e = m.enumerate_outcomes(0.5, 1e-10).unwrap();
        let total: f64 = e.outcomes.iter().map(|o| o.1).sum();
        assert!(total >= 1.0 - 1e-10);
        assert!((total + e.residual_tail_mass - 1.0).abs() < 1e-12);
        assert!(m.enumerate_outcomes(0.5, 1e-3).is_err());
        assert!(m.enumerate_outcomes(0.0, 1e-10).is_err());
        let one = m.enumerate_outcomes(1.0, 1e-10).unwrap();
        assert_eq!(one.outcomes.len(), 1);
    }

    #[test]
    fn normal_not_enumerable() {
        assert!(matches!(
            Model::NormalUnitVariance.enumerate_outcomes(0.0, 0.0),
            Err(Error::NotEnumerable(_))
        ));
    }

    #[test]
    fn reinterpret_follows_datum() {
        let x = Observation::Trials { n: 16, y: 11 };
        assert_eq!(binom(10).reinterpret(&x).unwrap(), binom(16));
        assert_eq!(
            Model::NegativeBinomial { successes: 3 }.reinterpret(&x).unwrap(),
            Model::NegativeBinomial { successes: 11 }
        );
        assert!(Model::Example21.reinterpret(&x).is_err());
        assert!(Model::NormalUnitVariance.reinterpret(&x).is_err());
    }

    #[test]
    fn fill_from_datum() {
        let mut c = ModelConfig::named("binom");
        c.fill_from(&Observation::Trials { n: 10, y: 3 });
        assert_eq!(c.params.n, Some(10));
        let mut c = ModelConfig::named("negbinom");
        c.fill_from(&Observation::Trials { n: 10, y: 3 });
        assert_eq!(c.params.y, Some(3));
    }
}
