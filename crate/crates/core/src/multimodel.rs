//! Model ensembles sharing one relative likelihood, the combined contour
//! (pointwise maximum of member contours), and prior-averaged e-value contours.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::contour::{contour, Contour, ContourMethod, McConfig};
use crate::error::{Error, Result};
use crate::grid::ParameterGrid;
use crate::likelihood::RelativeLikelihood;
use crate::model::{Model, Observation};
use crate::special::{adaptive_simpson, ln_beta, xlogy};

pub const DEFAULT_VERIFICATION_TOL: f64 = 1e-10;

/// Finite set of models verified to produce the same relative likelihood.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelEnsemble {
    members: Vec<Model>,
    verification_tol: f64,
}

impl ModelEnsemble {
    pub fn members(&self) -> &[Model] {
        &self.members
    }

    pub fn verification_tol(&self) -> f64 {
        self.verification_tol
    }

    pub fn id(&self) -> String {
        let ids: Vec<String> = self.members.iter().map(Model::id).collect();
        format!("ensemble[{}]", ids.join(","))
    }

    /// Members reinterpreted for datum `x`.
    pub fn members_for(&self, x: &Observation) -> Result<Vec<Model>> {
        self.members.iter().map(|m| m.reinterpret(x)).collect()
    }

    /// Grid points that lie in every member's parameter space.
    pub fn common_grid(&self, grid: &ParameterGrid) -> Result<ParameterGrid> {
        grid.filtered(|t| self.members.iter().all(|m| m.contains_theta(t)))
            .ok_or_else(|| Error::InvalidGrid("no grid point is shared by all ensemble members".into()))
    }
}

/// Build an ensemble, checking that every member's relative likelihood matches
/// the first member's at each probe `(x, theta)` within `tol`. Members are
/// reinterpreted for each probe datum.
pub fn verify_ensemble_with_tol(members: Vec<Model>, probes: &[(Observation, f64)], tol: f64) -> Result<ModelEnsemble> {
    let Some(proto) = members.first() else {
        return Err(Error::config("ensemble", "at least one member required"));
    };
    for (x, theta) in probes {
        let expected = RelativeLikelihood::new(&proto.reinterpret(x)?, x)?.value(*theta)?;
        for m in &members[1..] {
            let got = RelativeLikelihood::new(&m.reinterpret(x)?, x)?.value(*theta)?;
            if !((got - expected).abs() <= tol) {
                return Err(Error::EnsembleMismatch {
                    member: m.id(),
                    observation: x.to_string(),
                    theta: *theta,
                    got,
                    expected,
                });
            }
        }
    }
    Ok(ModelEnsemble {
        members,
        verification_tol: tol,
    })
}

pub fn verify_ensemble(members: Vec<Model>, probes: &[(Observation, f64)]) -> Result<ModelEnsemble> {
    verify_ensemble_with_tol(members, probes, DEFAULT_VERIFICATION_TOL)
}

/// Probe set `data x grid` for Bernoulli designs.
pub fn bernoulli_probes(data: &[(u64, u64)], thetas: &[f64]) -> Vec<(Observation, f64)> {
    data.iter()
        .flat_map(|&(n, y)| thetas.iter().map(move |&t| (Observation::Trials { n, y }, t)))
        .collect()
}

/// Combined contour plus the member contours it was built from.
#[derive(Debug, Clone)]
pub struct EnsembleContour {
    pub combined: Contour,
    pub members: Vec<Contour>,
}

/// Pointwise maximum over member contours, each by `method` or by its
/// preferred method when `None`.
pub fn contour_ensemble_detailed(
    e: &ModelEnsemble,
    x: &Observation,
    grid: &ParameterGrid,
    method: Option<ContourMethod>,
    cfg: &McConfig,
) -> Result<EnsembleContour> {
    let members = e.members_for(x)?;
    let contours = members
        .par_iter()
        .map(|m| contour(m, x, grid, method, cfg))
        .collect::<Result<Vec<Contour>>>()?;
    let first = &contours[0];
    if contours.iter().any(|c| c.grid != first.grid) {
        return Err(Error::Numeric("member contours were evaluated on different grids".into()));
    }
    let any_mc = contours.iter().any(|c| c.method == ContourMethod::MonteCarlo);
    let mut values = first.values.clone();
    let mut se: Vec<f64> = (0..values.len()).map(|i| first.std_err(i)).collect();
    for c in &contours[1..] {
        for i in 0..values.len() {
            if c.values[i] > values[i] {
                values[i] = c.values[i];
                se[i] = c.std_err(i);
            }
        }
    }
    let method = if any_mc {
        ContourMethod::MonteCarlo
    } else if contours.iter().all(|c| c.method == ContourMethod::Exact) {
        ContourMethod::Exact
    } else {
        ContourMethod::ClosedForm
    };
    let combined = Contour {
        grid: first.grid.clone(),
        values,
        method,
        mc_std_err: any_mc.then_some(se),
        observation: x.clone(),
        model_id: e.id(),
        seed: any_mc.then_some(cfg.seed),
    };
    Ok(EnsembleContour {
        combined,
        members: contours,
    })
}

pub fn contour_ensemble(e: &ModelEnsemble, x: &Observation, grid: &ParameterGrid, cfg: &McConfig) -> Result<Contour> {
    Ok(contour_ensemble_detailed(e, x, grid, None, cfg)?.combined)
}

/// Prior distribution `Q` on the parameter space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "prior", rename_all = "kebab-case")]
pub enum PriorSpec {
    /// `Unif(0, 1)`.
    #[serde(alias = "uniform-0-1")]
    Uniform,
    Beta { a: f64, b: f64 },
    PointMass { theta: f64 },
    Discrete { support: Vec<f64>, weights: Vec<f64> },
}

impl PriorSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            PriorSpec::Uniform => Ok(()),
            PriorSpec::Beta { a, b } => {
                if a.is_finite() && b.is_finite() && *a > 0.0 && *b > 0.0 {
                    Ok(())
                } else {
                    Err(Error::config("prior", format!("beta shapes must be positive, got ({a}, {b})")))
                }
            }
            PriorSpec::PointMass { theta } => {
                if theta.is_finite() {
                    Ok(())
                } else {
                    Err(Error::config("prior.theta", "must be finite"))
                }
            }
            PriorSpec::Discrete { support, weights } => {
                if support.is_empty() || support.len() != weights.len() {
                    return Err(Error::config("prior.weights", "must be non-empty and match support length"));
                }
                if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
                    return Err(Error::config("prior.weights", "must be non-negative"));
                }
                let total: f64 = weights.iter().sum();
                if (total - 1.0).abs() > 1e-9 {
                    return Err(Error::config("prior.weights", format!("must sum to 1, got {total}")));
                }
                Ok(())
            }
        }
    }

    fn beta_shapes(&self) -> Option<(f64, f64)> {
        match self {
            PriorSpec::Uniform => Some((1.0, 1.0)),
            PriorSpec::Beta { a, b } => Some((*a, *b)),
            _ => None,
        }
    }

    pub fn label(&self) -> String {
        match self {
            PriorSpec::Uniform => "uniform".into(),
            PriorSpec::Beta { a, b } => format!("beta({a},{b})"),
            PriorSpec::PointMass { theta } => format!("point-mass({theta})"),
            PriorSpec::Discrete { support, .. } => format!("discrete({} atoms)", support.len()),
        }
    }
}

/// `log int eta(x, t) Q(dt)`. Closed form for beta priors on Bernoulli-form
/// likelihoods, adaptive Simpson for other continuous cases, sums otherwise.
fn log_prior_average(rl: &RelativeLikelihood, q: &PriorSpec) -> Result<f64> {
    q.validate()?;
    let m = rl.model();
    let check = |t: f64| {
        if m.contains_theta(t) {
            Ok(())
        } else {
            Err(Error::config(
                "prior",
                format!("support point {t} is outside the parameter space of `{}`", m.id()),
            ))
        }
    };
    let avg = match q {
        PriorSpec::PointMass { theta } => {
            check(*theta)?;
            return rl.log_value(*theta);
        }
        PriorSpec::Discrete { support, weights } => {
            support.iter().try_for_each(|&t| check(t))?;
            support
                .iter()
                .zip(weights)
                .map(|(&t, w)| Ok(w * rl.value(t)?))
                .sum::<Result<f64>>()?
        }
        PriorSpec::Uniform | PriorSpec::Beta { .. } => {
            let (a, b) = q.beta_shapes().expect("beta family");
            match (m, rl.observation()) {
                (Model::Binomial { .. } | Model::NegativeBinomial { .. } | Model::Example21, &Observation::Trials { n, y }) => {
                    // int t^y (1-t)^(n-y) Beta(a,b)(dt) = B(a+y, b+n-y) / B(a,b), over the kernel's sup
                    let (yf, zf) = (y as f64, (n - y) as f64);
                    let p = yf / n as f64;
                    let log_sup_kernel = xlogy(yf, p) + xlogy(zf, 1.0 - p);
                    return Ok(ln_beta(a + yf, b + zf) - ln_beta(a, b) - log_sup_kernel);
                }
                (Model::NormalUnitVariance, _) => {
                    if a < 1.0 || b < 1.0 {
                        return Err(Error::config("prior", "numeric quadrature needs beta shapes >= 1"));
                    }
                    let lb = ln_beta(a, b);
                    let f = |t: f64| {
                        let dens = (xlogy(a - 1.0, t) + xlogy(b - 1.0, 1.0 - t) - lb).exp();
                        dens * rl.log_value_unchecked(t).exp()
                    };
                    adaptive_simpson(&f, 0.0, 1.0, 1e-10)
                }
                _ => {
                    return Err(Error::config(
                        "prior",
                        format!("a continuous prior on [0, 1] is not supported by `{}`", m.id()),
                    ))
                }
            }
        }
    };
    if !(avg > 0.0) {
        return Err(Error::DegenerateNormalizer(format!(
            "prior-averaged likelihood is {avg} for {}",
            rl.observation()
        )));
    }
    Ok(avg.ln())
}

/// `eta_Q(x, theta) = L_x(theta) / int L_x dQ`. Depends on the likelihood
/// only up to proportionality, so all ensemble members agree.
pub fn e_value(m: &Model, x: &Observation, theta: f64, q: &PriorSpec) -> Result<f64> {
    let rl = RelativeLikelihood::new(m, x)?;
    let norm = log_prior_average(&rl, q)?;
    Ok((rl.log_value(theta)? - norm).exp())
}

/// `theta -> min(eta_Q(x, theta), 1)` on a grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EContour {
    pub grid: ParameterGrid,
    pub values: Vec<f64>,
    pub prior: PriorSpec,
}

pub fn e_contour(m: &Model, x: &Observation, grid: &ParameterGrid, q: &PriorSpec) -> Result<EContour> {
    let rl = RelativeLikelihood::new(m, x)?;
    let norm = log_prior_average(&rl, q)?;
    let values = grid
        .points()
        .iter()
        .map(|&t| Ok((rl.log_value(t)? - norm).exp().min(1.0)))
        .collect::<Result<Vec<_>>>()?;
    Ok(EContour {
        grid: grid.clone(),
        values,
        prior: q.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contour::contour_exact;
    use crate::likelihood::relative_likelihood;

    fn trials(n: u64, y: u64) -> Observation {
        Observation::Trials { n, y }
    }

    fn thetas() -> Vec<f64> {
        (0..=20).map(|i| i as f64 / 20.0).filter(|&t| t > 0.0).collect()
    }

    #[test]
    fn bernoulli_designs_share_eta() {
        let probes = bernoulli_probes(&[(10, 3), (16, 11)], &thetas());
        let e = verify_ensemble(
            vec![Model::Binomial { trials: 10 }, Model::NegativeBinomial { successes: 3 }],
            &probes,
        )
        .unwrap();
        assert_eq!(e.members().len(), 2);

        let probes = bernoulli_probes(&[(1, 1), (2, 0), (2, 1)], &thetas());
        verify_ensemble(vec![Model::Binomial { trials: 2 }, Model::Example21], &probes).unwrap();
    }

    #[test]
    fn normal_and_binomial_disagree() {
        let probes = bernoulli_probes(&[(10, 3)], &[0.3]);
        let err = verify_ensemble(vec![Model::Binomial { trials: 10 }, Model::NormalUnitVariance], &probes).unwrap_err();
        assert!(err.to_string().contains("(10,3)"), "{err}");
        let probes = vec![(Observation::Scalar(0.5), 0.3)];
        assert!(verify_ensemble(vec![Model::Binomial { trials: 10 }, Model::NormalUnitVariance], &probes).is_err());
    }

    #[test]
    fn mismatch_is_reported() {
        // a binomial and a negative binomial at different data share nothing
        let members = vec![Model::Binomial { trials: 10 }, Model::NegativeBinomial { successes: 3 }];
        let e = verify_ensemble_with_tol(members, &[(trials(10, 3), 0.3)], 0.0).unwrap();
        assert_eq!(e.verification_tol(), 0.0);
    }

    #[test]
    fn ensemble_is_pointwise_max() {
        let members = vec![Model::Binomial { trials: 10 }, Model::NegativeBinomial { successes: 3 }];
        let e = verify_ensemble(members, &bernoulli_probes(&[(10, 3)], &thetas())).unwrap();
        let g = e.common_grid(&ParameterGrid::continuum(0.0, 1.0, 0.01).unwrap()).unwrap();
        let x = trials(10, 3);
        let d = contour_ensemble_detailed(&e, &x, &g, None, &McConfig::default()).unwrap();
        for i in 0..g.len() {
            let m = d.members[0].values[i].max(d.members[1].values[i]);
            assert_eq!(d.combined.values[i], m);
        }
        assert_eq!(d.combined.method, ContourMethod::Exact);

        let single = verify_ensemble(vec![Model::Binomial { trials: 10 }], &[]).unwrap();
        let c = contour_ensemble(&single, &x, &g, &McConfig::default()).unwrap();
        let direct = contour_exact(&Model::Binomial { trials: 10 }, &x, &g, 1e-10).unwrap();
        assert_eq!(c.values, direct.values);
        assert!(contour_ensemble(&single, &Observation::Scalar(1.0), &g, &McConfig::default()).is_err());
    }

    #[test]
    fn uniform_prior_e_value() {
        let m = Model::Binomial { trials: 10 };
        let x = trials(10, 3);
        let v = e_value(&m, &x, 0.3, &PriorSpec::Uniform).unwrap();
        let oracle = 11.0 * 120.0 * 0.3f64.powi(3) * 0.7f64.powi(7);
        assert!((v - oracle).abs() < 1e-12 * oracle, "{v} vs {oracle}");
        // any design gives the same eta_Q
        let nb = e_value(&Model::NegativeBinomial { successes: 3 }, &x, 0.3, &PriorSpec::Uniform).unwrap();
        assert!((v - nb).abs() < 1e-12);
    }

    #[test]
    fn point_mass_is_neutral() {
        let m = Model::Binomial { trials: 10 };
        let x = trials(10, 3);
        let q = PriorSpec::PointMass { theta: 0.42 };
        assert!((e_value(&m, &x, 0.42, &q).unwrap() - 1.0).abs() < 1e-15);
        let g = ParameterGrid::continuum(0.0, 1.0, 0.1).unwrap();
        let ec = e_contour(&m, &x, &g, &PriorSpec::PointMass { theta: 0.3 }).unwrap();
        let rl: Vec<f64> = g.points().iter().map(|&t| relative_likelihood(&m, &x, t).unwrap()).collect();
        // with Q at the MLE, eta_Q equals eta
        for (a, b) in ec.values.iter().zip(&rl) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn discrete_and_numeric_priors() {
        let m = Model::Binomial { trials: 10 };
        let x = trials(10, 3);
        let q = PriorSpec::Discrete {
            support: vec![0.2, 0.5],
            weights: vec![0.5, 0.5],
        };
        let avg = 0.5 * relative_likelihood(&m, &x, 0.2).unwrap() + 0.5 * relative_likelihood(&m, &x, 0.5).unwrap();
        let v = e_value(&m, &x, 0.3, &q).unwrap();
        assert!((v - 1.0 / avg).abs() < 1e-12);
        let bad = PriorSpec::Discrete {
            support: vec![0.2],
            weights: vec![0.7],
        };
        assert!(e_value(&m, &x, 0.3, &bad).is_err());
        assert!(e_value(&m, &x, 0.3, &PriorSpec::Beta { a: -1.0, b: 1.0 }).is_err());

        // normal likelihood against Unif(0,1): Phi(1 - x) - Phi(-x) scaled by sqrt(2 pi)
        let nx = Observation::Scalar(0.4);
        let v = e_value(&Model::NormalUnitVariance, &nx, 0.4, &PriorSpec::Uniform).unwrap();
        let integral = (2.0 * std::f64::consts::PI).sqrt()
            * (crate::special::normal_cdf(0.6) - crate::special::normal_cdf(-0.4));
        assert!((v - 1.0 / integral).abs() < 1e-9, "{v} vs {}", 1.0 / integral);
        assert!(e_value(&Model::DiscreteUniform { sample_size: 1 }, &Observation::Sample(vec![3]), 3.0, &PriorSpec::Uniform).is_err());
    }

    #[test]
    fn prior_json_forms() {
        let q: PriorSpec = serde_json::from_str(r#"{"prior":"uniform"}"#).unwrap();
        assert_eq!(q, PriorSpec::Uniform);
        let q: PriorSpec = serde_json::from_str(r#"{"prior":"beta","a":2,"b":3}"#).unwrap();
        assert_eq!(q, PriorSpec::Beta { a: 2.0, b: 3.0 });
        let q: PriorSpec = serde_json::from_str(r#"{"prior":"point-mass","theta":0.5}"#).unwrap();
        assert_eq!(q, PriorSpec::PointMass { theta: 0.5 });
    }
}
