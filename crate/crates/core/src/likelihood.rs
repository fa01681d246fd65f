//! Relative likelihood and the normalized-likelihood set function.
//!
//! Both are computed in the log domain: `eta(x, theta) = exp(log L_x(theta) - log sup L_x)`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{GridKind, ParameterGrid, POINT_TOL};
use crate::hypothesis::HypothesisSet;
use crate::model::{Model, Observation};

/// `theta -> L_x(theta) / sup L_x` for a fixed model and datum.
#[derive(Debug, Clone)]
pub struct RelativeLikelihood {
    model: Model,
    observation: Observation,
    log_sup: f64,
}

impl RelativeLikelihood {
    pub fn new(model: &Model, x: &Observation) -> Result<Self> {
        let mle = model.mle(x)?;
        let log_sup = model.log_density(x, mle)?;
        if !log_sup.is_finite() {
            return Err(Error::Numeric(format!(
                "likelihood of {x} under `{}` has non-finite supremum",
                model.id()
            )));
        }
        Ok(Self {
            model: model.clone(),
            observation: x.clone(),
            log_sup,
        })
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn observation(&self) -> &Observation {
        &self.observation
    }

    pub fn log_sup(&self) -> f64 {
        self.log_sup
    }

    /// `log eta(x, theta)`, never above 0.
    pub fn log_value(&self, theta: f64) -> Result<f64> {
        self.model.check_theta(theta)?;
        Ok(self.log_value_unchecked(theta))
    }

    pub(crate) fn log_value_unchecked(&self, theta: f64) -> f64 {
        (self.model.log_density_unchecked(&self.observation, theta) - self.log_sup).min(0.0)
    }

    pub fn value(&self, theta: f64) -> Result<f64> {
        Ok(self.log_value(theta)?.exp())
    }
}

/// `eta(x, theta)` for model `m`.
pub fn relative_likelihood(m: &Model, x: &Observation, theta: f64) -> Result<f64> {
    RelativeLikelihood::new(m, x)?.value(theta)
}

/// `log eta(x, theta)` without re-validating inputs. Used in inner loops
/// where `x` comes from the model's own enumeration or sampler.
pub(crate) fn log_eta_unchecked(m: &Model, x: &Observation, theta: f64) -> f64 {
    let mle = match x {
        Observation::Scalar(v) => *v,
        Observation::Sample(v) => v.iter().copied().max().unwrap_or(1) as f64,
        Observation::Trials { n, y } => *y as f64 / *n as f64,
    };
    (m.log_density_unchecked(x, theta) - m.log_density_unchecked(x, mle)).min(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case", tag = "rule")]
pub enum IntegrationRule {
    /// Sum over a finite parameter space.
    FiniteSum,
    /// Trapezoid rule over a bounded window of a continuum.
    Trapezoid { lo: f64, hi: f64, resolution: f64 },
}

/// Likelihood normalized to a probability over the parameter space:
/// `A -> int_A L_x / int_T L_x` (sums for finite spaces).
#[derive(Debug, Clone)]
pub struct NormalizedLikelihood {
    points: Vec<f64>,
    /// Likelihood values scaled by `1 / sup L_x`; the scale cancels.
    weights: Vec<f64>,
    normalizer: f64,
    rule: IntegrationRule,
}

/// Default half-width of the integration window around the MLE for the unit normal.
pub const NORMAL_WINDOW_HALF_WIDTH: f64 = 15.0;
pub const NORMAL_WINDOW_RESOLUTION: f64 = 0.01;

impl NormalizedLikelihood {
    /// Finite parameter space with given likelihood values.
    pub fn finite(points: Vec<f64>, likelihood: Vec<f64>) -> Result<Self> {
        if points.len() != likelihood.len() {
            return Err(Error::config("likelihood", "length differs from parameter points"));
        }
        if likelihood.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::config("likelihood", "values must be finite and non-negative"));
        }
        let grid = ParameterGrid::from_points(points, GridKind::IntegerLattice)
            .map_err(|_| Error::InvalidGrid("finite parameter space must be strictly increasing".into()))?;
        let normalizer: f64 = likelihood.iter().sum();
        if normalizer <= 0.0 {
            return Err(Error::DegenerateNormalizer("likelihood sums to zero".into()));
        }
        Ok(Self {
            points: grid.points().to_vec(),
            weights: likelihood,
            normalizer,
            rule: IntegrationRule::FiniteSum,
        })
    }

    /// Normalize `L_x` over `grid`: a finite sum on integer lattices, the
    /// trapezoid rule on continuum grids (the grid range is the window).
    pub fn over_grid(model: &Model, x: &Observation, grid: &ParameterGrid) -> Result<Self> {
        let rl = RelativeLikelihood::new(model, x)?;
        let weights = grid
            .points()
            .iter()
            .map(|&t| rl.value(t))
            .collect::<Result<Vec<_>>>()?;
        let points = grid.points().to_vec();
        match grid.kind() {
            GridKind::IntegerLattice => Self::finite(points, weights),
            GridKind::Continuum { resolution } => {
                let mut nl = Self {
                    rule: IntegrationRule::Trapezoid {
                        lo: grid.lo(),
                        hi: grid.hi(),
                        resolution,
                    },
                    points,
                    weights,
                    normalizer: 1.0,
                };
                nl.normalizer = nl.integrate(grid.lo(), grid.hi());
                if !(nl.normalizer > 0.0) {
                    return Err(Error::DegenerateNormalizer(format!(
                        "likelihood integrates to {} over the window",
                        nl.normalizer
                    )));
                }
                Ok(nl)
            }
        }
    }

    /// Unit-normal likelihood on the window `(mle - half_width, mle + half_width)`.
    pub fn normal_window(x: f64, half_width: f64, resolution: f64) -> Result<Self> {
        let grid = ParameterGrid::continuum(x - half_width, x + half_width, resolution)?;
        Self::over_grid(&Model::NormalUnitVariance, &Observation::Scalar(x), &grid)
    }

    pub fn rule(&self) -> IntegrationRule {
        self.rule
    }

    pub fn normalizer(&self) -> f64 {
        self.normalizer
    }

    /// First and last parameter points covered.
    pub fn window(&self) -> (f64, f64) {
        (self.points[0], self.points[self.points.len() - 1])
    }

    /// Integral of the piecewise-linear interpolant over `[a, b]`.
    fn integrate(&self, a: f64, b: f64) -> f64 {
        let t = &self.points;
        let w = &self.weights;
        if t.len() < 2 || b <= a {
            return 0.0;
        }
        let interp = |i: usize, v: f64| {
            let f = (v - t[i]) / (t[i + 1] - t[i]);
            w[i] + f * (w[i + 1] - w[i])
        };
        let start = t.partition_point(|&p| p <= a).saturating_sub(1);
        let mut total = 0.0;
        for i in start..t.len() - 1 {
            if t[i] >= b {
                break;
            }
            let l = a.max(t[i]);
            let u = b.min(t[i + 1]);
            if u > l {
                total += 0.5 * (u - l) * (interp(i, l) + interp(i, u));
            }
        }
        total
    }

    /// Normalized mass of `A`. Points have zero mass on a continuum.
    pub fn mass(&self, a: &HypothesisSet) -> Result<f64> {
        let Some((lo, hi)) = a.extent() else {
            return Ok(0.0);
        };
        let (wlo, whi) = (self.points[0], self.points[self.points.len() - 1]);
        let tol = POINT_TOL * wlo.abs().max(whi.abs()).max(1.0);
        if lo < wlo - tol || hi > whi + tol {
            return Err(Error::OutsideWindow {
                hypothesis: a.to_string(),
                lo: wlo,
                hi: whi,
            });
        }
        match self.rule {
            IntegrationRule::FiniteSum => {
                if let HypothesisSet::Points(p) = a {
                    if let Some(bad) = p.iter().find(|&&q| !self.points.iter().any(|&t| crate::grid::same_point(t, q))) {
                        return Err(Error::InvalidHypothesis(format!(
                            "{bad} is not in the finite parameter space"
                        )));
                    }
                }
                let s: f64 = self
                    .points
                    .iter()
                    .zip(&self.weights)
                    .filter(|(t, _)| a.contains(**t))
                    .map(|(_, w)| w)
                    .sum();
                Ok(s / self.normalizer)
            }
            IntegrationRule::Trapezoid { .. } => {
                let s: f64 = a
                    .intervals()
                    .iter()
                    .map(|i| self.integrate(i.lo.max(wlo), i.hi.min(whi)))
                    .sum();
                Ok((s / self.normalizer).clamp(0.0, 1.0))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::normal_cdf;

    fn h(s: &str) -> HypothesisSet {
        s.parse().unwrap()
    }

    #[test]
    fn normal_relative_likelihood() {
        let v = relative_likelihood(&Model::NormalUnitVariance, &Observation::Scalar(7.0), 7.7).unwrap();
        // direct density quotient
        let dens = |z: f64| (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let oracle = dens(7.0 - 7.7) / dens(0.0);
        assert!((v - oracle).abs() < 1e-15);
        assert!((v - 0.782_704_538_241_867_6).abs() < 1e-12);
    }

    #[test]
    fn example21_matches_bernoulli_form() {
        let x = Observation::Trials { n: 2, y: 1 };
        let v = relative_likelihood(&Model::Example21, &x, 0.25).unwrap();
        assert!((v - 0.75).abs() < 1e-15);
    }

    #[test]
    fn finite_shackle_masses() {
        let nl = NormalizedLikelihood::finite(vec![1.0, 2.0], vec![0.2, 0.6]).unwrap();
        assert!((nl.mass(&h("{1}")).unwrap() - 0.25).abs() < 1e-15);
        assert!((nl.mass(&h("{2}")).unwrap() - 0.75).abs() < 1e-15);
        assert!((nl.mass(&h("{1,2}")).unwrap() - 1.0).abs() < 1e-15);
        assert!(nl.mass(&h("{3}")).is_err());
        assert!(NormalizedLikelihood::finite(vec![1.0], vec![0.0]).is_err());
    }

    #[test]
    fn ratio_near_three() {
        let nl = NormalizedLikelihood::normal_window(7.0, NORMAL_WINDOW_HALF_WIDTH, NORMAL_WINDOW_RESOLUTION)
            .unwrap();
        let a = nl.mass(&h("[7.7,8]")).unwrap();
        let b = nl.mass(&h("[7.7,20]")).unwrap();
        let oracle = (normal_cdf(13.0) - normal_cdf(0.7)) / (normal_cdf(1.0) - normal_cdf(0.7));
        assert!((b / a - oracle).abs() < 1e-3, "{} vs {}", b / a, oracle);
        assert!(nl.mass(&h("[7.7,30]")).is_err());
        assert_eq!(nl.mass(&h("{7}")).unwrap(), 0.0);
        assert_eq!(nl.mass(&HypothesisSet::Points(vec![])).unwrap(), 0.0);
    }

    #[test]
    fn full_window_has_unit_mass() {
        let nl = NormalizedLikelihood::normal_window(7.0, 37.0, 0.01).unwrap();
        assert!((nl.mass(&h("[-30,44]")).unwrap() - 1.0).abs() < 1e-12);
        let g = ParameterGrid::continuum(-30.0, 30.0, 0.01).unwrap();
        let nl = NormalizedLikelihood::over_grid(&Model::NormalUnitVariance, &Observation::Scalar(7.0), &g).unwrap();
        assert!((nl.mass(&h("[-30,30]")).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn additive_on_touching_intervals() {
        let nl = NormalizedLikelihood::normal_window(7.0, 15.0, 0.01).unwrap();
        let parts = nl.mass(&h("[7.7,8]")).unwrap() + nl.mass(&h("[8,20]")).unwrap();
        assert!((parts - nl.mass(&h("[7.7,20]")).unwrap()).abs() < 1e-12);
        let u = nl.mass(&h("[0,1]U[7,7.5]")).unwrap();
        let sep = nl.mass(&h("[0,1]")).unwrap() + nl.mass(&h("[7,7.5]")).unwrap();
        assert!((u - sep).abs() < 1e-12);
    }
}
