//! Possibility contours `pi_x(theta) = P_theta{ eta(X, theta) <= eta(x, theta) }`.
//!
//! Three evaluation routes share one event definition: exact enumeration of
//! the sample space, closed forms for the normal/uniform/ticket models, and
//! Monte Carlo. Ties are compared in the log domain with a relative tolerance
//! and counted inside the event; truncated enumeration mass is added to it.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::ParameterGrid;
use crate::likelihood::{log_eta_unchecked, RelativeLikelihood};
use crate::model::{Model, Observation, TicketSpec, DEFAULT_TAIL_TOL};
use crate::rng;
use crate::special::{normal_two_sided_tail, ExactSum};

/// Relative log-domain tolerance for `eta(X', theta) <= eta(x, theta)`.
pub const DEFAULT_TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ContourMethod {
    Exact,
    ClosedForm,
    MonteCarlo,
}

impl ContourMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            ContourMethod::Exact => "exact",
            ContourMethod::ClosedForm => "closed-form",
            ContourMethod::MonteCarlo => "monte-carlo",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub replications: usize,
    pub seed: u64,
    pub tie_tolerance: f64,
}

impl McConfig {
    pub const MIN_REPLICATIONS: usize = 100;
    pub const DEFAULT_REPLICATIONS: usize = 10_000;

    pub fn new(replications: usize, seed: u64) -> Result<Self> {
        if replications < Self::MIN_REPLICATIONS {
            return Err(Error::config(
                "replications",
                format!("must be at least {}, got {replications}", Self::MIN_REPLICATIONS),
            ));
        }
        Ok(Self {
            replications,
            seed,
            tie_tolerance: DEFAULT_TIE_TOLERANCE,
        })
    }
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            replications: Self::DEFAULT_REPLICATIONS,
            seed: 0,
            tie_tolerance: DEFAULT_TIE_TOLERANCE,
        }
    }
}

/// A possibility contour sampled on a parameter grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Contour {
    pub grid: ParameterGrid,
    pub values: Vec<f64>,
    pub method: ContourMethod,
    pub mc_std_err: Option<Vec<f64>>,
    pub observation: Observation,
    pub model_id: String,
    pub seed: Option<u64>,
}

impl Contour {
    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    pub fn value_at(&self, theta: f64) -> Option<f64> {
        self.grid.position(theta).map(|i| self.values[i])
    }

    pub fn std_err(&self, i: usize) -> f64 {
        self.mc_std_err.as_ref().map_or(0.0, |se| se[i])
    }
}

/// `a <= b` on log-eta values, with ties within `tol` (relative) counted in.
#[inline]
pub(crate) fn log_le(a: f64, b: f64, tol: f64) -> bool {
    if b == f64::NEG_INFINITY {
        return a == f64::NEG_INFINITY;
    }
    a <= b + tol * b.abs().max(1.0)
}

/// The distribution of `eta(X, theta)` under `P_theta` for one fixed `theta`,
/// sorted so that contour values become prefix sums.
pub(crate) struct PointTransform {
    /// Enumerated outcomes, sorted by `log_eta` ascending.
    pub outcomes: Vec<Observation>,
    pub probs: Vec<f64>,
    pub log_eta: Vec<f64>,
    /// `cum[k]` = sum of the first `k` sorted probabilities.
    cum: Vec<f64>,
    pub residual: f64,
    tie_tol: f64,
}

impl PointTransform {
    pub fn new(m: &Model, theta: f64, tail_tol: f64, tie_tol: f64) -> Result<Self> {
        let e = m.enumerate_outcomes(theta, tail_tol)?;
        let mut rows: Vec<(Observation, f64, f64)> = e
            .outcomes
            .into_iter()
            .filter(|(_, p)| *p > 0.0)
            .map(|(x, p)| {
                let le = log_eta_unchecked(m, &x, theta);
                (x, p, le)
            })
            .collect();
        rows.sort_by(|a, b| a.2.total_cmp(&b.2));
        let mut cum = Vec::with_capacity(rows.len() + 1);
        let mut s = ExactSum::new();
        cum.push(0.0);
        for r in &rows {
            s.add(r.1);
            cum.push(s.value());
        }
        let (mut outcomes, mut probs, mut log_eta) = (
            Vec::with_capacity(rows.len()),
            Vec::with_capacity(rows.len()),
            Vec::with_capacity(rows.len()),
        );
        for (x, p, le) in rows {
            outcomes.push(x);
            probs.push(p);
            log_eta.push(le);
        }
        Ok(Self {
            outcomes,
            probs,
            log_eta,
            cum,
            residual: e.residual_tail_mass,
            tie_tol,
        })
    }

    /// `P_theta{ log eta(X) <= threshold }`, residual mass included.
    pub fn pi(&self, log_eta_x: f64) -> f64 {
        let k = self.log_eta.partition_point(|&v| log_le(v, log_eta_x, self.tie_tol));
        if k == self.log_eta.len() {
            // the event is the whole sample space
            return 1.0;
        }
        (self.cum[k] + self.residual).min(1.0)
    }
}

fn continuum_augmented(grid: &ParameterGrid, mle: f64) -> ParameterGrid {
    match grid.kind() {
        crate::grid::GridKind::Continuum { .. } if mle >= grid.lo() && mle <= grid.hi() => grid.with_point(mle),
        _ => grid.clone(),
    }
}

fn check_grid(m: &Model, grid: &ParameterGrid) -> Result<()> {
    match grid.points().iter().find(|&&t| !m.contains_theta(t)) {
        Some(&theta) => Err(Error::OutsideParameterSpace { model: m.id(), theta }),
        None => Ok(()),
    }
}

/// Exact contour by enumerating the sample space at every grid point.
pub fn contour_exact(m: &Model, x: &Observation, grid: &ParameterGrid, tail_tol: f64) -> Result<Contour> {
    if !m.capabilities().enumerable {
        return Err(Error::NotEnumerable(m.id()));
    }
    let rl = RelativeLikelihood::new(m, x)?;
    let grid = continuum_augmented(grid, m.mle(x)?);
    check_grid(m, &grid)?;
    let values = grid
        .points()
        .par_iter()
        .map(|&theta| {
            let t = PointTransform::new(m, theta, tail_tol, DEFAULT_TIE_TOLERANCE)?;
            Ok(t.pi(rl.log_value_unchecked(theta)))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(Contour {
        grid,
        values,
        method: ContourMethod::Exact,
        mc_std_err: None,
        observation: x.clone(),
        model_id: m.id(),
        seed: None,
    })
}

/// Closed-form contour value at one parameter point.
pub(crate) fn closed_form_point(m: &Model, x: &Observation, theta: f64) -> Result<f64> {
    match (m, x) {
        (Model::NormalUnitVariance, Observation::Scalar(v)) => Ok(normal_two_sided_tail(v - theta)),
        (Model::DiscreteUniform { sample_size }, Observation::Sample(s)) => {
            let s = s.iter().copied().max().unwrap_or(1) as f64;
            Ok(if theta < s { 0.0 } else { (s / theta).powi(*sample_size as i32) })
        }
        (Model::Ticket(_), Observation::Scalar(_)) => {
            let total = TicketSpec::N_BALLS as f64;
            let ld = m.log_density_unchecked(x, theta);
            Ok(if ld == (TicketSpec::N_THETA_BALLS as f64 / total).ln() {
                1.0
            } else if ld.is_finite() {
                TicketSpec::N_MULTIPLIERS as f64 / total
            } else {
                0.0
            })
        }
        _ => Err(Error::NoClosedForm(m.id())),
    }
}

/// Closed-form contour for the normal, discrete-uniform and ticket models.
pub fn contour_closed_form(m: &Model, x: &Observation, grid: &ParameterGrid) -> Result<Contour> {
    if !m.capabilities().has_closed_form_contour {
        return Err(Error::NoClosedForm(m.id()));
    }
    m.check_observation(x)?;
    let grid = continuum_augmented(grid, m.mle(x)?);
    check_grid(m, &grid)?;
    let values = grid
        .points()
        .iter()
        .map(|&t| closed_form_point(m, x, t))
        .collect::<Result<Vec<_>>>()?;
    Ok(Contour {
        grid,
        values,
        method: ContourMethod::ClosedForm,
        mc_std_err: None,
        observation: x.clone(),
        model_id: m.id(),
        seed: None,
    })
}

/// Monte Carlo contour: grid point `j` uses substream `(seed, j)`.
pub fn contour_mc(m: &Model, x: &Observation, grid: &ParameterGrid, cfg: &McConfig) -> Result<Contour> {
    if cfg.replications < McConfig::MIN_REPLICATIONS {
        return Err(Error::config("replications", format!("must be at least {}", McConfig::MIN_REPLICATIONS)));
    }
    let rl = RelativeLikelihood::new(m, x)?;
    let grid = continuum_augmented(grid, m.mle(x)?);
    check_grid(m, &grid)?;
    let reps = cfg.replications;
    let est: Vec<(f64, f64)> = grid
        .points()
        .par_iter()
        .enumerate()
        .map(|(j, &theta)| {
            let threshold = rl.log_value_unchecked(theta);
            let mut r = rng::substream(cfg.seed, j as u64, 0);
            let hits = (0..reps)
                .filter(|_| {
                    let xs = m.draw(theta, &mut r);
                    log_le(log_eta_unchecked(m, &xs, theta), threshold, cfg.tie_tolerance)
                })
                .count();
            let p = hits as f64 / reps as f64;
            (p, (p * (1.0 - p) / reps as f64).sqrt())
        })
        .collect();
    let (values, se) = est.into_iter().unzip();
    Ok(Contour {
        grid,
        values,
        method: ContourMethod::MonteCarlo,
        mc_std_err: Some(se),
        observation: x.clone(),
        model_id: m.id(),
        seed: Some(cfg.seed),
    })
}

/// Preferred method for a model: exact, then closed form, then Monte Carlo.
pub fn preferred_method(m: &Model) -> ContourMethod {
    let caps = m.capabilities();
    if caps.enumerable {
        ContourMethod::Exact
    } else if caps.has_closed_form_contour {
        ContourMethod::ClosedForm
    } else {
        ContourMethod::MonteCarlo
    }
}

/// Dispatch on `method` (or the preferred one when `None`).
pub fn contour(
    m: &Model,
    x: &Observation,
    grid: &ParameterGrid,
    method: Option<ContourMethod>,
    mc: &McConfig,
) -> Result<Contour> {
    match method.unwrap_or_else(|| preferred_method(m)) {
        ContourMethod::Exact => contour_exact(m, x, grid, DEFAULT_TAIL_TOL),
        ContourMethod::ClosedForm => contour_closed_form(m, x, grid),
        ContourMethod::MonteCarlo => contour_mc(m, x, grid, mc),
    }
}

/// Grid `lo..=hi` by `step` with points outside `m`'s parameter space dropped.
fn restricted(m: &Model, lo: f64, hi: f64, step: f64) -> Result<ParameterGrid> {
    ParameterGrid::continuum(lo, hi, step)?
        .filtered(|t| m.contains_theta(t))
        .ok_or_else(|| Error::InvalidGrid(format!("no grid point lies in the parameter space of `{}`", m.id())))
}

/// Sensible default grid for plotting a contour of `m` at `x`.
pub fn default_grid(m: &Model, x: &Observation) -> Result<ParameterGrid> {
    let mle = m.mle(x)?;
    match m {
        Model::NormalUnitVariance => ParameterGrid::continuum(mle - 5.0, mle + 5.0, 0.01),
        Model::Binomial { .. } | Model::Example21 | Model::NegativeBinomial { .. } => restricted(m, 0.0, 1.0, 0.001),
        Model::DiscreteUniform { .. } => {
            let s = mle as i64;
            ParameterGrid::integers(1, (3 * s).max(s + 10))
        }
        Model::Ticket(spec) => Ok(ticket_grid(spec, mle)?),
    }
}

/// Regular grid over `(0, 1.2 x]` merged with the spike locations `x` and `x / a_j`.
pub fn ticket_grid(spec: &TicketSpec, x: f64) -> Result<ParameterGrid> {
    let base = ParameterGrid::continuum(0.02 * x, 1.2 * x, 0.002 * x)?;
    let mut spikes: Vec<f64> = spec.multipliers().iter().map(|a| x / a).collect();
    spikes.push(x);
    Ok(base.with_points(&spikes))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{make_model, ModelConfig};

    fn uniform_sample(n: usize, s: u64) -> Observation {
        Observation::Sample(vec![s; n])
    }

    #[test]
    fn uniform_exact_matches_formula() {
        let m = Model::DiscreteUniform { sample_size: 1 };
        let g = ParameterGrid::integers(1, 15).unwrap();
        let c = contour_exact(&m, &uniform_sample(1, 5), &g, 0.0).unwrap();
        assert!((c.value_at(6.0).unwrap() - 5.0 / 6.0).abs() < 1e-12);
        assert_eq!(c.value_at(4.0).unwrap(), 0.0);
        assert_eq!(c.value_at(5.0).unwrap(), 1.0);
        // contour values are not a probability mass function
        assert!(c.values.iter().sum::<f64>() > 1.0);

        let m3 = Model::DiscreteUniform { sample_size: 3 };
        let c3 = contour_exact(&m3, &Observation::Sample(vec![2, 5, 3]), &g, 0.0).unwrap();
        assert!((c3.value_at(7.0).unwrap() - (5.0f64 / 7.0).powi(3)).abs() < 1e-12);
        assert!((c3.value_at(7.0).unwrap() - 0.364_431_486_880_466_5).abs() < 1e-12);
    }

    #[test]
    fn ticket_three_levels() {
        let m = make_model(&ModelConfig::named("ticket")).unwrap();
        let x = Observation::Scalar(1.0);
        let Model::Ticket(spec) = &m else { unreachable!() };
        let g = ticket_grid(spec, 1.0).unwrap();
        let exact = contour_exact(&m, &x, &g, 0.0).unwrap();
        let closed = contour_closed_form(&m, &x, &g).unwrap();
        assert_eq!(exact.grid, closed.grid);
        for (a, b) in exact.values.iter().zip(&closed.values) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(exact.value_at(1.0), Some(1.0));
        let a1 = spec.multipliers()[0];
        assert!((exact.value_at(1.0 / a1).unwrap() - 0.98).abs() < 1e-12);
        assert_eq!(exact.value_at(0.5), Some(0.0));
    }

    #[test]
    fn normal_closed_form_values() {
        let g = ParameterGrid::continuum(2.0, 12.0, 0.1).unwrap();
        let c = contour_closed_form(&Model::NormalUnitVariance, &Observation::Scalar(7.0), &g).unwrap();
        assert_eq!(c.value_at(7.0), Some(1.0));
        assert!((c.value_at(7.7).unwrap() - 0.483_927_304_446_146_1).abs() < 1e-12);
        assert!(contour_exact(&Model::NormalUnitVariance, &Observation::Scalar(7.0), &g, 0.0).is_err());
        assert!(matches!(
            contour_closed_form(&Model::Binomial { trials: 10 }, &Observation::Trials { n: 10, y: 3 }, &g),
            Err(Error::NoClosedForm(_))
        ));
    }

    #[test]
    fn mc_is_one_at_mle_and_seeded() {
        let m = Model::Binomial { trials: 10 };
        let x = Observation::Trials { n: 10, y: 3 };
        let g = ParameterGrid::continuum(0.1, 0.5, 0.1).unwrap();
        let cfg = McConfig::new(2000, 42).unwrap();
        let a = contour_mc(&m, &x, &g, &cfg).unwrap();
        let b = contour_mc(&m, &x, &g, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.value_at(0.3), Some(1.0));
        assert!(McConfig::new(50, 1).is_err());
    }

    #[test]
    fn tie_comparison() {
        assert!(log_le(-1.0, -1.0 - 1e-13, 1e-12));
        assert!(!log_le(-1.0, -1.1, 1e-12));
        assert!(log_le(f64::NEG_INFINITY, f64::NEG_INFINITY, 1e-12));
        assert!(!log_le(-800.0, f64::NEG_INFINITY, 1e-12));
    }

    #[test]
    fn negbinom_grid_excludes_zero() {
        let m = Model::NegativeBinomial { successes: 3 };
        let x = Observation::Trials { n: 10, y: 3 };
        let g = default_grid(&m, &x).unwrap();
        assert_eq!(g.lo(), 0.001);
        let full = ParameterGrid::continuum(0.0, 1.0, 0.1).unwrap();
        assert!(matches!(contour_exact(&m, &x, &full, 1e-10), Err(Error::OutsideParameterSpace { .. })));
    }
}
