//! Simulation of the validity property `P_theta{ pi_X(theta) <= alpha } <= alpha`,
//! coverage of the derived confidence sets, and the false-confidence contrast
//! between normalized likelihood and the calibrated contour.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::contour::{closed_form_point, PointTransform, DEFAULT_TIE_TOLERANCE};
use crate::error::{Error, Result};
use crate::hypothesis::{HypothesisSet, Interval};
use crate::likelihood::{log_eta_unchecked, NormalizedLikelihood, NORMAL_WINDOW_HALF_WIDTH, NORMAL_WINDOW_RESOLUTION};
use crate::model::{Model, Observation, DEFAULT_TAIL_TOL};
use crate::multimodel::ModelEnsemble;
use crate::rng;
use crate::special::{normal_cdf, normal_two_sided_tail, ExactSum};

pub const DEFAULT_ALPHAS: [f64; 5] = [0.01, 0.05, 0.1, 0.25, 0.5];
pub const MIN_MC_REPLICATIONS: usize = 1000;
/// Monte Carlo violations are flagged beyond `alpha + MC_SIGMAS * se`.
pub const MC_SIGMAS: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SimulationMode {
    ExactEnumeration,
    MonteCarlo,
}

impl SimulationMode {
    pub fn preferred(m: &Model) -> Self {
        if m.capabilities().enumerable {
            SimulationMode::ExactEnumeration
        } else {
            SimulationMode::MonteCarlo
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SimulationMode::ExactEnumeration => "exact-enumeration",
            SimulationMode::MonteCarlo => "monte-carlo",
        }
    }
}

/// How `pi_x(theta)` is formed from the relative likelihood.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "rule")]
pub enum ContourRule {
    /// The probability-to-possibility transform of `eta`.
    Calibrated,
    /// `eta^power` used directly as a contour, with no calibration. Only
    /// useful as a fixture that the harness must flag.
    UncalibratedRelativeLikelihood { power: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidityConfig {
    /// `None` picks exact enumeration when the model supports it.
    pub mode: Option<SimulationMode>,
    pub replications: usize,
    pub seed: u64,
    pub tail_tol: f64,
    pub tie_tolerance: f64,
    pub rule: ContourRule,
}

impl Default for ValidityConfig {
    fn default() -> Self {
        Self {
            mode: None,
            replications: 10_000,
            seed: 0,
            tail_tol: DEFAULT_TAIL_TOL,
            tie_tolerance: DEFAULT_TIE_TOLERANCE,
            rule: ContourRule::Calibrated,
        }
    }
}

impl ValidityConfig {
    fn mode_for(&self, m: &Model) -> Result<SimulationMode> {
        let mode = self.mode.unwrap_or_else(|| SimulationMode::preferred(m));
        match mode {
            SimulationMode::ExactEnumeration if !m.capabilities().enumerable => Err(Error::NotEnumerable(m.id())),
            SimulationMode::MonteCarlo if self.replications < MIN_MC_REPLICATIONS => Err(Error::config(
                "replications",
                format!("Monte Carlo mode needs at least {MIN_MC_REPLICATIONS}, got {}", self.replications),
            )),
            _ => Ok(mode),
        }
    }
}

/// One `(theta, alpha)` cell of a validity report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExceedanceRow {
    pub theta: f64,
    pub alpha: f64,
    /// `P_theta{ pi_X(theta) <= alpha }`, exact or estimated.
    pub rate: f64,
    /// `sqrt(alpha (1 - alpha) / reps)` in Monte Carlo mode, 0 in exact mode.
    pub se: f64,
    pub violation: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub model_id: String,
    /// Model generating the data; differs from `model_id` for ensembles.
    pub sampling_model: String,
    pub mode: SimulationMode,
    pub rule: ContourRule,
    pub thetas: Vec<f64>,
    pub alphas: Vec<f64>,
    pub replications: Option<usize>,
    pub seed: Option<u64>,
    pub rows: Vec<ExceedanceRow>,
}

impl SimulationReport {
    pub fn violations(&self) -> impl Iterator<Item = &ExceedanceRow> {
        self.rows.iter().filter(|r| r.violation)
    }

    pub fn is_valid(&self) -> bool {
        self.violations().next().is_none()
    }

    pub fn row(&self, theta: f64, alpha: f64) -> Option<&ExceedanceRow> {
        self.rows
            .iter()
            .find(|r| crate::grid::same_point(r.theta, theta) && r.alpha == alpha)
    }

    /// Columns `theta,alpha,rate,se`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("theta,alpha,rate,se\n");
        for r in &self.rows {
            s.push_str(&format!("{},{},{},{}\n", r.theta, r.alpha, r.rate, r.se));
        }
        s
    }
}

fn check_alphas(alphas: &[f64]) -> Result<()> {
    if alphas.is_empty() {
        return Err(Error::config("alpha", "at least one level required"));
    }
    match alphas.iter().find(|a| !(0.0..=1.0).contains(*a)) {
        Some(a) => Err(Error::config("alpha", format!("levels must lie in [0, 1], got {a}"))),
        None => Ok(()),
    }
}

fn check_thetas(m: &Model, thetas: &[f64]) -> Result<()> {
    if thetas.is_empty() {
        return Err(Error::config("theta", "at least one parameter value required"));
    }
    thetas.iter().try_for_each(|&t| m.check_theta(t))
}

/// Per-`theta` machinery for evaluating `pi_x(theta)` at arbitrary `x`.
enum Calibrator {
    ClosedForm,
    Enumerated(PointTransform),
}

impl Calibrator {
    fn new(m: &Model, theta: f64, cfg: &ValidityConfig) -> Result<Self> {
        if m.capabilities().enumerable {
            Ok(Calibrator::Enumerated(PointTransform::new(m, theta, cfg.tail_tol, cfg.tie_tolerance)?))
        } else {
            Ok(Calibrator::ClosedForm)
        }
    }

    fn pi(&self, m: &Model, x: &Observation, theta: f64) -> Result<f64> {
        match self {
            Calibrator::Enumerated(t) => Ok(t.pi(log_eta_unchecked(m, x, theta))),
            Calibrator::ClosedForm => closed_form_point(m, x, theta),
        }
    }
}

/// Contour evaluation for one sampling model at one `theta`: either a single
/// model or the maximum over ensemble members able to interpret `x`.
struct PiAtTheta<'a> {
    members: &'a [Model],
    theta: f64,
    cfg: &'a ValidityConfig,
    cache: HashMap<String, (Model, Calibrator)>,
}

impl<'a> PiAtTheta<'a> {
    fn new(members: &'a [Model], theta: f64, cfg: &'a ValidityConfig) -> Self {
        Self {
            members,
            theta,
            cfg,
            cache: HashMap::new(),
        }
    }

    fn pi(&mut self, sampler: &Model, x: &Observation) -> Result<f64> {
        if let ContourRule::UncalibratedRelativeLikelihood { power } = self.cfg.rule {
            return Ok((power * log_eta_unchecked(sampler, x, self.theta)).exp());
        }
        let mut best: Option<f64> = None;
        for member in self.members {
            let Ok(mx) = member.reinterpret(x) else { continue };
            if !mx.contains_theta(self.theta) {
                continue;
            }
            let key = mx.id();
            if !self.cache.contains_key(&key) {
                let cal = Calibrator::new(&mx, self.theta, self.cfg)?;
                self.cache.insert(key.clone(), (mx, cal));
            }
            let (mm, cal) = &self.cache[&key];
            let v = cal.pi(mm, x, self.theta)?;
            best = Some(best.map_or(v, |b: f64| b.max(v)));
        }
        best.ok_or_else(|| Error::NotInSampleSpace {
            model: sampler.id(),
            observation: x.to_string(),
        })
    }
}

/// Exact exceedances at one `theta`, summing `P_theta(x)` over outcomes in the
/// sampler's ascending-`eta` order. For the calibrated single-model contour
/// the qualifying outcomes form a prefix of that order, so each sum is
/// bitwise no larger than the contour value that admitted it.
fn exact_rates(members: &[Model], sampler: &Model, theta: f64, alphas: &[f64], cfg: &ValidityConfig) -> Result<Vec<f64>> {
    let t = PointTransform::new(sampler, theta, cfg.tail_tol, cfg.tie_tolerance)?;
    let mut eval = PiAtTheta::new(members, theta, cfg);
    let pis = t
        .outcomes
        .iter()
        .map(|x| eval.pi(sampler, x))
        .collect::<Result<Vec<f64>>>()?;
    Ok(alphas
        .iter()
        .map(|&a| {
            let mut s = ExactSum::new();
            for (&p, &pi) in t.probs.iter().zip(&pis) {
                if pi <= a {
                    s.add(p);
                }
            }
            (s.value() + t.residual).min(1.0)
        })
        .collect())
}

/// `pi_{X_i}(theta)` for `reps` draws from the sampler; stream `stream`.
fn mc_contour_values(members: &[Model], sampler: &Model, theta: f64, stream: u64, cfg: &ValidityConfig) -> Result<Vec<f64>> {
    let chunks = rng::blocks(cfg.replications)
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|(block, _, len)| {
            let mut r = rng::substream(cfg.seed, stream, block);
            let mut eval = PiAtTheta::new(members, theta, cfg);
            (0..len)
                .map(|_| {
                    let x = sampler.draw(theta, &mut r);
                    eval.pi(sampler, &x)
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(chunks.concat())
}

fn mc_row(theta: f64, alpha: f64, values: &[f64]) -> ExceedanceRow {
    let n = values.len() as f64;
    let hits = values.iter().filter(|&&v| v <= alpha).count();
    let rate = hits as f64 / n;
    let se = (alpha * (1.0 - alpha) / n).sqrt();
    ExceedanceRow {
        theta,
        alpha,
        rate,
        se,
        violation: rate > alpha + MC_SIGMAS * se,
    }
}

fn simulate(
    members: &[Model],
    sampler: &Model,
    model_id: String,
    thetas: &[f64],
    alphas: &[f64],
    cfg: &ValidityConfig,
) -> Result<SimulationReport> {
    check_alphas(alphas)?;
    check_thetas(sampler, thetas)?;
    let mode = cfg.mode_for(sampler)?;
    let per_theta = thetas
        .par_iter()
        .enumerate()
        .map(|(j, &theta)| -> Result<Vec<ExceedanceRow>> {
            match mode {
                SimulationMode::ExactEnumeration => {
                    let rates = exact_rates(members, sampler, theta, alphas, cfg)?;
                    Ok(alphas
                        .iter()
                        .zip(rates)
                        .map(|(&alpha, rate)| ExceedanceRow {
                            theta,
                            alpha,
                            rate,
                            se: 0.0,
                            violation: rate > alpha,
                        })
                        .collect())
                }
                SimulationMode::MonteCarlo => {
                    let values = mc_contour_values(members, sampler, theta, j as u64, cfg)?;
                    Ok(alphas.iter().map(|&a| mc_row(theta, a, &values)).collect())
                }
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let mc = mode == SimulationMode::MonteCarlo;
    Ok(SimulationReport {
        model_id,
        sampling_model: sampler.id(),
        mode,
        rule: cfg.rule,
        thetas: thetas.to_vec(),
        alphas: alphas.to_vec(),
        replications: mc.then_some(cfg.replications),
        seed: mc.then_some(cfg.seed),
        rows: per_theta.concat(),
    })
}

/// Exceedance rates of `pi_X(theta)` under `P_theta` for every `(theta, alpha)`.
pub fn validity_sim(m: &Model, thetas: &[f64], alphas: &[f64], cfg: &ValidityConfig) -> Result<SimulationReport> {
    simulate(std::slice::from_ref(m), m, m.id(), thetas, alphas, cfg)
}

/// The ensemble contour's exceedance rates under each member's sampling model.
/// Members whose design cannot produce a given outcome (for instance a
/// negative binomial design for zero successes) do not contribute to the
/// maximum at that outcome.
pub fn ensemble_validity_sim(
    e: &ModelEnsemble,
    thetas: &[f64],
    alphas: &[f64],
    cfg: &ValidityConfig,
) -> Result<Vec<SimulationReport>> {
    e.members()
        .iter()
        .map(|sampler| {
            let ts: Vec<f64> = thetas.iter().copied().filter(|&t| sampler.contains_theta(t)).collect();
            simulate(e.members(), sampler, e.id(), &ts, alphas, cfg)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverageEstimate {
    pub theta: f64,
    pub alpha: f64,
    /// `P_theta{ theta in C_alpha(X) }` where `C_alpha(x) = {pi_x > alpha}`.
    pub coverage: f64,
    pub se: f64,
    pub mode: SimulationMode,
}

/// Coverage of the level-`alpha` confidence set at `theta`. Membership of
/// `theta` in `{pi_X > alpha}` is the complement of exceedance.
pub fn coverage_sim(m: &Model, theta: f64, alpha: f64, cfg: &ValidityConfig) -> Result<CoverageEstimate> {
    let report = validity_sim(m, &[theta], &[alpha], cfg)?;
    let row = report.rows[0];
    Ok(CoverageEstimate {
        theta,
        alpha,
        coverage: 1.0 - row.rate,
        se: row.se,
        mode: report.mode,
    })
}

/// One-sample Kolmogorov-Smirnov test against `Unif(0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
    pub n: usize,
}

/// Asymptotic Kolmogorov tail `P(K > lambda)`.
fn kolmogorov_tail(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut s = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        s += if k % 2 == 1 { term } else { -term };
        if term < 1e-17 {
            break;
        }
    }
    (2.0 * s).clamp(0.0, 1.0)
}

pub fn ks_uniform(samples: &[f64]) -> Result<KsResult> {
    if samples.is_empty() || samples.iter().any(|v| !v.is_finite()) {
        return Err(Error::config("samples", "need at least one finite value"));
    }
    let mut v = samples.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let d = v
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let u = x.clamp(0.0, 1.0);
            ((i + 1) as f64 / n - u).max(u - i as f64 / n)
        })
        .fold(0.0, f64::max);
    let sn = n.sqrt();
    Ok(KsResult {
        statistic: d,
        p_value: kolmogorov_tail((sn + 0.12 + 0.11 / sn) * d),
        n: v.len(),
    })
}

/// `pi_{X_i}(theta)` for seeded draws `X_i ~ P_theta`, in replication order.
pub fn contour_at_truth_samples(m: &Model, theta: f64, cfg: &ValidityConfig) -> Result<Vec<f64>> {
    m.check_theta(theta)?;
    if cfg.replications == 0 {
        return Err(Error::config("replications", "must be positive"));
    }
    mc_contour_values(std::slice::from_ref(m), m, theta, 0, cfg)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Summary {
    pub mean: f64,
    pub min: f64,
    pub q05: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub q95: f64,
    pub max: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Self {
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let q = |p: f64| {
            let h = p * (v.len() - 1) as f64;
            let (i, f) = (h.floor() as usize, h.fract());
            if i + 1 < v.len() {
                v[i] + f * (v[i + 1] - v[i])
            } else {
                v[i]
            }
        };
        Summary {
            mean: v.iter().sum::<f64>() / v.len() as f64,
            min: v[0],
            q05: q(0.05),
            q25: q(0.25),
            median: q(0.5),
            q75: q(0.75),
            q95: q(0.95),
            max: v[v.len() - 1],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FalseConfidenceConfig {
    pub theta_true: f64,
    /// Half-width of the interval around the truth removed to form `B`.
    pub epsilon: f64,
    pub replications: usize,
    pub seed: u64,
    pub alphas: Vec<f64>,
    pub window_half_width: f64,
    pub window_resolution: f64,
}

impl Default for FalseConfidenceConfig {
    fn default() -> Self {
        Self {
            theta_true: 7.0,
            epsilon: 0.1,
            replications: 10_000,
            seed: 0,
            alphas: DEFAULT_ALPHAS.to_vec(),
            window_half_width: NORMAL_WINDOW_HALF_WIDTH,
            window_resolution: NORMAL_WINDOW_RESOLUTION,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FalseConfidenceReport {
    pub theta_true: f64,
    pub epsilon: f64,
    /// `B = (-inf, theta - eps] U [theta + eps, inf)`, false by construction.
    pub hypothesis: String,
    pub replications: usize,
    pub seed: u64,
    /// Normalized likelihood mass of `B`.
    pub normalized_mass: Summary,
    /// Possibility of `B`.
    pub possibility: Summary,
    /// `pi_X(theta_true)`.
    pub contour_at_truth: Summary,
    pub exceedance: Vec<ExceedanceRow>,
    /// Replications and levels where some interval `A` containing the truth
    /// had `Pi(A) <= alpha` while `pi_X(theta_true) > alpha`, or the reverse.
    pub interval_family_mismatches: usize,
}

/// Widths of the intervals around the truth probed by the family check.
const FAMILY_WIDTHS: [f64; 6] = [0.0, 0.01, 0.1, 0.5, 1.0, 3.0];

/// `Pi_x([a, b])` for the unit normal: 1 when `x` is inside, otherwise the
/// two-sided tail at the nearest endpoint.
fn normal_interval_possibility(x: f64, iv: Interval) -> f64 {
    if iv.contains(x) {
        1.0
    } else {
        normal_two_sided_tail((x - iv.lo).abs().min((x - iv.hi).abs()))
    }
}

/// Unit-normal demonstration: additive normalized likelihood piles mass on
/// the false `B` while the calibrated contour at the truth stays uniform.
pub fn false_confidence_demo(cfg: &FalseConfidenceConfig) -> Result<FalseConfidenceReport> {
    let (t, eps) = (cfg.theta_true, cfg.epsilon);
    if !t.is_finite() {
        return Err(Error::config("theta_true", "must be finite"));
    }
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::config("epsilon", "must be positive"));
    }
    if cfg.replications < MIN_MC_REPLICATIONS {
        return Err(Error::config(
            "replications",
            format!("needs at least {MIN_MC_REPLICATIONS}, got {}", cfg.replications),
        ));
    }
    check_alphas(&cfg.alphas)?;
    let m = Model::NormalUnitVariance;
    let draws = m.sample(t, cfg.seed, cfg.replications)?;
    let family: Vec<Interval> = FAMILY_WIDTHS
        .iter()
        .flat_map(|&w| [Interval { lo: t - w, hi: t + w }, Interval { lo: t, hi: t + w }, Interval { lo: t - w, hi: t }])
        .collect();

    let per_draw = draws
        .par_iter()
        .map(|obs| -> Result<(f64, f64, f64, usize)> {
            let Observation::Scalar(x) = *obs else { unreachable!("normal draws are scalar") };
            let nl = NormalizedLikelihood::normal_window(x, cfg.window_half_width, cfg.window_resolution)?;
            let (wlo, whi) = nl.window();
            let pieces: Vec<Interval> = [(wlo, t - eps), (t + eps, whi)]
                .into_iter()
                .filter(|(lo, hi)| lo < hi)
                .map(|(lo, hi)| Interval { lo, hi })
                .collect();
            let mass = nl.mass(&HypothesisSet::union(pieces)?)?;
            // sup over B: 1 if x is in B, else the nearest boundary of B
            let poss = if (x - t).abs() >= eps {
                1.0
            } else {
                normal_two_sided_tail(eps - (x - t).abs())
            };
            let pi_truth = normal_two_sided_tail(x - t);
            let mismatches = cfg
                .alphas
                .iter()
                .filter(|&&a| {
                    let some_low = family.iter().any(|&iv| normal_interval_possibility(x, iv) <= a);
                    some_low != (pi_truth <= a)
                })
                .count();
            Ok((mass, poss, pi_truth, mismatches))
        })
        .collect::<Result<Vec<_>>>()?;

    let masses: Vec<f64> = per_draw.iter().map(|r| r.0).collect();
    let poss: Vec<f64> = per_draw.iter().map(|r| r.1).collect();
    let pis: Vec<f64> = per_draw.iter().map(|r| r.2).collect();
    Ok(FalseConfidenceReport {
        theta_true: t,
        epsilon: eps,
        hypothesis: format!("(-inf,{}]U[{},inf)", t - eps, t + eps),
        replications: cfg.replications,
        seed: cfg.seed,
        normalized_mass: Summary::of(&masses),
        possibility: Summary::of(&poss),
        contour_at_truth: Summary::of(&pis),
        exceedance: cfg.alphas.iter().map(|&a| mc_row(t, a, &pis)).collect(),
        interval_family_mismatches: per_draw.iter().map(|r| r.3).sum(),
    })
}

/// `1 - (2 Phi(eps) - 1)` scaled to the draw: normalized mass of `B` at `x`
/// without a window.
pub fn normal_mass_outside(x: f64, theta: f64, eps: f64) -> f64 {
    1.0 - (normal_cdf(theta + eps - x) - normal_cdf(theta - eps - x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::multimodel::{bernoulli_probes, verify_ensemble};

    fn exact() -> ValidityConfig {
        ValidityConfig {
            mode: Some(SimulationMode::ExactEnumeration),
            ..Default::default()
        }
    }

    fn mc(reps: usize, seed: u64) -> ValidityConfig {
        ValidityConfig {
            mode: Some(SimulationMode::MonteCarlo),
            replications: reps,
            seed,
            ..Default::default()
        }
    }

    fn thetas_05() -> Vec<f64> {
        (1..=19).map(|i| i as f64 * 0.05).collect()
    }

    #[test]
    fn uniform_exceedance_matches_floor_oracle() {
        let m = Model::DiscreteUniform { sample_size: 1 };
        let r = validity_sim(&m, &[10.0], &[0.25], &exact()).unwrap();
        // P{X <= 10 * 0.25} = floor(2.5) / 10
        assert_eq!(r.rows[0].rate, 0.2);
        assert!(r.is_valid());
        assert_eq!(r.replications, None);
        for n in [1usize, 3] {
            let m = Model::DiscreteUniform { sample_size: n };
            let ts: Vec<f64> = (5..=30).map(f64::from).collect();
            let r = validity_sim(&m, &ts, &DEFAULT_ALPHAS, &exact()).unwrap();
            for row in &r.rows {
                // P{(M/theta)^n <= alpha} = floor(theta alpha^(1/n))^n / theta^n
                let k = (row.theta * row.alpha.powf(1.0 / n as f64) + 1e-12).floor();
                let oracle = (k / row.theta).powi(n as i32);
                assert!((row.rate - oracle).abs() < 1e-12, "{row:?} vs {oracle}");
                assert!(row.rate <= row.alpha);
            }
        }
    }

    #[test]
    fn binomial_exact_is_valid() {
        for n in [10u64, 16] {
            let r = validity_sim(&Model::Binomial { trials: n }, &thetas_05(), &DEFAULT_ALPHAS, &exact()).unwrap();
            assert!(r.is_valid(), "{:?}", r.violations().collect::<Vec<_>>());
            assert_eq!(r.rows.len(), 19 * 5);
            assert!(r.rows.iter().all(|row| row.se == 0.0));
        }
        let r = validity_sim(&Model::Example21, &thetas_05(), &DEFAULT_ALPHAS, &exact()).unwrap();
        assert!(r.is_valid());
    }

    #[test]
    fn exact_rate_matches_brute_force() {
        // direct sum over y of P(y) 1[pi_y(theta) <= alpha]
        let m = Model::Binomial { trials: 10 };
        let theta = 0.35;
        let g = crate::grid::ParameterGrid::from_points(vec![theta], crate::grid::GridKind::Continuum { resolution: 0.01 }).unwrap();
        let r = validity_sim(&m, &[theta], &[0.1, 0.3], &exact()).unwrap();
        for row in &r.rows {
            let mut s = 0.0;
            for y in 0..=10 {
                let x = Observation::Trials { n: 10, y };
                let pi = crate::contour::contour_exact(&m, &x, &g, 0.0).unwrap().value_at(theta).unwrap();
                if pi <= row.alpha {
                    s += m.log_density(&x, theta).unwrap().exp();
                }
            }
            assert!((row.rate - s).abs() < 1e-14);
        }
    }

    #[test]
    fn uncalibrated_fixture_is_flagged() {
        let cfg = ValidityConfig {
            rule: ContourRule::UncalibratedRelativeLikelihood { power: 2.0 },
            ..exact()
        };
        let r = validity_sim(&Model::Binomial { trials: 10 }, &[0.5], &[0.05], &cfg).unwrap();
        // eta^2 <= 0.05 at y in {0,1,2,8,9,10}: 2 (1 + 10 + 45) / 1024
        assert!((r.rows[0].rate - 112.0 / 1024.0).abs() < 1e-14);
        assert!(!r.is_valid());
    }

    #[test]
    fn normal_mc_within_four_se() {
        let r = validity_sim(&Model::NormalUnitVariance, &[0.0, 3.0], &DEFAULT_ALPHAS, &mc(10_000, 11)).unwrap();
        assert!(r.is_valid());
        for row in &r.rows {
            assert!((row.rate - row.alpha).abs() <= 4.0 * row.se, "{row:?}");
        }
        assert!(validity_sim(&Model::NormalUnitVariance, &[0.0], &[0.05], &exact()).is_err());
        assert!(validity_sim(&Model::NormalUnitVariance, &[0.0], &[0.05], &mc(500, 1)).is_err());
        assert!(validity_sim(&Model::NormalUnitVariance, &[0.0], &[1.5], &mc(1000, 1)).is_err());
    }

    #[test]
    fn mc_agrees_with_exact() {
        let m = Model::Binomial { trials: 16 };
        let ex = validity_sim(&m, &[0.3, 0.7], &DEFAULT_ALPHAS, &exact()).unwrap();
        let est = validity_sim(&m, &[0.3, 0.7], &DEFAULT_ALPHAS, &mc(20_000, 5)).unwrap();
        for (a, b) in ex.rows.iter().zip(&est.rows) {
            let se = (a.rate * (1.0 - a.rate) / 20_000.0).sqrt();
            assert!((a.rate - b.rate).abs() <= 4.0 * se.max(1e-12), "{a:?} {b:?}");
        }
    }

    #[test]
    fn coverage_is_complement() {
        let m = Model::DiscreteUniform { sample_size: 3 };
        let c = coverage_sim(&m, 10.0, 0.05, &exact()).unwrap();
        assert!(c.coverage >= 0.95);
        let r = validity_sim(&m, &[10.0], &[0.05], &exact()).unwrap();
        assert_eq!(c.coverage, 1.0 - r.rows[0].rate);
        let b = coverage_sim(&Model::Binomial { trials: 16 }, 11.0 / 16.0, 0.1, &exact()).unwrap();
        assert!(b.coverage >= 0.9);
    }

    #[test]
    fn ensemble_valid_under_each_member() {
        let members = vec![Model::Binomial { trials: 10 }, Model::NegativeBinomial { successes: 3 }];
        let e = verify_ensemble(members, &bernoulli_probes(&[(10, 3)], &thetas_05())).unwrap();
        let reports = ensemble_validity_sim(&e, &thetas_05(), &DEFAULT_ALPHAS, &exact()).unwrap();
        assert_eq!(reports.len(), 2);
        for r in &reports {
            assert!(r.is_valid(), "{}: {:?}", r.sampling_model, r.violations().collect::<Vec<_>>());
        }
        // the ensemble contour dominates the member's own, so rates can only drop
        let single = validity_sim(&Model::Binomial { trials: 10 }, &thetas_05(), &DEFAULT_ALPHAS, &exact()).unwrap();
        for (a, b) in reports[0].rows.iter().zip(&single.rows) {
            assert!(a.rate <= b.rate);
        }
        let one = verify_ensemble(vec![Model::Binomial { trials: 10 }], &[]).unwrap();
        let r = ensemble_validity_sim(&one, &thetas_05(), &DEFAULT_ALPHAS, &exact()).unwrap();
        assert_eq!(r[0].rows, single.rows);
    }

    #[test]
    fn ks_detects_non_uniform() {
        let u: Vec<f64> = (0..1000).map(|i| (i as f64 + 0.5) / 1000.0).collect();
        assert!(ks_uniform(&u).unwrap().p_value > 0.99);
        let skew: Vec<f64> = u.iter().map(|v| v * v).collect();
        assert!(ks_uniform(&skew).unwrap().p_value < 1e-6);
        // P(K > 1.36) is about 0.049
        assert!((kolmogorov_tail(1.3581) - 0.05).abs() < 1e-3);
    }

    #[test]
    fn normal_contour_at_truth_is_uniform() {
        let v = contour_at_truth_samples(&Model::NormalUnitVariance, 0.0, &mc(10_000, 3)).unwrap();
        assert!(ks_uniform(&v).unwrap().p_value > 0.01);
    }

    #[test]
    fn false_confidence_contrast() {
        assert!((normal_mass_outside(7.0, 7.0, 0.1) - 0.9203).abs() < 1e-4);
        let cfg = FalseConfidenceConfig {
            replications: 2000,
            seed: 9,
            ..Default::default()
        };
        let r = false_confidence_demo(&cfg).unwrap();
        assert!(r.normalized_mass.mean >= 0.9);
        assert_eq!(r.interval_family_mismatches, 0);
        for row in &r.exceedance {
            assert!((row.rate - row.alpha).abs() <= 4.0 * row.se);
        }
        let bad = FalseConfidenceConfig {
            epsilon: 0.0,
            ..Default::default()
        };
        assert!(false_confidence_demo(&bad).is_err());
    }

    #[test]
    fn window_mass_matches_cdf() {
        let cfg = FalseConfidenceConfig {
            replications: 1000,
            ..Default::default()
        };
        let draws = Model::NormalUnitVariance.sample(7.0, cfg.seed, 5).unwrap();
        for obs in draws {
            let Observation::Scalar(x) = obs else { unreachable!() };
            let nl = NormalizedLikelihood::normal_window(x, 15.0, 0.01).unwrap();
            let (lo, hi) = nl.window();
            let b = HypothesisSet::union(vec![Interval { lo, hi: 6.9 }, Interval { lo: 7.1, hi }]).unwrap();
            assert!((nl.mass(&b).unwrap() - normal_mass_outside(x, 7.0, 0.1)).abs() < 1e-4);
        }
    }

    #[test]
    fn report_csv() {
        let r = validity_sim(&Model::Binomial { trials: 10 }, &[0.5], &[0.05], &exact()).unwrap();
        let csv = r.to_csv();
        assert!(csv.starts_with("theta,alpha,rate,se\n0.5,0.05,"));
        let json = serde_json::to_string(&r).unwrap();
        let back: SimulationReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, r);
    }
}
