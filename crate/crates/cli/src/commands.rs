use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use possim_core::contour::{contour_closed_form, default_grid, ticket_grid, Contour, ContourMethod, McConfig};
use possim_core::grid::ParameterGrid;
use possim_core::hypothesis::{HypothesisSet, Interval};
use possim_core::inference::{complement_possibility, confidence_set, possibility, test, verdict};
use possim_core::likelihood::{NormalizedLikelihood, RelativeLikelihood, NORMAL_WINDOW_HALF_WIDTH, NORMAL_WINDOW_RESOLUTION};
use possim_core::model::{Model, Observation, TicketSpec, DEFAULT_TAIL_TOL};
use possim_core::multimodel::{contour_ensemble_detailed, e_contour, verify_ensemble, ModelEnsemble, PriorSpec};
use possim_core::validity::{
    ensemble_validity_sim, false_confidence_demo, validity_sim, ContourRule, FalseConfidenceConfig, SimulationMode,
    SimulationReport, ValidityConfig, DEFAULT_ALPHAS,
};
use serde_json::json;

use crate::config::{build_model, parse_grid, parse_levels, Format, Method, Mode, RunConfig};
use crate::output::{csv_document, emit, json_document, num, Provenance, Table};
use crate::SpecError;

/// Whether the command found a validity violation.
pub struct Outcome {
    pub violation: bool,
}

const OK: Outcome = Outcome { violation: false };

struct Setup {
    models: Vec<Model>,
    x: Option<Observation>,
    ensemble: Option<ModelEnsemble>,
}

fn setup(cfg: &RunConfig, need_data: bool) -> Result<Setup> {
    let specs = cfg.model_specs()?;
    let x = cfg.observation(&specs[0].model)?;
    if need_data && x.is_none() {
        bail!(SpecError("--data is required".into()));
    }
    let models = specs
        .into_iter()
        .map(|s| build_model(s, x.as_ref()))
        .collect::<Result<Vec<_>>>()?;
    if let Some(x) = &x {
        for m in &models {
            m.reinterpret(x).context("--data")?;
        }
    }
    let ensemble = if cfg.is_ensemble() {
        Some(verified_ensemble(models.clone(), x.as_ref())?)
    } else {
        None
    };
    Ok(Setup { models, x, ensemble })
}

/// Check members agree on `eta` at the datum and at a handful of outcomes
/// every member can produce, over a spread of parameter values.
fn verified_ensemble(models: Vec<Model>, x: Option<&Observation>) -> Result<ModelEnsemble> {
    let interpretable = |o: &Observation| models.iter().all(|m| m.reinterpret(o).is_ok());
    let mut xs: Vec<Observation> = x.into_iter().cloned().collect();
    for m in &models {
        let grid = probe_thetas(m);
        let mid = grid[grid.len() / 2];
        if let Ok(e) = m.enumerate_outcomes(mid, DEFAULT_TAIL_TOL) {
            xs.extend(e.outcomes.into_iter().take(25).map(|(o, _)| o));
        }
    }
    xs.retain(|o| interpretable(o));
    xs.dedup();
    let thetas: Vec<f64> = probe_thetas(&models[0])
        .into_iter()
        .filter(|&t| models.iter().all(|m| m.contains_theta(t)))
        .collect();
    if xs.is_empty() || thetas.is_empty() {
        bail!(SpecError(
            "--ensemble: members share no sample point or parameter value to verify against".into()
        ));
    }
    let probes: Vec<(Observation, f64)> = xs
        .iter()
        .flat_map(|o| thetas.iter().map(move |&t| (o.clone(), t)))
        .collect();
    Ok(verify_ensemble(models, &probes)?)
}

/// Default parameter values for validity sweeps (and ensemble probes).
fn probe_thetas(m: &Model) -> Vec<f64> {
    match m {
        Model::Binomial { .. } | Model::NegativeBinomial { .. } | Model::Example21 => {
            (1..=19).map(|i| i as f64 * 0.05).map(|t| (t * 100.0).round() / 100.0).collect()
        }
        Model::DiscreteUniform { .. } => (5..=30).map(f64::from).collect(),
        Model::NormalUnitVariance => vec![-1.0, 0.0, 1.0],
        Model::Ticket(_) => vec![0.5, 1.0, 2.0],
    }
}

fn method_of(m: Option<Method>) -> Option<ContourMethod> {
    m.map(|m| match m {
        Method::Exact => ContourMethod::Exact,
        Method::Closed => ContourMethod::ClosedForm,
        Method::Mc => ContourMethod::MonteCarlo,
    })
}

fn mc_config(cfg: &RunConfig) -> Result<McConfig> {
    McConfig::new(cfg.reps.unwrap_or(McConfig::DEFAULT_REPLICATIONS), cfg.seed()).context("--reps")
}

struct Computed {
    contour: Contour,
    members: Vec<Contour>,
}

fn compute_contour(cfg: &RunConfig, s: &Setup) -> Result<Computed> {
    let x = s.x.as_ref().expect("data checked");
    let m0 = s.models[0].reinterpret(x)?;
    let grid = match &cfg.grid {
        Some(g) => parse_grid(g, &m0)?,
        None => default_grid(&m0, x)?,
    };
    let method = method_of(cfg.method);
    let mc = mc_config(cfg)?;
    match &s.ensemble {
        Some(e) => {
            let grid = e.common_grid(&grid).context("--grid")?;
            let d = contour_ensemble_detailed(e, x, &grid, method, &mc)?;
            Ok(Computed {
                contour: d.combined,
                members: d.members,
            })
        }
        None => Ok(Computed {
            contour: possim_core::contour::contour(&m0, x, &grid, method, &mc)?,
            members: vec![],
        }),
    }
}

fn contour_table(c: &Contour) -> Table {
    let mut t = Table::new(vec!["theta", "pi", "se", "method"]);
    t.comments.push(format!("model: {}", c.model_id));
    t.comments.push(format!("data: {}", c.observation));
    for (i, (&theta, &pi)) in c.grid.points().iter().zip(&c.values).enumerate() {
        t.rows.push(vec![num(theta), num(pi), num(c.std_err(i)), c.method.as_str().to_string()]);
    }
    t
}

pub fn contour(cfg: &RunConfig, out: Option<&Path>) -> Result<Outcome> {
    let s = setup(cfg, true)?;
    let c = compute_contour(cfg, &s)?;
    let prov = Provenance::new("contour", cfg);
    let text = match cfg.format() {
        Format::Csv => csv_document(&prov, &[contour_table(&c.contour)]),
        Format::Json => json_document(
            &prov,
            cfg,
            json!({ "contour": c.contour, "members": c.members }),
        )?,
    };
    emit(out, &text)?;
    Ok(OK)
}

fn intervals_text(runs: &[Interval]) -> String {
    let parts: Vec<String> = runs.iter().map(|i| format!("[{},{}]", i.lo, i.hi)).collect();
    if parts.is_empty() {
        "{}".into()
    } else {
        parts.join("U")
    }
}

/// Normalized likelihood of `a`, with intervals clipped to the integration window.
fn normalized_mass(m: &Model, x: &Observation, grid: &ParameterGrid, a: &HypothesisSet, window: f64) -> Result<f64> {
    let nl = match (m, x) {
        (Model::NormalUnitVariance, Observation::Scalar(v)) => {
            NormalizedLikelihood::normal_window(*v, window, NORMAL_WINDOW_RESOLUTION)?
        }
        _ => NormalizedLikelihood::over_grid(m, x, grid)?,
    };
    let (lo, hi) = nl.window();
    let clipped = match a {
        HypothesisSet::Points(_) => a.clone(),
        _ => HypothesisSet::union(
            a.intervals()
                .into_iter()
                .filter(|i| i.hi >= lo && i.lo <= hi)
                .map(|i| Interval {
                    lo: i.lo.max(lo),
                    hi: i.hi.min(hi),
                })
                .collect(),
        )?,
    };
    Ok(nl.mass(&clipped)?)
}

pub fn infer(cfg: &RunConfig, out: Option<&Path>) -> Result<Outcome> {
    let hyp_text = cfg
        .hypothesis
        .as_deref()
        .ok_or_else(|| SpecError("--hypothesis is required".into()))?;
    let a: HypothesisSet = hyp_text.parse().context("--hypothesis")?;
    let alpha = cfg.alpha();
    let s = setup(cfg, true)?;
    let c = compute_contour(cfg, &s)?.contour;
    let p = possibility(&c, &a);
    if p.empty_intersection {
        eprintln!("warning: hypothesis {a} contains no grid point; its possibility is 0");
    }
    let comp = complement_possibility(&c, &a);
    let v = verdict(&c, &a, alpha).context("--alpha")?;
    let d = test(&c, &a, alpha)?;
    let cs = confidence_set(&c, alpha)?;
    let mass = if s.ensemble.is_none() {
        let x = s.x.as_ref().expect("data checked");
        let window = cfg.window.unwrap_or(NORMAL_WINDOW_HALF_WIDTH);
        match normalized_mass(&s.models[0].reinterpret(x)?, x, &c.grid, &a, window) {
            Ok(v) => Some(v),
            Err(e) => {
                eprintln!("note: normalized likelihood unavailable: {e:#}");
                None
            }
        }
    } else {
        None
    };
    let prov = Provenance::new("infer", cfg);
    let text = match cfg.format() {
        Format::Csv => {
            let mut t = Table::new(vec!["quantity", "value"]);
            t.comments.push(format!("model: {}", c.model_id));
            t.comments.push(format!("data: {}", c.observation));
            t.comments.push(format!("hypothesis: {a}"));
            let mut row = |k: &str, v: String| t.rows.push(vec![k.to_string(), v]);
            row("possibility", num(p.value));
            row("empty_intersection", p.empty_intersection.to_string());
            row("complement_possibility", num(comp));
            row("alpha", num(alpha));
            row("verdict", v.as_str().into());
            row("decision", d.as_str().into());
            row("confidence_set", intervals_text(&cs.interval_hull));
            row("normalized_mass", mass.map_or("NA".into(), num));
            row("method", c.method.as_str().into());
            csv_document(&prov, &[t])
        }
        Format::Json => json_document(
            &prov,
            cfg,
            json!({
                "model": c.model_id,
                "data": c.observation,
                "hypothesis": a.to_string(),
                "possibility": p,
                "complement_possibility": comp,
                "alpha": alpha,
                "verdict": v,
                "decision": d,
                "confidence_set": cs,
                "normalized_mass": mass,
                "method": c.method,
            }),
        )?,
    };
    emit(out, &text)?;
    Ok(OK)
}

fn parse_thetas(s: &str, m: &Model) -> Result<Vec<f64>> {
    if s.contains(':') {
        return Ok(parse_grid(s, m).context("--thetas")?.points().to_vec());
    }
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| SpecError(format!("--thetas: `{}` is not a number", t.trim())).into())
        })
        .collect()
}

pub fn validate(cfg: &RunConfig, out: Option<&Path>) -> Result<Outcome> {
    let s = setup(cfg, false)?;
    let m0 = &s.models[0];
    let thetas = match &cfg.thetas {
        Some(t) => parse_thetas(t, m0)?,
        None => probe_thetas(m0),
    };
    let alphas = match &cfg.alphas {
        Some(a) => parse_levels(a)?,
        None => DEFAULT_ALPHAS.to_vec(),
    };
    let vc = ValidityConfig {
        mode: cfg.mode.map(|m| match m {
            Mode::Exact => SimulationMode::ExactEnumeration,
            Mode::Mc => SimulationMode::MonteCarlo,
        }),
        replications: cfg.reps.unwrap_or(10_000),
        seed: cfg.seed(),
        tail_tol: cfg.tail_tol.unwrap_or(DEFAULT_TAIL_TOL),
        tie_tolerance: ValidityConfig::default().tie_tolerance,
        rule: match cfg.uncalibrated_power {
            Some(power) => ContourRule::UncalibratedRelativeLikelihood { power },
            None => ContourRule::Calibrated,
        },
    };
    let reports: Vec<SimulationReport> = match &s.ensemble {
        Some(e) => ensemble_validity_sim(e, &thetas, &alphas, &vc)?,
        None => vec![validity_sim(m0, &thetas, &alphas, &vc)?],
    };
    let violation = reports.iter().any(|r| !r.is_valid());
    for r in &reports {
        for v in r.violations() {
            eprintln!(
                "violation: {} under {} at theta={}, alpha={}: rate {} (se {})",
                r.model_id, r.sampling_model, v.theta, v.alpha, v.rate, v.se
            );
        }
    }
    let coverage = cfg.coverage.unwrap_or(false);
    let prov = Provenance::new("validate", cfg);
    let text = match cfg.format() {
        Format::Csv => {
            let tables: Vec<Table> = reports
                .iter()
                .map(|r| {
                    let cols = if coverage {
                        vec!["theta", "alpha", "coverage", "se"]
                    } else {
                        vec!["theta", "alpha", "rate", "se"]
                    };
                    let mut t = Table::new(cols);
                    t.comments.push(format!("model: {}", r.model_id));
                    t.comments.push(format!("sampling-model: {}", r.sampling_model));
                    t.comments.push(format!("mode: {}", r.mode.as_str()));
                    if let Some(n) = r.replications {
                        t.comments.push(format!("replications: {n}"));
                    }
                    for row in &r.rows {
                        let v = if coverage { 1.0 - row.rate } else { row.rate };
                        t.rows.push(vec![num(row.theta), num(row.alpha), num(v), num(row.se)]);
                    }
                    t
                })
                .collect();
            csv_document(&prov, &tables)
        }
        Format::Json => json_document(&prov, cfg, json!({ "reports": reports, "valid": !violation }))?,
    };
    emit(out, &text)?;
    Ok(Outcome { violation })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Demo {
    Fig1a,
    Fig1b,
    Fig2a,
    Fig2b,
    FalseConfidence,
}

impl Demo {
    pub fn name(self) -> &'static str {
        match self {
            Demo::Fig1a => "fig1a",
            Demo::Fig1b => "fig1b",
            Demo::Fig2a => "fig2a",
            Demo::Fig2b => "fig2b",
            Demo::FalseConfidence => "false-confidence",
        }
    }
}

struct Series {
    name: &'static str,
    values: Vec<f64>,
}

fn series_doc(
    prov: &Provenance,
    cfg: &RunConfig,
    comments: Vec<String>,
    thetas: &[f64],
    series: &[Series],
) -> Result<String> {
    match cfg.format() {
        Format::Csv => {
            let mut cols = vec!["theta"];
            cols.extend(series.iter().map(|s| s.name));
            let mut t = Table::new(cols);
            t.comments = comments;
            for (i, &theta) in thetas.iter().enumerate() {
                let mut row = vec![num(theta)];
                row.extend(series.iter().map(|s| num(s.values[i])));
                t.rows.push(row);
            }
            Ok(csv_document(prov, &[t]))
        }
        Format::Json => {
            let mut obj = serde_json::Map::new();
            obj.insert("description".into(), json!(comments));
            obj.insert("theta".into(), json!(thetas));
            for s in series {
                obj.insert(s.name.into(), json!(s.values));
            }
            json_document(prov, cfg, obj)
        }
    }
}

fn fig1a(prov: &Provenance, cfg: &RunConfig) -> Result<String> {
    let grid = ParameterGrid::integers(1, 20)?;
    let s = 5;
    let series = [1usize, 3]
        .into_iter()
        .map(|n| {
            let c = contour_closed_form(&Model::DiscreteUniform { sample_size: n }, &Observation::Sample(vec![s; n]), &grid)?;
            Ok(Series {
                name: if n == 1 { "pi_n1" } else { "pi_n3" },
                values: c.values,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    series_doc(
        prov,
        cfg,
        vec!["discrete uniform contour, sample maximum s = 5, sample sizes n = 1 and n = 3".into()],
        grid.points(),
        &series,
    )
}

fn fig1b(prov: &Provenance, cfg: &RunConfig) -> Result<String> {
    let spec = TicketSpec::default();
    let grid = ticket_grid(&spec, 1.0)?;
    let c = contour_closed_form(&Model::Ticket(std::sync::Arc::new(spec)), &Observation::Scalar(1.0), &grid)?;
    series_doc(
        prov,
        cfg,
        vec!["ticket contour at x = 1".into()],
        grid.points(),
        &[Series {
            name: "pi",
            values: c.values,
        }],
    )
}

fn fig2(prov: &Provenance, cfg: &RunConfig, n: u64, y: u64) -> Result<String> {
    let x = Observation::Trials { n, y };
    let models = vec![Model::Binomial { trials: n }, Model::NegativeBinomial { successes: y }];
    let e = verified_ensemble(models, Some(&x))?;
    let grid = e.common_grid(&ParameterGrid::continuum(0.0, 1.0, 0.001)?)?;
    let d = contour_ensemble_detailed(&e, &x, &grid, None, &mc_config(cfg)?)?;
    let rl = RelativeLikelihood::new(&e.members()[0], &x)?;
    let eta = grid
        .points()
        .iter()
        .map(|&t| rl.value(t))
        .collect::<possim_core::Result<Vec<_>>>()?;
    let ec = e_contour(&e.members()[0], &x, &grid, &PriorSpec::Uniform)?;
    let [b, nb]: [Contour; 2] = d.members.try_into().map_err(|_| anyhow::anyhow!("two member contours expected"))?;
    series_doc(
        prov,
        cfg,
        vec![format!(
            "Bernoulli data x = ({n},{y}): binomial (red), negative binomial (blue), pointwise max (black), relative likelihood (green), truncated e-value with uniform prior (orange)"
        )],
        grid.points(),
        &[
            Series {
                name: "binomial",
                values: b.values,
            },
            Series {
                name: "negative_binomial",
                values: nb.values,
            },
            Series {
                name: "combined",
                values: d.combined.values,
            },
            Series {
                name: "relative_likelihood",
                values: eta,
            },
            Series {
                name: "e_value_truncated",
                values: ec.values,
            },
        ],
    )
}

fn false_confidence(prov: &Provenance, cfg: &RunConfig) -> Result<String> {
    let fc = FalseConfidenceConfig {
        replications: cfg.reps.unwrap_or(10_000),
        seed: cfg.seed(),
        alphas: match &cfg.alphas {
            Some(a) => parse_levels(a)?,
            None => DEFAULT_ALPHAS.to_vec(),
        },
        window_half_width: cfg.window.unwrap_or(NORMAL_WINDOW_HALF_WIDTH),
        ..Default::default()
    };
    let r = false_confidence_demo(&fc)?;
    match cfg.format() {
        Format::Json => json_document(prov, cfg, &r),
        Format::Csv => {
            let mut summary = Table::new(vec!["statistic", "normalized_mass", "possibility", "contour_at_truth"]);
            summary.comments.push(format!(
                "unit normal, theta_true = {}, false hypothesis B = {}, replications = {}",
                r.theta_true, r.hypothesis, r.replications
            ));
            summary
                .comments
                .push(format!("interval-family mismatches: {}", r.interval_family_mismatches));
            let rows = [
                ("mean", r.normalized_mass.mean, r.possibility.mean, r.contour_at_truth.mean),
                ("min", r.normalized_mass.min, r.possibility.min, r.contour_at_truth.min),
                ("q05", r.normalized_mass.q05, r.possibility.q05, r.contour_at_truth.q05),
                ("q25", r.normalized_mass.q25, r.possibility.q25, r.contour_at_truth.q25),
                ("median", r.normalized_mass.median, r.possibility.median, r.contour_at_truth.median),
                ("q75", r.normalized_mass.q75, r.possibility.q75, r.contour_at_truth.q75),
                ("q95", r.normalized_mass.q95, r.possibility.q95, r.contour_at_truth.q95),
                ("max", r.normalized_mass.max, r.possibility.max, r.contour_at_truth.max),
            ];
            for (k, a, b, c) in rows {
                summary.rows.push(vec![k.to_string(), num(a), num(b), num(c)]);
            }
            let mut exc = Table::new(vec!["theta", "alpha", "rate", "se"]);
            exc.comments.push("exceedance of the contour at the true value".into());
            for row in &r.exceedance {
                exc.rows.push(vec![num(row.theta), num(row.alpha), num(row.rate), num(row.se)]);
            }
            Ok(csv_document(prov, &[summary, exc]))
        }
    }
}

/// Output file for a demo: `out` itself, or `<out>/<name>.<ext>` when `out` is a directory.
fn demo_target(out: Option<&Path>, demo: Demo, format: Format) -> Option<PathBuf> {
    let ext = match format {
        Format::Csv => "csv",
        Format::Json => "json",
    };
    out.map(|p| {
        if p.is_dir() {
            p.join(format!("{}.{ext}", demo.name()))
        } else {
            p.to_path_buf()
        }
    })
}

pub fn demo(demo: Demo, cfg: &RunConfig, out: Option<&Path>) -> Result<Outcome> {
    let prov = Provenance::new("demo", cfg);
    let text = match demo {
        Demo::Fig1a => fig1a(&prov, cfg)?,
        Demo::Fig1b => fig1b(&prov, cfg)?,
        Demo::Fig2a => fig2(&prov, cfg, 10, 3)?,
        Demo::Fig2b => fig2(&prov, cfg, 16, 11)?,
        Demo::FalseConfidence => false_confidence(&prov, cfg)?,
    };
    emit(demo_target(out, demo, cfg.format()).as_deref(), &text)?;
    Ok(OK)
}
