//! Possibilistic inference from relative likelihoods: contours, possibility
//! measures, ensembles of models, and validity simulation.

pub mod contour;
pub mod error;
pub mod grid;
pub mod hypothesis;
pub mod inference;
pub mod likelihood;
pub mod model;
pub mod multimodel;
pub mod rng;
pub mod special;
pub mod validity;

pub use contour::{contour, default_grid, Contour, ContourMethod, McConfig};
pub use error::{Error, Result};
pub use grid::{GridKind, ParameterGrid};
pub use hypothesis::{HypothesisSet, Interval};
pub use inference::{confidence_set, possibility, test, verdict, ConfidenceSet, Possibility, TestDecision, Verdict};
pub use likelihood::{relative_likelihood, NormalizedLikelihood, RelativeLikelihood};
pub use model::{make_model, Model, ModelConfig, Observation, TicketSpec};
pub use multimodel::{contour_ensemble, e_contour, e_value, verify_ensemble, ModelEnsemble, PriorSpec};
pub use validity::{
    coverage_sim, ensemble_validity_sim, false_confidence_demo, validity_sim, SimulationMode, SimulationReport,
    ValidityConfig,
};
