//! Empirical metareasoning: training data from refinement profiles, polynomial
//! surfaces predicting the optimal value, cost models, and the stopping
//! controller built on the latent value of refinement.

mod control;
mod cost;
mod fit;

pub use control::{
    comprehensive_profile, latent_value, run_controller, ComprehensiveProfile, ControlOptions, ControlStop, ControllerTrace,
    LatentValue, TraceRow, TRACE_HEADER,
};
pub use cost::{step_cost, CostModel};
pub use fit::{
    basis, extract_training_point, extrapolation_report, fit_polynomial, monomial_count, predict_ev_star, ExtrapolationReport,
    MetaModel, TrainingPoint,
};
