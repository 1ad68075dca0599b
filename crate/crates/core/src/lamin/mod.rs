//! Q-models and the LAMIN1/LAMIN2 Lagrangian-minimization learners.

mod boltzmann;
mod estimator;
mod gradcheck;
mod landscape;
mod mlp;
mod model;
mod train;

pub use boltzmann::{
    boltzmann_policy, boltzmann_value, boltzmann_value_coeffs, boltzmann_value_gradient, frozen_boltzmann_gradient,
    td_error,
};
pub use estimator::{
    behavior_cloning_update, lagrangian_update, lamin1_update, lamin2_update, DemoBatch, EstimatorConfig, Successor,
    Update,
};
pub use gradcheck::{finite_difference, gradient_check, relative_error, GradCheckReport, FD_STEP};
pub use landscape::{
    golden_section_min, smoothed_lagrangian_1state, smoothed_lagrangian_exact, smoothed_lagrangian_gradient_exact,
};
pub use mlp::MlpQModel;
pub use model::{one_hot, one_hot_table, randomize_params, FeatureFn, LinearQModel, QModel, TabularQModel};
pub use train::{
    model_greedy_policy, model_q_table, step_rng, train, Algorithm, DemoSource, ElpDemoSource, EvalOutcome, LrSchedule,
    Optimizer, RunEntry, RunRecord, TrainConfig,
};
