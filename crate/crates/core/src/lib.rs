//! Simulation toolkit for stochastic evolution equations with nonlinear
//! multiplicative noise: blow-up prevention, finite-time extinction and the
//! coercivity conditions behind them.

pub mod conditions;
pub mod config;
pub mod ensemble;
pub mod error;
pub mod experiment;
pub mod figures;
pub mod grid;
pub mod integrate;
pub mod linalg;
pub mod models;
pub mod noise;
pub mod stats;

pub use conditions::{
    check_a5, check_a5_star, check_generalized_coercivity, classify_regime, default_norm_grid, ConditionId,
    ConditionReport, RegimeClass,
};
pub use ensemble::{
    blowup_probability, continuity_probe, extinction_ecdf, run_ensemble, run_paths, supermartingale_diagnostic,
    tail_bound_check, ContinuityReport, EnsembleStats, SupermartingaleReport, TailBoundReport,
};
pub use error::{Error, Result};
pub use grid::{GridSpec, State};
pub use integrate::{
    run_path, step_em, step_semi_implicit, step_tamed, step_tamed_relative, wiener_increments, PathStatus,
    RngStream, SchemeKind, SimConfig, Taming, TrajectoryRecord,
};
pub use models::{
    drift, embedding_constant, h_norm, make_model, v_norm, CoercivityProfile, Model, ModelKind,
};
pub use noise::{adjoint_action_norm_sq, diffusion_apply, hs_norm_sq, NoiseForm, NoiseSpec, WienerIncrement};
pub use config::{parse_config, ExperimentPlan};
pub use experiment::{run_conditions, run_experiment, ExperimentResult};
pub use figures::run_figure;
