//! Surrogate-gradient training of the spiking network.

pub mod backward;
pub mod config;
pub mod grid;
pub mod loss;
pub mod optim;
pub mod trainer;

pub use backward::{backward, GradientSet};
pub use config::{apply_overrides, parse_table, reject_unknown, TrainConfig, ENV_PREFIX};
pub use grid::{grid_search, random_search, GridResult, GridRow, GridSpace, SearchSpace, Trial};
pub use loss::{
    cross_entropy_grad, loss_breakdown, loss_cross_entropy, loss_reg_lower, loss_reg_upper, reg_grad_hidden,
    surrogate_grad, LossBreakdown, RegParams,
};
pub use optim::{optimizer_step, Adamax, AdamaxParams, Moments};
pub use trainer::{
    evaluate, init_network, rng_from_seed, stratified_split, train, train_on, write_metrics_csv, EpochMetrics,
    TrainOutcome,
};
