//! Estimation of a distribution function from interval-censored (case 2) data.
//!
//! The crate covers data generation under separated and non-separated
//! observation schemes, the nonparametric MLE, a local histogram-type
//! estimator with data-driven weights, the smoothed MLE and its asymptotic
//! variance via an integral equation, closed-form and numerical asymptotic
//! constants, and a parallel Monte Carlo harness.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotics;
pub mod birge;
pub mod error;
pub mod inteq;
pub mod io;
pub mod isotonic;
pub mod model;
pub mod npmle;
pub mod quad;
pub mod rng;
pub mod sim;
pub mod smle;

pub use birge::{birge_curve, birge_estimate, build_partition, BirgePartition};
pub use error::{Error, Result};
pub use inteq::{plugin_variance, solve_phi, theta_variance, GridFunction, GridModel, PhiProblem};
pub use isotonic::{current_status_mle, gcm_left_slopes, isotonic_regression, CusumDiagram, StepDistribution};
pub use model::{
    censor_indicator, generate_dataset, CensoredObservation, Dataset, ObservationScheme, Position, TargetDistribution,
};
pub use npmle::{em_step, log_likelihood, npmle_icm, LikelihoodProblem, MleResult};
pub use sim::{replicate_table, run_experiment, Estimator, ExperimentConfig, TableRow};
pub use smle::{smle_density, smle_eval, SmleConfig, SmoothedMle};
