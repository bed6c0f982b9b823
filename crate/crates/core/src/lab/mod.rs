//! Monte-Carlo and exhaustive-enumeration harnesses for the estimators and
//! the sampled backward pass.
//!
//! Trials run in fixed-size blocks on a rayon pool and are reduced in block
//! order, and trial `t` always draws from stream `t` of the master seed, so
//! reports do not depend on the worker count. Set `WTACRS_THREADS` to cap the
//! pool size.

mod concentration;
mod gradient;
mod instances;
mod moments;
mod parallel;

pub use concentration::{concentration_curve, ConcentrationCurve, CurvePoint};
pub use gradient::{gradient_unbiasedness_experiment, GradientReport, LayerGradientStats};
pub use instances::{power_law_instance, random_instance};
pub use moments::{
    estimator_comparison, exhaustive_moments, monte_carlo_estimator, monte_carlo_moments,
    MomentReport, OUTCOME_LIMIT,
};
pub use parallel::{worker_count, THREADS_ENV};
