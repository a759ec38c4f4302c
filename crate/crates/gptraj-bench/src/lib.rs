//! Benchmark harness for the trajectory estimator.
//!
//! Splits into three layers so the CLI and the integration tests share one
//! code path: [`config`] parses the flat key-value experiment files,
//! [`runner`] simulates and solves the scenario grid, and [`rmse`] scores
//! estimates against the analytic ground truth.

pub mod config;
pub mod rmse;
pub mod runner;
