//! Optimal investment and consumption under herding pressure.
//!
//! Two households manage exponential-utility funds over a finite horizon.
//! The leader invests and consumes at its own optimum; the follower pays a
//! quadratic penalty for letting its investment path deviate from the
//! leader's and re-optimises under that pressure. The solved optimum has a
//! striking structure: investment becomes a pointwise blend of the two
//! baselines, while consumption keeps its herd-free shape but drops by a
//! constant — the crowding-out measure.
//!
//! Module map:
//! - [`model`]: scenario types, validation, JSON wire format, grids/paths
//! - [`numerics`]: composite quadrature and safeguarded root finding
//! - [`baseline`]: closed-form herd-free optimum of a single household
//! - [`follower`]: the herding optimum and its scalar multiplier equation
//! - [`crowding`]: the crowding-out measure, its limit, sweeps, sensitivities
//! - [`objective`]: objective functionals and variational optimality probes
//! - [`simulate`]: Euler-Maruyama fund simulation against the exact law
//! - [`econometrics`]: CSV ingestion, transforms, OLS with inference
//! - [`svg`]: minimal line charts
//! - [`cli`]: the `crowdout` command-line driver

pub mod baseline;
pub mod cli;
pub mod crowding;
pub mod econometrics;
pub mod error;
pub mod follower;
pub mod model;
pub mod numerics;
pub mod objective;
pub mod simulate;
pub mod svg;

pub use error::{Error, Result};
pub use model::{ControlPath, HerdingScenario, HouseholdParams, MarketParams, TimeGrid};
