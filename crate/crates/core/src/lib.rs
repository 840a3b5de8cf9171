//! Multivariate self-exciting count processes: negative-binomial (SE-NBD) and
//! Poisson (Hawkes) count dynamics on an interaction network.
//!
//! The crate covers the full workflow for event-count panels such as quarterly
//! default counts per sector:
//!
//! - [`model`]: model families, parameter containers, and count series.
//! - [`process`]: probability mass functions and seeded forward simulation.
//! - [`likelihood`] / [`fit`]: one-step-ahead likelihood, bounded
//!   maximum-likelihood fitting (MAP under a uniform prior), AIC model
//!   comparison, and greedy interaction-edge selection.
//! - [`network`]: reproduction-number matrix, stationarity classification,
//!   mean-field equilibria, and shock impact analysis.
//! - [`branching`]: branching-process view of a single event cascade —
//!   extinction probabilities and total progeny.
//! - [`correlation`]: continuous-limit autocovariance, both in closed form and
//!   via the covariance integral equation, plus empirical lagged covariances.

pub mod branching;
pub mod correlation;
pub mod error;
pub mod fit;
pub mod likelihood;
pub mod model;
pub mod network;
pub mod optim;
pub mod process;
pub mod rng;

pub use error::{Error, Result};
pub use fit::{aic_table, fit, select_edges_greedy, AicRow, Bounds, EdgeSelection, FitConfig, FitResult};
pub use likelihood::log_likelihood;
pub use model::{EventSeries, Family, ModelSpec, ProcessState, Shape};
pub use network::{
    build_s_matrix, classify_stationarity, export_network, impact_analysis, impact_infinite,
    impact_trajectory, mean_field_equilibrium, rank_sectors, spectral_radius, ImpactResult,
    InteractionMatrix, NamedEdge, StationarityReport,
};
pub use process::{nbd_pmf, poisson_pmf, simulate, simulate_with, step, Simulator};
