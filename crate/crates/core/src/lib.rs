//! Stochastic-geometry analysis engine and system-level Monte Carlo
//! simulator for initial access (cell search + random access) in
//! millimeter-wave cellular networks.
//!
//! The crate is split along the natural seams of the problem:
//!
//! * [`model`] — domain types, unit conversion, path loss, blockage and
//!   sectorized beam-gain primitives;
//! * [`quad`] — deterministic adaptive quadrature and the interference
//!   Laplace factors every analytical expression is built from;
//! * [`analytic`] — closed-form/quadrature evaluation of cell-search,
//!   access, downlink-SINR and throughput metrics;
//! * [`sim`] — the independent Monte Carlo oracle: full network
//!   realizations, per-phase SINR bookkeeping, campaign aggregation;
//! * [`report`] — result containers shared by both engines.

pub mod analytic;
pub mod model;
pub mod quad;
pub mod report;
pub mod sim;

pub use analytic::{AnalyticContext, AnalyticError, IAMetrics};
pub use model::{
    bs_beam_gain, bs_gain_for_beams, inverse_path_loss, los_probability, path_loss,
    user_beam_gain, user_gain_for_beams, BeamGain, BlockageModel, ModelError, Protocol,
    ProtocolKind, SystemConfig,
};
pub use quad::{
    integrate, integrate_split, laplace_interference_full, laplace_interference_pair,
    laplace_interference_tail, QuadError, QuadratureSpec,
};
pub use report::{Engine, MetricValue, MetricsReport};
pub use sim::{
    run_campaign, sample_realization, EsfCurve, NetworkRealization, SimError, SimulationConfig,
};
