//! Result containers shared by the analytic and simulation engines.

use serde::{Deserialize, Serialize};

use crate::model::{BlockageModel, ProtocolKind};

/// Which engine produced a value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    Analytic,
    Simulated,
}

impl Engine {
    pub fn as_str(&self) -> &'static str {
        match self {
            Engine::Analytic => "analytic",
            Engine::Simulated => "simulated",
        }
    }
}

/// A scalar metric with an optional 95% confidence interval (simulation only).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricValue {
    pub value: f64,
    pub ci: Option<(f64, f64)>,
}

impl MetricValue {
    pub fn exact(value: f64) -> Self {
        MetricValue { value, ci: None }
    }

    pub fn with_ci(value: f64, lo: f64, hi: f64) -> Self {
        MetricValue { value, ci: Some((lo, hi)) }
    }

    /// Half-width of the confidence interval (zero when absent).
    pub fn ci_half_width(&self) -> f64 {
        self.ci.map(|(lo, hi)| 0.5 * (hi - lo)).unwrap_or(0.0)
    }
}

/// Per-configuration performance report, from either engine.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub engine: Engine,
    pub protocol: ProtocolKind,
    pub m_antennas: u32,
    pub blockage: BlockageModel,
    pub cs_success: MetricValue,
    pub p_co: MetricValue,
    pub eta_ia: MetricValue,
    /// Expected access delay in seconds; may be infinite.
    pub delay_s: MetricValue,
    pub sched_prob: MetricValue,
    pub upt_bps: MetricValue,
    /// Conditional downlink SINR CCDF samples as (threshold dB, value).
    pub sinr_ccdf: Vec<(f64, MetricValue)>,
    /// Number of Monte Carlo realizations aggregated (0 for analytic).
    pub n_realizations: u32,
    /// Diagnostics: quadrature fallbacks, degenerate configurations, etc.
    pub flags: Vec<String>,
}
