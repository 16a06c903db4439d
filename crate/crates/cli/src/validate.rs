//! Analytic-vs-simulation cross-validation: one row per (metric, grid
//! point), pass when the analytic value lies inside the Monte Carlo
//! confidence interval expanded by the declared tolerance.

use std::collections::BTreeMap;

use anyhow::{bail, Context, Result};

use mmwave_ia_core::{BlockageModel, MetricsReport, ProtocolKind};

/// Thresholds (dB) at which the SINR CCDF is cross-validated.
pub const VALIDATE_SINR_DB: [f64; 3] = [0.0, 10.0, 20.0];

#[derive(Debug, Clone)]
pub struct Tolerances {
    /// Absolute tolerance per metric key plus the relative one for upt.
    map: BTreeMap<String, f64>,
}

impl Default for Tolerances {
    fn default() -> Self {
        let mut map = BTreeMap::new();
        map.insert("p_cs".into(), 0.02);
        map.insert("eta_ia".into(), 0.02);
        map.insert("p_co".into(), 0.02);
        map.insert("sinr".into(), 0.03);
        map.insert("upt_rel".into(), 0.05);
        Tolerances { map }
    }
}

impl Tolerances {
    pub fn get(&self, key: &str) -> f64 {
        *self.map.get(key).expect("known tolerance key")
    }

    /// Apply a `--tolerance KEY=VAL` override.
    pub fn set(&mut self, spec: &str) -> Result<()> {
        let (key, val) = spec
            .split_once('=')
            .with_context(|| format!("--tolerance expects KEY=VAL, got '{spec}'"))?;
        if !self.map.contains_key(key) {
            bail!(
                "unknown tolerance key '{key}' (known: {})",
                self.map.keys().cloned().collect::<Vec<_>>().join(", ")
            );
        }
        let v: f64 = val.parse().with_context(|| format!("bad tolerance value in '{spec}'"))?;
        if !(v >= 0.0) {
            bail!("tolerance must be nonnegative, got '{spec}'");
        }
        self.map.insert(key.into(), v);
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct ValidationRow {
    pub metric: String,
    pub protocol: ProtocolKind,
    pub blockage: BlockageModel,
    pub m: u32,
    pub analytic: f64,
    pub mc_mean: f64,
    pub mc_ci: (f64, f64),
    pub pass: bool,
}

fn abs_row(
    metric: &str,
    analytic: f64,
    mc: &mmwave_ia_core::MetricValue,
    tol: f64,
    a_report: &MetricsReport,
) -> ValidationRow {
    let (lo, hi) = mc.ci.unwrap_or((mc.value, mc.value));
    ValidationRow {
        metric: metric.into(),
        protocol: a_report.protocol,
        blockage: a_report.blockage,
        m: a_report.m_antennas,
        analytic,
        mc_mean: mc.value,
        mc_ci: (lo, hi),
        pass: analytic >= lo - tol && analytic <= hi + tol,
    }
}

/// Compare one analytic report against its simulated counterpart.
pub fn validate_pair(
    analytic: &MetricsReport,
    simulated: &MetricsReport,
    tol: &Tolerances,
) -> Vec<ValidationRow> {
    let mut rows = vec![
        abs_row("p_cs", analytic.cs_success.value, &simulated.cs_success, tol.get("p_cs"), analytic),
        abs_row("p_co", analytic.p_co.value, &simulated.p_co, tol.get("p_co"), analytic),
        abs_row("eta_ia", analytic.eta_ia.value, &simulated.eta_ia, tol.get("eta_ia"), analytic),
    ];
    for g_db in VALIDATE_SINR_DB {
        let a = lookup_ccdf(analytic, g_db);
        let s = lookup_ccdf_value(simulated, g_db);
        if let (Some(a), Some(s)) = (a, s) {
            rows.push(abs_row(&format!("sinr_ccdf_{g_db}db"), a, &s, tol.get("sinr"), analytic));
        }
    }
    // Relative tolerance for throughput: expand the MC interval by the
    // declared fraction.
    let rel = tol.get("upt_rel");
    let (lo, hi) = simulated.upt_bps.ci.unwrap_or((simulated.upt_bps.value, simulated.upt_bps.value));
    let a = analytic.upt_bps.value;
    rows.push(ValidationRow {
        metric: "upt".into(),
        protocol: analytic.protocol,
        blockage: analytic.blockage,
        m: analytic.m_antennas,
        analytic: a,
        mc_mean: simulated.upt_bps.value,
        mc_ci: (lo, hi),
        pass: a >= lo * (1.0 - rel) && a <= hi * (1.0 + rel),
    });
    rows
}

fn lookup_ccdf(report: &MetricsReport, g_db: f64) -> Option<f64> {
    report
        .sinr_ccdf
        .iter()
        .find(|(g, _)| (*g - g_db).abs() < 1e-9)
        .map(|(_, v)| v.value)
}

fn lookup_ccdf_value(report: &MetricsReport, g_db: f64) -> Option<mmwave_ia_core::MetricValue> {
    report.sinr_ccdf.iter().find(|(g, _)| (*g - g_db).abs() < 1e-9).map(|(_, v)| *v)
}
