//! CSV writers. One stable schema per artifact, RFC-4180 fields, '.' decimal
//! point, UTF-8; the resolved configuration is echoed as '#' comment lines
//! ahead of the header so every file is self-describing and reruns are
//! byte-identical.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};

use mmwave_ia_core::sim::EsfCurve;
use mmwave_ia_core::{BlockageModel, MetricsReport};

use crate::config::FileConfig;
use crate::validate::ValidationRow;

/// Format a float with shortest round-trip representation; empty for NaN
/// (value undefined) and `inf` for the explicit never-connects sentinel.
fn num(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        format!("{v}")
    }
}

fn blockage_cols(model: &BlockageModel) -> [String; 4] {
    match *model {
        BlockageModel::LosBall { radius_rc_m, prob_p } => [
            "los_ball".into(),
            format!("{radius_rc_m}"),
            format!("{prob_p}"),
            String::new(),
        ],
        BlockageModel::Exponential { mu_m } => {
            ["exponential".into(), String::new(), String::new(), format!("{mu_m}")]
        }
    }
}

pub struct CsvOut {
    writer: csv::Writer<BufWriter<File>>,
}

impl CsvOut {
    /// Create the file, write the resolved-config comment block, and the
    /// header row.
    pub fn create(path: &Path, resolved: &FileConfig, header: &[&str]) -> Result<Self> {
        let file =
            File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
        let mut raw = BufWriter::new(file);
        let echo = toml::to_string(resolved).context("serializing resolved config")?;
        for line in echo.lines() {
            writeln!(raw, "# {line}")?;
        }
        let mut writer = csv::Writer::from_writer(raw);
        writer.write_record(header)?;
        Ok(CsvOut { writer })
    }

    pub fn write(&mut self, record: &[String]) -> Result<()> {
        self.writer.write_record(record)?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.writer.flush()?;
        Ok(())
    }
}

pub const METRICS_HEADER: [&str; 25] = [
    "engine",
    "protocol",
    "blockage_model",
    "blockage_rc_m",
    "blockage_p",
    "blockage_mu_m",
    "m",
    "p_cs",
    "p_cs_ci_lo",
    "p_cs_ci_hi",
    "p_co",
    "p_co_ci_lo",
    "p_co_ci_hi",
    "eta_ia",
    "eta_ia_ci_lo",
    "eta_ia_ci_hi",
    "delay_ms",
    "delay_ci_lo_ms",
    "delay_ci_hi_ms",
    "sched_prob",
    "upt_mbps",
    "upt_ci_lo_mbps",
    "upt_ci_hi_mbps",
    "n_realizations",
    "flags",
];

pub fn metrics_row(r: &MetricsReport) -> Vec<String> {
    let b = blockage_cols(&r.blockage);
    let ci = |v: &mmwave_ia_core::MetricValue, scale: f64| -> (String, String, String) {
        let main = num(v.value * scale);
        match v.ci {
            Some((lo, hi)) => (main, num(lo * scale), num(hi * scale)),
            None => (main, String::new(), String::new()),
        }
    };
    let (cs, cs_lo, cs_hi) = ci(&r.cs_success, 1.0);
    let (pco, pco_lo, pco_hi) = ci(&r.p_co, 1.0);
    let (eta, eta_lo, eta_hi) = ci(&r.eta_ia, 1.0);
    let (delay, delay_lo, delay_hi) = ci(&r.delay_s, 1e3);
    let (upt, upt_lo, upt_hi) = ci(&r.upt_bps, 1e-6);
    vec![
        r.engine.as_str().into(),
        r.protocol.as_str().into(),
        b[0].clone(),
        b[1].clone(),
        b[2].clone(),
        b[3].clone(),
        format!("{}", r.m_antennas),
        cs,
        cs_lo,
        cs_hi,
        pco,
        pco_lo,
        pco_hi,
        eta,
        eta_lo,
        eta_hi,
        // Infinite delay is reported as an empty cell plus the
        // never_connects flag rather than a numeric infinity.
        if delay == "inf" { String::new() } else { delay },
        if delay_lo == "inf" { String::new() } else { delay_lo },
        if delay_hi == "inf" { String::new() } else { delay_hi },
        num(r.sched_prob.value),
        upt,
        upt_lo,
        upt_hi,
        format!("{}", r.n_realizations),
        r.flags.join(";"),
    ]
}

pub const SINR_HEADER: [&str; 11] = [
    "engine",
    "protocol",
    "blockage_model",
    "blockage_rc_m",
    "blockage_p",
    "blockage_mu_m",
    "m",
    "gamma_db",
    "ccdf",
    "ccdf_ci_lo",
    "ccdf_ci_hi",
];

pub fn sinr_rows(r: &MetricsReport) -> Vec<Vec<String>> {
    let b = blockage_cols(&r.blockage);
    r.sinr_ccdf
        .iter()
        .map(|(g_db, v)| {
            let (lo, hi) = v.ci.map(|(l, h)| (num(l), num(h))).unwrap_or_default();
            vec![
                r.engine.as_str().into(),
                r.protocol.as_str().into(),
                b[0].clone(),
                b[1].clone(),
                b[2].clone(),
                b[3].clone(),
                format!("{}", r.m_antennas),
                num(*g_db),
                num(v.value),
                lo,
                hi,
            ]
        })
        .collect()
}

pub const ESF_HEADER: [&str; 5] = ["r_m", "empirical", "fitted", "ci_lo", "ci_hi"];

pub fn esf_rows(curve: &EsfCurve) -> Vec<Vec<String>> {
    (0..curve.r_m.len())
        .map(|i| {
            vec![
                num(curve.r_m[i]),
                num(curve.empirical[i]),
                num(curve.fitted[i]),
                num(curve.ci_low[i]),
                num(curve.ci_high[i]),
            ]
        })
        .collect()
}

pub const REALIZATION_HEADER: [&str; 13] = [
    "protocol",
    "blockage_model",
    "blockage_rc_m",
    "blockage_p",
    "blockage_mu_m",
    "m",
    "realization",
    "n_users",
    "cs_success",
    "collision_free",
    "ia_success",
    "mean_load",
    "mean_spectral_efficiency",
];

pub fn realization_row(
    report: &MetricsReport,
    rec: &mmwave_ia_core::sim::RealizationRecord,
) -> Vec<String> {
    let b = blockage_cols(&report.blockage);
    vec![
        report.protocol.as_str().into(),
        b[0].clone(),
        b[1].clone(),
        b[2].clone(),
        b[3].clone(),
        format!("{}", report.m_antennas),
        format!("{}", rec.realization),
        format!("{}", rec.n_users),
        format!("{}", rec.cs_success),
        format!("{}", rec.collision_free),
        format!("{}", rec.ia_success),
        num(rec.mean_load),
        num(rec.mean_spectral_efficiency),
    ]
}

pub const VALIDATION_HEADER: [&str; 12] = [
    "metric",
    "protocol",
    "blockage_model",
    "blockage_rc_m",
    "blockage_p",
    "blockage_mu_m",
    "m",
    "analytic",
    "mc_mean",
    "mc_ci_lo",
    "mc_ci_hi",
    "pass",
];

pub fn validation_row(row: &ValidationRow) -> Vec<String> {
    let b = blockage_cols(&row.blockage);
    vec![
        row.metric.clone(),
        row.protocol.as_str().into(),
        b[0].clone(),
        b[1].clone(),
        b[2].clone(),
        b[3].clone(),
        format!("{}", row.m),
        num(row.analytic),
        num(row.mc_mean),
        num(row.mc_ci.0),
        num(row.mc_ci.1),
        if row.pass { "pass".into() } else { "FAIL".into() },
    ]
}
