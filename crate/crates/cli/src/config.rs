//! Config-file ingestion and CLI override resolution.
//!
//! The file is TOML with four sections — `[system]`, `[blockage]`,
//! `[protocol]`, `[simulation]` — every key named after the corresponding
//! struct field with its unit suffix. Missing sections and keys fall back to
//! the default 28 GHz evaluation scenario. Command-line flags override file
//! values; the fully resolved configuration is echoed into every output file
//! for reproducibility.

use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use mmwave_ia_core::{BlockageModel, ProtocolKind, SimulationConfig, SystemConfig};

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProtocolSection {
    /// Protocol evaluated when no --protocol flag is given.
    pub name: Option<ProtocolKind>,
    /// Wide-beam count for the coarse cell-search protocol.
    pub m_cs_coarse: Option<u32>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub system: SystemConfig,
    pub blockage: BlockageModel,
    pub protocol: ProtocolSection,
    pub simulation: SimulationConfig,
}

pub fn load(path: Option<&Path>) -> Result<FileConfig> {
    let Some(path) = path else {
        return Ok(FileConfig::default());
    };
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read config file {}", path.display()))?;
    let cfg: FileConfig = toml::from_str(&text)
        .with_context(|| format!("cannot parse config file {}", path.display()))?;
    Ok(cfg)
}

/// Parse a `--blockage` specification.
///
/// Accepted forms: `los_ball:rc=100,p=0.5`, `los_ball:100:0.5`,
/// `exponential:mu=50`, `exp:50`.
pub fn parse_blockage(spec: &str) -> Result<BlockageModel> {
    let mut parts = spec.split(':');
    let name = parts.next().unwrap_or_default().to_ascii_lowercase();
    // Remaining segments, with comma-separated key=value pairs flattened.
    let args: Vec<&str> = parts.flat_map(|a| a.split(',')).filter(|a| !a.is_empty()).collect();
    let lookup = |key: &str, pos: usize| -> Result<Option<f64>> {
        for a in &args {
            if let Some(v) = a.strip_prefix(&format!("{key}=")) {
                return Ok(Some(v.parse::<f64>().with_context(|| format!("bad {key} in '{spec}'"))?));
            }
        }
        let positional: Vec<&&str> = args.iter().filter(|a| !a.contains('=')).collect();
        match positional.get(pos) {
            Some(v) => {
                Ok(Some(v.parse::<f64>().with_context(|| format!("bad value '{v}' in '{spec}'"))?))
            }
            None => Ok(None),
        }
    };
    let model = match name.as_str() {
        "los_ball" | "losball" | "ball" => BlockageModel::LosBall {
            radius_rc_m: lookup("rc", 0)?.unwrap_or(100.0),
            prob_p: lookup("p", 1)?.unwrap_or(1.0),
        },
        "exponential" | "exp" => {
            BlockageModel::Exponential { mu_m: lookup("mu", 0)?.unwrap_or(100.0) }
        }
        other => bail!("unknown blockage model '{other}' in '{spec}'"),
    };
    model.validate().map_err(|e| anyhow::anyhow!("--blockage {spec}: {e}"))?;
    Ok(model)
}

/// Parse `--m-range A:B:STEP` into the inclusive beam-count grid.
pub fn parse_m_range(spec: &str) -> Result<Vec<u32>> {
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        bail!("--m-range expects A:B:STEP, got '{spec}'");
    }
    let a: u32 = parts[0].parse().with_context(|| format!("bad start in '{spec}'"))?;
    let b: u32 = parts[1].parse().with_context(|| format!("bad end in '{spec}'"))?;
    let step: u32 = parts[2].parse().with_context(|| format!("bad step in '{spec}'"))?;
    if step == 0 || b < a {
        bail!("--m-range must satisfy A <= B and STEP > 0, got '{spec}'");
    }
    Ok((a..=b).step_by(step as usize).collect())
}
