//! Domain types and propagation primitives shared by the analytical engine
//! and the system-level simulator: system parameters, blockage models,
//! sectorized beam gains, and the distance/path-loss conversions.
//!
//! All dB-valued inputs are converted to the linear domain exactly once, at
//! ingestion; every function below operates on linear quantities (mW, linear
//! gains, dimensionless path loss, metres).

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors produced by domain-type validation and the propagation primitives.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("distance must be strictly positive, got {0} m")]
    NonPositiveDistance(f64),
    #[error("path loss {z:.6e} is below the reference value {beta:.6e}; no physical distance")]
    BelowReferenceLoss { z: f64, beta: f64 },
    #[error("beamwidth {0} rad is outside the valid range")]
    InvalidBeamwidth(f64),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

/// Convert a dB ratio to linear scale.
#[inline]
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Convert a linear ratio to dB.
#[inline]
pub fn linear_to_db(lin: f64) -> f64 {
    10.0 * lin.log10()
}

/// Convert a dBm power to milliwatts.
#[inline]
pub fn dbm_to_mw(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

/// `r^alpha` with fast paths for the common integer exponents.
#[inline]
pub(crate) fn pow_alpha(r: f64, alpha: f64) -> f64 {
    if alpha == 2.0 {
        r * r
    } else if alpha == 4.0 {
        let s = r * r;
        s * s
    } else if alpha == 3.0 {
        r * r * r
    } else {
        r.powf(alpha)
    }
}

/// Scalar system parameters in their declared units.
///
/// Densities are per km², powers in dBm, the reference path loss and SINR
/// thresholds in dB, durations in seconds. Field names double as the config
/// file keys (section `[system]`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemConfig {
    /// BS density (per km²).
    pub lambda_bs_per_km2: f64,
    /// User density (per km²).
    pub lambda_u_per_km2: f64,
    /// Carrier frequency (GHz); informational only.
    pub fc_ghz: f64,
    /// System bandwidth W (Hz).
    pub bandwidth_hz: f64,
    /// BS transmit power (dBm).
    pub p_bs_dbm: f64,
    /// User transmit power (dBm).
    pub p_user_dbm: f64,
    /// Total thermal noise power over the system bandwidth (dBm).
    pub noise_dbm: f64,
    /// Path-loss exponent for LOS links.
    pub alpha_los: f64,
    /// Path-loss exponent for NLOS links.
    pub alpha_nlos: f64,
    /// Path loss at the 1 m close-in reference distance (dB).
    pub beta_db: f64,
    /// SINR threshold to detect a downlink synchronization signal (dB).
    pub gamma_cs_db: f64,
    /// SINR threshold to decode an uplink access preamble (dB).
    pub gamma_ra_db: f64,
    /// Duration of one synchronization symbol (s).
    pub tau_cs_s: f64,
    /// Duration of one access-preamble symbol (s).
    pub tau_ra_s: f64,
    /// Access cycle period T (s).
    pub cycle_t_s: f64,
    /// Number of orthogonal access preamble sequences.
    pub n_pa: u32,
    /// User-antenna front-back parameter C0, as a *linear* back-lobe
    /// suppression factor (0.1 corresponds to 10 dB suppression).
    pub c0_front_back: f64,
    /// Number of BS antennas / beam directions M.
    pub m_antennas: u32,
    /// Number of user antennas / beam directions N.
    pub n_antennas: u32,
}

impl Default for SystemConfig {
    /// Default 28 GHz urban evaluation scenario.
    fn default() -> Self {
        SystemConfig {
            lambda_bs_per_km2: 100.0,
            lambda_u_per_km2: 1000.0,
            fc_ghz: 28.0,
            bandwidth_hz: 100e6,
            p_bs_dbm: 30.0,
            p_user_dbm: 23.0,
            noise_dbm: -94.0,
            alpha_los: 2.0,
            alpha_nlos: 4.0,
            beta_db: 61.4,
            gamma_cs_db: -4.0,
            gamma_ra_db: -4.0,
            tau_cs_s: 14.3e-6,
            tau_ra_s: 14.3e-6,
            cycle_t_s: 20e-3,
            n_pa: 64,
            c0_front_back: 0.1,
            m_antennas: 24,
            n_antennas: 4,
        }
    }
}

impl SystemConfig {
    /// Check every invariant; returns the first violation found.
    pub fn validate(&self) -> Result<(), ModelError> {
        let err = |msg: String| Err(ModelError::InvalidConfig(msg));
        if !(self.lambda_bs_per_km2 > 0.0) {
            return err(format!("lambda_bs_per_km2 must be > 0, got {}", self.lambda_bs_per_km2));
        }
        if !(self.lambda_u_per_km2 > 0.0) {
            return err(format!("lambda_u_per_km2 must be > 0, got {}", self.lambda_u_per_km2));
        }
        if !(self.bandwidth_hz > 0.0) {
            return err(format!("bandwidth_hz must be > 0, got {}", self.bandwidth_hz));
        }
        for (name, v) in [
            ("tau_cs_s", self.tau_cs_s),
            ("tau_ra_s", self.tau_ra_s),
            ("cycle_t_s", self.cycle_t_s),
        ] {
            if !(v > 0.0) {
                return err(format!("{name} must be > 0, got {v}"));
            }
        }
        if !(self.alpha_los > 0.0) {
            return err(format!("alpha_los must be > 0, got {}", self.alpha_los));
        }
        if !(self.alpha_nlos > 2.0) {
            // The aggregate-interference integrals diverge otherwise.
            return err(format!("alpha_nlos must be > 2, got {}", self.alpha_nlos));
        }
        if self.alpha_los > self.alpha_nlos {
            return err(format!(
                "alpha_los ({}) must not exceed alpha_nlos ({})",
                self.alpha_los, self.alpha_nlos
            ));
        }
        if self.n_pa < 1 {
            return err("n_pa must be >= 1".into());
        }
        if !(self.c0_front_back > 0.0 && self.c0_front_back.is_finite()) {
            return err(format!("c0_front_back must be a positive linear factor, got {}", self.c0_front_back));
        }
        if self.m_antennas == 0 || self.n_antennas == 0 {
            return err("antenna counts must be >= 1".into());
        }
        if self.m_antennas % self.n_antennas != 0 {
            return err(format!(
                "m_antennas ({}) must be an integer multiple of n_antennas ({})",
                self.m_antennas, self.n_antennas
            ));
        }
        for (name, v) in [
            ("p_bs_dbm", self.p_bs_dbm),
            ("p_user_dbm", self.p_user_dbm),
            ("noise_dbm", self.noise_dbm),
            ("beta_db", self.beta_db),
        ] {
            if !v.is_finite() {
                return err(format!("{name} must be finite, got {v}"));
            }
        }
        // -inf dB is the legitimate zero-threshold limit.
        for (name, v) in [("gamma_cs_db", self.gamma_cs_db), ("gamma_ra_db", self.gamma_ra_db)] {
            if v.is_nan() || v == f64::INFINITY {
                return err(format!("{name} must be a threshold in dB or -inf, got {v}"));
            }
        }
        Ok(())
    }

    /// BS density per m².
    #[inline]
    pub fn lambda_bs_m2(&self) -> f64 {
        self.lambda_bs_per_km2 * 1e-6
    }

    /// User density per m².
    #[inline]
    pub fn lambda_u_m2(&self) -> f64 {
        self.lambda_u_per_km2 * 1e-6
    }

    /// Linear reference path loss at 1 m.
    #[inline]
    pub fn beta(&self) -> f64 {
        db_to_linear(self.beta_db)
    }

    /// BS transmit power in mW.
    #[inline]
    pub fn p_bs_mw(&self) -> f64 {
        dbm_to_mw(self.p_bs_dbm)
    }

    /// User transmit power in mW.
    #[inline]
    pub fn p_user_mw(&self) -> f64 {
        dbm_to_mw(self.p_user_dbm)
    }

    /// Total thermal noise power in mW.
    #[inline]
    pub fn noise_mw(&self) -> f64 {
        dbm_to_mw(self.noise_dbm)
    }

    /// Linear synchronization-signal detection threshold.
    #[inline]
    pub fn gamma_cs(&self) -> f64 {
        db_to_linear(self.gamma_cs_db)
    }

    /// Linear access-preamble detection threshold.
    #[inline]
    pub fn gamma_ra(&self) -> f64 {
        db_to_linear(self.gamma_ra_db)
    }
}

/// LOS-probability function h(r), as a closed enumeration of the two
/// supported blockage models.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case", deny_unknown_fields)]
pub enum BlockageModel {
    /// Generalized LOS ball: h(r) = p for r <= R_c, 0 otherwise.
    LosBall {
        /// LOS region radius R_c (m); must exceed the 1 m reference distance.
        radius_rc_m: f64,
        /// LOS probability p within the ball.
        prob_p: f64,
    },
    /// Exponential decay: h(r) = exp(-r / mu).
    Exponential {
        /// Average LOS region length mu (m).
        mu_m: f64,
    },
}

impl Default for BlockageModel {
    fn default() -> Self {
        BlockageModel::LosBall { radius_rc_m: 100.0, prob_p: 1.0 }
    }
}

impl BlockageModel {
    pub fn validate(&self) -> Result<(), ModelError> {
        match *self {
            BlockageModel::LosBall { radius_rc_m, prob_p } => {
                if !(radius_rc_m > 1.0) {
                    return Err(ModelError::InvalidConfig(format!(
                        "radius_rc_m must be > 1 m, got {radius_rc_m}"
                    )));
                }
                if !(0.0..=1.0).contains(&prob_p) {
                    return Err(ModelError::InvalidConfig(format!(
                        "prob_p must be within [0, 1], got {prob_p}"
                    )));
                }
            }
            BlockageModel::Exponential { mu_m } => {
                if !(mu_m > 0.0) {
                    return Err(ModelError::InvalidConfig(format!("mu_m must be > 0, got {mu_m}")));
                }
            }
        }
        Ok(())
    }

    /// h(r): probability that a link of length `r` metres is LOS.
    #[inline]
    pub fn los_probability(&self, r: f64) -> f64 {
        match *self {
            BlockageModel::LosBall { radius_rc_m, prob_p } => {
                if r <= radius_rc_m {
                    prob_p
                } else {
                    0.0
                }
            }
            BlockageModel::Exponential { mu_m } => (-r / mu_m).exp(),
        }
    }

    /// Closed form of `∫_0^r h(t) t dt`, the LOS-weighted radial measure.
    #[inline]
    pub fn int_h_r(&self, r: f64) -> f64 {
        if r <= 0.0 {
            return 0.0;
        }
        match *self {
            BlockageModel::LosBall { radius_rc_m, prob_p } => {
                let rc = r.min(radius_rc_m);
                prob_p * rc * rc / 2.0
            }
            BlockageModel::Exponential { mu_m } => {
                mu_m * mu_m - mu_m * (-r / mu_m).exp() * (r + mu_m)
            }
        }
    }

    /// Closed form of `∫_0^r (1 - h(t)) t dt`.
    #[inline]
    pub fn int_nlos_r(&self, r: f64) -> f64 {
        if r <= 0.0 {
            return 0.0;
        }
        r * r / 2.0 - self.int_h_r(r)
    }

    /// Radius at which h(r) is discontinuous, if any. Integrals over r must
    /// split here or adaptive error estimates break down.
    #[inline]
    pub fn breakpoint(&self) -> Option<f64> {
        match *self {
            BlockageModel::LosBall { radius_rc_m, .. } => Some(radius_rc_m),
            BlockageModel::Exponential { .. } => None,
        }
    }

    /// Short human/CSV label, e.g. `los_ball(rc=100,p=0.5)`.
    pub fn label(&self) -> String {
        match *self {
            BlockageModel::LosBall { radius_rc_m, prob_p } => {
                format!("los_ball(rc={radius_rc_m},p={prob_p})")
            }
            BlockageModel::Exponential { mu_m } => format!("exponential(mu={mu_m})"),
        }
    }
}

/// Free-function form of [`BlockageModel::los_probability`].
pub fn los_probability(r: f64, model: &BlockageModel) -> f64 {
    model.los_probability(r)
}

/// Linear path loss for a link of length `r` metres in the given LOS state.
///
/// Returns the dimensionless attenuation `beta * r^alpha`, applied as a
/// divisor (received = transmitted * gain / loss). Strictly increasing in r.
pub fn path_loss(r: f64, los: bool, cfg: &SystemConfig) -> Result<f64, ModelError> {
    if !(r > 0.0) {
        return Err(ModelError::NonPositiveDistance(r));
    }
    let alpha = if los { cfg.alpha_los } else { cfg.alpha_nlos };
    Ok(cfg.beta() * pow_alpha(r, alpha))
}

/// Distance (m) at which the given LOS state produces linear path loss `z`.
///
/// Inverse of [`path_loss`]: equals `(z / beta)^(1/alpha)`.
pub fn inverse_path_loss(z: f64, los: bool, cfg: &SystemConfig) -> Result<f64, ModelError> {
    let beta = cfg.beta();
    if z < beta {
        return Err(ModelError::BelowReferenceLoss { z, beta });
    }
    let alpha = if los { cfg.alpha_los } else { cfg.alpha_nlos };
    Ok((z / beta).powf(1.0 / alpha))
}

/// Sectorized antenna pattern: constant main-lobe gain over `beamwidth`,
/// constant side-lobe gain elsewhere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeamGain {
    /// Linear main-lobe gain.
    pub main: f64,
    /// Linear side-lobe gain.
    pub side: f64,
    /// Main-lobe width (rad).
    pub beamwidth: f64,
}

/// User-side sectorized gain for the given beamwidth.
///
/// main = (2π/θ)·γ/(γ+1), side = (2π/(2π−θ))·1/(γ+1) with the front-back
/// factor γ = 2π/(C0·(2π−θ)). Power-normalized:
/// main·θ/2π + side·(2π−θ)/2π = 1.
pub fn user_beam_gain(beamwidth: f64, cfg: &SystemConfig) -> Result<BeamGain, ModelError> {
    if !(beamwidth > 0.0 && beamwidth < TAU) {
        return Err(ModelError::InvalidBeamwidth(beamwidth));
    }
    let gamma = TAU / (cfg.c0_front_back * (TAU - beamwidth));
    let main = (TAU / beamwidth) * gamma / (gamma + 1.0);
    let side = (TAU / (TAU - beamwidth)) / (gamma + 1.0);
    Ok(BeamGain { main, side, beamwidth })
}

/// BS-side sectorized gain: main = 2π/θ with zero side lobe. A beamwidth of
/// 2π is the omnidirectional case (unit gain).
pub fn bs_beam_gain(beamwidth: f64) -> Result<BeamGain, ModelError> {
    if !(beamwidth > 0.0 && beamwidth <= TAU) {
        return Err(ModelError::InvalidBeamwidth(beamwidth));
    }
    Ok(BeamGain { main: TAU / beamwidth, side: 0.0, beamwidth })
}

/// User gain for an `n`-beam codebook; `n == 1` is receive/transmit
/// omnidirectionally with unit gain in every direction.
pub fn user_gain_for_beams(n: u32, cfg: &SystemConfig) -> Result<BeamGain, ModelError> {
    if n == 0 {
        return Err(ModelError::InvalidConfig("beam count must be >= 1".into()));
    }
    if n == 1 {
        Ok(BeamGain { main: 1.0, side: 1.0, beamwidth: TAU })
    } else {
        user_beam_gain(TAU / n as f64, cfg)
    }
}

/// BS gain for an `m`-beam codebook; `m == 1` is omnidirectional.
pub fn bs_gain_for_beams(m: u32) -> Result<BeamGain, ModelError> {
    if m == 0 {
        return Err(ModelError::InvalidConfig("beam count must be >= 1".into()));
    }
    bs_beam_gain(TAU / m as f64)
}

/// The four access protocols.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProtocolKind {
    /// Exhaustive sweep in both phases.
    Baseline,
    /// Sweep during cell search, omnidirectional BS reception during access.
    FastRa,
    /// Coarse wide-beam BS sweep during cell search.
    FastCs,
    /// User receives omnidirectionally during cell search, sweeps during access.
    OmniRx,
}

impl ProtocolKind {
    pub const ALL: [ProtocolKind; 4] =
        [ProtocolKind::Baseline, ProtocolKind::FastRa, ProtocolKind::FastCs, ProtocolKind::OmniRx];

    pub fn as_str(&self) -> &'static str {
        match self {
            ProtocolKind::Baseline => "baseline",
            ProtocolKind::FastRa => "fast_ra",
            ProtocolKind::FastCs => "fast_cs",
            ProtocolKind::OmniRx => "omni_rx",
        }
    }
}

impl std::str::FromStr for ProtocolKind {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "baseline" => Ok(ProtocolKind::Baseline),
            "fast_ra" | "fastra" => Ok(ProtocolKind::FastRa),
            "fast_cs" | "fastcs" => Ok(ProtocolKind::FastCs),
            "omni_rx" | "omnirx" => Ok(ProtocolKind::OmniRx),
            other => Err(ModelError::InvalidConfig(format!("unknown protocol '{other}'"))),
        }
    }
}

impl std::fmt::Display for ProtocolKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Beam-direction counts per phase for one protocol, given (M, N):
///
/// | protocol | m_cs       | n_cs | m_ra | n_ra |
/// |----------|------------|------|------|------|
/// | baseline | M          | N    | M    | 1    |
/// | fast_ra  | M          | N    | 1    | 1    |
/// | fast_cs  | m_coarse   | N    | M    | 1    |
/// | omni_rx  | M          | 1    | 1    | N    |
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Protocol {
    pub name: ProtocolKind,
    /// BS beam directions swept during cell search.
    pub m_cs: u32,
    /// User beam directions swept during cell search.
    pub n_cs: u32,
    /// BS beam directions swept during random access.
    pub m_ra: u32,
    /// User beam directions swept during random access.
    pub n_ra: u32,
    /// Wide-beam count used by the coarse-sweep protocol.
    pub m_cs_coarse: u32,
}

/// Default wide-beam count for the coarse cell-search protocol.
pub const DEFAULT_COARSE_BEAMS: u32 = 4;

impl Protocol {
    /// Build the named protocol from the configured (M, N) with the default
    /// coarse beam count.
    pub fn new(kind: ProtocolKind, cfg: &SystemConfig) -> Result<Self, ModelError> {
        Self::with_coarse(kind, cfg, DEFAULT_COARSE_BEAMS)
    }

    /// Build the named protocol with an explicit coarse wide-beam count
    /// (only meaningful for [`ProtocolKind::FastCs`]).
    pub fn with_coarse(
        kind: ProtocolKind,
        cfg: &SystemConfig,
        m_cs_coarse: u32,
    ) -> Result<Self, ModelError> {
        cfg.validate()?;
        let (m, n) = (cfg.m_antennas, cfg.n_antennas);
        let proto = match kind {
            ProtocolKind::Baseline => Protocol { name: kind, m_cs: m, n_cs: n, m_ra: m, n_ra: 1, m_cs_coarse },
            ProtocolKind::FastRa => Protocol { name: kind, m_cs: m, n_cs: n, m_ra: 1, n_ra: 1, m_cs_coarse },
            ProtocolKind::FastCs => {
                if m_cs_coarse < n || m_cs_coarse > m {
                    return Err(ModelError::InvalidConfig(format!(
                        "coarse beam count {m_cs_coarse} must satisfy N ({n}) <= m_cs <= M ({m})"
                    )));
                }
                Protocol { name: kind, m_cs: m_cs_coarse, n_cs: n, m_ra: m, n_ra: 1, m_cs_coarse }
            }
            ProtocolKind::OmniRx => Protocol { name: kind, m_cs: m, n_cs: 1, m_ra: 1, n_ra: n, m_cs_coarse },
        };
        if proto.k_cs() % proto.n_data() != 0 {
            return Err(ModelError::InvalidConfig(format!(
                "search sector count {} is not a multiple of the user data beam count {}",
                proto.k_cs(),
                proto.n_data()
            )));
        }
        Ok(proto)
    }

    /// Number of non-overlapping BS search sectors seen from a user during
    /// the synchronous cell-search sweep.
    #[inline]
    pub fn k_cs(&self) -> u32 {
        self.m_cs.max(self.n_cs)
    }

    /// User beam count during the data phase (the finest beam the user has
    /// trained by the end of access).
    #[inline]
    pub fn n_data(&self) -> u32 {
        self.n_cs.max(self.n_ra)
    }

    /// Search sectors per user data beam; integral by construction.
    #[inline]
    pub fn q(&self) -> u32 {
        self.k_cs() / self.n_data()
    }

    /// Time spent on access signalling in one cycle (s).
    #[inline]
    pub fn ia_duration_s(&self, cfg: &SystemConfig) -> f64 {
        self.m_cs as f64 * self.n_cs as f64 * cfg.tau_cs_s
            + self.m_ra as f64 * self.n_ra as f64 * cfg.tau_ra_s
    }

    /// Fraction of the cycle consumed by access signalling, clamped to 1.
    #[inline]
    pub fn overhead(&self, cfg: &SystemConfig) -> f64 {
        (self.ia_duration_s(cfg) / cfg.cycle_t_s).min(1.0)
    }
}
