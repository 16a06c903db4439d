//! System-level Monte Carlo simulation of full access cycles: network
//! realizations drawn from the two Poisson processes, synchronous-sweep cell
//! search, preamble-based random access, and the downlink data phase.
//!
//! This module is the independent oracle for the analytic engine: it works
//! directly on sampled geometry, per-link blockage flags and per-symbol
//! fading, never on the quadrature expressions it is used to validate.
//!
//! Reproducibility: every random quantity is drawn from a counter-based
//! stream derived from (master seed, domain tag, realization, entity index),
//! so results are independent of scheduling and worker count.

mod campaign;
mod esf;

pub use campaign::{run_campaign, run_campaign_detailed, Kahan, RealizationRecord, SINR_GRID_DB};
pub use esf::{compute_esf, empirical_esf, EsfCurve};

use std::f64::consts::TAU;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Poisson};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    bs_gain_for_beams, pow_alpha, user_gain_for_beams, BlockageModel, ModelError, Protocol,
    SystemConfig,
};

#[derive(Debug, Clone, Error)]
pub enum SimError {
    #[error("invalid simulation configuration: {0}")]
    InvalidConfig(String),
    #[error("degenerate campaign: {0}")]
    Degenerate(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Monte Carlo campaign parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationConfig {
    /// Side of the square network area (km).
    pub area_km: f64,
    /// Number of BS process realizations.
    pub n_bs_draws: u32,
    /// Number of user process realizations per BS realization.
    pub n_user_draws: u32,
    /// Master seed for all streams.
    pub seed: u64,
    /// Inset of the measurement region from the area boundary (km).
    pub interior_margin_km: f64,
    /// Reduced 10×10 draw counts for quick runs.
    pub desk_scale: bool,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            area_km: 1.5,
            n_bs_draws: 50,
            n_user_draws: 50,
            seed: 17,
            interior_margin_km: 0.15,
            desk_scale: false,
        }
    }
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.area_km > 0.0) {
            return Err(SimError::InvalidConfig(format!("area_km must be > 0, got {}", self.area_km)));
        }
        if self.n_bs_draws < 1 || self.n_user_draws < 1 {
            return Err(SimError::InvalidConfig("draw counts must be >= 1".into()));
        }
        if !(self.interior_margin_km >= 0.0 && self.interior_margin_km < self.area_km / 2.0) {
            return Err(SimError::InvalidConfig(format!(
                "interior_margin_km must lie in [0, area/2), got {}",
                self.interior_margin_km
            )));
        }
        Ok(())
    }

    /// Effective draw counts (desk scale forces 10×10).
    pub fn draws(&self) -> (u32, u32) {
        if self.desk_scale {
            (self.n_bs_draws.min(10), self.n_user_draws.min(10))
        } else {
            (self.n_bs_draws, self.n_user_draws)
        }
    }

    pub fn area_m(&self) -> f64 {
        self.area_km * 1000.0
    }

    pub fn margin_m(&self) -> f64 {
        self.interior_margin_km * 1000.0
    }
}

/// Planar position in metres.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    #[inline]
    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    /// Angle of `other` as seen from `self`, in [0, 2π).
    #[inline]
    pub fn angle_to(&self, other: &Point) -> f64 {
        (other.y - self.y).atan2(other.x - self.x).rem_euclid(TAU)
    }
}

/// Beam/sector index of an angle on a `k`-sector grid anchored at angle 0.
#[inline]
pub fn sector_index(angle: f64, k: u32) -> u32 {
    ((angle * k as f64 / TAU) as u32).min(k - 1)
}

// Stream domain tags.
const DOM_BS: u64 = 0x01;
const DOM_COMBO: u64 = 0x02;
const DOM_CS_FADE: u64 = 0x03;
const DOM_RA_FADE: u64 = 0x04;
const DOM_DL_FADE: u64 = 0x05;
const DOM_SCHED: u64 = 0x06;
const DOM_BOOT: u64 = 0x07;

#[inline]
fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic counter-based stream for (seed, domain, a, b).
fn substream(seed: u64, dom: u64, a: u64, b: u64) -> ChaCha8Rng {
    let mut s = splitmix64(seed ^ splitmix64(dom));
    s = splitmix64(s ^ a);
    s = splitmix64(s ^ b);
    ChaCha8Rng::seed_from_u64(s)
}

/// One sampled deployment: BS and user points, per-link blockage state and
/// preamble choices. Per-phase fading is materialized on demand from the
/// stored (seed, stream) handles, one independent substream per user and
/// phase, so two realizations with equal (seed, stream) are bit-identical
/// in every quantity they ever produce.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkRealization {
    pub bs: Vec<Point>,
    pub users: Vec<Point>,
    /// Row-major (user × BS) LOS flags.
    pub los: Vec<bool>,
    /// Preamble choice per user, in 0..n_pa.
    pub preambles: Vec<u32>,
    pub seed: u64,
    pub stream: u64,
    pub area_m: f64,
}

impl NetworkRealization {
    #[inline]
    pub fn is_los(&self, user: usize, bs: usize) -> bool {
        self.los[user * self.bs.len() + bs]
    }
}

fn sample_ppp(rng: &mut ChaCha8Rng, density_m2: f64, area_m: f64) -> Vec<Point> {
    let mean = density_m2 * area_m * area_m;
    let n = if mean > 0.0 {
        let pois = Poisson::new(mean).expect("positive Poisson mean");
        pois.sample(rng) as usize
    } else {
        0
    };
    (0..n)
        .map(|_| Point { x: rng.random_range(0.0..area_m), y: rng.random_range(0.0..area_m) })
        .collect()
}

/// Draw one network realization. `stream_id` enumerates (BS draw, user draw)
/// combinations row-major: the BS process is shared by all user draws with
/// the same `stream_id / n_user_draws`.
pub fn sample_realization(
    cfg: &SystemConfig,
    model: &BlockageModel,
    sim: &SimulationConfig,
    stream_id: u64,
) -> NetworkRealization {
    let (_, n_user) = sim.draws();
    let bs_draw = stream_id / n_user as u64;
    let area_m = sim.area_m();

    let mut rng_bs = substream(sim.seed, DOM_BS, bs_draw, 0);
    let bs = sample_ppp(&mut rng_bs, cfg.lambda_bs_m2(), area_m);

    let mut rng = substream(sim.seed, DOM_COMBO, stream_id, 0);
    let users = sample_ppp(&mut rng, cfg.lambda_u_m2(), area_m);

    let mut los = Vec::with_capacity(users.len() * bs.len());
    for u in &users {
        for b in &bs {
            let h = model.los_probability(u.distance(b));
            los.push(rng.random::<f64>() < h);
        }
    }
    let preambles = (0..users.len()).map(|_| rng.random_range(0..cfg.n_pa)).collect();

    NetworkRealization { bs, users, los, preambles, seed: sim.seed, stream: stream_id, area_m }
}

/// Gains and thresholds the phase simulations need, derived directly from
/// the configuration (independently of the analytic context).
#[derive(Debug, Clone)]
pub struct PhyParams {
    pub k_cs: u32,
    pub n_data: u32,
    pub m_ra: u32,
    pub n_ra: u32,
    pub gamma_cs: f64,
    pub gamma_ra: f64,
    pub beta: f64,
    pub alpha_l: f64,
    pub alpha_n: f64,
    /// σ²/(P_b · M_cs-gain · user CS main gain).
    pub cs_eff_noise: f64,
    /// σ²/(P_u · M_ra-gain); user-side gains stay explicit.
    pub ra_noise_over_gain: f64,
    /// σ²/P_b for the data phase.
    pub dl_noise_over_power: f64,
    /// BS data beam count and main-lobe gain.
    pub m_beams: u32,
    pub m_gain: f64,
    /// User data/access beam main and side gains.
    pub g_main: f64,
    pub g_side: f64,
    pub n_pa: u32,
}

impl PhyParams {
    pub fn new(cfg: &SystemConfig, proto: &Protocol) -> Result<Self, SimError> {
        cfg.validate()?;
        let g_cs = user_gain_for_beams(proto.n_cs, cfg)?;
        let g_data = user_gain_for_beams(proto.n_data(), cfg)?;
        let bs_cs = bs_gain_for_beams(proto.m_cs)?;
        let bs_ra = bs_gain_for_beams(proto.m_ra)?;
        let bs_data = bs_gain_for_beams(cfg.m_antennas)?;
        let noise = cfg.noise_mw();
        Ok(PhyParams {
            k_cs: proto.k_cs(),
            n_data: proto.n_data(),
            m_ra: proto.m_ra,
            n_ra: proto.n_ra,
            gamma_cs: cfg.gamma_cs(),
            gamma_ra: cfg.gamma_ra(),
            beta: cfg.beta(),
            alpha_l: cfg.alpha_los,
            alpha_n: cfg.alpha_nlos,
            cs_eff_noise: noise / (cfg.p_bs_mw() * bs_cs.main * g_cs.main),
            ra_noise_over_gain: noise / (cfg.p_user_mw() * bs_ra.main),
            dl_noise_over_power: noise / cfg.p_bs_mw(),
            m_beams: cfg.m_antennas,
            m_gain: bs_data.main,
            g_main: g_data.main,
            g_side: g_data.side,
            n_pa: cfg.n_pa,
        })
    }

    #[inline]
    pub fn path_loss(&self, r: f64, los: bool) -> f64 {
        let alpha = if los { self.alpha_l } else { self.alpha_n };
        self.beta * pow_alpha(r, alpha)
    }
}

/// Cell-search result for one user.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CsOutcome {
    /// Serving BS (minimum path loss over the detected sectors).
    pub serving: Option<u32>,
    /// Path loss to the serving BS; infinite when cell search failed.
    pub z0: f64,
}

impl CsOutcome {
    pub fn success(&self) -> bool {
        self.serving.is_some()
    }
}

/// Synchronous-sweep cell search: each of the `k_cs` non-overlapping sectors
/// around a user is examined once, with interference from the co-sector BSs
/// only (the zero BS side lobe removes every other contribution at the
/// aligned symbol). A sector is detected when the SINR of its
/// minimum-path-loss BS clears the synchronization threshold; the user then
/// serves from the best detected sector.
pub fn run_cell_search(real: &NetworkRealization, phy: &PhyParams) -> Vec<CsOutcome> {
    let nb = real.bs.len();
    let k = phy.k_cs;
    let mut outcomes = Vec::with_capacity(real.users.len());
    let mut link = vec![(0.0f64, 0u32); nb];
    let mut best: Vec<Option<usize>> = vec![None; k as usize];

    for (ui, u) in real.users.iter().enumerate() {
        let mut rng = substream(real.seed, DOM_CS_FADE, real.stream, ui as u64);
        // Fading is drawn densely in BS order so the draw sequence does not
        // depend on the sector layout.
        for item in best.iter_mut() {
            *item = None;
        }
        for (bi, b) in real.bs.iter().enumerate() {
            let pl = phy.path_loss(u.distance(b), real.is_los(ui, bi));
            let sec = sector_index(u.angle_to(b), k);
            link[bi] = (pl, sec);
            let cur = &mut best[sec as usize];
            match cur {
                Some(prev) if link[*prev].0 <= pl => {}
                _ => *cur = Some(bi),
            }
        }
        let fading: Vec<f64> = (0..nb).map(|_| Exp1.sample(&mut rng)).collect();

        let mut serving: Option<u32> = None;
        let mut z0 = f64::INFINITY;
        for sec in 0..k as usize {
            let Some(bi) = best[sec] else { continue };
            let (z1, _) = link[bi];
            let mut interf = 0.0;
            for (bj, &(pl, s)) in link.iter().enumerate() {
                if s as usize == sec && bj != bi {
                    interf += fading[bj] / pl;
                }
            }
            let sinr = (fading[bi] / z1) / (interf + phy.cs_eff_noise);
            if sinr >= phy.gamma_cs && z1 < z0 {
                z0 = z1;
                serving = Some(bi as u32);
            }
        }
        outcomes.push(CsOutcome { serving, z0 });
    }
    outcomes
}

/// Per-sector (minimum path loss, detected) samples pooled over all users;
/// the raw material for validating the per-sector detection expressions.
pub fn cell_search_sector_samples(
    real: &NetworkRealization,
    phy: &PhyParams,
) -> Vec<(f64, bool)> {
    let nb = real.bs.len();
    let k = phy.k_cs;
    let mut samples = Vec::with_capacity(real.users.len() * k as usize);
    let mut link = vec![(0.0f64, 0u32); nb];
    let mut best: Vec<Option<usize>> = vec![None; k as usize];

    for (ui, u) in real.users.iter().enumerate() {
        let mut rng = substream(real.seed, DOM_CS_FADE, real.stream, ui as u64);
        for item in best.iter_mut() {
            *item = None;
        }
        for (bi, b) in real.bs.iter().enumerate() {
            let pl = phy.path_loss(u.distance(b), real.is_los(ui, bi));
            let sec = sector_index(u.angle_to(b), k);
            link[bi] = (pl, sec);
            let cur = &mut best[sec as usize];
            match cur {
                Some(prev) if link[*prev].0 <= pl => {}
                _ => *cur = Some(bi),
            }
        }
        let fading: Vec<f64> = (0..nb).map(|_| Exp1.sample(&mut rng)).collect();
        for sec in 0..k as usize {
            let Some(bi) = best[sec] else { continue };
            let (z1, _) = link[bi];
            let mut interf = 0.0;
            for (bj, &(pl, s)) in link.iter().enumerate() {
                if s as usize == sec && bj != bi {
                    interf += fading[bj] / pl;
                }
            }
            let sinr = (fading[bi] / z1) / (interf + phy.cs_eff_noise);
            samples.push((z1, sinr >= phy.gamma_cs));
        }
    }
    samples
}

/// Random-access result for a user that passed cell search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RaOutcome {
    /// Another user shares (serving BS, preamble, receive beam).
    pub collided: bool,
    /// The preamble SINR at the serving BS cleared the threshold.
    pub decoded: bool,
}

impl RaOutcome {
    pub fn success(&self) -> bool {
        !self.collided && self.decoded
    }
}

/// Preamble transmission towards each user's serving BS. Collisions are
/// exact (same BS, same preamble, same receive-beam sector); decoding
/// evaluates the preamble SINR in the aligned symbol with interference from
/// every cell-search survivor on the same preamble inside the active receive
/// sector, its transmit gain chosen by whether its own beam covers the
/// serving BS.
pub fn run_random_access(
    real: &NetworkRealization,
    cs: &[CsOutcome],
    phy: &PhyParams,
) -> Vec<Option<RaOutcome>> {
    let survivors: Vec<u32> =
        (0..real.users.len() as u32).filter(|&u| cs[u as usize].success()).collect();
    // Same-preamble candidate lists.
    let mut by_preamble: Vec<Vec<u32>> = vec![Vec::new(); phy.n_pa as usize];
    for &u in &survivors {
        by_preamble[real.preambles[u as usize] as usize].push(u);
    }

    let mut out: Vec<Option<RaOutcome>> = vec![None; real.users.len()];
    for &ui in &survivors {
        let u = &real.users[ui as usize];
        let x0_idx = cs[ui as usize].serving.unwrap() as usize;
        let x0 = &real.bs[x0_idx];
        let z0 = cs[ui as usize].z0;
        let rx_beam = sector_index(x0.angle_to(u), phy.m_ra);
        // Transmit beam index active in this user's decode symbol; with a
        // single access transmit direction every user stays on the beam it
        // trained during cell search, otherwise the synchronous sweep puts
        // all users on the same index this user needs to reach its BS.
        let sweep_beam = sector_index(u.angle_to(x0), phy.n_data);

        let mut collided = false;
        let mut rng = substream(real.seed, DOM_RA_FADE, real.stream, ui as u64);
        let f0: f64 = Exp1.sample(&mut rng);
        let mut interf = 0.0;
        for &vi in &by_preamble[real.preambles[ui as usize] as usize] {
            if vi == ui {
                continue;
            }
            let v = &real.users[vi as usize];
            if phy.m_ra > 1 && sector_index(x0.angle_to(v), phy.m_ra) != rx_beam {
                continue;
            }
            if cs[vi as usize].serving == Some(x0_idx as u32) {
                collided = true;
            }
            let tx_beam = if phy.n_ra == 1 {
                let sv = cs[vi as usize].serving.unwrap() as usize;
                sector_index(v.angle_to(&real.bs[sv]), phy.n_data)
            } else {
                sweep_beam
            };
            let covers = sector_index(v.angle_to(x0), phy.n_data) == tx_beam;
            let gain = if covers { phy.g_main } else { phy.g_side };
            let f: f64 = Exp1.sample(&mut rng);
            let pl = phy.path_loss(v.distance(x0), real.is_los(vi as usize, x0_idx));
            interf += f * gain / pl;
        }
        let sinr = (f0 * phy.g_main / z0) / (interf + phy.ra_noise_over_gain);
        out[ui as usize] = Some(RaOutcome { collided, decoded: sinr >= phy.gamma_ra });
    }
    out
}

/// Data-phase result for one user.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DataOutcome {
    /// This user was the one its BS picked this cycle.
    pub scheduled: bool,
    /// Aligned-beam downlink SINR under the realized interference field;
    /// defined for every connected user (it equals the physical SINR when
    /// the user is scheduled, since a BS's own beam choice does not enter
    /// its user's interference), NaN otherwise.
    pub sinr: f64,
    /// Number of users sharing this user's serving BS (incl. itself);
    /// zero when not connected.
    pub cell_size: u32,
}

/// Downlink data phase: every BS with at least one connected user schedules
/// one of them uniformly at random and points its data beam there; the rest
/// stay silent. A user sees interference from each other active BS whose
/// beam sector covers it (zero BS side lobe), weighted by its own main/side
/// receive gain. The SINR is evaluated for every connected user with its own
/// serving beams aligned, which is the per-cycle conditional SINR a random
/// scheduler exposes.
pub fn run_data_phase(
    real: &NetworkRealization,
    cs: &[CsOutcome],
    ia_ok: &[bool],
    phy: &PhyParams,
) -> Vec<DataOutcome> {
    let nb = real.bs.len();
    let mut served: Vec<Vec<u32>> = vec![Vec::new(); nb];
    for (ui, outcome) in cs.iter().enumerate() {
        if ia_ok[ui] {
            if let Some(b) = outcome.serving {
                served[b as usize].push(ui as u32);
            }
        }
    }

    // (bs index, scheduled user, transmit beam sector).
    let mut active: Vec<(u32, u32, u32)> = Vec::new();
    let mut picked: Vec<Option<u32>> = vec![None; nb];
    for (bi, users) in served.iter().enumerate() {
        if users.is_empty() {
            continue;
        }
        let mut rng = substream(real.seed, DOM_SCHED, real.stream, bi as u64);
        let w = users[rng.random_range(0..users.len())];
        picked[bi] = Some(w);
        let beam =
            sector_index(real.bs[bi].angle_to(&real.users[w as usize]), phy.m_beams);
        active.push((bi as u32, w, beam));
    }

    let mut out =
        vec![DataOutcome { scheduled: false, sinr: f64::NAN, cell_size: 0 }; real.users.len()];
    for (x0_idx, users) in served.iter().enumerate() {
        for &ui in users {
            let u = &real.users[ui as usize];
            let x0 = &real.bs[x0_idx];
            let z0 = phy.path_loss(u.distance(x0), real.is_los(ui as usize, x0_idx));
            let rx_beam = sector_index(u.angle_to(x0), phy.n_data);
            let mut rng = substream(real.seed, DOM_DL_FADE, real.stream, ui as u64);
            let f0: f64 = Exp1.sample(&mut rng);
            let mut interf = 0.0;
            for &(yi, _, beam_y) in &active {
                if yi as usize == x0_idx {
                    continue;
                }
                let y = &real.bs[yi as usize];
                if sector_index(y.angle_to(u), phy.m_beams) != beam_y {
                    continue;
                }
                let gain = if sector_index(u.angle_to(y), phy.n_data) == rx_beam {
                    phy.g_main
                } else {
                    phy.g_side
                };
                let f: f64 = Exp1.sample(&mut rng);
                let pl = phy.path_loss(u.distance(y), real.is_los(ui as usize, yi as usize));
                interf += phy.m_gain * gain * f / pl;
            }
            let sinr = (phy.m_gain * phy.g_main * f0 / z0) / (interf + phy.dl_noise_over_power);
            out[ui as usize] = DataOutcome {
                scheduled: picked[x0_idx] == Some(ui),
                sinr,
                cell_size: users.len() as u32,
            };
        }
    }
    out
}

pub(crate) fn bootstrap_rng(seed: u64, replicate: u64) -> ChaCha8Rng {
    substream(seed, DOM_BOOT, replicate, 0)
}
