//! Quadrature-based evaluation of the access-protocol performance metrics:
//! per-sector detection, cell-search success, serving path-loss distribution,
//! preamble collision and decode probabilities, overall access success,
//! expected access delay, conditional downlink SINR distribution, and average
//! user-perceived throughput.
//!
//! The evaluation strategy is built around one observation: every outer
//! integral runs over the per-sector minimum path loss `z` against the same
//! density, and the cell-search tail function appears inside all of them.
//! The context therefore precomputes a fine composite grid over `z` carrying
//! cumulative tail integrals (so the tail function costs one quadrature panel
//! per call), plus a coarser node table reused by the access-success and
//! downlink-SINR integrals so that the zero-threshold identities hold to
//! round-off rather than to quadrature tolerance.

use std::sync::atomic::{AtomicU32, Ordering};
use std::sync::OnceLock;

use thiserror::Error;

use crate::model::{
    bs_gain_for_beams, user_gain_for_beams, BlockageModel, ModelError, Protocol, SystemConfig,
};
use crate::quad::{gk15, laplace_interference_pair, QuadError, QuadratureSpec};

/// Mean area bias of the serving cell relative to the typical cell under
/// nearest-point association.
const CELL_AREA_BIAS: f64 = 1.28;

#[derive(Debug, Clone, Error)]
pub enum AnalyticError {
    #[error(transparent)]
    Quad(#[from] QuadError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("domain error: {0}")]
    Domain(String),
}

/// Per-configuration analytic outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct IAMetrics {
    /// Probability of detecting the strongest BS within one search sector.
    pub p_cs_sector: f64,
    /// Cell-search success probability.
    pub p_cs: f64,
    /// Probability of no preamble collision.
    pub p_co: f64,
    /// Overall access success probability per cycle.
    pub eta_ia: f64,
    /// Expected access delay (s); `f64::INFINITY` when the user never connects.
    pub delay_s: f64,
    /// Fraction of the cycle spent on access signalling.
    pub overhead: f64,
    /// Average probability that a connected user is scheduled.
    pub sched_prob: f64,
    /// Average user-perceived downlink throughput (bit/s).
    pub upt_bps: f64,
    /// Diagnostics (quadrature fallbacks, truncation bounds, degeneracies).
    pub flags: Vec<String>,
}

/// Derived linear-domain constants shared by all evaluators.
#[derive(Debug, Clone)]
struct Derived {
    k_cs: u32,
    n_data: u32,
    q: u32,
    alpha_l: f64,
    alpha_n: f64,
    beta: f64,
    lambda: f64,
    lambda_u: f64,
    gamma_cs: f64,
    gamma_ra: f64,
    /// 2π λ / K_cs — radial intensity inside one search sector.
    sector_intensity: f64,
    /// λ / K_cs — planar density argument for the sector interference factor.
    sector_lambda: f64,
    /// σ² / (P_b · M_cs · G_u(2π/N_cs)): effective synchronization noise.
    cs_eff_noise: f64,
    /// σ² / (P_u · M_ra-gain · G_u(2π/N)): effective preamble noise.
    ra_eff_noise: f64,
    /// σ² / (P_b · M · G_u(2π/N)): effective downlink data noise.
    dl_eff_noise: f64,
    /// User data-beam side/main gain ratio g/G.
    gain_ratio: f64,
    /// λ / (M · K_cs): interferer density seen in the data phase.
    dl_lambda: f64,
    c_l: f64,
    c_n: f64,
    e_l: f64,
    e_n: f64,
}

/// Fine composite grid carrying the suffix integrals of P̃(z)·f(z).
#[derive(Debug, Clone)]
struct CsTables {
    grid: Vec<f64>,
    /// tail_from[i] = ∫_{grid[i]}^{z_max} P̃ f dz.
    tail_from: Vec<f64>,
    p_sector: f64,
    z_max: f64,
}

/// Shared node table for the access-success and downlink integrals.
#[derive(Debug, Clone)]
struct NodeTable {
    z: Vec<f64>,
    /// T(z) — detection tail at the node.
    tail: Vec<f64>,
    /// T(z) + 1 − P.
    tail_plus: Vec<f64>,
    /// K · P̃(z) · P_ra(z) · P_co · f(z) · w — everything Γ-independent.
    base: Vec<f64>,
    /// z · (effective downlink noise).
    z_noise: Vec<f64>,
    eta_ia: f64,
}

/// Immutable evaluation context: configuration, blockage model, protocol and
/// the cached tables. All methods are pure with respect to observable state;
/// the lazily built node table is safe under concurrent readers.
pub struct AnalyticContext {
    cfg: SystemConfig,
    model: BlockageModel,
    proto: Protocol,
    quad: QuadratureSpec,
    d: Derived,
    cs: CsTables,
    nodes: OnceLock<Result<NodeTable, AnalyticError>>,
    incidents: AtomicU32,
}

impl AnalyticContext {
    /// Build a context with default quadrature tolerances.
    pub fn new(
        cfg: SystemConfig,
        model: BlockageModel,
        proto: Protocol,
    ) -> Result<Self, AnalyticError> {
        Self::with_quadrature(cfg, model, proto, QuadratureSpec::default())
    }

    pub fn with_quadrature(
        cfg: SystemConfig,
        model: BlockageModel,
        proto: Protocol,
        quad: QuadratureSpec,
    ) -> Result<Self, AnalyticError> {
        cfg.validate()?;
        model.validate()?;
        quad.validate()?;
        if proto.k_cs() % proto.n_data() != 0 {
            return Err(AnalyticError::Domain(format!(
                "sector count {} not divisible by user data beams {}",
                proto.k_cs(),
                proto.n_data()
            )));
        }

        let k_cs = proto.k_cs();
        let n_data = proto.n_data();
        let q = proto.q();
        let lambda = cfg.lambda_bs_m2();
        let lambda_u = cfg.lambda_u_m2();
        let beta = cfg.beta();
        let noise = cfg.noise_mw();

        let g_cs_user = user_gain_for_beams(proto.n_cs, &cfg)?;
        let g_data = user_gain_for_beams(n_data, &cfg)?;
        let bs_cs = bs_gain_for_beams(proto.m_cs)?;
        let bs_ra = bs_gain_for_beams(proto.m_ra)?;
        let bs_data = bs_gain_for_beams(cfg.m_antennas)?;

        let alpha_l = cfg.alpha_los;
        let alpha_n = cfg.alpha_nlos;
        let sector_intensity = std::f64::consts::TAU * lambda / k_cs as f64;
        let d = Derived {
            k_cs,
            n_data,
            q,
            alpha_l,
            alpha_n,
            beta,
            lambda,
            lambda_u,
            gamma_cs: cfg.gamma_cs(),
            gamma_ra: cfg.gamma_ra(),
            sector_intensity,
            sector_lambda: lambda / k_cs as f64,
            cs_eff_noise: noise / (cfg.p_bs_mw() * bs_cs.main * g_cs_user.main),
            ra_eff_noise: noise / (cfg.p_user_mw() * bs_ra.main * g_data.main),
            dl_eff_noise: noise / (cfg.p_bs_mw() * bs_data.main * g_data.main),
            gain_ratio: g_data.side / g_data.main,
            dl_lambda: lambda / (cfg.m_antennas as f64 * k_cs as f64),
            c_l: sector_intensity / alpha_l * beta.powf(-2.0 / alpha_l),
            c_n: sector_intensity / alpha_n * beta.powf(-2.0 / alpha_n),
            e_l: 2.0 / alpha_l - 1.0,
            e_n: 2.0 / alpha_n - 1.0,
        };

        let mut ctx = AnalyticContext {
            cfg,
            model,
            proto,
            quad,
            d,
            cs: CsTables { grid: Vec::new(), tail_from: Vec::new(), p_sector: 0.0, z_max: 0.0 },
            nodes: OnceLock::new(),
            incidents: AtomicU32::new(0),
        };
        ctx.cs = ctx.build_cs_tables()?;
        Ok(ctx)
    }

    pub fn config(&self) -> &SystemConfig {
        &self.cfg
    }

    pub fn blockage(&self) -> &BlockageModel {
        &self.model
    }

    pub fn protocol(&self) -> &Protocol {
        &self.proto
    }

    // ----- minimum path loss inside one search sector ------------------

    /// Closed-form CCDF of the per-sector minimum path loss.
    pub fn min_pl_ccdf(&self, z: f64) -> f64 {
        if z <= 0.0 {
            return 1.0;
        }
        let d = &self.d;
        let r_l = (z / d.beta).powf(1.0 / d.alpha_l);
        let r_n = (z / d.beta).powf(1.0 / d.alpha_n);
        (-d.sector_intensity * (self.model.int_h_r(r_l) + self.model.int_nlos_r(r_n))).exp()
    }

    fn min_pl_pdf_raw(&self, z: f64) -> f64 {
        if z <= 0.0 {
            return 0.0;
        }
        let d = &self.d;
        let r_l = (z / d.beta).powf(1.0 / d.alpha_l);
        let r_n = (z / d.beta).powf(1.0 / d.alpha_n);
        let dens = d.c_l * z.powf(d.e_l) * self.model.los_probability(r_l)
            + d.c_n * z.powf(d.e_n) * (1.0 - self.model.los_probability(r_n));
        dens * self.min_pl_ccdf(z)
    }

    /// Density of the per-sector minimum path loss (LOS term + NLOS term,
    /// each damped by both void factors).
    pub fn min_pl_pdf(&self, z: f64) -> Result<f64, AnalyticError> {
        if !(z > 0.0) {
            return Err(AnalyticError::Domain(format!("path loss must be positive, got {z}")));
        }
        Ok(self.min_pl_pdf_raw(z))
    }

    // ----- conditional and per-sector detection ------------------------

    fn lenient(&self, res: Result<(f64, f64), QuadError>) -> (f64, f64) {
        match res {
            Ok(p) => p,
            Err(QuadError::NoConvergence { best, .. }) => {
                self.incidents.fetch_add(1, Ordering::Relaxed);
                (best, best)
            }
            Err(e) => panic!("internal quadrature misuse: {e}"),
        }
    }

    fn vu_pair(&self, z: f64, t: f64, lam: f64) -> (f64, f64) {
        self.lenient(laplace_interference_pair(z, t, lam, &self.model, &self.cfg, &self.quad))
    }

    fn cond_detection_raw(&self, z: f64) -> f64 {
        let d = &self.d;
        let noise_term = (-d.gamma_cs * z * d.cs_eff_noise).exp();
        let (v, _) = self.lenient(crate::quad::laplace_interference_pair(
            z,
            d.gamma_cs,
            d.sector_lambda,
            &self.model,
            &self.cfg,
            &self.quad,
        ));
        noise_term * v
    }

    /// Probability of detecting the minimum-path-loss BS of a sector given
    /// that minimum equals `z`.
    pub fn conditional_detection(&self, z: f64) -> Result<f64, AnalyticError> {
        if !(z > 0.0) {
            return Err(AnalyticError::Domain(format!("path loss must be positive, got {z}")));
        }
        Ok(self.cond_detection_raw(z))
    }

    fn tail_integrand(&self, z: f64) -> f64 {
        self.cond_detection_raw(z) * self.min_pl_pdf_raw(z)
    }

    fn build_cs_tables(&self) -> Result<CsTables, AnalyticError> {
        let beta = self.d.beta;

        // Upper truncation: the integrand is bounded by the minimum-path-loss
        // density, whose closed-form CCDF tells us where 1e-14 of mass is left.
        let mut z_max = beta * 4.0;
        for _ in 0..2000 {
            if self.min_pl_ccdf(z_max) < 1e-14 {
                break;
            }
            z_max *= 2.0;
        }

        let mut grid = Vec::with_capacity(700);
        grid.push(0.0);
        // Geometric head: captures the integrable z^(2/alpha - 1) singularity.
        for k in (0..=40).rev() {
            grid.push(beta * 0.5f64.powi(k));
        }
        // Log-uniform body at 40 segments per decade.
        let decades = (z_max / beta).log10();
        let n_body = (decades * 40.0).ceil() as usize;
        for i in 1..=n_body {
            grid.push(beta * 10f64.powf(decades * i as f64 / n_body as f64));
        }
        insert_breakpoints(&mut grid, &self.pl_breakpoints(), z_max);

        let n = grid.len();
        let mut seg = vec![0.0f64; n - 1];
        for i in 0..n - 1 {
            let (v, _) = gk15(&|z| self.tail_integrand(z), grid[i], grid[i + 1]);
            seg[i] = v.max(0.0);
        }
        let mut tail_from = vec![0.0f64; n];
        for i in (0..n - 1).rev() {
            tail_from[i] = tail_from[i + 1] + seg[i];
        }
        let p_sector = tail_from[0].min(1.0);
        Ok(CsTables { grid, tail_from, p_sector, z_max })
    }

    /// Path-loss values where the blockage model makes the integrands kink.
    fn pl_breakpoints(&self) -> Vec<f64> {
        match self.model.breakpoint() {
            Some(rc) => {
                let d = &self.d;
                vec![d.beta * rc.powf(d.alpha_l), d.beta * rc.powf(d.alpha_n)]
            }
            None => Vec::new(),
        }
    }

    /// Probability of detecting the strongest BS of the typical sector.
    pub fn sector_detection_prob(&self) -> f64 {
        self.cs.p_sector
    }

    /// Tail variant: ∫_{z0}^∞ of the conditional detection weighted by the
    /// minimum-path-loss density. Nonincreasing in `z0`.
    pub fn sector_detection_tail(&self, z0: f64) -> f64 {
        if z0 <= 0.0 {
            return self.cs.p_sector;
        }
        if z0 >= self.cs.z_max {
            return 0.0;
        }
        let grid = &self.cs.grid;
        let i = grid.partition_point(|&g| g <= z0) - 1;
        let hi = grid[i + 1];
        if z0 >= hi {
            return self.cs.tail_from[i + 1];
        }
        let (v, _) = gk15(&|z| self.tail_integrand(z), z0, hi);
        (self.cs.tail_from[i + 1] + v.max(0.0)).min(self.cs.p_sector)
    }

    // ----- cell search --------------------------------------------------

    /// Overall cell-search success: at least one of the K_cs independent
    /// sectors is detected.
    pub fn cell_search_success(&self) -> f64 {
        1.0 - (1.0 - self.cs.p_sector).powi(self.d.k_cs as i32)
    }

    /// CCDF of the serving path loss; the limit at z0 → ∞ equals the
    /// cell-search failure probability (mass at infinity).
    pub fn serving_pl_ccdf(&self, z0: f64) -> f64 {
        let t = if z0.is_infinite() { 0.0 } else { self.sector_detection_tail(z0) };
        (t + 1.0 - self.cs.p_sector).powi(self.d.k_cs as i32)
    }

    /// Density of the serving path loss; integrates to the cell-search
    /// success probability (the defect is the mass at infinity).
    pub fn serving_pl_pdf(&self, z0: f64) -> Result<f64, AnalyticError> {
        if !(z0 > 0.0) {
            return Err(AnalyticError::Domain(format!("path loss must be positive, got {z0}")));
        }
        let k = self.d.k_cs as i32;
        let t_plus = self.sector_detection_tail(z0) + 1.0 - self.cs.p_sector;
        Ok(self.d.k_cs as f64 * t_plus.powi(k - 1) * self.tail_integrand(z0))
    }

    // ----- random access -------------------------------------------------

    /// Probability that no other user picks the same preamble towards the
    /// same serving BS under the same receive beam.
    pub fn no_collision_prob(&self) -> f64 {
        let d = &self.d;
        let contenders = d.lambda_u * self.cell_search_success();
        (-CELL_AREA_BIAS * contenders / (d.lambda * self.cfg.n_pa as f64 * self.proto.m_ra as f64))
            .exp()
    }

    /// Probability that the preamble of a user with serving path loss `z0`
    /// is decoded. Zero at infinite path loss (cell search failed).
    pub fn ra_decode_prob(&self, z0: f64) -> Result<f64, AnalyticError> {
        if z0.is_infinite() {
            return Ok(0.0);
        }
        if !(z0 > 0.0) {
            return Err(AnalyticError::Domain(format!("path loss must be positive, got {z0}")));
        }
        Ok(self.ra_decode_raw(z0))
    }

    fn ra_decode_raw(&self, z0: f64) -> f64 {
        let d = &self.d;
        let p_hat = self.cell_search_success();
        let n = d.n_data as f64;
        let m_ra = self.proto.m_ra as f64;
        let n_pa = self.cfg.n_pa as f64;
        // Same-preamble contenders, split by whether their transmit main lobe
        // covers the serving BS (probability 1/N).
        let lam_main = d.lambda_u * p_hat / (n * m_ra * n_pa);
        let lam_side = (1.0 - 1.0 / n) * d.lambda_u * p_hat / (m_ra * n_pa);
        let noise_term = (-d.gamma_ra * z0 * d.ra_eff_noise).exp();
        let (_, u_main) = self.vu_pair(z0, d.gamma_ra, lam_main);
        let u_side = if lam_side == 0.0 {
            1.0
        } else {
            self.vu_pair(z0, d.gain_ratio * d.gamma_ra, lam_side).1
        };
        noise_term * u_main * u_side
    }

    // ----- shared node table ----------------------------------------------

    fn node_table(&self) -> Result<&NodeTable, AnalyticError> {
        self.nodes
            .get_or_init(|| self.build_node_table())
            .as_ref()
            .map_err(|e| e.clone())
    }

    fn build_node_table(&self) -> Result<NodeTable, AnalyticError> {
        let beta = self.d.beta;
        let z_max = self.cs.z_max;
        let mut grid = Vec::with_capacity(120);
        grid.push(0.0);
        for k in (0..=10).rev() {
            grid.push(beta * 0.25f64.powi(k));
        }
        let decades = (z_max / beta).log10();
        let n_body = (decades * 5.0).ceil() as usize;
        for i in 1..=n_body {
            grid.push(beta * 10f64.powf(decades * i as f64 / n_body as f64));
        }
        insert_breakpoints(&mut grid, &self.pl_breakpoints(), z_max);

        let p_co = self.no_collision_prob();
        let k_f = self.d.k_cs as f64;
        let one_minus_p = 1.0 - self.cs.p_sector;

        let mut t = NodeTable {
            z: Vec::new(),
            tail: Vec::new(),
            tail_plus: Vec::new(),
            base: Vec::new(),
            z_noise: Vec::new(),
            eta_ia: 0.0,
        };
        for i in 0..grid.len() - 1 {
            for (z, w) in gk15_nodes(grid[i], grid[i + 1]) {
                let tail = self.sector_detection_tail(z);
                let base = k_f * self.cond_detection_raw(z) * self.ra_decode_raw(z) * p_co
                    * self.min_pl_pdf_raw(z)
                    * w;
                t.z.push(z);
                t.tail.push(tail);
                t.tail_plus.push(tail + one_minus_p);
                t.base.push(base);
                t.z_noise.push(z * self.d.dl_eff_noise);
            }
        }
        let k = self.d.k_cs as i32;
        t.eta_ia = t
            .base
            .iter()
            .zip(&t.tail_plus)
            .map(|(b, tp)| b * tp.powi(k - 1))
            .sum::<f64>()
            .clamp(0.0, 1.0);
        Ok(t)
    }

    // ----- access success, delay ------------------------------------------

    /// Per-cycle access success probability (cell search and random access
    /// both succeed).
    pub fn ia_success(&self) -> Result<f64, AnalyticError> {
        Ok(self.node_table()?.eta_ia)
    }

    /// Expected access delay (s): geometric retry over cycles plus the
    /// per-cycle signalling duration. Infinite when the user never connects.
    pub fn expected_delay(&self) -> Result<f64, AnalyticError> {
        let eta = self.ia_success()?;
        Ok(expected_delay_from_eta(eta, &self.cfg, &self.proto))
    }

    // ----- downlink SINR and throughput -------------------------------------

    /// Conditional CCDF of the downlink data SINR given successful access,
    /// evaluated at linear threshold `gamma`.
    pub fn dl_sinr_ccdf(&self, gamma: f64) -> Result<f64, AnalyticError> {
        if !(gamma >= 0.0) {
            return Err(AnalyticError::Domain(format!("SINR threshold must be >= 0, got {gamma}")));
        }
        let nodes = self.node_table()?;
        if nodes.eta_ia <= 0.0 {
            return Err(AnalyticError::Domain(
                "conditional SINR undefined: access never succeeds".into(),
            ));
        }
        Ok(self.dl_ccdf_raw(gamma, nodes))
    }

    fn dl_ccdf_raw(&self, gamma: f64, nodes: &NodeTable) -> f64 {
        if gamma == 0.0 {
            return 1.0;
        }
        let d = &self.d;
        let qm1 = (d.q - 1) as i32;
        let kmq = (d.k_cs - d.q) as i32;
        let one_minus_p = 1.0 - self.cs.p_sector;
        let mut acc = 0.0;
        for i in 0..nodes.z.len() {
            let base = nodes.base[i];
            if base == 0.0 {
                continue;
            }
            let z = nodes.z[i];
            let tail = nodes.tail[i];
            let (v_main, u_main) = self.vu_pair(z, gamma, d.dl_lambda);
            let mut term = (-gamma * nodes.z_noise[i]).exp() * v_main * base;
            if qm1 > 0 {
                term *= (v_main * tail + u_main * one_minus_p).powi(qm1);
            }
            if kmq > 0 {
                let (v_side, u_side) = self.vu_pair(z, d.gain_ratio * gamma, d.dl_lambda);
                term *= (tail * v_side + one_minus_p * u_side).powi(kmq);
            }
            acc += term;
        }
        (acc / nodes.eta_ia).clamp(0.0, 1.0)
    }

    /// Conditional downlink SINR CCDF sampled at the given dB thresholds.
    pub fn dl_sinr_ccdf_curve(&self, gammas_db: &[f64]) -> Result<Vec<(f64, f64)>, AnalyticError> {
        gammas_db
            .iter()
            .map(|&g_db| Ok((g_db, self.dl_sinr_ccdf(crate::model::db_to_linear(g_db))?)))
            .collect()
    }

    /// Average user-perceived downlink throughput (bit/s).
    pub fn average_upt(&self) -> Result<f64, AnalyticError> {
        Ok(self.upt_with_diag()?.0)
    }

    fn upt_with_diag(&self) -> Result<(f64, Vec<String>), AnalyticError> {
        let mut flags = Vec::new();
        let overhead = self.proto.overhead(&self.cfg);
        let budget = (1.0 - overhead).max(0.0);
        if budget == 0.0 {
            return Ok((0.0, flags));
        }
        let eta = self.ia_success()?;
        if eta <= 0.0 {
            flags.push("never_connects".into());
            return Ok((0.0, flags));
        }
        let nodes = self.node_table()?;

        // Spectral-efficiency integral ∫ P_DL(Γ)/(1+Γ) dΓ via Γ = e^s − 1,
        // truncated once the conditional CCDF falls below 1e-6.
        let mut s_max = 1.0f64;
        let mut tail_ccdf = 1.0;
        for _ in 0..40 {
            tail_ccdf = self.dl_ccdf_raw(s_max.exp_m1(), nodes);
            if tail_ccdf < 1e-6 {
                break;
            }
            s_max *= 1.5;
        }
        if tail_ccdf >= 1e-6 {
            flags.push(format!("rate_integral_truncated_at_ccdf={tail_ccdf:.2e}"));
        }
        let spec = QuadratureSpec::outer();
        let res = crate::quad::integrate(
            |s| self.dl_ccdf_raw(s.exp_m1(), nodes),
            0.0,
            s_max,
            &spec,
        );
        let (rate_nats, _) = self.lenient(res.map(|r| (r.0, r.1)));
        let tail_bound = tail_ccdf * s_max;
        if tail_bound > 1e-6 * rate_nats {
            flags.push(format!("rate_tail_bound={tail_bound:.2e}"));
        }

        let d = &self.d;
        let sched = 1.0 / (1.0 + CELL_AREA_BIAS * d.lambda_u * eta / d.lambda);
        let upt = budget * eta * sched * self.cfg.bandwidth_hz / std::f64::consts::LN_2 * rate_nats;
        let incidents = self.incidents.load(Ordering::Relaxed);
        if incidents > 0 {
            flags.push(format!("quadrature_fallbacks={incidents}"));
        }
        Ok((upt, flags))
    }

    /// Average scheduling probability for a connected user.
    pub fn sched_prob(&self) -> Result<f64, AnalyticError> {
        let eta = self.ia_success()?;
        Ok(1.0 / (1.0 + CELL_AREA_BIAS * self.d.lambda_u * eta / self.d.lambda))
    }

    /// Evaluate the full metric set.
    pub fn metrics(&self) -> Result<IAMetrics, AnalyticError> {
        let eta = self.ia_success()?;
        let (upt, mut flags) = self.upt_with_diag()?;
        let delay = expected_delay_from_eta(eta, &self.cfg, &self.proto);
        if delay.is_infinite() && !flags.iter().any(|f| f == "never_connects") {
            flags.push("never_connects".into());
        }
        Ok(IAMetrics {
            p_cs_sector: self.sector_detection_prob(),
            p_cs: self.cell_search_success(),
            p_co: self.no_collision_prob(),
            eta_ia: eta,
            delay_s: delay,
            overhead: self.proto.overhead(&self.cfg),
            sched_prob: self.sched_prob()?,
            upt_bps: upt,
            flags,
        })
    }

    /// Raw factors of the downlink integrand at (z, gamma), for the
    /// expanded-form cross-check: (v_main, u_main, v_side, u_side, tail,
    /// 1 − P, noise factor).
    pub fn dl_integrand_factors(
        &self,
        z: f64,
        gamma: f64,
    ) -> Result<(f64, f64, f64, f64, f64, f64, f64), AnalyticError> {
        if !(z > 0.0 && gamma > 0.0) {
            return Err(AnalyticError::Domain("z and gamma must be positive".into()));
        }
        let d = &self.d;
        let (v_main, u_main) = self.vu_pair(z, gamma, d.dl_lambda);
        let (v_side, u_side) = self.vu_pair(z, d.gain_ratio * gamma, d.dl_lambda);
        let tail = self.sector_detection_tail(z);
        let noise = (-gamma * z * d.dl_eff_noise).exp();
        Ok((v_main, u_main, v_side, u_side, tail, 1.0 - self.cs.p_sector, noise))
    }
}

/// Expected access delay for a given per-cycle success probability.
pub fn expected_delay_from_eta(eta: f64, cfg: &SystemConfig, proto: &Protocol) -> f64 {
    if eta <= 0.0 {
        return f64::INFINITY;
    }
    (1.0 / eta - 1.0) * cfg.cycle_t_s + proto.ia_duration_s(cfg)
}

/// The 15 Gauss–Kronrod nodes and weights scaled to (a, b).
fn gk15_nodes(a: f64, b: f64) -> Vec<(f64, f64)> {
    const XGK: [f64; 8] = [
        0.991_455_371_120_812_6,
        0.949_107_912_342_758_5,
        0.864_864_423_359_769_1,
        0.741_531_185_599_394_4,
        0.586_087_235_467_691_1,
        0.405_845_151_377_397_17,
        0.207_784_955_007_898_47,
        0.0,
    ];
    const WGK: [f64; 8] = [
        0.022_935_322_010_529_225,
        0.063_092_092_629_978_55,
        0.104_790_010_322_250_18,
        0.140_653_259_715_525_92,
        0.169_004_726_639_267_9,
        0.190_350_578_064_785_4,
        0.204_432_940_075_298_9,
        0.209_482_141_084_727_83,
    ];
    let centre = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut out = Vec::with_capacity(15);
    for j in 0..7 {
        out.push((centre - half * XGK[j], WGK[j] * half));
    }
    out.push((centre, WGK[7] * half));
    for j in (0..7).rev() {
        out.push((centre + half * XGK[j], WGK[j] * half));
    }
    out
}

fn insert_breakpoints(grid: &mut Vec<f64>, breaks: &[f64], z_max: f64) {
    for &b in breaks {
        if b > 0.0 && b < z_max {
            grid.push(b);
        }
    }
    grid.sort_by(f64::total_cmp);
    grid.dedup();
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ProtocolKind;

    fn ctx_with(m: u32, n: u32, model: BlockageModel, kind: ProtocolKind) -> AnalyticContext {
        let cfg = SystemConfig { m_antennas: m, n_antennas: n, ..SystemConfig::default() };
        let proto = Protocol::new(kind, &cfg).unwrap();
        AnalyticContext::new(cfg, model, proto).unwrap()
    }

    #[test]
    fn pdf_normalizes_over_full_support() {
        // Against the closed-form CCDF: total mass 1 − lim CCDF = 1.
        for model in [
            BlockageModel::LosBall { radius_rc_m: 100.0, prob_p: 0.5 },
            BlockageModel::Exponential { mu_m: 50.0 },
        ] {
            let ctx = ctx_with(8, 4, model, ProtocolKind::Baseline);
            let spec = QuadratureSpec { max_subdivisions: 600, ..QuadratureSpec::default() };
            let beta = ctx.cfg.beta();
            let (head, _) =
                crate::quad::integrate(|z| ctx.min_pl_pdf_raw(z), 0.0, beta, &spec).unwrap();
            let (body, _) = crate::quad::integrate_split(
                |z| ctx.min_pl_pdf_raw(z),
                beta,
                ctx.cs.z_max,
                &ctx.pl_breakpoints(),
                &spec,
            )
            .unwrap();
            let total = head + body;
            assert!((total - 1.0).abs() < 1e-6, "{model:?}: mass {total}");
        }
    }

    #[test]
    fn pdf_matches_ccdf_derivative() {
        let ctx = ctx_with(8, 4, BlockageModel::Exponential { mu_m: 100.0 }, ProtocolKind::Baseline);
        for z_db in [70.0, 90.0, 110.0, 140.0] {
            let z = crate::model::db_to_linear(z_db);
            let h = z * 1e-6;
            let numeric = (ctx.min_pl_ccdf(z - h) - ctx.min_pl_ccdf(z + h)) / (2.0 * h);
            let pdf = ctx.min_pl_pdf(z).unwrap();
            assert!(
                (numeric - pdf).abs() <= 1e-6 * pdf.abs().max(1e-300),
                "z={z_db} dB: derivative {numeric} vs pdf {pdf}"
            );
        }
    }

    #[test]
    fn detection_tail_limits() {
        let ctx = ctx_with(8, 4, BlockageModel::default(), ProtocolKind::Baseline);
        let p = ctx.sector_detection_prob();
        assert!(p > 0.0 && p < 1.0);
        // Full support gives the sector probability; far tail gives zero.
        assert_eq!(ctx.sector_detection_tail(0.0), p);
        assert!(ctx.sector_detection_tail(ctx.cs.z_max * 2.0) == 0.0);
        // Nonincreasing in z0.
        let mut prev = f64::INFINITY;
        for z_db in [60.0, 80.0, 100.0, 120.0, 140.0, 160.0] {
            let t = ctx.sector_detection_tail(crate::model::db_to_linear(z_db));
            assert!(t <= prev + 1e-15);
            prev = t;
        }
        // Tail at the reference loss is within the sub-reference mass of the
        // full sector probability.
        let at_beta = ctx.sector_detection_tail(ctx.cfg.beta());
        assert!((at_beta - p).abs() < 1e-3);
    }

    #[test]
    fn conditional_detection_decays() {
        let ctx = ctx_with(8, 4, BlockageModel::default(), ProtocolKind::Baseline);
        let huge = crate::model::db_to_linear(230.0);
        assert!(ctx.conditional_detection(huge).unwrap() < 1e-12);
        assert!(ctx.conditional_detection(ctx.cfg.beta()).unwrap() > 0.9);
        assert!(ctx.conditional_detection(0.0).is_err());
    }

    #[test]
    fn zero_cs_threshold_gives_certain_detection() {
        let cfg = SystemConfig {
            gamma_cs_db: f64::NEG_INFINITY,
            m_antennas: 8,
            n_antennas: 4,
            ..SystemConfig::default()
        };
        let proto = Protocol::new(ProtocolKind::Baseline, &cfg).unwrap();
        let ctx = AnalyticContext::new(cfg, BlockageModel::default(), proto).unwrap();
        let z = ctx.cfg.beta() * 1e3;
        assert_eq!(ctx.conditional_detection(z).unwrap(), 1.0);
        assert!((ctx.sector_detection_prob() - 1.0).abs() < 1e-9);
        assert!((ctx.cell_search_success() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn serving_ccdf_boundary_and_mass() {
        let ctx = ctx_with(8, 4, BlockageModel::default(), ProtocolKind::Baseline);
        // At the reference loss the CCDF is 1 up to the sub-reference mass.
        assert!((ctx.serving_pl_ccdf(ctx.cfg.beta()) - 1.0).abs() < 1e-2);
        assert!(ctx.serving_pl_ccdf(1e-12) <= 1.0);
        // Mass at infinity equals the cell-search failure probability.
        let lim = ctx.serving_pl_ccdf(f64::INFINITY);
        assert!((lim - (1.0 - ctx.cell_search_success())).abs() < 1e-9);
    }

    #[test]
    fn collision_probability_limits() {
        let mut cfg = SystemConfig { m_antennas: 8, n_antennas: 4, ..SystemConfig::default() };
        cfg.lambda_u_per_km2 = 1e-9;
        let proto = Protocol::new(ProtocolKind::Baseline, &cfg).unwrap();
        let ctx = AnalyticContext::new(cfg, BlockageModel::default(), proto).unwrap();
        assert!((ctx.no_collision_prob() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn ra_decode_edge_cases() {
        let ctx = ctx_with(8, 4, BlockageModel::default(), ProtocolKind::Baseline);
        assert_eq!(ctx.ra_decode_prob(f64::INFINITY).unwrap(), 0.0);
        assert!(ctx.ra_decode_prob(-1.0).is_err());
        let cfg = SystemConfig {
            gamma_ra_db: f64::NEG_INFINITY,
            m_antennas: 8,
            n_antennas: 4,
            ..SystemConfig::default()
        };
        let proto = Protocol::new(ProtocolKind::Baseline, &cfg).unwrap();
        let free = AnalyticContext::new(cfg, BlockageModel::default(), proto).unwrap();
        assert_eq!(free.ra_decode_prob(free.cfg.beta() * 100.0).unwrap(), 1.0);
    }

    #[test]
    fn ia_success_reduces_to_cell_search_without_ra_losses() {
        // No collision pressure, zero decode threshold: access success must
        // equal cell-search success.
        let cfg = SystemConfig {
            gamma_ra_db: f64::NEG_INFINITY,
            lambda_u_per_km2: 1e-9,
            m_antennas: 8,
            n_antennas: 4,
            ..SystemConfig::default()
        };
        let proto = Protocol::new(ProtocolKind::Baseline, &cfg).unwrap();
        for model in [
            BlockageModel::LosBall { radius_rc_m: 100.0, prob_p: 0.5 },
            BlockageModel::Exponential { mu_m: 100.0 },
        ] {
            let ctx = AnalyticContext::new(cfg.clone(), model, proto).unwrap();
            let eta = ctx.ia_success().unwrap();
            let p_cs = ctx.cell_search_success();
            assert!(
                (eta - p_cs).abs() < 1e-6,
                "{model:?}: eta {eta} vs cell search {p_cs}"
            );
        }
    }

    #[test]
    fn consistency_chain() {
        for kind in ProtocolKind::ALL {
            let ctx = ctx_with(8, 4, BlockageModel::default(), kind);
            let eta = ctx.ia_success().unwrap();
            let p_cs = ctx.cell_search_success();
            assert!(eta >= 0.0 && eta <= p_cs + 1e-9 && p_cs <= 1.0, "{kind:?}");
            let delay = ctx.expected_delay().unwrap();
            assert!(delay >= ctx.proto.ia_duration_s(&ctx.cfg));
        }
    }

    #[test]
    fn delay_formula() {
        let cfg = SystemConfig { m_antennas: 8, n_antennas: 4, ..SystemConfig::default() };
        let proto = Protocol::new(ProtocolKind::Baseline, &cfg).unwrap();
        // Perfect access: delay is the per-cycle signalling duration only.
        let d = expected_delay_from_eta(1.0, &cfg, &proto);
        assert!((d - proto.ia_duration_s(&cfg)).abs() < 1e-15);
        assert!(expected_delay_from_eta(0.0, &cfg, &proto).is_infinite());
        // Decreasing in eta.
        assert!(expected_delay_from_eta(0.5, &cfg, &proto) > expected_delay_from_eta(0.9, &cfg, &proto));
    }

    #[test]
    fn dl_ccdf_is_a_conditional_ccdf() {
        let ctx = ctx_with(8, 4, BlockageModel::default(), ProtocolKind::Baseline);
        // Unit value at zero threshold by grid consistency.
        let near_zero = ctx.dl_sinr_ccdf(1e-12).unwrap();
        assert!((near_zero - 1.0).abs() < 1e-4, "{near_zero}");
        let mut prev = f64::INFINITY;
        for g_db in [-10.0, -5.0, 0.0, 5.0, 10.0, 15.0, 20.0, 30.0] {
            let c = ctx.dl_sinr_ccdf(crate::model::db_to_linear(g_db)).unwrap();
            assert!((0.0..=1.0).contains(&c));
            assert!(c <= prev + 1e-12, "not monotone at {g_db} dB");
            prev = c;
        }
        assert!(ctx.dl_sinr_ccdf(-0.5).is_err());
    }

    #[test]
    fn upt_zero_when_overhead_saturates() {
        let cfg = SystemConfig {
            cycle_t_s: 1e-5,
            m_antennas: 8,
            n_antennas: 4,
            ..SystemConfig::default()
        };
        let proto = Protocol::new(ProtocolKind::Baseline, &cfg).unwrap();
        assert_eq!(proto.overhead(&cfg), 1.0);
        let ctx = AnalyticContext::new(cfg, BlockageModel::default(), proto).unwrap();
        assert_eq!(ctx.average_upt().unwrap(), 0.0);
    }
}
