#![allow(dead_code)]

//! Shared Monte Carlo oracles and cached simulation summaries for the
//! integration tests. Everything here works directly on sampled point
//! processes, independent of the quadrature path it is used to validate.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Poisson};

use mmwave_ia_core::sim::{
    run_cell_search, run_data_phase, run_random_access, sample_realization, PhyParams,
};
use mmwave_ia_core::{BlockageModel, Protocol, ProtocolKind, SimulationConfig, SystemConfig};

pub fn cfg_mn(m: u32, n: u32) -> SystemConfig {
    SystemConfig { m_antennas: m, n_antennas: n, ..SystemConfig::default() }
}

/// Independent sector sampler: BS process restricted to one search sector of
/// angle 2π/k, truncated at `r_max` metres (far contributions are orders of
/// magnitude below the effective noise floor).
pub struct SectorDraw {
    /// (distance, LOS flag, path loss) of every BS in the sector.
    pub links: Vec<(f64, bool, f64)>,
}

pub fn draw_sector(
    cfg: &SystemConfig,
    model: &BlockageModel,
    k: u32,
    r_max: f64,
    rng: &mut ChaCha8Rng,
) -> SectorDraw {
    let area = std::f64::consts::PI * r_max * r_max / k as f64;
    let mean = cfg.lambda_bs_m2() * area;
    let n = if mean > 0.0 { Poisson::new(mean).unwrap().sample(rng) as usize } else { 0 };
    let beta = cfg.beta();
    let mut links = Vec::with_capacity(n);
    for _ in 0..n {
        // Uniform radius in a disc sector: r = r_max * sqrt(u).
        let r = r_max * rng.random::<f64>().sqrt();
        let los = rng.random::<f64>() < model.los_probability(r);
        let alpha = if los { cfg.alpha_los } else { cfg.alpha_nlos };
        links.push((r, los, beta * r.powf(alpha)));
    }
    links.sort_by(|a, b| a.2.total_cmp(&b.2));
    SectorDraw { links }
}

/// Monte Carlo estimate (mean, standard error) of the conditional
/// interference Laplace factor over points of planar density `lam` whose
/// path loss exceeds `z` (`tail` = true) or over the whole process.
pub fn mc_laplace(
    cfg: &SystemConfig,
    model: &BlockageModel,
    z: f64,
    t: f64,
    lam_m2: f64,
    tail: bool,
    draws: usize,
    seed: u64,
) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let beta = cfg.beta();
    let r_l = (z / beta).powf(1.0 / cfg.alpha_los);
    let r_n = (z / beta).powf(1.0 / cfg.alpha_nlos);
    // Radius where even the aggregate far-field mean is negligible.
    let r_max = 4000.0f64.max(4.0 * r_l).max(4.0 * r_n);
    let area = std::f64::consts::PI * r_max * r_max;
    let mean_pts = lam_m2 * area;

    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..draws {
        let n = if mean_pts > 0.0 { Poisson::new(mean_pts).unwrap().sample(&mut rng) as usize } else { 0 };
        let mut log_prod = 0.0;
        for _ in 0..n {
            let r = r_max * rng.random::<f64>().sqrt();
            let los = rng.random::<f64>() < model.los_probability(r);
            let (alpha, r_min) =
                if los { (cfg.alpha_los, r_l) } else { (cfg.alpha_nlos, r_n) };
            if tail && r < r_min {
                continue;
            }
            let l = beta * r.powf(alpha);
            // Expected Rayleigh-fading factor l/(l + t z).
            log_prod += (l / (l + t * z)).ln();
        }
        let v = log_prod.exp();
        sum += v;
        sum_sq += v * v;
    }
    let mean = sum / draws as f64;
    let var = (sum_sq / draws as f64 - mean * mean).max(0.0);
    (mean, (var / draws as f64).sqrt())
}

/// Per-sector (minimum path loss, detected) samples from the sector oracle.
pub fn mc_sector_detection(
    cfg: &SystemConfig,
    model: &BlockageModel,
    proto: &Protocol,
    draws: usize,
    seed: u64,
) -> Vec<(f64, bool)> {
    let phy = PhyParams::new(cfg, proto).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(draws);
    for _ in 0..draws {
        let sector = draw_sector(cfg, model, phy.k_cs, 4000.0, &mut rng);
        if sector.links.is_empty() {
            continue;
        }
        let z1 = sector.links[0].2;
        let f0: f64 = Exp1.sample(&mut rng);
        let mut interf = 0.0;
        for &(_, _, pl) in &sector.links[1..] {
            let f: f64 = Exp1.sample(&mut rng);
            interf += f / pl;
        }
        let sinr = (f0 / z1) / (interf + phy.cs_eff_noise);
        out.push((z1, sinr >= phy.gamma_cs));
    }
    out
}

/// Two-sided Kolmogorov–Smirnov distance between an empirical sample and a
/// reference CDF.
pub fn ks_distance(samples: &mut [f64], cdf: impl Fn(f64) -> f64) -> f64 {
    samples.sort_by(f64::total_cmp);
    let n = samples.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in samples.iter().enumerate() {
        let c = cdf(x);
        d = d.max((c - i as f64 / n).abs()).max(((i + 1) as f64 / n - c).abs());
    }
    d
}

/// Condensed per-combo records from a full desk-scale simulation, shared
/// across the cross-validation tests.
pub struct SimSummary {
    /// Per combo: serving path loss of interior users (infinite on failure).
    pub z0: Vec<Vec<f64>>,
    /// Per combo: (z0, collided, decoded) of interior cell-search survivors.
    pub ra: Vec<Vec<(f64, bool, bool)>>,
    /// Per combo: conditional data SINR of interior connected users.
    pub dl: Vec<Vec<f64>>,
    /// Per combo: (interior users, cs successes, access successes).
    pub counts: Vec<(u32, u32, u32)>,
    /// Per combo: summed serving-cell size over interior connected users.
    pub load: Vec<f64>,
}

impl SimSummary {
    pub fn cs_rate(&self) -> f64 {
        let (mut n, mut k) = (0u64, 0u64);
        for &(ni, nc, _) in &self.counts {
            n += ni as u64;
            k += nc as u64;
        }
        k as f64 / n as f64
    }

    pub fn eta_ia(&self) -> f64 {
        let (mut n, mut k) = (0u64, 0u64);
        for &(ni, _, na) in &self.counts {
            n += ni as u64;
            k += na as u64;
        }
        k as f64 / n as f64
    }

    pub fn p_co(&self) -> f64 {
        let (mut n, mut k) = (0u64, 0u64);
        for combo in &self.ra {
            for &(_, collided, _) in combo {
                n += 1;
                if !collided {
                    k += 1;
                }
            }
        }
        k as f64 / n as f64
    }

    /// Scheduling share of the typical connected user: inverse mean load of
    /// its (size-biased) serving cell.
    pub fn sched_prob(&self) -> f64 {
        let mut n = 0u64;
        let mut load = 0.0;
        for (&(_, _, na), &l) in self.counts.iter().zip(&self.load) {
            n += na as u64;
            load += l;
        }
        n as f64 / load
    }

    pub fn dl_ccdf(&self, gamma: f64) -> f64 {
        let (mut n, mut k) = (0u64, 0u64);
        for combo in &self.dl {
            for &s in combo {
                n += 1;
                if s >= gamma {
                    k += 1;
                }
            }
        }
        k as f64 / n as f64
    }

    /// Empirical serving path-loss CCDF over interior users.
    pub fn z0_ccdf(&self, z: f64) -> f64 {
        let (mut n, mut k) = (0u64, 0u64);
        for combo in &self.z0 {
            for &v in combo {
                n += 1;
                if v >= z {
                    k += 1;
                }
            }
        }
        k as f64 / n as f64
    }

    /// Decode frequency among cell-search survivors with z0 in [lo, hi).
    pub fn decode_freq_in(&self, lo: f64, hi: f64) -> (f64, usize) {
        let (mut n, mut k) = (0u64, 0u64);
        for combo in &self.ra {
            for &(z0, _, decoded) in combo {
                if z0 >= lo && z0 < hi {
                    n += 1;
                    if decoded {
                        k += 1;
                    }
                }
            }
        }
        (k as f64 / n.max(1) as f64, n as usize)
    }

    /// Simulated user-perceived throughput: per-cycle budget × measured
    /// access success × measured scheduling share × mean conditional
    /// spectral efficiency.
    pub fn upt(&self, cfg: &SystemConfig, proto: &Protocol) -> f64 {
        let mut acc = 0.0;
        for combo in &self.dl {
            for &s in combo {
                acc += (1.0 + s).log2();
            }
        }
        let n_ia: u64 = self.counts.iter().map(|&(_, _, na)| na as u64).sum();
        let rate = acc / n_ia as f64;
        (1.0 - proto.overhead(cfg)).max(0.0)
            * self.eta_ia()
            * self.sched_prob()
            * cfg.bandwidth_hz
            * rate
    }
}

pub fn run_sim_summary(
    cfg: &SystemConfig,
    model: &BlockageModel,
    proto: &Protocol,
    sim: &SimulationConfig,
) -> SimSummary {
    let phy = PhyParams::new(cfg, proto).unwrap();
    let (nb, nu) = sim.draws();
    let lo = sim.margin_m();
    let hi = sim.area_m() - sim.margin_m();
    let mut out = SimSummary {
        z0: Vec::new(),
        ra: Vec::new(),
        dl: Vec::new(),
        counts: Vec::new(),
        load: Vec::new(),
    };
    for c in 0..(nb as u64 * nu as u64) {
        let real = sample_realization(cfg, model, sim, c);
        let cs = run_cell_search(&real, &phy);
        let ra = run_random_access(&real, &cs, &phy);
        let ia_ok: Vec<bool> =
            (0..real.users.len()).map(|u| ra[u].map(|r| r.success()).unwrap_or(false)).collect();
        let data = run_data_phase(&real, &cs, &ia_ok, &phy);

        let mut z0s = Vec::new();
        let mut ras = Vec::new();
        let mut dls = Vec::new();
        let (mut ni, mut nc, mut na) = (0u32, 0u32, 0u32);
        let mut load = 0.0;
        for (ui, u) in real.users.iter().enumerate() {
            if !(u.x >= lo && u.x <= hi && u.y >= lo && u.y <= hi) {
                continue;
            }
            ni += 1;
            z0s.push(cs[ui].z0);
            if cs[ui].success() {
                nc += 1;
                let r = ra[ui].unwrap();
                ras.push((cs[ui].z0, r.collided, r.decoded));
            }
            if ia_ok[ui] {
                na += 1;
                load += data[ui].cell_size as f64;
                dls.push(data[ui].sinr);
            }
        }
        out.z0.push(z0s);
        out.ra.push(ras);
        out.dl.push(dls);
        out.counts.push((ni, nc, na));
        out.load.push(load);
    }
    out
}

type SimKey = (ProtocolKind, u32, u32, String);

/// Cache of desk-scale simulation summaries shared within one test binary.
pub fn cached_summary(
    kind: ProtocolKind,
    m: u32,
    n: u32,
    model: BlockageModel,
) -> &'static SimSummary {
    static CACHE: OnceLock<Mutex<HashMap<SimKey, &'static SimSummary>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let key: SimKey = (kind, m, n, model.label());
    let mut map = cache.lock().unwrap();
    if let Some(s) = map.get(&key) {
        return s;
    }
    let cfg = cfg_mn(m, n);
    let proto = Protocol::new(kind, &cfg).unwrap();
    let sim = SimulationConfig { desk_scale: true, ..Default::default() };
    let summary: &'static SimSummary =
        Box::leak(Box::new(run_sim_summary(&cfg, &model, &proto, &sim)));
    map.insert(key, summary);
    summary
}
