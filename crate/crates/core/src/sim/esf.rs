//! Empty-space diagnostic for the process of connected users: distribution
//! of the distance from a BS to its nearest access-surviving user, compared
//! against the Poisson process of matched intensity. Clustering of connected
//! users around their serving BSs shows up as a departure from the fitted
//! curve.

use rand::Rng;
use rayon::prelude::*;

use crate::model::{BlockageModel, Protocol, SystemConfig};

use super::{
    bootstrap_rng, run_cell_search, run_random_access, sample_realization, PhyParams, SimError,
    SimulationConfig,
};

const BOOTSTRAP_REPLICATES: usize = 200;

/// Empirical and fitted empty-space curves with a bootstrap confidence band.
#[derive(Debug, Clone, PartialEq)]
pub struct EsfCurve {
    pub r_m: Vec<f64>,
    /// Fraction of BSs whose nearest connected user lies within r.
    pub empirical: Vec<f64>,
    /// 1 − exp(−λ_u η π r²): the matched-intensity Poisson curve.
    pub fitted: Vec<f64>,
    pub ci_low: Vec<f64>,
    pub ci_high: Vec<f64>,
    /// Measured per-cycle access success used for the fitted intensity.
    pub eta_hat: f64,
    /// Set when no realization produced a connected user.
    pub undefined: bool,
}

/// Pooled empirical empty-space function over per-realization distance
/// samples (distance from each measured BS to its nearest connected user;
/// infinite when a realization has none).
pub fn empirical_esf(samples: &[Vec<f64>], r_grid: &[f64]) -> Vec<f64> {
    let total: usize = samples.iter().map(|s| s.len()).sum();
    if total == 0 {
        return vec![0.0; r_grid.len()];
    }
    r_grid
        .iter()
        .map(|&r| {
            let hits: usize =
                samples.iter().map(|s| s.iter().filter(|&&d| d <= r).count()).sum();
            hits as f64 / total as f64
        })
        .collect()
}

/// Run the access phases and compute the empty-space curve of the connected
/// users, with a bootstrap confidence band over realizations.
pub fn compute_esf(
    cfg: &SystemConfig,
    model: &BlockageModel,
    proto: &Protocol,
    sim: &SimulationConfig,
    r_grid: &[f64],
) -> Result<EsfCurve, SimError> {
    cfg.validate()?;
    model.validate()?;
    sim.validate()?;
    if r_grid.is_empty() {
        return Err(SimError::InvalidConfig("empty r grid".into()));
    }
    let phy = PhyParams::new(cfg, proto)?;
    let (n_bs, n_user) = sim.draws();
    let n_combos = n_bs as u64 * n_user as u64;
    let lo = sim.margin_m();
    let hi = sim.area_m() - sim.margin_m();

    // Per combo: nearest-connected-user distance for every interior BS, plus
    // interior-user success counts for the fitted intensity.
    let per_combo: Vec<(Vec<f64>, u32, u32)> = (0..n_combos)
        .into_par_iter()
        .map(|c| {
            let real = sample_realization(cfg, model, sim, c);
            let cs = run_cell_search(&real, &phy);
            let ra = run_random_access(&real, &cs, &phy);
            let connected: Vec<usize> = (0..real.users.len())
                .filter(|&u| ra[u].map(|r| r.success()).unwrap_or(false))
                .collect();
            let mut dists = Vec::new();
            for b in &real.bs {
                if !(b.x >= lo && b.x <= hi && b.y >= lo && b.y <= hi) {
                    continue;
                }
                let nearest = connected
                    .iter()
                    .map(|&u| b.distance(&real.users[u]))
                    .fold(f64::INFINITY, f64::min);
                dists.push(nearest);
            }
            let mut n_int = 0;
            let mut n_ok = 0;
            for (ui, u) in real.users.iter().enumerate() {
                if u.x >= lo && u.x <= hi && u.y >= lo && u.y <= hi {
                    n_int += 1;
                    if ra[ui].map(|r| r.success()).unwrap_or(false) {
                        n_ok += 1;
                    }
                }
            }
            (dists, n_int, n_ok)
        })
        .collect();

    let samples: Vec<Vec<f64>> = per_combo.iter().map(|(d, _, _)| d.clone()).collect();
    let n_int: u64 = per_combo.iter().map(|&(_, n, _)| n as u64).sum();
    let n_ok: u64 = per_combo.iter().map(|&(_, _, k)| k as u64).sum();
    let eta_hat = if n_int > 0 { n_ok as f64 / n_int as f64 } else { 0.0 };
    let undefined = per_combo.iter().all(|(d, _, _)| d.iter().all(|v| v.is_infinite()));

    let empirical = empirical_esf(&samples, r_grid);
    let lam_conn = cfg.lambda_u_m2() * eta_hat;
    let fitted: Vec<f64> = r_grid
        .iter()
        .map(|&r| 1.0 - (-lam_conn * std::f64::consts::PI * r * r).exp())
        .collect();

    // Percentile bootstrap over realizations.
    let mut reps: Vec<Vec<f64>> = Vec::with_capacity(BOOTSTRAP_REPLICATES);
    for rep in 0..BOOTSTRAP_REPLICATES {
        let mut rng = bootstrap_rng(sim.seed, rep as u64);
        let resampled: Vec<Vec<f64>> = (0..samples.len())
            .map(|_| samples[rng.random_range(0..samples.len())].clone())
            .collect();
        reps.push(empirical_esf(&resampled, r_grid));
    }
    let mut ci_low = Vec::with_capacity(r_grid.len());
    let mut ci_high = Vec::with_capacity(r_grid.len());
    for j in 0..r_grid.len() {
        let mut col: Vec<f64> = reps.iter().map(|c| c[j]).collect();
        col.sort_by(f64::total_cmp);
        let lo_idx = ((col.len() as f64) * 0.025).floor() as usize;
        let hi_idx = (((col.len() as f64) * 0.975).ceil() as usize).min(col.len()) - 1;
        ci_low.push(col[lo_idx]);
        ci_high.push(col[hi_idx]);
    }

    Ok(EsfCurve {
        r_m: r_grid.to_vec(),
        empirical,
        fitted,
        ci_low,
        ci_high,
        eta_hat,
        undefined,
    })
}
