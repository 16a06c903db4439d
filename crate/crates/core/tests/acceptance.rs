//! Acceptance suite: one test per acceptance criterion, each printing a
//! single PASS/FAIL line (run with `--nocapture` to see the lines for
//! passing criteria too). Tolerances and thresholds are pinned in code.
//!
//! Quoted reference intervals are stated at 0.1 ms precision, so interval
//! containment allows half a quantization step (0.05 ms) at each end.

mod common;

use std::collections::BTreeMap;
use std::sync::{Mutex, OnceLock};
use std::time::Instant;

use common::{cached_summary, cfg_mn};
use mmwave_ia_core::model::db_to_linear;
use mmwave_ia_core::sim::run_campaign;
use mmwave_ia_core::{
    AnalyticContext, BlockageModel, Protocol, ProtocolKind, SimulationConfig, SystemConfig,
};

const M_GRID: [u32; 12] = [4, 8, 12, 16, 20, 24, 28, 32, 36, 40, 44, 48];

fn ball(p: f64) -> BlockageModel {
    BlockageModel::LosBall { radius_rc_m: 100.0, prob_p: p }
}

fn exponential(mu: f64) -> BlockageModel {
    BlockageModel::Exponential { mu_m: mu }
}

/// All blockage settings exercised by the sweeps.
fn all_settings() -> Vec<BlockageModel> {
    vec![
        ball(1.0),
        ball(0.75),
        ball(0.5),
        ball(0.25),
        exponential(100.0),
        exponential(50.0),
        exponential(25.0),
    ]
}

/// Shared analytic contexts; criteria 3-8 revisit the same grid points.
fn actx(kind: ProtocolKind, m: u32, n: u32, model: BlockageModel) -> &'static AnalyticContext {
    type Key = (u8, u32, u32, String);
    static CACHE: OnceLock<Mutex<BTreeMap<Key, &'static AnalyticContext>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(BTreeMap::new()));
    let key: Key = (kind as u8, m, n, model.label());
    let mut map = cache.lock().unwrap();
    if let Some(ctx) = map.get(&key) {
        return ctx;
    }
    let cfg = cfg_mn(m, n);
    let proto = Protocol::new(kind, &cfg).unwrap();
    let ctx: &'static AnalyticContext =
        Box::leak(Box::new(AnalyticContext::new(cfg, model, proto).unwrap()));
    map.insert(key, ctx);
    ctx
}

fn delay_ms(kind: ProtocolKind, m: u32, model: BlockageModel) -> f64 {
    actx(kind, m, 4, model).expected_delay().unwrap() * 1e3
}

fn upt_mbps(kind: ProtocolKind, m: u32, model: BlockageModel) -> f64 {
    actx(kind, m, 4, model).average_upt().unwrap() / 1e6
}

fn argmin_delay(kind: ProtocolKind, model: BlockageModel) -> (u32, f64) {
    M_GRID
        .iter()
        .map(|&m| (m, delay_ms(kind, m, model)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap()
}

fn argmax_upt(model: BlockageModel) -> (u32, f64) {
    M_GRID
        .iter()
        .map(|&m| (m, upt_mbps(ProtocolKind::Baseline, m, model)))
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap()
}

fn beamwidth_deg(m: u32) -> f64 {
    360.0 / m as f64
}

struct Verdict {
    number: u8,
    name: &'static str,
    failures: Vec<String>,
}

impl Verdict {
    fn new(number: u8, name: &'static str) -> Self {
        Verdict { number, name, failures: Vec::new() }
    }

    fn check(&mut self, ok: bool, detail: String) {
        if !ok {
            self.failures.push(detail);
        }
    }

    fn finish(self) {
        if self.failures.is_empty() {
            println!("ACCEPTANCE {} ({}): PASS", self.number, self.name);
        } else {
            println!(
                "ACCEPTANCE {} ({}): FAIL\n  - {}",
                self.number,
                self.name,
                self.failures.join("\n  - ")
            );
        }
        assert!(self.failures.is_empty(), "criterion {} failed: {:?}", self.number, self.failures);
    }
}

#[test]
fn criterion_1_omni_cell_search_coverage() {
    let mut v = Verdict::new(1, "omni cell search coverage");
    let t0 = Instant::now();
    let ctx = actx(ProtocolKind::Baseline, 1, 1, ball(1.0));
    let analytic = ctx.cell_search_success();
    let analytic_time = t0.elapsed();

    let t0 = Instant::now();
    let sim = cached_summary(ProtocolKind::Baseline, 1, 1, ball(1.0));
    let mc = sim.cs_rate();
    let mc_time = t0.elapsed();

    v.check(analytic < 0.75, format!("analytic omni CS {analytic:.4} not < 0.75"));
    v.check(mc < 0.75, format!("simulated omni CS {mc:.4} not < 0.75"));
    v.check(
        (analytic - mc).abs() <= 0.02,
        format!("analytic {analytic:.4} vs MC {mc:.4} differ by more than 0.02"),
    );
    v.check(
        analytic_time.as_secs_f64() < 60.0,
        format!("analytic took {analytic_time:?} (budget 1 min)"),
    );
    v.check(mc_time.as_secs_f64() < 600.0, format!("MC took {mc_time:?} (budget 10 min)"));
    v.finish();
}

#[test]
fn criterion_2_directional_cell_search_gain() {
    let mut v = Verdict::new(2, "directional cell search gain");
    let omni = actx(ProtocolKind::Baseline, 1, 1, ball(1.0)).cell_search_success();
    let directional = actx(ProtocolKind::Baseline, 4, 4, ball(1.0)).cell_search_success();
    v.check(
        directional - omni >= 0.1,
        format!("gain {directional:.4} - {omni:.4} = {:.4} below 0.1", directional - omni),
    );
    v.finish();
}

#[test]
fn criterion_3_collision_probabilities() {
    let mut v = Verdict::new(3, "collision probabilities");
    for model in all_settings() {
        for &m in &M_GRID[1..] {
            let p_co = actx(ProtocolKind::Baseline, m, 4, model).no_collision_prob();
            v.check(
                p_co > 0.95,
                format!("baseline {} M={m}: p_co {p_co:.4} not > 0.95", model.label()),
            );
        }
    }
    for kind in [ProtocolKind::FastRa, ProtocolKind::OmniRx] {
        let p_co = actx(kind, 24, 4, ball(1.0)).no_collision_prob();
        v.check(
            (p_co - 0.82).abs() <= 0.02,
            format!("{kind} at defaults: p_co {p_co:.4} not within 0.82 ± 0.02"),
        );
    }
    // Analytic collision model vs simulation.
    let pairs = [
        (ProtocolKind::Baseline, 8u32),
        (ProtocolKind::FastRa, 24u32),
    ];
    for (kind, m) in pairs {
        let a = actx(kind, m, 4, ball(1.0)).no_collision_prob();
        let s = cached_summary(kind, m, 4, ball(1.0)).p_co();
        v.check(
            (a - s).abs() <= 0.02,
            format!("{kind} M={m}: analytic p_co {a:.4} vs MC {s:.4} beyond 0.02"),
        );
    }
    v.finish();
}

#[test]
fn criterion_4_delay_optima_and_ranges() {
    let mut v = Verdict::new(4, "delay optima and ranges");
    // Exact grid argmins for the opaque-to-translucent ball settings.
    for (p, expect_deg) in [(1.0, 45.0), (0.5, 22.5), (0.25, 15.0)] {
        let (m_star, d_min) = argmin_delay(ProtocolKind::Baseline, ball(p));
        v.check(
            (beamwidth_deg(m_star) - expect_deg).abs() < 1e-9,
            format!(
                "ball p={p}: optimal beamwidth {:.2}° (M={m_star}, delay {d_min:.3} ms), expected {expect_deg}°",
                beamwidth_deg(m_star)
            ),
        );
    }
    // Minimum-delay interval containment (quoted at 0.1 ms precision).
    for p in [1.0, 0.5, 0.25] {
        let (_, d_min) = argmin_delay(ProtocolKind::Baseline, ball(p));
        v.check(
            (2.15..=4.15).contains(&d_min),
            format!("ball p={p}: minimum delay {d_min:.3} ms outside [2.2, 4.1] ms"),
        );
    }
    for mu in [100.0, 50.0, 25.0] {
        let (_, d_min) = argmin_delay(ProtocolKind::Baseline, exponential(mu));
        v.check(
            (1.15..=5.05).contains(&d_min),
            format!("exponential mu={mu}: minimum delay {d_min:.3} ms outside [1.2, 5.0] ms"),
        );
    }
    v.finish();
}

#[test]
fn criterion_5_optimal_beamwidth_monotone_in_blockage() {
    let mut v = Verdict::new(5, "optimal beamwidth monotone in blockage severity");
    let mut prev = f64::INFINITY;
    for p in [1.0, 0.75, 0.5, 0.25] {
        let (m_star, _) = argmin_delay(ProtocolKind::Baseline, ball(p));
        let bw = beamwidth_deg(m_star);
        v.check(bw <= prev + 1e-9, format!("ball p={p}: beamwidth {bw:.2}° above previous {prev:.2}°"));
        prev = bw;
    }
    let mut prev = f64::INFINITY;
    for mu in [100.0, 50.0, 25.0] {
        let (m_star, _) = argmin_delay(ProtocolKind::Baseline, exponential(mu));
        let bw = beamwidth_deg(m_star);
        v.check(
            bw <= prev + 1e-9,
            format!("exponential mu={mu}: beamwidth {bw:.2}° above previous {prev:.2}°"),
        );
        prev = bw;
    }
    v.finish();
}

#[test]
fn criterion_6_upt_optimal_beamwidth_band() {
    let mut v = Verdict::new(6, "throughput-optimal beamwidth in [10°, 18°]");
    for model in all_settings() {
        let (m_star, upt) = argmax_upt(model);
        let bw = beamwidth_deg(m_star);
        v.check(
            (10.0..=18.0).contains(&bw),
            format!(
                "{}: optimal beamwidth {bw:.2}° (M={m_star}, {upt:.1} Mbit/s) outside [10°, 18°]",
                model.label()
            ),
        );
    }
    v.finish();
}

#[test]
fn criterion_7_protocol_ranking_under_severe_blockage() {
    let mut v = Verdict::new(7, "protocol ranking under severe blockage");
    for model in [ball(0.25), exponential(25.0)] {
        // Baseline achieves the lowest optimal delay of the four.
        let (_, base_min) = argmin_delay(ProtocolKind::Baseline, model);
        for kind in [ProtocolKind::FastRa, ProtocolKind::FastCs, ProtocolKind::OmniRx] {
            let (m_star, d_min) = argmin_delay(kind, model);
            v.check(
                base_min <= d_min + 1e-9,
                format!(
                    "{}: baseline min delay {base_min:.3} ms above {kind} {d_min:.3} ms (at M={m_star})",
                    model.label()
                ),
            );
        }
        // Omnidirectional-reception protocols only get slower with more beams.
        for kind in [ProtocolKind::FastRa, ProtocolKind::OmniRx] {
            let mut prev = 0.0;
            for &m in &M_GRID {
                let d = delay_ms(kind, m, model);
                v.check(
                    d >= prev - 1e-9,
                    format!("{}: {kind} delay not increasing at M={m}", model.label()),
                );
                prev = d;
            }
        }
        // Baseline pays for its overhead with the lowest throughput at wide
        // sweeps.
        let m = 48;
        let base = upt_mbps(ProtocolKind::Baseline, m, model);
        for kind in [ProtocolKind::FastRa, ProtocolKind::FastCs, ProtocolKind::OmniRx] {
            let u = upt_mbps(kind, m, model);
            v.check(
                base <= u + 1e-9,
                format!("{}: baseline UPT {base:.1} above {kind} {u:.1} at M={m}", model.label()),
            );
        }
    }
    v.finish();
}

#[test]
fn criterion_8_cross_validation_suite() {
    let mut v = Verdict::new(8, "analytic vs Monte Carlo cross-validation");
    for model in [ball(1.0), exponential(100.0)] {
        for kind in ProtocolKind::ALL {
            for m in [8u32, 24, 48] {
                let ctx = actx(kind, m, 4, model);
                let sim = cached_summary(kind, m, 4, model);
                let tag = format!("{kind} {} M={m}", model.label());

                let a = ctx.cell_search_success();
                let s = sim.cs_rate();
                v.check((a - s).abs() <= 0.02, format!("{tag}: p_cs {a:.4} vs {s:.4}"));

                let a = ctx.ia_success().unwrap();
                let s = sim.eta_ia();
                v.check((a - s).abs() <= 0.02, format!("{tag}: eta_ia {a:.4} vs {s:.4}"));

                let mut sup = 0.0f64;
                for g_db in [0.0, 10.0, 20.0] {
                    let g = db_to_linear(g_db);
                    sup = sup.max((ctx.dl_sinr_ccdf(g).unwrap() - sim.dl_ccdf(g)).abs());
                }
                v.check(sup <= 0.03, format!("{tag}: SINR CCDF sup-gap {sup:.4} beyond 0.03"));

                let cfg = cfg_mn(m, 4);
                let proto = Protocol::new(kind, &cfg).unwrap();
                let a = ctx.average_upt().unwrap();
                let s = sim.upt(&cfg, &proto);
                let rel = (a - s).abs() / s;
                v.check(rel <= 0.05, format!("{tag}: UPT {a:.3e} vs {s:.3e} (rel {rel:.3})"));
            }
        }
    }
    v.finish();
}

#[test]
fn criterion_9_property_suites() {
    let mut v = Verdict::new(9, "property suites");

    // Beam-gain power normalization to 1e-12.
    {
        use rand::Rng;
        use rand_chacha::rand_core::SeedableRng;
        let cfg = SystemConfig::default();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let tau = std::f64::consts::TAU;
        let mut worst = 0.0f64;
        for _ in 0..10_000 {
            let theta = rng.random_range(1e-6..tau - 1e-6);
            let g = mmwave_ia_core::user_beam_gain(theta, &cfg).unwrap();
            worst = worst.max((g.main * theta / tau + g.side * (tau - theta) / tau - 1.0).abs());
        }
        v.check(worst < 1e-12, format!("beam normalization worst residual {worst:.2e}"));
    }

    // Minimum-path-loss density normalization to 1e-6.
    for model in [ball(0.5), exponential(50.0)] {
        let ctx = actx(ProtocolKind::Baseline, 8, 4, model);
        let beta = cfg_mn(8, 4).beta();
        let spec = mmwave_ia_core::QuadratureSpec {
            rel_tol: 1e-9,
            max_subdivisions: 1500,
            ..Default::default()
        };
        let mut breaks: Vec<f64> = (0..40).map(|k| beta * 0.5f64.powi(k)).collect();
        for k in 1..13 {
            breaks.push(beta * 10f64.powi(k));
        }
        breaks.push(beta * 1e4);
        breaks.push(beta * 1e8);
        let (mass, _) = mmwave_ia_core::integrate_split(
            |z| ctx.min_pl_pdf(z).unwrap(),
            beta * 0.5f64.powi(40),
            beta * 1e13,
            &breaks,
            &spec,
        )
        .unwrap();
        v.check(
            (mass - 1.0).abs() < 1e-6,
            format!("{}: density mass {mass:.8}", model.label()),
        );

        // Serving-density mass equals the cell-search success probability.
        let (mass, _) = mmwave_ia_core::integrate_split(
            |z| ctx.serving_pl_pdf(z).unwrap(),
            beta * 0.5f64.powi(40),
            beta * 1e13,
            &breaks,
            &spec,
        )
        .unwrap();
        let p_cs = ctx.cell_search_success();
        v.check(
            (mass - p_cs).abs() < 1e-6,
            format!("{}: serving mass {mass:.8} vs cell search {p_cs:.8}", model.label()),
        );
    }

    // Interference-factor ordering 0 < U <= V <= 1.
    {
        use rand::Rng;
        use rand_chacha::rand_core::SeedableRng;
        let cfg = SystemConfig::default();
        let spec = mmwave_ia_core::QuadratureSpec::default();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        for model in [ball(0.75), exponential(50.0)] {
            for _ in 0..25 {
                let z = cfg.beta() * 10f64.powf(rng.random_range(0.0..10.0));
                let t = 10f64.powf(rng.random_range(-3.0..2.0));
                let lam = 10f64.powf(rng.random_range(-8.0..-4.0));
                let (vv, uu) =
                    mmwave_ia_core::laplace_interference_pair(z, t, lam, &model, &cfg, &spec)
                        .unwrap();
                v.check(
                    0.0 < uu && uu <= vv && vv <= 1.0,
                    format!("ordering violated at z={z:.3e} t={t:.3e} lam={lam:.3e}"),
                );
            }
        }
    }

    // Binomial collapse of the downlink integrand to 1e-10 for the four
    // (sector count, per-beam sector) combinations.
    {
        let binom = |n: u32, k: u32| -> f64 {
            let mut acc = 1.0f64;
            for i in 0..k {
                acc = acc * (n - i) as f64 / (i + 1) as f64;
            }
            acc
        };
        for (m, n, coarse) in
            [(16u32, 4u32, Some(4u32)), (4, 2, None), (8, 8, None), (8, 4, None)]
        {
            let cfg = cfg_mn(m, n);
            let proto = match coarse {
                Some(c) => Protocol::with_coarse(ProtocolKind::FastCs, &cfg, c).unwrap(),
                None => Protocol::new(ProtocolKind::Baseline, &cfg).unwrap(),
            };
            let ctx = AnalyticContext::new(cfg, ball(1.0), proto).unwrap();
            let (k, q) = (proto.k_cs(), proto.q());
            let z = db_to_linear(98.0);
            let gamma = db_to_linear(10.0);
            let (v_m, u_m, v_s, u_s, tail, omp, _) = ctx.dl_integrand_factors(z, gamma).unwrap();
            let (a, b, c, d) = (v_m * tail, u_m * omp, v_s * tail, u_s * omp);
            let collapsed = (a + b).powi(q as i32 - 1) * (c + d).powi((k - q) as i32);
            let mut expanded = 0.0;
            for kk in 1..=k {
                let s_lo = 1.max(kk as i64 - (k - q) as i64) as u32;
                for s in s_lo..=q.min(kk) {
                    expanded += binom(k - q, kk - s)
                        * binom(q - 1, s - 1)
                        * a.powi(s as i32 - 1)
                        * b.powi((q - s) as i32)
                        * c.powi((kk - s) as i32)
                        * d.powi(k as i32 - q as i32 - kk as i32 + s as i32);
                }
            }
            let rel = (collapsed - expanded).abs() / collapsed.abs().max(1e-300);
            v.check(rel < 1e-10, format!("collapse identity K={k} q={q}: rel {rel:.2e}"));
        }
    }

    // Conditional CCDF monotonicity.
    {
        let ctx = actx(ProtocolKind::Baseline, 8, 4, ball(1.0));
        let mut prev = f64::INFINITY;
        for g_db in (-10..=40).step_by(2) {
            let c = ctx.dl_sinr_ccdf(db_to_linear(g_db as f64)).unwrap();
            v.check(
                (0.0..=1.0).contains(&c) && c <= prev + 1e-12,
                format!("CCDF not monotone at {g_db} dB"),
            );
            prev = c;
        }
    }

    // Determinism under parallelism.
    {
        let cfg = cfg_mn(8, 4);
        let proto = Protocol::new(ProtocolKind::Baseline, &cfg).unwrap();
        let sim = SimulationConfig { desk_scale: true, ..Default::default() };
        let run = |threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
            pool.install(|| run_campaign(&cfg, &ball(1.0), &proto, &sim).unwrap())
        };
        v.check(run(1) == run(2), "campaign differs across worker counts".into());
    }

    v.finish();
}
