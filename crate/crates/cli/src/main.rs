//! Batch front-end for the initial-access analysis engine and simulator:
//! sweeps protocols, blockage settings and beam counts, writes figure-ready
//! CSV, and cross-validates the analytic metrics against Monte Carlo.

mod config;
mod output;
mod validate;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use mmwave_ia_core::model::db_to_linear;
use mmwave_ia_core::sim::{compute_esf, run_campaign, SINR_GRID_DB};
use mmwave_ia_core::{
    AnalyticContext, AnalyticError, BlockageModel, Engine, MetricValue, MetricsReport, Protocol,
    ProtocolKind, QuadError, SystemConfig,
};

use config::FileConfig;
use output::CsvOut;
use validate::{validate_pair, Tolerances, VALIDATE_SINR_DB};

/// Exit codes: 0 success, 2 configuration/usage error, 3 quadrature
/// non-convergence, 4 validation failure.
const EXIT_CONFIG: u8 = 2;
const EXIT_CONVERGENCE: u8 = 3;
const EXIT_VALIDATION: u8 = 4;

#[derive(Parser)]
#[command(
    name = "mmwave-ia",
    about = "Initial-access performance sweeps for mmWave cellular networks",
    version
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Evaluate the analytical metrics over the sweep grid.
    Analytic(RunArgs),
    /// Run the Monte Carlo campaign over the sweep grid.
    Simulate(RunArgs),
    /// Run both engines and check agreement at declared tolerances.
    Validate(ValidateArgs),
    /// Write the empty-space diagnostic of the connected-user process.
    Esf(EsfArgs),
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// TOML configuration file (sections: system, blockage, protocol, simulation).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
    /// Master seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Protocol to include (repeatable): baseline|fast_ra|fast_cs|omni_rx|all.
    #[arg(long = "protocol")]
    protocols: Vec<String>,
    /// Blockage setting to include (repeatable), e.g. los_ball:rc=100,p=0.5 or exp:25.
    #[arg(long = "blockage")]
    blockages: Vec<String>,
    /// BS beam-count grid A:B:STEP (inclusive).
    #[arg(long)]
    m_range: Option<String>,
    /// Reduced 10x10 realization counts.
    #[arg(long)]
    desk_scale: bool,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Also write the SINR CCDF curves to this CSV.
    #[arg(long)]
    sinr_out: Option<PathBuf>,
    /// Also write per-realization raw records to this CSV (simulate only).
    #[arg(long)]
    realizations_out: Option<PathBuf>,
}

#[derive(Args)]
struct ValidateArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Tolerance override KEY=VAL (repeatable); keys: p_cs, eta_ia, p_co, sinr, upt_rel.
    #[arg(long = "tolerance")]
    tolerances: Vec<String>,
}

#[derive(Args)]
struct EsfArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Largest distance on the r grid (m).
    #[arg(long, default_value_t = 60.0)]
    r_max: f64,
    /// Grid step (m).
    #[arg(long, default_value_t = 2.0)]
    r_step: f64,
}

/// One fully resolved sweep: configs are regenerated per grid point by
/// substituting the protocol, blockage and beam count.
struct Sweep {
    base: FileConfig,
    protocols: Vec<ProtocolKind>,
    blockages: Vec<BlockageModel>,
    m_values: Vec<u32>,
}

impl Sweep {
    fn resolve(common: &CommonArgs) -> Result<Sweep> {
        let mut base = config::load(common.config.as_deref())?;
        if let Some(seed) = common.seed {
            base.simulation.seed = seed;
        }
        if common.desk_scale {
            base.simulation.desk_scale = true;
        }
        base.system.validate().map_err(|e| anyhow::anyhow!("[system] {e}"))?;
        base.blockage.validate().map_err(|e| anyhow::anyhow!("[blockage] {e}"))?;
        base.simulation.validate().map_err(|e| anyhow::anyhow!("[simulation] {e}"))?;

        let mut protocols = Vec::new();
        if common.protocols.is_empty() {
            protocols.push(base.protocol.name.unwrap_or(ProtocolKind::Baseline));
        } else {
            for spec in &common.protocols {
                if spec.eq_ignore_ascii_case("all") {
                    protocols.extend(ProtocolKind::ALL);
                } else {
                    protocols.push(
                        spec.parse::<ProtocolKind>().map_err(|e| anyhow::anyhow!("--protocol: {e}"))?,
                    );
                }
            }
        }
        protocols.dedup();
        if protocols.is_empty() {
            bail!("--protocol: protocol list is empty");
        }

        let blockages = if common.blockages.is_empty() {
            vec![base.blockage]
        } else {
            common.blockages.iter().map(|s| config::parse_blockage(s)).collect::<Result<_>>()?
        };

        let m_values = match &common.m_range {
            Some(spec) => config::parse_m_range(spec)?,
            None => vec![base.system.m_antennas],
        };
        for &m in &m_values {
            if m == 0 || m % base.system.n_antennas != 0 {
                bail!(
                    "m_range: beam count {m} is not a positive multiple of n_antennas ({})",
                    base.system.n_antennas
                );
            }
        }
        Ok(Sweep { base, protocols, blockages, m_values })
    }

    fn grid(&self) -> impl Iterator<Item = (ProtocolKind, BlockageModel, u32)> + '_ {
        self.protocols.iter().flat_map(move |&p| {
            self.blockages
                .iter()
                .flat_map(move |&b| self.m_values.iter().map(move |&m| (p, b, m)))
        })
    }

    fn point(&self, kind: ProtocolKind, model: BlockageModel, m: u32) -> Result<(SystemConfig, Protocol)> {
        let mut sys = self.base.system.clone();
        sys.m_antennas = m;
        let coarse = self
            .base
            .protocol
            .m_cs_coarse
            .unwrap_or(mmwave_ia_core::model::DEFAULT_COARSE_BEAMS);
        let proto = Protocol::with_coarse(kind, &sys, coarse)
            .map_err(|e| anyhow::anyhow!("protocol {kind} at m={m}: {e}"))?;
        let _ = model;
        Ok((sys, proto))
    }
}

fn analytic_report(
    sys: &SystemConfig,
    model: BlockageModel,
    proto: Protocol,
) -> Result<MetricsReport, AnalyticError> {
    let ctx = AnalyticContext::new(sys.clone(), model, proto)?;
    let metrics = ctx.metrics()?;
    let mut grid: Vec<f64> = SINR_GRID_DB.to_vec();
    for g in VALIDATE_SINR_DB {
        if !grid.iter().any(|x| (x - g).abs() < 1e-9) {
            grid.push(g);
        }
    }
    grid.sort_by(f64::total_cmp);
    let sinr_ccdf = grid
        .iter()
        .map(|&g_db| Ok((g_db, MetricValue::exact(ctx.dl_sinr_ccdf(db_to_linear(g_db))?))))
        .collect::<Result<Vec<_>, AnalyticError>>()?;
    Ok(MetricsReport {
        engine: Engine::Analytic,
        protocol: proto.name,
        m_antennas: sys.m_antennas,
        blockage: model,
        cs_success: MetricValue::exact(metrics.p_cs),
        p_co: MetricValue::exact(metrics.p_co),
        eta_ia: MetricValue::exact(metrics.eta_ia),
        delay_s: MetricValue::exact(metrics.delay_s),
        sched_prob: MetricValue::exact(metrics.sched_prob),
        upt_bps: MetricValue::exact(metrics.upt_bps),
        sinr_ccdf,
        n_realizations: 0,
        flags: metrics.flags,
    })
}

fn write_reports(
    out: &PathBuf,
    sinr_out: Option<&PathBuf>,
    resolved: &FileConfig,
    reports: &[MetricsReport],
) -> Result<()> {
    let mut csv = CsvOut::create(out, resolved, &output::METRICS_HEADER)?;
    for r in reports {
        csv.write(&output::metrics_row(r))?;
    }
    csv.finish()?;
    if let Some(path) = sinr_out {
        let mut csv = CsvOut::create(path, resolved, &output::SINR_HEADER)?;
        for r in reports {
            for row in output::sinr_rows(r) {
                csv.write(&row)?;
            }
        }
        csv.finish()?;
    }
    Ok(())
}

fn cmd_analytic(args: &RunArgs) -> Result<()> {
    let sweep = Sweep::resolve(&args.common)?;
    let mut reports = Vec::new();
    for (kind, model, m) in sweep.grid() {
        let (sys, proto) = sweep.point(kind, model, m)?;
        let report = analytic_report(&sys, model, proto)
            .with_context(|| format!("analytic evaluation at {kind} {} m={m}", model.label()))?;
        reports.push(report);
    }
    write_reports(&args.common.out, args.sinr_out.as_ref(), &sweep.base, &reports)
}

fn cmd_simulate(args: &RunArgs) -> Result<()> {
    let sweep = Sweep::resolve(&args.common)?;
    let mut reports = Vec::new();
    let mut raw = match &args.realizations_out {
        Some(path) => Some(CsvOut::create(path, &sweep.base, &output::REALIZATION_HEADER)?),
        None => None,
    };
    for (kind, model, m) in sweep.grid() {
        let (sys, proto) = sweep.point(kind, model, m)?;
        let (report, records) =
            mmwave_ia_core::sim::run_campaign_detailed(&sys, &model, &proto, &sweep.base.simulation)
                .with_context(|| format!("simulation at {kind} {} m={m}", model.label()))?;
        if let Some(csv) = raw.as_mut() {
            for rec in &records {
                csv.write(&output::realization_row(&report, rec))?;
            }
        }
        reports.push(report);
    }
    if let Some(csv) = raw {
        csv.finish()?;
    }
    write_reports(&args.common.out, args.sinr_out.as_ref(), &sweep.base, &reports)
}

fn cmd_validate(args: &ValidateArgs) -> Result<bool> {
    let mut tol = Tolerances::default();
    for spec in &args.tolerances {
        tol.set(spec)?;
    }
    let sweep = Sweep::resolve(&args.common)?;
    let mut csv = CsvOut::create(&args.common.out, &sweep.base, &output::VALIDATION_HEADER)?;
    let mut all_pass = true;
    for (kind, model, m) in sweep.grid() {
        let (sys, proto) = sweep.point(kind, model, m)?;
        let analytic = analytic_report(&sys, model, proto)
            .with_context(|| format!("analytic evaluation at {kind} {} m={m}", model.label()))?;
        let simulated = run_campaign(&sys, &model, &proto, &sweep.base.simulation)
            .with_context(|| format!("simulation at {kind} {} m={m}", model.label()))?;
        for row in validate_pair(&analytic, &simulated, &tol) {
            all_pass &= row.pass;
            println!(
                "{:<16} {:<9} {:<24} m={:<3} analytic {:>12.6} vs mc {:>12.6} [{:.6}, {:.6}] {}",
                row.metric,
                row.protocol.as_str(),
                model.label(),
                row.m,
                row.analytic,
                row.mc_mean,
                row.mc_ci.0,
                row.mc_ci.1,
                if row.pass { "pass" } else { "FAIL" }
            );
            csv.write(&output::validation_row(&row))?;
        }
    }
    csv.finish()?;
    Ok(all_pass)
}

fn cmd_esf(args: &EsfArgs) -> Result<()> {
    if !(args.r_step > 0.0 && args.r_max >= args.r_step) {
        bail!("--r-max/--r-step must be positive with r_max >= r_step");
    }
    let sweep = Sweep::resolve(&args.common)?;
    // One grid point: the first of each list.
    let (kind, model, m) =
        sweep.grid().next().context("empty sweep grid")?;
    let (sys, proto) = sweep.point(kind, model, m)?;
    let n = (args.r_max / args.r_step).floor() as usize;
    let grid: Vec<f64> = (1..=n).map(|i| i as f64 * args.r_step).collect();
    let curve = compute_esf(&sys, &model, &proto, &sweep.base.simulation, &grid)
        .map_err(|e| anyhow::anyhow!("{e}"))?;
    if curve.undefined {
        eprintln!("warning: no connected users; empty-space curve undefined");
    }
    let mut csv = CsvOut::create(&args.common.out, &sweep.base, &output::ESF_HEADER)?;
    for row in output::esf_rows(&curve) {
        csv.write(&row)?;
    }
    csv.finish()
}

fn classify(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(ae) = cause.downcast_ref::<AnalyticError>() {
            if matches!(ae, AnalyticError::Quad(QuadError::NoConvergence { .. })) {
                return EXIT_CONVERGENCE;
            }
        }
        if let Some(qe) = cause.downcast_ref::<QuadError>() {
            if matches!(qe, QuadError::NoConvergence { .. }) {
                return EXIT_CONVERGENCE;
            }
        }
    }
    EXIT_CONFIG
}

fn main() -> ExitCode {
    // Worker-count override for the simulator's realization pool.
    if let Ok(workers) = std::env::var("MMWAVE_IA_WORKERS") {
        if let Ok(n) = workers.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        } else {
            eprintln!("error: MMWAVE_IA_WORKERS must be an integer, got '{workers}'");
            return ExitCode::from(EXIT_CONFIG);
        }
    }
    let cli = Cli::parse();
    let outcome = match &cli.cmd {
        Cmd::Analytic(args) => cmd_analytic(args).map(|()| true),
        Cmd::Simulate(args) => cmd_simulate(args).map(|()| true),
        Cmd::Validate(args) => cmd_validate(args),
        Cmd::Esf(args) => cmd_esf(args).map(|()| true),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("validation failed; see report");
            ExitCode::from(EXIT_VALIDATION)
        }
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(classify(&err))
        }
    }
}
