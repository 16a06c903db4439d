//! Deterministic adaptive quadrature over finite and semi-infinite intervals,
//! plus the interference Laplace factors built on it.
//!
//! The kernel is a 15-point Gauss–Kronrod rule with interval bisection driven
//! by the classic QUADPACK error rescaling. Semi-infinite domains are mapped
//! to (0, 1) via `r = a + u/(1-u)`. Integrand discontinuities must be passed
//! as explicit breakpoints; the interval is split there before any
//! subdivision happens.

use thiserror::Error;

use crate::model::{pow_alpha, BlockageModel, ModelError, SystemConfig};

/// Tolerances and budget for one adaptive integration.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureSpec {
    /// Relative tolerance on the accumulated estimate.
    pub rel_tol: f64,
    /// Absolute error floor.
    pub abs_tol: f64,
    /// Maximum number of interval bisections.
    pub max_subdivisions: usize,
    /// How semi-infinite upper limits are handled (documentation field).
    pub tail_cutoff_rule: &'static str,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            rel_tol: 1e-8,
            abs_tol: 1e-12,
            max_subdivisions: 200,
            tail_cutoff_rule: "map (a, inf) to (0, 1) via r = a + u/(1-u)",
        }
    }
}

impl QuadratureSpec {
    /// Relaxed spec for outer integrals layered on top of inner quadrature.
    pub fn outer() -> Self {
        QuadratureSpec { rel_tol: 1e-6, ..QuadratureSpec::default() }
    }

    pub fn validate(&self) -> Result<(), QuadError> {
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return Err(QuadError::BadSpec(format!(
                "tolerances must be positive, got rel {} abs {}",
                self.rel_tol, self.abs_tol
            )));
        }
        if self.max_subdivisions < 8 {
            return Err(QuadError::BadSpec(format!(
                "max_subdivisions must be >= 8, got {}",
                self.max_subdivisions
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Error)]
pub enum QuadError {
    /// Tolerance not reached within the subdivision budget. Carries the best
    /// available estimate so callers can degrade gracefully.
    #[error("quadrature did not converge within {subdivisions} subdivisions (best {best:.9e}, error {error:.3e})")]
    NoConvergence { best: f64, error: f64, subdivisions: usize },
    #[error("invalid integration bounds a={a}, b={b}")]
    BadBounds { a: f64, b: f64 },
    #[error("invalid quadrature spec: {0}")]
    BadSpec(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

// 15-point Kronrod abscissae (even indices) embedding the 7-point Gauss rule
// (odd indices plus the centre), with the matching weights. QUADPACK QK15.
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
const WG: [f64; 4] = [
    0.129_484_966_168_869_69,
    0.279_705_391_489_276_67,
    0.381_830_050_505_118_94,
    0.417_959_183_673_469_4,
];

/// One Gauss–Kronrod panel: returns (estimate, scaled error bound).
pub(crate) fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let centre = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(centre);

    let mut res_gauss = fc * WG[3];
    let mut res_kronrod = fc * WGK[7];
    let mut res_abs = res_kronrod.abs();
    let mut fv = [0.0f64; 15];
    fv[7] = fc;

    for j in 0..7 {
        let x = half * XGK[j];
        let f1 = f(centre - x);
        let f2 = f(centre + x);
        fv[j] = f1;
        fv[14 - j] = f2;
        let fsum = f1 + f2;
        res_kronrod += WGK[j] * fsum;
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            res_gauss += WG[j / 2] * fsum;
        }
    }

    let mean = res_kronrod * 0.5;
    let mut res_asc = WGK[7] * (fc - mean).abs();
    for j in 0..7 {
        res_asc += WGK[j] * ((fv[j] - mean).abs() + (fv[14 - j] - mean).abs());
    }

    let raw_err = ((res_kronrod - res_gauss) * half).abs();
    res_abs *= half.abs();
    res_asc *= half.abs();

    // QUADPACK error rescaling: sharpens the raw Gauss/Kronrod difference.
    let mut err = raw_err;
    if res_asc != 0.0 && err != 0.0 {
        let scale = (200.0 * err / res_asc).powf(1.5);
        err = if scale < 1.0 { res_asc * scale } else { res_asc };
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * res_abs);
    }

    (res_kronrod * half, err)
}

struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

/// Adaptive integration of `f` over the finite interval (a, b).
fn adaptive_finite<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    spec: &QuadratureSpec,
) -> Result<(f64, f64), QuadError> {
    let (v, e) = gk15(f, a, b);
    let mut segs = vec![Segment { a, b, value: v, error: e }];
    let mut total_v = v;
    let mut total_e = e;

    for _ in 0..spec.max_subdivisions {
        if total_e <= spec.abs_tol.max(spec.rel_tol * total_v.abs()) {
            return Ok((total_v, total_e));
        }
        // Split the segment with the largest error estimate.
        let (idx, _) = segs
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.error.total_cmp(&y.1.error))
            .expect("segment list is never empty");
        let seg = segs.swap_remove(idx);
        let mid = 0.5 * (seg.a + seg.b);
        if !(seg.a < mid && mid < seg.b) {
            // Interval exhausted at f64 resolution; keep it as-is.
            segs.push(seg);
            break;
        }
        let (v1, e1) = gk15(f, seg.a, mid);
        let (v2, e2) = gk15(f, mid, seg.b);
        segs.push(Segment { a: seg.a, b: mid, value: v1, error: e1 });
        segs.push(Segment { a: mid, b: seg.b, value: v2, error: e2 });
        total_v = segs.iter().map(|s| s.value).sum();
        total_e = segs.iter().map(|s| s.error).sum();
    }

    if total_e <= spec.abs_tol.max(spec.rel_tol * total_v.abs()) {
        Ok((total_v, total_e))
    } else {
        Err(QuadError::NoConvergence {
            best: total_v,
            error: total_e,
            subdivisions: spec.max_subdivisions,
        })
    }
}

/// Integrate `f` from `a` to `b`; `b` may be `f64::INFINITY`.
///
/// Returns the estimate and an error bound. Deterministic: identical inputs
/// produce bit-identical outputs.
pub fn integrate<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    spec: &QuadratureSpec,
) -> Result<(f64, f64), QuadError> {
    integrate_split(f, a, b, &[], spec)
}

/// As [`integrate`], splitting the domain at the supplied breakpoints
/// (unsorted and out-of-range values are tolerated).
pub fn integrate_split<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    breakpoints: &[f64],
    spec: &QuadratureSpec,
) -> Result<(f64, f64), QuadError> {
    spec.validate()?;
    if !a.is_finite() || !(a < b) {
        return Err(QuadError::BadBounds { a, b });
    }

    let mut cuts: Vec<f64> = breakpoints.iter().copied().filter(|&c| c > a && c < b && c.is_finite()).collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();

    let mut value = 0.0;
    let mut error = 0.0;
    let mut lo = a;
    for &c in &cuts {
        let (v, e) = adaptive_finite(&f, lo, c, spec)?;
        value += v;
        error += e;
        lo = c;
    }

    if b.is_finite() {
        let (v, e) = adaptive_finite(&f, lo, b, spec)?;
        Ok((value + v, error + e))
    } else {
        // r = lo + u/(1-u), dr = du/(1-u)^2 maps (lo, inf) onto (0, 1).
        let g = |u: f64| {
            let w = 1.0 - u;
            f(lo + u / w) / (w * w)
        };
        let (v, e) = adaptive_finite(&g, 0.0, 1.0, spec)?;
        Ok((value + v, error + e))
    }
}

/// Laplace factor of the aggregate interference from transmitters whose path
/// loss already exceeds `z`: the LOS radial integral starts at the LOS
/// distance for `z` and the NLOS integral at the NLOS distance.
///
/// `exp{-2πλ (∫_{r_L(z)}^∞ tz h(r) r dr / (tz + l_L(r)) + ∫_{r_N(z)}^∞ tz (1-h(r)) r dr / (tz + l_N(r)))}`
///
/// `lam_m2` is the effective planar density in per-m² (sector restrictions
/// and beam thinning are folded into it by the caller).
pub fn laplace_interference_tail(
    z: f64,
    t: f64,
    lam_m2: f64,
    model: &BlockageModel,
    cfg: &SystemConfig,
    spec: &QuadratureSpec,
) -> Result<f64, QuadError> {
    Ok(laplace_interference_pair(z, t, lam_m2, model, cfg, spec)?.0)
}

/// Laplace factor of the aggregate interference from *all* transmitters of
/// the process (both radial integrals start at zero). Always at most the
/// tail-restricted factor.
pub fn laplace_interference_full(
    z: f64,
    t: f64,
    lam_m2: f64,
    model: &BlockageModel,
    cfg: &SystemConfig,
    spec: &QuadratureSpec,
) -> Result<f64, QuadError> {
    Ok(laplace_interference_pair(z, t, lam_m2, model, cfg, spec)?.1)
}

/// Evaluate both interference factors at once, sharing the radial integrals:
/// returns `(tail, full)` with `full <= tail`.
pub fn laplace_interference_pair(
    z: f64,
    t: f64,
    lam_m2: f64,
    model: &BlockageModel,
    cfg: &SystemConfig,
    spec: &QuadratureSpec,
) -> Result<(f64, f64), QuadError> {
    if !(z > 0.0) {
        return Err(QuadError::Model(ModelError::InvalidConfig(format!(
            "path loss argument must be positive, got {z}"
        ))));
    }
    if !(t >= 0.0) || !(lam_m2 >= 0.0) {
        return Err(QuadError::Model(ModelError::InvalidConfig(format!(
            "threshold and density must be nonnegative, got t={t} lam={lam_m2}"
        ))));
    }
    if t == 0.0 || lam_m2 == 0.0 {
        return Ok((1.0, 1.0));
    }

    let beta = cfg.beta();
    let (a_l, a_n) = (cfg.alpha_los, cfg.alpha_nlos);
    let tz = t * z;
    let r_l = (z / beta).powf(1.0 / a_l);
    let r_n = (z / beta).powf(1.0 / a_n);

    let los_term = move |r: f64, h: f64| tz * h * r / (tz + beta * pow_alpha(r, a_l));
    let nlos_term = move |r: f64, h: f64| tz * (1.0 - h) * r / (tz + beta * pow_alpha(r, a_n));

    let mut tail = 0.0;
    let mut head = 0.0;

    match *model {
        BlockageModel::LosBall { radius_rc_m: rc, prob_p: p } => {
            // h vanishes beyond the ball, so the LOS integrals truncate at R_c.
            if r_l < rc {
                tail += integrate(|r| los_term(r, p), r_l, rc, spec)?.0;
                head += integrate(|r| los_term(r, p), 0.0, r_l, spec)?.0;
            } else {
                head += integrate(|r| los_term(r, p), 0.0, rc, spec)?.0;
            }
            let one_mh = move |r: f64| if r <= rc { 1.0 - p } else { 1.0 };
            tail += integrate_split(|r| nlos_term(r, 1.0 - one_mh(r)), r_n, f64::INFINITY, &[rc], spec)?.0;
            head += integrate_split(|r| nlos_term(r, 1.0 - one_mh(r)), 0.0, r_n, &[rc], spec)?.0;
        }
        BlockageModel::Exponential { mu_m } => {
            let h = move |r: f64| (-r / mu_m).exp();
            tail += integrate(|r| los_term(r, h(r)), r_l, f64::INFINITY, spec)?.0;
            head += integrate(|r| los_term(r, h(r)), 0.0, r_l, spec)?.0;
            tail += integrate(|r| nlos_term(r, h(r)), r_n, f64::INFINITY, spec)?.0;
            head += integrate(|r| nlos_term(r, h(r)), 0.0, r_n, spec)?.0;
        }
    }

    let two_pi_lam = std::f64::consts::TAU * lam_m2;
    let v = (-two_pi_lam * tail).exp();
    let u = (-two_pi_lam * (tail + head)).exp();
    Ok((v, u))
}
