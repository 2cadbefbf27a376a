//! Boundary-length stable processes and their tail/moment estimators.
//!
//! For `kappa` in `(8/3, 4)` the boundary-length evolution of a carpet
//! exploration is a pair of independent `4/kappa`-stable Levy processes
//! whose jump measure is `a+ |s|^{-4/kappa-1}` upward and
//! `a- |s|^{-4/kappa-1}` downward, normalized so `a+ + a- = 1`. This
//! module samples those processes exactly at grid times (strictly stable
//! increments via the Chambers-Mallows-Stuck transform, zero location,
//! classic "1" parameterization) and measures the quantities the theory
//! pins down: the positivity parameter, the tails of the first time the
//! running infimum is revisited, sums of the largest jumps, and the
//! infimum moments.

use crate::rng::{self, RunRng};
use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LevyError {
    #[error("kappa must lie in (8/3, 4), got {0}")]
    KappaOutOfRange(f64),
    #[error("alpha must lie in (1, 2), got {0}")]
    AlphaOutOfRange(f64),
    #[error("time step must be positive, got {0}")]
    BadDt(f64),
    #[error("jump cutoff must be positive, got {0}")]
    BadCutoff(f64),
    #[error("time step {dt} exceeds cutoff^alpha / 10 = {max_dt}")]
    DtTooCoarseForCutoff { dt: f64, max_dt: f64 },
    #[error("need at least {min} {what}, got {got}")]
    TooFew {
        what: &'static str,
        min: usize,
        got: usize,
    },
    #[error("fit range is degenerate or has too few usable points")]
    DegenerateFit,
    #[error("M list must be increasing with at least 3 values, spanning 2 decades")]
    BadMList,
}

/// Parameters of one boundary-length process.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StableParams {
    pub kappa: f64,
    /// Stability index `4 / kappa`, in `(1, 3/2)`.
    pub alpha: f64,
    /// Up/down jump-intensity ratio `-cos(4 pi / kappa)`.
    pub u: f64,
    /// Skewness `-(cot(2 pi / kappa))^2`, equal to `(u - 1)/(u + 1)`.
    pub skew_beta: f64,
    /// `P[X_1 > 0] = 1 - kappa / 8`.
    pub positivity: f64,
    pub a_plus: f64,
    pub a_minus: f64,
    /// Scale of the standard CMS variate that makes `a+ + a- = 1`.
    pub scale_unit: f64,
}

/// Scale giving a strictly `alpha`-stable law whose jump density has unit
/// total intensity: `(Gamma(2 - alpha) |cos(pi alpha / 2)| / (alpha
/// (alpha - 1)))^(1/alpha)`.
fn unit_intensity_scale(alpha: f64) -> f64 {
    let g = libm::tgamma(2.0 - alpha);
    let c = libm::fabs(libm::cos(core::f64::consts::PI * alpha / 2.0));
    libm::pow(g * c / (alpha * (alpha - 1.0)), 1.0 / alpha)
}

/// Positivity parameter of a strictly stable law:
/// `1/2 + arctan(beta tan(pi alpha / 2)) / (pi alpha)`.
fn positivity_from_skew(alpha: f64, beta: f64) -> f64 {
    0.5 + libm::atan(beta * libm::tan(core::f64::consts::PI * alpha / 2.0))
        / (core::f64::consts::PI * alpha)
}

pub fn params_from_kappa(kappa: f64) -> Result<StableParams, LevyError> {
    if !(kappa > 8.0 / 3.0 && kappa < 4.0) {
        return Err(LevyError::KappaOutOfRange(kappa));
    }
    let alpha = 4.0 / kappa;
    let u = -libm::cos(4.0 * core::f64::consts::PI / kappa);
    let cot = 1.0 / libm::tan(2.0 * core::f64::consts::PI / kappa);
    let skew_beta = -(cot * cot);
    let positivity = 1.0 - kappa / 8.0;
    let params = StableParams {
        kappa,
        alpha,
        u,
        skew_beta,
        positivity,
        a_plus: (1.0 + skew_beta) / 2.0,
        a_minus: (1.0 - skew_beta) / 2.0,
        scale_unit: unit_intensity_scale(alpha),
    };
    // Internal consistency of the two skewness routes and of the
    // positivity parameter against the arctan formula.
    debug_assert!(libm::fabs((1.0 + skew_beta) / (1.0 - skew_beta) - u) <= 1e-12);
    debug_assert!(libm::fabs(positivity_from_skew(alpha, skew_beta) - positivity) <= 1e-9);
    Ok(params)
}

impl StableParams {
    /// Arbitrary `(alpha, beta)` parameters with the same unit-intensity
    /// normalization; positivity comes from the arctan formula. Intended
    /// for diagnostics and tests (e.g. the symmetric case `beta = 0`).
    pub fn custom(alpha: f64, beta: f64) -> Result<StableParams, LevyError> {
        if !(alpha > 1.0 && alpha < 2.0) {
            return Err(LevyError::AlphaOutOfRange(alpha));
        }
        Ok(StableParams {
            kappa: 4.0 / alpha,
            alpha,
            u: (1.0 + beta) / (1.0 - beta),
            skew_beta: beta,
            positivity: positivity_from_skew(alpha, beta),
            a_plus: (1.0 + beta) / 2.0,
            a_minus: (1.0 - beta) / 2.0,
            scale_unit: unit_intensity_scale(alpha),
        })
    }
}

/// Standard strictly stable variate `S(alpha, beta; 1)` with unit scale and
/// zero location, by the Chambers-Mallows-Stuck transform.
fn cms_standard(alpha: f64, beta: f64, rng: &mut RunRng) -> f64 {
    let half_pi = core::f64::consts::FRAC_PI_2;
    let tan_half = libm::tan(core::f64::consts::PI * alpha / 2.0);
    let b = libm::atan(beta * tan_half) / alpha;
    let s = libm::pow(1.0 + beta * beta * tan_half * tan_half, 1.0 / (2.0 * alpha));
    let u = core::f64::consts::PI * (rng.uniform_pos() - 0.5);
    let w = rng.exp();
    let t1 = libm::sin(alpha * (u + b)) / libm::pow(libm::cos(u), 1.0 / alpha);
    let t2 = libm::pow(
        libm::cos(u - alpha * (u + b)) / w.max(f64::MIN_POSITIVE),
        (1.0 - alpha) / alpha,
    );
    s * t1 * t2
}

/// One increment of the process over time `dt`: self-similar scaling
/// `(scale_unit * dt^(1/alpha))` times a standard CMS draw.
pub fn sample_increment(params: &StableParams, dt: f64, rng: &mut RunRng) -> f64 {
    debug_assert!(dt > 0.0);
    params.scale_unit * libm::pow(dt, 1.0 / params.alpha) * cms_standard(params.alpha, params.skew_beta, rng)
}

/// Grid path with its jumps of size at least the cutoff made explicit.
#[derive(Debug, Clone, PartialEq)]
pub struct StablePath {
    pub dt: f64,
    /// `X` at grid times `0, dt, ..., steps*dt`; starts at 0.
    pub values: Vec<f64>,
    /// `(time, size)` of every jump with `|size| >= cutoff`, time-ordered.
    pub jumps: Vec<(f64, f64)>,
    /// Running infimum / supremum on the grid.
    pub inf: Vec<f64>,
    pub sup: Vec<f64>,
    pub cutoff: f64,
}

impl StablePath {
    pub fn t_max(&self) -> f64 {
        (self.values.len() - 1) as f64 * self.dt
    }

    /// Upward jump sizes on `[0, min(1, t_max)]`, descending.
    pub fn upward_jumps_unit_interval(&self) -> Vec<f64> {
        let mut ups: Vec<f64> = self
            .jumps
            .iter()
            .filter(|&&(t, s)| t <= 1.0 && s > 0.0)
            .map(|&(_, s)| s)
            .collect();
        ups.sort_by(|a, b| b.partial_cmp(a).unwrap());
        ups
    }
}

/// Samples a path on `[0, ceil(t_max/dt)*dt]`: jumps past the cutoff come
/// from the exact compound Poisson law of the jump measure; the remainder
/// uses stable increments redrawn until they stay below the cutoff (the
/// compensator of the discarded big-jump mean cancels against the one the
/// compound Poisson part would need, so no explicit drift appears).
pub fn sample_path_with_jumps(
    params: &StableParams,
    t_max: f64,
    dt: f64,
    cutoff: f64,
    rng: &mut RunRng,
) -> Result<StablePath, LevyError> {
    if !(cutoff > 0.0) {
        return Err(LevyError::BadCutoff(cutoff));
    }
    if !(dt > 0.0) {
        return Err(LevyError::BadDt(dt));
    }
    let max_dt = libm::pow(cutoff, params.alpha) / 10.0;
    if dt > max_dt {
        return Err(LevyError::DtTooCoarseForCutoff { dt, max_dt });
    }
    let steps = libm::ceil(t_max / dt) as usize;
    let horizon = steps as f64 * dt;

    // Jumps >= cutoff: Poisson count with the integrated tail intensity,
    // Pareto sizes, sign by relative intensity.
    let lambda = libm::pow(cutoff, -params.alpha) / params.alpha;
    let count = rng.poisson(lambda * horizon);
    let mut jumps: Vec<(f64, f64)> = (0..count)
        .map(|_| {
            let t = rng.range(0.0, horizon);
            let mag = cutoff * libm::pow(rng.uniform_pos(), -1.0 / params.alpha);
            let sign = if rng.uniform() < params.a_plus { 1.0 } else { -1.0 };
            (t, sign * mag)
        })
        .collect();
    jumps.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let mut values: Vec<f64> = Vec::with_capacity(steps + 1);
    let mut inf: Vec<f64> = Vec::with_capacity(steps + 1);
    let mut sup: Vec<f64> = Vec::with_capacity(steps + 1);
    values.push(0.0);
    inf.push(0.0);
    sup.push(0.0);
    let mut x = 0.0f64;
    let mut jump_at = 0usize;
    for k in 1..=steps {
        let mut inc = loop {
            let y = sample_increment(params, dt, rng);
            if libm::fabs(y) < cutoff {
                break y;
            }
        };
        let t_hi = k as f64 * dt;
        while jump_at < jumps.len() && jumps[jump_at].0 <= t_hi {
            inc += jumps[jump_at].1;
            jump_at += 1;
        }
        x += inc;
        values.push(x);
        inf.push(inf[k - 1].min(x));
        sup.push(sup[k - 1].max(x));
    }
    Ok(StablePath {
        dt,
        values,
        jumps,
        inf,
        sup,
        cutoff,
    })
}

/// Sum of the `n` largest recorded upward jumps on `[0, 1]`; all of them
/// when fewer are available.
pub fn largest_jumps_sum(path: &StablePath, n: usize) -> f64 {
    assert!(n >= 1, "n must be at least 1");
    path.upward_jumps_unit_interval()
        .iter()
        .take(n)
        .sum()
}

// ---------------------------------------------------------------------------
// Tail statistics for tau

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TauConfig {
    pub paths: usize,
    pub horizon: f64,
    pub dt: f64,
    /// Grid tolerance multiplier: tau is the first grid time `t >= 1` with
    /// `X_t - I_t <= eta_mult * scale_unit * dt^(1/alpha)` (one increment
    /// scale). Exponent fits must be stable under halving this.
    pub eta_mult: f64,
    pub fit_lo: f64,
    pub fit_hi: f64,
    pub fit_points: usize,
}

impl TauConfig {
    pub fn new(paths: usize, horizon: f64, dt: f64) -> Self {
        TauConfig {
            paths,
            horizon,
            dt,
            eta_mult: 1.0,
            fit_lo: 10.0,
            fit_hi: horizon / 10.0,
            fit_points: 12,
        }
    }

    fn eta(&self, params: &StableParams) -> f64 {
        self.eta_mult * params.scale_unit * libm::pow(self.dt, 1.0 / params.alpha)
    }
}

/// One single-path sample: the grid tau (censored values exceed the
/// horizon) and the infimum at time 1 for the conditioned variant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TauSample {
    pub tau: f64,
    pub inf_at_one: f64,
}

/// Simulates one path for the single-process tau; stream index is the path
/// index under the `LEVY` tag.
pub fn simulate_tau_single(
    params: &StableParams,
    cfg: &TauConfig,
    master_seed: u64,
    index: u64,
) -> TauSample {
    let mut rng = RunRng::from_stream(master_seed, rng::tags::LEVY, index);
    let eta = cfg.eta(params);
    let steps = libm::ceil(cfg.horizon / cfg.dt) as usize;
    let mut x = 0.0f64;
    let mut inf = 0.0f64;
    let mut inf_at_one = f64::NAN;
    let mut tau = cfg.horizon * 2.0;
    let mut seen_one = false;
    for k in 1..=steps {
        x += sample_increment(params, cfg.dt, &mut rng);
        inf = inf.min(x);
        let t = k as f64 * cfg.dt;
        if !seen_one && t >= 1.0 {
            inf_at_one = inf;
            seen_one = true;
        }
        if seen_one && x - inf <= eta {
            tau = t;
            break;
        }
    }
    if !seen_one {
        inf_at_one = inf;
    }
    TauSample { tau, inf_at_one }
}

/// Simulates an independent pair; returns `tau = tau1 ^ tau2` (the first
/// grid time `>= 1` at which either process revisits its infimum).
pub fn simulate_tau_pair(
    params: &StableParams,
    cfg: &TauConfig,
    master_seed: u64,
    index: u64,
) -> f64 {
    let mut rng = RunRng::from_stream(master_seed, rng::tags::LEVY_PAIR, index);
    let eta = cfg.eta(params);
    let steps = libm::ceil(cfg.horizon / cfg.dt) as usize;
    let (mut x1, mut x2) = (0.0f64, 0.0f64);
    let (mut i1, mut i2) = (0.0f64, 0.0f64);
    for k in 1..=steps {
        x1 += sample_increment(params, cfg.dt, &mut rng);
        x2 += sample_increment(params, cfg.dt, &mut rng);
        i1 = i1.min(x1);
        i2 = i2.min(x2);
        let t = k as f64 * cfg.dt;
        if t >= 1.0 && (x1 - i1 <= eta || x2 - i2 <= eta) {
            return t;
        }
    }
    cfg.horizon * 2.0
}

/// Log-log least-squares fit of an empirical survival function over a
/// geometric grid of thresholds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailFit {
    pub slope: f64,
    pub stderr: f64,
    pub ci95: (f64, f64),
    /// `(threshold, survival probability)` points used by the fit.
    pub points: Vec<(f64, f64)>,
}

pub fn fit_survival_slope(
    samples: &[f64],
    fit_lo: f64,
    fit_hi: f64,
    fit_points: usize,
) -> Result<TailFit, LevyError> {
    if samples.is_empty() || !(fit_hi > fit_lo) || fit_points < 3 {
        return Err(LevyError::DegenerateFit);
    }
    let n = samples.len() as f64;
    let mut points = Vec::with_capacity(fit_points);
    for k in 0..fit_points {
        let x = fit_lo * libm::pow(fit_hi / fit_lo, k as f64 / (fit_points - 1) as f64);
        let surv = samples.iter().filter(|&&s| s >= x).count() as f64 / n;
        if surv > 0.0 {
            points.push((x, surv));
        }
    }
    if points.len() < 3 {
        return Err(LevyError::DegenerateFit);
    }
    let logs: Vec<(f64, f64)> = points
        .iter()
        .map(|&(x, s)| (libm::log(x), libm::log(s)))
        .collect();
    let (slope, stderr) = ols_slope(&logs).ok_or(LevyError::DegenerateFit)?;
    Ok(TailFit {
        slope,
        stderr,
        ci95: (slope - 1.96 * stderr, slope + 1.96 * stderr),
        points,
    })
}

/// OLS slope with its standard error from the residuals.
fn ols_slope(points: &[(f64, f64)]) -> Option<(f64, f64)> {
    let n = points.len() as f64;
    if points.len() < 3 {
        return None;
    }
    let mean_x = points.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mean_x) * (p.0 - mean_x)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - mean_x) * (p.1 - mean_y)).sum();
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let ss_res: f64 = points
        .iter()
        .map(|p| {
            let e = p.1 - (intercept + slope * p.0);
            e * e
        })
        .sum();
    let stderr = libm::sqrt(ss_res / (n - 2.0) / sxx);
    Some((slope, stderr))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TauReport {
    pub kappa: f64,
    pub dt: f64,
    pub eta_mult: f64,
    pub paths: usize,
    pub single: TailFit,
    pub pair: TailFit,
    /// Tail fit of `P[tau1 >= x, I_1 >= -1]`.
    pub conditioned: TailFit,
    /// Max over the fit grid of the standardized deviation between the
    /// empirical pair survival and the product of two independent
    /// single-path estimates.
    pub independence_max_dev: f64,
}

/// Sequential tau battery; the per-path functions are public so drivers
/// can fan the same streams out across workers and fold in index order.
pub fn tau_statistics(
    params: &StableParams,
    cfg: &TauConfig,
    master_seed: u64,
) -> Result<TauReport, LevyError> {
    let singles: Vec<TauSample> = (0..cfg.paths)
        .map(|i| simulate_tau_single(params, cfg, master_seed, i as u64))
        .collect();
    let pairs: Vec<f64> = (0..cfg.paths)
        .map(|i| simulate_tau_pair(params, cfg, master_seed, i as u64))
        .collect();
    assemble_tau_report(params, cfg, &singles, &pairs)
}

pub fn assemble_tau_report(
    params: &StableParams,
    cfg: &TauConfig,
    singles: &[TauSample],
    pairs: &[f64],
) -> Result<TauReport, LevyError> {
    let single_taus: Vec<f64> = singles.iter().map(|s| s.tau).collect();
    let single = fit_survival_slope(&single_taus, cfg.fit_lo, cfg.fit_hi, cfg.fit_points)?;
    let pair = fit_survival_slope(pairs, cfg.fit_lo, cfg.fit_hi, cfg.fit_points)?;
    // Conditioned variant: tau with the time-1 infimum at least -1. The
    // survival is rescaled within the conditioned subpopulation.
    let conditioned_taus: Vec<f64> = singles
        .iter()
        .filter(|s| s.inf_at_one >= -1.0)
        .map(|s| s.tau)
        .collect();
    let conditioned = fit_survival_slope(&conditioned_taus, cfg.fit_lo, cfg.fit_hi, cfg.fit_points)?;

    // Independence: split the single-path samples into halves and compare
    // S_A(x) * S_B(x) with the empirical pair survival.
    let half = singles.len() / 2;
    let (a, b) = (&single_taus[..half], &single_taus[half..]);
    let n_pair = pairs.len() as f64;
    let mut max_dev: f64 = 0.0;
    for &(x, s_pair) in &pair.points {
        let sa = a.iter().filter(|&&t| t >= x).count() as f64 / a.len() as f64;
        let sb = b.iter().filter(|&&t| t >= x).count() as f64 / b.len() as f64;
        let predicted = sa * sb;
        let var_pair = s_pair * (1.0 - s_pair) / n_pair;
        let var_pred = sb * sb * sa * (1.0 - sa) / a.len() as f64
            + sa * sa * sb * (1.0 - sb) / b.len() as f64;
        let sigma = libm::sqrt(var_pair + var_pred);
        if sigma > 0.0 {
            max_dev = max_dev.max(libm::fabs(s_pair - predicted) / sigma);
        }
    }
    Ok(TauReport {
        kappa: params.kappa,
        dt: cfg.dt,
        eta_mult: cfg.eta_mult,
        paths: singles.len(),
        single,
        pair,
        conditioned,
        independence_max_dev: max_dev,
    })
}

// ---------------------------------------------------------------------------
// Infimum moments

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentConfig {
    pub m_list: Vec<f64>,
    pub paths: usize,
    pub dt: f64,
    pub eta_mult: f64,
}

impl MomentConfig {
    pub fn validate(&self) -> Result<(), LevyError> {
        if self.m_list.len() < 3
            || self.m_list.windows(2).any(|w| w[1] <= w[0])
            || self.m_list[self.m_list.len() - 1] / self.m_list[0] < 100.0
        {
            return Err(LevyError::BadMList);
        }
        if !(self.dt > 0.0) {
            return Err(LevyError::BadDt(self.dt));
        }
        Ok(())
    }
}

/// Per-path contributions: for each M, `-I1_{tau ^ M}` and
/// `(X1_M - I1_M) * 1{tau >= M}` where tau is the pair minimum.
pub fn simulate_moment_path(
    params: &StableParams,
    cfg: &MomentConfig,
    master_seed: u64,
    index: u64,
) -> (Vec<f64>, Vec<f64>) {
    let mut rng = RunRng::from_stream(master_seed, rng::tags::LEVY_MOMENTS, index);
    let eta = cfg.eta_mult * params.scale_unit * libm::pow(cfg.dt, 1.0 / params.alpha);
    let m_max = *cfg.m_list.last().unwrap();
    let steps = libm::ceil(m_max / cfg.dt) as usize;
    let mut neg_inf = vec![0.0; cfg.m_list.len()];
    let mut top = vec![0.0; cfg.m_list.len()];
    let (mut x1, mut x2) = (0.0f64, 0.0f64);
    let (mut i1, mut i2) = (0.0f64, 0.0f64);
    let mut next_m = 0usize;
    for k in 1..=steps {
        x1 += sample_increment(params, cfg.dt, &mut rng);
        x2 += sample_increment(params, cfg.dt, &mut rng);
        i1 = i1.min(x1);
        i2 = i2.min(x2);
        let t = k as f64 * cfg.dt;
        while next_m < cfg.m_list.len() && t >= cfg.m_list[next_m] {
            // tau has not occurred before this M: record the live values.
            neg_inf[next_m] = -i1;
            top[next_m] = x1 - i1;
            next_m += 1;
        }
        if t >= 1.0 && (x1 - i1 <= eta || x2 - i2 <= eta) {
            // tau = t: freeze I_{tau} for the remaining M's; their
            // indicator contribution is zero.
            for m in next_m..cfg.m_list.len() {
                neg_inf[m] = -i1;
                top[m] = 0.0;
            }
            return (neg_inf, top);
        }
    }
    (neg_inf, top)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub kappa: f64,
    pub m_list: Vec<f64>,
    pub paths: usize,
    /// `-E[I_{tau ^ M}]` per M with standard errors.
    pub neg_mean_inf: Vec<f64>,
    pub neg_mean_inf_se: Vec<f64>,
    /// `E[(X_M - I_M) 1{tau >= M}]` per M with standard errors.
    pub top_mean: Vec<f64>,
    pub top_mean_se: Vec<f64>,
    /// OLS slope of `-E[I_{tau ^ M}]` against `log M`.
    pub log_slope: f64,
    pub log_slope_stderr: f64,
    /// Last-to-first ratio of the top-length means.
    pub top_decade_ratio: f64,
}

pub fn infimum_moments(
    params: &StableParams,
    cfg: &MomentConfig,
    master_seed: u64,
) -> Result<MomentReport, LevyError> {
    cfg.validate()?;
    let per_path: Vec<(Vec<f64>, Vec<f64>)> = (0..cfg.paths)
        .map(|i| simulate_moment_path(params, cfg, master_seed, i as u64))
        .collect();
    assemble_moment_report(params, cfg, &per_path)
}

pub fn assemble_moment_report(
    params: &StableParams,
    cfg: &MomentConfig,
    per_path: &[(Vec<f64>, Vec<f64>)],
) -> Result<MomentReport, LevyError> {
    let paths = per_path.len();
    if paths < 2 {
        return Err(LevyError::TooFew {
            what: "paths",
            min: 2,
            got: paths,
        });
    }
    let k = cfg.m_list.len();
    let mut neg_mean_inf = vec![0.0; k];
    let mut neg_mean_inf_se = vec![0.0; k];
    let mut top_mean = vec![0.0; k];
    let mut top_mean_se = vec![0.0; k];
    for m in 0..k {
        let (mut s1, mut s2) = (0.0, 0.0);
        let (mut t1, mut t2) = (0.0, 0.0);
        for (ni, tp) in per_path {
            s1 += ni[m];
            s2 += ni[m] * ni[m];
            t1 += tp[m];
            t2 += tp[m] * tp[m];
        }
        let n = paths as f64;
        neg_mean_inf[m] = s1 / n;
        neg_mean_inf_se[m] = libm::sqrt(((s2 / n - (s1 / n) * (s1 / n)).max(0.0)) / n);
        top_mean[m] = t1 / n;
        top_mean_se[m] = libm::sqrt(((t2 / n - (t1 / n) * (t1 / n)).max(0.0)) / n);
    }
    let pts: Vec<(f64, f64)> = cfg
        .m_list
        .iter()
        .zip(&neg_mean_inf)
        .map(|(&m, &v)| (libm::log(m), v))
        .collect();
    let (log_slope, log_slope_stderr) = ols_slope(&pts).ok_or(LevyError::DegenerateFit)?;
    let top_decade_ratio = top_mean[k - 1] / top_mean[0].max(f64::MIN_POSITIVE);
    Ok(MomentReport {
        kappa: params.kappa,
        m_list: cfg.m_list.clone(),
        paths,
        neg_mean_inf,
        neg_mean_inf_se,
        top_mean,
        top_mean_se,
        log_slope,
        log_slope_stderr,
        top_decade_ratio,
    })
}

// ---------------------------------------------------------------------------
// Positivity and jump sums

pub const POSITIVITY_CHUNK: usize = 4096;

/// Count of positive unit-time increments in one chunk; chunked streams
/// keep the estimate independent of worker scheduling.
pub fn positivity_chunk(
    params: &StableParams,
    master_seed: u64,
    chunk_index: u64,
    chunk_len: usize,
) -> usize {
    let mut rng = RunRng::from_stream(master_seed, rng::tags::LEVY_POSITIVITY, chunk_index);
    (0..chunk_len)
        .filter(|_| sample_increment(params, 1.0, &mut rng) > 0.0)
        .count()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositivityReport {
    pub kappa: f64,
    pub draws: usize,
    pub p_hat: f64,
    pub se: f64,
    pub expected: f64,
}

pub fn positivity_estimate(params: &StableParams, draws: usize, master_seed: u64) -> PositivityReport {
    let chunks = draws.div_ceil(POSITIVITY_CHUNK);
    let mut positive = 0usize;
    for c in 0..chunks {
        let len = POSITIVITY_CHUNK.min(draws - c * POSITIVITY_CHUNK);
        positive += positivity_chunk(params, master_seed, c as u64, len);
    }
    assemble_positivity_report(params, draws, positive)
}

pub fn assemble_positivity_report(
    params: &StableParams,
    draws: usize,
    positive: usize,
) -> PositivityReport {
    let p_hat = positive as f64 / draws as f64;
    PositivityReport {
        kappa: params.kappa,
        draws,
        p_hat,
        se: libm::sqrt(p_hat * (1.0 - p_hat) / draws as f64),
        expected: params.positivity,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JumpSumConfig {
    pub paths: usize,
    pub n_list: Vec<usize>,
    pub cutoff: f64,
    pub dt: f64,
}

/// Largest-jump sums for one path (stream per path index).
pub fn simulate_jump_sums(
    params: &StableParams,
    cfg: &JumpSumConfig,
    master_seed: u64,
    index: u64,
) -> Result<Vec<f64>, LevyError> {
    let mut rng = RunRng::from_stream(master_seed, rng::tags::LEVY_JUMPS, index);
    let path = sample_path_with_jumps(params, 1.0, cfg.dt, cfg.cutoff, &mut rng)?;
    Ok(cfg
        .n_list
        .iter()
        .map(|&n| largest_jumps_sum(&path, n))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JumpSumReport {
    pub kappa: f64,
    pub n_list: Vec<usize>,
    pub paths: usize,
    pub mean_sums: Vec<f64>,
    pub mean_sums_se: Vec<f64>,
    /// OLS slope of `log E[S_n]` against `log n`.
    pub slope: f64,
    pub slope_stderr: f64,
}

pub fn jump_sum_statistics(
    params: &StableParams,
    cfg: &JumpSumConfig,
    master_seed: u64,
) -> Result<JumpSumReport, LevyError> {
    let per_path: Vec<Vec<f64>> = (0..cfg.paths)
        .map(|i| simulate_jump_sums(params, cfg, master_seed, i as u64))
        .collect::<Result<_, _>>()?;
    assemble_jump_sum_report(params, cfg, &per_path)
}

pub fn assemble_jump_sum_report(
    params: &StableParams,
    cfg: &JumpSumConfig,
    per_path: &[Vec<f64>],
) -> Result<JumpSumReport, LevyError> {
    let paths = per_path.len();
    if paths < 2 {
        return Err(LevyError::TooFew {
            what: "paths",
            min: 2,
            got: paths,
        });
    }
    let k = cfg.n_list.len();
    let mut mean_sums = vec![0.0; k];
    let mut mean_sums_se = vec![0.0; k];
    for m in 0..k {
        let (mut s1, mut s2) = (0.0, 0.0);
        for row in per_path {
            s1 += row[m];
            s2 += row[m] * row[m];
        }
        let n = paths as f64;
        mean_sums[m] = s1 / n;
        mean_sums_se[m] = libm::sqrt(((s2 / n - (s1 / n) * (s1 / n)).max(0.0)) / n);
    }
    let pts: Vec<(f64, f64)> = cfg
        .n_list
        .iter()
        .zip(&mean_sums)
        .map(|(&n, &s)| (libm::log(n as f64), libm::log(s.max(f64::MIN_POSITIVE))))
        .collect();
    let (slope, slope_stderr) = ols_slope(&pts).ok_or(LevyError::DegenerateFit)?;
    Ok(JumpSumReport {
        kappa: params.kappa,
        n_list: cfg.n_list.clone(),
        paths,
        mean_sums,
        mean_sums_se,
        slope,
        slope_stderr,
    })
}
