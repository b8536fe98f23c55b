//! Moderate-deviation layer.
//!
//! For `α ∈ (0, 1)` and a scale `β_n` with `β_n / n^{1-α} → 0` and
//! `β_n / (ln n)^{1-α} → ∞`, the statistics `K_n / (n^α β_n)` and
//! `M_{l,n} / (n^α β_n)` obey large-deviation principles with speed
//! `β_n^{1/(1-α)}`. This module provides the closed-form rate functions
//! and limiting scaled log-MGFs, numerical Legendre transforms, the
//! entropy rewrite of `I_α`, schedule validation, and finite-`n`
//! computation of
//!
//! ```text
//! Λ̂_n(λ) = β_n^{-1/(1-α)} ln E[exp(λ n^{-α} β_n^{α/(1-α)} X)]
//! ```
//!
//! by exact series (`θ = 0`), exact DP, or Monte Carlo.

use std::fmt;

use crate::combinatorics::{ln_rising_factorial, log_gen_binom, GenFactorialSpec};
use crate::error::{Error, Result};
use crate::exact::{frequency_weight, law_kn, law_multiplicities, mgf_kn_series, mgf_mln_series, LAW_KN_MAX_N};
use crate::numeric::{log_sum_exp, CompensatedSum};
use crate::posterior::{mean_and_stderr, PosteriorContext};
use crate::sampler::{bernoulli_kn_alpha0, beta, binomial, derive_seed, par_replicates, CrpSampler, ModelParams};
use crate::Statistic;

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("alpha must lie in (0, 1), got {alpha}")))
    }
}

/// `β_n = c · n^p · (ln n)^q`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaleSchedule {
    pub c: f64,
    pub p: f64,
    pub q: f64,
}

impl ScaleSchedule {
    pub fn new(c: f64, p: f64, q: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::domain(format!("schedule constant must be positive, got {c}")));
        }
        if !(p >= 0.0 && p.is_finite() && q.is_finite()) {
            return Err(Error::domain(format!("schedule exponents must be finite with p >= 0, got p={p}, q={q}")));
        }
        Ok(Self { c, p, q })
    }

    /// `β_n = n^p`.
    pub fn power(p: f64) -> Result<Self> {
        Self::new(1.0, p, 0.0)
    }

    pub fn beta(&self, n: u64) -> f64 {
        let nf = n as f64;
        let mut b = self.c * nf.powf(self.p);
        if self.q != 0.0 {
            b *= nf.ln().powf(self.q);
        }
        b
    }

    /// `γ_n = ⌊β_n^{1/(1-α)}⌋`.
    pub fn gamma(&self, n: u64, alpha: f64) -> f64 {
        self.beta(n).powf(1.0 / (1.0 - alpha)).floor()
    }

    /// Speed `β_n^{1/(1-α)}`.
    pub fn speed(&self, n: u64, alpha: f64) -> f64 {
        self.beta(n).powf(1.0 / (1.0 - alpha))
    }

    /// Tilt `λ n^{-α} β_n^{α/(1-α)}` applied to the raw statistic.
    pub fn tilt(&self, n: u64, alpha: f64, lambda: f64) -> f64 {
        lambda * (n as f64).powf(-alpha) * self.beta(n).powf(alpha / (1.0 - alpha))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScheduleVerdict {
    pub valid: bool,
    pub reason: String,
}

/// Checks `β_n / n^{1-α} → 0` and `β_n / (ln n)^{1-α} → ∞` for the
/// power-log family.
pub fn validate_schedule(schedule: &ScaleSchedule, alpha: f64) -> ScheduleVerdict {
    if !(alpha > 0.0 && alpha < 1.0) {
        return ScheduleVerdict {
            valid: false,
            reason: format!("alpha must lie in (0, 1), got {alpha}"),
        };
    }
    let gap = 1.0 - alpha;
    let (p, q) = (schedule.p, schedule.q);
    let upper_ok = p < gap || (p == gap && q < 0.0);
    let lower_ok = p > 0.0 || (p == 0.0 && q > gap);
    let mut failures = Vec::new();
    if !upper_ok {
        failures.push(format!("beta_n / n^(1-alpha) does not tend to 0 (p={p}, 1-alpha={gap})"));
    }
    if !lower_ok {
        failures.push(format!(
            "beta_n / (ln n)^(1-alpha) does not tend to infinity (p={p}, q={q}, 1-alpha={gap})"
        ));
    }
    ScheduleVerdict {
        valid: failures.is_empty(),
        reason: if failures.is_empty() {
            "both scale limits hold".to_string()
        } else {
            failures.join("; ")
        },
    }
}

/// `I_α(x) = (1-α) α^{α/(1-α)} x^{1/(1-α)}` for `x > 0`, `+∞` otherwise.
pub fn rate_k(alpha: f64, x: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if x <= 0.0 {
        return Ok(f64::INFINITY);
    }
    let e = 1.0 / (1.0 - alpha);
    Ok((1.0 - alpha) * alpha.powf(alpha * e) * x.powf(e))
}

/// Rate function of `M_{l,n} / (n^α β_n)`: the Legendre conjugate of
/// [`limit_logmgf_m`], i.e. `I_α(x / p_{α,l})` with
/// `p_{α,l} = α(1-α)_{(l-1)↑1}/l!`, which simplifies to
/// `(1-α)/α · (l!/(1-α)_{(l-1)↑1})^{1/(1-α)} x^{1/(1-α)}` for `x > 0`.
pub fn rate_m(alpha: f64, l: u64, x: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if l == 0 {
        return Err(Error::domain("block size l must be positive"));
    }
    if x <= 0.0 {
        return Ok(f64::INFINITY);
    }
    let e = 1.0 / (1.0 - alpha);
    let ln_ratio = crate::combinatorics::ln_gamma(l as f64 + 1.0)
        - ln_rising_factorial(GenFactorialSpec::rising(1.0 - alpha, l - 1)).ln_nonneg();
    Ok((1.0 - alpha) / alpha * (e * ln_ratio).exp() * x.powf(e))
}

/// The alternative closed form
/// `(1-α)(l!/(1-α)_{(l-1)↑1})^{α/(1-α)} x^{1/(1-α)}`. It is not the
/// conjugate of [`limit_logmgf_m`] (at `l = 1` it is smaller than
/// [`rate_m`] by the factor `α`); kept for comparison only.
pub fn rate_m_displayed(alpha: f64, l: u64, x: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if l == 0 {
        return Err(Error::domain("block size l must be positive"));
    }
    if x <= 0.0 {
        return Ok(f64::INFINITY);
    }
    let e = 1.0 / (1.0 - alpha);
    let ln_ratio = crate::combinatorics::ln_gamma(l as f64 + 1.0)
        - ln_rising_factorial(GenFactorialSpec::rising(1.0 - alpha, l - 1)).ln_nonneg();
    Ok((1.0 - alpha) * (alpha * e * ln_ratio).exp() * x.powf(e))
}

/// `Λ(λ) = λ^{1/α}` for `λ > 0`, `0` otherwise.
pub fn limit_logmgf_k(alpha: f64, lambda: f64) -> Result<f64> {
    check_alpha(alpha)?;
    Ok(if lambda > 0.0 { lambda.powf(1.0 / alpha) } else { 0.0 })
}

/// `Λ_l(λ) = (α(1-α)_{(l-1)↑1} λ / l!)^{1/α}` for `λ > 0`, `0` otherwise.
pub fn limit_logmgf_m(alpha: f64, l: u64, lambda: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if l == 0 {
        return Err(Error::domain("block size l must be positive"));
    }
    Ok(if lambda > 0.0 {
        (frequency_weight(alpha, l) * lambda).powf(1.0 / alpha)
    } else {
        0.0
    })
}

pub fn limit_logmgf(alpha: f64, statistic: Statistic, lambda: f64) -> Result<f64> {
    match statistic {
        Statistic::K => limit_logmgf_k(alpha, lambda),
        Statistic::M(l) => limit_logmgf_m(alpha, l, lambda),
    }
}

pub fn rate(alpha: f64, statistic: Statistic, x: f64) -> Result<f64> {
    match statistic {
        Statistic::K => rate_k(alpha, x),
        Statistic::M(l) => rate_m(alpha, l, x),
    }
}

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section search for the maximum of a unimodal `f` on `[lo, hi]`.
fn golden_max<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, rel_tol: f64) -> Result<f64> {
    let mut a = hi - INV_PHI * (hi - lo);
    let mut b = lo + INV_PHI * (hi - lo);
    let (mut fa, mut fb) = (f(a), f(b));
    for _ in 0..500 {
        if hi - lo <= rel_tol * hi.abs().max(1e-300) {
            return Ok(0.5 * (lo + hi));
        }
        if fa < fb {
            lo = a;
            a = b;
            fa = fb;
            b = lo + INV_PHI * (hi - lo);
            fb = f(b);
        } else {
            hi = b;
            b = a;
            fb = fa;
            a = hi - INV_PHI * (hi - lo);
            fa = f(a);
        }
    }
    Err(Error::Optimizer(format!(
        "golden section did not reach tolerance on [{lo}, {hi}]"
    )))
}

/// `sup_{λ} {λ x - Λ(λ)}` computed numerically by golden-section search on
/// the concave objective over `λ > 0`.
pub fn legendre(alpha: f64, statistic: Statistic, x: f64, rel_tol: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if !(x > 0.0 && x.is_finite()) {
        return Err(Error::domain(format!("legendre requires x > 0, got {x}")));
    }
    let objective = |lambda: f64| lambda * x - limit_logmgf(alpha, statistic, lambda).unwrap_or(f64::NAN);
    let mut hi = 1.0;
    let mut doublings = 0;
    while objective(hi) >= objective(0.5 * hi) {
        hi *= 2.0;
        doublings += 1;
        if doublings > 2000 || !hi.is_finite() {
            return Err(Error::Optimizer("could not bracket the maximizer".into()));
        }
    }
    let arg = golden_max(objective, 0.0, hi, rel_tol)?;
    Ok(objective(arg))
}

/// `H_α = (1-α) ln(1-α) + α ln α` and `I_α(x) = exp{(H_α + ln x)/(1-α)}`.
pub fn entropy_form(alpha: f64, x: f64) -> Result<(f64, f64)> {
    check_alpha(alpha)?;
    if !(x > 0.0) {
        return Err(Error::domain(format!("entropy form requires x > 0, got {x}")));
    }
    let h = (1.0 - alpha) * (1.0 - alpha).ln() + alpha * alpha.ln();
    Ok((h, ((h + x.ln()) / (1.0 - alpha)).exp()))
}

/// The `α ∈ (0, 1)` minimizing `I_α(x)` for fixed `x > 1`, by golden-section
/// search on `ln I_α(x)`.
pub fn critical_alpha(x: f64) -> Result<f64> {
    if !(x > 1.0 && x.is_finite()) {
        return Err(Error::domain(format!("critical alpha requires x > 1, got {x}")));
    }
    let neg_log_rate = |a: f64| -entropy_form(a, x).map(|(h, _)| (h + x.ln()) / (1.0 - a)).unwrap_or(f64::NAN);
    golden_max(neg_log_rate, 1e-12, 1.0 - 1e-12, 1e-13)
}

/// Evaluation route for [`scaled_logmgf`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Exact `θ = 0` series.
    Series,
    /// Exact law by DP (`K`) or enumeration (`M_l`, `n ≤ 14`).
    Dp,
    MonteCarlo { reps: usize, seed: u64 },
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Series => "series",
            Method::Dp => "dp",
            Method::MonteCarlo { .. } => "mc",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanEntry {
    pub n: u64,
    pub lambda: f64,
    pub beta_n: f64,
    pub scaled_logmgf: f64,
    pub method: &'static str,
    pub stderr: Option<f64>,
}

/// `ln mean exp(t x_i)` shifted by the maximum, with the delta-method
/// standard error `sd(w) / (sqrt(R) mean(w))`.
pub fn mc_log_mean_exp(draws: &[u64], t: f64) -> (f64, Option<f64>) {
    let exps: Vec<f64> = draws.iter().map(|&x| t * x as f64).collect();
    let max = exps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = exps.iter().map(|e| (e - max).exp()).collect();
    let (mean, se) = mean_and_stderr(&w);
    (max + mean.ln(), se.map(|s| s / mean))
}

fn draw_statistic(params: &ModelParams, n: u64, statistic: Statistic, reps: usize, seed: u64) -> Vec<u64> {
    par_replicates(seed, reps, |rng| {
        let mut crp = CrpSampler::with_capacity(*params, n as usize);
        crp.run_to(n, rng);
        match statistic {
            Statistic::K => crp.k(),
            Statistic::M(l) => crp.multiplicity(l),
        }
    })
}

fn exact_log_mgf(params: &ModelParams, n: u64, statistic: Statistic, t: f64) -> Result<f64> {
    match statistic {
        Statistic::K => Ok(law_kn(params, n)?.log_mgf(t)),
        Statistic::M(l) => {
            let marginal = law_multiplicities(params, n)?.marginal_m(l);
            let terms: Vec<f64> = marginal
                .iter()
                .enumerate()
                .map(|(v, p)| p.ln() + t * v as f64)
                .collect();
            Ok(log_sum_exp(&terms))
        }
    }
}

fn series_log_mgf(params: &ModelParams, n: u64, statistic: Statistic, t: f64) -> Result<f64> {
    if params.theta() != 0.0 {
        return Err(Error::domain("series method is exact only at theta = 0"));
    }
    if t < 0.0 {
        return Err(Error::domain("series method requires lambda >= 0"));
    }
    if t == 0.0 {
        return Ok(0.0);
    }
    let y = -(-t).exp_m1();
    match statistic {
        Statistic::K => mgf_kn_series(params.alpha(), n, y),
        Statistic::M(l) => mgf_mln_series(params.alpha(), n, l, y),
    }
}

/// One entry `Λ̂_n(λ)` of a scan.
pub fn scaled_logmgf(
    params: &ModelParams,
    schedule: &ScaleSchedule,
    n: u64,
    lambda: f64,
    statistic: Statistic,
    method: Method,
) -> Result<ScanEntry> {
    params.require_positive_alpha()?;
    if n == 0 {
        return Err(Error::domain("n must be positive"));
    }
    let alpha = params.alpha();
    let speed = schedule.speed(n, alpha);
    let t = schedule.tilt(n, alpha, lambda);
    let (log_mgf, se) = match method {
        Method::Series => (series_log_mgf(params, n, statistic, t)?, None),
        Method::Dp => (exact_log_mgf(params, n, statistic, t)?, None),
        Method::MonteCarlo { reps, seed } => {
            let draws = draw_statistic(params, n, statistic, reps, seed);
            mc_log_mean_exp(&draws, t)
        }
    };
    Ok(ScanEntry {
        n,
        lambda,
        beta_n: schedule.beta(n),
        scaled_logmgf: log_mgf / speed,
        method: method.name(),
        stderr: se.map(|s| s / speed),
    })
}

/// Grid of `Λ̂_n(λ)` values, keyed by `(n, λ)` in grid order.
#[derive(Debug, Clone, PartialEq)]
pub struct MdpScan {
    pub params: ModelParams,
    pub schedule: ScaleSchedule,
    pub statistic: Statistic,
    pub entries: Vec<ScanEntry>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrendRow {
    pub lambda: f64,
    pub limit: f64,
    pub deviations: Vec<(u64, f64)>,
    pub strictly_decreasing: bool,
}

impl MdpScan {
    /// For each `λ > 0`, `|Λ̂_n(λ) - Λ(λ)|` along the `n` grid.
    pub fn trend(&self) -> Result<Vec<TrendRow>> {
        let mut lambdas: Vec<f64> = Vec::new();
        for e in &self.entries {
            if e.lambda > 0.0 && !lambdas.contains(&e.lambda) {
                lambdas.push(e.lambda);
            }
        }
        lambdas
            .into_iter()
            .map(|lambda| {
                let limit = limit_logmgf(self.params.alpha(), self.statistic, lambda)?;
                let deviations: Vec<(u64, f64)> = self
                    .entries
                    .iter()
                    .filter(|e| e.lambda == lambda)
                    .map(|e| (e.n, (e.scaled_logmgf - limit).abs()))
                    .collect();
                let strictly_decreasing = deviations.windows(2).all(|w| w[1].1 < w[0].1);
                Ok(TrendRow {
                    lambda,
                    limit,
                    deviations,
                    strictly_decreasing,
                })
            })
            .collect()
    }
}

/// `Λ̂_n(λ)` over `n_grid × lambda_grid`. Monte Carlo draws are made once
/// per `n` (seed derived from the master seed and `n`) and shared across
/// `λ`.
pub fn mdp_scan(
    params: &ModelParams,
    schedule: &ScaleSchedule,
    n_grid: &[u64],
    lambda_grid: &[f64],
    statistic: Statistic,
    method: Method,
) -> Result<MdpScan> {
    params.require_positive_alpha()?;
    if n_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::domain("n grid must be strictly increasing"));
    }
    let alpha = params.alpha();
    let mut entries = Vec::with_capacity(n_grid.len() * lambda_grid.len());
    for &n in n_grid {
        match method {
            Method::MonteCarlo { reps, seed } => {
                let draws = draw_statistic(params, n, statistic, reps, derive_seed(seed, n));
                let speed = schedule.speed(n, alpha);
                for &lambda in lambda_grid {
                    let (v, se) = mc_log_mean_exp(&draws, schedule.tilt(n, alpha, lambda));
                    entries.push(ScanEntry {
                        n,
                        lambda,
                        beta_n: schedule.beta(n),
                        scaled_logmgf: v / speed,
                        method: method.name(),
                        stderr: se.map(|s| s / speed),
                    });
                }
            }
            _ => {
                for &lambda in lambda_grid {
                    entries.push(scaled_logmgf(params, schedule, n, lambda, statistic, method)?);
                }
            }
        }
    }
    Ok(MdpScan {
        params: *params,
        schedule: *schedule,
        statistic,
        entries,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareRow {
    pub m: u64,
    pub lambda: f64,
    pub posterior: f64,
    pub posterior_stderr: Option<f64>,
    pub prior: f64,
    pub prior_stderr: Option<f64>,
    /// Separation beyond four combined standard errors (checked at the
    /// largest `m` only).
    pub separated: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorMdpReport {
    pub statistic: Statistic,
    pub rows: Vec<CompareRow>,
}

impl PosteriorMdpReport {
    pub fn flagged(&self) -> bool {
        self.rows.iter().any(|r| r.separated)
    }
}

/// Monte Carlo `Λ̂_m(λ)` for the posterior count (compounding sampler) and
/// for the same statistic under the prior `PD(α, θ)`, side by side.
pub fn posterior_mdp_compare(
    ctx: &PosteriorContext,
    schedule: &ScaleSchedule,
    m_grid: &[u64],
    lambda_grid: &[f64],
    statistic: Statistic,
    reps: usize,
    seed: u64,
) -> Result<PosteriorMdpReport> {
    let params = *ctx.params();
    let alpha = params.alpha();
    let shifted = ctx.shifted_params();
    let largest = m_grid.iter().copied().max().unwrap_or(0);
    let mut rows = Vec::new();
    for &m in m_grid {
        if m == 0 {
            return Err(Error::domain("m must be positive"));
        }
        let posterior_draws: Vec<u64> = par_replicates(derive_seed(seed, 2 * m), reps, |rng| {
            let eta = beta(ctx.beta_a(), ctx.beta_b(), rng)?;
            let mut crp = CrpSampler::with_capacity(shifted, m as usize);
            crp.run_to(m, rng);
            let count = match statistic {
                Statistic::K => crp.k(),
                Statistic::M(l) => crp.multiplicity(l),
            };
            binomial(count, eta, rng)
        })
        .into_iter()
        .collect::<Result<_>>()?;
        let prior_draws = draw_statistic(&params, m, statistic, reps, derive_seed(seed, 2 * m + 1));
        let speed = schedule.speed(m, alpha);
        for &lambda in lambda_grid {
            let t = schedule.tilt(m, alpha, lambda);
            let (post, post_se) = mc_log_mean_exp(&posterior_draws, t);
            let (pri, pri_se) = mc_log_mean_exp(&prior_draws, t);
            let (post, pri) = (post / speed, pri / speed);
            let (post_se, pri_se) = (post_se.map(|s| s / speed), pri_se.map(|s| s / speed));
            let separated = m == largest
                && match (post_se, pri_se) {
                    (Some(a), Some(b)) => (post - pri).abs() > 4.0 * (a * a + b * b).sqrt(),
                    _ => false,
                };
            rows.push(CompareRow {
                m,
                lambda,
                posterior: post,
                posterior_stderr: post_se,
                prior: pri,
                prior_stderr: pri_se,
                separated,
            });
        }
    }
    Ok(PosteriorMdpReport { statistic, rows })
}

/// Empirical vs exact moments of `K_n` at `α = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct CltReport {
    pub theta: f64,
    pub n: u64,
    pub reps: usize,
    pub exact_mean: f64,
    pub exact_var: f64,
    /// Exact skewness of `K_n` (equal to that of the standardized statistic).
    pub exact_skewness: f64,
    pub mean: f64,
    pub mean_stderr: Option<f64>,
    pub var: Option<f64>,
    pub var_stderr: Option<f64>,
    /// Mean and variance of `(K_n - θ ln n) / sqrt(ln n)`.
    pub standardized_mean: f64,
    pub standardized_var: Option<f64>,
    pub skewness: Option<f64>,
    pub mean_flag: bool,
    pub var_flag: bool,
}

impl CltReport {
    pub fn flagged(&self) -> bool {
        self.mean_flag || self.var_flag
    }
}

/// `K_n` at `α = 0` via the Bernoulli representation, replicated `reps`
/// times, compared against `Σ p_i` and `Σ p_i (1 - p_i)`,
/// `p_i = θ / (θ + i - 1)`.
pub fn clt_diagnostic(theta: f64, n: u64, reps: usize, seed: u64) -> Result<CltReport> {
    if !(theta > 0.0) {
        return Err(Error::domain(format!("theta must be positive, got {theta}")));
    }
    if n == 0 || reps == 0 {
        return Err(Error::domain("n and reps must be positive"));
    }
    let probs = (0..n).map(|i| theta / (theta + i as f64));
    let (mut mean_acc, mut var_acc, mut third_acc) = (CompensatedSum::new(), CompensatedSum::new(), CompensatedSum::new());
    for p in probs {
        mean_acc.add(p);
        var_acc.add(p * (1.0 - p));
        third_acc.add(p * (1.0 - p) * (1.0 - 2.0 * p));
    }
    let exact_mean = mean_acc.value();
    let exact_var = var_acc.value();
    let exact_skewness = if exact_var > 0.0 {
        third_acc.value() / exact_var.powf(1.5)
    } else {
        0.0
    };
    let draws: Vec<f64> = par_replicates(seed, reps, |rng| bernoulli_kn_alpha0(theta, n, rng))
        .into_iter()
        .map(|r| r.map(|k| k as f64))
        .collect::<Result<_>>()?;
    let (mean, mean_stderr) = mean_and_stderr(&draws);
    let central = |power: i32| -> f64 {
        draws.iter().map(|x| (x - mean).powi(power)).collect::<CompensatedSum>().value() / reps as f64
    };
    let (var, var_stderr, skewness) = if reps >= 2 {
        let m2 = central(2);
        let m4 = central(4);
        let m3 = central(3);
        let unbiased = m2 * reps as f64 / (reps as f64 - 1.0);
        let se = ((m4 - m2 * m2).max(0.0) / reps as f64).sqrt();
        let skew = if m2 > 0.0 { Some(m3 / m2.powf(1.5)) } else { None };
        (Some(unbiased), Some(se), skew)
    } else {
        (None, None, None)
    };
    let ln_n = (n as f64).ln();
    let standardized_mean = if ln_n > 0.0 { (mean - theta * ln_n) / ln_n.sqrt() } else { f64::NAN };
    let standardized_var = var.map(|v| if ln_n > 0.0 { v / ln_n } else { f64::NAN });
    let mean_flag = matches!(mean_stderr, Some(se) if (mean - exact_mean).abs() > 4.0 * se);
    let var_flag = matches!((var, var_stderr), (Some(v), Some(se)) if (v - exact_var).abs() > 4.0 * se);
    Ok(CltReport {
        theta,
        n,
        reps,
        exact_mean,
        exact_var,
        exact_skewness,
        mean,
        mean_stderr,
        var,
        var_stderr,
        standardized_mean,
        standardized_var,
        skewness,
        mean_flag,
        var_flag,
    })
}

/// `p_{α,l} = (-1)^{l-1} C(α, l)`, the a.s. limit of `M_{l,n} / K_n`.
pub fn limit_ratio(alpha: f64, l: u64) -> f64 {
    let sign = if l % 2 == 1 { 1.0 } else { -1.0 };
    sign * log_gen_binom(alpha, l).to_f64()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RatioRow {
    pub l: u64,
    pub mean: f64,
    pub stderr: Option<f64>,
    pub target: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LimitReport {
    pub n: u64,
    pub reps: usize,
    /// Replicate mean of `K_n / n^α`.
    pub kn_scaled_mean: f64,
    pub kn_scaled_stderr: Option<f64>,
    /// `E[K_n] / n^α` from the exact law when `n` is within DP range.
    pub kn_scaled_exact: Option<f64>,
    pub ratios: Vec<RatioRow>,
    /// The exact anchor is more than four standard errors away.
    pub anchor_flag: bool,
}

/// Per-replicate `K_n / n^α` and `M_{l,n} / K_n`, `l ≤ l_max`.
pub fn limit_ratio_diagnostic(
    params: &ModelParams,
    n: u64,
    l_max: u64,
    reps: usize,
    seed: u64,
) -> Result<LimitReport> {
    params.require_positive_alpha()?;
    if n == 0 || reps == 0 || l_max == 0 {
        return Err(Error::domain("n, l_max and reps must be positive"));
    }
    let alpha = params.alpha();
    let scale = (n as f64).powf(alpha);
    let paths: Vec<(u64, Vec<u64>)> = par_replicates(seed, reps, |rng| {
        let mut crp = CrpSampler::with_capacity(*params, n as usize);
        crp.run_to(n, rng);
        (crp.k(), (1..=l_max).map(|l| crp.multiplicity(l)).collect())
    });
    let scaled: Vec<f64> = paths.iter().map(|(k, _)| *k as f64 / scale).collect();
    let (kn_scaled_mean, kn_scaled_stderr) = mean_and_stderr(&scaled);
    let ratios = (1..=l_max)
        .map(|l| {
            let r: Vec<f64> = paths
                .iter()
                .map(|(k, m)| m[(l - 1) as usize] as f64 / *k as f64)
                .collect();
            let (mean, stderr) = mean_and_stderr(&r);
            RatioRow {
                l,
                mean,
                stderr,
                target: limit_ratio(alpha, l),
            }
        })
        .collect();
    let kn_scaled_exact = if n <= LAW_KN_MAX_N {
        Some(law_kn(params, n)?.mean() / scale)
    } else {
        None
    };
    let anchor_flag = match (kn_scaled_exact, kn_scaled_stderr) {
        (Some(exact), Some(se)) => (kn_scaled_mean - exact).abs() > 4.0 * se,
        _ => false,
    };
    Ok(LimitReport {
        n,
        reps,
        kn_scaled_mean,
        kn_scaled_stderr,
        kn_scaled_exact,
        ratios,
        anchor_flag,
    })
}

impl fmt::Display for ScheduleVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", if self.valid { "valid" } else { "invalid" }, self.reason)
    }
}
