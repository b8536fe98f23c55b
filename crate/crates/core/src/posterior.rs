//! Binomial–Beta representation of the posterior diversities.
//!
//! Given an initial sample of size `n` with `K_n = j` distinct types, the
//! number of new types `K̃_m^{(n)}` (resp. new types of frequency `l`,
//! `M̃_{l,m}^{(n)}`) in a further sample of size `m` is distributed as
//! `Binomial(K*_m, η)` (resp. `Binomial(M*_{l,m}, η)`), where `K*_m`,
//! `M*_{l,m}` come from `PD(α, θ + n)` and `η ~ Beta(θ/α + j, n/α - j)` is
//! independent of them. Only `(n, j)` matter; the observed frequencies do
//! not enter.

use rand::RngCore;

use crate::combinatorics::{ln_rising_factorial, noncentral_stirling2, GenFactorialSpec, StirlingTable};
use crate::error::{Error, Result};
use crate::exact::{
    beta_moments, binomial_moment, factorial_moment_kstar, frequency_weight,
    law_kn, multiplicity_dp, CountLaw,
};
use crate::numeric::{rel_err, CompensatedSum};
use crate::sampler::{beta, binomial, par_replicates, CrpSampler, ModelParams};
use crate::Statistic;

/// Largest `m` for the DP oracle in [`verify_representation`].
pub const VERIFY_DP_MAX_M: u64 = 200;
/// Relative tolerance for closed form vs oracle in verification reports.
pub const VERIFY_ORACLE_RTOL: f64 = 1e-8;
/// Largest `m` for the enumeration oracle used with `M_{l,m}`.
pub const ORACLE_ENUM_MAX_M: u64 = 20;
/// Monte Carlo flag threshold in standard errors.
pub const VERIFY_MC_SE: f64 = 4.0;

/// Conditioning data `(n, K_n = j)` under `PD(α, θ)` with `α > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PosteriorContext {
    params: ModelParams,
    n: u64,
    j: u64,
}

impl PosteriorContext {
    pub fn new(params: ModelParams, n: u64, j: u64) -> Result<Self> {
        params.require_positive_alpha()?;
        if j == 0 || j > n {
            return Err(Error::domain(format!("need 1 <= j <= n, got j={j}, n={n}")));
        }
        let ctx = Self { params, n, j };
        // n/α > n ≥ j for α < 1, so b > 0 always holds here
        debug_assert!(ctx.beta_b() > 0.0);
        if ctx.beta_a() <= 0.0 {
            return Err(Error::domain("theta/alpha + j must be positive"));
        }
        Ok(ctx)
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn j(&self) -> u64 {
        self.j
    }

    /// `θ/α + j`.
    pub fn beta_a(&self) -> f64 {
        self.params.theta() / self.params.alpha() + self.j as f64
    }

    /// `n/α - j`.
    pub fn beta_b(&self) -> f64 {
        self.n as f64 / self.params.alpha() - self.j as f64
    }

    /// `PD(α, θ + n)`, the law of the unconditional part.
    pub fn shifted_params(&self) -> ModelParams {
        self.params
            .with_theta_offset(self.n as f64)
            .expect("theta + n > theta is valid")
    }

    /// Mean of `η`: `(θ + jα) / (θ + n)`.
    pub fn eta_mean(&self) -> f64 {
        self.beta_a() / (self.beta_a() + self.beta_b())
    }
}

fn sample_compound<R: RngCore + ?Sized>(
    ctx: &PosteriorContext,
    m: u64,
    statistic: Statistic,
    beta_a_offset: f64,
    rng: &mut R,
) -> Result<(f64, u64, u64)> {
    if m == 0 {
        return Ok((0.0, 0, 0));
    }
    // η first, from the same stream, then the path: the two are independent.
    let eta = beta(ctx.beta_a() + beta_a_offset, ctx.beta_b(), rng)?;
    let mut crp = CrpSampler::with_capacity(ctx.shifted_params(), m as usize);
    crp.run_to(m, rng);
    let count = match statistic {
        Statistic::K => crp.k(),
        Statistic::M(l) => crp.multiplicity(l),
    };
    Ok((eta, count, binomial(count, eta, rng)?))
}

/// One draw of `K̃_m^{(n)} | K_n = j`.
pub fn sample_posterior_k<R: RngCore + ?Sized>(ctx: &PosteriorContext, m: u64, rng: &mut R) -> Result<u64> {
    Ok(sample_compound(ctx, m, Statistic::K, 0.0, rng)?.2)
}

/// One draw of `M̃_{l,m}^{(n)} | K_n = j`.
pub fn sample_posterior_m<R: RngCore + ?Sized>(
    ctx: &PosteriorContext,
    m: u64,
    l: u64,
    rng: &mut R,
) -> Result<u64> {
    if m == 0 {
        return Ok(0);
    }
    if l == 0 || l > m {
        return Err(Error::domain(format!("need 1 <= l <= m, got l={l}, m={m}")));
    }
    Ok(sample_compound(ctx, m, Statistic::M(l), 0.0, rng)?.2)
}

/// One draw of `(η, K*_m or M*_{l,m}, compound)`; exposes the latent pair
/// for independence diagnostics.
pub fn sample_posterior_latent<R: RngCore + ?Sized>(
    ctx: &PosteriorContext,
    m: u64,
    statistic: Statistic,
    rng: &mut R,
) -> Result<(f64, u64, u64)> {
    sample_compound(ctx, m, statistic, 0.0, rng)
}

/// `E[(K̃_m^{(n)})^r | K_n = j]`
/// `= Σ_t S(r,t) · (j+θ/α)_{t↑1} / ((θ+n)/α)_{t↑1} · E[(K*_m)_{t↓1}]`.
pub fn posterior_moment_k(ctx: &PosteriorContext, m: u64, r: u32) -> Result<f64> {
    let table = StirlingTable::global();
    if r as usize > table.max_n() {
        return Err(Error::domain(format!("order {r} beyond the Stirling table")));
    }
    let shifted = ctx.shifted_params();
    let eta = beta_moments(ctx.beta_a(), ctx.beta_b(), r)?;
    let mut acc = CompensatedSum::new();
    for t in 0..=r {
        let s = table.get_f64(r as usize, t as usize)?;
        if s == 0.0 {
            continue;
        }
        acc.add(s * eta[t as usize] * factorial_moment_kstar(&shifted, m, t)?);
    }
    Ok(acc.value())
}

/// `E[(M̃_{l,m}^{(n)})^r | K_n = j]` from the direct product form
/// `Σ_t S(r,t) (m)_{tl↓1} (α(1-α)_{(l-1)↑1}/l!)^t (j+θ/α)_{t↑1}
///  (θ+n+tα)_{(m-tl)↑1} / (θ+n)_{m↑1}`.
pub fn posterior_moment_m(ctx: &PosteriorContext, m: u64, l: u64, r: u32) -> Result<f64> {
    let table = StirlingTable::global();
    if r as usize > table.max_n() {
        return Err(Error::domain(format!("order {r} beyond the Stirling table")));
    }
    if l == 0 {
        return Err(Error::domain("block size l must be positive"));
    }
    let alpha = ctx.params.alpha();
    let theta_n = ctx.params.theta() + ctx.n as f64;
    let ln_weight = frequency_weight(alpha, l).ln();
    let ln_den = ln_rising_factorial(GenFactorialSpec::rising(theta_n, m)).ln_nonneg();
    let mut acc = CompensatedSum::new();
    for t in 0..=r as u64 {
        let s = table.get_f64(r as usize, t as usize)?;
        if s == 0.0 || t * l > m {
            continue;
        }
        let ln = ln_rising_factorial(GenFactorialSpec::falling(m as f64, t * l)).ln_nonneg()
            + t as f64 * ln_weight
            + ln_rising_factorial(GenFactorialSpec::rising(ctx.beta_a(), t)).ln_nonneg()
            + ln_rising_factorial(GenFactorialSpec::rising(theta_n + t as f64 * alpha, m - t * l))
                .ln_nonneg()
            - ln_den;
        acc.add(s * ln.exp());
    }
    Ok(acc.value())
}

/// The same raw moment through non-central Stirling numbers:
/// `Σ_i (-1)^{r-i} (a)_{i↑1} S(r, i; a) (θ+n+iα)_{m↑1} / (θ+n)_{m↑1}` with
/// `a = j + θ/α`. An alternating sum; only for cross-checking small cases.
pub fn posterior_moment_k_noncentral(ctx: &PosteriorContext, m: u64, r: u32) -> Result<f64> {
    let a = ctx.beta_a();
    let alpha = ctx.params.alpha();
    let theta_n = ctx.params.theta() + ctx.n as f64;
    let ln_den = ln_rising_factorial(GenFactorialSpec::rising(theta_n, m)).ln_nonneg();
    let mut acc = CompensatedSum::new();
    for i in 0..=r {
        let sign = if (r - i) % 2 == 0 { 1.0 } else { -1.0 };
        let ln_ratio = ln_rising_factorial(GenFactorialSpec::rising(theta_n + i as f64 * alpha, m))
            .ln_nonneg()
            - ln_den;
        let rising_a = ln_rising_factorial(GenFactorialSpec::rising(a, i as u64)).to_f64();
        acc.add(sign * rising_a * noncentral_stirling2(r as usize, i as usize, a)? * ln_ratio.exp());
    }
    Ok(acc.value())
}

/// Raw posterior moment for either statistic.
pub fn posterior_moment(ctx: &PosteriorContext, m: u64, statistic: Statistic, r: u32) -> Result<f64> {
    match statistic {
        Statistic::K => posterior_moment_k(ctx, m, r),
        Statistic::M(l) => posterior_moment_m(ctx, m, l, r),
    }
}

/// Compound moment `Σ_t S(r,t) E[(N)_{t↓1}] E[η^t]` with `N` taken from
/// the exact law of `K*_m` (DP) or `M*_{l,m}` (enumeration).
pub fn oracle_posterior_moment(
    ctx: &PosteriorContext,
    m: u64,
    statistic: Statistic,
    r: u32,
) -> Result<f64> {
    let eta = beta_moments(ctx.beta_a(), ctx.beta_b(), r)?;
    if m == 0 {
        return binomial_moment(&CountLaw::Fixed(0), &eta, r);
    }
    let shifted = ctx.shifted_params();
    let pmf = match statistic {
        Statistic::K => {
            let law = law_kn(&shifted, m)?;
            std::iter::once(0.0).chain(law.pmf().map(|(_, p)| p)).collect()
        }
        Statistic::M(l) => {
            if m > ORACLE_ENUM_MAX_M {
                return Err(Error::resource(format!(
                    "enumeration oracle limited to m <= {ORACLE_ENUM_MAX_M}"
                )));
            }
            multiplicity_dp(&shifted, m).marginal_m(l)
        }
    };
    binomial_moment(&CountLaw::Pmf(pmf), &eta, r)
}

/// Test hook for [`verify_representation`]: perturbs the sampler only.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct VerifyOptions {
    /// Added to the Beta `a` parameter used by the Monte Carlo draws.
    pub beta_a_offset: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerificationRow {
    pub r: u32,
    pub closed_form: f64,
    pub oracle: f64,
    pub mc_mean: f64,
    /// `None` when fewer than two replicates were drawn.
    pub mc_stderr: Option<f64>,
    pub oracle_flag: bool,
    pub mc_flag: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerificationReport {
    pub statistic: Statistic,
    pub m: u64,
    pub reps: usize,
    pub rows: Vec<VerificationRow>,
}

impl VerificationReport {
    pub fn flagged(&self) -> bool {
        self.rows.iter().any(|r| r.oracle_flag || r.mc_flag)
    }
}

/// Three-way comparison of raw posterior moments `r = 0..=r_max`: closed
/// form, exact oracle, and Monte Carlo over `reps` compound draws.
pub fn verify_representation(
    ctx: &PosteriorContext,
    m: u64,
    statistic: Statistic,
    r_max: u32,
    reps: usize,
    seed: u64,
    options: VerifyOptions,
) -> Result<VerificationReport> {
    match statistic {
        Statistic::K if m > VERIFY_DP_MAX_M => {
            return Err(Error::resource(format!("DP oracle limited to m <= {VERIFY_DP_MAX_M}")))
        }
        Statistic::M(_) if m > ORACLE_ENUM_MAX_M => {
            return Err(Error::resource(format!(
                "enumeration oracle limited to m <= {ORACLE_ENUM_MAX_M}"
            )))
        }
        Statistic::M(l) if l == 0 => return Err(Error::domain("block size l must be positive")),
        _ => {}
    }
    let draws: Vec<u64> = par_replicates(seed, reps, |rng| {
        sample_compound(ctx, m, statistic, options.beta_a_offset, rng).map(|d| d.2)
    })
    .into_iter()
    .collect::<Result<_>>()?;
    let mut rows = Vec::with_capacity(r_max as usize + 1);
    for r in 0..=r_max {
        let closed_form = posterior_moment(ctx, m, statistic, r)?;
        let oracle = oracle_posterior_moment(ctx, m, statistic, r)?;
        let powers: Vec<f64> = draws.iter().map(|&x| (x as f64).powi(r as i32)).collect();
        let (mc_mean, mc_stderr) = mean_and_stderr(&powers);
        let oracle_flag = rel_err(closed_form, oracle) > VERIFY_ORACLE_RTOL
            && (closed_form - oracle).abs() > 1e-300;
        let mc_flag = match mc_stderr {
            Some(se) if se > 0.0 => (mc_mean - closed_form).abs() > VERIFY_MC_SE * se,
            Some(_) => rel_err(mc_mean, closed_form) > VERIFY_ORACLE_RTOL,
            None => false,
        };
        rows.push(VerificationRow {
            r,
            closed_form,
            oracle,
            mc_mean,
            mc_stderr,
            oracle_flag,
            mc_flag,
        });
    }
    Ok(VerificationReport {
        statistic,
        m,
        reps,
        rows,
    })
}

/// Sample mean and its standard error (`None` below two observations).
pub(crate) fn mean_and_stderr(xs: &[f64]) -> (f64, Option<f64>) {
    if xs.is_empty() {
        return (f64::NAN, None);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().copied().collect::<CompensatedSum>().value() / n;
    if xs.len() < 2 {
        return (mean, None);
    }
    let ss = xs
        .iter()
        .map(|x| (x - mean) * (x - mean))
        .collect::<CompensatedSum>()
        .value();
    (mean, Some((ss / (n - 1.0) / n).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampler::RngStream;

    fn ctx(a: f64, t: f64, n: u64, j: u64) -> PosteriorContext {
        PosteriorContext::new(ModelParams::new(a, t).unwrap(), n, j).unwrap()
    }

    #[test]
    fn context_validation() {
        let p = ModelParams::new(0.5, 1.0).unwrap();
        assert!(PosteriorContext::new(p, 8, 0).is_err());
        assert!(PosteriorContext::new(p, 8, 9).is_err());
        assert!(PosteriorContext::new(ModelParams::new(0.0, 1.0).unwrap(), 8, 3).is_err());
        let c = PosteriorContext::new(p, 8, 3).unwrap();
        assert_eq!(c.beta_a(), 5.0);
        assert_eq!(c.beta_b(), 13.0);
        assert!((c.eta_mean() - 2.5 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn empty_additional_sample() {
        let c = ctx(0.5, 1.0, 8, 3);
        let mut rng = RngStream::new(1, 0).rng();
        assert_eq!(sample_posterior_k(&c, 0, &mut rng).unwrap(), 0);
        assert_eq!(sample_posterior_m(&c, 0, 2, &mut rng).unwrap(), 0);
        assert_eq!(posterior_moment_k(&c, 0, 0).unwrap(), 1.0);
    }

    #[test]
    fn first_moment_closed_forms() {
        let c = ctx(0.5, 1.0, 8, 3);
        let p_new = (1.0 + 3.0 * 0.5) / 9.0;
        assert!((posterior_moment_k(&c, 1, 1).unwrap() - p_new).abs() < 1e-15);
        assert!((posterior_moment_m(&c, 1, 1, 1).unwrap() - p_new).abs() < 1e-15);
        assert_eq!(posterior_moment_k(&c, 5, 0).unwrap(), 1.0);
        let shifted = c.shifted_params();
        for m in [1u64, 4, 20] {
            let ek = factorial_moment_kstar(&shifted, m, 1).unwrap();
            let expect = (3.0 * 0.5 + 1.0) / 9.0 * ek;
            assert!(rel_err(posterior_moment_k(&c, m, 1).unwrap(), expect) < 1e-13);
        }
    }

    #[test]
    fn moments_match_oracles() {
        let c = ctx(0.5, 1.0, 8, 3);
        for m in [1u64, 2, 10] {
            for r in 0..=5 {
                let a = posterior_moment_k(&c, m, r).unwrap();
                let b = oracle_posterior_moment(&c, m, Statistic::K, r).unwrap();
                assert!(rel_err(a, b) < 1e-9, "K m={m} r={r}");
            }
        }
        for m in 1..=12u64 {
            for r in 0..=3 {
                let a = posterior_moment_m(&c, m, 2, r).unwrap();
                let b = oracle_posterior_moment(&c, m, Statistic::M(2), r).unwrap();
                if b == 0.0 {
                    assert!(a.abs() < 1e-15);
                } else {
                    assert!(rel_err(a, b) < 1e-9, "M2 m={m} r={r}: {a} {b}");
                }
            }
        }
    }

    #[test]
    fn noncentral_route_agrees() {
        let c = ctx(0.5, 1.0, 8, 3);
        for m in [1u64, 3, 10, 25] {
            for r in 0..=4 {
                let a = posterior_moment_k(&c, m, r).unwrap();
                let b = posterior_moment_k_noncentral(&c, m, r).unwrap();
                assert!(rel_err(b, a) < 1e-7, "m={m} r={r}: {a} {b}");
            }
        }
    }

    #[test]
    fn first_moment_increases_with_j() {
        for m in [1u64, 5, 15] {
            let vals: Vec<f64> = (1..=4)
                .map(|j| posterior_moment_k(&ctx(0.5, 1.0, 8, j), m, 1).unwrap())
                .collect();
            assert!(vals.windows(2).all(|w| w[0] < w[1]), "{vals:?}");
        }
    }

    #[test]
    fn samples_are_in_range() {
        let c = ctx(0.75, 0.5, 8, 4);
        let mut rng = RngStream::new(3, 0).rng();
        for _ in 0..500 {
            let k = sample_posterior_k(&c, 12, &mut rng).unwrap();
            assert!(k <= 12);
            let m3 = sample_posterior_m(&c, 12, 3, &mut rng).unwrap();
            assert!(m3 <= 4);
            assert!(sample_posterior_m(&c, 6, 6, &mut rng).unwrap() <= 1);
        }
        assert!(sample_posterior_m(&c, 5, 6, &mut rng).is_err());
    }

    #[test]
    fn one_step_new_type_probability() {
        let c = ctx(0.5, 1.0, 10, 5);
        let reps = 100_000;
        let hits: u64 = par_replicates(17, reps, |rng| sample_posterior_k(&c, 1, rng).unwrap())
            .into_iter()
            .sum();
        let p = (1.0 + 5.0 * 0.5) / 11.0;
        let se = (p * (1.0 - p) / reps as f64).sqrt();
        assert!((hits as f64 / reps as f64 - p).abs() < 4.0 * se);
    }

    #[test]
    fn eta_independent_of_count() {
        let c = ctx(0.5, 1.0, 10, 5);
        let reps = 20_000;
        let pairs: Vec<(f64, f64)> = par_replicates(23, reps, |rng| {
            let (eta, k, _) = sample_posterior_latent(&c, 30, Statistic::K, rng).unwrap();
            (eta, k as f64)
        });
        let n = reps as f64;
        let (me, mk) = pairs.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0 / n, a.1 + p.1 / n));
        let (mut cov, mut ve, mut vk) = (0.0, 0.0, 0.0);
        for (e, k) in &pairs {
            cov += (e - me) * (k - mk);
            ve += (e - me) * (e - me);
            vk += (k - mk) * (k - mk);
        }
        let corr = cov / (ve * vk).sqrt();
        // SE of a sample correlation under independence is ~1/sqrt(n)
        assert!(corr.abs() <= 4.0 / n.sqrt(), "corr {corr}");
    }

    #[test]
    fn verifier_passes_and_catches_corruption() {
        let c = ctx(0.5, 1.0, 8, 3);
        let good = verify_representation(&c, 10, Statistic::K, 4, 40_000, 5, VerifyOptions::default()).unwrap();
        assert!(!good.flagged(), "{good:?}");
        let r0 = &good.rows[0];
        assert_eq!((r0.closed_form, r0.mc_mean), (1.0, 1.0));
        assert!((r0.oracle - 1.0).abs() < 1e-12);

        let bad = verify_representation(
            &c,
            10,
            Statistic::K,
            2,
            40_000,
            5,
            VerifyOptions { beta_a_offset: 1.0 },
        )
        .unwrap();
        assert!(bad.rows[1].mc_flag, "{bad:?}");
        // the shifted mean moves by (a+1)(a+b)/(a(a+b+1))
        let (a, b) = (c.beta_a(), c.beta_b());
        let factor = (a + 1.0) * (a + b) / (a * (a + b + 1.0));
        let row = &bad.rows[1];
        assert!((row.mc_mean / row.closed_form - factor).abs() < 6.0 * row.mc_stderr.unwrap() / row.closed_form);
    }

    #[test]
    fn verifier_single_replicate_has_no_stderr() {
        let c = ctx(0.5, 1.0, 8, 3);
        let rep = verify_representation(&c, 5, Statistic::M(1), 2, 1, 0, VerifyOptions::default()).unwrap();
        assert!(rep.rows.iter().all(|r| r.mc_stderr.is_none() && !r.mc_flag));
        assert!(verify_representation(&c, 21, Statistic::M(1), 2, 1, 0, VerifyOptions::default()).is_err());
    }
}
