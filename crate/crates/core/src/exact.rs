//! Exact (non-Monte-Carlo) laws and moments.
//!
//! * [`law_kn`]: law of `K_n` by dynamic programming over the predictive
//!   rule, in the log domain.
//! * [`law_multiplicities`]: exact joint law of the block-size histogram
//!   for small `n`, by DP over integer partitions.
//! * [`mgf_kn_series`], [`mgf_mln_series`]: the `θ = 0` series for
//!   `E[(1-y)^{-K_n}]` and `E[(1-y)^{-M_{l,n}}]`.
//! * Closed-form factorial moments of `K*_m`, `M*_{l,m}` under
//!   `PD(α, θ')`, Stirling expansion of binomial moments, Beta moments.

use std::collections::BTreeMap;

use crate::combinatorics::{
    falling_factorial, ln_rising_factorial, log_gen_binom, GenFactorialSpec, StirlingTable,
};
use crate::error::{Error, Result};
use crate::numeric::{log_add_exp, log_sum_exp, CompensatedSum, LogSumAccumulator};
use crate::sampler::ModelParams;

/// Quadratic-cost guard for [`law_kn`].
pub const LAW_KN_MAX_N: u64 = 20_000;
/// Enumeration guard for [`law_multiplicities`].
pub const LAW_MULTIPLICITIES_MAX_N: u64 = 14;
/// Term budget of [`mgf_kn_series`].
pub const SERIES_MAX_TERMS: u64 = 100_000_000;
/// Largest order accepted by the factorial-moment formulas.
pub const FACTORIAL_MOMENT_MAX_R: u32 = 30;
/// Largest tolerated `max|term| / |sum|` in the alternating form.
pub const CANCELLATION_LIMIT: f64 = 1e12;

/// Law of `K_n` as log-probabilities over `k = 1..=n`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactLaw {
    n: u64,
    log_prob: Vec<f64>,
}

impl ExactLaw {
    pub fn n(&self) -> u64 {
        self.n
    }

    /// `ln P(K_n = k)` for `k = 1..=n` (index `k - 1`).
    pub fn log_probs(&self) -> &[f64] {
        &self.log_prob
    }

    pub fn log_prob(&self, k: u64) -> f64 {
        if k == 0 || k > self.n {
            f64::NEG_INFINITY
        } else {
            self.log_prob[(k - 1) as usize]
        }
    }

    pub fn prob(&self, k: u64) -> f64 {
        self.log_prob(k).exp()
    }

    /// `(k, P(K_n = k))` pairs.
    pub fn pmf(&self) -> impl Iterator<Item = (u64, f64)> + '_ {
        self.log_prob
            .iter()
            .enumerate()
            .map(|(i, lp)| (i as u64 + 1, lp.exp()))
    }

    pub fn log_total(&self) -> f64 {
        log_sum_exp(&self.log_prob)
    }

    pub fn mean(&self) -> f64 {
        self.pmf().map(|(k, p)| k as f64 * p).collect::<CompensatedSum>().value()
    }

    /// `E[(K_n)_{r↓1}]`.
    pub fn factorial_moment(&self, r: u64) -> f64 {
        self.pmf()
            .map(|(k, p)| p * falling_factorial(k as f64, r))
            .collect::<CompensatedSum>()
            .value()
    }

    /// `ln E[exp(t K_n)]`.
    pub fn log_mgf(&self, t: f64) -> f64 {
        let terms: Vec<f64> = self
            .log_prob
            .iter()
            .enumerate()
            .map(|(i, lp)| lp + t * (i + 1) as f64)
            .collect();
        log_sum_exp(&terms)
    }
}

/// Exact law of `K_n` from the recursion
/// `P(K_{s+1}=k) = P(K_s=k)(s-kα)/(θ+s) + P(K_s=k-1)(θ+(k-1)α)/(θ+s)`.
pub fn law_kn(params: &ModelParams, n: u64) -> Result<ExactLaw> {
    if n == 0 {
        return Err(Error::domain("n must be positive"));
    }
    if n > LAW_KN_MAX_N {
        return Err(Error::resource(format!(
            "law_kn limited to n <= {LAW_KN_MAX_N}, got {n}"
        )));
    }
    let (alpha, theta) = (params.alpha(), params.theta());
    let nu = n as usize;
    // ln(θ + (k-1)α) for k = 2..n, indexed by k; the first block is always
    // present, and θ itself may be negative
    let ln_new: Vec<f64> = (0..=nu)
        .map(|k| {
            if k <= 1 {
                f64::NEG_INFINITY
            } else {
                (theta + (k - 1) as f64 * alpha).ln()
            }
        })
        .collect();
    let mut cur = vec![f64::NEG_INFINITY; nu + 1];
    let mut next = vec![f64::NEG_INFINITY; nu + 1];
    cur[1] = 0.0;
    for s in 1..nu {
        let ln_den = (theta + s as f64).ln();
        let sf = s as f64;
        next[s + 1] = cur[s] + ln_new[s + 1] - ln_den;
        for k in 1..=s {
            let stay = cur[k] + (sf - k as f64 * alpha).ln() - ln_den;
            let open = cur[k - 1] + ln_new[k] - ln_den;
            next[k] = log_add_exp(stay, open);
        }
        std::mem::swap(&mut cur, &mut next);
    }
    cur.remove(0);
    Ok(ExactLaw { n, log_prob: cur })
}

/// Exact joint law of the block-size histogram `(M_{1,n}, …, M_{n,n})`.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiplicityLaw {
    n: u64,
    /// `(m_1, …, m_n)` with probability; `m[l-1]` is the number of blocks
    /// of size `l`.
    atoms: Vec<(Vec<u32>, f64)>,
}

impl MultiplicityLaw {
    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn atoms(&self) -> &[(Vec<u32>, f64)] {
        &self.atoms
    }

    pub fn expectation<F: Fn(&[u32]) -> f64>(&self, f: F) -> f64 {
        self.atoms
            .iter()
            .map(|(m, p)| p * f(m))
            .collect::<CompensatedSum>()
            .value()
    }

    /// Marginal law of `K_n` as probabilities indexed by `k` (entry 0 is
    /// `P(K_n = 0) = 0`).
    pub fn marginal_k(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n as usize + 1];
        for (m, p) in &self.atoms {
            let k: u32 = m.iter().sum();
            out[k as usize] += p;
        }
        out
    }

    /// Marginal law of `M_{l,n}` indexed by its value.
    pub fn marginal_m(&self, l: u64) -> Vec<f64> {
        let mut out = vec![0.0; (self.n / l.max(1)) as usize + 1];
        if l == 0 || l > self.n {
            out[0] = 1.0;
            return out;
        }
        for (m, p) in &self.atoms {
            out[m[(l - 1) as usize] as usize] += p;
        }
        out
    }
}

/// Joint law of the multiplicity histogram by forward DP over the integer
/// partitions of `1, 2, …, n` using the predictive rule.
pub fn law_multiplicities(params: &ModelParams, n: u64) -> Result<MultiplicityLaw> {
    if n == 0 {
        return Err(Error::domain("n must be positive"));
    }
    if n > LAW_MULTIPLICITIES_MAX_N {
        return Err(Error::resource(format!(
            "law_multiplicities limited to n <= {LAW_MULTIPLICITIES_MAX_N}, got {n}"
        )));
    }
    Ok(multiplicity_dp(params, n))
}

/// The same DP without the public size guard; callers keep `n` small
/// (`p(20) = 627` states).
pub(crate) fn multiplicity_dp(params: &ModelParams, n: u64) -> MultiplicityLaw {
    let (alpha, theta) = (params.alpha(), params.theta());
    let width = n as usize;
    let mut first = vec![0u32; width];
    first[0] = 1;
    let mut states: BTreeMap<Vec<u32>, f64> = BTreeMap::from([(first, 1.0)]);
    for s in 1..width {
        let den = theta + s as f64;
        let mut next: BTreeMap<Vec<u32>, f64> = BTreeMap::new();
        for (m, p) in &states {
            let k: u32 = m.iter().sum();
            let mut opened = m.clone();
            opened[0] += 1;
            *next.entry(opened).or_insert(0.0) += p * (theta + k as f64 * alpha) / den;
            for size in 1..=s {
                let c = m[size - 1];
                if c == 0 {
                    continue;
                }
                let mut grown = m.clone();
                grown[size - 1] -= 1;
                grown[size] += 1;
                *next.entry(grown).or_insert(0.0) +=
                    p * (size as f64 - alpha) * c as f64 / den;
            }
        }
        states = next;
    }
    MultiplicityLaw {
        n,
        atoms: states.into_iter().collect(),
    }
}

fn check_alpha_open(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("alpha must lie in (0, 1), got {alpha}")))
    }
}

fn check_y(y: f64) -> Result<()> {
    if y > 0.0 && y < 1.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("y must lie in (0, 1), got {y}")))
    }
}

/// `ln E[(1-y)^{-K_n}]` under `PD(α, 0)` via
/// `Σ_{i≥0} y^i C(iα + n - 1, n - 1)`.
///
/// Terms are log-concave in `i`, so once the term ratio drops below one the
/// remaining tail is bounded by a geometric series. Summation stops when 20
/// consecutive terms and that tail bound are each below `1e-14` of the
/// partial sum.
pub fn mgf_kn_series(alpha: f64, n: u64, y: f64) -> Result<f64> {
    check_alpha_open(alpha)?;
    check_y(y)?;
    if n == 0 {
        return Err(Error::domain("n must be positive"));
    }
    let ln_y = y.ln();
    let ln_eps = (1e-14f64).ln();
    let term = |i: u64| -> f64 {
        i as f64 * ln_y + log_gen_binom(i as f64 * alpha + (n - 1) as f64, n - 1).ln_nonneg()
    };
    let mut acc = LogSumAccumulator::new();
    let mut prev = term(0);
    acc.push(prev);
    let mut small_run = 0u32;
    for i in 1..SERIES_MAX_TERMS {
        let t = term(i);
        acc.push(t);
        let threshold = acc.value() + ln_eps;
        if t < threshold {
            small_run += 1;
        } else {
            small_run = 0;
        }
        if small_run >= 20 {
            let ln_ratio = t - prev;
            if ln_ratio < 0.0 {
                let ratio = ln_ratio.exp();
                let ln_tail = t + ratio.ln() - (-ratio).ln_1p();
                if ln_tail < threshold {
                    return Ok(acc.value());
                }
            }
        }
        prev = t;
    }
    let ln_ratio_last = term(SERIES_MAX_TERMS - 1) - term(SERIES_MAX_TERMS - 2);
    let log_tail_bound = if ln_ratio_last < 0.0 {
        let ratio = ln_ratio_last.exp();
        prev + ratio.ln() - (-ratio).ln_1p()
    } else {
        f64::INFINITY
    };
    Err(Error::SeriesNotConverged {
        terms: SERIES_MAX_TERMS,
        log_partial_sum: acc.value(),
        log_tail_bound,
    })
}

/// `α (1-α)_{(l-1)↑1} / l!`, the limiting share of blocks of size `l`.
pub fn frequency_weight(alpha: f64, l: u64) -> f64 {
    let ln = ln_rising_factorial(GenFactorialSpec::rising(1.0 - alpha, l - 1)).ln_nonneg()
        - crate::combinatorics::ln_gamma(l as f64 + 1.0);
    alpha * ln.exp()
}

/// `ln E[(1-y)^{-M_{l,n}}]` under `PD(α, 0)` via the finite sum
/// `Σ_{i=0}^{⌊n/l⌋} y_{n,l}^i · n/(n - il + iα) · C(n - il + iα, n - il)`
/// with `y_{n,l} = α(1-α)_{(l-1)↑1}/l! · y/(1-y)`.
///
/// The sum is exact only at `θ = 0`; at `θ ≠ 0` it disagrees with the
/// enumerated law already at `n = 2`.
pub fn mgf_mln_series(alpha: f64, n: u64, l: u64, y: f64) -> Result<f64> {
    check_alpha_open(alpha)?;
    check_y(y)?;
    if l == 0 || l > n {
        return Err(Error::domain(format!("need 1 <= l <= n, got l={l}, n={n}")));
    }
    let ln_yl = frequency_weight(alpha, l).ln() + y.ln() - (-y).ln_1p();
    let nf = n as f64;
    let mut acc = LogSumAccumulator::new();
    for i in 0..=(n / l) {
        let rest = n - i * l;
        let x = rest as f64 + i as f64 * alpha;
        let t = i as f64 * ln_yl + (nf / x).ln() + log_gen_binom(x, rest).ln_nonneg();
        acc.push(t);
    }
    Ok(acc.value())
}

fn check_order(r: u32) -> Result<()> {
    if r > FACTORIAL_MOMENT_MAX_R {
        Err(Error::domain(format!(
            "factorial moment order {r} exceeds {FACTORIAL_MOMENT_MAX_R}"
        )))
    } else {
        Ok(())
    }
}

/// `E[(K*_m)_{r↓1}]` under `PD(α, θ')` (pass `θ' = θ + n` for the posterior
/// setting):
/// `(θ'/α)_{r↑1} Σ_{i=0}^r (-1)^{r-i} C(r,i) (θ'+iα)_{m↑1} / (θ')_{m↑1}`.
///
/// The alternating sum is the `r`-th forward difference at 0 of
/// `f(i) = ∏_{k<m} (θ'+k+iα)/(θ'+k)`. It is built factor by factor with the
/// Leibniz rule for differences; each factor is linear in `i`, so
/// `Δ^s(fg)(0) = Δ^s f(0) g(s) + s Δ^{s-1} f(0) Δg`, and every term is
/// nonnegative whenever `θ' ≥ 0`. No cancellation occurs.
pub fn factorial_moment_kstar(params_post: &ModelParams, m: u64, r: u32) -> Result<f64> {
    check_order(r)?;
    params_post.require_positive_alpha()?;
    if r == 0 {
        return Ok(1.0);
    }
    if m < r as u64 {
        return Ok(0.0);
    }
    let (alpha, theta) = (params_post.alpha(), params_post.theta());
    let ru = r as usize;
    // d[s] = Δ^s P(0) · exp(ln_scale) for the running product P.
    let mut d = vec![0.0; ru + 1];
    // First factor kept unnormalized, (θ' + iα); its 1/θ' cancels against
    // the leading θ'/α of the prefactor.
    d[0] = theta;
    d[1] = alpha;
    let mut ln_scale = 0.0;
    for k in 1..m {
        let c = theta + k as f64;
        let slope = alpha / c;
        for s in (0..=ru).rev() {
            let mut v = d[s] * (1.0 + s as f64 * slope);
            if s > 0 {
                v += s as f64 * d[s - 1] * slope;
            }
            d[s] = v;
        }
        let big = d.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
        if big > 1e200 {
            ln_scale += big.ln();
            d.iter_mut().for_each(|x| *x /= big);
        }
    }
    let prefactor = ln_rising_factorial(GenFactorialSpec::rising(theta / alpha + 1.0, r as u64 - 1));
    let ln_pref = prefactor.ln_nonneg() - alpha.ln();
    Ok(d[ru] * (ln_pref + ln_scale).exp())
}

/// The displayed alternating sum evaluated literally: log-domain terms,
/// summed by increasing magnitude with compensation, failing when the
/// cancellation ratio `max|term| / |sum|` exceeds [`CANCELLATION_LIMIT`].
/// Kept as an independent route to [`factorial_moment_kstar`].
pub fn factorial_moment_kstar_alternating(
    params_post: &ModelParams,
    m: u64,
    r: u32,
) -> Result<f64> {
    check_order(r)?;
    params_post.require_positive_alpha()?;
    let (alpha, theta) = (params_post.alpha(), params_post.theta());
    if theta <= 0.0 {
        return Err(Error::domain("alternating form needs theta' > 0"));
    }
    let ln_den = ln_rising_factorial(GenFactorialSpec::rising(theta, m)).ln_nonneg();
    let mut terms: Vec<f64> = (0..=r)
        .map(|i| {
            let ln_binom = log_gen_binom(r as f64, i as u64).ln_nonneg();
            let ln_num =
                ln_rising_factorial(GenFactorialSpec::rising(theta + i as f64 * alpha, m)).ln_nonneg();
            let mag = (ln_binom + ln_num - ln_den).exp();
            if (r - i) % 2 == 0 {
                mag
            } else {
                -mag
            }
        })
        .collect();
    terms.sort_by(|a, b| a.abs().total_cmp(&b.abs()));
    let sum: CompensatedSum = terms.iter().copied().collect();
    let sum = sum.value();
    let max = terms.last().map_or(0.0, |t| t.abs());
    let ratio = max / sum.abs();
    if ratio > CANCELLATION_LIMIT || !ratio.is_finite() {
        return Err(Error::Cancellation {
            ratio,
            limit: CANCELLATION_LIMIT,
        });
    }
    let pref = ln_rising_factorial(GenFactorialSpec::rising(theta / alpha, r as u64)).ln_nonneg();
    Ok(sum * pref.exp())
}

/// `E[(M*_{l,m})_{r↓1}]` under `PD(α, θ')`:
/// `(m)_{rl↓1} (α(1-α)_{(l-1)↑1}/l!)^r (θ'/α)_{r↑1} (θ'+rα)_{(m-rl)↑1} / (θ')_{m↑1}`.
pub fn factorial_moment_mstar(params_post: &ModelParams, m: u64, l: u64, r: u32) -> Result<f64> {
    check_order(r)?;
    params_post.require_positive_alpha()?;
    if l == 0 {
        return Err(Error::domain("block size l must be positive"));
    }
    if r == 0 {
        return Ok(1.0);
    }
    let rl = r as u64 * l;
    if rl > m {
        return Ok(0.0);
    }
    let (alpha, theta) = (params_post.alpha(), params_post.theta());
    let rf = r as f64;
    // (θ'/α)_{r↑1} / (θ')_{m↑1} = (1/α) (θ'/α + 1)_{(r-1)↑1} / (θ' + 1)_{(m-1)↑1}
    let ln = ln_rising_factorial(GenFactorialSpec::falling(m as f64, rl)).ln_nonneg()
        + rf * frequency_weight(alpha, l).ln()
        - alpha.ln()
        + ln_rising_factorial(GenFactorialSpec::rising(theta / alpha + 1.0, r as u64 - 1)).ln_nonneg()
        - ln_rising_factorial(GenFactorialSpec::rising(theta + 1.0, m - 1)).ln_nonneg()
        + ln_rising_factorial(GenFactorialSpec::rising(theta + rf * alpha, m - rl)).ln_nonneg();
    Ok(ln.exp())
}

/// Law of the trial count `N` in a binomial compound.
#[derive(Debug, Clone, PartialEq)]
pub enum CountLaw {
    Fixed(u64),
    /// `probs[k] = P(N = k)` for `k = 0, 1, …`.
    Pmf(Vec<f64>),
    /// `moments[t] = E[(N)_{t↓1}]` for `t = 0, 1, …`.
    FactorialMoments(Vec<f64>),
}

impl CountLaw {
    pub fn falling_moment(&self, t: u64) -> Result<f64> {
        match self {
            CountLaw::Fixed(n) => Ok(falling_factorial(*n as f64, t)),
            CountLaw::Pmf(probs) => Ok(probs
                .iter()
                .enumerate()
                .map(|(k, p)| p * falling_factorial(k as f64, t))
                .collect::<CompensatedSum>()
                .value()),
            CountLaw::FactorialMoments(m) => m.get(t as usize).copied().ok_or_else(|| {
                Error::domain(format!("factorial moment of order {t} not supplied"))
            }),
        }
    }
}

/// `E[Z^r]` for `Z | (N, p) ~ Binomial(N, p)` with `N` and `p` independent:
/// `Σ_t S(r,t) E[(N)_{t↓1}] E[p^t]`. `p_moments[t] = E[p^t]`, `t = 0..=r`.
pub fn binomial_moment(count: &CountLaw, p_moments: &[f64], r: u32) -> Result<f64> {
    let table = StirlingTable::global();
    if r as usize > table.max_n() {
        return Err(Error::domain(format!("order {r} beyond the Stirling table")));
    }
    if p_moments.len() <= r as usize {
        return Err(Error::domain(format!(
            "need E[p^t] for t = 0..={r}, got {} entries",
            p_moments.len()
        )));
    }
    let mut acc = CompensatedSum::new();
    for t in 0..=r as usize {
        let s = table.get_f64(r as usize, t)?;
        if s == 0.0 {
            continue;
        }
        acc.add(s * count.falling_moment(t as u64)? * p_moments[t]);
    }
    Ok(acc.value())
}

/// `E[B^t] = (a)_{t↑1} / (a+b)_{t↑1}` for `B ~ Beta(a, b)`, `t = 0..=r_max`.
pub fn beta_moments(a: f64, b: f64, r_max: u32) -> Result<Vec<f64>> {
    if !(a > 0.0 && b > 0.0) {
        return Err(Error::domain(format!("beta parameters must be positive, got ({a}, {b})")));
    }
    let mut out = Vec::with_capacity(r_max as usize + 1);
    out.push(1.0);
    for t in 1..=r_max as usize {
        let prev = out[t - 1];
        let tf = (t - 1) as f64;
        out.push(prev * (a + tf) / (a + b + tf));
    }
    Ok(out)
}
