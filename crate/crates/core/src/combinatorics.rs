//! Generalized factorials, generalized binomial coefficients and Stirling
//! numbers of the second kind.
//!
//! Notation follows the usual Pochhammer-style conventions:
//! `(a)_{j↑b} = a(a+b)⋯(a+(j-1)b)` and `(c)_{j↓1} = (c)_{j↑-1}`.

use std::sync::OnceLock;

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};

use crate::error::{Error, Result};

pub use statrs::function::gamma::ln_gamma;

/// Largest row of the exact Stirling table.
pub const STIRLING_MAX_N: usize = 64;

/// Up to this many factors the generalized binomial is evaluated as a direct
/// product; beyond it the log-gamma route is used.
const DIRECT_PRODUCT_MAX_K: u64 = 64;

/// `base · (base + increment) ⋯ (base + (steps-1)·increment)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenFactorialSpec {
    pub base: f64,
    pub steps: u64,
    pub increment: f64,
}

impl GenFactorialSpec {
    pub fn new(base: f64, steps: u64, increment: f64) -> Self {
        Self {
            base,
            steps,
            increment,
        }
    }

    /// `(base)_{steps↑1}`.
    pub fn rising(base: f64, steps: u64) -> Self {
        Self::new(base, steps, 1.0)
    }

    /// `(base)_{steps↓1}`.
    pub fn falling(base: f64, steps: u64) -> Self {
        Self::new(base, steps, -1.0)
    }

    fn factors(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.steps).map(move |i| self.base + i as f64 * self.increment)
    }
}

/// A real number stored as sign and log-magnitude, with exact zero kept
/// distinct.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SignedLn {
    Zero,
    NonZero { negative: bool, ln_abs: f64 },
}

impl SignedLn {
    pub fn positive(ln_abs: f64) -> Self {
        SignedLn::NonZero {
            negative: false,
            ln_abs,
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, SignedLn::Zero)
    }

    /// The log of the value when it is strictly positive.
    pub fn ln_positive(&self) -> Option<f64> {
        match *self {
            SignedLn::NonZero {
                negative: false,
                ln_abs,
            } => Some(ln_abs),
            _ => None,
        }
    }

    /// Log of the value; `-inf` for zero. Panics on a negative value, which
    /// every caller in the crate excludes structurally.
    pub(crate) fn ln_nonneg(&self) -> f64 {
        match *self {
            SignedLn::Zero => f64::NEG_INFINITY,
            SignedLn::NonZero {
                negative: false,
                ln_abs,
            } => ln_abs,
            SignedLn::NonZero { negative: true, .. } => {
                panic!("negative value where a nonnegative one was required")
            }
        }
    }

    pub fn to_f64(&self) -> f64 {
        match *self {
            SignedLn::Zero => 0.0,
            SignedLn::NonZero { negative, ln_abs } => {
                let v = ln_abs.exp();
                if negative {
                    -v
                } else {
                    v
                }
            }
        }
    }
}

/// Generalized rising factorial in the linear domain. Zero factors give 0.
pub fn rising_factorial(spec: GenFactorialSpec) -> f64 {
    spec.factors().product()
}

/// Log-domain generalized rising factorial carrying the product's sign.
pub fn ln_rising_factorial(spec: GenFactorialSpec) -> SignedLn {
    let mut negative = false;
    let mut ln_abs = 0.0;
    for f in spec.factors() {
        if f == 0.0 {
            return SignedLn::Zero;
        }
        if f < 0.0 {
            negative = !negative;
        }
        ln_abs += f.abs().ln();
    }
    SignedLn::NonZero { negative, ln_abs }
}

/// `(c)_{j↓1} = c(c-1)⋯(c-j+1)`.
pub fn falling_factorial(c: f64, j: u64) -> f64 {
    rising_factorial(GenFactorialSpec::falling(c, j))
}

/// Log of the generalized binomial `Γ(x+1) / (Γ(x-k+1) k!)` for real `x`.
///
/// Small `k` (and any `x` that would put a gamma argument at or below zero)
/// is evaluated as the direct product `∏ (x-i)/(i+1)`, which also reports
/// sign and exact zeros. Larger `k` with `x > k-1` goes through log-gamma.
pub fn log_gen_binom(x: f64, k: u64) -> SignedLn {
    if k == 0 {
        return SignedLn::positive(0.0);
    }
    if k <= DIRECT_PRODUCT_MAX_K || x <= k as f64 - 1.0 {
        let mut negative = false;
        let mut ln_abs = 0.0;
        for i in 0..k {
            let num = x - i as f64;
            if num == 0.0 {
                return SignedLn::Zero;
            }
            if num < 0.0 {
                negative = !negative;
            }
            ln_abs += (num.abs() / (i + 1) as f64).ln();
        }
        return SignedLn::NonZero { negative, ln_abs };
    }
    let kf = k as f64;
    SignedLn::positive(ln_gamma(x + 1.0) - ln_gamma(x - kf + 1.0) - ln_gamma(kf + 1.0))
}

/// Exact table of Stirling numbers of the second kind `S(n, k)` for
/// `0 ≤ k ≤ n ≤ max_n`.
#[derive(Debug, Clone)]
pub struct StirlingTable {
    max_n: usize,
    rows: Vec<Vec<BigUint>>,
}

impl StirlingTable {
    pub fn new(max_n: usize) -> Result<Self> {
        if max_n > STIRLING_MAX_N {
            return Err(Error::domain(format!(
                "Stirling table bound {max_n} exceeds {STIRLING_MAX_N}"
            )));
        }
        let mut rows: Vec<Vec<BigUint>> = Vec::with_capacity(max_n + 1);
        rows.push(vec![BigUint::one()]);
        for n in 1..=max_n {
            let prev = &rows[n - 1];
            let mut row = vec![BigUint::zero(); n + 1];
            for k in 1..=n {
                let mut v = prev[k - 1].clone();
                if k < n {
                    v += &prev[k] * BigUint::from(k);
                }
                row[k] = v;
            }
            rows.push(row);
        }
        Ok(Self { max_n, rows })
    }

    /// Shared table with the default bound.
    pub fn global() -> &'static StirlingTable {
        static TABLE: OnceLock<StirlingTable> = OnceLock::new();
        TABLE.get_or_init(|| StirlingTable::new(STIRLING_MAX_N).expect("default bound is valid"))
    }

    pub fn max_n(&self) -> usize {
        self.max_n
    }

    pub fn get(&self, n: usize, k: usize) -> Result<&BigUint> {
        if n > self.max_n {
            return Err(Error::domain(format!(
                "S({n}, {k}) is beyond the table bound {}",
                self.max_n
            )));
        }
        if k > n {
            return Err(Error::domain(format!("S({n}, {k}) requires k <= n")));
        }
        Ok(&self.rows[n][k])
    }

    pub fn get_f64(&self, n: usize, k: usize) -> Result<f64> {
        Ok(self.get(n, k)?.to_f64().unwrap_or(f64::INFINITY))
    }

    pub fn row(&self, n: usize) -> Result<&[BigUint]> {
        if n > self.max_n {
            return Err(Error::domain(format!("row {n} beyond bound {}", self.max_n)));
        }
        Ok(&self.rows[n])
    }

    /// Bell number `B_n` as the row sum.
    pub fn bell(&self, n: usize) -> Result<BigUint> {
        Ok(self.row(n)?.iter().sum())
    }
}

/// `S(n, k)`: number of set partitions of `n` elements into `k` nonempty
/// blocks.
pub fn stirling2(n: usize, k: usize) -> Result<BigUint> {
    StirlingTable::global().get(n, k).cloned()
}

/// Non-central Stirling numbers of the second kind, defined by
/// `S(n,k;a) = S(n-1,k-1;a) + (k+a) S(n-1,k;a)`, `S(0,0;a) = 1`,
/// `S(n,0;a) = a^n`. Equivalently `(x+a)^n = Σ_k S(n,k;a) (x)_{k↓1}`.
pub fn noncentral_stirling2(n: usize, k: usize, a: f64) -> Result<f64> {
    if k > n {
        return Err(Error::domain(format!("S({n}, {k}; a) requires k <= n")));
    }
    // row[k] holds S(i, k; a) for the current i
    let mut row = vec![0.0; k + 1];
    row[0] = 1.0;
    for i in 1..=n {
        for kk in (0..=k.min(i)).rev() {
            let stay = (kk as f64 + a) * row[kk];
            row[kk] = if kk == 0 { stay } else { row[kk - 1] + stay };
        }
    }
    Ok(row[k])
}
