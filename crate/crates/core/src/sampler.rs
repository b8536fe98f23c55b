//! Seed-reproducible random generation for PD(α, θ) partitions.
//!
//! Every random draw in the crate goes through an [`RngStream`]: a master
//! seed plus a stream index selecting an independent ChaCha keystream.
//! Replicate `r` of a Monte Carlo run always uses stream index `r`, and
//! results are collected in replicate order, so output never depends on
//! how work was scheduled across threads.

use std::collections::BTreeMap;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Gamma};
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Parameters `(α, θ)` of the two-parameter Poisson–Dirichlet model,
/// with `α ∈ [0, 1)` and `θ > -α`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    alpha: f64,
    theta: f64,
}

impl ModelParams {
    pub fn new(alpha: f64, theta: f64) -> Result<Self> {
        if !(alpha.is_finite() && (0.0..1.0).contains(&alpha)) {
            return Err(Error::domain(format!("alpha must lie in [0, 1), got {alpha}")));
        }
        if !theta.is_finite() || theta + alpha <= 0.0 {
            return Err(Error::domain(format!(
                "theta must exceed -alpha = {}, got {theta}",
                -alpha
            )));
        }
        Ok(Self { alpha, theta })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// The model `PD(α, θ + offset)` governing a further sample after
    /// `offset` observations.
    pub fn with_theta_offset(&self, offset: f64) -> Result<Self> {
        Self::new(self.alpha, self.theta + offset)
    }

    /// Moderate-deviation operations need `α > 0`.
    pub fn require_positive_alpha(&self) -> Result<()> {
        if self.alpha > 0.0 {
            Ok(())
        } else {
            Err(Error::domain("operation requires alpha > 0"))
        }
    }
}

/// The random generator behind every stream.
pub type StreamRng = ChaCha8Rng;

/// `(master_seed, stream_index)` naming one reproducible random sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngStream {
    pub master_seed: u64,
    pub stream_index: u64,
}

impl RngStream {
    pub fn new(master_seed: u64, stream_index: u64) -> Self {
        Self {
            master_seed,
            stream_index,
        }
    }

    pub fn rng(&self) -> StreamRng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(self.stream_index);
        rng
    }

    /// The stream with the same index under a master seed derived from
    /// `tag`, for keeping distinct stages of one experiment uncorrelated.
    pub fn derive(&self, tag: u64) -> Self {
        Self::new(derive_seed(self.master_seed, tag), self.stream_index)
    }
}

/// Mixes a tag into a seed (splitmix64 finalizer).
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Runs `reps` replicates in parallel on the current rayon pool. Replicate
/// `r` receives stream `(seed, r)`; the output is in replicate order.
pub fn par_replicates<T, F>(seed: u64, reps: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut StreamRng) -> T + Sync + Send,
{
    (0..reps as u64)
        .into_par_iter()
        .map(|r| f(&mut RngStream::new(seed, r).rng()))
        .collect()
}

/// `Beta(a, b)` as `X / (X + Y)` with independent gamma draws.
pub fn beta<R: RngCore + ?Sized>(a: f64, b: f64, rng: &mut R) -> Result<f64> {
    if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
        return Err(Error::domain(format!("beta parameters must be positive, got ({a}, {b})")));
    }
    let ga = Gamma::new(a, 1.0).map_err(|e| Error::domain(e.to_string()))?;
    let gb = Gamma::new(b, 1.0).map_err(|e| Error::domain(e.to_string()))?;
    loop {
        let x: f64 = ga.sample(rng);
        let y: f64 = gb.sample(rng);
        let v = x / (x + y);
        // both gammas underflowing is only possible for minute shapes
        if v > 0.0 && v < 1.0 {
            return Ok(v);
        }
    }
}

pub fn binomial<R: RngCore + ?Sized>(k: u64, p: f64, rng: &mut R) -> Result<u64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::domain(format!("binomial p must lie in [0, 1], got {p}")));
    }
    if k == 0 {
        return Ok(0);
    }
    let d = Binomial::new(k, p).map_err(|e| Error::domain(e.to_string()))?;
    Ok(d.sample(rng))
}

/// Block-size histogram of an exchangeable partition of `n` elements:
/// `M_l` blocks of size `l`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PartitionState {
    n: u64,
    k: u64,
    counts: BTreeMap<u64, u64>,
}

impl PartitionState {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a state from `(block size, multiplicity)` pairs.
    pub fn from_multiplicities<I: IntoIterator<Item = (u64, u64)>>(pairs: I) -> Result<Self> {
        let mut s = Self::new();
        for (size, count) in pairs {
            if size == 0 {
                return Err(Error::domain("block sizes start at 1"));
            }
            if count > 0 {
                *s.counts.entry(size).or_insert(0) += count;
                s.k += count;
                s.n += size * count;
            }
        }
        Ok(s)
    }

    /// Sample size `n`.
    pub fn n(&self) -> u64 {
        self.n
    }

    /// Number of blocks `K_n`.
    pub fn k(&self) -> u64 {
        self.k
    }

    /// `M_{l,n}`.
    pub fn multiplicity(&self, size: u64) -> u64 {
        self.counts.get(&size).copied().unwrap_or(0)
    }

    /// Nonzero `(size, multiplicity)` pairs in increasing size.
    pub fn iter(&self) -> impl Iterator<Item = (u64, u64)> + '_ {
        self.counts.iter().map(|(&s, &c)| (s, c))
    }

    /// Block sizes in decreasing order (the frequency vector up to order).
    pub fn block_sizes(&self) -> Vec<u64> {
        let mut v = Vec::with_capacity(self.k as usize);
        for (&s, &c) in self.counts.iter().rev() {
            v.extend(std::iter::repeat_n(s, c as usize));
        }
        v
    }

    pub fn check_invariants(&self) -> Result<()> {
        let n: u64 = self.iter().map(|(s, c)| s * c).sum();
        let k: u64 = self.iter().map(|(_, c)| c).sum();
        if n != self.n || k != self.k || self.k > self.n || ((self.k == 0) != (self.n == 0)) {
            return Err(Error::domain(format!(
                "inconsistent partition state: n={} k={} histogram sums ({n}, {k})",
                self.n, self.k
            )));
        }
        Ok(())
    }

    pub(crate) fn open_block(&mut self) {
        *self.counts.entry(1).or_insert(0) += 1;
        self.k += 1;
        self.n += 1;
    }

    pub(crate) fn grow_block(&mut self, size: u64) {
        match self.counts.get_mut(&size) {
            Some(c) if *c > 1 => *c -= 1,
            Some(_) => {
                self.counts.remove(&size);
            }
            None => panic!("no block of size {size}"),
        }
        *self.counts.entry(size + 1).or_insert(0) += 1;
        self.n += 1;
    }

    /// One step of the sequential predictive rule: a new block with
    /// probability `(θ + K α) / (θ + n)`, otherwise an existing block of size
    /// `s` chosen with weight `(s - α) M_s`.
    pub fn extend<R: RngCore + ?Sized>(&mut self, params: &ModelParams, rng: &mut R) {
        let n = self.n as f64;
        let new_weight = params.theta + self.k as f64 * params.alpha;
        if self.n == 0 || rng.random::<f64>() * (params.theta + n) < new_weight {
            self.open_block();
            return;
        }
        let join_total = n - self.k as f64 * params.alpha;
        let mut u = rng.random::<f64>() * join_total;
        let mut chosen = None;
        for (s, c) in self.iter() {
            chosen = Some(s);
            let w = (s as f64 - params.alpha) * c as f64;
            if u < w {
                break;
            }
            u -= w;
        }
        self.grow_block(chosen.expect("nonempty partition has a block"));
    }
}

/// `crp_extend`: returns the state after one predictive step.
pub fn crp_extend<R: RngCore + ?Sized>(
    state: &PartitionState,
    params: &ModelParams,
    rng: &mut R,
) -> PartitionState {
    let mut next = state.clone();
    next.extend(params, rng);
    next
}

/// Labelled sequential sampler used for long paths.
///
/// Joining picks an element uniformly and accepts its block with probability
/// `(s - α)/s`, which selects block `b` with weight `s_b - α` in O(1)
/// expected time.
#[derive(Debug, Clone)]
pub struct CrpSampler {
    params: ModelParams,
    sizes: Vec<u32>,
    owner: Vec<u32>,
    hist: Vec<u64>,
}

impl CrpSampler {
    pub fn new(params: ModelParams) -> Self {
        Self {
            params,
            sizes: Vec::new(),
            owner: Vec::new(),
            hist: vec![0],
        }
    }

    pub fn with_capacity(params: ModelParams, n: usize) -> Self {
        let mut s = Self::new(params);
        s.owner.reserve(n);
        s
    }

    pub fn n(&self) -> u64 {
        self.owner.len() as u64
    }

    pub fn k(&self) -> u64 {
        self.sizes.len() as u64
    }

    /// `M_{l,n}`.
    pub fn multiplicity(&self, size: u64) -> u64 {
        self.hist.get(size as usize).copied().unwrap_or(0)
    }

    pub fn step<R: RngCore + ?Sized>(&mut self, rng: &mut R) {
        let n = self.owner.len();
        let alpha = self.params.alpha;
        let new_weight = self.params.theta + self.sizes.len() as f64 * alpha;
        if n == 0 || rng.random::<f64>() * (self.params.theta + n as f64) < new_weight {
            let b = self.sizes.len() as u32;
            self.sizes.push(1);
            self.owner.push(b);
            self.bump(0, 1);
            return;
        }
        loop {
            let e = rng.random_range(0..n);
            let b = self.owner[e] as usize;
            let s = self.sizes[b] as f64;
            if alpha == 0.0 || rng.random::<f64>() * s < s - alpha {
                let old = self.sizes[b] as usize;
                self.sizes[b] += 1;
                self.owner.push(b as u32);
                self.bump(old, old + 1);
                return;
            }
        }
    }

    fn bump(&mut self, from: usize, to: usize) {
        if from > 0 {
            self.hist[from] -= 1;
        }
        if to >= self.hist.len() {
            self.hist.resize(to + 1, 0);
        }
        self.hist[to] += 1;
    }

    pub fn run_to<R: RngCore + ?Sized>(&mut self, n: u64, rng: &mut R) {
        while self.n() < n {
            self.step(rng);
        }
    }

    pub fn state(&self) -> PartitionState {
        PartitionState::from_multiplicities(
            self.hist
                .iter()
                .enumerate()
                .skip(1)
                .map(|(s, &c)| (s as u64, c)),
        )
        .expect("sizes start at 1")
    }
}

/// A trajectory snapshot: `(n, K_n, M_{1..l_max, n})`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PathRecord {
    pub n: u64,
    pub k: u64,
    pub m: Vec<u64>,
}

/// One sequential trajectory recorded at each checkpoint.
pub fn sample_path<R: RngCore + ?Sized>(
    params: &ModelParams,
    checkpoints: &[u64],
    track_l_max: u64,
    rng: &mut R,
) -> Result<Vec<PathRecord>> {
    if checkpoints.is_empty() {
        return Err(Error::domain("checkpoints must be nonempty"));
    }
    if checkpoints.windows(2).any(|w| w[0] >= w[1]) || checkpoints[0] == 0 {
        return Err(Error::domain("checkpoints must be positive and strictly increasing"));
    }
    if track_l_max == 0 {
        return Err(Error::domain("track_l_max must be positive"));
    }
    let last = *checkpoints.last().expect("nonempty");
    let mut crp = CrpSampler::with_capacity(*params, last as usize);
    let mut out = Vec::with_capacity(checkpoints.len());
    for &c in checkpoints {
        crp.run_to(c, rng);
        out.push(PathRecord {
            n: c,
            k: crp.k(),
            m: (1..=track_l_max).map(|l| crp.multiplicity(l)).collect(),
        });
    }
    Ok(out)
}

/// Truncated GEM stick-breaking weights `V_1..V_T` and the leftover mass.
#[derive(Debug, Clone, PartialEq)]
pub struct StickWeights {
    pub sticks: Vec<f64>,
    pub residual: f64,
}

impl StickWeights {
    pub fn total(&self) -> f64 {
        self.sticks.iter().sum::<f64>() + self.residual
    }
}

/// `V_k = (1-U_1)⋯(1-U_{k-1}) U_k` with `U_k ~ Beta(1-α, θ+kα)`.
pub fn sample_gem<R: RngCore + ?Sized>(
    params: &ModelParams,
    truncation: usize,
    rng: &mut R,
) -> Result<StickWeights> {
    if truncation == 0 {
        return Err(Error::domain("truncation must be at least 1"));
    }
    let mut sticks = Vec::with_capacity(truncation);
    let mut remaining = 1.0;
    for k in 1..=truncation {
        let u = beta(1.0 - params.alpha, params.theta + k as f64 * params.alpha, rng)?;
        sticks.push(remaining * u);
        remaining *= 1.0 - u;
    }
    Ok(StickWeights {
        sticks,
        residual: remaining,
    })
}

/// Partition of `n` i.i.d. draws from GEM weights generated lazily: sticks
/// are broken only as far as the draws reach, so no truncation bias is
/// introduced. Fails if more than `max_sticks` are needed.
pub fn gem_partition<R: RngCore + ?Sized>(
    params: &ModelParams,
    n: u64,
    max_sticks: usize,
    rng: &mut R,
) -> Result<PartitionState> {
    let mut cumulative: Vec<f64> = Vec::new();
    let mut remaining = 1.0;
    let mut hits: Vec<u64> = Vec::new();
    for _ in 0..n {
        let u: f64 = rng.random();
        while cumulative.last().is_none_or(|&c| u >= c) {
            if cumulative.len() >= max_sticks {
                return Err(Error::resource(format!(
                    "draw needed more than {max_sticks} sticks"
                )));
            }
            let k = cumulative.len() as f64 + 1.0;
            let v = beta(1.0 - params.alpha, params.theta + k * params.alpha, rng)?;
            let stick = remaining * v;
            remaining -= stick;
            cumulative.push(1.0 - remaining);
            hits.push(0);
            if remaining <= 0.0 {
                break;
            }
        }
        let idx = cumulative.partition_point(|&c| c <= u).min(cumulative.len() - 1);
        hits[idx] += 1;
    }
    let mut hist: BTreeMap<u64, u64> = BTreeMap::new();
    for h in hits.into_iter().filter(|&h| h > 0) {
        *hist.entry(h).or_insert(0) += 1;
    }
    PartitionState::from_multiplicities(hist)
}

/// `K_n` at `α = 0` as `Σ_{i=1}^n Bernoulli(θ / (θ + i - 1))`.
pub fn bernoulli_kn_alpha0<R: RngCore + ?Sized>(theta: f64, n: u64, rng: &mut R) -> Result<u64> {
    if !(theta > 0.0 && theta.is_finite()) {
        return Err(Error::domain(format!("theta must be positive, got {theta}")));
    }
    if n == 0 {
        return Err(Error::domain("n must be positive"));
    }
    let mut k = 0;
    for i in 0..n {
        let p = theta / (theta + i as f64);
        if rng.random::<f64>() < p {
            k += 1;
        }
    }
    Ok(k)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(a: f64, t: f64) -> ModelParams {
        ModelParams::new(a, t).unwrap()
    }

    #[test]
    fn param_validation() {
        assert!(ModelParams::new(1.0, 1.0).is_err());
        assert!(ModelParams::new(-0.1, 1.0).is_err());
        assert!(ModelParams::new(0.5, -0.5).is_err());
        assert!(ModelParams::new(0.5, -0.4).is_ok());
        assert!(ModelParams::new(0.0, 0.0).is_err());
        assert!(params(0.0, 1.0).require_positive_alpha().is_err());
    }

    #[test]
    fn stream_determinism_and_separation() {
        let a: Vec<u64> = {
            let mut r = RngStream::new(7, 3).rng();
            (0..8).map(|_| r.next_u64()).collect()
        };
        let b: Vec<u64> = {
            let mut r = RngStream::new(7, 3).rng();
            (0..8).map(|_| r.next_u64()).collect()
        };
        let c: Vec<u64> = {
            let mut r = RngStream::new(7, 4).rng();
            (0..8).map(|_| r.next_u64()).collect()
        };
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(RngStream::new(7, 3).derive(1), RngStream::new(7, 3));
    }

    #[test]
    fn par_replicates_independent_of_pool_size() {
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| par_replicates(11, 64, |rng| rng.next_u64()))
        };
        assert_eq!(run(1), run(4));
    }

    #[test]
    fn binomial_edges() {
        let mut rng = RngStream::new(1, 0).rng();
        assert_eq!(binomial(0, 0.3, &mut rng).unwrap(), 0);
        assert_eq!(binomial(17, 1.0, &mut rng).unwrap(), 17);
        assert_eq!(binomial(17, 0.0, &mut rng).unwrap(), 0);
        assert!(binomial(3, 1.5, &mut rng).is_err());
        assert!(beta(0.0, 1.0, &mut rng).is_err());
    }

    #[test]
    fn beta_mean_within_three_se() {
        let mut rng = RngStream::new(2, 0).rng();
        for &(a, b) in &[(0.5, 1.0), (2.0, 5.0), (7.0, 15.0)] {
            let draws: Vec<f64> = (0..100_000).map(|_| beta(a, b, &mut rng).unwrap()).collect();
            let mean = draws.iter().sum::<f64>() / draws.len() as f64;
            let var = a * b / ((a + b) * (a + b) * (a + b + 1.0));
            let se = (var / draws.len() as f64).sqrt();
            assert!((mean - a / (a + b)).abs() < 3.0 * se, "Beta({a},{b}) mean {mean}");
            assert!(draws.iter().all(|&x| x > 0.0 && x < 1.0));
        }
    }

    #[test]
    fn extend_keeps_invariants() {
        let p = params(0.5, 0.5);
        let mut rng = RngStream::new(3, 0).rng();
        let mut s = PartitionState::new();
        for _ in 0..500 {
            s = crp_extend(&s, &p, &mut rng);
            s.check_invariants().unwrap();
        }
        assert_eq!(s.n(), 500);
    }

    #[test]
    fn first_step_always_opens_a_block() {
        let p = params(0.3, 2.0);
        let mut rng = RngStream::new(4, 0).rng();
        for _ in 0..100 {
            let s = crp_extend(&PartitionState::new(), &p, &mut rng);
            assert_eq!((s.n(), s.k(), s.multiplicity(1)), (1, 1, 1));
        }
    }

    #[test]
    fn predictive_probabilities_from_one_block_of_two() {
        // P(new) = (θ + α) / (θ + 2) = 0.4 at α = θ = 0.5
        let p = params(0.5, 0.5);
        let start = PartitionState::from_multiplicities([(2, 1)]).unwrap();
        let mut rng = RngStream::new(5, 0).rng();
        let reps = 200_000;
        let opened = (0..reps)
            .filter(|_| crp_extend(&start, &p, &mut rng).k() == 2)
            .count() as f64;
        let se = (0.4f64 * 0.6 / reps as f64).sqrt();
        assert!((opened / reps as f64 - 0.4).abs() < 4.0 * se);
    }

    #[test]
    fn labelled_sampler_matches_histogram() {
        let p = params(0.4, 1.5);
        let mut rng = RngStream::new(6, 0).rng();
        let mut crp = CrpSampler::new(p);
        for _ in 0..2000 {
            crp.step(&mut rng);
            let s = crp.state();
            s.check_invariants().unwrap();
            assert_eq!((s.n(), s.k()), (crp.n(), crp.k()));
        }
    }

    #[test]
    fn sample_path_trivial_checkpoint() {
        let p = params(0.7, 0.1);
        for seed in 0..20 {
            let path = sample_path(&p, &[1], 3, &mut RngStream::new(seed, 0).rng()).unwrap();
            assert_eq!(path, vec![PathRecord { n: 1, k: 1, m: vec![1, 0, 0] }]);
        }
        let mut rng = RngStream::new(0, 0).rng();
        assert!(sample_path(&p, &[], 3, &mut rng).is_err());
        assert!(sample_path(&p, &[5, 5], 3, &mut rng).is_err());
    }

    #[test]
    fn sample_path_records_consistent_counts() {
        let p = params(0.5, 1.0);
        let cps = [10, 100, 1000, 5000];
        let path = sample_path(&p, &cps, 5, &mut RngStream::new(9, 0).rng()).unwrap();
        for w in path.windows(2) {
            assert!(w[0].k <= w[1].k);
        }
        for rec in &path {
            assert!(rec.m.iter().sum::<u64>() <= rec.k);
            assert!(rec.k >= 1 && rec.k <= rec.n);
        }
    }

    #[test]
    fn gem_sticks_sum_to_one() {
        let mut rng = RngStream::new(8, 0).rng();
        for &(a, t) in &[(0.0, 1.0), (0.5, 0.5), (0.9, 0.1), (0.25, 10.0)] {
            for &trunc in &[1usize, 10, 1000, 10_000] {
                let w = sample_gem(&params(a, t), trunc, &mut rng).unwrap();
                assert_eq!(w.sticks.len(), trunc);
                // deep sticks may underflow to zero at small θ
                assert!(w.sticks.iter().all(|&v| v >= 0.0) && w.sticks[0] > 0.0);
                assert!((w.total() - 1.0).abs() <= 1e-12, "{a} {t} {trunc}");
            }
        }
        assert!(sample_gem(&params(0.5, 0.5), 0, &mut rng).is_err());
    }

    #[test]
    fn gem_first_stick_means() {
        // U_1 ~ Beta(1-α, θ+α): mean 1/2 at (0, 1), 1/3 at (0.5, 0.5)
        let mut rng = RngStream::new(10, 0).rng();
        for &(a, t, mean) in &[(0.0, 1.0, 0.5), (0.5, 0.5, 1.0 / 3.0)] {
            let reps = 100_000;
            let s: f64 = (0..reps)
                .map(|_| sample_gem(&params(a, t), 1, &mut rng).unwrap().sticks[0])
                .sum();
            let (aa, bb) = (1.0 - a, t + a);
            let sd = (aa * bb / ((aa + bb).powi(2) * (aa + bb + 1.0))).sqrt();
            assert!((s / reps as f64 - mean).abs() < 4.0 * sd / (reps as f64).sqrt());
        }
    }

    #[test]
    fn gem_partition_is_a_partition() {
        let mut rng = RngStream::new(12, 0).rng();
        for _ in 0..200 {
            let s = gem_partition(&params(0.25, 1.0), 8, 1_000_000, &mut rng).unwrap();
            s.check_invariants().unwrap();
            assert_eq!(s.n(), 8);
        }
    }

    #[test]
    fn bernoulli_kn_edges_and_mean() {
        let mut rng = RngStream::new(13, 0).rng();
        for _ in 0..50 {
            assert_eq!(bernoulli_kn_alpha0(2.5, 1, &mut rng).unwrap(), 1);
        }
        assert!(bernoulli_kn_alpha0(0.0, 3, &mut rng).is_err());
        let reps = 100_000;
        let total: u64 = (0..reps).map(|_| bernoulli_kn_alpha0(1.0, 3, &mut rng).unwrap()).sum();
        let mean = total as f64 / reps as f64;
        let var: f64 = 17.0 / 36.0;
        assert!((mean - 11.0 / 6.0).abs() < 4.0 * (var / reps as f64).sqrt());
    }
}
