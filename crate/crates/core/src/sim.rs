//! Monte Carlo block-error rates for the commutative three-receiver example
//! with a shared binary linear code for Rx2 and Rx3 and exhaustive
//! minimum-distance decoding.

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_N: usize = 26;
/// Candidates examined by the joint decoder at Rx1, as a power of two.
pub const MAX_LOG_CANDIDATES: usize = 22;
/// Two-sided 95% normal quantile.
pub const WILSON_Z: f64 = 1.959963984540054;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n: usize,
    pub delta1: f64,
    pub delta: f64,
    pub tau: f64,
    /// Rx1 has `2^k1` codewords.
    pub k1: usize,
    /// Inner and outer dimensions of the shared code.
    pub s: usize,
    pub t: usize,
    pub trials: usize,
    pub seed: u64,
}

impl SimConfig {
    /// `k1 = round(r1 n)`, `t = round(r n)`, no inner code.
    pub fn at_rates(n: usize, delta1: f64, delta: f64, tau: f64, r1: f64, r: f64, trials: usize, seed: u64) -> Self {
        let k = |x: f64| (x * n as f64).round().max(0.0) as usize;
        Self { n, delta1, delta, tau, k1: k(r1), s: 0, t: k(r), trials, seed }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.n > MAX_N {
            return Err(Error::Parameter(format!("n = {} outside 1..={MAX_N}", self.n)));
        }
        for (name, d) in [("delta1", self.delta1), ("delta", self.delta)] {
            if !(0.0..0.5).contains(&d) {
                return Err(Error::Parameter(format!("{name} = {d} outside [0, 1/2)")));
            }
        }
        if !(0.0..=0.5).contains(&self.tau) {
            return Err(Error::Parameter(format!("tau = {} outside [0, 1/2]", self.tau)));
        }
        if self.trials == 0 {
            return Err(Error::Parameter("no trials".into()));
        }
        if self.s + self.t > self.n {
            return Err(Error::Parameter(format!("s + t = {} exceeds n", self.s + self.t)));
        }
        if self.s + self.t + self.k1 > MAX_LOG_CANDIDATES {
            return Err(Error::Cap(format!("2^(s+t+k1) = 2^{} > 2^{MAX_LOG_CANDIDATES}", self.s + self.t + self.k1)));
        }
        Ok(())
    }

    pub fn rates(&self) -> [f64; 3] {
        let n = self.n as f64;
        [self.k1 as f64 / n, self.t as f64 / n, self.t as f64 / n]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReceiverStat {
    pub errors: u64,
    pub rate: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimResult {
    pub config: SimConfig,
    pub rates: [f64; 3],
    pub receivers: [ReceiverStat; 3],
    pub trials: usize,
    /// Mean Hamming weight of Rx1's codeword.
    pub mean_weight: f64,
}

/// Wilson score interval for `k` successes in `n` trials.
pub fn wilson(k: u64, n: u64, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let (k, n) = (k as f64, n as f64);
    let p = k / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Joint PMF of several symbols, row-major over `sizes`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointPmf {
    pub sizes: Vec<usize>,
    pub p: Vec<f64>,
}

impl JointPmf {
    pub fn new(sizes: Vec<usize>, p: Vec<f64>) -> Result<Self> {
        if sizes.iter().product::<usize>() != p.len() {
            return Err(Error::Dimension(format!("{} probabilities for sizes {sizes:?}", p.len())));
        }
        if p.iter().any(|x| !(*x >= 0.0)) || (p.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::Parameter("not a PMF".into()));
        }
        Ok(Self { sizes, p })
    }

    pub fn uniform(sizes: Vec<usize>) -> Self {
        let n: usize = sizes.iter().product();
        Self { sizes, p: vec![1.0 / n as f64; n] }
    }

    fn index(&self, symbols: &[u32]) -> usize {
        symbols.iter().zip(&self.sizes).fold(0, |acc, (&s, &k)| acc * k + s as usize)
    }

    pub fn marginals(&self) -> Vec<Vec<f64>> {
        let mut out: Vec<Vec<f64>> = self.sizes.iter().map(|&k| vec![0.0; k]).collect();
        let mut sym = vec![0usize; self.sizes.len()];
        for &q in &self.p {
            for (j, &s) in sym.iter().enumerate() {
                out[j][s] += q;
            }
            for j in (0..sym.len()).rev() {
                sym[j] += 1;
                if sym[j] < self.sizes[j] {
                    break;
                }
                sym[j] = 0;
            }
        }
        out
    }

    fn is_product(&self) -> bool {
        let m = self.marginals();
        let mut sym = vec![0u32; self.sizes.len()];
        for i in 0..self.p.len() {
            let prod: f64 = sym.iter().enumerate().map(|(j, &s)| m[j][s as usize]).product();
            if (self.p[i] - prod).abs() > 1e-12 {
                return false;
            }
            for j in (0..sym.len()).rev() {
                sym[j] += 1;
                if (sym[j] as usize) < self.sizes[j] {
                    break;
                }
                sym[j] = 0;
            }
        }
        true
    }
}

/// Picks one member per bin. `bins[j]` lists user `j`'s candidate sequences;
/// a tuple of members is drawn with weight
/// `r = Π_t p(u_1t, ..., u_kt) / Π_j p_j(u_jt)`, which is constant for a
/// product PMF, so members are then drawn uniformly and independently.
pub fn likelihood_select<R: Rng>(rng: &mut R, bins: &[Vec<Vec<u32>>], pmf: &JointPmf) -> Result<Vec<usize>> {
    if bins.len() != pmf.sizes.len() {
        return Err(Error::Dimension(format!("{} bins for a {}-variate PMF", bins.len(), pmf.sizes.len())));
    }
    if bins.iter().any(|b| b.is_empty()) {
        return Err(Error::Parameter("empty bin".into()));
    }
    if pmf.is_product() {
        return Ok(bins.iter().map(|b| rng.gen_range(0..b.len())).collect());
    }
    let marg = pmf.marginals();
    let sizes: Vec<usize> = bins.iter().map(|b| b.len()).collect();
    let total: usize = sizes.iter().product();
    let mut weights = Vec::with_capacity(total);
    for flat in 0..total {
        let pick = unflatten(flat, &sizes);
        let n = bins[0][pick[0]].len();
        let mut r = 1.0;
        for t in 0..n {
            let sym: Vec<u32> = pick.iter().enumerate().map(|(j, &i)| bins[j][i][t]).collect();
            let denom: f64 = sym.iter().enumerate().map(|(j, &s)| marg[j][s as usize]).product();
            r *= if denom > 0.0 { pmf.p[pmf.index(&sym)] / denom } else { 0.0 };
        }
        weights.push(r);
    }
    let dist = WeightedIndex::new(&weights).map_err(|e| Error::Parameter(format!("bin product: {e}")))?;
    Ok(unflatten(dist.sample(rng), &sizes))
}

fn unflatten(mut flat: usize, sizes: &[usize]) -> Vec<usize> {
    let mut out = vec![0; sizes.len()];
    for j in (0..sizes.len()).rev() {
        out[j] = flat % sizes[j];
        flat /= sizes[j];
    }
    out
}

fn bernoulli_word<R: Rng>(rng: &mut R, n: usize, p: f64) -> u32 {
    (0..n).fold(0, |w, i| if rng.gen_bool(p) { w | 1 << i } else { w })
}

fn random_word<R: Rng>(rng: &mut R, n: usize) -> u32 {
    rng.gen::<u32>() & ((1u64 << n) - 1) as u32
}

/// `span[idx] = ⊕_{i ∈ idx} rows[i]`.
fn span(rows: &[u32]) -> Vec<u32> {
    let mut out = vec![0u32; 1 << rows.len()];
    for idx in 1..out.len() {
        out[idx] = out[idx & (idx - 1)] ^ rows[idx.trailing_zeros() as usize];
    }
    out
}

/// Index of the nearest word, ties to the lowest index.
fn nearest(y: u32, words: impl Iterator<Item = u32>) -> usize {
    let mut best = (u32::MAX, 0);
    for (i, w) in words.enumerate() {
        let d = (y ^ w).count_ones();
        if d < best.0 {
            best = (d, i);
        }
    }
    best.1
}

fn bits(w: u32, n: usize) -> Vec<u32> {
    (0..n).map(|i| w >> i & 1).collect()
}

#[derive(Default, Clone, Copy)]
struct Tally {
    errors: [u64; 3],
    weight: u64,
}

fn trial(cfg: &SimConfig, index: u64) -> Result<Tally> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(index);
    let n = cfg.n;
    // inner rows first, so idx = a | m << s
    let rows: Vec<u32> = (0..cfg.s + cfg.t).map(|_| random_word(&mut rng, n)).collect();
    let (b2, b3) = (random_word(&mut rng, n), random_word(&mut rng, n));
    let lin = span(&rows);
    let book: Vec<u32> = (0..1usize << cfg.k1).map(|_| bernoulli_word(&mut rng, n, cfg.tau)).collect();

    let m1 = rng.gen_range(0..book.len());
    let (m2, m3) = (rng.gen_range(0..1usize << cfg.t), rng.gen_range(0..1usize << cfg.t));
    let (a2, a3) = if cfg.s > 0 {
        let bin = |m: usize, b: u32| -> Vec<Vec<u32>> { (0..1usize << cfg.s).map(|a| bits(lin[a | m << cfg.s] ^ b, n)).collect() };
        let pick = likelihood_select(&mut rng, &[bin(m2, b2), bin(m3, b3)], &JointPmf::uniform(vec![2, 2]))?;
        (pick[0], pick[1])
    } else {
        (0, 0)
    };
    let u2 = lin[a2 | m2 << cfg.s] ^ b2;
    let u3 = lin[a3 | m3 << cfg.s] ^ b3;
    let sum_idx = (a2 ^ a3) | (m2 ^ m3) << cfg.s;
    assert_eq!(u2 ^ u3, lin[sum_idx] ^ b2 ^ b3, "u2 ⊕ u3 left the sum coset");

    let x1 = book[m1];
    let y1 = x1 ^ u2 ^ u3 ^ bernoulli_word(&mut rng, n, cfg.delta1);
    let y2 = u2 ^ bernoulli_word(&mut rng, n, cfg.delta);
    let y3 = u3 ^ bernoulli_word(&mut rng, n, cfg.delta);

    let mut errors = [0u64; 3];
    let msg = |idx: usize| idx >> cfg.s;
    errors[1] = (msg(nearest(y2, lin.iter().map(|w| w ^ b2))) != m2) as u64;
    errors[2] = (msg(nearest(y3, lin.iter().map(|w| w ^ b3))) != m3) as u64;
    let sums: Vec<u32> = lin.iter().map(|w| w ^ b2 ^ b3).collect();
    let joint = nearest(y1, book.iter().flat_map(|v| sums.iter().map(move |s| v ^ s)));
    errors[0] = (joint / sums.len() != m1) as u64;
    Ok(Tally { errors, weight: x1.count_ones() as u64 })
}

pub fn run(cfg: &SimConfig) -> Result<SimResult> {
    cfg.validate()?;
    let tallies: Vec<Tally> = (0..cfg.trials as u64).into_par_iter().map(|i| trial(cfg, i)).collect::<Result<_>>()?;
    let mut total = Tally::default();
    for t in &tallies {
        for j in 0..3 {
            total.errors[j] += t.errors[j];
        }
        total.weight += t.weight;
    }
    let trials = cfg.trials as u64;
    let receivers = total.errors.map(|e| {
        let (lo, hi) = wilson(e, trials, WILSON_Z);
        ReceiverStat { errors: e, rate: e as f64 / trials as f64, ci_lo: lo, ci_hi: hi }
    });
    Ok(SimResult {
        config: cfg.clone(),
        rates: cfg.rates(),
        receivers,
        trials: cfg.trials,
        mean_weight: total.weight as f64 / trials as f64,
    })
}

/// True if `rates` never rise by more than what overlapping Wilson
/// intervals allow: each later interval's lower end stays at or below the
/// earlier one's upper end.
pub fn non_increasing(stats: &[ReceiverStat]) -> bool {
    stats.windows(2).all(|w| w[1].rate <= w[0].rate || w[1].ci_lo <= w[0].ci_hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn cfg(n: usize, delta1: f64, delta: f64, tau: f64, k1: usize, t: usize, trials: usize) -> SimConfig {
        SimConfig { n, delta1, delta, tau, k1, s: 0, t, trials, seed: 17 }
    }

    #[test]
    fn noiseless_channels_never_err() {
        let r = run(&cfg(20, 0.0, 0.0, 0.5, 2, 3, 300)).unwrap();
        assert!(r.receivers.iter().all(|s| s.errors == 0), "{:?}", r.receivers);
    }

    #[test]
    fn inner_code_and_likelihood_encoder_keep_noiseless_decoding() {
        let mut c = cfg(20, 0.0, 0.0, 0.5, 2, 3, 100);
        c.s = 2;
        let r = run(&c).unwrap();
        assert!(r.receivers.iter().all(|s| s.errors == 0), "{:?}", r.receivers);
    }

    /// Exact Rx1 error when the shared code is a single word: average over
    /// every codebook, message and noise pattern.
    fn exhaustive_rx1_error(n: usize, k1: usize, tau: f64, delta1: f64) -> f64 {
        let m = 1usize << k1;
        let words = 1usize << n;
        let w = |x: usize, p: f64| p.powi(x.count_ones() as i32) * (1.0 - p).powi((n - x.count_ones() as usize) as i32);
        let mut err = 0.0;
        for flat in 0..words.pow(m as u32) {
            let book: Vec<usize> = (0..m).map(|i| flat / words.pow(i as u32) % words).collect();
            let pb: f64 = book.iter().map(|&x| w(x, tau)).product();
            for (msg, &x) in book.iter().enumerate() {
                for noise in 0..words {
                    let y = x ^ noise;
                    let dec = nearest(y as u32, book.iter().map(|&v| v as u32));
                    if dec != msg {
                        err += pb * w(noise, delta1) / m as f64;
                    }
                }
            }
        }
        err
    }

    #[test]
    fn oversized_rx1_codebook_against_enumeration() {
        let (n, k1, tau, d1) = (2, 2, 0.5, 0.3);
        let oracle = exhaustive_rx1_error(n, k1, tau, d1);
        assert!(oracle > 0.5);
        let trials = 20_000;
        let r = run(&cfg(n, d1, 0.1, tau, k1, 0, trials)).unwrap();
        let sigma = (oracle * (1.0 - oracle) / trials as f64).sqrt();
        assert!((r.receivers[0].rate - oracle).abs() < 4.0 * sigma, "{} vs {oracle}", r.receivers[0].rate);
    }

    #[test]
    fn same_seed_same_result() {
        let c = cfg(12, 0.05, 0.1, 0.2, 2, 4, 200);
        assert_eq!(run(&c).unwrap(), run(&c).unwrap());
        let mut d = c.clone();
        d.seed += 1;
        assert_ne!(run(&c).unwrap().receivers, run(&d).unwrap().receivers);
    }

    #[test]
    fn codeword_weight_tracks_cost_budget() {
        let c = cfg(24, 0.01, 0.1, 0.05, 3, 8, 2000);
        let r = run(&c).unwrap();
        let sigma = (24.0 * 0.05 * 0.95 / 2000.0f64).sqrt();
        assert!((r.mean_weight - 0.05 * 24.0).abs() < 3.0 * sigma);
    }

    #[test]
    fn config_checks() {
        assert!(matches!(run(&cfg(27, 0.1, 0.1, 0.1, 1, 1, 1)), Err(Error::Parameter(_))));
        assert!(matches!(run(&cfg(26, 0.1, 0.1, 0.1, 12, 12, 1)), Err(Error::Cap(_))));
        assert!(run(&cfg(10, 0.5, 0.1, 0.1, 1, 1, 1)).is_err());
        assert!(run(&cfg(10, 0.1, 0.1, 0.6, 1, 1, 1)).is_err());
        let c = SimConfig::at_rates(24, 0.01, 0.1, 0.05, 0.1456, 0.3186, 10, 1);
        assert_eq!((c.k1, c.t), (3, 8));
    }

    #[test]
    fn wilson_interval() {
        let (lo, hi) = wilson(0, 100, WILSON_Z);
        assert_abs_diff_eq!(lo, 0.0, epsilon = 1e-15);
        // z²/(n + z²)
        assert_abs_diff_eq!(hi, WILSON_Z.powi(2) / (100.0 + WILSON_Z.powi(2)), epsilon = 1e-12);
        let (lo, hi) = wilson(50, 100, WILSON_Z);
        assert_abs_diff_eq!(lo + hi, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn product_pmf_selects_uniformly() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let bins = vec![vec![vec![0], vec![1], vec![0]], vec![vec![1], vec![0]]];
        let pmf = JointPmf::new(vec![2, 2], vec![0.12, 0.28, 0.18, 0.42]).unwrap();
        let draws = 100_000;
        let mut counts = [0usize; 6];
        for _ in 0..draws {
            let p = likelihood_select(&mut rng, &bins, &pmf).unwrap();
            counts[p[0] * 2 + p[1]] += 1;
        }
        let e = draws as f64 / 6.0;
        let chi2: f64 = counts.iter().map(|&c| (c as f64 - e).powi(2) / e).sum();
        // 0.999 quantile of chi-square with 5 degrees of freedom
        assert!(chi2 < 20.515, "{chi2}");
    }

    #[test]
    fn single_member_bins_are_forced() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let pmf = JointPmf::new(vec![2, 2], vec![0.4, 0.1, 0.1, 0.4]).unwrap();
        let bins = vec![vec![vec![1, 0]], vec![vec![0, 1]]];
        for _ in 0..10 {
            assert_eq!(likelihood_select(&mut rng, &bins, &pmf).unwrap(), vec![0, 0]);
        }
        assert!(likelihood_select(&mut rng, &[vec![], vec![vec![0]]], &pmf).is_err());
    }

    #[test]
    fn correlated_pmf_follows_ratio() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let p = [0.4, 0.1, 0.1, 0.4];
        let pmf = JointPmf::new(vec![2, 2], p.to_vec()).unwrap();
        let bins = vec![vec![vec![0], vec![1]], vec![vec![0], vec![1]]];
        // r = p(u1, u2) / (p1(u1) p2(u2)) with uniform marginals
        let r: Vec<f64> = p.iter().map(|q| q / 0.25).collect();
        let total: f64 = r.iter().sum();
        let draws = 100_000;
        let mut counts = [0usize; 4];
        for _ in 0..draws {
            let s = likelihood_select(&mut rng, &bins, &pmf).unwrap();
            counts[s[0] * 2 + s[1]] += 1;
        }
        for (c, w) in counts.iter().zip(&r) {
            let q = w / total;
            let sigma = (q * (1.0 - q) / draws as f64).sqrt();
            assert!((*c as f64 / draws as f64 - q).abs() < 3.0 * sigma);
        }
    }
}
