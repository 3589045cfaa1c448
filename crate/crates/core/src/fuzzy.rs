//! Gödel t-conorm and t-conorm boost functions.
//!
//! A boost function takes the truth values `t` of a clause's literals and
//! returns a nonnegative change `delta` such that the clause's t-conorm does
//! not decrease. For the Gödel t-conorm (`max`) the smallest such change, in
//! any `l_p` norm, puts all of its mass on the currently largest literal
//! ([`boost_hard`]). The differentiable layers use the softmax relaxation
//! [`boost_soft`] on preactivations instead.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};

use crate::error::{invalid, Result};

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = i;
        }
    }
    best
}

fn check_truth(t: &[f64]) -> Result<()> {
    if t.is_empty() {
        return Err(invalid!("truth vector is empty"));
    }
    if let Some(x) = t.iter().find(|x| !(0.0..=1.0).contains(*x)) {
        return Err(invalid!("truth value {x} outside [0, 1]"));
    }
    Ok(())
}

/// Gödel t-conorm: the maximum truth value.
pub fn godel(t: &[f64]) -> Result<f64> {
    check_truth(t)?;
    Ok(t[argmax(t)])
}

/// Minimal boost for the Gödel t-conorm: raises the argmax literal by `f`.
pub fn boost_hard(f: f64, t: &[f64]) -> Result<Vec<f64>> {
    let g = godel(t)?;
    // small slack for values computed as 1 - max(t)
    if !(f >= 0.0) || f > 1.0 - g + 1e-12 {
        return Err(invalid!(
            "boost {f} outside [0, 1 - max(t)] = [0, {}]",
            1.0 - g
        ));
    }
    let mut delta = vec![0.0; t.len()];
    delta[argmax(t)] = f;
    Ok(delta)
}

/// Softmax relaxation of the boost on preactivations: `w * softmax(v)`.
///
/// `w` is expected to be nonnegative.
pub fn boost_soft(w: f64, v: &[f64]) -> Vec<f64> {
    debug_assert!(w >= 0.0);
    softmax(v).into_iter().map(|s| w * s).collect()
}

pub fn softmax(v: &[f64]) -> Vec<f64> {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = v.iter().map(|&x| libm::exp(x - m)).collect();
    let total: f64 = e.iter().sum();
    e.into_iter().map(|x| x / total).collect()
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}

pub fn logit(p: f64) -> f64 {
    libm::log(p / (1.0 - p))
}

pub fn lp_norm(v: &[f64], p: f64) -> f64 {
    let s: f64 = v.iter().map(|x| libm::pow(libm::fabs(*x), p)).sum();
    libm::pow(s, 1.0 / p)
}

/// The hard boost applied on preactivations: `w` added to the largest entry.
pub fn preactivation_boost(w: f64, v: &[f64]) -> Vec<f64> {
    let mut delta = vec![0.0; v.len()];
    if !v.is_empty() {
        delta[argmax(v)] = w;
    }
    delta
}

/// Looks for a boost smaller than `delta` (in `l_p`) that reaches at least the
/// same Gödel value; returns the first one found within `trials` samples.
///
/// Competitors are drawn on the `l_p` sphere of radius
/// `(1 - 1e-6) * ||delta||_p`, folded into the nonnegative orthant and clipped
/// into the box `[0, 1 - t_i]`. Clipping only shrinks a sample, so every
/// sample is a valid boost with norm strictly below `||delta||_p`.
pub fn minimality_witness_search(
    t: &[f64],
    delta: &[f64],
    p: f64,
    trials: usize,
    seed: u64,
) -> Result<Option<Vec<f64>>> {
    if !(p >= 1.0) || !p.is_finite() {
        return Err(invalid!("norm order must be a finite p >= 1, got {p}"));
    }
    check_truth(t)?;
    if delta.len() != t.len() {
        return Err(invalid!(
            "delta has length {}, expected {}",
            delta.len(),
            t.len()
        ));
    }
    let boosted: Vec<f64> = t.iter().zip(delta).map(|(a, b)| a + b).collect();
    if delta.iter().any(|&d| d < 0.0) || boosted.iter().any(|&x| x > 1.0 + 1e-12) {
        return Err(invalid!("delta is not a valid boost for t"));
    }
    let target = boosted[argmax(&boosted)];
    let radius = (1.0 - 1e-6) * lp_norm(delta, p);
    if radius == 0.0 {
        return Ok(None);
    }
    // |g|^p ~ Gamma(1/p) gives density proportional to exp(-|g|^p).
    let gamma = Gamma::new(1.0 / p, 1.0).map_err(|e| invalid!("{e}"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut candidate = vec![0.0; t.len()];
    for _ in 0..trials {
        for c in candidate.iter_mut() {
            let g: f64 = gamma.sample(&mut rng);
            *c = libm::pow(g, 1.0 / p);
        }
        let norm = lp_norm(&candidate, p);
        if !(norm > 0.0) || !norm.is_finite() {
            continue;
        }
        let mut best = f64::NEG_INFINITY;
        for (i, c) in candidate.iter_mut().enumerate() {
            *c = (*c * radius / norm).min(1.0 - t[i]).max(0.0);
            best = best.max(t[i] + *c);
        }
        if best >= target {
            return Ok(Some(candidate.clone()));
        }
    }
    Ok(None)
}

/// Monte Carlo estimate of the probability that two clauses with `n` and `m`
/// literals, sharing one atom with opposite signs, collide under uniformly
/// random literal truth values: the shared atom's value `x` is the largest of
/// the first clause's literals and `1 - x` the largest of the second's.
pub fn collision_mc(n: usize, m: usize, samples: usize, seed: u64) -> Result<f64> {
    if n < 2 || m < 2 {
        return Err(invalid!(
            "both clauses need at least two literals (got {n}, {m})"
        ));
    }
    if samples == 0 {
        return Err(invalid!("need at least one sample"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hits = 0usize;
    for _ in 0..samples {
        let x: f64 = rng.random();
        let first = (1..n).all(|_| rng.random::<f64>() <= x);
        let second = (1..m).all(|_| rng.random::<f64>() <= 1.0 - x);
        if first && second {
            hits += 1;
        }
    }
    Ok(hits as f64 / samples as f64)
}

/// `B(n, m) = Γ(n) Γ(m) / Γ(n + m)`.
pub fn beta_fn(n: f64, m: f64) -> f64 {
    libm::exp(libm::lgamma(n) + libm::lgamma(m) - libm::lgamma(n + m))
}

/// One row of the collision table.
#[derive(Clone, Debug, PartialEq)]
pub struct CollisionRow {
    pub n: usize,
    pub m: usize,
    pub estimate: f64,
    pub exact: f64,
    /// Binomial standard error of `estimate`.
    pub std_err: f64,
}

/// Literal-count pairs tabulated by [`collision_table`].
pub const COLLISION_PAIRS: [(usize, usize); 5] = [(2, 2), (2, 3), (3, 3), (3, 4), (4, 4)];

pub fn collision_table(samples: usize, seed: u64) -> Result<Vec<CollisionRow>> {
    COLLISION_PAIRS
        .iter()
        .enumerate()
        .map(|(i, &(n, m))| {
            let estimate = collision_mc(n, m, samples, seed.wrapping_add(i as u64))?;
            let exact = beta_fn(n as f64, m as f64);
            let std_err = libm::sqrt(exact * (1.0 - exact) / samples as f64);
            Ok(CollisionRow {
                n,
                m,
                estimate,
                exact,
                std_err,
            })
        })
        .collect()
}

/// Outcome of a minimality sweep over random truth vectors.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct MinimalitySummary {
    pub instances: usize,
    pub hard_counterexamples: usize,
    pub spread_counterexamples: usize,
}

/// Checks [`boost_hard`] against the control boost that spreads the same
/// total mass uniformly, over `instances` random truth vectors with 2 to 6
/// literals and `p` cycling through 1, 2 and 3.
pub fn minimality_sweep(instances: usize, trials: usize, seed: u64) -> Result<MinimalitySummary> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut summary = MinimalitySummary {
        instances,
        ..Default::default()
    };
    for k in 0..instances {
        let n = rng.random_range(2..=6usize);
        let p = [1.0, 2.0, 3.0][k % 3];
        let t: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..0.9)).collect();
        let g = t[argmax(&t)];
        let f = rng.random_range(0.05..=1.0) * (1.0 - g);
        let hard = boost_hard(f, &t)?;
        let spread = vec![f / n as f64; n];
        let s1 = rng.random();
        let s2 = rng.random();
        if minimality_witness_search(&t, &hard, p, trials, s1)?.is_some() {
            summary.hard_counterexamples += 1;
        }
        if minimality_witness_search(&t, &spread, p, trials, s2)?.is_some() {
            summary.spread_counterexamples += 1;
        }
    }
    Ok(summary)
}
