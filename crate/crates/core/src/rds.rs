//! Random dynamical systems `x_{n+1} = S(x_n, ξ_n)` and the affine toy
//! `x ↦ r x + b`, `b` fair Bernoulli on `{0, 1}`, whose invariant law for
//! `r = ½` is `Uniform[0, 2]`.

use crate::error::{Error, Result};
use crate::rng::{derive_seed, stream};
use rand::Rng;

/// State space, metric, step map and noise law.
pub trait Rds: Sync {
    type State: Clone + Send + Sync;
    type Noise: Clone;

    fn step(&self, x: &Self::State, xi: &Self::Noise) -> Self::State;
    fn sample_noise<R: Rng + ?Sized>(&self, rng: &mut R) -> Self::Noise;
    fn dist(&self, x: &Self::State, y: &Self::State) -> f64;

    /// All noise values when the law is finitely supported.
    fn noise_support(&self) -> Option<Vec<Self::Noise>> {
        None
    }
}

/// `x ↦ r x + b` with `b ∈ {0, 1}` equally likely.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToyAffineRds {
    r: f64,
}

impl ToyAffineRds {
    pub fn new(r: f64) -> Result<Self> {
        if !(r.abs() < 1.0) {
            return Err(Error::Invalid(format!("contraction |r| < 1 required, got {r}")));
        }
        Ok(ToyAffineRds { r })
    }

    pub fn r(&self) -> f64 {
        self.r
    }
}

impl Default for ToyAffineRds {
    fn default() -> Self {
        ToyAffineRds { r: 0.5 }
    }
}

impl Rds for ToyAffineRds {
    type State = f64;
    type Noise = f64;

    fn step(&self, x: &f64, xi: &f64) -> f64 {
        self.r * x + xi
    }

    fn sample_noise<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if rng.gen::<bool>() {
            1.0
        } else {
            0.0
        }
    }

    fn dist(&self, x: &f64, y: &f64) -> f64 {
        (x - y).abs()
    }

    fn noise_support(&self) -> Option<Vec<f64>> {
        Some(vec![0.0, 1.0])
    }
}

/// Path `x_0..x_n` driven by the given noise values.
pub fn iterate<S: Rds>(rds: &S, x0: &S::State, noise: &[S::Noise]) -> Vec<S::State> {
    let mut path = Vec::with_capacity(noise.len() + 1);
    path.push(x0.clone());
    for xi in noise {
        let next = rds.step(path.last().expect("nonempty"), xi);
        path.push(next);
    }
    path
}

/// Path of length `n + 1` with freshly sampled noise.
pub fn simulate_rds<S: Rds, R: Rng + ?Sized>(rds: &S, x0: &S::State, n: usize, rng: &mut R) -> Vec<S::State> {
    let noise: Vec<S::Noise> = (0..n).map(|_| rds.sample_noise(rng)).collect();
    iterate(rds, x0, &noise)
}

/// `ensemble[k][i]`: state of member `i` after `k` steps, members on streams
/// `i` of `derive_seed(seed, 2)`.
pub fn ensemble_paths<S: Rds>(rds: &S, x0: &S::State, n: usize, members: usize, seed: u64) -> Vec<Vec<S::State>> {
    let s = derive_seed(seed, 2);
    let paths: Vec<Vec<S::State>> = crate::par_map(members, |i| {
        let mut rng = stream(s, i as u64);
        simulate_rds(rds, x0, n, &mut rng)
    });
    (0..=n).map(|k| paths.iter().map(|p| p[k].clone()).collect()).collect()
}

/// Enumerated (or sampled) attainable set.
#[derive(Debug, Clone, PartialEq)]
pub struct AttainableSet {
    pub points: Vec<f64>,
    /// `(min, max)` of `𝓨_k` for `k = 0..=depth`.
    pub hulls: Vec<(f64, f64)>,
    /// Enumeration exceeded the budget and fell back to sampling.
    pub sampled: bool,
}

/// `𝓨_depth` from `y0` for a scalar system with finite noise support.
/// Enumeration stops at `budget` points per level, after which each level is
/// a random sample of `budget` images.
pub fn attainable_probe<S: Rds<State = f64>>(rds: &S, y0: &[f64], depth: usize, budget: usize, seed: u64) -> Result<AttainableSet> {
    if depth > 20 {
        return Err(Error::Invalid("depth must be <= 20".into()));
    }
    let support = rds.noise_support().ok_or_else(|| Error::Invalid("noise support is not finite".into()))?;
    let mut rng = stream(seed, 3);
    let mut level = dedup(y0.to_vec());
    let hull = |v: &[f64]| (v.iter().cloned().fold(f64::INFINITY, f64::min), v.iter().cloned().fold(f64::NEG_INFINITY, f64::max));
    let mut hulls = vec![hull(&level)];
    let mut sampled = false;
    for _ in 0..depth {
        let full = level.len() * support.len();
        let next = if full <= budget && !sampled {
            level.iter().flat_map(|x| support.iter().map(move |xi| (x, xi))).map(|(x, xi)| rds.step(x, xi)).collect()
        } else {
            sampled = true;
            (0..budget)
                .map(|_| {
                    let x = level[rng.gen_range(0..level.len())];
                    let xi = &support[rng.gen_range(0..support.len())];
                    rds.step(&x, xi)
                })
                .collect()
        };
        level = dedup(next);
        hulls.push(hull(&level));
    }
    Ok(AttainableSet { points: level, hulls, sampled })
}

fn dedup(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs().max(1.0));
    v
}

/// Outcome of the sampled check of `dist(S_n(x), 𝓨) ≤ V(x) e^{-κn}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AcReport {
    /// `max dist(x_n, 𝓨) e^{κn} / V(x_0)` over sampled paths.
    pub worst: f64,
    pub pass: bool,
}

/// Checks the attraction bound on an interval `𝓨 = [lo, hi]`.
#[allow(clippy::too_many_arguments)]
pub fn verify_ac_numeric<S: Rds<State = f64>, V: Fn(f64) -> f64>(
    rds: &S,
    starts: &[f64],
    interval: (f64, f64),
    v: V,
    kappa: f64,
    steps: usize,
    paths_per_start: usize,
    seed: u64,
) -> AcReport {
    let (lo, hi) = interval;
    let dist = |x: f64| if x < lo { lo - x } else if x > hi { x - hi } else { 0.0 };
    let mut worst: f64 = 0.0;
    for (i, &x0) in starts.iter().enumerate() {
        for p in 0..paths_per_start {
            let mut rng = stream(derive_seed(seed, i as u64), p as u64);
            let path = simulate_rds(rds, &x0, steps, &mut rng);
            for (n, x) in path.iter().enumerate() {
                worst = worst.max(dist(*x) * (kappa * n as f64).exp() / v(x0));
            }
        }
    }
    AcReport { worst, pass: worst <= 1.0 + 1e-12 }
}
