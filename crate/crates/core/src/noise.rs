//! Bounded, space-time localized noise
//! `η(t,x) = χ(x) Σ_{j,k} b_jk θ_jk α_k^T(t) e_j(x)` with i.i.d. `θ_jk` on `[-1, 1]`.

use crate::error::{Error, Result};
use crate::spectral::{Domain, Profile, SpectralField};
use crate::wave::ForceSignal;
use rand::Rng;
use std::f64::consts::{PI, SQRT_2};

/// Density of the coefficients `θ_jk`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DensityKind {
    /// `¾(1 - s²)`.
    Epanechnikov,
    /// `(1 + cos πs) / 2`.
    RaisedCosine,
}

impl DensityKind {
    pub fn parse(name: &str) -> Result<Self> {
        match name.trim().to_ascii_lowercase().as_str() {
            "epanechnikov" => Ok(DensityKind::Epanechnikov),
            "raised-cosine" | "raised_cosine" => Ok(DensityKind::RaisedCosine),
            other => Err(Error::UnknownDensity(other.to_string())),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            DensityKind::Epanechnikov => "epanechnikov",
            DensityKind::RaisedCosine => "raised-cosine",
        }
    }

    pub fn pdf(&self, s: f64) -> f64 {
        if !(-1.0..=1.0).contains(&s) {
            return 0.0;
        }
        match self {
            DensityKind::Epanechnikov => 0.75 * (1.0 - s * s),
            DensityKind::RaisedCosine => 0.5 * (1.0 + (PI * s).cos()),
        }
    }

    pub fn cdf(&self, s: f64) -> f64 {
        if s <= -1.0 {
            return 0.0;
        }
        if s >= 1.0 {
            return 1.0;
        }
        match self {
            DensityKind::Epanechnikov => 0.5 + 0.75 * (s - s * s * s / 3.0),
            DensityKind::RaisedCosine => 0.5 * (s + 1.0) + (PI * s).sin() / (2.0 * PI),
        }
    }

    pub fn inv_cdf(&self, p: f64) -> f64 {
        let p = p.clamp(0.0, 1.0);
        match self {
            DensityKind::Epanechnikov => 2.0 * (((2.0 * p - 1.0).asin()) / 3.0).sin(),
            DensityKind::RaisedCosine => {
                let (mut lo, mut hi) = (-1.0f64, 1.0f64);
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if self.cdf(mid) < p {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                    if hi - lo < 1e-15 {
                        break;
                    }
                }
                0.5 * (lo + hi)
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.inv_cdf(rng.gen::<f64>())
    }

    pub fn variance(&self) -> f64 {
        match self {
            DensityKind::Epanechnikov => 0.2,
            DensityKind::RaisedCosine => 1.0 / 3.0 - 2.0 / (PI * PI),
        }
    }
}

/// `α_1 = 1`, `α_k(s) = √2 cos((k-1)πs)` on `(0, 1)`.
pub fn alpha(k: usize, s: f64) -> f64 {
    if k == 1 {
        1.0
    } else {
        SQRT_2 * ((k - 1) as f64 * PI * s).cos()
    }
}

/// `α_k^T(t) = T^{-1/2} α_k(t / T)`.
pub fn alpha_t(k: usize, t: f64, horizon: f64) -> f64 {
    alpha(k, t / horizon) / horizon.sqrt()
}

/// `‖α_k‖_{L^∞(0,1)}`.
pub fn alpha_sup(k: usize) -> f64 {
    if k == 1 {
        1.0
    } else {
        SQRT_2
    }
}

/// Signal `χ Σ_{j,k} c_jk α_k^T(t) e_j` on `n_steps + 1` uniform nodes of `[0, T]`.
/// `coeffs[j][k]` is 0-based; spatial index `j` runs over linear mode positions.
pub fn synthesize(domain: &Domain, chi: &Profile, coeffs: &[Vec<f64>], horizon: f64, n_steps: usize) -> ForceSignal {
    let n = domain.n_modes();
    let kmax = coeffs.iter().map(|r| r.len()).max().unwrap_or(0);
    let chi_grid = chi.sample(domain);
    let mut spatial = Vec::with_capacity(kmax);
    for k in 0..kmax {
        let mut f = SpectralField::zeros(n);
        let mut any = false;
        for (j, row) in coeffs.iter().enumerate() {
            if let Some(&c) = row.get(k) {
                if c != 0.0 {
                    f.coeffs[j] = c;
                    any = true;
                }
            }
        }
        spatial.push(if any { Some(domain.multiply_pointwise(&chi_grid, &f).expect("shape")) } else { None });
    }
    let dt = horizon / n_steps as f64;
    ForceSignal::from_fn(dt, n_steps, |t| {
        let mut out = SpectralField::zeros(n);
        for (k, s) in spatial.iter().enumerate() {
            if let Some(s) = s {
                out.axpy(alpha_t(k + 1, t, horizon), s);
            }
        }
        out
    })
}

/// One draw of the coefficient matrix `θ`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseDraw {
    pub theta: Vec<Vec<f64>>,
}

/// Law of one noise block.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSpec {
    pub horizon: f64,
    /// `b[j][k]`, 0-based.
    pub amplitudes: Vec<Vec<f64>>,
    pub density: DensityKind,
    pub cutoff: Profile,
    /// Size of the block where every `b_jk` is nonzero.
    pub block: usize,
}

impl NoiseSpec {
    /// `b_jk = c 2^{-(j+k)}` on the `n x n` block with `c` chosen so that the
    /// amplitude sum equals `fill * B0 √T`.
    pub fn geometric(
        domain: &Domain,
        b0: f64,
        horizon: f64,
        n: usize,
        fill: f64,
        density: DensityKind,
        cutoff: Profile,
    ) -> Result<Self> {
        if n == 0 || n > domain.n_modes() {
            return Err(Error::Invalid(format!("noise block {n} must be in 1..={}", domain.n_modes())));
        }
        let shape: Vec<Vec<f64>> =
            (1..=n).map(|j| (1..=n).map(|k| 2f64.powi(-((j + k) as i32))).collect()).collect();
        let mut spec = NoiseSpec { horizon, amplitudes: shape, density, cutoff, block: n };
        let z = spec.amplitude_sum(domain);
        let c = fill * b0 * horizon.sqrt() / z;
        spec.amplitudes.iter_mut().flatten().for_each(|b| *b *= c);
        Ok(spec)
    }

    /// Equal `b_jk` on the `n x n` block, normalized like [`NoiseSpec::geometric`].
    pub fn flat(
        domain: &Domain,
        b0: f64,
        horizon: f64,
        n: usize,
        fill: f64,
        density: DensityKind,
        cutoff: Profile,
    ) -> Result<Self> {
        if n == 0 || n > domain.n_modes() {
            return Err(Error::Invalid(format!("noise block {n} must be in 1..={}", domain.n_modes())));
        }
        let mut spec = NoiseSpec { horizon, amplitudes: vec![vec![1.0; n]; n], density, cutoff, block: n };
        let c = fill * b0 * horizon.sqrt() / spec.amplitude_sum(domain);
        spec.amplitudes.iter_mut().flatten().for_each(|b| *b *= c);
        Ok(spec)
    }

    /// User-supplied amplitudes; `block` is the largest leading square with
    /// all entries nonzero.
    pub fn explicit(horizon: f64, amplitudes: Vec<Vec<f64>>, density: DensityKind, cutoff: Profile) -> Self {
        let nonzero = |j: usize, k: usize| amplitudes.get(j).and_then(|r| r.get(k)).is_some_and(|&b| b != 0.0);
        let mut block = 0;
        while (0..=block).all(|j| (0..=block).all(|k| nonzero(j, k))) {
            block += 1;
        }
        NoiseSpec { horizon, amplitudes, density, cutoff, block }
    }

    /// All amplitudes zero.
    pub fn silent(horizon: f64, n: usize, density: DensityKind, cutoff: Profile) -> Self {
        NoiseSpec { horizon, amplitudes: vec![vec![0.0; n]; n], density, cutoff, block: n }
    }

    pub fn j_max(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn k_max(&self) -> usize {
        self.amplitudes.iter().map(|r| r.len()).max().unwrap_or(0)
    }

    /// `Σ b_jk λ_j^{2/7} ‖α_k‖_∞`.
    pub fn amplitude_sum(&self, domain: &Domain) -> f64 {
        let mut s = 0.0;
        for (j, row) in self.amplitudes.iter().enumerate() {
            for (k, &b) in row.iter().enumerate() {
                s += b * domain.lambda(j).powf(2.0 / 7.0) * alpha_sup(k + 1);
            }
        }
        s
    }

    /// Amplitude sum and whether it is at most `B0 √T`.
    pub fn check_amplitude_constraint(&self, domain: &Domain, b0: f64) -> (f64, bool) {
        let s = self.amplitude_sum(domain);
        (s, s <= b0 * self.horizon.sqrt() * (1.0 + 1e-12))
    }

    /// Nonzero amplitudes on the whole active block.
    pub fn block_nondegenerate(&self) -> bool {
        (0..self.block).all(|j| (0..self.block).all(|k| self.amplitudes.get(j).and_then(|r| r.get(k)).is_some_and(|&b| b != 0.0)))
    }

    pub fn validate(&self, domain: &Domain, b0: f64) -> Result<()> {
        if self.j_max() > domain.n_modes() {
            return Err(Error::Invalid("noise uses more spatial modes than retained".into()));
        }
        if self.amplitudes.iter().flatten().any(|&b| b < 0.0) {
            return Err(Error::Invalid("amplitudes must be nonnegative".into()));
        }
        let (s, ok) = self.check_amplitude_constraint(domain, b0);
        if !ok {
            return Err(Error::Constraint(format!(
                "noise amplitude bound sum_jk b_jk lambda_j^(2/7) ||alpha_k||_inf <= B0 sqrt(T): {s:.6e} > {:.6e}",
                b0 * self.horizon.sqrt()
            )));
        }
        Ok(())
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> NoiseDraw {
        let theta = self
            .amplitudes
            .iter()
            .map(|row| row.iter().map(|_| self.density.sample(rng)).collect())
            .collect();
        NoiseDraw { theta }
    }

    /// Coefficients `b_jk θ_jk`.
    pub fn coefficients(&self, draw: &NoiseDraw) -> Vec<Vec<f64>> {
        self.amplitudes
            .iter()
            .zip(&draw.theta)
            .map(|(b, t)| b.iter().zip(t).map(|(b, t)| b * t).collect())
            .collect()
    }

    pub fn signal(&self, domain: &Domain, draw: &NoiseDraw, n_steps: usize) -> ForceSignal {
        synthesize(domain, &self.cutoff, &self.coefficients(draw), self.horizon, n_steps)
    }

    /// One draw and its signal.
    pub fn sample_noise<R: Rng + ?Sized>(&self, domain: &Domain, n_steps: usize, rng: &mut R) -> (NoiseDraw, ForceSignal) {
        let d = self.draw(rng);
        let s = self.signal(domain, &d, n_steps);
        (d, s)
    }

    /// `B1 = Σ b_jk ‖χ e_j α_k^T‖_{L^∞(0,T; H^{4/7})}`.
    pub fn support_radius(&self, domain: &Domain) -> f64 {
        let chi = self.cutoff.sample(domain);
        let mut total = 0.0;
        for (j, row) in self.amplitudes.iter().enumerate() {
            if row.iter().all(|&b| b == 0.0) {
                continue;
            }
            let e = SpectralField::unit(domain.n_modes(), j);
            let ce = domain.sobolev_norm(&domain.multiply_pointwise(&chi, &e).expect("shape"), 4.0 / 7.0);
            for (k, &b) in row.iter().enumerate() {
                total += b * alpha_sup(k + 1) / self.horizon.sqrt() * ce;
            }
        }
        total
    }
}
