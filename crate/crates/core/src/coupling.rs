//! Coupling of one-step transition laws on the diagonal set and the extension
//! chain built from it.
//!
//! On the diagonal set the second copy receives the noise `Ψ(ζ) = ζ + χ𝒫Φ`
//! where `Φ` is the squeezing control for the current gap. In the default
//! constant-shift mode `Φ` is computed along `S(x, 0)` so `Ψ` is a fixed
//! translation of the coefficient block, and `(θ, θ')` is sampled by an exact
//! coordinate-wise maximal coupling.

use crate::control::{ControlCoeffs, ControlSystem};
use crate::error::{Error, Result};
use crate::noise::{DensityKind, NoiseDraw, NoiseSpec};
use crate::rng::{derive_seed, stream};
use crate::spectral::{Domain, PhaseState};
use crate::stats::{fit_line, LineFit};
use crate::wave::{PotentialPath, WaveModel};
use rand::Rng;

/// Thresholds `ε₁ ≥ ε₂ ≥ 0` of a piecewise-linear ramp.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpsPair {
    eps1: f64,
    eps2: f64,
}

impl EpsPair {
    pub fn new(eps1: f64, eps2: f64) -> Result<Self> {
        if !(eps2 >= 0.0 && eps1 >= eps2) {
            return Err(Error::Invalid(format!("need eps1 >= eps2 >= 0, got ({eps1}, {eps2})")));
        }
        Ok(EpsPair { eps1, eps2 })
    }

    pub fn eps1(&self) -> f64 {
        self.eps1
    }

    pub fn eps2(&self) -> f64 {
        self.eps2
    }

    /// 0 below `ε₂`, 1 above `ε₁`, linear in between.
    pub fn ramp(&self, s: f64) -> f64 {
        if s <= self.eps2 {
            0.0
        } else if s >= self.eps1 {
            1.0
        } else {
            (s - self.eps2) / (self.eps1 - self.eps2)
        }
    }
}

/// `ρ_ε(x, x')` as a ramp of the phase-space distance.
pub fn rho_eps(domain: &Domain, x: &PhaseState, y: &PhaseState, eps: EpsPair) -> f64 {
    eps.ramp(domain.h_norm(&x.sub(y)))
}

/// How the noise shift is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShiftMode {
    /// Control computed along `S(x, 0)`; exactly samplable.
    Constant,
    /// Control computed along `S(x, ζ)` with the norm cutoff.
    Pathwise,
}

impl ShiftMode {
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "constant" => Ok(ShiftMode::Constant),
            "pathwise" => Ok(ShiftMode::Pathwise),
            other => Err(Error::Invalid(format!("unknown coupling mode '{other}'"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ShiftMode::Constant => "constant",
            ShiftMode::Pathwise => "pathwise",
        }
    }
}

/// Translation of the coefficient block in `θ` units.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseShift {
    /// `h[j][k] = φ c_jk / b_jk`; same shape as the noise amplitudes.
    pub h: Vec<Vec<f64>>,
    pub coeffs: ControlCoeffs,
}

impl NoiseShift {
    pub fn is_zero(&self) -> bool {
        self.h.iter().flatten().all(|&x| x == 0.0)
    }

    pub fn scaled(&self, a: f64) -> Self {
        NoiseShift {
            h: self.h.iter().map(|r| r.iter().map(|x| a * x).collect()).collect(),
            coeffs: self.coeffs.scaled(a),
        }
    }

    pub fn apply(&self, draw: &NoiseDraw) -> NoiseDraw {
        NoiseDraw {
            theta: draw.theta.iter().zip(&self.h).map(|(t, h)| t.iter().zip(h).map(|(t, h)| t + h).collect()).collect(),
        }
    }
}

/// Pair of noise draws with marginals equal to the noise law.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingDraw {
    pub zeta: NoiseDraw,
    pub zeta_prime: NoiseDraw,
    /// `ζ' = Ψ(ζ)` holds for this draw.
    pub identical_shift: bool,
}

/// `½∫|ρ(s) - ρ(s - h)| ds` by adaptive Simpson between the kinks.
pub fn tv_coordinate(density: DensityKind, h: f64) -> f64 {
    let h = h.abs();
    if h == 0.0 {
        return 0.0;
    }
    if h >= 2.0 {
        return 1.0;
    }
    let f = |s: f64| (density.pdf(s) - density.pdf(s - h)).abs();
    let mut cuts = [-1.0, h - 1.0, 0.5 * h, 1.0, 1.0 + h];
    cuts.sort_by(f64::total_cmp);
    let mut total = 0.0;
    for w in cuts.windows(2) {
        if w[1] > w[0] {
            total += adaptive_simpson(&f, w[0], w[1], 1e-14, 40);
        }
    }
    (0.5 * total).min(1.0)
}

fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_rec(f, a, b, fa, fm, fb, whole, tol, depth)
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// Upper bound `1 - Π(1 - TV_jk)` for the product law; exact when one
/// coordinate is shifted, and equal to the mismatch probability of
/// [`maximal_coupling`] applied coordinate-wise.
pub fn tv_shift_estimate(density: DensityKind, shift: &NoiseShift) -> f64 {
    let keep: f64 = shift.h.iter().flatten().filter(|&&h| h != 0.0).map(|&h| 1.0 - tv_coordinate(density, h)).product();
    1.0 - keep
}

/// Maximal coupling of `θ ~ ρ` with `θ' ~ ρ` maximizing `P(θ' = θ + h)`.
/// Returns `(θ, θ', θ' == θ + h)`.
pub fn maximal_coupling<R: Rng + ?Sized>(density: DensityKind, h: f64, rng: &mut R) -> (f64, f64, bool) {
    if h == 0.0 {
        let t = density.sample(rng);
        return (t, t, true);
    }
    // W = θ + h has density ρ(· - h); keep it when it is also plausible under ρ.
    let theta = density.sample(rng);
    let w = theta + h;
    let u: f64 = rng.gen();
    if u * density.pdf(w - h) <= density.pdf(w) {
        return (theta, w, true);
    }
    // Otherwise draw θ' from the normalized residual (ρ - ρ(· - h))⁺.
    loop {
        let y = density.sample(rng);
        let v: f64 = rng.gen();
        if v * density.pdf(y) > density.pdf(y - h) {
            return (theta, y, false);
        }
    }
}

/// Everything needed to run coupled steps of the wave chain.
#[derive(Debug, Clone)]
pub struct CouplingSetup {
    /// Linear control problem; its step and horizon define the chain.
    pub sys: ControlSystem,
    /// Cubic model used for `S`.
    pub nonlinear: WaveModel,
    pub noise: NoiseSpec,
    pub mode: ShiftMode,
    /// `R₂` in the cutoff `φ(‖ζ‖²_{L²H^{4/7}})` of the pathwise mode.
    pub cutoff_radius: f64,
}

impl CouplingSetup {
    pub fn new(sys: ControlSystem, noise: NoiseSpec, mode: ShiftMode) -> Result<Self> {
        let (rows, cols) = (sys.rows(), sys.cut.n);
        if noise.j_max() < rows || noise.k_max() < cols {
            return Err(Error::Invalid(format!(
                "noise block {}x{} does not cover the control block {rows}x{cols}",
                noise.j_max(),
                noise.k_max()
            )));
        }
        if (noise.horizon - sys.horizon).abs() > 1e-12 * sys.horizon {
            return Err(Error::Invalid("noise and control horizons differ".into()));
        }
        let nonlinear = sys.model.with_cubic(true);
        let cutoff_radius = noise_norm_bound(sys.domain(), &noise);
        Ok(CouplingSetup { sys, nonlinear, noise, mode, cutoff_radius })
    }

    pub fn domain(&self) -> &Domain {
        self.sys.domain()
    }

    /// One chain step `S(x, ζ)`.
    pub fn step(&self, x: &PhaseState, draw: &NoiseDraw) -> Result<PhaseState> {
        let f = self.noise.signal(self.domain(), draw, self.sys.n_steps());
        self.nonlinear.evolve_final(x, &f)
    }

    /// Potential `3û²` along `û = S(x, ζ)`.
    fn reference_potential(&self, x: &PhaseState, draw: Option<&NoiseDraw>) -> Result<PotentialPath> {
        let n = self.sys.n_steps();
        let dom = self.domain();
        let f = match draw {
            Some(d) => self.noise.signal(dom, d, n),
            None => crate::wave::ForceSignal::zero(dom.n_modes(), self.sys.horizon / n as f64, n),
        };
        let traj = self.nonlinear.evolve(x, &f)?;
        Ok(PotentialPath::cubic_linearization(dom, &traj))
    }

    /// Converts control coefficients into a `θ`-shift.
    pub fn shift_from_coeffs(&self, c: &ControlCoeffs, scale: f64) -> NoiseShift {
        let h = self
            .noise
            .amplitudes
            .iter()
            .enumerate()
            .map(|(j, row)| {
                row.iter()
                    .enumerate()
                    .map(|(k, &b)| {
                        let cjk = if j < c.rows && k < c.cols { scale * c.get(j, k) } else { 0.0 };
                        match (cjk == 0.0, b > 0.0) {
                            (true, _) => 0.0,
                            (false, true) => cjk / b,
                            (false, false) => f64::INFINITY,
                        }
                    })
                    .collect()
            })
            .collect();
        NoiseShift { h, coeffs: c.scaled(scale) }
    }

    /// Control for the gap `y - x` along the reference `S(x, ζ)` (`ζ = 0` when `None`).
    fn control_for(&self, x: &PhaseState, y: &PhaseState, draw: Option<&NoiseDraw>) -> Result<ControlCoeffs> {
        let gap = y.sub(x);
        if self.domain().h_norm(&gap) == 0.0 {
            return Ok(ControlCoeffs::zeros(self.sys.rows(), self.sys.cut.n));
        }
        let p = self.reference_potential(x, draw)?;
        let gram = self.sys.assemble_gramian(Some(&p))?;
        Ok(self.sys.contractibility_control(&gram, Some(&p), &gap)?.hum.coeffs)
    }

    /// Translation used in constant-shift mode.
    pub fn constant_shift(&self, x: &PhaseState, y: &PhaseState) -> Result<NoiseShift> {
        Ok(self.shift_from_coeffs(&self.control_for(x, y, None)?, 1.0))
    }

    /// `φ(s)`: 1 up to `R₂²`, 0 beyond `(R₂ + 1)²`.
    pub fn cutoff(&self, s: f64) -> f64 {
        let r = self.cutoff_radius;
        1.0 - EpsPair { eps1: (r + 1.0).powi(2), eps2: r * r }.ramp(s)
    }

    /// `‖ζ‖²_{L²(0,T; H^{4/7})}` of a draw.
    pub fn noise_norm_sq(&self, draw: &NoiseDraw) -> f64 {
        let dom = self.domain();
        let f = self.noise.signal(dom, draw, self.sys.n_steps());
        let n = f.samples.len() - 1;
        (0..=n)
            .map(|i| {
                let w = if i == 0 || i == n { 0.5 } else { 1.0 };
                w * dom.sobolev_norm_sq(&f.samples[i], 4.0 / 7.0)
            })
            .sum::<f64>()
            * f.dt
    }

    /// `Ψ^z(ζ)` for `z = (x, y)`.
    pub fn shift_map(&self, x: &PhaseState, y: &PhaseState, draw: &NoiseDraw) -> Result<NoiseDraw> {
        let shift = match self.mode {
            ShiftMode::Constant => self.constant_shift(x, y)?,
            ShiftMode::Pathwise => {
                let phi = self.cutoff(self.noise_norm_sq(draw));
                if phi == 0.0 {
                    return Ok(draw.clone());
                }
                self.shift_from_coeffs(&self.control_for(x, y, Some(draw))?, phi)
            }
        };
        Ok(shift.apply(draw))
    }

    /// Coordinate-wise maximal coupling for a fixed translation.
    pub fn sample_with_shift<R: Rng + ?Sized>(&self, shift: &NoiseShift, rng: &mut R) -> CouplingDraw {
        let density = self.noise.density;
        let mut zeta = Vec::with_capacity(shift.h.len());
        let mut zeta_p = Vec::with_capacity(shift.h.len());
        let mut identical = true;
        for row in &shift.h {
            let (mut a, mut b) = (Vec::with_capacity(row.len()), Vec::with_capacity(row.len()));
            for &h in row {
                let (t, tp, same) = maximal_coupling(density, h, rng);
                identical &= same;
                a.push(t);
                b.push(tp);
            }
            zeta.push(a);
            zeta_p.push(b);
        }
        CouplingDraw { zeta: NoiseDraw { theta: zeta }, zeta_prime: NoiseDraw { theta: zeta_p }, identical_shift: identical }
    }

    /// Coupled noise pair for `z = (x, y)` (constant-shift mode only).
    pub fn sample_coupled_pair<R: Rng + ?Sized>(&self, x: &PhaseState, y: &PhaseState, rng: &mut R) -> Result<CouplingDraw> {
        if self.mode != ShiftMode::Constant {
            return Err(Error::Invalid("exact coupled sampling needs the constant-shift mode".into()));
        }
        let shift = self.constant_shift(x, y)?;
        Ok(self.sample_with_shift(&shift, rng))
    }
}

/// Bound on `‖ζ‖_{L²(0,T;H^{4/7})}` over the noise support.
fn noise_norm_bound(domain: &Domain, noise: &NoiseSpec) -> f64 {
    let chi = noise.cutoff.sample(domain);
    let mut total = 0.0;
    for (j, row) in noise.amplitudes.iter().enumerate() {
        let e = crate::spectral::SpectralField::unit(domain.n_modes(), j);
        let ce = domain.sobolev_norm(&domain.multiply_pointwise(&chi, &e).expect("shape"), 4.0 / 7.0);
        total += row.iter().sum::<f64>() * ce;
    }
    total
}

/// Which kernel moved the pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    DiagCoupled,
    OffDiag,
}

impl Branch {
    pub fn name(&self) -> &'static str {
        match self {
            Branch::DiagCoupled => "diag-coupled",
            Branch::OffDiag => "off-diag",
        }
    }
}

/// Pair `(x_n, x'_n)` with stopping-time bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtensionState {
    pub x: PhaseState,
    pub x_prime: PhaseState,
    pub n: usize,
    /// First `n` with the pair in the diagonal set.
    pub tau: Option<usize>,
    /// First `n ≥ τ` with `gap_n > r^{n-τ} δ`.
    pub sigma: Option<usize>,
}

/// Per-step log of the extension chain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    /// Index of the state after the step.
    pub n: usize,
    /// Gap after the step.
    pub gap: f64,
    pub branch: Branch,
    pub identical_shift: bool,
    pub sigma_hit: bool,
    pub tau_hit: bool,
}

/// Contraction factor per step on the diagonal set.
pub const SQUEEZE_RATE: f64 = 0.5;

impl ExtensionState {
    pub fn new(domain: &Domain, x: PhaseState, x_prime: PhaseState, delta: f64) -> Self {
        let mut s = ExtensionState { x, x_prime, n: 0, tau: None, sigma: None };
        s.update_times(domain, delta);
        s
    }

    pub fn gap(&self, domain: &Domain) -> f64 {
        domain.h_norm(&self.x.sub(&self.x_prime))
    }

    /// Returns `(tau_hit, sigma_hit)` for the current index.
    fn update_times(&mut self, domain: &Domain, delta: f64) -> (bool, bool) {
        let gap = self.gap(domain);
        let mut tau_hit = false;
        let mut sigma_hit = false;
        if self.tau.is_none() && gap <= delta {
            self.tau = Some(self.n);
            tau_hit = true;
        }
        if let (Some(t), None) = (self.tau, self.sigma) {
            if gap > SQUEEZE_RATE.powi((self.n - t) as i32) * delta {
                self.sigma = Some(self.n);
                sigma_hit = true;
            }
        }
        (tau_hit, sigma_hit)
    }
}

/// One transition of the extension chain.
pub fn extension_step<R: Rng + ?Sized>(
    setup: &CouplingSetup,
    ext: &ExtensionState,
    delta: f64,
    rng: &mut R,
) -> Result<(ExtensionState, StepRecord)> {
    if !(delta > 0.0) {
        return Err(Error::Invalid("delta must be positive".into()));
    }
    let dom = setup.domain();
    let on_diag = ext.gap(dom) <= delta;
    let (draw, branch) = if on_diag {
        let pair = match setup.mode {
            ShiftMode::Constant => setup.sample_coupled_pair(&ext.x, &ext.x_prime, rng)?,
            ShiftMode::Pathwise => {
                let zeta = setup.noise.draw(rng);
                let zp = setup.shift_map(&ext.x, &ext.x_prime, &zeta)?;
                CouplingDraw { zeta, zeta_prime: zp, identical_shift: true }
            }
        };
        (pair, Branch::DiagCoupled)
    } else {
        let zeta = setup.noise.draw(rng);
        let zeta_prime = setup.noise.draw(rng);
        (CouplingDraw { zeta, zeta_prime, identical_shift: false }, Branch::OffDiag)
    };
    let mut next = ExtensionState {
        x: setup.step(&ext.x, &draw.zeta)?,
        x_prime: setup.step(&ext.x_prime, &draw.zeta_prime)?,
        n: ext.n + 1,
        tau: ext.tau,
        sigma: ext.sigma,
    };
    let (tau_hit, sigma_hit) = next.update_times(dom, delta);
    let rec = StepRecord { n: next.n, gap: next.gap(dom), branch, identical_shift: draw.identical_shift, sigma_hit, tau_hit };
    Ok((next, rec))
}

/// One run of the extension chain.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtensionRun {
    pub initial_gap: f64,
    pub records: Vec<StepRecord>,
    pub tau: Option<usize>,
    pub sigma: Option<usize>,
    pub final_state: ExtensionState,
}

pub fn run_extension<R: Rng + ?Sized>(
    setup: &CouplingSetup,
    x0: &PhaseState,
    x0_prime: &PhaseState,
    n_max: usize,
    delta: f64,
    rng: &mut R,
) -> Result<ExtensionRun> {
    if n_max == 0 {
        return Err(Error::Invalid("n_max must be >= 1".into()));
    }
    let dom = setup.domain();
    let mut ext = ExtensionState::new(dom, x0.clone(), x0_prime.clone(), delta);
    let initial_gap = ext.gap(dom);
    let mut records = Vec::with_capacity(n_max);
    for _ in 0..n_max {
        let (next, rec) = extension_step(setup, &ext, delta, rng)?;
        records.push(rec);
        ext = next;
    }
    Ok(ExtensionRun { initial_gap, records, tau: ext.tau, sigma: ext.sigma, final_state: ext })
}

/// Ensemble statistics of the stopping times.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtensionSummary {
    pub runs: Vec<ExtensionRun>,
    /// Fraction of runs with `τ` observed and no `σ` within the horizon.
    pub p_sigma_infinite: f64,
    pub tau_samples: Vec<usize>,
    pub sigma_samples: Vec<usize>,
    /// Line fit of `log P(τ > n)` against `n` when enough hits exist.
    pub tau_tail: Option<LineFit>,
}

/// Independent runs from `pairs[i]` on stream `(seed, i)`.
pub fn run_extension_ensemble(
    setup: &CouplingSetup,
    pairs: &[(PhaseState, PhaseState)],
    n_max: usize,
    delta: f64,
    seed: u64,
) -> Result<ExtensionSummary> {
    let runs: Vec<Result<ExtensionRun>> = crate::par_map(pairs.len(), |i| {
        let mut rng = stream(derive_seed(seed, 0xC0), i as u64);
        run_extension(setup, &pairs[i].0, &pairs[i].1, n_max, delta, &mut rng)
    });
    let runs: Vec<ExtensionRun> = runs.into_iter().collect::<Result<_>>()?;
    let hit: Vec<&ExtensionRun> = runs.iter().filter(|r| r.tau.is_some()).collect();
    let p_sigma_infinite = if hit.is_empty() { 0.0 } else { hit.iter().filter(|r| r.sigma.is_none()).count() as f64 / hit.len() as f64 };
    let tau_samples: Vec<usize> = hit.iter().filter_map(|r| r.tau).collect();
    let sigma_samples: Vec<usize> = runs.iter().filter_map(|r| r.sigma.zip(r.tau).map(|(s, t)| s - t)).collect();
    let tau_tail = survival_fit(&runs.iter().map(|r| r.tau).collect::<Vec<_>>(), n_max);
    Ok(ExtensionSummary { runs, p_sigma_infinite, tau_samples, sigma_samples, tau_tail })
}

/// Fit of `log P̂(τ > n)` over the range where the survival is positive.
fn survival_fit(times: &[Option<usize>], n_max: usize) -> Option<LineFit> {
    let total = times.len() as f64;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for n in 0..=n_max {
        let surv = times.iter().filter(|t| t.is_none_or(|t| t > n)).count() as f64 / total;
        if surv <= 0.0 {
            break;
        }
        xs.push(n as f64);
        ys.push(surv.ln());
    }
    (xs.len() >= 3).then(|| fit_line(&xs, &ys, None))
}

/// Empirical one-step failure frequency on the diagonal set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FailurePoint {
    pub gap: f64,
    /// `P̂(gap_{n+1} > ½ gap_n)`.
    pub p_fail: f64,
    pub se: f64,
    /// `1 - Π(1 - TV_jk)` for the shift at this gap.
    pub tv_bound: f64,
    /// Largest `gap_{n+1}/gap_n` among draws with `identical_shift`.
    pub worst_identical_ratio: f64,
    pub identical_fraction: f64,
}

/// For each gap `s`, start from `(x, x + s·dir/‖dir‖)` and sample the coupled
/// step `samples` times. The shift is linear in the gap, so the control is
/// computed once.
pub fn coupling_failure_scan(
    setup: &CouplingSetup,
    x: &PhaseState,
    dir: &PhaseState,
    gaps: &[f64],
    samples: usize,
    seed: u64,
) -> Result<Vec<FailurePoint>> {
    if setup.mode != ShiftMode::Constant {
        return Err(Error::Invalid("failure scan needs the constant-shift mode".into()));
    }
    let dom = setup.domain();
    let unit = dir.scaled(1.0 / dom.h_norm(dir));
    let base = setup.constant_shift(x, &x.add(&unit))?;
    let mut out = Vec::with_capacity(gaps.len());
    for (gi, &s) in gaps.iter().enumerate() {
        let y = x.add(&unit.scaled(s));
        let shift = base.scaled(s);
        let tv_bound = tv_shift_estimate(setup.noise.density, &shift);
        let results: Vec<Result<(bool, bool, f64)>> = crate::par_map(samples, |i| {
            let mut rng = stream(derive_seed(seed, gi as u64), i as u64);
            let pair = setup.sample_with_shift(&shift, &mut rng);
            let a = setup.step(x, &pair.zeta)?;
            let b = setup.step(&y, &pair.zeta_prime)?;
            let ratio = dom.h_norm(&a.sub(&b)) / s;
            Ok((ratio > SQUEEZE_RATE, pair.identical_shift, ratio))
        });
        let results: Vec<(bool, bool, f64)> = results.into_iter().collect::<Result<_>>()?;
        let n = samples as f64;
        let fails = results.iter().filter(|r| r.0).count() as f64;
        let ident: Vec<f64> = results.iter().filter(|r| r.1).map(|r| r.2).collect();
        let p = fails / n;
        out.push(FailurePoint {
            gap: s,
            p_fail: p,
            se: (p * (1.0 - p) / n).sqrt(),
            tv_bound,
            worst_identical_ratio: ident.iter().cloned().fold(0.0, f64::max),
            identical_fraction: ident.len() as f64 / n,
        });
    }
    Ok(out)
}

/// Gap at which the TV bound of the constant shift reaches `target`,
/// from the linear regime of the shift in the gap.
pub fn calibrate_delta(setup: &CouplingSetup, x: &PhaseState, dir: &PhaseState, target: f64) -> Result<f64> {
    let dom = setup.domain();
    let unit = dir.scaled(1.0 / dom.h_norm(dir));
    let base = setup.constant_shift(x, &x.add(&unit))?;
    // bisection on s ↦ TV(s·base), monotone in s
    let tv = |s: f64| tv_shift_estimate(setup.noise.density, &base.scaled(s));
    let mut hi = 1.0;
    while tv(hi) < target {
        hi *= 2.0;
        if hi > 1e6 {
            return Err(Error::Invalid("shift never reaches the target TV".into()));
        }
    }
    let mut lo = 0.0;
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if tv(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}
