//! The Markov chain `u^{n+1} = S(u^n, η_n)` and its long-time diagnostics:
//! decay fits, discrete monotonicity, the multiplier inequality, the
//! `𝓗^{4/7}` splitting, Wasserstein estimates and limit theorems.

use crate::error::{Error, Result};
use crate::noise::{NoiseDraw, NoiseSpec};
use crate::rng::{derive_seed, stream};
use crate::spectral::{Domain, PhaseState};
use crate::stats::{self, fit_line};
use crate::wave::{ForceSignal, Trajectory, WaveModel};
use nalgebra::DMatrix;
use rand::Rng;

/// Random state with `‖x‖_𝓗 = amplitude`; coefficients of equal expected
/// size in `𝓗`-normalized coordinates, damped by `j^{-smooth}`.
pub fn random_state<R: Rng + ?Sized>(domain: &Domain, amplitude: f64, smooth: f64, rng: &mut R) -> PhaseState {
    let n = domain.n_modes();
    let mut s = PhaseState::zeros(n);
    for j in 0..n {
        let w = ((j + 1) as f64).powf(-smooth);
        s.u.coeffs[j] = w * rng.gen_range(-1.0..1.0) / domain.lambda(j).sqrt();
        s.v.coeffs[j] = w * rng.gen_range(-1.0..1.0);
    }
    let norm = domain.h_norm(&s);
    if norm == 0.0 {
        return s;
    }
    s.scaled(amplitude / norm)
}

/// As [`random_state`] with modes below `first_mode` set to zero.
pub fn random_state_above<R: Rng + ?Sized>(domain: &Domain, amplitude: f64, first_mode: usize, rng: &mut R) -> PhaseState {
    let mut s = random_state(domain, 1.0, 0.0, rng);
    for j in 0..first_mode.min(domain.n_modes()) {
        s.u.coeffs[j] = 0.0;
        s.v.coeffs[j] = 0.0;
    }
    let norm = domain.h_norm(&s);
    if norm == 0.0 {
        return s;
    }
    s.scaled(amplitude / norm)
}

/// The wave chain: cubic model plus noise law on one block.
#[derive(Debug, Clone)]
pub struct WaveChain {
    pub model: WaveModel,
    pub noise: NoiseSpec,
    n_steps: usize,
}

/// States `u^0..u^n` with the draws that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainRun {
    pub states: Vec<PhaseState>,
    pub draws: Vec<NoiseDraw>,
    pub seed: u64,
    pub stream: u64,
}

impl WaveChain {
    pub fn new(model: WaveModel, noise: NoiseSpec) -> Result<Self> {
        if noise.j_max() > model.n_modes() {
            return Err(Error::Invalid("noise uses more modes than the model retains".into()));
        }
        let n_steps = model.steps_for(noise.horizon);
        Ok(WaveChain { model: model.with_cubic(true), noise, n_steps })
    }

    pub fn domain(&self) -> &Domain {
        &self.model.domain
    }

    pub fn horizon(&self) -> f64 {
        self.noise.horizon
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn signal(&self, draw: &NoiseDraw) -> ForceSignal {
        self.noise.signal(self.domain(), draw, self.n_steps)
    }

    pub fn step(&self, x: &PhaseState, draw: &NoiseDraw) -> Result<PhaseState> {
        self.model.evolve_final(x, &self.signal(draw))
    }

    /// Block trajectory with its force.
    pub fn step_path(&self, x: &PhaseState, draw: &NoiseDraw) -> Result<(Trajectory, ForceSignal)> {
        let f = self.signal(draw);
        Ok((self.model.evolve(x, &f)?, f))
    }

    /// `n` steps from `u0`, noise from stream `(seed, stream_id)`.
    pub fn run(&self, u0: &PhaseState, n: usize, seed: u64, stream_id: u64) -> Result<ChainRun> {
        let mut rng = stream(seed, stream_id);
        let mut states = Vec::with_capacity(n + 1);
        let mut draws = Vec::with_capacity(n);
        states.push(u0.clone());
        for k in 0..n {
            let d = self.noise.draw(&mut rng);
            let next = self.step(&states[k], &d).map_err(|e| Error::ChainStep { step: k, inner: Box::new(e) })?;
            states.push(next);
            draws.push(d);
        }
        Ok(ChainRun { states, draws, seed, stream: stream_id })
    }

    /// Independent chains from `u0s[i]` on streams `i` of `derive_seed(seed, 1)`.
    pub fn ensemble(&self, u0s: &[PhaseState], n: usize, seed: u64) -> Result<Vec<ChainRun>> {
        let s = derive_seed(seed, 1);
        crate::par_map(u0s.len(), |i| self.run(&u0s[i], n, s, i as u64)).into_iter().collect()
    }

    /// Flux residual of every block, re-solved with all nodes recorded.
    pub fn block_flux_residuals(&self, run: &ChainRun) -> Result<Vec<f64>> {
        run.draws
            .iter()
            .enumerate()
            .map(|(k, d)| {
                let (tr, f) = self.step_path(&run.states[k], d)?;
                Ok(self.model.flux_residual(&tr, Some(&f)))
            })
            .collect()
    }
}

/// Log-linear fit `v ≈ C e^{-rate·t}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayFit {
    pub c: f64,
    pub rate: f64,
    pub rate_se: f64,
    /// RMS residual of `log v`.
    pub residual: f64,
    pub window: (f64, f64),
    pub n_points: usize,
}

pub fn fit_exponential_decay(t: &[f64], v: &[f64]) -> Result<DecayFit> {
    if t.len() != v.len() {
        return Err(Error::Shape { expected: t.len(), got: v.len() });
    }
    if t.len() < 5 {
        return Err(Error::Data(format!("need at least 5 points, got {}", t.len())));
    }
    if let Some(bad) = v.iter().find(|&&x| !(x > 0.0)) {
        return Err(Error::Data(format!("decay series must be positive, found {bad}")));
    }
    let logs: Vec<f64> = v.iter().map(|x| x.ln()).collect();
    let f = fit_line(t, &logs, None);
    Ok(DecayFit {
        c: f.intercept.exp(),
        rate: -f.slope,
        rate_se: f.se_slope,
        residual: f.residual,
        window: (t[0], t[t.len() - 1]),
        n_points: t.len(),
    })
}

/// Fit over the leading run of points with `v > floor`.
pub fn fit_decay_above(t: &[f64], v: &[f64], floor: f64) -> Result<DecayFit> {
    let k = v.iter().position(|&x| !(x > floor)).unwrap_or(v.len());
    fit_exponential_decay(&t[..k], &v[..k])
}

/// `‖U(t)‖_{𝓗→𝓗}` at each requested time (multiples of the step).
pub fn semigroup_norms(model: &WaveModel, times: &[f64]) -> Result<Vec<f64>> {
    let dom = &model.domain;
    let n = dom.n_modes();
    let dt = model.cfg.dt;
    let t_max = times.iter().cloned().fold(0.0, f64::max);
    let idx: Vec<usize> = times.iter().map(|t| (t / dt).round() as usize).collect();
    let cols: Vec<Result<Vec<Vec<f64>>>> = crate::par_map(2 * n, |c| {
        let mut x = PhaseState::zeros(n);
        if c < n {
            x.u.coeffs[c] = 1.0 / dom.lambda(c).sqrt();
        } else {
            x.v.coeffs[c - n] = 1.0;
        }
        let path = if t_max > 0.0 { model.linear_group_path(&x, t_max)? } else { Trajectory { times: vec![0.0], states: vec![x] } };
        Ok(idx
            .iter()
            .map(|&i| {
                let s = &path.states[i.min(path.len() - 1)];
                let mut y: Vec<f64> = (0..n).map(|j| s.u.coeffs[j] * dom.lambda(j).sqrt()).collect();
                y.extend_from_slice(&s.v.coeffs);
                y
            })
            .collect())
    });
    let cols: Vec<Vec<Vec<f64>>> = cols.into_iter().collect::<Result<_>>()?;
    Ok((0..times.len())
        .map(|ti| {
            let m = DMatrix::from_fn(2 * n, 2 * n, |r, c| cols[c][ti][r]);
            m.singular_values().max()
        })
        .collect())
}

/// Outcome of the discrete monotonicity scan.
#[derive(Debug, Clone, PartialEq)]
pub struct MonotonicityReport {
    pub t0: f64,
    pub varpi: f64,
    pub energies: Vec<f64>,
    /// Largest `E(τ+T₀)/E(τ)` over the candidate forcings, per grid energy.
    pub worst_ratio: Vec<f64>,
    pub violations: Vec<bool>,
    /// Smallest grid energy above which no violation was seen.
    pub a0: Option<f64>,
}

/// State along `dir` with energy `e` (bisection on the scale).
pub fn state_with_energy(model: &WaveModel, dir: &PhaseState, e: f64) -> PhaseState {
    if e <= 0.0 {
        return dir.scaled(0.0);
    }
    let en = |s: f64| model.energy(&dir.scaled(s));
    let mut hi = 1.0;
    while en(hi) < e {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if en(mid) < e {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    dir.scaled(0.5 * (lo + hi))
}

/// For each grid energy `E`, start at energy `E` and run `t0_blocks` blocks
/// with each candidate forcing: zero and `candidates` random sign vertices
/// `θ ∈ {±1}` of the noise support. A violation is `E(τ+T₀) > ϖ E(τ)`.
pub fn discrete_monotonicity_scan(
    chain: &WaveChain,
    t0_blocks: usize,
    varpi: f64,
    energies: &[f64],
    candidates: usize,
    seed: u64,
) -> Result<MonotonicityReport> {
    if t0_blocks == 0 || !(varpi > 0.0 && varpi < 1.0) {
        return Err(Error::Invalid("need T0 > 0 and varpi in (0, 1)".into()));
    }
    let dom = chain.domain();
    let mut rng = stream(seed, 0);
    let dir = random_state(dom, 1.0, 1.0, &mut rng);
    let shape = &chain.noise.amplitudes;
    let mut forcings: Vec<Vec<NoiseDraw>> = vec![vec![NoiseDraw { theta: shape.iter().map(|r| vec![0.0; r.len()]).collect() }; t0_blocks]];
    for _ in 0..candidates {
        forcings.push(
            (0..t0_blocks)
                .map(|_| NoiseDraw {
                    theta: shape.iter().map(|r| r.iter().map(|_| if rng.gen::<bool>() { 1.0 } else { -1.0 }).collect()).collect(),
                })
                .collect(),
        );
    }
    let results: Vec<Result<f64>> = crate::par_map(energies.len(), |i| {
        let x0 = state_with_energy(&chain.model, &dir, energies[i]);
        let e0 = chain.model.energy(&x0);
        let mut worst: f64 = 0.0;
        for f in &forcings {
            let mut x = x0.clone();
            for d in f {
                x = chain.step(&x, d)?;
            }
            worst = worst.max(chain.model.energy(&x) / e0);
        }
        Ok(worst)
    });
    let worst_ratio: Vec<f64> = results.into_iter().collect::<Result<_>>()?;
    let violations: Vec<bool> = worst_ratio.iter().map(|&r| r > varpi).collect();
    let mut order: Vec<usize> = (0..energies.len()).collect();
    order.sort_by(|&a, &b| energies[a].total_cmp(&energies[b]));
    let mut a0 = None;
    for &i in order.iter().rev() {
        if violations[i] {
            break;
        }
        a0 = Some(energies[i]);
    }
    Ok(MonotonicityReport { t0: t0_blocks as f64 * chain.horizon(), varpi, energies: energies.to_vec(), worst_ratio, violations, a0 })
}

/// Terms of the multiplier inequality on one trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MultiplierReport {
    /// `∫ E dt`.
    pub lhs: f64,
    /// `E(τ+T) + ∫∫ a u_t² + ∫∫ (u² + |f u_t| + f²)`.
    pub bracket: f64,
    /// Smallest `K₀` with `lhs ≤ K₀ · bracket` (0 when both vanish).
    pub k0: f64,
}

pub fn multiplier_inequality_check(model: &WaveModel, traj: &Trajectory, f: Option<&ForceSignal>) -> MultiplierReport {
    let dom = &model.domain;
    let k = traj.len();
    let mut lhs = 0.0;
    let mut rest = 0.0;
    let term = |i: usize| -> (f64, f64) {
        let s = &traj.states[i];
        let e = model.energy(s);
        let mut r = model.damping_power(&s.v) + s.u.dot(&s.u);
        if let Some(f) = f {
            let fi = f.at(traj.times[i]);
            let fg = dom.to_grid(&fi).expect("shape");
            let vg = dom.to_grid(&s.v).expect("shape");
            r += fg.values.iter().zip(&vg.values).map(|(a, b)| (a * b).abs()).sum::<f64>() * dom.cell();
            r += fi.dot(&fi);
        }
        (e, r)
    };
    let mut prev = term(0);
    for i in 1..k {
        let cur = term(i);
        let dt = traj.times[i] - traj.times[i - 1];
        lhs += 0.5 * dt * (prev.0 + cur.0);
        rest += 0.5 * dt * (prev.1 + cur.1);
        prev = cur;
    }
    let bracket = model.energy(traj.last()) + rest;
    let k0 = if lhs == 0.0 { 0.0 } else { lhs / bracket };
    MultiplierReport { lhs, bracket, k0 }
}

/// `𝓗^{4/7}` splitting `u[t] = U(t)u⁰ + w[t]` along a chain.
#[derive(Debug, Clone, PartialEq)]
pub struct SplittingReport {
    pub times: Vec<f64>,
    /// `‖w[t]‖_{𝓗^{4/7}}`.
    pub w_norm: Vec<f64>,
    pub running_max: Vec<f64>,
    /// `‖U(t)u⁰‖_𝓗`.
    pub linear_norm: Vec<f64>,
    /// `dist_𝓗(u[t], {‖y‖_{𝓗^{4/7}} ≤ R})` with `R` the final running max.
    pub dist: Vec<f64>,
}

impl SplittingReport {
    pub fn radius(&self) -> f64 {
        self.running_max.last().copied().unwrap_or(0.0)
    }

    /// Relative growth of the running max over the final quarter of the run.
    pub fn final_quarter_growth(&self) -> f64 {
        let n = self.running_max.len();
        let before = self.running_max[(3 * n) / 4];
        if before == 0.0 {
            return 0.0;
        }
        (self.radius() - before) / before
    }

    /// Exponential fits of `dist` and of `‖U(t)u⁰‖_𝓗` over the same window:
    /// the leading stretch on which `dist > floor`. Near the time where the
    /// linear part fits inside the ball's slack `dist` drops to zero in finite
    /// time, so `floor` should be of the order of the radius.
    pub fn decay_rates(&self, floor: f64) -> Result<(DecayFit, DecayFit)> {
        let end = self.dist.iter().position(|&d| !(d > floor)).unwrap_or(self.dist.len());
        let t = &self.times[..end];
        Ok((fit_exponential_decay(t, &self.dist[..end])?, fit_exponential_decay(t, &self.linear_norm[..end])?))
    }
}

/// Distance in `𝓗` from `x` to `{y : ‖y‖_{𝓗^{4/7}} ≤ r}`.
pub fn dist_to_smooth_ball(domain: &Domain, x: &PhaseState, r: f64) -> f64 {
    let s = 4.0 / 7.0;
    if domain.phase_norm(x, s) <= r {
        return 0.0;
    }
    // Per coordinate the constraint weight is λ^s times the 𝓗 weight, so the
    // projection is y = x / (1 + μ λ^s) with μ fixed by ‖y‖_{𝓗^s} = r.
    let n = domain.n_modes();
    let radius_at = |mu: f64| {
        (0..n)
            .map(|j| {
                let l = domain.lambda(j);
                let q = 1.0 / (1.0 + mu * l.powf(s));
                l.powf(s) * (l * x.u.coeffs[j] * x.u.coeffs[j] + x.v.coeffs[j] * x.v.coeffs[j]) * q * q
            })
            .sum::<f64>()
            .sqrt()
    };
    let mut hi = 1.0;
    while radius_at(hi) > r {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if radius_at(mid) > r {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mu = hi;
    (0..n)
        .map(|j| {
            let l = domain.lambda(j);
            let p = mu * l.powf(s) / (1.0 + mu * l.powf(s));
            p * p * (l * x.u.coeffs[j] * x.u.coeffs[j] + x.v.coeffs[j] * x.v.coeffs[j])
        })
        .sum::<f64>()
        .sqrt()
}

/// Re-solves every block of `run` and the linear group from `u⁰`, sampling
/// every `stride` solver nodes.
pub fn splitting_bound(chain: &WaveChain, run: &ChainRun, stride: usize) -> Result<SplittingReport> {
    let dom = chain.domain();
    let stride = stride.max(1);
    let mut times = Vec::new();
    let mut w_norm = Vec::new();
    let mut linear_norm = Vec::new();
    let mut states = Vec::new();
    let mut lin = run.states[0].clone();
    for (k, d) in run.draws.iter().enumerate() {
        let (tr, _) = chain.step_path(&run.states[k], d)?;
        let lp = chain.model.linear_group_path(&lin, chain.horizon())?;
        let t0 = k as f64 * chain.horizon();
        let last = tr.len() - 1;
        for i in (0..last).step_by(stride) {
            let w = tr.states[i].sub(&lp.states[i]);
            times.push(t0 + tr.times[i]);
            w_norm.push(dom.phase_norm(&w, 4.0 / 7.0));
            linear_norm.push(dom.h_norm(&lp.states[i]));
            states.push(tr.states[i].clone());
        }
        lin = lp.last().clone();
    }
    let mut running_max = Vec::with_capacity(w_norm.len());
    let mut m: f64 = 0.0;
    for &w in &w_norm {
        m = m.max(w);
        running_max.push(m);
    }
    let r = m;
    let dist = states.iter().map(|s| dist_to_smooth_ball(dom, s, r)).collect();
    Ok(SplittingReport { times, w_norm, running_max, linear_norm, dist })
}

/// `W₁` between empirical laws: `∫|F_a - F_b|`.
pub fn wasserstein1_1d(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Data("empty sample".into()));
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    if a.len() == b.len() {
        return Ok(a.iter().zip(&b).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len() as f64);
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut x = a[0].min(b[0]);
    let mut total = 0.0;
    while i < a.len() || j < b.len() {
        let next = match (a.get(i), b.get(j)) {
            (Some(&p), Some(&q)) => p.min(q),
            (Some(&p), None) => p,
            (None, Some(&q)) => q,
            (None, None) => unreachable!(),
        };
        total += (i as f64 / na - j as f64 / nb).abs() * (next - x);
        x = next;
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
    }
    Ok(total)
}

/// Exact `W₁` between an empirical law and `Uniform[lo, hi]`.
pub fn wasserstein1_to_uniform(samples: &[f64], lo: f64, hi: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Data("empty sample".into()));
    }
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    let width = hi - lo;
    let g = |x: f64| ((x - lo) / width).clamp(0.0, 1.0);
    // ∫ |c - G(x)| over [p, q] where F_n ≡ c there.
    let piece = |c: f64, p: f64, q: f64| -> f64 {
        if q <= p {
            return 0.0;
        }
        let mut pts = vec![p, q];
        for b in [lo, hi, lo + c * width] {
            if b > p && b < q {
                pts.push(b);
            }
        }
        pts.sort_by(f64::total_cmp);
        pts.windows(2)
            .map(|w| {
                let (x0, x1) = (w[0], w[1]);
                let (d0, d1) = (c - g(x0), c - g(x1));
                0.5 * (d0.abs() + d1.abs()) * (x1 - x0)
            })
            .sum()
    };
    let mut total = piece(0.0, lo.min(s[0]), s[0]);
    for i in 0..s.len() {
        let right = if i + 1 < s.len() { s[i + 1] } else { hi.max(s[i]) };
        total += piece((i + 1) as f64 / n, s[i], right);
    }
    Ok(total)
}

/// Named Lipschitz functional with its declared constant.
pub struct Observable<S> {
    pub name: String,
    pub lipschitz: f64,
    #[allow(clippy::type_complexity)]
    pub f: Box<dyn Fn(&S) -> f64 + Send + Sync>,
}

impl<S> Observable<S> {
    pub fn new<F: Fn(&S) -> f64 + Send + Sync + 'static>(name: &str, lipschitz: f64, f: F) -> Self {
        Observable { name: name.to_string(), lipschitz, f: Box::new(f) }
    }

    pub fn eval(&self, s: &S) -> f64 {
        (self.f)(s)
    }
}

/// Finite family of observables used as a proxy for the dual-Lipschitz metric.
pub struct ObservableSpec<S> {
    pub items: Vec<Observable<S>>,
}

impl ObservableSpec<PhaseState> {
    /// Clipped norm, low-mode coefficients and a point evaluation.
    pub fn wave_default(domain: &Domain, clip: f64) -> Self {
        let d = domain.clone();
        let mut items = vec![Observable::new("clipped_norm", 1.0, move |s: &PhaseState| d.h_norm(s).min(clip))];
        for j in 0..domain.n_modes().min(2) {
            let l = domain.lambda(j);
            items.push(Observable::new(&format!("u{}", j + 1), 1.0 / l.sqrt(), move |s: &PhaseState| s.u.coeffs[j]));
            items.push(Observable::new(&format!("v{}", j + 1), 1.0, move |s: &PhaseState| s.v.coeffs[j]));
        }
        // u(x₀) at a generic interior point; |u(x₀)| ≤ (Σ e_j(x₀)²/λ_j)^{1/2} ‖u‖_{H¹}.
        let x0: Vec<f64> = domain.lengths().iter().map(|l| 0.37 * l).collect();
        let n = domain.n_modes();
        let ej: Vec<f64> = (0..n).map(|j| point_value(domain, j, &x0)).collect();
        let lip = (0..n).map(|j| ej[j] * ej[j] / domain.lambda(j)).sum::<f64>().sqrt();
        items.push(Observable::new("u_at_point", lip, move |s: &PhaseState| s.u.coeffs.iter().zip(&ej).map(|(a, b)| a * b).sum()));
        ObservableSpec { items }
    }
}

fn point_value(domain: &Domain, k: usize, x: &[f64]) -> f64 {
    let m = &domain.modes()[k];
    domain
        .lengths()
        .iter()
        .zip(x)
        .enumerate()
        .map(|(a, (l, xi))| (2.0 / l).sqrt() * (m.index[a] as f64 * std::f64::consts::PI * xi / l).sin())
        .product()
}

/// Decay of the distance between two laws, seen through one observable.
#[derive(Debug, Clone, PartialEq)]
pub struct MixingReport {
    pub observable: String,
    pub distances: Vec<f64>,
    /// Bootstrap estimate of `W₁` between two samples from the same law.
    pub floor: f64,
    pub fit: Option<DecayFit>,
    /// At least 3 points above twice the floor.
    pub reliable: bool,
}

/// Bootstrap Monte Carlo floor of `W₁` at the given sample sizes.
pub fn w1_floor(pool: &[f64], na: usize, nb: usize, replicates: usize, seed: u64) -> f64 {
    let mut rng = stream(seed, 0x5EED);
    let mut total = 0.0;
    for _ in 0..replicates {
        let a: Vec<f64> = (0..na).map(|_| pool[rng.gen_range(0..pool.len())]).collect();
        let b: Vec<f64> = (0..nb).map(|_| pool[rng.gen_range(0..pool.len())]).collect();
        total += wasserstein1_1d(&a, &b).expect("nonempty");
    }
    total / replicates as f64
}

/// For each observable, `W₁` between `ensembles[n]` and `reference` pushed
/// forward, and an exponential fit over the leading steps above twice the floor.
pub fn mixing_rate<S>(ensembles: &[Vec<S>], observables: &ObservableSpec<S>, reference: &[S], seed: u64) -> Result<Vec<MixingReport>> {
    if ensembles.is_empty() || reference.is_empty() {
        return Err(Error::Data("empty ensemble".into()));
    }
    observables
        .items
        .iter()
        .map(|obs| {
            let r: Vec<f64> = reference.iter().map(|s| obs.eval(s)).collect();
            let mut distances = Vec::with_capacity(ensembles.len());
            for e in ensembles {
                let v: Vec<f64> = e.iter().map(|s| obs.eval(s)).collect();
                distances.push(wasserstein1_1d(&v, &r)?);
            }
            let na = ensembles[0].len();
            let mut pool = r.clone();
            pool.extend(ensembles.last().expect("nonempty").iter().map(|s| obs.eval(s)));
            let floor = w1_floor(&pool, na, r.len(), 50, seed);
            let t: Vec<f64> = (0..distances.len()).map(|n| n as f64).collect();
            let fit = fit_decay_above(&t, &distances, 2.0 * floor).ok();
            let reliable = fit.is_some_and(|f| f.n_points >= 3);
            Ok(MixingReport { observable: obs.name.clone(), distances, floor, fit, reliable })
        })
        .collect()
}

/// LLN and CLT diagnostics for one observable over `R` chains.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LimitReport {
    /// Mean of all values over the second half of all chains.
    pub long_run_mean: f64,
    /// Time average over the last quarter of the first chain.
    pub last_quarter_mean: f64,
    /// Batch-means standard error of `last_quarter_mean`.
    pub lln_se: f64,
    pub lln_pass: bool,
    /// Variance of `(S_n - n·mean)/√n` across chains.
    pub sigma2: f64,
    pub ks_p: f64,
}

/// `series[r][n] = f(x_n)` along chain `r`.
pub fn lln_clt_check(series: &[Vec<f64>]) -> Result<LimitReport> {
    if series.is_empty() || series[0].len() < 8 {
        return Err(Error::Data("need at least one chain of length >= 8".into()));
    }
    let n = series[0].len();
    if series.iter().any(|s| s.len() != n) {
        return Err(Error::Data("chains must have equal length".into()));
    }
    let tail: Vec<f64> = series.iter().flat_map(|s| s[n / 2..].iter().copied()).collect();
    let long_run_mean = stats::mean(&tail);
    let q = &series[0][(3 * n) / 4..];
    let last_quarter_mean = stats::mean(q);
    let lln_se = if q.len() >= 20 { stats::batch_means_se(q, 10) } else { (stats::variance(q) / q.len() as f64).sqrt() };
    let lln_pass = (last_quarter_mean - long_run_mean).abs() <= 3.0 * lln_se + 1e-12;
    let sums: Vec<f64> = series.iter().map(|s| (s.iter().sum::<f64>() - n as f64 * long_run_mean) / (n as f64).sqrt()).collect();
    let sigma2 = if sums.len() > 1 { stats::variance(&sums) } else { 0.0 };
    let ks_p = if sigma2 > 0.0 { stats::ks_normal(&sums).1 } else { 1.0 };
    Ok(LimitReport { long_run_mean, last_quarter_mean, lln_se, lln_pass, sigma2, ks_p })
}
