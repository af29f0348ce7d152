//! Time integration for `u'' - Δu + σ a(x) u' + u³ + p(t,x) u = f(t,x)`.
//!
//! One step is Strang splitting: an exact half-step rotation of the free wave
//! in every mode, then an explicit-midpoint step of the remaining terms with
//! `u` frozen, then another half rotation. Steps may be negative, which is how
//! backward and adjoint problems are solved.

use crate::error::{Error, Result};
use crate::spectral::{lr_of_values, Domain, GridField, PhaseState, Profile, SpectralField};
use std::io::{BufRead, Write};

/// Energy above which a run is declared unstable.
pub const INSTABILITY_GUARD: f64 = 1e12;

/// Time-sampled spectral field on uniform nodes `0, dt, ..., T`.
#[derive(Debug, Clone, PartialEq)]
pub struct ForceSignal {
    pub dt: f64,
    pub samples: Vec<SpectralField>,
}

impl ForceSignal {
    pub fn zero(n_modes: usize, dt: f64, n_steps: usize) -> Self {
        ForceSignal { dt, samples: vec![SpectralField::zeros(n_modes); n_steps + 1] }
    }

    /// Samples `g(t_n)` on `n_steps + 1` nodes.
    pub fn from_fn<F: FnMut(f64) -> SpectralField>(dt: f64, n_steps: usize, mut g: F) -> Self {
        ForceSignal { dt, samples: (0..=n_steps).map(|n| g(n as f64 * dt)).collect() }
    }

    pub fn horizon(&self) -> f64 {
        (self.samples.len() - 1) as f64 * self.dt
    }

    pub fn n_steps(&self) -> usize {
        self.samples.len() - 1
    }

    pub fn n_modes(&self) -> usize {
        self.samples[0].len()
    }

    /// Piecewise-linear value at `t`, clamped to `[0, T]`.
    pub fn at_into(&self, t: f64, out: &mut [f64]) {
        let (i, w) = locate(t, self.dt, self.samples.len());
        let a = &self.samples[i].coeffs;
        let b = &self.samples[(i + 1).min(self.samples.len() - 1)].coeffs;
        for ((o, x), y) in out.iter_mut().zip(a).zip(b) {
            *o = (1.0 - w) * x + w * y;
        }
    }

    pub fn at(&self, t: f64) -> SpectralField {
        let mut out = vec![0.0; self.n_modes()];
        self.at_into(t, &mut out);
        SpectralField::from_vec(out)
    }

    pub fn scaled(&self, c: f64) -> Self {
        ForceSignal { dt: self.dt, samples: self.samples.iter().map(|s| s.scaled(c)).collect() }
    }

    pub fn axpy(&mut self, a: f64, other: &ForceSignal) {
        for (s, o) in self.samples.iter_mut().zip(&other.samples) {
            s.axpy(a, o);
        }
    }

    pub fn add(&self, other: &ForceSignal) -> ForceSignal {
        let mut s = self.clone();
        s.axpy(1.0, other);
        s
    }

    /// `sup_t ‖f(t)‖_{L²}` over the nodes.
    pub fn sup_l2(&self) -> f64 {
        self.samples.iter().map(|s| s.l2_norm()).fold(0.0, f64::max)
    }
}

fn locate(t: f64, dt: f64, len: usize) -> (usize, f64) {
    if len == 1 {
        return (0, 0.0);
    }
    let x = (t / dt).clamp(0.0, (len - 1) as f64);
    let i = (x.floor() as usize).min(len - 2);
    (i, x - i as f64)
}

/// Grid-valued coefficient `p(t, x)` sampled on uniform time nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialPath {
    pub dt: f64,
    pub samples: Vec<Vec<f64>>,
}

impl PotentialPath {
    /// `p = 3 û²` along a fully recorded trajectory.
    pub fn cubic_linearization(domain: &Domain, traj: &Trajectory) -> Self {
        let dt = traj.uniform_dt();
        let mut g = vec![0.0; domain.grid_len()];
        let samples = traj
            .states
            .iter()
            .map(|s| {
                domain.to_grid_into(&s.u.coeffs, &mut g);
                g.iter().map(|x| 3.0 * x * x).collect()
            })
            .collect();
        PotentialPath { dt, samples }
    }

    pub fn scaled(&self, c: f64) -> Self {
        PotentialPath { dt: self.dt, samples: self.samples.iter().map(|s| s.iter().map(|x| c * x).collect()).collect() }
    }

    fn at_into(&self, t: f64, out: &mut [f64]) {
        let (i, w) = locate(t, self.dt, self.samples.len());
        let a = &self.samples[i];
        let b = &self.samples[(i + 1).min(self.samples.len() - 1)];
        for ((o, x), y) in out.iter_mut().zip(a).zip(b) {
            *o = (1.0 - w) * x + w * y;
        }
    }

    /// `sup_{t,x} |p|`.
    pub fn sup(&self) -> f64 {
        self.samples.iter().flatten().fold(0.0, |m, x| f64::max(m, x.abs()))
    }
}

/// Ordered `(t, state)` pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<PhaseState>,
}

impl Trajectory {
    pub fn first(&self) -> &PhaseState {
        &self.states[0]
    }

    pub fn last(&self) -> &PhaseState {
        self.states.last().expect("non-empty trajectory")
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn uniform_dt(&self) -> f64 {
        if self.times.len() < 2 {
            return 1.0;
        }
        (self.times[self.times.len() - 1] - self.times[0]) / (self.times.len() - 1) as f64
    }

    /// CSV with header `t,u1..uM,v1..vM`, 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let m = self.states.first().map(|s| s.n_modes()).unwrap_or(0);
        let mut header = vec!["t".to_string()];
        header.extend((1..=m).map(|j| format!("u{j}")));
        header.extend((1..=m).map(|j| format!("v{j}")));
        writeln!(w, "{}", header.join(","))?;
        for (t, s) in self.times.iter().zip(&self.states) {
            let mut row = vec![fmt17(*t)];
            row.extend(s.u.coeffs.iter().chain(&s.v.coeffs).map(|x| fmt17(*x)));
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines.next().ok_or_else(|| Error::Data("empty trajectory file".into()))??;
        let cols = header.split(',').count();
        if cols < 3 || (cols - 1) % 2 != 0 {
            return Err(Error::Data(format!("bad trajectory header '{header}'")));
        }
        let m = (cols - 1) / 2;
        let mut traj = Trajectory { times: vec![], states: vec![] };
        for (k, line) in lines.enumerate() {
            let line = line?;
            let vals: std::result::Result<Vec<f64>, _> = line.split(',').map(|x| x.trim().parse::<f64>()).collect();
            let vals = vals.map_err(|e| Error::Data(format!("row {}: {e}", k + 2)))?;
            if vals.len() != cols {
                return Err(Error::Shape { expected: cols, got: vals.len() });
            }
            traj.times.push(vals[0]);
            traj.states.push(PhaseState::new(
                SpectralField::from_vec(vals[1..=m].to_vec()),
                SpectralField::from_vec(vals[m + 1..].to_vec()),
            ));
        }
        Ok(traj)
    }
}

/// Float formatting used in every CSV artifact (17 significant digits).
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

/// Step size and active terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub dt: f64,
    pub cubic: bool,
    pub damped: bool,
}

impl SolverConfig {
    pub fn new(dt: f64) -> Self {
        SolverConfig { dt, cubic: true, damped: true }
    }

    /// Largest admissible step `0.5 / √λ_max`.
    pub fn max_dt(domain: &Domain) -> f64 {
        0.5 / domain.lambda_max().sqrt()
    }

    pub fn validate(&self, domain: &Domain) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Invalid("dt must be positive".into()));
        }
        let bound = Self::max_dt(domain);
        if self.dt > bound * (1.0 + 1e-12) {
            return Err(Error::Constraint(format!(
                "resolution bound dt <= 0.5/sqrt(lambda_max) = {bound:.6e} violated by dt = {:.6e}",
                self.dt
            )));
        }
        Ok(())
    }
}

/// Domain, damping and step configuration of the wave system.
#[derive(Debug, Clone)]
pub struct WaveModel {
    pub domain: Domain,
    pub damping: Profile,
    pub cfg: SolverConfig,
    a_grid: Vec<f64>,
}

/// One integration request.
struct Problem<'a> {
    damping_sign: f64,
    cubic: bool,
    potential: Option<&'a PotentialPath>,
    force: Option<&'a ForceSignal>,
}

impl WaveModel {
    pub fn new(domain: Domain, damping: Profile, cfg: SolverConfig) -> Result<Self> {
        cfg.validate(&domain)?;
        let a_grid = damping.sample(&domain).values;
        if a_grid.iter().any(|&a| a < 0.0) {
            return Err(Error::Invalid("damping must be nonnegative".into()));
        }
        Ok(WaveModel { domain, damping, cfg, a_grid })
    }

    /// Same model with another step size.
    pub fn with_dt(&self, dt: f64) -> Result<Self> {
        let cfg = SolverConfig { dt, ..self.cfg };
        cfg.validate(&self.domain)?;
        Ok(WaveModel { cfg, ..self.clone() })
    }

    pub fn with_cubic(&self, cubic: bool) -> Self {
        WaveModel { cfg: SolverConfig { cubic, ..self.cfg }, ..self.clone() }
    }

    pub fn n_modes(&self) -> usize {
        self.domain.n_modes()
    }

    pub fn damping_grid(&self) -> GridField {
        GridField { values: self.effective_a().to_vec() }
    }

    fn effective_a(&self) -> &[f64] {
        if self.cfg.damped {
            &self.a_grid
        } else {
            &[]
        }
    }

    /// Number of uniform steps covering `span`.
    pub fn steps_for(&self, span: f64) -> usize {
        ((span.abs() / self.cfg.dt) - 1e-9).ceil().max(1.0) as usize
    }

    /// Energy with the quartic term iff the model is cubic.
    pub fn energy(&self, s: &PhaseState) -> f64 {
        if self.cfg.cubic {
            self.domain.energy(s)
        } else {
            self.domain.quadratic_energy(s)
        }
    }

    fn run(&self, x0: &PhaseState, t0: f64, t1: f64, prob: &Problem, record_all: bool) -> Result<Trajectory> {
        let n = self.n_modes();
        if x0.n_modes() != n {
            return Err(Error::Shape { expected: n, got: x0.n_modes() });
        }
        let steps = self.steps_for(t1 - t0);
        let h = (t1 - t0) / steps as f64;
        let d = &self.domain;
        let a = self.effective_a();
        let use_a = !a.is_empty() && a.iter().any(|&x| x != 0.0);
        let needs_u = prob.cubic || prob.potential.is_some();

        // half-step rotation tables
        let half = 0.5 * h;
        let rot: Vec<(f64, f64, f64)> = d
            .modes()
            .iter()
            .map(|m| {
                let w = m.lambda.sqrt();
                ((w * half).cos(), (w * half).sin(), w)
            })
            .collect();
        let rotate = |s: &mut PhaseState| {
            for (k, &(c, sn, w)) in rot.iter().enumerate() {
                let (u, v) = (s.u.coeffs[k], s.v.coeffs[k]);
                s.u.coeffs[k] = c * u + sn * v / w;
                s.v.coeffs[k] = -w * sn * u + c * v;
            }
        };

        let gl = d.grid_len();
        let mut ug = vec![0.0; gl];
        let mut base = vec![0.0; gl]; // grid part independent of v
        let mut vg = vec![0.0; gl];
        let mut pg = vec![0.0; gl];
        let mut fvec = vec![0.0; n];
        let mut rhs_u = vec![0.0; n]; // spectral part independent of v
        let mut gbuf = vec![0.0; n];
        let mut vhalf = vec![0.0; n];

        let mut state = x0.clone();
        let mut traj = Trajectory { times: vec![t0], states: vec![state.clone()] };
        let mut t = t0;
        for step in 0..steps {
            rotate(&mut state);
            let tm = t + half;
            // v-independent terms
            if needs_u {
                d.to_grid_into(&state.u.coeffs, &mut ug);
                if let Some(p) = prob.potential {
                    p.at_into(tm, &mut pg);
                }
                for i in 0..gl {
                    let u = ug[i];
                    let mut g = 0.0;
                    if prob.cubic {
                        g -= u * u * u;
                    }
                    if prob.potential.is_some() {
                        g -= pg[i] * u;
                    }
                    base[i] = g;
                }
            }
            if !use_a {
                if needs_u {
                    d.to_spectral_into(&base, &mut rhs_u);
                } else {
                    rhs_u.iter_mut().for_each(|x| *x = 0.0);
                }
            }
            if let Some(f) = prob.force {
                f.at_into(tm, &mut fvec);
            }
            // G(v) = P[base - σ a v] + f
            let mut eval = |v: &[f64], out: &mut [f64]| {
                if use_a {
                    d.to_grid_into(v, &mut vg);
                    for i in 0..gl {
                        let b = if needs_u { base[i] } else { 0.0 };
                        vg[i] = b - prob.damping_sign * a[i] * vg[i];
                    }
                    d.to_spectral_into(&vg, out);
                } else {
                    out.copy_from_slice(&rhs_u);
                }
                if prob.force.is_some() {
                    for (o, f) in out.iter_mut().zip(&fvec) {
                        *o += f;
                    }
                }
            };
            eval(&state.v.coeffs, &mut gbuf);
            for ((vh, v), g) in vhalf.iter_mut().zip(&state.v.coeffs).zip(&gbuf) {
                *vh = v + half * g;
            }
            eval(&vhalf, &mut gbuf);
            for (v, g) in state.v.coeffs.iter_mut().zip(&gbuf) {
                *v += h * g;
            }
            rotate(&mut state);
            t = t0 + (step + 1) as f64 * h;
            let e = d.quadratic_energy(&state);
            if !(e <= INSTABILITY_GUARD) {
                return Err(Error::Unstable { t, energy: e });
            }
            if record_all || step + 1 == steps {
                traj.times.push(t);
                traj.states.push(state.clone());
            }
        }
        Ok(traj)
    }

    /// Nonlinear solution on `[0, T]` with `T` the force horizon.
    pub fn evolve(&self, u0: &PhaseState, f: &ForceSignal) -> Result<Trajectory> {
        let prob = Problem { damping_sign: 1.0, cubic: self.cfg.cubic, potential: None, force: Some(f) };
        self.run(u0, 0.0, f.horizon(), &prob, true)
    }

    /// Final state `S(u0, f)` only.
    pub fn evolve_final(&self, u0: &PhaseState, f: &ForceSignal) -> Result<PhaseState> {
        let prob = Problem { damping_sign: 1.0, cubic: self.cfg.cubic, potential: None, force: Some(f) };
        Ok(self.run(u0, 0.0, f.horizon(), &prob, false)?.last().clone())
    }

    /// Unforced nonlinear run over `[0, t]`, recording every node.
    pub fn evolve_free(&self, u0: &PhaseState, t: f64) -> Result<Trajectory> {
        let prob = Problem { damping_sign: 1.0, cubic: self.cfg.cubic, potential: None, force: None };
        self.run(u0, 0.0, t, &prob, true)
    }

    /// Damped linear group `U(t) u0`; `t` may be negative.
    pub fn linear_group(&self, u0: &PhaseState, t: f64) -> Result<PhaseState> {
        if t == 0.0 {
            return Ok(u0.clone());
        }
        let prob = Problem { damping_sign: 1.0, cubic: false, potential: None, force: None };
        Ok(self.run(u0, 0.0, t, &prob, false)?.last().clone())
    }

    /// `U(t) u0` recorded on every node of `[0, t]`.
    pub fn linear_group_path(&self, u0: &PhaseState, t: f64) -> Result<Trajectory> {
        let prob = Problem { damping_sign: 1.0, cubic: false, potential: None, force: None };
        self.run(u0, 0.0, t, &prob, true)
    }

    /// `V_p(v0, f)` on `[0, T]`.
    pub fn linearized_forward(
        &self,
        v0: &PhaseState,
        f: Option<&ForceSignal>,
        p: Option<&PotentialPath>,
        horizon: f64,
    ) -> Result<Trajectory> {
        let prob = Problem { damping_sign: 1.0, cubic: false, potential: p, force: f };
        self.run(v0, 0.0, horizon, &prob, true)
    }

    /// `V^T_p(vT, f)`: same equation solved from `T` down to 0.
    /// Returned with increasing times.
    pub fn backward_solve(
        &self,
        vt: &PhaseState,
        f: Option<&ForceSignal>,
        p: Option<&PotentialPath>,
        horizon: f64,
    ) -> Result<Trajectory> {
        let prob = Problem { damping_sign: 1.0, cubic: false, potential: p, force: f };
        let mut tr = self.run(vt, horizon, 0.0, &prob, true)?;
        tr.times.reverse();
        tr.states.reverse();
        Ok(tr)
    }

    /// Adjoint `φ'' - Δφ - a φ' + p φ = 0` from terminal data at `T`.
    /// Returned with increasing times.
    pub fn adjoint_solve(&self, phi_t: &PhaseState, p: Option<&PotentialPath>, horizon: f64) -> Result<Trajectory> {
        let prob = Problem { damping_sign: -1.0, cubic: false, potential: p, force: None };
        let mut tr = self.run(phi_t, horizon, 0.0, &prob, true)?;
        tr.times.reverse();
        tr.states.reverse();
        Ok(tr)
    }

    /// `∫ a v² dx` on the grid.
    pub fn damping_power(&self, v: &SpectralField) -> f64 {
        let a = self.effective_a();
        if a.is_empty() {
            return 0.0;
        }
        let g = self.domain.to_grid(v).expect("shape");
        g.values.iter().zip(a).map(|(x, w)| w * x * x).sum::<f64>() * self.domain.cell()
    }

    /// `|E(T) - E(0) + ∫∫ a u_t² - ∫∫ f u_t|` with trapezoid quadrature in time.
    pub fn flux_residual(&self, traj: &Trajectory, f: Option<&ForceSignal>) -> f64 {
        let k = traj.len();
        let mut diss = 0.0;
        let mut work = 0.0;
        for i in 1..k {
            let dt = traj.times[i] - traj.times[i - 1];
            let (s0, s1) = (&traj.states[i - 1], &traj.states[i]);
            diss += 0.5 * dt * (self.damping_power(&s0.v) + self.damping_power(&s1.v));
            if let Some(f) = f {
                let w0 = f.at(traj.times[i - 1]).dot(&s0.v);
                let w1 = f.at(traj.times[i]).dot(&s1.v);
                work += 0.5 * dt * (w0 + w1);
            }
        }
        (self.energy(traj.last()) - self.energy(traj.first()) + diss - work).abs()
    }

    /// Largest excess of `E^{1/2}(t) - E^{1/2}(s)` over `(√2/2)(t-s) sup‖f‖` on node pairs.
    pub fn growth_bound_excess(&self, traj: &Trajectory, f: &ForceSignal) -> f64 {
        let sq: Vec<f64> = traj.states.iter().map(|s| self.energy(s).sqrt()).collect();
        let fs = f.sup_l2();
        let mut worst = f64::NEG_INFINITY;
        for i in 0..sq.len() {
            for j in i..sq.len() {
                let bound = std::f64::consts::FRAC_1_SQRT_2 * (traj.times[j] - traj.times[i]) * fs;
                worst = worst.max(sq[j] - sq[i] - bound);
            }
        }
        worst
    }
}

/// Mixed norm `(∫ ‖u(t)‖_{L^r}^q dt)^{1/q}` with trapezoid quadrature in time.
pub fn lq_lr_norm(domain: &Domain, traj: &Trajectory, q: f64, r: f64) -> f64 {
    let mut g = vec![0.0; domain.grid_len()];
    let vals: Vec<f64> = traj
        .states
        .iter()
        .map(|s| {
            domain.to_grid_into(&s.u.coeffs, &mut g);
            lr_of_values(&g, r, domain.cell())
        })
        .collect();
    if q.is_infinite() {
        return vals.iter().fold(0.0, |m, &x| f64::max(m, x));
    }
    let mut acc = 0.0;
    for i in 1..vals.len() {
        let dt = traj.times[i] - traj.times[i - 1];
        acc += 0.5 * dt * (vals[i - 1].powf(q) + vals[i].powf(q));
    }
    acc.powf(1.0 / q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{Side, Strip};
    use std::f64::consts::PI;

    fn model(m: usize, a: Profile, dt: f64, cubic: bool) -> WaveModel {
        let d = Domain::interval(PI, m, 4).unwrap();
        WaveModel::new(d, a, SolverConfig { dt, cubic, damped: true }).unwrap()
    }

    fn strip(a0: f64) -> Profile {
        Profile::Strip(Strip { amplitude: a0, axis: 0, side: Side::High, width: 0.25 * PI, transition: 0.1 * PI })
    }

    fn smooth_state(m: usize, seed: u64, amp: f64) -> PhaseState {
        let mut x = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let mut next = || {
            x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((x >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        };
        let u = (1..=m).map(|j| amp * next() / (j * j) as f64).collect();
        let v = (1..=m).map(|j| amp * next() / (j * j) as f64).collect();
        PhaseState::new(SpectralField::from_vec(u), SpectralField::from_vec(v))
    }

    #[test]
    fn free_mode_rotation_quarter_period() {
        let m = model(8, Profile::Zero, 1e-2, false);
        let s0 = PhaseState::new(SpectralField::unit(8, 0), SpectralField::zeros(8));
        let s = m.linear_group(&s0, PI / 2.0).unwrap();
        assert!(s.u.coeffs[0].abs() < 1e-12);
        assert!((s.v.coeffs[0] + 1.0).abs() < 1e-12);
        let back = m.linear_group(&s0, 2.0 * PI).unwrap();
        assert!(back.sub(&s0).to_vec().iter().all(|x| x.abs() < 1e-12));
    }

    #[test]
    fn critically_damped_mode() {
        let m = model(4, Profile::Constant(2.0), 1e-3, false);
        let s0 = PhaseState::new(SpectralField::unit(4, 0), SpectralField::from_vec(vec![-1.0, 0.0, 0.0, 0.0]));
        // u'' + 2u' + u = 0, u(0)=1, u'(0)=-1 -> u = e^{-t}
        // and u(0)=1, u'(0)=0 -> (1+t) e^{-t}
        let s = m.linear_group(&s0, 1.5).unwrap();
        assert!((s.u.coeffs[0] - (-1.5f64).exp()).abs() < 1e-6);
        let s1 = PhaseState::new(SpectralField::unit(4, 0), SpectralField::zeros(4));
        let r = m.linear_group(&s1, 2.0).unwrap();
        assert!((r.u.coeffs[0] - 3.0 * (-2.0f64).exp()).abs() < 1e-6);
    }

    #[test]
    fn energy_drift_scales_quadratically() {
        let s0 = smooth_state(16, 3, 1.0);
        let drift = |dt: f64| {
            let m = model(16, Profile::Zero, dt, true);
            let tr = m.evolve_free(&s0, 10.0).unwrap();
            (m.energy(tr.last()) - m.energy(tr.first())).abs()
        };
        let (d1, d2) = (drift(4e-3), drift(2e-3));
        assert!(d1 / d2 > 3.0 && d1 / d2 < 5.0, "ratio {}", d1 / d2);
        assert!(drift(1e-3) <= 1e-6, "drift {}", drift(1e-3));
    }

    #[test]
    fn second_order_endpoint_convergence() {
        let s0 = smooth_state(16, 5, 1.0);
        let d = Domain::interval(PI, 16, 4).unwrap();
        let f = ForceSignal::from_fn(0.01 / 8.0, 1600, |t| {
            let mut c = SpectralField::zeros(16);
            c.coeffs[0] = (2.0 * t).sin();
            c.coeffs[2] = 0.5 * t.cos();
            c
        });
        let run = |dt: f64| {
            let m = model(16, strip(1.0), dt, true);
            m.evolve_final(&s0, &f).unwrap()
        };
        let reference = run(0.01 / 8.0);
        let e1 = d.h_norm(&run(0.01).sub(&reference));
        let e2 = d.h_norm(&run(0.005).sub(&reference));
        let ratio = e1 / e2;
        assert!((3.2..=4.8).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn linearized_matches_group_and_is_linear() {
        let m = model(12, strip(1.0), 1e-2, true);
        let v0 = smooth_state(12, 9, 1.0);
        let g = m.linear_group(&v0, 2.0).unwrap();
        let l = m.linearized_forward(&v0, None, None, 2.0).unwrap();
        assert!(g.sub(l.last()).to_vec().iter().all(|x| x.abs() < 1e-10));
        let uhat = m.evolve_free(&smooth_state(12, 1, 0.0), 2.0).unwrap();
        let p = PotentialPath::cubic_linearization(&m.domain, &uhat);
        let lp = m.linearized_forward(&v0, None, Some(&p), 2.0).unwrap();
        assert!(lp.last().sub(l.last()).to_vec().iter().all(|x| x.abs() < 1e-14));

        let traj = m.evolve_free(&smooth_state(12, 4, 1.0), 2.0).unwrap();
        let p = PotentialPath::cubic_linearization(&m.domain, &traj);
        let w0 = smooth_state(12, 10, 1.0);
        let f = ForceSignal::from_fn(1e-2, 200, |t| SpectralField::from_vec((0..12).map(|k| (t * k as f64).cos()).collect()));
        let a = m.linearized_forward(&v0, Some(&f), Some(&p), 2.0).unwrap();
        let b = m.linearized_forward(&w0, None, Some(&p), 2.0).unwrap();
        let c = m.linearized_forward(&v0.add(&w0), Some(&f), Some(&p), 2.0).unwrap();
        let sum = a.last().add(b.last());
        let scale = m.domain.h_norm(&sum);
        assert!(m.domain.h_norm(&c.last().sub(&sum)) <= 1e-9 * scale);
    }

    #[test]
    fn forward_backward_round_trip() {
        let m = model(16, strip(1.0), 1e-3, true);
        let v0 = smooth_state(16, 2, 1.0);
        let fwd = m.linearized_forward(&v0, None, None, 2.0).unwrap();
        let back = m.backward_solve(fwd.last(), None, None, 2.0).unwrap();
        let err = m.domain.h_norm(&back.first().sub(&v0)) / m.domain.h_norm(&v0);
        assert!(err <= 1e-8, "round trip {err}");
        let z = m.backward_solve(&m.domain.zero_state(), None, None, 2.0).unwrap();
        assert!(z.states.iter().all(|s| s.to_vec().iter().all(|&x| x == 0.0)));
    }

    #[test]
    fn adjoint_without_damping_is_reflected_free_wave() {
        let m = model(8, Profile::Zero, 1e-2, false);
        let phi_t = smooth_state(8, 3, 1.0);
        let adj = m.adjoint_solve(&phi_t, None, 3.0).unwrap();
        let free = m.linear_group(&phi_t, -3.0).unwrap();
        assert!(adj.first().sub(&free).to_vec().iter().all(|x| x.abs() < 1e-12));
    }

    #[test]
    fn instability_guard_fires() {
        let m = model(4, Profile::Zero, 1e-2, false);
        let f = ForceSignal::from_fn(1e-2, 100, |_| SpectralField::from_vec(vec![1e9, 0.0, 0.0, 0.0]));
        assert!(matches!(m.evolve(&m.domain.zero_state(), &f), Err(Error::Unstable { .. })));
    }

    #[test]
    fn mixed_norm_examples() {
        let m = model(8, Profile::Zero, 1e-3, false);
        let s0 = PhaseState::new(SpectralField::unit(8, 0), SpectralField::zeros(8));
        let tr = m.linear_group_path(&s0, 2.0 * PI).unwrap();
        // ∫_0^{2π}|cos t|^5 = 32/15, ‖e1‖_{10}^{10} = (2/π)^5 π C(10,5) / 2^10
        let e1_10 = ((2.0 / PI).powi(5) * PI * 252.0 / 1024.0).powf(0.1);
        let oracle = (32.0f64 / 15.0).powf(0.2) * e1_10;
        let got = lq_lr_norm(&m.domain, &tr, 5.0, 10.0);
        assert!((got - oracle).abs() <= 1e-6 * oracle, "{got} vs {oracle}");
        let flat = Trajectory { times: vec![0.0, 1.0], states: vec![s0.clone(), s0.clone()] };
        assert!((lq_lr_norm(&m.domain, &flat, f64::INFINITY, 2.0) - 1.0).abs() < 1e-12);
        let zero = Trajectory { times: vec![0.0, 1.0], states: vec![m.domain.zero_state(); 2] };
        assert_eq!(lq_lr_norm(&m.domain, &zero, 5.0, 10.0), 0.0);
    }

    #[test]
    fn flux_and_growth_bound() {
        let s0 = smooth_state(16, 7, 1.0);
        let f = ForceSignal::from_fn(2e-3, 1000, |t| {
            SpectralField::from_vec((0..16).map(|k| (t + k as f64).sin() / (1 + k) as f64).collect())
        });
        let res = |dt: f64| {
            let m = model(16, strip(1.0), dt, true);
            let ff = ForceSignal::from_fn(dt, (2.0 / dt).round() as usize, |t| f.at(t));
            let tr = m.evolve(&s0, &ff).unwrap();
            (m.flux_residual(&tr, Some(&ff)), m.growth_bound_excess(&tr, &ff))
        };
        let (r1, g1) = res(4e-3);
        let (r2, _) = res(2e-3);
        assert!(r1 / r2 > 3.0 && r1 / r2 < 5.0, "{r1} {r2}");
        assert!(g1 <= 1e-3);
    }

    #[test]
    fn trajectory_csv_round_trip_is_bit_exact() {
        let m = model(6, strip(1.0), 1e-2, true);
        let tr = m.evolve_free(&smooth_state(6, 1, 1.0), 0.3).unwrap();
        let mut buf = Vec::new();
        tr.write_csv(&mut buf).unwrap();
        let back = Trajectory::read_csv(std::io::Cursor::new(buf)).unwrap();
        assert_eq!(back, tr);
    }
}
