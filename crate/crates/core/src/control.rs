//! Low-mode controllability of the linearized damped wave equation.
//!
//! Controls are `χ Σ_{j,k≤N} c_jk e_j α_k^T(t)` with cost `Σ λ_j^{1/5} c_jk²`.
//! For a reference path `û` the observation Gramian on `q = (q₁, q₂) ∈ H_m × H_m`
//! is assembled from `2m` adjoint solves with terminal data `(q₂, -q₁ + a q₂)`.
//! The least-norm control solves `G q̂ = -ℓ(v⁰)` with `ℓ` the affine term of the
//! dual functional, then maps `q̂` back through the adjoint observation.

use crate::error::{Error, Result};
use crate::noise::{alpha_t, synthesize};
use crate::spectral::{Domain, GridField, PhaseState, Profile, SpectralField};
use crate::wave::{ForceSignal, PotentialPath, Trajectory, WaveModel};
use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// Cost weight exponent: controls are measured in `H^{1/5}`.
pub const CONTROL_SMOOTHNESS: f64 = 0.2;

/// Truncation parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrequencyCut {
    /// Low modes steered to their target.
    pub m: usize,
    /// Control block size (spatial and temporal).
    pub n: usize,
    pub s: f64,
}

impl FrequencyCut {
    pub fn new(m: usize, n: usize) -> Self {
        FrequencyCut { m, n, s: CONTROL_SMOOTHNESS }
    }
}

/// Control coefficients `c_jk`, row-major over `(j, k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlCoeffs {
    pub rows: usize,
    pub cols: usize,
    pub c: Vec<f64>,
}

impl ControlCoeffs {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        ControlCoeffs { rows, cols, c: vec![0.0; rows * cols] }
    }

    pub fn get(&self, j: usize, k: usize) -> f64 {
        self.c[j * self.cols + k]
    }

    pub fn as_matrix(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|j| self.c[j * self.cols..(j + 1) * self.cols].to_vec()).collect()
    }

    pub fn scaled(&self, a: f64) -> Self {
        ControlCoeffs { c: self.c.iter().map(|x| a * x).collect(), ..*self }
    }

    pub fn norm(&self) -> f64 {
        self.c.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

/// Gramian with the data needed to synthesize controls from `q`.
#[derive(Debug, Clone)]
pub struct ObservationGramian {
    pub g: DMatrix<f64>,
    /// `𝓗^{-6/5}` Gram matrix of the terminal data `(q₂, -q₁ + a q₂)`.
    pub k: DMatrix<f64>,
    /// Column `a`: observation coefficients `∫(χφ_a, e_j) α_k^T dt`, flattened.
    pub b: DMatrix<f64>,
    /// Adjoint state `(φ_a(0), ∂_tφ_a(0))` per basis vector.
    pub phi0: Vec<PhaseState>,
    pub horizon: f64,
    pub cut: FrequencyCut,
}

impl ObservationGramian {
    pub fn dim(&self) -> usize {
        self.g.nrows()
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        let scale = self.g.amax().max(1e-300);
        (&self.g - self.g.transpose()).amax() <= tol * scale
    }

    /// Smallest eigenvalue of `G`.
    pub fn min_eig_plain(&self) -> f64 {
        SymmetricEigen::new(self.g.clone()).eigenvalues.min()
    }

    /// Smallest generalized eigenvalue of `G x = μ K x`.
    pub fn observability_min_eig(&self) -> f64 {
        let chol = self.k.clone().cholesky().expect("terminal-data Gram matrix is positive definite");
        let l = chol.l();
        let linv = l.clone().try_inverse().expect("invertible factor");
        let m = &linv * &self.g * linv.transpose();
        let m = 0.5 * (&m + m.transpose());
        SymmetricEigen::new(m).eigenvalues.min()
    }
}

/// Result of a least-norm control computation.
#[derive(Debug, Clone)]
pub struct HumResult {
    pub coeffs: ControlCoeffs,
    pub q: Vec<f64>,
    /// `‖P_m v[T] - target‖_𝓗 / ‖v⁰‖_𝓗` after refinement (0 when `v⁰ = 0`).
    pub residual: f64,
    /// `Σ λ_j^{1/5} c_jk²`.
    pub cost: f64,
    pub final_state: PhaseState,
}

/// Result of the contractibility control.
#[derive(Debug, Clone)]
pub struct ContractionResult {
    pub hum: HumResult,
    /// `‖v[T]‖_𝓗 / ‖v⁰‖_𝓗`.
    pub ratio: f64,
    /// `‖P_m v[T] - P_m U(T)v⁰‖_𝓗 / ‖v⁰‖_𝓗`.
    pub low_mode_error: f64,
    /// `‖U(T)v⁰‖_𝓗 / ‖v⁰‖_𝓗`.
    pub free_ratio: f64,
}

/// Linear control problem on `[0, T]`.
#[derive(Debug, Clone)]
pub struct ControlSystem {
    pub model: WaveModel,
    pub chi: Profile,
    pub horizon: f64,
    pub cut: FrequencyCut,
    /// Extra forward solves used to remove the adjoint/forward discretization mismatch.
    pub refinements: usize,
    n_steps: usize,
    chi_grid: GridField,
    a_grid: GridField,
}

impl ControlSystem {
    pub fn new(model: WaveModel, chi: Profile, horizon: f64, cut: FrequencyCut) -> Result<Self> {
        let nm = model.n_modes();
        if cut.m == 0 || cut.m > nm {
            return Err(Error::Invalid(format!("m = {} must be in 1..={nm}", cut.m)));
        }
        if cut.n == 0 {
            return Err(Error::Invalid("N must be >= 1".into()));
        }
        if !(horizon > 0.0) {
            return Err(Error::Invalid("horizon must be positive".into()));
        }
        let n_steps = model.steps_for(horizon);
        if cut.n > n_steps {
            return Err(Error::Invalid("time block exceeds node count".into()));
        }
        let chi_grid = chi.sample(&model.domain);
        let a_grid = model.damping_grid();
        Ok(ControlSystem { model, chi, horizon, cut, refinements: 3, n_steps, chi_grid, a_grid })
    }

    pub fn domain(&self) -> &Domain {
        &self.model.domain
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    /// Number of spatial modes in the control block.
    pub fn rows(&self) -> usize {
        self.cut.n.min(self.model.n_modes())
    }

    fn weights_inv(&self) -> Vec<f64> {
        let cols = self.cut.n;
        let mut w = Vec::with_capacity(self.rows() * cols);
        for j in 0..self.rows() {
            let x = self.domain().lambda(j).powf(-self.cut.s);
            w.extend(std::iter::repeat_n(x, cols));
        }
        w
    }

    fn mult_a(&self, f: &SpectralField) -> SpectralField {
        if self.a_grid.values.is_empty() {
            return SpectralField::zeros(f.len());
        }
        self.domain().multiply_pointwise(&self.a_grid, f).expect("shape")
    }

    /// Terminal adjoint data `(q₂, -q₁ + a q₂)` for coordinates `q`.
    pub fn terminal_data(&self, q: &[f64]) -> PhaseState {
        let n = self.model.n_modes();
        let m = self.cut.m;
        let mut q1 = SpectralField::zeros(n);
        let mut q2 = SpectralField::zeros(n);
        q1.coeffs[..m].copy_from_slice(&q[..m]);
        q2.coeffs[..m].copy_from_slice(&q[m..2 * m]);
        let mut v = self.mult_a(&q2);
        v.axpy(-1.0, &q1);
        PhaseState::new(q2, v)
    }

    /// Low-mode coordinates `(u_1..u_m, v_1..v_m)`.
    pub fn low_modes(&self, s: &PhaseState) -> Vec<f64> {
        let m = self.cut.m;
        let mut y = s.u.coeffs[..m].to_vec();
        y.extend_from_slice(&s.v.coeffs[..m]);
        y
    }

    fn low_mode_norm(&self, y: &[f64]) -> f64 {
        let m = self.cut.m;
        let d = self.domain();
        (0..m).map(|j| d.lambda(j) * y[j] * y[j] + y[m + j] * y[m + j]).sum::<f64>().sqrt()
    }

    /// `𝒫^T_N` coefficients `∫(f(t), e_j) α_k^T(t) dt` of the spatial field
    /// `field_at(n)` given on the solver nodes.
    fn time_space_coeffs<F: Fn(usize) -> SpectralField>(&self, field_at: F) -> ControlCoeffs {
        let (rows, cols) = (self.rows(), self.cut.n);
        let mut out = ControlCoeffs::zeros(rows, cols);
        let dt = self.horizon / self.n_steps as f64;
        for node in 0..=self.n_steps {
            let t = node as f64 * dt;
            let w = if node == 0 || node == self.n_steps { 0.5 * dt } else { dt };
            let f = field_at(node);
            for k in 0..cols {
                let a = w * alpha_t(k + 1, t, self.horizon);
                for j in 0..rows {
                    out.c[j * cols + k] += a * f.coeffs[j];
                }
            }
        }
        out
    }

    /// Coefficients of `𝒫^T_N f`.
    pub fn project_coeffs(&self, f: &ForceSignal) -> ControlCoeffs {
        self.time_space_coeffs(|n| f.samples[n].clone())
    }

    /// `𝒫^T_N f` as a signal on the same nodes.
    pub fn project_time_space(&self, f: &ForceSignal) -> ForceSignal {
        let c = self.project_coeffs(f);
        synthesize(self.domain(), &Profile::Constant(1.0), &c.as_matrix(), self.horizon, self.n_steps)
    }

    /// Observation `𝒫^T_N(χφ)` of an adjoint trajectory.
    pub fn observe(&self, adjoint: &Trajectory) -> ControlCoeffs {
        let d = self.domain();
        self.time_space_coeffs(|n| d.multiply_pointwise(&self.chi_grid, &adjoint.states[n].u).expect("shape"))
    }

    /// Force `χ Σ c_jk e_j α_k^T`.
    pub fn control_signal(&self, c: &ControlCoeffs) -> ForceSignal {
        synthesize(self.domain(), &self.chi, &c.as_matrix(), self.horizon, self.n_steps)
    }

    /// `Σ λ_j^{1/5} c_jk²`.
    pub fn cost(&self, c: &ControlCoeffs) -> f64 {
        let w = self.weights_inv();
        c.c.iter().zip(&w).map(|(x, wi)| x * x / wi).sum()
    }

    pub fn adjoint(&self, q: &[f64], p: Option<&PotentialPath>) -> Result<Trajectory> {
        self.model.adjoint_solve(&self.terminal_data(q), p, self.horizon)
    }

    /// Forward solution `V_p(v⁰, χ𝒫c)`.
    pub fn forward(&self, v0: &PhaseState, c: Option<&ControlCoeffs>, p: Option<&PotentialPath>) -> Result<Trajectory> {
        let f = c.map(|c| self.control_signal(c));
        self.model.linearized_forward(v0, f.as_ref(), p, self.horizon)
    }

    /// `2m` adjoint solves and the weighted observation products.
    pub fn assemble_gramian(&self, p: Option<&PotentialPath>) -> Result<ObservationGramian> {
        let dim = 2 * self.cut.m;
        let len = self.rows() * self.cut.n;
        let mut b = DMatrix::zeros(len, dim);
        let mut phi0 = Vec::with_capacity(dim);
        let cols: Vec<Result<(ControlCoeffs, PhaseState)>> = crate::par_map(dim, |a| {
            let mut q = vec![0.0; dim];
            q[a] = 1.0;
            let tr = self.adjoint(&q, p)?;
            Ok((self.observe(&tr), tr.first().clone()))
        });
        for (a, col) in cols.into_iter().enumerate() {
            let (obs, s0) = col?;
            for (i, x) in obs.c.iter().enumerate() {
                b[(i, a)] = *x;
            }
            phi0.push(s0);
        }
        let w = DVector::from_vec(self.weights_inv());
        let wb = DMatrix::from_fn(len, dim, |i, a| w[i] * b[(i, a)]);
        let g = b.transpose() * wb;
        let g = 0.5 * (&g + g.transpose());

        let d = self.domain();
        let terminals: Vec<PhaseState> = (0..dim)
            .map(|a| {
                let mut q = vec![0.0; dim];
                q[a] = 1.0;
                self.terminal_data(&q)
            })
            .collect();
        let k = DMatrix::from_fn(dim, dim, |a, c| {
            let (x, y) = (&terminals[a], &terminals[c]);
            let mut s = 0.0;
            for j in 0..d.n_modes() {
                let l = d.lambda(j);
                s += l.powf(-0.2) * x.u.coeffs[j] * y.u.coeffs[j] + l.powf(-1.2) * x.v.coeffs[j] * y.v.coeffs[j];
            }
            s
        });
        Ok(ObservationGramian { g, k, b, phi0, horizon: self.horizon, cut: self.cut })
    }

    /// `ℓ_a(v⁰) = (v₀, -∂_tφ_a(0)) + (v₁ + a v₀, φ_a(0))`.
    pub fn affine_term(&self, gram: &ObservationGramian, v0: &PhaseState) -> Vec<f64> {
        let mut w = self.mult_a(&v0.u);
        w.axpy(1.0, &v0.v);
        gram.phi0.iter().map(|phi| -v0.u.dot(&phi.v) + w.dot(&phi.u)).collect()
    }

    /// `c = W⁻¹ B q`.
    pub fn coeffs_from_q(&self, gram: &ObservationGramian, q: &[f64]) -> ControlCoeffs {
        let bq = &gram.b * DVector::from_column_slice(q);
        let w = self.weights_inv();
        ControlCoeffs { rows: self.rows(), cols: self.cut.n, c: bq.iter().zip(&w).map(|(x, wi)| x * wi).collect() }
    }

    fn solve_gramian(&self, gram: &ObservationGramian, rhs: &[f64]) -> Result<Vec<f64>> {
        let eig = SymmetricEigen::new(gram.g.clone());
        let (lo, hi) = (eig.eigenvalues.min(), eig.eigenvalues.max());
        let tol = 1e-13 * hi.max(1e-300);
        if !(lo > tol) {
            return Err(Error::NotObservable { min_eig: lo, tol });
        }
        if hi / lo > 1e13 {
            return Err(Error::IllConditioned { cond: hi / lo });
        }
        let chol = gram.g.clone().cholesky().ok_or(Error::IllConditioned { cond: hi / lo })?;
        Ok(chol.solve(&DVector::from_column_slice(rhs)).iter().copied().collect())
    }

    /// Least-norm control steering `P_m V_p(v⁰, χ𝒫ζ)[T]` to `target`
    /// (zero when `None`). `affine_data` seeds the first solve through the
    /// dual functional; refinement sweeps then use the forward map.
    fn steer(
        &self,
        gram: &ObservationGramian,
        p: Option<&PotentialPath>,
        v0: &PhaseState,
        affine_data: &PhaseState,
        target: Option<&[f64]>,
    ) -> Result<HumResult> {
        let d = self.domain();
        let scale = d.h_norm(v0);
        let dim = 2 * self.cut.m;
        if scale == 0.0 {
            return Ok(HumResult {
                coeffs: ControlCoeffs::zeros(self.rows(), self.cut.n),
                q: vec![0.0; dim],
                residual: 0.0,
                cost: 0.0,
                final_state: v0.clone(),
            });
        }
        let ell = self.affine_term(gram, affine_data);
        let mut q: Vec<f64> = self.solve_gramian(gram, &ell.iter().map(|x| -x).collect::<Vec<_>>())?;
        let zero = vec![0.0; dim];
        let target = target.unwrap_or(&zero);
        let mut coeffs = self.coeffs_from_q(gram, &q);
        let mut end = self.forward(v0, Some(&coeffs), p)?.last().clone();
        for _ in 0..self.refinements {
            let r: Vec<f64> = self.low_modes(&end).iter().zip(target).map(|(a, b)| a - b).collect();
            let dq = self.solve_gramian(gram, &r)?;
            q.iter_mut().zip(&dq).for_each(|(x, y)| *x -= y);
            coeffs = self.coeffs_from_q(gram, &q);
            end = self.forward(v0, Some(&coeffs), p)?.last().clone();
        }
        let r: Vec<f64> = self.low_modes(&end).iter().zip(target).map(|(a, b)| a - b).collect();
        Ok(HumResult {
            cost: self.cost(&coeffs),
            residual: self.low_mode_norm(&r) / scale,
            coeffs,
            q,
            final_state: end,
        })
    }

    /// Least-norm control with `P_m v[T] = 0`.
    pub fn hum_min_norm_control(
        &self,
        gram: &ObservationGramian,
        p: Option<&PotentialPath>,
        v0: &PhaseState,
    ) -> Result<HumResult> {
        self.steer(gram, p, v0, v0, None)
    }

    /// `ζ = Φ(û) v⁰`: keeps `P_m v[T] = P_m U(T)v⁰` so that the damped group
    /// contracts the whole state.
    pub fn contractibility_control(
        &self,
        gram: &ObservationGramian,
        p: Option<&PotentialPath>,
        v0: &PhaseState,
    ) -> Result<ContractionResult> {
        let d = self.domain();
        let scale = d.h_norm(v0);
        let z = self.model.linear_group_path(v0, self.horizon)?;
        let zt = z.last().clone();
        let free_ratio = if scale > 0.0 { d.h_norm(&zt) / scale } else { 0.0 };
        if scale == 0.0 {
            let hum = self.steer(gram, p, v0, v0, None)?;
            return Ok(ContractionResult { hum, ratio: 0.0, low_mode_error: 0.0, free_ratio });
        }
        // w̃ = V^T_p(0, -p z): carries the potential's effect on the free part.
        let seed = match p {
            Some(p) => {
                let dt = self.horizon / self.n_steps as f64;
                let g = ForceSignal {
                    dt,
                    samples: z
                        .states
                        .iter()
                        .zip(&p.samples)
                        .map(|(s, pg)| {
                            let prod = d.multiply_pointwise(&GridField { values: pg.clone() }, &s.u).expect("shape");
                            prod.scaled(-1.0)
                        })
                        .collect(),
                };
                let w = self.model.backward_solve(&d.zero_state(), Some(&g), Some(p), self.horizon)?;
                w.first().scaled(-1.0)
            }
            None => d.zero_state(),
        };
        let target = self.low_modes(&zt);
        let hum = self.steer(gram, p, v0, &seed, Some(&target))?;
        let ratio = d.h_norm(&hum.final_state) / scale;
        let low_mode_error = hum.residual;
        Ok(ContractionResult { hum, ratio, low_mode_error, free_ratio })
    }

    /// Matrix of `Φ(û)` on the `2M` state coordinates.
    pub fn control_operator(&self, gram: &ObservationGramian, p: Option<&PotentialPath>) -> Result<ControlOperator> {
        let n = self.model.n_modes();
        let cols: Vec<Result<Vec<f64>>> = crate::par_map(2 * n, |i| {
            let mut x = vec![0.0; 2 * n];
            x[i] = 1.0;
            Ok(self.contractibility_control(gram, p, &PhaseState::from_slice(&x))?.hum.coeffs.c)
        });
        let len = self.rows() * self.cut.n;
        let mut m = DMatrix::zeros(len, 2 * n);
        for (i, col) in cols.into_iter().enumerate() {
            for (r, v) in col?.into_iter().enumerate() {
                m[(r, i)] = v;
            }
        }
        Ok(ControlOperator { matrix: m, rows: self.rows(), cols: self.cut.n })
    }
}

/// `P_m` on both components.
pub fn project_modes(state: &PhaseState, m: usize) -> PhaseState {
    let mut s = state.clone();
    let m = m.min(s.n_modes());
    s.u.coeffs[m..].iter_mut().for_each(|x| *x = 0.0);
    s.v.coeffs[m..].iter_mut().for_each(|x| *x = 0.0);
    s
}

/// Linear map from state coordinates `[u..., v...]` to control coefficients.
#[derive(Debug, Clone)]
pub struct ControlOperator {
    pub matrix: DMatrix<f64>,
    pub rows: usize,
    pub cols: usize,
}

impl ControlOperator {
    pub fn apply(&self, v0: &PhaseState) -> ControlCoeffs {
        let c = &self.matrix * DVector::from_vec(v0.to_vec());
        ControlCoeffs { rows: self.rows, cols: self.cols, c: c.iter().copied().collect() }
    }

    /// Operator norm from `𝓗` to the unweighted coefficient norm.
    pub fn norm(&self, domain: &Domain) -> f64 {
        let n = domain.n_modes();
        let scale = DMatrix::from_fn(2 * n, 2 * n, |i, j| {
            if i != j {
                0.0
            } else if i < n {
                1.0 / domain.lambda(i).sqrt()
            } else {
                1.0
            }
        });
        (&self.matrix * scale).singular_values().max()
    }
}

/// Outcome of one nonlinear squeezing run.
#[derive(Debug, Clone, PartialEq)]
pub struct SqueezeReport {
    pub input_gap: f64,
    pub output_gap: f64,
    pub ratio: f64,
    pub cost: f64,
    pub d: f64,
    pub min_eig: f64,
    pub low_mode_error: f64,
    pub coeffs: ControlCoeffs,
}

/// Nonlinear squeezing: `u = S(u⁰, h + χ𝒫ζ)` with `ζ = Φ(û)(u⁰ - û⁰)`,
/// `û = S(û⁰, h)`. `nonlinear` must be a cubic model sharing the control
/// system's domain, damping and step.
pub fn squeeze(
    sys: &ControlSystem,
    nonlinear: &WaveModel,
    u0: &PhaseState,
    uhat0: &PhaseState,
    h: &ForceSignal,
    d: f64,
) -> Result<SqueezeReport> {
    let dom = sys.domain();
    let gap = dom.h_norm(&u0.sub(uhat0));
    if gap > d * (1.0 + 1e-12) {
        return Err(Error::GapTooLarge { gap, d });
    }
    squeeze_unchecked(sys, nonlinear, u0, uhat0, h, d)
}

/// As [`squeeze`] without the radius check (for scans beyond `d`).
pub fn squeeze_unchecked(
    sys: &ControlSystem,
    nonlinear: &WaveModel,
    u0: &PhaseState,
    uhat0: &PhaseState,
    h: &ForceSignal,
    d: f64,
) -> Result<SqueezeReport> {
    let dom = sys.domain();
    let gap0 = u0.sub(uhat0);
    let input_gap = dom.h_norm(&gap0);
    let uhat = nonlinear.evolve(uhat0, h)?;
    let p = PotentialPath::cubic_linearization(dom, &uhat);
    let gram = sys.assemble_gramian(Some(&p))?;
    let min_eig = gram.observability_min_eig();
    let ctrl = sys.contractibility_control(&gram, Some(&p), &gap0)?;
    let force = h.add(&sys.control_signal(&ctrl.hum.coeffs));
    let u = nonlinear.evolve_final(u0, &force)?;
    let output_gap = dom.h_norm(&u.sub(uhat.last()));
    Ok(SqueezeReport {
        input_gap,
        output_gap,
        ratio: if input_gap > 0.0 { output_gap / input_gap } else { 0.0 },
        cost: ctrl.hum.cost,
        d,
        min_eig,
        low_mode_error: ctrl.low_mode_error,
        coeffs: ctrl.hum.coeffs,
    })
}

/// Squeezing radius found by [`calibrate_squeeze_radius`].
#[derive(Debug, Clone, PartialEq)]
pub struct RadiusCalibration {
    /// Largest tested gap at which every case contracted below `eps`.
    pub edge: f64,
    /// `safety * edge`.
    pub d: f64,
    pub safety: f64,
    /// Worst ratio observed at `edge`.
    pub worst_ratio: f64,
}

/// Bisection (in `log d`) for the largest gap at which every reference
/// `(û⁰, h)` and every direction gives ratio `≤ eps`, capped at `d_max`.
#[allow(clippy::too_many_arguments)]
pub fn calibrate_squeeze_radius(
    sys: &ControlSystem,
    nonlinear: &WaveModel,
    cases: &[(PhaseState, ForceSignal)],
    dirs: &[PhaseState],
    eps: f64,
    d_max: f64,
    safety: f64,
    iters: usize,
) -> Result<RadiusCalibration> {
    let dom = sys.domain();
    let worst = |g: f64| -> Result<f64> {
        let jobs: Vec<(usize, usize)> = (0..cases.len()).flat_map(|c| (0..dirs.len()).map(move |k| (c, k))).collect();
        let ratios = crate::par_map(jobs.len(), |i| {
            let (c, k) = jobs[i];
            let (uhat0, h) = &cases[c];
            let dir = &dirs[k];
            let u0 = uhat0.add(&dir.scaled(g / dom.h_norm(dir)));
            match squeeze_unchecked(sys, nonlinear, &u0, uhat0, h, g) {
                Ok(r) => Ok(r.ratio),
                // blow-up counts as a failed contraction
                Err(Error::Unstable { .. }) => Ok(f64::INFINITY),
                Err(e) => Err(e),
            }
        });
        ratios.into_iter().try_fold(0.0f64, |m, r| Ok(m.max(r?)))
    };
    let top = worst(d_max)?;
    let (edge, worst_ratio) = if top <= eps {
        (d_max, top)
    } else {
        let mut lo = d_max * 1e-6;
        let mut lo_ratio = worst(lo)?;
        if lo_ratio > eps {
            return Err(Error::Constraint(format!("no squeezing radius: ratio {lo_ratio:.3} > {eps} at gap {lo:.1e}")));
        }
        let mut hi = d_max;
        for _ in 0..iters {
            let mid = (lo * hi).sqrt();
            let r = worst(mid)?;
            if r <= eps {
                lo = mid;
                lo_ratio = r;
            } else {
                hi = mid;
            }
        }
        (lo, lo_ratio)
    };
    Ok(RadiusCalibration { edge, d: safety * edge, safety, worst_ratio })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use crate::spectral::{Side, Strip};
    use crate::wave::SolverConfig;
    use rand::Rng;
    use std::f64::consts::PI;

    fn strip(a0: f64, w: f64) -> Profile {
        Profile::Strip(Strip { amplitude: a0, axis: 0, side: Side::High, width: w * PI, transition: 0.1 * PI })
    }

    fn system(m_modes: usize, dt: f64, t: f64, cut: FrequencyCut) -> ControlSystem {
        let d = Domain::interval(PI, m_modes, 4).unwrap();
        let model = WaveModel::new(d, strip(1.0, 0.4), SolverConfig::new(dt)).unwrap();
        ControlSystem::new(model, strip(1.0, 0.3), t, cut).unwrap()
    }

    fn random_state<R: Rng>(n: usize, rng: &mut R) -> PhaseState {
        let u = (1..=n).map(|j| rng.gen_range(-1.0..1.0) / (j * j) as f64).collect();
        let v = (1..=n).map(|j| rng.gen_range(-1.0..1.0) / j as f64).collect();
        PhaseState::new(SpectralField::from_vec(u), SpectralField::from_vec(v))
    }

    fn reference_path(sys: &ControlSystem, seed: u64) -> PotentialPath {
        let mut rng = stream(seed, 0);
        let u0 = random_state(sys.model.n_modes(), &mut rng).scaled(1.5);
        let tr = sys.model.evolve_free(&u0, sys.horizon).unwrap();
        PotentialPath::cubic_linearization(sys.domain(), &tr)
    }

    fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(a + i as f64 * h);
        }
        s * h / 3.0
    }

    #[test]
    fn time_space_projection_examples() {
        let sys = system(8, 1e-2, 4.0, FrequencyCut::new(2, 1));
        let n = sys.n_steps();
        let f = ForceSignal::from_fn(4.0 / n as f64, n, |t| {
            let mut c = SpectralField::zeros(8);
            c.coeffs[0] = 2.0 * alpha_t(1, t, 4.0);
            c.coeffs[1] = 5.0 * alpha_t(1, t, 4.0);
            c
        });
        let pf = sys.project_time_space(&f);
        for (k, s) in pf.samples.iter().enumerate() {
            let t = k as f64 * pf.dt;
            assert!((s.coeffs[0] - 2.0 * alpha_t(1, t, 4.0)).abs() < 1e-12);
            assert!(s.coeffs[1..].iter().all(|x| x.abs() < 1e-12));
        }

        let sys = system(8, 1e-2, 4.0, FrequencyCut::new(2, 5));
        let mut rng = stream(2, 0);
        let rand_signal = |rng: &mut crate::rng::StreamRng| {
            ForceSignal { dt: 4.0 / n as f64, samples: (0..=n).map(|_| SpectralField::from_vec((0..8).map(|_| rng.gen_range(-1.0..1.0)).collect())).collect() }
        };
        let f = rand_signal(&mut rng);
        let g = rand_signal(&mut rng);
        let p1 = sys.project_time_space(&f);
        let p2 = sys.project_time_space(&p1);
        for (a, b) in p1.samples.iter().zip(&p2.samples) {
            for (x, y) in a.coeffs.iter().zip(&b.coeffs) {
                assert!((x - y).abs() < 1e-12);
            }
        }
        let inner = |a: &ForceSignal, b: &ForceSignal| {
            let m = a.samples.len() - 1;
            (0..=m).map(|i| {
                let w = if i == 0 || i == m { 0.5 } else { 1.0 };
                w * a.samples[i].dot(&b.samples[i])
            }).sum::<f64>() * a.dt
        };
        let lhs = inner(&sys.project_time_space(&f), &g);
        let rhs = inner(&f, &sys.project_time_space(&g));
        assert!((lhs - rhs).abs() < 1e-10);
    }

    #[test]
    fn mode_projection() {
        let mut rng = stream(3, 0);
        let d = Domain::interval(PI, 8, 4).unwrap();
        for _ in 0..100 {
            let s = random_state(8, &mut rng);
            assert_eq!(project_modes(&s, 8), s);
            assert!(d.h_norm(&project_modes(&s, 3)) <= d.h_norm(&s));
        }
        assert_eq!(project_modes(&d.zero_state(), 3), d.zero_state());
    }

    #[test]
    fn zero_cutoff_gives_zero_gramian() {
        let d = Domain::interval(PI, 8, 4).unwrap();
        let model = WaveModel::new(d, strip(1.0, 0.4), SolverConfig::new(1e-2)).unwrap();
        let sys = ControlSystem::new(model, Profile::Zero, 7.0, FrequencyCut::new(2, 4)).unwrap();
        let g = sys.assemble_gramian(None).unwrap();
        assert_eq!(g.g.amax(), 0.0);
        assert_eq!(g.observability_min_eig(), 0.0);
        assert!(matches!(sys.hum_min_norm_control(&g, None, &sys.domain().zero_state().add(&PhaseState::from_slice(&[1.0; 16]))), Err(Error::NotObservable { .. })));
    }

    #[test]
    fn gramian_matches_dense_exponential_oracle() {
        let m_modes = 8;
        let t = 2.0 * PI;
        let n = 6;
        let d = Domain::interval(PI, m_modes, 4).unwrap();
        let model = WaveModel::new(d.clone(), Profile::Zero, SolverConfig::new(1e-3)).unwrap();
        let sys = ControlSystem::new(model, Profile::Constant(1.0), t, FrequencyCut::new(1, n)).unwrap();
        let g = sys.assemble_gramian(None).unwrap();
        // dense generator of the (undamped) adjoint system
        let mut a = DMatrix::zeros(2 * m_modes, 2 * m_modes);
        for i in 0..m_modes {
            a[(i, m_modes + i)] = 1.0;
            a[(m_modes + i, i)] = -d.lambda(i);
        }
        for col in 0..2 {
            let mut q = vec![0.0; 2];
            q[col] = 1.0;
            let term = sys.terminal_data(&q);
            let y_t = DVector::from_vec(term.to_vec());
            let mut entry = 0.0;
            for j in 0..n.min(m_modes) {
                for k in 1..=n {
                    let gjk = simpson(
                        |s| {
                            let y = (&a * (s - t)).exp() * &y_t;
                            y[j] * alpha_t(k, s, t)
                        },
                        0.0,
                        t,
                        4000,
                    );
                    entry += d.lambda(j).powf(-0.2) * gjk * gjk;
                }
            }
            let rel = (g.g[(col, col)] - entry).abs() / entry;
            assert!(rel <= 1e-6, "col {col}: {} vs {entry} ({rel:e})", g.g[(col, col)]);
        }
    }

    #[test]
    fn gramian_symmetric_psd_and_monotone_in_n() {
        let p_sys = system(10, 1e-2, 8.0, FrequencyCut::new(3, 3));
        let p = reference_path(&p_sys, 4);
        let mut last = f64::NEG_INFINITY;
        for n in 3..=7 {
            let sys = system(10, 1e-2, 8.0, FrequencyCut::new(3, n));
            let g = sys.assemble_gramian(Some(&p)).unwrap();
            assert!(g.is_symmetric(1e-10));
            assert!(g.min_eig_plain() >= -1e-12 * g.g.amax());
            let e = g.observability_min_eig();
            assert!(e > 0.0);
            assert!(e >= last - 1e-10, "N={n}: {e} < {last}");
            last = e;
        }
    }

    #[test]
    fn hum_zero_data_and_linearity() {
        let sys = system(10, 1e-2, 8.0, FrequencyCut::new(3, 8));
        let p = reference_path(&sys, 6);
        let g = sys.assemble_gramian(Some(&p)).unwrap();
        let z = sys.hum_min_norm_control(&g, Some(&p), &sys.domain().zero_state()).unwrap();
        assert!(z.coeffs.c.iter().all(|&x| x == 0.0));
        let mut rng = stream(8, 0);
        let (v, w) = (random_state(10, &mut rng), random_state(10, &mut rng));
        let (al, be) = (0.7, -1.3);
        let cv = sys.hum_min_norm_control(&g, Some(&p), &v).unwrap();
        let cw = sys.hum_min_norm_control(&g, Some(&p), &w).unwrap();
        let mut comb = v.scaled(al);
        comb.axpy(be, &w);
        let cc = sys.hum_min_norm_control(&g, Some(&p), &comb).unwrap();
        let scale = cc.coeffs.norm();
        for i in 0..cc.coeffs.c.len() {
            let want = al * cv.coeffs.c[i] + be * cw.coeffs.c[i];
            assert!((cc.coeffs.c[i] - want).abs() <= 1e-8 * scale);
        }
        assert!(cv.residual <= 1e-6 && cw.residual <= 1e-6 && cc.residual <= 1e-6);
    }

    #[test]
    fn hum_is_minimal_among_admissible_controls() {
        let sys = system(10, 1e-2, 8.0, FrequencyCut::new(3, 6));
        let g = sys.assemble_gramian(None).unwrap();
        let mut rng = stream(9, 0);
        let v = random_state(10, &mut rng);
        let hum = sys.hum_min_norm_control(&g, None, &v).unwrap();
        // ξ with B^T ξ = 0 leaves the low-mode endpoint unchanged
        let len = hum.coeffs.c.len();
        let w = sys.weights_inv();
        let chol = g.g.clone().cholesky().unwrap();
        for _ in 0..5 {
            let r = DVector::from_fn(len, |_, _| rng.gen_range(-1.0..1.0));
            let btr = g.b.transpose() * &r;
            let corr = chol.solve(&btr);
            let wbc = &g.b * corr;
            let xi: Vec<f64> = (0..len).map(|i| r[i] - w[i] * wbc[i]).collect();
            let other = ControlCoeffs { c: hum.coeffs.c.iter().zip(&xi).map(|(a, b)| a + 0.01 * b).collect(), ..hum.coeffs.clone() };
            assert!(hum.cost <= sys.cost(&other) + 1e-8);
        }
    }

    #[test]
    fn single_oscillator_matches_closed_form() {
        let t = 2.0 * PI;
        let n = 5;
        let d = Domain::interval(PI, 1, 4).unwrap();
        let model = WaveModel::new(d, Profile::Zero, SolverConfig::new(2e-4)).unwrap();
        let sys = ControlSystem::new(model, Profile::Constant(1.0), t, FrequencyCut::new(1, n)).unwrap();
        let g = sys.assemble_gramian(None).unwrap();
        let v0 = PhaseState::from_slice(&[0.8, -0.3]);
        let hum = sys.hum_min_norm_control(&g, None, &v0).unwrap();
        assert!(hum.residual <= 1e-8, "residual {}", hum.residual);

        // v'' + v = Σ c_k α_k^T(t), explicit Duhamel integrals
        let fsin = |beta: f64| if beta == 0.0 { t * t.sin() } else { (t.cos() - (t + beta * t).cos()) / beta };
        let fcos = |beta: f64| if beta == 0.0 { t * t.cos() } else { ((t + beta * t).sin() - t.sin()) / beta };
        let mut a = DMatrix::zeros(2, n);
        for k in 1..=n {
            let (w, norm) = if k == 1 { (0.0, 1.0 / t.sqrt()) } else { ((k - 1) as f64 * PI / t, (2.0 / t).sqrt()) };
            a[(0, k - 1)] = norm * 0.5 * (fsin(w - 1.0) + fsin(-(w + 1.0)));
            a[(1, k - 1)] = norm * 0.5 * (fcos(w - 1.0) + fcos(-(w + 1.0)));
        }
        let y = DVector::from_vec(vec![t.cos() * 0.8 + t.sin() * -0.3, -t.sin() * 0.8 + t.cos() * -0.3]);
        let gram = &a * a.transpose();
        let cost = y.dot(&gram.clone().cholesky().unwrap().solve(&y));
        assert!((hum.cost - cost).abs() <= 1e-6 * cost, "{} vs {cost}", hum.cost);
    }

    #[test]
    fn duality_pairing_agrees() {
        let sys = system(8, 2.5e-3, 6.0, FrequencyCut::new(3, 5));
        let p = reference_path(&sys, 12);
        let mut rng = stream(13, 0);
        for _ in 0..5 {
            let c = ControlCoeffs { rows: sys.rows(), cols: 5, c: (0..sys.rows() * 5).map(|_| rng.gen_range(-1.0..1.0)).collect() };
            let q: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let end = sys.forward(&sys.domain().zero_state(), Some(&c), Some(&p)).unwrap();
            let lhs: f64 = sys.low_modes(end.last()).iter().zip(&q).map(|(a, b)| a * b).sum();
            let obs = sys.observe(&sys.adjoint(&q, Some(&p)).unwrap());
            let rhs: f64 = obs.c.iter().zip(&c.c).map(|(a, b)| a * b).sum();
            assert!((lhs - rhs).abs() <= 1e-5 * lhs.abs().max(rhs.abs()), "{lhs} vs {rhs}");
        }
    }

    #[test]
    fn contraction_with_reference_path() {
        let sys = system(12, 1e-2, 15.0, FrequencyCut::new(4, 8));
        let p = reference_path(&sys, 21);
        let g = sys.assemble_gramian(Some(&p)).unwrap();
        let mut rng = stream(22, 0);
        let v = random_state(12, &mut rng);
        let r = sys.contractibility_control(&g, Some(&p), &v).unwrap();
        assert!(r.ratio <= 0.25, "ratio {}", r.ratio);
        assert!(r.low_mode_error <= 1e-6);
        let z = sys.contractibility_control(&g, Some(&p), &sys.domain().zero_state()).unwrap();
        assert_eq!(z.ratio, 0.0);
        assert!(z.hum.coeffs.c.iter().all(|&x| x == 0.0));
    }
    #[test]
    fn radius_calibration_brackets_the_edge() {
        let sys = system(8, 1e-2, 15.0, FrequencyCut::new(4, 8));
        let nl = sys.model.with_cubic(true);
        let mut rng = stream(31, 0);
        let uhat0 = random_state(8, &mut rng);
        let h = ForceSignal::zero(8, 1e-2, sys.n_steps());
        let dirs = [random_state(8, &mut rng), random_state(8, &mut rng)];
        let cases = [(uhat0.clone(), h.clone())];
        let cal = calibrate_squeeze_radius(&sys, &nl, &cases, &dirs, 0.25, 1e3, 0.5, 12).unwrap();
        assert!(cal.edge < 1e3 && cal.worst_ratio <= 0.25, "{cal:?}");
        assert_eq!(cal.d, 0.5 * cal.edge);
        let beyond = uhat0.add(&dirs[0].scaled(4.0 * cal.edge / sys.domain().h_norm(&dirs[0])));
        let r = squeeze_unchecked(&sys, &nl, &beyond, &uhat0, &h, cal.d).unwrap();
        assert!(r.ratio > 0.25 || r.input_gap > cal.edge, "{r:?}");
        assert!(calibrate_squeeze_radius(&sys, &nl, &cases, &dirs, 1e-9, 1.0, 0.5, 4).is_err());
    }
}
