//! Dirichlet sine basis on an interval or rectangle.
//!
//! Fields are stored as coefficients on the `M` lowest modes (per axis).
//! Products are formed on a collocation grid of `grid_factor * M` interior
//! points per axis, `x_i = i L / (n + 1)`, where the discrete sine transform is
//! exactly orthogonal and quadrature of quartic products of retained modes is
//! exact.

use crate::error::{Error, Result};
use std::f64::consts::PI;

/// One eigenmode of the Dirichlet Laplacian.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mode {
    /// Per-axis wave numbers; the second entry is 0 in 1D.
    pub index: [usize; 2],
    pub lambda: f64,
}

/// Coefficients on the retained modes, ordered as [`Domain::modes`].
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    pub coeffs: Vec<f64>,
}

/// Values on the collocation grid (row-major, x fastest-varying last).
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    pub values: Vec<f64>,
}

/// Displacement and velocity.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseState {
    pub u: SpectralField,
    pub v: SpectralField,
}

impl SpectralField {
    pub fn zeros(n: usize) -> Self {
        SpectralField { coeffs: vec![0.0; n] }
    }

    pub fn from_vec(coeffs: Vec<f64>) -> Self {
        SpectralField { coeffs }
    }

    /// Unit coefficient on linear mode index `k` (0-based).
    pub fn unit(n: usize, k: usize) -> Self {
        let mut f = Self::zeros(n);
        f.coeffs[k] = 1.0;
        f
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn scaled(&self, c: f64) -> Self {
        SpectralField { coeffs: self.coeffs.iter().map(|x| c * x).collect() }
    }

    pub fn axpy(&mut self, a: f64, x: &SpectralField) {
        for (y, xi) in self.coeffs.iter_mut().zip(&x.coeffs) {
            *y += a * xi;
        }
    }

    pub fn dot(&self, other: &SpectralField) -> f64 {
        self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a * b).sum()
    }

    pub fn l2_norm(&self) -> f64 {
        self.dot(self).sqrt()
    }
}

impl PhaseState {
    pub fn zeros(n: usize) -> Self {
        PhaseState { u: SpectralField::zeros(n), v: SpectralField::zeros(n) }
    }

    pub fn new(u: SpectralField, v: SpectralField) -> Self {
        PhaseState { u, v }
    }

    pub fn n_modes(&self) -> usize {
        self.u.len()
    }

    pub fn scaled(&self, c: f64) -> Self {
        PhaseState { u: self.u.scaled(c), v: self.v.scaled(c) }
    }

    pub fn axpy(&mut self, a: f64, x: &PhaseState) {
        self.u.axpy(a, &x.u);
        self.v.axpy(a, &x.v);
    }

    pub fn sub(&self, other: &PhaseState) -> PhaseState {
        let mut d = self.clone();
        d.axpy(-1.0, other);
        d
    }

    pub fn add(&self, other: &PhaseState) -> PhaseState {
        let mut d = self.clone();
        d.axpy(1.0, other);
        d
    }

    /// Flatten to `[u..., v...]`.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut out = self.u.coeffs.clone();
        out.extend_from_slice(&self.v.coeffs);
        out
    }

    pub fn from_slice(x: &[f64]) -> Self {
        let n = x.len() / 2;
        PhaseState {
            u: SpectralField::from_vec(x[..n].to_vec()),
            v: SpectralField::from_vec(x[n..].to_vec()),
        }
    }
}

/// Which end of an axis a strip is attached to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Low,
    High,
}

/// Boundary-adjacent strip with a quintic smoothstep transition.
#[derive(Debug, Clone, PartialEq)]
pub struct Strip {
    pub amplitude: f64,
    pub axis: usize,
    pub side: Side,
    /// Width of the plateau where the profile equals `amplitude`.
    pub width: f64,
    /// Width of the C² transition band from `amplitude` to 0.
    pub transition: f64,
}

/// Space-dependent coefficient such as a damping `a(x)` or cutoff `χ(x)`.
#[derive(Debug, Clone, PartialEq)]
pub enum Profile {
    Zero,
    Constant(f64),
    Strip(Strip),
}

fn smoothstep5(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    t * t * t * (10.0 - 15.0 * t + 6.0 * t * t)
}

impl Strip {
    fn value_at(&self, x: f64, len: f64) -> f64 {
        let d = match self.side {
            Side::Low => x,
            Side::High => len - x,
        };
        if d <= self.width {
            self.amplitude
        } else if self.transition > 0.0 && d < self.width + self.transition {
            self.amplitude * smoothstep5((self.width + self.transition - d) / self.transition)
        } else {
            0.0
        }
    }
}

impl Profile {
    /// Evaluate at a physical point.
    pub fn value_at(&self, domain: &Domain, point: &[f64]) -> f64 {
        match self {
            Profile::Zero => 0.0,
            Profile::Constant(c) => *c,
            Profile::Strip(s) => s.value_at(point[s.axis], domain.lengths[s.axis]),
        }
    }

    /// Sample on the collocation grid.
    pub fn sample(&self, domain: &Domain) -> GridField {
        let mut values = Vec::with_capacity(domain.grid_len());
        match domain.dim {
            1 => {
                for x in domain.axis_points(0) {
                    values.push(self.value_at(domain, &[x]));
                }
            }
            _ => {
                let ys = domain.axis_points(1);
                for x in domain.axis_points(0) {
                    for &y in &ys {
                        values.push(self.value_at(domain, &[x, y]));
                    }
                }
            }
        }
        GridField { values }
    }

    /// Lower bound guaranteed on the plateau.
    pub fn plateau(&self) -> f64 {
        match self {
            Profile::Zero => 0.0,
            Profile::Constant(c) => *c,
            Profile::Strip(s) => s.amplitude,
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Profile::Zero => true,
            Profile::Constant(c) => *c == 0.0,
            Profile::Strip(s) => s.amplitude == 0.0,
        }
    }
}

/// Interval or rectangle with its truncated eigenbasis and collocation grid.
#[derive(Debug, Clone)]
pub struct Domain {
    dim: usize,
    lengths: Vec<f64>,
    mode_cut: usize,
    grid_factor: usize,
    n_axis: usize,
    modes: Vec<Mode>,
    /// Per axis, `n_axis x M` row-major table of `e_j(x_i)`.
    tables: Vec<Vec<f64>>,
    /// Quadrature weight of one grid cell.
    cell: f64,
}

impl Domain {
    /// Interval `(0, length)`.
    pub fn interval(length: f64, mode_cut: usize, grid_factor: usize) -> Result<Self> {
        Self::new(vec![length], mode_cut, grid_factor)
    }

    /// Rectangle `(0, lx) x (0, ly)`.
    pub fn rectangle(lx: f64, ly: f64, mode_cut: usize, grid_factor: usize) -> Result<Self> {
        Self::new(vec![lx, ly], mode_cut, grid_factor)
    }

    pub fn new(lengths: Vec<f64>, mode_cut: usize, grid_factor: usize) -> Result<Self> {
        let dim = lengths.len();
        if !(1..=2).contains(&dim) {
            return Err(Error::Invalid(format!("dim must be 1 or 2, got {dim}")));
        }
        if lengths.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
            return Err(Error::Invalid("lengths must be positive".into()));
        }
        if mode_cut == 0 {
            return Err(Error::Invalid("mode cut must be >= 1".into()));
        }
        if grid_factor < 4 {
            return Err(Error::Invalid(format!("grid_factor must be >= 4, got {grid_factor}")));
        }
        let n_axis = grid_factor * mode_cut;
        let tables = lengths
            .iter()
            .map(|&l| {
                let amp = (2.0 / l).sqrt();
                let mut t = Vec::with_capacity(n_axis * mode_cut);
                for i in 1..=n_axis {
                    let x = i as f64 * l / (n_axis + 1) as f64;
                    for j in 1..=mode_cut {
                        t.push(amp * (j as f64 * PI * x / l).sin());
                    }
                }
                t
            })
            .collect();
        let axis_lambda = |a: usize, j: usize| (j as f64 * PI / lengths[a]).powi(2);
        let mut modes = Vec::new();
        if dim == 1 {
            for j in 1..=mode_cut {
                modes.push(Mode { index: [j, 0], lambda: axis_lambda(0, j) });
            }
        } else {
            for j1 in 1..=mode_cut {
                for j2 in 1..=mode_cut {
                    modes.push(Mode { index: [j1, j2], lambda: axis_lambda(0, j1) + axis_lambda(1, j2) });
                }
            }
            modes.sort_by(|a, b| a.lambda.total_cmp(&b.lambda).then(a.index.cmp(&b.index)));
        }
        let cell = lengths.iter().map(|&l| l / (n_axis + 1) as f64).product();
        Ok(Domain { dim, lengths, mode_cut, grid_factor, n_axis, modes, tables, cell })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths
    }

    pub fn mode_cut(&self) -> usize {
        self.mode_cut
    }

    pub fn grid_factor(&self) -> usize {
        self.grid_factor
    }

    /// Number of retained modes (`M` or `M²`).
    pub fn n_modes(&self) -> usize {
        self.modes.len()
    }

    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    pub fn lambda(&self, k: usize) -> f64 {
        self.modes[k].lambda
    }

    pub fn lambda_max(&self) -> f64 {
        self.modes.iter().map(|m| m.lambda).fold(0.0, f64::max)
    }

    /// Mode with per-axis index `j` (1-based).
    pub fn eigenpair(&self, j: &[usize]) -> Result<Mode> {
        let bad = j.len() != self.dim || j.iter().any(|&x| x == 0 || x > self.mode_cut);
        if bad {
            return Err(Error::ModeOutOfRange { index: j.to_vec(), cut: self.mode_cut });
        }
        let mut idx = [0usize; 2];
        idx[..self.dim].copy_from_slice(j);
        Ok(*self.modes.iter().find(|m| m.index == idx).expect("mode enumerated"))
    }

    /// Linear position of the mode with per-axis index `j`.
    pub fn mode_position(&self, j: &[usize]) -> Result<usize> {
        let m = self.eigenpair(j)?;
        Ok(self.modes.iter().position(|x| x.index == m.index).expect("mode enumerated"))
    }

    pub fn grid_len(&self) -> usize {
        self.n_axis.pow(self.dim as u32)
    }

    pub fn axis_len(&self) -> usize {
        self.n_axis
    }

    pub fn axis_points(&self, axis: usize) -> Vec<f64> {
        let l = self.lengths[axis];
        (1..=self.n_axis).map(|i| i as f64 * l / (self.n_axis + 1) as f64).collect()
    }

    /// Quadrature weight per grid point.
    pub fn cell(&self) -> f64 {
        self.cell
    }

    pub fn zeros(&self) -> SpectralField {
        SpectralField::zeros(self.n_modes())
    }

    pub fn zero_state(&self) -> PhaseState {
        PhaseState::zeros(self.n_modes())
    }

    pub fn to_grid(&self, field: &SpectralField) -> Result<GridField> {
        self.check(field.len())?;
        let mut values = vec![0.0; self.grid_len()];
        self.to_grid_into(&field.coeffs, &mut values);
        Ok(GridField { values })
    }

    pub fn to_spectral(&self, grid: &GridField) -> Result<SpectralField> {
        if grid.values.len() != self.grid_len() {
            return Err(Error::Shape { expected: self.grid_len(), got: grid.values.len() });
        }
        let mut coeffs = vec![0.0; self.n_modes()];
        self.to_spectral_into(&grid.values, &mut coeffs);
        Ok(SpectralField { coeffs })
    }

    fn check(&self, n: usize) -> Result<()> {
        if n != self.n_modes() {
            return Err(Error::Shape { expected: self.n_modes(), got: n });
        }
        Ok(())
    }

    /// Unchecked synthesis used by the solvers.
    pub(crate) fn to_grid_into(&self, coeffs: &[f64], out: &mut [f64]) {
        let m = self.mode_cut;
        let n = self.n_axis;
        if self.dim == 1 {
            let t = &self.tables[0];
            for i in 0..n {
                let row = &t[i * m..(i + 1) * m];
                out[i] = row.iter().zip(coeffs).map(|(a, b)| a * b).sum();
            }
            return;
        }
        // C (M x M) -> G = Sx C Sy^T
        let mut c = vec![0.0; m * m];
        for (k, mode) in self.modes.iter().enumerate() {
            c[(mode.index[0] - 1) * m + (mode.index[1] - 1)] = coeffs[k];
        }
        let (sx, sy) = (&self.tables[0], &self.tables[1]);
        // tmp = C Sy^T : M x n
        let mut tmp = vec![0.0; m * n];
        for j1 in 0..m {
            let crow = &c[j1 * m..(j1 + 1) * m];
            for iy in 0..n {
                let srow = &sy[iy * m..(iy + 1) * m];
                tmp[j1 * n + iy] = crow.iter().zip(srow).map(|(a, b)| a * b).sum();
            }
        }
        for ix in 0..n {
            let srow = &sx[ix * m..(ix + 1) * m];
            let orow = &mut out[ix * n..(ix + 1) * n];
            orow.iter_mut().for_each(|v| *v = 0.0);
            for j1 in 0..m {
                let w = srow[j1];
                let trow = &tmp[j1 * n..(j1 + 1) * n];
                for (o, t) in orow.iter_mut().zip(trow) {
                    *o += w * t;
                }
            }
        }
    }

    /// Unchecked analysis (quadrature projection) used by the solvers.
    pub(crate) fn to_spectral_into(&self, values: &[f64], out: &mut [f64]) {
        let m = self.mode_cut;
        let n = self.n_axis;
        if self.dim == 1 {
            let t = &self.tables[0];
            out.iter_mut().for_each(|c| *c = 0.0);
            for i in 0..n {
                let g = values[i] * self.cell;
                let row = &t[i * m..(i + 1) * m];
                for (o, s) in out.iter_mut().zip(row) {
                    *o += g * s;
                }
            }
            return;
        }
        let (sx, sy) = (&self.tables[0], &self.tables[1]);
        // tmp = Sx^T G : M x n
        let mut tmp = vec![0.0; m * n];
        for ix in 0..n {
            let srow = &sx[ix * m..(ix + 1) * m];
            let grow = &values[ix * n..(ix + 1) * n];
            for j1 in 0..m {
                let w = srow[j1];
                let trow = &mut tmp[j1 * n..(j1 + 1) * n];
                for (t, g) in trow.iter_mut().zip(grow) {
                    *t += w * g;
                }
            }
        }
        for (k, mode) in self.modes.iter().enumerate() {
            let j1 = mode.index[0] - 1;
            let j2 = mode.index[1] - 1;
            let trow = &tmp[j1 * n..(j1 + 1) * n];
            let mut acc = 0.0;
            for iy in 0..n {
                acc += trow[iy] * sy[iy * m + j2];
            }
            out[k] = acc * self.cell;
        }
    }

    /// `(Σ λ_j^s c_j²)^{1/2}`.
    pub fn sobolev_norm(&self, field: &SpectralField, s: f64) -> f64 {
        self.sobolev_norm_sq(field, s).sqrt()
    }

    pub fn sobolev_norm_sq(&self, field: &SpectralField, s: f64) -> f64 {
        field.coeffs.iter().zip(&self.modes).map(|(c, m)| m.lambda.powf(s) * c * c).sum()
    }

    /// `H^{1+s} x H^s` norm of a phase state.
    pub fn phase_norm(&self, state: &PhaseState, s: f64) -> f64 {
        (self.sobolev_norm_sq(&state.u, 1.0 + s) + self.sobolev_norm_sq(&state.v, s)).sqrt()
    }

    /// Energy-space norm (`s = 0`).
    pub fn h_norm(&self, state: &PhaseState) -> f64 {
        self.phase_norm(state, 0.0)
    }

    /// Spectral coefficients of `a(x) b(x)`, truncated to the retained modes.
    pub fn multiply_pointwise(&self, a: &GridField, b: &SpectralField) -> Result<SpectralField> {
        self.check(b.len())?;
        if a.values.len() != self.grid_len() {
            return Err(Error::Shape { expected: self.grid_len(), got: a.values.len() });
        }
        let mut g = vec![0.0; self.grid_len()];
        self.to_grid_into(&b.coeffs, &mut g);
        for (x, w) in g.iter_mut().zip(&a.values) {
            *x *= w;
        }
        let mut out = vec![0.0; self.n_modes()];
        self.to_spectral_into(&g, &mut out);
        Ok(SpectralField { coeffs: out })
    }

    /// Product of two spectral fields.
    pub fn multiply_fields(&self, a: &SpectralField, b: &SpectralField) -> Result<SpectralField> {
        let ga = self.to_grid(a)?;
        self.multiply_pointwise(&ga, b)
    }

    /// Grid quadrature of a sampled function.
    pub fn integrate(&self, grid: &GridField) -> f64 {
        grid.values.iter().sum::<f64>() * self.cell
    }

    /// `L^r` norm of a spectral field by grid quadrature (`r = ∞` allowed).
    pub fn lr_norm(&self, field: &SpectralField, r: f64) -> f64 {
        let mut g = vec![0.0; self.grid_len()];
        self.to_grid_into(&field.coeffs, &mut g);
        lr_of_values(&g, r, self.cell)
    }

    /// `∫ u⁴ dx`.
    pub fn quartic(&self, u: &SpectralField) -> f64 {
        let mut g = vec![0.0; self.grid_len()];
        self.to_grid_into(&u.coeffs, &mut g);
        g.iter().map(|x| x * x * x * x).sum::<f64>() * self.cell
    }

    /// `E = ½∫(|∇u|² + v² + ½u⁴)`.
    pub fn energy(&self, state: &PhaseState) -> f64 {
        0.5 * (self.sobolev_norm_sq(&state.u, 1.0) + state.v.dot(&state.v) + 0.5 * self.quartic(&state.u))
    }

    /// Quadratic part of the energy, `½‖(u,v)‖²_𝓗`.
    pub fn quadratic_energy(&self, state: &PhaseState) -> f64 {
        0.5 * (self.sobolev_norm_sq(&state.u, 1.0) + state.v.dot(&state.v))
    }
}

pub(crate) fn lr_of_values(g: &[f64], r: f64, cell: f64) -> f64 {
    if r.is_infinite() {
        g.iter().fold(0.0, |m, x| f64::max(m, x.abs()))
    } else {
        (g.iter().map(|x| x.abs().powf(r)).sum::<f64>() * cell).powf(1.0 / r)
    }
}
