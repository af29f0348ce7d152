//! Acceptance checks. Runs without the default harness and prints one
//! PASS/FAIL line per criterion; exits nonzero if any fails.

use mixlab::config::ExperimentConfig;
use mixlab::control::{calibrate_squeeze_radius, squeeze, squeeze_unchecked, ControlCoeffs, ControlSystem, FrequencyCut};
use mixlab::coupling::{calibrate_delta, coupling_failure_scan, maximal_coupling, tv_coordinate, NoiseShift};
use mixlab::mixing::{fit_exponential_decay, random_state, random_state_above, semigroup_norms, splitting_bound};
use mixlab::noise::DensityKind;
use mixlab::rds::{ensemble_paths, ToyAffineRds};
use mixlab::rng::stream;
use mixlab::runner::{run_subcommand, Status, SUBCOMMANDS};
use mixlab::spectral::{Domain, PhaseState, Profile};
use mixlab::stats::ks_normal;
use mixlab::wave::{ForceSignal, PotentialPath, SolverConfig, WaveModel};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use std::f64::consts::{LN_2, PI};
use std::path::{Path, PathBuf};
use std::time::Instant;

type Check = mixlab::Result<(bool, String)>;
type Criterion = (&'static str, fn() -> Check);

fn cfg(text: &str) -> ExperimentConfig {
    ExperimentConfig::parse(text, &[]).expect("valid test config")
}

fn m16() -> ExperimentConfig {
    cfg("[domain]\nmodes = 16\n")
}

/// Ordinary least squares `y = a + b x`: `(a, b, se_a, se_b)`.
fn ols(x: &[f64], y: &[f64]) -> (f64, f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let b = sxy / sxx;
    let a = my - b * mx;
    let s2 = x.iter().zip(y).map(|(u, v)| (v - a - b * u).powi(2)).sum::<f64>() / (n - 2.0);
    (a, b, (s2 * (1.0 / n + mx * mx / sxx)).sqrt(), (s2 / sxx).sqrt())
}

fn decay_rate(t: &[f64], v: &[f64]) -> f64 {
    let logs: Vec<f64> = v.iter().map(|x| x.ln()).collect();
    -ols(t, &logs).1
}

fn flux_identity() -> Check {
    let c = m16();
    let d = c.domain()?;
    let a = c.damping.profile(&d)?;
    let mut orders = Vec::new();
    for run in 0..10u64 {
        let mut rng = stream(101, run);
        let u0 = random_state(&d, 1.0, 1.0, &mut rng);
        let terms: Vec<(usize, f64, f64, f64)> = (0..4).map(|j| (j, rng.gen_range(-1.0..1.0), rng.gen_range(0.5..3.0), rng.gen_range(0.0..PI))).collect();
        let mut res = Vec::new();
        for dt in [0.01, 0.005] {
            let model = WaveModel::new(d.clone(), a.clone(), SolverConfig::new(dt))?;
            let f = ForceSignal::from_fn(dt, model.steps_for(2.0), |t| {
                let mut g = d.zeros();
                for &(j, amp, w, ph) in &terms {
                    g.coeffs[j] = amp * (w * t + ph).sin();
                }
                g
            });
            res.push(model.flux_residual(&model.evolve(&u0, &f)?, Some(&f)));
        }
        orders.push((res[0] / res[1]).log2());
    }
    let lo = orders.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = orders.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok((lo >= 1.8 && hi <= 2.2, format!("observed orders in [{lo:.3}, {hi:.3}], want [1.8, 2.2]")))
}

fn global_stability() -> Check {
    let c = ExperimentConfig::default();
    let model = c.wave_model()?;
    let dir = random_state(&model.domain, 1.0, 1.0, &mut stream(201, 0));
    let mut rates = Vec::new();
    for amp in [0.1, 1.0, 10.0] {
        let traj = model.evolve_free(&dir.scaled(amp), 30.0)?;
        let stride = model.steps_for(0.5);
        let (t, e): (Vec<f64>, Vec<f64>) = (0..traj.len()).step_by(stride).map(|i| (traj.times[i], model.energy(&traj.states[i]))).unzip();
        rates.push(fit_exponential_decay(&t, &e)?.rate);
    }
    let lo = rates.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = rates.iter().cloned().fold(0.0, f64::max);
    Ok((lo > 0.0 && hi <= 2.0 * lo, format!("energy rates {:.4?} for amplitudes 0.1, 1, 10; max/min {:.3}", rates, hi / lo)))
}

/// `A` in `𝓗`-normalized coordinates `(√λ u, v)`, damping entries by
/// Simpson quadrature of `a e_i e_j`.
fn dense_generator(d: &Domain, a: &Profile) -> DMatrix<f64> {
    let n = d.n_modes();
    let l = d.lengths()[0];
    let cells = 4000;
    let h = l / cells as f64;
    let e = |j: usize, x: f64| (2.0 / l).sqrt() * ((j + 1) as f64 * PI * x / l).sin();
    let mut g = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        let w = ((i + 1) as f64 * PI / l).powi(2).sqrt();
        g[(i, n + i)] = w;
        g[(n + i, i)] = -w;
        for j in 0..n {
            let mut s = 0.0;
            for k in 0..=cells {
                let x = k as f64 * h;
                let wt = if k == 0 || k == cells { 1.0 } else if k % 2 == 1 { 4.0 } else { 2.0 };
                s += wt * a.value_at(d, &[x]) * e(i, x) * e(j, x);
            }
            g[(n + i, n + j)] = -s * h / 3.0;
        }
    }
    g
}

fn semigroup_decay() -> Check {
    let c = cfg("[domain]\nmodes = 8\n[noise]\nn = 8\n");
    let model = c.wave_model()?;
    let times: Vec<f64> = (0..=15).map(|k| k as f64).collect();
    let got = semigroup_norms(&model, &times)?;
    let rate = fit_exponential_decay(&times, &got)?.rate;
    let g = dense_generator(&model.domain, &c.damping.profile(&model.domain)?);
    let want: Vec<f64> = times.iter().map(|t| (&g * *t).exp().singular_values().max()).collect();
    let oracle = decay_rate(&times, &want);
    let abscissa = -g.complex_eigenvalues().iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
    let ok = rate > 0.0 && (rate - oracle).abs() <= 0.25 * oracle;
    Ok((ok, format!("fitted rate {rate:.5}, dense-exponential oracle {oracle:.5} (spectral abscissa {abscissa:.5}), M = 8")))
}

fn hum_exactness() -> Check {
    let c = ExperimentConfig::default();
    let sys = c.control_system()?;
    let gram = sys.assemble_gramian(None)?;
    let d = sys.domain().clone();
    let m = sys.cut.m;
    let mut worst: f64 = 0.0;
    for i in 0..20 {
        let v0 = random_state(&d, 1.0, 1.0, &mut stream(401, i));
        let hum = sys.hum_min_norm_control(&gram, None, &v0)?;
        let end = sys.forward(&v0, Some(&hum.coeffs), None)?;
        let s = end.last();
        let low: f64 = (0..m).map(|j| d.lambda(j) * s.u.coeffs[j].powi(2) + s.v.coeffs[j].powi(2)).sum::<f64>().sqrt();
        worst = worst.max(low / d.h_norm(&v0));
    }

    // v'' + v = Σ c_k α_k^T on (0, π) with one mode, χ ≡ 1, a ≡ 0
    let t = 2.0 * PI;
    let n = 5;
    let d1 = Domain::interval(PI, 1, 4)?;
    let model = WaveModel::new(d1, Profile::Zero, SolverConfig::new(2e-4))?;
    let osc = ControlSystem::new(model, Profile::Constant(1.0), t, FrequencyCut::new(1, n))?;
    let g1 = osc.assemble_gramian(None)?;
    let v0 = PhaseState::from_slice(&[0.8, -0.3]);
    let cost = osc.hum_min_norm_control(&g1, None, &v0)?.cost;
    // e^{-tA} maps the forcing to the end state; minimal cost is y^T (M M^T)^{-1} y
    let fsin = |b: f64| if b == 0.0 { t * t.sin() } else { (t.cos() - (t + b * t).cos()) / b };
    let fcos = |b: f64| if b == 0.0 { t * t.cos() } else { ((t + b * t).sin() - t.sin()) / b };
    let mut mm = DMatrix::zeros(2, n);
    for k in 1..=n {
        let (w, norm) = if k == 1 { (0.0, 1.0 / t.sqrt()) } else { ((k - 1) as f64 * PI / t, (2.0 / t).sqrt()) };
        mm[(0, k - 1)] = norm * 0.5 * (fsin(w - 1.0) + fsin(-(w + 1.0)));
        mm[(1, k - 1)] = norm * 0.5 * (fcos(w - 1.0) + fcos(-(w + 1.0)));
    }
    let y = DVector::from_vec(vec![t.cos() * 0.8 - t.sin() * 0.3, -t.sin() * 0.8 - t.cos() * 0.3]);
    let oracle = y.dot(&(&mm * mm.transpose()).cholesky().expect("positive definite").solve(&y));
    let rel = (cost - oracle).abs() / oracle;
    let ok = worst <= 1e-6 && rel <= 1e-6;
    Ok((ok, format!("worst endpoint residual {worst:.2e} over 20 v0 (M = 32); oscillator cost rel. error {rel:.2e}")))
}

fn duality_identity() -> Check {
    let c = cfg("[domain]\nmodes = 16\n[solver]\ndt = 0.001\n");
    let sys = c.control_system()?;
    let nl = sys.model.with_cubic(true);
    let d = sys.domain().clone();
    let mut rng = stream(501, 0);
    let uhat0 = random_state(&d, 1.0, 1.0, &mut rng);
    let (_, h) = c.noise_spec()?.sample_noise(&d, sys.n_steps(), &mut rng);
    let p = PotentialPath::cubic_linearization(&d, &nl.evolve(&uhat0, &h)?);
    let (rows, cols, m) = (sys.rows(), sys.cut.n, sys.cut.m);
    let mut worst: f64 = 0.0;
    let mut worst_pointwise: f64 = 0.0;
    for i in 0..50 {
        let pot = if i % 2 == 0 { None } else { Some(&p) };
        let zeta = ControlCoeffs { rows, cols, c: (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect() };
        let q: Vec<f64> = (0..2 * m).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let y = sys.low_modes(sys.forward(&d.zero_state(), Some(&zeta), pot)?.last());
        let obs = sys.observe(&sys.adjoint(&q, pot)?);
        let lhs: f64 = y.iter().zip(&q).map(|(a, b)| a * b).sum();
        let rhs: f64 = obs.c.iter().zip(&zeta.c).map(|(a, b)| a * b).sum();
        let l2 = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        // Cauchy-Schwarz scale of either side
        let scale = (l2(&y) * l2(&q)).max(l2(&obs.c) * l2(&zeta.c));
        worst = worst.max((lhs - rhs).abs() / scale);
        worst_pointwise = worst_pointwise.max((lhs - rhs).abs() / lhs.abs().max(rhs.abs()));
    }
    Ok((
        worst <= 1e-6,
        format!("worst |<P_m V(zeta), q> - <zeta, P(chi phi)>| / scale = {worst:.2e} over 50 pairs (pointwise relative {worst_pointwise:.2e})"),
    ))
}

fn scratch_dir(name: &str) -> PathBuf {
    let p = std::env::temp_dir().join(format!("mixlab-acceptance-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&p);
    p
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    let text = std::fs::read_to_string(path).expect("csv");
    text.lines().skip(2).map(|l| l.split(',').map(str::to_string).collect()).collect()
}

fn linear_contractibility() -> Check {
    let c = ExperimentConfig::parse("", &["run.ensemble=20".into()])?;
    let out = scratch_dir("control");
    let obs = run_subcommand("observe", &c, &out)?;
    let ctl = run_subcommand("control", &c, &out)?;
    let rows = csv_rows(&out.join("control.csv"));
    let ratios: Vec<f64> = rows.iter().map(|r| r[7].parse().expect("ratio")).collect();
    let min_eig: f64 = rows[0][4].parse().expect("min_eig");
    let worst = ratios.iter().cloned().fold(0.0, f64::max);
    let ok = obs.status == Status::Pass && ctl.status == Status::Pass && rows.len() == 20 && min_eig > c.control.min_eig_tol && worst <= 0.25;
    Ok((ok, format!("(T, m, N) = ({}, {}, {}), min_eig {min_eig:.3e}, worst ratio {worst:.4} over {} v0 (M = 32)", rows[0][1], rows[0][2], rows[0][3], rows.len())))
}

fn nonlinear_squeezing() -> Check {
    let c = ExperimentConfig::default();
    let sys = c.control_system()?;
    let nl = sys.model.with_cubic(true);
    let noise = c.noise_spec()?;
    let d = sys.domain().clone();
    let reference = |seed: u64| {
        let mut rng = stream(seed, 0);
        let uhat0 = random_state(&d, 1.0, 1.0, &mut rng);
        let (_, h) = noise.sample_noise(&d, sys.n_steps(), &mut rng);
        (uhat0, h)
    };
    let direction = |seed: u64| random_state(&d, 1.0, 1.0, &mut stream(seed, 1));
    let cases = [reference(701), reference(702)];
    let dirs = [direction(703), direction(704)];
    let cal = calibrate_squeeze_radius(&sys, &nl, &cases, &dirs, 0.25, 10.0, 0.5, 12)?;
    let mut worst: f64 = 0.0;
    for i in 0..20u64 {
        let (uhat0, h) = reference(710 + i);
        let dir = direction(730 + i);
        let gap = cal.d * stream(750, i).gen_range(0.05..=1.0);
        let u0 = uhat0.add(&dir.scaled(gap / d.h_norm(&dir)));
        worst = worst.max(squeeze(&sys, &nl, &u0, &uhat0, &h, cal.d)?.ratio);
    }
    // ζ = Φ(û)(u⁰ - û⁰): additive and homogeneous in the gap
    let (uhat0, h) = reference(790);
    let g1 = direction(791).scaled(0.1);
    let g2 = direction(792).scaled(0.05);
    let coeffs = |g: &PhaseState| squeeze_unchecked(&sys, &nl, &uhat0.add(g), &uhat0, &h, cal.d).map(|r| r.coeffs);
    let (c1, c2, c12, c1x2) = (coeffs(&g1)?, coeffs(&g2)?, coeffs(&g1.add(&g2))?, coeffs(&g1.scaled(2.0))?);
    let diff = |a: &ControlCoeffs, b: &[f64]| a.c.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt() / a.norm();
    let sum: Vec<f64> = c1.c.iter().zip(&c2.c).map(|(a, b)| a + b).collect();
    let dbl: Vec<f64> = c1.c.iter().map(|a| 2.0 * a).collect();
    let lin = diff(&c12, &sum).max(diff(&c1x2, &dbl));
    let ok = worst <= 0.25 && lin <= 1e-6;
    Ok((ok, format!("d = {:.3} (edge {:.3}, safety 0.5), worst ratio {worst:.4} over 20 pairs, linearity error {lin:.2e}", cal.d, cal.edge)))
}

fn coupling_contraction() -> Check {
    let c = m16();
    let setup = c.coupling_setup()?;
    let d = setup.domain().clone();
    let x = random_state(&d, 1.0, 1.0, &mut stream(801, 0));
    let dir = random_state(&d, 1.0, 1.0, &mut stream(802, 0));
    let delta = calibrate_delta(&setup, &x, &dir, 0.25)?;
    let gaps: Vec<f64> = (1..=8).map(|k| delta * k as f64 / 8.0).collect();
    let scan = coupling_failure_scan(&setup, &x, &dir, &gaps, 400, 803)?;
    let p: Vec<f64> = scan.iter().map(|s| s.p_fail).collect();
    let (a, b, se_a, se_b) = ols(&gaps, &p);
    let ok = b > 0.0 && a.abs() <= 2.0 * se_a;
    let ps: Vec<String> = p.iter().map(|x| format!("{x:.3}")).collect();
    Ok((ok, format!("delta {delta:.3e}; P(fail) [{}]; slope {b:.3e} +- {se_b:.1e}, intercept {a:.4} +- {se_a:.4}", ps.join(" "))))
}

fn tv_bound() -> Check {
    // ½∫|ρ(w) - ρ(w - h)| dw by the midpoint rule
    let oracle = |dens: DensityKind, h: f64| {
        let cells = 200_000;
        let (lo, hi) = (-1.0, 1.0 + h);
        let dw = (hi - lo) / cells as f64;
        0.5 * (0..cells).map(|i| lo + (i as f64 + 0.5) * dw).map(|w| (dens.pdf(w) - dens.pdf(w - h)).abs()).sum::<f64>() * dw
    };
    let mut worst_q: f64 = 0.0;
    for dens in [DensityKind::Epanechnikov, DensityKind::RaisedCosine] {
        for h in [0.01, 0.1, 0.5, 1.0, 1.5] {
            let o = oracle(dens, h);
            worst_q = worst_q.max((tv_coordinate(dens, h) - o).abs() / o);
        }
    }
    let n = 10_000;
    let mut worst_z: f64 = 0.0;
    for (i, h) in [0.05, 0.3, 0.8].into_iter().enumerate() {
        let mut rng = stream(901, i as u64);
        let miss = (0..n).filter(|_| !maximal_coupling(DensityKind::Epanechnikov, h, &mut rng).2).count() as f64 / n as f64;
        let tv = tv_coordinate(DensityKind::Epanechnikov, h);
        worst_z = worst_z.max((miss - tv).abs() / (tv * (1.0 - tv) / n as f64).sqrt());
    }
    // product coupling over a block
    let setup = cfg("[domain]\nmodes = 8\n[noise]\nn = 4\n[control]\nn = 4\n").coupling_setup()?;
    let shift = NoiseShift { h: vec![vec![0.05, 0.02, 0.1], vec![0.03, 0.0, 0.08]], coeffs: ControlCoeffs::zeros(2, 3) };
    let bound = 1.0 - shift.h.iter().flatten().map(|&h| 1.0 - tv_coordinate(DensityKind::Epanechnikov, h)).product::<f64>();
    let mut rng = stream(902, 0);
    let miss = (0..n).filter(|_| !setup.sample_with_shift(&shift, &mut rng).identical_shift).count() as f64 / n as f64;
    let z_prod = (miss - bound).abs() / (bound * (1.0 - bound) / n as f64).sqrt();
    let ok = worst_q <= 0.01 && worst_z <= 3.0 && z_prod <= 3.0;
    Ok((ok, format!("quadrature rel. error {worst_q:.1e}; mismatch z-scores {worst_z:.2} (single), {z_prod:.2} (block, bound {bound:.4}) at 1e4 draws")))
}

/// `∫₀² |F_n(x) - x/2| dx` by the midpoint rule on a sorted sample.
fn w1_uniform_oracle(sorted: &[f64]) -> f64 {
    let cells = 100_000;
    let dx = 2.0 / cells as f64;
    let n = sorted.len() as f64;
    (0..cells)
        .map(|i| {
            let x = (i as f64 + 0.5) * dx;
            let fx = sorted.partition_point(|&s| s <= x) as f64 / n;
            (fx - x / 2.0).abs()
        })
        .sum::<f64>()
        * dx
}

fn toy_oracle() -> Check {
    let toy = ToyAffineRds::default();
    let size = 10_000;
    let ens = ensemble_paths(&toy, &0.0, 15, size, 1001);
    let w1: Vec<f64> = ens
        .iter()
        .map(|lvl| {
            let mut s = lvl.clone();
            s.sort_by(f64::total_cmp);
            w1_uniform_oracle(&s)
        })
        .collect();
    let nulls: Vec<f64> = (0..50u64)
        .map(|r| {
            let mut rng = stream(1002, r);
            let mut s: Vec<f64> = (0..size).map(|_| rng.gen_range(0.0..2.0)).collect();
            s.sort_by(f64::total_cmp);
            w1_uniform_oracle(&s)
        })
        .collect();
    let floor = nulls.iter().cloned().fold(0.0, f64::max);
    let floor_mean = nulls.iter().sum::<f64>() / nulls.len() as f64;
    let bound_ok = [5usize, 10, 15].iter().all(|&n| w1[n] <= 0.5f64.powi(n as i32) + floor);
    let (t, v): (Vec<f64>, Vec<f64>) = w1.iter().enumerate().filter(|(_, w)| **w > 2.0 * floor_mean).map(|(n, w)| (n as f64, *w)).unzip();
    let beta = decay_rate(&t, &v);
    let beta_ok = (beta - LN_2).abs() <= 0.25 * LN_2;

    let (chains, steps) = (500, 200);
    let paths = ensemble_paths(&toy, &0.0, steps, chains, 1003);
    let avgs: Vec<f64> = (0..chains).map(|i| paths[steps / 2 + 1..].iter().map(|l| l[i]).sum::<f64>() / (steps / 2) as f64).collect();
    let mean = avgs.iter().sum::<f64>() / chains as f64;
    let se = (avgs.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (chains - 1) as f64 / chains as f64).sqrt();
    let sums: Vec<f64> = (0..chains).map(|i| paths[1..].iter().map(|l| l[i] - 1.0).sum::<f64>() / (steps as f64).sqrt()).collect();
    let sigma2 = sums.iter().map(|s| s * s).sum::<f64>() / chains as f64;
    let (_, ks_p) = ks_normal(&sums);
    let ok = bound_ok && beta_ok && (mean - 1.0).abs() <= 3.0 * se && ks_p > 0.01;
    Ok((
        ok,
        format!(
            "W1 at n=5,10,15: {:.4} {:.4} {:.4} (floor {floor:.4}); beta {beta:.4} vs ln 2; LLN {mean:.4} +- {se:.4}; CLT var {sigma2:.3}, KS p {ks_p:.3}",
            w1[5], w1[10], w1[15]
        ),
    ))
}

fn asymptotic_compactness() -> Check {
    let c = ExperimentConfig::default();
    let chain = c.chain()?;
    let d = chain.domain().clone();
    // large data on the upper half of the spectrum
    let u0 = random_state_above(&d, 30.0, d.n_modes() / 2, &mut stream(1101, 0));
    let run = chain.run(&u0, 200, 1102, 0)?;
    let rep = splitting_bound(&chain, &run, chain.n_steps() / 50)?;
    let growth = rep.final_quarter_growth();
    let (dist_fit, _) = rep.decay_rates(rep.radius())?;
    let times: Vec<f64> = (0..=15).map(|k| k as f64).collect();
    let gamma = fit_exponential_decay(&times, &semigroup_norms(&chain.model, &times)?)?.rate;
    let ok = growth < 0.05 && (dist_fit.rate - gamma).abs() <= 0.25 * gamma;
    Ok((
        ok,
        format!(
            "radius {:.4}, final-quarter growth {:.2}%, dist rate {:.4} over {} points vs semigroup rate {gamma:.4} (M = 32)",
            rep.radius(),
            100.0 * growth,
            dist_fit.rate,
            dist_fit.n_points
        ),
    ))
}

fn determinism() -> Check {
    let overrides: Vec<String> = ["domain.modes=16", "run.n_steps=6", "run.ensemble=4", "run.seed=7"].iter().map(|s| s.to_string()).collect();
    let c = ExperimentConfig::parse("", &overrides)?;
    let (a, b) = (scratch_dir("det-a"), scratch_dir("det-b"));
    let mut compared = 0;
    let mut differing = Vec::new();
    for cmd in SUBCOMMANDS {
        let ra = run_subcommand(cmd, &c, &a)?;
        let rb = run_subcommand(cmd, &c, &b)?;
        for (fa, fb) in ra.files.iter().zip(&rb.files) {
            compared += 1;
            if std::fs::read(fa).ok() != std::fs::read(fb).ok() {
                differing.push(fa.file_name().unwrap_or_default().to_string_lossy().into_owned());
            }
        }
    }
    Ok((differing.is_empty() && compared > 0, format!("{compared} artifacts from {} subcommands compared, differing: {differing:?}", SUBCOMMANDS.len())))
}

fn main() {
    let checks: [Criterion; 12] = [
        ("flux identity order", flux_identity),
        ("unforced global stability", global_stability),
        ("semigroup decay", semigroup_decay),
        ("HUM exactness", hum_exactness),
        ("duality identity", duality_identity),
        ("linear contractibility", linear_contractibility),
        ("nonlinear squeezing", nonlinear_squeezing),
        ("coupling contraction", coupling_contraction),
        ("TV bound", tv_bound),
        ("exact toy oracle", toy_oracle),
        ("asymptotic compactness proxy", asymptotic_compactness),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in checks.iter().enumerate() {
        let t0 = Instant::now();
        let (ok, detail) = match check() {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        failed += usize::from(!ok);
        println!("[{}] {:>2}. {name}: {detail} ({:.1} s)", if ok { "PASS" } else { "FAIL" }, i + 1, t0.elapsed().as_secs_f64());
    }
    println!("acceptance: {} of {} criteria passed", checks.len() - failed, checks.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
