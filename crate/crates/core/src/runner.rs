//! Experiment subcommands. Each writes CSV artifacts plus a `<cmd>.manifest`
//! into the output directory; every CSV opens with a comment line naming the
//! manifest, the config checksum and the seed.

use crate::config::ExperimentConfig;
use crate::control::{calibrate_squeeze_radius, squeeze, ControlSystem};
use crate::coupling::{calibrate_delta, coupling_failure_scan, run_extension_ensemble, ShiftMode};
use crate::error::{Error, Result};
use crate::mixing::{
    discrete_monotonicity_scan, fit_decay_above, fit_exponential_decay, lln_clt_check, mixing_rate, multiplier_inequality_check, random_state,
    random_state_above,
    semigroup_norms, splitting_bound, wasserstein1_to_uniform, ObservableSpec,
};
use crate::rds::{ensemble_paths, ToyAffineRds};
use crate::rng::{derive_seed, stream};
use crate::spectral::PhaseState;
use crate::stats;
use crate::wave::fmt17;
use rand::Rng;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

pub const SUBCOMMANDS: [&str; 10] = ["simulate", "decay", "absorb", "attract", "observe", "control", "squeeze", "couple", "mix", "toy"];

/// Exit code for a certification failure.
pub const EXIT_CERTIFICATION: i32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass,
    CertificationFailure,
}

impl Status {
    pub fn exit_code(&self) -> i32 {
        match self {
            Status::Pass => 0,
            Status::CertificationFailure => EXIT_CERTIFICATION,
        }
    }

    fn from_bool(ok: bool) -> Self {
        if ok {
            Status::Pass
        } else {
            Status::CertificationFailure
        }
    }
}

/// Provenance of one subcommand run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub command: String,
    pub checksum: String,
    pub version: String,
    pub seed: u64,
    pub started: u64,
    pub finished: u64,
    pub files: Vec<String>,
    pub status: Status,
    /// One-line summaries of what was checked.
    pub notes: Vec<String>,
}

impl RunManifest {
    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "command = {}", self.command);
        let _ = writeln!(s, "config_sha256 = {}", self.checksum);
        let _ = writeln!(s, "version = mixlab {}", self.version);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "started_unix = {}", self.started);
        let _ = writeln!(s, "finished_unix = {}", self.finished);
        let _ = writeln!(s, "status = {}", if self.status == Status::Pass { "pass" } else { "certification-failure" });
        for f in &self.files {
            let _ = writeln!(s, "file = {f}");
        }
        for n in &self.notes {
            let _ = writeln!(s, "note = {n}");
        }
        s
    }
}

/// Result of [`run_subcommand`].
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub status: Status,
    pub manifest: PathBuf,
    pub files: Vec<PathBuf>,
    pub notes: Vec<String>,
}

/// Output directory: explicit flag, then `MIXLAB_OUT`, then the config.
pub fn resolve_out_dir(flag: Option<&Path>, cfg: &ExperimentConfig) -> PathBuf {
    if let Some(p) = flag {
        return p.to_path_buf();
    }
    match std::env::var_os("MIXLAB_OUT") {
        Some(v) if !v.is_empty() => PathBuf::from(v),
        _ => PathBuf::from(&cfg.run.out),
    }
}

struct Ctx<'a> {
    cmd: &'a str,
    cfg: &'a ExperimentConfig,
    checksum: String,
    out: PathBuf,
    files: Vec<PathBuf>,
    notes: Vec<String>,
}

impl Ctx<'_> {
    fn seed(&self) -> u64 {
        self.cfg.run.seed
    }

    fn csv(&self, header: &[&str]) -> Csv {
        let mut text = format!("# manifest={}.manifest checksum={} seed={}\n", self.cmd, self.checksum, self.seed());
        text += &header.join(",");
        text.push('\n');
        Csv { text }
    }

    fn write(&mut self, name: &str, content: &str) -> Result<()> {
        let path = self.out.join(name);
        std::fs::write(&path, content).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        self.files.push(path);
        Ok(())
    }

    fn note(&mut self, s: String) {
        self.notes.push(s);
    }
}

struct Csv {
    text: String,
}

impl Csv {
    fn row(&mut self, cells: &[String]) {
        self.text += &cells.join(",");
        self.text.push('\n');
    }
}

fn f(x: f64) -> String {
    fmt17(x)
}

fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

/// Runs one subcommand, writing artifacts under `out`.
pub fn run_subcommand(name: &str, cfg: &ExperimentConfig, out: &Path) -> Result<RunOutcome> {
    if !SUBCOMMANDS.contains(&name) {
        return Err(Error::Invalid(format!("unknown subcommand '{name}' (expected one of {})", SUBCOMMANDS.join(", "))));
    }
    std::fs::create_dir_all(out).map_err(|e| Error::Io(format!("{}: {e}", out.display())))?;
    let started = unix_now();
    let mut ctx = Ctx { cmd: name, cfg, checksum: cfg.checksum(), out: out.to_path_buf(), files: Vec::new(), notes: Vec::new() };
    let status = match name {
        "simulate" => simulate(&mut ctx),
        "decay" => decay(&mut ctx),
        "absorb" => absorb(&mut ctx),
        "attract" => attract(&mut ctx),
        "observe" => observe(&mut ctx),
        "control" => control(&mut ctx),
        "squeeze" => squeeze_cmd(&mut ctx),
        "couple" => couple(&mut ctx),
        "mix" => mix(&mut ctx),
        _ => toy(&mut ctx),
    }
    .map_err(|e| Error::Invalid(format!("{name}: {e}")))?;
    let manifest = RunManifest {
        command: name.to_string(),
        checksum: ctx.checksum.clone(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed: cfg.run.seed,
        started,
        finished: unix_now(),
        files: ctx.files.iter().filter_map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned())).collect(),
        status,
        notes: ctx.notes.clone(),
    };
    let mpath = out.join(format!("{name}.manifest"));
    std::fs::write(&mpath, manifest.render()).map_err(|e| Error::Io(format!("{}: {e}", mpath.display())))?;
    Ok(RunOutcome { status, manifest: mpath, files: ctx.files, notes: ctx.notes })
}

fn initial_state(ctx: &Ctx, tag: u64, smooth: f64) -> Result<PhaseState> {
    let dom = ctx.cfg.domain()?;
    let mut rng = stream(derive_seed(ctx.seed(), tag), 0);
    Ok(random_state(&dom, ctx.cfg.run.amplitude, smooth, &mut rng))
}

fn simulate(ctx: &mut Ctx) -> Result<Status> {
    let chain = ctx.cfg.chain()?;
    let u0 = initial_state(ctx, 10, 1.0)?;
    let run = chain.run(&u0, ctx.cfg.run.n_steps, derive_seed(ctx.seed(), 11), 0)?;
    let flux = chain.block_flux_residuals(&run)?;
    let dom = chain.domain();
    let mut csv = ctx.csv(&["n", "t", "energy", "h_norm", "flux_residual"]);
    for (n, s) in run.states.iter().enumerate() {
        let fr = if n == 0 { 0.0 } else { flux[n - 1] };
        csv.row(&[n.to_string(), f(n as f64 * chain.horizon()), f(chain.model.energy(s)), f(dom.h_norm(s)), f(fr)]);
    }
    ctx.write("simulate.csv", &csv.text)?;
    let ok = run.states.iter().all(|s| chain.model.energy(s).is_finite());
    ctx.note(format!("{} steps, all energies finite: {ok}", run.draws.len()));
    Ok(Status::from_bool(ok))
}

/// Unforced decay at three amplitudes and the linear semigroup norm.
fn decay(ctx: &mut Ctx) -> Result<Status> {
    let model = ctx.cfg.wave_model()?;
    let dom = model.domain.clone();
    let span = ctx.cfg.noise.horizon;
    let stride = model.steps_for(0.5).max(1);
    let mut series = ctx.csv(&["amplitude", "t", "energy"]);
    let mut fits = ctx.csv(&["series", "c", "rate", "rate_se", "residual", "n_points"]);
    let mut rates = Vec::new();
    let mut rng = stream(derive_seed(ctx.seed(), 20), 0);
    let dir = random_state(&dom, 1.0, 1.0, &mut rng);
    for amp in [0.1, 1.0, 10.0] {
        let traj = model.evolve_free(&dir.scaled(amp), span)?;
        let mut t = Vec::new();
        let mut e = Vec::new();
        for i in (0..traj.len()).step_by(stride) {
            t.push(traj.times[i]);
            e.push(model.energy(&traj.states[i]));
            series.row(&[f(amp), f(traj.times[i]), f(*e.last().expect("pushed"))]);
        }
        let fit = fit_decay_above(&t, &e, 1e-300)?;
        fits.row(&[format!("energy_amplitude_{amp}"), f(fit.c), f(fit.rate), f(fit.rate_se), f(fit.residual), fit.n_points.to_string()]);
        rates.push(fit.rate);
    }
    let (times, norms, sfit) = semigroup_fit(&model, span)?;
    let mut sg = ctx.csv(&["t", "norm"]);
    for (t, n) in times.iter().zip(&norms) {
        sg.row(&[f(*t), f(*n)]);
    }
    fits.row(&["semigroup".into(), f(sfit.c), f(sfit.rate), f(sfit.rate_se), f(sfit.residual), sfit.n_points.to_string()]);
    ctx.write("decay.csv", &series.text)?;
    ctx.write("semigroup.csv", &sg.text)?;
    ctx.write("decay_fit.csv", &fits.text)?;
    let lo = rates.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = rates.iter().cloned().fold(0.0, f64::max);
    let ok = lo > 0.0 && hi <= 2.0 * lo && sfit.rate > 0.0;
    ctx.note(format!("energy rates {rates:?}, semigroup rate {}", sfit.rate));
    Ok(Status::from_bool(ok))
}

/// `‖U(t)‖` at integer times in `[0, span]` and its exponential fit.
pub fn semigroup_fit(model: &crate::wave::WaveModel, span: f64) -> Result<(Vec<f64>, Vec<f64>, crate::mixing::DecayFit)> {
    let times: Vec<f64> = (0..=(span as usize)).map(|k| k as f64).collect();
    let norms = semigroup_norms(&model.with_cubic(false), &times)?;
    let fit = fit_exponential_decay(&times, &norms)?;
    Ok((times, norms, fit))
}

/// Energy non-increase over one block above a threshold, plus the
/// multiplier constant on one forced block.
fn absorb(ctx: &mut Ctx) -> Result<Status> {
    let chain = ctx.cfg.chain()?;
    let energies: Vec<f64> = (0..12).map(|k| 1e-2 * 10f64.powf(k as f64 * 5.0 / 11.0)).collect();
    let rep = discrete_monotonicity_scan(&chain, 1, 0.5, &energies, 4, derive_seed(ctx.seed(), 30))?;
    let mut csv = ctx.csv(&["energy", "worst_ratio", "violation"]);
    for i in 0..energies.len() {
        csv.row(&[f(rep.energies[i]), f(rep.worst_ratio[i]), (rep.violations[i] as u8).to_string()]);
    }
    ctx.write("absorb.csv", &csv.text)?;
    let u0 = initial_state(ctx, 31, 1.0)?;
    let mut rng = stream(derive_seed(ctx.seed(), 32), 0);
    let draw = chain.noise.draw(&mut rng);
    let (traj, force) = chain.step_path(&u0, &draw)?;
    let mult = multiplier_inequality_check(&chain.model, &traj, Some(&force));
    let mut sum = ctx.csv(&["t0", "varpi", "a0", "k0"]);
    sum.row(&[f(rep.t0), f(rep.varpi), f(rep.a0.unwrap_or(f64::NAN)), f(mult.k0)]);
    ctx.write("absorb_summary.csv", &sum.text)?;
    ctx.note(format!("A0 = {:?}, K0 = {}", rep.a0, mult.k0));
    Ok(Status::from_bool(rep.a0.is_some()))
}

fn attract(ctx: &mut Ctx) -> Result<Status> {
    let chain = ctx.cfg.chain()?;
    // rough data on the upper half of the spectrum
    let dom = chain.domain();
    let u0 = random_state_above(dom, ctx.cfg.run.amplitude, dom.n_modes() / 2, &mut stream(derive_seed(ctx.seed(), 40), 0));
    let run = chain.run(&u0, ctx.cfg.run.n_steps, derive_seed(ctx.seed(), 41), 0)?;
    let stride = (chain.n_steps() / 50).max(1);
    let rep = splitting_bound(&chain, &run, stride)?;
    let mut csv = ctx.csv(&["t", "w_norm", "running_max", "linear_norm", "dist"]);
    for i in 0..rep.times.len() {
        csv.row(&[f(rep.times[i]), f(rep.w_norm[i]), f(rep.running_max[i]), f(rep.linear_norm[i]), f(rep.dist[i])]);
    }
    ctx.write("attract.csv", &csv.text)?;
    let growth = rep.final_quarter_growth();
    let (dfit, lfit) = match rep.decay_rates(rep.radius()) {
        Ok((a, b)) => (a.rate, b.rate),
        Err(_) => (f64::NAN, f64::NAN),
    };
    let gamma = semigroup_fit(&chain.model, chain.horizon())?.2.rate;
    let mut sum = ctx.csv(&["radius", "final_quarter_growth", "dist_rate", "linear_rate", "semigroup_rate"]);
    sum.row(&[f(rep.radius()), f(growth), f(dfit), f(lfit), f(gamma)]);
    ctx.write("attract_summary.csv", &sum.text)?;
    let rate_ok = (dfit - gamma).abs() <= 0.25 * gamma;
    ctx.note(format!("radius {}, final-quarter growth {growth}, dist rate {dfit}, semigroup rate {gamma}", rep.radius()));
    Ok(Status::from_bool(growth < 0.05 && rate_ok))
}

fn control_row(run_id: usize, sys: &ControlSystem, min_eig: f64, residual: f64, cost: f64, ratio: f64) -> Vec<String> {
    vec![run_id.to_string(), f(sys.horizon), sys.cut.m.to_string(), sys.cut.n.to_string(), f(min_eig), f(residual), f(cost), f(ratio)]
}

const CONTROL_HEADER: [&str; 8] = ["run_id", "T", "m", "N", "min_eig", "endpoint_residual", "cost", "ratio"];

fn observe(ctx: &mut Ctx) -> Result<Status> {
    let sys = ctx.cfg.control_system()?;
    let gram = sys.assemble_gramian(None)?;
    let min_eig = gram.observability_min_eig();
    let mut csv = ctx.csv(&["run_id", "T", "m", "N", "min_eig", "min_eig_plain"]);
    csv.row(&["0".into(), f(sys.horizon), sys.cut.m.to_string(), sys.cut.n.to_string(), f(min_eig), f(gram.min_eig_plain())]);
    ctx.write("observe.csv", &csv.text)?;
    let ok = min_eig > ctx.cfg.control.min_eig_tol;
    ctx.note(format!("observability min eigenvalue {min_eig:e} (tolerance {:e})", ctx.cfg.control.min_eig_tol));
    Ok(Status::from_bool(ok))
}

/// Gramian certification, then HUM residuals and contraction ratios on
/// `run.ensemble` random initial data.
fn control(ctx: &mut Ctx) -> Result<Status> {
    let sys = ctx.cfg.control_system()?;
    let gram = sys.assemble_gramian(None)?;
    let min_eig = gram.observability_min_eig();
    let mut csv = ctx.csv(&CONTROL_HEADER);
    if min_eig <= ctx.cfg.control.min_eig_tol {
        csv.row(&control_row(0, &sys, min_eig, f64::NAN, f64::NAN, f64::NAN));
        ctx.write("control.csv", &csv.text)?;
        ctx.note(format!("not observable: min eigenvalue {min_eig:e}"));
        return Ok(Status::CertificationFailure);
    }
    let dom = sys.domain().clone();
    let s = derive_seed(ctx.seed(), 50);
    let amp = ctx.cfg.run.amplitude;
    let rows: Vec<Result<(f64, f64, f64)>> = crate::par_map(ctx.cfg.run.ensemble, |i| {
        let v0 = random_state(&dom, amp, 1.0, &mut stream(s, i as u64));
        let hum = sys.hum_min_norm_control(&gram, None, &v0)?;
        let c = sys.contractibility_control(&gram, None, &v0)?;
        Ok((hum.residual, c.hum.cost, c.ratio))
    });
    let mut worst: f64 = 0.0;
    let mut worst_res: f64 = 0.0;
    for (i, r) in rows.into_iter().enumerate() {
        let (res, cost, ratio) = r?;
        worst = worst.max(ratio);
        worst_res = worst_res.max(res);
        csv.row(&control_row(i, &sys, min_eig, res, cost, ratio));
    }
    ctx.write("control.csv", &csv.text)?;
    ctx.note(format!("worst ratio {worst}, worst endpoint residual {worst_res:e}"));
    Ok(Status::from_bool(worst <= ctx.cfg.control.eps))
}

/// Nonlinear squeezing around random reference solutions.
fn squeeze_cmd(ctx: &mut Ctx) -> Result<Status> {
    let sys = ctx.cfg.control_system()?;
    let nl = sys.model.with_cubic(true);
    let noise = ctx.cfg.noise_spec()?;
    let dom = sys.domain().clone();
    let amp = ctx.cfg.run.amplitude;
    let eps = ctx.cfg.control.eps;
    let seed = ctx.seed();
    let reference = |tag: u64, i: u64| {
        let mut rng = stream(derive_seed(seed, tag), i);
        let uhat0 = random_state(&dom, amp, 1.0, &mut rng);
        let (_, h) = noise.sample_noise(&dom, sys.n_steps(), &mut rng);
        (uhat0, h)
    };
    let direction = |tag: u64, i: u64| random_state(&dom, 1.0, 1.0, &mut stream(derive_seed(seed, tag), i));
    let d = if ctx.cfg.control.d > 0.0 {
        ctx.cfg.control.d
    } else {
        let cases: Vec<_> = (0..2).map(|i| reference(60, i)).collect();
        let dirs: Vec<_> = (0..2).map(|i| direction(61, i)).collect();
        let cal = calibrate_squeeze_radius(&sys, &nl, &cases, &dirs, eps, 10.0, 0.5, 12)?;
        let mut c = ctx.csv(&["edge", "d", "safety", "worst_ratio"]);
        c.row(&[f(cal.edge), f(cal.d), f(cal.safety), f(cal.worst_ratio)]);
        ctx.write("squeeze_radius.csv", &c.text)?;
        cal.d
    };
    let s = derive_seed(ctx.seed(), 62);
    let rows: Vec<Result<_>> = crate::par_map(ctx.cfg.run.ensemble, |i| {
        let (uhat0, h) = reference(63, i as u64);
        let dir = direction(64, i as u64);
        let g = d * stream(s, i as u64).gen_range(0.05..=1.0);
        let u0 = uhat0.add(&dir.scaled(g / dom.h_norm(&dir)));
        squeeze(&sys, &nl, &u0, &uhat0, &h, d)
    });
    let mut csv = ctx.csv(&CONTROL_HEADER);
    let mut worst: f64 = 0.0;
    let mut certified = true;
    for (i, r) in rows.into_iter().enumerate() {
        let r = r?;
        worst = worst.max(r.ratio);
        certified &= r.min_eig > ctx.cfg.control.min_eig_tol;
        csv.row(&control_row(i, &sys, r.min_eig, r.low_mode_error, r.cost, r.ratio));
    }
    ctx.write("squeeze.csv", &csv.text)?;
    ctx.note(format!("d = {d:e}, worst ratio {worst}"));
    Ok(Status::from_bool(certified && worst <= eps))
}

/// Extension-chain runs from pairs on the diagonal set and the one-step
/// failure scan.
fn couple(ctx: &mut Ctx) -> Result<Status> {
    let setup = ctx.cfg.coupling_setup()?;
    let dom = setup.domain().clone();
    let x = initial_state(ctx, 70, 1.0)?;
    let dir = random_state(&dom, 1.0, 1.0, &mut stream(derive_seed(ctx.seed(), 71), 0));
    let delta = if ctx.cfg.coupling.delta > 0.0 { ctx.cfg.coupling.delta } else { calibrate_delta(&setup, &x, &dir, ctx.cfg.coupling.tv_target)? };
    let unit = dir.scaled(1.0 / dom.h_norm(&dir));
    let s = derive_seed(ctx.seed(), 72);
    let pairs: Vec<(PhaseState, PhaseState)> = (0..ctx.cfg.run.ensemble)
        .map(|i| {
            let mut rng = stream(s, i as u64);
            let x0 = random_state(&dom, ctx.cfg.run.amplitude, 1.0, &mut rng);
            let y0 = x0.add(&unit.scaled(0.5 * delta));
            (x0, y0)
        })
        .collect();
    let summary = run_extension_ensemble(&setup, &pairs, ctx.cfg.run.n_steps, delta, derive_seed(ctx.seed(), 73))?;
    let mut csv = ctx.csv(&["run_id", "n", "gap", "branch", "identical_shift", "sigma_hit", "tau_hit"]);
    for (i, run) in summary.runs.iter().enumerate() {
        csv.row(&[i.to_string(), "0".into(), f(run.initial_gap), "-".into(), "0".into(), "0".into(), "0".into()]);
        for r in &run.records {
            csv.row(&[
                i.to_string(),
                r.n.to_string(),
                f(r.gap),
                r.branch.name().into(),
                (r.identical_shift as u8).to_string(),
                (r.sigma_hit as u8).to_string(),
                (r.tau_hit as u8).to_string(),
            ]);
        }
    }
    ctx.write("couple.csv", &csv.text)?;
    let mut ok = true;
    if setup.mode == ShiftMode::Constant {
        let gaps: Vec<f64> = (1..=8).map(|k| delta * k as f64 / 8.0).collect();
        let scan = coupling_failure_scan(&setup, &x, &dir, &gaps, 8 * ctx.cfg.run.ensemble, derive_seed(ctx.seed(), 74))?;
        let mut sc = ctx.csv(&["gap", "p_fail", "se", "tv_bound", "worst_identical_ratio", "identical_fraction"]);
        for p in &scan {
            sc.row(&[f(p.gap), f(p.p_fail), f(p.se), f(p.tv_bound), f(p.worst_identical_ratio), f(p.identical_fraction)]);
            ok &= p.worst_identical_ratio <= 0.5;
        }
        ctx.write("couple_scan.csv", &sc.text)?;
    }
    let mut sm = ctx.csv(&["delta", "p_sigma_infinite", "tau_hits", "sigma_hits"]);
    sm.row(&[f(delta), f(summary.p_sigma_infinite), summary.tau_samples.len().to_string(), summary.sigma_samples.len().to_string()]);
    ctx.write("couple_summary.csv", &sm.text)?;
    ctx.note(format!("delta {delta:e}, tau observed in {} of {} runs", summary.tau_samples.len(), summary.runs.len()));
    Ok(Status::from_bool(ok))
}

/// Ensemble from a fixed state against the long-run law of an ensemble
/// started at rest.
fn mix(ctx: &mut Ctx) -> Result<Status> {
    let chain = ctx.cfg.chain()?;
    let dom = chain.domain().clone();
    let n = ctx.cfg.run.n_steps;
    let r = ctx.cfg.run.ensemble;
    let x0 = initial_state(ctx, 80, 1.0)?;
    let runs_a = chain.ensemble(&vec![x0; r], n, derive_seed(ctx.seed(), 81))?;
    let runs_b = chain.ensemble(&vec![dom.zero_state(); r], n, derive_seed(ctx.seed(), 82))?;
    let ens: Vec<Vec<PhaseState>> = (0..=n).map(|k| runs_a.iter().map(|run| run.states[k].clone()).collect()).collect();
    let reference: Vec<PhaseState> = runs_b.iter().flat_map(|run| run.states[n / 2..].iter().cloned()).collect();
    let obs = ObservableSpec::wave_default(&dom, ctx.cfg.run.amplitude.max(1.0));
    let reports = mixing_rate(&ens, &obs, &reference, derive_seed(ctx.seed(), 83))?;
    let mut csv = ctx.csv(&["observable", "n", "distance", "floor"]);
    let mut fits = ctx.csv(&["observable", "lipschitz", "c", "rate", "rate_se", "residual", "n_points", "reliable"]);
    let mut ok = true;
    let mut plot = Vec::new();
    for (rep, o) in reports.iter().zip(&obs.items) {
        for (k, d) in rep.distances.iter().enumerate() {
            csv.row(&[rep.observable.clone(), k.to_string(), f(*d), f(rep.floor)]);
        }
        let (c, rate, se, res, np) = rep.fit.map_or((f64::NAN, f64::NAN, f64::NAN, f64::NAN, 0), |x| (x.c, x.rate, x.rate_se, x.residual, x.n_points));
        fits.row(&[rep.observable.clone(), f(o.lipschitz), f(c), f(rate), f(se), f(res), np.to_string(), (rep.reliable as u8).to_string()]);
        if rep.reliable {
            ok &= rate > 0.0;
        }
        plot.push((rep.observable.clone(), rep.distances.iter().enumerate().map(|(k, d)| (k as f64, *d)).collect::<Vec<_>>()));
    }
    let mut lim = ctx.csv(&["observable", "long_run_mean", "last_quarter_mean", "lln_se", "lln_pass", "sigma2", "ks_p"]);
    for o in &obs.items {
        let series: Vec<Vec<f64>> = runs_b.iter().map(|run| run.states.iter().map(|s| o.eval(s)).collect()).collect();
        if let Ok(l) = lln_clt_check(&series) {
            lim.row(&[o.name.clone(), f(l.long_run_mean), f(l.last_quarter_mean), f(l.lln_se), (l.lln_pass as u8).to_string(), f(l.sigma2), f(l.ks_p)]);
        }
    }
    ctx.write("mix.csv", &csv.text)?;
    ctx.write("mix_fit.csv", &fits.text)?;
    ctx.write("mix_limits.csv", &lim.text)?;
    ctx.write("mix.svg", &svg_log_plot("W1 to the long-run law", "n", &plot))?;
    ctx.note(format!("{} observables, {} reliable fits", reports.len(), reports.iter().filter(|r| r.reliable).count()));
    Ok(Status::from_bool(ok))
}

/// Law of `x/2 + b` from `x = 0` against `Uniform[0, 2]`.
fn toy(ctx: &mut Ctx) -> Result<Status> {
    let toy = ToyAffineRds::default();
    let (n_max, members) = (15, 10_000);
    let ens = ensemble_paths(&toy, &0.0, n_max, members, derive_seed(ctx.seed(), 90));
    let w1: Vec<f64> = ens.iter().map(|e| wasserstein1_to_uniform(e, 0.0, 2.0)).collect::<Result<_>>()?;
    let null = toy_null_floor(members, 50, derive_seed(ctx.seed(), 91))?;
    let t: Vec<f64> = (0..=n_max).map(|n| n as f64).collect();
    let fit = fit_decay_above(&t, &w1, 2.0 * null.0)?;
    let beta = fit.rate;
    let mut csv = ctx.csv(&["n", "W1_to_uniform", "fitted_beta"]);
    for (n, w) in w1.iter().enumerate() {
        csv.row(&[n.to_string(), f(*w), f(beta)]);
    }
    ctx.write("toy.csv", &csv.text)?;
    let bound_ok = [5usize, 10, 15].iter().all(|&n| w1[n] <= 0.5f64.powi(n as i32) + null.1);
    let beta_ok = (beta - std::f64::consts::LN_2).abs() <= 0.25 * std::f64::consts::LN_2;
    let lim = toy_limits(&toy, 500, 200, derive_seed(ctx.seed(), 92))?;
    let mut lc = ctx.csv(&["chains", "steps", "mean", "mean_se", "sigma2", "sigma2_exact", "ks_p"]);
    lc.row(&["500".into(), "200".into(), f(lim.mean), f(lim.se), f(lim.sigma2), f(1.0), f(lim.ks_p)]);
    ctx.write("toy_limits.csv", &lc.text)?;
    let plot = vec![
        ("empirical".to_string(), w1.iter().enumerate().map(|(n, w)| (n as f64, *w)).collect()),
        ("2^-n".to_string(), (0..=n_max).map(|n| (n as f64, 0.5f64.powi(n as i32))).collect()),
    ];
    ctx.write("toy.svg", &svg_log_plot("toy chain: W1 to Uniform[0,2]", "n", &plot))?;
    let lln_ok = (lim.mean - 1.0).abs() <= 3.0 * lim.se;
    let ok = bound_ok && beta_ok && lln_ok && lim.ks_p > 0.01;
    ctx.note(format!("beta {beta} (ln 2 = {}), floor {}, mean {} +- {}, ks p {}", std::f64::consts::LN_2, null.1, lim.mean, lim.se, lim.ks_p));
    Ok(Status::from_bool(ok))
}

/// `(mean, max)` of `W₁(empirical, Uniform[0,2])` over `replicates` exact
/// uniform samples of size `size`.
pub fn toy_null_floor(size: usize, replicates: usize, seed: u64) -> Result<(f64, f64)> {
    let vals: Vec<f64> = (0..replicates)
        .map(|r| {
            let mut rng = stream(seed, r as u64);
            let s: Vec<f64> = (0..size).map(|_| rng.gen_range(0.0..2.0)).collect();
            wasserstein1_to_uniform(&s, 0.0, 2.0)
        })
        .collect::<Result<_>>()?;
    Ok((stats::mean(&vals), vals.iter().cloned().fold(0.0, f64::max)))
}

/// Toy LLN and CLT statistics for `f(x) = x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToyLimits {
    /// Mean over chains of the time average over the second half.
    pub mean: f64,
    pub se: f64,
    pub sigma2: f64,
    pub ks_p: f64,
}

pub fn toy_limits(toy: &ToyAffineRds, chains: usize, steps: usize, seed: u64) -> Result<ToyLimits> {
    let ens = ensemble_paths(toy, &0.0, steps, chains, seed);
    let series: Vec<Vec<f64>> = (0..chains).map(|i| ens[1..].iter().map(|lvl| lvl[i]).collect()).collect();
    let lim = lln_clt_check(&series)?;
    let avgs: Vec<f64> = series.iter().map(|s| stats::mean(&s[steps / 2..])).collect();
    Ok(ToyLimits {
        mean: stats::mean(&avgs),
        se: (stats::variance(&avgs) / chains as f64).sqrt(),
        sigma2: lim.sigma2,
        ks_p: lim.ks_p,
    })
}

/// Line plot with a log-scaled y axis; nonpositive values are skipped.
pub fn svg_log_plot(title: &str, xlabel: &str, series: &[(String, Vec<(f64, f64)>)]) -> String {
    const W: f64 = 640.0;
    const H: f64 = 400.0;
    const PAD: f64 = 50.0;
    const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];
    let pts: Vec<(f64, f64)> = series.iter().flat_map(|s| s.1.iter().copied()).filter(|p| p.1 > 0.0 && p.1.is_finite()).collect();
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in &pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y.log10());
        y1 = y1.max(y.log10());
    }
    if pts.is_empty() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    if y1 <= y0 {
        y1 = y0 + 1.0;
    }
    let sx = |x: f64| PAD + (x - x0) / (x1 - x0) * (W - 2.0 * PAD);
    let sy = |y: f64| H - PAD - (y.log10() - y0) / (y1 - y0) * (H - 2.0 * PAD);
    let mut s = format!("<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" font-family=\"sans-serif\" font-size=\"12\">\n");
    let _ = writeln!(s, "<rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>");
    let _ = writeln!(s, "<text x=\"{}\" y=\"20\" text-anchor=\"middle\">{title}</text>", W / 2.0);
    let _ = writeln!(s, "<line x1=\"{PAD}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>", H - PAD, W - PAD, H - PAD);
    let _ = writeln!(s, "<line x1=\"{PAD}\" y1=\"{PAD}\" x2=\"{PAD}\" y2=\"{}\" stroke=\"black\"/>", H - PAD);
    let _ = writeln!(s, "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{xlabel}</text>", W / 2.0, H - 15.0);
    let _ = writeln!(s, "<text x=\"{PAD}\" y=\"{}\" text-anchor=\"middle\">{x0:.0}</text>", H - PAD + 15.0);
    let _ = writeln!(s, "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{x1:.0}</text>", W - PAD, H - PAD + 15.0);
    let _ = writeln!(s, "<text x=\"{}\" y=\"{}\" text-anchor=\"end\">1e{y0:.1}</text>", PAD - 4.0, H - PAD);
    let _ = writeln!(s, "<text x=\"{}\" y=\"{PAD}\" text-anchor=\"end\">1e{y1:.1}</text>", PAD - 4.0);
    for (i, (name, data)) in series.iter().enumerate() {
        let c = COLORS[i % COLORS.len()];
        let path: Vec<String> = data.iter().filter(|p| p.1 > 0.0 && p.1.is_finite()).map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
        let _ = writeln!(s, "<polyline fill=\"none\" stroke=\"{c}\" stroke-width=\"1.5\" points=\"{}\"/>", path.join(" "));
        let _ = writeln!(s, "<text x=\"{}\" y=\"{}\" fill=\"{c}\">{name}</text>", W - PAD - 120.0, PAD + 15.0 * i as f64);
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tmp(name: &str) -> PathBuf {
        let p = std::env::temp_dir().join(format!("mixlab-runner-{name}-{}", std::process::id()));
        let _ = std::fs::remove_dir_all(&p);
        p
    }

    #[test]
    fn toy_is_deterministic_and_passes() {
        let cfg = ExperimentConfig::parse("[run]\nseed = 7\n", &[]).unwrap();
        let (a, b) = (tmp("toy-a"), tmp("toy-b"));
        let ra = run_subcommand("toy", &cfg, &a).unwrap();
        let rb = run_subcommand("toy", &cfg, &b).unwrap();
        assert_eq!(ra.status, Status::Pass, "{:?}", ra.notes);
        for name in ["toy.csv", "toy_limits.csv"] {
            let ta = std::fs::read_to_string(a.join(name)).unwrap();
            assert_eq!(ta, std::fs::read_to_string(b.join(name)).unwrap());
            let first = ta.lines().next().unwrap();
            assert!(first.starts_with("# manifest=toy.manifest checksum=") && first.ends_with("seed=7"));
        }
        let head = std::fs::read_to_string(a.join("toy.csv")).unwrap();
        assert_eq!(head.lines().nth(1).unwrap(), "n,W1_to_uniform,fitted_beta");
        let manifest = std::fs::read_to_string(&rb.manifest).unwrap();
        assert!(manifest.contains("file = toy.csv") && manifest.contains(&cfg.checksum()));
    }

    #[test]
    fn observe_without_cutoff_is_a_certification_failure() {
        let cfg = ExperimentConfig::parse("[domain]\nmodes = 8\n[noise]\nn = 4\n[control]\nn = 4\n[cutoff]\nshape = zero\n", &[]).unwrap();
        let out = tmp("observe");
        let r = run_subcommand("observe", &cfg, &out).unwrap();
        assert_eq!(r.status.exit_code(), 2);
        let text = std::fs::read_to_string(out.join("observe.csv")).unwrap();
        let row: Vec<&str> = text.lines().nth(2).unwrap().split(',').collect();
        assert_eq!(row[4].parse::<f64>().unwrap(), 0.0);
    }

    #[test]
    fn unknown_subcommand_is_an_error() {
        let cfg = ExperimentConfig::default();
        assert!(run_subcommand("bogus", &cfg, &tmp("bogus")).is_err());
    }

    #[test]
    fn svg_is_well_formed() {
        let s = svg_log_plot("t", "n", &[("a".into(), vec![(0.0, 1.0), (1.0, 0.5), (2.0, 0.0)])]);
        assert!(s.starts_with("<svg") && s.trim_end().ends_with("</svg>"));
        assert_eq!(s.matches("<polyline").count(), 1);
    }
}
