//! Experiment configuration: flat `key = value` pairs under `[section]`
//! headers, `#` comments. Every key has a default; unknown keys are errors.

use crate::control::{ControlSystem, FrequencyCut};
use crate::coupling::{CouplingSetup, ShiftMode};
use crate::error::{Error, Result};
use crate::mixing::WaveChain;
use crate::noise::{DensityKind, NoiseSpec};
use crate::spectral::{Domain, Profile, Side, Strip};
use crate::wave::{SolverConfig, WaveModel};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::Path;

/// Shape of a damping or cutoff coefficient.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileCfg {
    /// `strip`, `constant` or `zero`.
    pub shape: String,
    pub amplitude: f64,
    pub axis: usize,
    pub side: Side,
    /// Plateau width as a fraction of the axis length.
    pub width: f64,
    /// Transition width as a fraction of the axis length.
    pub transition: f64,
}

impl ProfileCfg {
    fn strip(amplitude: f64, width: f64) -> Self {
        ProfileCfg { shape: "strip".into(), amplitude, axis: 0, side: Side::High, width, transition: 0.1 }
    }

    pub fn profile(&self, domain: &Domain) -> Result<Profile> {
        match self.shape.as_str() {
            "zero" => Ok(Profile::Zero),
            "constant" => Ok(Profile::Constant(self.amplitude)),
            "strip" => {
                let len = *domain.lengths().get(self.axis).ok_or_else(|| Error::Invalid(format!("axis {} out of range", self.axis)))?;
                Ok(Profile::Strip(Strip {
                    amplitude: self.amplitude,
                    axis: self.axis,
                    side: self.side,
                    width: self.width * len,
                    transition: self.transition * len,
                }))
            }
            other => Err(Error::Invalid(format!("unknown profile shape '{other}'"))),
        }
    }
}

/// Rule for the noise amplitudes `b_jk`.
#[derive(Debug, Clone, PartialEq)]
pub enum AmplitudeRule {
    Geometric,
    Flat,
    Explicit(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DomainCfg {
    pub dim: usize,
    pub lengths: Vec<f64>,
    pub modes: usize,
    pub grid_factor: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseCfg {
    pub horizon: f64,
    pub b0: f64,
    pub n: usize,
    pub density: DensityKind,
    pub rule: AmplitudeRule,
    pub fill: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControlCfg {
    pub m: usize,
    pub n: usize,
    /// Target contraction ratio.
    pub eps: f64,
    pub s: f64,
    /// Squeezing radius; 0 means calibrate.
    pub d: f64,
    pub refinements: usize,
    pub min_eig_tol: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CouplingCfg {
    /// Diagonal-set radius; 0 means calibrate from `tv_target`.
    pub delta: f64,
    pub r: f64,
    pub mode: ShiftMode,
    pub tv_target: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunCfg {
    pub seed: u64,
    pub n_steps: usize,
    pub ensemble: usize,
    pub out: String,
    /// `𝓗`-norm of random initial data.
    pub amplitude: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub domain: DomainCfg,
    pub damping: ProfileCfg,
    pub cutoff: ProfileCfg,
    pub dt: f64,
    pub noise: NoiseCfg,
    pub control: ControlCfg,
    pub coupling: CouplingCfg,
    pub run: RunCfg,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            domain: DomainCfg { dim: 1, lengths: vec![std::f64::consts::PI], modes: 32, grid_factor: 4 },
            damping: ProfileCfg::strip(1.0, 0.4),
            cutoff: ProfileCfg::strip(1.0, 0.3),
            dt: 0.01,
            noise: NoiseCfg { horizon: 15.0, b0: 1.0, n: 8, density: DensityKind::Epanechnikov, rule: AmplitudeRule::Geometric, fill: 0.9 },
            control: ControlCfg { m: 4, n: 8, eps: 0.25, s: 0.2, d: 0.0, refinements: 3, min_eig_tol: 1e-10 },
            coupling: CouplingCfg { delta: 0.0, r: 0.5, mode: ShiftMode::Constant, tv_target: 0.25 },
            run: RunCfg { seed: 1, n_steps: 200, ensemble: 16, out: "out".into(), amplitude: 1.0 },
        }
    }
}

/// `section.key → (value, line)`.
type RawMap = BTreeMap<String, (String, usize)>;

fn parse_raw(text: &str) -> Result<RawMap> {
    let mut map = RawMap::new();
    let mut section = String::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let name = rest.strip_suffix(']').ok_or(Error::Config { line: line_no, msg: "unterminated section header".into() })?;
            section = name.trim().to_string();
            if !SECTIONS.contains(&section.as_str()) {
                return Err(Error::Config { line: line_no, msg: format!("unknown section [{section}]") });
            }
            continue;
        }
        let (k, v) = line.split_once('=').ok_or(Error::Config { line: line_no, msg: format!("expected key = value, got '{line}'") })?;
        if section.is_empty() {
            return Err(Error::Config { line: line_no, msg: "key outside of a section".into() });
        }
        let key = format!("{section}.{}", k.trim());
        if map.insert(key.clone(), (v.trim().to_string(), line_no)).is_some() {
            return Err(Error::Config { line: line_no, msg: format!("duplicate key {key}") });
        }
    }
    Ok(map)
}

const SECTIONS: [&str; 8] = ["domain", "damping", "cutoff", "solver", "noise", "control", "coupling", "run"];

/// Typed reader that tracks which keys were consumed.
struct Reader {
    map: RawMap,
}

impl Reader {
    fn get<T, F: Fn(&str) -> std::result::Result<T, String>>(&mut self, key: &str, default: T, parse: F) -> Result<T> {
        match self.map.remove(key) {
            None => Ok(default),
            Some((v, line)) => parse(&v).map_err(|msg| Error::Config { line, msg: format!("{key}: {msg}") }),
        }
    }

    fn f64(&mut self, key: &str, default: f64) -> Result<f64> {
        self.get(key, default, |s| s.parse::<f64>().map_err(|e| e.to_string()))
    }

    fn usize(&mut self, key: &str, default: usize) -> Result<usize> {
        self.get(key, default, |s| s.parse::<usize>().map_err(|e| e.to_string()))
    }

    fn string(&mut self, key: &str, default: &str) -> Result<String> {
        self.get(key, default.to_string(), |s| Ok(s.to_string()))
    }

    fn line_of(&self, key: &str) -> usize {
        self.map.get(key).map(|v| v.1).unwrap_or(0)
    }

    fn profile(&mut self, section: &str, d: &ProfileCfg) -> Result<ProfileCfg> {
        Ok(ProfileCfg {
            shape: self.get(&format!("{section}.shape"), d.shape.clone(), |s| match s {
                "strip" | "constant" | "zero" => Ok(s.to_string()),
                _ => Err(format!("unknown shape '{s}'")),
            })?,
            amplitude: self.f64(&format!("{section}.amplitude"), d.amplitude)?,
            axis: self.usize(&format!("{section}.axis"), d.axis)?,
            side: self.get(&format!("{section}.side"), d.side, |s| match s {
                "low" => Ok(Side::Low),
                "high" => Ok(Side::High),
                _ => Err(format!("side must be low or high, got '{s}'")),
            })?,
            width: self.f64(&format!("{section}.width"), d.width)?,
            transition: self.f64(&format!("{section}.transition"), d.transition)?,
        })
    }
}

fn parse_list(s: &str) -> std::result::Result<Vec<f64>, String> {
    s.split(',').map(|x| x.trim().parse::<f64>().map_err(|e| e.to_string())).collect()
}

fn parse_matrix(s: &str) -> std::result::Result<Vec<Vec<f64>>, String> {
    s.split(';').map(parse_list).collect()
}

impl ExperimentConfig {
    /// Parse, apply `section.key=value` overrides, fill defaults and validate.
    pub fn parse(text: &str, overrides: &[String]) -> Result<Self> {
        let mut map = parse_raw(text)?;
        for o in overrides {
            let (k, v) = o.split_once('=').ok_or_else(|| Error::Invalid(format!("override '{o}' is not section.key=value")))?;
            let k = k.trim();
            match k.split_once('.') {
                Some((sec, _)) if SECTIONS.contains(&sec) => {}
                _ => return Err(Error::Invalid(format!("override key '{k}' is not section.key"))),
            }
            map.insert(k.to_string(), (v.trim().to_string(), 0));
        }
        let d = ExperimentConfig::default();
        let mut r = Reader { map };
        let domain = DomainCfg {
            dim: r.usize("domain.dim", d.domain.dim)?,
            lengths: r.get("domain.lengths", d.domain.lengths.clone(), parse_list)?,
            modes: r.usize("domain.modes", d.domain.modes)?,
            grid_factor: r.usize("domain.grid_factor", d.domain.grid_factor)?,
        };
        let damping = r.profile("damping", &d.damping)?;
        let cutoff = r.profile("cutoff", &d.cutoff)?;
        let dt_line = r.line_of("solver.dt");
        let dt = r.f64("solver.dt", d.dt)?;
        let rule_name = r.string("noise.b_rule", "geometric")?;
        let amps_line = r.line_of("noise.amplitudes");
        let amps = r.get("noise.amplitudes", None, |s| parse_matrix(s).map(Some))?;
        let rule = match (rule_name.as_str(), amps) {
            ("geometric", None) => AmplitudeRule::Geometric,
            ("flat", None) => AmplitudeRule::Flat,
            ("explicit", Some(a)) => AmplitudeRule::Explicit(a),
            ("explicit", None) => return Err(Error::Config { line: amps_line, msg: "b_rule = explicit needs noise.amplitudes".into() }),
            (_, Some(_)) => return Err(Error::Config { line: amps_line, msg: "noise.amplitudes requires b_rule = explicit".into() }),
            (other, None) => return Err(Error::Invalid(format!("unknown b_rule '{other}'"))),
        };
        let noise = NoiseCfg {
            horizon: r.f64("noise.horizon", d.noise.horizon)?,
            b0: r.f64("noise.b0", d.noise.b0)?,
            n: r.usize("noise.n", d.noise.n)?,
            density: r.get("noise.density", d.noise.density, |s| DensityKind::parse(s).map_err(|e| e.to_string()))?,
            rule,
            fill: r.f64("noise.fill", d.noise.fill)?,
        };
        let control = ControlCfg {
            m: r.usize("control.m", d.control.m)?,
            n: r.usize("control.n", d.control.n)?,
            eps: r.f64("control.eps", d.control.eps)?,
            s: r.f64("control.s", d.control.s)?,
            d: r.f64("control.d", d.control.d)?,
            refinements: r.usize("control.refinements", d.control.refinements)?,
            min_eig_tol: r.f64("control.min_eig_tol", d.control.min_eig_tol)?,
        };
        let coupling = CouplingCfg {
            delta: r.f64("coupling.delta", d.coupling.delta)?,
            r: r.f64("coupling.r", d.coupling.r)?,
            mode: r.get("coupling.mode", d.coupling.mode, |s| ShiftMode::parse(s).map_err(|e| e.to_string()))?,
            tv_target: r.f64("coupling.tv_target", d.coupling.tv_target)?,
        };
        let run = RunCfg {
            seed: r.get("run.seed", d.run.seed, |s| s.parse::<u64>().map_err(|e| e.to_string()))?,
            n_steps: r.usize("run.n_steps", d.run.n_steps)?,
            ensemble: r.usize("run.ensemble", d.run.ensemble)?,
            out: r.string("run.out", &d.run.out)?,
            amplitude: r.f64("run.amplitude", d.run.amplitude)?,
        };
        if let Some((k, (_, line))) = r.map.iter().next() {
            return Err(Error::Config { line: *line, msg: format!("unknown key {k}") });
        }
        let cfg = ExperimentConfig { domain, damping, cutoff, dt, noise, control, coupling, run };
        cfg.validate().map_err(|e| match e {
            Error::Constraint(msg) if msg.contains("resolution bound") && dt_line > 0 => Error::Config { line: dt_line, msg: format!("constraint violated: {msg}") },
            other => other,
        })?;
        Ok(cfg)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text, overrides)
    }

    /// Cross-field checks.
    pub fn validate(&self) -> Result<()> {
        let dom = self.domain()?;
        let nm = dom.n_modes();
        if self.noise.n == 0 || self.noise.n > nm {
            return Err(Error::Constraint(format!("noise block N = {} must satisfy 1 <= N <= {nm}", self.noise.n)));
        }
        if self.control.n == 0 || self.control.n > nm {
            return Err(Error::Constraint(format!("control block N = {} must satisfy 1 <= N <= {nm}", self.control.n)));
        }
        if self.control.m == 0 || self.control.m > nm {
            return Err(Error::Constraint(format!("m = {} must satisfy 1 <= m <= {nm}", self.control.m)));
        }
        if self.control.n > self.noise.n {
            return Err(Error::Constraint("control block exceeds the noise block".into()));
        }
        if !(self.control.eps > 0.0 && self.control.eps < 1.0) {
            return Err(Error::Invalid("control.eps must lie in (0, 1)".into()));
        }
        if self.coupling.r != 0.5 {
            return Err(Error::Invalid("coupling.r is fixed to 0.5".into()));
        }
        if !(self.noise.horizon > 0.0) {
            return Err(Error::Invalid("noise.horizon must be positive".into()));
        }
        if self.run.ensemble == 0 {
            return Err(Error::Invalid("run.ensemble must be >= 1".into()));
        }
        SolverConfig::new(self.dt).validate(&dom)?;
        self.damping.profile(&dom)?;
        let spec = self.noise_spec()?;
        spec.validate(&dom, self.noise.b0)
    }

    pub fn domain(&self) -> Result<Domain> {
        if self.domain.lengths.len() != self.domain.dim {
            return Err(Error::Invalid(format!("{} lengths for dimension {}", self.domain.lengths.len(), self.domain.dim)));
        }
        Domain::new(self.domain.lengths.clone(), self.domain.modes, self.domain.grid_factor)
    }

    /// Cubic wave model.
    pub fn wave_model(&self) -> Result<WaveModel> {
        let dom = self.domain()?;
        let damping = self.damping.profile(&dom)?;
        WaveModel::new(dom, damping, SolverConfig::new(self.dt))
    }

    pub fn noise_spec(&self) -> Result<NoiseSpec> {
        let dom = self.domain()?;
        let chi = self.cutoff.profile(&dom)?;
        let n = &self.noise;
        match &n.rule {
            AmplitudeRule::Geometric => NoiseSpec::geometric(&dom, n.b0, n.horizon, n.n, n.fill, n.density, chi),
            AmplitudeRule::Flat => NoiseSpec::flat(&dom, n.b0, n.horizon, n.n, n.fill, n.density, chi),
            AmplitudeRule::Explicit(a) => Ok(NoiseSpec::explicit(n.horizon, a.clone(), n.density, chi)),
        }
    }

    pub fn control_system(&self) -> Result<ControlSystem> {
        let model = self.wave_model()?.with_cubic(false);
        let chi = self.cutoff.profile(&model.domain)?;
        let mut cut = FrequencyCut::new(self.control.m, self.control.n);
        cut.s = self.control.s;
        let mut sys = ControlSystem::new(model, chi, self.noise.horizon, cut)?;
        sys.refinements = self.control.refinements;
        Ok(sys)
    }

    pub fn chain(&self) -> Result<WaveChain> {
        WaveChain::new(self.wave_model()?, self.noise_spec()?)
    }

    pub fn coupling_setup(&self) -> Result<CouplingSetup> {
        CouplingSetup::new(self.control_system()?, self.noise_spec()?, self.coupling.mode)
    }

    /// Canonical text form with every key.
    pub fn serialize(&self) -> String {
        let f = |x: f64| format!("{x:?}");
        let list = |v: &[f64]| v.iter().map(|x| f(*x)).collect::<Vec<_>>().join(", ");
        let prof = |name: &str, p: &ProfileCfg| {
            format!(
                "[{name}]\nshape = {}\namplitude = {}\naxis = {}\nside = {}\nwidth = {}\ntransition = {}\n\n",
                p.shape,
                f(p.amplitude),
                p.axis,
                if p.side == Side::Low { "low" } else { "high" },
                f(p.width),
                f(p.transition)
            )
        };
        let mut s = String::new();
        s += &format!(
            "[domain]\ndim = {}\nlengths = {}\nmodes = {}\ngrid_factor = {}\n\n",
            self.domain.dim,
            list(&self.domain.lengths),
            self.domain.modes,
            self.domain.grid_factor
        );
        s += &prof("damping", &self.damping);
        s += &prof("cutoff", &self.cutoff);
        s += &format!("[solver]\ndt = {}\n\n", f(self.dt));
        let n = &self.noise;
        let rule = match &n.rule {
            AmplitudeRule::Geometric => "b_rule = geometric\n".to_string(),
            AmplitudeRule::Flat => "b_rule = flat\n".to_string(),
            AmplitudeRule::Explicit(a) => format!(
                "b_rule = explicit\namplitudes = {}\n",
                a.iter().map(|r| list(r)).collect::<Vec<_>>().join("; ")
            ),
        };
        s += &format!(
            "[noise]\nhorizon = {}\nb0 = {}\nn = {}\ndensity = {}\n{rule}fill = {}\n\n",
            f(n.horizon),
            f(n.b0),
            n.n,
            n.density.name(),
            f(n.fill)
        );
        let c = &self.control;
        s += &format!(
            "[control]\nm = {}\nn = {}\neps = {}\ns = {}\nd = {}\nrefinements = {}\nmin_eig_tol = {}\n\n",
            c.m,
            c.n,
            f(c.eps),
            f(c.s),
            f(c.d),
            c.refinements,
            f(c.min_eig_tol)
        );
        let cp = &self.coupling;
        s += &format!(
            "[coupling]\ndelta = {}\nr = {}\nmode = {}\ntv_target = {}\n\n",
            f(cp.delta),
            f(cp.r),
            cp.mode.name(),
            f(cp.tv_target)
        );
        let r = &self.run;
        s += &format!(
            "[run]\nseed = {}\nn_steps = {}\nensemble = {}\nout = {}\namplitude = {}\n",
            r.seed,
            r.n_steps,
            r.ensemble,
            r.out,
            f(r.amplitude)
        );
        s
    }

    /// SHA-256 of the canonical form.
    pub fn checksum(&self) -> String {
        let digest = Sha256::digest(self.serialize().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}
