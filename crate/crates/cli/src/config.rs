//! Run configuration: TOML with the sections `[params]`, `[grid]`,
//! `[step]`, `[init]`, `[output]`, `[sweep]` and `[gauge]`. Every key is
//! optional; unknown keys are errors.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use helium_gl_core::{
    BodyForce, Grid, HeatSupply, MaterialDerivative, ModelParams, Pins, Profile, RandomSmooth, StepConfig, UniformInit,
};
use thiserror::Error;
use toml::{Table, Value};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("config is not valid TOML: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("unknown config keys: {}", .0.join(", "))]
    UnknownKeys(Vec<String>),
    #[error("`{key}` must be {expected}")]
    Type { key: String, expected: &'static str },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitSpec {
    Uniform(UniformInit),
    Profile { base: UniformInit, profile: Profile },
    Snapshot(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub dim: u8,
    pub nx: usize,
    pub ny: usize,
    pub hx: f64,
    pub hy: f64,
}

impl GridSpec {
    pub fn build(&self) -> Result<Grid, ConfigError> {
        Grid::from_parts(self.dim, self.nx, self.ny, self.hx, self.hy).map_err(|e| ConfigError::Invalid(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputSpec {
    pub dir: PathBuf,
    /// Write a snapshot every `step.record_every` steps.
    pub snapshots: bool,
    /// Tolerance on `phi^2 - 1` before a warning is printed.
    pub tol_phase: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub theta_min: f64,
    pub theta_max: f64,
    pub n_theta: usize,
    pub p_min: f64,
    pub p_max: f64,
    pub n_p: usize,
    pub vs2: f64,
    pub vn2: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaugeSpec {
    /// `chi = amp cos(2 pi mode_x x / Lx) cos(pi mode_y y / Ly)`.
    pub amp: f64,
    pub mode_x: f64,
    pub mode_y: f64,
    pub steps: u64,
    pub tol: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub params: ModelParams,
    pub grid: GridSpec,
    pub step: StepConfig,
    pub init: InitSpec,
    pub output: OutputSpec,
    pub sweep: SweepSpec,
    pub gauge: GaugeSpec,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            params: ModelParams { nu: 0.5, ..Default::default() },
            grid: GridSpec { dim: 1, nx: 64, ny: 1, hx: 0.125, hy: 0.125 },
            step: StepConfig { dt: 2e-3, t_end: 0.2, ..Default::default() },
            init: InitSpec::Profile {
                base: UniformInit { phi: 0.4, theta: 1.5, ..Default::default() },
                profile: Profile::RandomSmooth(RandomSmooth { amp_vs: 0.1, amp_vn: 0.05, ..Default::default() }),
            },
            output: OutputSpec { dir: PathBuf::from("out"), snapshots: true, tol_phase: 1e-6 },
            sweep: SweepSpec { theta_min: 0.5, theta_max: 3.0, n_theta: 200, p_min: 0.0, p_max: 3.0, n_p: 50, vs2: 0.0, vn2: 0.0 },
            gauge: GaugeSpec { amp: 0.3, mode_x: 1.0, mode_y: 0.0, steps: 100, tol: 1e-9 },
        }
    }
}

/// One section being read; remembers which keys were consumed.
struct Section<'a> {
    name: &'a str,
    table: Option<&'a Table>,
    used: BTreeSet<&'a str>,
}

impl<'a> Section<'a> {
    fn new(root: &'a Table, name: &'a str) -> Result<Self, ConfigError> {
        let table = match root.get(name) {
            None => None,
            Some(Value::Table(t)) => Some(t),
            Some(_) => return Err(ConfigError::Type { key: name.to_string(), expected: "a table" }),
        };
        Ok(Self { name, table, used: BTreeSet::new() })
    }

    fn key(&self, k: &str) -> String {
        format!("{}.{k}", self.name)
    }

    fn get(&mut self, k: &'a str) -> Option<&'a Value> {
        let v = self.table?.get(k)?;
        self.used.insert(k);
        Some(v)
    }

    fn f64(&mut self, k: &'a str, default: f64) -> Result<f64, ConfigError> {
        match self.get(k) {
            None => Ok(default),
            Some(Value::Float(x)) => Ok(*x),
            Some(Value::Integer(i)) => Ok(*i as f64),
            Some(_) => Err(ConfigError::Type { key: self.key(k), expected: "a number" }),
        }
    }

    fn usize(&mut self, k: &'a str, default: usize) -> Result<usize, ConfigError> {
        match self.get(k) {
            None => Ok(default),
            Some(Value::Integer(i)) if *i >= 0 => Ok(*i as usize),
            Some(_) => Err(ConfigError::Type { key: self.key(k), expected: "a nonnegative integer" }),
        }
    }

    fn bool(&mut self, k: &'a str, default: bool) -> Result<bool, ConfigError> {
        match self.get(k) {
            None => Ok(default),
            Some(Value::Boolean(b)) => Ok(*b),
            Some(_) => Err(ConfigError::Type { key: self.key(k), expected: "true or false" }),
        }
    }

    fn str(&mut self, k: &'a str) -> Result<Option<&'a str>, ConfigError> {
        match self.get(k) {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(s.as_str())),
            Some(_) => Err(ConfigError::Type { key: self.key(k), expected: "a string" }),
        }
    }

    /// A 3-vector, or a number taken as the x component.
    fn vec3(&mut self, k: &'a str, default: [f64; 3]) -> Result<[f64; 3], ConfigError> {
        let num = |v: &Value| match v {
            Value::Float(x) => Some(*x),
            Value::Integer(i) => Some(*i as f64),
            _ => None,
        };
        match self.get(k) {
            None => Ok(default),
            Some(Value::Array(a)) if a.len() == 3 => {
                let xs: Option<Vec<f64>> = a.iter().map(num).collect();
                xs.map(|x| [x[0], x[1], x[2]]).ok_or(ConfigError::Type { key: self.key(k), expected: "three numbers" })
            }
            Some(v) => num(v).map(|x| [x, 0.0, 0.0]).ok_or(ConfigError::Type { key: self.key(k), expected: "three numbers" }),
        }
    }

    fn unknown(&self, out: &mut Vec<String>) {
        if let Some(t) = self.table {
            out.extend(t.keys().filter(|k| !self.used.contains(k.as_str())).map(|k| self.key(k)));
        }
    }
}

const SECTIONS: [&str; 7] = ["params", "grid", "step", "init", "output", "sweep", "gauge"];

impl Config {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        let mut cfg = Self::parse(&text)?;
        // snapshot paths are relative to the config file
        if let InitSpec::Snapshot(p) = &mut cfg.init {
            if p.is_relative() {
                if let Some(dir) = path.parent() {
                    *p = dir.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let root: Table = text.parse()?;
        let d = Config::default();
        let mut unknown: Vec<String> = root.keys().filter(|k| !SECTIONS.contains(&k.as_str())).cloned().collect();

        let mut s = Section::new(&root, "params")?;
        let params = ModelParams {
            tau: s.f64("tau", d.params.tau)?,
            kappa: s.f64("kappa", d.params.kappa)?,
            nu: s.f64("nu", d.params.nu)?,
            lambda: s.f64("lambda", d.params.lambda)?,
            theta_lambda: s.f64("theta_lambda", d.params.theta_lambda)?,
            c0: s.f64("c0", d.params.c0)?,
            k0_const: s.f64("k0_const", d.params.k0_const)?,
            k0_slope: s.f64("k0_slope", d.params.k0_slope)?,
            eps_reg: s.f64("eps_reg", d.params.eps_reg)?,
            g: BodyForce::Uniform(s.vec3("g", [0.0; 3])?),
            r: HeatSupply::Uniform(s.f64("r", 0.0)?),
            omega_bc: s.f64("omega_bc", d.params.omega_bc)?,
        };
        s.unknown(&mut unknown);

        let mut s = Section::new(&root, "grid")?;
        let dim = s.usize("dim", d.grid.dim as usize)?;
        let nx = s.usize("nx", d.grid.nx)?;
        let hx = s.f64("hx", d.grid.hx)?;
        let grid = GridSpec {
            dim: u8::try_from(dim).unwrap_or(u8::MAX),
            nx,
            ny: s.usize("ny", if dim == 2 { nx } else { 1 })?,
            hx,
            hy: s.f64("hy", hx)?,
        };
        s.unknown(&mut unknown);

        let mut s = Section::new(&root, "step")?;
        let mode = match s.str("material_derivative")? {
            None | Some("advective") => MaterialDerivative::Advective,
            Some("partial") => MaterialDerivative::Partial,
            Some(_) => return Err(ConfigError::Type { key: s.key("material_derivative"), expected: "\"advective\" or \"partial\"" }),
        };
        let step = StepConfig {
            dt: s.f64("dt", d.step.dt)?,
            t_end: s.f64("t_end", d.step.t_end)?,
            projection_tol: s.f64("projection_tol", d.step.projection_tol)?,
            material_derivative: mode,
            record_every: s.usize("record_every", d.step.record_every)?,
            eps_mass: s.f64("eps_mass", d.step.eps_mass)?,
            max_projection_iter: s.usize("max_projection_iter", d.step.max_projection_iter)?,
            pins: Pins {
                theta: s.bool("pin_theta", false)?,
                rho: s.bool("pin_rho", false)?,
                velocities: s.bool("pin_velocities", false)?,
            },
        };
        s.unknown(&mut unknown);

        let mut s = Section::new(&root, "init")?;
        let init = parse_init(&mut s, &d)?;
        s.unknown(&mut unknown);

        let mut s = Section::new(&root, "output")?;
        let output = OutputSpec {
            dir: s.str("dir")?.map_or(d.output.dir.clone(), PathBuf::from),
            snapshots: s.bool("snapshots", d.output.snapshots)?,
            tol_phase: s.f64("tol_phase", d.output.tol_phase)?,
        };
        s.unknown(&mut unknown);

        let mut s = Section::new(&root, "sweep")?;
        let w = &d.sweep;
        let sweep = SweepSpec {
            theta_min: s.f64("theta_min", w.theta_min)?,
            theta_max: s.f64("theta_max", w.theta_max)?,
            n_theta: s.usize("n_theta", w.n_theta)?,
            p_min: s.f64("p_min", w.p_min)?,
            p_max: s.f64("p_max", w.p_max)?,
            n_p: s.usize("n_p", w.n_p)?,
            vs2: s.f64("vs2", w.vs2)?,
            vn2: s.f64("vn2", w.vn2)?,
        };
        s.unknown(&mut unknown);

        let mut s = Section::new(&root, "gauge")?;
        let gauge = GaugeSpec {
            amp: s.f64("amp", d.gauge.amp)?,
            mode_x: s.f64("mode_x", d.gauge.mode_x)?,
            mode_y: s.f64("mode_y", d.gauge.mode_y)?,
            steps: s.usize("steps", d.gauge.steps as usize)? as u64,
            tol: s.f64("tol", d.gauge.tol)?,
        };
        s.unknown(&mut unknown);

        if !unknown.is_empty() {
            return Err(ConfigError::UnknownKeys(unknown));
        }
        let cfg = Config { params, grid, step, init, output, sweep, gauge };
        cfg.step.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(cfg)
    }
}

fn parse_init<'a>(s: &mut Section<'a>, d: &Config) -> Result<InitSpec, ConfigError> {
    let (d_base, d_profile) = match &d.init {
        InitSpec::Profile { base, profile } => (*base, *profile),
        _ => unreachable!("default init is a profile"),
    };
    let u = UniformInit::default();
    let base = UniformInit {
        phi: s.f64("phi", d_base.phi)?,
        v_s: s.vec3("v_s", u.v_s)?,
        v_n: s.vec3("v_n", u.v_n)?,
        p: s.f64("p", u.p)?,
        rho: s.f64("rho", u.rho)?,
        theta: s.f64("theta", d_base.theta)?,
    };
    let kind = s.str("kind")?.unwrap_or("profile");
    match kind {
        "uniform" => Ok(InitSpec::Uniform(base)),
        "snapshot" => {
            let path = s.str("path")?.ok_or_else(|| ConfigError::Invalid("init.kind = \"snapshot\" needs init.path".into()))?;
            Ok(InitSpec::Snapshot(PathBuf::from(path)))
        }
        "profile" => {
            let profile = match s.str("profile")? {
                None => d_profile,
                Some(name) => Profile::from_name(name).map_err(|e| ConfigError::Invalid(e.to_string()))?,
            };
            let profile = match profile {
                Profile::RandomSmooth(r) => Profile::RandomSmooth(RandomSmooth {
                    seed: s.usize("seed", r.seed as usize)? as u64,
                    modes: s.usize("modes", r.modes)?,
                    amp_phi: s.f64("amp_phi", r.amp_phi)?,
                    amp_theta: s.f64("amp_theta", r.amp_theta)?,
                    amp_rho: s.f64("amp_rho", r.amp_rho)?,
                    amp_vs: s.f64("amp_vs", r.amp_vs)?,
                    amp_vn: s.f64("amp_vn", r.amp_vn)?,
                }),
                Profile::TanhInterface { center, width, low, high } => Profile::TanhInterface {
                    center: s.f64("center", center)?,
                    width: s.f64("width", width)?,
                    low: s.f64("low", low)?,
                    high: s.f64("high", high)?,
                },
            };
            Ok(InitSpec::Profile { base, profile })
        }
        _ => Err(ConfigError::Type { key: s.key("kind"), expected: "\"uniform\", \"profile\" or \"snapshot\"" }),
    }
}
