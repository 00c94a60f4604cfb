//! Sectioned `key = value` run configuration.
//!
//! ```text
//! # comment
//! [noise]
//! kind = ou
//! mu = 1.0
//! gamma = 1.5
//! sigma2 = 0.3
//!
//! [system]
//! h0 = [0+0j, 0+0j, 0+0j, 0+0j]
//! v = [1+0j, 0+0j, 0+0j, -1+0j]
//! psi0 = [1+0j, 1+0j]
//! ```
//!
//! Matrices are row-major lists of `re+imj` entries whose length is a
//! perfect square. Unknown sections or keys are errors.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use dheom_core::hierarchy::{DepthMode, SolverConfig, TruncationPolicy};
use dheom_core::montecarlo::{BoundaryMode, McConfig};
use dheom_core::processes::{ProcessKind, ProcessSpec};
use dheom_core::quantum::{ComplexMatrix, DensityMatrix, QuantumError};
use dheom_core::rydberg::{self, RydbergConfig};
use num_complex::Complex64;
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("{0}")]
    Validation(String),
    #[error("missing required key `{key}` in [{section}]")]
    Missing {
        section: &'static str,
        key: &'static str,
    },
    #[error("invalid [system]: {0}")]
    Operator(#[from] QuantumError),
}

impl ConfigError {
    pub fn code(&self) -> &'static str {
        match self {
            Self::Io { .. } => "IoError",
            Self::Parse { .. } => "ParseError",
            Self::Validation(_) | Self::Missing { .. } => "ValidationError",
            Self::Operator(_) => "InvalidOperator",
        }
    }
}

/// Keys accepted in each section.
const SCHEMA: &[(&str, &[&str])] = &[
    ("system", &["h0", "v", "rho0", "psi0"]),
    (
        "noise",
        &[
            "kind",
            "mu",
            "gamma",
            "sigma2",
            "c0",
            "c1",
            "omega1",
            "omega2",
            "c",
            "allow_unsound_truncation",
        ],
    ),
    ("time", &["t_end", "points", "t_grid", "dt"]),
    ("truncation", &["depth", "kappa", "tolerance", "max_depth"]),
    (
        "montecarlo",
        &["trajectories", "dt_sde", "seed", "boundary"],
    ),
    (
        "rydberg",
        &[
            "j0",
            "interaction_time",
            "detunings",
            "delta_min",
            "delta_max",
            "delta_points",
            "coherent_mu",
        ],
    ),
];

/// Documented defaults, shown by `--help`.
pub const SCHEMA_HELP: &str = "\
Configuration file (sections and keys; defaults in parentheses):
  [system]      h0, v: row-major complex matrices `re+imj`; rho0 (|0><0|) or psi0
  [noise]       kind = ou | sr | jacobi; mu, gamma;
                ou: sigma2; sr: c0, c1; jacobi: omega1, omega2, c;
                allow_unsound_truncation (false)
  [time]        t_end (1.0), points (101) or t_grid = [..]; dt (0.001)
  [truncation]  depth = auto | N (auto), kappa (10), tolerance (1e-6), max_depth (512)
  [montecarlo]  trajectories (500), dt_sde (1e-4), seed (0), boundary = reflect | clamp (reflect)
  [rydberg]     j0 (0.5), interaction_time (1.0), coherent_mu (1.0),
                delta_min (-3), delta_max (3), delta_points (121) or detunings = [..]";

#[derive(Debug, Clone, PartialEq)]
pub struct SystemSection {
    pub h0: ComplexMatrix,
    pub v: ComplexMatrix,
    pub rho0: DensityMatrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloSection {
    pub trajectories: usize,
    pub dt_sde: f64,
    pub seed: u64,
    pub boundary: BoundaryMode,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RydbergSection {
    pub j0: f64,
    pub interaction_time: f64,
    pub detunings: Vec<f64>,
    pub coherent_mu: f64,
}

/// A fully resolved run configuration: every absent key carries its default.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub system: Option<SystemSection>,
    pub noise: Option<ProcessSpec>,
    pub t_grid: Vec<f64>,
    pub dt: f64,
    pub truncation: TruncationPolicy,
    pub montecarlo: MonteCarloSection,
    pub rydberg: RydbergSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            system: None,
            noise: None,
            t_grid: uniform(0.0, 1.0, 101),
            dt: SolverConfig::DEFAULT_DT,
            truncation: TruncationPolicy::default(),
            montecarlo: MonteCarloSection {
                trajectories: McConfig::DEFAULT_TRAJECTORIES,
                dt_sde: McConfig::DEFAULT_DT_SDE,
                seed: 0,
                boundary: BoundaryMode::Reflect,
            },
            rydberg: RydbergSection {
                j0: rydberg::DEFAULT_J0,
                interaction_time: rydberg::DEFAULT_INTERACTION_TIME,
                detunings: RydbergConfig::default_detunings(),
                coherent_mu: rydberg::FIG1_MU,
            },
        }
    }
}

fn uniform(start: f64, end: f64, points: usize) -> Vec<f64> {
    if points == 1 {
        return vec![start];
    }
    (0..points)
        .map(|k| start + (end - start) * k as f64 / (points - 1) as f64)
        .collect()
}

struct Entry {
    value: String,
    line: usize,
}

type RawConfig = BTreeMap<String, BTreeMap<String, Entry>>;

fn parse_raw(text: &str) -> Result<RawConfig, ConfigError> {
    let mut raw = RawConfig::new();
    let mut section: Option<String> = None;
    for (index, full) in text.lines().enumerate() {
        let line = index + 1;
        let content = full.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let err = |message: String| ConfigError::Parse { line, message };
        if let Some(name) = content.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| err(format!("malformed section header `{content}`")))?
                .trim();
            if !SCHEMA.iter().any(|(s, _)| *s == name) {
                return Err(err(format!("unknown section [{name}]")));
            }
            if raw.contains_key(name) {
                return Err(err(format!("duplicate section [{name}]")));
            }
            raw.insert(name.to_string(), BTreeMap::new());
            section = Some(name.to_string());
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| err(format!("expected `key = value`, got `{content}`")))?;
        let (key, value) = (key.trim(), value.trim());
        let current = section
            .as_deref()
            .ok_or_else(|| err(format!("key `{key}` appears before any [section]")))?;
        let allowed = SCHEMA
            .iter()
            .find(|(s, _)| *s == current)
            .expect("known section")
            .1;
        if !allowed.contains(&key) {
            return Err(err(format!("unknown key `{key}` in [{current}]")));
        }
        if value.is_empty() {
            return Err(err(format!("key `{key}` has no value")));
        }
        let entries = raw.get_mut(current).expect("section inserted");
        if entries.contains_key(key) {
            return Err(err(format!("duplicate key `{key}` in [{current}]")));
        }
        entries.insert(
            key.to_string(),
            Entry {
                value: value.to_string(),
                line,
            },
        );
    }
    Ok(raw)
}

/// Parses `re`, `imj`, `re+imj` or `re-imj`.
pub fn parse_complex(s: &str) -> Option<Complex64> {
    let s = s.trim();
    let Some(body) = s.strip_suffix('j') else {
        return s.parse::<f64>().ok().map(|re| Complex64::new(re, 0.0));
    };
    let imaginary = |t: &str| t.trim().trim_start_matches('+').parse::<f64>().ok();
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&i| (bytes[i] == b'+' || bytes[i] == b'-') && !matches!(bytes[i - 1], b'e' | b'E'));
    match split {
        Some(split) => {
            let re = body[..split].trim().parse::<f64>().ok()?;
            Some(Complex64::new(re, imaginary(&body[split..])?))
        }
        None => Some(Complex64::new(0.0, imaginary(body)?)),
    }
}

fn format_complex(z: Complex64) -> String {
    let sign = if z.im.is_sign_negative() { '-' } else { '+' };
    format!("{:?}{sign}{:?}j", z.re, z.im.abs())
}

fn format_list<T, F: Fn(&T) -> String>(items: &[T], f: F) -> String {
    let parts: Vec<String> = items.iter().map(f).collect();
    format!("[{}]", parts.join(", "))
}

/// Typed access to one section.
struct Section<'a> {
    name: &'static str,
    entries: Option<&'a BTreeMap<String, Entry>>,
}

impl<'a> Section<'a> {
    fn new(raw: &'a RawConfig, name: &'static str) -> Self {
        Self {
            name,
            entries: raw.get(name),
        }
    }

    fn present(&self) -> bool {
        self.entries.is_some()
    }

    fn entry(&self, key: &str) -> Option<&'a Entry> {
        self.entries.and_then(|e| e.get(key))
    }

    fn has(&self, key: &str) -> bool {
        self.entry(key).is_some()
    }

    fn parse<T>(
        &self,
        key: &str,
        what: &str,
        f: impl Fn(&str) -> Option<T>,
    ) -> Result<Option<T>, ConfigError> {
        self.entry(key)
            .map(|e| {
                f(&e.value).ok_or_else(|| ConfigError::Parse {
                    line: e.line,
                    message: format!("`{key}` expects {what}, got `{}`", e.value),
                })
            })
            .transpose()
    }

    fn f64(&self, key: &str) -> Result<Option<f64>, ConfigError> {
        self.parse(key, "a number", |s| s.parse().ok())
    }

    fn require_f64(&self, key: &'static str) -> Result<f64, ConfigError> {
        self.f64(key)?.ok_or(ConfigError::Missing {
            section: self.name,
            key,
        })
    }

    fn usize(&self, key: &str) -> Result<Option<usize>, ConfigError> {
        self.parse(key, "a non-negative integer", |s| s.parse().ok())
    }

    fn list(&self, key: &str) -> Result<Option<Vec<Complex64>>, ConfigError> {
        self.parse(key, "a list of `re+imj` entries", |s| {
            let inner = s.trim().strip_prefix('[').unwrap_or(s).trim_end();
            let inner = inner.strip_suffix(']').unwrap_or(inner);
            inner.split([',', ';']).map(parse_complex).collect()
        })
    }

    fn real_list(&self, key: &str) -> Result<Option<Vec<f64>>, ConfigError> {
        let Some(values) = self.list(key)? else {
            return Ok(None);
        };
        if values.iter().any(|z| z.im != 0.0) {
            return Err(self.invalid(key, "expects real numbers"));
        }
        Ok(Some(values.iter().map(|z| z.re).collect()))
    }

    fn matrix(&self, key: &str) -> Result<Option<ComplexMatrix>, ConfigError> {
        let Some(values) = self.list(key)? else {
            return Ok(None);
        };
        let d = (values.len() as f64).sqrt().round() as usize;
        if d == 0 || d * d != values.len() {
            return Err(self.invalid(
                key,
                &format!("has {} entries, not a square matrix", values.len()),
            ));
        }
        Ok(Some(ComplexMatrix::from_row_slice(d, d, &values)))
    }

    fn invalid(&self, key: &str, message: &str) -> ConfigError {
        let line = self.entry(key).map_or(0, |e| e.line);
        ConfigError::Parse {
            line,
            message: format!("`{key}` {message}"),
        }
    }
}

fn parse_system(s: &Section) -> Result<Option<SystemSection>, ConfigError> {
    if !s.present() {
        return Ok(None);
    }
    let h0 = s.matrix("h0")?.ok_or(ConfigError::Missing {
        section: "system",
        key: "h0",
    })?;
    let v = s.matrix("v")?.ok_or(ConfigError::Missing {
        section: "system",
        key: "v",
    })?;
    let d = h0.nrows();
    let rho0 = match (s.matrix("rho0")?, s.list("psi0")?) {
        (Some(_), Some(_)) => return Err(s.invalid("psi0", "conflicts with rho0")),
        (Some(m), None) => DensityMatrix::new(m)?,
        (None, Some(psi)) => DensityMatrix::pure(&psi)?,
        (None, None) => DensityMatrix::basis(d, 0),
    };
    Ok(Some(SystemSection { h0, v, rho0 }))
}

fn parse_noise(s: &Section) -> Result<Option<ProcessSpec>, ConfigError> {
    if !s.present() {
        return Ok(None);
    }
    let kind = s.entry("kind").ok_or(ConfigError::Missing {
        section: "noise",
        key: "kind",
    })?;
    let (kind_keys, build): (&[&str], fn(&Section) -> Result<ProcessKind, ConfigError>) =
        match kind.value.as_str() {
            "ou" => (&["sigma2"], |s| {
                Ok(ProcessKind::OrnsteinUhlenbeck {
                    sigma2: s.require_f64("sigma2")?,
                })
            }),
            "sr" => (&["c0", "c1"], |s| {
                Ok(ProcessKind::SquareRoot {
                    c0: s.require_f64("c0")?,
                    c1: s.require_f64("c1")?,
                })
            }),
            "jacobi" => (&["omega1", "omega2", "c"], |s| {
                Ok(ProcessKind::Jacobi {
                    omega1: s.require_f64("omega1")?,
                    omega2: s.require_f64("omega2")?,
                    c: s.require_f64("c")?,
                })
            }),
            other => {
                return Err(ConfigError::Parse {
                    line: kind.line,
                    message: format!("unknown noise kind `{other}` (expected ou, sr or jacobi)"),
                })
            }
        };
    for key in ["sigma2", "c0", "c1", "omega1", "omega2", "c"] {
        if s.has(key) && !kind_keys.contains(&key) {
            return Err(s.invalid(key, &format!("does not apply to kind = {}", kind.value)));
        }
    }
    let allow = s
        .parse("allow_unsound_truncation", "true or false", |v| {
            v.parse::<bool>().ok()
        })?
        .unwrap_or(false);
    Ok(Some(ProcessSpec {
        mu: s.require_f64("mu")?,
        gamma: s.require_f64("gamma")?,
        kind: build(s)?,
        allow_unsound_truncation: allow,
    }))
}

/// Parses configuration text. Noise parameters are checked later, by
/// [`RunConfig::validate_noise`], so that command-line overrides apply first.
pub fn parse_str(text: &str) -> Result<RunConfig, ConfigError> {
    let raw = parse_raw(text)?;
    let mut config = RunConfig::default();
    config.system = parse_system(&Section::new(&raw, "system"))?;
    config.noise = parse_noise(&Section::new(&raw, "noise"))?;

    let time = Section::new(&raw, "time");
    if let Some(grid) = time.real_list("t_grid")? {
        if time.has("t_end") || time.has("points") {
            return Err(time.invalid("t_grid", "conflicts with t_end/points"));
        }
        config.t_grid = grid;
    } else {
        let t_end = time.f64("t_end")?.unwrap_or(1.0);
        let points = time.usize("points")?.unwrap_or(101);
        if points < 2 {
            return Err(time.invalid("points", "must be at least 2"));
        }
        config.t_grid = uniform(0.0, t_end, points);
    }
    if let Some(dt) = time.f64("dt")? {
        config.dt = dt;
    }

    let trunc = Section::new(&raw, "truncation");
    if let Some(mode) = trunc.parse("depth", "`auto` or a positive integer", parse_depth)? {
        config.truncation.mode = mode;
    }
    if let Some(kappa) = trunc.f64("kappa")? {
        config.truncation.kappa = kappa;
    }
    if let Some(tol) = trunc.f64("tolerance")? {
        config.truncation.convergence_tol = tol;
    }
    if let Some(cap) = trunc.usize("max_depth")? {
        config.truncation.max_depth = cap;
    }

    let mc = Section::new(&raw, "montecarlo");
    if let Some(m) = mc.usize("trajectories")? {
        config.montecarlo.trajectories = m;
    }
    if let Some(dt) = mc.f64("dt_sde")? {
        config.montecarlo.dt_sde = dt;
    }
    if let Some(seed) = mc.parse("seed", "an unsigned 64-bit integer", |v| {
        v.parse::<u64>().ok()
    })? {
        config.montecarlo.seed = seed;
    }
    if let Some(mode) = mc.parse("boundary", "`reflect` or `clamp`", parse_boundary)? {
        config.montecarlo.boundary = mode;
    }

    let ryd = Section::new(&raw, "rydberg");
    if let Some(j0) = ryd.f64("j0")? {
        config.rydberg.j0 = j0;
    }
    if let Some(t) = ryd.f64("interaction_time")? {
        config.rydberg.interaction_time = t;
    }
    if let Some(mu) = ryd.f64("coherent_mu")? {
        config.rydberg.coherent_mu = mu;
    }
    if let Some(list) = ryd.real_list("detunings")? {
        if ryd.has("delta_min") || ryd.has("delta_max") || ryd.has("delta_points") {
            return Err(ryd.invalid(
                "detunings",
                "conflicts with delta_min/delta_max/delta_points",
            ));
        }
        config.rydberg.detunings = list;
    } else if ryd.has("delta_min") || ryd.has("delta_max") || ryd.has("delta_points") {
        let lo = ryd.f64("delta_min")?.unwrap_or(-3.0);
        let hi = ryd.f64("delta_max")?.unwrap_or(3.0);
        let n = ryd.usize("delta_points")?.unwrap_or(121);
        if n == 0 {
            return Err(ryd.invalid("delta_points", "must be positive"));
        }
        config.rydberg.detunings = uniform(lo, hi, n);
    }
    Ok(config)
}

pub fn parse_depth(s: &str) -> Option<DepthMode> {
    match s {
        "auto" => Some(DepthMode::Auto),
        n => n
            .parse::<usize>()
            .ok()
            .filter(|&n| n >= 1)
            .map(DepthMode::Fixed),
    }
}

fn parse_boundary(s: &str) -> Option<BoundaryMode> {
    match s {
        "reflect" => Some(BoundaryMode::Reflect),
        "clamp" => Some(BoundaryMode::Clamp),
        _ => None,
    }
}

pub fn parse_file(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    parse_str(&text)
}

impl RunConfig {
    /// Checks the noise parameters.
    pub fn validate_noise(&self) -> Result<(), dheom_core::processes::ProcessError> {
        self.noise.as_ref().map_or(Ok(()), ProcessSpec::validate)
    }

    /// Canonical text: every section and key in a fixed order with the
    /// resolved values, floats in shortest round-trip form.
    pub fn canonical(&self) -> String {
        let mut out = String::new();
        let f = |x: &f64| format!("{x:?}");
        if let Some(p) = &self.noise {
            out.push_str("[noise]\n");
            let kind = p.kind.name();
            let _ = writeln!(out, "kind = {kind}\nmu = {:?}\ngamma = {:?}", p.mu, p.gamma);
            match p.kind {
                ProcessKind::OrnsteinUhlenbeck { sigma2 } => {
                    let _ = writeln!(out, "sigma2 = {sigma2:?}");
                }
                ProcessKind::SquareRoot { c0, c1 } => {
                    let _ = writeln!(out, "c0 = {c0:?}\nc1 = {c1:?}");
                }
                ProcessKind::Jacobi { omega1, omega2, c } => {
                    let _ = writeln!(out, "omega1 = {omega1:?}\nomega2 = {omega2:?}\nc = {c:?}");
                }
            }
            let _ = writeln!(
                out,
                "allow_unsound_truncation = {}\n",
                p.allow_unsound_truncation
            );
        }
        if let Some(s) = &self.system {
            let matrix = |m: &ComplexMatrix| {
                let row_major: Vec<Complex64> = m.transpose().iter().copied().collect();
                format_list(&row_major, |z| format_complex(*z))
            };
            let _ = writeln!(
                out,
                "[system]\nh0 = {}\nv = {}\nrho0 = {}\n",
                matrix(&s.h0),
                matrix(&s.v),
                matrix(s.rho0.matrix())
            );
        }
        let _ = writeln!(
            out,
            "[time]\nt_grid = {}\ndt = {:?}\n",
            format_list(&self.t_grid, f),
            self.dt
        );
        let depth = match self.truncation.mode {
            DepthMode::Auto => "auto".to_string(),
            DepthMode::Fixed(n) => n.to_string(),
        };
        let _ = writeln!(
            out,
            "[truncation]\ndepth = {depth}\nkappa = {:?}\ntolerance = {:?}\nmax_depth = {}\n",
            self.truncation.kappa, self.truncation.convergence_tol, self.truncation.max_depth
        );
        let mc = &self.montecarlo;
        let boundary = match mc.boundary {
            BoundaryMode::Reflect => "reflect",
            BoundaryMode::Clamp => "clamp",
        };
        let _ = writeln!(
            out,
            "[montecarlo]\ntrajectories = {}\ndt_sde = {:?}\nseed = {}\nboundary = {boundary}\n",
            mc.trajectories, mc.dt_sde, mc.seed
        );
        let r = &self.rydberg;
        let _ = write!(
            out,
            "[rydberg]\nj0 = {:?}\ninteraction_time = {:?}\ndetunings = {}\ncoherent_mu = {:?}\n",
            r.j0,
            r.interaction_time,
            format_list(&r.detunings, f),
            r.coherent_mu
        );
        out
    }

    /// SHA-256 of the canonical text, hex encoded.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical().as_bytes()))
    }

    /// Solver configuration; requires `[system]` and `[noise]`.
    pub fn solver_config(&self) -> Result<SolverConfig, ConfigError> {
        let system = self.system.as_ref().ok_or(ConfigError::Validation(
            "this command needs a [system] section".into(),
        ))?;
        let noise = self.noise.ok_or(ConfigError::Validation(
            "this command needs a [noise] section".into(),
        ))?;
        let mut config = SolverConfig::new(
            system.h0.clone(),
            system.v.clone(),
            noise,
            system.rho0.clone(),
            self.t_grid.clone(),
        );
        config.dt = self.dt;
        config.truncation = self.truncation;
        Ok(config)
    }

    pub fn mc_config(&self) -> Result<McConfig, ConfigError> {
        Ok(McConfig {
            solver: self.solver_config()?,
            trajectories: self.montecarlo.trajectories,
            dt_sde: self.montecarlo.dt_sde,
            seed: self.montecarlo.seed,
            boundary_mode: self.montecarlo.boundary,
        })
    }

    /// Sweep configuration; `noise` defaults to the `[noise]` section.
    pub fn rydberg_config(&self) -> RydbergConfig {
        let r = &self.rydberg;
        RydbergConfig {
            j0: r.j0,
            interaction_time: r.interaction_time,
            detunings: r.detunings.clone(),
            noise: self.noise,
            coherent_mu: r.coherent_mu,
            dt: self.dt,
            truncation: self.truncation,
            trajectories: self.montecarlo.trajectories,
            dt_sde: self.montecarlo.dt_sde,
            seed: self.montecarlo.seed,
            boundary_mode: self.montecarlo.boundary,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complex_entries() {
        assert_eq!(parse_complex("1+2j"), Some(Complex64::new(1.0, 2.0)));
        assert_eq!(
            parse_complex("-0.5-1e-3j"),
            Some(Complex64::new(-0.5, -1e-3))
        );
        assert_eq!(
            parse_complex("1e-3+2.5E+2j"),
            Some(Complex64::new(1e-3, 250.0))
        );
        assert_eq!(parse_complex(" 3 "), Some(Complex64::new(3.0, 0.0)));
        assert_eq!(parse_complex("abc"), None);
        assert_eq!(parse_complex("1+j"), None);
        assert_eq!(parse_complex("-2j"), Some(Complex64::new(0.0, -2.0)));
        for z in [Complex64::new(0.1, -0.0), Complex64::new(-2.5e-17, 3.0)] {
            let back = parse_complex(&format_complex(z)).unwrap();
            assert_eq!(back, z);
            assert_eq!(back.im.is_sign_negative(), z.im.is_sign_negative());
        }
    }

    #[test]
    fn unknown_keys_report_their_line() {
        let err = parse_str("[noise]\nkind = ou\n\nsigma = 0.3\n").unwrap_err();
        assert!(matches!(err, ConfigError::Parse { line: 4, .. }), "{err}");
        let err = parse_str("[nosie]\n").unwrap_err();
        assert!(matches!(err, ConfigError::Parse { line: 1, .. }));
        let err = parse_str("mu = 1\n").unwrap_err();
        assert!(matches!(err, ConfigError::Parse { line: 1, .. }));
    }

    #[test]
    fn missing_sigma2_is_named() {
        let err = parse_str("[noise]\nkind = ou\nmu = 1\ngamma = 1.5\n").unwrap_err();
        assert_eq!(err.code(), "ValidationError");
        assert!(err.to_string().contains("sigma2"));
    }

    #[test]
    fn foreign_keys_for_a_kind_are_rejected() {
        let err =
            parse_str("[noise]\nkind = sr\nmu = 1\ngamma = 1.5\nc0 = 0\nc1 = 1\nsigma2 = 0.3\n")
                .unwrap_err();
        assert!(matches!(err, ConfigError::Parse { line: 7, .. }), "{err}");
    }

    #[test]
    fn canonical_form_round_trips() {
        let text = "[system]\nh0 = [0.5+0j, 0.1-0.2j; 0.1+0.2j, -0.5+0j]\nv = [0, 1, 1, 0]\npsi0 = [1, 1j]\n\
                    [noise]\nkind = jacobi\nmu = 1\ngamma = 1.5\nomega1 = 0.125\nomega2 = 8\nc = 1\n\
                    [time]\nt_end = 2\npoints = 5\n[truncation]\ndepth = 12\n";
        let config = parse_str(text).unwrap();
        let again = parse_str(&config.canonical()).unwrap();
        assert_eq!(config, again);
        assert_eq!(config.hash(), again.hash());
        assert_eq!(config.t_grid, vec![0.0, 0.5, 1.0, 1.5, 2.0]);
        assert_eq!(config.truncation.mode, DepthMode::Fixed(12));
    }

    #[test]
    fn hash_tracks_content() {
        let a = parse_str("[montecarlo]\nseed = 1\n").unwrap();
        let b = parse_str("[montecarlo]\nseed = 2\n").unwrap();
        assert_ne!(a.hash(), b.hash());
        assert_eq!(
            a.hash(),
            parse_str("# same\n[montecarlo]\nseed=1").unwrap().hash()
        );
    }

    #[test]
    fn matrix_shape_is_checked() {
        let err = parse_str("[system]\nh0 = [1, 2, 3]\nv = [1]\n").unwrap_err();
        assert!(matches!(err, ConfigError::Parse { line: 2, .. }));
    }
}
