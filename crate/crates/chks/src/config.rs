//! Run configuration: flat `key = value` entries inside named sections,
//! parsed with exhaustive error collection (every defect is reported, not
//! just the first), validated against the model invariants, and serializable
//! back to text for the round trip `parse(serialize(c)) == c`.
//!
//! ```text
//! [grid]
//! nx = 64
//! ny = 64
//! lx = 16.0
//! ly = 16.0
//!
//! [model]
//! chi = 0.5
//! lambda = 1.5
//! potential = flory_huggins      # or double_obstacle_smoothed | tabulated <file>
//! yosida_eps = 1e-4
//! h = saturating 0.5 1.5 1.0     # lo hi scale
//! k = constant 0.4
//!
//! [time]
//! dt = 0.01
//! t_end = 10.0
//! stride = 100
//! stepper = standard             # or entropic
//!
//! [init]
//! mode = sampler                 # or files
//! seed = 42
//! m = 0.1
//! radius = 6.0
//! sigma_floor = 0.05
//! # phi = phi0.chks              # files mode
//! # sigma = sigma0.chks
//!
//! [output]
//! dir = out
//! csv = true
//! snapshots = true
//!
//! [ensemble]
//! n_samples = 8
//! ```

use std::collections::BTreeMap;
use std::path::PathBuf;

use crate::attractor::{EnsembleSpec, StepperKind};
use crate::error::{ConfigError, Error, Result};
use crate::grid::Grid;
use crate::potential::{CoeffSpec, PotentialKind, PotentialSpec};
use crate::stepper::ModelParams;

#[derive(Debug, Clone, PartialEq)]
pub enum InitConfig {
    Sampler {
        seed: u64,
        m: f64,
        radius: f64,
        sigma_floor: f64,
    },
    Files {
        phi: PathBuf,
        sigma: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PotentialChoice {
    FloryHuggins,
    DoubleObstacleSmoothed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
    pub chi: f64,
    pub lambda: f64,
    pub potential: PotentialChoice,
    /// path of the tabulated beta samples, when given; overrides `potential`
    pub potential_table: Option<PathBuf>,
    pub yosida_eps: f64,
    pub h: CoeffSpec,
    pub k: CoeffSpec,
    pub solver_tol: f64,
    pub max_newton: usize,
    pub dt: f64,
    pub t_end: f64,
    pub stride: usize,
    pub stepper: StepperKind,
    pub init: InitConfig,
    pub out_dir: PathBuf,
    pub csv: bool,
    pub snapshots: bool,
    pub n_samples: usize,
    pub workers: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            nx: 64,
            ny: 64,
            lx: 16.0,
            ly: 16.0,
            chi: 0.0,
            lambda: 0.0,
            potential: PotentialChoice::FloryHuggins,
            potential_table: None,
            yosida_eps: 1e-4,
            h: CoeffSpec::Constant(1.0),
            k: CoeffSpec::Constant(0.4),
            solver_tol: 1e-10,
            max_newton: 50,
            dt: 0.01,
            t_end: 1.0,
            stride: 100,
            stepper: StepperKind::Standard,
            init: InitConfig::Sampler {
                seed: 1,
                m: 0.0,
                radius: 6.0,
                sigma_floor: 0.1,
            },
            out_dir: PathBuf::from("out"),
            csv: true,
            snapshots: true,
            n_samples: 4,
            workers: 0,
        }
    }
}

struct Collector {
    errors: Vec<ConfigError>,
}

impl Collector {
    fn push(&mut self, section: &str, key: &str, reason: impl Into<String>) {
        self.errors.push(ConfigError {
            section: section.to_string(),
            key: key.to_string(),
            reason: reason.into(),
        });
    }
}

fn parse_coeff(value: &str) -> std::result::Result<CoeffSpec, String> {
    let parts: Vec<&str> = value.split_whitespace().collect();
    match parts.as_slice() {
        ["constant", c] => {
            let c: f64 = c.parse().map_err(|_| format!("bad number '{c}'"))?;
            Ok(CoeffSpec::Constant(c))
        }
        ["saturating", lo, hi, scale] => {
            let lo: f64 = lo.parse().map_err(|_| format!("bad number '{lo}'"))?;
            let hi: f64 = hi.parse().map_err(|_| format!("bad number '{hi}'"))?;
            let scale: f64 = scale.parse().map_err(|_| format!("bad number '{scale}'"))?;
            Ok(CoeffSpec::Saturating { lo, hi, scale })
        }
        _ => Err(format!(
            "expected 'constant C' or 'saturating LO HI SCALE', got '{value}'"
        )),
    }
}

fn coeff_to_string(c: &CoeffSpec) -> String {
    match c {
        CoeffSpec::Constant(v) => format!("constant {v}"),
        CoeffSpec::Saturating { lo, hi, scale } => format!("saturating {lo} {hi} {scale}"),
    }
}

/// Parse and validate a configuration. All defects are collected into one
/// `Error::Config`.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut sections: BTreeMap<String, Vec<(String, String, usize)>> = BTreeMap::new();
    let mut col = Collector { errors: Vec::new() };
    let mut current = String::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = match raw.find('#') {
            Some(i) => &raw[..i],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        if line.starts_with('[') {
            if line.ends_with(']') {
                current = line[1..line.len() - 1].trim().to_string();
                sections.entry(current.clone()).or_default();
            } else {
                col.push(
                    "",
                    "",
                    format!("line {}: malformed section header", lineno + 1),
                );
            }
            continue;
        }
        match line.split_once('=') {
            Some((k, v)) => {
                if current.is_empty() {
                    col.push("", k.trim(), "key before any [section]");
                } else {
                    sections.entry(current.clone()).or_default().push((
                        k.trim().to_string(),
                        v.trim().to_string(),
                        lineno + 1,
                    ));
                }
            }
            None => col.push(
                &current,
                "",
                format!("line {}: expected key = value", lineno + 1),
            ),
        }
    }

    let known = ["grid", "model", "time", "init", "output", "ensemble"];
    for s in sections.keys() {
        if !known.contains(&s.as_str()) {
            col.push(s, "", "unknown section");
        }
    }

    let mut cfg = RunConfig::default();
    let mut init_mode: Option<String> = None;
    let mut init_phi: Option<PathBuf> = None;
    let mut init_sigma: Option<PathBuf> = None;
    let mut sampler = match cfg.init {
        InitConfig::Sampler {
            seed,
            m,
            radius,
            sigma_floor,
        } => (seed, m, radius, sigma_floor),
        _ => unreachable!(),
    };

    for (section, entries) in &sections {
        for (key, value, _line) in entries {
            let num = |col: &mut Collector| -> Option<f64> {
                match value.parse::<f64>() {
                    Ok(v) if v.is_finite() => Some(v),
                    _ => {
                        col.push(section, key, format!("expected a number, got '{value}'"));
                        None
                    }
                }
            };
            let int = |col: &mut Collector| -> Option<usize> {
                match value.parse::<usize>() {
                    Ok(v) => Some(v),
                    _ => {
                        col.push(section, key, format!("expected an integer, got '{value}'"));
                        None
                    }
                }
            };
            let boolean = |col: &mut Collector| -> Option<bool> {
                match value.as_str() {
                    "true" | "on" | "yes" => Some(true),
                    "false" | "off" | "no" => Some(false),
                    _ => {
                        col.push(section, key, format!("expected true/false, got '{value}'"));
                        None
                    }
                }
            };
            match (section.as_str(), key.as_str()) {
                ("grid", "nx") => {
                    if let Some(v) = int(&mut col) {
                        cfg.nx = v;
                    }
                }
                ("grid", "ny") => {
                    if let Some(v) = int(&mut col) {
                        cfg.ny = v;
                    }
                }
                ("grid", "lx") => {
                    if let Some(v) = num(&mut col) {
                        cfg.lx = v;
                    }
                }
                ("grid", "ly") => {
                    if let Some(v) = num(&mut col) {
                        cfg.ly = v;
                    }
                }
                ("model", "chi") => {
                    if let Some(v) = num(&mut col) {
                        cfg.chi = v;
                    }
                }
                ("model", "lambda") => {
                    if let Some(v) = num(&mut col) {
                        cfg.lambda = v;
                    }
                }
                ("model", "yosida_eps") => {
                    if let Some(v) = num(&mut col) {
                        cfg.yosida_eps = v;
                    }
                }
                ("model", "solver_tol") => {
                    if let Some(v) = num(&mut col) {
                        cfg.solver_tol = v;
                    }
                }
                ("model", "max_newton") => {
                    if let Some(v) = int(&mut col) {
                        cfg.max_newton = v;
                    }
                }
                ("model", "potential") => {
                    let parts: Vec<&str> = value.split_whitespace().collect();
                    match parts.as_slice() {
                        ["flory_huggins"] => cfg.potential = PotentialChoice::FloryHuggins,
                        ["double_obstacle_smoothed"] => {
                            cfg.potential = PotentialChoice::DoubleObstacleSmoothed
                        }
                        ["tabulated", path] => cfg.potential_table = Some(PathBuf::from(path)),
                        _ => col.push(
                            section,
                            key,
                            format!(
                                "expected flory_huggins | double_obstacle_smoothed | \
                                 tabulated FILE, got '{value}'"
                            ),
                        ),
                    }
                }
                ("model", "h") => match parse_coeff(value) {
                    Ok(c) => cfg.h = c,
                    Err(e) => col.push(section, key, e),
                },
                ("model", "k") => match parse_coeff(value) {
                    Ok(c) => cfg.k = c,
                    Err(e) => col.push(section, key, e),
                },
                ("time", "dt") => {
                    if let Some(v) = num(&mut col) {
                        cfg.dt = v;
                    }
                }
                ("time", "t_end") => {
                    if let Some(v) = num(&mut col) {
                        cfg.t_end = v;
                    }
                }
                ("time", "stride") => {
                    if let Some(v) = int(&mut col) {
                        cfg.stride = v;
                    }
                }
                ("time", "stepper") => match value.as_str() {
                    "standard" => cfg.stepper = StepperKind::Standard,
                    "entropic" => cfg.stepper = StepperKind::Entropic,
                    _ => col.push(
                        section,
                        key,
                        format!("expected standard | entropic, got '{value}'"),
                    ),
                },
                ("init", "mode") => init_mode = Some(value.clone()),
                ("init", "seed") => match value.parse::<u64>() {
                    Ok(v) => sampler.0 = v,
                    Err(_) => col.push(section, key, format!("expected u64, got '{value}'")),
                },
                ("init", "m") => {
                    if let Some(v) = num(&mut col) {
                        sampler.1 = v;
                    }
                }
                ("init", "radius") => {
                    if let Some(v) = num(&mut col) {
                        sampler.2 = v;
                    }
                }
                ("init", "sigma_floor") => {
                    if let Some(v) = num(&mut col) {
                        sampler.3 = v;
                    }
                }
                ("init", "phi") => init_phi = Some(PathBuf::from(value)),
                ("init", "sigma") => init_sigma = Some(PathBuf::from(value)),
                ("output", "dir") => cfg.out_dir = PathBuf::from(value),
                ("output", "csv") => {
                    if let Some(v) = boolean(&mut col) {
                        cfg.csv = v;
                    }
                }
                ("output", "snapshots") => {
                    if let Some(v) = boolean(&mut col) {
                        cfg.snapshots = v;
                    }
                }
                ("ensemble", "n_samples") => {
                    if let Some(v) = int(&mut col) {
                        cfg.n_samples = v;
                    }
                }
                ("ensemble", "workers") => {
                    if let Some(v) = int(&mut col) {
                        cfg.workers = v;
                    }
                }
                (s, k) if known.contains(&s) => {
                    col.push(s, k, "unknown key");
                }
                _ => {} // unknown section already reported
            }
        }
    }

    match init_mode.as_deref() {
        None | Some("sampler") => {
            cfg.init = InitConfig::Sampler {
                seed: sampler.0,
                m: sampler.1,
                radius: sampler.2,
                sigma_floor: sampler.3,
            };
        }
        Some("files") => match (&init_phi, &init_sigma) {
            (Some(p), Some(s)) => {
                cfg.init = InitConfig::Files {
                    phi: p.clone(),
                    sigma: s.clone(),
                }
            }
            _ => col.push("init", "mode", "files mode needs both phi and sigma paths"),
        },
        Some(other) => col.push(
            "init",
            "mode",
            format!("expected sampler | files, got '{other}'"),
        ),
    }

    validate(&cfg, &mut col);
    if col.errors.is_empty() {
        Ok(cfg)
    } else {
        Err(Error::Config(col.errors))
    }
}

fn validate(cfg: &RunConfig, col: &mut Collector) {
    if cfg.nx < 4 || cfg.ny < 4 {
        col.push("grid", "nx", "nx and ny must be >= 4");
    }
    if cfg.nx > 256 || cfg.ny > 256 {
        col.push("grid", "nx", "grids are capped at 256 per axis");
    }
    if !(cfg.lx > 0.0) || !(cfg.ly > 0.0) {
        col.push("grid", "lx", "lx and ly must be > 0");
    }
    if !(cfg.chi >= 0.0) {
        col.push("model", "chi", "chi must be >= 0");
    }
    if !(cfg.lambda >= 0.0) {
        col.push("model", "lambda", "lambda must be >= 0");
    }
    if !(cfg.yosida_eps > 0.0) {
        col.push("model", "yosida_eps", "yosida_eps must be > 0");
    }
    if !(cfg.solver_tol > 0.0) {
        col.push("model", "solver_tol", "solver_tol must be > 0");
    }
    if let Err(e) = cfg.h.validate() {
        col.push("model", "h", e.to_string());
    }
    if let Err(e) = cfg.k.validate() {
        col.push("model", "k", e.to_string());
    }
    if !(cfg.dt > 0.0) {
        col.push("time", "dt", "dt must be > 0");
    } else {
        let (_, k_hi) = cfg.k.bounds();
        if k_hi > 0.0 && cfg.dt >= 0.5 / k_hi {
            col.push(
                "time",
                "dt",
                format!("dt must satisfy dt < 1/(2 k_max) = {}", 0.5 / k_hi),
            );
        }
    }
    if !(cfg.t_end > 0.0) {
        col.push("time", "t_end", "t_end must be > 0");
    }
    if cfg.stride == 0 {
        col.push("time", "stride", "stride must be >= 1");
    }
    if let InitConfig::Sampler {
        m,
        radius,
        sigma_floor,
        ..
    } = &cfg.init
    {
        if m.abs() >= 1.0 {
            col.push("init", "m", "|m| must be < 1");
        }
        if !(radius > &0.0) {
            col.push("init", "radius", "radius must be > 0");
        }
        if sigma_floor < &0.0 {
            col.push("init", "sigma_floor", "sigma_floor must be >= 0");
        }
    }
    if cfg.n_samples == 0 {
        col.push("ensemble", "n_samples", "n_samples must be >= 1");
    }
}

/// Canonical text form; `parse_config(serialize(cfg)) == cfg`.
pub fn serialize(cfg: &RunConfig) -> String {
    let mut s = String::new();
    s.push_str("[grid]\n");
    s.push_str(&format!(
        "nx = {}\nny = {}\nlx = {}\nly = {}\n",
        cfg.nx, cfg.ny, cfg.lx, cfg.ly
    ));
    s.push_str("\n[model]\n");
    s.push_str(&format!("chi = {}\nlambda = {}\n", cfg.chi, cfg.lambda));
    match (&cfg.potential_table, cfg.potential) {
        (Some(p), _) => s.push_str(&format!("potential = tabulated {}\n", p.display())),
        (None, PotentialChoice::FloryHuggins) => s.push_str("potential = flory_huggins\n"),
        (None, PotentialChoice::DoubleObstacleSmoothed) => {
            s.push_str("potential = double_obstacle_smoothed\n")
        }
    }
    s.push_str(&format!("yosida_eps = {}\n", cfg.yosida_eps));
    s.push_str(&format!(
        "h = {}\nk = {}\n",
        coeff_to_string(&cfg.h),
        coeff_to_string(&cfg.k)
    ));
    s.push_str(&format!(
        "solver_tol = {}\nmax_newton = {}\n",
        cfg.solver_tol, cfg.max_newton
    ));
    s.push_str("\n[time]\n");
    s.push_str(&format!(
        "dt = {}\nt_end = {}\nstride = {}\n",
        cfg.dt, cfg.t_end, cfg.stride
    ));
    s.push_str(&format!(
        "stepper = {}\n",
        match cfg.stepper {
            StepperKind::Standard => "standard",
            StepperKind::Entropic => "entropic",
        }
    ));
    s.push_str("\n[init]\n");
    match &cfg.init {
        InitConfig::Sampler {
            seed,
            m,
            radius,
            sigma_floor,
        } => {
            s.push_str("mode = sampler\n");
            s.push_str(&format!(
                "seed = {seed}\nm = {m}\nradius = {radius}\nsigma_floor = {sigma_floor}\n"
            ));
        }
        InitConfig::Files { phi, sigma } => {
            s.push_str("mode = files\n");
            s.push_str(&format!(
                "phi = {}\nsigma = {}\n",
                phi.display(),
                sigma.display()
            ));
        }
    }
    s.push_str("\n[output]\n");
    s.push_str(&format!(
        "dir = {}\ncsv = {}\nsnapshots = {}\n",
        cfg.out_dir.display(),
        cfg.csv,
        cfg.snapshots
    ));
    s.push_str("\n[ensemble]\n");
    s.push_str(&format!(
        "n_samples = {}\nworkers = {}\n",
        cfg.n_samples, cfg.workers
    ));
    s
}

impl RunConfig {
    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.nx, self.ny, self.lx, self.ly)
    }

    pub fn potential_spec(&self) -> Result<PotentialSpec> {
        let kind = match &self.potential_table {
            Some(path) => {
                let text = std::fs::read_to_string(path)?;
                let mut r = Vec::new();
                let mut beta = Vec::new();
                for line in text.lines() {
                    let line = line.trim();
                    if line.is_empty() || line.starts_with('#') {
                        continue;
                    }
                    let mut it = line.split([',', ' ', '\t']).filter(|s| !s.is_empty());
                    let (a, b) = (it.next(), it.next());
                    match (
                        a.and_then(|v| v.parse().ok()),
                        b.and_then(|v| v.parse().ok()),
                    ) {
                        (Some(a), Some(b)) => {
                            r.push(a);
                            beta.push(b);
                        }
                        _ => {
                            return Err(Error::Domain {
                                what: "potential table",
                                detail: format!("bad row '{line}'"),
                            })
                        }
                    }
                }
                PotentialKind::CustomTabulated { r, beta }
            }
            None => match self.potential {
                PotentialChoice::FloryHuggins => PotentialKind::FloryHuggins,
                PotentialChoice::DoubleObstacleSmoothed => PotentialKind::DoubleObstacleSmoothed,
            },
        };
        PotentialSpec::new(kind, self.lambda, self.yosida_eps)
    }

    pub fn model_params(&self) -> Result<ModelParams> {
        let mut p = ModelParams::new(self.chi, self.potential_spec()?, self.h, self.k, self.dt)?;
        p.solver_tol = self.solver_tol;
        p.max_newton = self.max_newton;
        Ok(p)
    }

    pub fn ensemble_spec(&self) -> Result<EnsembleSpec> {
        match &self.init {
            InitConfig::Sampler {
                seed,
                m,
                radius,
                sigma_floor,
            } => Ok(EnsembleSpec {
                n_samples: self.n_samples,
                radius: *radius,
                mean_phi: *m,
                seed: *seed,
                horizon: self.t_end,
                stride: self.stride,
                sigma_floor: *sigma_floor,
            }),
            InitConfig::Files { .. } => Err(Error::Precondition(
                "ensemble runs need sampler initial data".into(),
            )),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_fills_defaults() {
        let cfg = parse_config("").unwrap();
        assert_eq!(cfg, RunConfig::default());
        assert_eq!(cfg.solver_tol, 1e-10);
        assert_eq!(cfg.stride, 100);

        let cfg = parse_config("[model]\nchi = 0.25\n").unwrap();
        assert_eq!(cfg.chi, 0.25);
        assert_eq!(cfg.nx, 64);
    }

    #[test]
    fn all_errors_are_collected() {
        let text = "[model]\nchi = -1\nbogus = 3\n[time]\ndt = 1.0\n[grid]\nnx = 2\n";
        let err = parse_config(text).unwrap_err();
        match err {
            Error::Config(list) => {
                let keys: Vec<String> = list
                    .iter()
                    .map(|e| format!("{}/{}", e.section, e.key))
                    .collect();
                assert!(keys.contains(&"model/chi".to_string()), "{keys:?}");
                assert!(keys.contains(&"model/bogus".to_string()));
                assert!(keys.contains(&"grid/nx".to_string()));
                // dt = 1.0 with default k bounds (k_max = 0.4): 1/(2 k) = 1.25, so fine;
                // tighten k to trip the dt bound instead
            }
            other => panic!("expected Config error, got {other}"),
        }

        let text = "[model]\nk = constant 1.0\n[time]\ndt = 1.0\n";
        let err = parse_config(text).unwrap_err();
        match err {
            Error::Config(list) => {
                assert!(list
                    .iter()
                    .any(|e| e.key == "dt" && e.reason.contains("1/(2 k_max)")));
            }
            other => panic!("expected Config error, got {other}"),
        }
    }

    #[test]
    fn chi_must_be_nonnegative() {
        let err = parse_config("[model]\nchi = -1\n").unwrap_err();
        match err {
            Error::Config(list) => {
                assert!(list
                    .iter()
                    .any(|e| e.key == "chi" && e.reason.contains(">= 0")))
            }
            other => panic!("{other}"),
        }
    }

    #[test]
    fn round_trip_serialize_parse() {
        let cfg = RunConfig {
            chi: 0.7,
            h: CoeffSpec::Saturating {
                lo: 0.5,
                hi: 1.25,
                scale: 2.0,
            },
            stepper: StepperKind::Entropic,
            init: InitConfig::Files {
                phi: "a.chks".into(),
                sigma: "b.chks".into(),
            },
            n_samples: 7,
            ..RunConfig::default()
        };
        let text = serialize(&cfg);
        let back = parse_config(&text).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn comments_and_unknown_sections() {
        let ok = parse_config("# top comment\n[grid]\nnx = 32 # inline\n").unwrap();
        assert_eq!(ok.nx, 32);
        assert!(parse_config("[nonsense]\nx = 1\n").is_err());
        assert!(parse_config("loose = 1\n").is_err());
        assert!(parse_config("[init]\nmode = files\n").is_err());
    }
}
