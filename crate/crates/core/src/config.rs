//! Line-oriented `key = value` run configuration.
//!
//! `#` starts a comment. Every key may appear once, except `force`, which
//! adds one forcing term per line as `force = m n a_cos a_sin a_const`.
//! Unknown keys are rejected.
//!
//! Required: `Lx Ly Mx My beta nu r dt`. Everything else has a default.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use crate::dynamics::{Dynamics, ForcingSpec, ForcingTerm, ModelParams};
use crate::orbit::OrbitSettings;
use crate::spectral::Domain;
use crate::stepper::StepConfig;

const KEYS: &[&str] = &[
    "Lx",
    "Ly",
    "Mx",
    "My",
    "padded_nx",
    "padded_ny",
    "beta",
    "nu",
    "r",
    "period",
    "force",
    "dt",
    "t_end",
    "record_every",
    "cfl_safety",
    "initial",
    "model",
    "diagnostics",
    "checkpoint",
    "summary",
    "epsilon",
    "tol",
    "max_iter",
    "krylov_dim",
    "gmres_tol",
    "gmres_restarts",
    "power_iters",
    "samples",
    "mode_m",
    "mode_n",
    "steps_per_period",
];

const REQUIRED: &[&str] = &["Lx", "Ly", "Mx", "My", "beta", "nu", "r", "dt"];

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    /// 1-based line in the config text; `None` for command-line overrides
    /// and missing keys.
    pub line: Option<usize>,
    pub key: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}: {}", self.key, self.message),
            None => write!(f, "{}: {}", self.key, self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialCondition {
    Zero,
    SingleMode {
        m: usize,
        n: usize,
        amplitude: f64,
    },
    File(PathBuf),
    /// Smooth random field, coefficients `u / (m^2 + n^2)` with `u` uniform
    /// on `[-1, 1]`, rescaled to L2 norm `amplitude`.
    Random {
        seed: u64,
        amplitude: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub domain: Domain,
    pub params: ModelParams,
    pub forcing: ForcingSpec,
    pub stepping: StepConfig,
    pub dynamics: Dynamics,
    pub initial: InitialCondition,
    pub diagnostics_path: PathBuf,
    pub checkpoint_path: PathBuf,
    pub summary_path: Option<PathBuf>,
    /// Young weight for the energy estimate; half the condition margin when absent.
    pub epsilon: Option<f64>,
    pub orbit: OrbitSettings,
    pub power_iters: usize,
    /// Re-simulation phases per period.
    pub samples: usize,
    /// Basin mode for `linear-mode`.
    pub mode: (usize, usize),
    pub steps_per_period: usize,
}

#[derive(Debug, Clone)]
struct Entry {
    value: String,
    line: Option<usize>,
}

fn err(line: Option<usize>, key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError {
        line,
        key: key.to_string(),
        message: message.into(),
    }
}

/// Parses `text`, then applies `key=value` overrides.
pub fn parse_config_with(text: &str, overrides: &[String]) -> Result<RunConfig, ConfigError> {
    let mut entries: BTreeMap<String, Entry> = BTreeMap::new();
    let mut forces: Vec<Entry> = Vec::new();

    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(err(Some(line), content, "expected `key = value`"));
        };
        let key = key.trim();
        let value = value.trim().to_string();
        if !KEYS.contains(&key) {
            return Err(err(Some(line), key, "unknown key"));
        }
        if key == "force" {
            forces.push(Entry {
                value,
                line: Some(line),
            });
            continue;
        }
        if let Some(prev) = entries.get(key) {
            return Err(err(
                Some(line),
                key,
                format!(
                    "duplicate key (first set on line {})",
                    prev.line.unwrap_or(0)
                ),
            ));
        }
        entries.insert(
            key.to_string(),
            Entry {
                value,
                line: Some(line),
            },
        );
    }

    for o in overrides {
        let Some((key, value)) = o.split_once('=') else {
            return Err(err(None, o, "override must look like key=value"));
        };
        let key = key.trim();
        if !KEYS.contains(&key) {
            return Err(err(None, key, "unknown key"));
        }
        if key == "force" {
            return Err(err(None, key, "list key cannot be overridden"));
        }
        entries.insert(
            key.to_string(),
            Entry {
                value: value.trim().to_string(),
                line: None,
            },
        );
    }

    for key in REQUIRED {
        if !entries.contains_key(*key) {
            return Err(err(None, key, "missing required key"));
        }
    }

    let p = Parser { entries: &entries };
    let lx = p
        .real("Lx", None, |v| v > 0.0, "must be positive")?
        .unwrap();
    let ly = p
        .real("Ly", None, |v| v > 0.0, "must be positive")?
        .unwrap();
    let mx = p.count("Mx", None, 1)?.unwrap();
    let my = p.count("My", None, 1)?.unwrap();
    let padded_nx = p.count("padded_nx", Some(2 * mx + 1), 2 * mx + 1)?.unwrap();
    let padded_ny = p.count("padded_ny", Some(2 * my + 1), 2 * my + 1)?.unwrap();
    let domain = Domain::with_padding(lx, ly, mx, my, padded_nx, padded_ny)
        .map_err(|e| err(p.line("Lx"), "Lx", e.to_string()))?;

    let nonneg = |v: f64| v >= 0.0;
    let beta = p
        .real("beta", None, nonneg, "must be non-negative")?
        .unwrap();
    let nu = p.real("nu", None, nonneg, "must be non-negative")?.unwrap();
    let r = p.real("r", None, nonneg, "must be non-negative")?.unwrap();
    let params = ModelParams::new(beta, nu, r).map_err(|e| err(None, "beta", e.to_string()))?;

    let period = p
        .real("period", Some(1.0), |v| v > 0.0, "must be positive")?
        .unwrap();
    let mut terms = Vec::with_capacity(forces.len());
    for f in &forces {
        let parts: Vec<&str> = f.value.split_whitespace().collect();
        if parts.len() != 5 {
            return Err(err(f.line, "force", "expected `m n a_cos a_sin a_const`"));
        }
        let idx = |s: &str| {
            s.parse::<usize>()
                .map_err(|_| err(f.line, "force", format!("bad mode index {s:?}")))
        };
        let amp = |s: &str| match s.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(err(f.line, "force", format!("bad amplitude {s:?}"))),
        };
        let term = ForcingTerm::new(
            idx(parts[0])?,
            idx(parts[1])?,
            amp(parts[2])?,
            amp(parts[3])?,
            amp(parts[4])?,
        );
        domain
            .check_mode(term.m, term.n)
            .map_err(|e| err(f.line, "force", e.to_string()))?;
        terms.push(term);
    }
    let forcing = ForcingSpec::new(period, terms).map_err(|e| err(None, "force", e.to_string()))?;

    let dt = p
        .real("dt", None, |v| v > 0.0, "must be positive")?
        .unwrap();
    let t_end = p
        .real("t_end", Some(period), nonneg, "must be non-negative")?
        .unwrap();
    let record_every = p.count("record_every", Some(10), 1)?.unwrap();
    let cfl_safety = p
        .real(
            "cfl_safety",
            Some(0.5),
            |v| v > 0.0 && v <= 1.0,
            "must lie in (0, 1]",
        )?
        .unwrap();
    let stepping = StepConfig {
        dt,
        t_end,
        record_every,
        cfl_safety,
    };

    let dynamics = match p.text("model").as_deref() {
        None | Some("nonlinear") => Dynamics::Nonlinear,
        Some("linear") => Dynamics::Linearized,
        Some(other) => {
            return Err(err(
                p.line("model"),
                "model",
                format!("expected nonlinear or linear, got {other:?}"),
            ))
        }
    };

    let initial = parse_initial(&p, &domain)?;

    let tol = p
        .real("tol", Some(1e-8), |v| v > 0.0, "must be positive")?
        .unwrap();
    let max_iter = p.count("max_iter", Some(200), 1)?.unwrap();
    let krylov_dim = p.count("krylov_dim", Some(20), 1)?.unwrap();
    let gmres_tol = p
        .real(
            "gmres_tol",
            Some(1e-3),
            |v| v > 0.0 && v < 1.0,
            "must lie in (0, 1)",
        )?
        .unwrap();
    let gmres_restarts = p.count("gmres_restarts", Some(5), 1)?.unwrap();
    let epsilon = p.real("epsilon", None, |v| v > 0.0, "must be positive")?;
    let power_iters = p.count("power_iters", Some(60), 1)?.unwrap();
    let samples = p.count("samples", Some(16), 1)?.unwrap();
    let mode_m = p.count("mode_m", Some(1), 1)?.unwrap();
    let mode_n = p.count("mode_n", Some(1), 1)?.unwrap();
    domain
        .check_mode(mode_m, mode_n)
        .map_err(|e| err(p.line("mode_m"), "mode_m", e.to_string()))?;
    let steps_per_period = p.count("steps_per_period", Some(2000), 1)?.unwrap();

    Ok(RunConfig {
        domain,
        params,
        forcing,
        stepping,
        dynamics,
        initial,
        diagnostics_path: PathBuf::from(
            p.text("diagnostics")
                .unwrap_or_else(|| "diagnostics.csv".into()),
        ),
        checkpoint_path: PathBuf::from(
            p.text("checkpoint")
                .unwrap_or_else(|| "checkpoint.qgf".into()),
        ),
        summary_path: p.text("summary").map(PathBuf::from),
        epsilon,
        orbit: OrbitSettings {
            tol,
            max_iter,
            krylov_dim,
            gmres_tol,
            gmres_restarts,
        },
        power_iters,
        samples,
        mode: (mode_m, mode_n),
        steps_per_period,
    })
}

pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    parse_config_with(text, &[])
}

fn parse_initial(p: &Parser<'_>, domain: &Domain) -> Result<InitialCondition, ConfigError> {
    let Some(text) = p.text("initial") else {
        return Ok(InitialCondition::Zero);
    };
    let line = p.line("initial");
    let parts: Vec<&str> = text.split_whitespace().collect();
    let bad = |msg: &str| err(line, "initial", msg.to_string());
    match parts.as_slice() {
        ["zero"] => Ok(InitialCondition::Zero),
        ["single_mode", m, n, a] => {
            let m: usize = m.parse().map_err(|_| bad("bad mode index"))?;
            let n: usize = n.parse().map_err(|_| bad("bad mode index"))?;
            let amplitude: f64 = a
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| bad("bad amplitude"))?;
            domain.check_mode(m, n).map_err(|e| bad(&e.to_string()))?;
            Ok(InitialCondition::SingleMode { m, n, amplitude })
        }
        ["file", path] => {
            let path = PathBuf::from(path);
            if !path.is_file() {
                return Err(bad(&format!("file {} does not exist", path.display())));
            }
            Ok(InitialCondition::File(path))
        }
        ["random", seed, a] => {
            let seed: u64 = seed.parse().map_err(|_| bad("bad seed"))?;
            let amplitude: f64 = a
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite() && *v >= 0.0)
                .ok_or_else(|| bad("amplitude must be finite and non-negative"))?;
            Ok(InitialCondition::Random { seed, amplitude })
        }
        _ => Err(bad(
            "expected `zero`, `single_mode m n amplitude`, `file path` or `random seed amplitude`",
        )),
    }
}

struct Parser<'a> {
    entries: &'a BTreeMap<String, Entry>,
}

impl Parser<'_> {
    fn line(&self, key: &str) -> Option<usize> {
        self.entries.get(key).and_then(|e| e.line)
    }

    fn text(&self, key: &str) -> Option<String> {
        self.entries.get(key).map(|e| e.value.clone())
    }

    fn real(
        &self,
        key: &str,
        default: Option<f64>,
        ok: impl Fn(f64) -> bool,
        range: &str,
    ) -> Result<Option<f64>, ConfigError> {
        let Some(e) = self.entries.get(key) else {
            return Ok(default);
        };
        let v: f64 = e
            .value
            .parse()
            .map_err(|_| err(e.line, key, format!("expected a number, got {:?}", e.value)))?;
        if !v.is_finite() || !ok(v) {
            return Err(err(e.line, key, format!("{range}, got {v}")));
        }
        Ok(Some(v))
    }

    fn count(
        &self,
        key: &str,
        default: Option<usize>,
        min: usize,
    ) -> Result<Option<usize>, ConfigError> {
        let Some(e) = self.entries.get(key) else {
            return Ok(default);
        };
        let v: usize = e.value.parse().map_err(|_| {
            err(
                e.line,
                key,
                format!("expected a non-negative integer, got {:?}", e.value),
            )
        })?;
        if v < min {
            return Err(err(e.line, key, format!("must be at least {min}, got {v}")));
        }
        Ok(Some(v))
    }
}
