//! Command implementations behind the `qgbasin` binary.
//!
//! Each command writes its results as `key = value` lines to `out` and
//! returns the process exit code.

use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{InitialCondition, RunConfig};
use crate::dynamics::{Dynamics, ForcingSpec, StateView};
use crate::error::{Error, Result};
use crate::io::{read_field, write_atomic, write_diagnostics, write_field};
use crate::orbit::{OrbitSettings, PeriodMap};
use crate::spectral::{Basis, Domain, SpectralField};
use crate::stepper::{EnvelopeArm, Stepper};
use crate::theory::{
    check_condition, dispersion, linear_mode_field, make_estimate, verify_envelope,
    DissipativityEstimate,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_BLOW_UP: i32 = 3;
pub const EXIT_NOT_CONVERGED: i32 = 4;
pub const EXIT_CHECK_FAILED: i32 = 5;
pub const EXIT_CONDITION_FAILED: i32 = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Simulate,
    FindOrbit,
    VerifyBound,
    LinearMode,
    CheckCondition,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Flags {
    pub newton: bool,
    pub floquet: bool,
    /// Orbit residual tolerance, or the error threshold for `linear-mode`.
    pub tol: Option<f64>,
}

/// Default pass threshold of `linear-mode`.
pub const LINEAR_MODE_TOL: f64 = 1e-3;

/// Smooth random vorticity: `u / (m^2 + n^2)` per mode, `u` uniform on
/// `[-1, 1]`, rescaled to L2 norm `amplitude`.
pub fn random_field(domain: &Arc<Domain>, seed: u64, amplitude: f64) -> SpectralField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut f = SpectralField::zeros(domain);
    for m in 1..=domain.mx() {
        for n in 1..=domain.my() {
            let u: f64 = rng.gen_range(-1.0..=1.0);
            f.set(m, n, u / (m * m + n * n) as f64);
        }
    }
    let norm = f.norm();
    if norm > 0.0 {
        f.scaled(amplitude / norm)
    } else {
        f
    }
}

/// Loads a checkpoint and places it on `domain`, which must have the same
/// extents and truncation.
pub fn load_field_on(path: &Path, domain: &Arc<Domain>) -> Result<SpectralField> {
    let f = read_field(path)?;
    let d = f.domain();
    if d.mx() != domain.mx()
        || d.my() != domain.my()
        || d.lx() != domain.lx()
        || d.ly() != domain.ly()
    {
        return Err(Error::Format(format!(
            "checkpoint {} is {}x{} modes on {} x {}, config expects {}x{} on {} x {}",
            path.display(),
            d.mx(),
            d.my(),
            d.lx(),
            d.ly(),
            domain.mx(),
            domain.my(),
            domain.lx(),
            domain.ly()
        )));
    }
    SpectralField::from_coeffs(domain, f.into_coeffs())
}

pub fn initial_field(initial: &InitialCondition, domain: &Arc<Domain>) -> Result<SpectralField> {
    match initial {
        InitialCondition::Zero => Ok(SpectralField::zeros(domain)),
        InitialCondition::SingleMode { m, n, amplitude } => {
            SpectralField::single_mode(domain, *m, *n, *amplitude)
        }
        InitialCondition::File(path) => load_field_on(path, domain),
        InitialCondition::Random { seed, amplitude } => Ok(random_field(domain, *seed, *amplitude)),
    }
}

/// Relative L2 error of the stream function after one analytic period of
/// basin mode `(m, n)`, integrated with the linearized dynamics at
/// `steps_per_period` steps. Viscosity, drag and forcing are switched off.
pub fn linear_mode_error(
    basis: &Basis,
    beta: f64,
    m: usize,
    n: usize,
    steps_per_period: usize,
) -> Result<f64> {
    let domain = basis.domain();
    let mode = dispersion(m, n, beta, domain)?;
    let params = crate::dynamics::ModelParams::new(beta, 0.0, 0.0)?;
    let forcing = ForcingSpec::unforced(mode.period)?;
    let stepper = Stepper::new(basis, params, &forcing, Dynamics::Linearized)?;
    let psi0 = linear_mode_field(&mode, 0.0, domain)?;
    let state = StateView::new(psi0.laplacian(), 0.0);
    let dt = mode.period / steps_per_period.max(1) as f64;
    let end = stepper.advance(&state, mode.period, dt)?;
    let exact = linear_mode_field(&mode, mode.period, domain)?;
    Ok(end.psi.difference(&exact)?.norm() / exact.norm())
}

fn estimate_for(cfg: &RunConfig) -> Result<Option<DissipativityEstimate>> {
    let cond = check_condition(&cfg.params, &cfg.domain);
    if !cond.satisfied {
        return Ok(None);
    }
    let eps = cfg.epsilon.unwrap_or(0.5 * cond.margin);
    make_estimate(&cfg.params, &cfg.domain, &cfg.forcing, eps).map(Some)
}

struct Report {
    lines: Vec<String>,
}

impl Report {
    fn new() -> Self {
        Self { lines: Vec::new() }
    }

    fn put(&mut self, key: &str, value: impl std::fmt::Display) {
        self.lines.push(format!("{key} = {value}"));
    }

    fn finish(self, cfg: &RunConfig, out: &mut dyn Write) -> Result<()> {
        let text: String = self.lines.iter().map(|l| format!("{l}\n")).collect();
        out.write_all(text.as_bytes())?;
        if let Some(path) = &cfg.summary_path {
            write_atomic(path, text.as_bytes())?;
        }
        Ok(())
    }
}

pub fn run(command: Command, cfg: &RunConfig, flags: &Flags, out: &mut dyn Write) -> Result<i32> {
    match command {
        Command::Simulate => simulate(cfg, None, out),
        Command::VerifyBound => verify_bound(cfg, out),
        Command::FindOrbit => find_orbit(cfg, flags, out),
        Command::LinearMode => linear_mode(cfg, flags, out),
        Command::CheckCondition => condition(cfg, out),
    }
}

fn simulate(
    cfg: &RunConfig,
    est: Option<&DissipativityEstimate>,
    out: &mut dyn Write,
) -> Result<i32> {
    let basis = Basis::new(cfg.domain.clone());
    let stepper = Stepper::new(&basis, cfg.params, &cfg.forcing, cfg.dynamics)?;
    let omega0 = initial_field(&cfg.initial, basis.domain())?;
    let state = StateView::new(omega0, 0.0);
    let e0 = state.enstrophy();
    let arm = est.map(|estimate| EnvelopeArm {
        estimate,
        initial_enstrophy: e0,
        t0: 0.0,
    });
    let mut report = Report::new();
    match stepper.integrate(&state, &cfg.stepping, arm.as_ref()) {
        Ok((last, records)) => {
            write_diagnostics(&records, &cfg.diagnostics_path)?;
            write_field(&last.omega, &cfg.checkpoint_path)?;
            report.put("t_final", last.t);
            report.put("enstrophy", last.enstrophy());
            report.put("energy", last.energy());
            report.put("records", records.len());
            if let Some(est) = est {
                let check = verify_envelope(&records, est, e0)?;
                report.put("max_excess", check.max_excess);
                report.put("tolerance", check.tolerance);
                report.put("absorbing_radius2", check.absorbing_radius2);
                report.put("inside_ball", check.inside_ball);
                report.put("bound_holds", check.pass);
                report.finish(cfg, out)?;
                return Ok(if check.pass {
                    EXIT_OK
                } else {
                    EXIT_CHECK_FAILED
                });
            }
            report.finish(cfg, out)?;
            Ok(EXIT_OK)
        }
        Err(Error::BlowUp { time, records }) => {
            eprintln!("error: solution blew up at t = {time}");
            write_diagnostics(&records, &cfg.diagnostics_path)?;
            Ok(EXIT_BLOW_UP)
        }
        Err(e) => Err(e),
    }
}

fn verify_bound(cfg: &RunConfig, out: &mut dyn Write) -> Result<i32> {
    match estimate_for(cfg)? {
        Some(est) => simulate(cfg, Some(&est), out),
        None => {
            let cond = check_condition(&cfg.params, &cfg.domain);
            eprintln!(
                "error: dissipativity condition fails (margin {}); no envelope to verify",
                cond.margin
            );
            Ok(EXIT_CONDITION_FAILED)
        }
    }
}

fn find_orbit(cfg: &RunConfig, flags: &Flags, out: &mut dyn Write) -> Result<i32> {
    let basis = Basis::new(cfg.domain.clone());
    let stepper = Stepper::new(&basis, cfg.params, &cfg.forcing, cfg.dynamics)?;
    let map = PeriodMap::new(stepper, cfg.stepping.dt)?;
    let settings = OrbitSettings {
        tol: flags.tol.unwrap_or(cfg.orbit.tol),
        ..cfg.orbit
    };
    let omega0 = initial_field(&cfg.initial, basis.domain())?;

    let mut result = match map.find_orbit_picard(&omega0, &settings) {
        Ok(r) => r,
        Err(Error::BlowUp { time, .. }) => {
            eprintln!("error: period map blew up at t = {time}");
            return Ok(EXIT_BLOW_UP);
        }
        Err(e) => return Err(e),
    };
    let picard_iterations = result.iterations;
    let contraction = result.observed_contraction();
    if flags.newton {
        result = map.find_orbit_newton(&result.omega_star, &settings)?;
    }
    let est = estimate_for(cfg)?;
    result.check_ball(est.as_ref());
    if flags.floquet {
        let mu = map.estimate_floquet(&result.omega_star, cfg.power_iters)?;
        if !mu.converged {
            eprintln!(
                "warning: power iteration did not settle after {} iterations",
                mu.iterations
            );
        }
        result.floquet_magnitude = Some(mu.magnitude);
    }
    let periodicity = map.resimulate(&result.omega_star, cfg.samples)?;
    write_field(&result.omega_star, &cfg.checkpoint_path)?;

    let mut report = Report::new();
    report.put("converged", result.converged);
    report.put("method", result.method);
    report.put("residual", result.residual);
    report.put("iterations", result.iterations);
    report.put("picard_iterations", picard_iterations);
    if let Some(c) = contraction {
        report.put("picard_contraction", c);
    }
    if let Some(mu) = result.floquet_magnitude {
        report.put("floquet", mu);
    }
    match result.inside_ball {
        Some(b) => report.put("inside_ball", b),
        None => report.put("inside_ball", "unknown"),
    }
    report.put("norm", result.omega_star.norm());
    report.put("periodicity_defect", periodicity.max_defect);
    report.put(
        "dominant_mode",
        format!(
            "{} {}",
            periodicity.dominant_mode.0, periodicity.dominant_mode.1
        ),
    );
    report.put("amplitude", periodicity.dominant_amplitude);
    report.finish(cfg, out)?;
    Ok(if result.converged {
        EXIT_OK
    } else {
        EXIT_NOT_CONVERGED
    })
}

fn linear_mode(cfg: &RunConfig, flags: &Flags, out: &mut dyn Write) -> Result<i32> {
    let basis = Basis::new(cfg.domain.clone());
    let (m, n) = cfg.mode;
    let mode = dispersion(m, n, cfg.params.beta, &cfg.domain)?;
    let error = linear_mode_error(&basis, cfg.params.beta, m, n, cfg.steps_per_period)?;
    let tol = flags.tol.unwrap_or(LINEAR_MODE_TOL);
    let mut report = Report::new();
    report.put("mode", format!("{m} {n}"));
    report.put("sigma", mode.sigma);
    report.put("period", mode.period);
    report.put("error", error);
    report.put("tol", tol);
    report.finish(cfg, out)?;
    Ok(if error <= tol {
        EXIT_OK
    } else {
        EXIT_CHECK_FAILED
    })
}

fn condition(cfg: &RunConfig, out: &mut dyn Write) -> Result<i32> {
    let cond = check_condition(&cfg.params, &cfg.domain);
    let mut report = Report::new();
    report.put("lhs", cond.lhs);
    report.put("rhs", cond.rhs);
    report.put("margin", cond.margin);
    report.put("satisfied", cond.satisfied);
    match estimate_for(cfg)? {
        Some(est) => {
            report.put("epsilon", est.epsilon);
            report.put("alpha", est.alpha);
            report.put(
                "absorbing_radius2",
                est.absorbing_radius2.unwrap_or(f64::NAN),
            );
        }
        None => {
            report.put("epsilon", "none");
            report.put("alpha", "none");
        }
    }
    report.finish(cfg, out)?;
    Ok(if cond.satisfied {
        EXIT_OK
    } else {
        EXIT_CONDITION_FAILED
    })
}
