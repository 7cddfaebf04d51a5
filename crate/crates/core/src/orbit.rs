//! Time-periodic solutions as fixed points of the period map
//! `Phi_T(omega_0) = omega(T)`, started at forcing phase `t = 0`.
//!
//! Residuals and norms are L2 norms of the vorticity.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dynamics::StateView;
use crate::error::{Error, Result};
use crate::krylov::gmres;
use crate::spectral::SpectralField;
use crate::stepper::Stepper;
use crate::theory::DissipativityEstimate;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OrbitMethod {
    Picard,
    NewtonGmres,
}

impl std::fmt::Display for OrbitMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            OrbitMethod::Picard => "picard",
            OrbitMethod::NewtonGmres => "newton_gmres",
        })
    }
}

#[derive(Debug, Clone)]
pub struct OrbitResult {
    pub omega_star: SpectralField,
    /// `||Phi_T(omega*) - omega*||`.
    pub residual: f64,
    pub iterations: usize,
    pub method: OrbitMethod,
    pub converged: bool,
    pub floquet_magnitude: Option<f64>,
    /// `||omega*||^2 <= M/alpha`, when an armed estimate was supplied.
    pub inside_ball: Option<bool>,
    pub residual_history: Vec<f64>,
    /// Newton iterations that fell back to a plain Picard step.
    pub picard_fallbacks: usize,
}

impl OrbitResult {
    /// Marks whether `omega*` lies in the absorbing ball `||omega||^2 <= M/alpha`
    /// (with relative slack `1e-6`).
    pub fn check_ball(&mut self, est: Option<&DissipativityEstimate>) {
        self.inside_ball = est
            .and_then(|e| e.absorbing_radius2)
            .map(|r2| self.omega_star.norm2() <= r2 + 1e-6 * r2);
    }

    /// Geometric-mean ratio of the last few residuals, a proxy for the
    /// contraction rate of the period map near the orbit.
    pub fn observed_contraction(&self) -> Option<f64> {
        observed_contraction(&self.residual_history)
    }
}

/// `(r_last / r_{last-w})^(1/w)` over the last `w <= 3` ratios of positive residuals.
pub fn observed_contraction(history: &[f64]) -> Option<f64> {
    let usable: Vec<f64> = history.iter().copied().filter(|&r| r > 0.0).collect();
    if usable.len() < 2 {
        return None;
    }
    let w = (usable.len() - 1).min(3);
    let last = usable[usable.len() - 1];
    let first = usable[usable.len() - 1 - w];
    Some((last / first).powf(1.0 / w as f64))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrbitSettings {
    /// Converged when `||Phi_T(omega) - omega|| <= tol * max(1, ||omega||)`.
    pub tol: f64,
    pub max_iter: usize,
    pub krylov_dim: usize,
    pub gmres_tol: f64,
    pub gmres_restarts: usize,
}

impl Default for OrbitSettings {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 200,
            krylov_dim: 20,
            gmres_tol: 1e-3,
            gmres_restarts: 5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FloquetEstimate {
    /// Dominant multiplier magnitude `|mu_max|`.
    pub magnitude: f64,
    pub iterations: usize,
    /// False when power iteration did not settle; `magnitude` is then the
    /// last estimate.
    pub converged: bool,
}

/// Samples of a re-simulated orbit over two periods.
#[derive(Debug, Clone)]
pub struct PeriodicityReport {
    /// `max_k ||omega(t_k + T) - omega(t_k)||` over the sample phases.
    pub max_defect: f64,
    pub sample_times: Vec<f64>,
    /// `omega(t_k)` over the first period.
    pub samples: Vec<SpectralField>,
    /// Mode with the largest first-harmonic amplitude.
    pub dominant_mode: (usize, usize),
    pub dominant_amplitude: f64,
}

/// The period map of one model configuration.
#[derive(Debug, Clone)]
pub struct PeriodMap<'a> {
    stepper: Stepper<'a>,
    dt: f64,
}

impl<'a> PeriodMap<'a> {
    pub fn new(stepper: Stepper<'a>, dt: f64) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "dt must be positive, got {dt}"
            )));
        }
        Ok(Self { stepper, dt })
    }

    pub fn period(&self) -> f64 {
        self.stepper.forcing().period()
    }

    pub fn stepper(&self) -> &Stepper<'a> {
        &self.stepper
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// `Phi_T(omega0)`.
    pub fn flow_map(&self, omega0: &SpectralField) -> Result<SpectralField> {
        let state = StateView::new(omega0.clone(), 0.0);
        Ok(self.stepper.advance(&state, self.period(), self.dt)?.omega)
    }

    fn converged(&self, residual: f64, omega: &SpectralField, tol: f64) -> bool {
        residual <= tol * omega.norm().max(1.0)
    }

    /// Iterates `omega <- Phi_T(omega)`. Returns the best iterate with
    /// `converged = false` when `max_iter` is exhausted.
    pub fn find_orbit_picard(
        &self,
        omega0: &SpectralField,
        settings: &OrbitSettings,
    ) -> Result<OrbitResult> {
        if settings.tol.is_nan() || settings.tol <= 0.0 {
            return Err(Error::InvalidParameter("tol must be positive".to_string()));
        }
        let mut omega = omega0.clone();
        let mut history = Vec::new();
        let mut best: Option<(SpectralField, f64)> = None;
        for k in 0..settings.max_iter {
            let next = self.flow_map(&omega)?;
            let residual = next.difference(&omega)?.norm();
            history.push(residual);
            if self.converged(residual, &omega, settings.tol) {
                return Ok(OrbitResult {
                    omega_star: omega,
                    residual,
                    iterations: k + 1,
                    method: OrbitMethod::Picard,
                    converged: true,
                    floquet_magnitude: None,
                    inside_ball: None,
                    residual_history: history,
                    picard_fallbacks: 0,
                });
            }
            if best.as_ref().is_none_or(|(_, r)| residual < *r) {
                best = Some((omega, residual));
            }
            omega = next;
        }
        let (omega_star, residual) = match best {
            Some(b) => b,
            None => {
                let r = self.flow_map(&omega)?.difference(&omega)?.norm();
                (omega, r)
            }
        };
        Ok(OrbitResult {
            omega_star,
            residual,
            iterations: settings.max_iter,
            method: OrbitMethod::Picard,
            converged: false,
            floquet_magnitude: None,
            inside_ball: None,
            residual_history: history,
            picard_fallbacks: 0,
        })
    }

    fn with_coeffs(template: &SpectralField, coeffs: &[f64]) -> SpectralField {
        let mut f = template.clone();
        f.coeffs_mut().copy_from_slice(coeffs);
        f
    }

    /// Newton iteration on `F(omega) = Phi_T(omega) - omega` with
    /// finite-difference Jacobian-vector products and restarted GMRES.
    pub fn find_orbit_newton(
        &self,
        omega0: &SpectralField,
        settings: &OrbitSettings,
    ) -> Result<OrbitResult> {
        if settings.krylov_dim == 0 {
            return Err(Error::InvalidParameter(
                "krylov_dim must be >= 1".to_string(),
            ));
        }
        if settings.tol.is_nan() || settings.tol <= 0.0 {
            return Err(Error::InvalidParameter("tol must be positive".to_string()));
        }
        let mut omega = omega0.clone();
        let mut phi = self.flow_map(&omega)?;
        let mut residual = phi.difference(&omega)?.norm();
        let mut history = vec![residual];
        let mut fallbacks = 0;

        for it in 0..settings.max_iter {
            if self.converged(residual, &omega, settings.tol) {
                return Ok(self.newton_result(omega, residual, it, true, history, fallbacks));
            }
            let rhs: Vec<f64> = omega
                .coeffs()
                .iter()
                .zip(phi.coeffs())
                .map(|(w, p)| w - p)
                .collect();
            let omega_norm = omega.norm();
            let base = &phi;
            let at = &omega;
            let solve = gmres(
                |v| {
                    let dir = Self::with_coeffs(at, v);
                    let v_norm = dir.norm();
                    if v_norm == 0.0 {
                        return Ok(vec![0.0; v.len()]);
                    }
                    let h = if omega_norm > 0.0 {
                        1e-6 * omega_norm / v_norm
                    } else {
                        1e-6
                    };
                    let mut shifted = at.clone();
                    shifted.add_scaled(h, &dir)?;
                    let image = self.flow_map(&shifted)?;
                    Ok(image
                        .coeffs()
                        .iter()
                        .zip(base.coeffs())
                        .zip(v)
                        .map(|((p, b), vi)| (p - b) / h - vi)
                        .collect())
                },
                &rhs,
                settings.krylov_dim,
                settings.gmres_restarts,
                settings.gmres_tol,
            )?;

            let candidate = if solve.converged {
                let mut c = omega.clone();
                for (w, d) in c.coeffs_mut().iter_mut().zip(&solve.x) {
                    *w += d;
                }
                Some(c)
            } else {
                None
            };
            let accepted = match candidate {
                Some(c) => {
                    let c_phi = self.flow_map(&c)?;
                    let c_res = c_phi.difference(&c)?.norm();
                    if c_res < residual {
                        Some((c, c_phi, c_res))
                    } else {
                        None
                    }
                }
                None => None,
            };
            match accepted {
                Some((c, c_phi, c_res)) => {
                    omega = c;
                    phi = c_phi;
                    residual = c_res;
                }
                None => {
                    // Krylov stagnation or no decrease: take one Picard step
                    fallbacks += 1;
                    omega = phi;
                    phi = self.flow_map(&omega)?;
                    residual = phi.difference(&omega)?.norm();
                }
            }
            history.push(residual);
        }
        let converged = self.converged(residual, &omega, settings.tol);
        Ok(self.newton_result(
            omega,
            residual,
            settings.max_iter,
            converged,
            history,
            fallbacks,
        ))
    }

    fn newton_result(
        &self,
        omega_star: SpectralField,
        residual: f64,
        iterations: usize,
        converged: bool,
        residual_history: Vec<f64>,
        picard_fallbacks: usize,
    ) -> OrbitResult {
        OrbitResult {
            omega_star,
            residual,
            iterations,
            method: OrbitMethod::NewtonGmres,
            converged,
            floquet_magnitude: None,
            inside_ball: None,
            residual_history,
            picard_fallbacks,
        }
    }

    /// Dominant multiplier magnitude of `D Phi_T` at `omega_star`, by power
    /// iteration on central-difference directional derivatives.
    pub fn estimate_floquet(
        &self,
        omega_star: &SpectralField,
        power_iters: usize,
    ) -> Result<FloquetEstimate> {
        let base_norm = omega_star.norm();
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        let mut v = omega_star.clone();
        for c in v.coeffs_mut() {
            *c = rng.gen_range(-1.0..1.0);
        }
        let n = v.norm();
        v = v.scaled(1.0 / n);

        let mut estimate = 0.0;
        let mut previous = f64::NAN;
        for k in 0..power_iters.max(1) {
            let h = if base_norm > 0.0 {
                1e-6 * base_norm
            } else {
                1e-6
            };
            let mut plus = omega_star.clone();
            plus.add_scaled(h, &v)?;
            let mut minus = omega_star.clone();
            minus.add_scaled(-h, &v)?;
            let mut w = self.flow_map(&plus)?;
            w.add_scaled(-1.0, &self.flow_map(&minus)?)?;
            let w = w.scaled(0.5 / h);
            estimate = w.norm();
            if estimate == 0.0 {
                return Ok(FloquetEstimate {
                    magnitude: 0.0,
                    iterations: k + 1,
                    converged: true,
                });
            }
            if k >= 2 && (estimate - previous).abs() <= 1e-10 * estimate {
                return Ok(FloquetEstimate {
                    magnitude: estimate,
                    iterations: k + 1,
                    converged: true,
                });
            }
            previous = estimate;
            v = w.scaled(1.0 / estimate);
        }
        Ok(FloquetEstimate {
            magnitude: estimate,
            iterations: power_iters.max(1),
            converged: false,
        })
    }

    /// Re-simulates two periods from `omega_star`, sampling `samples` phases
    /// per period. Each inter-sample interval is stepped with `dt` and a
    /// trimmed final step; when `T / (samples dt)` is an integer the step
    /// grid coincides with the one used by [`PeriodMap::flow_map`].
    pub fn resimulate(
        &self,
        omega_star: &SpectralField,
        samples: usize,
    ) -> Result<PeriodicityReport> {
        let samples = samples.max(1);
        let period = self.period();
        let mut state = StateView::new(omega_star.clone(), 0.0);
        let mut states = vec![state.omega.clone()];
        let mut times = vec![0.0];
        for k in 1..=2 * samples {
            let t_next = k as f64 * period / samples as f64;
            state = self.stepper.advance(&state, t_next, self.dt)?;
            states.push(state.omega.clone());
            times.push(t_next);
        }
        let mut max_defect: f64 = 0.0;
        for k in 0..samples {
            let d = states[k + samples].difference(&states[k])?.norm();
            max_defect = max_defect.max(d);
        }

        let domain = omega_star.domain();
        let mut dominant_mode = (1, 1);
        let mut dominant_amplitude = -1.0;
        for m in 1..=domain.mx() {
            for n in 1..=domain.my() {
                let (mut re, mut im) = (0.0, 0.0);
                for (k, s) in states.iter().take(samples).enumerate() {
                    let phase = 2.0 * PI * k as f64 / samples as f64;
                    re += s.get(m, n) * phase.cos();
                    im -= s.get(m, n) * phase.sin();
                }
                let amp = 2.0 / samples as f64 * re.hypot(im);
                if amp > dominant_amplitude {
                    dominant_amplitude = amp;
                    dominant_mode = (m, n);
                }
            }
        }
        Ok(PeriodicityReport {
            max_defect,
            sample_times: times[..samples].to_vec(),
            samples: states[..samples].to_vec(),
            dominant_mode,
            dominant_amplitude,
        })
    }
}
