//! Integrating-factor Runge–Kutta time stepping.
//!
//! The diagonal dissipation `-(nu |k|^2 + r)` is integrated exactly through
//! the factor `exp(-(nu |k|^2 + r) dt)`; Kutta's third-order scheme handles
//! the Jacobian, the beta term and the forcing in the transformed variable.

use crate::dynamics::{explicit_terms, Dynamics, ForcingSpec, ModelParams, StateView};
use crate::error::{Error, Result};
use crate::spectral::{Basis, SpectralField};
use crate::theory::DissipativityEstimate;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepConfig {
    pub dt: f64,
    pub t_end: f64,
    pub record_every: usize,
    pub cfl_safety: f64,
}

impl StepConfig {
    pub fn new(dt: f64, t_end: f64) -> Result<Self> {
        let cfg = Self {
            dt,
            t_end,
            record_every: 10,
            cfl_safety: 0.5,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_record_every(mut self, every: usize) -> Self {
        self.record_every = every;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "dt must be positive, got {}",
                self.dt
            )));
        }
        if !(self.t_end.is_finite() && self.t_end >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "t_end must be non-negative, got {}",
                self.t_end
            )));
        }
        if self.record_every == 0 {
            return Err(Error::InvalidParameter(
                "record_every must be >= 1".to_string(),
            ));
        }
        if !(self.cfl_safety > 0.0 && self.cfl_safety <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "cfl_safety must lie in (0, 1], got {}",
                self.cfl_safety
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub enstrophy: f64,
    pub energy: f64,
    pub forcing_norm2: f64,
    pub envelope: Option<f64>,
}

/// Optional Gronwall envelope attached to a run.
#[derive(Debug, Clone, Copy)]
pub struct EnvelopeArm<'a> {
    pub estimate: &'a DissipativityEstimate,
    pub initial_enstrophy: f64,
    pub t0: f64,
}

/// Advances one trajectory of the model.
#[derive(Debug, Clone)]
pub struct Stepper<'a> {
    basis: &'a Basis,
    params: ModelParams,
    forcing: &'a ForcingSpec,
    dynamics: Dynamics,
}

impl<'a> Stepper<'a> {
    pub fn new(
        basis: &'a Basis,
        params: ModelParams,
        forcing: &'a ForcingSpec,
        dynamics: Dynamics,
    ) -> Result<Self> {
        forcing.check_truncation(basis.domain())?;
        Ok(Self {
            basis,
            params,
            forcing,
            dynamics,
        })
    }

    pub fn basis(&self) -> &'a Basis {
        self.basis
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn forcing(&self) -> &'a ForcingSpec {
        self.forcing
    }

    pub fn dynamics(&self) -> Dynamics {
        self.dynamics
    }

    fn decay_factors(&self, dt: f64) -> Vec<f64> {
        let d = self.basis.domain();
        let mut f = Vec::with_capacity(d.mode_count());
        for m in 1..=d.mx() {
            for n in 1..=d.my() {
                f.push((-self.params.decay_rate(d, m, n) * dt).exp());
            }
        }
        f
    }

    fn explicit(&self, omega: SpectralField, t: f64) -> Result<SpectralField> {
        let state = StateView::new(omega, t);
        explicit_terms(
            self.basis,
            &state,
            &self.params,
            self.forcing,
            self.dynamics,
        )
    }

    /// One step of length `dt`; `psi` is rediagnosed afterwards.
    pub fn step(&self, state: &StateView, dt: f64) -> Result<StateView> {
        let full = self.decay_factors(dt);
        let half = self.decay_factors(0.5 * dt);
        self.step_with(state, dt, &full, &half)
    }

    fn step_with(
        &self,
        state: &StateView,
        dt: f64,
        full: &[f64],
        half: &[f64],
    ) -> Result<StateView> {
        let w0 = state.omega.coeffs();
        let t = state.t;

        let n1 = self.explicit(state.omega.clone(), t)?;

        let mut w2 = state.omega.clone();
        for (k, w) in w2.coeffs_mut().iter_mut().enumerate() {
            *w = half[k] * (w0[k] + 0.5 * dt * n1.coeffs()[k]);
        }
        let n2 = self.explicit(w2, t + 0.5 * dt)?;

        let mut w3 = state.omega.clone();
        for (k, w) in w3.coeffs_mut().iter_mut().enumerate() {
            *w = full[k] * (w0[k] - dt * n1.coeffs()[k]) + 2.0 * dt * half[k] * n2.coeffs()[k];
        }
        let n3 = self.explicit(w3, t + dt)?;

        let mut next = state.omega.clone();
        for (k, w) in next.coeffs_mut().iter_mut().enumerate() {
            *w = full[k] * (w0[k] + dt / 6.0 * n1.coeffs()[k])
                + dt / 6.0 * (4.0 * half[k] * n2.coeffs()[k] + n3.coeffs()[k]);
        }
        if !next.is_finite() {
            return Err(Error::BlowUp {
                time: t + dt,
                records: Vec::new(),
            });
        }
        Ok(StateView::new(next, t + dt))
    }

    pub fn record(
        &self,
        state: &StateView,
        envelope: Option<&EnvelopeArm<'_>>,
    ) -> DiagnosticsRecord {
        let envelope = envelope.and_then(|arm| {
            arm.estimate
                .envelope(arm.initial_enstrophy, state.t - arm.t0)
                .ok()
        });
        DiagnosticsRecord {
            t: state.t,
            enstrophy: state.enstrophy(),
            energy: state.energy(),
            forcing_norm2: self.forcing.norm2_at(self.basis.domain(), state.t),
            envelope,
        }
    }

    /// Advances from `state.t` to `t_end` without collecting diagnostics.
    pub fn advance(&self, state: &StateView, t_end: f64, dt: f64) -> Result<StateView> {
        Ok(self.drive(state, t_end, dt, |_, _| Ok(()))?.1)
    }

    /// Calls `visit(step_index, state)` after every completed step; the
    /// last step is trimmed so the final time equals `t_end` exactly.
    pub fn drive(
        &self,
        state: &StateView,
        t_end: f64,
        dt: f64,
        mut visit: impl FnMut(usize, &StateView) -> Result<()>,
    ) -> Result<(usize, StateView)> {
        let t0 = state.t;
        let span = t_end - t0;
        if span <= 0.0 {
            return Ok((0, state.clone()));
        }
        let steps = ((span / dt) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
        let full = self.decay_factors(dt);
        let half = self.decay_factors(0.5 * dt);
        let mut current = state.clone();
        for k in 1..=steps {
            let mut next = if k < steps {
                self.step_with(&current, dt, &full, &half)?
            } else {
                let last = t_end - (t0 + (steps - 1) as f64 * dt);
                let mut s = if last == dt {
                    self.step_with(&current, dt, &full, &half)?
                } else {
                    self.step(&current, last)?
                };
                s.t = t_end;
                s
            };
            if k < steps {
                next.t = t0 + k as f64 * dt;
            }
            visit(k, &next)?;
            current = next;
        }
        Ok((steps, current))
    }

    /// Repeated [`Stepper::step`] to `cfg.t_end` with diagnostics every
    /// `cfg.record_every` steps, plus the initial and final states.
    pub fn integrate(
        &self,
        state: &StateView,
        cfg: &StepConfig,
        envelope: Option<&EnvelopeArm<'_>>,
    ) -> Result<(StateView, Vec<DiagnosticsRecord>)> {
        cfg.validate()?;
        let dt_max = check_cfl(self.basis, state, &self.params, cfg.cfl_safety);
        if cfg.dt > dt_max {
            eprintln!(
                "warning: dt = {} exceeds the stability estimate {dt_max:.3e} at t = {}",
                cfg.dt, state.t
            );
        }
        let mut records = vec![self.record(state, envelope)];
        let mut last_recorded = 0;
        let outcome = self.drive(state, cfg.t_end, cfg.dt, |k, s| {
            if k % cfg.record_every == 0 {
                records.push(self.record(s, envelope));
                last_recorded = k;
            }
            Ok(())
        });
        match outcome {
            Ok((steps, last)) => {
                if steps > 0 && last_recorded != steps {
                    records.push(self.record(&last, envelope));
                }
                Ok((last, records))
            }
            Err(Error::BlowUp { time, .. }) => Err(Error::BlowUp { time, records }),
            Err(e) => Err(e),
        }
    }
}

/// Largest velocity components `(max |u|, max |v|)` on the padded mesh,
/// with `u = -psi_y`, `v = psi_x`.
pub fn max_velocity(basis: &Basis, state: &StateView) -> Result<(f64, f64)> {
    let u = basis.dy(&state.psi)?.max_abs();
    let v = basis.dx(&state.psi)?.max_abs();
    Ok((u, v))
}

/// Stable step estimate `safety * min(dx / max|u|, dy / max|v|, sqrt(3) / omega_beta)`,
/// where `omega_beta = beta Ly / (2 pi)` bounds the frequency of the projected
/// beta term. Returns `f64::INFINITY` when nothing limits the step.
pub fn check_cfl(basis: &Basis, state: &StateView, params: &ModelParams, safety: f64) -> f64 {
    let d = basis.domain();
    let Ok((u, v)) = max_velocity(basis, state) else {
        return f64::INFINITY;
    };
    let mut dt = f64::INFINITY;
    if u > 0.0 {
        dt = dt.min(d.dx_grid() / u);
    }
    if v > 0.0 {
        dt = dt.min(d.dy_grid() / v);
    }
    if params.beta > 0.0 {
        let omega_beta = params.beta * d.ly() / (2.0 * std::f64::consts::PI);
        dt = dt.min(3f64.sqrt() / omega_beta);
    }
    safety * dt
}
