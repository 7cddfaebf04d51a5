//! Right-hand side of the forced, dissipative vorticity equation
//!
//! `omega_t + J(psi, omega) + beta psi_x = nu Laplacian(omega) - r omega + f(x, y, t)`,
//! `omega = Laplacian(psi)`.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::spectral::{Basis, Domain, GridField, SpectralField};

/// Physical constants. Zeros are allowed so the inviscid linear problem can
/// be reproduced; the dissipativity estimate imposes its own conditions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    pub beta: f64,
    pub nu: f64,
    pub r: f64,
}

impl ModelParams {
    pub fn new(beta: f64, nu: f64, r: f64) -> Result<Self> {
        for (name, v) in [("beta", beta), ("nu", nu), ("r", r)] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be finite and non-negative, got {v}"
                )));
            }
        }
        Ok(Self { beta, nu, r })
    }

    /// Per-mode linear decay rate `nu |k|^2 + r`.
    pub fn decay_rate(&self, domain: &Domain, m: usize, n: usize) -> f64 {
        self.nu * domain.wavenumber2(m, n) + self.r
    }
}

/// Which terms the right-hand side carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Dynamics {
    #[default]
    Nonlinear,
    /// Jacobian omitted.
    Linearized,
}

/// One sine mode of the wind forcing with first-harmonic time dependence:
/// `[a_cos cos(2 pi t / T) + a_sin sin(2 pi t / T) + a_const] sin(m pi x / Lx) sin(n pi y / Ly)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForcingTerm {
    pub m: usize,
    pub n: usize,
    pub a_cos: f64,
    pub a_sin: f64,
    pub a_const: f64,
}

impl ForcingTerm {
    pub fn new(m: usize, n: usize, a_cos: f64, a_sin: f64, a_const: f64) -> Self {
        Self {
            m,
            n,
            a_cos,
            a_sin,
            a_const,
        }
    }

    pub fn amplitude_at(&self, phase: f64) -> f64 {
        self.a_cos * phase.cos() + self.a_sin * phase.sin() + self.a_const
    }
}

/// Time-periodic wind forcing with period `T`.
#[derive(Debug, Clone, PartialEq)]
pub struct ForcingSpec {
    period: f64,
    terms: Vec<ForcingTerm>,
}

impl ForcingSpec {
    pub fn new(period: f64, terms: Vec<ForcingTerm>) -> Result<Self> {
        if !(period.is_finite() && period > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "forcing period must be positive, got {period}"
            )));
        }
        for t in &terms {
            if !(t.a_cos.is_finite() && t.a_sin.is_finite() && t.a_const.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "forcing amplitudes for mode ({}, {}) must be finite",
                    t.m, t.n
                )));
            }
            if t.m == 0 || t.n == 0 {
                return Err(Error::InvalidParameter(
                    "forcing mode indices start at 1".to_string(),
                ));
            }
        }
        Ok(Self { period, terms })
    }

    pub fn unforced(period: f64) -> Result<Self> {
        Self::new(period, Vec::new())
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn terms(&self) -> &[ForcingTerm] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms
            .iter()
            .all(|t| t.a_cos == 0.0 && t.a_sin == 0.0 && t.a_const == 0.0)
    }

    pub fn angular_frequency(&self) -> f64 {
        2.0 * PI / self.period
    }

    pub fn check_truncation(&self, domain: &Domain) -> Result<()> {
        self.terms
            .iter()
            .try_for_each(|t| domain.check_mode(t.m, t.n))
    }

    /// `||f(., ., t)||^2` in L2.
    pub fn norm2_at(&self, domain: &Domain, t: f64) -> f64 {
        let phase = self.angular_frequency() * t;
        // terms may repeat a mode, so accumulate per mode first
        let mut per_mode: Vec<((usize, usize), f64)> = Vec::new();
        for term in &self.terms {
            let a = term.amplitude_at(phase);
            match per_mode.iter_mut().find(|(k, _)| *k == (term.m, term.n)) {
                Some((_, v)) => *v += a,
                None => per_mode.push(((term.m, term.n), a)),
            }
        }
        domain.parseval() * per_mode.iter().map(|(_, a)| a * a).sum::<f64>()
    }
}

/// Prognostic vorticity with its diagnosed stream function.
#[derive(Debug, Clone, PartialEq)]
pub struct StateView {
    pub omega: SpectralField,
    pub psi: SpectralField,
    pub t: f64,
}

impl StateView {
    pub fn new(omega: SpectralField, t: f64) -> Self {
        let psi = omega.invert_laplacian();
        Self { omega, psi, t }
    }

    pub fn rest(basis: &Basis, t: f64) -> Self {
        Self::new(basis.zeros(), t)
    }

    /// Enstrophy `||omega||^2`.
    pub fn enstrophy(&self) -> f64 {
        self.omega.norm2()
    }

    /// Kinetic energy `(1/2) ||grad psi||^2`.
    pub fn energy(&self) -> f64 {
        0.5 * self.psi.grad_norm2()
    }
}

/// Pointwise `psi_x omega_y - psi_y omega_x` on the padded mesh.
pub fn jacobian_grid(
    basis: &Basis,
    psi: &SpectralField,
    omega: &SpectralField,
) -> Result<GridField> {
    let mut out = basis.dx(psi)?;
    let py = basis.dy(psi)?;
    let ox = basis.dx(omega)?;
    let oy = basis.dy(omega)?;
    for (k, v) in out.values_mut().iter_mut().enumerate() {
        *v = *v * oy.values()[k] - py.values()[k] * ox.values()[k];
    }
    Ok(out)
}

/// Galerkin projection of `J(psi, omega)`.
pub fn jacobian(
    basis: &Basis,
    psi: &SpectralField,
    omega: &SpectralField,
) -> Result<SpectralField> {
    if !psi.same_domain(omega) {
        return Err(Error::DomainMismatch);
    }
    basis.from_grid(&jacobian_grid(basis, psi, omega)?)
}

/// Galerkin projection of `beta psi_x`, applied through the exact x-coupling
/// of [`beta_coupling_matrix`].
pub fn beta_term(basis: &Basis, psi: &SpectralField, beta: f64) -> Result<SpectralField> {
    basis.check(psi)?;
    let mut out = basis.zeros();
    add_beta(&mut out, psi, beta);
    Ok(out)
}

/// `out += s P(psi_x)` with `s` absorbing beta and sign.
fn add_beta(out: &mut SpectralField, psi: &SpectralField, s: f64) {
    if s == 0.0 {
        return;
    }
    let d = psi.domain().clone();
    let c = beta_coupling_matrix(&d, s);
    let my = d.my();
    let src = psi.coeffs();
    let dst = out.coeffs_mut();
    for (k, row) in c.iter().enumerate() {
        for (m, &ckm) in row.iter().enumerate() {
            if ckm == 0.0 {
                continue;
            }
            let from = &src[m * my..(m + 1) * my];
            for (o, p) in dst[k * my..(k + 1) * my].iter_mut().zip(from) {
                *o += ckm * p;
            }
        }
    }
}

/// Dense x-coupling of the projected beta term: coefficient `(k, n)` of
/// `P(beta psi_x)` is `sum_m C[k-1][m-1] psi_(m, n)`. Only modes of opposite
/// x-parity couple.
pub fn beta_coupling_matrix(domain: &Domain, beta: f64) -> Vec<Vec<f64>> {
    let mx = domain.mx();
    let lx = domain.lx();
    (1..=mx)
        .map(|k| {
            (1..=mx)
                .map(|m| {
                    if (k + m) % 2 == 0 {
                        0.0
                    } else {
                        let (k, m) = (k as f64, m as f64);
                        beta * 4.0 * m * k / (lx * (k * k - m * m))
                    }
                })
                .collect()
        })
        .collect()
}

/// Spectral field of `f(., ., t)`.
pub fn forcing_at(basis: &Basis, spec: &ForcingSpec, t: f64) -> Result<SpectralField> {
    let domain = basis.domain();
    spec.check_truncation(domain)?;
    if !t.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "forcing time must be finite, got {t}"
        )));
    }
    let phase = spec.angular_frequency() * t;
    let mut f = basis.zeros();
    for term in spec.terms() {
        let k = domain.index(term.m, term.n);
        f.coeffs_mut()[k] += term.amplitude_at(phase);
    }
    Ok(f)
}

/// `-J(psi, omega) - beta psi_x`.
pub(crate) fn advection(
    basis: &Basis,
    psi: &SpectralField,
    omega: &SpectralField,
    beta: f64,
    dynamics: Dynamics,
) -> Result<SpectralField> {
    let mut out = match dynamics {
        Dynamics::Nonlinear => {
            let mut j = jacobian(basis, psi, omega)?;
            j.coeffs_mut().iter_mut().for_each(|c| *c = -*c);
            j
        }
        Dynamics::Linearized => {
            basis.check(psi)?;
            basis.zeros()
        }
    };
    add_beta(&mut out, psi, -beta);
    Ok(out)
}

/// Everything in the tendency except the diagonal dissipation.
pub(crate) fn explicit_terms(
    basis: &Basis,
    state: &StateView,
    params: &ModelParams,
    spec: &ForcingSpec,
    dynamics: Dynamics,
) -> Result<SpectralField> {
    let mut out = advection(basis, &state.psi, &state.omega, params.beta, dynamics)?;
    out.add_scaled(1.0, &forcing_at(basis, spec, state.t)?)?;
    Ok(out)
}

fn apply_dissipation(
    basis: &Basis,
    params: &ModelParams,
    omega: &SpectralField,
    out: &mut SpectralField,
) {
    let d = basis.domain();
    for m in 1..=d.mx() {
        for n in 1..=d.my() {
            let k = d.index(m, n);
            out.coeffs_mut()[k] -= params.decay_rate(d, m, n) * omega.coeffs()[k];
        }
    }
}

fn tendency_with(
    basis: &Basis,
    state: &StateView,
    params: &ModelParams,
    spec: &ForcingSpec,
    dynamics: Dynamics,
) -> Result<SpectralField> {
    if !state.omega.same_domain(&state.psi) {
        return Err(Error::DomainMismatch);
    }
    let mut out = explicit_terms(basis, state, params, spec, dynamics)?;
    apply_dissipation(basis, params, &state.omega, &mut out);
    Ok(out)
}

/// `d omega / dt = -J(psi, omega) - beta psi_x + nu Laplacian(omega) - r omega + f(t)`.
pub fn tendency(
    basis: &Basis,
    state: &StateView,
    params: &ModelParams,
    spec: &ForcingSpec,
) -> Result<SpectralField> {
    tendency_with(basis, state, params, spec, Dynamics::Nonlinear)
}

/// [`tendency`] without the Jacobian.
pub fn linear_tendency(
    basis: &Basis,
    state: &StateView,
    params: &ModelParams,
    spec: &ForcingSpec,
) -> Result<SpectralField> {
    tendency_with(basis, state, params, spec, Dynamics::Linearized)
}

pub fn tendency_for(
    dynamics: Dynamics,
    basis: &Basis,
    state: &StateView,
    params: &ModelParams,
    spec: &ForcingSpec,
) -> Result<SpectralField> {
    tendency_with(basis, state, params, spec, dynamics)
}
