//! Closed-form objects: the dissipativity condition and energy estimate,
//! the Gronwall envelope, the Poincaré constant, the inviscid Rossby basin
//! modes, and the forced periodic response of a single decoupled mode.

use std::f64::consts::PI;

use crate::dynamics::{ForcingSpec, ModelParams};
use crate::error::{Error, Result};
use crate::spectral::{Domain, SpectralField};
use crate::stepper::DiagnosticsRecord;

/// Outcome of testing `r + pi nu / |D| > (beta / 2)(|D| / pi + 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub satisfied: bool,
}

pub fn check_condition(params: &ModelParams, domain: &Domain) -> ConditionCheck {
    let area = domain.area();
    let lhs = params.r + PI * params.nu / area;
    let rhs = 0.5 * params.beta * (area / PI + 1.0);
    ConditionCheck {
        lhs,
        rhs,
        margin: lhs - rhs,
        satisfied: lhs > rhs,
    }
}

/// Supremum over one period of `||f(., ., t)||^2`.
///
/// A forcing confined to one spatial mode has the closed form
/// `(Lx Ly / 4)(|a_const| + sqrt(a_cos^2 + a_sin^2))^2`. Otherwise the phase
/// is sampled at 720 points and the best sample refined by golden-section
/// search on its neighbouring interval.
pub fn sup_forcing_norm2(spec: &ForcingSpec, domain: &Domain) -> f64 {
    let terms = spec.terms();
    if terms.is_empty() {
        return 0.0;
    }
    let first = (terms[0].m, terms[0].n);
    if terms.iter().all(|t| (t.m, t.n) == first) {
        let (c, s, k) = terms.iter().fold((0.0, 0.0, 0.0), |acc, t| {
            (acc.0 + t.a_cos, acc.1 + t.a_sin, acc.2 + t.a_const)
        });
        let peak = k.abs() + c.hypot(s);
        return domain.parseval() * peak * peak;
    }

    const SAMPLES: usize = 720;
    let period = spec.period();
    let at = |phase: f64| spec.norm2_at(domain, phase / (2.0 * PI) * period);
    let h = 2.0 * PI / SAMPLES as f64;
    let (best_k, best) =
        (0..SAMPLES)
            .map(|k| (k, at(k as f64 * h)))
            .fold(
                (0, f64::NEG_INFINITY),
                |acc, v| if v.1 > acc.1 { v } else { acc },
            );

    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = ((best_k as f64 - 1.0) * h, (best_k as f64 + 1.0) * h);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (at(c), at(d));
    for _ in 0..80 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = at(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = at(d);
        }
    }
    best.max(fc).max(fd)
}

/// Constants of the enstrophy estimate
/// `(1/2) d/dt ||omega||^2 + alpha ||omega||^2 <= M`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DissipativityEstimate {
    /// Young-inequality weight.
    pub epsilon: f64,
    /// `r + pi nu / |D| - (beta / 2)(|D| / pi + 1) - epsilon`.
    pub alpha: f64,
    /// `sup_t ||f||^2 / epsilon`.
    pub m_bound: f64,
    pub forcing_sup_norm2: f64,
    /// `M / alpha`, present only when `alpha > 0`.
    pub absorbing_radius2: Option<f64>,
    pub satisfied: bool,
    pub margin: f64,
}

impl DissipativityEstimate {
    /// Gronwall bound on `||omega(t)||^2` from `||omega(0)||^2 = e0`.
    pub fn envelope(&self, e0: f64, t: f64) -> Result<f64> {
        gronwall_envelope(self, e0, t)
    }

    pub fn is_armed(&self) -> bool {
        self.alpha > 0.0
    }
}

/// Builds the estimate for a given `epsilon`.
///
/// When the condition fails the estimate is still returned, with
/// `satisfied = false` and no absorbing radius. When the condition holds but
/// `epsilon` consumes the whole margin, [`Error::EpsilonTooLarge`] is returned.
pub fn make_estimate(
    params: &ModelParams,
    domain: &Domain,
    spec: &ForcingSpec,
    epsilon: f64,
) -> Result<DissipativityEstimate> {
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    let cond = check_condition(params, domain);
    let alpha = cond.margin - epsilon;
    if cond.satisfied && alpha <= 0.0 {
        return Err(Error::EpsilonTooLarge {
            epsilon,
            margin: cond.margin,
        });
    }
    let sup = sup_forcing_norm2(spec, domain);
    let m_bound = sup / epsilon;
    Ok(DissipativityEstimate {
        epsilon,
        alpha,
        m_bound,
        forcing_sup_norm2: sup,
        absorbing_radius2: (alpha > 0.0).then(|| m_bound / alpha),
        satisfied: cond.satisfied,
        margin: cond.margin,
    })
}

/// Estimate with `epsilon` set to half the condition margin.
pub fn default_estimate(
    params: &ModelParams,
    domain: &Domain,
    spec: &ForcingSpec,
) -> Result<DissipativityEstimate> {
    let cond = check_condition(params, domain);
    if !cond.satisfied {
        return Err(Error::ConditionNotSatisfied {
            margin: cond.margin,
        });
    }
    make_estimate(params, domain, spec, 0.5 * cond.margin)
}

/// `(e0 - M/alpha) exp(-2 alpha t) + M/alpha`.
pub fn gronwall_envelope(est: &DissipativityEstimate, e0: f64, t: f64) -> Result<f64> {
    if est.alpha <= 0.0 {
        return Err(Error::NonPositiveAlpha(est.alpha));
    }
    let limit = est.m_bound / est.alpha;
    Ok((e0 - limit) * (-2.0 * est.alpha * t).exp() + limit)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvelopeReport {
    /// `max_t (enstrophy(t) - envelope(t))` over the records.
    pub max_excess: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub final_enstrophy: f64,
    pub absorbing_radius2: f64,
    /// Final enstrophy within `M/alpha + 1e-6`.
    pub inside_ball: bool,
}

/// Checks every record against the Gronwall envelope started at the first
/// record's time, with tolerance `1e-8 max(e0, 1)`.
pub fn verify_envelope(
    records: &[DiagnosticsRecord],
    est: &DissipativityEstimate,
    e0: f64,
) -> Result<EnvelopeReport> {
    let radius2 = est
        .absorbing_radius2
        .ok_or(Error::NonPositiveAlpha(est.alpha))?;
    let t0 = records.first().map_or(0.0, |r| r.t);
    let mut max_excess = f64::NEG_INFINITY;
    for r in records {
        let env = gronwall_envelope(est, e0, r.t - t0)?;
        max_excess = max_excess.max(r.enstrophy - env);
    }
    let tolerance = 1e-8 * e0.max(1.0);
    let final_enstrophy = records.last().map_or(e0, |r| r.enstrophy);
    Ok(EnvelopeReport {
        max_excess,
        tolerance,
        pass: max_excess <= tolerance,
        final_enstrophy,
        absorbing_radius2: radius2,
        inside_ball: final_enstrophy <= radius2 + 1e-6,
    })
}

/// Rayleigh-quotient scan of the retained modes against the Poincaré
/// constant `|D| / pi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoincareReport {
    /// `pi / |D|`, the lower bound on `||grad g||^2 / ||g||^2` being checked.
    pub bound: f64,
    /// Smallest quotient over the truncation.
    pub min_quotient: f64,
    pub argmin: (usize, usize),
    /// `pi^2 (1/Lx^2 + 1/Ly^2)`, the first Dirichlet eigenvalue.
    pub sharp_constant: f64,
    pub holds: bool,
}

/// The Laplacian is diagonal in the sine basis, so the minimum of the
/// quotient over all fields equals the minimum over single modes.
pub fn poincare_check(domain: &Domain) -> PoincareReport {
    let mut min_quotient = f64::INFINITY;
    let mut argmin = (1, 1);
    for m in 1..=domain.mx() {
        for n in 1..=domain.my() {
            let q = domain.wavenumber2(m, n);
            if q < min_quotient {
                min_quotient = q;
                argmin = (m, n);
            }
        }
    }
    let bound = PI / domain.area();
    PoincareReport {
        bound,
        min_quotient,
        argmin,
        sharp_constant: PI * PI * (1.0 / domain.lx().powi(2) + 1.0 / domain.ly().powi(2)),
        holds: min_quotient >= bound,
    }
}

/// Inviscid Rossby basin mode on the unit square,
/// `psi = cos(k_c x + sigma t) sin(m pi x) sin(n pi y)` with
/// `sigma = -beta / (2 pi sqrt(m^2 + n^2))` and `k_c = beta / (2 sigma)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearMode {
    pub m: usize,
    pub n: usize,
    pub beta: f64,
    pub sigma: f64,
    pub period: f64,
    pub carrier_wavenumber: f64,
}

impl LinearMode {
    /// Closed-form stream function at a point.
    pub fn value(&self, x: f64, y: f64, t: f64) -> f64 {
        (self.carrier_wavenumber * x + self.sigma * t).cos()
            * (self.m as f64 * PI * x).sin()
            * (self.n as f64 * PI * y).sin()
    }
}

fn require_unit_square(domain: &Domain) -> Result<()> {
    if domain.is_unit_square() {
        Ok(())
    } else {
        Err(Error::UnsupportedDomain(format!(
            "basin modes are derived on the unit square, got {} x {}",
            domain.lx(),
            domain.ly()
        )))
    }
}

pub fn dispersion(m: usize, n: usize, beta: f64, domain: &Domain) -> Result<LinearMode> {
    require_unit_square(domain)?;
    if m == 0 || n == 0 {
        return Err(Error::InvalidParameter(
            "mode indices start at 1".to_string(),
        ));
    }
    if !(beta.is_finite() && beta > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "basin modes need beta > 0, got {beta}"
        )));
    }
    let k = ((m * m + n * n) as f64).sqrt();
    let sigma = -beta / (2.0 * PI * k);
    Ok(LinearMode {
        m,
        n,
        beta,
        sigma,
        period: 2.0 * PI / sigma.abs(),
        carrier_wavenumber: beta / (2.0 * sigma),
    })
}

/// `sin(u) / u`, continuous at zero.
fn sinc(u: f64) -> f64 {
    if u.abs() < 1e-8 {
        1.0 - u * u / 6.0
    } else {
        u.sin() / u
    }
}

/// `int_0^1 cos(q x + b) dx`, written to stay accurate as `q -> 0`.
fn cos_integral(q: f64, b: f64) -> f64 {
    (b + 0.5 * q).cos() * sinc(0.5 * q)
}

/// Galerkin projection of a basin mode at time `t` onto the truncation.
pub fn linear_mode_field(
    mode: &LinearMode,
    t: f64,
    domain: &std::sync::Arc<Domain>,
) -> Result<SpectralField> {
    require_unit_square(domain)?;
    domain.check_mode(mode.m, mode.n)?;
    let a = mode.carrier_wavenumber;
    let b = mode.sigma * t;
    let m = mode.m as f64;
    let mut f = SpectralField::zeros(domain);
    for k in 1..=domain.mx() {
        let kf = k as f64;
        let diff = (m - kf) * PI;
        let sum = (m + kf) * PI;
        let c = 0.5
            * (cos_integral(a + diff, b) + cos_integral(a - diff, b)
                - cos_integral(a + sum, b)
                - cos_integral(a - sum, b));
        f.set(k, mode.n, c);
    }
    Ok(f)
}

/// Unique periodic solution of
/// `d a / dt = -lambda a + a_cos cos(Omega t) + a_sin sin(Omega t) + a_const`:
/// `a(t) = cos_coeff cos(Omega t) + sin_coeff sin(Omega t) + mean`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForcedResponse {
    pub m: usize,
    pub n: usize,
    pub decay_rate: f64,
    pub frequency: f64,
    pub cos_coeff: f64,
    pub sin_coeff: f64,
    pub mean: f64,
    /// Amplitude of the oscillating part, `sqrt(a_cos^2 + a_sin^2) / sqrt(lambda^2 + Omega^2)`.
    pub amplitude: f64,
}

impl ForcedResponse {
    pub fn from_scalar(
        decay_rate: f64,
        frequency: f64,
        a_cos: f64,
        a_sin: f64,
        a_const: f64,
    ) -> Result<Self> {
        if decay_rate.is_nan() || decay_rate <= 0.0 {
            return Err(Error::NoDecay(decay_rate));
        }
        let denom = decay_rate * decay_rate + frequency * frequency;
        let cos_coeff = (decay_rate * a_cos - frequency * a_sin) / denom;
        let sin_coeff = (frequency * a_cos + decay_rate * a_sin) / denom;
        Ok(Self {
            m: 0,
            n: 0,
            decay_rate,
            frequency,
            cos_coeff,
            sin_coeff,
            mean: a_const / decay_rate,
            amplitude: a_cos.hypot(a_sin) / denom.sqrt(),
        })
    }

    /// Mode coefficient of the response at time `t`.
    pub fn evaluate(&self, t: f64) -> f64 {
        let phase = self.frequency * t;
        self.cos_coeff * phase.cos() + self.sin_coeff * phase.sin() + self.mean
    }

    pub fn field_at(&self, domain: &std::sync::Arc<Domain>, t: f64) -> Result<SpectralField> {
        SpectralField::single_mode(domain, self.m, self.n, self.evaluate(t))
    }
}

/// Periodic response of the decoupled (`beta = 0`) dynamics to a single
/// forcing term. The Jacobian of a single mode vanishes identically, so this
/// is also the periodic solution of the full nonlinear model.
pub fn linear_forced_response(
    params: &ModelParams,
    spec: &ForcingSpec,
    domain: &Domain,
) -> Result<ForcedResponse> {
    if params.beta != 0.0 {
        return Err(Error::InvalidParameter(format!(
            "closed-form response needs beta = 0, got {}",
            params.beta
        )));
    }
    let [term] = spec.terms() else {
        return Err(Error::InvalidParameter(format!(
            "closed-form response needs exactly one forcing term, got {}",
            spec.terms().len()
        )));
    };
    domain.check_mode(term.m, term.n)?;
    let lambda = params.decay_rate(domain, term.m, term.n);
    let mut resp = ForcedResponse::from_scalar(
        lambda,
        spec.angular_frequency(),
        term.a_cos,
        term.a_sin,
        term.a_const,
    )?;
    resp.m = term.m;
    resp.n = term.n;
    Ok(resp)
}
