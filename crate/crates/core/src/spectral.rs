//! Sine-Galerkin basis on a rectangle with homogeneous Dirichlet walls.
//!
//! A field is stored as coefficients of `sin(m pi x / Lx) sin(n pi y / Ly)`,
//! `1 <= m <= Mx`, `1 <= n <= My`. Every basis function and every even-order
//! derivative of it vanishes on the walls, so both `psi = 0` and
//! `omega = Laplacian(psi) = 0` hold structurally.
//!
//! Products are formed on a padded uniform mesh that includes the wall nodes.
//! With `N >= 2M` intervals per direction the trapezoidal rule integrates the
//! cubic trigonometric products that appear in a Galerkin projection exactly,
//! so projections of quadratic terms are alias-free.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Rectangular basin `[0, Lx] x [0, Ly]` together with its spectral truncation.
#[derive(Debug, Clone, PartialEq)]
pub struct Domain {
    lx: f64,
    ly: f64,
    mx: usize,
    my: usize,
    padded_nx: usize,
    padded_ny: usize,
}

impl Domain {
    /// Domain with the default padded mesh of `2M + 1` nodes per direction.
    pub fn new(lx: f64, ly: f64, mx: usize, my: usize) -> Result<Self> {
        Self::with_padding(lx, ly, mx, my, 2 * mx + 1, 2 * my + 1)
    }

    /// `padded_nx`, `padded_ny` count mesh nodes including both walls.
    pub fn with_padding(
        lx: f64,
        ly: f64,
        mx: usize,
        my: usize,
        padded_nx: usize,
        padded_ny: usize,
    ) -> Result<Self> {
        if !(lx.is_finite() && lx > 0.0 && ly.is_finite() && ly > 0.0) {
            return Err(Error::InvalidDomain(format!(
                "extents must be positive and finite, got Lx = {lx}, Ly = {ly}"
            )));
        }
        if mx == 0 || my == 0 {
            return Err(Error::InvalidDomain(format!(
                "need at least one mode per direction, got {mx}x{my}"
            )));
        }
        if padded_nx < 2 * mx + 1 || padded_ny < 2 * my + 1 {
            return Err(Error::InvalidDomain(format!(
                "padded grid {padded_nx}x{padded_ny} too small for {mx}x{my} modes (need >= {}x{})",
                2 * mx + 1,
                2 * my + 1
            )));
        }
        Ok(Self {
            lx,
            ly,
            mx,
            my,
            padded_nx,
            padded_ny,
        })
    }

    pub fn unit_square(modes: usize) -> Result<Self> {
        Self::new(1.0, 1.0, modes, modes)
    }

    pub fn lx(&self) -> f64 {
        self.lx
    }

    pub fn ly(&self) -> f64 {
        self.ly
    }

    pub fn mx(&self) -> usize {
        self.mx
    }

    pub fn my(&self) -> usize {
        self.my
    }

    pub fn padded_nx(&self) -> usize {
        self.padded_nx
    }

    pub fn padded_ny(&self) -> usize {
        self.padded_ny
    }

    pub fn area(&self) -> f64 {
        self.lx * self.ly
    }

    pub fn is_unit_square(&self) -> bool {
        self.lx == 1.0 && self.ly == 1.0
    }

    pub fn mode_count(&self) -> usize {
        self.mx * self.my
    }

    pub fn kx(&self, m: usize) -> f64 {
        m as f64 * PI / self.lx
    }

    pub fn ky(&self, n: usize) -> f64 {
        n as f64 * PI / self.ly
    }

    /// `|k|^2` of mode `(m, n)`, i.e. minus its Laplacian eigenvalue.
    pub fn wavenumber2(&self, m: usize, n: usize) -> f64 {
        let kx = self.kx(m);
        let ky = self.ky(n);
        kx * kx + ky * ky
    }

    /// Parseval weight: `int sin^2 sin^2 = Lx Ly / 4`.
    pub fn parseval(&self) -> f64 {
        0.25 * self.lx * self.ly
    }

    pub fn grid_shape(&self) -> (usize, usize) {
        (self.padded_nx, self.padded_ny)
    }

    pub fn dx_grid(&self) -> f64 {
        self.lx / (self.padded_nx - 1) as f64
    }

    pub fn dy_grid(&self) -> f64 {
        self.ly / (self.padded_ny - 1) as f64
    }

    pub fn node_x(&self, i: usize) -> f64 {
        i as f64 * self.dx_grid()
    }

    pub fn node_y(&self, j: usize) -> f64 {
        j as f64 * self.dy_grid()
    }

    pub(crate) fn index(&self, m: usize, n: usize) -> usize {
        debug_assert!((1..=self.mx).contains(&m) && (1..=self.my).contains(&n));
        (m - 1) * self.my + (n - 1)
    }

    pub(crate) fn check_mode(&self, m: usize, n: usize) -> Result<()> {
        if (1..=self.mx).contains(&m) && (1..=self.my).contains(&n) {
            Ok(())
        } else {
            Err(Error::ModeOutOfRange {
                m,
                n,
                mx: self.mx,
                my: self.my,
            })
        }
    }
}

/// Sine-series coefficients of a field on a [`Domain`], stored row-major
/// with `m` outer and `n` inner.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    domain: Arc<Domain>,
    coeffs: Vec<f64>,
}

impl SpectralField {
    pub fn zeros(domain: &Arc<Domain>) -> Self {
        Self {
            domain: Arc::clone(domain),
            coeffs: vec![0.0; domain.mode_count()],
        }
    }

    pub fn from_coeffs(domain: &Arc<Domain>, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != domain.mode_count() {
            return Err(Error::InvalidParameter(format!(
                "expected {} coefficients, got {}",
                domain.mode_count(),
                coeffs.len()
            )));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter(
                "coefficients must be finite".to_string(),
            ));
        }
        Ok(Self {
            domain: Arc::clone(domain),
            coeffs,
        })
    }

    pub fn single_mode(domain: &Arc<Domain>, m: usize, n: usize, amplitude: f64) -> Result<Self> {
        domain.check_mode(m, n)?;
        let mut f = Self::zeros(domain);
        f.coeffs[domain.index(m, n)] = amplitude;
        Ok(f)
    }

    pub fn domain(&self) -> &Arc<Domain> {
        &self.domain
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    /// Coefficient of mode `(m, n)`, 1-based.
    pub fn get(&self, m: usize, n: usize) -> f64 {
        self.coeffs[self.domain.index(m, n)]
    }

    pub fn set(&mut self, m: usize, n: usize, value: f64) {
        let k = self.domain.index(m, n);
        self.coeffs[k] = value;
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_finite())
    }

    pub fn same_domain(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.domain, &other.domain) || *self.domain == *other.domain
    }

    fn require_same(&self, other: &Self) -> Result<()> {
        if self.same_domain(other) {
            Ok(())
        } else {
            Err(Error::DomainMismatch)
        }
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            domain: Arc::clone(&self.domain),
            coeffs: self.coeffs.iter().map(|c| s * c).collect(),
        }
    }

    /// `self += a * other`
    pub fn add_scaled(&mut self, a: f64, other: &Self) -> Result<()> {
        self.require_same(other)?;
        for (c, o) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *c += a * o;
        }
        Ok(())
    }

    /// `self - other`
    pub fn difference(&self, other: &Self) -> Result<Self> {
        let mut d = self.clone();
        d.add_scaled(-1.0, other)?;
        Ok(d)
    }

    /// Coefficient map `a_mn -> -|k|^2 a_mn`.
    pub fn laplacian(&self) -> Self {
        let d = &self.domain;
        let mut out = self.clone();
        for m in 1..=d.mx {
            for n in 1..=d.my {
                out.coeffs[d.index(m, n)] *= -d.wavenumber2(m, n);
            }
        }
        out
    }

    /// Stream function with `laplacian(psi) = self`. The operator has no
    /// zero mode on this basis, so the inverse always exists.
    pub fn invert_laplacian(&self) -> Self {
        let d = &self.domain;
        let mut out = self.clone();
        for m in 1..=d.mx {
            for n in 1..=d.my {
                out.coeffs[d.index(m, n)] /= -d.wavenumber2(m, n);
            }
        }
        out
    }

    /// `int_D f g dx dy`, exact from coefficients.
    pub fn inner(&self, other: &Self) -> Result<f64> {
        self.require_same(other)?;
        let s: f64 = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a * b)
            .sum();
        Ok(self.domain.parseval() * s)
    }

    /// `int_D f^2`.
    pub fn norm2(&self) -> f64 {
        self.domain.parseval() * self.coeffs.iter().map(|c| c * c).sum::<f64>()
    }

    /// L2 norm, `sqrt(norm2)`.
    pub fn norm(&self) -> f64 {
        self.norm2().sqrt()
    }

    /// `int_D |grad f|^2`.
    pub fn grad_norm2(&self) -> f64 {
        let d = &self.domain;
        let mut s = 0.0;
        for m in 1..=d.mx {
            for n in 1..=d.my {
                let a = self.coeffs[d.index(m, n)];
                s += d.wavenumber2(m, n) * a * a;
            }
        }
        d.parseval() * s
    }

    /// Point value by direct summation of the series.
    pub fn evaluate(&self, x: f64, y: f64) -> f64 {
        let d = &self.domain;
        let sy: Vec<f64> = (1..=d.my).map(|n| (d.ky(n) * y).sin()).collect();
        let mut total = 0.0;
        for m in 1..=d.mx {
            let sx = (d.kx(m) * x).sin();
            let row = &self.coeffs[(m - 1) * d.my..m * d.my];
            total += sx * row.iter().zip(&sy).map(|(a, s)| a * s).sum::<f64>();
        }
        total
    }
}

/// Values on the padded mesh, nodes `(i dx, j dy)` for `0 <= i < padded_nx`,
/// `0 <= j < padded_ny`, stored with `i` outer.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    domain: Arc<Domain>,
    values: Vec<f64>,
}

impl GridField {
    pub fn zeros(domain: &Arc<Domain>) -> Self {
        let (nx, ny) = domain.grid_shape();
        Self {
            domain: Arc::clone(domain),
            values: vec![0.0; nx * ny],
        }
    }

    pub fn from_values(
        domain: &Arc<Domain>,
        shape: (usize, usize),
        values: Vec<f64>,
    ) -> Result<Self> {
        let expected = domain.grid_shape();
        if shape != expected || values.len() != shape.0 * shape.1 {
            return Err(Error::ShapeMismatch {
                expected,
                got: shape,
            });
        }
        Ok(Self {
            domain: Arc::clone(domain),
            values,
        })
    }

    /// Samples `f(x, y)` at every mesh node.
    pub fn sample(domain: &Arc<Domain>, f: impl Fn(f64, f64) -> f64) -> Self {
        let (nx, ny) = domain.grid_shape();
        let mut values = Vec::with_capacity(nx * ny);
        for i in 0..nx {
            let x = domain.node_x(i);
            for j in 0..ny {
                values.push(f(x, domain.node_y(j)));
            }
        }
        Self {
            domain: Arc::clone(domain),
            values,
        }
    }

    pub fn domain(&self) -> &Arc<Domain> {
        &self.domain
    }

    pub fn shape(&self) -> (usize, usize) {
        self.domain.grid_shape()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.domain.padded_ny + j]
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    /// Index of the mesh node closest to `(x, y)`.
    pub fn nearest_node(&self, x: f64, y: f64) -> (usize, usize) {
        let d = &self.domain;
        let i = (x / d.dx_grid())
            .round()
            .clamp(0.0, (d.padded_nx - 1) as f64) as usize;
        let j = (y / d.dy_grid())
            .round()
            .clamp(0.0, (d.padded_ny - 1) as f64) as usize;
        (i, j)
    }

    /// Two-dimensional trapezoidal rule over the closed mesh.
    pub fn integrate(&self) -> f64 {
        let d = &self.domain;
        let (nx, ny) = d.grid_shape();
        let weight = |k: usize, n: usize| if k == 0 || k == n - 1 { 0.5 } else { 1.0 };
        let mut s = 0.0;
        for i in 0..nx {
            let wi = weight(i, nx);
            for j in 0..ny {
                s += wi * weight(j, ny) * self.values[i * ny + j];
            }
        }
        s * d.dx_grid() * d.dy_grid()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Parity {
    Sin,
    Cos,
}

/// Immutable transform plan for one domain. Shareable across threads.
#[derive(Clone)]
pub struct Basis {
    domain: Arc<Domain>,
    fft_x: Arc<dyn Fft<f64>>,
    fft_y: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Basis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Basis")
            .field("domain", &self.domain)
            .finish()
    }
}

impl Basis {
    pub fn new(domain: Domain) -> Self {
        let mut planner = FftPlanner::new();
        let fft_x = planner.plan_fft_forward(2 * (domain.padded_nx - 1));
        let fft_y = planner.plan_fft_forward(2 * (domain.padded_ny - 1));
        Self {
            domain: Arc::new(domain),
            fft_x,
            fft_y,
        }
    }

    pub fn domain(&self) -> &Arc<Domain> {
        &self.domain
    }

    pub fn zeros(&self) -> SpectralField {
        SpectralField::zeros(&self.domain)
    }

    pub(crate) fn check(&self, f: &SpectralField) -> Result<()> {
        if Arc::ptr_eq(&self.domain, &f.domain) || *self.domain == *f.domain {
            Ok(())
        } else {
            Err(Error::DomainMismatch)
        }
    }

    /// Evaluates the series on the padded mesh.
    pub fn to_grid(&self, f: &SpectralField) -> Result<GridField> {
        self.check(f)?;
        Ok(self.synthesize(&f.coeffs, Parity::Sin, Parity::Sin))
    }

    /// Galerkin projection of mesh values onto the retained sine modes.
    pub fn from_grid(&self, g: &GridField) -> Result<SpectralField> {
        if *g.domain != *self.domain {
            if g.domain.grid_shape() != self.domain.grid_shape() {
                return Err(Error::ShapeMismatch {
                    expected: self.domain.grid_shape(),
                    got: g.domain.grid_shape(),
                });
            }
            return Err(Error::DomainMismatch);
        }
        Ok(self.analyze(&g.values))
    }

    /// `f_x` on the padded mesh (cosine series in x).
    pub fn dx(&self, f: &SpectralField) -> Result<GridField> {
        self.check(f)?;
        Ok(self.synthesize(&self.scale_x(&f.coeffs), Parity::Cos, Parity::Sin))
    }

    /// `f_y` on the padded mesh (cosine series in y).
    pub fn dy(&self, f: &SpectralField) -> Result<GridField> {
        self.check(f)?;
        Ok(self.synthesize(&self.scale_y(&f.coeffs), Parity::Sin, Parity::Cos))
    }

    fn scale_x(&self, coeffs: &[f64]) -> Vec<f64> {
        let d = &self.domain;
        coeffs
            .iter()
            .enumerate()
            .map(|(k, c)| c * d.kx(k / d.my + 1))
            .collect()
    }

    fn scale_y(&self, coeffs: &[f64]) -> Vec<f64> {
        let d = &self.domain;
        coeffs
            .iter()
            .enumerate()
            .map(|(k, c)| c * d.ky(k % d.my + 1))
            .collect()
    }

    fn synthesize(&self, coeffs: &[f64], px: Parity, py: Parity) -> GridField {
        let d = &self.domain;
        let (gx, gy) = d.grid_shape();
        let mut buf_x = vec![Complex64::default(); 2 * (gx - 1)];
        let mut buf_y = vec![Complex64::default(); 2 * (gy - 1)];
        let mut scratch = vec![
            Complex64::default();
            self.fft_x
                .get_inplace_scratch_len()
                .max(self.fft_y.get_inplace_scratch_len())
        ];

        // y-synthesis for each retained m: partial[m][j]
        let mut partial = vec![0.0; d.mx * gy];
        for m in 0..d.mx {
            synth_1d(
                &*self.fft_y,
                &coeffs[m * d.my..(m + 1) * d.my],
                py,
                &mut buf_y,
                &mut scratch,
                &mut partial[m * gy..(m + 1) * gy],
            );
        }

        let mut values = vec![0.0; gx * gy];
        let mut column = vec![0.0; d.mx];
        let mut out = vec![0.0; gx];
        for j in 0..gy {
            for m in 0..d.mx {
                column[m] = partial[m * gy + j];
            }
            synth_1d(
                &*self.fft_x,
                &column,
                px,
                &mut buf_x,
                &mut scratch,
                &mut out,
            );
            for i in 0..gx {
                values[i * gy + j] = out[i];
            }
        }
        GridField {
            domain: Arc::clone(&self.domain),
            values,
        }
    }

    fn analyze(&self, values: &[f64]) -> SpectralField {
        let d = &self.domain;
        let (gx, gy) = d.grid_shape();
        let mut buf_x = vec![Complex64::default(); 2 * (gx - 1)];
        let mut buf_y = vec![Complex64::default(); 2 * (gy - 1)];
        let mut scratch = vec![
            Complex64::default();
            self.fft_x
                .get_inplace_scratch_len()
                .max(self.fft_y.get_inplace_scratch_len())
        ];

        // x-analysis of each mesh column: partial[m][j]
        let mut partial = vec![0.0; d.mx * gy];
        let mut column = vec![0.0; gx];
        let mut out = vec![0.0; d.mx];
        for j in 1..gy - 1 {
            for i in 0..gx {
                column[i] = values[i * gy + j];
            }
            analyze_1d(&*self.fft_x, &column, &mut buf_x, &mut scratch, &mut out);
            for m in 0..d.mx {
                partial[m * gy + j] = out[m];
            }
        }

        let mut coeffs = vec![0.0; d.mode_count()];
        for m in 0..d.mx {
            analyze_1d(
                &*self.fft_y,
                &partial[m * gy..(m + 1) * gy],
                &mut buf_y,
                &mut scratch,
                &mut coeffs[m * d.my..(m + 1) * d.my],
            );
        }
        SpectralField {
            domain: Arc::clone(&self.domain),
            coeffs,
        }
    }
}

/// `out[i] = sum_k c_k s(k pi i / N)` for `i = 0..=N`, with `s` = sin or cos
/// and `c` holding modes `1..=M`, via an odd/even extension to length `2N`.
fn synth_1d(
    fft: &dyn Fft<f64>,
    c: &[f64],
    parity: Parity,
    buf: &mut [Complex64],
    scratch: &mut [Complex64],
    out: &mut [f64],
) {
    let two_n = buf.len();
    let n = two_n / 2;
    buf.fill(Complex64::default());
    let sign = match parity {
        Parity::Sin => -1.0,
        Parity::Cos => 1.0,
    };
    for (k, &ck) in c.iter().enumerate() {
        let k = k + 1;
        buf[k].re = ck;
        buf[two_n - k].re = sign * ck;
    }
    fft.process_with_scratch(buf, scratch);
    for i in 0..=n {
        out[i] = match parity {
            Parity::Sin => -0.5 * buf[i].im,
            Parity::Cos => 0.5 * buf[i].re,
        };
    }
}

/// `out[k-1] = (2/N) sum_{i=1}^{N-1} v_i sin(k pi i / N)` for `k = 1..=out.len()`.
fn analyze_1d(
    fft: &dyn Fft<f64>,
    v: &[f64],
    buf: &mut [Complex64],
    scratch: &mut [Complex64],
    out: &mut [f64],
) {
    let two_n = buf.len();
    let n = two_n / 2;
    buf.fill(Complex64::default());
    for i in 1..n {
        buf[i].re = v[i];
        buf[two_n - i].re = -v[i];
    }
    fft.process_with_scratch(buf, scratch);
    let inv_n = 1.0 / n as f64;
    for (k, o) in out.iter_mut().enumerate() {
        *o = -buf[k + 1].im * inv_n;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit(m: usize) -> Basis {
        Basis::new(Domain::unit_square(m).unwrap())
    }

    fn random_field(basis: &Basis, seed: u64) -> SpectralField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let coeffs = (0..basis.domain().mode_count())
            .map(|_| rng.gen_range(-1.0..1.0))
            .collect();
        SpectralField::from_coeffs(basis.domain(), coeffs).unwrap()
    }

    #[test]
    fn domain_validation() {
        assert!(Domain::new(0.0, 1.0, 4, 4).is_err());
        assert!(Domain::new(1.0, 1.0, 0, 4).is_err());
        assert!(Domain::with_padding(1.0, 1.0, 4, 4, 8, 9).is_err());
        let d = Domain::new(2.0, 3.0, 4, 5).unwrap();
        assert_eq!(d.area(), 6.0);
        assert_eq!(d.grid_shape(), (9, 11));
    }

    #[test]
    fn zero_field_maps_to_zero_grid() {
        let b = unit(6);
        let g = b.to_grid(&b.zeros()).unwrap();
        assert_eq!(g.max_abs(), 0.0);
        assert_eq!(b.from_grid(&g).unwrap(), b.zeros());
    }

    #[test]
    fn single_mode_grid_values() {
        let b = unit(5);
        let f = SpectralField::single_mode(b.domain(), 1, 1, 1.0).unwrap();
        let g = b.to_grid(&f).unwrap();
        let (i, j) = g.nearest_node(0.5, 0.5);
        let d = b.domain();
        let expected = (PI * d.node_x(i)).sin() * (PI * d.node_y(j)).sin();
        assert!((g.get(i, j) - expected).abs() < 1e-14);
        assert!((g.get(i, j) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn grid_matches_direct_summation() {
        let b = Basis::new(Domain::new(1.3, 0.7, 8, 6).unwrap());
        let f = random_field(&b, 7);
        let g = b.to_grid(&f).unwrap();
        let d = b.domain();
        let (nx, ny) = d.grid_shape();
        for i in 0..nx {
            for j in 0..ny {
                let direct = f.evaluate(d.node_x(i), d.node_y(j));
                assert!((g.get(i, j) - direct).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn round_trip_on_retained_modes() {
        let b = Basis::new(Domain::new(1.0, 2.0, 8, 8).unwrap());
        let f = random_field(&b, 3);
        let back = b.from_grid(&b.to_grid(&f).unwrap()).unwrap();
        let err = back.difference(&f).unwrap().norm() / f.norm();
        assert!(err < 1e-12, "{err}");
    }

    #[test]
    fn projection_recovers_sampled_mode() {
        let b = unit(6);
        let g = GridField::sample(b.domain(), |x, y| (PI * x).sin() * (PI * y).sin());
        let f = b.from_grid(&g).unwrap();
        assert!((f.get(1, 1) - 1.0).abs() < 1e-12);
        for m in 1..=6 {
            for n in 1..=6 {
                if (m, n) != (1, 1) {
                    assert!(f.get(m, n).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn projection_discards_mode_beyond_truncation() {
        let b = unit(6);
        let g = GridField::sample(b.domain(), |x, y| (7.0 * PI * x).sin() * (PI * y).sin());
        let f = b.from_grid(&g).unwrap();
        assert!(f.coeffs().iter().all(|c| c.abs() < 1e-12));

        // direct quadrature agrees: the discrete inner product of sin(7 pi x)
        // with sin(m pi x) over the padded mesh vanishes for m <= 6
        let n = b.domain().padded_nx() - 1;
        for m in 1..=6 {
            let s: f64 = (1..n)
                .map(|i| {
                    let x = i as f64 / n as f64;
                    (7.0 * PI * x).sin() * (m as f64 * PI * x).sin()
                })
                .sum();
            assert!(s.abs() < 1e-12);
        }
    }

    #[test]
    fn from_grid_rejects_foreign_grid() {
        let b = unit(4);
        let other = Arc::new(Domain::unit_square(5).unwrap());
        let g = GridField::zeros(&other);
        assert!(matches!(b.from_grid(&g), Err(Error::ShapeMismatch { .. })));
        assert!(GridField::from_values(b.domain(), (3, 3), vec![0.0; 9]).is_err());
        assert!(matches!(
            b.to_grid(&SpectralField::zeros(&other)),
            Err(Error::DomainMismatch)
        ));
    }

    #[test]
    fn derivative_of_fundamental_mode() {
        let b = unit(4);
        let f = SpectralField::single_mode(b.domain(), 1, 1, 1.0).unwrap();
        let gx = b.dx(&f).unwrap();
        let (i, j) = gx.nearest_node(0.0, 0.5);
        assert!((gx.get(i, j) - PI).abs() < 1e-13);
        assert_eq!(b.dy(&b.zeros()).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn derivative_l2_norm_matches_integral() {
        let b = unit(4);
        let f = SpectralField::single_mode(b.domain(), 2, 1, 1.0).unwrap();
        let mut g = b.dx(&f).unwrap();
        for v in g.values_mut() {
            *v *= *v;
        }
        let expected = (2.0 * PI).powi(2) / 4.0;
        assert!((g.integrate() - expected).abs() < 1e-10);
    }

    #[test]
    fn laplacian_eigenvalues() {
        let b = unit(3);
        let f = SpectralField::single_mode(b.domain(), 1, 1, 1.0).unwrap();
        assert!((f.laplacian().get(1, 1) + 2.0 * PI * PI).abs() < 1e-12);
        let f = SpectralField::single_mode(b.domain(), 2, 1, 1.0).unwrap();
        assert!((f.laplacian().get(2, 1) + 5.0 * PI * PI).abs() < 1e-12);
        assert_eq!(b.zeros().laplacian(), b.zeros());
    }

    #[test]
    fn inverse_laplacian() {
        let b = unit(3);
        let w = SpectralField::single_mode(b.domain(), 1, 1, -2.0 * PI * PI).unwrap();
        assert!((w.invert_laplacian().get(1, 1) - 1.0).abs() < 1e-14);
        let w = SpectralField::single_mode(b.domain(), 2, 1, 1.0).unwrap();
        assert!((w.invert_laplacian().get(2, 1) + 1.0 / (5.0 * PI * PI)).abs() < 1e-16);
        let w = random_field(&unit(12), 11);
        let back = w.invert_laplacian().laplacian();
        assert!(back.difference(&w).unwrap().norm() <= 1e-12 * w.norm());
    }

    #[test]
    fn inner_products() {
        let b = unit(3);
        let f = SpectralField::single_mode(b.domain(), 1, 1, 1.0).unwrap();
        let g = SpectralField::single_mode(b.domain(), 2, 1, 1.0).unwrap();
        assert!((f.inner(&f).unwrap() - 0.25).abs() < 1e-15);
        assert_eq!(f.inner(&g).unwrap(), 0.0);
        assert!((f.grad_norm2() - PI * PI / 2.0).abs() < 1e-14);
        assert_eq!(b.zeros().grad_norm2(), 0.0);
    }

    #[test]
    fn inner_matches_grid_quadrature() {
        let b = Basis::new(Domain::new(1.5, 0.8, 8, 7).unwrap());
        let f = random_field(&b, 5);
        let mut g = b.to_grid(&f).unwrap();
        for v in g.values_mut() {
            *v *= *v;
        }
        let q = g.integrate();
        assert!((f.norm2() - q).abs() <= 1e-10 * q);
    }

    #[test]
    fn inner_rejects_mismatched_domains() {
        let a = SpectralField::zeros(&Arc::new(Domain::unit_square(3).unwrap()));
        let b = SpectralField::zeros(&Arc::new(Domain::unit_square(4).unwrap()));
        assert!(matches!(a.inner(&b), Err(Error::DomainMismatch)));
    }

    #[test]
    fn fields_vanish_on_walls() {
        let b = Basis::new(Domain::new(2.0, 1.0, 9, 5).unwrap());
        let f = random_field(&b, 9);
        let g = b.to_grid(&f).unwrap();
        let (nx, ny) = g.shape();
        for i in 0..nx {
            assert!(g.get(i, 0).abs() <= 1e-12 && g.get(i, ny - 1).abs() <= 1e-12);
        }
        for j in 0..ny {
            assert!(g.get(0, j).abs() <= 1e-12 && g.get(nx - 1, j).abs() <= 1e-12);
        }
    }

    #[test]
    fn from_coeffs_rejects_non_finite() {
        let d = Arc::new(Domain::unit_square(2).unwrap());
        assert!(SpectralField::from_coeffs(&d, vec![0.0, f64::NAN, 0.0, 0.0]).is_err());
        assert!(SpectralField::from_coeffs(&d, vec![0.0; 3]).is_err());
        assert!(SpectralField::single_mode(&d, 3, 1, 1.0).is_err());
    }
}
