//! Periodic grids, Fourier calculus, the flat Hilbert transform and discrete
//! Sobolev norms.
//!
//! Mode convention: FFT index `m` in `0..n/2` is wavenumber `2*pi*m/L`, index
//! `m` in `n/2+1..n` is `2*pi*(m-n)/L`, and the Nyquist index `n/2` is treated
//! as the symmetric pair `+-pi*n/L`: a multiplier acts on it through the even
//! part of its symbol, so odd multipliers (derivatives of odd order, Hilbert
//! transforms) zero it.

use std::cell::RefCell;
use std::f64::consts::PI;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use thiserror::Error;

pub type C64 = Complex64;

pub const I: C64 = C64::new(0.0, 1.0);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error("grid needs a power-of-two point count >= 2, got {0}")]
    BadPointCount(usize),
    #[error("grid length must be positive and finite, got {0}")]
    BadLength(f64),
    #[error("non-finite sample at node {index}")]
    NonFinite { index: usize },
    #[error("field lives on a different grid")]
    GridMismatch,
    #[error("sample count {got} does not match grid size {expected}")]
    LengthMismatch { expected: usize, got: usize },
}

/// Uniform periodic grid on `[0, L)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    n_points: usize,
    length: f64,
}

impl Grid {
    pub fn new(n_points: usize, length: f64) -> Result<Self, SpectralError> {
        if n_points < 2 || !n_points.is_power_of_two() {
            return Err(SpectralError::BadPointCount(n_points));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(SpectralError::BadLength(length));
        }
        Ok(Self { n_points, length })
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn spacing(&self) -> f64 {
        self.length / self.n_points as f64
    }

    pub fn node(&self, j: usize) -> f64 {
        j as f64 * self.spacing()
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n_points).map(|j| self.node(j)).collect()
    }

    /// Signed integer mode for FFT index `m` (Nyquist reported as `-n/2`).
    pub fn mode(&self, m: usize) -> i64 {
        let n = self.n_points as i64;
        let m = m as i64;
        if m < n / 2 {
            m
        } else {
            m - n
        }
    }

    pub fn wavenumber(&self, m: usize) -> f64 {
        2.0 * PI * self.mode(m) as f64 / self.length
    }

    pub fn nyquist_index(&self) -> usize {
        self.n_points / 2
    }

    /// Same length, different resolution.
    pub fn with_points(&self, n_points: usize) -> Result<Self, SpectralError> {
        Grid::new(n_points, self.length)
    }
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(n: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse {
            p.plan_fft_inverse(n)
        } else {
            p.plan_fft_forward(n)
        }
    })
}

/// Normalized forward transform: `c_m = (1/n) sum_j f_j e^{-2 pi i j m / n}`.
pub fn forward(samples: &[C64]) -> Vec<C64> {
    let n = samples.len();
    let mut buf = samples.to_vec();
    plan(n, false).process(&mut buf);
    let s = 1.0 / n as f64;
    for c in buf.iter_mut() {
        *c *= s;
    }
    buf
}

/// Inverse of [`forward`].
pub fn inverse(coeffs: &[C64]) -> Vec<C64> {
    let mut buf = coeffs.to_vec();
    plan(buf.len(), true).process(&mut buf);
    buf
}

/// Complex samples of a function on a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Grid,
    samples: Vec<C64>,
}

impl Field {
    pub fn new(grid: Grid, samples: Vec<C64>) -> Result<Self, SpectralError> {
        if samples.len() != grid.n_points() {
            return Err(SpectralError::LengthMismatch {
                expected: grid.n_points(),
                got: samples.len(),
            });
        }
        Ok(Self { grid, samples })
    }

    pub(crate) fn from_vec(grid: Grid, samples: Vec<C64>) -> Self {
        debug_assert_eq!(samples.len(), grid.n_points());
        Self { grid, samples }
    }

    pub fn zeros(grid: Grid) -> Self {
        Self::constant(grid, C64::new(0.0, 0.0))
    }

    pub fn constant(grid: Grid, c: C64) -> Self {
        Self {
            grid,
            samples: vec![c; grid.n_points()],
        }
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> C64) -> Self {
        let samples = (0..grid.n_points()).map(|j| f(grid.node(j))).collect();
        Self { grid, samples }
    }

    pub fn from_real(grid: Grid, values: &[f64]) -> Result<Self, SpectralError> {
        Self::new(grid, values.iter().map(|&v| C64::new(v, 0.0)).collect())
    }

    /// The identity map `alpha -> alpha` sampled at the nodes (not periodic).
    pub fn coordinate(grid: Grid) -> Self {
        Self::from_fn(grid, |a| C64::new(a, 0.0))
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn samples(&self) -> &[C64] {
        &self.samples
    }

    pub fn samples_mut(&mut self) -> &mut [C64] {
        &mut self.samples
    }

    pub fn into_samples(self) -> Vec<C64> {
        self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn check_finite(&self) -> Result<(), SpectralError> {
        match self.samples.iter().position(|z| !(z.re.is_finite() && z.im.is_finite())) {
            Some(index) => Err(SpectralError::NonFinite { index }),
            None => Ok(()),
        }
    }

    pub fn map(&self, f: impl Fn(C64) -> C64) -> Field {
        Field::from_vec(self.grid, self.samples.iter().map(|&z| f(z)).collect())
    }

    pub fn zip_map(&self, other: &Field, f: impl Fn(C64, C64) -> C64) -> Field {
        assert_eq!(self.grid, other.grid, "fields on different grids");
        Field::from_vec(
            self.grid,
            self.samples
                .iter()
                .zip(&other.samples)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        )
    }

    pub fn conj(&self) -> Field {
        self.map(|z| z.conj())
    }

    pub fn re(&self) -> Field {
        self.map(|z| C64::new(z.re, 0.0))
    }

    pub fn im(&self) -> Field {
        self.map(|z| C64::new(z.im, 0.0))
    }

    pub fn scale(&self, s: C64) -> Field {
        self.map(|z| z * s)
    }

    pub fn scale_re(&self, s: f64) -> Field {
        self.map(|z| z * s)
    }

    pub fn abs_sqr(&self) -> Field {
        self.map(|z| C64::new(z.norm_sqr(), 0.0))
    }

    pub fn recip(&self) -> Field {
        self.map(|z| z.inv())
    }

    pub fn add_const(&self, c: C64) -> Field {
        self.map(|z| z + c)
    }

    pub fn mean(&self) -> C64 {
        self.samples.iter().sum::<C64>() / self.samples.len() as f64
    }

    pub fn remove_mean(&self) -> Field {
        let m = self.mean();
        self.add_const(-m)
    }

    pub fn max_abs_imag(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, z| m.max(z.im.abs()))
    }

    /// Cyclic shift by `s` nodes: `out_j = f_{j+s}`.
    pub fn roll(&self, s: usize) -> Field {
        let n = self.len();
        Field::from_vec(self.grid, (0..n).map(|j| self.samples[(j + s) % n]).collect())
    }

    pub fn coefficients(&self) -> Vec<C64> {
        forward(&self.samples)
    }

    pub fn from_coefficients(grid: Grid, coeffs: &[C64]) -> Field {
        Field::from_vec(grid, inverse(coeffs))
    }
}

impl Add for &Field {
    type Output = Field;
    fn add(self, rhs: &Field) -> Field {
        self.zip_map(rhs, |a, b| a + b)
    }
}

impl Sub for &Field {
    type Output = Field;
    fn sub(self, rhs: &Field) -> Field {
        self.zip_map(rhs, |a, b| a - b)
    }
}

impl Mul for &Field {
    type Output = Field;
    fn mul(self, rhs: &Field) -> Field {
        self.zip_map(rhs, |a, b| a * b)
    }
}

impl Neg for &Field {
    type Output = Field;
    fn neg(self) -> Field {
        self.map(|z| -z)
    }
}

impl Add for Field {
    type Output = Field;
    fn add(self, rhs: Field) -> Field {
        &self + &rhs
    }
}

impl Sub for Field {
    type Output = Field;
    fn sub(self, rhs: Field) -> Field {
        &self - &rhs
    }
}

impl Mul for Field {
    type Output = Field;
    fn mul(self, rhs: Field) -> Field {
        &self * &rhs
    }
}

/// Applies `symbol(xi_m)` mode by mode; no finiteness check.
pub fn apply_symbol(f: &Field, symbol: impl Fn(f64) -> C64) -> Field {
    let g = f.grid();
    let mut c = f.coefficients();
    let ny = g.nyquist_index();
    for (m, cm) in c.iter_mut().enumerate() {
        if m == ny {
            let xi = PI * g.n_points() as f64 / g.length();
            *cm *= 0.5 * (symbol(xi) + symbol(-xi));
        } else {
            *cm *= symbol(g.wavenumber(m));
        }
    }
    Field::from_coefficients(g, &c)
}

/// Fourier multiplier with a user symbol; rejects non-finite input.
pub fn fourier_multiplier(
    f: &Field,
    symbol: impl Fn(f64) -> C64,
) -> Result<Field, SpectralError> {
    f.check_finite()?;
    Ok(apply_symbol(f, symbol))
}

fn sgn(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Flat Hilbert transform, symbol `-sgn(xi)` with `sgn(0) = 0`.
pub fn flat_hilbert(f: &Field) -> Field {
    apply_symbol(f, |xi| C64::new(-sgn(xi), 0.0))
}

/// `conj(H0(conj f))`, symbol `+sgn(xi)`; evaluated literally so the
/// identity holds bit for bit.
pub fn conj_flat_hilbert(f: &Field) -> Field {
    flat_hilbert(&f.conj()).conj()
}

/// `(i xi)^order`.
pub fn derivative(f: &Field, order: u32) -> Field {
    if order == 0 {
        return f.clone();
    }
    apply_symbol(f, |xi| (I * xi).powu(order))
}

/// `|xi|^{1/2}`.
pub fn half_derivative(f: &Field) -> Field {
    apply_symbol(f, |xi| C64::new(xi.abs().sqrt(), 0.0))
}

/// `(1/2 (I - H0) f, 1/2 (I + H0) f)`.
pub fn projections(f: &Field) -> (Field, Field) {
    let h = flat_hilbert(f);
    let minus = f.zip_map(&h, |a, b| 0.5 * (a - b));
    let plus = f.zip_map(&h, |a, b| 0.5 * (a + b));
    (minus, plus)
}

/// `sqrt(L sum_m (1 + xi_m^2)^s |c_m|^2)`, so a constant `c` has norm `|c| sqrt(L)`.
pub fn sobolev_norm(f: &Field, s: f64) -> f64 {
    let g = f.grid();
    let c = f.coefficients();
    let mut acc = 0.0;
    for (m, cm) in c.iter().enumerate() {
        let xi = if m == g.nyquist_index() {
            PI * g.n_points() as f64 / g.length()
        } else {
            g.wavenumber(m)
        };
        acc += (1.0 + xi * xi).powf(s) * cm.norm_sqr();
    }
    (g.length() * acc).sqrt()
}

pub fn l2_norm(f: &Field) -> f64 {
    let h = f.grid().spacing();
    (h * f.samples().iter().map(|z| z.norm_sqr()).sum::<f64>()).sqrt()
}

pub fn sup_norm(f: &Field) -> f64 {
    f.samples().iter().fold(0.0, |m, z| m.max(z.norm()))
}

/// Krasny-style floor: zero every mode whose magnitude is below
/// `floor * max_m |c_m|`. A zero floor is the identity.
pub fn krasny_filter(f: &Field, floor: f64) -> Field {
    if floor <= 0.0 {
        return f.clone();
    }
    let mut c = f.coefficients();
    let cut = floor * c.iter().fold(0.0_f64, |m, z| m.max(z.norm()));
    for z in c.iter_mut() {
        if z.norm() < cut {
            *z = C64::new(0.0, 0.0);
        }
    }
    Field::from_coefficients(f.grid(), &c)
}

/// Trapezoidal integral over one period.
pub fn integrate(f: &Field) -> C64 {
    f.samples().iter().sum::<C64>() * f.grid().spacing()
}

/// `int i f conj(f_alpha) dalpha` evaluated as the exact quadratic form
/// `L sum_m xi_m |c_m|^2`.
pub fn holomorphic_quadratic_form(f: &Field) -> f64 {
    let g = f.grid();
    let c = f.coefficients();
    let mut acc = 0.0;
    for (m, cm) in c.iter().enumerate() {
        if m != g.nyquist_index() {
            acc += g.wavenumber(m) * cm.norm_sqr();
        }
    }
    g.length() * acc
}

/// Spectral resampling of a field onto `target` (same length, any power of
/// two). Modes beyond the target Nyquist are dropped.
pub fn resample(f: &Field, target: Grid) -> Field {
    let src = f.grid();
    assert!((src.length() - target.length()).abs() <= 1e-12 * src.length());
    let c = f.coefficients();
    let mut out = vec![C64::new(0.0, 0.0); target.n_points()];
    let half = (src.n_points().min(target.n_points()) / 2) as i64;
    for (m, cm) in c.iter().enumerate() {
        let k = src.mode(m);
        if k.abs() < half {
            let idx = k.rem_euclid(target.n_points() as i64) as usize;
            out[idx] = *cm;
        }
    }
    Field::from_coefficients(target, &out)
}

/// Evaluates the trigonometric interpolant of `f` at an arbitrary point.
pub fn interpolate_at(coeffs: &[C64], grid: Grid, x: f64) -> C64 {
    let mut acc = C64::new(0.0, 0.0);
    for (m, cm) in coeffs.iter().enumerate() {
        if m == grid.nyquist_index() {
            continue;
        }
        acc += cm * C64::from_polar(1.0, grid.wavenumber(m) * x);
    }
    acc
}

/// Derivative of the trigonometric interpolant at an arbitrary point.
pub fn interpolate_derivative_at(coeffs: &[C64], grid: Grid, x: f64) -> C64 {
    let mut acc = C64::new(0.0, 0.0);
    for (m, cm) in coeffs.iter().enumerate() {
        if m == grid.nyquist_index() {
            continue;
        }
        let k = grid.wavenumber(m);
        acc += cm * I * k * C64::from_polar(1.0, k * x);
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Grid {
        Grid::new(64, 2.0 * PI).unwrap()
    }

    fn close(a: &Field, b: &Field, tol: f64) -> bool {
        a.samples()
            .iter()
            .zip(b.samples())
            .all(|(x, y)| (x - y).norm() < tol)
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(Grid::new(48, 1.0).is_err());
        assert!(Grid::new(64, 0.0).is_err());
        assert!(Grid::new(64, f64::NAN).is_err());
    }

    #[test]
    fn identity_and_derivative_symbols() {
        let g = grid();
        let f = Field::from_fn(g, |a| C64::from_polar(1.0, a));
        let id = fourier_multiplier(&f, |_| C64::new(1.0, 0.0)).unwrap();
        assert!(close(&id, &f, 1e-13));
        let d = fourier_multiplier(&f, |xi| I * xi).unwrap();
        assert!(close(&d, &f.scale(I), 1e-13));
        let f2 = Field::from_fn(g, |a| C64::from_polar(1.0, 2.0 * a));
        let h = fourier_multiplier(&f2, |xi| C64::new(xi.abs().sqrt(), 0.0)).unwrap();
        assert!(close(&h, &f2.scale_re(2f64.sqrt()), 1e-13));
    }

    #[test]
    fn multiplier_rejects_nan() {
        let g = grid();
        let mut f = Field::zeros(g);
        f.samples_mut()[3] = C64::new(f64::NAN, 0.0);
        assert_eq!(
            fourier_multiplier(&f, |_| C64::new(1.0, 0.0)),
            Err(SpectralError::NonFinite { index: 3 })
        );
    }

    #[test]
    fn flat_hilbert_examples() {
        let g = grid();
        let e = Field::from_fn(g, |a| C64::from_polar(1.0, a));
        assert!(close(&flat_hilbert(&e), &e.scale_re(-1.0), 1e-13));
        let one = Field::constant(g, C64::new(1.0, 0.0));
        assert!(close(&flat_hilbert(&one), &Field::zeros(g), 1e-14));
        let cos = Field::from_fn(g, |a| C64::new(a.cos(), 0.0));
        let msin = Field::from_fn(g, |a| C64::new(0.0, -a.sin()));
        assert!(close(&flat_hilbert(&cos), &msin, 1e-13));
    }

    #[test]
    fn conj_flat_hilbert_examples() {
        let g = grid();
        let e = Field::from_fn(g, |a| C64::from_polar(1.0, a));
        assert!(close(&conj_flat_hilbert(&e), &e, 1e-13));
        assert!(close(&conj_flat_hilbert(&e.conj()), &e.conj().scale_re(-1.0), 1e-13));
        let c = Field::constant(g, C64::new(2.0, 1.0));
        assert!(close(&conj_flat_hilbert(&c), &Field::zeros(g), 1e-14));
    }

    #[test]
    fn derivative_examples() {
        let g = grid();
        let e2 = Field::from_fn(g, |a| C64::from_polar(1.0, 2.0 * a));
        assert!(close(&derivative(&e2, 1), &e2.scale(2.0 * I), 1e-12));
        let c = Field::constant(g, C64::new(3.0, 0.0));
        assert!(close(&half_derivative(&c), &Field::zeros(g), 1e-14));
        let s = Field::from_fn(g, |a| C64::new(a.sin(), 0.0));
        assert!(close(&derivative(&s, 2), &s.scale_re(-1.0), 1e-12));
    }

    #[test]
    fn sobolev_examples() {
        let g = grid();
        assert_eq!(sobolev_norm(&Field::zeros(g), 3.0), 0.0);
        let e = Field::from_fn(g, |a| C64::from_polar(1.0, a));
        assert!((sobolev_norm(&e, 0.0) - (2.0 * PI).sqrt()).abs() < 1e-13);
        assert!((sobolev_norm(&e, 1.0) - (4.0 * PI).sqrt()).abs() < 1e-13);
        let one = Field::constant(g, C64::new(1.0, 0.0));
        assert!((sobolev_norm(&one, 2.0) - (2.0 * PI).sqrt()).abs() < 1e-13);
    }

    #[test]
    fn projection_examples() {
        let g = grid();
        let e = Field::from_fn(g, |a| C64::from_polar(1.0, a));
        let (m, p) = projections(&e);
        assert!(close(&m, &e, 1e-13) && close(&p, &Field::zeros(g), 1e-13));
        let (m, p) = projections(&e.conj());
        assert!(close(&m, &Field::zeros(g), 1e-13) && close(&p, &e.conj(), 1e-13));
        let one = Field::constant(g, C64::new(1.0, 0.0));
        let half = Field::constant(g, C64::new(0.5, 0.0));
        let (m, p) = projections(&one);
        assert!(close(&m, &half, 1e-14) && close(&p, &half, 1e-14));
    }

    #[test]
    fn nyquist_is_zeroed_by_odd_multipliers() {
        let g = Grid::new(8, 2.0 * PI).unwrap();
        let alt = Field::from_fn(g, |a| C64::new((4.0 * a).cos(), 0.0));
        assert!(sup_norm(&derivative(&alt, 1)) < 1e-12);
        assert!(sup_norm(&flat_hilbert(&alt)) < 1e-12);
        assert!((sup_norm(&derivative(&alt, 2)) - 16.0).abs() < 1e-12);
    }

    #[test]
    fn krasny_floor_removes_roundoff_modes() {
        let g = grid();
        let mut f = Field::from_fn(g, |a| C64::new(a.cos(), 0.0));
        f.samples_mut()[5] += C64::new(1e-15, 0.0);
        let clean = krasny_filter(&f, 1e-13);
        let exact = Field::from_fn(g, |a| C64::new(a.cos(), 0.0));
        assert!(close(&clean, &exact, 1e-15));
        assert_eq!(krasny_filter(&f, 0.0), f);
    }

    #[test]
    fn resample_round_trip() {
        let g = grid();
        let f = Field::from_fn(g, |a| C64::new((3.0 * a).sin(), a.cos()));
        let fine = resample(&f, g.with_points(256).unwrap());
        let back = resample(&fine, g);
        assert!(close(&back, &f, 1e-13));
        let c = f.coefficients();
        let v = interpolate_at(&c, g, 0.3);
        assert!((v - C64::new(0.9f64.sin(), 0.3f64.cos())).norm() < 1e-13);
    }
}
