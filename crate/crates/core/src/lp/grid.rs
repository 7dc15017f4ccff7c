use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::{Fft, FftPlanner};

use crate::coefficients::Point;
use crate::error::{Error, Result};

thread_local! {
    static SCRATCH: std::cell::RefCell<Vec<Complex64>> = const { std::cell::RefCell::new(Vec::new()) };
}

/// Uniform grid on the torus `[0, 2pi)^n` with `N` points per axis and
/// cached FFT plans. Cloning shares the plans.
#[derive(Clone)]
pub struct Grid {
    dim: usize,
    n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid").field("dim", &self.dim).field("n", &self.n).finish()
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.n == other.n
    }
}

impl Grid {
    pub fn new(dim: usize, n: usize) -> Result<Self> {
        if !(dim == 1 || dim == 2) {
            return Err(Error::param("dim", format!("{dim} is not 1 or 2")));
        }
        if n < 8 || !n.is_power_of_two() {
            return Err(Error::BadGrid(n));
        }
        let mut planner = FftPlanner::new();
        Ok(Grid {
            dim,
            n,
            fwd: planner.plan_fft_forward(n),
            inv: planner.plan_fft_inverse(n),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Points per axis.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Total number of grid points.
    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Two-thirds band limit `floor(N/3)` on each axis.
    pub fn band_limit(&self) -> i64 {
        (self.n / 3) as i64
    }

    /// Largest dyadic block index `log2(N/2) + 1`.
    pub fn max_block(&self) -> usize {
        self.n.trailing_zeros() as usize
    }

    /// Signed frequency of FFT index `i`.
    #[inline]
    pub fn freq(&self, i: usize) -> i64 {
        if i < self.n / 2 {
            i as i64
        } else {
            i as i64 - self.n as i64
        }
    }

    /// FFT index of the signed frequency `k` (modulo `N`).
    #[inline]
    pub fn index_of(&self, k: i64) -> usize {
        k.rem_euclid(self.n as i64) as usize
    }

    /// Integer wave vector of flat index `idx` (row-major, axis 0 slowest).
    #[inline]
    pub fn wavevector(&self, idx: usize) -> [i64; 2] {
        if self.dim == 1 {
            [self.freq(idx), 0]
        } else {
            [self.freq(idx / self.n), self.freq(idx % self.n)]
        }
    }

    /// Flat index of the integer wave vector `k`.
    #[inline]
    pub fn flat_index(&self, k: [i64; 2]) -> usize {
        if self.dim == 1 {
            self.index_of(k[0])
        } else {
            self.index_of(k[0]) * self.n + self.index_of(k[1])
        }
    }

    /// Flat index of `-k`.
    #[inline]
    pub fn negate(&self, idx: usize) -> usize {
        let k = self.wavevector(idx);
        self.flat_index([-k[0], -k[1]])
    }

    /// Euclidean length of the wave vector at `idx`.
    #[inline]
    pub fn wavenumber(&self, idx: usize) -> f64 {
        let k = self.wavevector(idx);
        ((k[0] * k[0] + k[1] * k[1]) as f64).sqrt()
    }

    /// True when `idx` lies inside the two-thirds band on every axis.
    #[inline]
    pub fn in_band(&self, idx: usize) -> bool {
        let k = self.wavevector(idx);
        let b = self.band_limit();
        k[0].abs() <= b && k[1].abs() <= b
    }

    pub fn points(&self) -> Vec<Point> {
        let h = 2.0 * PI / self.n as f64;
        if self.dim == 1 {
            (0..self.n).map(|i| [i as f64 * h, 0.0]).collect()
        } else {
            (0..self.len())
                .map(|idx| [(idx / self.n) as f64 * h, (idx % self.n) as f64 * h])
                .collect()
        }
    }

    fn transform(&self, data: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) {
        let n = self.n;
        SCRATCH.with(|cell| {
            let mut scratch = cell.borrow_mut();
            let need = plan.get_inplace_scratch_len().max(if self.dim == 2 { n } else { 0 });
            if scratch.len() < need {
                scratch.resize(need, Complex64::default());
            }
            if self.dim == 1 {
                plan.process_with_scratch(data, &mut scratch[..plan.get_inplace_scratch_len()]);
                return;
            }
            let mut col = vec![Complex64::default(); n];
            for row in data.chunks_exact_mut(n) {
                plan.process_with_scratch(row, &mut scratch);
            }
            for c in 0..n {
                for r in 0..n {
                    col[r] = data[r * n + c];
                }
                plan.process_with_scratch(&mut col, &mut scratch);
                for r in 0..n {
                    data[r * n + c] = col[r];
                }
            }
        });
    }

    /// Fourier coefficients `u_k = N^-d sum_x u(x) e^{-ikx}`.
    pub fn forward(&self, values: &[f64]) -> Vec<Complex64> {
        let mut data: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward_complex(&mut data);
        data
    }

    /// In-place normalized forward transform of complex samples.
    pub fn forward_complex(&self, data: &mut [Complex64]) {
        assert_eq!(data.len(), self.len());
        self.transform(data, &self.fwd);
        let s = 1.0 / self.len() as f64;
        for v in data.iter_mut() {
            *v *= s;
        }
    }

    /// Physical values `u(x) = sum_k u_k e^{ikx}` (real part).
    pub fn inverse(&self, coef: &[Complex64]) -> Vec<f64> {
        let mut data = coef.to_vec();
        self.inverse_complex(&mut data);
        data.into_iter().map(|c| c.re).collect()
    }

    pub fn inverse_complex(&self, data: &mut [Complex64]) {
        assert_eq!(data.len(), self.len());
        self.transform(data, &self.inv);
    }
}

/// Real scalar field on a [`Grid`], stored as Fourier coefficients in FFT order.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralField {
    pub grid: Grid,
    pub coef: Vec<Complex64>,
}

impl SpectralField {
    pub fn zeros(grid: &Grid) -> Self {
        SpectralField {
            grid: grid.clone(),
            coef: vec![Complex64::default(); grid.len()],
        }
    }

    pub fn from_coefficients(grid: &Grid, coef: Vec<Complex64>) -> Self {
        assert_eq!(coef.len(), grid.len());
        SpectralField { grid: grid.clone(), coef }
    }

    pub fn from_physical(grid: &Grid, values: &[f64]) -> Self {
        SpectralField {
            grid: grid.clone(),
            coef: grid.forward(values),
        }
    }

    pub fn from_fn(grid: &Grid, f: impl Fn(&Point) -> f64) -> Self {
        let values: Vec<f64> = grid.points().iter().map(f).collect();
        Self::from_physical(grid, &values)
    }

    /// `amp * cos(k . x)`.
    pub fn cosine(grid: &Grid, k: [i64; 2], amp: f64) -> Self {
        let mut u = Self::zeros(grid);
        let i = grid.flat_index(k);
        let j = grid.flat_index([-k[0], -k[1]]);
        if i == j {
            u.coef[i] = Complex64::new(amp, 0.0);
        } else {
            u.coef[i] = Complex64::new(0.5 * amp, 0.0);
            u.coef[j] = Complex64::new(0.5 * amp, 0.0);
        }
        u
    }

    /// Random real field with independent Gaussian coefficients inside the
    /// two-thirds band, optionally scaled per mode by `weight(|k|)`.
    pub fn random(grid: &Grid, rng: &mut impl Rng, weight: impl Fn(f64) -> f64) -> Self {
        let mut u = Self::zeros(grid);
        for idx in 0..grid.len() {
            if !grid.in_band(idx) {
                continue;
            }
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            u.coef[idx] = Complex64::new(re, im) * weight(grid.wavenumber(idx));
        }
        u.symmetrize();
        u
    }

    /// Projects onto real fields: `u_k <- (u_k + conj(u_-k)) / 2`, and zeros
    /// the unpaired Nyquist modes.
    pub fn symmetrize(&mut self) {
        let g = &self.grid;
        let half = (g.n() / 2) as i64;
        let old = self.coef.clone();
        for idx in 0..g.len() {
            let k = g.wavevector(idx);
            if k[0] == -half || k[1] == -half {
                self.coef[idx] = Complex64::default();
                continue;
            }
            self.coef[idx] = 0.5 * (old[idx] + old[g.negate(idx)].conj());
        }
    }

    pub fn physical(&self) -> Vec<f64> {
        self.grid.inverse(&self.coef)
    }

    /// Sum of `|u_k|^2`.
    pub fn coef_norm_sq(&self) -> f64 {
        self.coef.iter().map(|c| c.norm_sqr()).sum()
    }

    /// Squared `L^2` norm over the torus, `(2pi)^d sum |u_k|^2`.
    pub fn l2_sq(&self) -> f64 {
        (2.0 * PI).powi(self.grid.dim() as i32) * self.coef_norm_sq()
    }

    pub fn l2(&self) -> f64 {
        self.l2_sq().sqrt()
    }

    /// `L^2` inner product `\int u v`.
    pub fn inner(&self, other: &SpectralField) -> f64 {
        let s: f64 = self
            .coef
            .iter()
            .zip(&other.coef)
            .map(|(a, b)| (a * b.conj()).re)
            .sum();
        (2.0 * PI).powi(self.grid.dim() as i32) * s
    }

    /// Squared `L^2` norm of the gradient.
    pub fn grad_l2_sq(&self) -> f64 {
        let s: f64 = self
            .coef
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let r = self.grid.wavenumber(i);
                r * r * c.norm_sqr()
            })
            .sum();
        (2.0 * PI).powi(self.grid.dim() as i32) * s
    }

    /// Zeros every mode outside the two-thirds band.
    pub fn truncate(&mut self) {
        for idx in 0..self.grid.len() {
            if !self.grid.in_band(idx) {
                self.coef[idx] = Complex64::default();
            }
        }
    }

    pub fn is_band_limited(&self) -> bool {
        (0..self.grid.len()).all(|i| self.grid.in_band(i) || self.coef[i] == Complex64::default())
    }

    /// Largest `|u_k - conj(u_-k)|`.
    pub fn hermitian_defect(&self) -> f64 {
        (0..self.grid.len())
            .map(|i| (self.coef[i] - self.coef[self.grid.negate(i)].conj()).norm())
            .fold(0.0, f64::max)
    }

    /// Applies a Fourier multiplier depending on the integer wave vector.
    pub fn multiplier(&self, m: impl Fn([i64; 2]) -> f64) -> SpectralField {
        let coef = self
            .coef
            .iter()
            .enumerate()
            .map(|(i, c)| c * m(self.grid.wavevector(i)))
            .collect();
        SpectralField {
            grid: self.grid.clone(),
            coef,
        }
    }

    /// Partial derivative along `axis`, with the Nyquist mode dropped.
    pub fn derivative(&self, axis: usize) -> SpectralField {
        let half = (self.grid.n() / 2) as i64;
        let coef = self
            .coef
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let k = self.grid.wavevector(i)[axis];
                if k == -half {
                    Complex64::default()
                } else {
                    c * Complex64::new(0.0, k as f64)
                }
            })
            .collect();
        SpectralField {
            grid: self.grid.clone(),
            coef,
        }
    }

    pub fn scale(&mut self, s: f64) {
        for c in &mut self.coef {
            *c *= s;
        }
    }

    /// `self += s * other`.
    pub fn axpy(&mut self, s: f64, other: &SpectralField) {
        for (a, b) in self.coef.iter_mut().zip(&other.coef) {
            *a += s * b;
        }
    }

    pub fn sub(&self, other: &SpectralField) -> SpectralField {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }

    /// Largest coefficient modulus.
    pub fn max_abs(&self) -> f64 {
        self.coef.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }
}
