//! Periodic x-grid, spectral differentiation matrices and trigonometric interpolation.

use std::f64::consts::PI;

use faer::Mat;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct XGrid {
    pub n: usize,
    pub period: f64,
    pub h: f64,
    pub x: Vec<f64>,
}

impl XGrid {
    pub fn new(n: usize, period: f64) -> Result<Self> {
        if n < 4 || !n.is_power_of_two() {
            return Err(Error::Validation(format!("Nx must be a power of two >= 4, got {n}")));
        }
        if !(period > 0.0 && period.is_finite()) {
            return Err(Error::Validation(format!("period must be positive, got {period}")));
        }
        let h = period / n as f64;
        Ok(XGrid { n, period, h, x: (0..n).map(|i| i as f64 * h).collect() })
    }

    /// Wavenumber unit 2π/P.
    pub fn kappa(&self) -> f64 {
        2.0 * PI / self.period
    }

    /// First-derivative matrix of the trigonometric interpolant (Nyquist mode annihilated).
    /// Exactly antisymmetric.
    pub fn dx_matrix(&self) -> Mat<f64> {
        let n = self.n;
        let step = 2.0 * PI / n as f64;
        let k = self.kappa();
        Mat::from_fn(n, n, |i, j| {
            if i == j {
                0.0
            } else {
                let d = i as isize - j as isize;
                let sign = if d.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
                0.5 * k * sign / (0.5 * d as f64 * step).tan()
            }
        })
    }

    /// Second-derivative matrix of the trigonometric interpolant. Symmetric, with the
    /// Nyquist mode mapped to −(N/2)²κ².
    pub fn dxx_matrix(&self) -> Mat<f64> {
        let n = self.n;
        let step = 2.0 * PI / n as f64;
        let k2 = self.kappa().powi(2);
        Mat::from_fn(n, n, |i, j| {
            if i == j {
                k2 * (-PI * PI / (3.0 * step * step) - 1.0 / 6.0)
            } else {
                let d = i as isize - j as isize;
                let sign = if d.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
                let s = (0.5 * d as f64 * step).sin();
                -k2 * sign / (2.0 * s * s)
            }
        })
    }

    pub fn mean(&self, v: &[f64]) -> f64 {
        v.iter().sum::<f64>() / self.n as f64
    }

    pub fn integrate(&self, v: &[f64]) -> f64 {
        v.iter().sum::<f64>() * self.h
    }
}

fn fft(values: &[f64]) -> Vec<Complex<f64>> {
    let mut buf: Vec<Complex<f64>> = values.iter().map(|&v| Complex::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(buf.len()).process(&mut buf);
    buf
}

fn ifft_real(mut buf: Vec<Complex<f64>>) -> Vec<f64> {
    let n = buf.len();
    FftPlanner::new().plan_fft_inverse(n).process(&mut buf);
    buf.iter().map(|z| z.re / n as f64).collect()
}

/// Signed integer wavenumber of FFT bin j.
fn wavenumber(j: usize, n: usize) -> isize {
    if j <= n / 2 {
        j as isize
    } else {
        j as isize - n as isize
    }
}

/// Spectral derivative of order 1 or 2 by FFT (Nyquist dropped for odd orders).
pub fn spectral_derivative(values: &[f64], period: f64, order: u32) -> Vec<f64> {
    let n = values.len();
    let k0 = 2.0 * PI / period;
    let mut c = fft(values);
    for (j, cj) in c.iter_mut().enumerate() {
        let k = wavenumber(j, n) as f64 * k0;
        if order % 2 == 1 && j == n / 2 {
            *cj = Complex::new(0.0, 0.0);
            continue;
        }
        *cj *= Complex::new(0.0, k).powu(order);
    }
    ifft_real(c)
}

/// Mean-zero periodic solution of h'' = rhs − mean(rhs).
pub fn poisson_solve(rhs: &[f64], period: f64) -> Vec<f64> {
    let n = rhs.len();
    let k0 = 2.0 * PI / period;
    let mut c = fft(rhs);
    for (j, cj) in c.iter_mut().enumerate() {
        if j == 0 {
            *cj = Complex::new(0.0, 0.0);
        } else {
            let k = wavenumber(j, n) as f64 * k0;
            *cj /= -k * k;
        }
    }
    ifft_real(c)
}

/// Real trigonometric interpolant a₀ + Σ aₖcos(kκx) + bₖsin(kκx) of nodal data.
#[derive(Clone, Debug)]
pub struct TrigInterpolant {
    kappa: f64,
    a: Vec<f64>,
    b: Vec<f64>,
}

impl TrigInterpolant {
    pub fn new(values: &[f64], period: f64) -> Self {
        let n = values.len();
        let c = fft(values);
        let mut a = vec![0.0; n / 2 + 1];
        let mut b = vec![0.0; n / 2 + 1];
        a[0] = c[0].re / n as f64;
        for k in 1..n / 2 {
            a[k] = 2.0 * c[k].re / n as f64;
            b[k] = -2.0 * c[k].im / n as f64;
        }
        a[n / 2] = c[n / 2].re / n as f64;
        TrigInterpolant { kappa: 2.0 * PI / period, a, b }
    }

    pub fn is_zero(&self) -> bool {
        self.a.iter().chain(&self.b).all(|&c| c == 0.0)
    }

    /// Value and first derivative at x.
    pub fn eval_with_derivative(&self, x: f64) -> (f64, f64) {
        let th = self.kappa * x;
        let (s1, c1) = th.sin_cos();
        let (mut s, mut c) = (0.0, 1.0);
        let mut f = self.a[0];
        let mut df = 0.0;
        for k in 1..self.a.len() {
            let (sn, cn) = (s * c1 + c * s1, c * c1 - s * s1);
            s = sn;
            c = cn;
            let kk = k as f64 * self.kappa;
            f += self.a[k] * c + self.b[k] * s;
            df += kk * (-self.a[k] * s + self.b[k] * c);
        }
        (f, df)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.eval_with_derivative(x).0
    }

    pub fn derivative(&self, x: f64) -> f64 {
        self.eval_with_derivative(x).1
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum XBasisKind {
    Nodal,
    /// Real Fourier block of integer mode `mode` (0 ≤ mode ≤ N/2).
    FourierBlock { mode: usize },
}

/// Representation of x-functions used to build phase-space operators: either nodal
/// values or a single real Fourier block of a homogeneous problem. `wx` is the
/// quadrature weight of each coefficient, so ∫hg dx = wx·Σhᵢgᵢ.
#[derive(Clone, Debug)]
pub struct XBasis {
    pub kind: XBasisKind,
    pub n: usize,
    pub nx: usize,
    pub period: f64,
    pub wx: f64,
    pub dx: Mat<f64>,
    pub neg_lap: Mat<f64>,
    /// Orthogonal projector onto ker dx.
    pub ker_dx: Mat<f64>,
    /// Row r with ∫h dx = r·h.
    pub mean_row: Vec<f64>,
}

impl XBasis {
    pub fn nodal(grid: &XGrid) -> Self {
        let n = grid.n;
        let dxx = grid.dxx_matrix();
        let ker = Mat::from_fn(n, n, |i, j| {
            let nyq = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
            (1.0 + nyq) / n as f64
        });
        XBasis {
            kind: XBasisKind::Nodal,
            n,
            nx: n,
            period: grid.period,
            wx: grid.h,
            dx: grid.dx_matrix(),
            neg_lap: Mat::from_fn(n, n, |i, j| -dxx[(i, j)]),
            ker_dx: ker,
            mean_row: vec![grid.h; n],
        }
    }

    /// All real Fourier blocks 0, 1, …, N/2 of an N-point grid.
    pub fn fourier_blocks(grid: &XGrid) -> Vec<Self> {
        (0..=grid.n / 2).map(|m| Self::fourier_block(grid, m)).collect()
    }

    pub fn fourier_block(grid: &XGrid, mode: usize) -> Self {
        let nx = grid.n;
        let k = mode as f64 * grid.kappa();
        let interior = mode != 0 && mode != nx / 2;
        let n = if interior { 2 } else { 1 };
        let dx = if interior {
            Mat::from_fn(2, 2, |i, j| match (i, j) {
                (0, 1) => k,
                (1, 0) => -k,
                _ => 0.0,
            })
        } else {
            Mat::zeros(1, 1)
        };
        let ker = if interior { Mat::zeros(2, 2) } else { Mat::identity(1, 1) };
        let mean_row = if mode == 0 { vec![grid.period.sqrt()] } else { vec![0.0; n] };
        XBasis {
            kind: XBasisKind::FourierBlock { mode },
            n,
            nx,
            period: grid.period,
            wx: 1.0,
            dx,
            neg_lap: Mat::from_fn(n, n, |i, j| if i == j { k * k } else { 0.0 }),
            ker_dx: ker,
            mean_row,
        }
    }

    /// Multiplication by the x-function with nodal values `values`.
    pub fn multiplier(&self, values: &[f64]) -> Result<Mat<f64>> {
        match self.kind {
            XBasisKind::Nodal => {
                Ok(Mat::from_fn(self.n, self.n, |i, j| if i == j { values[i] } else { 0.0 }))
            }
            XBasisKind::FourierBlock { .. } => {
                let c = values[0];
                let scale = values.iter().fold(1.0f64, |m, v| m.max(v.abs()));
                if values.iter().any(|v| (v - c).abs() > 1e-12 * scale) {
                    return Err(Error::Contract(
                        "Fourier-block basis needs x-independent coefficients".into(),
                    ));
                }
                Ok(Mat::from_fn(self.n, self.n, |i, j| if i == j { c } else { 0.0 }))
            }
        }
    }

    /// H¹ Gram wx(−∂ₓₓ + I).
    pub fn h1_gram(&self) -> Mat<f64> {
        Mat::from_fn(self.n, self.n, |i, j| {
            self.wx * (self.neg_lap[(i, j)] + if i == j { 1.0 } else { 0.0 })
        })
    }
}
