//! Tangential Fourier machinery: batched FFTs along x, wavenumbers, the
//! 2/3 dealiasing mask and spectral x-derivatives.

use std::fmt;
use std::sync::Arc;

use ndarray::{Array2, ArrayView2};
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

#[derive(Clone)]
pub struct Spectral {
    nx: usize,
    lx: f64,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    wavenumbers: Vec<f64>,
    cutoff: usize,
}

impl fmt::Debug for Spectral {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Spectral")
            .field("nx", &self.nx)
            .field("lx", &self.lx)
            .field("cutoff", &self.cutoff)
            .finish()
    }
}

impl Spectral {
    pub fn new(nx: usize, lx: f64) -> Self {
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(nx);
        let inverse = planner.plan_fft_inverse(nx);
        let wavenumbers = (0..nx)
            .map(|n| {
                let s = if n <= nx / 2 { n as f64 } else { n as f64 - nx as f64 };
                2.0 * std::f64::consts::PI * s / lx
            })
            .collect();
        Self { nx, lx, forward, inverse, wavenumbers, cutoff: nx / 3 }
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    /// Largest retained signed mode index under the 2/3 rule.
    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    /// Angular wavenumber of FFT bin `n`.
    pub fn wavenumber(&self, n: usize) -> f64 {
        self.wavenumbers[n]
    }

    pub fn wavenumbers(&self) -> &[f64] {
        &self.wavenumbers
    }

    /// Signed mode index of FFT bin `n`.
    pub fn signed_index(&self, n: usize) -> i64 {
        if n <= self.nx / 2 {
            n as i64
        } else {
            n as i64 - self.nx as i64
        }
    }

    pub fn kept(&self, n: usize) -> bool {
        self.signed_index(n).unsigned_abs() as usize <= self.cutoff
    }

    /// Normalised forward transform of every column: `out[n, j]` is the
    /// coefficient of `exp(i k_n x)` in `f[·, j]`.
    pub fn forward(&self, f: ArrayView2<f64>) -> Array2<Complex64> {
        let (nx, nz) = f.dim();
        assert_eq!(nx, self.nx);
        let mut buf = vec![Complex64::new(0.0, 0.0); nx * nz];
        for ((i, j), v) in f.indexed_iter() {
            buf[j * nx + i] = Complex64::new(*v, 0.0);
        }
        self.forward.process(&mut buf);
        let scale = 1.0 / nx as f64;
        Array2::from_shape_fn((nx, nz), |(n, j)| buf[j * nx + n] * scale)
    }

    /// Inverse of [`Spectral::forward`], keeping the real part.
    pub fn inverse(&self, c: &Array2<Complex64>) -> Array2<f64> {
        let (nx, nz) = c.dim();
        assert_eq!(nx, self.nx);
        let mut buf = vec![Complex64::new(0.0, 0.0); nx * nz];
        for ((n, j), v) in c.indexed_iter() {
            buf[j * nx + n] = *v;
        }
        self.inverse.process(&mut buf);
        Array2::from_shape_fn((nx, nz), |(i, j)| buf[j * nx + i].re)
    }

    /// Zeroes every bin outside the 2/3 band.
    pub fn mask(&self, c: &mut Array2<Complex64>) {
        for n in 0..self.nx {
            if !self.kept(n) {
                c.row_mut(n).fill(Complex64::new(0.0, 0.0));
            }
        }
    }

    pub fn dealias(&self, f: ArrayView2<f64>) -> Array2<f64> {
        let mut c = self.forward(f);
        self.mask(&mut c);
        self.inverse(&c)
    }

    /// `∂_x^m f` by multiplication with `(i k)^m`. The Nyquist bin is always
    /// dropped; with `dealias` every bin outside the 2/3 band is dropped too.
    pub fn derivative(&self, f: ArrayView2<f64>, m: u32, dealias: bool) -> Array2<f64> {
        let mut c = self.forward(f);
        self.multiply_ik(&mut c, m, dealias);
        self.inverse(&c)
    }

    pub fn multiply_ik(&self, c: &mut Array2<Complex64>, m: u32, dealias: bool) {
        for n in 0..self.nx {
            let drop = (self.nx.is_multiple_of(2) && n == self.nx / 2) || (dealias && !self.kept(n));
            let factor = if drop {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::new(0.0, self.wavenumbers[n]).powu(m)
            };
            c.row_mut(n).mapv_inplace(|v| v * factor);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_and_derivative() {
        let sp = Spectral::new(16, 2.0 * std::f64::consts::PI);
        let f = Array2::from_shape_fn((16, 3), |(i, j)| {
            let x = i as f64 * 2.0 * std::f64::consts::PI / 16.0;
            (x.sin() + 0.5 * (3.0 * x).cos()) * (j as f64 + 1.0)
        });
        let c = sp.forward(f.view());
        let back = sp.inverse(&c);
        for (a, b) in f.iter().zip(back.iter()) {
            assert!((a - b).abs() < 1e-13);
        }
        let d = sp.derivative(f.view(), 1, false);
        for ((i, j), v) in d.indexed_iter() {
            let x = i as f64 * 2.0 * std::f64::consts::PI / 16.0;
            let exact = (x.cos() - 1.5 * (3.0 * x).sin()) * (j as f64 + 1.0);
            assert!((v - exact).abs() < 1e-12);
        }
    }

    #[test]
    fn cutoff_follows_two_thirds_rule() {
        assert_eq!(Spectral::new(32, 1.0).cutoff(), 10);
        assert_eq!(Spectral::new(64, 1.0).cutoff(), 21);
        let sp = Spectral::new(32, 1.0);
        assert!(sp.kept(10) && sp.kept(22) && !sp.kept(11) && !sp.kept(21));
    }
}
