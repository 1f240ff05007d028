use num_complex::Complex64;

use super::fft::GridFft;
use super::grid::GridDensity;
use crate::error::{Error, Result};
use crate::kernels::Kernel;

/// Circular convolution with a fixed kernel grid, applied in Fourier space.
///
/// The kernel is symmetric, so its transform is real and the operator is
/// self-adjoint on the grid.
#[derive(Clone, Debug)]
pub struct NoiseOperator {
    d: usize,
    m: usize,
    multiplier: Vec<f64>,
    fft: GridFft,
}

impl NoiseOperator {
    /// `kernel` holds cell averages of `K_ε` on cells centred at the grid nodes.
    pub fn from_grid(kernel: &GridDensity) -> Self {
        let (d, m) = (kernel.dim(), kernel.size());
        let fft = GridFft::new(d, m);
        let multiplier = fft.coefficients(kernel).into_iter().map(|c| c.re).collect();
        Self { d, m, multiplier, fft }
    }

    pub fn from_kernel(kernel: &dyn Kernel, m: usize) -> Result<Self> {
        Ok(Self::from_grid(&kernel.grid(m)?))
    }

    pub fn size(&self) -> usize {
        self.m
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    /// Eigenvalue of the operator on each DFT mode (flat index).
    pub fn multiplier(&self) -> &[f64] {
        &self.multiplier
    }

    pub fn fft(&self) -> &GridFft {
        &self.fft
    }

    pub fn apply(&self, f: &GridDensity) -> Result<GridDensity> {
        if f.dim() != self.d || f.size() != self.m {
            return Err(Error::SizeMismatch(f.cell_count(), self.multiplier.len()));
        }
        let mut data: Vec<Complex64> = f.values().iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.fft.forward(&mut data);
        for (c, &w) in data.iter_mut().zip(&self.multiplier) {
            *c *= w;
        }
        self.fft.inverse(&mut data);
        GridDensity::new(self.d, self.m, data.into_iter().map(|c| c.re).collect())
    }

    /// Applies the operator `n` times in one round trip through Fourier space.
    pub fn apply_power(&self, f: &GridDensity, n: u32) -> Result<GridDensity> {
        if f.dim() != self.d || f.size() != self.m {
            return Err(Error::SizeMismatch(f.cell_count(), self.multiplier.len()));
        }
        let mut data: Vec<Complex64> = f.values().iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.fft.forward(&mut data);
        for (c, &w) in data.iter_mut().zip(&self.multiplier) {
            *c *= w.powi(n as i32);
        }
        self.fft.inverse(&mut data);
        GridDensity::new(self.d, self.m, data.into_iter().map(|c| c.re).collect())
    }
}

/// One-shot circular convolution `kernel ∗ f`.
pub fn convolve_noise(kernel: &GridDensity, f: &GridDensity) -> Result<GridDensity> {
    if kernel.dim() != f.dim() || kernel.size() != f.size() {
        return Err(Error::SizeMismatch(kernel.cell_count(), f.cell_count()));
    }
    NoiseOperator::from_grid(kernel).apply(f)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kernel_grid() -> GridDensity {
        let mut v = vec![0.0; 16];
        v[0] = 8.0;
        v[1] = 4.0;
        v[15] = 4.0;
        GridDensity::new(1, 16, v).unwrap()
    }

    #[test]
    fn constant_is_fixed() {
        let out = convolve_noise(&kernel_grid(), &GridDensity::uniform(1, 16)).unwrap();
        for v in out.values() {
            assert!((v - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn delta_gives_translated_kernel() {
        let k = kernel_grid();
        let delta = GridDensity::point_mass(1, 16, &[5]);
        let out = convolve_noise(&k, &delta).unwrap();
        for j in 0..16 {
            let expect = k.values()[(j + 16 - 5) % 16];
            assert!((out.values()[j] - expect).abs() < 1e-13);
        }
    }

    #[test]
    fn size_mismatch() {
        let err = convolve_noise(&kernel_grid(), &GridDensity::uniform(1, 8)).unwrap_err();
        assert!(matches!(err, Error::SizeMismatch(..)));
    }
}
