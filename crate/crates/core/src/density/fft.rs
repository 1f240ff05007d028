use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::grid::{unflatten, GridDensity};
use crate::error::Result;

/// Separable multi-dimensional FFT on an `m^d` grid.
#[derive(Clone)]
pub struct GridFft {
    d: usize,
    m: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for GridFft {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GridFft").field("d", &self.d).field("m", &self.m).finish()
    }
}

impl GridFft {
    pub fn new(d: usize, m: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self { d, m, forward: planner.plan_fft_forward(m), inverse: planner.plan_fft_inverse(m) }
    }

    /// Unnormalized forward transform in place.
    pub fn forward(&self, data: &mut [Complex64]) {
        self.transform(data, &self.forward);
    }

    /// Inverse transform in place, normalized so that `inverse(forward(x)) = x`.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.transform(data, &self.inverse);
        let scale = 1.0 / data.len() as f64;
        data.iter_mut().for_each(|c| *c *= scale);
    }

    fn transform(&self, data: &mut [Complex64], fft: &Arc<dyn Fft<f64>>) {
        let m = self.m;
        // last axis: contiguous lines
        fft.process(data);
        if self.d == 1 {
            return;
        }
        let mut line = vec![Complex64::new(0.0, 0.0); m];
        for axis in 0..self.d - 1 {
            let stride = m.pow((self.d - 1 - axis) as u32);
            let block = stride * m;
            for start in 0..data.len() / block {
                for offset in 0..stride {
                    let base = start * block + offset;
                    for j in 0..m {
                        line[j] = data[base + j * stride];
                    }
                    fft.process(&mut line);
                    for j in 0..m {
                        data[base + j * stride] = line[j];
                    }
                }
            }
        }
    }

    /// Fourier coefficients of the piecewise-constant field, scaled by `1/m^d`
    /// so that the zero mode is the mean.
    pub fn coefficients(&self, f: &GridDensity) -> Vec<Complex64> {
        let mut data: Vec<Complex64> = f.values().iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward(&mut data);
        let scale = 1.0 / data.len() as f64;
        data.iter_mut().for_each(|c| *c *= scale);
        data
    }

    /// Inverse of [`coefficients`](Self::coefficients), keeping the real part.
    pub fn synthesize(&self, coefficients: &[Complex64]) -> Result<GridDensity> {
        let mut data: Vec<Complex64> = coefficients.iter().map(|c| c * coefficients.len() as f64).collect();
        self.inverse(&mut data);
        GridDensity::new(self.d, self.m, data.into_iter().map(|c| c.re).collect())
    }

    /// Signed lattice vector of the flat DFT index.
    pub fn mode(&self, flat: usize) -> Vec<i64> {
        let mut multi = vec![0; self.d];
        unflatten(flat, self.d, self.m, &mut multi);
        multi.into_iter().map(|i| signed_mode(i, self.m)).collect()
    }
}

/// DFT index to signed frequency in `(-m/2, m/2]`.
pub fn signed_mode(i: usize, m: usize) -> i64 {
    if 2 * i <= m { i as i64 } else { i as i64 - m as i64 }
}

pub fn mode_norm(k: &[i64]) -> f64 {
    (k.iter().map(|&x| (x * x) as f64).sum::<f64>()).sqrt()
}

/// Splits `f` into Fourier modes with `|k| ≤ cutoff` and the rest.
pub fn freq_split(f: &GridDensity, cutoff: f64) -> Result<(GridDensity, GridDensity)> {
    let fft = GridFft::new(f.dim(), f.size());
    let coeffs = fft.coefficients(f);
    let mut low = coeffs.clone();
    for (flat, c) in low.iter_mut().enumerate() {
        if mode_norm(&fft.mode(flat)) > cutoff {
            *c = Complex64::new(0.0, 0.0);
        }
    }
    let low = fft.synthesize(&low)?;
    let high = f.sub(&low)?;
    Ok((low, high))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn cos_mode(m: usize, k: f64) -> GridDensity {
        GridDensity::from_fn(1, m, 4, |x| (2.0 * PI * k * x[0]).cos())
    }

    #[test]
    fn round_trip_2d() {
        let f = GridDensity::from_fn(2, 8, 2, |x| (x[0] * 3.0).sin() + x[1]);
        let fft = GridFft::new(2, 8);
        let back = fft.synthesize(&fft.coefficients(&f)).unwrap();
        for (a, b) in f.values().iter().zip(back.values()) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn split_examples() {
        let f = cos_mode(64, 3.0);
        let (low, high) = freq_split(&f, 2.0).unwrap();
        assert!(low.norm_l2() < 1e-13);
        assert!((high.norm_l2() - f.norm_l2()).abs() < 1e-13);
        let (low, high) = freq_split(&f, 32.0).unwrap();
        assert!(high.norm_l2() < 1e-13);
        assert!((low.norm_l2() - f.norm_l2()).abs() < 1e-13);
        let (low, _) = freq_split(&f, 0.5).unwrap();
        assert!(low.norm_l2() < 1e-13);
    }

    #[test]
    fn signed_modes() {
        assert_eq!(signed_mode(0, 8), 0);
        assert_eq!(signed_mode(4, 8), 4);
        assert_eq!(signed_mode(5, 8), -3);
    }
}
