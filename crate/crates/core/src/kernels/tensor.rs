use std::f64::consts::PI;

use rand::{Rng, RngCore};

use super::{centred_cells_1d, check_epsilon, check_grid, outer_product, sinc, Kernel, KernelKind, KernelSpec};
use crate::density::GridDensity;
use crate::error::{Error, Result};

/// One-dimensional factor of a product kernel.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TensorProfile {
    /// `1 − |x|` on `[−1, 1]`.
    Tent,
    /// `1` on `[−1/2, 1/2]`.
    Uniform,
}

impl TensorProfile {
    fn cdf(&self, x: f64) -> f64 {
        match self {
            TensorProfile::Tent => {
                if x <= -1.0 {
                    0.0
                } else if x <= 0.0 {
                    0.5 * (x + 1.0) * (x + 1.0)
                } else if x < 1.0 {
                    1.0 - 0.5 * (1.0 - x) * (1.0 - x)
                } else {
                    1.0
                }
            }
            TensorProfile::Uniform => (x + 0.5).clamp(0.0, 1.0),
        }
    }

    fn density(&self, x: f64) -> f64 {
        match self {
            TensorProfile::Tent => (1.0 - x.abs()).max(0.0),
            TensorProfile::Uniform => {
                if x.abs() <= 0.5 { 1.0 } else { 0.0 }
            }
        }
    }

    fn transform(&self, xi: f64) -> f64 {
        let s = sinc(PI * xi);
        match self {
            TensorProfile::Tent => s * s,
            TensorProfile::Uniform => s,
        }
    }

    fn half_width(&self) -> f64 {
        match self {
            TensorProfile::Tent => 1.0,
            TensorProfile::Uniform => 0.5,
        }
    }

    /// `(A, A̲)`.
    pub fn moments(&self) -> (f64, f64) {
        match self {
            TensorProfile::Tent => (1.0 / 3.0, 1.0 / 12.0),
            TensorProfile::Uniform => (0.25, 0.125),
        }
    }
}

/// `K̂(x) = Π ǩ(x_i)` with a common factor.
#[derive(Clone, Debug)]
pub struct TensorKernel {
    profile: TensorProfile,
    d: usize,
    epsilon: f64,
}

impl TensorKernel {
    pub fn new(profile: TensorProfile, d: usize, epsilon: f64) -> Result<Self> {
        check_epsilon(epsilon)?;
        if d == 0 {
            return Err(Error::Domain("dimension must be positive".into()));
        }
        Ok(Self { profile, d, epsilon })
    }

    pub fn profile(&self) -> TensorProfile {
        self.profile
    }
}

impl Kernel for TensorKernel {
    fn kind(&self) -> KernelKind {
        match self.profile {
            TensorProfile::Tent => KernelKind::TensorTent,
            TensorProfile::Uniform => KernelKind::TensorUniform,
        }
    }

    fn dim(&self) -> usize {
        self.d
    }

    fn epsilon(&self) -> f64 {
        self.epsilon
    }

    fn grid(&self, m: usize) -> Result<GridDensity> {
        check_grid(m)?;
        if self.epsilon * (m as f64) < 2.0 {
            return Err(Error::Resolution(format!("kernel scale {} spans fewer than two cells of 1/{m}", self.epsilon)));
        }
        let eps = self.epsilon;
        let profile = self.profile;
        let images = 1 + (eps * profile.half_width()).ceil() as i64;
        let factor = centred_cells_1d(m, images, |a, b| profile.cdf(b / eps) - profile.cdf(a / eps));
        outer_product(&vec![factor; self.d])
    }

    fn fourier(&self, k: &[i64]) -> Result<f64> {
        Ok(k.iter().map(|&ki| self.profile.transform(ki as f64 * self.epsilon)).product())
    }

    fn sample(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        (0..self.d)
            .map(|_| {
                let x = match self.profile {
                    TensorProfile::Tent => rng.random::<f64>() + rng.random::<f64>() - 1.0,
                    TensorProfile::Uniform => rng.random::<f64>() - 0.5,
                };
                x * self.epsilon
            })
            .collect()
    }

    fn unscaled_density(&self, x: &[f64]) -> Option<f64> {
        Some(x.iter().map(|&v| self.profile.density(v)).product())
    }

    fn unscaled_fourier(&self, xi: &[f64]) -> Option<f64> {
        Some(xi.iter().map(|&v| self.profile.transform(v)).product())
    }

    fn support_radius(&self) -> Option<f64> {
        Some(self.epsilon * self.profile.half_width() * (self.d as f64).sqrt())
    }

    fn axis_abs_moments(&self) -> Option<Vec<f64>> {
        Some(vec![self.profile.moments().0; self.d])
    }

    fn tensor_moments(&self) -> Option<(f64, f64)> {
        Some(self.profile.moments())
    }

    fn signed_permutation_invariant(&self) -> bool {
        true
    }

    fn spec(&self) -> KernelSpec {
        KernelSpec::new(self.kind(), self.epsilon)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
        let n = 200_000;
        let h = (b - a) / n as f64;
        (0..n).map(|i| f(a + (i as f64 + 0.5) * h)).sum::<f64>() * h
    }

    #[test]
    fn moments_match_quadrature() {
        for p in [TensorProfile::Tent, TensorProfile::Uniform] {
            let (a, a_low) = p.moments();
            assert!((integrate(|x| p.density(x), -1.0, 1.0) - 1.0).abs() < 1e-9);
            assert!((integrate(|x| x.abs() * p.density(x), -1.0, 1.0) - a).abs() < 1e-9);
            assert!((integrate(|x| x * p.density(x), 0.0, 0.5) - a_low).abs() < 1e-9);
        }
    }

    #[test]
    fn grid_matches_transform() {
        let k = TensorKernel::new(TensorProfile::Tent, 1, 0.1).unwrap();
        let g = k.grid(1024).unwrap();
        // DFT of centred cell averages = Σ_n K̂(k+nm) · sinc(π(k+nm)/m)
        for mode in 1..5i64 {
            let dft: f64 = g
                .values()
                .iter()
                .enumerate()
                .map(|(j, v)| v * (2.0 * PI * mode as f64 * j as f64 / 1024.0).cos())
                .sum::<f64>()
                / 1024.0;
            let expect: f64 = (-200i64..=200)
                .map(|n| {
                    let q = mode + n * 1024;
                    k.fourier(&[q]).unwrap() * sinc(PI * q as f64 / 1024.0)
                })
                .sum();
            assert!((dft - expect).abs() < 1e-12, "{mode}: {dft} vs {expect}");
        }
    }
}
