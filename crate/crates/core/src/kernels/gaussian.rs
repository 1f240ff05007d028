use std::f64::consts::{FRAC_1_SQRT_2, PI};

use nalgebra::DMatrix;
use rand::{Rng, RngCore};
use rand_distr::StandardNormal;

use super::{centred_cells_1d, check_epsilon, check_grid, outer_product, Kernel, KernelKind, KernelSpec};
use crate::density::{gauss_legendre, GridDensity};
use crate::error::{Error, Result};

/// Rescaled, periodized Gaussian with covariance `ε² Ǎ`.
#[derive(Clone, Debug)]
pub struct PeriodizedGaussian {
    epsilon: f64,
    covariance: DMatrix<f64>,
    cholesky: DMatrix<f64>,
    precision: DMatrix<f64>,
    det: f64,
    given: Option<Vec<Vec<f64>>>,
}

impl PeriodizedGaussian {
    pub fn standard(d: usize, epsilon: f64) -> Result<Self> {
        if d == 0 {
            return Err(Error::Domain("dimension must be positive".into()));
        }
        let mut g = Self::from_matrix(epsilon, DMatrix::identity(d, d))?;
        g.given = None;
        Ok(g)
    }

    pub fn with_covariance(epsilon: f64, covariance: Vec<Vec<f64>>) -> Result<Self> {
        let d = covariance.len();
        if d == 0 || covariance.iter().any(|r| r.len() != d) {
            return Err(Error::Domain("covariance must be a non-empty square matrix".into()));
        }
        let mat = DMatrix::from_fn(d, d, |i, j| covariance[i][j]);
        if (0..d).any(|i| (0..d).any(|j| (mat[(i, j)] - mat[(j, i)]).abs() > 1e-14)) {
            return Err(Error::Domain("covariance must be symmetric".into()));
        }
        let mut g = Self::from_matrix(epsilon, mat)?;
        g.given = Some(covariance);
        Ok(g)
    }

    fn from_matrix(epsilon: f64, covariance: DMatrix<f64>) -> Result<Self> {
        check_epsilon(epsilon)?;
        let chol = covariance
            .clone()
            .cholesky()
            .ok_or_else(|| Error::Domain("covariance must be positive definite".into()))?;
        let cholesky = chol.l();
        let precision = chol.inverse();
        let det = covariance.determinant();
        Ok(Self { epsilon, covariance, cholesky, precision, det, given: None })
    }

    fn d(&self) -> usize {
        self.covariance.nrows()
    }

    pub fn is_diagonal(&self) -> bool {
        let d = self.d();
        (0..d).all(|i| (0..d).all(|j| i == j || self.covariance[(i, j)] == 0.0))
    }

    pub fn is_isotropic(&self) -> bool {
        let c = self.covariance[(0, 0)];
        self.is_diagonal() && (0..self.d()).all(|i| self.covariance[(i, i)] == c)
    }

    fn quadratic(&self, m: &DMatrix<f64>, x: &[f64]) -> f64 {
        let d = self.d();
        let mut q = 0.0;
        for i in 0..d {
            for j in 0..d {
                q += x[i] * m[(i, j)] * x[j];
            }
        }
        q
    }

    /// Point value of the periodized density `K_ε(x)`.
    fn periodized(&self, x: &[f64], images: i64) -> f64 {
        let d = self.d();
        let eps2 = self.epsilon * self.epsilon;
        let norm = ((2.0 * PI * eps2).powi(d as i32) * self.det).sqrt();
        let mut shift = vec![-images; d];
        let mut y = vec![0.0; d];
        let mut acc = 0.0;
        loop {
            for k in 0..d {
                y[k] = x[k] + shift[k] as f64;
            }
            acc += (-0.5 * self.quadratic(&self.precision, &y) / eps2).exp();
            let mut k = d;
            loop {
                if k == 0 {
                    return acc / norm;
                }
                k -= 1;
                shift[k] += 1;
                if shift[k] <= images {
                    break;
                }
                shift[k] = -images;
            }
        }
    }

    fn images(&self) -> i64 {
        let sd_max = (0..self.d()).map(|i| self.covariance[(i, i)].sqrt()).fold(0.0, f64::max);
        1 + (8.0 * self.epsilon * sd_max).ceil() as i64
    }
}

/// `P(a ≤ Z < b)` for a standard normal, accurate in both tails.
pub(crate) fn normal_mass(a: f64, b: f64) -> f64 {
    let c = FRAC_1_SQRT_2;
    if a >= 0.0 {
        0.5 * (libm::erfc(a * c) - libm::erfc(b * c))
    } else if b <= 0.0 {
        0.5 * (libm::erfc(-b * c) - libm::erfc(-a * c))
    } else {
        0.5 * (libm::erf(b * c) - libm::erf(a * c))
    }
}

impl Kernel for PeriodizedGaussian {
    fn kind(&self) -> KernelKind {
        KernelKind::Gaussian
    }

    fn dim(&self) -> usize {
        self.d()
    }

    fn epsilon(&self) -> f64 {
        self.epsilon
    }

    fn grid(&self, m: usize) -> Result<GridDensity> {
        check_grid(m)?;
        let d = self.d();
        let images = self.images();
        if self.is_diagonal() {
            let factors: Vec<Vec<f64>> = (0..d)
                .map(|k| {
                    let sd = self.epsilon * self.covariance[(k, k)].sqrt();
                    centred_cells_1d(m, images, |a, b| normal_mass(a / sd, b / sd))
                })
                .collect();
            return outer_product(&factors);
        }
        // general covariance: 4-point Gauss–Legendre per centred cell, then
        // symmetrize under x -> -x and renormalize
        let (nodes, weights) = gauss_legendre(4);
        let h = 1.0 / m as f64;
        let mut g = GridDensity::zeros(d, m);
        let mut sub = vec![0usize; d];
        let mut x = vec![0.0; d];
        for flat in 0..g.cell_count() {
            let multi = g.multi(flat);
            let neg: Vec<usize> = multi.iter().map(|&j| (m - j) % m).collect();
            let mirror = g.flat(&neg);
            if mirror < flat {
                let v = g.values()[mirror];
                g.values_mut()[flat] = v;
                continue;
            }
            let mut acc = 0.0;
            sub.iter_mut().for_each(|s| *s = 0);
            loop {
                let mut w = 1.0;
                for k in 0..d {
                    let j = super::super::density::signed_mode(multi[k], m) as f64;
                    x[k] = (j - 0.5 + nodes[sub[k]]) * h;
                    w *= weights[sub[k]];
                }
                acc += w * self.periodized(&x, images);
                let mut k = d;
                let mut done = true;
                while k > 0 {
                    k -= 1;
                    sub[k] += 1;
                    if sub[k] < 4 {
                        done = false;
                        break;
                    }
                    sub[k] = 0;
                }
                if done {
                    break;
                }
            }
            g.values_mut()[flat] = acc;
        }
        let mean = g.mean();
        Ok(g.scale(1.0 / mean))
    }

    fn fourier(&self, k: &[i64]) -> Result<f64> {
        let kf: Vec<f64> = k.iter().map(|&v| v as f64).collect();
        Ok((-2.0 * PI * PI * self.epsilon * self.epsilon * self.quadratic(&self.covariance, &kf)).exp())
    }

    fn sample(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        let d = self.d();
        let z: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        (0..d)
            .map(|i| self.epsilon * (0..=i).map(|j| self.cholesky[(i, j)] * z[j]).sum::<f64>())
            .collect()
    }

    fn unscaled_density(&self, x: &[f64]) -> Option<f64> {
        let d = self.d() as i32;
        let norm = ((2.0 * PI).powi(d) * self.det).sqrt();
        Some((-0.5 * self.quadratic(&self.precision, x)).exp() / norm)
    }

    fn unscaled_fourier(&self, xi: &[f64]) -> Option<f64> {
        Some((-2.0 * PI * PI * self.quadratic(&self.covariance, xi)).exp())
    }

    fn axis_abs_moments(&self) -> Option<Vec<f64>> {
        self.is_diagonal()
            .then(|| (0..self.d()).map(|k| self.covariance[(k, k)].sqrt() * (2.0 / PI).sqrt()).collect())
    }

    fn signed_permutation_invariant(&self) -> bool {
        self.is_isotropic()
    }

    fn spec(&self) -> KernelSpec {
        KernelSpec { covariance: self.given.clone(), ..KernelSpec::new(KernelKind::Gaussian, self.epsilon) }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn fourier_example() {
        let g = PeriodizedGaussian::standard(1, 0.1).unwrap();
        assert!((g.fourier(&[1]).unwrap() - 0.820_868_717_4).abs() < 1e-6);
        assert_eq!(g.fourier(&[0]).unwrap(), 1.0);
    }

    #[test]
    fn normal_mass_tails() {
        assert!((normal_mass(-1.0, 1.0) - 0.682_689_492_137_085_9).abs() < 1e-15);
        let tail = normal_mass(10.0, 11.0);
        assert!(tail > 0.0 && (tail / 7.619_661_958_203_02e-24 - 1.0).abs() < 1e-6);
    }

    #[test]
    fn grid_is_symmetric_with_unit_mass() {
        let g = PeriodizedGaussian::standard(1, 0.05).unwrap().grid(128).unwrap();
        assert!((g.mean() - 1.0).abs() < 1e-14);
        for j in 1..128 {
            assert_eq!(g.values()[j], g.values()[128 - j]);
        }
    }

    #[test]
    fn general_covariance_matches_diagonal_path() {
        let diag = PeriodizedGaussian::with_covariance(0.1, vec![vec![1.0, 0.0], vec![0.0, 2.0]]).unwrap();
        let a = diag.grid(32).unwrap();
        let mut skew = diag.clone();
        skew.covariance[(0, 1)] = 1e-300;
        let b = skew.grid(32).unwrap();
        let err = a.sub(&b).unwrap().norm_l1();
        assert!(err < 1e-4, "{err}");
    }

    #[test]
    fn sample_std_matches_epsilon() {
        let g = PeriodizedGaussian::standard(1, 0.05).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 20_000;
        let xs: Vec<f64> = (0..n).map(|_| g.sample(&mut rng)[0]).collect();
        let var = xs.iter().map(|x| x * x).sum::<f64>() / n as f64;
        assert!((var.sqrt() - 0.05).abs() < 0.05 * 3.0 / (n as f64).sqrt());
    }

    #[test]
    fn rejects_indefinite_covariance() {
        assert!(PeriodizedGaussian::with_covariance(0.1, vec![vec![1.0, 2.0], vec![2.0, 1.0]]).is_err());
    }
}
