use std::collections::HashMap;
use std::f64::consts::PI;

use rand::{Rng, RngCore};

use super::{centred_cells_1d, check_epsilon, check_grid, sinc, Kernel, KernelKind, KernelSpec};
use crate::density::{signed_mode, GridDensity};
use crate::error::{Error, Result};

/// Uniform density on the Euclidean ball of radius `ε`.
#[derive(Clone, Debug)]
pub struct BallUniform {
    d: usize,
    epsilon: f64,
}

impl BallUniform {
    pub fn new(d: usize, epsilon: f64) -> Result<Self> {
        check_epsilon(epsilon)?;
        if d == 0 {
            return Err(Error::Domain("dimension must be positive".into()));
        }
        if epsilon >= 0.5 {
            return Err(Error::Domain(format!("ball radius {epsilon} must be below 1/2 to fit on the torus")));
        }
        Ok(Self { d, epsilon })
    }

    fn unit_volume(&self) -> f64 {
        let half = self.d as f64 / 2.0;
        PI.powf(half) / libm::tgamma(half + 1.0)
    }
}

impl Kernel for BallUniform {
    fn kind(&self) -> KernelKind {
        KernelKind::Ball
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
            return Err(Error::Resolution(format!("ball radius {} spans fewer than two cells of 1/{m}", self.epsilon)));
        }
        let eps = self.epsilon;
        if self.d == 1 {
            let values = centred_cells_1d(m, 1, |a, b| {
                let lo = a.max(-eps);
                let hi = b.min(eps);
                if hi > lo { (hi - lo) / (2.0 * eps) } else { 0.0 }
            });
            return GridDensity::new(1, m, values);
        }
        // cell averages of the indicator by midpoint sub-sampling; computed once per
        // orbit of the signed-permutation group so the grid is exactly invariant
        let sub = 8usize;
        let h = 1.0 / m as f64;
        let d = self.d;
        let mut cache: HashMap<Vec<u64>, f64> = HashMap::new();
        let mut g = GridDensity::zeros(d, m);
        let reach = (eps / h).ceil() as u64 + 1;
        for flat in 0..g.cell_count() {
            let mut key: Vec<u64> = g.multi(flat).iter().map(|&j| signed_mode(j, m).unsigned_abs()).collect();
            if key.iter().any(|&k| k > reach) {
                continue;
            }
            key.sort_unstable();
            let v = *cache.entry(key.clone()).or_insert_with(|| {
                let mut idx = vec![0usize; d];
                let mut hits = 0usize;
                let mut total = 0usize;
                loop {
                    let r2: f64 = (0..d)
                        .map(|k| {
                            let x = (key[k] as f64 - 0.5 + (idx[k] as f64 + 0.5) / sub as f64) * h;
                            x * x
                        })
                        .sum();
                    if r2 <= eps * eps {
                        hits += 1;
                    }
                    total += 1;
                    let mut k = d;
                    let mut done = true;
                    while k > 0 {
                        k -= 1;
                        idx[k] += 1;
                        if idx[k] < sub {
                            done = false;
                            break;
                        }
                        idx[k] = 0;
                    }
                    if done {
                        break;
                    }
                }
                hits as f64 / total as f64
            });
            g.values_mut()[flat] = v;
        }
        let mean = g.mean();
        Ok(g.scale(1.0 / mean))
    }

    fn fourier(&self, k: &[i64]) -> Result<f64> {
        if self.d != 1 {
            if k.iter().all(|&x| x == 0) {
                return Ok(1.0);
            }
            return Err(Error::Unsupported("closed-form transform of the ball kernel is only provided for d = 1".into()));
        }
        Ok(sinc(2.0 * PI * k[0] as f64 * self.epsilon))
    }

    fn sample(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        loop {
            let x: Vec<f64> = (0..self.d).map(|_| rng.random_range(-1.0..1.0)).collect();
            if x.iter().map(|v| v * v).sum::<f64>() <= 1.0 {
                return x.into_iter().map(|v| v * self.epsilon).collect();
            }
        }
    }

    fn unscaled_density(&self, x: &[f64]) -> Option<f64> {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        Some(if r2 <= 1.0 { 1.0 / self.unit_volume() } else { 0.0 })
    }

    fn unscaled_fourier(&self, xi: &[f64]) -> Option<f64> {
        (self.d == 1).then(|| sinc(2.0 * PI * xi[0]))
    }

    fn support_radius(&self) -> Option<f64> {
        Some(self.epsilon)
    }

    fn axis_abs_moments(&self) -> Option<Vec<f64>> {
        (self.d == 1).then(|| vec![0.5])
    }

    fn tensor_moments(&self) -> Option<(f64, f64)> {
        (self.d == 1).then_some((0.5, 1.0 / 16.0))
    }

    fn signed_permutation_invariant(&self) -> bool {
        true
    }

    fn spec(&self) -> KernelSpec {
        KernelSpec::new(KernelKind::Ball, self.epsilon)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn coarse_grid_on_centred_cells() {
        let g = BallUniform::new(1, 0.25).unwrap().grid(8).unwrap();
        assert_eq!(g.values(), &[2.0, 2.0, 1.0, 0.0, 0.0, 0.0, 1.0, 2.0]);
    }

    #[test]
    fn resolution_error() {
        assert!(matches!(BallUniform::new(1, 0.01).unwrap().grid(64), Err(Error::Resolution(_))));
    }

    #[test]
    fn samples_stay_in_support() {
        let k = BallUniform::new(2, 0.1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let y = k.sample(&mut rng);
            assert!(y.iter().map(|v| v * v).sum::<f64>().sqrt() <= 0.1);
        }
    }

    #[test]
    fn two_d_grid_is_invariant() {
        let g = BallUniform::new(2, 0.1).unwrap().grid(32).unwrap();
        assert!((g.mean() - 1.0).abs() < 1e-14);
        for i in 0..32 {
            for j in 0..32 {
                let v = g.values()[i * 32 + j];
                assert_eq!(v, g.values()[j * 32 + i]);
                assert_eq!(v, g.values()[((32 - i) % 32) * 32 + j]);
            }
        }
    }

    #[test]
    fn fourier_closed_form() {
        let k = BallUniform::new(1, 0.1).unwrap();
        let x = 2.0 * PI * 3.0 * 0.1;
        assert!((k.fourier(&[3]).unwrap() - x.sin() / x).abs() < 1e-15);
        assert!(BallUniform::new(2, 0.1).unwrap().fourier(&[1, 0]).is_err());
    }
}
