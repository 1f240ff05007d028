//! The grid backend against the exact spectral iteration for `x ↦ 2x`.
//!
//! On an `m`-cell grid the cell-averaged pullback sends mode `k` to `2k` with the factor
//! `e^{iπk/m} cos(πk/m)`, and the cell-averaged Gaussian has DFT coefficients
//! `Σ_n K̂(k + nm) sinc(π(k + nm)/m)`. With those two factors the grid coefficients match
//! the spectral ones.

use std::f64::consts::PI;

use bernoulli_mix::density::{Evolution, GridDensity, GridFft, NoiseOperator};
use bernoulli_mix::kernels::{Kernel, PeriodizedGaussian};
use bernoulli_mix::maps::map_preset;
use bernoulli_mix::metrics::{measure_tdis, DisOptions};
use bernoulli_mix::spectral::{decay_check, iterate_spectrum, SpectralField};
use num_complex::Complex64;

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        x.sin() / x
    }
}

fn aliased_multiplier(kernel: &dyn Kernel, k: i64, m: i64) -> f64 {
    (-20..=20)
        .map(|n| {
            let q = k + n * m;
            kernel.fourier(&[q]).unwrap() * sinc(PI * q as f64 / m as f64)
        })
        .sum()
}

#[test]
fn noise_multiplier_is_aliased_sinc_sum() {
    let m = 256usize;
    for eps in [2f64.powi(-4), 2f64.powi(-6)] {
        let g = PeriodizedGaussian::standard(1, eps).unwrap();
        let op = NoiseOperator::from_kernel(&g, m).unwrap();
        for k in [0i64, 1, 5, 17, 64, 127, -3, -100] {
            let flat = k.rem_euclid(m as i64) as usize;
            let expect = aliased_multiplier(&g, k, m as i64);
            assert!((op.multiplier()[flat] - expect).abs() < 1e-12, "ε={eps} k={k}");
        }
    }
}

#[test]
fn grid_coefficients_follow_the_spectral_chain() {
    let m = 4096usize;
    let map = map_preset("doubling").unwrap();
    for (eps, k0) in [(2f64.powi(-6), 1i64), (2f64.powi(-8), 3), (2f64.powi(-10), 1)] {
        let g = PeriodizedGaussian::standard(1, eps).unwrap();
        let evo = Evolution::new(&map, &g, m).unwrap();
        let fft = GridFft::new(1, m);
        let values = (0..m).map(|i| (2.0 * PI * (k0 * i as i64) as f64 / m as f64).cos()).collect();
        let mut field = GridDensity::new(1, m, values).unwrap();
        let spectral = SpectralField::new(2, 1, eps, m as i128 / 2, vec![(vec![k0], Complex64::new(0.5, 0.0))]).unwrap();
        let mut factor = Complex64::new(1.0, 0.0);
        let mut k = k0;
        for n in 1..=8 {
            if 2 * k >= m as i64 / 2 {
                break;
            }
            let mu = evo.noise().multiplier()[k as usize];
            let theta = PI * k as f64 / m as f64;
            factor *= mu / g.fourier(&[k]).unwrap() * Complex64::from_polar(theta.cos(), theta);
            k *= 2;
            field = evo.step_t(&field).unwrap();
            let coeffs = fft.coefficients(&field);
            let it = iterate_spectrum(&spectral, n).unwrap();
            assert_eq!(it.modes[0].k, vec![k as i128]);
            let expect = it.value(&it.modes[0]) * factor;
            let got = coeffs[k as usize];
            assert!((got - expect).norm() < 1e-8, "ε={eps} n={n}: {got} vs {expect}");
            // the rest of the spectrum is the conjugate partner
            let partner = coeffs[m - k as usize];
            let rest: f64 = coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>() - got.norm_sqr() - partner.norm_sqr();
            assert!(rest.max(0.0).sqrt() < 1e-8, "ε={eps} n={n}: leakage {rest}");
        }
    }
}

#[test]
fn spectral_and_grid_dissipation_times_agree() {
    let map = map_preset("doubling").unwrap();
    for k in [6, 8, 10] {
        let eps = 2f64.powi(-k);
        let g = PeriodizedGaussian::standard(1, eps).unwrap();
        let grid = measure_tdis(&map, &g, 0.5, 1 << 12, &DisOptions::default()).unwrap().measurement.t;
        let spec = decay_check(2, 1, eps, 0.5, 24).unwrap();
        assert_eq!(spec.t_dis, Some(grid), "ε = 2^-{k}");
        assert!(spec.pass);
    }
}
