//! Exact Fourier evolution of `T g = (K_ε ∗ g)∘φ` for `φ(x) = N x` with the standard Gaussian.
//!
//! Mode `k` moves to `N k` and picks up `exp(−2π²ε²|k|²)`. Exponents are kept as the
//! integer `Σ_j N^{2j}|k₀|²` times `2π²ε²`, so nothing underflows.

use std::f64::consts::PI;
use std::fmt::Write as _;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Clone, Debug, Serialize)]
pub struct Mode {
    /// Current lattice index `N^n k₀`.
    pub k: Vec<i128>,
    pub origin: Vec<i64>,
    #[serde(skip)]
    pub coeff: Complex64,
    /// `Σ_{j<n} N^{2j} |k₀|²`.
    pub weight: u128,
    pub steps: usize,
    /// `k₀ → N k₀ → …`.
    pub chain: Vec<Vec<i128>>,
    pub beyond_cutoff: bool,
}

/// Sparse Fourier field with per-mode damping ledger.
#[derive(Clone, Debug, Serialize)]
pub struct SpectralField {
    pub base: u64,
    pub d: usize,
    pub epsilon: f64,
    /// Largest `|k_i|` tracked on the lattice; modes beyond it keep only their damping.
    pub cutoff: i128,
    pub modes: Vec<Mode>,
    pub overflowed: usize,
}

fn norm2(k: &[i64]) -> u128 {
    k.iter().map(|&x| (x as i128 * x as i128) as u128).sum()
}

impl SpectralField {
    pub fn new(base: u64, d: usize, epsilon: f64, cutoff: i128, coefficients: Vec<(Vec<i64>, Complex64)>) -> Result<Self> {
        if base < 2 {
            return Err(Error::Domain(format!("expansion factor must be at least 2, got {base}")));
        }
        if !(epsilon > 0.0) {
            return Err(Error::Domain(format!("ε must be positive, got {epsilon}")));
        }
        let mut modes = Vec::with_capacity(coefficients.len());
        for (k, c) in coefficients {
            if k.len() != d {
                return Err(Error::Domain(format!("mode {k:?} is not in Z^{d}")));
            }
            let start: Vec<i128> = k.iter().map(|&x| x as i128).collect();
            modes.push(Mode { k: start.clone(), origin: k, coeff: c, weight: 0, steps: 0, chain: vec![start], beyond_cutoff: false });
        }
        Ok(Self { base, d, epsilon, cutoff, modes, overflowed: 0 })
    }

    /// `2π²ε² Σ_j N^{2j}|k₀|²` for one mode.
    pub fn exponent(&self, mode: &Mode) -> f64 {
        2.0 * PI * PI * self.epsilon * self.epsilon * mode.weight as f64
    }

    pub fn value(&self, mode: &Mode) -> Complex64 {
        mode.coeff * (-self.exponent(mode)).exp()
    }

    /// `ln ‖g‖_{L²}` via log-sum-exp over modes.
    pub fn log_l2_norm(&self) -> f64 {
        let terms: Vec<f64> = self
            .modes
            .iter()
            .filter(|m| m.coeff.norm() > 0.0)
            .map(|m| 2.0 * (m.coeff.norm().ln() - self.exponent(m)))
            .collect();
        let top = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if top == f64::NEG_INFINITY {
            return top;
        }
        0.5 * (top + terms.iter().map(|t| (t - top).exp()).sum::<f64>().ln())
    }

    pub fn l2_norm(&self) -> f64 {
        self.log_l2_norm().exp()
    }

    /// Every nonzero mode index lies in `N^n Z^d`.
    pub fn support_divisible(&self, n: usize) -> bool {
        let Some(p) = (self.base as i128).checked_pow(n as u32) else { return false };
        self.modes.iter().all(|m| m.k.iter().all(|&x| x % p == 0))
    }
}

/// `n` steps of `(T g)^(N k) = K̂_ε(k) ĝ(k)`.
pub fn iterate_spectrum(field: &SpectralField, n: usize) -> Result<SpectralField> {
    let mut out = field.clone();
    let b = field.base as i128;
    for _ in 0..n {
        let mut overflow = 0usize;
        for mode in out.modes.iter_mut() {
            let k2 = mode
                .k
                .iter()
                .try_fold(0u128, |acc, &x| x.checked_mul(x).and_then(|v| acc.checked_add(v as u128)))
                .ok_or(Error::CutoffOverflow(1))?;
            mode.weight = mode.weight.checked_add(k2).ok_or(Error::CutoffOverflow(1))?;
            let next: Option<Vec<i128>> = mode.k.iter().map(|&x| x.checked_mul(b)).collect();
            mode.k = next.ok_or(Error::CutoffOverflow(1))?;
            mode.steps += 1;
            mode.chain.push(mode.k.clone());
            if !mode.beyond_cutoff && mode.k.iter().any(|x| x.abs() > out.cutoff) {
                mode.beyond_cutoff = true;
                overflow += 1;
            }
        }
        out.overflowed += overflow;
    }
    Ok(out)
}

/// `|k₀|²(N^{2n} − 1)/(N² − 1)`, the closed form of the accumulated weight.
pub fn geometric_weight(base: u64, k: &[i64], n: usize) -> u128 {
    let b2 = (base as u128) * (base as u128);
    norm2(k) * (b2.pow(n as u32) - 1) / (b2 - 1)
}

#[derive(Clone, Debug, Serialize)]
pub struct DecayRow {
    pub n: usize,
    /// `−ln ‖T^n‖` on mean-zero fields (sup over `k ≠ 0`, attained at `|k| = 1`).
    pub log_norm_exponent: f64,
    /// Same with the `(N − 1)` denominator.
    pub log_norm_exponent_alt: f64,
    /// `ln` of the TV bound `‖K_ε‖_{L²} ‖T^n‖` for the law after `n + 1` steps.
    pub tv_envelope_exponent: f64,
    /// `ln exp(−ε² N^{2n}/C)` with the extracted `C`.
    pub envelope_exponent: f64,
    pub envelope_ok: bool,
    /// `E_n ≥ N² E_{n−1}` (double-exponential signature).
    pub doubling_ok: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct DecayReport {
    pub base: u64,
    pub d: usize,
    pub epsilon: f64,
    pub delta: f64,
    /// `C = N²/(2π²)`, the smallest constant valid for all `n ≥ 1`.
    pub c_envelope: f64,
    pub rows: Vec<DecayRow>,
    pub t_dis: Option<usize>,
    /// Prediction with the `(N − 1)` denominator.
    pub t_dis_alt: Option<usize>,
    /// `|log_N ε| + ½ log_N |ln δ| + C` with explicit `C`.
    pub corollary_tdis: f64,
    pub corollary_ok: bool,
    pub pass: bool,
}

pub fn decay_check(base: u64, d: usize, epsilon: f64, delta: f64, horizon: usize) -> Result<DecayReport> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Domain(format!("δ must lie in (0,1), got {delta}")));
    }
    let mut unit = vec![0i64; d];
    unit[0] = 1;
    let mut field = SpectralField::new(base, d, epsilon, i128::MAX, vec![(unit, Complex64::new(1.0, 0.0))])?;
    let nf = base as f64;
    let scale = 2.0 * PI * PI * epsilon * epsilon;
    let c_envelope = nf * nf / (2.0 * PI * PI);
    let k_norm = crate::bounds::gaussian_l2_norm(d, epsilon);
    let target = -delta.ln();
    let mut rows = Vec::with_capacity(horizon);
    let mut prev = 0.0;
    for n in 1..=horizon {
        field = iterate_spectrum(&field, 1)?;
        let e = field.exponent(&field.modes[0]);
        let alt = scale * (nf.powi(2 * n as i32) - 1.0) / (nf - 1.0);
        let env = -epsilon * epsilon * nf.powi(2 * n as i32) / c_envelope;
        rows.push(DecayRow {
            n,
            log_norm_exponent: e,
            log_norm_exponent_alt: alt,
            tv_envelope_exponent: k_norm.ln() - e,
            envelope_exponent: env,
            envelope_ok: -e <= env * (1.0 - 1e-12),
            doubling_ok: e >= nf * nf * prev * (1.0 - 1e-12),
        });
        prev = e;
    }
    let t_dis = rows.iter().find(|r| r.log_norm_exponent >= target).map(|r| r.n);
    let t_dis_alt = rows.iter().find(|r| r.log_norm_exponent_alt >= target).map(|r| r.n);
    let c = 0.5 * ((nf * nf - 1.0) / (2.0 * PI * PI)).log(nf)
        + 1.0
        + 0.5 * (1.0 + 2.0 * PI * PI * epsilon * epsilon / ((nf * nf - 1.0) * target)).log(nf);
    let corollary_tdis = epsilon.log(nf).abs() + 0.5 * target.log(nf) + c;
    let corollary_ok = t_dis.is_some_and(|t| t as f64 <= corollary_tdis + 1e-12);
    let pass = corollary_ok && rows.iter().all(|r| r.envelope_ok && r.doubling_ok);
    Ok(DecayReport { base, d, epsilon, delta, c_envelope, rows, t_dis, t_dis_alt, corollary_tdis, corollary_ok, pass })
}

/// `n,log_norm_exponent,tv_envelope_exponent` rows.
pub fn decay_csv(report: &DecayReport) -> String {
    let mut s = String::from("n,log_norm_exponent,tv_envelope_exponent\n");
    for r in &report.rows {
        let _ = writeln!(s, "{},{:.17e},{:.17e}", r.n, r.log_norm_exponent, r.tv_envelope_exponent);
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_mode(eps: f64, k: i64) -> SpectralField {
        SpectralField::new(2, 1, eps, 1 << 20, vec![(vec![k], Complex64::new(1.0, 0.0))]).unwrap()
    }

    #[test]
    fn single_step_factor() {
        let f = iterate_spectrum(&one_mode(0.1, 1), 1).unwrap();
        assert!((f.value(&f.modes[0]).re - 0.820_868_717_4).abs() < 1e-9);
        assert_eq!(f.modes[0].k, vec![2]);
    }

    #[test]
    fn three_steps_geometric_sum() {
        let f = iterate_spectrum(&one_mode(0.01, 1), 3).unwrap();
        assert_eq!(f.modes[0].weight, 21);
        assert_eq!(f.modes[0].weight, geometric_weight(2, &[1], 3));
        let expect = (-2.0 * PI * PI * 1e-4 * 21.0f64).exp();
        assert!((f.value(&f.modes[0]).re - expect).abs() < 1e-15);
        assert!((expect - 0.9594).abs() < 1e-4);
        assert_eq!(f.modes[0].chain, vec![vec![1], vec![2], vec![4], vec![8]]);
    }

    #[test]
    fn mean_is_invariant() {
        let f = SpectralField::new(3, 2, 0.05, 100, vec![(vec![0, 0], Complex64::new(2.5, 0.0))]).unwrap();
        let g = iterate_spectrum(&f, 5).unwrap();
        assert_eq!(g.value(&g.modes[0]), Complex64::new(2.5, 0.0));
    }

    #[test]
    fn cutoff_overflow_is_counted() {
        let f = SpectralField::new(2, 1, 0.01, 16, vec![(vec![3], Complex64::new(1.0, 0.0))]).unwrap();
        let g = iterate_spectrum(&f, 3).unwrap();
        assert_eq!(g.overflowed, 1);
        assert!(g.modes[0].beyond_cutoff);
        assert_eq!(g.modes[0].weight, geometric_weight(2, &[3], 3));
    }

    #[test]
    fn doubling_dissipation_time() {
        let r = decay_check(2, 1, 2f64.powi(-8), 0.5, 20).unwrap();
        assert!(r.pass);
        assert!((r.t_dis.unwrap() as i64 - 8).abs() <= 2);
        assert!(r.t_dis_alt.unwrap() <= r.t_dis.unwrap());
        assert!(decay_csv(&r).starts_with("n,log_norm_exponent,tv_envelope_exponent\n1,"));
    }
}
