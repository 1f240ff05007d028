//! Bump families `F_0`, `F_s` and numerical certificates for the bounds they satisfy
//! under the noise.

use std::f64::consts::{LN_2, PI};

use serde::Serialize;

use crate::density::{Evolution, GridDensity, NoiseOperator};
use crate::error::{Error, Result};
use crate::kernels::{Kernel, KernelKind};
use crate::maps::{BernoulliMap, CylinderSet, Word};

/// Cells with `F < BUMP_FLOOR · max F` are left out of ratio tests.
pub const BUMP_FLOOR: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BumpKind {
    /// `Π (π/2) sin(π x_i)`.
    SineProduct,
    /// `Π 4 min(x_i, 1 − x_i)`.
    TentProduct,
}

impl BumpKind {
    /// One-dimensional factor at `x ∈ [0, 1]`.
    pub fn factor(&self, x: f64) -> f64 {
        if !(0.0..=1.0).contains(&x) {
            return 0.0;
        }
        match self {
            BumpKind::SineProduct => 0.5 * PI * (PI * x).sin(),
            BumpKind::TentProduct => 4.0 * x.min(1.0 - x),
        }
    }

    /// Antiderivative of the factor, zero at 0 and one at 1.
    fn primitive(&self, x: f64) -> f64 {
        let x = x.clamp(0.0, 1.0);
        match self {
            BumpKind::SineProduct => 0.5 * (1.0 - (PI * x).cos()),
            BumpKind::TentProduct => {
                if x <= 0.5 {
                    2.0 * x * x
                } else {
                    1.0 - 2.0 * (1.0 - x) * (1.0 - x)
                }
            }
        }
    }

    /// Mean of the factor over `[a, b]`.
    fn factor_average(&self, a: f64, b: f64) -> f64 {
        if b - a <= 0.0 {
            return self.factor(a);
        }
        (self.primitive(b) - self.primitive(a)) / (b - a)
    }

    /// `F_0(x)` on `[0,1]^d`, zero outside.
    pub fn value(&self, x: &[f64]) -> f64 {
        x.iter().map(|&v| self.factor(v)).product()
    }

    pub fn peak(&self, d: usize) -> f64 {
        self.factor(0.5).powi(d as i32)
    }

    /// Sine products go with isotropic Gaussians; everything else uses tents.
    pub fn for_kernel(kernel: &dyn Kernel) -> Self {
        if kernel.kind() == KernelKind::Gaussian && kernel.signed_permutation_invariant() {
            BumpKind::SineProduct
        } else {
            BumpKind::TentProduct
        }
    }
}

/// `F_s = 1_{C_s} F_0 ∘ φ^{|s|} / π(C_s)` for one word.
#[derive(Clone, Debug)]
pub struct Bump {
    kind: BumpKind,
    cylinder: CylinderSet,
    chain: Vec<crate::maps::AffineBranch>,
    volume: f64,
}

impl Bump {
    pub fn new(map: &BernoulliMap, s: &Word, kind: BumpKind) -> Result<Self> {
        let cylinder = map.cylinder(s)?;
        let chain = s.indices().iter().map(|&i| map.branches()[i].clone()).collect();
        let volume = cylinder.volume().value();
        Ok(Self { kind, cylinder, chain, volume })
    }

    pub fn cylinder(&self) -> &CylinderSet {
        &self.cylinder
    }

    fn to_unit(&self, x: &[f64]) -> Vec<f64> {
        self.chain.iter().fold(x.to_vec(), |y, b| b.forward(&y))
    }

    /// Point value on the torus (`x ∈ [0,1)^d`).
    pub fn value(&self, x: &[f64]) -> f64 {
        if !self.cylinder.contains(x) {
            return 0.0;
        }
        self.kind.value(&self.to_unit(x)) / self.volume
    }

    /// Exact mean over the box `[lo, hi]`.
    pub fn box_average(&self, lo: &[f64], hi: &[f64]) -> f64 {
        let d = lo.len();
        let cell = &self.cylinder.cell;
        let mut a = vec![0.0; d];
        let mut b = vec![0.0; d];
        let mut frac = 1.0;
        for k in 0..d {
            a[k] = lo[k].max(cell.lower(k).value());
            b[k] = hi[k].min(cell.upper(k).value());
            if b[k] <= a[k] {
                return 0.0;
            }
            frac *= (b[k] - a[k]) / (hi[k] - lo[k]);
        }
        let ya = self.to_unit(&a);
        let yb = self.to_unit(&b);
        let mean: f64 = (0..d).map(|k| self.kind.factor_average(ya[k].min(yb[k]), ya[k].max(yb[k]))).product();
        frac * mean / self.volume
    }

    /// Cell averages on the `m^d` grid.
    pub fn grid(&self, m: usize) -> Result<GridDensity> {
        let side = self.cylinder.side();
        if side * (m as f64) < 8.0 - 1e-9 {
            return Err(Error::Resolution(format!(
                "cylinder {} of side {side} spans fewer than 8 cells of 1/{m}",
                self.cylinder.word
            )));
        }
        let d = self.cylinder.cell.dim();
        let h = 1.0 / m as f64;
        let mut g = GridDensity::zeros(d, m);
        for flat in 0..g.cell_count() {
            let lo = g.cell_origin(flat);
            let hi: Vec<f64> = lo.iter().map(|v| v + h).collect();
            g.values_mut()[flat] = self.box_average(&lo, &hi);
        }
        Ok(g)
    }
}

/// Unit-mass profile `F_0` on the grid.
pub fn build_f0(kind: BumpKind, d: usize, m: usize) -> Result<GridDensity> {
    if m < 16 {
        return Err(Error::Resolution(format!("bump grids need m >= 16, got {m}")));
    }
    let unit = crate::maps::uniform_expanding(2, d)?;
    Bump::new(&unit, &Word::empty(), kind)?.grid(m)
}

pub fn build_fs(map: &BernoulliMap, s: &Word, kind: BumpKind, m: usize) -> Result<GridDensity> {
    Bump::new(map, s, kind)?.grid(m)
}

/// `(a, γ)` with `Ǩ_ε ∗ F_0 ≥ (1 − a ε^γ) F_0`.
pub fn eigen_constants(kernel: &dyn Kernel, kind: BumpKind) -> Result<(f64, f64)> {
    let d = kernel.dim() as f64;
    match kind {
        BumpKind::SineProduct => {
            if kernel.kind() != KernelKind::Gaussian || !kernel.signed_permutation_invariant() {
                return Err(Error::Unsupported("the sine product needs an isotropic Gaussian kernel".into()));
            }
            // isotropic covariance c·I: the per-axis damping of sin(πx) is exp(-π² c ε² / 2)
            let c = kernel.axis_abs_moments().map(|m| (m[0] / (2.0 / PI).sqrt()).powi(2)).unwrap_or(1.0);
            Ok((PI * PI * d * c / 2.0, 2.0))
        }
        BumpKind::TentProduct => {
            let moments = kernel
                .axis_abs_moments()
                .ok_or_else(|| Error::Unsupported(format!("{} kernel is not a product of one-dimensional factors", kernel.kind().as_str())))?;
            if moments.len() > 1 && kernel.kind() == KernelKind::Ball {
                return Err(Error::Unsupported("ball kernels are not products for d > 1".into()));
            }
            Ok((4.0 * moments.iter().sum::<f64>(), 1.0))
        }
    }
}

/// `β = exp(−2 ln 2 / (2a (1 − p_max^{γ/d})))`.
pub fn beta_closed_form(a: f64, gamma: f64, p_max: f64, d: usize) -> f64 {
    (-2.0 * LN_2 / (2.0 * a * (1.0 - p_max.powf(gamma / d as f64)))).exp()
}

#[derive(Clone, Debug, Serialize)]
pub struct RatioSample {
    pub epsilon: f64,
    pub bound: f64,
    pub worst_ratio: f64,
    pub worst_cell: usize,
    pub margin: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct EigenCertificate {
    pub kernel: KernelKind,
    pub profile: BumpKind,
    pub d: usize,
    pub m: usize,
    pub a: f64,
    pub gamma: f64,
    pub eta: f64,
    pub tolerance: f64,
    pub samples: Vec<RatioSample>,
}

impl EigenCertificate {
    pub fn pass(&self) -> bool {
        self.samples.iter().all(|s| s.pass)
    }

    pub fn beta(&self, p_max: f64) -> f64 {
        beta_closed_form(self.a, self.gamma, p_max, self.d)
    }
}

/// Smallest `(K ∗ f)/f` over cells where `f ≥ BUMP_FLOOR · max f`.
pub fn min_ratio(num: &GridDensity, den: &GridDensity) -> (f64, usize) {
    let floor = BUMP_FLOOR * den.max();
    num.values()
        .iter()
        .zip(den.values())
        .enumerate()
        .filter(|(_, (_, &f))| f >= floor && f > 0.0)
        .map(|(i, (&k, &f))| (k / f, i))
        .fold((f64::INFINITY, 0), |acc, x| if x.0 < acc.0 { x } else { acc })
}

/// Measured `min (K_ε ∗ F_0)/F_0` against `1 − a ε^γ − tol` for each kernel in the list.
/// All kernels must share kind and dimension.
pub fn measure_eigen_ratios(kernels: &[Box<dyn Kernel>], kind: BumpKind, m: usize, tolerance: f64) -> Result<EigenCertificate> {
    let first = kernels.first().ok_or_else(|| Error::InsufficientData("no kernels given".into()))?;
    let d = first.dim();
    let (a, gamma) = eigen_constants(first.as_ref(), kind)?;
    let f0 = build_f0(kind, d, m)?;
    let mut samples = Vec::new();
    for kernel in kernels {
        let eps = kernel.epsilon();
        let bound = 1.0 - a * eps.powf(gamma);
        if bound <= 0.0 {
            return Err(Error::Domain(format!("1 - a ε^γ = {bound} is not positive at ε = {eps}")));
        }
        let smoothed = NoiseOperator::from_kernel(kernel.as_ref(), m)?.apply(&f0)?;
        let (worst_ratio, worst_cell) = min_ratio(&smoothed, &f0);
        let margin = worst_ratio - bound;
        samples.push(RatioSample { epsilon: eps, bound, worst_ratio, worst_cell, margin, pass: margin >= -tolerance });
    }
    Ok(EigenCertificate {
        kernel: first.kind(),
        profile: kind,
        d,
        m,
        a,
        gamma,
        eta: (2.0 * a).powf(1.0 / gamma),
        tolerance,
        samples,
    })
}

/// As [`measure_eigen_ratios`], failing on the first violated scale.
pub fn verify_eigen_inequality(kernels: &[Box<dyn Kernel>], kind: BumpKind, m: usize, tolerance: f64) -> Result<EigenCertificate> {
    let cert = measure_eigen_ratios(kernels, kind, m, tolerance)?;
    if let Some(s) = cert.samples.iter().find(|s| !s.pass) {
        return Err(Error::CertificateFailure { eps: s.epsilon, cell: s.worst_cell, ratio: s.worst_ratio, bound: s.bound });
    }
    Ok(cert)
}

/// `min (K_ε ∗ F_s)/F_s` on the support of `F_s`, with its bound `1 − a (λ_s ε)^γ`.
pub fn fs_ratio(map: &BernoulliMap, kernel: &dyn Kernel, s: &Word, kind: BumpKind, m: usize) -> Result<(f64, f64)> {
    let (a, gamma) = eigen_constants(kernel, kind)?;
    let bump = Bump::new(map, s, kind)?;
    let fs = bump.grid(m)?;
    let smoothed = NoiseOperator::from_kernel(kernel, m)?.apply(&fs)?;
    let bound = 1.0 - a * (bump.cylinder().lambda() * kernel.epsilon()).powf(gamma);
    Ok((min_ratio(&smoothed, &fs).0, bound))
}

/// Left and right sides of `ε^γ Σ_{k=1}^{n} λ_{σ^k s}^γ ≤ (ε λ_{σs})^γ / (1 − p_max^{γ/d})`
/// for every `n ≤ |s|`.
pub fn geometric_sum(map: &BernoulliMap, s: &Word, epsilon: f64, gamma: f64) -> Result<Vec<(f64, f64)>> {
    let d = map.dim() as f64;
    let lam1 = map.cylinder(&s.shift())?.lambda();
    let rhs = (epsilon * lam1).powf(gamma) / (1.0 - map.p_max().powf(gamma / d));
    let mut acc = 0.0;
    let mut out = Vec::with_capacity(s.len());
    for k in 1..=s.len() {
        acc += (epsilon * map.cylinder(&s.shift_by(k))?.lambda()).powf(gamma);
        out.push((acc, rhs));
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize)]
pub struct PersistenceStep {
    pub n: usize,
    /// `min T*^n F_s / F_{σ^n s}` on the support (for `n ≤ |s|`), or `min T*^n F_s` over the torus.
    pub measured: f64,
    pub bound: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct PersistenceReport {
    pub word: String,
    pub epsilon: f64,
    pub m: usize,
    pub a: f64,
    pub gamma: f64,
    pub eta: f64,
    pub beta: f64,
    /// Smallest value of `T*^{|s|+1} F_s`.
    pub beta_prime: f64,
    pub steps: Vec<PersistenceStep>,
    pub pass: bool,
}

/// Evolves `F_s` under `T*` for `n = 1..=|s|+2` and checks the lower envelopes.
pub fn measure_envelope_persistence(
    map: &BernoulliMap,
    kernel: &dyn Kernel,
    s: &Word,
    kind: BumpKind,
    m: usize,
    tolerance: f64,
) -> Result<PersistenceReport> {
    let (a, gamma) = eigen_constants(kernel, kind)?;
    let eps = kernel.epsilon();
    let eta = (2.0 * a).powf(1.0 / gamma);
    let bump = Bump::new(map, s, kind)?;
    if bump.cylinder().side() < eta * eps {
        return Err(Error::Domain(format!(
            "cylinder {s} has side {} below η ε = {}",
            bump.cylinder().side(),
            eta * eps
        )));
    }
    let beta = beta_closed_form(a, gamma, map.p_max(), map.dim());
    let evo = Evolution::new(map, kernel, m)?;
    let mut f = bump.grid(m)?;
    let mut steps = Vec::new();
    let mut beta_prime = f64::NAN;
    for n in 1..=s.len() + 2 {
        f = evo.step_t_star(&f)?;
        let step = if n <= s.len() {
            let target = build_fs(map, &s.shift_by(n), kind, m)?;
            let (ratio, _) = min_ratio(&f, &target);
            PersistenceStep { n, measured: ratio, bound: beta, pass: ratio >= beta - tolerance }
        } else if n == s.len() + 1 {
            beta_prime = f.min();
            PersistenceStep { n, measured: beta_prime, bound: 0.0, pass: beta_prime > 0.0 }
        } else {
            let low = f.min();
            PersistenceStep { n, measured: low, bound: beta_prime, pass: low >= beta_prime - tolerance }
        };
        steps.push(step);
    }
    let pass = steps.iter().all(|s| s.pass);
    Ok(PersistenceReport { word: s.to_string(), epsilon: eps, m, a, gamma, eta, beta, beta_prime, steps, pass })
}

pub fn verify_envelope_persistence(
    map: &BernoulliMap,
    kernel: &dyn Kernel,
    s: &Word,
    kind: BumpKind,
    m: usize,
    tolerance: f64,
) -> Result<PersistenceReport> {
    let report = measure_envelope_persistence(map, kernel, s, kind, m, tolerance)?;
    if let Some(step) = report.steps.iter().find(|st| !st.pass) {
        return Err(Error::PersistenceFailure {
            step: step.n,
            detail: format!("measured {} against bound {}", step.measured, step.bound),
        });
    }
    Ok(report)
}
