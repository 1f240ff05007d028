//! Periodized noise densities `K_ε`.
//!
//! Grids hold cell averages over cells centred at the grid nodes `j/m`, so the
//! discrete kernel is exactly symmetric (`K[j] = K[m-j]`) and convolution with
//! it is self-adjoint.

mod ball;
mod gaussian;
mod stats;
mod tabulated;
mod tensor;

pub use ball::BallUniform;
pub use gaussian::PeriodizedGaussian;
pub use stats::{kernel_stats, KernelStats};
pub(crate) use stats::lattice_tail;
pub use tabulated::GridTabulated;
pub use tensor::{TensorKernel, TensorProfile};

use std::fmt;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::density::GridDensity;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    Gaussian,
    Ball,
    TensorTent,
    TensorUniform,
    Tabulated,
}

impl KernelKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            KernelKind::Gaussian => "gaussian",
            KernelKind::Ball => "ball",
            KernelKind::TensorTent => "tensor_tent",
            KernelKind::TensorUniform => "tensor_uniform",
            KernelKind::Tabulated => "tabulated",
        }
    }
}

impl fmt::Display for KernelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A noise density at a fixed scale `ε`.
pub trait Kernel: Send + Sync + fmt::Debug {
    fn kind(&self) -> KernelKind;
    fn dim(&self) -> usize;
    fn epsilon(&self) -> f64;

    /// Cell averages of `K_ε` on the `m^d` grid (mean exactly 1 up to rounding).
    fn grid(&self, m: usize) -> Result<GridDensity>;

    /// `K̂_ε(k)` for `k ∈ Z^d`, when a closed form exists.
    fn fourier(&self, k: &[i64]) -> Result<f64>;

    /// One displacement `εζ` in `R^d` (not yet wrapped to the torus).
    fn sample(&self, rng: &mut dyn RngCore) -> Vec<f64>;

    /// One displacement reduced to `[-1/2, 1/2)^d`.
    fn sample_torus(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        self.sample(rng).into_iter().map(|y| y - y.round()).collect()
    }

    /// Unscaled density `Ǩ` at a point of `R^d`.
    fn unscaled_density(&self, _x: &[f64]) -> Option<f64> {
        None
    }

    /// Fourier transform of `Ǩ` at a real frequency.
    fn unscaled_fourier(&self, _xi: &[f64]) -> Option<f64> {
        None
    }

    /// Euclidean radius of `supp K_ε` when compact.
    fn support_radius(&self) -> Option<f64> {
        None
    }

    /// `∫|y| ǩ_i(y) dy` for each one-dimensional factor of a product kernel.
    fn axis_abs_moments(&self) -> Option<Vec<f64>> {
        None
    }

    /// `(A, A̲) = (∫|y| ǩ, ∫_0^{1/2} y ǩ)` for the common factor of a tensor kernel.
    fn tensor_moments(&self) -> Option<(f64, f64)> {
        None
    }

    /// Whether `Ǩ(Dx) = Ǩ(x)` for every signed permutation `D`.
    fn signed_permutation_invariant(&self) -> bool {
        false
    }

    fn spec(&self) -> KernelSpec;
}

/// JSON kernel description:
/// `{"kind": "gaussian", "epsilon": 0.01, "covariance": [[1,0],[0,1]]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub kind: KernelKind,
    pub epsilon: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub covariance: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
}

impl KernelSpec {
    pub fn new(kind: KernelKind, epsilon: f64) -> Self {
        Self { kind, epsilon, covariance: None, values: None }
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Self {
        Self { epsilon, ..self.clone() }
    }

    pub fn build(&self, d: usize) -> Result<Box<dyn Kernel>> {
        let factory = kernel_registry()
            .into_iter()
            .find(|f| f.kind() == self.kind)
            .ok_or_else(|| Error::Unsupported(format!("no kernel registered for {}", self.kind)))?;
        factory.build(self, d)
    }
}

/// Builds kernels of one kind from a spec.
pub trait KernelFactory: Send + Sync {
    fn kind(&self) -> KernelKind;
    fn build(&self, spec: &KernelSpec, d: usize) -> Result<Box<dyn Kernel>>;
}

struct GaussianFactory;
struct BallFactory;
struct TentFactory;
struct UniformFactory;
struct TabulatedFactory;

impl KernelFactory for GaussianFactory {
    fn kind(&self) -> KernelKind {
        KernelKind::Gaussian
    }
    fn build(&self, spec: &KernelSpec, d: usize) -> Result<Box<dyn Kernel>> {
        let g = match &spec.covariance {
            Some(c) => PeriodizedGaussian::with_covariance(spec.epsilon, c.clone())?,
            None => PeriodizedGaussian::standard(d, spec.epsilon)?,
        };
        if g.dim() != d {
            return Err(Error::Domain(format!("covariance is {}x{} but the map has d={d}", g.dim(), g.dim())));
        }
        Ok(Box::new(g))
    }
}

impl KernelFactory for BallFactory {
    fn kind(&self) -> KernelKind {
        KernelKind::Ball
    }
    fn build(&self, spec: &KernelSpec, d: usize) -> Result<Box<dyn Kernel>> {
        Ok(Box::new(BallUniform::new(d, spec.epsilon)?))
    }
}

impl KernelFactory for TentFactory {
    fn kind(&self) -> KernelKind {
        KernelKind::TensorTent
    }
    fn build(&self, spec: &KernelSpec, d: usize) -> Result<Box<dyn Kernel>> {
        Ok(Box::new(TensorKernel::new(TensorProfile::Tent, d, spec.epsilon)?))
    }
}

impl KernelFactory for UniformFactory {
    fn kind(&self) -> KernelKind {
        KernelKind::TensorUniform
    }
    fn build(&self, spec: &KernelSpec, d: usize) -> Result<Box<dyn Kernel>> {
        Ok(Box::new(TensorKernel::new(TensorProfile::Uniform, d, spec.epsilon)?))
    }
}

impl KernelFactory for TabulatedFactory {
    fn kind(&self) -> KernelKind {
        KernelKind::Tabulated
    }
    fn build(&self, spec: &KernelSpec, d: usize) -> Result<Box<dyn Kernel>> {
        let values = spec.values.clone().ok_or_else(|| Error::Parse("tabulated kernel needs \"values\"".into()))?;
        let m = (values.len() as f64).powf(1.0 / d as f64).round() as usize;
        Ok(Box::new(GridTabulated::new(GridDensity::new(d, m, values)?, spec.epsilon)?))
    }
}

pub fn kernel_registry() -> Vec<Box<dyn KernelFactory>> {
    vec![
        Box::new(GaussianFactory),
        Box::new(BallFactory),
        Box::new(TentFactory),
        Box::new(UniformFactory),
        Box::new(TabulatedFactory),
    ]
}

/// Shorthand for the default member of each family.
pub fn kernel_from_name(kind: KernelKind, d: usize, epsilon: f64) -> Result<Box<dyn Kernel>> {
    KernelSpec::new(kind, epsilon).build(d)
}

pub(crate) fn check_epsilon(epsilon: f64) -> Result<()> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::Domain(format!("epsilon must be positive, got {epsilon}")));
    }
    Ok(())
}

pub(crate) fn check_grid(m: usize) -> Result<()> {
    if m < 4 {
        return Err(Error::Domain(format!("kernel grids need m >= 4, got {m}")));
    }
    Ok(())
}

/// Mass of a periodized one-dimensional law on every centred cell
/// `[j/m - h/2, j/m + h/2)`, returned as densities with mean exactly
/// re-normalized to 1. Only `j ≤ m/2` is computed; the rest is mirrored so the
/// vector is symmetric bit for bit.
pub(crate) fn centred_cells_1d(m: usize, images: i64, interval_mass: impl Fn(f64, f64) -> f64) -> Vec<f64> {
    let h = 1.0 / m as f64;
    let mut v = vec![0.0; m];
    for j in 0..=m / 2 {
        let a = (j as f64 - 0.5) * h;
        let b = (j as f64 + 0.5) * h;
        let mut mass = 0.0;
        for n in -images..=images {
            mass += interval_mass(a + n as f64, b + n as f64);
        }
        v[j] = mass * m as f64;
    }
    for j in m / 2 + 1..m {
        v[j] = v[m - j];
    }
    let total: f64 = v.iter().sum();
    let scale = m as f64 / total;
    v.iter_mut().for_each(|x| *x *= scale);
    v
}

/// Tensor product of per-axis density vectors into a grid.
pub(crate) fn outer_product(factors: &[Vec<f64>]) -> Result<GridDensity> {
    let d = factors.len();
    let m = factors[0].len();
    let mut values = vec![1.0; m.pow(d as u32)];
    let mut multi = vec![0; d];
    for (flat, v) in values.iter_mut().enumerate() {
        let mut rem = flat;
        for k in (0..d).rev() {
            multi[k] = rem % m;
            rem /= m;
        }
        *v = (0..d).map(|k| factors[k][multi[k]]).product();
    }
    GridDensity::new(d, m, values)
}

/// `sin(x)/x` with the removable singularity filled in.
pub(crate) fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-8 { 1.0 - x * x / 6.0 } else { x.sin() / x }
}
