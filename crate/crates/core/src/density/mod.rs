//! Densities on the torus and the operators `U*`, `K_ε ∗`, `T* = K_ε ∗ U*` and `T`.

mod convolve;
mod fft;
mod grid;
mod transfer;

pub use convolve::{convolve_noise, NoiseOperator};
pub use fft::{freq_split, mode_norm, signed_mode, GridFft};
pub use grid::{gauss_legendre, Distances, GridDensity};
pub use transfer::{is_aligned, TransferPlan};

use crate::error::{Error, Result};
use crate::exact::{Rational, Real};
use crate::kernels::Kernel;
use crate::maps::{BernoulliMap, Word};

/// The one-step operators of the chain on a fixed grid.
#[derive(Clone, Debug)]
pub struct Evolution {
    plan: TransferPlan,
    noise: NoiseOperator,
}

impl Evolution {
    pub fn new(map: &BernoulliMap, kernel: &dyn Kernel, m: usize) -> Result<Self> {
        if kernel.dim() != map.dim() {
            return Err(Error::Domain(format!("kernel dimension {} differs from map dimension {}", kernel.dim(), map.dim())));
        }
        Ok(Self { plan: TransferPlan::new(map, m)?, noise: NoiseOperator::from_kernel(kernel, m)? })
    }

    pub fn from_parts(plan: TransferPlan, noise: NoiseOperator) -> Result<Self> {
        if plan.size() != noise.size() || plan.dim() != noise.dim() {
            return Err(Error::SizeMismatch(plan.size(), noise.size()));
        }
        Ok(Self { plan, noise })
    }

    pub fn size(&self) -> usize {
        self.plan.size()
    }

    pub fn dim(&self) -> usize {
        self.plan.dim()
    }

    pub fn plan(&self) -> &TransferPlan {
        &self.plan
    }

    pub fn noise(&self) -> &NoiseOperator {
        &self.noise
    }

    /// `U* f`.
    pub fn push(&self, f: &GridDensity) -> Result<GridDensity> {
        self.plan.push(f)
    }

    /// `T* f = K_ε ∗ U* f`.
    pub fn step_t_star(&self, f: &GridDensity) -> Result<GridDensity> {
        self.noise.apply(&self.plan.push(f)?)
    }

    /// `T g = (K_ε ∗ g)∘φ`.
    pub fn step_t(&self, g: &GridDensity) -> Result<GridDensity> {
        self.plan.pull(&self.noise.apply(g)?)
    }

    pub fn t_star_power(&self, f: &GridDensity, n: usize) -> Result<GridDensity> {
        let mut out = f.clone();
        for _ in 0..n {
            out = self.step_t_star(&out)?;
        }
        Ok(out)
    }

    pub fn t_power(&self, g: &GridDensity, n: usize) -> Result<GridDensity> {
        let mut out = g.clone();
        for _ in 0..n {
            out = self.step_t(&out)?;
        }
        Ok(out)
    }
}

/// `U* f` on the grid of `f`.
pub fn pushforward_u(map: &BernoulliMap, f: &GridDensity) -> Result<GridDensity> {
    TransferPlan::new(map, f.size())?.push(f)
}

/// `T* f` for a one-off step. Build an [`Evolution`] for repeated use.
pub fn step_t_star(map: &BernoulliMap, kernel: &dyn Kernel, f: &GridDensity) -> Result<GridDensity> {
    Evolution::new(map, kernel, f.size())?.step_t_star(f)
}

pub fn step_t(map: &BernoulliMap, kernel: &dyn Kernel, g: &GridDensity) -> Result<GridDensity> {
    Evolution::new(map, kernel, g.size())?.step_t(g)
}

/// Cell averages of `U* f` for a function `f` given pointwise, by Gauss–Legendre
/// quadrature with `q` nodes per axis and cell.
pub fn pushforward_fn(map: &BernoulliMap, m: usize, q: usize, f: impl Fn(&[f64]) -> f64 + Sync) -> GridDensity {
    let weights = map.weights();
    GridDensity::from_fn(map.dim(), m, q, |y| {
        map.branches()
            .iter()
            .zip(&weights)
            .map(|(b, p)| p * f(&b.inverse(y)))
            .sum()
    })
}

/// Grid index range `[lo, hi)` covered by a cylinder along each axis, if aligned.
pub fn cylinder_cells(map: &BernoulliMap, s: &Word, m: usize) -> Result<Vec<(usize, usize)>> {
    let cyl = map.cylinder(s)?;
    let mr = Real::int(m as i64);
    let mut ranges = Vec::with_capacity(map.dim());
    for k in 0..map.dim() {
        let lo = cyl.cell.lower(k) * mr;
        let hi = cyl.cell.upper(k) * mr;
        let as_index = |v: Real| -> Option<usize> {
            if v.is_exact() {
                (v.denominator() == Some(1)).then(|| v.floor() as usize)
            } else {
                let r = v.value().round();
                ((v.value() - r).abs() < 1e-9).then_some(r as usize)
            }
        };
        match (as_index(lo), as_index(hi)) {
            (Some(a), Some(b)) if b > a => ranges.push((a, b)),
            _ => return Err(Error::Alignment { m, what: format!("cylinder {s}") }),
        }
    }
    Ok(ranges)
}

/// Normalized indicator `I_s = 1_{C_s} / π(C_s)` on an aligned grid.
pub fn indicator_density(map: &BernoulliMap, s: &Word, m: usize) -> Result<GridDensity> {
    let ranges = cylinder_cells(map, s, m)?;
    let d = map.dim();
    let count: usize = ranges.iter().map(|(a, b)| b - a).product();
    let value = m.pow(d as u32) as f64 / count as f64;
    let mut g = GridDensity::zeros(d, m);
    for flat in 0..g.cell_count() {
        let multi = g.multi(flat);
        if multi.iter().zip(&ranges).all(|(&i, &(a, b))| i >= a && i < b) {
            g.values_mut()[flat] = value;
        }
    }
    Ok(g)
}

/// Exact rational version of [`indicator_density`].
pub fn indicator_exact(map: &BernoulliMap, s: &Word, m: usize) -> Result<Vec<Rational>> {
    let ranges = cylinder_cells(map, s, m)?;
    let d = map.dim();
    let count: usize = ranges.iter().map(|(a, b)| b - a).product();
    let value = Rational::new(m.pow(d as u32) as i128, count as i128);
    let g = GridDensity::zeros(d, m);
    Ok((0..g.cell_count())
        .map(|flat| {
            let multi = g.multi(flat);
            if multi.iter().zip(&ranges).all(|(&i, &(a, b))| i >= a && i < b) {
                value
            } else {
                Rational::from_integer(0)
            }
        })
        .collect())
}

/// `tv = ‖f − 1‖₁ / 2`, `l2 = ‖f − 1‖₂`.
pub fn distances(f: &GridDensity) -> Distances {
    f.distances()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{kernel_from_name, KernelKind};
    use crate::maps::map_preset;

    #[test]
    fn indicator_examples() {
        let map = map_preset("doubling").unwrap();
        let one = indicator_density(&map, &Word::empty(), 8).unwrap();
        assert!(one.values().iter().all(|&v| v == 1.0));
        let f = indicator_density(&map, &Word::new(vec![0, 0]), 8).unwrap();
        assert_eq!(f.values(), &[4.0, 4.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let intro = map_preset("intro3").unwrap();
        assert!(matches!(indicator_density(&intro, &Word::new(vec![0]), 8), Err(Error::Alignment { .. })));
    }

    #[test]
    fn indicator_reaches_uniform_after_len_steps() {
        let map = map_preset("intro3").unwrap();
        let s = Word::new(vec![1, 0, 1]);
        let plan = TransferPlan::new(&map, 27).unwrap();
        let mut f = indicator_density(&map, &s, 27).unwrap();
        for _ in 0..3 {
            f = plan.push(&f).unwrap();
        }
        for v in f.values() {
            assert!((v - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn stationarity_and_duality() {
        let map = map_preset("intro3").unwrap();
        let kernel = kernel_from_name(KernelKind::Gaussian, 1, 0.05).unwrap();
        let ev = Evolution::new(&map, kernel.as_ref(), 81).unwrap();
        let one = GridDensity::uniform(1, 81);
        for v in ev.step_t_star(&one).unwrap().values().iter().chain(ev.step_t(&one).unwrap().values()) {
            assert!((v - 1.0).abs() < 1e-13);
        }
        let f = GridDensity::from_fn(1, 81, 2, |x| (9.0 * x[0]).sin());
        let g = GridDensity::from_fn(1, 81, 2, |x| x[0].powi(3));
        let lhs = ev.step_t(&f).unwrap().inner(&g);
        let rhs = f.inner(&ev.step_t_star(&g).unwrap());
        assert!((lhs - rhs).abs() < 1e-13);
    }

    #[test]
    fn function_pushforward_of_constant() {
        let map = map_preset("intro3").unwrap();
        let g = pushforward_fn(&map, 10, 3, |_| 1.0);
        for v in g.values() {
            assert!((v - 1.0).abs() < 1e-14);
        }
    }
}
