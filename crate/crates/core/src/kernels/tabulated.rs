use rand::{Rng, RngCore};

use super::{Kernel, KernelKind, KernelSpec};
use crate::density::{signed_mode, GridDensity};
use crate::error::{Error, Result};

/// A kernel given directly by its grid values (cells centred at the nodes).
#[derive(Clone, Debug)]
pub struct GridTabulated {
    grid: GridDensity,
    epsilon: f64,
    cumulative: Vec<f64>,
    invariant: bool,
}

impl GridTabulated {
    pub fn new(grid: GridDensity, epsilon: f64) -> Result<Self> {
        if grid.values().iter().any(|v| *v < 0.0 || !v.is_finite()) {
            return Err(Error::Domain("tabulated kernel values must be finite and non-negative".into()));
        }
        let mean = grid.mean();
        if !(mean > 0.0) {
            return Err(Error::Domain("tabulated kernel has no mass".into()));
        }
        let grid = if (mean - 1.0).abs() > 1e-12 { grid.scale(1.0 / mean) } else { grid };
        let mut acc = 0.0;
        let cumulative = grid
            .values()
            .iter()
            .map(|v| {
                acc += v;
                acc
            })
            .collect();
        let invariant = is_invariant(&grid);
        Ok(Self { grid, epsilon, cumulative, invariant })
    }
}

fn is_invariant(g: &GridDensity) -> bool {
    let (d, m) = (g.dim(), g.size());
    (0..g.cell_count()).all(|flat| {
        let multi = g.multi(flat);
        let v = g.values()[flat];
        let reflected = (0..d).all(|axis| {
            let mut r = multi.clone();
            r[axis] = (m - r[axis]) % m;
            g.values()[g.flat(&r)] == v
        });
        let swapped = (0..d).all(|a| {
            (a + 1..d).all(|b| {
                let mut s = multi.clone();
                s.swap(a, b);
                g.values()[g.flat(&s)] == v
            })
        });
        reflected && swapped
    })
}

impl Kernel for GridTabulated {
    fn kind(&self) -> KernelKind {
        KernelKind::Tabulated
    }

    fn dim(&self) -> usize {
        self.grid.dim()
    }

    fn epsilon(&self) -> f64 {
        self.epsilon
    }

    fn grid(&self, m: usize) -> Result<GridDensity> {
        if m != self.grid.size() {
            return Err(Error::SizeMismatch(m, self.grid.size()));
        }
        Ok(self.grid.clone())
    }

    fn fourier(&self, k: &[i64]) -> Result<f64> {
        if k.iter().all(|&x| x == 0) {
            return Ok(1.0);
        }
        Err(Error::Unsupported("tabulated kernels have no closed-form transform; use the grid DFT".into()))
    }

    fn sample(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        let total = *self.cumulative.last().expect("non-empty grid");
        let u = rng.random::<f64>() * total;
        let flat = self.cumulative.partition_point(|&c| c <= u).min(self.cumulative.len() - 1);
        let m = self.grid.size();
        let h = 1.0 / m as f64;
        self.grid
            .multi(flat)
            .into_iter()
            .map(|j| (signed_mode(j, m) as f64 + rng.random::<f64>() - 0.5) * h)
            .collect()
    }

    fn signed_permutation_invariant(&self) -> bool {
        self.invariant
    }

    fn spec(&self) -> KernelSpec {
        KernelSpec { values: Some(self.grid.values().to_vec()), ..KernelSpec::new(KernelKind::Tabulated, self.epsilon) }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn passthrough() {
        let g = GridDensity::new(1, 4, vec![2.0, 1.0, 0.0, 1.0]).unwrap();
        let k = GridTabulated::new(g.clone(), 0.25).unwrap();
        assert_eq!(k.grid(4).unwrap(), g);
        assert!(k.signed_permutation_invariant());
        assert!(k.grid(8).is_err());
    }
}
