use std::ops::{Add, Mul};

use num_traits::Zero;
use rayon::prelude::*;

use super::grid::{unflatten, GridDensity};
use crate::error::{Error, Result};
use crate::exact::{Rational, Real};
use crate::maps::BernoulliMap;

type Lists<T> = Vec<Vec<Vec<(usize, T)>>>;

/// Per-branch, per-axis overlap lists. Output axis `k` looks up its list at the
/// output index along `key_axis[k]` and reads input indices along `in_axis[k]`.
#[derive(Clone, Debug)]
struct Gather<T> {
    key_axis: Vec<usize>,
    in_axis: Vec<usize>,
    lists: Lists<T>,
}

impl<T> Gather<T>
where
    T: Copy + Zero + Add<Output = T> + Mul<Output = T>,
{
    fn accumulate(&self, out_multi: &[usize], input: &[T], m: usize, scratch: &mut [usize], pick: &mut [usize]) -> T {
        let d = out_multi.len();
        if d == 1 {
            return self.lists[0][out_multi[self.key_axis[0]]]
                .iter()
                .fold(T::zero(), |acc, &(idx, w)| acc + w * input[idx]);
        }
        let list = |k: usize| &self.lists[k][out_multi[self.key_axis[k]]];
        if (0..d).any(|k| list(k).is_empty()) {
            return T::zero();
        }
        pick.iter_mut().for_each(|p| *p = 0);
        let mut acc = T::zero();
        loop {
            let mut w: Option<T> = None;
            for k in 0..d {
                let (idx, wk) = list(k)[pick[k]];
                scratch[self.in_axis[k]] = idx;
                w = Some(match w {
                    None => wk,
                    Some(prev) => prev * wk,
                });
            }
            let flat = scratch.iter().fold(0, |a, &i| a * m + i);
            acc = acc + w.expect("d >= 1") * input[flat];
            // odometer over list positions
            let mut k = d;
            loop {
                if k == 0 {
                    return acc;
                }
                k -= 1;
                pick[k] += 1;
                if pick[k] < list(k).len() {
                    break;
                }
                pick[k] = 0;
            }
        }
    }
}

/// Exact cell-averaged transfer operator `U*` on an `m^d` grid.
///
/// Each target cell receives the overlap-weighted average of the source cells
/// meeting its branch preimages. This is the exact cell average of `U* f` for
/// piecewise-constant `f`, on any grid; on grids aligned with the cylinders it
/// maps normalized indicators to normalized indicators without error. The
/// transpose is the exact cell-averaged pullback `g ↦ g∘φ`.
#[derive(Clone, Debug)]
pub struct TransferPlan {
    d: usize,
    m: usize,
    forward: Vec<Gather<f64>>,
    adjoint: Vec<Gather<f64>>,
    forward_exact: Option<Vec<Gather<Rational>>>,
}

impl TransferPlan {
    pub fn new(map: &BernoulliMap, m: usize) -> Result<Self> {
        let d = map.dim();
        if m == 0 {
            return Err(Error::Domain("grid size must be positive".into()));
        }
        let mut forward = Vec::new();
        let mut adjoint = Vec::new();
        let mut exact_all: Option<Vec<Gather<Rational>>> = Some(Vec::new());
        for b in map.branches() {
            let mut fwd: Lists<Real> = Vec::with_capacity(d);
            for r in 0..d {
                let c = b.d_mat.col[r];
                let w = b.cell.extent[c];
                let off = b.offset[r];
                let sign = b.d_mat.sign[r];
                let mut per_t = Vec::with_capacity(m);
                for t in 0..m {
                    let y0 = Real::frac(t as i64, m as i64);
                    let y1 = Real::frac(t as i64 + 1, m as i64);
                    let x0 = (y0 - off) * w;
                    let x1 = (y1 - off) * w;
                    let (a, z) = if sign > 0 { (x0, x1) } else { (-x1, -x0) };
                    per_t.push(overlaps(a, z, m));
                }
                fwd.push(per_t);
            }
            let mut bwd: Lists<f64> = vec![vec![Vec::new(); m]; d];
            for r in 0..d {
                for (t, list) in fwd[r].iter().enumerate() {
                    for &(s, wt) in list {
                        bwd[r][s].push((t, wt.value()));
                    }
                }
            }
            let key_fwd: Vec<usize> = (0..d).collect();
            let in_fwd: Vec<usize> = b.d_mat.col.clone();
            let exact_lists: Option<Lists<Rational>> = fwd
                .iter()
                .map(|axis| {
                    axis.iter()
                        .map(|l| l.iter().map(|(s, w)| w.as_exact().map(|q| (*s, q))).collect::<Option<Vec<_>>>())
                        .collect::<Option<Vec<_>>>()
                })
                .collect();
            exact_all = match (exact_all, exact_lists) {
                (Some(mut v), Some(lists)) => {
                    v.push(Gather { key_axis: key_fwd.clone(), in_axis: in_fwd.clone(), lists });
                    Some(v)
                }
                _ => None,
            };
            let lists_f: Lists<f64> = fwd
                .iter()
                .map(|axis| axis.iter().map(|l| l.iter().map(|(s, w)| (*s, w.value())).collect()).collect())
                .collect();
            forward.push(Gather { key_axis: key_fwd, in_axis: in_fwd, lists: lists_f });
            adjoint.push(Gather { key_axis: b.d_mat.col.clone(), in_axis: (0..d).collect(), lists: bwd });
        }
        Ok(Self { d, m, forward, adjoint, forward_exact: exact_all })
    }

    pub fn size(&self) -> usize {
        self.m
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn has_exact_weights(&self) -> bool {
        self.forward_exact.is_some()
    }

    fn check(&self, f: &GridDensity) -> Result<()> {
        if f.dim() != self.d || f.size() != self.m {
            return Err(Error::SizeMismatch(f.cell_count(), self.m.pow(self.d as u32)));
        }
        Ok(())
    }

    fn run_f64(&self, gathers: &[Gather<f64>], input: &[f64]) -> Vec<f64> {
        let (d, m) = (self.d, self.m);
        let mut out = vec![0.0; input.len()];
        out.par_chunks_mut(4096).enumerate().for_each(|(chunk, slice)| {
            let mut multi = vec![0; d];
            let mut scratch = vec![0; d];
            let mut pick = vec![0; d];
            for (i, v) in slice.iter_mut().enumerate() {
                unflatten(chunk * 4096 + i, d, m, &mut multi);
                *v = gathers.iter().map(|g| g.accumulate(&multi, input, m, &mut scratch, &mut pick)).sum();
            }
        });
        out
    }

    /// `U* f`.
    pub fn push(&self, f: &GridDensity) -> Result<GridDensity> {
        self.check(f)?;
        GridDensity::new(self.d, self.m, self.run_f64(&self.forward, f.values()))
    }

    /// The transpose of [`push`](Self::push): cell averages of `g∘φ`.
    pub fn pull(&self, g: &GridDensity) -> Result<GridDensity> {
        self.check(g)?;
        GridDensity::new(self.d, self.m, self.run_f64(&self.adjoint, g.values()))
    }

    /// `U* f` in exact rational arithmetic.
    pub fn push_exact(&self, f: &[Rational]) -> Result<Vec<Rational>> {
        let gathers = self
            .forward_exact
            .as_ref()
            .ok_or_else(|| Error::Unsupported("transfer weights are not rational for this map".into()))?;
        let n = self.m.pow(self.d as u32);
        if f.len() != n {
            return Err(Error::SizeMismatch(f.len(), n));
        }
        let mut multi = vec![0; self.d];
        let mut scratch = vec![0; self.d];
        let mut pick = vec![0; self.d];
        let mut out = Vec::with_capacity(n);
        for flat in 0..n {
            unflatten(flat, self.d, self.m, &mut multi);
            let mut acc = Rational::zero();
            for g in gathers {
                acc = acc + g.accumulate(&multi, f, self.m, &mut scratch, &mut pick);
            }
            out.push(acc);
        }
        Ok(out)
    }
}

/// Source cells met by `[a, z)` with weights `overlap · m`.
fn overlaps(a: Real, z: Real, m: usize) -> Vec<(usize, Real)> {
    let mr = Real::int(m as i64);
    let lo = (a * mr).floor().max(0) as usize;
    let hi = ((z * mr).ceil().max(0) as usize).min(m);
    let mut out = Vec::new();
    for s in lo..hi {
        let c0 = Real::frac(s as i64, m as i64);
        let c1 = Real::frac(s as i64 + 1, m as i64);
        let left = if a > c0 { a } else { c0 };
        let right = if z < c1 { z } else { c1 };
        let w = (right - left) * mr;
        if w.value() > 1e-14 || (w.is_exact() && w > Real::zero()) {
            out.push((s, w));
        }
    }
    out
}

/// True when every branch cell boundary lies on the grid.
pub fn is_aligned(map: &BernoulliMap, m: usize) -> bool {
    let mr = Real::int(m as i64);
    map.branches().iter().all(|b| {
        b.cell.origin.iter().chain(&b.cell.extent).all(|v| {
            let s = *v * mr;
            s.is_exact() && s.denominator() == Some(1)
        })
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maps::map_preset;

    #[test]
    fn doubling_indicator_example() {
        let map = map_preset("doubling").unwrap();
        let plan = TransferPlan::new(&map, 8).unwrap();
        let mut f = GridDensity::zeros(1, 8);
        f.values_mut()[2] = 4.0;
        f.values_mut()[3] = 4.0;
        let out = plan.push(&f).unwrap();
        assert_eq!(out.values(), &[0.0, 0.0, 0.0, 0.0, 2.0, 2.0, 2.0, 2.0]);
    }

    #[test]
    fn constants_fixed_and_mass_conserved() {
        for name in ["doubling", "intro3", "quad2d"] {
            let map = map_preset(name).unwrap();
            let m = if map.dim() == 1 { 27 } else { 8 };
            let plan = TransferPlan::new(&map, m).unwrap();
            let one = GridDensity::uniform(map.dim(), m);
            for v in plan.push(&one).unwrap().values() {
                assert!((v - 1.0).abs() < 1e-14, "{name}");
            }
            let f = GridDensity::from_fn(map.dim(), m, 2, |x| 1.0 + (5.0 * x[0]).sin());
            assert!((plan.push(&f).unwrap().mean() - f.mean()).abs() < 1e-13);
        }
    }

    #[test]
    fn pull_is_transpose() {
        let map = map_preset("intro3").unwrap();
        let plan = TransferPlan::new(&map, 20).unwrap();
        let f = GridDensity::from_fn(1, 20, 2, |x| (7.0 * x[0]).cos());
        let g = GridDensity::from_fn(1, 20, 2, |x| x[0] * x[0]);
        let lhs = plan.push(&f).unwrap().inner(&g);
        let rhs = f.inner(&plan.pull(&g).unwrap());
        assert!((lhs - rhs).abs() < 1e-14);
    }

    #[test]
    fn pull_evaluates_composition() {
        let map = map_preset("doubling").unwrap();
        let plan = TransferPlan::new(&map, 16).unwrap();
        let mut g = GridDensity::zeros(1, 16);
        g.values_mut()[0] = 1.0;
        // g∘φ is 1 on [0,1/32) ∪ [1/2,1/2+1/32): half of cells 0 and 8
        let out = plan.pull(&g).unwrap();
        assert_eq!(out.values()[0], 0.5);
        assert_eq!(out.values()[8], 0.5);
        assert_eq!(out.values().iter().sum::<f64>(), 1.0);
    }

    #[test]
    fn alignment() {
        let map = map_preset("intro3").unwrap();
        assert!(is_aligned(&map, 9));
        assert!(!is_aligned(&map, 8));
    }
}
