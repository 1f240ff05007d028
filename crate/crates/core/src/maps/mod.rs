//! Piecewise-affine Bernoulli maps on the torus and their cylinder sets.

mod presets;
mod spec;
mod validate;

pub use presets::{map_preset, map_presets, uniform_expanding, MapPreset};
pub use spec::{BranchSpec, MapSpec, SideSpec};
pub use validate::{validate_map, ValidationReport};

use std::fmt;

use crate::error::{Error, Result};
use crate::exact::{lcm, Real};

/// Safety cap on word length during partition enumeration.
pub const MAX_DEPTH: usize = 64;

/// Axis-aligned box `origin + [0, extent)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Cell {
    pub origin: Vec<Real>,
    pub extent: Vec<Real>,
}

impl Cell {
    pub fn unit(d: usize) -> Self {
        Self { origin: vec![Real::zero(); d], extent: vec![Real::one(); d] }
    }

    pub fn dim(&self) -> usize {
        self.origin.len()
    }

    pub fn volume(&self) -> Real {
        self.extent.iter().fold(Real::one(), |acc, &w| acc * w)
    }

    /// Common side length when the box is a cube.
    pub fn side(&self) -> Option<Real> {
        let first = self.extent[0];
        self.extent.iter().all(|w| w.same(&first)).then_some(first)
    }

    /// Half-open membership test in floating point.
    pub fn contains(&self, x: &[f64]) -> bool {
        self.origin.iter().zip(&self.extent).zip(x).all(|((o, w), &xi)| {
            let lo = o.value();
            xi >= lo && xi < lo + w.value()
        })
    }

    pub fn lower(&self, axis: usize) -> Real {
        self.origin[axis]
    }

    pub fn upper(&self, axis: usize) -> Real {
        self.origin[axis] + self.extent[axis]
    }
}

/// Signed permutation: row `r` of `D` has entry `sign[r]` in column `col[r]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SignedPermutation {
    pub col: Vec<usize>,
    pub sign: Vec<i8>,
}

impl SignedPermutation {
    pub fn identity(d: usize) -> Self {
        Self { col: (0..d).collect(), sign: vec![1; d] }
    }

    pub fn reflection(d: usize) -> Self {
        Self { col: (0..d).collect(), sign: vec![-1; d] }
    }

    /// Builds from a dense matrix, rejecting anything that is not a signed permutation.
    pub fn from_matrix(rows: &[Vec<i64>]) -> Result<Self> {
        let d = rows.len();
        let mut col = Vec::with_capacity(d);
        let mut sign = Vec::with_capacity(d);
        let mut used = vec![false; d];
        for (r, row) in rows.iter().enumerate() {
            if row.len() != d {
                return Err(Error::InvalidMap(format!("D row {r} has length {} (expected {d})", row.len())));
            }
            let nonzero: Vec<usize> = (0..d).filter(|&c| row[c] != 0).collect();
            if nonzero.len() != 1 || row[nonzero[0]].abs() != 1 {
                return Err(Error::InvalidMap(format!("D row {r} is not a signed unit vector")));
            }
            let c = nonzero[0];
            if used[c] {
                return Err(Error::InvalidMap(format!("D column {c} used twice")));
            }
            used[c] = true;
            col.push(c);
            sign.push(row[c] as i8);
        }
        Ok(Self { col, sign })
    }

    pub fn to_matrix(&self) -> Vec<Vec<i64>> {
        let d = self.col.len();
        (0..d)
            .map(|r| (0..d).map(|c| if self.col[r] == c { self.sign[r] as i64 } else { 0 }).collect())
            .collect()
    }

    /// Row index whose nonzero sits in column `c`.
    pub fn row_of(&self, c: usize) -> usize {
        self.col.iter().position(|&x| x == c).expect("signed permutation is complete")
    }
}

/// One branch `x -> D (x - origin) / extent + e` restricted to its cell.
///
/// For cube cells this is the usual `D x / p^(1/d) + e` with the origin folded into `e`.
#[derive(Clone, Debug)]
pub struct AffineBranch {
    pub cell: Cell,
    pub d_mat: SignedPermutation,
    pub offset: Vec<Real>,
}

impl AffineBranch {
    /// Branch with cube cell at `origin` of the given side, mapping the cell onto `[0,1)^d`
    /// with orientation `d_mat`.
    pub fn onto_unit(origin: Vec<Real>, extent: Vec<Real>, d_mat: SignedPermutation) -> Self {
        let d = origin.len();
        let mut offset = vec![Real::zero(); d];
        for r in 0..d {
            let c = d_mat.col[r];
            let scaled_origin = origin[c] / extent[c];
            offset[r] = if d_mat.sign[r] > 0 { -scaled_origin } else { Real::one() + scaled_origin };
        }
        Self { cell: Cell { origin, extent }, d_mat, offset }
    }

    /// Weight `p_i`, the volume of the cell.
    pub fn weight(&self) -> Real {
        self.cell.volume()
    }

    /// Exact image of a coordinate vector.
    pub fn forward_exact(&self, x: &[Real]) -> Vec<Real> {
        (0..x.len())
            .map(|r| {
                let c = self.d_mat.col[r];
                let v = x[c] / self.cell.extent[c];
                (if self.d_mat.sign[r] > 0 { v } else { -v }) + self.offset[r]
            })
            .collect()
    }

    /// Floating-point image (not reduced mod 1).
    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        (0..x.len())
            .map(|r| {
                let c = self.d_mat.col[r];
                let v = x[c] / self.cell.extent[c].value();
                f64::from(self.d_mat.sign[r]) * v + self.offset[r].value()
            })
            .collect()
    }

    /// Inverse branch applied to a point of `[0,1)^d`.
    pub fn inverse(&self, y: &[f64]) -> Vec<f64> {
        let d = y.len();
        let mut x = vec![0.0; d];
        for r in 0..d {
            let c = self.d_mat.col[r];
            x[c] = f64::from(self.d_mat.sign[r]) * (y[r] - self.offset[r].value()) * self.cell.extent[c].value();
        }
        x
    }

    /// Preimage of the box `target` (inside `[0,1]^d`) under this branch.
    pub fn preimage(&self, target: &Cell) -> Cell {
        let d = target.dim();
        let mut origin = vec![Real::zero(); d];
        let mut extent = vec![Real::zero(); d];
        for r in 0..d {
            let c = self.d_mat.col[r];
            let w = self.cell.extent[c];
            let a = (target.lower(r) - self.offset[r]) * w;
            let b = (target.upper(r) - self.offset[r]) * w;
            let (a, b) = if self.d_mat.sign[r] > 0 { (a, b) } else { (-b, -a) };
            origin[c] = a;
            extent[c] = b - a;
        }
        Cell { origin, extent }
    }

    /// Open image box `forward((0,1)^d)` as (lower, upper) per axis.
    pub fn image_of_unit(&self) -> Vec<(Real, Real)> {
        let d = self.cell.dim();
        (0..d)
            .map(|r| {
                let c = self.d_mat.col[r];
                let reach = Real::one() / self.cell.extent[c];
                let a = self.offset[r];
                let b = if self.d_mat.sign[r] > 0 { a + reach } else { a - reach };
                if a <= b { (a, b) } else { (b, a) }
            })
            .collect()
    }
}

/// Piecewise-affine expanding map of `T^d`.
#[derive(Clone, Debug)]
pub struct BernoulliMap {
    pub name: String,
    d: usize,
    branches: Vec<AffineBranch>,
    p_min: f64,
    p_max: f64,
}

impl BernoulliMap {
    /// Builds a map from branches. Only shape checks happen here; use
    /// [`validate_map`] for the full set of structural checks.
    pub fn new(name: impl Into<String>, branches: Vec<AffineBranch>) -> Result<Self> {
        let first = branches.first().ok_or_else(|| Error::InvalidMap("no branches".into()))?;
        let d = first.cell.dim();
        if d == 0 {
            return Err(Error::InvalidMap("dimension must be at least 1".into()));
        }
        for (i, b) in branches.iter().enumerate() {
            if b.cell.dim() != d || b.cell.extent.len() != d || b.offset.len() != d || b.d_mat.col.len() != d {
                return Err(Error::InvalidMap(format!("branch {i} has inconsistent dimension")));
            }
            if b.cell.extent.iter().any(|w| w.value() <= 0.0) {
                return Err(Error::InvalidMap(format!("branch {i} has a non-positive side")));
            }
        }
        let weights: Vec<f64> = branches.iter().map(|b| b.weight().value()).collect();
        let p_min = weights.iter().cloned().fold(f64::INFINITY, f64::min);
        let p_max = weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        Ok(Self { name: name.into(), d, branches, p_min, p_max })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn branches(&self) -> &[AffineBranch] {
        &self.branches
    }

    pub fn branch_count(&self) -> usize {
        self.branches.len()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.branches.iter().map(|b| b.weight().value()).collect()
    }

    pub fn p_min(&self) -> f64 {
        self.p_min
    }

    pub fn p_max(&self) -> f64 {
        self.p_max
    }

    /// Index of the first branch with maximal weight.
    pub fn heaviest_branch(&self) -> usize {
        let w = self.weights();
        (0..w.len()).fold(0, |best, i| if w[i] > w[best] { i } else { best })
    }

    pub fn is_exact(&self) -> bool {
        self.branches.iter().all(|b| {
            b.cell.origin.iter().chain(&b.cell.extent).chain(&b.offset).all(Real::is_exact)
        })
    }

    /// Smallest `b` such that every branch boundary lies on the lattice `b^-1 Z`.
    /// Grids of size `b^k` then resolve all cylinders of length below `k`.
    pub fn grid_base(&self) -> Option<u64> {
        let mut base: i128 = 1;
        for b in &self.branches {
            for v in b.cell.origin.iter().chain(&b.cell.extent) {
                base = lcm(base, v.denominator()?);
            }
        }
        u64::try_from(base).ok()
    }

    /// Branch whose half-open cell contains `x`.
    pub fn branch_of(&self, x: &[f64]) -> usize {
        self.branches
            .iter()
            .position(|b| b.cell.contains(x))
            .unwrap_or_else(|| {
                // rounding at the top edge: pick the nearest cell
                let dist = |b: &AffineBranch| -> f64 {
                    b.cell
                        .origin
                        .iter()
                        .zip(&b.cell.extent)
                        .zip(x)
                        .map(|((o, w), &xi)| {
                            let lo = o.value();
                            let hi = lo + w.value();
                            if xi < lo { lo - xi } else if xi >= hi { xi - hi } else { 0.0 }
                        })
                        .sum()
                };
                (0..self.branches.len())
                    .min_by(|&i, &j| dist(&self.branches[i]).total_cmp(&dist(&self.branches[j])))
                    .unwrap_or(0)
            })
    }

    /// `φ(x)` reduced to `[0,1)^d`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let b = &self.branches[self.branch_of(x)];
        b.forward(x).into_iter().map(wrap_unit).collect()
    }

    /// Exact version of [`apply`](Self::apply) for rational points.
    pub fn apply_exact(&self, x: &[Real]) -> Vec<Real> {
        let approx: Vec<f64> = x.iter().map(Real::value).collect();
        let i = self
            .branches
            .iter()
            .position(|b| (0..self.d).all(|k| x[k] >= b.cell.lower(k) && x[k] < b.cell.upper(k)))
            .unwrap_or_else(|| self.branch_of(&approx));
        self.branches[i]
            .forward_exact(x)
            .into_iter()
            .map(|v| v - Real::int(v.floor()))
            .collect()
    }

    fn check_index(&self, i: usize) -> Result<()> {
        if i < self.branches.len() {
            Ok(())
        } else {
            Err(Error::Index { index: i, branches: self.branches.len() })
        }
    }

    /// Cylinder `C_s`, built from the tail: `C_s = φ_{s_0}^{-1}(C_{σs})`.
    pub fn cylinder(&self, s: &Word) -> Result<CylinderSet> {
        let mut cell = Cell::unit(self.d);
        for &i in s.0.iter().rev() {
            self.check_index(i)?;
            cell = self.branches[i].preimage(&cell);
        }
        Ok(CylinderSet { word: s.clone(), cell })
    }

    /// The antichain `S` of words with `ℓ_s ≤ scale < ℓ_{σs}`.
    pub fn partition(&self, scale: f64) -> Result<Vec<CylinderSet>> {
        self.partition_with_depth(scale, MAX_DEPTH)
    }

    pub fn partition_with_depth(&self, scale: f64, max_depth: usize) -> Result<Vec<CylinderSet>> {
        if !(scale > 0.0) {
            return Err(Error::Domain(format!("partition scale must be positive, got {scale}")));
        }
        if !self.branches.iter().all(|b| b.weight().value() < 1.0) {
            return Err(Error::Domain("partition needs an expanding map (every p_i < 1)".into()));
        }
        let mut out = Vec::new();
        // depth-first over words, extending at the end: C_{s i} ⊂ C_s
        let mut stack = vec![CylinderSet { word: Word::empty(), cell: Cell::unit(self.d) }];
        while let Some(cyl) = stack.pop() {
            if cyl.side() <= scale {
                out.push(cyl);
                continue;
            }
            if cyl.word.len() >= max_depth {
                return Err(Error::Depth(max_depth));
            }
            for i in (0..self.branches.len()).rev() {
                stack.push(self.extend(&cyl, i));
            }
        }
        Ok(out)
    }

    /// `C_{s i}` from `C_s`: the branch-`i` preimage taken at the end of the word,
    /// i.e. the image of `C_i` under the composite inverse of `s`.
    pub fn extend(&self, cyl: &CylinderSet, i: usize) -> CylinderSet {
        let mut word = cyl.word.0.clone();
        word.push(i);
        let word = Word(word);
        // C_{s i} = φ_s^{-1}(C_i) restricted to C_s; rebuild from the tail
        let mut cell = self.branches[i].cell.clone();
        for &j in cyl.word.0.iter().rev() {
            cell = self.branches[j].preimage(&cell);
        }
        CylinderSet { word, cell }
    }
}

/// Reduces a coordinate to `[0,1)`.
pub fn wrap_unit(x: f64) -> f64 {
    let y = x - x.floor();
    if y >= 1.0 { 0.0 } else { y }
}

/// A finite word of branch indices (0-based internally, printed 1-based).
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Word(pub Vec<usize>);

impl Word {
    pub fn empty() -> Self {
        Self(Vec::new())
    }

    pub fn new(indices: Vec<usize>) -> Self {
        Self(indices)
    }

    /// From 1-based indices as written in configs and reports.
    pub fn from_one_based(indices: &[usize]) -> Result<Self> {
        indices
            .iter()
            .map(|&i| i.checked_sub(1).ok_or_else(|| Error::Parse("branch indices are 1-based".into())))
            .collect::<Result<Vec<_>>>()
            .map(Self)
    }

    pub fn repeated(i: usize, n: usize) -> Self {
        Self(vec![i; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Left shift σ; σ(𝟎) = 𝟎.
    pub fn shift(&self) -> Self {
        if self.0.is_empty() { Self::empty() } else { Self(self.0[1..].to_vec()) }
    }

    pub fn shift_by(&self, n: usize) -> Self {
        Self(self.0[n.min(self.0.len())..].to_vec())
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "()");
        }
        let parts: Vec<String> = self.0.iter().map(|i| (i + 1).to_string()).collect();
        write!(f, "({})", parts.join(","))
    }
}

/// Cylinder set `C_s` with its box geometry.
#[derive(Clone, Debug)]
pub struct CylinderSet {
    pub word: Word,
    pub cell: Cell,
}

impl CylinderSet {
    /// Exact side when the cylinder is a cube (the normal case after validation).
    pub fn side_exact(&self) -> Option<Real> {
        self.cell.side()
    }

    /// `ℓ_s = π(C_s)^{1/d}`.
    pub fn side(&self) -> f64 {
        match self.cell.side() {
            Some(s) => s.value(),
            None => self.cell.volume().value().powf(1.0 / self.cell.dim() as f64),
        }
    }

    pub fn lambda(&self) -> f64 {
        1.0 / self.side()
    }

    pub fn volume(&self) -> Real {
        self.cell.volume()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.cell.contains(x)
    }
}

/// `H(S) = 2d · max λ_s` over non-empty words; `H({C_𝟎}) = 0`.
pub fn perimeter_volume_h(partition: &[CylinderSet]) -> f64 {
    partition
        .iter()
        .filter(|c| !c.word.is_empty())
        .map(|c| 2.0 * c.cell.dim() as f64 * c.lambda())
        .fold(0.0, f64::max)
}

/// Applies σ to every word and returns the distinct cylinders of the shifted family.
pub fn shift_partition(map: &BernoulliMap, partition: &[CylinderSet]) -> Result<Vec<CylinderSet>> {
    let mut words: Vec<Word> = partition.iter().map(|c| c.word.shift()).collect();
    words.sort();
    words.dedup();
    words.iter().map(|w| map.cylinder(w)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doubling() -> BernoulliMap {
        map_preset("doubling").unwrap()
    }

    fn intro3() -> BernoulliMap {
        map_preset("intro3").unwrap()
    }

    #[test]
    fn apply_examples() {
        assert!((doubling().apply(&[0.3])[0] - 0.6).abs() < 1e-15);
        assert!((intro3().apply(&[0.5])[0] - 0.75).abs() < 1e-15);
        let third = intro3().apply_exact(&[Real::frac(1, 3)]);
        assert_eq!(third[0], Real::zero());
    }

    #[test]
    fn cylinder_examples() {
        let c = doubling().cylinder(&Word::new(vec![0, 1])).unwrap();
        assert_eq!(c.cell.origin[0], Real::frac(1, 4));
        assert_eq!(c.side_exact().unwrap(), Real::frac(1, 4));
        let c = intro3().cylinder(&Word::new(vec![0])).unwrap();
        assert_eq!(c.cell.origin[0], Real::zero());
        assert_eq!(c.side_exact().unwrap(), Real::frac(1, 3));
        let c = intro3().cylinder(&Word::empty()).unwrap();
        assert_eq!(c.side(), 1.0);
    }

    #[test]
    fn cylinder_index_error() {
        assert!(matches!(doubling().cylinder(&Word::new(vec![2])), Err(Error::Index { .. })));
    }

    #[test]
    fn partition_examples() {
        let p = doubling().partition(0.3).unwrap();
        assert_eq!(p.len(), 4);
        assert!(p.iter().all(|c| c.word.len() == 2 && c.side() == 0.25));
        let p = doubling().partition(0.6).unwrap();
        assert_eq!(p.len(), 2);
        let mut words: Vec<String> = intro3().partition(0.4).unwrap().iter().map(|c| c.word.to_string()).collect();
        words.sort();
        assert_eq!(words, vec!["(1)", "(2,1)", "(2,2,1)", "(2,2,2)"]);
    }

    #[test]
    fn h_examples() {
        assert_eq!(perimeter_volume_h(&doubling().partition(0.3).unwrap()), 8.0);
        let whole = doubling().cylinder(&Word::empty()).unwrap();
        assert_eq!(perimeter_volume_h(&[whole]), 0.0);
        let quad = map_preset("quad2d").unwrap();
        assert_eq!(perimeter_volume_h(&quad.partition(0.5).unwrap()), 8.0);
    }

    #[test]
    fn depth_error() {
        assert!(matches!(doubling().partition_with_depth(1e-6, 5), Err(Error::Depth(5))));
    }

    #[test]
    fn grid_base_of_presets() {
        assert_eq!(doubling().grid_base(), Some(2));
        assert_eq!(intro3().grid_base(), Some(3));
    }
}
