use serde::Serialize;

use super::{BernoulliMap, Word};
use crate::error::{Error, Result};
use crate::exact::Real;

#[derive(Clone, Debug, Serialize)]
pub struct ValidationReport {
    pub name: String,
    pub d: usize,
    pub branches: usize,
    pub weights: Vec<f64>,
    pub p_min: f64,
    pub p_max: f64,
    pub exact: bool,
    pub depth: usize,
    /// Distinct cylinder shapes examined during the cube check.
    pub shapes_checked: usize,
    /// Candidate boundary points examined during the face check.
    pub boundary_points_checked: usize,
    pub bijective: bool,
    pub boundary_covered: bool,
    pub cubes: bool,
}

/// Checks tiling, bijectivity, cube cylinders up to `depth`, and that every
/// boundary point of the unit cube is the image of an interior point under
/// some branch (modulo `Z^d`, since the branches act on the torus).
///
/// The identity map fails the boundary check by design: it does not mix.
pub fn validate_map(map: &BernoulliMap, depth: usize) -> Result<ValidationReport> {
    if depth == 0 {
        return Err(Error::Domain("validation depth must be at least 1".into()));
    }
    let d = map.dim();
    let branches = map.branches();

    for (i, b) in branches.iter().enumerate() {
        for k in 0..d {
            if b.cell.lower(k) < Real::zero() || b.cell.upper(k) > Real::one() {
                return Err(Error::InvalidMap(format!("branch {} cell leaves the unit cube", i + 1)));
            }
        }
    }

    for i in 0..branches.len() {
        for j in i + 1..branches.len() {
            let (a, b) = (&branches[i].cell, &branches[j].cell);
            let disjoint = (0..d).any(|k| {
                let lo = if a.lower(k) > b.lower(k) { a.lower(k) } else { b.lower(k) };
                let hi = if a.upper(k) < b.upper(k) { a.upper(k) } else { b.upper(k) };
                hi <= lo || (hi - lo).is_zero()
            });
            if !disjoint {
                return Err(Error::Overlap(i + 1, j + 1));
            }
        }
    }

    let volume = branches.iter().fold(Real::zero(), |acc, b| acc + b.weight());
    if !volume.same(&Real::one()) {
        return Err(Error::Coverage { volume: volume.value() });
    }

    for (i, b) in branches.iter().enumerate() {
        let lo = b.forward_exact(&b.cell.origin);
        let hi_corner: Vec<Real> = (0..d).map(|k| b.cell.upper(k)).collect();
        let hi = b.forward_exact(&hi_corner);
        for k in 0..d {
            let (a, c) = if lo[k] <= hi[k] { (lo[k], hi[k]) } else { (hi[k], lo[k]) };
            if !a.same(&Real::zero()) || !c.same(&Real::one()) {
                return Err(Error::NotBijective(i + 1));
            }
        }
    }

    let shapes_checked = check_cubes(map, depth)?;
    let boundary_points_checked = check_boundary(map)?;

    Ok(ValidationReport {
        name: map.name.clone(),
        d,
        branches: branches.len(),
        weights: map.weights(),
        p_min: map.p_min(),
        p_max: map.p_max(),
        exact: map.is_exact(),
        depth,
        shapes_checked,
        boundary_points_checked,
        bijective: true,
        boundary_covered: true,
        cubes: true,
    })
}

/// Cylinder shapes depend only on the word, not on where the cylinder sits,
/// so a breadth-first search over distinct extent vectors covers every word.
fn check_cubes(map: &BernoulliMap, depth: usize) -> Result<usize> {
    let d = map.dim();
    let mut frontier: Vec<(Vec<Real>, Word)> = vec![(vec![Real::one(); d], Word::empty())];
    let mut checked = 0;
    for _ in 0..depth {
        let mut next: Vec<(Vec<Real>, Word)> = Vec::new();
        for (shape, word) in &frontier {
            for (i, b) in map.branches().iter().enumerate() {
                let mut ext = vec![Real::zero(); d];
                for r in 0..d {
                    let c = b.d_mat.col[r];
                    ext[c] = shape[r] * b.cell.extent[c];
                }
                let mut w = vec![i];
                w.extend_from_slice(word.indices());
                if !ext.iter().all(|e| e.same(&ext[0])) {
                    return Err(Error::NonCube {
                        word: w.iter().map(|i| i + 1).collect(),
                        extents: ext.iter().map(Real::value).collect(),
                    });
                }
                if !next.iter().any(|(s, _)| s.iter().zip(&ext).all(|(a, b)| a.same(b))) {
                    next.push((ext, Word::new(w)));
                }
            }
        }
        checked += next.len();
        frontier = next;
    }
    Ok(checked)
}

/// Exact face-by-face cover test. On each face the open boxes
/// `φ̌_i((0,1)^d) - n` cut the remaining axes into an arrangement; membership is
/// constant on each piece, so one representative per piece decides the cover.
fn check_boundary(map: &BernoulliMap) -> Result<usize> {
    let d = map.dim();
    let images: Vec<Vec<(Real, Real)>> = map.branches().iter().map(|b| b.image_of_unit()).collect();
    let mut checked = 0;
    for axis in 0..d {
        for v in [Real::zero(), Real::one()] {
            // (interval per remaining axis) for every shifted box that contains the face value strictly
            let mut boxes: Vec<Vec<(Real, Real)>> = Vec::new();
            for img in &images {
                let (lo, hi) = img[axis];
                let shifts_a: Vec<i64> = ((lo - v).floor() - 1..=(hi - v).ceil() + 1)
                    .filter(|&n| {
                        let x = v + Real::int(n);
                        lo < x && x < hi
                    })
                    .collect();
                if shifts_a.is_empty() {
                    continue;
                }
                // other axes: every shift whose interval meets [0,1]
                let mut per_axis: Vec<Vec<(Real, Real)>> = Vec::new();
                for b in (0..d).filter(|&b| b != axis) {
                    let (lo_b, hi_b) = img[b];
                    let list: Vec<(Real, Real)> = (lo_b.floor() - 2..=hi_b.ceil() + 1)
                        .map(|n| (lo_b - Real::int(n), hi_b - Real::int(n)))
                        .filter(|(a, c)| *a < Real::one() && *c > Real::zero())
                        .collect();
                    per_axis.push(list);
                }
                for combo in cartesian(&per_axis) {
                    boxes.push(combo);
                }
            }
            let mut coords: Vec<Vec<Real>> = Vec::new();
            for k in 0..d - 1 {
                let mut br = vec![Real::zero(), Real::one()];
                for bx in &boxes {
                    for e in [bx[k].0, bx[k].1] {
                        if e > Real::zero() && e < Real::one() {
                            br.push(e);
                        }
                    }
                }
                br.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
                br.dedup_by(|a, b| a.same(b));
                let mut reps = br.clone();
                for w in br.windows(2) {
                    reps.push((w[0] + w[1]) / Real::int(2));
                }
                coords.push(reps);
            }
            let point_sets: Vec<Vec<Real>> = if d == 1 { vec![vec![]] } else { cartesian(&coords) };
            for p in point_sets {
                checked += 1;
                let covered = boxes.iter().any(|bx| bx.iter().zip(&p).all(|((a, c), x)| *a < *x && *x < *c));
                if !covered {
                    let mut point: Vec<f64> = p.iter().map(Real::value).collect();
                    point.insert(axis, v.value());
                    return Err(Error::Boundary { point });
                }
            }
        }
    }
    Ok(checked)
}

fn cartesian<T: Clone>(lists: &[Vec<T>]) -> Vec<Vec<T>> {
    let mut out: Vec<Vec<T>> = vec![Vec::new()];
    for list in lists {
        let mut next = Vec::with_capacity(out.len() * list.len());
        for prefix in &out {
            for item in list {
                let mut p = prefix.clone();
                p.push(item.clone());
                next.push(p);
            }
        }
        out = next;
    }
    out
}
