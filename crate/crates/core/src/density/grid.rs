use std::io::{Read, Write};

use serde::Serialize;

use crate::error::{Error, Result};

/// Cell averages of a function on a uniform `m^d` grid of the torus.
///
/// Cell `j` along an axis covers `[j/m, (j+1)/m)`. Values are stored with the
/// first axis varying slowest. Probability densities have mean 1; signed
/// fields use the same type.
#[derive(Clone, Debug, PartialEq)]
pub struct GridDensity {
    d: usize,
    m: usize,
    values: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Distances {
    /// `‖f − 1‖_{L¹} / 2`
    pub tv: f64,
    /// `‖f − 1‖_{L²}`
    pub l2: f64,
}

impl GridDensity {
    pub fn new(d: usize, m: usize, values: Vec<f64>) -> Result<Self> {
        let len = cells(d, m)?;
        if values.len() != len {
            return Err(Error::SizeMismatch(values.len(), len));
        }
        Ok(Self { d, m, values })
    }

    pub fn constant(d: usize, m: usize, c: f64) -> Self {
        Self { d, m, values: vec![c; m.pow(d as u32)] }
    }

    pub fn uniform(d: usize, m: usize) -> Self {
        Self::constant(d, m, 1.0)
    }

    pub fn zeros(d: usize, m: usize) -> Self {
        Self::constant(d, m, 0.0)
    }

    /// Unit-mass density concentrated on one cell.
    pub fn point_mass(d: usize, m: usize, cell: &[usize]) -> Self {
        let mut g = Self::zeros(d, m);
        let idx = g.flat(cell);
        g.values[idx] = g.cell_count() as f64;
        g
    }

    /// Cell averages of `f` by tensor Gauss–Legendre quadrature with `q` points per axis.
    pub fn from_fn(d: usize, m: usize, q: usize, f: impl Fn(&[f64]) -> f64 + Sync) -> Self {
        let (nodes, weights) = gauss_legendre(q);
        let h = 1.0 / m as f64;
        let n = m.pow(d as u32);
        let mut values = vec![0.0; n];
        let mut x = vec![0.0; d];
        let mut multi = vec![0usize; d];
        let mut sub = vec![0usize; d];
        for (flat, v) in values.iter_mut().enumerate() {
            unflatten(flat, d, m, &mut multi);
            let mut acc = 0.0;
            sub.iter_mut().for_each(|s| *s = 0);
            loop {
                let mut w = 1.0;
                for k in 0..d {
                    x[k] = (multi[k] as f64 + nodes[sub[k]]) * h;
                    w *= weights[sub[k]];
                }
                acc += w * f(&x);
                if !advance(&mut sub, q) {
                    break;
                }
            }
            *v = acc;
        }
        Self { d, m, values }
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn size(&self) -> usize {
        self.m
    }

    pub fn cell_count(&self) -> usize {
        self.values.len()
    }

    pub fn cell_volume(&self) -> f64 {
        (1.0 / self.m as f64).powi(self.d as i32)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn flat(&self, multi: &[usize]) -> usize {
        multi.iter().fold(0, |acc, &i| acc * self.m + i)
    }

    pub fn multi(&self, flat: usize) -> Vec<usize> {
        let mut out = vec![0; self.d];
        unflatten(flat, self.d, self.m, &mut out);
        out
    }

    /// Lower corner of a cell.
    pub fn cell_origin(&self, flat: usize) -> Vec<f64> {
        self.multi(flat).into_iter().map(|i| i as f64 / self.m as f64).collect()
    }

    pub fn cell_center(&self, flat: usize) -> Vec<f64> {
        self.multi(flat).into_iter().map(|i| (i as f64 + 0.5) / self.m as f64).collect()
    }

    /// Integral over the torus (the mean, since the torus has unit volume).
    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn min(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn norm_l1(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).sum::<f64>() / self.values.len() as f64
    }

    pub fn norm_l2(&self) -> f64 {
        self.inner(self).sqrt()
    }

    pub fn norm_lp(&self, p: f64) -> f64 {
        if p == 1.0 {
            return self.norm_l1();
        }
        if p == 2.0 {
            return self.norm_l2();
        }
        (self.values.iter().map(|v| v.abs().powf(p)).sum::<f64>() / self.values.len() as f64).powf(1.0 / p)
    }

    pub fn inner(&self, other: &Self) -> f64 {
        debug_assert_eq!(self.values.len(), other.values.len());
        self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum::<f64>() / self.values.len() as f64
    }

    pub fn distances(&self) -> Distances {
        let n = self.values.len() as f64;
        let mut l1 = 0.0;
        let mut l2 = 0.0;
        for v in &self.values {
            let e = v - 1.0;
            l1 += e.abs();
            l2 += e * e;
        }
        Distances { tv: 0.5 * l1 / n, l2: (l2 / n).sqrt() }
    }

    pub fn check_same_grid(&self, other: &Self) -> Result<()> {
        if self.d != other.d || self.m != other.m {
            return Err(Error::SizeMismatch(self.values.len(), other.values.len()));
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip(other, |a, b| a - b)
    }

    pub fn zip(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.check_same_grid(other)?;
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        Ok(Self { d: self.d, m: self.m, values })
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { d: self.d, m: self.m, values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    /// Removes the mean.
    pub fn centered(&self) -> Self {
        let mu = self.mean();
        self.map(|v| v - mu)
    }

    /// Averages blocks of `factor^d` cells into one coarse cell.
    pub fn coarsen(&self, factor: usize) -> Result<Self> {
        if factor == 0 || self.m % factor != 0 {
            return Err(Error::Alignment { m: self.m, what: format!("coarsening factor {factor}") });
        }
        let mc = self.m / factor;
        let mut out = Self::zeros(self.d, mc);
        let mut multi = vec![0; self.d];
        for (flat, v) in self.values.iter().enumerate() {
            unflatten(flat, self.d, self.m, &mut multi);
            let coarse = multi.iter().fold(0, |acc, &i| acc * mc + i / factor);
            out.values[coarse] += v;
        }
        let norm = (factor as f64).powi(self.d as i32);
        out.values.iter_mut().for_each(|v| *v /= norm);
        Ok(out)
    }

    /// `cell,value` rows; `cell` is the flat index.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "cell,value")?;
        for (i, v) in self.values.iter().enumerate() {
            writeln!(w, "{i},{v:e}")?;
        }
        Ok(())
    }

    pub fn read_csv<R: Read>(d: usize, mut r: R) -> Result<Self> {
        let mut text = String::new();
        r.read_to_string(&mut text)?;
        let mut values = Vec::new();
        for (n, line) in text.lines().enumerate().skip(1) {
            if line.trim().is_empty() {
                continue;
            }
            let (_, v) = line.split_once(',').ok_or_else(|| Error::Parse(format!("line {}: expected cell,value", n + 1)))?;
            values.push(v.trim().parse::<f64>().map_err(|e| Error::Parse(format!("line {}: {e}", n + 1)))?);
        }
        let m = (values.len() as f64).powf(1.0 / d as f64).round() as usize;
        Self::new(d, m, values)
    }

    /// Little-endian dump: `d: u32`, `m: u32`, then `m^d` raw `f64` values.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(&(self.d as u32).to_le_bytes())?;
        w.write_all(&(self.m as u32).to_le_bytes())?;
        for v in &self.values {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut word = [0u8; 4];
        r.read_exact(&mut word)?;
        let d = u32::from_le_bytes(word) as usize;
        r.read_exact(&mut word)?;
        let m = u32::from_le_bytes(word) as usize;
        let n = cells(d, m)?;
        let mut values = Vec::with_capacity(n);
        let mut buf = [0u8; 8];
        for _ in 0..n {
            r.read_exact(&mut buf)?;
            values.push(f64::from_le_bytes(buf));
        }
        Ok(Self { d, m, values })
    }
}

fn cells(d: usize, m: usize) -> Result<usize> {
    if d == 0 || m == 0 {
        return Err(Error::Domain(format!("grid needs d >= 1 and m >= 1 (got d={d}, m={m})")));
    }
    m.checked_pow(d as u32).ok_or_else(|| Error::Domain(format!("grid {m}^{d} is too large")))
}

pub(crate) fn unflatten(mut flat: usize, d: usize, m: usize, out: &mut [usize]) {
    for k in (0..d).rev() {
        out[k] = flat % m;
        flat /= m;
    }
}

/// Odometer increment; returns false after wrapping past the last index.
pub(crate) fn advance(idx: &mut [usize], base: usize) -> bool {
    for k in (0..idx.len()).rev() {
        idx[k] += 1;
        if idx[k] < base {
            return true;
        }
        idx[k] = 0;
    }
    false
}

/// Gauss–Legendre nodes and weights on `[0,1]`.
pub fn gauss_legendre(q: usize) -> (Vec<f64>, Vec<f64>) {
    let (x, w): (&[f64], &[f64]) = match q {
        1 => (&[0.0], &[2.0]),
        2 => (&[-0.577_350_269_189_625_8, 0.577_350_269_189_625_8], &[1.0, 1.0]),
        3 => (
            &[-0.774_596_669_241_483_4, 0.0, 0.774_596_669_241_483_4],
            &[0.555_555_555_555_555_6, 0.888_888_888_888_888_9, 0.555_555_555_555_555_6],
        ),
        _ => (
            &[-0.861_136_311_594_052_6, -0.339_981_043_584_856_3, 0.339_981_043_584_856_3, 0.861_136_311_594_052_6],
            &[0.347_854_845_137_453_9, 0.652_145_154_862_546_1, 0.652_145_154_862_546_1, 0.347_854_845_137_453_9],
        ),
    };
    (x.iter().map(|t| 0.5 * (t + 1.0)).collect(), w.iter().map(|w| 0.5 * w).collect())
}
