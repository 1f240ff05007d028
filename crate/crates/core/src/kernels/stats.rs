use std::f64::consts::PI;

use serde::Serialize;

use super::Kernel;
use crate::density::{gauss_legendre, signed_mode, GridFft};
use crate::error::{Error, Result};

/// Summary constants of a kernel at its scale `ε`.
#[derive(Clone, Debug, Serialize)]
pub struct KernelStats {
    pub epsilon: f64,
    /// `∫ d(y,0) K_ε(y) dy` with the torus distance.
    pub first_moment: f64,
    /// `ε^{d/2} ‖K_ε‖_{L²}`.
    pub bold_k: f64,
    pub c: f64,
    /// `sup_{|ξ| > c} |Ǩ^(ξ)|` over real frequencies; bounds the lattice value for every `ε`.
    pub tail_sup: f64,
    /// `sup_{k ∈ Z^d, |k| > c/ε} |K̂_ε(k)|`.
    pub tail_sup_lattice: f64,
    pub moment_a: Option<f64>,
    pub moment_a_low: Option<f64>,
    pub eta: f64,
    /// `inf_{|x_i| ≤ η} Ǩ(x)`.
    pub kappa: Option<f64>,
    /// Finest grid used by the refinement loops.
    pub grid_m: usize,
    /// Whether every refinement loop met the 1e-6 criterion before the size cap.
    pub converged: bool,
}

const REFINE_TOL: f64 = 1e-6;

fn max_grid(d: usize) -> usize {
    match d {
        1 => 1 << 20,
        2 => 2048,
        3 => 128,
        _ => 32,
    }
}

/// Average of the torus distance `|y|` over the centred cell with signed index `j`.
fn cell_abs_average(j: &[i64], h: f64, nodes: &[f64], weights: &[f64]) -> f64 {
    if j.len() == 1 {
        let c = j[0] as f64 * h;
        return if j[0] == 0 { h / 4.0 } else { c.abs() };
    }
    let d = j.len();
    let q = nodes.len();
    let mut idx = vec![0usize; d];
    let mut acc = 0.0;
    loop {
        let mut w = 1.0;
        let mut r2 = 0.0;
        for k in 0..d {
            let x = (j[k] as f64 - 0.5 + nodes[idx[k]]) * h;
            r2 += x * x;
            w *= weights[idx[k]];
        }
        acc += w * r2.sqrt();
        let mut k = d;
        loop {
            if k == 0 {
                return acc;
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < q {
                break;
            }
            idx[k] = 0;
        }
    }
}

fn first_moment_at(kernel: &dyn Kernel, m: usize) -> Result<f64> {
    let g = kernel.grid(m)?;
    let (nodes, weights) = gauss_legendre(4);
    let h = 1.0 / m as f64;
    let vol = g.cell_volume();
    let mut acc = 0.0;
    for (flat, v) in g.values().iter().enumerate() {
        if *v == 0.0 {
            continue;
        }
        let j: Vec<i64> = g.multi(flat).iter().map(|&a| signed_mode(a, m)).collect();
        acc += v * vol * cell_abs_average(&j, h, &nodes, &weights);
    }
    Ok(acc)
}

fn l2_at(kernel: &dyn Kernel, m: usize) -> Result<f64> {
    Ok(kernel.grid(m)?.norm_l2())
}

/// Doubles `m` until successive values differ by less than `REFINE_TOL`.
fn refine(kernel: &dyn Kernel, m0: usize, f: impl Fn(&dyn Kernel, usize) -> Result<f64>) -> Result<(f64, usize, bool)> {
    let cap = max_grid(kernel.dim()).max(m0);
    let mut m = m0;
    let mut prev = f(kernel, m)?;
    while m * 2 <= cap {
        m *= 2;
        let next = f(kernel, m)?;
        if (next - prev).abs() < REFINE_TOL {
            return Ok((next, m, true));
        }
        prev = next;
    }
    Ok((prev, m, false))
}

pub(crate) fn lattice_tail(kernel: &dyn Kernel, c: f64) -> Result<f64> {
    let d = kernel.dim();
    let eps = kernel.epsilon();
    let cut = c / eps;
    let k0 = cut.floor() as i64;
    let span = match d {
        1 => k0 + 4096,
        2 => k0 + 64,
        _ => k0 + 8,
    };
    let closed = kernel.fourier(&vec![1; d]).is_ok();
    // fall back to DFT coefficients of a fine cell-averaged grid
    let dft = if closed {
        None
    } else {
        let mut m = 4usize;
        while (m as i64) < 2 * span + 2 {
            m *= 2;
        }
        let g = kernel.grid(m).or_else(|_| {
            // tabulated kernels only exist at their own size
            let own = (kernel.spec().values.map(|v| v.len()).unwrap_or(0) as f64).powf(1.0 / d as f64).round() as usize;
            kernel.grid(own)
        })?;
        let fft = GridFft::new(d, g.size());
        Some((fft.coefficients(&g), g.size()))
    };
    let span = match &dft {
        Some((_, m)) => span.min(*m as i64 / 2),
        None => span,
    };
    let mut best: f64 = 0.0;
    let mut k = vec![-span; d];
    loop {
        let n2: f64 = k.iter().map(|&v| (v * v) as f64).sum();
        if n2.sqrt() > cut {
            let val = match &dft {
                None => kernel.fourier(&k)?,
                Some((coeffs, m)) => {
                    let multi: Vec<usize> = k.iter().map(|&v| v.rem_euclid(*m as i64) as usize).collect();
                    let flat = multi.iter().fold(0usize, |acc, &a| acc * m + a);
                    coeffs[flat].norm()
                }
            };
            best = best.max(val.abs());
        }
        let mut i = d;
        loop {
            if i == 0 {
                return Ok(best);
            }
            i -= 1;
            k[i] += 1;
            if k[i] <= span {
                break;
            }
            k[i] = -span;
        }
    }
}

fn directions(d: usize) -> Vec<Vec<f64>> {
    match d {
        1 => vec![vec![1.0], vec![-1.0]],
        2 => (0..720).map(|i| {
            let t = i as f64 * PI / 360.0;
            vec![t.cos(), t.sin()]
        }).collect(),
        _ => {
            // golden-spiral points on S^2, padded with zeros for higher d
            let n = 2000;
            let mut out: Vec<Vec<f64>> = (0..n)
                .map(|i| {
                    let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
                    let r = (1.0 - z * z).sqrt();
                    let phi = i as f64 * PI * (3.0 - 5f64.sqrt());
                    let mut v = vec![0.0; d];
                    v[0] = r * phi.cos();
                    v[1] = r * phi.sin();
                    v[2] = z;
                    v
                })
                .collect();
            for a in 0..d {
                let mut e = vec![0.0; d];
                e[a] = 1.0;
                out.push(e);
            }
            out
        }
    }
}

/// Radial scan of `|Ǩ^|` beyond radius `c`; `None` without a closed form.
fn continuum_tail(kernel: &dyn Kernel, c: f64) -> Option<f64> {
    let d = kernel.dim();
    kernel.unscaled_fourier(&vec![c; d])?;
    let steps = 4000;
    let reach = 40.0;
    let mut best: f64 = 0.0;
    for u in directions(d) {
        for s in 0..=steps {
            let r = c + reach * s as f64 / steps as f64;
            let xi: Vec<f64> = u.iter().map(|v| v * r).collect();
            best = best.max(kernel.unscaled_fourier(&xi)?.abs());
        }
    }
    Some(best)
}

fn kappa(kernel: &dyn Kernel, eta: f64) -> Option<f64> {
    let d = kernel.dim();
    let n = 8i64;
    let mut best = f64::INFINITY;
    let mut idx = vec![-n; d];
    loop {
        let x: Vec<f64> = idx.iter().map(|&i| eta * i as f64 / n as f64).collect();
        best = best.min(kernel.unscaled_density(&x)?);
        let mut k = d;
        loop {
            if k == 0 {
                return Some(best);
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] <= n {
                break;
            }
            idx[k] = -n;
        }
    }
}

pub fn kernel_stats(kernel: &dyn Kernel, c: f64, eta: f64) -> Result<KernelStats> {
    if !(c > 0.0) || !(eta > 0.0) {
        return Err(Error::Domain(format!("kernel_stats needs c > 0 and eta > 0, got c={c}, eta={eta}")));
    }
    let d = kernel.dim();
    let eps = kernel.epsilon();
    let tabulated = kernel.spec().values.is_some();
    let (first_moment, bold_raw, m, converged) = if tabulated {
        let own = (kernel.spec().values.map(|v| v.len()).unwrap_or(0) as f64).powf(1.0 / d as f64).round() as usize;
        (first_moment_at(kernel, own)?, l2_at(kernel, own)?, own, false)
    } else {
        let mut m0 = 64usize;
        while (m0 as f64) * eps < 4.0 {
            m0 *= 2;
        }
        let m0 = m0.min(max_grid(d));
        let (fm, m1, c1) = refine(kernel, m0, first_moment_at)?;
        let (l2, m2, c2) = refine(kernel, m0, l2_at)?;
        (fm, l2, m1.max(m2), c1 && c2)
    };
    let bold_k = eps.powf(d as f64 / 2.0) * bold_raw;
    let tail_sup_lattice = lattice_tail(kernel, c)?;
    let tail_sup = continuum_tail(kernel, c).unwrap_or(tail_sup_lattice);
    let moments = kernel.tensor_moments();
    Ok(KernelStats {
        epsilon: eps,
        first_moment,
        bold_k,
        c,
        tail_sup,
        tail_sup_lattice,
        moment_a: moments.map(|m| m.0),
        moment_a_low: moments.map(|m| m.1),
        eta,
        kappa: kappa(kernel, eta),
        grid_m: m,
        converged,
    })
}
